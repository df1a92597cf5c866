//! Parser and canonical serializer for the PDDL 1.2 subset the bundled
//! domains use: `:strips`, `:typing`, `:negative-preconditions`.
//!
//! Restrictions beyond baseline PDDL, each rejected with a positioned
//! error: arity at most [`MAX_ARITY`], single-parent type hierarchy,
//! variables-only action bodies (no constants), positive-only `:init`,
//! no `:constants`/`:functions`/conditional effects.
//!
//! Serialization is canonical: sections, declarations, and literals are
//! emitted in name-sorted order, so `serialize ∘ parse` is a fixpoint —
//! re-parsing and re-serializing canonical text reproduces it byte for
//! byte.

use crate::rel::{
    ActionId, Atom, Domain, GroundCondition, Literal, ObjId, ObjTable, Operator, PredId, State,
    Task, TypeId, VarAtom, VarId, MAX_ARITY, MAX_OBJECTS,
};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum PddlError {
    #[error("{file}:{line}:{col}: {msg}")]
    Parse { file: String, line: u32, col: u32, msg: String },
    #[error("vocabulary mismatch: {0}")]
    Vocabulary(String),
}

type Result<T> = std::result::Result<T, PddlError>;

const REQUIREMENTS: [&str; 3] = [":strips", ":typing", ":negative-preconditions"];

// ---------------------------------------------------------------------------
// S-expression reading
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum Sexp {
    Sym { s: String, line: u32, col: u32 },
    List { items: Vec<Sexp>, line: u32, col: u32 },
}

impl Sexp {
    fn pos(&self) -> (u32, u32) {
        match self {
            Sexp::Sym { line, col, .. } | Sexp::List { line, col, .. } => (*line, *col),
        }
    }
}

struct Reader<'a> {
    file: &'a str,
    chars: Vec<char>,
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Reader<'a> {
    fn new(file: &'a str, src: &str) -> Reader<'a> {
        Reader { file, chars: src.chars().collect(), pos: 0, line: 1, col: 1 }
    }

    fn err<T>(&self, line: u32, col: u32, msg: impl Into<String>) -> Result<T> {
        Err(PddlError::Parse { file: self.file.to_string(), line, col, msg: msg.into() })
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some(';') => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn read_all(&mut self) -> Result<Vec<Sexp>> {
        let mut forms = Vec::new();
        loop {
            self.skip_trivia();
            if self.peek().is_none() {
                return Ok(forms);
            }
            forms.push(self.read_form()?);
        }
    }

    fn read_form(&mut self) -> Result<Sexp> {
        self.skip_trivia();
        let (line, col) = (self.line, self.col);
        match self.peek() {
            None => self.err(line, col, "unexpected end of input"),
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.peek() {
                        None => return self.err(line, col, "unclosed '('"),
                        Some(')') => {
                            self.bump();
                            return Ok(Sexp::List { items, line, col });
                        }
                        Some(_) => items.push(self.read_form()?),
                    }
                }
            }
            Some(')') => self.err(line, col, "unmatched ')'"),
            Some(_) => {
                let mut s = String::new();
                while let Some(c) = self.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    s.push(c);
                    self.bump();
                }
                // PDDL symbols are case-insensitive.
                Ok(Sexp::Sym { s: s.to_ascii_lowercase(), line, col })
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing helpers
// ---------------------------------------------------------------------------

struct Ctx<'a> {
    file: &'a str,
}

impl<'a> Ctx<'a> {
    fn err<T>(&self, at: (u32, u32), msg: impl Into<String>) -> Result<T> {
        Err(PddlError::Parse {
            file: self.file.to_string(),
            line: at.0,
            col: at.1,
            msg: msg.into(),
        })
    }

    fn sym<'s>(&self, e: &'s Sexp, what: &str) -> Result<(&'s str, (u32, u32))> {
        match e {
            Sexp::Sym { s, line, col } => Ok((s.as_str(), (*line, *col))),
            Sexp::List { line, col, .. } => {
                self.err((*line, *col), format!("expected {what}, found '('"))
            }
        }
    }

    fn list<'s>(&self, e: &'s Sexp, what: &str) -> Result<(&'s [Sexp], (u32, u32))> {
        match e {
            Sexp::List { items, line, col } => Ok((items.as_slice(), (*line, *col))),
            Sexp::Sym { s, line, col } => {
                self.err((*line, *col), format!("expected {what}, found '{s}'"))
            }
        }
    }
}

/// One group of a PDDL typed list: the names, their declared type (or
/// `None` for the untyped tail, which defaults to `object`), and the
/// position of each name.
struct TypedGroup {
    names: Vec<(String, (u32, u32))>,
    ty: Option<(String, (u32, u32))>,
}

fn parse_typed_list(ctx: &Ctx, items: &[Sexp], what: &str) -> Result<Vec<TypedGroup>> {
    let mut groups = Vec::new();
    let mut pending: Vec<(String, (u32, u32))> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let (s, at) = ctx.sym(&items[i], what)?;
        if s == "-" {
            if pending.is_empty() {
                return ctx.err(at, "dangling '-' in typed list");
            }
            let Some(ty_item) = items.get(i + 1) else {
                return ctx.err(at, "'-' must be followed by a type name");
            };
            let (ty, ty_at) = ctx.sym(ty_item, "a type name")?;
            if ty == "-" {
                return ctx.err(ty_at, "'-' must be followed by a type name");
            }
            groups.push(TypedGroup {
                names: std::mem::take(&mut pending),
                ty: Some((ty.to_string(), ty_at)),
            });
            i += 2;
        } else {
            pending.push((s.to_string(), at));
            i += 1;
        }
    }
    if !pending.is_empty() {
        groups.push(TypedGroup { names: pending, ty: None });
    }
    Ok(groups)
}

// ---------------------------------------------------------------------------
// Domain parsing
// ---------------------------------------------------------------------------

/// Parse a domain document. `file` is used only in error messages.
pub fn parse_domain(file: &str, src: &str) -> Result<Domain> {
    let ctx = Ctx { file };
    let forms = Reader::new(file, src).read_all()?;
    if forms.len() != 1 {
        let at = forms.get(1).map(|f| f.pos()).unwrap_or((1, 1));
        return ctx.err(at, "expected exactly one (define ...) form");
    }
    let (items, at) = ctx.list(&forms[0], "a (define ...) form")?;
    if items.is_empty() || ctx.sym(&items[0], "define")?.0 != "define" {
        return ctx.err(at, "expected (define (domain ...) ...)");
    }
    let (head, head_at) = ctx.list(
        items.get(1).ok_or_else(|| err_at(file, at, "missing (domain NAME)"))?,
        "(domain NAME)",
    )?;
    if head.len() != 2 || ctx.sym(&head[0], "domain")?.0 != "domain" {
        return ctx.err(head_at, "expected (domain NAME)");
    }
    let name = ctx.sym(&head[1], "a domain name")?.0.to_string();

    let mut types = crate::rel::TypeTable::default();
    types.add("object", None);
    let mut preds = crate::rel::PredTable::default();
    let mut actions = crate::rel::ActionTable::default();
    let mut operators: Vec<Operator> = Vec::new();
    let mut action_params: HashMap<String, (u32, u32)> = HashMap::new();
    let mut seen_types = false;

    for section in &items[2..] {
        let (sec, sec_at) = ctx.list(section, "a domain section")?;
        if sec.is_empty() {
            return ctx.err(sec_at, "empty domain section");
        }
        let (kind, _) = ctx.sym(&sec[0], "a section keyword")?;
        match kind {
            ":requirements" => {
                for req in &sec[1..] {
                    let (r, r_at) = ctx.sym(req, "a requirement flag")?;
                    if !REQUIREMENTS.contains(&r) {
                        return ctx.err(
                            r_at,
                            format!(
                                "unsupported requirement '{r}' (supported: {})",
                                REQUIREMENTS.join(" ")
                            ),
                        );
                    }
                }
            }
            ":types" => {
                if seen_types {
                    return ctx.err(sec_at, "duplicate :types section");
                }
                seen_types = true;
                parse_types(&ctx, &sec[1..], &mut types)?;
            }
            ":predicates" => {
                for decl in &sec[1..] {
                    let (d, d_at) = ctx.list(decl, "a predicate declaration")?;
                    if d.is_empty() {
                        return ctx.err(d_at, "empty predicate declaration");
                    }
                    let (pname, p_at) = ctx.sym(&d[0], "a predicate name")?;
                    if preds.id(pname).is_some() {
                        return ctx.err(p_at, format!("duplicate predicate '{pname}'"));
                    }
                    let params = parse_var_list(&ctx, &d[1..], &types)?;
                    if params.len() > MAX_ARITY {
                        return ctx.err(
                            p_at,
                            format!(
                                "predicate '{pname}' has arity {} (max {MAX_ARITY})",
                                params.len()
                            ),
                        );
                    }
                    preds.add(pname, params.into_iter().map(|(_, t)| t).collect());
                }
            }
            ":action" => {
                let op = parse_action(&ctx, sec, sec_at, &types, &preds, &mut actions)?;
                if let Some(prev) = action_params.insert(op.name.clone(), sec_at) {
                    let _ = prev;
                    return ctx.err(sec_at, format!("duplicate action '{}'", op.name));
                }
                operators.push(op);
            }
            other => {
                return ctx.err(sec_at, format!("unsupported domain section '{other}'"));
            }
        }
    }

    Ok(Domain { name, types, preds, actions, operators })
}

fn err_at(file: &str, at: (u32, u32), msg: &str) -> PddlError {
    PddlError::Parse { file: file.to_string(), line: at.0, col: at.1, msg: msg.to_string() }
}

/// Two-pass type hierarchy construction: intern every mentioned name in
/// sorted order (ids are then independent of declaration order), then wire
/// parent edges and reject multiple parents or cycles.
fn parse_types(ctx: &Ctx, items: &[Sexp], types: &mut crate::rel::TypeTable) -> Result<()> {
    let groups = parse_typed_list(ctx, items, "a type name")?;
    let mut edges: Vec<(String, String, (u32, u32))> = Vec::new();
    let mut mentioned: BTreeSet<String> = BTreeSet::new();
    for g in &groups {
        let (parent, _) = g.ty.clone().unwrap_or(("object".to_string(), (0, 0)));
        mentioned.insert(parent.clone());
        for (child, at) in &g.names {
            mentioned.insert(child.clone());
            edges.push((child.clone(), parent.clone(), *at));
        }
    }
    for name in &mentioned {
        types.add(name, Some(TypeId(0)));
    }
    let mut assigned: HashMap<String, String> = HashMap::new();
    for (child, parent, at) in &edges {
        if child == "object" {
            return ctx.err(*at, "'object' cannot be re-declared");
        }
        if let Some(prev) = assigned.get(child) {
            if prev != parent {
                return ctx.err(
                    *at,
                    format!("type '{child}' declared with two parents ('{prev}', '{parent}')"),
                );
            }
        }
        assigned.insert(child.clone(), parent.clone());
        let c = types.id(child).unwrap();
        let p = types.id(parent).unwrap();
        types.set_parent(c, Some(p));
    }
    types.set_parent(TypeId(0), None);
    // Cycle check: every chain must reach the root within `len` steps.
    for i in 0..types.len() {
        let mut cur = TypeId(i as u16);
        for _ in 0..=types.len() {
            match types.parent[cur.idx()] {
                None => break,
                Some(p) => cur = p,
            }
        }
        if types.parent[cur.idx()].is_some() {
            return ctx.err((1, 1), format!("type hierarchy cycle through '{}'", types.name(cur)));
        }
    }
    Ok(())
}

/// Parse `?a ?b - t ?c - u ...` into `(name, type)` pairs, rejecting
/// duplicates and unknown types.
fn parse_var_list(
    ctx: &Ctx,
    items: &[Sexp],
    types: &crate::rel::TypeTable,
) -> Result<Vec<(String, TypeId)>> {
    let groups = parse_typed_list(ctx, items, "a variable")?;
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for g in groups {
        let ty = match &g.ty {
            None => TypeId(0),
            Some((name, at)) => types
                .id(name)
                .ok_or_else(|| err_at(ctx.file, *at, &format!("unknown type '{name}'")))?,
        };
        for (v, at) in g.names {
            if !v.starts_with('?') || v.len() < 2 {
                return ctx.err(at, format!("expected a '?variable', found '{v}'"));
            }
            if !seen.insert(v.clone()) {
                return ctx.err(at, format!("duplicate variable '{v}'"));
            }
            out.push((v, ty));
        }
    }
    Ok(out)
}

fn parse_action(
    ctx: &Ctx,
    sec: &[Sexp],
    sec_at: (u32, u32),
    types: &crate::rel::TypeTable,
    preds: &crate::rel::PredTable,
    actions: &mut crate::rel::ActionTable,
) -> Result<Operator> {
    let name = ctx
        .sym(sec.get(1).ok_or_else(|| err_at(ctx.file, sec_at, "missing action name"))?, "an action name")?
        .0
        .to_string();
    let mut params: Option<Vec<(String, TypeId)>> = None;
    let mut pre: Option<&Sexp> = None;
    let mut eff: Option<&Sexp> = None;
    let mut i = 2;
    while i < sec.len() {
        let (key, key_at) = ctx.sym(&sec[i], "an action keyword")?;
        let val = sec
            .get(i + 1)
            .ok_or_else(|| err_at(ctx.file, key_at, &format!("missing value for {key}")))?;
        match key {
            ":parameters" => {
                let (items, _) = ctx.list(val, "a parameter list")?;
                let list = parse_var_list(ctx, items, types)?;
                if list.len() > MAX_ARITY {
                    return ctx.err(
                        key_at,
                        format!("action '{name}' has arity {} (max {MAX_ARITY})", list.len()),
                    );
                }
                params = Some(list);
            }
            ":precondition" => pre = Some(val),
            ":effect" => eff = Some(val),
            other => return ctx.err(key_at, format!("unsupported action keyword '{other}'")),
        }
        i += 2;
    }
    let params = params.ok_or_else(|| err_at(ctx.file, sec_at, "action missing :parameters"))?;
    let pre = pre.ok_or_else(|| err_at(ctx.file, sec_at, "action missing :precondition"))?;
    let eff = eff.ok_or_else(|| err_at(ctx.file, sec_at, "action missing :effect"))?;

    let var_ids: HashMap<&str, VarId> =
        params.iter().enumerate().map(|(i, (v, _))| (v.as_str(), VarId(i as u16))).collect();
    let var_types: Vec<TypeId> = params.iter().map(|(_, t)| *t).collect();

    let pre_lits = parse_lifted_condition(ctx, pre, preds, types, &var_ids, &var_types)?;
    let eff_lits = parse_lifted_condition(ctx, eff, preds, types, &var_ids, &var_types)?;
    let mut add = Vec::new();
    let mut del = Vec::new();
    for l in eff_lits {
        if l.positive {
            add.push(l.atom);
        } else {
            del.push(l.atom);
        }
    }
    if add.is_empty() && del.is_empty() {
        return ctx.err(sec_at, format!("action '{name}' has an empty effect"));
    }

    let param_names: Vec<String> = params.iter().map(|(v, _)| v.clone()).collect();
    if actions.id(&name).is_some() {
        return ctx.err(sec_at, format!("duplicate action '{name}'"));
    }
    let action = actions.add(&name, var_types.clone());
    Ok(Operator::new(name, action, var_types, param_names, pre_lits, add, del))
}

/// Parse `(and LIT*)` or a bare literal over declared variables.
fn parse_lifted_condition(
    ctx: &Ctx,
    e: &Sexp,
    preds: &crate::rel::PredTable,
    types: &crate::rel::TypeTable,
    var_ids: &HashMap<&str, VarId>,
    var_types: &[TypeId],
) -> Result<Vec<Literal>> {
    let (items, at) = ctx.list(e, "a condition")?;
    if items.is_empty() {
        return ctx.err(at, "empty condition; use (and) for no literals");
    }
    let (head, _) = ctx.sym(&items[0], "a condition head")?;
    if head == "and" {
        let mut out = Vec::new();
        for item in &items[1..] {
            out.push(parse_lifted_literal(ctx, item, preds, types, var_ids, var_types)?);
        }
        Ok(out)
    } else {
        Ok(vec![parse_lifted_literal(ctx, e, preds, types, var_ids, var_types)?])
    }
}

fn parse_lifted_literal(
    ctx: &Ctx,
    e: &Sexp,
    preds: &crate::rel::PredTable,
    types: &crate::rel::TypeTable,
    var_ids: &HashMap<&str, VarId>,
    var_types: &[TypeId],
) -> Result<Literal> {
    let (items, at) = ctx.list(e, "a literal")?;
    if items.is_empty() {
        return ctx.err(at, "empty literal");
    }
    let (head, _) = ctx.sym(&items[0], "a predicate or 'not'")?;
    if head == "not" {
        if items.len() != 2 {
            return ctx.err(at, "(not ...) takes exactly one literal");
        }
        let inner = parse_lifted_literal(ctx, &items[1], preds, types, var_ids, var_types)?;
        if !inner.positive {
            return ctx.err(at, "double negation is not supported");
        }
        return Ok(Literal::neg(inner.atom));
    }
    let pred = preds
        .id(head)
        .ok_or_else(|| err_at(ctx.file, at, &format!("unknown predicate '{head}'")))?;
    let want = preds.arity(pred);
    if items.len() - 1 != want {
        return ctx.err(
            at,
            format!("predicate '{head}' expects {want} arguments, found {}", items.len() - 1),
        );
    }
    let mut args = Vec::new();
    for (slot, item) in items[1..].iter().enumerate() {
        let (v, v_at) = ctx.sym(item, "a variable")?;
        if !v.starts_with('?') {
            return ctx.err(v_at, format!("constants are not allowed in action bodies: '{v}'"));
        }
        let id = *var_ids
            .get(v)
            .ok_or_else(|| err_at(ctx.file, v_at, &format!("undeclared variable '{v}'")))?;
        let slot_ty = preds.param_types[pred.idx()][slot];
        if !types.is_subtype(var_types[id.idx()], slot_ty) {
            return ctx.err(
                v_at,
                format!(
                    "variable '{v}' of type '{}' does not conform to slot type '{}' of '{head}'",
                    types.name(var_types[id.idx()]),
                    types.name(slot_ty)
                ),
            );
        }
        args.push(id);
    }
    Ok(Literal::pos(VarAtom::new(pred, &args)))
}

// ---------------------------------------------------------------------------
// Problem parsing
// ---------------------------------------------------------------------------

/// Parse a problem document against its domain.
pub fn parse_problem(file: &str, src: &str, domain: &Domain) -> Result<Task> {
    let ctx = Ctx { file };
    let forms = Reader::new(file, src).read_all()?;
    if forms.len() != 1 {
        let at = forms.get(1).map(|f| f.pos()).unwrap_or((1, 1));
        return ctx.err(at, "expected exactly one (define ...) form");
    }
    let (items, at) = ctx.list(&forms[0], "a (define ...) form")?;
    if items.is_empty() || ctx.sym(&items[0], "define")?.0 != "define" {
        return ctx.err(at, "expected (define (problem ...) ...)");
    }
    let (head, head_at) = ctx.list(
        items.get(1).ok_or_else(|| err_at(file, at, "missing (problem NAME)"))?,
        "(problem NAME)",
    )?;
    if head.len() != 2 || ctx.sym(&head[0], "problem")?.0 != "problem" {
        return ctx.err(head_at, "expected (problem NAME)");
    }
    let name = ctx.sym(&head[1], "a problem name")?.0.to_string();

    let mut objects: Option<ObjTable> = None;
    let mut init: Option<State> = None;
    let mut goal: Option<GroundCondition> = None;

    for section in &items[2..] {
        let (sec, sec_at) = ctx.list(section, "a problem section")?;
        if sec.is_empty() {
            return ctx.err(sec_at, "empty problem section");
        }
        let (kind, _) = ctx.sym(&sec[0], "a section keyword")?;
        match kind {
            ":domain" => {
                let (dname, d_at) = ctx.sym(
                    sec.get(1).ok_or_else(|| err_at(file, sec_at, "missing domain name"))?,
                    "a domain name",
                )?;
                if dname != domain.name {
                    return ctx.err(
                        d_at,
                        format!("problem is for domain '{dname}', expected '{}'", domain.name),
                    );
                }
            }
            ":objects" => {
                let groups = parse_typed_list(&ctx, &sec[1..], "an object name")?;
                let mut pairs = Vec::new();
                let mut seen = BTreeSet::new();
                for g in groups {
                    let ty = match &g.ty {
                        None => TypeId(0),
                        Some((tname, t_at)) => domain.types.id(tname).ok_or_else(|| {
                            err_at(file, *t_at, &format!("unknown type '{tname}'"))
                        })?,
                    };
                    for (oname, o_at) in g.names {
                        if oname.starts_with('?') {
                            return ctx.err(o_at, format!("'{oname}' is not an object name"));
                        }
                        if !seen.insert(oname.clone()) {
                            return ctx.err(o_at, format!("duplicate object '{oname}'"));
                        }
                        pairs.push((oname, ty));
                    }
                }
                if pairs.len() > MAX_OBJECTS {
                    return ctx.err(sec_at, format!("too many objects (max {MAX_OBJECTS})"));
                }
                objects = Some(ObjTable::from_sorted(pairs));
            }
            ":init" => {
                let table = objects.as_ref().ok_or_else(|| {
                    err_at(file, sec_at, ":init must come after :objects")
                })?;
                let mut atoms = BTreeSet::new();
                for item in &sec[1..] {
                    let (lit_items, lit_at) = ctx.list(item, "an init atom")?;
                    if !lit_items.is_empty() {
                        if let Sexp::Sym { s, .. } = &lit_items[0] {
                            if s == "not" {
                                return ctx.err(
                                    lit_at,
                                    ":init lists positive atoms only (closed world)",
                                );
                            }
                        }
                    }
                    atoms.insert(parse_ground_atom(&ctx, item, domain, table)?);
                }
                init = Some(State(atoms));
            }
            ":goal" => {
                let table = objects.as_ref().ok_or_else(|| {
                    err_at(file, sec_at, ":goal must come after :objects")
                })?;
                let val =
                    sec.get(1).ok_or_else(|| err_at(file, sec_at, "missing goal condition"))?;
                goal = Some(parse_ground_condition(&ctx, val, domain, table)?);
            }
            other => return ctx.err(sec_at, format!("unsupported problem section '{other}'")),
        }
    }

    let objects = objects.ok_or_else(|| err_at(file, at, "problem missing :objects"))?;
    let init = init.ok_or_else(|| err_at(file, at, "problem missing :init"))?;
    let goal = goal.ok_or_else(|| err_at(file, at, "problem missing :goal"))?;
    Ok(Task::new(domain, name, objects, init, goal))
}

fn parse_ground_atom(ctx: &Ctx, e: &Sexp, domain: &Domain, objects: &ObjTable) -> Result<Atom> {
    let (items, at) = ctx.list(e, "a ground atom")?;
    if items.is_empty() {
        return ctx.err(at, "empty atom");
    }
    let (head, _) = ctx.sym(&items[0], "a predicate name")?;
    let pred = domain
        .preds
        .id(head)
        .ok_or_else(|| err_at(ctx.file, at, &format!("unknown predicate '{head}'")))?;
    let want = domain.preds.arity(pred);
    if items.len() - 1 != want {
        return ctx.err(
            at,
            format!("predicate '{head}' expects {want} arguments, found {}", items.len() - 1),
        );
    }
    let mut args = Vec::new();
    for (slot, item) in items[1..].iter().enumerate() {
        let (oname, o_at) = ctx.sym(item, "an object name")?;
        let obj = objects
            .id(oname)
            .ok_or_else(|| err_at(ctx.file, o_at, &format!("unknown object '{oname}'")))?;
        let slot_ty = domain.preds.param_types[pred.idx()][slot];
        if !domain.types.is_subtype(objects.ty(obj), slot_ty) {
            return ctx.err(
                o_at,
                format!(
                    "object '{oname}' of type '{}' does not conform to slot type '{}' of '{head}'",
                    domain.types.name(objects.ty(obj)),
                    domain.types.name(slot_ty)
                ),
            );
        }
        args.push(obj);
    }
    Ok(Atom::new(pred, &args))
}

fn parse_ground_condition(
    ctx: &Ctx,
    e: &Sexp,
    domain: &Domain,
    objects: &ObjTable,
) -> Result<GroundCondition> {
    let (items, at) = ctx.list(e, "a goal condition")?;
    if items.is_empty() {
        return ctx.err(at, "empty goal; use (and) for an empty condition");
    }
    let (head, _) = ctx.sym(&items[0], "a goal head")?;
    let literals: Vec<&Sexp> = if head == "and" {
        items[1..].iter().collect()
    } else {
        vec![e]
    };
    let mut cond = GroundCondition::default();
    for lit in literals {
        let (lit_items, lit_at) = ctx.list(lit, "a goal literal")?;
        let negated = matches!(lit_items.first(), Some(Sexp::Sym { s, .. }) if s == "not");
        if negated {
            if lit_items.len() != 2 {
                return ctx.err(lit_at, "(not ...) takes exactly one literal");
            }
            cond.neg.insert(parse_ground_atom(ctx, &lit_items[1], domain, objects)?);
        } else {
            cond.pos.insert(parse_ground_atom(ctx, lit, domain, objects)?);
        }
    }
    Ok(cond)
}

// ---------------------------------------------------------------------------
// Canonical serialization
// ---------------------------------------------------------------------------

fn lifted_sort_key(domain: &Domain, op: &Operator, atom: VarAtom) -> (String, Vec<String>) {
    let arity = domain.preds.arity(atom.pred());
    (
        domain.preds.name(atom.pred()).to_string(),
        atom.args(arity).iter().map(|v| op.param_names[v.idx()].clone()).collect(),
    )
}

fn render_lifted(domain: &Domain, op: &Operator, atom: VarAtom) -> String {
    let arity = domain.preds.arity(atom.pred());
    let mut s = format!("({}", domain.preds.name(atom.pred()));
    for v in atom.args(arity) {
        s.push(' ');
        s.push_str(&op.param_names[v.idx()]);
    }
    s.push(')');
    s
}

fn render_condition(domain: &Domain, op: &Operator) -> String {
    let mut lits: Vec<(bool, VarAtom)> = op.pre.iter().map(|l| (l.positive, l.atom)).collect();
    lits.sort_by_key(|(positive, atom)| {
        (lifted_sort_key(domain, op, *atom), !*positive)
    });
    let body: Vec<String> = lits
        .iter()
        .map(|(positive, atom)| {
            let inner = render_lifted(domain, op, *atom);
            if *positive {
                inner
            } else {
                format!("(not {inner})")
            }
        })
        .collect();
    format!("(and {})", body.join(" "))
}

fn render_effect(domain: &Domain, op: &Operator) -> String {
    let mut adds: Vec<VarAtom> = op.add.clone();
    adds.sort_by_key(|a| lifted_sort_key(domain, op, *a));
    let mut dels: Vec<VarAtom> = op.del.clone();
    dels.sort_by_key(|a| lifted_sort_key(domain, op, *a));
    let mut body: Vec<String> =
        adds.iter().map(|a| render_lifted(domain, op, *a)).collect();
    body.extend(dels.iter().map(|a| format!("(not {})", render_lifted(domain, op, *a))));
    format!("(and {})", body.join(" "))
}

fn render_params(domain: &Domain, names: &[String], types_of: &[TypeId]) -> String {
    let parts: Vec<String> = names
        .iter()
        .zip(types_of)
        .map(|(n, t)| format!("{n} - {}", domain.types.name(*t)))
        .collect();
    format!("({})", parts.join(" "))
}

fn render_action_block(domain: &Domain, op: &Operator) -> String {
    format!(
        "  (:action {}\n    :parameters {}\n    :precondition {}\n    :effect {})\n",
        op.name,
        render_params(domain, &op.param_names, &op.params),
        render_condition(domain, op),
        render_effect(domain, op),
    )
}

/// Serialize a full domain document in canonical form.
pub fn serialize_domain(domain: &Domain) -> String {
    serialize_operator_set(domain, &domain.name, &domain.operators)
}

/// Serialize an arbitrary operator set as a domain document over the same
/// vocabulary. Operators are emitted in name-sorted order.
pub fn serialize_operator_set(domain: &Domain, name: &str, operators: &[Operator]) -> String {
    let mut out = String::new();
    out.push_str(&format!("(define (domain {name})\n"));
    out.push_str(&format!("  (:requirements {})\n", REQUIREMENTS.join(" ")));

    // Types, grouped by parent, both levels name-sorted.
    let mut by_parent: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for i in 0..domain.types.len() {
        let t = TypeId(i as u16);
        if let Some(p) = domain.types.parent[t.idx()] {
            by_parent
                .entry(domain.types.name(p).to_string())
                .or_default()
                .push(domain.types.name(t).to_string());
        }
    }
    if !by_parent.is_empty() {
        out.push_str("  (:types\n");
        for (parent, mut children) in by_parent {
            children.sort();
            out.push_str(&format!("    {} - {parent}\n", children.join(" ")));
        }
        out.push_str("  )\n");
    }

    let mut pred_order: Vec<PredId> = (0..domain.preds.len()).map(|i| PredId(i as u16)).collect();
    pred_order.sort_by(|a, b| domain.preds.name(*a).cmp(domain.preds.name(*b)));
    out.push_str("  (:predicates\n");
    for p in pred_order {
        let vars: Vec<String> = domain.preds.param_types[p.idx()]
            .iter()
            .enumerate()
            .map(|(i, t)| format!("?v{i} - {}", domain.types.name(*t)))
            .collect();
        if vars.is_empty() {
            out.push_str(&format!("    ({})\n", domain.preds.name(p)));
        } else {
            out.push_str(&format!("    ({} {})\n", domain.preds.name(p), vars.join(" ")));
        }
    }
    out.push_str("  )\n");

    let mut op_order: Vec<&Operator> = operators.iter().collect();
    op_order.sort_by(|a, b| a.name.cmp(&b.name));
    for op in op_order {
        out.push_str(&render_action_block(domain, op));
    }
    out.push_str(")\n");
    out
}

/// Serialize a task as a canonical problem document.
pub fn serialize_problem(domain: &Domain, task: &Task) -> String {
    let mut out = String::new();
    out.push_str(&format!("(define (problem {})\n", task.name));
    out.push_str(&format!("  (:domain {})\n", domain.name));

    out.push_str("  (:objects\n");
    for i in 0..task.objects.len() {
        let o = ObjId(i as u16);
        out.push_str(&format!(
            "    {} - {}\n",
            task.objects.name(o),
            domain.types.name(task.objects.ty(o))
        ));
    }
    out.push_str("  )\n");

    let mut init: Vec<String> =
        task.init.iter().map(|a| domain.render_atom(&task.objects, a)).collect();
    init.sort();
    out.push_str("  (:init\n");
    for atom in init {
        out.push_str(&format!("    {atom}\n"));
    }
    out.push_str("  )\n");

    let mut goal: Vec<String> = task
        .goal
        .pos
        .iter()
        .map(|a| domain.render_atom(&task.objects, *a))
        .chain(task.goal.neg.iter().map(|a| format!("(not {})", domain.render_atom(&task.objects, *a))))
        .collect();
    goal.sort();
    out.push_str(&format!("  (:goal (and {}))\n", goal.join(" ")));
    out.push_str(")\n");
    out
}

/// Action id for each operator name, used when reloading serialized
/// operator sets whose schema tables must match the reference domain.
pub fn match_vocabulary(reference: &Domain, parsed: &Domain) -> Option<Vec<ActionId>> {
    if reference.preds.len() != parsed.preds.len() {
        return None;
    }
    parsed
        .operators
        .iter()
        .map(|op| reference.actions.id(parsed.actions.name(op.action)))
        .collect()
}

/// Re-intern a parsed operator set onto a reference domain's symbol tables.
///
/// [`serialize_operator_set`] emits declarations name-sorted, so a
/// round-tripped document generally assigns different numeric ids than the
/// domain it was derived from; grounding against a bundle's tasks needs the
/// bundle's own ids. Both domains must declare the same vocabulary (types,
/// predicates, action schemas) up to declaration order, or this fails.
pub fn align_operators(reference: &Domain, parsed: &Domain) -> Result<Vec<Operator>> {
    let misfit = |msg: String| PddlError::Vocabulary(msg);

    let mut type_map = Vec::with_capacity(parsed.types.len());
    for name in &parsed.types.names {
        let t = reference
            .types
            .id(name)
            .ok_or_else(|| misfit(format!("type {name} not in reference domain")))?;
        type_map.push(t);
    }
    if reference.types.len() != parsed.types.len() {
        return Err(misfit("type tables differ in size".into()));
    }
    for (i, parent) in parsed.types.parent.iter().enumerate() {
        let want = parent.map(|p| type_map[p.idx()]);
        if reference.types.parent[type_map[i].idx()] != want {
            return Err(misfit(format!("type {} has a different parent", parsed.types.names[i])));
        }
    }

    let mut pred_map = Vec::with_capacity(parsed.preds.len());
    for (i, name) in parsed.preds.names.iter().enumerate() {
        let p = reference
            .preds
            .id(name)
            .ok_or_else(|| misfit(format!("predicate {name} not in reference domain")))?;
        let want: Vec<TypeId> = parsed.preds.param_types[i].iter().map(|t| type_map[t.idx()]).collect();
        if reference.preds.param_types[p.idx()] != want {
            return Err(misfit(format!("predicate {name} declares different parameter types")));
        }
        pred_map.push(p);
    }
    if reference.preds.len() != parsed.preds.len() {
        return Err(misfit("predicate tables differ in size".into()));
    }

    // Learned sets may carry several operators for one schema, named with
    // a `-<ordinal>` suffix; map those back onto the stem schema.
    let resolve_schema = |name: &str| {
        reference.actions.id(name).or_else(|| {
            let (stem, suffix) = name.rsplit_once('-')?;
            if !suffix.is_empty() && suffix.bytes().all(|b| b.is_ascii_digit()) {
                reference.actions.id(stem)
            } else {
                None
            }
        })
    };

    let mut out = Vec::with_capacity(parsed.operators.len());
    for op in &parsed.operators {
        let op_name = parsed.actions.name(op.action);
        let action = resolve_schema(op_name)
            .ok_or_else(|| misfit(format!("action {op_name} not in reference domain")))?;
        let params: Vec<TypeId> = op.params.iter().map(|t| type_map[t.idx()]).collect();
        if reference.actions.param_types[action.idx()] != params {
            return Err(misfit(format!("action {op_name} declares different parameter types")));
        }
        let remap = |va: VarAtom| {
            let arity = parsed.preds.arity(va.pred());
            VarAtom::new(pred_map[va.pred().idx()], &va.args(arity))
        };
        out.push(Operator::new(
            op.name.clone(),
            action,
            params,
            op.param_names.clone(),
            op.pre.iter().map(|l| Literal { atom: remap(l.atom), positive: l.positive }).collect(),
            op.add.iter().map(|&a| remap(a)).collect(),
            op.del.iter().map(|&a| remap(a)).collect(),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY_DOMAIN: &str = r#"
        ; a small domain exercising typing and negative preconditions
        (define (domain toy)
          (:requirements :strips :typing :negative-preconditions)
          (:types block - object heavy - block)
          (:predicates (on ?x - block ?y - block) (clear ?x - block) (marked ?x - heavy))
          (:action stack
            :parameters (?x - block ?y - block)
            :precondition (and (clear ?x) (clear ?y) (not (on ?x ?y)))
            :effect (and (on ?x ?y) (not (clear ?y))))
          (:action mark
            :parameters (?h - heavy)
            :precondition (and (clear ?h))
            :effect (and (marked ?h))))
    "#;

    const TOY_PROBLEM: &str = r#"
        (define (problem toy-1)
          (:domain toy)
          (:objects a b - block h - heavy)
          (:init (clear a) (clear b) (clear h))
          (:goal (and (on a b) (not (clear b)))))
    "#;

    #[test]
    fn parses_domain_structure() {
        let d = parse_domain("toy.pddl", TOY_DOMAIN).unwrap();
        assert_eq!(d.name, "toy");
        assert_eq!(d.preds.len(), 3);
        assert_eq!(d.actions.len(), 2);
        assert_eq!(d.operators.len(), 2);
        let stack = &d.operators[0];
        assert_eq!(stack.name, "stack");
        assert_eq!(stack.pre.len(), 3);
        assert_eq!(stack.pre.iter().filter(|l| !l.positive).count(), 1);
        assert_eq!(stack.add.len(), 1);
        assert_eq!(stack.del.len(), 1);
        // heavy is a subtype of block, so ?h can fill block slots.
        let mark = &d.operators[1];
        assert_eq!(mark.pre.len(), 1);
    }

    #[test]
    fn parses_problem_with_negative_goal() {
        let d = parse_domain("toy.pddl", TOY_DOMAIN).unwrap();
        let t = parse_problem("toy-1.pddl", TOY_PROBLEM, &d).unwrap();
        assert_eq!(t.name, "toy-1");
        assert_eq!(t.objects.len(), 3);
        assert_eq!(t.init.len(), 3);
        assert_eq!(t.goal.pos.len(), 1);
        assert_eq!(t.goal.neg.len(), 1);
        assert!(!t.init.satisfies(&t.goal));
    }

    #[test]
    fn serialization_is_a_parse_fixpoint() {
        let d = parse_domain("toy.pddl", TOY_DOMAIN).unwrap();
        let once = serialize_domain(&d);
        let d2 = parse_domain("canon.pddl", &once).unwrap();
        let twice = serialize_domain(&d2);
        assert_eq!(once, twice);

        let t = parse_problem("toy-1.pddl", TOY_PROBLEM, &d).unwrap();
        let p_once = serialize_problem(&d, &t);
        let t2 = parse_problem("canon-1.pddl", &p_once, &d).unwrap();
        let p_twice = serialize_problem(&d, &t2);
        assert_eq!(p_once, p_twice);
    }

    #[test]
    fn reparsed_domain_is_semantically_identical() {
        let d = parse_domain("toy.pddl", TOY_DOMAIN).unwrap();
        let d2 = parse_domain("canon.pddl", &serialize_domain(&d)).unwrap();
        let t = parse_problem("toy-1.pddl", TOY_PROBLEM, &d).unwrap();
        let t2 = parse_problem("toy-1.pddl", TOY_PROBLEM, &d2).unwrap();
        let render = |d: &Domain, t: &Task| -> Vec<String> {
            crate::rel::enumerate_ground_actions(d, t)
                .iter()
                .map(|ga| d.render_action(&t.objects, *ga))
                .collect()
        };
        assert_eq!(render(&d, &t), render(&d2, &t2));
        assert_eq!(
            crate::rel::count_ground_atoms(&d, &t),
            crate::rel::count_ground_atoms(&d2, &t2)
        );
    }

    fn expect_err(src: &str, needle: &str) {
        match parse_domain("bad.pddl", src) {
            Ok(_) => panic!("expected parse failure containing '{needle}'"),
            Err(e) => {
                let msg = e.to_string();
                assert!(msg.contains(needle), "error '{msg}' does not mention '{needle}'");
                assert!(msg.starts_with("bad.pddl:"), "error '{msg}' lacks position prefix");
            }
        }
    }

    #[test]
    fn rejects_malformed_domains() {
        expect_err("(define (domain x) (:requirements :adl))", "unsupported requirement");
        expect_err(
            "(define (domain x) (:predicates (p ?a ?b ?c ?d ?e)))",
            "arity 5",
        );
        expect_err(
            "(define (domain x) (:predicates (p)) (:action a :parameters () \
             :precondition (and (q)) :effect (and (p))))",
            "unknown predicate 'q'",
        );
        expect_err(
            "(define (domain x) (:predicates (p ?x - object)) (:action a :parameters () \
             :precondition (and) :effect (and (p c))))",
            "constants are not allowed",
        );
        expect_err(
            "(define (domain x) (:predicates (p ?x - object)) (:action a :parameters (?y - object) \
             :precondition (and) :effect (and (p ?z))))",
            "undeclared variable '?z'",
        );
        expect_err(
            "(define (domain x) (:types t - u u - t) (:predicates (p)))",
            "cycle",
        );
        expect_err(
            "(define (domain x) (:types t - object t - v) (:predicates (p)))",
            "two parents",
        );
        expect_err("(define (domain x) (:predicates (p) (p)))", "duplicate predicate");
        expect_err("(define (domain x) (:functions))", "unsupported domain section");
    }

    #[test]
    fn rejects_malformed_problems() {
        let d = parse_domain("toy.pddl", TOY_DOMAIN).unwrap();
        let bad_init = r#"(define (problem p) (:domain toy)
            (:objects a - block) (:init (not (clear a))) (:goal (and)))"#;
        let e = parse_problem("p.pddl", bad_init, &d).unwrap_err().to_string();
        assert!(e.contains("positive atoms only"));

        let bad_obj = r#"(define (problem p) (:domain toy)
            (:objects a a - block) (:init) (:goal (and)))"#;
        let e = parse_problem("p.pddl", bad_obj, &d).unwrap_err().to_string();
        assert!(e.contains("duplicate object"));

        let bad_type = r#"(define (problem p) (:domain toy)
            (:objects a - block) (:init (marked a)) (:goal (and)))"#;
        let e = parse_problem("p.pddl", bad_type, &d).unwrap_err().to_string();
        assert!(e.contains("does not conform"));

        let bad_domain = r#"(define (problem p) (:domain other)
            (:objects a - block) (:init) (:goal (and)))"#;
        let e = parse_problem("p.pddl", bad_domain, &d).unwrap_err().to_string();
        assert!(e.contains("expected 'toy'"));
    }

    #[test]
    fn error_positions_point_at_the_offender() {
        let src = "(define (domain x)\n  (:predicates\n    (p ?a ?b ?c ?d ?e)))";
        let e = parse_domain("bad.pddl", src).unwrap_err().to_string();
        assert!(e.starts_with("bad.pddl:3:"), "unexpected position in '{e}'");
    }

    #[test]
    fn comments_and_case_are_normalized() {
        let src = "(DEFINE (Domain Mixed) ; trailing comment\n  (:predicates (P ?x)))";
        let d = parse_domain("m.pddl", src).unwrap();
        assert_eq!(d.name, "mixed");
        assert!(d.preds.id("p").is_some());
    }

    #[test]
    fn aligned_operators_recover_reference_ids() {
        let reference = parse_domain("toy.pddl", TOY_DOMAIN).unwrap();
        // Two operators for the same schema, ordinal-suffixed like learner
        // cluster splits, plus one exact-name operator.
        let mut ops = vec![reference.operators[1].clone()];
        for (i, suffix) in [(0, "stack-1"), (0, "stack-2")] {
            let mut op = reference.operators[i].clone();
            op.name = suffix.to_string();
            ops.push(op);
        }
        let doc = serialize_operator_set(&reference, "toy-learned", &ops);
        let parsed = parse_domain("learned.pddl", &doc).unwrap();
        // Name-sorted serialization re-interns predicates differently...
        assert_ne!(parsed.preds.id("on"), reference.preds.id("on"));
        // ...but alignment maps everything back onto the reference tables.
        let aligned = align_operators(&reference, &parsed).unwrap();
        assert_eq!(aligned.len(), 3);
        let mut keys: Vec<_> = aligned.iter().map(|o| o.canon_key()).collect();
        keys.sort();
        let mut want: Vec<_> = ops.iter().map(|o| o.canon_key()).collect();
        want.sort();
        assert_eq!(keys, want);

        let alien = parse_domain(
            "alien.pddl",
            "(define (domain alien) (:predicates (shiny ?x)))",
        )
        .unwrap();
        let e = align_operators(&reference, &alien).unwrap_err().to_string();
        assert!(e.contains("vocabulary mismatch"), "got: {e}");
    }
}
