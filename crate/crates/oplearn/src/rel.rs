//! Interned relational vocabulary and ground/lifted STRIPS structures.
//!
//! Ground atoms and ground actions are packed into a single `u64` (16-bit
//! predicate/schema id in the top bits, four 12-bit argument slots below),
//! so states are plain `BTreeSet<u64>` wrappers with cheap ordering,
//! hashing, and copying. Unused argument slots are zero; arity is always
//! recovered from the predicate/schema tables, so a zero slot never
//! collides with object id 0 of a shorter atom of the same predicate.

use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Maximum predicate/action arity supported by the packed representation.
pub const MAX_ARITY: usize = 4;
/// Maximum number of objects per task (12-bit argument slots).
pub const MAX_OBJECTS: usize = 1 << 12;
/// Maximum number of predicates or action schemas (16-bit id).
pub const MAX_SYMBOLS: usize = 1 << 16;

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
        pub struct $name(pub u16);

        impl $name {
            pub fn idx(self) -> usize {
                self.0 as usize
            }
        }
    };
}

id_type!(
    /// Interned predicate symbol.
    PredId
);
id_type!(
    /// Interned object constant (task-local).
    ObjId
);
id_type!(
    /// Interned type symbol.
    TypeId
);
id_type!(
    /// Operator/schema parameter variable, indexed by position.
    VarId
);
id_type!(
    /// Interned action schema symbol.
    ActionId
);

const SLOT_BITS: u32 = 12;
const SLOT_MASK: u64 = (1 << SLOT_BITS) - 1;

fn pack(head: u16, args: &[u16]) -> u64 {
    debug_assert!(args.len() <= MAX_ARITY);
    let mut word = (head as u64) << 48;
    for (i, &a) in args.iter().enumerate() {
        debug_assert!((a as u64) <= SLOT_MASK);
        word |= (a as u64) << (36 - SLOT_BITS * i as u32);
    }
    word
}

fn unpack_arg(word: u64, i: usize) -> u16 {
    debug_assert!(i < MAX_ARITY);
    ((word >> (36 - SLOT_BITS * i as u32)) & SLOT_MASK) as u16
}

/// A ground atom: predicate applied to objects, packed into a `u64`.
///
/// The numeric order of the packed word equals lexicographic order on
/// `(predicate, args)`, which keeps `BTreeSet<Atom>` iteration canonical.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Atom(pub u64);

impl Atom {
    pub fn new(pred: PredId, args: &[ObjId]) -> Atom {
        let raw: Vec<u16> = args.iter().map(|o| o.0).collect();
        Atom(pack(pred.0, &raw))
    }

    pub fn pred(self) -> PredId {
        PredId((self.0 >> 48) as u16)
    }

    pub fn arg(self, i: usize) -> ObjId {
        ObjId(unpack_arg(self.0, i))
    }

    /// All argument slots; only the first `arity` entries are meaningful.
    pub fn args(self, arity: usize) -> Vec<ObjId> {
        (0..arity).map(|i| self.arg(i)).collect()
    }
}

/// A ground action: schema applied to objects, packed like [`Atom`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct GroundAction(pub u64);

impl GroundAction {
    pub fn new(schema: ActionId, args: &[ObjId]) -> GroundAction {
        let raw: Vec<u16> = args.iter().map(|o| o.0).collect();
        GroundAction(pack(schema.0, &raw))
    }

    pub fn schema(self) -> ActionId {
        ActionId((self.0 >> 48) as u16)
    }

    pub fn arg(self, i: usize) -> ObjId {
        ObjId(unpack_arg(self.0, i))
    }

    pub fn args(self, arity: usize) -> Vec<ObjId> {
        (0..arity).map(|i| self.arg(i)).collect()
    }
}

/// A lifted atom: predicate applied to variables, packed like [`Atom`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct VarAtom(pub u64);

impl VarAtom {
    pub fn new(pred: PredId, args: &[VarId]) -> VarAtom {
        let raw: Vec<u16> = args.iter().map(|v| v.0).collect();
        VarAtom(pack(pred.0, &raw))
    }

    pub fn pred(self) -> PredId {
        PredId((self.0 >> 48) as u16)
    }

    pub fn arg(self, i: usize) -> VarId {
        VarId(unpack_arg(self.0, i))
    }

    pub fn args(self, arity: usize) -> Vec<VarId> {
        (0..arity).map(|i| self.arg(i)).collect()
    }

    /// Substitute variables by objects under `binding` (indexed by [`VarId`]).
    pub fn ground(self, arity: usize, binding: &[ObjId]) -> Atom {
        let args: Vec<ObjId> = (0..arity).map(|i| binding[self.arg(i).idx()]).collect();
        Atom::new(self.pred(), &args)
    }

    /// Rename variables through `map` (indexed by [`VarId`]).
    pub fn rename(self, arity: usize, map: &[VarId]) -> VarAtom {
        let args: Vec<VarId> = (0..arity).map(|i| map[self.arg(i).idx()]).collect();
        VarAtom::new(self.pred(), &args)
    }
}

/// A signed lifted atom. Ordering is atom-major, so sorted literal lists
/// interleave signs canonically.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Literal {
    pub atom: VarAtom,
    pub positive: bool,
}

impl Literal {
    pub fn pos(atom: VarAtom) -> Literal {
        Literal { atom, positive: true }
    }

    pub fn neg(atom: VarAtom) -> Literal {
        Literal { atom, positive: false }
    }
}

/// A closed-world state: the set of ground atoms that hold.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Default)]
pub struct State(pub BTreeSet<Atom>);

impl State {
    pub fn from_atoms(atoms: impl IntoIterator<Item = Atom>) -> State {
        State(atoms.into_iter().collect())
    }

    pub fn contains(&self, atom: Atom) -> bool {
        self.0.contains(&atom)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Atom> + '_ {
        self.0.iter().copied()
    }

    /// STRIPS successor: `(self \ del) ∪ add`.
    pub fn apply(&self, add: &[Atom], del: &[Atom]) -> State {
        let mut next = self.0.clone();
        for a in del {
            next.remove(a);
        }
        for a in add {
            next.insert(*a);
        }
        State(next)
    }

    pub fn satisfies(&self, cond: &GroundCondition) -> bool {
        cond.pos.iter().all(|a| self.0.contains(a)) && cond.neg.iter().all(|a| !self.0.contains(a))
    }

    /// Read-only view of this state with a STRIPS effect overlaid, for
    /// inspecting a successor without materializing it.
    pub fn overlay<'a>(&'a self, add: &'a [Atom], del: &'a [Atom]) -> Overlay<'a> {
        Overlay { base: self, add, del }
    }

    /// Order-insensitive 128-bit digest (two independent 64-bit mix chains
    /// over the canonically ordered atoms). Used as a compact visited-set
    /// key during search.
    pub fn fingerprint(&self) -> u128 {
        let mut h1: u64 = 0xcbf29ce484222325;
        let mut h2: u64 = 0x9e3779b97f4a7c15;
        for &Atom(x) in &self.0 {
            h1 = (h1 ^ x).wrapping_mul(0x100000001b3).rotate_left(23);
            h2 = (h2.wrapping_add(x ^ 0xff51afd7ed558ccd)).wrapping_mul(0xc4ceb9fe1a85ec53);
            h2 ^= h2 >> 29;
        }
        ((h1 as u128) << 64) | h2 as u128
    }
}

/// `(base \ del) ∪ add` as a view. Effect lists are tiny, so membership
/// tests stay cheap without cloning the underlying atom set.
#[derive(Clone, Copy)]
pub struct Overlay<'a> {
    pub base: &'a State,
    pub add: &'a [Atom],
    pub del: &'a [Atom],
}

impl<'a> Overlay<'a> {
    /// A view of `state` with no effect applied.
    pub fn identity(state: &'a State) -> Overlay<'a> {
        Overlay { base: state, add: &[], del: &[] }
    }

    pub fn contains(&self, atom: Atom) -> bool {
        if self.add.contains(&atom) {
            return true;
        }
        if self.del.contains(&atom) {
            return false;
        }
        self.base.contains(atom)
    }

    /// Would materializing this view differ from the base state?
    pub fn changes(&self) -> bool {
        self.add.iter().any(|a| !self.base.contains(*a))
            || self.del.iter().any(|d| self.base.contains(*d) && !self.add.contains(d))
    }

    pub fn iter(&self) -> impl Iterator<Item = Atom> + '_ {
        self.base
            .iter()
            .filter(|a| !self.del.contains(a) || self.add.contains(a))
            .chain(self.add.iter().copied().filter(|a| !self.base.contains(*a)))
    }
}

/// A ground condition: positive atoms that must hold and negative atoms
/// that must not. Goals and grounded preconditions take this form.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct GroundCondition {
    pub pos: BTreeSet<Atom>,
    pub neg: BTreeSet<Atom>,
}

impl GroundCondition {
    pub fn len(&self) -> usize {
        self.pos.len() + self.neg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty() && self.neg.is_empty()
    }

    /// Number of literals not satisfied in `state`.
    pub fn unsatisfied(&self, state: &State) -> usize {
        self.pos.iter().filter(|a| !state.contains(**a)).count()
            + self.neg.iter().filter(|a| state.contains(**a)).count()
    }
}

/// Single-inheritance type hierarchy.
#[derive(Clone, Debug, Default)]
pub struct TypeTable {
    pub names: Vec<String>,
    pub parent: Vec<Option<TypeId>>,
    by_name: HashMap<String, TypeId>,
}

impl TypeTable {
    pub fn add(&mut self, name: &str, parent: Option<TypeId>) -> TypeId {
        if let Some(&id) = self.by_name.get(name) {
            return id;
        }
        assert!(self.names.len() < MAX_SYMBOLS);
        let id = TypeId(self.names.len() as u16);
        self.names.push(name.to_string());
        self.parent.push(parent);
        self.by_name.insert(name.to_string(), id);
        id
    }

    /// Re-point a type's parent; used by the parser, which interns all
    /// type names before the hierarchy edges are known.
    pub fn set_parent(&mut self, t: TypeId, parent: Option<TypeId>) {
        self.parent[t.idx()] = parent;
    }

    pub fn id(&self, name: &str) -> Option<TypeId> {
        self.by_name.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, t: TypeId) -> &str {
        &self.names[t.idx()]
    }

    /// Reflexive-transitive subtype check: does `sub` conform to `sup`?
    pub fn is_subtype(&self, sub: TypeId, sup: TypeId) -> bool {
        let mut cur = Some(sub);
        while let Some(t) = cur {
            if t == sup {
                return true;
            }
            cur = self.parent[t.idx()];
        }
        false
    }
}

/// Predicate symbols with typed argument slots.
#[derive(Clone, Debug, Default)]
pub struct PredTable {
    pub names: Vec<String>,
    pub param_types: Vec<Vec<TypeId>>,
    by_name: HashMap<String, PredId>,
}

impl PredTable {
    pub fn add(&mut self, name: &str, param_types: Vec<TypeId>) -> PredId {
        assert!(param_types.len() <= MAX_ARITY, "predicate {name} exceeds max arity");
        assert!(self.names.len() < MAX_SYMBOLS);
        let id = PredId(self.names.len() as u16);
        self.names.push(name.to_string());
        self.param_types.push(param_types);
        self.by_name.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<PredId> {
        self.by_name.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, p: PredId) -> &str {
        &self.names[p.idx()]
    }

    pub fn arity(&self, p: PredId) -> usize {
        self.param_types[p.idx()].len()
    }
}

/// Action schema symbols with typed parameter lists.
#[derive(Clone, Debug, Default)]
pub struct ActionTable {
    pub names: Vec<String>,
    pub param_types: Vec<Vec<TypeId>>,
    by_name: HashMap<String, ActionId>,
}

impl ActionTable {
    pub fn add(&mut self, name: &str, param_types: Vec<TypeId>) -> ActionId {
        assert!(param_types.len() <= MAX_ARITY, "action {name} exceeds max arity");
        assert!(self.names.len() < MAX_SYMBOLS);
        let id = ActionId(self.names.len() as u16);
        self.names.push(name.to_string());
        self.param_types.push(param_types);
        self.by_name.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<ActionId> {
        self.by_name.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, a: ActionId) -> &str {
        &self.names[a.idx()]
    }

    pub fn arity(&self, a: ActionId) -> usize {
        self.param_types[a.idx()].len()
    }
}

/// A lifted STRIPS operator. Parameters are positional: `VarId(i)` refers
/// to `params[i]`. For operators tied to an action schema, the first
/// `actions.arity(action)` parameters are the schema's own arguments (in
/// declaration order); any further parameters appear in effects only.
///
/// `pre`, `add`, and `del` are kept sorted and deduplicated, so structural
/// equality of operators is well-defined.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Operator {
    pub name: String,
    pub action: ActionId,
    pub params: Vec<TypeId>,
    pub param_names: Vec<String>,
    pub pre: Vec<Literal>,
    pub add: Vec<VarAtom>,
    pub del: Vec<VarAtom>,
}

impl Operator {
    pub fn new(
        name: String,
        action: ActionId,
        params: Vec<TypeId>,
        param_names: Vec<String>,
        mut pre: Vec<Literal>,
        mut add: Vec<VarAtom>,
        mut del: Vec<VarAtom>,
    ) -> Operator {
        assert_eq!(params.len(), param_names.len());
        pre.sort();
        pre.dedup();
        add.sort();
        add.dedup();
        del.sort();
        del.dedup();
        Operator { name, action, params, param_names, pre, add, del }
    }

    /// Structural identity modulo parameter names: schemas, parameter
    /// types, and the sorted literal lists. Two operators with equal keys
    /// predict identically on every ground action.
    pub fn canon_key(&self) -> (ActionId, Vec<TypeId>, Vec<(u64, bool)>, Vec<u64>, Vec<u64>) {
        (
            self.action,
            self.params.clone(),
            self.pre.iter().map(|l| (l.atom.0, l.positive)).collect(),
            self.add.iter().map(|a| a.0).collect(),
            self.del.iter().map(|a| a.0).collect(),
        )
    }

    /// Ground the precondition under `binding` (one object per parameter).
    pub fn ground_pre(&self, preds: &PredTable, binding: &[ObjId]) -> GroundCondition {
        let mut cond = GroundCondition::default();
        for lit in &self.pre {
            let atom = lit.atom.ground(preds.arity(lit.atom.pred()), binding);
            if lit.positive {
                cond.pos.insert(atom);
            } else {
                cond.neg.insert(atom);
            }
        }
        cond
    }

    /// Ground the effects under `binding`, returning `(add, del)`.
    pub fn ground_effects(&self, preds: &PredTable, binding: &[ObjId]) -> (Vec<Atom>, Vec<Atom>) {
        let ground = |atoms: &[VarAtom]| {
            atoms.iter().map(|a| a.ground(preds.arity(a.pred()), binding)).collect()
        };
        (ground(&self.add), ground(&self.del))
    }
}

/// A planning domain: vocabulary plus its operators. For the simulator the
/// operators are the hidden ground truth; learned models reuse the same
/// vocabulary with their own operator lists.
#[derive(Clone, Debug)]
pub struct Domain {
    pub name: String,
    pub types: TypeTable,
    pub preds: PredTable,
    pub actions: ActionTable,
    pub operators: Vec<Operator>,
}

impl Domain {
    pub fn render_atom(&self, objects: &ObjTable, atom: Atom) -> String {
        let arity = self.preds.arity(atom.pred());
        let mut s = format!("({}", self.preds.name(atom.pred()));
        for o in atom.args(arity) {
            s.push(' ');
            s.push_str(objects.name(o));
        }
        s.push(')');
        s
    }

    pub fn render_action(&self, objects: &ObjTable, ga: GroundAction) -> String {
        let arity = self.actions.arity(ga.schema());
        let mut s = format!("({}", self.actions.name(ga.schema()));
        for o in ga.args(arity) {
            s.push(' ');
            s.push_str(objects.name(o));
        }
        s.push(')');
        s
    }
}

/// Task-local object constants. Ids are assigned in ascending name order,
/// so numeric order on packed atoms matches lexicographic order on names.
#[derive(Clone, Debug, Default)]
pub struct ObjTable {
    pub names: Vec<String>,
    pub types: Vec<TypeId>,
    by_name: HashMap<String, ObjId>,
}

impl ObjTable {
    /// Build from `(name, type)` pairs; names are sorted before interning.
    pub fn from_sorted(mut pairs: Vec<(String, TypeId)>) -> ObjTable {
        pairs.sort();
        assert!(pairs.len() <= MAX_OBJECTS, "too many objects");
        let mut table = ObjTable::default();
        for (name, ty) in pairs {
            let id = ObjId(table.names.len() as u16);
            table.names.push(name.clone());
            table.types.push(ty);
            table.by_name.insert(name, id);
        }
        table
    }

    pub fn id(&self, name: &str) -> Option<ObjId> {
        self.by_name.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, o: ObjId) -> &str {
        &self.names[o.idx()]
    }

    pub fn ty(&self, o: ObjId) -> TypeId {
        self.types[o.idx()]
    }
}

/// A planning task over some domain: objects, initial state, goal.
#[derive(Clone, Debug)]
pub struct Task {
    pub name: String,
    pub objects: ObjTable,
    pub init: State,
    pub goal: GroundCondition,
    /// Objects conforming to each type (subtypes included), ascending.
    by_type: Vec<Vec<ObjId>>,
}

impl Task {
    pub fn new(
        domain: &Domain,
        name: String,
        objects: ObjTable,
        init: State,
        goal: GroundCondition,
    ) -> Task {
        let mut by_type = vec![Vec::new(); domain.types.len()];
        for i in 0..objects.len() {
            let o = ObjId(i as u16);
            for t in 0..domain.types.len() {
                if domain.types.is_subtype(objects.ty(o), TypeId(t as u16)) {
                    by_type[t].push(o);
                }
            }
        }
        Task { name, objects, init, goal, by_type }
    }

    pub fn objects_of(&self, t: TypeId) -> &[ObjId] {
        &self.by_type[t.idx()]
    }
}

/// All well-typed ground actions of the task, ordered by schema name and
/// then lexicographically by argument names. Repeated parameters of a
/// compatible type may bind the same object.
pub fn enumerate_ground_actions(domain: &Domain, task: &Task) -> Vec<GroundAction> {
    let mut schema_order: Vec<ActionId> =
        (0..domain.actions.len()).map(|i| ActionId(i as u16)).collect();
    schema_order.sort_by(|a, b| domain.actions.name(*a).cmp(domain.actions.name(*b)));

    let mut out = Vec::new();
    for schema in schema_order {
        let slots: Vec<&[ObjId]> = domain.actions.param_types[schema.idx()]
            .iter()
            .map(|t| task.objects_of(*t))
            .collect();
        if slots.iter().any(|s| s.is_empty()) {
            continue;
        }
        let n = slots.len();
        if n == 0 {
            out.push(GroundAction::new(schema, &[]));
            continue;
        }
        // Odometer over the typed slots (last slot varies fastest), which
        // yields arguments in ascending-name order per slot.
        let mut idx = vec![0usize; n];
        'product: loop {
            let args: Vec<ObjId> = idx.iter().zip(&slots).map(|(i, s)| s[*i]).collect();
            out.push(GroundAction::new(schema, &args));
            let mut k = n;
            loop {
                if k == 0 {
                    break 'product;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < slots[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
    out
}

/// Number of well-typed ground atoms of the task.
pub fn count_ground_atoms(domain: &Domain, task: &Task) -> u64 {
    (0..domain.preds.len())
        .map(|p| {
            domain.preds.param_types[p]
                .iter()
                .map(|t| task.objects_of(*t).len() as u64)
                .product::<u64>()
        })
        .sum()
}

/// Map from each action schema to the ground actions using it, preserving
/// the canonical enumeration order.
pub fn actions_by_schema(
    domain: &Domain,
    task: &Task,
) -> BTreeMap<ActionId, Vec<GroundAction>> {
    let mut map: BTreeMap<ActionId, Vec<GroundAction>> = BTreeMap::new();
    for ga in enumerate_ground_actions(domain, task) {
        map.entry(ga.schema()).or_default().push(ga);
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_domain() -> Domain {
        let mut types = TypeTable::default();
        let object = types.add("object", None);
        let block = types.add("block", Some(object));
        let heavy = types.add("heavy-block", Some(block));
        let mut preds = PredTable::default();
        preds.add("on", vec![block, block]);
        preds.add("clear", vec![block]);
        preds.add("handempty", vec![]);
        let mut actions = ActionTable::default();
        actions.add("stack", vec![block, block]);
        actions.add("noop", vec![]);
        actions.add("lift", vec![heavy]);
        Domain { name: "toy".into(), types, preds, actions, operators: Vec::new() }
    }

    fn toy_task(domain: &Domain) -> Task {
        let block = domain.types.id("block").unwrap();
        let heavy = domain.types.id("heavy-block").unwrap();
        let objects = ObjTable::from_sorted(vec![
            ("b".into(), block),
            ("a".into(), block),
            ("h".into(), heavy),
        ]);
        Task::new(
            domain,
            "toy-1".into(),
            objects,
            State::default(),
            GroundCondition::default(),
        )
    }

    #[test]
    fn atom_packing_round_trips() {
        let p = PredId(7);
        let args = [ObjId(0), ObjId(4095), ObjId(1), ObjId(2)];
        let atom = Atom::new(p, &args);
        assert_eq!(atom.pred(), p);
        for (i, &a) in args.iter().enumerate() {
            assert_eq!(atom.arg(i), a);
        }
    }

    #[test]
    fn atom_order_is_lexicographic() {
        let p = PredId(1);
        let q = PredId(2);
        let a = |args: &[u16]| {
            Atom::new(p, &args.iter().map(|&x| ObjId(x)).collect::<Vec<_>>())
        };
        assert!(a(&[0, 9]) < a(&[1, 0]));
        assert!(a(&[1, 0]) < a(&[1, 3]));
        assert!(a(&[4095, 4095]) < Atom::new(q, &[ObjId(0)]));
    }

    #[test]
    fn varatom_ground_and_rename() {
        let va = VarAtom::new(PredId(3), &[VarId(1), VarId(0)]);
        let binding = [ObjId(10), ObjId(20)];
        assert_eq!(va.ground(2, &binding), Atom::new(PredId(3), &[ObjId(20), ObjId(10)]));
        let renamed = va.rename(2, &[VarId(5), VarId(6)]);
        assert_eq!(renamed, VarAtom::new(PredId(3), &[VarId(6), VarId(5)]));
    }

    #[test]
    fn state_apply_deletes_then_adds() {
        let a = Atom::new(PredId(0), &[ObjId(1)]);
        let b = Atom::new(PredId(0), &[ObjId(2)]);
        let s = State::from_atoms([a]);
        let next = s.apply(&[b], &[a]);
        assert!(!next.contains(a));
        assert!(next.contains(b));
        // Add wins when the same atom is both added and deleted.
        let again = s.apply(&[a], &[a]);
        assert!(again.contains(a));
    }

    #[test]
    fn overlay_agrees_with_materialized_apply() {
        let p = PredId(2);
        let atom = |i: u16| Atom::new(p, &[ObjId(i)]);
        let base = State::from_atoms((0..6).map(atom));
        let cases: [(&[Atom], &[Atom]); 4] = [
            (&[atom(7)], &[atom(0), atom(3)]),
            (&[atom(1)], &[atom(1)]), // add wins over del
            (&[], &[atom(9)]),        // deleting an absent atom is a no-op
            (&[], &[]),
        ];
        for (add, del) in cases {
            let view = base.overlay(add, del);
            let applied = base.apply(add, del);
            for i in 0..12 {
                assert_eq!(view.contains(atom(i)), applied.contains(atom(i)), "atom {i}");
            }
            let via_iter = State::from_atoms(view.iter());
            assert_eq!(via_iter, applied);
            assert_eq!(view.changes(), applied != base, "add={add:?} del={del:?}");
        }
    }

    #[test]
    fn fingerprints_distinguish_nearby_states() {
        let atoms: Vec<Atom> = (0..32).map(|i| Atom::new(PredId(1), &[ObjId(i)])).collect();
        let mut seen = std::collections::HashSet::new();
        // All 1-atom-removed variants of the full state must hash apart.
        for skip in 0..atoms.len() {
            let s = State::from_atoms(
                atoms.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, a)| *a),
            );
            assert!(seen.insert(s.fingerprint()));
        }
        assert!(seen.insert(State::from_atoms(atoms).fingerprint()));
    }

    #[test]
    fn subtype_chain_is_reflexive_transitive() {
        let domain = toy_domain();
        let object = domain.types.id("object").unwrap();
        let block = domain.types.id("block").unwrap();
        let heavy = domain.types.id("heavy-block").unwrap();
        assert!(domain.types.is_subtype(heavy, heavy));
        assert!(domain.types.is_subtype(heavy, block));
        assert!(domain.types.is_subtype(heavy, object));
        assert!(!domain.types.is_subtype(block, heavy));
        assert!(!domain.types.is_subtype(object, block));
    }

    #[test]
    fn objects_sorted_by_name_and_typed_membership() {
        let domain = toy_domain();
        let task = toy_task(&domain);
        assert_eq!(task.objects.names, vec!["a", "b", "h"]);
        let block = domain.types.id("block").unwrap();
        let heavy = domain.types.id("heavy-block").unwrap();
        assert_eq!(task.objects_of(block).len(), 3); // subtypes included
        assert_eq!(task.objects_of(heavy), &[task.objects.id("h").unwrap()]);
    }

    #[test]
    fn ground_action_enumeration_order_and_count() {
        let domain = toy_domain();
        let task = toy_task(&domain);
        let all = enumerate_ground_actions(&domain, &task);
        // lift: 1, noop: 1, stack: 3*3 (repeats allowed).
        assert_eq!(all.len(), 1 + 1 + 9);
        let names: Vec<String> =
            all.iter().map(|ga| domain.render_action(&task.objects, *ga)).collect();
        assert_eq!(names[0], "(lift h)");
        assert_eq!(names[1], "(noop)");
        assert_eq!(names[2], "(stack a a)");
        assert_eq!(names[3], "(stack a b)");
        assert_eq!(names[10], "(stack h h)");
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
    }

    #[test]
    fn ground_atom_count_respects_types() {
        let domain = toy_domain();
        let task = toy_task(&domain);
        // on: 3*3, clear: 3, handempty: 1.
        assert_eq!(count_ground_atoms(&domain, &task), 9 + 3 + 1);
    }

    #[test]
    fn condition_satisfaction_with_negatives() {
        let a = Atom::new(PredId(0), &[ObjId(0)]);
        let b = Atom::new(PredId(0), &[ObjId(1)]);
        let state = State::from_atoms([a]);
        let mut cond = GroundCondition::default();
        cond.pos.insert(a);
        cond.neg.insert(b);
        assert!(state.satisfies(&cond));
        assert_eq!(cond.unsatisfied(&state), 0);
        let state2 = State::from_atoms([a, b]);
        assert!(!state2.satisfies(&cond));
        assert_eq!(cond.unsatisfied(&state2), 1);
    }

    #[test]
    fn operator_normalizes_literal_lists() {
        let domain = toy_domain();
        let on = domain.preds.id("on").unwrap();
        let clear = domain.preds.id("clear").unwrap();
        let block = domain.types.id("block").unwrap();
        let v0 = VarId(0);
        let v1 = VarId(1);
        let pre = vec![
            Literal::pos(VarAtom::new(clear, &[v1])),
            Literal::pos(VarAtom::new(clear, &[v0])),
            Literal::pos(VarAtom::new(clear, &[v0])),
        ];
        let op = Operator::new(
            "stack".into(),
            domain.actions.id("stack").unwrap(),
            vec![block, block],
            vec!["?x".into(), "?y".into()],
            pre,
            vec![VarAtom::new(on, &[v0, v1])],
            vec![],
        );
        assert_eq!(op.pre.len(), 2);
        assert!(op.pre.windows(2).all(|w| w[0] < w[1]));
        let cond = op.ground_pre(&domain.preds, &[ObjId(3), ObjId(4)]);
        assert_eq!(cond.pos.len(), 2);
        assert!(cond.neg.is_empty());
    }
}
