//! Deterministic lifted-operator learning from logged transitions.
//!
//! The pipeline per relearn (the learner is stateless across episodes;
//! only the lift cache persists, since lifting depends on the transition
//! alone):
//!
//! 1. **Lift** every state-changing transition into canonical variable
//!    space: action arguments become `?v0..` in order; objects appearing
//!    only in effects get subsequent variables, numbered by the minimal
//!    encoding over their orderings (exact canonicalization for up to
//!    [`MAX_CANON_PERM`] effect-only objects, first-appearance beyond).
//!    The lift also extracts the transition's *context*: every atom of the
//!    pre-state over bound objects, lifted.
//! 2. **Cluster** lifts by signature — schema, effect-only parameter
//!    types, and the lifted add/delete lists. Each cluster becomes one
//!    candidate operator.
//! 3. **Induce preconditions**: positives are intersected contexts;
//!    no-op transitions of the schema (and positives of sibling clusters)
//!    are negatives that must not be covered. While one is covered, the
//!    learner greedily adds the negative literal `(not M)` that excludes
//!    the most covered negatives, drawn from atoms `M` absent from every
//!    positive context (so no positive is ever un-covered), breaking ties
//!    toward the lexicographically least atom.
//!
//! Coverage of a negative is evaluated on the ground transition: schema
//! parameters bind to the attempted arguments as given (repeats and all),
//! and effect-only parameters are existentially extended over the task's
//! objects.

use crate::model::OperatorSet;
use crate::rel::{
    ActionId, Atom, Domain, Literal, ObjId, Operator, State, Task, TypeId, VarAtom,
    VarId,
};
use crate::sim::Transition;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

/// Exact-canonicalization bound: effect-only object orderings are brute
/// forced up to this count (`6! = 720` encodings), beyond which lifting
/// falls back to first-appearance order and isomorphic transitions may
/// split into separate clusters.
pub const MAX_CANON_PERM: usize = 6;

/// Cluster signature: schema, effect-only parameter types, lifted adds,
/// lifted deletes.
pub type SigKey = (ActionId, Vec<TypeId>, Vec<u64>, Vec<u64>);

/// A state-changing transition in canonical variable space.
#[derive(Clone, Debug)]
pub struct Lifted {
    pub action: ActionId,
    pub schema_arity: usize,
    /// Schema parameter types followed by effect-only parameter types.
    pub param_types: Vec<TypeId>,
    /// The object bound to each parameter in this transition.
    pub binding: Vec<ObjId>,
    pub add: Vec<VarAtom>,
    pub del: Vec<VarAtom>,
    /// Lift of every pre-state atom whose objects all occur in `binding`.
    pub context: BTreeSet<VarAtom>,
    pub task_idx: usize,
}

impl Lifted {
    pub fn key(&self) -> SigKey {
        (
            self.action,
            self.param_types[self.schema_arity..].to_vec(),
            self.add.iter().map(|a| a.0).collect(),
            self.del.iter().map(|a| a.0).collect(),
        )
    }
}

#[derive(Clone, Debug)]
pub enum LiftOutcome {
    Changed(Lifted),
    Noop,
}

/// Memo of lift results, parallel to a prefix of the simulator log.
#[derive(Default)]
pub struct LiftCache {
    entries: Vec<LiftOutcome>,
}

impl LiftCache {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Lift one transition. Returns [`LiftOutcome::Noop`] for unchanged
/// states.
///
/// Panics if a state-changing transition repeats an object among its
/// action arguments: deterministic ground truths used with this learner
/// must guard such applications with preconditions (otherwise one schema
/// argument would have to map to two parameter variables at once).
pub fn lift(domain: &Domain, task: &Task, tr: &Transition) -> LiftOutcome {
    let add_g: Vec<Atom> = tr.next.0.difference(&tr.state.0).copied().collect();
    let del_g: Vec<Atom> = tr.state.0.difference(&tr.next.0).copied().collect();
    if add_g.is_empty() && del_g.is_empty() {
        return LiftOutcome::Noop;
    }

    let schema = tr.action.schema();
    let arity = domain.actions.arity(schema);
    let args = tr.action.args(arity);
    let mut var_of: HashMap<ObjId, VarId> = HashMap::new();
    for (i, &o) in args.iter().enumerate() {
        if var_of.insert(o, VarId(i as u16)).is_some() {
            panic!(
                "action ({} ...) changed the state with repeated argument '{}'; \
                 ground-truth operators must forbid repeated-argument applications",
                domain.actions.name(schema),
                task.objects.name(o)
            );
        }
    }

    // Effect-only objects in first-appearance order over the (sorted)
    // ground adds then deletes.
    let mut effect_objs: Vec<ObjId> = Vec::new();
    for atom in add_g.iter().chain(del_g.iter()) {
        for o in atom.args(domain.preds.arity(atom.pred())) {
            if !var_of.contains_key(&o) && !effect_objs.contains(&o) {
                effect_objs.push(o);
            }
        }
    }

    let rename = |atoms: &[Atom], var_of: &HashMap<ObjId, VarId>| -> Vec<u64> {
        let mut out: Vec<u64> = atoms
            .iter()
            .map(|a| {
                let vars: Vec<VarId> = a
                    .args(domain.preds.arity(a.pred()))
                    .iter()
                    .map(|o| var_of[o])
                    .collect();
                VarAtom::new(a.pred(), &vars).0
            })
            .collect();
        out.sort();
        out
    };

    // Choose the effect-only ordering with the minimal encoding, making
    // the lift invariant under object renaming.
    let orderings: Vec<Vec<ObjId>> = if effect_objs.len() <= MAX_CANON_PERM {
        permutations(&effect_objs)
    } else {
        vec![effect_objs.clone()]
    };
    let mut best: Option<(Vec<u64>, Vec<u64>, Vec<TypeId>, Vec<ObjId>)> = None;
    for ordering in orderings {
        let mut map = var_of.clone();
        for (j, &o) in ordering.iter().enumerate() {
            map.insert(o, VarId((arity + j) as u16));
        }
        let enc = (
            rename(&add_g, &map),
            rename(&del_g, &map),
            ordering.iter().map(|o| task.objects.ty(*o)).collect::<Vec<_>>(),
            ordering,
        );
        if best.as_ref().map_or(true, |b| (&enc.0, &enc.1, &enc.2) < (&b.0, &b.1, &b.2)) {
            best = Some(enc);
        }
    }
    let (add_enc, del_enc, extra_types, ordering) = best.unwrap();
    for (j, &o) in ordering.iter().enumerate() {
        var_of.insert(o, VarId((arity + j) as u16));
    }

    let mut param_types: Vec<TypeId> = domain.actions.param_types[schema.idx()].clone();
    param_types.extend(extra_types);
    let mut binding = args;
    binding.extend(ordering);

    let mut context = BTreeSet::new();
    for atom in tr.state.iter() {
        let pa = domain.preds.arity(atom.pred());
        let vars: Option<Vec<VarId>> =
            atom.args(pa).iter().map(|o| var_of.get(o).copied()).collect();
        if let Some(vars) = vars {
            context.insert(VarAtom::new(atom.pred(), &vars));
        }
    }

    LiftOutcome::Changed(Lifted {
        action: schema,
        schema_arity: arity,
        param_types,
        binding,
        add: add_enc.into_iter().map(VarAtom).collect(),
        del: del_enc.into_iter().map(VarAtom).collect(),
        context,
        task_idx: tr.task_idx,
    })
}

fn permutations(items: &[ObjId]) -> Vec<Vec<ObjId>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &x) in items.iter().enumerate() {
        let mut rest: Vec<ObjId> = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, x);
            out.push(tail);
        }
    }
    out
}

/// Does an operator body cover the ground attempt `(state, args)`?
/// Schema parameters bind to `args` positionally; any effect-only
/// parameters are existentially extended over the task's objects.
pub fn covers(
    domain: &Domain,
    task: &Task,
    params: &[TypeId],
    schema_arity: usize,
    pre: &[Literal],
    state: &State,
    args: &[ObjId],
) -> bool {
    debug_assert_eq!(args.len(), schema_arity);
    let mut binding: Vec<ObjId> = args.to_vec();
    extend_covers(domain, task, params, pre, state, &mut binding)
}

fn extend_covers(
    domain: &Domain,
    task: &Task,
    params: &[TypeId],
    pre: &[Literal],
    state: &State,
    binding: &mut Vec<ObjId>,
) -> bool {
    if binding.len() == params.len() {
        return pre.iter().all(|lit| {
            let atom = lit.atom.ground(domain.preds.arity(lit.atom.pred()), binding);
            state.contains(atom) == lit.positive
        });
    }
    let slot = binding.len();
    for &o in task.objects_of(params[slot]) {
        binding.push(o);
        if extend_covers(domain, task, params, pre, state, binding) {
            binding.pop();
            return true;
        }
        binding.pop();
    }
    false
}

/// Every well-typed atom over the given parameters, ascending by packed
/// encoding. This is the candidate pool for negative-literal
/// strengthening.
fn candidate_atoms(domain: &Domain, params: &[TypeId]) -> Vec<VarAtom> {
    let mut out = Vec::new();
    for p in 0..domain.preds.len() {
        let pred = crate::rel::PredId(p as u16);
        let slots = &domain.preds.param_types[p];
        let conforming: Vec<Vec<VarId>> = slots
            .iter()
            .map(|st| {
                params
                    .iter()
                    .enumerate()
                    .filter(|(_, pt)| domain.types.is_subtype(**pt, *st))
                    .map(|(i, _)| VarId(i as u16))
                    .collect()
            })
            .collect();
        if conforming.iter().any(|c: &Vec<VarId>| c.is_empty()) && !slots.is_empty() {
            continue;
        }
        let mut stack: Vec<Vec<VarId>> = vec![Vec::new()];
        for c in &conforming {
            let mut next = Vec::new();
            for prefix in &stack {
                for &v in c {
                    let mut b = prefix.clone();
                    b.push(v);
                    next.push(b);
                }
            }
            stack = next;
        }
        for vars in stack {
            out.push(VarAtom::new(pred, &vars));
        }
    }
    out.sort();
    out
}

/// A negative example: an attempt that must not be covered.
struct Negative<'a> {
    task: &'a Task,
    state: &'a State,
    args: Vec<ObjId>,
}

fn induce(
    domain: &Domain,
    name: String,
    positives: &[&Lifted],
    negatives: &[Negative],
) -> Operator {
    let first = positives[0];
    let schema_arity = domain.actions.arity(first.action);
    let params = first.param_types.clone();

    let mut intersection = first.context.clone();
    for l in &positives[1..] {
        debug_assert_eq!(l.param_types, params);
        intersection = intersection.intersection(&l.context).copied().collect();
    }
    let mut union: BTreeSet<VarAtom> = BTreeSet::new();
    for l in positives {
        union.extend(l.context.iter().copied());
    }

    let mut pre: Vec<Literal> =
        intersection.iter().map(|a| Literal::pos(*a)).collect();

    let still_covered = |pre: &[Literal]| -> Vec<usize> {
        negatives
            .iter()
            .enumerate()
            .filter(|(_, n)| {
                covers(domain, n.task, &params, schema_arity, pre, n.state, &n.args)
            })
            .map(|(i, _)| i)
            .collect()
    };

    // Atoms true in some positive context can never be negated without
    // un-covering that positive.
    let mut candidates: Vec<VarAtom> = candidate_atoms(domain, &params)
        .into_iter()
        .filter(|m| !union.contains(m))
        .collect();

    loop {
        let covered = still_covered(&pre);
        if covered.is_empty() {
            break;
        }
        let mut best: Option<(usize, VarAtom)> = None;
        for &m in &candidates {
            let mut trial = pre.clone();
            trial.push(Literal::neg(m));
            let excluded = covered
                .iter()
                .filter(|&&i| {
                    let n = &negatives[i];
                    !covers(domain, n.task, &params, schema_arity, &trial, n.state, &n.args)
                })
                .count();
            if excluded > best.as_ref().map_or(0, |(c, _)| *c) {
                best = Some((excluded, m));
            }
        }
        match best {
            Some((_, m)) => {
                pre.push(Literal::neg(m));
                candidates.retain(|c| *c != m);
            }
            // No candidate helps: accept the over-general operator; more
            // experience will either refine it or live with it.
            None => break,
        }
    }

    let param_names: Vec<String> = (0..params.len()).map(|i| format!("?v{i}")).collect();
    Operator::new(
        name,
        first.action,
        params,
        param_names,
        pre,
        first.add.clone(),
        first.del.clone(),
    )
}

/// Learn an operator set from the whole interaction log. `cache` carries
/// lift results across calls and must always be paired with the same
/// growing log.
pub fn learn(
    domain: &Domain,
    tasks: &[Arc<Task>],
    log: &[Transition],
    cache: &mut LiftCache,
) -> OperatorSet {
    assert!(cache.entries.len() <= log.len(), "lift cache outran the log");
    for tr in &log[cache.entries.len()..] {
        cache.entries.push(lift(domain, &tasks[tr.task_idx], tr));
    }

    let mut clusters: BTreeMap<SigKey, Vec<usize>> = BTreeMap::new();
    let mut noops: BTreeMap<ActionId, Vec<usize>> = BTreeMap::new();
    for (i, outcome) in cache.entries[..log.len()].iter().enumerate() {
        match outcome {
            LiftOutcome::Changed(l) => clusters.entry(l.key()).or_default().push(i),
            LiftOutcome::Noop => {
                noops.entry(log[i].action.schema()).or_default().push(i)
            }
        }
    }

    let mut per_schema: BTreeMap<ActionId, usize> = BTreeMap::new();
    for key in clusters.keys() {
        *per_schema.entry(key.0).or_default() += 1;
    }

    let mut ops: Vec<(String, Operator)> = Vec::new();
    let mut seen_of_schema: BTreeMap<ActionId, usize> = BTreeMap::new();
    for (key, members) in &clusters {
        let schema = key.0;
        let positives: Vec<&Lifted> = members
            .iter()
            .map(|&i| match &cache.entries[i] {
                LiftOutcome::Changed(l) => l,
                LiftOutcome::Noop => unreachable!(),
            })
            .collect();

        let mut negatives: Vec<Negative> = Vec::new();
        let arity = domain.actions.arity(schema);
        for &i in noops.get(&schema).into_iter().flatten() {
            negatives.push(Negative {
                task: &tasks[log[i].task_idx],
                state: &log[i].state,
                args: log[i].action.args(arity),
            });
        }
        // Positives of sibling clusters: this operator did not fire there.
        for (other_key, other_members) in &clusters {
            if other_key.0 != schema || other_key == key {
                continue;
            }
            for &i in other_members {
                negatives.push(Negative {
                    task: &tasks[log[i].task_idx],
                    state: &log[i].state,
                    args: log[i].action.args(arity),
                });
            }
        }

        let ordinal = seen_of_schema.entry(schema).or_default();
        *ordinal += 1;
        let name = if per_schema[&schema] == 1 {
            domain.actions.name(schema).to_string()
        } else {
            format!("{}-{}", domain.actions.name(schema), ordinal)
        };
        let sort_name = format!("{}#{:03}", domain.actions.name(schema), ordinal);
        ops.push((sort_name, induce(domain, name, &positives, &negatives)));
    }

    ops.sort_by(|a, b| a.0.cmp(&b.0));
    OperatorSet::new(ops.into_iter().map(|(_, op)| op).collect())
}
