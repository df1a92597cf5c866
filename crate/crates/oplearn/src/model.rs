//! Executable ground action models.
//!
//! A [`GroundModel`] compiles an operator set against a task: every
//! well-typed ground action gets an ordered list of grounded operator
//! candidates. Prediction is deterministic first-match — the effect of a
//! ground action in a state is the effect of the first candidate whose
//! grounded precondition holds, and a no-op if none does. The simulator
//! and the planner share this semantics, one over the hidden ground-truth
//! operators and the other over learned ones.

use crate::rel::{
    ActionId, Atom, Domain, GroundAction, GroundCondition, ObjId, Operator, State, Task,
};
use std::collections::HashMap;

/// A set of lifted operators, possibly several per action schema.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OperatorSet {
    pub ops: Vec<Operator>,
}

impl OperatorSet {
    pub fn new(ops: Vec<Operator>) -> OperatorSet {
        OperatorSet { ops }
    }

    pub fn for_schema(&self, action: ActionId) -> impl Iterator<Item = &Operator> {
        self.ops.iter().filter(move |op| op.action == action)
    }

    /// Do two sets describe the same schema identically (as multisets of
    /// structural operator keys)? Equal schemas predict identically on
    /// every ground action of that schema.
    pub fn schema_equal(&self, other: &OperatorSet, action: ActionId) -> bool {
        let mut a: Vec<_> = self.for_schema(action).map(|op| op.canon_key()).collect();
        let mut b: Vec<_> = other.for_schema(action).map(|op| op.canon_key()).collect();
        a.sort();
        b.sort();
        a == b
    }
}

/// One grounded operator candidate: a full parameter binding of some
/// operator, with precondition and effects instantiated.
#[derive(Clone, Debug)]
pub struct GroundOp {
    /// Index into the operator slice the model was built from.
    pub op_idx: usize,
    pub binding: Vec<ObjId>,
    pub pre: GroundCondition,
    pub add: Vec<Atom>,
    pub del: Vec<Atom>,
}

/// All ground actions of a task with their grounded operator candidates.
#[derive(Clone, Debug)]
pub struct GroundModel {
    /// Every well-typed ground action, in canonical enumeration order.
    pub actions: Vec<GroundAction>,
    /// Candidates per action (parallel to `actions`), ordered by operator
    /// position and then by canonical binding order of any effect-only
    /// parameters.
    pub candidates: Vec<Vec<GroundOp>>,
    index: HashMap<u64, usize>,
}

impl GroundModel {
    pub fn build(domain: &Domain, ops: &[Operator], task: &Task) -> GroundModel {
        let actions = crate::rel::enumerate_ground_actions(domain, task);
        let index: HashMap<u64, usize> =
            actions.iter().enumerate().map(|(i, ga)| (ga.0, i)).collect();
        let mut candidates: Vec<Vec<GroundOp>> = vec![Vec::new(); actions.len()];

        for (op_idx, op) in ops.iter().enumerate() {
            let schema_arity = domain.actions.arity(op.action);
            debug_assert!(op.params.len() >= schema_arity);
            let extra_types = &op.params[schema_arity..];
            for (i, ga) in actions.iter().enumerate() {
                if ga.schema() != op.action {
                    continue;
                }
                let base = ga.args(schema_arity);
                // Effect-only parameters range over all conforming task
                // objects; candidates are emitted in ascending object
                // order so the first-match rule stays canonical.
                for ext in bindings_over(task, extra_types) {
                    let mut binding = base.clone();
                    binding.extend_from_slice(&ext);
                    let pre = op.ground_pre(&domain.preds, &binding);
                    let (add, del) = op.ground_effects(&domain.preds, &binding);
                    candidates[i].push(GroundOp { op_idx, binding, pre, add, del });
                }
            }
        }
        GroundModel { actions, candidates, index }
    }

    pub fn action_index(&self, ga: GroundAction) -> Option<usize> {
        self.index.get(&ga.0).copied()
    }

    /// First candidate of action slot `idx` whose precondition holds.
    pub fn applicable_at(&self, state: &State, idx: usize) -> Option<&GroundOp> {
        self.candidates[idx].iter().find(|c| state.satisfies(&c.pre))
    }

    pub fn applicable(&self, state: &State, ga: GroundAction) -> Option<&GroundOp> {
        self.applicable_at(state, self.action_index(ga)?)
    }

    /// Predicted successor of taking `ga` in `state` (no-op when no
    /// candidate applies or the action is not well-typed for the task).
    pub fn next_state(&self, state: &State, ga: GroundAction) -> State {
        match self.applicable(state, ga) {
            Some(c) => state.apply(&c.add, &c.del),
            None => state.clone(),
        }
    }

    /// Does the model's prediction for `(state, ga)` disagree with the
    /// observed successor?
    pub fn mismatch(&self, state: &State, ga: GroundAction, observed: &State) -> bool {
        self.next_state(state, ga) != *observed
    }
}

/// Cartesian product of conforming objects for a list of parameter types,
/// in canonical (ascending object id) order. Yields one empty binding for
/// an empty type list.
fn bindings_over(task: &Task, types: &[crate::rel::TypeId]) -> Vec<Vec<ObjId>> {
    let mut out = vec![Vec::new()];
    for t in types {
        let objs = task.objects_of(*t);
        let mut next = Vec::with_capacity(out.len() * objs.len());
        for prefix in &out {
            for &o in objs {
                let mut b = prefix.clone();
                b.push(o);
                next.push(b);
            }
        }
        out = next;
    }
    out
}
