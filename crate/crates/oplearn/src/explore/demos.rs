//! Oracle demonstrations: one successful application of every
//! ground-truth operator, used to seed the interaction log before
//! exploration starts.
//!
//! For each operator we pick a grounding over some training task's
//! objects, plan (under the ground truth) from the task's initial state
//! to a state satisfying the grounded precondition, and record the single
//! application transition from there. Only that final transition enters
//! the demo set; the prefix that reaches it is oracle bookkeeping.

use crate::plan::{plan, Heuristic, PlanOutcome, SearchBudget};
use crate::rel::{GroundAction, ObjId, Operator, Task};
use crate::sim::{Simulator, Transition};
use anyhow::{bail, Result};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// All injective typed bindings for `op` over the task's objects, ordered
/// by how many grounded precondition literals are unsatisfied at the
/// task's initial state (easiest first), then lexicographically.
fn orderings(op: &Operator, task: &Task, preds: &crate::rel::PredTable) -> Vec<Vec<ObjId>> {
    let pools: Vec<&[ObjId]> = op.params.iter().map(|t| task.objects_of(*t)).collect();
    if pools.iter().any(|p| p.is_empty()) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut binding: Vec<ObjId> = Vec::with_capacity(pools.len());
    fn rec(pools: &[&[ObjId]], binding: &mut Vec<ObjId>, out: &mut Vec<Vec<ObjId>>) {
        if binding.len() == pools.len() {
            out.push(binding.clone());
            return;
        }
        for &o in pools[binding.len()] {
            // Injective bindings only: a ground-truth operator applied to
            // repeated objects never produces a demonstrable transition.
            if binding.contains(&o) {
                continue;
            }
            binding.push(o);
            rec(pools, binding, out);
            binding.pop();
        }
    }
    rec(&pools, &mut binding, &mut out);
    out.sort_by_key(|b| (op.ground_pre(preds, b).unsatisfied(&task.init), b.clone()));
    out
}

/// One transition per ground-truth operator, in operator-name order.
/// Fails loudly if some operator cannot be demonstrated from any
/// training task.
pub fn generate_demos(
    sim: &Simulator,
    heuristic: Heuristic,
    budget: SearchBudget,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Transition>> {
    let domain = &sim.domain;
    let mut order: Vec<usize> = (0..domain.operators.len()).collect();
    order.sort_by(|a, b| domain.operators[*a].name.cmp(&domain.operators[*b].name));

    let mut demos = Vec::with_capacity(order.len());
    'ops: for oi in order {
        let op = &domain.operators[oi];
        for (task_idx, task) in sim.tasks.iter().enumerate() {
            let model = sim.truth_model(task_idx);
            for binding in orderings(op, task, &domain.preds) {
                let goal = op.ground_pre(&domain.preds, &binding);
                let outcome = plan(model, &task.init, &goal, heuristic, budget, rng);
                let found = match outcome {
                    PlanOutcome::Found(p) => p,
                    _ => continue,
                };
                let state = found.states.last().unwrap().clone();
                let action = GroundAction::new(op.action, &binding);
                let next = model.next_state(&state, action);
                assert!(next != state, "ground-truth operators change the state when applied");
                demos.push(Transition {
                    task_idx,
                    state: Arc::new(state),
                    action,
                    next: Arc::new(next),
                    changed: true,
                });
                continue 'ops;
            }
        }
        bail!(
            "operator '{}' cannot be demonstrated from any training task",
            op.name
        );
    }
    Ok(demos)
}
