//! Precondition-targeting oracle policy.
//!
//! The oracle compares each learned operator against the ground-truth
//! operator with the same effect signature and measures *dissonance*:
//! the number of literals by which the learned precondition is stronger
//! (extra literals) or weaker (missing literals). For any dissonant
//! operator it constructs goals that make the disagreement observable —
//! states satisfying one side's precondition while violating literals of
//! the disagreement — plans to one under the ground truth, executes the
//! plan, executes the target operator's action (the informative
//! transition), and asks for a reset. With each relearn the dissonance
//! shrinks until the policy signals convergence.

use super::{Ctx, Decision, Policy};
use crate::model::OperatorSet;
use crate::plan::{plan, PlanOutcome};
use crate::rel::{
    ActionId, Domain, GroundAction, GroundCondition, Literal, ObjId, Operator, Task, TypeId,
};
use anyhow::{bail, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, HashSet, VecDeque};

/// Effect signature: schema, effect-only parameter types, and the sorted
/// lifted add/delete lists. Operators with equal signatures describe the
/// same observable state change.
pub fn signature(domain: &Domain, op: &Operator) -> (ActionId, Vec<TypeId>, Vec<u64>, Vec<u64>) {
    let arity = domain.actions.arity(op.action);
    (
        op.action,
        op.params[arity..].to_vec(),
        op.add.iter().map(|a| a.0).collect(),
        op.del.iter().map(|a| a.0).collect(),
    )
}

/// How one learned operator's precondition disagrees with the ground truth.
#[derive(Clone, Debug)]
pub struct PreconditionDiff {
    /// Index into `domain.operators`.
    pub gt_idx: usize,
    /// Index into the learned operator set.
    pub learned_idx: usize,
    /// Literals in the learned precondition but not the ground truth.
    pub stronger: Vec<Literal>,
    /// Ground-truth literals missing from the learned precondition.
    pub weaker: Vec<Literal>,
}

impl PreconditionDiff {
    pub fn dissonance(&self) -> usize {
        self.stronger.len() + self.weaker.len()
    }
}

/// Literal-wise set difference under the canonical parameter
/// correspondence. Both operators bind the schema's parameters in order,
/// so syntactic difference is semantic difference.
pub fn precondition_diff(
    domain: &Domain,
    learned: &Operator,
    gt: &Operator,
    gt_idx: usize,
    learned_idx: usize,
) -> Result<PreconditionDiff> {
    if signature(domain, learned) != signature(domain, gt) {
        bail!(
            "precondition diff requires matching effect signatures: '{}' vs '{}'",
            learned.name,
            gt.name
        );
    }
    let stronger =
        learned.pre.iter().filter(|l| !gt.pre.contains(l)).cloned().collect();
    let weaker =
        gt.pre.iter().filter(|l| !learned.pre.contains(l)).cloned().collect();
    Ok(PreconditionDiff { gt_idx, learned_idx, stronger, weaker })
}

/// Diff every ground-truth operator against its learned counterpart.
/// Demo initialization guarantees the signature matching is a bijection;
/// anything else is a usage bug and fails loudly.
pub fn diff_all(domain: &Domain, learned: &OperatorSet) -> Result<Vec<PreconditionDiff>> {
    let sigs: Vec<_> = learned.ops.iter().map(|o| signature(domain, o)).collect();
    let mut used = vec![false; learned.ops.len()];
    let mut out = Vec::new();
    for (gi, gt) in domain.operators.iter().enumerate() {
        let sig = signature(domain, gt);
        let li = match sigs.iter().position(|s| *s == sig) {
            Some(li) => li,
            None => bail!(
                "no learned operator matches the effect signature of '{}'",
                gt.name
            ),
        };
        used[li] = true;
        out.push(precondition_diff(domain, &learned.ops[li], gt, gi, li)?);
    }
    if let Some(li) = used.iter().position(|u| !u) {
        bail!(
            "learned operator '{}' matches no ground-truth effect signature",
            learned.ops[li].name
        );
    }
    Ok(out)
}

/// Total dissonance across operators, tolerant of partial learning: a
/// ground-truth operator with no learned counterpart contributes all of
/// its precondition literals (everything about it is still unknown).
pub fn total_dissonance(domain: &Domain, learned: &OperatorSet) -> u64 {
    let sigs: Vec<_> = learned.ops.iter().map(|o| signature(domain, o)).collect();
    let mut total: u64 = 0;
    let mut used = vec![false; learned.ops.len()];
    for (gi, gt) in domain.operators.iter().enumerate() {
        let sig = signature(domain, gt);
        match sigs.iter().position(|s| *s == sig) {
            Some(li) => {
                used[li] = true;
                let d = precondition_diff(domain, &learned.ops[li], gt, gi, li)
                    .expect("signatures just matched");
                total += d.dissonance() as u64;
            }
            None => total += gt.pre.len() as u64,
        }
    }
    for (li, u) in used.iter().enumerate() {
        if !u {
            total += learned.ops[li].pre.len() as u64;
        }
    }
    total
}

/// A grounded goal engineered to make one operator's disagreement
/// observable, plus the operator grounding that must be executed there.
#[derive(Clone, Debug)]
pub struct DissonantGoal {
    pub cond: GroundCondition,
    pub binding: Vec<ObjId>,
    /// Number of disagreement literals this goal violates.
    pub violated: usize,
}

/// Stable identity of a grounded goal, for the attempt ledger.
pub type GoalKey = (Vec<u64>, Vec<u64>);

pub fn goal_key(cond: &GroundCondition) -> GoalKey {
    (cond.pos.iter().map(|a| a.0).collect(), cond.neg.iter().map(|a| a.0).collect())
}

const MAX_VIOLATION_SUBSET: usize = 3;

/// Per-goal search cap. Many candidate goals are unreachable (the planner
/// proves most of those instantly via relaxed reachability, but not goals
/// with negative literals), and the cycle tries goals until one works.
const MAX_ATTEMPT_EXPANSIONS: u64 = 4_000;

fn subsets_upto(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if cur.len() == k {
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Add `base` (grounded under `binding`) to the goal; returns false if
/// the goal became self-contradictory.
fn add_literal(
    cond: &mut GroundCondition,
    preds: &crate::rel::PredTable,
    lit: &Literal,
    binding: &[ObjId],
    positive: bool,
) -> bool {
    let atom = lit.atom.ground(preds.arity(lit.atom.pred()), binding);
    let wants_true = lit.positive == positive;
    if wants_true {
        if cond.neg.contains(&atom) {
            return false;
        }
        cond.pos.insert(atom);
    } else {
        if cond.pos.contains(&atom) {
            return false;
        }
        cond.neg.insert(atom);
    }
    true
}

/// All goals that would make `diff`'s disagreement observable on this
/// task, ranked by descending violation count with rng-shuffled ties.
/// Stronger-case goals satisfy the ground-truth precondition while
/// violating extra learned literals; weaker-case goals satisfy the
/// learned precondition while violating missing ground-truth literals; a
/// mixed diff emits both families. Goals already achieved-and-executed
/// (per `attempted`) are filtered out.
///
/// Groundings may repeat objects: the degenerate cases (for example
/// moving a robot to the room it already occupies) are exactly the
/// no-op evidence that exposes missing negative preconditions.
pub fn dissonant_goals(
    diff: &PreconditionDiff,
    gt: &Operator,
    learned: &Operator,
    domain: &Domain,
    task: &Task,
    attempted: &HashSet<(usize, GoalKey)>,
    rng: &mut ChaCha8Rng,
) -> Vec<DissonantGoal> {
    let preds = &domain.preds;
    let pools: Vec<&[ObjId]> = gt.params.iter().map(|t| task.objects_of(*t)).collect();
    if pools.iter().any(|p| p.is_empty()) {
        return Vec::new();
    }

    let families: [(&Operator, &Vec<Literal>); 2] =
        [(gt, &diff.stronger), (learned, &diff.weaker)];

    let mut goals = Vec::new();
    let mut binding = vec![ObjId(0); pools.len()];
    let mut odometer = vec![0usize; pools.len()];
    'bindings: loop {
        for (i, &slot) in odometer.iter().enumerate() {
            binding[i] = pools[i][slot];
        }
        for (base, violations) in families {
            if violations.is_empty() {
                continue;
            }
            'subset: for subset in subsets_upto(violations.len(), MAX_VIOLATION_SUBSET) {
                let mut cond = GroundCondition::default();
                for lit in &base.pre {
                    if !add_literal(&mut cond, preds, lit, &binding, true) {
                        continue 'subset;
                    }
                }
                for &vi in &subset {
                    if !add_literal(&mut cond, preds, &violations[vi], &binding, false) {
                        continue 'subset;
                    }
                }
                if attempted.contains(&(diff.gt_idx, goal_key(&cond))) {
                    continue;
                }
                goals.push(DissonantGoal {
                    cond,
                    binding: binding.clone(),
                    violated: subset.len(),
                });
            }
        }
        for i in (0..odometer.len()).rev() {
            odometer[i] += 1;
            if odometer[i] < pools[i].len() {
                continue 'bindings;
            }
            odometer[i] = 0;
        }
        break;
    }
    // Distinct bindings can produce identical goal conditions (repeated
    // objects collapse literals); keep one of each.
    let mut seen: BTreeSet<GoalKey> = BTreeSet::new();
    goals.retain(|g| seen.insert(goal_key(&g.cond)));
    let mut keyed: Vec<(usize, u64, DissonantGoal)> =
        goals.into_iter().map(|g| (g.violated, rng.gen::<u64>(), g)).collect();
    keyed.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, _, g)| g).collect()
}

/// The policy: one targeting cycle per episode (plan to a dissonant
/// goal, execute the target action, reset), converging when no operator
/// disagrees with the ground truth any more.
#[derive(Default)]
pub struct Targeting {
    completed: HashSet<(usize, GoalKey)>,
    deferred: BTreeSet<usize>,
    queue: VecDeque<GroundAction>,
    target: Option<GroundAction>,
    awaiting_reset: bool,
}

impl Policy for Targeting {
    fn begin_episode(&mut self, _ctx: &mut Ctx) {
        self.deferred.clear();
        self.queue.clear();
        self.target = None;
        self.awaiting_reset = false;
    }

    fn decide(&mut self, ctx: &mut Ctx) -> Decision {
        if self.awaiting_reset {
            self.awaiting_reset = false;
            return Decision::EndEpisode { same_task: true };
        }
        if let Some(a) = self.queue.pop_front() {
            return Decision::act(a, "target:plan");
        }
        if let Some(t) = self.target.take() {
            self.awaiting_reset = true;
            return Decision::act(t, "target:execute");
        }

        let diffs = diff_all(ctx.domain, ctx.learned)
            .expect("targeting requires demo-initialized operators");
        if diffs.iter().all(|d| d.dissonance() == 0) {
            return Decision::Converged;
        }
        let task = &ctx.tasks[ctx.task_idx];
        loop {
            let avail: Vec<usize> = diffs
                .iter()
                .enumerate()
                .filter(|(i, d)| d.dissonance() >= 1 && !self.deferred.contains(i))
                .map(|(i, _)| i)
                .collect();
            if avail.is_empty() {
                // Every dissonant operator is unreachable from this task;
                // rotate and retry next episode.
                return Decision::EndEpisode { same_task: false };
            }
            let pick = avail[ctx.rng.gen_range(0..avail.len())];
            let diff = &diffs[pick];
            let gt = &ctx.domain.operators[diff.gt_idx];
            let learned = &ctx.learned.ops[diff.learned_idx];
            let goals = dissonant_goals(
                diff,
                gt,
                learned,
                ctx.domain,
                task,
                &self.completed,
                ctx.rng,
            );
            let mut budget = ctx.plan_budget;
            // Leave room for the target action within the episode horizon.
            budget.max_len = budget
                .max_len
                .min(ctx.horizon.saturating_sub(1 + ctx.steps_in_episode));
            // Setup goals are near the current state when reachable at all,
            // so each attempt gets a slice of the full budget rather than
            // letting one unreachable grounding exhaust it.
            budget.max_expansions = budget.max_expansions.min(MAX_ATTEMPT_EXPANSIONS);
            for goal in goals {
                let outcome =
                    plan(ctx.truth_model, ctx.state, &goal.cond, ctx.heuristic, budget, ctx.rng);
                let found = match outcome {
                    PlanOutcome::Found(p) => p,
                    _ => continue,
                };
                // The plan runs under the ground truth, so execution
                // cannot diverge: the goal is as good as achieved.
                self.completed.insert((diff.gt_idx, goal_key(&goal.cond)));
                let note = format!(
                    "target:cycle op={} violated={} plan={}",
                    gt.name,
                    goal.violated,
                    found.len()
                );
                self.queue = found.actions.into();
                self.target = Some(GroundAction::new(gt.action, &goal.binding));
                if let Some(a) = self.queue.pop_front() {
                    return Decision::act(a, note);
                }
                let t = self.target.take().unwrap();
                self.awaiting_reset = true;
                return Decision::act(t, format!("{note} (goal already satisfied)"));
            }
            self.deferred.insert(pick);
        }
    }
}
