//! Forward best-first planning over a ground model.
//!
//! Goal-count search minimizes `f = g + h`; additive-heuristic search is
//! greedy on `h` alone (with `g + h` the two grow in lockstep along deep
//! serial plans, so the frontier degenerates into breadth-first plateau
//! sweeps — ordering by `h` is the usual satisficing fix). Both use FIFO
//! tie-breaking, a closed list keyed by state fingerprints (nodes reopen
//! when a cheaper path appears), and a seeded successor shuffle so distinct
//! run seeds explore plateaus differently while each seed stays fully
//! reproducible. Budgets are deterministic: expansions and plan length by
//! default; wall-clock limits are opt-in because they make outcomes
//! machine-dependent.
//!
//! The additive heuristic and the relaxed-reachability prefilter share one
//! delete-free analysis. Relaxed unreachability of a positive goal atom is
//! sound: if the relaxation cannot reach it, neither can real execution.

use crate::model::GroundModel;
use crate::rel::{Atom, GroundAction, GroundCondition, State};
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::{BinaryHeap, HashMap};
use std::time::{Duration, Instant};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Heuristic {
    /// Number of unsatisfied goal literals.
    GoalCount,
    /// Additive delete-free cost-to-go, recomputed per expanded node;
    /// negative goal literals contribute their unsatisfied count. Ordered
    /// greedily (path cost ignored), so plans may be slightly suboptimal.
    HAdd,
}

#[derive(Clone, Copy, Debug)]
pub struct SearchBudget {
    pub max_expansions: u64,
    /// Inclusive bound on plan length (number of actions).
    pub max_len: usize,
    /// Optional wall-clock limit. Off by default: timing-dependent budgets
    /// break bit-for-bit reproducibility across machines.
    pub wall_clock: Option<Duration>,
}

impl Default for SearchBudget {
    fn default() -> SearchBudget {
        SearchBudget { max_expansions: 50_000, max_len: 1_000, wall_clock: None }
    }
}

/// A plan with its predicted trajectory: `states[0]` is the start state
/// and `states[i + 1]` is the model's prediction after `actions[i]`.
#[derive(Clone, Debug)]
pub struct Plan {
    pub actions: Vec<GroundAction>,
    pub states: Vec<State>,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Clone, Debug)]
pub enum PlanOutcome {
    Found(Plan),
    /// Some goal literal is statically unsatisfiable: a positive atom the
    /// delete-free relaxation cannot reach, or a negated atom that holds
    /// initially and appears in no action's delete list. Either way no plan
    /// exists under this model.
    Unreachable,
    /// Search space exhausted within the budget without reaching the goal.
    Exhausted,
    /// Expansion or wall-clock budget hit.
    BudgetExceeded,
}

impl PlanOutcome {
    pub fn plan(&self) -> Option<&Plan> {
        match self {
            PlanOutcome::Found(p) => Some(p),
            _ => None,
        }
    }
}

struct Node {
    state: State,
    parent: usize,
    action: GroundAction,
    g: u32,
}

/// Best-first search for a plan from `start` to `goal` under `model`.
///
/// Under `HAdd`, conjunctive positive goals are solved as a goal agenda:
/// one atom at a time, each stage keeping the atoms already achieved. The
/// additive heuristic is blind to deletes, so with several goal atoms in
/// play it lets them share consumed resources (a filled pan, a hot oven)
/// and then reports no progress along the second atom's whole chain;
/// one new atom per stage restores the gradient. Serialization trades
/// completeness for guidance — a stage can strand the search where the
/// next atom is out of reach — which is the usual satisficing bargain.
/// `Unreachable` is only surfaced from the first stage, whose goal is a
/// subset of the full goal, so that certificate stays sound. `GoalCount`
/// search stays joint.
pub fn plan(
    model: &GroundModel,
    start: &State,
    goal: &GroundCondition,
    heuristic: Heuristic,
    budget: SearchBudget,
    rng: &mut impl Rng,
) -> PlanOutcome {
    if heuristic == Heuristic::HAdd && goal.pos.len() > 1 {
        return plan_serialized(model, start, goal, budget, rng);
    }
    search(model, start, goal, heuristic, budget, rng).0
}

fn plan_serialized(
    model: &GroundModel,
    start: &State,
    goal: &GroundCondition,
    budget: SearchBudget,
    rng: &mut impl Rng,
) -> PlanOutcome {
    let atoms: Vec<Atom> = goal.pos.iter().copied().collect();
    let mut actions: Vec<GroundAction> = Vec::new();
    let mut states: Vec<State> = vec![start.clone()];
    let mut expansions_left = budget.max_expansions;
    for i in 0..atoms.len() {
        let last = i == atoms.len() - 1;
        let stage_goal = GroundCondition {
            pos: atoms[..=i].iter().copied().collect(),
            neg: if last { goal.neg.clone() } else { Default::default() },
        };
        let stage_budget = SearchBudget {
            max_expansions: expansions_left,
            max_len: budget.max_len.saturating_sub(actions.len()),
            wall_clock: budget.wall_clock,
        };
        let cur = states.last().unwrap().clone();
        let (outcome, used) =
            search(model, &cur, &stage_goal, Heuristic::HAdd, stage_budget, rng);
        expansions_left = expansions_left.saturating_sub(used);
        match outcome {
            PlanOutcome::Found(p) => {
                actions.extend(p.actions);
                states.extend(p.states.into_iter().skip(1));
            }
            PlanOutcome::Unreachable if i == 0 => return PlanOutcome::Unreachable,
            // Later stages start from a constructed state, so their
            // unreachability does not certify anything about `start`.
            PlanOutcome::Unreachable | PlanOutcome::Exhausted => return PlanOutcome::Exhausted,
            PlanOutcome::BudgetExceeded => return PlanOutcome::BudgetExceeded,
        }
    }
    debug_assert!(states.last().unwrap().satisfies(goal));
    PlanOutcome::Found(Plan { actions, states })
}

fn search(
    model: &GroundModel,
    start: &State,
    goal: &GroundCondition,
    heuristic: Heuristic,
    budget: SearchBudget,
    rng: &mut impl Rng,
) -> (PlanOutcome, u64) {
    if start.satisfies(goal) {
        let found = Plan { actions: Vec::new(), states: vec![start.clone()] };
        return (PlanOutcome::Found(found), 0);
    }

    let relaxed = Relaxed::build(model);
    let start_costs = relaxed.costs_from(start);
    if goal.pos.iter().any(|a| relaxed.atom_cost(&start_costs, *a).is_none()) {
        return (PlanOutcome::Unreachable, 0);
    }
    if !goal.neg.is_empty() {
        let mut deletable: std::collections::HashSet<u64> = std::collections::HashSet::new();
        for cands in &model.candidates {
            for c in cands {
                for d in &c.del {
                    deletable.insert(d.0);
                }
            }
        }
        if goal.neg.iter().any(|a| start.contains(*a) && !deletable.contains(&a.0)) {
            return (PlanOutcome::Unreachable, 0);
        }
    }

    let h_of = |costs: &[u32], state: &State| -> Option<u64> {
        match heuristic {
            Heuristic::GoalCount => Some(goal.unsatisfied(state) as u64),
            Heuristic::HAdd => {
                let mut h: u64 = 0;
                for a in &goal.pos {
                    h += relaxed.atom_cost(costs, *a)? as u64;
                }
                h += goal.neg.iter().filter(|a| state.contains(**a)).count() as u64;
                Some(h)
            }
        }
    };

    let mut nodes: Vec<Node> = vec![Node {
        state: start.clone(),
        parent: usize::MAX,
        action: GroundAction(0),
        g: 0,
    }];
    let mut best_g: HashMap<u128, u32> = HashMap::new();
    best_g.insert(start.fingerprint(), 0);
    // Min-heap on (f, insertion sequence): FIFO among equal f.
    let mut open: BinaryHeap<std::cmp::Reverse<(u64, u64, usize)>> = BinaryHeap::new();
    let h0 = match h_of(&start_costs, start) {
        Some(h) => h,
        None => return (PlanOutcome::Unreachable, 0),
    };
    let mut seq: u64 = 0;
    open.push(std::cmp::Reverse((h0, seq, 0)));

    let deadline = budget.wall_clock.map(|d| Instant::now() + d);
    let mut expansions: u64 = 0;
    let mut order: Vec<usize> = (0..model.actions.len()).collect();

    while let Some(std::cmp::Reverse((_, _, node_idx))) = open.pop() {
        let g = nodes[node_idx].g;
        let fp = nodes[node_idx].state.fingerprint();
        if best_g.get(&fp).copied().unwrap_or(u32::MAX) < g {
            continue; // stale entry; a cheaper path was queued later
        }

        expansions += 1;
        if expansions > budget.max_expansions {
            return (PlanOutcome::BudgetExceeded, expansions);
        }
        if let Some(d) = deadline {
            if expansions % 256 == 0 && Instant::now() > d {
                return (PlanOutcome::BudgetExceeded, expansions);
            }
        }

        if g as usize >= budget.max_len {
            continue;
        }

        order.shuffle(rng);
        let state = nodes[node_idx].state.clone();
        // GoalCount is cheap enough to evaluate per successor. The additive
        // heuristic needs a full relaxed sweep, so it is evaluated once per
        // *expanded* node and its children inherit that value (deferred
        // evaluation); a relaxed dead end prunes the whole expansion.
        let deferred_h = match heuristic {
            Heuristic::HAdd => {
                let costs = relaxed.costs_from(&state);
                match h_of(&costs, &state) {
                    Some(h) => Some(h),
                    None => continue, // relaxed dead end is a real dead end
                }
            }
            Heuristic::GoalCount => None,
        };
        for &ai in &order {
            let Some(cand) = model.applicable_at(&state, ai) else { continue };
            let next = state.apply(&cand.add, &cand.del);
            if next == state {
                continue;
            }
            let nfp = next.fingerprint();
            let ng = g + 1;
            if best_g.get(&nfp).copied().unwrap_or(u32::MAX) <= ng {
                continue;
            }
            if next.satisfies(goal) {
                // Reconstruct eagerly; holds() was just verified.
                let mut actions = vec![model.actions[ai]];
                let mut states = vec![next];
                let mut cur = node_idx;
                while cur != usize::MAX {
                    states.push(nodes[cur].state.clone());
                    if nodes[cur].parent != usize::MAX {
                        actions.push(nodes[cur].action);
                    }
                    cur = nodes[cur].parent;
                }
                actions.reverse();
                states.reverse();
                return (PlanOutcome::Found(Plan { actions, states }), expansions);
            }
            let h = match deferred_h {
                Some(h) => h,
                None => h_of(&[], &next).unwrap(),
            };
            let f = match heuristic {
                Heuristic::GoalCount => ng as u64 + h,
                Heuristic::HAdd => h,
            };
            best_g.insert(nfp, ng);
            seq += 1;
            nodes.push(Node { state: next, parent: node_idx, action: model.actions[ai], g: ng });
            open.push(std::cmp::Reverse((f, seq, nodes.len() - 1)));
        }
    }
    (PlanOutcome::Exhausted, expansions)
}

// ---------------------------------------------------------------------------
// Delete-free relaxation (shared by h-add and the reachability prefilter)
// ---------------------------------------------------------------------------

struct RelaxedOp {
    pre: Vec<u32>,
    add: Vec<u32>,
}

/// Per-model relaxation context: dense indices for every atom mentioned in
/// any candidate precondition or add list.
struct Relaxed {
    atom_idx: HashMap<u64, u32>,
    ops: Vec<RelaxedOp>,
    watchers: Vec<Vec<u32>>, // atom -> ops whose pre mentions it
}

impl Relaxed {
    fn build(model: &GroundModel) -> Relaxed {
        let mut atom_idx: HashMap<u64, u32> = HashMap::new();
        let intern = |a: Atom, atom_idx: &mut HashMap<u64, u32>| -> u32 {
            let next = atom_idx.len() as u32;
            *atom_idx.entry(a.0).or_insert(next)
        };
        let mut ops = Vec::new();
        for cands in &model.candidates {
            for c in cands {
                let pre: Vec<u32> =
                    c.pre.pos.iter().map(|a| intern(*a, &mut atom_idx)).collect();
                let add: Vec<u32> = c.add.iter().map(|a| intern(*a, &mut atom_idx)).collect();
                ops.push(RelaxedOp { pre, add });
            }
        }
        let mut watchers = vec![Vec::new(); atom_idx.len()];
        for (i, op) in ops.iter().enumerate() {
            for &p in &op.pre {
                watchers[p as usize].push(i as u32);
            }
        }
        Relaxed { atom_idx, ops, watchers }
    }

    /// Additive costs of all indexed atoms from `state` (u32::MAX = not
    /// relaxed-reachable). Generalized Dijkstra with per-op counters.
    fn costs_from(&self, state: &State) -> Vec<u32> {
        let n = self.atom_idx.len();
        let mut cost = vec![u32::MAX; n];
        let mut settled = vec![false; n];
        let mut remaining: Vec<u32> = self.ops.iter().map(|o| o.pre.len() as u32).collect();
        let mut acc: Vec<u64> = vec![0; self.ops.len()];
        let mut heap: BinaryHeap<std::cmp::Reverse<(u32, u32)>> = BinaryHeap::new();

        for a in state.iter() {
            if let Some(&i) = self.atom_idx.get(&a.0) {
                if cost[i as usize] != 0 {
                    cost[i as usize] = 0;
                    heap.push(std::cmp::Reverse((0, i)));
                }
            }
        }
        let trigger = |op_i: usize,
                           cost: &mut Vec<u32>,
                           heap: &mut BinaryHeap<std::cmp::Reverse<(u32, u32)>>,
                           acc: &[u64]| {
            let c = acc[op_i].saturating_add(1).min(u32::MAX as u64 - 1) as u32;
            for &a in &self.ops[op_i].add {
                if c < cost[a as usize] {
                    cost[a as usize] = c;
                    heap.push(std::cmp::Reverse((c, a)));
                }
            }
        };
        // Ops with no positive preconditions fire immediately.
        for i in 0..self.ops.len() {
            if remaining[i] == 0 {
                trigger(i, &mut cost, &mut heap, &acc);
            }
        }
        while let Some(std::cmp::Reverse((c, a))) = heap.pop() {
            if settled[a as usize] {
                continue;
            }
            settled[a as usize] = true;
            debug_assert_eq!(c, cost[a as usize]);
            for &op_i in &self.watchers[a as usize] {
                let op_i = op_i as usize;
                acc[op_i] += c as u64;
                remaining[op_i] -= 1;
                if remaining[op_i] == 0 {
                    trigger(op_i, &mut cost, &mut heap, &acc);
                }
            }
        }
        cost
    }

    /// Cost of one atom under a `costs_from` result; `None` = unreachable.
    /// Atoms never indexed can only be true if already in the start state,
    /// which `costs_from` cannot record, so treat them as unreachable —
    /// except that the caller checks `start.satisfies(goal)` first.
    fn atom_cost(&self, costs: &[u32], a: Atom) -> Option<u32> {
        match self.atom_idx.get(&a.0) {
            Some(&i) if costs[i as usize] != u32::MAX => Some(costs[i as usize]),
            _ => None,
        }
    }
}

/// Reference implementation: exhaustive breadth-first search for the
/// optimal plan length, for validating planner output on small tasks.
pub fn bfs_optimal_plan_length(
    model: &GroundModel,
    start: &State,
    goal: &GroundCondition,
    max_depth: usize,
) -> Option<usize> {
    if start.satisfies(goal) {
        return Some(0);
    }
    let mut seen: HashMap<u128, ()> = HashMap::new();
    seen.insert(start.fingerprint(), ());
    let mut frontier = vec![start.clone()];
    for depth in 1..=max_depth {
        let mut next_frontier = Vec::new();
        for state in &frontier {
            for ai in 0..model.actions.len() {
                let Some(cand) = model.applicable_at(state, ai) else { continue };
                let next = state.apply(&cand.add, &cand.del);
                if next.satisfies(goal) {
                    return Some(depth);
                }
                if seen.insert(next.fingerprint(), ()).is_none() {
                    next_frontier.push(next);
                }
            }
        }
        frontier = next_frontier;
        if frontier.is_empty() {
            return None;
        }
    }
    None
}

/// True iff every positive goal atom is relaxed-reachable from `start`.
/// A `false` answer is a certificate that no real plan exists.
pub fn relaxed_reachable(model: &GroundModel, start: &State, goal: &GroundCondition) -> bool {
    let relaxed = Relaxed::build(model);
    let costs = relaxed.costs_from(start);
    goal.pos.iter().all(|a| {
        state_or_cost(start, &relaxed, &costs, *a)
    })
}

fn state_or_cost(start: &State, relaxed: &Relaxed, costs: &[u32], a: Atom) -> bool {
    start.contains(a) || relaxed.atom_cost(costs, a).is_some()
}
