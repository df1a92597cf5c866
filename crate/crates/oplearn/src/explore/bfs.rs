//! Oracle mismatch-chasing policy.
//!
//! Stage 1: if any ground action's predicted outcome differs between the
//! learned model and the ground truth *at the current state*, execute one
//! such action chosen uniformly. Stage 2: otherwise run a bounded
//! breadth-first probe under the ground truth (depth <= 2, at most 50
//! randomly sampled neighbours per expansion, sampled without
//! replacement) looking for a state where some action mismatches; if one
//! is found, execute the first action of the path towards it. Stage 3:
//! otherwise act uniformly at random.

use super::{random_action, Ctx, Decision, Policy};
use crate::model::OperatorSet;
use crate::rel::{ActionId, Atom, GroundAction, Overlay, State};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::{HashMap, HashSet};

pub const MAX_DEPTH: usize = 2;
pub const NEIGHBOURS_PER_EXPANSION: usize = 50;

#[derive(Default)]
pub struct OracleBfs;

/// Effects and applicability data of one grounded candidate, flattened for
/// the counting scan.
struct ScanCand {
    pos_len: u32,
    neg: Vec<Atom>,
    add: Vec<Atom>,
    del: Vec<Atom>,
}

/// One ground action with the ordered candidate lists of both models.
struct ScanSlot {
    ga: GroundAction,
    learned: Vec<u32>,
    truth: Vec<u32>,
}

/// Counting-based detector for states where the learned and ground-truth
/// models predict different successors. Schemas whose learned operators
/// are syntactically identical to the ground truth can never disagree and
/// are excluded up front, so a scan touches only the atoms some remaining
/// candidate watches — far cheaper than probing every ground action.
struct Scanner {
    slots: Vec<ScanSlot>,
    cands: Vec<ScanCand>,
    /// Slot owning each candidate, parallel to `cands`.
    slot_of: Vec<u32>,
    watch: HashMap<Atom, Vec<u32>>,
    /// Candidates with no positive preconditions are satisfied everywhere.
    zero_pos_slots: Vec<u32>,
    hits: Vec<u32>,
    hit_epoch: Vec<u32>,
    epoch: u32,
}

impl Scanner {
    fn build(ctx: &Ctx) -> Scanner {
        let truth_set = OperatorSet::new(ctx.domain.operators.clone());
        let mut open: HashSet<ActionId> = HashSet::new();
        for schema in 0..ctx.domain.actions.len() {
            let action = ActionId(schema as u16);
            if !ctx.learned.schema_equal(&truth_set, action) {
                open.insert(action);
            }
        }
        debug_assert_eq!(ctx.truth_model.actions, ctx.learned_model.actions);

        let mut slots = Vec::new();
        let mut cands: Vec<ScanCand> = Vec::new();
        let mut slot_of: Vec<u32> = Vec::new();
        let mut watch: HashMap<Atom, Vec<u32>> = HashMap::new();
        let mut zero_pos_slots = Vec::new();
        for (i, &ga) in ctx.truth_model.actions.iter().enumerate() {
            if !open.contains(&ga.schema()) {
                continue;
            }
            let l = &ctx.learned_model.candidates[i];
            let t = &ctx.truth_model.candidates[i];
            if l.is_empty() && t.is_empty() {
                continue;
            }
            let slot_id = slots.len() as u32;
            let mut push = |c: &crate::model::GroundOp| -> u32 {
                let id = cands.len() as u32;
                for &a in &c.pre.pos {
                    watch.entry(a).or_default().push(id);
                }
                if c.pre.pos.is_empty() {
                    zero_pos_slots.push(slot_id);
                }
                slot_of.push(slot_id);
                cands.push(ScanCand {
                    pos_len: c.pre.pos.len() as u32,
                    neg: c.pre.neg.iter().copied().collect(),
                    add: c.add.clone(),
                    del: c.del.clone(),
                });
                id
            };
            let learned: Vec<u32> = l.iter().map(&mut push).collect();
            let truth: Vec<u32> = t.iter().map(&mut push).collect();
            slots.push(ScanSlot { ga, learned, truth });
        }
        zero_pos_slots.sort_unstable();
        zero_pos_slots.dedup();
        let n = cands.len();
        Scanner {
            slots,
            cands,
            slot_of,
            watch,
            zero_pos_slots,
            hits: vec![0; n],
            hit_epoch: vec![0; n],
            epoch: 0,
        }
    }

    fn hit(&self, cand: u32) -> u32 {
        if self.hit_epoch[cand as usize] == self.epoch {
            self.hits[cand as usize]
        } else {
            0
        }
    }

    /// First fully applicable candidate of `list` under `view`, by the same
    /// first-match rule the models use.
    fn first_applicable(&self, list: &[u32], view: &Overlay) -> Option<u32> {
        list.iter().copied().find(|&c| {
            let cand = &self.cands[c as usize];
            self.hit(c) == cand.pos_len && cand.neg.iter().all(|&a| !view.contains(a))
        })
    }

    /// Mismatching ground actions under `view`, in canonical action order.
    /// With `stop_at_first` the scan short-circuits and reports at most one.
    fn scan(&mut self, view: &Overlay, stop_at_first: bool) -> Vec<GroundAction> {
        self.epoch += 1;
        let epoch = self.epoch;
        let mut touched: Vec<u32> = self.zero_pos_slots.clone();
        {
            let watch = &self.watch;
            let hits = &mut self.hits;
            let hit_epoch = &mut self.hit_epoch;
            let cands = &self.cands;
            let slot_of = &self.slot_of;
            for atom in view.iter() {
                let Some(watchers) = watch.get(&atom) else { continue };
                for &c in watchers {
                    let ci = c as usize;
                    if hit_epoch[ci] != epoch {
                        hit_epoch[ci] = epoch;
                        hits[ci] = 0;
                    }
                    hits[ci] += 1;
                    if hits[ci] == cands[ci].pos_len {
                        touched.push(slot_of[ci]);
                    }
                }
            }
        }
        touched.sort_unstable();
        touched.dedup();

        let mut out = Vec::new();
        for slot_id in touched {
            let slot = &self.slots[slot_id as usize];
            let l = self.first_applicable(&slot.learned, view);
            let t = self.first_applicable(&slot.truth, view);
            if self.outcomes_differ(l, t, view) {
                out.push(slot.ga);
                if stop_at_first {
                    return out;
                }
            }
        }
        out.sort_unstable_by_key(|ga| ga.0);
        out
    }

    /// Do the two predictions lead to different successor states of `view`?
    fn outcomes_differ(&self, l: Option<u32>, t: Option<u32>, view: &Overlay) -> bool {
        let changes = |c: u32| {
            let cand = &self.cands[c as usize];
            cand.add.iter().any(|&a| !view.contains(a))
                || cand.del.iter().any(|&d| view.contains(d) && !cand.add.contains(&d))
        };
        match (l, t) {
            (None, None) => false,
            (Some(c), None) | (None, Some(c)) => changes(c),
            (Some(lc), Some(tc)) => {
                let (lc, tc) = (&self.cands[lc as usize], &self.cands[tc as usize]);
                if lc.add == tc.add && lc.del == tc.del {
                    return false;
                }
                let after = |cand: &ScanCand, a: Atom| {
                    cand.add.contains(&a) || (view.contains(a) && !cand.del.contains(&a))
                };
                lc.add
                    .iter()
                    .chain(&lc.del)
                    .chain(&tc.add)
                    .chain(&tc.del)
                    .any(|&a| after(lc, a) != after(tc, a))
            }
        }
    }
}

/// The bounded probe of stage 2. Returns the first action of a path (of
/// length 1 or 2) to a state where some candidate action mismatches.
/// Successors at the depth limit are examined through effect overlays and
/// never materialized.
fn probe(ctx: &mut Ctx, scanner: &mut Scanner) -> Option<GroundAction> {
    let truth = ctx.truth_model;
    let mut seen: HashSet<u128> = HashSet::new();
    seen.insert(ctx.state.fingerprint());
    // (state, first action on the path from the root)
    let mut frontier: Vec<(State, GroundAction)> = Vec::new();

    for depth in 0..MAX_DEPTH {
        let sources: Vec<(State, Option<GroundAction>)> = if depth == 0 {
            vec![(ctx.state.clone(), None)]
        } else {
            frontier.drain(..).map(|(s, f)| (s, Some(f))).collect()
        };
        let mut next = Vec::new();
        for (state, first) in sources {
            for ga in sample_actions(ctx.rng, &truth.actions, NEIGHBOURS_PER_EXPANSION) {
                let Some(cand) = truth.applicable(&state, ga) else { continue };
                let view = state.overlay(&cand.add, &cand.del);
                if !view.changes() {
                    continue;
                }
                let first = first.unwrap_or(ga);
                if !scanner.scan(&view, true).is_empty() {
                    return Some(first);
                }
                if depth + 1 < MAX_DEPTH {
                    let succ = state.apply(&cand.add, &cand.del);
                    if seen.insert(succ.fingerprint()) {
                        next.push((succ, first));
                    }
                }
            }
        }
        frontier = next;
    }
    None
}

/// Up to `k` distinct actions, uniformly without replacement.
fn sample_actions(rng: &mut ChaCha8Rng, all: &[GroundAction], k: usize) -> Vec<GroundAction> {
    if all.len() <= k {
        return all.to_vec();
    }
    // Floyd's algorithm keeps this O(k) even for large action spaces.
    let n = all.len();
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for j in (n - k)..n {
        let t = rng.gen_range(0..=j);
        if chosen.contains(&t) {
            chosen.push(j);
        } else {
            chosen.push(t);
        }
    }
    chosen.shuffle(rng);
    chosen.into_iter().map(|i| all[i]).collect()
}

impl Policy for OracleBfs {
    fn decide(&mut self, ctx: &mut Ctx) -> Decision {
        let mut scanner = Scanner::build(ctx);
        let here = scanner.scan(&Overlay::identity(ctx.state), false);
        if !here.is_empty() {
            let ga = here[ctx.rng.gen_range(0..here.len())];
            return Decision::act(ga, "bfs:mismatch-here");
        }
        if let Some(ga) = probe(ctx, &mut scanner) {
            return Decision::act(ga, "bfs:probe");
        }
        Decision::act(random_action(ctx), "bfs:random")
    }
}
