//! Exploration policies: how the agent chooses actions while learning.
//!
//! A [`Policy`] is driven by the harness once per environment step. It
//! sees the current episode context — including, for oracle policies, the
//! ground-truth model; learning-only policies simply never touch
//! [`Ctx::truth_model`] — and returns a [`Decision`]: act, end the
//! episode, or declare convergence.

pub mod bfs;
pub mod demos;
pub mod glib;
pub mod target;

use crate::model::{GroundModel, OperatorSet};
use crate::plan::{Heuristic, SearchBudget};
use crate::rel::{Domain, GroundAction, State, Task};
use crate::sim::Transition;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Everything a policy may consult when deciding. Rebuilt by the harness
/// for every call; policies keep only their own long-lived state.
pub struct Ctx<'a> {
    pub domain: &'a Domain,
    pub tasks: &'a [Arc<Task>],
    pub task_idx: usize,
    pub state: &'a State,
    pub learned: &'a OperatorSet,
    /// Learned operators grounded against the current task.
    pub learned_model: &'a GroundModel,
    /// Ground truth for the current task. Oracle policies only.
    pub truth_model: &'a GroundModel,
    pub heuristic: Heuristic,
    pub plan_budget: SearchBudget,
    /// Episode length cap H; the harness ends the episode at H steps
    /// regardless of the policy's wishes.
    pub horizon: usize,
    pub steps_in_episode: usize,
    pub rng: &'a mut ChaCha8Rng,
}

#[derive(Clone, Debug)]
pub enum Decision {
    /// Execute a ground action. `note` is a short stage tag for the
    /// policy trace log.
    Act { action: GroundAction, note: String },
    /// Stop the episode; `same_task` requests a reset of the current task
    /// instead of rotating to a random one.
    EndEpisode { same_task: bool },
    /// The policy has nothing left to improve (targeting only).
    Converged,
}

impl Decision {
    pub fn act(action: GroundAction, note: impl Into<String>) -> Decision {
        Decision::Act { action, note: note.into() }
    }
}

pub trait Policy {
    /// Called once after every episode reset, before the first decision.
    fn begin_episode(&mut self, _ctx: &mut Ctx) {}

    fn decide(&mut self, ctx: &mut Ctx) -> Decision;

    /// Called with the executed transition after each [`Decision::Act`].
    fn observe(&mut self, _tr: &Transition) {}
}

/// Uniform random action selection over all ground actions of the task.
#[derive(Default)]
pub struct Random;

/// One uniform draw from the task's ground actions.
pub fn random_action(ctx: &mut Ctx) -> GroundAction {
    use rand::Rng;
    let i = ctx.rng.gen_range(0..ctx.learned_model.actions.len());
    ctx.learned_model.actions[i]
}

impl Policy for Random {
    fn decide(&mut self, ctx: &mut Ctx) -> Decision {
        Decision::act(random_action(ctx), "random")
    }
}
