//! The environment: executes ground actions under a hidden ground-truth
//! model and records every interaction.
//!
//! Actions whose ground-truth precondition fails are no-ops; they are
//! still logged (with `changed = false`) because failed applications are
//! the learner's negative evidence. Resetting or rotating tasks does not
//! consume environment steps — only executed actions do.

use crate::model::GroundModel;
use crate::rel::{Domain, GroundAction, State, Task};
use anyhow::{bail, Result};
use rand::Rng;
use std::sync::Arc;

/// One logged interaction with the environment.
#[derive(Clone, Debug)]
pub struct Transition {
    pub task_idx: usize,
    pub state: Arc<State>,
    pub action: GroundAction,
    pub next: Arc<State>,
    /// Whether the action applied (`next != state`). A ground-truth no-op
    /// can only arise from a failed precondition, since ground-truth
    /// operators always change the state when they apply.
    pub changed: bool,
}

pub struct Simulator {
    pub domain: Domain,
    pub tasks: Vec<Arc<Task>>,
    truth: Vec<GroundModel>,
    cur: usize,
    state: Arc<State>,
    /// Total environment steps consumed (executed actions plus any
    /// injected demonstration transitions).
    pub steps: u64,
    pub log: Vec<Transition>,
}

impl Simulator {
    /// Build a simulator over ground-truth operators. The ground truth
    /// must be deterministic: exactly one operator per action schema,
    /// with the schema's own parameters and no effect-only ones.
    pub fn new(domain: Domain, tasks: Vec<Arc<Task>>) -> Result<Simulator> {
        if tasks.is_empty() {
            bail!("simulator needs at least one training task");
        }
        for i in 0..domain.actions.len() {
            let a = crate::rel::ActionId(i as u16);
            let n = domain.operators.iter().filter(|op| op.action == a).count();
            if n != 1 {
                bail!(
                    "ground truth must have exactly one operator for schema '{}' (found {n})",
                    domain.actions.name(a)
                );
            }
        }
        for op in &domain.operators {
            if op.params != domain.actions.param_types[op.action.idx()] {
                bail!("ground-truth operator '{}' alters its schema's parameters", op.name);
            }
        }
        let truth =
            tasks.iter().map(|t| GroundModel::build(&domain, &domain.operators, t)).collect();
        let state = Arc::new(tasks[0].init.clone());
        Ok(Simulator { domain, tasks, truth, cur: 0, state, steps: 0, log: Vec::new() })
    }

    pub fn current_task_idx(&self) -> usize {
        self.cur
    }

    pub fn current_task(&self) -> &Arc<Task> {
        &self.tasks[self.cur]
    }

    pub fn state(&self) -> &Arc<State> {
        &self.state
    }

    /// Read-only access to the ground-truth model of a task. Only oracle
    /// policies may consult this; learning policies see transitions only.
    pub fn truth_model(&self, task_idx: usize) -> &GroundModel {
        &self.truth[task_idx]
    }

    /// Execute one action in the current task, log it, and advance.
    pub fn step(&mut self, action: GroundAction) -> &Transition {
        let next = Arc::new(self.truth[self.cur].next_state(&self.state, action));
        let changed = *next != *self.state;
        let tr = Transition {
            task_idx: self.cur,
            state: Arc::clone(&self.state),
            action,
            next: Arc::clone(&next),
            changed,
        };
        self.state = next;
        self.steps += 1;
        self.log.push(tr);
        self.log.last().unwrap()
    }

    /// Jump to a task's initial state (free of charge).
    pub fn reset(&mut self, task_idx: usize) {
        assert!(task_idx < self.tasks.len());
        self.cur = task_idx;
        self.state = Arc::new(self.tasks[task_idx].init.clone());
    }

    /// Reset to a uniformly random training task.
    pub fn rotate(&mut self, rng: &mut impl Rng) -> usize {
        let idx = rng.gen_range(0..self.tasks.len());
        self.reset(idx);
        idx
    }

    /// Record a demonstrated transition as if it had been executed,
    /// charging one environment step. The transition must be truthful
    /// under the ground-truth model.
    pub fn inject_demo(&mut self, tr: Transition) {
        debug_assert!(!self.truth[tr.task_idx].mismatch(&tr.state, tr.action, &tr.next));
        self.steps += 1;
        self.log.push(tr);
    }
}
