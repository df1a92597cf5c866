//! Learning lifted STRIPS operators from online interaction.
//!
//! The crate is organized bottom-up:
//!
//! - [`rel`] — interned relational vocabulary: predicates, types, objects,
//!   packed ground atoms, states, lifted literals, operators, domains, tasks.
//! - [`pddl`] — parser and canonical serializer for the PDDL subset used by
//!   the bundled domains (`:strips`, `:typing`, `:negative-preconditions`).
//! - [`model`] — grounding an operator set into an executable action model
//!   (prediction, applicability, mismatch detection).
//! - [`sim`] — the environment: executes ground actions under a hidden
//!   ground-truth model and records transitions.
//! - [`plan`] — best-first forward search over a (possibly learned) model
//!   with pluggable heuristics and deterministic budgets.
//! - [`learn`] — the deterministic operator learner: canonical lifting,
//!   effect clustering, and precondition induction from positive and
//!   negative contexts.
//! - [`explore`] — exploration policies that choose which actions to take:
//!   random, goal babbling, model-disagreement search, demonstration
//!   bootstrapping, and precondition-targeted oracle guidance.
//! - [`domains`] — bundled benchmark domains plus loading/validation of
//!   domain bundles from disk.
//! - [`harness`] — experiment orchestration: runs, evaluation grids,
//!   learning curves, aggregation, and artifact output.

pub mod domains;
pub mod explore;
pub mod harness;
pub mod learn;
pub mod model;
pub mod pddl;
pub mod plan;
pub mod rel;
pub mod sim;
