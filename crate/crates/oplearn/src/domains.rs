//! Bundled benchmark domains: manifests, loading, and validation.
//!
//! A bundle is a directory holding a `bundle.toml` manifest, a PDDL domain,
//! and its training and test tasks. The four shipped bundles are compiled
//! into the library so every binary sees byte-identical inputs; `Bundle::load`
//! reads the same layout from disk for externally authored bundles.
//!
//! `validate_bundle` re-derives the statistics a bundle advertises (operator
//! count, ground-action and ground-atom sizes, task solvability, per-operator
//! coverage and necessity) and reports one named check per line rather than
//! failing fast, so a broken bundle shows everything wrong with it at once.

use crate::model::GroundModel;
use crate::plan::{plan, Heuristic, SearchBudget};
use crate::rel::{enumerate_ground_actions, Domain, Task};
use crate::{explore, pddl};
use anyhow::{anyhow, bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub name: String,
    /// Episode horizon; also the inclusive plan-length bound at evaluation.
    pub horizon: usize,
    /// "goal-count" or "hadd".
    pub heuristic: String,
    /// Free-form provenance note (e.g. marking a slot as a stand-in).
    #[serde(default)]
    pub note: Option<String>,
    pub defaults: Defaults,
    pub expect: Expect,
    pub train: Vec<TrainEntry>,
    pub test: Vec<TestEntry>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    /// Exploration budget in simulator steps.
    pub steps: u64,
    /// Evaluation cadence in simulator steps.
    pub eval_interval: u64,
}

/// Statistics the bundle is expected to exhibit; `validate_bundle` re-derives
/// and checks each one.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expect {
    pub operators: usize,
    /// Exact maximum ground-action count over all tasks in the bundle.
    pub max_ground_actions: usize,
    /// Inclusive `[lo, hi]` band every training task's ground-atom count
    /// must fall into, when present.
    #[serde(default)]
    pub train_atoms: Option<[usize; 2]>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainEntry {
    pub file: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestEntry {
    pub file: String,
    pub kind: TestKind,
    /// For `per-operator` tasks: the operator the task exists to exercise.
    #[serde(default)]
    pub operator: Option<String>,
    /// Minimum acceptable plan length found under the ground truth.
    #[serde(default)]
    pub min_plan_len: Option<usize>,
    /// Exact ground-action count this task must have.
    #[serde(default)]
    pub ground_actions: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    Standard,
    Long,
    PerOperator,
}

/// A fully parsed bundle: manifest plus domain and tasks.
#[derive(Clone, Debug)]
pub struct Bundle {
    pub manifest: Manifest,
    pub domain: Domain,
    pub train: Vec<Arc<Task>>,
    pub test: Vec<Arc<Task>>,
}

impl Bundle {
    pub fn heuristic(&self) -> Result<Heuristic> {
        match self.manifest.heuristic.as_str() {
            "goal-count" => Ok(Heuristic::GoalCount),
            "hadd" => Ok(Heuristic::HAdd),
            other => bail!("unknown heuristic {other:?} (expected \"goal-count\" or \"hadd\")"),
        }
    }

    pub fn builtin_names() -> Vec<&'static str> {
        BUILTIN.iter().map(|b| b.name).collect()
    }

    /// A bundle compiled into the library.
    pub fn builtin(name: &str) -> Result<Bundle> {
        let entry = BUILTIN
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| anyhow!("no builtin bundle named {name:?}"))?;
        Bundle::from_sources(entry.manifest, |rel| {
            entry
                .files
                .iter()
                .find(|(p, _)| *p == rel)
                .map(|(_, src)| src.to_string())
                .ok_or_else(|| anyhow!("bundle {name:?} has no file {rel:?}"))
        })
    }

    /// A bundle laid out on disk: `<dir>/bundle.toml` plus the files it names.
    pub fn load(dir: &Path) -> Result<Bundle> {
        let manifest = std::fs::read_to_string(dir.join("bundle.toml"))
            .with_context(|| format!("reading {}", dir.join("bundle.toml").display()))?;
        Bundle::from_sources(&manifest, |rel| {
            std::fs::read_to_string(dir.join(rel))
                .with_context(|| format!("reading {}", dir.join(rel).display()))
        })
    }

    /// Resolve a name as a builtin bundle first, else as a directory path.
    pub fn resolve(name: &str) -> Result<Bundle> {
        if BUILTIN.iter().any(|b| b.name == name) {
            Bundle::builtin(name)
        } else {
            Bundle::load(Path::new(name))
        }
    }

    fn from_sources(
        manifest_src: &str,
        fetch: impl Fn(&str) -> Result<String>,
    ) -> Result<Bundle> {
        let manifest: Manifest =
            toml::from_str(manifest_src).context("parsing bundle.toml")?;
        let domain_src = fetch("domain.pddl")?;
        let domain = pddl::parse_domain("domain.pddl", &domain_src)?;
        let mut train = Vec::new();
        for entry in &manifest.train {
            let src = fetch(&entry.file)?;
            train.push(Arc::new(pddl::parse_problem(&entry.file, &src, &domain)?));
        }
        let mut test = Vec::new();
        for entry in &manifest.test {
            let src = fetch(&entry.file)?;
            test.push(Arc::new(pddl::parse_problem(&entry.file, &src, &domain)?));
            if entry.kind == TestKind::PerOperator && entry.operator.is_none() {
                bail!("{}: per-operator test entries need an `operator` field", entry.file);
            }
        }
        if train.is_empty() {
            bail!("bundle {:?} has no training tasks", manifest.name);
        }
        if test.is_empty() {
            bail!("bundle {:?} has no test tasks", manifest.name);
        }
        Ok(Bundle { manifest, domain, train, test })
    }
}

/// Count of all well-typed ground atoms of the task (independent of which
/// atoms the initial state sets).
pub fn ground_atom_count(domain: &Domain, task: &Task) -> usize {
    (0..domain.preds.len())
        .map(|p| {
            domain.preds.param_types[p]
                .iter()
                .map(|t| task.objects_of(*t).len())
                .product::<usize>()
        })
        .sum()
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub bundle: String,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let mark = if c.passed { "ok  " } else { "FAIL" };
            out.push_str(&format!("{mark}  {:<32}  {}\n", c.name, c.detail));
        }
        let verdict = if self.ok() { "valid" } else { "INVALID" };
        out.push_str(&format!("bundle {} is {verdict}\n", self.bundle));
        out
    }
}

/// Search budget for validation planning. Plan length is capped at the
/// bundle horizon: a test task only counts as solvable if the ground truth
/// solves it within the same bound evaluation uses.
fn validation_budget(horizon: usize) -> SearchBudget {
    SearchBudget { max_len: horizon, ..SearchBudget::default() }
}

/// Re-derive and check everything the bundle's manifest promises.
pub fn validate_bundle(bundle: &Bundle) -> Report {
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        checks.push(Check { name: name.to_string(), passed, detail });
    };
    let domain = &bundle.domain;
    let manifest = &bundle.manifest;

    // Operator inventory: expected count, one operator per action schema,
    // pairwise-distinct effect signatures.
    let n_ops = domain.operators.len();
    push(
        "operator-count",
        n_ops == manifest.expect.operators,
        format!("{n_ops} operators (expected {})", manifest.expect.operators),
    );
    let mut per_schema = vec![0usize; domain.actions.len()];
    for op in &domain.operators {
        per_schema[op.action.idx()] += 1;
    }
    let orphans: Vec<&str> = (0..domain.actions.len())
        .filter(|i| per_schema[*i] != 1)
        .map(|i| domain.actions.names[i].as_str())
        .collect();
    push(
        "one-operator-per-schema",
        orphans.is_empty(),
        if orphans.is_empty() {
            "every action schema has exactly one operator".to_string()
        } else {
            format!("schemas without exactly one operator: {orphans:?}")
        },
    );
    let mut signatures = BTreeSet::new();
    let distinct = domain
        .operators
        .iter()
        .all(|op| signatures.insert(explore::target::signature(domain, op)));
    push(
        "distinct-effect-signatures",
        distinct,
        format!("{} distinct signatures over {n_ops} operators", signatures.len()),
    );

    // Size statistics over every task in the bundle.
    let all_tasks: Vec<(&str, &Arc<Task>)> = bundle
        .train
        .iter()
        .map(|t| ("train", t))
        .chain(bundle.test.iter().map(|t| ("test", t)))
        .collect();
    let mut max_actions = 0usize;
    for (_, task) in &all_tasks {
        max_actions = max_actions.max(enumerate_ground_actions(domain, task).len());
    }
    push(
        "max-ground-actions",
        max_actions == manifest.expect.max_ground_actions,
        format!(
            "max {max_actions} ground actions over {} tasks (expected {})",
            all_tasks.len(),
            manifest.expect.max_ground_actions
        ),
    );
    for (entry, task) in manifest.test.iter().zip(&bundle.test) {
        if let Some(expected) = entry.ground_actions {
            let n = enumerate_ground_actions(domain, task).len();
            push(
                "task-ground-actions",
                n == expected,
                format!("{}: {n} ground actions (expected {expected})", task.name),
            );
        }
    }
    if let Some([lo, hi]) = manifest.expect.train_atoms {
        for task in &bundle.train {
            let n = ground_atom_count(domain, task);
            push(
                "train-ground-atoms",
                (lo..=hi).contains(&n),
                format!("{}: {n} ground atoms (expected {lo}..={hi})", task.name),
            );
        }
    }

    // Ground-truth solvability of every test task, within the horizon. The
    // found plans also tell us which operators the test suite exercises.
    let heuristic = match bundle.heuristic() {
        Ok(h) => h,
        Err(e) => {
            push("heuristic", false, e.to_string());
            return Report { bundle: manifest.name.clone(), checks };
        }
    };
    let budget = validation_budget(manifest.horizon);
    let mut exercised: BTreeSet<u16> = BTreeSet::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for (entry, task) in manifest.test.iter().zip(&bundle.test) {
        let model = GroundModel::build(domain, &domain.operators, task);
        let outcome = plan(&model, &task.init, &task.goal, heuristic, budget, &mut rng);
        let Some(found) = outcome.plan() else {
            push(
                "test-task-solvable",
                false,
                format!(
                    "{}: ground truth found no plan within {} steps ({:?})",
                    task.name, manifest.horizon, outcome
                ),
            );
            continue;
        };
        push(
            "test-task-solvable",
            true,
            format!("{}: plan of length {}", task.name, found.len()),
        );
        for ga in &found.actions {
            exercised.insert(ga.schema().0);
        }
        if let Some(min_len) = entry.min_plan_len {
            push(
                "long-task-plan-length",
                found.len() >= min_len,
                format!("{}: plan length {} (expected >= {min_len})", task.name, found.len()),
            );
        }
        if entry.kind == TestKind::PerOperator {
            let op_name = entry.operator.as_deref().unwrap_or_default();
            let Some(schema) = domain.actions.id(op_name) else {
                push(
                    "per-operator-known",
                    false,
                    format!("{}: no operator named {op_name:?}", task.name),
                );
                continue;
            };
            let contains = found.actions.iter().any(|ga| ga.schema() == schema);
            push(
                "per-operator-used",
                contains,
                format!("{}: plan {} {op_name}", task.name, if contains { "uses" } else { "MISSES" }),
            );
            // Necessity: with the designated operator removed, the task must
            // become unsolvable — this is what makes per-operator tasks
            // diagnostic of that operator.
            let reduced: Vec<_> = domain
                .operators
                .iter()
                .filter(|op| op.action != schema)
                .cloned()
                .collect();
            let reduced_model = GroundModel::build(domain, &reduced, task);
            let still = plan(&reduced_model, &task.init, &task.goal, heuristic, budget, &mut rng);
            let necessary = still.plan().is_none();
            push(
                "per-operator-necessary",
                necessary,
                if necessary {
                    format!("{}: unsolvable without {op_name}", task.name)
                } else {
                    format!("{}: still solvable without {op_name}", task.name)
                },
            );
        }
    }
    let unexercised: Vec<&str> = (0..domain.actions.len())
        .filter(|i| !exercised.contains(&(*i as u16)))
        .map(|i| domain.actions.names[i].as_str())
        .collect();
    push(
        "all-operators-exercised",
        unexercised.is_empty(),
        if unexercised.is_empty() {
            "every operator appears in some test plan".to_string()
        } else {
            format!("never used by any test plan: {unexercised:?}")
        },
    );

    Report { bundle: manifest.name.clone(), checks }
}

struct BuiltinBundle {
    name: &'static str,
    manifest: &'static str,
    files: &'static [(&'static str, &'static str)],
}

macro_rules! bundle_file {
    ($dir:literal, $rel:literal) => {
        ($rel, include_str!(concat!("../bundles/", $dir, "/", $rel)))
    };
}

static BUILTIN: &[BuiltinBundle] = &[
    BuiltinBundle {
        name: "gripper",
        manifest: include_str!("../bundles/gripper/bundle.toml"),
        files: &[
            bundle_file!("gripper", "domain.pddl"),
            bundle_file!("gripper", "train/train-a.pddl"),
            bundle_file!("gripper", "train/train-b.pddl"),
            bundle_file!("gripper", "test/go-to-b.pddl"),
            bundle_file!("gripper", "test/ball-to-b.pddl"),
            bundle_file!("gripper", "test/both-balls.pddl"),
            bundle_file!("gripper", "test/swap-balls.pddl"),
        ],
    },
    BuiltinBundle {
        name: "blocksworld",
        manifest: include_str!("../bundles/blocksworld/bundle.toml"),
        files: &[
            bundle_file!("blocksworld", "domain.pddl"),
            bundle_file!("blocksworld", "train/train-a.pddl"),
            bundle_file!("blocksworld", "train/train-b.pddl"),
            bundle_file!("blocksworld", "test/stack-pair.pddl"),
            bundle_file!("blocksworld", "test/build-tower.pddl"),
            bundle_file!("blocksworld", "test/invert-tower.pddl"),
            bundle_file!("blocksworld", "test/rebuild-four.pddl"),
        ],
    },
    BuiltinBundle {
        name: "baking",
        manifest: include_str!("../bundles/baking/bundle.toml"),
        files: &[
            bundle_file!("baking", "domain.pddl"),
            bundle_file!("baking", "train/train-a.pddl"),
            bundle_file!("baking", "test/one-cake.pddl"),
            bundle_file!("baking", "test/two-cake.pddl"),
            bundle_file!("baking", "test/batter-only.pddl"),
        ],
    },
    BuiltinBundle {
        name: "baking-large",
        manifest: include_str!("../bundles/baking-large/bundle.toml"),
        files: &[
            bundle_file!("baking-large", "domain.pddl"),
            bundle_file!("baking-large", "train/train-a.pddl"),
            bundle_file!("baking-large", "train/train-b.pddl"),
            bundle_file!("baking-large", "test/two-souffle.pddl"),
            bundle_file!("baking-large", "test/two-cake.pddl"),
            bundle_file!("baking-large", "test/cake-and-souffle.pddl"),
            bundle_file!("baking-large", "test/op-fetch-egg.pddl"),
            bundle_file!("baking-large", "test/op-fetch-flour.pddl"),
            bundle_file!("baking-large", "test/op-fetch-butter.pddl"),
            bundle_file!("baking-large", "test/op-crack-egg.pddl"),
            bundle_file!("baking-large", "test/op-sift-flour.pddl"),
            bundle_file!("baking-large", "test/op-soften-butter.pddl"),
            bundle_file!("baking-large", "test/op-add-egg.pddl"),
            bundle_file!("baking-large", "test/op-add-flour.pddl"),
            bundle_file!("baking-large", "test/op-mix-cake-batter.pddl"),
            bundle_file!("baking-large", "test/op-grease-pan.pddl"),
            bundle_file!("baking-large", "test/op-pour-cake-batter.pddl"),
            bundle_file!("baking-large", "test/op-preheat-oven.pddl"),
            bundle_file!("baking-large", "test/op-bake-cake.pddl"),
            bundle_file!("baking-large", "test/op-separate-egg.pddl"),
            bundle_file!("baking-large", "test/op-whisk-whites.pddl"),
            bundle_file!("baking-large", "test/op-fold-souffle-mix.pddl"),
            bundle_file!("baking-large", "test/op-cook-souffle-base.pddl"),
            bundle_file!("baking-large", "test/op-pour-souffle-base.pddl"),
            bundle_file!("baking-large", "test/op-bake-souffle.pddl"),
        ],
    },
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_builtin_bundles_parse() {
        for name in Bundle::builtin_names() {
            let bundle = Bundle::builtin(name).unwrap();
            assert_eq!(bundle.manifest.name, name);
            assert_eq!(
                bundle.domain.operators.len(),
                bundle.manifest.expect.operators,
                "{name}: operator count"
            );
            assert!(!bundle.train.is_empty() && !bundle.test.is_empty());
            bundle.heuristic().unwrap();
        }
    }

    #[test]
    fn unknown_builtin_is_an_error() {
        assert!(Bundle::builtin("no-such-bundle").is_err());
    }

    #[test]
    fn baking_large_two_souffle_has_exactly_2523_ground_actions() {
        let bundle = Bundle::builtin("baking-large").unwrap();
        let two_souffle = bundle
            .test
            .iter()
            .find(|t| t.name.contains("two-souffle"))
            .expect("two-souffle task");
        let n = enumerate_ground_actions(&bundle.domain, two_souffle).len();
        assert_eq!(n, 2523);
    }

    #[test]
    fn baking_large_training_atom_counts_sit_in_the_band() {
        let bundle = Bundle::builtin("baking-large").unwrap();
        for task in &bundle.train {
            let n = ground_atom_count(&bundle.domain, task);
            assert!((1400..=1800).contains(&n), "{}: {n} atoms", task.name);
        }
    }

    #[test]
    fn gripper_bundle_validates_clean() {
        let bundle = Bundle::builtin("gripper").unwrap();
        let report = validate_bundle(&bundle);
        assert!(report.ok(), "\n{}", report.render());
    }

    #[test]
    fn validation_notices_a_wrong_expectation() {
        let mut bundle = Bundle::builtin("gripper").unwrap();
        bundle.manifest.expect.operators = 4;
        let report = validate_bundle(&bundle);
        assert!(!report.ok());
        assert!(report.render().contains("FAIL"));
    }

    #[test]
    fn blocksworld_and_baking_validate_clean() {
        for name in ["blocksworld", "baking"] {
            let bundle = Bundle::builtin(name).unwrap();
            let report = validate_bundle(&bundle);
            assert!(report.ok(), "{name}:\n{}", report.render());
        }
    }

    /// Plans all 22 baking-large test tasks under the ground truth.
    #[test]
    fn baking_large_bundle_validates_clean() {
        let bundle = Bundle::builtin("baking-large").unwrap();
        let report = validate_bundle(&bundle);
        assert!(report.ok(), "\n{}", report.render());
    }
}
