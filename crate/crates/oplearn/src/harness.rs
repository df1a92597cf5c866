//! Experiment orchestration: configuration, the explore/learn/evaluate
//! loop, artifact output, and cross-seed aggregation.
//!
//! A run is fully determined by its configuration file and seed: collections
//! iterate in sorted order, all randomness flows through one seeded
//! generator per concern, and no artifact contains a timestamp, so repeating
//! a run reproduces `curve.csv` and `trace.log` byte for byte.
//!
//! Budget accounting: every simulator step costs 1, including injected
//! demonstrations. Demo-seeded methods therefore pay `|demos|` steps up
//! front and their first curve point sits at that x instead of 0.
//! Evaluation never touches the simulator — plans are executed against a
//! separately built ground-truth model — so measuring success consumes no
//! budget and adds nothing to the experience log.
//!
//! Evaluation happens at fixed grid points (multiples of the eval interval
//! plus the post-demo origin), checked at episode boundaries: the first
//! relearn at or past a grid point supplies that point's model. Once a
//! policy declares convergence the run stops acting and the remaining grid
//! points are filled with the frozen final model, keeping curves from
//! different runs on the same grid.

use crate::domains::Bundle;
use crate::explore::bfs::OracleBfs;
use crate::explore::demos::generate_demos;
use crate::explore::glib::{GlibL2, DEFAULT_BABBLE_ATTEMPTS};
use crate::explore::target::{total_dissonance, Targeting};
use crate::explore::{Ctx, Decision, Policy, Random};
use crate::learn::{learn, LiftCache};
use crate::model::{GroundModel, OperatorSet};
use crate::pddl;
use crate::plan::{plan, Heuristic, PlanOutcome, SearchBudget};
use crate::rel::{Domain, Operator, Task};
use crate::sim::Simulator;
use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Default planner budget for exploration-time and evaluation-time search.
pub const DEFAULT_MAX_EXPANSIONS: u64 = 50_000;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Exploration method. String forms are the snake_case names used in
/// config files and artifact manifests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Random,
    GlibL2,
    OracleBfs,
    GlibL2Demos,
    OracleBfsDemos,
    OraclePtDemos,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Random,
        Method::GlibL2,
        Method::OracleBfs,
        Method::GlibL2Demos,
        Method::OracleBfsDemos,
        Method::OraclePtDemos,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::GlibL2 => "glib_l2",
            Method::OracleBfs => "oracle_bfs",
            Method::GlibL2Demos => "glib_l2_demos",
            Method::OracleBfsDemos => "oracle_bfs_demos",
            Method::OraclePtDemos => "oracle_pt_demos",
        }
    }

    /// Whether the run opens with oracle demonstrations of every operator.
    pub fn uses_demos(self) -> bool {
        matches!(self, Method::GlibL2Demos | Method::OracleBfsDemos | Method::OraclePtDemos)
    }

    fn build_policy(self, domain: &Domain, babble_attempts: usize) -> Box<dyn Policy> {
        match self {
            Method::Random => Box::new(Random),
            Method::GlibL2 | Method::GlibL2Demos => Box::new(GlibL2::new(domain, babble_attempts)),
            Method::OracleBfs | Method::OracleBfsDemos => Box::new(OracleBfs),
            Method::OraclePtDemos => Box::new(Targeting::default()),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .with_context(|| format!("unknown method '{s}'"))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

/// One experiment = (bundle, method, seed) plus optional overrides of the
/// bundle's defaults. Parsed from TOML; unknown keys are rejected so typos
/// fail loudly instead of silently running defaults.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub bundle: String,
    pub method: Method,
    pub seed: u64,
    /// Directory the run writes its artifacts into (created if absent).
    pub out_dir: PathBuf,
    /// Interaction budget in simulator steps; bundle default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    /// Evaluation cadence in steps; bundle default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_interval: Option<u64>,
    /// Episode horizon and evaluation plan-length bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    /// Goal-babbling attempts per decision (GLIB only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub babble_attempts: Option<usize>,
    /// Planner expansion budget for exploration and evaluation search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_expansions: Option<u64>,
}

impl ExperimentConfig {
    pub fn new(bundle: &str, method: Method, seed: u64, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            bundle: bundle.to_string(),
            method,
            seed,
            out_dir: out_dir.into(),
            steps: None,
            eval_interval: None,
            horizon: None,
            babble_attempts: None,
            max_expansions: None,
        }
    }

    pub fn from_toml(src: &str) -> Result<ExperimentConfig> {
        toml::from_str(src).context("invalid experiment config")
    }
}

/// Config with the bundle's defaults filled in.
#[derive(Clone, Copy, Debug)]
struct Resolved {
    steps: u64,
    eval_interval: u64,
    horizon: usize,
    babble_attempts: usize,
    max_expansions: u64,
    heuristic: Heuristic,
}

impl Resolved {
    fn new(cfg: &ExperimentConfig, bundle: &Bundle) -> Result<Resolved> {
        let r = Resolved {
            steps: cfg.steps.unwrap_or(bundle.manifest.defaults.steps),
            eval_interval: cfg.eval_interval.unwrap_or(bundle.manifest.defaults.eval_interval),
            horizon: cfg.horizon.unwrap_or(bundle.manifest.horizon),
            babble_attempts: cfg.babble_attempts.unwrap_or(DEFAULT_BABBLE_ATTEMPTS),
            max_expansions: cfg.max_expansions.unwrap_or(DEFAULT_MAX_EXPANSIONS),
            heuristic: bundle.heuristic()?,
        };
        if r.steps == 0 || r.eval_interval == 0 || r.horizon == 0 {
            bail!("steps, eval_interval, and horizon must be positive");
        }
        Ok(r)
    }

    fn plan_budget(&self) -> SearchBudget {
        SearchBudget { max_expansions: self.max_expansions, max_len: self.horizon, wall_clock: None }
    }
}

/// The x coordinates success is measured at: the post-demo origin (0 for
/// demo-free methods), every interval multiple above it up to the budget,
/// and the budget itself. Runs of the same (bundle, method, interval,
/// budget) share this grid regardless of where their episodes end.
fn eval_grid(demo_steps: u64, interval: u64, budget: u64) -> Vec<u64> {
    let mut grid = vec![demo_steps];
    let mut x = interval;
    while x <= budget {
        if x > demo_steps {
            grid.push(x);
        }
        x += interval;
    }
    if *grid.last().unwrap() < budget {
        grid.push(budget);
    }
    grid
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct EvalResult {
    /// Fraction of test tasks solved, in [0, 1].
    pub success_rate: f64,
    /// Per-task outcome, in bundle test-task order.
    pub outcomes: Vec<bool>,
}

/// Plans the bundle's test tasks with a candidate operator set and executes
/// each plan under the ground truth. Results are cached by the canonical
/// serialization of the operator set, so re-evaluating an unchanged model
/// (common near convergence) costs one string render.
pub struct Evaluator<'a> {
    domain: &'a Domain,
    tasks: &'a [Arc<Task>],
    truth: Vec<GroundModel>,
    heuristic: Heuristic,
    budget: SearchBudget,
    seed: u64,
    cache: HashMap<String, EvalResult>,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        domain: &'a Domain,
        tasks: &'a [Arc<Task>],
        heuristic: Heuristic,
        budget: SearchBudget,
        seed: u64,
    ) -> Evaluator<'a> {
        let truth = tasks.iter().map(|t| GroundModel::build(domain, &domain.operators, t)).collect();
        Evaluator { domain, tasks, truth, heuristic, budget, seed, cache: HashMap::new() }
    }

    /// Success = the learned-model plan, run open-loop under the ground
    /// truth, reaches the goal within the plan-length bound. Planning
    /// failures of any kind count as task failures.
    pub fn evaluate(&mut self, ops: &[Operator]) -> EvalResult {
        let key = pddl::serialize_operator_set(self.domain, "eval", ops);
        if let Some(hit) = self.cache.get(&key) {
            return hit.clone();
        }
        let mut outcomes = Vec::with_capacity(self.tasks.len());
        for (i, task) in self.tasks.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let model = GroundModel::build(self.domain, ops, task);
            let ok = match plan(&model, &task.init, &task.goal, self.heuristic, self.budget, &mut rng)
            {
                PlanOutcome::Found(p) => {
                    let mut state = task.init.clone();
                    for &ga in &p.actions {
                        state = self.truth[i].next_state(&state, ga);
                    }
                    state.satisfies(&task.goal)
                }
                _ => false,
            };
            outcomes.push(ok);
        }
        let wins = outcomes.iter().filter(|&&b| b).count();
        let result =
            EvalResult { success_rate: wins as f64 / outcomes.len().max(1) as f64, outcomes };
        self.cache.insert(key, result.clone());
        result
    }
}

// ---------------------------------------------------------------------------
// Running one experiment
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct CurvePoint {
    /// Grid x: cumulative simulator steps charged when the point was due.
    pub steps: u64,
    pub success_rate: f64,
    /// Total precondition dissonance of the operator set evaluated here.
    pub dissonance_total: u64,
    pub outcomes: Vec<bool>,
}

/// Everything a finished run produced, mirrored on disk in `out_dir`.
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub curve: Vec<CurvePoint>,
    /// Dissonance after every learning update, in update order. The curve
    /// samples this at grid points; this is the full per-update series.
    pub dissonance_updates: Vec<u64>,
    pub converged_at: Option<u64>,
    pub episodes: u64,
    pub demo_steps: u64,
    pub final_ops: OperatorSet,
}

impl RunArtifacts {
    pub fn final_success_rate(&self) -> f64 {
        self.curve.last().map(|p| p.success_rate).unwrap_or(0.0)
    }
}

/// Manifest written alongside the curve so a run directory is
/// self-describing and re-runnable. Field order is struct order.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub bundle: String,
    pub method: Method,
    pub seed: u64,
    pub steps: u64,
    pub eval_interval: u64,
    pub horizon: usize,
    pub babble_attempts: usize,
    pub max_expansions: u64,
    pub heuristic: String,
    pub version: String,
    pub demo_steps: u64,
    pub episodes: u64,
    pub converged_at: Option<u64>,
    pub final_success_rate: f64,
}

/// Run one experiment to completion and write its artifacts: `curve.csv`,
/// `trace.log`, `operators.pddl`, and `manifest.toml` under `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let bundle = Bundle::resolve(&cfg.bundle)?;
    let r = Resolved::new(cfg, &bundle)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sim = Simulator::new(bundle.domain.clone(), bundle.train.clone())?;
    let mut policy = cfg.method.build_policy(&sim.domain, r.babble_attempts);
    let mut evaluator =
        Evaluator::new(&bundle.domain, &bundle.test, r.heuristic, r.plan_budget(), cfg.seed);
    let mut cache = LiftCache::default();
    let mut trace = String::new();
    let _ = writeln!(
        trace,
        "run bundle={} method={} seed={} steps={} eval_interval={} horizon={}",
        cfg.bundle, cfg.method, cfg.seed, r.steps, r.eval_interval, r.horizon
    );

    if cfg.method.uses_demos() {
        let demos = generate_demos(&sim, r.heuristic, r.plan_budget(), &mut rng)
            .context("demonstration generation failed")?;
        for tr in demos {
            let line = format!(
                "demo task={} action={}",
                sim.tasks[tr.task_idx].name,
                sim.domain.render_action(&sim.tasks[tr.task_idx].objects, tr.action)
            );
            trace.push_str(&line);
            trace.push('\n');
            sim.inject_demo(tr);
        }
    }
    let demo_steps = sim.steps;

    let mut learned = learn(&sim.domain, &sim.tasks, &sim.log, &mut cache);
    let mut dissonance = total_dissonance(&sim.domain, &learned);
    let mut dissonance_updates = vec![dissonance];
    let _ = writeln!(trace, "learn steps={} dissonance={}", sim.steps, dissonance);

    let grid = eval_grid(demo_steps, r.eval_interval, r.steps);
    let mut curve: Vec<CurvePoint> = Vec::with_capacity(grid.len());
    let mut next_point = 0usize;
    let mut record_due = |trace: &mut String,
                          evaluator: &mut Evaluator,
                          learned: &OperatorSet,
                          dissonance: u64,
                          charged: u64,
                          force_all: bool| {
        while next_point < grid.len() && (force_all || grid[next_point] <= charged) {
            let x = grid[next_point];
            let res = evaluator.evaluate(&learned.ops);
            let _ = writeln!(
                trace,
                "eval steps={x} success_rate={:.6} dissonance={dissonance}",
                res.success_rate
            );
            curve.push(CurvePoint {
                steps: x,
                success_rate: res.success_rate,
                dissonance_total: dissonance,
                outcomes: res.outcomes,
            });
            next_point += 1;
        }
    };
    record_due(&mut trace, &mut evaluator, &learned, dissonance, sim.steps, false);

    let mut converged_at = None;
    let mut episodes = 0u64;
    let mut same_task = false;
    'run: while sim.steps < r.steps {
        if same_task {
            let i = sim.current_task_idx();
            sim.reset(i);
        } else {
            sim.rotate(&mut rng);
        }
        same_task = false;
        episodes += 1;
        let task_idx = sim.current_task_idx();
        let _ = writeln!(trace, "episode={episodes} task={}", sim.tasks[task_idx].name);
        let learned_model = GroundModel::build(&sim.domain, &learned.ops, &sim.tasks[task_idx]);
        let mut steps_in_episode = 0usize;
        {
            let state = sim.state().clone();
            let mut ctx = Ctx {
                domain: &sim.domain,
                tasks: &sim.tasks,
                task_idx,
                state: &state,
                learned: &learned,
                learned_model: &learned_model,
                truth_model: sim.truth_model(task_idx),
                heuristic: r.heuristic,
                plan_budget: r.plan_budget(),
                horizon: r.horizon,
                steps_in_episode,
                rng: &mut rng,
            };
            policy.begin_episode(&mut ctx);
        }
        while steps_in_episode < r.horizon && sim.steps < r.steps {
            let state = sim.state().clone();
            let decision = {
                let mut ctx = Ctx {
                    domain: &sim.domain,
                    tasks: &sim.tasks,
                    task_idx,
                    state: &state,
                    learned: &learned,
                    learned_model: &learned_model,
                    truth_model: sim.truth_model(task_idx),
                    heuristic: r.heuristic,
                    plan_budget: r.plan_budget(),
                    horizon: r.horizon,
                    steps_in_episode,
                    rng: &mut rng,
                };
                policy.decide(&mut ctx)
            };
            match decision {
                Decision::Act { action, note } => {
                    let rendered =
                        sim.domain.render_action(&sim.tasks[task_idx].objects, action);
                    let tr = sim.step(action);
                    policy.observe(tr);
                    let changed = tr.changed;
                    let _ = writeln!(
                        trace,
                        "step={} note={note} action={rendered} changed={changed}",
                        sim.steps
                    );
                    steps_in_episode += 1;
                }
                Decision::EndEpisode { same_task: st } => {
                    same_task = st;
                    break;
                }
                Decision::Converged => {
                    converged_at = Some(sim.steps);
                    let _ = writeln!(trace, "converged steps={}", sim.steps);
                    break 'run;
                }
            }
        }
        learned = learn(&sim.domain, &sim.tasks, &sim.log, &mut cache);
        dissonance = total_dissonance(&sim.domain, &learned);
        dissonance_updates.push(dissonance);
        let _ = writeln!(trace, "learn steps={} dissonance={}", sim.steps, dissonance);
        record_due(&mut trace, &mut evaluator, &learned, dissonance, sim.steps, false);
    }

    if converged_at.is_some() {
        // Convergence is recognized mid-episode; fold the final experience
        // in before freezing the model for the remaining grid points.
        learned = learn(&sim.domain, &sim.tasks, &sim.log, &mut cache);
        dissonance = total_dissonance(&sim.domain, &learned);
        dissonance_updates.push(dissonance);
        let _ = writeln!(trace, "learn steps={} dissonance={}", sim.steps, dissonance);
    }
    // Grid points never reached (early convergence, or a budget smaller
    // than the demo cost) are filled with the frozen final model.
    record_due(&mut trace, &mut evaluator, &learned, dissonance, sim.steps, true);
    let _ = writeln!(trace, "end steps={} episodes={episodes}", sim.steps);

    let artifacts = RunArtifacts {
        out_dir: cfg.out_dir.clone(),
        curve,
        dissonance_updates,
        converged_at,
        episodes,
        demo_steps,
        final_ops: learned,
    };
    write_artifacts(cfg, &r, &bundle, &artifacts, &trace)?;
    Ok(artifacts)
}

fn write_artifacts(
    cfg: &ExperimentConfig,
    r: &Resolved,
    bundle: &Bundle,
    artifacts: &RunArtifacts,
    trace: &str,
) -> Result<()> {
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;

    let mut curve = String::from("steps,success_rate,dissonance_total\n");
    for p in &artifacts.curve {
        let _ = writeln!(curve, "{},{:.6},{}", p.steps, p.success_rate, p.dissonance_total);
    }
    fs::write(dir.join("curve.csv"), curve)?;
    fs::write(dir.join("trace.log"), trace)?;

    let name = format!("{}-learned", bundle.manifest.name);
    let ops = pddl::serialize_operator_set(&bundle.domain, &name, &artifacts.final_ops.ops);
    fs::write(dir.join("operators.pddl"), ops)?;

    let manifest = RunManifest {
        bundle: cfg.bundle.clone(),
        method: cfg.method,
        seed: cfg.seed,
        steps: r.steps,
        eval_interval: r.eval_interval,
        horizon: r.horizon,
        babble_attempts: r.babble_attempts,
        max_expansions: r.max_expansions,
        heuristic: bundle.manifest.heuristic.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        demo_steps: artifacts.demo_steps,
        episodes: artifacts.episodes,
        converged_at: artifacts.converged_at,
        final_success_rate: artifacts.final_success_rate(),
    };
    fs::write(dir.join("manifest.toml"), toml::to_string(&manifest)?)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct SeriesPoint {
    pub steps: u64,
    pub mean: f64,
    /// Standard error of the mean across seeds; 0 when only one run
    /// contributed (see [`Series::single_run`]).
    pub se: f64,
}

/// Mean curve for one (bundle, method) group.
#[derive(Clone, Debug)]
pub struct Series {
    pub bundle: String,
    pub method: Method,
    pub seeds: Vec<u64>,
    pub points: Vec<SeriesPoint>,
    /// Set when the group held a single run: SE is then undefined and
    /// reported as 0.
    pub single_run: bool,
}

fn read_curve(dir: &Path) -> Result<Vec<(u64, f64)>> {
    let path = dir.join("curve.csv");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let (steps, rate) = cols
            .next()
            .zip(cols.next())
            .with_context(|| format!("{}:{}: short row", path.display(), i + 1))?;
        out.push((steps.trim().parse()?, rate.trim().parse()?));
    }
    if out.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(out)
}

/// Aggregate finished run directories into per-(bundle, method) mean ± SE
/// curves. All runs of a group must share the same evaluation grid;
/// mismatched grids are a hard error because averaging across different x
/// coordinates silently produces nonsense.
pub fn aggregate(run_dirs: &[PathBuf], out_dir: &Path) -> Result<Vec<Series>> {
    if run_dirs.is_empty() {
        bail!("no run directories given");
    }
    let mut groups: BTreeMap<(String, Method), Vec<(u64, Vec<(u64, f64)>)>> = BTreeMap::new();
    for dir in run_dirs {
        let mpath = dir.join("manifest.toml");
        let mtext =
            fs::read_to_string(&mpath).with_context(|| format!("reading {}", mpath.display()))?;
        let manifest: RunManifest =
            toml::from_str(&mtext).with_context(|| format!("parsing {}", mpath.display()))?;
        let curve = read_curve(dir)?;
        groups
            .entry((manifest.bundle.clone(), manifest.method))
            .or_default()
            .push((manifest.seed, curve));
    }

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut series_out = Vec::new();
    let mut summary = String::from("bundle,method,runs,final_mean,final_se,single_run\n");
    for ((bundle, method), mut runs) in groups {
        runs.sort_by_key(|(seed, _)| *seed);
        let grid: Vec<u64> = runs[0].1.iter().map(|&(x, _)| x).collect();
        for (seed, curve) in &runs {
            let this: Vec<u64> = curve.iter().map(|&(x, _)| x).collect();
            if this != grid {
                bail!(
                    "{bundle}/{method} seed {seed}: evaluation grid {this:?} \
                     does not match the group's grid {grid:?}"
                );
            }
        }
        let n = runs.len();
        let points: Vec<SeriesPoint> = (0..grid.len())
            .map(|i| {
                let vals: Vec<f64> = runs.iter().map(|(_, c)| c[i].1).collect();
                let mean = vals.iter().sum::<f64>() / n as f64;
                let se = if n < 2 {
                    0.0
                } else {
                    let var =
                        vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
                    (var / n as f64).sqrt()
                };
                SeriesPoint { steps: grid[i], mean, se }
            })
            .collect();

        let mut csv = String::from("steps,mean_success,se_success,runs\n");
        for p in &points {
            let _ = writeln!(csv, "{},{:.6},{:.6},{n}", p.steps, p.mean, p.se);
        }
        fs::write(out_dir.join(format!("{bundle}-{method}.csv")), csv)?;
        let last = points.last().expect("curves are non-empty");
        let _ = writeln!(
            summary,
            "{bundle},{method},{n},{:.6},{:.6},{}",
            last.mean,
            last.se,
            n == 1
        );
        series_out.push(Series {
            bundle,
            method,
            seeds: runs.iter().map(|(s, _)| *s).collect(),
            points,
            single_run: n == 1,
        });
    }
    fs::write(out_dir.join("summary.csv"), summary)?;
    Ok(series_out)
}

// ---------------------------------------------------------------------------
// Stand-alone evaluation of a serialized operator set
// ---------------------------------------------------------------------------

/// Evaluate an `operators.pddl` document (as written by a run) against a
/// bundle's test tasks. Returns the result plus per-task names for display.
pub fn evaluate_file(path: &Path, bundle: &Bundle, seed: u64) -> Result<(EvalResult, Vec<String>)> {
    let src =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = pddl::parse_domain(&path.display().to_string(), &src)?;
    let ops = pddl::align_operators(&bundle.domain, &parsed)
        .context("operator set does not fit the bundle's vocabulary")?;
    let budget = SearchBudget {
        max_expansions: DEFAULT_MAX_EXPANSIONS,
        max_len: bundle.manifest.horizon,
        wall_clock: None,
    };
    let mut evaluator =
        Evaluator::new(&bundle.domain, &bundle.test, bundle.heuristic()?, budget, seed);
    let result = evaluator.evaluate(&ops);
    let names = bundle.test.iter().map(|t| t.name.clone()).collect();
    Ok((result, names))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_grid_covers_origin_interval_and_budget() {
        assert_eq!(eval_grid(0, 25, 100), vec![0, 25, 50, 75, 100]);
        // Demo origin displaces the multiples it passes.
        assert_eq!(eval_grid(30, 25, 100), vec![30, 50, 75, 100]);
        assert_eq!(eval_grid(25, 25, 100), vec![25, 50, 75, 100]);
        // A budget off the interval lattice still gets a final point.
        assert_eq!(eval_grid(0, 40, 100), vec![0, 40, 80, 100]);
        // Demo cost beyond the budget: single padded point.
        assert_eq!(eval_grid(19, 50, 10), vec![19]);
    }

    #[test]
    fn method_ids_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.id().parse::<Method>().unwrap(), m);
            let cfg = format!(
                "bundle = \"gripper\"\nmethod = \"{}\"\nseed = 3\nout_dir = \"x\"",
                m.id()
            );
            let parsed = ExperimentConfig::from_toml(&cfg).unwrap();
            assert_eq!(parsed.method, m);
        }
        assert!("glibl2".parse::<Method>().is_err());
    }

    #[test]
    fn config_rejects_unknown_keys_and_fills_defaults() {
        let err = ExperimentConfig::from_toml(
            "bundle = \"gripper\"\nmethod = \"random\"\nseed = 0\nout_dir = \"x\"\nstepz = 3",
        )
        .unwrap_err();
        assert!(format!("{err:#}").contains("stepz"), "got: {err:#}");

        let cfg = ExperimentConfig::from_toml(
            "bundle = \"gripper\"\nmethod = \"random\"\nseed = 0\nout_dir = \"x\"\nsteps = 60",
        )
        .unwrap();
        assert_eq!(cfg.steps, Some(60));
        assert_eq!(cfg.eval_interval, None);
        let bundle = Bundle::builtin("gripper").unwrap();
        let r = Resolved::new(&cfg, &bundle).unwrap();
        assert_eq!(r.steps, 60);
        assert_eq!(r.eval_interval, bundle.manifest.defaults.eval_interval);
        assert_eq!(r.horizon, bundle.manifest.horizon);
    }

    #[test]
    fn runs_are_reproducible_byte_for_byte() {
        let tmp = tempfile::tempdir().unwrap();
        let mut artifacts = Vec::new();
        for name in ["a", "b"] {
            let mut cfg =
                ExperimentConfig::new("gripper", Method::Random, 7, tmp.path().join(name));
            cfg.steps = Some(60);
            cfg.eval_interval = Some(30);
            artifacts.push(run_experiment(&cfg).unwrap());
        }
        for file in ["curve.csv", "trace.log", "operators.pddl"] {
            let a = fs::read(tmp.path().join("a").join(file)).unwrap();
            let b = fs::read(tmp.path().join("b").join(file)).unwrap();
            assert_eq!(a, b, "{file} differs between identical runs");
        }
        // Manifests differ only in out_dir-independent fields, i.e. not at all.
        let a = fs::read(tmp.path().join("a/manifest.toml")).unwrap();
        let b = fs::read(tmp.path().join("b/manifest.toml")).unwrap();
        assert_eq!(a, b);

        let run = &artifacts[0];
        assert_eq!(run.curve.len(), 3, "grid 0/30/60");
        assert_eq!(run.curve[0].steps, 0);
        assert_eq!(run.curve.last().unwrap().steps, 60);
        assert_eq!(run.demo_steps, 0);
    }

    #[test]
    fn demo_methods_pay_for_demos_and_start_learned() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg =
            ExperimentConfig::new("gripper", Method::OracleBfsDemos, 1, tmp.path().join("run"));
        cfg.steps = Some(40);
        cfg.eval_interval = Some(20);
        let run = run_experiment(&cfg).unwrap();
        assert_eq!(run.demo_steps, 3, "one demo per gripper operator");
        assert_eq!(run.curve[0].steps, 3, "first point sits at the demo cost");
        let trace = fs::read_to_string(tmp.path().join("run/trace.log")).unwrap();
        assert_eq!(trace.matches("\ndemo ").count() + usize::from(trace.starts_with("demo ")), 3);
    }

    #[test]
    fn evaluate_file_round_trips_run_output() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg =
            ExperimentConfig::new("gripper", Method::OraclePtDemos, 0, tmp.path().join("run"));
        cfg.steps = Some(200);
        cfg.eval_interval = Some(100);
        let run = run_experiment(&cfg).unwrap();
        let bundle = Bundle::builtin("gripper").unwrap();
        let (res, names) =
            evaluate_file(&tmp.path().join("run/operators.pddl"), &bundle, 0).unwrap();
        assert_eq!(names.len(), bundle.test.len());
        assert_eq!(res.success_rate, run.final_success_rate());
    }

    #[test]
    fn aggregate_means_and_flags_single_runs() {
        let tmp = tempfile::tempdir().unwrap();
        let mut dirs = Vec::new();
        for seed in [0, 1] {
            let dir = tmp.path().join(format!("s{seed}"));
            let mut cfg = ExperimentConfig::new("gripper", Method::Random, seed, &dir);
            cfg.steps = Some(50);
            cfg.eval_interval = Some(25);
            run_experiment(&cfg).unwrap();
            dirs.push(dir);
        }
        let out = tmp.path().join("agg");
        let series = aggregate(&dirs, &out).unwrap();
        assert_eq!(series.len(), 1);
        let s = &series[0];
        assert_eq!((s.bundle.as_str(), s.method), ("gripper", Method::Random));
        assert_eq!(s.seeds, vec![0, 1]);
        assert!(!s.single_run);
        assert_eq!(s.points.len(), 3);
        assert!(out.join("gripper-random.csv").is_file());
        assert!(out.join("summary.csv").is_file());

        // One run alone: SE pinned to 0 and flagged.
        let solo = aggregate(&dirs[..1], &tmp.path().join("agg1")).unwrap();
        assert!(solo[0].single_run);
        assert!(solo[0].points.iter().all(|p| p.se == 0.0));

        // Mismatched grids are fatal.
        let dir = tmp.path().join("odd");
        let mut cfg = ExperimentConfig::new("gripper", Method::Random, 2, &dir);
        cfg.steps = Some(50);
        cfg.eval_interval = Some(10);
        run_experiment(&cfg).unwrap();
        let mut all = dirs.clone();
        all.push(dir);
        let err = aggregate(&all, &tmp.path().join("agg2")).unwrap_err();
        assert!(format!("{err:#}").contains("grid"), "got: {err:#}");
    }
}
