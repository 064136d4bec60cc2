//! Rollouts, benchmarks, reports and offline evaluation tools.
//!
//! A benchmark directory looks like this:
//!
//! ```text
//! out/
//!   config.json                   the benchmark config, echoed
//!   logs/<task>_seed<seed>.jsonl  one rollout log per rollout
//!   logs/<task>_seed<seed>.timing.json
//!   images/<task>_seed<seed>/     optional per-step PNGs
//!   report.md, report.json        regenerated from the logs
//! ```

mod log;
mod report;
mod tools;

pub use log::{
    read_rollout_log, RolloutHeader, RolloutLog, RolloutLogWriter, StepRecord, SummaryRecord,
    ROLLOUT_SCHEMA_VERSION,
};
pub use report::{report_from_dir, report_markdown, BenchmarkReport, TaskRow};
pub use tools::{
    foresight_eval, foresight_eval_markdown, load_episodes, record_demos, squares_disjoint, write_qmaps,
    ForesightEvalRow,
};

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::foresight::{ForesightPredictor, GeometricPredictor, OraclePredictor};
use crate::observation::{write_height_png, write_rgb_png};
use crate::planner::{run_policy_with, Method, PlannerConfig};
use crate::proposal::{HeuristicScorer, Scorer};
use crate::simulator::{task_by_name, SuccessTolerance, TaskSpec};

pub const CONFIG_FILE: &str = "config.json";
pub const LOG_DIR: &str = "logs";
pub const IMAGE_DIR: &str = "images";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForesightKind {
    Geometric,
    Oracle,
}

impl ForesightKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ForesightKind::Geometric => "geometric",
            ForesightKind::Oracle => "oracle",
        }
    }
}

impl fmt::Display for ForesightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ForesightKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(ForesightKind::Geometric),
            "oracle" => Ok(ForesightKind::Oracle),
            _ => Err(Error::InvalidConfig(format!("unknown foresight `{s}`"))),
        }
    }
}

/// Resolves a method name, applying `k` / `d_max` overrides to tree-search methods.
/// `custom` requires both overrides.
pub fn resolve_method(name: &str, k: Option<usize>, d_max: Option<usize>) -> Result<Method> {
    if name == "custom" {
        let (Some(k), Some(d)) = (k, d_max) else {
            return Err(Error::InvalidConfig("method `custom` needs both k and d_max".into()));
        };
        let cfg = PlannerConfig::uniform(k, d);
        cfg.validate()?;
        return Ok(Method::Tvf(cfg));
    }
    match Method::from_name(name)? {
        Method::Tvf(base) => {
            if k.is_none() && d_max.is_none() {
                return Ok(Method::Tvf(base));
            }
            let cfg = PlannerConfig::uniform(k.unwrap_or(base.branching[0]), d_max.unwrap_or(base.d_max()));
            cfg.validate()?;
            Ok(Method::Tvf(cfg))
        }
        _ if k.is_some() || d_max.is_some() => Err(Error::InvalidConfig(format!(
            "k and d_max only apply to tree-search methods, not `{name}`"
        ))),
        other => Ok(other),
    }
}

/// A task name from the shipped gallery, or a path to a task JSON file.
pub fn resolve_task(name: &str) -> Result<TaskSpec> {
    if name.ends_with(".json") {
        let spec = TaskSpec::from_json_file(Path::new(name))?;
        spec.validate()?;
        Ok(spec)
    } else {
        task_by_name(name)
    }
}

pub fn make_predictor(kind: ForesightKind) -> Box<dyn ForesightPredictor> {
    match kind {
        ForesightKind::Geometric => Box::new(GeometricPredictor::default()),
        ForesightKind::Oracle => Box::new(OraclePredictor::default()),
    }
}

/// Everything that identifies one rollout.
#[derive(Debug, Clone)]
pub struct RolloutRequest {
    pub task: TaskSpec,
    pub seed: u64,
    pub method_name: String,
    pub method: Method,
    pub foresight: ForesightKind,
    /// Defaults to the task's block count.
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutOutcome {
    pub success: bool,
    pub progress: f64,
    pub steps: usize,
    pub failure: Option<String>,
    pub timing: RolloutTiming,
}

/// Wall-clock measurements, kept apart from the deterministic log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutTiming {
    pub planning_seconds: f64,
    pub planning_steps: usize,
}

pub fn rollout_stem(task: &str, seed: u64) -> String {
    format!("{task}_seed{seed}")
}

/// Runs one rollout, writing its log to `log_path` and, if `image_dir` is set, the
/// goal view and every observation along the way.
pub fn run_logged_rollout(req: &RolloutRequest, log_path: &Path, image_dir: Option<&Path>) -> Result<RolloutOutcome> {
    let (world, goal) = req.task.load(req.seed)?;
    let max_steps = req.max_steps.unwrap_or(req.task.block_count());
    let scorer = HeuristicScorer::default();
    let predictor = make_predictor(req.foresight);
    let header = RolloutHeader {
        schema_version: ROLLOUT_SCHEMA_VERSION,
        task: req.task.name.clone(),
        seed: req.seed,
        method: req.method_name.clone(),
        foresight: req.foresight,
        scorer: scorer.name().to_string(),
        planner: match &req.method {
            Method::Tvf(cfg) => Some(cfg.clone()),
            _ => None,
        },
        block_count: req.task.block_count(),
        max_steps,
        tolerance: SuccessTolerance::default(),
    };
    if let Some(parent) = log_path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut writer = RolloutLogWriter::create(log_path, header)?;
    if let Some(dir) = image_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let g = goal.render();
        write_rgb_png(&g, &dir.join("goal_rgb.png"))?;
        write_height_png(&g, &dir.join("goal_height.png"))?;
    }
    let dump = |name: &str, o: &crate::observation::Observation| -> Result<()> {
        if let Some(dir) = image_dir {
            write_rgb_png(o, &dir.join(format!("{name}_rgb.png")))?;
            write_height_png(o, &dir.join(format!("{name}_height.png")))?;
        }
        Ok(())
    };

    let mut clock = Instant::now();
    let mut planning_seconds = 0.0;
    let rollout = run_policy_with(&world, &goal, &req.method, predictor.as_ref(), &scorer, max_steps, |before, step| {
        planning_seconds += clock.elapsed().as_secs_f64();
        dump(&format!("step_{:03}", step.index), &before.render())?;
        writer.step(StepRecord::from(step))?;
        clock = Instant::now();
        Ok(())
    })?;
    dump("final", &rollout.final_world.render())?;
    writer.finish(SummaryRecord {
        success: rollout.success,
        progress: rollout.progress,
        steps: rollout.steps.len(),
        failure: rollout.failure.clone(),
    })?;
    Ok(RolloutOutcome {
        success: rollout.success,
        progress: rollout.progress,
        steps: rollout.steps.len(),
        failure: rollout.failure,
        timing: RolloutTiming {
            planning_seconds,
            planning_steps: rollout.steps.len(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// Gallery task names or task JSON paths.
    pub tasks: Vec<String>,
    pub rollouts_per_task: usize,
    /// Seeds for the rollouts of every task; empty means `0..rollouts_per_task`.
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// `tvf-small`, `tvf-large`, `tvf-k<K>-m<M>[-g<G>]`, `greedy`, `oracle` or `custom`.
    pub method: String,
    pub foresight: ForesightKind,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub d_max: Option<usize>,
    /// Defaults to each task's block count.
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub dump_images: bool,
}

impl BenchmarkConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            (0..self.rollouts_per_task as u64).collect()
        } else {
            self.seeds[..self.rollouts_per_task.min(self.seeds.len())].to_vec()
        }
    }

    /// Checks everything that can be checked before a single rollout runs.
    pub fn resolve(&self) -> Result<(Vec<TaskSpec>, Method)> {
        if self.rollouts_per_task == 0 {
            return Err(Error::InvalidConfig("rollouts_per_task must be at least 1".into()));
        }
        if !self.seeds.is_empty() && self.seeds.len() < self.rollouts_per_task {
            return Err(Error::InvalidConfig(format!(
                "{} seeds listed for {} rollouts per task",
                self.seeds.len(),
                self.rollouts_per_task
            )));
        }
        if self.tasks.is_empty() {
            return Err(Error::InvalidConfig("no tasks listed".into()));
        }
        let tasks = self.tasks.iter().map(|t| resolve_task(t)).collect::<Result<Vec<_>>>()?;
        let method = resolve_method(&self.method, self.k, self.d_max)?;
        Ok((tasks, method))
    }
}

/// Runs every (task, seed) rollout, then writes `report.md` and `report.json` built from
/// the logs alone.
pub fn run_benchmark(cfg: &BenchmarkConfig, out: &Path) -> Result<BenchmarkReport> {
    let (tasks, method) = cfg.resolve()?;
    let log_dir = out.join(LOG_DIR);
    fs::create_dir_all(&log_dir).map_err(|e| Error::io(&log_dir, e))?;
    let mut echo = cfg.clone();
    // Rows are keyed by the task's own name, also for tasks given as file paths.
    echo.tasks = tasks.iter().map(|t| t.name.clone()).collect();
    write_json(&out.join(CONFIG_FILE), &echo)?;

    let jobs: Vec<(TaskSpec, u64)> = tasks
        .iter()
        .flat_map(|t| cfg.seeds().into_iter().map(move |s| (t.clone(), s)))
        .collect();
    jobs.par_iter()
        .map(|(task, seed)| {
            let stem = rollout_stem(&task.name, *seed);
            let req = RolloutRequest {
                task: task.clone(),
                seed: *seed,
                method_name: cfg.method.clone(),
                method: method.clone(),
                foresight: cfg.foresight,
                max_steps: cfg.max_steps,
            };
            let images = cfg.dump_images.then(|| out.join(IMAGE_DIR).join(&stem));
            let log_path = log_dir.join(format!("{stem}.jsonl"));
            let outcome = run_logged_rollout(&req, &log_path, images.as_deref())?;
            write_json(&log_path.with_extension("timing.json"), &outcome.timing)?;
            ::log::info!("{stem}: success={} progress={:.3}", outcome.success, outcome.progress);
            Ok(())
        })
        .collect::<Result<Vec<()>>>()?;

    let report = report_from_dir(out)?;
    write_json(&out.join("report.json"), &report)?;
    let md = out.join("report.md");
    fs::write(&md, report_markdown(&report)).map_err(|e| Error::io(&md, e))?;
    Ok(report)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn default_out_dir(kind: &str) -> PathBuf {
    PathBuf::from("runs").join(kind)
}
