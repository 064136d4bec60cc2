use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::log::read_rollout_log;
use super::{BenchmarkConfig, ForesightKind, RolloutTiming, CONFIG_FILE, LOG_DIR};
use crate::error::{Error, Result};
use crate::simulator::SuccessTolerance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub task: String,
    pub rollouts: usize,
    pub successes: usize,
    /// Percent.
    pub success_rate: f64,
    /// Mean rate of progress, percent.
    pub progress_rate: f64,
    /// Mean wall time per planning step, seconds. Absent without timing files.
    pub seconds_per_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub method: String,
    pub foresight: ForesightKind,
    pub tolerance: SuccessTolerance,
    pub rows: Vec<TaskRow>,
    pub overall: TaskRow,
    pub config: Option<BenchmarkConfig>,
}

#[derive(Default)]
struct Acc {
    rollouts: usize,
    successes: usize,
    progress: f64,
    seconds: f64,
    steps: usize,
    timed: bool,
}

impl Acc {
    fn row(&self, task: &str) -> TaskRow {
        let n = self.rollouts.max(1) as f64;
        TaskRow {
            task: task.to_string(),
            rollouts: self.rollouts,
            successes: self.successes,
            success_rate: 100.0 * self.successes as f64 / n,
            progress_rate: 100.0 * self.progress / n,
            seconds_per_step: (self.timed && self.steps > 0).then(|| self.seconds / self.steps as f64),
        }
    }
}

/// Rebuilds the report from the rollout logs under `dir` (and optional timing files).
pub fn report_from_dir(dir: &Path) -> Result<BenchmarkReport> {
    let config: Option<BenchmarkConfig> = match fs::read_to_string(dir.join(CONFIG_FILE)) {
        Ok(text) => Some(serde_json::from_str(&text)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(Error::io(dir.join(CONFIG_FILE), e)),
    };
    let log_dir = dir.join(LOG_DIR);
    let mut paths: Vec<_> = fs::read_dir(&log_dir)
        .map_err(|e| Error::io(&log_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Log(format!("no rollout logs in {}", log_dir.display())));
    }

    let mut per_task: BTreeMap<String, Acc> = BTreeMap::new();
    let mut total = Acc::default();
    let mut identity: Option<(String, ForesightKind, SuccessTolerance)> = None;
    for path in &paths {
        let log = read_rollout_log(path)?;
        let id = (log.header.method.clone(), log.header.foresight, log.header.tolerance);
        match &identity {
            None => identity = Some(id),
            Some(seen) if *seen != id => {
                return Err(Error::Log(format!("{} was produced by a different configuration", path.display())));
            }
            _ => {}
        }
        let timing: Option<RolloutTiming> = fs::read_to_string(path.with_extension("timing.json"))
            .ok()
            .map(|t| serde_json::from_str(&t))
            .transpose()?;
        for acc in [per_task.entry(log.header.task.clone()).or_default(), &mut total] {
            acc.rollouts += 1;
            acc.successes += log.summary.success as usize;
            acc.progress += log.summary.progress;
            if let Some(t) = &timing {
                acc.timed = true;
                acc.seconds += t.planning_seconds;
                acc.steps += t.planning_steps;
            }
        }
    }

    let order: Vec<String> = match &config {
        Some(c) => c.tasks.iter().filter(|t| per_task.contains_key(*t)).cloned().collect(),
        None => per_task.keys().cloned().collect(),
    };
    let (method, foresight, tolerance) = identity.expect("at least one log");
    Ok(BenchmarkReport {
        method,
        foresight,
        tolerance,
        rows: order.iter().map(|t| per_task[t].row(t)).collect(),
        overall: total.row("all"),
        config,
    })
}

pub fn report_markdown(r: &BenchmarkReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Benchmark: {} ({} foresight)\n", r.method, r.foresight.as_str());
    let _ = writeln!(
        s,
        "Success tolerance: {} m translation, {} m height, {:.1} deg rotation.\n",
        r.tolerance.translation,
        r.tolerance.z,
        r.tolerance.rotation.to_degrees()
    );
    let _ = writeln!(s, "| Task | Rollouts | Success (%) | Progress (%) | s / step |");
    let _ = writeln!(s, "|---|---:|---:|---:|---:|");
    for row in r.rows.iter().chain(std::iter::once(&r.overall)) {
        let secs = row.seconds_per_step.map_or("-".to_string(), |t| format!("{t:.3}"));
        let _ = writeln!(
            s,
            "| {} | {} | {:.1} | {:.1} | {} |",
            row.task, row.rollouts, row.success_rate, row.progress_rate, secs
        );
    }
    s
}
