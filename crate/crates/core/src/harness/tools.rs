use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::rollout_stem;
use crate::error::{Error, Result};
use crate::foresight::ForesightPredictor;
use crate::geometry::WorkspaceCalib;
use crate::observation::{height_scale, l1_distance_scaled, write_qmap_overlay, write_rgb_png, ChannelWeights};
use crate::proposal::Scorer;
use crate::simulator::{record_demo, Episode, PickPlaceAction, StepSource, TaskSpec, EPISODE_FILE};

/// Records `count` expert episodes with seeds `seed..seed + count` into
/// `out/<task>_seed<seed>/`. Each starts with `random_steps` random actions and ends
/// at the goal.
pub fn record_demos(spec: &TaskSpec, count: usize, seed: u64, random_steps: usize, out: &Path) -> Result<Vec<PathBuf>> {
    (0..count as u64)
        .map(|i| {
            let s = seed + i;
            let ep = record_demo(spec, s, random_steps)?;
            let dir = out.join(rollout_stem(&spec.name, s));
            ep.save(&dir)?;
            Ok(dir)
        })
        .collect()
}

/// Every episode directory directly under `dir`, sorted by path.
pub fn load_episodes(dir: &Path) -> Result<Vec<Episode>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(EPISODE_FILE).is_file())
        .collect();
    dirs.sort();
    dirs.iter().map(|d| Episode::load(d)).collect()
}

/// Pick and place squares of side `side` (pixels) do not overlap.
pub fn squares_disjoint(calib: &WorkspaceCalib, a: &PickPlaceAction, side: usize) -> Result<bool> {
    let p = calib.world_to_pixel(&a.pick)?;
    let q = calib.world_to_pixel(&a.place)?;
    let side = side as i64;
    Ok((p.u as i64 - q.u as i64).abs() >= side || (p.v as i64 - q.v as i64).abs() >= side)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForesightEvalRow {
    pub task: String,
    pub transitions: usize,
    /// Expert transitions left out because the pick and place squares overlap.
    pub overlapping: usize,
    pub mean_l1: f64,
    pub max_l1: f64,
    /// Share of evaluated transitions with L1 at most the threshold, percent.
    pub within_threshold: f64,
}

/// Unit-weight L1 between predicted and recorded next observations, heights scaled by the
/// episode's final (goal) view, over every expert transition with disjoint squares, one row per task plus an `all` row.
pub fn foresight_eval(
    episodes: &[Episode],
    f: &dyn ForesightPredictor,
    side: usize,
    threshold: f64,
) -> Result<Vec<ForesightEvalRow>> {
    let mut order: Vec<String> = Vec::new();
    let mut per_task: Vec<(Vec<f64>, usize)> = Vec::new();
    let mut all = (Vec::new(), 0);
    for ep in episodes {
        let slot = match order.iter().position(|t| *t == ep.task) {
            Some(i) => i,
            None => {
                order.push(ep.task.clone());
                per_task.push((Vec::new(), 0));
                order.len() - 1
            }
        };
        let scale = height_scale(&ep.final_observation);
        for t in ep.transitions().filter(|t| t.source == StepSource::Oracle) {
            if !squares_disjoint(t.before.calib(), &t.action, side)? {
                per_task[slot].1 += 1;
                all.1 += 1;
                continue;
            }
            let d = l1_distance_scaled(&f.predict(t.before, &t.action), t.after, &ChannelWeights::unit(), scale)?;
            per_task[slot].0.push(d);
            all.0.push(d);
        }
    }
    let row = |task: &str, (ds, overlapping): &(Vec<f64>, usize)| {
        let n = ds.len().max(1) as f64;
        ForesightEvalRow {
            task: task.to_string(),
            transitions: ds.len(),
            overlapping: *overlapping,
            mean_l1: ds.iter().sum::<f64>() / n,
            max_l1: ds.iter().copied().fold(0.0, f64::max),
            within_threshold: 100.0 * ds.iter().filter(|&&d| d <= threshold).count() as f64 / n,
        }
    };
    let mut rows: Vec<_> = order.iter().zip(&per_task).map(|(t, acc)| row(t, acc)).collect();
    rows.push(row("all", &all));
    Ok(rows)
}

pub fn foresight_eval_markdown(rows: &[ForesightEvalRow], threshold: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "| Task | Transitions | Overlapping | Mean L1 | Max L1 | L1 <= {threshold} (%) |");
    let _ = writeln!(s, "|---|---:|---:|---:|---:|---:|");
    for r in rows {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {:.5} | {:.5} | {:.1} |",
            r.task, r.transitions, r.overlapping, r.mean_l1, r.max_l1, r.within_threshold
        );
    }
    s
}

/// Writes the initial view, the goal view, and overlays of `Q_pick` and of `Q_place`
/// maxed over rotations for the initial state of `spec` at `seed`.
pub fn write_qmaps(spec: &TaskSpec, seed: u64, scorer: &dyn Scorer, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let (world, goal) = spec.load(seed)?;
    let (o, g) = (world.render(), goal.render());
    let maps = scorer.score(&o, &g)?;
    let (q_tilde, _) = maps.collapse_rotations();
    let stem = rollout_stem(&spec.name, seed);
    let paths = [
        out.join(format!("{stem}_observation.png")),
        out.join(format!("{stem}_goal.png")),
        out.join(format!("{stem}_qpick.png")),
        out.join(format!("{stem}_qplace.png")),
    ];
    write_rgb_png(&o, &paths[0])?;
    write_rgb_png(&g, &paths[1])?;
    write_qmap_overlay(&o, &maps.q_pick, &paths[2])?;
    write_qmap_overlay(&o, &q_tilde, &paths[3])?;
    Ok(paths.to_vec())
}
