//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each, and exits
//! nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use tvf::error::{Error, Result};
use tvf::foresight::{
    run_equivariance_harness, ForesightPredictor, GeometricPredictor, OraclePredictor, TransformKind,
};
use tvf::geometry::{PixelPose, PoseSE2, WorkspaceCalib};
use tvf::harness::{foresight_eval, resolve_method, run_logged_rollout, ForesightKind, RolloutRequest};
use tvf::observation::{Observation, Pixel};
use tvf::planner::{best_node, node_value, run_policy, tree_search, Method, PlannerConfig, SearchNode};
use tvf::proposal::{propose_from_maps, ActionValueMaps, HeuristicScorer, ProposalConfig, Scorer};
use tvf::simulator::{
    check_success, rate_of_progress, record_demo, shipped_tasks, task_by_name, BlockKind, BlockState, Footprint,
    PickPlaceAction, WorldState,
};

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<Verdict>); 9] = [
        ("oracle completeness", oracle_completeness),
        ("geometric foresight fidelity", foresight_fidelity),
        ("equivariance", equivariance),
        ("proposal invariants", proposal_invariants),
        ("tree laws", tree_laws),
        ("value arithmetic", value_arithmetic),
        ("end-to-end smoke", end_to_end),
        ("metric definitions", metric_definitions),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let v = run().unwrap_or_else(|e| Verdict::new(false, format!("error: {e}")));
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("{status} [{}] {name}: {} ({:.1} s)", i + 1, v.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!v.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

fn oracle_completeness() -> Result<Verdict> {
    let start = Instant::now();
    let tasks = shipped_tasks();
    let jobs: Vec<_> = tasks.iter().flat_map(|t| (0..20u64).map(move |s| (t, s))).collect();
    let bad: Vec<String> = jobs
        .par_iter()
        .map(|(t, seed)| -> Result<Option<String>> {
            let (world, goal) = t.load(*seed)?;
            let r = run_policy(&world, &goal, &Method::Oracle, &OraclePredictor::default(), &HeuristicScorer::default(), t.block_count())?;
            let ok = r.success && r.steps.len() == t.block_count() && check_success(&r.final_world, &goal)?;
            Ok((!ok).then(|| format!("{} seed {} ({} steps)", t.name, seed, r.steps.len())))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let elapsed = start.elapsed();
    Ok(Verdict::new(
        tasks.len() == 14 && bad.is_empty() && elapsed < Duration::from_secs(120),
        format!(
            "{} tasks x 20 seeds, {} rollouts off the block-count budget{}, {:.1} s (limit 120 s)",
            tasks.len(),
            bad.len(),
            if bad.is_empty() { String::new() } else { format!(" e.g. {}", bad[0]) },
            elapsed.as_secs_f64()
        ),
    ))
}

fn foresight_fidelity() -> Result<Verdict> {
    let episodes = shipped_tasks()
        .par_iter()
        .flat_map(|t| (0..10u64).into_par_iter().map(move |s| record_demo(t, s, 2)))
        .collect::<Result<Vec<_>>>()?;
    let rows = foresight_eval(&episodes, &GeometricPredictor::default(), 65, 0.02)?;
    let all = rows.last().expect("all row");
    let every_task = rows.len() == 15 && rows.iter().all(|r| r.transitions > 0);
    Ok(Verdict::new(
        every_task && all.within_threshold >= 95.0,
        format!(
            "{} demos, {} disjoint transitions ({} overlapping skipped), {:.1}% with L1 <= 0.02 (need 95%), max L1 {:.5}",
            episodes.len(),
            all.transitions,
            all.overlapping,
            all.within_threshold,
            all.max_l1
        ),
    ))
}

fn equivariance() -> Result<Verdict> {
    let records = run_equivariance_harness(&GeometricPredictor::default(), 100, 2024, WorkspaceCalib::default())?;
    let of = |k| records.iter().filter(move |r| r.kind == k).map(|r| r.residual);
    let n_t = of(TransformKind::Translation).count();
    let n_r = of(TransformKind::Rotation).count();
    let max_t = of(TransformKind::Translation).fold(0.0, f64::max);
    let max_r = of(TransformKind::Rotation).fold(0.0, f64::max);
    Ok(Verdict::new(
        records.len() == 100 && max_t == 0.0 && max_r <= 0.05,
        format!("{n_t} translations max residual {max_t:e} (need 0), {n_r} rotations max residual {max_r:.5} (limit 0.05)"),
    ))
}

fn random_maps(rng: &mut ChaCha8Rng) -> ActionValueMaps {
    let h = rng.random_range(4..=40);
    let w = rng.random_range(4..=40);
    let r = rng.random_range(1..=8);
    let mut m = ActionValueMaps::zeros(h, w, r);
    for q in m.q_pick.iter_mut() {
        *q = rng.random_range(0.0..1.0);
    }
    match rng.random_range(0..10) {
        0..=2 => {
            for q in m.q_place.iter_mut() {
                *q = rng.random_range(0.0..1.0);
            }
        }
        3..=5 => {
            let n = rng.random_range(1..12);
            for _ in 0..n {
                let i = rng.random_range(0..m.q_place.len());
                m.q_place[i] = rng.random_range(1e-6..1.0);
            }
        }
        6..=8 => {
            let bumps: Vec<(f64, f64, usize, f64)> = (0..rng.random_range(1..6))
                .map(|_| {
                    (
                        rng.random_range(0.0..h as f64),
                        rng.random_range(0.0..w as f64),
                        rng.random_range(0..r),
                        rng.random_range(0.1..1.0),
                    )
                })
                .collect();
            for u in 0..h {
                for v in 0..w {
                    for &(bu, bv, br, a) in &bumps {
                        let d2 = (u as f64 - bu).powi(2) + (v as f64 - bv).powi(2);
                        let q = m.place(u, v, br) + a * (-d2 / 8.0).exp();
                        m.set_place(u, v, br, q);
                    }
                }
            }
        }
        _ => {}
    }
    m
}

fn proposal_invariants() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = Vec::new();
    let mut empty = 0;
    for case in 0..1000 {
        let maps = random_maps(&mut rng);
        let cfg = ProposalConfig::with_k(rng.random_range(1..=8));

        // Brute-force reference: collapsed map, candidate set and global arg-max.
        let (h, w, nr) = (maps.height, maps.width, maps.rotations);
        let mut best = (f64::NEG_INFINITY, PixelPose::new(0, 0, 0));
        let mut collapsed = vec![f64::NEG_INFINITY; h * w];
        for u in 0..h {
            for v in 0..w {
                for r in 0..nr {
                    let q = maps.place(u, v, r);
                    collapsed[u * w + v] = collapsed[u * w + v].max(q);
                    if q > best.0 {
                        best = (q, PixelPose::new(u, v, r));
                    }
                }
            }
        }
        let threshold = cfg.alpha * best.0;
        let s = collapsed.iter().filter(|&&q| q > threshold).count();

        let result = propose_from_maps(&maps, &cfg);
        if best.0 <= 0.0 {
            empty += 1;
            if !matches!(result, Err(Error::EmptyProposal)) {
                violations.push(format!("case {case}: empty map gave {result:?}"));
            }
            continue;
        }
        let p = result?;
        let expected = cfg.k.min(s).min(cfg.top_n);
        if p.places.len() != expected {
            violations.push(format!("case {case}: {} places, expected {expected}", p.places.len()));
        }
        if !p.values.iter().all(|&q| q > threshold) {
            violations.push(format!("case {case}: value at or below alpha * max"));
        }
        if !p.places.iter().zip(&p.values).all(|(pl, &q)| maps.place(pl.u, pl.v, pl.rot_bin) == q) {
            violations.push(format!("case {case}: values do not match the map"));
        }
        if !p.places.contains(&best.1) {
            violations.push(format!("case {case}: global arg-max {:?} missing", best.1));
        }
        if propose_from_maps(&maps, &cfg)? != p {
            violations.push(format!("case {case}: rerun differs"));
        }
    }
    Ok(Verdict::new(
        violations.is_empty(),
        format!(
            "1000 synthetic maps ({empty} all-zero), {} violations{}",
            violations.len(),
            violations.first().map(|v| format!(", first: {v}")).unwrap_or_default()
        ),
    ))
}

/// Fixed place map with `k` separated peaks.
struct PeaksScorer {
    k: usize,
}

impl Scorer for PeaksScorer {
    fn score(&self, o: &Observation, _goal: &Observation) -> Result<ActionValueMaps> {
        let mut m = ActionValueMaps::for_calib(o.calib());
        m.q_pick[0] = 1.0;
        for i in 0..self.k {
            m.set_place(20 + 30 * i, 20 + 30 * i, i, 1.0 - 0.1 * i as f64);
        }
        Ok(m)
    }

    fn name(&self) -> &'static str {
        "peaks"
    }
}

struct Identity;

impl ForesightPredictor for Identity {
    fn predict(&self, o: &Observation, _a: &PickPlaceAction) -> Observation {
        o.clone()
    }

    fn name(&self) -> &'static str {
        "identity"
    }
}

fn tree_laws() -> Result<Verdict> {
    let blank = Observation::zeros(WorkspaceCalib::default());
    let mut counts = Vec::new();
    for (k, d) in [(2, 1), (3, 3), (2, 3)] {
        let nodes = tree_search(&blank, &blank, &Identity, &PeaksScorer { k: 5 }, &PlannerConfig::uniform(k, d))?;
        counts.push(nodes.len());
    }
    let counts_ok = counts == [2, 39, 14];

    let scorer = HeuristicScorer::default();
    let f = GeometricPredictor::default();
    let k1 = Method::Tvf(PlannerConfig::uniform(1, 1));
    let jobs: Vec<(String, u64)> = ["tower", "row", "square", "t-shape", "stair-3", "twin-tower", "pyramid"]
        .iter()
        .flat_map(|t| (0..4u64).map(move |s| (t.to_string(), s)))
        .collect();
    let mismatches: Vec<String> = jobs
        .par_iter()
        .map(|(name, seed)| -> Result<Option<String>> {
            let t = task_by_name(name)?;
            let (world, goal) = t.load(*seed)?;
            let a = run_policy(&world, &goal, &k1, &f, &scorer, t.block_count())?;
            let b = run_policy(&world, &goal, &Method::Greedy, &f, &scorer, t.block_count())?;
            let actions = |r: &tvf::planner::Rollout| r.steps.iter().map(|s| s.action).collect::<Vec<_>>();
            Ok((actions(&a) != actions(&b)).then(|| format!("{name} seed {seed}")))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(Verdict::new(
        counts_ok && mismatches.is_empty(),
        format!(
            "node counts {counts:?} (expected [2, 39, 14]); K=1 d=1 vs greedy: {}/{} rollouts identical",
            jobs.len() - mismatches.len(),
            jobs.len()
        ),
    ))
}

fn node(obs: &Observation, depth: usize) -> SearchNode {
    SearchNode {
        obs: obs.clone(),
        depth,
        trajectory: vec![PickPlaceAction::new(PoseSE2::default(), PoseSE2::default()); depth],
        parent: None,
    }
}

fn value_arithmetic() -> Result<Verdict> {
    let calib = WorkspaceCalib::default();
    let goal = Observation::zeros(calib);
    let cfg = PlannerConfig::uniform(3, 3);
    let v3 = node_value(&node(&goal, 3), &goal, &cfg)?;
    let spot = (v3 - 0.9801).abs() <= 1e-12;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut failures = 0;
    for _ in 0..200 {
        let n = calib.height * calib.width;
        let mut rnd = |scale: f64| -> Vec<Pixel> {
            (0..n)
                .map(|_| {
                    let mut p = [0.0; 4];
                    for c in p.iter_mut() {
                        *c = rng.random_range(0.0..scale);
                    }
                    p
                })
                .collect()
        };
        let g = Observation::from_pixels(calib, rnd(0.1))?;
        let o = Observation::from_pixels(calib, rnd(0.1))?;
        let d1 = rng.random_range(1..=4);
        let d2 = rng.random_range(d1 + 1..=6);
        let cfg = PlannerConfig {
            height_scale: Some(1.0),
            ..PlannerConfig::default()
        };
        let (shallow, deep) = (node_value(&node(&o, d1), &g, &cfg)?, node_value(&node(&o, d2), &g, &cfg)?);
        let prefers_shallow = shallow > deep && best_node(&[shallow, deep])? == 0 && best_node(&[deep, shallow])? == 1;
        failures += usize::from(!prefers_shallow);
    }
    Ok(Verdict::new(
        spot && failures == 0,
        format!("value at depth 3 on the goal = {v3:.15} (expected 0.9801 +- 1e-12); shallower node chosen in {}/200 random pairs", 200 - failures),
    ))
}

fn end_to_end() -> Result<Verdict> {
    let start = Instant::now();
    let method = Method::Tvf(PlannerConfig::uniform(3, 1));
    let scorer = HeuristicScorer::default();
    let mut lines = Vec::new();
    let mut pass = true;
    for (kind, min_success, min_progress) in [(ForesightKind::Oracle, 1.0, 1.0), (ForesightKind::Geometric, 0.8, 0.9)] {
        for name in ["tower", "row"] {
            let t = task_by_name(name)?;
            let results = (0..20u64)
                .into_par_iter()
                .map(|seed| {
                    let (world, goal) = t.load(seed)?;
                    let f = tvf::harness::make_predictor(kind);
                    let r = run_policy(&world, &goal, &method, f.as_ref(), &scorer, t.block_count())?;
                    Ok((r.success, r.progress))
                })
                .collect::<Result<Vec<_>>>()?;
            let success = results.iter().filter(|r| r.0).count() as f64 / 20.0;
            let progress = results.iter().map(|r| r.1).sum::<f64>() / 20.0;
            pass &= success >= min_success && progress >= min_progress;
            lines.push(format!("{kind}/{name} {:.0}% success {:.0}% progress", 100.0 * success, 100.0 * progress));
        }
    }
    let elapsed = start.elapsed();
    Ok(Verdict::new(
        pass && elapsed < Duration::from_secs(300),
        format!("K=3 d=1, 20 seeds: {}; {:.1} s (limit 300 s)", lines.join(", "), elapsed.as_secs_f64()),
    ))
}

fn metric_definitions() -> Result<Verdict> {
    let calib = WorkspaceCalib::default();
    let kind = BlockKind {
        footprint: Footprint::Rect {
            length: 0.06,
            width: 0.03,
        },
        thickness: 0.03,
        color: [0.8, 0.2, 0.2],
    };
    let block = |id, x, y, theta: f64, z| BlockState {
        id,
        kind,
        pose: PoseSE2::new(x, y, theta),
        z,
    };
    let goal = WorldState::new(vec![block(0, 0.25, 0.25, 0.0, 0.0)], calib);
    let one = |x: f64, theta_deg: f64, z: f64| WorldState::new(vec![block(0, 0.25 + x, 0.25, theta_deg.to_radians(), z)], calib);
    let cases = [
        ("1.2 cm", one(0.012, 0.0, 0.0), false),
        ("0.9 cm", one(0.009, 0.0, 0.0), true),
        ("14 deg", one(0.0, 14.0, 0.0), true),
        ("16 deg", one(0.0, 16.0, 0.0), false),
        ("0.4 cm up", one(0.0, 0.0, 0.004), true),
        ("0.6 cm up", one(0.0, 0.0, 0.006), false),
    ];
    let mut wrong = Vec::new();
    for (label, world, expected) in &cases {
        if check_success(world, &goal)? != *expected {
            wrong.push(*label);
        }
    }

    let spots = [(0.15, 0.15), (0.15, 0.35), (0.35, 0.15), (0.35, 0.35)];
    let goal4 = WorldState::new(
        spots.iter().enumerate().map(|(i, &(x, y))| block(i, x, y, 0.0, 0.0)).collect(),
        calib,
    );
    let mut half = goal4.clone();
    half.blocks[2].pose.x = 0.60;
    half.blocks[3].pose.x = 0.68;
    let progress = rate_of_progress(&half, &goal4)?;
    Ok(Verdict::new(
        wrong.is_empty() && progress == 0.5,
        format!(
            "{}/{} boundary cases as expected{}; 2 of 4 placed gives progress {progress}",
            cases.len() - wrong.len(),
            cases.len(),
            if wrong.is_empty() { String::new() } else { format!(" (wrong: {})", wrong.join(", ")) }
        ),
    ))
}

fn determinism() -> Result<Verdict> {
    let dir = tempfile::tempdir().map_err(|e| Error::io("tempdir", e))?;
    let configs = [
        ("tower", "tvf-small", ForesightKind::Geometric, 7),
        ("row", "tvf-k2-m2", ForesightKind::Geometric, 3),
        ("stair-3", "tvf-small", ForesightKind::Oracle, 1),
        ("square", "greedy", ForesightKind::Geometric, 5),
        ("pallet", "oracle", ForesightKind::Geometric, 2),
    ];
    let mut differing = Vec::new();
    for (i, (task, method, foresight, seed)) in configs.iter().enumerate() {
        let req = RolloutRequest {
            task: task_by_name(task)?,
            seed: *seed,
            method_name: method.to_string(),
            method: resolve_method(method, None, None)?,
            foresight: *foresight,
            max_steps: None,
        };
        let paths = [dir.path().join(format!("{i}a.jsonl")), dir.path().join(format!("{i}b.jsonl"))];
        for p in &paths {
            run_logged_rollout(&req, p, None)?;
        }
        let read = |p: &std::path::Path| std::fs::read(p).map_err(|e| Error::io(p, e));
        if read(&paths[0])? != read(&paths[1])? {
            differing.push(format!("{task}/{method}"));
        }
    }
    Ok(Verdict::new(
        differing.is_empty(),
        format!("{}/{} repeated rollouts wrote byte-identical logs", configs.len() - differing.len(), configs.len()),
    ))
}
