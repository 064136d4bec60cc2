use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use tvf::foresight::{run_equivariance_harness, write_residual_csv, GeometricPredictor, TransformKind};
use tvf::geometry::WorkspaceCalib;
use tvf::harness::{
    default_out_dir, foresight_eval, foresight_eval_markdown, load_episodes, record_demos, report_markdown,
    resolve_method, resolve_task, rollout_stem, run_benchmark, run_logged_rollout, write_qmaps, BenchmarkConfig,
    ForesightKind, RolloutRequest, IMAGE_DIR, LOG_DIR,
};
use tvf::proposal::HeuristicScorer;

#[derive(Parser)]
#[command(name = "tvf", version, about = "Tabletop rearrangement with visual foresight trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single rollout and write its log (and images) under --out.
    Rollout {
        /// Gallery task name or path to a task JSON file.
        #[arg(long)]
        task: String,
        /// tvf-small, tvf-large, tvf-k<K>-m<M>[-g<G>], greedy, oracle or custom.
        #[arg(long, default_value = "tvf-small")]
        method: String,
        #[arg(long, default_value = "geometric")]
        foresight: ForesightKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        dmax: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        /// Defaults to the task's block count.
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Accepted for symmetry with benchmark configs; images are on by default here.
        #[arg(long, conflicts_with = "no_images")]
        dump_images: bool,
        #[arg(long)]
        no_images: bool,
    },
    /// Run a benchmark described by a JSON config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Record expert demonstrations.
    Demos {
        #[arg(long)]
        task: String,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random actions before the expert takes over.
        #[arg(long, default_value_t = 0)]
        random_steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare geometric foresight against recorded expert transitions.
    ForesightEval {
        #[arg(long)]
        demos: PathBuf,
        #[arg(long, default_value_t = 0.02)]
        threshold: f64,
        /// Side of the pick and place squares, pixels.
        #[arg(long, default_value_t = 65)]
        side: usize,
    },
    /// Measure equivariance residuals of geometric foresight and print them as CSV.
    Equivariance {
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write Q-map overlays for the initial state of a task.
    VizQmaps {
        #[arg(long)]
        task: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Rollout {
            task,
            method,
            foresight,
            seed,
            dmax,
            k,
            max_steps,
            out,
            dump_images: _,
            no_images,
        } => {
            let out = out.unwrap_or_else(|| default_out_dir("rollout"));
            let req = RolloutRequest {
                task: resolve_task(&task)?,
                seed,
                method: resolve_method(&method, k, dmax)?,
                method_name: method,
                foresight,
                max_steps,
            };
            let stem = rollout_stem(&req.task.name, seed);
            let log = out.join(LOG_DIR).join(format!("{stem}.jsonl"));
            let images = (!no_images).then(|| out.join(IMAGE_DIR).join(&stem));
            let o = run_logged_rollout(&req, &log, images.as_deref())?;
            println!(
                "{stem}: success={} progress={:.3} steps={}{} log={}",
                o.success,
                o.progress,
                o.steps,
                o.failure.map(|f| format!(" failure=\"{f}\"")).unwrap_or_default(),
                log.display()
            );
        }
        Command::Bench { config, out } => {
            let cfg = BenchmarkConfig::from_json_file(&config)?;
            let out = out.unwrap_or_else(|| default_out_dir("bench"));
            let report = run_benchmark(&cfg, &out)?;
            print!("{}", report_markdown(&report));
        }
        Command::Demos {
            task,
            count,
            seed,
            random_steps,
            out,
        } => {
            let spec = resolve_task(&task)?;
            let out = out.unwrap_or_else(|| default_out_dir("demos"));
            let dirs = record_demos(&spec, count, seed, random_steps, &out)?;
            println!("recorded {} episodes under {}", dirs.len(), out.display());
        }
        Command::ForesightEval { demos, threshold, side } => {
            let episodes = load_episodes(&demos)?;
            anyhow::ensure!(!episodes.is_empty(), "no episodes under {}", demos.display());
            let rows = foresight_eval(&episodes, &GeometricPredictor::default(), side, threshold)?;
            print!("{}", foresight_eval_markdown(&rows, threshold));
        }
        Command::Equivariance { samples, seed, out } => {
            let records = run_equivariance_harness(&GeometricPredictor::default(), samples, seed, WorkspaceCalib::default())?;
            match &out {
                Some(path) => write_csv(path, &records)?,
                None => write_residual_csv(&records, io::stdout().lock())?,
            }
            let max = |kind| {
                records
                    .iter()
                    .filter(|r| r.kind == kind)
                    .map(|r| r.residual)
                    .fold(0.0, f64::max)
            };
            eprintln!(
                "max residual: translation {:e}, rotation {:.5}",
                max(TransformKind::Translation),
                max(TransformKind::Rotation)
            );
        }
        Command::VizQmaps { task, seed, out } => {
            let spec = resolve_task(&task)?;
            let out = out.unwrap_or_else(|| default_out_dir("qmaps"));
            for p in write_qmaps(&spec, seed, &HeuristicScorer::default(), &out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn write_csv(path: &Path, records: &[tvf::foresight::EquivarianceRecord]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let mut f = io::BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    write_residual_csv(records, &mut f)?;
    f.flush()?;
    Ok(())
}
