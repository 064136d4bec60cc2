//! Expert demonstrations and their on-disk format.
//!
//! An episode directory holds `episode.jsonl` plus one RGB PNG and one 16-bit height PNG
//! per recorded observation. The first JSONL record is a header, then one record per
//! step, then a final record pointing at the goal-reaching observation.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::oracle::{oracle_policy, random_action};
use super::task::{mix_seed, TaskSpec};
use super::world::{check_success, PickPlaceAction};
use crate::error::{Error, Result};
use crate::geometry::WorkspaceCalib;
use crate::observation::{read_observation, write_height_png, write_rgb_png, Observation};

pub const EPISODE_SCHEMA_VERSION: u32 = 1;
pub const EPISODE_FILE: &str = "episode.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSource {
    Random,
    Oracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStep {
    pub observation: Observation,
    pub action: PickPlaceAction,
    pub source: StepSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub task: String,
    pub seed: u64,
    pub steps: Vec<EpisodeStep>,
    /// The goal-reaching observation after the last step.
    pub final_observation: Observation,
}

/// Consecutive `(before, action, after)` triple.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<'a> {
    pub before: &'a Observation,
    pub action: PickPlaceAction,
    pub after: &'a Observation,
    pub source: StepSource,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn transitions(&self) -> impl Iterator<Item = Transition<'_>> {
        self.steps.iter().enumerate().map(move |(i, s)| Transition {
            before: &s.observation,
            action: s.action,
            after: self
                .steps
                .get(i + 1)
                .map(|n| &n.observation)
                .unwrap_or(&self.final_observation),
            source: s.source,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut lines = Vec::new();
        let calib = *self.final_observation.calib();
        lines.push(serde_json::to_string(&Record::Header {
            schema_version: EPISODE_SCHEMA_VERSION,
            task: self.task.clone(),
            seed: self.seed,
            calib,
        })?);
        for (i, step) in self.steps.iter().enumerate() {
            let (rgb, height) = image_names(&format!("step_{i:03}"));
            write_rgb_png(&step.observation, &dir.join(&rgb))?;
            write_height_png(&step.observation, &dir.join(&height))?;
            lines.push(serde_json::to_string(&Record::Step {
                index: i,
                source: step.source,
                action: step.action,
                rgb,
                height,
            })?);
        }
        let (rgb, height) = image_names("final");
        write_rgb_png(&self.final_observation, &dir.join(&rgb))?;
        write_height_png(&self.final_observation, &dir.join(&height))?;
        lines.push(serde_json::to_string(&Record::Final { rgb, height })?);
        let path = dir.join(EPISODE_FILE);
        let mut f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        for l in lines {
            writeln!(f, "{l}").map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// Loads an episode; observations come back at PNG quantization.
    pub fn load(dir: &Path) -> Result<Episode> {
        let path = dir.join(EPISODE_FILE);
        let f = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut header: Option<(String, u64, WorkspaceCalib)> = None;
        let mut steps = Vec::new();
        let mut final_observation = None;
        for line in BufReader::new(f).lines() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Record>(&line)? {
                Record::Header {
                    schema_version,
                    task,
                    seed,
                    calib,
                } => {
                    if schema_version != EPISODE_SCHEMA_VERSION {
                        return Err(Error::Log(format!("unsupported schema version {schema_version}")));
                    }
                    header = Some((task, seed, calib));
                }
                Record::Step {
                    source,
                    action,
                    rgb,
                    height,
                    ..
                } => {
                    let calib = header.as_ref().ok_or_else(|| Error::Log("step before header".into()))?.2;
                    steps.push(EpisodeStep {
                        observation: read_observation(&dir.join(rgb), &dir.join(height), calib)?,
                        action,
                        source,
                    });
                }
                Record::Final { rgb, height } => {
                    let calib = header.as_ref().ok_or_else(|| Error::Log("final before header".into()))?.2;
                    final_observation = Some(read_observation(&dir.join(rgb), &dir.join(height), calib)?);
                }
            }
        }
        let (task, seed, _) = header.ok_or_else(|| Error::Log("missing header".into()))?;
        Ok(Episode {
            task,
            seed,
            steps,
            final_observation: final_observation.ok_or_else(|| Error::Log("missing final record".into()))?,
        })
    }
}

fn image_names(stem: &str) -> (String, String) {
    (format!("{stem}_rgb.png"), format!("{stem}_height.png"))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Header {
        schema_version: u32,
        task: String,
        seed: u64,
        calib: WorkspaceCalib,
    },
    Step {
        index: usize,
        source: StepSource,
        action: PickPlaceAction,
        rgb: String,
        height: String,
    },
    Final {
        rgb: String,
        height: String,
    },
}

/// Plays `n_random` random actions, then the scripted expert until the goal is reached.
pub fn record_demo(spec: &TaskSpec, seed: u64, n_random: usize) -> Result<Episode> {
    let (mut world, goal) = spec.load(seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x005E_ED0F_DE40));
    let mut steps = Vec::new();
    for _ in 0..n_random {
        let action = random_action(&world, &mut rng)?;
        steps.push(EpisodeStep {
            observation: world.render(),
            action,
            source: StepSource::Random,
        });
        world = world.apply_action(&action);
    }
    let budget = 4 * spec.block_count();
    let mut oracle_steps = 0;
    while !check_success(&world, &goal)? {
        if oracle_steps == budget {
            return Err(Error::NoLegalMove(format!(
                "expert did not finish `{}` within {budget} steps",
                spec.name
            )));
        }
        let action = oracle_policy(&world, &goal)?;
        steps.push(EpisodeStep {
            observation: world.render(),
            action,
            source: StepSource::Oracle,
        });
        world = world.apply_action(&action);
        oracle_steps += 1;
    }
    Ok(Episode {
        task: spec.name.clone(),
        seed,
        steps,
        final_observation: world.render(),
    })
}
