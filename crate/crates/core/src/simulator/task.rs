//! Task definitions and the shipped task gallery.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::block::{BlockKind, BlockState, Footprint};
use super::world::WorldState;
use crate::error::{Error, Result};
use crate::geometry::{PoseSE2, WorkspaceCalib};

/// Rejection-sampling budget per block.
pub const MAX_SPAWN_ATTEMPTS: usize = 10_000;
/// Minimum planar gap between freshly spawned or randomly placed blocks.
pub const SPAWN_CLEARANCE: f64 = 0.01;

pub const RED: [f64; 3] = [0.85, 0.2, 0.2];
pub const BLUE: [f64; 3] = [0.2, 0.35, 0.85];
pub const YELLOW: [f64; 3] = [0.9, 0.8, 0.2];
pub const BROWN: [f64; 3] = [0.55, 0.35, 0.2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub fn contains_block(&self, b: &BlockState) -> bool {
        let (x0, x1, y0, y1) = b.bounds();
        x0 >= self.x_min && x1 <= self.x_max && y0 >= self.y_min && y1 <= self.y_max
    }

    pub fn of_workspace(calib: &WorkspaceCalib) -> Self {
        let (ex, ey) = calib.extent();
        Region {
            x_min: calib.origin.0,
            x_max: calib.origin.0 + ex,
            y_min: calib.origin.1,
            y_max: calib.origin.1 + ey,
        }
    }

    pub fn shrink(&self, margin: f64) -> Self {
        Region {
            x_min: self.x_min + margin,
            x_max: self.x_max - margin,
            y_min: self.y_min + margin,
            y_max: self.y_max - margin,
        }
    }

    fn is_valid(&self) -> bool {
        self.x_min < self.x_max && self.y_min < self.y_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalPose {
    pub pose: PoseSE2,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskSplit {
    Training,
    Unseen,
}

/// A rearrangement task: which blocks exist, where they must end up, and where they spawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub blocks: Vec<BlockKind>,
    pub goal_poses: Vec<GoalPose>,
    pub spawn_region: Region,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub calib: WorkspaceCalib,
    #[serde(default = "default_split")]
    pub split: TaskSplit,
}

fn default_split() -> TaskSplit {
    TaskSplit::Unseen
}

impl TaskSpec {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: TaskSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Tallest top face in the goal; used to normalize heights.
    pub fn max_height(&self) -> f64 {
        self.blocks
            .iter()
            .zip(&self.goal_poses)
            .map(|(b, g)| g.z + b.thickness)
            .fold(0.0, f64::max)
    }

    pub fn goal_world(&self) -> WorldState {
        let blocks = self
            .blocks
            .iter()
            .zip(&self.goal_poses)
            .enumerate()
            .map(|(id, (kind, g))| BlockState {
                id,
                kind: *kind,
                pose: g.pose,
                z: g.z,
            })
            .collect();
        WorldState::new(blocks, self.calib)
    }

    pub fn validate(&self) -> Result<()> {
        self.calib.validate()?;
        let bad = |msg: String| Err(Error::InvalidConfig(format!("task `{}`: {msg}", self.name)));
        if self.blocks.len() != self.goal_poses.len() {
            return bad(format!(
                "{} blocks but {} goal poses",
                self.blocks.len(),
                self.goal_poses.len()
            ));
        }
        if self.blocks.is_empty() {
            return bad("no blocks".into());
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if !b.footprint.is_valid() || !(b.thickness > 0.0) {
                return bad(format!("block {i} has a degenerate shape"));
            }
        }
        if !self.spawn_region.is_valid() {
            return bad("empty spawn region".into());
        }
        let workspace = Region::of_workspace(&self.calib);
        let goal = self.goal_world();
        for (i, b) in goal.blocks.iter().enumerate() {
            if !workspace.contains_block(b) {
                return bad(format!("goal block {i} leaves the workspace"));
            }
            let support = goal
                .blocks
                .iter()
                .enumerate()
                .filter(|(j, o)| *j != i && o.top() <= b.z + 1e-9 && b.footprint_overlaps(o))
                .map(|(_, o)| o.top())
                .fold(0.0, f64::max);
            if (support - b.z).abs() > 1e-9 {
                return bad(format!("goal block {i} at z={} rests on {}", b.z, support));
            }
        }
        if goal.has_interpenetration() {
            return bad("goal configuration interpenetrates".into());
        }
        Ok(())
    }

    /// Initial world (every block on the table, collision-free inside the spawn region)
    /// and goal world. Deterministic in `(self.seed, seed)`.
    pub fn load(&self, seed: u64) -> Result<(WorldState, WorldState)> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, seed));
        let region = self.spawn_region;
        let mut placed: Vec<BlockState> = Vec::with_capacity(self.blocks.len());
        for (id, kind) in self.blocks.iter().enumerate() {
            let mut ok = false;
            for _ in 0..MAX_SPAWN_ATTEMPTS {
                let candidate = BlockState {
                    id,
                    kind: *kind,
                    pose: PoseSE2::new(
                        rng.random_range(region.x_min..region.x_max),
                        rng.random_range(region.y_min..region.y_max),
                        rng.random_range(0.0..TAU),
                    ),
                    z: 0.0,
                };
                if region.contains_block(&candidate)
                    && placed.iter().all(|p| p.separation(&candidate) >= SPAWN_CLEARANCE)
                {
                    placed.push(candidate);
                    ok = true;
                    break;
                }
            }
            if !ok {
                return Err(Error::Spawn {
                    block: id,
                    attempts: MAX_SPAWN_ATTEMPTS,
                });
            }
        }
        Ok((WorldState::new(placed, self.calib), self.goal_world()))
    }
}

pub fn load_task(spec: &TaskSpec, seed: u64) -> Result<(WorldState, WorldState)> {
    spec.load(seed)
}

/// SplitMix64-style combination of two seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(b)
        .wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// Shipped gallery. Blocks are 4 cm cubes-ish (3 cm thick); neighbours in a layer sit
// 5 cm apart so placements quantized to the pixel grid and rotation bins do not
// collide. Goals are built in the far half of the table, blocks spawn in the near half.
const SIDE: f64 = 0.04;
const THICK: f64 = 0.03;
const PITCH: f64 = 0.05;
const ANCHOR: (f64, f64) = (0.37, 0.25);

fn spawn_region() -> Region {
    Region {
        x_min: 0.03,
        x_max: 0.24,
        y_min: 0.03,
        y_max: 0.47,
    }
}

fn cube(color: [f64; 3]) -> BlockKind {
    BlockKind::square(SIDE, THICK, color)
}

fn slot(dx: f64, dy: f64, layer: usize) -> GoalPose {
    slot_rot(dx, dy, layer, 0.0)
}

fn slot_rot(dx: f64, dy: f64, layer: usize, theta: f64) -> GoalPose {
    GoalPose {
        pose: PoseSE2::new(ANCHOR.0 + dx, ANCHOR.1 + dy, theta),
        z: layer as f64 * THICK,
    }
}

fn task(name: &str, split: TaskSplit, seed: u64, parts: Vec<(BlockKind, GoalPose)>) -> TaskSpec {
    let (blocks, goal_poses) = parts.into_iter().unzip();
    TaskSpec {
        name: name.to_string(),
        blocks,
        goal_poses,
        spawn_region: spawn_region(),
        seed,
        calib: WorkspaceCalib::default(),
        split,
    }
}

fn cubes(color: [f64; 3], slots: Vec<GoalPose>) -> Vec<(BlockKind, GoalPose)> {
    slots.into_iter().map(|s| (cube(color), s)).collect()
}

/// The fourteen shipped tasks: six training-style and eight unseen-style.
pub fn shipped_tasks() -> Vec<TaskSpec> {
    use TaskSplit::*;
    let p = PITCH;
    let h = PITCH / 2.0;
    let plank = |length: f64| BlockKind {
        footprint: Footprint::Rect { length, width: SIDE },
        thickness: 0.02,
        color: BROWN,
    };
    vec![
        task("tower", Training, 1, cubes(RED, vec![slot(0.0, 0.0, 0), slot(0.0, 0.0, 1), slot(0.0, 0.0, 2)])),
        task("row", Training, 2, cubes(RED, vec![slot(0.0, -p, 0), slot(0.0, 0.0, 0), slot(0.0, p, 0)])),
        task(
            "square",
            Training,
            3,
            cubes(RED, vec![slot(-h, -h, 0), slot(-h, h, 0), slot(h, -h, 0), slot(h, h, 0)]),
        ),
        task(
            "t-shape",
            Training,
            4,
            cubes(RED, vec![slot(-h, -p, 0), slot(-h, 0.0, 0), slot(-h, p, 0), slot(h, 0.0, 0)]),
        ),
        task(
            "pyramid",
            Training,
            5,
            cubes(
                RED,
                vec![
                    slot(0.0, -p, 0),
                    slot(0.0, 0.0, 0),
                    slot(0.0, p, 0),
                    slot(0.0, -h, 1),
                    slot(0.0, h, 1),
                    slot(0.0, 0.0, 2),
                ],
            ),
        ),
        task(
            "palace",
            Training,
            6,
            cubes(
                RED,
                vec![
                    slot(0.0, -3.0 * h, 0),
                    slot(0.0, -h, 0),
                    slot(0.0, h, 0),
                    slot(0.0, 3.0 * h, 0),
                    slot(0.0, -p, 1),
                    slot(0.0, p, 1),
                ],
            ),
        ),
        task(
            "plane-t",
            Unseen,
            7,
            cubes(YELLOW, vec![slot(-p, -h, 0), slot(0.0, -h, 0), slot(p, -h, 0), slot(0.0, h, 0)]),
        ),
        task(
            "plane-square",
            Unseen,
            8,
            // Diamond-oriented cubes need the extra spacing.
            cubes(
                YELLOW,
                [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)]
                    .iter()
                    .map(|(a, b)| slot_rot(a * 0.0325, b * 0.0325, 0, FRAC_PI_4))
                    .collect(),
            ),
        ),
        task("stair-2", Unseen, 9, cubes(RED, vec![slot(0.0, -h, 0), slot(0.0, h, 0), slot(0.0, h, 1)])),
        task(
            "stair-3",
            Unseen,
            10,
            cubes(
                RED,
                vec![
                    slot(0.0, -p, 0),
                    slot(0.0, 0.0, 0),
                    slot(0.0, p, 0),
                    slot(0.0, 0.0, 1),
                    slot(0.0, p, 1),
                    slot(0.0, p, 2),
                ],
            ),
        ),
        task(
            "twin-tower",
            Unseen,
            11,
            [
                cubes(RED, vec![slot(0.0, -p, 0), slot(0.0, -p, 1), slot(0.0, -p, 2)]),
                cubes(BLUE, vec![slot(0.0, p, 0), slot(0.0, p, 1), slot(0.0, p, 2)]),
            ]
            .concat(),
        ),
        task(
            "rectangle",
            Unseen,
            12,
            cubes(
                RED,
                vec![
                    slot(-h, -p, 0),
                    slot(-h, 0.0, 0),
                    slot(-h, p, 0),
                    slot(h, -p, 0),
                    slot(h, 0.0, 0),
                    slot(h, p, 0),
                ],
            ),
        ),
        {
            // Three short planks along x, two long planks across them, a cube on top.
            let base = plank(0.09);
            let deck = plank(0.14);
            let mut parts = vec![
                (base, slot(0.0, -p, 0)),
                (base, slot(0.0, 0.0, 0)),
                (base, slot(0.0, p, 0)),
            ];
            for dx in [-h, h] {
                parts.push((
                    deck,
                    GoalPose {
                        pose: PoseSE2::new(ANCHOR.0 + dx, ANCHOR.1, FRAC_PI_2),
                        z: 0.02,
                    },
                ));
            }
            parts.push((
                cube(RED),
                GoalPose {
                    pose: PoseSE2::new(ANCHOR.0, ANCHOR.1, 0.0),
                    z: 0.04,
                },
            ));
            task("pallet", Unseen, 13, parts)
        },
        {
            // A 2x2 footing of cubes carrying two beams.
            let beam = BlockKind {
                footprint: Footprint::Rect {
                    length: 0.09,
                    width: SIDE,
                },
                thickness: THICK,
                color: BLUE,
            };
            let mut parts = cubes(RED, vec![slot(-h, -h, 0), slot(-h, h, 0), slot(h, -h, 0), slot(h, h, 0)]);
            for dx in [-h, h] {
                parts.push((beam, slot_rot(dx, 0.0, 1, FRAC_PI_2)));
            }
            task("building", Unseen, 14, parts)
        },
    ]
}

pub fn task_by_name(name: &str) -> Result<TaskSpec> {
    shipped_tasks()
        .into_iter()
        .find(|t| t.name == name)
        .ok_or_else(|| Error::UnknownTask(name.to_string()))
}

pub fn task_names() -> Vec<String> {
    shipped_tasks().into_iter().map(|t| t.name).collect()
}
