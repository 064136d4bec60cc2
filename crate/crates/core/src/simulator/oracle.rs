//! Scripted expert and random perturbation actions.

use std::f64::consts::TAU;

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::block::BlockState;
use super::task::{Region, MAX_SPAWN_ATTEMPTS, SPAWN_CLEARANCE};
use super::world::{PickPlaceAction, SuccessTolerance, WorldState};
use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, PoseSE2};

/// Grid step used when searching for a parking spot for an obstructing block.
const PARK_STEP: f64 = 0.01;

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Action that picks block `i` at its center and leaves it at `target`.
fn move_to(world: &WorldState, i: usize, target: PoseSE2) -> PickPlaceAction {
    let b = &world.blocks[i];
    PickPlaceAction::new(
        PoseSE2::new(b.pose.x, b.pose.y, 0.0),
        PoseSE2::new(target.x, target.y, normalize_angle(target.theta - b.pose.theta)),
    )
}

/// Block `i` can be picked at its center.
fn pickable(world: &WorldState, i: usize) -> bool {
    world.topmost_at(world.blocks[i].center()) == Some(i)
}

/// The scripted expert: fills the lowest unfilled goal slot with the nearest matching
/// free block. Blocks sitting in the way of that slot are either used for it (same
/// kind) or parked elsewhere first.
pub fn oracle_policy(world: &WorldState, goal: &WorldState) -> Result<PickPlaceAction> {
    let tol = SuccessTolerance::default();
    let (slot_of_block, block_of_slot) = world.goal_assignment(goal, &tol)?;
    let mut open: Vec<usize> = (0..goal.blocks.len()).filter(|&s| block_of_slot[s].is_none()).collect();
    if open.is_empty() {
        return Err(Error::AlreadySolved);
    }
    open.sort_by(|&a, &b| goal.blocks[a].z.total_cmp(&goal.blocks[b].z).then(a.cmp(&b)));

    for &s in &open {
        let target = goal.blocks[s];
        let obstructors: Vec<usize> = (0..world.blocks.len())
            .filter(|&i| {
                let b = &world.blocks[i];
                slot_of_block[i].is_none() && b.top() > target.z + 1e-6 && b.footprint_overlaps(&target)
            })
            .collect();
        if !obstructors.is_empty() {
            let reuse = obstructors
                .iter()
                .copied()
                .filter(|&i| world.blocks[i].kind == target.kind && pickable(world, i))
                .min_by(|&a, &b| {
                    distance(world.blocks[a].center(), target.center())
                        .total_cmp(&distance(world.blocks[b].center(), target.center()))
                        .then(a.cmp(&b))
                });
            if let Some(i) = reuse {
                return Ok(move_to(world, i, target.pose));
            }
            let top = obstructors
                .iter()
                .filter_map(|&i| world.topmost_at(world.blocks[i].center()))
                .find(|&i| slot_of_block[i].is_none());
            if let Some(i) = top {
                if let Some(spot) = parking_spot(world, goal, i) {
                    return Ok(move_to(world, i, spot));
                }
            }
            continue;
        }

        let mut probe = target;
        probe.z = 0.0;
        if (world.landing_z(&probe, None) - target.z).abs() > tol.z / 2.0 {
            continue;
        }
        let candidates: Vec<usize> = (0..world.blocks.len())
            .filter(|&i| {
                slot_of_block[i].is_none() && world.blocks[i].kind == target.kind && pickable(world, i)
            })
            .collect();
        let free: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|&i| world.blocks_on(i).next().is_none())
            .collect();
        let pool = if free.is_empty() { &candidates } else { &free };
        let best = pool.iter().copied().min_by(|&a, &b| {
            distance(world.blocks[a].center(), target.center())
                .total_cmp(&distance(world.blocks[b].center(), target.center()))
                .then(a.cmp(&b))
        });
        if let Some(i) = best {
            return Ok(move_to(world, i, target.pose));
        }
    }
    Err(Error::NoLegalMove(format!("{} goal slots remain unreachable", open.len())))
}

/// Nearest free table pose for block `i`, clear of every other block and every goal slot.
fn parking_spot(world: &WorldState, goal: &WorldState, i: usize) -> Option<PoseSE2> {
    let b = world.blocks[i];
    let area = Region::of_workspace(&world.calib).shrink(0.005);
    let (ex, ey) = world.calib.extent();
    let nx = (ex / PARK_STEP) as usize;
    let ny = (ey / PARK_STEP) as usize;
    let mut best: Option<(f64, PoseSE2)> = None;
    for ix in 0..=nx {
        for iy in 0..=ny {
            let pose = PoseSE2::new(
                world.calib.origin.0 + ix as f64 * PARK_STEP,
                world.calib.origin.1 + iy as f64 * PARK_STEP,
                b.pose.theta,
            );
            let candidate = BlockState { pose, z: 0.0, ..b };
            if !area.contains_block(&candidate) {
                continue;
            }
            let clear = world
                .blocks
                .iter()
                .enumerate()
                .all(|(j, o)| j == i || o.separation(&candidate) >= SPAWN_CLEARANCE)
                && goal.blocks.iter().all(|g| g.separation(&candidate) >= SPAWN_CLEARANCE);
            if !clear {
                continue;
            }
            let d = distance(pose.position(), b.center());
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, pose));
            }
        }
    }
    best.map(|(_, p)| p)
}

/// Picks a uniformly chosen free block at its center and places it at a uniformly
/// sampled collision-free table pose.
pub fn sample_random_action(world: &WorldState, seed: u64) -> Result<PickPlaceAction> {
    random_action(world, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn random_action<R: Rng>(world: &WorldState, rng: &mut R) -> Result<PickPlaceAction> {
    let candidates: Vec<usize> = (0..world.blocks.len()).filter(|&i| pickable(world, i)).collect();
    if candidates.is_empty() {
        return Err(Error::NoBlocks);
    }
    let i = candidates[rng.random_range(0..candidates.len())];
    let b = world.blocks[i];
    let area = Region::of_workspace(&world.calib);
    for _ in 0..MAX_SPAWN_ATTEMPTS {
        let pose = PoseSE2::new(
            rng.random_range(area.x_min..area.x_max),
            rng.random_range(area.y_min..area.y_max),
            rng.random_range(0.0..TAU),
        );
        let candidate = BlockState { pose, z: 0.0, ..b };
        if area.contains_block(&candidate)
            && world
                .blocks
                .iter()
                .enumerate()
                .all(|(j, o)| j == i || o.separation(&candidate) >= SPAWN_CLEARANCE)
        {
            return Ok(move_to(world, i, pose));
        }
    }
    Err(Error::Spawn {
        block: b.id,
        attempts: MAX_SPAWN_ATTEMPTS,
    })
}
