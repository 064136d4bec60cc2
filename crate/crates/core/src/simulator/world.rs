use serde::{Deserialize, Serialize};

use super::block::BlockState;
use crate::error::{Error, Result};
use crate::geometry::{angle_distance_mod, PoseSE2, WorkspaceCalib};
use crate::observation::Observation;

pub const TABLE_RGB: [f64; 3] = [0.4, 0.4, 0.4];

/// A pick pose and a place pose. Planner-issued actions always carry `pick.theta == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PickPlaceAction {
    pub pick: PoseSE2,
    pub place: PoseSE2,
}

impl PickPlaceAction {
    pub fn new(pick: PoseSE2, place: PoseSE2) -> Self {
        Self { pick, place }
    }

    /// Rotation applied to the picked object.
    pub fn delta_theta(&self) -> f64 {
        self.place.theta - self.pick.theta
    }

    /// `(g ∘ T_pick, g ∘ T_place)`.
    pub fn transformed(&self, g: &PoseSE2) -> Self {
        Self {
            pick: g.compose(&self.pick),
            place: g.compose(&self.place),
        }
    }
}

/// Per-block success thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessTolerance {
    /// Planar translation, meters.
    pub translation: f64,
    /// Bottom-face height, meters.
    pub z: f64,
    /// Rotation about z, radians, folded by the footprint's symmetry.
    pub rotation: f64,
}

impl Default for SuccessTolerance {
    fn default() -> Self {
        Self {
            translation: 0.01,
            z: 0.005,
            rotation: 15f64.to_radians(),
        }
    }
}

impl SuccessTolerance {
    pub fn block_matches(&self, b: &BlockState, goal: &BlockState) -> bool {
        if b.kind != goal.kind {
            return false;
        }
        let (dx, dy) = (b.pose.x - goal.pose.x, b.pose.y - goal.pose.y);
        let rot_ok = match b.kind.footprint.symmetry_period() {
            Some(period) => angle_distance_mod(b.pose.theta, goal.pose.theta, period) < self.rotation,
            None => true,
        };
        dx.hypot(dy) < self.translation && (b.z - goal.z).abs() < self.z && rot_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub blocks: Vec<BlockState>,
    pub calib: WorkspaceCalib,
    /// Set once a step leaves interpenetrating or unsupported blocks behind.
    #[serde(default)]
    pub unstable: bool,
}

impl WorldState {
    pub fn new(blocks: Vec<BlockState>, calib: WorkspaceCalib) -> Self {
        Self {
            blocks,
            calib,
            unstable: false,
        }
    }

    /// Index of the block whose top face is highest at `p`.
    pub fn topmost_at(&self, p: (f64, f64)) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, b) in self.blocks.iter().enumerate() {
            if b.contains(p) && best.is_none_or(|j| b.top() > self.blocks[j].top()) {
                best = Some(i);
            }
        }
        best
    }

    /// Height the block would rest at: the highest top among other blocks under it.
    pub fn landing_z(&self, block: &BlockState, ignore: Option<usize>) -> f64 {
        self.blocks
            .iter()
            .enumerate()
            .filter(|(i, other)| Some(*i) != ignore && block.footprint_overlaps(other))
            .map(|(_, other)| other.top())
            .fold(0.0, f64::max)
    }

    /// Blocks resting on block `i`.
    pub fn blocks_on(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let base = self.blocks[i];
        self.blocks.iter().enumerate().filter_map(move |(j, b)| {
            (j != i && (b.z - base.top()).abs() < 1e-6 && b.footprint_overlaps(&base)).then_some(j)
        })
    }

    pub fn has_interpenetration(&self) -> bool {
        let n = self.blocks.len();
        (0..n).any(|i| {
            (i + 1..n).any(|j| {
                let (a, b) = (&self.blocks[i], &self.blocks[j]);
                a.z_overlaps(b) && a.footprint_overlaps(b)
            })
        })
    }

    /// Top-down view: per pixel center, the color and top height of the highest block
    /// covering it, or the bare table.
    pub fn render(&self) -> Observation {
        let calib = self.calib;
        let mut o = Observation::filled(calib, [TABLE_RGB[0], TABLE_RGB[1], TABLE_RGB[2], 0.0]);
        let mut order: Vec<&BlockState> = self.blocks.iter().collect();
        // Paint bottom-up; equal tops resolve to the later block in the list.
        order.sort_by(|a, b| a.top().total_cmp(&b.top()));
        for b in order {
            let (x0, x1, y0, y1) = b.bounds();
            let (u0, v0) = calib.world_to_continuous((x0, y0));
            let (u1, v1) = calib.world_to_continuous((x1, y1));
            let u_lo = u0.floor().max(0.0) as usize;
            let v_lo = v0.floor().max(0.0) as usize;
            let u_hi = (u1.ceil() as i64).min(calib.height as i64 - 1);
            let v_hi = (v1.ceil() as i64).min(calib.width as i64 - 1);
            if u_hi < 0 || v_hi < 0 {
                continue;
            }
            for u in u_lo..=u_hi as usize {
                for v in v_lo..=v_hi as usize {
                    if b.contains(calib.pixel_center(u, v)) {
                        let c = b.kind.color;
                        o.set(u, v, [c[0], c[1], c[2], b.top()]);
                    }
                }
            }
        }
        o
    }

    /// Executes a suction pick at `a.pick` and places at `a.place`.
    ///
    /// The topmost block under the pick point is grasped there, rotated by
    /// `place.theta - pick.theta` about the grasp point and carried so the grasp point
    /// lands on the place position. It comes to rest on the highest block beneath its new
    /// footprint. Picking bare table is a no-op.
    pub fn apply_action(&self, a: &PickPlaceAction) -> WorldState {
        let grasp = a.pick.position();
        let Some(i) = self.topmost_at(grasp) else {
            return self.clone();
        };
        let mut next = self.clone();
        if self.blocks_on(i).next().is_some() {
            next.unstable = true;
        }
        let block = self.blocks[i];
        let dtheta = a.delta_theta();
        let offset = PoseSE2::rotation(dtheta).apply((block.pose.x - grasp.0, block.pose.y - grasp.1));
        let mut moved = block;
        moved.pose = PoseSE2::new(
            a.place.x + offset.0,
            a.place.y + offset.1,
            block.pose.theta + dtheta,
        );
        moved.z = self.landing_z(&moved, Some(i));
        next.blocks[i] = moved;
        if next.has_interpenetration() {
            next.unstable = true;
        }
        next
    }

    pub(crate) fn same_multiset(&self, goal: &WorldState) -> bool {
        let key = |w: &WorldState| {
            let mut k: Vec<Vec<u64>> = w.blocks.iter().map(|b| b.kind.sort_key()).collect();
            k.sort();
            k
        };
        key(self) == key(goal)
    }

    /// Maximum assignment of blocks to goal slots under the per-block thresholds.
    /// Returns `slot_of_block` and `block_of_slot`.
    pub fn goal_assignment(
        &self,
        goal: &WorldState,
        tol: &SuccessTolerance,
    ) -> Result<(Vec<Option<usize>>, Vec<Option<usize>>)> {
        if !self.same_multiset(goal) {
            return Err(Error::BlockMismatch);
        }
        let n = self.blocks.len();
        let adj: Vec<Vec<usize>> = self
            .blocks
            .iter()
            .map(|b| (0..n).filter(|&s| tol.block_matches(b, &goal.blocks[s])).collect())
            .collect();
        let mut block_of_slot: Vec<Option<usize>> = vec![None; n];
        for b in 0..n {
            let mut seen = vec![false; n];
            augment(b, &adj, &mut seen, &mut block_of_slot);
        }
        let mut slot_of_block = vec![None; n];
        for (s, b) in block_of_slot.iter().enumerate() {
            if let Some(b) = b {
                slot_of_block[*b] = Some(s);
            }
        }
        Ok((slot_of_block, block_of_slot))
    }

    pub fn placed_count(&self, goal: &WorldState, tol: &SuccessTolerance) -> Result<usize> {
        let (_, slots) = self.goal_assignment(goal, tol)?;
        Ok(slots.iter().filter(|s| s.is_some()).count())
    }
}

/// Kuhn's augmenting path step.
fn augment(b: usize, adj: &[Vec<usize>], seen: &mut [bool], block_of_slot: &mut [Option<usize>]) -> bool {
    for &s in &adj[b] {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        if block_of_slot[s].is_none_or(|other| augment(other, adj, seen, block_of_slot)) {
            block_of_slot[s] = Some(b);
            return true;
        }
    }
    false
}

/// True iff every block can be assigned to a distinct goal slot of the same kind within
/// the tolerances.
pub fn check_success(world: &WorldState, goal: &WorldState) -> Result<bool> {
    check_success_with(world, goal, &SuccessTolerance::default())
}

pub fn check_success_with(world: &WorldState, goal: &WorldState, tol: &SuccessTolerance) -> Result<bool> {
    Ok(world.placed_count(goal, tol)? == goal.blocks.len())
}

/// Fraction of blocks in their target poses under the best assignment.
pub fn rate_of_progress(world: &WorldState, goal: &WorldState) -> Result<f64> {
    if goal.blocks.is_empty() {
        return Ok(1.0);
    }
    Ok(world.placed_count(goal, &SuccessTolerance::default())? as f64 / goal.blocks.len() as f64)
}
