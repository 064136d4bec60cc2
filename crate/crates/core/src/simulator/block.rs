use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::PoseSE2;

/// Footprints closer than this (negative separation) count as overlapping.
pub const OVERLAP_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Footprint {
    Square { side: f64 },
    /// `length` along the block's local x axis.
    Rect { length: f64, width: f64 },
    Circle { radius: f64 },
}

impl Footprint {
    /// Period of the footprint's rotational symmetry; `None` for circles.
    pub fn symmetry_period(&self) -> Option<f64> {
        match self {
            Footprint::Square { .. } => Some(PI / 2.0),
            Footprint::Rect { length, width } if (length - width).abs() < 1e-12 => Some(PI / 2.0),
            Footprint::Rect { .. } => Some(PI),
            Footprint::Circle { .. } => None,
        }
    }

    fn half_extents(&self) -> Option<(f64, f64)> {
        match *self {
            Footprint::Square { side } => Some((side / 2.0, side / 2.0)),
            Footprint::Rect { length, width } => Some((length / 2.0, width / 2.0)),
            Footprint::Circle { .. } => None,
        }
    }

    /// Radius of the smallest circle around the center containing the footprint.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Footprint::Circle { radius } => radius,
            _ => {
                let (a, b) = self.half_extents().unwrap();
                a.hypot(b)
            }
        }
    }

    pub fn contains_local(&self, p: (f64, f64)) -> bool {
        match *self {
            Footprint::Circle { radius } => p.0 * p.0 + p.1 * p.1 <= radius * radius,
            _ => {
                let (a, b) = self.half_extents().unwrap();
                p.0.abs() <= a && p.1.abs() <= b
            }
        }
    }

    pub fn is_valid(&self) -> bool {
        let ok = |x: f64| x > 0.0 && x.is_finite();
        match *self {
            Footprint::Square { side } => ok(side),
            Footprint::Rect { length, width } => ok(length) && ok(width),
            Footprint::Circle { radius } => ok(radius),
        }
    }
}

/// The identity of a block for goal matching: shape, thickness and color.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockKind {
    pub footprint: Footprint,
    pub thickness: f64,
    pub color: [f64; 3],
}

impl BlockKind {
    pub fn square(side: f64, thickness: f64, color: [f64; 3]) -> Self {
        Self {
            footprint: Footprint::Square { side },
            thickness,
            color,
        }
    }

    /// Total order used to compare block multisets.
    pub(crate) fn sort_key(&self) -> Vec<u64> {
        let fp = match self.footprint {
            Footprint::Square { side } => [0.0, side, 0.0],
            Footprint::Rect { length, width } => [1.0, length, width],
            Footprint::Circle { radius } => [2.0, radius, 0.0],
        };
        fp.iter()
            .chain([self.thickness].iter())
            .chain(self.color.iter())
            .map(|f| f.to_bits())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockState {
    pub id: usize,
    #[serde(flatten)]
    pub kind: BlockKind,
    pub pose: PoseSE2,
    /// Height of the bottom face.
    pub z: f64,
}

impl BlockState {
    pub fn top(&self) -> f64 {
        self.z + self.kind.thickness
    }

    pub fn center(&self) -> (f64, f64) {
        self.pose.position()
    }

    pub fn contains(&self, p: (f64, f64)) -> bool {
        self.kind.footprint.contains_local(self.pose.inverse_apply(p))
    }

    pub fn corners(&self) -> Option<[(f64, f64); 4]> {
        let (a, b) = self.kind.footprint.half_extents()?;
        Some([(a, b), (-a, b), (-a, -b), (a, -b)].map(|c| self.pose.apply(c)))
    }

    /// Axis-aligned bounds `(x_min, x_max, y_min, y_max)` of the footprint.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        match self.corners() {
            Some(cs) => cs.iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
                |(a, b, c, d), p| (a.min(p.0), b.max(p.0), c.min(p.1), d.max(p.1)),
            ),
            None => {
                let r = self.kind.footprint.bounding_radius();
                let (x, y) = self.center();
                (x - r, x + r, y - r, y + r)
            }
        }
    }

    /// Lower bound on the planar gap between the two footprints; negative when they
    /// overlap.
    pub fn separation(&self, other: &BlockState) -> f64 {
        match (self.corners(), other.corners()) {
            (Some(a), Some(b)) => polygon_separation(&a, &b),
            (Some(_), None) => circle_box_separation(other, self),
            (None, Some(_)) => circle_box_separation(self, other),
            (None, None) => {
                let (ax, ay) = self.center();
                let (bx, by) = other.center();
                (ax - bx).hypot(ay - by)
                    - self.kind.footprint.bounding_radius()
                    - other.kind.footprint.bounding_radius()
            }
        }
    }

    pub fn footprint_overlaps(&self, other: &BlockState) -> bool {
        self.separation(other) < -OVERLAP_TOL
    }

    pub fn z_overlaps(&self, other: &BlockState) -> bool {
        self.z < other.top() - OVERLAP_TOL && other.z < self.top() - OVERLAP_TOL
    }
}

fn project(poly: &[(f64, f64); 4], axis: (f64, f64)) -> (f64, f64) {
    poly.iter()
        .map(|p| p.0 * axis.0 + p.1 * axis.1)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)))
}

/// Separating-axis gap: the largest interval gap over both boxes' edge normals.
fn polygon_separation(a: &[(f64, f64); 4], b: &[(f64, f64); 4]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for poly in [a, b] {
        for i in 0..2 {
            let (p, q) = (poly[i], poly[i + 1]);
            let (ex, ey) = (q.0 - p.0, q.1 - p.1);
            let len = ex.hypot(ey);
            let axis = (-ey / len, ex / len);
            let (a_lo, a_hi) = project(a, axis);
            let (b_lo, b_hi) = project(b, axis);
            best = best.max((b_lo - a_hi).max(a_lo - b_hi));
        }
    }
    best
}

fn circle_box_separation(circle: &BlockState, boxed: &BlockState) -> f64 {
    let r = circle.kind.footprint.bounding_radius();
    let (a, b) = boxed.kind.footprint.half_extents().expect("box footprint");
    let c = boxed.pose.inverse_apply(circle.center());
    let inside = c.0.abs() <= a && c.1.abs() <= b;
    if inside {
        -(r + (a - c.0.abs()).min(b - c.1.abs()))
    } else {
        let q = (c.0.clamp(-a, a), c.1.clamp(-b, b));
        (c.0 - q.0).hypot(c.1 - q.1) - r
    }
}
