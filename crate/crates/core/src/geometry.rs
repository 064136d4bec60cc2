//! Planar rigid poses and the mapping between workspace meters and raster pixels.
//!
//! World `x` runs along raster rows (`u`) and world `y` along columns (`v`), both with
//! positive scale, so a rotation by `theta` in the world is the same rotation in
//! `(u, v)` pixel coordinates.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of discrete placement orientations.
pub const DEFAULT_ROTATION_BINS: usize = 36;

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Minimal absolute difference between two angles on the circle, in `[0, π]`.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = normalize_angle(a - b);
    d.min(TAU - d)
}

/// Minimal angular distance after folding by a symmetry period (e.g. `π/2` for squares).
pub fn angle_distance_mod(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

pub fn bin_to_angle(bin: usize, bins: usize) -> f64 {
    TAU * bin as f64 / bins as f64
}

/// Nearest rotation bin for an angle.
pub fn angle_to_bin(theta: f64, bins: usize) -> usize {
    let width = TAU / bins as f64;
    let b = (normalize_angle(theta) / width).round() as usize;
    b % bins
}

/// An element of SE(2): rotation `theta` followed by translation `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSE2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Default for PoseSE2 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl PoseSE2 {
    pub const IDENTITY: PoseSE2 = PoseSE2 {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };

    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn translation(x: f64, y: f64) -> Self {
        Self::new(x, y, 0.0)
    }

    pub fn rotation(theta: f64) -> Self {
        Self::new(0.0, 0.0, theta)
    }

    /// Rotation by `theta` about the fixed point `(cx, cy)`.
    pub fn rotation_about(cx: f64, cy: f64, theta: f64) -> Self {
        Self::translation(cx, cy)
            .compose(&Self::rotation(theta))
            .compose(&Self::translation(-cx, -cy))
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    /// `self ∘ other = (R1 R2, R1 q2 + q1)`.
    pub fn compose(&self, other: &PoseSE2) -> PoseSE2 {
        let (s, c) = self.theta.sin_cos();
        PoseSE2::new(
            c * other.x - s * other.y + self.x,
            s * other.x + c * other.y + self.y,
            self.theta + other.theta,
        )
    }

    pub fn inverse(&self) -> PoseSE2 {
        let (s, c) = self.theta.sin_cos();
        PoseSE2::new(
            -(c * self.x + s * self.y),
            -(-s * self.x + c * self.y),
            -self.theta,
        )
    }

    /// `R(θ) p + q`.
    pub fn apply(&self, p: (f64, f64)) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (c * p.0 - s * p.1 + self.x, s * p.0 + c * p.1 + self.y)
    }

    /// `R(θ)⁻¹ (p − q)`.
    pub fn inverse_apply(&self, p: (f64, f64)) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let (dx, dy) = (p.0 - self.x, p.1 - self.y);
        (c * dx + s * dy, -s * dx + c * dy)
    }

    /// Homogeneous 3x3 matrix, row-major.
    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let (s, c) = self.theta.sin_cos();
        [[c, -s, self.x], [s, c, self.y], [0.0, 0.0, 1.0]]
    }

    pub fn approx_eq(&self, other: &PoseSE2, tol: f64) -> bool {
        (self.x - other.x).abs() <= tol
            && (self.y - other.y).abs() <= tol
            && angle_distance(self.theta, other.theta) <= tol
    }
}

/// A raster cell plus a rotation bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PixelPose {
    pub u: usize,
    pub v: usize,
    pub rot_bin: usize,
}

impl PixelPose {
    pub fn new(u: usize, v: usize, rot_bin: usize) -> Self {
        Self { u, v, rot_bin }
    }
}

/// Maps the workspace plane onto an `height x width` raster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceCalib {
    /// World position of the outer corner of pixel (0, 0).
    pub origin: (f64, f64),
    /// Meters per pixel.
    pub pixel_pitch: f64,
    pub height: usize,
    pub width: usize,
    pub rotation_bins: usize,
}

impl Default for WorkspaceCalib {
    fn default() -> Self {
        Self::square(0.5, 160)
    }
}

impl WorkspaceCalib {
    /// A square workspace of `extent` meters rendered at `pixels` per side.
    pub fn square(extent: f64, pixels: usize) -> Self {
        Self {
            origin: (0.0, 0.0),
            pixel_pitch: extent / pixels as f64,
            height: pixels,
            width: pixels,
            rotation_bins: DEFAULT_ROTATION_BINS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pixel_pitch > 0.0) || !self.pixel_pitch.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "pixel pitch must be positive, got {}",
                self.pixel_pitch
            )));
        }
        if self.height == 0 || self.width == 0 || self.rotation_bins == 0 {
            return Err(Error::InvalidConfig("empty raster or rotation set".into()));
        }
        Ok(())
    }

    pub fn extent(&self) -> (f64, f64) {
        (
            self.height as f64 * self.pixel_pitch,
            self.width as f64 * self.pixel_pitch,
        )
    }

    pub fn center(&self) -> (f64, f64) {
        let (ex, ey) = self.extent();
        (self.origin.0 + ex / 2.0, self.origin.1 + ey / 2.0)
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn in_bounds(&self, u: i64, v: i64) -> bool {
        u >= 0 && v >= 0 && (u as usize) < self.height && (v as usize) < self.width
    }

    fn check_bounds(&self, u: i64, v: i64) -> Result<()> {
        if self.in_bounds(u, v) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                u,
                v,
                height: self.height,
                width: self.width,
            })
        }
    }

    /// World position of a pixel center.
    pub fn pixel_center(&self, u: usize, v: usize) -> (f64, f64) {
        (
            self.origin.0 + (u as f64 + 0.5) * self.pixel_pitch,
            self.origin.1 + (v as f64 + 0.5) * self.pixel_pitch,
        )
    }

    /// Continuous pixel coordinates of a world point; integers land on pixel centers.
    pub fn world_to_continuous(&self, p: (f64, f64)) -> (f64, f64) {
        (
            (p.0 - self.origin.0) / self.pixel_pitch - 0.5,
            (p.1 - self.origin.1) / self.pixel_pitch - 0.5,
        )
    }

    pub fn pixel_to_world(&self, p: PixelPose) -> Result<PoseSE2> {
        self.check_bounds(p.u as i64, p.v as i64)?;
        let (x, y) = self.pixel_center(p.u, p.v);
        Ok(PoseSE2::new(x, y, bin_to_angle(p.rot_bin, self.rotation_bins)))
    }

    /// Nearest pixel center, ties toward the lower index; angle to the nearest bin.
    pub fn world_to_pixel(&self, pose: &PoseSE2) -> Result<PixelPose> {
        let (fu, fv) = self.world_to_continuous(pose.position());
        let u = nearest_index(fu);
        let v = nearest_index(fv);
        self.check_bounds(u, v)?;
        Ok(PixelPose::new(
            u as usize,
            v as usize,
            angle_to_bin(pose.theta, self.rotation_bins),
        ))
    }
}

/// Rounds to nearest integer with exact halves going down.
fn nearest_index(f: f64) -> i64 {
    (f - 0.5).ceil() as i64
}
