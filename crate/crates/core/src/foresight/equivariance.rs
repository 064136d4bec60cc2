//! SE(2) augmentation and the equivariance check `f(g·o, g⊙a) = g·f(o, a)`.

use std::f64::consts::TAU;
use std::io::Write;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ForesightPredictor, TransitionSample};
use crate::error::Result;
use crate::geometry::{bin_to_angle, PoseSE2, WorkspaceCalib};
use crate::observation::{height_scale, l1_distance_masked, warp_observation, warp_with_validity, ChannelWeights, Observation};
use crate::simulator::{BlockKind, BlockState, Footprint, PickPlaceAction, WorldState};

/// `(g·before, g⊙action, g·after)`.
pub fn augment_transition(s: &TransitionSample, g: &PoseSE2) -> TransitionSample {
    TransitionSample {
        before: warp_observation(&s.before, g),
        action: s.action.transformed(g),
        after: warp_observation(&s.after, g),
    }
}

/// Unit-weight mean L1 between `f(g·o, g⊙a)` and `g·f(o, a)`, over pixels that sampled
/// inside the source raster under both warps.
pub fn equivariance_residual(
    f: &dyn ForesightPredictor,
    o: &Observation,
    a: &PickPlaceAction,
    g: &PoseSE2,
) -> Result<f64> {
    let (moved_o, valid_in) = warp_with_validity(o, g);
    let lhs = f.predict(&moved_o, &a.transformed(g));
    let (rhs, valid_out) = warp_with_validity(&f.predict(o, a), g);
    let mask: Vec<bool> = valid_in.iter().zip(&valid_out).map(|(a, b)| *a && *b).collect();
    l1_distance_masked(&lhs, &rhs, &ChannelWeights::unit(), height_scale(o), Some(&mask))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    /// Whole-pixel translation.
    Translation,
    /// Rotation by a whole number of rotation bins about the workspace center.
    Rotation,
}

impl TransformKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TransformKind::Translation => "translation",
            TransformKind::Rotation => "rotation",
        }
    }
}

/// A single-block scene, an action that moves the block, and a transform.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivarianceCase {
    pub seed: u64,
    pub kind: TransformKind,
    pub world: WorldState,
    pub action: PickPlaceAction,
    pub g: PoseSE2,
}

const BLOCK_RGB: [f64; 3] = [0.85, 0.2, 0.2];

impl EquivarianceCase {
    /// Content stays within 0.17 m of the workspace center, so rotations about the
    /// center and shifts of up to 20 px keep it in view.
    pub fn random(seed: u64, kind: TransformKind, calib: WorkspaceCalib) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let footprint = match rng.random_range(0..3) {
            0 => Footprint::Square { side: 0.04 },
            1 => Footprint::Rect {
                length: 0.07,
                width: 0.035,
            },
            _ => Footprint::Circle { radius: 0.022 },
        };
        let kind_block = BlockKind {
            footprint,
            thickness: 0.03,
            color: BLOCK_RGB,
        };
        let (cx, cy) = calib.center();
        let polar = |rng: &mut ChaCha8Rng, r_max: f64| {
            let r = r_max * rng.random_range(0.0f64..1.0).sqrt();
            let phi = rng.random_range(0.0..TAU);
            (r * phi.cos(), r * phi.sin())
        };
        let (bx, by) = polar(&mut rng, 0.06);
        let block = BlockState {
            id: 0,
            kind: kind_block,
            pose: PoseSE2::new(cx + bx, cy + by, rng.random_range(0.0..TAU)),
            z: 0.0,
        };
        let (dx, dy) = polar(&mut rng, 0.07);
        let bins = calib.rotation_bins;
        let action = PickPlaceAction::new(
            PoseSE2::new(block.pose.x, block.pose.y, 0.0),
            PoseSE2::new(
                block.pose.x + dx,
                block.pose.y + dy,
                bin_to_angle(rng.random_range(0..bins), bins),
            ),
        );
        let g = match kind {
            TransformKind::Translation => {
                let mut shift = || rng.random_range(-20i64..=20) as f64 * calib.pixel_pitch;
                PoseSE2::translation(shift(), shift())
            }
            TransformKind::Rotation => {
                PoseSE2::rotation_about(cx, cy, bin_to_angle(rng.random_range(1..bins), bins))
            }
        };
        Self {
            seed,
            kind,
            world: WorldState::new(vec![block], calib),
            action,
            g,
        }
    }

    pub fn residual(&self, f: &dyn ForesightPredictor) -> Result<f64> {
        f.sync(&self.world);
        equivariance_residual(f, &self.world.render(), &self.action, &self.g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivarianceRecord {
    pub seed: u64,
    pub kind: TransformKind,
    pub g: PoseSE2,
    pub residual: f64,
}

/// Runs `n` cases, alternating translations (even index) and rotations (odd index).
pub fn run_equivariance_harness(
    f: &dyn ForesightPredictor,
    n: usize,
    seed: u64,
    calib: WorkspaceCalib,
) -> Result<Vec<EquivarianceRecord>> {
    (0..n)
        .map(|i| {
            let kind = if i % 2 == 0 {
                TransformKind::Translation
            } else {
                TransformKind::Rotation
            };
            let case = EquivarianceCase::random(crate::simulator::mix_seed(seed, i as u64), kind, calib);
            Ok(EquivarianceRecord {
                seed: case.seed,
                kind,
                g: case.g,
                residual: case.residual(f)?,
            })
        })
        .collect()
}

pub fn write_residual_csv<W: Write>(records: &[EquivarianceRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "seed,kind,g_x,g_y,g_theta,residual")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.seed,
            r.kind.as_str(),
            r.g.x,
            r.g.y,
            r.g.theta,
            r.residual
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foresight::GeometricPredictor;

    fn sample(seed: u64) -> TransitionSample {
        let case = EquivarianceCase::random(seed, TransformKind::Rotation, WorkspaceCalib::default());
        TransitionSample {
            before: case.world.render(),
            action: case.action,
            after: case.world.apply_action(&case.action).render(),
        }
    }

    #[test]
    fn identity_augmentation_is_a_no_op() {
        let s = sample(1);
        assert_eq!(augment_transition(&s, &PoseSE2::IDENTITY), s);
    }

    #[test]
    fn integer_translation_augmentation_shifts_everything() {
        let s = sample(2);
        let calib = *s.before.calib();
        let g = PoseSE2::translation(3.0 * calib.pixel_pitch, -5.0 * calib.pixel_pitch);
        let t = augment_transition(&s, &g);
        for (u, v) in [(80, 80), (60, 100), (100, 70)] {
            assert_eq!(t.before.get(u + 3, v - 5), s.before.get(u, v));
            assert_eq!(t.after.get(u + 3, v - 5), s.after.get(u, v));
        }
        assert!((t.action.pick.x - s.action.pick.x - g.x).abs() < 1e-12);
        assert!((t.action.place.y - s.action.place.y - g.y).abs() < 1e-12);
        assert_eq!(t.action.delta_theta(), s.action.delta_theta());
    }

    #[test]
    fn augmentation_round_trip() {
        let s = sample(3);
        let (cx, cy) = s.before.calib().center();
        let g = PoseSE2::rotation_about(cx, cy, 0.61).compose(&PoseSE2::translation(0.013, -0.007));
        let back = augment_transition(&augment_transition(&s, &g), &g.inverse());
        // Pixels whose round trip never touched zero fill.
        let calib = *s.before.calib();
        let (_, fwd_valid) = warp_with_validity(&s.before, &g);
        let fwd = Observation::from_pixels(
            calib,
            fwd_valid.iter().map(|&b| [if b { 1.0 } else { 0.0 }; 4]).collect(),
        )
        .unwrap();
        let (ones, back_valid) = warp_with_validity(&fwd, &g.inverse());
        let mask: Vec<bool> = ones
            .pixels()
            .iter()
            .zip(&back_valid)
            .map(|(p, &b)| b && p[0] > 1.0 - 1e-9)
            .collect();
        let w = ChannelWeights::unit();
        assert!(l1_distance_masked(&back.before, &s.before, &w, 1.0, Some(&mask)).unwrap() < 2e-2);
        assert!(l1_distance_masked(&back.after, &s.after, &w, 1.0, Some(&mask)).unwrap() < 2e-2);
        assert!(back.action.pick.approx_eq(&s.action.pick, 1e-9));
        assert!(back.action.place.approx_eq(&s.action.place, 1e-9));
    }

    #[test]
    fn identity_residual_is_zero() {
        let case = EquivarianceCase::random(4, TransformKind::Rotation, WorkspaceCalib::default());
        let o = case.world.render();
        let r = equivariance_residual(&GeometricPredictor::default(), &o, &case.action, &PoseSE2::IDENTITY).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn integer_translations_are_exactly_equivariant() {
        let f = GeometricPredictor::default();
        for seed in 0..20 {
            let case = EquivarianceCase::random(seed, TransformKind::Translation, WorkspaceCalib::default());
            assert_eq!(case.residual(&f).unwrap(), 0.0, "seed {seed}");
        }
    }

    #[test]
    fn bin_rotations_have_small_residual() {
        let f = GeometricPredictor::default();
        let records = run_equivariance_harness(&f, 40, 11, WorkspaceCalib::default()).unwrap();
        let max_rot = records
            .iter()
            .filter(|r| r.kind == TransformKind::Rotation)
            .map(|r| r.residual)
            .fold(0.0, f64::max);
        assert!(max_rot <= 0.05, "{max_rot}");
    }

    #[test]
    fn csv_has_header_and_rows() {
        let f = GeometricPredictor::default();
        let records = run_equivariance_harness(&f, 4, 0, WorkspaceCalib::default()).unwrap();
        let mut buf = Vec::new();
        write_residual_csv(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "seed,kind,g_x,g_y,g_theta,residual");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].contains(",translation,"));
        assert!(lines[2].contains(",rotation,"));
    }
}
