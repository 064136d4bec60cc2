use super::ForesightPredictor;
use crate::observation::{build_place_patch, object_region, Observation};
use crate::simulator::{PickPlaceAction, TABLE_RGB};

/// Analytic "cut, rotate, paste" foresight.
///
/// 1. The object under the pick pixel is the connected set of pixels inside the pick
///    square standing more than `eps_h` above the square's boundary-median height.
/// 2. Those pixels are cleared to the table color at the support height.
/// 3. The object's color and relative height are rotated by `Δθ` about the pick pixel,
///    cropped, and pasted at the place pixel.
/// 4. The pasted object rests on the highest surface under its new footprint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricPredictor {
    pub mask_side: usize,
    pub eps_h: f64,
}

impl Default for GeometricPredictor {
    fn default() -> Self {
        Self {
            mask_side: 65,
            eps_h: 0.002,
        }
    }
}

impl GeometricPredictor {
    pub fn new(mask_side: usize) -> Self {
        Self {
            mask_side,
            ..Self::default()
        }
    }

    pub fn geometric_predict(&self, o: &Observation, a: &PickPlaceAction) -> Observation {
        let calib = o.calib();
        let (Ok(pick), Ok(place)) = (calib.world_to_pixel(&a.pick), calib.world_to_pixel(&a.place)) else {
            return o.clone();
        };
        let Some(region) = object_region(o, (pick.u, pick.v), self.mask_side, self.eps_h) else {
            return o.clone();
        };
        let relative = region.relative_raster(o);
        let coverage = region.coverage_raster(calib);

        let mut out = o.clone();
        for &(u, v) in &region.pixels {
            out.set(u, v, [TABLE_RGB[0], TABLE_RGB[1], TABLE_RGB[2], region.support]);
        }

        let dtheta = a.delta_theta();
        let moved = build_place_patch(&relative, pick, place, dtheta, self.mask_side)
            .expect("pixels checked above");
        let moved_cov = build_place_patch(&coverage, pick, place, dtheta, self.mask_side)
            .expect("pixels checked above");

        let footprint: Vec<usize> = moved_cov
            .patch
            .pixels()
            .iter()
            .enumerate()
            .filter(|(_, c)| c[3] >= 0.5)
            .map(|(i, _)| i)
            .collect();
        let support = footprint
            .iter()
            .map(|&i| out.pixels()[i][3])
            .fold(0.0, f64::max);
        let src = moved.patch.pixels();
        let cov = moved_cov.patch.pixels();
        let dst = out.pixels_mut();
        for &i in &footprint {
            let c = cov[i][3];
            let p = src[i];
            dst[i] = [p[0] / c, p[1] / c, p[2] / c, support + p[3] / c];
        }
        out
    }
}

impl ForesightPredictor for GeometricPredictor {
    fn predict(&self, o: &Observation, a: &PickPlaceAction) -> Observation {
        self.geometric_predict(o, a)
    }

    fn name(&self) -> &'static str {
        "geometric"
    }
}
