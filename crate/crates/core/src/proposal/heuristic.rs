use rayon::prelude::*;

use super::{ActionValueMaps, Scorer};
use crate::error::{Error, Result};
use crate::geometry::bin_to_angle;
use crate::observation::{object_region, Observation};

/// Template-matching stand-in for a learned goal-conditioned scorer.
///
/// `Q_pick` is the box-blurred "surplus" (material present now that the goal does not
/// have there) masked to surplus pixels. `Q_place(·,·,r)` is the zero-mean normalized
/// cross-correlation between the picked object's height template, rotated by bin `r`, and
/// the goal "deficit" (goal height above current height), scaled by how well the
/// object's color matches the goal color under the candidate center and by how much of
/// the footprint it would complete.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicScorer {
    /// Height differences below this are noise, meters.
    pub eps_h: f64,
    /// Mean absolute RGB difference above which a covered pixel counts as the wrong block.
    pub color_tol: f64,
    pub blur_radius: usize,
    /// Side of the square searched for the picked object.
    pub template_side: usize,
    /// Extra pixels around the template's bounding box in the correlation window.
    pub margin: usize,
    /// Place values are scaled by `floor_weight + (1 - floor_weight) · c`, where `c` is
    /// the fraction of the footprint the object would fill up to goal height. Spots that
    /// need something underneath first are discounted.
    pub floor_weight: f64,
}

impl Default for HeuristicScorer {
    fn default() -> Self {
        Self {
            eps_h: 0.002,
            color_tol: 0.15,
            blur_radius: 6,
            template_side: 65,
            margin: 2,
            floor_weight: 0.2,
        }
    }
}

fn rgb_diff(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    ((a[0] - b[0]).abs() + (a[1] - b[1]).abs() + (a[2] - b[2]).abs()) / 3.0
}

/// Separable box blur with zero padding.
fn box_blur(src: &[f64], h: usize, w: usize, radius: usize) -> Vec<f64> {
    let r = radius as i64;
    let mut tmp = vec![0.0; h * w];
    for u in 0..h {
        let row = &src[u * w..(u + 1) * w];
        let mut acc: f64 = row[..=radius.min(w - 1)].iter().sum();
        for v in 0..w {
            tmp[u * w + v] = acc;
            let add = v as i64 + r + 1;
            let sub = v as i64 - r;
            if add < w as i64 {
                acc += row[add as usize];
            }
            if sub >= 0 {
                acc -= row[sub as usize];
            }
        }
    }
    let mut out = vec![0.0; h * w];
    for v in 0..w {
        let mut acc = 0.0;
        for u in 0..=(radius.min(h - 1)) {
            acc += tmp[u * w + v];
        }
        for u in 0..h {
            out[u * w + v] = acc;
            let add = u as i64 + r + 1;
            let sub = u as i64 - r;
            if add < h as i64 {
                acc += tmp[add as usize * w + v];
            }
            if sub >= 0 {
                acc -= tmp[sub as usize * w + v];
            }
        }
    }
    out
}

/// Summed-area table with a zero row and column in front.
struct Integral {
    w: usize,
    sum: Vec<f64>,
}

impl Integral {
    fn new(src: &[f64], h: usize, w: usize) -> Self {
        let mut sum = vec![0.0; (h + 1) * (w + 1)];
        for u in 0..h {
            let mut row = 0.0;
            for v in 0..w {
                row += src[u * w + v];
                sum[(u + 1) * (w + 1) + v + 1] = sum[u * (w + 1) + v + 1] + row;
            }
        }
        Self { w: w + 1, sum }
    }

    /// Sum over rows `u0..u1` and columns `v0..v1` (half-open, already clipped).
    fn rect(&self, u0: usize, u1: usize, v0: usize, v1: usize) -> f64 {
        self.sum[u1 * self.w + v1] - self.sum[u0 * self.w + v1] - self.sum[u1 * self.w + v0]
            + self.sum[u0 * self.w + v0]
    }
}

/// Nonzero template entries as offsets from the pick pixel.
struct Template {
    cells: Vec<(i64, i64, f64)>,
    reach: i64,
}

impl HeuristicScorer {
    /// Surplus per pixel: height above the goal, or the full height where the color is
    /// wrong. Zero where nothing stands.
    pub fn surplus(&self, o: &Observation, goal: &Observation) -> Vec<f64> {
        o.pixels()
            .iter()
            .zip(goal.pixels())
            .map(|(p, g)| {
                if p[3] <= self.eps_h {
                    return 0.0;
                }
                let above = p[3] - g[3];
                let s = if rgb_diff(p, g) > self.color_tol { p[3] } else { above };
                if s > self.eps_h {
                    s
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn deficit(&self, o: &Observation, goal: &Observation) -> Vec<f64> {
        o.pixels()
            .iter()
            .zip(goal.pixels())
            .map(|(p, g)| {
                let d = g[3] - p[3];
                if d > self.eps_h {
                    d
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// The picked object's relative heights, mean color and reach from the pick pixel.
    fn object_template(&self, o: &Observation, pick: (usize, usize)) -> Option<(Observation, [f64; 4], i64)> {
        let region = object_region(o, pick, self.template_side, self.eps_h)?;
        let mut color = [0.0; 4];
        let mut reach = 0i64;
        for &(u, v) in &region.pixels {
            let p = o.get(u, v);
            for k in 0..3 {
                color[k] += p[k] / region.pixels.len() as f64;
            }
            reach = reach.max((u as i64 - pick.0 as i64).abs()).max((v as i64 - pick.1 as i64).abs());
        }
        let reach = ((reach as f64) * std::f64::consts::SQRT_2).ceil() as i64 + 1;
        Some((region.relative_raster(o), color, reach))
    }
}

/// The template rotated by `angle` about the pick pixel, sampled with the same
/// pivot-relative convention as the foresight predictor.
fn rotated_template(rel: &Observation, pick: (usize, usize), reach: i64, angle: f64) -> Template {
    let (s, c) = angle.sin_cos();
    let base = (pick.0 as i64, pick.1 as i64);
    let mut cells = Vec::new();
    for du in -reach..=reach {
        for dv in -reach..=reach {
            let (fu, fv) = (du as f64, dv as f64);
            if let Some(px) = rel.sample_offset(base, c * fu + s * fv, -s * fu + c * fv) {
                if px[3] > 0.0 {
                    cells.push((du, dv, px[3]));
                }
            }
        }
    }
    Template { cells, reach }
}

impl Scorer for HeuristicScorer {
    fn score(&self, o: &Observation, goal: &Observation) -> Result<ActionValueMaps> {
        if !o.same_shape(goal) {
            return Err(Error::DimensionMismatch("observation and goal shapes differ".into()));
        }
        let calib = *o.calib();
        let (h, w) = (calib.height, calib.width);
        let mut maps = ActionValueMaps::for_calib(&calib);

        let surplus = self.surplus(o, goal);
        let blurred = box_blur(&box_blur(&surplus, h, w, self.blur_radius), h, w, self.blur_radius);
        for (q, (&b, &s)) in maps.q_pick.iter_mut().zip(blurred.iter().zip(&surplus)) {
            *q = if s > 0.0 { b } else { 0.0 };
        }
        let pick = super::select_pick(&maps);
        if maps.q_pick[pick.u * w + pick.v] <= 0.0 {
            return Ok(maps);
        }

        let deficit = self.deficit(o, goal);
        if deficit.iter().all(|&d| d == 0.0) {
            return Ok(maps);
        }
        let sq: Vec<f64> = deficit.iter().map(|d| d * d).collect();
        let (sum_d, sum_d2) = (Integral::new(&deficit, h, w), Integral::new(&sq, h, w));
        let bins = calib.rotation_bins;
        let Some((rel, color, reach)) = self.object_template(o, (pick.u, pick.v)) else {
            return Ok(maps);
        };

        let per_bin: Vec<Vec<f64>> = (0..bins)
            .into_par_iter()
            .map(|r| {
                let mut out = vec![0.0; h * w];
                let t = rotated_template(&rel, (pick.u, pick.v), reach, bin_to_angle(r, bins));
                let half = t.reach + self.margin as i64;
                let n = ((2 * half + 1) * (2 * half + 1)) as f64;
                let t_sum: f64 = t.cells.iter().map(|c| c.2).sum();
                let t_sq: f64 = t.cells.iter().map(|c| c.2 * c.2).sum();
                let t_var = t_sq - t_sum * t_sum / n;
                let t_top = t.cells.iter().map(|c| c.2).fold(0.0, f64::max);
                if t_var <= 0.0 {
                    return out;
                }
                for u in 0..h as i64 {
                    for v in 0..w as i64 {
                        let clip = |x: i64, n: usize| x.clamp(0, n as i64) as usize;
                        let (u0, u1) = (clip(u - half, h), clip(u + half + 1, h));
                        let (v0, v1) = (clip(v - half, w), clip(v + half + 1, w));
                        let d_sum = sum_d.rect(u0, u1, v0, v1);
                        if d_sum <= 0.0 {
                            continue;
                        }
                        let d_var = sum_d2.rect(u0, u1, v0, v1) - d_sum * d_sum / n;
                        if d_var <= 1e-12 {
                            continue;
                        }
                        let mut cross = 0.0;
                        let mut completes = 0usize;
                        for &(du, dv, tv) in &t.cells {
                            let (pu, pv) = (u + du, v + dv);
                            if pu >= 0 && pv >= 0 && pu < h as i64 && pv < w as i64 {
                                let d = deficit[pu as usize * w + pv as usize];
                                cross += tv * d;
                                if d > 0.0 && d <= t_top + self.eps_h {
                                    completes += 1;
                                }
                            }
                        }
                        let ncc = (cross - t_sum * d_sum / n) / (t_var * d_var).sqrt();
                        if ncc > 0.0 {
                            let g = goal.get(u as usize, v as usize);
                            let match_ = (1.0 - rgb_diff(&color, &g) / (2.0 * self.color_tol)).clamp(0.0, 1.0);
                            let complete = completes as f64 / t.cells.len() as f64;
                            let match_ = match_ * (self.floor_weight + (1.0 - self.floor_weight) * complete);
                            out[u as usize * w + v as usize] = ncc * match_;
                        }
                    }
                }
                out
            })
            .collect();
        for (r, values) in per_bin.iter().enumerate() {
            for (i, &q) in values.iter().enumerate() {
                maps.q_place[i * bins + r] = q;
            }
        }
        Ok(maps)
    }

    fn name(&self) -> &'static str {
        "heuristic"
    }
}
