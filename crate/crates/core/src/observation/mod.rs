//! Top-down RGB + height rasters and the image-space primitives used by foresight,
//! scoring and planning.

mod image_io;

pub use image_io::{
    quantize, read_observation, write_height_png, write_qmap_overlay, write_rgb_png,
};

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PixelPose, PoseSE2, WorkspaceCalib};

/// Sample coordinates closer than this to an integer are snapped, so rigid motions that
/// map pixel centers onto pixel centers copy values exactly.
const SNAP_EPS: f64 = 1e-6;

/// One pixel: `[r, g, b, height]`.
pub type Pixel = [f64; 4];

pub const ZERO_PIXEL: Pixel = [0.0; 4];

/// An `H x W x 4` raster: RGB in `[0, 1]` and height in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    calib: WorkspaceCalib,
    pixels: Vec<Pixel>,
}

impl Observation {
    pub fn zeros(calib: WorkspaceCalib) -> Self {
        Self::filled(calib, ZERO_PIXEL)
    }

    pub fn filled(calib: WorkspaceCalib, value: Pixel) -> Self {
        Self {
            calib,
            pixels: vec![value; calib.pixel_count()],
        }
    }

    pub fn from_pixels(calib: WorkspaceCalib, pixels: Vec<Pixel>) -> Result<Self> {
        if pixels.len() != calib.pixel_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} pixels for a {}x{} raster",
                pixels.len(),
                calib.height,
                calib.width
            )));
        }
        Ok(Self { calib, pixels })
    }

    pub fn calib(&self) -> &WorkspaceCalib {
        &self.calib
    }

    pub fn height(&self) -> usize {
        self.calib.height
    }

    pub fn width(&self) -> usize {
        self.calib.width
    }

    pub fn pixels(&self) -> &[Pixel] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [Pixel] {
        &mut self.pixels
    }

    #[inline]
    pub fn index(&self, u: usize, v: usize) -> usize {
        u * self.calib.width + v
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Pixel {
        self.pixels[self.index(u, v)]
    }

    /// Pixel value, or zeros outside the raster.
    #[inline]
    pub fn get_or_zero(&self, u: i64, v: i64) -> Pixel {
        if self.calib.in_bounds(u, v) {
            self.get(u as usize, v as usize)
        } else {
            ZERO_PIXEL
        }
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: Pixel) {
        let i = self.index(u, v);
        self.pixels[i] = value;
    }

    #[inline]
    pub fn height_at(&self, u: usize, v: usize) -> f64 {
        self.pixels[self.index(u, v)][3]
    }

    pub fn height_map(&self) -> Vec<f64> {
        self.pixels.iter().map(|p| p[3]).collect()
    }

    pub fn same_shape(&self, other: &Observation) -> bool {
        self.calib.height == other.calib.height && self.calib.width == other.calib.width
    }

    /// All channels finite and height non-negative.
    pub fn is_valid(&self) -> bool {
        self.pixels
            .iter()
            .all(|p| p.iter().all(|c| c.is_finite()) && p[3] >= 0.0)
    }

    /// Bilinear sample at continuous pixel coordinates; `None` outside `[0, H-1] x [0, W-1]`.
    pub fn sample(&self, fu: f64, fv: f64) -> Option<Pixel> {
        self.sample_offset((0, 0), fu, fv)
    }

    /// Bilinear sample at `base + (du, dv)`. The interpolation weights depend only on the
    /// offset, so shifting `base` by whole pixels shifts the result exactly.
    pub fn sample_offset(&self, base: (i64, i64), du: f64, dv: f64) -> Option<Pixel> {
        let (du, dv) = (snap(du), snap(dv));
        let (fu, fv) = (du.floor(), dv.floor());
        let (tu, tv) = (du - fu, dv - fv);
        if !(fu.is_finite() && fv.is_finite()) {
            return None;
        }
        let u0 = base.0 + fu as i64;
        let v0 = base.1 + fv as i64;
        let (h, w) = (self.calib.height as i64, self.calib.width as i64);
        if u0 < 0 || v0 < 0 || u0 > h - 1 || v0 > w - 1 || (tu > 0.0 && u0 == h - 1) || (tv > 0.0 && v0 == w - 1) {
            return None;
        }
        let (u0, v0) = (u0 as usize, v0 as usize);
        if tu == 0.0 && tv == 0.0 {
            return Some(self.get(u0, v0));
        }
        let u1 = (u0 + 1).min(self.calib.height - 1);
        let v1 = (v0 + 1).min(self.calib.width - 1);
        let (a, b, c, d) = (
            self.get(u0, v0),
            self.get(u0, v1),
            self.get(u1, v0),
            self.get(u1, v1),
        );
        let mut out = ZERO_PIXEL;
        for k in 0..4 {
            out[k] = (1.0 - tu) * ((1.0 - tv) * a[k] + tv * b[k]) + tu * ((1.0 - tv) * c[k] + tv * d[k]);
        }
        Some(out)
    }
}

fn snap(f: f64) -> f64 {
    let r = f.round();
    if (f - r).abs() < SNAP_EPS {
        r
    } else {
        f
    }
}

/// Per-channel weights for the L1 distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelWeights {
    pub rgb: [f64; 3],
    pub height: f64,
}

impl Default for ChannelWeights {
    fn default() -> Self {
        Self::unit()
    }
}

impl ChannelWeights {
    pub fn unit() -> Self {
        Self {
            rgb: [1.0; 3],
            height: 1.0,
        }
    }

    /// Height counted five times as much as each color channel.
    pub fn height_emphasis() -> Self {
        Self {
            rgb: [1.0; 3],
            height: 5.0,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.rgb[0], self.rgb[1], self.rgb[2], self.height]
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().all(|w| *w > 0.0 && w.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidConfig("channel weights must be positive".into()))
        }
    }
}

/// Weighted mean absolute difference over every pixel and channel.
/// Tallest point of `o`, floored at 1 mm. Heights are divided by this before comparing
/// observations so they share the `[0, 1]` range of the color channels.
pub fn height_scale(o: &Observation) -> f64 {
    o.pixels().iter().map(|p| p[3]).fold(0.0, f64::max).max(1e-3)
}

pub fn l1_distance(a: &Observation, b: &Observation, w: &ChannelWeights) -> Result<f64> {
    l1_distance_scaled(a, b, w, 1.0)
}

/// [`l1_distance`] with heights divided by `height_scale` first.
pub fn l1_distance_scaled(
    a: &Observation,
    b: &Observation,
    w: &ChannelWeights,
    height_scale: f64,
) -> Result<f64> {
    l1_distance_masked(a, b, w, height_scale, None)
}

/// [`l1_distance_scaled`] restricted to pixels where `mask` is true.
pub fn l1_distance_masked(
    a: &Observation,
    b: &Observation,
    w: &ChannelWeights,
    height_scale: f64,
    mask: Option<&[bool]>,
) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    if let Some(m) = mask {
        if m.len() != a.pixels.len() {
            return Err(Error::DimensionMismatch("mask size".into()));
        }
    }
    let ws = w.as_array();
    let scale = [1.0, 1.0, 1.0, 1.0 / height_scale];
    let mut total = 0.0;
    let mut count = 0usize;
    for (i, (pa, pb)) in a.pixels.iter().zip(&b.pixels).enumerate() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        count += 1;
        for k in 0..4 {
            total += ws[k] * (pa[k] - pb[k]).abs() * scale[k];
        }
    }
    if count == 0 {
        return Ok(0.0);
    }
    Ok(total / (count as f64 * ws.iter().sum::<f64>()))
}

/// `output(p) = input(g⁻¹ ⋄ p)` with bilinear resampling and zero fill.
pub fn warp_observation(o: &Observation, g: &PoseSE2) -> Observation {
    warp_with_validity(o, g).0
}

/// Like [`warp_observation`], also returning which output pixels sampled inside the source.
pub fn warp_with_validity(o: &Observation, g: &PoseSE2) -> (Observation, Vec<bool>) {
    let calib = *o.calib();
    let inv = g.inverse();
    let mut out = Observation::zeros(calib);
    let mut valid = vec![false; calib.pixel_count()];
    for u in 0..calib.height {
        for v in 0..calib.width {
            let src = inv.apply(calib.pixel_center(u, v));
            let (fu, fv) = calib.world_to_continuous(src);
            if let Some(px) = o.sample(fu, fv) {
                let i = out.index(u, v);
                out.pixels[i] = px;
                valid[i] = true;
            }
        }
    }
    (out, valid)
}

/// Rigid rotation of the raster about the center of `pivot`.
pub fn rotate_about_pivot(o: &Observation, pivot: (usize, usize), angle: f64) -> Result<Observation> {
    let calib = o.calib();
    if !calib.in_bounds(pivot.0 as i64, pivot.1 as i64) {
        return Err(Error::OutOfBounds {
            u: pivot.0 as i64,
            v: pivot.1 as i64,
            height: calib.height,
            width: calib.width,
        });
    }
    // Offsets from the pivot are integers, so the arithmetic is identical for any
    // pivot and the result commutes exactly with whole-pixel shifts.
    let (s, c) = angle.sin_cos();
    let base = (pivot.0 as i64, pivot.1 as i64);
    let mut out = Observation::zeros(*calib);
    for u in 0..calib.height {
        for v in 0..calib.width {
            let (du, dv) = ((u as i64 - base.0) as f64, (v as i64 - base.1) as f64);
            if let Some(px) = o.sample_offset(base, c * du + s * dv, -s * du + c * dv) {
                let i = out.index(u, v);
                out.pixels[i] = px;
            }
        }
    }
    Ok(out)
}

fn check_side(side: usize) -> Result<()> {
    if side % 2 == 1 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("square side must be odd, got {side}")))
    }
}

/// A `side x side` block of pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub side: usize,
    pub pixels: Vec<Pixel>,
}

impl Patch {
    pub fn get(&self, i: usize, j: usize) -> Pixel {
        self.pixels[i * self.side + j]
    }
}

/// Square crop centered on `center`, zero-filled outside the raster.
pub fn crop_square(o: &Observation, center: (usize, usize), side: usize) -> Result<Patch> {
    check_side(side)?;
    let half = (side / 2) as i64;
    let mut pixels = Vec::with_capacity(side * side);
    for i in 0..side as i64 {
        for j in 0..side as i64 {
            pixels.push(o.get_or_zero(center.0 as i64 - half + i, center.1 as i64 - half + j));
        }
    }
    Ok(Patch { side, pixels })
}

/// Writes `patch` into `target` centered on `center`; parts outside the raster are dropped.
pub fn paste_square(patch: &Patch, target: &mut Observation, center: (usize, usize)) {
    let half = (patch.side / 2) as i64;
    for i in 0..patch.side as i64 {
        for j in 0..patch.side as i64 {
            let (u, v) = (center.0 as i64 - half + i, center.1 as i64 - half + j);
            if target.calib().in_bounds(u, v) {
                target.set(u as usize, v as usize, patch.get(i as usize, j as usize));
            }
        }
    }
}

/// Binary image marking the pick square.
#[derive(Debug, Clone, PartialEq)]
pub struct PickMask {
    pub mask: Vec<bool>,
    pub center: PixelPose,
    pub side: usize,
    pub width: usize,
}

impl PickMask {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        self.mask[u * self.width + v]
    }
}

pub fn build_pick_mask(calib: &WorkspaceCalib, center: PixelPose, side: usize) -> Result<PickMask> {
    check_side(side)?;
    let mut mask = vec![false; calib.pixel_count()];
    for (u, v) in square_pixels(calib, (center.u, center.v), side) {
        mask[u * calib.width + v] = true;
    }
    Ok(PickMask {
        mask,
        center,
        side,
        width: calib.width,
    })
}

/// In-bounds pixels of the `side x side` square centered at `center`.
pub fn square_pixels(
    calib: &WorkspaceCalib,
    center: (usize, usize),
    side: usize,
) -> impl Iterator<Item = (usize, usize)> {
    let half = (side / 2) as i64;
    let (h, w) = (calib.height as i64, calib.width as i64);
    let u_lo = (center.0 as i64 - half).max(0);
    let u_hi = (center.0 as i64 + half).min(h - 1);
    let v_lo = (center.1 as i64 - half).max(0);
    let v_hi = (center.1 as i64 + half).min(w - 1);
    (u_lo..=u_hi).flat_map(move |u| (v_lo..=v_hi).map(move |v| (u as usize, v as usize)))
}

/// The rotated pick-square content pasted onto a zero raster at the place pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacePatch {
    pub patch: Observation,
    pub place_center: PixelPose,
    pub delta_theta: f64,
    pub side: usize,
}

/// Rotate `o` by `delta_theta` about the pick pixel, crop the pick square, paste it on
/// zeros at the place pixel.
pub fn build_place_patch(
    o: &Observation,
    pick: PixelPose,
    place: PixelPose,
    delta_theta: f64,
    side: usize,
) -> Result<PlacePatch> {
    check_side(side)?;
    let calib = o.calib();
    for p in [pick, place] {
        if !calib.in_bounds(p.u as i64, p.v as i64) {
            return Err(Error::OutOfBounds {
                u: p.u as i64,
                v: p.v as i64,
                height: calib.height,
                width: calib.width,
            });
        }
    }
    let rotated = rotate_about_pivot(o, (pick.u, pick.v), delta_theta)?;
    let crop = crop_square(&rotated, (pick.u, pick.v), side)?;
    let mut patch = Observation::zeros(*calib);
    paste_square(&crop, &mut patch, (place.u, place.v));
    Ok(PlacePatch {
        patch,
        place_center: place,
        delta_theta,
        side,
    })
}

/// The connected object under a pick point, separated from its support surface.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectRegion {
    /// Support height estimate: median height on the boundary of the pick square.
    pub support: f64,
    /// Pixels of the object, in BFS order starting at the pick pixel.
    pub pixels: Vec<(usize, usize)>,
    /// Raster-sized membership mask.
    pub mask: Vec<bool>,
}

impl ObjectRegion {
    /// Raster holding the object's color and its height above `support`; zeros elsewhere.
    pub fn relative_raster(&self, o: &Observation) -> Observation {
        let mut out = Observation::zeros(*o.calib());
        for &(u, v) in &self.pixels {
            let p = o.get(u, v);
            out.set(u, v, [p[0], p[1], p[2], (p[3] - self.support).max(0.0)]);
        }
        out
    }

    /// Raster that is 1 on object pixels.
    pub fn coverage_raster(&self, calib: &WorkspaceCalib) -> Observation {
        let mut out = Observation::zeros(*calib);
        for &(u, v) in &self.pixels {
            out.set(u, v, [1.0; 4]);
        }
        out
    }
}

/// Finds the 4-connected set of pixels inside the pick square that stand more than
/// `eps_h` above the square's boundary-median height and contain `center`.
pub fn object_region(
    o: &Observation,
    center: (usize, usize),
    side: usize,
    eps_h: f64,
) -> Option<ObjectRegion> {
    let calib = *o.calib();
    let half = (side / 2) as i64;
    let (cu, cv) = (center.0 as i64, center.1 as i64);
    let mut ring: Vec<f64> = square_pixels(&calib, center, side)
        .filter(|&(u, v)| {
            let (du, dv) = ((u as i64 - cu).abs(), (v as i64 - cv).abs());
            du == half || dv == half
        })
        .map(|(u, v)| o.height_at(u, v))
        .collect();
    ring.sort_by(f64::total_cmp);
    let support = if ring.is_empty() {
        0.0
    } else {
        ring[(ring.len() - 1) / 2]
    };
    let threshold = support + eps_h;
    if o.height_at(center.0, center.1) <= threshold {
        return None;
    }
    let inside = |u: i64, v: i64| {
        (u - cu).abs() <= half && (v - cv).abs() <= half && calib.in_bounds(u, v)
    };
    let mut mask = vec![false; calib.pixel_count()];
    let mut pixels = Vec::new();
    let mut queue = VecDeque::from([center]);
    mask[o.index(center.0, center.1)] = true;
    while let Some((u, v)) = queue.pop_front() {
        pixels.push((u, v));
        for (du, dv) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let (nu, nv) = (u as i64 + du, v as i64 + dv);
            if !inside(nu, nv) {
                continue;
            }
            let (nu, nv) = (nu as usize, nv as usize);
            let idx = o.index(nu, nv);
            if !mask[idx] && o.height_at(nu, nv) > threshold {
                mask[idx] = true;
                queue.push_back((nu, nv));
            }
        }
    }
    Some(ObjectRegion {
        support,
        pixels,
        mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn small_calib(n: usize) -> WorkspaceCalib {
        WorkspaceCalib::square(n as f64 * 0.01, n)
    }

    fn gradient(calib: WorkspaceCalib) -> Observation {
        let mut o = Observation::zeros(calib);
        for u in 0..calib.height {
            for v in 0..calib.width {
                let a = (u * 31 + v * 7) % 97;
                o.set(
                    u,
                    v,
                    [a as f64 / 97.0, v as f64 / calib.width as f64, u as f64 / calib.height as f64, 0.001 * (u + v) as f64],
                );
            }
        }
        o
    }

    #[test]
    fn identity_warp_is_exact() {
        let o = gradient(small_calib(24));
        assert_eq!(warp_observation(&o, &PoseSE2::IDENTITY), o);
    }

    #[test]
    fn integer_translation_is_exact_shift() {
        let calib = small_calib(24);
        let o = gradient(calib);
        let (ku, kv) = (3i64, -5i64);
        let g = PoseSE2::translation(ku as f64 * calib.pixel_pitch, kv as f64 * calib.pixel_pitch);
        let w = warp_observation(&o, &g);
        for u in 0..24i64 {
            for v in 0..24i64 {
                assert_eq!(w.get(u as usize, v as usize), o.get_or_zero(u - ku, v - kv));
            }
        }
    }

    #[test]
    fn quarter_turn_about_center_matches_array_rotation() {
        let n = 20usize;
        let calib = small_calib(n);
        let o = gradient(calib);
        let (cx, cy) = calib.center();
        let w = warp_observation(&o, &PoseSE2::rotation_about(cx, cy, PI / 2.0));
        for u in 0..n {
            for v in 0..n {
                let expect = o.get(v, n - 1 - u);
                let got = w.get(u, v);
                for k in 0..4 {
                    assert!((got[k] - expect[k]).abs() < 1e-9);
                }
            }
        }
        // Same rotation through rotate_about_pivot on an odd raster, pivot at the middle pixel.
        let calib = small_calib(21);
        let o = gradient(calib);
        let r = rotate_about_pivot(&o, (10, 10), PI / 2.0).unwrap();
        for u in 0..21 {
            for v in 0..21 {
                assert_eq!(r.get(u, v), o.get(v, 20 - u));
            }
        }
    }

    #[test]
    fn rotate_zero_and_full_turn() {
        let o = gradient(small_calib(21));
        assert_eq!(rotate_about_pivot(&o, (4, 9), 0.0).unwrap(), o);
        let full = rotate_about_pivot(&o, (4, 9), TAU).unwrap();
        for (a, b) in full.pixels().iter().zip(o.pixels()) {
            for k in 0..4 {
                assert!((a[k] - b[k]).abs() < 1e-6);
            }
        }
        assert!(rotate_about_pivot(&o, (21, 0), 1.0).is_err());
    }

    #[test]
    fn warp_round_trip_error_is_small() {
        let calib = small_calib(40);
        let mut o = Observation::filled(calib, [0.3, 0.3, 0.3, 0.0]);
        for u in 12..24 {
            for v in 15..27 {
                o.set(u, v, [0.9, 0.1, 0.1, 0.03]);
            }
        }
        let (cx, cy) = calib.center();
        let g = PoseSE2::rotation_about(cx, cy, 0.37).compose(&PoseSE2::translation(0.013, -0.021));
        let back = warp_observation(&warp_observation(&o, &g), &g.inverse());
        let (_, valid) = warp_with_validity(&warp_observation(&o, &g), &g.inverse());
        let d = l1_distance_masked(&back, &o, &ChannelWeights::unit(), 1.0, Some(&valid)).unwrap();
        assert!(d < 2e-2, "round trip error {d}");
    }

    #[test]
    fn crop_cases() {
        let calib = small_calib(11);
        let o = Observation::filled(calib, [0.5, 0.5, 0.5, 0.02]);
        let p = crop_square(&o, (5, 5), 5).unwrap();
        assert!(p.pixels.iter().all(|px| *px == [0.5, 0.5, 0.5, 0.02]));

        let c = crop_square(&o, (0, 0), 5).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let expect = if i < 2 || j < 2 { ZERO_PIXEL } else { o.get(0, 0) };
                assert_eq!(c.get(i, j), expect);
            }
        }
        assert!(crop_square(&o, (0, 0), 4).is_err());
    }

    #[test]
    fn crop_paste_round_trip() {
        let calib = small_calib(15);
        let o = gradient(calib);
        for (center, side) in [((7, 7), 5), ((0, 14), 7), ((3, 1), 9)] {
            let crop = crop_square(&o, center, side).unwrap();
            let mut t = Observation::zeros(calib);
            paste_square(&crop, &mut t, center);
            for (u, v) in square_pixels(&calib, center, side) {
                assert_eq!(t.get(u, v), o.get(u, v));
            }
        }
    }

    #[test]
    fn pick_mask_sizes() {
        let calib = WorkspaceCalib::default();
        assert_eq!(build_pick_mask(&calib, PixelPose::new(40, 40, 0), 1).unwrap().count(), 1);
        let m = build_pick_mask(&calib, PixelPose::new(80, 80, 0), 65).unwrap();
        assert_eq!(m.count(), 4225);
        assert!(m.contains(48, 112) && !m.contains(47, 80));
        assert_eq!(build_pick_mask(&calib, PixelPose::new(0, 0, 0), 65).unwrap().count(), 1089);
    }

    #[test]
    fn place_patch_identity_and_empty() {
        let calib = small_calib(21);
        let o = gradient(calib);
        let p = PixelPose::new(8, 12, 0);
        let pp = build_place_patch(&o, p, p, 0.0, 5).unwrap();
        for u in 0..21 {
            for v in 0..21 {
                let inside = (6..=10).contains(&u) && (10..=14).contains(&v);
                let expect = if inside { o.get(u, v) } else { ZERO_PIXEL };
                assert_eq!(pp.patch.get(u, v), expect);
            }
        }
        let empty = Observation::zeros(calib);
        let pp = build_place_patch(&empty, p, PixelPose::new(3, 3, 0), 0.0, 5).unwrap();
        assert!(pp.patch.pixels().iter().all(|px| *px == ZERO_PIXEL));
    }

    #[test]
    fn place_patch_is_zero_outside_square() {
        let calib = small_calib(31);
        let o = gradient(calib);
        let place = PixelPose::new(20, 6, 0);
        let pp = build_place_patch(&o, PixelPose::new(10, 15, 0), place, 0.7, 7).unwrap();
        for u in 0..31usize {
            for v in 0..31usize {
                if u.abs_diff(place.u) > 3 || v.abs_diff(place.v) > 3 {
                    assert_eq!(pp.patch.get(u, v), ZERO_PIXEL);
                }
            }
        }
    }

    #[test]
    fn l1_examples() {
        let calib = small_calib(8);
        let a = gradient(calib);
        assert_eq!(l1_distance(&a, &a, &ChannelWeights::unit()).unwrap(), 0.0);

        let mut b = a.clone();
        b.pixels_mut().iter_mut().for_each(|p| p.iter_mut().for_each(|c| *c += 0.1));
        assert!((l1_distance(&a, &b, &ChannelWeights::unit()).unwrap() - 0.1).abs() < 1e-12);

        let mut c = a.clone();
        c.pixels_mut().iter_mut().for_each(|p| p[3] += 0.1);
        let d = l1_distance(&a, &c, &ChannelWeights::height_emphasis()).unwrap();
        assert!((d - 0.0625).abs() < 1e-12);

        let other = Observation::zeros(small_calib(9));
        assert!(matches!(
            l1_distance(&a, &other, &ChannelWeights::unit()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn object_region_finds_connected_block_only() {
        let calib = small_calib(40);
        let mut o = Observation::filled(calib, [0.3, 0.3, 0.3, 0.0]);
        for u in 10..15 {
            for v in 10..15 {
                o.set(u, v, [1.0, 0.0, 0.0, 0.03]);
            }
        }
        // A second block inside the square but not touching the first.
        for u in 18..21 {
            for v in 10..13 {
                o.set(u, v, [0.0, 0.0, 1.0, 0.03]);
            }
        }
        let region = object_region(&o, (12, 12), 21, 0.002).unwrap();
        assert_eq!(region.pixels.len(), 25);
        assert_eq!(region.support, 0.0);
        assert!(object_region(&o, (30, 30), 21, 0.002).is_none());
    }
}
