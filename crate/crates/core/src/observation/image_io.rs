//! PNG export: 8-bit RGB and 16-bit millimeter height maps.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use super::{Observation, Pixel};
use crate::error::{Error, Result};
use crate::geometry::WorkspaceCalib;

fn to_u8(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn to_mm(h: f64) -> u16 {
    (h.max(0.0) * 1000.0).round().min(u16::MAX as f64) as u16
}

/// The observation as it survives a PNG round trip.
pub fn quantize(o: &Observation) -> Observation {
    let pixels = o
        .pixels()
        .iter()
        .map(|p| {
            [
                to_u8(p[0]) as f64 / 255.0,
                to_u8(p[1]) as f64 / 255.0,
                to_u8(p[2]) as f64 / 255.0,
                to_mm(p[3]) as f64 / 1000.0,
            ]
        })
        .collect();
    Observation::from_pixels(*o.calib(), pixels).expect("same size")
}

fn encoder(
    path: &Path,
    o: &Observation,
    color: png::ColorType,
    depth: png::BitDepth,
) -> Result<png::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), o.width() as u32, o.height() as u32);
    enc.set_color(color);
    enc.set_depth(depth);
    Ok(enc.write_header()?)
}

pub fn write_rgb_png(o: &Observation, path: &Path) -> Result<()> {
    let data: Vec<u8> = o
        .pixels()
        .iter()
        .flat_map(|p| [to_u8(p[0]), to_u8(p[1]), to_u8(p[2])])
        .collect();
    let mut w = encoder(path, o, png::ColorType::Rgb, png::BitDepth::Eight)?;
    w.write_image_data(&data)?;
    Ok(())
}

/// Height in millimeters as 16-bit big-endian grayscale.
pub fn write_height_png(o: &Observation, path: &Path) -> Result<()> {
    let data: Vec<u8> = o
        .pixels()
        .iter()
        .flat_map(|p| to_mm(p[3]).to_be_bytes())
        .collect();
    let mut w = encoder(path, o, png::ColorType::Grayscale, png::BitDepth::Sixteen)?;
    w.write_image_data(&data)?;
    Ok(())
}

fn read_png(path: &Path) -> Result<(png::OutputInfo, Vec<u8>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder.read_info()?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::DimensionMismatch(format!("{}: image too large", path.display())))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf)?;
    buf.truncate(info.buffer_size());
    Ok((info, buf))
}

/// Reads an RGB PNG and a 16-bit height PNG back into an observation.
pub fn read_observation(rgb_path: &Path, height_path: &Path, calib: WorkspaceCalib) -> Result<Observation> {
    let (rgb_info, rgb) = read_png(rgb_path)?;
    let (h_info, heights) = read_png(height_path)?;
    let dims_ok = |info: &png::OutputInfo| {
        info.width as usize == calib.width && info.height as usize == calib.height
    };
    if !dims_ok(&rgb_info) || !dims_ok(&h_info) {
        return Err(Error::DimensionMismatch(format!(
            "images do not match the {}x{} calibration",
            calib.height, calib.width
        )));
    }
    if rgb_info.color_type != png::ColorType::Rgb
        || rgb_info.bit_depth != png::BitDepth::Eight
        || h_info.color_type != png::ColorType::Grayscale
        || h_info.bit_depth != png::BitDepth::Sixteen
    {
        return Err(Error::DimensionMismatch("unexpected png color type or depth".into()));
    }
    let pixels: Vec<Pixel> = rgb
        .chunks_exact(3)
        .zip(heights.chunks_exact(2))
        .map(|(c, h)| {
            [
                c[0] as f64 / 255.0,
                c[1] as f64 / 255.0,
                c[2] as f64 / 255.0,
                u16::from_be_bytes([h[0], h[1]]) as f64 / 1000.0,
            ]
        })
        .collect();
    Observation::from_pixels(calib, pixels)
}

/// Blends a false-color rendering of `values` (one per pixel) over the observation RGB.
pub fn write_qmap_overlay(o: &Observation, values: &[f64], path: &Path) -> Result<()> {
    if values.len() != o.pixels().len() {
        return Err(Error::DimensionMismatch("q-map size".into()));
    }
    let max = values.iter().copied().fold(0.0f64, f64::max);
    let mut blended = o.clone();
    for (p, &q) in blended.pixels_mut().iter_mut().zip(values) {
        let t = if max > 0.0 { (q / max).clamp(0.0, 1.0) } else { 0.0 };
        let heat = heat_color(t);
        let alpha = 0.7 * t.sqrt();
        for k in 0..3 {
            p[k] = (1.0 - alpha) * p[k] + alpha * heat[k];
        }
    }
    write_rgb_png(&blended, path)
}

/// Dark blue to yellow ramp.
fn heat_color(t: f64) -> [f64; 3] {
    [t, 0.2 + 0.8 * t, 0.6 * (1.0 - t)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_is_bit_exact_after_quantization() {
        let calib = WorkspaceCalib::square(0.2, 23);
        let mut o = Observation::zeros(calib);
        for (i, p) in o.pixels_mut().iter_mut().enumerate() {
            let f = i as f64;
            *p = [
                (f * 0.013).sin().abs(),
                (f * 0.007).cos().abs(),
                (i % 17) as f64 / 16.0,
                0.0005 * (i % 200) as f64,
            ];
        }
        let dir = tempfile::tempdir().unwrap();
        let (rgb, h) = (dir.path().join("rgb.png"), dir.path().join("h.png"));
        write_rgb_png(&o, &rgb).unwrap();
        write_height_png(&o, &h).unwrap();
        let back = read_observation(&rgb, &h, calib).unwrap();
        assert_eq!(back, quantize(&o));
        assert_eq!(quantize(&back), back);
    }

    #[test]
    fn mismatched_calibration_is_rejected() {
        let calib = WorkspaceCalib::square(0.2, 10);
        let o = Observation::zeros(calib);
        let dir = tempfile::tempdir().unwrap();
        let (rgb, h) = (dir.path().join("rgb.png"), dir.path().join("h.png"));
        write_rgb_png(&o, &rgb).unwrap();
        write_height_png(&o, &h).unwrap();
        assert!(read_observation(&rgb, &h, WorkspaceCalib::square(0.2, 11)).is_err());
    }
}
