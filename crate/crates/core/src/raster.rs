//! Raster containers and their PNG + sidecar I/O.
//!
//! `MaskRaster` holds single-channel intensities in the nominal 0–255 range
//! (labels use {0, 255}, model outputs use probability × 255). `ImageRaster`
//! is an interleaved 3-channel 8-bit image. Both carry the affine pixel→geo
//! transform, persisted as a 6-line sidecar next to the PNG.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geo::GeoTransform;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct MaskRaster {
    pub width: usize,
    pub height: usize,
    /// Row-major intensities, nominally 0–255.
    pub values: Vec<f32>,
    pub geo: GeoTransform,
    pub meters_per_pixel: f64,
}

impl MaskRaster {
    pub fn zeros(width: usize, height: usize, geo: GeoTransform, meters_per_pixel: f64) -> Self {
        MaskRaster { width, height, values: vec![0.0; width * height], geo, meters_per_pixel }
    }

    /// Pixel-space raster for tests and in-memory work: identity transform,
    /// 1 m per pixel.
    pub fn flat(width: usize, height: usize) -> Self {
        Self::zeros(width, height, GeoTransform::identity(), 1.0)
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.values[y * self.width + x] = v;
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum()
    }

    /// Scale probabilities in [0, 1] to mask intensities in [0, 255].
    pub fn from_probabilities(
        width: usize,
        height: usize,
        probs: &[f64],
        geo: GeoTransform,
        meters_per_pixel: f64,
    ) -> Result<Self> {
        if probs.len() != width * height {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", width * height),
                got: format!("{}", probs.len()),
            });
        }
        let values = probs.iter().map(|&p| (p * 255.0) as f32).collect();
        Ok(MaskRaster { width, height, values, geo, meters_per_pixel })
    }

    /// View as a (1, 1, h, w) tensor with values scaled to [0, 1].
    pub fn to_target_tensor(&self) -> Tensor {
        let data = self.values.iter().map(|&v| (v as f64 / 255.0).round()).collect();
        Tensor::from_vec([1, 1, self.height, self.width], data).expect("sized by construction")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRaster {
    pub width: usize,
    pub height: usize,
    /// Interleaved RGB, row-major.
    pub data: Vec<u8>,
    pub geo: GeoTransform,
    pub meters_per_pixel: f64,
}

impl ImageRaster {
    pub fn zeros(width: usize, height: usize, geo: GeoTransform, meters_per_pixel: f64) -> Self {
        ImageRaster { width, height, data: vec![0; width * height * 3], geo, meters_per_pixel }
    }

    pub fn flat(width: usize, height: usize) -> Self {
        Self::zeros(width, height, GeoTransform::identity(), 1.0)
    }

    #[inline]
    pub fn channel_at(&self, x: usize, y: usize, ch: usize) -> u8 {
        self.data[(y * self.width + x) * 3 + ch]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// View as a (1, 3, h, w) tensor with channels scaled to [0, 1].
    pub fn to_input_tensor(&self) -> Tensor {
        let (w, h) = (self.width, self.height);
        let mut t = Tensor::zeros([1, 3, h, w]);
        for c in 0..3 {
            let plane = t.plane_mut(0, c);
            for y in 0..h {
                for x in 0..w {
                    plane[y * w + x] = self.data[(y * w + x) * 3 + c] as f64 / 255.0;
                }
            }
        }
        t
    }
}

/// Binary mask produced by thresholding.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        BinaryMask { width, height, data: vec![false; width * height] }
    }

    pub fn from_bits(width: usize, height: usize, bits: &[u8]) -> Self {
        assert_eq!(bits.len(), width * height);
        BinaryMask { width, height, data: bits.iter().map(|&b| b != 0).collect() }
    }

    pub fn from_f64(width: usize, height: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), width * height);
        BinaryMask { width, height, data: values.iter().map(|&v| v != 0.0).collect() }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.data.iter().zip(other.data.iter()).all(|(&a, &b)| !a || b)
    }
}

// ---------------------------------------------------------------------------
// PNG + sidecar I/O
// ---------------------------------------------------------------------------

fn sidecar_path(png_path: &Path) -> PathBuf {
    png_path.with_extension("wld")
}

pub fn write_world_file(png_path: &Path, geo: &GeoTransform) -> Result<()> {
    let path = sidecar_path(png_path);
    let mut out = String::new();
    for c in geo.coefficients() {
        out.push_str(&format!("{c:.12e}\n"));
    }
    std::fs::write(&path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_world_file(png_path: &Path) -> Result<GeoTransform> {
    let path = sidecar_path(png_path);
    let text =
        std::fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut coeffs = [0.0f64; 6];
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    for c in coeffs.iter_mut() {
        let line = lines.next().ok_or_else(|| Error::BadFormat {
            path: path.display().to_string(),
            reason: "expected 6 coefficient lines".into(),
        })?;
        *c = line.trim().parse().map_err(|_| Error::BadFormat {
            path: path.display().to_string(),
            reason: format!("bad coefficient `{line}`"),
        })?;
    }
    Ok(GeoTransform::from_coefficients(coeffs))
}

fn png_encoder<'a>(
    writer: &'a mut BufWriter<File>,
    width: usize,
    height: usize,
    color: png::ColorType,
    meta: Option<&str>,
) -> Result<png::Writer<&'a mut BufWriter<File>>> {
    let mut enc = png::Encoder::new(writer, width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    if let Some(m) = meta {
        enc.add_text_chunk("provenance".to_string(), m.to_string())
            .map_err(|e| Error::Png { path: "<encoder>".into(), reason: e.to_string() })?;
    }
    enc.write_header().map_err(|e| Error::Png { path: "<encoder>".into(), reason: e.to_string() })
}

/// Write a mask as 8-bit grayscale PNG plus its world-file sidecar.
/// `meta` (config hash + seed) lands in a PNG text chunk.
pub fn write_mask_png(path: &Path, mask: &MaskRaster, meta: Option<&str>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut writer = BufWriter::new(file);
    let bytes: Vec<u8> =
        mask.values.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8).collect();
    let mut w = png_encoder(&mut writer, mask.width, mask.height, png::ColorType::Grayscale, meta)?;
    w.write_image_data(&bytes)
        .map_err(|e| Error::Png { path: path.display().to_string(), reason: e.to_string() })?;
    w.finish()
        .map_err(|e| Error::Png { path: path.display().to_string(), reason: e.to_string() })?;
    write_world_file(path, &mask.geo)
}

pub fn read_mask_png(path: &Path) -> Result<MaskRaster> {
    let (bytes, width, height, color) = read_png_bytes(path)?;
    if color != png::ColorType::Grayscale {
        return Err(Error::BadFormat {
            path: path.display().to_string(),
            reason: format!("expected grayscale mask, got {color:?}"),
        });
    }
    let geo = read_world_file(path)?;
    let (_, lat) = geo.pixel_to_geo(width as f64 / 2.0, height as f64 / 2.0);
    let meters_per_pixel = geo.meters_per_pixel_at(lat);
    Ok(MaskRaster {
        width,
        height,
        values: bytes.iter().map(|&b| b as f32).collect(),
        geo,
        meters_per_pixel,
    })
}

/// Write a 3-channel image as 8-bit RGB PNG plus its world-file sidecar.
pub fn write_image_png(path: &Path, img: &ImageRaster, meta: Option<&str>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut writer = BufWriter::new(file);
    let mut w = png_encoder(&mut writer, img.width, img.height, png::ColorType::Rgb, meta)?;
    w.write_image_data(&img.data)
        .map_err(|e| Error::Png { path: path.display().to_string(), reason: e.to_string() })?;
    w.finish()
        .map_err(|e| Error::Png { path: path.display().to_string(), reason: e.to_string() })?;
    write_world_file(path, &img.geo)
}

pub fn read_image_png(path: &Path) -> Result<ImageRaster> {
    let (bytes, width, height, color) = read_png_bytes(path)?;
    if color != png::ColorType::Rgb {
        return Err(Error::BadFormat {
            path: path.display().to_string(),
            reason: format!("expected RGB image, got {color:?}"),
        });
    }
    let geo = read_world_file(path)?;
    let (_, lat) = geo.pixel_to_geo(width as f64 / 2.0, height as f64 / 2.0);
    let meters_per_pixel = geo.meters_per_pixel_at(lat);
    Ok(ImageRaster { width, height, data: bytes, geo, meters_per_pixel })
}

fn read_png_bytes(path: &Path) -> Result<(Vec<u8>, usize, usize, png::ColorType)> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut reader = BufReader::new(file);
    let mut raw = Vec::new();
    reader.read_to_end(&mut raw).map_err(|e| Error::io(path.display().to_string(), e))?;
    let decoder = png::Decoder::new(&raw[..]);
    let mut png_reader = decoder
        .read_info()
        .map_err(|e| Error::Png { path: path.display().to_string(), reason: e.to_string() })?;
    let mut buf = vec![0; png_reader.output_buffer_size()];
    let info = png_reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Png { path: path.display().to_string(), reason: e.to_string() })?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::BadFormat {
            path: path.display().to_string(),
            reason: format!("expected 8-bit depth, got {:?}", info.bit_depth),
        });
    }
    buf.truncate(info.buffer_size());
    Ok((buf, info.width as usize, info.height as usize, info.color_type))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_png_round_trip() {
        let dir = std::env::temp_dir().join("satpipe_raster_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mask.png");

        let mut mask = MaskRaster::zeros(5, 4, GeoTransform::north_up(10.0, 20.0, 0.001), 0.0);
        mask.meters_per_pixel = mask.geo.meters_per_pixel_at(20.0);
        mask.set(2, 1, 255.0);
        mask.set(4, 3, 17.0);
        write_mask_png(&path, &mask, Some("config=deadbeef seed=1")).unwrap();

        let back = read_mask_png(&path).unwrap();
        assert_eq!(back.width, 5);
        assert_eq!(back.height, 4);
        assert_eq!(back.at(2, 1), 255.0);
        assert_eq!(back.at(4, 3), 17.0);
        assert_eq!(back.at(0, 0), 0.0);
        assert!((back.geo.c - 10.0).abs() < 1e-12);
    }

    #[test]
    fn image_png_round_trip() {
        let dir = std::env::temp_dir().join("satpipe_raster_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("img.png");

        let mut img = ImageRaster::flat(3, 2);
        img.set_pixel(0, 0, [10, 20, 30]);
        img.set_pixel(2, 1, [240, 0, 128]);
        write_image_png(&path, &img, None).unwrap();

        let back = read_image_png(&path).unwrap();
        assert_eq!(back.data, img.data);
    }

    #[test]
    fn target_tensor_is_binary_unit_scale() {
        let mut m = MaskRaster::flat(2, 2);
        m.set(0, 0, 255.0);
        m.set(1, 1, 254.0);
        let t = m.to_target_tensor();
        assert_eq!(t.shape(), [1, 1, 2, 2]);
        assert_eq!(t.data(), &[1.0, 0.0, 0.0, 1.0]);
    }
}
