//! Vector-to-raster conversion and the image preprocessing steps: scanline
//! polygon fill, contour and centroid layers, road stroking, zero padding,
//! per-channel color rescaling and rotation augmentation.

use crate::error::{Error, Result};
use crate::geo::GeoTransform;
use crate::raster::{ImageRaster, MaskRaster};
use crate::vector::{polygon_centroid, Geometry, Pt, Ring, VectorLayer};

pub const ON: f32 = 255.0;

/// Default radius of the disc drawn at each building centroid, in pixels.
pub const DEFAULT_CENTROID_RADIUS_PX: f64 = 3.0;

/// Default road stroke width in pixels.
pub const DEFAULT_ROAD_WIDTH_PX: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RasterMode {
    /// Polygon interiors.
    Fill,
    /// Polygon boundary pixels (interior pixels touching the outside).
    Contour,
    /// A disc of the given radius at each polygon centroid (and at each
    /// point feature).
    Centroid { radius_px: f64 },
    /// Polylines stroked at the given width.
    Road { width_px: f64 },
}

/// Rasterize `layer` onto a `width`×`height` grid with the given transform.
///
/// Pixel-in-polygon rule: a pixel is on iff its center is covered, with ties
/// resolved toward inclusion. Pixel (x, y) covers [x, x+1)×[y, y+1); its
/// center is (x+0.5, y+0.5). Fill/Contour consume polygons, Centroid consumes
/// polygons and points, Road consumes polylines; other geometries are
/// ignored by the respective mode.
pub fn rasterize_layer(
    layer: &VectorLayer,
    width: usize,
    height: usize,
    geo: &GeoTransform,
    meters_per_pixel: f64,
    mode: RasterMode,
) -> Result<MaskRaster> {
    let mut mask = MaskRaster::zeros(width, height, *geo, meters_per_pixel);
    for feature in &layer.features {
        match (&feature.geometry, mode) {
            (Geometry::Polygon(rings), RasterMode::Fill) => {
                let px_rings = rings_to_pixels(rings, geo)?;
                fill_rings(&px_rings, &mut mask);
            }
            (Geometry::Polygon(rings), RasterMode::Contour) => {
                let px_rings = rings_to_pixels(rings, geo)?;
                let mut scratch = MaskRaster::zeros(width, height, *geo, meters_per_pixel);
                fill_rings(&px_rings, &mut scratch);
                boundary_of(&scratch, &mut mask);
            }
            (Geometry::Polygon(rings), RasterMode::Centroid { radius_px }) => {
                let px_rings = rings_to_pixels(rings, geo)?;
                let c = polygon_centroid(&px_rings);
                draw_disc(c, radius_px, &mut mask);
            }
            (Geometry::Point(p), RasterMode::Centroid { radius_px }) => {
                let (x, y) = geo.geo_to_pixel(p.x, p.y)?;
                draw_disc(Pt::new(x, y), radius_px, &mut mask);
            }
            (Geometry::Polyline(pts), RasterMode::Road { width_px }) => {
                let px: Vec<Pt> = pts
                    .iter()
                    .map(|p| geo.geo_to_pixel(p.x, p.y).map(|(x, y)| Pt::new(x, y)))
                    .collect::<Result<_>>()?;
                stroke_polyline(&px, width_px, &mut mask);
            }
            _ => {}
        }
    }
    Ok(mask)
}

fn rings_to_pixels(rings: &[Ring], geo: &GeoTransform) -> Result<Vec<Ring>> {
    rings
        .iter()
        .map(|ring| {
            ring.iter()
                .map(|p| geo.geo_to_pixel(p.x, p.y).map(|(x, y)| Pt::new(x, y)))
                .collect::<Result<Ring>>()
        })
        .collect()
}

/// Even-odd scanline fill sampling pixel centers. Horizontal edges never
/// cross a center row under the half-open vertex rule, so they contribute
/// nothing on their own; the adjacent edges close the span.
fn fill_rings(rings: &[Ring], mask: &mut MaskRaster) {
    let mut crossings: Vec<f64> = Vec::new();
    for y in 0..mask.height {
        let sy = y as f64 + 0.5;
        crossings.clear();
        for ring in rings {
            let n = ring.len();
            for i in 0..n {
                let p = ring[i];
                let q = ring[(i + 1) % n];
                if (p.y <= sy && q.y > sy) || (q.y <= sy && p.y > sy) {
                    let t = (sy - p.y) / (q.y - p.y);
                    crossings.push(p.x + t * (q.x - p.x));
                }
            }
        }
        crossings.sort_by(|a, b| a.partial_cmp(b).expect("finite crossing"));
        for pair in crossings.chunks_exact(2) {
            let (xa, xb) = (pair[0], pair[1]);
            // Centers x+0.5 in [xa, xb]; ties included on both sides.
            let x_min = (xa - 0.5).ceil().max(0.0) as usize;
            let x_max = (xb - 0.5).floor().min(mask.width as f64 - 1.0);
            if x_max < 0.0 {
                continue;
            }
            for x in x_min..=(x_max as usize) {
                mask.set(x, y, ON);
            }
        }
    }
}

/// Interior-boundary pixels of `filled`: on-pixels with a rook neighbour off
/// the shape (or on the raster edge).
fn boundary_of(filled: &MaskRaster, out: &mut MaskRaster) {
    let (w, h) = (filled.width, filled.height);
    for y in 0..h {
        for x in 0..w {
            if filled.at(x, y) == 0.0 {
                continue;
            }
            let on_edge = x == 0 || y == 0 || x == w - 1 || y == h - 1;
            let exposed = on_edge
                || filled.at(x - 1, y) == 0.0
                || filled.at(x + 1, y) == 0.0
                || filled.at(x, y - 1) == 0.0
                || filled.at(x, y + 1) == 0.0;
            if exposed {
                out.set(x, y, ON);
            }
        }
    }
}

fn draw_disc(center: Pt, radius_px: f64, mask: &mut MaskRaster) {
    let r2 = radius_px * radius_px;
    let y_min = ((center.y - radius_px - 0.5).floor().max(0.0)) as usize;
    let y_max = ((center.y + radius_px).ceil().min(mask.height as f64 - 1.0).max(0.0)) as usize;
    let x_min = ((center.x - radius_px - 0.5).floor().max(0.0)) as usize;
    let x_max = ((center.x + radius_px).ceil().min(mask.width as f64 - 1.0).max(0.0)) as usize;
    if mask.width == 0 || mask.height == 0 {
        return;
    }
    for y in y_min..=y_max {
        let dy = y as f64 + 0.5 - center.y;
        for x in x_min..=x_max {
            let dx = x as f64 + 0.5 - center.x;
            if dx * dx + dy * dy <= r2 {
                mask.set(x, y, ON);
            }
        }
    }
}

fn stroke_polyline(pts: &[Pt], width_px: f64, mask: &mut MaskRaster) {
    let half = width_px / 2.0;
    for seg in pts.windows(2) {
        let (p, q) = (seg[0], seg[1]);
        let x_min = (p.x.min(q.x) - half - 1.0).floor().max(0.0) as usize;
        let x_max = ((p.x.max(q.x) + half + 1.0).ceil()).min(mask.width as f64 - 1.0).max(0.0);
        let y_min = (p.y.min(q.y) - half - 1.0).floor().max(0.0) as usize;
        let y_max = ((p.y.max(q.y) + half + 1.0).ceil()).min(mask.height as f64 - 1.0).max(0.0);
        if mask.width == 0 || mask.height == 0 {
            return;
        }
        for y in y_min..=(y_max as usize) {
            for x in x_min..=(x_max as usize) {
                let c = Pt::new(x as f64 + 0.5, y as f64 + 0.5);
                if dist_to_segment(c, p, q) <= half {
                    mask.set(x, y, ON);
                }
            }
        }
    }
}

fn dist_to_segment(c: Pt, p: Pt, q: Pt) -> f64 {
    let (vx, vy) = (q.x - p.x, q.y - p.y);
    let len2 = vx * vx + vy * vy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((c.x - p.x) * vx + (c.y - p.y) * vy) / len2).clamp(0.0, 1.0)
    };
    let (nx, ny) = (p.x + t * vx, p.y + t * vy);
    ((c.x - nx).powi(2) + (c.y - ny).powi(2)).sqrt()
}

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

/// Zero-pad an image on all sides: (H, W) → (H + 2·pad, W + 2·pad) with the
/// original at offset (pad, pad).
pub fn pad_image(img: &ImageRaster, pad: usize) -> ImageRaster {
    let (w, h) = (img.width, img.height);
    let mut out = ImageRaster::zeros(w + 2 * pad, h + 2 * pad, img.geo, img.meters_per_pixel);
    for y in 0..h {
        let src = (y * w) * 3;
        let dst = ((y + pad) * out.width + pad) * 3;
        out.data[dst..dst + w * 3].copy_from_slice(&img.data[src..src + w * 3]);
    }
    out
}

pub fn pad_mask(mask: &MaskRaster, pad: usize) -> MaskRaster {
    let (w, h) = (mask.width, mask.height);
    let mut out = MaskRaster::zeros(w + 2 * pad, h + 2 * pad, mask.geo, mask.meters_per_pixel);
    for y in 0..h {
        let src = y * w;
        let dst = (y + pad) * out.width + pad;
        out.values[dst..dst + w].copy_from_slice(&mask.values[src..src + w]);
    }
    out
}

/// Crop `pad` pixels from each side; inverse of [`pad_image`] on the interior.
pub fn crop_image(img: &ImageRaster, pad: usize) -> ImageRaster {
    let (w, h) = (img.width - 2 * pad, img.height - 2 * pad);
    let mut out = ImageRaster::zeros(w, h, img.geo, img.meters_per_pixel);
    for y in 0..h {
        let src = ((y + pad) * img.width + pad) * 3;
        let dst = (y * w) * 3;
        out.data[dst..dst + w * 3].copy_from_slice(&img.data[src..src + w * 3]);
    }
    out
}

pub fn crop_mask(mask: &MaskRaster, pad: usize) -> MaskRaster {
    let (w, h) = (mask.width - 2 * pad, mask.height - 2 * pad);
    let mut out = MaskRaster::zeros(w, h, mask.geo, mask.meters_per_pixel);
    for y in 0..h {
        let src = (y + pad) * mask.width + pad;
        let dst = y * w;
        out.values[dst..dst + w].copy_from_slice(&mask.values[src..src + w]);
    }
    out
}

/// Stretch each channel independently so its maximum reaches 255. All-zero
/// channels pass through unchanged.
pub fn rescale_colors(img: &ImageRaster) -> ImageRaster {
    let mut maxes = [0u8; 3];
    for px in img.data.chunks_exact(3) {
        for c in 0..3 {
            maxes[c] = maxes[c].max(px[c]);
        }
    }
    let mut out = img.clone();
    for c in 0..3 {
        if maxes[c] == 0 || maxes[c] == 255 {
            continue;
        }
        let scale = 255.0 / maxes[c] as f64;
        for px in out.data.chunks_exact_mut(3) {
            px[c] = (px[c] as f64 * scale).round().clamp(0.0, 255.0) as u8;
        }
    }
    out
}

/// Rotate a square image 90° clockwise: dst(x, y) = src(y, H−1−x).
pub fn rot90_image(img: &ImageRaster) -> ImageRaster {
    assert_eq!(img.width, img.height, "rotation requires square input");
    let n = img.width;
    let mut out = ImageRaster::zeros(n, n, img.geo, img.meters_per_pixel);
    for y in 0..n {
        for x in 0..n {
            let src = ((n - 1 - x) * n + y) * 3;
            let dst = (y * n + x) * 3;
            out.data[dst..dst + 3].copy_from_slice(&img.data[src..src + 3]);
        }
    }
    out
}

pub fn rot90_mask(mask: &MaskRaster) -> MaskRaster {
    assert_eq!(mask.width, mask.height, "rotation requires square input");
    let n = mask.width;
    let mut out = MaskRaster::zeros(n, n, mask.geo, mask.meters_per_pixel);
    for y in 0..n {
        for x in 0..n {
            out.set(x, y, mask.at(y, n - 1 - x));
        }
    }
    out
}

/// Index map matching [`rot90_mask`]: pixel (x, y) lands at (H−1−y, x).
pub fn rot90_coord(x: usize, y: usize, side: usize) -> (usize, usize) {
    (side - 1 - y, x)
}

/// Rotate every plane of a square (n, c, h, w) tensor 90° clockwise, with
/// the same index map as [`rot90_mask`].
pub fn rot90_tensor(t: &crate::tensor::Tensor) -> crate::tensor::Tensor {
    let [n, c, h, w] = t.shape();
    assert_eq!(h, w, "rotation requires square input");
    let mut out = crate::tensor::Tensor::zeros([n, c, h, w]);
    for ni in 0..n {
        for ci in 0..c {
            let src = t.plane(ni, ci);
            let dst = out.plane_mut(ni, ci);
            for y in 0..h {
                for x in 0..w {
                    dst[y * w + x] = src[(h - 1 - x) * w + y];
                }
            }
        }
    }
    out
}

/// Rotation augmentation over prepared (input tensor, label mask) training
/// pairs: each pair expands to itself plus the three quarter turns.
pub fn augment_tensor_pairs(
    pairs: &[(crate::tensor::Tensor, MaskRaster)],
) -> Result<Vec<(crate::tensor::Tensor, MaskRaster)>> {
    let mut out = Vec::with_capacity(pairs.len() * 4);
    for (img, mask) in pairs {
        let [_, _, h, w] = img.shape();
        if h != w || mask.width != mask.height || mask.width != w {
            return Err(Error::InvalidGeometry(format!(
                "augment requires square aligned inputs, got tensor {h}x{w}, mask {}x{}",
                mask.width, mask.height
            )));
        }
        let mut t = img.clone();
        let mut m = mask.clone();
        out.push((t.clone(), m.clone()));
        for _ in 0..3 {
            t = rot90_tensor(&t);
            m = rot90_mask(&m);
            out.push((t.clone(), m.clone()));
        }
    }
    Ok(out)
}

/// The original pair plus the three quarter-turn rotations, image and mask
/// rotated identically. Augmented pairs are for training only; the geo
/// transform is carried along unrotated.
pub fn augment(img: &ImageRaster, mask: &MaskRaster) -> Result<Vec<(ImageRaster, MaskRaster)>> {
    if img.width != img.height || mask.width != mask.height {
        return Err(Error::InvalidGeometry(format!(
            "augment requires square inputs, got {}x{} and {}x{}",
            img.width, img.height, mask.width, mask.height
        )));
    }
    let mut out = Vec::with_capacity(4);
    out.push((img.clone(), mask.clone()));
    for _ in 0..3 {
        let (prev_img, prev_mask) = out.last().expect("non-empty");
        out.push((rot90_image(prev_img), rot90_mask(prev_mask)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::point_in_rings;

    fn square_layer(x0: f64, y0: f64, side: f64, class: &str) -> VectorLayer {
        let ring = vec![
            Pt::new(x0, y0),
            Pt::new(x0 + side, y0),
            Pt::new(x0 + side, y0 + side),
            Pt::new(x0, y0 + side),
        ];
        let mut layer = VectorLayer::new();
        layer.push(Geometry::Polygon(vec![ring]), class).unwrap();
        layer
    }

    fn fill(layer: &VectorLayer, w: usize, h: usize) -> MaskRaster {
        rasterize_layer(layer, w, h, &GeoTransform::identity(), 1.0, RasterMode::Fill).unwrap()
    }

    #[test]
    fn filled_square_has_exactly_100_pixels() {
        let layer = square_layer(10.0, 10.0, 10.0, "building");
        let mask = fill(&layer, 32, 32);
        let on = mask.values.iter().filter(|&&v| v == ON).count();
        assert_eq!(on, 100);

        // Scanline result matches a center-sampling point-in-polygon oracle.
        let rings = match &layer.features[0].geometry {
            Geometry::Polygon(r) => r.clone(),
            _ => unreachable!(),
        };
        for y in 0..32 {
            for x in 0..32 {
                let inside =
                    point_in_rings(Pt::new(x as f64 + 0.5, y as f64 + 0.5), &rings);
                assert_eq!(mask.at(x, y) == ON, inside, "pixel ({x},{y})");
            }
        }
    }

    #[test]
    fn fill_is_idempotent() {
        let layer = square_layer(3.0, 3.0, 7.0, "building");
        let a = fill(&layer, 20, 20);
        let b = fill(&layer, 20, 20);
        assert_eq!(a, b);
    }

    #[test]
    fn filled_pixel_count_close_to_polygon_area() {
        // Convex polygon: pixel count within perimeter-length of true area.
        let ring = vec![
            Pt::new(4.2, 3.1),
            Pt::new(17.8, 5.3),
            Pt::new(15.4, 18.9),
            Pt::new(6.1, 16.2),
        ];
        let area = crate::vector::ring_signed_area(&ring).abs();
        let perimeter: f64 = (0..4)
            .map(|i| {
                let p = ring[i];
                let q = ring[(i + 1) % 4];
                ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt()
            })
            .sum();
        let mut layer = VectorLayer::new();
        layer.push(Geometry::Polygon(vec![ring]), "building").unwrap();
        let mask = fill(&layer, 24, 24);
        let on = mask.values.iter().filter(|&&v| v == ON).count() as f64;
        assert!((on - area).abs() <= perimeter, "count {on} vs area {area} (perim {perimeter})");
    }

    #[test]
    fn centroid_mode_draws_disc_at_square_center() {
        let layer = square_layer(10.0, 10.0, 10.0, "building");
        let mask = rasterize_layer(
            &layer,
            32,
            32,
            &GeoTransform::identity(),
            1.0,
            RasterMode::Centroid { radius_px: 3.0 },
        )
        .unwrap();
        assert!(mask.values.contains(&ON));
        // Mean of on-pixel centers is the square's centroid (15, 15).
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
        for y in 0..32 {
            for x in 0..32 {
                if mask.at(x, y) == ON {
                    sx += x as f64 + 0.5;
                    sy += y as f64 + 0.5;
                    n += 1.0;
                }
            }
        }
        assert!((sx / n - 15.0).abs() < 1e-9);
        assert!((sy / n - 15.0).abs() < 1e-9);
        // All disc pixels lie within the radius.
        for y in 0..32 {
            for x in 0..32 {
                if mask.at(x, y) == ON {
                    let d = ((x as f64 + 0.5 - 15.0).powi(2) + (y as f64 + 0.5 - 15.0).powi(2))
                        .sqrt();
                    assert!(d <= 3.0 + 1e-9);
                }
            }
        }
    }

    #[test]
    fn empty_layer_gives_all_zero_mask() {
        let layer = VectorLayer::new();
        let mask = fill(&layer, 16, 16);
        assert!(mask.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn contour_is_boundary_of_fill() {
        let layer = square_layer(5.0, 5.0, 6.0, "building");
        let filled = fill(&layer, 20, 20);
        let contour = rasterize_layer(
            &layer,
            20,
            20,
            &GeoTransform::identity(),
            1.0,
            RasterMode::Contour,
        )
        .unwrap();
        // Contour ⊂ fill, and strictly smaller for a 6×6 square.
        for i in 0..400 {
            if contour.values[i] == ON {
                assert_eq!(filled.values[i], ON);
            }
        }
        let n_fill = filled.values.iter().filter(|&&v| v == ON).count();
        let n_contour = contour.values.iter().filter(|&&v| v == ON).count();
        assert_eq!(n_fill, 36);
        assert_eq!(n_contour, 20);
    }

    #[test]
    fn road_stroke_has_requested_width() {
        // Line along y = 10.5 (through pixel centers): a 5-px stroke covers
        // exactly the 5 rows whose centers are within 2.5.
        let mut layer = VectorLayer::new();
        layer
            .push(
                Geometry::Polyline(vec![Pt::new(2.0, 10.5), Pt::new(18.0, 10.5)]),
                "road",
            )
            .unwrap();
        let mask = rasterize_layer(
            &layer,
            20,
            20,
            &GeoTransform::identity(),
            1.0,
            RasterMode::Road { width_px: 5.0 },
        )
        .unwrap();
        let col: Vec<bool> = (0..20).map(|y| mask.at(10, y) == ON).collect();
        let on_rows = col.iter().filter(|&&b| b).count();
        assert_eq!(on_rows, 5);
        assert!(col[8] && col[9] && col[10] && col[11] && col[12]);
    }

    #[test]
    fn pad_sizes_and_identity() {
        let img = ImageRaster::flat(400, 400);
        let padded = pad_image(&img, 8);
        assert_eq!((padded.width, padded.height), (416, 416));
        assert_eq!(padded.width % 32, 0);

        let same = pad_image(&img, 0);
        assert_eq!(same, img);

        let mut small = ImageRaster::flat(64, 64);
        small.set_pixel(10, 20, [1, 2, 3]);
        let p = pad_image(&small, 8);
        assert_eq!((p.width, p.height), (80, 80));
        assert_eq!(p.channel_at(18, 28, 0), 1);
        assert_eq!(p.channel_at(0, 0, 0), 0);
        // pad then crop restores the original.
        assert_eq!(crop_image(&p, 8), small);
    }

    #[test]
    fn rescale_colors_behaviour() {
        let mut img = ImageRaster::flat(2, 1);
        img.set_pixel(0, 0, [180, 255, 0]);
        img.set_pixel(1, 0, [90, 100, 0]);
        let out = rescale_colors(&img);
        // Channel max 180 → scale 255/180; new max 255.
        assert_eq!(out.channel_at(0, 0, 0), 255);
        assert_eq!(out.channel_at(1, 0, 0), (90.0f64 * 255.0 / 180.0).round() as u8);
        // Channel already at 255 → unchanged.
        assert_eq!(out.channel_at(0, 0, 1), 255);
        assert_eq!(out.channel_at(1, 0, 1), 100);
        // All-zero channel untouched.
        assert_eq!(out.channel_at(0, 0, 2), 0);
        assert_eq!(out.channel_at(1, 0, 2), 0);
    }

    #[test]
    fn augment_produces_four_aligned_pairs() {
        let mut img = ImageRaster::flat(9, 9);
        img.set_pixel(2, 7, [9, 9, 9]);
        let mut mask = MaskRaster::flat(9, 9);
        mask.set(2, 7, ON);

        let pairs = augment(&img, &mask).unwrap();
        assert_eq!(pairs.len(), 4);
        // Four quarter turns return to the original.
        let full_turn = rot90_mask(&rot90_mask(&pairs[2].1));
        assert_eq!(full_turn, pairs[0].1);
        // Image and mask stay aligned in every rotation.
        for (im, ma) in &pairs {
            for y in 0..9 {
                for x in 0..9 {
                    assert_eq!(im.channel_at(x, y, 0) == 9, ma.at(x, y) == ON);
                }
            }
        }
        // Non-square input is rejected.
        let rect = ImageRaster::flat(4, 5);
        assert!(augment(&rect, &MaskRaster::flat(4, 5)).is_err());
    }

    #[test]
    fn tensor_rotation_matches_mask_rotation() {
        let side = 6;
        let mut img = crate::tensor::Tensor::zeros([1, 3, side, side]);
        let mut mask = MaskRaster::flat(side, side);
        let idx = img.idx(0, 1, 4, 2);
        img.data_mut()[idx] = 1.0;
        mask.set(2, 4, ON);
        let pairs = augment_tensor_pairs(&[(img, mask)]).unwrap();
        assert_eq!(pairs.len(), 4);
        for (t, m) in &pairs {
            for y in 0..side {
                for x in 0..side {
                    let lit = t.at(0, 1, y, x) == 1.0;
                    assert_eq!(lit, m.at(x, y) == ON, "misaligned at ({x},{y})");
                }
            }
        }
    }

    #[test]
    fn rot90_moves_point_to_mapped_coordinate() {
        let side = 100;
        let mut mask = MaskRaster::flat(side, side);
        mask.set(10, 20, ON);
        let rotated = rot90_mask(&mask);
        let (rx, ry) = rot90_coord(10, 20, side);
        assert_eq!(rotated.at(rx, ry), ON);
        assert_eq!(rotated.values.iter().filter(|&&v| v == ON).count(), 1);
    }

    #[test]
    fn rotationally_symmetric_mask_fixed_by_rotation() {
        let mut mask = MaskRaster::flat(8, 8);
        // Center 2×2 block is invariant under quarter turns.
        for (x, y) in [(3, 3), (3, 4), (4, 3), (4, 4)] {
            mask.set(x, y, ON);
        }
        let pairs = augment(&ImageRaster::flat(8, 8), &mask).unwrap();
        for (_, m) in &pairs {
            assert_eq!(m, &mask);
        }
    }
}
