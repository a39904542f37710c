//! Synthetic data generation: shape corpora for training checks, corrupted
//! label corpora for the judge, controlled feature tables for the
//! cross-validation harness, and a small on-disk two-country fixture that
//! exercises the whole pipeline.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::features::{write_clusters, Aggregate, ClusterSite, FeatureRow};
use crate::geo::{haversine_km, GeoBox, GeoTransform};
use crate::grid::{make_grid, region_from_km, TileBounds};
use crate::judge::JudgeSample;
use crate::raster::{write_image_png, write_mask_png, ImageRaster, MaskRaster};
use crate::rasterize::{rasterize_layer, RasterMode, ON};
use crate::seed::{derive_seed, rng_from_seed};
use crate::tensor::Tensor;
use crate::vector::{write_geojson, Geometry, Pt, VectorLayer};

// ---------------------------------------------------------------------------
// Shape corpus: bright rectangles and discs on a dark noisy background
// ---------------------------------------------------------------------------

/// One RGB image with its binary shape mask. Two or three non-overlapping
/// shapes per image, bright against background noise.
pub fn shape_sample(side: usize, rng: &mut ChaCha8Rng) -> (Tensor, MaskRaster) {
    let mut mask = MaskRaster::flat(side, side);
    let n_shapes = rng.gen_range(2..=3);
    for k in 0..n_shapes {
        // Anchor shapes to separated thirds of the image.
        let third = side / 3;
        let cx = (k % 3) * third + rng.gen_range(third / 3..2 * third / 3);
        let cy = rng.gen_range(side / 5..4 * side / 5);
        let r = rng.gen_range(side / 12..side / 7);
        if rng.gen::<bool>() {
            for y in cy.saturating_sub(r)..(cy + r).min(side) {
                for x in cx.saturating_sub(r)..(cx + r).min(side) {
                    mask.set(x, y, ON);
                }
            }
        } else {
            for y in cy.saturating_sub(r)..(cy + r + 1).min(side) {
                for x in cx.saturating_sub(r)..(cx + r + 1).min(side) {
                    let d2 = (x as f64 - cx as f64).powi(2) + (y as f64 - cy as f64).powi(2);
                    if d2 <= (r * r) as f64 {
                        mask.set(x, y, ON);
                    }
                }
            }
        }
    }
    let mut img = Tensor::zeros([1, 3, side, side]);
    for y in 0..side {
        for x in 0..side {
            let inside = mask.at(x, y) == ON;
            for c in 0..3 {
                let base = if inside { 0.75 } else { 0.12 };
                let v = base + 0.08 * rng.gen::<f64>();
                let idx = img.idx(0, c, y, x);
                img.data_mut()[idx] = v;
            }
        }
    }
    (img, mask)
}

pub fn shapes_dataset(n: usize, side: usize, seed: u64) -> Vec<(Tensor, MaskRaster)> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| shape_sample(side, &mut rng)).collect()
}

// ---------------------------------------------------------------------------
// Judge corpus: complete images, partially erased labels
// ---------------------------------------------------------------------------

/// Samples whose images show `objects_per_sample` bright squares; a
/// `corrupt_fraction` of the labels have half their objects erased.
/// Returns the samples and the per-sample corruption flags.
pub fn judge_corpus(
    n: usize,
    side: usize,
    objects_per_sample: usize,
    corrupt_fraction: f64,
    seed: u64,
) -> (Vec<JudgeSample>, Vec<bool>) {
    let mut rng = rng_from_seed(seed);
    let n_corrupt = (corrupt_fraction * n as f64).round() as usize;
    // Deterministic shuffled corruption assignment.
    let mut corrupted: Vec<bool> = (0..n).map(|i| i < n_corrupt).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        corrupted.swap(i, j);
    }

    let cell = side / objects_per_sample.max(1);
    let samples = (0..n)
        .map(|i| {
            // Objects on a fixed lattice with jitter, so they never merge.
            let mut full = MaskRaster::flat(side, side);
            let mut centers = Vec::new();
            for k in 0..objects_per_sample {
                let cx = k * cell + cell / 2 + rng.gen_range(0..cell / 4);
                let cy = side / 2 + rng.gen_range(0..cell / 4) - cell / 8;
                let r = (cell / 5).max(2);
                for y in cy.saturating_sub(r)..(cy + r).min(side) {
                    for x in cx.saturating_sub(r)..(cx + r).min(side) {
                        full.set(x, y, ON);
                    }
                }
                centers.push((cx, cy, r));
            }
            let mut image = Tensor::zeros([1, 3, side, side]);
            for y in 0..side {
                for x in 0..side {
                    let inside = full.at(x, y) == ON;
                    for c in 0..3 {
                        let base = if inside { 0.8 } else { 0.1 };
                        let idx = image.idx(0, c, y, x);
                        image.data_mut()[idx] = base + 0.05 * rng.gen::<f64>();
                    }
                }
            }
            let reference = if corrupted[i] {
                // Erase every second object from the label only.
                let mut partial = full.clone();
                for (k, &(cx, cy, r)) in centers.iter().enumerate() {
                    if k % 2 == 1 {
                        continue;
                    }
                    for y in cy.saturating_sub(r)..(cy + r).min(side) {
                        for x in cx.saturating_sub(r)..(cx + r).min(side) {
                            partial.set(x, y, 0.0);
                        }
                    }
                }
                partial
            } else {
                full
            };
            JudgeSample { cell_id: format!("s{i:04}"), image, reference }
        })
        .collect();
    (samples, corrupted)
}

// ---------------------------------------------------------------------------
// Controlled feature table for the CV harness
// ---------------------------------------------------------------------------

/// Feature rows with known signal structure: three independent latent
/// factors drive buildings, roads and nightlight respectively, and the
/// wealth label mixes them (nightlight strongest, then roads, then
/// buildings) plus noise. Aggregates are derived from the latents so each
/// variable group carries its own information.
pub fn benchmark_rows(countries: &[&str], per_country: usize, seed: u64) -> Vec<FeatureRow> {
    let mut rng = rng_from_seed(seed);
    let quantile_offsets = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let mut rows = Vec::new();
    for (ci, country) in countries.iter().enumerate() {
        for k in 0..per_country {
            let zb = rng.gen::<f64>() * 2.0 - 1.0;
            let zr = rng.gen::<f64>() * 2.0 - 1.0;
            let zn = rng.gen::<f64>() * 2.0 - 1.0;
            let noise = 0.15 * (rng.gen::<f64>() - 0.5);
            let wealth = 0.5 * zb + 0.7 * zr + 1.0 * zn + noise;

            let mk_agg = |latent: f64, scale: f64, spread: f64, rng: &mut ChaCha8Rng| {
                let mean = scale * (latent + 1.2) + 0.02 * rng.gen::<f64>();
                Aggregate {
                    sum: mean * 10.0,
                    mean,
                    quantiles: quantile_offsets.iter().map(|o| mean + o * spread).collect(),
                }
            };
            let aggregates = vec![
                mk_agg(zb, 8.0, 1.5, &mut rng),
                mk_agg(zr, 400.0, 60.0, &mut rng),
                mk_agg(zr * 0.8 + 0.1 * zb, 3.0, 0.5, &mut rng),
                mk_agg(zn, 25.0, 4.0, &mut rng),
            ];
            rows.push(FeatureRow {
                cluster_id: format!("{country}{k:03}"),
                country: country.to_string(),
                n_cells: 10,
                aggregates,
                wealth: Some(wealth),
                wealthpooled: Some(wealth + 0.2 * ci as f64),
            });
        }
    }
    rows
}

// ---------------------------------------------------------------------------
// On-disk pipeline fixture
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct FixtureOptions {
    /// Grid columns (km) per country region.
    pub cols_km: usize,
    /// Grid rows (km) per country region.
    pub rows_km: usize,
    /// Tile image size in pixels (one tile per km cell).
    pub tile_px: usize,
    /// Survey clusters per country.
    pub clusters_per_country: usize,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        // 2 × (8 × 4) = 64 tiles.
        FixtureOptions { cols_km: 8, rows_km: 4, tile_px: 24, clusters_per_country: 24 }
    }
}

#[derive(Debug, Clone)]
pub struct FixtureSummary {
    pub dir: PathBuf,
    pub vectors: PathBuf,
    pub images_dir: PathBuf,
    pub nightlight: PathBuf,
    pub clusters: PathBuf,
    /// `COUNTRY:min_lon:min_lat:max_lon:max_lat` per region, `;`-separated —
    /// the grid specification the pipeline config consumes.
    pub regions: String,
    pub n_tiles: usize,
}

/// Write a complete synthetic two-country fixture: building and road
/// vectors, per-tile images rendered from those vectors, a nightlight
/// raster correlated with building density, and survey clusters whose
/// wealth labels mix building, road and nightlight signal.
pub fn write_fixture(dir: &Path, opts: &FixtureOptions, seed: u64) -> Result<FixtureSummary> {
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir.display().to_string(), e))?;
    let images_dir = dir.join("images");
    std::fs::create_dir_all(&images_dir)
        .map_err(|e| crate::Error::io(images_dir.display().to_string(), e))?;

    let region_a = region_from_km(10.0, -2.0, opts.cols_km as f64, opts.rows_km as f64);
    let region_b = GeoBox::new(
        region_a.max_lon,
        region_a.min_lat,
        region_a.max_lon + region_a.width(),
        region_a.max_lat,
    );
    let regions = [("AA", region_a), ("BB", region_b)];
    let regions_str = regions
        .iter()
        .map(|(c, r)| format!("{c}:{}:{}:{}:{}", r.min_lon, r.min_lat, r.max_lon, r.max_lat))
        .collect::<Vec<_>>()
        .join(";");

    let mut rng = rng_from_seed(derive_seed(seed, "fixture"));
    let mut layer = VectorLayer::new();
    let mut all_tiles: Vec<TileBounds> = Vec::new();
    // Ground-truth per-cell counts for wealth construction.
    let mut truth_buildings: Vec<f64> = Vec::new();
    let mut truth_road: Vec<f64> = Vec::new();

    for (country, region) in &regions {
        let tiles = make_grid(region, 1.0, country)?;
        for tile in &tiles {
            let b = &tile.bounds;
            let col: usize = tile.cell_id[tile.cell_id.len() - 3..].parse().expect("cell id");
            // Density gradient west → east, plus jitter.
            let density = 0.15 + 0.8 * col as f64 / opts.cols_km as f64;
            let mut n_buildings = 0.0;
            // Up to three separated building slots per cell.
            let slots = [(0.25, 0.25), (0.72, 0.4), (0.4, 0.75)];
            for &(fx, fy) in &slots {
                if rng.gen::<f64>() < density {
                    let side = 0.10 + 0.06 * rng.gen::<f64>(); // fraction of the cell
                    let x0 = b.min_lon + (fx - side / 2.0) * b.width();
                    let y0 = b.min_lat + (fy - side / 2.0) * b.height();
                    let (w, h) = (side * b.width(), side * b.height());
                    layer.push(
                        Geometry::Polygon(vec![vec![
                            Pt::new(x0, y0),
                            Pt::new(x0 + w, y0),
                            Pt::new(x0 + w, y0 + h),
                            Pt::new(x0, y0 + h),
                        ]]),
                        "building",
                    )?;
                    n_buildings += 1.0;
                }
            }
            let mut road_km = 0.0;
            if rng.gen::<f64>() < 0.3 + 0.5 * density {
                let y = b.min_lat + (0.3 + 0.4 * rng.gen::<f64>()) * b.height();
                layer.push(
                    Geometry::Polyline(vec![Pt::new(b.min_lon, y), Pt::new(b.max_lon, y)]),
                    "road",
                )?;
                road_km += 1.0;
            }
            if rng.gen::<f64>() < 0.25 {
                let x = b.min_lon + (0.3 + 0.4 * rng.gen::<f64>()) * b.width();
                layer.push(
                    Geometry::Polyline(vec![Pt::new(x, b.min_lat), Pt::new(x, b.max_lat)]),
                    "road",
                )?;
                road_km += 1.0;
            }
            truth_buildings.push(n_buildings);
            truth_road.push(road_km);
        }
        all_tiles.extend(tiles);
    }

    let vectors = dir.join("vectors.geojson");
    write_geojson(&vectors, &layer)?;

    // Tile images rendered from the vectors: bright footprints and roads on
    // a dark noisy background.
    let px = opts.tile_px;
    for tile in &all_tiles {
        let b = &tile.bounds;
        let geo = GeoTransform {
            a: b.width() / px as f64,
            b: 0.0,
            c: b.min_lon,
            d: 0.0,
            e: -b.height() / px as f64,
            f: b.max_lat,
        };
        let (_, lat) = b.center();
        let mpp = geo.meters_per_pixel_at(lat);
        let buildings =
            rasterize_layer(&layer.with_class("building"), px, px, &geo, mpp, RasterMode::Fill)?;
        let roads = rasterize_layer(
            &layer.with_class("road"),
            px,
            px,
            &geo,
            mpp,
            RasterMode::Road { width_px: 3.0 },
        )?;
        let mut img = ImageRaster::zeros(px, px, geo, mpp);
        for y in 0..px {
            for x in 0..px {
                let noise: i32 = rng.gen_range(0..25);
                let rgb = if buildings.at(x, y) == ON {
                    [200 + (noise / 3) as u8, 190 + (noise / 3) as u8, 180]
                } else if roads.at(x, y) == ON {
                    [140, 140 + (noise / 2) as u8, 150]
                } else {
                    [(20 + noise) as u8, (28 + noise) as u8, (18 + noise) as u8]
                };
                img.set_pixel(x, y, rgb);
            }
        }
        write_image_png(&images_dir.join(format!("{}.png", tile.cell_id)), &img, None)?;
    }

    // Nightlight raster over both regions: 2×2 pixels per cell, radiance
    // tracking building density.
    let full = GeoBox::new(region_a.min_lon, region_a.min_lat, region_b.max_lon, region_a.max_lat);
    let nl_w = 2 * 2 * opts.cols_km;
    let nl_h = 2 * opts.rows_km;
    let nl_geo = GeoTransform {
        a: full.width() / nl_w as f64,
        b: 0.0,
        c: full.min_lon,
        d: 0.0,
        e: -full.height() / nl_h as f64,
        f: full.max_lat,
    };
    let mut nl = MaskRaster::zeros(nl_w, nl_h, nl_geo, 500.0);
    for y in 0..nl_h {
        for x in 0..nl_w {
            let (lon, lat) = nl_geo.pixel_to_geo(x as f64 + 0.5, y as f64 + 0.5);
            let cell = all_tiles.iter().position(|t| t.bounds.contains(lon, lat));
            let radiance = match cell {
                Some(i) => 20.0 + 50.0 * truth_buildings[i] + rng.gen_range(0.0..8.0),
                None => 0.0,
            };
            nl.set(x, y, radiance.min(255.0) as f32);
        }
    }
    let nightlight = dir.join("nightlight.png");
    write_mask_png(&nightlight, &nl, None)?;

    // Survey clusters with wealth mixing the three signals.
    let radius_km = 2.0;
    let mut sites = Vec::new();
    for (country, region) in &regions {
        for k in 0..opts.clusters_per_country {
            let lon = region.min_lon + (0.1 + 0.8 * rng.gen::<f64>()) * region.width();
            let lat = region.min_lat + (0.1 + 0.8 * rng.gen::<f64>()) * region.height();
            // Aggregate the generating truth in the selection radius.
            let mut b_sum = 0.0;
            let mut r_sum = 0.0;
            let mut n = 0.0;
            for (i, tile) in all_tiles.iter().enumerate() {
                let (clon, clat) = tile.center();
                if haversine_km(lon, lat, clon, clat) <= radius_km {
                    b_sum += truth_buildings[i];
                    r_sum += truth_road[i];
                    n += 1.0;
                }
            }
            if n == 0.0 {
                n = 1.0;
            }
            let wealth = 0.3 * (b_sum / n) + 0.5 * (r_sum / n) + 0.08 * (b_sum / n) * (r_sum / n)
                + 0.1 * (rng.gen::<f64>() - 0.5);
            sites.push(ClusterSite {
                cluster_id: format!("{country}c{k:02}"),
                country: country.to_string(),
                lon,
                lat,
                wealth: Some(wealth),
                wealthpooled: Some(wealth + if *country == "BB" { 0.25 } else { 0.0 }),
            });
        }
    }
    let clusters = dir.join("clusters.csv");
    write_clusters(&clusters, &sites, None)?;

    Ok(FixtureSummary {
        dir: dir.to_path_buf(),
        vectors,
        images_dir,
        nightlight,
        clusters,
        regions: regions_str,
        n_tiles: all_tiles.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_samples_are_learnable_targets() {
        let data = shapes_dataset(8, 32, 3);
        assert_eq!(data.len(), 8);
        for (img, mask) in &data {
            assert_eq!(img.shape(), [1, 3, 32, 32]);
            let on = mask.values.iter().filter(|&&v| v == ON).count();
            assert!(on > 10 && on < 32 * 32 / 2, "shape pixels {on}");
        }
        // Determinism.
        let again = shapes_dataset(8, 32, 3);
        assert_eq!(data[0].1, again[0].1);
    }

    #[test]
    fn judge_corpus_corrupts_requested_fraction() {
        let (samples, corrupted) = judge_corpus(20, 32, 4, 0.3, 5);
        assert_eq!(samples.len(), 20);
        assert_eq!(corrupted.iter().filter(|&&c| c).count(), 6);
        // Corrupted references carry about half the mass of clean ones.
        let mass: Vec<f64> = samples.iter().map(|s| s.reference.sum()).collect();
        let clean_mean: f64 = mass
            .iter()
            .zip(corrupted.iter())
            .filter(|(_, &c)| !c)
            .map(|(m, _)| m)
            .sum::<f64>()
            / 14.0;
        let corrupt_mean: f64 =
            mass.iter().zip(corrupted.iter()).filter(|(_, &c)| c).map(|(m, _)| m).sum::<f64>()
                / 6.0;
        assert!(corrupt_mean < 0.65 * clean_mean, "{corrupt_mean} vs {clean_mean}");
    }

    #[test]
    fn fixture_writes_every_artifact() {
        let dir = std::env::temp_dir().join("satpipe_synth_fixture");
        let _ = std::fs::remove_dir_all(&dir);
        let opts = FixtureOptions { cols_km: 3, rows_km: 2, tile_px: 16, clusters_per_country: 3 };
        let summary = write_fixture(&dir, &opts, 42).unwrap();
        assert_eq!(summary.n_tiles, 12);
        assert!(summary.vectors.exists());
        assert!(summary.nightlight.exists());
        assert!(summary.clusters.exists());
        let n_images = std::fs::read_dir(&summary.images_dir).unwrap().count();
        // One png + one wld per tile.
        assert_eq!(n_images, 24);
        assert_eq!(summary.regions.split(';').count(), 2);

        // Deterministic relative to the seed.
        let dir2 = std::env::temp_dir().join("satpipe_synth_fixture2");
        let _ = std::fs::remove_dir_all(&dir2);
        let s2 = write_fixture(&dir2, &opts, 42).unwrap();
        let a = std::fs::read(summary.dir.join("vectors.geojson")).unwrap();
        let b = std::fs::read(s2.dir.join("vectors.geojson")).unwrap();
        assert_eq!(a, b);
    }
}
