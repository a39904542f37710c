//! From probability masks to object counts: thresholding, 8-connected
//! component extraction, contour-in-contour evaluation of predicted
//! centroids against ground-truth polygons, the threshold sweep with its
//! selection rule, and multi-seed ensemble averaging.

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, MaskRaster};
use crate::vector::{point_in_rings, polygon_centroid, Pt, Ring, VectorLayer};

/// Blobs smaller than this are treated as noise by default.
pub const DEFAULT_MIN_BLOB_AREA: usize = 4;

/// Pixel on iff intensity strictly exceeds `t` (color-intensity units 0–255).
pub fn threshold_mask(prob: &MaskRaster, t: u8) -> BinaryMask {
    let mut out = BinaryMask::new(prob.width, prob.height);
    for (o, &v) in out.data.iter_mut().zip(prob.values.iter()) {
        *o = v > t as f32;
    }
    out
}

/// A maximal 8-connected foreground component.
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    /// Pixel indices (x, y) in scan order.
    pub pixels: Vec<(usize, usize)>,
    /// Arithmetic mean of the pixel indices.
    pub centroid: (f64, f64),
    pub area: usize,
}

impl Blob {
    /// Centroid in continuous pixel coordinates (indices are cell corners;
    /// centers sit half a pixel in).
    pub fn centroid_center(&self) -> (f64, f64) {
        (self.centroid.0 + 0.5, self.centroid.1 + 0.5)
    }
}

/// Maximal 8-connected components with area ≥ `min_blob_area`, in scan order
/// of their first pixel.
pub fn connected_components(mask: &BinaryMask, min_blob_area: usize) -> Vec<Blob> {
    let (w, h) = (mask.width, mask.height);
    let mut seen = vec![false; w * h];
    let mut blobs = Vec::new();
    let mut stack: Vec<(usize, usize)> = Vec::new();

    for y0 in 0..h {
        for x0 in 0..w {
            let i0 = y0 * w + x0;
            if seen[i0] || !mask.data[i0] {
                continue;
            }
            seen[i0] = true;
            stack.push((x0, y0));
            let mut pixels = Vec::new();
            while let Some((x, y)) = stack.pop() {
                pixels.push((x, y));
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let ni = ny as usize * w + nx as usize;
                        if !seen[ni] && mask.data[ni] {
                            seen[ni] = true;
                            stack.push((nx as usize, ny as usize));
                        }
                    }
                }
            }
            if pixels.len() < min_blob_area {
                continue;
            }
            pixels.sort_unstable_by_key(|&(x, y)| (y, x));
            let n = pixels.len() as f64;
            let (sx, sy) =
                pixels.iter().fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x as f64, sy + y as f64));
            blobs.push(Blob { centroid: (sx / n, sy / n), area: pixels.len(), pixels });
        }
    }
    blobs
}

/// How predicted centroids are matched to truth polygons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchMode {
    /// Each truth polygon absorbs at most one predicted centroid, assigned
    /// greedily by distance to the polygon centroid. Default.
    Strict,
    /// Every predicted centroid inside any truth polygon counts; several
    /// centroids in one building all count as true positives.
    CountAll,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountMetrics {
    pub threshold: u8,
    pub tp_count: usize,
    pub total_pred: usize,
    pub total_truth: usize,
    /// 100 · tp_count / total_pred; undefined with zero predictions.
    pub tp_rate: Option<f64>,
    /// 100 · total_pred / total_truth; undefined with zero truth polygons.
    pub pred_to_mask: Option<f64>,
    /// 100 · (total_pred − tp_count) / total_pred; undefined with zero
    /// predictions.
    pub fp_rate: Option<f64>,
}

/// Evaluate predicted centroids against truth polygons: a prediction is a
/// true positive iff it lies inside a building contour (subject to the
/// matching mode).
pub fn contour_in_contour_eval(
    pred_centroids: &[Pt],
    truth: &VectorLayer,
    mode: MatchMode,
    threshold: u8,
) -> CountMetrics {
    let polygons: Vec<&Vec<Ring>> = truth.polygons().collect();
    let total_pred = pred_centroids.len();
    let total_truth = polygons.len();

    let tp_count = match mode {
        MatchMode::CountAll => pred_centroids
            .iter()
            .filter(|p| polygons.iter().any(|rings| point_in_rings(**p, rings)))
            .count(),
        MatchMode::Strict => {
            // Candidate (prediction, polygon) hits ranked by distance to the
            // polygon centroid; greedy one-to-one assignment.
            let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
            for (pi, p) in pred_centroids.iter().enumerate() {
                for (gi, rings) in polygons.iter().enumerate() {
                    if point_in_rings(*p, rings) {
                        let c = polygon_centroid(rings);
                        let d2 = (p.x - c.x).powi(2) + (p.y - c.y).powi(2);
                        candidates.push((d2, pi, gi));
                    }
                }
            }
            candidates.sort_by(|a, b| {
                a.0.partial_cmp(&b.0).expect("finite distance").then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
            });
            let mut pred_used = vec![false; total_pred];
            let mut truth_used = vec![false; total_truth];
            let mut tp = 0;
            for (_, pi, gi) in candidates {
                if !pred_used[pi] && !truth_used[gi] {
                    pred_used[pi] = true;
                    truth_used[gi] = true;
                    tp += 1;
                }
            }
            tp
        }
    };

    let tp_rate = (total_pred > 0).then(|| 100.0 * tp_count as f64 / total_pred as f64);
    let fp_rate =
        (total_pred > 0).then(|| 100.0 * (total_pred - tp_count) as f64 / total_pred as f64);
    let pred_to_mask =
        (total_truth > 0).then(|| 100.0 * total_pred as f64 / total_truth as f64);
    CountMetrics { threshold, tp_count, total_pred, total_truth, tp_rate, pred_to_mask, fp_rate }
}

/// Predicted building centroids of a probability mask at one threshold, in
/// the mask's geographic coordinates.
pub fn predicted_centroids(
    prob: &MaskRaster,
    t: u8,
    min_blob_area: usize,
) -> Vec<Pt> {
    let mask = threshold_mask(prob, t);
    connected_components(&mask, min_blob_area)
        .iter()
        .map(|b| {
            let (cx, cy) = b.centroid_center();
            let (lon, lat) = prob.geo.pixel_to_geo(cx, cy);
            Pt::new(lon, lat)
        })
        .collect()
}

/// One CountMetrics per threshold (ascending), plus the selected threshold:
/// the one whose Pred-To-Mask sits closest to 100, tie-broken by higher TP
/// rate and then by the lower threshold. Thresholds with undefined
/// Pred-To-Mask lose to any defined one.
pub fn threshold_sweep(
    prob: &MaskRaster,
    truth: &VectorLayer,
    thresholds: &[u8],
    min_blob_area: usize,
    mode: MatchMode,
) -> Result<(Vec<CountMetrics>, u8)> {
    if thresholds.is_empty() {
        return Err(Error::EmptyInput("thresholds".into()));
    }
    if !thresholds.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidConfig("thresholds must be sorted ascending".into()));
    }
    let metrics: Vec<CountMetrics> = thresholds
        .iter()
        .map(|&t| {
            let centroids = predicted_centroids(prob, t, min_blob_area);
            contour_in_contour_eval(&centroids, truth, mode, t)
        })
        .collect();
    let selected = select_threshold(&metrics);
    Ok((metrics, selected))
}

/// Selection rule shared by sweep consumers (documented above).
pub fn select_threshold(metrics: &[CountMetrics]) -> u8 {
    assert!(!metrics.is_empty());
    let mut best: Option<&CountMetrics> = None;
    for m in metrics {
        let better = match best {
            None => true,
            Some(b) => match (m.pred_to_mask, b.pred_to_mask) {
                (Some(pm), Some(pb)) => {
                    let (dm, db) = ((pm - 100.0).abs(), (pb - 100.0).abs());
                    dm < db
                        || (dm == db
                            && m.tp_rate.unwrap_or(0.0) > b.tp_rate.unwrap_or(0.0))
                }
                (Some(_), None) => true,
                _ => false,
            },
        };
        if better {
            best = Some(m);
        }
    }
    best.expect("non-empty metrics").threshold
}

/// Pixel-wise arithmetic mean of equally shaped masks.
pub fn ensemble_combine(masks: &[MaskRaster]) -> Result<MaskRaster> {
    let first = masks.first().ok_or_else(|| Error::EmptyInput("masks".into()))?;
    for m in &masks[1..] {
        if m.width != first.width || m.height != first.height {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", first.width, first.height),
                got: format!("{}x{}", m.width, m.height),
            });
        }
    }
    let mut out = first.clone();
    let k = masks.len() as f64;
    for (i, v) in out.values.iter_mut().enumerate() {
        let sum: f64 = masks.iter().map(|m| m.values[i] as f64).sum();
        *v = (sum / k) as f32;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn prob_mask(w: usize, h: usize, values: &[f32]) -> MaskRaster {
        let mut m = MaskRaster::flat(w, h);
        m.values.copy_from_slice(values);
        m
    }

    #[test]
    fn threshold_extremes() {
        let m = prob_mask(2, 2, &[0.0, 255.0, 100.0, 255.0]);
        assert_eq!(threshold_mask(&m, 255).count(), 0);
        let at_zero = threshold_mask(&m, 0);
        assert_eq!(at_zero.count(), 3);
        assert!(!at_zero.at(0, 0));
    }

    #[test]
    fn threshold_monotone_in_t() {
        let mut rng = crate::seed::rng_from_seed(31);
        let values: Vec<f32> = (0..256).map(|_| rng.gen_range(0.0..255.0)).collect();
        let m = prob_mask(16, 16, &values);
        let sweep = [5u8, 10, 15, 25];
        let counts: Vec<usize> = sweep.iter().map(|&t| threshold_mask(&m, t).count()).collect();
        assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
    }

    #[test]
    fn two_squares_two_blobs_with_centroids() {
        let mut mask = BinaryMask::new(12, 8);
        for y in 1..4 {
            for x in 1..4 {
                mask.set(x, y, true);
            }
        }
        for y in 4..7 {
            for x in 8..11 {
                mask.set(x, y, true);
            }
        }
        let blobs = connected_components(&mask, 1);
        assert_eq!(blobs.len(), 2);
        assert_eq!(blobs[0].centroid, (2.0, 2.0));
        assert_eq!(blobs[1].centroid, (9.0, 5.0));
        assert_eq!(blobs[0].area, 9);
    }

    #[test]
    fn empty_mask_gives_no_blobs() {
        assert!(connected_components(&BinaryMask::new(5, 5), 1).is_empty());
    }

    #[test]
    fn min_blob_area_filters_specks() {
        let mut mask = BinaryMask::new(8, 8);
        mask.set(0, 0, true); // single-pixel speck
        for y in 4..7 {
            for x in 4..7 {
                mask.set(x, y, true);
            }
        }
        let blobs = connected_components(&mask, DEFAULT_MIN_BLOB_AREA);
        assert_eq!(blobs.len(), 1);
        assert_eq!(blobs[0].area, 9);
    }

    /// Brute-force flood-fill oracle: repeated full-image sweeps propagating
    /// labels until fixpoint — independent of the stack-based implementation.
    #[allow(clippy::needless_range_loop)]
    fn oracle_components(mask: &BinaryMask) -> Vec<Vec<(usize, usize)>> {
        let (w, h) = (mask.width, mask.height);
        let mut label: Vec<usize> = (0..w * h).collect();
        for i in 0..w * h {
            if !mask.data[i] {
                label[i] = usize::MAX;
            }
        }
        let mut changed = true;
        while changed {
            changed = false;
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    if label[i] == usize::MAX {
                        continue;
                    }
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                                continue;
                            }
                            let ni = ny as usize * w + nx as usize;
                            if label[ni] != usize::MAX && label[ni] < label[i] {
                                label[i] = label[ni];
                                changed = true;
                            }
                        }
                    }
                }
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<(usize, usize)>> =
            std::collections::BTreeMap::new();
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if label[i] != usize::MAX {
                    groups.entry(label[i]).or_default().push((x, y));
                }
            }
        }
        groups.into_values().collect()
    }

    #[test]
    fn random_masks_match_flood_fill_oracle() {
        let mut rng = crate::seed::rng_from_seed(77);
        for _ in 0..50 {
            let mut mask = BinaryMask::new(32, 32);
            for v in mask.data.iter_mut() {
                *v = rng.gen::<f64>() < 0.4;
            }
            let got: Vec<Vec<(usize, usize)>> =
                connected_components(&mask, 1).into_iter().map(|b| b.pixels).collect();
            let want = oracle_components(&mask);
            assert_eq!(got, want);
        }
    }

    fn square_rings(x0: f64, y0: f64, side: f64) -> Vec<Ring> {
        vec![vec![
            Pt::new(x0, y0),
            Pt::new(x0 + side, y0),
            Pt::new(x0 + side, y0 + side),
            Pt::new(x0, y0 + side),
        ]]
    }

    fn squares_layer(origins: &[(f64, f64)], side: f64) -> VectorLayer {
        let mut layer = VectorLayer::new();
        for &(x, y) in origins {
            layer
                .push(crate::vector::Geometry::Polygon(square_rings(x, y, side)), "building")
                .unwrap();
        }
        layer
    }

    #[test]
    fn perfect_predictions_score_perfectly() {
        let origins: Vec<(f64, f64)> = (0..10).map(|i| (10.0 * i as f64, 0.0)).collect();
        let layer = squares_layer(&origins, 4.0);
        let preds: Vec<Pt> = origins.iter().map(|&(x, y)| Pt::new(x + 2.0, y + 2.0)).collect();
        let m = contour_in_contour_eval(&preds, &layer, MatchMode::Strict, 15);
        assert_eq!(m.tp_count, 10);
        assert_eq!(m.pred_to_mask, Some(100.0));
        assert_eq!(m.fp_rate, Some(0.0));
    }

    #[test]
    fn fp_arithmetic_matches_formula() {
        // 100 predictions, 40 inside polygons → FP = 60.
        let layer = squares_layer(&[(0.0, 0.0)], 10.0);
        let mut preds = Vec::new();
        for i in 0..40 {
            preds.push(Pt::new(1.0 + 0.2 * (i as f64 % 40.0), 5.0)); // inside
        }
        for i in 0..60 {
            preds.push(Pt::new(100.0 + i as f64, 5.0)); // far outside
        }
        let m = contour_in_contour_eval(&preds, &layer, MatchMode::CountAll, 15);
        assert_eq!(m.tp_count, 40);
        assert_eq!(m.fp_rate, Some(60.0));
        // Rate identity: FP + 100·TP/TotalPred = 100.
        assert!((m.fp_rate.unwrap() + m.tp_rate.unwrap() - 100.0).abs() < 1e-12);
        // Strict mode can absorb only one of the 40 into the single polygon.
        let strict = contour_in_contour_eval(&preds, &layer, MatchMode::Strict, 15);
        assert_eq!(strict.tp_count, 1);
    }

    #[test]
    fn undefined_rates_are_distinguished() {
        let layer = squares_layer(&[(0.0, 0.0)], 5.0);
        let none = contour_in_contour_eval(&[], &layer, MatchMode::Strict, 15);
        assert_eq!(none.fp_rate, None);
        assert_eq!(none.tp_rate, None);
        assert_eq!(none.pred_to_mask, Some(0.0));

        let no_truth =
            contour_in_contour_eval(&[Pt::new(0.0, 0.0)], &VectorLayer::new(), MatchMode::Strict, 15);
        assert_eq!(no_truth.pred_to_mask, None);
        assert_eq!(no_truth.fp_rate, Some(100.0));
    }

    #[test]
    fn randomized_scene_matches_ray_casting_oracle() {
        let mut rng = crate::seed::rng_from_seed(101);
        for _ in 0..20 {
            // 20 disjoint square "buildings" on a grid, jittered predictions.
            let mut origins = Vec::new();
            for gy in 0..4 {
                for gx in 0..5 {
                    origins.push((12.0 * gx as f64, 12.0 * gy as f64));
                }
            }
            let layer = squares_layer(&origins, 6.0);
            let preds: Vec<Pt> = (0..30)
                .map(|_| Pt::new(rng.gen::<f64>() * 60.0, rng.gen::<f64>() * 48.0))
                .collect();
            let m = contour_in_contour_eval(&preds, &layer, MatchMode::CountAll, 15);

            // Oracle: direct per-point ray casting against each square.
            let inside = |p: &Pt, (x0, y0): (f64, f64)| -> bool {
                // Count crossings of a ray to +x against the 4 edges.
                let ring = &square_rings(x0, y0, 6.0)[0];
                let mut c = false;
                let n = ring.len();
                let mut j = n - 1;
                for i in 0..n {
                    let (a, b) = (ring[i], ring[j]);
                    if (a.y > p.y) != (b.y > p.y)
                        && p.x < a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y)
                    {
                        c = !c;
                    }
                    j = i;
                }
                c
            };
            let want =
                preds.iter().filter(|p| origins.iter().any(|&o| inside(p, o))).count();
            assert_eq!(m.tp_count, want);
        }
    }

    #[test]
    fn sweep_selects_pred_to_mask_closest_to_100() {
        // Three bright blobs that survive low thresholds; higher thresholds
        // shrink and then erase them. Truth has 3 polygons.
        let mut prob = MaskRaster::flat(32, 32);
        let blob_centers = [(6usize, 6usize), (16, 16), (26, 6)];
        for &(cx, cy) in &blob_centers {
            for y in cy.saturating_sub(3)..(cy + 3).min(32) {
                for x in cx.saturating_sub(3)..(cx + 3).min(32) {
                    let d = ((x as f64 - cx as f64).powi(2) + (y as f64 - cy as f64).powi(2)).sqrt();
                    prob.set(x, y, (200.0 - 45.0 * d).max(0.0) as f32);
                }
            }
        }
        let layer = squares_layer(&[(3.0, 3.0), (13.0, 13.0), (23.0, 3.0)], 6.0);
        let thresholds = [5u8, 60, 140, 250];
        let (metrics, selected) =
            threshold_sweep(&prob, &layer, &thresholds, 1, MatchMode::Strict).unwrap();
        assert_eq!(metrics.len(), 4);
        // Exhaustive oracle over the sweep.
        let best = metrics
            .iter()
            .filter(|m| m.pred_to_mask.is_some())
            .min_by(|a, b| {
                let da = (a.pred_to_mask.unwrap() - 100.0).abs();
                let db = (b.pred_to_mask.unwrap() - 100.0).abs();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        assert_eq!(selected, best.threshold);
        // Single-threshold sweep returns that threshold.
        let (_, only) = threshold_sweep(&prob, &layer, &[15], 1, MatchMode::Strict).unwrap();
        assert_eq!(only, 15);
        // Active-pixel monotonicity shows up as non-increasing predictions.
        let counts: Vec<usize> = metrics.iter().map(|m| m.total_pred).collect();
        assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
    }

    #[test]
    fn ensemble_mean_and_invariances() {
        let a = prob_mask(2, 1, &[0.0, 0.0]);
        let b = prob_mask(2, 1, &[255.0, 255.0]);
        let mean = ensemble_combine(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(mean.values, vec![127.5, 127.5]);

        // Idempotence on identical masks.
        let same = ensemble_combine(&[b.clone(), b.clone(), b.clone()]).unwrap();
        assert_eq!(same.values, b.values);

        // Permutation invariance.
        let c = prob_mask(2, 1, &[10.0, 40.0]);
        let abc = ensemble_combine(&[a.clone(), b.clone(), c.clone()]).unwrap();
        let cba = ensemble_combine(&[c, b, a]).unwrap();
        assert_eq!(abc.values, cba.values);

        // Shape mismatch rejected.
        let bad = prob_mask(2, 1, &[0.0, 0.0]);
        let tall = MaskRaster::flat(1, 2);
        assert!(ensemble_combine(&[bad, tall]).is_err());
    }
}
