//! `satpipe count`: sweep thresholds over the predicted building masks with
//! the contour-in-contour evaluation, select the operating threshold whose
//! aggregate Pred-To-Mask is closest to 100, then emit per-tile building
//! counts and road skeleton measures at that threshold.

use anyhow::{Context, Result};
use rayon::prelude::*;
use satpipe_core::csvio;
use satpipe_core::features::TileRecord;
use satpipe_core::grid::read_manifest;
use satpipe_core::post::{
    connected_components, contour_in_contour_eval, predicted_centroids, select_threshold,
    threshold_mask, CountMetrics,
};
use satpipe_core::raster::read_mask_png;
use satpipe_core::skeleton::{road_length_m, skeletonize};
use satpipe_core::vector::read_geojson;

use super::{ensure_dir, require_dir, require_file, Paths};
use crate::config::PipelineConfig;

pub const SWEEP_HEADER: &str =
    "cell_id,threshold,tp,total_pred,total_truth,tp_rate,pred_to_mask,fp_rate";

/// Truth polygons whose centroid lies inside the tile.
fn truth_in_tile(
    truth: &satpipe_core::vector::VectorLayer,
    tile: &satpipe_core::grid::TileBounds,
) -> satpipe_core::vector::VectorLayer {
    use satpipe_core::vector::{polygon_centroid, Geometry, VectorLayer};
    VectorLayer {
        features: truth
            .features
            .iter()
            .filter(|f| match &f.geometry {
                Geometry::Polygon(rings) => {
                    let c = polygon_centroid(rings);
                    tile.bounds.contains(c.x, c.y)
                }
                _ => false,
            })
            .cloned()
            .collect(),
    }
}
pub const SUMMARY_HEADER: &str =
    "threshold,tp,total_pred,total_truth,tp_rate,pred_to_mask,fp_rate,selected";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "undefined".into())
}

pub fn run(cfg: &PipelineConfig) -> Result<()> {
    require_file(&Paths::manifest(cfg), "grid manifest (run `rasterize` first)")?;
    require_file(&cfg.vectors, "vector ground truth")?;
    for class in &cfg.classes {
        require_dir(&Paths::pred_dir(cfg, class), "prediction (run `predict` first)")?;
    }

    let tiles = read_manifest(&Paths::manifest(cfg))?;
    let truth = read_geojson(&cfg.vectors)?.with_class("building");

    // Threshold sweep on the building predictions, tile by tile. Each tile
    // is scored against the truth polygons whose centroid falls inside it,
    // so per-tile Pred-To-Mask is meaningful and the per-threshold sums
    // stay consistent.
    let per_tile: Vec<(String, Vec<CountMetrics>)> = tiles
        .par_iter()
        .map(|tile| -> Result<(String, Vec<CountMetrics>)> {
            let tile_truth = truth_in_tile(&truth, tile);
            let prob = read_mask_png(&Paths::pred(cfg, "building", &tile.cell_id))
                .context("building prediction")?;
            let metrics = cfg
                .thresholds
                .iter()
                .map(|&t| {
                    let centroids = predicted_centroids(&prob, t, cfg.min_blob_area);
                    contour_in_contour_eval(&centroids, &tile_truth, cfg.match_mode, t)
                })
                .collect();
            Ok((tile.cell_id.clone(), metrics))
        })
        .collect::<Result<Vec<_>>>()?;

    // Aggregate over tiles per threshold; rates recomputed on the sums.
    let aggregated: Vec<CountMetrics> = cfg
        .thresholds
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let tp: usize = per_tile.iter().map(|(_, m)| m[i].tp_count).sum();
            let pred: usize = per_tile.iter().map(|(_, m)| m[i].total_pred).sum();
            let truth_n: usize = per_tile.iter().map(|(_, m)| m[i].total_truth).sum();
            CountMetrics {
                threshold: t,
                tp_count: tp,
                total_pred: pred,
                total_truth: truth_n,
                tp_rate: (pred > 0).then(|| 100.0 * tp as f64 / pred as f64),
                pred_to_mask: (truth_n > 0).then(|| 100.0 * pred as f64 / truth_n as f64),
                fp_rate: (pred > 0).then(|| 100.0 * (pred - tp) as f64 / pred as f64),
            }
        })
        .collect();
    let selected = select_threshold(&aggregated);

    let dir = Paths::counts_dir(cfg);
    ensure_dir(&dir)?;
    let provenance = cfg.provenance("count");

    let mut sweep_rows = Vec::new();
    for (cell_id, metrics) in &per_tile {
        for m in metrics {
            sweep_rows.push(format!(
                "{cell_id},{},{},{},{},{},{},{}",
                m.threshold,
                m.tp_count,
                m.total_pred,
                m.total_truth,
                opt(m.tp_rate),
                opt(m.pred_to_mask),
                opt(m.fp_rate)
            ));
        }
    }
    csvio::write_csv(&dir.join("sweep.csv"), Some(&provenance), SWEEP_HEADER, &sweep_rows)?;

    let summary_rows: Vec<String> = aggregated
        .iter()
        .map(|m| {
            format!(
                "{},{},{},{},{},{},{},{}",
                m.threshold,
                m.tp_count,
                m.total_pred,
                m.total_truth,
                opt(m.tp_rate),
                opt(m.pred_to_mask),
                opt(m.fp_rate),
                u8::from(m.threshold == selected)
            )
        })
        .collect();
    csvio::write_csv(&dir.join("summary.csv"), Some(&provenance), SUMMARY_HEADER, &summary_rows)?;

    // Per-tile object counts at the selected threshold. Nightlight stays 0
    // here; the features stage fills it in.
    let records: Vec<TileRecord> = tiles
        .par_iter()
        .map(|tile| -> Result<TileRecord> {
            let buildings = {
                let prob = read_mask_png(&Paths::pred(cfg, "building", &tile.cell_id))?;
                let mask = threshold_mask(&prob, selected);
                connected_components(&mask, cfg.min_blob_area).len() as f64
            };
            let (road_m, road_components) = if cfg.classes.iter().any(|c| c == "road") {
                let prob = read_mask_png(&Paths::pred(cfg, "road", &tile.cell_id))?;
                let mask = threshold_mask(&prob, selected);
                let skel = skeletonize(&mask);
                let comps = connected_components(&skel, 1).len() as f64;
                (road_length_m(&skel, prob.meters_per_pixel), comps)
            } else {
                (0.0, 0.0)
            };
            Ok(TileRecord {
                cell_id: tile.cell_id.clone(),
                buildings,
                road_m,
                road_components,
                nightlight: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    satpipe_core::features::write_tile_records(&dir.join("tiles.csv"), &records, Some(&provenance))?;

    println!(
        "count: threshold sweep {:?}, selected {selected}; {} tile records",
        cfg.thresholds,
        records.len()
    );
    Ok(())
}
