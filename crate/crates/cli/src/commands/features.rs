//! `satpipe features`: fill per-cell nightlight from the radiance raster,
//! then aggregate the per-cell measurements into cluster-level feature rows
//! within the selection radius.

use anyhow::{Context, Result};
use satpipe_core::features::{
    build_feature_rows, nightlight_stat, read_clusters, read_tile_records, write_feature_rows,
    write_tile_records,
};
use satpipe_core::grid::read_manifest;
use satpipe_core::raster::read_mask_png;

use super::{ensure_dir, require_file, Paths};
use crate::config::PipelineConfig;

pub const DROPPED_HEADER: &str = "cluster_id,reason";

pub fn run(cfg: &PipelineConfig) -> Result<()> {
    let tiles_csv = Paths::counts_dir(cfg).join("tiles.csv");
    require_file(&Paths::manifest(cfg), "grid manifest (run `rasterize` first)")?;
    require_file(&tiles_csv, "tile records (run `count` first)")?;
    require_file(&cfg.nightlight, "nightlight raster")?;
    require_file(&cfg.clusters, "cluster table")?;

    let tiles = read_manifest(&Paths::manifest(cfg))?;
    let mut records = read_tile_records(&tiles_csv)?;
    let nl = read_mask_png(&cfg.nightlight).context("nightlight raster")?;

    // Nightlight per grid cell (mean radiance of covered pixel centers).
    for record in records.iter_mut() {
        let tile = tiles
            .iter()
            .find(|t| t.cell_id == record.cell_id)
            .with_context(|| format!("cell {} missing from manifest", record.cell_id))?;
        let (radiance, _covered) = nightlight_stat(&tile.bounds, &nl);
        record.nightlight = radiance;
    }

    let dir = Paths::features_dir(cfg);
    ensure_dir(&dir)?;
    let provenance = cfg.provenance("features");
    write_tile_records(&dir.join("tiles_with_nightlight.csv"), &records, Some(&provenance))?;

    let sites = read_clusters(&cfg.clusters)?;
    let (rows, dropped) = build_feature_rows(
        &sites,
        &tiles,
        &records,
        cfg.radius_km,
        &cfg.quantiles,
        cfg.min_cells,
    )?;
    write_feature_rows(&dir.join("features.csv"), &rows, &cfg.quantiles, Some(&provenance))?;
    let dropped_rows: Vec<String> =
        dropped.iter().map(|d| format!("{},{}", d.cluster_id, d.reason)).collect();
    satpipe_core::csvio::write_csv(
        &dir.join("dropped.csv"),
        Some(&provenance),
        DROPPED_HEADER,
        &dropped_rows,
    )?;

    println!(
        "features: {} clusters kept, {} dropped, radius {} km",
        rows.len(),
        dropped.len(),
        cfg.radius_km
    );
    Ok(())
}
