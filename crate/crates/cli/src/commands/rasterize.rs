//! `satpipe rasterize`: grid the configured regions, then rasterize the
//! vector ground truth into per-tile label masks (centroid discs for
//! buildings, stroked lines for roads, filled interiors otherwise).

use anyhow::{Context, Result};
use rayon::prelude::*;
use satpipe_core::grid::{make_grid, write_manifest, TileBounds};
use satpipe_core::raster::write_mask_png;
use satpipe_core::rasterize::{rasterize_layer, RasterMode};
use satpipe_core::vector::{read_geojson, VectorLayer};

use super::{ensure_dir, require_file, tile_meters_per_pixel, tile_transform, Paths};
use crate::config::PipelineConfig;

fn mode_for_class(cfg: &PipelineConfig, class: &str) -> RasterMode {
    match class {
        "building" => RasterMode::Centroid { radius_px: cfg.centroid_radius_px },
        "road" => RasterMode::Road { width_px: cfg.road_width_px },
        _ => RasterMode::Fill,
    }
}

pub fn run(cfg: &PipelineConfig) -> Result<()> {
    require_file(&cfg.vectors, "vector input")?;
    let layer = read_geojson(&cfg.vectors).context("reading vectors")?;

    let mut tiles: Vec<TileBounds> = Vec::new();
    for region in &cfg.regions {
        tiles.extend(make_grid(&region.bounds, cfg.cell_km, &region.country)?);
    }

    ensure_dir(&cfg.out)?;
    let provenance = cfg.provenance("rasterize");
    write_manifest(&Paths::manifest(cfg), &tiles, Some(&provenance))?;

    for class in &cfg.classes {
        ensure_dir(&Paths::masks_dir(cfg, class))?;
        let class_layer = layer.with_class(class);
        let mode = mode_for_class(cfg, class);
        rasterize_class(cfg, &tiles, &class_layer, class, mode, &provenance)?;
    }
    println!(
        "rasterize: {} tiles x {} classes -> {}",
        tiles.len(),
        cfg.classes.len(),
        cfg.out.display()
    );
    Ok(())
}

fn rasterize_class(
    cfg: &PipelineConfig,
    tiles: &[TileBounds],
    layer: &VectorLayer,
    class: &str,
    mode: RasterMode,
    provenance: &str,
) -> Result<()> {
    tiles
        .par_iter()
        .map(|tile| {
            let geo = tile_transform(tile, cfg.tile_px);
            let mpp = tile_meters_per_pixel(tile, cfg.tile_px);
            let mask = rasterize_layer(layer, cfg.tile_px, cfg.tile_px, &geo, mpp, mode)?;
            write_mask_png(&Paths::mask(cfg, class, &tile.cell_id), &mask, Some(provenance))
        })
        .collect::<satpipe_core::Result<Vec<_>>>()?;
    Ok(())
}
