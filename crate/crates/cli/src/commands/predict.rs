//! `satpipe predict`: run every ensemble member over the tile images and
//! write the pixel-averaged probability masks (0–255 PNG) per class.

use anyhow::{Context, Result};
use rayon::prelude::*;
use satpipe_core::grid::{read_manifest, TileBounds};
use satpipe_core::nn::{load_checkpoint, SatUnet};
use satpipe_core::post::ensemble_combine;
use satpipe_core::raster::{write_mask_png, MaskRaster};
use satpipe_core::rasterize::crop_mask;

use super::{
    ensure_dir, load_tile_input, require_dir, require_file, tile_meters_per_pixel, tile_transform,
    Paths,
};
use crate::config::PipelineConfig;

pub fn run(cfg: &PipelineConfig) -> Result<()> {
    require_file(&Paths::manifest(cfg), "grid manifest (run `rasterize` first)")?;
    require_dir(&cfg.images, "tile image")?;
    for class in &cfg.classes {
        for &seed in &cfg.ensemble_seeds {
            require_file(&Paths::checkpoint(cfg, class, seed), "checkpoint (run `train` first)")?;
        }
    }

    let tiles = read_manifest(&Paths::manifest(cfg))?;
    let provenance = cfg.provenance("predict");

    for class in &cfg.classes {
        let nets: Vec<SatUnet> = cfg
            .ensemble_seeds
            .iter()
            .map(|&seed| load_checkpoint(&Paths::checkpoint(cfg, class, seed)))
            .collect::<satpipe_core::Result<_>>()?;
        ensure_dir(&Paths::pred_dir(cfg, class))?;

        tiles
            .par_iter()
            .map(|tile| predict_tile(cfg, tile, class, &nets, &provenance))
            .collect::<Result<Vec<_>>>()?;
        println!("predict {class}: {} tiles x {} seeds", tiles.len(), nets.len());
    }
    Ok(())
}

fn predict_tile(
    cfg: &PipelineConfig,
    tile: &TileBounds,
    class: &str,
    nets: &[SatUnet],
    provenance: &str,
) -> Result<()> {
    let input = load_tile_input(cfg, &tile.cell_id)?;
    let size = cfg.input_size();
    let geo = tile_transform(tile, cfg.tile_px);
    let mpp = tile_meters_per_pixel(tile, cfg.tile_px);

    let mut member_masks = Vec::with_capacity(nets.len());
    for net in nets {
        let prob = net.infer(&input).context("inference")?;
        let padded = MaskRaster::from_probabilities(size, size, prob.plane(0, 0), geo, mpp)?;
        let mut mask = crop_mask(&padded, cfg.pad);
        mask.geo = geo;
        mask.meters_per_pixel = mpp;
        member_masks.push(mask);
    }
    let combined = ensemble_combine(&member_masks)?;
    write_mask_png(&Paths::pred(cfg, class, &tile.cell_id), &combined, Some(provenance))?;
    Ok(())
}
