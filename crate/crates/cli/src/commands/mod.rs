//! Pipeline stages. Every stage validates its declared inputs up front,
//! writes only into its own subdirectory of `paths.out`, and stamps each
//! output with the config hash and seed.

pub mod benchmark;
pub mod count;
pub mod features;
pub mod judge;
pub mod predict;
pub mod rasterize;
pub mod train;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use satpipe_core::geo::GeoTransform;
use satpipe_core::grid::TileBounds;
use satpipe_core::raster::{read_image_png, ImageRaster, MaskRaster};
use satpipe_core::rasterize::{pad_image, pad_mask, rescale_colors};
use satpipe_core::tensor::Tensor;

use crate::config::PipelineConfig;

pub struct Paths;

impl Paths {
    pub fn manifest(cfg: &PipelineConfig) -> PathBuf {
        cfg.out.join("manifest.csv")
    }

    pub fn masks_dir(cfg: &PipelineConfig, class: &str) -> PathBuf {
        cfg.out.join("masks").join(class)
    }

    pub fn mask(cfg: &PipelineConfig, class: &str, cell_id: &str) -> PathBuf {
        Self::masks_dir(cfg, class).join(format!("{cell_id}.png"))
    }

    pub fn checkpoint(cfg: &PipelineConfig, class: &str, ensemble_seed: u64) -> PathBuf {
        cfg.out.join("checkpoints").join(format!("{class}_seed{ensemble_seed}.sunet"))
    }

    pub fn train_log(cfg: &PipelineConfig, class: &str, ensemble_seed: u64) -> PathBuf {
        cfg.out.join("checkpoints").join(format!("train_{class}_seed{ensemble_seed}.csv"))
    }

    pub fn judge_dir(cfg: &PipelineConfig) -> PathBuf {
        cfg.out.join("judge")
    }

    pub fn pred_dir(cfg: &PipelineConfig, class: &str) -> PathBuf {
        cfg.out.join("pred").join(class)
    }

    pub fn pred(cfg: &PipelineConfig, class: &str, cell_id: &str) -> PathBuf {
        Self::pred_dir(cfg, class).join(format!("{cell_id}.png"))
    }

    pub fn counts_dir(cfg: &PipelineConfig) -> PathBuf {
        cfg.out.join("counts")
    }

    pub fn features_dir(cfg: &PipelineConfig) -> PathBuf {
        cfg.out.join("features")
    }

    pub fn bench_dir(cfg: &PipelineConfig) -> PathBuf {
        cfg.out.join("benchmark")
    }

    pub fn image(cfg: &PipelineConfig, cell_id: &str) -> PathBuf {
        cfg.images.join(format!("{cell_id}.png"))
    }
}

/// Provenance sidecar for binary outputs that cannot carry a text chunk.
pub fn write_meta(target: &Path, provenance: &str) -> Result<()> {
    let meta = target.with_extension("sunet.meta");
    std::fs::write(&meta, format!("{provenance}\n"))
        .with_context(|| format!("writing {}", meta.display()))
}

pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        bail!("{what} not found at {}", path.display());
    }
    Ok(())
}

pub fn require_dir(path: &Path, what: &str) -> Result<()> {
    if !path.is_dir() {
        bail!("{what} directory not found at {}", path.display());
    }
    Ok(())
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

/// North-up transform mapping a tile's pixel grid onto its geo bounds.
pub fn tile_transform(tile: &TileBounds, px: usize) -> GeoTransform {
    let b = &tile.bounds;
    GeoTransform {
        a: b.width() / px as f64,
        b: 0.0,
        c: b.min_lon,
        d: 0.0,
        e: -b.height() / px as f64,
        f: b.max_lat,
    }
}

pub fn tile_meters_per_pixel(tile: &TileBounds, px: usize) -> f64 {
    let (_, lat) = tile.bounds.center();
    tile_transform(tile, px).meters_per_pixel_at(lat)
}

/// Tile image → network input: optional per-channel color rescale, zero
/// padding, channels scaled to [0, 1].
pub fn preprocess_image(cfg: &PipelineConfig, img: &ImageRaster) -> Result<Tensor> {
    if img.width != cfg.tile_px || img.height != cfg.tile_px {
        bail!(
            "tile image is {}x{}, config expects {}x{}",
            img.width,
            img.height,
            cfg.tile_px,
            cfg.tile_px
        );
    }
    let scaled = if cfg.rescale_colors { rescale_colors(img) } else { img.clone() };
    Ok(pad_image(&scaled, cfg.pad).to_input_tensor())
}

pub fn load_tile_input(cfg: &PipelineConfig, cell_id: &str) -> Result<Tensor> {
    let path = Paths::image(cfg, cell_id);
    let img = read_image_png(&path).with_context(|| format!("tile image {}", path.display()))?;
    preprocess_image(cfg, &img)
}

/// Label mask padded to the network input size.
pub fn load_padded_mask(cfg: &PipelineConfig, class: &str, cell_id: &str) -> Result<MaskRaster> {
    let path = Paths::mask(cfg, class, cell_id);
    let mask = satpipe_core::raster::read_mask_png(&path)
        .with_context(|| format!("label mask {}", path.display()))?;
    if mask.width != cfg.tile_px || mask.height != cfg.tile_px {
        bail!(
            "mask {} is {}x{}, config expects {}x{}",
            path.display(),
            mask.width,
            mask.height,
            cfg.tile_px,
            cfg.tile_px
        );
    }
    Ok(pad_mask(&mask, cfg.pad))
}
