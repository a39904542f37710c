//! `satpipe train`: fit one network per class and ensemble seed on the
//! (image, label-mask) pairs, writing checkpoints and training logs.

use anyhow::{bail, Context, Result};
use satpipe_core::grid::read_manifest;
use satpipe_core::nn::{build_sat_unet, save_checkpoint, train, write_train_log, TrainOptions};
use satpipe_core::raster::MaskRaster;
use satpipe_core::rasterize::augment_tensor_pairs;
use satpipe_core::seed::derive_seed;
use satpipe_core::tensor::Tensor;

use super::{ensure_dir, load_padded_mask, load_tile_input, require_dir, require_file, Paths};
use crate::config::PipelineConfig;

pub fn run(cfg: &PipelineConfig) -> Result<()> {
    require_file(&Paths::manifest(cfg), "grid manifest (run `rasterize` first)")?;
    require_dir(&cfg.images, "tile image")?;
    for class in &cfg.classes {
        require_dir(&Paths::masks_dir(cfg, class), "label mask")?;
    }

    let mut tiles = read_manifest(&Paths::manifest(cfg))?;
    if let Some(filter) = &cfg.filter_manifest {
        require_file(filter, "filter manifest")?;
        let kept = read_manifest(filter)?;
        let keep: std::collections::HashSet<String> =
            kept.into_iter().map(|t| t.cell_id).collect();
        tiles.retain(|t| keep.contains(&t.cell_id));
        if tiles.is_empty() {
            bail!("filter manifest removed every tile");
        }
    }

    ensure_dir(&cfg.out.join("checkpoints"))?;
    let provenance = cfg.provenance("train");

    for class in &cfg.classes {
        let mut dataset: Vec<(Tensor, MaskRaster)> = Vec::with_capacity(tiles.len());
        for tile in &tiles {
            let image = load_tile_input(cfg, &tile.cell_id)?;
            let mask = load_padded_mask(cfg, class, &tile.cell_id)?;
            dataset.push((image, mask));
        }
        if cfg.augment {
            dataset = augment_tensor_pairs(&dataset)?;
        }

        for &ensemble_seed in &cfg.ensemble_seeds {
            let label = format!("{class}:{ensemble_seed}");
            let unet_cfg = cfg.unet_config(derive_seed(cfg.seed, &format!("unet:{label}")));
            let mut net = build_sat_unet(&unet_cfg)?;
            let opts = TrainOptions {
                epochs: cfg.epochs,
                batch_size: cfg.batch_size,
                learning_rate: cfg.learning_rate,
                momentum: cfg.momentum,
                dice_weight: cfg.dice_weight,
                seed: derive_seed(cfg.seed, &format!("train:{label}")),
            };
            let log = train(&mut net, &dataset, &opts)
                .with_context(|| format!("training {label}"))?;
            let ckpt = Paths::checkpoint(cfg, class, ensemble_seed);
            save_checkpoint(&net, &ckpt)?;
            super::write_meta(&ckpt, &provenance)?;
            write_train_log(&Paths::train_log(cfg, class, ensemble_seed), &log, Some(&provenance))?;
            let last = log.last().expect("at least one epoch");
            println!(
                "train {label}: {} samples, {} epochs, loss {:.4}, jaccard {:.3}",
                dataset.len(),
                log.len(),
                last.loss,
                last.jaccard
            );
        }
    }
    Ok(())
}
