//! `satpipe judge`: score every (prediction, label) pair's validity index
//! against the judged class's stage-1 model, drop over-predicted labels,
//! and optionally iterate retrain → rescore → refilter. Emits one report
//! CSV per round plus a kept-cell manifest consumable by `train` through
//! `train.filter_manifest`.

use anyhow::{Context, Result};
use satpipe_core::grid::{read_manifest, write_manifest};
use satpipe_core::judge::{iterative_filter_train, write_filter_report, IterativeOptions, JudgeSample};
use satpipe_core::nn::{load_checkpoint, save_checkpoint, TrainOptions};
use satpipe_core::seed::derive_seed;

use super::{ensure_dir, load_padded_mask, load_tile_input, require_dir, require_file, Paths};
use crate::config::PipelineConfig;

pub fn run(cfg: &PipelineConfig) -> Result<()> {
    let class = &cfg.judge_class;
    require_file(&Paths::manifest(cfg), "grid manifest (run `rasterize` first)")?;
    require_dir(&cfg.images, "tile image")?;
    require_dir(&Paths::masks_dir(cfg, class), "label mask")?;
    let first_seed = cfg.ensemble_seeds[0];
    let ckpt = Paths::checkpoint(cfg, class, first_seed);
    require_file(&ckpt, "stage-1 checkpoint (run `train` first)")?;

    let tiles = read_manifest(&Paths::manifest(cfg))?;
    let mut samples = Vec::with_capacity(tiles.len());
    for tile in &tiles {
        samples.push(JudgeSample {
            cell_id: tile.cell_id.clone(),
            image: load_tile_input(cfg, &tile.cell_id)?,
            reference: load_padded_mask(cfg, class, &tile.cell_id)?,
        });
    }

    let initial = load_checkpoint(&ckpt)?;
    let label = format!("judge:{class}");
    let opts = IterativeOptions {
        unet: cfg.unet_config(derive_seed(cfg.seed, &format!("unet:{label}"))),
        train: TrainOptions {
            epochs: cfg.epochs,
            batch_size: cfg.batch_size,
            learning_rate: cfg.learning_rate,
            momentum: cfg.momentum,
            dice_weight: cfg.dice_weight,
            seed: derive_seed(cfg.seed, &format!("train:{label}")),
        },
        alpha_max: cfg.alpha_max,
        initial: Some(initial),
    };
    let (net, reports) = iterative_filter_train(&samples, cfg.judge_rounds, &opts)
        .context("iterative filter/train")?;

    let dir = Paths::judge_dir(cfg);
    ensure_dir(&dir)?;
    let provenance = cfg.provenance("judge");
    for (round, report) in reports.iter().enumerate() {
        write_filter_report(
            &dir.join(format!("{class}_round{round}.csv")),
            report,
            Some(&provenance),
        )?;
    }

    // Kept manifest: the grid manifest restricted to the final kept set.
    let final_kept: std::collections::HashSet<&str> =
        reports.last().expect("rounds >= 1").kept_ids().into_iter().collect();
    let kept_tiles: Vec<_> =
        tiles.iter().filter(|t| final_kept.contains(t.cell_id.as_str())).cloned().collect();
    write_manifest(&dir.join("kept_manifest.csv"), &kept_tiles, Some(&provenance))?;

    if cfg.judge_rounds > 1 {
        let refined = dir.join(format!("{class}_refined.sunet"));
        save_checkpoint(&net, &refined)?;
        super::write_meta(&refined, &provenance)?;
    }

    println!(
        "judge {class}: {} rounds, kept {} of {} (overall drop fraction {:.3})",
        reports.len(),
        kept_tiles.len(),
        tiles.len(),
        1.0 - kept_tiles.len() as f64 / tiles.len() as f64
    );
    Ok(())
}
