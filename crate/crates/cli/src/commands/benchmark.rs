//! `satpipe benchmark`: models × feature sets, leave-one-country-out, with
//! the pooled R² table, per-country long table and fold-audit log.

use anyhow::{bail, Result};
use satpipe_core::bench::{benchmark_table, write_audit, write_per_country, write_table};
use satpipe_core::features::{read_feature_rows, LabelKind};
use satpipe_core::seed::derive_seed;

use super::{ensure_dir, require_file, Paths};
use crate::config::PipelineConfig;

pub fn run(cfg: &PipelineConfig) -> Result<()> {
    let features_csv = Paths::features_dir(cfg).join("features.csv");
    require_file(&features_csv, "feature table (run `features` first)")?;

    let rows = read_feature_rows(&features_csv, &cfg.quantiles)?;
    let label = LabelKind::parse(&cfg.label)?;
    let table = benchmark_table(&rows, label, derive_seed(cfg.seed, "benchmark"))?;

    // Protocol invariant: no fold may have trained on its held-out country.
    for row in &table {
        if !row.cv.audit_is_clean() {
            bail!(
                "fold audit failed for {} / {}",
                row.model.name(),
                row.feature_set.name()
            );
        }
    }

    let dir = Paths::bench_dir(cfg);
    ensure_dir(&dir)?;
    let provenance = cfg.provenance("benchmark");
    write_table(&dir.join("table.csv"), &table, Some(&provenance))?;
    write_per_country(&dir.join("per_country.csv"), &table, Some(&provenance))?;
    write_audit(&dir.join("audit.csv"), &table, Some(&provenance))?;

    println!("benchmark: {} rows ({} clusters, label {})", table.len(), rows.len(), cfg.label);
    for row in &table {
        println!("  {:<12} {:<16} r2_pooled = {:.4}", row.model.name(), row.feature_set.name(), row.cv.pooled_r2);
    }
    Ok(())
}
