//! Generate the synthetic two-country fixture used by the pipeline tests:
//!
//! ```sh
//! cargo run -p satpipe-core --example make_fixture -- <dir> [seed]
//! ```
//!
//! Prints the `[grid] regions` value to paste into a pipeline config.

use satpipe_core::synth::{write_fixture, FixtureOptions};

fn main() {
    let mut args = std::env::args().skip(1);
    let dir = args.next().unwrap_or_else(|| "fixture".to_string());
    let seed: u64 = args.next().map(|s| s.parse().expect("seed must be a u64")).unwrap_or(7);

    let summary = write_fixture(dir.as_ref(), &FixtureOptions::default(), seed)
        .expect("writing fixture");
    println!("fixture: {} tiles under {}", summary.n_tiles, summary.dir.display());
    println!("vectors    = {}", summary.vectors.display());
    println!("images     = {}", summary.images_dir.display());
    println!("nightlight = {}", summary.nightlight.display());
    println!("clusters   = {}", summary.clusters.display());
    println!("regions    = {}", summary.regions);
}
