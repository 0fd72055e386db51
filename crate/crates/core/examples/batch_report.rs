//! Run a seed batch from a JSON config, then chart it.
//!
//! Writes `traj_seed{seed}.csv`, a `.meta.json` per seed, `aggregate.json`
//! and `chart.svg` into a temporary directory (or the path given as the
//! first argument).

use std::path::PathBuf;

use sgapproach::report::{load_series_dir, write_svg};
use sgapproach::{load_config, run_batch};

fn main() -> anyhow::Result<()> {
    let config = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/chain_exact.json");
    let mut cfg = load_config(&config)?;
    let out = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => std::env::temp_dir().join("sgapproach_batch_report"),
    };
    cfg.output_dir = out.clone();

    let batch = run_batch(&cfg)?;
    for s in &batch.aggregate.seeds {
        println!("seed {}: final dist {:.3e}, slope {:?}", s.seed, s.final_dist, s.loglog_slope);
    }
    for c in batch.aggregate.checkpoints.iter().step_by(40) {
        println!("n={:>6} median dist {:.4}", c.n, c.median);
    }

    let chart = out.join("chart.svg");
    write_svg(&load_series_dir(&out)?, &chart)?;
    println!("wrote {}", chart.display());
    Ok(())
}
