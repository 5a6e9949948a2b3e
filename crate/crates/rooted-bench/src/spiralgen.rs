//! Emits the two-spiral dataset as a standalone CSV.

use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use rooted_loss::dataset::{make_spiral, write_delimited};

use crate::config::SpiralConfig;
use crate::emit::{self, ResultRow};

pub fn run(cfg: &SpiralConfig, out_dir: &Path) -> Result<Vec<ResultRow>> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let t0 = Instant::now();
    let data = make_spiral(cfg.n, cfg.noise, cfg.seed)?;
    write_delimited(&data, &out_dir.join("spiral.csv"), ',')?;
    let rows = vec![ResultRow {
        dataset: "spiral".into(),
        model: "generator".into(),
        loss: String::new(),
        k: None,
        m: None,
        lambda: 0.0,
        fold: None,
        seed: cfg.seed,
        test_acc: None,
        iters_to_threshold: None,
        wall_seconds: t0.elapsed().as_secs_f64(),
        status: "completed".into(),
    }];
    emit::write_results(&out_dir.join("results.csv"), &rows)?;
    Ok(rows)
}
