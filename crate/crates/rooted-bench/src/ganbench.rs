//! Seed-replicated adversarial training against a 1-D Gaussian target.

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use rooted_loss::gan::{alternate_train, gan_diagnostics, GanConfig, GanReport, GanTarget};

use crate::config::GanToyConfig;
use crate::emit::{self, ResultRow, SummaryRow};

pub struct GanOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    pub reports: Vec<(u64, GanReport)>,
}

fn training_config(cfg: &GanToyConfig, seed: u64) -> GanConfig {
    GanConfig {
        k: cfg.k,
        latent_dim: cfg.latent_dim,
        gen_hidden: cfg.gen_hidden.clone(),
        disc_hidden: cfg.disc_hidden.clone(),
        eta_disc: cfg.eta_disc,
        eta_gen: cfg.eta_gen,
        disc_steps: 1,
        gen_steps: 1,
        rounds: cfg.rounds,
        batch: cfg.batch,
        eval_batch: cfg.eval_batch,
        seed,
        record_every: cfg.record_every,
        clamp: 1e-7,
    }
}

pub fn run(cfg: &GanToyConfig, out_dir: &Path) -> Result<GanOutput> {
    if cfg.seeds.is_empty() {
        bail!("no seeds configured");
    }
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let target = GanTarget::gaussian_1d(cfg.target_mean, cfg.target_std)?;

    let outputs: Vec<(u64, ResultRow, String, String, GanReport)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| -> Result<_> {
            let t0 = Instant::now();
            let run = alternate_train(&training_config(cfg, seed), &target)?;
            let report = gan_diagnostics(&run.trace, &target, cfg.window)?;
            let mut buf = Vec::new();
            run.trace.write_csv(&mut buf)?;
            let trace_text = String::from_utf8(buf).expect("csv is utf-8");
            let report_text =
                serde_json::to_string_pretty(&report).context("serializing report")?;
            let row = ResultRow {
                dataset: "gauss-1d".into(),
                model: "gan".into(),
                loss: "rooted-value".into(),
                k: Some(cfg.k),
                m: None,
                lambda: 0.0,
                fold: None,
                seed,
                test_acc: Some(report.disc_acc_mean),
                iters_to_threshold: None,
                wall_seconds: t0.elapsed().as_secs_f64(),
                status: emit::status_string(&run.status),
            };
            Ok((seed, row, trace_text, report_text, report))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (seed, row, trace_text, report_text, report) in outputs {
        std::fs::write(out_dir.join(format!("gan_trace_s{seed}.csv")), trace_text)
            .with_context(|| format!("writing trace for seed {seed}"))?;
        std::fs::write(
            out_dir.join(format!("report_s{seed}.json")),
            report_text + "\n",
        )
        .with_context(|| format!("writing report for seed {seed}"))?;
        rows.push(row);
        reports.push((seed, report));
    }
    let summary = emit::summarize(&rows);
    emit::write_results(&out_dir.join("results.csv"), &rows)?;
    emit::write_summary(&out_dir.join("summary.csv"), &summary)?;
    Ok(GanOutput {
        rows,
        summary,
        reports,
    })
}
