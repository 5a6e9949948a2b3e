//! Curvature diagnostics: trains a logistic probe, then maps the
//! pointwise conditioning quantities and Hessian spectra across roots.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use ndarray::Array1;
use rooted_loss::calculus::{assemble_hessian, condition_number, conditioning_report};
use rooted_loss::dataset::Standardizer;
use rooted_loss::loss::LossSpec;
use rooted_loss::models::{evaluate_margin_model, linear_objective};
use rooted_loss::optim::{gd_run, OptimizerConfig};

use crate::config::DiagnoseConfig;
use crate::emit::{self, ResultRow};
use crate::sources;

/// Per-root aggregate written to condition_summary.csv.
#[derive(Debug, Clone)]
pub struct ConditionSummary {
    pub k: f64,
    pub fraction_ratio_above_one: f64,
    pub fraction_sufficient: f64,
    pub cond_logistic: f64,
    pub cond_rooted: f64,
}

pub struct DiagnoseOutput {
    pub rows: Vec<ResultRow>,
    pub summaries: Vec<ConditionSummary>,
    /// Test accuracy of the logistic probe on its own training data.
    pub probe_acc: f64,
}

pub fn condition_summary_csv(rows: &[ConditionSummary]) -> String {
    let mut text =
        String::from("k,fraction_ratio_above_one,fraction_sufficient,cond_logistic,cond_rooted\n");
    for r in rows {
        writeln!(
            text,
            "{},{},{},{},{}",
            r.k, r.fraction_ratio_above_one, r.fraction_sufficient, r.cond_logistic, r.cond_rooted
        )
        .expect("string write");
    }
    text
}

pub fn run(cfg: &DiagnoseConfig, out_dir: &Path) -> Result<DiagnoseOutput> {
    if cfg.k_values.is_empty() {
        bail!("no k values configured");
    }
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let full = sources::resolve(&cfg.dataset, Path::new(&cfg.data_dir))?;
    // Multiclass sets diagnose their first one-vs-all task.
    let task = sources::margin_tasks(&full)?
        .into_iter()
        .next()
        .expect("margin_tasks is non-empty");
    let data = if cfg.standardize {
        Standardizer::fit(task.features())?.transform(&task)?
    } else {
        task
    };
    let data = if cfg.add_bias { data.with_bias_column() } else { data };

    let t0 = Instant::now();
    let obj = linear_objective(&data, &LossSpec::Logistic, cfg.l2_lambda)?;
    let mut oc = OptimizerConfig::new(cfg.learning_rate, cfg.iterations);
    oc.l2_lambda = cfg.l2_lambda;
    let probe = gd_run(&obj, Array1::zeros(data.dim()), &oc, None)?;
    let probe_acc = evaluate_margin_model(probe.params.view(), &data)?;
    let cond_logistic = condition_number(
        &assemble_hessian(probe.params.view(), &data, &LossSpec::Logistic, cfg.l2_lambda)?.matrix,
    )?;

    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &k in &cfg.k_values {
        let spec = LossSpec::rlo(k)?;
        let report = conditioning_report(probe.params.view(), &data, k)?;
        let file = format!("conditioning_k{k}.csv");
        let mut buf = Vec::new();
        report.write_csv(&mut buf)?;
        std::fs::write(out_dir.join(&file), buf).with_context(|| format!("writing {file}"))?;

        let cond_rooted = condition_number(
            &assemble_hessian(probe.params.view(), &data, &spec, cfg.l2_lambda)?.matrix,
        )?;
        summaries.push(ConditionSummary {
            k,
            fraction_ratio_above_one: report.fraction_ratio_above_one(),
            fraction_sufficient: report.fraction_sufficient(),
            cond_logistic,
            cond_rooted,
        });
        let (loss, k_col, m_col) = emit::loss_columns(&spec);
        rows.push(ResultRow {
            dataset: data.name().into(),
            model: "linear".into(),
            loss,
            k: k_col,
            m: m_col,
            lambda: cfg.l2_lambda,
            fold: None,
            seed: 0,
            test_acc: Some(probe_acc),
            iters_to_threshold: None,
            wall_seconds: t0.elapsed().as_secs_f64(),
            status: emit::status_string(&probe.status),
        });
    }

    emit::write_results(&out_dir.join("results.csv"), &rows)?;
    std::fs::write(
        out_dir.join("condition_summary.csv"),
        condition_summary_csv(&summaries),
    )
    .context("writing condition_summary.csv")?;
    Ok(DiagnoseOutput {
        rows,
        summaries,
        probe_acc,
    })
}
