//! Cross-validated linear classification over margin losses, plus a
//! full-data convergence comparison between the logistic loss and its
//! rooted counterpart.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use ndarray::Array1;
use rayon::prelude::*;
use rooted_loss::dataset::{kfold, standardize_train_test, Dataset, Fold, FoldPlan, Standardizer};
use rooted_loss::loss::LossSpec;
use rooted_loss::models::{evaluate_margin_model, linear_objective};
use rooted_loss::optim::{
    first_iteration_below, gd_run, normalized_trace, sgd_run, BatchSize, OptimRun,
    OptimizerConfig,
};

use crate::config::RegressConfig;
use crate::emit::{self, ResultRow, SummaryRow};
use crate::sources;

/// Everything a regress invocation produces, already written to disk.
pub struct RegressOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    pub convergence: Vec<ConvergenceRow>,
}

/// Iterations needed to drive the normalized training loss below the
/// threshold on the full standardized dataset, one model per column.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub task: String,
    pub k: f64,
    pub iterations: u64,
    pub logistic_iters: Option<u64>,
    pub rooted_iters: Option<u64>,
}

/// Expands loss-family names into concrete specs; "rlo" fans out over the
/// k grid.
pub fn expand_losses(names: &[String], k_grid: &[f64]) -> Result<Vec<LossSpec>> {
    let mut specs = Vec::new();
    for name in names {
        match name.as_str() {
            "logistic" => specs.push(LossSpec::Logistic),
            "rlo" => {
                if k_grid.is_empty() {
                    bail!("rlo requested with an empty k grid");
                }
                for &k in k_grid {
                    specs.push(LossSpec::rlo(k)?);
                }
            }
            other => bail!("unknown margin loss {other:?} (expected logistic or rlo)"),
        }
    }
    if specs.is_empty() {
        bail!("no losses configured");
    }
    Ok(specs)
}

/// Maps a one-vs-all task name back to its parent dataset
/// ("wine-c2" -> "wine"); other names pass through.
pub fn dataset_of_task(task: &str) -> &str {
    if let Some(pos) = task.rfind("-c") {
        if task[pos + 2..].chars().all(|c| c.is_ascii_digit()) && pos + 2 < task.len() {
            return &task[..pos];
        }
    }
    task
}

struct Task {
    data: Dataset,
    iterations: u64,
    convergence_k: Option<f64>,
}

fn optimizer_config(cfg: &RegressConfig, iterations: u64) -> OptimizerConfig {
    let mut oc = OptimizerConfig::new(cfg.learning_rate, iterations);
    oc.record_every = cfg.record_every;
    oc.l2_lambda = cfg.l2_lambda;
    if let Some(b) = cfg.batch {
        oc.batch = BatchSize::Size(b);
        oc.seed = cfg.sgd_seed;
    }
    oc
}

fn train_margin(train: &Dataset, spec: &LossSpec, oc: &OptimizerConfig) -> Result<OptimRun> {
    let obj = linear_objective(train, spec, oc.l2_lambda)?;
    let w0 = Array1::zeros(train.dim());
    let run = match oc.batch {
        BatchSize::Full => gd_run(&obj, w0, oc, None)?,
        BatchSize::Size(_) => sgd_run(&obj, w0, oc, None)?,
    };
    Ok(run)
}

fn fold_data(
    task: &Dataset,
    fold: &Fold,
    standardize: bool,
    add_bias: bool,
) -> Result<(Dataset, Dataset)> {
    let train = task.subset(&fold.train)?;
    let val = task.subset(&fold.validation)?;
    let (train, val) = if standardize {
        let (a, b, _) = standardize_train_test(&train, &val)?;
        (a, b)
    } else {
        (train, val)
    };
    Ok(if add_bias {
        (train.with_bias_column(), val.with_bias_column())
    } else {
        (train, val)
    })
}

/// Trains logistic and rooted models on the whole task (standardized
/// against itself) and reports when each normalized trace first drops
/// below the threshold. Records every iteration regardless of the
/// benchmark's thinning so the counts are exact.
pub fn convergence_pair(
    task: &Dataset,
    k: f64,
    cfg: &RegressConfig,
    iterations: u64,
) -> Result<(Option<u64>, Option<u64>)> {
    let data = if cfg.standardize {
        Standardizer::fit(task.features())?.transform(task)?
    } else {
        task.clone()
    };
    let data = if cfg.add_bias { data.with_bias_column() } else { data };
    let mut oc = OptimizerConfig::new(cfg.learning_rate, iterations);
    oc.l2_lambda = cfg.l2_lambda;
    let mut counts = [None, None];
    for (slot, spec) in [LossSpec::Logistic, LossSpec::rlo(k)?].iter().enumerate() {
        let run = train_margin(&data, spec, &oc)?;
        counts[slot] = first_iteration_below(&normalized_trace(&run.trace)?, cfg.threshold);
    }
    Ok((counts[0], counts[1]))
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut text = String::from("task,k,iterations,logistic_iters,rlo_iters\n");
    for r in rows {
        let fmt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            text,
            "{},{},{},{},{}",
            r.task,
            r.k,
            r.iterations,
            fmt(r.logistic_iters),
            fmt(r.rooted_iters)
        )
        .expect("string write");
    }
    text
}

pub fn run(cfg: &RegressConfig, out_dir: &Path) -> Result<RegressOutput> {
    if !(cfg.threshold > 0.0 && cfg.threshold <= 1.0) {
        bail!("threshold must lie in (0, 1], got {}", cfg.threshold);
    }
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let specs = expand_losses(&cfg.losses, &cfg.k_grid)?;

    let mut tasks = Vec::new();
    for name in &cfg.datasets {
        let data = sources::resolve(name, Path::new(&cfg.data_dir))?;
        let iterations = cfg.iterations_for(data.name());
        let convergence_k = cfg.convergence_k(data.name());
        for task in sources::margin_tasks(&data)? {
            tasks.push(Task {
                data: task,
                iterations,
                convergence_k,
            });
        }
    }
    let plans: Vec<FoldPlan> = tasks
        .iter()
        .map(|t| kfold(t.data.n(), cfg.folds, cfg.fold_seed))
        .collect::<rooted_loss::Result<_>>()?;

    let cells: Vec<(usize, usize)> = (0..tasks.len())
        .flat_map(|ti| (0..specs.len()).map(move |si| (ti, si)))
        .collect();
    let mut cell_outputs: Vec<(usize, Vec<ResultRow>, Vec<(String, String)>)> = cells
        .par_iter()
        .map(|&(ti, si)| -> Result<_> {
            let task = &tasks[ti];
            let spec = &specs[si];
            let oc = optimizer_config(cfg, task.iterations);
            let mut rows = Vec::with_capacity(plans[ti].folds.len());
            let mut traces = Vec::new();
            for (fi, fold) in plans[ti].folds.iter().enumerate() {
                let t0 = Instant::now();
                let (train, val) = fold_data(&task.data, fold, cfg.standardize, cfg.add_bias)?;
                let run = train_margin(&train, spec, &oc)?;
                let acc = evaluate_margin_model(run.params.view(), &val)?;
                let iters = normalized_trace(&run.trace)
                    .ok()
                    .and_then(|nt| first_iteration_below(&nt, cfg.threshold));
                let (loss, k, m) = emit::loss_columns(spec);
                rows.push(ResultRow {
                    dataset: task.data.name().into(),
                    model: "linear".into(),
                    loss,
                    k,
                    m,
                    lambda: cfg.l2_lambda,
                    fold: Some(fi),
                    seed: cfg.fold_seed,
                    test_acc: Some(acc),
                    iters_to_threshold: iters,
                    wall_seconds: t0.elapsed().as_secs_f64(),
                    status: emit::status_string(&run.status),
                });
                if cfg.emit_traces {
                    let mut buf = Vec::new();
                    run.trace.write_csv(&mut buf)?;
                    traces.push((
                        format!("trace_{}_{}_f{fi}.csv", task.data.name(), emit::loss_tag(spec)),
                        String::from_utf8(buf).expect("csv is utf-8"),
                    ));
                }
            }
            Ok((ti * specs.len() + si, rows, traces))
        })
        .collect::<Result<_>>()?;
    cell_outputs.sort_by_key(|(order, _, _)| *order);

    let mut rows = Vec::new();
    for (_, cell_rows, traces) in cell_outputs {
        rows.extend(cell_rows);
        for (file, contents) in traces {
            std::fs::write(out_dir.join(&file), contents)
                .with_context(|| format!("writing trace {file}"))?;
        }
    }

    let mut convergence = Vec::new();
    for task in &tasks {
        let Some(k) = task.convergence_k else { continue };
        let (logistic_iters, rooted_iters) =
            convergence_pair(&task.data, k, cfg, task.iterations)?;
        convergence.push(ConvergenceRow {
            task: task.data.name().into(),
            k,
            iterations: task.iterations,
            logistic_iters,
            rooted_iters,
        });
    }

    let summary = emit::summarize(&rows);
    emit::write_results(&out_dir.join("results.csv"), &rows)?;
    emit::write_summary(&out_dir.join("summary.csv"), &summary)?;
    std::fs::write(out_dir.join("convergence.csv"), convergence_csv(&convergence))
        .context("writing convergence.csv")?;
    Ok(RegressOutput {
        rows,
        summary,
        convergence,
    })
}
