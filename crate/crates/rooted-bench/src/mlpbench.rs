//! Fully connected ReLU networks on the two-spiral task, comparing
//! softmax losses across depths and init seeds.

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use rooted_loss::dataset::{make_spiral, train_test_split, Dataset};
use rooted_loss::loss::LossSpec;
use rooted_loss::models::{
    decision_grid, evaluate_mlp, init_params, mlp_objective, GridBounds, InitScheme, MlpParams,
    MlpShape,
};
use rooted_loss::optim::{gd_run, OptimizerConfig};

use crate::config::MlpConfig;
use crate::emit::{self, ResultRow, SummaryRow};

pub struct MlpOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

/// Parses a softmax-loss name, wiring in the configured root and focal
/// exponent where they apply.
pub fn softmax_spec(name: &str, k: f64, gamma: f64) -> Result<LossSpec> {
    match name {
        "ce" => Ok(LossSpec::CrossEntropy),
        "rooted-ce" => Ok(LossSpec::rooted_ce(k)?),
        "focal" => Ok(LossSpec::focal(gamma)?),
        other => bail!("unknown softmax loss {other:?} (expected ce, rooted-ce, or focal)"),
    }
}

/// Trains one network and reports its test accuracy with the run.
pub fn train_one(
    train: &Dataset,
    test: &Dataset,
    shape: &MlpShape,
    spec: &LossSpec,
    learning_rate: f64,
    iterations: u64,
    record_every: u64,
    seed: u64,
) -> Result<(MlpParams, f64, rooted_loss::optim::OptimRun)> {
    let obj = mlp_objective(train, shape, spec)?;
    let w0 = init_params(shape, InitScheme::UniformScaled, seed).flatten();
    let mut oc = OptimizerConfig::new(learning_rate, iterations);
    oc.record_every = record_every;
    let run = gd_run(&obj, w0, &oc, None)?;
    let params = MlpParams::from_flat(shape, run.params.view())?;
    let acc = evaluate_mlp(&params, test)?;
    Ok((params, acc, run))
}

pub fn run(cfg: &MlpConfig, out_dir: &Path) -> Result<MlpOutput> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    if cfg.init_seeds.is_empty() {
        bail!("no init seeds configured");
    }
    let data = make_spiral(cfg.spiral_n, cfg.spiral_noise, cfg.data_seed)?;
    let (train, test) = train_test_split(&data, cfg.train_fraction, cfg.split_seed)?;
    let (train, test) = (train.as_two_class()?, test.as_two_class()?);

    let specs: Vec<LossSpec> = cfg
        .losses
        .iter()
        .map(|n| softmax_spec(n, cfg.k, cfg.focal_gamma))
        .collect::<Result<_>>()?;
    if specs.is_empty() {
        bail!("no losses configured");
    }

    struct Cell {
        depth: usize,
        iterations: u64,
        spec: LossSpec,
        seed: u64,
        emit_grid: bool,
    }
    let mut cells = Vec::new();
    for di in &cfg.depths {
        if di.depth < 2 {
            bail!("depth must be at least 2 (one hidden layer), got {}", di.depth);
        }
        for spec in &specs {
            for (si, &seed) in cfg.init_seeds.iter().enumerate() {
                cells.push(Cell {
                    depth: di.depth,
                    iterations: di.iterations,
                    spec: *spec,
                    seed,
                    emit_grid: cfg.emit_grids && si == 0,
                });
            }
        }
    }

    let bounds = GridBounds::cover(&data, 0.25)?;
    let mut outputs: Vec<(usize, ResultRow, Vec<(String, String)>)> = cells
        .par_iter()
        .enumerate()
        .map(|(order, cell)| -> Result<_> {
            let t0 = Instant::now();
            let shape = MlpShape::new(2, vec![cfg.hidden; cell.depth - 1], 2)?;
            let (params, acc, run) = train_one(
                &train,
                &test,
                &shape,
                &cell.spec,
                cfg.learning_rate,
                cell.iterations,
                cfg.record_every,
                cell.seed,
            )?;
            let tag = emit::loss_tag(&cell.spec);
            let mut files = Vec::new();
            let mut buf = Vec::new();
            run.trace.write_csv(&mut buf)?;
            files.push((
                format!("trace_spiral_fcn-d{}_{}_s{}.csv", cell.depth, tag, cell.seed),
                String::from_utf8(buf).expect("csv is utf-8"),
            ));
            if cell.emit_grid {
                let grid = decision_grid(&params, bounds, cfg.grid_resolution)?;
                let mut buf = Vec::new();
                grid.write_csv(&mut buf)?;
                files.push((
                    format!("grid_fcn-d{}_{}.csv", cell.depth, tag),
                    String::from_utf8(buf).expect("csv is utf-8"),
                ));
            }
            let (loss, k, m) = emit::loss_columns(&cell.spec);
            let row = ResultRow {
                dataset: "spiral".into(),
                model: format!("fcn-d{}", cell.depth),
                loss,
                k,
                m,
                lambda: 0.0,
                fold: None,
                seed: cell.seed,
                test_acc: Some(acc),
                iters_to_threshold: None,
                wall_seconds: t0.elapsed().as_secs_f64(),
                status: emit::status_string(&run.status),
            };
            Ok((order, row, files))
        })
        .collect::<Result<_>>()?;
    outputs.sort_by_key(|(order, _, _)| *order);

    let mut rows = Vec::new();
    for (_, row, files) in outputs {
        rows.push(row);
        for (file, contents) in files {
            std::fs::write(out_dir.join(&file), contents)
                .with_context(|| format!("writing {file}"))?;
        }
    }
    let summary = emit::summarize(&rows);
    emit::write_results(&out_dir.join("results.csv"), &rows)?;
    emit::write_summary(&out_dir.join("summary.csv"), &summary)?;
    Ok(MlpOutput { rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_name_parsing() {
        assert_eq!(softmax_spec("ce", 3.0, 2.0).unwrap(), LossSpec::CrossEntropy);
        assert_eq!(
            softmax_spec("rooted-ce", 3.0, 2.0).unwrap(),
            LossSpec::rooted_ce(3.0).unwrap()
        );
        assert_eq!(
            softmax_spec("focal", 3.0, 2.0).unwrap(),
            LossSpec::focal(2.0).unwrap()
        );
        assert!(softmax_spec("logistic", 3.0, 2.0).is_err());
    }
}
