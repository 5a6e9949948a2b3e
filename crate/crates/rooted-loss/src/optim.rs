//! First-order training: full-batch gradient descent and epoch-shuffled
//! minibatch SGD over a generic [`Objective`], with loss traces, a
//! divergence sentinel, and trace post-processing.
//!
//! Ridge regularization lives here: the update is
//! `w <- w - eta * (grad f(w) + lambda * w)`, and the recorded gradient
//! norm includes the ridge term. Objectives stay pure loss means.

use std::time::Instant;

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::l2_norm;

/// Rows used per update step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BatchSize {
    Full,
    Size(usize),
}

/// Settings shared by both optimizers.
///
/// `iterations` counts parameter updates; zero is allowed and produces a
/// single trace record of the starting point. `record_every` thins the
/// trace: records land at update multiples of it, plus always the final
/// state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub iterations: u64,
    pub batch: BatchSize,
    pub l2_lambda: f64,
    pub seed: u64,
    pub record_every: u64,
}

impl OptimizerConfig {
    pub fn new(learning_rate: f64, iterations: u64) -> Self {
        OptimizerConfig {
            learning_rate,
            iterations,
            batch: BatchSize::Full,
            l2_lambda: 0.0,
            seed: 0,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be finite and > 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.l2_lambda.is_finite() && self.l2_lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "l2 strength must be finite and >= 0, got {}",
                self.l2_lambda
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter(
                "record_every must be at least 1".into(),
            ));
        }
        if let BatchSize::Size(0) = self.batch {
            return Err(Error::InvalidParameter("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Anything gradient descent can train. Implementations validate their
/// data/loss pairing at construction, so evaluation takes plain `f64`
/// paths; passing a weight vector of the wrong length panics.
pub trait Objective {
    /// Parameter vector length.
    fn dim(&self) -> usize;

    /// Number of data rows behind the mean.
    fn num_samples(&self) -> usize;

    fn value(&self, w: &Array1<f64>) -> f64;

    fn gradient(&self, w: &Array1<f64>) -> Array1<f64>;

    fn value_gradient(&self, w: &Array1<f64>) -> (f64, Array1<f64>) {
        (self.value(w), self.gradient(w))
    }

    /// Mean value and gradient over the rows in `idx` only.
    fn batch_value_gradient(&self, w: &Array1<f64>, idx: &[usize]) -> (f64, Array1<f64>);
}

/// One trace row. `seconds` is wall time since the run started; accuracy
/// fields are filled by the optional metrics hook and stay `None` (empty
/// in CSV, null in JSON) otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    #[serde(rename = "iter")]
    pub iteration: u64,
    pub loss: f64,
    pub train_acc: Option<f64>,
    pub test_acc: Option<f64>,
    pub grad_norm: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
}

impl TrainTrace {
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iter,loss,train_acc,test_acc,grad_norm,seconds")?;
        for r in &self.records {
            let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.iteration,
                r.loss,
                fmt_opt(r.train_acc),
                fmt_opt(r.test_acc),
                r.grad_norm,
                r.seconds
            )?;
        }
        Ok(())
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }

    pub fn total_seconds(&self) -> f64 {
        self.records.last().map(|r| r.seconds).unwrap_or(0.0)
    }
}

/// How a run ended. `Diverged` carries the number of completed updates
/// when a non-finite loss or gradient was first seen; the trace keeps the
/// finite records only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RunStatus {
    Completed,
    Diverged { iteration: u64 },
}

impl RunStatus {
    pub fn diverged(&self) -> bool {
        matches!(self, RunStatus::Diverged { .. })
    }
}

/// Result of a training run: final parameters (last finite iterate for
/// diverged runs), the loss trace, and the status.
#[derive(Debug, Clone)]
pub struct OptimRun {
    pub params: Array1<f64>,
    pub trace: TrainTrace,
    pub status: RunStatus,
}

/// Optional per-record metrics: returns (train accuracy, test accuracy).
pub type MetricsHook<'a> = dyn Fn(&Array1<f64>) -> (Option<f64>, Option<f64>) + 'a;

fn make_record(
    iteration: u64,
    loss: f64,
    grad_norm: f64,
    started: Instant,
    hook: Option<&MetricsHook<'_>>,
    w: &Array1<f64>,
) -> TraceRecord {
    let (train_acc, test_acc) = match hook {
        Some(h) => h(w),
        None => (None, None),
    };
    TraceRecord {
        iteration,
        loss,
        train_acc,
        test_acc,
        grad_norm,
        seconds: started.elapsed().as_secs_f64(),
    }
}

/// Full-batch gradient descent.
///
/// Records the state before updates at every `record_every`-th step and
/// always once more after the final update. On a non-finite loss or
/// gradient the run stops, keeps the last finite iterate, and reports
/// `Diverged`; no error is returned.
///
/// # Errors
/// Invalid config, a non-`Full` batch setting, or a starting point of the
/// wrong length.
pub fn gd_run<O: Objective + ?Sized>(
    obj: &O,
    w0: Array1<f64>,
    cfg: &OptimizerConfig,
    hook: Option<&MetricsHook<'_>>,
) -> Result<OptimRun> {
    cfg.validate()?;
    if cfg.batch != BatchSize::Full {
        return Err(Error::InvalidParameter(
            "gd_run is full-batch; use sgd_run for minibatches".into(),
        ));
    }
    check_start(obj, &w0)?;
    let started = Instant::now();
    let mut w = w0;
    let mut trace = TrainTrace::default();
    let mut status = RunStatus::Completed;

    for t in 0..cfg.iterations {
        let (v, g) = obj.value_gradient(&w);
        let step = ridge_step(g, &w, cfg.l2_lambda);
        if !finite(v, &step) {
            status = RunStatus::Diverged { iteration: t };
            break;
        }
        if t % cfg.record_every == 0 {
            trace
                .records
                .push(make_record(t, v, l2_norm(step.view()), started, hook, &w));
        }
        w.zip_mut_with(&step, |wi, si| *wi -= cfg.learning_rate * si);
    }

    if !status.diverged() {
        let (v, g) = obj.value_gradient(&w);
        let step = ridge_step(g, &w, cfg.l2_lambda);
        if finite(v, &step) {
            trace.records.push(make_record(
                cfg.iterations,
                v,
                l2_norm(step.view()),
                started,
                hook,
                &w,
            ));
        } else {
            status = RunStatus::Diverged {
                iteration: cfg.iterations,
            };
        }
    }

    Ok(OptimRun { params: w, trace, status })
}

/// Epoch-shuffled minibatch SGD.
///
/// Each epoch reshuffles all row indices with the config's ChaCha8 seed
/// and walks them in contiguous batches; the final batch of an epoch may
/// be short when the batch size does not divide `n`. Intermediate records
/// carry the minibatch loss and gradient norm (computed for the update
/// anyway); the final record is evaluated on the full dataset.
///
/// With `batch = Size(n)` each epoch is one full-batch update on a
/// permutation of the data, matching [`gd_run`] on that permuted dataset.
pub fn sgd_run<O: Objective + ?Sized>(
    obj: &O,
    w0: Array1<f64>,
    cfg: &OptimizerConfig,
    hook: Option<&MetricsHook<'_>>,
) -> Result<OptimRun> {
    cfg.validate()?;
    let n = obj.num_samples();
    let b = match cfg.batch {
        BatchSize::Size(b) if b <= n => b,
        BatchSize::Size(b) => {
            return Err(Error::InvalidParameter(format!(
                "batch size {b} exceeds {n} samples"
            )))
        }
        BatchSize::Full => {
            return Err(Error::InvalidParameter(
                "sgd_run needs an explicit batch size; use gd_run for full batches".into(),
            ))
        }
    };
    check_start(obj, &w0)?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut pos = n;
    let mut w = w0;
    let mut trace = TrainTrace::default();
    let mut status = RunStatus::Completed;

    for t in 0..cfg.iterations {
        if pos >= n {
            perm.shuffle(&mut rng);
            pos = 0;
        }
        let end = (pos + b).min(n);
        let idx = &perm[pos..end];
        pos = end;
        let (v, g) = obj.batch_value_gradient(&w, idx);
        let step = ridge_step(g, &w, cfg.l2_lambda);
        if !finite(v, &step) {
            status = RunStatus::Diverged { iteration: t };
            break;
        }
        if t % cfg.record_every == 0 {
            trace
                .records
                .push(make_record(t, v, l2_norm(step.view()), started, hook, &w));
        }
        w.zip_mut_with(&step, |wi, si| *wi -= cfg.learning_rate * si);
    }

    if !status.diverged() {
        let (v, g) = obj.value_gradient(&w);
        let step = ridge_step(g, &w, cfg.l2_lambda);
        if finite(v, &step) {
            trace.records.push(make_record(
                cfg.iterations,
                v,
                l2_norm(step.view()),
                started,
                hook,
                &w,
            ));
        } else {
            status = RunStatus::Diverged {
                iteration: cfg.iterations,
            };
        }
    }

    Ok(OptimRun { params: w, trace, status })
}

fn check_start<O: Objective + ?Sized>(obj: &O, w0: &Array1<f64>) -> Result<()> {
    if w0.len() != obj.dim() {
        return Err(Error::DimensionMismatch(format!(
            "starting point has length {}, objective expects {}",
            w0.len(),
            obj.dim()
        )));
    }
    if obj.num_samples() == 0 {
        return Err(Error::Empty("objective has no samples"));
    }
    Ok(())
}

fn ridge_step(mut g: Array1<f64>, w: &Array1<f64>, lambda: f64) -> Array1<f64> {
    if lambda != 0.0 {
        g.zip_mut_with(w, |gi, wi| *gi += lambda * wi);
    }
    g
}

fn finite(v: f64, step: &Array1<f64>) -> bool {
    v.is_finite() && step.iter().all(|x| x.is_finite())
}

/// Rescales the loss column to [(v - min) / (v0 - min)], where v0 is the
/// first record and min the trace minimum: 1 at the start, 0 at the best
/// point. A flat trace (v0 = min) degenerates to 1 followed by zeros.
/// Other columns are copied through unchanged.
///
/// # Errors
/// `Empty` on a trace with no records.
pub fn normalized_trace(trace: &TrainTrace) -> Result<TrainTrace> {
    let first = trace.records.first().ok_or(Error::Empty("trace has no records"))?;
    let v0 = first.loss;
    let vmin = trace
        .records
        .iter()
        .map(|r| r.loss)
        .fold(f64::INFINITY, f64::min);
    let denom = v0 - vmin;
    let records = trace
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let loss = if denom > 0.0 {
                (r.loss - vmin) / denom
            } else {
                // Degenerate flat trace.
                f64::from(i == 0)
            };
            TraceRecord { loss, ..r.clone() }
        })
        .collect();
    Ok(TrainTrace { records })
}

/// Iteration of the first record with loss strictly below `threshold`,
/// or `None` if the trace never gets there.
pub fn first_iteration_below(trace: &TrainTrace, threshold: f64) -> Option<u64> {
    trace
        .records
        .iter()
        .find(|r| r.loss < threshold)
        .map(|r| r.iteration)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// f(w) = 0.5 * ||w - target||^2 with per-sample shifted copies so the
    /// batch interface has something to chew on.
    struct Quadratic {
        target: Array1<f64>,
        n: usize,
    }

    impl Objective for Quadratic {
        fn dim(&self) -> usize {
            self.target.len()
        }
        fn num_samples(&self) -> usize {
            self.n
        }
        fn value(&self, w: &Array1<f64>) -> f64 {
            let d = w - &self.target;
            0.5 * d.dot(&d)
        }
        fn gradient(&self, w: &Array1<f64>) -> Array1<f64> {
            w - &self.target
        }
        fn batch_value_gradient(&self, w: &Array1<f64>, _idx: &[usize]) -> (f64, Array1<f64>) {
            self.value_gradient(w)
        }
    }

    fn quad() -> Quadratic {
        Quadratic {
            target: array![1.0, -2.0],
            n: 10,
        }
    }

    #[test]
    fn gd_converges_on_quadratic() {
        let cfg = OptimizerConfig::new(0.5, 60);
        let run = gd_run(&quad(), array![0.0, 0.0], &cfg, None).unwrap();
        assert_eq!(run.status, RunStatus::Completed);
        assert!((run.params[0] - 1.0).abs() < 1e-9);
        assert!((run.params[1] + 2.0).abs() < 1e-9);
        // record_every = 1: iterations + 1 records, losses non-increasing.
        assert_eq!(run.trace.records.len(), 61);
        for pair in run.trace.records.windows(2) {
            assert!(pair[1].loss <= pair[0].loss + 1e-15);
            assert!(pair[1].seconds >= pair[0].seconds);
        }
    }

    #[test]
    fn gd_single_step_is_the_textbook_update() {
        let cfg = OptimizerConfig::new(0.1, 1);
        let run = gd_run(&quad(), array![3.0, 3.0], &cfg, None).unwrap();
        // w1 = w0 - 0.1 * (w0 - target).
        assert_eq!(run.params, array![3.0 - 0.1 * 2.0, 3.0 - 0.1 * 5.0]);
    }

    #[test]
    fn ridge_term_shifts_fixed_point() {
        let mut cfg = OptimizerConfig::new(0.3, 400);
        cfg.l2_lambda = 1.0;
        let run = gd_run(&quad(), array![0.0, 0.0], &cfg, None).unwrap();
        // Minimizer of 0.5||w-t||^2 + 0.5*lambda*||w||^2 is t / (1+lambda).
        assert!((run.params[0] - 0.5).abs() < 1e-9);
        assert!((run.params[1] + 1.0).abs() < 1e-9);
        // Recorded gradient norm includes the ridge term, so it vanishes at
        // the regularized solution rather than at the data optimum.
        let g_at_solution = run.trace.records.last().unwrap().grad_norm;
        assert!(g_at_solution < 1e-8);
    }

    #[test]
    fn zero_iterations_records_start_only() {
        let cfg = OptimizerConfig::new(0.5, 0);
        let run = gd_run(&quad(), array![4.0, 0.0], &cfg, None).unwrap();
        assert_eq!(run.params, array![4.0, 0.0]);
        assert_eq!(run.trace.records.len(), 1);
        assert_eq!(run.trace.records[0].iteration, 0);
    }

    #[test]
    fn record_thinning_keeps_final_record() {
        let mut cfg = OptimizerConfig::new(0.1, 10);
        cfg.record_every = 4;
        let run = gd_run(&quad(), array![0.0, 0.0], &cfg, None).unwrap();
        let iters: Vec<u64> = run.trace.records.iter().map(|r| r.iteration).collect();
        assert_eq!(iters, vec![0, 4, 8, 10]);

        // When the last multiple coincides with the end, no duplicate.
        cfg.record_every = 5;
        let run = gd_run(&quad(), array![0.0, 0.0], &cfg, None).unwrap();
        let iters: Vec<u64> = run.trace.records.iter().map(|r| r.iteration).collect();
        assert_eq!(iters, vec![0, 5, 10]);
    }

    #[test]
    fn divergence_sentinel_keeps_last_finite_state() {
        // Learning rate far above 2/L for this quadratic: oscillates outward
        // to infinity.
        let cfg = OptimizerConfig::new(1e8, 10_000);
        let run = gd_run(&quad(), array![5.0, 5.0], &cfg, None).unwrap();
        let RunStatus::Diverged { iteration } = run.status else {
            panic!("expected divergence");
        };
        assert!(iteration > 0);
        assert!(run.params.iter().all(|v| v.is_finite()));
        assert!(run.trace.records.iter().all(|r| r.loss.is_finite()));
    }

    #[test]
    fn hook_fills_accuracy_columns() {
        let cfg = OptimizerConfig::new(0.5, 2);
        let hook = |_w: &Array1<f64>| (Some(0.75), None);
        let run = gd_run(&quad(), array![0.0, 0.0], &cfg, Some(&hook)).unwrap();
        assert!(run.trace.records.iter().all(|r| r.train_acc == Some(0.75)));
        assert!(run.trace.records.iter().all(|r| r.test_acc.is_none()));
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::new(0.0, 5).validate().is_err());
        assert!(OptimizerConfig::new(f64::NAN, 5).validate().is_err());
        let mut c = OptimizerConfig::new(0.1, 5);
        c.record_every = 0;
        assert!(c.validate().is_err());
        let mut c = OptimizerConfig::new(0.1, 5);
        c.l2_lambda = -1.0;
        assert!(c.validate().is_err());
        let mut c = OptimizerConfig::new(0.1, 5);
        c.batch = BatchSize::Size(0);
        assert!(c.validate().is_err());
        // gd refuses minibatches, sgd refuses Full.
        let mut c = OptimizerConfig::new(0.1, 5);
        c.batch = BatchSize::Size(2);
        assert!(gd_run(&quad(), array![0.0, 0.0], &c, None).is_err());
        let c = OptimizerConfig::new(0.1, 5);
        assert!(sgd_run(&quad(), array![0.0, 0.0], &c, None).is_err());
    }

    #[test]
    fn wrong_start_length_is_rejected() {
        let cfg = OptimizerConfig::new(0.1, 5);
        assert!(gd_run(&quad(), array![0.0], &cfg, None).is_err());
    }

    #[test]
    fn sgd_full_batch_epoch_equals_gd_step() {
        // With batch = n, the quadratic ignores indices, so one epoch must
        // reproduce one gd update bit for bit.
        let mut cfg = OptimizerConfig::new(0.25, 3);
        cfg.batch = BatchSize::Size(10);
        let sgd = sgd_run(&quad(), array![2.0, 2.0], &cfg, None).unwrap();
        let gd = gd_run(&quad(), array![2.0, 2.0], &OptimizerConfig::new(0.25, 3), None).unwrap();
        assert_eq!(sgd.params, gd.params);
    }

    #[test]
    fn sgd_is_deterministic_per_seed() {
        let mut cfg = OptimizerConfig::new(0.1, 7);
        cfg.batch = BatchSize::Size(3);
        cfg.seed = 99;
        let a = sgd_run(&quad(), array![0.0, 0.0], &cfg, None).unwrap();
        let b = sgd_run(&quad(), array![0.0, 0.0], &cfg, None).unwrap();
        assert_eq!(a.params, b.params);
        assert!(sgd_run(
            &quad(),
            array![0.0, 0.0],
            &OptimizerConfig {
                batch: BatchSize::Size(11),
                ..cfg
            },
            None
        )
        .is_err());
    }

    #[test]
    fn normalized_trace_maps_to_unit_scale() {
        let trace = TrainTrace {
            records: [10.0, 7.0, 4.0, 4.0]
                .iter()
                .enumerate()
                .map(|(i, &loss)| TraceRecord {
                    iteration: i as u64,
                    loss,
                    train_acc: None,
                    test_acc: None,
                    grad_norm: 0.0,
                    seconds: 0.0,
                })
                .collect(),
        };
        let norm = normalized_trace(&trace).unwrap();
        let losses: Vec<f64> = norm.records.iter().map(|r| r.loss).collect();
        assert_eq!(losses, vec![1.0, 0.5, 0.0, 0.0]);
        assert_eq!(first_iteration_below(&norm, 0.6), Some(1));
        assert_eq!(first_iteration_below(&norm, 1e-9), Some(2));
        // Strict comparison: nothing lies below zero.
        assert_eq!(first_iteration_below(&norm, 0.0), None);

        // Flat trace: 1 then zeros, by convention.
        let flat = TrainTrace {
            records: (0..3)
                .map(|i| TraceRecord {
                    iteration: i,
                    loss: 2.0,
                    train_acc: None,
                    test_acc: None,
                    grad_norm: 0.0,
                    seconds: 0.0,
                })
                .collect(),
        };
        let norm = normalized_trace(&flat).unwrap();
        let losses: Vec<f64> = norm.records.iter().map(|r| r.loss).collect();
        assert_eq!(losses, vec![1.0, 0.0, 0.0]);
        assert!(normalized_trace(&TrainTrace::default()).is_err());
    }

    #[test]
    fn trace_csv_layout() {
        let trace = TrainTrace {
            records: vec![TraceRecord {
                iteration: 0,
                loss: 0.5,
                train_acc: Some(0.9),
                test_acc: None,
                grad_norm: 1.25,
                seconds: 0.001,
            }],
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "iter,loss,train_acc,test_acc,grad_norm,seconds\n0,0.5,0.9,,1.25,0.001\n"
        );
        // JSON keeps the same field names, null for missing accuracy.
        let json = serde_json::to_string(&trace.records[0]).unwrap();
        assert!(json.contains("\"iter\":0"));
        assert!(json.contains("\"test_acc\":null"));
    }
}
