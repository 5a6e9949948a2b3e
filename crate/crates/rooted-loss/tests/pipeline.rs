//! End-to-end drills: file to trained model to emitted trace, the same
//! path the benchmark binary walks.

use ndarray::{Array1, Array2};
use rooted_loss::dataset::{
    kfold, load_delimited, make_spiral, one_vs_all, standardize_train_test, train_test_split,
    Dataset, LoadSchema,
};
use rooted_loss::loss::LossSpec;
use rooted_loss::models::{evaluate_margin_model, linear_objective};
use rooted_loss::optim::{
    first_iteration_below, gd_run, normalized_trace, sgd_run, BatchSize, OptimizerConfig,
    RunStatus,
};

#[test]
fn csv_to_trained_margin_models() {
    // {0, 1} labels on disk; the loader maps 1 -> +1 and 0 -> -1.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("blobs.csv");
    let mut rows = String::new();
    use std::fmt::Write as _;
    for i in 0..40 {
        let (cx, label) = if i % 2 == 0 { (2.0, 1) } else { (-2.0, 0) };
        let dx = 0.3 * ((i * 7 % 11) as f64 / 11.0 - 0.5);
        let dy = 0.3 * ((i * 5 % 13) as f64 / 13.0 - 0.5);
        writeln!(rows, "{},{},{label}", cx + dx, 0.5 + dy).unwrap();
    }
    std::fs::write(&path, rows).unwrap();

    let data = load_delimited(&path, &LoadSchema::default()).unwrap();
    assert_eq!(data.n(), 40);
    let (train, test) = train_test_split(&data, 0.75, 11).unwrap();
    let (train, test, _) = standardize_train_test(&train, &test).unwrap();
    let (train, test) = (train.with_bias_column(), test.with_bias_column());

    let cfg = OptimizerConfig::new(0.5, 300);
    for spec in [LossSpec::Logistic, LossSpec::rlo(4.0).unwrap()] {
        let obj = linear_objective(&train, &spec, 0.0).unwrap();
        let run = gd_run(&obj, Array1::zeros(train.dim()), &cfg, None).unwrap();
        assert_eq!(run.status, RunStatus::Completed);
        let acc = evaluate_margin_model(run.params.view(), &test).unwrap();
        assert_eq!(acc, 1.0, "{} failed to separate blobs", spec.name());

        let again = gd_run(&obj, Array1::zeros(train.dim()), &cfg, None).unwrap();
        assert_eq!(run.params, again.params);
    }
}

#[test]
fn kfold_one_vs_all_linear_classifier() {
    // Three well-separated blobs, 20 points each.
    let n = 60;
    let centers = [(-3.0, 0.0), (3.0, 0.0), (0.0, 4.0)];
    let mut features = Array2::zeros((n, 2));
    let mut indices = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % 3;
        features[[i, 0]] = centers[c].0 + ((i * 13 % 17) as f64 / 17.0 - 0.5);
        features[[i, 1]] = centers[c].1 + ((i * 11 % 19) as f64 / 19.0 - 0.5);
        indices.push(c);
    }
    let data = Dataset::multiclass(features, 3, indices).unwrap();

    let plan = kfold(n, 4, 7).unwrap();
    let mut accs = Vec::new();
    for fold in &plan.folds {
        let train = data.subset(&fold.train).unwrap();
        let val = data.subset(&fold.validation).unwrap();
        let (train, val, _) = standardize_train_test(&train, &val).unwrap();
        let (train, val) = (train.with_bias_column(), val.with_bias_column());

        let tasks = one_vs_all(&train).unwrap();
        assert_eq!(tasks.len(), 3);
        assert!(tasks[0].name().ends_with("-c0"));
        let mut weights = Vec::new();
        for task in &tasks {
            let obj = linear_objective(task, &LossSpec::rlo(3.0).unwrap(), 0.0).unwrap();
            let run = gd_run(&obj, Array1::zeros(task.dim()), &OptimizerConfig::new(0.5, 200), None)
                .unwrap();
            weights.push(run.params);
        }

        let (_, truth) = val.class_indices().unwrap();
        let mut hits = 0;
        for (i, row) in val.features().rows().into_iter().enumerate() {
            let mut best = (f64::NEG_INFINITY, 0);
            for (c, w) in weights.iter().enumerate() {
                let score = row.dot(w);
                if score > best.0 {
                    best = (score, c);
                }
            }
            if best.1 == truth[i] {
                hits += 1;
            }
        }
        accs.push(hits as f64 / val.n() as f64);
    }
    assert_eq!(accs.len(), 4);
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    assert!(mean > 0.95, "OVA accuracy {mean}");
}

#[test]
fn sgd_trace_reaches_threshold_on_spiral() {
    let data = make_spiral(120, 0.05, 5).unwrap();
    let (train, _, _scaler) = {
        let (tr, te) = train_test_split(&data, 0.8, 5).unwrap();
        let (tr, te, s) = standardize_train_test(&tr, &te).unwrap();
        (tr.with_bias_column(), te.with_bias_column(), s)
    };

    let spec = LossSpec::rlo(2.0).unwrap();
    let obj = linear_objective(&train, &spec, 1e-4).unwrap();
    let mut cfg = OptimizerConfig::new(0.1, 120);
    cfg.batch = BatchSize::Size(16);
    cfg.seed = 3;
    cfg.record_every = 5;
    let run = sgd_run(&obj, Array1::zeros(train.dim()), &cfg, None).unwrap();
    assert_eq!(run.status, RunStatus::Completed);

    let iters: Vec<u64> = run.trace.records.iter().map(|r| r.iteration).collect();
    assert_eq!(iters.first(), Some(&0));
    assert_eq!(iters.last(), Some(&120));
    // A linear model cannot solve the spiral, but the normalized loss
    // still shrinks from its starting point.
    let norm = normalized_trace(&run.trace).unwrap();
    assert_eq!(norm.records[0].loss, 1.0);
    assert!(first_iteration_below(&norm, 0.5).is_some());

    let mut buf = Vec::new();
    run.trace.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("iter,loss,train_acc,test_acc,grad_norm,seconds\n"));
    assert_eq!(text.lines().count(), run.trace.records.len() + 1);
}
