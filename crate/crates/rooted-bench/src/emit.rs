//! Result tables shared by every command: a flat per-run CSV plus an
//! aggregated summary. Formatting goes through `Display` so a rerun of
//! the same binary reproduces files byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use rooted_loss::loss::LossSpec;
use rooted_loss::optim::RunStatus;

pub const RESULTS_HEADER: &str =
    "dataset,model,loss,k,m,lambda,fold,seed,test_acc,iters_to_threshold,wall_seconds,status";

/// One benchmark run (one fold, one seed, one configuration).
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub dataset: String,
    pub model: String,
    pub loss: String,
    pub k: Option<f64>,
    pub m: Option<f64>,
    pub lambda: f64,
    pub fold: Option<usize>,
    pub seed: u64,
    pub test_acc: Option<f64>,
    pub iters_to_threshold: Option<u64>,
    pub wall_seconds: f64,
    pub status: String,
}

pub fn status_string(status: &RunStatus) -> String {
    match status {
        RunStatus::Completed => "completed".into(),
        RunStatus::Diverged { iteration } => format!("diverged@{iteration}"),
    }
}

/// Loss descriptor split into the loss/k/m columns.
pub fn loss_columns(spec: &LossSpec) -> (String, Option<f64>, Option<f64>) {
    match spec {
        LossSpec::Logistic | LossSpec::CrossEntropy => (spec.name().into(), None, None),
        LossSpec::Focal { gamma } => (format!("focal-g{gamma}"), None, None),
        LossSpec::Rlo { k, m } | LossSpec::RootedCe { k, m } => {
            (spec.name().into(), Some(*k), Some(*m))
        }
    }
}

/// Compact tag for file names, e.g. "rlo-k3" or "logistic".
pub fn loss_tag(spec: &LossSpec) -> String {
    match spec {
        LossSpec::Logistic | LossSpec::CrossEntropy => spec.name().into(),
        LossSpec::Focal { gamma } => format!("focal-g{gamma}"),
        LossSpec::Rlo { k, .. } | LossSpec::RootedCe { k, .. } => {
            format!("{}-k{k}", spec.name())
        }
    }
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut text = String::from(RESULTS_HEADER);
    text.push('\n');
    for r in rows {
        writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.dataset,
            r.model,
            r.loss,
            opt(&r.k),
            opt(&r.m),
            r.lambda,
            opt(&r.fold),
            r.seed,
            opt(&r.test_acc),
            opt(&r.iters_to_threshold),
            r.wall_seconds,
            r.status
        )
        .expect("string write");
    }
    text
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    std::fs::write(path, results_csv(rows))
        .with_context(|| format!("writing {}", path.display()))
}

/// Aggregate of all rows sharing (dataset, model, loss, k).
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub dataset: String,
    pub model: String,
    pub loss: String,
    pub k: Option<f64>,
    pub mean_test_acc: f64,
    pub std_test_acc: f64,
    pub runs: usize,
    /// Among this dataset's groups, is the mean accuracy in the top 3?
    pub top3: bool,
}

/// Groups rows carrying a test accuracy, in first-appearance order.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<(String, String, String, Option<f64>, Vec<f64>)> = Vec::new();
    for r in rows {
        let Some(acc) = r.test_acc else { continue };
        let key = (&r.dataset, &r.model, &r.loss, r.k);
        match groups
            .iter_mut()
            .find(|g| (&g.0, &g.1, &g.2, g.3) == key)
        {
            Some(g) => g.4.push(acc),
            None => groups.push((
                r.dataset.clone(),
                r.model.clone(),
                r.loss.clone(),
                r.k,
                vec![acc],
            )),
        }
    }
    let mut out: Vec<SummaryRow> = groups
        .into_iter()
        .map(|(dataset, model, loss, k, accs)| {
            let n = accs.len() as f64;
            let mean = accs.iter().sum::<f64>() / n;
            let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
            SummaryRow {
                dataset,
                model,
                loss,
                k,
                mean_test_acc: mean,
                std_test_acc: var.sqrt(),
                runs: accs.len(),
                top3: false,
            }
        })
        .collect();
    let datasets: Vec<String> = {
        let mut seen = Vec::new();
        for s in &out {
            if !seen.contains(&s.dataset) {
                seen.push(s.dataset.clone());
            }
        }
        seen
    };
    for d in datasets {
        let mut idx: Vec<usize> = (0..out.len()).filter(|&i| out[i].dataset == d).collect();
        idx.sort_by(|&a, &b| {
            out[b]
                .mean_test_acc
                .partial_cmp(&out[a].mean_test_acc)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        for &i in idx.iter().take(3) {
            out[i].top3 = true;
        }
    }
    out
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut text = String::from("dataset,model,loss,k,mean_test_acc,std_test_acc,runs,top3\n");
    for r in rows {
        writeln!(
            text,
            "{},{},{},{},{},{},{},{}",
            r.dataset,
            r.model,
            r.loss,
            opt(&r.k),
            r.mean_test_acc,
            r.std_test_acc,
            r.runs,
            u8::from(r.top3)
        )
        .expect("string write");
    }
    text
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    std::fs::write(path, summary_csv(rows)).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(dataset: &str, loss: &str, k: Option<f64>, fold: usize, acc: f64) -> ResultRow {
        ResultRow {
            dataset: dataset.into(),
            model: "linear".into(),
            loss: loss.into(),
            k,
            m: k,
            lambda: 0.0,
            fold: Some(fold),
            seed: 7,
            test_acc: Some(acc),
            iters_to_threshold: None,
            wall_seconds: 0.25,
            status: "completed".into(),
        }
    }

    #[test]
    fn results_layout_and_empty_fields() {
        let mut r = row("iono", "rlo", Some(3.0), 0, 0.9);
        r.iters_to_threshold = Some(42);
        let text = results_csv(&[r]);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(RESULTS_HEADER));
        assert_eq!(
            lines.next(),
            Some("iono,linear,rlo,3,3,0,0,7,0.9,42,0.25,completed")
        );

        let bare = ResultRow {
            dataset: "spiral".into(),
            model: "generator".into(),
            loss: String::new(),
            k: None,
            m: None,
            lambda: 0.0,
            fold: None,
            seed: 777,
            test_acc: None,
            iters_to_threshold: None,
            wall_seconds: 0.01,
            status: "completed".into(),
        };
        let text = results_csv(&[bare]);
        assert!(text.ends_with("spiral,generator,,,,0,,777,,,0.01,completed\n"));
    }

    #[test]
    fn summary_groups_and_top3() {
        let mut rows = Vec::new();
        for (li, loss_k) in [(0, None), (1, Some(3.0)), (2, Some(4.0)), (3, Some(5.0))] {
            for fold in 0..2 {
                let acc = 0.8 + 0.02 * li as f64 + 0.01 * fold as f64;
                let name = if loss_k.is_some() { "rlo" } else { "logistic" };
                rows.push(row("iono", name, loss_k, fold, acc));
            }
        }
        let summary = summarize(&rows);
        assert_eq!(summary.len(), 4);
        // Means ascend with li, so the last three groups win top-3.
        assert_eq!(
            summary.iter().map(|s| s.top3).collect::<Vec<_>>(),
            vec![false, true, true, true]
        );
        assert!((summary[0].mean_test_acc - 0.805).abs() < 1e-12);
        assert!((summary[0].std_test_acc - 0.005).abs() < 1e-12);
        assert_eq!(summary[0].runs, 2);

        let text = summary_csv(&summary);
        assert!(text.starts_with("dataset,model,loss,k,mean_test_acc,std_test_acc,runs,top3\n"));
        assert!(text.contains("iono,linear,logistic,,0.805,0.005"));
    }

    #[test]
    fn loss_column_split() {
        let (name, k, m) = loss_columns(&LossSpec::rlo(3.0).unwrap());
        assert_eq!((name.as_str(), k, m), ("rlo", Some(3.0), Some(3.0)));
        let (name, k, _) = loss_columns(&LossSpec::Logistic);
        assert_eq!((name.as_str(), k), ("logistic", None));
        assert_eq!(loss_tag(&LossSpec::rlo(3.0).unwrap()), "rlo-k3");
        assert_eq!(loss_tag(&LossSpec::focal(2.0).unwrap()), "focal-g2");
    }
}
