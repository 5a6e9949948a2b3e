//! Per-command configuration, loadable from TOML and embedded verbatim in
//! run manifests. Every field has a default, so an empty file (or none)
//! yields the stock benchmark.

use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Loads a TOML config, or the default when no path is given.
pub fn load_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

/// Iteration-budget override for one dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationsFor {
    pub dataset: String,
    pub iterations: u64,
}

/// Root choice used for the per-dataset convergence comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceK {
    pub dataset: String,
    pub k: f64,
}

/// Cross-validated linear benchmark over margin losses.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressConfig {
    /// Known dataset names or CSV paths.
    pub datasets: Vec<String>,
    pub data_dir: String,
    /// Loss families to sweep: "logistic" and/or "rlo" (the latter expands
    /// over `k_grid`).
    pub losses: Vec<String>,
    pub k_grid: Vec<f64>,
    pub folds: usize,
    pub fold_seed: u64,
    pub learning_rate: f64,
    pub iterations: u64,
    pub iterations_for: Vec<IterationsFor>,
    pub l2_lambda: f64,
    /// Minibatch size; full-batch descent when absent.
    pub batch: Option<usize>,
    /// Seed for minibatch shuffling (unused for full batches).
    pub sgd_seed: u64,
    pub standardize: bool,
    pub add_bias: bool,
    pub record_every: u64,
    /// Normalized-loss level defining "converged" for iteration counts.
    pub threshold: f64,
    /// Per-dataset root used in the full-data convergence comparison.
    pub convergence: Vec<ConvergenceK>,
    pub emit_traces: bool,
}

impl Default for RegressConfig {
    fn default() -> Self {
        RegressConfig {
            datasets: ["wine", "ionosphere", "specheart", "madelon"]
                .map(String::from)
                .to_vec(),
            data_dir: "data".into(),
            losses: vec!["logistic".into(), "rlo".into()],
            k_grid: (3..=20).map(|k| k as f64).collect(),
            folds: 5,
            fold_seed: 7,
            learning_rate: 0.01,
            iterations: 200,
            iterations_for: vec![IterationsFor {
                dataset: "specheart".into(),
                iterations: 1000,
            }],
            l2_lambda: 0.0,
            batch: None,
            sgd_seed: 0,
            standardize: true,
            add_bias: false,
            record_every: 1,
            threshold: 0.1,
            convergence: [("wine", 3.0), ("ionosphere", 4.0), ("specheart", 20.0), ("madelon", 6.0)]
                .map(|(d, k)| ConvergenceK {
                    dataset: d.into(),
                    k,
                })
                .to_vec(),
            emit_traces: false,
        }
    }
}

impl RegressConfig {
    pub fn iterations_for(&self, dataset: &str) -> u64 {
        self.iterations_for
            .iter()
            .find(|o| o.dataset == dataset)
            .map_or(self.iterations, |o| o.iterations)
    }

    pub fn convergence_k(&self, dataset: &str) -> Option<f64> {
        self.convergence
            .iter()
            .find(|c| c.dataset == dataset)
            .map(|c| c.k)
    }
}

/// Network depth paired with its iteration budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DepthIters {
    /// Number of affine layers; depth 2 means one hidden layer.
    pub depth: usize,
    pub iterations: u64,
}

/// Fully connected networks on the two-spiral task.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub spiral_n: usize,
    pub spiral_noise: f64,
    pub data_seed: u64,
    pub split_seed: u64,
    pub train_fraction: f64,
    pub hidden: usize,
    pub depths: Vec<DepthIters>,
    /// Softmax losses to compare: "ce", "rooted-ce", "focal".
    pub losses: Vec<String>,
    pub k: f64,
    pub focal_gamma: f64,
    pub learning_rate: f64,
    pub init_seeds: Vec<u64>,
    pub record_every: u64,
    pub emit_grids: bool,
    pub grid_resolution: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            spiral_n: 1500,
            spiral_noise: 0.1,
            data_seed: 777,
            split_seed: 99,
            train_fraction: 0.7,
            hidden: 100,
            depths: vec![
                DepthIters { depth: 2, iterations: 1000 },
                DepthIters { depth: 3, iterations: 100 },
                DepthIters { depth: 4, iterations: 50 },
            ],
            losses: vec!["ce".into(), "rooted-ce".into()],
            k: 3.0,
            focal_gamma: 2.0,
            learning_rate: 0.01,
            init_seeds: vec![1, 2, 3],
            record_every: 10,
            emit_grids: true,
            grid_resolution: 64,
        }
    }
}

/// Curvature diagnostics of a trained linear probe.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub dataset: String,
    pub data_dir: String,
    pub k_values: Vec<f64>,
    pub learning_rate: f64,
    pub iterations: u64,
    pub l2_lambda: f64,
    pub standardize: bool,
    pub add_bias: bool,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        DiagnoseConfig {
            dataset: "ionosphere".into(),
            data_dir: "data".into(),
            k_values: vec![2.0, 3.0, 5.0, 10.0, 20.0],
            learning_rate: 0.01,
            iterations: 200,
            l2_lambda: 0.0,
            standardize: true,
            add_bias: false,
        }
    }
}

/// Adversarial pair replicated over seeds against a 1-D Gaussian.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanToyConfig {
    pub target_mean: f64,
    pub target_std: f64,
    pub seeds: Vec<u64>,
    pub k: f64,
    pub rounds: u64,
    pub batch: usize,
    pub eval_batch: usize,
    pub eta_disc: f64,
    pub eta_gen: f64,
    pub latent_dim: usize,
    pub gen_hidden: Vec<usize>,
    pub disc_hidden: Vec<usize>,
    pub record_every: u64,
    /// Trailing trace records averaged into the report.
    pub window: usize,
}

impl Default for GanToyConfig {
    fn default() -> Self {
        GanToyConfig {
            target_mean: 3.0,
            target_std: 1.0,
            seeds: vec![1, 2, 3],
            k: 2.0,
            rounds: 2000,
            batch: 32,
            eval_batch: 256,
            eta_disc: 0.05,
            eta_gen: 0.05,
            latent_dim: 1,
            gen_hidden: vec![],
            disc_hidden: vec![8],
            record_every: 10,
            window: 10,
        }
    }
}

/// Standalone spiral dataset emission.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpiralConfig {
    pub n: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SpiralConfig {
    fn default() -> Self {
        SpiralConfig {
            n: 1500,
            noise: 0.1,
            seed: 777,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RegressConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: RegressConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.k_grid.len(), 18);
        assert_eq!(back.iterations_for("specheart"), 1000);
        assert_eq!(back.iterations_for("wine"), 200);
        assert_eq!(back.convergence_k("madelon"), Some(6.0));
        assert_eq!(back.convergence_k("nope"), None);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg: MlpConfig = toml::from_str("k = 5.0\ninit_seeds = [9]\n").unwrap();
        assert_eq!(cfg.k, 5.0);
        assert_eq!(cfg.init_seeds, vec![9]);
        assert_eq!(cfg.hidden, 100);
        assert_eq!(cfg.depths.len(), 3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<GanToyConfig>("rounds = 10\nbogus = 1\n").is_err());
    }
}
