//! A toy adversarial pair trained on the rooted two-player value
//!
//! `V_k = E_real[ k g(x)^(1/k) ] + E_fake[ k (1 - g(G(z)))^(1/k) ]`,
//!
//! where `g` is the discriminator's sigmoid output and `G` the generator.
//! The discriminator ascends `V_k`, the generator descends it. As `k`
//! grows, `V_k - 2k` approaches the familiar log-form value at `g = 1/2`
//! (`2 log(1/2)`), so the rooted value is a bounded-below reshaping of the
//! usual saturating objective.
//!
//! Discriminator outputs are clamped to `[clamp, 1 - clamp]` before the
//! root is taken; inside the clamped region the gradient is exactly zero
//! (the clamp is a hard guard, not a soft one). Everything is driven by a
//! single ChaCha8 stream per run, so a (config, target) pair reproduces
//! bit for bit.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::loss::sigmoid;
use crate::models::{
    init_params_with_rng, mlp_backward, mlp_forward, mlp_forward_cached, InitScheme, MlpParams,
    MlpShape,
};
use crate::numeric::pairwise_sum;
use crate::optim::RunStatus;

/// Data distribution the generator tries to match.
#[derive(Debug, Clone)]
pub enum GanTarget {
    /// Axis-aligned Gaussian: independent coordinates.
    Gaussian { mean: Array1<f64>, std: Array1<f64> },
    /// Two-component mixture of axis-aligned Gaussians;
    /// `weight` is the probability of component `a`.
    Mixture {
        weight: f64,
        mean_a: Array1<f64>,
        std_a: Array1<f64>,
        mean_b: Array1<f64>,
        std_b: Array1<f64>,
    },
}

impl GanTarget {
    pub fn gaussian_1d(mean: f64, std: f64) -> Result<Self> {
        let t = GanTarget::Gaussian {
            mean: ndarray::array![mean],
            std: ndarray::array![std],
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |mean: &Array1<f64>, std: &Array1<f64>| -> Result<()> {
            if mean.is_empty() || mean.len() != std.len() {
                return Err(Error::DimensionMismatch(format!(
                    "target mean length {} vs std length {}",
                    mean.len(),
                    std.len()
                )));
            }
            if mean.iter().chain(std.iter()).any(|v| !v.is_finite())
                || std.iter().any(|&s| s <= 0.0)
            {
                return Err(Error::InvalidParameter(
                    "target moments must be finite with positive std".into(),
                ));
            }
            Ok(())
        };
        match self {
            GanTarget::Gaussian { mean, std } => check(mean, std),
            GanTarget::Mixture {
                weight,
                mean_a,
                std_a,
                mean_b,
                std_b,
            } => {
                if !(weight.is_finite() && 0.0 < *weight && *weight < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "mixture weight must lie strictly in (0, 1), got {weight}"
                    )));
                }
                check(mean_a, std_a)?;
                check(mean_b, std_b)?;
                if mean_a.len() != mean_b.len() {
                    return Err(Error::DimensionMismatch(
                        "mixture components disagree on dimension".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            GanTarget::Gaussian { mean, .. } => mean.len(),
            GanTarget::Mixture { mean_a, .. } => mean_a.len(),
        }
    }

    /// Draws `n` rows. Each row consumes a fixed number of RNG values, so
    /// sampling order is reproducible.
    pub fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        let d = self.dim();
        let mut out = Array2::zeros((n, d));
        for i in 0..n {
            match self {
                GanTarget::Gaussian { mean, std } => {
                    for j in 0..d {
                        let g: f64 = rng.sample(StandardNormal);
                        out[[i, j]] = mean[j] + std[j] * g;
                    }
                }
                GanTarget::Mixture {
                    weight,
                    mean_a,
                    std_a,
                    mean_b,
                    std_b,
                } => {
                    let pick_a = rng.random::<f64>() < *weight;
                    let (mean, std) = if pick_a { (mean_a, std_a) } else { (mean_b, std_b) };
                    for j in 0..d {
                        let g: f64 = rng.sample(StandardNormal);
                        out[[i, j]] = mean[j] + std[j] * g;
                    }
                }
            }
        }
        out
    }

    /// Exact mean vector and covariance matrix of the target.
    pub fn moments(&self) -> (Array1<f64>, Array2<f64>) {
        match self {
            GanTarget::Gaussian { mean, std } => {
                let d = mean.len();
                let mut cov = Array2::zeros((d, d));
                for j in 0..d {
                    cov[[j, j]] = std[j] * std[j];
                }
                (mean.clone(), cov)
            }
            GanTarget::Mixture {
                weight,
                mean_a,
                std_a,
                mean_b,
                std_b,
            } => {
                let w = *weight;
                let d = mean_a.len();
                let mean = mean_a * w + mean_b * (1.0 - w);
                // E[x x^T] = sum_c w_c (Sigma_c + mu_c mu_c^T), then subtract
                // mu mu^T.
                let mut cov = Array2::zeros((d, d));
                for i in 0..d {
                    for j in 0..d {
                        let mut second = w * mean_a[i] * mean_a[j]
                            + (1.0 - w) * mean_b[i] * mean_b[j];
                        if i == j {
                            second += w * std_a[i] * std_a[i] + (1.0 - w) * std_b[i] * std_b[i];
                        }
                        cov[[i, j]] = second - mean[i] * mean[j];
                    }
                }
                (mean, cov)
            }
        }
    }
}

/// Hyperparameters of the adversarial pair and its training loop.
#[derive(Debug, Clone)]
pub struct GanConfig {
    /// Root of the value; must exceed 1.
    pub k: f64,
    pub latent_dim: usize,
    /// Hidden widths of the generator (empty = affine generator).
    pub gen_hidden: Vec<usize>,
    /// Hidden widths of the discriminator.
    pub disc_hidden: Vec<usize>,
    pub eta_disc: f64,
    pub eta_gen: f64,
    /// Discriminator ascent steps per round.
    pub disc_steps: u64,
    /// Generator descent steps per round.
    pub gen_steps: u64,
    pub rounds: u64,
    pub batch: usize,
    /// Size of the held-out evaluation batches drawn once per run.
    pub eval_batch: usize,
    pub seed: u64,
    pub record_every: u64,
    /// Sigmoid outputs are clamped to [clamp, 1 - clamp].
    pub clamp: f64,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            k: 2.0,
            latent_dim: 1,
            gen_hidden: vec![],
            disc_hidden: vec![8],
            eta_disc: 0.05,
            eta_gen: 0.05,
            disc_steps: 1,
            gen_steps: 1,
            rounds: 2000,
            batch: 32,
            eval_batch: 256,
            seed: 0,
            record_every: 10,
            clamp: 1e-7,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "root k must be finite and > 1, got {}",
                self.k
            )));
        }
        if self.latent_dim == 0 {
            return Err(Error::InvalidParameter("latent dimension must be positive".into()));
        }
        for (name, eta) in [("eta_disc", self.eta_disc), ("eta_gen", self.eta_gen)] {
            if !(eta.is_finite() && eta > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and > 0, got {eta}"
                )));
            }
        }
        if self.batch == 0 || self.eval_batch == 0 {
            return Err(Error::InvalidParameter("batch sizes must be positive".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be at least 1".into()));
        }
        if !(self.clamp.is_finite() && 0.0 < self.clamp && self.clamp < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "clamp must lie strictly in (0, 0.5), got {}",
                self.clamp
            )));
        }
        Ok(())
    }

    fn gen_shape(&self, data_dim: usize) -> Result<MlpShape> {
        MlpShape::new(self.latent_dim, self.gen_hidden.clone(), data_dim)
    }

    fn disc_shape(&self, data_dim: usize) -> Result<MlpShape> {
        MlpShape::new(data_dim, self.disc_hidden.clone(), 1)
    }
}

/// Generator and discriminator parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GanState {
    pub gen: MlpParams,
    pub disc: MlpParams,
}

/// Seeded init: generator first, discriminator second, from one stream.
pub fn init_gan(cfg: &GanConfig, data_dim: usize) -> Result<GanState> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(init_state(cfg, data_dim, &mut rng)?)
}

fn init_state(cfg: &GanConfig, data_dim: usize, rng: &mut ChaCha8Rng) -> Result<GanState> {
    let gen = init_params_with_rng(&cfg.gen_shape(data_dim)?, InitScheme::UniformScaled, rng);
    let disc = init_params_with_rng(&cfg.disc_shape(data_dim)?, InitScheme::UniformScaled, rng);
    Ok(GanState { gen, disc })
}

/// Clamped sigmoid outputs of the discriminator on a batch.
pub fn discriminator_probs(disc: &MlpParams, x: &Array2<f64>, clamp: f64) -> Array1<f64> {
    let logits = mlp_forward(disc, x);
    logits
        .column(0)
        .mapv(|o| sigmoid(o).clamp(clamp, 1.0 - clamp))
}

/// The rooted value on explicit batches.
pub fn gan_value(
    gen: &MlpParams,
    disc: &MlpParams,
    k: f64,
    clamp: f64,
    real: &Array2<f64>,
    latent: &Array2<f64>,
) -> f64 {
    let fake = mlp_forward(gen, latent);
    let g_real = discriminator_probs(disc, real, clamp);
    let g_fake = discriminator_probs(disc, &fake, clamp);
    let real_terms: Vec<f64> = g_real.iter().map(|&g| k * g.powf(1.0 / k)).collect();
    let fake_terms: Vec<f64> = g_fake.iter().map(|&g| k * (1.0 - g).powf(1.0 / k)).collect();
    pairwise_sum(&real_terms) / real_terms.len() as f64
        + pairwise_sum(&fake_terms) / fake_terms.len() as f64
}

struct PlayerGrads {
    disc: MlpParams,
    gen: MlpParams,
}

/// Gradients of the value for both players on the given batches.
///
/// The chain rule runs through the clamped sigmoid: where the raw sigmoid
/// falls outside [clamp, 1 - clamp] the factor is zero, so saturated
/// points contribute value but no gradient.
fn gan_grads(
    gen: &MlpParams,
    disc: &MlpParams,
    k: f64,
    clamp: f64,
    real: &Array2<f64>,
    latent: &Array2<f64>,
) -> PlayerGrads {
    let gen_cache = mlp_forward_cached(gen, latent);
    let fake = gen_cache.activations.last().expect("gen has layers").clone();
    let real_cache = mlp_forward_cached(disc, real);
    let fake_cache = mlp_forward_cached(disc, &fake);
    let n_real = real.nrows() as f64;
    let n_fake = fake.nrows() as f64;

    // dV/d(logit) for one real row: g^(1/k - 1) * sigmoid'(o) / n, zero
    // inside the clamp; fake rows carry -(1 - g)^(1/k - 1) instead.
    let mut dlog_real = Array2::zeros((real.nrows(), 1));
    for (i, &o) in real_cache
        .activations
        .last()
        .expect("disc has layers")
        .column(0)
        .iter()
        .enumerate()
    {
        let raw = sigmoid(o);
        if raw > clamp && raw < 1.0 - clamp {
            dlog_real[[i, 0]] = raw.powf(1.0 / k - 1.0) * raw * (1.0 - raw) / n_real;
        }
    }
    let mut dlog_fake = Array2::zeros((fake.nrows(), 1));
    for (i, &o) in fake_cache
        .activations
        .last()
        .expect("disc has layers")
        .column(0)
        .iter()
        .enumerate()
    {
        let raw = sigmoid(o);
        if raw > clamp && raw < 1.0 - clamp {
            dlog_fake[[i, 0]] = -(1.0 - raw).powf(1.0 / k - 1.0) * raw * (1.0 - raw) / n_fake;
        }
    }

    let (disc_grads_real, _) = mlp_backward(disc, &real_cache, &dlog_real);
    let (disc_grads_fake, dfake) = mlp_backward(disc, &fake_cache, &dlog_fake);
    let mut disc_grads = disc_grads_real;
    add_assign(&mut disc_grads, &disc_grads_fake, 1.0);
    let (gen_grads, _) = mlp_backward(gen, &gen_cache, &dfake);

    PlayerGrads {
        disc: disc_grads,
        gen: gen_grads,
    }
}

fn add_assign(target: &mut MlpParams, other: &MlpParams, scale: f64) {
    for (w, o) in target.weights.iter_mut().zip(&other.weights) {
        w.zip_mut_with(o, |a, &b| *a += scale * b);
    }
    for (b, o) in target.biases.iter_mut().zip(&other.biases) {
        b.zip_mut_with(o, |a, &v| *a += scale * v);
    }
}

fn params_finite(p: &MlpParams) -> bool {
    p.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
        && p.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
}

fn standard_normal_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

/// One per-record snapshot of training, evaluated on the held-out batches.
#[derive(Debug, Clone, Serialize)]
pub struct GanRoundRecord {
    pub round: u64,
    pub value: f64,
    /// Fraction of held-out real rows with g > 1/2.
    pub disc_acc_real: f64,
    /// Fraction of held-out fake rows with g < 1/2.
    pub disc_acc_fake: f64,
    pub fake_mean: Vec<f64>,
    /// Population covariance of the fake batch, row-major.
    pub fake_cov: Vec<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GanTrace {
    pub data_dim: usize,
    pub records: Vec<GanRoundRecord>,
}

impl GanTrace {
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        let d = self.data_dim;
        write!(out, "round,value,disc_acc_real,disc_acc_fake")?;
        for j in 0..d {
            write!(out, ",fake_mean_{j}")?;
        }
        for i in 0..d {
            for j in 0..d {
                write!(out, ",fake_cov_{i}_{j}")?;
            }
        }
        writeln!(out, ",seconds")?;
        for r in &self.records {
            write!(
                out,
                "{},{},{},{}",
                r.round, r.value, r.disc_acc_real, r.disc_acc_fake
            )?;
            for v in &r.fake_mean {
                write!(out, ",{v}")?;
            }
            for v in &r.fake_cov {
                write!(out, ",{v}")?;
            }
            writeln!(out, ",{}", r.seconds)?;
        }
        Ok(())
    }
}

/// A finished training run.
#[derive(Debug, Clone)]
pub struct GanRun {
    pub state: GanState,
    pub trace: GanTrace,
    pub status: RunStatus,
}

/// Alternating ascent/descent training against a target distribution.
///
/// Per round: `disc_steps` discriminator ascent steps, then `gen_steps`
/// generator descent steps, each on fresh batches. Records land before
/// rounds at `record_every` multiples plus once after the last round, and
/// are always evaluated on held-out batches drawn once up front. If any
/// parameter turns non-finite the round is rolled back and the run stops
/// with a `Diverged` status.
pub fn alternate_train(cfg: &GanConfig, target: &GanTarget) -> Result<GanRun> {
    cfg.validate()?;
    target.validate()?;
    let data_dim = target.dim();
    let started = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = init_state(cfg, data_dim, &mut rng)?;
    let real_eval = target.sample(cfg.eval_batch, &mut rng);
    let latent_eval = standard_normal_matrix(cfg.eval_batch, cfg.latent_dim, &mut rng);

    let mut trace = GanTrace {
        data_dim,
        records: Vec::new(),
    };
    let mut status = RunStatus::Completed;

    let record = |state: &GanState, round: u64, trace: &mut GanTrace| {
        let value = gan_value(&state.gen, &state.disc, cfg.k, cfg.clamp, &real_eval, &latent_eval);
        let g_real = discriminator_probs(&state.disc, &real_eval, cfg.clamp);
        let fake = mlp_forward(&state.gen, &latent_eval);
        let g_fake = discriminator_probs(&state.disc, &fake, cfg.clamp);
        let acc_real = g_real.iter().filter(|&&g| g > 0.5).count() as f64 / g_real.len() as f64;
        let acc_fake = g_fake.iter().filter(|&&g| g < 0.5).count() as f64 / g_fake.len() as f64;
        let mean = fake.sum_axis(Axis(0)) / fake.nrows() as f64;
        let mut cov = vec![0.0; data_dim * data_dim];
        for row in fake.rows() {
            for i in 0..data_dim {
                for j in 0..data_dim {
                    cov[i * data_dim + j] += (row[i] - mean[i]) * (row[j] - mean[j]);
                }
            }
        }
        for v in &mut cov {
            *v /= fake.nrows() as f64;
        }
        trace.records.push(GanRoundRecord {
            round,
            value,
            disc_acc_real: acc_real,
            disc_acc_fake: acc_fake,
            fake_mean: mean.to_vec(),
            fake_cov: cov,
            seconds: started.elapsed().as_secs_f64(),
        });
    };

    for t in 0..cfg.rounds {
        if t % cfg.record_every == 0 {
            record(&state, t, &mut trace);
        }
        let snapshot = state.clone();
        for _ in 0..cfg.disc_steps {
            let real = target.sample(cfg.batch, &mut rng);
            let latent = standard_normal_matrix(cfg.batch, cfg.latent_dim, &mut rng);
            let grads = gan_grads(&state.gen, &state.disc, cfg.k, cfg.clamp, &real, &latent);
            add_assign(&mut state.disc, &grads.disc, cfg.eta_disc);
        }
        for _ in 0..cfg.gen_steps {
            let real = target.sample(cfg.batch, &mut rng);
            let latent = standard_normal_matrix(cfg.batch, cfg.latent_dim, &mut rng);
            let grads = gan_grads(&state.gen, &state.disc, cfg.k, cfg.clamp, &real, &latent);
            add_assign(&mut state.gen, &grads.gen, -cfg.eta_gen);
        }
        if !(params_finite(&state.gen) && params_finite(&state.disc)) {
            state = snapshot;
            status = RunStatus::Diverged { iteration: t };
            break;
        }
    }
    if !status.diverged() {
        record(&state, cfg.rounds, &mut trace);
    }
    Ok(GanRun { state, trace, status })
}

/// Trailing-window summary of a run against the target's exact moments.
#[derive(Debug, Clone, Serialize)]
pub struct GanReport {
    /// Number of trailing trace records averaged.
    pub window: usize,
    pub value_mean: f64,
    pub disc_acc_real_mean: f64,
    pub disc_acc_fake_mean: f64,
    /// Combined held-out accuracy, (real + fake) / 2.
    pub disc_acc_mean: f64,
    pub fake_mean: Vec<f64>,
    pub fake_cov: Vec<f64>,
    pub target_mean: Vec<f64>,
    pub target_cov: Vec<f64>,
    /// Largest absolute gap between fake and target mean coordinates.
    pub mean_abs_gap: f64,
    /// Largest absolute gap between covariance entries.
    pub cov_abs_gap: f64,
}

/// Averages the trailing `window` records of a trace and compares the
/// generator's sample moments to the target's exact ones.
pub fn gan_diagnostics(trace: &GanTrace, target: &GanTarget, window: usize) -> Result<GanReport> {
    if trace.records.is_empty() {
        return Err(Error::Empty("trace has no records"));
    }
    if window == 0 {
        return Err(Error::InvalidParameter("window must be at least 1".into()));
    }
    let d = trace.data_dim;
    let take = window.min(trace.records.len());
    let tail = &trace.records[trace.records.len() - take..];
    let mean_of = |extract: &dyn Fn(&GanRoundRecord) -> f64| {
        let vals: Vec<f64> = tail.iter().map(extract).collect();
        pairwise_sum(&vals) / vals.len() as f64
    };
    let value_mean = mean_of(&|r| r.value);
    let acc_real = mean_of(&|r| r.disc_acc_real);
    let acc_fake = mean_of(&|r| r.disc_acc_fake);
    let mut fake_mean = vec![0.0; d];
    let mut fake_cov = vec![0.0; d * d];
    for r in tail {
        for (a, b) in fake_mean.iter_mut().zip(&r.fake_mean) {
            *a += b / take as f64;
        }
        for (a, b) in fake_cov.iter_mut().zip(&r.fake_cov) {
            *a += b / take as f64;
        }
    }
    let (tmean, tcov) = target.moments();
    let mean_abs_gap = fake_mean
        .iter()
        .zip(tmean.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let cov_abs_gap = fake_cov
        .iter()
        .zip(tcov.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(GanReport {
        window: take,
        value_mean,
        disc_acc_real_mean: acc_real,
        disc_acc_fake_mean: acc_fake,
        disc_acc_mean: 0.5 * (acc_real + acc_fake),
        fake_mean,
        fake_cov,
        target_mean: tmean.to_vec(),
        target_cov: Array1::from_iter(tcov.into_iter()).to_vec(),
        mean_abs_gap,
        cov_abs_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::finite_diff_grad;
    use crate::numeric::max_abs_diff;
    use ndarray::array;

    fn tiny_cfg() -> GanConfig {
        GanConfig {
            rounds: 40,
            eval_batch: 64,
            record_every: 5,
            disc_hidden: vec![4],
            ..GanConfig::default()
        }
    }

    #[test]
    fn value_at_indifferent_discriminator() {
        // Zero discriminator weights give g = 1/2 everywhere, so
        // V = 2k * (1/2)^(1/k); at k = 2 that is 2 * sqrt(2).
        let cfg = tiny_cfg();
        let mut state = init_gan(&cfg, 1).unwrap();
        for w in &mut state.disc.weights {
            w.fill(0.0);
        }
        for b in &mut state.disc.biases {
            b.fill(0.0);
        }
        let real = array![[0.1], [2.0], [-3.0]];
        let latent = array![[0.5], [-0.5]];
        let v = gan_value(&state.gen, &state.disc, 2.0, 1e-7, &real, &latent);
        assert!((v - 2.828427124746190).abs() < 1e-12);

        // As k grows, V - 2k approaches 2 log(1/2) from above.
        let mut last_gap = f64::INFINITY;
        for &k in &[10.0, 100.0, 1000.0] {
            let v = gan_value(&state.gen, &state.disc, k, 1e-7, &real, &latent);
            let gap = (v - 2.0 * k) - 2.0 * 0.5f64.ln();
            assert!(gap >= 0.0);
            assert!(gap <= 2.0 * 0.5f64.ln().powi(2) / k + 1e-12);
            assert!(gap < last_gap);
            last_gap = gap;
        }
    }

    #[test]
    fn mixture_moments_hand_check() {
        let t = GanTarget::Mixture {
            weight: 0.5,
            mean_a: array![-1.0],
            std_a: array![0.5],
            mean_b: array![1.0],
            std_b: array![0.5],
        };
        t.validate().unwrap();
        let (mean, cov) = t.moments();
        assert!((mean[0] - 0.0).abs() < 1e-15);
        assert!((cov[[0, 0]] - 1.25).abs() < 1e-15);
    }

    #[test]
    fn target_validation() {
        assert!(GanTarget::gaussian_1d(3.0, 0.0).is_err());
        assert!(GanTarget::gaussian_1d(f64::NAN, 1.0).is_err());
        let bad = GanTarget::Mixture {
            weight: 1.5,
            mean_a: array![0.0],
            std_a: array![1.0],
            mean_b: array![1.0],
            std_b: array![1.0],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sampling_matches_moments_roughly() {
        let t = GanTarget::gaussian_1d(3.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = t.sample(20000, &mut rng);
        let mean = x.column(0).sum() / 20000.0;
        assert!((mean - 3.0).abs() < 0.02);
    }

    #[test]
    fn both_player_gradients_match_finite_differences() {
        let cfg = GanConfig {
            disc_hidden: vec![3],
            gen_hidden: vec![2],
            ..tiny_cfg()
        };
        let state = init_gan(&cfg, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let real = GanTarget::gaussian_1d(1.0, 0.7)
            .unwrap()
            .sample(6, &mut rng);
        let latent = standard_normal_matrix(5, 1, &mut rng);
        let grads = gan_grads(&state.gen, &state.disc, 2.5, 1e-7, &real, &latent);

        let disc_flat = state.disc.flatten();
        let fd_disc = finite_diff_grad(
            |w| {
                let disc = MlpParams::from_flat(&state.disc.shape, w.view()).unwrap();
                gan_value(&state.gen, &disc, 2.5, 1e-7, &real, &latent)
            },
            &disc_flat,
            1e-6,
        );
        assert!(max_abs_diff(grads.disc.flatten().view(), fd_disc.view()) < 1e-7);

        let gen_flat = state.gen.flatten();
        let fd_gen = finite_diff_grad(
            |w| {
                let gen = MlpParams::from_flat(&state.gen.shape, w.view()).unwrap();
                gan_value(&gen, &state.disc, 2.5, 1e-7, &real, &latent)
            },
            &gen_flat,
            1e-6,
        );
        assert!(max_abs_diff(grads.gen.flatten().view(), fd_gen.view()) < 1e-7);
    }

    #[test]
    fn clamped_points_contribute_no_gradient() {
        let cfg = GanConfig {
            disc_hidden: vec![],
            gen_hidden: vec![],
            ..tiny_cfg()
        };
        let mut state = init_gan(&cfg, 1).unwrap();
        // Saturate the discriminator: huge weight drives every output into
        // the clamp on both batches.
        state.disc.weights[0][[0, 0]] = 1e4;
        state.disc.biases[0][0] = 0.0;
        let real = array![[5.0], [7.0]];
        // Generator output sign: force fakes far positive too.
        state.gen.weights[0][[0, 0]] = 0.0;
        state.gen.biases[0][0] = 6.0;
        let latent = array![[0.3], [-0.4]];
        let grads = gan_grads(&state.gen, &state.disc, 2.0, 1e-7, &real, &latent);
        let v = gan_value(&state.gen, &state.disc, 2.0, 1e-7, &real, &latent);
        assert!(v.is_finite());
        assert!(grads.disc.flatten().iter().all(|&v| v == 0.0));
        assert!(grads.gen.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn disc_ascent_step_increases_value_on_frozen_batch() {
        let cfg = tiny_cfg();
        let mut state = init_gan(&cfg, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let real = GanTarget::gaussian_1d(2.0, 1.0)
            .unwrap()
            .sample(16, &mut rng);
        let latent = standard_normal_matrix(16, 1, &mut rng);
        let before = gan_value(&state.gen, &state.disc, cfg.k, cfg.clamp, &real, &latent);
        let grads = gan_grads(&state.gen, &state.disc, cfg.k, cfg.clamp, &real, &latent);
        add_assign(&mut state.disc, &grads.disc, 0.05);
        let after = gan_value(&state.gen, &state.disc, cfg.k, cfg.clamp, &real, &latent);
        assert!(after > before, "ascent: {before} -> {after}");
    }

    #[test]
    fn training_is_deterministic_and_recorded() {
        let cfg = tiny_cfg();
        let target = GanTarget::gaussian_1d(3.0, 0.5).unwrap();
        let a = alternate_train(&cfg, &target).unwrap();
        let b = alternate_train(&cfg, &target).unwrap();
        assert_eq!(a.state, b.state);
        assert_eq!(a.status, RunStatus::Completed);
        // Records at 0, 5, ..., 35 plus the final round 40.
        let rounds: Vec<u64> = a.trace.records.iter().map(|r| r.round).collect();
        assert_eq!(rounds.first(), Some(&0));
        assert_eq!(rounds.last(), Some(&40));
        assert_eq!(rounds.len(), 9);
        assert!(a.trace.records.iter().all(|r| r.value.is_finite()));

        let mut buf = Vec::new();
        a.trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "round,value,disc_acc_real,disc_acc_fake,fake_mean_0,fake_cov_0_0,seconds\n"
        ));
        assert_eq!(text.lines().count(), 10);
    }

    #[test]
    fn diagnostics_window_and_gaps() {
        let cfg = GanConfig {
            rounds: 400,
            ..tiny_cfg()
        };
        let target = GanTarget::gaussian_1d(3.0, 0.5).unwrap();
        let run = alternate_train(&cfg, &target).unwrap();
        let report = gan_diagnostics(&run.trace, &target, 5).unwrap();
        assert_eq!(report.window, 5);
        assert_eq!(report.target_mean, vec![3.0]);
        assert_eq!(report.target_cov, vec![0.25]);
        assert!(report.mean_abs_gap.is_finite());
        assert!((0.0..=1.0).contains(&report.disc_acc_mean));
        // Window larger than the trace clips.
        let clipped = gan_diagnostics(&run.trace, &target, 10_000).unwrap();
        assert_eq!(clipped.window, run.trace.records.len());
        assert!(gan_diagnostics(&GanTrace::default(), &target, 5).is_err());
    }
}
