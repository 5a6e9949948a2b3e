//! Trainable models over the loss families: linear classifiers (margin or
//! softmax) and small fully connected ReLU networks, plus accuracy
//! evaluation and a decision-surface sampler for 2-D problems.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calculus::{ce_logit_grad, focal_logit_grad, mean_gradient, rooted_ce_logit_grad};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::loss::{class_logits, log_softmax, mean_loss, LossSpec};
use crate::numeric::pairwise_sum;
use crate::optim::Objective;

/// A linear model trained directly on a dataset with one loss family.
///
/// For margin losses the parameter vector has length `dim`; for softmax
/// losses it is the row-major flattening of a (classes x dim) weight
/// matrix. `l2_lambda` is carried for reporting; the ridge term itself is
/// applied by the optimizer, not inside `value`/`gradient`.
pub struct LinearObjective<'a> {
    data: &'a Dataset,
    spec: LossSpec,
    pub l2_lambda: f64,
    dim: usize,
}

/// Validates the data/loss pairing and fixes the parameter layout.
///
/// # Errors
/// Margin losses demand binary labels, softmax losses multiclass labels;
/// invalid hyperparameters are rejected up front.
pub fn linear_objective<'a>(
    data: &'a Dataset,
    spec: &LossSpec,
    l2_lambda: f64,
) -> Result<LinearObjective<'a>> {
    spec.validate()?;
    if !(l2_lambda.is_finite() && l2_lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "l2 strength must be finite and >= 0, got {l2_lambda}"
        )));
    }
    let dim = if spec.is_margin_family() {
        data.binary_labels()?;
        data.dim()
    } else {
        let (classes, _) = data.class_indices()?;
        classes * data.dim()
    };
    Ok(LinearObjective {
        data,
        spec: *spec,
        l2_lambda,
        dim,
    })
}

impl LinearObjective<'_> {
    pub fn spec(&self) -> &LossSpec {
        &self.spec
    }
}

impl Objective for LinearObjective<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn num_samples(&self) -> usize {
        self.data.n()
    }

    fn value(&self, w: &Array1<f64>) -> f64 {
        mean_loss(&self.spec, w.view(), self.data).expect("pairing validated at construction")
    }

    fn gradient(&self, w: &Array1<f64>) -> Array1<f64> {
        mean_gradient(&self.spec, w.view(), self.data).expect("pairing validated at construction")
    }

    fn batch_value_gradient(&self, w: &Array1<f64>, idx: &[usize]) -> (f64, Array1<f64>) {
        let subset = self.data.subset(idx).expect("indices from the optimizer");
        let v = mean_loss(&self.spec, w.view(), &subset).expect("same pairing as full data");
        let g = mean_gradient(&self.spec, w.view(), &subset).expect("same pairing as full data");
        (v, g)
    }
}

/// Accuracy of a margin model: predict sign(w.x) with sign(0) = +1.
pub fn evaluate_margin_model(w: ArrayView1<'_, f64>, data: &Dataset) -> Result<f64> {
    let y = data.binary_labels()?;
    if w.len() != data.dim() {
        return Err(Error::DimensionMismatch(format!(
            "weight length {} vs feature dimension {}",
            w.len(),
            data.dim()
        )));
    }
    let scores = data.features().dot(&w);
    let hits: Vec<f64> = scores
        .iter()
        .zip(y.iter())
        .map(|(&s, &yi)| {
            let pred = if s >= 0.0 { 1.0 } else { -1.0 };
            f64::from(pred == yi)
        })
        .collect();
    Ok(pairwise_sum(&hits) / hits.len() as f64)
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(row: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Accuracy of a linear softmax model on multiclass data.
pub fn evaluate_softmax_linear(wmat: &Array2<f64>, data: &Dataset) -> Result<f64> {
    let logits = class_logits(wmat, data)?;
    let (_, indices) = data.class_indices()?;
    let hits: Vec<f64> = logits
        .rows()
        .into_iter()
        .zip(indices.iter())
        .map(|(row, &c)| f64::from(argmax(row) == c))
        .collect();
    Ok(pairwise_sum(&hits) / hits.len() as f64)
}

/// Layer widths of a fully connected ReLU network. `depth` counts affine
/// layers, so `hidden: vec![100]` is the classic 2-layer network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpShape {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
}

impl MlpShape {
    pub fn new(input: usize, hidden: Vec<usize>, output: usize) -> Result<Self> {
        if input == 0 || output == 0 || hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidParameter(
                "all layer widths must be positive".into(),
            ));
        }
        Ok(MlpShape { input, hidden, output })
    }

    /// (fan_in, fan_out) per affine layer, input to output.
    pub fn affine_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut fan_in = self.input;
        for &h in &self.hidden {
            dims.push((fan_in, h));
            fan_in = h;
        }
        dims.push((fan_in, self.output));
        dims
    }

    pub fn depth(&self) -> usize {
        self.hidden.len() + 1
    }

    pub fn num_params(&self) -> usize {
        self.affine_dims()
            .iter()
            .map(|&(fi, fo)| fi * fo + fo)
            .sum()
    }
}

/// Weight initialization. `UniformScaled` draws each weight uniformly from
/// +-sqrt(6 / (fan_in + fan_out)); biases start at zero either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    Zeros,
    UniformScaled,
}

/// Network parameters: weight matrices stored (fan_out x fan_in) plus bias
/// vectors, one pair per affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub shape: MlpShape,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Seeded initialization. Layers are filled in order, each weight matrix
/// in row-major order, so the draw sequence (and therefore the exact
/// network) is fixed by (shape, scheme, seed).
pub fn init_params(shape: &MlpShape, scheme: InitScheme, seed: u64) -> MlpParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_params_with_rng(shape, scheme, &mut rng)
}

pub(crate) fn init_params_with_rng(
    shape: &MlpShape,
    scheme: InitScheme,
    rng: &mut ChaCha8Rng,
) -> MlpParams {
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for (fan_in, fan_out) in shape.affine_dims() {
        let w = match scheme {
            InitScheme::Zeros => Array2::zeros((fan_out, fan_in)),
            InitScheme::UniformScaled => {
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Array2::from_shape_fn((fan_out, fan_in), |_| {
                    bound * (2.0 * rng.random::<f64>() - 1.0)
                })
            }
        };
        weights.push(w);
        biases.push(Array1::zeros(fan_out));
    }
    MlpParams {
        shape: shape.clone(),
        weights,
        biases,
    }
}

impl MlpParams {
    pub fn num_params(&self) -> usize {
        self.shape.num_params()
    }

    /// Row-major weights then bias, layer by layer, as one flat vector.
    pub fn flatten(&self) -> Array1<f64> {
        let mut flat = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            flat.extend(w.iter().copied());
            flat.extend(b.iter().copied());
        }
        Array1::from_vec(flat)
    }

    /// Inverse of [`MlpParams::flatten`].
    pub fn from_flat(shape: &MlpShape, flat: ArrayView1<'_, f64>) -> Result<MlpParams> {
        if flat.len() != shape.num_params() {
            return Err(Error::DimensionMismatch(format!(
                "flat vector length {} vs {} parameters for this shape",
                flat.len(),
                shape.num_params()
            )));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let mut offset = 0;
        for (fan_in, fan_out) in shape.affine_dims() {
            let w_len = fan_in * fan_out;
            let w = Array2::from_shape_vec(
                (fan_out, fan_in),
                flat.slice(ndarray::s![offset..offset + w_len]).to_vec(),
            )
            .expect("length checked");
            offset += w_len;
            let b = flat.slice(ndarray::s![offset..offset + fan_out]).to_owned();
            offset += fan_out;
            weights.push(w);
            biases.push(b);
        }
        Ok(MlpParams {
            shape: shape.clone(),
            weights,
            biases,
        })
    }
}

pub(crate) struct ForwardCache {
    /// activations[0] is the input; activations[l + 1] the output of affine
    /// layer l after its nonlinearity (the last entry is the raw logits).
    pub activations: Vec<Array2<f64>>,
    /// Pre-activation values per affine layer, for the ReLU mask.
    pub pre: Vec<Array2<f64>>,
}

pub(crate) fn mlp_forward_cached(params: &MlpParams, x: &Array2<f64>) -> ForwardCache {
    let layers = params.weights.len();
    let mut activations = Vec::with_capacity(layers + 1);
    let mut pre = Vec::with_capacity(layers);
    activations.push(x.clone());
    for l in 0..layers {
        let z = activations[l].dot(&params.weights[l].t()) + &params.biases[l];
        let a = if l + 1 < layers {
            z.mapv(|v| v.max(0.0))
        } else {
            z.clone()
        };
        pre.push(z);
        activations.push(a);
    }
    ForwardCache { activations, pre }
}

/// Logits of the network on a batch of rows.
///
/// # Panics
/// If `x` does not have `shape.input` columns.
pub fn mlp_forward(params: &MlpParams, x: &Array2<f64>) -> Array2<f64> {
    assert_eq!(
        x.ncols(),
        params.shape.input,
        "input has {} columns, network expects {}",
        x.ncols(),
        params.shape.input
    );
    mlp_forward_cached(params, x)
        .activations
        .pop()
        .expect("at least one layer")
}

/// Backpropagates a logit-space gradient through the network.
///
/// Returns parameter gradients in the same layout as `params` and the
/// gradient with respect to the input batch. ReLU uses the zero
/// subgradient at exactly 0.
pub(crate) fn mlp_backward(
    params: &MlpParams,
    cache: &ForwardCache,
    dlogits: &Array2<f64>,
) -> (MlpParams, Array2<f64>) {
    let layers = params.weights.len();
    let mut grads = MlpParams {
        shape: params.shape.clone(),
        weights: params.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
        biases: params.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
    };
    let mut delta = dlogits.clone();
    for l in (0..layers).rev() {
        grads.weights[l] = delta.t().dot(&cache.activations[l]);
        grads.biases[l] = delta.sum_axis(Axis(0));
        let mut dprev = delta.dot(&params.weights[l]);
        if l > 0 {
            dprev.zip_mut_with(&cache.pre[l - 1], |d, &z| {
                if z <= 0.0 {
                    *d = 0.0;
                }
            });
        }
        delta = dprev;
    }
    (grads, delta)
}

/// A ReLU network trained with a softmax loss on multiclass data. The
/// parameter vector is the [`MlpParams::flatten`] layout.
pub struct MlpObjective<'a> {
    data: &'a Dataset,
    shape: MlpShape,
    spec: LossSpec,
    classes: usize,
}

/// Validates shape/data/loss compatibility: multiclass labels, softmax
/// family, matching input width and class count.
pub fn mlp_objective<'a>(
    data: &'a Dataset,
    shape: &MlpShape,
    spec: &LossSpec,
) -> Result<MlpObjective<'a>> {
    spec.validate()?;
    if spec.is_margin_family() {
        return Err(Error::LabelMismatch(format!(
            "{} is a margin loss; the network trains on softmax losses \
             (wrap binary data with as_two_class)",
            spec.name()
        )));
    }
    let (classes, _) = data.class_indices()?;
    if shape.input != data.dim() {
        return Err(Error::DimensionMismatch(format!(
            "network input {} vs feature dimension {}",
            shape.input,
            data.dim()
        )));
    }
    if shape.output != classes {
        return Err(Error::DimensionMismatch(format!(
            "network output {} vs {} classes",
            shape.output, classes
        )));
    }
    Ok(MlpObjective {
        data,
        shape: shape.clone(),
        spec: *spec,
        classes,
    })
}

impl MlpObjective<'_> {
    fn unflatten(&self, w: &Array1<f64>) -> MlpParams {
        MlpParams::from_flat(&self.shape, w.view()).expect("dim checked by the optimizer")
    }

    fn eval(&self, w: &Array1<f64>, data: &Dataset, with_grad: bool) -> (f64, Option<Array1<f64>>) {
        let params = self.unflatten(w);
        let cache = mlp_forward_cached(&params, data.features());
        let logits = cache.activations.last().expect("at least one layer");
        let (_, indices) = data.class_indices().expect("validated at construction");
        let n = data.n() as f64;
        let values: Vec<f64> = logits
            .rows()
            .into_iter()
            .zip(indices.iter())
            .map(|(row, &c)| self.spec.softmax_value(row, c))
            .collect();
        let value = pairwise_sum(&values) / n;
        if !with_grad {
            return (value, None);
        }
        let mut dlogits = Array2::zeros((data.n(), self.classes));
        for (i, (row, &c)) in logits.rows().into_iter().zip(indices.iter()).enumerate() {
            let g = match self.spec {
                LossSpec::CrossEntropy => ce_logit_grad(row, c),
                LossSpec::RootedCe { k, m } => rooted_ce_logit_grad(row, c, k, m),
                LossSpec::Focal { gamma } => focal_logit_grad(row, c, gamma),
                _ => unreachable!("margin families rejected at construction"),
            };
            dlogits.row_mut(i).assign(&(g / n));
        }
        let (grads, _) = mlp_backward(&params, &cache, &dlogits);
        (value, Some(grads.flatten()))
    }
}

impl Objective for MlpObjective<'_> {
    fn dim(&self) -> usize {
        self.shape.num_params()
    }

    fn num_samples(&self) -> usize {
        self.data.n()
    }

    fn value(&self, w: &Array1<f64>) -> f64 {
        self.eval(w, self.data, false).0
    }

    fn gradient(&self, w: &Array1<f64>) -> Array1<f64> {
        self.eval(w, self.data, true).1.expect("gradient requested")
    }

    fn value_gradient(&self, w: &Array1<f64>) -> (f64, Array1<f64>) {
        let (v, g) = self.eval(w, self.data, true);
        (v, g.expect("gradient requested"))
    }

    fn batch_value_gradient(&self, w: &Array1<f64>, idx: &[usize]) -> (f64, Array1<f64>) {
        let subset = self.data.subset(idx).expect("indices from the optimizer");
        let (v, g) = self.eval(w, &subset, true);
        (v, g.expect("gradient requested"))
    }
}

/// Accuracy of the network on multiclass data (argmax prediction).
pub fn evaluate_mlp(params: &MlpParams, data: &Dataset) -> Result<f64> {
    let (_, indices) = data.class_indices()?;
    if params.shape.input != data.dim() {
        return Err(Error::DimensionMismatch(format!(
            "network input {} vs feature dimension {}",
            params.shape.input,
            data.dim()
        )));
    }
    let logits = mlp_forward(params, data.features());
    let hits: Vec<f64> = logits
        .rows()
        .into_iter()
        .zip(indices.iter())
        .map(|(row, &c)| f64::from(argmax(row) == c))
        .collect();
    Ok(pairwise_sum(&hits) / hits.len() as f64)
}

/// Axis-aligned rectangle for [`decision_grid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridBounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl GridBounds {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let vals = [x_min, x_max, y_min, y_max];
        if vals.iter().any(|v| !v.is_finite()) || x_min >= x_max || y_min >= y_max {
            return Err(Error::InvalidParameter(format!(
                "degenerate grid bounds [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        Ok(GridBounds { x_min, x_max, y_min, y_max })
    }

    /// Smallest rectangle covering the first two feature columns, padded
    /// by `pad` on every side.
    pub fn cover(data: &Dataset, pad: f64) -> Result<Self> {
        if data.dim() < 2 {
            return Err(Error::DimensionMismatch(
                "grid bounds need at least two feature columns".into(),
            ));
        }
        let col = |j: usize| {
            let c = data.features().column(j);
            let min = c.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (min, max)
        };
        let (x_min, x_max) = col(0);
        let (y_min, y_max) = col(1);
        GridBounds::new(x_min - pad, x_max + pad, y_min - pad, y_max + pad)
    }
}

/// Class-1 probabilities of a 2-input network over a regular grid.
#[derive(Debug, Clone)]
pub struct DecisionGrid {
    pub bounds: GridBounds,
    pub resolution: usize,
    /// Row-major with y in the outer loop: index `yi * resolution + xi`.
    pub probs: Vec<f64>,
}

/// Samples softmax class-1 probability on a `resolution x resolution`
/// grid with inclusive endpoints.
///
/// # Errors
/// The network must take 2 inputs and emit at least 2 classes;
/// `resolution` must be at least 2.
pub fn decision_grid(
    params: &MlpParams,
    bounds: GridBounds,
    resolution: usize,
) -> Result<DecisionGrid> {
    if params.shape.input != 2 {
        return Err(Error::DimensionMismatch(format!(
            "decision grids need a 2-input network, got {}",
            params.shape.input
        )));
    }
    if params.shape.output < 2 {
        return Err(Error::InvalidParameter(
            "decision grids need at least 2 output classes".into(),
        ));
    }
    if resolution < 2 {
        return Err(Error::InvalidParameter(format!(
            "grid resolution must be at least 2, got {resolution}"
        )));
    }
    let r = resolution;
    let lerp = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (r - 1) as f64;
    let mut points = Array2::zeros((r * r, 2));
    for yi in 0..r {
        for xi in 0..r {
            let row = yi * r + xi;
            points[[row, 0]] = lerp(bounds.x_min, bounds.x_max, xi);
            points[[row, 1]] = lerp(bounds.y_min, bounds.y_max, yi);
        }
    }
    let logits = mlp_forward(params, &points);
    let probs = logits
        .rows()
        .into_iter()
        .map(|row| log_softmax(row)[1].exp())
        .collect();
    Ok(DecisionGrid {
        bounds,
        resolution,
        probs,
    })
}

impl DecisionGrid {
    /// Two-line header (grid metadata, then column names) followed by one
    /// `x,y,p_class1` row per grid point in storage order.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        let b = &self.bounds;
        writeln!(
            out,
            "# decision grid: x_min={},x_max={},y_min={},y_max={},resolution={}",
            b.x_min, b.x_max, b.y_min, b.y_max, self.resolution
        )?;
        writeln!(out, "x,y,p_class1")?;
        let r = self.resolution;
        let lerp = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (r - 1) as f64;
        for yi in 0..r {
            for xi in 0..r {
                writeln!(
                    out,
                    "{},{},{}",
                    lerp(b.x_min, b.x_max, xi),
                    lerp(b.y_min, b.y_max, yi),
                    self.probs[yi * r + xi]
                )?;
            }
        }
        Ok(())
    }
}
