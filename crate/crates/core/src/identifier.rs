//! Offline neural-network identification of the plant nonlinearity and the
//! online identification models built on top of it.
//!
//! The network is `N(x) = Σ_i w_out[i] · tanh(Σ_j w_in[i][j] · x_j)` with two
//! inputs, no biases and (by default) three hidden units.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::plant::{PlantModel, PlantState};

pub const DEFAULT_HIDDEN: usize = 3;
pub const DIVERGENCE_LIMIT: f64 = 1e12;
const WEIGHTS_MAGIC: &str = "mmaflc-weights 1";

/// Hidden-layer activation (hyperbolic tangent).
#[inline]
pub fn activation(z: f64) -> f64 {
    z.tanh()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuralNet {
    /// Input-to-hidden weights, one `[w_i1, w_i2]` row per hidden unit.
    pub w_in: Vec<[f64; 2]>,
    /// Hidden-to-output weights.
    pub w_out: Vec<f64>,
}

impl NeuralNet {
    pub fn new(w_in: Vec<[f64; 2]>, w_out: Vec<f64>) -> Result<Self> {
        if w_in.is_empty() {
            return Err(Error::config("network needs at least one hidden unit"));
        }
        if w_in.len() != w_out.len() {
            return Err(Error::Dimension {
                context: "network output weights",
                expected: w_in.len(),
                got: w_out.len(),
            });
        }
        ensure_finite("network weights", &w_in.concat())?;
        ensure_finite("network weights", &w_out)?;
        Ok(Self { w_in, w_out })
    }

    pub fn zeros(hidden: usize) -> Self {
        Self {
            w_in: vec![[0.0; 2]; hidden],
            w_out: vec![0.0; hidden],
        }
    }

    /// Weights drawn uniformly from `[-0.5, 0.5]`.
    pub fn random(hidden: usize, seed: u64) -> Self {
        Self::random_scaled(hidden, seed, 0.5)
    }

    pub fn random_scaled(hidden: usize, seed: u64, half_width: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w_in = (0..hidden)
            .map(|_| {
                [
                    rng.gen_range(-half_width..=half_width),
                    rng.gen_range(-half_width..=half_width),
                ]
            })
            .collect();
        let w_out = (0..hidden)
            .map(|_| rng.gen_range(-half_width..=half_width))
            .collect();
        Self { w_in, w_out }
    }

    pub fn hidden(&self) -> usize {
        self.w_out.len()
    }

    pub fn n_params(&self) -> usize {
        3 * self.hidden()
    }

    /// Hidden activations `Γ(w_in · x)`.
    pub fn hidden_layer(&self, x: PlantState) -> Vec<f64> {
        self.w_in
            .iter()
            .map(|w| activation(w[0] * x.x1 + w[1] * x.x2))
            .collect()
    }

    /// Flattened parameters: `w_in` row-major, then `w_out`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.w_in.concat();
        p.extend_from_slice(&self.w_out);
        p
    }

    pub fn from_params(hidden: usize, params: &[f64]) -> Result<Self> {
        if params.len() != 3 * hidden {
            return Err(Error::Dimension {
                context: "network parameters",
                expected: 3 * hidden,
                got: params.len(),
            });
        }
        let w_in = params[..2 * hidden]
            .chunks_exact(2)
            .map(|c| [c[0], c[1]])
            .collect();
        Self::new(w_in, params[2 * hidden..].to_vec())
    }

    fn all_finite(&self) -> bool {
        self.w_in.iter().flatten().all(|v| v.is_finite())
            && self.w_out.iter().all(|v| v.is_finite())
    }
}

pub fn nn_forward(net: &NeuralNet, x: PlantState) -> f64 {
    net.hidden_layer(x)
        .iter()
        .zip(&net.w_out)
        .map(|(h, w)| w * h)
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    samples: Vec<(PlantState, f64)>,
    alpha: f64,
}

impl TrainingSet {
    pub fn new(samples: Vec<(PlantState, f64)>, alpha: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::config(format!("training rate must be positive, got {alpha}")));
        }
        for (x, f) in &samples {
            ensure_finite("training sample", &[x.x1, x.x2, *f])?;
        }
        Ok(Self { samples, alpha })
    }

    /// Samples the plant nonlinearity `f(x)θ` on a regular grid.
    pub fn from_plant_grid(
        plant: &PlantModel,
        x1_range: [f64; 2],
        x2_range: [f64; 2],
        points_per_axis: usize,
        alpha: f64,
    ) -> Result<Self> {
        if points_per_axis < 2 {
            return Err(Error::config("training grid needs at least 2 points per axis"));
        }
        let lerp = |r: [f64; 2], k: usize| {
            r[0] + (r[1] - r[0]) * k as f64 / (points_per_axis - 1) as f64
        };
        let samples = (0..points_per_axis)
            .flat_map(|i| (0..points_per_axis).map(move |j| (i, j)))
            .map(|(i, j)| {
                let x = PlantState::new(lerp(x1_range, i), lerp(x2_range, j));
                (x, plant.nonlinearity(x))
            })
            .collect();
        Self::new(samples, alpha)
    }

    pub fn samples(&self) -> &[(PlantState, f64)] {
        &self.samples
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::config(format!("training rate must be positive, got {alpha}")));
        }
        self.alpha = alpha;
        Ok(self)
    }
}

/// `L = ½ Σ_k (N(x_k) − f_d(k))²`.
pub fn loss(net: &NeuralNet, set: &TrainingSet) -> f64 {
    0.5 * set
        .samples
        .iter()
        .map(|(x, f)| {
            let r = nn_forward(net, *x) - f;
            r * r
        })
        .sum::<f64>()
}

/// Exact `∂L/∂w` by backpropagation, shaped like the network.
pub fn loss_gradient(net: &NeuralNet, set: &TrainingSet) -> NeuralNet {
    let mut grad = NeuralNet::zeros(net.hidden());
    for (x, f) in &set.samples {
        let h = net.hidden_layer(*x);
        let r = h.iter().zip(&net.w_out).map(|(h, w)| w * h).sum::<f64>() - f;
        for i in 0..net.hidden() {
            grad.w_out[i] += r * h[i];
            let back = r * net.w_out[i] * (1.0 - h[i] * h[i]);
            grad.w_in[i][0] += back * x.x1;
            grad.w_in[i][1] += back * x.x2;
        }
    }
    grad
}

#[derive(Clone, Debug, PartialEq)]
pub struct Training {
    pub net: NeuralNet,
    /// Loss after each epoch's update.
    pub history: Vec<f64>,
}

impl Training {
    pub fn final_loss(&self) -> f64 {
        *self.history.last().expect("at least one epoch")
    }
}

/// Plain full-batch gradient descent `w ← w − α ∂L/∂w`.
pub fn train_offline(net: &NeuralNet, set: &TrainingSet, epochs: usize) -> Result<Training> {
    if epochs == 0 {
        return Err(Error::config("epochs must be at least 1"));
    }
    let mut net = net.clone();
    let mut history = Vec::with_capacity(epochs);
    for epoch in 1..=epochs {
        let g = loss_gradient(&net, set);
        for (w, dw) in net.w_in.iter_mut().zip(&g.w_in) {
            w[0] -= set.alpha * dw[0];
            w[1] -= set.alpha * dw[1];
        }
        for (w, dw) in net.w_out.iter_mut().zip(&g.w_out) {
            *w -= set.alpha * dw;
        }
        let l = loss(&net, set);
        if !l.is_finite() || l > DIVERGENCE_LIMIT || !net.all_finite() {
            return Err(Error::Diverged { epoch, loss: l });
        }
        history.push(l);
    }
    Ok(Training { net, history })
}

/// Largest `|N(x) − f_d|` over a training set.
pub fn max_abs_error(net: &NeuralNet, set: &TrainingSet) -> f64 {
    set.samples
        .iter()
        .map(|(x, f)| (nn_forward(net, *x) - f).abs())
        .fold(0.0, f64::max)
}

pub fn rms_error(net: &NeuralNet, set: &TrainingSet) -> f64 {
    (2.0 * loss(net, set) / set.samples.len() as f64).sqrt()
}

/// How the online estimate `θ̂` multiplies the network.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentifierMode {
    /// `N` absorbs θ; `θ̂` is a scalar gain starting at 1.
    #[default]
    Lumped,
    /// The hidden layer is the basis image and `θ̂` replaces the output
    /// weights, starting from the trained `w_out`.
    HiddenBasis,
}

/// Trained network plus the convention for `N(x)·θ̂`.
#[derive(Clone, Debug, PartialEq)]
pub struct Identifier {
    pub net: NeuralNet,
    pub mode: IdentifierMode,
}

impl Identifier {
    pub fn new(net: NeuralNet, mode: IdentifierMode) -> Self {
        Self { net, mode }
    }

    /// Regressor `ψ(x)` such that `N(x)·θ̂ = ψ(x)·θ̂`.
    pub fn regressor(&self, x: PlantState) -> Vec<f64> {
        match self.mode {
            IdentifierMode::Lumped => vec![nn_forward(&self.net, x)],
            IdentifierMode::HiddenBasis => self.net.hidden_layer(x),
        }
    }

    pub fn theta_len(&self) -> usize {
        match self.mode {
            IdentifierMode::Lumped => 1,
            IdentifierMode::HiddenBasis => self.net.hidden(),
        }
    }

    pub fn initial_theta(&self) -> Vec<f64> {
        match self.mode {
            IdentifierMode::Lumped => vec![1.0],
            IdentifierMode::HiddenBasis => self.net.w_out.clone(),
        }
    }

    /// `N(x)·θ̂`.
    pub fn estimate(&self, x: PlantState, thetahat: &[f64]) -> f64 {
        dot(&self.regressor(x), thetahat)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatedState {
    pub xhat: PlantState,
    pub thetahat: Vec<f64>,
}

/// Parallel model: the estimate feeds the network.
pub fn parallel_step(est: &EstimatedState, u: f64, ident: &Identifier) -> Result<[f64; 2]> {
    ensure_finite("estimated state", &est.xhat.as_array())?;
    ensure_finite("parameter estimate", &est.thetahat)?;
    ensure_finite("control", &[u])?;
    Ok([est.xhat.x2, ident.estimate(est.xhat, &est.thetahat) + u])
}

/// Series-parallel model: the measured state feeds the network and the
/// stable `am` pulls the estimate toward the measurement on both channels.
pub fn series_parallel_step(
    est: &EstimatedState,
    x: PlantState,
    u: f64,
    ident: &Identifier,
    am: f64,
) -> Result<[f64; 2]> {
    if !(am < 0.0) {
        return Err(Error::config(format!("reference pole must be negative, got {am}")));
    }
    ensure_finite("estimated state", &est.xhat.as_array())?;
    ensure_finite("plant state", &x.as_array())?;
    ensure_finite("parameter estimate", &est.thetahat)?;
    ensure_finite("control", &[u])?;
    Ok(series_parallel_unchecked(est.xhat, &est.thetahat, x, u, ident, am))
}

#[inline]
pub(crate) fn series_parallel_unchecked(
    xhat: PlantState,
    thetahat: &[f64],
    x: PlantState,
    u: f64,
    ident: &Identifier,
    am: f64,
) -> [f64; 2] {
    [
        x.x2 + am * (xhat.x1 - x.x1),
        am * (xhat.x2 - x.x2) + ident.estimate(x, thetahat) + u,
    ]
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Versioned plain-text weights: `w_in` row-major, then `w_out`.
pub fn write_weights(net: &NeuralNet) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{WEIGHTS_MAGIC}");
    let _ = writeln!(s, "inputs 2");
    let _ = writeln!(s, "hidden {}", net.hidden());
    let _ = writeln!(s, "w_in");
    for row in &net.w_in {
        let _ = writeln!(s, "{} {}", row[0], row[1]);
    }
    let _ = writeln!(s, "w_out");
    for w in &net.w_out {
        let _ = writeln!(s, "{w}");
    }
    s
}

pub fn parse_weights(text: &str) -> Result<NeuralNet> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .enumerate()
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::Weights(format!("unexpected end of file, expected {what}")))
    };
    let (_, magic) = next("header")?;
    if magic != WEIGHTS_MAGIC {
        return Err(Error::Weights(format!("unsupported header {magic:?}")));
    }
    let (n, inputs) = next("inputs")?;
    if inputs != "inputs 2" {
        return Err(Error::Weights(format!("line {}: expected `inputs 2`", n + 1)));
    }
    let (n, hidden) = next("hidden")?;
    let hidden: usize = hidden
        .strip_prefix("hidden ")
        .and_then(|h| h.trim().parse().ok())
        .ok_or_else(|| Error::Weights(format!("line {}: expected `hidden <count>`", n + 1)))?;
    let (n, tag) = next("w_in")?;
    if tag != "w_in" {
        return Err(Error::Weights(format!("line {}: expected `w_in`", n + 1)));
    }
    let parse = |n: usize, s: &str| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::Weights(format!("line {}: bad number {s:?}", n + 1)))
    };
    let mut w_in = Vec::with_capacity(hidden);
    for _ in 0..hidden {
        let (n, row) = next("w_in row")?;
        let vals: Vec<&str> = row.split_whitespace().collect();
        if vals.len() != 2 {
            return Err(Error::Weights(format!("line {}: expected 2 values", n + 1)));
        }
        w_in.push([parse(n, vals[0])?, parse(n, vals[1])?]);
    }
    let (n, tag) = next("w_out")?;
    if tag != "w_out" {
        return Err(Error::Weights(format!("line {}: expected `w_out`", n + 1)));
    }
    let mut w_out = Vec::with_capacity(hidden);
    for _ in 0..hidden {
        let (n, v) = next("w_out value")?;
        w_out.push(parse(n, v)?);
    }
    if let Some((n, _)) = lines.next() {
        return Err(Error::Weights(format!("line {}: trailing content", n + 1)));
    }
    NeuralNet::new(w_in, w_out)
}

/// `epoch,loss` rows, epochs counted from 1.
pub fn loss_history_csv(history: &[f64]) -> String {
    let mut s = String::from("epoch,loss\n");
    for (k, l) in history.iter().enumerate() {
        let _ = writeln!(s, "{},{}", k + 1, l);
    }
    s
}
