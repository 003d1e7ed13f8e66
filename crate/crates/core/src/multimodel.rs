//! Multiple identification controllers blended by convex weights.
//!
//! Each model `i` carries fuzzy consequents `α̂⁽ⁱ⁾` and a series-parallel
//! prediction `x̂⁽ⁱ⁾` of the actuated state. The prediction hypothesizes that
//! the part of the plant the network misses equals `−(α̂⁽ⁱ⁾ᵀξ + η⁽ⁱ⁾)`:
//!
//! ```text
//! x̂⁽ⁱ⁾' = A_m (x̂⁽ⁱ⁾ − x2) + N(x)θ̂ + u − (α̂⁽ⁱ⁾ᵀξ + η⁽ⁱ⁾)
//! e_m⁽ⁱ⁾ = x2 − x̂⁽ⁱ⁾
//! α̂⁽ⁱ⁾'  = −ρ e_m⁽ⁱ⁾ ξ
//! ```
//!
//! so `e_m⁽ⁱ⁾' = A_m e_m⁽ⁱ⁾ + (α̂⁽ⁱ⁾ − α*)ᵀξ + η⁽ⁱ⁾ − ε` and every model obeys
//! the same affine dynamics in its own parameter error. The weights solve
//! `Σ γ_i φ_i = 0` in least squares through
//! `γ̂' = −g (ΦᵀΦ γ̂ + Φᵀ φ_N)`, where `Φ = [φ_1 − φ_N, …, φ_{N−1} − φ_N]`
//! and the reduced weights omit `γ_N = 1 − Σ γ_i`.
//!
//! The vectors `φ_i` are either the per-model prediction errors (anchor at
//! zero error, [`GammaAnchor::PredictionError`]) or the consequent offsets
//! from a single adaptive model run alongside the bank
//! ([`GammaAnchor::SingleModel`]).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adaptation::{alpha_law, robust_eta, RobustTerm};
use crate::error::{ensure_finite, Error, Result};
use crate::fuzzy::{defuzzify, Regressor};
use crate::identifier::dot;
use crate::simkit::integrator::rk4_step;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaAnchor {
    #[default]
    PredictionError,
    SingleModel,
}

/// Offsets of one model's block inside the flat bank state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BankLayout {
    pub n_models: usize,
    pub dim: usize,
    pub anchor: GammaAnchor,
}

impl BankLayout {
    pub fn block(&self) -> usize {
        1 + self.dim
    }

    pub fn model_offset(&self, i: usize) -> usize {
        i * self.block()
    }

    /// Offset of the single anchor model (only with [`GammaAnchor::SingleModel`]).
    pub fn anchor_offset(&self) -> Option<usize> {
        (self.anchor == GammaAnchor::SingleModel).then(|| self.n_models * self.block())
    }

    pub fn gamma_offset(&self) -> usize {
        let anchors = usize::from(self.anchor == GammaAnchor::SingleModel);
        (self.n_models + anchors) * self.block()
    }

    pub fn len(&self) -> usize {
        self.gamma_offset() + self.n_models - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Bank of `N` fuzzy consequent vectors with their predictions and weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBank {
    layout: BankLayout,
    state: Vec<f64>,
}

impl ModelBank {
    pub fn from_vertices(vertices: Vec<Vec<f64>>, anchor: GammaAnchor) -> Result<Self> {
        let n = vertices.len();
        if n == 0 {
            return Err(Error::config("model bank needs at least one model"));
        }
        let dim = vertices[0].len();
        for v in &vertices {
            if v.len() != dim {
                return Err(Error::Dimension {
                    context: "bank vertex",
                    expected: dim,
                    got: v.len(),
                });
            }
            ensure_finite("bank vertex", v)?;
        }
        let layout = BankLayout {
            n_models: n,
            dim,
            anchor,
        };
        let mut state = vec![0.0; layout.len()];
        for (i, v) in vertices.iter().enumerate() {
            let o = layout.model_offset(i) + 1;
            state[o..o + dim].copy_from_slice(v);
        }
        if let Some(o) = layout.anchor_offset() {
            let centroid = centroid(&vertices);
            state[o + 1..o + 1 + dim].copy_from_slice(&centroid);
        }
        let g = layout.gamma_offset();
        for k in 0..n - 1 {
            state[g + k] = 1.0 / n as f64;
        }
        Ok(Self { layout, state })
    }

    /// A one-model bank; it has no weight dynamics and reproduces a single
    /// adaptive fuzzy controller.
    pub fn degenerate(alpha: Vec<f64>) -> Result<Self> {
        Self::from_vertices(vec![alpha], GammaAnchor::PredictionError)
    }

    pub fn from_state(layout: BankLayout, state: Vec<f64>) -> Result<Self> {
        if state.len() != layout.len() {
            return Err(Error::Dimension {
                context: "bank state",
                expected: layout.len(),
                got: state.len(),
            });
        }
        Ok(Self { layout, state })
    }

    pub fn layout(&self) -> BankLayout {
        self.layout
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn n_models(&self) -> usize {
        self.layout.n_models
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    pub fn alpha(&self, i: usize) -> &[f64] {
        let o = self.layout.model_offset(i) + 1;
        &self.state[o..o + self.layout.dim]
    }

    pub fn alphas(&self) -> Vec<Vec<f64>> {
        (0..self.n_models()).map(|i| self.alpha(i).to_vec()).collect()
    }

    pub fn prediction(&self, i: usize) -> f64 {
        self.state[self.layout.model_offset(i)]
    }

    /// Starts every prediction (and the anchor's) at the measured `x2`.
    pub fn reset_predictions(&mut self, x2: f64) {
        for i in 0..self.n_models() {
            let o = self.layout.model_offset(i);
            self.state[o] = x2;
        }
        if let Some(o) = self.layout.anchor_offset() {
            self.state[o] = x2;
        }
    }

    pub fn anchor_alpha(&self) -> Option<&[f64]> {
        self.layout
            .anchor_offset()
            .map(|o| &self.state[o + 1..o + 1 + self.layout.dim])
    }

    pub fn gamma_reduced(&self) -> &[f64] {
        &self.state[self.layout.gamma_offset()..]
    }

    pub fn gamma_full(&self) -> Vec<f64> {
        gamma_full(self.gamma_reduced())
    }

    pub fn set_gamma_full(&mut self, gamma: &[f64]) -> Result<()> {
        if gamma.len() != self.n_models() {
            return Err(Error::Dimension {
                context: "bank weights",
                expected: self.n_models(),
                got: gamma.len(),
            });
        }
        let g = self.layout.gamma_offset();
        let n = self.n_models();
        self.state[g..].copy_from_slice(&gamma[..n - 1]);
        Ok(())
    }

    /// Whether `N ≥ m + 1`, the vertex count a hull enclosing an arbitrary
    /// point of the `m`-dimensional consequent space needs.
    pub fn spans_dimension(&self) -> bool {
        self.n_models() > self.dim()
    }
}

/// `(γ_1 … γ_{N−1}, 1 − Σ)`.
pub fn gamma_full(reduced: &[f64]) -> Vec<f64> {
    let mut g = reduced.to_vec();
    g.push(1.0 - reduced.iter().sum::<f64>());
    g
}

fn centroid(vertices: &[Vec<f64>]) -> Vec<f64> {
    let n = vertices.len() as f64;
    let mut c = vec![0.0; vertices[0].len()];
    for v in vertices {
        for (ci, vi) in c.iter_mut().zip(v) {
            *ci += vi / n;
        }
    }
    c
}

/// Vertices `center + d_i` whose offsets are centred and scaled so the
/// largest entry is `spread`; the uniform combination is the center.
pub fn init_hull(
    center: &[f64],
    spread: f64,
    n_models: usize,
    seed: u64,
    anchor: GammaAnchor,
) -> Result<ModelBank> {
    if n_models < 2 {
        return Err(Error::config(format!("model bank needs N >= 2, got {n_models}")));
    }
    if !(spread > 0.0) || !spread.is_finite() {
        return Err(Error::config(format!("hull spread must be positive, got {spread}")));
    }
    ensure_finite("hull center", center)?;
    let m = center.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dirs: Vec<Vec<f64>> = (0..n_models)
        .map(|_| (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mean = centroid(&dirs);
    for d in &mut dirs {
        for (di, mi) in d.iter_mut().zip(&mean) {
            *di -= mi;
        }
    }
    let scale = dirs
        .iter()
        .flatten()
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::config("degenerate hull directions"));
    }
    let vertices = dirs
        .iter()
        .map(|d| {
            center
                .iter()
                .zip(d)
                .map(|(c, di)| c + spread * di / scale)
                .collect()
        })
        .collect();
    ModelBank::from_vertices(vertices, anchor)
}

/// Convex weights of `point` in the hull of `vertices` by projected
/// gradient; returns the weights and the residual norm.
pub fn hull_weights(vertices: &[Vec<f64>], point: &[f64], iterations: usize) -> (Vec<f64>, f64) {
    let n = vertices.len();
    let mut gamma = vec![1.0 / n as f64; n];
    // Step 1/L with L bounded by the squared Frobenius norm of the vertex matrix.
    let lip: f64 = vertices.iter().map(|v| dot(v, v)).sum::<f64>().max(1e-300);
    let combine = |g: &[f64]| -> Vec<f64> {
        let mut p = vec![0.0; point.len()];
        for (gi, v) in g.iter().zip(vertices) {
            for (pk, vk) in p.iter_mut().zip(v) {
                *pk += gi * vk;
            }
        }
        p
    };
    for _ in 0..iterations {
        let r: Vec<f64> = combine(&gamma).iter().zip(point).map(|(a, b)| a - b).collect();
        let step: Vec<f64> = gamma
            .iter()
            .zip(vertices)
            .map(|(g, v)| g - dot(v, &r) / lip)
            .collect();
        gamma = project_simplex(&step);
    }
    let r: f64 = combine(&gamma)
        .iter()
        .zip(point)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    (gamma, r)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HullGeometry {
    /// `φ_i = v_i − anchor`.
    pub phi: Vec<Vec<f64>>,
    /// Columns `φ_i − φ_N`, `i < N`.
    pub columns: Vec<Vec<f64>>,
}

impl HullGeometry {
    pub fn last(&self) -> &[f64] {
        self.phi.last().expect("non-empty geometry")
    }
}

pub fn hull_geometry(vertices: &[Vec<f64>], anchor: &[f64]) -> Result<HullGeometry> {
    let Some(last) = vertices.last() else {
        return Err(Error::config("hull geometry needs at least one vertex"));
    };
    for v in vertices {
        if v.len() != anchor.len() {
            return Err(Error::Dimension {
                context: "hull geometry",
                expected: anchor.len(),
                got: v.len(),
            });
        }
    }
    let phi: Vec<Vec<f64>> = vertices
        .iter()
        .map(|v| v.iter().zip(anchor).map(|(a, b)| a - b).collect())
        .collect();
    let phi_n: Vec<f64> = last.iter().zip(anchor).map(|(a, b)| a - b).collect();
    let columns = phi[..phi.len() - 1]
        .iter()
        .map(|p| p.iter().zip(&phi_n).map(|(a, b)| a - b).collect())
        .collect();
    Ok(HullGeometry { phi, columns })
}

/// `−(ΦᵀΦ γ̂ + Φᵀ φ_N)` on the reduced weights.
pub fn gamma_law(geom: &HullGeometry, gamma_reduced: &[f64]) -> Result<Vec<f64>> {
    if gamma_reduced.len() != geom.columns.len() {
        return Err(Error::Dimension {
            context: "gamma law",
            expected: geom.columns.len(),
            got: gamma_reduced.len(),
        });
    }
    let mut residual = geom.last().to_vec();
    for (g, c) in gamma_reduced.iter().zip(&geom.columns) {
        for (r, ck) in residual.iter_mut().zip(c) {
            *r += g * ck;
        }
    }
    Ok(geom.columns.iter().map(|c| -dot(c, &residual)).collect())
}

/// Euclidean projection onto `{γ : γ_i ≥ 0, Σγ_i = 1}` (sort-and-threshold).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (k, s) in sorted.iter().enumerate() {
        cumulative += s;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if s - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// Per-model fuzzy outputs `α̂⁽ⁱ⁾ᵀξ`.
pub fn model_outputs(bank: &ModelBank, xi: &Regressor) -> Result<Vec<f64>> {
    (0..bank.n_models())
        .map(|i| defuzzify(bank.alpha(i), xi))
        .collect()
}

/// `Σ γ̂_i α̂⁽ⁱ⁾ᵀξ`.
pub fn combined_control(bank: &ModelBank, xi: &Regressor) -> Result<f64> {
    let outputs = model_outputs(bank, xi)?;
    Ok(blend(&bank.gamma_full(), &outputs))
}

pub(crate) fn blend(gamma: &[f64], outputs: &[f64]) -> f64 {
    let mut acc = gamma[0] * outputs[0];
    for (g, y) in gamma.iter().zip(outputs).skip(1) {
        acc += g * y;
    }
    acc
}

/// Signals shared by every model during one derivative evaluation.
#[derive(Clone, Copy, Debug)]
pub struct BankInputs<'a> {
    /// Measured actuated state.
    pub x2: f64,
    /// Network estimate `N(x)θ̂` at the measured state.
    pub n_theta: f64,
    /// Control actually applied to the plant.
    pub u: f64,
    pub xi: &'a Regressor,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BankParams {
    pub am: f64,
    /// Consequent adaptation rate ρ.
    pub alpha_rate: f64,
    /// Weight adaptation rate g.
    pub gamma_rate: f64,
    pub robust: RobustTerm,
}

/// One model's contribution at a derivative evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelEstimate {
    pub em: f64,
    pub eta: f64,
    pub u_fz: f64,
    /// `û⁽ⁱ⁾ = û_fz⁽ⁱ⁾ + η⁽ⁱ⁾`.
    pub u_model: f64,
    pub dxhat: f64,
}

/// Series-parallel prediction and error of one model.
pub fn model_estimate(xhat: f64, alpha: &[f64], inputs: &BankInputs, params: &BankParams) -> ModelEstimate {
    let em = inputs.x2 - xhat;
    let eta = robust_eta(em, &params.robust);
    let u_fz = dot(alpha, inputs.xi.as_slice());
    let u_model = u_fz + eta;
    let dxhat = params.am * (xhat - inputs.x2) + inputs.n_theta + inputs.u - u_model;
    ModelEstimate {
        em,
        eta,
        u_fz,
        u_model,
        dxhat,
    }
}

/// Writes `[x̂', α̂']` for one model block.
pub(crate) fn model_rhs(y: &[f64], inputs: &BankInputs, params: &BankParams, dy: &mut [f64]) -> f64 {
    let est = model_estimate(y[0], &y[1..], inputs, params);
    dy[0] = est.dxhat;
    for (d, a) in dy[1..].iter_mut().zip(alpha_law(est.em, inputs.xi)) {
        *d = params.alpha_rate * a;
    }
    est.em
}

/// Per-model estimates at the current bank state.
pub fn per_model_estimates(
    bank: &ModelBank,
    inputs: &BankInputs,
    params: &BankParams,
) -> Result<Vec<ModelEstimate>> {
    if inputs.xi.len() != bank.dim() {
        return Err(Error::Dimension {
            context: "bank regressor",
            expected: bank.dim(),
            got: inputs.xi.len(),
        });
    }
    ensure_finite("bank state", bank.state())?;
    ensure_finite("bank inputs", &[inputs.x2, inputs.n_theta, inputs.u])?;
    Ok((0..bank.n_models())
        .map(|i| model_estimate(bank.prediction(i), bank.alpha(i), inputs, params))
        .collect())
}

/// Full bank derivative over the flat layout.
pub fn bank_rhs(
    layout: &BankLayout,
    y: &[f64],
    inputs: &BankInputs,
    params: &BankParams,
    dy: &mut [f64],
) -> Result<()> {
    let b = layout.block();
    let mut errors = Vec::with_capacity(layout.n_models);
    for i in 0..layout.n_models {
        let o = layout.model_offset(i);
        errors.push(model_rhs(&y[o..o + b], inputs, params, &mut dy[o..o + b]));
    }
    if let Some(o) = layout.anchor_offset() {
        model_rhs(&y[o..o + b], inputs, params, &mut dy[o..o + b]);
    }
    if layout.n_models > 1 {
        let geom = match layout.anchor {
            GammaAnchor::PredictionError => {
                let vertices: Vec<Vec<f64>> = errors.iter().map(|e| vec![*e]).collect();
                hull_geometry(&vertices, &[0.0])?
            }
            GammaAnchor::SingleModel => {
                let vertices: Vec<Vec<f64>> = (0..layout.n_models)
                    .map(|i| {
                        let o = layout.model_offset(i) + 1;
                        y[o..o + layout.dim].to_vec()
                    })
                    .collect();
                let o = layout.anchor_offset().expect("anchor block") + 1;
                hull_geometry(&vertices, &y[o..o + layout.dim])?
            }
        };
        let g = layout.gamma_offset();
        let dgamma = gamma_law(&geom, &y[g..])?;
        for (d, v) in dy[g..].iter_mut().zip(dgamma) {
            *d = params.gamma_rate * v;
        }
    }
    Ok(())
}

/// Projects the weights back onto the simplex; returns whether they moved.
pub fn project_bank(bank_state: &mut [f64], layout: &BankLayout) -> bool {
    if layout.n_models < 2 {
        return false;
    }
    let g = layout.gamma_offset();
    let full = gamma_full(&bank_state[g..]);
    let projected = project_simplex(&full);
    let moved = projected.iter().zip(&full).any(|(a, b)| a != b);
    if moved {
        bank_state[g..].copy_from_slice(&projected[..layout.n_models - 1]);
    }
    moved
}

/// Observables for one standalone control cycle.
#[derive(Clone, Copy, Debug)]
pub struct CycleInputs<'a> {
    pub x2: f64,
    pub n_theta: f64,
    /// Certainty-equivalent part `k̂·x2 + b_m r`.
    pub u_ce: f64,
    /// Tracking error `x2 − x_m`.
    pub em: f64,
    pub xi: &'a Regressor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cycle {
    pub u: f64,
    pub bank: ModelBank,
    pub projected: bool,
}

/// One control cycle with the plant observables held over `dt`:
/// blend → apply `u` → advance predictions, consequents and weights by RK4 →
/// project the weights.
pub fn mmaflc_step(
    bank: &ModelBank,
    inputs: &CycleInputs,
    params: &BankParams,
    dt: f64,
    project: bool,
) -> Result<Cycle> {
    let u = inputs.u_ce + combined_control(bank, inputs.xi)? + robust_eta(inputs.em, &params.robust);
    ensure_finite("control", &[u])?;
    let layout = bank.layout();
    let bank_inputs = BankInputs {
        x2: inputs.x2,
        n_theta: inputs.n_theta,
        u,
        xi: inputs.xi,
    };
    let mut next = rk4_step(
        |_, y: &[f64], dy: &mut [f64]| bank_rhs(&layout, y, &bank_inputs, params, dy),
        0.0,
        bank.state(),
        dt,
    )
    .map_err(|e| e.into_error(0.0, |i| format!("bank state entry {i}")))?;
    let projected = project && project_bank(&mut next, &layout);
    Ok(Cycle {
        u,
        bank: ModelBank::from_state(layout, next)?,
        projected,
    })
}
