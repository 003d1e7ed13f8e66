//! The true second-order plant `x1' = x2`, `x2' = f0(x)·θ + u`.
//!
//! The controller never reads [`PlantModel::theta`]; only the simulator and
//! the offline training-set generator do.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Input channel `b = (0, 1)`: only the second state is actuated.
pub const INPUT_CHANNEL: [f64; 2] = [0.0, 1.0];

/// Nominal parameters of the canonical benchmark plant on the basis
/// `(x1, x2, x2|x2|)`: no restoring spring, viscous damping 0.5 and
/// quadratic damping 0.2.
pub const NOMINAL_THETA: [f64; 3] = [0.0, -0.5, -0.2];

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    /// Generalized position (rad or m).
    pub x1: f64,
    /// Generalized velocity (rad/s or m/s).
    pub x2: f64,
}

impl PlantState {
    pub fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.x1, self.x2]
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }
}

impl From<[f64; 2]> for PlantState {
    fn from(v: [f64; 2]) -> Self {
        Self { x1: v[0], x2: v[1] }
    }
}

/// Basis functions `f0(x1, x2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Basis {
    /// `(x1, x2, x2|x2|)`; entries 1 and 2 are damping terms.
    Damping,
    /// `tanh(w_i · x)` for each row `w_i`. A plant of this form is exactly
    /// realizable by the identifier network, which makes the true parameter
    /// error computable in tests. No entry counts as damping.
    TanhHidden { weights: Vec<[f64; 2]> },
}

impl Basis {
    pub fn len(&self) -> usize {
        match self {
            Basis::Damping => 3,
            Basis::TanhHidden { weights } => weights.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn eval(&self, state: PlantState) -> Vec<f64> {
        let PlantState { x1, x2 } = state;
        match self {
            Basis::Damping => vec![x1, x2, x2 * x2.abs()],
            Basis::TanhHidden { weights } => weights
                .iter()
                .map(|w| (w[0] * x1 + w[1] * x2).tanh())
                .collect(),
        }
    }

    /// Which entries of θ the friction multiplier scales.
    pub fn damping_mask(&self) -> Vec<bool> {
        match self {
            Basis::Damping => vec![false, true, true],
            Basis::TanhHidden { weights } => vec![false; weights.len()],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlantModel {
    basis: Basis,
    theta: Vec<f64>,
    friction_coeff: f64,
}

impl PlantModel {
    /// Builds a plant from nominal parameters; the damping entries of
    /// `nominal_theta` are multiplied by `friction_coeff`.
    pub fn new(basis: Basis, nominal_theta: &[f64], friction_coeff: f64) -> Result<Self> {
        if !(friction_coeff > 0.0) || !friction_coeff.is_finite() {
            return Err(Error::config(format!(
                "friction_coeff must be positive and finite, got {friction_coeff}"
            )));
        }
        if nominal_theta.len() != basis.len() {
            return Err(Error::Dimension {
                context: "plant theta",
                expected: basis.len(),
                got: nominal_theta.len(),
            });
        }
        ensure_finite("plant theta", nominal_theta)?;
        if let Basis::TanhHidden { weights } = &basis {
            ensure_finite("plant basis weights", &weights.concat())?;
        }
        let theta = nominal_theta
            .iter()
            .zip(basis.damping_mask())
            .map(|(&th, damp)| if damp { th * friction_coeff } else { th })
            .collect();
        Ok(Self {
            basis,
            theta,
            friction_coeff,
        })
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    /// Effective (friction-scaled) true parameters.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn friction_coeff(&self) -> f64 {
        self.friction_coeff
    }

    pub fn input_channel(&self) -> [f64; 2] {
        INPUT_CHANNEL
    }

    /// `f0(x)·θ`, the part of `x2'` the identifier has to learn.
    pub fn nonlinearity(&self, state: PlantState) -> f64 {
        self.basis
            .eval(state)
            .iter()
            .zip(&self.theta)
            .map(|(f, th)| f * th)
            .sum()
    }
}

/// The canonical benchmark plant with the given ground-friction multiplier.
pub fn nominal_parking_plant(friction_coeff: f64) -> Result<PlantModel> {
    PlantModel::new(Basis::Damping, &NOMINAL_THETA, friction_coeff)
}

/// `(x1', x2') = (x2, f0(x)·θ + u)`.
pub fn plant_derivative(state: PlantState, u: f64, model: &PlantModel) -> Result<[f64; 2]> {
    ensure_finite("plant state", &state.as_array())?;
    ensure_finite("plant input", &[u])?;
    Ok([state.x2, model.nonlinearity(state) + u])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example_plant() -> PlantModel {
        PlantModel::new(Basis::Damping, &[-1.0, -0.5, -0.2], 1.0).unwrap()
    }

    #[test]
    fn zero_dynamics() {
        let m = PlantModel::new(Basis::Damping, &[0.0; 3], 1.0).unwrap();
        assert_eq!(plant_derivative(PlantState::new(0.0, 0.0), 0.0, &m).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn first_component_is_velocity() {
        let d = plant_derivative(PlantState::new(1.0, 2.0), 0.0, &example_plant()).unwrap();
        assert_eq!(d[0], 2.0);
    }

    #[test]
    fn hand_evaluated_derivative() {
        // 0.3 + (-1)(0.5) + (-0.5)(1.0) + (-0.2)(1.0) = -0.9
        let d = plant_derivative(PlantState::new(0.5, 1.0), 0.3, &example_plant()).unwrap();
        assert_eq!(d[0], 1.0);
        assert!((d[1] - -0.9).abs() < 1e-15);
    }

    #[test]
    fn non_finite_inputs_rejected() {
        let m = example_plant();
        assert!(plant_derivative(PlantState::new(f64::NAN, 0.0), 0.0, &m).is_err());
        assert!(plant_derivative(PlantState::new(0.0, 0.0), f64::INFINITY, &m).is_err());
    }

    #[test]
    fn nominal_plant_and_friction_scaling() {
        let nominal = nominal_parking_plant(1.0).unwrap();
        assert_eq!(nominal.theta(), &NOMINAL_THETA);
        let rough = nominal_parking_plant(5.0).unwrap();
        assert_eq!(rough.theta()[0], NOMINAL_THETA[0]);
        assert_eq!(rough.theta()[1], NOMINAL_THETA[1] * 5.0);
        assert_eq!(rough.theta()[2], NOMINAL_THETA[2] * 5.0);
        assert_eq!(nominal_parking_plant(2.5).unwrap(), nominal_parking_plant(2.5).unwrap());
        assert_eq!(nominal.input_channel(), [0.0, 1.0]);
    }

    #[test]
    fn non_positive_friction_rejected() {
        assert!(nominal_parking_plant(0.0).is_err());
        assert!(nominal_parking_plant(-1.0).is_err());
        assert!(nominal_parking_plant(f64::NAN).is_err());
    }

    #[test]
    fn theta_length_checked() {
        assert!(PlantModel::new(Basis::Damping, &[1.0, 2.0], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn input_enters_additively(x1 in -5.0..5.0f64, x2 in -5.0..5.0f64,
                                   u1 in -10.0..10.0f64, u2 in -10.0..10.0f64) {
            let m = example_plant();
            let s = PlantState::new(x1, x2);
            let a = plant_derivative(s, u1 + u2, &m).unwrap()[1];
            let b = plant_derivative(s, u1, &m).unwrap()[1];
            prop_assert!(((a - b) - u2).abs() < 1e-9);
        }

        #[test]
        fn deterministic_and_finite(x1 in -1e3..1e3f64, x2 in -1e3..1e3f64, u in -1e3..1e3f64) {
            let m = nominal_parking_plant(3.0).unwrap();
            let s = PlantState::new(x1, x2);
            let a = plant_derivative(s, u, &m).unwrap();
            prop_assert_eq!(a, plant_derivative(s, u, &m).unwrap());
            prop_assert!(a.iter().all(|v| v.is_finite()));
        }
    }
}
