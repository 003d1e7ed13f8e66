//! Classic fixed-step fourth-order Runge–Kutta over a flat state vector.

use crate::error::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum StepError<E> {
    /// The derivative map itself failed.
    Rhs(E),
    /// A stage or the result produced NaN/Inf at `index`.
    NonFinite { stage: usize, index: usize },
    BadStep(f64),
}

impl StepError<Error> {
    /// Converts to a crate error, naming the offending entry with `name`.
    pub fn into_error(self, t: f64, name: impl Fn(usize) -> String) -> Error {
        match self {
            StepError::Rhs(e) => e,
            StepError::NonFinite { index, .. } => Error::Integration {
                t,
                component: name(index),
            },
            StepError::BadStep(dt) => Error::Config(format!("step size must be positive, got {dt}")),
        }
    }
}

fn check(v: &[f64]) -> Result<(), usize> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(index),
        None => Ok(()),
    }
}

/// One RK4 step of `y' = f(t, y)` from `t` to `t + dt`.
pub fn rk4_step<F, E>(mut f: F, t: f64, y: &[f64], dt: f64) -> Result<Vec<f64>, StepError<E>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
{
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(StepError::BadStep(dt));
    }
    let n = y.len();
    let nonfinite = |stage| move |index| StepError::NonFinite { stage, index };
    check(y).map_err(nonfinite(0))?;

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let h = 0.5 * dt;

    f(t, y, &mut k1).map_err(StepError::Rhs)?;
    check(&k1).map_err(nonfinite(1))?;
    for i in 0..n {
        tmp[i] = y[i] + h * k1[i];
    }
    f(t + h, &tmp, &mut k2).map_err(StepError::Rhs)?;
    check(&k2).map_err(nonfinite(2))?;
    for i in 0..n {
        tmp[i] = y[i] + h * k2[i];
    }
    f(t + h, &tmp, &mut k3).map_err(StepError::Rhs)?;
    check(&k3).map_err(nonfinite(3))?;
    for i in 0..n {
        tmp[i] = y[i] + dt * k3[i];
    }
    f(t + dt, &tmp, &mut k4).map_err(StepError::Rhs)?;
    check(&k4).map_err(nonfinite(4))?;

    let next: Vec<f64> = (0..n)
        .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    check(&next).map_err(nonfinite(5))?;
    Ok(next)
}
