//! Two-input fuzzy controller with adjustable consequents.
//!
//! Inputs are the tracking error `e` and its rate `ė`. Each input has a
//! family of triangular memberships (shoulders at the universe ends), rules
//! fire through the product t-norm, and the crisp output is the center
//! average `αᵀξ` with `ξ = w / Σw`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FIVE_LABELS: [&str; 5] = ["NB", "NS", "ZE", "PS", "PB"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Triangle,
    /// Full membership left of the peak.
    LeftShoulder,
    /// Full membership right of the peak.
    RightShoulder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub label: String,
    pub left: f64,
    pub peak: f64,
    pub right: f64,
    pub shape: Shape,
}

impl Membership {
    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.peak {
            if self.shape == Shape::LeftShoulder {
                1.0
            } else if x <= self.left {
                0.0
            } else {
                (x - self.left) / (self.peak - self.left)
            }
        } else if self.shape == Shape::RightShoulder {
            1.0
        } else if x >= self.right {
            0.0
        } else {
            (self.right - x) / (self.right - self.peak)
        }
    }

    /// Largest slope magnitude, used for continuity bounds.
    pub fn max_slope(&self) -> f64 {
        let l = if self.shape == Shape::LeftShoulder {
            0.0
        } else {
            1.0 / (self.peak - self.left)
        };
        let r = if self.shape == Shape::RightShoulder {
            0.0
        } else {
            1.0 / (self.right - self.peak)
        };
        l.max(r)
    }
}

/// Memberships for one input, ordered by peak.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputPartition(pub Vec<Membership>);

impl InputPartition {
    /// Evenly spaced labels on `[-universe, universe]`, each triangle's feet on
    /// its neighbours' peaks, shoulders at both ends.
    pub fn symmetric(universe: f64, labels: &[&str]) -> Result<Self> {
        if !(universe > 0.0) || !universe.is_finite() {
            return Err(Error::config(format!("membership universe must be positive, got {universe}")));
        }
        let n = labels.len();
        if n < 2 {
            return Err(Error::config("need at least two labels per input"));
        }
        let step = 2.0 * universe / (n - 1) as f64;
        let peak = |k: usize| -universe + step * k as f64;
        let fns = labels
            .iter()
            .enumerate()
            .map(|(k, label)| Membership {
                label: label.to_string(),
                left: if k == 0 { peak(0) - step } else { peak(k - 1) },
                peak: peak(k),
                right: peak(k + 1),
                shape: if k == 0 {
                    Shape::LeftShoulder
                } else if k == n - 1 {
                    Shape::RightShoulder
                } else {
                    Shape::Triangle
                },
            })
            .collect();
        Self::new(fns)
    }

    pub fn new(fns: Vec<Membership>) -> Result<Self> {
        if fns.len() < 2 {
            return Err(Error::config("need at least two memberships per input"));
        }
        for m in &fns {
            if !(m.left < m.peak && m.peak < m.right)
                || ![m.left, m.peak, m.right].iter().all(|v| v.is_finite())
            {
                return Err(Error::config(format!(
                    "membership {} must satisfy left < peak < right",
                    m.label
                )));
            }
        }
        for pair in fns.windows(2) {
            if pair[1].peak <= pair[0].peak {
                return Err(Error::config(format!(
                    "membership peaks must increase ({} then {})",
                    pair[0].label, pair[1].label
                )));
            }
            if pair[1].left >= pair[0].right {
                return Err(Error::config(format!(
                    "gap between {} and {} leaves inputs uncovered",
                    pair[0].label, pair[1].label
                )));
            }
        }
        if fns[0].shape != Shape::LeftShoulder || fns[fns.len() - 1].shape != Shape::RightShoulder {
            return Err(Error::config(
                "first membership must be a left shoulder and last a right shoulder",
            ));
        }
        Ok(Self(fns))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn eval(&self, x: f64) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().map(move |m| m.eval(x))
    }

    pub fn peaks(&self) -> Vec<f64> {
        self.0.iter().map(|m| m.peak).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipFamily {
    pub error: InputPartition,
    pub error_rate: InputPartition,
}

impl MembershipFamily {
    /// 5 × 5 symmetric layout.
    pub fn symmetric(e_universe: f64, edot_universe: f64) -> Result<Self> {
        Ok(Self {
            error: InputPartition::symmetric(e_universe, &FIVE_LABELS)?,
            error_rate: InputPartition::symmetric(edot_universe, &FIVE_LABELS)?,
        })
    }

    pub fn n_rules(&self) -> usize {
        self.error.len() * self.error_rate.len()
    }
}

/// One rule: a label index per input and the consequent it drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub error_label: usize,
    pub rate_label: usize,
    pub consequent: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FuzzyController {
    memberships: MembershipFamily,
    rules: Vec<Rule>,
    pub alpha: Vec<f64>,
}

impl FuzzyController {
    /// Complete cross-product rule base; rule `i·n_rate + j` pairs error label
    /// `i` with rate label `j` and owns consequent of the same index.
    pub fn new(memberships: MembershipFamily, alpha: Vec<f64>) -> Result<Self> {
        let n_rate = memberships.error_rate.len();
        let rules = (0..memberships.error.len())
            .flat_map(|i| (0..n_rate).map(move |j| (i, j)))
            .map(|(i, j)| Rule {
                error_label: i,
                rate_label: j,
                consequent: i * n_rate + j,
            })
            .collect::<Vec<_>>();
        if alpha.len() != rules.len() {
            return Err(Error::Dimension {
                context: "fuzzy consequents",
                expected: rules.len(),
                got: alpha.len(),
            });
        }
        crate::error::ensure_finite("fuzzy consequents", &alpha)?;
        Ok(Self {
            memberships,
            rules,
            alpha,
        })
    }

    pub fn memberships(&self) -> &MembershipFamily {
        &self.memberships
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn n_rules(&self) -> usize {
        self.rules.len()
    }

    pub fn regressor_at(&self, e: f64, edot: f64) -> Result<Regressor> {
        regressor(&fire(self, e, edot)).map_err(|err| match err {
            Error::Coverage { .. } => Error::Coverage { e, edot },
            other => other,
        })
    }

    pub fn output(&self, e: f64, edot: f64) -> Result<f64> {
        defuzzify(&self.alpha, &self.regressor_at(e, edot)?)
    }
}

/// Raw firing strengths, product t-norm.
pub fn fire(ctrl: &FuzzyController, e: f64, edot: f64) -> Vec<f64> {
    let mu_e: Vec<f64> = ctrl.memberships.error.eval(e).collect();
    let mu_d: Vec<f64> = ctrl.memberships.error_rate.eval(edot).collect();
    let mut w = vec![0.0; ctrl.rules.len()];
    for r in &ctrl.rules {
        w[r.consequent] = mu_e[r.error_label] * mu_d[r.rate_label];
    }
    w
}

/// Normalized firing strengths; a point on the probability simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct Regressor(Vec<f64>);

impl Regressor {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn regressor(w: &[f64]) -> Result<Regressor> {
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Coverage {
            e: f64::NAN,
            edot: f64::NAN,
        });
    }
    Ok(Regressor(w.iter().map(|wi| wi / total).collect()))
}

/// `αᵀξ`.
pub fn defuzzify(alpha: &[f64], xi: &Regressor) -> Result<f64> {
    if alpha.len() != xi.len() {
        return Err(Error::Dimension {
            context: "defuzzify",
            expected: xi.len(),
            got: alpha.len(),
        });
    }
    Ok(crate::identifier::dot(alpha, xi.as_slice()))
}

/// Consequents that make the controller a saturated PD law
/// `u = −kp·e − kd·ė` (exact inside the universes for a Ruspini partition).
pub fn pd_table(family: &MembershipFamily, kp: f64, kd: f64) -> Vec<f64> {
    let pe = family.error.peaks();
    let pd = family.error_rate.peaks();
    pe.iter()
        .flat_map(|e| pd.iter().map(move |d| -(kp * e + kd * d)))
        .collect()
}
