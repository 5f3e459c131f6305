//! Key-rate formulas and the choice of signal intensity.
//!
//! Rates are per emitted pulse. Negative values mean no key; they are kept
//! signed so callers can locate the zero crossing.

use crate::bounds::asymptotic_bounds;
use crate::error::{check_range, Error, Result};
use crate::model::{overall_gain, overall_qber, ExperimentParams, YieldModel};
use crate::numerics::{find_root, maximize_scalar, Maximum, SearchConfig};

/// Sifting factor of standard BB84.
pub const Q_BB84: f64 = 0.5;

/// Bracket for every intensity maximization.
pub const MU_BRACKET: (f64, f64) = (0.01, 1.5);

/// `H2(x) = -x log2 x - (1 - x) log2 (1 - x)`, zero at both ends.
pub fn binary_entropy(x: f64) -> Result<f64> {
    check_range("x", x, (0.0..=1.0).contains(&x), "in [0, 1]")?;
    Ok(h2(x))
}

pub(crate) fn h2(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// Inputs of the strong key-rate formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateInputs {
    pub q: f64,
    pub q_mu: f64,
    pub e_mu: f64,
    pub q1_lower: f64,
    pub e1_upper: f64,
    pub f_ec: f64,
}

impl KeyRateInputs {
    pub fn validate(&self) -> Result<()> {
        check_range("q", self.q, self.q > 0.0 && self.q <= 1.0, "in (0, 1]")?;
        check_range("q_mu", self.q_mu, (0.0..=1.0).contains(&self.q_mu), "in [0, 1]")?;
        check_range("e_mu", self.e_mu, (0.0..=1.0).contains(&self.e_mu), "in [0, 1]")?;
        check_range(
            "q1_lower",
            self.q1_lower,
            self.q1_lower >= 0.0 && self.q1_lower <= self.q_mu,
            "in [0, q_mu]",
        )?;
        check_range("e1_upper", self.e1_upper, (0.0..=1.0).contains(&self.e1_upper), "in [0, 1]")?;
        check_range("f_ec", self.f_ec, self.f_ec >= 1.0, ">= 1")
    }
}

/// `q { -Q_mu f H2(E_mu) + Q1 [1 - H2(e1)] }`. An `e1_upper` above 1/2 counts as 1/2.
pub fn key_rate_strong(inputs: &KeyRateInputs) -> f64 {
    let e1 = inputs.e1_upper.min(0.5);
    inputs.q * (-inputs.q_mu * inputs.f_ec * h2(inputs.e_mu) + inputs.q1_lower * (1.0 - h2(e1)))
}

/// Inputs of the tagged-fraction key-rate formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WangRateInputs {
    pub q: f64,
    pub q_mu: f64,
    pub e_mu: f64,
    pub delta: f64,
    pub f_ec: f64,
}

/// `q Q_mu { -f H2(E_mu) + (1 - Delta) [1 - H2(E_mu / (1 - Delta))] }`.
///
/// `Delta >= 1` or `E_mu / (1 - Delta) > 1` leaves nothing to distill and
/// returns `-inf`. Between 1/2 and 1 the ratio counts as 1/2.
pub fn key_rate_wang(inputs: &WangRateInputs) -> f64 {
    let untagged = 1.0 - inputs.delta;
    if untagged <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let ratio = inputs.e_mu / untagged;
    if ratio > 1.0 {
        return f64::NEG_INFINITY;
    }
    inputs.q * inputs.q_mu * (-inputs.f_ec * h2(inputs.e_mu) + untagged * (1.0 - h2(ratio.min(0.5))))
}

/// `f H2(e_d) / (1 - H2(e_d))`, the right-hand side of the intensity equation.
fn optimal_mu_rhs(params: &ExperimentParams) -> f64 {
    let h = h2(params.e_detector);
    params.f_ec * h / (1.0 - h)
}

/// Signal intensity solving `(1 - mu) e^-mu = f H2(e_d) / (1 - H2(e_d))`.
///
/// This maximizes the leading-order rate of the asymptotic protocol and does
/// not depend on the distance.
pub fn optimal_mu(params: &ExperimentParams) -> Result<f64> {
    params.validate()?;
    let rhs = optimal_mu_rhs(params);
    if rhs >= 1.0 || !rhs.is_finite() {
        return Err(Error::NoPositiveRate { rhs });
    }
    if rhs == 0.0 {
        return Ok(1.0);
    }
    find_root(
        |mu| (1.0 - mu) * (-mu).exp() - rhs,
        &SearchConfig::new(0.0, 1.0).abs_tol(1e-13),
    )
}

/// Leading-order rate `-eta mu f H2(e_d) + eta mu e^-mu [1 - H2(e_d)]`.
pub fn approximate_rate(mu: f64, params: &ExperimentParams, eta: f64) -> f64 {
    let h = h2(params.e_detector);
    -eta * mu * params.f_ec * h + eta * mu * (-mu).exp() * (1.0 - h)
}

/// Strong rate with the asymptotic bounds at signal intensity `mu`.
pub fn asymptotic_rate(params: &ExperimentParams, eta: f64, mu: f64, model: YieldModel) -> f64 {
    let q_mu = overall_gain(mu, params, eta);
    let e_mu = overall_qber(mu, params, eta).unwrap_or(0.5);
    let b = asymptotic_bounds(params, eta, mu, model);
    key_rate_strong(&KeyRateInputs {
        q: Q_BB84,
        q_mu,
        e_mu,
        q1_lower: b.q1_lower,
        e1_upper: b.e1_upper,
        f_ec: params.f_ec,
    })
}

/// Intensity maximizing the asymptotic rate without the leading-order
/// approximation, at one channel transmittance.
pub fn optimal_mu_exact(params: &ExperimentParams, eta: f64, model: YieldModel) -> Result<Maximum> {
    maximize_scalar(
        |mu| asymptotic_rate(params, eta, mu, model),
        &SearchConfig::new(MU_BRACKET.0, MU_BRACKET.1).rel_tol(1e-9),
    )
}

/// Tagged-fraction rate in its best case, `Delta = mu`.
pub fn wang_asymptotic_rate(params: &ExperimentParams, eta: f64, mu: f64) -> f64 {
    let q_mu = overall_gain(mu, params, eta);
    let Ok(e_mu) = overall_qber(mu, params, eta) else {
        return f64::NEG_INFINITY;
    };
    key_rate_wang(&WangRateInputs {
        q: Q_BB84,
        q_mu,
        e_mu,
        delta: mu,
        f_ec: params.f_ec,
    })
}

/// Intensity maximizing [`wang_asymptotic_rate`] at one channel transmittance.
///
/// The search stays below `mu = 1` where the tagged fraction is meaningful.
pub fn optimal_mu_wang(params: &ExperimentParams, eta: f64) -> Result<Maximum> {
    maximize_scalar(
        |mu| wang_asymptotic_rate(params, eta, mu),
        &SearchConfig::new(MU_BRACKET.0, 0.99).rel_tol(1e-9),
    )
}
