//! Decoy-state estimators for the single-photon yield `Y1` and error rate `e1`.
//!
//! Every estimator takes observed gains and QBERs (see
//! [`ObservedRates`]) and returns a [`BoundsEstimate`]: a lower bound on
//! `Y1` and `Q1 = Y1 mu e^-mu`, and an upper bound on `e1`. The bounds hold
//! for any photon-number-dependent attack, so they are what the key-rate
//! formula may safely use.
//!
//! | estimator | data needed | background |
//! |---|---|---|
//! | [`two_decoy_bounds`] | signal, two decoys | lower bound from the two decoys |
//! | [`vacuum_weak_bounds`] | signal, weak decoy, vacuum | measured directly |
//! | [`one_decoy_simple`] | signal, one decoy | upper bound from the signal QBER |
//! | [`one_decoy_trial`] | signal, one decoy | set to zero |
//! | [`asymptotic_bounds`] | channel model | exact |

pub mod appendix;
pub mod oracle;

use std::fmt;

use crate::error::{check_range, Error, Result};
use crate::model::{ExperimentParams, ObservedRates, YieldModel, E0};

/// Signal intensity `mu` and decoy intensities `nu1 > nu2 >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolIntensities {
    pub mu: f64,
    pub nu1: f64,
    pub nu2: f64,
}

impl ProtocolIntensities {
    /// Requires `0 <= nu2 < nu1` and `nu1 + nu2 < mu`.
    pub fn new(mu: f64, nu1: f64, nu2: f64) -> Result<Self> {
        check_range("mu", mu, mu > 0.0 && mu.is_finite(), "> 0")?;
        check_range("nu1", nu1, nu1 > 0.0 && nu1.is_finite(), "> 0")?;
        check_range("nu2", nu2, nu2 >= 0.0 && nu2.is_finite(), ">= 0")?;
        let invalid = |constraint| Error::InvalidIntensities {
            constraint,
            mu,
            nu1,
            nu2,
        };
        if nu2 >= nu1 {
            return Err(invalid("ν₂ < ν₁"));
        }
        if nu1 + nu2 >= mu {
            return Err(invalid("ν₁ + ν₂ < μ"));
        }
        Ok(Self { mu, nu1, nu2 })
    }

    /// Weak decoy `nu` plus a vacuum decoy.
    pub fn vacuum_weak(mu: f64, nu: f64) -> Result<Self> {
        Self::new(mu, nu, 0.0)
    }

    /// `mu nu1 - mu nu2 - nu1^2 + nu2^2 = (nu1 - nu2)(mu - nu1 - nu2)`, positive by construction.
    fn denominator(&self) -> f64 {
        (self.nu1 - self.nu2) * (self.mu - self.nu1 - self.nu2)
    }
}

/// Which procedure produced a [`BoundsEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    TwoDecoy,
    VacuumWeak,
    OneDecoySimple,
    OneDecoyTrial,
    Asymptotic,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::TwoDecoy => "two-decoy",
            Estimator::VacuumWeak => "vacuum-weak",
            Estimator::OneDecoySimple => "one-decoy-simple",
            Estimator::OneDecoyTrial => "one-decoy-trial",
            Estimator::Asymptotic => "asymptotic",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Bounds on the single-photon quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsEstimate {
    pub y0_lower: f64,
    /// Floored at 0.
    pub y1_lower: f64,
    /// `y1_lower * mu * e^-mu`.
    pub q1_lower: f64,
    /// Capped at 0.5.
    pub e1_upper: f64,
    pub estimator: Estimator,
}

impl BoundsEstimate {
    fn from_parts(y0: f64, y1_raw: f64, e1_raw: f64, mu: f64, estimator: Estimator) -> Self {
        let y1 = y1_raw.max(0.0);
        let e1 = if y1 > 0.0 { e1_raw.clamp(0.0, 0.5) } else { 0.5 };
        Self {
            y0_lower: y0.max(0.0),
            y1_lower: y1,
            q1_lower: y1 * mu * (-mu).exp(),
            e1_upper: e1,
            estimator,
        }
    }

    /// No single-photon credit can be claimed.
    pub fn is_vacuous(&self) -> bool {
        self.y1_lower <= 0.0 || self.e1_upper >= 0.5
    }
}

/// Lower bound on the background yield from two decoys:
/// `max{(nu1 Q2 e^nu2 - nu2 Q1 e^nu1) / (nu1 - nu2), 0}`.
///
/// With a vacuum decoy this is the vacuum gain itself.
pub fn y0_lower(obs: &ObservedRates, intensities: &ProtocolIntensities) -> Result<f64> {
    let ProtocolIntensities { nu1, nu2, .. } = *intensities;
    let d2 = obs.decoy2()?;
    let value = (nu1 * d2.gain * nu2.exp() - nu2 * obs.decoy1.gain * nu1.exp()) / (nu1 - nu2);
    Ok(value.max(0.0))
}

fn y1_bracket(obs: &ObservedRates, i: &ProtocolIntensities, y0: f64) -> Result<f64> {
    let d2 = obs.decoy2()?;
    let ProtocolIntensities { mu, nu1, nu2 } = *i;
    let bracket = obs.decoy1.gain * nu1.exp()
        - d2.gain * nu2.exp()
        - (nu1 * nu1 - nu2 * nu2) / (mu * mu) * (obs.signal.gain * mu.exp() - y0);
    Ok(mu / i.denominator() * bracket)
}

/// Two-decoy lower bound on `Y1` before flooring at zero.
pub fn y1_lower_two_decoy_raw(obs: &ObservedRates, intensities: &ProtocolIntensities) -> Result<f64> {
    let y0 = y0_lower(obs, intensities)?;
    y1_bracket(obs, intensities, y0)
}

/// Two-decoy lower bound on `Y1`, floored at zero.
pub fn y1_lower_two_decoy(obs: &ObservedRates, intensities: &ProtocolIntensities) -> Result<f64> {
    Ok(y1_lower_two_decoy_raw(obs, intensities)?.max(0.0))
}

/// `Q1^L = Y1^L mu e^-mu`.
pub fn q1_lower_two_decoy(obs: &ObservedRates, intensities: &ProtocolIntensities) -> Result<f64> {
    let mu = intensities.mu;
    Ok(y1_lower_two_decoy(obs, intensities)? * mu * (-mu).exp())
}

/// `(E1 Q1 e^nu1 - E2 Q2 e^nu2) / (nu1 - nu2)`, an upper bound on `e1 Y1`.
pub fn e1_numerator_two_decoy(obs: &ObservedRates, intensities: &ProtocolIntensities) -> Result<f64> {
    let d2 = obs.decoy2()?;
    let ProtocolIntensities { nu1, nu2, .. } = *intensities;
    Ok((obs.decoy1.error_gain() * nu1.exp() - d2.error_gain() * nu2.exp()) / (nu1 - nu2))
}

/// Upper bound on `e1` for a given `Y1^L`, uncapped.
pub fn e1_upper_two_decoy_raw(
    obs: &ObservedRates,
    intensities: &ProtocolIntensities,
    y1_lower: f64,
) -> Result<f64> {
    if y1_lower <= 0.0 {
        return Err(Error::UndefinedRate("e1 upper bound"));
    }
    Ok(e1_numerator_two_decoy(obs, intensities)? / y1_lower)
}

/// Upper bound on `e1`, capped at 0.5. A non-positive `y1_lower` gives 0.5.
pub fn e1_upper_two_decoy(
    obs: &ObservedRates,
    intensities: &ProtocolIntensities,
    y1_lower: f64,
) -> Result<f64> {
    match e1_upper_two_decoy_raw(obs, intensities, y1_lower) {
        Ok(e) => Ok(e.clamp(0.0, 0.5)),
        Err(Error::UndefinedRate(_)) => Ok(0.5),
        Err(e) => Err(e),
    }
}

pub fn two_decoy_bounds(obs: &ObservedRates, intensities: &ProtocolIntensities) -> Result<BoundsEstimate> {
    let y0 = y0_lower(obs, intensities)?;
    let y1 = y1_bracket(obs, intensities, y0)?;
    let e1 = if y1 > 0.0 {
        e1_numerator_two_decoy(obs, intensities)? / y1
    } else {
        0.5
    };
    Ok(BoundsEstimate::from_parts(y0, y1, e1, intensities.mu, Estimator::TwoDecoy))
}

fn check_weak(mu: f64, nu: f64) -> Result<()> {
    ProtocolIntensities::new(mu, nu, 0.0).map(|_| ())
}

/// Weak decoy `nu` plus vacuum. The vacuum observation (`decoy2`) supplies
/// `Y0` and `E0 Y0` directly.
pub fn vacuum_weak_bounds(obs: &ObservedRates, mu: f64, nu: f64) -> Result<BoundsEstimate> {
    check_weak(mu, nu)?;
    let vacuum = obs.decoy2()?;
    let y0 = vacuum.gain;
    let q_nu = obs.decoy1.gain;
    let q_mu = obs.signal.gain;
    let y1 = mu / (mu * nu - nu * nu)
        * (q_nu * nu.exp() - q_mu * mu.exp() * nu * nu / (mu * mu) - (mu * mu - nu * nu) / (mu * mu) * y0);
    let e1 = (obs.decoy1.error_gain() * nu.exp() - vacuum.error_gain()) / (y1 * nu);
    Ok(BoundsEstimate::from_parts(y0, y1, e1, mu, Estimator::VacuumWeak))
}

/// Upper bound on the fraction of detected `nu` pulses that carried more than
/// one photon, clamped to `[0, 1]`. `Y0` is the vacuum gain.
pub fn wang_delta(obs: &ObservedRates, mu: f64, nu: f64) -> Result<f64> {
    check_weak(mu, nu)?;
    let y0 = obs.decoy2()?.gain;
    let q_mu = obs.signal.gain;
    let q_nu = obs.decoy1.gain;
    if q_nu <= 0.0 {
        return Err(Error::UndefinedRate("tagged fraction"));
    }
    let delta = nu / (mu - nu) * (nu * (-nu).exp() * q_mu / (mu * (-mu).exp() * q_nu) - 1.0)
        + nu * (-nu).exp() * y0 / (mu * q_nu);
    Ok(delta.clamp(0.0, 1.0))
}

/// The same tagged-fraction bound written in the original labelling: signal
/// intensity `mu`, stronger decoy `mu_prime`, unclamped.
pub fn wang_delta_original(mu: f64, mu_prime: f64, q_mu: f64, q_mu_prime: f64, y0: f64) -> f64 {
    mu / (mu_prime - mu) * (mu * (-mu).exp() * q_mu_prime / (mu_prime * (-mu_prime).exp() * q_mu) - 1.0)
        + mu * (-mu).exp() * y0 / (mu_prime * q_mu)
}

/// One decoy, background bounded above by `E_mu Q_mu e^mu / e0`.
///
/// `y0_lower` of the result is 0: nothing bounds the background from below.
pub fn one_decoy_simple(obs: &ObservedRates, mu: f64, nu: f64) -> Result<BoundsEstimate> {
    check_weak(mu, nu)?;
    let q_mu = obs.signal.gain;
    let q_nu = obs.decoy1.gain;
    let y0_upper = obs.signal.error_gain() * mu.exp() / E0;
    let y1 = mu / (mu * nu - nu * nu)
        * (q_nu * nu.exp() - q_mu * mu.exp() * nu * nu / (mu * mu) - (mu * mu - nu * nu) / (mu * mu) * y0_upper);
    let e1 = obs.signal.error_gain() * mu.exp() / (y1 * mu);
    Ok(BoundsEstimate::from_parts(0.0, y1, e1, mu, Estimator::OneDecoySimple))
}

/// One decoy, background set to zero in both bounds.
pub fn one_decoy_trial(obs: &ObservedRates, mu: f64, nu: f64) -> Result<BoundsEstimate> {
    check_weak(mu, nu)?;
    let q_mu = obs.signal.gain;
    let q_nu = obs.decoy1.gain;
    let y1 = mu / (mu * nu - nu * nu) * (q_nu * nu.exp() - q_mu * mu.exp() * nu * nu / (mu * mu));
    let e1 = obs.decoy1.error_gain() * nu.exp() / (y1 * nu);
    Ok(BoundsEstimate::from_parts(0.0, y1, e1, mu, Estimator::OneDecoyTrial))
}

/// Limit of the two-decoy bounds as both decoys go to zero: the model's own
/// `Y1` and `e1`.
pub fn asymptotic_bounds(params: &ExperimentParams, eta: f64, mu: f64, model: YieldModel) -> BoundsEstimate {
    let y1 = crate::model::yield_i(params, eta, 1, model);
    let e1 = if y1 > 0.0 {
        (E0 * params.y0 + params.e_detector * eta) / y1
    } else {
        0.5
    };
    BoundsEstimate::from_parts(params.y0, y1, e1, mu, Estimator::Asymptotic)
}

/// Relative distance of finite-decoy bounds from their asymptotic values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationReport {
    /// `(Y1^asym - Y1^L) / Y1^asym`.
    pub beta_y1: f64,
    /// `(e1^U - e1^asym) / e1^asym`.
    pub beta_e1: f64,
}

pub fn deviation_report(finite: &BoundsEstimate, asymptotic: &BoundsEstimate) -> Result<DeviationReport> {
    if asymptotic.y1_lower <= 0.0 {
        return Err(Error::DegenerateAsymptote("Y1"));
    }
    if asymptotic.e1_upper <= 0.0 {
        return Err(Error::DegenerateAsymptote("e1"));
    }
    Ok(DeviationReport {
        beta_y1: (asymptotic.y1_lower - finite.y1_lower) / asymptotic.y1_lower,
        beta_e1: (finite.e1_upper - asymptotic.e1_upper) / asymptotic.e1_upper,
    })
}

/// Leading-order deviations for small decoys and `eta << 1`.
///
/// `Y1 beta_Y1 ~ (e^mu - 1 - mu - mu^2/2)(1/(mu - s) - 1/mu) Y0 + (e^mu - 1 - mu) s/(mu - s) eta`
/// and `e1 beta_e1 ~ e1 beta_Y1 + s (e1 - e0 Y0 / (2 Y1))` with `s = nu1 + nu2`.
pub fn first_order_deviation(params: &ExperimentParams, eta: f64, intensities: &ProtocolIntensities) -> DeviationReport {
    let ProtocolIntensities { mu, nu1, nu2 } = *intensities;
    let s = nu1 + nu2;
    let y0 = params.y0;
    let y1 = y0 + eta;
    let e1 = (E0 * y0 + params.e_detector * eta) / y1;
    let em1 = mu.exp_m1();
    let y1_shift = (em1 - mu - mu * mu / 2.0) * (1.0 / (mu - s) - 1.0 / mu) * y0 + (em1 - mu) * s / (mu - s) * eta;
    let beta_y1 = y1_shift / y1;
    let beta_e1 = beta_y1 + s * (e1 - E0 * y0 / (2.0 * y1)) / e1;
    DeviationReport { beta_y1, beta_e1 }
}
