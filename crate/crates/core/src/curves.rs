//! Key rate as a function of fiber length for noiseless (infinite-data)
//! protocols, and the maximal secure distance.

use rayon::prelude::*;

use crate::bounds::{
    one_decoy_simple, one_decoy_trial, two_decoy_bounds, vacuum_weak_bounds, BoundsEstimate, ProtocolIntensities,
};
use crate::error::Result;
use crate::model::{
    observe_with, simulate_observations_with, transmittance, ExperimentParams, ObservedRates, YieldModel,
};
use crate::numerics::positive_until;
use crate::rate::{asymptotic_rate, key_rate_strong, wang_asymptotic_rate, KeyRateInputs, Q_BB84};

/// Resolution of maximal-distance searches, km.
pub const DISTANCE_TOL: f64 = 0.01;
/// Upper end of maximal-distance searches, km.
pub const DISTANCE_LIMIT: f64 = 500.0;

/// A protocol whose rate is a deterministic function of the channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Protocol {
    /// Infinitely many decoys: the model's own `Y1` and `e1`.
    Asymptotic { mu: f64 },
    TwoDecoy(ProtocolIntensities),
    VacuumWeak { mu: f64, nu: f64 },
    OneDecoySimple { mu: f64, nu: f64 },
    OneDecoyTrial { mu: f64, nu: f64 },
    /// Tagged-fraction rate with `Delta = mu`.
    WangAsymptotic { mu: f64 },
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Asymptotic { .. } => "asymptotic",
            Protocol::TwoDecoy(_) => "two-decoy",
            Protocol::VacuumWeak { .. } => "vacuum-weak",
            Protocol::OneDecoySimple { .. } => "one-decoy-simple",
            Protocol::OneDecoyTrial { .. } => "one-decoy-trial",
            Protocol::WangAsymptotic { .. } => "wang",
        }
    }

    /// Checks the intensities once so that rate evaluation cannot fail later.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Protocol::Asymptotic { mu } | Protocol::WangAsymptotic { mu } => {
                crate::error::check_range("mu", mu, mu > 0.0 && mu.is_finite(), "> 0")
            }
            Protocol::TwoDecoy(i) => ProtocolIntensities::new(i.mu, i.nu1, i.nu2).map(|_| ()),
            Protocol::VacuumWeak { mu, nu } | Protocol::OneDecoySimple { mu, nu } | Protocol::OneDecoyTrial { mu, nu } => {
                ProtocolIntensities::vacuum_weak(mu, nu).map(|_| ())
            }
        }
    }

    pub fn mu(&self) -> f64 {
        match *self {
            Protocol::TwoDecoy(i) => i.mu,
            Protocol::Asymptotic { mu }
            | Protocol::WangAsymptotic { mu }
            | Protocol::VacuumWeak { mu, .. }
            | Protocol::OneDecoySimple { mu, .. }
            | Protocol::OneDecoyTrial { mu, .. } => mu,
        }
    }

    /// Bounds the protocol would report on noiseless data; `None` for the
    /// tagged-fraction protocol, which does not bound `e1`.
    pub fn bounds(&self, params: &ExperimentParams, eta: f64, model: YieldModel) -> Result<Option<BoundsEstimate>> {
        let observe = |mu, nu1, nu2| -> Result<ObservedRates> {
            simulate_observations_with(params, eta, &ProtocolIntensities { mu, nu1, nu2 }, model)
        };
        Ok(Some(match *self {
            Protocol::Asymptotic { mu } => crate::bounds::asymptotic_bounds(params, eta, mu, model),
            Protocol::TwoDecoy(i) => two_decoy_bounds(&observe(i.mu, i.nu1, i.nu2)?, &i)?,
            Protocol::VacuumWeak { mu, nu } => vacuum_weak_bounds(&observe(mu, nu, 0.0)?, mu, nu)?,
            Protocol::OneDecoySimple { mu, nu } => one_decoy_simple(&observe(mu, nu, 0.0)?, mu, nu)?,
            Protocol::OneDecoyTrial { mu, nu } => one_decoy_trial(&observe(mu, nu, 0.0)?, mu, nu)?,
            Protocol::WangAsymptotic { .. } => return Ok(None),
        }))
    }

    /// Rate per pulse at transmittance `eta`; may be negative.
    pub fn rate_at_eta(&self, params: &ExperimentParams, eta: f64, model: YieldModel) -> Result<f64> {
        match *self {
            Protocol::Asymptotic { mu } => Ok(asymptotic_rate(params, eta, mu, model)),
            Protocol::WangAsymptotic { mu } => Ok(wang_asymptotic_rate(params, eta, mu)),
            _ => {
                let b = self.bounds(params, eta, model)?.expect("strong protocols carry bounds");
                let signal = observe_with(params, eta, self.mu(), model)?;
                Ok(key_rate_strong(&KeyRateInputs {
                    q: Q_BB84,
                    q_mu: signal.gain,
                    e_mu: signal.qber,
                    q1_lower: b.q1_lower,
                    e1_upper: b.e1_upper,
                    f_ec: params.f_ec,
                }))
            }
        }
    }

    pub fn rate_at(&self, params: &ExperimentParams, length: f64, model: YieldModel) -> Result<f64> {
        let eta = transmittance(params, length)?.eta;
        self.rate_at_eta(params, eta, model)
    }

    /// Fiber length where the rate first drops to zero, to [`DISTANCE_TOL`].
    /// Uses the closed-form gains the reference curves are based on.
    pub fn max_distance(&self, params: &ExperimentParams) -> Result<f64> {
        self.max_distance_with(params, YieldModel::Additive)
    }

    pub fn max_distance_with(&self, params: &ExperimentParams, model: YieldModel) -> Result<f64> {
        self.validate()?;
        positive_until(
            |l| self.rate_at(params, l, model).unwrap_or(f64::NEG_INFINITY),
            0.0,
            DISTANCE_LIMIT,
            DISTANCE_TOL,
        )
    }

    /// Rates on a grid of lengths, in grid order.
    pub fn curve(&self, params: &ExperimentParams, lengths: &[f64], model: YieldModel) -> Result<Vec<(f64, f64)>> {
        self.validate()?;
        lengths
            .par_iter()
            .map(|&l| Ok((l, self.rate_at(params, l, model)?)))
            .collect()
    }
}

/// `from, from + step, ...` up to and including `to` (within rounding).
pub fn grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    crate::error::check_range("from", from, from >= 0.0 && from.is_finite(), ">= 0")?;
    crate::error::check_range("to", to, to >= from && to.is_finite(), ">= from")?;
    crate::error::check_range("step", step, step > 0.0 && step.is_finite(), "> 0")?;
    let n = ((to - from) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| from + k as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_includes_end() {
        assert_eq!(grid(0.0, 1.0, 0.25).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(grid(3.0, 3.0, 1.0).unwrap(), vec![3.0]);
        assert!(grid(2.0, 1.0, 1.0).is_err());
        assert!(grid(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn gys_distances() {
        let gys = ExperimentParams::gys();
        let asym = Protocol::Asymptotic { mu: 0.48 }.max_distance(&gys).unwrap();
        let vw = Protocol::VacuumWeak { mu: 0.48, nu: 0.05 }.max_distance(&gys).unwrap();
        let wang = Protocol::WangAsymptotic { mu: 0.30 }.max_distance(&gys).unwrap();
        assert!((asym - 142.05).abs() < 0.5, "{asym}");
        assert!((vw - 140.55).abs() < 0.5, "{vw}");
        assert!((wang - 128.55).abs() < 0.5, "{wang}");
        assert!(wang < vw && vw < asym);
    }

    #[test]
    fn exact_yields_barely_move_the_distance() {
        let gys = ExperimentParams::gys();
        let p = Protocol::Asymptotic { mu: 0.48 };
        let a = p.max_distance(&gys).unwrap();
        let e = p.max_distance_with(&gys, YieldModel::Exact).unwrap();
        assert!((a - e).abs() < 0.1);
    }

    #[test]
    fn invalid_protocol_rejected_before_scanning() {
        let gys = ExperimentParams::gys();
        assert!(Protocol::VacuumWeak { mu: 0.1, nu: 0.2 }.max_distance(&gys).is_err());
    }

    #[test]
    fn curve_preserves_order() {
        let gys = ExperimentParams::gys();
        let g = grid(0.0, 150.0, 10.0).unwrap();
        let c = Protocol::Asymptotic { mu: 0.48 }.curve(&gys, &g, YieldModel::Additive).unwrap();
        assert_eq!(c.iter().map(|p| p.0).collect::<Vec<_>>(), g);
        assert!(c.windows(2).all(|w| w[1].1 < w[0].1));
    }
}
