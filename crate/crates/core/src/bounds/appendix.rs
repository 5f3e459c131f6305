//! Helper functions behind the optimality of a vacuum second decoy.
//!
//! With `G(x) = Q_x e^x` and `J(x) = E_x Q_x e^x` evaluated on the channel
//! model, the two-decoy bounds decompose as
//!
//! ```text
//! Y1^L = G(mu)/mu - F(nu2) + (nu1 + nu2) / (mu (mu - nu1 - nu2)) * Y0^L
//! e1^U = K(nu2) / Y1^L
//! ```
//!
//! `F` and `K` are both increasing in `nu2`, so lowering `nu2` to zero can only
//! raise `Y1^L` and lower `e1^U`.

use super::ProtocolIntensities;
use crate::error::Result;
use crate::model::{overall_error_gain, overall_gain, ExperimentParams};

/// `G(x) = Q_x e^x`.
pub fn g(x: f64, params: &ExperimentParams, eta: f64) -> f64 {
    overall_gain(x, params, eta) * x.exp()
}

/// `J(x) = E_x Q_x e^x`.
pub fn j(x: f64, params: &ExperimentParams, eta: f64) -> f64 {
    overall_error_gain(x, params, eta) * x.exp()
}

/// `F(nu2) = [G(mu) - mu/(nu1 - nu2) (G(nu1) - G(nu2))] / (mu - nu1 - nu2)`.
pub fn appendix_f(nu2: f64, mu: f64, nu1: f64, params: &ExperimentParams, eta: f64) -> Result<f64> {
    ProtocolIntensities::new(mu, nu1, nu2)?;
    let slope = (g(nu1, params, eta) - g(nu2, params, eta)) / (nu1 - nu2);
    Ok((g(mu, params, eta) - mu * slope) / (mu - nu1 - nu2))
}

/// `K(nu2) = (J(nu1) - J(nu2)) / (nu1 - nu2)`.
pub fn appendix_k(nu2: f64, mu: f64, nu1: f64, params: &ExperimentParams, eta: f64) -> Result<f64> {
    ProtocolIntensities::new(mu, nu1, nu2)?;
    Ok((j(nu1, params, eta) - j(nu2, params, eta)) / (nu1 - nu2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{e1_upper_two_decoy_raw, y0_lower, y1_lower_two_decoy_raw};
    use crate::model::{simulate_observations, transmittance};
    use crate::numerics::finite_difference;
    use approx::assert_relative_eq;

    #[test]
    fn decomposition_of_both_bounds() {
        let p = ExperimentParams::gys();
        for (l, mu, nu1, nu2) in [(20.0, 0.48, 0.1, 0.05), (90.0, 0.6, 0.2, 0.0), (130.0, 0.4, 0.05, 0.01)] {
            let eta = transmittance(&p, l).unwrap().eta;
            let i = ProtocolIntensities::new(mu, nu1, nu2).unwrap();
            let o = simulate_observations(&p, eta, &i).unwrap();
            let y0 = y0_lower(&o, &i).unwrap();
            let y1 = y1_lower_two_decoy_raw(&o, &i).unwrap();
            let f = appendix_f(nu2, mu, nu1, &p, eta).unwrap();
            let s = nu1 + nu2;
            assert_relative_eq!(
                y1,
                g(mu, &p, eta) / mu - f + s / (mu * (mu - s)) * y0,
                max_relative = 1e-9
            );
            let k = appendix_k(nu2, mu, nu1, &p, eta).unwrap();
            assert_relative_eq!(e1_upper_two_decoy_raw(&o, &i, y1).unwrap(), k / y1, max_relative = 1e-9);
        }
    }

    #[test]
    fn rejects_invalid_intensities() {
        let p = ExperimentParams::gys();
        assert!(appendix_f(0.1, 0.48, 0.1, &p, 1e-3).is_err());
        assert!(appendix_k(0.2, 0.3, 0.25, &p, 1e-3).is_err());
    }

    #[test]
    fn g_and_j_increase() {
        let p = ExperimentParams::gys();
        for l in [0.0, 50.0, 100.0, 150.0] {
            let eta = transmittance(&p, l).unwrap().eta;
            for k in 1..100 {
                let x = k as f64 * 0.01;
                assert!(finite_difference(|x| g(x, &p, eta), x, 1e-5) >= 0.0);
                assert!(finite_difference(|x| j(x, &p, eta), x, 1e-5) >= 0.0);
            }
        }
    }
}
