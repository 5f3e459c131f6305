use decoy_core::fluct::{
    fluctuated_bounds, optimize_allocation, perturb_observations, DataAllocation, FluctEstimator,
};
use decoy_core::bounds::ProtocolIntensities;
use decoy_core::model::{simulate_observations, transmittance, ExperimentParams};
use decoy_core::rate::optimal_mu;
use proptest::prelude::*;

fn setup(l: f64) -> (ExperimentParams, f64, f64) {
    let p = ExperimentParams::gys();
    let eta = transmittance(&p, l).unwrap().eta;
    let mu = optimal_mu(&p).unwrap();
    (p, eta, mu)
}

fn best(l: f64, n: f64, u: f64) -> f64 {
    let (p, eta, mu) = setup(l);
    optimize_allocation(&p, eta, mu, n, u, FluctEstimator::VacuumWeak, &[])
        .unwrap()
        .bounds
        .rate_lower
}

#[test]
fn more_pulses_never_hurt() {
    for l in [60.0, 100.0] {
        let rates: Vec<f64> = [1e9, 3e9, 6e9, 2e10, 8.4e10].iter().map(|&n| best(l, n, 10.0)).collect();
        for w in rates.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "{rates:?}");
        }
    }
}

#[test]
fn more_confidence_never_helps() {
    let rates: Vec<f64> = [0.0, 2.0, 5.0, 10.0, 15.0].iter().map(|&u| best(100.0, 6e9, u)).collect();
    for w in rates.windows(2) {
        assert!(w[1] <= w[0] + 1e-9 * w[0].abs(), "{rates:?}");
    }
}

#[test]
fn optimum_is_locally_stable() {
    let (p, eta, mu) = setup(103.62);
    let o = optimize_allocation(&p, eta, mu, 6e9, 10.0, FluctEstimator::VacuumWeak, &[]).unwrap();
    let r = o.bounds.rate_lower;
    let a = o.alloc;
    for s in [0.95, 1.05] {
        let nu = fluctuated_bounds(&p, eta, mu, o.nu * s, &a, FluctEstimator::VacuumWeak).unwrap();
        let n1 = DataAllocation::new(a.n_signal - a.n_decoy1 * (s - 1.0), a.n_decoy1 * s, a.n_decoy2, 10.0).unwrap();
        let n1 = fluctuated_bounds(&p, eta, mu, o.nu, &n1, FluctEstimator::VacuumWeak).unwrap();
        let n2 = DataAllocation::new(a.n_signal - a.n_decoy2 * (s - 1.0), a.n_decoy1, a.n_decoy2 * s, 10.0).unwrap();
        let n2 = fluctuated_bounds(&p, eta, mu, o.nu, &n2, FluctEstimator::VacuumWeak).unwrap();
        for q in [nu, n1, n2] {
            assert!(q.rate_lower <= r * (1.0 + 1e-6), "{} > {r}", q.rate_lower);
        }
    }
}

#[test]
fn vacuum_estimator_dominates_one_decoy() {
    for l in [20.0, 90.0, 115.0] {
        let (p, eta, mu) = setup(l);
        let vw = optimize_allocation(&p, eta, mu, 6e9, 10.0, FluctEstimator::VacuumWeak, &[]).unwrap();
        let od = optimize_allocation(&p, eta, mu, 6e9, 10.0, FluctEstimator::OneDecoy, &[]).unwrap();
        assert!(vw.bounds.rate_lower >= od.bounds.rate_lower * (1.0 - 1e-9));
        assert_eq!(od.alloc.n_decoy2, 0.0);
    }
}

#[test]
fn sparse_vacuum_data_overstates_y1() {
    // about 17 expected vacuum counts: the background bound drops to zero
    let (p, eta, mu) = setup(119.4);
    let alloc = DataAllocation::from_fractions(1e9, 0.42, 0.01, 10.0).unwrap();
    let b = fluctuated_bounds(&p, eta, mu, 0.05 * mu, &alloc, FluctEstimator::VacuumWeak).unwrap();
    assert_eq!(b.beta_y0, 1.0);
    assert!(b.beta_y1 < 0.0);
    assert!(b.low_counts.contains(&"vacuum gain"));
    assert!(!b.has_key());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn error_deviation_is_nonnegative(
        l in 5.0f64..120.0,
        nu_frac in 0.05f64..0.6,
        f1 in 0.05f64..0.5,
        f2 in 0.01f64..0.2,
        log_n in 9.0f64..12.0,
    ) {
        let (p, eta, mu) = setup(l);
        let alloc = DataAllocation::from_fractions(10f64.powf(log_n), f1, f2, 10.0).unwrap();
        let b = fluctuated_bounds(&p, eta, mu, nu_frac * mu, &alloc, FluctEstimator::VacuumWeak).unwrap();
        // beta_Y1 and beta_R may go negative: a lower background raises Y1^L
        prop_assert!(b.beta_e1 >= -1e-12);
        prop_assert!((0.0..=1.0).contains(&b.beta_y0));
        prop_assert!(b.key_bits_lower >= 0.0);
    }

    #[test]
    fn perturbation_moves_against_the_bounds(
        l in 0.0f64..140.0,
        u in 0.0f64..20.0,
        log_n in 8.0f64..12.0,
    ) {
        let (p, eta, mu) = setup(l);
        let i = ProtocolIntensities::vacuum_weak(mu, 0.1).unwrap();
        let obs = simulate_observations(&p, eta, &i).unwrap();
        let n = 10f64.powf(log_n);
        let alloc = DataAllocation::new(0.6 * n, 0.3 * n, 0.1 * n, u).unwrap();
        let pert = perturb_observations(&obs, &alloc).unwrap();
        prop_assert!(pert.rates.decoy1.gain <= obs.decoy1.gain);
        prop_assert!(pert.rates.decoy1.error_gain() >= obs.decoy1.error_gain() * (1.0 - 1e-12));
        prop_assert!(pert.rates.decoy2.unwrap().gain <= obs.decoy2.unwrap().gain);
        prop_assert_eq!(pert.rates.signal, obs.signal);
    }
}
