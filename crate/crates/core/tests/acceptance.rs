//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed. The
//! process fails if any criterion outside `KNOWN_FAILURES` fails, or if a
//! known failure starts passing (the list must stay accurate).

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use decoy_core::bounds::appendix::{appendix_f, appendix_k, g, j};
use decoy_core::bounds::oracle::adversary_oracle;
use decoy_core::bounds::{
    asymptotic_bounds, deviation_report, e1_upper_two_decoy_raw, first_order_deviation, two_decoy_bounds,
    wang_delta, wang_delta_original, y1_lower_two_decoy_raw, ProtocolIntensities,
};
use decoy_core::curves::{grid, Protocol};
use decoy_core::fluct::{fluct_max_distance, scan_distance_fluct, FluctEstimator, FluctSetup};
use decoy_core::model::{simulate_observations, simulate_observations_with, transmittance, ExperimentParams, YieldModel};
use decoy_core::numerics::finite_difference;
use decoy_core::rate::{optimal_mu, optimal_mu_wang};
use decoy_core::reproduce::{deviation_percent, vacuum_onset, GYS_MU, GYS_NU, GYS_WANG_MU, KTH_WANG_MU};

/// Criteria expected to fail, with the reason.
const KNOWN_FAILURES: &[(u32, &str)] = &[(
    5,
    "beta_e1 at 40 km and 140 km differ by more than 2 pp under the stated model",
)];

struct Outcome {
    pass: bool,
    detail: String,
}

struct Check {
    pass: bool,
    parts: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Self {
            pass: true,
            parts: Vec::new(),
        }
    }

    fn within(&mut self, label: &str, value: f64, target: f64, tol: f64) {
        let ok = (value - target).abs() <= tol;
        self.pass &= ok;
        self.parts.push(format!("{label}={value:.4} (want {target}±{tol}){}", mark(ok)));
    }

    fn holds(&mut self, label: &str, ok: bool) {
        self.pass &= ok;
        self.parts.push(format!("{label}{}", mark(ok)));
    }

    fn done(self) -> Outcome {
        Outcome {
            pass: self.pass,
            detail: self.parts.join("; "),
        }
    }
}

fn mark(ok: bool) -> &'static str {
    if ok {
        ""
    } else {
        " [x]"
    }
}

fn gys() -> ExperimentParams {
    ExperimentParams::gys()
}

fn eta(p: &ExperimentParams, l: f64) -> f64 {
    transmittance(p, l).unwrap().eta
}

fn criterion_1() -> Outcome {
    let mut c = Check::new();
    let start = Instant::now();
    let ideal = optimal_mu(&gys().with_f_ec(1.0).unwrap()).unwrap();
    let real = optimal_mu(&gys()).unwrap();
    let elapsed = start.elapsed();
    c.within("mu*(f=1)", ideal, 0.54, 0.01);
    c.within("mu*(f=1.22)", real, 0.48, 0.01);
    c.holds(&format!("runtime {elapsed:?} < 1 s"), elapsed < Duration::from_secs(1));
    c.done()
}

fn criterion_2() -> Outcome {
    let mut c = Check::new();
    let d = Protocol::Asymptotic { mu: GYS_MU }.max_distance(&gys()).unwrap();
    c.within("asymptotic max distance km", d, 142.05, 0.5);
    c.done()
}

fn criterion_3() -> Outcome {
    let mut c = Check::new();
    let d = Protocol::VacuumWeak { mu: GYS_MU, nu: GYS_NU }.max_distance(&gys()).unwrap();
    c.within("vacuum-weak max distance km", d, 140.55, 0.5);
    c.done()
}

fn criterion_4() -> Outcome {
    let mut c = Check::new();
    let p = gys();
    let d = Protocol::WangAsymptotic { mu: GYS_WANG_MU }.max_distance(&p).unwrap();
    c.within("tagged-fraction max distance km", d, 128.55, 0.5);
    for l in [40.0, 80.0, 100.0] {
        let m = optimal_mu_wang(&p, eta(&p, l)).unwrap().x;
        c.holds(&format!("optimal mu at {l} km = {m:.4} in [0.25, 0.3]"), (0.25..=0.3).contains(&m));
    }
    c.done()
}

fn criterion_5() -> Outcome {
    let mut c = Check::new();
    let p = gys();
    let (y40, e40) = deviation_percent(&p, 40.0, GYS_MU, 0.25, YieldModel::Additive).unwrap();
    let (y140, e140) = deviation_percent(&p, 140.0, GYS_MU, 0.25, YieldModel::Additive).unwrap();
    c.within("beta_Y1(40 km) %", y40, 3.5, 0.5);
    c.within("beta_e1(40 km) %", e40, 16.8, 1.0);
    let dy = (y40 - y140).abs();
    let de = (e40 - e140).abs();
    c.holds(&format!("|dbeta_Y1| 40 vs 140 km = {dy:.2} pp < 2"), dy < 2.0);
    c.holds(&format!("|dbeta_e1| 40 vs 140 km = {de:.2} pp < 2"), de < 2.0);
    c.done()
}

fn criterion_6() -> Outcome {
    let mut c = Check::new();
    let p = gys();
    let mu = optimal_mu(&p).unwrap();
    let lengths = grid(0.0, 145.0, 5.0).unwrap();
    let setup = |estimator| FluctSetup {
        mu,
        n_total: 6e9,
        u_alpha: 10.0,
        estimator,
    };
    let start = Instant::now();
    let vw = scan_distance_fluct(&p, &setup(FluctEstimator::VacuumWeak), &lengths).unwrap();
    let elapsed = start.elapsed();
    let od = scan_distance_fluct(&p, &setup(FluctEstimator::OneDecoy), &lengths).unwrap();
    c.within("vacuum-weak max distance km", vw.max_distance, 125.0, 3.0);
    c.within("one-decoy max distance km", od.max_distance, 122.0, 3.0);
    c.within("nu at 0 km", vw.points[0].optimum.nu, 0.04, 0.02);
    // the optimum switches branch once the vacuum pays off; nu rises within
    // each branch and steps down at the switch
    let keyed: Vec<(bool, f64)> = vw
        .points
        .iter()
        .filter(|pt| pt.optimum.bounds.has_key())
        .map(|pt| (pt.optimum.alloc.n_decoy2 > 0.0, pt.optimum.nu))
        .collect();
    let rising = keyed.windows(2).all(|w| w[0].0 != w[1].0 || w[1].1 > w[0].1);
    let step: f64 = keyed
        .windows(2)
        .filter(|w| w[0].0 != w[1].0)
        .map(|w| w[1].1 - w[0].1)
        .sum();
    c.holds(&format!("nu increasing within each branch (step {step:+.4} at the switch)"), rising);
    match vacuum_onset(&vw.points) {
        Some(l) => c.within("vacuum first used at km", l, 82.0, 8.0),
        None => c.holds("vacuum never used", false),
    }
    c.holds(
        &format!("{}-point scan in {elapsed:?} < 5 min", lengths.len()),
        lengths.len() >= 30 && elapsed < Duration::from_secs(300),
    );
    c.done()
}

fn criterion_7() -> Outcome {
    let mut c = Check::new();
    let p = gys();
    let setup = FluctSetup {
        mu: optimal_mu(&p).unwrap(),
        n_total: 6e9,
        u_alpha: 10.0,
        estimator: FluctEstimator::VacuumWeak,
    };
    let o = setup.optimize_at(&p, 103.62, &[]).unwrap().optimum;
    c.within("nu", o.nu, 0.127, 0.015);
    c.within("NS/N", o.alloc.n_signal / o.alloc.n_total, 0.66, 0.05);
    let ratio = o.bounds.key_bits_lower / 2.17e4;
    c.holds(
        &format!("key bits {:.4e} within x1.5 of 2.17e4", o.bounds.key_bits_lower),
        (1.0 / 1.5..=1.5).contains(&ratio),
    );
    c.within("beta_Y1 %", 100.0 * o.bounds.beta_y1, 7.09, 2.0);
    c.done()
}

fn criterion_8() -> Outcome {
    let mut c = Check::new();
    let p = gys();
    let setup = FluctSetup {
        mu: optimal_mu(&p).unwrap(),
        n_total: 8.4e10,
        u_alpha: 10.0,
        estimator: FluctEstimator::VacuumWeak,
    };
    let d = fluct_max_distance(&p, &setup).unwrap();
    c.within("vacuum-weak max distance km", d, 132.0, 3.0);
    c.holds(&format!("{d:.2} km > 128.55 km"), d > 128.55);
    c.done()
}

fn criterion_9() -> Outcome {
    let mut c = Check::new();
    let p = ExperimentParams::kth();
    let mu = optimal_mu(&p).unwrap();
    let perfect = Protocol::Asymptotic { mu }.max_distance(&p).unwrap();
    let setup = FluctSetup {
        mu,
        n_total: 8.4e10,
        u_alpha: 10.0,
        estimator: FluctEstimator::VacuumWeak,
    };
    let fl = fluct_max_distance(&p, &setup).unwrap();
    let wang = Protocol::WangAsymptotic { mu: KTH_WANG_MU }.max_distance(&p).unwrap();
    c.within("perfect km", perfect, 68.6, 0.5);
    c.within("vacuum-weak finite-data km", fl, 67.2, 1.5);
    c.within("tagged-fraction mu=0.43 km", wang, 55.5, 0.5);
    c.done()
}

fn random_point(rng: &mut ChaCha8Rng) -> (f64, ProtocolIntensities) {
    let l = rng.gen_range(0.0..140.0);
    let mu = rng.gen_range(0.2..0.9);
    let nu1 = rng.gen_range(0.02..0.45) * mu;
    let nu2 = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..0.9) * nu1 };
    (l, ProtocolIntensities::new(mu, nu1, nu2).unwrap())
}

fn criterion_10() -> Outcome {
    let mut c = Check::new();
    let p = gys();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);

    // (a) soundness against the adversary
    let mut sound = 0;
    let trials = 24;
    for _ in 0..trials {
        let (l, i) = random_point(&mut rng);
        let o = simulate_observations_with(&p, eta(&p, l), &i, YieldModel::Exact).unwrap();
        let r = adversary_oracle(&o, &i, 9).unwrap();
        let y1 = y1_lower_two_decoy_raw(&o, &i).unwrap();
        let e1 = e1_upper_two_decoy_raw(&o, &i, y1).unwrap();
        if y1 <= r.min_y1 * (1.0 + 1e-9) && e1 >= r.max_e1 * (1.0 - 1e-9) {
            sound += 1;
        }
    }
    c.holds(&format!("(a) oracle soundness {sound}/{trials}"), sound == trials);

    // (b) vacuum is the best second decoy
    let mut monotone = 0;
    for _ in 0..10 {
        let l = rng.gen_range(0.0..140.0);
        let mu: f64 = rng.gen_range(0.3..0.9);
        let nu1: f64 = rng.gen_range(0.05..0.45) * mu;
        let e = eta(&p, l);
        let top = nu1.min(mu - nu1);
        let mut prev: Option<(f64, f64)> = None;
        let mut ok = true;
        for k in 0..20 {
            let nu2 = top * k as f64 / 20.0;
            let i = ProtocolIntensities::new(mu, nu1, nu2).unwrap();
            let o = simulate_observations(&p, e, &i).unwrap();
            let y1 = y1_lower_two_decoy_raw(&o, &i).unwrap();
            let e1 = e1_upper_two_decoy_raw(&o, &i, y1).unwrap();
            if let Some((py, pe)) = prev {
                ok &= y1 <= py * (1.0 + 1e-12) && e1 >= pe * (1.0 - 1e-12);
            }
            prev = Some((y1, e1));
        }
        monotone += ok as usize;
    }
    c.holds(&format!("(b) monotone over nu2 {monotone}/10"), monotone == 10);

    // (c) helper functions
    let mut helpers = true;
    for l in [0.0, 40.0, 100.0, 140.0] {
        let e = eta(&p, l);
        for k in 1..90 {
            let x = k as f64 / 100.0;
            helpers &= finite_difference(|x| g(x, &p, e), x, 1e-6) >= 0.0;
            helpers &= finite_difference(|x| j(x, &p, e), x, 1e-6) >= 0.0;
        }
        let (mu, nu1) = (0.48, 0.2);
        let mut prev: Option<(f64, f64)> = None;
        for k in 0..40 {
            let nu2 = 0.2 * k as f64 / 40.0;
            let f = appendix_f(nu2, mu, nu1, &p, e).unwrap();
            let kk = appendix_k(nu2, mu, nu1, &p, e).unwrap();
            if let Some((pf, pk)) = prev {
                helpers &= f >= pf && kk >= pk;
            }
            prev = Some((f, kk));
        }
    }
    c.holds("(c) F, K increasing and G', J' >= 0", helpers);

    // (d) power sums
    let mut power = true;
    for _ in 0..10_000 {
        let a: f64 = rng.gen_range(1e-6..1.0);
        let b = rng.gen_range(0.0..1.0) * a.min(1.0 - a);
        let i = rng.gen_range(2..60);
        if a + b < 1.0 && a > b {
            power &= a.powi(i) - b.powi(i) <= a * a - b * b + 1e-15;
        }
    }
    c.holds("(d) power-sum inequality on 1e4 samples", power);

    // (e) relabelled tagged fraction
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for _ in 0..50 {
        let l = rng.gen_range(0.0..140.0);
        let mu = rng.gen_range(0.2..0.9);
        let nu = rng.gen_range(0.05..0.9) * mu;
        let i = ProtocolIntensities::new(mu, nu, 0.0).unwrap();
        let o = simulate_observations(&p, eta(&p, l), &i).unwrap();
        let d = wang_delta(&o, mu, nu).unwrap();
        let orig = wang_delta_original(nu, mu, o.decoy1.gain, o.signal.gain, o.decoy2.unwrap().gain);
        if (0.0..1.0).contains(&orig) && orig > 0.0 {
            worst = worst.max((d - orig).abs() / orig);
            compared += 1;
        }
    }
    c.holds(
        &format!("(e) relabelling identity on {compared} points, worst rel {worst:.1e}"),
        compared >= 20 && worst <= 1e-12,
    );

    // (f) first-order convergence
    let e = eta(&p, 100.0);
    let asym = asymptotic_bounds(&p, e, 0.48, YieldModel::Additive);
    let mut gaps = Vec::new();
    for nu in [1e-2, 1e-3, 1e-4] {
        let i = ProtocolIntensities::new(0.48, nu, nu / 2.0).unwrap();
        let o = simulate_observations(&p, e, &i).unwrap();
        let exact = deviation_report(&two_decoy_bounds(&o, &i).unwrap(), &asym).unwrap();
        let approx = first_order_deviation(&p, e, &i);
        gaps.push((exact.beta_y1 / approx.beta_y1 - 1.0).abs().max((exact.beta_e1 / approx.beta_e1 - 1.0).abs()));
    }
    let converging = gaps.windows(2).all(|w| w[1] < w[0]) && gaps[2] < 1e-3;
    c.holds(&format!("(f) first-order gap {:.1e} -> {:.1e}", gaps[0], gaps[2]), converging);
    c.done()
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut unexpected = Vec::new();
    for (n, run) in criteria {
        let o = run();
        println!("criterion {n}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        let known = KNOWN_FAILURES.iter().find(|(k, _)| *k == n);
        match (o.pass, known) {
            (false, None) => unexpected.push(format!("criterion {n} failed")),
            (true, Some(_)) => unexpected.push(format!("criterion {n} is listed as a known failure but passed")),
            (false, Some((_, why))) => println!("  known failure: {why}"),
            (true, None) => {}
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: all results as expected");
    } else {
        for u in &unexpected {
            eprintln!("acceptance: {u}");
        }
        std::process::exit(1);
    }
}
