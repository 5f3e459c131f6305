//! Finite-data analysis: statistical fluctuations of the decoy observables and
//! the split of `N` pulses into signal, weak decoy and vacuum.
//!
//! Every decoy observable `X` estimated from `N_x` pulses has about
//! `C = N_x X` underlying events and a relative standard error of
//! `1 / sqrt(C)`. The estimators are fed worst-case values `u_alpha` standard
//! errors away from the expected ones:
//!
//! * weak-decoy gain: `Q_nu (1 - u / sqrt(N1 Q_nu))`;
//! * weak-decoy error gain: `E_nu Q_nu (1 + u / sqrt(N1 E_nu Q_nu / 2))`.
//!   Errors are counted on sifted detections, half of all detections;
//! * vacuum gain: `Y0 (1 - u / sqrt(N2 Y0))`, floored at 0. The same lowered
//!   value enters the `Y1` bound and the `e0 Y0` term of the `e1` bound.
//!
//! Signal-state fluctuations are ignored, as is the change of `f(E_mu)`.
//! Without vacuum pulses nothing bounds `Y0` from below, so the vacuum-weak
//! estimator falls back to `Y0 = 0`, the one-decoy estimate.

use std::io::Write;

use rayon::prelude::*;

use crate::bounds::{one_decoy_trial, vacuum_weak_bounds, BoundsEstimate};
use crate::error::{check_range, Error, Result};
use crate::model::{observe, transmittance, ExperimentParams, Observation, ObservedRates, YieldModel};
use crate::numerics::{maximize_scalar, SearchConfig};
use crate::rate::{asymptotic_rate, key_rate_strong, KeyRateInputs};

/// Below this many expected events the normal approximation is doubtful.
pub const MIN_EVENTS: f64 = 50.0;

/// Default confidence multiplier: ten standard deviations.
pub const DEFAULT_U_ALPHA: f64 = 10.0;

/// How the `N` pulses of one run are spent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataAllocation {
    pub n_total: f64,
    pub n_signal: f64,
    pub n_decoy1: f64,
    /// Vacuum pulses.
    pub n_decoy2: f64,
    pub u_alpha: f64,
}

impl DataAllocation {
    pub fn new(n_signal: f64, n_decoy1: f64, n_decoy2: f64, u_alpha: f64) -> Result<Self> {
        let alloc = Self {
            n_total: n_signal + n_decoy1 + n_decoy2,
            n_signal,
            n_decoy1,
            n_decoy2,
            u_alpha,
        };
        alloc.validate()?;
        Ok(alloc)
    }

    /// `f1 N` weak-decoy pulses, `f2 N` vacuum pulses, the rest signal.
    pub fn from_fractions(n_total: f64, f1: f64, f2: f64, u_alpha: f64) -> Result<Self> {
        check_range("n_total", n_total, n_total > 0.0 && n_total.is_finite(), "> 0")?;
        check_range("f1 + f2", f1 + f2, f1 >= 0.0 && f2 >= 0.0 && f1 + f2 <= 1.0, "fractions in [0, 1]")?;
        let alloc = Self {
            n_total,
            n_signal: n_total * (1.0 - f1 - f2),
            n_decoy1: n_total * f1,
            n_decoy2: n_total * f2,
            u_alpha,
        };
        alloc.validate()?;
        Ok(alloc)
    }

    pub fn validate(&self) -> Result<()> {
        check_range("n_total", self.n_total, self.n_total > 0.0 && self.n_total.is_finite(), "> 0")?;
        check_range("n_signal", self.n_signal, self.n_signal >= 0.0, ">= 0")?;
        check_range("n_decoy1", self.n_decoy1, self.n_decoy1 >= 0.0, ">= 0")?;
        check_range("n_decoy2", self.n_decoy2, self.n_decoy2 >= 0.0, ">= 0")?;
        let sum = self.n_signal + self.n_decoy1 + self.n_decoy2;
        check_range(
            "n_total",
            self.n_total,
            (sum - self.n_total).abs() <= 1e-9 * self.n_total,
            "= n_signal + n_decoy1 + n_decoy2",
        )?;
        check_range("u_alpha", self.u_alpha, self.u_alpha >= 0.0 && self.u_alpha.is_finite(), ">= 0")
    }

    /// Fraction of pulses that end up as sifted signal: `N_S / 2N`.
    pub fn q(&self) -> f64 {
        self.n_signal / (2.0 * self.n_total)
    }
}

/// Which finite-data estimator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FluctEstimator {
    /// Weak decoy plus vacuum; the optimizer may still choose no vacuum.
    VacuumWeak,
    /// Weak decoy only, background taken as zero.
    OneDecoy,
}

impl FluctEstimator {
    pub fn name(self) -> &'static str {
        match self {
            FluctEstimator::VacuumWeak => "vacuum-weak",
            FluctEstimator::OneDecoy => "one-decoy",
        }
    }
}

/// Worst-case observations together with what was done to them.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub rates: ObservedRates,
    /// Relative lowering of the vacuum gain; 1 when there is no vacuum data.
    pub beta_y0: f64,
    /// Observables whose expected event count is below [`MIN_EVENTS`].
    pub low_counts: Vec<&'static str>,
}

fn events(observable: &'static str, count: f64, low: &mut Vec<&'static str>) -> Result<f64> {
    if !(count > 0.0) {
        return Err(Error::InsufficientData { observable, count });
    }
    if count < MIN_EVENTS {
        low.push(observable);
    }
    Ok(count)
}

/// Shifts the decoy observables `u_alpha` standard errors in the direction
/// that weakens the bounds. The signal is left as is; the second decoy, if
/// present, is treated as the vacuum.
pub fn perturb_observations(obs: &ObservedRates, alloc: &DataAllocation) -> Result<Perturbation> {
    alloc.validate()?;
    let u = alloc.u_alpha;
    let mut low = Vec::new();

    let d1 = obs.decoy1;
    let gain_events = events("weak-decoy gain", alloc.n_decoy1 * d1.gain, &mut low)?;
    let error_events = events("weak-decoy errors", alloc.n_decoy1 * d1.error_gain() / 2.0, &mut low)?;
    let gain = (d1.gain * (1.0 - u / gain_events.sqrt())).max(0.0);
    let error_gain = d1.error_gain() * (1.0 + u / error_events.sqrt());
    let decoy1 = Observation {
        gain,
        qber: if gain > 0.0 { error_gain / gain } else { 1.0 },
    };

    let (decoy2, beta_y0) = match obs.decoy2 {
        None => (None, 1.0),
        Some(vac) => {
            let vac_events = events("vacuum gain", alloc.n_decoy2 * vac.gain, &mut low)?;
            let shift = (u / vac_events.sqrt()).min(1.0);
            (Some(Observation { gain: vac.gain * (1.0 - shift), qber: vac.qber }), shift)
        }
    };

    Ok(Perturbation {
        rates: ObservedRates {
            signal: obs.signal,
            decoy1,
            decoy2,
        },
        beta_y0,
        low_counts: low,
    })
}

/// Finite-data bounds, rate and their distance from the noiseless asymptote.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuatedBounds {
    pub y1_hat_lower: f64,
    pub e1_hat_upper: f64,
    pub q1_hat_lower: f64,
    pub beta_y0: f64,
    pub beta_y1: f64,
    pub beta_e1: f64,
    /// `(R_asym - R^L) / R_asym`, with `R_asym` at `q = 1/2`.
    pub beta_r: f64,
    /// `R^L` per pulse; may be negative.
    pub rate_lower: f64,
    /// `max(N R^L, 0)`.
    pub key_bits_lower: f64,
    pub estimator: FluctEstimator,
    pub low_counts: Vec<&'static str>,
}

impl FluctuatedBounds {
    pub fn has_key(&self) -> bool {
        self.rate_lower > 0.0
    }
}

/// Runs the perturbation and the estimator on given observations.
///
/// `obs.decoy2` must hold the vacuum observation for the vacuum-weak estimator
/// unless `alloc.n_decoy2` is zero.
pub fn fluctuated_estimate(
    obs: &ObservedRates,
    mu: f64,
    nu: f64,
    alloc: &DataAllocation,
    estimator: FluctEstimator,
) -> Result<(BoundsEstimate, Perturbation)> {
    let use_vacuum = estimator == FluctEstimator::VacuumWeak && alloc.n_decoy2 > 0.0;
    let input = ObservedRates {
        decoy2: if use_vacuum { Some(obs.decoy2()?) } else { None },
        ..*obs
    };
    let pert = perturb_observations(&input, alloc)?;
    let bounds = if use_vacuum {
        vacuum_weak_bounds(&pert.rates, mu, nu)?
    } else {
        one_decoy_trial(&pert.rates, mu, nu)?
    };
    Ok((bounds, pert))
}

/// Finite-data bounds for signal `mu`, weak decoy `nu` and a vacuum decoy on
/// the model channel `eta`.
pub fn fluctuated_bounds(
    params: &ExperimentParams,
    eta: f64,
    mu: f64,
    nu: f64,
    alloc: &DataAllocation,
    estimator: FluctEstimator,
) -> Result<FluctuatedBounds> {
    let obs = ObservedRates {
        signal: observe(params, eta, mu)?,
        decoy1: observe(params, eta, nu)?,
        decoy2: Some(observe(params, eta, 0.0)?),
    };
    let (b, pert) = fluctuated_estimate(&obs, mu, nu, alloc, estimator)?;
    let rate_lower = key_rate_strong(&KeyRateInputs {
        q: alloc.q(),
        q_mu: obs.signal.gain,
        e_mu: obs.signal.qber,
        q1_lower: b.q1_lower,
        e1_upper: b.e1_upper,
        f_ec: params.f_ec,
    });
    let asym = crate::bounds::asymptotic_bounds(params, eta, mu, YieldModel::Additive);
    let r_asym = asymptotic_rate(params, eta, mu, YieldModel::Additive);
    Ok(FluctuatedBounds {
        y1_hat_lower: b.y1_lower,
        e1_hat_upper: b.e1_upper,
        q1_hat_lower: b.q1_lower,
        beta_y0: pert.beta_y0,
        beta_y1: (asym.y1_lower - b.y1_lower) / asym.y1_lower,
        beta_e1: (b.e1_upper - asym.e1_upper) / asym.e1_upper,
        beta_r: (r_asym - rate_lower) / r_asym,
        rate_lower,
        key_bits_lower: (alloc.n_total * rate_lower).max(0.0),
        estimator,
        low_counts: pert.low_counts,
    })
}

/// A point of the optimizer's search space: decoy intensity and the
/// fractions of pulses spent on the weak decoy and the vacuum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignPoint {
    pub nu: f64,
    pub f1: f64,
    pub f2: f64,
}

/// Best design found at one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationOptimum {
    pub alloc: DataAllocation,
    pub nu: f64,
    pub bounds: FluctuatedBounds,
    pub design: DesignPoint,
}

const SEEDS: [DesignPoint; 3] = [
    DesignPoint { nu: 0.1, f1: 0.3, f2: 0.05 },
    DesignPoint { nu: 0.05, f1: 0.2, f2: 0.02 },
    DesignPoint { nu: 0.15, f1: 0.4, f2: 0.1 },
];
const EDGE: f64 = 1e-6;
const MAX_SWEEPS: usize = 300;
const SWEEP_TOL: f64 = 1e-9;

struct Problem<'a> {
    params: &'a ExperimentParams,
    eta: f64,
    mu: f64,
    n_total: f64,
    u_alpha: f64,
    estimator: FluctEstimator,
    signal: Observation,
    vacuum: Observation,
}

impl Problem<'_> {
    fn rate(&self, x: DesignPoint) -> f64 {
        self.evaluate(x).map(|b| b.rate_lower).unwrap_or(f64::NEG_INFINITY)
    }

    fn evaluate(&self, x: DesignPoint) -> Result<FluctuatedBounds> {
        let alloc = DataAllocation::from_fractions(self.n_total, x.f1, x.f2, self.u_alpha)?;
        let obs = ObservedRates {
            signal: self.signal,
            decoy1: observe(self.params, self.eta, x.nu)?,
            decoy2: Some(self.vacuum),
        };
        let (b, pert) = fluctuated_estimate(&obs, self.mu, x.nu, &alloc, self.estimator)?;
        let rate_lower = key_rate_strong(&KeyRateInputs {
            q: alloc.q(),
            q_mu: self.signal.gain,
            e_mu: self.signal.qber,
            q1_lower: b.q1_lower,
            e1_upper: b.e1_upper,
            f_ec: self.params.f_ec,
        });
        // only the rate matters inside the search; the full report is rebuilt at the end
        Ok(FluctuatedBounds {
            y1_hat_lower: b.y1_lower,
            e1_hat_upper: b.e1_upper,
            q1_hat_lower: b.q1_lower,
            beta_y0: pert.beta_y0,
            beta_y1: 0.0,
            beta_e1: 0.0,
            beta_r: 0.0,
            rate_lower,
            key_bits_lower: 0.0,
            estimator: self.estimator,
            low_counts: pert.low_counts,
        })
    }

    /// Smallest vacuum fraction that gives `Y0^L > 0`.
    fn f2_floor(&self) -> f64 {
        if self.vacuum.gain <= 0.0 {
            return f64::INFINITY;
        }
        (self.u_alpha * self.u_alpha / (self.n_total * self.vacuum.gain)) * (1.0 + 1e-9) + EDGE
    }

    /// Coordinate ascent with golden-section line searches and a pattern
    /// step after each sweep. `vacuum == false` pins `f2` to zero.
    fn climb(&self, start: DesignPoint, vacuum: bool, f2_floor: f64) -> (DesignPoint, f64) {
        let nu_range = (EDGE.max(self.mu * 1e-4), self.mu * (1.0 - 1e-4));
        let clamp = |mut x: DesignPoint| {
            x.nu = x.nu.clamp(nu_range.0, nu_range.1);
            if vacuum {
                x.f2 = x.f2.clamp(f2_floor, 0.9);
            } else {
                x.f2 = 0.0;
            }
            x.f1 = x.f1.clamp(EDGE, 1.0 - x.f2 - EDGE);
            x
        };
        let mut x = clamp(start);
        let mut best = self.rate(x);
        let line = |x: DesignPoint, coord: usize| -> Option<(DesignPoint, f64)> {
            let (lo, hi) = match coord {
                0 => nu_range,
                1 => (EDGE, 1.0 - x.f2 - EDGE),
                _ => (f2_floor, 1.0 - x.f1 - EDGE),
            };
            if !(lo < hi) {
                return None;
            }
            let set = |v: f64| {
                let mut y = x;
                match coord {
                    0 => y.nu = v,
                    1 => y.f1 = v,
                    _ => y.f2 = v,
                }
                y
            };
            let cfg = SearchConfig::new(lo, hi).abs_tol(1e-10).rel_tol(1e-8);
            let m = maximize_scalar(|v| self.rate(set(v)), &cfg).ok()?;
            Some((set(m.x), m.value))
        };
        let coords: &[usize] = if vacuum { &[0, 1, 2] } else { &[0, 1] };
        for _ in 0..MAX_SWEEPS {
            let before = best;
            let origin = x;
            for &c in coords {
                if let Some((y, v)) = line(x, c) {
                    if v > best {
                        x = y;
                        best = v;
                    }
                }
            }
            // pattern step along the sweep's net displacement
            let step = DesignPoint {
                nu: 2.0 * x.nu - origin.nu,
                f1: 2.0 * x.f1 - origin.f1,
                f2: 2.0 * x.f2 - origin.f2,
            };
            let y = clamp(step);
            let v = self.rate(y);
            if v > best {
                x = y;
                best = v;
            }
            if (best - before).abs() <= SWEEP_TOL * best.abs() {
                break;
            }
        }
        (x, best)
    }
}

/// Maximizes `R^L` over the decoy intensity and the pulse split.
///
/// Two families are searched: no vacuum pulses at all (the one-decoy
/// estimate), and enough vacuum pulses that the background bound is
/// positive. The one-decoy estimator only searches the first. Extra `seeds`
/// are tried next to the built-in starting points.
pub fn optimize_allocation(
    params: &ExperimentParams,
    eta: f64,
    mu: f64,
    n_total: f64,
    u_alpha: f64,
    estimator: FluctEstimator,
    seeds: &[DesignPoint],
) -> Result<AllocationOptimum> {
    check_range("mu", mu, mu > 0.0 && mu.is_finite(), "> 0")?;
    check_range("n_total", n_total, n_total > 0.0 && n_total.is_finite(), "> 0")?;
    check_range("u_alpha", u_alpha, u_alpha >= 0.0 && u_alpha.is_finite(), ">= 0")?;
    check_range("eta", eta, eta > 0.0 && eta <= 1.0, "in (0, 1]")?;
    let problem = Problem {
        params,
        eta,
        mu,
        n_total,
        u_alpha,
        estimator,
        signal: observe(params, eta, mu)?,
        vacuum: observe(params, eta, 0.0)?,
    };
    let f2_floor = problem.f2_floor();
    let vacuum_branch = estimator == FluctEstimator::VacuumWeak && f2_floor < 0.5;

    let mut best: Option<(DesignPoint, f64)> = None;
    let starts: Vec<DesignPoint> = seeds.iter().chain(SEEDS.iter()).copied().collect();
    for &start in &starts {
        let mut candidates = vec![problem.climb(start, false, 0.0)];
        if vacuum_branch {
            candidates.push(problem.climb(start, true, f2_floor));
        }
        for c in candidates {
            if best.is_none_or(|b| c.1 > b.1) {
                best = Some(c);
            }
        }
    }
    let (design, _) = best.expect("at least one seed");
    let alloc = DataAllocation::from_fractions(n_total, design.f1, design.f2, u_alpha)?;
    let bounds = fluctuated_bounds(params, eta, mu, design.nu, &alloc, estimator)?;
    Ok(AllocationOptimum {
        alloc,
        nu: design.nu,
        bounds,
        design,
    })
}

/// One row of a finite-data distance scan.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctPoint {
    pub length: f64,
    pub eta: f64,
    pub optimum: AllocationOptimum,
}

/// Settings shared by every point of a scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluctSetup {
    pub mu: f64,
    pub n_total: f64,
    pub u_alpha: f64,
    pub estimator: FluctEstimator,
}

impl FluctSetup {
    pub fn optimize_at(&self, params: &ExperimentParams, length: f64, seeds: &[DesignPoint]) -> Result<FluctPoint> {
        let eta = transmittance(params, length)?.eta;
        let optimum = optimize_allocation(params, eta, self.mu, self.n_total, self.u_alpha, self.estimator, seeds)?;
        Ok(FluctPoint { length, eta, optimum })
    }
}

/// Optimized finite-data rates on a grid and the maximal distance.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctScan {
    pub points: Vec<FluctPoint>,
    /// Where the optimized `R^L` reaches zero, to 0.01 km.
    pub max_distance: f64,
}

/// Optimizes every grid point independently (in parallel), then refines the
/// zero crossing by bisection between the last grid point with key and the
/// next one.
pub fn scan_distance_fluct(params: &ExperimentParams, setup: &FluctSetup, lengths: &[f64]) -> Result<FluctScan> {
    if lengths.is_empty() {
        return Err(Error::Domain {
            name: "grid length",
            value: 0.0,
            expected: "non-empty",
        });
    }
    let points: Vec<FluctPoint> = lengths
        .par_iter()
        .map(|&l| setup.optimize_at(params, l, &[]))
        .collect::<Result<_>>()?;
    let max_distance = max_distance_from(params, setup, &points)?;
    Ok(FluctScan { points, max_distance })
}

fn max_distance_from(params: &ExperimentParams, setup: &FluctSetup, points: &[FluctPoint]) -> Result<f64> {
    let Some(last_pos) = points.iter().rposition(|p| p.optimum.bounds.has_key()) else {
        return Ok(points[0].length);
    };
    let lo_point = &points[last_pos];
    let hi = points
        .get(last_pos + 1)
        .map(|p| p.length)
        .unwrap_or(crate::curves::DISTANCE_LIMIT);
    fluct_max_distance_between(params, setup, lo_point.length, hi, lo_point.optimum.design)
}

/// Maximal distance of the optimized finite-data protocol, searched on `[lo, hi]`
/// where `R^L(lo) > 0`. `seed` warm-starts the optimizer; each bisection step
/// also reuses the design from the last length that still had key.
pub fn fluct_max_distance_between(
    params: &ExperimentParams,
    setup: &FluctSetup,
    mut lo: f64,
    mut hi: f64,
    seed: DesignPoint,
) -> Result<f64> {
    let mut seed = seed;
    while hi - lo > crate::curves::DISTANCE_TOL {
        let mid = 0.5 * (lo + hi);
        let p = setup.optimize_at(params, mid, &[seed])?;
        if p.optimum.bounds.has_key() {
            lo = mid;
            seed = p.optimum.design;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Optimized finite-data maximal distance, searched from 0 km.
pub fn fluct_max_distance(params: &ExperimentParams, setup: &FluctSetup) -> Result<f64> {
    let start = setup.optimize_at(params, 0.0, &[])?;
    if !start.optimum.bounds.has_key() {
        return Ok(0.0);
    }
    fluct_max_distance_between(params, setup, 0.0, crate::curves::DISTANCE_LIMIT, start.optimum.design)
}

/// Header of [`write_scan_csv`].
pub const SCAN_HEADER: [&str; 7] = ["l_km", "R_L", "nu_opt", "NS", "N1", "N2", "B_bits"];

/// Writes one row per point with the columns of [`SCAN_HEADER`]. Negative
/// rates are reported as zero.
pub fn write_scan_csv<W: Write>(points: &[FluctPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCAN_HEADER).map_err(io_error)?;
    for p in points {
        let o = &p.optimum;
        w.write_record([
            p.length.to_string(),
            format!("{:.6e}", o.bounds.rate_lower.max(0.0)),
            format!("{:.6}", o.nu),
            format!("{:e}", o.alloc.n_signal.round()),
            format!("{:e}", o.alloc.n_decoy1.round()),
            format!("{:e}", o.alloc.n_decoy2.round()),
            format!("{:e}", o.bounds.key_bits_lower.round()),
        ])
        .map_err(io_error)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

pub(crate) fn io_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}
