//! Brute-force adversary for checking the analytic bounds.
//!
//! Eve may choose any yields `0 <= Y_i <= 1` and any error probabilities
//! `0 <= Z_i = e_i Y_i` that reproduce the three observed gains and error
//! gains. Photon numbers above `i_max` share one common yield, which only
//! shrinks Eve's options, so the oracle's minimum `Y1` can never fall below a
//! valid lower bound.
//!
//! Both problems are linear programs with three equality rows and box
//! constraints. Their optima sit on vertices: three basic variables solve the
//! equalities, every other variable sits at 0 or 1. The oracle enumerates all
//! such vertices.
//!
//! `Z` is treated independently of `Y` (each `Z_i` in `[0, 1]`), so the
//! reported `max_e1 = max Z1 / min Y1` overestimates Eve's true maximum. The
//! analytic `e1^U` still dominates it, because its numerator bounds `Z1` and
//! its denominator is at most the minimum `Y1`.

use rayon::prelude::*;

use super::ProtocolIntensities;
use crate::error::{Error, Result};
use crate::model::{poisson, ObservedRates};

/// Relative residual allowed on each reproduced observable.
pub const CONSTRAINT_TOL: f64 = 1e-10;
const BOX_TOL: f64 = 1e-12;

/// Extremes over the feasible set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub min_y1: f64,
    /// Largest feasible `e1 Y1`.
    pub max_z1: f64,
    /// `max_z1 / min_y1`.
    pub max_e1: f64,
    /// Feasible vertices found for the yield problem.
    pub vertices: usize,
}

/// Runs the adversary with photon numbers `0..=i_max` free plus a common
/// tail yield.
pub fn adversary_oracle(obs: &ObservedRates, intensities: &ProtocolIntensities, i_max: usize) -> Result<OracleResult> {
    if i_max < 3 {
        return Err(Error::Domain {
            name: "i_max",
            value: i_max as f64,
            expected: ">= 3",
        });
    }
    let active: Vec<usize> = (0..=i_max).collect();
    run(obs, intensities, &active, true, i_max)
}

/// Runs the adversary with only the listed photon numbers free; all other
/// yields are blocked (set to zero).
pub fn adversary_oracle_active(
    obs: &ObservedRates,
    intensities: &ProtocolIntensities,
    active: &[usize],
) -> Result<OracleResult> {
    let i_max = active.iter().copied().max().unwrap_or(0);
    run(obs, intensities, active, false, i_max)
}

fn run(
    obs: &ObservedRates,
    intensities: &ProtocolIntensities,
    active: &[usize],
    with_tail: bool,
    i_max: usize,
) -> Result<OracleResult> {
    if !active.contains(&1) {
        return Err(Error::Domain {
            name: "active photon numbers",
            value: active.len() as f64,
            expected: "must include 1",
        });
    }
    let d2 = obs.decoy2()?;
    let xs = [intensities.mu, intensities.nu1, intensities.nu2];
    let gains = [obs.signal.gain, obs.decoy1.gain, d2.gain];
    let errors = [obs.signal.error_gain(), obs.decoy1.error_gain(), d2.error_gain()];

    let mut columns: Vec<[f64; 3]> = active
        .iter()
        .map(|&i| xs.map(|x| poisson(x, i as u32)))
        .collect();
    if with_tail {
        columns.push(xs.map(|x| tail_mass(x, i_max)));
    }
    let target = active.iter().position(|&i| i == 1).expect("checked above");

    let y = extreme(&columns, gains, target, Sense::Min).ok_or(Error::Infeasible { i_max })?;
    let z = extreme(&columns, errors, target, Sense::Max).ok_or(Error::Infeasible { i_max })?;
    let max_e1 = if y.0 > 0.0 { z.0 / y.0 } else { f64::INFINITY };
    Ok(OracleResult {
        min_y1: y.0,
        max_z1: z.0,
        max_e1,
        vertices: y.1,
    })
}

fn tail_mass(x: f64, i_max: usize) -> f64 {
    // summed directly, 1 - cdf would cancel
    (i_max as u32 + 1..i_max as u32 + 80).map(|i| poisson(x, i)).sum()
}

#[derive(Clone, Copy)]
enum Sense {
    Min,
    Max,
}

/// Optimum of variable `target` over `{A v = b, 0 <= v <= 1}` and the number
/// of feasible vertices.
fn extreme(columns: &[[f64; 3]], b: [f64; 3], target: usize, sense: Sense) -> Option<(f64, usize)> {
    let n = columns.len();
    let triples: Vec<[usize; 3]> = (0..n)
        .flat_map(|a| (a + 1..n).flat_map(move |c| (c + 1..n).map(move |d| [a, c, d])))
        .collect();
    let better = move |a: f64, b: f64| match sense {
        Sense::Min => a < b,
        Sense::Max => a > b,
    };

    let (best, count) = triples
        .par_iter()
        .map(|basis| {
            let free: Vec<usize> = (0..n).filter(|k| !basis.contains(k)).collect();
            let m = [0, 1, 2].map(|r| basis.map(|k| columns[k][r]));
            let mut best: Option<f64> = None;
            let mut count = 0usize;
            for mask in 0u32..(1 << free.len()) {
                let mut rhs = b;
                let mut value_at_target = None;
                for (bit, &k) in free.iter().enumerate() {
                    let v = if mask >> bit & 1 == 1 { 1.0 } else { 0.0 };
                    for r in 0..3 {
                        rhs[r] -= columns[k][r] * v;
                    }
                    if k == target {
                        value_at_target = Some(v);
                    }
                }
                let Some(sol) = solve3(m, rhs) else { continue };
                if sol.iter().any(|&v| !(-BOX_TOL..=1.0 + BOX_TOL).contains(&v)) {
                    continue;
                }
                let residual_ok = (0..3).all(|r| {
                    let mut lhs = 0.0;
                    for (bit, &k) in free.iter().enumerate() {
                        if mask >> bit & 1 == 1 {
                            lhs += columns[k][r];
                        }
                    }
                    for (j, &k) in basis.iter().enumerate() {
                        lhs += columns[k][r] * sol[j].clamp(0.0, 1.0);
                    }
                    (lhs - b[r]).abs() <= CONSTRAINT_TOL * b[r].abs().max(1e-300)
                });
                if !residual_ok {
                    continue;
                }
                count += 1;
                let v = match basis.iter().position(|&k| k == target) {
                    Some(j) => sol[j].clamp(0.0, 1.0),
                    None => value_at_target.unwrap_or(0.0),
                };
                if best.is_none_or(|cur| better(v, cur)) {
                    best = Some(v);
                }
            }
            (best, count)
        })
        .reduce(
            || (None, 0),
            |(a, ca), (b, cb)| {
                let best = match (a, b) {
                    (Some(x), Some(y)) => Some(if better(y, x) { y } else { x }),
                    (x, None) => x,
                    (None, y) => y,
                };
                (best, ca + cb)
            },
        );
    best.map(|v| (v, count))
}

/// Gaussian elimination with partial pivoting after column scaling.
fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let mut scale = [0.0f64; 3];
    for c in 0..3 {
        scale[c] = (0..3).map(|r| m[r][c].abs()).fold(0.0, f64::max);
        if scale[c] == 0.0 {
            return None;
        }
    }
    let mut a = [[0.0; 4]; 3];
    for r in 0..3 {
        for c in 0..3 {
            a[r][c] = m[r][c] / scale[c];
        }
        a[r][3] = b[r];
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..4 {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let mut acc = a[r][3];
        for c in r + 1..3 {
            acc -= a[r][c] * x[c];
        }
        x[r] = acc / a[r][r];
    }
    Some([x[0] / scale[0], x[1] / scale[1], x[2] / scale[2]])
}
