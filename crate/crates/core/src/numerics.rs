//! Derivative-free scalar routines shared by the rate and fluctuation code.
//!
//! Everything here works on plain `Fn(f64) -> f64` closures. Root finding is
//! bisection, maximization is golden-section search; both only look at
//! function values, so objectives that return `-inf` on part of the bracket
//! are fine.

use crate::error::{check_range, Error, Result};

/// Bracket, tolerances and iteration cap for a one-dimensional search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub bracket: (f64, f64),
}

impl SearchConfig {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_iter: 200,
            bracket: (lo, hi),
        }
    }

    pub fn abs_tol(mut self, tol: f64) -> Self {
        self.abs_tol = tol;
        self
    }

    pub fn rel_tol(mut self, tol: f64) -> Self {
        self.rel_tol = tol;
        self
    }

    pub fn max_iter(mut self, n: usize) -> Self {
        self.max_iter = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bracket;
        check_range("bracket.lo", lo, lo.is_finite() && lo < hi, "finite and < bracket.hi")?;
        check_range("bracket.hi", hi, hi.is_finite(), "finite")?;
        check_range("abs_tol", self.abs_tol, self.abs_tol > 0.0, "> 0")?;
        check_range("rel_tol", self.rel_tol, self.rel_tol > 0.0, "> 0")?;
        Ok(())
    }

    fn converged(&self, width: f64, x: f64) -> bool {
        width <= self.abs_tol + self.rel_tol * x.abs()
    }
}

/// Bisection root finder.
///
/// Requires `f(lo) * f(hi) <= 0`. A zero at either end of the bracket is
/// returned as is. Stops when the bracket is narrower than
/// `abs_tol + rel_tol * |x|` or after `max_iter` halvings.
pub fn find_root<F: Fn(f64) -> f64>(f: F, cfg: &SearchConfig) -> Result<f64> {
    cfg.validate()?;
    let (mut lo, mut hi) = cfg.bracket;
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.is_nan() || f_hi.is_nan() || f_lo.signum() == f_hi.signum() {
        return Err(Error::Bracket { lo, hi });
    }
    let lo_positive = f_lo > 0.0;
    for _ in 0..cfg.max_iter {
        let mid = 0.5 * (lo + hi);
        if cfg.converged(hi - lo, mid) {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// How a [`maximize_scalar`] run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchStatus {
    Converged,
    /// Hit `max_iter`; the best point seen so far is returned.
    IterationCap,
    /// Every sampled value was identical; the bracket midpoint is returned.
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
    pub status: SearchStatus,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximization over `cfg.bracket`.
///
/// The caller is responsible for unimodality. The end points of the bracket
/// are evaluated too, so a maximum sitting on the boundary is found.
pub fn maximize_scalar<F: Fn(f64) -> f64>(f: F, cfg: &SearchConfig) -> Result<Maximum> {
    cfg.validate()?;
    let (mut a, mut b) = cfg.bracket;
    let mut best = (a, f(a));
    let mut lowest = best.1;
    let mut track = |x: f64, v: f64, best: &mut (f64, f64)| {
        if v > best.1 || best.1.is_nan() {
            *best = (x, v);
        }
        if v < lowest {
            lowest = v;
        }
    };
    let fb = f(b);
    track(b, fb, &mut best);

    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    track(c, fc, &mut best);
    track(d, fd, &mut best);

    let mut iterations = 0;
    let mut status = SearchStatus::IterationCap;
    while iterations < cfg.max_iter {
        if cfg.converged(b - a, 0.5 * (a + b)) {
            status = SearchStatus::Converged;
            break;
        }
        iterations += 1;
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            track(c, fc, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            track(d, fd, &mut best);
        }
    }

    if best.1 == lowest {
        let (lo, hi) = cfg.bracket;
        let mid = 0.5 * (lo + hi);
        return Ok(Maximum {
            x: mid,
            value: f(mid),
            iterations,
            status: SearchStatus::Flat,
        });
    }
    Ok(Maximum {
        x: best.0,
        value: best.1,
        iterations,
        status,
    })
}

/// Central difference `(f(x+h) - f(x-h)) / 2h`.
pub fn finite_difference<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Last point where a curve that is positive at `lo` turns non-positive,
/// located by bisection to `tol`.
///
/// Used for maximal secure distances: `f` is the key rate as a function of
/// fiber length. Returns `lo` unchanged when `f(lo) <= 0`, and an error when
/// the curve is still positive at `hi`.
pub fn positive_until<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let sign = |x: f64| if f(x) > 0.0 { 1.0 } else { -1.0 };
    if sign(lo) < 0.0 {
        return Ok(lo);
    }
    find_root(sign, &SearchConfig::new(lo, hi).abs_tol(tol).rel_tol(1e-15).max_iter(200))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_of_linear_function() {
        let x = find_root(|x| x - 0.3, &SearchConfig::new(0.0, 1.0)).unwrap();
        assert!((x - 0.3).abs() < 1e-11);
    }

    #[test]
    fn root_on_bracket_boundary() {
        let x = find_root(|x| x * x, &SearchConfig::new(0.0, 2.0)).unwrap();
        assert_eq!(x, 0.0);
    }

    #[test]
    fn even_root_without_sign_change_is_a_bracket_error() {
        let err = find_root(|x| x * x, &SearchConfig::new(-1.0, 2.0)).unwrap_err();
        assert_eq!(err, Error::Bracket { lo: -1.0, hi: 2.0 });
    }

    #[test]
    fn root_is_bracket_invariant() {
        let f = |x: f64| x.exp() - 2.0;
        let wide = find_root(f, &SearchConfig::new(-5.0, 5.0).abs_tol(1e-10)).unwrap();
        let narrow = find_root(f, &SearchConfig::new(0.6, 0.8).abs_tol(1e-10)).unwrap();
        assert!((wide - narrow).abs() < 1e-10);
        assert!((wide - 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn inverted_bracket_is_rejected() {
        assert!(find_root(|x| x, &SearchConfig::new(1.0, -1.0)).is_err());
        assert!(maximize_scalar(|x| x, &SearchConfig::new(1.0, 1.0)).is_err());
    }

    #[test]
    fn maximizes_concave_parabola() {
        let m = maximize_scalar(|x| -(x - 0.3) * (x - 0.3), &SearchConfig::new(0.0, 1.0).rel_tol(1e-9))
            .unwrap();
        assert_eq!(m.status, SearchStatus::Converged);
        assert!((m.x - 0.3).abs() < 1e-6);
    }

    #[test]
    fn maximum_on_boundary() {
        let m = maximize_scalar(|x| x, &SearchConfig::new(0.0, 2.0)).unwrap();
        assert_eq!(m.x, 2.0);
    }

    #[test]
    fn constant_function_is_flagged_flat() {
        let m = maximize_scalar(|_| 4.0, &SearchConfig::new(0.0, 1.0)).unwrap();
        assert_eq!(m.status, SearchStatus::Flat);
        assert_eq!(m.x, 0.5);
        assert_eq!(m.value, 4.0);
    }

    #[test]
    fn iteration_cap_returns_best_so_far() {
        let m = maximize_scalar(
            |x| -(x - 0.3).powi(2),
            &SearchConfig::new(0.0, 1.0).abs_tol(1e-15).rel_tol(1e-15).max_iter(5),
        )
        .unwrap();
        assert_eq!(m.status, SearchStatus::IterationCap);
        assert!((m.x - 0.3).abs() < 0.1);
    }

    #[test]
    fn central_difference_of_square() {
        let d = finite_difference(|x| x * x, 1.0, 1e-3);
        assert!((d - 2.0).abs() < 1e-9);
    }

    #[test]
    fn positive_until_finds_step() {
        let l = positive_until(|x| 10.0 - x, 0.0, 50.0, 0.01).unwrap();
        assert!((l - 10.0).abs() <= 0.01);
        assert_eq!(positive_until(|_| -1.0, 3.0, 5.0, 0.01).unwrap(), 3.0);
        assert!(positive_until(|_| 1.0, 0.0, 5.0, 0.01).is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn golden_section_hits_concave_maximizer(c in 0.05f64..0.95, k in 0.1f64..50.0) {
                let m = maximize_scalar(|x| -k * (x - c).powi(2), &SearchConfig::new(0.0, 1.0).rel_tol(1e-10)).unwrap();
                prop_assert!((m.x - c).abs() < 1e-6);
            }

            #[test]
            fn bisection_root_within_tolerance(r in -3.0f64..3.0) {
                let x = find_root(|x| (x - r).powi(3) + (x - r), &SearchConfig::new(-4.0, 4.0).abs_tol(1e-10)).unwrap();
                prop_assert!((x - r).abs() < 1e-10);
            }
        }
    }
}
