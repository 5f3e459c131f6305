use thiserror::Error;

/// Errors produced by the model, the estimators and the optimizers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is out of range: {expected}")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid intensities: constraint {constraint} violated (mu = {mu}, nu1 = {nu1}, nu2 = {nu2})")]
    InvalidIntensities {
        constraint: &'static str,
        mu: f64,
        nu1: f64,
        nu2: f64,
    },

    #[error("{0} is undefined because its denominator vanishes")]
    UndefinedRate(&'static str),

    #[error("no sign change of the function on [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    #[error("no positive key rate is possible: f(e)H2(e)/(1-H2(e)) = {rhs} >= 1")]
    NoPositiveRate { rhs: f64 },

    #[error("asymptotic reference value {0} is zero")]
    DegenerateAsymptote(&'static str),

    #[error("insufficient data for {observable}: expected event count {count}")]
    InsufficientData { observable: &'static str, count: f64 },

    #[error("observed rates admit no yield vector with photon number <= {i_max}")]
    Infeasible { i_max: usize },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("unknown preset `{0}` (known: GYS, KTH)")]
    UnknownPreset(String),
    #[error("unknown figure id `{0}` (known: fig1..fig6, table2)")]
    UnknownFigure(String),

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    ok: bool,
    expected: &'static str,
) -> Result<()> {
    if ok && !value.is_nan() {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            expected,
        })
    }
}
