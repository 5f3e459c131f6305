//! Source, fiber and threshold-detector model.
//!
//! Alice sends phase-randomized weak coherent pulses, so the photon number of
//! a pulse of intensity `mu` is Poisson distributed. The fiber attenuates by
//! `alpha` dB/km and Bob's side contributes a fixed transmittance `eta_bob`.
//! A threshold detector clicks on any non-vacuum input; dark counts and other
//! background clicks (`y0`) are independent of the signal and carry a random
//! bit, so their error rate is exactly one half.

use std::fmt;
use std::path::Path;

use crate::bounds::ProtocolIntensities;
use crate::error::{check_range, Error, Result};

/// Error rate of background clicks.
pub const E0: f64 = 0.5;

/// Hardware constants of one QKD setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentParams {
    /// Fiber loss, dB/km.
    pub alpha: f64,
    /// Probability that a photon reaches the wrong detector.
    pub e_detector: f64,
    /// Background yield per pulse.
    pub y0: f64,
    /// Receiver transmittance including detector efficiency.
    pub eta_bob: f64,
    /// Source repetition rate, pulses per second.
    pub rep_rate: f64,
    /// Error-correction inefficiency relative to the Shannon limit.
    pub f_ec: f64,
    /// Wavelength in nm. Informational only.
    pub wavelength: f64,
}

impl ExperimentParams {
    pub fn new(
        alpha: f64,
        e_detector: f64,
        y0: f64,
        eta_bob: f64,
        rep_rate: f64,
        f_ec: f64,
        wavelength: f64,
    ) -> Result<Self> {
        let params = Self {
            alpha,
            e_detector,
            y0,
            eta_bob,
            rep_rate,
            f_ec,
            wavelength,
        };
        params.validate()?;
        Ok(params)
    }

    /// Parameters of the 122 km plug-and-play experiment (Gobby, Yuan, Shields).
    pub fn gys() -> Self {
        Self {
            alpha: 0.21,
            e_detector: 0.033,
            y0: 1.7e-6,
            eta_bob: 0.045,
            rep_rate: 2e6,
            f_ec: 1.22,
            wavelength: 1550.0,
        }
    }

    /// Parameters of the KTH fiber experiment.
    pub fn kth() -> Self {
        Self {
            alpha: 0.2,
            e_detector: 0.01,
            y0: 4e-4,
            eta_bob: 0.143,
            rep_rate: 1e5,
            f_ec: 1.22,
            wavelength: 1550.0,
        }
    }

    /// Looks up a built-in preset by name, ignoring case.
    pub fn preset(name: &str) -> Result<Self> {
        match name.to_ascii_uppercase().as_str() {
            "GYS" => Ok(Self::gys()),
            "KTH" => Ok(Self::kth()),
            _ => Err(Error::UnknownPreset(name.to_string())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_range("alpha", self.alpha, self.alpha > 0.0 && self.alpha.is_finite(), "> 0")?;
        check_range(
            "e_detector",
            self.e_detector,
            (0.0..=0.5).contains(&self.e_detector),
            "in [0, 0.5]",
        )?;
        check_range("y0", self.y0, (0.0..1.0).contains(&self.y0), "in [0, 1)")?;
        check_range(
            "eta_bob",
            self.eta_bob,
            self.eta_bob > 0.0 && self.eta_bob <= 1.0,
            "in (0, 1]",
        )?;
        check_range("rep_rate", self.rep_rate, self.rep_rate > 0.0, "> 0")?;
        check_range("f_ec", self.f_ec, self.f_ec >= 1.0 && self.f_ec.is_finite(), ">= 1")?;
        Ok(())
    }

    pub fn with_f_ec(self, f_ec: f64) -> Result<Self> {
        let params = Self { f_ec, ..self };
        params.validate()?;
        Ok(params)
    }

    /// Parses a flat `key = value` file. Keys are the field names; `#` starts a
    /// comment. A `preset = GYS` line seeds every field from the preset, later
    /// keys override it. Without a preset all of `alpha`, `e_detector`, `y0`,
    /// `eta_bob` and `rep_rate` must be given; `f_ec` defaults to 1.22 and
    /// `wavelength` to 1550.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut fields: [Option<f64>; 7] = [None; 7];
        const KEYS: [&str; 7] = [
            "alpha",
            "e_detector",
            "y0",
            "eta_bob",
            "rep_rate",
            "f_ec",
            "wavelength",
        ];
        let mut base: Option<Self> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if key == "preset" {
                base = Some(Self::preset(value)?);
                continue;
            }
            let slot = KEYS.iter().position(|k| *k == key).ok_or_else(|| Error::Config {
                line: line_no,
                message: format!("unknown key `{key}`"),
            })?;
            let parsed: f64 = value.parse().map_err(|_| Error::Config {
                line: line_no,
                message: format!("`{value}` is not a number"),
            })?;
            fields[slot] = Some(parsed);
        }

        let defaults = base.map(|p| {
            [
                p.alpha,
                p.e_detector,
                p.y0,
                p.eta_bob,
                p.rep_rate,
                p.f_ec,
                p.wavelength,
            ]
        });
        let mut values = [0.0; 7];
        for (i, key) in KEYS.iter().enumerate() {
            values[i] = match (fields[i], defaults) {
                (Some(v), _) => v,
                (None, Some(d)) => d[i],
                (None, None) if *key == "f_ec" => 1.22,
                (None, None) if *key == "wavelength" => 1550.0,
                (None, None) => {
                    return Err(Error::Config {
                        line: 0,
                        message: format!("missing key `{key}`"),
                    })
                }
            };
        }
        Self::new(
            values[0], values[1], values[2], values[3], values[4], values[5], values[6],
        )
    }

    pub fn from_config_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::Io(e.to_string()))?;
        Self::from_config_str(&text)
    }
}

impl fmt::Display for ExperimentParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "alpha = {}", self.alpha)?;
        writeln!(f, "e_detector = {}", self.e_detector)?;
        writeln!(f, "y0 = {:e}", self.y0)?;
        writeln!(f, "eta_bob = {}", self.eta_bob)?;
        writeln!(f, "rep_rate = {}", self.rep_rate)?;
        writeln!(f, "f_ec = {}", self.f_ec)?;
        write!(f, "wavelength = {}", self.wavelength)
    }
}

/// A fiber length together with the end-to-end transmittance it implies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelPoint {
    pub length: f64,
    pub eta: f64,
}

/// How the i-photon yield combines signal and background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum YieldModel {
    /// `Y_i = Y0 + eta_i - Y0 * eta_i`: background and signal clicks are
    /// independent events.
    #[default]
    Exact,
    /// `Y_i = Y0 + eta_i`, dropping the coincidence term. This is the form the
    /// closed-form gain and QBER are consistent with, and the one used for the
    /// reference curves.
    Additive,
}

/// Overall transmittance `10^(-alpha l / 10) * eta_bob` at fiber length `length` km.
pub fn transmittance(params: &ExperimentParams, length: f64) -> Result<ChannelPoint> {
    check_range("length", length, length >= 0.0, ">= 0 km")?;
    let eta = 10f64.powf(-params.alpha * length / 10.0) * params.eta_bob;
    Ok(ChannelPoint { length, eta })
}

/// Transmittance of an i-photon pulse through a threshold detector.
pub fn eta_i(eta: f64, i: u32) -> f64 {
    // 1 - (1 - eta)^i without cancellation for small eta
    -f64::exp_m1(f64::from(i) * f64::ln_1p(-eta))
}

pub fn yield_i(params: &ExperimentParams, eta: f64, i: u32, model: YieldModel) -> f64 {
    let ei = eta_i(eta, i);
    match model {
        YieldModel::Exact => params.y0 + ei - params.y0 * ei,
        YieldModel::Additive => params.y0 + ei,
    }
}

/// Poisson weight `mu^i e^(-mu) / i!`.
pub fn poisson(mu: f64, i: u32) -> f64 {
    if mu == 0.0 {
        return if i == 0 { 1.0 } else { 0.0 };
    }
    let log = f64::from(i) * mu.ln() - mu - ln_factorial(i);
    log.exp()
}

fn ln_factorial(i: u32) -> f64 {
    (2..=i).map(|k| f64::from(k).ln()).sum()
}

/// Smallest cutoff whose Poisson tail mass above it is below `tail`.
pub fn truncation_order(mu: f64, tail: f64) -> u32 {
    let mut cumulative = 0.0;
    let mut i = 0;
    loop {
        cumulative += poisson(mu, i);
        if 1.0 - cumulative < tail || i >= 400 {
            return i;
        }
        i += 1;
    }
}

/// Cutoff used for every explicit photon-number sum in this crate.
pub const TAIL_MASS: f64 = 1e-12;

pub fn gain_i(mu: f64, params: &ExperimentParams, eta: f64, i: u32, model: YieldModel) -> f64 {
    yield_i(params, eta, i, model) * poisson(mu, i)
}

/// Error rate of i-photon states: `(e0 Y0 + e_detector eta_i) / Y_i`.
pub fn error_i(params: &ExperimentParams, eta: f64, i: u32, model: YieldModel) -> Result<f64> {
    let yi = yield_i(params, eta, i, model);
    if yi <= 0.0 {
        return Err(Error::UndefinedRate("e_i"));
    }
    Ok((E0 * params.y0 + params.e_detector * eta_i(eta, i)) / yi)
}

/// Closed-form signal gain `Y0 + 1 - e^(-eta mu)`.
pub fn overall_gain(mu: f64, params: &ExperimentParams, eta: f64) -> f64 {
    params.y0 - f64::exp_m1(-eta * mu)
}

/// `E_mu Q_mu = e0 Y0 + e_detector (1 - e^(-eta mu))`.
pub fn overall_error_gain(mu: f64, params: &ExperimentParams, eta: f64) -> f64 {
    E0 * params.y0 - params.e_detector * f64::exp_m1(-eta * mu)
}

pub fn overall_qber(mu: f64, params: &ExperimentParams, eta: f64) -> Result<f64> {
    let q = overall_gain(mu, params, eta);
    if q <= 0.0 {
        return Err(Error::UndefinedRate("E_mu"));
    }
    Ok(overall_error_gain(mu, params, eta) / q)
}

/// Gain and QBER of one pulse class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub gain: f64,
    pub qber: f64,
}

impl Observation {
    pub fn new(gain: f64, qber: f64) -> Result<Self> {
        check_range("gain", gain, (0.0..=1.0).contains(&gain), "in [0, 1]")?;
        check_range("qber", qber, (0.0..=1.0).contains(&qber), "in [0, 1]")?;
        Ok(Self { gain, qber })
    }

    /// `E Q`, the probability per pulse of an erroneous click.
    pub fn error_gain(&self) -> f64 {
        self.gain * self.qber
    }
}

/// Gains and QBERs for the signal and the decoys, measured or simulated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedRates {
    pub signal: Observation,
    pub decoy1: Observation,
    /// Absent for the one-decoy protocol.
    pub decoy2: Option<Observation>,
}

impl ObservedRates {
    pub fn decoy2(&self) -> Result<Observation> {
        self.decoy2.ok_or(Error::InsufficientData {
            observable: "second decoy",
            count: 0.0,
        })
    }
}

/// Signal gain summed over photon numbers with the chosen yield model.
///
/// `Additive` is [`overall_gain`]; `Exact` is `Y0 + (1 - Y0)(1 - e^(-eta mu))`.
pub fn gain_with(mu: f64, params: &ExperimentParams, eta: f64, model: YieldModel) -> f64 {
    match model {
        YieldModel::Additive => overall_gain(mu, params, eta),
        YieldModel::Exact => params.y0 - (1.0 - params.y0) * f64::exp_m1(-eta * mu),
    }
}

/// Noiseless observation of pulses of intensity `mu`.
pub fn observe(params: &ExperimentParams, eta: f64, mu: f64) -> Result<Observation> {
    observe_with(params, eta, mu, YieldModel::Additive)
}

/// Noiseless observation under either yield model. The erroneous-click
/// probability is the same for both.
pub fn observe_with(params: &ExperimentParams, eta: f64, mu: f64, model: YieldModel) -> Result<Observation> {
    check_range("mu", mu, mu >= 0.0, ">= 0")?;
    let gain = gain_with(mu, params, eta, model);
    // no clicks, no errors
    let qber = if gain > 0.0 {
        overall_error_gain(mu, params, eta) / gain
    } else {
        0.0
    };
    Ok(Observation { gain, qber })
}

/// Gains and QBERs the model predicts for all three pulse classes.
pub fn simulate_observations(
    params: &ExperimentParams,
    eta: f64,
    intensities: &ProtocolIntensities,
) -> Result<ObservedRates> {
    Ok(ObservedRates {
        signal: observe(params, eta, intensities.mu)?,
        decoy1: observe(params, eta, intensities.nu1)?,
        decoy2: Some(observe(params, eta, intensities.nu2)?),
    })
}

pub fn simulate_observations_with(
    params: &ExperimentParams,
    eta: f64,
    intensities: &ProtocolIntensities,
    model: YieldModel,
) -> Result<ObservedRates> {
    Ok(ObservedRates {
        signal: observe_with(params, eta, intensities.mu, model)?,
        decoy1: observe_with(params, eta, intensities.nu1, model)?,
        decoy2: Some(observe_with(params, eta, intensities.nu2, model)?),
    })
}

/// Signal plus a single decoy of intensity `nu`.
pub fn simulate_one_decoy(
    params: &ExperimentParams,
    eta: f64,
    mu: f64,
    nu: f64,
) -> Result<ObservedRates> {
    Ok(ObservedRates {
        signal: observe(params, eta, mu)?,
        decoy1: observe(params, eta, nu)?,
        decoy2: None,
    })
}
