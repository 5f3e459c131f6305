//! Data behind the reference figures and the finite-data table, as CSV text
//! plus headline numbers. Output is deterministic.

use std::fmt;
use std::str::FromStr;

use crate::bounds::{asymptotic_bounds, deviation_report};
use crate::curves::{grid, Protocol};
use crate::error::{Error, Result};
use crate::fluct::{fluct_max_distance, io_error, FluctEstimator, FluctPoint, FluctSetup, DEFAULT_U_ALPHA};
use crate::model::{simulate_observations_with, transmittance, ExperimentParams, YieldModel};
use crate::bounds::{vacuum_weak_bounds, ProtocolIntensities};
use crate::rate::optimal_mu;

use rayon::prelude::*;

/// Signal intensity of the noiseless GYS curves.
pub const GYS_MU: f64 = 0.48;
/// Weak decoy of the noiseless vacuum-weak curve.
pub const GYS_NU: f64 = 0.05;
/// Signal intensity of the tagged-fraction curves on GYS.
pub const GYS_WANG_MU: f64 = 0.30;
/// Signal intensity of the tagged-fraction curve on KTH.
pub const KTH_WANG_MU: f64 = 0.43;
/// Pulses per run in the small and large finite-data scans.
pub const N_SMALL: f64 = 6e9;
pub const N_LARGE: f64 = 8.4e10;
/// Fiber length of the finite-data table, km.
pub const TABLE_LENGTH: f64 = 103.62;

/// Which artifact to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FigureId {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Table2,
}

impl FigureId {
    pub const ALL: [FigureId; 7] = [
        FigureId::Fig1,
        FigureId::Fig2,
        FigureId::Fig3,
        FigureId::Fig4,
        FigureId::Fig5,
        FigureId::Fig6,
        FigureId::Table2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureId::Fig1 => "fig1",
            FigureId::Fig2 => "fig2",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
            FigureId::Fig6 => "fig6",
            FigureId::Table2 => "table2",
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FigureId::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownFigure(s.to_string()))
    }
}

/// A named number worth printing next to the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Headline {
    pub label: String,
    pub value: f64,
    pub unit: &'static str,
}

impl fmt::Display for Headline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.unit {
            "" => write!(f, "{}: {}", self.label, fmt_g(self.value)),
            unit => write!(f, "{}: {} {}", self.label, fmt_g(self.value), unit),
        }
    }
}

fn fmt_g(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        format!("{v:.4e}")
    } else {
        format!("{v:.4}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reproduction {
    pub id: FigureId,
    pub csv: String,
    pub headlines: Vec<Headline>,
}

fn headline(label: impl Into<String>, value: f64, unit: &'static str) -> Headline {
    Headline {
        label: label.into(),
        value,
        unit,
    }
}

fn to_csv(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(io_error)?;
    for r in rows {
        w.write_record(r).map_err(io_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn sci(v: f64) -> String {
    format!("{v:.6e}")
}

fn km(v: f64) -> String {
    format!("{v:.2}")
}

/// Builds one artifact. `model` selects the yields for the noiseless curves;
/// the finite-data parts always use the closed-form gains.
pub fn reproduce(id: FigureId, model: YieldModel) -> Result<Reproduction> {
    match id {
        FigureId::Fig1 => fig1(model),
        FigureId::Fig2 => fig2(model),
        FigureId::Fig3 => fig3(),
        FigureId::Fig4 => fluct_rates(FigureId::Fig4, N_SMALL, model),
        FigureId::Fig5 => fluct_rates(FigureId::Fig5, N_LARGE, model),
        FigureId::Fig6 => fig6(model),
        FigureId::Table2 => table2(),
    }
}

/// Relative bound deviations, in percent, of the vacuum-weak estimate at
/// signal `mu` and decoy `ratio * mu`.
pub fn deviation_percent(
    params: &ExperimentParams,
    length: f64,
    mu: f64,
    ratio: f64,
    model: YieldModel,
) -> Result<(f64, f64)> {
    let eta = transmittance(params, length)?.eta;
    let i = ProtocolIntensities::vacuum_weak(mu, ratio * mu)?;
    let obs = simulate_observations_with(params, eta, &i, model)?;
    let finite = vacuum_weak_bounds(&obs, mu, i.nu1)?;
    let d = deviation_report(&finite, &asymptotic_bounds(params, eta, mu, model))?;
    Ok((100.0 * d.beta_y1, 100.0 * d.beta_e1))
}

fn fig1(model: YieldModel) -> Result<Reproduction> {
    let p = ExperimentParams::gys();
    let ratios: Vec<f64> = (1..=50).map(|k| k as f64 / 100.0).collect();
    let mut rows = Vec::with_capacity(ratios.len());
    for &r in &ratios {
        let (y40, e40) = deviation_percent(&p, 40.0, GYS_MU, r, model)?;
        let (y140, e140) = deviation_percent(&p, 140.0, GYS_MU, r, model)?;
        rows.push(vec![format!("{r:.2}"), sci(y40), sci(e40), sci(y140), sci(e140)]);
    }
    let (y40, e40) = deviation_percent(&p, 40.0, GYS_MU, 0.25, model)?;
    let (y140, e140) = deviation_percent(&p, 140.0, GYS_MU, 0.25, model)?;
    Ok(Reproduction {
        id: FigureId::Fig1,
        csv: to_csv(
            &["nu_over_mu", "beta_Y1_40km_pct", "beta_e1_40km_pct", "beta_Y1_140km_pct", "beta_e1_140km_pct"],
            &rows,
        )?,
        headlines: vec![
            headline("beta_Y1 at nu/mu=0.25, 40 km", y40, "%"),
            headline("beta_e1 at nu/mu=0.25, 40 km", e40, "%"),
            headline("beta_Y1 at nu/mu=0.25, 140 km", y140, "%"),
            headline("beta_e1 at nu/mu=0.25, 140 km", e140, "%"),
        ],
    })
}

fn curve_columns(
    params: &ExperimentParams,
    protocols: &[Protocol],
    lengths: &[f64],
    model: YieldModel,
) -> Result<Vec<Vec<String>>> {
    let curves = protocols
        .iter()
        .map(|p| p.curve(params, lengths, model))
        .collect::<Result<Vec<_>>>()?;
    Ok(lengths
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            let mut row = vec![km(l)];
            row.extend(curves.iter().map(|c| sci(c[k].1.max(0.0))));
            row
        })
        .collect())
}

fn fig2(model: YieldModel) -> Result<Reproduction> {
    let p = ExperimentParams::gys();
    let protocols = [
        Protocol::Asymptotic { mu: GYS_MU },
        Protocol::VacuumWeak { mu: GYS_MU, nu: GYS_NU },
        Protocol::WangAsymptotic { mu: GYS_WANG_MU },
    ];
    let lengths = grid(0.0, 150.0, 1.0)?;
    let rows = curve_columns(&p, &protocols, &lengths, model)?;
    let labels = ["asymptotic max distance", "vacuum-weak max distance", "tagged-fraction max distance"];
    let headlines = protocols
        .iter()
        .zip(labels)
        .map(|(pr, label)| Ok(headline(label, pr.max_distance_with(&p, model)?, "km")))
        .collect::<Result<_>>()?;
    Ok(Reproduction {
        id: FigureId::Fig2,
        csv: to_csv(&["l_km", "R_asymptotic_per_pulse", "R_vacuum_weak_per_pulse", "R_wang_per_pulse"], &rows)?,
        headlines,
    })
}

fn fluct_setup(params: &ExperimentParams, n_total: f64, estimator: FluctEstimator) -> Result<FluctSetup> {
    Ok(FluctSetup {
        mu: optimal_mu(params)?,
        n_total,
        u_alpha: DEFAULT_U_ALPHA,
        estimator,
    })
}

fn scan(params: &ExperimentParams, setup: &FluctSetup, lengths: &[f64]) -> Result<Vec<FluctPoint>> {
    lengths.par_iter().map(|&l| setup.optimize_at(params, l, &[])).collect()
}

/// First grid length where the optimizer spends pulses on the vacuum.
pub fn vacuum_onset(points: &[FluctPoint]) -> Option<f64> {
    points.iter().find(|p| p.optimum.alloc.n_decoy2 > 0.0).map(|p| p.length)
}

fn fig3() -> Result<Reproduction> {
    let p = ExperimentParams::gys();
    let lengths = grid(0.0, 130.0, 2.0)?;
    let vw = scan(&p, &fluct_setup(&p, N_SMALL, FluctEstimator::VacuumWeak)?, &lengths)?;
    let od = scan(&p, &fluct_setup(&p, N_SMALL, FluctEstimator::OneDecoy)?, &lengths)?;
    let rows: Vec<Vec<String>> = vw
        .iter()
        .zip(&od)
        .map(|(a, b)| {
            vec![
                km(a.length),
                format!("{:.6}", a.optimum.nu),
                format!("{:.6}", b.optimum.nu),
                sci(a.optimum.alloc.n_decoy2.round()),
            ]
        })
        .collect();
    let mut headlines = vec![headline("optimal nu at 0 km", vw[0].optimum.nu, "")];
    if let Some(l) = vacuum_onset(&vw) {
        headlines.push(headline("vacuum decoy first used at", l, "km"));
    }
    Ok(Reproduction {
        id: FigureId::Fig3,
        csv: to_csv(&["l_km", "nu_opt_vacuum_weak", "nu_opt_one_decoy", "N2_vacuum_weak"], &rows)?,
        headlines,
    })
}

fn fluct_rates(id: FigureId, n_total: f64, model: YieldModel) -> Result<Reproduction> {
    let p = ExperimentParams::gys();
    let lengths = grid(0.0, 145.0, 1.0)?;
    let vw_setup = fluct_setup(&p, n_total, FluctEstimator::VacuumWeak)?;
    let od_setup = fluct_setup(&p, n_total, FluctEstimator::OneDecoy)?;
    let vw = scan(&p, &vw_setup, &lengths)?;
    let od = scan(&p, &od_setup, &lengths)?;
    let perfect = Protocol::Asymptotic { mu: vw_setup.mu };
    let wang = Protocol::WangAsymptotic { mu: GYS_WANG_MU };
    let reference = curve_columns(&p, &[perfect, wang], &lengths, model)?;
    let rows: Vec<Vec<String>> = reference
        .into_iter()
        .zip(vw.iter().zip(&od))
        .map(|(mut row, (a, b))| {
            row.push(sci(a.optimum.bounds.rate_lower.max(0.0)));
            row.push(sci(b.optimum.bounds.rate_lower.max(0.0)));
            row
        })
        .collect();
    let headlines = vec![
        headline("asymptotic max distance", perfect.max_distance_with(&p, model)?, "km"),
        headline("tagged-fraction max distance", wang.max_distance_with(&p, model)?, "km"),
        headline("vacuum-weak finite-data max distance", fluct_max_distance(&p, &vw_setup)?, "km"),
        headline("one-decoy finite-data max distance", fluct_max_distance(&p, &od_setup)?, "km"),
    ];
    Ok(Reproduction {
        id,
        csv: to_csv(
            &[
                "l_km",
                "R_asymptotic_per_pulse",
                "R_wang_per_pulse",
                "R_L_vacuum_weak_per_pulse",
                "R_L_one_decoy_per_pulse",
            ],
            &rows,
        )?,
        headlines,
    })
}

fn fig6(model: YieldModel) -> Result<Reproduction> {
    let p = ExperimentParams::kth();
    let setup = fluct_setup(&p, N_LARGE, FluctEstimator::VacuumWeak)?;
    let perfect = Protocol::Asymptotic { mu: setup.mu };
    let wang = Protocol::WangAsymptotic { mu: KTH_WANG_MU };
    let lengths = grid(0.0, 70.0, 1.0)?;
    let fl = scan(&p, &setup, &lengths)?;
    let rows: Vec<Vec<String>> = curve_columns(&p, &[perfect, wang], &lengths, model)?
        .into_iter()
        .zip(&fl)
        .map(|(mut row, a)| {
            row.push(sci(a.optimum.bounds.rate_lower.max(0.0)));
            row
        })
        .collect();
    Ok(Reproduction {
        id: FigureId::Fig6,
        csv: to_csv(
            &["l_km", "R_asymptotic_per_pulse", "R_wang_per_pulse", "R_L_vacuum_weak_per_pulse"],
            &rows,
        )?,
        headlines: vec![
            headline("signal intensity", setup.mu, ""),
            headline("asymptotic max distance", perfect.max_distance_with(&p, model)?, "km"),
            headline("vacuum-weak finite-data max distance", fluct_max_distance(&p, &setup)?, "km"),
            headline("tagged-fraction max distance", wang.max_distance_with(&p, model)?, "km"),
        ],
    })
}

fn table2() -> Result<Reproduction> {
    let p = ExperimentParams::gys();
    let setup = fluct_setup(&p, N_SMALL, FluctEstimator::VacuumWeak)?;
    let point = setup.optimize_at(&p, TABLE_LENGTH, &[])?;
    let o = &point.optimum;
    let b = &o.bounds;
    let pct = |v: f64| format!("{:.2}", 100.0 * v);
    let row = vec![
        km(point.length),
        format!("{:.4e}", point.eta),
        format!("{:.3}", setup.mu),
        format!("{:.4}", o.nu),
        format!("{:.3e}", setup.n_total),
        format!("{:.3e}", o.alloc.n_signal),
        format!("{:.3e}", o.alloc.n_decoy1),
        format!("{:.3e}", o.alloc.n_decoy2),
        format!("{}", setup.u_alpha),
        pct(b.beta_y0),
        pct(b.beta_y1),
        pct(b.beta_e1),
        pct(b.beta_r),
        format!("{:.4e}", b.rate_lower),
        format!("{:.3e}", b.key_bits_lower),
    ];
    Ok(Reproduction {
        id: FigureId::Table2,
        csv: to_csv(
            &[
                "l_km",
                "eta",
                "mu",
                "nu",
                "N",
                "NS",
                "N1",
                "N2",
                "u_alpha",
                "beta_Y0_pct",
                "beta_Y1_pct",
                "beta_e1_pct",
                "beta_R_pct",
                "R_L_per_pulse",
                "B_bits",
            ],
            &[row],
        )?,
        headlines: vec![
            headline("optimal nu", o.nu, ""),
            headline("NS/N", o.alloc.n_signal / o.alloc.n_total, ""),
            headline("N1", o.alloc.n_decoy1, "pulses"),
            headline("N2", o.alloc.n_decoy2, "pulses"),
            headline("beta_Y1", 100.0 * b.beta_y1, "%"),
            headline("beta_e1", 100.0 * b.beta_e1, "%"),
            headline("key bits", b.key_bits_lower, "bits"),
        ],
    })
}
