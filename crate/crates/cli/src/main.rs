//! `decoy`: key rates, bounds and finite-data optimization for decoy-state
//! BB84 on a fiber link.
//!
//! Exit status: 0 on success, 2 on invalid input, 1 on internal failure.
//! CSV goes to `--out` or standard output; summary lines go to standard output
//! when `--out` is given and to standard error otherwise.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use decoy_core::bounds::{
    one_decoy_simple, one_decoy_trial, two_decoy_bounds, vacuum_weak_bounds, wang_delta, BoundsEstimate,
    ProtocolIntensities,
};
use decoy_core::curves::{grid, Protocol};
use decoy_core::fluct::{
    fluct_max_distance, scan_distance_fluct, write_scan_csv, FluctEstimator, FluctSetup, DEFAULT_U_ALPHA,
};
use decoy_core::model::{observe_with, simulate_observations_with, transmittance, ExperimentParams, YieldModel};
use decoy_core::rate::{
    asymptotic_rate, key_rate_strong, key_rate_wang, optimal_mu, optimal_mu_wang, KeyRateInputs, WangRateInputs,
    Q_BB84,
};
use decoy_core::reproduce::{reproduce, FigureId};
use decoy_core::Error;

#[derive(Parser, Debug)]
#[command(name = "decoy", version, about = "Decoy-state BB84 key rates on a fiber link")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Built-in parameter set (GYS or KTH).
    #[arg(long, global = true, default_value = "GYS", conflicts_with = "config")]
    preset: String,
    /// Key = value parameter file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Error-correction inefficiency, at least 1.
    #[arg(long = "f-ec", global = true)]
    f_ec: Option<f64>,
    /// Use the closed-form yields `Y0 + eta_i` instead of the exact ones.
    #[arg(long, global = true)]
    closed_form_yields: bool,
    /// Write CSV here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimal signal intensity.
    OptimalMu {
        #[arg(long, value_enum, default_value_t = Method::Strong)]
        method: Method,
        /// Fiber length for the tagged-fraction search, km.
        #[arg(long, default_value_t = 100.0)]
        length: f64,
    },
    /// Bounds and rate of every estimator at one operating point.
    Bounds {
        #[arg(long)]
        length: f64,
        #[command(flatten)]
        intensities: Intensities,
    },
    /// Noiseless key rate against fiber length.
    Scan {
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        intensities: Intensities,
        /// Curves to include.
        #[arg(long, value_enum, value_delimiter = ',', default_value = "asymptotic,vacuum-weak,wang")]
        protocol: Vec<ProtocolKind>,
        /// Intensity of the tagged-fraction curve.
        #[arg(long, default_value_t = 0.30)]
        wang_mu: f64,
    },
    /// Finite-data optimization of the decoy intensity and pulse split.
    FluctOptimize {
        #[command(flatten)]
        grid: GridArgs,
        /// Pulses per run.
        #[arg(long = "n", default_value_t = 6e9)]
        n_total: f64,
        /// Standard deviations of the confidence interval.
        #[arg(long, default_value_t = DEFAULT_U_ALPHA)]
        u_alpha: f64,
        #[arg(long, value_enum, default_value_t = FluctKind::VacuumWeak)]
        estimator: FluctKind,
        /// Signal intensity; defaults to the optimum for the parameters.
        #[arg(long)]
        mu: Option<f64>,
    },
    /// Regenerate a reference figure or table (fig1..fig6, table2).
    Reproduce { id: String },
}

#[derive(Args, Debug)]
struct Intensities {
    #[arg(long, default_value_t = 0.48)]
    mu: f64,
    #[arg(long, default_value_t = 0.05)]
    nu1: f64,
    #[arg(long, default_value_t = 0.0)]
    nu2: f64,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// First fiber length, km.
    #[arg(long, default_value_t = 0.0)]
    from: f64,
    /// Last fiber length, km.
    #[arg(long, default_value_t = 150.0)]
    to: f64,
    /// Grid step, km.
    #[arg(long, default_value_t = 5.0)]
    step: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Method {
    /// Single-photon bound with the full error rate.
    Strong,
    /// Tagged-fraction rate with `Delta = mu`.
    Wang,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum ProtocolKind {
    Asymptotic,
    TwoDecoy,
    VacuumWeak,
    OneDecoySimple,
    OneDecoyTrial,
    Wang,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum FluctKind {
    VacuumWeak,
    OneDecoy,
}

impl From<FluctKind> for FluctEstimator {
    fn from(k: FluctKind) -> Self {
        match k {
            FluctKind::VacuumWeak => FluctEstimator::VacuumWeak,
            FluctKind::OneDecoy => FluctEstimator::OneDecoy,
        }
    }
}

/// Where CSV and summary lines go.
struct Sink {
    out: Option<PathBuf>,
    lines: Vec<String>,
}

impl Sink {
    fn note(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }

    fn finish(self, csv: &str) -> Result<(), Error> {
        let io = |e: io::Error| Error::Io(e.to_string());
        match &self.out {
            Some(path) => {
                fs::write(path, csv).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                let mut stdout = io::stdout().lock();
                for l in &self.lines {
                    writeln!(stdout, "{l}").map_err(io)?;
                }
            }
            None => {
                io::stdout().lock().write_all(csv.as_bytes()).map_err(io)?;
                let mut stderr = io::stderr().lock();
                for l in &self.lines {
                    writeln!(stderr, "{l}").map_err(io)?;
                }
            }
        }
        Ok(())
    }
}

fn load_params(g: &Global) -> Result<ExperimentParams, Error> {
    let params = match &g.config {
        Some(path) => ExperimentParams::from_config_file(path)?,
        None => ExperimentParams::preset(&g.preset.to_ascii_uppercase())?,
    };
    match g.f_ec {
        Some(f) => params.with_f_ec(f),
        None => Ok(params),
    }
}

fn yield_model(g: &Global) -> YieldModel {
    if g.closed_form_yields {
        YieldModel::Additive
    } else {
        YieldModel::Exact
    }
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn sci(v: f64) -> String {
    format!("{v:.6e}")
}

fn run(cli: Cli) -> Result<(), Error> {
    let params = load_params(&cli.global)?;
    let model = yield_model(&cli.global);
    let mut sink = Sink {
        out: cli.global.out.clone(),
        lines: Vec::new(),
    };
    let csv = match cli.command {
        Command::OptimalMu { method, length } => optimal_mu_cmd(&params, method, length, &mut sink)?,
        Command::Bounds { length, intensities } => bounds_cmd(&params, length, &intensities, model)?,
        Command::Scan {
            grid: g,
            intensities,
            protocol,
            wang_mu,
        } => scan_cmd(&params, &g, &intensities, &protocol, wang_mu, model, &mut sink)?,
        Command::FluctOptimize {
            grid: g,
            n_total,
            u_alpha,
            estimator,
            mu,
        } => {
            let setup = FluctSetup {
                mu: match mu {
                    Some(mu) => mu,
                    None => optimal_mu(&params)?,
                },
                n_total,
                u_alpha,
                estimator: estimator.into(),
            };
            let lengths = grid(g.from, g.to, g.step)?;
            let scan = scan_distance_fluct(&params, &setup, &lengths)?;
            let mut buf = Vec::new();
            write_scan_csv(&scan.points, &mut buf)?;
            sink.note(format!("signal intensity: {:.4}", setup.mu));
            sink.note(format!(
                "{} finite-data max distance: {:.2} km",
                setup.estimator.name(),
                if lengths.len() > 1 {
                    scan.max_distance
                } else {
                    fluct_max_distance(&params, &setup)?
                }
            ));
            String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))?
        }
        Command::Reproduce { id } => {
            let id: FigureId = id.parse()?;
            let r = reproduce(id, model)?;
            for h in &r.headlines {
                sink.note(h.to_string());
            }
            r.csv
        }
    };
    sink.finish(&csv)
}

fn optimal_mu_cmd(params: &ExperimentParams, method: Method, length: f64, sink: &mut Sink) -> Result<String, Error> {
    let mut rows = Vec::new();
    match method {
        Method::Strong => {
            for f_ec in [1.0, params.f_ec] {
                let mu = optimal_mu(&params.with_f_ec(f_ec)?)?;
                rows.push(vec!["strong".to_string(), format!("{f_ec}"), String::new(), format!("{mu:.4}")]);
                sink.note(format!("optimal mu (f_ec = {f_ec}): {mu:.4}"));
            }
        }
        Method::Wang => {
            let eta = transmittance(params, length)?.eta;
            let m = optimal_mu_wang(params, eta)?;
            rows.push(vec!["wang".to_string(), format!("{}", params.f_ec), format!("{length}"), format!("{:.4}", m.x)]);
            sink.note(format!("optimal tagged-fraction mu at {length} km (f_ec = {}): {:.4}", params.f_ec, m.x));
        }
    }
    Ok(csv_text(&["method", "f_ec", "l_km", "mu_opt"], &rows))
}

fn bounds_cmd(params: &ExperimentParams, length: f64, i: &Intensities, model: YieldModel) -> Result<String, Error> {
    let intensities = ProtocolIntensities::new(i.mu, i.nu1, i.nu2)?;
    let eta = transmittance(params, length)?.eta;
    let obs = simulate_observations_with(params, eta, &intensities, model)?;
    let signal = observe_with(params, eta, i.mu, model)?;
    let rate = |b: &BoundsEstimate| {
        key_rate_strong(&KeyRateInputs {
            q: Q_BB84,
            q_mu: signal.gain,
            e_mu: signal.qber,
            q1_lower: b.q1_lower,
            e1_upper: b.e1_upper,
            f_ec: params.f_ec,
        })
    };
    let mut estimates = Vec::new();
    if i.nu2 > 0.0 {
        estimates.push(two_decoy_bounds(&obs, &intensities)?);
    } else {
        estimates.push(vacuum_weak_bounds(&obs, i.mu, i.nu1)?);
    }
    estimates.push(one_decoy_simple(&obs, i.mu, i.nu1)?);
    estimates.push(one_decoy_trial(&obs, i.mu, i.nu1)?);
    estimates.push(decoy_core::bounds::asymptotic_bounds(params, eta, i.mu, model));

    let mut rows: Vec<Vec<String>> = estimates
        .iter()
        .map(|b| {
            vec![
                b.estimator.name().to_string(),
                sci(b.y0_lower),
                sci(b.y1_lower),
                sci(b.q1_lower),
                sci(b.e1_upper),
                String::new(),
                sci(if b.estimator == decoy_core::bounds::Estimator::Asymptotic {
                    asymptotic_rate(params, eta, i.mu, model)
                } else {
                    rate(b)
                }),
            ]
        })
        .collect();
    // the tagged-fraction protocol distills key from the weaker state; a
    // nonzero second decoy's gain overestimates Y0, which only raises Delta
    let delta = wang_delta(&obs, i.mu, i.nu1)?;
    let wang = key_rate_wang(&WangRateInputs {
        q: Q_BB84,
        q_mu: obs.decoy1.gain,
        e_mu: obs.decoy1.qber,
        delta,
        f_ec: params.f_ec,
    });
    rows.push(vec![
        "wang".to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        sci(delta),
        sci(wang),
    ]);
    Ok(csv_text(&["estimator", "Y0_L", "Y1_L", "Q1_L", "e1_U", "Delta", "R_per_pulse"], &rows))
}

fn scan_cmd(
    params: &ExperimentParams,
    g: &GridArgs,
    i: &Intensities,
    kinds: &[ProtocolKind],
    wang_mu: f64,
    model: YieldModel,
    sink: &mut Sink,
) -> Result<String, Error> {
    let lengths = grid(g.from, g.to, g.step)?;
    let protocols: Vec<Protocol> = kinds
        .iter()
        .map(|k| match k {
            ProtocolKind::Asymptotic => Protocol::Asymptotic { mu: i.mu },
            ProtocolKind::TwoDecoy => Protocol::TwoDecoy(ProtocolIntensities {
                mu: i.mu,
                nu1: i.nu1,
                nu2: i.nu2,
            }),
            ProtocolKind::VacuumWeak => Protocol::VacuumWeak { mu: i.mu, nu: i.nu1 },
            ProtocolKind::OneDecoySimple => Protocol::OneDecoySimple { mu: i.mu, nu: i.nu1 },
            ProtocolKind::OneDecoyTrial => Protocol::OneDecoyTrial { mu: i.mu, nu: i.nu1 },
            ProtocolKind::Wang => Protocol::WangAsymptotic { mu: wang_mu },
        })
        .collect();
    let mut curves = Vec::new();
    for p in &protocols {
        curves.push(p.curve(params, &lengths, model)?);
        sink.note(format!("{} max distance: {:.2} km", p.name(), p.max_distance_with(params, model)?));
    }
    let header: Vec<String> = std::iter::once("l_km".to_string())
        .chain(protocols.iter().map(|p| format!("R_{}_per_pulse", p.name().replace('-', "_"))))
        .collect();
    let rows: Vec<Vec<String>> = lengths
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            std::iter::once(format!("{l:.2}"))
                .chain(curves.iter().map(|c| sci(c[k].1.max(0.0))))
                .collect()
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    Ok(csv_text(&header, &rows))
}

/// Input problems exit with 2, everything else with 1.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain { .. }
        | Error::InvalidIntensities { .. }
        | Error::Config { .. }
        | Error::UnknownPreset(_)
        | Error::UnknownFigure(_)
        | Error::NoPositiveRate { .. }
        | Error::InsufficientData { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
