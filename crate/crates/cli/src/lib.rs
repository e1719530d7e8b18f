//! `specplan` command-line front end.
//!
//! Data goes to `out`, diagnostics to `err`. Exit codes: 0 success,
//! 1 infeasible objective or failed validation, 2 usage error, 3 I/O or
//! parse error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use specplan_core::metrics::ConfigTriple;
use specplan_core::planner::{
    enumerate_configs, iso_power_samples, pareto_front, select_best, EvaluatedConfig, Objective,
    ParetoPoint, DEFAULT_K_RANGE,
};
use specplan_core::profile::{load_profiles, load_unvalidated, validate, ProfileStore};
use specplan_core::report::{build_report, render_aligned, Cell, Report, ReportRow};
use specplan_core::sim::{compare_to_analytical, simulate_session, SimAcceptance, SimParams};
use specplan_core::{metrics, Error};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "specplan", version, about = "Plan speculative-decoding configurations across edge devices and cloud verifiers")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, global = true, default_value_t = Format::Text)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Tsv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Goodput,
    Cost,
    Energy,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Goodput => Objective::MaxGoodput,
            ObjectiveArg::Cost => Objective::MinCostPerToken,
            ObjectiveArg::Energy => Objective::MinEnergyPerToken,
        }
    }
}

#[derive(Debug, Args)]
struct ProfileDir {
    /// Profile directory (devices.csv, verifiers.csv, variants.csv, acceptance.csv).
    #[arg(env = "SPECPLAN_PROFILE_DIR")]
    dir: PathBuf,
}

#[derive(Debug, Args)]
struct KRange {
    #[arg(long, default_value_t = DEFAULT_K_RANGE.0)]
    k_min: u32,
    #[arg(long, default_value_t = DEFAULT_K_RANGE.1)]
    k_max: u32,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a profile directory against every store invariant.
    Validate {
        #[command(flatten)]
        profiles: ProfileDir,
    },
    /// Evaluate one configuration.
    Evaluate {
        #[command(flatten)]
        profiles: ProfileDir,
        #[arg(long)]
        target: String,
        #[arg(long)]
        device: String,
        #[arg(long)]
        model: String,
        #[arg(long)]
        quant: String,
        #[arg(long)]
        k: u32,
    },
    /// Evaluate every configuration on a device against a target.
    Sweep {
        #[command(flatten)]
        profiles: ProfileDir,
        #[arg(long)]
        target: String,
        #[arg(long)]
        device: String,
        #[command(flatten)]
        k: KRange,
    },
    /// Pick the best configuration for one objective.
    Select {
        #[command(flatten)]
        profiles: ProfileDir,
        #[arg(long)]
        target: String,
        #[arg(long)]
        device: String,
        #[arg(long, value_enum)]
        objective: ObjectiveArg,
        #[command(flatten)]
        k: KRange,
        /// Also list every scored candidate, best first.
        #[arg(long)]
        ranked: bool,
    },
    /// Recommended configuration per (target, device, objective).
    Report {
        #[command(flatten)]
        profiles: ProfileDir,
        /// Targets to include (default: all).
        #[arg(long, value_delimiter = ',')]
        targets: Vec<String>,
        /// Devices to include (default: all).
        #[arg(long, value_delimiter = ',')]
        devices: Vec<String>,
        #[command(flatten)]
        k: KRange,
    },
    /// Goodput/energy Pareto front across devices, with iso-power curves.
    Pareto {
        #[command(flatten)]
        profiles: ProfileDir,
        #[arg(long)]
        target: String,
        #[arg(long, value_delimiter = ',', required = true)]
        devices: Vec<String>,
        /// Power levels (W) for iso-power curves.
        #[arg(long, value_delimiter = ',')]
        iso_power: Vec<f64>,
        /// Samples per iso-power curve.
        #[arg(long, default_value_t = 20)]
        iso_samples: usize,
        #[command(flatten)]
        k: KRange,
    },
    /// Monte Carlo simulation of speculative rounds.
    Simulate {
        #[arg(long)]
        k: u32,
        /// Per-token acceptance probability.
        #[arg(long, conflicts_with = "alpha", required_unless_present = "alpha")]
        beta: Option<f64>,
        /// Tabulated α(k) used as a per-position probability (approximate).
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long = "v-d")]
        v_d: f64,
        #[arg(long, default_value_t = 0.5)]
        t_verify: f64,
        /// Drafting power in watts.
        #[arg(long)]
        power: Option<f64>,
        /// Verifier price in dollars per million tokens.
        #[arg(long, default_value_t = 0.0)]
        price: f64,
        #[arg(long, default_value_t = 100_000)]
        rounds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report relative errors against the analytical metrics.
        #[arg(long)]
        compare: bool,
        /// Relative error above which a metric is flagged.
        #[arg(long, default_value_t = 0.005)]
        tolerance: f64,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = out.write_all(text.as_bytes());
            } else {
                let _ = err.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible(_) | Error::Integrity(_) | Error::NoPowerData(_) => EXIT_INFEASIBLE,
        Error::NotFound(_) | Error::Domain(_) | Error::Mismatched(_) => EXIT_USAGE,
        Error::UndefinedCostEfficiency => EXIT_INFEASIBLE,
        Error::MissingInput { .. }
        | Error::Io { .. }
        | Error::Malformed { .. }
        | Error::DuplicateKey { .. }
        | Error::InvalidCurve(_) => EXIT_IO,
    }
}

fn io(e: std::io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Error> {
    let format = cli.format;
    match cli.command {
        Command::Validate { profiles } => {
            let store = load_unvalidated(&profiles.dir)?;
            let violations = validate(&store);
            for v in &violations {
                writeln!(out, "{v}").map_err(io)?;
            }
            if violations.is_empty() {
                writeln!(
                    err,
                    "ok: {} devices, {} verifiers, {} variants, {} acceptance points",
                    store.device_count(),
                    store.verifier_count(),
                    store.variant_count(),
                    store.acceptance_count()
                )
                .map_err(io)?;
                Ok(EXIT_OK)
            } else {
                writeln!(err, "{} violation(s)", violations.len()).map_err(io)?;
                Ok(EXIT_INFEASIBLE)
            }
        }
        Command::Evaluate { profiles, target, device, model, quant, k } => {
            let store = load_profiles(&profiles.dir)?;
            let config = ConfigTriple {
                model_id: model,
                quant_id: quant,
                k,
                device_id: device,
                target_id: target,
            };
            let (metrics, alpha) = metrics::evaluate_with_alpha(&store, &config)?;
            let c = EvaluatedConfig { config, alpha, metrics };
            write_configs(out, format, std::slice::from_ref(&c))?;
            Ok(EXIT_OK)
        }
        Command::Sweep { profiles, target, device, k } => {
            let store = load_profiles(&profiles.dir)?;
            let configs = enumerate_configs(&store, &target, &device, k.k_min, k.k_max)?;
            write_configs(out, format, &configs)?;
            Ok(EXIT_OK)
        }
        Command::Select { profiles, target, device, objective, k, ranked } => {
            let store = load_profiles(&profiles.dir)?;
            let objective = Objective::from(objective);
            let configs = enumerate_configs(&store, &target, &device, k.k_min, k.k_max)?;
            let rec = select_best(&configs, objective)?;
            if rec.skipped > 0 {
                writeln!(err, "note: skipped {} candidate(s) that cannot be scored", rec.skipped)
                    .map_err(io)?;
            }
            match format {
                Format::Text => {
                    writeln!(out, "{target} {device} {objective}: {}", summary(&rec.winner))
                        .map_err(io)?;
                    if ranked {
                        for (i, c) in rec.ranked.iter().enumerate() {
                            writeln!(out, "{:>3}. {}", i + 1, summary(c)).map_err(io)?;
                        }
                    }
                }
                Format::Tsv => {
                    let rows = if ranked { rec.ranked.clone() } else { vec![rec.winner.clone()] };
                    let report = Report {
                        rows: rows
                            .into_iter()
                            .map(|c| ReportRow {
                                target_id: target.clone(),
                                device_id: device.clone(),
                                objective,
                                cell: Cell::Winner(c),
                            })
                            .collect(),
                    };
                    out.write_all(report.to_tsv().as_bytes()).map_err(io)?;
                }
            }
            Ok(EXIT_OK)
        }
        Command::Report { profiles, targets, devices, k } => {
            let store = load_profiles(&profiles.dir)?;
            let targets = if targets.is_empty() {
                store.verifiers().map(|v| v.target_id.clone()).collect()
            } else {
                targets
            };
            let devices = if devices.is_empty() {
                store.devices().map(|d| d.device_id.clone()).collect()
            } else {
                devices
            };
            let report = build_report(&store, &targets, &devices, k.k_min, k.k_max)?;
            let text = match format {
                Format::Text => report.to_text(),
                Format::Tsv => report.to_tsv(),
            };
            out.write_all(text.as_bytes()).map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::Pareto { profiles, target, devices, iso_power, iso_samples, k } => {
            let store = load_profiles(&profiles.dir)?;
            pareto(out, err, format, &store, &target, &devices, &iso_power, iso_samples, &k)?;
            Ok(EXIT_OK)
        }
        Command::Simulate {
            k,
            beta,
            alpha,
            v_d,
            t_verify,
            power,
            price,
            rounds,
            seed,
            compare,
            tolerance,
        } => {
            let acceptance = match (beta, alpha) {
                (Some(b), _) => SimAcceptance::PerToken(b),
                (None, Some(a)) => SimAcceptance::Tabulated(a),
                (None, None) => unreachable!("clap requires one of --beta/--alpha"),
            };
            let params = SimParams {
                k,
                acceptance,
                v_d,
                t_verify_s: t_verify,
                power_w: power,
                price_per_mtok: price,
                n_rounds: rounds,
                seed,
            };
            simulate(out, format, &params, compare, tolerance)?;
            Ok(EXIT_OK)
        }
    }
}

fn fmt_opt(x: Option<f64>, f: impl Fn(f64) -> String) -> String {
    x.map(f).unwrap_or_else(|| "---".into())
}

/// One-line description of an evaluated configuration.
fn summary(c: &EvaluatedConfig) -> String {
    format!(
        "{} {} k={} G={:.2} eta={} E={}",
        c.config.model_id,
        c.config.quant_id,
        c.config.k,
        c.metrics.goodput_tok_s,
        fmt_opt(c.metrics.cost_eff_tok_per_dollar, |x| format!("{:.0}K", x / 1e3)),
        fmt_opt(c.metrics.energy_j_per_tok, |x| format!("{x:.2}")),
    )
}

pub const SWEEP_COLUMNS: [&str; 9] = [
    "target",
    "device",
    "model_id",
    "quant_id",
    "k",
    "alpha",
    "goodput_tok_s",
    "cost_eff_tok_per_dollar",
    "energy_j_per_tok",
];

fn write_configs(out: &mut dyn Write, format: Format, configs: &[EvaluatedConfig]) -> Result<(), Error> {
    match format {
        Format::Tsv => {
            writeln!(out, "{}", SWEEP_COLUMNS.join("\t")).map_err(io)?;
            for c in configs {
                let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    c.config.target_id,
                    c.config.device_id,
                    c.config.model_id,
                    c.config.quant_id,
                    c.config.k,
                    c.alpha,
                    c.metrics.goodput_tok_s,
                    opt(c.metrics.cost_eff_tok_per_dollar),
                    opt(c.metrics.energy_j_per_tok),
                )
                .map_err(io)?;
            }
        }
        Format::Text => {
            let mut rows = vec![[
                "target", "device", "model", "quant", "k", "alpha", "G tok/s", "eta tok/$", "E J/tok",
            ]
            .map(String::from)];
            for c in configs {
                rows.push([
                    c.config.target_id.clone(),
                    c.config.device_id.clone(),
                    c.config.model_id.clone(),
                    c.config.quant_id.clone(),
                    c.config.k.to_string(),
                    format!("{:.4}", c.alpha),
                    format!("{:.3}", c.metrics.goodput_tok_s),
                    fmt_opt(c.metrics.cost_eff_tok_per_dollar, |x| format!("{x:.0}")),
                    fmt_opt(c.metrics.energy_j_per_tok, |x| format!("{x:.3}")),
                ]);
            }
            out.write_all(render_aligned(&rows, &[4, 5, 6, 7, 8]).as_bytes())
                .map_err(io)?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn pareto(
    out: &mut dyn Write,
    err: &mut dyn Write,
    format: Format,
    store: &ProfileStore,
    target: &str,
    devices: &[String],
    iso_power: &[f64],
    iso_samples: usize,
    k: &KRange,
) -> Result<(), Error> {
    let mut points = Vec::new();
    let mut skipped = 0;
    for device in devices {
        for c in enumerate_configs(store, target, device, k.k_min, k.k_max)? {
            match ParetoPoint::from_evaluated(&c) {
                Some(p) => points.push(p),
                None => skipped += 1,
            }
        }
    }
    if skipped > 0 {
        writeln!(err, "note: {skipped} configuration(s) without power data left out").map_err(io)?;
    }
    let front = pareto_front(&points);
    let on_front = |p: &ParetoPoint| front.iter().any(|f| f.config == p.config);

    let mut iso = Vec::new();
    if !iso_power.is_empty() {
        if points.is_empty() {
            return Err(Error::Infeasible("no power data".into()));
        }
        let g_lo = points.iter().map(|p| p.goodput).fold(f64::INFINITY, f64::min);
        let g_hi = points.iter().map(|p| p.goodput).fold(f64::NEG_INFINITY, f64::max);
        for &w in iso_power {
            for (g, e) in iso_power_samples(w, g_lo, g_hi, iso_samples)? {
                iso.push((w, g, e));
            }
        }
    }

    let cfg = |p: &ParetoPoint| p.config.clone().expect("points come from configurations");
    match format {
        Format::Tsv => {
            writeln!(
                out,
                "kind\tdevice\tmodel_id\tquant_id\tk\tgoodput_tok_s\tenergy_j_per_tok\ton_front\tpower_w"
            )
            .map_err(io)?;
            for p in &points {
                let c = cfg(p);
                writeln!(
                    out,
                    "config\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t",
                    c.device_id,
                    c.model_id,
                    c.quant_id,
                    c.k,
                    p.goodput,
                    p.energy,
                    on_front(p)
                )
                .map_err(io)?;
            }
            for (w, g, e) in &iso {
                writeln!(out, "iso\t\t\t\t\t{g}\t{e}\t\t{w}").map_err(io)?;
            }
        }
        Format::Text => {
            writeln!(out, "Pareto front ({} of {} configurations):", front.len(), points.len())
                .map_err(io)?;
            let mut rows = vec![["device", "model", "quant", "k", "G tok/s", "E J/tok"].map(String::from)];
            for p in &front {
                let c = cfg(p);
                rows.push([
                    c.device_id,
                    c.model_id,
                    c.quant_id,
                    c.k.to_string(),
                    format!("{:.3}", p.goodput),
                    format!("{:.3}", p.energy),
                ]);
            }
            out.write_all(render_aligned(&rows, &[3, 4, 5]).as_bytes())
                .map_err(io)?;
            if !iso.is_empty() {
                writeln!(out, "\nIso-power samples:").map_err(io)?;
                let mut rows = vec![["P W", "G tok/s", "E J/tok"].map(String::from)];
                for (w, g, e) in &iso {
                    rows.push([w.to_string(), format!("{g:.3}"), format!("{e:.3}")]);
                }
                out.write_all(render_aligned(&rows, &[0, 1, 2]).as_bytes())
                    .map_err(io)?;
            }
        }
    }
    Ok(())
}

fn simulate(
    out: &mut dyn Write,
    format: Format,
    params: &SimParams,
    compare: bool,
    tolerance: f64,
) -> Result<(), Error> {
    let emp = simulate_session(params)?;
    let analytical = params.analytical()?;
    let comparison = compare_to_analytical(&emp, &analytical, tolerance)?;
    match format {
        Format::Tsv => out.write_all(comparison.to_tsv().as_bytes()).map_err(io)?,
        Format::Text => {
            let acceptance = match params.acceptance {
                SimAcceptance::PerToken(b) => format!("per-token beta={b}"),
                SimAcceptance::Tabulated(a) => format!("tabulated alpha={a} (approximate)"),
            };
            let lines = [
                ("generator", emp.generator.to_string()),
                ("seed", emp.seed.to_string()),
                ("rounds", emp.n_rounds.to_string()),
                ("acceptance", acceptance),
                (
                    "mean_accepted_draft",
                    format!("{} ± {}", emp.mean_accepted_draft, emp.se_accepted_draft),
                ),
                ("goodput_tok_s", emp.goodput_tok_s.to_string()),
                (
                    "cost_eff_tok_per_dollar",
                    fmt_opt(emp.cost_eff_tok_per_dollar, |x| x.to_string()),
                ),
                ("energy_j_per_tok", fmt_opt(emp.energy_j_per_tok, |x| x.to_string())),
            ];
            for (key, value) in lines {
                writeln!(out, "{key:<24} {value}").map_err(io)?;
            }
            if compare {
                writeln!(out, "\nrelative error vs analytical (tolerance {tolerance}):").map_err(io)?;
                for d in &comparison.deltas {
                    writeln!(
                        out,
                        "{:<24} {:+.6}{}",
                        d.metric,
                        d.rel_error,
                        if d.flagged { "  FLAGGED" } else { "" }
                    )
                    .map_err(io)?;
                }
            }
        }
    }
    Ok(())
}
