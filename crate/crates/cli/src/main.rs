//! `nitsche`: batch runs of energy-minimal annulus maps.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure, 4 metric
//! regime error.

mod config;
mod error;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nitsche_core::field_io::read_field;
use nitsche_core::metric::{admissibility, metric_area};
use nitsche_core::radial::{critical_inner_radius, hammered_profile, radial_energy, solve_bvp};
use nitsche_core::{Annulus, LogPolarGrid};
use serde_json::json;

use config::{output_dir, parse_annulus, parse_metric, Overrides, RunConfig};
use error::CliError;
use pipeline::{write_text, PipelineReport};

#[derive(Parser)]
#[command(name = "nitsche", version, about = "Energy-minimal maps between annuli with conformal metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline described by a TOML config; flags override its keys.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the full pipeline from flags alone.
    Minimize {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Radial oracles.
    Radial {
        #[command(subcommand)]
        command: RadialCommand,
    },
    /// Audit an imported field (CSV or JSON).
    Verify {
        #[arg(long)]
        field: PathBuf,
        #[arg(long, default_value = "euclidean")]
        metric: String,
        /// Target annulus `inner,outer`; read off the boundary rows if omitted.
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Curvature, admissibility and area of a metric.
    Metric {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        annulus: String,
        #[arg(long, default_value_t = 65)]
        n_s: usize,
        #[arg(long, default_value_t = 256)]
        n_t: usize,
    },
    /// Extend an imported field across both boundary circles and check its Hopf form.
    Reflect {
        #[arg(long)]
        field: PathBuf,
        #[arg(long, default_value = "euclidean")]
        metric: String,
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render a stored run report.
    Report {
        input: PathBuf,
    },
}

#[derive(Subcommand)]
enum RadialCommand {
    /// Stationary radial profile p(a) = p_a, p(b) = p_b.
    Bvp {
        #[arg(long)]
        metric: String,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        p_a: f64,
        #[arg(long)]
        p_b: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Critical inner radius for maps of A(r, 1) onto A(1, R), inner circle to outer.
    Critical {
        #[arg(long)]
        metric: String,
        #[arg(long = "R")]
        outer: f64,
    },
    /// Hammered minimizer of A(r, 1) onto A(1, R).
    Hammered {
        #[arg(long)]
        metric: String,
        #[arg(long = "R")]
        outer: f64,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 65)]
        n_s: usize,
        #[arg(long, default_value_t = 256)]
        n_t: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn print_json(value: &impl serde::Serialize) {
    emit(&format!("{}\n", serde_json::to_string_pretty(value).expect("plain data")));
}

fn unit_target(outer: f64) -> Result<Annulus, CliError> {
    if !(outer > 1.0 && outer.is_finite()) {
        return Err(CliError::config("R", format!("must exceed 1, got {outer}")));
    }
    Ok(Annulus::new(1.0, outer)?)
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config, overrides } => {
            let mut cfg = RunConfig::load(&config)?;
            cfg.apply(&overrides);
            run_pipeline(&cfg)
        }
        Command::Minimize { overrides } => {
            let mut cfg = RunConfig::default();
            cfg.apply(&overrides);
            run_pipeline(&cfg)
        }
        Command::Radial { command } => radial(command),
        Command::Verify { field, metric, target, out } => {
            let f = read_field(&field)?;
            let target = target.map(|t| parse_annulus("target", &t)).transpose()?;
            let report = pipeline::verify(&f, &metric, target)?;
            emit(&report.summary());
            if let Some(dir) = out {
                pipeline::ensure_dir(&dir)?;
                write_text(&dir.join("verify_report.json"), &serde_json::to_string_pretty(&report).expect("plain data"))?;
            }
            Ok(())
        }
        Command::Metric { kind, annulus, n_s, n_t } => {
            let a = parse_annulus("annulus", &annulus)?;
            let m = parse_metric(&kind, a)?;
            let grid = LogPolarGrid::new(a, n_s, n_t)?;
            let adm = admissibility(&m, &grid, None)?;
            let curvature: Vec<_> = (0..9)
                .map(|i| {
                    let s = a.inner() * (a.outer() / a.inner()).powf(i as f64 / 8.0);
                    m.gauss_curvature(nitsche_core::Complex64::new(s, 0.0)).map(|k| json!({ "radius": s, "curvature": k }))
                })
                .collect::<Result<_, _>>()?;
            print_json(&json!({
                "metric": m.describe(),
                "annulus": a,
                "area": metric_area(&m, &grid)?,
                "admissibility": adm,
                "curvature": curvature,
            }));
            Ok(())
        }
        Command::Reflect { field, metric, target, out } => {
            let f = read_field(&field)?;
            let target = target.map(|t| parse_annulus("target", &t)).transpose()?;
            let dir = out.map(|d| output_dir(Some(&d)));
            let report = pipeline::reflect(&f, &metric, target, dir.as_deref())?;
            print_json(&report);
            Ok(())
        }
        Command::Report { input } => {
            let text = std::fs::read_to_string(&input).map_err(|e| CliError::io(&input, e))?;
            let report: PipelineReport =
                serde_json::from_str(&text).map_err(|e| CliError::config("input", format!("{}: {e}", input.display())))?;
            emit(&pipeline::summary(&report));
            Ok(())
        }
    }
}

fn run_pipeline(cfg: &RunConfig) -> Result<(), CliError> {
    let out = pipeline::run(cfg)?;
    let dir = cfg.output_dir();
    let metric = parse_metric(&cfg.metric, cfg.target()?)?;
    let written = pipeline::write_outputs(&dir, &out, &metric)?;
    emit(&pipeline::summary(&out.report));
    emit(&format!("{:<28}{}\n", "outputs", written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ")));
    Ok(())
}

fn radial(command: RadialCommand) -> Result<(), CliError> {
    match command {
        RadialCommand::Bvp { metric, a, b, p_a, p_b, out } => {
            let (lo, hi) = (p_a.min(p_b), p_a.max(p_b));
            let m = parse_metric(&metric, Annulus::new(lo, hi).map_err(|_| CliError::config("p_a", "p_a and p_b must be distinct and positive"))?)?;
            let (c, profile) = solve_bvp(&m, a, b, p_a, p_b)?;
            print_json(&json!({
                "metric": m.describe(),
                "constant": c,
                "energy": radial_energy(&profile, &m)?,
                "first_integral_residual": profile.first_integral_residual(&m)?,
            }));
            if let Some(path) = out {
                profile.write_csv(&path)?;
            }
            Ok(())
        }
        RadialCommand::Critical { metric, outer } => {
            let m = parse_metric(&metric, unit_target(outer)?)?;
            let r = critical_inner_radius(&m, outer)?;
            print_json(&json!({ "metric": m.describe(), "outer_radius": outer, "critical_inner_radius": r }));
            Ok(())
        }
        RadialCommand::Hammered { metric, outer, r, n_s, n_t, out } => {
            let m = parse_metric(&metric, unit_target(outer)?)?;
            let domain = Annulus::new(r, 1.0).map_err(|_| CliError::config("r", format!("must lie in (0, 1), got {r}")))?;
            let profile = hammered_profile(&m, &domain)?;
            print_json(&json!({
                "metric": m.describe(),
                "domain": domain,
                "critical_inner_radius": critical_inner_radius(&m, outer)?,
                "junction_radius": profile.junction,
                "constant": profile.constant,
                "energy": radial_energy(&profile, &m)?,
            }));
            if let Some(dir) = out {
                pipeline::ensure_dir(&dir)?;
                profile.write_csv(&dir.join("hammered_profile.csv"))?;
                let field = profile.to_field(&LogPolarGrid::new(domain, n_s, n_t)?)?;
                nitsche_core::field_io::write_field_csv(&dir.join("hammered_field.csv"), &field, None)?;
            }
            Ok(())
        }
    }
}
