//! Command-line curvature analyzer: loads a built-in model or a metric
//! definition file, samples the chart, runs the selected analyses and emits
//! a deterministic report.
//!
//! Exit codes: 0 all selected checks passed, 1 usage or configuration
//! error, 2 a verdict came out false, 3 internal-consistency failure.

mod config;
mod run;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use curv4::models::{builtin_by_name, BuiltinParams, ModelGeometry};

use crate::config::{parse_metric_config, parse_symmetric_matrix};
use crate::run::{run, to_canonical_json, to_csv, Check, RunConfig, SamplingSpec};

#[derive(Parser)]
#[command(
    name = "curv4",
    version,
    about = "Pointwise curvature analysis of 4-dimensional metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a metric over a sample of chart points.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Built-in model: flat4 | sphere4 | fubini_study | s2xs2 | fs_perturbed
    #[arg(long, conflicts_with = "metric")]
    builtin: Option<String>,
    /// Metric definition file (see the config format in the README)
    #[arg(long)]
    metric: Option<PathBuf>,
    /// Radius for sphere4
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// First factor radius for s2xs2
    #[arg(long, default_value_t = 1.0)]
    r1: f64,
    /// Second factor radius for s2xs2
    #[arg(long, default_value_t = 1.0)]
    r2: f64,
    /// Perturbation amplitude for fs_perturbed
    #[arg(long, default_value_t = 0.0)]
    t: f64,
    /// Perturbation direction file for fs_perturbed (g-keys, not necessarily
    /// positive definite); defaults to the built-in reference bump
    #[arg(long)]
    bump: Option<PathBuf>,
    /// Cell-centered grid with this many points per axis
    #[arg(long, conflicts_with = "random")]
    grid: Option<usize>,
    /// Number of random sample points
    #[arg(long)]
    random: Option<usize>,
    /// Seed for sampling, plane search, and fact verification
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated checks: spectra,kperp,hypotheses,ak,weitzenboeck,perturb
    #[arg(
        long,
        default_value = "spectra,kperp,hypotheses",
        value_delimiter = ','
    )]
    checks: Vec<String>,
    /// Relative strictness margin for the hypothesis inequalities
    #[arg(long, default_value_t = 1e-9)]
    margin: f64,
    /// Allowed gap between the closed-form and searched extremes
    #[arg(long, default_value_t = 1e-5)]
    agree_tol: f64,
    /// Allowed Weitzenboeck residual
    #[arg(long, default_value_t = 1e-5)]
    weitz_tol: f64,
    /// Plane-search samples (at least 1000)
    #[arg(long, default_value_t = 1000)]
    search_samples: usize,
    /// Plane-search refinement sweeps (at least 50)
    #[arg(long, default_value_t = 50)]
    search_sweeps: usize,
    /// Output format: json | csv
    #[arg(long, default_value = "json")]
    format: String,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn usage_error(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(1)
}

fn load_model(
    args: &AnalyzeArgs,
) -> Result<(ModelGeometry, String, BTreeMap<String, f64>), String> {
    let mut params = BTreeMap::new();
    match (&args.builtin, &args.metric) {
        (Some(name), None) => {
            let bump = match &args.bump {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                    Some(Box::new(
                        parse_symmetric_matrix(&text).map_err(|e| e.to_string())?,
                    ))
                }
                None => None,
            };
            match name.as_str() {
                "sphere4" => {
                    params.insert("r".to_string(), args.r);
                }
                "s2xs2" => {
                    params.insert("r1".to_string(), args.r1);
                    params.insert("r2".to_string(), args.r2);
                }
                "fs_perturbed" => {
                    params.insert("t".to_string(), args.t);
                }
                _ => {}
            }
            let model = builtin_by_name(
                name,
                BuiltinParams {
                    r: args.r,
                    r1: args.r1,
                    r2: args.r2,
                    t: args.t,
                    bump,
                },
            )
            .map_err(|e| e.to_string())?;
            Ok((model, "builtin".to_string(), params))
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            let cfg = parse_metric_config(&text).map_err(|e| e.to_string())?;
            let model = ModelGeometry {
                name: path.display().to_string(),
                metric: cfg.metric,
                distinguished_form: cfg.form,
                facts: Vec::new(),
            };
            Ok((model, "config".to_string(), params))
        }
        _ => Err("exactly one metric source is required: --builtin NAME or --metric FILE".into()),
    }
}

fn main() -> ExitCode {
    // clap's own exit code for usage errors is 2, which this tool reserves
    // for failed verdicts; remap parse failures to 1
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                return usage_error(e);
            }
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let Command::Analyze(args) = cli.command;

    let mut checks = Vec::new();
    for name in &args.checks {
        match Check::parse(name) {
            Some(c) => {
                if !checks.contains(&c) {
                    checks.push(c);
                }
            }
            None => return usage_error(format!("unknown check `{name}`")),
        }
    }
    if checks.is_empty() {
        return usage_error("at least one check must be selected");
    }

    let (model, source_kind, model_params) = match load_model(&args) {
        Ok(m) => m,
        Err(e) => return usage_error(e),
    };

    if checks.contains(&Check::Ak) && model.distinguished_form.is_none() {
        return usage_error("the `ak` check needs a distinguished 2-form (builtin with a form, or `w..` keys in the config)");
    }
    if checks.contains(&Check::Weitzenboeck) && model.distinguished_form.is_none() {
        return usage_error("the `weitzenboeck` check needs a distinguished 2-form");
    }
    if checks.contains(&Check::Perturb)
        && !(model.name.starts_with("fubini_study") || model.name.starts_with("fs_perturbed"))
    {
        return usage_error("the `perturb` check applies to fubini_study / fs_perturbed only");
    }

    let sampling = match (args.grid, args.random) {
        (Some(n), None) => {
            if n == 0 || n > 8 {
                return usage_error("--grid must be between 1 and 8 points per axis");
            }
            SamplingSpec::Grid { n_per_axis: n }
        }
        (None, Some(c)) => {
            if c == 0 {
                return usage_error("--random needs a positive count");
            }
            SamplingSpec::Random { count: c }
        }
        (None, None) => SamplingSpec::Grid { n_per_axis: 3 },
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };

    // worker pool size from the environment (the only env knob)
    if let Ok(v) = std::env::var("CURV4_WORKERS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }

    let cfg = RunConfig {
        model,
        model_params,
        source_kind,
        sampling,
        seed: args.seed,
        checks,
        margin_scale: args.margin,
        agree_tol: args.agree_tol,
        weitz_tol: args.weitz_tol,
        search_samples: args.search_samples,
        search_sweeps: args.search_sweeps,
    };

    let report = run(&cfg);
    let rendered = match args.format.as_str() {
        "json" => to_canonical_json(&report),
        "csv" => to_csv(&report),
        other => return usage_error(format!("unknown format `{other}`")),
    };
    match &args.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, rendered) {
                return usage_error(format!("cannot write {}: {e}", path.display()));
            }
        }
        None => print!("{rendered}"),
    }
    ExitCode::from(report.exit_code as u8)
}
