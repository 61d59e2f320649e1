//! Command-line front end: single computations on a scenario file, and the
//! experiment harness (`verify`, `sweep`) with on-disk reports.

use anyhow::{bail, Context, Result};
use apslab::harness::{self, Invocation, Overrides, Parameter};
use apslab::model::{validate, MassProfile, Scenario};
use apslab::modes::{self, Method};
use apslab::{boundary, eta, heat};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "apslab", version, about = "Spectra, eta invariants and boundary-value indices of Dirac operators on cylinders")]
struct Cli {
    /// Scenario file (TOML); defaults to the massless unit finite cylinder
    /// at integral flux.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for this invocation's artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Format of results printed to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Recorded in reports; no computation is random.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Analytic,
    Discretized,
}

#[derive(clap::Args, Debug, Default)]
struct ParameterArgs {
    /// Boundary flux α.
    #[arg(long)]
    flux: Option<f64>,
    /// Neck half-length R.
    #[arg(long)]
    r: Option<f64>,
    /// Mass m.
    #[arg(long)]
    m: Option<f64>,
    /// Wall steepness T.
    #[arg(long)]
    steepness: Option<f64>,
    /// Boundary Fourier cutoff K.
    #[arg(long)]
    mode_cutoff: Option<usize>,
    /// Oracle grid size N.
    #[arg(long)]
    grid_points: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spectrum of the scenario.
    Spectrum {
        #[arg(long, value_enum, default_value_t = MethodArg::Analytic)]
        method: MethodArg,
    },
    /// Eta difference between the scenario and a reference scenario.
    Eta {
        /// Reference scenario file; defaults to the scenario with its mass
        /// replaced by the constant of opposite sign.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Index, kernel and Fredholm data of the massless scenario.
    Index,
    /// Traced cylinder heat-kernel quantities over a time grid.
    HeatTrace {
        #[arg(long, default_value_t = 10.0)]
        m: f64,
        #[arg(long, default_value_t = 2.0)]
        r: f64,
        #[arg(long, default_value_t = 64)]
        points: usize,
    },
    /// Run one registered experiment, or `all`.
    Verify {
        id: String,
        #[command(flatten)]
        params: ParameterArgs,
    },
    /// Run an experiment once per parameter value.
    Sweep {
        id: String,
        /// One of R, m, T, K, N.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        params: ParameterArgs,
    },
    /// List registered experiments.
    List,
}

fn load_scenario(path: Option<&Path>) -> Result<Scenario> {
    let scenario = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Scenario::from_toml_str(&text)?
        }
        None => Scenario::finite_cylinder(0.0, MassProfile::Constant { value: 0.0 }),
    };
    Ok(validate(scenario)?)
}

fn overrides(config: Option<&Path>, a: &ParameterArgs) -> Result<Overrides> {
    let numerics = match config {
        Some(p) => Some(load_scenario(Some(p))?.numerics),
        None => None,
    };
    Ok(Overrides {
        numerics,
        flux: a.flux,
        r: a.r,
        m: a.m,
        steepness: a.steepness,
        mode_cutoff: a.mode_cutoff,
        grid_points: a.grid_points,
    })
}

fn print<T: Serialize>(format: Format, value: &T, csv_body: impl FnOnce() -> Result<String>) -> Result<()> {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(value)?),
        Format::Csv => print!("{}", csv_body()?),
    }
    Ok(())
}

fn write_out(out: Option<&Path>, name: &str, body: &str) -> Result<()> {
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(name), body)?;
    }
    Ok(())
}

fn to_string(f: impl FnOnce(&mut Vec<u8>) -> apslab::Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(String::from_utf8(buf)?)
}

fn summary_csv(reports: &[harness::ExperimentReport]) -> String {
    let mut s = String::from("id,left,right,residual,tolerance,passed\n");
    for r in reports {
        s.push_str(&format!("{},{:.12e},{:.12e},{:.3e},{:.3e},{}\n", r.id, r.left, r.right, r.residual, r.tolerance, r.passed));
    }
    s
}

fn finish(cli: &Cli, invocation: Invocation) -> Result<ExitCode> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("apslab-out"));
    harness::write_artifacts(&dir, &invocation)?;
    let reports: Vec<_> = invocation.reports.iter().chain(invocation.sweeps.iter().flat_map(|s| &s.reports)).cloned().collect();
    for r in &reports {
        eprintln!("{} {} (residual {:.3e}, tolerance {:.1e})", if r.passed { "PASS" } else { "FAIL" }, r.id, r.residual, r.tolerance);
        for c in r.checks.iter().filter(|c| !c.passed) {
            eprintln!("    failed check {}: value {:.6e}, target {:.6e}, residual {:.3e}", c.name, c.value, c.target, c.residual);
        }
    }
    print(cli.format, &invocation, || Ok(summary_csv(&reports)))?;
    eprintln!("artifacts written to {}", dir.display());
    Ok(if invocation.all_passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn opposite_constant(s: &Scenario) -> Scenario {
    let value = match s.mass {
        MassProfile::Constant { value } => -value,
        ref other => -other.max_abs(),
    };
    Scenario { mass: MassProfile::Constant { value }, ..s.clone() }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let config = cli.config.as_deref();
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Spectrum { method } => {
            let s = load_scenario(config)?;
            let method = match method {
                MethodArg::Analytic => Method::Analytic,
                MethodArg::Discretized => Method::Discretized,
            };
            let spectrum = modes::spectrum(&s, method)?;
            let csv = to_string(|b| spectrum.write_csv(b))?;
            write_out(out, "spectrum.csv", &csv)?;
            print(cli.format, &spectrum, || Ok(csv))?;
        }
        Command::Eta { reference } => {
            let s = load_scenario(config)?;
            let r = match reference {
                Some(p) => load_scenario(Some(p))?,
                None => validate(opposite_constant(&s))?,
            };
            let a = modes::spectrum(&s, Method::Analytic)?;
            let b = modes::spectrum(&r, Method::Analytic)?;
            let result = eta::eta_difference(&a, &b, &s.numerics.eta, s.numerics.kernel_tolerance)?;
            let json = serde_json::to_string_pretty(&result)?;
            write_out(out, "eta.json", &json)?;
            print(cli.format, &result, || {
                Ok(format!("value,error_estimate,tail_bound\n{:.15e},{:.3e},{:.3e}\n", result.value, result.error_estimate, result.tail_bound))
            })?;
        }
        Command::Index => {
            #[derive(Serialize)]
            struct IndexReport {
                index: i64,
                graded_index: i64,
                fredholm: modes::FredholmIndex,
                kernel_dimension: usize,
                chirality_trace: i64,
            }
            let s = load_scenario(config)?;
            let kernel = modes::kernel(&s)?;
            let report = IndexReport {
                index: modes::index(&s)?,
                graded_index: modes::graded_index(&s)?,
                fredholm: modes::fredholm_index(&s)?,
                kernel_dimension: kernel.dimension,
                chirality_trace: kernel.chirality_trace,
            };
            write_out(out, "index.json", &serde_json::to_string_pretty(&report)?)?;
            print(cli.format, &report, || {
                Ok(format!(
                    "index,graded_index,fredholm,kernel_dimension,chirality_trace\n{},{},{},{},{}\n",
                    report.index, report.graded_index, report.fredholm.value, report.kernel_dimension, report.chirality_trace
                ))
            })?;
        }
        Command::HeatTrace { m, r, points } => {
            let s = load_scenario(config)?;
            let eig = boundary::eigendata(&s.boundary, s.numerics.mode_cutoff);
            let grid = heat::log_grid(1e-4, heat::small_time_limit(*r, s.numerics.eta.split_epsilon), *points);
            let csv = to_string(|b| heat::write_trace_csv(b, &eig, *m, *r, &grid))?;
            write_out(out, "heat-trace.csv", &csv)?;
            let limits = heat::small_time_limits(*r, *m, s.numerics.eta.split_epsilon, &eig)?;
            match cli.format {
                Format::Csv => print!("{csv}"),
                Format::Json => println!("{}", serde_json::to_string_pretty(&limits)?),
            }
        }
        Command::Verify { id, params } => {
            let reports = harness::run(id, &overrides(config, params)?)?;
            let invocation = Invocation { command: format!("verify {id}"), seed: cli.seed, reports, sweeps: Vec::new() };
            return finish(cli, invocation);
        }
        Command::Sweep { id, param, values, params } => {
            let parameter: Parameter = param.parse()?;
            if values.is_empty() {
                bail!("no sweep values given");
            }
            let sweep = harness::sweep(parameter, values, id, &overrides(config, params)?)?;
            eprintln!("max deviation {:.3e}, observed orders {:?}", sweep.max_deviation, sweep.observed_orders);
            let invocation = Invocation { command: format!("sweep {id} {parameter}"), seed: cli.seed, reports: Vec::new(), sweeps: vec![sweep] };
            return finish(cli, invocation);
        }
        Command::List => {
            for e in harness::registry() {
                let params: Vec<String> = e.sweepable.iter().map(|p| p.to_string()).collect();
                println!("{:<24} [{}] {}", e.id, params.join(","), e.claim);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
