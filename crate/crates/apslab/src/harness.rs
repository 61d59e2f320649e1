//! Experiment registry, deterministic runs, parameter sweeps and report
//! persistence.
//!
//! Every experiment checks one identity of the cylinder model: it computes a
//! left-hand side and an independently obtained right-hand side, together
//! with secondary checks that make up the full residual breakdown. A failed
//! check is a normal outcome, reported with its numbers; only genuine
//! computational errors (a root search that cannot resolve a bracket, a
//! quadrature that does not converge) abort a run, and then with the
//! experiment id attached.

use crate::boundary::{eigendata, virtual_codimension, BoundaryEigendata, ProjectionLabel};
use crate::error::{Error, Result};
use crate::eta::{self, gluing_scenarios};
use crate::heat::{self, CylinderKernelSpec, KernelVariant};
use crate::model::{validate, BoundaryCondition, BoundaryModel, BulkShape, MassProfile, Numerics, Scenario};
use crate::modes::{self, match_eigenvalues, Method};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

/// A scalar parameter that can be overridden or swept.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parameter {
    /// Neck half-length `R`.
    R,
    /// Mass `m`.
    M,
    /// Wall steepness `T`.
    T,
    /// Boundary Fourier cutoff `K`.
    K,
    /// Oracle grid size `N`.
    N,
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parameter::R => "R",
            Parameter::M => "m",
            Parameter::T => "T",
            Parameter::K => "K",
            Parameter::N => "N",
        })
    }
}

impl FromStr for Parameter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "R" | "r" => Ok(Parameter::R),
            "m" | "M" => Ok(Parameter::M),
            "T" | "t" => Ok(Parameter::T),
            "K" | "k" => Ok(Parameter::K),
            "N" | "n" => Ok(Parameter::N),
            other => Err(Error::Config(format!("unknown sweep parameter {other:?}; expected one of R, m, T, K, N"))),
        }
    }
}

/// Caller-supplied changes to an experiment's default parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    /// Replaces the default numerics wholesale (typically from a config file).
    pub numerics: Option<Numerics>,
    pub flux: Option<f64>,
    pub r: Option<f64>,
    pub m: Option<f64>,
    pub steepness: Option<f64>,
    pub mode_cutoff: Option<usize>,
    pub grid_points: Option<usize>,
}

impl Overrides {
    /// Sets one sweepable parameter.
    pub fn with(&self, parameter: Parameter, value: f64) -> Result<Self> {
        let mut o = self.clone();
        let count = || -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!("{parameter} must be a positive integer, got {value}")))
            }
        };
        match parameter {
            Parameter::R => o.r = Some(value),
            Parameter::M => o.m = Some(value),
            Parameter::T => o.steepness = Some(value),
            Parameter::K => o.mode_cutoff = Some(count()?),
            Parameter::N => o.grid_points = Some(count()?),
        }
        Ok(o)
    }
}

/// Fully resolved parameters of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Parameters {
    pub flux: f64,
    pub r: f64,
    pub m: f64,
    pub steepness: f64,
    pub numerics: Numerics,
}

/// Per-experiment defaults for the geometric parameters.
#[derive(Clone, Copy, Debug)]
struct Defaults {
    flux: f64,
    r: f64,
    m: f64,
    steepness: f64,
}

const DEFAULTS: Defaults = Defaults { flux: 0.0, r: 1.0, m: 10.0, steepness: 20.0 };

impl Defaults {
    fn resolve(&self, o: &Overrides) -> Parameters {
        let mut numerics = o.numerics.clone().unwrap_or_default();
        if let Some(k) = o.mode_cutoff {
            numerics.mode_cutoff = k;
        }
        if let Some(n) = o.grid_points {
            numerics.grid_points = n;
        }
        Parameters {
            flux: o.flux.unwrap_or(self.flux),
            r: o.r.unwrap_or(self.r),
            m: o.m.unwrap_or(self.m),
            steepness: o.steepness.unwrap_or(self.steepness),
            numerics,
        }
    }
}

/// One compared quantity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, value: f64, target: f64, residual: f64, tolerance: f64) -> Self {
        // NaN residuals fail.
        let passed = residual <= tolerance;
        Self { name: name.to_string(), value, target, residual, tolerance, passed }
    }

    /// `|value − target| ≤ tolerance`.
    fn close(name: &str, value: f64, target: f64, tolerance: f64) -> Self {
        Self::new(name, value, target, (value - target).abs(), tolerance)
    }

    /// `value ≤ bound`.
    fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self::new(name, value, bound, (value - bound).max(0.0), 0.0)
    }

    /// `value ≥ bound`.
    fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self::new(name, value, bound, (bound - value).max(0.0), 0.0)
    }

    /// A quantity that could not be computed because its precondition
    /// failed; the value records the offending number.
    fn undefined(name: &str, value: f64) -> Self {
        Self { name: name.to_string(), value, target: f64::NAN, residual: f64::INFINITY, tolerance: 0.0, passed: false }
    }
}

/// A numeric table exported as a plot data file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.to_string(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    /// Writes the table as CSV.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:.17e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// What an experiment computes before it is wrapped into a report.
#[derive(Clone, Debug, Default)]
struct Outcome {
    /// The first check is the primary relation.
    checks: Vec<Check>,
    notes: Vec<String>,
    tables: Vec<Table>,
}

/// A registered experiment.
pub struct Experiment {
    pub id: &'static str,
    /// The identity being checked, in words.
    pub claim: &'static str,
    /// Parameters a sweep may vary.
    pub sweepable: &'static [Parameter],
    defaults: Defaults,
    run: fn(&Parameters) -> Result<Outcome>,
}

/// Result of one experiment run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub id: String,
    pub claim: String,
    /// Primary left-hand side.
    pub left: f64,
    /// Primary right-hand side.
    pub right: f64,
    pub residual: f64,
    pub tolerance: f64,
    /// True iff every check has residual within its tolerance.
    pub passed: bool,
    pub wall_clock_seconds: f64,
    pub parameters: Parameters,
    /// Full residual breakdown, primary relation first.
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    /// Exported to `plots/`; not part of the JSON body.
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl ExperimentReport {
    /// The report with its wall-clock field zeroed, for determinism checks.
    pub fn without_timing(&self) -> Self {
        Self { wall_clock_seconds: 0.0, ..self.clone() }
    }
}

/// The registry, in a fixed order.
pub fn registry() -> &'static [Experiment] {
    use Parameter::*;
    const EXPERIMENTS: &[Experiment] = &[
        Experiment {
            id: "finite-cylinder-index",
            claim: "massless finite cylinder with (Pi_V+, Pi_V-): kernel spanned by gamma*psi, index = -n_+",
            sweepable: &[K],
            defaults: DEFAULTS,
            run: finite_cylinder_index,
        },
        Experiment {
            id: "finite-cylinder-spectrum",
            claim: "transfer-matrix and discretized spectra agree for lambda in {0,1,2,3}, |mu| <= 10, second-order convergence",
            sweepable: &[N],
            defaults: DEFAULTS,
            run: finite_cylinder_spectrum,
        },
        Experiment {
            id: "closed-form-law",
            claim: "finite-cylinder eigenvalues follow mu^2 = lambda^2 + pi^2 j^2 (j integer)",
            sweepable: &[K],
            defaults: DEFAULTS,
            run: closed_form_law,
        },
        Experiment {
            id: "cylinder-mass-flip",
            claim: "(eta(D + m Gamma) - eta(D - m Gamma))/2 equals the index on the finite cylinder",
            sweepable: &[M, K],
            defaults: Defaults { m: 5.0, ..DEFAULTS },
            run: cylinder_mass_flip,
        },
        Experiment {
            id: "domain-wall-index",
            claim: "doubled-cylinder domain wall: Delta eta / 2 - n_+ (all boundary circles) equals the boundary-value index",
            sweepable: &[M, T, K],
            defaults: DEFAULTS,
            run: domain_wall_index,
        },
        Experiment {
            id: "virtual-codimension",
            claim: "i(Pi_V+, P_>=) = n_+ and the index drops by n_+ when Pi_V+ is replaced by P_>=",
            sweepable: &[K],
            defaults: DEFAULTS,
            run: virtual_codimension_experiment,
        },
        Experiment {
            id: "wall-vs-constant",
            claim: "finite cylinder: eta(wall) - eta(constant +m) = -2 * index",
            sweepable: &[M, T, K],
            defaults: DEFAULTS,
            run: wall_vs_constant,
        },
        Experiment {
            id: "gluing-defect",
            claim: "gluing defect of the two-cut neck equals -n_+ per cut circle, independent of R; large-time part below its bound",
            sweepable: &[R, M, K],
            defaults: DEFAULTS,
            run: gluing_defect,
        },
        Experiment {
            id: "spectral-gap",
            claim: "neck and pieces at half-lengths R, 2R, 4R share a gap c0 >= 1/2",
            sweepable: &[R, M, K],
            defaults: DEFAULTS,
            run: spectral_gap,
        },
        Experiment {
            id: "small-time-limits",
            claim: "small-time limits at large R: G-term vanishes, a-term equals n_+",
            sweepable: &[R, M, K],
            defaults: Defaults { r: 8.0, ..DEFAULTS },
            run: small_time_limits,
        },
        Experiment {
            id: "heat-kernel-residuals",
            claim: "half-cylinder heat kernels satisfy their boundary conditions and the heat equation",
            sweepable: &[M, K],
            defaults: Defaults { m: 1.0, ..DEFAULTS },
            run: heat_kernel_residuals,
        },
        Experiment {
            id: "infinite-trace-zero",
            claim: "the Gamma_S-trace of the infinite-cylinder heat kernel vanishes; half-cylinder traces match their closed form",
            sweepable: &[M, K],
            defaults: Defaults { m: 1.0, ..DEFAULTS },
            run: infinite_trace_zero,
        },
        Experiment {
            id: "cutoff-trace-identity",
            claim: "the cut-off trace integral agrees with its integrated-by-parts form",
            sweepable: &[R, M, K],
            defaults: Defaults { r: 2.0, m: 5.0, ..DEFAULTS },
            run: cutoff_trace_identity,
        },
        Experiment {
            id: "supertrace-constancy",
            claim: "heat supertrace is independent of t and equals the index on boundary and closed scenarios",
            sweepable: &[N, K],
            defaults: DEFAULTS,
            run: supertrace_constancy,
        },
        Experiment {
            id: "closed-mass-flip",
            claim: "closed doubled cylinder: (eta(D + m Gamma) - eta(D - m Gamma))/2 = 0 = index",
            sweepable: &[M, K],
            defaults: Defaults { m: 5.0, ..DEFAULTS },
            run: closed_mass_flip,
        },
    ];
    EXPERIMENTS
}

/// Looks up an experiment.
pub fn find(id: &str) -> Result<&'static Experiment> {
    registry().iter().find(|e| e.id == id).ok_or_else(|| Error::UnknownExperiment(id.to_string()))
}

impl Experiment {
    /// Runs the experiment with the given overrides.
    pub fn execute(&self, overrides: &Overrides) -> Result<ExperimentReport> {
        let parameters = self.defaults.resolve(overrides);
        let start = Instant::now();
        let outcome = (self.run)(&parameters).map_err(|e| Error::Experiment { id: self.id.to_string(), source: Box::new(e) })?;
        let wall_clock_seconds = start.elapsed().as_secs_f64();
        let primary = outcome.checks.first().cloned().unwrap_or_else(|| Check::undefined("no checks", f64::NAN));
        Ok(ExperimentReport {
            id: self.id.to_string(),
            claim: self.claim.to_string(),
            left: primary.value,
            right: primary.target,
            residual: primary.residual,
            tolerance: primary.tolerance,
            passed: !outcome.checks.is_empty() && outcome.checks.iter().all(|c| c.passed),
            wall_clock_seconds,
            parameters,
            checks: outcome.checks,
            notes: outcome.notes,
            tables: outcome.tables,
        })
    }
}

/// Runs one experiment, or every registered experiment for `"all"`.
///
/// Experiments run in parallel on the current rayon pool; reports come back
/// in registry order regardless of scheduling.
pub fn run(id: &str, overrides: &Overrides) -> Result<Vec<ExperimentReport>> {
    if id == "all" {
        registry().par_iter().map(|e| e.execute(overrides)).collect()
    } else {
        Ok(vec![find(id)?.execute(overrides)?])
    }
}

/// A sweep over one parameter.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub id: String,
    pub parameter: Parameter,
    pub values: Vec<f64>,
    pub reports: Vec<ExperimentReport>,
    /// `max |left(v) − left(v₀)|` over the sweep.
    pub max_deviation: f64,
    /// Observed convergence orders of the primary residual between
    /// consecutive values, `ln(r_i/r_{i+1}) / ln(v_{i+1}/v_i)`.
    pub observed_orders: Vec<f64>,
    pub all_passed: bool,
}

/// Runs an experiment once per parameter value.
pub fn sweep(parameter: Parameter, values: &[f64], id: &str, overrides: &Overrides) -> Result<SweepReport> {
    let experiment = find(id)?;
    if !experiment.sweepable.contains(&parameter) {
        return Err(Error::NotSweepable { id: id.to_string(), parameter: parameter.to_string() });
    }
    let reports: Vec<ExperimentReport> = values
        .par_iter()
        .map(|&v| experiment.execute(&overrides.with(parameter, v)?))
        .collect::<Result<_>>()?;
    let first = reports.first().map(|r| r.left).unwrap_or(f64::NAN);
    let max_deviation = reports.iter().map(|r| (r.left - first).abs()).fold(0.0, f64::max);
    let observed_orders = reports
        .windows(2)
        .zip(values.windows(2))
        .map(|(r, v)| (r[0].residual / r[1].residual).ln() / (v[1] / v[0]).ln())
        .collect();
    Ok(SweepReport {
        id: id.to_string(),
        parameter,
        values: values.to_vec(),
        all_passed: reports.iter().all(|r| r.passed),
        reports,
        max_deviation,
        observed_orders,
    })
}

/// Everything one CLI invocation produced.
#[derive(Clone, Debug, Serialize)]
pub struct Invocation {
    pub command: String,
    /// Accepted for reproducibility bookkeeping; no core path is random.
    pub seed: Option<u64>,
    pub reports: Vec<ExperimentReport>,
    pub sweeps: Vec<SweepReport>,
}

impl Invocation {
    /// True iff every report (including sweep reports) passed.
    pub fn all_passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed) && self.sweeps.iter().all(|s| s.all_passed)
    }
}

fn write_checks_csv(path: &Path, report: &ExperimentReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["check", "value", "target", "residual", "tolerance", "passed"])?;
    for c in &report.checks {
        w.write_record([
            c.name.clone(),
            format!("{:.17e}", c.value),
            format!("{:.17e}", c.target),
            format!("{:.17e}", c.residual),
            format!("{:.17e}", c.tolerance),
            c.passed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_tables(plots: &Path, prefix: &str, report: &ExperimentReport) -> Result<()> {
    for table in &report.tables {
        let file = fs::File::create(plots.join(format!("{prefix}-{}.csv", table.name)))?;
        table.write_csv(file)?;
    }
    Ok(())
}

/// Writes `report.json`, one checks CSV per experiment (and per sweep), and
/// the tables under `plots/`.
pub fn write_artifacts(dir: &Path, invocation: &Invocation) -> Result<()> {
    let plots = dir.join("plots");
    fs::create_dir_all(&plots)?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(invocation)?)?;
    for report in &invocation.reports {
        write_checks_csv(&dir.join(format!("{}.csv", report.id)), report)?;
        write_tables(&plots, &report.id, report)?;
    }
    for s in &invocation.sweeps {
        let stem = format!("sweep-{}-{}", s.id, s.parameter);
        let mut w = csv::Writer::from_path(dir.join(format!("{stem}.csv")))?;
        w.write_record(["value", "left", "right", "residual", "tolerance", "passed"])?;
        for (v, r) in s.values.iter().zip(&s.reports) {
            w.write_record([
                format!("{v}"),
                format!("{:.17e}", r.left),
                format!("{:.17e}", r.right),
                format!("{:.17e}", r.residual),
                format!("{:.17e}", r.tolerance),
                r.passed.to_string(),
            ])?;
        }
        w.flush()?;
        for (v, r) in s.values.iter().zip(&s.reports) {
            write_tables(&plots, &format!("{stem}={v}"), r)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Scenario helpers

fn scenario(p: &Parameters, bulk: BulkShape, mass: MassProfile, bcs: Vec<BoundaryCondition>) -> Result<Scenario> {
    validate(Scenario { boundary: BoundaryModel::with_flux(p.flux), bulk, mass, bcs, numerics: p.numerics.clone() })
}

fn finite(p: &Parameters, mass: MassProfile) -> Result<Scenario> {
    finite_with(p, mass, vec![BoundaryCondition::PiVPlus, BoundaryCondition::PiVMinus])
}

fn finite_with(p: &Parameters, mass: MassProfile, bcs: Vec<BoundaryCondition>) -> Result<Scenario> {
    scenario(p, BulkShape::FiniteCylinder { length: 1.0 }, mass, bcs)
}

fn doubled(p: &Parameters, mass: MassProfile) -> Result<Scenario> {
    scenario(p, BulkShape::DoubledCylinder { length: 1.0 }, mass, Vec::new())
}

fn boundary_data(p: &Parameters) -> BoundaryEigendata {
    eigendata(&BoundaryModel::with_flux(p.flux), p.numerics.mode_cutoff)
}

const MASSLESS: MassProfile = MassProfile::Constant { value: 0.0 };

/// Turns the failures that mean "this quantity does not exist here" into a
/// failed check; every other error propagates.
fn defined<T>(name: &str, result: Result<T>, outcome: &mut Outcome) -> Result<Option<T>> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(Error::KernelPresent { mu }) => {
            outcome.checks.push(Check::undefined(name, mu));
            outcome.notes.push(format!("{name}: undefined, the spectrum has a zero mode (|mu| = {mu:.3e})"));
            Ok(None)
        }
        Err(Error::SpectralGapAbsent { mu, threshold }) => {
            outcome.checks.push(Check::undefined(name, mu));
            outcome.notes.push(format!("{name}: no spectral gap, eigenvalue {mu:.3e} below {threshold}"));
            Ok(None)
        }
        Err(Error::NotConstantInT { deviation }) => {
            outcome.checks.push(Check::undefined(name, deviation));
            outcome.notes.push(format!("{name}: supertrace varies with t by {deviation:.3e}"));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn spectrum_table(name: &str, spectrum: &modes::Spectrum) -> Table {
    let mut t = Table::new(name, &["mu", "multiplicity", "block_lambda"]);
    t.rows = spectrum.eigenvalues.iter().map(|e| vec![e.mu, e.multiplicity as f64, e.block_lambda]).collect();
    t
}

fn expand(values: &[modes::Eigenvalue], limit: f64) -> Vec<f64> {
    values
        .iter()
        .filter(|e| e.mu.abs() <= limit)
        .flat_map(|e| std::iter::repeat(e.mu).take(e.multiplicity))
        .collect()
}

// ---------------------------------------------------------------------------
// Experiments

fn finite_cylinder_index(p: &Parameters) -> Result<Outcome> {
    let s = finite(p, MASSLESS)?;
    let n_plus = boundary_data(p).n_plus as f64;
    let index = modes::index(&s)? as f64;
    let kernel = modes::kernel(&s)?;
    let mut out = Outcome::default();
    out.checks.push(Check::close("index", index, -n_plus, 0.0));
    out.checks.push(Check::close("kernel dimension", kernel.dimension as f64, n_plus, 0.0));
    let chirality_error = kernel.basis.iter().map(|v| (v.chirality + 1.0).abs()).fold(0.0, f64::max);
    out.checks.push(Check::close("max |<Gamma_S> + 1| over the kernel", chirality_error, 0.0, 1e-6));
    // In the kernel block the second slot is the gamma*psi coefficient.
    let off_direction = kernel
        .basis
        .iter()
        .map(|v| {
            let g = v.samples.iter().map(|s| s.1.abs()).fold(0.0, f64::max);
            let h = v.samples.iter().map(|s| s.2.abs()).fold(0.0, f64::max);
            if v.block_lambda != 0.0 {
                f64::INFINITY
            } else {
                g / h.max(f64::MIN_POSITIVE)
            }
        })
        .fold(0.0, f64::max);
    out.checks.push(Check::close("kernel component along psi relative to gamma*psi", off_direction, 0.0, 1e-6));
    let mut profile = Table::new("kernel-profile", &["vector", "u", "psi", "gamma_psi"]);
    for (i, v) in kernel.basis.iter().enumerate() {
        for &(u, g, h) in &v.samples {
            profile.rows.push(vec![i as f64, u, g, h]);
        }
    }
    out.tables.push(profile);
    Ok(out)
}

/// Largest matched residual, unmatched count, and pairs, for the blocks
/// with `λ ∈ {0, 1, 2, 3}` at grid size `n`.
fn oracle_agreement(blocks: &[modes::ModeBlock], numerics: &Numerics, n: usize) -> Result<(f64, usize, Vec<Vec<f64>>)> {
    let mut worst = 0.0f64;
    let mut unmatched = 0;
    let mut rows = Vec::new();
    for b in blocks.iter().filter(|b| [0.0, 1.0, 2.0, 3.0].contains(&b.lambda.abs())) {
        let analytic = expand(&modes::solve_analytic(b, numerics)?, 10.0);
        let discrete = expand(&modes::solve_discretized(b, n, 12.0)?, 12.0);
        let m = match_eigenvalues(&analytic, &discrete, 0.25);
        // Discrete values just beyond |μ| = 10 may legitimately lack a partner.
        unmatched += m.unmatched_first.len() + m.unmatched_second.iter().filter(|v| v.abs() <= 10.0 - 0.25).count();
        worst = worst.max(m.max_residual);
        rows.extend(m.pairs.iter().filter(|(a, _)| a.abs() <= 10.0).map(|&(a, d)| vec![b.lambda, a, d, (a - d).abs()]));
    }
    Ok((worst, unmatched, rows))
}

fn finite_cylinder_spectrum(p: &Parameters) -> Result<Outcome> {
    let s = finite(p, MASSLESS)?;
    let blocks = modes::reduce(&s)?;
    let n = p.numerics.grid_points;
    let mut out = Outcome::default();
    let (fine, unmatched, rows) = oracle_agreement(&blocks, &p.numerics, n)?;
    out.checks.push(Check::close("max |mu_transfer - mu_discrete| at N", fine, 0.0, 1e-3));
    out.checks.push(Check::close("unmatched eigenvalues", unmatched as f64, 0.0, 0.0));
    if n >= 64 {
        let (coarse, _, _) = oracle_agreement(&blocks, &p.numerics, n / 4)?;
        let (mid, _, _) = oracle_agreement(&blocks, &p.numerics, n / 2)?;
        let orders = [(coarse / mid).log2(), (mid / fine).log2()];
        for (i, order) in orders.iter().enumerate() {
            out.checks.push(Check::close(&format!("observed order {}", i + 1), *order, 2.0, 0.25));
        }
        out.notes.push(format!("residuals at N/4, N/2, N: {coarse:.3e}, {mid:.3e}, {fine:.3e}"));
    }
    let mut table = Table::new("oracle-pairs", &["lambda", "mu_transfer", "mu_discrete", "residual"]);
    table.rows = rows;
    out.tables.push(table);
    Ok(out)
}

fn closed_form_law(p: &Parameters) -> Result<Outcome> {
    let s = finite(p, MASSLESS)?;
    let blocks = modes::reduce(&s)?;
    let mut worst_kernel = 0.0f64;
    let mut worst_positive = 0.0f64;
    let mut table = Table::new("law", &["lambda", "mu", "nearest_law_value", "effective_j"]);
    for b in blocks.iter().filter(|b| [0.0, 1.0, 2.0, 3.0].contains(&b.lambda.abs())) {
        let l = b.lambda.abs();
        for mu in expand(&modes::solve_analytic(b, &p.numerics)?, 10.0) {
            let j_eff = ((mu * mu - l * l).max(0.0)).sqrt() / PI;
            let nearest = (l * l + (PI * j_eff.round()).powi(2)).sqrt();
            let residual = (mu.abs() - nearest).abs();
            if l == 0.0 {
                worst_kernel = worst_kernel.max(residual);
            } else {
                worst_positive = worst_positive.max(residual);
            }
            table.rows.push(vec![l, mu, nearest.copysign(mu), j_eff]);
        }
    }
    let mut out = Outcome::default();
    out.checks.push(Check::close("max distance to the law, lambda > 0", worst_positive, 0.0, 1e-3));
    out.checks.push(Check::close("max distance to mu = pi j, kernel block", worst_kernel, 0.0, 1e-3));
    out.tables.push(table);
    Ok(out)
}

fn mass_flip(p: &Parameters, bulk_finite: bool) -> Result<(Outcome, f64)> {
    let make = |mass| if bulk_finite { finite(p, mass) } else { doubled(p, mass) };
    let plus = make(MassProfile::Constant { value: p.m })?;
    let minus = make(MassProfile::Constant { value: -p.m })?;
    let a = modes::spectrum(&plus, Method::Analytic)?;
    let b = modes::spectrum(&minus, Method::Analytic)?;
    let mut out = Outcome::default();
    let diff = defined("(eta+ - eta-)/2", eta::eta_difference(&a, &b, &p.numerics.eta, p.numerics.kernel_tolerance), &mut out)?;
    let half = diff.as_ref().map(|d| d.value / 2.0).unwrap_or(f64::NAN);
    if let Some(d) = diff {
        out.notes.push(format!("error estimate {:.3e}, levels {:?}", d.error_estimate, d.levels));
    }
    out.tables.push(spectrum_table("spectrum-plus", &a));
    out.tables.push(spectrum_table("spectrum-minus", &b));
    Ok((out, half))
}

fn cylinder_mass_flip(p: &Parameters) -> Result<Outcome> {
    let index = modes::index(&finite(p, MASSLESS)?)? as f64;
    let (mut out, half) = mass_flip(p, true)?;
    if half.is_finite() {
        out.checks.insert(0, Check::close("(eta+ - eta-)/2 vs index", half, index, 1e-3));
    }
    Ok(out)
}

fn closed_mass_flip(p: &Parameters) -> Result<Outcome> {
    let closed = doubled(p, MASSLESS)?;
    let index = eta::mckean_singer(&closed, &[0.05, 0.2, 1.0])?.index as f64;
    let (mut out, half) = mass_flip(p, false)?;
    if half.is_finite() {
        out.checks.insert(0, Check::close("(eta+ - eta-)/2 vs index", half, index, 1e-3));
        out.checks.push(Check::close("closed index", index, 0.0, 0.0));
    }
    Ok(out)
}

fn domain_wall_index(p: &Parameters) -> Result<Outcome> {
    let n_plus = boundary_data(p).n_plus as f64;
    // The doubled cylinder is the double of the unit finite cylinder, whose
    // two boundary circles each carry Pi_V+ in their inward frame.
    let circles = 2.0;
    let aps = finite_with(p, MASSLESS, vec![BoundaryCondition::PiVPlus, BoundaryCondition::PiVPlus])?;
    let index = modes::index(&aps)? as f64;
    let wall = doubled(p, MassProfile::SmoothWall { m: p.m, steepness: p.steepness })?;
    let constant = doubled(p, MassProfile::Constant { value: -p.m })?;
    let mut out = Outcome::default();
    let result = defined("Delta eta / 2 - n_+", eta::domain_wall_eta_difference(&wall, &constant), &mut out)?;
    if let Some(d) = result {
        let lhs = d.eta.value / 2.0 - circles * n_plus;
        out.checks.insert(0, Check::close("Delta eta / 2 - n_+ vs index", lhs, index, 2e-3));
        out.notes.push(format!(
            "wall gap {:.6e}, constant gap {:.6e}, error estimate {:.3e}",
            d.wall_gap, d.constant_gap, d.eta.error_estimate
        ));
    } else {
        let a = modes::spectrum(&wall, Method::Analytic)?;
        let b = modes::spectrum(&constant, Method::Analytic)?;
        if let Ok((r, da, db)) = eta::eta_difference_reduced(&a, &b, &p.numerics.eta, p.numerics.kernel_tolerance) {
            out.notes.push(format!(
                "diagnostic only: with {da} + {db} zero modes removed, Delta eta / 2 - n_+ = {:.6e} (index {index})",
                r.value / 2.0 - circles * n_plus
            ));
        }
        out.tables.push(spectrum_table("wall-spectrum", &a));
    }
    out.notes.push(format!("boundary-value index {index}, n_+ per circle {n_plus}, circles {circles}"));
    Ok(out)
}

fn virtual_codimension_experiment(p: &Parameters) -> Result<Outcome> {
    let eig = boundary_data(p);
    let n_plus = eig.n_plus as f64;
    let pi_plus = eig.projection(&ProjectionLabel::PiVPlus)?;
    let p_geq = eig.projection(&ProjectionLabel::NonNegative)?;
    let vc = virtual_codimension(&pi_plus, &p_geq, 1e-8)?;
    let with_pi = modes::fredholm_index(&finite(p, MASSLESS)?)?;
    let with_geq = modes::fredholm_index(&finite_with(p, MASSLESS, vec![BoundaryCondition::PGeq, BoundaryCondition::PiVMinus])?)?;
    let mut out = Outcome::default();
    out.checks.push(Check::close("i(Pi_V+, P_>=)", vc.value as f64, n_plus, 0.0));
    out.checks.push(Check::close(
        "ind(Pi_V+) - ind(P_>=)",
        (with_pi.value - with_geq.value) as f64,
        n_plus,
        0.0,
    ));
    out.notes.push(format!(
        "K = {}: kernel {} / cokernel {}; Fredholm (ker, coker) with Pi_V+: ({}, {}), with P_>=: ({}, {})",
        p.numerics.mode_cutoff, vc.kernel_dim, vc.cokernel_dim, with_pi.kernel_dim, with_pi.cokernel_dim, with_geq.kernel_dim, with_geq.cokernel_dim
    ));
    Ok(out)
}

fn wall_vs_constant(p: &Parameters) -> Result<Outcome> {
    let index = modes::index(&finite(p, MASSLESS)?)? as f64;
    let wall = finite(p, MassProfile::SmoothWall { m: p.m, steepness: p.steepness })?;
    let constant = finite(p, MassProfile::Constant { value: p.m })?;
    let a = modes::spectrum(&wall, Method::Analytic)?;
    let b = modes::spectrum(&constant, Method::Analytic)?;
    let mut out = Outcome::default();
    let result = defined("eta(wall) - eta(constant)", eta::eta_difference(&a, &b, &p.numerics.eta, p.numerics.kernel_tolerance), &mut out)?;
    if let Some(d) = result {
        out.checks.insert(0, Check::close("eta(wall) - eta(constant) vs -2 index", d.value, -2.0 * index, 2e-3));
        out.notes.push(format!("error estimate {:.3e}", d.error_estimate));
    } else if let Ok((r, da, db)) = eta::eta_difference_reduced(&a, &b, &p.numerics.eta, p.numerics.kernel_tolerance) {
        out.notes.push(format!(
            "diagnostic only: with {da} + {db} zero modes removed the difference is {:.6e} (target {})",
            r.value,
            -2.0 * index
        ));
    }
    out.notes.push(format!("wall min |mu| = {:.3e}", a.min_abs()));
    out.tables.push(spectrum_table("wall-spectrum", &a));
    Ok(out)
}

fn gluing_base(p: &Parameters) -> Scenario {
    Scenario {
        boundary: BoundaryModel::with_flux(p.flux),
        bulk: BulkShape::FiniteCylinder { length: 1.0 },
        mass: MASSLESS,
        bcs: vec![BoundaryCondition::PiVPlus, BoundaryCondition::PiVMinus],
        numerics: p.numerics.clone(),
    }
}

fn gluing_defect(p: &Parameters) -> Result<Outcome> {
    let eig = boundary_data(p);
    let g = eta::gluing_defect(&gluing_base(p), p.m, p.r)?;
    let expected = -(g.cuts as f64) * eig.n_plus as f64;
    let mut out = Outcome::default();
    out.checks.push(Check::close("delta vs -n_+ over all cut circles", g.delta.value, expected, 2e-3));
    out.checks.push(Check::at_most("|delta^L| vs large-time bound", g.large_time.abs(), g.large_time_bound));
    let eps = p.numerics.eta.split_epsilon;
    let tx = heat::theta_and_xi(&eig, p.m, p.r, eps, &[0.0], 64)?;
    let theta_max = tx.theta.iter().map(|v| v.abs()).fold(0.0, f64::max);
    out.checks.push(Check::close("max |Theta(t)| on the grid", theta_max, 0.0, 1e-12));
    out.checks.push(Check::close("xi_R(0)", tx.xi[0].1, 0.0, 1e-12));
    out.notes.push(format!(
        "delta = {:.9} (error estimate {:.3e}), delta^S = {:.6e}, delta^L = {:.3e}, bound {:.3e}, gap c0 = {:.6}, cuts = {}, per cut = {:.9}",
        g.delta.value,
        g.delta.error_estimate,
        g.small_time,
        g.large_time,
        g.large_time_bound,
        g.gap,
        g.cuts,
        g.delta.value / g.cuts as f64
    ));
    let grid = heat::log_grid(1e-4, 4.0 * heat::small_time_limit(p.r, eps), 64);
    let mut curve = Vec::new();
    g.write_curve_csv(&mut curve, &grid)?;
    let mut density = Table::new("delta-density", &["t", "delta_density"]);
    let mut reader = csv::Reader::from_reader(curve.as_slice());
    for record in reader.records() {
        let record = record?;
        density.rows.push(record.iter().map(|x| x.parse().unwrap_or(f64::NAN)).collect());
    }
    out.tables.push(density);
    let mut theta = Table::new("theta", &["t", "theta"]);
    theta.rows = tx.t_grid.iter().zip(&tx.theta).map(|(&t, &v)| vec![t, v]).collect();
    out.tables.push(theta);
    Ok(out)
}

fn spectral_gap(p: &Parameters) -> Result<Outcome> {
    let mut out = Outcome::default();
    let mut c0 = f64::INFINITY;
    let mut table = Table::new("gap", &["R", "whole", "first_piece", "second_piece"]);
    for r in [p.r, 2.0 * p.r, 4.0 * p.r] {
        let mut row = vec![r];
        for s in gluing_scenarios(&gluing_base(p), p.m, r) {
            let gap = modes::spectrum(&validate(s)?, Method::Analytic)?.min_abs();
            c0 = c0.min(gap);
            row.push(gap);
        }
        table.rows.push(row);
    }
    out.checks.push(Check::at_least("c0 = min |mu| over R", c0, 0.5));
    out.tables.push(table);
    Ok(out)
}

fn small_time_limits(p: &Parameters) -> Result<Outcome> {
    let eig = boundary_data(p);
    let l = heat::small_time_limits(p.r, p.m, p.numerics.eta.split_epsilon, &eig)?;
    let mut out = Outcome::default();
    out.checks.push(Check::close("a-term vs n_+", l.a_term, eig.n_plus as f64, 1e-3));
    out.checks.push(Check::at_most("|G-term|", l.g_term.abs(), 1e-3));
    out.notes.push(format!("a-term at s = 1e-3 (carries m^-s): {:.6}", l.a_term_small_s));
    let mut table = Table::new("g-bound", &["t", "g", "g_unit_weight", "bound_shape"]);
    for t in heat::log_grid(1e-2, 4.0, 24) {
        let g = heat::g_bound(p.r, t, &eig)?;
        table.rows.push(vec![t, g.value, g.unit_weight, g.bound_shape]);
    }
    out.tables.push(table);
    Ok(out)
}

const HEAT_TIME: f64 = 0.5;

fn heat_kernel_residuals(p: &Parameters) -> Result<Outcome> {
    let eig = boundary_data(p);
    let mut out = Outcome::default();
    let mut worst = Vec::new();
    for variant in [KernelVariant::HalfPlus, KernelVariant::HalfMinus] {
        let spec = CylinderKernelSpec { variant, eigendata: &eig, mass: p.m, time: HEAT_TIME };
        let r = heat::residuals(&spec)?;
        worst.push((variant, r));
    }
    let max = |f: fn(&heat::KernelResiduals) -> f64| worst.iter().map(|(_, r)| f(r)).fold(0.0, f64::max);
    out.checks.push(Check::close("max boundary-condition residual", max(|r| r.dirichlet), 0.0, 1e-6));
    out.checks.push(Check::close("max derivative-condition residual", max(|r| r.derivative), 0.0, 1e-6));
    let infinite = CylinderKernelSpec { variant: KernelVariant::Infinite, eigendata: &eig, mass: p.m, time: HEAT_TIME };
    let grid: Vec<f64> = (0..6).map(|i| -1.0 + 0.4 * i as f64).collect();
    let infinite_heat = heat::heat_equation_residual(&infinite, &grid, &grid)?;
    out.checks.push(Check::close("max heat-equation residual", max(|r| r.heat_equation).max(infinite_heat), 0.0, 1e-6));
    for (variant, r) in &worst {
        out.notes.push(format!("{variant:?}: {r:?}"));
    }
    Ok(out)
}

fn infinite_trace_zero(p: &Parameters) -> Result<Outcome> {
    let eig = boundary_data(p);
    let infinite = CylinderKernelSpec { variant: KernelVariant::Infinite, eigendata: &eig, mass: p.m, time: HEAT_TIME };
    let plus = CylinderKernelSpec { variant: KernelVariant::HalfPlus, ..infinite };
    let minus = CylinderKernelSpec { variant: KernelVariant::HalfMinus, ..infinite };
    let mut worst_infinite = 0.0f64;
    let mut worst_half = 0.0f64;
    let mut table = Table::new("gamma-traces", &["u", "infinite", "half_plus_direct", "half_plus_closed"]);
    for i in 0..16 {
        let u = 0.05 + 0.2 * i as f64;
        let inf = heat::gamma_trace_direct(&infinite, u)?;
        let direct = heat::gamma_trace_direct(&plus, u)?;
        let closed = heat::gamma_trace_half(&plus, u)?;
        let mirrored = (heat::gamma_trace_direct(&minus, -u)? - heat::gamma_trace_half(&minus, -u)?).abs();
        worst_infinite = worst_infinite.max(inf.abs());
        worst_half = worst_half.max((direct - closed).abs()).max(mirrored);
        table.rows.push(vec![u, inf, direct, closed]);
    }
    let mut out = Outcome::default();
    out.checks.push(Check::close("max |Gamma-trace| of the infinite-cylinder kernel", worst_infinite, 0.0, 1e-14));
    out.checks.push(Check::close("half-cylinder trace: direct vs closed form", worst_half, 0.0, 1e-12));
    out.tables.push(table);
    Ok(out)
}

fn cutoff_trace_identity(p: &Parameters) -> Result<Outcome> {
    let eig = boundary_data(p);
    let cut = heat::CutoffFunctions::new(p.r);
    let mut worst = 0.0f64;
    let mut identity = 0.0f64;
    let mut table = Table::new("cutoff-trace", &["t", "direct", "by_parts"]);
    for t in [0.01, 0.05, 0.3, 1.0, 3.0] {
        let d = heat::delta_c_integral(p.r, p.m, t, &eig, &cut)?;
        let scale = d.direct.abs().max(p.m * (-p.m * p.m * t).exp()).max(f64::MIN_POSITIVE);
        worst = worst.max((d.direct - d.by_parts).abs() / scale);
        identity = identity.max(d.identity_residual);
        table.rows.push(vec![t, d.direct, d.by_parts]);
    }
    let mut out = Outcome::default();
    out.checks.push(Check::close("relative |direct - by parts|", worst, 0.0, 1e-8));
    out.checks.push(Check::close("per-eigenvalue identity residual", identity, 0.0, 1e-8));
    let mut cut_table = Table::new("cutoffs", &["u", "phi1", "phi2", "psi1", "psi2"]);
    cut_table.rows = cut.sample(200).into_iter().map(|r| r.to_vec()).collect();
    out.tables.push(table);
    out.tables.push(cut_table);
    Ok(out)
}

fn supertrace_constancy(p: &Parameters) -> Result<Outcome> {
    let n_plus = boundary_data(p).n_plus as f64;
    let times = [0.05, 0.2, 1.0];
    let mut out = Outcome::default();
    let mut table = Table::new("supertrace", &["scenario", "t", "supertrace"]);
    let cases = [("finite cylinder", finite(p, MASSLESS)?, -n_plus), ("closed doubled cylinder", doubled(p, MASSLESS)?, 0.0)];
    for (k, (name, s, target)) in cases.into_iter().enumerate() {
        if let Some(st) = defined(&format!("{name}: supertrace"), eta::mckean_singer(&s, &times), &mut out)? {
            out.checks.push(Check::close(&format!("{name}: index"), st.index as f64, target, 0.0));
            out.checks.push(Check::close(&format!("{name}: deviation across t"), st.deviation, 0.0, 1e-6));
            table.rows.extend(st.samples.iter().map(|&(t, v)| vec![k as f64, t, v]));
        }
    }
    out.tables.push(table);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_unique_and_sweepable_parameters_declared() {
        let mut ids: Vec<&str> = registry().iter().map(|e| e.id).collect();
        ids.sort_unstable();
        let n = ids.len();
        ids.dedup();
        assert_eq!(ids.len(), n);
        assert!(registry().iter().all(|e| !e.sweepable.is_empty()));
    }

    #[test]
    fn unknown_experiment_is_reported() {
        assert!(matches!(run("no-such-experiment", &Overrides::default()), Err(Error::UnknownExperiment(_))));
    }

    #[test]
    fn parameters_parse() {
        assert_eq!("R".parse::<Parameter>().unwrap(), Parameter::R);
        assert_eq!("m".parse::<Parameter>().unwrap(), Parameter::M);
        assert!("x".parse::<Parameter>().is_err());
        assert!(Overrides::default().with(Parameter::N, 10.5).is_err());
    }

    #[test]
    fn check_semantics() {
        assert!(Check::close("a", 1.0, 1.0005, 1e-3).passed);
        assert!(!Check::close("a", f64::NAN, 1.0, 1e-3).passed);
        assert!(Check::at_least("c", 0.6, 0.5).passed);
        assert!(!Check::at_most("c", 0.6, 0.5).passed);
        assert!(!Check::undefined("u", 0.0).passed);
    }
}
