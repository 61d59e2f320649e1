//! Error type shared by every module of the crate.

use thiserror::Error;

/// Everything that can go wrong while validating a scenario or computing
/// spectral data from it.
///
/// Numerical failures carry the offending numbers so that a failed check can
/// be diagnosed from the report alone.
#[derive(Debug, Error)]
pub enum Error {
    /// The bulk shape and the boundary-condition slots are inconsistent, or a
    /// length is not positive.
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    /// A custom Lagrangian is not isotropic for the symplectic form, or does
    /// not complement its Clifford image inside the boundary kernel.
    #[error("invalid Lagrangian subspace: {0}")]
    InvalidLagrangian(String),

    /// The mass profile is not admissible on the chosen shape.
    #[error("invalid mass profile: {0}")]
    InvalidProfile(String),

    /// A boundary vector has a component outside the kernel of the boundary
    /// operator.
    #[error("vector is not in the boundary kernel (off-kernel norm {residual:.3e})")]
    NotInKernel { residual: f64 },

    /// A rank decision could not be made because a singular value sits too
    /// close to the threshold.
    #[error("ill-conditioned rank decision: singular value {sigma:.3e} within a decade of tolerance {tolerance:.3e}")]
    IllConditioned { sigma: f64, tolerance: f64 },

    /// The eigenvalue root search could not resolve a bracket.
    #[error("root search failed on [{lo}, {hi}]: {detail}")]
    RootBracketFailure { lo: f64, hi: f64, detail: String },

    /// An eigenvalue lies between the kernel tolerance and ten times that
    /// tolerance, so it can be classified neither as zero nor as nonzero.
    #[error("ambiguous near-zero eigenvalue {mu:.3e} (kernel tolerance {tolerance:.1e})")]
    AmbiguousKernel { mu: f64, tolerance: f64 },

    /// An index was requested for an operator that is not odd with respect
    /// to the chirality grading.
    #[error("index requires a massless (odd-parity) operator; mass profile is {0}")]
    OddParityViolated(String),

    /// A heat-kernel argument lies outside the half-cylinder it is defined on.
    #[error("point outside the kernel domain: {0}")]
    DomainViolation(String),

    /// An adaptive quadrature ran out of subdivisions.
    #[error("quadrature did not converge for {what}: error estimate {estimate:.3e}")]
    QuadratureNonConvergence { what: String, estimate: f64 },

    /// An eta difference was requested for a spectrum that contains zero.
    #[error("spectrum contains a zero mode ({mu:.3e}); the eta difference is undefined")]
    KernelPresent { mu: f64 },

    /// Two spectra with different truncations were compared.
    #[error("spectral truncations differ: {0}")]
    CutoffMismatch(String),

    /// The McKean–Singer supertrace varied with the heat time.
    #[error("supertrace is not constant in t: deviation {deviation:.3e}")]
    NotConstantInT { deviation: f64 },

    /// A spectrum required to be gapped has an eigenvalue below the threshold.
    #[error("spectral gap absent: eigenvalue {mu:.6e} below required gap {threshold}")]
    SpectralGapAbsent { mu: f64, threshold: f64 },

    /// The experiment registry has no entry with this id.
    #[error("unknown experiment id {0:?}")]
    UnknownExperiment(String),

    /// An experiment failed to produce a report.
    #[error("experiment {id}: {source}")]
    Experiment { id: String, source: Box<Error> },

    /// A sweep parameter does not apply to the experiment.
    #[error("parameter {parameter} cannot be swept for experiment {id}")]
    NotSweepable { id: String, parameter: String },

    /// Scenario file could not be parsed or serialized.
    #[error("configuration error: {0}")]
    Config(String),

    /// Writing an artifact failed.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// CSV serialization failed.
    #[error(transparent)]
    Csv(#[from] csv::Error),

    /// JSON serialization failed.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
