//! Scenario description: boundary circle, bulk shape, mass profile,
//! boundary conditions and numerical parameters.
//!
//! Every downstream computation is a pure function of a validated
//! [`Scenario`]. Scenarios round-trip through TOML with the field names used
//! here; `docs/scenario-schema.md` documents the format.

use crate::boundary;
use crate::error::{Error, Result};
use crate::numerics::quad;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Integer-flux detection threshold: the boundary operator has a kernel iff
/// the flux is within this distance of an integer.
pub const INTEGER_FLUX_TOLERANCE: f64 = 1e-12;

fn default_circumference() -> f64 {
    2.0 * PI
}

fn default_length() -> f64 {
    1.0
}

/// The boundary circle with its twisted Dirac operator
/// `D_Y = diag(+1, −1)·(−i d/dθ − α)` acting on two-component sections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryModel {
    /// Length of the circle; the angular coordinate is rescaled so that the
    /// Fourier mode `k` has eigenvalue `(2π/circumference)·(k − α)`.
    #[serde(default = "default_circumference")]
    pub circumference: f64,
    /// Flux `α`, stored exactly as given.
    #[serde(default)]
    pub flux: f64,
}

impl Default for BoundaryModel {
    fn default() -> Self {
        Self { circumference: default_circumference(), flux: 0.0 }
    }
}

impl BoundaryModel {
    /// Boundary model on the standard circle with the given flux.
    pub fn with_flux(flux: f64) -> Self {
        Self { flux, ..Self::default() }
    }

    /// Factor converting `k − α` into an eigenvalue of `D_Y`.
    pub fn frequency_scale(&self) -> f64 {
        2.0 * PI / self.circumference
    }

    /// The Fourier mode carrying the kernel, if the flux is integral.
    pub fn kernel_mode(&self) -> Option<i64> {
        let r = self.flux.round();
        ((self.flux - r).abs() < INTEGER_FLUX_TOLERANCE).then_some(r as i64)
    }

    /// Whether `D_Y` has a nontrivial kernel.
    pub fn has_kernel(&self) -> bool {
        self.kernel_mode().is_some()
    }
}

/// Which end of the real line a half-cylinder extends towards.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// `u ∈ [−R, 0]`, boundary circle at `u = 0` (an outgoing end).
    Left,
    /// `u ∈ [0, R]`, boundary circle at `u = 0` (an incoming end).
    Right,
}

/// The bulk manifold `Y × I` (or `Y × circle`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BulkShape {
    /// `u ∈ [−L/2, L/2]` with a boundary circle at each end.
    FiniteCylinder {
        #[serde(default = "default_length")]
        length: f64,
    },
    /// A closed circle of circumference `2L` in `u`, `u ∈ [−L, L)`, made of a
    /// copy of `[−L/2, L/2]` and its reflection glued at `u = ±L/2`.
    DoubledCylinder {
        #[serde(default = "default_length")]
        length: f64,
    },
    /// A finite stand-in for a half-infinite cylinder. The boundary circle
    /// at `u = 0` carries the declared condition; the far end is closed by
    /// the complementary condition of the same family.
    HalfCylinder {
        side: Side,
        #[serde(default = "default_length")]
        length: f64,
    },
}

impl BulkShape {
    /// Number of boundary circles that need a boundary condition.
    pub fn boundary_slots(&self) -> usize {
        match self {
            BulkShape::FiniteCylinder { .. } => 2,
            BulkShape::DoubledCylinder { .. } => 0,
            BulkShape::HalfCylinder { .. } => 1,
        }
    }

    /// The `u`-interval (or one period of the circle).
    pub fn extent(&self) -> (f64, f64) {
        match *self {
            BulkShape::FiniteCylinder { length } => (-0.5 * length, 0.5 * length),
            BulkShape::DoubledCylinder { length } => (-length, length),
            BulkShape::HalfCylinder { side: Side::Right, length } => (0.0, length),
            BulkShape::HalfCylinder { side: Side::Left, length } => (-length, 0.0),
        }
    }

    /// Whether the `u`-direction is periodic.
    pub fn is_closed(&self) -> bool {
        matches!(self, BulkShape::DoubledCylinder { .. })
    }

    fn length(&self) -> f64 {
        match *self {
            BulkShape::FiniteCylinder { length }
            | BulkShape::DoubledCylinder { length }
            | BulkShape::HalfCylinder { length, .. } => length,
        }
    }
}

/// The function multiplying `Γ_S` along the cylinder coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MassProfile {
    /// `c·Γ_S` with a signed constant `c`.
    Constant { value: f64 },
    /// `m·κ` with `κ = −1` on one side of each wall and `+1` on the other.
    StepWall { m: f64 },
    /// `m·F_T`, the smoothing of the step wall by the bump of width `2/T`.
    SmoothWall {
        m: f64,
        #[serde(rename = "T")]
        steepness: f64,
    },
}

impl MassProfile {
    /// Whether the profile vanishes identically.
    pub fn is_zero(&self) -> bool {
        matches!(self, MassProfile::Constant { value } if *value == 0.0)
    }

    /// Largest absolute value of the profile.
    pub fn max_abs(&self) -> f64 {
        match *self {
            MassProfile::Constant { value } => value.abs(),
            MassProfile::StepWall { m } | MassProfile::SmoothWall { m, .. } => m.abs(),
        }
    }
}

/// Boundary condition on one boundary circle.
///
/// A condition names a projection `Π` on boundary data in the frame where
/// the cylinder coordinate points into the bulk. At the left end of an
/// interval that is the global frame and the condition is `Π(f|_Y) = 0`. At
/// the right end the boundary value is first carried into that frame by
/// Clifford multiplication, and the condition reads `Π(γ·f|_Y) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BoundaryCondition {
    /// `P_> + pr_{V+}`.
    PiVPlus,
    /// `P_> + pr_{V−}`.
    PiVMinus,
    /// `P_> + P_0`, the classical spectral condition.
    PGeq,
    /// `P_> + pr_L` for a Lagrangian `L` given by coefficient vectors over
    /// the kernel sections (in `kernel_basis` order), each coefficient a
    /// `[re, im]` pair.
    CustomLagrangian { basis: Vec<Vec<[f64; 2]>> },
}

/// One boundary condition per boundary circle, left to right.
pub type BoundaryConditionSpec = Vec<BoundaryCondition>;

/// Parameters of the eta-difference evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EtaParams {
    /// Number of heat-time levels used in the extrapolation to `t → 0`.
    pub levels: usize,
    /// `Λ·√t_min`; the smallest heat time is `(resolution/Λ)²` so that every
    /// discarded eigenvalue is suppressed by `erfc(resolution)`.
    pub resolution: f64,
    /// Ratio `√t_max/√t_min` of the extrapolation window.
    pub spread: f64,
    /// Exponent `ε` of the small/large time split `t = R^{2−ε}`.
    pub split_epsilon: f64,
    /// Minimum `|μ|` required before a domain-wall eta difference is reported.
    pub gap_threshold: f64,
    /// Magnus slabs per smooth wall in the transfer-matrix solver.
    pub wall_slabs: usize,
}

impl Default for EtaParams {
    fn default() -> Self {
        Self {
            levels: 7,
            resolution: 6.0,
            spread: 4.0,
            split_epsilon: 0.1,
            gap_threshold: 0.5,
            wall_slabs: 64,
        }
    }
}

/// Truncation and tolerance parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Boundary Fourier cutoff `K`: modes with `|k − α| ≤ K + 1/2` are kept.
    pub mode_cutoff: usize,
    /// Grid size `N` of the discretized oracle.
    pub grid_points: usize,
    /// Eigenvalues with `|μ|` below this are treated as zero modes.
    pub kernel_tolerance: f64,
    /// Spectral cutoff `Λ`: eigenvalues with `|μ| ≤ Λ` are computed.
    pub spectral_cutoff: f64,
    /// Eta-difference parameters.
    pub eta: EtaParams,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            mode_cutoff: 4,
            grid_points: 400,
            kernel_tolerance: 1e-8,
            spectral_cutoff: 400.0,
            eta: EtaParams::default(),
        }
    }
}

/// A complete geometric and numerical scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub boundary: BoundaryModel,
    pub bulk: BulkShape,
    pub mass: MassProfile,
    #[serde(default)]
    pub bcs: BoundaryConditionSpec,
    #[serde(default)]
    pub numerics: Numerics,
}

impl Scenario {
    /// The standard finite cylinder `[−1/2, 1/2]` with `(Π_{V+}, Π_{V−})`.
    pub fn finite_cylinder(flux: f64, mass: MassProfile) -> Self {
        Self {
            boundary: BoundaryModel::with_flux(flux),
            bulk: BulkShape::FiniteCylinder { length: 1.0 },
            mass,
            bcs: vec![BoundaryCondition::PiVPlus, BoundaryCondition::PiVMinus],
            numerics: Numerics::default(),
        }
    }

    /// The doubled cylinder of circumference `2L`.
    pub fn doubled_cylinder(flux: f64, length: f64, mass: MassProfile) -> Self {
        Self {
            boundary: BoundaryModel::with_flux(flux),
            bulk: BulkShape::DoubledCylinder { length },
            mass,
            bcs: Vec::new(),
            numerics: Numerics::default(),
        }
    }

    /// Parses a scenario from TOML (unvalidated).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Serializes the scenario to TOML.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The mass profile laid out on the bulk coordinate.
    pub fn mass_field(&self) -> MassField {
        MassField { mass: self.mass.clone(), bulk: self.bulk.clone() }
    }

    /// Mass value at `u` (periodically wrapped on closed shapes).
    pub fn mass_at(&self, u: f64) -> f64 {
        self.mass_field().at(u)
    }
}

/// A mass profile placed on a bulk shape: the function `u ↦ M(u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MassField {
    pub mass: MassProfile,
    pub bulk: BulkShape,
}

impl MassField {
    /// Mass value at `u` (periodically wrapped on closed shapes).
    pub fn at(&self, u: f64) -> f64 {
        match (&self.mass, &self.bulk) {
            (MassProfile::Constant { value }, _) => *value,
            (MassProfile::StepWall { m }, BulkShape::DoubledCylinder { length }) => {
                let d = 0.5 * length - wrap(u, *length).abs();
                m * step_sign(d)
            }
            (MassProfile::StepWall { m }, _) => m * step_sign(u),
            (MassProfile::SmoothWall { m, steepness }, BulkShape::DoubledCylinder { length }) => {
                let d = 0.5 * length - wrap(u, *length).abs();
                m * wall_function(d, *steepness)
            }
            (MassProfile::SmoothWall { m, steepness }, _) => m * wall_function(u, *steepness),
        }
    }

    /// Decomposition of the `u`-range into pieces on which the mass is
    /// constant or smooth, left to right.
    pub fn pieces(&self) -> Vec<MassPiece> {
        let (a, b) = self.bulk.extent();
        let mut cuts: Vec<(f64, bool)> = Vec::new(); // (point, starts a smooth piece)
        let mut smooth_ranges: Vec<(f64, f64)> = Vec::new();
        match (&self.mass, &self.bulk) {
            (MassProfile::Constant { .. }, _) => {}
            (MassProfile::StepWall { .. }, BulkShape::DoubledCylinder { length }) => {
                cuts.push((-0.5 * length, false));
                cuts.push((0.5 * length, false));
            }
            (MassProfile::StepWall { .. }, _) => cuts.push((0.0, false)),
            (MassProfile::SmoothWall { steepness, .. }, BulkShape::DoubledCylinder { length }) => {
                let w = 1.0 / steepness;
                smooth_ranges.push((-0.5 * length - w, -0.5 * length + w));
                smooth_ranges.push((0.5 * length - w, 0.5 * length + w));
            }
            (MassProfile::SmoothWall { steepness, .. }, _) => {
                let w = 1.0 / steepness;
                smooth_ranges.push((-w, w));
            }
        }
        for &(lo, hi) in &smooth_ranges {
            cuts.push((lo.max(a), true));
            cuts.push((hi.min(b), false));
        }
        let mut points: Vec<(f64, bool)> = vec![(a, false)];
        points.extend(cuts.into_iter().filter(|(p, _)| *p > a && *p < b));
        points.sort_by(|x, y| x.0.total_cmp(&y.0));
        points.push((b, false));
        // A smooth range starting at the left end of the domain.
        if let Some(&(lo, _)) = smooth_ranges.first() {
            if lo <= a {
                points[0].1 = true;
            }
        }
        let mut pieces = Vec::new();
        for w in points.windows(2) {
            let (lo, smooth) = w[0];
            let hi = w[1].0;
            if hi - lo <= 0.0 {
                continue;
            }
            if smooth {
                pieces.push(MassPiece { a: lo, b: hi, kind: PieceKind::Smooth });
            } else {
                let value = self.at(0.5 * (lo + hi));
                pieces.push(MassPiece { a: lo, b: hi, kind: PieceKind::Flat(value) });
            }
        }
        pieces
    }}

impl MassField {
    /// Average of the mass over `[lo, hi]` (within the domain extent):
    /// exact on constant pieces, Gauss–Legendre on smooth ones.
    pub fn average(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return self.at(lo);
        }
        let rule = &quad::rules().1;
        let mut total = 0.0;
        for piece in self.pieces() {
            let (a, b) = (piece.a.max(lo), piece.b.min(hi));
            if b <= a {
                continue;
            }
            total += match piece.kind {
                PieceKind::Flat(v) => v * (b - a),
                PieceKind::Smooth => rule.integrate(|u| self.at(u), a, b),
            };
        }
        total / (hi - lo)
    }
}

/// A piece of the `u`-range with a uniform description of the mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MassPiece {
    pub a: f64,
    pub b: f64,
    pub kind: PieceKind,
}

/// Whether a mass piece is constant or varies smoothly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PieceKind {
    Flat(f64),
    Smooth,
}

fn step_sign(d: f64) -> f64 {
    if d > 0.0 {
        1.0
    } else if d < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Wraps `u` into `[−L, L)`.
fn wrap(u: f64, length: f64) -> f64 {
    let period = 2.0 * length;
    let mut x = (u + length).rem_euclid(period) - length;
    if x >= length {
        x -= period;
    }
    x
}

/// The unnormalized bump `exp(−1/(1−u²))` on `(−1, 1)`.
pub fn raw_bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| {
        quad::adaptive(&raw_bump, -1.0, 1.0, 1e-16, 1e-15, "bump normalization")
            .expect("the bump integral converges")
            .value
    })
}

/// The even bump `f` with unit integral, supported in `(−1, 1)`.
pub fn bump(u: f64) -> f64 {
    raw_bump(u) / bump_mass()
}

/// `∫_{−1}^{x} f`, computed from the nearer end of the support.
pub fn bump_cumulative(x: f64) -> f64 {
    if x <= -1.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let (lo, hi, flip) = if x <= 0.0 { (-1.0, x, false) } else { (-1.0, -x, true) };
    let part = quad::adaptive(&bump, lo, hi, 1e-16, 1e-15, "bump cumulative")
        .expect("the bump integral converges")
        .value;
    if flip {
        1.0 - part
    } else {
        part
    }
}

/// The smoothed wall `F_T(u) = 2∫_{−∞}^{u} f_T − 1` with `f_T(u) = T f(Tu)`.
pub fn wall_function(u: f64, steepness: f64) -> f64 {
    2.0 * bump_cumulative(steepness * u) - 1.0
}

/// Validates a scenario and fills defaults.
///
/// Boundary conditions may be omitted on shapes with boundary, in which case
/// `(Π_{V+}, Π_{V−})` is used on finite cylinders and the single slot of a
/// half-cylinder gets `Π_{V+}` (right) or `Π_{V−}` (left).
pub fn validate(mut scenario: Scenario) -> Result<Scenario> {
    let b = &scenario.boundary;
    if !(b.circumference.is_finite() && b.circumference > 0.0) {
        return Err(Error::InvalidShape(format!("circumference must be positive, got {}", b.circumference)));
    }
    if !b.flux.is_finite() {
        return Err(Error::InvalidShape("flux must be finite".into()));
    }
    let length = scenario.bulk.length();
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::InvalidShape(format!("length must be positive, got {length}")));
    }
    let slots = scenario.bulk.boundary_slots();
    if slots == 0 && !scenario.bcs.is_empty() {
        return Err(Error::InvalidShape("the doubled cylinder has no boundary; remove the boundary conditions".into()));
    }
    if scenario.bcs.is_empty() {
        scenario.bcs = match scenario.bulk {
            BulkShape::FiniteCylinder { .. } => vec![BoundaryCondition::PiVPlus, BoundaryCondition::PiVMinus],
            BulkShape::HalfCylinder { side: Side::Right, .. } => vec![BoundaryCondition::PiVPlus],
            BulkShape::HalfCylinder { side: Side::Left, .. } => vec![BoundaryCondition::PiVMinus],
            BulkShape::DoubledCylinder { .. } => Vec::new(),
        };
    }
    if scenario.bcs.len() != slots {
        return Err(Error::InvalidShape(format!(
            "shape has {slots} boundary circle(s) but {} boundary condition(s) were given",
            scenario.bcs.len()
        )));
    }
    validate_mass(&scenario)?;
    let n = &scenario.numerics;
    if n.mode_cutoff < 1 {
        return Err(Error::Config("mode_cutoff must be at least 1".into()));
    }
    if n.grid_points < 16 {
        return Err(Error::Config("grid_points must be at least 16".into()));
    }
    let positive = [n.kernel_tolerance, n.spectral_cutoff, n.eta.resolution, n.eta.spread - 1.0, n.eta.split_epsilon, n.eta.gap_threshold];
    if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || n.eta.levels < 2 || n.eta.wall_slabs < 8 {
        return Err(Error::Config("numerical tolerances and cutoffs must be positive (levels ≥ 2, wall_slabs ≥ 8, spread > 1)".into()));
    }
    if n.eta.split_epsilon >= 1.0 {
        return Err(Error::Config("split_epsilon must lie in (0, 1)".into()));
    }
    let eigendata = boundary::eigendata(&scenario.boundary, n.mode_cutoff);
    for bc in &scenario.bcs {
        if let BoundaryCondition::CustomLagrangian { basis } = bc {
            boundary::validate_lagrangian(&eigendata, basis, n.kernel_tolerance)?;
        }
    }
    Ok(scenario)
}

fn validate_mass(scenario: &Scenario) -> Result<()> {
    let length = scenario.bulk.length();
    match (&scenario.mass, &scenario.bulk) {
        (MassProfile::Constant { value }, _) if value.is_finite() => Ok(()),
        (MassProfile::Constant { .. }, _) => Err(Error::InvalidProfile("constant mass must be finite".into())),
        (MassProfile::StepWall { .. } | MassProfile::SmoothWall { .. }, BulkShape::HalfCylinder { .. }) => {
            Err(Error::InvalidProfile("walls would sit on the boundary of a half-cylinder".into()))
        }
        (MassProfile::StepWall { m }, _) if m.is_finite() && *m > 0.0 => Ok(()),
        (MassProfile::StepWall { m }, _) => Err(Error::InvalidProfile(format!("wall mass must be positive, got {m}"))),
        (MassProfile::SmoothWall { m, steepness }, bulk) => {
            if !(m.is_finite() && *m > 0.0 && steepness.is_finite() && *steepness > 0.0) {
                return Err(Error::InvalidProfile(format!("wall needs m > 0 and T > 0, got m = {m}, T = {steepness}")));
            }
            // The smoothing region must stay inside the domain (finite
            // cylinder) or the two walls must not overlap (doubled cylinder).
            if 2.0 / steepness > length + 1e-12 {
                let what = if bulk.is_closed() { "walls overlap" } else { "wall reaches the boundary" };
                return Err(Error::InvalidProfile(format!("{what}: need T ≥ 2/L, got T = {steepness}")));
            }
            // Monotonicity on a fine sample across the smoothing region.
            let w = 1.0 / steepness;
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=400 {
                let u = -w + 2.0 * w * i as f64 / 400.0;
                let v = wall_function(u, *steepness);
                if !v.is_finite() || v < prev - 1e-15 {
                    return Err(Error::InvalidProfile(format!("smoothed wall is not monotone near u = {u}")));
                }
                prev = v;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_integrates_to_one_and_wall_saturates() {
        assert!((bump_cumulative(1.0) - 1.0).abs() < 1e-15);
        assert!((bump_cumulative(0.0) - 0.5).abs() < 1e-14);
        assert_eq!(wall_function(-0.05, 20.0), -1.0);
        assert_eq!(wall_function(0.05, 20.0), 1.0);
        assert!(wall_function(0.0, 20.0).abs() < 1e-14);
    }

    #[test]
    fn doubled_cylinder_step_wall_signs() {
        let s = Scenario::doubled_cylinder(0.0, 1.0, MassProfile::StepWall { m: 3.0 });
        assert_eq!(s.mass_at(0.0), 3.0);
        assert_eq!(s.mass_at(0.9), -3.0);
        assert_eq!(s.mass_at(-0.9), -3.0);
        let pieces = s.mass_field().pieces();
        assert_eq!(pieces.len(), 3);
        assert_eq!(pieces[1].kind, PieceKind::Flat(3.0));
    }

    #[test]
    fn smooth_pieces_cover_the_domain() {
        let s = Scenario::doubled_cylinder(0.0, 1.0, MassProfile::SmoothWall { m: 10.0, steepness: 20.0 });
        let pieces = s.mass_field().pieces();
        assert_eq!(pieces.first().unwrap().a, -1.0);
        assert_eq!(pieces.last().unwrap().b, 1.0);
        assert_eq!(pieces.iter().filter(|p| p.kind == PieceKind::Smooth).count(), 2);
        for w in pieces.windows(2) {
            assert_eq!(w[0].b, w[1].a);
        }
    }
}
