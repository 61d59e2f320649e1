//! Reduction of the two-dimensional operator to one-dimensional Dirac
//! blocks, and the spectral data built from them.
//!
//! Each boundary eigen-pair `(φ, γφ)` with `D_Y φ = λφ`, `λ > 0`, and each
//! kernel pair `(ψ, γψ)` spans an invariant subspace. Writing a section as
//! `f = g(u)·φ + h(u)·γφ`, the operator `γ(∂_u + D_Y) + M(u)Γ_S` acts on
//! `(g, h)` as
//!
//! ```text
//! A = [[ cM,  −∂ + λ ],
//!      [ ∂ + λ,  −cM ]]
//! ```
//!
//! where `c = ±1` is the chirality of `φ`. Eigenfunctions solve the
//! first-order system `(g, h)' = K(u, μ)·(g, h)` with
//! `K = [[−λ, cM + μ], [cM − μ, λ]]`, which the [`transfer`] solver
//! integrates exactly on constant pieces. The [`discrete`] module provides
//! an independent finite-dimensional oracle.
//!
//! Boundary conditions are compressed onto each block as linear constraints
//! `n·(g, h) = 0` at each end.

pub mod discrete;
pub mod transfer;

use crate::boundary::{self, BoundaryEigendata, CMatrix, CVector, SectionId, C64};
use crate::error::{Error, Result};
use crate::model::{BoundaryCondition, BulkShape, MassField, Numerics, Scenario, Side};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

/// The `u`-domain of a block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Geometry {
    /// `u ∈ [a, b]` with boundary conditions at both ends.
    Interval { a: f64, b: f64 },
    /// Periodic `u` with one period starting at `a`.
    Circle { a: f64, period: f64 },
}

impl Geometry {
    /// Length of the interval or period.
    pub fn length(&self) -> f64 {
        match *self {
            Geometry::Interval { a, b } => b - a,
            Geometry::Circle { period, .. } => period,
        }
    }

    /// Left end of the interval or period.
    pub fn start(&self) -> f64 {
        match *self {
            Geometry::Interval { a, .. } | Geometry::Circle { a, .. } => a,
        }
    }
}

/// Constraints `n·(g, h) = 0` imposed at one end of a block.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EndCondition {
    pub rows: Vec<[f64; 2]>,
}

impl EndCondition {
    /// Whether a row constrains only `g` (`slot = 0`) or only `h` (`slot = 1`).
    fn constrains_only(&self, slot: usize) -> bool {
        self.rows.iter().any(|n| n[1 - slot].abs() < 1e-12 && n[slot].abs() > 1e-12)
    }

    /// Whether the condition is rank one (the self-adjoint case for a block).
    pub fn is_separated(&self) -> bool {
        self.rows.len() == 1
    }
}

/// One invariant one-dimensional subsystem of the operator.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeBlock {
    /// Position in the deterministic block order of a scenario.
    pub id: usize,
    /// Boundary eigenvalue `λ ≥ 0`.
    pub lambda: f64,
    /// Chirality `c = ±1` of the section `φ`.
    pub chirality: i8,
    /// Whether this block comes from the boundary kernel.
    pub kernel: bool,
    /// Section carrying `g`.
    pub phi: SectionId,
    /// Section whose `i`-multiple carries `h` (that is, `γφ`).
    pub gamma_phi: SectionId,
    pub geometry: Geometry,
    pub field: MassField,
    pub left: Option<EndCondition>,
    pub right: Option<EndCondition>,
}

impl ModeBlock {
    /// Signed mass `c·M(u)` entering the block.
    pub fn signed_mass(&self, u: f64) -> f64 {
        self.chirality as f64 * self.field.at(u)
    }

    /// Whether the mass vanishes identically.
    pub fn is_massless(&self) -> bool {
        self.field.mass.is_zero()
    }

    /// The reduced Clifford data `(γ₂, σ, Γ₂)` as real 2×2 matrices.
    pub fn reduced_algebra(&self) -> ([[f64; 2]; 2], [[f64; 2]; 2], [[f64; 2]; 2]) {
        let c = self.chirality as f64;
        ([[0.0, -1.0], [1.0, 0.0]], [[1.0, 0.0], [0.0, -1.0]], [[c, 0.0], [0.0, -c]])
    }

    /// The boundary pairing `⟨A f₁, f₂⟩ − ⟨f₁, A f₂⟩ = [g₁h₂ − h₁g₂]` evaluated
    /// from end values (right minus left).
    pub fn boundary_pairing(left: ([f64; 2], [f64; 2]), right: ([f64; 2], [f64; 2])) -> f64 {
        let omega = |x: [f64; 2], y: [f64; 2]| x[0] * y[1] - x[1] * y[0];
        omega(right.0, right.1) - omega(left.0, left.1)
    }
}

/// Constraint rows of a block end: compresses the constraint operator `Q`
/// (boundary condition `Q f = 0`) onto the block basis `(φ, γφ)`.
fn compress(q: &CMatrix, e1: &CVector, e2: &CVector, block: usize) -> Result<EndCondition> {
    let b = CMatrix::from_columns(&[e1.clone(), e2.clone()]);
    let gram = b.adjoint() * q.adjoint() * q * &b;
    let eig = gram.symmetric_eigen();
    let mut rows = Vec::new();
    for i in 0..2 {
        let value = eig.eigenvalues[i];
        if value.abs() < 1e-10 {
            continue;
        }
        if (value - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidLagrangian(format!(
                "boundary condition does not preserve block {block} (compressed eigenvalue {value})"
            )));
        }
        let v = eig.eigenvectors.column(i);
        // Row n with n·x = ⟨v, x⟩, normalized to a real vector.
        let pivot = if v[0].norm() >= v[1].norm() { v[0] } else { v[1] };
        let phase = pivot.conj() / C64::from(pivot.norm());
        let row = [(v[0].conj() * phase.conj()), (v[1].conj() * phase.conj())];
        if row.iter().any(|z| z.im.abs() > 1e-10) {
            return Err(Error::InvalidLagrangian(format!(
                "boundary condition on block {block} couples g and h with a complex phase"
            )));
        }
        rows.push([row[0].re, row[1].re]);
    }
    rows.sort_by(|x, y| y[0].abs().total_cmp(&x[0].abs()));
    Ok(EndCondition { rows })
}

/// Boundary conditions at the two ends of the interval underlying a shape.
fn end_conditions(scenario: &Scenario) -> (Option<&BoundaryCondition>, Option<&BoundaryCondition>) {
    const FAR_RIGHT: BoundaryCondition = BoundaryCondition::PiVMinus;
    const FAR_LEFT: BoundaryCondition = BoundaryCondition::PiVPlus;
    match scenario.bulk {
        BulkShape::FiniteCylinder { .. } => (scenario.bcs.first(), scenario.bcs.get(1)),
        BulkShape::DoubledCylinder { .. } => (None, None),
        BulkShape::HalfCylinder { side: Side::Right, .. } => (scenario.bcs.first(), Some(&FAR_RIGHT)),
        BulkShape::HalfCylinder { side: Side::Left, .. } => (Some(&FAR_LEFT), scenario.bcs.first()),
    }
}

/// Splits a validated scenario into independent blocks: the kernel blocks
/// first, then one block per positive boundary eigenvalue in ascending order.
pub fn reduce(scenario: &Scenario) -> Result<Vec<ModeBlock>> {
    let eig = boundary::eigendata(&scenario.boundary, scenario.numerics.mode_cutoff);
    reduce_with(scenario, &eig)
}

/// [`reduce`] with precomputed boundary eigendata.
pub fn reduce_with(scenario: &Scenario, eig: &BoundaryEigendata) -> Result<Vec<ModeBlock>> {
    let (a, b) = scenario.bulk.extent();
    let geometry = if scenario.bulk.is_closed() {
        Geometry::Circle { a, period: b - a }
    } else {
        Geometry::Interval { a, b }
    };
    let gamma = eig.gamma();
    let (left_bc, right_bc) = end_conditions(scenario);
    let left_q = left_bc.map(|bc| eig.condition_projection(bc)).transpose()?;
    let right_q = right_bc.map(|bc| eig.condition_projection(bc).map(|q| q * &gamma)).transpose()?;

    let mut pairs: Vec<(SectionId, f64, bool)> = Vec::new();
    if let Some(&psi) = eig.kernel_basis.first() {
        pairs.push((psi, 0.0, true));
    }
    for entry in eig.entries.iter().filter(|e| e.lambda > 0.0) {
        pairs.push((entry.section, entry.lambda, false));
    }
    let field = scenario.mass_field();
    pairs
        .into_iter()
        .enumerate()
        .map(|(id, (phi, lambda, kernel))| {
            let gamma_phi = SectionId { mode: phi.mode, component: 3 - phi.component };
            let e1 = eig.unit(phi);
            let e2 = &gamma * &e1;
            let left = left_q.as_ref().map(|q| compress(q, &e1, &e2, id)).transpose()?;
            let right = right_q.as_ref().map(|q| compress(q, &e1, &e2, id)).transpose()?;
            Ok(ModeBlock {
                id,
                lambda,
                chirality: if phi.component == 1 { 1 } else { -1 },
                kernel,
                phi,
                gamma_phi,
                geometry,
                field: field.clone(),
                left,
                right,
            })
        })
        .collect()
}

/// Which solver produced a spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Analytic,
    Discretized,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Analytic => "analytic",
            Method::Discretized => "discretized",
        })
    }
}

/// One eigenvalue of a block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub mu: f64,
    pub multiplicity: usize,
    pub block_id: usize,
    pub block_lambda: f64,
    /// `Γ_S` expectation of the eigenvector (discretized spectra only).
    pub chirality: Option<f64>,
}

/// Sorted eigenvalues with truncation metadata.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<Eigenvalue>,
    pub mode_cutoff: usize,
    pub grid_points: usize,
    pub spectral_cutoff: f64,
    pub method: Method,
}

impl Spectrum {
    /// Builds a spectrum from unsorted entries, sorting by `μ` with ties
    /// broken by block id.
    pub fn assemble(mut eigenvalues: Vec<Eigenvalue>, numerics: &Numerics, method: Method) -> Self {
        eigenvalues.sort_by(|a, b| a.mu.total_cmp(&b.mu).then(a.block_id.cmp(&b.block_id)));
        Self {
            eigenvalues,
            mode_cutoff: numerics.mode_cutoff,
            grid_points: numerics.grid_points,
            spectral_cutoff: numerics.spectral_cutoff,
            method,
        }
    }

    /// Eigenvalues expanded by multiplicity.
    pub fn values(&self) -> Vec<f64> {
        self.eigenvalues.iter().flat_map(|e| std::iter::repeat(e.mu).take(e.multiplicity)).collect()
    }

    /// Total number of eigenvalues counted with multiplicity.
    pub fn count(&self) -> usize {
        self.eigenvalues.iter().map(|e| e.multiplicity).sum()
    }

    /// Smallest `|μ|`, or infinity for an empty spectrum.
    pub fn min_abs(&self) -> f64 {
        self.eigenvalues.iter().map(|e| e.mu.abs()).fold(f64::INFINITY, f64::min)
    }

    /// Eigenvalues of one block.
    pub fn block(&self, block_id: usize) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .filter(|e| e.block_id == block_id)
            .flat_map(|e| std::iter::repeat(e.mu).take(e.multiplicity))
            .collect()
    }

    /// Writes CSV with columns `mu, multiplicity, block_lambda, method`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["mu", "multiplicity", "block_lambda", "method"])?;
        for e in &self.eigenvalues {
            w.write_record([
                format!("{:.15e}", e.mu),
                e.multiplicity.to_string(),
                format!("{:.15e}", e.block_lambda),
                self.method.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Analytic (transfer-matrix or closed-form) spectrum of one block.
pub fn solve_analytic(block: &ModeBlock, numerics: &Numerics) -> Result<Vec<Eigenvalue>> {
    transfer::solve(block, numerics)
}

/// Discretized spectrum of one block at grid size `grid_points`.
pub fn solve_discretized(block: &ModeBlock, grid_points: usize, spectral_cutoff: f64) -> Result<Vec<Eigenvalue>> {
    let d = discrete::solve(block, grid_points)?;
    Ok(d.into_iter().filter(|e| e.mu.abs() <= spectral_cutoff).collect())
}

/// Spectrum of a validated scenario by the chosen method, solving blocks in
/// parallel and merging deterministically.
pub fn spectrum(scenario: &Scenario, method: Method) -> Result<Spectrum> {
    let blocks = reduce(scenario)?;
    let n = &scenario.numerics;
    let per_block: Vec<Vec<Eigenvalue>> = blocks
        .par_iter()
        .map(|block| match method {
            Method::Analytic => solve_analytic(block, n),
            Method::Discretized => solve_discretized(block, n.grid_points, n.spectral_cutoff),
        })
        .collect::<Result<_>>()?;
    Ok(Spectrum::assemble(per_block.into_iter().flatten().collect(), n, method))
}

/// Outcome of pairing two eigenvalue lists.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Matching {
    pub pairs: Vec<(f64, f64)>,
    pub unmatched_first: Vec<f64>,
    pub unmatched_second: Vec<f64>,
    pub max_residual: f64,
}

impl Matching {
    /// Whether every eigenvalue found a partner.
    pub fn complete(&self) -> bool {
        self.unmatched_first.is_empty() && self.unmatched_second.is_empty()
    }
}

/// Greedy nearest-neighbour pairing of two multisets: pairs are accepted in
/// order of increasing distance while both partners are free and the
/// distance is at most `radius`.
pub fn match_eigenvalues(first: &[f64], second: &[f64], radius: f64) -> Matching {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    // Both lists are sorted; only nearby entries can pair.
    let mut b_sorted: Vec<(f64, usize)> = second.iter().copied().enumerate().map(|(i, v)| (v, i)).collect();
    b_sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
    for (i, &a) in first.iter().enumerate() {
        let start = b_sorted.partition_point(|x| x.0 < a - radius);
        for &(b, j) in b_sorted[start..].iter().take_while(|x| x.0 <= a + radius) {
            candidates.push(((a - b).abs(), i, j));
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = vec![false; first.len()];
    let mut used_b = vec![false; second.len()];
    let mut m = Matching::default();
    for (d, i, j) in candidates {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        m.pairs.push((first[i], second[j]));
        m.max_residual = m.max_residual.max(d);
    }
    m.pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    m.unmatched_first = first.iter().zip(&used_a).filter(|(_, u)| !**u).map(|(v, _)| *v).collect();
    m.unmatched_second = second.iter().zip(&used_b).filter(|(_, u)| !**u).map(|(v, _)| *v).collect();
    m
}

/// One zero mode.
#[derive(Clone, Debug, Serialize)]
pub struct KernelVector {
    pub block_id: usize,
    pub block_lambda: f64,
    /// `Γ_S` expectation of the mode.
    pub chirality: f64,
    /// Samples `(u, g, h)` of the normalized profile.
    pub samples: Vec<(f64, f64, f64)>,
}

/// Kernel of the operator of a scenario.
#[derive(Clone, Debug, Serialize)]
pub struct KernelReport {
    pub dimension: usize,
    pub basis: Vec<KernelVector>,
    /// `tr(Γ_S|ker)`, rounded.
    pub chirality_trace: i64,
    /// `|raw trace − rounded trace|`.
    pub rounding_residual: f64,
}

/// Kernel of a validated scenario, from the exact zero-eigenvalue test of
/// every block.
pub fn kernel(scenario: &Scenario) -> Result<KernelReport> {
    let blocks = reduce(scenario)?;
    let n = &scenario.numerics;
    let per_block: Vec<Vec<KernelVector>> = blocks.par_iter().map(|b| transfer::zero_modes(b, n)).collect::<Result<_>>()?;
    let basis: Vec<KernelVector> = per_block.into_iter().flatten().collect();
    let raw: f64 = basis.iter().map(|v| v.chirality).sum();
    let rounded = raw.round();
    Ok(KernelReport {
        dimension: basis.len(),
        basis,
        chirality_trace: rounded as i64,
        rounding_residual: (raw - rounded).abs(),
    })
}

fn require_massless(scenario: &Scenario) -> Result<()> {
    if scenario.mass.is_zero() {
        Ok(())
    } else {
        Err(Error::OddParityViolated(format!("{:?}", scenario.mass)))
    }
}

/// Chirality slot of `S_+` in a block: `g` when `φ` has chirality `+1`.
fn positive_slot(block: &ModeBlock) -> usize {
    if block.chirality > 0 {
        0
    } else {
        1
    }
}

/// Graded index `dim ker D⁺ − dim ker (D⁺)*` computed block by block: a
/// massless block restricted to `S_+` is a scalar first-order operator with
/// a one-dimensional solution space, so its index is one minus the number of
/// ends that constrain the `S_+` slot. Requires chirality-preserving
/// conditions (every constraint row pure `g` or pure `h`).
pub fn graded_index(scenario: &Scenario) -> Result<i64> {
    require_massless(scenario)?;
    let blocks = reduce(scenario)?;
    let mut total = 0i64;
    for block in &blocks {
        let slot = positive_slot(block);
        let mut constrained = 0i64;
        for end in [&block.left, &block.right].into_iter().flatten() {
            if end.rows.iter().any(|n| n[0].abs() > 1e-12 && n[1].abs() > 1e-12) {
                return Err(Error::OddParityViolated(format!(
                    "boundary condition on block {} mixes the two chiralities",
                    block.id
                )));
            }
            if end.constrains_only(slot) {
                constrained += 1;
            }
        }
        if !matches!(block.geometry, Geometry::Circle { .. }) {
            total += 1 - constrained;
        }
    }
    Ok(total)
}

/// Index of the massless operator: the chirality trace of its kernel.
///
/// Under non-self-adjoint conditions (an end with other than one constraint
/// per block) the kernel alone does not determine the index and the graded
/// block count of [`graded_index`] is returned instead.
pub fn index(scenario: &Scenario) -> Result<i64> {
    require_massless(scenario)?;
    let blocks = reduce(scenario)?;
    let self_adjoint = blocks
        .iter()
        .all(|b| [&b.left, &b.right].into_iter().flatten().all(EndCondition::is_separated));
    if self_adjoint {
        Ok(kernel(scenario)?.chirality_trace)
    } else {
        graded_index(scenario)
    }
}

/// Ungraded Fredholm index of the operator under the declared conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FredholmIndex {
    pub value: i64,
    pub kernel_dim: usize,
    pub cokernel_dim: usize,
}

/// `dim ker A − dim ker A*` for the operator `A` with the declared boundary
/// conditions, where `A*` carries the adjoint conditions (the annihilator of
/// each end's allowed boundary values under `ω(x, y) = x_g y_h − x_h y_g`).
pub fn fredholm_index(scenario: &Scenario) -> Result<FredholmIndex> {
    let blocks = reduce(scenario)?;
    let n = &scenario.numerics;
    let mut kernel_dim = 0;
    let mut cokernel_dim = 0;
    for block in &blocks {
        let (k, c) = transfer::fredholm_dims(block, n)?;
        kernel_dim += k;
        cokernel_dim += c;
    }
    Ok(FredholmIndex { value: kernel_dim as i64 - cokernel_dim as i64, kernel_dim, cokernel_dim })
}

/// Adjoint end condition: rows `xᵀJ` for `x` spanning the allowed boundary
/// values, `J = [[0, 1], [−1, 0]]`.
pub fn adjoint_condition(end: &EndCondition) -> EndCondition {
    let allowed: Vec<[f64; 2]> = match end.rows.len() {
        0 => vec![[1.0, 0.0], [0.0, 1.0]],
        1 => vec![[-end.rows[0][1], end.rows[0][0]]],
        _ => Vec::new(),
    };
    EndCondition { rows: allowed.into_iter().map(|x| [-x[1], x[0]]).collect() }
}

/// Closed-form spectrum where one applies: a constant mass on a circle, or a
/// constant mass on an interval whose two ends kill the same component.
/// Returns `None` when no closed form is available.
pub fn closed_form(block: &ModeBlock, spectral_cutoff: f64) -> Option<Vec<(f64, usize)>> {
    let crate::model::MassProfile::Constant { value } = block.field.mass else {
        return None;
    };
    let cm = block.chirality as f64 * value;
    let base = block.lambda * block.lambda + cm * cm;
    let mut out = Vec::new();
    match block.geometry {
        Geometry::Circle { period, .. } => {
            let w = 2.0 * std::f64::consts::PI / period;
            for j in 0.. {
                let mu = (base + (w * j as f64).powi(2)).sqrt();
                if mu > spectral_cutoff {
                    break;
                }
                let mult = if j == 0 { 1 } else { 2 };
                out.push((-mu, mult));
                out.push((mu, mult));
            }
        }
        Geometry::Interval { a, b } => {
            let (left, right) = (block.left.as_ref()?, block.right.as_ref()?);
            let slot = [0usize, 1].into_iter().find(|&s| {
                left.rows.len() == 1 && right.rows.len() == 1 && left.constrains_only(s) && right.constrains_only(s)
            })?;
            // j = 0: the free component solves a first-order equation and the
            // mass term fixes μ = −cM (g killed) or μ = +cM (h killed).
            let zero = if slot == 0 { -cm } else { cm };
            if zero.abs() <= spectral_cutoff {
                out.push((zero, 1));
            }
            let w = std::f64::consts::PI / (b - a);
            for j in 1.. {
                let mu = (base + (w * j as f64).powi(2)).sqrt();
                if mu > spectral_cutoff {
                    break;
                }
                out.push((-mu, 1));
                out.push((mu, 1));
            }
        }
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate, MassProfile};

    #[test]
    fn block_counts_and_conditions() {
        let mut s = Scenario::finite_cylinder(0.0, MassProfile::Constant { value: 0.0 });
        s.numerics.mode_cutoff = 3;
        let s = validate(s).unwrap();
        let blocks = reduce(&s).unwrap();
        assert_eq!(blocks.len(), 7);
        assert!(blocks[0].kernel);
        // Kernel block: g killed at both ends.
        assert_eq!(blocks[0].left.as_ref().unwrap().rows, vec![[1.0, 0.0]]);
        assert_eq!(blocks[0].right.as_ref().unwrap().rows, vec![[1.0, 0.0]]);
        // Positive blocks: g killed on the left, h on the right.
        for b in &blocks[1..] {
            assert_eq!(b.left.as_ref().unwrap().rows, vec![[1.0, 0.0]]);
            assert_eq!(b.right.as_ref().unwrap().rows, vec![[0.0, 1.0]]);
        }
    }

    #[test]
    fn greedy_matching_respects_radius() {
        let m = match_eigenvalues(&[0.0, 1.0, 2.0], &[0.01, 1.02, 5.0], 0.1);
        assert_eq!(m.pairs.len(), 2);
        assert_eq!(m.unmatched_first, vec![2.0]);
        assert_eq!(m.unmatched_second, vec![5.0]);
    }
}
