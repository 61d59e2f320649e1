//! Discretized oracle for a single block.
//!
//! Intervals use a staggered grid: `g` and `h` live on alternating points of
//! spacing `s`, so every centred difference spans `2s` and couples only the
//! two components. The resulting matrix is symmetric and tridiagonal, the
//! scheme is second order, and a massless block anticommutes exactly with the
//! chirality, so no spurious doubler modes appear. A component killed by the
//! boundary condition sits on the end point and is dropped; for a mixed
//! condition `n_g g + n_h h = 0` the end point carries `g` with half weight
//! and `h = βg` eliminated, giving a symmetric generalized eigenproblem.
//!
//! Circles use odd-point trigonometric spectral differentiation, which is
//! exact on the represented Fourier modes and has no doubling branch.

use super::{EndCondition, Eigenvalue, Geometry, ModeBlock};
use crate::error::{Error, Result};
use crate::numerics::symmetric_eigen_sorted;
use nalgebra::DMatrix;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PointType {
    G,
    H,
}

/// How an end of the interval is discretized.
#[derive(Clone, Copy, Debug)]
enum EndKind {
    /// The end point carries the killed component and is dropped.
    Killed(PointType),
    /// Mixed condition: the end point carries `g`, with `h = βg` there.
    Mixed(f64),
}

fn end_kind(end: &Option<EndCondition>, block: usize) -> Result<EndKind> {
    let row = match end {
        Some(e) if e.rows.len() == 1 => e.rows[0],
        _ => {
            return Err(Error::InvalidShape(format!(
                "block {block}: the discretization needs exactly one constraint per end"
            )))
        }
    };
    Ok(if row[1].abs() < 1e-12 {
        EndKind::Killed(PointType::G)
    } else if row[0].abs() < 1e-12 {
        EndKind::Killed(PointType::H)
    } else {
        EndKind::Mixed(-row[0] / row[1])
    })
}

fn end_type(kind: EndKind) -> PointType {
    match kind {
        EndKind::Killed(t) => t,
        EndKind::Mixed(_) => PointType::G,
    }
}

/// Assembled discrete operator: symmetric matrix, per-unknown chirality sign
/// and the point coordinates.
pub struct DiscreteOperator {
    pub matrix: DMatrix<f64>,
    /// `Γ_S` sign of each unknown.
    pub chirality: Vec<f64>,
    /// Coordinate of each unknown.
    pub points: Vec<f64>,
}

/// Assembles the discrete operator of a block (already symmetrized).
pub fn assemble(block: &ModeBlock, grid_points: usize) -> Result<DiscreteOperator> {
    match block.geometry {
        Geometry::Interval { a, b } => assemble_interval(block, a, b, grid_points),
        Geometry::Circle { a, period } => Ok(assemble_circle(block, a, period, grid_points)),
    }
}

fn assemble_interval(block: &ModeBlock, a: f64, b: f64, n: usize) -> Result<DiscreteOperator> {
    let left = end_kind(&block.left, block.id)?;
    let right = end_kind(&block.right, block.id)?;
    let (lt, rt) = (end_type(left), end_type(right));
    let j_max = if lt == rt { 2 * n } else { 2 * n + 1 };
    let s = (b - a) / j_max as f64;
    let lambda = block.lambda;
    let c = block.chirality as f64;
    let type_at = |j: usize| if j % 2 == 0 { lt } else if lt == PointType::G { PointType::H } else { PointType::G };
    let first = if matches!(left, EndKind::Mixed(_)) { 0 } else { 1 };
    let last = if matches!(right, EndKind::Mixed(_)) { j_max } else { j_max - 1 };
    let idx: Vec<usize> = (first..=last).collect();
    let m = idx.len();
    let mut h = DMatrix::zeros(m, m);
    let mut weight = vec![1.0f64; m];
    let mut chirality = vec![0.0; m];
    let mut points = vec![0.0; m];
    for (r, &j) in idx.iter().enumerate() {
        let x = a + s * j as f64;
        points[r] = x;
        let lo = (x - s).max(a);
        let hi = (x + s).min(b);
        let mass = c * block.field.average(lo, hi);
        let t = type_at(j);
        let sign = if t == PointType::G { 1.0 } else { -1.0 };
        h[(r, r)] = sign * mass;
        chirality[r] = c * sign;
        if r + 1 < m {
            let v = match t {
                PointType::G => -0.5 / s + 0.5 * lambda,
                PointType::H => 0.5 / s + 0.5 * lambda,
            };
            h[(r, r + 1)] = v;
            h[(r + 1, r)] = v;
        }
    }
    if let EndKind::Mixed(beta) = left {
        h[(0, 0)] = 0.5 * (h[(0, 0)] + beta / s);
        weight[0] = 0.5;
    }
    if let EndKind::Mixed(beta) = right {
        h[(m - 1, m - 1)] = 0.5 * (h[(m - 1, m - 1)] - beta / s);
        weight[m - 1] = 0.5;
    }
    // Symmetric form W^{-1/2} H W^{-1/2} of the generalized problem.
    for r in 0..m {
        for q in 0..m {
            if h[(r, q)] != 0.0 {
                h[(r, q)] /= (weight[r] * weight[q]).sqrt();
            }
        }
    }
    Ok(DiscreteOperator { matrix: h, chirality, points })
}

/// Cell average of the mass over `[x − w, x + w]`, wrapped onto the period
/// `[a, a + period)`.
fn periodic_average(block: &ModeBlock, x: f64, w: f64, a: f64, period: f64) -> f64 {
    let (lo, hi) = (x - w, x + w);
    let b = a + period;
    let field = &block.field;
    let mut total = field.average(lo.max(a), hi.min(b)) * (hi.min(b) - lo.max(a));
    if lo < a {
        total += field.average(lo + period, b) * (a - lo);
    }
    if hi > b {
        total += field.average(a, hi - period) * (hi - b);
    }
    total / (hi - lo)
}

fn assemble_circle(block: &ModeBlock, a: f64, period: f64, grid_points: usize) -> DiscreteOperator {
    let n = if grid_points % 2 == 1 { grid_points } else { grid_points + 1 };
    let lambda = block.lambda;
    let c = block.chirality as f64;
    let mut mat = DMatrix::zeros(2 * n, 2 * n);
    let points: Vec<f64> = (0..n).map(|j| a + period * j as f64 / n as f64).collect();
    for j in 0..n {
        let m = c * periodic_average(block, points[j], 0.5 * period / n as f64, a, period);
        mat[(j, j)] = m;
        mat[(n + j, n + j)] = -m;
        mat[(j, n + j)] = lambda;
        mat[(n + j, j)] = lambda;
        for k in 0..n {
            if j == k {
                continue;
            }
            let diff = j as i64 - k as i64;
            let sign = if diff.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let d = PI / period * sign / (PI * diff as f64 / n as f64).sin();
            // Row g: −D acting on h; row h: +D acting on g.
            mat[(j, n + k)] -= d;
            mat[(n + j, k)] += d;
        }
    }
    let mut chirality = vec![c; n];
    chirality.extend(std::iter::repeat(-c).take(n));
    let mut all_points = points.clone();
    all_points.extend(points);
    DiscreteOperator { matrix: mat, chirality, points: all_points }
}

/// All eigenvalues of the discretized block with the `Γ_S` expectation of
/// each eigenvector.
pub fn solve(block: &ModeBlock, grid_points: usize) -> Result<Vec<Eigenvalue>> {
    let op = assemble(block, grid_points)?;
    let (values, vectors) = symmetric_eigen_sorted(op.matrix);
    Ok(values
        .iter()
        .enumerate()
        .map(|(i, &mu)| {
            let col = vectors.column(i);
            let chirality = col.iter().zip(&op.chirality).map(|(v, g)| g * v * v).sum::<f64>();
            Eigenvalue { mu, multiplicity: 1, block_id: block.id, block_lambda: block.lambda, chirality: Some(chirality) }
        })
        .collect())
}
