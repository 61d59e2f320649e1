//! Truncated spectral data of the boundary circle operator, its Clifford
//! structure, the named spectral projections, the symplectic form on the
//! boundary kernel and virtual codimensions of projection pairs.
//!
//! The truncated boundary space is spanned by the sections `e^{ikθ}·e_c`
//! with Fourier mode `k` and spinor component `c ∈ {1, 2}`, kept whenever
//! `|k − α| ≤ K + 1/2`. On this basis `D_Y`, `Γ_S` are diagonal and `γ` is
//! `i` times the component swap, so every identity of the Clifford algebra
//! holds exactly.

use crate::error::{Error, Result};
use crate::model::{BoundaryCondition, BoundaryModel};
use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;
use std::io::Write;

/// Complex scalar used for boundary sections.
pub type C64 = Complex<f64>;
/// Dense complex matrix on the truncated boundary basis.
pub type CMatrix = DMatrix<C64>;
/// Dense complex vector on the truncated boundary basis.
pub type CVector = DVector<C64>;

const I: C64 = C64::new(0.0, 1.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Identifies a basis section: Fourier mode and spinor component (1 or 2).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SectionId {
    pub mode: i64,
    pub component: u8,
}

impl std::fmt::Display for SectionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "k{}c{}", self.mode, self.component)
    }
}

/// One eigen-pair of the truncated boundary operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryEntry {
    pub lambda: f64,
    pub section: SectionId,
    /// `Γ_S` eigenvalue of the section: `+1` for component 1, `−1` otherwise.
    pub chirality: i8,
}

/// Truncated eigendata of `D_Y`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryEigendata {
    pub flux: f64,
    /// Factor turning `k − α` into an eigenvalue.
    pub scale: f64,
    pub cutoff: usize,
    /// Basis order used by every matrix: mode ascending, then component.
    pub basis: Vec<SectionId>,
    /// Eigen-pairs sorted by eigenvalue (ties by section).
    pub entries: Vec<BoundaryEntry>,
    /// Kernel sections: `[ψ, γψ-direction]` = `[(k₀, 1), (k₀, 2)]` if the flux
    /// is integral, empty otherwise.
    pub kernel_basis: Vec<SectionId>,
    /// `dim V_+`.
    pub n_plus: usize,
}

/// Diagonalizes the truncated boundary operator.
pub fn eigendata(boundary: &BoundaryModel, cutoff: usize) -> BoundaryEigendata {
    let alpha = boundary.flux;
    let scale = boundary.frequency_scale();
    let reach = cutoff as f64 + 0.5;
    let lo = (alpha - reach).ceil() as i64;
    let hi = (alpha + reach).floor() as i64;
    let kernel_mode = boundary.kernel_mode();
    let mut basis = Vec::new();
    let mut entries = Vec::new();
    for k in lo..=hi {
        // Exact zero on the kernel mode even if α carries rounding noise.
        let shift = if Some(k) == kernel_mode { 0.0 } else { k as f64 - alpha };
        if shift.abs() > reach {
            continue;
        }
        for component in [1u8, 2] {
            let section = SectionId { mode: k, component };
            let (sign, chirality) = if component == 1 { (1.0, 1) } else { (-1.0, -1) };
            basis.push(section);
            entries.push(BoundaryEntry { lambda: sign * scale * shift, section, chirality });
        }
    }
    entries.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then(a.section.cmp(&b.section)));
    let kernel_basis = match kernel_mode {
        Some(k) => vec![SectionId { mode: k, component: 1 }, SectionId { mode: k, component: 2 }],
        None => Vec::new(),
    };
    let n_plus = kernel_basis.len() / 2;
    BoundaryEigendata { flux: alpha, scale, cutoff, basis, entries, kernel_basis, n_plus }
}

/// The named spectral projections.
#[derive(Clone, Debug, PartialEq)]
pub enum ProjectionLabel {
    /// `P_>`.
    Positive,
    /// `P_<`.
    Negative,
    /// `P_0`, onto `ker D_Y`.
    Zero,
    /// `P_≥ = P_> + P_0`.
    NonNegative,
    /// `Π_{V+} = P_> + pr_{V+}`.
    PiVPlus,
    /// `Π_{V−} = P_< + pr_{V−}`, the image of `Π_{V+}` under conjugation by `γ`.
    PiVMinus,
    /// `pr_L` for a Lagrangian given by kernel-coordinate vectors.
    Lagrangian(Vec<Vec<[f64; 2]>>),
}

impl std::fmt::Display for ProjectionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ProjectionLabel::Positive => "P_>",
            ProjectionLabel::Negative => "P_<",
            ProjectionLabel::Zero => "P_0",
            ProjectionLabel::NonNegative => "P_>=",
            ProjectionLabel::PiVPlus => "Pi_V+",
            ProjectionLabel::PiVMinus => "Pi_V-",
            ProjectionLabel::Lagrangian(_) => "pr_L",
        };
        f.write_str(s)
    }
}

/// A projection on the truncated boundary space together with its label.
#[derive(Clone, Debug)]
pub struct ProjectionMatrix {
    pub label: ProjectionLabel,
    pub matrix: CMatrix,
}

impl ProjectionMatrix {
    /// Rank, read off from the trace (exact for orthogonal projections).
    pub fn rank(&self) -> usize {
        self.matrix.trace().re.round() as usize
    }
}

impl BoundaryEigendata {
    /// Dimension of the truncated boundary space.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Position of a section in [`basis`](Self::basis).
    pub fn position(&self, section: SectionId) -> Option<usize> {
        self.basis.binary_search(&section).ok()
    }

    /// Unit vector of a basis section.
    pub fn unit(&self, section: SectionId) -> CVector {
        let mut v = CVector::zeros(self.dim());
        v[self.position(section).expect("section belongs to the truncation")] = ONE;
        v
    }

    fn entry(&self, section: SectionId) -> &BoundaryEntry {
        self.entries.iter().find(|e| e.section == section).expect("section belongs to the truncation")
    }

    /// Eigenvalue of a basis section.
    pub fn lambda_of(&self, section: SectionId) -> f64 {
        self.entry(section).lambda
    }

    fn diagonal(&self, value: impl Fn(&BoundaryEntry) -> f64) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim(), self.dim());
        for (i, s) in self.basis.iter().enumerate() {
            m[(i, i)] = C64::from(value(self.entry(*s)));
        }
        m
    }

    /// `D_Y` on the truncation.
    pub fn dirac(&self) -> CMatrix {
        self.diagonal(|e| e.lambda)
    }

    /// `Γ_S` on the truncation.
    pub fn gamma_s(&self) -> CMatrix {
        self.diagonal(|e| e.chirality as f64)
    }

    /// Clifford multiplication `γ = i·swap`.
    pub fn gamma(&self) -> CMatrix {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for (i, s) in self.basis.iter().enumerate() {
            let partner = SectionId { mode: s.mode, component: 3 - s.component };
            let j = self.position(partner).expect("both components are always kept");
            m[(j, i)] = I;
        }
        m
    }

    /// `ψ`, the unit `V_+` kernel section, if the kernel is nontrivial.
    pub fn psi(&self) -> Option<CVector> {
        self.kernel_basis.first().map(|s| self.unit(*s))
    }

    /// Projection onto the kernel.
    fn kernel_projection(&self) -> CMatrix {
        self.diagonal(|e| if e.lambda == 0.0 { 1.0 } else { 0.0 })
    }

    /// Embeds kernel-coordinate vectors (over `kernel_basis`) into the
    /// truncated space.
    pub fn embed_kernel_vector(&self, coords: &[[f64; 2]]) -> Result<CVector> {
        if coords.len() != self.kernel_basis.len() {
            return Err(Error::InvalidLagrangian(format!(
                "expected {} kernel coordinates, got {}",
                self.kernel_basis.len(),
                coords.len()
            )));
        }
        let mut v = CVector::zeros(self.dim());
        for (s, c) in self.kernel_basis.iter().zip(coords) {
            v[self.position(*s).expect("kernel section is kept")] = C64::new(c[0], c[1]);
        }
        Ok(v)
    }

    /// Projection with the given label.
    pub fn projection(&self, label: &ProjectionLabel) -> Result<ProjectionMatrix> {
        let positive = self.diagonal(|e| if e.lambda > 0.0 { 1.0 } else { 0.0 });
        let negative = self.diagonal(|e| if e.lambda < 0.0 { 1.0 } else { 0.0 });
        let v_plus = self.diagonal(|e| if e.lambda == 0.0 && e.chirality > 0 { 1.0 } else { 0.0 });
        let v_minus = self.diagonal(|e| if e.lambda == 0.0 && e.chirality < 0 { 1.0 } else { 0.0 });
        let matrix = match label {
            ProjectionLabel::Positive => positive,
            ProjectionLabel::Negative => negative,
            ProjectionLabel::Zero => self.kernel_projection(),
            ProjectionLabel::NonNegative => positive + self.kernel_projection(),
            ProjectionLabel::PiVPlus => positive + v_plus,
            ProjectionLabel::PiVMinus => negative + v_minus,
            ProjectionLabel::Lagrangian(basis) => self.lagrangian_projection(basis)?,
        };
        Ok(ProjectionMatrix { label: label.clone(), matrix })
    }

    /// `pr_L` for a Lagrangian spanned by kernel-coordinate vectors, built
    /// from a modified Gram–Schmidt orthonormal basis.
    fn lagrangian_projection(&self, basis: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
        let vectors = basis.iter().map(|b| self.embed_kernel_vector(b)).collect::<Result<Vec<_>>>()?;
        let ortho = gram_schmidt(&vectors, 1e-12);
        let mut p = CMatrix::zeros(self.dim(), self.dim());
        for u in &ortho {
            p += u * u.adjoint();
        }
        Ok(p)
    }

    /// `P_> + pr_L`, the projection a boundary condition imposes in the
    /// inward-pointing frame.
    pub fn condition_projection(&self, bc: &BoundaryCondition) -> Result<CMatrix> {
        let positive = self.projection(&ProjectionLabel::Positive)?.matrix;
        let kernel_part = match bc {
            BoundaryCondition::PiVPlus => self.projection(&ProjectionLabel::PiVPlus)?.matrix - &positive,
            BoundaryCondition::PiVMinus => {
                self.diagonal(|e| if e.lambda == 0.0 && e.chirality < 0 { 1.0 } else { 0.0 })
            }
            BoundaryCondition::PGeq => self.kernel_projection(),
            BoundaryCondition::CustomLagrangian { basis } => self.lagrangian_projection(basis)?,
        };
        Ok(positive + kernel_part)
    }

    /// Writes the eigendata as CSV with columns `lambda, section_id, chirality`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["lambda", "section_id", "chirality"])?;
        for e in &self.entries {
            w.write_record([format!("{:.17e}", e.lambda), e.section.to_string(), e.chirality.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Modified Gram–Schmidt; vectors whose remainder is below `drop_tol` are
/// discarded.
pub fn gram_schmidt(vectors: &[CVector], drop_tol: f64) -> Vec<CVector> {
    let mut out: Vec<CVector> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for u in &out {
            let c = u.dotc(&w);
            w -= u * c;
        }
        let norm = w.norm();
        if norm > drop_tol {
            out.push(w / C64::from(norm));
        }
    }
    out
}

fn off_kernel_residual(eig: &BoundaryEigendata, x: &CVector) -> f64 {
    (x - eig.kernel_projection() * x).norm()
}

/// The symplectic form `Φ(x, y) = ⟨γx, y⟩` on the boundary kernel, with the
/// inner product antilinear in its first slot.
pub fn symplectic_form(eig: &BoundaryEigendata, x: &CVector, y: &CVector, tolerance: f64) -> Result<C64> {
    for v in [x, y] {
        let residual = off_kernel_residual(eig, v);
        if residual > tolerance {
            return Err(Error::NotInKernel { residual });
        }
    }
    Ok((eig.gamma() * x).dotc(y))
}

/// Checks that kernel-coordinate vectors span a Lagrangian `L` with
/// `Φ(L, L) = 0` and `L ⊕ γL = ker D_Y`.
pub fn validate_lagrangian(eig: &BoundaryEigendata, basis: &[Vec<[f64; 2]>], tolerance: f64) -> Result<()> {
    let vectors = basis.iter().map(|b| eig.embed_kernel_vector(b)).collect::<Result<Vec<_>>>()?;
    let ortho = gram_schmidt(&vectors, tolerance);
    if ortho.len() != vectors.len() {
        return Err(Error::InvalidLagrangian("basis vectors are linearly dependent".into()));
    }
    if ortho.len() != eig.n_plus {
        return Err(Error::InvalidLagrangian(format!(
            "a Lagrangian in the boundary kernel has dimension {}, got {}",
            eig.n_plus,
            ortho.len()
        )));
    }
    for x in &ortho {
        for y in &ortho {
            let phi = symplectic_form(eig, x, y, tolerance)?;
            if phi.norm() > tolerance {
                return Err(Error::InvalidLagrangian(format!("Φ(L, L) = {phi} does not vanish")));
            }
        }
    }
    let gamma = eig.gamma();
    let mut spanning: Vec<CVector> = ortho.clone();
    spanning.extend(ortho.iter().map(|x| &gamma * x));
    if gram_schmidt(&spanning, tolerance).len() != eig.kernel_basis.len() {
        return Err(Error::InvalidLagrangian("L and γL do not span the boundary kernel".into()));
    }
    Ok(())
}

/// Result of a virtual-codimension computation.
#[derive(Clone, Debug)]
pub struct VirtualCodimension {
    /// `dim ker − dim coker` of `P₂P₁ : ran P₁ → ran P₂`.
    pub value: i64,
    pub kernel_dim: usize,
    pub cokernel_dim: usize,
    /// Orthonormal kernel vectors, as columns in the truncated space.
    pub kernel: CMatrix,
    /// Singular values of the restricted map.
    pub singular_values: Vec<f64>,
}

/// Orthonormal basis (columns) of the range of a projection.
fn range_basis(p: &CMatrix) -> CMatrix {
    let n = p.nrows();
    let cols: Vec<CVector> = (0..n).map(|j| p.column(j).into_owned()).collect();
    let basis = gram_schmidt(&cols, 1e-8);
    if basis.is_empty() {
        CMatrix::zeros(n, 0)
    } else {
        CMatrix::from_columns(&basis)
    }
}

/// Virtual codimension `i(P₂, P₁)`: the index of `P₂P₁` restricted to
/// `ran P₁ → ran P₂`, with ranks decided by singular values above
/// `tolerance`.
pub fn virtual_codimension(p2: &ProjectionMatrix, p1: &ProjectionMatrix, tolerance: f64) -> Result<VirtualCodimension> {
    let u1 = range_basis(&p1.matrix);
    let u2 = range_basis(&p2.matrix);
    let (r1, r2) = (u1.ncols(), u2.ncols());
    let restricted = u2.adjoint() * &p2.matrix * &p1.matrix * &u1;
    let mut singular_values = Vec::new();
    let mut row_space: Vec<CVector> = Vec::new();
    if r1 > 0 && r2 > 0 {
        let svd = restricted.svd(false, true);
        let v_t = svd.v_t.expect("right singular vectors were requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        for i in order {
            let s = svd.singular_values[i];
            singular_values.push(s);
            if s >= tolerance {
                row_space.push(v_t.row(i).adjoint());
            }
        }
    }
    for &s in &singular_values {
        if s > 0.1 * tolerance && s < 10.0 * tolerance {
            return Err(Error::IllConditioned { sigma: s, tolerance });
        }
    }
    let rank = row_space.len();
    let kernel_dim = r1 - rank;
    let cokernel_dim = r2 - rank;
    // Kernel: orthogonal complement of the retained right singular vectors.
    let mut candidates = row_space.clone();
    candidates.extend((0..r1).map(|j| {
        let mut e = CVector::zeros(r1);
        e[j] = ONE;
        e
    }));
    let kernel_cols: Vec<CVector> = gram_schmidt(&candidates, 1e-10)
        .into_iter()
        .skip(rank)
        .map(|v| &u1 * v)
        .collect();
    let kernel = if kernel_cols.is_empty() {
        CMatrix::zeros(p1.matrix.nrows(), 0)
    } else {
        CMatrix::from_columns(&kernel_cols)
    };
    Ok(VirtualCodimension {
        value: kernel_dim as i64 - cokernel_dim as i64,
        kernel_dim,
        cokernel_dim,
        kernel,
        singular_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &CMatrix, b: &CMatrix) -> bool {
        (a - b).norm() < 1e-14
    }

    #[test]
    fn clifford_identities_hold_exactly() {
        for flux in [0.0, 0.5, 0.3, -2.0] {
            let e = eigendata(&BoundaryModel::with_flux(flux), 3);
            let (g, gs, d) = (e.gamma(), e.gamma_s(), e.dirac());
            let id = CMatrix::identity(e.dim(), e.dim());
            assert!(close(&(&g * &g), &(-&id)));
            assert!(close(&g.adjoint(), &(-&g)));
            assert!(close(&(&g * &gs), &(-(&gs * &g))));
            assert!(close(&(&d * &g), &(-(&g * &d))));
            assert!(close(&(&gs * &d), &(&d * &gs)));
            assert!(close(&d.adjoint(), &d));
        }
    }

    #[test]
    fn eigenvalue_examples() {
        let e = eigendata(&BoundaryModel::with_flux(0.0), 2);
        let lambdas: Vec<f64> = e.entries.iter().map(|x| x.lambda).collect();
        assert_eq!(lambdas, vec![-2.0, -2.0, -1.0, -1.0, 0.0, 0.0, 1.0, 1.0, 2.0, 2.0]);
        assert_eq!(e.n_plus, 1);
        let h = eigendata(&BoundaryModel::with_flux(0.5), 2);
        let lambdas: Vec<f64> = h.entries.iter().map(|x| x.lambda).collect();
        assert_eq!(lambdas, vec![-2.5, -2.5, -1.5, -1.5, -0.5, -0.5, 0.5, 0.5, 1.5, 1.5, 2.5, 2.5]);
        assert_eq!(h.n_plus, 0);
        assert!(h.kernel_basis.is_empty());
    }

    #[test]
    fn transfer_identity_and_codimension() {
        let e = eigendata(&BoundaryModel::with_flux(0.0), 4);
        let pi = e.projection(&ProjectionLabel::PiVPlus).unwrap();
        let pg = e.projection(&ProjectionLabel::NonNegative).unwrap();
        let id = CMatrix::identity(e.dim(), e.dim());
        let t = &pi.matrix * &pg.matrix + (&id - &pi.matrix) * (&id - &pg.matrix);
        let vm = e.unit(e.kernel_basis[1]);
        assert!(close(&t, &(&id - &vm * vm.adjoint())));
        let vc = virtual_codimension(&pi, &pg, 1e-8).unwrap();
        assert_eq!(vc.value, 1);
        assert_eq!(vc.kernel_dim, 1);
        let overlap = vc.kernel.column(0).dotc(&vm).norm();
        assert!((overlap - 1.0).abs() < 1e-12);
        assert_eq!(virtual_codimension(&pg, &pi, 1e-8).unwrap().value, -1);
    }
}
