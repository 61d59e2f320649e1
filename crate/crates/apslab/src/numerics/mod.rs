//! Numerical building blocks: special functions, quadrature, root finding,
//! extrapolation and small dense linear algebra helpers.

pub mod extrapolate;
pub mod quad;
pub mod roots;
pub mod special;

use nalgebra::DMatrix;

/// Eigen-decomposition of a real symmetric matrix with eigenvalues sorted
/// ascending and eigenvectors permuted to match (as columns).
pub fn symmetric_eigen_sorted(matrix: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = matrix.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(eig.eigenvectors.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// A real 2×2 matrix stored row-major; used for transfer matrices.
pub type Mat2 = [[f64; 2]; 2];

/// The 2×2 identity.
pub const IDENTITY2: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

/// Product `a · b`.
pub fn mul2(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

/// Matrix–vector product.
pub fn apply2(a: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

/// Exponential of a traceless real 2×2 matrix `ℓ·K`, using `K² = −det(K)·I`.
pub fn expm_traceless(k: &Mat2, ell: f64) -> Mat2 {
    let q = -(k[0][0] * k[1][1] - k[0][1] * k[1][0]); // K² = q·I
    let (c, s) = cosh_sinhc(q, ell);
    [[c + s * k[0][0], s * k[0][1]], [s * k[1][0], c + s * k[1][1]]]
}

/// For `K² = q·I`, returns `(cosh(√q ℓ), sinh(√q ℓ)/√q)` continued
/// analytically through `q ≤ 0` (trigonometric branch) and `q = 0`.
pub fn cosh_sinhc(q: f64, ell: f64) -> (f64, f64) {
    let z = q * ell * ell;
    if z.abs() < 1e-8 {
        // Taylor expansion around the degenerate point.
        let c = 1.0 + z / 2.0 + z * z / 24.0;
        let s = ell * (1.0 + z / 6.0 + z * z / 120.0);
        (c, s)
    } else if q > 0.0 {
        let k = q.sqrt();
        ((k * ell).cosh(), (k * ell).sinh() / k)
    } else {
        let w = (-q).sqrt();
        ((w * ell).cos(), (w * ell).sin() / w)
    }
}
