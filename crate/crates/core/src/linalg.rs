//! Small dense linear-algebra helpers shared by the modules.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

pub type C64 = Complex<f64>;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

/// The standard symplectic matrix `[[0, -I], [I, 0]]` in (p, x) order.
pub fn symplectic_j(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(k, n + k)] = -1.0;
        j[(n + k, k)] = 1.0;
    }
    j
}

/// `J v` without forming `J`.
pub fn apply_j(v: &DVector<f64>) -> DVector<f64> {
    let n = v.len() / 2;
    let mut out = DVector::zeros(v.len());
    for k in 0..n {
        out[k] = -v[n + k];
        out[n + k] = v[k];
    }
    out
}

pub fn to_complex_vec(v: &DVector<f64>) -> CVector {
    v.map(|x| C64::new(x, 0.0))
}

pub fn to_complex_mat(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Bilinear (unconjugated) pairing `sum_i a_i b_i`.
pub fn bilinear(a: &CVector, b: &CVector) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Minimum eigenvalue of the Hermitian matrix `delta2 + (i hbar / 2) J`.
///
/// Non-negative iff the second-order uncertainty relation holds.
pub fn uncertainty_margin(delta2: &DMatrix<f64>, hbar: f64) -> f64 {
    let n = delta2.nrows() / 2;
    let j = symplectic_j(n);
    let herm = CMatrix::from_fn(2 * n, 2 * n, |r, c| C64::new(delta2[(r, c)], 0.5 * hbar * j[(r, c)]));
    let eig = SymmetricEigen::new(herm);
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn max_abs_c(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.norm()))
}
