//! Normal modes of the linearised flow `a' = J frak_h_zz(z0) a` at a rest point.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{symplectic_j, to_complex_mat, CMatrix, CVector, C64};
use crate::symbols::{PhasePoint, SymbolModel};

/// Relative pairing tolerance used when none is given.
pub const DEFAULT_PAIRING_REL: f64 = 1e-8;

/// `{v, u} = <v, J^T u> = W_v . Y_u - Y_v . W_u`, bilinear (no conjugation).
pub fn skew_product(v: &CVector, u: &CVector) -> Result<C64> {
    check_dim(v.len(), u.len())?;
    if !v.len().is_multiple_of(2) {
        return Err(Error::InvalidArgument("skew product needs even-length vectors".into()));
    }
    let n = v.len() / 2;
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..n {
        acc += v[k] * u[n + k] - v[n + k] * u[k];
    }
    Ok(acc)
}

fn skew(v: &CVector, u: &CVector) -> C64 {
    let n = v.len() / 2;
    (0..n).map(|k| v[k] * u[n + k] - v[n + k] * u[k]).sum()
}

#[derive(Clone, Debug, Default)]
pub struct ModeOptions {
    /// Absolute tolerance for pairing and degeneracy; `None` uses
    /// `1e-8 * |frak_h_zz|_F`.
    pub pairing_tol: Option<f64>,
    /// Accept repeated frequencies and return a normalised basis of each
    /// repeated eigenspace instead of failing.
    pub allow_degenerate: bool,
}

/// Frequencies `Omega_k > 0` (ascending) and normalised mode vectors `f_k`
/// with `J frak_h_zz f_k = i Omega_k f_k` and `{f_k^*, f_l} = -2i delta_kl`.
#[derive(Clone, Debug)]
pub struct ModeSet {
    pub omegas: Vec<f64>,
    pub vectors: Vec<CVector>,
    pub pairing_tolerance: f64,
    /// `|J frak_h_zz f_k - i Omega_k f_k|_2` per mode.
    pub eigen_residuals: Vec<f64>,
    /// Worst deviation of all pairwise skew products from their normalised values.
    pub normalization_residual: f64,
    generator: DMatrix<f64>,
}

impl ModeSet {
    pub fn n(&self) -> usize {
        self.omegas.len()
    }

    /// The real matrix `J frak_h_zz(z0)` the modes diagonalise.
    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    /// `exp(i Omega_k t) f_k` for zero-based `k`.
    pub fn floquet_solution(&self, k: usize, t: f64) -> Result<CVector> {
        if k >= self.n() {
            return Err(Error::InvalidArgument(format!("mode index {k} out of range for {} modes", self.n())));
        }
        Ok(&self.vectors[k] * C64::from_polar(1.0, self.omegas[k] * t))
    }

    /// Columns `(a_1(t) .. a_n(t), a_1^*(t) .. a_n^*(t))`.
    pub fn assemble_a(&self, t: f64) -> CMatrix {
        let n = self.n();
        let mut a = CMatrix::zeros(2 * n, 2 * n);
        for k in 0..n {
            let col = &self.vectors[k] * C64::from_polar(1.0, self.omegas[k] * t);
            a.set_column(n + k, &col.conjugate());
            a.set_column(k, &col);
        }
        a
    }

    /// Copy with `f_k` multiplied by `exp(i theta_k)`.
    pub fn with_phases(&self, thetas: &[f64]) -> Result<ModeSet> {
        check_dim(self.n(), thetas.len())?;
        let mut out = self.clone();
        for (f, th) in out.vectors.iter_mut().zip(thetas) {
            *f *= C64::from_polar(1.0, *th);
        }
        out.normalization_residual = normalization_residual(&out.vectors);
        Ok(out)
    }

    /// `A(0)^T J^T A(0)`, which equals `[[0, 2i I], [-2i I, 0]]` for normalised modes.
    pub fn normalization_matrix(&self) -> CMatrix {
        let a = self.assemble_a(0.0);
        let jt = to_complex_mat(&symplectic_j(self.n()).transpose());
        a.transpose() * jt * a
    }
}

fn normalization_residual(vectors: &[CVector]) -> f64 {
    let mut worst = 0.0_f64;
    for (k, fk) in vectors.iter().enumerate() {
        for (l, fl) in vectors.iter().enumerate() {
            let target = if k == l { C64::new(0.0, -2.0) } else { C64::new(0.0, 0.0) };
            worst = worst
                .max(skew(fk, fl).norm())
                .max(skew(&fk.conjugate(), &fl.conjugate()).norm())
                .max((skew(&fk.conjugate(), fl) - target).norm());
        }
    }
    worst
}

pub fn solve_modes(model: &SymbolModel, z0: &PhasePoint, pairing_tol: Option<f64>) -> Result<ModeSet> {
    solve_modes_with(model, z0, &ModeOptions { pairing_tol, allow_degenerate: false })
}

pub fn solve_modes_with(model: &SymbolModel, z0: &PhasePoint, opts: &ModeOptions) -> Result<ModeSet> {
    let hess = model.frak_h_zz(z0)?;
    modes_of_hessian(&hess, opts)
}

/// Mode decomposition of `J h` for a symmetric `h`.
pub fn modes_of_hessian(hess: &DMatrix<f64>, opts: &ModeOptions) -> Result<ModeSet> {
    let dim = hess.nrows();
    let n = dim / 2;
    let scale = hess.norm();
    let tol = match opts.pairing_tol {
        Some(t) if t > 0.0 && t.is_finite() => t,
        Some(t) => return Err(Error::InvalidArgument(format!("pairing tolerance must be positive, got {t}"))),
        None => DEFAULT_PAIRING_REL * scale,
    };

    let j = symplectic_j(n);
    let gen = &j * hess;
    let eig = gen.complex_eigenvalues();

    for l in eig.iter() {
        if l.re.abs() > tol {
            return Err(Error::NotElliptic { re: l.re, im: l.im });
        }
    }
    let mut freqs: Vec<f64> = eig.iter().filter(|l| l.im > tol).map(|l| l.im).collect();
    let center = eig.iter().find(|l| l.im.abs() <= tol);
    if let Some(l) = center {
        return Err(Error::NotElliptic { re: l.re, im: l.im });
    }
    if freqs.len() != n {
        return Err(Error::Internal(format!(
            "expected {n} eigenvalues on the positive imaginary axis, found {}",
            freqs.len()
        )));
    }
    freqs.sort_by(f64::total_cmp);

    // cluster nearly equal frequencies
    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for w in freqs {
        match clusters.last_mut() {
            Some(c) if w - c[c.len() - 1] <= tol => {
                if !opts.allow_degenerate {
                    return Err(Error::Degenerate { first: c[c.len() - 1], second: w, tolerance: tol });
                }
                c.push(w);
            }
            _ => clusters.push(vec![w]),
        }
    }

    let cgen = to_complex_mat(&gen);
    let chess = to_complex_mat(hess);
    let jt = to_complex_mat(&j.transpose());
    let mut modes: Vec<(f64, CVector)> = Vec::with_capacity(n);
    for cluster in &clusters {
        let r = cluster.len();
        let w = cluster.iter().sum::<f64>() / r as f64;
        let basis = null_space(&cgen, C64::new(0.0, w), r);

        // Krein form of the eigenspace; must be positive for the +i Omega branch
        let krein = (basis.adjoint() * &jt * &basis) * C64::new(0.0, 0.5);
        let krein = (&krein + krein.adjoint()) * C64::new(0.5, 0.0);
        let se = SymmetricEigen::new(krein);
        if se.eigenvalues.iter().any(|&e| e <= 0.0) {
            // the conjugate eigenvector has positive Krein sign but frequency -w,
            // so neither branch satisfies Omega > 0 with {f^*, f} = -2i
            return Err(Error::AssumptionViolated(format!(
                "mode at frequency {w} has non-positive symplectic signature"
            )));
        }
        let inv_sqrt = &se.eigenvectors
            * CMatrix::from_diagonal(&se.eigenvalues.map(|e| C64::new(1.0 / e.sqrt(), 0.0)))
            * se.eigenvectors.adjoint();
        let normalized = &basis * inv_sqrt;

        // inside a repeated eigenspace, diagonalise frak_h_zz in the normalised basis
        let rotated = if r > 1 {
            let h_small = normalized.adjoint() * &chess * &normalized;
            let h_small = (&h_small + h_small.adjoint()) * C64::new(0.5, 0.0);
            let hs = SymmetricEigen::new(h_small);
            &normalized * hs.eigenvectors
        } else {
            normalized
        };
        for c in 0..r {
            let mut f = rotated.column(c).into_owned();
            fix_phase(&mut f);
            let omega = 0.5 * (f.adjoint() * &chess * &f)[(0, 0)].re;
            modes.push((omega, f));
        }
    }
    modes.sort_by(|a, b| a.0.total_cmp(&b.0));

    let omegas: Vec<f64> = modes.iter().map(|m| m.0).collect();
    let vectors: Vec<CVector> = modes.into_iter().map(|m| m.1).collect();
    let eigen_residuals =
        omegas.iter().zip(&vectors).map(|(w, f)| (&cgen * f - f * C64::new(0.0, *w)).norm()).collect();
    let normalization_residual = normalization_residual(&vectors);

    Ok(ModeSet { omegas, vectors, pairing_tolerance: tol, eigen_residuals, normalization_residual, generator: gen })
}

/// Orthonormal basis of the `r` right singular vectors of `m - shift I` with the
/// smallest singular values.
fn null_space(m: &CMatrix, shift: C64, r: usize) -> CMatrix {
    let dim = m.nrows();
    let shifted = m - CMatrix::identity(dim, dim) * shift;
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let mut basis = CMatrix::zeros(dim, r);
    for (c, &i) in order.iter().take(r).enumerate() {
        basis.set_column(c, &v_t.row(i).adjoint());
    }
    basis
}

/// Rotate so the first component of (near-)largest modulus is real positive.
fn fix_phase(f: &mut CVector) {
    let big = f.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if big == 0.0 {
        return;
    }
    let pivot = f.iter().find(|c| c.norm() >= big * (1.0 - 1e-9)).copied().unwrap();
    *f *= pivot.conj() / pivot.norm();
}
