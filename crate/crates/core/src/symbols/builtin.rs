//! Built-in models: quadratic Hamiltonians with a Gaussian pair kernel.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{HartreeSymbol, SymbolModel};
use crate::error::{Error, Result};

/// `H(z) = z^T Q z / 2` plus `V(z, w) = v0 exp(-|x - y|^2 / (2 gamma^2))`,
/// where `x` and `y` are the position halves of `z` and `w`.
///
/// All derivatives are closed-form.
#[derive(Clone, Debug)]
pub struct QuadraticGaussian {
    n: usize,
    q: DMatrix<f64>,
    v0: f64,
    gamma: f64,
}

impl QuadraticGaussian {
    pub fn new(q: DMatrix<f64>, v0: f64, gamma: f64) -> Result<Self> {
        let dim = q.nrows();
        if dim == 0 || !dim.is_multiple_of(2) || q.ncols() != dim {
            return Err(Error::InvalidArgument(format!(
                "quadratic form must be square with even size, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        if (&q - q.transpose()).amax() > 0.0 {
            return Err(Error::InvalidArgument("quadratic form must be symmetric".into()));
        }
        positive("gamma", gamma)?;
        finite("v0", v0)?;
        Ok(QuadraticGaussian { n: dim / 2, q, v0, gamma })
    }

    pub fn quadratic_form(&self) -> &DMatrix<f64> {
        &self.q
    }

    fn separation(&self, z: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        z.rows(self.n, self.n) - w.rows(self.n, self.n)
    }

    fn value(&self, s: &DVector<f64>) -> f64 {
        self.v0 * (-s.norm_squared() / (2.0 * self.gamma * self.gamma)).exp()
    }

    /// Position-position Hessian of the kernel in its first slot.
    fn hess_x(&self, s: &DVector<f64>) -> DMatrix<f64> {
        let g2 = self.gamma * self.gamma;
        let g = self.value(s);
        (s * s.transpose() / (g2 * g2) - DMatrix::identity(self.n, self.n) / g2) * g
    }

    fn hess_x_dir(&self, s: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        let g2 = self.gamma * self.gamma;
        let g = self.value(s);
        let su = s.dot(u);
        (u * s.transpose() + s * u.transpose()) * (g / (g2 * g2)) - self.hess_x(s) * (su / g2)
    }

    fn embed_x(&self, block: DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(2 * self.n, 2 * self.n);
        out.view_mut((self.n, self.n), (self.n, self.n)).copy_from(&block);
        out
    }

    fn embed_x_vec(&self, v: DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(2 * self.n);
        out.rows_mut(self.n, self.n).copy_from(&v);
        out
    }

    fn position_part(&self, d: &DVector<f64>) -> DVector<f64> {
        d.rows(self.n, self.n).into_owned()
    }
}

impl HartreeSymbol for QuadraticGaussian {
    fn dof(&self) -> usize {
        self.n
    }

    fn hamiltonian(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.q * z))
    }

    fn kernel(&self, z: &DVector<f64>, w: &DVector<f64>) -> f64 {
        self.value(&self.separation(z, w))
    }

    fn hamiltonian_z(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.q * z
    }

    fn hamiltonian_zz(&self, _z: &DVector<f64>) -> DMatrix<f64> {
        self.q.clone()
    }

    fn hamiltonian_zz_dir(&self, _z: &DVector<f64>, _d: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(2 * self.n, 2 * self.n)
    }

    fn kernel_z(&self, z: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let s = self.separation(z, w);
        let g = self.value(&s);
        self.embed_x_vec(&s * (-g / (self.gamma * self.gamma)))
    }

    fn kernel_w(&self, z: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        -self.kernel_z(z, w)
    }

    fn kernel_zz(&self, z: &DVector<f64>, w: &DVector<f64>) -> DMatrix<f64> {
        self.embed_x(self.hess_x(&self.separation(z, w)))
    }

    fn kernel_ww(&self, z: &DVector<f64>, w: &DVector<f64>) -> DMatrix<f64> {
        self.kernel_zz(z, w)
    }

    fn kernel_zw(&self, z: &DVector<f64>, w: &DVector<f64>) -> DMatrix<f64> {
        -self.kernel_zz(z, w)
    }

    fn kernel_zz_dir(&self, z: &DVector<f64>, w: &DVector<f64>, d: &DVector<f64>) -> DMatrix<f64> {
        let s = self.separation(z, w);
        self.embed_x(self.hess_x_dir(&s, &self.position_part(d)))
    }

    fn kernel_ww_dir(&self, z: &DVector<f64>, w: &DVector<f64>, d: &DVector<f64>) -> DMatrix<f64> {
        self.kernel_zz_dir(z, w, d)
    }

    fn kernel_zw_dir(&self, z: &DVector<f64>, w: &DVector<f64>, d: &DVector<f64>) -> DMatrix<f64> {
        -self.kernel_zz_dir(z, w, d)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be finite, got {v}")))
    }
}

fn nonlinear_frequency(kappa_tilde: f64, v0: f64, m: f64, gamma: f64) -> f64 {
    ((kappa_tilde * v0).abs() / (m * gamma * gamma)).sqrt()
}

fn coupling_sign(kappa_tilde: f64, v0: f64) -> f64 {
    let s = kappa_tilde * v0;
    if s > 0.0 {
        1.0
    } else if s < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One-dimensional oscillator `p^2/2m + k x^2/2` with a Gaussian kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Oscillator1dParams {
    pub m: f64,
    pub k: f64,
    pub v0: f64,
    pub gamma: f64,
    pub kappa_tilde: f64,
    pub hbar: f64,
}

impl Oscillator1dParams {
    pub fn validate(&self) -> Result<()> {
        positive("m", self.m)?;
        positive("k", self.k)?;
        positive("gamma", self.gamma)?;
        positive("hbar", self.hbar)?;
        finite("v0", self.v0)?;
        finite("kappa_tilde", self.kappa_tilde)
    }

    pub fn omega0(&self) -> f64 {
        (self.k / self.m).sqrt()
    }

    pub fn omega_nl(&self) -> f64 {
        nonlinear_frequency(self.kappa_tilde, self.v0, self.m, self.gamma)
    }

    /// `sign(kappa_tilde * v0)`, zero when the coupling vanishes.
    pub fn eta(&self) -> f64 {
        coupling_sign(self.kappa_tilde, self.v0)
    }

    /// `omega0^2 - eta omega_nl^2`; must be positive for an elliptic rest point.
    pub fn shifted_omega_sq(&self) -> f64 {
        self.omega0().powi(2) - self.eta() * self.omega_nl().powi(2)
    }

    pub fn omega_s(&self) -> f64 {
        self.shifted_omega_sq().sqrt()
    }
}

/// Charged oscillator in a constant field along `x3`, with a Gaussian kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MagneticOscillator3dParams {
    pub m: f64,
    pub k: f64,
    pub field: f64,
    pub charge: f64,
    pub c: f64,
    pub v0: f64,
    pub gamma: f64,
    pub kappa_tilde: f64,
    pub hbar: f64,
}

impl MagneticOscillator3dParams {
    pub fn validate(&self) -> Result<()> {
        positive("m", self.m)?;
        positive("k", self.k)?;
        positive("gamma", self.gamma)?;
        positive("hbar", self.hbar)?;
        positive("c", self.c)?;
        finite("field", self.field)?;
        finite("charge", self.charge)?;
        finite("v0", self.v0)?;
        finite("kappa_tilde", self.kappa_tilde)
    }

    /// Cyclotron frequency `e H / (m c)`.
    pub fn omega_h(&self) -> f64 {
        self.charge * self.field / (self.m * self.c)
    }

    pub fn omega0(&self) -> f64 {
        (self.k / self.m).sqrt()
    }

    pub fn omega_a(&self) -> f64 {
        let w0 = self.omega0();
        w0 * (1.0 + (self.omega_h() / (2.0 * w0)).powi(2)).sqrt()
    }

    pub fn omega_nl(&self) -> f64 {
        nonlinear_frequency(self.kappa_tilde, self.v0, self.m, self.gamma)
    }

    pub fn eta(&self) -> f64 {
        coupling_sign(self.kappa_tilde, self.v0)
    }

    /// Frequencies `(omega_plus, omega_minus, omega_s)`.
    pub fn ritz_frequencies(&self) -> Result<(f64, f64, f64)> {
        let shift = self.eta() * self.omega_nl().powi(2);
        let transverse = self.omega_a().powi(2) - shift;
        let axial = self.omega0().powi(2) - shift;
        if transverse <= 0.0 || axial <= 0.0 {
            return Err(Error::InvalidArgument("parameters do not give an elliptic rest point".into()));
        }
        let half = 0.5 * self.omega_h().abs();
        let root = transverse.sqrt();
        Ok((root + half, root - half, axial.sqrt()))
    }
}

/// Quadratic form of the 1D oscillator, in `(p, x)` order.
pub fn oscillator_1d_form(p: &Oscillator1dParams) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0 / p.m, 0.0, 0.0, p.k])
}

/// Quadratic form of the magnetic oscillator, in `(p1, p2, p3, x1, x2, x3)` order.
pub fn magnetic_oscillator_3d_form(p: &MagneticOscillator3dParams) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(6, 6);
    for i in 0..3 {
        q[(i, i)] = 1.0 / p.m;
    }
    let wa2 = p.omega_a().powi(2);
    q[(3, 3)] = p.m * wa2;
    q[(4, 4)] = p.m * wa2;
    q[(5, 5)] = p.k;
    let half = 0.5 * p.omega_h();
    // p1 x2 - p2 x1 coupling
    q[(0, 4)] = half;
    q[(4, 0)] = half;
    q[(1, 3)] = -half;
    q[(3, 1)] = -half;
    q
}

pub fn make_oscillator_1d(p: &Oscillator1dParams) -> Result<SymbolModel> {
    p.validate()?;
    let symbol = QuadraticGaussian::new(oscillator_1d_form(p), p.v0, p.gamma)?;
    SymbolModel::new(Arc::new(symbol), p.hbar, p.kappa_tilde)
}

pub fn make_magnetic_oscillator_3d(p: &MagneticOscillator3dParams) -> Result<SymbolModel> {
    p.validate()?;
    let symbol = QuadraticGaussian::new(magnetic_oscillator_3d_form(p), p.v0, p.gamma)?;
    SymbolModel::new(Arc::new(symbol), p.hbar, p.kappa_tilde)
}
