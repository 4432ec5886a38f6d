#![allow(dead_code)]

use std::sync::Arc;

use ehrenfest_core::{
    make_magnetic_oscillator_3d, make_oscillator_1d, HartreeSymbol, MagneticOscillator3dParams, Oscillator1dParams,
    SymbolModel,
};
use nalgebra::{DMatrix, DVector};

/// `H = p^2/2m + k x^2/2 + beta x^3/3`, `V(z, w) = lambda y + mu x^2 y`
/// (x from z, y from w). Closed-form derivatives throughout.
#[derive(Debug, Clone)]
pub struct Anharmonic {
    pub m: f64,
    pub k: f64,
    pub beta: f64,
    pub lambda: f64,
    pub mu: f64,
}

fn diag2(a: f64, b: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[a, 0.0, 0.0, b])
}

impl HartreeSymbol for Anharmonic {
    fn dof(&self) -> usize {
        1
    }
    fn hamiltonian(&self, z: &DVector<f64>) -> f64 {
        let (p, x) = (z[0], z[1]);
        p * p / (2.0 * self.m) + 0.5 * self.k * x * x + self.beta * x.powi(3) / 3.0
    }
    fn kernel(&self, z: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let (x, y) = (z[1], w[1]);
        self.lambda * y + self.mu * x * x * y
    }
    fn hamiltonian_z(&self, z: &DVector<f64>) -> DVector<f64> {
        let (p, x) = (z[0], z[1]);
        DVector::from_vec(vec![p / self.m, self.k * x + self.beta * x * x])
    }
    fn hamiltonian_zz(&self, z: &DVector<f64>) -> DMatrix<f64> {
        diag2(1.0 / self.m, self.k + 2.0 * self.beta * z[1])
    }
    fn hamiltonian_zz_dir(&self, _z: &DVector<f64>, d: &DVector<f64>) -> DMatrix<f64> {
        diag2(0.0, 2.0 * self.beta * d[1])
    }
    fn kernel_z(&self, z: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![0.0, 2.0 * self.mu * z[1] * w[1]])
    }
    fn kernel_w(&self, z: &DVector<f64>, _w: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![0.0, self.lambda + self.mu * z[1] * z[1]])
    }
    fn kernel_zz(&self, _z: &DVector<f64>, w: &DVector<f64>) -> DMatrix<f64> {
        diag2(0.0, 2.0 * self.mu * w[1])
    }
    fn kernel_ww(&self, _z: &DVector<f64>, _w: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(2, 2)
    }
    fn kernel_zw(&self, z: &DVector<f64>, _w: &DVector<f64>) -> DMatrix<f64> {
        diag2(0.0, 2.0 * self.mu * z[1])
    }
    fn kernel_zz_dir(&self, _z: &DVector<f64>, _w: &DVector<f64>, _d: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(2, 2)
    }
    fn kernel_ww_dir(&self, _z: &DVector<f64>, _w: &DVector<f64>, _d: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(2, 2)
    }
    fn kernel_zw_dir(&self, _z: &DVector<f64>, _w: &DVector<f64>, d: &DVector<f64>) -> DMatrix<f64> {
        diag2(0.0, 2.0 * self.mu * d[1])
    }
}

pub fn anharmonic(beta: f64, lambda: f64, mu: f64, kappa: f64, hbar: f64) -> SymbolModel {
    let s = Anharmonic { m: 1.3, k: 0.9, beta, lambda, mu };
    SymbolModel::new(Arc::new(s), hbar, kappa).unwrap()
}

pub fn osc_params(kv: f64, hbar: f64) -> Oscillator1dParams {
    Oscillator1dParams { m: 1.0, k: 1.0, v0: kv, gamma: 1.0, kappa_tilde: 1.0, hbar }
}

pub fn osc(kv: f64, hbar: f64) -> SymbolModel {
    make_oscillator_1d(&osc_params(kv, hbar)).unwrap()
}

/// Magnetic model with `m = omega0 = 1`, given cyclotron frequency and
/// `eta omega_nl^2` (set through `v0` with `gamma = kappa_tilde = 1`).
pub fn mag_params(omega_h: f64, shift: f64, hbar: f64) -> MagneticOscillator3dParams {
    MagneticOscillator3dParams {
        m: 1.0,
        k: 1.0,
        field: omega_h,
        charge: 1.0,
        c: 1.0,
        v0: shift,
        gamma: 1.0,
        kappa_tilde: 1.0,
        hbar,
    }
}

pub fn mag(omega_h: f64, shift: f64, hbar: f64) -> SymbolModel {
    make_magnetic_oscillator_3d(&mag_params(omega_h, shift, hbar)).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Pipeline index `i` corresponds to entry `perm[i]` of closed-form tables
/// ordered `(omega_plus, omega_minus, omega_s)`.
pub fn ascending_permutation(freqs: [f64; 3]) -> [usize; 3] {
    let mut idx = [0, 1, 2];
    idx.sort_by(|&a, &b| freqs[a].total_cmp(&freqs[b]));
    idx
}
