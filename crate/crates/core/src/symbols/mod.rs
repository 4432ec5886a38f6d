//! Weyl symbols of a Hartree-type operator.
//!
//! A model is the pair `H(z)` (linear part) and `V(z, w)` (integral kernel) on
//! phase space `z = (p, x)`, together with `hbar` and the effective coupling
//! `kappa_tilde`. Everything downstream only sees the combinations
//!
//! * `frak_h(z)    = H(z) + kappa_tilde V(z, z)`
//! * `frak_h_z`    : gradient in the first slot, restricted to `w = z`
//! * `frak_h_zz`   : Hessian in the first slot, restricted to `w = z`
//! * `curvature`   : `frak_h_zz + kappa_tilde V_ww`, restricted to `w = z`
//!
//! and directional derivatives of the curvature in the first slot.

pub mod builtin;
pub mod fd;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{symmetrize, CMatrix, CVector, C64};

/// Mean phase-space position, ordered `(p_1..p_n, x_1..x_n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint(DVector<f64>);

impl PhasePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        Self::from_vector(DVector::from_vec(coords))
    }

    pub fn from_vector(v: DVector<f64>) -> Result<Self> {
        if v.is_empty() || !v.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("phase point needs an even, nonzero length, got {}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("phase point has non-finite entries".into()));
        }
        Ok(PhasePoint(v))
    }

    pub fn origin(n: usize) -> Self {
        PhasePoint(DVector::zeros(2 * n))
    }

    pub fn n(&self) -> usize {
        self.0.len() / 2
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn momentum(&self) -> &[f64] {
        &self.0.as_slice()[..self.n()]
    }

    pub fn position(&self) -> &[f64] {
        &self.0.as_slice()[self.n()..]
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }
}

/// The two symbols of a Hartree-type operator.
///
/// Only the scalar values are required. Derivative methods default to the
/// finite-difference stencils in [`fd`]; models with closed forms override them.
/// All directional third derivatives act on the first (`z`) slot.
pub trait HartreeSymbol: Send + Sync + fmt::Debug {
    /// Degrees of freedom `n`; phase space has dimension `2n`.
    fn dof(&self) -> usize;

    fn hamiltonian(&self, z: &DVector<f64>) -> f64;

    fn kernel(&self, z: &DVector<f64>, w: &DVector<f64>) -> f64;

    fn hamiltonian_z(&self, z: &DVector<f64>) -> DVector<f64> {
        fd_hamiltonian_z(self, z)
    }

    fn hamiltonian_zz(&self, z: &DVector<f64>) -> DMatrix<f64> {
        fd_hamiltonian_zz(self, z)
    }

    fn hamiltonian_zz_dir(&self, z: &DVector<f64>, d: &DVector<f64>) -> DMatrix<f64> {
        fd_hamiltonian_zz_dir(self, z, d)
    }

    fn kernel_z(&self, z: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        fd_kernel_grad(self, z, w, Slot::Z)
    }

    fn kernel_w(&self, z: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        fd_kernel_grad(self, z, w, Slot::W)
    }

    fn kernel_zz(&self, z: &DVector<f64>, w: &DVector<f64>) -> DMatrix<f64> {
        fd_kernel_hess(self, z, w, Block::ZZ)
    }

    fn kernel_ww(&self, z: &DVector<f64>, w: &DVector<f64>) -> DMatrix<f64> {
        fd_kernel_hess(self, z, w, Block::WW)
    }

    /// `[d^2 V / dz_i dw_j]`.
    fn kernel_zw(&self, z: &DVector<f64>, w: &DVector<f64>) -> DMatrix<f64> {
        fd_kernel_hess(self, z, w, Block::ZW)
    }

    fn kernel_zz_dir(&self, z: &DVector<f64>, w: &DVector<f64>, d: &DVector<f64>) -> DMatrix<f64> {
        fd_kernel_third(self, z, w, Block::ZZ, d)
    }

    fn kernel_ww_dir(&self, z: &DVector<f64>, w: &DVector<f64>, d: &DVector<f64>) -> DMatrix<f64> {
        fd_kernel_third(self, z, w, Block::WW, d)
    }

    fn kernel_zw_dir(&self, z: &DVector<f64>, w: &DVector<f64>, d: &DVector<f64>) -> DMatrix<f64> {
        fd_kernel_third(self, z, w, Block::ZW, d)
    }
}

#[derive(Clone, Copy)]
enum Slot {
    Z,
    W,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    ZZ,
    WW,
    ZW,
}

impl Block {
    fn offsets(self, dim: usize) -> (usize, usize) {
        match self {
            Block::ZZ => (0, 0),
            Block::WW => (dim, dim),
            Block::ZW => (0, dim),
        }
    }
}

fn joint(z: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    let mut u = DVector::zeros(z.len() + w.len());
    u.rows_mut(0, z.len()).copy_from(z);
    u.rows_mut(z.len(), w.len()).copy_from(w);
    u
}

fn split_kernel<S: HartreeSymbol + ?Sized>(s: &S, dim: usize) -> impl Fn(&DVector<f64>) -> f64 + '_ {
    move |u: &DVector<f64>| {
        let z = u.rows(0, dim).into_owned();
        let w = u.rows(dim, dim).into_owned();
        s.kernel(&z, &w)
    }
}

pub(crate) fn fd_hamiltonian_z<S: HartreeSymbol + ?Sized>(s: &S, z: &DVector<f64>) -> DVector<f64> {
    fd::gradient(|u| s.hamiltonian(u), z)
}

pub(crate) fn fd_hamiltonian_zz<S: HartreeSymbol + ?Sized>(s: &S, z: &DVector<f64>) -> DMatrix<f64> {
    symmetrize(&fd::hessian_block(|u| s.hamiltonian(u), z, 0, 0, z.len()))
}

pub(crate) fn fd_hamiltonian_zz_dir<S: HartreeSymbol + ?Sized>(
    s: &S,
    z: &DVector<f64>,
    d: &DVector<f64>,
) -> DMatrix<f64> {
    symmetrize(&fd::third_block(|u| s.hamiltonian(u), z, 0, 0, z.len(), d))
}

fn fd_kernel_grad<S: HartreeSymbol + ?Sized>(s: &S, z: &DVector<f64>, w: &DVector<f64>, slot: Slot) -> DVector<f64> {
    let dim = z.len();
    let g = fd::gradient(split_kernel(s, dim), &joint(z, w));
    match slot {
        Slot::Z => g.rows(0, dim).into_owned(),
        Slot::W => g.rows(dim, dim).into_owned(),
    }
}

fn fd_kernel_hess<S: HartreeSymbol + ?Sized>(s: &S, z: &DVector<f64>, w: &DVector<f64>, block: Block) -> DMatrix<f64> {
    let dim = z.len();
    let (r0, c0) = block.offsets(dim);
    let m = fd::hessian_block(split_kernel(s, dim), &joint(z, w), r0, c0, dim);
    if block == Block::ZW {
        m
    } else {
        symmetrize(&m)
    }
}

fn fd_kernel_third<S: HartreeSymbol + ?Sized>(
    s: &S,
    z: &DVector<f64>,
    w: &DVector<f64>,
    block: Block,
    d: &DVector<f64>,
) -> DMatrix<f64> {
    let dim = z.len();
    let (r0, c0) = block.offsets(dim);
    let dir = joint(d, &DVector::zeros(dim));
    let m = fd::third_block(split_kernel(s, dim), &joint(z, w), r0, c0, dim, &dir);
    if block == Block::ZW {
        m
    } else {
        symmetrize(&m)
    }
}

/// Where derivatives of the symbols come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DerivativeMode {
    /// Use the symbol's own derivative methods (closed forms when provided).
    #[default]
    Analytic,
    /// Ignore overrides and difference the scalar symbols.
    FiniteDifference,
}

/// A Hartree-type model: symbols plus `hbar` and `kappa_tilde`.
///
/// Immutable once built; cloning shares the underlying symbol.
#[derive(Clone, Debug)]
pub struct SymbolModel {
    symbol: Arc<dyn HartreeSymbol>,
    hbar: f64,
    kappa_tilde: f64,
    mode: DerivativeMode,
}

impl SymbolModel {
    pub fn new(symbol: Arc<dyn HartreeSymbol>, hbar: f64, kappa_tilde: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidArgument(format!("hbar must be positive, got {hbar}")));
        }
        if !kappa_tilde.is_finite() {
            return Err(Error::InvalidArgument("kappa_tilde must be finite".into()));
        }
        if symbol.dof() == 0 {
            return Err(Error::InvalidArgument("model needs at least one degree of freedom".into()));
        }
        Ok(SymbolModel { symbol, hbar, kappa_tilde, mode: DerivativeMode::Analytic })
    }

    pub fn with_derivative_mode(mut self, mode: DerivativeMode) -> Self {
        self.mode = mode;
        self
    }

    /// Same symbols, different `hbar`.
    pub fn with_hbar(&self, hbar: f64) -> Result<Self> {
        let mut m = SymbolModel::new(self.symbol.clone(), hbar, self.kappa_tilde)?;
        m.mode = self.mode;
        Ok(m)
    }

    /// Same symbols, different `kappa_tilde`.
    pub fn with_kappa_tilde(&self, kappa_tilde: f64) -> Result<Self> {
        let mut m = SymbolModel::new(self.symbol.clone(), self.hbar, kappa_tilde)?;
        m.mode = self.mode;
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.symbol.dof()
    }

    pub fn dim(&self) -> usize {
        2 * self.n()
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn kappa_tilde(&self) -> f64 {
        self.kappa_tilde
    }

    pub fn derivative_mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn symbol(&self) -> &dyn HartreeSymbol {
        self.symbol.as_ref()
    }

    pub fn check_point(&self, z: &PhasePoint) -> Result<()> {
        check_dim(self.dim(), z.coords().len())
    }

    // Raw symbol derivatives, honouring the derivative mode.

    pub fn h_z(&self, z: &DVector<f64>) -> DVector<f64> {
        match self.mode {
            DerivativeMode::Analytic => self.symbol.hamiltonian_z(z),
            DerivativeMode::FiniteDifference => fd_hamiltonian_z(self.symbol.as_ref(), z),
        }
    }

    pub fn h_zz(&self, z: &DVector<f64>) -> DMatrix<f64> {
        match self.mode {
            DerivativeMode::Analytic => self.symbol.hamiltonian_zz(z),
            DerivativeMode::FiniteDifference => fd_hamiltonian_zz(self.symbol.as_ref(), z),
        }
    }

    pub fn h_zz_dir(&self, z: &DVector<f64>, d: &DVector<f64>) -> DMatrix<f64> {
        match self.mode {
            DerivativeMode::Analytic => self.symbol.hamiltonian_zz_dir(z, d),
            DerivativeMode::FiniteDifference => fd_hamiltonian_zz_dir(self.symbol.as_ref(), z, d),
        }
    }

    pub fn v_z(&self, z: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        match self.mode {
            DerivativeMode::Analytic => self.symbol.kernel_z(z, w),
            DerivativeMode::FiniteDifference => fd_kernel_grad(self.symbol.as_ref(), z, w, Slot::Z),
        }
    }

    pub fn v_w(&self, z: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        match self.mode {
            DerivativeMode::Analytic => self.symbol.kernel_w(z, w),
            DerivativeMode::FiniteDifference => fd_kernel_grad(self.symbol.as_ref(), z, w, Slot::W),
        }
    }

    pub fn v_block(&self, z: &DVector<f64>, w: &DVector<f64>, block: Block) -> DMatrix<f64> {
        match (self.mode, block) {
            (DerivativeMode::Analytic, Block::ZZ) => self.symbol.kernel_zz(z, w),
            (DerivativeMode::Analytic, Block::WW) => self.symbol.kernel_ww(z, w),
            (DerivativeMode::Analytic, Block::ZW) => self.symbol.kernel_zw(z, w),
            (DerivativeMode::FiniteDifference, b) => fd_kernel_hess(self.symbol.as_ref(), z, w, b),
        }
    }

    pub fn v_block_dir(&self, z: &DVector<f64>, w: &DVector<f64>, block: Block, d: &DVector<f64>) -> DMatrix<f64> {
        match (self.mode, block) {
            (DerivativeMode::Analytic, Block::ZZ) => self.symbol.kernel_zz_dir(z, w, d),
            (DerivativeMode::Analytic, Block::WW) => self.symbol.kernel_ww_dir(z, w, d),
            (DerivativeMode::Analytic, Block::ZW) => self.symbol.kernel_zw_dir(z, w, d),
            (DerivativeMode::FiniteDifference, b) => fd_kernel_third(self.symbol.as_ref(), z, w, b, d),
        }
    }

    // Restricted combinations.

    /// `H(z) + kappa_tilde V(z, z)`.
    pub fn frak_h(&self, z: &PhasePoint) -> Result<f64> {
        self.check_point(z)?;
        let z = z.coords();
        Ok(self.symbol.hamiltonian(z) + self.kappa_tilde * self.symbol.kernel(z, z))
    }

    /// Gradient of `H(z) + kappa_tilde V(z, w)` in `z`, at `w = z`.
    pub fn frak_h_z(&self, z: &PhasePoint) -> Result<DVector<f64>> {
        self.check_point(z)?;
        Ok(self.frak_h_z_raw(z.coords()))
    }

    pub(crate) fn frak_h_z_raw(&self, z: &DVector<f64>) -> DVector<f64> {
        self.h_z(z) + self.v_z(z, z) * self.kappa_tilde
    }

    /// Hessian of `H(z) + kappa_tilde V(z, w)` in `z`, at `w = z`. Exactly symmetric.
    pub fn frak_h_zz(&self, z: &PhasePoint) -> Result<DMatrix<f64>> {
        self.check_point(z)?;
        Ok(self.frak_h_zz_raw(z.coords()))
    }

    pub(crate) fn frak_h_zz_raw(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let m = self.h_zz(z) + self.v_block(z, z, Block::ZZ) * self.kappa_tilde;
        symmetrize(&m)
    }

    /// `frak_h_zz + kappa_tilde V_ww` at `w = z`. Exactly symmetric.
    pub fn curvature_matrix(&self, z: &PhasePoint) -> Result<DMatrix<f64>> {
        self.check_point(z)?;
        Ok(self.curvature_raw(z.coords()))
    }

    pub(crate) fn curvature_raw(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let k = self.kappa_tilde;
        let m = self.h_zz(z) + (self.v_block(z, z, Block::ZZ) + self.v_block(z, z, Block::WW)) * k;
        symmetrize(&m)
    }

    /// Derivative of `z -> frak_h_zz(z, w) + kappa_tilde V_ww(z, w)` along a real
    /// direction, taken in the first slot before setting `w = z`.
    pub(crate) fn curvature_dir_real(&self, z: &DVector<f64>, d: &DVector<f64>) -> DMatrix<f64> {
        let k = self.kappa_tilde;
        let m = self.h_zz_dir(z, d) + (self.v_block_dir(z, z, Block::ZZ, d) + self.v_block_dir(z, z, Block::WW, d)) * k;
        symmetrize(&m)
    }

    /// Complex-linear directional derivative of the curvature matrix along `d`.
    pub fn directional_third(&self, z: &PhasePoint, d: &CVector) -> Result<CMatrix> {
        self.check_point(z)?;
        check_dim(self.dim(), d.len())?;
        let re = d.map(|c| c.re);
        let im = d.map(|c| c.im);
        let a = self.curvature_dir_real(z.coords(), &re);
        let b = if im.amax() == 0.0 {
            DMatrix::zeros(self.dim(), self.dim())
        } else {
            self.curvature_dir_real(z.coords(), &im)
        };
        Ok(CMatrix::from_fn(self.dim(), self.dim(), |r, c| C64::new(a[(r, c)], b[(r, c)])))
    }

    /// Gradient in the first slot of `Tr[curvature(z, w) S]` at `w = z`, for a
    /// symmetric `S`. Built from directional derivatives along the coordinate axes.
    pub fn curvature_trace_gradient(&self, z: &PhasePoint, s: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check_point(z)?;
        check_dim(self.dim(), s.nrows())?;
        check_dim(self.dim(), s.ncols())?;
        Ok(self.curvature_trace_gradient_raw(z.coords(), s))
    }

    pub(crate) fn curvature_trace_gradient_raw(&self, z: &DVector<f64>, s: &DMatrix<f64>) -> DVector<f64> {
        let dim = self.dim();
        DVector::from_fn(dim, |i, _| {
            let dm = self.curvature_dir_real(z, &unit(dim, i));
            dm.component_mul(s).sum()
        })
    }

    /// Jacobian of the rest-point residual `z -> frak_h_z(z)`, including the
    /// cross term from the second slot: `frak_h_zz + kappa_tilde V_zw`.
    pub fn residual_jacobian(&self, z: &PhasePoint) -> Result<DMatrix<f64>> {
        self.check_point(z)?;
        let zc = z.coords();
        Ok(self.frak_h_zz_raw(zc) + self.v_block(zc, zc, Block::ZW) * self.kappa_tilde)
    }

    /// `V_w(z, z)`.
    pub fn kernel_w_diag(&self, z: &PhasePoint) -> Result<DVector<f64>> {
        self.check_point(z)?;
        Ok(self.v_w(z.coords(), z.coords()))
    }

    /// `V_ww(z, z)`.
    pub fn kernel_ww_diag(&self, z: &PhasePoint) -> Result<DMatrix<f64>> {
        self.check_point(z)?;
        Ok(symmetrize(&self.v_block(z.coords(), z.coords(), Block::WW)))
    }

    /// `V(z, z)`.
    pub fn kernel_diag(&self, z: &PhasePoint) -> Result<f64> {
        self.check_point(z)?;
        Ok(self.symbol.kernel(z.coords(), z.coords()))
    }
}

/// Worst relative disagreement for one derivative family.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeCheck {
    pub name: &'static str,
    pub max_rel_err: f64,
}

/// Compare the model's derivatives with central differences of the level below.
///
/// Probes `z`, `w` and directions are drawn uniformly from `[-radius, radius]`
/// with a fixed seed, so the report is reproducible. Relative error is
/// `|a - b|_inf / max(|a|_inf, 1)`.
pub fn check_derivatives(model: &SymbolModel, probes: usize, radius: f64, seed: u64) -> Vec<DerivativeCheck> {
    let dim = model.dim();
    let s = model.symbol();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| DVector::from_fn(dim, |_, _| rng.random_range(-radius..=radius));

    let names = [
        "H_z", "H_zz", "H_zz_dir", "V_z", "V_w", "V_zz", "V_ww", "V_zw", "V_zz_dir", "V_ww_dir", "V_zw_dir", "symmetry",
    ];
    let mut worst = [0.0_f64; 12];
    let rel_v = |a: &DVector<f64>, b: &DVector<f64>| (a - b).amax() / a.amax().max(1.0);
    let rel_m = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a - b).amax() / a.amax().max(1.0);

    for _ in 0..probes {
        let z = draw(&mut rng);
        let w = draw(&mut rng);
        let d = draw(&mut rng);

        let fd_hz = DVector::from_fn(dim, |i, _| fd::directional_scalar(|u| s.hamiltonian(u), &z, &unit(dim, i)));
        worst[0] = worst[0].max(rel_v(&model.h_z(&z), &fd_hz));

        let hzz = model.h_zz(&z);
        let fd_hzz = columns(dim, |i| fd::directional_vec(|u| model.h_z(u), &z, &unit(dim, i)));
        worst[1] = worst[1].max(rel_m(&hzz, &fd_hzz));

        let fd_hzz_dir = fd::directional_mat(|u| model.h_zz(u), &z, &d);
        worst[2] = worst[2].max(rel_m(&model.h_zz_dir(&z, &d), &fd_hzz_dir));

        let fd_vz = DVector::from_fn(dim, |i, _| fd::directional_scalar(|u| s.kernel(u, &w), &z, &unit(dim, i)));
        worst[3] = worst[3].max(rel_v(&model.v_z(&z, &w), &fd_vz));
        let fd_vw = DVector::from_fn(dim, |i, _| fd::directional_scalar(|u| s.kernel(&z, u), &w, &unit(dim, i)));
        worst[4] = worst[4].max(rel_v(&model.v_w(&z, &w), &fd_vw));

        let fd_vzz = columns(dim, |i| fd::directional_vec(|u| model.v_z(u, &w), &z, &unit(dim, i)));
        worst[5] = worst[5].max(rel_m(&model.v_block(&z, &w, Block::ZZ), &fd_vzz));
        let fd_vww = columns(dim, |i| fd::directional_vec(|u| model.v_w(&z, u), &w, &unit(dim, i)));
        worst[6] = worst[6].max(rel_m(&model.v_block(&z, &w, Block::WW), &fd_vww));
        // column j of V_zw is d/dw_j of V_z
        let fd_vzw = columns(dim, |j| fd::directional_vec(|u| model.v_z(&z, u), &w, &unit(dim, j)));
        worst[7] = worst[7].max(rel_m(&model.v_block(&z, &w, Block::ZW), &fd_vzw));

        for (slot, block) in [(8, Block::ZZ), (9, Block::WW), (10, Block::ZW)] {
            let fd_dir = fd::directional_mat(|u| model.v_block(u, &w, block), &z, &d);
            worst[slot] = worst[slot].max(rel_m(&model.v_block_dir(&z, &w, block, &d), &fd_dir));
        }

        let asym = [hzz.clone(), model.v_block(&z, &w, Block::ZZ), model.v_block(&z, &w, Block::WW)]
            .iter()
            .map(|m| (m - m.transpose()).amax() / m.amax().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        worst[11] = worst[11].max(asym);
    }

    names.iter().zip(worst).map(|(name, max_rel_err)| DerivativeCheck { name, max_rel_err }).collect()
}

fn unit(dim: usize, i: usize) -> DVector<f64> {
    let mut e = DVector::zeros(dim);
    e[i] = 1.0;
    e
}

fn columns<F: FnMut(usize) -> DVector<f64>>(dim: usize, mut col: F) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        m.set_column(i, &col(i));
    }
    m
}
