//! Test hook: a symbol wrapper that shifts one analytic derivative so the
//! validation suite has something to catch.

use std::sync::Arc;

use ehrenfest_core::HartreeSymbol;
use nalgebra::{DMatrix, DVector};

const SHIFT: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    HZ,
    HZz,
    HZzDir,
    VZ,
    VW,
    VZz,
    VWw,
    VZw,
    VZzDir,
    VWwDir,
    VZwDir,
}

impl Target {
    const NAMES: [(&'static str, Target); 11] = [
        ("H_z", Target::HZ),
        ("H_zz", Target::HZz),
        ("H_zz_dir", Target::HZzDir),
        ("V_z", Target::VZ),
        ("V_w", Target::VW),
        ("V_zz", Target::VZz),
        ("V_ww", Target::VWw),
        ("V_zw", Target::VZw),
        ("V_zz_dir", Target::VZzDir),
        ("V_ww_dir", Target::VWwDir),
        ("V_zw_dir", Target::VZwDir),
    ];

    /// Names match the derivative check labels.
    pub fn from_name(name: &str) -> Option<Target> {
        Self::NAMES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
    }
}

#[derive(Debug)]
pub struct CorruptedSymbol {
    inner: Arc<dyn HartreeSymbol>,
    target: Target,
}

impl CorruptedSymbol {
    pub fn new(inner: Arc<dyn HartreeSymbol>, target: Target) -> Self {
        CorruptedSymbol { inner, target }
    }

    fn vec(&self, t: Target, v: DVector<f64>) -> DVector<f64> {
        if self.target == t {
            v.add_scalar(SHIFT)
        } else {
            v
        }
    }

    fn mat(&self, t: Target, m: DMatrix<f64>) -> DMatrix<f64> {
        if self.target == t {
            m.add_scalar(SHIFT)
        } else {
            m
        }
    }
}

type V = DVector<f64>;

impl HartreeSymbol for CorruptedSymbol {
    fn dof(&self) -> usize {
        self.inner.dof()
    }
    fn hamiltonian(&self, z: &V) -> f64 {
        self.inner.hamiltonian(z)
    }
    fn kernel(&self, z: &V, w: &V) -> f64 {
        self.inner.kernel(z, w)
    }
    fn hamiltonian_z(&self, z: &V) -> V {
        self.vec(Target::HZ, self.inner.hamiltonian_z(z))
    }
    fn hamiltonian_zz(&self, z: &V) -> DMatrix<f64> {
        self.mat(Target::HZz, self.inner.hamiltonian_zz(z))
    }
    fn hamiltonian_zz_dir(&self, z: &V, d: &V) -> DMatrix<f64> {
        self.mat(Target::HZzDir, self.inner.hamiltonian_zz_dir(z, d))
    }
    fn kernel_z(&self, z: &V, w: &V) -> V {
        self.vec(Target::VZ, self.inner.kernel_z(z, w))
    }
    fn kernel_w(&self, z: &V, w: &V) -> V {
        self.vec(Target::VW, self.inner.kernel_w(z, w))
    }
    fn kernel_zz(&self, z: &V, w: &V) -> DMatrix<f64> {
        self.mat(Target::VZz, self.inner.kernel_zz(z, w))
    }
    fn kernel_ww(&self, z: &V, w: &V) -> DMatrix<f64> {
        self.mat(Target::VWw, self.inner.kernel_ww(z, w))
    }
    fn kernel_zw(&self, z: &V, w: &V) -> DMatrix<f64> {
        self.mat(Target::VZw, self.inner.kernel_zw(z, w))
    }
    fn kernel_zz_dir(&self, z: &V, w: &V, d: &V) -> DMatrix<f64> {
        self.mat(Target::VZzDir, self.inner.kernel_zz_dir(z, w, d))
    }
    fn kernel_ww_dir(&self, z: &V, w: &V, d: &V) -> DMatrix<f64> {
        self.mat(Target::VWwDir, self.inner.kernel_ww_dir(z, w, d))
    }
    fn kernel_zw_dir(&self, z: &V, w: &V, d: &V) -> DMatrix<f64> {
        self.mat(Target::VZwDir, self.inner.kernel_zw_dir(z, w, d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ehrenfest_core::symbols::builtin::QuadraticGaussian;

    #[test]
    fn only_the_target_moves() {
        let base: Arc<dyn HartreeSymbol> = Arc::new(QuadraticGaussian::new(DMatrix::identity(2, 2), 0.3, 1.0).unwrap());
        let bad = CorruptedSymbol::new(base.clone(), Target::from_name("V_ww").unwrap());
        let z = DVector::from_vec(vec![0.1, -0.2]);
        let w = DVector::from_vec(vec![0.3, 0.5]);
        assert_eq!(bad.kernel_zz(&z, &w), base.kernel_zz(&z, &w));
        assert_eq!(bad.hamiltonian_z(&z), base.hamiltonian_z(&z));
        assert!((bad.kernel_ww(&z, &w) - base.kernel_ww(&z, &w)).amin() > 0.0);
        assert!(Target::from_name("nope").is_none());
    }
}
