//! Rest points of the principal moment system: zeros of `frak_h_z`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::symbols::{PhasePoint, SymbolModel};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100;
const MAX_HALVINGS: usize = 30;

#[derive(Clone, Debug, PartialEq)]
pub struct RestPoint {
    pub z0: PhasePoint,
    /// `|frak_h_z(z0)|_inf`.
    pub residual: f64,
    /// `frak_h(z0)`.
    pub energy_principal: f64,
    pub iterations: usize,
}

/// Damped Newton iteration on `frak_h_z`.
///
/// The step solves against the full Jacobian of the residual map, which carries
/// the second-slot cross term of the kernel. Each step is halved (at most 30
/// times) until `|frak_h_z|^2` decreases.
pub fn find_rest_point(model: &SymbolModel, guess: &PhasePoint, tol: f64, max_iter: usize) -> Result<RestPoint> {
    model.check_point(guess)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }

    let mut z = guess.coords().clone();
    let mut g = model.frak_h_z_raw(&z);
    let mut iterations = 0;
    while g.amax() > tol {
        if iterations == max_iter {
            return Err(Error::NonConvergence { iterations, residual: g.amax(), last: z.as_slice().to_vec() });
        }
        iterations += 1;

        let jac = model.residual_jacobian(&PhasePoint::from_vector(z.clone())?)?;
        let svd = jac.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if condition > 1.0 / f64::EPSILON {
            return Err(Error::Singular { condition });
        }
        let step = svd.solve(&(-&g), 0.0).map_err(|e| Error::Internal(format!("svd solve failed: {e}")))?;

        let base = g.norm_squared();
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: DVector<f64> = &z + &step * lambda;
            let gt = model.frak_h_z_raw(&trial);
            if gt.iter().all(|x| x.is_finite()) && gt.norm_squared() < base {
                accepted = Some((trial, gt));
                break;
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((zn, gn)) => {
                z = zn;
                g = gn;
            }
            // no descent along the Newton direction: we are at round-off level
            // or the model is pathological; either way stop here
            None => return Err(Error::NonConvergence { iterations, residual: g.amax(), last: z.as_slice().to_vec() }),
        }
    }

    let z0 = PhasePoint::from_vector(z)?;
    Ok(RestPoint { residual: g.amax(), energy_principal: model.frak_h(&z0)?, z0, iterations })
}

/// `|frak_h_z(z0)|_inf <= tol`.
pub fn verify_rest_point(model: &SymbolModel, z0: &PhasePoint, tol: f64) -> bool {
    match model.frak_h_z(z0) {
        Ok(g) => g.amax() <= tol,
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::builtin::*;

    fn mag() -> SymbolModel {
        make_magnetic_oscillator_3d(&MagneticOscillator3dParams {
            m: 1.0,
            k: 1.0,
            field: 2.0,
            charge: 1.0,
            c: 1.0,
            v0: 0.3,
            gamma: 1.0,
            kappa_tilde: 1.0,
            hbar: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn magnetic_origin_is_exact() {
        let r = find_rest_point(&mag(), &PhasePoint::origin(3), DEFAULT_TOL, 10).unwrap();
        assert_eq!(r.z0, PhasePoint::origin(3));
        assert_eq!(r.iterations, 0);
        assert!((r.energy_principal - 0.3).abs() < 1e-15);
    }

    #[test]
    fn oscillator_converges_from_offset_guess() {
        let m = make_oscillator_1d(&Oscillator1dParams {
            m: 1.0,
            k: 1.0,
            v0: -0.19,
            gamma: 1.0,
            kappa_tilde: 1.0,
            hbar: 1.0,
        })
        .unwrap();
        let guess = PhasePoint::new(vec![0.2, -0.1]).unwrap();
        let r = find_rest_point(&m, &guess, DEFAULT_TOL, 50).unwrap();
        assert!(r.residual <= DEFAULT_TOL);
        assert!(r.z0.coords().amax() < 1e-12);
    }

    #[test]
    fn verify_checks_residual() {
        let m = mag();
        assert!(verify_rest_point(&m, &PhasePoint::origin(3), 1e-10));
        let z = PhasePoint::new(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(!verify_rest_point(&m, &z, 1e-10));
        assert!(verify_rest_point(&m, &z, f64::INFINITY));
    }

    #[test]
    fn rejects_bad_controls() {
        let m = mag();
        let z = PhasePoint::origin(3);
        assert!(find_rest_point(&m, &z, 0.0, 10).is_err());
        assert!(find_rest_point(&m, &z, 1e-12, 0).is_err());
    }
}
