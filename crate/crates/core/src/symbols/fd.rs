//! Central finite-difference stencils.
//!
//! Two families live here. The scalar stencils (`gradient`, `hessian_block`,
//! `third_block`) rebuild every derivative order from function values alone and
//! back the finite-difference fallback of [`super::DerivativeMode`]. They are
//! products of the two-point central operator, so the mixed stencils stay exact
//! for repeated directions. Step for order `k` is `eps^(1/(k+2)) * max(1, |u|)`.
//!
//! The directional stencils (`directional_vec`, `directional_mat`) difference one
//! level of an already-available derivative and use `eps^(1/3) * max(1, |u|)`.
//! They are the independent oracle for the analytic derivative checks.

use nalgebra::{DMatrix, DVector};

fn step(order: i32, u: &DVector<f64>) -> f64 {
    let scale = u.amax().max(1.0);
    f64::EPSILON.powf(1.0 / (order as f64 + 2.0)) * scale
}

fn unit(len: usize, i: usize) -> DVector<f64> {
    let mut e = DVector::zeros(len);
    e[i] = 1.0;
    e
}

pub fn gradient<F>(f: F, u: &DVector<f64>) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let h = step(1, u);
    DVector::from_fn(u.len(), |i, _| {
        let e = unit(u.len(), i) * h;
        (f(&(u + &e)) - f(&(u - &e))) / (2.0 * h)
    })
}

/// Second derivatives `d^2 f / du_{r0+i} du_{c0+j}` for `i, j < size`.
pub fn hessian_block<F>(f: F, u: &DVector<f64>, r0: usize, c0: usize, size: usize) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let h = step(2, u);
    let len = u.len();
    let mut out = DMatrix::zeros(size, size);
    for i in 0..size {
        let a = unit(len, r0 + i) * h;
        for j in 0..size {
            let b = unit(len, c0 + j) * h;
            let mut acc = 0.0;
            for (sa, sb) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                acc += sa * sb * f(&(u + &a * sa + &b * sb));
            }
            out[(i, j)] = acc / (4.0 * h * h);
        }
    }
    out
}

/// Third derivatives along the direction `dir` of the `(r0, c0)` second-derivative block.
pub fn third_block<F>(f: F, u: &DVector<f64>, r0: usize, c0: usize, size: usize, dir: &DVector<f64>) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let norm = dir.amax();
    if norm == 0.0 {
        return DMatrix::zeros(size, size);
    }
    let c_dir = dir / norm;
    let h = step(3, u);
    let len = u.len();
    let signs = [1.0, -1.0];
    let mut out = DMatrix::zeros(size, size);
    for i in 0..size {
        let a = unit(len, r0 + i) * h;
        for j in 0..size {
            let b = unit(len, c0 + j) * h;
            let c = &c_dir * h;
            let mut acc = 0.0;
            for sa in signs {
                for sb in signs {
                    for sc in signs {
                        acc += sa * sb * sc * f(&(u + &a * sa + &b * sb + &c * sc));
                    }
                }
            }
            out[(i, j)] = norm * acc / (8.0 * h * h * h);
        }
    }
    out
}

/// Directional derivative of a vector-valued map along `dir`.
pub fn directional_vec<F>(f: F, u: &DVector<f64>, dir: &DVector<f64>) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let h = f64::EPSILON.cbrt() * u.amax().max(1.0);
    (f(&(u + dir * h)) - f(&(u - dir * h))) / (2.0 * h)
}

/// Directional derivative of a matrix-valued map along `dir`.
pub fn directional_mat<F>(f: F, u: &DVector<f64>, dir: &DVector<f64>) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    let h = f64::EPSILON.cbrt() * u.amax().max(1.0);
    (f(&(u + dir * h)) - f(&(u - dir * h))) / (2.0 * h)
}

/// Directional derivative of a scalar map along `dir`.
pub fn directional_scalar<F>(f: F, u: &DVector<f64>, dir: &DVector<f64>) -> f64
where
    F: Fn(&DVector<f64>) -> f64,
{
    let h = f64::EPSILON.cbrt() * u.amax().max(1.0);
    (f(&(u + dir * h)) - f(&(u - dir * h))) / (2.0 * h)
}
