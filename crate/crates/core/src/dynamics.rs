//! Time integration of the moment systems.
//!
//! Three modes share one fixed-step RK4 driver:
//!
//! * `Order0`: the mean moves under `J frak_h_z`; `Delta2` is carried by the
//!   linearised flow along it.
//! * `Order2`: the mean also feels `(1/2) J grad Tr(curvature Delta2)`.
//! * `Split`: principal mean `z0`, its `Delta2`, and the first correction `z1`
//!   with `z1' = J frak_h_zz(z0) z1 + F(z0, Delta2)`. The mean to order `hbar` is
//!   `z0 + hbar z1`. Mode vectors are transported alongside to monitor the skew
//!   products, and the action is accumulated.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{apply_j, symplectic_j, uncertainty_margin, CVector, C64};
use crate::modes::{skew_product, solve_modes_with, ModeOptions, ModeSet};
use crate::symbols::{PhasePoint, SymbolModel};

/// Mean point and symmetric second-moment matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentState {
    pub z: PhasePoint,
    pub delta2: DMatrix<f64>,
}

impl MomentState {
    pub fn new(z: PhasePoint, delta2: DMatrix<f64>) -> Result<Self> {
        let dim = z.coords().len();
        check_dim(dim, delta2.nrows())?;
        check_dim(dim, delta2.ncols())?;
        if delta2.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("second moments must be finite".into()));
        }
        let asym = (&delta2 - delta2.transpose()).amax();
        if asym > 1e-12 * delta2.amax().max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidArgument(format!("second-moment matrix is not symmetric (residual {asym:e})")));
        }
        Ok(MomentState { z, delta2: (&delta2 + delta2.transpose()) * 0.5 })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvolutionMode {
    Order0,
    Order2,
    Split,
}

impl std::str::FromStr for EvolutionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "order0" => Ok(EvolutionMode::Order0),
            "order2" => Ok(EvolutionMode::Order2),
            "split" => Ok(EvolutionMode::Split),
            other => Err(Error::InvalidArgument(format!("unknown evolution mode {other:?}"))),
        }
    }
}

impl EvolutionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EvolutionMode::Order0 => "order0",
            EvolutionMode::Order2 => "order2",
            EvolutionMode::Split => "split",
        }
    }
}

/// `J frak_h_z(z)`.
pub fn rhs_order0(model: &SymbolModel, z: &PhasePoint) -> Result<DVector<f64>> {
    Ok(apply_j(&model.frak_h_z(z)?))
}

fn moment_rate(hess: &DMatrix<f64>, delta2: &DMatrix<f64>) -> DMatrix<f64> {
    let n = hess.nrows() / 2;
    let x = symplectic_j(n) * hess * delta2;
    let xt = x.transpose();
    x + xt
}

/// Right-hand side of the second-order system: `(z', Delta2')`.
///
/// `Delta2' = J h Delta2 - Delta2 h J` is returned as `X + X^T`, symmetric by construction.
pub fn rhs_order2(model: &SymbolModel, state: &MomentState) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let z = &state.z;
    check_dim(model.dim(), state.delta2.nrows())?;
    let mut grad = model.frak_h_z(z)?;
    grad += model.curvature_trace_gradient(z, &state.delta2)? * 0.5;
    let hess = model.frak_h_zz(z)?;
    Ok((apply_j(&grad), moment_rate(&hess, &state.delta2)))
}

/// `F = J grad Tr(curvature Delta2) / (2 hbar)`.
pub fn forcing_f(model: &SymbolModel, z: &PhasePoint, delta2: &DMatrix<f64>) -> Result<DVector<f64>> {
    let g = model.curvature_trace_gradient(z, delta2)?;
    Ok(apply_j(&g) / (2.0 * model.hbar()))
}

#[derive(Clone, Debug)]
pub struct IntegrateOptions {
    /// Keep every `record_stride`-th step (the final step is always kept).
    pub record_stride: usize,
    /// `z1(0)` in split mode; zero when absent.
    pub initial_z1: Option<DVector<f64>>,
    /// Abort when the uncertainty margin drops below `-positivity_floor * hbar`.
    pub positivity_floor: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { record_stride: 1, initial_z1: None, positivity_floor: 1e-6 }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub mode: EvolutionMode,
    pub hbar: f64,
    pub times: Vec<f64>,
    /// In split mode `z` is the principal mean `z0(t)`.
    pub states: Vec<MomentState>,
    pub z1: Option<Vec<DVector<f64>>>,
    /// `F(z0, Delta2)` at each sample (split mode).
    pub forcing: Option<Vec<DVector<f64>>>,
    pub action: Option<Vec<f64>>,
    pub positivity_margin: Vec<f64>,
    /// `max_kl |{a_k^*, a_l} + 2i delta_kl|` (split mode, when modes exist at `z(0)`).
    pub skew_drift: Option<Vec<f64>>,
    /// Modes used for the transported vectors.
    pub modes: Option<ModeSet>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `z0 + hbar z1` in split mode, `z` otherwise.
    pub fn mean(&self, i: usize) -> DVector<f64> {
        let z = self.states[i].z.coords().clone();
        match &self.z1 {
            Some(z1) => z + &z1[i] * self.hbar,
            None => z,
        }
    }

    pub fn series(&self, sel: ComponentSelector) -> Result<Vec<f64>> {
        let dim = self.states.first().map(|s| s.z.coords().len()).unwrap_or(0);
        let bad = || Error::InvalidArgument(format!("component {sel:?} out of range"));
        match sel {
            ComponentSelector::Mean(i) if i < dim => Ok(self.states.iter().map(|s| s.z.coords()[i]).collect()),
            ComponentSelector::Moment(i, j) if i < dim && j < dim => {
                Ok(self.states.iter().map(|s| s.delta2[(i, j)]).collect())
            }
            ComponentSelector::Correction(i) if i < dim => match &self.z1 {
                Some(z1) => Ok(z1.iter().map(|v| v[i]).collect()),
                None => Err(Error::InvalidArgument("trajectory has no z1 history".into())),
            },
            _ => Err(bad()),
        }
    }

    /// CSV with one row per sample, 17 significant digits, empty cells where a
    /// quantity is not tracked in the run's mode.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let dim = self.states.first().map(|s| s.z.coords().len()).unwrap_or(0);
        let n = dim / 2;
        let label = |i: usize| if i < n { format!("p{}", i + 1) } else { format!("x{}", i - n + 1) };
        let mut header = vec!["t".to_string()];
        header.extend((0..dim).map(label));
        for i in 0..dim {
            for j in i..dim {
                header.push(format!("d2_{}_{}", label(i), label(j)));
            }
        }
        header.extend((0..dim).map(|i| format!("z1_{}", label(i))));
        header.extend(["action", "positivity_margin", "skew_drift"].map(String::from));
        writeln!(out, "{}", header.join(","))?;

        let num = |x: f64| format!("{x:.16e}");
        for k in 0..self.len() {
            let s = &self.states[k];
            let mut row = vec![num(self.times[k])];
            row.extend(s.z.coords().iter().map(|&x| num(x)));
            for i in 0..dim {
                for j in i..dim {
                    row.push(num(s.delta2[(i, j)]));
                }
            }
            match &self.z1 {
                Some(z1) => row.extend(z1[k].iter().map(|&x| num(x))),
                None => row.extend(std::iter::repeat_n(String::new(), dim)),
            }
            row.push(self.action.as_ref().map(|a| num(a[k])).unwrap_or_default());
            row.push(num(self.positivity_margin[k]));
            row.push(self.skew_drift.as_ref().map(|d| num(d[k])).unwrap_or_default());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Scalar time series picked out of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComponentSelector {
    /// Component of the (principal) mean.
    Mean(usize),
    /// Entry of `Delta2`.
    Moment(usize, usize),
    /// Component of `z1`.
    Correction(usize),
}

/// Packed RK4 state: `z | Delta2 (column-major) | z1 | Re a_k, Im a_k ...`.
struct Layout {
    dim: usize,
    split: bool,
    tracked: usize,
}

impl Layout {
    fn len(&self) -> usize {
        let base = self.dim + self.dim * self.dim;
        if self.split {
            base + self.dim + 2 * self.tracked * self.dim
        } else {
            base
        }
    }

    fn z(&self, y: &DVector<f64>) -> DVector<f64> {
        y.rows(0, self.dim).into_owned()
    }

    fn delta2(&self, y: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.dim, self.dim, &y.as_slice()[self.dim..self.dim + self.dim * self.dim])
    }

    fn z1_offset(&self) -> usize {
        self.dim + self.dim * self.dim
    }

    fn z1(&self, y: &DVector<f64>) -> DVector<f64> {
        y.rows(self.z1_offset(), self.dim).into_owned()
    }

    fn mode_offset(&self, k: usize) -> usize {
        self.z1_offset() + self.dim + 2 * k * self.dim
    }

    fn mode(&self, y: &DVector<f64>, k: usize) -> CVector {
        let o = self.mode_offset(k);
        CVector::from_fn(self.dim, |i, _| C64::new(y[o + i], y[o + self.dim + i]))
    }
}

fn rhs(model: &SymbolModel, mode: EvolutionMode, lay: &Layout, y: &DVector<f64>) -> Result<DVector<f64>> {
    let dim = lay.dim;
    let z = PhasePoint::from_vector(lay.z(y))?;
    let d2 = lay.delta2(y);
    let hess = model.frak_h_zz(&z)?;
    let mut out = DVector::zeros(lay.len());

    let mut grad = model.frak_h_z(&z)?;
    if mode == EvolutionMode::Order2 {
        grad += model.curvature_trace_gradient(&z, &d2)? * 0.5;
    }
    out.rows_mut(0, dim).copy_from(&apply_j(&grad));
    let rate = moment_rate(&hess, &d2);
    out.rows_mut(dim, dim * dim).copy_from_slice(rate.as_slice());

    if lay.split {
        let gen = symplectic_j(dim / 2) * &hess;
        let z1 = lay.z1(y);
        let z1_rate = &gen * z1 + forcing_f(model, &z, &d2)?;
        out.rows_mut(lay.z1_offset(), dim).copy_from(&z1_rate);
        for k in 0..lay.tracked {
            let o = lay.mode_offset(k);
            let re = y.rows(o, dim).into_owned();
            let im = y.rows(o + dim, dim).into_owned();
            out.rows_mut(o, dim).copy_from(&(&gen * re));
            out.rows_mut(o + dim, dim).copy_from(&(&gen * im));
        }
    }
    Ok(out)
}

fn lagrangian(model: &SymbolModel, z: &PhasePoint, d2: &DMatrix<f64>, z1: &DVector<f64>) -> Result<f64> {
    let n = model.n();
    let velocity = rhs_order0(model, z)?;
    let kinetic: f64 = (0..n).map(|i| z.coords()[i] * velocity[n + i]).sum();
    let k = model.kappa_tilde();
    let vw = model.kernel_w_diag(z)?;
    let vww = model.kernel_ww_diag(z)?;
    Ok(kinetic - model.frak_h(z)? - model.hbar() * k * vw.dot(z1) - 0.5 * k * vww.component_mul(d2).sum())
}

fn skew_drift(vectors: &[CVector]) -> f64 {
    let mut worst = 0.0_f64;
    for (k, ak) in vectors.iter().enumerate() {
        for (l, al) in vectors.iter().enumerate() {
            let target = if k == l { C64::new(0.0, -2.0) } else { C64::new(0.0, 0.0) };
            let s = skew_product(&ak.conjugate(), al).expect("equal lengths");
            worst = worst.max((s - target).norm());
        }
    }
    worst
}

pub fn integrate(
    model: &SymbolModel,
    initial: &MomentState,
    t_final: f64,
    dt: f64,
    mode: EvolutionMode,
) -> Result<Trajectory> {
    integrate_with(model, initial, t_final, dt, mode, &IntegrateOptions::default())
}

/// Fixed-step classical RK4. The step is `t_final / ceil(t_final / dt)` so the
/// grid ends exactly at `t_final`.
pub fn integrate_with(
    model: &SymbolModel,
    initial: &MomentState,
    t_final: f64,
    dt: f64,
    mode: EvolutionMode,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    let dim = model.dim();
    model.check_point(&initial.z)?;
    check_dim(dim, initial.delta2.nrows())?;
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_final must be positive, got {t_final}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if opts.record_stride == 0 {
        return Err(Error::InvalidArgument("record_stride must be at least 1".into()));
    }
    let steps = ((t_final / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let h = t_final / steps as f64;
    let hbar = model.hbar();
    let floor = -opts.positivity_floor * hbar;

    let split = mode == EvolutionMode::Split;
    let modes = if split {
        solve_modes_with(model, &initial.z, &ModeOptions { pairing_tol: None, allow_degenerate: true }).ok()
    } else {
        None
    };
    let lay = Layout { dim, split, tracked: modes.as_ref().map_or(0, |m| m.n()) };

    let mut y = DVector::zeros(lay.len());
    y.rows_mut(0, dim).copy_from(initial.z.coords());
    y.rows_mut(dim, dim * dim).copy_from_slice(initial.delta2.as_slice());
    if split {
        if let Some(z1) = &opts.initial_z1 {
            check_dim(dim, z1.len())?;
            y.rows_mut(lay.z1_offset(), dim).copy_from(z1);
        }
        if let Some(ms) = &modes {
            for (k, f) in ms.vectors.iter().enumerate() {
                let o = lay.mode_offset(k);
                for i in 0..dim {
                    y[o + i] = f[i].re;
                    y[o + dim + i] = f[i].im;
                }
            }
        }
    }

    let mut traj = Trajectory {
        mode,
        hbar,
        times: Vec::new(),
        states: Vec::new(),
        z1: split.then(Vec::new),
        forcing: split.then(Vec::new),
        action: split.then(Vec::new),
        positivity_margin: Vec::new(),
        skew_drift: (split && modes.is_some()).then(Vec::new),
        modes: modes.clone(),
    };

    let mut action = 0.0;
    let mut lag_prev = 0.0;
    for step in 0..=steps {
        let t = step as f64 * h;
        if step > 0 {
            let k1 = rhs(model, mode, &lay, &y)?;
            let k2 = rhs(model, mode, &lay, &(&y + &k1 * (0.5 * h)))?;
            let k3 = rhs(model, mode, &lay, &(&y + &k2 * (0.5 * h)))?;
            let k4 = rhs(model, mode, &lay, &(&y + &k3 * h))?;
            y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            let d2 = lay.delta2(&y);
            let sym = (&d2 + d2.transpose()) * 0.5;
            y.rows_mut(dim, dim * dim).copy_from_slice(sym.as_slice());
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::PositivityAbort { t, margin: f64::NAN });
        }

        let z = PhasePoint::from_vector(lay.z(&y))?;
        let d2 = lay.delta2(&y);
        let margin = uncertainty_margin(&d2, hbar);
        if margin < floor {
            return Err(Error::PositivityAbort { t, margin });
        }
        if split {
            let lag = lagrangian(model, &z, &d2, &lay.z1(&y))?;
            if step > 0 {
                action += 0.5 * h * (lag_prev + lag);
            }
            lag_prev = lag;
        }

        if step % opts.record_stride == 0 || step == steps {
            traj.times.push(t);
            traj.positivity_margin.push(margin);
            if split {
                traj.z1.as_mut().unwrap().push(lay.z1(&y));
                traj.forcing.as_mut().unwrap().push(forcing_f(model, &z, &d2)?);
                traj.action.as_mut().unwrap().push(action);
                if let Some(drift) = traj.skew_drift.as_mut() {
                    let vecs: Vec<CVector> = (0..lay.tracked).map(|k| lay.mode(&y, k)).collect();
                    drift.push(skew_drift(&vecs));
                }
            }
            traj.states.push(MomentState { z, delta2: d2 });
        }
    }
    Ok(traj)
}

/// Per-sample action of a split-mode trajectory.
pub fn action(traj: &Trajectory) -> Result<Vec<f64>> {
    traj.action.clone().ok_or_else(|| Error::InvalidArgument("action is accumulated only in split mode".into()))
}

/// `z1(t) = sum_k (b_k(t) a_k(t) + c.c.)` with `a_k(t) = exp(i Omega_k t) f_k` and
/// `b_k(t) = b_k + (i/2) int_0^t {a_k^*, F} ds` by the trapezoid rule.
///
/// Valid along a trajectory resting at the point where `modes` were computed.
pub fn reconstruct_z1(
    modes: &ModeSet,
    times: &[f64],
    forcing: &[DVector<f64>],
    b: &[C64],
) -> Result<Vec<DVector<f64>>> {
    check_dim(times.len(), forcing.len())?;
    check_dim(modes.n(), b.len())?;
    let n = modes.n();
    let mut coeff: Vec<C64> = b.to_vec();
    let mut prev: Vec<C64> = vec![C64::new(0.0, 0.0); n];
    let mut out = Vec::with_capacity(times.len());
    let half_i = C64::new(0.0, 0.5);
    for (idx, (&t, f)) in times.iter().zip(forcing).enumerate() {
        let fc = f.map(|x| C64::new(x, 0.0));
        let mut z1 = CVector::zeros(2 * n);
        for k in 0..n {
            let a = modes.floquet_solution(k, t)?;
            let integrand = skew_product(&a.conjugate(), &fc)?;
            if idx > 0 {
                let dtk = t - times[idx - 1];
                coeff[k] += half_i * (prev[k] + integrand) * (0.5 * dtk);
            }
            prev[k] = integrand;
            z1 += &a * coeff[k] + a.conjugate() * coeff[k].conj();
        }
        let imag = z1.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        if imag > 1e-10 {
            return Err(Error::Internal(format!("reconstructed z1 has imaginary part {imag:e}")));
        }
        out.push(z1.map(|c| c.re));
    }
    Ok(out)
}

/// Coefficients `b_k = (i/2) {f_k^*, z1}` of a real vector in the mode basis.
pub fn mode_coefficients(modes: &ModeSet, z1: &DVector<f64>) -> Result<Vec<C64>> {
    let zc = z1.map(|x| C64::new(x, 0.0));
    modes.vectors.iter().map(|f| Ok(C64::new(0.0, 0.5) * skew_product(&f.conjugate(), &zc)?)).collect()
}

/// Second moments of `exp(-<xi, A xi>/2)`: `sigma_pp = (hbar/2) A`,
/// `sigma_xx = (hbar/2) A^{-1}`, `sigma_xp = 0`, in `(p, x)` order.
pub fn gaussian_initial_moments(a: &DMatrix<f64>, hbar: f64) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::InvalidArgument("width matrix must be square and nonempty".into()));
    }
    if (a - a.transpose()).amax() > 1e-12 * a.amax() {
        return Err(Error::InvalidArgument("width matrix must be symmetric".into()));
    }
    if !(hbar > 0.0) {
        return Err(Error::InvalidArgument("hbar must be positive".into()));
    }
    let chol =
        a.clone().cholesky().ok_or_else(|| Error::InvalidArgument("width matrix is not positive definite".into()))?;
    let inv = chol.inverse();
    let mut d = DMatrix::zeros(2 * n, 2 * n);
    d.view_mut((0, 0), (n, n)).copy_from(&(a * (0.5 * hbar)));
    d.view_mut((n, n), (n, n)).copy_from(&((&inv + inv.transpose()) * (0.25 * hbar)));
    Ok(d)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    /// Angular frequency.
    pub frequency: f64,
    pub amplitude: f64,
}

/// Local maxima of the Hann-windowed DFT amplitude of a mean-removed series.
///
/// Peaks must exceed `rel_threshold` times the largest amplitude and an absolute
/// floor of `1e-10 max|x|`. Frequencies are angular, `2 pi k / (N dt)`.
pub fn spectral_peaks(times: &[f64], values: &[f64], rel_threshold: f64) -> Result<Vec<Peak>> {
    check_dim(times.len(), values.len())?;
    let n = times.len();
    if n < 1024 {
        return Err(Error::InvalidArgument(format!("need at least 1024 samples, got {n}")));
    }
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("time grid must be increasing".into()));
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt {
            return Err(Error::InvalidArgument("time grid is not uniform".into()));
        }
    }

    let mean = values.iter().sum::<f64>() / n as f64;
    let scale = values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let window: Vec<f64> =
        (0..n).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()).collect();
    let wsum: f64 = window.iter().sum();
    let mut buf: Vec<Complex<f64>> =
        values.iter().zip(&window).map(|(v, w)| Complex::new((v - mean) * w, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let amp: Vec<f64> = buf[..n / 2 + 1].iter().map(|c| 2.0 * c.norm() / wsum).collect();

    let top = amp[1..].iter().cloned().fold(0.0, f64::max);
    let cut = (rel_threshold * top).max(1e-10 * scale);
    let mut peaks = Vec::new();
    for k in 1..amp.len() - 1 {
        if amp[k] > amp[k - 1] && amp[k] >= amp[k + 1] && amp[k] > cut {
            peaks.push(Peak { frequency: 2.0 * std::f64::consts::PI * k as f64 / (n as f64 * dt), amplitude: amp[k] });
        }
    }
    Ok(peaks)
}

pub fn extract_trajectory_frequencies(
    traj: &Trajectory,
    sel: ComponentSelector,
    rel_threshold: f64,
) -> Result<Vec<Peak>> {
    spectral_peaks(&traj.times, &traj.series(sel)?, rel_threshold)
}
