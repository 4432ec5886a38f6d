//! Energy levels from the rest point and its modes, stationary moments, and the
//! closed-form spectra of the built-in models.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::forcing_f;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{bilinear, to_complex_vec, CMatrix, C64};
use crate::modes::{skew_product, ModeSet};
use crate::symbols::builtin::{MagneticOscillator3dParams, Oscillator1dParams};
use crate::symbols::{PhasePoint, SymbolModel};

/// Occupation numbers `nu in Z_+^n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zeros(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Every `nu <= max` componentwise, lexicographic (last index fastest).
    pub fn enumerate_up_to(max: &MultiIndex) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex(Vec::with_capacity(max.len()))];
        for &m in &max.0 {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..=m).map(move |v| {
                        let mut p = prefix.0.clone();
                        p.push(v);
                        MultiIndex(p)
                    })
                })
                .collect();
        }
        out
    }

    /// `hbar (nu_k + 1/2)`.
    pub fn occupations(&self, hbar: f64) -> Vec<f64> {
        self.0.iter().map(|&v| hbar * (v as f64 + 0.5)).collect()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Level-spacing frequencies with their decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectedFrequencies {
    pub omegas: Vec<f64>,
    pub omega_tilde: Vec<f64>,
    /// `(kappa_tilde / 2) <f_k^*, V_ww f_k>`.
    pub quadratic: Vec<f64>,
    /// Shift from the second-slot gradient of the kernel through the rest point
    /// displacement. Zero whenever `V_w(z0, z0) = 0`.
    pub third: Vec<f64>,
}

/// `Omega~_k = Omega_k + quadratic_k + third_k`.
///
/// `third_k = -(kappa_tilde/2) Re sum_j <V_w, f_j> <f_k^*, D_{f_j^*}[curvature] f_k> / Omega_j`,
/// i.e. minus `kappa_tilde/2` times `V_w . frak_h_zz^{-1} grad <f_k^*, curvature f_k>`.
pub fn corrected_frequencies(model: &SymbolModel, z0: &PhasePoint, modes: &ModeSet) -> Result<CorrectedFrequencies> {
    check_dim(model.n(), modes.n())?;
    if let Some(w) = modes.omegas.iter().find(|w| !(**w > 0.0)) {
        return Err(Error::InvalidArgument(format!("mode frequency {w} is not positive")));
    }
    let kappa = model.kappa_tilde();
    let vww = model.kernel_ww_diag(z0)?.map(|x| C64::new(x, 0.0));
    let vw = to_complex_vec(&model.kernel_w_diag(z0)?);
    let has_gradient = vw.iter().any(|c| c.re != 0.0);

    let n = modes.n();
    let mut quadratic = vec![0.0; n];
    let mut third = vec![0.0; n];
    // D_{f_j^*} of the curvature, shared across k
    let dirs: Vec<Option<CMatrix>> = if has_gradient && kappa != 0.0 {
        modes.vectors.iter().map(|f| model.directional_third(z0, &f.conjugate()).map(Some)).collect::<Result<_>>()?
    } else {
        vec![None; n]
    };

    for k in 0..n {
        let fk = &modes.vectors[k];
        let fkc = fk.conjugate();
        quadratic[k] = 0.5 * kappa * bilinear(&fkc, &(&vww * fk)).re;
        let mut acc = 0.0;
        for (j, dm) in dirs.iter().enumerate() {
            if let Some(dm) = dm {
                let proj = bilinear(&vw, &modes.vectors[j]);
                let curv = bilinear(&fkc, &(dm * fk));
                acc += (proj * curv).re / modes.omegas[j];
            }
        }
        third[k] = -0.5 * kappa * acc;
    }
    let omega_tilde = (0..n).map(|k| modes.omegas[k] + quadratic[k] + third[k]).collect();
    Ok(CorrectedFrequencies { omegas: modes.omegas.clone(), omega_tilde, quadratic, third })
}

/// `frak_h(z0) + (hbar/2) sum Omega~_k`.
pub fn ground_energy(model: &SymbolModel, z0: &PhasePoint, corrected: &CorrectedFrequencies) -> Result<f64> {
    Ok(model.frak_h(z0)? + 0.5 * model.hbar() * corrected.omega_tilde.iter().sum::<f64>())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Level {
    pub nu: MultiIndex,
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumTable {
    pub levels: Vec<Level>,
    pub ground: f64,
    /// Constant term `frak_h(z0)`.
    pub principal: f64,
    pub hbar: f64,
    pub omega_tilde: Vec<f64>,
}

impl SpectrumTable {
    fn build(principal: f64, hbar: f64, omega_tilde: Vec<f64>, nu_max: &MultiIndex) -> Self {
        let energy = |nu: &MultiIndex| {
            principal + hbar * omega_tilde.iter().zip(&nu.0).map(|(w, &v)| w * (v as f64 + 0.5)).sum::<f64>()
        };
        let levels =
            MultiIndex::enumerate_up_to(nu_max).into_iter().map(|nu| Level { energy: energy(&nu), nu }).collect();
        let ground = energy(&MultiIndex::zeros(omega_tilde.len()));
        SpectrumTable { levels, ground, principal, hbar, omega_tilde }
    }

    pub fn energy(&self, nu: &MultiIndex) -> Option<f64> {
        self.levels.iter().find(|l| &l.nu == nu).map(|l| l.energy)
    }
}

/// `E_nu = frak_h(z0) + hbar sum Omega~_k (nu_k + 1/2)` for all `nu <= nu_max`.
///
/// Order-`hbar` asymptotics; the remainder is not estimated.
pub fn energy_levels(
    model: &SymbolModel,
    z0: &PhasePoint,
    corrected: &CorrectedFrequencies,
    nu_max: &MultiIndex,
) -> Result<SpectrumTable> {
    check_dim(corrected.omega_tilde.len(), nu_max.len())?;
    Ok(SpectrumTable::build(model.frak_h(z0)?, model.hbar(), corrected.omega_tilde.clone(), nu_max))
}

/// `<nu - nu', Omega>` with the uncorrected frequencies.
pub fn transition_frequency(corrected: &CorrectedFrequencies, nu: &MultiIndex, nu_prime: &MultiIndex) -> Result<f64> {
    check_dim(corrected.omegas.len(), nu.len())?;
    check_dim(corrected.omegas.len(), nu_prime.len())?;
    Ok(corrected.omegas.iter().zip(nu.0.iter().zip(&nu_prime.0)).map(|(w, (&a, &b))| w * (a as f64 - b as f64)).sum())
}

#[derive(Clone, Debug, PartialEq)]
pub struct StationaryMoments {
    pub delta2: DMatrix<f64>,
    /// `hbar (nu_k + 1/2)`.
    pub d_nu: Vec<f64>,
}

/// `Delta2 = sum_k (f_k f_k^H + f_k^* f_k^T) D_k / 2`.
pub fn stationary_moments(modes: &ModeSet, nu: &MultiIndex, hbar: f64) -> Result<StationaryMoments> {
    check_dim(modes.n(), nu.len())?;
    let d_nu = nu.occupations(hbar);
    let dim = 2 * modes.n();
    let mut acc = CMatrix::zeros(dim, dim);
    for (f, d) in modes.vectors.iter().zip(&d_nu) {
        let outer = f * f.adjoint() + f.conjugate() * f.transpose();
        acc += outer * C64::new(0.5 * d, 0.0);
    }
    let imag = acc.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    let real = acc.map(|c| c.re);
    if imag > 1e-12 * real.amax().max(f64::MIN_POSITIVE) {
        return Err(Error::Internal(format!(
            "stationary moments have imaginary part {imag:e}; modes are not normalised"
        )));
    }
    Ok(StationaryMoments { delta2: (&real + real.transpose()) * 0.5, d_nu })
}

/// First-order mean shift of a stationary state: the fixed point of
/// `z1' = J frak_h_zz z1 + F`, i.e. `-sum_k Re({f_k^*, F} f_k) / Omega_k`.
pub fn stationary_z1(
    model: &SymbolModel,
    z0: &PhasePoint,
    modes: &ModeSet,
    delta2: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let force = to_complex_vec(&forcing_f(model, z0, delta2)?);
    let mut z1 = DVector::zeros(model.dim());
    for (f, w) in modes.vectors.iter().zip(&modes.omegas) {
        let c = skew_product(&f.conjugate(), &force)?;
        z1 -= (f * c).map(|x| x.re) / *w;
    }
    Ok(z1)
}

/// Constant action rate `S/t` of the stationary state `nu`:
/// `-frak_h(z0) - hbar kappa_tilde <V_w, Z1> - (kappa_tilde/2) sum_k <f_k^*, V_ww f_k> D_k`.
pub fn stationary_action_rate(model: &SymbolModel, z0: &PhasePoint, modes: &ModeSet, nu: &MultiIndex) -> Result<f64> {
    let moments = stationary_moments(modes, nu, model.hbar())?;
    let z1 = stationary_z1(model, z0, modes, &moments.delta2)?;
    let vw = model.kernel_w_diag(z0)?;
    let vww = model.kernel_ww_diag(z0)?.map(|x| C64::new(x, 0.0));
    let k = model.kappa_tilde();
    let curv: f64 =
        modes.vectors.iter().zip(&moments.d_nu).map(|(f, d)| bilinear(&f.conjugate(), &(&vww * f)).re * d).sum();
    Ok(-model.frak_h(z0)? - model.hbar() * k * vw.dot(&z1) - 0.5 * k * curv)
}

/// Closed-form levels of the 1D oscillator model.
pub fn closed_form_spectrum_1d(p: &Oscillator1dParams, nu_max: u32) -> Result<SpectrumTable> {
    p.validate()?;
    if p.shifted_omega_sq() <= 0.0 {
        return Err(Error::InvalidArgument("oscillator parameters are not elliptic".into()));
    }
    let ws = p.omega_s();
    let shift = p.eta() * p.omega_nl().powi(2);
    Ok(SpectrumTable::build(p.kappa_tilde * p.v0, p.hbar, vec![ws - shift / (2.0 * ws)], &MultiIndex(vec![nu_max])))
}

/// Closed-form levels of the magnetic oscillator, indexed by
/// `(omega_plus, omega_minus, omega_s)` in that order.
pub fn closed_form_spectrum_3d(p: &MagneticOscillator3dParams, nu_max: &MultiIndex) -> Result<SpectrumTable> {
    p.validate()?;
    check_dim(3, nu_max.len())?;
    let (wp, wm, ws) = p.ritz_frequencies()?;
    let shift = p.eta() * p.omega_nl().powi(2);
    Ok(SpectrumTable::build(
        p.kappa_tilde * p.v0,
        p.hbar,
        vec![wp - shift / (wp + wm), wm - shift / (wp + wm), ws - shift / (2.0 * ws)],
        nu_max,
    ))
}
