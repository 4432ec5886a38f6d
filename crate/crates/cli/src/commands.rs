use std::f64::consts::PI;

use ehrenfest_core::linalg::{symplectic_j, uncertainty_margin};
use ehrenfest_core::symbols::builtin::{magnetic_oscillator_3d_form, oscillator_1d_form};
use ehrenfest_core::{
    check_derivatives, closed_form_spectrum_1d, closed_form_spectrum_3d, corrected_frequencies, energy_levels,
    find_rest_point, gaussian_initial_moments, integrate_with, solve_modes_with, stationary_action_rate,
    stationary_moments, stationary_z1, transition_frequency, CVector, CorrectedFrequencies, EvolutionMode,
    IntegrateOptions, ModeOptions, ModeSet, MomentState, MultiIndex, PhasePoint, RestPoint, SpectrumTable, SymbolModel,
    Trajectory,
};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::config::{parse_mode, InitialKind, ModelConfig, RunConfig};
use crate::error::CliError;

/// Values given on the command line; they win over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub nu_max: Option<MultiIndex>,
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub mode: Option<EvolutionMode>,
}

/// What a command produced: the document for `--out`/stdout, notes for
/// stderr, and an error to report after the document is written.
#[derive(Debug)]
pub struct Outcome {
    pub body: Vec<u8>,
    pub notes: Vec<String>,
    pub failure: Option<CliError>,
}

impl Outcome {
    fn json<T: Serialize>(doc: &T) -> Result<Self, CliError> {
        let mut body = serde_json::to_vec_pretty(doc).map_err(|e| CliError::Io(e.into()))?;
        body.push(b'\n');
        Ok(Outcome { body, notes: Vec::new(), failure: None })
    }
}

const RESIDUAL_TOL: f64 = 1e-10;
const MODE_TOL: f64 = 1e-10;
const DERIVATIVE_TOL: f64 = 1e-6;
const ORACLE_TOL: f64 = 1e-9;
const RITZ_TOL: f64 = 1e-12;
const POSITIVITY_TOL: f64 = 1e-10;
const ACTION_TOL: f64 = 1e-8;
const DT_WARN: f64 = 0.5;

struct Pipeline {
    model: SymbolModel,
    rest: RestPoint,
    modes: ModeSet,
    corrected: CorrectedFrequencies,
}

fn rest_point(cfg: &RunConfig, model: &SymbolModel) -> Result<RestPoint, CliError> {
    let guess = match &cfg.restpoint.guess {
        Some(g) => PhasePoint::new(g.clone())?,
        None => PhasePoint::origin(model.n()),
    };
    Ok(find_rest_point(model, &guess, cfg.restpoint.tol, cfg.restpoint.max_iter)?)
}

fn mode_options(cfg: &RunConfig) -> ModeOptions {
    ModeOptions { pairing_tol: cfg.modes.pairing_tol, allow_degenerate: cfg.modes.allow_degenerate }
}

fn pipeline(cfg: &RunConfig) -> Result<Pipeline, CliError> {
    let model = cfg.build_model()?;
    let rest = rest_point(cfg, &model)?;
    let modes = solve_modes_with(&model, &rest.z0, &mode_options(cfg))?;
    let corrected = corrected_frequencies(&model, &rest.z0, &modes)?;
    Ok(Pipeline { model, rest, modes, corrected })
}

fn nu_max(cfg: &RunConfig, ov: &Overrides) -> Result<MultiIndex, CliError> {
    let n = cfg.model.dof();
    let nu = ov
        .nu_max
        .clone()
        .or_else(|| cfg.spectrum.nu_max.clone().map(MultiIndex))
        .unwrap_or_else(|| MultiIndex::zeros(n));
    if nu.len() != n {
        return Err(CliError::Config(format!("nu_max needs {n} entries, got {}", nu.len())));
    }
    Ok(nu)
}

fn coords(z: &PhasePoint) -> Vec<f64> {
    z.coords().iter().copied().collect()
}

#[derive(Serialize)]
struct RestpointDoc<'a> {
    model: &'a ModelConfig,
    z0: Vec<f64>,
    residual: f64,
    energy_principal: f64,
    iterations: usize,
}

pub fn cmd_restpoint(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let model = cfg.build_model()?;
    let r = rest_point(cfg, &model)?;
    Outcome::json(&RestpointDoc {
        model: &cfg.model,
        z0: coords(&r.z0),
        residual: r.residual,
        energy_principal: r.energy_principal,
        iterations: r.iterations,
    })
}

#[derive(Serialize)]
struct ComplexDoc {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl From<&CVector> for ComplexDoc {
    fn from(v: &CVector) -> Self {
        ComplexDoc { re: v.iter().map(|c| c.re).collect(), im: v.iter().map(|c| c.im).collect() }
    }
}

#[derive(Serialize)]
struct ModesDoc<'a> {
    model: &'a ModelConfig,
    z0: Vec<f64>,
    omegas: &'a [f64],
    vectors: Vec<ComplexDoc>,
    pairing_tolerance: f64,
    eigen_residuals: &'a [f64],
    normalization_residual: f64,
}

pub fn cmd_modes(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let model = cfg.build_model()?;
    let r = rest_point(cfg, &model)?;
    let ms = solve_modes_with(&model, &r.z0, &mode_options(cfg))?;
    Outcome::json(&ModesDoc {
        model: &cfg.model,
        z0: coords(&r.z0),
        omegas: &ms.omegas,
        vectors: ms.vectors.iter().map(ComplexDoc::from).collect(),
        pairing_tolerance: ms.pairing_tolerance,
        eigen_residuals: &ms.eigen_residuals,
        normalization_residual: ms.normalization_residual,
    })
}

#[derive(Serialize)]
struct LevelDoc {
    nu: Vec<u32>,
    #[serde(rename = "E")]
    energy: f64,
}

#[derive(Serialize)]
struct SpectrumDoc<'a> {
    model: &'a ModelConfig,
    z0: Vec<f64>,
    residual: f64,
    omegas: &'a [f64],
    omega_tilde: &'a [f64],
    ground: f64,
    levels: Vec<LevelDoc>,
}

pub fn cmd_spectrum(cfg: &RunConfig, ov: &Overrides) -> Result<Outcome, CliError> {
    let nu = nu_max(cfg, ov)?;
    let p = pipeline(cfg)?;
    let table = energy_levels(&p.model, &p.rest.z0, &p.corrected, &nu)?;
    Outcome::json(&SpectrumDoc {
        model: &cfg.model,
        z0: coords(&p.rest.z0),
        residual: p.rest.residual,
        omegas: &p.corrected.omegas,
        omega_tilde: &p.corrected.omega_tilde,
        ground: table.ground,
        levels: table.levels.iter().map(|l| LevelDoc { nu: l.nu.0.clone(), energy: l.energy }).collect(),
    })
}

/// Largest `|lambda|` over the eigenvalues of `J frak_h_zz(z)`.
fn frequency_scale(model: &SymbolModel, z: &PhasePoint) -> Result<f64, CliError> {
    let g = symplectic_j(model.n()) * model.frak_h_zz(z)?;
    Ok(g.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max))
}

fn choose_dt(given: Option<f64>, scale: f64) -> Result<(f64, Option<String>), CliError> {
    let dt = match given {
        Some(dt) if dt > 0.0 && dt.is_finite() => dt,
        Some(dt) => return Err(CliError::Config(format!("dt must be positive, got {dt}"))),
        None if scale > 0.0 => 1e-2 / scale,
        None => return Err(CliError::Config("no frequency scale to pick dt from; set evolve.dt".into())),
    };
    let warn = (dt * scale > DT_WARN).then(|| {
        format!(
            "warning: dt * max_omega = {:.3} exceeds {DT_WARN}; RK4 results may be inaccurate or unstable",
            dt * scale
        )
    });
    Ok((dt, warn))
}

fn quadratic_form(m: &ModelConfig) -> DMatrix<f64> {
    match m {
        ModelConfig::Oscillator1d { .. } => oscillator_1d_form(&m.oscillator_1d().expect("1d variant")),
        ModelConfig::MagneticOscillator3d { .. } => {
            magnetic_oscillator_3d_form(&m.magnetic_oscillator_3d().expect("3d variant"))
        }
    }
}

/// Final-time distance from the closed-form flow of the built-in models.
///
/// The Gaussian kernel has zero gradient and constant Hessian on the diagonal,
/// so the mean follows `exp(t J Q)` and the moments follow `exp(t J frak_h_zz)`
/// exactly, with no forcing on `z1`.
fn linear_reference_error(cfg: &RunConfig, model: &SymbolModel, traj: &Trajectory) -> Result<f64, CliError> {
    let last = traj.len() - 1;
    let t = traj.times[last];
    let j = symplectic_j(model.n());
    let start = &traj.states[0];
    let mean_flow = (&j * quadratic_form(&cfg.model) * t).exp();
    let moment_flow = (&j * model.frak_h_zz(&start.z)? * t).exp();
    let end = &traj.states[last];
    let mut err = (&mean_flow * start.z.coords() - end.z.coords()).amax();
    let d_ref = &moment_flow * &start.delta2 * moment_flow.transpose();
    err = err.max((d_ref - &end.delta2).amax());
    if let Some(z1) = &traj.z1 {
        err = err.max((&moment_flow * &z1[0] - &z1[last]).amax());
    }
    Ok(err)
}

pub fn cmd_evolve(cfg: &RunConfig, ov: &Overrides) -> Result<Outcome, CliError> {
    let ev = &cfg.evolve;
    let mode = match ov.mode {
        Some(m) => m,
        None => parse_mode(&ev.mode)?,
    };
    let t_final = ov
        .t_final
        .or(ev.t_final)
        .ok_or_else(|| CliError::Config("t_final is required (evolve.t_final or --t-final)".into()))?;
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(CliError::Config(format!("t_final must be positive, got {t_final}")));
    }
    let model = cfg.build_model()?;
    let n = model.n();

    let (initial, z1) = match ev.initial {
        InitialKind::Stationary => {
            let rest = rest_point(cfg, &model)?;
            let ms = solve_modes_with(&model, &rest.z0, &mode_options(cfg))?;
            let nu = MultiIndex(ev.nu.clone().unwrap_or_else(|| vec![0; n]));
            let st = stationary_moments(&ms, &nu, model.hbar())?;
            let z1 = match mode {
                EvolutionMode::Split => Some(stationary_z1(&model, &rest.z0, &ms, &st.delta2)?),
                _ => None,
            };
            (MomentState::new(rest.z0, st.delta2)?, z1)
        }
        InitialKind::Coherent => {
            let z = match &ev.z {
                Some(z) => PhasePoint::new(z.clone())?,
                None => rest_point(cfg, &model)?.z0,
            };
            let width = ev.width.clone().unwrap_or_else(|| cfg.model.natural_width());
            let a = DMatrix::from_diagonal(&DVector::from_vec(width));
            (MomentState::new(z, gaussian_initial_moments(&a, model.hbar())?)?, None)
        }
    };

    let scale = frequency_scale(&model, &initial.z)?;
    let (dt, warning) = choose_dt(ov.dt.or(ev.dt), scale)?;
    let opts =
        IntegrateOptions { record_stride: ev.record_stride, initial_z1: z1, positivity_floor: ev.positivity_floor };
    let traj = integrate_with(&model, &initial, t_final, dt, mode, &opts)?;

    let mut body = Vec::new();
    traj.write_csv(&mut body)?;
    let drift = traj
        .states
        .iter()
        .map(|s| (s.z.coords() - initial.z.coords()).amax().max((&s.delta2 - &initial.delta2).amax()))
        .fold(0.0, f64::max);
    let margin = traj.positivity_margin.iter().copied().fold(f64::INFINITY, f64::min);
    let reference = linear_reference_error(cfg, &model, &traj)?;
    let mut notes: Vec<String> = warning.into_iter().collect();
    notes.push(format!(
        "evolve: mode={} t_final={t_final} dt={dt:e} samples={} max_state_drift={drift:.3e} \
         min_positivity_margin={margin:.3e} linear_reference_error={reference:.3e}",
        mode.as_str(),
        traj.len()
    ));
    Ok(Outcome { body, notes, failure: None })
}

#[derive(Serialize)]
struct ActionLevelDoc {
    nu: Vec<u32>,
    #[serde(rename = "E")]
    energy: f64,
    action_rate: f64,
    integrated_rate: f64,
}

#[derive(Serialize)]
struct ActionDoc<'a> {
    model: &'a ModelConfig,
    t_final: f64,
    dt: f64,
    levels: Vec<ActionLevelDoc>,
    max_rate_error: f64,
    quantization_error: f64,
}

struct ActionSweep {
    levels: Vec<ActionLevelDoc>,
    max_rate_error: f64,
    quantization_error: f64,
}

/// Integrate each stationary level in split mode and compare `S(t)/t` with the
/// closed-form rate; then check `hbar <nu - nu', Omega> = (E - E') + (S - S')/t`.
fn action_sweep(p: &Pipeline, nus: &[MultiIndex], t_final: f64, dt: f64) -> Result<ActionSweep, CliError> {
    let hbar = p.model.hbar();
    let z0 = &p.rest.z0;
    let energies = level_energies(&p.model, z0, &p.corrected, nus)?;
    let mut levels = Vec::with_capacity(nus.len());
    let mut max_rate_error = 0.0_f64;
    for (nu, energy) in nus.iter().zip(energies) {
        let st = stationary_moments(&p.modes, nu, hbar)?;
        let z1 = stationary_z1(&p.model, z0, &p.modes, &st.delta2)?;
        let init = MomentState::new(z0.clone(), st.delta2)?;
        let opts = IntegrateOptions { initial_z1: Some(z1), record_stride: usize::MAX, ..Default::default() };
        let traj = integrate_with(&p.model, &init, t_final, dt, EvolutionMode::Split, &opts)?;
        let action = traj.action.as_ref().and_then(|a| a.last().copied()).unwrap_or(f64::NAN);
        let integrated_rate = action / t_final;
        let action_rate = stationary_action_rate(&p.model, z0, &p.modes, nu)?;
        max_rate_error = max_rate_error.max((integrated_rate - action_rate).abs());
        levels.push(ActionLevelDoc { nu: nu.0.clone(), energy, action_rate, integrated_rate });
    }
    let mut quantization_error = 0.0_f64;
    for (a, la) in nus.iter().zip(&levels) {
        for (b, lb) in nus.iter().zip(&levels) {
            let lhs = hbar * transition_frequency(&p.corrected, a, b)?;
            let rhs = la.energy - lb.energy + la.integrated_rate - lb.integrated_rate;
            quantization_error = quantization_error.max((lhs - rhs).abs());
        }
    }
    Ok(ActionSweep { levels, max_rate_error, quantization_error })
}

/// Energies of an arbitrary list of levels.
fn level_energies(
    model: &SymbolModel,
    z0: &PhasePoint,
    corrected: &CorrectedFrequencies,
    nus: &[MultiIndex],
) -> Result<Vec<f64>, CliError> {
    let ground = energy_levels(model, z0, corrected, &MultiIndex::zeros(corrected.omegas.len()))?.ground;
    Ok(nus
        .iter()
        .map(|nu| {
            let shift: f64 = corrected.omega_tilde.iter().zip(&nu.0).map(|(w, &v)| w * v as f64).sum();
            ground + model.hbar() * shift
        })
        .collect())
}

fn action_window(p: &Pipeline, t_final: Option<f64>, dt: Option<f64>) -> Result<(f64, f64), CliError> {
    let slow = p.modes.omegas.first().copied().unwrap_or(1.0);
    let fast = p.modes.omegas.last().copied().unwrap_or(1.0);
    let t_final = t_final.unwrap_or(20.0 * PI / slow);
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(CliError::Config(format!("t_final must be positive, got {t_final}")));
    }
    let (dt, _) = choose_dt(dt, fast)?;
    Ok((t_final, dt))
}

pub fn cmd_action(cfg: &RunConfig, ov: &Overrides) -> Result<Outcome, CliError> {
    let nu = nu_max(cfg, ov)?;
    let p = pipeline(cfg)?;
    let (t_final, dt) = action_window(&p, ov.t_final.or(cfg.evolve.t_final), ov.dt.or(cfg.evolve.dt))?;
    let sweep = action_sweep(&p, &MultiIndex::enumerate_up_to(&nu), t_final, dt)?;
    Outcome::json(&ActionDoc {
        model: &cfg.model,
        t_final,
        dt,
        levels: sweep.levels,
        max_rate_error: sweep.max_rate_error,
        quantization_error: sweep.quantization_error,
    })
}

#[derive(Serialize)]
struct Check {
    name: String,
    value: f64,
    tolerance: f64,
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<String>,
}

#[derive(Serialize)]
struct ValidateDoc<'a> {
    model: &'a ModelConfig,
    passed: bool,
    checks: &'a [Check],
    failed: &'a [String],
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    /// `value <= tolerance`; NaN fails.
    fn at_most(&mut self, name: impl Into<String>, value: f64, tolerance: f64) {
        let passed = value <= tolerance;
        self.0.push(Check { name: name.into(), value, tolerance, passed, detail: None });
    }

    fn broken(&mut self, name: &str, err: &CliError) {
        self.0.push(Check {
            name: name.into(),
            value: f64::NAN,
            tolerance: 0.0,
            passed: false,
            detail: Some(err.to_string()),
        });
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Indices sorting `values` ascending.
fn argsort(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    idx
}

/// Compare frequencies and levels against the closed forms of the built-in models.
fn oracle_checks(cfg: &RunConfig, p: &Pipeline, table: &SpectrumTable, nu: &MultiIndex, out: &mut Checks) {
    let oracle = match &cfg.model {
        ModelConfig::Oscillator1d { .. } => {
            let params = cfg.model.oscillator_1d().expect("1d variant");
            out.at_most("oracle_frequencies", rel(p.modes.omegas[0], params.omega_s()), RITZ_TOL);
            closed_form_spectrum_1d(&params, nu.0[0]).map(|t| (t, vec![0]))
        }
        ModelConfig::MagneticOscillator3d { .. } => {
            let params = cfg.model.magnetic_oscillator_3d().expect("3d variant");
            params.ritz_frequencies().and_then(|(wp, wm, ws)| {
                let ritz = [wp, wm, ws];
                let perm = argsort(&ritz);
                let worst = perm.iter().zip(&p.modes.omegas).map(|(&k, w)| rel(*w, ritz[k])).fold(0.0, f64::max);
                out.at_most("oracle_frequencies", worst, RITZ_TOL);
                let mut table_max = vec![0; 3];
                for (i, &k) in perm.iter().enumerate() {
                    table_max[k] = nu.0[i];
                }
                closed_form_spectrum_3d(&params, &MultiIndex(table_max)).map(|t| (t, perm))
            })
        }
    };
    match oracle {
        Ok((closed, perm)) => {
            let worst = table
                .levels
                .iter()
                .map(|l| {
                    let mut table_nu = vec![0; perm.len()];
                    for (i, &k) in perm.iter().enumerate() {
                        table_nu[k] = l.nu.0[i];
                    }
                    closed.energy(&MultiIndex(table_nu)).map(|e| rel(l.energy, e)).unwrap_or(f64::NAN)
                })
                .fold(0.0, |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) });
            out.at_most("oracle_levels", worst, ORACLE_TOL);
        }
        Err(e) => out.broken("oracle_levels", &e.into()),
    }
}

fn pipeline_checks(cfg: &RunConfig, ov: &Overrides, out: &mut Checks) -> Result<(), CliError> {
    let model = cfg.build_model()?;
    let rest = rest_point(cfg, &model)?;
    out.at_most("rest_point_residual", rest.residual, RESIDUAL_TOL);
    let modes = solve_modes_with(&model, &rest.z0, &mode_options(cfg))?;
    out.at_most("mode_eigen_residual", modes.eigen_residuals.iter().copied().fold(0.0, f64::max), MODE_TOL);
    out.at_most("mode_normalization", modes.normalization_residual, MODE_TOL);
    let corrected = corrected_frequencies(&model, &rest.z0, &modes)?;
    let p = Pipeline { model, rest, modes, corrected };

    let nu = ov
        .nu_max
        .clone()
        .or_else(|| cfg.spectrum.nu_max.clone().map(MultiIndex))
        .unwrap_or_else(|| MultiIndex(vec![2; cfg.model.dof()]));
    if nu.len() != cfg.model.dof() {
        return Err(CliError::Config(format!("nu_max needs {} entries", cfg.model.dof())));
    }
    let table = energy_levels(&p.model, &p.rest.z0, &p.corrected, &nu)?;
    oracle_checks(cfg, &p, &table, &nu, out);

    let hbar = p.model.hbar();
    let mut min_margin = f64::INFINITY;
    let mut ground_margin = 0.0_f64;
    for l in &table.levels {
        let m = uncertainty_margin(&stationary_moments(&p.modes, &l.nu, hbar)?.delta2, hbar) / hbar;
        min_margin = min_margin.min(m);
        if l.nu.0.iter().all(|&v| v == 0) {
            ground_margin = m.abs();
        }
    }
    out.at_most("stationary_positivity", -min_margin, POSITIVITY_TOL);
    out.at_most("ground_saturation", ground_margin, POSITIVITY_TOL);

    // ground state and each single excitation
    let n = cfg.model.dof();
    let mut nus = vec![MultiIndex::zeros(n)];
    for k in 0..n {
        let mut e = vec![0; n];
        e[k] = 1;
        nus.push(MultiIndex(e));
    }
    let slow = p.modes.omegas[0];
    let (t_final, dt) = action_window(&p, Some(4.0 * PI / slow), None)?;
    let sweep = action_sweep(&p, &nus, t_final, dt)?;
    out.at_most("action_rate", sweep.max_rate_error, ACTION_TOL);
    out.at_most("quantization_identity", sweep.quantization_error, ACTION_TOL);
    Ok(())
}

pub fn cmd_validate(cfg: &RunConfig, ov: &Overrides) -> Result<Outcome, CliError> {
    let mut checks = Checks::default();
    let model = cfg.build_model()?;
    let v = &cfg.validate;
    for c in check_derivatives(&model, v.probes, v.radius, v.seed) {
        checks.at_most(format!("derivative:{}", c.name), c.max_rel_err, DERIVATIVE_TOL);
    }
    if let Err(e) = pipeline_checks(cfg, ov, &mut checks) {
        if matches!(e, CliError::Config(_)) {
            return Err(e);
        }
        checks.broken("pipeline", &e);
    }

    let checks = checks.0;
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
    let mut outcome =
        Outcome::json(&ValidateDoc { model: &cfg.model, passed: failed.is_empty(), checks: &checks, failed: &failed })?;
    outcome.notes = checks
        .iter()
        .map(|c| {
            let status = if c.passed { "PASS" } else { "FAIL" };
            match &c.detail {
                Some(d) => format!("{status} {}: {d}", c.name),
                None => format!("{status} {}: {:.3e} (tol {:.0e})", c.name, c.value, c.tolerance),
            }
        })
        .collect();
    if !failed.is_empty() {
        outcome.failure = Some(CliError::Validation(failed));
    }
    Ok(outcome)
}
