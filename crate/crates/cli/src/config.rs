use std::path::Path;
use std::sync::Arc;

use ehrenfest_core::restpoint;
use ehrenfest_core::symbols::builtin::{magnetic_oscillator_3d_form, oscillator_1d_form, QuadraticGaussian};
use ehrenfest_core::{
    DerivativeMode, EvolutionMode, HartreeSymbol, MagneticOscillator3dParams, MultiIndex, Oscillator1dParams,
    SymbolModel,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::hook::{CorruptedSymbol, Target};

/// Everything a run needs, read from one TOML file.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub restpoint: RestpointConfig,
    #[serde(default)]
    pub modes: ModesConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub evolve: EvolveConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    #[serde(rename = "oscillator_1d")]
    Oscillator1d {
        m: f64,
        k: f64,
        v0: f64,
        gamma: f64,
        kappa_tilde: f64,
        hbar: f64,
        #[serde(default)]
        derivatives: DerivativeChoice,
    },
    #[serde(rename = "magnetic_oscillator_3d")]
    MagneticOscillator3d {
        m: f64,
        k: f64,
        field: f64,
        charge: f64,
        c: f64,
        v0: f64,
        gamma: f64,
        kappa_tilde: f64,
        hbar: f64,
        #[serde(default)]
        derivatives: DerivativeChoice,
    },
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeChoice {
    #[default]
    Analytic,
    FiniteDifference,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RestpointConfig {
    /// Starting point; the origin when absent.
    pub guess: Option<Vec<f64>>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RestpointConfig {
    fn default() -> Self {
        RestpointConfig { guess: None, tol: restpoint::DEFAULT_TOL, max_iter: restpoint::DEFAULT_MAX_ITER }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModesConfig {
    /// Absolute pairing tolerance; relative default when absent.
    pub pairing_tol: Option<f64>,
    #[serde(default)]
    pub allow_degenerate: bool,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    /// Largest quantum number per mode; all zeros when absent.
    pub nu_max: Option<Vec<u32>>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// Rest point with the stationary moments of level `nu`.
    #[default]
    Stationary,
    /// Gaussian wave packet centred at `z` with diagonal width `width`.
    Coherent,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub mode: String,
    pub record_stride: usize,
    pub positivity_floor: f64,
    pub initial: InitialKind,
    pub nu: Option<Vec<u32>>,
    pub z: Option<Vec<f64>>,
    pub width: Option<Vec<f64>>,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            t_final: None,
            dt: None,
            mode: "order2".into(),
            record_stride: 1,
            positivity_floor: 1e-6,
            initial: InitialKind::Stationary,
            nu: None,
            z: None,
            width: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    pub probes: usize,
    pub radius: f64,
    pub seed: u64,
    /// Test hook: perturb one analytic derivative by name (e.g. `"H_zz"`).
    pub corrupt_derivative: Option<String>,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig { probes: 20, radius: 1.5, seed: 7, corrupt_derivative: None }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        let bad = |msg: &str| Err(CliError::Config(msg.to_string()));
        let n = self.model.dof();
        if let Some(g) = &self.restpoint.guess {
            if g.len() != 2 * n {
                return bad(&format!("restpoint.guess needs {} entries", 2 * n));
            }
        }
        if !(self.restpoint.tol > 0.0) || self.restpoint.max_iter == 0 {
            return bad("restpoint.tol must be positive and max_iter nonzero");
        }
        if let Some(nu) = &self.spectrum.nu_max {
            if nu.len() != n {
                return bad(&format!("spectrum.nu_max needs {n} entries"));
            }
        }
        let ev = &self.evolve;
        parse_mode(&ev.mode)?;
        if ev.record_stride == 0 {
            return bad("evolve.record_stride must be at least 1");
        }
        if let Some(nu) = &ev.nu {
            if nu.len() != n {
                return bad(&format!("evolve.nu needs {n} entries"));
            }
        }
        if let Some(z) = &ev.z {
            if z.len() != 2 * n {
                return bad(&format!("evolve.z needs {} entries", 2 * n));
            }
        }
        if let Some(w) = &ev.width {
            if w.len() != n || w.iter().any(|x| !(*x > 0.0)) {
                return bad(&format!("evolve.width needs {n} positive entries"));
            }
        }
        if self.validate.probes == 0 || !(self.validate.radius > 0.0) {
            return bad("validate.probes and validate.radius must be positive");
        }
        if let Some(name) = &self.validate.corrupt_derivative {
            Target::from_name(name).ok_or_else(|| CliError::Config(format!("unknown derivative '{name}'")))?;
        }
        self.build_model()?;
        Ok(())
    }

    /// Model with the configured derivative mode and test hook applied.
    pub fn build_model(&self) -> Result<SymbolModel, CliError> {
        let (q, v0, gamma, kappa, hbar, choice) = match &self.model {
            ModelConfig::Oscillator1d { derivatives, .. } => {
                let p = self.model.oscillator_1d().expect("1d variant");
                p.validate().map_err(bad_params)?;
                (oscillator_1d_form(&p), p.v0, p.gamma, p.kappa_tilde, p.hbar, *derivatives)
            }
            ModelConfig::MagneticOscillator3d { derivatives, .. } => {
                let p = self.model.magnetic_oscillator_3d().expect("3d variant");
                p.validate().map_err(bad_params)?;
                (magnetic_oscillator_3d_form(&p), p.v0, p.gamma, p.kappa_tilde, p.hbar, *derivatives)
            }
        };
        let base = QuadraticGaussian::new(q, v0, gamma).map_err(bad_params)?;
        let symbol: Arc<dyn HartreeSymbol> = match &self.validate.corrupt_derivative {
            Some(name) => {
                let target =
                    Target::from_name(name).ok_or_else(|| CliError::Config(format!("unknown derivative '{name}'")))?;
                Arc::new(CorruptedSymbol::new(Arc::new(base), target))
            }
            None => Arc::new(base),
        };
        let mode = match choice {
            DerivativeChoice::Analytic => DerivativeMode::Analytic,
            DerivativeChoice::FiniteDifference => DerivativeMode::FiniteDifference,
        };
        Ok(SymbolModel::new(symbol, hbar, kappa).map_err(bad_params)?.with_derivative_mode(mode))
    }
}

fn bad_params(e: ehrenfest_core::Error) -> CliError {
    CliError::Config(format!("model parameters rejected: {e}"))
}

impl ModelConfig {
    pub fn dof(&self) -> usize {
        match self {
            ModelConfig::Oscillator1d { .. } => 1,
            ModelConfig::MagneticOscillator3d { .. } => 3,
        }
    }

    pub fn oscillator_1d(&self) -> Option<Oscillator1dParams> {
        match *self {
            ModelConfig::Oscillator1d { m, k, v0, gamma, kappa_tilde, hbar, .. } => {
                Some(Oscillator1dParams { m, k, v0, gamma, kappa_tilde, hbar })
            }
            _ => None,
        }
    }

    pub fn magnetic_oscillator_3d(&self) -> Option<MagneticOscillator3dParams> {
        match *self {
            ModelConfig::MagneticOscillator3d { m, k, field, charge, c, v0, gamma, kappa_tilde, hbar, .. } => {
                Some(MagneticOscillator3dParams { m, k, field, charge, c, v0, gamma, kappa_tilde, hbar })
            }
            _ => None,
        }
    }

    /// `sqrt(m k)` for every degree of freedom: the ground-state width of the bare oscillator.
    pub fn natural_width(&self) -> Vec<f64> {
        match *self {
            ModelConfig::Oscillator1d { m, k, .. } => vec![(m * k).sqrt()],
            ModelConfig::MagneticOscillator3d { m, k, .. } => vec![(m * k).sqrt(); 3],
        }
    }
}

pub fn parse_mode(s: &str) -> Result<EvolutionMode, CliError> {
    s.parse::<EvolutionMode>()
        .map_err(|_| CliError::Config(format!("unknown evolution mode '{s}' (order0, order2, split)")))
}

/// Parse `"a,b,c"` into a multi-index.
pub fn parse_nu(s: &str) -> Result<MultiIndex, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<u32>())
        .collect::<Result<Vec<_>, _>>()
        .map(MultiIndex)
        .map_err(|_| CliError::Config(format!("cannot parse multi-index '{s}'")))
}
