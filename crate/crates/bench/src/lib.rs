//! Shared fixtures for the benchmarks.

use ehrenfest_core::{
    find_rest_point, make_magnetic_oscillator_3d, make_oscillator_1d, solve_modes, stationary_moments,
    MagneticOscillator3dParams, ModeSet, MomentState, MultiIndex, Oscillator1dParams, PhasePoint, SymbolModel,
};

pub fn oscillator(hbar: f64) -> SymbolModel {
    make_oscillator_1d(&Oscillator1dParams { m: 1.0, k: 1.0, v0: -0.19, gamma: 1.0, kappa_tilde: 1.0, hbar })
        .expect("valid parameters")
}

pub fn magnetic(hbar: f64) -> SymbolModel {
    make_magnetic_oscillator_3d(&MagneticOscillator3dParams {
        m: 1.0,
        k: 1.0,
        field: 2.0,
        charge: 1.0,
        c: 1.0,
        v0: 0.3,
        gamma: 1.0,
        kappa_tilde: 1.0,
        hbar,
    })
    .expect("valid parameters")
}

/// Rest point, modes and the stationary state of level `nu`.
pub fn stationary(model: &SymbolModel, nu: &[u32]) -> (ModeSet, MomentState) {
    let z0 = find_rest_point(model, &PhasePoint::origin(model.n()), 1e-12, 50).expect("rest point").z0;
    let modes = solve_modes(model, &z0, None).expect("elliptic rest point");
    let st = stationary_moments(&modes, &MultiIndex(nu.to_vec()), model.hbar()).expect("moments");
    let state = MomentState::new(z0, st.delta2).expect("symmetric moments");
    (modes, state)
}
