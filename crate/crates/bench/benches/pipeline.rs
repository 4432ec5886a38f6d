use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ehrenfest_bench::{magnetic, oscillator, stationary};
use ehrenfest_core::dynamics::spectral_peaks;
use ehrenfest_core::{
    check_derivatives, corrected_frequencies, energy_levels, find_rest_point, integrate, rhs_order2, solve_modes,
    EvolutionMode, MultiIndex, PhasePoint,
};

fn spectrum(c: &mut Criterion) {
    for (name, model, nu_max) in [
        ("spectrum_1d", oscillator(1.0), MultiIndex(vec![5])),
        ("spectrum_3d", magnetic(1.0), MultiIndex(vec![3, 3, 3])),
    ] {
        c.bench_function(name, |b| {
            b.iter(|| {
                let z0 = find_rest_point(&model, &PhasePoint::origin(model.n()), 1e-12, 50).unwrap().z0;
                let modes = solve_modes(&model, &z0, None).unwrap();
                let corr = corrected_frequencies(&model, &z0, &modes).unwrap();
                black_box(energy_levels(&model, &z0, &corr, &nu_max).unwrap())
            })
        });
    }
}

fn dynamics(c: &mut Criterion) {
    let model = magnetic(0.1);
    let (_, state) = stationary(&model, &[1, 0, 2]);
    c.bench_function("rhs_order2_3d", |b| b.iter(|| black_box(rhs_order2(&model, &state).unwrap())));
    let mut group = c.benchmark_group("integrate_3d_1000_steps");
    group.sample_size(20);
    for mode in [EvolutionMode::Order0, EvolutionMode::Order2, EvolutionMode::Split] {
        group.bench_function(mode.as_str(), |b| {
            b.iter(|| black_box(integrate(&model, &state, 1.0, 1e-3, mode).unwrap()))
        });
    }
    group.finish();
}

fn diagnostics(c: &mut Criterion) {
    let model = magnetic(1.0);
    c.bench_function("check_derivatives_3d_20_probes", |b| {
        b.iter(|| black_box(check_derivatives(&model, 20, 1.5, 11)))
    });
    let times: Vec<f64> = (0..4096).map(|i| i as f64 * 0.05).collect();
    let values: Vec<f64> = times.iter().map(|t| (1.3 * t).sin() + 0.5 * (2.1 * t).cos()).collect();
    c.bench_function("spectral_peaks_4096", |b| b.iter(|| black_box(spectral_peaks(&times, &values, 1e-3).unwrap())));
}

criterion_group!(benches, spectrum, dynamics, diagnostics);
criterion_main!(benches);
