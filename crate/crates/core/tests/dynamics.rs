mod common;

use std::f64::consts::PI;

use common::*;
use ehrenfest_core::dynamics::{mode_coefficients, spectral_peaks};
use ehrenfest_core::linalg::uncertainty_margin;
use ehrenfest_core::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn harmonic(m: f64, k: f64, hbar: f64) -> SymbolModel {
    let mut p = osc_params(0.0, hbar);
    p.m = m;
    p.k = k;
    p.kappa_tilde = 0.0;
    make_oscillator_1d(&p).unwrap()
}

fn rest_modes(model: &SymbolModel) -> (PhasePoint, ModeSet) {
    let z0 = find_rest_point(model, &PhasePoint::origin(model.n()), 1e-12, 50).unwrap().z0;
    let ms = solve_modes(model, &z0, None).unwrap();
    (z0, ms)
}

/// `Re sum_jl D_jl f_j f_l^H` for Hermitian `D`.
fn moments_from(ms: &ModeSet, d: &CMatrix) -> DMatrix<f64> {
    let dim = 2 * ms.n();
    let mut acc = CMatrix::zeros(dim, dim);
    for j in 0..ms.n() {
        for l in 0..ms.n() {
            acc += &ms.vectors[j] * ms.vectors[l].adjoint() * d[(j, l)];
        }
    }
    acc.map(|c| c.re)
}

fn generic_moments(ms: &ModeSet, hbar: f64) -> DMatrix<f64> {
    let n = ms.n();
    let mut d = CMatrix::identity(n, n) * C64::new(hbar, 0.0);
    for j in 0..n {
        for l in j + 1..n {
            let c = C64::new(0.05 * hbar * (j + 1) as f64, 0.03 * hbar * (l as f64));
            d[(j, l)] = c;
            d[(l, j)] = c.conj();
        }
    }
    moments_from(ms, &d)
}

#[test]
fn harmonic_run_matches_analytic_solution() {
    let (m, k, hbar) = (1.0, 1.0, 0.5);
    let model = harmonic(m, k, hbar);
    let w0 = (k / m).sqrt();
    let d2 = gaussian_initial_moments(&DMatrix::from_element(1, 1, m * w0), hbar).unwrap();
    let init = MomentState::new(PhasePoint::new(vec![0.0, 1.0]).unwrap(), d2.clone()).unwrap();
    for mode in [EvolutionMode::Order0, EvolutionMode::Order2, EvolutionMode::Split] {
        let tr = integrate(&model, &init, 20.0 * PI / w0, 1e-3, mode).unwrap();
        let mut worst = 0.0_f64;
        for (t, s) in tr.times.iter().zip(&tr.states) {
            let exact = [-m * w0 * (w0 * t).sin(), (w0 * t).cos()];
            worst = worst.max((s.z.coords()[0] - exact[0]).abs()).max((s.z.coords()[1] - exact[1]).abs());
            worst = worst.max((&s.delta2 - &d2).amax());
        }
        assert!(worst <= 1e-8, "{mode:?}: {worst:e}");
        assert!((tr.times.last().unwrap() - 20.0 * PI / w0).abs() < 1e-12);
    }
}

#[test]
fn quadratic_flow_conserves_energy() {
    let mut p = mag_params(2.0, 0.0, 0.1);
    p.kappa_tilde = 0.0;
    let model = make_magnetic_oscillator_3d(&p).unwrap();
    let z = PhasePoint::new(vec![0.3, -0.2, 0.5, 1.0, 0.4, -0.7]).unwrap();
    let e0 = model.frak_h(&z).unwrap();
    let init = MomentState::new(z, DMatrix::identity(6, 6) * 0.05).unwrap();
    let tr = integrate(&model, &init, 30.0, 2e-3, EvolutionMode::Order2).unwrap();
    for s in &tr.states {
        assert!((model.frak_h(&s.z).unwrap() - e0).abs() < 1e-8);
        assert_eq!(s.delta2, s.delta2.transpose());
    }
}

#[test]
fn stationary_state_does_not_move() {
    for model in [mag(2.0, 0.3, 0.2), osc(-0.19, 0.1), anharmonic(0.3, 0.2, 0.0, 0.5, 0.05)] {
        let (z0, ms) = rest_modes(&model);
        let nu = MultiIndex((0..ms.n() as u32).collect());
        let st = stationary_moments(&ms, &nu, model.hbar()).unwrap();
        let z1 = stationary_z1(&model, &z0, &ms, &st.delta2).unwrap();
        let init = MomentState::new(z0.clone(), st.delta2.clone()).unwrap();
        let opts = IntegrateOptions { initial_z1: Some(z1.clone()), ..Default::default() };
        let tr = integrate_with(&model, &init, 15.0, 1e-2, EvolutionMode::Split, &opts).unwrap();
        for (i, s) in tr.states.iter().enumerate() {
            assert!((s.z.coords() - z0.coords()).amax() <= 1e-10);
            assert!((&s.delta2 - &st.delta2).amax() <= 1e-10);
            assert!((&tr.z1.as_ref().unwrap()[i] - &z1).amax() <= 1e-10);
        }
    }
}

#[test]
fn second_moments_follow_the_fundamental_matrix() {
    let model = mag(2.0, -0.3, 0.1);
    let (z0, ms) = rest_modes(&model);
    let d0 = generic_moments(&ms, 0.1);
    let init = MomentState::new(z0, d0.clone()).unwrap();
    let tr = integrate(&model, &init, 25.0, 1e-3, EvolutionMode::Split).unwrap();
    let inv = ms.assemble_a(0.0).try_inverse().unwrap();
    let dc = d0.map(|x| C64::new(x, 0.0));
    for (t, s) in tr.times.iter().zip(&tr.states).step_by(500) {
        let phi = ms.assemble_a(*t) * &inv;
        let expect = &phi * &dc * phi.transpose();
        assert!(expect.iter().map(|c| c.im.abs()).fold(0.0, f64::max) < 1e-10);
        assert!((&s.delta2 - expect.map(|c| c.re)).amax() <= 1e-8);
    }
}

#[test]
fn transported_modes_keep_their_skew_products() {
    let model = mag(0.5, 0.3, 0.1);
    let (z0, ms) = rest_modes(&model);
    let t_final = 50.0 / ms.omegas[0];
    let dt = 1e-2 / ms.omegas.last().unwrap();
    let init = MomentState::new(z0, generic_moments(&ms, 0.1)).unwrap();
    let opts = IntegrateOptions { record_stride: 100, ..Default::default() };
    let tr = integrate_with(&model, &init, t_final, dt, EvolutionMode::Split, &opts).unwrap();
    let drift = tr.skew_drift.as_ref().unwrap();
    assert!(drift.iter().all(|d| *d <= 1e-8));
    assert!(tr.positivity_margin.iter().all(|m| *m >= -1e-8 * 0.1));
}

#[test]
fn trajectory_of_generic_guess_tracks_modes_off_rest() {
    let model = anharmonic(0.3, 0.1, 0.0, 0.4, 0.01);
    let init = MomentState::new(PhasePoint::new(vec![0.1, 0.2]).unwrap(), DMatrix::identity(2, 2) * 0.005).unwrap();
    let tr = integrate(&model, &init, 5.0, 1e-3, EvolutionMode::Split).unwrap();
    assert!(tr.skew_drift.unwrap().iter().all(|d| *d <= 1e-8));
}

#[test]
fn reconstruction_without_forcing() {
    let model = mag(2.0, 0.3, 0.1);
    let (_, ms) = rest_modes(&model);
    let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
    let zero = vec![DVector::zeros(6); times.len()];
    let none = reconstruct_z1(&ms, &times, &zero, &[C64::new(0.0, 0.0); 3]).unwrap();
    assert!(none.iter().all(|v| v.amax() == 0.0));

    let b = [C64::new(0.2, -0.1), C64::new(0.0, 0.3), C64::new(-0.5, 0.0)];
    let z1 = reconstruct_z1(&ms, &times, &zero, &b).unwrap();
    for (t, v) in times.iter().zip(&z1) {
        let mut expect = DVector::zeros(6);
        for (k, bk) in b.iter().enumerate() {
            let a = ms.floquet_solution(k, *t).unwrap();
            expect += (a * *bk).map(|c| 2.0 * c.re);
        }
        assert!((v - expect).amax() < 1e-14);
    }
}

#[test]
fn reconstruction_of_the_stationary_shift() {
    let model = anharmonic(0.4, 0.3, 0.0, 0.7, 0.05);
    let (z0, ms) = rest_modes(&model);
    let st = stationary_moments(&ms, &MultiIndex(vec![2]), model.hbar()).unwrap();
    let z1 = stationary_z1(&model, &z0, &ms, &st.delta2).unwrap();
    assert!(z1.amax() > 1e-3);

    // fixed point of z1' = J h z1 + F
    let f = forcing_f(&model, &z0, &st.delta2).unwrap();
    let gen = ms.generator();
    assert!((gen * &z1 + &f).amax() < 1e-12);

    let init = MomentState::new(z0, st.delta2.clone()).unwrap();
    let opts = IntegrateOptions { initial_z1: Some(z1.clone()), ..Default::default() };
    let tr = integrate_with(&model, &init, 10.0, 2.5e-4, EvolutionMode::Split, &opts).unwrap();
    let b = mode_coefficients(&ms, &z1).unwrap();
    let rec = reconstruct_z1(&ms, &tr.times, tr.forcing.as_ref().unwrap(), &b).unwrap();
    for (r, direct) in rec.iter().zip(tr.z1.as_ref().unwrap()) {
        assert!((r - &z1).amax() <= 1e-8);
        assert!((r - direct).amax() <= 1e-8);
    }
}

#[test]
fn reconstruction_of_a_driven_correction() {
    // non-stationary second moments drive z1 through a time-dependent F
    let model = anharmonic(0.4, 0.3, 0.0, 0.7, 0.05);
    let (z0, ms) = rest_modes(&model);
    let d0 = DMatrix::from_row_slice(2, 2, &[0.04, 0.01, 0.01, 0.02]);
    let init = MomentState::new(z0, d0).unwrap();
    let z1_0 = DVector::from_vec(vec![0.1, -0.2]);
    let opts = IntegrateOptions { initial_z1: Some(z1_0.clone()), ..Default::default() };
    let tr = integrate_with(&model, &init, 8.0, 2.5e-4, EvolutionMode::Split, &opts).unwrap();
    let b = mode_coefficients(&ms, &z1_0).unwrap();
    let rec = reconstruct_z1(&ms, &tr.times, tr.forcing.as_ref().unwrap(), &b).unwrap();
    let worst = rec.iter().zip(tr.z1.as_ref().unwrap()).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
    assert!(worst < 1e-7, "{worst:e}");
}

#[test]
fn forcing_vanishes_where_expected() {
    let z = PhasePoint::origin(3);
    let d = DMatrix::identity(6, 6) * 0.1;
    assert!(forcing_f(&mag(2.0, 0.3, 0.1), &z, &d).unwrap().amax() < 1e-15);
    let mut p = mag_params(1.0, 0.3, 0.1);
    p.kappa_tilde = 0.0;
    let q = make_magnetic_oscillator_3d(&p).unwrap();
    let off = PhasePoint::new(vec![0.3, 0.1, -0.2, 0.5, 0.2, 0.1]).unwrap();
    assert_eq!(forcing_f(&q, &off, &d).unwrap().amax(), 0.0);
}

#[test]
fn forcing_matches_finite_difference_of_trace() {
    let model = mag(2.0, -0.3, 0.1);
    let z = PhasePoint::new(vec![0.1, -0.2, 0.3, 0.4, -0.1, 0.25]).unwrap();
    let d = DMatrix::from_fn(6, 6, |i, j| 0.01 * (1.0 + (i + j) as f64) + if i == j { 0.05 } else { 0.0 });
    let d = (&d + d.transpose()) * 0.5;
    let f = forcing_f(&model, &z, &d).unwrap();
    let sym = model.symbol();
    let w = z.coords().clone();
    let k = model.kappa_tilde();
    let trace = |u: &DVector<f64>| {
        let m = sym.hamiltonian_zz(u) + (sym.kernel_zz(u, &w) + sym.kernel_ww(u, &w)) * k;
        m.component_mul(&d).sum()
    };
    let h = 1e-5;
    let grad = DVector::from_fn(6, |i, _| {
        let mut e = DVector::zeros(6);
        e[i] = h;
        (trace(&(&w + &e)) - trace(&(&w - &e))) / (2.0 * h)
    });
    let expect = ehrenfest_core::linalg::apply_j(&grad) / (2.0 * model.hbar());
    assert!((&f - &expect).amax() / expect.amax().max(1.0) < 1e-5);
}

#[test]
fn order2_rhs_examples() {
    let mut p = mag_params(1.0, 0.0, 0.1);
    p.kappa_tilde = 0.0;
    let q = make_magnetic_oscillator_3d(&p).unwrap();
    let z = PhasePoint::new(vec![0.3, 0.1, -0.2, 0.5, 0.2, 0.1]).unwrap();
    let st = MomentState::new(z.clone(), DMatrix::identity(6, 6) * 0.2).unwrap();
    let (zdot, _) = rhs_order2(&q, &st).unwrap();
    assert!((zdot - rhs_order0(&q, &z).unwrap()).amax() < 1e-15);

    // p' and x' from the explicit gradient of the magnetic Hamiltonian
    let g = q.frak_h_z(&z).unwrap();
    let r = rhs_order0(&q, &z).unwrap();
    for i in 0..3 {
        assert_eq!(r[i], -g[3 + i]);
        assert_eq!(r[3 + i], g[i]);
    }
    assert!(rhs_order0(&q, &PhasePoint::origin(3)).unwrap().amax() == 0.0);
}

#[test]
fn order0_and_order2_differ_at_first_order() {
    let devs: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&hbar| {
            let model = anharmonic(0.4, 0.0, 0.0, 0.5, hbar);
            let w = (0.9f64 / 1.3).sqrt();
            let d2 = gaussian_initial_moments(&DMatrix::from_element(1, 1, 1.3 * w), hbar).unwrap();
            let init = MomentState::new(PhasePoint::new(vec![0.0, 0.5]).unwrap(), d2).unwrap();
            let t = 4.0 * PI / w;
            let a = integrate(&model, &init, t, 2e-3, EvolutionMode::Order0).unwrap();
            let b = integrate(&model, &init, t, 2e-3, EvolutionMode::Order2).unwrap();
            (0..a.len()).map(|i| (a.mean(i) - b.mean(i)).amax()).fold(0.0, f64::max)
        })
        .collect();
    for pair in devs.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!(ratio > 5.0 && ratio < 20.0, "ratio {ratio}");
    }
}

#[test]
fn split_deviation_is_second_order_for_separable_kernel() {
    // with V_zw = 0 the split mean z0 + hbar z1 agrees with order 2 up to O(hbar^2)
    let devs: Vec<f64> = [1e-2, 1e-3]
        .iter()
        .map(|&hbar| {
            let model = anharmonic(0.4, 0.2, 0.0, 0.5, hbar);
            let w = (0.9f64 / 1.3).sqrt();
            let d2 = gaussian_initial_moments(&DMatrix::from_element(1, 1, 1.3 * w), hbar).unwrap();
            let init = MomentState::new(PhasePoint::new(vec![0.0, 0.5]).unwrap(), d2).unwrap();
            let t = 4.0 * PI / w;
            let a = integrate(&model, &init, t, 2e-3, EvolutionMode::Split).unwrap();
            let b = integrate(&model, &init, t, 2e-3, EvolutionMode::Order2).unwrap();
            (0..a.len()).map(|i| (a.mean(i) - b.mean(i)).amax()).fold(0.0, f64::max)
        })
        .collect();
    let ratio = devs[0] / devs[1];
    assert!(ratio > 50.0 && ratio < 200.0, "ratio {ratio}");
}

#[test]
fn gaussian_moments_match_quadrature() {
    let hbar = 0.2;
    let a = DMatrix::from_row_slice(2, 2, &[1.4, 0.3, 0.3, 0.8]);
    let d = gaussian_initial_moments(&a, hbar).unwrap();

    // psi(x) = exp(-<x, A x> / (2 hbar)); grid sums over a box of +-8 sigma
    let n = 401;
    let span = 8.0 * (hbar / 0.5f64).sqrt();
    let h = 2.0 * span / (n - 1) as f64;
    let (mut norm, mut xx, mut pp) = (0.0, DMatrix::<f64>::zeros(2, 2), DMatrix::<f64>::zeros(2, 2));
    for i in 0..n {
        for j in 0..n {
            let x = DVector::from_vec(vec![-span + i as f64 * h, -span + j as f64 * h]);
            let ax = &a * &x;
            let psi = (-x.dot(&ax) / (2.0 * hbar)).exp();
            let dens = psi * psi;
            norm += dens;
            xx += &x * x.transpose() * dens;
            // -i hbar grad psi = i (A x) psi
            pp += &ax * ax.transpose() * dens;
        }
    }
    xx /= norm;
    pp /= norm;
    assert!((d.view((2, 2), (2, 2)) - &xx).amax() < 1e-10);
    assert!((d.view((0, 0), (2, 2)) - &pp).amax() < 1e-10);
    assert!(d.view((0, 2), (2, 2)).amax() == 0.0);
    assert!(uncertainty_margin(&d, hbar).abs() < 1e-12);

    let d2 = gaussian_initial_moments(&a, 2.0 * hbar).unwrap();
    assert!((d2 - &d * 2.0).amax() < 1e-15);
    assert!(gaussian_initial_moments(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]), hbar).is_err());
}

#[test]
fn second_moment_peaks_sit_at_frequency_differences() {
    let model = mag(2.0, 0.3, 0.1);
    let (z0, ms) = rest_modes(&model);
    let n = 4096;
    let t_final = 200.0 / ms.omegas[0];
    let sample = t_final / (n - 1) as f64;
    let stride = 8;
    let dt = sample / stride as f64;
    let init = MomentState::new(z0, generic_moments(&ms, 0.1)).unwrap();
    let opts = IntegrateOptions { record_stride: stride, ..Default::default() };
    let tr = integrate_with(&model, &init, t_final, dt, EvolutionMode::Order2, &opts).unwrap();
    assert_eq!(tr.len(), n);
    let bin = 2.0 * PI / (n as f64 * sample);
    let w = &ms.omegas;
    for target in [w[1] - w[0], w[2] - w[0], w[2] - w[1]] {
        let found = [(0, 0), (0, 1), (0, 4), (3, 3), (3, 4), (2, 5), (0, 2)].iter().any(|&(i, j)| {
            extract_trajectory_frequencies(&tr, ComponentSelector::Moment(i, j), 1e-3)
                .unwrap()
                .iter()
                .any(|p| (p.frequency - target).abs() <= bin)
        });
        assert!(found, "no peak near {target}");
    }
}

#[test]
fn correction_peaks_sit_at_mode_frequencies() {
    let model = mag(2.0, 0.3, 0.1);
    let (z0, ms) = rest_modes(&model);
    let n = 2048;
    let t_final = 200.0 / ms.omegas[0];
    let sample = t_final / (n - 1) as f64;
    let stride = 8;
    let st = stationary_moments(&ms, &MultiIndex(vec![0, 0, 0]), 0.1).unwrap();
    let init = MomentState::new(z0, st.delta2).unwrap();
    let z1 = DVector::from_vec(vec![0.1, 0.2, -0.1, 0.3, -0.2, 0.15]);
    let opts = IntegrateOptions { record_stride: stride, initial_z1: Some(z1), ..Default::default() };
    let tr = integrate_with(&model, &init, t_final, sample / stride as f64, EvolutionMode::Split, &opts).unwrap();
    let bin = 2.0 * PI / (n as f64 * sample);
    for w in &ms.omegas {
        let found = (0..6).any(|i| {
            extract_trajectory_frequencies(&tr, ComponentSelector::Correction(i), 1e-3)
                .unwrap()
                .iter()
                .any(|p| (p.frequency - w).abs() <= bin)
        });
        assert!(found, "no peak near {w}");
    }
    assert!(spectral_peaks(&tr.times, &vec![1.0; n], 1e-3).unwrap().is_empty());
}

#[test]
fn invalid_moments_abort_the_run() {
    let model = osc(0.1, 0.1);
    let init = MomentState::new(PhasePoint::origin(1), DMatrix::zeros(2, 2)).unwrap();
    match integrate(&model, &init, 1.0, 1e-2, EvolutionMode::Order2) {
        Err(Error::PositivityAbort { t, margin }) => {
            assert_eq!(t, 0.0);
            assert!(margin < 0.0);
        }
        other => panic!("expected abort, got {other:?}"),
    }
}

#[test]
fn argument_errors() {
    let model = osc(0.1, 0.1);
    let init = MomentState::new(PhasePoint::origin(1), DMatrix::identity(2, 2) * 0.05).unwrap();
    assert!(integrate(&model, &init, -1.0, 1e-2, EvolutionMode::Order0).is_err());
    assert!(integrate(&model, &init, 1.0, 0.0, EvolutionMode::Order0).is_err());
    let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]);
    assert!(MomentState::new(PhasePoint::origin(1), bad).is_err());
    let tr = integrate(&model, &init, 1.0, 1e-2, EvolutionMode::Order2).unwrap();
    assert!(ehrenfest_core::dynamics::action(&tr).is_err());
    assert!(tr.series(ComponentSelector::Correction(0)).is_err());
    assert!(tr.series(ComponentSelector::Mean(2)).is_err());
}

#[test]
fn csv_export_layout() {
    let model = osc(0.1, 0.1);
    let init = MomentState::new(PhasePoint::new(vec![0.0, 0.5]).unwrap(), DMatrix::identity(2, 2) * 0.05).unwrap();
    let tr = integrate(&model, &init, 0.1, 1e-2, EvolutionMode::Split).unwrap();
    let mut buf = Vec::new();
    tr.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,p1,x1,d2_p1_p1,d2_p1_x1,d2_x1_x1,z1_p1,z1_x1,action,positivity_margin,skew_drift");
    assert_eq!(lines.len(), tr.len() + 1);
    let cells: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cells.len(), 11);
    assert!(cells.iter().all(|c| !c.is_empty()));
    let parsed: f64 = cells[2].parse().unwrap();
    assert_eq!(parsed, 0.5);

    let tr0 = integrate(&model, &init, 0.1, 1e-2, EvolutionMode::Order0).unwrap();
    let mut buf = Vec::new();
    tr0.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row.len(), 11);
    assert!(row[6].is_empty() && row[8].is_empty() && row[10].is_empty());
}

proptest! {
    #[test]
    fn moment_rate_is_symmetric(
        coords in proptest::collection::vec(-1.0f64..1.0, 6),
        entries in proptest::collection::vec(-0.1f64..0.1, 36),
    ) {
        let model = mag(1.1, -0.2, 0.1);
        let d = DMatrix::from_vec(6, 6, entries);
        let d = (&d + d.transpose()) * 0.5;
        let st = MomentState::new(PhasePoint::new(coords).unwrap(), d).unwrap();
        let (_, rate) = rhs_order2(&model, &st).unwrap();
        let asym = (&rate - rate.transpose()).amax();
        prop_assert!(asym <= 1e-12 * rate.amax().max(1e-300));
    }
}
