use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::fock::number;
use crate::model::{MODE_C, MODE_L, MODE_R};
use crate::weakdrive::{g2_analytic, occupations_analytic, steady_amplitudes_solve};

fn cavity_only(delta: f64, kappa: f64, eps: f64) -> SystemParams {
    SystemParams {
        delta_l: delta,
        kappa_l: kappa,
        kappa_c: 1.0,
        kappa_r: 1.0,
        eps_l: eps,
        ..SystemParams::default()
    }
}

fn random_density(basis: &Basis, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let d = basis.dim();
    let a: Vec<C64> = (0..d * d)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    // ρ = A A† / Tr.
    let mut data = vec![C64::new(0.0, 0.0); d * d];
    for r in 0..d {
        for c in 0..d {
            data[r * d + c] = (0..d).map(|k| a[r * d + k] * a[c * d + k].conj()).sum();
        }
    }
    let mut rho = DensityMatrix::from_data(basis, data).unwrap();
    rho.normalize_trace();
    rho
}

fn small_space() -> FockSpace {
    FockSpace::new(&[3, 3, 2, 3]).unwrap()
}

fn generic_params() -> SystemParams {
    SystemParams {
        delta_l: 0.3,
        delta_c: -0.2,
        delta_r: 0.1,
        g: 0.4,
        j_l: 0.2,
        j_r: 0.15,
        kappa_l: 0.1,
        kappa_c: 0.2,
        kappa_r: 0.3,
        gamma: 0.05,
        n_th: 0.4,
        eps_l: 0.05,
        eps_c: 0.02,
        eps_r: 0.03,
        ..SystemParams::default()
    }
}

#[test]
fn zero_rate_dissipator_is_zero() {
    let space = FockSpace::new(&[3]).unwrap();
    let d = dissipator(&annihilator(&space, 0).unwrap(), 0.0).unwrap();
    assert_eq!(d.matrix().nnz(), 0);
    assert!(dissipator(&annihilator(&space, 0).unwrap(), -1.0).is_err());
}

#[test]
fn trace_and_hermiticity_preserved() {
    let space = small_space();
    let l = liouvillian(&generic_params(), &space).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..3 {
        let rho = random_density(l.basis(), &mut rng);
        let drho = l.apply(&rho).unwrap();
        assert!(drho.trace().norm() < 1e-10, "trace {}", drho.trace());
        assert!(drho.hermiticity_defect() < 1e-10);
    }
}

#[test]
fn dissipator_alone_preserves_trace() {
    let space = FockSpace::new(&[5]).unwrap();
    let d = dissipator(&annihilator(&space, 0).unwrap(), 0.7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rho = random_density(d.basis(), &mut rng);
    assert!(d.apply(&rho).unwrap().trace().norm() < 1e-12);
}

#[test]
fn vacuum_is_steady_without_drive() {
    let p = SystemParams {
        eps_l: 0.0,
        ..generic_params()
    }
    .with_drives([0.0; 3]);
    let p = SystemParams { n_th: 0.0, ..p };
    let space = small_space();
    let l = liouvillian(&p, &space).unwrap();
    let vac = DensityMatrix::basis_state(l.basis(), 0);
    let r = l.apply(&vac).unwrap().frobenius_norm();
    assert!(r <= 1e-12, "residual {r:e}");
    let ss = steady_state(&l).unwrap();
    assert!((ss.get(0, 0).re - 1.0).abs() < 1e-10);
}

#[test]
fn driven_cavity_is_coherent() {
    let (delta, kappa, eps) = (0.3, 0.5, 0.2);
    let space = FockSpace::new(&[12, 1, 1]).unwrap();
    let p = cavity_only(delta, kappa, eps);
    let rho = steady_state(&liouvillian(&p, &space).unwrap()).unwrap();
    let n_exact = eps * eps / (delta * delta + kappa * kappa / 4.0);
    assert!((rho.occupation(MODE_L) - n_exact).abs() < 1e-10);
    assert!((output_current(&rho, &p, Cavity::L) - kappa * n_exact).abs() < 1e-10);
    // ⟨a⟩ = −iε/(iΔ + κ/2) for H = Δa†a + ε(a + a†).
    let alpha = C64::new(0.0, -eps) / C64::new(kappa / 2.0, delta);
    let mut psi = vec![C64::new(0.0, 0.0); 12];
    let mut coef = C64::new(libm::exp(-alpha.norm_sqr() / 2.0), 0.0);
    for (n, v) in psi.iter_mut().enumerate() {
        if n > 0 {
            coef = coef * alpha / sqrt(n as f64);
        }
        *v = coef;
    }
    let fidelity = rho.overlap(&psi);
    assert!(fidelity >= 1.0 - 1e-8, "fidelity {fidelity}");
    let g2 = g2_zero_delay(&rho, MODE_L).unwrap();
    assert!((g2 - 1.0).abs() < 1e-6);
    rho.check_physical().unwrap();
}

#[test]
fn mechanics_thermalizes() {
    let space = FockSpace::new(&[1, 1, 1, 40]).unwrap();
    let p = SystemParams {
        kappa_l: 1.0,
        kappa_c: 1.0,
        kappa_r: 1.0,
        gamma: 0.1,
        n_th: 0.6207,
        ..SystemParams::default()
    };
    let rho = steady_state(&liouvillian(&p, &space).unwrap()).unwrap();
    // Truncation error of the geometric distribution at 40 levels is ~1e−9.
    assert!((rho.occupation(MODE_B) - 0.6207).abs() < 1e-8);
    let g2 = g2_zero_delay(&rho, MODE_B).unwrap();
    assert!((g2 - 2.0).abs() < 1e-6);
}

#[test]
fn g2_of_fock_state_and_guard() {
    let space = FockSpace::new(&[4]).unwrap();
    let basis = Basis::full(&space);
    assert_eq!(g2_zero_delay(&DensityMatrix::basis_state(&basis, 1), 0), Some(0.0));
    assert_eq!(g2_zero_delay(&DensityMatrix::basis_state(&basis, 2), 0), Some(0.5));
    assert_eq!(g2_zero_delay(&DensityMatrix::basis_state(&basis, 0), 0), None);
}

#[test]
fn undamped_cavity_has_no_unique_steady_state() {
    let space = FockSpace::new(&[3, 1, 1]).unwrap();
    let p = SystemParams {
        delta_l: 0.2,
        ..SystemParams::default()
    };
    assert!(matches!(
        steady_state(&liouvillian(&p, &space).unwrap()),
        Err(Error::NonUniqueSteadyState)
    ));
}

#[test]
fn steady_residual_bound() {
    let l = liouvillian(&generic_params(), &small_space()).unwrap();
    let rho = steady_state(&l).unwrap();
    let r = l.apply(&rho).unwrap().frobenius_norm();
    assert!(r <= 1e-10 * l.frobenius_norm() * rho.frobenius_norm());
    rho.check_physical().unwrap();
}

#[test]
fn decay_under_rk4() {
    let kappa = 0.8;
    let space = FockSpace::new(&[2]).unwrap();
    let l = dissipator(&annihilator(&space, 0).unwrap(), kappa).unwrap();
    let rho0 = DensityMatrix::basis_state(l.basis(), 1);
    let dt = 1e-3 / kappa;
    let traj = evolve(&rho0, &l, 1.0 / kappa, dt).unwrap();
    for (t, rho) in traj.times.iter().zip(&traj.states).step_by(100) {
        assert!((rho.occupation(0) - libm::exp(-kappa * t)).abs() < 1e-6);
    }
}

#[test]
fn evolve_with_zero_generator_is_constant() {
    let space = FockSpace::new(&[3]).unwrap();
    let basis = Basis::full(&space);
    let l = SuperOperator::zero(&basis);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rho0 = random_density(&basis, &mut rng);
    let traj = evolve(&rho0, &l, 1.0, 0.1).unwrap();
    assert_eq!(traj.states.len(), 11);
    for rho in &traj.states {
        let diff: f64 = rho.data().iter().zip(rho0.data()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-14);
    }
}

#[test]
fn rk4_error_scales_with_fourth_power() {
    let (delta, kappa, eps) = (1.0, 0.5, 0.3);
    let space = FockSpace::new(&[6, 1, 1]).unwrap();
    let l = liouvillian(&cavity_only(delta, kappa, eps), &space).unwrap();
    let rho0 = DensityMatrix::basis_state(l.basis(), 0);
    let t = 2.0;
    let reference = evolve(&rho0, &l, t, 0.003125).unwrap().last().occupation(0);
    let err = |dt: f64| (evolve(&rho0, &l, t, dt).unwrap().last().occupation(0) - reference).abs();
    let ratio = err(0.05) / err(0.025);
    assert!((10.0..22.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn oversized_step_is_rejected() {
    let space = FockSpace::new(&[4]).unwrap();
    let l = dissipator(&annihilator(&space, 0).unwrap(), 50.0).unwrap();
    let rho0 = DensityMatrix::basis_state(l.basis(), 3);
    assert!(matches!(evolve(&rho0, &l, 1.0, 0.5), Err(Error::StepSize { .. })));
}

#[test]
fn capped_basis_matches_full_space_at_weak_drive() {
    let p = generic_params().with_drives([1e-4, 0.0, 0.0]);
    let space = FockSpace::new(&[4, 4, 4, 2]).unwrap();
    let full = steady_state(&liouvillian(&p, &space).unwrap()).unwrap();
    let capped = steady_state(&liouvillian_in(&p, &Basis::photon_capped(&space, 3)).unwrap()).unwrap();
    for m in [MODE_L, MODE_C, MODE_R] {
        let (a, b) = (full.occupation(m), capped.occupation(m));
        assert!((a - b).abs() <= 1e-6 * a, "mode {m}: {a:e} vs {b:e}");
    }
}

#[test]
fn sector_solve_matches_direct_solve() {
    for kind in [ModelKind::Full, ModelKind::Kerr] {
        let p = generic_params().with_drives([1e-4, 3e-5, 2e-5]);
        let dims: &[usize] = match kind {
            ModelKind::Full => &[3, 3, 3, 5],
            ModelKind::Kerr => &[3, 3, 3],
        };
        let space = FockSpace::new(dims).unwrap();
        let direct = steady_state(&liouvillian_in(&p, &Basis::photon_capped(&space, 3)).unwrap()).unwrap();
        let sector = weak_drive_steady_state(&p, &space).unwrap();
        for m in [MODE_L, MODE_C, MODE_R] {
            let (a, b) = (direct.occupation(m), sector.occupation(m));
            assert!((a - b).abs() <= 1e-5 * a, "{kind:?} mode {m}: {a:e} vs {b:e}");
            let (a, b) = (g2_zero_delay(&direct, m).unwrap(), g2_zero_delay(&sector, m).unwrap());
            assert!((a - b).abs() <= 1e-3 * a, "{kind:?} g2 mode {m}: {a} vs {b}");
        }
        assert!((sector.trace().re - 1.0).abs() < 1e-12);
    }
}

#[test]
fn kerr_steady_state_matches_analytic() {
    // Fig. 4(b) point near the antibunching dip.
    let mut p = SystemParams {
        g: 0.01,
        j_l: 0.1,
        j_r: 0.01,
        kappa_l: 0.013,
        kappa_c: 0.013,
        kappa_r: 0.013,
        ..SystemParams::default()
    };
    crate::model::DetuningRule {
        delta_lc: 0.0,
        delta_lr: 0.1,
    }
    .apply(&mut p, 0.02);
    let p = p.with_drives([1e-4, 0.0, 0.0]);
    let out = solve_steady(&p, ModelKind::Kerr, &Truncation::default(), SteadyMethod::Direct).unwrap();
    assert_eq!(out.dims, vec![4, 4, 4]);
    let numeric = g2_zero_delay(&out.rho, MODE_L).unwrap();
    let amps = steady_amplitudes_solve(&p).unwrap();
    let analytic = g2_analytic(&amps).full[0].unwrap();
    assert!((numeric - analytic).abs() <= 0.05 * analytic, "{numeric} vs {analytic}");
    let occ = occupations_analytic(&amps, &p);
    let n = out.rho.occupation(MODE_L);
    assert!((n - occ.full[0]).abs() <= 0.05 * n);
}

#[test]
fn convergence_is_immediate_without_coupling() {
    let p = cavity_only(0.1, 0.2, 1e-3);
    let base = Truncation {
        photon_dim: 3,
        phonon_dim: Some(2),
        max_photons: None,
    };
    let mut calls = 0;
    let report = convergence_harness(
        &p,
        base,
        |p, t| {
            calls += 1;
            let out = solve_steady(p, ModelKind::Full, t, SteadyMethod::WeakDrive)?;
            Ok(out.rho.occupation(MODE_L))
        },
        ConvergenceOptions::default(),
    )
    .unwrap();
    assert!(report.converged);
    assert_eq!(report.history.len(), 2);
    assert_eq!(calls, 2);
}

#[test]
fn number_expectation_matches_diagonal_moment() {
    let space = small_space();
    let l = liouvillian(&generic_params(), &space).unwrap();
    let rho = steady_state(&l).unwrap();
    for m in 0..4 {
        let e = rho.expect(&number(&space, m).unwrap()).unwrap();
        assert!((e.re - rho.occupation(m)).abs() < 1e-14);
        assert!(e.im.abs() < 1e-14);
    }
}
