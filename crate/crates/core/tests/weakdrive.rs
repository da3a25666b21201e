use omtrans_core::model::{Cavity, DetuningRule, NonlinearSign, SystemParams};
use omtrans_core::weakdrive::*;
use omtrans_core::C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_params(rng: &mut ChaCha8Rng) -> SystemParams {
    let kappa = rng.gen_range(0.01..1.0);
    let mut p = SystemParams {
        delta_l: rng.gen_range(-1.0..1.0),
        delta_c: rng.gen_range(-1.0..1.0),
        delta_r: rng.gen_range(-1.0..1.0),
        g: rng.gen_range(0.0..0.5),
        j_l: rng.gen_range(0.0..0.5),
        j_r: rng.gen_range(0.0..0.5),
        eps_l: rng.gen_range(0.0..1e-3),
        eps_c: rng.gen_range(0.0..1e-3),
        eps_r: rng.gen_range(0.0..1e-3),
        ..Default::default()
    };
    p.set_kappa(kappa);
    p
}

fn rel_err(a: C64, b: C64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

#[test]
fn closed_form_matches_direct_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for sign in [NonlinearSign::Appendix, NonlinearSign::Polaron] {
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let mut p = random_params(&mut rng);
            p.nonlinear_sign = sign;
            let direct = steady_amplitudes_solve(&p).unwrap();
            let closed = steady_amplitudes_closed_form(&p).unwrap();
            for (a, b) in direct.to_array().iter().zip(closed.to_array()) {
                worst = worst.max(rel_err(*a, b));
            }
        }
        assert!(worst < 1e-10, "{sign:?}: worst relative deviation {worst:e}");
    }
}

#[test]
fn compact_d2_is_not_the_two_photon_determinant() {
    // The compact two-photon denominator differs from the determinant-based
    // one by a parameter-dependent factor, so it cannot be used as printed.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ratios: Vec<C64> = (0..4)
        .map(|_| {
            let p = random_params(&mut rng);
            let a = AlphaSet::from_params(&p);
            d2_compact(&a, p.j_l, p.j_r) / d2(&a, p.j_l, p.j_r)
        })
        .collect();
    assert!(ratios.windows(2).any(|w| rel_err(w[0], w[1]) > 1e-3));
}

#[test]
fn alternate_d1_only_agrees_for_equal_alphas() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut p = random_params(&mut rng);
    let a = AlphaSet::from_params(&p);
    assert!(rel_err(d1(&a, p.j_l, p.j_r), d1_alternate(&a, p.j_l, p.j_r)) > 1e-6);
    p.delta_r = p.delta_l;
    let a = AlphaSet::from_params(&p);
    assert!(rel_err(d1(&a, p.j_l, p.j_r), d1_alternate(&a, p.j_l, p.j_r)) < 1e-14);
}

#[test]
fn decoupled_limits() {
    let mut p = SystemParams {
        delta_l: 0.3,
        delta_c: -0.2,
        delta_r: 0.1,
        eps_l: 1e-3,
        eps_c: 2e-3,
        ..Default::default()
    };
    p.set_kappa(0.1);
    let amps = steady_amplitudes_solve(&p).unwrap();
    let al = p.alphas()[0];
    assert!(rel_err(amps.c_l, -p.eps_l / al) < 1e-14);

    p.g = 0.2;
    let amps = steady_amplitudes_solve(&p).unwrap();
    let ac = p.alphas()[1];
    assert!(rel_err(amps.c_c, -p.eps_c / (ac + p.delta_kerr())) < 1e-14);
}

#[test]
fn printed_one_photon_left_amplitude() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut p = random_params(&mut rng);
    p.eps_c = 0.0;
    p.eps_r = 0.0;
    let a = AlphaSet::from_params(&p);
    let expected = (a.alpha_r * (a.alpha_c + a.delta) - p.j_r * p.j_r) * p.eps_l / d1(&a, p.j_l, p.j_r);
    let amps = steady_amplitudes_closed_form(&p).unwrap();
    assert!(rel_err(amps.c_l, expected) < 1e-14);
}

#[test]
fn amplitude_system_cc_row() {
    let p = SystemParams {
        delta_c: 0.1,
        g: 0.3,
        j_l: 0.2,
        j_r: 0.05,
        kappa_c: 0.02,
        ..Default::default()
    };
    let sys = amplitude_system(&p);
    let row = sys.matrix[idx::CC];
    let s2 = std::f64::consts::SQRT_2;
    assert!((row[idx::LC] - C64::new(s2 * 0.2, 0.0)).norm() < 1e-15);
    assert!((row[idx::CR] - C64::new(s2 * 0.05, 0.0)).norm() < 1e-15);
    let diag = p.alphas()[1] * 2.0 + 4.0 * 0.09;
    assert!((row[idx::CC] - diag).norm() < 1e-15);
}

#[test]
fn symmetric_chain_gives_equal_outer_pairs() {
    let mut p = SystemParams {
        delta_l: 0.2,
        delta_c: -0.1,
        delta_r: 0.2,
        g: 0.3,
        j_l: 0.15,
        j_r: 0.15,
        eps_l: 1e-4,
        eps_c: 3e-4,
        eps_r: 1e-4,
        ..Default::default()
    };
    p.set_kappa(0.05);
    let amps = steady_amplitudes_closed_form(&p).unwrap();
    assert!(rel_err(amps.c_ll, amps.c_rr) < 1e-13);
}

#[test]
fn singular_system_reports_condition() {
    let p = SystemParams {
        eps_l: 1e-3,
        ..Default::default()
    };
    match steady_amplitudes_solve(&p) {
        Err(omtrans_core::Error::ExceptionalPoint { condition }) => assert!(!(condition < 1e15)),
        other => panic!("expected exceptional point, got {other:?}"),
    }
    assert!(matches!(
        steady_amplitudes_closed_form(&p),
        Err(omtrans_core::Error::Pole(_))
    ));
}

#[test]
fn g2l_formula_matches_amplitudes() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let mut p = random_params(&mut rng);
        p.delta_r = p.delta_l;
        p.eps_c = 0.0;
        p.eps_r = 0.0;
        p.eps_l = 1e-4;
        let f = g2l_formula(&p).unwrap();
        let g = g2_analytic(&steady_amplitudes_solve(&p).unwrap()).leading[0].unwrap();
        worst = worst.max((f - g).abs() / g.abs().max(1e-300));
    }
    assert!(worst < 1e-8, "worst {worst:e}");
}

#[test]
fn g2l_formula_domain_and_linear_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let mut p = random_params(&mut rng);
        p.delta_r = p.delta_l;
        p.eps_c = 0.0;
        p.eps_r = 0.0;
        p.g = 0.0;
        assert!((g2l_formula(&p).unwrap() - 1.0).abs() < 1e-12);
    }
    let mut p = random_params(&mut rng);
    assert!(matches!(g2l_formula(&p), Err(omtrans_core::Error::FormulaDomain(_))));
    p.delta_r = p.delta_l;
    assert!(matches!(g2l_formula(&p), Err(omtrans_core::Error::FormulaDomain(_))));
}

#[test]
fn transmitted_occupation_matches_amplitudes() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let p = random_params(&mut rng);
        let eps = 1e-4;
        let fwd = p.with_drives([eps, 0.0, 0.0]);
        let bwd = p.with_drives([0.0, 0.0, eps]);
        let n_r = steady_amplitudes_solve(&fwd).unwrap().c_r.norm_sqr();
        let n_l = steady_amplitudes_solve(&bwd).unwrap().c_l.norm_sqr();
        let eq = transmitted_occupation(&p, eps);
        assert!((n_r - eq).abs() <= 1e-12 * eq);
        assert!((n_l - eq).abs() <= 1e-12 * eq);
        let occ = occupations_analytic(&steady_amplitudes_solve(&fwd).unwrap(), &fwd);
        assert_eq!(occ.leading[2], n_r);
    }
}

#[test]
fn occupations_vanish_without_drive() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p = random_params(&mut rng).with_drives([0.0; 3]);
    let occ = occupations_analytic(&steady_amplitudes_solve(&p).unwrap(), &p);
    assert_eq!(occ.leading, [0.0; 3]);
    assert_eq!(occ.full, [0.0; 3]);
    assert_eq!(occ.n0, 0.0);
}

fn fig4b(delta: f64) -> SystemParams {
    let mut p = SystemParams {
        g: 0.01,
        j_l: 0.1,
        j_r: 0.01,
        eps_l: 1e-4,
        ..Default::default()
    };
    p.set_kappa(0.013);
    DetuningRule { delta_lc: 0.0, delta_lr: 0.1 }.apply(&mut p, delta);
    p
}

#[test]
fn fig4b_has_strong_antibunching_dip() {
    let best = (0..=2000)
        .map(|i| -0.05 + 0.1 * i as f64 / 2000.0)
        .filter_map(|d| g2_analytic(&steady_amplitudes_solve(&fig4b(d)).unwrap()).leading[0])
        .fold(f64::INFINITY, f64::min);
    assert!(best < 1e-2, "min g2_L = {best}");
}

#[test]
fn upb_roots_in_fig4b_box() {
    let p = fig4b(0.0);
    let search = UpbSearch::new((0.002, 0.03), (-0.05, 0.05), DetuningRule { delta_lc: 0.0, delta_lr: 0.1 });
    let roots = upb_roots(&p, &search);
    assert!(!roots.is_empty());
    for r in &roots {
        let mut q = p;
        q.g = r.g;
        search.rule.apply(&mut q, r.delta);
        let g2 = g2_analytic(&steady_amplitudes_solve(&q).unwrap()).leading[0].unwrap();
        assert!(g2 < 1e-4, "root {r:?} has g2 {g2}");
    }
}

#[test]
fn upb_roots_absent_without_nonlinearity() {
    let p = fig4b(0.0);
    let search = UpbSearch::new((0.0, 0.0), (-0.05, 0.05), DetuningRule { delta_lc: 0.0, delta_lr: 0.1 });
    assert!(upb_roots(&p, &search).is_empty());
}

fn arb_params() -> impl Strategy<Value = SystemParams> {
    (
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64),
        (0.0..0.5f64, 0.0..0.5f64, 0.0..0.5f64),
        (0.01..1.0f64, 0.01..1.0f64, 0.01..1.0f64),
        (1e-6..1e-3f64, 1e-6..1e-3f64, 1e-6..1e-3f64),
    )
        .prop_map(|(d, c, k, e)| SystemParams {
            delta_l: d.0,
            delta_c: d.1,
            delta_r: d.2,
            g: c.0,
            j_l: c.1,
            j_r: c.2,
            kappa_l: k.0,
            kappa_c: k.1,
            kappa_r: k.2,
            eps_l: e.0,
            eps_c: e.1,
            eps_r: e.2,
            ..Default::default()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn swap_covariance(p in arb_params()) {
        let a = steady_amplitudes_solve(&p).unwrap();
        let b = steady_amplitudes_solve(&p.mirrored()).unwrap().mirrored();
        for (x, y) in a.to_array().iter().zip(b.to_array()) {
            prop_assert!(rel_err(*x, y) < 1e-10);
        }
        let ga = g2_analytic(&a);
        let gb = g2_analytic(&steady_amplitudes_solve(&p.mirrored()).unwrap());
        for cav in Cavity::ALL {
            let (x, y) = (ga.get(cav).unwrap(), gb.get(cav.mirror()).unwrap());
            prop_assert!((x - y).abs() <= 1e-9 * x.max(y));
        }
    }

    #[test]
    fn linear_limit_is_coherent(mut p in arb_params()) {
        p.g = 0.0;
        let g = g2_analytic(&steady_amplitudes_solve(&p).unwrap());
        for v in g.leading {
            prop_assert!((v.unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn perturbative_scaling(p in arb_params()) {
        let a = steady_amplitudes_solve(&p).unwrap().to_array();
        let d = p.drives();
        let b = steady_amplitudes_solve(&p.with_drives(d.map(|e| 2.0 * e))).unwrap().to_array();
        for k in 0..3 {
            prop_assert!(rel_err(b[k], a[k] * 2.0) < 1e-12);
        }
        for k in 3..9 {
            prop_assert!(rel_err(b[k], a[k] * 4.0) < 1e-12);
        }
    }

    #[test]
    fn reciprocity_without_centre_drive(p in arb_params()) {
        let fwd = steady_amplitudes_solve(&p.with_drives([1e-4, 0.0, 0.0])).unwrap();
        let bwd = steady_amplitudes_solve(&p.with_drives([0.0, 0.0, 1e-4])).unwrap();
        let (nr, nl) = (fwd.c_r.norm_sqr(), bwd.c_l.norm_sqr());
        prop_assert!((nr - nl).abs() <= 1e-12 * nr.max(nl));
    }
}
