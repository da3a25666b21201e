use omtrans_core::liouville::{SteadyMethod, Truncation};
use omtrans_core::model::{DetuningRule, DriveScenario, NonlinearSign, SystemParams};
use omtrans_core::transport::*;
use proptest::prelude::*;

fn uniform(g: f64, j_l: f64, j_r: f64, kappa: f64) -> SystemParams {
    let mut p = SystemParams {
        g,
        j_l,
        j_r,
        ..SystemParams::default()
    };
    p.set_kappa(kappa);
    p
}

fn at(mut p: SystemParams, rule: DetuningRule, delta: f64) -> SystemParams {
    rule.apply(&mut p, delta);
    p
}

fn diode() -> DriveConvention {
    DriveConvention::for_study(Study::Diode, DEFAULT_EPS)
}

#[test]
fn undriven_chain_carries_no_current() {
    let p = uniform(0.01, 0.02, 0.03, 0.01);
    let conv = DriveConvention { eps: 0.0, eps_c0: 0.0 };
    for backend in [Backend::Analytic, Backend::EffectiveKerr] {
        let q = scenario_currents(&p, DriveScenario::Left, &conv, &Solver::new(backend)).unwrap();
        assert_eq!(q, [0.0; 3]);
    }
}

#[test]
fn disconnected_output_is_dark() {
    let p = uniform(0.01, 0.02, 0.0, 0.01);
    for backend in [Backend::Analytic, Backend::EffectiveKerr] {
        let q = scenario_currents(&p, DriveScenario::Left, &diode(), &Solver::new(backend)).unwrap();
        assert!(q[2].abs() < 1e-25, "{backend:?}: {q:?}");
        assert!(q[0] > 0.0);
        let fwd = q;
        let (t_l, _) = transport_efficiencies(fwd, fwd, DEFAULT_EPS);
        assert!(t_l.unwrap().abs() < 1e-12);
    }
}

#[test]
fn rectifying_factor_limits() {
    assert_eq!(rectifying_factor(2.0, 2.0, 1.0), Some(0.0));
    assert_eq!(rectifying_factor(2.0, 0.0, 1.0), Some(1.0));
    assert_eq!(rectifying_factor(0.0, 3.0, 1.0), Some(-1.0));
    assert_eq!(rectifying_factor(0.0, 0.0, 1.0), None);
    assert_eq!(rectifying_factor(1e-31, 1e-31, 1e-4), None);
}

#[test]
fn storage_limits_and_duality() {
    let m = storage_metrics([0.0, 1.0, 0.0], [0.0, 0.5, 0.0], 1.0);
    assert_eq!(m.s, Some(1.0));
    assert_eq!(m.m_s, Some(1.0));
    assert_eq!(m.m_r, Some(0.0));
    let m = storage_metrics([0.2, 0.0, 0.3], [0.4, 0.0, 0.4], 1.0);
    assert_eq!(m.s, Some(-1.0));
    assert_eq!(m.m_r, Some(1.0));
    let (x, y) = (0.7, 0.2);
    let a = storage_metrics([0.1, x, 0.1], [y / 2.0, 0.3, y / 2.0], 1.0).s.unwrap();
    let b = storage_metrics([0.1, y, 0.1], [x / 2.0, 0.3, x / 2.0], 1.0).s.unwrap();
    assert!((a + b).abs() < 1e-15);
    assert_eq!(storage_metrics([0.0; 3], [0.0; 3], 1.0), StorageMetrics::default());
}

#[test]
fn symmetric_linear_chain_transmits_equally() {
    let p = at(uniform(0.0, 0.02, 0.02, 0.01), DetuningRule::default(), 0.005);
    let conv = DriveConvention::for_study(Study::Source, DEFAULT_EPS);
    let s = Solver::new(Backend::Analytic);
    let fwd = scenario_currents(&p, DriveScenario::Left, &conv, &s).unwrap();
    let bwd = scenario_currents(&p, DriveScenario::Right, &conv, &s).unwrap();
    let (t_l, t_r) = transport_efficiencies(fwd, bwd, DEFAULT_EPS);
    assert!((t_l.unwrap() - t_r.unwrap()).abs() < 1e-12);
}

#[test]
fn mirror_negates_rectification() {
    let rule = DetuningRule {
        delta_lc: 0.0,
        delta_lr: 0.02,
    };
    let p = at(uniform(5e-3, 5e-3, 7e-3, 1e-3), rule, -0.015);
    let s = Solver::new(Backend::Analytic);
    let eval = |p: &SystemParams| {
        let fwd = scenario_currents(p, DriveScenario::Left, &diode(), &s).unwrap();
        let bwd = scenario_currents(p, DriveScenario::Right, &diode(), &s).unwrap();
        let r = rectifying_factor(fwd[2], bwd[0], DEFAULT_EPS).unwrap();
        let (t_l, t_r) = transport_efficiencies(fwd, bwd, DEFAULT_EPS);
        (r, t_l.unwrap(), t_r.unwrap())
    };
    let (r, t_l, t_r) = eval(&p);
    let (rm, t_lm, t_rm) = eval(&p.mirrored());
    assert!(r.abs() > 0.1, "R = {r}");
    assert!((r + rm).abs() < 1e-9);
    assert!((t_l - t_rm).abs() < 1e-9 && (t_r - t_lm).abs() < 1e-9);
}

#[test]
fn fig5_rectifies_to_the_right() {
    let rule = DetuningRule {
        delta_lc: 0.0,
        delta_lr: 0.02,
    };
    let p = at(uniform(5e-3, 5e-3, 5e-3, 1e-3), rule, -0.02);
    let s = Solver::new(Backend::Analytic);
    let fwd = scenario_currents(&p, DriveScenario::Left, &diode(), &s).unwrap();
    let bwd = scenario_currents(&p, DriveScenario::Right, &diode(), &s).unwrap();
    let r = rectifying_factor(fwd[2], bwd[0], DEFAULT_EPS).unwrap();
    assert!(r > 0.9, "R = {r}");
}

fn fig7() -> (SystemParams, DetuningRule) {
    let mut p = uniform(0.2, 0.1, 0.1, 0.02);
    p.nonlinear_sign = NonlinearSign::Polaron;
    (
        p,
        DetuningRule {
            delta_lc: -1.0,
            delta_lr: 0.0,
        },
    )
}

#[test]
fn fig7_source_splits_evenly() {
    let (p, rule) = fig7();
    let conv = DriveConvention::for_study(Study::Source, DEFAULT_EPS);
    let s = Solver::new(Backend::Analytic);
    let p = at(p, rule, 1.049);
    let fwd = scenario_currents(&p, DriveScenario::Left, &conv, &s).unwrap();
    let bwd = scenario_currents(&p, DriveScenario::Right, &conv, &s).unwrap();
    let (t_l, t_r) = transport_efficiencies(fwd, bwd, DEFAULT_EPS);
    assert!((t_l.unwrap() - 0.5).abs() <= 0.05, "{t_l:?}");
    assert!((t_r.unwrap() - 0.5).abs() <= 0.05, "{t_r:?}");
    let q_split = fwd[2] / (fwd[2] + fwd[0]);
    assert!((q_split - 0.5).abs() <= 0.05);
}

#[test]
fn kerr_master_equation_is_reciprocal() {
    let p = at(
        uniform(0.02, 0.03, 0.01, 0.02),
        DetuningRule {
            delta_lc: 0.01,
            delta_lr: -0.02,
        },
        0.004,
    );
    let conv = DriveConvention::for_study(Study::Source, DEFAULT_EPS);
    let s = Solver::new(Backend::EffectiveKerr);
    let fwd = scenario_currents(&p, DriveScenario::Left, &conv, &s).unwrap();
    let bwd = scenario_currents(&p, DriveScenario::Right, &conv, &s).unwrap();
    let r = rectifying_factor(fwd[2], bwd[0], DEFAULT_EPS).unwrap();
    assert!(r.abs() <= 1e-3, "R = {r}");
}

#[test]
fn empty_grid_gives_no_records() {
    let spec = SweepSpec {
        params: uniform(0.01, 0.01, 0.01, 0.01),
        rule: DetuningRule::default(),
        grid: vec![],
        study: Study::Diode,
        convention: diode(),
        solvers: vec![Solver::new(Backend::Analytic)],
    };
    assert!(run_sweep(&spec).is_empty());
}

#[test]
fn sweep_is_ordered_and_in_range() {
    let spec = SweepSpec {
        params: uniform(5e-3, 5e-3, 5e-3, 1e-3),
        rule: DetuningRule {
            delta_lc: 0.0,
            delta_lr: 0.02,
        },
        grid: linspace(-0.05, 0.05, 9),
        study: Study::Diode,
        convention: diode(),
        solvers: vec![Solver::new(Backend::Analytic), Solver::new(Backend::EffectiveKerr)],
    };
    let a = run_sweep(&spec);
    assert_eq!(a.len(), 18);
    for (i, rec) in a.iter().enumerate() {
        assert_eq!(rec.delta, spec.grid[i / 2]);
        assert_eq!(rec.backend, spec.solvers[i % 2].backend);
        assert!(rec.error.is_none(), "{:?}", rec.error);
        let r = rec.r.unwrap();
        assert!((-1.0..=1.0).contains(&r));
        for t in [rec.t_l, rec.t_r] {
            assert!((0.0..=1.0).contains(&t.unwrap()));
        }
        assert!(rec.s.is_none());
    }
    assert_eq!(a, run_sweep(&spec));
}

#[test]
fn capacitor_metrics_are_in_range() {
    let spec = SweepSpec {
        params: uniform(5e-3, 5e-3, 5e-3, 1e-3),
        rule: DetuningRule {
            delta_lc: -0.02,
            delta_lr: 0.0,
        },
        grid: linspace(-0.05, 0.05, 21),
        study: Study::Capacitor,
        convention: DriveConvention::for_study(Study::Capacitor, DEFAULT_EPS),
        solvers: vec![Solver::new(Backend::Analytic)],
    };
    for rec in run_sweep(&spec) {
        assert!((-1.0..=1.0).contains(&rec.s.unwrap()));
        assert!((0.0..=1.0).contains(&rec.m_s.unwrap()));
        assert!((0.0..=1.0).contains(&rec.m_r.unwrap()));
        assert!(rec.r.is_none());
    }
}

#[test]
fn analytic_and_kerr_agree_on_fig4b_grid() {
    let spec = SweepSpec {
        params: uniform(0.01, 0.1, 0.01, 0.013),
        rule: DetuningRule {
            delta_lc: 0.0,
            delta_lr: 0.1,
        },
        grid: linspace(-0.1, 0.1, 11),
        study: Study::Source,
        convention: DriveConvention::for_study(Study::Source, DEFAULT_EPS),
        solvers: vec![Solver::new(Backend::Analytic), Solver::new(Backend::EffectiveKerr)],
    };
    let recs = run_sweep(&spec);
    for pair in recs.chunks(2) {
        let (a, k) = (pair[0].g2[0].unwrap(), pair[1].g2[0].unwrap());
        assert!((a - k).abs() <= 0.05 * a, "Δ = {}: {a} vs {k}", pair[0].delta);
    }
}

#[test]
fn full_model_point_with_audit() {
    let mut p = at(uniform(0.05, 0.05, 0.05, 0.02), DetuningRule::default(), 0.0);
    p.gamma = 1e-3;
    p.n_th = 0.2;
    let mut s = Solver::new(Backend::FullMasterEquation);
    s.truncation = Truncation {
        photon_dim: 3,
        phonon_dim: Some(6),
        max_photons: None,
    };
    s.method = SteadyMethod::WeakDrive;
    s.audit = Some(1e-2);
    let spec = SweepSpec {
        params: p,
        rule: DetuningRule::default(),
        grid: vec![0.0],
        study: Study::Source,
        convention: DriveConvention::for_study(Study::Source, DEFAULT_EPS),
        solvers: vec![s],
    };
    let rec = &run_sweep(&spec)[0];
    assert!(rec.error.is_none(), "{:?}", rec.error);
    assert_eq!(rec.dims, vec![3, 3, 3, 6]);
    assert_eq!(rec.converged, Some(true));
}

#[test]
fn failing_point_is_recorded() {
    // No loss and no detuning: the amplitude system is singular.
    let spec = SweepSpec {
        params: uniform(0.0, 0.0, 0.0, 0.0),
        rule: DetuningRule::default(),
        grid: vec![0.0],
        study: Study::Diode,
        convention: diode(),
        solvers: vec![Solver::new(Backend::Analytic)],
    };
    let rec = &run_sweep(&spec)[0];
    assert!(rec.error.is_some());
    assert!(rec.r.is_none());
}

fn draw() -> impl Strategy<Value = SystemParams> {
    (
        prop::array::uniform3(-0.1f64..0.1),
        (0.0f64..0.1, 0.001f64..0.1, 0.001f64..0.1),
        prop::array::uniform3(0.001f64..0.05),
        any::<bool>(),
    )
        .prop_map(|(d, (g, j_l, j_r), k, polaron)| SystemParams {
            delta_l: d[0],
            delta_c: d[1],
            delta_r: d[2],
            g,
            j_l,
            j_r,
            kappa_l: k[0],
            kappa_c: k[1],
            kappa_r: k[2],
            nonlinear_sign: if polaron {
                NonlinearSign::Polaron
            } else {
                NonlinearSign::Appendix
            },
            ..SystemParams::default()
        })
}

proptest! {
    #[test]
    fn reciprocity_without_centre_drive(p in draw()) {
        let rep = reciprocity_check(&p, DEFAULT_EPS).unwrap();
        prop_assert!(rep.holds(1e-9), "{rep:?}");
        prop_assert!(rep.r_occupation.unwrap().abs() <= 1e-12);
        let mut q = p;
        q.kappa_r = q.kappa_l;
        let rep = reciprocity_check(&q, DEFAULT_EPS).unwrap();
        prop_assert!(rep.r_current.unwrap().abs() <= 1e-12);
    }
}
