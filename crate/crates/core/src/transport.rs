//! Drive scenarios, transport metrics and parameter sweeps.
//!
//! A study compares two drive scenarios, `+k` and `−k`. For the diode and the
//! single-photon source these are a left and a right drive; for the
//! capacitor a two-sided storage drive and a centre release drive.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::liouville::{
    convergence_harness, g2_zero_delay, output_current, solve_steady, ConvergenceOptions, ModelKind,
    SteadyMethod, Truncation,
};
use crate::model::{Cavity, DetuningRule, DriveScenario, SystemParams};
use crate::weakdrive::{g2_analytic, occupations_analytic, steady_amplitudes_solve, transmitted_occupation};
use crate::{invalid, Result};

/// How a steady state is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    /// Weak-drive amplitude equations of the Kerr model.
    Analytic,
    /// Master equation of the three-cavity Kerr model.
    EffectiveKerr,
    /// Master equation of the four-mode optomechanical model.
    FullMasterEquation,
}

impl Backend {
    pub const ALL: [Backend; 3] = [Backend::Analytic, Backend::EffectiveKerr, Backend::FullMasterEquation];

    pub fn name(self) -> &'static str {
        match self {
            Backend::Analytic => "analytic",
            Backend::EffectiveKerr => "effective-kerr",
            Backend::FullMasterEquation => "full-master-equation",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Backend::ALL.into_iter().find(|b| b.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Study {
    Diode,
    Source,
    Capacitor,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::Diode => "diode",
            Study::Source => "source",
            Study::Capacitor => "capacitor",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Study::Diode, Study::Source, Study::Capacitor]
            .into_iter()
            .find(|x| x.name() == s)
    }

    /// The `(+k, −k)` scenarios.
    pub fn scenarios(self) -> (DriveScenario, DriveScenario) {
        match self {
            Study::Diode | Study::Source => (DriveScenario::Left, DriveScenario::Right),
            Study::Capacitor => (DriveScenario::TwoSided, DriveScenario::CenterRelease),
        }
    }
}

/// Default reference drive amplitude.
pub const DEFAULT_EPS: f64 = 1e-4;

/// Drive amplitudes used by the scenarios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveConvention {
    pub eps: f64,
    /// Centre drive applied together with the left/right drive.
    pub eps_c0: f64,
}

impl DriveConvention {
    /// Diode: centre drive equal to ε. Source: no centre drive. The
    /// capacitor scenarios do not use `eps_c0`.
    pub fn for_study(study: Study, eps: f64) -> Self {
        let eps_c0 = match study {
            Study::Diode => eps,
            Study::Source | Study::Capacitor => 0.0,
        };
        DriveConvention { eps, eps_c0 }
    }

    pub fn amplitudes(&self, scenario: DriveScenario) -> [f64; 3] {
        scenario.amplitudes(self.eps, self.eps_c0)
    }
}

/// Backend plus the numerical settings of the master-equation backends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solver {
    pub backend: Backend,
    pub truncation: Truncation,
    pub method: SteadyMethod,
    /// Re-solve once at a refined truncation and flag the point when the
    /// currents move by more than `rtol`.
    pub audit: Option<f64>,
}

impl Solver {
    pub fn new(backend: Backend) -> Self {
        Solver {
            backend,
            truncation: Truncation::default(),
            method: SteadyMethod::Auto,
            audit: None,
        }
    }
}

/// Steady-state observables of one drive scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSolution {
    /// Output currents `(Q_L, Q_C, Q_R)`.
    pub currents: [f64; 3],
    pub occupations: [f64; 3],
    pub g2: [Option<f64>; 3],
    /// Fock dimensions used (empty for the analytic backend).
    pub dims: Vec<usize>,
}

fn solve_point(params: &SystemParams, truncation: &Truncation, solver: &Solver) -> Result<PointSolution> {
    let kind = match solver.backend {
        Backend::Analytic => {
            let amps = steady_amplitudes_solve(params)?;
            let occ = occupations_analytic(&amps, params);
            let g2 = g2_analytic(&amps);
            let kappas = params.kappas();
            return Ok(PointSolution {
                currents: [0, 1, 2].map(|i| kappas[i] * occ.full[i]),
                occupations: occ.full,
                g2: g2.leading,
                dims: Vec::new(),
            });
        }
        Backend::EffectiveKerr => ModelKind::Kerr,
        Backend::FullMasterEquation => ModelKind::Full,
    };
    let out = solve_steady(params, kind, truncation, solver.method)?;
    let rho = &out.rho;
    Ok(PointSolution {
        currents: Cavity::ALL.map(|c| output_current(rho, params, c)),
        occupations: Cavity::ALL.map(|c| rho.occupation(c.index())),
        g2: Cavity::ALL.map(|c| g2_zero_delay(rho, c.index())),
        dims: out.dims,
    })
}

/// Observables of `params` under `scenario`; the drives of `params` are
/// replaced by the scenario amplitudes.
pub fn scenario_point(
    params: &SystemParams,
    scenario: DriveScenario,
    convention: &DriveConvention,
    solver: &Solver,
) -> Result<PointSolution> {
    let p = params.with_drives(convention.amplitudes(scenario));
    solve_point(&p, &solver.truncation, solver)
}

/// Output currents `(Q_L, Q_C, Q_R)` under `scenario`.
pub fn scenario_currents(
    params: &SystemParams,
    scenario: DriveScenario,
    convention: &DriveConvention,
    solver: &Solver,
) -> Result<[f64; 3]> {
    Ok(scenario_point(params, scenario, convention, solver)?.currents)
}

/// Ratios with a denominator below `GUARD_FACTOR·ε²` are undefined.
pub const GUARD_FACTOR: f64 = 1e-20;

fn guarded_ratio(num: f64, den: f64, eps: f64) -> Option<f64> {
    if !(den >= GUARD_FACTOR * eps * eps) || den == 0.0 {
        return None;
    }
    Some(num / den)
}

/// `R = (Q_R[k] − Q_L[−k]) / (Q_R[k] + Q_L[−k])`.
pub fn rectifying_factor(q_r_fwd: f64, q_l_bwd: f64, eps: f64) -> Option<f64> {
    guarded_ratio(q_r_fwd - q_l_bwd, q_r_fwd + q_l_bwd, eps)
}

/// `(T_L, T_R)` from the currents under `+k` and `−k`, each as `[Q_L, Q_C, Q_R]`.
pub fn transport_efficiencies(fwd: [f64; 3], bwd: [f64; 3], eps: f64) -> (Option<f64>, Option<f64>) {
    let t_l = guarded_ratio(fwd[2], fwd[2] + fwd[0], eps);
    let t_r = guarded_ratio(bwd[0], bwd[2] + bwd[0], eps);
    (t_l, t_r)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StorageMetrics {
    pub s: Option<f64>,
    pub m_s: Option<f64>,
    pub m_r: Option<f64>,
}

/// Storage factor and storage/release efficiencies from the currents under
/// the storage drive (`+k`) and the release drive (`−k`).
pub fn storage_metrics(store: [f64; 3], release: [f64; 3], eps: f64) -> StorageMetrics {
    let [sl, sc, sr] = store;
    let [rl, rc, rr] = release;
    StorageMetrics {
        s: guarded_ratio(sc - rl - rr, sc + rl + rr, eps),
        m_s: guarded_ratio(sc, sc + sl + sr, eps),
        m_r: guarded_ratio(rl + rr, rc + rl + rr, eps),
    }
}

/// Left/right transmission compared through three routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReciprocityReport {
    /// `N_R` under the left drive, closed form.
    pub n_r_fwd: f64,
    /// `N_L` under the right drive, closed form on the mirrored chain.
    pub n_l_bwd: f64,
    /// The same two numbers as |C_R|², |C_L|² from the amplitude solve.
    pub n_r_fwd_solved: f64,
    pub n_l_bwd_solved: f64,
    /// Rectification of the occupations, `(N_R[k] − N_L[−k])/(N_R[k] + N_L[−k])`.
    pub r_occupation: Option<f64>,
    /// Rectification of the output currents. Equals `r_occupation` only when
    /// `κ_L = κ_R`.
    pub r_current: Option<f64>,
}

impl ReciprocityReport {
    pub fn holds(&self, tol: f64) -> bool {
        let rel = |a: f64, b: f64| (a - b).abs() <= tol * a.abs().max(b.abs());
        rel(self.n_r_fwd, self.n_l_bwd)
            && rel(self.n_r_fwd_solved, self.n_l_bwd_solved)
            && rel(self.n_r_fwd, self.n_r_fwd_solved)
            && self.r_occupation.is_some_and(|r| r.abs() <= tol)
    }
}

/// Checks that without a centre drive the chain transmits equally in both
/// directions.
pub fn reciprocity_check(params: &SystemParams, eps: f64) -> Result<ReciprocityReport> {
    if !(eps > 0.0) {
        return invalid("reciprocity check needs a positive drive");
    }
    let fwd = params.with_drives([eps, 0.0, 0.0]);
    let bwd = params.with_drives([0.0, 0.0, eps]);
    let n_fwd = occupations_analytic(&steady_amplitudes_solve(&fwd)?, &fwd).leading;
    let n_bwd = occupations_analytic(&steady_amplitudes_solve(&bwd)?, &bwd).leading;
    let n_r_fwd = transmitted_occupation(params, eps);
    let n_l_bwd = transmitted_occupation(&params.mirrored(), eps);
    Ok(ReciprocityReport {
        n_r_fwd,
        n_l_bwd,
        n_r_fwd_solved: n_fwd[2],
        n_l_bwd_solved: n_bwd[0],
        r_occupation: guarded_ratio(n_fwd[2] - n_bwd[0], n_fwd[2] + n_bwd[0], eps),
        r_current: rectifying_factor(params.kappa_r * n_fwd[2], params.kappa_l * n_bwd[0], eps),
    })
}

/// A detuning sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub params: SystemParams,
    pub rule: DetuningRule,
    pub grid: Vec<f64>,
    pub study: Study,
    pub convention: DriveConvention,
    pub solvers: Vec<Solver>,
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![start],
        _ => (0..n)
            .map(|i| start + (stop - start) * (i as f64) / ((n - 1) as f64))
            .collect(),
    }
}

/// One grid point on one backend. Metrics that are undefined (or not part of
/// the study) are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub delta: f64,
    pub backend: Backend,
    pub study: Study,
    /// Currents `[Q_L, Q_C, Q_R]` under `+k` and `−k`.
    pub q_fwd: [f64; 3],
    pub q_bwd: [f64; 3],
    /// Correlations and occupations under `+k`.
    pub g2: [Option<f64>; 3],
    pub n: [f64; 3],
    pub r: Option<f64>,
    pub t_l: Option<f64>,
    pub t_r: Option<f64>,
    pub s: Option<f64>,
    pub m_s: Option<f64>,
    pub m_r: Option<f64>,
    pub dims: Vec<usize>,
    /// `Some(false)` when the truncation audit saw the currents move.
    pub converged: Option<bool>,
    /// Set when the point failed; the numeric fields are then NaN/None.
    pub error: Option<String>,
}

impl SweepRecord {
    fn failed(delta: f64, backend: Backend, study: Study, err: String) -> Self {
        SweepRecord {
            delta,
            backend,
            study,
            q_fwd: [f64::NAN; 3],
            q_bwd: [f64::NAN; 3],
            g2: [None; 3],
            n: [f64::NAN; 3],
            r: None,
            t_l: None,
            t_r: None,
            s: None,
            m_s: None,
            m_r: None,
            dims: Vec::new(),
            converged: None,
            error: Some(err),
        }
    }
}

/// Parameters of `spec` at detuning `delta`.
pub fn params_at(spec: &SweepSpec, delta: f64) -> SystemParams {
    let mut p = spec.params;
    spec.rule.apply(&mut p, delta);
    p
}

/// Evaluates one grid point on one solver.
pub fn sweep_point(spec: &SweepSpec, delta: f64, solver: &Solver) -> SweepRecord {
    let p = params_at(spec, delta);
    let (plus, minus) = spec.study.scenarios();
    let conv = &spec.convention;
    let run = || -> Result<SweepRecord> {
        let fwd = scenario_point(&p, plus, conv, solver)?;
        let bwd = scenario_point(&p, minus, conv, solver)?;
        let eps = conv.eps;
        let mut rec = SweepRecord::failed(delta, solver.backend, spec.study, String::new());
        rec.error = None;
        rec.q_fwd = fwd.currents;
        rec.q_bwd = bwd.currents;
        rec.g2 = fwd.g2;
        rec.n = fwd.occupations;
        match spec.study {
            Study::Diode | Study::Source => {
                rec.r = rectifying_factor(fwd.currents[2], bwd.currents[0], eps);
                (rec.t_l, rec.t_r) = transport_efficiencies(fwd.currents, bwd.currents, eps);
            }
            Study::Capacitor => {
                let m = storage_metrics(fwd.currents, bwd.currents, eps);
                (rec.s, rec.m_s, rec.m_r) = (m.s, m.m_s, m.m_r);
            }
        }
        if let (Some(rtol), true) = (solver.audit, solver.backend != Backend::Analytic) {
            let fp = p.with_drives(conv.amplitudes(plus));
            let report = convergence_harness(
                &fp,
                solver.truncation,
                |q, t| Ok(solve_point(q, t, solver)?.currents.iter().sum()),
                ConvergenceOptions { rtol, max_steps: 1 },
            )?;
            rec.converged = Some(report.converged);
        }
        rec.dims = fwd.dims;
        Ok(rec)
    };
    run().unwrap_or_else(|e| SweepRecord::failed(delta, solver.backend, spec.study, e.to_string()))
}

/// Runs the sweep. Records are ordered by grid point, then by solver, and do
/// not depend on the number of threads.
pub fn run_sweep(spec: &SweepSpec) -> Vec<SweepRecord> {
    let tasks: Vec<(f64, &Solver)> = spec
        .grid
        .iter()
        .flat_map(|&d| spec.solvers.iter().map(move |s| (d, s)))
        .collect();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        tasks.par_iter().map(|(d, s)| sweep_point(spec, *d, s)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        tasks.iter().map(|(d, s)| sweep_point(spec, *d, s)).collect()
    }
}
