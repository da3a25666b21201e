//! Seeded property suites behind `omtrans validate`.

use omtrans_core::model::{NonlinearSign, SystemParams};
use omtrans_core::transport::{reciprocity_check, DEFAULT_EPS};
use omtrans_core::weakdrive::{
    g2_analytic, g2l_formula, steady_amplitudes_closed_form, steady_amplitudes_solve, Amplitudes,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub draws: usize,
    pub failures: usize,
    /// First failing draw, if any.
    pub example: Option<String>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

pub fn random_params(rng: &mut impl Rng) -> SystemParams {
    let mut u = |a: f64, b: f64| rng.gen_range(a..b);
    SystemParams {
        delta_l: u(-0.3, 0.3),
        delta_c: u(-0.3, 0.3),
        delta_r: u(-0.3, 0.3),
        g: u(0.0, 0.3),
        j_l: u(1e-3, 0.5),
        j_r: u(1e-3, 0.5),
        kappa_l: u(1e-3, 0.1),
        kappa_c: u(1e-3, 0.1),
        kappa_r: u(1e-3, 0.1),
        eps_l: u(1e-5, 1e-3),
        eps_c: u(0.0, 1e-3),
        eps_r: u(0.0, 1e-3),
        nonlinear_sign: if rng.gen_bool(0.5) {
            NonlinearSign::Polaron
        } else {
            NonlinearSign::Appendix
        },
        ..SystemParams::default()
    }
}

fn max_rel_diff(a: &Amplitudes, b: &Amplitudes) -> f64 {
    a.to_array()
        .iter()
        .zip(b.to_array().iter())
        .map(|(x, y)| (x - y).norm() / x.norm().max(y.norm()).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

fn suite(
    name: &'static str,
    draws: usize,
    rng: &mut ChaCha8Rng,
    mut check: impl FnMut(&SystemParams) -> Result<(), String>,
) -> SuiteResult {
    let mut failures = 0;
    let mut example = None;
    for _ in 0..draws {
        let p = random_params(rng);
        if let Err(msg) = check(&p) {
            failures += 1;
            example.get_or_insert_with(|| format!("{msg} at {p:?}"));
        }
    }
    SuiteResult {
        name,
        draws,
        failures,
        example,
    }
}

/// Dual-path, reciprocity, swap and δ → 0 suites.
pub fn run_suites(seed: u64) -> Vec<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    out.push(suite("dual-path closed form vs direct solve", 500, &mut rng, |p| {
        let a = steady_amplitudes_closed_form(p).map_err(|e| e.to_string())?;
        let b = steady_amplitudes_solve(p).map_err(|e| e.to_string())?;
        let d = max_rel_diff(&a, &b);
        if d <= 1e-10 {
            Ok(())
        } else {
            Err(format!("relative difference {d:e}"))
        }
    }));

    out.push(suite("reciprocity without centre drive", 500, &mut rng, |p| {
        let rep = reciprocity_check(p, DEFAULT_EPS).map_err(|e| e.to_string())?;
        let r = rep.r_occupation.unwrap_or(f64::NAN);
        if rep.holds(1e-9) && r.abs() <= 1e-12 {
            Ok(())
        } else {
            Err(format!("{rep:?}"))
        }
    }));

    out.push(suite("L/R swap covariance", 500, &mut rng, |p| {
        let a = steady_amplitudes_solve(p).map_err(|e| e.to_string())?;
        let b = steady_amplitudes_solve(&p.mirrored()).map_err(|e| e.to_string())?;
        let d = max_rel_diff(&a.mirrored(), &b);
        if d <= 1e-10 {
            Ok(())
        } else {
            Err(format!("relative difference {d:e}"))
        }
    }));

    out.push(suite("linear limit (delta -> 0)", 500, &mut rng, |p| {
        let mut lin = *p;
        lin.g = 0.0;
        let amps = steady_amplitudes_solve(&lin).map_err(|e| e.to_string())?;
        let g2 = g2_analytic(&amps);
        for v in g2.leading.iter().flatten() {
            if (v - 1.0).abs() > 1e-9 {
                return Err(format!("amplitude g2 {v}"));
            }
        }
        let mut sym = lin.with_drives([lin.eps_l, 0.0, 0.0]);
        sym.delta_r = sym.delta_l;
        sym.kappa_r = sym.kappa_l;
        let f = g2l_formula(&sym).map_err(|e| e.to_string())?;
        if (f - 1.0).abs() <= 1e-12 {
            Ok(())
        } else {
            Err(format!("formula g2 {f}"))
        }
    }));
    out
}
