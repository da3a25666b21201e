use alloc::vec::Vec;

use super::{DensityMatrix, SuperOperator};
use crate::math::round;
use crate::{invalid, Error, Result, C64};

/// Sampled time evolution, one state per step including `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

impl Trajectory {
    pub fn last(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory holds the initial state")
    }
}

const DRIFT_LIMIT: f64 = 1e-6;
/// A physical state has ‖ρ‖_F ≤ 1; growth past this marks an unstable step.
const NORM_LIMIT: f64 = 1e-3;

/// Integrates `dρ/dt = Lρ` with classical fourth-order Runge–Kutta.
///
/// Each step is checked before it is cleaned up: if the trace moves by more
/// than 1e−6 or the Frobenius norm exceeds 1 + 1e−3 the step size is too
/// large for `L` and [`Error::StepSize`] is returned. Accepted states are
/// symmetrized and renormalized.
pub fn evolve(rho0: &DensityMatrix, l: &SuperOperator, t_final: f64, dt: f64) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return invalid("evolve needs dt > 0 and t_final >= 0");
    }
    if rho0.basis() != l.basis() {
        return Err(Error::SpaceMismatch);
    }
    let steps = round(t_final / dt) as usize;
    let m = l.matrix();
    let n = rho0.data().len();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(rho0.clone());
    let mut x = rho0.data().to_vec();
    let mut k = [
        alloc::vec![C64::new(0.0, 0.0); n],
        alloc::vec![C64::new(0.0, 0.0); n],
        alloc::vec![C64::new(0.0, 0.0); n],
        alloc::vec![C64::new(0.0, 0.0); n],
    ];
    let mut tmp = alloc::vec![C64::new(0.0, 0.0); n];
    for step in 1..=steps {
        m.matvec_into(&x, &mut k[0]);
        for (stage, frac) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
            for i in 0..n {
                tmp[i] = x[i] + k[stage - 1][i] * (frac * dt);
            }
            m.matvec_into(&tmp, &mut k[stage]);
        }
        for i in 0..n {
            x[i] += (k[0][i] + k[1][i] * 2.0 + k[2][i] * 2.0 + k[3][i]) * (dt / 6.0);
        }
        let mut rho = DensityMatrix::from_data(l.basis(), x.clone())?;
        let drift = (rho.trace() - rho0.trace()).norm();
        let norm = rho.frobenius_norm();
        if !(drift <= DRIFT_LIMIT) || !(norm <= 1.0 + NORM_LIMIT) {
            return Err(Error::StepSize {
                drift: drift.max(norm - 1.0),
            });
        }
        rho.symmetrize();
        rho.normalize_trace();
        x.copy_from_slice(rho.data());
        times.push(step as f64 * dt);
        states.push(rho);
    }
    Ok(Trajectory { times, states })
}
