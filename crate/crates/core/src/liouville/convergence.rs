use alloc::vec::Vec;

use super::{default_phonon_dim, Truncation};
use crate::model::SystemParams;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceOptions {
    /// Relative change between successive truncations accepted as converged.
    pub rtol: f64,
    /// Refinements attempted after the base truncation.
    pub max_steps: usize,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        ConvergenceOptions {
            rtol: 1e-3,
            max_steps: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Value at the finest truncation evaluated.
    pub value: f64,
    pub truncation: Truncation,
    pub converged: bool,
    /// Every (truncation, value) pair evaluated, coarse to fine.
    pub history: Vec<(Truncation, f64)>,
}

/// Re-evaluates `observable` with the phonon dimension doubled and one more
/// photon level per cavity until two successive values agree to `rtol`.
pub fn convergence_harness<F>(
    params: &SystemParams,
    base: Truncation,
    mut observable: F,
    opts: ConvergenceOptions,
) -> Result<ConvergenceReport>
where
    F: FnMut(&SystemParams, &Truncation) -> Result<f64>,
{
    let mut t = base;
    let mut value = observable(params, &t)?;
    let mut history = alloc::vec![(t, value)];
    for _ in 0..opts.max_steps {
        let phonon = t.phonon_dim.unwrap_or_else(|| default_phonon_dim(params));
        let next = Truncation {
            photon_dim: t.photon_dim + 1,
            phonon_dim: Some(2 * phonon),
            max_photons: t.max_photons,
        };
        let v = observable(params, &next)?;
        history.push((next, v));
        let scale = v.abs().max(value.abs()).max(f64::MIN_POSITIVE);
        let done = (v - value).abs() <= opts.rtol * scale;
        t = next;
        value = v;
        if done {
            return Ok(ConvergenceReport {
                value,
                truncation: t,
                converged: true,
                history,
            });
        }
    }
    Ok(ConvergenceReport {
        value,
        truncation: t,
        converged: false,
        history,
    })
}
