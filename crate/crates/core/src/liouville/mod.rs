//! Lindblad dynamics on vectorized density matrices.
//!
//! `vec(ρ)` is row-major: entry `(r, c)` of a `D×D` matrix sits at `r·D + c`,
//! so `vec(AρB) = (A ⊗ Bᵀ) vec(ρ)`.
//!
//! Superoperators can live on a subspace of the Fock space (a [`Basis`]) that
//! keeps only states with a bounded total photon number. Under weak driving
//! the states above two photons carry negligible weight, and dropping them
//! keeps the full four-mode problem at desk scale.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::fock::{annihilator, FockSpace, Operator};
use crate::math::{ceil, sqrt};
use crate::model::{build_h_eff, build_h_system, Cavity, SystemParams, MODE_B};
use crate::sparse::CsrMatrix;
use crate::{invalid, Error, Result, C64};

mod convergence;
mod evolve;
mod sectors;
mod steady;

pub use convergence::{convergence_harness, ConvergenceOptions, ConvergenceReport};
pub use evolve::{evolve, Trajectory};
pub use sectors::weak_drive_steady_state;
pub use steady::steady_state;

/// A list of Fock basis states spanning the working subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    space: FockSpace,
    states: Vec<usize>,
    photons: Vec<u32>,
    position: Vec<usize>,
}

/// Number of leading modes that are photonic (the fourth mode, if present,
/// is the mechanics).
fn photon_modes(space: &FockSpace) -> usize {
    space.num_modes().min(3)
}

impl Basis {
    /// Every state of `space`.
    pub fn full(space: &FockSpace) -> Self {
        Self::build(space, None)
    }

    /// States with at most `max_photons` photons in total.
    pub fn photon_capped(space: &FockSpace, max_photons: usize) -> Self {
        Self::build(space, Some(max_photons))
    }

    fn build(space: &FockSpace, cap: Option<usize>) -> Self {
        let pm = photon_modes(space);
        let mut states = Vec::new();
        let mut photons = Vec::new();
        let mut position = vec![usize::MAX; space.total_dim()];
        for i in 0..space.total_dim() {
            let n: usize = (0..pm).map(|m| space.mode_occupation(i, m)).sum();
            if cap.is_some_and(|c| n > c) {
                continue;
            }
            position[i] = states.len();
            states.push(i);
            photons.push(n as u32);
        }
        Basis {
            space: space.clone(),
            states,
            photons,
            position,
        }
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    /// Fock-space index of basis state `i`.
    pub fn state(&self, i: usize) -> usize {
        self.states[i]
    }

    /// Total photon number of basis state `i`.
    pub fn photons(&self, i: usize) -> u32 {
        self.photons[i]
    }

    pub fn position(&self, fock_index: usize) -> Option<usize> {
        let p = self.position[fock_index];
        (p != usize::MAX).then_some(p)
    }

    pub fn is_full(&self) -> bool {
        self.states.len() == self.space.total_dim()
    }

    /// Matrix of `op` restricted to the basis.
    pub fn restrict(&self, op: &Operator) -> Result<CsrMatrix> {
        if op.space() != &self.space {
            return Err(Error::SpaceMismatch);
        }
        if self.is_full() {
            return Ok(op.matrix().clone());
        }
        Ok(op.matrix().submatrix(&self.states, &self.states))
    }

    /// Occupation of `mode` in basis state `i`.
    pub fn occupation(&self, i: usize, mode: usize) -> usize {
        self.space.mode_occupation(self.states[i], mode)
    }
}

/// Sparse superoperator acting on `vec(ρ)` over a [`Basis`].
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator {
    basis: Basis,
    matrix: CsrMatrix,
    /// Typical ratio between successive photon-number sectors of the steady
    /// state; used to balance the steady-state linear system.
    drive_scale: f64,
}

impl SuperOperator {
    pub fn from_matrix(basis: &Basis, matrix: CsrMatrix) -> Result<Self> {
        let n = basis.dim() * basis.dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return invalid(format!("superoperator must be {n}x{n}"));
        }
        Ok(SuperOperator {
            basis: basis.clone(),
            matrix,
            drive_scale: 1.0,
        })
    }

    pub fn zero(basis: &Basis) -> Self {
        let n = basis.dim() * basis.dim();
        SuperOperator {
            basis: basis.clone(),
            matrix: CsrMatrix::zeros(n, n),
            drive_scale: 1.0,
        }
    }

    /// `−i[H, ·]`.
    pub fn hamiltonian(h: &Operator, basis: &Basis) -> Result<Self> {
        let h = basis.restrict(h)?;
        let d = basis.dim();
        let mi = C64::new(0.0, -1.0);
        let mut t = Vec::with_capacity(2 * h.nnz() * d);
        for (r, c, v) in h.triplets() {
            for k in 0..d {
                t.push((r * d + k, c * d + k, mi * v));
                t.push((k * d + c, k * d + r, -mi * v));
            }
        }
        Ok(SuperOperator {
            basis: basis.clone(),
            matrix: CsrMatrix::from_triplets(d * d, d * d, t),
            drive_scale: 1.0,
        })
    }

    /// `(rate/2)·D[op]` with `D[o]ρ = 2oρo† − o†oρ − ρo†o`.
    pub fn lindblad(op: &Operator, rate: f64, basis: &Basis) -> Result<Self> {
        if !(rate >= 0.0) {
            return invalid(format!("dissipation rate must be non-negative, got {rate}"));
        }
        let d = basis.dim();
        if rate == 0.0 {
            return Ok(Self::zero(basis));
        }
        let c = basis.restrict(op)?;
        let cdc = basis.restrict(&op.adjoint().multiply(op)?)?;
        let half = 0.5 * rate;
        let mut t = Vec::with_capacity(c.nnz() * c.nnz() + 2 * cdc.nnz() * d);
        for (i, j, v) in c.triplets() {
            for (p, q, w) in c.triplets() {
                t.push((i * d + p, j * d + q, v * w.conj() * rate));
            }
        }
        for (i, j, v) in cdc.triplets() {
            for k in 0..d {
                t.push((i * d + k, j * d + k, -v * half));
                t.push((k * d + j, k * d + i, -v * half));
            }
        }
        Ok(SuperOperator {
            basis: basis.clone(),
            matrix: CsrMatrix::from_triplets(d * d, d * d, t),
            drive_scale: 1.0,
        })
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn drive_scale(&self) -> f64 {
        self.drive_scale
    }

    pub fn with_drive_scale(mut self, s: f64) -> Self {
        self.drive_scale = s;
        self
    }

    pub fn add(&self, other: &SuperOperator) -> Result<Self> {
        if self.basis != other.basis {
            return Err(Error::SpaceMismatch);
        }
        let n = self.dim();
        let one = C64::new(1.0, 0.0);
        Ok(SuperOperator {
            basis: self.basis.clone(),
            matrix: CsrMatrix::linear_combination((n, n), &[(&self.matrix, one), (&other.matrix, one)]),
            drive_scale: self.drive_scale.min(other.drive_scale),
        })
    }

    /// `dρ/dt` for the state `rho`.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.basis != self.basis {
            return Err(Error::SpaceMismatch);
        }
        Ok(DensityMatrix {
            basis: self.basis.clone(),
            data: self.matrix.matvec(&rho.data),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.frobenius_norm()
    }
}

/// `(rate/2)·D[op]` on the full space of `op`.
pub fn dissipator(op: &Operator, rate: f64) -> Result<SuperOperator> {
    SuperOperator::lindblad(op, rate, &Basis::full(op.space()))
}

/// Which Hamiltonian a Liouvillian is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Four modes (L, C, R, b) with the optomechanical coupling.
    Full,
    /// Three cavities with the mechanics replaced by a Kerr term.
    Kerr,
}

impl ModelKind {
    pub fn of_space(space: &FockSpace) -> Result<Self> {
        match space.num_modes() {
            4 => Ok(ModelKind::Full),
            3 => Ok(ModelKind::Kerr),
            n => invalid(format!("Liouvillian needs 3 or 4 modes, got {n}")),
        }
    }
}

pub(crate) fn hamiltonian_for(params: &SystemParams, space: &FockSpace) -> Result<Operator> {
    match ModelKind::of_space(space)? {
        ModelKind::Full => build_h_system(params, space),
        ModelKind::Kerr => build_h_eff(params).hamiltonian(params, space),
    }
}

/// Ratio ε/κ used to balance photon-number sectors in the steady-state
/// solve; 1 when undriven or strongly driven.
pub(crate) fn drive_scale(params: &SystemParams) -> f64 {
    let eps = params.drives().iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let kappa = params
        .kappas()
        .iter()
        .copied()
        .filter(|k| *k > 0.0)
        .fold(f64::INFINITY, f64::min);
    if eps == 0.0 || !kappa.is_finite() {
        return 1.0;
    }
    (eps / (0.5 * kappa)).clamp(1e-12, 1.0)
}

/// Liouvillian of the master equation on the full Fock space: 4 modes for the
/// optomechanical model, 3 modes for the effective Kerr model.
pub fn liouvillian(params: &SystemParams, space: &FockSpace) -> Result<SuperOperator> {
    liouvillian_in(params, &Basis::full(space))
}

/// Liouvillian restricted to `basis`.
pub fn liouvillian_in(params: &SystemParams, basis: &Basis) -> Result<SuperOperator> {
    params.validate()?;
    let space = basis.space();
    let kind = ModelKind::of_space(space)?;
    let h = hamiltonian_for(params, space)?;
    let mut l = SuperOperator::hamiltonian(&h, basis)?;
    for (m, kappa) in params.kappas().into_iter().enumerate() {
        let a = annihilator(space, m)?;
        l = l.add(&SuperOperator::lindblad(&a, kappa, basis)?)?;
    }
    if kind == ModelKind::Full && params.gamma > 0.0 {
        let b = annihilator(space, MODE_B)?;
        l = l.add(&SuperOperator::lindblad(&b, params.gamma * (params.n_th + 1.0), basis)?)?;
        l = l.add(&SuperOperator::lindblad(&b.adjoint(), params.gamma * params.n_th, basis)?)?;
    }
    Ok(l.with_drive_scale(drive_scale(params)))
}

/// Density matrix over a [`Basis`], stored dense and row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    basis: Basis,
    data: Vec<C64>,
}

impl DensityMatrix {
    pub fn from_data(basis: &Basis, data: Vec<C64>) -> Result<Self> {
        if data.len() != basis.dim() * basis.dim() {
            return invalid("density matrix data has the wrong length");
        }
        Ok(DensityMatrix {
            basis: basis.clone(),
            data,
        })
    }

    /// `|ψ⟩⟨ψ|` for a state vector over the basis (normalized here).
    pub fn from_pure(basis: &Basis, psi: &[C64]) -> Result<Self> {
        let d = basis.dim();
        if psi.len() != d {
            return invalid("state vector length does not match the basis");
        }
        let norm2: f64 = psi.iter().map(|v| v.norm_sqr()).sum();
        if !(norm2 > 0.0) {
            return invalid("zero state vector");
        }
        let mut data = vec![C64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for c in 0..d {
                data[r * d + c] = psi[r] * psi[c].conj() / norm2;
            }
        }
        Ok(DensityMatrix {
            basis: basis.clone(),
            data,
        })
    }

    /// Projector onto basis state `i`.
    pub fn basis_state(basis: &Basis, i: usize) -> Self {
        let d = basis.dim();
        let mut data = vec![C64::new(0.0, 0.0); d * d];
        data[i * d + i] = C64::new(1.0, 0.0);
        DensityMatrix {
            basis: basis.clone(),
            data,
        }
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.dim() + c]
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    /// Largest entrywise modulus of `ρ − ρ†`.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..d {
            for c in r..d {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    /// Replaces ρ by (ρ + ρ†)/2.
    pub fn symmetrize(&mut self) {
        let d = self.dim();
        for r in 0..d {
            for c in r..d {
                let v = (self.data[r * d + c] + self.data[c * d + r].conj()) * 0.5;
                self.data[r * d + c] = v;
                self.data[c * d + r] = v.conj();
            }
        }
    }

    pub fn normalize_trace(&mut self) {
        let t = self.trace();
        for v in &mut self.data {
            *v /= t;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        sqrt(self.data.iter().map(|v| v.norm_sqr()).sum())
    }

    /// `Tr[op ρ]`.
    pub fn expect(&self, op: &Operator) -> Result<C64> {
        let m = self.basis.restrict(op)?;
        let d = self.dim();
        Ok(m.triplets().map(|(r, c, v)| v * self.data[c * d + r]).sum())
    }

    /// `⟨ψ|ρ|ψ⟩` for a normalized basis vector `psi`.
    pub fn overlap(&self, psi: &[C64]) -> f64 {
        let d = self.dim();
        let mut s = C64::new(0.0, 0.0);
        for r in 0..d {
            if psi[r] == C64::new(0.0, 0.0) {
                continue;
            }
            for c in 0..d {
                s += psi[r].conj() * self.data[r * d + c] * psi[c];
            }
        }
        s.re
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        use faer::prelude::*;
        let d = self.dim();
        let m = Mat::<c64>::from_fn(d, d, |r, c| (self.get(r, c) + self.get(c, r).conj()) * 0.5);
        let mut ev: Vec<f64> = m
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .unwrap_or_else(|_| vec![f64::NAN; d]);
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
        ev
    }

    /// `Σ_i w(n_i) ρ_ii` where `n_i` is the occupation of `mode`.
    fn diagonal_moment(&self, mode: usize, w: impl Fn(f64) -> f64) -> f64 {
        (0..self.dim())
            .map(|i| w(self.basis.occupation(i, mode) as f64) * self.get(i, i).re)
            .sum()
    }

    /// `Tr[a†a ρ]` for `mode`.
    pub fn occupation(&self, mode: usize) -> f64 {
        self.diagonal_moment(mode, |n| n)
    }

    /// `Tr[a†²a² ρ]` for `mode`.
    pub fn second_moment(&self, mode: usize) -> f64 {
        self.diagonal_moment(mode, |n| n * (n - 1.0))
    }

    /// Checks the density-matrix invariants: Hermitian within 1e−10, unit
    /// trace within 1e−9, eigenvalues ≥ −1e−8.
    pub fn check_physical(&self) -> Result<()> {
        let h = self.hermiticity_defect();
        if h > 1e-10 {
            return invalid(format!("density matrix not Hermitian (defect {h:e})"));
        }
        let t = self.trace();
        if (t - C64::new(1.0, 0.0)).norm() > 1e-9 {
            return invalid(format!("density matrix trace {t} differs from 1"));
        }
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        if !(min >= -1e-8) {
            return invalid(format!("density matrix has eigenvalue {min:e}"));
        }
        Ok(())
    }
}

/// Output current `Q = κ·Tr[a†a ρ]` of a cavity.
pub fn output_current(rho: &DensityMatrix, params: &SystemParams, cavity: Cavity) -> f64 {
    params.kappas()[cavity.index()] * rho.occupation(cavity.index())
}

/// Below this occupation the zero-delay correlation is reported undefined.
pub const G2_GUARD: f64 = 1e-14;

/// `Tr[a†²a²ρ] / Tr[a†aρ]²`, or `None` when the occupation is below
/// [`G2_GUARD`].
pub fn g2_zero_delay(rho: &DensityMatrix, mode: usize) -> Option<f64> {
    let n = rho.occupation(mode);
    if !(n >= G2_GUARD) {
        return None;
    }
    Some(rho.second_moment(mode) / (n * n))
}

/// Per-mode truncation. `photon_dim` is the Fock dimension of each cavity,
/// `phonon_dim` that of the mechanics (default from [`default_phonon_dim`]),
/// `max_photons` an optional cap on the total photon number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truncation {
    pub photon_dim: usize,
    pub phonon_dim: Option<usize>,
    pub max_photons: Option<usize>,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation {
            photon_dim: 4,
            phonon_dim: None,
            max_photons: None,
        }
    }
}

impl Truncation {
    pub fn dims(&self, params: &SystemParams, kind: ModelKind) -> Vec<usize> {
        let p = self.photon_dim;
        match kind {
            ModelKind::Kerr => vec![p, p, p],
            ModelKind::Full => {
                vec![p, p, p, self.phonon_dim.unwrap_or_else(|| default_phonon_dim(params))]
            }
        }
    }

    pub fn basis(&self, params: &SystemParams, kind: ModelKind) -> Result<Basis> {
        let space = FockSpace::new(&self.dims(params, kind))?;
        Ok(match self.max_photons {
            Some(c) => Basis::photon_capped(&space, c),
            None => Basis::full(&space),
        })
    }
}

/// Default mechanical Fock dimension `max(8, ⌈10(g² + n_th + 1)⌉)`.
pub fn default_phonon_dim(params: &SystemParams) -> usize {
    let v = ceil(10.0 * (params.delta_kerr() + params.n_th + 1.0));
    (v as usize).max(8)
}

/// How the steady state is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SteadyMethod {
    /// Direct factorization when the vectorized problem is small enough,
    /// the weak-drive sector solve otherwise.
    Auto,
    /// Sparse LU of the full Liouvillian with a trace row.
    Direct,
    /// Leading-order weak-drive solve, sector by sector.
    WeakDrive,
}

/// Largest vectorized dimension that [`SteadyMethod::Auto`] factorizes
/// directly.
pub const DIRECT_LIMIT: usize = 30_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyOutcome {
    pub rho: DensityMatrix,
    pub method: SteadyMethod,
    pub dims: Vec<usize>,
}

/// Steady state of the chosen model under the given truncation.
pub fn solve_steady(
    params: &SystemParams,
    kind: ModelKind,
    truncation: &Truncation,
    method: SteadyMethod,
) -> Result<SteadyOutcome> {
    let dims = truncation.dims(params, kind);
    let basis = truncation.basis(params, kind)?;
    let method = match method {
        SteadyMethod::Auto if basis.dim() * basis.dim() <= DIRECT_LIMIT => SteadyMethod::Direct,
        SteadyMethod::Auto => SteadyMethod::WeakDrive,
        m => m,
    };
    let rho = match method {
        SteadyMethod::Direct => steady_state(&liouvillian_in(params, &basis)?)?,
        _ => weak_drive_steady_state(params, basis.space())?,
    };
    Ok(SteadyOutcome { rho, method, dims })
}

#[cfg(test)]
mod tests;
