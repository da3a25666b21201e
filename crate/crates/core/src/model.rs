//! System parameters, Hamiltonians and bath quantities.
//!
//! All energies and rates are in units of the mechanical frequency ω_m.

use alloc::format;
use alloc::vec::Vec;

use crate::fock::{annihilator, number, FockSpace, Operator};
use crate::math::expm1;
use crate::{invalid, Error, Result, C64};

/// Mode indices in the fixed order `(L, C, R, b)`.
pub const MODE_L: usize = 0;
pub const MODE_C: usize = 1;
pub const MODE_R: usize = 2;
pub const MODE_B: usize = 3;

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// One of the three cavities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cavity {
    L,
    C,
    R,
}

impl Cavity {
    pub const ALL: [Cavity; 3] = [Cavity::L, Cavity::C, Cavity::R];

    pub fn index(self) -> usize {
        match self {
            Cavity::L => MODE_L,
            Cavity::C => MODE_C,
            Cavity::R => MODE_R,
        }
    }

    /// Mirror image under the left/right exchange.
    pub fn mirror(self) -> Cavity {
        match self {
            Cavity::L => Cavity::R,
            Cavity::C => Cavity::C,
            Cavity::R => Cavity::L,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Cavity::L => "L",
            Cavity::C => "C",
            Cavity::R => "R",
        }
    }
}

/// Sign of the Kerr term `σ δ n_C²` in the effective three-cavity model.
///
/// `Appendix` (σ = +1) gives the amplitude-equation coefficients `α_C + δ`
/// and `2α_C + 4δ`; `Polaron` (σ = −1) follows the polaron spectrum
/// `sΔ_C − s²δ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum NonlinearSign {
    #[default]
    Appendix,
    Polaron,
}

impl NonlinearSign {
    pub fn sigma(self) -> f64 {
        match self {
            NonlinearSign::Appendix => 1.0,
            NonlinearSign::Polaron => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NonlinearSign::Appendix => "appendix",
            NonlinearSign::Polaron => "polaron",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SystemParams {
    pub delta_l: f64,
    pub delta_c: f64,
    pub delta_r: f64,
    pub g: f64,
    pub j_l: f64,
    pub j_r: f64,
    pub kappa_l: f64,
    pub kappa_c: f64,
    pub kappa_r: f64,
    pub gamma: f64,
    pub n_th: f64,
    pub eps_l: f64,
    pub eps_c: f64,
    pub eps_r: f64,
    /// Physical mechanical frequency in Hz, only used for temperature input.
    pub omega_m_hz: Option<f64>,
    pub nonlinear_sign: NonlinearSign,
}

impl SystemParams {
    /// Kerr strength δ = g²/ω_m.
    pub fn delta_kerr(&self) -> f64 {
        self.g * self.g
    }

    pub fn detunings(&self) -> [f64; 3] {
        [self.delta_l, self.delta_c, self.delta_r]
    }

    pub fn kappas(&self) -> [f64; 3] {
        [self.kappa_l, self.kappa_c, self.kappa_r]
    }

    pub fn drives(&self) -> [f64; 3] {
        [self.eps_l, self.eps_c, self.eps_r]
    }

    pub fn set_kappa(&mut self, kappa: f64) {
        self.kappa_l = kappa;
        self.kappa_c = kappa;
        self.kappa_r = kappa;
    }

    pub fn with_drives(mut self, eps: [f64; 3]) -> Self {
        self.eps_l = eps[0];
        self.eps_c = eps[1];
        self.eps_r = eps[2];
        self
    }

    /// Complex frequencies α_j = Δ_j − iκ_j/2.
    pub fn alphas(&self) -> [C64; 3] {
        let d = self.detunings();
        let k = self.kappas();
        [0, 1, 2].map(|j| C64::new(d[j], -0.5 * k[j]))
    }

    /// The left/right mirror image of the parameter set.
    pub fn mirrored(&self) -> Self {
        SystemParams {
            delta_l: self.delta_r,
            delta_r: self.delta_l,
            j_l: self.j_r,
            j_r: self.j_l,
            kappa_l: self.kappa_r,
            kappa_r: self.kappa_l,
            eps_l: self.eps_r,
            eps_r: self.eps_l,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("delta_L", self.delta_l),
            ("delta_C", self.delta_c),
            ("delta_R", self.delta_r),
            ("g", self.g),
            ("J_L", self.j_l),
            ("J_R", self.j_r),
            ("kappa_L", self.kappa_l),
            ("kappa_C", self.kappa_c),
            ("kappa_R", self.kappa_r),
            ("gamma", self.gamma),
            ("n_th", self.n_th),
            ("eps_L", self.eps_l),
            ("eps_C", self.eps_c),
            ("eps_R", self.eps_r),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return invalid(format!("{name} is not finite"));
            }
        }
        for (name, v) in [
            ("g", self.g),
            ("J_L", self.j_l),
            ("J_R", self.j_r),
            ("kappa_L", self.kappa_l),
            ("kappa_C", self.kappa_c),
            ("kappa_R", self.kappa_r),
            ("gamma", self.gamma),
            ("n_th", self.n_th),
        ] {
            if v < 0.0 {
                return invalid(format!("{name} must be non-negative, got {v}"));
            }
        }
        Ok(())
    }
}

/// Caption-style detuning rule: Δ_L = Δ, Δ_C = Δ + Δ_LC, Δ_R = Δ + Δ_LR.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DetuningRule {
    pub delta_lc: f64,
    pub delta_lr: f64,
}

impl DetuningRule {
    pub fn apply(&self, params: &mut SystemParams, delta: f64) {
        params.delta_l = delta;
        params.delta_c = delta + self.delta_lc;
        params.delta_r = delta + self.delta_lr;
    }
}

/// Which cavities are driven. Amplitudes are in units of a reference ε;
/// `eps_c0` is the centre drive used by the ±k transport scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DriveScenario {
    /// +k: (ε, ε_c0, 0)
    Left,
    /// −k: (0, ε_c0, ε)
    Right,
    /// (0, ε, 0)
    Center,
    /// +k storage: (ε, 0, ε)
    TwoSided,
    /// −k release: (0, ε, 0)
    CenterRelease,
}

impl DriveScenario {
    pub fn amplitudes(self, eps: f64, eps_c0: f64) -> [f64; 3] {
        match self {
            DriveScenario::Left => [eps, eps_c0, 0.0],
            DriveScenario::Right => [0.0, eps_c0, eps],
            DriveScenario::Center | DriveScenario::CenterRelease => [0.0, eps, 0.0],
            DriveScenario::TwoSided => [eps, 0.0, eps],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DriveScenario::Left => "left",
            DriveScenario::Right => "right",
            DriveScenario::Center => "center",
            DriveScenario::TwoSided => "two-sided",
            DriveScenario::CenterRelease => "center-release",
        }
    }
}

fn require_modes(space: &FockSpace, n: usize) -> Result<()> {
    if space.num_modes() != n {
        return invalid(format!("expected a {n}-mode space, got {} modes", space.num_modes()));
    }
    Ok(())
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Cavity hopping plus coherent drives, shared by the full and effective
/// Hamiltonians. Operates on the first three modes of `space`.
fn cavity_terms(params: &SystemParams, space: &FockSpace, kerr: f64) -> Result<Operator> {
    let a: Vec<Operator> = (0..3).map(|m| annihilator(space, m)).collect::<Result<_>>()?;
    let ad: Vec<Operator> = a.iter().map(Operator::adjoint).collect();
    let n: Vec<Operator> = (0..3).map(|m| number(space, m)).collect::<Result<_>>()?;
    let hop_l = ad[MODE_L].multiply(&a[MODE_C])?;
    let hop_r = ad[MODE_R].multiply(&a[MODE_C])?;
    let hop_l_dag = hop_l.adjoint();
    let hop_r_dag = hop_r.adjoint();
    let n_c_sq = n[MODE_C].multiply(&n[MODE_C])?;
    let d = params.detunings();
    let e = params.drives();
    let mut terms: Vec<(&Operator, C64)> = Vec::new();
    for j in 0..3 {
        terms.push((&n[j], re(d[j])));
        terms.push((&a[j], re(e[j])));
        terms.push((&ad[j], re(e[j])));
    }
    terms.push((&hop_l, re(params.j_l)));
    terms.push((&hop_l_dag, re(params.j_l)));
    terms.push((&hop_r, re(params.j_r)));
    terms.push((&hop_r_dag, re(params.j_r)));
    terms.push((&n_c_sq, re(kerr)));
    Operator::compose(&terms)
}

/// Full rotating-frame Hamiltonian on the four-mode space `(L, C, R, b)`.
pub fn build_h_system(params: &SystemParams, space: &FockSpace) -> Result<Operator> {
    require_modes(space, 4)?;
    let cav = cavity_terms(params, space, 0.0)?;
    let b = annihilator(space, MODE_B)?;
    let nb = number(space, MODE_B)?;
    let n_c = number(space, MODE_C)?;
    let x = b.add(&b.adjoint())?;
    let om = x.multiply(&n_c)?;
    Operator::compose(&[(&cav, re(1.0)), (&nb, re(1.0)), (&om, re(params.g))])
}

/// Optomechanical Hamiltonian on the two-mode space `(C, b)`.
pub fn build_h_om(params: &SystemParams, space: &FockSpace) -> Result<Operator> {
    require_modes(space, 2)?;
    let a = annihilator(space, 0)?;
    let b = annihilator(space, 1)?;
    let n_a = a.adjoint().multiply(&a)?;
    let n_b = b.adjoint().multiply(&b)?;
    let om = b.add(&b.adjoint())?.multiply(&n_a)?;
    Operator::compose(&[(&n_a, re(params.delta_c)), (&n_b, re(1.0)), (&om, re(params.g))])
}

/// Polaron eigenvalue E_{s,n} = sΔ_C + n − s²δ.
pub fn eigenvalue_om(s: u32, n: u32, params: &SystemParams) -> f64 {
    let s = s as f64;
    s * params.delta_c + n as f64 - s * s * params.delta_kerr()
}

/// Lowest `count` eigenvalues of `H_om` in the sector with `s` photons,
/// by dense diagonalization over `phonon_dim` phonon levels.
pub fn om_sector_levels(params: &SystemParams, s: usize, phonon_dim: usize, count: usize) -> Result<Vec<f64>> {
    use faer::prelude::*;
    if count > phonon_dim {
        return invalid(format!("asked for {count} levels of a {phonon_dim}-level sector"));
    }
    let space = FockSpace::new(&[s + 1, phonon_dim])?;
    let h = build_h_om(params, &space)?;
    let sector: Vec<usize> = (0..phonon_dim).map(|n| s * phonon_dim + n).collect();
    let block = h.matrix().submatrix(&sector, &sector);
    let mut m = Mat::<c64>::zeros(phonon_dim, phonon_dim);
    for (r, c, v) in block.triplets() {
        m[(r, c)] = v;
    }
    let mut ev = m
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|_| Error::SolverFailure { residual: f64::NAN })?;
    ev.sort_by(|a, b| a.total_cmp(b));
    ev.truncate(count);
    Ok(ev)
}

/// Three-cavity model with the mechanics eliminated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveModel {
    /// α_j = Δ_j − iκ_j/2 (decay counted once).
    pub alphas: [C64; 3],
    pub j_l: f64,
    pub j_r: f64,
    /// Signed Kerr coefficient σδ multiplying n_C².
    pub kerr: f64,
    pub drives: [f64; 3],
    pub sign: NonlinearSign,
}

impl EffectiveModel {
    /// Complex energy of `n` photons in the optomechanical cavity,
    /// `nα_C + σδn²`.
    pub fn photon_c_coefficient(&self, n: u32) -> C64 {
        let n = n as f64;
        self.alphas[MODE_C] * n + self.kerr * n * n
    }

    /// Hermitian part on a three-mode space: Σ Δ_j n_j + σδ n_C² + hopping
    /// + drives.
    pub fn hamiltonian(&self, params: &SystemParams, space: &FockSpace) -> Result<Operator> {
        require_modes(space, 3)?;
        cavity_terms(params, space, self.kerr)
    }
}

pub fn build_h_eff(params: &SystemParams) -> EffectiveModel {
    EffectiveModel {
        alphas: params.alphas(),
        j_l: params.j_l,
        j_r: params.j_r,
        kerr: params.nonlinear_sign.sigma() * params.delta_kerr(),
        drives: params.drives(),
        sign: params.nonlinear_sign,
    }
}

/// Bose–Einstein occupation of a mode at frequency `freq_hz` (ordinary
/// frequency) and temperature `temperature_k`.
pub fn thermal_occupancy(freq_hz: f64, temperature_k: f64) -> Result<f64> {
    if !(freq_hz > 0.0 && freq_hz.is_finite()) {
        return Err(Error::InvalidArgument(format!("frequency must be positive, got {freq_hz}")));
    }
    if !(temperature_k > 0.0 && temperature_k.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive, got {temperature_k}"
        )));
    }
    let x = PLANCK * freq_hz / (BOLTZMANN * temperature_k);
    Ok(1.0 / expm1(x))
}
