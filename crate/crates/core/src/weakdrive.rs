//! Weak-drive analytics for the effective three-cavity model.
//!
//! The state is truncated at two photons,
//! `|ψ⟩ = C_0|0⟩ + Σ C_j a_j†|0⟩ + Σ_{i,j} ½ C_ij a_i†a_j†|0⟩`, with `C_0 = 1`.
//! The steady amplitudes follow either from a direct 9×9 solve of the
//! amplitude equations or from closed forms. The two routes are independent
//! and are checked against each other in the tests.
//!
//! The Kerr sign of [`NonlinearSign`](crate::model::NonlinearSign) enters as
//! a signed δ everywhere: with the polaron convention every `+δ` below reads
//! `−δ`.

use alloc::vec::Vec;

use faer::prelude::*;
use faer::linalg::solvers::DenseSolveCore;

use crate::model::{Cavity, DetuningRule, SystemParams};
use crate::{Error, Result, C64};

const SQRT2: f64 = core::f64::consts::SQRT_2;

/// Index of each amplitude in the 9-component ordering
/// `(L, C, R, LC, LR, CR, LL, CC, RR)`.
pub mod idx {
    pub const L: usize = 0;
    pub const C: usize = 1;
    pub const R: usize = 2;
    pub const LC: usize = 3;
    pub const LR: usize = 4;
    pub const CR: usize = 5;
    pub const LL: usize = 6;
    pub const CC: usize = 7;
    pub const RR: usize = 8;
}

/// Complex frequencies of the three cavities and the signed Kerr shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaSet {
    pub alpha_l: C64,
    pub alpha_c: C64,
    pub alpha_r: C64,
    /// σδ: +g² for the appendix convention, −g² for the polaron one.
    pub delta: f64,
}

impl AlphaSet {
    pub fn from_params(p: &SystemParams) -> Self {
        let [alpha_l, alpha_c, alpha_r] = p.alphas();
        AlphaSet {
            alpha_l,
            alpha_c,
            alpha_r,
            delta: p.nonlinear_sign.sigma() * p.delta_kerr(),
        }
    }

    pub fn swapped(&self) -> Self {
        AlphaSet {
            alpha_l: self.alpha_r,
            alpha_r: self.alpha_l,
            ..*self
        }
    }

    /// K_n = α + α_C + nδ with α = α_L.
    pub fn k(&self, n: u32) -> C64 {
        self.alpha_l + self.alpha_c + n as f64 * self.delta
    }

    /// F_n = α(α_C + nδ) with α = α_L.
    pub fn f(&self, n: u32) -> C64 {
        self.alpha_l * (self.alpha_c + n as f64 * self.delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amplitudes {
    pub c0: C64,
    pub c_l: C64,
    pub c_c: C64,
    pub c_r: C64,
    pub c_lc: C64,
    pub c_lr: C64,
    pub c_cr: C64,
    pub c_ll: C64,
    pub c_cc: C64,
    pub c_rr: C64,
}

impl Amplitudes {
    pub fn from_array(c: [C64; 9]) -> Self {
        Amplitudes {
            c0: C64::new(1.0, 0.0),
            c_l: c[idx::L],
            c_c: c[idx::C],
            c_r: c[idx::R],
            c_lc: c[idx::LC],
            c_lr: c[idx::LR],
            c_cr: c[idx::CR],
            c_ll: c[idx::LL],
            c_cc: c[idx::CC],
            c_rr: c[idx::RR],
        }
    }

    pub fn to_array(&self) -> [C64; 9] {
        [
            self.c_l, self.c_c, self.c_r, self.c_lc, self.c_lr, self.c_cr, self.c_ll, self.c_cc,
            self.c_rr,
        ]
    }

    pub fn one_photon(&self, cav: Cavity) -> C64 {
        match cav {
            Cavity::L => self.c_l,
            Cavity::C => self.c_c,
            Cavity::R => self.c_r,
        }
    }

    /// Two-photon amplitude `C_ij` (symmetric in `i, j`).
    pub fn pair(&self, i: Cavity, j: Cavity) -> C64 {
        use Cavity::*;
        match (i.min(j), i.max(j)) {
            (L, L) => self.c_ll,
            (C, C) => self.c_cc,
            (R, R) => self.c_rr,
            (L, C) => self.c_lc,
            (L, R) => self.c_lr,
            (C, R) => self.c_cr,
            _ => unreachable!(),
        }
    }

    /// Amplitudes relabelled under the left/right exchange.
    pub fn mirrored(&self) -> Self {
        Amplitudes {
            c0: self.c0,
            c_l: self.c_r,
            c_c: self.c_c,
            c_r: self.c_l,
            c_lc: self.c_cr,
            c_lr: self.c_lr,
            c_cr: self.c_lc,
            c_ll: self.c_rr,
            c_cc: self.c_cc,
            c_rr: self.c_ll,
        }
    }

    /// `|C_j|² + Σ_{i≠j}|C_ij|² + 2|C_jj|²`, the norm-weighted population
    /// of cavity `j`.
    pub fn full_population(&self, cav: Cavity) -> f64 {
        let others = Cavity::ALL.into_iter().filter(|&k| k != cav);
        self.one_photon(cav).norm_sqr()
            + others.map(|k| self.pair(cav, k).norm_sqr()).sum::<f64>()
            + 2.0 * self.pair(cav, cav).norm_sqr()
    }
}

/// Steady-state amplitude equations written as `M c = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeSystem {
    pub matrix: [[C64; 9]; 9],
    pub rhs: [C64; 9],
}

impl AmplitudeSystem {
    pub fn residual(&self, c: &[C64; 9]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..9 {
            let mut s = -self.rhs[i];
            for j in 0..9 {
                s += self.matrix[i][j] * c[j];
            }
            worst = worst.max(s.norm());
        }
        worst
    }
}

pub fn amplitude_system(params: &SystemParams) -> AmplitudeSystem {
    use idx::*;
    let a = AlphaSet::from_params(params);
    let d = a.delta;
    let (jl, jr) = (C64::new(params.j_l, 0.0), C64::new(params.j_r, 0.0));
    let [el, ec, er] = params.drives().map(|e| C64::new(e, 0.0));
    let s2 = C64::new(SQRT2, 0.0);
    let mut m = [[C64::new(0.0, 0.0); 9]; 9];
    let mut b = [C64::new(0.0, 0.0); 9];

    m[L][L] = a.alpha_l;
    m[L][C] = jl;
    b[L] = el;

    m[C][C] = a.alpha_c + d;
    m[C][L] = jl;
    m[C][R] = jr;
    b[C] = ec;

    m[R][R] = a.alpha_r;
    m[R][C] = jr;
    b[R] = er;

    m[LC][LC] = a.alpha_l + a.alpha_c + d;
    m[LC][C] += el;
    m[LC][L] += ec;
    m[LC][LL] = s2 * jl;
    m[LC][CC] = s2 * jl;
    m[LC][LR] = jr;

    m[LR][LR] = a.alpha_l + a.alpha_r;
    m[LR][R] += el;
    m[LR][L] += er;
    m[LR][CR] = jl;
    m[LR][LC] = jr;

    m[CR][CR] = a.alpha_r + a.alpha_c + d;
    m[CR][R] += ec;
    m[CR][C] += er;
    m[CR][RR] = s2 * jr;
    m[CR][CC] = s2 * jr;
    m[CR][LR] = jl;

    m[LL][LL] = a.alpha_l * 2.0;
    m[LL][L] += s2 * el;
    m[LL][LC] = s2 * jl;

    m[CC][CC] = a.alpha_c * 2.0 + 4.0 * d;
    m[CC][C] += s2 * ec;
    m[CC][LC] = s2 * jl;
    m[CC][CR] = s2 * jr;

    m[RR][RR] = a.alpha_r * 2.0;
    m[RR][R] += s2 * er;
    m[RR][CR] = s2 * jr;

    // 0 = M c + b with C_0 = 1.
    AmplitudeSystem {
        matrix: m,
        rhs: b.map(|v| -v),
    }
}

/// Direct LU solve of the amplitude equations.
pub fn steady_amplitudes_solve(params: &SystemParams) -> Result<Amplitudes> {
    let sys = amplitude_system(params);
    let m = Mat::<c64>::from_fn(9, 9, |i, j| sys.matrix[i][j]);
    let rhs = Mat::<c64>::from_fn(9, 1, |i, _| sys.rhs[i]);
    let lu = m.partial_piv_lu();
    let inv = lu.inverse();
    // NaN propagates through the sums so a singular factorization shows up
    // as a non-finite condition estimate.
    let norm1 = |x: &Mat<c64>| {
        (0..x.ncols())
            .map(|j| (0..x.nrows()).map(|i| x[(i, j)].norm()).sum::<f64>())
            .fold(0.0, |acc: f64, v| if v.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(v) })
    };
    let condition = norm1(&m) * norm1(&inv);
    if !condition.is_finite() || condition > 1e15 {
        return Err(Error::ExceptionalPoint { condition });
    }
    let sol = lu.solve(&rhs);
    let c: [C64; 9] = core::array::from_fn(|i| sol[(i, 0)]);
    let scale = c.iter().map(|v| v.norm()).fold(0.0, f64::max) * norm1(&m)
        + sys.rhs.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let res = sys.residual(&c);
    if !(res <= 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::SolverFailure { residual: res });
    }
    Ok(Amplitudes::from_array(c))
}

/// D_1 = J_L²α_R + J_R²α_L − α_Lα_R(α_C + δ).
pub fn d1(a: &AlphaSet, jl: f64, jr: f64) -> C64 {
    a.alpha_r * jl * jl + a.alpha_l * jr * jr - a.alpha_l * a.alpha_r * (a.alpha_c + a.delta)
}

/// D_1 with the tunnelling weights on the other pair of α's
/// (J_L²α_L + J_R²α_R − …), kept for reference. It does not match the
/// determinant of the one-photon block unless α_L = α_R.
pub fn d1_alternate(a: &AlphaSet, jl: f64, jr: f64) -> C64 {
    a.alpha_l * jl * jl + a.alpha_r * jr * jr - a.alpha_l * a.alpha_r * (a.alpha_c + a.delta)
}

/// The compact two-photon denominator
/// `Σ_s α_s[J_s² − α_s(α_s+α_C+δ)][2J_s²(α_s+α_C+2δ) − α_s(α_s+α_C+δ)(α_C+2δ)]`,
/// kept for reference. It is not proportional to the determinant of the
/// two-photon block; [`d2`] is used by the closed forms.
pub fn d2_compact(a: &AlphaSet, jl: f64, jr: f64) -> C64 {
    let (ac, d) = (a.alpha_c, a.delta);
    [(a.alpha_l, jl), (a.alpha_r, jr)]
        .iter()
        .map(|&(al, j)| {
            let j2 = j * j;
            al * (j2 - al * (al + ac + d))
                * ((al + ac + 2.0 * d) * 2.0 * j2 - al * (al + ac + d) * (ac + 2.0 * d))
        })
        .sum()
}

/// Two-photon denominator: one eighth of the determinant of the 6×6
/// two-photon block of the amplitude equations.
pub fn d2(a: &AlphaSet, jl: f64, jr: f64) -> C64 {
    let (al, ac, ar, d) = (a.alpha_l, a.alpha_c, a.alpha_r, a.delta);
    let q = |x: C64, y: C64| -> C64 {
        ac * ac * x * 2.0 + ac * ac * y + ac * x * x * 2.0 + ac * x * y * 2.0 + ac * x * d * 6.0
            + ac * y * y
            + ac * y * d * 3.0
            + x * x * y
            + x * x * d * 3.0
            + x * y * y
            + x * y * d * 3.0
            + x * d * d * 4.0
            + y * y * d * 2.0
            + y * d * d * 2.0
    };
    let (jl2, jr2) = (jl * jl, jr * jr);
    ar * (ac + al + 2.0 * d) * jl2 * jl2 + al * (ac + ar + 2.0 * d) * jr2 * jr2
        + (ac * (al + ar) + al * al + ar * ar + (al + ar) * 2.0 * d) * jl2 * jr2
        - ar * q(al, ar) * jl2
        - al * q(ar, al) * jr2
        + al * ar * (ac + 2.0 * d) * (al + ar) * (ac + al + d) * (ac + ar + d)
}

type Table = [[C64; 3]; 3];

/// The `l` coefficient table, rows/cols in order (L, C, R).
pub fn l_table(a: &AlphaSet, jl: f64, jr: f64) -> Table {
    let (al, ac, ar, d) = (a.alpha_l, a.alpha_c, a.alpha_r, a.delta);
    let (jl2, jr2) = (jl * jl, jr * jr);
    let acr = ac + ar + d;
    let acr2 = ac + ar + 2.0 * d;
    let s = ac + al + ar + 2.0 * d;
    // L row: overall sign opposite to the compact printed table.
    let ll = -(ar * jl2 * jl2
        + (-(al + ar) * (ac + al + d) + jr2) * (-ar * acr * (ac + 2.0 * d) + acr2 * jr2)
        + (-ar
            * (ac * ac + ar * (al + ar) + (al * 3.0 + ar) * d + 2.0 * d * d
                + ac * (al * 2.0 + ar + 3.0 * d))
            + (al - ar) * jr2)
            * jl2);
    let lc = -((jl * jr2) * (al + ar) * acr2
        - ar * jl * (ac + 2.0 * d) * ((al + ar) * acr - jl2));
    let lr = -((ar * (acr * (ac + 2.0 * d) + jl2) - acr2 * jr2) * (jl * jr));
    let cl = -(al + ar) * acr2 * jr2 + ar * (ac + 2.0 * d) * ((al + ar) * acr - jl2);
    let cc = (al * jr2 + ar * jl2 - ar * (al + ar) * acr) * jl;
    let cr = ar * s * (jl * jr);
    let rl = acr2 * jr2 - ar * (acr * (ac + 2.0 * d) + jl2);
    let rc = ar * s * jl;
    let rr = -s * (jl * jr);
    [[ll, lc, lr], [cl, cc, cr], [rl, rc, rr]]
}

/// The `c` coefficient table, rows/cols in order (L, C, R).
pub fn c_table(a: &AlphaSet, jl: f64, jr: f64) -> Table {
    let (al, ac, ar, d) = (a.alpha_l, a.alpha_c, a.alpha_r, a.delta);
    let (jl2, jr2) = (jl * jl, jr * jr);
    let acr = ac + ar + d;
    let acl = ac + al + d;
    let mixed = -al * jr2 - ar * jl2;
    let w = al * 2.0 * ac + al * al + al * ar + al * 2.0 * d;
    let c_ll = (al * jr2 + ar * jl2 - ar * (al + ar) * acr) * jl;
    let c_lc = al * (mixed + ar * (al + ar) * acr);
    let c_lr = (al * jr2 - ar * (w - jl2)) * jr;
    let c_cl = al * (mixed + ar * (al + ar) * acr) * jl;
    let c_cc = -ar * jl2 * jl2 - al * (jr2 - (al + ar) * acl) * (jr2 - ar * acr)
        + (-(al + ar) * jr2
            + ar * (al * al + ac * (al * 2.0 + ar) + ar * (ar + d) + al * (ar + 2.0 * d)))
            * jl2;
    let c_cr = ar * (mixed + al * (al + ar) * acl) * jr;
    let c_rl = (al * jr2 - ar * (w - jl2)) * jl;
    let c_rc = ar * (mixed + al * (al + ar) * acl);
    let c_rr = (al * jr2 + ar * jl2 - al * (al + ar) * acl) * jr;
    [[c_ll, c_lc, c_lr], [c_cl, c_cc, c_cr], [c_rl, c_rc, c_rr]]
}

/// The `r` table: the `l` table evaluated with (J_L ↔ J_R, α_L ↔ α_R) and
/// both of its indices relabelled L ↔ R.
pub fn r_table(a: &AlphaSet, jl: f64, jr: f64) -> Table {
    let l = l_table(&a.swapped(), jr, jl);
    let m = |i: usize| 2 - i;
    core::array::from_fn(|i| core::array::from_fn(|j| l[m(i)][m(j)]))
}

fn is_pole(value: C64, scale: f64) -> bool {
    !(value.norm() > 1e-13 * scale) || !value.is_finite()
}

/// Closed-form steady amplitudes. The closed forms cover C_j and C_jj; the
/// mixed pairs C_LC, C_LR, C_CR are recovered by back substitution into the
/// three mixed-pair rows of the amplitude equations.
pub fn steady_amplitudes_closed_form(params: &SystemParams) -> Result<Amplitudes> {
    let a = AlphaSet::from_params(params);
    let (jl, jr) = (params.j_l, params.j_r);
    let [el, ec, er] = params.drives();
    let (al, ac, ar, d) = (a.alpha_l, a.alpha_c, a.alpha_r, a.delta);

    let d1v = d1(&a, jl, jr);
    let d1_scale = (ar.norm() * jl * jl + al.norm() * jr * jr
        + (al * ar).norm() * (ac + d).norm())
    .max(f64::MIN_POSITIVE);
    if is_pole(d1v, d1_scale) {
        return Err(Error::Pole("D_1"));
    }
    let c_l = ((ar * (ac + d) - jr * jr) * el + jl * (-ar * ec + jr * er)) / d1v;
    let c_c = (al * ar * ec - ar * jl * el - al * jr * er) / d1v;
    let c_r = ((al * (ac + d) - jl * jl) * er + jr * (-al * ec + jl * el)) / d1v;

    let d2v = d2(&a, jl, jr);
    let d2_scale = {
        let big = [al, ac, ar, C64::new(d, 0.0), C64::new(jl, 0.0), C64::new(jr, 0.0)]
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        crate::math::powi(big, 6).max(f64::MIN_POSITIVE)
    };
    if is_pole(d2v, d2_scale) {
        return Err(Error::Pole("D_2"));
    }
    let e = [el, ec, er];
    let dot = |row: &[C64; 3]| row[0] * e[0] + row[1] * e[1] + row[2] * e[2];
    let l = l_table(&a, jl, jr);
    let c = c_table(&a, jl, jr);
    let r = r_table(&a, jl, jr);
    let den = d2v * SQRT2;
    let c_ll = (c_l * dot(&l[0]) + c_c * jl * dot(&l[1]) + c_r * (jl * jr) * dot(&l[2])) / den;
    let c_cc = (c_l * jl * dot(&c[0]) + c_c * dot(&c[1]) + c_r * jr * dot(&c[2])) / den;
    let c_rr = (c_l * (jl * jr) * dot(&r[0]) + c_c * jr * dot(&r[1]) + c_r * dot(&r[2])) / den;

    let (c_lc, c_lr, c_cr) = pair_amplitudes(&a, jl, jr, e, [c_l, c_c, c_r], [c_ll, c_cc, c_rr])?;
    Ok(Amplitudes {
        c0: C64::new(1.0, 0.0),
        c_l,
        c_c,
        c_r,
        c_lc,
        c_lr,
        c_cr,
        c_ll,
        c_cc,
        c_rr,
    })
}

/// Mixed pair amplitudes from the mixed-pair rows, with the one-photon and
/// diagonal pair amplitudes known.
fn pair_amplitudes(
    a: &AlphaSet,
    jl: f64,
    jr: f64,
    e: [f64; 3],
    one: [C64; 3],
    diag: [C64; 3],
) -> Result<(C64, C64, C64)> {
    // Pair rows with C_LL, C_CC, C_RR known:
    //   (α_L+α_C+δ) C_LC + J_R C_LR = −ε_L C_C − ε_C C_L − √2 J_L (C_LL + C_CC)
    //   J_R C_LC + (α_L+α_R) C_LR + J_L C_CR = −ε_L C_R − ε_R C_L
    //   J_L C_LR + (α_R+α_C+δ) C_CR = −ε_C C_R − ε_R C_C − √2 J_R (C_RR + C_CC)
    let (al, ac, ar, d) = (a.alpha_l, a.alpha_c, a.alpha_r, a.delta);
    let [el, ec, er] = e;
    let [cl, cc, cr] = one;
    let [cll, ccc, crr] = diag;
    let m11 = al + ac + d;
    let m22 = al + ar;
    let m33 = ar + ac + d;
    let b1 = -(cc * el + cl * ec) - (cll + ccc) * (SQRT2 * jl);
    let b2 = -(cr * el + cl * er);
    let b3 = -(cr * ec + cc * er) - (crr + ccc) * (SQRT2 * jr);
    // Tridiagonal 3×3 solve by elimination.
    let det = m11 * m22 * m33 - m11 * jl * jl - m33 * jr * jr;
    if is_pole(det, (m11 * m22 * m33).norm().max(f64::MIN_POSITIVE)) {
        return Err(Error::Pole("pair block"));
    }
    let c_lr = (m11 * m33 * b2 - m33 * jr * b1 - m11 * jl * b3) / det;
    let c_lc = (b1 - c_lr * jr) / m11;
    let c_cr = (b3 - c_lr * jl) / m33;
    Ok((c_lc, c_lr, c_cr))
}

/// Zero-delay correlations from the amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2Analytic {
    /// `2|C_jj|²/|C_j|⁴`, the headline value.
    pub leading: [Option<f64>; 3],
    /// `2|C_jj|² / (|C_j|² + Σ|C_ij|² + 2|C_jj|²)²`.
    pub full: [Option<f64>; 3],
}

impl G2Analytic {
    pub fn get(&self, cav: Cavity) -> Option<f64> {
        self.leading[cav.index()]
    }

    /// True when the leading and full forms differ by more than 1 %.
    pub fn flagged(&self, cav: Cavity) -> bool {
        match (self.leading[cav.index()], self.full[cav.index()]) {
            (Some(a), Some(b)) => (a - b).abs() > 0.01 * a.abs().max(b.abs()),
            _ => false,
        }
    }
}

/// Below this one-photon probability the correlation ratio is reported as
/// undefined.
pub const AMPLITUDE_GUARD: f64 = 1e-150;

pub fn g2_analytic(amps: &Amplitudes) -> G2Analytic {
    let mut leading = [None; 3];
    let mut full = [None; 3];
    for cav in Cavity::ALL {
        let p1 = amps.one_photon(cav).norm_sqr();
        if !(p1 > AMPLITUDE_GUARD) {
            continue;
        }
        let two = 2.0 * amps.pair(cav, cav).norm_sqr();
        let n = amps.full_population(cav);
        leading[cav.index()] = Some(two / (p1 * p1));
        full[cav.index()] = Some(two / (n * n));
    }
    G2Analytic { leading, full }
}

/// Mean occupations from the amplitudes.
///
/// With `C_0 = 1` and the physical drive amplitudes in the equations, the
/// populations `|C_j|²` already are photon numbers; `n0` is reported as the
/// reference scale Σ(ε_j/κ_j)².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occupations {
    pub leading: [f64; 3],
    pub full: [f64; 3],
    pub n0: f64,
}

pub fn occupations_analytic(amps: &Amplitudes, params: &SystemParams) -> Occupations {
    let leading = Cavity::ALL.map(|c| amps.one_photon(c).norm_sqr());
    let full = Cavity::ALL.map(|c| amps.full_population(c));
    let n0 = params
        .drives()
        .iter()
        .zip(params.kappas())
        .filter(|(_, k)| *k > 0.0)
        .map(|(e, k)| (e / k) * (e / k))
        .sum();
    Occupations { leading, full, n0 }
}

/// Right-cavity photon number under a left drive of amplitude `eps` (equal to
/// the left-cavity number under the mirrored right drive):
/// `|J_LJ_Rε / (J_R²α_L + α_R(J_L² − α_L(α_C+δ)))|²`.
pub fn transmitted_occupation(params: &SystemParams, eps: f64) -> f64 {
    let a = AlphaSet::from_params(params);
    let (jl, jr) = (params.j_l, params.j_r);
    let den = a.alpha_l * jr * jr + a.alpha_r * (jl * jl - a.alpha_l * (a.alpha_c + a.delta));
    (C64::new(jl * jr * eps, 0.0) / den).norm_sqr()
}

/// Closed-form left-cavity correlation for a left-only drive with
/// α_L = α_R = α:
/// `|(J_R⁴K₂ + (J_L²−J_R²)K₁F₂)/((J_L²+J_R²)K₂ − K₁F₂) − F₁|²
///  · |(J_L²+J_R²−F₁)/(J_R²−F₁)²|²`.
pub fn g2l_formula(params: &SystemParams) -> Result<f64> {
    if params.delta_l != params.delta_r || params.kappa_l != params.kappa_r {
        return Err(Error::FormulaDomain("requires alpha_L = alpha_R".into()));
    }
    if params.eps_c != 0.0 || params.eps_r != 0.0 || params.eps_l == 0.0 {
        return Err(Error::FormulaDomain("requires a left-only drive".into()));
    }
    let a = AlphaSet::from_params(params);
    let (jl2, jr2) = (params.j_l * params.j_l, params.j_r * params.j_r);
    let (k1, k2, f1, f2) = (a.k(1), a.k(2), a.f(1), a.f(2));
    let first = (k2 * jr2 * jr2 + k1 * f2 * (jl2 - jr2)) / (k2 * (jl2 + jr2) - k1 * f2) - f1;
    let second = (-f1 + jl2 + jr2) / ((-f1 + jr2) * (-f1 + jr2));
    let v = first.norm_sqr() * second.norm_sqr();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Pole("g2L formula denominator"))
    }
}

/// Box and grid for [`upb_roots`]. Detunings follow `rule` with the common
/// detuning Δ as the second free variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpbSearch {
    pub g_range: (f64, f64),
    pub delta_range: (f64, f64),
    pub grid: (usize, usize),
    pub rule: DetuningRule,
    /// Dip depth relative to the median of the coarse grid.
    pub threshold: f64,
}

impl UpbSearch {
    pub fn new(g_range: (f64, f64), delta_range: (f64, f64), rule: DetuningRule) -> Self {
        UpbSearch {
            g_range,
            delta_range,
            grid: (41, 81),
            rule,
            threshold: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpbRoot {
    pub g: f64,
    pub delta: f64,
    /// `2|C_LL|²/|C_L|⁴` at the root.
    pub g2_l: f64,
    /// Ratio of the root value to the grid median.
    pub relative_depth: f64,
}

fn upb_point(fixed: &SystemParams, rule: &DetuningRule, g: f64, delta: f64) -> SystemParams {
    let mut p = *fixed;
    p.g = g;
    rule.apply(&mut p, delta);
    if p.drives() == [0.0; 3] {
        p.eps_l = 1.0;
    }
    p
}

/// `C_LL / C_L²`, independent of the overall drive strength.
fn normalized_cll(p: &SystemParams) -> Option<C64> {
    let amps = steady_amplitudes_solve(p).ok()?;
    let cl = amps.c_l;
    if !(cl.norm_sqr() > AMPLITUDE_GUARD) {
        return None;
    }
    Some(amps.c_ll / (cl * cl))
}

/// Unconventional-blockade points in a (g, Δ) box: zeros of `C_LL`, located by
/// a coarse grid scan of `2|C_LL|²/|C_L|⁴` followed by a Newton refinement on
/// the complex equation `C_LL/C_L² = 0`.
pub fn upb_roots(fixed: &SystemParams, search: &UpbSearch) -> Vec<UpbRoot> {
    let (ng, nd) = (search.grid.0.max(2), search.grid.1.max(2));
    let (g0, g1) = search.g_range;
    let (x0, x1) = search.delta_range;
    let gs: Vec<f64> = (0..ng).map(|i| g0 + (g1 - g0) * i as f64 / (ng - 1) as f64).collect();
    let xs: Vec<f64> = (0..nd).map(|i| x0 + (x1 - x0) * i as f64 / (nd - 1) as f64).collect();
    let value = |g: f64, x: f64| -> f64 {
        normalized_cll(&upb_point(fixed, &search.rule, g, x))
            .map(|z| 2.0 * z.norm_sqr())
            .unwrap_or(f64::NAN)
    };
    let grid: Vec<f64> = gs.iter().flat_map(|&g| xs.iter().map(move |&x| (g, x))).map(|(g, x)| value(g, x)).collect();
    let mut finite: Vec<f64> = grid.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Vec::new();
    }
    finite.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let baseline = finite[finite.len() / 2];

    let at = |i: usize, j: usize| grid[i * nd + j];
    let mut roots: Vec<UpbRoot> = Vec::new();
    for i in 0..ng {
        for j in 0..nd {
            let v = at(i, j);
            if !v.is_finite() {
                continue;
            }
            let mut is_min = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) == (0, 0) || ii < 0 || jj < 0 || ii >= ng as i64 || jj >= nd as i64 {
                        continue;
                    }
                    let w = at(ii as usize, jj as usize);
                    if w.is_finite() && w < v {
                        is_min = false;
                    }
                }
            }
            if !is_min {
                continue;
            }
            let Some((g, x)) = newton_zero(fixed, search, gs[i], xs[j]) else {
                continue;
            };
            let g2 = value(g, x);
            if !(g2 < search.threshold * baseline) {
                continue;
            }
            let tol_g = 1e-6 * (g1 - g0).abs().max(1e-12);
            let tol_x = 1e-6 * (x1 - x0).abs().max(1e-12);
            if roots.iter().any(|r| (r.g - g).abs() < tol_g && (r.delta - x).abs() < tol_x) {
                continue;
            }
            roots.push(UpbRoot {
                g,
                delta: x,
                g2_l: g2,
                relative_depth: g2 / baseline,
            });
        }
    }
    roots
}

fn newton_zero(fixed: &SystemParams, s: &UpbSearch, g: f64, x: f64) -> Option<(f64, f64)> {
    let f = |g: f64, x: f64| normalized_cll(&upb_point(fixed, &s.rule, g, x));
    let (mut g, mut x) = (g, x);
    let hg = 1e-7 * (s.g_range.1 - s.g_range.0).abs().max(1e-9);
    let hx = 1e-7 * (s.delta_range.1 - s.delta_range.0).abs().max(1e-9);
    for _ in 0..60 {
        let z = f(g, x)?;
        if z.norm() < 1e-14 {
            break;
        }
        let zg = (f(g + hg, x)? - f(g - hg, x)?) / (2.0 * hg);
        let zx = (f(g, x + hx)? - f(g, x - hx)?) / (2.0 * hx);
        // Real 2×2 Jacobian of (Re z, Im z) with respect to (g, x).
        let det = zg.re * zx.im - zx.re * zg.im;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dg = (z.re * zx.im - zx.re * z.im) / det;
        let dx = (zg.re * z.im - z.re * zg.im) / det;
        g -= dg;
        x -= dx;
        if !(g.is_finite() && x.is_finite()) {
            return None;
        }
        if dg.abs() < 1e-15 * g.abs().max(1e-12) && dx.abs() < 1e-15 * x.abs().max(1e-12) {
            break;
        }
    }
    let inside = |v: f64, r: (f64, f64)| v >= r.0.min(r.1) && v <= r.0.max(r.1);
    (inside(g, s.g_range) && inside(x, s.delta_range)).then_some((g, x))
}
