//! Leading-order weak-drive steady state.
//!
//! Split ρ into blocks ρ_(n,m) = P_n ρ P_m by ket and bra photon number. The
//! undriven dynamics conserves photon number except for cavity decay, which
//! only feeds lower blocks, and the drive connects neighbouring blocks. To
//! lowest order in ε each block with n + m = k is fed by the blocks with
//! n + m = k − 1 alone:
//!
//! ```text
//! A_n X + X A_m† + J(X) = i (V ρ_(n−1,m) − ρ_(n,m−1) V†)
//! A_n  = −iH_n − ½Σκ_j N_j − ½γ[(n_th+1) b†b + n_th b b†]
//! J(X) = γ(n_th+1) b X b† + γ n_th b† X b
//! ```
//!
//! with `V = Σ ε_j a_j†` and ρ_(0,0) the thermal state of the mechanics. Each
//! block equation is a Sylvester equation plus the small mechanical jump
//! term; it is solved by GMRES preconditioned with an eigendecomposition
//! Sylvester solve. Blocks up to two photons on each side are kept, which is
//! what the occupations and zero-delay correlations need.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use faer::linalg::solvers::DenseSolveCore;
use faer::prelude::*;

use super::{hamiltonian_for, Basis, DensityMatrix, ModelKind};
use crate::fock::{annihilator, number, FockSpace, Operator};
use crate::math::sqrt;
use crate::model::{SystemParams, MODE_B};
use crate::sparse::CsrMatrix;
use crate::{invalid, Error, Result, C64};

const MAX_SECTOR: usize = 2;

struct Sector {
    /// Positions of the sector's states in the capped basis.
    states: Vec<usize>,
    a: Mat<c64>,
    eigvecs: Mat<c64>,
    eigvecs_inv: Mat<c64>,
    eigvals: Vec<C64>,
    b: Option<Mat<c64>>,
}

struct Problem {
    sectors: Vec<Sector>,
    /// `raise[k]`: block of V mapping sector k−1 into sector k (index 0 unused).
    raise: Vec<Mat<c64>>,
    jump_down: f64,
    jump_up: f64,
}

fn dense_block(m: &CsrMatrix, rows: &[usize], cols: &[usize]) -> Mat<c64> {
    let sub = m.submatrix(rows, cols);
    let mut out = Mat::<c64>::zeros(rows.len(), cols.len());
    for (r, c, v) in sub.triplets() {
        out[(r, c)] = v;
    }
    out
}

impl Problem {
    fn new(params: &SystemParams, basis: &Basis) -> Result<Self> {
        let space = basis.space();
        let kind = ModelKind::of_space(space)?;
        let undriven = params.with_drives([0.0; 3]);
        let h = basis.restrict(&hamiltonian_for(&undriven, space)?)?;

        let mut loss_terms: Vec<(Operator, f64)> = Vec::new();
        for (m, kappa) in params.kappas().into_iter().enumerate() {
            loss_terms.push((number(space, m)?, kappa));
        }
        let mut b_op = None;
        let (mut jump_down, mut jump_up) = (0.0, 0.0);
        if kind == ModelKind::Full {
            let b = annihilator(space, MODE_B)?;
            jump_down = params.gamma * (params.n_th + 1.0);
            jump_up = params.gamma * params.n_th;
            loss_terms.push((b.adjoint().multiply(&b)?, jump_down));
            loss_terms.push((b.multiply(&b.adjoint())?, jump_up));
            b_op = Some(basis.restrict(&b)?);
        }
        let refs: Vec<(&Operator, C64)> =
            loss_terms.iter().map(|(o, r)| (o, C64::new(-0.5 * r, 0.0))).collect();
        let loss = basis.restrict(&Operator::compose(&refs)?)?;

        let mut drive_terms = Vec::new();
        for (m, eps) in params.drives().into_iter().enumerate() {
            drive_terms.push((annihilator(space, m)?.adjoint(), eps));
        }
        let refs: Vec<(&Operator, C64)> =
            drive_terms.iter().map(|(o, e)| (o, C64::new(*e, 0.0))).collect();
        let v = basis.restrict(&Operator::compose(&refs)?)?;

        let mut sectors = Vec::new();
        for k in 0..=MAX_SECTOR as u32 {
            let states: Vec<usize> = (0..basis.dim()).filter(|&i| basis.photons(i) == k).collect();
            let hk = dense_block(&h, &states, &states);
            let lk = dense_block(&loss, &states, &states);
            let a = Mat::<c64>::from_fn(states.len(), states.len(), |r, c| {
                C64::new(0.0, -1.0) * hk[(r, c)] + lk[(r, c)]
            });
            let evd = a.eigen().map_err(|_| Error::SolverFailure { residual: f64::NAN })?;
            let eigvecs = evd.U().to_owned();
            let eigvals: Vec<C64> = evd.S().column_vector().iter().copied().collect();
            let eigvecs_inv = eigvecs.partial_piv_lu().inverse();
            let b = b_op.as_ref().map(|b| dense_block(b, &states, &states));
            sectors.push(Sector {
                states,
                a,
                eigvecs,
                eigvecs_inv,
                eigvals,
                b,
            });
        }
        let mut raise = vec![Mat::<c64>::zeros(0, 0)];
        for k in 1..=MAX_SECTOR {
            raise.push(dense_block(&v, &sectors[k].states, &sectors[k - 1].states));
        }
        Ok(Problem {
            sectors,
            raise,
            jump_down,
            jump_up,
        })
    }

    /// `A_n X + X A_m† + J(X)`.
    fn apply(&self, n: usize, m: usize, x: &Mat<c64>) -> Mat<c64> {
        let (sn, sm) = (&self.sectors[n], &self.sectors[m]);
        let mut out = &sn.a * x + x * sm.a.adjoint();
        if let (Some(bn), Some(bm)) = (&sn.b, &sm.b) {
            if self.jump_down != 0.0 {
                out += (bn * x * bm.adjoint()) * Scale(C64::new(self.jump_down, 0.0));
            }
            if self.jump_up != 0.0 {
                out += (bn.adjoint() * x * bm) * Scale(C64::new(self.jump_up, 0.0));
            }
        }
        out
    }

    /// Solves `A_n X + X A_m† = C` through the eigendecompositions.
    fn precondition(&self, n: usize, m: usize, c: &Mat<c64>) -> Mat<c64> {
        let (sn, sm) = (&self.sectors[n], &self.sectors[m]);
        let mut y = &sn.eigvecs_inv * c * sm.eigvecs_inv.adjoint();
        for i in 0..y.nrows() {
            for j in 0..y.ncols() {
                y[(i, j)] = y[(i, j)] / (sn.eigvals[i] + sm.eigvals[j].conj());
            }
        }
        &sn.eigvecs * &y * sm.eigvecs.adjoint()
    }

    fn solve(&self, n: usize, m: usize, rhs: &Mat<c64>) -> Result<Mat<c64>> {
        let (rows, cols) = (rhs.nrows(), rhs.ncols());
        let to_mat = |v: &[C64]| Mat::<c64>::from_fn(rows, cols, |i, j| v[i * cols + j]);
        let to_vec = |x: &Mat<c64>| -> Vec<C64> {
            let mut v = Vec::with_capacity(rows * cols);
            for i in 0..rows {
                for j in 0..cols {
                    v.push(x[(i, j)]);
                }
            }
            v
        };
        let b = to_vec(rhs);
        let x = gmres(
            |v| to_vec(&self.apply(n, m, &to_mat(v))),
            |v| to_vec(&self.precondition(n, m, &to_mat(v))),
            &b,
            1e-13,
            30,
            300,
        )?;
        Ok(to_mat(&x))
    }
}

fn dot(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

fn norm(u: &[C64]) -> f64 {
    sqrt(u.iter().map(|v| v.norm_sqr()).sum())
}

/// Restarted GMRES with right preconditioning.
fn gmres(
    apply: impl Fn(&[C64]) -> Vec<C64>,
    precond: impl Fn(&[C64]) -> Vec<C64>,
    b: &[C64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<Vec<C64>> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(vec![C64::new(0.0, 0.0); n]);
    }
    let mut x = precond(b);
    let mut iters = 0;
    loop {
        let ax = apply(&x);
        let r: Vec<C64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = norm(&r);
        if beta <= tol * bnorm {
            return Ok(x);
        }
        if iters >= max_iter {
            return Err(Error::SolverFailure { residual: beta / bnorm });
        }
        let mut basis: Vec<Vec<C64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess: Vec<Vec<C64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<C64> = Vec::new();
        let mut g = vec![C64::new(beta, 0.0)];
        for j in 0..restart {
            iters += 1;
            let mut w = apply(&precond(&basis[j]));
            let mut h = vec![C64::new(0.0, 0.0); j + 2];
            for (i, vi) in basis.iter().enumerate() {
                h[i] = dot(vi, &w);
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= h[i] * vk;
                }
            }
            let wn = norm(&w);
            h[j + 1] = C64::new(wn, 0.0);
            for i in 0..j {
                let t = h[i] * cs[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i].conj() * h[i] + h[i + 1] * cs[i];
                h[i] = t;
            }
            let (a, bb) = (h[j], h[j + 1]);
            let nu = sqrt(a.norm_sqr() + bb.norm_sqr());
            let (c, s) = if a.norm() == 0.0 {
                (0.0, C64::new(1.0, 0.0))
            } else {
                let phase = a / a.norm();
                (a.norm() / nu, phase * bb.conj() / nu)
            };
            h[j] = h[j] * c + s * h[j + 1];
            h[j + 1] = C64::new(0.0, 0.0);
            cs.push(c);
            sn.push(s);
            let gj = g[j];
            g[j] = gj * c;
            g.push(-s.conj() * gj);
            hess.push(h);
            if g[j + 1].norm() <= tol * bnorm || wn == 0.0 || iters >= max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // Back substitution on the triangular factor.
        let k = hess.len();
        let mut y = vec![C64::new(0.0, 0.0); k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for l in i + 1..k {
                s -= hess[l][i] * y[l];
            }
            y[i] = s / hess[i][i];
        }
        let mut z = vec![C64::new(0.0, 0.0); n];
        for (yi, vi) in y.iter().zip(&basis) {
            for (zk, vk) in z.iter_mut().zip(vi) {
                *zk += yi * vk;
            }
        }
        let dz = precond(&z);
        for (xk, dk) in x.iter_mut().zip(&dz) {
            *xk += dk;
        }
    }
}

/// Thermal state of a truncated oscillator as a diagonal over its levels.
fn thermal_diagonal(n_th: f64, levels: usize) -> Vec<f64> {
    let r = if n_th > 0.0 { n_th / (n_th + 1.0) } else { 0.0 };
    let mut p: Vec<f64> = Vec::with_capacity(levels);
    let mut w = 1.0;
    for _ in 0..levels {
        p.push(w);
        w *= r;
    }
    let z: f64 = p.iter().sum();
    p.iter().map(|v| v / z).collect()
}

/// Leading-order steady state for weak driving, on the states of `space`
/// with at most two photons. `space` is the four-mode optomechanical space or
/// the three-cavity Kerr space; each cavity needs dimension ≥ 3.
///
/// The block ρ_(0,0) is the thermal state of the mechanics (the vacuum for
/// n_th = 0), rescaled so that the total trace is one.
pub fn weak_drive_steady_state(params: &SystemParams, space: &FockSpace) -> Result<DensityMatrix> {
    params.validate()?;
    let kind = ModelKind::of_space(space)?;
    if space.dims()[..3].iter().any(|&d| d < MAX_SECTOR + 1) {
        return invalid(format!(
            "weak-drive solve needs cavity dimensions of at least {}",
            MAX_SECTOR + 1
        ));
    }
    let basis = Basis::photon_capped(space, MAX_SECTOR);
    let prob = Problem::new(params, &basis)?;

    // blocks[n][m] holds ρ_(n,m).
    let mut blocks: Vec<Vec<Option<Mat<c64>>>> = vec![vec![None; MAX_SECTOR + 1]; MAX_SECTOR + 1];
    let d0 = prob.sectors[0].states.len();
    let levels = match kind {
        ModelKind::Full => thermal_diagonal(params.n_th, d0),
        ModelKind::Kerr => vec![1.0],
    };
    blocks[0][0] = Some(Mat::<c64>::from_fn(d0, d0, |i, j| {
        if i == j {
            C64::new(levels[i], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    }));
    let i_unit = C64::new(0.0, 1.0);
    for k in 1..=2 * MAX_SECTOR {
        for n in (0..=MAX_SECTOR).rev() {
            if k < n || k - n > MAX_SECTOR || n < k - n {
                continue;
            }
            let m = k - n;
            let dn = prob.sectors[n].states.len();
            let dm = prob.sectors[m].states.len();
            let mut rhs = Mat::<c64>::zeros(dn, dm);
            if n > 0 {
                if let Some(prev) = &blocks[n - 1][m] {
                    rhs += (&prob.raise[n] * prev) * Scale(i_unit);
                }
            }
            if m > 0 {
                if let Some(prev) = &blocks[n][m - 1] {
                    rhs -= (prev * prob.raise[m].adjoint()) * Scale(i_unit);
                }
            }
            let x = prob.solve(n, m, &rhs)?;
            if n != m {
                blocks[m][n] = Some(x.adjoint().to_owned());
            }
            blocks[n][m] = Some(x);
        }
    }

    let d = basis.dim();
    let mut data = vec![C64::new(0.0, 0.0); d * d];
    let mut excited_trace = 0.0;
    for n in 0..=MAX_SECTOR {
        for m in 0..=MAX_SECTOR {
            let Some(x) = &blocks[n][m] else { continue };
            let (rs, cs) = (&prob.sectors[n].states, &prob.sectors[m].states);
            for (i, &r) in rs.iter().enumerate() {
                for (j, &c) in cs.iter().enumerate() {
                    data[r * d + c] = x[(i, j)];
                }
            }
            if n == m && n > 0 {
                excited_trace += (0..rs.len()).map(|i| x[(i, i)].re).sum::<f64>();
            }
        }
    }
    let vac_weight = 1.0 - excited_trace;
    for &r in &prob.sectors[0].states {
        for &c in &prob.sectors[0].states {
            data[r * d + c] *= vac_weight;
        }
    }
    let mut rho = DensityMatrix::from_data(&basis, data)?;
    rho.symmetrize();
    Ok(rho)
}
