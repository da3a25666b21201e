//! Truncated multimode Fock spaces and sparse operators on them.
//!
//! Basis states are ordered row-major over the modes: for dims
//! `(d_L, d_C, d_R, d_b)` the occupation `(n_L, n_C, n_R, n_b)` sits at
//! `((n_L·d_C + n_C)·d_R + n_R)·d_b + n_b`. Fewer modes follow the same rule.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;
use crate::sparse::CsrMatrix;
use crate::{invalid, Error, Result, C64};

pub const MAX_MODES: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FockSpace {
    dims: Vec<usize>,
    total_dim: usize,
}

impl FockSpace {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.len() > MAX_MODES {
            return invalid(format!("expected 1 to {MAX_MODES} modes, got {}", dims.len()));
        }
        if let Some(k) = dims.iter().position(|&d| d == 0) {
            return invalid(format!("mode {k} has dimension 0"));
        }
        let total_dim = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidArgument("space dimension overflows".into()))?;
        Ok(FockSpace {
            dims: dims.to_vec(),
            total_dim,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_modes(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    /// Basis index of an occupation tuple.
    pub fn index(&self, occ: &[usize]) -> Result<usize> {
        if occ.len() != self.dims.len() {
            return invalid(format!(
                "occupation has {} entries, space has {} modes",
                occ.len(),
                self.dims.len()
            ));
        }
        let mut idx = 0;
        for (k, (&n, &d)) in occ.iter().zip(&self.dims).enumerate() {
            if n >= d {
                return invalid(format!("occupation {n} of mode {k} exceeds cutoff {}", d - 1));
            }
            idx = idx * d + n;
        }
        Ok(idx)
    }

    /// Occupation tuple of a basis index.
    pub fn occupation(&self, mut index: usize) -> Vec<usize> {
        assert!(index < self.total_dim, "basis index out of range");
        let mut occ = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            occ[k] = index % self.dims[k];
            index /= self.dims[k];
        }
        occ
    }

    /// Occupation of a single mode for a basis index.
    pub fn mode_occupation(&self, index: usize, mode: usize) -> usize {
        let stride: usize = self.dims[mode + 1..].iter().product();
        (index / stride) % self.dims[mode]
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.dims.len() {
            return invalid(format!("mode {mode} out of range for {} modes", self.dims.len()));
        }
        Ok(())
    }

    /// Embeds a single-mode matrix (dense, row-major, `d×d`) into the space.
    fn embed(&self, mode: usize, local: &[C64]) -> CsrMatrix {
        let d = self.dims[mode];
        let before: usize = self.dims[..mode].iter().product();
        let after: usize = self.dims[mode + 1..].iter().product();
        let local = CsrMatrix::from_triplets(
            d,
            d,
            (0..d * d).map(|k| (k / d, k % d, local[k])),
        );
        CsrMatrix::identity(before)
            .kron(&local)
            .kron(&CsrMatrix::identity(after))
    }
}

/// Sparse complex operator on a [`FockSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: FockSpace,
    matrix: CsrMatrix,
}

impl Operator {
    pub fn from_matrix(space: &FockSpace, matrix: CsrMatrix) -> Result<Self> {
        let n = space.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return invalid(format!(
                "matrix is {}x{}, space dimension is {n}",
                matrix.nrows(),
                matrix.ncols()
            ));
        }
        Ok(Operator {
            space: space.clone(),
            matrix,
        })
    }

    pub fn from_triplets<I>(space: &FockSpace, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        let n = space.total_dim();
        let t: Vec<_> = triplets.into_iter().collect();
        if t.iter().any(|&(r, c, _)| r >= n || c >= n) {
            return invalid("triplet index outside the space");
        }
        Ok(Operator {
            space: space.clone(),
            matrix: CsrMatrix::from_triplets(n, n, t),
        })
    }

    pub fn zero(space: &FockSpace) -> Self {
        let n = space.total_dim();
        Operator {
            space: space.clone(),
            matrix: CsrMatrix::zeros(n, n),
        }
    }

    pub fn identity(space: &FockSpace) -> Self {
        Operator {
            space: space.clone(),
            matrix: CsrMatrix::identity(space.total_dim()),
        }
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.matrix.get(row, col)
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }

    pub fn adjoint(&self) -> Self {
        Operator {
            space: self.space.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Operator {
            space: self.space.clone(),
            matrix: self.matrix.scale(s),
        }
    }

    pub fn multiply(&self, other: &Operator) -> Result<Self> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch);
        }
        Ok(Operator {
            space: self.space.clone(),
            matrix: self.matrix.matmul(&other.matrix),
        })
    }

    /// `Σ coeff_k · op_k`.
    pub fn compose(terms: &[(&Operator, C64)]) -> Result<Self> {
        let Some((first, _)) = terms.first() else {
            return invalid("compose needs at least one term");
        };
        let space = &first.space;
        if terms.iter().any(|(op, _)| op.space != *space) {
            return Err(Error::SpaceMismatch);
        }
        let n = space.total_dim();
        let mats: Vec<_> = terms.iter().map(|(op, s)| (&op.matrix, *s)).collect();
        Ok(Operator {
            space: space.clone(),
            matrix: CsrMatrix::linear_combination((n, n), &mats),
        })
    }

    pub fn add(&self, other: &Operator) -> Result<Self> {
        let one = C64::new(1.0, 0.0);
        Self::compose(&[(self, one), (other, one)])
    }

    /// `[self, other]`.
    pub fn commutator(&self, other: &Operator) -> Result<Self> {
        let ab = self.multiply(other)?;
        let ba = other.multiply(self)?;
        Self::compose(&[(&ab, C64::new(1.0, 0.0)), (&ba, C64::new(-1.0, 0.0))])
    }

    pub fn apply(&self, state: &[C64]) -> Result<Vec<C64>> {
        if state.len() != self.space.total_dim() {
            return invalid("state length does not match the space");
        }
        Ok(self.matrix.matvec(state))
    }

    /// Largest entrywise modulus of `self - self†`.
    pub fn hermiticity_defect(&self) -> f64 {
        self.matrix.max_abs_diff(&self.matrix.adjoint())
    }

    pub fn max_abs_diff(&self, other: &Operator) -> Result<f64> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch);
        }
        Ok(self.matrix.max_abs_diff(&other.matrix))
    }

    pub fn to_dense(&self) -> Vec<C64> {
        self.matrix.to_dense()
    }
}

/// Annihilation operator of `mode`: `a|n⟩ = √n |n−1⟩`, identity elsewhere.
pub fn annihilator(space: &FockSpace, mode: usize) -> Result<Operator> {
    space.check_mode(mode)?;
    let n = space.total_dim();
    let stride: usize = space.dims[mode + 1..].iter().product();
    let t = (0..n).filter_map(|i| {
        let k = space.mode_occupation(i, mode);
        (k > 0).then(|| (i - stride, i, C64::new(sqrt(k as f64), 0.0)))
    });
    Ok(Operator {
        space: space.clone(),
        matrix: CsrMatrix::from_triplets(n, n, t),
    })
}

pub fn creator(space: &FockSpace, mode: usize) -> Result<Operator> {
    Ok(annihilator(space, mode)?.adjoint())
}

/// Number operator `a†a` of `mode`, built directly as a diagonal.
pub fn number(space: &FockSpace, mode: usize) -> Result<Operator> {
    space.check_mode(mode)?;
    let diag: Vec<C64> = (0..space.total_dim())
        .map(|i| C64::new(space.mode_occupation(i, mode) as f64, 0.0))
        .collect();
    Ok(Operator {
        space: space.clone(),
        matrix: CsrMatrix::from_diagonal(&diag),
    })
}

/// Displacement `exp(β(b − b†))` on `mode`, from the projected ladder
/// operators of the truncated mode.
///
/// The dense single-mode exponential is computed by scaling and squaring a
/// Taylor series; the generator is real antisymmetric, so the result is
/// orthogonal up to rounding. Accuracy relative to the untruncated
/// displacement needs a cutoff well above `β² + 1`.
pub fn displacement(space: &FockSpace, mode: usize, beta: f64) -> Result<Operator> {
    space.check_mode(mode)?;
    let d = space.dims[mode];
    let mut gen = vec![0.0; d * d];
    for n in 1..d {
        let s = beta * sqrt(n as f64);
        gen[(n - 1) * d + n] = s; // β b
        gen[n * d + (n - 1)] = -s; // −β b†
    }
    let local = expm_real(&gen, d);
    let local: Vec<C64> = local.into_iter().map(|v| C64::new(v, 0.0)).collect();
    Ok(Operator {
        space: space.clone(),
        matrix: space.embed(mode, &local),
    })
}

fn matmul_dense(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

/// Matrix exponential of a small dense real matrix; tolerance 1e−12 on the
/// Taylor remainder after scaling.
fn expm_real(a: &[f64], n: usize) -> Vec<f64> {
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| a[i * n + j].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm1 * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let scaled: Vec<f64> = a.iter().map(|v| v * scale).collect();
    let mut result = vec![0.0; n * n];
    let mut term = vec![0.0; n * n];
    for i in 0..n {
        result[i * n + i] = 1.0;
        term[i * n + i] = 1.0;
    }
    for k in 1..=40 {
        term = matmul_dense(&term, &scaled, n);
        let inv = 1.0 / k as f64;
        let mut tnorm: f64 = 0.0;
        for (t, r) in term.iter_mut().zip(result.iter_mut()) {
            *t *= inv;
            *r += *t;
            tnorm = tnorm.max(t.abs());
        }
        if tnorm < 1e-20 {
            break;
        }
    }
    for _ in 0..squarings {
        result = matmul_dense(&result, &result, n);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn basis(space: &FockSpace, occ: &[usize]) -> Vec<C64> {
        let mut v = vec![c(0.0); space.total_dim()];
        v[space.index(occ).unwrap()] = c(1.0);
        v
    }

    #[test]
    fn make_space_examples() {
        assert_eq!(FockSpace::new(&[4, 4, 4, 8]).unwrap().total_dim(), 512);
        assert_eq!(FockSpace::new(&[2]).unwrap().total_dim(), 2);
        assert_eq!(FockSpace::new(&[3, 3]).unwrap().index(&[2, 1]).unwrap(), 7);
        assert!(FockSpace::new(&[]).is_err());
        assert!(FockSpace::new(&[3, 0]).is_err());
        assert!(FockSpace::new(&[2, 2, 2, 2, 2]).is_err());
    }

    #[test]
    fn ladder_action() {
        let s = FockSpace::new(&[3]).unwrap();
        let a = annihilator(&s, 0).unwrap();
        let out = a.apply(&basis(&s, &[2])).unwrap();
        assert!((out[1] - c(2f64.sqrt())).norm() < 1e-15);
        assert_eq!(out[0], c(0.0));
        assert_eq!(out[2], c(0.0));
        assert!(a.apply(&basis(&s, &[0])).unwrap().iter().all(|v| v.norm() == 0.0));
        let up = a.adjoint().apply(&basis(&s, &[0])).unwrap();
        assert_eq!(up, basis(&s, &[1]));
        assert!(annihilator(&s, 1).is_err());
    }

    #[test]
    fn two_mode_matrix_element() {
        let s = FockSpace::new(&[3, 3]).unwrap();
        let a1 = annihilator(&s, 1).unwrap();
        let r = s.index(&[1, 0]).unwrap();
        let col = s.index(&[1, 1]).unwrap();
        assert_eq!(a1.get(r, col), c(1.0));
    }

    #[test]
    fn number_and_commutator() {
        let s = FockSpace::new(&[5]).unwrap();
        let a = annihilator(&s, 0).unwrap();
        let ad = a.adjoint();
        let n = ad.multiply(&a).unwrap();
        for k in 0..5 {
            assert!((n.get(k, k) - c(k as f64)).norm() < 1e-14);
        }
        assert!(n.max_abs_diff(&number(&s, 0).unwrap()).unwrap() < 1e-14);
        let comm = a.commutator(&ad).unwrap();
        for k in 0..4 {
            assert!((comm.get(k, k) - c(1.0)).norm() < 1e-14);
        }
        assert!((comm.get(4, 4) - c(-4.0)).norm() < 1e-14);
        assert_eq!(comm.nnz(), 5);
    }

    #[test]
    fn space_mismatch_is_reported() {
        let s1 = FockSpace::new(&[3]).unwrap();
        let s2 = FockSpace::new(&[4]).unwrap();
        let a = annihilator(&s1, 0).unwrap();
        let b = annihilator(&s2, 0).unwrap();
        assert_eq!(a.multiply(&b), Err(Error::SpaceMismatch));
        assert_eq!(Operator::compose(&[(&a, c(1.0)), (&b, c(1.0))]), Err(Error::SpaceMismatch));
    }

    #[test]
    fn displacement_zero_is_identity() {
        let s = FockSpace::new(&[3, 6]).unwrap();
        let d = displacement(&s, 1, 0.0).unwrap();
        assert_eq!(d.max_abs_diff(&Operator::identity(&s)).unwrap(), 0.0);
    }

    #[test]
    fn displacement_vacuum_overlap() {
        let s = FockSpace::new(&[40]).unwrap();
        let d = displacement(&s, 0, 0.2).unwrap();
        assert!((d.get(0, 0).re - (-0.02f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn displacement_matches_plain_taylor_series() {
        // Oracle: 60-term Taylor series of the exponent without scaling.
        let d = 12;
        let beta = 0.3;
        let s = FockSpace::new(&[d]).unwrap();
        let a = annihilator(&s, 0).unwrap();
        let gen = Operator::compose(&[(&a, c(beta)), (&a.adjoint(), c(-beta))]).unwrap();
        let mut term = Operator::identity(&s);
        let mut sum = Operator::identity(&s);
        for k in 1..=60 {
            term = term.multiply(&gen).unwrap().scale(c(1.0 / k as f64));
            sum = sum.add(&term).unwrap();
        }
        let disp = displacement(&s, 0, beta).unwrap();
        assert!(disp.max_abs_diff(&sum).unwrap() <= 1e-10);
    }

    #[test]
    fn displacement_inverse() {
        let beta: f64 = 0.5;
        let cutoff = (10.0 * (beta * beta + 1.0)).ceil() as usize;
        let s = FockSpace::new(&[2, cutoff]).unwrap();
        let p = displacement(&s, 1, beta).unwrap();
        let m = displacement(&s, 1, -beta).unwrap();
        let prod = p.multiply(&m).unwrap();
        assert!(prod.max_abs_diff(&Operator::identity(&s)).unwrap() < 1e-8);
    }
}
