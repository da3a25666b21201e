use alloc::vec;
use alloc::vec::Vec;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use super::{DensityMatrix, SuperOperator};
use crate::math::{powi, sqrt};
use crate::{Error, Result, C64};

/// Steady state by sparse LU with one diagonal row replaced by the trace
/// condition.
///
/// Under weak driving the populations of successive photon sectors differ by
/// factors of (ε/κ)², far below the rounding level of the vacuum entry. The
/// unknowns are therefore rescaled by `s^(n_r + n_c)`, with `n` the photon
/// number of the row/column state and `s` the drive scale of `L`, and the
/// equations by the inverse factor. The rescaled entries are all of order κ,
/// so the factorization resolves the small sectors to full relative
/// precision.
pub fn steady_state(l: &SuperOperator) -> Result<DensityMatrix> {
    let basis = l.basis();
    let d = basis.dim();
    let n = d * d;
    let s = l.drive_scale();
    let grade = |q: usize| (basis.photons(q / d) + basis.photons(q % d)) as i32;

    // Replace the row of the emptiest diagonal state.
    let anchor = (0..d).min_by_key(|&i| basis.photons(i)).unwrap_or(0);
    let anchor_row = anchor * d + anchor;

    let mut trips = Vec::with_capacity(l.matrix().nnz() + d);
    for (r, c, v) in l.matrix().triplets() {
        if r == anchor_row {
            continue;
        }
        let w = v * powi(s, grade(c) - grade(r));
        trips.push(Triplet::new(r, c, w));
    }
    for i in 0..d {
        trips.push(Triplet::new(anchor_row, i * d + i, C64::new(powi(s, grade(i * d + i)), 0.0)));
    }
    let m = SparseColMat::<usize, c64>::try_new_from_triplets(n, n, &trips)
        .map_err(|_| Error::SolverFailure { residual: f64::NAN })?;
    let lu = m.sp_lu().map_err(|_| Error::NonUniqueSteadyState)?;
    let mut rhs = Mat::<c64>::zeros(n, 1);
    rhs[(anchor_row, 0)] = C64::new(1.0, 0.0);
    let y = lu.solve(&rhs);

    let mut x = vec![C64::new(0.0, 0.0); n];
    for (q, xq) in x.iter_mut().enumerate() {
        *xq = y[(q, 0)] * powi(s, grade(q));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonUniqueSteadyState);
    }
    let residual = sqrt(l.matrix().matvec(&x).iter().map(|v| v.norm_sqr()).sum());
    let xnorm = sqrt(x.iter().map(|v| v.norm_sqr()).sum());
    if !(residual <= 1e-10 * l.frobenius_norm().max(f64::MIN_POSITIVE) * xnorm) {
        return Err(Error::SolverFailure { residual });
    }
    let mut rho = DensityMatrix::from_data(basis, x)?;
    rho.symmetrize();
    rho.normalize_trace();
    Ok(rho)
}
