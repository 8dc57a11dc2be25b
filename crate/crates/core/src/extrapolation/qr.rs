use super::VeError;
use crate::linalg::{axpy, dot, norm, Mat};

/// Absolute floor on the first pivot. Below it the difference window is
/// treated as identically zero.
pub const ZERO_COLUMN_FLOOR: f64 = 1e-300;

/// Thin QR factorization `U = Q R` produced by modified Gram-Schmidt.
///
/// `q` holds only the accepted columns (`effective_rank` of them). When the
/// factorization truncates at column `i`, column `i` of `r` still carries its
/// projections `r_ji` and the (small) residual norm `r_ii`, which is what
/// lets MPE solve for the dependent column.
#[derive(Debug, Clone)]
pub struct QrFactorization {
    q: Vec<Vec<f64>>,
    r: Mat,
    effective_rank: usize,
    rank_tolerance: f64,
}

impl QrFactorization {
    pub fn q(&self) -> &[Vec<f64>] {
        &self.q
    }

    pub fn r(&self) -> &Mat {
        &self.r
    }

    /// Number of columns of the factored matrix (κ+1).
    pub fn columns(&self) -> usize {
        self.r.cols()
    }

    /// κ for the window this factorization came from.
    pub fn kappa(&self) -> usize {
        self.r.cols() - 1
    }

    pub fn effective_rank(&self) -> usize {
        self.effective_rank
    }

    pub fn rank_tolerance(&self) -> f64 {
        self.rank_tolerance
    }

    pub fn is_full_rank(&self) -> bool {
        self.effective_rank == self.columns()
    }
}

/// Modified Gram-Schmidt QR of the column list `u`.
///
/// A column whose residual drops below half its original norm gets a second
/// orthogonalization pass, so orthogonality holds to working precision well
/// beyond what single-pass MGS gives on ill-conditioned windows. The `r`
/// entries accumulate both passes, so `Q R = U` still holds.
///
/// Factorization stops at the first pivot with `r_ii < rank_tolerance * r_11`;
/// `effective_rank` then counts the accepted columns before it.
pub fn mgs_qr(u: &[Vec<f64>], rank_tolerance: f64) -> Result<QrFactorization, VeError> {
    if !(rank_tolerance > 0.0 && rank_tolerance.is_finite()) {
        return Err(VeError::InvalidTolerance(rank_tolerance));
    }
    let cols = u.len();
    if cols == 0 {
        return Err(VeError::EmptyWindow);
    }
    let n = u[0].len();
    if u.iter().any(|c| c.len() != n) {
        return Err(VeError::LengthMismatch);
    }

    let mut r = Mat::zeros(cols, cols);
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(cols);
    let mut effective_rank = cols;

    for i in 0..cols {
        let mut v = u[i].clone();
        let original = norm(&v);
        for (j, qj) in q.iter().enumerate() {
            let rji = dot(qj, &v);
            r[(j, i)] = rji;
            axpy(-rji, qj, &mut v);
        }
        let mut rii = norm(&v);
        if i > 0 && rii < 0.5 * original {
            for (j, qj) in q.iter().enumerate() {
                let s = dot(qj, &v);
                r[(j, i)] += s;
                axpy(-s, qj, &mut v);
            }
            rii = norm(&v);
        }
        r[(i, i)] = rii;

        if i == 0 {
            if !(rii >= ZERO_COLUMN_FLOOR) {
                return Err(VeError::ZeroFirstColumn);
            }
        } else if rii < rank_tolerance * r[(0, 0)] {
            effective_rank = i;
            break;
        }
        let inv = 1.0 / rii;
        v.iter_mut().for_each(|x| *x *= inv);
        q.push(v);
    }

    Ok(QrFactorization {
        q,
        r,
        effective_rank,
        rank_tolerance,
    })
}
