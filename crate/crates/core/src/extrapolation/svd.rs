use super::VeError;
use crate::linalg::{axpy, dot, norm, Mat};

pub const MAX_SWEEPS: usize = 100;
pub const MAX_ORDER: usize = 64;

/// `R = U Σ Vᵀ` with singular values sorted in decreasing order.
#[derive(Debug, Clone)]
pub struct SmallSvd {
    pub u: Mat,
    pub singular_values: Vec<f64>,
    pub v: Mat,
}

/// One-sided (Hestenes) Jacobi SVD of a small square matrix.
///
/// Columns of a working copy are rotated pairwise until mutually orthogonal;
/// the accumulated rotations form `V`, column norms are the singular values.
/// Left vectors of exactly-zero singular values are completed from the
/// standard basis so `U` stays orthogonal.
pub fn small_svd(r: &Mat) -> Result<SmallSvd, VeError> {
    let n = r.cols();
    if r.rows() != n || n == 0 || n > MAX_ORDER {
        return Err(VeError::SvdShape(r.rows(), n));
    }

    // Work on columns.
    let mut a: Vec<Vec<f64>> = (0..n).map(|j| r.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let eps = f64::EPSILON;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(VeError::SvdNoConvergence(MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let sigma: Vec<f64> = a.iter().map(|c| norm(c)).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));

    let mut u_cols: Vec<Option<Vec<f64>>> = Vec::with_capacity(n);
    let mut singular_values = Vec::with_capacity(n);
    let mut v_mat = Mat::zeros(n, n);
    for (k, &idx) in order.iter().enumerate() {
        let s = sigma[idx];
        singular_values.push(s);
        for i in 0..n {
            v_mat[(i, k)] = v[idx][i];
        }
        if s > 1e-290 {
            u_cols.push(Some(a[idx].iter().map(|x| x / s).collect()));
        } else {
            u_cols.push(None);
        }
    }
    let u_cols = complete_basis(u_cols, n);
    let mut u_mat = Mat::zeros(n, n);
    for (k, col) in u_cols.iter().enumerate() {
        for i in 0..n {
            u_mat[(i, k)] = col[i];
        }
    }

    Ok(SmallSvd {
        u: u_mat,
        singular_values,
        v: v_mat,
    })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let cp = &mut head[p];
    let cq = &mut tail[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fills missing columns with orthonormalized standard basis vectors.
fn complete_basis(cols: Vec<Option<Vec<f64>>>, n: usize) -> Vec<Vec<f64>> {
    let mut known: Vec<Vec<f64>> = cols.iter().flatten().cloned().collect();
    let mut out = Vec::with_capacity(n);
    for col in cols {
        match col {
            Some(c) => out.push(c),
            None => {
                let mut best: Option<(f64, Vec<f64>)> = None;
                for k in 0..n {
                    let mut e = vec![0.0; n];
                    e[k] = 1.0;
                    for _ in 0..2 {
                        for b in &known {
                            let s = dot(b, &e);
                            axpy(-s, b, &mut e);
                        }
                    }
                    let nr = norm(&e);
                    if best.as_ref().map_or(true, |(bn, _)| nr > *bn) {
                        best = Some((nr, e));
                    }
                }
                let (nr, mut e) = best.expect("n > 0");
                e.iter_mut().for_each(|x| *x /= nr);
                known.push(e.clone());
                out.push(e);
            }
        }
    }
    out
}
