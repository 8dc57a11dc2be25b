use super::qr::QrFactorization;
use super::svd::small_svd;
use super::{VeError, VeMethod, VectorSequenceWindow};
use crate::linalg::{axpy, solve_upper, solve_upper_transposed};

/// Relative threshold on `|Σ c|` below which MPE / SVD-MPE weights do not exist.
pub const DEGENERATE_SUM_TOL: f64 = 1e-12;

/// Raw coefficients `c` and normalized weights `γ` (Σγ = 1) for one
/// extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolationWeights {
    /// Method that actually produced `gamma`.
    pub method: VeMethod,
    /// Set when `method` is a fallback for a method that did not exist.
    pub requested: Option<VeMethod>,
    /// MPE: `c` with `c_κ = 1`. RRE: `d`. SVD-MPE: last right singular vector.
    pub c: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Σ|γ_i|
    pub stability_sum: f64,
}

impl ExtrapolationWeights {
    fn normalize(method: VeMethod, c: Vec<f64>, sum: f64) -> Self {
        let gamma: Vec<f64> = c.iter().map(|ci| ci / sum).collect();
        let stability_sum = gamma.iter().map(|g| g.abs()).sum();
        Self {
            method,
            requested: None,
            c,
            gamma,
            stability_sum,
        }
    }

    pub fn kappa(&self) -> usize {
        self.gamma.len() - 1
    }

    pub fn gamma_sum(&self) -> f64 {
        self.gamma.iter().sum()
    }
}

/// ξ and η from the reconstruction step.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionCoefficients {
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
}

fn require_rank(qr: &QrFactorization) -> Result<usize, VeError> {
    let kappa = qr.kappa();
    if kappa == 0 {
        return Err(VeError::KappaTooSmall);
    }
    // Only the last column may be dependent on the others; that is the case
    // where the window already determines the limit exactly.
    if qr.effective_rank() < kappa {
        return Err(VeError::RankDeficient {
            kappa,
            effective_rank: qr.effective_rank(),
        });
    }
    Ok(kappa)
}

/// MPE: back-substitute `R_{κ-1} c' = -r_{κ+1}`, set `c_κ = 1`, normalize.
pub fn gamma_mpe(qr: &QrFactorization) -> Result<ExtrapolationWeights, VeError> {
    let kappa = require_rank(qr)?;
    let r = qr.r();
    let rhs: Vec<f64> = (0..kappa).map(|i| -r[(i, kappa)]).collect();
    let mut c = solve_upper(r, &rhs, kappa);
    c.push(1.0);
    let sum: f64 = c.iter().sum();
    let l1: f64 = c.iter().map(|x| x.abs()).sum();
    if !(sum.abs() >= DEGENERATE_SUM_TOL * l1) {
        return Err(VeError::DegenerateSum(VeMethod::Mpe));
    }
    Ok(ExtrapolationWeights::normalize(VeMethod::Mpe, c, sum))
}

/// RRE: solve `RᵀR d = 1` by one forward and one backward substitution,
/// `γ = d / Σd`.
///
/// When only the last pivot is deficient the constrained minimum of `‖Uγ‖`
/// is zero and is attained by the MPE null vector; if that one has zero sum
/// the minimizer reduces to RRE over the leading κ columns.
pub fn gamma_rre(qr: &QrFactorization) -> Result<ExtrapolationWeights, VeError> {
    let kappa = require_rank(qr)?;
    if qr.is_full_rank() {
        return rre_leading(qr, kappa + 1);
    }
    match gamma_mpe(qr) {
        Ok(mut w) => {
            w.method = VeMethod::Rre;
            Ok(w)
        }
        Err(VeError::DegenerateSum(_)) => rre_leading(qr, kappa),
        Err(e) => Err(e),
    }
}

fn rre_leading(qr: &QrFactorization, n: usize) -> Result<ExtrapolationWeights, VeError> {
    let r = qr.r();
    let ones = vec![1.0; n];
    let w = solve_upper_transposed(r, &ones, n);
    let mut d = solve_upper(r, &w, n);
    let sum: f64 = d.iter().sum();
    if !(sum > 0.0 && sum.is_finite()) {
        // Σd = ‖R⁻ᵀ1‖² > 0 analytically; only reachable through overflow.
        return Err(VeError::DegenerateSum(VeMethod::Rre));
    }
    d.resize(qr.columns(), 0.0);
    Ok(ExtrapolationWeights::normalize(VeMethod::Rre, d, sum))
}

/// SVD-MPE: right singular vector of the smallest singular value of `R`,
/// normalized by its entry sum.
pub fn gamma_svdmpe(qr: &QrFactorization) -> Result<ExtrapolationWeights, VeError> {
    let kappa = require_rank(qr)?;
    let svd = small_svd(qr.r())?;
    let v = svd.v.column(kappa);
    let sum: f64 = v.iter().sum();
    if !(sum.abs() >= DEGENERATE_SUM_TOL) {
        return Err(VeError::DegenerateSum(VeMethod::SvdMpe));
    }
    Ok(ExtrapolationWeights::normalize(VeMethod::SvdMpe, v, sum))
}

pub fn reconstruction_coefficients(
    qr: &QrFactorization,
    w: &ExtrapolationWeights,
) -> ReconstructionCoefficients {
    let kappa = w.kappa();
    let mut xi = Vec::with_capacity(kappa);
    let mut acc = 1.0;
    for g in &w.gamma[..kappa] {
        acc -= g;
        xi.push(acc);
    }
    let r = qr.r();
    let eta = (0..kappa)
        .map(|i| (i..kappa).map(|j| r[(i, j)] * xi[j]).sum())
        .collect();
    ReconstructionCoefficients { xi, eta }
}

/// `x_m + Q_{κ-1} η`, which equals `Σ γ_i x_{m+i}`.
pub fn reconstruct(
    window: &VectorSequenceWindow,
    qr: &QrFactorization,
    w: &ExtrapolationWeights,
) -> Vec<f64> {
    let coeffs = reconstruction_coefficients(qr, w);
    let mut x = window.vectors()[0].clone();
    for (qj, eta) in qr.q().iter().zip(&coeffs.eta) {
        if *eta != 0.0 {
            axpy(*eta, qj, &mut x);
        }
    }
    x
}
