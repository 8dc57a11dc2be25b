//! Vector extrapolation: MPE, RRE and SVD-MPE over a window of iterates.
//!
//! A window `x_m, …, x_{m+κ+1}` is turned into the difference matrix
//! `U = [u_m … u_{m+κ}]`, factored by modified Gram-Schmidt, and the weights
//! `γ` (Σγ = 1) of the chosen method are used to form `Σ γ_i x_{m+i}` through
//! the `R` factor rather than by touching the stored iterates again.

mod qr;
mod svd;
mod weights;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::linalg::sub;

pub use qr::{mgs_qr, QrFactorization, ZERO_COLUMN_FLOOR};
pub use svd::{small_svd, SmallSvd};
pub use weights::{
    gamma_mpe, gamma_rre, gamma_svdmpe, reconstruct, reconstruction_coefficients,
    ExtrapolationWeights, ReconstructionCoefficients, DEGENERATE_SUM_TOL,
};

/// Default pivot threshold relative to `r_11`.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum VeError {
    #[error("window needs kappa + 2 = {expected} vectors, got {got}")]
    WindowSize { expected: usize, got: usize },
    #[error("window is empty")]
    EmptyWindow,
    #[error("vectors in the window have different lengths")]
    LengthMismatch,
    #[error("window contains non-finite entries")]
    NonFinite,
    #[error("kappa must be at least 1")]
    KappaTooSmall,
    #[error("rank tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("first difference vector is zero: sequence is stationary")]
    ZeroFirstColumn,
    #[error("difference matrix has rank {effective_rank}, window order kappa = {kappa}")]
    RankDeficient { kappa: usize, effective_rank: usize },
    #[error("{0} weights do not exist: coefficient sum vanishes")]
    DegenerateSum(VeMethod),
    #[error("SVD needs a square matrix of order 1..=64, got {0}x{1}")]
    SvdShape(usize, usize),
    #[error("Jacobi SVD did not converge after {0} sweeps")]
    SvdNoConvergence(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VeMethod {
    Mpe,
    Rre,
    SvdMpe,
}

impl fmt::Display for VeMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VeMethod::Mpe => "MPE",
            VeMethod::Rre => "RRE",
            VeMethod::SvdMpe => "SVD-MPE",
        })
    }
}

impl FromStr for VeMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mpe" => Ok(VeMethod::Mpe),
            "rre" => Ok(VeMethod::Rre),
            "svdmpe" | "svd-mpe" => Ok(VeMethod::SvdMpe),
            other => Err(format!("unknown extrapolation method `{other}`")),
        }
    }
}

/// The iterates `x_m, …, x_{m+κ+1}` feeding one extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSequenceWindow {
    m: usize,
    kappa: usize,
    vectors: Vec<Vec<f64>>,
}

impl VectorSequenceWindow {
    pub fn new(m: usize, kappa: usize, vectors: Vec<Vec<f64>>) -> Result<Self, VeError> {
        if kappa == 0 {
            return Err(VeError::KappaTooSmall);
        }
        if vectors.len() != kappa + 2 {
            return Err(VeError::WindowSize {
                expected: kappa + 2,
                got: vectors.len(),
            });
        }
        let n = vectors[0].len();
        if n == 0 {
            return Err(VeError::EmptyWindow);
        }
        if vectors.iter().any(|v| v.len() != n) {
            return Err(VeError::LengthMismatch);
        }
        if vectors.iter().flatten().any(|x| !x.is_finite()) {
            return Err(VeError::NonFinite);
        }
        Ok(Self { m, kappa, vectors })
    }

    /// Window over the first `kappa + 2` entries of a longer sequence.
    pub fn from_sequence(m: usize, kappa: usize, sequence: &[Vec<f64>]) -> Result<Self, VeError> {
        let end = (kappa + 2).min(sequence.len());
        Self::new(m, kappa, sequence[..end].to_vec())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn dimension(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn first(&self) -> &[f64] {
        &self.vectors[0]
    }

    pub fn last(&self) -> &[f64] {
        &self.vectors[self.kappa + 1]
    }

    /// Leading sub-window of order `kappa` (same `m`).
    pub fn truncated(&self, kappa: usize) -> Result<Self, VeError> {
        Self::new(self.m, kappa, self.vectors[..kappa + 2].to_vec())
    }

    pub fn into_vectors(self) -> Vec<Vec<f64>> {
        self.vectors
    }
}

/// Columns `u_{m+i} = x_{m+i+1} - x_{m+i}`, `i = 0..=κ`.
pub fn build_difference_matrix(window: &VectorSequenceWindow) -> Vec<Vec<f64>> {
    window
        .vectors
        .windows(2)
        .map(|pair| sub(&pair[1], &pair[0]))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtrapolationStatus {
    /// A weighted combination of the window was formed.
    Extrapolated,
    /// The window is stationary; the returned vector is `x_m`.
    Converged,
    /// No weights could be formed; the returned vector is the last iterate.
    NoExtrapolation,
}

#[derive(Debug, Clone)]
pub struct Extrapolation {
    pub x: Vec<f64>,
    pub status: ExtrapolationStatus,
    pub weights: Option<ExtrapolationWeights>,
    /// Window order actually used (smaller than requested after rank shrinking).
    pub kappa_used: usize,
}

fn weights_for(method: VeMethod, qr: &QrFactorization) -> Result<ExtrapolationWeights, VeError> {
    match method {
        VeMethod::Mpe => gamma_mpe(qr),
        VeMethod::Rre => gamma_rre(qr),
        VeMethod::SvdMpe => gamma_svdmpe(qr),
    }
}

/// Full pipeline for one window: differences, QR, weights, reconstruction.
///
/// MPE and SVD-MPE fall back to RRE when their weights do not exist (or the
/// small SVD fails). A window whose differences span fewer than κ dimensions
/// is re-extrapolated with κ equal to that rank.
pub fn extrapolate_once(
    window: &VectorSequenceWindow,
    method: VeMethod,
    rank_tolerance: f64,
) -> Result<Extrapolation, VeError> {
    let u = build_difference_matrix(window);
    let qr = match mgs_qr(&u, rank_tolerance) {
        Ok(qr) => qr,
        Err(VeError::ZeroFirstColumn) => {
            return Ok(Extrapolation {
                x: window.first().to_vec(),
                status: ExtrapolationStatus::Converged,
                weights: None,
                kappa_used: window.kappa(),
            })
        }
        Err(e) => return Err(e),
    };

    let kappa = window.kappa();
    if qr.effective_rank() < kappa {
        let reduced = window.truncated(qr.effective_rank())?;
        return extrapolate_once(&reduced, method, rank_tolerance);
    }

    let weights = match weights_for(method, &qr) {
        Ok(w) => Ok(w),
        Err(VeError::DegenerateSum(_) | VeError::SvdNoConvergence(_))
            if method != VeMethod::Rre =>
        {
            gamma_rre(&qr).map(|mut w| {
                w.requested = Some(method);
                w
            })
        }
        Err(e) => Err(e),
    };

    match weights {
        Ok(w) => Ok(Extrapolation {
            x: reconstruct(window, &qr, &w),
            status: ExtrapolationStatus::Extrapolated,
            weights: Some(w),
            kappa_used: kappa,
        }),
        Err(VeError::DegenerateSum(_)) => Ok(Extrapolation {
            x: window.last().to_vec(),
            status: ExtrapolationStatus::NoExtrapolation,
            weights: None,
            kappa_used: kappa,
        }),
        Err(e) => Err(e),
    }
}
