//! The RED objective
//!
//! ```text
//! E(x) = ‖Hx - y‖² / (2σ²) + (α/2) xᵀ(x - f(x))
//! ```
//!
//! with gradient `Hᵀ(Hx - y)/σ² + α(x - f(x))` and the fixed-point step
//! `(HᵀH/σ² + αI) x_{k+1} = Hᵀy/σ² + α f(x_k)`.

mod checks;

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::denoise::Denoiser;
use crate::driver::{BoxError, FixedPointProblem};
use crate::imaging::{Image, ImagingError, LinearOperator, OperatorKind, Spectrum};
use crate::linalg::{axpy, dot, norm};

pub use checks::{check_local_homogeneity, check_passivity, PassivityEstimate, HOMOGENEITY_EPS};

/// Relative residual the CG solve aims for.
pub const CG_TOLERANCE: f64 = 1e-6;
/// Relative residual above which an unfinished CG solve is an error.
pub const CG_FAILURE_RESIDUAL: f64 = 1e-4;
pub const CG_MAX_ITERATIONS: usize = 200;

/// Conjugate-gradient settings for the blur + downsample fixed-point step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSettings {
    pub tolerance: f64,
    pub failure_residual: f64,
    pub max_iterations: usize,
}

impl Default for CgSettings {
    fn default() -> Self {
        Self {
            tolerance: CG_TOLERANCE,
            failure_residual: CG_FAILURE_RESIDUAL,
            max_iterations: CG_MAX_ITERATIONS,
        }
    }
}

#[derive(Debug, Error)]
pub enum RedError {
    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("alpha must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error("conjugate gradients stopped after {iterations} iterations at relative residual {residual:e}")]
    CgNoConvergence { iterations: usize, residual: f64 },
}

/// Default gradient step `σ² / (1 + 2ασ²)`.
pub fn default_step_size(sigma: f64, alpha: f64) -> f64 {
    let s2 = sigma * sigma;
    s2 / (1.0 + 2.0 * alpha * s2)
}

#[derive(Clone)]
pub struct RedObjective {
    forward: LinearOperator,
    y: Image,
    sigma: f64,
    alpha: f64,
    denoiser: Arc<dyn Denoiser>,
    /// `Hᵀy / σ²`
    rhs_data: Image,
    reference: Option<Image>,
    cg: CgSettings,
}

impl std::fmt::Debug for RedObjective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RedObjective")
            .field("kind", &self.forward.kind())
            .field("input_dims", &self.forward.input_dims())
            .field("sigma", &self.sigma)
            .field("alpha", &self.alpha)
            .field("denoiser", &self.denoiser.name())
            .finish()
    }
}

impl RedObjective {
    pub fn new(
        forward: LinearOperator,
        y: Image,
        sigma: f64,
        alpha: f64,
        denoiser: Arc<dyn Denoiser>,
    ) -> Result<Self, RedError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(RedError::InvalidSigma(sigma));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(RedError::InvalidAlpha(alpha));
        }
        y.ensure_dims(forward.output_dims())?;
        let inv_s2 = 1.0 / (sigma * sigma);
        let rhs_data = forward.apply_adjoint(&y)?.map(|v| v * inv_s2);
        Ok(Self {
            forward,
            y,
            sigma,
            alpha,
            denoiser,
            rhs_data,
            reference: None,
            cg: CgSettings::default(),
        })
    }

    /// Ground truth used for PSNR in traces.
    pub fn with_reference(mut self, reference: Image) -> Result<Self, RedError> {
        reference.ensure_dims(self.forward.input_dims())?;
        self.reference = Some(reference);
        Ok(self)
    }

    pub fn with_cg_settings(mut self, cg: CgSettings) -> Self {
        self.cg = cg;
        self
    }

    pub fn forward(&self) -> &LinearOperator {
        &self.forward
    }

    pub fn y(&self) -> &Image {
        &self.y
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn denoiser(&self) -> &dyn Denoiser {
        self.denoiser.as_ref()
    }

    pub fn reference_image(&self) -> Option<&Image> {
        self.reference.as_ref()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.forward.input_dims()
    }

    /// `s² Hᵀy` for a ×s downsampling operator (plain `Hᵀy` for blur):
    /// zero-filling leaves one sample in `s²`, the factor restores the mean
    /// intensity.
    pub fn adjoint_initialization(&self) -> Image {
        let scale = match self.forward.kind() {
            OperatorKind::Blur => 1.0,
            OperatorKind::BlurDownsample { factor } => (factor * factor) as f64,
        };
        let s2 = self.sigma * self.sigma;
        self.rhs_data.map(|v| v * s2 * scale)
    }

    /// `‖Hx - y‖² / (2σ²)`
    pub fn data_fidelity(&self, x: &Image) -> Result<f64, RedError> {
        let r = self.residual(x)?;
        Ok(dot(r.as_slice(), r.as_slice()) / (2.0 * self.sigma * self.sigma))
    }

    /// `½ xᵀ(x - f(x))`
    pub fn regularizer(&self, x: &Image) -> Result<f64, RedError> {
        x.ensure_dims(self.dims())?;
        let fx = self.denoiser.denoise(x);
        Ok(regularizer_with(x, &fx))
    }

    pub fn cost(&self, x: &Image) -> Result<f64, RedError> {
        Ok(self.data_fidelity(x)? + self.alpha * self.regularizer(x)?)
    }

    /// `Hᵀ(Hx - y)/σ² + α(x - f(x))`
    pub fn gradient(&self, x: &Image) -> Result<Image, RedError> {
        let inv_s2 = 1.0 / (self.sigma * self.sigma);
        let data = self.forward.apply_adjoint(&self.residual(x)?)?;
        let fx = self.denoiser.denoise(x);
        let a = self.alpha;
        let g = data
            .as_slice()
            .iter()
            .zip(x.as_slice())
            .zip(fx.as_slice())
            .map(|((d, xi), fi)| d * inv_s2 + a * (xi - fi))
            .collect();
        Ok(Image::from_vec(x.width(), x.height(), g))
    }

    /// One fixed-point step: solves `(HᵀH/σ² + αI) x = Hᵀy/σ² + α f(x_k)`.
    pub fn fp_step(&self, x_k: &Image) -> Result<Image, RedError> {
        x_k.ensure_dims(self.dims())?;
        let fx = self.denoiser.denoise(x_k);
        let mut rhs = self.rhs_data.clone();
        axpy(self.alpha, fx.as_slice(), rhs.as_mut_slice());
        match self.forward.kind() {
            OperatorKind::Blur => Ok(self.solve_fourier(&rhs)),
            OperatorKind::BlurDownsample { .. } => self.solve_cg(&rhs, x_k),
        }
    }

    fn residual(&self, x: &Image) -> Result<Image, RedError> {
        let mut hx = self.forward.apply(x)?;
        axpy(-1.0, self.y.as_slice(), hx.as_mut_slice());
        Ok(hx)
    }

    /// `(HᵀH/σ² + αI) x`
    fn apply_system(&self, x: &Image) -> Result<Image, RedError> {
        let inv_s2 = 1.0 / (self.sigma * self.sigma);
        let mut out = self.forward.apply_normal(x)?.map(|v| v * inv_s2);
        axpy(self.alpha, x.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    /// Circulant case: the system matrix is diagonal in the DFT basis.
    fn solve_fourier(&self, rhs: &Image) -> Image {
        let fft = self.forward.fft();
        let inv_s2 = 1.0 / (self.sigma * self.sigma);
        let spec = fft.dft(rhs);
        let data: Vec<Complex64> = spec
            .data
            .iter()
            .zip(self.forward.transfer())
            .map(|(b, t)| b / (t.norm_sqr() * inv_s2 + self.alpha))
            .collect();
        fft.idft_real(&Spectrum::from_parts(spec.width, spec.height, data))
    }

    fn solve_cg(&self, rhs: &Image, warm: &Image) -> Result<Image, RedError> {
        let b_norm = norm(rhs.as_slice());
        if b_norm == 0.0 {
            return Ok(Image::zeros(rhs.width(), rhs.height()));
        }
        let mut x = warm.clone();
        let ax = self.apply_system(&x)?;
        let mut r: Vec<f64> = rhs
            .as_slice()
            .iter()
            .zip(ax.as_slice())
            .map(|(b, a)| b - a)
            .collect();
        let mut p = Image::from_vec(x.width(), x.height(), r.clone());
        let mut rr = dot(&r, &r);
        let mut iterations = 0;
        while rr.sqrt() > self.cg.tolerance * b_norm && iterations < self.cg.max_iterations {
            let ap = self.apply_system(&p)?;
            let step = rr / dot(p.as_slice(), ap.as_slice());
            axpy(step, p.as_slice(), x.as_mut_slice());
            axpy(-step, ap.as_slice(), &mut r);
            let rr_next = dot(&r, &r);
            let beta = rr_next / rr;
            for (pi, ri) in p.as_mut_slice().iter_mut().zip(&r) {
                *pi = ri + beta * *pi;
            }
            rr = rr_next;
            iterations += 1;
        }
        let residual = rr.sqrt() / b_norm;
        if residual > self.cg.failure_residual {
            return Err(RedError::CgNoConvergence {
                iterations,
                residual,
            });
        }
        Ok(x)
    }

    fn image(&self, x: &[f64]) -> Image {
        let (w, h) = self.dims();
        Image::from_vec(w, h, x.to_vec())
    }
}

fn regularizer_with(x: &Image, fx: &Image) -> f64 {
    0.5 * x
        .as_slice()
        .iter()
        .zip(fx.as_slice())
        .map(|(xi, fi)| xi * (xi - fi))
        .sum::<f64>()
}

/// The fixed-point map `x ↦ fp_step(x)`, with cost and gradient for
/// the gradient-based solvers.
impl FixedPointProblem for RedObjective {
    fn dim(&self) -> usize {
        let (w, h) = self.dims();
        w * h
    }

    fn step(&self, x: &[f64]) -> Result<Vec<f64>, BoxError> {
        Ok(self.fp_step(&self.image(x))?.into_vec())
    }

    fn cost(&self, x: &[f64]) -> Option<f64> {
        RedObjective::cost(self, &self.image(x)).ok()
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        RedObjective::gradient(self, &self.image(x))
            .ok()
            .map(Image::into_vec)
    }

    fn reference(&self) -> Option<&[f64]> {
        self.reference.as_ref().map(Image::as_slice)
    }
}
