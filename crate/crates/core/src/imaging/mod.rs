//! Grayscale images, blur kernels, periodic convolution, the degradation
//! operators `H`/`Hᵀ`, synthetic measurements and PSNR.

mod fourier;
mod noise;
mod operator;
mod psf;
pub mod synthetic;

use thiserror::Error;

pub use fourier::{dft2, idft2, Fft2, Spectrum};
pub use noise::{degrade, gaussian_noise, NoiseRng};
pub use operator::{convolve_circular, LinearOperator, OperatorKind};
pub use psf::{make_psf, Psf, PsfKind};

/// Peak value used by [`psnr`].
pub const PEAK: f64 = 255.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImagingError {
    #[error("kernel size must be odd and at least 1, got {0}")]
    InvalidSize(usize),
    #[error("Gaussian kernel needs a positive finite std, got {0}")]
    InvalidStd(f64),
    #[error("kernel of size {size} does not fit a {width}x{height} image")]
    KernelTooLarge {
        size: usize,
        width: usize,
        height: usize,
    },
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("image dimensions must be positive and match the pixel count")]
    BadDimensions,
    #[error("image contains non-finite pixels")]
    NonFinite,
    #[error("custom kernels are built with Psf::custom")]
    CustomKernel,
    #[error("downsampling factor must be at least 1")]
    InvalidFactor,
    #[error("noise level must be nonnegative and finite, got {0}")]
    InvalidSigma(f64),
}

/// Row-major grayscale image with real-valued pixels (nominally 0..=255).
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(ImagingError::BadDimensions);
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(ImagingError::NonFinite);
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    /// `f(x, y)` for every pixel, row by row.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    /// Wraps a vector produced by an iteration. Shape is checked, finiteness
    /// is the caller's business.
    pub fn from_vec(width: usize, height: usize, pixels: Vec<f64>) -> Self {
        assert_eq!(
            pixels.len(),
            width * height,
            "pixel count does not match shape"
        );
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Pixel at periodic coordinates.
    #[inline]
    pub fn get_wrapped(&self, x: isize, y: isize) -> f64 {
        let w = self.width as isize;
        let h = self.height as isize;
        self.pixels[(y.rem_euclid(h) * w + x.rem_euclid(w)) as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.pixels
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.pixels
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&p| f(p)).collect(),
        }
    }

    /// Copy with pixels clipped to `[0, 255]`.
    pub fn clipped(&self) -> Image {
        self.map(|p| p.clamp(0.0, PEAK))
    }

    pub fn ensure_dims(&self, dims: (usize, usize)) -> Result<(), ImagingError> {
        if self.dims() == dims {
            Ok(())
        } else {
            Err(ImagingError::ShapeMismatch {
                expected: dims,
                got: self.dims(),
            })
        }
    }
}

/// `10 log10(255² / MSE)`; identical images give `+∞`.
pub fn psnr(x: &Image, reference: &Image) -> Result<f64, ImagingError> {
    x.ensure_dims(reference.dims())?;
    Ok(psnr_values(x.as_slice(), reference.as_slice()))
}

/// [`psnr`] on raw pixel buffers of equal length.
pub fn psnr_values(x: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(x.len(), reference.len(), "PSNR needs equal-length buffers");
    let mse = x
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.len() as f64;
    if mse == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (PEAK * PEAK / mse).log10()
}
