use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::Image;

/// Complex 2-D spectrum, row-major, same shape as the image it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub width: usize,
    pub height: usize,
    pub data: Vec<Complex64>,
}

impl Spectrum {
    pub fn from_parts(width: usize, height: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Planned 2-D transform for one image shape.
///
/// Plans are immutable and shared; scratch buffers are allocated per call so
/// one instance can serve concurrent sessions.
#[derive(Clone)]
pub struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft2")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish()
    }
}

impl Fft2 {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.row_fwd, &self.col_fwd);
    }

    /// Unnormalized inverse transform in place.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.row_inv, &self.col_inv);
    }

    fn transform(
        &self,
        data: &mut [Complex64],
        rows: &Arc<dyn Fft<f64>>,
        cols: &Arc<dyn Fft<f64>>,
    ) {
        let (w, h) = (self.width, self.height);
        assert_eq!(data.len(), w * h);
        // rows are contiguous
        rows.process(data);
        let mut column = vec![Complex64::new(0.0, 0.0); h];
        for x in 0..w {
            for y in 0..h {
                column[y] = data[y * w + x];
            }
            cols.process(&mut column);
            for y in 0..h {
                data[y * w + x] = column[y];
            }
        }
    }

    /// Unitary forward DFT of a real image.
    pub fn dft(&self, image: &Image) -> Spectrum {
        assert_eq!(image.dims(), self.dims());
        let mut data: Vec<Complex64> = image
            .as_slice()
            .iter()
            .map(|&p| Complex64::new(p, 0.0))
            .collect();
        self.forward(&mut data);
        let scale = 1.0 / ((self.width * self.height) as f64).sqrt();
        data.iter_mut().for_each(|c| *c *= scale);
        Spectrum {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Unitary inverse DFT, keeping the real part.
    pub fn idft_real(&self, spectrum: &Spectrum) -> Image {
        assert_eq!((spectrum.width, spectrum.height), self.dims());
        let mut data = spectrum.data.clone();
        self.inverse(&mut data);
        let scale = 1.0 / ((self.width * self.height) as f64).sqrt();
        Image::from_vec(
            self.width,
            self.height,
            data.iter().map(|c| c.re * scale).collect(),
        )
    }
}

/// Unitary 2-D DFT: `idft2(dft2(x)) = x` and `‖x‖² = ‖dft2(x)‖²`.
pub fn dft2(image: &Image) -> Spectrum {
    Fft2::new(image.width(), image.height()).dft(image)
}

/// Inverse of [`dft2`]; the imaginary part is discarded.
pub fn idft2(spectrum: &Spectrum) -> Image {
    Fft2::new(spectrum.width, spectrum.height).idft_real(spectrum)
}
