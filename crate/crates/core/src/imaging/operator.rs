use num_complex::Complex64;

use super::{Fft2, Image, ImagingError, Psf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Blur,
    /// Blur, then keep pixels whose row and column index are `≡ 0 (mod factor)`.
    BlurDownsample {
        factor: usize,
    },
}

/// Degradation operator `H` with periodic boundaries, so the blur part is
/// block-circulant and diagonalized by the DFT.
#[derive(Debug, Clone)]
pub struct LinearOperator {
    psf: Psf,
    kind: OperatorKind,
    width: usize,
    height: usize,
    fft: Fft2,
    /// Eigenvalues of the circulant blur (unnormalized DFT of the wrapped kernel).
    transfer: Vec<Complex64>,
}

impl LinearOperator {
    pub fn blur(psf: Psf, width: usize, height: usize) -> Result<Self, ImagingError> {
        Self::build(psf, OperatorKind::Blur, width, height)
    }

    pub fn blur_downsample(
        psf: Psf,
        factor: usize,
        width: usize,
        height: usize,
    ) -> Result<Self, ImagingError> {
        if factor == 0 {
            return Err(ImagingError::InvalidFactor);
        }
        Self::build(psf, OperatorKind::BlurDownsample { factor }, width, height)
    }

    fn build(
        psf: Psf,
        kind: OperatorKind,
        width: usize,
        height: usize,
    ) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::BadDimensions);
        }
        if psf.size() > width.min(height) {
            return Err(ImagingError::KernelTooLarge {
                size: psf.size(),
                width,
                height,
            });
        }
        let fft = Fft2::new(width, height);
        let transfer = transfer_function(&psf, &fft);
        Ok(Self {
            psf,
            kind,
            width,
            height,
            fft,
            transfer,
        })
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn psf(&self) -> &Psf {
        &self.psf
    }

    pub fn input_dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn output_dims(&self) -> (usize, usize) {
        match self.kind {
            OperatorKind::Blur => (self.width, self.height),
            OperatorKind::BlurDownsample { factor } => {
                (self.width.div_ceil(factor), self.height.div_ceil(factor))
            }
        }
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    pub fn transfer(&self) -> &[Complex64] {
        &self.transfer
    }

    /// `Hx`
    pub fn apply(&self, x: &Image) -> Result<Image, ImagingError> {
        x.ensure_dims(self.input_dims())?;
        let blurred = self.filter(x, false);
        Ok(match self.kind {
            OperatorKind::Blur => blurred,
            OperatorKind::BlurDownsample { factor } => {
                let (ow, oh) = self.output_dims();
                Image::from_fn(ow, oh, |i, j| blurred.get(i * factor, j * factor))
            }
        })
    }

    /// `Hᵀz`: zero-upsample, then correlate with the kernel.
    pub fn apply_adjoint(&self, z: &Image) -> Result<Image, ImagingError> {
        z.ensure_dims(self.output_dims())?;
        let up = match self.kind {
            OperatorKind::Blur => z.clone(),
            OperatorKind::BlurDownsample { factor } => {
                let mut up = Image::zeros(self.width, self.height);
                for j in 0..z.height() {
                    for i in 0..z.width() {
                        up.set(i * factor, j * factor, z.get(i, j));
                    }
                }
                up
            }
        };
        Ok(self.filter(&up, true))
    }

    /// `HᵀHx`
    pub fn apply_normal(&self, x: &Image) -> Result<Image, ImagingError> {
        self.apply_adjoint(&self.apply(x)?)
    }

    fn filter(&self, x: &Image, adjoint: bool) -> Image {
        let mut spec = self.fft.dft(x);
        for (s, t) in spec.data.iter_mut().zip(&self.transfer) {
            *s *= if adjoint { t.conj() } else { *t };
        }
        self.fft.idft_real(&spec)
    }
}

fn transfer_function(psf: &Psf, fft: &Fft2) -> Vec<Complex64> {
    let (w, h) = fft.dims();
    let r = psf.radius() as isize;
    let mut data = vec![Complex64::new(0.0, 0.0); w * h];
    for dy in -r..=r {
        for dx in -r..=r {
            let x = dx.rem_euclid(w as isize) as usize;
            let y = dy.rem_euclid(h as isize) as usize;
            data[y * w + x].re += psf.tap(dx, dy);
        }
    }
    fft.forward(&mut data);
    data
}

/// Periodic-boundary convolution `(h * x)[i, j] = Σ h[a, b] x[i - a, j - b]`.
pub fn convolve_circular(image: &Image, psf: &Psf) -> Result<Image, ImagingError> {
    let op = LinearOperator::blur(psf.clone(), image.width(), image.height())?;
    op.apply(image)
}
