use std::fmt;

use super::ImagingError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsfKind {
    Uniform,
    Gaussian {
        std: f64,
    },
    /// Caller-supplied taps; not necessarily normalized.
    Custom,
}

impl fmt::Display for PsfKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PsfKind::Uniform => f.write_str("uniform"),
            PsfKind::Gaussian { std } => write!(f, "gaussian(std={std})"),
            PsfKind::Custom => f.write_str("custom"),
        }
    }
}

/// Normalized `k×k` blur kernel anchored at its center tap.
#[derive(Debug, Clone, PartialEq)]
pub struct Psf {
    size: usize,
    taps: Vec<f64>,
    kind: PsfKind,
}

impl Psf {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    pub fn kind(&self) -> PsfKind {
        self.kind
    }

    /// Row-major taps.
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Tap at offset `(dx, dy)` from the center, both in `-r..=r`.
    pub fn tap(&self, dx: isize, dy: isize) -> f64 {
        let r = self.radius() as isize;
        self.taps[((dy + r) as usize) * self.size + (dx + r) as usize]
    }

    pub fn custom(size: usize, taps: Vec<f64>) -> Result<Self, ImagingError> {
        if size == 0 || size % 2 == 0 {
            return Err(ImagingError::InvalidSize(size));
        }
        if taps.len() != size * size {
            return Err(ImagingError::BadDimensions);
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(ImagingError::NonFinite);
        }
        Ok(Self {
            size,
            taps,
            kind: PsfKind::Custom,
        })
    }

    /// Identity kernel (a single unit tap).
    pub fn identity() -> Self {
        Self {
            size: 1,
            taps: vec![1.0],
            kind: PsfKind::Uniform,
        }
    }
}

/// Uniform taps `1/k²`, or `exp(-(i²+j²)/(2 std²))` on the centered grid,
/// normalized to unit sum.
pub fn make_psf(kind: PsfKind, size: usize) -> Result<Psf, ImagingError> {
    if size == 0 || size % 2 == 0 {
        return Err(ImagingError::InvalidSize(size));
    }
    let r = (size / 2) as isize;
    let taps = match kind {
        PsfKind::Custom => return Err(ImagingError::CustomKernel),
        PsfKind::Uniform => vec![1.0 / (size * size) as f64; size * size],
        PsfKind::Gaussian { std } => {
            if !(std > 0.0 && std.is_finite()) {
                return Err(ImagingError::InvalidStd(std));
            }
            let mut taps = Vec::with_capacity(size * size);
            for i in -r..=r {
                for j in -r..=r {
                    taps.push((-((i * i + j * j) as f64) / (2.0 * std * std)).exp());
                }
            }
            let total: f64 = taps.iter().sum();
            taps.iter_mut().for_each(|t| *t /= total);
            taps
        }
    };
    Ok(Psf { size, taps, kind })
}
