//! Denoisers used as the prior engine `f(x)`.
//!
//! `GaussianFilter` is a fixed symmetric circulant smoother `f(x) = Wx`,
//! which makes the RED objective quadratic. `PatchWeighted` is a small
//! non-local-means filter: every pixel becomes a weighted average of the
//! pixels in its search window, with weights `exp(-d²/h²)` where `d²` is the
//! mean squared difference of the surrounding patches. All filters use
//! periodic boundaries.

use std::fmt;

use thiserror::Error;

use crate::imaging::Image;
use crate::linalg::Mat;

/// Largest image (in pixels) [`materialize_dense`] will expand.
pub const MAX_DENSE_PIXELS: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DenoiseError {
    #[error("{0} is not a linear denoiser")]
    NotLinear(String),
    #[error("dense expansion limited to {MAX_DENSE_PIXELS} pixels, got {0}")]
    TooLarge(usize),
    #[error("invalid denoiser parameter: {0}")]
    InvalidParameter(String),
}

/// A denoising engine. Implementations must be deterministic and reentrant.
pub trait Denoiser: Send + Sync {
    fn denoise(&self, x: &Image) -> Image;

    fn name(&self) -> String;
}

#[derive(Debug, Clone, PartialEq)]
pub enum DenoiserSpec {
    Identity,
    GaussianFilter {
        std: f64,
        /// Odd kernel width.
        support: usize,
    },
    PatchWeighted {
        patch_radius: usize,
        search_radius: usize,
        /// Intensity scale of the weight kernel.
        h: f64,
    },
}

impl DenoiserSpec {
    pub fn gaussian(std: f64, support: usize) -> Result<Self, DenoiseError> {
        if !(std > 0.0 && std.is_finite()) {
            return Err(DenoiseError::InvalidParameter(format!("std = {std}")));
        }
        if support % 2 == 0 {
            return Err(DenoiseError::InvalidParameter(format!(
                "support = {support}"
            )));
        }
        Ok(Self::GaussianFilter { std, support })
    }

    pub fn patch_weighted(
        patch_radius: usize,
        search_radius: usize,
        h: f64,
    ) -> Result<Self, DenoiseError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(DenoiseError::InvalidParameter(format!("h = {h}")));
        }
        Ok(Self::PatchWeighted {
            patch_radius,
            search_radius,
            h,
        })
    }

    pub fn is_linear(&self) -> bool {
        !matches!(self, DenoiserSpec::PatchWeighted { .. })
    }
}

impl fmt::Display for DenoiserSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DenoiserSpec::Identity => f.write_str("identity"),
            DenoiserSpec::GaussianFilter { std, support } => {
                write!(f, "gaussian(std={std}, support={support})")
            }
            DenoiserSpec::PatchWeighted {
                patch_radius,
                search_radius,
                h,
            } => write!(
                f,
                "patch(patch={patch_radius}, search={search_radius}, h={h})"
            ),
        }
    }
}

impl Denoiser for DenoiserSpec {
    fn denoise(&self, x: &Image) -> Image {
        match *self {
            DenoiserSpec::Identity => x.clone(),
            DenoiserSpec::GaussianFilter { std, support } => gaussian_filter(x, std, support),
            DenoiserSpec::PatchWeighted {
                patch_radius,
                search_radius,
                h,
            } => patch_weighted(x, patch_radius, search_radius, h),
        }
    }

    fn name(&self) -> String {
        self.to_string()
    }
}

/// `scale · f(x)`; handy for building denoisers that break passivity.
pub struct Scaled<D> {
    pub scale: f64,
    pub inner: D,
}

impl<D: Denoiser> Denoiser for Scaled<D> {
    fn denoise(&self, x: &Image) -> Image {
        self.inner.denoise(x).map(|p| self.scale * p)
    }

    fn name(&self) -> String {
        format!("{} x {}", self.scale, self.inner.name())
    }
}

fn gaussian_taps(std: f64, support: usize) -> Vec<f64> {
    let r = (support / 2) as isize;
    let raw: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * std * std)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|t| t / total).collect()
}

/// Separable periodic Gaussian smoothing. The 2-D kernel is the outer
/// product of the 1-D taps, i.e. the same normalized kernel `make_psf`
/// builds for a Gaussian PSF.
fn gaussian_filter(x: &Image, std: f64, support: usize) -> Image {
    let taps = gaussian_taps(std, support);
    let r = (support / 2) as isize;
    let (w, h) = x.dims();
    let rows = Image::from_fn(w, h, |i, j| {
        taps.iter()
            .enumerate()
            .map(|(k, t)| t * x.get_wrapped(i as isize + k as isize - r, j as isize))
            .sum()
    });
    Image::from_fn(w, h, |i, j| {
        taps.iter()
            .enumerate()
            .map(|(k, t)| t * rows.get_wrapped(i as isize, j as isize + k as isize - r))
            .sum()
    })
}

/// Periodic box mean over a `(2r+1)²` neighbourhood.
fn box_mean(img: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    if r == 0 {
        return img.to_vec();
    }
    let ri = r as isize;
    let norm = 1.0 / ((2 * r + 1) * (2 * r + 1)) as f64;
    let mut rows = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for d in -ri..=ri {
                acc += img[y * w + (x as isize + d).rem_euclid(w as isize) as usize];
            }
            rows[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for d in -ri..=ri {
                acc += rows[(y as isize + d).rem_euclid(h as isize) as usize * w + x];
            }
            out[y * w + x] = acc * norm;
        }
    }
    out
}

/// Calls `visit(ox, oy, weights)` for every search offset in a fixed order,
/// where `weights[i]` is the unnormalized weight pixel `i` gives to its
/// neighbour at `(ox, oy)`.
fn visit_patch_weights(
    x: &Image,
    patch_radius: usize,
    search_radius: usize,
    h: f64,
    mut visit: impl FnMut(isize, isize, &[f64]),
) {
    let (w, hgt) = x.dims();
    let n = w * hgt;
    let px = x.as_slice();
    let inv_h2 = 1.0 / (h * h);
    let s = search_radius as isize;
    let mut diff = vec![0.0; n];
    for oy in -s..=s {
        for ox in -s..=s {
            for y in 0..hgt {
                for xx in 0..w {
                    let i = y * w + xx;
                    let v = x.get_wrapped(xx as isize + ox, y as isize + oy);
                    diff[i] = (px[i] - v) * (px[i] - v);
                }
            }
            let mut wts = box_mean(&diff, w, hgt, patch_radius);
            wts.iter_mut().for_each(|d| *d = (-*d * inv_h2).exp());
            visit(ox, oy, &wts);
        }
    }
}

fn patch_weighted(x: &Image, patch_radius: usize, search_radius: usize, h: f64) -> Image {
    FrozenPatchWeights::new(x, patch_radius, search_radius, h).apply(x)
}

/// The patch-weighted filter with its weights computed once at `x` and then
/// held fixed, i.e. the linear map `z ↦ W(x) z`. `f(x) = W(x) x`.
#[derive(Debug, Clone)]
pub struct FrozenPatchWeights {
    width: usize,
    height: usize,
    offsets: Vec<(isize, isize)>,
    /// One weight plane per offset.
    weights: Vec<Vec<f64>>,
    total: Vec<f64>,
}

impl FrozenPatchWeights {
    pub fn new(x: &Image, patch_radius: usize, search_radius: usize, h: f64) -> Self {
        let (width, height) = x.dims();
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        let mut total = vec![0.0; width * height];
        visit_patch_weights(x, patch_radius, search_radius, h, |ox, oy, wts| {
            for (t, w) in total.iter_mut().zip(wts) {
                *t += w;
            }
            offsets.push((ox, oy));
            weights.push(wts.to_vec());
        });
        Self {
            width,
            height,
            offsets,
            weights,
            total,
        }
    }

    /// Frozen weights of a `PatchWeighted` spec; `None` for other kinds.
    pub fn for_spec(spec: &DenoiserSpec, x: &Image) -> Option<Self> {
        match *spec {
            DenoiserSpec::PatchWeighted {
                patch_radius,
                search_radius,
                h,
            } => Some(Self::new(x, patch_radius, search_radius, h)),
            _ => None,
        }
    }

    pub fn apply(&self, z: &Image) -> Image {
        assert_eq!(z.dims(), (self.width, self.height), "image size changed");
        let (w, h) = (self.width, self.height);
        let mut num = vec![0.0; w * h];
        for (&(ox, oy), wts) in self.offsets.iter().zip(&self.weights) {
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    num[i] += wts[i] * z.get_wrapped(x as isize + ox, y as isize + oy);
                }
            }
        }
        Image::from_vec(
            w,
            h,
            num.iter().zip(&self.total).map(|(a, b)| a / b).collect(),
        )
    }
}

impl Denoiser for FrozenPatchWeights {
    fn denoise(&self, x: &Image) -> Image {
        self.apply(x)
    }

    fn name(&self) -> String {
        "frozen patch weights".into()
    }
}

/// Explicit matrix `W` with `W vec(x) = vec(f(x))`, built column by column
/// from unit impulses. Linear denoisers only.
pub fn materialize_dense(
    spec: &DenoiserSpec,
    width: usize,
    height: usize,
) -> Result<Mat, DenoiseError> {
    if !spec.is_linear() {
        return Err(DenoiseError::NotLinear(spec.to_string()));
    }
    let n = width * height;
    if n > MAX_DENSE_PIXELS {
        return Err(DenoiseError::TooLarge(n));
    }
    let mut w = Mat::zeros(n, n);
    for j in 0..n {
        let mut e = Image::zeros(width, height);
        e.as_mut_slice()[j] = 1.0;
        let col = spec.denoise(&e);
        for (i, v) in col.as_slice().iter().enumerate() {
            w[(i, j)] = *v;
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{convolve_circular, make_psf, synthetic, PsfKind};

    fn max_abs_diff(a: &Image, b: &Image) -> f64 {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn identity_returns_input() {
        let x = synthetic::random(7, 5, 1);
        assert_eq!(DenoiserSpec::Identity.denoise(&x), x);
    }

    #[test]
    fn gaussian_preserves_constants() {
        let spec = DenoiserSpec::gaussian(1.2, 5).unwrap();
        let out = spec.denoise(&Image::filled(10, 9, 42.0));
        assert!(out.as_slice().iter().all(|p| (p - 42.0).abs() < 1e-12));
    }

    #[test]
    fn gaussian_matches_circular_convolution_with_psf() {
        let x = synthetic::random(12, 12, 2);
        let spec = DenoiserSpec::gaussian(1.6, 7).unwrap();
        let psf = make_psf(PsfKind::Gaussian { std: 1.6 }, 7).unwrap();
        let conv = convolve_circular(&x, &psf).unwrap();
        assert!(max_abs_diff(&spec.denoise(&x), &conv) < 1e-10);
    }

    #[test]
    fn gaussian_is_linear() {
        let spec = DenoiserSpec::gaussian(1.0, 5).unwrap();
        let x = synthetic::random(9, 9, 3);
        let z = synthetic::random(9, 9, 4);
        let (a, b) = (0.7, -1.3);
        let combo = Image::from_fn(9, 9, |i, j| a * x.get(i, j) + b * z.get(i, j));
        let fx = spec.denoise(&x);
        let fz = spec.denoise(&z);
        let expected = Image::from_fn(9, 9, |i, j| a * fx.get(i, j) + b * fz.get(i, j));
        assert!(max_abs_diff(&spec.denoise(&combo), &expected) < 1e-12);
    }

    #[test]
    fn dense_identity_is_identity_matrix() {
        let w = materialize_dense(&DenoiserSpec::Identity, 4, 4).unwrap();
        assert_eq!(w, Mat::identity(16));
    }

    #[test]
    fn dense_matrix_reproduces_filter() {
        let spec = DenoiserSpec::gaussian(1.0, 5).unwrap();
        let w = materialize_dense(&spec, 8, 8).unwrap();
        let x = synthetic::random(8, 8, 5);
        let wx = w.matvec(x.as_slice());
        let fx = spec.denoise(&x);
        let err = wx
            .iter()
            .zip(fx.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
        assert!(w.max_abs_diff(&w.transpose()) < 1e-15);
    }

    #[test]
    fn dense_rejects_nonlinear_and_large() {
        let nlm = DenoiserSpec::patch_weighted(1, 2, 10.0).unwrap();
        assert!(matches!(
            materialize_dense(&nlm, 4, 4),
            Err(DenoiseError::NotLinear(_))
        ));
        assert!(matches!(
            materialize_dense(&DenoiserSpec::Identity, 65, 64),
            Err(DenoiseError::TooLarge(4160))
        ));
    }

    #[test]
    fn patch_weighted_is_a_convex_average() {
        let spec = DenoiserSpec::patch_weighted(1, 3, 15.0).unwrap();
        let x = synthetic::shapes(24, 24);
        let out = spec.denoise(&x);
        let lo = x.as_slice().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = x
            .as_slice()
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(out
            .as_slice()
            .iter()
            .all(|p| *p >= lo - 1e-9 && *p <= hi + 1e-9));
        let c = spec.denoise(&Image::filled(12, 12, 9.0));
        assert!(c.as_slice().iter().all(|p| (p - 9.0).abs() < 1e-12));
    }

    #[test]
    fn patch_weighted_reduces_noise() {
        let clean = synthetic::shapes(32, 32);
        let noise = crate::imaging::gaussian_noise(32 * 32, 15.0, 8);
        let noisy = Image::from_vec(
            32,
            32,
            clean
                .as_slice()
                .iter()
                .zip(&noise)
                .map(|(a, b)| a + b)
                .collect(),
        );
        let spec = DenoiserSpec::patch_weighted(1, 3, 20.0).unwrap();
        let before = crate::imaging::psnr(&noisy, &clean).unwrap();
        let after = crate::imaging::psnr(&spec.denoise(&noisy), &clean).unwrap();
        assert!(after > before + 2.0, "{before} -> {after}");
    }

    #[test]
    fn frozen_weights_reproduce_filter_and_are_linear() {
        let spec = DenoiserSpec::patch_weighted(1, 2, 25.0).unwrap();
        let x = synthetic::shapes(16, 16);
        let frozen = FrozenPatchWeights::for_spec(&spec, &x).unwrap();
        assert!(max_abs_diff(&frozen.apply(&x), &spec.denoise(&x)) < 1e-12);
        let z = synthetic::random(16, 16, 6);
        let combo = Image::from_fn(16, 16, |i, j| 2.0 * z.get(i, j) - x.get(i, j));
        let fz = frozen.apply(&z);
        let fx = frozen.apply(&x);
        let expected = Image::from_fn(16, 16, |i, j| 2.0 * fz.get(i, j) - fx.get(i, j));
        assert!(max_abs_diff(&frozen.apply(&combo), &expected) < 1e-10);
        assert!(FrozenPatchWeights::for_spec(&DenoiserSpec::Identity, &x).is_none());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(DenoiserSpec::gaussian(-1.0, 5).is_err());
        assert!(DenoiserSpec::gaussian(1.0, 4).is_err());
        assert!(DenoiserSpec::patch_weighted(1, 1, 0.0).is_err());
    }
}
