//! Numerical checks of the two conditions the RED gradient relies on:
//! local homogeneity `f(cx) = c f(x)` and passivity `ρ(∇f(x)) ≤ 1`.

use crate::denoise::Denoiser;
use crate::imaging::{Image, NoiseRng};
use crate::linalg::{dist, norm};

/// Guards the homogeneity ratio against `f(x) = 0`.
pub const HOMOGENEITY_EPS: f64 = 1e-12;

/// `‖f(cx) - c f(x)‖ / (‖f(x)‖ + ε)`
pub fn check_local_homogeneity(denoiser: &dyn Denoiser, x: &Image, c: f64) -> f64 {
    let fx = denoiser.denoise(x);
    let fcx = denoiser.denoise(&x.map(|v| c * v));
    let scaled: Vec<f64> = fx.as_slice().iter().map(|v| c * v).collect();
    dist(fcx.as_slice(), &scaled) / (norm(fx.as_slice()) + HOMOGENEITY_EPS)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassivityEstimate {
    /// Dominant eigenvalue magnitude of the Jacobian at `x`.
    pub spectral_radius: f64,
    pub iterations: usize,
    /// Change of the estimate over the last iteration.
    pub last_change: f64,
}

impl PassivityEstimate {
    pub fn violates(&self, slack: f64) -> bool {
        self.spectral_radius > 1.0 + slack
    }
}

/// Power iteration on `v ↦ ∇f(x) v`, with Jacobian-vector products from
/// forward differences `(f(x + hv) - f(x)) / h`, `h = 1e-4 ‖x‖ / ‖v‖`.
/// The start vector is drawn from a fixed seed.
pub fn check_passivity(denoiser: &dyn Denoiser, x: &Image, iterations: usize) -> PassivityEstimate {
    let (w, h) = x.dims();
    let fx = denoiser.denoise(x);
    let x_norm = norm(x.as_slice());
    let mut rng = NoiseRng::new(0x5eed, 7);
    let mut v: Vec<f64> = (0..w * h).map(|_| rng.standard_normal()).collect();
    normalize(&mut v);

    let mut estimate = 0.0;
    let mut last_change = f64::INFINITY;
    for _ in 0..iterations.max(1) {
        // ‖v‖ = 1 here
        let step = if x_norm > 0.0 { 1e-4 * x_norm } else { 1e-4 };
        let probe = Image::from_vec(
            w,
            h,
            x.as_slice()
                .iter()
                .zip(&v)
                .map(|(xi, vi)| xi + step * vi)
                .collect(),
        );
        let fp = denoiser.denoise(&probe);
        let mut jv: Vec<f64> = fp
            .as_slice()
            .iter()
            .zip(fx.as_slice())
            .map(|(a, b)| (a - b) / step)
            .collect();
        let next = norm(&jv);
        last_change = (next - estimate).abs();
        estimate = next;
        if next == 0.0 {
            break;
        }
        jv.iter_mut().for_each(|e| *e /= next);
        v = jv;
    }
    PassivityEstimate {
        spectral_radius: estimate,
        iterations: iterations.max(1),
        last_change,
    }
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|e| *e /= n);
    }
}
