use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Image, ImagingError, LinearOperator};

/// Seeded ChaCha8 stream. `(seed, stream)` pairs give independent,
/// platform-stable sequences.
pub struct NoiseRng {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NoiseRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Standard normal draw by Box-Muller; the second value of each pair is
    /// kept for the next call.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the log finite
        let u1 = 1.0 - self.rng.gen::<f64>();
        let u2 = self.rng.gen::<f64>();
        let radius = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * theta.sin());
        radius * theta.cos()
    }
}

/// `len` i.i.d. `N(0, sigma²)` samples.
pub fn gaussian_noise(len: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = NoiseRng::new(seed, 0);
    (0..len).map(|_| sigma * rng.standard_normal()).collect()
}

/// Synthetic measurement `y = Hx + e`, `e ~ N(0, sigma²)` drawn from `seed`.
pub fn degrade(
    image: &Image,
    op: &LinearOperator,
    sigma: f64,
    seed: u64,
) -> Result<Image, ImagingError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(ImagingError::InvalidSigma(sigma));
    }
    let mut y = op.apply(image)?;
    if sigma > 0.0 {
        let noise = gaussian_noise(y.len(), sigma, seed);
        for (p, e) in y.as_mut_slice().iter_mut().zip(noise) {
            *p += e;
        }
    }
    Ok(y)
}
