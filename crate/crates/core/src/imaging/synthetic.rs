//! Deterministic test images.

use super::{Image, NoiseRng};

/// Piecewise-smooth scene with a shaded background, a star, two disks, a
/// striped patch and fine texture. Values stay inside `[0, 255]`.
pub fn shapes(width: usize, height: usize) -> Image {
    let w = width as f64;
    let h = height as f64;
    let s = w.min(h);
    let mut rng = NoiseRng::new(0x5eed, 1);
    let texture: Vec<f64> = (0..width * height).map(|_| rng.uniform() - 0.5).collect();
    Image::from_fn(width, height, |x, y| {
        let fx = x as f64 + 0.5;
        let fy = y as f64 + 0.5;
        let mut v = 60.0 + 80.0 * fx / w + 30.0 * fy / h;

        // star
        let (cx, cy) = (0.38 * w, 0.42 * h);
        let (dx, dy) = (fx - cx, fy - cy);
        let r = (dx * dx + dy * dy).sqrt();
        let theta = dy.atan2(dx);
        let edge = 0.22 * s * (1.0 + 0.35 * (5.0 * theta).cos());
        if r < edge {
            v = 210.0 - 60.0 * r / edge;
        }

        // disks
        let d1 = ((fx - 0.78 * w).powi(2) + (fy - 0.25 * h).powi(2)).sqrt();
        if d1 < 0.12 * s {
            v = 30.0;
        }
        let d2 = ((fx - 0.75 * w).powi(2) + (fy - 0.75 * h).powi(2)).sqrt();
        if d2 < 0.15 * s {
            v = 180.0 + 40.0 * (fx / 3.0).sin();
        }

        // stripes
        if fx < 0.3 * w && fy > 0.72 * h {
            v = if ((fx / (0.04 * s).max(1.0)) as i64) % 2 == 0 {
                40.0
            } else {
                200.0
            };
        }

        (v + 12.0 * texture[y * width + x]).clamp(0.0, 255.0)
    })
}

/// Uniform random pixels in `[0, 255)`.
pub fn random(width: usize, height: usize, seed: u64) -> Image {
    let mut rng = NoiseRng::new(seed, 7);
    Image::from_fn(width, height, |_, _| 255.0 * rng.uniform())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_is_deterministic_and_in_range() {
        let a = shapes(40, 30);
        assert_eq!(a, shapes(40, 30));
        assert!(a.as_slice().iter().all(|p| (0.0..=255.0).contains(p)));
        let mean = a.as_slice().iter().sum::<f64>() / a.len() as f64;
        let var = a.as_slice().iter().map(|p| (p - mean).powi(2)).sum::<f64>() / a.len() as f64;
        assert!(var > 500.0);
    }
}
