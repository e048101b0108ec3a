use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::field::{SpectralField, VectorField};
use super::grid::Grid;
use super::ops::leray_project;

/// Mean-zero Gaussian scalar field with amplitude |k|^{-decay} on |k|_inf <= band.
pub fn random_scalar(grid: &Grid, seed: u64, decay: f64, band: i64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralField::zeros(grid);
    let band = band.min(grid.kmax());
    for k1 in 0..=band {
        for k2 in -band..=band {
            if k1 == 0 && k2 <= 0 {
                continue;
            }
            let amp = ((k1 * k1 + k2 * k2) as f64).powf(-0.5 * decay);
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            f.set_mode(k1, k2, Complex64::new(re, im) * amp)
                .expect("mode inside band");
        }
    }
    f
}

/// Gaussian vector field, not projected.
pub fn random_vector(grid: &Grid, seed: u64, decay: f64, band: i64) -> VectorField {
    VectorField {
        c: [
            random_scalar(grid, seed.wrapping_mul(2).wrapping_add(1), decay, band),
            random_scalar(grid, seed.wrapping_mul(2).wrapping_add(2), decay, band),
        ],
    }
}

/// Divergence-free band-limited field normalized to the given L^2 norm.
pub fn random_divfree(grid: &Grid, seed: u64, decay: f64, band: i64, l2: f64) -> VectorField {
    let v = leray_project(&random_vector(grid, seed, decay, band));
    let n = v.norm();
    if n == 0.0 {
        v
    } else {
        v.scaled(l2 / n)
    }
}
