//! Empirical constants of paraproduct, product and interpolation inequalities.
//!
//! Each inequality `A(f, g) <= C B(f, g)` is sampled over random band-limited
//! pairs and the ratio `A / B` is recorded. The band is kept at N/4 so every
//! pairwise product is exactly representable on the grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::besov::{besov_norm, bony_scalar, freq_project, Part};
use crate::error::{Error, Result};
use crate::spectral::random::random_scalar;
use crate::spectral::{Grid, SpectralField};

/// Exponents used by the sampled inequalities.
pub const ALPHA_POS: f64 = 0.5;
pub const ALPHA_NEG: f64 = -0.3;
pub const BETA_POS: f64 = 0.5;
pub const BETA_NEG: f64 = -0.3;
pub const SIGMA: f64 = 0.75;
/// Cut-offs for the smoothing and roughening checks of the frequency projections.
pub const LAMBDAS: [f64; 5] = [8.0, 16.0, 32.0, 64.0, 128.0];

/// Inequality identifiers, in report order.
pub const IDS: [&str; 10] = [
    "para_lt_l2_c",
    "para_gt_h_linf",
    "para_lt_hneg_c",
    "para_gt_h_cneg",
    "resonant_h_c",
    "product_hdot",
    "l4_interp_b4",
    "l4_interp_binf",
    "low_pass_smoothing",
    "high_pass_roughening",
];

/// Ratio statistics of one inequality over a sample set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityStat {
    pub id: String,
    pub n: usize,
    pub samples: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
}

fn linf(f: &SpectralField) -> f64 {
    f.to_physical_at(f.grid().m())
        .iter()
        .fold(0.0, |a, v| a.max(v.abs()))
}

fn l4(f: &SpectralField) -> f64 {
    // a degree-4 polynomial of a band-N/4 field integrates exactly on 2N points
    let v = f.to_physical_at(f.grid().cubic_size());
    (v.iter().map(|x| x.powi(4)).sum::<f64>() / v.len() as f64).powf(0.25)
}

fn c_norm(f: &SpectralField, s: f64) -> Result<f64> {
    besov_norm(f, s, f64::INFINITY, f64::INFINITY)
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

/// The random pair for one sample. Spectral decay rates are drawn in [1.5, 3].
pub fn sample_pair(grid: &Grid, seed: u64, index: u64) -> (SpectralField, SpectralField) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let df: f64 = rng.random_range(1.5..3.0);
    let dg: f64 = rng.random_range(1.5..3.0);
    let (sf, sg): (u64, u64) = (rng.random(), rng.random());
    let band = (grid.n() / 4) as i64;
    (random_scalar(grid, sf, df, band), random_scalar(grid, sg, dg, band))
}

/// All ratios of one sample, in the order of [`IDS`].
pub fn sample_ratios(f: &SpectralField, g: &SpectralField) -> Result<[f64; 10]> {
    let b = bony_scalar(f, g)?;
    let (a, an, bp, bn) = (ALPHA_POS, ALPHA_NEG, BETA_POS, BETA_NEG);
    let mut r = [0.0; 10];
    r[0] = ratio(b.lt.norm_h(bn - a), f.norm() * c_norm(g, bn)?);
    r[1] = ratio(b.gt.norm_h(a), f.norm_h(a) * linf(g));
    r[2] = ratio(b.lt.norm_h(an + bp), f.norm_h(an) * c_norm(g, bp)?);
    r[3] = ratio(b.gt.norm_h(a + bn), f.norm_h(a) * c_norm(g, bn)?);
    let ae = 0.6;
    r[4] = ratio(b.res.norm_h(ae + bn), f.norm_h(ae) * c_norm(g, bn)?);
    r[5] = ratio(
        f.product(g).norm_hdot(2.0 * SIGMA - 1.0),
        f.norm_hdot(SIGMA) * g.norm_hdot(SIGMA),
    );
    let lf = l4(f);
    r[6] = ratio(lf, (f.norm() * besov_norm(f, 0.5, 4.0, 2.0)?).sqrt());
    r[7] = ratio(lf, (f.norm() * besov_norm(f, 0.0, f64::INFINITY, 2.0)?).sqrt());
    let b0 = besov_norm(f, 0.0, 2.0, 2.0)?;
    let b1 = besov_norm(f, 1.0, 2.0, 2.0)?;
    for &lam in &LAMBDAS {
        let low = freq_project(f, lam, Part::Low)?;
        r[8] = r[8].max(ratio(besov_norm(&low, 1.0, 2.0, 2.0)?, lam * b0));
        let high = freq_project(f, lam, Part::High)?;
        r[9] = r[9].max(ratio(besov_norm(&high, 0.0, 2.0, 2.0)?, b1 / lam));
    }
    Ok(r)
}

/// Maximum and mean ratio of every inequality over `samples` random pairs.
pub fn inequality_ratios(grid: &Grid, samples: usize, seed: u64) -> Result<Vec<InequalityStat>> {
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let rows: Vec<[f64; 10]> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let (f, g) = sample_pair(grid, seed, i);
            sample_ratios(&f, &g)
        })
        .collect::<Result<_>>()?;
    Ok(IDS
        .iter()
        .enumerate()
        .map(|(k, id)| {
            let vals = rows.iter().map(|r| r[k]);
            InequalityStat {
                id: id.to_string(),
                n: grid.n(),
                samples,
                max_ratio: vals.clone().fold(0.0, f64::max),
                mean_ratio: vals.sum::<f64>() / samples as f64,
            }
        })
        .collect())
}
