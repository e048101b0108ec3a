//! Enhanced noise: the block gradient matrix of the noise, its resolvent,
//! the renormalized resonant product and the divergent constant r_lambda(t).
//!
//! The resonant product of two 4 x 4 matrix fields is the matrix product
//! (A o P)_ij = sum_k A_ik o P_kj with the scalar resonant product `o`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::besov::{block_symbol, freq_project_vec, low_profile, BlockSet, LpPartition, Part};
use crate::error::{Error, Result};
use crate::noise::{ou_variance, sample_at, NoiseState};
use crate::spectral::{grad_decompose, Grid, SpectralField, TensorField2, TensorField4, VectorField};
use crate::stats::{mean_stderr, pairwise_sum, CompensatedSum};

/// [[grad_symm X_u, grad_anti X_b], [-grad_anti X_b, -grad_symm X_u]].
pub fn nabla_spec(xu: &VectorField, xb: &VectorField) -> TensorField4 {
    let (su, _) = grad_decompose(xu);
    let (_, ab) = grad_decompose(xb);
    TensorField4::from_blocks(&su, &ab, &(-&ab), &(-&su))
}

/// Resolvent multiplier (nu |k|^2 / 2 + 1)^{-1}.
pub fn resolvent_symbol(nu: f64, ksq: f64) -> f64 {
    1.0 / (0.5 * nu * ksq + 1.0)
}

pub fn resolvent(t: &TensorField4, nu: f64) -> TensorField4 {
    t.map(|f| f.map_symbol(|_, _, ksq| resolvent_symbol(nu, ksq)))
}

fn r_term(k_norm_sq: f64, lambda: f64, t: f64, nu: f64) -> f64 {
    let l = low_profile(k_norm_sq.sqrt() / lambda);
    if l == 0.0 {
        return 0.0;
    }
    0.25 * l * l * (-(-2.0 * nu * k_norm_sq * t).exp_m1()) / nu * resolvent_symbol(nu, k_norm_sq)
}

fn check_r_args(lambda: f64, t: f64, nu: f64) -> Result<()> {
    if !(lambda >= 1.0) {
        return Err(Error::InvalidParameter(format!("cut-off must be at least 1, got {lambda}")));
    }
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidParameter(format!("viscosity must be positive, got {nu}")));
    }
    Ok(())
}

/// Renormalization constant
/// r_lambda(t) = sum_{k != 0} 1/4 l(|k|/lambda)^2 (1 - e^{-2 nu |k|^2 t}) / nu (nu |k|^2/2 + 1)^{-1}.
///
/// Summed over one lattice quadrant and multiplied by four, using the
/// rotation invariance of the summand.
pub fn r_lambda(lambda: f64, t: f64, nu: f64) -> Result<f64> {
    check_r_args(lambda, t, nu)?;
    let kmax = lambda.ceil() as i64;
    let mut sum = CompensatedSum::default();
    for k1 in 1..=kmax {
        for k2 in 0..=kmax {
            let ksq = (k1 * k1 + k2 * k2) as f64;
            if ksq >= lambda * lambda {
                break;
            }
            sum.add(r_term(ksq, lambda, t, nu));
        }
    }
    Ok(4.0 * sum.value())
}

/// Table of r_lambda(t) over a grid of thresholds and times.
pub fn r_lambda_table(lambdas: &[f64], times: &[f64], nu: f64) -> Result<Vec<(f64, f64, f64)>> {
    let mut out = Vec::new();
    for &l in lambdas {
        for &t in times {
            out.push((l, t, r_lambda(l, t, nu)?));
        }
    }
    Ok(out)
}

/// Resonant weight sum_{|i-j| <= 1} rho_i(r) rho_j(r) at radius `r`.
pub fn resonant_weight(part: &LpPartition, r: f64) -> f64 {
    let w: Vec<f64> = part.blocks().map(|j| block_symbol(j, r)).collect();
    let mut s = 0.0;
    for i in 0..w.len() {
        for j in i.saturating_sub(1)..=(i + 1).min(w.len() - 1) {
            s += w[i] * w[j];
        }
    }
    s
}

/// Scalar resonant product of every (i,k) x (k,j) pair, contracted over k.
pub fn resonant_matrix(a: &TensorField4, p: &TensorField4) -> TensorField4 {
    let g = a.grid().clone();
    let m = g.m();
    let ba: Vec<Option<BlockSet>> = a.e.iter().map(block_set_if_nonzero).collect();
    let bp: Vec<Option<BlockSet>> = p.e.iter().map(block_set_if_nonzero).collect();
    let mut vals = Vec::with_capacity(16);
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = vec![0.0; m * m];
            for k in 0..4 {
                if let (Some(x), Some(y)) = (&ba[4 * i + k], &bp[4 * k + j]) {
                    x.res_accumulate(y, 1.0, &mut acc);
                }
            }
            vals.push(acc);
        }
    }
    let sp = g.from_physical_many(&vals, m);
    TensorField4 {
        e: sp.into_iter().map(|c| SpectralField::from_raw(&g, c)).collect(),
    }
}

/// Single entry (i, j) of the contracted resonant product.
pub fn resonant_entry(a: &TensorField4, p: &TensorField4, i: usize, j: usize) -> SpectralField {
    let g = a.grid().clone();
    let m = g.m();
    let mut acc = vec![0.0; m * m];
    for k in 0..4 {
        if let (Some(x), Some(y)) = (block_set_if_nonzero(a.get(i, k)), block_set_if_nonzero(p.get(k, j))) {
            x.res_accumulate(&y, 1.0, &mut acc);
        }
    }
    SpectralField::from_raw(&g, g.from_physical(&acc, m))
}

fn block_set_if_nonzero(f: &SpectralField) -> Option<BlockSet> {
    if f.max_abs_coeff() == 0.0 {
        None
    } else {
        Some(BlockSet::new(f))
    }
}

/// The enhanced noise at one time and threshold.
#[derive(Clone, Debug)]
pub struct EnhancedNoise {
    pub lambda: f64,
    pub t: f64,
    pub r_value: f64,
    pub grad_spec: TensorField4,
    pub resolvent: TensorField4,
    /// grad_spec o resolvent - r_lambda Id
    pub resonant: TensorField4,
}

/// Enhanced noise built from the current noise coefficients.
pub fn enhanced_noise(state: &NoiseState, lambda: f64) -> Result<EnhancedNoise> {
    check_r_args(lambda, state.t, state.nu)?;
    let (lu, lb) = state.fields(Some(lambda));
    enhanced_from_fields(&lu, &lb, lambda, state.t, state.nu)
}

/// Enhanced noise from already mollified fields.
pub fn enhanced_from_fields(
    lxu: &VectorField,
    lxb: &VectorField,
    lambda: f64,
    t: f64,
    nu: f64,
) -> Result<EnhancedNoise> {
    let r = r_lambda(lambda, t, nu)?;
    let grad_spec = nabla_spec(lxu, lxb);
    let p = resolvent(&grad_spec, nu);
    let mut res = resonant_matrix(&grad_spec, &p);
    for i in 0..4 {
        res.get_mut(i, i).coeffs_mut()[0] -= Complex64::new(r, 0.0);
    }
    Ok(EnhancedNoise {
        lambda,
        t,
        r_value: r,
        grad_spec,
        resolvent: p,
        resonant: res,
    })
}

/// Mollified noise fields at threshold `lambda` from raw fields.
pub fn mollify(xu: &VectorField, xb: &VectorField, lambda: f64) -> Result<(VectorField, VectorField)> {
    Ok((freq_project_vec(xu, lambda, Part::Low)?, freq_project_vec(xb, lambda, Part::Low)?))
}

/// Fourier symbol of entry (r, c) of the block gradient matrix for the
/// unit-amplitude noise mode k, and which channel (0 = u, 1 = b) it reads.
pub fn entry_symbol(r: usize, c: usize, k1: i64, k2: i64) -> (usize, Complex64) {
    let kn = ((k1 * k1 + k2 * k2) as f64).sqrt();
    let k = [k1 as f64, k2 as f64];
    let e = [k2 as f64 / kn, -(k1 as f64) / kn];
    let sym = |a: usize, b: usize| Complex64::new(0.0, 0.5 * (k[a] * e[b] + k[b] * e[a]));
    let anti = |a: usize, b: usize| Complex64::new(0.0, 0.5 * (k[a] * e[b] - k[b] * e[a]));
    match (r < 2, c < 2) {
        (true, true) => (0, sym(r, c)),
        (true, false) => (1, anti(r, c - 2)),
        (false, true) => (1, -anti(r - 2, c)),
        (false, false) => (0, -sym(r - 2, c - 2)),
    }
}

/// Exact expectation of the spatial mean of every entry of grad_spec o P,
/// evaluated from the Gaussian covariance of the noise coefficients.
pub fn exact_entry_means(grid: &Grid, lambda: f64, t: f64, nu: f64) -> Result<[[f64; 4]; 4]> {
    check_r_args(lambda, t, nu)?;
    let part = LpPartition::for_grid(grid);
    let mut out = [[CompensatedSum::default(); 4]; 4];
    for (idx, k1, k2) in grid.modes() {
        let ksq = grid.ksq(idx);
        if ksq == 0.0 {
            continue;
        }
        let r = ksq.sqrt();
        let l = low_profile(r / lambda);
        if l == 0.0 {
            continue;
        }
        let s = ou_variance(nu, ksq, t);
        let w = resonant_weight(&part, r) * l * l * s * resolvent_symbol(nu, ksq);
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = 0.0;
                for m in 0..4 {
                    let (ca, a) = entry_symbol(i, m, k1, k2);
                    let (cb, b) = entry_symbol(m, j, k1, k2);
                    if ca == cb {
                        acc += (a * b.conj()).re;
                    }
                }
                out[i][j].add(w * acc);
            }
        }
    }
    Ok(out.map(|row| row.map(|s| s.value())))
}

/// Spatial means of every entry of grad_spec o P for one noise sample,
/// computed by Parseval with the resonant weight.
pub fn sample_entry_means(state: &NoiseState, lambda: f64) -> [[f64; 4]; 4] {
    let grid = state.grid();
    let part = LpPartition::for_grid(grid);
    let nu = state.nu;
    let mut out = [[0.0; 4]; 4];
    for (idx, k1, k2) in grid.modes() {
        let ksq = grid.ksq(idx);
        if ksq == 0.0 {
            continue;
        }
        let r = ksq.sqrt();
        let l = low_profile(r / lambda);
        if l == 0.0 {
            continue;
        }
        let f = [state.f_u[idx] * l, state.f_b[idx] * l];
        let mut a = [[Complex64::new(0.0, 0.0); 4]; 4];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, z) in row.iter_mut().enumerate() {
                let (ch, s) = entry_symbol(i, j, k1, k2);
                *z = f[ch] * s;
            }
        }
        let w = resonant_weight(&part, r) * resolvent_symbol(nu, ksq);
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = 0.0;
                for m in 0..4 {
                    acc += (a[i][m] * a[m][j].conj()).re;
                }
                out[i][j] += w * acc;
            }
        }
    }
    out
}

/// Mean and standard error of one entry across samples.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntryStat {
    pub i: usize,
    pub j: usize,
    pub mean: f64,
    pub stderr: f64,
    pub expected: f64,
    pub z_score: f64,
}

/// Monte Carlo report on the zeroth chaos of the resonant product.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChaosReport {
    pub lambda: f64,
    pub t: f64,
    pub nu: f64,
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub r_lambda: f64,
    pub entries: Vec<EntryStat>,
}

impl ChaosReport {
    pub fn entry(&self, i: usize, j: usize) -> &EntryStat {
        &self.entries[4 * i + j]
    }

    pub fn max_abs_z(&self) -> f64 {
        self.entries.iter().map(|e| e.z_score.abs()).fold(0.0, f64::max)
    }
}

/// Minimum ensemble size accepted by the Monte Carlo diagnostics.
pub const MIN_SAMPLES: usize = 100;

/// Ensemble statistics of the 16 entry means of grad_spec o P at time `t`.
pub fn chaos_diagnostics(
    grid: &Grid,
    samples: usize,
    lambda: f64,
    t: f64,
    nu: f64,
    seed: u64,
) -> Result<ChaosReport> {
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    let r = r_lambda(lambda, t, nu)?;
    let per_sample: Vec<[[f64; 4]; 4]> = (0..samples as u64)
        .into_par_iter()
        .map(|s| sample_at(grid, nu, t, seed, s).map(|st| sample_entry_means(&st, lambda)))
        .collect::<Result<_>>()?;
    let mut entries = Vec::with_capacity(16);
    for i in 0..4 {
        for j in 0..4 {
            let v: Vec<f64> = per_sample.iter().map(|m| m[i][j]).collect();
            let (mean, se) = mean_stderr(&v);
            let expected = if i == j { r } else { 0.0 };
            entries.push(EntryStat {
                i,
                j,
                mean,
                stderr: se,
                expected,
                z_score: (mean - expected) / se,
            });
        }
    }
    Ok(ChaosReport {
        lambda,
        t,
        nu,
        n: grid.n(),
        samples,
        seed,
        r_lambda: r,
        entries,
    })
}

/// Per-block variance of the renormalized (4,4) entry for several thresholds,
/// and Cauchy differences between consecutive thresholds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VarianceReport {
    pub lambdas: Vec<f64>,
    pub blocks: Vec<i32>,
    /// `variance[l][b]`: ensemble mean of ||Delta_b (Z^lambda_l - E Z^lambda_l)||^2_{L^2}
    pub variance: Vec<Vec<f64>>,
    /// ensemble mean of ||Z^{lambda_l} - Z^{lambda_{l+1}}||^2 in B^{-kappa}_{2,2}
    pub cauchy: Vec<f64>,
    pub kappa: f64,
    pub samples: usize,
}

impl VarianceReport {
    /// Blocks whose support 2^j [3/4, 8/3] lies inside |k| <= 4/3 lambda_min,
    /// where the mollified noise of every threshold has content.
    pub fn comparable_blocks(&self) -> Vec<usize> {
        let lmin = self.lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
        (0..self.blocks.len())
            .filter(|&b| 2f64.powi(self.blocks[b]) * 8.0 / 3.0 <= 4.0 / 3.0 * lmin)
            .collect()
    }

    /// Largest ratio across thresholds of per-block variances over the
    /// comparable blocks.
    pub fn max_variance_ratio(&self) -> f64 {
        let mut worst: f64 = 1.0;
        for b in self.comparable_blocks() {
            let v: Vec<f64> = self.variance.iter().map(|row| row[b]).collect();
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(0.0, f64::max);
            if lo > 0.0 {
                worst = worst.max(hi / lo);
            }
        }
        worst
    }

    pub fn cauchy_decreasing(&self) -> bool {
        self.cauchy.windows(2).all(|w| w[1] < w[0])
    }
}

/// Renormalized (4,4) entry of the resonant product for one noise sample.
pub fn renormalized_corner(state: &NoiseState, lambda: f64) -> Result<SpectralField> {
    let (lu, lb) = state.fields(Some(lambda));
    let a = nabla_spec(&lu, &lb);
    let p = resolvent(&a, state.nu);
    let mut z = resonant_entry(&a, &p, 3, 3);
    z.coeffs_mut()[0] -= Complex64::new(r_lambda(lambda, state.t, state.nu)?, 0.0);
    Ok(z)
}

pub fn variance_profile(
    grid: &Grid,
    lambdas: &[f64],
    samples: usize,
    t: f64,
    nu: f64,
    kappa: f64,
    seed: u64,
) -> Result<VarianceReport> {
    if samples < 2 || lambdas.is_empty() {
        return Err(Error::InvalidParameter("need at least two samples and one threshold".into()));
    }
    let part = LpPartition::for_grid(grid);
    let blocks: Vec<i32> = part.blocks().collect();
    let nb = blocks.len();
    let nl = lambdas.len();
    // per sample: block energies per threshold, and weighted differences
    let per: Vec<(Vec<Vec<f64>>, Vec<f64>)> = (0..samples as u64)
        .into_par_iter()
        .map(|s| -> Result<_> {
            let st = sample_at(grid, nu, t, seed, s)?;
            let zs: Vec<SpectralField> = lambdas
                .iter()
                .map(|&l| renormalized_corner(&st, l))
                .collect::<Result<_>>()?;
            let energies = zs
                .iter()
                .map(|z| blocks.iter().map(|&j| block_energy(z, j)).collect())
                .collect();
            let diffs = zs
                .windows(2)
                .map(|w| {
                    let d = &w[0] - &w[1];
                    blocks
                        .iter()
                        .map(|&j| f64::powf(2.0, -2.0 * kappa * j as f64) * block_energy(&d, j))
                        .sum()
                })
                .collect();
            Ok((energies, diffs))
        })
        .collect::<Result<_>>()?;
    let mut variance = vec![vec![0.0; nb]; nl];
    for (l, row) in variance.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            let x: Vec<f64> = per.iter().map(|p| p.0[l][b]).collect();
            *v = pairwise_sum(&x) / samples as f64;
        }
    }
    let cauchy = (0..nl.saturating_sub(1))
        .map(|l| {
            let x: Vec<f64> = per.iter().map(|p| p.1[l]).collect();
            pairwise_sum(&x) / samples as f64
        })
        .collect();
    Ok(VarianceReport {
        lambdas: lambdas.to_vec(),
        blocks,
        variance,
        cauchy,
        kappa,
        samples,
    })
}

/// ||Delta_j f||^2_{L^2} by Parseval.
fn block_energy(f: &SpectralField, j: i32) -> f64 {
    let g = f.grid();
    g.modes()
        .map(|(i, _, _)| {
            let w = block_symbol(j, g.ksq(i).sqrt());
            w * w * f.coeffs()[i].norm_sqr()
        })
        .sum()
}

/// Block structure of the gradient matrix used by tests and diagnostics.
pub fn block_of(t: &TensorField4, bi: usize, bj: usize) -> TensorField2 {
    t.block(bi, bj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_r(lambda: f64, t: f64, nu: f64) -> f64 {
        let kmax = lambda.ceil() as i64 + 1;
        let mut terms = Vec::new();
        for k1 in -kmax..=kmax {
            for k2 in -kmax..=kmax {
                if k1 == 0 && k2 == 0 {
                    continue;
                }
                let ksq = (k1 * k1 + k2 * k2) as f64;
                let l = low_profile(ksq.sqrt() / lambda);
                terms.push(0.25 * l * l * (1.0 - (-2.0 * nu * ksq * t).exp()) / nu / (nu * ksq / 2.0 + 1.0));
            }
        }
        terms.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut s = CompensatedSum::default();
        for x in terms {
            s.add(x);
        }
        s.value()
    }

    #[test]
    fn comparable_blocks_stop_below_smallest_cutoff() {
        let rep = VarianceReport {
            lambdas: vec![32.0, 16.0, 64.0],
            blocks: (-1..=6).collect(),
            variance: vec![vec![1.0; 8], vec![1.5; 8], vec![1.2; 8]],
            cauchy: vec![],
            kappa: 0.02,
            samples: 2,
        };
        let kept: Vec<i32> = rep.comparable_blocks().iter().map(|&b| rep.blocks[b]).collect();
        assert_eq!(kept, vec![-1, 0, 1, 2, 3]);
        assert_eq!(rep.max_variance_ratio(), 1.5);
    }

    #[test]
    fn r_lambda_edge_cases() {
        assert_eq!(r_lambda(8.0, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(r_lambda(1.0, 3.0, 1.0).unwrap(), 0.0);
        assert!(r_lambda(0.5, 1.0, 1.0).is_err());
        assert!(r_lambda(4.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn r_lambda_matches_brute_force() {
        for &(l, t, nu) in &[(8.0, 10.0, 1.0), (5.5, 0.3, 0.7), (17.0, 2.0, 2.0)] {
            let a = r_lambda(l, t, nu).unwrap();
            let b = brute_force_r(l, t, nu);
            assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0), "{a} {b}");
        }
    }

    #[test]
    fn nabla_spec_structure() {
        let g = Grid::new(16).unwrap();
        let s = sample_at(&g, 1.0, 0.5, 3, 0).unwrap();
        let (xu, xb) = s.fields(None);
        let ns = nabla_spec(&xu, &xb);
        assert!((&ns.block(1, 1) + &ns.block(0, 0)).norm() == 0.0);
        assert!((&ns.block(1, 0) + &ns.block(0, 1)).norm() == 0.0);
        let tr = ns.get(0, 0) + ns.get(1, 1);
        assert!(tr.max_abs_coeff() < 1e-14);
        let zero = VectorField::zeros(&g);
        let nz = nabla_spec(&xu, &zero);
        assert!(nz.block(0, 1).norm() == 0.0);
    }

    #[test]
    fn resonant_weight_is_one_on_grid() {
        let g = Grid::new(64).unwrap();
        let part = LpPartition::for_grid(&g);
        for (idx, _, _) in g.modes() {
            assert!((resonant_weight(&part, g.ksq(idx).sqrt()) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_means_are_r_times_identity() {
        let g = Grid::new(32).unwrap();
        let m = exact_entry_means(&g, 12.0, 0.5, 1.0).unwrap();
        let r = r_lambda(12.0, 0.5, 1.0).unwrap();
        for (i, row) in m.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let want = if i == j { r } else { 0.0 };
                assert!((v - want).abs() < 1e-12 * r, "({i},{j}) {v} {want}");
            }
        }
    }

    #[test]
    fn parseval_means_match_resonant_field() {
        let g = Grid::new(16).unwrap();
        let s = sample_at(&g, 1.0, 0.5, 5, 1).unwrap();
        let means = sample_entry_means(&s, 6.0);
        let (lu, lb) = s.fields(Some(6.0));
        let a = nabla_spec(&lu, &lb);
        let p = resolvent(&a, 1.0);
        let res = resonant_matrix(&a, &p);
        for i in 0..4 {
            for j in 0..4 {
                assert!((res.get(i, j).mean() - means[i][j]).abs() < 1e-12);
            }
        }
        let e = enhanced_noise(&s, 6.0).unwrap();
        let r = r_lambda(6.0, 0.5, 1.0).unwrap();
        assert!((e.resonant.get(2, 2).mean() - (means[2][2] - r)).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_gives_zero_enhancement() {
        let g = Grid::new(16).unwrap();
        let s = NoiseState::new(&g, 1.0, 0).unwrap();
        let e = enhanced_noise(&s, 8.0).unwrap();
        assert_eq!(e.r_value, 0.0);
        assert_eq!(e.resonant.max_abs_coeff(), 0.0);
        let one = sample_at(&g, 1.0, 0.5, 1, 0).unwrap();
        assert_eq!(enhanced_noise(&one, 1.0).unwrap().resonant.max_abs_coeff(), 0.0);
    }

    #[test]
    fn chaos_rejects_small_ensembles() {
        let g = Grid::new(8).unwrap();
        assert!(chaos_diagnostics(&g, 10, 4.0, 0.5, 1.0, 0).is_err());
    }
}
