//! Exact Ornstein-Uhlenbeck sampling of the stochastic convolution.
//!
//! The divergence-free noise is expanded as X = sum_m F(m) e_m with
//! e_m(x) = e^{i m.x} m_perp / |m| and m_perp = (m2, -m1). Each coefficient
//! solves dF = -nu |m|^2 F dt + dW_m, advanced with the exact transition
//! law. Reality of X forces F(-m) = -conj(F(m)), so only a half lattice is
//! sampled.

use std::io::Write;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::besov::low_profile;
use crate::error::{Error, Result};
use crate::spectral::random::random_divfree;
use crate::stats::mean_stderr;
use crate::spectral::{transverse_mode, Grid, SpectralField, VectorField};

/// Mixes two words into a well-spread seed.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 1 - e^{-x} computed without cancellation.
fn one_minus_exp_neg(x: f64) -> f64 {
    -(-x).exp_m1()
}

/// Variance of F(m) at time t when started from zero.
pub fn ou_variance(nu: f64, ksq: f64, t: f64) -> f64 {
    one_minus_exp_neg(2.0 * nu * ksq * t) / (2.0 * nu * ksq)
}

/// Coefficients of the stochastic convolution for the u and b channels.
#[derive(Clone, Debug)]
pub struct NoiseState {
    grid: Grid,
    pub nu: f64,
    pub t: f64,
    pub step: u64,
    pub seed: u64,
    /// Modes with |m| above this radius stay zero.
    pub mode_cutoff: Option<f64>,
    pub f_u: Vec<Complex64>,
    pub f_b: Vec<Complex64>,
}

fn in_half_lattice(k1: i64, k2: i64) -> bool {
    k1 > 0 || (k1 == 0 && k2 > 0)
}

impl NoiseState {
    /// Zero noise at t = 0.
    pub fn new(grid: &Grid, nu: f64, seed: u64) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::InvalidParameter(format!("viscosity must be positive, got {nu}")));
        }
        Ok(NoiseState {
            grid: grid.clone(),
            nu,
            t: 0.0,
            step: 0,
            seed,
            mode_cutoff: None,
            f_u: vec![Complex64::new(0.0, 0.0); grid.len()],
            f_b: vec![Complex64::new(0.0, 0.0); grid.len()],
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn rng(&self, channel: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.step.wrapping_mul(2).wrapping_add(channel));
        rng
    }

    /// Advances both channels by `h` with the exact transition law.
    pub fn ou_step(&mut self, h: f64) -> Result<()> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {h}")));
        }
        let grid = self.grid.clone();
        let nu = self.nu;
        let cutoff_sq = self.mode_cutoff.map(|c| c * c);
        for channel in 0..2u64 {
            let mut rng = self.rng(channel);
            let f = if channel == 0 { &mut self.f_u } else { &mut self.f_b };
            for (idx, k1, k2) in grid.modes() {
                if !in_half_lattice(k1, k2) {
                    continue;
                }
                let ksq = grid.ksq(idx);
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                if cutoff_sq.is_some_and(|c| ksq > c) {
                    continue;
                }
                let decay = (-nu * ksq * h).exp();
                let sd = (ou_variance(nu, ksq, h) / 2.0).sqrt();
                let z = f[idx] * decay + Complex64::new(a, b) * sd;
                f[idx] = z;
                f[grid.conj_index(idx)] = -z.conj();
            }
        }
        self.t += h;
        self.step += 1;
        Ok(())
    }

    /// Vector fields X_u, X_b, optionally mollified by the low profile at `lambda`.
    pub fn fields(&self, lambda: Option<f64>) -> (VectorField, VectorField) {
        (
            self.channel_field(&self.f_u, lambda),
            self.channel_field(&self.f_b, lambda),
        )
    }

    fn channel_field(&self, f: &[Complex64], lambda: Option<f64>) -> VectorField {
        let g = &self.grid;
        let mut v = VectorField::zeros(g);
        for (idx, k1, k2) in g.modes() {
            let ksq = g.ksq(idx);
            if ksq == 0.0 {
                continue;
            }
            let kn = ksq.sqrt();
            let w = lambda.map_or(1.0, |l| low_profile(kn / l));
            let z = f[idx] * (w / kn);
            v.c[0].coeffs_mut()[idx] = z * k2 as f64;
            v.c[1].coeffs_mut()[idx] = z * -(k1 as f64);
        }
        v
    }

    /// Writes one JSON line per requested mode with the current coefficients.
    pub fn write_trajectory<W: Write>(&self, mut w: W, modes: &[(i64, i64)]) -> Result<()> {
        for &(k1, k2) in modes {
            let idx = self
                .grid
                .index(k1, k2)
                .ok_or_else(|| Error::InvalidParameter(format!("mode ({k1},{k2}) outside grid")))?;
            for (channel, f) in [("u", &self.f_u), ("b", &self.f_b)] {
                let line = serde_json::json!({
                    "t": self.t,
                    "channel": channel,
                    "k1": k1,
                    "k2": k2,
                    "re": f[idx].re,
                    "im": f[idx].im,
                });
                writeln!(w, "{line}")?;
            }
        }
        Ok(())
    }
}

/// Independent sample of the noise at time `t` started from zero.
pub fn sample_at(grid: &Grid, nu: f64, t: f64, seed: u64, sample: u64) -> Result<NoiseState> {
    let mut s = NoiseState::new(grid, nu, mix_seed(seed, sample))?;
    s.ou_step(t)?;
    Ok(s)
}

/// Weights (w0, w1) with int_0^h e^{-a(h-s)} x(s) ds = w0 x(0) + w1 x(h)
/// exactly for x linear on [0, h].
pub fn exp_trapezoid_weights(a: f64, h: f64) -> (f64, f64) {
    let x = a * h;
    let (phi1, g) = if x < 1e-4 {
        (
            1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0,
            0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0,
        )
    } else {
        (one_minus_exp_neg(x) / x, (1.0 - (-x).exp() * (1.0 + x)) / (x * x))
    };
    (h * g, h * (phi1 - g))
}

/// Advances Q solving (d_t - nu Delta) Q = 2 X over one step, given X at both ends.
pub fn q_update(
    q: &VectorField,
    x_start: &VectorField,
    x_end: &VectorField,
    h: f64,
    nu: f64,
) -> Result<VectorField> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {h}")));
    }
    let g = q.grid().clone();
    let mut out = VectorField::zeros(&g);
    for (idx, _, _) in g.modes() {
        let a = nu * g.ksq(idx);
        if a == 0.0 {
            continue;
        }
        let (w0, w1) = exp_trapezoid_weights(a, h);
        let e = (-a * h).exp();
        for c in 0..2 {
            out.c[c].coeffs_mut()[idx] = q.c[c].coeffs()[idx] * e
                + 2.0 * (x_start.c[c].coeffs()[idx] * w0 + x_end.c[c].coeffs()[idx] * w1);
        }
    }
    Ok(out)
}

/// Deterministic description of a divergence-free vector field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    Zero,
    /// amplitude (re + i im) times e^{i k.x} k_perp/|k|, plus its conjugate
    Mode { k1: i64, k2: i64, re: f64, im: f64 },
    /// Gaussian field with amplitude |k|^{-decay}, |k|_inf <= band, scaled to `l2`
    Random { seed: u64, decay: f64, band: i64, l2: f64 },
}

impl FieldSpec {
    pub fn build(&self, grid: &Grid) -> Result<VectorField> {
        match *self {
            FieldSpec::Zero => Ok(VectorField::zeros(grid)),
            FieldSpec::Mode { k1, k2, re, im } => transverse_mode(grid, k1, k2, Complex64::new(re, im)),
            FieldSpec::Random { seed, decay, band, l2 } => {
                if band < 1 || !(l2 >= 0.0) {
                    return Err(Error::InvalidParameter("random field needs band >= 1 and l2 >= 0".into()));
                }
                Ok(random_divfree(grid, seed, decay, band, l2))
            }
        }
    }
}

/// Deterministic forcing pair (zeta_u, zeta_b).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub u: FieldSpec,
    pub b: FieldSpec,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec {
            u: FieldSpec::Zero,
            b: FieldSpec::Zero,
        }
    }
}

pub fn perturbation_fields(spec: &PerturbationSpec, grid: &Grid) -> Result<(VectorField, VectorField)> {
    Ok((spec.u.build(grid)?, spec.b.build(grid)?))
}

/// Accepts an explicit forcing field only if it is divergence free and mean zero.
pub fn perturbation_from_field(v: VectorField, tol: f64) -> Result<VectorField> {
    let r = v.divergence_residual();
    if r > tol {
        return Err(Error::NotDivergenceFree(r));
    }
    if !v.is_mean_zero(tol) {
        return Err(Error::NonzeroMean(v.c[0].mean().hypot(v.c[1].mean())));
    }
    Ok(v)
}

/// Scalar of the coefficient F_u(m) for diagnostics.
pub fn coefficient(state: &NoiseState, k1: i64, k2: i64, channel: usize) -> Option<Complex64> {
    let idx = state.grid.index(k1, k2)?;
    Some(if channel == 0 { state.f_u[idx] } else { state.f_b[idx] })
}

/// Coefficient array of one channel as a field, for serialization.
pub fn coefficient_field(state: &NoiseState, channel: usize) -> SpectralField {
    let f = if channel == 0 { &state.f_u } else { &state.f_b };
    SpectralField::from_raw(&state.grid, f.clone())
}

/// Monte Carlo moments of one noise coefficient against the closed form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeStat {
    pub k1: i64,
    pub k2: i64,
    pub ksq: f64,
    pub expected: f64,
    /// E|F_u|^2 after one exact step of length t
    pub var_u: f64,
    pub se_u: f64,
    pub var_b: f64,
    pub se_b: f64,
    /// E|F_u|^2 after two steps of length t/2
    pub var_two_step: f64,
    pub se_two_step: f64,
    /// real and imaginary parts of E[F_u conj(F_b)]
    pub cross_re: f64,
    pub cross_im: f64,
    pub se_cross: f64,
}

impl ModeStat {
    /// Largest deviation from the closed form, in standard errors.
    pub fn max_z(&self) -> f64 {
        [
            (self.var_u - self.expected) / self.se_u,
            (self.var_b - self.expected) / self.se_b,
            (self.var_two_step - self.expected) / self.se_two_step,
            self.cross_re / self.se_cross,
            self.cross_im / self.se_cross,
        ]
        .iter()
        .fold(0.0, |a: f64, z| a.max(z.abs()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuStats {
    pub nu: f64,
    pub t: f64,
    pub paths: usize,
    pub seed: u64,
    pub n: usize,
    pub modes: Vec<ModeStat>,
}

/// Second moments of F_u(t, m), F_b(t, m) over independent paths started at zero.
pub fn ou_statistics(
    grid: &Grid,
    nu: f64,
    t: f64,
    paths: usize,
    modes: &[(i64, i64)],
    seed: u64,
) -> Result<OuStats> {
    use rayon::prelude::*;
    if paths < 2 {
        return Err(Error::InvalidParameter("need at least two paths".into()));
    }
    let idx: Vec<usize> = modes
        .iter()
        .map(|&(k1, k2)| {
            grid.index(k1, k2)
                .filter(|_| (k1, k2) != (0, 0))
                .ok_or_else(|| Error::InvalidParameter(format!("mode ({k1},{k2}) not on grid")))
        })
        .collect::<Result<_>>()?;
    let per_path: Vec<Vec<[f64; 5]>> = (0..paths as u64)
        .into_par_iter()
        .map(|p| -> Result<Vec<[f64; 5]>> {
            let one = sample_at(grid, nu, t, seed, 2 * p)?;
            let mut two = NoiseState::new(grid, nu, mix_seed(seed, 2 * p + 1))?;
            two.ou_step(0.5 * t)?;
            two.ou_step(0.5 * t)?;
            Ok(idx
                .iter()
                .map(|&i| {
                    let c = one.f_u[i] * one.f_b[i].conj();
                    [one.f_u[i].norm_sqr(), one.f_b[i].norm_sqr(), two.f_u[i].norm_sqr(), c.re, c.im]
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let column = |m: usize, q: usize| -> Vec<f64> { per_path.iter().map(|r| r[m][q]).collect() };
    let stats = modes
        .iter()
        .zip(&idx)
        .enumerate()
        .map(|(m, (&(k1, k2), &i))| {
            let ksq = grid.ksq(i);
            let (var_u, se_u) = mean_stderr(&column(m, 0));
            let (var_b, se_b) = mean_stderr(&column(m, 1));
            let (var_two_step, se_two_step) = mean_stderr(&column(m, 2));
            let (cross_re, se_re) = mean_stderr(&column(m, 3));
            let (cross_im, se_im) = mean_stderr(&column(m, 4));
            ModeStat {
                k1,
                k2,
                ksq,
                expected: ou_variance(nu, ksq, t),
                var_u,
                se_u,
                var_b,
                se_b,
                var_two_step,
                se_two_step,
                cross_re,
                cross_im,
                se_cross: se_re.max(se_im),
            }
        })
        .collect();
    Ok(OuStats {
        nu,
        t,
        paths,
        seed,
        n: grid.n(),
        modes: stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fields_are_real_divfree_meanzero() {
        let g = Grid::new(16).unwrap();
        let s = sample_at(&g, 1.0, 0.5, 7, 0).unwrap();
        let (xu, xb) = s.fields(None);
        for x in [&xu, &xb] {
            assert!(x.hermitian_residual() < 1e-15);
            assert!(x.divergence_residual() < 1e-15);
            assert!(x.is_mean_zero(0.0));
        }
        let (lu, _) = s.fields(Some(4.0));
        assert!(lu.c[0].get(5, 0).norm() == 0.0);
    }

    #[test]
    fn counter_based_streams_are_reproducible() {
        let g = Grid::new(8).unwrap();
        let mut a = NoiseState::new(&g, 1.0, 42).unwrap();
        let mut b = a.clone();
        for _ in 0..3 {
            a.ou_step(0.1).unwrap();
        }
        for _ in 0..3 {
            b.ou_step(0.1).unwrap();
        }
        assert_eq!(a.f_u, b.f_u);
        assert_ne!(a.f_u, a.f_b);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = Grid::new(8).unwrap();
        assert!(NoiseState::new(&g, 0.0, 1).is_err());
        let mut s = NoiseState::new(&g, 1.0, 1).unwrap();
        assert!(s.ou_step(-0.1).is_err());
        let mut v = VectorField::zeros(&g);
        v.c[0].set_mode(1, 0, Complex64::new(1.0, 0.0)).unwrap();
        assert!(perturbation_from_field(v, 1e-12).is_err());
    }

    #[test]
    fn trapezoid_weights_integrate_linear_data() {
        for &(a, h) in &[(1e-9, 0.1), (0.5, 0.2), (40.0, 0.3)] {
            let (w0, w1) = exp_trapezoid_weights(a, h);
            // x = 1 gives (1 - e^{-ah}) / a
            let want = one_minus_exp_neg(a * h) / a;
            assert!((w0 + w1 - want).abs() < 1e-12 * want.max(1.0));
            // x(s) = s gives int e^{-a(h-s)} s ds; the closed form cancels badly for small ah
            if a * h < 1e-3 {
                assert!((w1 * h - h * h / 2.0).abs() < 1e-9 * h * h);
                continue;
            }
            let want_s = h / a - one_minus_exp_neg(a * h) / (a * a);
            let got_s = w1 * h;
            assert!((got_s - want_s).abs() < 1e-9 * want_s.abs().max(1e-12), "{a} {got_s} {want_s}");
        }
    }

    #[test]
    fn q_relaxes_to_steady_state() {
        let g = Grid::new(8).unwrap();
        let x = transverse_mode(&g, 1, 1, Complex64::new(1.0, 0.0)).unwrap();
        let mut q = VectorField::zeros(&g);
        for _ in 0..400 {
            q = q_update(&q, &x, &x, 0.05, 1.0).unwrap();
        }
        // (d_t + nu |k|^2) Q = 2 X
        let want = x.scaled(2.0 / 2.0);
        assert!(q.rel_diff(&want) < 1e-12);
    }

    #[test]
    fn trajectory_lines() {
        let g = Grid::new(8).unwrap();
        let s = sample_at(&g, 1.0, 0.1, 1, 2).unwrap();
        let mut buf = Vec::new();
        s.write_trajectory(&mut buf, &[(1, 0), (0, 2)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(v["k1"], 1);
    }

    #[test]
    fn ou_moments_match_closed_form() {
        let g = Grid::new(8).unwrap();
        let st = ou_statistics(&g, 1.0, 0.7, 2000, &[(1, 0), (2, 0), (1, 1)], 4).unwrap();
        for m in &st.modes {
            assert!(m.max_z() < 4.0, "{m:?}");
        }
        assert!(ou_statistics(&g, 1.0, 0.7, 10, &[(0, 0)], 4).is_err());
    }
}
