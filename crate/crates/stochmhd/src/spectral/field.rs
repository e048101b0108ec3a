use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

use super::grid::Grid;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Real scalar field on the torus stored by its Fourier coefficients,
/// f(x) = sum_k f_k e^{i k.x}, with Hermitian symmetry f_{-k} = conj(f_k).
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl PartialEq for SpectralField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.coeffs == other.coeffs
    }
}

impl SpectralField {
    pub fn zeros(grid: &Grid) -> Self {
        SpectralField {
            grid: grid.clone(),
            coeffs: vec![ZERO; grid.len()],
        }
    }

    /// Wraps a coefficient array; Nyquist entries are cleared.
    pub fn from_coeffs(grid: &Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        let mut f = SpectralField {
            grid: grid.clone(),
            coeffs,
        };
        f.clear_inactive();
        Ok(f)
    }

    /// Builds coefficients from a function of the wavenumber.
    pub fn from_fn(grid: &Grid, mut f: impl FnMut(i64, i64) -> Complex64) -> Self {
        let mut out = Self::zeros(grid);
        for (idx, k1, k2) in grid.modes() {
            out.coeffs[idx] = f(k1, k2);
        }
        out
    }

    /// Projection of point values sampled on the N x N grid.
    pub fn from_physical(grid: &Grid, values: &[f64]) -> Result<Self> {
        Self::from_physical_at(grid, values, grid.n())
    }

    /// Fourier projection of point values sampled on a `size x size` grid.
    pub fn from_physical_at(grid: &Grid, values: &[f64], size: usize) -> Result<Self> {
        if values.len() != size * size {
            return Err(Error::InvalidParameter(format!(
                "expected {} point values, got {}",
                size * size,
                values.len()
            )));
        }
        Ok(SpectralField {
            grid: grid.clone(),
            coeffs: grid.from_physical(values, size),
        })
    }

    pub(crate) fn from_raw(grid: &Grid, coeffs: Vec<Complex64>) -> Self {
        SpectralField {
            grid: grid.clone(),
            coeffs,
        }
    }

    fn clear_inactive(&mut self) {
        for i in 0..self.coeffs.len() {
            if !self.grid.is_active(i) {
                self.coeffs[i] = ZERO;
            }
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient at `(k1, k2)`; zero outside the grid.
    pub fn get(&self, k1: i64, k2: i64) -> Complex64 {
        self.grid.index(k1, k2).map_or(ZERO, |i| self.coeffs[i])
    }

    /// Sets the coefficient at `k` and its conjugate partner at `-k`.
    pub fn set_mode(&mut self, k1: i64, k2: i64, z: Complex64) -> Result<()> {
        let idx = self.grid.index(k1, k2).ok_or_else(|| {
            Error::InvalidParameter(format!("mode ({k1},{k2}) outside the grid"))
        })?;
        let cj = self.grid.conj_index(idx);
        if cj == idx {
            self.coeffs[idx] = Complex64::new(z.re, 0.0);
        } else {
            self.coeffs[idx] = z;
            self.coeffs[cj] = z.conj();
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn remove_mean(&mut self) {
        self.coeffs[0] = ZERO;
    }

    pub fn is_mean_zero(&self, tol: f64) -> bool {
        self.coeffs[0].norm() <= tol
    }

    /// Largest violation of f_{-k} = conj(f_k).
    pub fn hermitian_residual(&self) -> f64 {
        let g = &self.grid;
        (0..g.len())
            .map(|i| (self.coeffs[i] - self.coeffs[g.conj_index(i)].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Replaces the coefficients by their Hermitian-symmetric part.
    pub fn symmetrize(&mut self) {
        let g = self.grid.clone();
        let old = self.coeffs.clone();
        for i in 0..g.len() {
            self.coeffs[i] = 0.5 * (old[i] + old[g.conj_index(i)].conj());
        }
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Multiplies by a real Fourier symbol `s(k1, k2, |k|^2)`.
    pub fn map_symbol(&self, s: impl Fn(i64, i64, f64) -> f64) -> Self {
        let mut out = Self::zeros(&self.grid);
        for (idx, k1, k2) in self.grid.modes() {
            out.coeffs[idx] = self.coeffs[idx] * s(k1, k2, self.grid.ksq(idx));
        }
        out
    }

    /// Multiplies by a radial symbol `s(|k|)`.
    pub fn map_radial(&self, s: impl Fn(f64) -> f64) -> Self {
        self.map_symbol(|_, _, ksq| s(ksq.sqrt()))
    }

    /// Partial derivative along `x_{dir+1}`.
    pub fn deriv(&self, dir: usize) -> Self {
        let mut out = Self::zeros(&self.grid);
        for (idx, k1, k2) in self.grid.modes() {
            let k = if dir == 0 { k1 } else { k2 } as f64;
            out.coeffs[idx] = I * k * self.coeffs[idx];
        }
        out
    }

    pub fn laplacian(&self) -> Self {
        self.map_symbol(|_, _, ksq| -ksq)
    }

    /// e^{nu t Delta} f.
    pub fn heat(&self, nu: f64, t: f64) -> Result<Self> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        Ok(self.map_symbol(|_, _, ksq| (-nu * ksq * t).exp()))
    }

    /// (-Delta)^{eps/2} f.
    pub fn frac_laplacian(&self, eps: f64) -> Self {
        self.map_symbol(|_, _, ksq| if ksq == 0.0 { 0.0 } else { ksq.powf(0.5 * eps) })
    }

    /// L^2 inner product with respect to normalized measure.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Inhomogeneous Sobolev norm with weight (1 + |k|^2)^{s/2}.
    pub fn norm_h(&self, s: f64) -> f64 {
        self.weighted_norm(|ksq| (1.0 + ksq).powf(s))
    }

    /// Homogeneous Sobolev norm with weight |k|^s.
    pub fn norm_hdot(&self, s: f64) -> f64 {
        self.weighted_norm(|ksq| if ksq == 0.0 { 0.0 } else { ksq.powf(s) })
    }

    fn weighted_norm(&self, w: impl Fn(f64) -> f64) -> f64 {
        self.grid
            .modes()
            .map(|(i, _, _)| w(self.grid.ksq(i)) * self.coeffs[i].norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn to_physical(&self) -> Vec<f64> {
        self.grid.to_physical(&self.coeffs, self.grid.n())
    }

    pub fn to_physical_at(&self, size: usize) -> Vec<f64> {
        self.grid.to_physical(&self.coeffs, size)
    }

    /// Dealiased product: the exact Fourier projection of f g onto the grid.
    pub fn product(&self, other: &Self) -> Self {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let m = self.grid.m();
        let (a, b) = self.grid.to_physical_pair(&self.coeffs, &other.coeffs, m);
        let prod: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        SpectralField::from_raw(&self.grid, self.grid.from_physical(&prod, m))
    }

    pub fn scaled(&self, a: f64) -> Self {
        SpectralField {
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().map(|z| z * a).collect(),
        }
    }

    /// self + a * other, in place.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        for (z, w) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *z += w * a;
        }
    }

    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        SpectralField {
            grid: self.grid.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(x, y)| x * a + y * b)
                .collect(),
        }
    }

    /// Distance in L^2 relative to `max(|a|, |b|, floor)`.
    pub fn rel_diff(&self, other: &Self) -> f64 {
        let d = (self - other).norm();
        d / self.norm().max(other.norm()).max(1e-300)
    }
}

/// Divergence-free or general vector field with two spectral components.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub c: [SpectralField; 2],
}

impl VectorField {
    pub fn zeros(grid: &Grid) -> Self {
        VectorField {
            c: [SpectralField::zeros(grid), SpectralField::zeros(grid)],
        }
    }

    pub fn new(c0: SpectralField, c1: SpectralField) -> Result<Self> {
        if c0.grid != c1.grid {
            return Err(Error::GridMismatch(c0.grid.n(), c1.grid.n()));
        }
        Ok(VectorField { c: [c0, c1] })
    }

    pub fn grid(&self) -> &Grid {
        self.c[0].grid()
    }

    pub fn map(&self, f: impl Fn(&SpectralField) -> SpectralField) -> Self {
        VectorField {
            c: [f(&self.c[0]), f(&self.c[1])],
        }
    }

    pub fn divergence(&self) -> SpectralField {
        &self.c[0].deriv(0) + &self.c[1].deriv(1)
    }

    /// Scalar curl d1 v2 - d2 v1.
    pub fn curl(&self) -> SpectralField {
        &self.c[1].deriv(0) - &self.c[0].deriv(1)
    }

    /// Largest coefficient of the divergence.
    pub fn divergence_residual(&self) -> f64 {
        self.divergence().max_abs_coeff()
    }

    pub fn deriv(&self, dir: usize) -> Self {
        self.map(|f| f.deriv(dir))
    }

    pub fn laplacian(&self) -> Self {
        self.map(|f| f.laplacian())
    }

    pub fn heat(&self, nu: f64, t: f64) -> Result<Self> {
        Ok(VectorField {
            c: [self.c[0].heat(nu, t)?, self.c[1].heat(nu, t)?],
        })
    }

    pub fn frac_laplacian(&self, eps: f64) -> Self {
        self.map(|f| f.frac_laplacian(eps))
    }

    pub fn map_radial(&self, s: impl Fn(f64) -> f64 + Copy) -> Self {
        self.map(|f| f.map_radial(s))
    }

    pub fn inner(&self, other: &Self) -> f64 {
        self.c[0].inner(&other.c[0]) + self.c[1].inner(&other.c[1])
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn norm_h(&self, s: f64) -> f64 {
        self.c[0].norm_h(s).hypot(self.c[1].norm_h(s))
    }

    pub fn norm_hdot(&self, s: f64) -> f64 {
        self.c[0].norm_hdot(s).hypot(self.c[1].norm_hdot(s))
    }

    pub fn is_mean_zero(&self, tol: f64) -> bool {
        self.c.iter().all(|f| f.is_mean_zero(tol))
    }

    pub fn remove_mean(&mut self) {
        self.c.iter_mut().for_each(|f| f.remove_mean());
    }

    pub fn hermitian_residual(&self) -> f64 {
        self.c[0].hermitian_residual().max(self.c[1].hermitian_residual())
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|f| f.is_finite())
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.c[0].max_abs_coeff().max(self.c[1].max_abs_coeff())
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|f| f.scaled(a))
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        self.c[0].axpy(a, &other.c[0]);
        self.c[1].axpy(a, &other.c[1]);
    }

    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        VectorField {
            c: [
                self.c[0].combine(a, &other.c[0], b),
                self.c[1].combine(a, &other.c[1], b),
            ],
        }
    }

    pub fn rel_diff(&self, other: &Self) -> f64 {
        (self - other).norm() / self.norm().max(other.norm()).max(1e-300)
    }
}

/// 2 x 2 matrix-valued field, entry `e[i][j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField2 {
    pub e: [[SpectralField; 2]; 2],
}

impl TensorField2 {
    pub fn zeros(grid: &Grid) -> Self {
        let z = SpectralField::zeros(grid);
        TensorField2 {
            e: [[z.clone(), z.clone()], [z.clone(), z]],
        }
    }

    pub fn grid(&self) -> &Grid {
        self.e[0][0].grid()
    }

    pub fn map(&self, f: impl Fn(&SpectralField) -> SpectralField) -> Self {
        TensorField2 {
            e: [
                [f(&self.e[0][0]), f(&self.e[0][1])],
                [f(&self.e[1][0]), f(&self.e[1][1])],
            ],
        }
    }

    /// [div T]_i = sum_j d_j T_ij.
    pub fn divergence(&self) -> VectorField {
        VectorField {
            c: [
                &self.e[0][0].deriv(0) + &self.e[0][1].deriv(1),
                &self.e[1][0].deriv(0) + &self.e[1][1].deriv(1),
            ],
        }
    }

    pub fn transpose(&self) -> Self {
        TensorField2 {
            e: [
                [self.e[0][0].clone(), self.e[1][0].clone()],
                [self.e[0][1].clone(), self.e[1][1].clone()],
            ],
        }
    }

    pub fn symmetric_part(&self) -> Self {
        (self + &self.transpose()).scaled(0.5)
    }

    pub fn antisymmetric_part(&self) -> Self {
        (self - &self.transpose()).scaled(0.5)
    }

    /// Pointwise dealiased matrix-vector product (M w)_i = sum_j M_ij w_j.
    pub fn apply(&self, w: &VectorField) -> VectorField {
        let g = self.grid().clone();
        let m = g.m();
        let ph = g.to_physical_many(
            &[
                self.e[0][0].coeffs(),
                self.e[0][1].coeffs(),
                self.e[1][0].coeffs(),
                self.e[1][1].coeffs(),
                w.c[0].coeffs(),
                w.c[1].coeffs(),
            ],
            m,
        );
        let r0: Vec<f64> = (0..m * m)
            .map(|p| ph[0][p] * ph[4][p] + ph[1][p] * ph[5][p])
            .collect();
        let r1: Vec<f64> = (0..m * m)
            .map(|p| ph[2][p] * ph[4][p] + ph[3][p] * ph[5][p])
            .collect();
        let (a, b) = g.from_physical_pair(&r0, &r1, m);
        VectorField {
            c: [SpectralField::from_raw(&g, a), SpectralField::from_raw(&g, b)],
        }
    }

    pub fn inner(&self, other: &Self) -> f64 {
        (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| self.e[i][j].inner(&other.e[i][j]))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|f| f.scaled(a))
    }

    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        let f = |i: usize, j: usize| self.e[i][j].combine(a, &other.e[i][j], b);
        TensorField2 {
            e: [[f(0, 0), f(0, 1)], [f(1, 0), f(1, 1)]],
        }
    }
}

/// 4 x 4 matrix-valued field acting on the pair (u, b) of vector fields.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField4 {
    pub e: Vec<SpectralField>,
}

impl TensorField4 {
    pub fn zeros(grid: &Grid) -> Self {
        TensorField4 {
            e: vec![SpectralField::zeros(grid); 16],
        }
    }

    pub fn grid(&self) -> &Grid {
        self.e[0].grid()
    }

    pub fn get(&self, i: usize, j: usize) -> &SpectralField {
        &self.e[4 * i + j]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut SpectralField {
        &mut self.e[4 * i + j]
    }

    /// Assembles [[a, b], [c, d]] from 2 x 2 blocks.
    pub fn from_blocks(a: &TensorField2, b: &TensorField2, c: &TensorField2, d: &TensorField2) -> Self {
        let mut out = TensorField4::zeros(a.grid());
        for i in 0..2 {
            for j in 0..2 {
                *out.get_mut(i, j) = a.e[i][j].clone();
                *out.get_mut(i, j + 2) = b.e[i][j].clone();
                *out.get_mut(i + 2, j) = c.e[i][j].clone();
                *out.get_mut(i + 2, j + 2) = d.e[i][j].clone();
            }
        }
        out
    }

    /// Block `(bi, bj)` with `bi, bj` in {0, 1}.
    pub fn block(&self, bi: usize, bj: usize) -> TensorField2 {
        let f = |i: usize, j: usize| self.get(2 * bi + i, 2 * bj + j).clone();
        TensorField2 {
            e: [[f(0, 0), f(0, 1)], [f(1, 0), f(1, 1)]],
        }
    }

    pub fn map(&self, f: impl Fn(&SpectralField) -> SpectralField) -> Self {
        TensorField4 {
            e: self.e.iter().map(f).collect(),
        }
    }

    /// Pointwise dealiased product with the stacked vector (w_u, w_b).
    pub fn apply(&self, wu: &VectorField, wb: &VectorField) -> (VectorField, VectorField) {
        let g = self.grid().clone();
        let m = g.m();
        let mut refs: Vec<&[Complex64]> = self.e.iter().map(|f| f.coeffs()).collect();
        refs.extend([wu.c[0].coeffs(), wu.c[1].coeffs(), wb.c[0].coeffs(), wb.c[1].coeffs()]);
        let ph = g.to_physical_many(&refs, m);
        let out: Vec<Vec<f64>> = (0..4)
            .map(|i| {
                (0..m * m)
                    .map(|p| (0..4).map(|j| ph[4 * i + j][p] * ph[16 + j][p]).sum())
                    .collect()
            })
            .collect();
        let sp = g.from_physical_many(&out, m);
        let f = |i: usize| SpectralField::from_raw(&g, sp[i].clone());
        (
            VectorField { c: [f(0), f(1)] },
            VectorField { c: [f(2), f(3)] },
        )
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|f| f.scaled(a))
    }

    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        TensorField4 {
            e: self
                .e
                .iter()
                .zip(&other.e)
                .map(|(x, y)| x.combine(a, y, b))
                .collect(),
        }
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.e.iter().map(|f| f.max_abs_coeff()).fold(0.0, f64::max)
    }
}

macro_rules! linear_ops {
    ($t:ty) => {
        impl Add for &$t {
            type Output = $t;
            fn add(self, rhs: &$t) -> $t {
                self.combine(1.0, rhs, 1.0)
            }
        }
        impl Sub for &$t {
            type Output = $t;
            fn sub(self, rhs: &$t) -> $t {
                self.combine(1.0, rhs, -1.0)
            }
        }
        impl Add for $t {
            type Output = $t;
            fn add(self, rhs: $t) -> $t {
                (&self).combine(1.0, &rhs, 1.0)
            }
        }
        impl Sub for $t {
            type Output = $t;
            fn sub(self, rhs: $t) -> $t {
                (&self).combine(1.0, &rhs, -1.0)
            }
        }
        impl Neg for &$t {
            type Output = $t;
            fn neg(self) -> $t {
                self.scaled(-1.0)
            }
        }
        impl Neg for $t {
            type Output = $t;
            fn neg(self) -> $t {
                self.scaled(-1.0)
            }
        }
        impl Mul<f64> for &$t {
            type Output = $t;
            fn mul(self, a: f64) -> $t {
                self.scaled(a)
            }
        }
        impl Mul<f64> for $t {
            type Output = $t;
            fn mul(self, a: f64) -> $t {
                self.scaled(a)
            }
        }
        impl AddAssign<&$t> for $t {
            fn add_assign(&mut self, rhs: &$t) {
                *self = (&*self).combine(1.0, rhs, 1.0);
            }
        }
        impl SubAssign<&$t> for $t {
            fn sub_assign(&mut self, rhs: &$t) {
                *self = (&*self).combine(1.0, rhs, -1.0);
            }
        }
    };
}

linear_ops!(SpectralField);
linear_ops!(VectorField);
linear_ops!(TensorField2);
linear_ops!(TensorField4);
