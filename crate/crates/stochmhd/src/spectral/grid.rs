use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Default ratio between the dealiasing grid and the spectral grid.
pub const DEFAULT_PADDING: f64 = 1.5;

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Plans {
    fn new(planner: &mut FftPlanner<f64>, size: usize) -> Self {
        Plans {
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }
}

struct Inner {
    n: usize,
    m: usize,
    padding: f64,
    plans_n: Plans,
    plans_m: Plans,
    plans_2n: Plans,
    ksq: Vec<f64>,
}

/// Square N x N Fourier grid on the torus [0, 2pi)^2 with cached FFT plans.
///
/// Coefficients are stored row-major with index `i1 * n + i2`, where row `i1`
/// carries the wavenumber `k1` and column `i2` carries `k2`, both in standard
/// FFT order. The Nyquist row and column (`k = -n/2`) are never populated.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<Inner>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.inner.n)
            .field("m", &self.inner.m)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.inner.n == other.inner.n && self.inner.m == other.inner.m
    }
}

impl Grid {
    /// Grid with the default 3/2 dealiasing ratio.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_padding(n, DEFAULT_PADDING)
    }

    pub fn with_padding(n: usize, padding: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "grid size must be even and at least 4, got {n}"
            )));
        }
        if !(padding >= DEFAULT_PADDING) || !padding.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "padding factor must be at least 3/2, got {padding}"
            )));
        }
        let mut m = (padding * n as f64).ceil() as usize;
        if m % 2 == 1 {
            m += 1;
        }
        let mut planner = FftPlanner::new();
        let plans_n = Plans::new(&mut planner, n);
        let plans_m = Plans::new(&mut planner, m);
        let plans_2n = Plans::new(&mut planner, 2 * n);
        let mut ksq = vec![0.0; n * n];
        for i1 in 0..n {
            for i2 in 0..n {
                let k1 = wavenumber(i1, n) as f64;
                let k2 = wavenumber(i2, n) as f64;
                ksq[i1 * n + i2] = k1 * k1 + k2 * k2;
            }
        }
        Ok(Grid {
            inner: Arc::new(Inner {
                n,
                m,
                padding,
                plans_n,
                plans_m,
                plans_2n,
                ksq,
            }),
        })
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    /// Side of the dealiasing grid used for quadratic products.
    pub fn m(&self) -> usize {
        self.inner.m
    }

    pub fn padding(&self) -> f64 {
        self.inner.padding
    }

    pub fn len(&self) -> usize {
        self.inner.n * self.inner.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn wavenumber(&self, i: usize) -> i64 {
        wavenumber(i, self.inner.n)
    }

    /// Largest representable |k_i|.
    pub fn kmax(&self) -> i64 {
        self.inner.n as i64 / 2 - 1
    }

    pub fn k_of(&self, idx: usize) -> (i64, i64) {
        let n = self.inner.n;
        (self.wavenumber(idx / n), self.wavenumber(idx % n))
    }

    pub fn ksq(&self, idx: usize) -> f64 {
        self.inner.ksq[idx]
    }

    pub fn is_active(&self, idx: usize) -> bool {
        let n = self.inner.n;
        idx / n != n / 2 && idx % n != n / 2
    }

    /// Storage index of wavenumber `(k1, k2)`, if representable.
    pub fn index(&self, k1: i64, k2: i64) -> Option<usize> {
        let h = self.inner.n as i64 / 2;
        if k1.abs() >= h || k2.abs() >= h {
            return None;
        }
        let n = self.inner.n as i64;
        Some((k1.rem_euclid(n) * n + k2.rem_euclid(n)) as usize)
    }

    /// Index of `-k` for the mode stored at `idx`.
    pub fn conj_index(&self, idx: usize) -> usize {
        let n = self.inner.n;
        let (i1, i2) = (idx / n, idx % n);
        ((n - i1) % n) * n + (n - i2) % n
    }

    /// Active modes as `(index, k1, k2)`.
    pub fn modes(&self) -> impl Iterator<Item = (usize, i64, i64)> + '_ {
        (0..self.len())
            .filter(move |&i| self.is_active(i))
            .map(move |i| {
                let (k1, k2) = self.k_of(i);
                (i, k1, k2)
            })
    }

    fn plans(&self, size: usize) -> &Plans {
        if size == self.inner.n {
            &self.inner.plans_n
        } else if size == self.inner.m {
            &self.inner.plans_m
        } else if size == 2 * self.inner.n {
            &self.inner.plans_2n
        } else {
            panic!("no FFT plan for size {size}")
        }
    }

    /// Size of the grid used for exact cubic quadrature.
    pub fn cubic_size(&self) -> usize {
        2 * self.inner.n
    }

    fn fft2(&self, size: usize, buf: &mut [Complex64], inverse: bool) {
        let plans = self.plans(size);
        let fft = if inverse { &plans.inverse } else { &plans.forward };
        fft.process(buf);
        transpose(buf, size);
        fft.process(buf);
        transpose(buf, size);
    }

    fn embed(&self, coeffs: &[Complex64], size: usize, buf: &mut [Complex64]) {
        let n = self.inner.n;
        if size == n {
            buf.copy_from_slice(coeffs);
            return;
        }
        buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        let s = size as i64;
        for i1 in 0..n {
            if i1 == n / 2 {
                continue;
            }
            let r = (self.wavenumber(i1).rem_euclid(s) as usize) * size;
            for i2 in 0..n {
                if i2 == n / 2 {
                    continue;
                }
                let c = self.wavenumber(i2).rem_euclid(s) as usize;
                buf[r + c] = coeffs[i1 * n + i2];
            }
        }
    }

    fn extract(&self, buf: &[Complex64], size: usize, out: &mut [Complex64], scale: f64) {
        let n = self.inner.n;
        let s = size as i64;
        for i1 in 0..n {
            for i2 in 0..n {
                let idx = i1 * n + i2;
                if i1 == n / 2 || i2 == n / 2 {
                    out[idx] = Complex64::new(0.0, 0.0);
                    continue;
                }
                let r = self.wavenumber(i1).rem_euclid(s) as usize;
                let c = self.wavenumber(i2).rem_euclid(s) as usize;
                out[idx] = buf[r * size + c] * scale;
            }
        }
    }

    /// Point values of a Hermitian coefficient array on a `size x size` grid.
    pub fn to_physical(&self, coeffs: &[Complex64], size: usize) -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); size * size];
        self.embed(coeffs, size, &mut buf);
        self.fft2(size, &mut buf, true);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// Two inverse transforms for the price of one.
    pub fn to_physical_pair(
        &self,
        a: &[Complex64],
        b: &[Complex64],
        size: usize,
    ) -> (Vec<f64>, Vec<f64>) {
        let mut buf = vec![Complex64::new(0.0, 0.0); size * size];
        let mut tmp = vec![Complex64::new(0.0, 0.0); size * size];
        self.embed(a, size, &mut buf);
        self.embed(b, size, &mut tmp);
        let i = Complex64::new(0.0, 1.0);
        for (z, t) in buf.iter_mut().zip(&tmp) {
            *z += i * t;
        }
        self.fft2(size, &mut buf, true);
        let re = buf.iter().map(|z| z.re).collect();
        let im = buf.iter().map(|z| z.im).collect();
        (re, im)
    }

    /// Point values of many coefficient arrays, pairing transforms.
    pub fn to_physical_many(&self, fields: &[&[Complex64]], size: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(fields.len());
        let mut it = fields.chunks(2);
        for chunk in &mut it {
            if chunk.len() == 2 {
                let (a, b) = self.to_physical_pair(chunk[0], chunk[1], size);
                out.push(a);
                out.push(b);
            } else {
                out.push(self.to_physical(chunk[0], size));
            }
        }
        out
    }

    /// Fourier projection onto the spectral grid of real point values on a `size x size` grid.
    pub fn from_physical(&self, values: &[f64], size: usize) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft2(size, &mut buf, false);
        let mut out = vec![Complex64::new(0.0, 0.0); self.len()];
        self.extract(&buf, size, &mut out, 1.0 / (size * size) as f64);
        out
    }

    pub fn from_physical_pair(
        &self,
        a: &[f64],
        b: &[f64],
        size: usize,
    ) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut buf: Vec<Complex64> = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| Complex64::new(x, y))
            .collect();
        self.fft2(size, &mut buf, false);
        let scale = 1.0 / (size * size) as f64;
        let n = self.inner.n;
        let s = size as i64;
        let mut fa = vec![Complex64::new(0.0, 0.0); self.len()];
        let mut fb = vec![Complex64::new(0.0, 0.0); self.len()];
        for i1 in 0..n {
            if i1 == n / 2 {
                continue;
            }
            let k1 = self.wavenumber(i1);
            for i2 in 0..n {
                if i2 == n / 2 {
                    continue;
                }
                let k2 = self.wavenumber(i2);
                let p = (k1.rem_euclid(s) as usize) * size + k2.rem_euclid(s) as usize;
                let q = ((-k1).rem_euclid(s) as usize) * size + (-k2).rem_euclid(s) as usize;
                let z = buf[p];
                let zc = buf[q].conj();
                fa[i1 * n + i2] = (z + zc) * (0.5 * scale);
                fb[i1 * n + i2] = (z - zc) * Complex64::new(0.0, -0.5 * scale);
            }
        }
        (fa, fb)
    }

    pub fn from_physical_many(&self, values: &[Vec<f64>], size: usize) -> Vec<Vec<Complex64>> {
        let mut out = Vec::with_capacity(values.len());
        for chunk in values.chunks(2) {
            if chunk.len() == 2 {
                let (a, b) = self.from_physical_pair(&chunk[0], &chunk[1], size);
                out.push(a);
                out.push(b);
            } else {
                out.push(self.from_physical(&chunk[0], size));
            }
        }
        out
    }
}

fn wavenumber(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

fn transpose(buf: &mut [Complex64], size: usize) {
    for r in 0..size {
        for c in (r + 1)..size {
            buf.swap(r * size + c, c * size + r);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_padding() {
        assert!(Grid::with_padding(16, 1.4).is_err());
        assert!(Grid::with_padding(15, 1.5).is_err());
        assert_eq!(Grid::new(64).unwrap().m(), 96);
    }

    #[test]
    fn index_roundtrip() {
        let g = Grid::new(8).unwrap();
        for (idx, k1, k2) in g.modes() {
            assert_eq!(g.index(k1, k2), Some(idx));
            let (c1, c2) = g.k_of(g.conj_index(idx));
            assert_eq!((c1, c2), (-k1, -k2));
        }
        assert_eq!(g.index(-4, 0), None);
        assert_eq!(g.modes().count(), 49);
    }

    #[test]
    fn pair_transforms_match_single() {
        let g = Grid::new(8).unwrap();
        let mut a = vec![Complex64::new(0.0, 0.0); g.len()];
        let mut b = a.clone();
        let ia = g.index(1, 2).unwrap();
        a[ia] = Complex64::new(0.3, -0.2);
        a[g.conj_index(ia)] = Complex64::new(0.3, 0.2);
        let ib = g.index(-3, 1).unwrap();
        b[ib] = Complex64::new(-0.1, 0.7);
        b[g.conj_index(ib)] = Complex64::new(-0.1, -0.7);
        for size in [g.n(), g.m()] {
            let (pa, pb) = g.to_physical_pair(&a, &b, size);
            let sa = g.to_physical(&a, size);
            let sb = g.to_physical(&b, size);
            for i in 0..size * size {
                assert!((pa[i] - sa[i]).abs() < 1e-14);
                assert!((pb[i] - sb[i]).abs() < 1e-14);
            }
            let (fa, fb) = g.from_physical_pair(&pa, &pb, size);
            for i in 0..g.len() {
                assert!((fa[i] - a[i]).norm() < 1e-14);
                assert!((fb[i] - b[i]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn physical_values_match_direct_sum() {
        let g = Grid::new(8).unwrap();
        let mut a = vec![Complex64::new(0.0, 0.0); g.len()];
        let ia = g.index(2, -1).unwrap();
        a[ia] = Complex64::new(0.5, 0.25);
        a[g.conj_index(ia)] = Complex64::new(0.5, -0.25);
        let vals = g.to_physical(&a, 12);
        let h = 2.0 * std::f64::consts::PI / 12.0;
        for j1 in 0..12 {
            for j2 in 0..12 {
                let phase = 2.0 * j1 as f64 * h - j2 as f64 * h;
                let want = 2.0 * (0.5 * phase.cos() - 0.25 * phase.sin());
                assert!((vals[j1 * 12 + j2] - want).abs() < 1e-13);
            }
        }
    }
}
