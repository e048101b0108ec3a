use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::{SpectralField, TensorField2, VectorField};
use super::grid::Grid;
use crate::error::{Error, Result};

/// Flavor of a bilinear vector product.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    /// (a (x) b)_ij = a_i b_j
    Plain,
    /// half of a_i b_j + b_i a_j
    Symm,
    /// half of a_i b_j - b_i a_j
    Anti,
}

impl Flavor {
    /// Combines the plain products `ab[i][j] = a_i b_j` and `ba[i][j] = b_i a_j`.
    pub(crate) fn combine(self, ab: f64, ba: f64) -> f64 {
        match self {
            Flavor::Plain => ab,
            Flavor::Symm => 0.5 * (ab + ba),
            Flavor::Anti => 0.5 * (ab - ba),
        }
    }
}

fn check_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch(a.n(), b.n()))
    }
}

/// Helmholtz-Leray projection onto mean-zero divergence-free fields.
pub fn leray_project(v: &VectorField) -> VectorField {
    let g = v.grid().clone();
    let mut out = VectorField::zeros(&g);
    for (idx, k1, k2) in g.modes() {
        let ksq = g.ksq(idx);
        if ksq == 0.0 {
            continue;
        }
        let (p1, p2) = (k2 as f64, -(k1 as f64));
        let a = (v.c[0].coeffs()[idx] * p1 + v.c[1].coeffs()[idx] * p2) / ksq;
        out.c[0].coeffs_mut()[idx] = a * p1;
        out.c[1].coeffs_mut()[idx] = a * p2;
    }
    out
}

/// Leray projection refusing inputs with a nonzero spatial mean.
pub fn leray_project_strict(v: &VectorField, tol: f64) -> Result<VectorField> {
    if !v.is_mean_zero(tol) {
        let m = v.c[0].mean().hypot(v.c[1].mean());
        return Err(Error::NonzeroMean(m));
    }
    Ok(leray_project(v))
}

/// Dealiased tensor product of two vector fields.
pub fn tensor_product(a: &VectorField, b: &VectorField, flavor: Flavor) -> Result<TensorField2> {
    check_grid(a.grid(), b.grid())?;
    let g = a.grid().clone();
    let m = g.m();
    let ph = g.to_physical_many(
        &[a.c[0].coeffs(), a.c[1].coeffs(), b.c[0].coeffs(), b.c[1].coeffs()],
        m,
    );
    let entry = |i: usize, j: usize| -> Vec<f64> {
        (0..m * m)
            .map(|p| flavor.combine(ph[i][p] * ph[2 + j][p], ph[2 + i][p] * ph[j][p]))
            .collect()
    };
    let vals = vec![entry(0, 0), entry(0, 1), entry(1, 0), entry(1, 1)];
    let sp = g.from_physical_many(&vals, m);
    let f = |i: usize| SpectralField::from_raw(&g, sp[i].clone());
    Ok(TensorField2 {
        e: [[f(0), f(1)], [f(2), f(3)]],
    })
}

/// [div T]_i = sum_j d_j T_ij.
pub fn divergence_tensor(t: &TensorField2) -> VectorField {
    t.divergence()
}

/// Gradient matrix (grad phi)_ij = d_i phi_j.
pub fn grad(phi: &VectorField) -> TensorField2 {
    TensorField2 {
        e: [
            [phi.c[0].deriv(0), phi.c[1].deriv(0)],
            [phi.c[0].deriv(1), phi.c[1].deriv(1)],
        ],
    }
}

/// Symmetric and antisymmetric parts of the gradient.
pub fn grad_decompose(phi: &VectorField) -> (TensorField2, TensorField2) {
    let gphi = grad(phi);
    (gphi.symmetric_part(), gphi.antisymmetric_part())
}

/// e^{nu t Delta} applied componentwise.
pub fn heat_propagate(v: &VectorField, nu: f64, t: f64) -> Result<VectorField> {
    v.heat(nu, t)
}

pub fn inner_product(a: &VectorField, b: &VectorField) -> Result<f64> {
    check_grid(a.grid(), b.grid())?;
    Ok(a.inner(b))
}

pub fn fractional_laplacian(v: &VectorField, eps: f64) -> VectorField {
    v.frac_laplacian(eps)
}

/// Dealiased transport term (u . grad) v.
pub fn advect(u: &VectorField, v: &VectorField) -> VectorField {
    let g = u.grid().clone();
    let m = g.m();
    let d = [v.deriv(0), v.deriv(1)];
    let ph = g.to_physical_many(
        &[
            u.c[0].coeffs(),
            u.c[1].coeffs(),
            d[0].c[0].coeffs(),
            d[0].c[1].coeffs(),
            d[1].c[0].coeffs(),
            d[1].c[1].coeffs(),
        ],
        m,
    );
    let comp = |i: usize| -> Vec<f64> {
        (0..m * m)
            .map(|p| ph[0][p] * ph[2 + i][p] + ph[1][p] * ph[4 + i][p])
            .collect()
    };
    let (a, b) = g.from_physical_pair(&comp(0), &comp(1), m);
    VectorField {
        c: [SpectralField::from_raw(&g, a), SpectralField::from_raw(&g, b)],
    }
}

/// Dealiased pointwise dot product.
pub fn dot(a: &VectorField, b: &VectorField) -> SpectralField {
    &a.c[0].product(&b.c[0]) + &a.c[1].product(&b.c[1])
}

/// Single Fourier mode along k-perp, which is automatically divergence free.
pub fn transverse_mode(grid: &Grid, k1: i64, k2: i64, amp: Complex64) -> Result<VectorField> {
    if k1 == 0 && k2 == 0 {
        return Err(Error::InvalidParameter("zero mode has no transverse direction".into()));
    }
    let kn = ((k1 * k1 + k2 * k2) as f64).sqrt();
    let mut v = VectorField::zeros(grid);
    v.c[0].set_mode(k1, k2, amp * (k2 as f64 / kn))?;
    v.c[1].set_mode(k1, k2, amp * (-(k1 as f64) / kn))?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::random::random_vector;

    #[test]
    fn leray_kills_gradients_and_keeps_divfree() {
        let g = Grid::new(16).unwrap();
        let phi = crate::spectral::random::random_scalar(&g, 3, 2.0, 5);
        let gradphi = VectorField {
            c: [phi.deriv(0), phi.deriv(1)],
        };
        assert!(leray_project(&gradphi).max_abs_coeff() < 1e-15);
        let v = random_vector(&g, 4, 2.0, 5);
        let pv = leray_project(&v);
        assert!(pv.divergence_residual() < 1e-14);
        assert!(pv.rel_diff(&leray_project(&pv)) < 1e-15);
    }

    #[test]
    fn strict_projection_rejects_mean() {
        let g = Grid::new(8).unwrap();
        let mut v = VectorField::zeros(&g);
        v.c[0].set_mode(0, 0, Complex64::new(1.0, 0.0)).unwrap();
        assert!(leray_project_strict(&v, 1e-14).is_err());
    }

    #[test]
    fn flavors_split_plain_product() {
        let g = Grid::new(16).unwrap();
        let a = random_vector(&g, 1, 2.0, 5);
        let b = random_vector(&g, 2, 2.0, 5);
        let p = tensor_product(&a, &b, Flavor::Plain).unwrap();
        let s = tensor_product(&a, &b, Flavor::Symm).unwrap();
        let t = tensor_product(&a, &b, Flavor::Anti).unwrap();
        let tol = 1e-14 * p.norm();
        assert!((&(&s + &t) - &p).norm() < tol);
        assert!((&s - &s.transpose()).norm() < tol);
        assert!((&t + &t.transpose()).norm() < tol);
        let direct = a.c[0].product(&b.c[1]);
        assert!((&p.e[0][1] - &direct).norm() < tol);
    }

    #[test]
    fn advect_matches_divergence_form_for_divfree_transport() {
        let g = Grid::new(16).unwrap();
        let u = leray_project(&random_vector(&g, 7, 2.0, 5));
        let v = random_vector(&g, 8, 2.0, 5);
        let lhs = advect(&u, &v);
        // div(v (x) u) = (u . grad) v when div u = 0
        let rhs = tensor_product(&v, &u, Flavor::Plain).unwrap().divergence();
        assert!(lhs.rel_diff(&rhs) < 1e-13);
    }

    #[test]
    fn grad_convention() {
        let g = Grid::new(8).unwrap();
        let phi = transverse_mode(&g, 1, 2, Complex64::new(1.0, 0.0)).unwrap();
        let gp = grad(&phi);
        assert_eq!(gp.e[0][1], phi.c[1].deriv(0));
        let (s, a) = grad_decompose(&phi);
        assert!((&(&s + &a) - &gp).norm() < 1e-15);
    }
}
