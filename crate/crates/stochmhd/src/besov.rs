//! Littlewood-Paley decomposition, Besov norms and Bony paraproducts.
//!
//! The dyadic partition is built from the smooth step
//! theta(x) = e^{-1/x} / (e^{-1/x} + e^{-1/(1-x)}): the low-pass profile
//! `bump` equals 1 on [0, 3/4] and 0 beyond 4/3, `chi = bump` and
//! `rho(r) = bump(r/2) - bump(r)` is supported in [3/4, 8/3].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Flavor, Grid, SpectralField, TensorField2, VectorField};

/// Smooth step from 0 at x <= 0 to 1 at x >= 1.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

/// Radial low-pass profile: 1 on [0, 3/4], 0 on [4/3, inf).
pub fn bump(r: f64) -> f64 {
    1.0 - smooth_step((r - 0.75) / (4.0 / 3.0 - 0.75))
}

pub fn chi(r: f64) -> f64 {
    bump(r)
}

pub fn rho(r: f64) -> f64 {
    bump(0.5 * r) - bump(r)
}

/// High-frequency profile: 0 on [0, 1/2], 1 on [1, inf).
pub fn high_profile(r: f64) -> f64 {
    smooth_step((r - 0.5) / 0.5)
}

pub fn low_profile(r: f64) -> f64 {
    1.0 - high_profile(r)
}

/// Which side of a frequency cut to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Part {
    High,
    Low,
}

/// Index range of Littlewood-Paley blocks resolving a grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LpPartition {
    pub j_max: i32,
}

impl LpPartition {
    /// Smallest partition whose blocks sum to one on every grid mode.
    pub fn for_grid(grid: &Grid) -> Self {
        let j_max = ((grid.n() as f64) / 2.0).log2().ceil() as i32;
        LpPartition { j_max }
    }

    pub fn blocks(&self) -> std::ops::RangeInclusive<i32> {
        -1..=self.j_max
    }

    pub fn count(&self) -> usize {
        (self.j_max + 2) as usize
    }

    /// Multiplier of block `j` at radius `r`.
    pub fn symbol(&self, j: i32, r: f64) -> f64 {
        block_symbol(j, r)
    }
}

pub fn block_symbol(j: i32, r: f64) -> f64 {
    if j < 0 {
        chi(r)
    } else {
        rho(r / f64::powi(2.0, j))
    }
}

/// Symbol of S_i = sum_{j <= i-1} Delta_j.
pub fn low_cutoff_symbol(i: i32, r: f64) -> f64 {
    if i < 0 {
        0.0
    } else {
        bump(r / f64::powi(2.0, i))
    }
}

/// Littlewood-Paley block Delta_j f.
pub fn lp_block(f: &SpectralField, j: i32) -> SpectralField {
    f.map_radial(|r| block_symbol(j, r))
}

/// Low-frequency cut S_i f.
pub fn low_cutoff(f: &SpectralField, i: i32) -> SpectralField {
    f.map_radial(|r| low_cutoff_symbol(i, r))
}

/// Smooth projection onto frequencies above (`High`) or below (`Low`) lambda.
pub fn freq_project(f: &SpectralField, lambda: f64, part: Part) -> Result<SpectralField> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("cut-off must be positive, got {lambda}")));
    }
    Ok(match part {
        Part::High => f.map_radial(|r| high_profile(r / lambda)),
        Part::Low => f.map_radial(|r| low_profile(r / lambda)),
    })
}

pub fn freq_project_vec(v: &VectorField, lambda: f64, part: Part) -> Result<VectorField> {
    Ok(VectorField {
        c: [freq_project(&v.c[0], lambda, part)?, freq_project(&v.c[1], lambda, part)?],
    })
}

fn lp_norm(vals: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        vals.iter().fold(0.0, |a, v| a.max(v.abs()))
    } else {
        (vals.iter().map(|v| v.abs().powf(p)).sum::<f64>() / vals.len() as f64).powf(1.0 / p)
    }
}

/// Besov norm B^s_{p,q}; `p` and `q` may be `f64::INFINITY`.
///
/// L^2 block norms are exact; other L^p norms are evaluated on the
/// dealiasing grid.
pub fn besov_norm(f: &SpectralField, s: f64, p: f64, q: f64) -> Result<f64> {
    if !(p >= 1.0) || !(q >= 1.0) {
        return Err(Error::InvalidParameter(format!("need p, q >= 1, got {p}, {q}")));
    }
    let part = LpPartition::for_grid(f.grid());
    let m = f.grid().m();
    let mut terms = Vec::with_capacity(part.count());
    for j in part.blocks() {
        let b = lp_block(f, j);
        let n = if p == 2.0 {
            b.norm()
        } else {
            lp_norm(&b.to_physical_at(m), p)
        };
        terms.push(f64::powf(2.0, j as f64 * s) * n);
    }
    Ok(lp_norm_seq(&terms, q))
}

fn lp_norm_seq(terms: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        terms.iter().fold(0.0, |a, &t| a.max(t))
    } else {
        terms.iter().map(|t| t.powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

/// Besov norm of a vector field: the larger of the component norms.
pub fn besov_norm_vec(v: &VectorField, s: f64, p: f64, q: f64) -> Result<f64> {
    Ok(besov_norm(&v.c[0], s, p, q)?.max(besov_norm(&v.c[1], s, p, q)?))
}

/// Littlewood-Paley blocks of a scalar field, sampled on the dealiasing grid.
pub struct BlockSet {
    pub blocks: Vec<Vec<f64>>,
    size: usize,
}

impl BlockSet {
    pub fn new(f: &SpectralField) -> Self {
        let part = LpPartition::for_grid(f.grid());
        let coeffs: Vec<SpectralField> = part.blocks().map(|j| lp_block(f, j)).collect();
        let refs: Vec<&[num_complex::Complex64]> = coeffs.iter().map(|c| c.coeffs()).collect();
        let size = f.grid().m();
        BlockSet {
            blocks: f.grid().to_physical_many(&refs, size),
            size,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Point values of sum_i S_{i-1} self . Delta_i other.
    pub fn lt(&self, other: &BlockSet) -> Vec<f64> {
        let len = self.size * self.size;
        let mut acc = vec![0.0; len];
        let mut low = vec![0.0; len];
        for bi in 2..other.blocks.len() {
            let add = &self.blocks[bi - 2];
            low.iter_mut().zip(add).for_each(|(l, a)| *l += a);
            let g = &other.blocks[bi];
            acc.iter_mut()
                .zip(low.iter().zip(g))
                .for_each(|(a, (l, x))| *a += l * x);
        }
        acc
    }

    /// Point values of sum_i sum_{|j - i| <= 1} Delta_i self . Delta_j other.
    pub fn res(&self, other: &BlockSet) -> Vec<f64> {
        let len = self.size * self.size;
        let mut acc = vec![0.0; len];
        self.res_accumulate(other, 1.0, &mut acc);
        acc
    }

    /// acc += c * (self o other), point values.
    pub fn res_accumulate(&self, other: &BlockSet, c: f64, acc: &mut [f64]) {
        let nb = self.blocks.len();
        for bi in 0..nb {
            let lo = bi.saturating_sub(1);
            let hi = (bi + 1).min(nb - 1);
            let f = &self.blocks[bi];
            for bj in lo..=hi {
                let g = &other.blocks[bj];
                acc.iter_mut()
                    .zip(f.iter().zip(g))
                    .for_each(|(a, (x, y))| *a += c * x * y);
            }
        }
    }

    /// Spatial mean of the resonant product, without forming the field.
    pub fn res_mean(&self, other: &BlockSet) -> f64 {
        let nb = self.blocks.len();
        let mut total = 0.0;
        for bi in 0..nb {
            let lo = bi.saturating_sub(1);
            let hi = (bi + 1).min(nb - 1);
            for bj in lo..=hi {
                total += self.blocks[bi]
                    .iter()
                    .zip(&other.blocks[bj])
                    .map(|(x, y)| x * y)
                    .sum::<f64>();
            }
        }
        total / (self.size * self.size) as f64
    }
}

/// The three Bony pieces f < g, f > g and f o g.
#[derive(Clone, Debug)]
pub struct BonyTriple<T> {
    pub lt: T,
    pub gt: T,
    pub res: T,
}

/// Bony decomposition of the product of two scalar fields.
pub fn bony_scalar(f: &SpectralField, g: &SpectralField) -> Result<BonyTriple<SpectralField>> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch(f.grid().n(), g.grid().n()));
    }
    let grid = f.grid();
    let (bf, bg) = (BlockSet::new(f), BlockSet::new(g));
    let m = grid.m();
    let (lt, gt) = grid.from_physical_pair(&bf.lt(&bg), &bg.lt(&bf), m);
    let res = grid.from_physical(&bf.res(&bg), m);
    Ok(BonyTriple {
        lt: SpectralField::from_raw(grid, lt),
        gt: SpectralField::from_raw(grid, gt),
        res: SpectralField::from_raw(grid, res),
    })
}

/// Which Bony piece to form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Piece {
    Lt,
    Gt,
    Res,
}

fn scalar_piece(a: &BlockSet, b: &BlockSet, piece: Piece) -> Vec<f64> {
    match piece {
        Piece::Lt => a.lt(b),
        Piece::Gt => b.lt(a),
        Piece::Res => a.res(b),
    }
}

/// Block sets of both components of a vector field.
pub struct VectorBlocks(pub [BlockSet; 2]);

impl VectorBlocks {
    pub fn new(v: &VectorField) -> Self {
        VectorBlocks([BlockSet::new(&v.c[0]), BlockSet::new(&v.c[1])])
    }
}

/// Point values of a flavored paraproduct piece of two vector fields.
pub fn vector_piece_phys(
    a: &VectorBlocks,
    b: &VectorBlocks,
    flavor: Flavor,
    piece: Piece,
) -> [[Vec<f64>; 2]; 2] {
    let p: Vec<Vec<Vec<f64>>> = (0..2)
        .map(|i| (0..2).map(|j| scalar_piece(&a.0[i], &b.0[j], piece)).collect())
        .collect();
    let entry = |i: usize, j: usize| -> Vec<f64> {
        p[i][j]
            .iter()
            .zip(&p[j][i])
            .map(|(&ab, &ba)| flavor.combine(ab, ba))
            .collect()
    };
    [[entry(0, 0), entry(0, 1)], [entry(1, 0), entry(1, 1)]]
}

pub(crate) fn tensor_from_phys(grid: &Grid, t: &[[Vec<f64>; 2]; 2]) -> TensorField2 {
    let m = grid.m();
    let (a, b) = grid.from_physical_pair(&t[0][0], &t[0][1], m);
    let (c, d) = grid.from_physical_pair(&t[1][0], &t[1][1], m);
    let f = |v| SpectralField::from_raw(grid, v);
    TensorField2 {
        e: [[f(a), f(b)], [f(c), f(d)]],
    }
}

/// One flavored paraproduct piece of two vector fields, e.g. `a <_s b`.
pub fn vector_piece(a: &VectorField, b: &VectorField, flavor: Flavor, piece: Piece) -> Result<TensorField2> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch(a.grid().n(), b.grid().n()));
    }
    let t = vector_piece_phys(&VectorBlocks::new(a), &VectorBlocks::new(b), flavor, piece);
    Ok(tensor_from_phys(a.grid(), &t))
}

/// Bony decomposition of a flavored tensor product of two vector fields.
pub fn bony_vector(a: &VectorField, b: &VectorField, flavor: Flavor) -> Result<BonyTriple<TensorField2>> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch(a.grid().n(), b.grid().n()));
    }
    let (ba, bb) = (VectorBlocks::new(a), VectorBlocks::new(b));
    let g = a.grid();
    Ok(BonyTriple {
        lt: tensor_from_phys(g, &vector_piece_phys(&ba, &bb, flavor, Piece::Lt)),
        gt: tensor_from_phys(g, &vector_piece_phys(&ba, &bb, flavor, Piece::Gt)),
        res: tensor_from_phys(g, &vector_piece_phys(&ba, &bb, flavor, Piece::Res)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::random::{random_scalar, random_vector};
    use crate::spectral::tensor_product;

    #[test]
    fn partition_sums_to_one_on_grid() {
        for n in [8usize, 16, 64, 128] {
            let g = Grid::new(n).unwrap();
            let part = LpPartition::for_grid(&g);
            for (idx, _, _) in g.modes() {
                let r = g.ksq(idx).sqrt();
                let s: f64 = part.blocks().map(|j| block_symbol(j, r)).sum();
                assert!((s - 1.0).abs() < 1e-15, "n={n} r={r} s={s}");
            }
        }
    }

    #[test]
    fn block_supports() {
        assert_eq!(rho(0.74), 0.0);
        assert_eq!(rho(2.67), 0.0);
        assert!(rho(1.0) > 0.0);
        assert_eq!(high_profile(0.5), 0.0);
        assert_eq!(high_profile(1.0), 1.0);
        assert_eq!(low_profile(0.3), 1.0);
    }

    #[test]
    fn low_cutoff_telescopes() {
        let g = Grid::new(32).unwrap();
        let f = random_scalar(&g, 1, 1.0, 15);
        for i in -1..4 {
            let mut sum = SpectralField::zeros(&g);
            for j in -1..i {
                sum += &lp_block(&f, j);
            }
            assert!((&sum - &low_cutoff(&f, i)).norm() < 1e-14);
        }
    }

    #[test]
    fn bony_pieces_match_double_sum() {
        let g = Grid::new(32).unwrap();
        let f = random_scalar(&g, 3, 1.0, 15);
        let h = random_scalar(&g, 4, 1.0, 15);
        let b = bony_scalar(&f, &h).unwrap();
        let part = LpPartition::for_grid(&g);
        let mut lt = SpectralField::zeros(&g);
        let mut res = SpectralField::zeros(&g);
        for i in part.blocks() {
            for j in part.blocks() {
                let p = lp_block(&f, j).product(&lp_block(&h, i));
                if j <= i - 2 {
                    lt += &p;
                } else if (i - j).abs() <= 1 {
                    res += &p;
                }
            }
        }
        assert!((&lt - &b.lt).norm() < 1e-13 * lt.norm());
        assert!((&res - &b.res).norm() < 1e-13 * res.norm());
        let total = &(&b.lt + &b.gt) + &b.res;
        assert!((&total - &f.product(&h)).norm() < 1e-13);
    }

    #[test]
    fn paraproduct_with_constant_vanishes() {
        let g = Grid::new(16).unwrap();
        let f = random_scalar(&g, 3, 1.0, 7);
        let mut c = SpectralField::zeros(&g);
        c.set_mode(0, 0, num_complex::Complex64::new(2.5, 0.0)).unwrap();
        let b = bony_scalar(&f, &c).unwrap();
        assert!(b.lt.norm() < 1e-14 * f.norm());
    }

    #[test]
    fn vector_flavors_reconstruct_tensor_product() {
        let g = Grid::new(32).unwrap();
        let a = random_vector(&g, 5, 1.5, 15);
        let b = random_vector(&g, 6, 1.5, 15);
        for fl in [Flavor::Plain, Flavor::Symm, Flavor::Anti] {
            let t = bony_vector(&a, &b, fl).unwrap();
            let sum = &(&t.lt + &t.gt) + &t.res;
            let want = tensor_product(&a, &b, fl).unwrap();
            assert!((&sum - &want).norm() < 1e-13 * want.norm().max(1e-300));
        }
        let t = bony_vector(&a, &a, Flavor::Anti).unwrap();
        let sum = &(&t.lt + &t.gt) + &t.res;
        assert!(sum.norm() < 1e-15);
    }

    #[test]
    fn besov_l2_matches_sobolev_scale() {
        let g = Grid::new(32).unwrap();
        let f = random_scalar(&g, 8, 1.0, 15);
        let b0 = besov_norm(&f, 0.0, 2.0, 2.0).unwrap();
        // blocks overlap, so B^0_{2,2} is comparable to L^2 with constant sqrt(2)
        assert!(b0 <= f.norm() * 1.0 + 1e-12 && b0 >= f.norm() / 2f64.sqrt());
        assert!(besov_norm(&f, 0.0, 0.5, 2.0).is_err());
        let inf = besov_norm(&f, -0.5, f64::INFINITY, f64::INFINITY).unwrap();
        assert!(inf.is_finite() && inf > 0.0);
    }
}
