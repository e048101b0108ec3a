//! Field serialization as `(k1, k2, re, im)` records.
//!
//! Binary layout, all little-endian:
//! - 8 bytes magic `SMHDFLD1`
//! - `u32` grid size N, `u32` number of components C
//! - per component: `u64` record count R, then R records of
//!   `i32 k1, i32 k2, f64 re, f64 im` (24 bytes each).
//!
//! The JSON form is `{"n": N, "components": [[[k1, k2, re, im], ...], ...]}`.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::SpectralField;
use super::grid::Grid;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SMHDFLD1";

pub fn write_binary<W: Write>(mut w: W, fields: &[&SpectralField]) -> Result<()> {
    let n = fields.first().map_or(0, |f| f.grid().n());
    w.write_all(MAGIC)?;
    w.write_all(&(n as u32).to_le_bytes())?;
    w.write_all(&(fields.len() as u32).to_le_bytes())?;
    for f in fields {
        let g = f.grid();
        if g.n() != n {
            return Err(Error::GridMismatch(n, g.n()));
        }
        let count = g.modes().count() as u64;
        w.write_all(&count.to_le_bytes())?;
        for (idx, k1, k2) in g.modes() {
            let z = f.coeffs()[idx];
            w.write_all(&(k1 as i32).to_le_bytes())?;
            w.write_all(&(k2 as i32).to_le_bytes())?;
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_array<const L: usize, R: Read>(r: &mut R) -> Result<[u8; L]> {
    let mut b = [0u8; L];
    r.read_exact(&mut b)?;
    Ok(b)
}

pub fn read_binary<R: Read>(mut r: R, grid: &Grid) -> Result<Vec<SpectralField>> {
    let magic: [u8; 8] = read_array(&mut r)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad field magic".into()));
    }
    let n = u32::from_le_bytes(read_array(&mut r)?) as usize;
    if n != grid.n() {
        return Err(Error::GridMismatch(grid.n(), n));
    }
    let comps = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let mut out = Vec::with_capacity(comps);
    for _ in 0..comps {
        let count = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let mut f = SpectralField::zeros(grid);
        for _ in 0..count {
            let k1 = i32::from_le_bytes(read_array(&mut r)?) as i64;
            let k2 = i32::from_le_bytes(read_array(&mut r)?) as i64;
            let re = f64::from_le_bytes(read_array(&mut r)?);
            let im = f64::from_le_bytes(read_array(&mut r)?);
            let idx = grid
                .index(k1, k2)
                .ok_or_else(|| Error::Format(format!("mode ({k1},{k2}) outside grid")))?;
            f.coeffs_mut()[idx] = Complex64::new(re, im);
        }
        out.push(f);
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct JsonFields {
    n: usize,
    components: Vec<Vec<(i64, i64, f64, f64)>>,
}

pub fn to_json(fields: &[&SpectralField]) -> Result<String> {
    let n = fields.first().map_or(0, |f| f.grid().n());
    let components = fields
        .iter()
        .map(|f| {
            f.grid()
                .modes()
                .map(|(idx, k1, k2)| {
                    let z = f.coeffs()[idx];
                    (k1, k2, z.re, z.im)
                })
                .collect()
        })
        .collect();
    Ok(serde_json::to_string(&JsonFields { n, components })?)
}

pub fn from_json(s: &str, grid: &Grid) -> Result<Vec<SpectralField>> {
    let j: JsonFields = serde_json::from_str(s)?;
    if j.n != grid.n() {
        return Err(Error::GridMismatch(grid.n(), j.n));
    }
    j.components
        .into_iter()
        .map(|recs| {
            let mut f = SpectralField::zeros(grid);
            for (k1, k2, re, im) in recs {
                let idx = grid
                    .index(k1, k2)
                    .ok_or_else(|| Error::Format(format!("mode ({k1},{k2}) outside grid")))?;
                f.coeffs_mut()[idx] = Complex64::new(re, im);
            }
            Ok(f)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::random::random_scalar;

    #[test]
    fn binary_and_json_roundtrip() {
        let g = Grid::new(8).unwrap();
        let a = random_scalar(&g, 1, 1.0, 3);
        let b = random_scalar(&g, 2, 1.0, 3);
        let mut buf = Vec::new();
        write_binary(&mut buf, &[&a, &b]).unwrap();
        assert_eq!(buf.len(), 8 + 8 + 2 * (8 + 49 * 24));
        let back = read_binary(&buf[..], &g).unwrap();
        assert_eq!(back, vec![a.clone(), b.clone()]);
        let js = to_json(&[&a]).unwrap();
        assert_eq!(from_json(&js, &g).unwrap()[0], a);
        assert!(read_binary(&buf[..], &Grid::new(16).unwrap()).is_err());
    }
}
