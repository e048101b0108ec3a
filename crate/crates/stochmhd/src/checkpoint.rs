//! Solver checkpoints: a JSON header next to a binary field dump.
//!
//! `save(state, "run/ckpt")` writes `run/ckpt.json` and `run/ckpt.bin`. The
//! binary file uses the `(k1, k2, re, im)` little-endian record layout of
//! [`crate::spectral::serialize`] with components in the order
//! `w_u, w_b, y_u, y_b, q_u, q_b, zeta_u, zeta_b` (two scalar components
//! each), followed by the raw noise coefficients `F_u, F_b` when noise is on.
//! The header stores the SHA-256 of the binary file and is checked on load.
//! Resuming reproduces an uninterrupted run bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{SolverParams, SolverState, StepInfo, StoppingLedger};
use crate::error::{Error, Result};
use crate::noise::{coefficient_field, NoiseState};
use crate::spectral::serialize::{read_binary, write_binary};
use crate::spectral::{Grid, SpectralField, VectorField};

pub const FORMAT: &str = "stochmhd-checkpoint-1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseMeta {
    pub nu: f64,
    pub t: f64,
    pub step: u64,
    pub seed: u64,
    pub mode_cutoff: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format: String,
    pub n: usize,
    pub params: SolverParams,
    pub t: f64,
    pub steps: u64,
    pub ledger: StoppingLedger,
    pub last: StepInfo,
    pub warnings: Vec<String>,
    pub noise: Option<NoiseMeta>,
    pub fields_file: String,
    pub fields_sha256: String,
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `<stem>.json` and `<stem>.bin`; returns both paths.
pub fn save(state: &SolverState, stem: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    let stem = stem.as_ref();
    let (json_path, bin_path) = (with_ext(stem, "json"), with_ext(stem, "bin"));
    let mut comps: Vec<&SpectralField> = Vec::with_capacity(18);
    for pair in [&state.w, &state.y, &state.q, &state.zeta] {
        for v in pair.iter() {
            comps.extend(v.c.iter());
        }
    }
    let noise_fields = state
        .noise
        .as_ref()
        .map(|n| [coefficient_field(n, 0), coefficient_field(n, 1)]);
    if let Some(f) = &noise_fields {
        comps.extend(f.iter());
    }
    let mut bin = Vec::new();
    write_binary(&mut bin, &comps)?;
    let header = Header {
        format: FORMAT.into(),
        n: state.grid().n(),
        params: state.params.clone(),
        t: state.t,
        steps: state.steps,
        ledger: state.ledger.clone(),
        last: state.last.clone(),
        warnings: state.warnings.clone(),
        noise: state.noise.as_ref().map(|n| NoiseMeta {
            nu: n.nu,
            t: n.t,
            step: n.step,
            seed: n.seed,
            mode_cutoff: n.mode_cutoff,
        }),
        fields_file: bin_path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        fields_sha256: sha256_hex(&bin),
    };
    fs::write(&bin_path, &bin)?;
    fs::write(&json_path, serde_json::to_string_pretty(&header)?)?;
    Ok((json_path, bin_path))
}

/// Restores a state saved with [`save`]; `path` is the stem or the `.json` file.
pub fn load(path: impl AsRef<Path>) -> Result<SolverState> {
    let path = path.as_ref();
    let json_path = if path.extension().is_some_and(|e| e == "json") {
        path.to_path_buf()
    } else {
        with_ext(path, "json")
    };
    let header: Header = serde_json::from_str(&fs::read_to_string(&json_path)?)?;
    if header.format != FORMAT {
        return Err(Error::Format(format!("unknown checkpoint format {}", header.format)));
    }
    let bin_path = json_path.with_file_name(&header.fields_file);
    let bin = fs::read(&bin_path)?;
    if sha256_hex(&bin) != header.fields_sha256 {
        return Err(Error::Format(format!("hash mismatch for {}", bin_path.display())));
    }
    let grid = Grid::new(header.n)?;
    let mut comps = read_binary(bin.as_slice(), &grid)?.into_iter();
    let expected = 16 + if header.noise.is_some() { 2 } else { 0 };
    if comps.len() != expected {
        return Err(Error::Format(format!("expected {expected} components, found {}", comps.len())));
    }
    let mut vector = || {
        let a = comps.next().expect("count checked");
        let b = comps.next().expect("count checked");
        VectorField { c: [a, b] }
    };
    let w = [vector(), vector()];
    let y = [vector(), vector()];
    let q = [vector(), vector()];
    let zeta = [vector(), vector()];
    let noise = match header.noise {
        Some(m) => {
            let mut n = NoiseState::new(&grid, m.nu, m.seed)?;
            n.t = m.t;
            n.step = m.step;
            n.mode_cutoff = m.mode_cutoff;
            n.f_u = comps.next().expect("count checked").into_coeffs();
            n.f_b = comps.next().expect("count checked").into_coeffs();
            Some(n)
        }
        None => None,
    };
    header.params.validate()?;
    Ok(SolverState {
        grid,
        params: header.params,
        t: header.t,
        steps: header.steps,
        w,
        y,
        q,
        zeta,
        noise,
        ledger: header.ledger,
        last: header.last,
        warnings: header.warnings,
    })
}
