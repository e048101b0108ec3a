//! Experiment configuration, dispatch and output manifests.
//!
//! A run reads one JSON config, writes CSV time series and JSON reports into
//! an output directory, and finishes with `manifest.json` listing every file
//! with its SHA-256. Outputs depend only on the config and the seeds, never on
//! the number of worker threads or on wall-clock time.
//!
//! Output schemas:
//! - `identities.csv`: `identity_id,family,kind,seed,n,lhs,rhs,scale,relative_residual,tolerance,passed`
//! - `r_lambda.csv`: `lambda,t,r_lambda`
//! - `chaos_<lambda>.json`: 16 entry means with standard errors and z-scores
//! - `variance.json`: per-block variance of the renormalized corner entry
//! - `diagnostics_<seed>.csv`: columns of [`DIAGNOSTICS_COLUMNS`]
//! - `ledger_<seed>.json`: stopping times and the per-step cut-off trace
//! - `galerkin_<seed>.json`: differences between consecutive levels
//! - `ou_stats.json`: noise coefficient moments against the closed form
//! - `summary.json`: asserted invariants with pass/fail

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::checkpoint::sha256_hex;
use crate::dynamics::{galerkin_run, run, DiagnosticsRow, SolverParams, SolverState};
use crate::error::{Error, Result};
use crate::identities::{reports_csv, run_suite, IdentityKind, SuiteParams};
use crate::noise::{ou_statistics, perturbation_fields, FieldSpec, PerturbationSpec};
use crate::renorm::{chaos_diagnostics, r_lambda, variance_profile};
use crate::spectral::serialize::{from_json, read_binary};
use crate::spectral::{Grid, VectorField};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "STOCHMHD_OUT_DIR";
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Statistical invariants are asserted at this many standard errors.
pub const Z_LIMIT: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Identities,
    Renorm,
    Simulate,
    Galerkin,
    NoiseStats,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Identities => "identities",
            ExperimentKind::Renorm => "renorm",
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Galerkin => "galerkin",
            ExperimentKind::NoiseStats => "noise-stats",
        }
    }
}

/// Initial velocity or magnetic field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Zero,
    Mode { k1: i64, k2: i64, re: f64, im: f64 },
    Random { seed: u64, decay: f64, band: i64, l2: f64 },
    /// Two-component field file, JSON records or the binary dump format.
    File { path: PathBuf },
}

impl InitialSpec {
    pub fn build(&self, grid: &Grid, base: &Path) -> Result<VectorField> {
        match self {
            InitialSpec::Zero => FieldSpec::Zero.build(grid),
            &InitialSpec::Mode { k1, k2, re, im } => FieldSpec::Mode { k1, k2, re, im }.build(grid),
            &InitialSpec::Random { seed, decay, band, l2 } => FieldSpec::Random { seed, decay, band, l2 }.build(grid),
            InitialSpec::File { path } => {
                let path = if path.is_absolute() { path.clone() } else { base.join(path) };
                let comps = if path.extension().is_some_and(|e| e == "json") {
                    from_json(&fs::read_to_string(&path)?, grid)?
                } else {
                    read_binary(fs::File::open(&path)?, grid)?
                };
                let [a, b]: [_; 2] = comps
                    .try_into()
                    .map_err(|_| Error::Format(format!("{} must hold two components", path.display())))?;
                Ok(VectorField { c: [a, b] })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub u: InitialSpec,
    pub b: InitialSpec,
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData {
            u: InitialSpec::Zero,
            b: InitialSpec::Zero,
        }
    }
}

fn d_nu() -> f64 {
    1.0
}
fn d_exponent() -> f64 {
    3.0
}
fn d_kappa() -> f64 {
    0.02
}
fn d_dt() -> f64 {
    1e-3
}
fn d_t_final() -> f64 {
    1.0
}
fn d_lambda() -> f64 {
    8.0
}
fn d_lambdas() -> Vec<f64> {
    vec![8.0, 16.0, 32.0, 64.0]
}
fn d_seeds() -> Vec<u64> {
    vec![1]
}
fn d_samples() -> usize {
    200
}
fn d_true() -> bool {
    true
}
fn d_every() -> usize {
    10
}
fn d_levels() -> Vec<f64> {
    vec![4.0, 8.0, 16.0, 32.0]
}
fn d_betas() -> Vec<f64> {
    vec![0.0, 0.5]
}
fn d_eps() -> f64 {
    0.3
}
fn d_modes() -> Vec<(i64, i64)> {
    vec![(1, 0), (2, 0), (4, 0)]
}

/// Everything one run needs. Only `kind` and `n` are required.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n: usize,
    #[serde(default = "d_nu")]
    pub nu: f64,
    #[serde(default = "d_exponent")]
    pub exponent: f64,
    #[serde(default = "d_kappa")]
    pub kappa: f64,
    #[serde(default = "d_dt")]
    pub dt: f64,
    #[serde(default = "d_t_final")]
    pub t_final: f64,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default = "d_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "d_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default = "d_true")]
    pub noise_u: bool,
    #[serde(default = "d_true")]
    pub noise_b: bool,
    #[serde(default)]
    pub initial: InitialData,
    #[serde(default)]
    pub perturbation: PerturbationSpec,
    /// Diagnostics rows are written every this many steps.
    #[serde(default = "d_every")]
    pub every: usize,
    #[serde(default = "d_levels")]
    pub galerkin_levels: Vec<f64>,
    #[serde(default = "d_betas")]
    pub betas: Vec<f64>,
    /// Fractional exponent of the transport identities.
    #[serde(default = "d_eps")]
    pub eps: f64,
    #[serde(default = "d_modes")]
    pub modes: Vec<(i64, i64)>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub checkpoint: bool,
}

impl ExperimentConfig {
    /// Minimal config of the given kind with every default filled in.
    pub fn new(kind: ExperimentKind, n: usize) -> Self {
        serde_json::from_value(serde_json::json!({"kind": kind, "n": n})).expect("defaults deserialize")
    }

    /// Range violations, one message per offending key.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.n < 4 || self.n % 2 != 0 {
            v.push(format!("n: must be an even number >= 4, got {}", self.n));
        }
        let mut positive = |name: &str, x: f64| {
            if !(x > 0.0) || !x.is_finite() {
                v.push(format!("{name}: must be positive, got {x}"));
            }
        };
        positive("nu", self.nu);
        positive("dt", self.dt);
        positive("t_final", self.t_final);
        positive("lambda", self.lambda);
        if !(2.75..=3.0).contains(&self.exponent) {
            v.push(format!("exponent: must lie in [11/4, 3], got {}", self.exponent));
        }
        if !(self.kappa > 0.0 && self.kappa < 0.5) {
            v.push(format!("kappa: must lie in (0, 1/2), got {}", self.kappa));
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|&l| !(l >= 1.0)) {
            v.push("lambdas: need a nonempty list of values >= 1".into());
        }
        if self.seeds.is_empty() {
            v.push("seeds: need at least one seed".into());
        }
        if self.samples < 2 {
            v.push(format!("samples: need at least 2, got {}", self.samples));
        }
        if self.every == 0 {
            v.push("every: must be at least 1".into());
        }
        if self.galerkin_levels.len() < 2 || self.galerkin_levels.windows(2).any(|w| w[1] != 2.0 * w[0]) {
            v.push("galerkin_levels: need at least two levels, each double the previous".into());
        }
        if !(0.0..=0.5).contains(&self.eps) {
            v.push(format!("eps: must lie in [0, 1/2], got {}", self.eps));
        }
        if self.kind == ExperimentKind::Renorm && self.samples < crate::renorm::MIN_SAMPLES {
            v.push(format!("samples: renorm needs at least {}", crate::renorm::MIN_SAMPLES));
        }
        if self.kind == ExperimentKind::Renorm && self.lambdas.iter().any(|&l| l > (self.n / 2) as f64) {
            v.push(format!("lambdas: each must be at most n/2 = {} so every cut-off mode is on the grid", self.n / 2));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    /// Pretty JSON with every key present; parses back to an equal config.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn solver_params(&self) -> SolverParams {
        SolverParams {
            nu: self.nu,
            exponent: self.exponent,
            kappa: self.kappa,
            dt: self.dt,
            noise_u: self.noise_u,
            noise_b: self.noise_b,
            ..SolverParams::default()
        }
    }
}

pub fn parse_config_str(s: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(s).map_err(|e| Error::Config(vec![e.to_string()]))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    parse_config_str(&fs::read_to_string(path)?)
}

/// One asserted property of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Invariant {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Invariant {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Invariant {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub code_version: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub all_passed: bool,
    pub files: Vec<ManifestEntry>,
}

/// Result of [`run_experiment`].
#[derive(Clone, Debug)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub invariants: Vec<Invariant>,
    pub manifest: Manifest,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.invariants.iter().all(|i| i.passed)
    }
}

struct Writer {
    dir: PathBuf,
    files: BTreeSet<String>,
}

impl Writer {
    fn put(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.files.insert(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.put(name, &(serde_json::to_string_pretty(value)? + "\n"))
    }
}

/// Columns of `diagnostics_<seed>.csv`.
pub const DIAGNOSTICS_COLUMNS: [&str; 19] = [
    "t",
    "step",
    "lambda",
    "r_lambda",
    "norm_wu",
    "norm_wb",
    "norm_y",
    "energy",
    "low_energy",
    "low_hdot1_sq",
    "high_norm",
    "besov_x",
    "besov_y",
    "i1_direct",
    "i1_residual",
    "i1_residual_as_written",
    "form_residual",
    "probe_residual",
    "cfl",
];

/// CSV of serializable rows restricted to `columns`; missing or null cells stay empty.
pub fn to_csv<T: Serialize>(rows: &[T], columns: &[&str]) -> Result<String> {
    let mut s = columns.join(",");
    s.push('\n');
    for r in rows {
        let v = serde_json::to_value(r)?;
        let cells: Vec<String> = columns
            .iter()
            .map(|c| match v.get(*c) {
                Some(Value::Null) | None => String::new(),
                Some(Value::Number(x)) => match x.as_f64() {
                    Some(f) if x.is_f64() => format!("{f:e}"),
                    _ => x.to_string(),
                },
                Some(other) => other.to_string(),
            })
            .collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    Ok(s)
}

/// Output directory: explicit argument, then the config, then the environment, then `./out`.
pub fn resolve_out_dir(explicit: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Runs one experiment and writes its artifacts into `out_dir`.
///
/// `base` resolves relative paths of file-based initial data.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path, base: &Path) -> Result<Outcome> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut w = Writer {
        dir: out_dir.to_path_buf(),
        files: BTreeSet::new(),
    };
    let config_text = cfg.canonical_json();
    w.put("config.json", &config_text)?;
    let grid = Grid::new(cfg.n)?;
    let invariants = match cfg.kind {
        ExperimentKind::Identities => run_identities(cfg, &mut w)?,
        ExperimentKind::Renorm => run_renorm(cfg, &grid, &mut w)?,
        ExperimentKind::Simulate => run_simulate(cfg, &grid, base, &mut w)?,
        ExperimentKind::Galerkin => run_galerkin(cfg, &grid, base, &mut w)?,
        ExperimentKind::NoiseStats => run_noise_stats(cfg, &grid, &mut w)?,
    };
    w.json("summary.json", &invariants)?;
    let mut files = Vec::new();
    for name in &w.files {
        let bytes = fs::read(out_dir.join(name))?;
        files.push(ManifestEntry {
            path: name.clone(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        });
    }
    let manifest = Manifest {
        kind: cfg.kind.name().into(),
        code_version: CODE_VERSION.into(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        seeds: cfg.seeds.clone(),
        all_passed: invariants.iter().all(|i| i.passed),
        files,
    };
    fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(Outcome {
        out_dir: out_dir.to_path_buf(),
        invariants,
        manifest,
    })
}

fn run_identities(cfg: &ExperimentConfig, w: &mut Writer) -> Result<Vec<Invariant>> {
    let p = SuiteParams {
        n: cfg.n,
        seeds: cfg.seeds.clone(),
        lambda: cfg.lambda,
        eps: cfg.eps,
        nu: cfg.nu,
        t: cfg.t_final,
    };
    let reports = run_suite(&p)?;
    w.put("identities.csv", &reports_csv(&reports))?;
    Ok(reports
        .iter()
        .filter(|r| r.kind != IdentityKind::Informational)
        .map(|r| {
            Invariant::new(
                format!("{}@seed{}", r.identity_id, r.seed),
                r.passed(),
                format!("relative residual {:e} (tolerance {:e})", r.relative_residual, r.tolerance),
            )
        })
        .collect())
}

fn run_renorm(cfg: &ExperimentConfig, grid: &Grid, w: &mut Writer) -> Result<Vec<Invariant>> {
    let seed = cfg.seeds[0];
    let mut inv = Vec::new();
    let mut table = String::from("lambda,t,r_lambda\n");
    for &l in &cfg.lambdas {
        table.push_str(&format!("{l:e},{:e},{:e}\n", cfg.t_final, r_lambda(l, cfg.t_final, cfg.nu)?));
    }
    w.put("r_lambda.csv", &table)?;
    let r0 = r_lambda(cfg.lambdas[0], 0.0, cfg.nu)?;
    inv.push(Invariant::new("r_lambda_at_time_zero", r0 == 0.0, format!("{r0:e}")));
    for &l in &cfg.lambdas {
        let rep = chaos_diagnostics(grid, cfg.samples, l, cfg.t_final, cfg.nu, seed)?;
        w.json(&format!("chaos_{l}.json"), &rep)?;
        let z = rep.max_abs_z();
        inv.push(Invariant::new(format!("chaos_means_lambda{l}"), z < Z_LIMIT, format!("max |z| = {z:.3}")));
    }
    let var = variance_profile(grid, &cfg.lambdas, cfg.samples, cfg.t_final, cfg.nu, cfg.kappa, seed)?;
    w.json("variance.json", &var)?;
    inv.push(Invariant::new(
        "variance_finite",
        var.variance.iter().flatten().all(|v| v.is_finite()),
        format!("max ratio across lambda {:.3}", var.max_variance_ratio()),
    ));
    Ok(inv)
}

fn initial_state(cfg: &ExperimentConfig, grid: &Grid, base: &Path, seed: u64) -> Result<SolverState> {
    let u0 = cfg.initial.u.build(grid, base)?;
    let b0 = cfg.initial.b.build(grid, base)?;
    let (zu, zb) = perturbation_fields(&cfg.perturbation, grid)?;
    SolverState::new(grid, cfg.solver_params(), u0, b0, [zu, zb], seed)
}

fn run_simulate(cfg: &ExperimentConfig, grid: &Grid, base: &Path, w: &mut Writer) -> Result<Vec<Invariant>> {
    let mut inv = Vec::new();
    for &seed in &cfg.seeds {
        let mut state = initial_state(cfg, grid, base, seed)?;
        let rows: Vec<DiagnosticsRow> = run(&mut state, cfg.t_final, cfg.every, |_| Ok(()))?;
        w.put(&format!("diagnostics_{seed}.csv"), &to_csv(&rows, &DIAGNOSTICS_COLUMNS)?)?;
        w.json(&format!("ledger_{seed}.json"), &state.ledger)?;
        let ledger = state.ledger.verify();
        inv.push(Invariant::new(
            format!("ledger@seed{seed}"),
            ledger.is_ok(),
            ledger.err().unwrap_or_else(|| format!("{} stopping times", state.ledger.entries.len())),
        ));
        let deterministic = !cfg.noise_u && !cfg.noise_b && cfg.perturbation == PerturbationSpec::default();
        if deterministic {
            let worst = rows.windows(2).map(|p| p[1].energy - p[0].energy).fold(f64::NEG_INFINITY, f64::max);
            let tol = 1e-12 * rows[0].energy.max(f64::MIN_POSITIVE);
            inv.push(Invariant::new(
                format!("energy_decreasing@seed{seed}"),
                worst <= tol,
                format!("largest energy increase {worst:e}"),
            ));
        }
        if cfg.checkpoint {
            crate::checkpoint::save(&state, w.dir.join(format!("checkpoint_{seed}")))?;
            w.files.insert(format!("checkpoint_{seed}.json"));
            w.files.insert(format!("checkpoint_{seed}.bin"));
        }
    }
    Ok(inv)
}

fn run_galerkin(cfg: &ExperimentConfig, grid: &Grid, base: &Path, w: &mut Writer) -> Result<Vec<Invariant>> {
    let u0 = cfg.initial.u.build(grid, base)?;
    let b0 = cfg.initial.b.build(grid, base)?;
    let mut inv = Vec::new();
    for &seed in &cfg.seeds {
        let rep = galerkin_run(grid, &cfg.solver_params(), &u0, &b0, &cfg.galerkin_levels, cfg.t_final, seed, &cfg.betas)?;
        w.json(&format!("galerkin_{seed}.json"), &rep)?;
        let decreasing = rep.sup_l2.windows(2).all(|p| p[1] < p[0]);
        inv.push(Invariant::new(
            format!("galerkin_decreasing@seed{seed}"),
            decreasing,
            format!("{:?}", rep.sup_l2),
        ));
    }
    Ok(inv)
}

fn run_noise_stats(cfg: &ExperimentConfig, grid: &Grid, w: &mut Writer) -> Result<Vec<Invariant>> {
    let st = ou_statistics(grid, cfg.nu, cfg.t_final, cfg.samples, &cfg.modes, cfg.seeds[0])?;
    w.json("ou_stats.json", &st)?;
    Ok(st
        .modes
        .iter()
        .map(|m| {
            let z = m.max_z();
            Invariant::new(format!("ou_moments_k{}_{}", m.k1, m.k2), z < Z_LIMIT, format!("max |z| = {z:.3}"))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_str(r#"{"kind": "simulate", "n": 16}"#).unwrap();
        assert_eq!(c.exponent, 3.0);
        assert_eq!(c.kappa, 0.02);
        assert_eq!(c, ExperimentConfig::new(ExperimentKind::Simulate, 16));
    }

    #[test]
    fn violations_are_named() {
        match parse_config_str(r#"{"kind": "simulate", "n": 16, "exponent": 5, "nu": -1}"#) {
            Err(Error::Config(v)) => {
                assert!(v.iter().any(|m| m.starts_with("exponent")), "{v:?}");
                assert!(v.iter().any(|m| m.starts_with("nu")), "{v:?}");
            }
            other => panic!("{other:?}"),
        }
        for bad in [r#"{"kind": "simulate", "n": 16, "bogus": 1}"#, r#"{"n": 16}"#] {
            let Err(Error::Config(v)) = parse_config_str(bad) else { panic!() };
            assert!(v[0].contains("bogus") || v[0].contains("kind"), "{v:?}");
        }
    }

    #[test]
    fn canonical_roundtrip() {
        let mut c = ExperimentConfig::new(ExperimentKind::Galerkin, 32);
        c.initial.u = InitialSpec::Random { seed: 3, decay: 2.0, band: 5, l2: 0.7 };
        c.dt = 0.1 + 0.2;
        assert_eq!(parse_config_str(&c.canonical_json()).unwrap(), c);
    }

    #[test]
    fn csv_columns_follow_request() {
        let rows = vec![serde_json::json!({"a": 1, "b": 0.5, "c": null})];
        assert_eq!(to_csv(&rows, &["b", "a", "c"]).unwrap(), "b,a,c\n5e-1,1,\n");
    }
}
