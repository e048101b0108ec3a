//! Decomposed solver u = X + Y + w with stopping-time frequency cut-offs.
//!
//! X is the exact Ornstein-Uhlenbeck convolution, Y solves the linear-in-Y
//! equation forced by X, and the remainder w carries the initial data.
//! (Y, w) advance jointly with exponential time differencing of order two;
//! all products are dealiased.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::besov::{besov_norm_vec, freq_project_vec, tensor_from_phys, vector_piece_phys, Part, Piece, VectorBlocks};
use crate::error::{Error, Result};
use crate::identities::relative_residual;
use crate::noise::{q_update, NoiseState};
use crate::renorm::{nabla_spec, r_lambda};
use crate::spectral::{leray_project, tensor_product, Flavor, Grid, TensorField2, VectorField};

/// Pair (u-channel, b-channel).
pub type Pair = [VectorField; 2];

fn zero_pair(grid: &Grid) -> Pair {
    [VectorField::zeros(grid), VectorField::zeros(grid)]
}

fn pair_norm(p: &Pair) -> f64 {
    p[0].norm().hypot(p[1].norm())
}

fn pair_inner(a: &Pair, b: &Pair) -> f64 {
    a[0].inner(&b[0]) + a[1].inner(&b[1])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    pub nu: f64,
    /// Exponent in lambda_t = (1 + |w_u| + |w_b|)^exponent.
    pub exponent: f64,
    pub kappa: f64,
    pub dt: f64,
    pub noise_u: bool,
    pub noise_b: bool,
    /// Galerkin level n: noise and initial data are replaced by their low parts at n.
    pub galerkin: Option<f64>,
    /// Evaluate the Y_b nonlinearity in both algebraic forms every step.
    pub check_forms: bool,
    /// Compare the split right-hand side with the undecomposed one every step.
    pub probe: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            nu: 1.0,
            exponent: 3.0,
            kappa: 0.02,
            dt: 1e-3,
            noise_u: true,
            noise_b: true,
            galerkin: None,
            check_forms: false,
            probe: false,
        }
    }
}

impl SolverParams {
    pub fn noise_on(&self) -> bool {
        self.noise_u || self.noise_b
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.nu >= 0.0) || !self.nu.is_finite() {
            return bad(format!("viscosity must be nonnegative, got {}", self.nu));
        }
        if self.nu == 0.0 && self.noise_on() {
            return bad("noise requires positive viscosity".into());
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("time step must be positive, got {}", self.dt));
        }
        if !(self.exponent > 0.0) {
            return bad(format!("cut-off exponent must be positive, got {}", self.exponent));
        }
        if !(self.kappa > 0.0 && self.kappa < 0.5) {
            return bad(format!("kappa must lie in (0, 1/2), got {}", self.kappa));
        }
        if let Some(n) = self.galerkin {
            if !(n >= 1.0) {
                return bad(format!("Galerkin level must be at least 1, got {n}"));
            }
        }
        Ok(())
    }
}

/// One stopping time T_i with the norm that triggered it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingTime {
    pub index: u64,
    pub time: f64,
    pub norm: f64,
}

/// Norm and cut-off recorded after each step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub norm: f64,
    pub lambda: f64,
}

/// Stopping times T_0 = ... = T_{i0} = 0 and T_{i+1} = inf{t >= T_i : |w_u| + |w_b| >= i + 1},
/// detected at step boundaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingLedger {
    pub exponent: f64,
    pub lambda0: f64,
    pub entries: Vec<StoppingTime>,
    pub trace: Vec<TracePoint>,
}

impl StoppingLedger {
    pub fn new(norm0: f64, exponent: f64) -> Self {
        let i0 = norm0.floor().max(0.0);
        let lambda0 = (1.0 + norm0.ceil()).powf(exponent);
        StoppingLedger {
            exponent,
            lambda0,
            entries: vec![StoppingTime {
                index: i0 as u64,
                time: 0.0,
                norm: norm0,
            }],
            trace: vec![TracePoint {
                t: 0.0,
                norm: norm0,
                lambda: lambda0,
            }],
        }
    }

    pub fn i0(&self) -> u64 {
        self.entries[0].index
    }

    pub fn current(&self) -> &StoppingTime {
        self.entries.last().expect("ledger is never empty")
    }

    /// lambda^i = (i + 1)^exponent.
    pub fn level(&self, i: u64) -> f64 {
        (i as f64 + 1.0).powf(self.exponent)
    }

    /// Cut-off in force for t > 0.
    pub fn lambda(&self) -> f64 {
        (1.0 + self.current().norm).powf(self.exponent)
    }

    /// Records the norm after a step ending at `t` and returns the cut-off.
    pub fn observe(&mut self, t: f64, norm: f64) -> f64 {
        if norm >= (self.current().index + 1) as f64 {
            self.entries.push(StoppingTime {
                index: norm.floor() as u64,
                time: t,
                norm,
            });
        }
        let lambda = self.lambda();
        self.trace.push(TracePoint { t, norm, lambda });
        lambda
    }

    /// Checks the entries and the per-step trace against the stopping rule.
    pub fn verify(&self) -> std::result::Result<(), String> {
        let first = &self.entries[0];
        if first.time != 0.0 || first.index as f64 != first.norm.floor().max(0.0) {
            return Err(format!("bad initial entry {first:?}"));
        }
        if self.lambda0 != (1.0 + first.norm.ceil()).powf(self.exponent) {
            return Err("initial cut-off does not match initial norm".into());
        }
        for w in self.entries.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if !(b.time > a.time) || b.index <= a.index {
                return Err(format!("entries out of order: {a:?} then {b:?}"));
            }
            if b.index as f64 != b.norm.floor() || b.norm < (a.index + 1) as f64 {
                return Err(format!("entry {b:?} does not record a crossing of {}", a.index + 1));
            }
        }
        let mut active = 0usize;
        for p in &self.trace {
            if p.t == 0.0 {
                if p.lambda != self.lambda0 {
                    return Err(format!("cut-off at t = 0 is {}", p.lambda));
                }
                continue;
            }
            while active + 1 < self.entries.len() && self.entries[active + 1].time <= p.t {
                active += 1;
            }
            let e = &self.entries[active];
            if e.time == p.t && e.norm != p.norm {
                return Err(format!("entry {e:?} disagrees with trace norm {}", p.norm));
            }
            if e.time < p.t && p.norm >= (e.index + 1) as f64 {
                return Err(format!("missed crossing of {} at t = {}", e.index + 1, p.t));
            }
            if p.lambda != (1.0 + e.norm).powf(self.exponent) {
                return Err(format!("cut-off {} at t = {} not frozen at T_{}", p.lambda, p.t, e.index));
            }
            if p.lambda < self.level(e.index) || p.lambda >= self.level(e.index + 1) {
                return Err(format!("cut-off {} outside [lambda^{i}, lambda^{{{i}+1}})", p.lambda, i = e.index));
            }
        }
        for e in &self.entries[1..] {
            if !self.trace.iter().any(|p| p.t == e.time && p.norm == e.norm) {
                return Err(format!("entry {e:?} missing from trace"));
            }
        }
        Ok(())
    }
}

/// Extra quantities measured during the last step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub form_residual: Option<f64>,
    pub probe_residual: Option<f64>,
    pub cfl: f64,
}

#[derive(Clone, Debug)]
pub struct SolverState {
    pub(crate) grid: Grid,
    pub params: SolverParams,
    pub t: f64,
    pub steps: u64,
    pub w: Pair,
    pub y: Pair,
    pub q: Pair,
    /// Deterministic forcing, Leray projected.
    pub zeta: Pair,
    pub noise: Option<NoiseState>,
    pub ledger: StoppingLedger,
    pub last: StepInfo,
    pub warnings: Vec<String>,
}

fn check_initial(v: &VectorField, what: &str) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::NonFinite(what.into()));
    }
    let tol = 1e-12 * v.max_abs_coeff().max(1.0);
    if !v.is_mean_zero(tol) {
        return Err(Error::NonzeroMean(v.c[0].mean().hypot(v.c[1].mean())));
    }
    let r = v.divergence_residual();
    if r > 1e-10 * v.max_abs_coeff().max(1.0) * v.grid().kmax() as f64 {
        return Err(Error::NotDivergenceFree(r));
    }
    Ok(())
}

impl SolverState {
    /// Starts from u(0) = u0, b(0) = b0 with X(0) = Y(0) = Q(0) = 0.
    pub fn new(grid: &Grid, params: SolverParams, u0: VectorField, b0: VectorField, zeta: Pair, seed: u64) -> Result<Self> {
        params.validate()?;
        for (v, what) in [(&u0, "u0"), (&b0, "b0"), (&zeta[0], "zeta_u"), (&zeta[1], "zeta_b")] {
            if v.grid() != grid {
                return Err(Error::GridMismatch(v.grid().n(), grid.n()));
            }
            check_initial(v, what)?;
        }
        let (u0, b0) = match params.galerkin {
            Some(n) => (freq_project_vec(&u0, n, Part::Low)?, freq_project_vec(&b0, n, Part::Low)?),
            None => (u0, b0),
        };
        let noise = if params.noise_on() {
            Some(NoiseState::new(grid, params.nu, seed)?)
        } else {
            None
        };
        let norm0 = u0.norm() + b0.norm();
        let ledger = StoppingLedger::new(norm0, params.exponent);
        Ok(SolverState {
            grid: grid.clone(),
            zeta: [leray_project(&zeta[0]), leray_project(&zeta[1])],
            params,
            t: 0.0,
            steps: 0,
            w: [u0, b0],
            y: zero_pair(grid),
            q: zero_pair(grid),
            noise,
            ledger,
            last: StepInfo::default(),
            warnings: Vec::new(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Current cut-off lambda_t.
    pub fn lambda(&self) -> f64 {
        if self.t == 0.0 {
            self.ledger.lambda0
        } else {
            self.ledger.lambda()
        }
    }

    /// Noise fields at the current time, with disabled channels zeroed and
    /// the Galerkin mollification applied.
    pub fn x_fields(&self) -> Pair {
        let Some(noise) = &self.noise else {
            return zero_pair(&self.grid);
        };
        let (xu, xb) = noise.fields(self.params.galerkin);
        [
            if self.params.noise_u { xu } else { VectorField::zeros(&self.grid) },
            if self.params.noise_b { xb } else { VectorField::zeros(&self.grid) },
        ]
    }

    /// u = X_u + Y_u + w_u and b likewise.
    pub fn solution(&self) -> Pair {
        let x = self.x_fields();
        [&(&x[0] + &self.y[0]) + &self.w[0], &(&x[1] + &self.y[1]) + &self.w[1]]
    }

    /// Renormalization constant at the current cut-off; zero without viscosity.
    pub fn r_value(&self) -> Result<f64> {
        if self.params.nu > 0.0 {
            r_lambda(self.lambda(), self.t, self.params.nu)
        } else {
            Ok(0.0)
        }
    }

    /// Advances X, Q and Y by `h`, leaving w untouched.
    pub fn y_step(&mut self, h: f64) -> Result<()> {
        self.advance(h, false)
    }

    /// Advances the full system (X, Q, Y, w) by `h`.
    pub fn w_step(&mut self, h: f64) -> Result<()> {
        self.advance(h, true)
    }

    /// Full step followed by the cut-off update.
    pub fn step(&mut self, h: f64) -> Result<()> {
        self.w_step(h)?;
        self.update_lambda();
        Ok(())
    }

    /// Records |w_u| + |w_b| in the ledger and returns lambda_t.
    pub fn update_lambda(&mut self) -> f64 {
        let norm = self.w[0].norm() + self.w[1].norm();
        self.ledger.observe(self.t, norm)
    }

    fn advance(&mut self, h: f64, evolve_w: bool) -> Result<()> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {h}")));
        }
        let nu = self.params.nu;
        let x0 = self.x_fields();
        let n0 = nonlinear(&x0, &self.y, &self.w, &self.zeta);
        self.last.form_residual = if self.params.check_forms {
            Some(y_forms_residual(&x0, &self.y, &n0[1], &self.zeta[1])?)
        } else {
            None
        };
        self.last.probe_residual = if self.params.probe {
            Some(decomposition_residual(&x0, &self.y, &self.w, &self.zeta, &n0)?)
        } else {
            None
        };
        let c = EtdCoeffs::new(&self.grid, nu, h);
        let u0 = [&self.y[0], &self.y[1], &self.w[0], &self.w[1]];
        let mut a: Vec<VectorField> = (0..4).map(|i| c.predict(u0[i], &n0[i])).collect();
        if !evolve_w {
            a[2] = self.w[0].clone();
            a[3] = self.w[1].clone();
        }
        if let Some(noise) = &mut self.noise {
            noise.ou_step(h)?;
        }
        let x1 = self.x_fields();
        let n1 = nonlinear(&x1, &[a[0].clone(), a[1].clone()], &[a[2].clone(), a[3].clone()], &self.zeta);
        let upto = if evolve_w { 4 } else { 2 };
        for i in 0..upto {
            c.correct(&mut a[i], &n0[i], &n1[i]);
        }
        for l in 0..2 {
            if self.noise.is_some() {
                self.q[l] = q_update(&self.q[l], &x0[l], &x1[l], h, nu)?;
            }
        }
        let mut it = a.into_iter();
        self.y = [it.next().unwrap(), it.next().unwrap()];
        if evolve_w {
            self.w = [it.next().unwrap(), it.next().unwrap()];
        }
        self.t += h;
        self.steps += 1;
        let finite = self.w.iter().chain(&self.y).chain(&self.q).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite(format!("solution at t = {}", self.t)));
        }
        self.last.cfl = self.cfl_number(h);
        if self.last.cfl > 0.5 && self.warnings.is_empty() {
            let msg = format!("CFL number {:.3} exceeds 0.5 at t = {:.6}", self.last.cfl, self.t);
            eprintln!("warning: {msg}");
            self.warnings.push(msg);
        }
        Ok(())
    }

    /// h max|w| N.
    fn cfl_number(&self, h: f64) -> f64 {
        let mx = self
            .w
            .iter()
            .flat_map(|v| v.c.iter())
            .map(|f| f.to_physical().iter().fold(0.0f64, |a, x| a.max(x.abs())))
            .fold(0.0f64, f64::max);
        h * mx * self.grid.n() as f64
    }

    /// Split w = w^L + w^H at the current cut-off.
    pub fn hl_split(&self) -> Result<HlSplit> {
        hl_split(&self.w, &self.q, self.lambda())
    }

    /// Low-part energy identity at the current state.
    pub fn energy_report(&self) -> Result<EnergyReport> {
        let split = self.hl_split()?;
        let lambda = self.lambda();
        let x = self.x_fields();
        let xl = [freq_project_vec(&x[0], lambda, Part::Low)?, freq_project_vec(&x[1], lambda, Part::Low)?];
        i1_report(&xl, &split.low, self.params.nu, self.r_value()?, lambda)
    }

    /// One diagnostics record.
    pub fn diagnostics(&self) -> Result<DiagnosticsRow> {
        let kappa = self.params.kappa;
        let split = self.hl_split()?;
        let lambda = self.lambda();
        let x = self.x_fields();
        let xl = [freq_project_vec(&x[0], lambda, Part::Low)?, freq_project_vec(&x[1], lambda, Part::Low)?];
        let r = self.r_value()?;
        let e = i1_report(&xl, &split.low, self.params.nu, r, lambda)?;
        let sol = self.solution();
        let inf = f64::INFINITY;
        Ok(DiagnosticsRow {
            t: self.t,
            step: self.steps,
            lambda,
            r_lambda: r,
            norm_wu: self.w[0].norm(),
            norm_wb: self.w[1].norm(),
            norm_y: pair_norm(&self.y),
            energy: 0.5 * pair_inner(&sol, &sol),
            low_energy: e.low_energy,
            low_hdot1_sq: e.hdot1_sq,
            high_norm: split.high[0].norm_h(1.0 - 3.0 * kappa).hypot(split.high[1].norm_h(1.0 - 3.0 * kappa)),
            besov_x: besov_norm_vec(&x[0], -kappa, inf, inf)?.max(besov_norm_vec(&x[1], -kappa, inf, inf)?),
            besov_y: besov_norm_vec(&self.y[0], 1.0 - 2.0 * kappa, inf, inf)?
                .max(besov_norm_vec(&self.y[1], 1.0 - 2.0 * kappa, inf, inf)?),
            i1_direct: e.i1_direct,
            i1_residual: e.residual,
            i1_residual_as_written: e.residual_as_written,
            form_residual: self.last.form_residual,
            probe_residual: self.last.probe_residual,
            cfl: self.last.cfl,
        })
    }
}

/// Per-mode weights of the second-order exponential integrator for the
/// linear part nu Delta.
struct EtdCoeffs {
    e: Vec<f64>,
    hphi1: Vec<f64>,
    hphi2: Vec<f64>,
}

/// phi1(z) = (e^z - 1)/z and phi2(z) = (e^z - 1 - z)/z^2.
fn phi12(z: f64) -> (f64, f64) {
    if z.abs() < 1e-2 {
        // p1 = sum z^k / (k+1)!, p2 = sum z^k / (k+2)!
        let (mut p1, mut p2) = (0.0, 0.0);
        let (mut t1, mut t2) = (1.0, 0.5);
        for k in 0..10 {
            p1 += t1;
            p2 += t2;
            t1 *= z / (k as f64 + 2.0);
            t2 *= z / (k as f64 + 3.0);
        }
        (p1, p2)
    } else {
        let p1 = z.exp_m1() / z;
        (p1, (p1 - 1.0) / z)
    }
}

impl EtdCoeffs {
    fn new(grid: &Grid, nu: f64, h: f64) -> Self {
        let len = grid.len();
        let (mut e, mut hphi1, mut hphi2) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        for (idx, _, _) in grid.modes() {
            let z = -nu * grid.ksq(idx) * h;
            let (p1, p2) = phi12(z);
            e[idx] = z.exp();
            hphi1[idx] = h * p1;
            hphi2[idx] = h * p2;
        }
        EtdCoeffs { e, hphi1, hphi2 }
    }

    fn predict(&self, u: &VectorField, n: &VectorField) -> VectorField {
        let mut out = VectorField::zeros(u.grid());
        for c in 0..2 {
            let (uc, nc) = (u.c[c].coeffs(), n.c[c].coeffs());
            for (i, z) in out.c[c].coeffs_mut().iter_mut().enumerate() {
                *z = uc[i] * self.e[i] + nc[i] * self.hphi1[i];
            }
        }
        out
    }

    fn correct(&self, a: &mut VectorField, n0: &VectorField, n1: &VectorField) {
        for c in 0..2 {
            let (x0, x1) = (n0.c[c].coeffs(), n1.c[c].coeffs());
            for (i, z) in a.c[c].coeffs_mut().iter_mut().enumerate() {
                *z += (x1[i] - x0[i]) * self.hphi2[i];
            }
        }
    }
}

/// -P div T for a symmetric tensor given by (T00, T01, T11), plus `forcing`.
fn neg_leray_div_sym(grid: &Grid, t00: &[Complex64], t01: &[Complex64], t11: &[Complex64], forcing: Option<&VectorField>) -> VectorField {
    let mut out = forcing.cloned().unwrap_or_else(|| VectorField::zeros(grid));
    for (idx, k1, k2) in grid.modes() {
        let ksq = grid.ksq(idx);
        if ksq == 0.0 {
            continue;
        }
        let (k1, k2) = (k1 as f64, k2 as f64);
        let s = (t00[idx] - t11[idx]) * (k1 * k2) + t01[idx] * (k2 * k2 - k1 * k1);
        let p = Complex64::new(-s.im, s.re) / ksq;
        out.c[0].coeffs_mut()[idx] -= p * k2;
        out.c[1].coeffs_mut()[idx] += p * k1;
    }
    out
}

/// -P div T for an antisymmetric tensor with T01 = a, plus `forcing`.
fn neg_leray_div_anti(grid: &Grid, a: &[Complex64], forcing: Option<&VectorField>) -> VectorField {
    let mut out = forcing.cloned().unwrap_or_else(|| VectorField::zeros(grid));
    for (idx, k1, k2) in grid.modes() {
        if grid.ksq(idx) == 0.0 {
            continue;
        }
        let p = Complex64::new(-a[idx].im, a[idx].re);
        out.c[0].coeffs_mut()[idx] -= p * k2 as f64;
        out.c[1].coeffs_mut()[idx] += p * k1 as f64;
    }
    out
}

/// Nonlinear right-hand sides [N_{Y_u}, N_{Y_b}, N_{w_u}, N_{w_b}] in one fused pass.
///
/// N_{Y_u} = -P div(2 X_u (x)_s Y_u + X_u (x) X_u - 2 X_b (x)_s Y_b - X_b (x) X_b) + P zeta_u
/// N_{Y_b} = -P div(2 X_b (x)_a Y_u + 2 Y_b (x)_a X_u + 2 X_b (x)_a X_u) + P zeta_b
/// N_{w_u} = -P div(w_u (x) w_u + D_u (x)_s w_u + Y_u (x) Y_u - w_b (x) w_b - D_b (x)_s w_b - Y_b (x) Y_b)
/// N_{w_b} = -P div(w_b (x) w_u + w_b (x)_a D_u + Y_b (x) Y_u - w_u (x) w_b - w_u (x)_a D_b - Y_u (x) Y_b)
/// with D = 2 (X + Y).
pub fn nonlinear(x: &Pair, y: &Pair, w: &Pair, zeta: &Pair) -> [VectorField; 4] {
    let g = x[0].grid().clone();
    let m = g.m();
    let refs: Vec<&[Complex64]> = [x, y, w]
        .iter()
        .flat_map(|p| p.iter().flat_map(|v| v.c.iter().map(|f| f.coeffs())))
        .collect();
    let ph = g.to_physical_many(&refs, m);
    let len = m * m;
    let mut out: Vec<Vec<f64>> = vec![vec![0.0; len]; 8];
    for p in 0..len {
        let xu = [ph[0][p], ph[1][p]];
        let xb = [ph[2][p], ph[3][p]];
        let yu = [ph[4][p], ph[5][p]];
        let yb = [ph[6][p], ph[7][p]];
        let wu = [ph[8][p], ph[9][p]];
        let wb = [ph[10][p], ph[11][p]];
        let eu = [xu[0] + yu[0], xu[1] + yu[1]];
        let eb = [xb[0] + yb[0], xb[1] + yb[1]];
        let sym_y = |i: usize, j: usize| {
            xu[i] * yu[j] + yu[i] * xu[j] + xu[i] * xu[j] - xb[i] * yb[j] - yb[i] * xb[j] - xb[i] * xb[j]
        };
        let sym_w = |i: usize, j: usize| {
            wu[i] * wu[j] + eu[i] * wu[j] + wu[i] * eu[j] + yu[i] * yu[j]
                - wb[i] * wb[j]
                - eb[i] * wb[j]
                - wb[i] * eb[j]
                - yb[i] * yb[j]
        };
        let wedge = |a: [f64; 2], b: [f64; 2]| a[0] * b[1] - b[0] * a[1];
        out[0][p] = sym_y(0, 0);
        out[1][p] = sym_y(0, 1);
        out[2][p] = sym_y(1, 1);
        out[3][p] = wedge(xb, yu) + wedge(yb, xu) + wedge(xb, xu);
        out[4][p] = sym_w(0, 0);
        out[5][p] = sym_w(0, 1);
        out[6][p] = sym_w(1, 1);
        out[7][p] = wedge(wb, wu) + wedge(wb, eu) - wedge(wu, eb) + wedge(yb, yu);
    }
    let sp = g.from_physical_many(&out, m);
    [
        neg_leray_div_sym(&g, &sp[0], &sp[1], &sp[2], Some(&zeta[0])),
        neg_leray_div_anti(&g, &sp[3], Some(&zeta[1])),
        neg_leray_div_sym(&g, &sp[4], &sp[5], &sp[6], None),
        neg_leray_div_anti(&g, &sp[7], None),
    ]
}

fn neg_leray_div(t: &TensorField2) -> VectorField {
    -&leray_project(&t.divergence())
}

/// Agreement of the Y_b nonlinearity written with six plain products,
/// with three antisymmetric products, and as evaluated by the fused solver
/// (`fused` includes the projected forcing `zeta_b`).
pub fn y_forms_residual(x: &Pair, y: &Pair, fused: &VectorField, zeta_b: &VectorField) -> Result<f64> {
    let tp = |a: &VectorField, b: &VectorField, f| tensor_product(a, b, f);
    let (xu, xb, yu, yb) = (&x[0], &x[1], &y[0], &y[1]);
    let plain = &(&(&(&(&tp(xb, yu, Flavor::Plain)? + &tp(yb, xu, Flavor::Plain)?) + &tp(xb, xu, Flavor::Plain)?)
        - &tp(xu, yb, Flavor::Plain)?)
        - &tp(yu, xb, Flavor::Plain)?)
        - &tp(xu, xb, Flavor::Plain)?;
    let anti = (&(&tp(xb, yu, Flavor::Anti)? + &tp(yb, xu, Flavor::Anti)?) + &tp(xb, xu, Flavor::Anti)?).scaled(2.0);
    let np = neg_leray_div(&plain);
    let na = neg_leray_div(&anti);
    let nf = fused - &leray_project(zeta_b);
    let scale = np.norm().max(na.norm()).max(f64::MIN_POSITIVE);
    Ok((&np - &na).norm().max((&nf - &na).norm()) / scale)
}

/// Relative mismatch between N_Y + N_w and the right-hand side of the
/// undecomposed equation for v = Y + w driven by X.
pub fn decomposition_residual(x: &Pair, y: &Pair, w: &Pair, zeta: &Pair, n: &[VectorField; 4]) -> Result<f64> {
    let uu = &(&x[0] + &y[0]) + &w[0];
    let bb = &(&x[1] + &y[1]) + &w[1];
    let tu = &tensor_product(&uu, &uu, Flavor::Plain)? - &tensor_product(&bb, &bb, Flavor::Plain)?;
    let tb = &tensor_product(&bb, &uu, Flavor::Plain)? - &tensor_product(&uu, &bb, Flavor::Plain)?;
    let nv_u = &neg_leray_div(&tu) + &leray_project(&zeta[0]);
    let nv_b = &neg_leray_div(&tb) + &leray_project(&zeta[1]);
    let su = &n[0] + &n[2];
    let sb = &n[1] + &n[3];
    let d = (&nv_u - &su).norm().hypot((&nv_b - &sb).norm());
    let scale = nv_u.norm().hypot(nv_b.norm()).max(f64::MIN_POSITIVE);
    Ok(d / scale)
}

/// w = w^L + w^H with
/// w^H_u = -P div(w_u <_s Q^H_u - w_b <_s Q^H_b),
/// w^H_b = -P div(w_b <_a Q^H_u - w_u <_a Q^H_b).
#[derive(Clone, Debug)]
pub struct HlSplit {
    pub low: Pair,
    pub high: Pair,
}

/// The paracontrolled part -P div(w <. Q) of the remainder for given Q.
pub fn paracontrolled_part(w: &Pair, q: &Pair) -> Pair {
    let g = w[0].grid().clone();
    let bw = [VectorBlocks::new(&w[0]), VectorBlocks::new(&w[1])];
    let bq = [VectorBlocks::new(&q[0]), VectorBlocks::new(&q[1])];
    let diff = |a: [[Vec<f64>; 2]; 2], b: [[Vec<f64>; 2]; 2]| -> [[Vec<f64>; 2]; 2] {
        let sub = |x: &Vec<f64>, y: &Vec<f64>| x.iter().zip(y).map(|(p, q)| p - q).collect::<Vec<f64>>();
        [[sub(&a[0][0], &b[0][0]), sub(&a[0][1], &b[0][1])], [sub(&a[1][0], &b[1][0]), sub(&a[1][1], &b[1][1])]]
    };
    let tu = diff(
        vector_piece_phys(&bw[0], &bq[0], Flavor::Symm, Piece::Lt),
        vector_piece_phys(&bw[1], &bq[1], Flavor::Symm, Piece::Lt),
    );
    let tb = diff(
        vector_piece_phys(&bw[1], &bq[0], Flavor::Anti, Piece::Lt),
        vector_piece_phys(&bw[0], &bq[1], Flavor::Anti, Piece::Lt),
    );
    [neg_leray_div(&tensor_from_phys(&g, &tu)), neg_leray_div(&tensor_from_phys(&g, &tb))]
}

/// High-low split of w at cut-off `lambda` using Q^H = H_lambda Q.
pub fn hl_split(w: &Pair, q: &Pair, lambda: f64) -> Result<HlSplit> {
    let qh = [freq_project_vec(&q[0], lambda, Part::High)?, freq_project_vec(&q[1], lambda, Part::High)?];
    let high = paracontrolled_part(w, &qh);
    let low = [&w[0] - &high[0], &w[1] - &high[1]];
    Ok(HlSplit { low, high })
}

/// w^sharp = w + P div(w <. Q).
pub fn wsharp(w: &Pair, q: &Pair) -> Pair {
    let h = paracontrolled_part(w, q);
    [&w[0] - &h[0], &w[1] - &h[1]]
}

/// Recovers w from w^sharp by fixed-point iteration of w = w^sharp - P div(w <. Q).
pub fn wsharp_inverse(ws: &Pair, q: &Pair, tol: f64, max_iter: usize) -> Result<(Pair, usize)> {
    let mut w = ws.clone();
    for it in 1..=max_iter {
        let h = paracontrolled_part(&w, q);
        let next = [&ws[0] + &h[0], &ws[1] + &h[1]];
        let d = (&next[0] - &w[0]).norm().hypot((&next[1] - &w[1]).norm());
        w = next;
        if d <= tol * pair_norm(&w).max(f64::MIN_POSITIVE) {
            return Ok((w, it));
        }
    }
    Err(Error::Consistency(format!("fixed point did not converge in {max_iter} iterations")))
}

/// C(f, g) = ((d_t - nu Delta) f) < g - 2 nu sum_k d_k f < d_k g, given d_t f.
pub fn commutator(f: &VectorField, dtf: &VectorField, g: &VectorField, flavor: Flavor, nu: f64) -> Result<TensorField2> {
    let heat_f = dtf - &f.laplacian().scaled(nu);
    let mut c = crate::besov::vector_piece(&heat_f, g, flavor, Piece::Lt)?;
    for k in 0..2 {
        let t = crate::besov::vector_piece(&f.deriv(k), &g.deriv(k), flavor, Piece::Lt)?;
        c = &c - &t.scaled(2.0 * nu);
    }
    Ok(c)
}

/// C(f, g) = (d_t - nu Delta)(f < g) - f < (d_t - nu Delta) g, given d_t f and d_t g.
pub fn commutator_direct(
    f: &VectorField,
    dtf: &VectorField,
    g: &VectorField,
    dtg: &VectorField,
    flavor: Flavor,
    nu: f64,
) -> Result<TensorField2> {
    use crate::besov::vector_piece as vp;
    let fg = vp(f, g, flavor, Piece::Lt)?;
    let dt_fg = &vp(dtf, g, flavor, Piece::Lt)? + &vp(f, dtg, flavor, Piece::Lt)?;
    let lhs = &dt_fg - &fg.map(|e| e.laplacian()).scaled(nu);
    let heat_g = dtg - &g.laplacian().scaled(nu);
    Ok(&lhs - &vp(f, &heat_g, flavor, Piece::Lt)?)
}

/// Both sides of the low-part energy identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub lambda: f64,
    pub r: f64,
    /// |w^L|^2
    pub low_energy: f64,
    /// |grad w^L|^2
    pub hdot1_sq: f64,
    /// <w^L, A w^L> with A = nu/2 Delta - grad_spec(L X) - r
    pub a_pairing: f64,
    pub i1_direct: f64,
    /// -nu |grad w^L|^2 + 2 <w^L, A w^L> + 2 r |w^L|^2
    pub i1_decomposed: f64,
    /// the same with r |w^L|^2 in place of 2 r |w^L|^2
    pub i1_as_written: f64,
    pub residual: f64,
    pub residual_as_written: f64,
}

/// I_1 = 2 <w_u, nu Delta w_u - div(2 X_u (x)_s w_u - 2 X_b (x)_s w_b)>
///     + 2 <w_b, nu Delta w_b - div(2 w_b (x)_a X_u - 2 w_u (x)_a X_b)>
/// evaluated directly and through the operator A.
pub fn i1_report(xl: &Pair, wl: &Pair, nu: f64, r: f64, lambda: f64) -> Result<EnergyReport> {
    let (xu, xb, wu, wb) = (&xl[0], &xl[1], &wl[0], &wl[1]);
    let tu = (&tensor_product(xu, wu, Flavor::Symm)? - &tensor_product(xb, wb, Flavor::Symm)?).scaled(2.0);
    let tb = (&tensor_product(wb, xu, Flavor::Anti)? - &tensor_product(wu, xb, Flavor::Anti)?).scaled(2.0);
    let lap = [wu.laplacian(), wb.laplacian()];
    let du = tu.divergence();
    let db = tb.divergence();
    let diss = nu * (wu.inner(&lap[0]) + wb.inner(&lap[1]));
    let transport = wu.inner(&du) + wb.inner(&db);
    let i1_direct = 2.0 * diss - 2.0 * transport;

    let (gu, gb) = nabla_spec(xu, xb).apply(wu, wb);
    let spec = wu.inner(&gu) + wb.inner(&gb);
    let low_energy = pair_inner(wl, wl);
    let hdot1_sq = wu.norm_hdot(1.0).powi(2) + wb.norm_hdot(1.0).powi(2);
    let a_pairing = 0.5 * diss - spec - r * low_energy;
    let base = -nu * hdot1_sq + 2.0 * a_pairing;
    let i1_decomposed = base + 2.0 * r * low_energy;
    let i1_as_written = base + r * low_energy;
    let scale = 2.0 * diss.abs() + 2.0 * transport.abs() + nu * hdot1_sq + 2.0 * spec.abs() + 4.0 * r.abs() * low_energy;
    Ok(EnergyReport {
        lambda,
        r,
        low_energy,
        hdot1_sq,
        a_pairing,
        i1_direct,
        i1_decomposed,
        i1_as_written,
        residual: relative_residual(i1_direct, i1_decomposed, scale),
        residual_as_written: relative_residual(i1_direct, i1_as_written, scale),
    })
}

/// One row of the time series written by `simulate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub step: u64,
    pub lambda: f64,
    pub r_lambda: f64,
    pub norm_wu: f64,
    pub norm_wb: f64,
    pub norm_y: f64,
    /// 1/2 |u|^2 + 1/2 |b|^2 of the full solution
    pub energy: f64,
    pub low_energy: f64,
    pub low_hdot1_sq: f64,
    /// |w^H| in H^{1 - 3 kappa}
    pub high_norm: f64,
    /// |X| in B^{-kappa}_{inf,inf}
    pub besov_x: f64,
    /// |Y| in B^{1 - 2 kappa}_{inf,inf}
    pub besov_y: f64,
    pub i1_direct: f64,
    pub i1_residual: f64,
    pub i1_residual_as_written: f64,
    pub form_residual: Option<f64>,
    pub probe_residual: Option<f64>,
    pub cfl: f64,
}

/// Steps to `t_end` with the configured step (the last one shortened) and
/// records diagnostics at t = t_start and every `every` steps and at the end.
pub fn run(state: &mut SolverState, t_end: f64, every: usize, mut on_row: impl FnMut(&DiagnosticsRow) -> Result<()>) -> Result<Vec<DiagnosticsRow>> {
    if t_end < state.t {
        return Err(Error::NegativeTime(t_end - state.t));
    }
    let every = every.max(1);
    let dt = state.params.dt;
    let mut rows = Vec::new();
    let mut emit = |s: &SolverState, rows: &mut Vec<DiagnosticsRow>| -> Result<()> {
        let row = s.diagnostics()?;
        on_row(&row)?;
        rows.push(row);
        Ok(())
    };
    emit(state, &mut rows)?;
    let mut k = 0usize;
    while t_end - state.t > 1e-12 * dt.max(t_end) {
        let h = dt.min(t_end - state.t);
        state.step(h)?;
        k += 1;
        let done = t_end - state.t <= 1e-12 * dt.max(t_end);
        if k % every == 0 || done {
            emit(state, &mut rows)?;
        }
    }
    Ok(rows)
}

/// Differences between consecutive Galerkin levels driven by one noise path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GalerkinReport {
    pub levels: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
    /// sup_t |w^n - w^{2n}|_{L^2}, one entry per consecutive pair
    pub sup_l2: Vec<f64>,
    pub betas: Vec<f64>,
    /// (int_0^T |w^n - w^{2n}|_{H^beta}^2 dt)^{1/2}, indexed [beta][pair]
    pub l2_h: Vec<Vec<f64>>,
    pub final_norms: Vec<f64>,
}

/// Runs the Galerkin approximations at `levels` in lockstep on one noise path.
pub fn galerkin_run(
    grid: &Grid,
    params: &SolverParams,
    u0: &VectorField,
    b0: &VectorField,
    levels: &[f64],
    t_end: f64,
    seed: u64,
    betas: &[f64],
) -> Result<GalerkinReport> {
    if levels.len() < 2 {
        return Err(Error::InvalidParameter("need at least two Galerkin levels".into()));
    }
    for w in levels.windows(2) {
        if w[1] != 2.0 * w[0] {
            return Err(Error::InvalidParameter(format!("levels must double: {} then {}", w[0], w[1])));
        }
    }
    if !(t_end > 0.0) {
        return Err(Error::InvalidParameter(format!("final time must be positive, got {t_end}")));
    }
    let mut states = levels
        .iter()
        .map(|&n| {
            let p = SolverParams {
                galerkin: Some(n),
                ..params.clone()
            };
            SolverState::new(grid, p, u0.clone(), b0.clone(), zero_pair(grid), seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let pairs = levels.len() - 1;
    let mut sup = vec![0.0f64; pairs];
    let mut acc = vec![vec![0.0f64; pairs]; betas.len()];
    let measure = |states: &[SolverState], sup: &mut [f64]| -> Vec<Vec<f64>> {
        let mut hs = vec![vec![0.0; pairs]; betas.len()];
        for i in 0..pairs {
            let d = [&states[i].w[0] - &states[i + 1].w[0], &states[i].w[1] - &states[i + 1].w[1]];
            sup[i] = sup[i].max(pair_norm(&d));
            for (bi, &b) in betas.iter().enumerate() {
                hs[bi][i] = d[0].norm_h(b).powi(2) + d[1].norm_h(b).powi(2);
            }
        }
        hs
    };
    let mut prev = measure(&states, &mut sup);
    let dt = params.dt;
    let mut t = 0.0;
    while t_end - t > 1e-12 * dt.max(t_end) {
        let h = dt.min(t_end - t);
        for s in states.iter_mut() {
            s.step(h)?;
        }
        t = states[0].t;
        let cur = measure(&states, &mut sup);
        for bi in 0..betas.len() {
            for i in 0..pairs {
                acc[bi][i] += 0.5 * h * (prev[bi][i] + cur[bi][i]);
            }
        }
        prev = cur;
    }
    Ok(GalerkinReport {
        levels: levels.to_vec(),
        t_end,
        dt,
        seed,
        sup_l2: sup,
        betas: betas.to_vec(),
        l2_h: acc.into_iter().map(|v| v.into_iter().map(f64::sqrt).collect()).collect(),
        final_norms: states.iter().map(|s| pair_norm(&s.w)).collect(),
    })
}

/// Smallest nonnegative slope b and intercept c with y_i <= c + b x_i for all i,
/// chosen as the supporting line of the upper hull at the mean of x.
/// Returns (c, b, raw slope before clamping).
pub fn upper_envelope(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    if x.is_empty() || x.len() != y.len() || x.iter().chain(y).any(|v| !v.is_finite()) {
        return None;
    }
    let mut pts: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        if hull.last().is_some_and(|h| h.0 == p.0) {
            hull.pop();
        }
        hull.push(p);
    }
    let xm = x.iter().sum::<f64>() / x.len() as f64;
    let raw = hull
        .windows(2)
        .find(|w| w[0].0 <= xm && xm <= w[1].0)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .unwrap_or(0.0);
    let b = raw.max(0.0);
    let c = x.iter().zip(y).map(|(xi, yi)| yi - b * xi).fold(f64::NEG_INFINITY, f64::max);
    Some((c, b, raw))
}

/// Low-part energies and their time derivatives from a diagnostics series,
/// as (ln(e + E) E, dE/dt) samples via centered differences.
pub fn log_growth_samples(rows: &[DiagnosticsRow]) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for w in rows.windows(3) {
        let dt = w[2].t - w[0].t;
        if dt <= 0.0 {
            continue;
        }
        let e = w[1].low_energy;
        xs.push((std::f64::consts::E + e).ln() * e);
        ys.push((w[2].low_energy - w[0].low_energy) / dt);
    }
    (xs, ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::sample_at;
    use crate::spectral::random::random_divfree;

    fn det_params(nu: f64) -> SolverParams {
        SolverParams {
            nu,
            noise_u: false,
            noise_b: false,
            dt: 1e-3,
            ..SolverParams::default()
        }
    }

    #[test]
    fn phi_functions_are_continuous() {
        for z in [-1e-2 + 1e-12, -1e-2 - 1e-12, -1e-6, 0.0] {
            let (p1, p2) = phi12(z);
            if z != 0.0 && z.abs() > 5e-3 {
                let d1 = z.exp_m1() / z;
                assert!((p1 - d1).abs() < 1e-14);
                assert!((p2 - (d1 - 1.0) / z).abs() < 1e-12);
            }
            assert!((p1 - 1.0).abs() < 0.01 && (p2 - 0.5).abs() < 0.01);
        }
        assert_eq!(phi12(0.0), (1.0, 0.5));
    }

    #[test]
    fn ledger_initial_index_and_cutoff() {
        let l = StoppingLedger::new(2.5, 3.0);
        assert_eq!(l.i0(), 2);
        assert_eq!(l.lambda0, 64.0);
        let mut l = StoppingLedger::new(0.4, 3.0);
        assert_eq!(l.i0(), 0);
        l.observe(0.1, 0.9);
        l.observe(0.2, 1.2);
        l.observe(0.3, 1.7);
        l.observe(0.4, 3.3);
        assert_eq!(l.entries.len(), 3);
        assert_eq!(l.entries[1].index, 1);
        assert_eq!(l.entries[2].index, 3);
        assert_eq!(l.trace[3].lambda, 2.2f64.powi(3));
        l.verify().unwrap();
        l.trace[3].lambda = 8.0;
        assert!(l.verify().is_err());
    }

    #[test]
    fn zero_noise_keeps_y_zero() {
        let g = Grid::new(16).unwrap();
        let u0 = random_divfree(&g, 1, 2.0, 4, 1.0);
        let mut s = SolverState::new(&g, det_params(0.1), u0.clone(), VectorField::zeros(&g), zero_pair(&g), 3).unwrap();
        for _ in 0..5 {
            s.y_step(1e-2).unwrap();
        }
        assert_eq!(pair_norm(&s.y), 0.0);
        assert_eq!(s.w[0], u0);
    }

    #[test]
    fn magnetic_channel_stays_zero_without_b_noise() {
        let g = Grid::new(16).unwrap();
        let p = SolverParams {
            noise_b: false,
            dt: 1e-3,
            ..SolverParams::default()
        };
        let u0 = random_divfree(&g, 2, 2.0, 4, 0.5);
        let mut s = SolverState::new(&g, p, u0, VectorField::zeros(&g), zero_pair(&g), 5).unwrap();
        for _ in 0..10 {
            s.step(1e-3).unwrap();
        }
        let scale = s.y[0].norm() + s.w[0].norm();
        assert!(s.y[0].norm() > 0.0);
        // paired real transforms leak round-off between channels
        assert!(s.y[1].norm() < 1e-14 * scale, "{}", s.y[1].norm());
        assert!(s.w[1].norm() < 1e-14 * scale, "{}", s.w[1].norm());
    }

    #[test]
    fn y_forms_and_probe_agree() {
        let g = Grid::new(16).unwrap();
        let n = sample_at(&g, 1.0, 0.3, 11, 0).unwrap();
        let (xu, xb) = n.fields(None);
        let x = [xu, xb];
        let y = [random_divfree(&g, 3, 2.0, 6, 1.0), random_divfree(&g, 4, 2.0, 6, 1.0)];
        let w = [random_divfree(&g, 5, 2.0, 6, 1.0), random_divfree(&g, 6, 2.0, 6, 1.0)];
        let zeta = [random_divfree(&g, 7, 2.0, 3, 0.3), random_divfree(&g, 8, 2.0, 3, 0.3)];
        let nl = nonlinear(&x, &y, &w, &zeta);
        assert!(y_forms_residual(&x, &y, &nl[1], &zeta[1]).unwrap() < 1e-12);
        assert!(decomposition_residual(&x, &y, &w, &zeta, &nl).unwrap() < 1e-12);
        for v in &nl {
            assert!(v.divergence_residual() < 1e-12);
        }
    }

    #[test]
    fn split_and_wsharp_roundtrip() {
        let g = Grid::new(32).unwrap();
        let w = [random_divfree(&g, 1, 2.0, 12, 1.0), random_divfree(&g, 2, 2.0, 12, 1.0)];
        let q = [random_divfree(&g, 3, 3.0, 15, 0.3), random_divfree(&g, 4, 3.0, 15, 0.3)];
        let s = hl_split(&w, &q, 4.0).unwrap();
        let sum = [&s.low[0] + &s.high[0], &s.low[1] + &s.high[1]];
        assert!(sum[0].rel_diff(&w[0]) < 1e-14 && sum[1].rel_diff(&w[1]) < 1e-14);
        let ws = wsharp(&w, &q);
        let (back, _) = wsharp_inverse(&ws, &q, 1e-14, 200).unwrap();
        assert!(back[0].rel_diff(&w[0]) < 1e-12 && back[1].rel_diff(&w[1]) < 1e-12);
    }

    #[test]
    fn commutator_forms_agree() {
        let g = Grid::new(32).unwrap();
        let f = random_divfree(&g, 1, 2.0, 12, 1.0);
        let dtf = random_divfree(&g, 2, 2.0, 12, 1.0);
        let q = random_divfree(&g, 3, 2.0, 12, 1.0);
        let dtq = random_divfree(&g, 4, 2.0, 12, 1.0);
        for flavor in [Flavor::Symm, Flavor::Anti] {
            let a = commutator(&f, &dtf, &q, flavor, 0.7).unwrap();
            let b = commutator_direct(&f, &dtf, &q, &dtq, flavor, 0.7).unwrap();
            assert!((&a - &b).norm() < 1e-12 * a.norm());
        }
    }

    #[test]
    fn low_energy_identity_holds_with_doubled_constant() {
        let g = Grid::new(32).unwrap();
        let n = sample_at(&g, 1.0, 0.5, 2, 0).unwrap();
        let (xu, xb) = n.fields(Some(8.0));
        let wl = [random_divfree(&g, 5, 2.0, 8, 1.0), random_divfree(&g, 6, 2.0, 8, 1.0)];
        let r = r_lambda(8.0, 0.5, 1.0).unwrap();
        let e = i1_report(&[xu, xb], &wl, 1.0, r, 8.0).unwrap();
        assert!(e.residual < 1e-12, "{e:?}");
        assert!(e.residual_as_written > 1e-3, "{e:?}");
    }

    #[test]
    fn inviscid_energy_is_conserved() {
        let g = Grid::new(32).unwrap();
        let u0 = random_divfree(&g, 1, 2.0, 4, 0.5);
        let b0 = random_divfree(&g, 2, 2.0, 4, 0.5);
        let mut s = SolverState::new(&g, det_params(0.0), u0, b0, zero_pair(&g), 0).unwrap();
        let e0 = pair_inner(&s.w, &s.w);
        for _ in 0..100 {
            s.step(1e-3).unwrap();
        }
        let e1 = pair_inner(&s.w, &s.w);
        assert!((e1 - e0).abs() < 1e-9, "{e0} {e1}");
    }

    #[test]
    fn rejects_bad_initial_data() {
        let g = Grid::new(8).unwrap();
        let mut v = VectorField::zeros(&g);
        v.c[0].set_mode(1, 0, Complex64::new(1.0, 0.0)).unwrap();
        v.c[0].set_mode(-1, 0, Complex64::new(1.0, 0.0)).unwrap();
        let r = SolverState::new(&g, det_params(1.0), v, VectorField::zeros(&g), zero_pair(&g), 0);
        assert!(matches!(r, Err(Error::NotDivergenceFree(_))));
        let p = SolverParams { nu: 0.0, ..SolverParams::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn envelope_bounds_points() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [0.0, 2.0, 1.0, 3.5];
        let (c, b, _) = upper_envelope(&x, &y).unwrap();
        assert!(b >= 0.0);
        for (xi, yi) in x.iter().zip(&y) {
            assert!(*yi <= c + b * xi + 1e-15);
        }
    }
}
