//! Closed spring chains: equilibrium systems, potential energy from
//! simulated overlap estimates, time-discretized dynamics and Lyapunov
//! exponents of first-order systems.
//!
//! Chains are written in stretch coordinates `y_i = x_{i+1} − x_i` (indices
//! wrap). Forces of springs with `K > 1` terms mix two stretches per power,
//! which no single family in [`crate::nonlinear_system`] can express in the
//! positions, while in the stretches every force is a sum of powers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::block_encoding::{BlockEncoding, BlockError};
use crate::circulant_pde::{circulant_encode, fd_coefficients, CirculantError, CirculantSpec};
use crate::matrix_core::{eig_hermitian, MatrixError};
use crate::newton_solver::{solve, NewtonConfig, NewtonError};
use crate::nonlinear_system::{check_domain, newton_delta, norm2, FamilyKind, FunctionFamily, SystemError};
use crate::{CMatrix, CVector, C64};

#[derive(Debug, Error)]
pub enum PhysicsError {
    #[error("invalid chain: {0}")]
    Chain(String),
    #[error("invalid time grid: {0}")]
    Grid(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("initial conditions coincide; the separation d0 must be positive")]
    ZeroSeparation,
    #[error("overlap magnitude {0} exceeds 1")]
    Overlap(f64),
    #[error("trajectory solve did not converge (residual {0:e})")]
    NoConvergence(f64),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Newton(#[from] NewtonError),
    #[error(transparent)]
    Block(#[from] BlockError),
    #[error(transparent)]
    Circulant(#[from] CirculantError),
}

impl From<MatrixError> for PhysicsError {
    fn from(e: MatrixError) -> Self {
        PhysicsError::Block(e.into())
    }
}

pub type PhysicsResult<T> = Result<T, PhysicsError>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    #[default]
    Closed,
}

/// Masses `𝓜_i` joined in a ring by identical springs with force
/// `Σ_p k_p s^p` at stretch `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassChainSpec {
    pub masses: Vec<f64>,
    pub springs: Vec<f64>,
    #[serde(default)]
    pub boundary: Boundary,
}

impl MassChainSpec {
    pub fn new(masses: Vec<f64>, springs: Vec<f64>) -> PhysicsResult<Self> {
        let s = Self { masses, springs, boundary: Boundary::Closed };
        s.validate()?;
        Ok(s)
    }

    pub fn uniform(n: usize, mass: f64, springs: Vec<f64>) -> PhysicsResult<Self> {
        Self::new(vec![mass; n], springs)
    }

    pub fn validate(&self) -> PhysicsResult<()> {
        if self.masses.len() < 2 {
            return Err(PhysicsError::Chain(format!("need at least 2 masses, got {}", self.masses.len())));
        }
        if let Some(m) = self.masses.iter().find(|m| !(**m > 0.0) || !m.is_finite()) {
            return Err(PhysicsError::Chain(format!("masses must be positive, got {m}")));
        }
        if self.springs.is_empty() || self.springs.iter().any(|k| !k.is_finite()) {
            return Err(PhysicsError::Chain("need at least one finite spring coefficient".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.masses.len()
    }

    pub fn k(&self) -> usize {
        self.springs.len()
    }

    fn check_len(&self, v: &[f64], what: &str) -> PhysicsResult<()> {
        if v.len() != self.n() {
            return Err(PhysicsError::Input(format!("{what} has {} entries for {} masses", v.len(), self.n())));
        }
        Ok(())
    }
}

/// `y_i = x_{i+1} − x_i` with `x_{n} = x_0`.
pub fn differences(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n).map(|i| x[(i + 1) % n] - x[i]).collect()
}

/// Inverse of [`differences`] up to the position of the first mass.
pub fn positions_from_differences(y: &[f64], x_first: f64) -> Vec<f64> {
    let mut x = Vec::with_capacity(y.len());
    let mut cur = x_first;
    for v in y {
        x.push(cur);
        cur += v;
    }
    x
}

fn spring(spec: &MassChainSpec, s: f64) -> f64 {
    spec.springs.iter().enumerate().map(|(p, k)| k * s.powi(p as i32 + 1)).sum()
}

/// Net force on each mass, `Σ_p k_p (y_i^p − y_{i−1}^p)`.
pub fn chain_forces(spec: &MassChainSpec, x: &[f64]) -> Vec<f64> {
    let y = differences(x);
    let n = y.len();
    (0..n).map(|i| spring(spec, y[i]) - spring(spec, y[(i + n - 1) % n])).collect()
}

/// `Σ_i Σ_p k_p/(p+1) y_i^{p+1}`.
pub fn potential_energy(spec: &MassChainSpec, x: &[f64]) -> f64 {
    differences(x)
        .iter()
        .map(|s| spec.springs.iter().enumerate().map(|(p, k)| k / (p + 2) as f64 * s.powi(p as i32 + 2)).sum::<f64>())
        .sum()
}

/// Force balance `F_i(y) = Σ_p k_p (y_i^p − y_{i−1}^p)` over the stretches.
pub fn build_equilibrium_system(spec: &MassChainSpec) -> PhysicsResult<FunctionFamily> {
    spec.validate()?;
    let n = spec.n();
    let a = (0..n)
        .map(|i| {
            spec.springs
                .iter()
                .map(|&k| {
                    let mut row = vec![0.0; n];
                    row[i] += k;
                    row[(i + n - 1) % n] -= k;
                    row
                })
                .collect()
        })
        .collect();
    Ok(FunctionFamily::new(FamilyKind::SumOfPowers, a, vec![], vec![0.0; n], true)?)
}

/// [`build_equilibrium_system`] with the last, linearly dependent, balance
/// replaced by the ring closure `(1/n) Σ y_i = 0`.
pub fn closure_system(spec: &MassChainSpec) -> PhysicsResult<FunctionFamily> {
    let mut f = build_equilibrium_system(spec)?;
    let n = spec.n();
    for (p, layer) in f.a[n - 1].iter_mut().enumerate() {
        layer.iter_mut().for_each(|v| *v = if p == 0 { 1.0 / n as f64 } else { 0.0 });
    }
    Ok(f)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub differences: Vec<f64>,
    /// `‖F(y)‖₂` of the full force balance at the returned stretches.
    pub residual: f64,
    pub iterations: usize,
    pub postselect_prob: f64,
    pub ledger_cost: f64,
}

/// Runs the simulated Newton solver on [`closure_system`] from the
/// stretches of `x0`.
pub fn solve_equilibrium(spec: &MassChainSpec, x0: &[f64], eps: f64) -> PhysicsResult<EquilibriumReport> {
    spec.check_len(x0, "initial guess")?;
    let sys = closure_system(spec)?;
    let cfg = NewtonConfig::for_family(&sys, eps);
    let report = solve(&sys, &differences(x0), &cfg)?;
    let forces = build_equilibrium_system(spec)?;
    Ok(EquilibriumReport {
        residual: norm2(&forces.eval_raw(&report.x_final)),
        differences: report.x_final,
        iterations: report.steps.len(),
        postselect_prob: report.postselect_prob,
        ledger_cost: report.total_cost.total(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sampling {
    Exact,
    Shots { shots: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub value: f64,
    /// `⟨Φ₂|Φ₁⟩` per spring power.
    pub overlaps: Vec<f64>,
    /// Factor turning overlap `p` into its energy contribution.
    pub weights: Vec<f64>,
}

/// `diag(w·s)` for a sub-normalized amplitude vector `w`, completed to a
/// unit state on a doubled register and loaded with `from_state_diag`.
fn diag_from_amplitudes(w: &CVector, s: f64) -> PhysicsResult<BlockEncoding> {
    let n = w.dim();
    let rest = (1.0 - w.norm().powi(2)).max(0.0).sqrt();
    let mut full = w.entries().to_vec();
    full.push(C64::new(rest, 0.0));
    full.resize(2 * n, C64::new(0.0, 0.0));
    let psi = CVector::new(full).normalized();
    Ok(BlockEncoding::from_state_diag(&psi)?.sub_block(n)?.relabel(s))
}

/// Encoding of `diag(y)` built from `diag(x)` through the difference
/// circulant applied to the uniform state.
pub fn stretch_encoding(x_enc: &BlockEncoding) -> PhysicsResult<BlockEncoding> {
    let n = x_enc.dim();
    let mut row = vec![0.0; n];
    row[0] = -1.0;
    row[1 % n] += 1.0;
    let d = circulant_encode(&CirculantSpec::from_real(&row)?)?;
    let u = CVector::uniform(n);
    let v = x_enc.block().mul_vec(&u)?;
    let w = d.block().mul_vec(&v)?;
    let s = d.alpha * x_enc.alpha * (n as f64).sqrt();
    let mut out = diag_from_amplitudes(&w, s)?;
    out.cost = out.cost.merge(&x_enc.cost).merge(&d.cost);
    Ok(out)
}

/// Potential energy of the configuration encoded in `x_enc`, read off from
/// the overlaps `⟨u| diag(y)^{p+1} |u⟩` with the uniform state `u`.
pub fn equilibrium_energy(
    x_enc: &BlockEncoding,
    spec: &MassChainSpec,
    sampling: Sampling,
) -> PhysicsResult<EnergyEstimate> {
    spec.validate()?;
    let n = x_enc.dim();
    if n != spec.n() {
        return Err(PhysicsError::Input(format!("encoding of dimension {n} for {} masses", spec.n())));
    }
    let y = stretch_encoding(x_enc)?;
    let u = CVector::uniform(n);
    let mut rng = match sampling {
        Sampling::Shots { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        Sampling::Exact => None,
    };
    let mut pw = y.clone();
    let mut overlaps = Vec::with_capacity(spec.k());
    let mut weights = Vec::with_capacity(spec.k());
    let mut value = 0.0;
    for (p, &k) in spec.springs.iter().enumerate() {
        pw = BlockEncoding::product(&pw, &y)?;
        let phi1 = pw.block().mul_vec(&u)?;
        let o = u.dot(&phi1).re;
        if o.abs() > 1.0 + 1e-12 {
            return Err(PhysicsError::Overlap(o));
        }
        let est = match (sampling, rng.as_mut()) {
            (Sampling::Shots { shots, .. }, Some(r)) => {
                let p0 = ((1.0 + o) / 2.0).clamp(0.0, 1.0);
                let hits = Binomial::new(shots, p0).map_err(|e| PhysicsError::Input(e.to_string()))?.sample(r);
                2.0 * hits as f64 / shots as f64 - 1.0
            }
            _ => o,
        };
        let weight = k / (p + 2) as f64 * n as f64 * pw.alpha;
        value += weight * est;
        overlaps.push(est);
        weights.push(weight);
    }
    Ok(EnergyEstimate { value, overlaps, weights })
}

/// Uniform time grid `0, Δ, …, NΔ = horizon` with the stencil half-width
/// used for second derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub step: f64,
    #[serde(default = "default_order")]
    pub order: usize,
}

fn default_order() -> usize {
    1
}

impl TimeGrid {
    pub fn new(horizon: f64, step: f64, order: usize) -> PhysicsResult<Self> {
        let g = Self { horizon, step, order };
        g.validate()?;
        Ok(g)
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }

    pub fn validate(&self) -> PhysicsResult<()> {
        if !(self.step > 0.0) || !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(PhysicsError::Grid(format!("need 0 < step and 0 < horizon, got {} and {}", self.step, self.horizon)));
        }
        let n = self.steps();
        if n == 0 || (n as f64 * self.step - self.horizon).abs() > 1e-9 * self.horizon {
            return Err(PhysicsError::Grid(format!("horizon {} is not a multiple of step {}", self.horizon, self.step)));
        }
        if self.order == 0 {
            return Err(PhysicsError::Grid("stencil order must be at least 1".into()));
        }
        if n < self.order {
            return Err(PhysicsError::Grid(format!("{n} steps cannot hold a stencil of half-width {}", self.order)));
        }
        Ok(())
    }
}

/// Per-power coefficients of `G_i(y) = ÿ_i` on `y_{i+1}`, `y_i`, `y_{i−1}`.
fn accel_terms(spec: &MassChainSpec, i: usize) -> [(usize, f64); 3] {
    let n = spec.n();
    let (next, prev) = ((i + 1) % n, (i + n - 1) % n);
    let (mi, mn) = (spec.masses[i], spec.masses[next]);
    [(next, 1.0 / mn), (i, -1.0 / mn - 1.0 / mi), (prev, 1.0 / mi)]
}

fn accel(spec: &MassChainSpec, y: &[f64]) -> Vec<f64> {
    (0..spec.n())
        .map(|i| {
            accel_terms(spec, i)
                .iter()
                .map(|&(v, w)| w * spring(spec, y[v]))
                .sum()
        })
        .collect()
}

/// Stretch-coordinate equations of motion on the grid.
///
/// Unknowns are `y_i(mΔ)` for `m = 1..N` at index `(m−1)n + i`. Equation
/// `(m, i)` for `m = 0..N−1` reads `Σ_j r_j y_i(m+j) = Δ² ÿ_i(y(m))`, scaled
/// to keep values below 1/2. Taps past `N` are dropped; taps before 0 use
/// `y(−l) = y(l) − 2lΔ·ẏ(0)`, which keeps the start second-order.
pub fn build_dynamics_system(
    spec: &MassChainSpec,
    grid: &TimeGrid,
    x_init: &[f64],
    v_init: &[f64],
) -> PhysicsResult<FunctionFamily> {
    spec.validate()?;
    grid.validate()?;
    spec.check_len(x_init, "x(0)")?;
    spec.check_len(v_init, "v(0)")?;
    let (n, big_n, m_half, dt) = (spec.n(), grid.steps(), grid.order as isize, grid.step);
    let stencil = fd_coefficients(grid.order)?;
    let w = 0.5 / stencil.coefficients.iter().map(|r| r.abs()).sum::<f64>();
    let y0 = differences(x_init);
    let vy0 = differences(v_init);
    let g0 = accel(spec, &y0);
    let dim = n * big_n;
    let idx = |m: usize, i: usize| (m - 1) * n + i;
    let mut a = vec![vec![vec![0.0; dim]; spec.k()]; dim];
    let mut c = vec![0.0; dim];
    for m in 0..big_n {
        for i in 0..n {
            let eq = m * n + i;
            for j in -m_half..=m_half {
                let r = w * stencil.r(j);
                let l = m as isize + j;
                if l > big_n as isize {
                    continue;
                }
                match l {
                    0 => c[eq] += r * y0[i],
                    l if l > 0 => a[eq][0][idx(l as usize, i)] += r,
                    l => {
                        let lp = (-l) as usize;
                        a[eq][0][idx(lp, i)] += r;
                        c[eq] -= r * 2.0 * lp as f64 * dt * vy0[i];
                    }
                }
            }
            let h = w * dt * dt;
            if m == 0 {
                c[eq] -= h * g0[i];
            } else {
                for (p, &k) in spec.springs.iter().enumerate() {
                    for (v, coef) in accel_terms(spec, i) {
                        a[eq][p][idx(m, v)] -= h * k * coef;
                    }
                }
            }
        }
    }
    Ok(FunctionFamily::new(FamilyKind::SumOfPowers, a, vec![], c, true)?)
}

/// Trajectory `states[m] = state(mΔ)` for `m = 0..=N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub step: f64,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    fn from_unknowns(step: f64, initial: &[f64], z: &[f64], width: usize, take: usize) -> Self {
        let mut states = vec![initial.to_vec()];
        states.extend(z.chunks(width).map(|c| c[..take].to_vec()));
        Self { step, states }
    }

    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.step
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TrajectorySolver {
    /// Dense Newton iterations.
    Classical,
    /// The simulated block-encoding Newton solver.
    Quantum(NewtonConfig),
}

/// Solves `f = 0` from `guess`. Returns the root and the classical residual.
pub fn solve_system(f: &FunctionFamily, guess: &[f64], solver: &TrajectorySolver) -> PhysicsResult<(Vec<f64>, f64)> {
    match solver {
        TrajectorySolver::Classical => {
            let mut x = guess.to_vec();
            let mut res = norm2(&f.eval_raw(&x));
            for it in 0..40 {
                if res <= 1e-14 {
                    break;
                }
                let d = newton_delta(f, &x, it)?;
                x.iter_mut().zip(&d).for_each(|(a, b)| *a -= b);
                let next = norm2(&f.eval_raw(&x));
                let stalled = next >= res * 0.5 && next < 1e-11;
                res = next;
                if stalled {
                    break;
                }
            }
            if !(res < 1e-8) {
                return Err(PhysicsError::NoConvergence(res));
            }
            Ok((x, res))
        }
        TrajectorySolver::Quantum(cfg) => {
            let r = solve(f, guess, cfg)?;
            if let Some(it) = r.domain_escape {
                return Err(NewtonError::Config(format!("iterate {it} left the domain")).into());
            }
            Ok((r.x_final, r.residual))
        }
    }
}

/// Stretch trajectory of the chain from `x(0)`, `v(0)`.
pub fn simulate_chain(
    spec: &MassChainSpec,
    grid: &TimeGrid,
    x_init: &[f64],
    v_init: &[f64],
    solver: &TrajectorySolver,
) -> PhysicsResult<Trajectory> {
    let f = build_dynamics_system(spec, grid, x_init, v_init)?;
    let y0 = differences(x_init);
    let guess: Vec<f64> = (0..grid.steps()).flat_map(|_| y0.clone()).collect();
    let (z, _) = solve_system(&f, &guess, solver)?;
    Ok(Trajectory::from_unknowns(grid.step, &y0, &z, spec.n(), spec.n()))
}

/// Exact stretches of a uniform linear chain at time `t`.
pub fn normal_mode_solution(spec: &MassChainSpec, y0: &[f64], vy0: &[f64], t: f64) -> PhysicsResult<Vec<f64>> {
    spec.validate()?;
    let n = spec.n();
    let m = spec.masses[0];
    if spec.k() != 1 || spec.masses.iter().any(|v| (v - m).abs() > 1e-15 * m) {
        return Err(PhysicsError::Chain("normal modes need uniform masses and linear springs".into()));
    }
    let kappa = spec.springs[0] / m;
    let mut op = CMatrix::zeros(n, n);
    for i in 0..n {
        for (v, w) in accel_terms(spec, i) {
            let cur = op.get(i, v);
            op.set(i, v, cur + C64::new(kappa * w * m, 0.0));
        }
    }
    let (vals, vecs) = eig_hermitian(&op)?;
    let mut out = vec![0.0; n];
    for (q, &mu) in vals.iter().enumerate() {
        let col: Vec<f64> = (0..n).map(|i| vecs.get(i, q).re).collect();
        let c: f64 = col.iter().zip(y0).map(|(a, b)| a * b).sum();
        let d: f64 = col.iter().zip(vy0).map(|(a, b)| a * b).sum();
        let amp = if -mu > 1e-12 {
            let w = (-mu).sqrt();
            c * (w * t).cos() + d * (w * t).sin() / w
        } else {
            c + d * t
        };
        out.iter_mut().zip(&col).for_each(|(o, e)| *o += amp * e);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryError {
    /// Max error over steps whose equations keep every stencil tap.
    pub interior: f64,
    /// Max error over the last `order − 1` steps, fixed by truncated stencils.
    pub boundary: f64,
}

pub fn trajectory_error(
    traj: &Trajectory,
    order: usize,
    reference: impl Fn(f64) -> Vec<f64>,
) -> TrajectoryError {
    let big_n = traj.states.len() - 1;
    let cut = big_n + 1 - order.max(1);
    let mut e = TrajectoryError { interior: 0.0, boundary: 0.0 };
    for (m, s) in traj.states.iter().enumerate().skip(1) {
        let r = reference(traj.time(m));
        let d = s.iter().zip(&r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if m <= cut {
            e.interior = e.interior.max(d);
        } else {
            e.boundary = e.boundary.max(d);
        }
    }
    e
}

/// First-order form in stretches and momenta `p_i = 𝓜_i ẋ_i`.
///
/// Unknowns at step `m = 1..N` are `y(mΔ)` followed by `p((m−½)Δ)`, so the
/// system is a staggered update whose stretches satisfy the second-order
/// equations of [`build_dynamics_system`] with `order = 1`.
pub fn build_first_order_chain(
    spec: &MassChainSpec,
    grid: &TimeGrid,
    x_init: &[f64],
    v_init: &[f64],
) -> PhysicsResult<FunctionFamily> {
    spec.validate()?;
    grid.validate()?;
    spec.check_len(x_init, "x(0)")?;
    spec.check_len(v_init, "v(0)")?;
    let (n, big_n, dt) = (spec.n(), grid.steps(), grid.step);
    let w = 0.25;
    let y0 = differences(x_init);
    let p0: Vec<f64> = v_init.iter().zip(&spec.masses).map(|(v, m)| v * m).collect();
    let dim = 2 * n * big_n;
    let yv = |m: usize, i: usize| (m - 1) * 2 * n + i;
    let pv = |m: usize, i: usize| (m - 1) * 2 * n + n + i;
    let mut a = vec![vec![vec![0.0; dim]; spec.k()]; dim];
    let mut c = vec![0.0; dim];
    for m in 0..big_n {
        for i in 0..n {
            let eq = m * 2 * n + i;
            a[eq][0][yv(m + 1, i)] += w;
            if m == 0 {
                c[eq] -= w * y0[i];
            } else {
                a[eq][0][yv(m, i)] -= w;
            }
            let next = (i + 1) % n;
            a[eq][0][pv(m + 1, next)] -= w * dt / spec.masses[next];
            a[eq][0][pv(m + 1, i)] += w * dt / spec.masses[i];

            let eq = m * 2 * n + n + i;
            let prev = (i + n - 1) % n;
            a[eq][0][pv(m + 1, i)] += w;
            if m == 0 {
                let f0 = spring(spec, y0[i]) - spring(spec, y0[prev]);
                c[eq] -= w * (p0[i] + 0.5 * dt * f0);
            } else {
                a[eq][0][pv(m, i)] -= w;
                for (p, &k) in spec.springs.iter().enumerate() {
                    a[eq][p][yv(m, i)] -= w * dt * k;
                    a[eq][p][yv(m, prev)] += w * dt * k;
                }
            }
        }
    }
    Ok(FunctionFamily::new(FamilyKind::SumOfPowers, a, vec![], c, true)?)
}

/// Solves [`build_first_order_chain`]; returns stretches and the staggered
/// momenta `p((m−½)Δ)` for `m = 1..N`.
pub fn simulate_first_order_chain(
    spec: &MassChainSpec,
    grid: &TimeGrid,
    x_init: &[f64],
    v_init: &[f64],
    solver: &TrajectorySolver,
) -> PhysicsResult<(Trajectory, Vec<Vec<f64>>)> {
    let f = build_first_order_chain(spec, grid, x_init, v_init)?;
    let n = spec.n();
    let y0 = differences(x_init);
    let p0: Vec<f64> = v_init.iter().zip(&spec.masses).map(|(v, m)| v * m).collect();
    let guess: Vec<f64> = (0..grid.steps()).flat_map(|_| y0.iter().chain(&p0).copied().collect::<Vec<_>>()).collect();
    let (z, _) = solve_system(&f, &guess, solver)?;
    let traj = Trajectory::from_unknowns(grid.step, &y0, &z, 2 * n, n);
    let momenta = z.chunks(2 * n).map(|c| c[n..].to_vec()).collect();
    Ok((traj, momenta))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum OdeScheme {
    /// `x(m+1) − x(m−1) = 2Δ g(x(m))`, started with one Euler step.
    #[default]
    Central,
    ForwardEuler,
}

/// Discretization of `ẋ = g(x)` on the grid. `g` must be a `SumOfPowers`
/// family. Unknowns are `x(mΔ)` for `m = 1..N` at index `(m−1)d + i`.
pub fn build_ode_system(
    g: &FunctionFamily,
    grid: &TimeGrid,
    x_init: &[f64],
    scheme: OdeScheme,
) -> PhysicsResult<FunctionFamily> {
    g.validate()?;
    grid.validate()?;
    if g.kind != FamilyKind::SumOfPowers {
        return Err(PhysicsError::Input("the right-hand side must be a SumOfPowers family".into()));
    }
    let d = g.n;
    if x_init.len() != d {
        return Err(PhysicsError::Input(format!("x(0) has {} entries for dimension {d}", x_init.len())));
    }
    let big_n = grid.steps();
    let dim = d * big_n;
    let w = 0.25;
    let idx = |m: usize, i: usize| (m - 1) * d + i;
    let g0 = g.eval_raw(x_init);
    let mut a = vec![vec![vec![0.0; dim]; g.k]; dim];
    let mut c = vec![0.0; dim];
    for m in 0..big_n {
        let (back, h) = match scheme {
            OdeScheme::Central if m > 0 => (m - 1, 2.0),
            _ => (m, 1.0),
        };
        for i in 0..d {
            let eq = m * d + i;
            a[eq][0][idx(m + 1, i)] += w;
            if back == 0 {
                c[eq] -= w * x_init[i];
            } else {
                a[eq][0][idx(back, i)] -= w;
            }
            let s = w * h * grid.step;
            if m == 0 {
                c[eq] -= s * g0[i];
            } else {
                c[eq] -= s * g.c.get(i).copied().unwrap_or(0.0);
                for (p, gp) in g.a[i].iter().enumerate() {
                    for k in 0..d {
                        a[eq][p][idx(m, k)] -= s * gp[k];
                    }
                }
            }
        }
    }
    Ok(FunctionFamily::new(FamilyKind::SumOfPowers, a, vec![], c, true)?)
}

/// Trajectory of `ẋ = g(x)` from `x_init`.
pub fn simulate_ode(
    g: &FunctionFamily,
    grid: &TimeGrid,
    x_init: &[f64],
    scheme: OdeScheme,
    solver: &TrajectorySolver,
) -> PhysicsResult<Trajectory> {
    let f = build_ode_system(g, grid, x_init, scheme)?;
    let guess: Vec<f64> = (0..grid.steps()).flat_map(|_| x_init.to_vec()).collect();
    let (z, _) = solve_system(&f, &guess, solver)?;
    Ok(Trajectory::from_unknowns(grid.step, x_init, &z, g.n, g.n))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConfig {
    /// Renormalization interval `T_L`, a multiple of the grid step.
    pub t_l: f64,
    /// Number of intervals `N_L`, with `N_L·T_L` equal to the horizon.
    pub n_l: usize,
    /// Expected `‖x0 − x̄0‖`; checked against the inputs when present.
    #[serde(default)]
    pub d0: Option<f64>,
    /// Amplitude-estimation shots; `None` reads amplitudes exactly.
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scheme: OdeScheme,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    /// `(1/(N_L T_L)) Σ_k ln(d_k/d0)` with raw separations `d_k`.
    pub lambda: f64,
    /// The same sum with the perturbed trajectory restarted at distance
    /// `d0` after every interval.
    pub lambda_renormalized: f64,
    pub d0: f64,
    pub d: Vec<f64>,
    pub d_renormalized: Vec<f64>,
    /// Intervals `k` that entered the estimate.
    pub k_range: (usize, usize),
    /// Set when a trajectory left `[−1/2, 1/2]` before the horizon.
    pub partial: bool,
}

/// `‖a − b‖` read from the amplitude of `diag(a) − diag(b)` applied to the
/// uniform state.
fn separation(a: &[f64], b: &[f64], noise: Option<(&Normal<f64>, &mut ChaCha8Rng)>) -> PhysicsResult<f64> {
    let n = a.len();
    let dim = n.next_power_of_two();
    let pad = |v: &[f64]| {
        let mut p = v.to_vec();
        p.resize(dim, 0.0);
        p
    };
    let bound = a.iter().chain(b).fold(1.0f64, |m, v| m.max(v.abs()));
    let ea = BlockEncoding::diagonal_loader_bounded(&pad(a), bound)?;
    let eb = BlockEncoding::diagonal_loader_bounded(&pad(b), bound)?;
    let diff = BlockEncoding::combine(&[ea, eb], &[1.0, -1.0])?;
    let amp = diff.block().mul_vec(&CVector::uniform(dim))?.norm();
    let amp = match noise {
        Some((dist, rng)) => (amp + dist.sample(rng)).abs(),
        None => amp,
    };
    Ok(amp * diff.alpha * (dim as f64).sqrt())
}

fn escape_step(traj: &Trajectory) -> Option<usize> {
    traj.states.iter().position(|s| check_domain(s).is_err())
}

/// Lyapunov exponent of `ẋ = g(x)` from two nearby initial conditions.
pub fn lyapunov_estimate(
    g: &FunctionFamily,
    x0: &[f64],
    x0_bar: &[f64],
    grid: &TimeGrid,
    cfg: &LyapunovConfig,
    solver: &TrajectorySolver,
) -> PhysicsResult<LyapunovReport> {
    grid.validate()?;
    if x0.len() != g.n || x0_bar.len() != g.n {
        return Err(PhysicsError::Input("initial conditions must match the system dimension".into()));
    }
    let d0 = norm2(&x0.iter().zip(x0_bar).map(|(a, b)| a - b).collect::<Vec<_>>());
    if !(d0 > 0.0) {
        return Err(PhysicsError::ZeroSeparation);
    }
    if let Some(want) = cfg.d0 {
        if (want - d0).abs() > 1e-9 * d0 {
            return Err(PhysicsError::Input(format!("configured d0 = {want} but the inputs are {d0} apart")));
        }
    }
    let per = (cfg.t_l / grid.step).round() as usize;
    if cfg.n_l == 0 || per == 0 || (per as f64 * grid.step - cfg.t_l).abs() > 1e-9 * cfg.t_l {
        return Err(PhysicsError::Grid(format!("T_L = {} is not a positive multiple of {}", cfg.t_l, grid.step)));
    }
    if per * cfg.n_l != grid.steps() {
        return Err(PhysicsError::Grid(format!("N_L·T_L = {} differs from the horizon {}", cfg.n_l as f64 * cfg.t_l, grid.horizon)));
    }
    let noise = cfg.shots.map(|s| Normal::new(0.0, 1.0 / s as f64)).transpose().map_err(|e| PhysicsError::Input(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut measure = |a: &[f64], b: &[f64]| separation(a, b, noise.as_ref().map(|d| (d, &mut rng)));

    let (ta, tb) = rayon::join(
        || simulate_ode(g, grid, x0, cfg.scheme, solver),
        || simulate_ode(g, grid, x0_bar, cfg.scheme, solver),
    );
    let (ta, tb) = (ta?, tb?);
    let escape = escape_step(&ta).into_iter().chain(escape_step(&tb)).min();
    let usable = match escape {
        Some(m) => (m.saturating_sub(1)) / per,
        None => cfg.n_l,
    };
    let mut d = Vec::with_capacity(usable);
    for k in 1..=usable {
        d.push(measure(&ta.states[k * per], &tb.states[k * per])?);
    }

    let sub = TimeGrid::new(cfg.t_l, grid.step, 1)?;
    let mut start_a = x0.to_vec();
    let mut start_b = x0_bar.to_vec();
    let mut d_ren = Vec::with_capacity(usable);
    for _ in 0..usable {
        let (sa, sb) = rayon::join(
            || simulate_ode(g, &sub, &start_a, cfg.scheme, solver),
            || simulate_ode(g, &sub, &start_b, cfg.scheme, solver),
        );
        let (ea, eb) = (sa?.states.pop().unwrap(), sb?.states.pop().unwrap());
        let dk = measure(&ea, &eb)?;
        d_ren.push(dk);
        start_b = ea.iter().zip(&eb).map(|(a, b)| a + (b - a) * d0 / dk).collect();
        start_a = ea;
    }

    let horizon = cfg.n_l as f64 * cfg.t_l;
    let rate = |v: &[f64]| v.iter().map(|dk| (dk / d0).ln()).sum::<f64>() / horizon;
    Ok(LyapunovReport {
        lambda: rate(&d),
        lambda_renormalized: rate(&d_ren),
        d0,
        d,
        d_renormalized: d_ren,
        k_range: (1, usable),
        partial: usable < cfg.n_l,
    })
}
