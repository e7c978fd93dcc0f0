//! Newton's method on block encodings.
//!
//! Every iterate is held as an encoding of `diag(x_t)` with `alpha = 1`. One
//! step builds the Jacobian and `diag F` from it, inverts the Jacobian by a
//! polynomial transform, applies it to the first column of `diag F · H`,
//! turns that column back into a diagonal and forms `diag(x_t − Δ_t)`.
//! Matrices are exact at every stage; the ledger records what a circuit
//! would have spent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::block_encoding::{BlockEncoding, BlockError, CostLedger};
use crate::matrix_core::{is_power_of_two, log2_exact, MatrixError};
use crate::nonlinear_system::{check_domain, default_iterations, norm2, FamilyKind, FunctionFamily, SystemError};
use crate::poly_transform::{fractional_power, invert};
use crate::spectral_probe::condition_number;
use crate::{CMatrix, CVector, C64};

pub const AMPLIFY_DELTA: f64 = 0.1;
/// Accuracy of the positive square root used by the shared-form `diag F`.
pub const POSITIVE_POWER_EPS: f64 = 1e-10;
const PROBE_EPS: f64 = 1e-3;
/// Slack on the measured `σ_min` before it is used as the inversion band.
const KAPPA_MARGIN: f64 = 1.02;

#[derive(Debug, Error)]
pub enum NewtonError {
    #[error(transparent)]
    Block(#[from] BlockError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("σ_min(J) = {sigma_min} is below 1/Lambda = {bound}")]
    Kappa { sigma_min: f64, bound: f64 },
    #[error("|∂f_{equation}| = {value} exceeds M_grad = {bound}")]
    GradientBound { equation: usize, value: f64, bound: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl From<MatrixError> for NewtonError {
    fn from(e: MatrixError) -> Self {
        NewtonError::Block(e.into())
    }
}

pub type NewtonResult<T> = Result<T, NewtonError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagFStrategy {
    /// One Hadamard test per equation; works for every family.
    GeneralDiagF,
    /// Shared-form `SumOfPowers` systems through a positive square root.
    SharedFormDiagF,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    #[serde(rename = "T")]
    pub t: usize,
    pub eps: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    #[serde(rename = "M_grad")]
    pub m_grad: f64,
    pub strategy: DiagFStrategy,
}

impl NewtonConfig {
    /// Defaults for `f`: `T = ⌈log₂log₂(1/eps)⌉ + 2`, `Λ = 50`, the family's
    /// gradient bound, and the shared-form strategy when it applies.
    pub fn for_family(f: &FunctionFamily, eps: f64) -> Self {
        let strategy = if shared_capable(f) { DiagFStrategy::SharedFormDiagF } else { DiagFStrategy::GeneralDiagF };
        Self { t: default_iterations(eps), eps, lambda: 50.0, m_grad: f.gradient_bound(), strategy }
    }

    pub fn validate(&self, f: &FunctionFamily) -> NewtonResult<()> {
        if self.t == 0 {
            return Err(NewtonError::Config("T must be at least 1".into()));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(NewtonError::Config(format!("eps must lie in (0, 1/2), got {}", self.eps)));
        }
        if !(self.lambda >= 1.0) || !(self.m_grad > 0.0) {
            return Err(NewtonError::Config("Lambda ≥ 1 and M_grad > 0 required".into()));
        }
        if self.strategy == DiagFStrategy::SharedFormDiagF && !shared_capable(f) {
            return Err(NewtonError::Config("SharedFormDiagF needs a shared-form SumOfPowers family".into()));
        }
        if !is_power_of_two(f.n) {
            return Err(MatrixError::NotPowerOfTwo(f.n).into());
        }
        Ok(())
    }
}

fn shared_capable(f: &FunctionFamily) -> bool {
    f.shared_form && f.kind == FamilyKind::SumOfPowers
}

/// Bookkeeping for one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub alpha: f64,
    pub eps: f64,
    pub cost: CostLedger,
    /// Ledger of the κ measurement, kept out of `cost`.
    pub probe_cost: CostLedger,
    pub kappa: f64,
    pub sigma_min: f64,
    /// `alpha` of the Jacobian encoding, i.e. the realized prefactor.
    pub jacobian_alpha: f64,
    /// `M_grad·n` on the shared path, `M_grad·n²` on the general one.
    pub nominal_prefactor: f64,
    pub diag_f_alpha: f64,
    pub requested_gamma: f64,
    pub applied_gamma: f64,
    pub delta_inf: f64,
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub enc: BlockEncoding,
    pub record: StepRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub steps: Vec<StepRecord>,
    /// `iterates[0] = x0`.
    pub iterates: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub x_final: Vec<f64>,
    pub residual: f64,
    pub postselect_prob: f64,
    pub state: Vec<f64>,
    pub total_cost: CostLedger,
    /// Iteration whose output left `[−1/2, 1/2]^n`; the run stops there.
    pub domain_escape: Option<usize>,
}

fn diag_values(enc: &BlockEncoding) -> Vec<f64> {
    enc.op.diagonal().iter().map(|z| z.re).collect()
}

fn power(enc: &BlockEncoding, p: usize) -> BlockResult<Option<BlockEncoding>> {
    let mut acc: Option<BlockEncoding> = None;
    for _ in 0..p {
        acc = Some(match acc {
            None => enc.clone(),
            Some(a) => BlockEncoding::product(&a, enc)?,
        });
    }
    Ok(acc)
}

type BlockResult<T> = Result<T, BlockError>;

fn zero_encoding(dim: usize) -> BlockEncoding {
    BlockEncoding { op: CMatrix::zeros(dim, dim), alpha: 1.0, ancillas: 0, eps: 0.0, cost: CostLedger::zero() }
}

fn scalar(v: f64) -> BlockEncoding {
    BlockEncoding {
        op: CMatrix::from_real(1, 1, &[v]),
        alpha: v.abs().max(f64::MIN_POSITIVE),
        ancillas: 1,
        eps: 0.0,
        cost: CostLedger::new(0.0, 0.0, 1.0),
    }
}

fn sum_nonempty(terms: Vec<BlockEncoding>, dim: usize) -> BlockResult<BlockEncoding> {
    if terms.is_empty() {
        return Ok(zero_encoding(dim));
    }
    let signs = vec![1.0; terms.len()];
    BlockEncoding::weighted_sum(&terms, &signs)
}

/// Hadamard test between `U_d (I ⊗ U_w)|0>` and `(I ⊗ U_w)|0>` for a diagonal
/// encoding `d` and nonnegative weights `w`, followed by a density-matrix
/// encoding of the test qubit. Returns a 1×1 encoding of `Σ_l w_l d_l`.
fn weighted_overlap_nonneg(d: &BlockEncoding, w: &[f64]) -> BlockResult<BlockEncoding> {
    let n = w.len();
    let z: f64 = w.iter().sum();
    let beta: Vec<f64> = d.op.diagonal().iter().map(|v| v.re / d.alpha).collect();
    // |Φ1>, |Φ2> on (flag, l), flag most significant
    let mut phi1 = vec![0.0; 2 * n];
    let mut phi2 = vec![0.0; 2 * n];
    for l in 0..n {
        let amp = (w[l] / z).sqrt();
        phi1[l] = beta[l] * amp;
        phi1[n + l] = (1.0 - beta[l] * beta[l]).max(0.0).sqrt() * amp;
        phi2[l] = amp;
    }
    // ½|00>(Φ1+Φ2) + ½|11>(Φ1−Φ2), kept qubit last
    let mut psi = vec![C64::new(0.0, 0.0); 2 * 2 * 2 * n];
    for (k, (a, b)) in phi1.iter().zip(&phi2).enumerate() {
        psi[k * 2] = C64::new(0.5 * (a + b), 0.0);
        psi[((2 * n) + k) * 2 + 1] = C64::new(0.5 * (a - b), 0.0);
    }
    let q = (n as f64).log2();
    let prep = d.cost.merge(&CostLedger::new(1.0, 1.0, q)).plus_depth(2.0);
    let rho = BlockEncoding::density_from_purification_with(&CVector::new(psi), 2, &prep)?;
    let half = BlockEncoding::identity(2).relabel(0.5);
    let centered = BlockEncoding::weighted_sum(&[rho, half], &[1.0, -1.0])?;
    let mut top = centered.sub_block(1)?;
    top.eps = d.eps / d.alpha * centered.alpha;
    Ok(top.relabel(2.0 * z * d.alpha))
}

/// 1×1 encoding of `Σ_l w_l d_l` for signed weights.
fn weighted_overlap(d: &BlockEncoding, w: &[f64]) -> BlockResult<BlockEncoding> {
    let pos: Vec<f64> = w.iter().map(|v| v.max(0.0)).collect();
    let neg: Vec<f64> = w.iter().map(|v| (-v).max(0.0)).collect();
    let mut terms = Vec::new();
    let mut signs = Vec::new();
    for (part, s) in [(pos, 1.0), (neg, -1.0)] {
        if part.iter().any(|v| *v > 0.0) {
            terms.push(weighted_overlap_nonneg(d, &part)?);
            signs.push(s);
        }
    }
    if terms.is_empty() {
        return Ok(zero_encoding(1));
    }
    BlockEncoding::weighted_sum(&terms, &signs)
}

/// Layer sums `L_i = Σ_k a_{jik} x_k` as 1×1 encodings.
fn layer_sums(f: &FunctionFamily, xt: &BlockEncoding, j: usize) -> BlockResult<Vec<BlockEncoding>> {
    f.a[j].iter().map(|row| weighted_overlap(xt, row)).collect()
}

fn shifted_layers(f: &FunctionFamily, xt: &BlockEncoding, j: usize) -> BlockResult<Vec<BlockEncoding>> {
    layer_sums(f, xt, j)?
        .into_iter()
        .zip(&f.b)
        .map(|(l, &b)| if b == 0.0 { Ok(l) } else { BlockEncoding::weighted_sum(&[l, scalar(b)], &[1.0, 1.0]) })
        .collect()
}

fn scalar_product(terms: &[BlockEncoding]) -> BlockResult<BlockEncoding> {
    let mut acc = scalar(1.0);
    for t in terms {
        acc = BlockEncoding::product(&acc, t)?;
    }
    Ok(acc)
}

/// 1×1 encoding of `f_j(x_t)` from Hadamard tests.
fn equation_value(f: &FunctionFamily, xt: &BlockEncoding, j: usize) -> BlockResult<BlockEncoding> {
    let mut terms = Vec::new();
    match f.kind {
        FamilyKind::SumOfPowers => {
            for (i, row) in f.a[j].iter().enumerate() {
                if row.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let xp = power(xt, i + 1)?.expect("positive power");
                terms.push(weighted_overlap(&xp, row)?);
            }
        }
        FamilyKind::PowerOfSums => {
            for (i, l) in layer_sums(f, xt, j)?.iter().enumerate() {
                terms.push(power(l, i + 1)?.expect("positive power"));
            }
        }
        FamilyKind::ProductOfAffinePowers => {
            let g = shifted_layers(f, xt, j)?;
            let factors: Vec<BlockEncoding> = g
                .iter()
                .enumerate()
                .map(|(i, gi)| power(gi, i + 1).map(|p| p.expect("positive power")))
                .collect::<BlockResult<_>>()?;
            terms.push(scalar_product(&factors)?);
        }
    }
    if let Some(&c) = f.c.get(j) {
        if c != 0.0 {
            terms.push(scalar(c));
        }
    }
    sum_nonempty(terms, 1)
}

fn current_point(f: &FunctionFamily, xt: &BlockEncoding) -> NewtonResult<Vec<f64>> {
    if xt.dim() != f.n || !xt.op.is_diagonal() {
        return Err(NewtonError::Config(format!("expected a diagonal encoding of dimension {}", f.n)));
    }
    let x = diag_values(xt);
    check_domain(&x)?;
    Ok(x)
}

/// Encoding of `diag(∇f_j(x_t))`; its `alpha` is the realized normalization,
/// close to `M_grad`.
pub fn encode_diag_gradient(f: &FunctionFamily, xt: &BlockEncoding, j: usize) -> NewtonResult<BlockEncoding> {
    let x = current_point(f, xt)?;
    if j >= f.n {
        return Err(SystemError::Equation(j).into());
    }
    let bound = f.gradient_bound();
    if let Some(v) = f.gradient_raw(j, &x).iter().find(|v| v.abs() > bound * (1.0 + 1e-12)) {
        return Err(NewtonError::GradientBound { equation: j, value: v.abs(), bound });
    }
    let n = f.n;
    let loader = |i: usize, w: f64| -> BlockResult<Option<BlockEncoding>> {
        let v: Vec<f64> = f.a[j][i].iter().map(|a| a * (i + 1) as f64 * w).collect();
        let m = v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if m == 0.0 {
            return Ok(None);
        }
        Ok(Some(BlockEncoding::diagonal_loader_bounded(&v, m)?))
    };
    let mut terms = Vec::new();
    match f.kind {
        FamilyKind::SumOfPowers => {
            for i in 0..f.k {
                if let Some(l) = loader(i, 1.0)? {
                    terms.push(match power(xt, i)? {
                        Some(xp) => BlockEncoding::product(&l, &xp)?,
                        None => l,
                    });
                }
            }
        }
        FamilyKind::PowerOfSums => {
            let sums = layer_sums(f, xt, j)?;
            for (i, s) in sums.iter().enumerate() {
                if let Some(l) = loader(i, 1.0)? {
                    terms.push(match power(s, i)? {
                        Some(w) => BlockEncoding::tensor(&l, &w)?,
                        None => l,
                    });
                }
            }
        }
        FamilyKind::ProductOfAffinePowers => {
            let g = shifted_layers(f, xt, j)?;
            for i in 0..f.k {
                let Some(l) = loader(i, 1.0)? else { continue };
                let mut factors = Vec::new();
                if let Some(p) = power(&g[i], i)? {
                    factors.push(p);
                }
                for (m, gm) in g.iter().enumerate().filter(|(m, _)| *m != i) {
                    factors.push(power(gm, m + 1)?.expect("positive power"));
                }
                terms.push(BlockEncoding::tensor(&l, &scalar_product(&factors)?)?);
            }
        }
    }
    Ok(sum_nonempty(terms, n)?)
}

/// Jacobian encoding; the shared-form path is used when it applies.
pub fn encode_jacobian(f: &FunctionFamily, xt: &BlockEncoding) -> NewtonResult<BlockEncoding> {
    if shared_capable(f) {
        encode_jacobian_shared(f, xt)
    } else {
        encode_jacobian_general(f, xt)
    }
}

/// Projector-gradient tensor sum, SWAP, Hadamard contraction and transpose.
/// The result has `op = J` and `alpha = n · Σ_j alpha(∇f_j)`.
pub fn encode_jacobian_general(f: &FunctionFamily, xt: &BlockEncoding) -> NewtonResult<BlockEncoding> {
    current_point(f, xt)?;
    let n = f.n;
    let q = log2_exact(n)?;
    let blocks: Vec<BlockEncoding> = (0..n)
        .map(|j| -> NewtonResult<BlockEncoding> {
            let g = encode_diag_gradient(f, xt, j)?;
            Ok(BlockEncoding::tensor(&BlockEncoding::projector(j, n)?, &g)?)
        })
        .collect::<NewtonResult<_>>()?;
    let d = BlockEncoding::weighted_sum(&blocks, &vec![1.0; n])?;
    let ds = BlockEncoding::product(&d, &BlockEncoding::swap(n))?;
    let hi = BlockEncoding::tensor(&BlockEncoding::hadamard(q), &BlockEncoding::identity(n))?;
    let conj = BlockEncoding::product(&hi, &BlockEncoding::product(&ds, &hi)?)?;
    Ok(conj.sub_block(n)?.transpose().relabel(n as f64))
}

/// `J = Σ_i A_i · diag(i x^{i−1})` from coefficient-table loaders, for
/// shared-form `SumOfPowers` systems. `alpha ≈ M_grad·n`.
pub fn encode_jacobian_shared(f: &FunctionFamily, xt: &BlockEncoding) -> NewtonResult<BlockEncoding> {
    if !shared_capable(f) {
        return Err(NewtonError::Config("shared-form Jacobian needs a shared-form SumOfPowers family".into()));
    }
    current_point(f, xt)?;
    let n = f.n;
    let mut terms = Vec::new();
    for i in 0..f.k {
        let scale = (i + 1) as f64;
        let rows: Vec<Vec<f64>> = (0..n).map(|j| f.a[j][i].iter().map(|a| a * scale).collect()).collect();
        let a = CMatrix::from_real_rows(&rows);
        if a.max_abs() == 0.0 {
            continue;
        }
        let l = BlockEncoding::matrix_loader(&a)?;
        terms.push(match power(xt, i)? {
            Some(xp) => BlockEncoding::product(&l, &xp)?,
            None => l,
        });
    }
    Ok(sum_nonempty(terms, n)?)
}

fn check_values(f: &FunctionFamily, xt: &BlockEncoding) -> NewtonResult<()> {
    let x = current_point(f, xt)?;
    f.eval_bounded(&x)?;
    Ok(())
}

/// Encoding with `op = diag F(x_t)`.
pub fn encode_diag_f(f: &FunctionFamily, xt: &BlockEncoding, strategy: DiagFStrategy) -> NewtonResult<BlockEncoding> {
    check_values(f, xt)?;
    match strategy {
        DiagFStrategy::GeneralDiagF => diag_f_general(f, xt),
        DiagFStrategy::SharedFormDiagF => diag_f_shared(f, xt),
    }
}

fn diag_f_general(f: &FunctionFamily, xt: &BlockEncoding) -> NewtonResult<BlockEncoding> {
    let n = f.n;
    let blocks: Vec<BlockEncoding> = (0..n)
        .map(|j| -> NewtonResult<BlockEncoding> {
            let v = equation_value(f, xt, j)?;
            Ok(BlockEncoding::tensor(&BlockEncoding::projector(j, n)?, &v)?)
        })
        .collect::<NewtonResult<_>>()?;
    Ok(BlockEncoding::weighted_sum(&blocks, &vec![1.0; n])?)
}

/// `diag_k Σ_l w_kl · b_l²` from the purification
/// `Σ_{k,l} √(w_kl/Z) |k>_copy |l> ⊗ (b_l |0>|k> + √(1−b_l²) |1>|k>)`.
fn row_weighted_density(w: &[Vec<f64>], sq: &BlockEncoding, prep: &CostLedger) -> BlockResult<(BlockEncoding, f64)> {
    let n = w.len();
    let z: f64 = w.iter().flatten().sum();
    let b: Vec<f64> = sq.op.diagonal().iter().map(|v| v.re / sq.alpha).collect();
    let dim_b = 2 * n;
    let mut phi = vec![C64::new(0.0, 0.0); n * n * dim_b];
    for k in 0..n {
        for l in 0..n {
            let amp = (w[k][l] / z).sqrt();
            if amp == 0.0 {
                continue;
            }
            let a = k * n + l;
            phi[a * dim_b + k] = C64::new(amp * b[l], 0.0);
            phi[a * dim_b + n + k] = C64::new(amp * (1.0 - b[l] * b[l]).max(0.0).sqrt(), 0.0);
        }
    }
    let rho = BlockEncoding::density_from_purification_with(&CVector::new(phi), dim_b, prep)?;
    let mut sigma = rho.sub_block(n)?;
    sigma.eps = 2.0 * sq.eps / sq.alpha;
    Ok((sigma, z))
}

fn diag_f_shared(f: &FunctionFamily, xt: &BlockEncoding) -> NewtonResult<BlockEncoding> {
    if !shared_capable(f) {
        return Err(NewtonError::Config("SharedFormDiagF needs a shared-form SumOfPowers family".into()));
    }
    let n = f.n;
    let qn = (n as f64).log2();
    let zero = zero_encoding(n);
    let mut terms = Vec::new();
    let mut signs = Vec::new();
    for i in 0..f.k {
        let xp = power(xt, i + 1)?.expect("positive power");
        let ymax = diag_values(&xp).iter().fold(0.0f64, |m, v| m.max(v.abs())) / xp.alpha;
        let kappa = (2.0 / (1.0 - ymax)).max(4.0);
        let half_shift = |d: &BlockEncoding| -> NewtonResult<BlockEncoding> {
            let o = BlockEncoding::lin_combo(&[BlockEncoding::identity(n), d.clone()], &[1.0, 1.0])?;
            Ok(fractional_power(&o, 0.5, POSITIVE_POWER_EPS, kappa)?)
        };
        let sq1 = half_shift(&xp)?;
        let sq0 = half_shift(&zero)?;
        for sign in [1.0, -1.0] {
            let w: Vec<Vec<f64>> = (0..n).map(|j| f.a[j][i].iter().map(|a| (sign * a).max(0.0)).collect()).collect();
            if w.iter().flatten().all(|v| *v == 0.0) {
                continue;
            }
            let state_prep = CostLedger::new(1.0, 1.0, 2.0 * qn).plus_depth(qn);
            let (s1, z) = row_weighted_density(&w, &sq1, &sq1.cost.merge(&state_prep))?;
            let (s0, _) = row_weighted_density(&w, &sq0, &sq0.cost.merge(&state_prep))?;
            let diff = BlockEncoding::lin_combo(&[s1, s0], &[1.0, -1.0])?;
            // (σ1 − σ0)/2 = s² Σ_l w_kl y_l / (16 Z), y = x^i / alpha^i
            let s_sq = (sq1.alpha * sq0.alpha).recip();
            terms.push(diff.relabel(16.0 * z * xp.alpha / s_sq));
            signs.push(sign);
        }
    }
    if f.c.iter().any(|c| *c != 0.0) {
        let m = f.c.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        terms.push(BlockEncoding::diagonal_loader_bounded(&f.c, m)?);
        signs.push(1.0);
    }
    if terms.is_empty() {
        return Ok(zero);
    }
    Ok(BlockEncoding::weighted_sum(&terms, &signs)?)
}

/// Which linear map turns `F` into the update.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Update {
    Newton,
    Damped(f64),
}

fn diag_to_unit_alpha(enc: &BlockEncoding, eps: f64) -> NewtonResult<(BlockEncoding, f64, f64)> {
    if enc.alpha <= 1.0 {
        if enc.alpha < 1.0 {
            return Ok((enc.scale_down(1.0 / enc.alpha)?, 1.0, 1.0));
        }
        return Ok((enc.clone(), 1.0, 1.0));
    }
    let a = enc.amplify_to_unit(enc.alpha, AMPLIFY_DELTA, eps)?;
    Ok((a.enc, a.requested_gamma, a.applied_gamma))
}

fn step_with(f: &FunctionFamily, xt: &BlockEncoding, cfg: &NewtonConfig, update: Update) -> NewtonResult<StepOutcome> {
    cfg.validate(f)?;
    let n = f.n;
    let q = log2_exact(n)?;
    let mut xt = xt.clone();
    xt.eps = 0.0;

    let jac = encode_jacobian(f, &xt)?;
    let (target, pre) = match update {
        Update::Newton => (jac.clone(), None),
        Update::Damped(lambda) => {
            let jt = jac.adjoint();
            let gram = BlockEncoding::product(&jt, &jac)?;
            let g = if lambda > 0.0 {
                BlockEncoding::weighted_sum(&[gram, BlockEncoding::identity(n).relabel(lambda)], &[1.0, 1.0])?
            } else {
                gram
            };
            (g, Some(jt))
        }
    };
    let cond = condition_number(&target, PROBE_EPS, None)?;
    let sigma_j = match update {
        Update::Newton => cond.sigma_min * target.alpha,
        Update::Damped(_) => (cond.sigma_min * target.alpha).sqrt(),
    };
    if update == Update::Newton && sigma_j < 1.0 / cfg.lambda {
        return Err(NewtonError::Kappa { sigma_min: sigma_j, bound: 1.0 / cfg.lambda });
    }
    let kappa = (KAPPA_MARGIN / cond.sigma_min).max(1.0);
    let inv = invert(&target, kappa, cfg.eps)?;

    let fenc = encode_diag_f(f, &xt, cfg.strategy)?;
    let diag_f_alpha = fenc.alpha;
    let (famp, _, _) = diag_to_unit_alpha(&fenc, cfg.eps)?;
    let fh = BlockEncoding::product(&famp, &BlockEncoding::hadamard(q))?;
    let rhs = match &pre {
        Some(jt) => BlockEncoding::product(jt, &fh)?,
        None => fh,
    };
    let chain = BlockEncoding::product(&inv, &rhs)?;

    // first column of the block, completed to a unit state
    let col = chain.op.column(0);
    let v: Vec<f64> = col.entries().iter().map(|z| z.re / chain.alpha).collect();
    let vn = norm2(&v);
    if vn > 1.0 + 1e-9 {
        return Err(BlockError::NormTooLarge(vn).into());
    }
    let mut psi: Vec<C64> = v.iter().map(|x| C64::new(*x, 0.0)).collect();
    psi.resize(2 * n, C64::new(0.0, 0.0));
    psi[n] = C64::new((1.0 - vn * vn).max(0.0).sqrt(), 0.0);
    let mut dv = BlockEncoding::from_state_diag(&CVector::new(psi).normalized())?.sub_block(n)?;
    dv.cost = chain.cost.merge(&dv.cost);
    dv.eps = chain.eps / chain.alpha;
    dv.ancillas += chain.ancillas;

    // v = scale · d with d = J⁻¹F or (JᵀJ + λI)⁻¹JᵀF
    let (alpha_core, alpha_pre) = match &pre {
        Some(jt) => (target.alpha, jt.alpha),
        None => (target.alpha, 1.0),
    };
    let s = 1.0 / inv.alpha;
    let scale = alpha_core * s / (2.0 * kappa * (n as f64).sqrt() * alpha_pre * famp.alpha);
    let gamma = 1.0 / scale;
    let amp = if gamma > 1.0 {
        dv.amplify_to_unit(gamma, AMPLIFY_DELTA, cfg.eps)?
    } else {
        crate::block_encoding::Amplified { enc: dv.clone(), requested_gamma: gamma, applied_gamma: 1.0 }
    };
    let delta = amp.enc.relabel(gamma);
    let delta_inf = diag_values(&delta).iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let comb = BlockEncoding::combine(&[xt.clone(), delta], &[1.0, -1.0])?;
    let (mut out, _, _) = diag_to_unit_alpha(&comb, cfg.eps)?;
    if (out.alpha - 1.0).abs() < 1e-9 {
        out.alpha = 1.0;
    }

    let nominal = match shared_capable(f) {
        true => cfg.m_grad * n as f64,
        false => cfg.m_grad * (n * n) as f64,
    };
    if (jac.alpha / nominal - 1.0).abs() > 0.5 {
        log::debug!("Jacobian normalization {} differs from nominal {}", jac.alpha, nominal);
    }
    let record = StepRecord {
        alpha: out.alpha,
        eps: out.eps,
        cost: out.cost,
        probe_cost: cond.cost,
        kappa,
        sigma_min: sigma_j,
        jacobian_alpha: jac.alpha,
        nominal_prefactor: nominal,
        diag_f_alpha,
        requested_gamma: amp.requested_gamma,
        applied_gamma: amp.applied_gamma,
        delta_inf,
    };
    Ok(StepOutcome { enc: out, record })
}

/// One Newton step `diag(x_t) ↦ diag(x_t − J⁻¹F)`.
pub fn newton_step(f: &FunctionFamily, xt: &BlockEncoding, cfg: &NewtonConfig) -> NewtonResult<StepOutcome> {
    step_with(f, xt, cfg, Update::Newton)
}

/// One Levenberg-Marquardt step `diag(x_t) ↦ diag(x_t + Δ)` with
/// `(JᵀJ + λI)Δ = −JᵀF`.
pub fn lm_step(f: &FunctionFamily, xt: &BlockEncoding, lambda: f64, cfg: &NewtonConfig) -> NewtonResult<StepOutcome> {
    if !(lambda >= 0.0) {
        return Err(NewtonError::Config(format!("damping must be nonnegative, got {lambda}")));
    }
    step_with(f, xt, cfg, Update::Damped(lambda))
}

/// `diag(x0)` at `alpha = 1`, built from a state-preparation unitary for
/// `x0/‖x0‖` with the norm moved into `alpha` and then removed.
pub fn initial_encoding(x0: &[f64]) -> NewtonResult<BlockEncoding> {
    check_domain(x0)?;
    let nrm = norm2(x0);
    if nrm == 0.0 {
        return Ok(BlockEncoding::diagonal_loader_bounded(x0, 1.0)?);
    }
    let psi = CVector::from_real(&x0.iter().map(|v| v / nrm).collect::<Vec<_>>());
    let enc = BlockEncoding::from_state_diag(&psi.normalized())?.relabel(nrm);
    let (mut out, _, _) = diag_to_unit_alpha(&enc, 0.25)?;
    out.eps = 0.0;
    out.alpha = 1.0;
    Ok(out)
}

/// Ledger of a single step started from a freshly loaded `diag(x)`.
pub fn iteration_cost(f: &FunctionFamily, x: &[f64], cfg: &NewtonConfig) -> NewtonResult<CostLedger> {
    let xt = BlockEncoding::diagonal_loader_bounded(x, 1.0)?;
    Ok(newton_step(f, &xt, cfg)?.enc.cost)
}

fn run(f: &FunctionFamily, x0: &[f64], cfg: &NewtonConfig, update: Update) -> NewtonResult<SolveReport> {
    cfg.validate(f)?;
    if x0.len() != f.n {
        return Err(NewtonError::Config(format!("x0 has {} entries, expected {}", x0.len(), f.n)));
    }
    let mut enc = initial_encoding(x0)?;
    let mut iterates = vec![x0.to_vec()];
    let mut residuals = vec![norm2(&f.eval_raw(x0))];
    let mut steps = Vec::new();
    let mut escape = None;
    for it in 0..cfg.t {
        let out = step_with(f, &enc, cfg, update)?;
        let x = diag_values(&out.enc);
        residuals.push(norm2(&f.eval_raw(&x)));
        iterates.push(x.clone());
        steps.push(out.record);
        enc = out.enc;
        if check_domain(&x).is_err() {
            escape = Some(it + 1);
            log::warn!("iterate {} left the domain; stopping", it + 1);
            break;
        }
    }
    let x_final = iterates.last().unwrap().clone();
    // apply diag(x_T) to the uniform state and post-select the ancillas
    let u = CVector::uniform(f.n);
    let good = enc.block().mul_vec(&u)?;
    let postselect_prob = good.norm().powi(2);
    let state = if good.norm() > 0.0 { good.normalized().real_parts() } else { vec![0.0; f.n] };
    Ok(SolveReport {
        residual: *residuals.last().unwrap(),
        steps,
        iterates,
        residuals,
        x_final,
        postselect_prob,
        state,
        total_cost: enc.cost,
        domain_escape: escape,
    })
}

/// Newton iterations from `x0`.
pub fn solve(f: &FunctionFamily, x0: &[f64], cfg: &NewtonConfig) -> NewtonResult<SolveReport> {
    run(f, x0, cfg, Update::Newton)
}

/// Levenberg-Marquardt iterations from `x0` with damping `lambda`.
pub fn solve_lm(f: &FunctionFamily, x0: &[f64], lambda: f64, cfg: &NewtonConfig) -> NewtonResult<SolveReport> {
    if !(lambda >= 0.0) {
        return Err(NewtonError::Config(format!("damping must be nonnegative, got {lambda}")));
    }
    run(f, x0, cfg, Update::Damped(lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinear_system::{classical_lm, classical_newton, random_initial, random_shared_form};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn loaded(x: &[f64]) -> BlockEncoding {
        BlockEncoding::diagonal_loader_bounded(x, 1.0).unwrap()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    fn dense_affine(n: usize, rng: &mut ChaCha8Rng) -> (FunctionFamily, Vec<f64>) {
        let a: Vec<Vec<f64>> = (0..n)
            .map(|j| (0..n).map(|k| rng.gen_range(-0.2..0.2) / n as f64 + if j == k { 0.4 } else { 0.0 }).collect())
            .collect();
        let root: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let rhs: Vec<f64> = a.iter().map(|r| r.iter().zip(&root).map(|(p, q)| p * q).sum()).collect();
        (FunctionFamily::affine(&a, &rhs).unwrap(), root)
    }

    #[test]
    fn gradient_encodings() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (f, _) = dense_affine(4, &mut rng);
        let x = [0.1, -0.2, 0.05, 0.3];
        for j in 0..4 {
            let g = encode_diag_gradient(&f, &loaded(&x), j).unwrap();
            assert!(diag_values(&g).iter().zip(&f.a[j][0]).all(|(p, q)| (p - q).abs() < 1e-14));
            assert!(g.alpha >= f.gradient_bound() - 1e-12 || g.alpha > 0.0);
        }
        let (s, _) = random_shared_form(8, &mut rng);
        let x = random_initial(8, &mut rng);
        for j in 0..8 {
            let g = encode_diag_gradient(&s, &loaded(&x), j).unwrap();
            assert!(max_diff(&diag_values(&g), &s.gradient(&x, j).unwrap()) < 1e-13);
            assert!(g.check_norm().is_ok());
        }
        // at x = 0 only the linear layer survives
        let g = encode_diag_gradient(&s, &loaded(&[0.0; 8]), 2).unwrap();
        assert!(max_diff(&diag_values(&g), &s.a[2][0]) < 1e-15);
    }

    #[test]
    fn gradient_encodings_other_families() {
        use crate::nonlinear_system::tests::random_family;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for kind in [FamilyKind::PowerOfSums, FamilyKind::ProductOfAffinePowers] {
            let f = random_family(kind, 4, 3, &mut rng);
            let x = random_initial(4, &mut rng);
            for j in 0..4 {
                let g = encode_diag_gradient(&f, &loaded(&x), j).unwrap();
                assert!(max_diff(&diag_values(&g), &f.gradient(&x, j).unwrap()) < 1e-12, "{kind:?}");
            }
        }
    }

    #[test]
    fn jacobian_paths_agree_with_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (f, _) = dense_affine(4, &mut rng);
        let x = [0.2, 0.1, -0.1, 0.0];
        let jg = encode_jacobian_general(&f, &loaded(&x)).unwrap();
        let a = f.jacobian(&x).unwrap();
        assert!(jg.op.max_abs_diff(&a) < 1e-13);
        assert!(jg.check_norm().is_ok());
        let (s, _) = random_shared_form(8, &mut rng);
        let x = random_initial(8, &mut rng);
        let js = encode_jacobian_shared(&s, &loaded(&x)).unwrap();
        let jg = encode_jacobian_general(&s, &loaded(&x)).unwrap();
        let oracle = s.jacobian(&x).unwrap();
        assert!(js.op.max_abs_diff(&oracle) < 1e-12);
        assert!(jg.op.max_abs_diff(&oracle) < 1e-9);
        assert!(js.check_norm().is_ok() && jg.check_norm().is_ok());
        // general path carries an extra factor ~ n in its normalization
        assert!(jg.alpha > js.alpha);
        let jt = encode_jacobian_general(&s, &loaded(&x)).unwrap().transpose();
        assert!(jt.op.max_abs_diff(&oracle.transpose()) < 1e-9);
    }

    #[test]
    fn diag_f_examples() {
        let id = FunctionFamily::affine(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.0, 0.0]).unwrap();
        let x = [0.25, -0.125];
        for s in [DiagFStrategy::GeneralDiagF, DiagFStrategy::SharedFormDiagF] {
            let d = encode_diag_f(&id, &loaded(&x), s).unwrap();
            assert!(max_diff(&diag_values(&d), &x) < 1e-9, "{s:?}");
            assert!(d.op.is_diagonal());
        }
        let spring = FunctionFamily::affine(&[vec![-2.0, 2.0], vec![2.0, -2.0]], &[0.0, 0.0]).unwrap();
        let d = encode_diag_f(&spring, &loaded(&[0.1, -0.1]), DiagFStrategy::GeneralDiagF).unwrap();
        assert!(max_diff(&diag_values(&d), &[-0.4, 0.4]) < 1e-14);
    }

    #[test]
    fn diag_f_strategies_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let (f, _) = random_shared_form(8, &mut rng);
            let x = random_initial(8, &mut rng);
            let g = encode_diag_f(&f, &loaded(&x), DiagFStrategy::GeneralDiagF).unwrap();
            let s = encode_diag_f(&f, &loaded(&x), DiagFStrategy::SharedFormDiagF).unwrap();
            let oracle = f.eval(&x).unwrap();
            assert!(max_diff(&diag_values(&g), &oracle) < 1e-12);
            assert!(max_diff(&diag_values(&s), &oracle) < 1e-9);
            assert!(s.eps >= max_diff(&diag_values(&s), &oracle));
        }
        let ratio = |n: usize, rng: &mut ChaCha8Rng| {
            let (f, _) = random_shared_form(n, rng);
            let x = random_initial(n, rng);
            let g = encode_diag_f(&f, &loaded(&x), DiagFStrategy::GeneralDiagF).unwrap();
            let s = encode_diag_f(&f, &loaded(&x), DiagFStrategy::SharedFormDiagF).unwrap();
            g.cost.total() / s.cost.total()
        };
        let growth = ratio(16, &mut rng) / ratio(4, &mut rng);
        assert!(growth > 2.0 && growth < 8.0, "{growth}");
    }

    #[test]
    fn diag_f_general_other_families() {
        use crate::nonlinear_system::tests::random_family;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for kind in [FamilyKind::PowerOfSums, FamilyKind::ProductOfAffinePowers] {
            let mut f = random_family(kind, 4, 2, &mut rng);
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.2..0.2)).collect();
            let v = f.eval_raw(&x);
            let m = v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            if m > 0.5 {
                f.a.iter_mut().flatten().flatten().for_each(|a| *a *= 0.25);
                f.b.iter_mut().for_each(|b| *b *= 0.25);
            }
            let Ok(oracle) = f.eval_bounded(&x) else { continue };
            let d = encode_diag_f(&f, &loaded(&x), DiagFStrategy::GeneralDiagF).unwrap();
            assert!(max_diff(&diag_values(&d), &oracle) < 1e-12, "{kind:?}");
        }
    }

    #[test]
    fn affine_step_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (f, root) = dense_affine(4, &mut rng);
        let cfg = NewtonConfig::for_family(&f, 1e-9);
        let out = newton_step(&f, &loaded(&[0.0; 4]), &cfg).unwrap();
        assert!(max_diff(&diag_values(&out.enc), &root) < 1e-8);
        assert_eq!(out.enc.alpha, 1.0);
    }

    #[test]
    fn steps_match_classical_newton() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let (f, _) = random_shared_form(4, &mut rng);
            let x0 = random_initial(4, &mut rng);
            let cfg = NewtonConfig::for_family(&f, 1e-6);
            let mut enc = initial_encoding(&x0).unwrap();
            for _ in 0..4 {
                let x = diag_values(&enc);
                let want = classical_newton(&f, &x, 1).unwrap().iterates[1].clone();
                let out = newton_step(&f, &enc, &cfg).unwrap();
                let got = diag_values(&out.enc);
                let dev = max_diff(&got, &want);
                assert!(dev <= out.record.eps, "{dev} > {}", out.record.eps);
                assert!(dev < 1e-8, "{dev}");
                enc = out.enc;
            }
        }
    }

    #[test]
    fn solve_linear_and_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (f, root) = dense_affine(4, &mut rng);
        let mut cfg = NewtonConfig::for_family(&f, 1e-9);
        cfg.t = 2;
        let r = solve(&f, &[0.0; 4], &cfg).unwrap();
        assert!(r.residual <= 1e-8, "{}", r.residual);
        assert!(max_diff(&r.x_final, &root) < 1e-8);
        let xx: f64 = r.x_final.iter().map(|v| v * v).sum();
        assert!((r.postselect_prob * 4.0 - xx).abs() < 1e-10);
        assert!((norm2(&r.state) - 1.0).abs() < 1e-12);

        cfg.strategy = DiagFStrategy::GeneralDiagF;
        let r = solve(&f, &root, &cfg).unwrap();
        for it in &r.iterates {
            assert!(max_diff(it, &root) < 1e-12);
        }
    }

    #[test]
    fn solve_shared_form_fidelity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (f, _) = random_shared_form(8, &mut rng);
        let x0 = random_initial(8, &mut rng);
        let cfg = NewtonConfig::for_family(&f, 1e-6);
        let r = solve(&f, &x0, &cfg).unwrap();
        let c = classical_newton(&f, &x0, cfg.t).unwrap();
        let lim = c.iterates.last().unwrap();
        let fid: f64 = r.state.iter().zip(lim).map(|(a, b)| a * b).sum::<f64>() / norm2(lim);
        assert!(fid >= 1.0 - 1e-6, "{fid}");
        assert!(r.residual < 1e-8);
        assert_eq!(r.steps.len(), cfg.t);
    }

    #[test]
    fn lm_matches_classical() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (f, _) = random_shared_form(4, &mut rng);
        let x0 = random_initial(4, &mut rng);
        let mut cfg = NewtonConfig::for_family(&f, 1e-9);
        cfg.t = 3;
        let r = solve_lm(&f, &x0, 0.05, &cfg).unwrap();
        let c = classical_lm(&f, &x0, 0.05, 3).unwrap();
        for (a, b) in r.iterates.iter().zip(&c.iterates) {
            assert!(max_diff(a, b) < 1e-7);
        }
        // λ = 0 reproduces Newton
        let r0 = solve_lm(&f, &x0, 0.0, &cfg).unwrap();
        let n = solve(&f, &x0, &cfg).unwrap();
        assert!(max_diff(&r0.x_final, &n.x_final) < 1e-7);
    }

    #[test]
    fn lm_large_damping_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (f, _) = random_shared_form(4, &mut rng);
        let x0 = random_initial(4, &mut rng);
        let cfg = NewtonConfig::for_family(&f, 1e-9);
        let lambda = 1e3;
        let out = lm_step(&f, &loaded(&x0), lambda, &cfg).unwrap();
        let step = max_diff(&diag_values(&out.enc), &x0);
        let j = f.jacobian_rows(&x0);
        let fx = f.eval_raw(&x0);
        let g: Vec<f64> = (0..4).map(|k| (0..4).map(|q| j[q][k] * fx[q]).sum()).collect();
        assert!(step <= norm2(&g) / lambda * 1.0001);
    }

    #[test]
    fn rejects_bad_configs() {
        use crate::nonlinear_system::tests::random_family;
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let f = random_family(FamilyKind::PowerOfSums, 4, 2, &mut rng);
        let mut cfg = NewtonConfig::for_family(&f, 1e-6);
        assert_eq!(cfg.strategy, DiagFStrategy::GeneralDiagF);
        cfg.strategy = DiagFStrategy::SharedFormDiagF;
        assert!(matches!(cfg.validate(&f), Err(NewtonError::Config(_))));
        cfg.strategy = DiagFStrategy::GeneralDiagF;
        cfg.t = 0;
        assert!(cfg.validate(&f).is_err());
        let (s, _) = random_shared_form(4, &mut rng);
        let mut cfg = NewtonConfig::for_family(&s, 1e-6);
        cfg.lambda = 1.0;
        assert!(matches!(newton_step(&s, &loaded(&[0.0; 4]), &cfg), Err(NewtonError::Kappa { .. })));
    }
}
