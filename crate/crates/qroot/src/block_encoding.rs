//! Block-encoding algebra with explicit operators and resource ledgers.
//!
//! A [`BlockEncoding`] stores the encoded operator `op` and its
//! subnormalization `alpha`; the unitary would carry `op/alpha` in its top-left
//! block. `eps` bounds the error on `op` in the usual `(alpha, a, eps)` sense,
//! i.e. `‖op_true − op‖ ≤ eps`.

use std::ops::Add;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix_core::{
    hadamard_power, hermitian_function, log2_exact, qft, spectral_norm, swap_operator, MatrixError,
};
use crate::{CMatrix, CVector, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlockError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("state is not normalized: norm {0}")]
    NotNormalized(f64),
    #[error("scale factor must exceed 1, got {0}")]
    InvalidScale(f64),
    #[error("amplification margin violated: max singular value {value} exceeds (1-delta)/gamma = {bound}")]
    AmplifyMargin { value: f64, bound: f64 },
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("empty combination")]
    Empty,
    #[error("encoded block has norm {0} > 1")]
    NormTooLarge(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type BlockResult<T> = Result<T, BlockError>;

/// Additive model of quantum resources.
///
/// Counts are kept as `f64` because nested amplification multiplies them far
/// past the `u64` range in long Newton runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub base_unitary_uses: f64,
    pub state_prep_queries: f64,
    pub modeled_depth: f64,
    pub qsvt_degree_total: f64,
}

impl CostLedger {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn new(base_unitary_uses: f64, state_prep_queries: f64, modeled_depth: f64) -> Self {
        Self { base_unitary_uses, state_prep_queries, modeled_depth, qsvt_degree_total: 0.0 }
    }

    /// Componentwise sum.
    pub fn merge(&self, other: &Self) -> Self {
        Self {
            base_unitary_uses: self.base_unitary_uses + other.base_unitary_uses,
            state_prep_queries: self.state_prep_queries + other.state_prep_queries,
            modeled_depth: self.modeled_depth + other.modeled_depth,
            qsvt_degree_total: self.qsvt_degree_total + other.qsvt_degree_total,
        }
    }

    /// The ledger of `k` sequential repetitions.
    pub fn repeated(&self, k: f64) -> Self {
        Self {
            base_unitary_uses: self.base_unitary_uses * k,
            state_prep_queries: self.state_prep_queries * k,
            modeled_depth: self.modeled_depth * k,
            qsvt_degree_total: self.qsvt_degree_total * k,
        }
    }

    pub fn plus_depth(mut self, d: f64) -> Self {
        self.modeled_depth += d;
        self
    }

    /// Scalar cost used by scaling fits.
    pub fn total(&self) -> f64 {
        self.modeled_depth
    }
}

impl Add for CostLedger {
    type Output = CostLedger;
    fn add(self, rhs: CostLedger) -> CostLedger {
        self.merge(&rhs)
    }
}

impl std::iter::Sum for CostLedger {
    fn sum<I: Iterator<Item = CostLedger>>(iter: I) -> CostLedger {
        iter.fold(CostLedger::zero(), |a, b| a.merge(&b))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockEncoding {
    pub op: CMatrix,
    pub alpha: f64,
    pub ancillas: usize,
    pub eps: f64,
    pub cost: CostLedger,
}

/// Result of [`BlockEncoding::amplify_to_unit`].
#[derive(Clone, Debug)]
pub struct Amplified {
    pub enc: BlockEncoding,
    pub requested_gamma: f64,
    pub applied_gamma: f64,
}

impl Amplified {
    pub fn shortfall(&self) -> f64 {
        self.requested_gamma / self.applied_gamma
    }
}

fn log2f(n: usize) -> f64 {
    (n.max(1) as f64).log2()
}

fn ceil_log2(m: usize) -> usize {
    if m <= 1 {
        0
    } else {
        (usize::BITS - (m - 1).leading_zeros()) as usize
    }
}

impl BlockEncoding {
    /// Wraps an explicit operator. Only the cheap necessary condition
    /// `max|op_ij| ≤ alpha` is checked here; see [`BlockEncoding::check_norm`].
    pub fn new(op: CMatrix, alpha: f64, ancillas: usize, eps: f64, cost: CostLedger) -> BlockResult<Self> {
        if !op.is_finite() {
            return Err(MatrixError::NonFinite.into());
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(BlockError::InvalidArgument(format!("alpha must be positive, got {alpha}")));
        }
        if !(eps >= 0.0) {
            return Err(BlockError::InvalidArgument(format!("eps must be nonnegative, got {eps}")));
        }
        let m = op.max_abs();
        if m > alpha * (1.0 + 1e-9) + 1e-12 {
            return Err(BlockError::NormTooLarge(m / alpha));
        }
        Ok(Self { op, alpha, ancillas, eps, cost })
    }

    pub fn dim(&self) -> usize {
        self.op.rows()
    }

    /// `op / alpha`, the block actually sitting in the unitary.
    pub fn block(&self) -> CMatrix {
        self.op.scale_real(1.0 / self.alpha)
    }

    /// Spectral norm of the block.
    pub fn block_norm(&self) -> f64 {
        spectral_norm(&self.op) / self.alpha
    }

    /// Verifies `‖op‖ ≤ alpha·(1+1e-12)`.
    pub fn check_norm(&self) -> BlockResult<()> {
        let r = self.block_norm();
        if r > 1.0 + 1e-12 {
            Err(BlockError::NormTooLarge(r))
        } else {
            Ok(())
        }
    }

    /// Exact encoding of `diag(psi)` from a state-preparation unitary.
    pub fn from_state_diag(psi: &CVector) -> BlockResult<Self> {
        let q = log2_exact(psi.dim())?;
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(BlockError::NotNormalized(norm));
        }
        Self::new(
            CMatrix::diag(psi.entries()),
            1.0,
            q as usize + 3,
            0.0,
            CostLedger::new(1.0, 1.0, q as f64),
        )
    }

    /// Encoding of `diag(values)` from one query to an amplitude oracle that
    /// loads each value into a controlled rotation. `alpha = max(1, max|v|)`.
    pub fn diagonal_loader(values: &[f64]) -> BlockResult<Self> {
        let q = log2_exact(values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MatrixError::NonFinite.into());
        }
        let m = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        Self::new(
            CMatrix::diag_real(values),
            m.max(1.0),
            q as usize + 3,
            0.0,
            CostLedger::new(1.0, 1.0, q as f64),
        )
    }

    /// As [`BlockEncoding::diagonal_loader`] with an explicit
    /// `alpha ≥ max|v|`; the rotation angles are `arccos(v/alpha)`.
    pub fn diagonal_loader_bounded(values: &[f64], alpha: f64) -> BlockResult<Self> {
        let q = log2_exact(values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MatrixError::NonFinite.into());
        }
        Self::new(CMatrix::diag_real(values), alpha, q as usize + 3, 0.0, CostLedger::new(1.0, 1.0, q as f64))
    }

    /// Dense `n × n` coefficient table loaded by a state-preparation
    /// circuit over its `n²` entries. `alpha = n · max|a_ij|`.
    pub fn matrix_loader(a: &CMatrix) -> BlockResult<Self> {
        if a.rows() != a.cols() {
            return Err(MatrixError::NotSquare(a.rows(), a.cols()).into());
        }
        let q = log2_exact(a.rows())?;
        let alpha = (a.rows() as f64 * a.max_abs()).max(f64::MIN_POSITIVE);
        Self::new(a.clone(), alpha, 2 * q as usize + 2, 0.0, CostLedger::new(1.0, 1.0, 2.0 * q as f64))
    }

    /// `|j><j|` on a `dim`-dimensional register.
    pub fn projector(j: usize, dim: usize) -> BlockResult<Self> {
        let q = log2_exact(dim)?;
        if j >= dim {
            return Err(BlockError::IndexOutOfRange { index: j, dim });
        }
        let mut op = CMatrix::zeros(dim, dim);
        op.set(j, j, Complex::new(1.0, 0.0));
        Self::new(op, 1.0, 1, 0.0, CostLedger::new(0.0, 0.0, q as f64))
    }

    /// A unitary used directly as its own block encoding.
    pub fn from_unitary(u: CMatrix, depth: f64) -> BlockResult<Self> {
        let r = u.unitarity_residual();
        if r > 1e-9 {
            return Err(BlockError::InvalidArgument(format!("not unitary (residual {r:e})")));
        }
        Self::new(u, 1.0, 0, 0.0, CostLedger::new(1.0, 0.0, depth))
    }

    pub fn identity(dim: usize) -> Self {
        Self { op: CMatrix::identity(dim), alpha: 1.0, ancillas: 0, eps: 0.0, cost: CostLedger::zero() }
    }

    pub fn hadamard(q: u32) -> Self {
        Self {
            op: hadamard_power(q),
            alpha: 1.0,
            ancillas: 0,
            eps: 0.0,
            cost: CostLedger::new(1.0, 0.0, 1.0),
        }
    }

    pub fn swap(n: usize) -> Self {
        Self {
            op: swap_operator(n),
            alpha: 1.0,
            ancillas: 0,
            eps: 0.0,
            cost: CostLedger::new(1.0, 0.0, 1.0),
        }
    }

    pub fn qft(n: usize) -> BlockResult<Self> {
        let f = qft(n)?;
        Ok(Self { op: f, alpha: 1.0, ancillas: 0, eps: 0.0, cost: CostLedger::new(1.0, 0.0, log2f(n)) })
    }

    pub fn qft_adjoint(n: usize) -> BlockResult<Self> {
        let mut e = Self::qft(n)?;
        e.op = e.op.adjoint();
        Ok(e)
    }

    /// Product of the encoded operators.
    pub fn product(u1: &Self, u2: &Self) -> BlockResult<Self> {
        let op = u1.op.matmul(&u2.op)?;
        Self::new(
            op,
            u1.alpha * u2.alpha,
            u1.ancillas + u2.ancillas,
            u1.alpha * u2.eps + u2.alpha * u1.eps,
            u1.cost.merge(&u2.cost),
        )
    }

    /// Signed linear combination; the block of the result is
    /// `Σ s_i (op_i/alpha_i) / m`.
    pub fn lin_combo(terms: &[Self], signs: &[f64]) -> BlockResult<Self> {
        if terms.is_empty() {
            return Err(BlockError::Empty);
        }
        if signs.len() != terms.len() {
            return Err(BlockError::InvalidArgument(format!(
                "{} signs for {} terms",
                signs.len(),
                terms.len()
            )));
        }
        if let Some(s) = signs.iter().find(|s| s.abs() != 1.0) {
            return Err(BlockError::InvalidArgument(format!("sign must be ±1, got {s}")));
        }
        let shape = terms[0].op.shape();
        for t in terms {
            if t.op.shape() != shape {
                return Err(MatrixError::DimensionMismatch {
                    op: "lin_combo",
                    left: shape,
                    right: t.op.shape(),
                }
                .into());
            }
        }
        let m = terms.len();
        let amax = terms.iter().fold(0.0f64, |a, t| a.max(t.alpha));
        let mut op = CMatrix::zeros(shape.0, shape.1);
        let mut eps = 0.0f64;
        for (t, &s) in terms.iter().zip(signs) {
            let f = amax / t.alpha;
            op = op.checked_add(&t.op.scale_real(s * f / m as f64))?;
            eps = eps.max(t.eps * f);
        }
        let anc = terms.iter().map(|t| t.ancillas).max().unwrap_or(0) + ceil_log2(m);
        let cost = terms.iter().map(|t| t.cost).sum::<CostLedger>().plus_depth(log2f(m).ceil());
        Self::new(op, amax, anc, eps, cost)
    }

    /// `Σ s_i op_i` with `alpha = Σ alpha_i`, the prepare-select form whose
    /// prepare state carries amplitudes `√(alpha_i / Σ alpha)`.
    pub fn weighted_sum(terms: &[Self], signs: &[f64]) -> BlockResult<Self> {
        if terms.is_empty() {
            return Err(BlockError::Empty);
        }
        if signs.len() != terms.len() {
            return Err(BlockError::InvalidArgument(format!(
                "{} signs for {} terms",
                signs.len(),
                terms.len()
            )));
        }
        let shape = terms[0].op.shape();
        let mut op = CMatrix::zeros(shape.0, shape.1);
        for (t, &s) in terms.iter().zip(signs) {
            if s.abs() != 1.0 {
                return Err(BlockError::InvalidArgument(format!("sign must be ±1, got {s}")));
            }
            if t.op.shape() != shape {
                return Err(MatrixError::DimensionMismatch { op: "weighted_sum", left: shape, right: t.op.shape() }
                    .into());
            }
            op = op.checked_add(&t.op.scale_real(s))?;
        }
        let m = terms.len();
        let alpha = terms.iter().map(|t| t.alpha).sum();
        let eps = terms.iter().map(|t| t.eps).sum();
        let anc = terms.iter().map(|t| t.ancillas).max().unwrap_or(0) + ceil_log2(m);
        let cost = terms.iter().map(|t| t.cost).sum::<CostLedger>().plus_depth(log2f(m).ceil());
        Self::new(op, alpha, anc, eps, cost)
    }

    /// Tensor product of the encoded operators.
    pub fn tensor(u1: &Self, u2: &Self) -> BlockResult<Self> {
        let mut cost = u1.cost.merge(&u2.cost);
        cost.modeled_depth = u1.cost.modeled_depth.max(u2.cost.modeled_depth) + 1.0;
        Self::new(
            u1.op.kron(&u2.op),
            u1.alpha * u2.alpha,
            u1.ancillas + u2.ancillas,
            u1.alpha * u2.eps + u2.alpha * u1.eps + u1.eps * u2.eps,
            cost,
        )
    }

    /// Divides the block by `p > 1` at constant cost.
    pub fn scale_down(&self, p: f64) -> BlockResult<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(BlockError::InvalidScale(p));
        }
        let mut out = self.clone();
        out.alpha *= p;
        out.ancillas += 1;
        out.cost = out.cost.plus_depth(1.0);
        Ok(out)
    }

    /// Uniform singular value amplification of the block by `gamma`.
    pub fn amplify(&self, gamma: f64, delta: f64, eps_target: f64) -> BlockResult<Self> {
        if !(gamma > 1.0) || !gamma.is_finite() {
            return Err(BlockError::InvalidScale(gamma));
        }
        if !(delta > 0.0 && delta < 0.5) {
            return Err(BlockError::InvalidArgument(format!("delta must lie in (0, 1/2), got {delta}")));
        }
        if !(eps_target > 0.0 && eps_target < 1.0) {
            return Err(BlockError::InvalidArgument(format!("eps_target must lie in (0, 1), got {eps_target}")));
        }
        let value = self.block_norm();
        let bound = (1.0 - delta) / gamma;
        if value > bound * (1.0 + 1e-12) {
            return Err(BlockError::AmplifyMargin { value, bound });
        }
        let m = ((gamma / delta) * (gamma / eps_target).ln()).ceil().max(1.0);
        let alpha = self.alpha / gamma;
        Ok(Self {
            op: self.op.clone(),
            alpha,
            ancillas: self.ancillas + 1,
            eps: self.eps + alpha.max(1.0) * eps_target,
            cost: self.cost.repeated(m),
        })
    }

    /// Amplifies by `gamma`, or by the largest admissible factor when the
    /// margin does not allow the full request. No-op if that factor is ≤ 1.
    pub fn amplify_to_unit(&self, gamma: f64, delta: f64, eps_target: f64) -> BlockResult<Amplified> {
        let value = self.block_norm();
        let admissible = if value > 0.0 { (1.0 - delta) / value } else { f64::INFINITY };
        let g = gamma.min(admissible * (1.0 - 1e-12));
        if g <= 1.0 {
            return Ok(Amplified { enc: self.clone(), requested_gamma: gamma, applied_gamma: 1.0 });
        }
        Ok(Amplified { enc: self.amplify(g, delta, eps_target)?, requested_gamma: gamma, applied_gamma: g })
    }

    /// Multiplies `op`, `alpha` and `eps` by `f` without changing the block.
    pub fn relabel(&self, f: f64) -> Self {
        let mut out = self.clone();
        out.op = out.op.scale_real(f);
        out.alpha *= f;
        out.eps *= f;
        out
    }

    /// Same block, with `op` expressed at `alpha = 1`.
    pub fn normalized(&self) -> Self {
        self.relabel(1.0 / self.alpha)
    }

    /// Top-left `reg_dim × reg_dim` corner, read off by post-selecting an
    /// extra register in `|0>`.
    pub fn sub_block(&self, reg_dim: usize) -> BlockResult<Self> {
        if reg_dim == 0 || reg_dim > self.op.rows() || reg_dim > self.op.cols() {
            return Err(BlockError::IndexOutOfRange { index: reg_dim, dim: self.op.rows() });
        }
        let extra = log2f(self.op.rows() / reg_dim).ceil() as usize;
        Self::new(
            self.op.submatrix(0, 0, reg_dim, reg_dim),
            self.alpha,
            self.ancillas + extra,
            self.eps,
            self.cost,
        )
    }

    /// Encoding of the transpose, obtained by transposing every gate.
    pub fn transpose(&self) -> Self {
        let mut out = self.clone();
        out.op = self.op.transpose();
        out
    }

    pub fn adjoint(&self) -> Self {
        let mut out = self.clone();
        out.op = self.op.adjoint();
        out
    }

    /// Signed sum `Σ s_i op_i` of encodings that may carry different
    /// alphas; the result has `alpha = m · max alpha_i`.
    pub fn combine(terms: &[Self], signs: &[f64]) -> BlockResult<Self> {
        let amax = terms.iter().fold(0.0f64, |a, t| a.max(t.alpha));
        let scaled: Vec<Self> = terms
            .iter()
            .map(|t| if t.alpha < amax { t.scale_down(amax / t.alpha) } else { Ok(t.clone()) })
            .collect::<BlockResult<_>>()?;
        let lc = Self::lin_combo(&scaled, signs)?;
        Ok(lc.relabel(terms.len() as f64))
    }

    /// Encoding of `Tr_A |Φ><Φ|` where the last factor of `phi` has dimension `dim_b`.
    pub fn density_from_purification(phi: &CVector, dim_b: usize) -> BlockResult<Self> {
        let total = phi.dim();
        let q = log2f(total);
        Self::density_from_purification_with(phi, dim_b, &CostLedger::new(0.0, 1.0, q))
    }

    /// As [`BlockEncoding::density_from_purification`], charging two uses of a
    /// preparation circuit with ledger `prep`.
    pub fn density_from_purification_with(phi: &CVector, dim_b: usize, prep: &CostLedger) -> BlockResult<Self> {
        let total = phi.dim();
        if dim_b == 0 || !total.is_multiple_of(dim_b) {
            return Err(BlockError::InvalidArgument(format!("{dim_b} does not divide {total}")));
        }
        let norm = phi.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(BlockError::NotNormalized(norm));
        }
        let dim_a = total / dim_b;
        let mut rho = CMatrix::zeros(dim_b, dim_b);
        for a in 0..dim_a {
            let block = &phi.entries()[a * dim_b..(a + 1) * dim_b];
            for (i, bi) in block.iter().enumerate() {
                if *bi == C64::new(0.0, 0.0) {
                    continue;
                }
                for (j, bj) in block.iter().enumerate() {
                    rho[(i, j)] += bi * bj.conj();
                }
            }
        }
        let anc = log2f(total).ceil() as usize;
        Self::new(rho, 1.0, anc, 0.0, prep.repeated(2.0).plus_depth(log2f(dim_b)))
    }

    /// Unitary completion `[[B, √(I−BB†)], [√(I−B†B), −B†]]` of the block `B`.
    pub fn dilate(&self) -> BlockResult<CMatrix> {
        let b = self.block();
        let nb = spectral_norm(&b);
        if nb > 1.0 + 1e-10 {
            return Err(BlockError::NormTooLarge(nb));
        }
        let (r, c) = b.shape();
        let bh = b.adjoint();
        let defect = |m: &CMatrix| -> BlockResult<CMatrix> {
            let g = m.map(|z| -z);
            let id = CMatrix::identity(g.rows());
            Ok(hermitian_function(&id.checked_add(&g)?, |x| x.max(0.0).sqrt())?)
        };
        let d1 = defect(&b.matmul(&bh)?)?;
        let d2 = defect(&bh.matmul(&b)?)?;
        let mut u = CMatrix::zeros(r + c, c + r);
        for i in 0..r {
            for j in 0..c {
                u.set(i, j, b.get(i, j));
            }
            for j in 0..r {
                u.set(i, c + j, d1.get(i, j));
            }
        }
        for i in 0..c {
            for j in 0..c {
                u.set(r + i, j, d2.get(i, j));
            }
            for j in 0..r {
                u.set(r + i, c + j, -bh.get(i, j));
            }
        }
        Ok(u)
    }

    /// JSON document with matrix entries, alpha, eps and ledger.
    pub fn to_debug_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("block encoding serializes")
    }

    pub fn from_debug_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}
