//! Extremal eigenvalue and condition number estimates of block-encoded
//! operators by power iteration, charged at the query cost
//! `⌈(1/ε)(log₂ dim + log₂(1/ε))⌉` uses of the encoding.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::block_encoding::{BlockEncoding, BlockError, BlockResult, CostLedger};
use crate::matrix_core::{eig_hermitian, inverse};
use crate::{CMatrix, CVector};

pub const DEFAULT_PROBE_SEED: u64 = 0x5eed_cafe;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub value: f64,
    pub additive_error: f64,
    pub iterations: u64,
    pub cost: CostLedger,
    pub degenerate: bool,
}

/// An extremal entry of an encoded diagonal, recovered through a shift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremeValue {
    pub value: f64,
    pub error: f64,
    pub probe: SpectralEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionEstimate {
    pub kappa: f64,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub cost: CostLedger,
}

/// Number of encoding uses charged for additive accuracy `eps`.
pub fn probe_iterations(dim: usize, eps: f64) -> u64 {
    let l = (dim.max(2) as f64).log2() + (1.0 / eps).log2();
    ((l / eps).ceil() as u64).max(1)
}

fn check_eps(eps: f64) -> BlockResult<()> {
    if eps > 0.0 && eps < 0.5 {
        Ok(())
    } else {
        Err(BlockError::InvalidArgument(format!("eps must lie in (0, 1/2), got {eps}")))
    }
}

fn random_start(n: usize, seed: u64) -> CVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CVector::new((0..n).map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
        .normalized()
}

/// Power iteration for the top of a PSD operator given as a mat-vec.
/// Returns the Rayleigh quotient once it stalls or the budget runs out.
fn power_rayleigh(apply: impl Fn(&CVector) -> CVector, n: usize, budget: u64, seed: u64) -> f64 {
    let mut v = random_start(n, seed);
    let mut rho = 0.0;
    for k in 0..budget {
        let w = apply(&v);
        let next = v.dot(&w).re;
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        v = w.scale(Complex::new(1.0 / nw, 0.0));
        if k > 0 && (next - rho).abs() <= 1e-15 * next.abs().max(1e-300) {
            return next;
        }
        rho = next;
    }
    rho
}

fn spectrum_of(b: &CMatrix) -> BlockResult<Vec<f64>> {
    if b.is_diagonal() {
        let mut d: Vec<f64> = b.diagonal().iter().map(|z| z.re).collect();
        d.sort_by(|x, y| y.partial_cmp(x).unwrap());
        Ok(d)
    } else {
        Ok(eig_hermitian(b)?.0)
    }
}

/// Largest eigenvalue of the PSD block `A/alpha` to additive error `eps`.
pub fn max_eigenvalue(u: &BlockEncoding, eps: f64) -> BlockResult<SpectralEstimate> {
    max_eigenvalue_seeded(u, eps, DEFAULT_PROBE_SEED)
}

pub fn max_eigenvalue_seeded(u: &BlockEncoding, eps: f64, seed: u64) -> BlockResult<SpectralEstimate> {
    check_eps(eps)?;
    let b = u.block();
    let asym = b.hermitian_asymmetry();
    if asym > 1e-10 {
        return Err(crate::MatrixError::NotHermitian(asym).into());
    }
    let b = CMatrix::from_fn(b.rows(), b.cols(), |i, j| (b.get(i, j) + b.get(j, i).conj()) * 0.5);
    let spec = spectrum_of(&b)?;
    let lowest = *spec.last().unwrap_or(&0.0);
    if lowest < -1e-10 {
        return Err(BlockError::InvalidArgument(format!("operator is not PSD: eigenvalue {lowest}")));
    }
    let degenerate = spec.len() > 1 && spec[0] - spec[1] < 1e-6;
    let n = b.rows();
    let iterations = probe_iterations(n, eps);
    let value = if b.is_diagonal() {
        let d: Vec<f64> = b.diagonal().iter().map(|z| z.re).collect();
        power_rayleigh(
            |v| CVector::new(v.entries().iter().zip(&d).map(|(z, x)| z * *x).collect()),
            n,
            iterations,
            seed,
        )
    } else {
        power_rayleigh(|v| b.mul_vec(v).expect("square block"), n, iterations, seed)
    };
    Ok(SpectralEstimate {
        value,
        additive_error: eps,
        iterations,
        cost: u.cost.repeated(iterations as f64),
        degenerate,
    })
}

fn diagonal_values(u: &BlockEncoding) -> BlockResult<Vec<f64>> {
    if !u.op.is_diagonal() {
        return Err(BlockError::InvalidArgument("expected an encoding of a diagonal operator".into()));
    }
    let f: Vec<f64> = u.op.diagonal().iter().map(|z| z.re).collect();
    if let Some(bad) = f.iter().find(|x| x.abs() > 0.5 + 1e-12) {
        return Err(BlockError::InvalidArgument(format!("|f| = {} exceeds 1/2", bad.abs())));
    }
    Ok(f)
}

fn shifted(u: &BlockEncoding, sign: f64) -> BlockResult<BlockEncoding> {
    BlockEncoding::lin_combo(&[BlockEncoding::identity(u.dim()), u.clone()], &[1.0, sign])
}

/// `min f` for an encoding of `diag f`, read off `λ_max((I − f/α)/2)`.
pub fn min_via_shift(u: &BlockEncoding, eps: f64) -> BlockResult<ExtremeValue> {
    diagonal_values(u)?;
    let probe = max_eigenvalue(&shifted(u, -1.0)?, eps)?;
    Ok(ExtremeValue { value: u.alpha * (1.0 - 2.0 * probe.value), error: 2.0 * eps * u.alpha, probe })
}

/// `max f` for an encoding of `diag f`, read off `λ_max((I + f/α)/2)`.
pub fn max_via_shift(u: &BlockEncoding, eps: f64) -> BlockResult<ExtremeValue> {
    diagonal_values(u)?;
    let probe = max_eigenvalue(&shifted(u, 1.0)?, eps)?;
    Ok(ExtremeValue { value: u.alpha * (2.0 * probe.value - 1.0), error: 2.0 * eps * u.alpha, probe })
}

/// `σ_max/σ_min` of the block. `sigma_floor`, when given, is the assumed
/// lower bound on `σ_min`; smaller values are rejected.
pub fn condition_number(u: &BlockEncoding, eps: f64, sigma_floor: Option<f64>) -> BlockResult<ConditionEstimate> {
    check_eps(eps)?;
    let b = u.block();
    let gram = b.adjoint().matmul(&b)?;
    let n = gram.rows();
    let iterations = probe_iterations(n, eps);
    let top = power_rayleigh(|v| gram.mul_vec(v).expect("square"), n, iterations, DEFAULT_PROBE_SEED);
    let inv = inverse(&gram).map_err(|_| BlockError::InvalidArgument("block is singular".into()))?;
    let bottom_inv = power_rayleigh(|v| inv.mul_vec(v).expect("square"), n, iterations, DEFAULT_PROBE_SEED ^ 1);
    let sigma_max = top.max(0.0).sqrt();
    let sigma_min = (1.0 / bottom_inv).sqrt();
    if let Some(floor) = sigma_floor {
        if sigma_min < floor {
            return Err(BlockError::InvalidArgument(format!(
                "smallest singular value {sigma_min} is below the assumed floor {floor}"
            )));
        }
    }
    // two probes, each applying the encoding and its adjoint
    let cost = u.cost.repeated(4.0 * iterations as f64);
    Ok(ConditionEstimate { kappa: sigma_max / sigma_min, sigma_max, sigma_min, cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix_core::singular_values;
    use crate::C64;

    fn d(v: &[f64]) -> CMatrix {
        CMatrix::diag_real(v)
    }

    fn enc(op: CMatrix) -> BlockEncoding {
        BlockEncoding::new(op, 1.0, 0, 0.0, CostLedger::new(1.0, 0.0, 1.0)).unwrap()
    }

    #[test]
    fn max_eigenvalue_examples() {
        let e = max_eigenvalue(&enc(d(&[0.9, 0.1])), 1e-3).unwrap();
        assert!((e.value - 0.9).abs() <= 1e-3);
        assert_eq!(e.iterations, probe_iterations(2, 1e-3));
        assert_eq!(e.cost.base_unitary_uses, e.iterations as f64);

        let f = |x: f64| x * (x - 0.5) * (x + 0.7);
        let xs: Vec<f64> = (0..8).map(|k| -0.5 + k as f64 / 8.0).collect();
        let fv: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let shifted = enc(d(&fv.iter().map(|v| 0.5 * (1.0 - v)).collect::<Vec<_>>()));
        let e = max_eigenvalue(&shifted, 1e-3).unwrap();
        let minf = fv.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((e.value - (1.0 - minf) / 2.0).abs() <= 1e-3);

        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = CMatrix::from_fn(16, 16, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let psd = (&g.adjoint() * &g).scale_real(1.0 / 64.0);
        let top = eig_hermitian(&psd).unwrap().0[0];
        let b = BlockEncoding::new(psd, top.max(1.0), 0, 0.0, CostLedger::zero()).unwrap();
        let e = max_eigenvalue(&b, 1e-3).unwrap();
        assert!((e.value - top / b.alpha).abs() <= 1e-3);
    }

    #[test]
    fn rejects_indefinite() {
        assert!(max_eigenvalue(&enc(d(&[0.5, -0.3])), 1e-3).is_err());
    }

    #[test]
    fn degenerate_flag() {
        let e = max_eigenvalue(&enc(d(&[0.3, 0.3, 0.1, 0.0])), 1e-3).unwrap();
        assert!(e.degenerate);
        assert!((e.value - 0.3).abs() < 1e-12);
    }

    #[test]
    fn min_via_shift_examples() {
        let m = min_via_shift(&enc(d(&[0.4, -0.2])), 1e-3).unwrap();
        assert!((m.value + 0.2).abs() <= 2e-3);
        let m = min_via_shift(&enc(d(&[0.3; 4])), 1e-3).unwrap();
        assert!((m.value - 0.3).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f: Vec<f64> = (0..64).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let m = min_via_shift(&enc(d(&f)), 1e-3).unwrap();
        let direct = f.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((m.value - direct).abs() <= 2e-3);
        assert!(min_via_shift(&enc(d(&[0.6, 0.0])), 1e-3).is_err());
    }

    #[test]
    fn condition_number_examples() {
        let c = condition_number(&enc(CMatrix::identity(4)), 1e-3, None).unwrap();
        assert!((c.kappa - 1.0).abs() < 1e-9);
        let c = condition_number(&enc(d(&[1.0, 0.25])), 1e-3, None).unwrap();
        assert!((c.kappa - 4.0).abs() < 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = CMatrix::from_fn(8, 8, |i, j| C64::new(rng.gen_range(-0.1..0.1) + if i == j { 0.5 } else { 0.0 }, 0.0));
        let s = singular_values(&m).unwrap();
        let c = condition_number(&enc(m), 1e-3, None).unwrap();
        assert!((c.kappa / (s[0] / s[7]) - 1.0).abs() < 0.05);
        assert!(condition_number(&enc(d(&[1.0, 0.01])), 1e-3, Some(0.1)).is_err());
    }
}
