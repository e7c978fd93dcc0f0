//! Polynomial transforms of block-encoded operators.
//!
//! The transform itself is simulated through an eigen- or singular value
//! decomposition, while the ledger charges one use of the input encoding per
//! unit of polynomial degree.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::block_encoding::{BlockEncoding, BlockError, BlockResult, CostLedger};
use crate::matrix_core::{eig_hermitian, hermitian_function, singular_values};
use crate::CMatrix;

/// Constant `C` in the inverse polynomial degree bound `d ≤ C·κ·ln(κ/ε)`.
pub const INVERSE_DEGREE_CONSTANT: f64 = 4.0;

/// Real polynomial in the Chebyshev basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub cheb_coeffs: Vec<f64>,
    pub degree: usize,
    pub sup_bound: f64,
}

/// Condition number and accuracy of an inversion request.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionSpec {
    pub kappa: f64,
    pub eps: f64,
}

impl InversionSpec {
    pub fn new(kappa: f64, eps: f64) -> BlockResult<Self> {
        if !(kappa >= 1.0) || !kappa.is_finite() {
            return Err(BlockError::InvalidArgument(format!("kappa must be ≥ 1, got {kappa}")));
        }
        if !(eps > 0.0 && eps < 0.5) {
            return Err(BlockError::InvalidArgument(format!("eps must lie in (0, 1/2), got {eps}")));
        }
        Ok(Self { kappa, eps })
    }
}

fn chebyshev_nodes(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| (std::f64::consts::PI * (k as f64 + 0.5) / n as f64).cos())
}

impl Polynomial {
    /// Builds from Chebyshev coefficients, dropping trailing zeros and
    /// sampling the sup-norm.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        let degree = coeffs.len() - 1;
        let mut p = Self { cheb_coeffs: coeffs, degree, sup_bound: 0.0 };
        p.sup_bound = p.sampled_sup();
        p
    }

    /// From power-basis coefficients `c_0 + c_1 x + …`.
    pub fn from_monomial(coeffs: &[f64]) -> Self {
        // Horner in the Chebyshev basis: p ← x·p + c_k
        let mut acc: Vec<f64> = vec![0.0];
        for &ck in coeffs.iter().rev() {
            let mut next = vec![0.0; acc.len() + 1];
            for (k, &a) in acc.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                if k == 0 {
                    next[1] += a;
                } else {
                    next[k + 1] += 0.5 * a;
                    next[k - 1] += 0.5 * a;
                }
            }
            next[0] += ck;
            acc = next;
        }
        Self::new(acc)
    }

    /// Chebyshev interpolant of `f` at `n` first-kind nodes.
    pub fn interpolate(f: impl Fn(f64) -> f64, n: usize) -> Self {
        let n = n.max(1);
        let values: Vec<f64> = chebyshev_nodes(n).map(&f).collect();
        let coeffs = (0..n)
            .map(|j| {
                let s: f64 = values
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v * (std::f64::consts::PI * j as f64 * (k as f64 + 0.5) / n as f64).cos())
                    .sum();
                if j == 0 {
                    s / n as f64
                } else {
                    2.0 * s / n as f64
                }
            })
            .collect();
        Self::new(coeffs)
    }

    /// Clenshaw evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &c in self.cheb_coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * x * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        x * b1 - b2 + self.cheb_coeffs[0]
    }

    /// Max of `|P(cos θ)|` over `θ = πj/N`, `N ≥ 32·(deg+1)`, evaluated in
    /// one FFT of the zero-padded coefficients.
    fn sampled_sup(&self) -> f64 {
        let n = (32 * (self.degree + 1)).next_power_of_two();
        let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); 2 * n];
        for (k, &c) in self.cheb_coeffs.iter().enumerate() {
            buf[k] = Complex::new(c, 0.0);
        }
        FftPlanner::new().plan_fft_inverse(2 * n).process(&mut buf);
        buf[..=n].iter().fold(0.0f64, |m, z| m.max(z.re.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.cheb_coeffs.iter().map(|c| c * s).collect())
    }

    /// True when only odd Chebyshev terms are present.
    pub fn is_odd(&self) -> bool {
        self.cheb_coeffs.iter().step_by(2).all(|&c| c == 0.0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.cheb_coeffs).expect("coefficients serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        Ok(Self::new(serde_json::from_str(s)?))
    }
}

fn check_sup(p: &Polynomial) -> BlockResult<()> {
    if p.sup_bound > 0.5 + 1e-12 {
        return Err(BlockError::InvalidArgument(format!(
            "polynomial sup-norm {} exceeds 1/2",
            p.sup_bound
        )));
    }
    Ok(())
}

fn hermitian_block(u: &BlockEncoding) -> BlockResult<CMatrix> {
    let b = u.block();
    let asym = b.hermitian_asymmetry();
    if asym > 1e-10 {
        return Err(crate::MatrixError::NotHermitian(asym).into());
    }
    Ok(CMatrix::from_fn(b.rows(), b.cols(), |i, j| (b.get(i, j) + b.get(j, i).conj()) * 0.5))
}

fn transformed(u: &BlockEncoding, op: CMatrix, degree: usize, alpha: f64) -> BlockResult<BlockEncoding> {
    let d = degree as f64;
    let mut cost = u.cost.repeated(d);
    cost.qsvt_degree_total += d;
    let eps = 4.0 * d * (u.eps / u.alpha).sqrt() * alpha;
    BlockEncoding::new(op, alpha, u.ancillas + 2, eps, cost)
}

/// `P(A/alpha)` for a Hermitian encoding; requires `sup|P| ≤ 1/2`.
pub fn qsvt_apply(u: &BlockEncoding, p: &Polynomial) -> BlockResult<BlockEncoding> {
    check_sup(p)?;
    let b = hermitian_block(u)?;
    let op = hermitian_function(&b, |x| p.eval(x.clamp(-1.0, 1.0)))?;
    transformed(u, op, p.degree, 1.0)
}

/// Odd singular value transform `U P(Σ) V†` of a general block `UΣV†`,
/// computed through the Hermitian dilation `[[0, B], [B†, 0]]`.
pub fn qsvt_singular(u: &BlockEncoding, p: &Polynomial) -> BlockResult<BlockEncoding> {
    check_sup(p)?;
    if !p.is_odd() {
        return Err(BlockError::InvalidArgument("singular value transform needs an odd polynomial".into()));
    }
    let op = odd_singular_transform(&u.block(), p)?;
    transformed(u, op, p.degree, 1.0)
}

fn odd_singular_transform(b: &CMatrix, p: &Polynomial) -> BlockResult<CMatrix> {
    let (r, c) = b.shape();
    let mut h = CMatrix::zeros(r + c, r + c);
    for i in 0..r {
        for j in 0..c {
            h.set(i, r + j, b.get(i, j));
            h.set(r + j, i, b.get(i, j).conj());
        }
    }
    let ph = hermitian_function(&h, |x| p.eval(x.clamp(-1.0, 1.0)))?;
    Ok(ph.submatrix(0, r, r, c))
}

/// Odd polynomial with `|P(x) − 1/(2κx)| ≤ eps/(2κ)` on `1/κ ≤ |x| ≤ 1`.
///
/// Truncated Chebyshev expansion of `(1 − (1 − x²)^b)/x`. Its sup-norm on
/// `[−1, 1]` generally exceeds 1/2; [`invert`] rescales before use.
pub fn inverse_polynomial(spec: InversionSpec) -> Polynomial {
    let kappa = spec.kappa;
    let e = spec.eps / 4.0;
    let b = (kappa * kappa * (kappa / e).ln()).ceil().max(1.0) as usize;
    let j0 = ((b as f64) * (4.0 * b as f64 / e).ln()).sqrt().ceil() as usize;
    let j0 = j0.min(b);
    // p_i = C(2b, b+i)/4^b for i = 0..=b
    let bf = b as f64;
    let ln_central: f64 = (1..=b).map(|k| ((bf + k as f64) / k as f64).ln()).sum::<f64>()
        - 2.0 * bf * std::f64::consts::LN_2;
    let mut pmf = vec![0.0; b + 1];
    pmf[0] = ln_central.exp();
    for i in 0..b {
        pmf[i + 1] = pmf[i] * (bf - i as f64) / (bf + i as f64 + 1.0);
    }
    let mut tails = vec![0.0; b + 2];
    for i in (0..=b).rev() {
        tails[i] = tails[i + 1] + pmf[i];
    }
    let mut coeffs = vec![0.0; 2 * j0 + 2];
    let scale = 1.0 / (2.0 * kappa);
    for j in 0..=j0 {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        coeffs[2 * j + 1] = scale * 4.0 * sign * tails[j + 1];
    }
    Polynomial::new(coeffs)
}

/// Degree bound `C·κ·ln(κ/eps)` met by [`inverse_polynomial`].
pub fn inverse_degree_bound(spec: InversionSpec) -> f64 {
    INVERSE_DEGREE_CONSTANT * spec.kappa * (spec.kappa / spec.eps).ln().max(1.0)
}

fn band_check(values: &[f64], kappa: f64) -> BlockResult<()> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(0.0, f64::max);
    if lo < (1.0 / kappa) * (1.0 - 1e-10) {
        return Err(BlockError::InvalidArgument(format!(
            "smallest singular value {lo} is below 1/kappa = {}",
            1.0 / kappa
        )));
    }
    if hi > 1.0 + 1e-10 {
        return Err(BlockError::NormTooLarge(hi));
    }
    Ok(())
}

/// Encoding whose `op` is `(1/(2κ))·(A/alpha)⁻¹`. The rescale that keeps the
/// polynomial below 1/2 is carried in `alpha`.
pub fn invert(u: &BlockEncoding, kappa: f64, eps: f64) -> BlockResult<BlockEncoding> {
    let spec = InversionSpec::new(kappa, eps)?;
    let b = u.block();
    let hermitian = b.hermitian_asymmetry() <= 1e-10;
    let sv: Vec<f64> = if hermitian {
        let h = hermitian_block(u)?;
        if h.is_diagonal() {
            h.diagonal().iter().map(|z| z.re.abs()).collect()
        } else {
            eig_hermitian(&h)?.0.iter().map(|x| x.abs()).collect()
        }
    } else {
        singular_values(&b)?
    };
    band_check(&sv, kappa)?;
    let raw = inverse_polynomial(spec);
    let s = (0.5 / raw.sup_bound).min(1.0);
    let p = raw.scaled(s);
    let block = if hermitian {
        let h = hermitian_block(u)?;
        hermitian_function(&h, |x| p.eval(x.clamp(-1.0, 1.0)))?
    } else {
        odd_singular_transform(&b.adjoint(), &p)?
    };
    let mut out = transformed(u, block.scale_real(1.0 / s), p.degree, 1.0 / s)?;
    out.eps += eps / (2.0 * kappa);
    Ok(out)
}

/// Encoding whose `op` is `(A/alpha)^c / 2` for a positive block with
/// spectrum in `[1/κ, 1]`.
pub fn fractional_power(u: &BlockEncoding, c: f64, eps: f64, kappa: f64) -> BlockResult<BlockEncoding> {
    if !(c > 0.0 && c < 1.0) {
        return Err(BlockError::InvalidArgument(format!("exponent must lie in (0, 1), got {c}")));
    }
    if !(eps > 0.0 && eps < 0.5) || !(kappa >= 1.0) {
        return Err(BlockError::InvalidArgument(format!("invalid eps {eps} or kappa {kappa}")));
    }
    let h = hermitian_block(u)?;
    let spectrum: Vec<f64> = if h.is_diagonal() {
        h.diagonal().iter().map(|z| z.re).collect()
    } else {
        eig_hermitian(&h)?.0
    };
    if spectrum.iter().any(|&x| x < 0.0) {
        return Err(BlockError::InvalidArgument("operator is not positive".into()));
    }
    band_check(&spectrum, kappa)?;
    let p = fractional_polynomial(c, eps, kappa);
    let s = (0.5 / p.sup_bound).min(1.0);
    let ps = p.scaled(s);
    let block = hermitian_function(&h, |x| ps.eval(x.clamp(-1.0, 1.0)))?;
    let band_err = (0..=200)
        .map(|k| 1.0 / kappa + (1.0 - 1.0 / kappa) * k as f64 / 200.0)
        .map(|x| (p.eval(x) - 0.5 * x.powf(c)).abs())
        .fold(0.0, f64::max);
    let mut out = transformed(u, block.scale_real(1.0 / s), ps.degree, 1.0 / s)?;
    out.eps += band_err;
    Ok(out)
}

type PolyCache = HashMap<(u64, u64, u64), Polynomial>;

/// Chebyshev interpolant of `½·m(x)^c` where `m` is a softplus floor at
/// `1/(2κ)`; it agrees with `½x^c` on `[1/κ, 1]` up to `eps`.
pub fn fractional_polynomial(c: f64, eps: f64, kappa: f64) -> Polynomial {
    static CACHE: OnceLock<Mutex<PolyCache>> = OnceLock::new();
    let key = (c.to_bits(), eps.to_bits(), kappa.to_bits());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(p) = cache.lock().unwrap().get(&key) {
        return p.clone();
    }
    let p = build_fractional(c, eps, kappa);
    cache.lock().unwrap().insert(key, p.clone());
    p
}

fn build_fractional(c: f64, eps: f64, kappa: f64) -> Polynomial {
    let x0 = 1.0 / (2.0 * kappa);
    let tau = x0 / (1.0 / eps).ln().max(1.0);
    let g = move |x: f64| {
        let z = (x - x0) / tau;
        let sp = if z > 30.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
        0.5 * (x0 + tau * sp).powf(c)
    };
    let mut n = 16usize;
    loop {
        let p = Polynomial::interpolate(g, n);
        let tail = p.cheb_coeffs.iter().rev().take(4).fold(0.0f64, |m, a| m.max(a.abs()));
        if tail < eps * 1e-2 || n >= 1 << 14 {
            let cut = p.cheb_coeffs.iter().rposition(|a| a.abs() > eps * 1e-3).unwrap_or(0);
            return Polynomial::new(p.cheb_coeffs[..=cut].to_vec());
        }
        n *= 2;
    }
}

/// Ledger-only estimate of the QSVT degree for a fractional power, for
/// reporting.
pub fn fractional_degree_model(eps: f64, kappa: f64) -> f64 {
    2.0 / std::f64::consts::PI * kappa * (1.0 / eps).ln().powi(2)
}

/// Cost of an inverse transform without building the operator.
pub fn invert_cost(u: &CostLedger, kappa: f64, eps: f64) -> CostLedger {
    let spec = InversionSpec { kappa, eps };
    let d = inverse_polynomial(spec).degree as f64;
    let mut c = u.repeated(d);
    c.qsvt_degree_total += d;
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn d(v: &[f64]) -> CMatrix {
        CMatrix::diag_real(v)
    }

    fn enc(op: CMatrix) -> BlockEncoding {
        BlockEncoding::new(op, 1.0, 0, 0.0, CostLedger::new(1.0, 0.0, 1.0)).unwrap()
    }

    #[test]
    fn clenshaw_matches_direct_chebyshev() {
        let p = Polynomial::new(vec![0.3, -0.2, 0.5, 0.1]);
        for &x in &[-1.0, -0.3, 0.0, 0.7, 1.0] {
            let t = [1.0, x, 2.0 * x * x - 1.0, 4.0 * x * x * x - 3.0 * x];
            let direct: f64 = p.cheb_coeffs.iter().zip(t).map(|(a, b)| a * b).sum();
            assert!((p.eval(x) - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn monomial_conversion() {
        let p = Polynomial::from_monomial(&[0.0, 0.0, 1.0]);
        assert!((p.cheb_coeffs[0] - 0.5).abs() < 1e-15 && (p.cheb_coeffs[2] - 0.5).abs() < 1e-15);
        let g = Polynomial::from_monomial(&[-1.0 / 16.0, 0.0, 9.0 / 8.0, 0.0, -3.0, 0.0, 2.0]);
        for &x in &[-0.5f64, -0.2, 0.0, 0.3, 0.9] {
            let direct = 2.0 * x.powi(6) - 3.0 * x.powi(4) + 9.0 / 8.0 * x * x - 1.0 / 16.0;
            assert!((g.eval(x) - direct).abs() < 1e-14);
        }
        assert_eq!(g.degree, 6);
    }

    #[test]
    fn qsvt_examples() {
        let a = BlockEncoding::new(CMatrix::from_real(2, 2, &[0.4, 0.2, 0.2, -0.1]), 2.0, 0, 0.0, CostLedger::zero())
            .unwrap();
        let half_x = Polynomial::new(vec![0.0, 0.5]);
        let r = qsvt_apply(&a, &half_x).unwrap();
        assert!(r.op.max_abs_diff(&a.op.scale_real(0.25)) < 1e-14);

        let sq = Polynomial::new(vec![0.25, 0.0, 0.25]);
        let r = qsvt_apply(&enc(d(&[0.5, -0.5])), &sq).unwrap();
        assert!(r.op.max_abs_diff(&d(&[0.125, 0.125])) < 1e-14);
        assert_eq!(r.cost.base_unitary_uses, 2.0);
        assert_eq!(r.cost.qsvt_degree_total, 2.0);

        let g = Polynomial::from_monomial(&[-1.0 / 16.0, 0.0, 9.0 / 8.0, 0.0, -3.0, 0.0, 2.0]);
        let grid: Vec<f64> = (0..8).map(|k| -0.5 + k as f64 / 7.0).collect();
        let r = qsvt_apply(&enc(d(&grid)), &g).unwrap();
        for (k, &x) in grid.iter().enumerate() {
            let direct = 2.0 * x.powi(6) - 3.0 * x.powi(4) + 9.0 / 8.0 * x * x - 1.0 / 16.0;
            assert!((r.op.get(k, k).re - direct).abs() < 1e-14);
        }

        let big = Polynomial::new(vec![0.0, 1.0]);
        assert!(qsvt_apply(&enc(d(&[0.5, 0.1])), &big).is_err());
        let nonherm = enc(CMatrix::from_real(2, 2, &[0.0, 0.5, 0.0, 0.0]));
        assert!(qsvt_apply(&nonherm, &half_x).is_err());
    }

    #[test]
    fn singular_transform_of_linear_polynomial_is_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = CMatrix::from_fn(4, 4, |_, _| C64::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)));
        let r = qsvt_singular(&enc(m.clone()), &Polynomial::new(vec![0.0, 0.5])).unwrap();
        assert!(r.op.max_abs_diff(&m.scale_real(0.5)) < 1e-12);
    }

    #[test]
    fn inverse_polynomial_examples() {
        let p = inverse_polynomial(InversionSpec::new(1.0, 1e-3).unwrap());
        assert!((p.eval(1.0) - 0.5).abs() < 1e-3);
        assert!(p.degree < 40);
        let spec = InversionSpec::new(10.0, 1e-6).unwrap();
        let p = inverse_polynomial(spec);
        let mut worst = 0.0f64;
        for k in 0..1000 {
            let x = 0.1 + 0.9 * k as f64 / 999.0;
            let target = 1.0 / (20.0 * x);
            worst = worst.max((p.eval(x) - target).abs() / target);
        }
        assert!(worst <= 1e-6, "relative error {worst}");
        assert!(p.is_odd());
        for &x in &[0.13, 0.5, 0.77] {
            assert_eq!(p.eval(-x), -p.eval(x));
        }
        assert!(p.degree as f64 <= inverse_degree_bound(spec));
    }

    #[test]
    fn invert_examples() {
        let a = enc(d(&[0.5, 0.5]));
        let r = invert(&a, 2.0, 1e-6).unwrap();
        assert!(r.op.max_abs_diff(&d(&[0.5, 0.5])) < 1e-6);
        let kappa = 8.0;
        let r = invert(&enc(d(&[1.0, 1.0 / kappa])), kappa, 1e-6).unwrap();
        let expect = d(&[1.0, kappa]).scale_real(1.0 / (2.0 * kappa));
        assert!(r.op.max_abs_diff(&expect) < 1e-6);
        r.check_norm().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = crate::matrix_core::qft::<f64>(4).unwrap();
        let diag: Vec<f64> = (0..4).map(|_| rng.gen_range(0.25..1.0)).collect();
        let m = &(&q * &d(&diag)) * &q.adjoint();
        let r = invert(&enc(m.clone()), 4.0, 1e-6).unwrap();
        let prod = &r.op * &m;
        assert!(prod.max_abs_diff(&CMatrix::identity(4).scale_real(1.0 / 8.0)) < 1e-6);
        assert!(invert(&enc(d(&[1.0, 0.01])), 4.0, 1e-6).is_err());
    }

    #[test]
    fn invert_non_hermitian() {
        let m = CMatrix::from_real(2, 2, &[0.6, 0.3, -0.1, 0.5]);
        let s = singular_values(&m).unwrap();
        let kappa = 1.0 / s[1] + 0.1;
        let r = invert(&enc(m.clone()), kappa, 1e-7).unwrap();
        let inv = crate::matrix_core::inverse(&m).unwrap().scale_real(1.0 / (2.0 * kappa));
        assert!(r.op.max_abs_diff(&inv) < 1e-7);
    }

    #[test]
    fn fractional_power_examples() {
        let r = fractional_power(&enc(CMatrix::identity(2)), 0.3, 1e-6, 2.0).unwrap();
        assert!(r.op.max_abs_diff(&CMatrix::identity(2).scale_real(0.5)) < 1e-6);
        let r = fractional_power(&enc(d(&[0.25, 1.0])), 0.5, 1e-6, 4.0).unwrap();
        assert!(r.op.max_abs_diff(&d(&[0.25, 0.5])) < 1e-6);
        let xs = [0.3, -0.2, 0.1, -0.4];
        let shifted: Vec<f64> = xs.iter().map(|x: &f64| 0.5 * (1.0 + x.powi(2))).collect();
        let r = fractional_power(&enc(d(&shifted)), 0.5, 1e-7, 4.0).unwrap();
        for (k, s) in shifted.iter().enumerate() {
            assert!((r.op.get(k, k).re - 0.5 * s.sqrt()).abs() < 1e-7);
        }
        assert!(fractional_power(&enc(d(&[0.1, 1.0])), 0.5, 1e-6, 4.0).is_err());
    }

    #[test]
    fn fractional_power_composes() {
        let vals = [0.3, 0.55, 0.9, 1.0];
        let (c1, c2) = (0.5, 0.4);
        let first = fractional_power(&enc(d(&vals)), c1, 1e-8, 4.0).unwrap();
        let undo_half = BlockEncoding::new(first.op.scale_real(2.0), 1.0, 0, 0.0, first.cost).unwrap();
        let second = fractional_power(&undo_half, c2, 1e-8, 4.0).unwrap();
        let direct = fractional_power(&enc(d(&vals)), c1 * c2, 1e-8, 4.0).unwrap();
        assert!(second.op.max_abs_diff(&direct.op) < 1e-7);
    }

    #[test]
    fn polynomial_json_roundtrip() {
        let p = Polynomial::new(vec![0.1, 0.0, -0.2]);
        let q = Polynomial::from_json(&p.to_json()).unwrap();
        assert_eq!(p, q);
    }
}
