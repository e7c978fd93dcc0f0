//! Circulant matrices, their Fourier-diagonalized block encodings, central
//! finite-difference stencils and the periodic Poisson solve built on them.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::block_encoding::{BlockEncoding, BlockError};
use crate::matrix_core::{is_power_of_two, singular_values, solve_real};
use crate::poly_transform::invert;
use crate::spectral_probe::condition_number;
use crate::{CMatrix, CVector, C64};

/// Largest block condition number the Poisson path will invert.
pub const MAX_POISSON_KAPPA: f64 = 1e5;

#[derive(Debug, Error)]
pub enum CirculantError {
    #[error("circulant size must be a power of two, got {0}")]
    Size(usize),
    #[error("all eigenvalues vanish; the zero circulant has no encoding")]
    Zero,
    #[error("stencil order must be at least 1")]
    Order,
    #[error("right-hand side has mean {0:e}; the periodic problem needs a mean-free source")]
    NotMeanFree(f64),
    #[error("condition number {kappa} exceeds the inversion budget {budget}")]
    Kappa { kappa: f64, budget: f64 },
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Block(#[from] BlockError),
}

pub type CirculantResult<T> = Result<T, CirculantError>;

/// Circulant `C[j][k] = c[(k − j) mod n]`, so `first_row` is row 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CirculantSpec {
    pub first_row: Vec<C64>,
}

impl CirculantSpec {
    pub fn new(first_row: Vec<C64>) -> CirculantResult<Self> {
        let s = Self { first_row };
        s.validate()?;
        Ok(s)
    }

    pub fn from_real(row: &[f64]) -> CirculantResult<Self> {
        Self::new(row.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn validate(&self) -> CirculantResult<()> {
        let n = self.first_row.len();
        if !is_power_of_two(n) {
            return Err(CirculantError::Size(n));
        }
        if self.first_row.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(CirculantError::Input("non-finite entry in first row".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.first_row.len()
    }

    pub fn dense(&self) -> CMatrix {
        let n = self.n();
        CMatrix::from_fn(n, n, |j, k| self.first_row[(k + n - j) % n])
    }

    /// First row shifted right by `s` places.
    pub fn shifted(&self, s: usize) -> Self {
        let n = self.n();
        Self { first_row: (0..n).map(|k| self.first_row[(k + n - s % n) % n]).collect() }
    }
}

/// `λ_k = Σ_j c_j ω^{jk}` with `ω = exp(−2πi/n)`; `λ_k` belongs to column `k`
/// of the Fourier matrix.
pub fn circulant_eigenvalues(spec: &CirculantSpec) -> Vec<C64> {
    let n = spec.n();
    (0..n)
        .map(|k| {
            spec.first_row
                .iter()
                .enumerate()
                .map(|(j, c)| c * C64::from_polar(1.0, -2.0 * PI * ((j * k) % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

/// Encoding of `C = F diag(λ) F†`. The eigenvalue vector is normalized to a
/// unit state, so `alpha = ‖λ‖₂`.
pub fn circulant_encode(spec: &CirculantSpec) -> CirculantResult<BlockEncoding> {
    spec.validate()?;
    let lambda = circulant_eigenvalues(spec);
    let norm = lambda.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 || lambda.iter().all(|z| z.norm() <= 1e-14 * norm.max(1.0)) {
        return Err(CirculantError::Zero);
    }
    let psi = CVector::new(lambda.iter().map(|z| z / norm).collect());
    let d = BlockEncoding::from_state_diag(&psi)?;
    let n = spec.n();
    let fd = BlockEncoding::product(&BlockEncoding::qft(n)?, &d)?;
    let c = BlockEncoding::product(&fd, &BlockEncoding::qft_adjoint(n)?)?;
    Ok(c.relabel(norm))
}

/// Symmetric central stencil for the second derivative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StencilSpec {
    pub half_width: usize,
    /// `coefficients[half_width + j] = r_j` for `j ∈ [−half_width, half_width]`.
    pub coefficients: Vec<f64>,
}

impl StencilSpec {
    pub fn r(&self, j: isize) -> f64 {
        let m = self.half_width as isize;
        if j.abs() > m {
            0.0
        } else {
            self.coefficients[(j + m) as usize]
        }
    }

    /// Row 0 of the periodic second-difference circulant on `n` points with
    /// spacing `dx`.
    pub fn circulant(&self, n: usize, dx: f64) -> CirculantResult<CirculantSpec> {
        if n < 2 * self.half_width + 1 {
            return Err(CirculantError::Input(format!("{n} points cannot hold a width-{} stencil", self.half_width)));
        }
        let mut row = vec![C64::new(0.0, 0.0); n];
        let m = self.half_width as isize;
        for j in -m..=m {
            row[j.rem_euclid(n as isize) as usize] += C64::new(self.r(j) / (dx * dx), 0.0);
        }
        CirculantSpec::new(row)
    }

    /// `Σ_j r_j f(x + j·dx) / dx²`.
    pub fn apply(&self, f: impl Fn(f64) -> f64, x: f64, dx: f64) -> f64 {
        let m = self.half_width as isize;
        (-m..=m).map(|j| self.r(j) * f(x + j as f64 * dx)).sum::<f64>() / (dx * dx)
    }
}

/// `r_j` for `j ≥ 1` as exact fractions, followed by `r_0`.
pub fn fd_coefficients_exact(order: usize) -> CirculantResult<(Vec<Ratio<i128>>, Ratio<i128>)> {
    if order == 0 {
        return Err(CirculantError::Order);
    }
    if order > 12 {
        return Err(CirculantError::Input(format!("exact coefficients overflow beyond order 12, got {order}")));
    }
    let m = order as i128;
    let side: Vec<Ratio<i128>> = (1..=m)
        .map(|j| {
            // (m!)² / ((m−j)!(m+j)!) = Π_{i<j} (m−i)/(m+1+i)
            let ratio = (0..j).fold(Ratio::from_integer(1), |acc, i| acc * Ratio::new(m - i, m + 1 + i));
            let sign = if j % 2 == 1 { 2 } else { -2 };
            ratio * Ratio::new(sign, j * j)
        })
        .collect();
    let r0 = side.iter().fold(Ratio::from_integer(0), |acc, r| acc + *r) * Ratio::from_integer(-2);
    Ok((side, r0))
}

pub fn fd_coefficients(order: usize) -> CirculantResult<StencilSpec> {
    let (side, r0) = fd_coefficients_exact(order)?;
    let as_f = |r: &Ratio<i128>| *r.numer() as f64 / *r.denom() as f64;
    let mut coefficients: Vec<f64> = side.iter().rev().map(as_f).collect();
    coefficients.push(as_f(&r0));
    coefficients.extend(side.iter().map(as_f));
    Ok(StencilSpec { half_width: order, coefficients })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonReport {
    pub n: usize,
    pub dx: f64,
    pub order: usize,
    /// `max|λ| / min_{λ≠0}|λ|` of the stencil circulant on the mean-free space.
    pub kappa_measured: f64,
    /// Condition bound handed to the inversion, relative to the block.
    pub kappa_block: f64,
    pub solution: Vec<f64>,
    pub direct: Vec<f64>,
    pub max_error: f64,
    pub inverse_degree_cost: f64,
    pub ledger_cost: f64,
    /// Modeled cost `n³` of exponentiating and inverting the dense operator.
    pub prior_modeled_cost: f64,
}

/// `κ` of the periodic stencil circulant restricted to the mean-free space.
pub fn mean_free_kappa(spec: &CirculantSpec) -> f64 {
    let lam = circulant_eigenvalues(spec);
    let mags: Vec<f64> = lam.iter().skip(1).map(|z| z.norm()).collect();
    let hi = mags.iter().cloned().fold(0.0, f64::max).max(lam[0].norm());
    let lo = mags.iter().cloned().fold(f64::INFINITY, f64::min);
    hi / lo
}

/// Solves `u'' = g` with periodic boundaries and `Σu = 0`.
///
/// The zero mode of the stencil circulant is lifted to `−min_{k≠0}|λ_k|`,
/// which leaves the mean-free block and its condition number unchanged, and
/// the lifted matrix is inverted. Returns the encoding whose `op` is the
/// inverse of the lifted matrix, and a report holding the solution.
pub fn poisson_periodic_solve(
    g: &[f64],
    dx: f64,
    order: usize,
    eps: f64,
) -> CirculantResult<(BlockEncoding, PoissonReport)> {
    let n = g.len();
    if !is_power_of_two(n) {
        return Err(CirculantError::Size(n));
    }
    if !(dx > 0.0) || !dx.is_finite() {
        return Err(CirculantError::Input(format!("spacing must be positive, got {dx}")));
    }
    let scale = g.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mean = g.iter().sum::<f64>() / n as f64;
    if mean.abs() > 1e-10 * scale {
        return Err(CirculantError::NotMeanFree(mean));
    }
    let stencil = fd_coefficients(order)?;
    let spec = stencil.circulant(n, dx)?;
    let kappa_measured = mean_free_kappa(&spec);
    let lam = circulant_eigenvalues(&spec);
    let lift = lam.iter().skip(1).map(|z| z.norm()).fold(f64::INFINITY, f64::min);

    let c = circulant_encode(&spec)?;
    let ones = BlockEncoding::product(
        &BlockEncoding::product(&BlockEncoding::hadamard(n.trailing_zeros()), &BlockEncoding::projector(0, n)?)?,
        &BlockEncoding::hadamard(n.trailing_zeros()),
    )?;
    let lifted = BlockEncoding::weighted_sum(&[c, ones.relabel(lift)], &[1.0, -1.0])?;
    let cond = condition_number(&lifted, 1e-3, None)?;
    let kappa_block = 1.02 / cond.sigma_min;
    if kappa_block > MAX_POISSON_KAPPA {
        return Err(CirculantError::Kappa { kappa: kappa_block, budget: MAX_POISSON_KAPPA });
    }
    let inv = invert(&lifted, kappa_block, eps)?;
    // op = (lifted/alpha)⁻¹/(2κ) ⇒ lifted⁻¹ = op·2κ/alpha
    let inv = inv.relabel(2.0 * kappa_block / lifted.alpha);
    let gv = CVector::from_real(g);
    let solution: Vec<f64> = inv.op.mul_vec(&gv).map_err(BlockError::from)?.real_parts();

    let dense = spec.dense();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|k| dense.get(j, k).re - lift / n as f64).collect())
        .collect();
    let direct = if g.iter().all(|v| *v == 0.0) {
        vec![0.0; n]
    } else {
        solve_real(&rows, g).map_err(BlockError::from)?
    };
    let max_error = solution.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let report = PoissonReport {
        n,
        dx,
        order,
        kappa_measured,
        kappa_block,
        solution,
        direct,
        max_error,
        inverse_degree_cost: inv.cost.qsvt_degree_total,
        ledger_cost: inv.cost.total() + cond.cost.total(),
        prior_modeled_cost: (n as f64).powi(3),
    };
    Ok((inv, report))
}

/// `σ_max/σ_min` of the dense stencil circulant after dropping its zero mode.
pub fn laplacian_kappa_dense(n: usize, dx: f64, order: usize) -> CirculantResult<f64> {
    let spec = fd_coefficients(order)?.circulant(n, dx)?;
    let sv = singular_values(&spec.dense()).map_err(BlockError::from)?;
    let hi = sv.iter().cloned().fold(0.0, f64::max);
    // the zero mode comes back near 1e-8·hi from the Gram route
    let mut pos: Vec<f64> = sv.into_iter().filter(|s| *s > 1e-6 * hi).collect();
    pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(hi / pos[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix_core::eig_hermitian;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sorted_pairs(v: &[C64]) -> Vec<(f64, f64)> {
        let mut p: Vec<(f64, f64)> = v.iter().map(|z| (z.re, z.im)).collect();
        p.sort_by(|a, b| a.partial_cmp(b).unwrap());
        p
    }

    #[test]
    fn eigenvalue_examples() {
        let id = CirculantSpec::from_real(&[3.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(circulant_eigenvalues(&id).iter().all(|z| (z - 3.0).norm() < 1e-14));

        let diff = CirculantSpec::from_real(&[-1.0, 1.0]).unwrap();
        let got = sorted_pairs(&circulant_eigenvalues(&diff));
        assert!((got[0].0 + 2.0).abs() < 1e-14 && got[1].0.abs() < 1e-14);

        let lap = CirculantSpec::from_real(&[-2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        for (k, z) in circulant_eigenvalues(&lap).iter().enumerate() {
            assert!((z.re - (-2.0 + 2.0 * (2.0 * PI * k as f64 / 8.0).cos())).abs() < 1e-12);
            assert!(z.im.abs() < 1e-12);
        }
    }

    #[test]
    fn eigenvalues_match_dense_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let row: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut sym = row.clone();
        for k in 1..16 {
            sym[k] = 0.5 * (row[k] + row[16 - k]);
        }
        let spec = CirculantSpec::from_real(&sym).unwrap();
        let (ev, _) = eig_hermitian(&spec.dense()).unwrap();
        let mut ours: Vec<f64> = circulant_eigenvalues(&spec).iter().map(|z| z.re).collect();
        ours.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in ours.iter().zip(&ev) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn encode_examples() {
        let id = CirculantSpec::from_real(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        let e = circulant_encode(&id).unwrap();
        assert!(e.op.max_abs_diff(&CMatrix::identity(4)) < 1e-12);
        e.check_norm().unwrap();

        let diff = CirculantSpec::from_real(&[-1.0, 1.0, 0.0, 0.0]).unwrap();
        let e = circulant_encode(&diff).unwrap();
        let mut want = CMatrix::zeros(4, 4);
        for j in 0..4 {
            want.set(j, j, C64::new(-1.0, 0.0));
            want.set(j, (j + 1) % 4, C64::new(1.0, 0.0));
        }
        assert!(e.op.max_abs_diff(&want) < 1e-10);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let row: Vec<f64> = (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let spec = CirculantSpec::from_real(&row).unwrap();
        let e = circulant_encode(&spec).unwrap();
        assert!(e.op.max_abs_diff(&spec.dense()) < 1e-9);
        e.check_norm().unwrap();
    }

    #[test]
    fn zero_circulant_rejected() {
        let z = CirculantSpec::from_real(&[0.0; 4]).unwrap();
        assert!(matches!(circulant_encode(&z), Err(CirculantError::Zero)));
        assert!(matches!(CirculantSpec::from_real(&[1.0; 3]), Err(CirculantError::Size(3))));
    }

    #[test]
    fn depth_is_logarithmic() {
        let depth = |n: usize| {
            let mut row = vec![0.0; n];
            row[0] = 1.0;
            row[1] = 0.5;
            circulant_encode(&CirculantSpec::from_real(&row).unwrap()).unwrap().cost.modeled_depth
        };
        let (d4, d8, d16) = (depth(4), depth(8), depth(16));
        assert!((d8 - d4 - (d16 - d8)).abs() < 1e-12 && d8 > d4);
    }

    #[test]
    fn stencil_examples() {
        let s = fd_coefficients(1).unwrap();
        assert_eq!(s.coefficients, vec![1.0, -2.0, 1.0]);
        let s = fd_coefficients(2).unwrap();
        let want = [-1.0 / 12.0, 4.0 / 3.0, -2.5, 4.0 / 3.0, -1.0 / 12.0];
        for (a, b) in s.coefficients.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(matches!(fd_coefficients(0), Err(CirculantError::Order)));
    }

    #[test]
    fn stencils_sum_to_zero_exactly() {
        for order in 1..=6 {
            let (side, r0) = fd_coefficients_exact(order).unwrap();
            let total = side.iter().fold(r0, |acc, r| acc + *r * Ratio::from_integer(2));
            assert_eq!(total, Ratio::from_integer(0));
        }
    }

    #[test]
    fn stencils_are_exact_on_quadratics() {
        for order in 1..=6 {
            let s = fd_coefficients(order).unwrap();
            let v = s.apply(|x| x * x, 0.3, 0.1);
            assert!((v - 2.0).abs() < 1e-9, "order {order}: {v}");
        }
    }

    #[test]
    fn stencil_error_order() {
        for order in 1..=3 {
            let s = fd_coefficients(order).unwrap();
            let err = |dx: f64| (s.apply(f64::sin, 0.7, dx) + 0.7f64.sin()).abs();
            let slope = (err(0.2) / err(0.1)).log2();
            assert!((slope - 2.0 * order as f64).abs() < 0.3, "order {order}: slope {slope}");
        }
    }

    #[test]
    fn poisson_zero_and_mode() {
        let (_, r) = poisson_periodic_solve(&[0.0; 16], 0.1, 1, 1e-6).unwrap();
        assert!(r.solution.iter().all(|v| v.abs() < 1e-12));

        let n = 16;
        let dx = 2.0 * PI / n as f64;
        let g: Vec<f64> = (0..n).map(|j| (2.0 * PI * 3.0 * j as f64 / n as f64).sin()).collect();
        let (_, r) = poisson_periodic_solve(&g, dx, 1, 1e-8).unwrap();
        let lam = (2.0 * (2.0 * PI * 3.0 / n as f64).cos() - 2.0) / (dx * dx);
        for (u, gj) in r.solution.iter().zip(&g) {
            assert!((u - gj / lam).abs() < 1e-6, "{u} vs {}", gj / lam);
        }
        assert!(r.max_error < 1e-6);
        assert!(r.prior_modeled_cost == 4096.0 && r.ledger_cost > 0.0);
    }

    #[test]
    fn poisson_rejects_bad_input() {
        assert!(matches!(poisson_periodic_solve(&[1.0; 8], 0.1, 1, 1e-6), Err(CirculantError::NotMeanFree(_))));
        assert!(matches!(poisson_periodic_solve(&[0.0; 6], 0.1, 1, 1e-6), Err(CirculantError::Size(6))));
    }

    #[test]
    fn laplacian_kappa_is_quadratic() {
        let ks: Vec<(f64, f64)> =
            [16usize, 32, 64].iter().map(|&n| (n as f64, laplacian_kappa_dense(n, 1.0 / n as f64, 1).unwrap())).collect();
        let c = ks.iter().map(|(n, k)| k / (n * n)).sum::<f64>() / 3.0;
        for (n, k) in &ks {
            let r = k / (c * n * n);
            assert!((0.5..=2.0).contains(&r));
        }
        let spec = fd_coefficients(1).unwrap().circulant(32, 1.0 / 32.0).unwrap();
        assert!((mean_free_kappa(&spec) - ks[1].1).abs() < 1e-6 * ks[1].1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn shift_multiplies_by_permutation(row in proptest::collection::vec(-1.0f64..1.0, 8), s in 0usize..8) {
            prop_assume!(row.iter().any(|v| v.abs() > 1e-3));
            let spec = CirculantSpec::from_real(&row).unwrap();
            let shifted = spec.shifted(s);
            let a = circulant_encode(&spec).unwrap();
            let b = circulant_encode(&shifted).unwrap();
            let mut p = CMatrix::zeros(8, 8);
            for k in 0..8 {
                p.set(k, (k + s) % 8, C64::new(1.0, 0.0));
            }
            prop_assert!(b.op.max_abs_diff(&a.op.matmul(&p).unwrap()) < 1e-10);
            // circulants commute with the cyclic shift
            prop_assert!(a.op.max_abs_diff(&p.matmul(&a.op).unwrap().matmul(&p.adjoint()).unwrap()) < 1e-10);
        }
    }
}
