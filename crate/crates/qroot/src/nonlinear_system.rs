//! Nonlinear algebraic systems `F(x) = 0` in three polynomial families,
//! with analytic Jacobians and classical Newton and Levenberg-Marquardt
//! reference solvers.
//!
//! Coefficients are indexed `a[j][i][k]`: equation `j`, power or layer
//! `i + 1`, variable `k`. Each equation also carries a constant `c_j` so
//! affine maps `Ax − b` are expressible.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix_core::{solve_real, MatrixError};
use crate::CMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("coordinate x[{index}] = {value} lies outside [-1/2, 1/2]")]
    Domain { index: usize, value: f64 },
    #[error("|f_{index}| = {value} exceeds 1/2")]
    ValueBound { index: usize, value: f64 },
    #[error("Jacobian is singular at iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error("malformed family: {0}")]
    Shape(String),
    #[error("equation index {0} out of range")]
    Equation(usize),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

pub type SystemResult<T> = Result<T, SystemError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyKind {
    /// `Σ_i Σ_k a_{ik} x_k^i`
    SumOfPowers,
    /// `Σ_i (Σ_k a_{ik} x_k)^i`
    PowerOfSums,
    /// `Π_i (Σ_k a_{ik} x_k + b_i)^i`
    ProductOfAffinePowers,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionFamily {
    pub kind: FamilyKind,
    #[serde(rename = "K")]
    pub k: usize,
    pub n: usize,
    pub a: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub b: Vec<f64>,
    #[serde(default)]
    pub c: Vec<f64>,
    #[serde(default)]
    pub shared_form: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianBound {
    pub m_grad: f64,
    pub lambda: f64,
}

/// Iterates of a reference solver, `iterates[0] = x0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub iterates: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    /// First iteration whose iterate left `[−1/2, 1/2]^n`, if any.
    pub domain_escape: Option<usize>,
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn check_domain(x: &[f64]) -> SystemResult<()> {
    match x.iter().position(|v| !(v.abs() <= 0.5 + 1e-12)) {
        Some(index) => Err(SystemError::Domain { index, value: x[index] }),
        None => Ok(()),
    }
}

/// `⌈log₂ log₂(1/eps)⌉ + 2`.
pub fn default_iterations(eps: f64) -> usize {
    ((1.0 / eps).log2().log2().ceil().max(0.0) as usize) + 2
}

impl FunctionFamily {
    pub fn new(
        kind: FamilyKind,
        a: Vec<Vec<Vec<f64>>>,
        b: Vec<f64>,
        c: Vec<f64>,
        shared_form: bool,
    ) -> SystemResult<Self> {
        let n = a.len();
        let k = a.first().map_or(0, |e| e.len());
        let f = Self { kind, k, n, a, b, c, shared_form };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> SystemResult<()> {
        if self.n == 0 || self.k == 0 {
            return Err(SystemError::Shape("need n ≥ 1 and K ≥ 1".into()));
        }
        if self.a.len() != self.n {
            return Err(SystemError::Shape(format!("{} equations for n = {}", self.a.len(), self.n)));
        }
        for (j, eq) in self.a.iter().enumerate() {
            if eq.len() != self.k {
                return Err(SystemError::Shape(format!("equation {j} has {} layers, K = {}", eq.len(), self.k)));
            }
            if let Some(row) = eq.iter().find(|r| r.len() != self.n) {
                return Err(SystemError::Shape(format!("equation {j} has a layer of length {}", row.len())));
            }
            if eq.iter().flatten().any(|v| !v.is_finite()) {
                return Err(SystemError::Shape(format!("equation {j} has non-finite coefficients")));
            }
        }
        if self.kind == FamilyKind::ProductOfAffinePowers && self.b.len() != self.k {
            return Err(SystemError::Shape(format!("{} offsets b for K = {}", self.b.len(), self.k)));
        }
        if !self.c.is_empty() && self.c.len() != self.n {
            return Err(SystemError::Shape(format!("{} constants c for n = {}", self.c.len(), self.n)));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> SystemResult<Self> {
        let f: FunctionFamily = serde_json::from_str(s).map_err(|e| SystemError::Shape(e.to_string()))?;
        f.validate()?;
        Ok(f)
    }

    /// `F(x) = A x − rhs` with `A` given row-major.
    pub fn affine(a: &[Vec<f64>], rhs: &[f64]) -> SystemResult<Self> {
        let coeffs = a.iter().map(|row| vec![row.clone()]).collect();
        Self::new(FamilyKind::SumOfPowers, coeffs, vec![], rhs.iter().map(|v| -v).collect(), true)
    }

    fn offset(&self, j: usize) -> f64 {
        self.c.get(j).copied().unwrap_or(0.0)
    }

    fn layer_sum(&self, j: usize, i: usize, x: &[f64]) -> f64 {
        self.a[j][i].iter().zip(x).map(|(a, v)| a * v).sum()
    }

    fn eval_eq(&self, j: usize, x: &[f64]) -> f64 {
        let eq = &self.a[j];
        let core: f64 = match self.kind {
            FamilyKind::SumOfPowers => eq
                .iter()
                .enumerate()
                .map(|(i, row)| row.iter().zip(x).map(|(a, v)| a * v.powi(i as i32 + 1)).sum::<f64>())
                .sum(),
            FamilyKind::PowerOfSums => (0..self.k).map(|i| self.layer_sum(j, i, x).powi(i as i32 + 1)).sum(),
            FamilyKind::ProductOfAffinePowers => {
                (0..self.k).map(|i| (self.layer_sum(j, i, x) + self.b[i]).powi(i as i32 + 1)).product()
            }
        };
        core + self.offset(j)
    }

    /// Evaluation without domain or value checks.
    pub fn eval_raw(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|j| self.eval_eq(j, x)).collect()
    }

    /// Evaluation on the domain `[−1/2, 1/2]^n`.
    pub fn eval(&self, x: &[f64]) -> SystemResult<Vec<f64>> {
        check_domain(x)?;
        Ok(self.eval_raw(x))
    }

    /// As [`FunctionFamily::eval`], additionally enforcing `|f_j| ≤ 1/2`.
    pub fn eval_bounded(&self, x: &[f64]) -> SystemResult<Vec<f64>> {
        let v = self.eval(x)?;
        match v.iter().position(|f| f.abs() > 0.5 + 1e-12) {
            Some(index) => Err(SystemError::ValueBound { index, value: v[index] }),
            None => Ok(v),
        }
    }

    pub fn gradient_raw(&self, j: usize, x: &[f64]) -> Vec<f64> {
        let eq = &self.a[j];
        let n = self.n;
        match self.kind {
            FamilyKind::SumOfPowers => (0..n)
                .map(|k| (0..self.k).map(|i| eq[i][k] * (i + 1) as f64 * x[k].powi(i as i32)).sum())
                .collect(),
            FamilyKind::PowerOfSums => {
                let w: Vec<f64> =
                    (0..self.k).map(|i| (i + 1) as f64 * self.layer_sum(j, i, x).powi(i as i32)).collect();
                (0..n).map(|k| (0..self.k).map(|i| w[i] * eq[i][k]).sum()).collect()
            }
            FamilyKind::ProductOfAffinePowers => {
                let g: Vec<f64> = (0..self.k).map(|i| self.layer_sum(j, i, x) + self.b[i]).collect();
                // d/dg_i of Π g_l^l, using the product of the other factors so
                // a vanishing factor needs no division
                let w: Vec<f64> = (0..self.k)
                    .map(|i| {
                        let others: f64 =
                            (0..self.k).filter(|&l| l != i).map(|l| g[l].powi(l as i32 + 1)).product();
                        (i + 1) as f64 * g[i].powi(i as i32) * others
                    })
                    .collect();
                (0..n).map(|k| (0..self.k).map(|i| w[i] * eq[i][k]).sum()).collect()
            }
        }
    }

    pub fn gradient(&self, x: &[f64], j: usize) -> SystemResult<Vec<f64>> {
        check_domain(x)?;
        if j >= self.n {
            return Err(SystemError::Equation(j));
        }
        Ok(self.gradient_raw(j, x))
    }

    pub fn jacobian_rows(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (0..self.n).map(|j| self.gradient_raw(j, x)).collect()
    }

    pub fn jacobian(&self, x: &[f64]) -> SystemResult<CMatrix> {
        check_domain(x)?;
        Ok(CMatrix::from_real_rows(&self.jacobian_rows(x)))
    }

    /// Bound `M_grad ≥ max_j ‖∇f_j(x)‖_∞` over the domain.
    pub fn gradient_bound(&self) -> f64 {
        let half_sum = |row: &[f64]| 0.5 * row.iter().map(|a| a.abs()).sum::<f64>();
        let mut m = 0.0f64;
        for eq in &self.a {
            for k in 0..self.n {
                let v: f64 = match self.kind {
                    FamilyKind::SumOfPowers => {
                        (0..self.k).map(|i| (i + 1) as f64 * eq[i][k].abs() * 0.5f64.powi(i as i32)).sum()
                    }
                    FamilyKind::PowerOfSums => (0..self.k)
                        .map(|i| (i + 1) as f64 * half_sum(&eq[i]).powi(i as i32) * eq[i][k].abs())
                        .sum(),
                    FamilyKind::ProductOfAffinePowers => {
                        let g: Vec<f64> = (0..self.k).map(|i| half_sum(&eq[i]) + self.b[i].abs()).collect();
                        (0..self.k)
                            .map(|i| {
                                let others: f64 =
                                    (0..self.k).filter(|&l| l != i).map(|l| g[l].powi(l as i32 + 1)).product();
                                (i + 1) as f64 * g[i].powi(i as i32) * eq[i][k].abs() * others
                            })
                            .sum()
                    }
                };
                m = m.max(v);
            }
        }
        if m > 0.0 {
            m
        } else {
            1.0
        }
    }

    pub fn jacobian_bound(&self, lambda: f64) -> JacobianBound {
        JacobianBound { m_grad: self.gradient_bound(), lambda }
    }
}

/// `J(x)⁻¹ F(x)` by a dense solve.
pub fn newton_delta(f: &FunctionFamily, x: &[f64], iteration: usize) -> SystemResult<Vec<f64>> {
    let j = f.jacobian_rows(x);
    let fx = f.eval_raw(x);
    solve_real(&j, &fx).map_err(|e| match e {
        MatrixError::Singular(_) => SystemError::SingularJacobian { iteration },
        other => other.into(),
    })
}

/// `x_{t+1} = x_t − J(x_t)⁻¹ F(x_t)` by dense solves.
pub fn classical_newton(f: &FunctionFamily, x0: &[f64], t: usize) -> SystemResult<Trace> {
    check_domain(x0)?;
    let mut iterates = vec![x0.to_vec()];
    let mut residuals = vec![norm2(&f.eval_raw(x0))];
    let mut escape = None;
    for it in 0..t {
        let x = iterates.last().unwrap();
        let d = newton_delta(f, x, it)?;
        let next: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - b).collect();
        if escape.is_none() && check_domain(&next).is_err() {
            escape = Some(it + 1);
        }
        residuals.push(norm2(&f.eval_raw(&next)));
        iterates.push(next);
    }
    Ok(Trace { iterates, residuals, domain_escape: escape })
}

/// One Levenberg-Marquardt step `Δ` solving `(JᵀJ + λI)Δ = −JᵀF`.
pub fn lm_delta(f: &FunctionFamily, x: &[f64], lambda: f64) -> SystemResult<Vec<f64>> {
    let j = f.jacobian_rows(x);
    let fx = f.eval_raw(x);
    let n = f.n;
    let mut normal = vec![vec![0.0; n]; n];
    let mut rhs = vec![0.0; n];
    for r in 0..n {
        for c in 0..n {
            normal[r][c] = (0..n).map(|q| j[q][r] * j[q][c]).sum::<f64>() + if r == c { lambda } else { 0.0 };
        }
        rhs[r] = -(0..n).map(|q| j[q][r] * fx[q]).sum::<f64>();
    }
    Ok(solve_real(&normal, &rhs)?)
}

/// Levenberg-Marquardt iterates `x ← x + Δ`.
pub fn classical_lm(f: &FunctionFamily, x0: &[f64], lambda: f64, t: usize) -> SystemResult<Trace> {
    check_domain(x0)?;
    let mut iterates = vec![x0.to_vec()];
    let mut residuals = vec![norm2(&f.eval_raw(x0))];
    let mut escape = None;
    for it in 0..t {
        let x = iterates.last().unwrap();
        let d = lm_delta(f, x, lambda).map_err(|e| match e {
            SystemError::Matrix(MatrixError::Singular(_)) => SystemError::SingularJacobian { iteration: it },
            other => other,
        })?;
        let next: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
        if escape.is_none() && check_domain(&next).is_err() {
            escape = Some(it + 1);
        }
        residuals.push(norm2(&f.eval_raw(&next)));
        iterates.push(next);
    }
    Ok(Trace { iterates, residuals, domain_escape: escape })
}

/// Initial guess uniform on `[−0.4, 0.4]^n`.
pub fn random_initial<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-0.4..0.4)).collect()
}

/// Well-conditioned shared-form `SumOfPowers` system of degree 2 with a known
/// root `x*`. Entry bounds keep `M_grad` and `σ_min(J)` independent of `n`
/// and `|f_j| ≤ 1/2` on the domain. Returns `(family, x*)`.
pub fn random_shared_form<R: Rng>(n: usize, rng: &mut R) -> (FunctionFamily, Vec<f64>) {
    let nf = n as f64;
    let a: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|j| {
            let lin = (0..n)
                .map(|k| rng.gen_range(-0.1..0.1) / nf + if j == k { 0.3 } else { 0.0 })
                .collect();
            let quad = (0..n)
                .map(|k| rng.gen_range(-0.05..0.05) / nf + if j == k { rng.gen_range(-0.2..0.2) } else { 0.0 })
                .collect();
            vec![lin, quad]
        })
        .collect();
    let root: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect();
    let mut fam = FunctionFamily::new(FamilyKind::SumOfPowers, a, vec![], vec![0.0; n], true).unwrap();
    let homog = fam.eval_raw(&root);
    fam.c = homog.iter().map(|v| -v).collect();
    (fam, root)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_family(n: usize) -> FunctionFamily {
        let a = (0..n).map(|j| vec![(0..n).map(|k| if j == k { 1.0 } else { 0.0 }).collect()]).collect();
        FunctionFamily::new(FamilyKind::SumOfPowers, a, vec![], vec![], true).unwrap()
    }

    fn spring_pair() -> FunctionFamily {
        FunctionFamily::new(
            FamilyKind::SumOfPowers,
            vec![vec![vec![-2.0, 2.0]], vec![vec![2.0, -2.0]]],
            vec![],
            vec![],
            true,
        )
        .unwrap()
    }

    fn central_difference(f: &FunctionFamily, x: &[f64], j: usize) -> Vec<f64> {
        let h = 1e-6;
        (0..f.n)
            .map(|k| {
                let mut p = x.to_vec();
                let mut m = x.to_vec();
                p[k] += h;
                m[k] -= h;
                (f.eval_raw(&p)[j] - f.eval_raw(&m)[j]) / (2.0 * h)
            })
            .collect()
    }

    pub(crate) fn random_family<R: Rng>(kind: FamilyKind, n: usize, k: usize, rng: &mut R) -> FunctionFamily {
        let a = (0..n)
            .map(|_| (0..k).map(|_| (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect()).collect())
            .collect();
        let b = (0..k).map(|_| rng.gen_range(-0.5..0.5)).collect();
        FunctionFamily::new(kind, a, b, vec![], false).unwrap()
    }

    #[test]
    fn eval_examples() {
        let f = identity_family(3);
        assert_eq!(f.eval(&[0.1, -0.2, 0.3]).unwrap(), vec![0.1, -0.2, 0.3]);
        let s = spring_pair();
        let v = s.eval(&[0.1, 0.3]).unwrap();
        assert!((v[0] - 2.0 * (0.3 - 0.1)).abs() < 1e-15 && (v[1] + 0.4).abs() < 1e-15);
        let p = FunctionFamily::new(
            FamilyKind::ProductOfAffinePowers,
            vec![vec![vec![0.0; 2]; 3]; 2],
            vec![1.0; 3],
            vec![],
            false,
        )
        .unwrap();
        assert_eq!(p.eval(&[0.2, -0.1]).unwrap(), vec![1.0, 1.0]);
        assert!(matches!(p.eval_bounded(&[0.2, -0.1]), Err(SystemError::ValueBound { .. })));
        assert!(matches!(f.eval(&[0.6, 0.0, 0.0]), Err(SystemError::Domain { index: 0, .. })));
    }

    #[test]
    fn gradient_examples() {
        let f = identity_family(2);
        assert_eq!(f.gradient(&[0.3, 0.1], 1).unwrap(), vec![0.0, 1.0]);
        let q = FunctionFamily::new(FamilyKind::SumOfPowers, vec![vec![vec![1.0], vec![1.0]]], vec![], vec![], true)
            .unwrap();
        assert!((q.gradient(&[0.25], 0).unwrap()[0] - 1.5).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for kind in [FamilyKind::SumOfPowers, FamilyKind::PowerOfSums, FamilyKind::ProductOfAffinePowers] {
            for _ in 0..50 {
                let f = random_family(kind, 3, 3, &mut rng);
                let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();
                for j in 0..3 {
                    let g = f.gradient(&x, j).unwrap();
                    let fd = central_difference(&f, &x, j);
                    for (a, b) in g.iter().zip(&fd) {
                        assert!((a - b).abs() < 1e-7, "{kind:?}: {a} vs {b}");
                    }
                    assert!(g.iter().all(|v| v.abs() <= f.gradient_bound() + 1e-12));
                }
            }
        }
    }

    #[test]
    fn product_gradient_with_vanishing_factor() {
        // layer 1 vanishes at x = (0.25): g_1 = x - 0.25
        let f = FunctionFamily::new(
            FamilyKind::ProductOfAffinePowers,
            vec![vec![vec![1.0], vec![1.0]]],
            vec![-0.25, 0.1],
            vec![],
            false,
        )
        .unwrap();
        let g = f.gradient(&[0.25], 0).unwrap()[0];
        assert!((g - 0.35f64.powi(2)).abs() < 1e-15);
    }

    #[test]
    fn jacobian_examples() {
        let s = spring_pair();
        let j = s.jacobian(&[0.1, -0.1]).unwrap();
        assert_eq!(j, CMatrix::from_real(2, 2, &[-2.0, 2.0, 2.0, -2.0]));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (f, _) = random_shared_form(6, &mut rng);
        let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.4..0.4)).collect();
        let jac = f.jacobian(&x).unwrap();
        for r in 0..6 {
            let fd = central_difference(&f, &x, r);
            for (c, v) in fd.iter().enumerate() {
                assert!((jac.get(r, c).re - v).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn newton_examples() {
        let a = vec![vec![0.4, 0.1], vec![-0.1, 0.3]];
        let f = FunctionFamily::affine(&a, &[0.05, -0.02]).unwrap();
        let tr = classical_newton(&f, &[0.0, 0.0], 1).unwrap();
        assert!(tr.residuals[1] < 1e-15);

        let q = FunctionFamily::new(FamilyKind::SumOfPowers, vec![vec![vec![0.0], vec![1.0]]], vec![], vec![-0.09], true)
            .unwrap();
        let tr = classical_newton(&q, &[0.25], 5).unwrap();
        // hand iteration x ← x − (x² − 0.09)/(2x)
        let mut x = 0.25f64;
        for t in 1..=5 {
            x -= (x * x - 0.09) / (2.0 * x);
            assert!((tr.iterates[t][0] - x).abs() < 1e-15);
        }
        assert!((tr.iterates[5][0] - 0.3).abs() < 1e-15);
        let errs: Vec<f64> = tr.iterates.iter().map(|v| (v[0] - 0.3).abs()).collect();
        assert!(errs[2] < errs[1] * errs[1] * 10.0);
        assert!(matches!(
            classical_newton(&spring_pair(), &[0.1, 0.2], 1),
            Err(SystemError::SingularJacobian { iteration: 0 })
        ));
    }

    #[test]
    fn default_iteration_count() {
        assert_eq!(default_iterations(1e-6), 5 + 2);
        assert_eq!(default_iterations(0.25), 1 + 2);
    }

    #[test]
    fn lm_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (f, _) = random_shared_form(4, &mut rng);
        let x = random_initial(4, &mut rng);
        let lam = 1e6;
        let d = lm_delta(&f, &x, lam).unwrap();
        let j = f.jacobian_rows(&x);
        let fx = f.eval_raw(&x);
        let jtf: Vec<f64> = (0..4).map(|c| (0..4).map(|r| j[r][c] * fx[r]).sum()).collect();
        assert!(norm2(&d) <= norm2(&jtf) / lam + 1e-18);
        let d0 = lm_delta(&f, &x, 0.0).unwrap();
        let dn = newton_delta(&f, &x, 0).unwrap();
        for (a, b) in d0.iter().zip(&dn) {
            assert!((a + b).abs() < 1e-12);
        }
        let tr = classical_lm(&spring_pair(), &[0.1, -0.1], 0.1, 5).unwrap();
        assert!(tr.residuals.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn json_roundtrip() {
        let (f, _) = random_shared_form(3, &mut ChaCha8Rng::seed_from_u64(1));
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("\"K\":2"));
        let back = FunctionFamily::from_json(&s).unwrap();
        assert_eq!((back.kind, back.k, back.n), (f.kind, f.k, f.n));
        let x = [0.1, -0.2, 0.3];
        for (u, v) in back.eval_raw(&x).iter().zip(f.eval_raw(&x)) {
            assert!((u - v).abs() < 1e-15);
        }
        assert!(FunctionFamily::from_json(r#"{"kind":"SumOfPowers","K":1,"n":2,"a":[[[1.0]]]}"#).is_err());
    }
}
