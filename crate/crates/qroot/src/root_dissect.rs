//! Sign-change detection of a polynomial over a finite grid.
//!
//! The values `f(x_j)` are encoded on the diagonal of a block encoding and
//! their extremes are read off with [`crate::spectral_probe`]. A sign change
//! certifies a root of a continuous `f` between two grid points; the absence
//! of one says nothing about roots of even multiplicity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::block_encoding::{BlockEncoding, BlockError, CostLedger};
use crate::matrix_core::is_power_of_two;
use crate::spectral_probe::{max_via_shift, min_via_shift};

pub const DEFAULT_ZERO_TOL: f64 = 1e-9;
pub const DEFAULT_EPS: f64 = 1e-3;
const AMPLIFY_DELTA: f64 = 0.1;
const AMPLIFY_EPS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DissectError {
    #[error(transparent)]
    Block(#[from] BlockError),
    #[error("empty grid")]
    EmptyGrid,
    #[error("point {index} has {got} coordinates, expected {expected}")]
    Arity { index: usize, got: usize, expected: usize },
    #[error("coordinate {value} of point {index} lies outside [{lo}, {hi}]")]
    Domain { index: usize, value: f64, lo: f64, hi: f64 },
    #[error("|f| = {value} at point {index} exceeds 1/2")]
    ValueBound { index: usize, value: f64 },
    #[error("invalid input: {0}")]
    Parse(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub points: Vec<Vec<f64>>,
}

impl SampleGrid {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self, DissectError> {
        let g = Self { points };
        g.validate()?;
        Ok(g)
    }

    /// `n` evenly spaced points from `lo` to `hi` inclusive.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self, DissectError> {
        let pts = match n {
            0 => vec![],
            1 => vec![vec![lo]],
            _ => (0..n).map(|k| vec![lo + (hi - lo) * k as f64 / (n - 1) as f64]).collect(),
        };
        Self::new(pts)
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn m(&self) -> usize {
        self.points.first().map_or(0, |p| p.len())
    }

    /// Univariate grids live in `[−1/2, 1/2]`, multivariate ones in `[−1, 1]^M`.
    pub fn validate(&self) -> Result<(), DissectError> {
        if self.points.is_empty() {
            return Err(DissectError::EmptyGrid);
        }
        let m = self.m();
        let (lo, hi) = if m == 1 { (-0.5, 0.5) } else { (-1.0, 1.0) };
        for (index, p) in self.points.iter().enumerate() {
            if p.len() != m || m == 0 {
                return Err(DissectError::Arity { index, got: p.len(), expected: m.max(1) });
            }
            if let Some(&value) = p.iter().find(|v| !(**v >= lo - 1e-12 && **v <= hi + 1e-12)) {
                return Err(DissectError::Domain { index, value, lo, hi });
            }
        }
        Ok(())
    }

    /// Pads to a power of two by repeating the last point.
    pub fn padded(&self) -> Self {
        let mut pts = self.points.clone();
        let n = pts.len().max(1).next_power_of_two();
        let last = pts.last().cloned().unwrap_or_default();
        pts.resize(n, last);
        Self { points: pts }
    }

    fn coordinate(&self, k: usize) -> Vec<f64> {
        self.points.iter().map(|p| p[k]).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub a: f64,
    pub k: Vec<u32>,
}

/// `f(x) = Σ_k a_k Π_m x_m^{k_m}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultivariatePolynomial {
    #[serde(rename = "M")]
    pub m: usize,
    pub terms: Vec<Term>,
}

impl MultivariatePolynomial {
    pub fn new(m: usize, terms: Vec<Term>) -> Result<Self, DissectError> {
        for t in &terms {
            if t.k.len() != m {
                return Err(DissectError::Parse(format!("term has {} exponents, expected {m}", t.k.len())));
            }
            if !t.a.is_finite() {
                return Err(DissectError::Parse("non-finite coefficient".into()));
            }
        }
        Ok(Self { m, terms })
    }

    /// Univariate polynomial from power-basis coefficients `c_0, c_1, …`.
    pub fn univariate(coeffs: &[f64]) -> Self {
        let terms = coeffs
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != 0.0)
            .map(|(i, &a)| Term { a, k: vec![i as u32] })
            .collect();
        Self { m: 1, terms }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.a * t.k.iter().zip(x).map(|(&e, &v)| v.powi(e as i32)).product::<f64>())
            .sum()
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.k.iter().sum::<u32>()).max().unwrap_or(0)
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { m: self.m, terms: self.terms.iter().map(|t| Term { a: t.a * s, k: t.k.clone() }).collect() }
    }

    pub fn coefficient_l1(&self) -> f64 {
        self.terms.iter().map(|t| t.a.abs()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    SignChange,
    AllPositive,
    AllNegative,
    GridRoot,
}

impl Verdict {
    pub fn from_extremes(min: f64, max: f64, zero_tol: f64) -> Self {
        if min < -zero_tol && max > zero_tol {
            Verdict::SignChange
        } else if min.abs() <= zero_tol || max.abs() <= zero_tol {
            Verdict::GridRoot
        } else if min > zero_tol {
            Verdict::AllPositive
        } else {
            Verdict::AllNegative
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissectionReport {
    pub min_est: f64,
    pub max_est: f64,
    pub eps: f64,
    pub zero_tol: f64,
    /// Half-width of the uncertainty on `min_est` and `max_est`.
    pub resolution: f64,
    pub verdict: Verdict,
    pub degenerate_flag: bool,
    /// Factor `Σ|a_k|` divided out before encoding (1 when not needed).
    pub normalization: f64,
    pub n: usize,
    pub cost: CostLedger,
}

/// Encoding of `⊕_j f(x_j)/s` on the padded grid, where `s` is returned
/// alongside (`s = Σ|a_k|` when some `|a_k| > 1`, else 1).
pub fn encode_grid_function(
    grid: &SampleGrid,
    f: &MultivariatePolynomial,
) -> Result<(BlockEncoding, f64), DissectError> {
    grid.validate()?;
    if grid.m() != f.m {
        return Err(DissectError::Arity { index: 0, got: grid.m(), expected: f.m });
    }
    for (index, p) in grid.points.iter().enumerate() {
        let value = f.eval(p);
        if value.abs() > 0.5 + 1e-12 {
            return Err(DissectError::ValueBound { index, value });
        }
    }
    let g = grid.padded();
    let n = g.n();
    debug_assert!(is_power_of_two(n));
    let s = if f.terms.iter().any(|t| t.a.abs() > 1.0) { f.coefficient_l1() } else { 1.0 };
    let loaders: Vec<BlockEncoding> = (0..f.m)
        .map(|k| BlockEncoding::diagonal_loader(&g.coordinate(k)))
        .collect::<Result<_, _>>()?;

    let mut terms = Vec::new();
    let mut signs = Vec::new();
    for t in f.terms.iter().filter(|t| t.a != 0.0) {
        let mut mono: Option<BlockEncoding> = None;
        for (var, &e) in t.k.iter().enumerate() {
            for _ in 0..e {
                mono = Some(match mono {
                    None => loaders[var].clone(),
                    Some(acc) => BlockEncoding::product(&acc, &loaders[var])?,
                });
            }
        }
        let mono = mono.unwrap_or_else(|| BlockEncoding::identity(n));
        let a = t.a / s;
        let term = if a.abs() < 1.0 { mono.scale_down(1.0 / a.abs())? } else { mono };
        terms.push(term);
        signs.push(a.signum());
    }
    if terms.is_empty() {
        let zero = BlockEncoding::new(crate::CMatrix::zeros(n, n), 1.0, 0, 0.0, CostLedger::zero())?;
        return Ok((zero, s));
    }
    let k = terms.len() as f64;
    let combo = BlockEncoding::lin_combo(&terms, &signs)?;
    let enc = if terms.len() > 1 { combo.amplify(k, AMPLIFY_DELTA, AMPLIFY_EPS)? } else { combo };
    Ok((enc.normalized(), s))
}

/// Decides whether `f` changes sign over the grid from probed extremes.
pub fn dissect(
    grid: &SampleGrid,
    f: &MultivariatePolynomial,
    eps: f64,
    zero_tol: f64,
) -> Result<DissectionReport, DissectError> {
    let (enc, s) = encode_grid_function(grid, f)?;
    let lo = min_via_shift(&enc, eps)?;
    let hi = max_via_shift(&enc, eps)?;
    let min_est = lo.value * s;
    let max_est = hi.value * s;
    Ok(DissectionReport {
        min_est,
        max_est,
        eps,
        zero_tol,
        resolution: lo.error.max(hi.error) * s,
        verdict: Verdict::from_extremes(min_est, max_est, zero_tol),
        degenerate_flag: lo.probe.degenerate || hi.probe.degenerate,
        normalization: s,
        n: grid.n(),
        cost: lo.probe.cost + hi.probe.cost,
    })
}

/// Exact linear scan: one evaluation per grid point.
pub fn classical_scan(
    grid: &SampleGrid,
    f: &MultivariatePolynomial,
    zero_tol: f64,
) -> Result<DissectionReport, DissectError> {
    grid.validate()?;
    let values: Vec<f64> = grid.points.iter().map(|p| f.eval(p)).collect();
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let n = grid.n() as f64;
    Ok(DissectionReport {
        min_est: min,
        max_est: max,
        eps: 0.0,
        zero_tol,
        resolution: 0.0,
        verdict: Verdict::from_extremes(min, max, zero_tol),
        degenerate_flag: false,
        normalization: 1.0,
        n: grid.n(),
        cost: CostLedger { base_unitary_uses: n, state_prep_queries: 0.0, modeled_depth: n, qsvt_degree_total: 0.0 },
    })
}

/// For a univariate grid, finds adjacent points where `f` changes sign and
/// bisects between them. Returns `(left, right, root)`.
pub fn refine_bracket(grid: &SampleGrid, f: &MultivariatePolynomial) -> Option<(f64, f64, f64)> {
    if grid.m() != 1 {
        return None;
    }
    let mut xs: Vec<f64> = grid.points.iter().map(|p| p[0]).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let g = |x: f64| f.eval(&[x]);
    for w in xs.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (fa, fb) = (g(a), g(b));
        if fa == 0.0 {
            return Some((a, b, a));
        }
        if fa * fb < 0.0 {
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if g(mid) * g(a) <= 0.0 {
                    b = mid;
                } else {
                    a = mid;
                }
                if b - a < 1e-15 {
                    break;
                }
            }
            return Some((w[0], w[1], 0.5 * (a + b)));
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

/// Grid input: an explicit point list or `{"uniform": {"lo", "hi", "n"}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Uniform { uniform: UniformSpec },
    Points(Vec<Vec<f64>>),
    Scalars(Vec<f64>),
}

impl GridSpec {
    pub fn build(&self) -> Result<SampleGrid, DissectError> {
        match self {
            GridSpec::Uniform { uniform } => SampleGrid::uniform(uniform.lo, uniform.hi, uniform.n),
            GridSpec::Points(p) => SampleGrid::new(p.clone()),
            GridSpec::Scalars(x) => SampleGrid::new(x.iter().map(|&v| vec![v]).collect()),
        }
    }

    pub fn from_json(s: &str) -> Result<SampleGrid, DissectError> {
        let spec: GridSpec = serde_json::from_str(s).map_err(|e| DissectError::Parse(e.to_string()))?;
        spec.build()
    }
}

impl MultivariatePolynomial {
    pub fn from_json(s: &str) -> Result<Self, DissectError> {
        let raw: MultivariatePolynomial = serde_json::from_str(s).map_err(|e| DissectError::Parse(e.to_string()))?;
        Self::new(raw.m, raw.terms)
    }
}

/// `x(x − 0.5)(x + 0.7)`.
pub fn figure_cubic() -> MultivariatePolynomial {
    MultivariatePolynomial::univariate(&[0.0, -0.35, 0.2, 1.0])
}

/// `2x⁶ − 3x⁴ + (9/8)x² − 1/16`.
pub fn figure_sextic() -> MultivariatePolynomial {
    MultivariatePolynomial::univariate(&[-1.0 / 16.0, 0.0, 9.0 / 8.0, 0.0, -3.0, 0.0, 2.0])
}
