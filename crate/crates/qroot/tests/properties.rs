use proptest::prelude::*;
use qroot::block_encoding::BlockEncoding;
use qroot::circulant_pde::{circulant_eigenvalues, fd_coefficients, CirculantSpec};
use qroot::matrix_core::{inverse, spectral_norm};
use qroot::nonlinear_system::{classical_newton, FamilyKind, FunctionFamily};
use qroot::poly_transform::{invert, qsvt_apply, Polynomial};
use qroot::root_dissect::{classical_scan, MultivariatePolynomial, SampleGrid, Verdict};
use qroot::{CMatrix, CostLedger, C64};

fn matrix(d: usize) -> impl Strategy<Value = CMatrix> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d * d)
        .prop_map(move |v| CMatrix::from_fn(d, d, |i, j| C64::new(v[i * d + j].0, v[i * d + j].1)))
}

fn encode(m: CMatrix, slack: f64) -> BlockEncoding {
    let alpha = spectral_norm(&m).max(1e-3) * slack;
    BlockEncoding::new(m, alpha, 1, 0.0, CostLedger::new(1.0, 0.0, 1.0)).unwrap()
}

fn hermitian(m: &CMatrix) -> CMatrix {
    m.checked_add(&m.adjoint()).unwrap().scale_real(0.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn product_is_associative(a in matrix(4), b in matrix(4), c in matrix(4)) {
        let (a, b, c) = (encode(a, 1.2), encode(b, 1.5), encode(c, 1.0));
        let left = BlockEncoding::product(&BlockEncoding::product(&a, &b).unwrap(), &c).unwrap();
        let right = BlockEncoding::product(&a, &BlockEncoding::product(&b, &c).unwrap()).unwrap();
        prop_assert!(left.block().max_abs_diff(&right.block()) < 1e-13);
        prop_assert!((left.alpha - right.alpha).abs() < 1e-12 * left.alpha);
        prop_assert_eq!(left.cost, right.cost);
    }

    #[test]
    fn tensor_block_is_kronecker(a in matrix(2), b in matrix(4)) {
        let (ea, eb) = (encode(a, 1.1), encode(b, 1.3));
        let t = BlockEncoding::tensor(&ea, &eb).unwrap();
        prop_assert!(t.block().max_abs_diff(&ea.block().kron(&eb.block())) < 1e-14);
        prop_assert!(t.check_norm().is_ok());
    }

    #[test]
    fn lin_combo_with_opposite_signs_cancels(a in matrix(4)) {
        let e = encode(a, 1.0);
        let z = BlockEncoding::lin_combo(&[e.clone(), e], &[1.0, -1.0]).unwrap();
        prop_assert!(z.block().max_abs() < 1e-15);
    }

    #[test]
    fn relabel_and_adjoint_keep_the_block(a in matrix(4), f in 0.1f64..10.0) {
        let e = encode(a, 1.4);
        prop_assert!(e.relabel(f).block().max_abs_diff(&e.block()) < 1e-14);
        prop_assert!(e.adjoint().adjoint().block().max_abs_diff(&e.block()) < 1e-15);
        prop_assert!((e.adjoint().block_norm() - e.block_norm()).abs() < 1e-12);
    }

    #[test]
    fn qsvt_is_linear_in_the_polynomial(
        a in matrix(4),
        p in proptest::collection::vec(-1.0f64..1.0, 1..12),
        q in proptest::collection::vec(-1.0f64..1.0, 1..12),
    ) {
        let e = encode(hermitian(&a), 1.1);
        let scale = |v: &[f64]| {
            let l1: f64 = v.iter().map(|c| c.abs()).sum::<f64>().max(1e-12);
            v.iter().map(|c| c * 0.25 / l1).collect::<Vec<_>>()
        };
        let (p, q) = (scale(&p), scale(&q));
        let mut s = vec![0.0; p.len().max(q.len())];
        for (i, c) in p.iter().enumerate() { s[i] += c; }
        for (i, c) in q.iter().enumerate() { s[i] += c; }
        let bp = qsvt_apply(&e, &Polynomial::new(p)).unwrap().block();
        let bq = qsvt_apply(&e, &Polynomial::new(q)).unwrap().block();
        let bs = qsvt_apply(&e, &Polynomial::new(s)).unwrap().block();
        prop_assert!(bs.max_abs_diff(&bp.checked_add(&bq).unwrap()) < 1e-12);
    }

    #[test]
    fn inversion_undoes_the_block(d in proptest::collection::vec(0.2f64..1.0, 4), signs in proptest::collection::vec(any::<bool>(), 4)) {
        let vals: Vec<f64> = d.iter().zip(&signs).map(|(v, s)| if *s { *v } else { -v }).collect();
        let m = CMatrix::diag_real(&vals);
        let e = BlockEncoding::new(m.clone(), 1.0, 1, 0.0, CostLedger::zero()).unwrap();
        let kappa = 5.0;
        let inv = invert(&e, kappa, 1e-7).unwrap();
        let want = inverse(&m).unwrap().scale_real(1.0 / (2.0 * kappa));
        prop_assert!(inv.op.max_abs_diff(&want) < 1e-7);
    }

    #[test]
    fn negation_mirrors_the_verdict(c in proptest::collection::vec(-0.12f64..0.12, 1..5), n in 2usize..40) {
        let f = MultivariatePolynomial::univariate(&c);
        let grid = SampleGrid::uniform(-0.5, 0.5, n).unwrap();
        let a = classical_scan(&grid, &f, 1e-9).unwrap().verdict;
        let b = classical_scan(&grid, &f.negated(), 1e-9).unwrap().verdict;
        let mirrored = match a {
            Verdict::AllPositive => Verdict::AllNegative,
            Verdict::AllNegative => Verdict::AllPositive,
            v => v,
        };
        prop_assert_eq!(b, mirrored);
    }

    #[test]
    fn circulant_trace_and_linearity(
        row in proptest::collection::vec(-1.0f64..1.0, 16),
        other in proptest::collection::vec(-1.0f64..1.0, 16),
    ) {
        let a = CirculantSpec::from_real(&row).unwrap();
        let b = CirculantSpec::from_real(&other).unwrap();
        let sum: Vec<f64> = row.iter().zip(&other).map(|(x, y)| x + y).collect();
        let s = CirculantSpec::from_real(&sum).unwrap();
        let (la, lb, ls) = (circulant_eigenvalues(&a), circulant_eigenvalues(&b), circulant_eigenvalues(&s));
        for k in 0..16 {
            prop_assert!((ls[k] - la[k] - lb[k]).norm() < 1e-12);
        }
        let total: C64 = la.iter().sum();
        prop_assert!((total - C64::new(16.0 * row[0], 0.0)).norm() < 1e-11);
    }

    #[test]
    fn root_is_a_newton_fixed_point(root in proptest::collection::vec(-0.3f64..0.3, 4), q in -0.2f64..0.2) {
        let a: Vec<Vec<Vec<f64>>> = (0..4)
            .map(|j| {
                let lin = (0..4).map(|k| if j == k { 0.3 } else { 0.01 }).collect();
                let quad = (0..4).map(|k| if j == k { q } else { 0.0 }).collect();
                vec![lin, quad]
            })
            .collect();
        let mut f = FunctionFamily::new(FamilyKind::SumOfPowers, a, vec![], vec![0.0; 4], true).unwrap();
        f.c = f.eval_raw(&root).iter().map(|v| -v).collect();
        let t = classical_newton(&f, &root, 2).unwrap();
        for it in &t.iterates {
            prop_assert!(it.iter().zip(&root).all(|(x, y)| (x - y).abs() < 1e-14));
        }
    }
}

#[test]
fn stencils_are_symmetric_and_mean_free() {
    for order in 1..=8 {
        let s = fd_coefficients(order).unwrap();
        let c = &s.coefficients;
        assert_eq!(c.len(), 2 * order + 1);
        for j in 0..c.len() {
            assert_eq!(c[j], c[c.len() - 1 - j]);
        }
        assert!(c.iter().sum::<f64>().abs() < 1e-12, "order {order}");
    }
}
