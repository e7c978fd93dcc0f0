//! Classical, matrix-level simulation of block-encoding algorithms for root
//! dissection and Newton-type solvers of nonlinear algebraic systems.
//!
//! Every encoded operator is stored explicitly together with its
//! subnormalization, error bound and a [`CostLedger`] of modeled quantum
//! resources, so complexity claims become regression tests on the ledger.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod block_encoding;
pub mod circulant_pde;
pub mod fit;
pub mod matrix_core;
pub mod newton_solver;
pub mod nonlinear_system;
pub mod physics_apps;
pub mod poly_transform;
pub mod root_dissect;
pub mod spectral_probe;

pub use num_complex::Complex;

pub use block_encoding::{BlockEncoding, BlockError, CostLedger};
pub use matrix_core::{CMatrixG, CVectorG, MatrixError, Scalar};

pub type C64 = Complex<f64>;
pub type C32 = Complex<f32>;
pub type CMatrix = CMatrixG<f64>;
pub type CMatrix32 = CMatrixG<f32>;
pub type CVector = CVectorG<f64>;
pub type CVector32 = CVectorG<f32>;
