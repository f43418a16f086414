//! Drift, expectation and option-pricing engine built on representing
//! functions of semimartingale increments.
//!
//! A representing function `ξ` maps a jump `x` to a new jump `ξ(x)` with
//! `ξ(0) = 0`; the process `ξ∘X` is the semimartingale whose jumps are
//! `ξ(ΔX)`. Its drift under a Lévy triplet is
//! `Dξ(0)·b + ½ Σ D²ξ(0)·c + ∫ (ξ(x) − Dξ(0)h(x)) F(dx)`.

pub mod calculus;
pub mod complex;
pub mod drift;
pub mod error;
pub mod mcoracle;
pub mod models;
pub mod pricing;
pub mod quadrature;
pub mod repfn;

pub type C64 = num_complex::Complex64;

pub use error::{Error, Result};
pub use repfn::{Expr, Predicate, RepFn};
