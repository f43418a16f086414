//! Test-only oracles, generators and pinned tolerances.
#![allow(dead_code)]

use proptest::prelude::*;
use semirep::repfn::Jet2;
use semirep::{Expr, Predicate, RepFn, C64};
use statrs::function::erf::erfc;

pub const EXACT: f64 = 1e-15;
pub const CLOSED_FORM: f64 = 1e-12;
pub const EMERY_VS_CLOSED: f64 = 1e-9;
pub const CLASSICAL_PRICE: f64 = 1e-6;
pub const LAMBDA_STAR: f64 = 1e-8;
pub const JET_JACOBIAN: f64 = 1e-6;
pub const JET_HESSIAN: f64 = 1e-4;
pub const RETRUNCATION: f64 = 1e-9;
pub const MC_Z: f64 = 3.0;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Exchange option `E[(S₁ − S₂)⁺]` for two correlated GBMs under the
/// martingale measure, with `var_eff = σ₁² − 2σ₁₂ + σ₂²`.
pub fn classical_exchange(s1: f64, s2: f64, var_eff: f64, t: f64) -> f64 {
    let sd = (var_eff * t).sqrt();
    let d1 = ((s1 / s2).ln() + 0.5 * sd * sd) / sd;
    s1 * norm_cdf(d1) - s2 * norm_cdf(d1 - sd)
}

/// Sums `Π f(x_k) · Π p_k` over all `3ⁿ` trinomial paths.
pub fn enumerate_trinomial(probs: [f64; 3], moves: [f64; 3], n: usize, f: &dyn Fn(f64) -> C64) -> C64 {
    let mut total = c(0.0, 0.0);
    for code in 0..3usize.pow(n as u32) {
        let mut k = code;
        let mut val = c(1.0, 0.0);
        for _ in 0..n {
            val *= f(moves[k % 3]) * probs[k % 3];
            k /= 3;
        }
        total += val;
    }
    total
}

/// Smooth expression trees in two variables.
#[derive(Debug, Clone)]
pub enum Tree {
    X(usize),
    C(f64),
    Add(Box<Tree>, Box<Tree>),
    Sub(Box<Tree>, Box<Tree>),
    Mul(Box<Tree>, Box<Tree>),
    Exp(Box<Tree>),
    /// `log(1 + t²)`
    LogSq(Box<Tree>),
    /// `(2 + t²)^p`
    Pow(Box<Tree>, f64),
    /// `t · 1{|x_i| ≤ 0.5}`
    Gate(Box<Tree>, usize),
    /// `outer(a, b)`
    Comp(Box<Tree>, Box<Tree>, Box<Tree>),
}

impl Tree {
    pub fn expr(&self) -> Expr {
        match self {
            Tree::X(i) => Expr::coord(*i),
            Tree::C(v) => Expr::constant(*v),
            Tree::Add(a, b) => a.expr() + b.expr(),
            Tree::Sub(a, b) => a.expr() - b.expr(),
            Tree::Mul(a, b) => a.expr() * b.expr(),
            Tree::Exp(a) => a.expr().exp(),
            Tree::LogSq(a) => {
                let e = a.expr();
                (Expr::one() + &e * &e).ln()
            }
            Tree::Pow(a, p) => {
                let e = a.expr();
                (Expr::constant(2.0) + &e * &e).powc(*p)
            }
            Tree::Gate(a, i) => a.expr() * Expr::indicator(*i, Predicate::AbsLe(0.5)),
            Tree::Comp(o, a, b) => Expr::compose(o.expr(), vec![a.expr(), b.expr()]),
        }
    }

    /// `t(x) − t(0)`, with `t(0)` evaluated by the same tree so the
    /// difference vanishes exactly at the origin.
    pub fn centered(&self) -> Expr {
        let e = self.expr();
        let at0 = Expr::compose(e.clone(), vec![Expr::constant(0.0), Expr::constant(0.0)]);
        e - at0
    }

    pub fn repfn(&self) -> RepFn {
        RepFn::scalar(2, self.centered()).expect("centered tree vanishes at 0")
    }
}

pub fn tree() -> impl Strategy<Value = Tree> {
    let leaf = prop_oneof![(0usize..2).prop_map(Tree::X), (-1.0f64..1.0).prop_map(Tree::C),];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Tree::Add(a.into(), b.into())),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Tree::Sub(a.into(), b.into())),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Tree::Mul(a.into(), b.into())),
            inner.clone().prop_map(|a| Tree::Exp(a.into())),
            inner.clone().prop_map(|a| Tree::LogSq(a.into())),
            (inner.clone(), -1.5f64..1.5).prop_map(|(a, p)| Tree::Pow(a.into(), p)),
            (inner.clone(), 0usize..2).prop_map(|(a, i)| Tree::Gate(a.into(), i)),
            (inner.clone(), inner.clone(), inner).prop_map(|(o, a, b)| Tree::Comp(o.into(), a.into(), b.into())),
        ]
    })
}

/// Second-order chain rule for `ψ∘ξ` at the origin.
pub fn chain_rule(psi: &Jet2, xi: &Jet2) -> (Vec<Vec<C64>>, Vec<Vec<Vec<C64>>>) {
    let m = psi.value.len();
    let n = xi.value.len();
    let d = xi.jacobian[0].len();
    let zero = c(0.0, 0.0);
    let mut jac = vec![vec![zero; d]; m];
    let mut hes = vec![vec![vec![zero; d]; d]; m];
    for p in 0..m {
        for i in 0..d {
            for k in 0..n {
                jac[p][i] += psi.jacobian[p][k] * xi.jacobian[k][i];
            }
            for j in 0..d {
                let mut s = zero;
                for k in 0..n {
                    s += psi.jacobian[p][k] * xi.hessian[k][i][j];
                    for l in 0..n {
                        s += xi.jacobian[k][i] * psi.hessian[p][k][l] * xi.jacobian[l][j];
                    }
                }
                hes[p][i][j] = s;
            }
        }
    }
    (jac, hes)
}

pub fn max_rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}
