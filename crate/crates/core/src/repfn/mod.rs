//! Representing functions.
//!
//! A [`RepFn`] is a deterministic map `ξ: ℝᵈ → ℂⁿ` with `ξ(0) = 0`, stored as
//! an expression tree so that its first and second derivatives at the origin
//! are available exactly (see [`jet`]). Evaluation follows the NaN convention:
//! whenever a subexpression hits a pole or a branch cut the whole output is
//! NaN, and NaN inputs propagate through every node.

mod jet;
pub mod text;

use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::C64;

pub use jet::Jet2;

pub(crate) const NAN: C64 = C64::new(f64::NAN, f64::NAN);

pub(crate) fn is_nan(z: C64) -> bool {
    z.re.is_nan() || z.im.is_nan()
}

/// True when a vector value is the NaN sentinel.
pub fn is_nan_value(v: &[C64]) -> bool {
    v.iter().any(|z| is_nan(*z))
}

/// Predicate of an indicator node. Every variant is constant on a ball around
/// the origin: `Eq`/`Ne` need `a ≠ 0`, `AbsLe`/`AbsGt` need `r > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Predicate {
    /// `x_i = a`
    Eq(f64),
    /// `x_i ≠ a`
    Ne(f64),
    /// `|x_i| ≤ r`
    AbsLe(f64),
    /// `|x_i| > r`
    AbsGt(f64),
}

impl Predicate {
    fn validate(&self) -> Result<()> {
        match *self {
            Predicate::Eq(a) | Predicate::Ne(a) => {
                if !a.is_finite() || a == 0.0 {
                    return Err(Error::InvalidRepFn(format!(
                        "indicator level {a} must be finite and nonzero"
                    )));
                }
            }
            Predicate::AbsLe(r) | Predicate::AbsGt(r) => {
                if !r.is_finite() || r <= 0.0 {
                    return Err(Error::InvalidRepFn(format!(
                        "indicator radius {r} must be finite and positive"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn holds(&self, z: C64) -> bool {
        match *self {
            Predicate::Eq(a) => z == C64::new(a, 0.0),
            Predicate::Ne(a) => z != C64::new(a, 0.0),
            Predicate::AbsLe(r) => z.norm() <= r,
            Predicate::AbsGt(r) => z.norm() > r,
        }
    }
}

/// Node kinds of the expression tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Coord(usize),
    Const(C64),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    Exp(Expr),
    Log(Expr),
    /// `base^exponent` on the principal branch.
    Pow(Expr, C64),
    /// `1{pred(x_coord)}` where `x` is the input of the enclosing scope.
    Indicator {
        coord: usize,
        pred: Predicate,
    },
    /// `outer(inner_1(x), …, inner_m(x))`; `outer` is written over `m` coordinates.
    Compose {
        outer: Expr,
        inner: Arc<[Expr]>,
    },
}

/// Shared, immutable expression handle.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub fn new(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn coord(i: usize) -> Self {
        Expr::new(Node::Coord(i))
    }

    pub fn constant(c: impl Into<C64>) -> Self {
        Expr::new(Node::Const(c.into()))
    }

    pub fn one() -> Self {
        Expr::constant(1.0)
    }

    pub fn exp(&self) -> Self {
        Expr::new(Node::Exp(self.clone()))
    }

    pub fn ln(&self) -> Self {
        Expr::new(Node::Log(self.clone()))
    }

    pub fn powc(&self, exponent: impl Into<C64>) -> Self {
        Expr::new(Node::Pow(self.clone(), exponent.into()))
    }

    pub fn indicator(coord: usize, pred: Predicate) -> Self {
        Expr::new(Node::Indicator { coord, pred })
    }

    pub fn compose(outer: Expr, inner: Vec<Expr>) -> Self {
        Expr::new(Node::Compose {
            outer,
            inner: inner.into(),
        })
    }

    /// True when the node is the literal constant zero.
    pub fn is_literal_zero(&self) -> bool {
        matches!(self.node(), Node::Const(c) if *c == C64::new(0.0, 0.0))
    }

    pub(crate) fn eval(&self, x: &[C64]) -> C64 {
        match self.node() {
            Node::Coord(i) => x[*i],
            Node::Const(c) => *c,
            Node::Add(a, b) => a.eval(x) + b.eval(x),
            Node::Sub(a, b) => a.eval(x) - b.eval(x),
            Node::Mul(a, b) => a.eval(x) * b.eval(x),
            Node::Div(a, b) => {
                let den = b.eval(x);
                let num = a.eval(x);
                if den == C64::new(0.0, 0.0) || is_nan(den) || is_nan(num) {
                    NAN
                } else {
                    num / den
                }
            }
            Node::Neg(a) => -a.eval(x),
            Node::Exp(a) => a.eval(x).exp(),
            Node::Log(a) => principal_log(a.eval(x)),
            Node::Pow(a, p) => principal_pow(a.eval(x), *p),
            Node::Indicator { coord, pred } => {
                let z = x[*coord];
                if is_nan(z) {
                    NAN
                } else if pred.holds(z) {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }
            Node::Compose { outer, inner } => {
                let y: SmallVec<[C64; 4]> = inner.iter().map(|e| e.eval(x)).collect();
                if y.iter().any(|z| is_nan(*z)) {
                    NAN
                } else {
                    outer.eval(&y)
                }
            }
        }
    }

    fn validate(&self, scope: usize) -> Result<()> {
        match self.node() {
            Node::Coord(i) | Node::Indicator { coord: i, .. } if *i >= scope => Err(Error::InvalidRepFn(format!(
                "coordinate x{i} out of range for input dimension {scope}"
            ))),
            Node::Coord(_) => Ok(()),
            Node::Indicator { pred, .. } => pred.validate(),
            Node::Const(c) => {
                if c.re.is_finite() && c.im.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidRepFn(format!("non-finite constant {c}")))
                }
            }
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.validate(scope)?;
                b.validate(scope)
            }
            Node::Neg(a) | Node::Exp(a) | Node::Log(a) => a.validate(scope),
            Node::Pow(a, p) => {
                if !(p.re.is_finite() && p.im.is_finite()) {
                    return Err(Error::InvalidRepFn(format!("non-finite exponent {p}")));
                }
                a.validate(scope)
            }
            Node::Compose { outer, inner } => {
                if inner.is_empty() {
                    return Err(Error::InvalidRepFn("composition with no inner functions".into()));
                }
                for e in inner.iter() {
                    e.validate(scope)?;
                }
                outer.validate(inner.len())
            }
        }
    }

    fn has_only_real_constants(&self) -> bool {
        match self.node() {
            Node::Coord(_) | Node::Indicator { .. } => true,
            Node::Const(c) => c.im == 0.0,
            Node::Pow(a, p) => p.im == 0.0 && a.has_only_real_constants(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.has_only_real_constants() && b.has_only_real_constants()
            }
            Node::Neg(a) | Node::Exp(a) | Node::Log(a) => a.has_only_real_constants(),
            Node::Compose { outer, inner } => {
                outer.has_only_real_constants() && inner.iter().all(Expr::has_only_real_constants)
            }
        }
    }
}

/// Principal logarithm; NaN on the closed negative real axis.
pub(crate) fn principal_log(z: C64) -> C64 {
    if is_nan(z) || (z.im == 0.0 && z.re <= 0.0) {
        NAN
    } else {
        z.ln()
    }
}

/// `exp(p·log z)` on the principal branch; NaN for bases on `(-∞, 0]`.
pub(crate) fn principal_pow(z: C64, p: C64) -> C64 {
    let l = principal_log(z);
    if is_nan(l) {
        NAN
    } else {
        (p * l).exp()
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $variant:ident) => {
        impl $tr<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::new(Node::$variant(self, rhs))
            }
        }
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::new(Node::$variant(self.clone(), rhs.clone()))
            }
        }
        impl $tr<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::new(Node::$variant(self, Expr::constant(rhs)))
            }
        }
        impl $tr<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::new(Node::$variant(Expr::constant(self), rhs))
            }
        }
        impl $tr<C64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: C64) -> Expr {
                Expr::new(Node::$variant(self, Expr::constant(rhs)))
            }
        }
    };
}

binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::new(Node::Neg(self))
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::new(Node::Neg(self.clone()))
    }
}

/// A validated representing function `ℝᵈ → ℂⁿ` with `ξ(0) = 0`.
///
/// Values are immutable and cheap to clone; evaluation and differentiation
/// are pure, so a `RepFn` can be shared freely across worker threads.
#[derive(Clone, Debug, PartialEq)]
pub struct RepFn {
    input_dim: usize,
    outputs: Vec<Expr>,
    real_valued: bool,
}

impl RepFn {
    /// Builds a representing function, checking coordinate ranges, indicator
    /// predicates and `ξ(0) = 0`.
    pub fn new(input_dim: usize, outputs: Vec<Expr>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidRepFn("input dimension must be positive".into()));
        }
        if outputs.is_empty() {
            return Err(Error::InvalidRepFn("output dimension must be positive".into()));
        }
        for e in &outputs {
            e.validate(input_dim)?;
        }
        let real_valued = outputs.iter().all(Expr::has_only_real_constants);
        let f = RepFn {
            input_dim,
            outputs,
            real_valued,
        };
        let zero = vec![C64::new(0.0, 0.0); input_dim];
        let at_zero = f.eval_unchecked(&zero);
        if at_zero.iter().any(|z| *z != C64::new(0.0, 0.0)) {
            return Err(Error::InvalidRepFn(format!(
                "function must vanish at the origin, got {at_zero:?}"
            )));
        }
        Ok(f)
    }

    pub fn scalar(input_dim: usize, expr: Expr) -> Result<Self> {
        RepFn::new(input_dim, vec![expr])
    }

    pub fn identity(dim: usize) -> Self {
        RepFn::new(dim, (0..dim).map(Expr::coord).collect()).expect("identity is valid")
    }

    pub fn coordinate(dim: usize, i: usize) -> Result<Self> {
        RepFn::scalar(dim, Expr::coord(i))
    }

    pub fn zero(input_dim: usize, output_dim: usize) -> Self {
        RepFn::new(input_dim, vec![Expr::constant(0.0); output_dim]).expect("zero is valid")
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.len()
    }

    pub fn outputs(&self) -> &[Expr] {
        &self.outputs
    }

    /// True when every constant and exponent in the tree is real, so that the
    /// function maps real points to real values (or NaN).
    pub fn is_real_valued(&self) -> bool {
        self.real_valued
    }

    /// True when every output is the literal constant zero.
    pub fn is_literal_zero(&self) -> bool {
        self.outputs.iter().all(Expr::is_literal_zero)
    }

    /// Evaluates `ξ(x)`. A NaN in any component turns the whole output into
    /// the NaN sentinel.
    pub fn eval(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    /// Evaluates at a real point.
    pub fn eval_real(&self, x: &[f64]) -> Result<Vec<C64>> {
        let z: SmallVec<[C64; 4]> = x.iter().map(|&r| C64::new(r, 0.0)).collect();
        self.eval(&z)
    }

    pub(crate) fn eval_unchecked(&self, x: &[C64]) -> Vec<C64> {
        let mut out: Vec<C64> = self.outputs.iter().map(|e| e.eval(x)).collect();
        if is_nan_value(&out) {
            out.fill(NAN);
        }
        out
    }

    pub(crate) fn eval_real_unchecked(&self, x: &[f64]) -> Vec<C64> {
        let z: SmallVec<[C64; 4]> = x.iter().map(|&r| C64::new(r, 0.0)).collect();
        self.eval_unchecked(&z)
    }

    /// Syntactic composition `ψ ∘ ξ`.
    pub fn compose(psi: &RepFn, xi: &RepFn) -> Result<RepFn> {
        if psi.input_dim != xi.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: psi.input_dim,
                got: xi.output_dim(),
            });
        }
        let inner: Arc<[Expr]> = xi.outputs.clone().into();
        let outputs = psi
            .outputs
            .iter()
            .map(|o| {
                Expr::new(Node::Compose {
                    outer: o.clone(),
                    inner: inner.clone(),
                })
            })
            .collect();
        RepFn::new(xi.input_dim, outputs)
    }

    /// Left-multiplies by a constant matrix `ζ` (rows × n): the integration
    /// rule `ζ·ξ` for a constant integrand.
    pub fn left_multiply(zeta: &[Vec<C64>], xi: &RepFn) -> Result<RepFn> {
        let n = xi.output_dim();
        if zeta.is_empty() {
            return Err(Error::Usage("integrand matrix has no rows".into()));
        }
        let mut outputs = Vec::with_capacity(zeta.len());
        for row in zeta {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            let mut acc: Option<Expr> = None;
            for (k, &c) in row.iter().enumerate() {
                if c == C64::new(0.0, 0.0) {
                    continue;
                }
                let term = Expr::constant(c) * xi.outputs[k].clone();
                acc = Some(match acc {
                    None => term,
                    Some(a) => a + term,
                });
            }
            outputs.push(acc.unwrap_or_else(|| Expr::constant(0.0)));
        }
        RepFn::new(xi.input_dim, outputs)
    }
}
