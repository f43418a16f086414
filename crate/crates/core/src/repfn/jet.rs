//! Second-order jets at the origin.
//!
//! Derivatives are obtained by forward propagation of truncated Taylor
//! polynomials `v + g·δ + ½ δᵀHδ` through the tree. Indicator nodes are frozen
//! at their value at the origin.

use smallvec::SmallVec;

use super::{is_nan, principal_log, principal_pow, Expr, Node, RepFn, NAN};
use crate::error::{Error, Result};
use crate::C64;

/// Value, Jacobian and Hessian of a representing function at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    /// `n` values.
    pub value: Vec<C64>,
    /// `n × d`.
    pub jacobian: Vec<Vec<C64>>,
    /// `n × d × d`, symmetric in the last two indices.
    pub hessian: Vec<Vec<Vec<C64>>>,
}

impl Jet2 {
    pub fn output_dim(&self) -> usize {
        self.value.len()
    }

    pub fn input_dim(&self) -> usize {
        self.jacobian.first().map_or(0, Vec::len)
    }

    /// `Dξ(0)·b` for a real vector `b`.
    pub fn jacobian_times(&self, b: &[f64]) -> Vec<C64> {
        self.jacobian
            .iter()
            .map(|row| row.iter().zip(b).map(|(j, &bi)| j * bi).sum())
            .collect()
    }

    /// `½ Σ_ij D²_ij ξ(0) c_ij` for a real symmetric matrix `c`.
    pub fn half_hessian_contract(&self, c: &[Vec<f64>]) -> Vec<C64> {
        self.hessian
            .iter()
            .map(|h| {
                let mut acc = C64::new(0.0, 0.0);
                for (hi, ci) in h.iter().zip(c) {
                    for (hij, &cij) in hi.iter().zip(ci) {
                        acc += hij * cij;
                    }
                }
                acc * 0.5
            })
            .collect()
    }

    /// Largest elementwise deviation from `other` scaled by `max(1, |other|)`,
    /// separately for the Jacobian and the Hessian.
    pub fn relative_deviation(&self, other: &Jet2) -> (f64, f64) {
        let rel = |a: C64, b: C64| (a - b).norm() / b.norm().max(1.0);
        let mut dj: f64 = 0.0;
        let mut dh: f64 = 0.0;
        for (ra, rb) in self.jacobian.iter().zip(&other.jacobian) {
            for (a, b) in ra.iter().zip(rb) {
                dj = dj.max(rel(*a, *b));
            }
        }
        for (ma, mb) in self.hessian.iter().zip(&other.hessian) {
            for (ra, rb) in ma.iter().zip(mb) {
                for (a, b) in ra.iter().zip(rb) {
                    dh = dh.max(rel(*a, *b));
                }
            }
        }
        (dj, dh)
    }
}

/// Truncated second-order Taylor polynomial in `d` variables.
#[derive(Clone, Debug)]
struct Taylor {
    v: C64,
    g: SmallVec<[C64; 4]>,
    h: SmallVec<[C64; 16]>,
}

impl Taylor {
    fn constant(c: C64, d: usize) -> Self {
        Taylor {
            v: c,
            g: SmallVec::from_elem(C64::new(0.0, 0.0), d),
            h: SmallVec::from_elem(C64::new(0.0, 0.0), d * d),
        }
    }

    fn variable(i: usize, d: usize) -> Self {
        let mut t = Taylor::constant(C64::new(0.0, 0.0), d);
        t.g[i] = C64::new(1.0, 0.0);
        t
    }

    fn dim(&self) -> usize {
        self.g.len()
    }

    fn zip_with(&self, o: &Taylor, f: impl Fn(C64, C64) -> C64) -> Taylor {
        Taylor {
            v: f(self.v, o.v),
            g: self.g.iter().zip(&o.g).map(|(a, b)| f(*a, *b)).collect(),
            h: self.h.iter().zip(&o.h).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    fn mul(&self, o: &Taylor) -> Taylor {
        let d = self.dim();
        let mut h = SmallVec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                h.push(self.h[i * d + j] * o.v + self.v * o.h[i * d + j] + (self.g[i] * o.g[j] + o.g[i] * self.g[j]));
            }
        }
        Taylor {
            v: self.v * o.v,
            g: self.g.iter().zip(&o.g).map(|(a, b)| a * o.v + self.v * b).collect(),
            h,
        }
    }

    /// Applies a scalar function with derivatives `(f, f′, f″)` at `self.v`.
    fn chain(&self, f0: C64, f1: C64, f2: C64) -> Taylor {
        let d = self.dim();
        let mut h = SmallVec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                h.push(f1 * self.h[i * d + j] + f2 * (self.g[i] * self.g[j]));
            }
        }
        Taylor {
            v: f0,
            g: self.g.iter().map(|a| f1 * a).collect(),
            h,
        }
    }

    fn nan(d: usize) -> Taylor {
        Taylor {
            v: NAN,
            g: SmallVec::from_elem(NAN, d),
            h: SmallVec::from_elem(NAN, d * d),
        }
    }
}

fn taylor_eval(e: &Expr, x: &[Taylor], d: usize) -> Taylor {
    match e.node() {
        Node::Coord(i) => x[*i].clone(),
        Node::Const(c) => Taylor::constant(*c, d),
        Node::Add(a, b) => taylor_eval(a, x, d).zip_with(&taylor_eval(b, x, d), |p, q| p + q),
        Node::Sub(a, b) => taylor_eval(a, x, d).zip_with(&taylor_eval(b, x, d), |p, q| p - q),
        Node::Mul(a, b) => taylor_eval(a, x, d).mul(&taylor_eval(b, x, d)),
        Node::Div(a, b) => {
            let den = taylor_eval(b, x, d);
            if den.v == C64::new(0.0, 0.0) || is_nan(den.v) {
                return Taylor::nan(d);
            }
            let r = den.v.inv();
            let recip = den.chain(r, -r * r, 2.0 * r * r * r);
            taylor_eval(a, x, d).mul(&recip)
        }
        Node::Neg(a) => {
            let t = taylor_eval(a, x, d);
            t.chain(-t.v, C64::new(-1.0, 0.0), C64::new(0.0, 0.0))
        }
        Node::Exp(a) => {
            let t = taylor_eval(a, x, d);
            let f = t.v.exp();
            t.chain(f, f, f)
        }
        Node::Log(a) => {
            let t = taylor_eval(a, x, d);
            let l = principal_log(t.v);
            if is_nan(l) {
                return Taylor::nan(d);
            }
            let r = t.v.inv();
            t.chain(l, r, -r * r)
        }
        Node::Pow(a, p) => {
            let t = taylor_eval(a, x, d);
            let f = principal_pow(t.v, *p);
            if is_nan(f) {
                return Taylor::nan(d);
            }
            let r = t.v.inv();
            let f1 = p * f * r;
            let f2 = p * (p - 1.0) * f * r * r;
            t.chain(f, f1, f2)
        }
        Node::Indicator { coord, pred } => {
            let z = x[*coord].v;
            if is_nan(z) {
                Taylor::nan(d)
            } else {
                let c = if pred.holds(z) { 1.0 } else { 0.0 };
                Taylor::constant(C64::new(c, 0.0), d)
            }
        }
        Node::Compose { outer, inner } => {
            let y: Vec<Taylor> = inner.iter().map(|e| taylor_eval(e, x, d)).collect();
            taylor_eval(outer, &y, d)
        }
    }
}

impl RepFn {
    /// Exact `Dξ(0)` and `D²ξ(0)` by forward Taylor propagation.
    pub fn jet_at_zero(&self) -> Jet2 {
        let d = self.input_dim();
        let seeds: Vec<Taylor> = (0..d).map(|i| Taylor::variable(i, d)).collect();
        let mut jet = Jet2 {
            value: Vec::with_capacity(self.output_dim()),
            jacobian: Vec::with_capacity(self.output_dim()),
            hessian: Vec::with_capacity(self.output_dim()),
        };
        for e in self.outputs() {
            let t = taylor_eval(e, &seeds, d);
            jet.value.push(t.v);
            jet.jacobian.push(t.g.to_vec());
            jet.hessian
                .push((0..d).map(|i| t.h[i * d..(i + 1) * d].to_vec()).collect());
        }
        jet
    }

    /// Central-difference estimate of the jet at the origin; an independent
    /// check on [`RepFn::jet_at_zero`].
    pub fn finite_difference_jet(&self, step: f64) -> Result<Jet2> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Usage(format!("step must be positive, got {step}")));
        }
        let d = self.input_dim();
        let n = self.output_dim();
        let f = |p: Vec<f64>| -> Result<Vec<C64>> {
            let v = self.eval_real_unchecked(&p);
            if super::is_nan_value(&v) {
                Err(Error::NanAtStencil { point: p })
            } else {
                Ok(v)
            }
        };
        let unit = |i: usize, s: f64| {
            let mut p = vec![0.0; d];
            p[i] = s;
            p
        };
        let f0 = f(vec![0.0; d])?;
        let mut jac = vec![vec![C64::new(0.0, 0.0); d]; n];
        let mut hess = vec![vec![vec![C64::new(0.0, 0.0); d]; d]; n];
        for i in 0..d {
            let fp = f(unit(i, step))?;
            let fm = f(unit(i, -step))?;
            for k in 0..n {
                jac[k][i] = (fp[k] - fm[k]) / (2.0 * step);
                hess[k][i][i] = (fp[k] - 2.0 * f0[k] + fm[k]) / (step * step);
            }
            for j in (i + 1)..d {
                let pt = |si: f64, sj: f64| {
                    let mut p = vec![0.0; d];
                    p[i] = si * step;
                    p[j] = sj * step;
                    p
                };
                let fpp = f(pt(1.0, 1.0))?;
                let fpm = f(pt(1.0, -1.0))?;
                let fmp = f(pt(-1.0, 1.0))?;
                let fmm = f(pt(-1.0, -1.0))?;
                for k in 0..n {
                    let v = (fpp[k] - fpm[k] - fmp[k] + fmm[k]) / (4.0 * step * step);
                    hess[k][i][j] = v;
                    hess[k][j][i] = v;
                }
            }
        }
        Ok(Jet2 {
            value: f0,
            jacobian: jac,
            hessian: hess,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repfn::Predicate;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn exp_affine_jet() {
        let f = RepFn::scalar(1, (Expr::coord(0) * 2.0).exp() - 1.0).unwrap();
        let j = f.jet_at_zero();
        assert_eq!(j.value[0], c(0.0));
        assert_eq!(j.jacobian[0][0], c(2.0));
        assert_eq!(j.hessian[0][0][0], c(4.0));
    }

    #[test]
    fn exp_utility_jet() {
        let lambda = 3.0;
        let r = Expr::coord(0).exp() - 1.0;
        let f = RepFn::scalar(1, (r * (-lambda)).exp() - 1.0).unwrap();
        let j = f.jet_at_zero();
        assert!((j.jacobian[0][0] - c(-3.0)).norm() < 1e-15);
        assert!((j.hessian[0][0][0] - c(6.0)).norm() < 1e-14);
    }

    #[test]
    fn square_via_finite_differences() {
        let x = Expr::coord(0);
        let f = RepFn::scalar(1, &x * &x).unwrap();
        let j = f.finite_difference_jet(1e-4).unwrap();
        assert!(j.jacobian[0][0].norm() < 1e-6);
        assert!((j.hessian[0][0][0] - c(2.0)).norm() < 1e-6);
    }

    #[test]
    fn finite_differences_match_forward_propagation() {
        let f = RepFn::scalar(1, (Expr::coord(0) * 3.0).exp() - 1.0).unwrap();
        let fd = f.finite_difference_jet(1e-4).unwrap();
        let exact = f.jet_at_zero();
        assert!((fd.jacobian[0][0] - exact.jacobian[0][0]).norm() < 1e-6);
    }

    #[test]
    fn stencil_nan_is_reported() {
        let f = RepFn::scalar(1, Expr::coord(0) / (1.0 - Expr::coord(0) * 10.0)).unwrap();
        let err = f.finite_difference_jet(0.1).unwrap_err();
        assert!(matches!(err, Error::NanAtStencil { .. }));
    }

    #[test]
    fn indicator_is_frozen() {
        let x = Expr::coord(0);
        let f = RepFn::scalar(1, &x * &Expr::indicator(0, Predicate::AbsLe(1.0))).unwrap();
        let j = f.jet_at_zero();
        assert_eq!(j.jacobian[0][0], c(1.0));
        assert_eq!(j.hessian[0][0][0], c(0.0));
    }

    #[test]
    fn hessian_is_symmetric() {
        let x1 = Expr::coord(0);
        let x2 = Expr::coord(1);
        let f = RepFn::scalar(2, ((1.0 + x1) / (1.0 + x2)).powc(C64::new(0.3, 1.1)) - 1.0).unwrap();
        let h = &f.jet_at_zero().hessian[0];
        assert_eq!(h[0][1], h[1][0]);
    }
}
