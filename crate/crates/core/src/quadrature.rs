//! Quadrature rules: Gauss–Hermite for Gaussian expectations and an adaptive
//! Gauss–Kronrod (7/15) rule for the pricing contour.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::C64;

/// Nodes and weights for `E[f(Y)]`, `Y ~ N(0, 1)`.
#[derive(Debug, Clone)]
pub struct NormalRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Physicists' Gauss–Hermite rule (`∫ f(x) e^{-x²} dx`). Nodes come from the
/// Jacobi matrix eigenvalues and are polished by Newton iteration on the
/// orthonormal recurrence, which also yields the weights. Weights that
/// underflow are returned as 0.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
    const PIM4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
    let jacobi = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut guesses: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    guesses.sort_by(|a, b| b.total_cmp(a));
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = guesses[i];
        let mut pp = 0.0;
        for _ in 0..20 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        let wi = 2.0 / (pp * pp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[m - 1] = 0.0;
    }
    (x, w)
}

/// Cached standard-normal rule with `n` nodes.
pub fn normal_rule(n: usize) -> Arc<NormalRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<NormalRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().expect("quadrature cache poisoned").get(&n) {
        return r.clone();
    }
    let (x, w) = gauss_hermite(n);
    let s = std::f64::consts::PI.sqrt();
    let rule = Arc::new(NormalRule {
        nodes: x.iter().map(|v| v * std::f64::consts::SQRT_2).collect(),
        weights: w.iter().map(|v| v / s).collect(),
    });
    cache.lock().expect("quadrature cache poisoned").insert(n, rule.clone());
    rule
}

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One G7/K15 panel: (Kronrod estimate, |Kronrod − Gauss|).
pub fn kronrod15(f: &impl Fn(f64) -> C64, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    (k * h, ((k - g) * h).norm())
}

// Kronrod estimate of ∫|f|; errors below a small multiple of it are round-off.
fn kronrod_abs(f: &impl Fn(f64) -> C64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = f(c).norm() * WGK[7];
    for j in 0..7 {
        let dx = h * XGK[j];
        s += (f(c - dx).norm() + f(c + dx).norm()) * WGK[j];
    }
    s * h.abs()
}

/// Adaptive bisection with G7/K15 panels.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveResult {
    pub value: C64,
    pub error: f64,
    pub evaluations: usize,
}

pub fn adaptive_kronrod(f: &impl Fn(f64) -> C64, a: f64, b: f64, abs_tol: f64, max_depth: u32) -> AdaptiveResult {
    fn rec(f: &impl Fn(f64) -> C64, a: f64, b: f64, tol: f64, depth: u32, out: &mut AdaptiveResult) {
        let (v, e) = kronrod15(f, a, b);
        out.evaluations += 15;
        if e <= tol || depth == 0 || e <= 64.0 * f64::EPSILON * kronrod_abs(f, a, b) {
            out.value += v;
            out.error += e;
            return;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth - 1, out);
        rec(f, m, b, 0.5 * tol, depth - 1, out);
    }
    let mut out = AdaptiveResult {
        value: C64::new(0.0, 0.0),
        error: 0.0,
        evaluations: 0,
    };
    rec(f, a, b, abs_tol, max_depth, &mut out);
    out
}

/// Pairwise summation; result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[C64]) -> C64 {
    if xs.len() <= 16 {
        return xs.iter().fold(C64::new(0.0, 0.0), |a, b| a + b);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
