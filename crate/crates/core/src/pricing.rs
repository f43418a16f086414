//! Cumulants, exponential-utility optimization, minimal-entropy cumulants and
//! the exchange-option (Margrabe) pricer for defaultable assets.

use crate::calculus::{rep_exp_affine, rep_exp_utility};
use crate::drift::{discrete_mean, drift_q_with, drift_with};
use crate::error::{Error, Result};
use crate::models::{Atom, DiscreteModel, JumpMeasure, LevyTriplet, QuadratureConfig, TruncationSpec};
use crate::quadrature::adaptive_kronrod;
use crate::C64;

fn check_1d(t: &LevyTriplet) -> Result<()> {
    if t.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: t.dim(),
        });
    }
    Ok(())
}

/// `κ(v) = b^{L(e^{vX})}`, so that `E[e^{v(X_T−X_0)}] = e^{κ(v)T}`.
pub fn cumulant(v: C64, t: &LevyTriplet) -> Result<C64> {
    cumulant_with(v, t, &QuadratureConfig::default())
}

pub fn cumulant_with(v: C64, t: &LevyTriplet, cfg: &QuadratureConfig) -> Result<C64> {
    check_1d(t)?;
    Ok(drift_with(&rep_exp_affine(v), t, cfg)?.total[0])
}

/// `κ^R(−λ)`: drift of `L(e^{−λR})` where `R = L(e^X)` is the yield.
pub fn utility_drift(lambda: f64, t: &LevyTriplet) -> Result<f64> {
    utility_drift_with(lambda, t, &QuadratureConfig::default())
}

pub fn utility_drift_with(lambda: f64, t: &LevyTriplet, cfg: &QuadratureConfig) -> Result<f64> {
    check_1d(t)?;
    let k = drift_with(&rep_exp_utility(lambda), t, cfg)?.total[0];
    if k.im != 0.0 {
        return Err(Error::NotReal { imag: k.im });
    }
    Ok(k.re)
}

/// Optimal dollar position for exponential utility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityOptimum {
    pub lambda_star: f64,
    /// Growth rate of expected disutility at the optimum: `κ^R(−λ⋆)` in
    /// continuous time, `log E[e^{−λ⋆ΔR}]` per period in discrete time.
    pub value: f64,
    /// Central-difference first derivative at `λ⋆`.
    pub derivative: f64,
    /// Central-difference second derivative at `λ⋆` (positive at a minimum).
    pub curvature: f64,
}

const GOLDEN_TOL: f64 = 1e-10;

fn minimize_1d(f: &dyn Fn(f64) -> Result<f64>, lo: f64, hi: f64) -> Result<UtilityOptimum> {
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::Usage(format!("bad bracket [{lo}, {hi}]")));
    }
    let eval = |x: f64| -> Result<f64> {
        let y = f(x)?;
        if !y.is_finite() {
            return Err(Error::Usage(format!("objective is not finite at {x}")));
        }
        Ok(y)
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (eval(c)?, eval(d)?);
    while b - a > GOLDEN_TOL * (1.0 + a.abs().max(b.abs())) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d)?;
        }
    }
    let mut x = 0.5 * (a + b);
    let edge = 1e-6 * (hi - lo);
    if x - lo < edge || hi - x < edge {
        return Err(Error::NoInteriorOptimum { lo, hi });
    }
    // Newton polish on central differences
    let h = 1e-4 * (1.0 + x.abs());
    let derivs = |x: f64| -> Result<(f64, f64, f64)> {
        let (fm, f0, fp) = (eval(x - h)?, eval(x)?, eval(x + h)?);
        Ok((f0, (fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h)))
    };
    let (mut fx, mut d1, mut d2) = derivs(x)?;
    for _ in 0..8 {
        if d2 <= 0.0 {
            break;
        }
        let step = d1 / d2;
        let nx = x - step;
        if !(lo < nx && nx < hi) {
            break;
        }
        let (nf, nd1, nd2) = derivs(nx)?;
        if nd1.abs() > d1.abs() {
            break;
        }
        (x, fx, d1, d2) = (nx, nf, nd1, nd2);
        if step.abs() < 1e-14 * (1.0 + x.abs()) {
            break;
        }
    }
    if d2 <= 0.0 {
        return Err(Error::NoInteriorOptimum { lo, hi });
    }
    Ok(UtilityOptimum {
        lambda_star: x,
        value: fx,
        derivative: d1,
        curvature: d2,
    })
}

/// Minimizes `λ ↦ κ^R(−λ)` over `bracket`, i.e. maximizes expected
/// exponential utility `−e^{κ^R(−λ)T}`.
pub fn optimize_exp_utility(t: &LevyTriplet, bracket: (f64, f64)) -> Result<UtilityOptimum> {
    optimize_exp_utility_with(t, bracket, &QuadratureConfig::default())
}

pub fn optimize_exp_utility_with(
    t: &LevyTriplet,
    bracket: (f64, f64),
    cfg: &QuadratureConfig,
) -> Result<UtilityOptimum> {
    check_1d(t)?;
    minimize_1d(&|l| utility_drift_with(l, t, cfg), bracket.0, bracket.1)
}

/// Discrete-time analogue: minimizes `log E[e^{−λ(e^{ΔX}−1)}]` per period.
pub fn optimize_exp_utility_discrete(m: &DiscreteModel, bracket: (f64, f64)) -> Result<UtilityOptimum> {
    if m.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: m.dim(),
        });
    }
    let f = |l: f64| -> Result<f64> {
        let mean = discrete_mean(&rep_exp_utility(l), m)?[0];
        Ok((1.0 + mean.re).ln())
    };
    minimize_1d(&f, bracket.0, bracket.1)
}

/// `κ_Q(v)` under the minimal entropy martingale measure `dQ/dP ∝ e^{−λ⋆R}`.
pub fn memm_cumulant(v: C64, lambda_star: f64, t: &LevyTriplet) -> Result<C64> {
    memm_cumulant_with(v, lambda_star, t, &QuadratureConfig::default())
}

pub fn memm_cumulant_with(v: C64, lambda_star: f64, t: &LevyTriplet, cfg: &QuadratureConfig) -> Result<C64> {
    check_1d(t)?;
    Ok(drift_q_with(&rep_exp_affine(v), &rep_exp_utility(lambda_star), t, cfg)?.total[0])
}

/// Two defaultable assets `S⁽ᵏ⁾ = S₀⁽ᵏ⁾ℰ(X⁽ᵏ⁾)` driven by a bivariate
/// Merton jump-diffusion martingale with extra default atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct MargrabeModel {
    pub sigma1_sq: f64,
    pub sigma12: f64,
    pub sigma2_sq: f64,
    /// Intensity `λ` of the lognormal jump part.
    pub jump_intensity: f64,
    /// Mean of the log-jump vector.
    pub jump_mean: [f64; 2],
    /// Covariance `[[s₁₁, s₁₂], [s₁₂, s₂₂]]` of the log-jump vector.
    pub jump_cov: [[f64; 2]; 2],
    /// Atoms with at least one component equal to −1.
    pub default_atoms: Vec<Atom>,
    pub s1: f64,
    pub s2: f64,
    pub maturity: f64,
}

impl MargrabeModel {
    /// Pure diffusion model without jumps or defaults.
    pub fn diffusion(sigma1_sq: f64, sigma12: f64, sigma2_sq: f64, s1: f64, s2: f64, maturity: f64) -> Self {
        MargrabeModel {
            sigma1_sq,
            sigma12,
            sigma2_sq,
            jump_intensity: 0.0,
            jump_mean: [0.0; 2],
            jump_cov: [[0.0; 2]; 2],
            default_atoms: Vec::new(),
            s1,
            s2,
            maturity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = [vec![self.sigma1_sq, self.sigma12], vec![self.sigma12, self.sigma2_sq]];
        crate::models::check_psd(&c, 2, "diffusion matrix")?;
        let s = [self.jump_cov[0].to_vec(), self.jump_cov[1].to_vec()];
        crate::models::check_psd(&s, 2, "jump covariance")?;
        if !(self.jump_intensity >= 0.0 && self.jump_intensity.is_finite()) {
            return Err(Error::InvalidModel("jump intensity must be >= 0".into()));
        }
        if self.jump_mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidModel("jump mean is not finite".into()));
        }
        for a in &self.default_atoms {
            if a.point.len() != 2 {
                return Err(Error::DimensionMismatch {
                    expected: 2,
                    got: a.point.len(),
                });
            }
            if a.point[0] != -1.0 && a.point[1] != -1.0 {
                return Err(Error::InvalidModel(format!(
                    "default atom {:?} has no component at -1",
                    a.point
                )));
            }
            if a.point.iter().any(|&x| x < -1.0) {
                return Err(Error::InvalidModel(format!("default atom {:?} lies below -1", a.point)));
            }
        }
        JumpMeasure::atoms(2, self.default_atoms.clone())?;
        if !(self.s1 > 0.0 && self.s2 > 0.0 && self.s1.is_finite() && self.s2.is_finite()) {
            return Err(Error::InvalidModel("spot values must be positive".into()));
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(Error::InvalidModel("maturity must be positive".into()));
        }
        Ok(())
    }

    /// Martingale triplet relative to `h(x) = x`: `b = 0`.
    pub fn assembled_triplet(&self) -> Result<LevyTriplet> {
        self.validate()?;
        let mut parts = Vec::new();
        if self.jump_intensity > 0.0 {
            parts.push(JumpMeasure::gaussian_push(
                self.jump_intensity,
                self.jump_mean.to_vec(),
                vec![self.jump_cov[0].to_vec(), self.jump_cov[1].to_vec()],
            )?);
        }
        if !self.default_atoms.is_empty() {
            parts.push(JumpMeasure::atoms(2, self.default_atoms.clone())?);
        }
        let jumps = match parts.len() {
            0 => JumpMeasure::none(2),
            1 => parts.pop().expect("one part"),
            _ => JumpMeasure::sum(2, parts)?,
        };
        LevyTriplet::new(
            vec![0.0, 0.0],
            vec![vec![self.sigma1_sq, self.sigma12], vec![self.sigma12, self.sigma2_sq]],
            jumps,
            TruncationSpec::identity(2),
        )
    }
}

/// `(λ₂^{Q₁}, λ₁^{Q₂})`: default intensities of each asset under the measure
/// that uses the other asset as numéraire.
pub fn default_intensities(mm: &MargrabeModel) -> (f64, f64) {
    let mut l2 = 0.0;
    let mut l1 = 0.0;
    for a in &mm.default_atoms {
        if a.point[1] == -1.0 {
            l2 += (1.0 + a.point[0]) * a.intensity;
        }
        if a.point[0] == -1.0 {
            l1 += (1.0 + a.point[1]) * a.intensity;
        }
    }
    (l2, l1)
}

/// Closed-form drift of the Margrabe transform for the Merton family.
pub fn margrabe_kappa(v: C64, mm: &MargrabeModel) -> C64 {
    let (l2, l1) = default_intensities(mm);
    let lam = mm.jump_intensity;
    let [m1, m2] = mm.jump_mean;
    let s11 = mm.jump_cov[0][0];
    let s12 = mm.jump_cov[0][1];
    let s22 = mm.jump_cov[1][1];
    let eff = mm.sigma1_sq - 2.0 * mm.sigma12 + mm.sigma2_sq;
    let e1 = (m1 + 0.5 * s11).exp();
    let e2 = (m2 + 0.5 * s22).exp();
    let w = 1.0 - v;
    let mixed = (w * m1 + v * m2 + 0.5 * w * w * s11 + v * w * s12 + 0.5 * v * v * s22).exp();
    0.5 * eff * v * (v - 1.0) - l2 + v * (lam * (e1 - e2) + l2 - l1) + lam * mixed - lam * e1
}

/// Contour settings for the exchange-option transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourConfig {
    /// Real part of the contour; must be negative.
    pub beta: f64,
    /// Initial truncation of `u ∈ [0, u_max]`, doubled while the tail matters.
    pub u_max: f64,
    pub rel_tol: f64,
    pub max_doublings: u32,
}

impl Default for ContourConfig {
    fn default() -> Self {
        ContourConfig {
            beta: -0.5,
            u_max: 200.0,
            rel_tol: 1e-9,
            max_doublings: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceReport {
    pub price: f64,
    pub kappa0: f64,
    pub lambda2_q1: f64,
    pub lambda1_q2: f64,
    /// Contribution of the last contour panel, relative to the integral.
    pub tail_mass: f64,
    pub nodes: usize,
    /// Largest `|g(−u) − conj g(u)|` seen on sample points (should be 0).
    pub symmetry_residual: f64,
}

/// Price of the option to exchange asset 2 for asset 1, payoff
/// `(S_T⁽¹⁾ − S_T⁽²⁾)⁺`:
/// `p/S₀⁽¹⁾ = Q₁[S_T⁽²⁾ = 0] + (1/π)∫₀^∞ Re[r^v e^{κ(v)T}/(v(v−1))] du`
/// with `v = β + iu`, `r = S₀⁽²⁾/S₀⁽¹⁾` and `Q₁[S_T⁽²⁾ = 0] = 1 − e^{κ(0)T}`.
pub fn margrabe_price(mm: &MargrabeModel, cfg: &ContourConfig) -> Result<PriceReport> {
    mm.validate()?;
    if !(cfg.beta < 0.0 && cfg.beta.is_finite()) {
        return Err(Error::Usage(format!(
            "contour abscissa must be negative (poles at 0 and 1), got {}",
            cfg.beta
        )));
    }
    if !(cfg.u_max > 0.0 && cfg.rel_tol > 0.0) {
        return Err(Error::Usage("u_max and rel_tol must be positive".into()));
    }
    let t = mm.maturity;
    let log_r = (mm.s2 / mm.s1).ln();
    let g = |u: f64| -> C64 {
        let v = C64::new(cfg.beta, u);
        (v * log_r + margrabe_kappa(v, mm) * t).exp() / (v * (v - 1.0))
    };
    let re = |u: f64| C64::new(g(u).re, 0.0);
    let abs_tol = cfg.rel_tol * 1e-3;

    let mut nodes = 0;
    let first = adaptive_kronrod(&re, 0.0, cfg.u_max, abs_tol, 30);
    nodes += first.evaluations;
    let mut integral = first.value.re;
    let mut hi = cfg.u_max;
    let mut tail;
    let mut doublings = 0;
    loop {
        let panel = adaptive_kronrod(&re, hi, 2.0 * hi, abs_tol, 30);
        nodes += panel.evaluations;
        integral += panel.value.re;
        hi *= 2.0;
        tail = panel.value.re.abs() / integral.abs().max(f64::MIN_POSITIVE);
        if tail < cfg.rel_tol || panel.value.re.abs() < abs_tol {
            break;
        }
        doublings += 1;
        if doublings >= cfg.max_doublings {
            return Err(Error::ContourTail { tail, u_max: hi });
        }
    }
    let symmetry_residual = (0..16)
        .map(|k| {
            let u = 0.37 + 3.1 * k as f64;
            (g(-u) - g(u).conj()).norm()
        })
        .fold(0.0, f64::max);
    let (l2, l1) = default_intensities(mm);
    let k0 = margrabe_kappa(C64::new(0.0, 0.0), mm);
    if k0.im != 0.0 {
        return Err(Error::NotReal { imag: k0.im });
    }
    let default_prob = -(k0.re * t).exp_m1();
    let ratio = default_prob + integral / std::f64::consts::PI;
    Ok(PriceReport {
        price: (mm.s1 * ratio).max(0.0),
        kappa0: k0.re,
        lambda2_q1: l2,
        lambda1_q2: l1,
        tail_mass: tail,
        nodes,
        symmetry_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::rep_margrabe;
    use crate::drift::drift;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn diffusion_cumulant_and_utility() {
        let t = LevyTriplet::diffusion_only(vec![0.07], vec![vec![0.04]]).unwrap();
        assert_eq!(cumulant(c(0.0, 0.0), &t).unwrap(), c(0.0, 0.0));
        let v = c(0.3, -1.7);
        let k = cumulant(v, &t).unwrap();
        assert!((k - (0.07 * v + 0.02 * v * v)).norm() < 1e-16);
        let l = 2.5;
        let u = utility_drift(l, &t).unwrap();
        assert!((u - (-0.07 * l + 0.02 * (l * l - l))).abs() < 1e-16);
        assert_eq!(utility_drift(0.0, &t).unwrap(), 0.0);
    }

    #[test]
    fn utility_drift_atoms_by_hand() {
        let atoms = vec![
            Atom {
                point: vec![0.2],
                intensity: 0.5,
            },
            Atom {
                point: vec![-0.3],
                intensity: 0.25,
            },
        ];
        let f = JumpMeasure::atoms(1, atoms.clone()).unwrap();
        let t = LevyTriplet::new(vec![0.01], vec![vec![0.0]], f, TruncationSpec::unit_clip(1)).unwrap();
        let l = 1.7;
        let mut hand = -0.01 * l;
        for a in &atoms {
            let x: f64 = a.point[0];
            hand += a.intensity * ((-l * x.exp_m1()).exp() - 1.0 + l * x);
        }
        assert!((utility_drift(l, &t).unwrap() - hand).abs() < 1e-15);
    }

    #[test]
    fn symmetric_yield_gives_zero_position() {
        let f = JumpMeasure::atoms(
            1,
            vec![
                Atom {
                    point: vec![1.1f64.ln()],
                    intensity: 1.0,
                },
                Atom {
                    point: vec![0.9f64.ln()],
                    intensity: 1.0,
                },
            ],
        )
        .unwrap();
        // yield jumps ±0.1 with equal intensity: zero yield drift when b = −∫(e^x−1−x)F
        let b = -((0.1 - 1.1f64.ln()) + (-0.1 - 0.9f64.ln()));
        let t = LevyTriplet::new(vec![b], vec![vec![0.0]], f, TruncationSpec::identity(1)).unwrap();
        let opt = optimize_exp_utility(&t, (-5.0, 5.0)).unwrap();
        assert!(opt.lambda_star.abs() < 1e-8, "{opt:?}");
    }

    #[test]
    fn trinomial_optimum() {
        let m = DiscreteModel::trinomial(0.4, 0.4, 0.2).unwrap();
        let opt = optimize_exp_utility_discrete(&m, (-20.0, 20.0)).unwrap();
        let exact = 2f64.ln() / 0.2;
        assert!((opt.lambda_star - exact).abs() < 1e-8, "{opt:?}");
        assert!((exact - 3.465736).abs() < 1e-6);
        assert!(opt.derivative.abs() < 1e-8);
        assert!(opt.curvature > 0.0);
        assert!(matches!(
            optimize_exp_utility_discrete(&m, (-1.0, 1.0)),
            Err(Error::NoInteriorOptimum { .. })
        ));
    }

    #[test]
    fn memm_reduces_to_cumulant() {
        let f = JumpMeasure::gaussian_push(0.5, vec![-0.1], vec![vec![0.0225]]).unwrap();
        let t = LevyTriplet::new(vec![0.05], vec![vec![0.04]], f, TruncationSpec::unit_clip(1)).unwrap();
        let v = c(1.0, 2.0);
        assert_eq!(memm_cumulant(v, 0.0, &t).unwrap(), cumulant(v, &t).unwrap());
        assert_eq!(memm_cumulant(c(0.0, 0.0), 1.3, &t).unwrap(), c(0.0, 0.0));
    }

    fn merton_pair() -> MargrabeModel {
        MargrabeModel {
            sigma1_sq: 0.04,
            sigma12: 0.03,
            sigma2_sq: 0.09,
            jump_intensity: 0.4,
            jump_mean: [-0.1, -0.05],
            jump_cov: [[0.0625, 0.02], [0.02, 0.0625]],
            default_atoms: vec![Atom {
                point: vec![0.0, -1.0],
                intensity: 0.02,
            }],
            s1: 100.0,
            s2: 100.0,
            maturity: 1.0,
        }
    }

    #[test]
    fn default_intensity_cases() {
        let mut mm = merton_pair();
        assert_eq!(default_intensities(&mm), (0.02, 0.0));
        mm.default_atoms = vec![Atom {
            point: vec![-1.0, -1.0],
            intensity: 0.01,
        }];
        assert_eq!(default_intensities(&mm), (0.0, 0.0));
        mm.default_atoms.clear();
        assert_eq!(default_intensities(&mm), (0.0, 0.0));
    }

    #[test]
    fn kappa_special_values() {
        let mm = merton_pair();
        assert!((margrabe_kappa(c(0.0, 0.0), &mm) - c(-0.02, 0.0)).norm() < 1e-15);
        let pure = MargrabeModel::diffusion(0.04, 0.03, 0.09, 100.0, 100.0, 1.0);
        let v = c(-0.5, 7.0);
        assert!((margrabe_kappa(v, &pure) - 0.5 * 0.07 * v * (v - 1.0)).norm() < 1e-14);
    }

    #[test]
    fn kappa_matches_generic_drift_at_one_point() {
        let mm = merton_pair();
        let t = mm.assembled_triplet().unwrap();
        let v = c(0.5, 2.0);
        let a = margrabe_kappa(v, &mm);
        let b = drift(&rep_margrabe(v), &t).unwrap().total[0];
        assert!((a - b).norm() <= 1e-9 * a.norm(), "{a} vs {b}");
    }

    #[test]
    fn no_jump_price_matches_classical_exchange_formula() {
        let mm = MargrabeModel::diffusion(0.04, 0.03, 0.09, 100.0, 100.0, 1.0);
        let p = margrabe_price(&mm, &ContourConfig::default()).unwrap();
        let s = 0.07f64.sqrt();
        let n = Normal::standard();
        let classical = 100.0 * (n.cdf(0.5 * s) - n.cdf(-0.5 * s));
        assert!(
            (p.price - classical).abs() <= 1e-6 * classical,
            "{} vs {classical}",
            p.price
        );
        assert!((p.price - 10.53).abs() < 0.01);
    }

    #[test]
    fn worthless_second_asset() {
        let mm = MargrabeModel::diffusion(0.04, 0.03, 0.09, 100.0, 1e-6, 1.0);
        let p = margrabe_price(&mm, &ContourConfig::default()).unwrap();
        assert!((p.price - 100.0).abs() < 1e-4 * 100.0, "{}", p.price);
    }

    #[test]
    fn price_is_homogeneous() {
        let mut mm = merton_pair();
        mm.s2 = 90.0;
        let a = margrabe_price(&mm, &ContourConfig::default()).unwrap().price;
        mm.s1 *= 3.0;
        mm.s2 *= 3.0;
        let b = margrabe_price(&mm, &ContourConfig::default()).unwrap().price;
        assert!((b - 3.0 * a).abs() <= 1e-10 * b);
    }

    #[test]
    fn invalid_contour() {
        let mm = merton_pair();
        for beta in [0.0, 1.0, 0.5] {
            let cfg = ContourConfig {
                beta,
                ..Default::default()
            };
            assert!(margrabe_price(&mm, &cfg).unwrap_err().is_usage());
        }
    }
}
