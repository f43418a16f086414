//! Drift of represented processes, measure-changed drifts, expectations for
//! processes with independent increments and discrete-time compensators.

use crate::calculus::girsanov_adjust;
use crate::error::{Error, Result};
use crate::models::{DiscreteModel, LevyTriplet, QuadratureConfig};
use crate::repfn::{is_nan_value, RepFn};
use crate::C64;

/// Drift `b^{ξ∘X}` split into its three contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    /// `linear_part + quadratic_part + jump_part`.
    pub total: Vec<C64>,
    /// `Dξ(0)·b`.
    pub linear_part: Vec<C64>,
    /// `½ Σ D²ᵢⱼξ(0) cᵢⱼ`.
    pub quadratic_part: Vec<C64>,
    /// `∫ (ξ(x) − Dξ(0)h(x)) F(dx)`.
    pub jump_part: Vec<C64>,
    pub quadrature_error: f64,
    /// `Σ Dᵢξ(0) Dⱼη(0) cᵢⱼ` for measure-changed drifts (already in the quadratic part).
    pub cross_term: Option<Vec<C64>>,
}

fn zeros(n: usize) -> Vec<C64> {
    vec![C64::new(0.0, 0.0); n]
}

/// Drift of `ξ∘X` with default quadrature settings.
pub fn drift(xi: &RepFn, t: &LevyTriplet) -> Result<DriftReport> {
    drift_with(xi, t, &QuadratureConfig::default())
}

pub fn drift_with(xi: &RepFn, t: &LevyTriplet, cfg: &QuadratureConfig) -> Result<DriftReport> {
    if xi.input_dim() != t.dim() {
        return Err(Error::DimensionMismatch {
            expected: t.dim(),
            got: xi.input_dim(),
        });
    }
    let n = xi.output_dim();
    if xi.is_literal_zero() {
        return Ok(DriftReport {
            total: zeros(n),
            linear_part: zeros(n),
            quadratic_part: zeros(n),
            jump_part: zeros(n),
            quadrature_error: 0.0,
            cross_term: None,
        });
    }
    let jet = xi.jet_at_zero();
    let linear_part = jet.jacobian_times(t.drift());
    let quadratic_part = jet.half_hessian_contract(t.diffusion());

    let (jump_part, quadrature_error) = if t.jumps().total_mass() == 0.0 {
        (zeros(n), 0.0)
    } else {
        // ∫ ξ − Dξ h = ∫ (ξ(x) − Dξ x) + Dξ ∫ (x − h(x))
        let jac = jet.jacobian.clone();
        let integrand = move |x: &[f64]| -> Vec<C64> {
            let v = xi.eval_real_unchecked(x);
            v.iter()
                .zip(&jac)
                .map(|(vi, row)| {
                    let lin: C64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
                    vi - lin
                })
                .collect()
        };
        let r = t.jumps().integrate(n, &integrand, cfg)?;
        let moment = t.jumps().truncation_moment(t.truncation(), cfg)?;
        let shift = jet.jacobian_times(&moment);
        let jp = r.value.iter().zip(&shift).map(|(a, b)| a + b).collect();
        (jp, r.error)
    };
    let total = (0..n)
        .map(|k| linear_part[k] + quadratic_part[k] + jump_part[k])
        .collect();
    Ok(DriftReport {
        total,
        linear_part,
        quadratic_part,
        jump_part,
        quadrature_error,
        cross_term: None,
    })
}

/// Drift of `ξ∘X` under `dQ/dP = ℰ(η∘X)`, i.e. the drift of `(1+η)ξ∘X`.
pub fn drift_q(xi: &RepFn, eta: &RepFn, t: &LevyTriplet) -> Result<DriftReport> {
    drift_q_with(xi, eta, t, &QuadratureConfig::default())
}

pub fn drift_q_with(xi: &RepFn, eta: &RepFn, t: &LevyTriplet, cfg: &QuadratureConfig) -> Result<DriftReport> {
    let adjusted = girsanov_adjust(xi, eta)?;
    if !eta.is_literal_zero() {
        let d = drift_with(eta, t, cfg)?;
        if d.total.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Usage("drift of eta is not finite".into()));
        }
    }
    let mut report = drift_with(&adjusted, t, cfg)?;
    let jx = xi.jet_at_zero();
    let je = eta.jet_at_zero();
    let c = t.diffusion();
    let cross = jx
        .jacobian
        .iter()
        .map(|row| {
            let mut s = C64::new(0.0, 0.0);
            for (i, di) in row.iter().enumerate() {
                for (j, dj) in je.jacobian[0].iter().enumerate() {
                    s += di * dj * c[i][j];
                }
            }
            s
        })
        .collect();
    report.cross_term = Some(cross);
    Ok(report)
}

fn check_time(t_end: f64) -> Result<()> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Usage(format!("time must be finite and >= 0, got {t_end}")));
    }
    Ok(())
}

/// `E[(ξ∘X)_T] = b^{ξ∘X}·T` for Lévy `X`.
pub fn expectation_pii(xi: &RepFn, t: &LevyTriplet, t_end: f64) -> Result<Vec<C64>> {
    check_time(t_end)?;
    Ok(drift(xi, t)?.total.iter().map(|b| b * t_end).collect())
}

/// `E[ℰ(ξ∘X)_T] = exp(b^{ξ∘X}·T)` for scalar `ξ` and Lévy `X`.
pub fn expectation_stoch_exp(xi: &RepFn, t: &LevyTriplet, t_end: f64) -> Result<C64> {
    check_time(t_end)?;
    if xi.output_dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: xi.output_dim(),
        });
    }
    Ok((drift(xi, t)?.total[0] * t_end).exp())
}

fn periods(t_end: f64) -> Result<i32> {
    check_time(t_end)?;
    let n = t_end.floor();
    if n > i32::MAX as f64 {
        return Err(Error::Usage("too many periods".into()));
    }
    Ok(n as i32)
}

fn check_discrete_dims(xi: &RepFn, m: &DiscreteModel) -> Result<()> {
    if xi.input_dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: xi.input_dim(),
        });
    }
    Ok(())
}

fn eval_at(xi: &RepFn, x: &[f64]) -> Result<Vec<C64>> {
    let v = xi.eval_real(x)?;
    if is_nan_value(&v) {
        return Err(Error::NanIntegrand { point: x.to_vec() });
    }
    Ok(v)
}

/// One-period expectation `E[ξ(ΔX)]`.
pub fn discrete_mean(xi: &RepFn, m: &DiscreteModel) -> Result<Vec<C64>> {
    check_discrete_dims(xi, m)?;
    let mut acc = zeros(xi.output_dim());
    for (x, p) in m.support() {
        for (a, v) in acc.iter_mut().zip(eval_at(xi, x)?) {
            *a += v * p;
        }
    }
    Ok(acc)
}

/// `B_T = ⌊T⌋·E[ξ(ΔX)]`.
pub fn discrete_compensator(xi: &RepFn, m: &DiscreteModel, t_end: f64) -> Result<Vec<C64>> {
    let n = periods(t_end)?;
    let mean = discrete_mean(xi, m)?;
    Ok(mean.iter().map(|v| v * n as f64).collect())
}

fn scalar_output(xi: &RepFn) -> Result<()> {
    if xi.output_dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: xi.output_dim(),
        });
    }
    Ok(())
}

/// `E[ℰ(ξ∘X)_T] = (E[1+ξ(ΔX)])^{⌊T⌋}`.
pub fn discrete_stoch_exp(xi: &RepFn, m: &DiscreteModel, t_end: f64) -> Result<C64> {
    scalar_output(xi)?;
    let n = periods(t_end)?;
    let factor = discrete_mean(xi, m)?[0] + 1.0;
    Ok(factor.powi(n))
}

/// `E_Q[ℰ(ξ∘X)_T]` with `dQ/dP ∝ ℰ(η∘X)`:
/// `(E[(1+η)(1+ξ)] / E[1+η])^{⌊T⌋}`.
pub fn discrete_q_stoch_exp(xi: &RepFn, eta: &RepFn, m: &DiscreteModel, t_end: f64) -> Result<C64> {
    scalar_output(xi)?;
    scalar_output(eta)?;
    check_discrete_dims(xi, m)?;
    check_discrete_dims(eta, m)?;
    let n = periods(t_end)?;
    let mut num = C64::new(0.0, 0.0);
    let mut den = C64::new(0.0, 0.0);
    for (x, p) in m.support() {
        let w = eval_at(eta, x)?[0] + 1.0;
        let f = eval_at(xi, x)?[0] + 1.0;
        num += w * f * p;
        den += w * p;
    }
    if den.im != 0.0 {
        return Err(Error::Usage("eta must be real-valued".into()));
    }
    if den.re <= 0.0 {
        return Err(Error::DegenerateMeasureChange { normalizer: den.re });
    }
    Ok((num / den.re).powi(n))
}
