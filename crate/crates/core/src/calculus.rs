//! Standard representing functions and the characteristics pushforward.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::drift::drift_with;
use crate::error::{Error, Result};
use crate::models::{Atom, JumpMeasure, LevyTriplet, MeasureKind, QuadratureConfig, TruncationSpec};
use crate::repfn::{is_nan_value, Expr, Predicate, RepFn};
use crate::C64;

fn x(i: usize) -> Expr {
    Expr::coord(i)
}

fn one() -> Expr {
    Expr::one()
}

fn scalar(dim: usize, e: Expr) -> RepFn {
    RepFn::scalar(dim, e).expect("catalog functions are valid")
}

/// `(1+x₁)/(1+x₂) − 1`: the ratio of two stochastic exponentials.
pub fn rep_ratio() -> RepFn {
    scalar(2, (one() + x(0)) / (one() + x(1)) - 1.0)
}

/// `log(1+x)`: log return from relative jumps.
pub fn rep_log_return() -> RepFn {
    scalar(1, (one() + x(0)).ln())
}

/// `e^{vx} − 1`.
pub fn rep_exp_affine(v: C64) -> RepFn {
    if v == C64::new(0.0, 0.0) {
        return RepFn::zero(1, 1);
    }
    scalar(1, (x(0) * v).exp() - 1.0)
}

/// `(1+x)^v − 1`, principal branch.
pub fn rep_power(v: C64) -> RepFn {
    if v == C64::new(0.0, 0.0) {
        return RepFn::zero(1, 1);
    }
    scalar(1, (one() + x(0)).powc(v) - 1.0)
}

/// `e^{−λ(eˣ−1)} − 1`: relative change in exponential utility of wealth.
pub fn rep_exp_utility(lambda: f64) -> RepFn {
    if lambda == 0.0 {
        return RepFn::zero(1, 1);
    }
    scalar(1, ((x(0).exp() - 1.0) * -lambda).exp() - 1.0)
}

/// `(e^{vx} − 1)·e^{−λ⋆(eˣ−1)}`.
pub fn rep_memm_integrand(v: C64, lambda_star: f64) -> RepFn {
    if v == C64::new(0.0, 0.0) {
        return RepFn::zero(1, 1);
    }
    scalar(1, ((x(0) * v).exp() - 1.0) * ((x(0).exp() - 1.0) * -lambda_star).exp())
}

/// `(1+x₁)(1{x₂≠−1}·((1+1{x₂≠−1}x₂)/(1+1{x₁≠−1}x₁))^v − 1)`.
///
/// The indicators keep the function finite on the default lines
/// `x₁ = −1` and `x₂ = −1`.
pub fn rep_margrabe(v: C64) -> RepFn {
    let alive1 = Expr::indicator(0, Predicate::Ne(-1.0));
    let alive2 = Expr::indicator(1, Predicate::Ne(-1.0));
    let ratio = (one() + &alive2 * &x(1)) / (one() + &alive1 * &x(0));
    scalar(2, (one() + x(0)) * (alive2 * ratio.powc(v) - 1.0))
}

/// `(1+η)ξ`: the representation whose drift under `P` is the drift of
/// `ξ∘X` under the measure with density `ℰ(η∘X)`.
pub fn girsanov_adjust(xi: &RepFn, eta: &RepFn) -> Result<RepFn> {
    if eta.output_dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: eta.output_dim(),
        });
    }
    if eta.input_dim() != xi.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: xi.input_dim(),
            got: eta.input_dim(),
        });
    }
    if eta.is_literal_zero() {
        return Ok(xi.clone());
    }
    let density = one() + eta.outputs()[0].clone();
    RepFn::new(xi.input_dim(), xi.outputs().iter().map(|e| &density * e).collect())
}

/// How Gaussian jump laws are carried through [`pushforward_characteristics`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PushforwardMode {
    /// Keep an image measure that integrates by composition.
    Exact,
    /// Replace non-atomic parts by `samples` equally weighted atoms.
    SampledAtoms { samples: usize, seed: u64 },
}

fn merge_atoms(dim: usize, atoms: Vec<Atom>) -> Result<JumpMeasure> {
    let mut merged: Vec<Atom> = Vec::new();
    for a in atoms {
        if a.point.iter().all(|&v| v == 0.0) {
            continue;
        }
        match merged
            .iter_mut()
            .find(|b| b.point.iter().zip(&a.point).all(|(p, q)| (p - q).abs() < 1e-12))
        {
            Some(b) => b.intensity += a.intensity,
            None => merged.push(a),
        }
    }
    JumpMeasure::atoms(dim, merged)
}

fn sample_atoms(f: &JumpMeasure, samples: usize, rng: &mut ChaCha20Rng) -> Result<Vec<Atom>> {
    Ok(match f.kind() {
        MeasureKind::Atoms(a) => a.clone(),
        MeasureKind::GaussianPush(gp) => {
            if gp.intensity() == 0.0 {
                return Ok(Vec::new());
            }
            let w = gp.intensity() / samples as f64;
            (0..samples)
                .map(|_| {
                    let y: Vec<f64> = (0..f.dim()).map(|_| rng.sample(StandardNormal)).collect();
                    Atom {
                        point: gp.jump_from_normal(&y),
                        intensity: w,
                    }
                })
                .collect()
        }
        MeasureKind::Sum(parts) => {
            let mut out = Vec::new();
            for p in parts {
                out.extend(sample_atoms(p, samples, rng)?);
            }
            out
        }
        MeasureKind::Image { base, map } => sample_atoms(base, samples, rng)?
            .into_iter()
            .map(|a| map_atom(map, a))
            .collect::<Result<_>>()?,
    })
}

fn map_atom(xi: &RepFn, a: Atom) -> Result<Atom> {
    let y = xi.eval_real(&a.point)?;
    if is_nan_value(&y) {
        return Err(Error::NanIntegrand { point: a.point });
    }
    Ok(Atom {
        point: y.iter().map(|z| z.re).collect(),
        intensity: a.intensity,
    })
}

/// Characteristics of `Y = ξ∘X` relative to the truncation `g`:
/// `c^Y = Dξ(0) c Dξ(0)ᵀ`, `F^Y = F∘ξ⁻¹` and
/// `b^{Y[g]} = Dξ(0)b + ½ΣD²ξ(0)c + ∫(g(ξ(x)) − Dξ(0)h(x)) F(dx)`.
pub fn pushforward_characteristics(
    xi: &RepFn,
    t: &LevyTriplet,
    g: &TruncationSpec,
    mode: PushforwardMode,
) -> Result<LevyTriplet> {
    pushforward_characteristics_with(xi, t, g, mode, &QuadratureConfig::default())
}

pub fn pushforward_characteristics_with(
    xi: &RepFn,
    t: &LevyTriplet,
    g: &TruncationSpec,
    mode: PushforwardMode,
    cfg: &QuadratureConfig,
) -> Result<LevyTriplet> {
    if xi.input_dim() != t.dim() {
        return Err(Error::DimensionMismatch {
            expected: t.dim(),
            got: xi.input_dim(),
        });
    }
    if g.dim() != xi.output_dim() {
        return Err(Error::DimensionMismatch {
            expected: xi.output_dim(),
            got: g.dim(),
        });
    }
    if !xi.is_real_valued() {
        return Err(Error::Usage(
            "pushforward needs a real-valued representing function".into(),
        ));
    }
    let n = xi.output_dim();
    let d = t.dim();
    let jumps = if t.jumps().is_atomic() {
        let atoms = t
            .jumps()
            .atom_list()?
            .into_iter()
            .map(|a| map_atom(xi, a))
            .collect::<Result<Vec<_>>>()?;
        merge_atoms(n, atoms)?
    } else {
        match mode {
            PushforwardMode::Exact => JumpMeasure::image(t.jumps().clone(), xi.clone())?,
            PushforwardMode::SampledAtoms { samples, seed } => {
                if samples == 0 {
                    return Err(Error::Usage("sampled pushforward needs samples > 0".into()));
                }
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                let atoms = sample_atoms(t.jumps(), samples, &mut rng)?
                    .into_iter()
                    .map(|a| map_atom(xi, a))
                    .collect::<Result<Vec<_>>>()?;
                merge_atoms(n, atoms)?
            }
        }
    };

    let jet = xi.jet_at_zero();
    let c = t.diffusion();
    let mut cy = vec![vec![0.0; n]; n];
    for (p, row) in cy.iter_mut().enumerate() {
        for (q, out) in row.iter_mut().enumerate() {
            let mut s = 0.0;
            for i in 0..d {
                for j in 0..d {
                    s += jet.jacobian[p][i].re * c[i][j] * jet.jacobian[q][j].re;
                }
            }
            *out = s;
        }
    }
    for p in 0..n {
        for q in 0..p {
            let m = 0.5 * (cy[p][q] + cy[q][p]);
            cy[p][q] = m;
            cy[q][p] = m;
        }
    }

    // ∫ g(ξ) − Dξ h = ∫ ξ − Dξ h − ∫ (y − g(y)) F^Y(dy)
    let report = drift_with(xi, t, cfg)?;
    let correction = if t.jumps().is_atomic() || mode == PushforwardMode::Exact {
        JumpMeasure::image(t.jumps().clone(), xi.clone())?.truncation_moment(g, cfg)?
    } else {
        jumps.truncation_moment(g, cfg)?
    };
    let by: Vec<f64> = report.total.iter().zip(&correction).map(|(b, m)| b.re - m).collect();
    LevyTriplet::new(by, cy, jumps, g.clone())
}

/// A named entry of the standard library.
#[derive(Debug, Clone, PartialEq)]
pub struct StdRep {
    pub name: &'static str,
    pub params: BTreeMap<String, C64>,
    pub repfn: RepFn,
    pub note: &'static str,
}

/// Names and parameter lists understood by [`std_rep`].
pub const CATALOG: &[(&str, &[&str], &str)] = &[
    ("identity", &["dim"], "x"),
    ("ratio", &[], "(1+x1)/(1+x2) - 1, relative jump of a ratio"),
    ("log_return", &[], "log(1+x), log return from a relative jump"),
    ("exp_affine", &["v"], "e^{vx} - 1, relative jump of e^{vX}"),
    (
        "power",
        &["v"],
        "(1+x)^v - 1, relative jump of a power of a stochastic exponential",
    ),
    (
        "exp_utility",
        &["lambda"],
        "e^{-lambda(e^x-1)} - 1, exponential utility of wealth",
    ),
    (
        "memm_integrand",
        &["v", "lambda_star"],
        "(e^{vx}-1) e^{-lambda_star(e^x-1)}, exp_affine under the minimal entropy measure",
    ),
    ("margrabe", &["v"], "exchange-option transform with default indicators"),
];

fn real_param(name: &str, key: &str, v: C64) -> Result<f64> {
    if v.im != 0.0 {
        return Err(Error::Usage(format!("{name}: parameter {key} must be real")));
    }
    Ok(v.re)
}

/// Looks up a catalog function by name.
pub fn std_rep(name: &str, params: &BTreeMap<String, C64>) -> Result<StdRep> {
    let (cname, keys, note) = CATALOG
        .iter()
        .find(|(n, _, _)| *n == name)
        .ok_or_else(|| Error::Usage(format!("unknown representing function {name:?}")))?;
    for k in params.keys() {
        if !keys.contains(&k.as_str()) {
            return Err(Error::Usage(format!("{name}: unexpected parameter {k:?}")));
        }
    }
    let get = |k: &str| -> Result<C64> {
        params
            .get(k)
            .copied()
            .ok_or_else(|| Error::Usage(format!("{name}: missing parameter {k:?}")))
    };
    let repfn = match *cname {
        "identity" => {
            let d = real_param(name, "dim", get("dim")?)?;
            if d < 1.0 || d.fract() != 0.0 {
                return Err(Error::Usage("identity: dim must be a positive integer".into()));
            }
            RepFn::identity(d as usize)
        }
        "ratio" => rep_ratio(),
        "log_return" => rep_log_return(),
        "exp_affine" => rep_exp_affine(get("v")?),
        "power" => rep_power(get("v")?),
        "exp_utility" => rep_exp_utility(real_param(name, "lambda", get("lambda")?)?),
        "memm_integrand" => rep_memm_integrand(get("v")?, real_param(name, "lambda_star", get("lambda_star")?)?),
        "margrabe" => rep_margrabe(get("v")?),
        _ => unreachable!(),
    };
    Ok(StdRep {
        name: cname,
        params: params.clone(),
        repfn,
        note,
    })
}
