//! Process models: Lévy triplets with an explicit truncation, finite-activity
//! jump measures and discrete-time i.i.d. increment laws.

use nalgebra::DMatrix;
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_kronrod, normal_rule, pairwise_sum};
use crate::repfn::RepFn;
use crate::C64;

const ATOM_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-12;
const PRUNE_WEIGHT: f64 = 1e-30;

/// Truncation applied to one component of a jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Truncation {
    /// `h(x) = 0`.
    Zero,
    /// `h(x) = x`.
    Identity,
    /// `h(x) = x·1{|x| ≤ 1}`.
    UnitClip,
}

impl Truncation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Truncation::Zero => 0.0,
            Truncation::Identity => x,
            Truncation::UnitClip => {
                if x.abs() <= 1.0 {
                    x
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Truncation::Zero => "zero",
            Truncation::Identity => "identity",
            Truncation::UnitClip => "unit_clip",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Truncation::Zero),
            "identity" => Ok(Truncation::Identity),
            "unit_clip" => Ok(Truncation::UnitClip),
            other => Err(Error::Usage(format!("unknown truncation {other:?}"))),
        }
    }
}

/// Componentwise truncation function `h: ℝᵈ → ℝᵈ`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TruncationSpec(Vec<Truncation>);

impl TruncationSpec {
    pub fn new(components: Vec<Truncation>) -> Self {
        TruncationSpec(components)
    }

    pub fn uniform(t: Truncation, dim: usize) -> Self {
        TruncationSpec(vec![t; dim])
    }

    pub fn identity(dim: usize) -> Self {
        Self::uniform(Truncation::Identity, dim)
    }

    pub fn zero(dim: usize) -> Self {
        Self::uniform(Truncation::Zero, dim)
    }

    pub fn unit_clip(dim: usize) -> Self {
        Self::uniform(Truncation::UnitClip, dim)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[Truncation] {
        &self.0
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.0.iter().zip(x).map(|(t, &xi)| t.apply(xi)).collect()
    }
}

/// Tolerances for Gauss–Hermite integration against Gaussian jump laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Nodes per dimension at the first level.
    pub initial_nodes: usize,
    /// Largest per-dimension node count tried when doubling.
    pub max_nodes: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            initial_nodes: 64,
            max_nodes: 512,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol >= 0.0 && self.abs_tol >= 0.0) {
            return Err(Error::Usage("quadrature tolerances must be non-negative".into()));
        }
        if self.initial_nodes < 2 || self.max_nodes < self.initial_nodes {
            return Err(Error::Usage("quadrature needs 2 <= initial_nodes <= max_nodes".into()));
        }
        Ok(())
    }
}

/// Result of integrating a vector-valued function against a jump measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Integral {
    pub value: Vec<C64>,
    /// Max-norm change between the last two quadrature levels (0 for atoms).
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub point: Vec<f64>,
    pub intensity: f64,
}

/// `λ` times the law of `e^Z − 1` (componentwise), `Z ~ N(m, S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPush {
    intensity: f64,
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
    chol: Vec<Vec<f64>>,
}

impl GaussianPush {
    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &[Vec<f64>] {
        &self.cov
    }

    /// Lower-triangular factor `L` with `L Lᵀ = S` (jittered if singular).
    pub fn factor(&self) -> &[Vec<f64>] {
        &self.chol
    }

    /// Maps a standard-normal vector to a jump.
    pub fn jump_from_normal(&self, y: &[f64]) -> Vec<f64> {
        let d = self.mean.len();
        (0..d)
            .map(|i| {
                let z = self.mean[i] + (0..=i).map(|j| self.chol[i][j] * y[j]).sum::<f64>();
                z.exp_m1()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureKind {
    Atoms(Vec<Atom>),
    GaussianPush(GaussianPush),
    Sum(Vec<JumpMeasure>),
    /// Image of `base` under a real-valued representing function.
    Image {
        base: Box<JumpMeasure>,
        map: RepFn,
    },
}

/// Finite-activity Lévy measure on `ℝᵈ`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpMeasure {
    dim: usize,
    kind: MeasureKind,
}

/// Open axis-aligned box `{y : lower < y < upper}` (bounds may be infinite).
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl AxisBox {
    pub fn contains(&self, y: &[f64]) -> bool {
        y.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| lo < v && v < hi)
    }
}

pub(crate) fn check_psd(m: &[Vec<f64>], dim: usize, what: &str) -> Result<()> {
    if m.len() != dim || m.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidModel(format!("{what} must be {dim}x{dim}")));
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidModel(format!("{what} has non-finite entries")));
    }
    let scale = m.iter().flatten().fold(1.0f64, |a, v| a.max(v.abs()));
    for i in 0..dim {
        for j in 0..i {
            if (m[i][j] - m[j][i]).abs() > PSD_TOL * scale {
                return Err(Error::InvalidModel(format!("{what} is not symmetric")));
            }
        }
    }
    if dim == 0 {
        return Ok(());
    }
    let mat = DMatrix::from_fn(dim, dim, |i, j| 0.5 * (m[i][j] + m[j][i]));
    let min_eig = mat.symmetric_eigenvalues().min();
    if min_eig < -PSD_TOL {
        return Err(Error::InvalidModel(format!(
            "{what} is not positive semidefinite (eigenvalue {min_eig:e})"
        )));
    }
    Ok(())
}

/// Lower Cholesky factor of a PSD matrix, retried with diagonal jitter.
pub(crate) fn psd_factor(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = m.len();
    if m.iter().flatten().all(|&v| v == 0.0) {
        return vec![vec![0.0; d]; d];
    }
    let base = DMatrix::from_fn(d, d, |i, j| 0.5 * (m[i][j] + m[j][i]));
    let l = match base.clone().cholesky() {
        Some(c) => c.l(),
        None => (base + DMatrix::identity(d, d) * PSD_TOL)
            .cholesky()
            .expect("jittered PSD matrix is positive definite")
            .l(),
    };
    (0..d).map(|i| (0..d).map(|j| l[(i, j)]).collect()).collect()
}

fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

type Integrand<'a> = &'a (dyn Fn(&[f64]) -> Vec<C64> + Sync);

fn check_finite(point: &[f64], v: &[C64]) -> Result<()> {
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NanIntegrand { point: point.to_vec() });
    }
    Ok(())
}

impl JumpMeasure {
    /// The zero measure.
    pub fn none(dim: usize) -> Self {
        JumpMeasure {
            dim,
            kind: MeasureKind::Atoms(Vec::new()),
        }
    }

    pub fn atoms(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        for a in &atoms {
            if a.point.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: a.point.len(),
                });
            }
            if !(a.intensity > 0.0 && a.intensity.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "atom intensity must be positive and finite, got {}",
                    a.intensity
                )));
            }
            if a.point.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!("atom {:?} is not finite", a.point)));
            }
            if a.point.iter().all(|&v| v == 0.0) {
                return Err(Error::InvalidModel("atom at the origin is not a jump".into()));
            }
        }
        for (i, a) in atoms.iter().enumerate() {
            for b in &atoms[..i] {
                let dist = a
                    .point
                    .iter()
                    .zip(&b.point)
                    .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
                if dist < ATOM_TOL {
                    return Err(Error::InvalidModel(format!("duplicate atoms at {:?}", a.point)));
                }
            }
        }
        Ok(JumpMeasure {
            dim,
            kind: MeasureKind::Atoms(atoms),
        })
    }

    pub fn gaussian_push(intensity: f64, mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let dim = mean.len();
        if !(intensity >= 0.0 && intensity.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "jump intensity must be non-negative and finite, got {intensity}"
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("jump mean is not finite".into()));
        }
        check_psd(&cov, dim, "jump covariance")?;
        let chol = psd_factor(&cov);
        Ok(JumpMeasure {
            dim,
            kind: MeasureKind::GaussianPush(GaussianPush {
                intensity,
                mean,
                cov,
                chol,
            }),
        })
    }

    pub fn sum(dim: usize, parts: Vec<JumpMeasure>) -> Result<Self> {
        for p in &parts {
            if p.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.dim,
                });
            }
        }
        Ok(JumpMeasure {
            dim,
            kind: MeasureKind::Sum(parts),
        })
    }

    /// Image measure `F∘map⁻¹`, integrated by composing integrands with `map`.
    pub fn image(base: JumpMeasure, map: RepFn) -> Result<Self> {
        if map.input_dim() != base.dim {
            return Err(Error::DimensionMismatch {
                expected: base.dim,
                got: map.input_dim(),
            });
        }
        if !map.is_real_valued() {
            return Err(Error::InvalidModel("image measures need a real-valued map".into()));
        }
        if map == RepFn::identity(base.dim) {
            return Ok(base);
        }
        Ok(JumpMeasure {
            dim: map.output_dim(),
            kind: MeasureKind::Image {
                base: Box::new(base),
                map,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    /// `F(ℝᵈ)`, counting mass mapped onto the origin by image measures.
    pub fn total_mass(&self) -> f64 {
        match &self.kind {
            MeasureKind::Atoms(a) => a.iter().map(|a| a.intensity).sum(),
            MeasureKind::GaussianPush(g) => g.intensity,
            MeasureKind::Sum(p) => p.iter().map(|m| m.total_mass()).sum(),
            MeasureKind::Image { base, .. } => base.total_mass(),
        }
    }

    /// True when the measure is a finite list of atoms (possibly nested in
    /// sums or images of atoms).
    pub fn is_atomic(&self) -> bool {
        match &self.kind {
            MeasureKind::Atoms(_) => true,
            MeasureKind::GaussianPush(g) => g.intensity == 0.0,
            MeasureKind::Sum(p) => p.iter().all(|m| m.is_atomic()),
            MeasureKind::Image { base, .. } => base.is_atomic(),
        }
    }

    /// Flattens an atomic measure into `(point, intensity)` pairs, mapping
    /// through images. Mapped points are not merged.
    pub fn atom_list(&self) -> Result<Vec<Atom>> {
        match &self.kind {
            MeasureKind::Atoms(a) => Ok(a.clone()),
            MeasureKind::GaussianPush(g) if g.intensity == 0.0 => Ok(Vec::new()),
            MeasureKind::GaussianPush(_) => {
                Err(Error::Usage("measure has a Gaussian component and no atom list".into()))
            }
            MeasureKind::Sum(p) => {
                let mut out = Vec::new();
                for m in p {
                    out.extend(m.atom_list()?);
                }
                Ok(out)
            }
            MeasureKind::Image { base, map } => base
                .atom_list()?
                .into_iter()
                .map(|a| {
                    let y = map.eval_real(&a.point)?;
                    if crate::repfn::is_nan_value(&y) {
                        return Err(Error::NanIntegrand { point: a.point });
                    }
                    Ok(Atom {
                        point: y.iter().map(|z| z.re).collect(),
                        intensity: a.intensity,
                    })
                })
                .collect(),
        }
    }

    /// `∫ g dF` for `g: ℝᵈ → ℂⁿ`.
    pub fn integrate(&self, n_out: usize, g: Integrand<'_>, cfg: &QuadratureConfig) -> Result<Integral> {
        cfg.validate()?;
        self.integrate_inner(n_out, g, cfg)
    }

    fn integrate_inner(&self, n_out: usize, g: Integrand<'_>, cfg: &QuadratureConfig) -> Result<Integral> {
        let zero = || vec![C64::new(0.0, 0.0); n_out];
        match &self.kind {
            MeasureKind::Atoms(atoms) => {
                let mut acc = zero();
                for a in atoms {
                    let v = g(&a.point);
                    check_finite(&a.point, &v)?;
                    for (s, vi) in acc.iter_mut().zip(&v) {
                        *s += vi * a.intensity;
                    }
                }
                Ok(Integral { value: acc, error: 0.0 })
            }
            MeasureKind::GaussianPush(gp) => {
                if gp.intensity == 0.0 {
                    return Ok(Integral {
                        value: zero(),
                        error: 0.0,
                    });
                }
                gauss_push_integral(gp, n_out, g, cfg)
            }
            MeasureKind::Sum(parts) => {
                let mut acc = zero();
                let mut err = 0.0;
                for p in parts {
                    let r = p.integrate_inner(n_out, g, cfg)?;
                    for (s, v) in acc.iter_mut().zip(&r.value) {
                        *s += v;
                    }
                    err += r.error;
                }
                Ok(Integral { value: acc, error: err })
            }
            MeasureKind::Image { base, map } => {
                let composed = |x: &[f64]| -> Vec<C64> {
                    let y = map.eval_real_unchecked(x);
                    if y.iter().any(|z| z.re.is_nan()) {
                        return vec![C64::new(f64::NAN, 0.0); n_out];
                    }
                    let yr: Vec<f64> = y.iter().map(|z| z.re).collect();
                    g(&yr)
                };
                base.integrate_inner(n_out, &composed, cfg)
            }
        }
    }

    /// `∫ (x − h(x)) F(dx)`, closed form where available.
    pub fn truncation_moment(&self, h: &TruncationSpec, cfg: &QuadratureConfig) -> Result<Vec<f64>> {
        if h.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: h.dim(),
            });
        }
        let comps = h.components();
        match &self.kind {
            MeasureKind::Atoms(atoms) => Ok((0..self.dim)
                .map(|i| {
                    atoms
                        .iter()
                        .map(|a| a.intensity * (a.point[i] - comps[i].apply(a.point[i])))
                        .sum()
                })
                .collect()),
            MeasureKind::GaussianPush(gp) => Ok((0..self.dim)
                .map(|i| {
                    let lam = gp.intensity;
                    let m = gp.mean[i];
                    let s2 = gp.cov[i][i];
                    match comps[i] {
                        Truncation::Identity => 0.0,
                        Truncation::Zero => lam * (m + 0.5 * s2).exp_m1(),
                        Truncation::UnitClip => {
                            // x·1{x > 1} with x = e^Z − 1, i.e. Z > log 2
                            let a = std::f64::consts::LN_2;
                            if s2 <= 0.0 {
                                let x = m.exp_m1();
                                return if x > 1.0 { lam * x } else { 0.0 };
                            }
                            let s = s2.sqrt();
                            lam * ((m + 0.5 * s2).exp() * norm_cdf((m + s2 - a) / s) - norm_cdf((m - a) / s))
                        }
                    }
                })
                .collect()),
            MeasureKind::Sum(parts) => {
                let mut acc = vec![0.0; self.dim];
                for p in parts {
                    for (s, v) in acc.iter_mut().zip(p.truncation_moment(h, cfg)?) {
                        *s += v;
                    }
                }
                Ok(acc)
            }
            MeasureKind::Image { .. } => {
                if comps.iter().all(|c| *c == Truncation::Identity) {
                    return Ok(vec![0.0; self.dim]);
                }
                let h = h.clone();
                let f = move |y: &[f64]| -> Vec<C64> {
                    y.iter().zip(h.apply(y)).map(|(v, hv)| C64::new(v - hv, 0.0)).collect()
                };
                let r = self.integrate(self.dim, &f, cfg)?;
                Ok(r.value.iter().map(|z| z.re).collect())
            }
        }
    }

    /// `F(G)` for a finite union `G` of open boxes. Only atomic measures are
    /// supported.
    pub fn mass_in(&self, boxes: &[AxisBox]) -> Result<f64> {
        for b in boxes {
            if b.lower.len() != self.dim || b.upper.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: b.lower.len(),
                });
            }
            if b.contains(&vec![0.0; self.dim]) {
                return Err(Error::Usage("counting boxes must exclude the origin".into()));
            }
        }
        Ok(self
            .atom_list()?
            .iter()
            .filter(|a| boxes.iter().any(|b| b.contains(&a.point)))
            .map(|a| a.intensity)
            .sum())
    }
}

fn gauss_push_level(gp: &GaussianPush, n: usize, n_out: usize, g: Integrand<'_>) -> Result<Vec<C64>> {
    const CHUNK: usize = 512;
    let rule = normal_rule(n);
    let d = gp.mean.len();
    let total = n.checked_pow(d as u32).expect("tensor grid too large");
    let n_chunks = total.div_ceil(CHUNK);
    let chunk_sums: Vec<Result<Vec<C64>>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut terms: Vec<Vec<C64>> = vec![Vec::with_capacity(CHUNK); n_out];
            let mut idx = vec![0usize; d];
            let mut y = vec![0.0; d];
            for lin in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let mut rest = lin;
                let mut w = 1.0;
                for k in idx.iter_mut() {
                    *k = rest % n;
                    rest /= n;
                }
                for (j, &k) in idx.iter().enumerate() {
                    w *= rule.weights[k];
                    y[j] = rule.nodes[k];
                }
                if w < PRUNE_WEIGHT {
                    continue;
                }
                let x = gp.jump_from_normal(&y);
                let v = g(&x);
                check_finite(&x, &v)?;
                for (t, vi) in terms.iter_mut().zip(&v) {
                    t.push(vi * w);
                }
            }
            Ok(terms.iter().map(|t| pairwise_sum(t)).collect())
        })
        .collect();
    let mut by_comp: Vec<Vec<C64>> = vec![Vec::with_capacity(n_chunks); n_out];
    for s in chunk_sums {
        for (acc, v) in by_comp.iter_mut().zip(s?) {
            acc.push(v);
        }
    }
    Ok(by_comp.iter().map(|c| pairwise_sum(c) * gp.intensity).collect())
}

fn gauss_push_integral(gp: &GaussianPush, n_out: usize, g: Integrand<'_>, cfg: &QuadratureConfig) -> Result<Integral> {
    let mut n = cfg.initial_nodes;
    if n == cfg.max_nodes {
        n = (n / 2).max(1);
    }
    let mut prev = gauss_push_level(gp, n, n_out, g)?;
    let mut rel_change = f64::INFINITY;
    while n * 2 <= cfg.max_nodes {
        n *= 2;
        let cur = gauss_push_level(gp, n, n_out, g)?;
        let diff = cur.iter().zip(&prev).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        let scale = cur.iter().fold(0.0f64, |m, a| m.max(a.norm()));
        if diff <= cfg.abs_tol.max(cfg.rel_tol * scale) {
            return Ok(Integral {
                value: cur,
                error: diff,
            });
        }
        rel_change = if scale > 0.0 { diff / scale } else { diff };
        prev = cur;
    }
    if gp.mean.len() == 1 {
        let scale = prev.iter().fold(0.0f64, |m, a| m.max(a.norm()));
        return kronrod_push_integral(gp, n_out, g, cfg.abs_tol.max(cfg.rel_tol * scale));
    }
    Err(Error::QuadratureNotConverged { nodes: n, rel_change })
}

// Integrands with kinks (truncations of image measures) defeat Gauss-Hermite;
// in one dimension adaptive bisection against the normal density finds them.
fn kronrod_push_integral(gp: &GaussianPush, n_out: usize, g: Integrand<'_>, tol: f64) -> Result<Integral> {
    const REACH: f64 = 38.0;
    let bad = std::cell::Cell::new(None::<Vec<f64>>);
    let mut value = Vec::with_capacity(n_out);
    let mut error = 0.0;
    for k in 0..n_out {
        let f = |y: f64| -> C64 {
            let x = gp.jump_from_normal(&[y]);
            let v = g(&x);
            if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                bad.set(Some(x));
                return C64::new(0.0, 0.0);
            }
            let dens = (-0.5 * y * y).exp() / (2.0 * std::f64::consts::PI).sqrt();
            v[k] * dens
        };
        let lo = adaptive_kronrod(&f, -REACH, 0.0, 0.25 * tol / gp.intensity, 40);
        let hi = adaptive_kronrod(&f, 0.0, REACH, 0.25 * tol / gp.intensity, 40);
        if let Some(point) = bad.take() {
            return Err(Error::NanIntegrand { point });
        }
        let err = (lo.error + hi.error) * gp.intensity;
        if err > tol {
            return Err(Error::QuadratureNotConverged {
                nodes: lo.evaluations + hi.evaluations,
                rel_change: err,
            });
        }
        value.push((lo.value + hi.value) * gp.intensity);
        error += err;
    }
    Ok(Integral { value, error })
}

/// Lévy triplet `(b, c, F)` relative to the truncation `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyTriplet {
    drift: Vec<f64>,
    diffusion: Vec<Vec<f64>>,
    jumps: JumpMeasure,
    truncation: TruncationSpec,
}

impl LevyTriplet {
    pub fn new(
        drift: Vec<f64>,
        diffusion: Vec<Vec<f64>>,
        jumps: JumpMeasure,
        truncation: TruncationSpec,
    ) -> Result<Self> {
        let d = drift.len();
        if drift.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("drift is not finite".into()));
        }
        check_psd(&diffusion, d, "diffusion matrix")?;
        if jumps.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: jumps.dim(),
            });
        }
        if truncation.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: truncation.dim(),
            });
        }
        let mass = jumps.total_mass();
        if !mass.is_finite() {
            return Err(Error::InvalidModel("jump measure has infinite mass".into()));
        }
        let moment = jumps.truncation_moment(&truncation, &QuadratureConfig::default())?;
        if moment.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel(
                "truncation is not admissible: jump first moment is infinite".into(),
            ));
        }
        Ok(LevyTriplet {
            drift,
            diffusion,
            jumps,
            truncation,
        })
    }

    /// Pure diffusion with no jumps and identity truncation.
    pub fn diffusion_only(drift: Vec<f64>, diffusion: Vec<Vec<f64>>) -> Result<Self> {
        let d = drift.len();
        Self::new(drift, diffusion, JumpMeasure::none(d), TruncationSpec::identity(d))
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    pub fn drift(&self) -> &[f64] {
        &self.drift
    }

    pub fn diffusion(&self) -> &[Vec<f64>] {
        &self.diffusion
    }

    pub fn jumps(&self) -> &JumpMeasure {
        &self.jumps
    }

    pub fn truncation(&self) -> &TruncationSpec {
        &self.truncation
    }

    /// Lower factor `σ` with `σσᵀ = c`.
    pub fn diffusion_factor(&self) -> Vec<Vec<f64>> {
        psd_factor(&self.diffusion)
    }

    /// Same process, drift expressed relative to `h_new`:
    /// `b′ = b + ∫(h_new − h) dF`.
    pub fn retruncate(&self, h_new: &TruncationSpec) -> Result<LevyTriplet> {
        self.retruncate_with(h_new, &QuadratureConfig::default())
    }

    pub fn retruncate_with(&self, h_new: &TruncationSpec, cfg: &QuadratureConfig) -> Result<LevyTriplet> {
        if h_new.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: h_new.dim(),
            });
        }
        let m_old = self.jumps.truncation_moment(&self.truncation, cfg)?;
        let m_new = self.jumps.truncation_moment(h_new, cfg)?;
        if m_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::Usage("target truncation is not admissible".into()));
        }
        let drift = self
            .drift
            .iter()
            .zip(m_old.iter().zip(&m_new))
            .map(|(b, (mo, mn))| b + (mo - mn))
            .collect();
        Ok(LevyTriplet {
            drift,
            diffusion: self.diffusion.clone(),
            jumps: self.jumps.clone(),
            truncation: h_new.clone(),
        })
    }
}

/// Law of an i.i.d. increment `ΔX_k` with finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    dim: usize,
    support: Vec<(Vec<f64>, f64)>,
}

impl DiscreteModel {
    pub fn new(dim: usize, support: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidModel("discrete support is empty".into()));
        }
        for (x, p) in &support {
            if x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: x.len(),
                });
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!("support point {x:?} is not finite")));
            }
            if !(*p > 0.0 && *p <= 1.0) {
                return Err(Error::InvalidModel(format!("probability {p} is outside (0, 1]")));
            }
        }
        let total: f64 = support.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("probabilities sum to {total}, not 1")));
        }
        for (i, (a, _)) in support.iter().enumerate() {
            for (b, _) in &support[..i] {
                let dist = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
                if dist < ATOM_TOL {
                    return Err(Error::InvalidModel(format!("duplicate support point {a:?}")));
                }
            }
        }
        Ok(DiscreteModel { dim, support })
    }

    /// Log-returns `log 1.1, 0, log 0.9` with probabilities `p_u, p_m, p_d`.
    pub fn trinomial(p_u: f64, p_m: f64, p_d: f64) -> Result<Self> {
        Self::new(
            1,
            vec![(vec![1.1f64.ln()], p_u), (vec![0.0], p_m), (vec![0.9f64.ln()], p_d)],
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> &[(Vec<f64>, f64)] {
        &self.support
    }
}
