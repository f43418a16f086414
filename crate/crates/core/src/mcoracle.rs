//! Monte Carlo oracle: exact simulation of finite-activity Lévy increments,
//! pathwise stochastic exponentials and density reweighting.
//!
//! Every path `i` draws from its own ChaCha stream `(seed, i)`, and samples
//! are reduced in path order, so estimates are bit-identical for any number
//! of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::{DiscreteModel, JumpMeasure, LevyTriplet, MeasureKind, QuadratureConfig, TruncationSpec};
use crate::pricing::MargrabeModel;
use crate::quadrature::pairwise_sum;
use crate::repfn::{is_nan_value, RepFn};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Minimum number of consecutive paths handed to one worker.
    pub batch_size: usize,
    /// Pair every path with the one whose normal draws are negated.
    pub antithetic: bool,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_paths: 100_000,
            seed: 20_181_124,
            batch_size: 1024,
            antithetic: false,
            threads: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::Usage("n_paths must be at least 2".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Usage("batch_size must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Usage("threads must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: C64,
    pub std_error: f64,
    /// Paths requested.
    pub n_paths: usize,
    /// Independent samples actually averaged (pairs when antithetic,
    /// non-finite samples excluded).
    pub n_effective: usize,
    pub non_finite: usize,
    /// Sample kurtosis of `|sample − mean|`.
    pub kurtosis: f64,
}

impl McEstimate {
    /// Kurtosis above 100 suggests the standard error is unreliable.
    pub fn heavy_tailed(&self) -> bool {
        self.kurtosis > 100.0
    }

    /// `|target − mean| / std_error` (0 when both coincide exactly).
    pub fn z_score(&self, target: C64) -> f64 {
        let d = (target - self.mean).norm();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

fn normal(rng: &mut ChaCha8Rng, negate: bool) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    if negate {
        -z
    } else {
        z
    }
}

/// One terminal draw: standard normals for the diffusion and the jump sizes.
#[derive(Debug, Clone)]
struct Draw {
    z: Vec<f64>,
    jumps: Vec<Vec<f64>>,
}

fn sample_jump(f: &JumpMeasure, rng: &mut ChaCha8Rng, negate: bool) -> Vec<f64> {
    match f.kind() {
        MeasureKind::Atoms(atoms) => {
            let total: f64 = atoms.iter().map(|a| a.intensity).sum();
            let mut u = rng.random::<f64>() * total;
            for a in atoms {
                if u < a.intensity {
                    return a.point.clone();
                }
                u -= a.intensity;
            }
            atoms.last().expect("nonempty atoms").point.clone()
        }
        MeasureKind::GaussianPush(g) => {
            let y: Vec<f64> = (0..g.mean().len()).map(|_| normal(rng, negate)).collect();
            g.jump_from_normal(&y)
        }
        MeasureKind::Sum(parts) => {
            let live: Vec<&JumpMeasure> = parts.iter().filter(|p| p.total_mass() > 0.0).collect();
            let total: f64 = live.iter().map(|p| p.total_mass()).sum();
            let mut u = rng.random::<f64>() * total;
            for p in &live {
                let m = p.total_mass();
                if u < m {
                    return sample_jump(p, rng, negate);
                }
                u -= m;
            }
            sample_jump(live.last().expect("positive mass"), rng, negate)
        }
        MeasureKind::Image { base, map } => {
            let x = sample_jump(base, rng, negate);
            match map.eval_real(&x) {
                Ok(y) if !is_nan_value(&y) => y.iter().map(|z| z.re).collect(),
                _ => vec![f64::NAN; f.dim()],
            }
        }
    }
}

fn draw(t: &LevyTriplet, horizon: f64, rng: &mut ChaCha8Rng, negate: bool) -> Draw {
    let d = t.dim();
    let z = (0..d).map(|_| normal(rng, negate)).collect();
    let rate = t.jumps().total_mass() * horizon;
    let n = if rate > 0.0 {
        Poisson::new(rate).expect("finite positive rate").sample(rng) as usize
    } else {
        0
    };
    let jumps = (0..n).map(|_| sample_jump(t.jumps(), rng, negate)).collect();
    Draw { z, jumps }
}

/// Deterministic part of `X_T − X_0`: `b·T − T·∫h dF`, and `chol(c)·√T`.
struct Skeleton {
    shift: Vec<f64>,
    scaled_factor: Vec<Vec<f64>>,
}

impl Skeleton {
    fn new(t: &LevyTriplet, horizon: f64) -> Result<Self> {
        let cfg = QuadratureConfig::default();
        let d = t.dim();
        // ∫x dF − ∫(x − h) dF = ∫h dF
        let m_all = t.jumps().truncation_moment(&TruncationSpec::zero(d), &cfg)?;
        let m_h = t.jumps().truncation_moment(t.truncation(), &cfg)?;
        let shift = (0..d).map(|i| (t.drift()[i] - (m_all[i] - m_h[i])) * horizon).collect();
        let sq = horizon.sqrt();
        let scaled_factor = t
            .diffusion_factor()
            .into_iter()
            .map(|row| row.into_iter().map(|v| v * sq).collect())
            .collect();
        Ok(Skeleton { shift, scaled_factor })
    }

    /// Continuous part of the increment (drift, compensation and Brownian).
    fn continuous(&self, z: &[f64]) -> Vec<f64> {
        self.shift
            .iter()
            .zip(&self.scaled_factor)
            .map(|(s, row)| s + row.iter().zip(z).map(|(l, z)| l * z).sum::<f64>())
            .collect()
    }

    fn increment(&self, dr: &Draw) -> Vec<f64> {
        let mut x = self.continuous(&dr.z);
        for j in &dr.jumps {
            for (xi, ji) in x.iter_mut().zip(j) {
                *xi += ji;
            }
        }
        x
    }
}

fn check_triplet(t: &LevyTriplet, horizon: f64) -> Result<()> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::Usage(format!("horizon must be finite and >= 0, got {horizon}")));
    }
    if !t.jumps().total_mass().is_finite() {
        return Err(Error::InvalidModel("jump measure must have finite mass".into()));
    }
    Ok(())
}

/// Draws `X_T − X_0`.
pub fn sample_increment(t: &LevyTriplet, horizon: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    Ok(IncrementSampler::new(t, horizon)?.sample(rng))
}

/// Repeated draws of `X_T − X_0` sharing the compensator computation.
pub struct IncrementSampler<'a> {
    triplet: &'a LevyTriplet,
    horizon: f64,
    skeleton: Skeleton,
}

impl<'a> IncrementSampler<'a> {
    pub fn new(t: &'a LevyTriplet, horizon: f64) -> Result<Self> {
        check_triplet(t, horizon)?;
        Ok(IncrementSampler {
            triplet: t,
            horizon,
            skeleton: Skeleton::new(t, horizon)?,
        })
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.skeleton.increment(&draw(self.triplet, self.horizon, rng, false))
    }
}

/// Pathwise `ℰ(ξ∘X)_T` for a scalar `ξ`.
struct StochExp<'a> {
    xi: &'a RepFn,
    jac: Vec<C64>,
    // ½ΣD²ξ c T − ½ Dξ c Dξᵀ T
    ito: C64,
}

impl<'a> StochExp<'a> {
    fn new(xi: &'a RepFn, t: &LevyTriplet, horizon: f64) -> Result<Self> {
        if xi.input_dim() != t.dim() {
            return Err(Error::DimensionMismatch {
                expected: t.dim(),
                got: xi.input_dim(),
            });
        }
        if xi.output_dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: xi.output_dim(),
            });
        }
        let jet = xi.jet_at_zero();
        let c = t.diffusion();
        let jac = jet.jacobian[0].clone();
        let half_hess = jet.half_hessian_contract(c)[0];
        let mut qv = C64::new(0.0, 0.0);
        for i in 0..jac.len() {
            for j in 0..jac.len() {
                qv += jac[i] * c[i][j] * jac[j];
            }
        }
        Ok(StochExp {
            xi,
            jac,
            ito: (half_hess - 0.5 * qv) * horizon,
        })
    }

    fn value(&self, continuous: &[f64], jumps: &[Vec<f64>]) -> C64 {
        let lin: C64 = self.jac.iter().zip(continuous).map(|(a, x)| a * x).sum();
        let mut prod = (lin + self.ito).exp();
        for j in jumps {
            let y = self.xi.eval_real(j).map(|v| v[0]).unwrap_or(C64::new(f64::NAN, 0.0));
            prod *= 1.0 + y;
        }
        prod
    }
}

fn finite(z: C64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Runs `sample(rng, negate) -> (numerator, weight)` over all paths and
/// returns the ratio estimate `Σ numerator / Σ weight`.
fn estimate<F>(cfg: &SimConfig, sample: F) -> Result<McEstimate>
where
    F: Fn(&mut ChaCha8Rng, bool) -> Result<(C64, f64)> + Sync,
{
    cfg.validate()?;
    let n = if cfg.antithetic {
        cfg.n_paths.div_ceil(2)
    } else {
        cfg.n_paths
    };
    let run = || -> Result<Vec<(C64, f64)>> {
        (0..n)
            .into_par_iter()
            .with_min_len(cfg.batch_size)
            .map(|i| {
                let (a, w) = sample(&mut path_rng(cfg.seed, i as u64), false)?;
                if !cfg.antithetic {
                    return Ok((a, w));
                }
                let (a2, w2) = sample(&mut path_rng(cfg.seed, i as u64), true)?;
                Ok((0.5 * (a + a2), 0.5 * (w + w2)))
            })
            .collect()
    };
    let samples = match cfg.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Usage(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let good: Vec<(C64, f64)> = samples
        .into_iter()
        .filter(|(a, w)| finite(*a) && w.is_finite())
        .collect();
    let bad = n - good.len();
    if bad * 1000 > n {
        return Err(Error::TooManyNonFinite { bad, total: n });
    }
    let m = good.len();
    if m < 2 {
        return Err(Error::TooManyNonFinite { bad, total: n });
    }
    let nums: Vec<C64> = good.iter().map(|s| s.0).collect();
    let wts: Vec<C64> = good.iter().map(|s| C64::new(s.1, 0.0)).collect();
    let wsum = pairwise_sum(&wts).re;
    if wsum <= 0.0 {
        return Err(Error::DegenerateMeasureChange {
            normalizer: wsum / m as f64,
        });
    }
    let mean = pairwise_sum(&nums) / wsum;
    let resid: Vec<C64> = good.iter().map(|(a, w)| a - mean * w).collect();
    let r2: Vec<C64> = resid.iter().map(|r| C64::new(r.norm_sqr(), 0.0)).collect();
    let r4: Vec<C64> = resid.iter().map(|r| C64::new(r.norm_sqr().powi(2), 0.0)).collect();
    let s2 = pairwise_sum(&r2).re;
    let mf = m as f64;
    let std_error = (s2 * mf / (mf - 1.0)).sqrt() / wsum;
    let m2 = s2 / mf;
    let kurtosis = if m2 > 0.0 {
        pairwise_sum(&r4).re / mf / (m2 * m2)
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        std_error,
        n_paths: cfg.n_paths,
        n_effective: m,
        non_finite: bad,
        kurtosis,
    })
}

/// Estimates `E[ℰ(ξ∘X)_T]`.
pub fn mc_stoch_exp(xi: &RepFn, t: &LevyTriplet, horizon: f64, cfg: &SimConfig) -> Result<McEstimate> {
    check_triplet(t, horizon)?;
    let sk = Skeleton::new(t, horizon)?;
    let se = StochExp::new(xi, t, horizon)?;
    estimate(cfg, |rng, neg| {
        let dr = draw(t, horizon, rng, neg);
        Ok((se.value(&sk.continuous(&dr.z), &dr.jumps), 1.0))
    })
}

/// Estimates `E_Q[ℰ(ξ∘X)_T]` with `dQ/dP ∝ ℰ(η∘X)_T`. The weights are
/// normalized by their sample mean, which equals `ℰ(B^{η∘X})_T` in the limit.
pub fn mc_reweighted(xi: &RepFn, eta: &RepFn, t: &LevyTriplet, horizon: f64, cfg: &SimConfig) -> Result<McEstimate> {
    check_triplet(t, horizon)?;
    if !eta.is_real_valued() {
        return Err(Error::Usage("density integrand must be real-valued".into()));
    }
    let sk = Skeleton::new(t, horizon)?;
    let se = StochExp::new(xi, t, horizon)?;
    let we = StochExp::new(eta, t, horizon)?;
    estimate(cfg, |rng, neg| {
        let dr = draw(t, horizon, rng, neg);
        let cont = sk.continuous(&dr.z);
        let w = we.value(&cont, &dr.jumps).re;
        if w < 0.0 {
            return Err(Error::NegativeWeight { weight: w });
        }
        Ok((se.value(&cont, &dr.jumps) * w, w))
    })
}

/// Estimates `E[(S_T⁽¹⁾ − S_T⁽²⁾)⁺]` by joint simulation; a jump of −1 in a
/// coordinate sends that asset to 0 for good.
pub fn mc_margrabe(mm: &MargrabeModel, cfg: &SimConfig) -> Result<McEstimate> {
    let t = mm.assembled_triplet()?;
    let horizon = mm.maturity;
    let sk = Skeleton::new(&t, horizon)?;
    let c = t.diffusion();
    let s0 = [mm.s1, mm.s2];
    estimate(cfg, |rng, neg| {
        let dr = draw(&t, horizon, rng, neg);
        let cont = sk.continuous(&dr.z);
        let s: Vec<f64> = (0..2)
            .map(|k| {
                let mut v = s0[k] * (cont[k] - 0.5 * c[k][k] * horizon).exp();
                for j in &dr.jumps {
                    v *= 1.0 + j[k];
                }
                v
            })
            .collect();
        Ok((C64::new((s[0] - s[1]).max(0.0), 0.0), 1.0))
    })
}

fn check_discrete(xi: &RepFn, m: &DiscreteModel, periods: f64) -> Result<usize> {
    if xi.input_dim() != m.dim() || xi.output_dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: xi.input_dim(),
        });
    }
    if !(periods >= 0.0 && periods.is_finite()) {
        return Err(Error::Usage(format!("horizon must be finite and >= 0, got {periods}")));
    }
    Ok(periods.floor() as usize)
}

fn draw_discrete<'a>(m: &'a DiscreteModel, rng: &mut ChaCha8Rng) -> &'a [f64] {
    let mut u = rng.random::<f64>();
    for (x, p) in m.support() {
        if u < *p {
            return x;
        }
        u -= p;
    }
    &m.support().last().expect("nonempty support").0
}

fn factor(xi: &RepFn, x: &[f64]) -> C64 {
    match xi.eval_real(x) {
        Ok(v) if !is_nan_value(&v) => 1.0 + v[0],
        _ => C64::new(f64::NAN, 0.0),
    }
}

/// Discrete-time `E_Q[Π(1+ξ(ΔX_k))]` with `dQ/dP ∝ Π(1+η(ΔX_k))` over
/// `⌊T⌋` periods; `eta = None` gives the plain expectation.
pub fn mc_discrete(
    xi: &RepFn,
    eta: Option<&RepFn>,
    m: &DiscreteModel,
    periods: f64,
    cfg: &SimConfig,
) -> Result<McEstimate> {
    let n = check_discrete(xi, m, periods)?;
    if let Some(e) = eta {
        check_discrete(e, m, periods)?;
        if !e.is_real_valued() {
            return Err(Error::Usage("density integrand must be real-valued".into()));
        }
    }
    estimate(cfg, |rng, _| {
        let mut a = C64::new(1.0, 0.0);
        let mut w = 1.0;
        for _ in 0..n {
            let x = draw_discrete(m, rng);
            a *= factor(xi, x);
            if let Some(e) = eta {
                let f = factor(e, x).re;
                if f < 0.0 {
                    return Err(Error::NegativeWeight { weight: f });
                }
                w *= f;
            }
        }
        Ok((a * w, w))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{rep_exp_affine, rep_exp_utility};
    use crate::models::Atom;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn merton_1d() -> LevyTriplet {
        let f = JumpMeasure::gaussian_push(0.5, vec![-0.1], vec![vec![0.0225]]).unwrap();
        LevyTriplet::new(vec![0.05], vec![vec![0.04]], f, TruncationSpec::unit_clip(1)).unwrap()
    }

    fn atoms_1d() -> LevyTriplet {
        let f = JumpMeasure::atoms(
            1,
            vec![
                Atom {
                    point: vec![0.3],
                    intensity: 0.7,
                },
                Atom {
                    point: vec![-0.2],
                    intensity: 1.1,
                },
            ],
        )
        .unwrap();
        LevyTriplet::new(vec![0.02], vec![vec![0.0]], f, TruncationSpec::identity(1)).unwrap()
    }

    fn cfg(n: usize) -> SimConfig {
        SimConfig {
            n_paths: n,
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_without_noise() {
        let t = LevyTriplet::diffusion_only(vec![0.3, -0.1], vec![vec![0.0; 2]; 2]).unwrap();
        let x = sample_increment(&t, 2.0, &mut path_rng(1, 0)).unwrap();
        assert_eq!(x, vec![0.6, -0.2]);
    }

    #[test]
    fn zero_integrand_is_one() {
        let e = mc_stoch_exp(&RepFn::zero(1, 1), &merton_1d(), 1.0, &cfg(1000)).unwrap();
        assert_eq!(e.mean, C64::new(1.0, 0.0));
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn increment_mean_is_drift_under_identity() {
        let t = merton_1d().retruncate(&TruncationSpec::identity(1)).unwrap();
        let n = 200_000;
        let sampler = IncrementSampler::new(&t, 1.5).unwrap();
        let xs: Vec<f64> = (0..n).map(|i| sampler.sample(&mut path_rng(3, i))[0]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        assert!((mean - t.drift()[0] * 1.5).abs() < 3.0 * se, "{mean} {se}");
    }

    #[test]
    fn poisson_small_time() {
        let t = atoms_1d();
        let horizon = 1e-3;
        let n = 1_000_000u64;
        let hits = (0..n)
            .into_par_iter()
            .filter(|&i| !draw(&t, horizon, &mut path_rng(11, i), false).jumps.is_empty())
            .count();
        let p = -(-1.8 * horizon).exp_m1();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() < 3.0 * se);
        assert!((p - 1.8 * horizon).abs() < 2e-6);
    }

    #[test]
    fn jump_counts_are_poisson() {
        let t = atoms_1d();
        let horizon = 1.5;
        let rate = 1.8 * horizon;
        let n = 1_000_000u64;
        let kmax = 9;
        let counts = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut c = vec![0u64; kmax + 1];
                c[draw(&t, horizon, &mut path_rng(5, i), false).jumps.len().min(kmax)] += 1;
                c
            })
            .reduce(
                || vec![0u64; kmax + 1],
                |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect(),
            );
        let mut pk = (-rate).exp();
        let mut tail = 1.0;
        let mut chi2 = 0.0;
        for (k, &obs) in counts.iter().enumerate() {
            let p = if k == kmax { tail } else { pk };
            let expct = p * n as f64;
            chi2 += (obs as f64 - expct).powi(2) / expct;
            tail -= pk;
            pk *= rate / (k + 1) as f64;
        }
        let pval = 1.0 - ChiSquared::new(kmax as f64).unwrap().cdf(chi2);
        assert!(pval > 1e-3, "chi2 = {chi2}, p = {pval}");
    }

    #[test]
    fn pathwise_exponential_identity() {
        let t = atoms_1d();
        let sk = Skeleton::new(&t, 2.0).unwrap();
        for v in [C64::new(0.7, 0.0), C64::new(-1.3, 2.5)] {
            let xi = rep_exp_affine(v);
            let se = StochExp::new(&xi, &t, 2.0).unwrap();
            for i in 0..2000 {
                let dr = draw(&t, 2.0, &mut path_rng(9, i), false);
                let x = sk.increment(&dr)[0];
                let direct = (v * x).exp();
                let prod = se.value(&sk.continuous(&dr.z), &dr.jumps);
                assert!((direct - prod).norm() <= 1e-12 * direct.norm(), "{direct} {prod}");
            }
        }
    }

    #[test]
    fn merton_stochastic_exponential_mean() {
        let t = merton_1d();
        let e = mc_stoch_exp(&RepFn::identity(1), &t, 1.0, &cfg(100_000)).unwrap();
        // E[ℰ(X)_1] = exp(b + ∫(x − h(x))F), integral by trapezoid over Z ~ N(−0.1, 0.15²)
        let n = 200_000;
        let (lo, hi) = (-0.1 - 12.0 * 0.15, -0.1 + 12.0 * 0.15);
        let dz = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for k in 0..=n {
            let z = lo + k as f64 * dz;
            let x = z.exp_m1();
            let dens = (-0.5 * ((z + 0.1) / 0.15).powi(2)).exp() / (0.15 * (2.0 * std::f64::consts::PI).sqrt());
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            acc += w * (x - x.clamp(-1.0, 1.0)) * dens * dz;
        }
        let exact = (0.05 + 0.5 * acc).exp();
        assert!(e.z_score(C64::new(exact, 0.0)) < 3.0, "{e:?} vs {exact}");
    }

    #[test]
    fn antithetic_agrees_with_plain() {
        let t = merton_1d();
        let xi = rep_exp_affine(C64::new(0.5, 1.0));
        let plain = mc_stoch_exp(&xi, &t, 1.0, &cfg(100_000)).unwrap();
        let anti = mc_stoch_exp(
            &xi,
            &t,
            1.0,
            &SimConfig {
                antithetic: true,
                ..cfg(100_000)
            },
        )
        .unwrap();
        let joint = (plain.std_error.powi(2) + anti.std_error.powi(2)).sqrt();
        assert!((plain.mean - anti.mean).norm() < 4.0 * joint);
    }

    #[test]
    fn deterministic_across_threads() {
        let t = merton_1d();
        let xi = rep_exp_affine(C64::new(0.5, 0.0));
        let runs: Vec<McEstimate> = [1, 4, 8]
            .iter()
            .map(|&k| {
                mc_stoch_exp(
                    &xi,
                    &t,
                    1.0,
                    &SimConfig {
                        threads: Some(k),
                        batch_size: 64,
                        ..cfg(20_000)
                    },
                )
                .unwrap()
            })
            .collect();
        assert_eq!(runs[0].mean.re.to_bits(), runs[1].mean.re.to_bits());
        assert_eq!(runs[0].mean.re.to_bits(), runs[2].mean.re.to_bits());
        assert_eq!(runs[0].std_error.to_bits(), runs[2].std_error.to_bits());
    }

    #[test]
    fn zero_density_matches_unweighted() {
        let t = merton_1d();
        let xi = rep_exp_affine(C64::new(1.0, 2.0));
        let a = mc_stoch_exp(&xi, &t, 1.0, &cfg(10_000)).unwrap();
        let b = mc_reweighted(&xi, &RepFn::zero(1, 1), &t, 1.0, &cfg(10_000)).unwrap();
        assert_eq!(a.mean, b.mean);
        assert!((a.std_error - b.std_error).abs() <= 1e-14 * a.std_error);
    }

    #[test]
    fn negative_weight_rejected() {
        let t = atoms_1d();
        let eta = rep_exp_affine(C64::new(-8.0, 0.0)); // 1 + η(−0.2) = e^{1.6} > 0, 1 + η(0.3) > 0
        assert!(mc_reweighted(&rep_exp_affine(C64::new(1.0, 0.0)), &eta, &t, 1.0, &cfg(100)).is_ok());
        let bad = RepFn::scalar(1, crate::repfn::Expr::coord(0) * -10.0).unwrap();
        assert!(matches!(
            mc_reweighted(&rep_exp_affine(C64::new(1.0, 0.0)), &bad, &t, 1.0, &cfg(1000)),
            Err(Error::NegativeWeight { .. })
        ));
    }

    #[test]
    fn trinomial_q_mgf() {
        let (pu, pm, pd) = (0.4, 0.4, 0.2);
        let m = DiscreteModel::trinomial(pu, pm, pd).unwrap();
        let ls = (pu / pd).ln() / 0.2;
        let v = 1.7;
        let e = mc_discrete(
            &rep_exp_affine(C64::new(v, 0.0)),
            Some(&rep_exp_utility(ls)),
            &m,
            3.0,
            &cfg(200_000),
        )
        .unwrap();
        let r = (pu * pd).sqrt();
        let exact = ((1.1f64.powf(v) + 0.9f64.powf(v)) * r + pm) / (2.0 * r + pm);
        assert!(e.z_score(C64::new(exact.powi(3), 0.0)) < 3.0, "{e:?} {}", exact.powi(3));
    }

    #[test]
    fn worthless_exchange_option() {
        let mm = MargrabeModel::diffusion(0.04, 0.0, 0.0, 100.0, 1e6, 1.0);
        let e = mc_margrabe(&mm, &cfg(10_000)).unwrap();
        assert_eq!(e.mean.re, 0.0);
    }
}
