//! `semirep`: drifts, cumulants, exchange-option prices, utility optima and
//! Monte Carlo cross-checks for models read from JSON files.

mod model;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use model::{Model, ModelFile};
use output::{complex, complex_vec, real, to_csv, to_json};
use semirep::calculus::{rep_exp_affine, rep_exp_utility, std_rep};
use semirep::complex::parse_complex;
use semirep::drift::{
    discrete_compensator, discrete_q_stoch_exp, discrete_stoch_exp, drift_q_with, drift_with, expectation_stoch_exp,
};
use semirep::mcoracle::{mc_discrete, mc_margrabe, mc_reweighted, mc_stoch_exp, McEstimate, SimConfig};
use semirep::models::{DiscreteModel, LevyTriplet, QuadratureConfig, Truncation, TruncationSpec};
use semirep::pricing::{
    cumulant_with, margrabe_kappa, margrabe_price, memm_cumulant_with, optimize_exp_utility_discrete,
    optimize_exp_utility_with, ContourConfig, UtilityOptimum,
};
use semirep::repfn::text::parse_repfn;
use semirep::{RepFn, C64};
use serde::Deserialize;
use serde_json::json;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "semirep", version, about = "Semimartingale drift and pricing engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Model file (JSON).
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format; grids default to csv, everything else to json.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Monte Carlo seed.
    #[arg(long, global = true, default_value_t = SimConfig::default().seed)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "SEMIREP_THREADS")]
    threads: Option<usize>,
    /// Relative tolerance for quadrature, or for the contour integral in price-margrabe.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a model file and print it in canonical form.
    Model,
    /// Drift of ξ∘X split into linear, quadratic and jump parts.
    Drift {
        #[command(flatten)]
        xi: XiArgs,
        /// Re-express the model under this truncation first (one name, or one per component).
        #[arg(long, value_delimiter = ',')]
        truncation: Option<Vec<String>>,
    },
    /// Cumulant κ(v) on a grid of complex v.
    Cumulant {
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Exchange-option price by contour integration.
    PriceMargrabe {
        /// Real part of the integration contour; must be negative.
        #[arg(long, default_value_t = ContourConfig::default().beta, allow_hyphen_values = true)]
        beta: f64,
        /// Initial cut-off of the imaginary axis.
        #[arg(long, default_value_t = ContourConfig::default().u_max)]
        u_max: f64,
        /// How often the cut-off may double before the tail is reported as too large.
        #[arg(long, default_value_t = ContourConfig::default().max_doublings)]
        max_doublings: u32,
    },
    /// Optimal exponential-utility position λ⋆.
    Utility {
        #[command(flatten)]
        bracket: BracketArgs,
    },
    /// Cumulant under the minimal entropy martingale measure on a grid.
    Memm {
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        lambda: LambdaArgs,
    },
    /// Analytic value next to a Monte Carlo estimate, with z-score.
    McVerify {
        /// What to verify.
        #[arg(long, value_enum)]
        target: Target,
        /// Transform argument v for the cumulant and memm targets.
        #[arg(long, allow_hyphen_values = true)]
        v: Option<String>,
        #[command(flatten)]
        xi: XiArgs,
        #[command(flatten)]
        eta: EtaArgs,
        #[command(flatten)]
        lambda: LambdaArgs,
        /// Time horizon T (periods for discrete models; ignored for margrabe).
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        /// Simulated paths.
        #[arg(long, default_value_t = SimConfig::default().n_paths)]
        paths: usize,
        /// Minimum paths per worker task; estimates do not depend on it.
        #[arg(long, default_value_t = SimConfig::default().batch_size)]
        batch: usize,
        /// Pair each path with its mirror (all normal draws negated).
        #[arg(long)]
        antithetic: bool,
    },
    /// Closed forms for i.i.d. discrete-time models.
    Discrete {
        /// Quantity to compute.
        #[arg(long = "command", value_enum)]
        what: DiscreteCommand,
        /// Number of periods (floored).
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        /// Position λ for `utility`.
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
        /// Transform argument v for `mgf` and `q-mgf`.
        #[arg(long, allow_hyphen_values = true)]
        v: Option<String>,
        #[command(flatten)]
        xi: XiArgs,
        #[command(flatten)]
        eta: EtaArgs,
        #[command(flatten)]
        lambda_star: LambdaArgs,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Target {
    /// E[e^{vX_T}] against e^{κ(v)T}.
    Cumulant,
    /// E^Q[e^{vX_T}] under the utility-optimal measure, by reweighting.
    Memm,
    /// E ℰ(ξ∘X)_T, reweighted by ℰ(η∘X)_T when --eta is given.
    StochExp,
    /// Exchange-option price against simulated payoffs.
    Margrabe,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DiscreteCommand {
    /// E[e^{−λ(S_T/S_0 − 1)}] per unit wealth, i.e. E ℰ(exp_utility(λ)∘X)_T.
    Utility,
    /// E[e^{vX_T}].
    Mgf,
    /// E^Q[e^{vX_T}] under the utility-optimal measure.
    QMgf,
    /// E ℰ(ξ∘X)_T, or its Q version when --eta is given.
    StochExp,
    /// Compensator of ξ∘X at T.
    Compensator,
}

#[derive(Args, Debug)]
struct XiArgs {
    /// Catalog name of the representing function ξ.
    #[arg(long)]
    xi: Option<String>,
    /// Catalog parameter KEY=VALUE (complex values as a+bi).
    #[arg(long = "param", allow_hyphen_values = true)]
    params: Vec<String>,
    /// ξ in s-expression form, e.g. "(fn 1 (sub (exp x0) 1))".
    #[arg(long, conflicts_with = "xi")]
    xi_expr: Option<String>,
}

#[derive(Args, Debug)]
struct EtaArgs {
    /// Catalog name of the density function η.
    #[arg(long)]
    eta: Option<String>,
    /// Catalog parameter KEY=VALUE for η.
    #[arg(long = "eta-param", allow_hyphen_values = true)]
    eta_params: Vec<String>,
    /// η in s-expression form.
    #[arg(long, conflicts_with = "eta")]
    eta_expr: Option<String>,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Grid as JSON `{"re":{"start":..,"stop":..,"count":..},"im":{...}}`, inline or a file path.
    #[arg(long)]
    grid: Option<String>,
    /// Individual points (repeatable), complex as a+bi.
    #[arg(long = "v", allow_hyphen_values = true)]
    points: Vec<String>,
}

#[derive(Args, Debug)]
struct BracketArgs {
    /// Search interval LO,HI for λ⋆.
    #[arg(long, default_value = "-10,10", allow_hyphen_values = true)]
    bracket: String,
}

#[derive(Args, Debug)]
struct LambdaArgs {
    /// Use this λ⋆ instead of optimizing.
    #[arg(long, allow_hyphen_values = true)]
    lambda_star: Option<f64>,
    #[command(flatten)]
    bracket: BracketArgs,
}

/// Exit status with a message for stderr.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<semirep::Error> for Failure {
    fn from(e: semirep::Error) -> Self {
        Failure {
            code: if e.is_usage() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Report text plus whether some rows failed.
struct Report {
    text: String,
    partial: bool,
}

impl Report {
    fn ok(text: String) -> Self {
        Report { text, partial: false }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Axis {
    start: f64,
    stop: f64,
    count: usize,
}

impl Axis {
    fn values(&self) -> Outcome<Vec<f64>> {
        if self.count == 0 || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Failure::usage("grid axes need finite ends and count >= 1"));
        }
        if self.count == 1 {
            return Ok(vec![self.start]);
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        Ok((0..self.count).map(|k| self.start + k as f64 * step).collect())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Grid {
    re: Axis,
    #[serde(default = "zero_axis")]
    im: Axis,
}

fn zero_axis() -> Axis {
    Axis {
        start: 0.0,
        stop: 0.0,
        count: 1,
    }
}

impl GridArgs {
    fn points(&self) -> Outcome<Vec<C64>> {
        let mut out = Vec::new();
        if let Some(g) = &self.grid {
            let text = if g.trim_start().starts_with('{') {
                g.clone()
            } else {
                std::fs::read_to_string(g).map_err(|e| Failure::usage(format!("cannot read grid {g}: {e}")))?
            };
            let grid: Grid = serde_json::from_str(&text).map_err(|e| Failure::usage(format!("grid: {e}")))?;
            for im in grid.im.values()? {
                for re in grid.re.values()? {
                    out.push(C64::new(re, im));
                }
            }
        }
        for p in &self.points {
            out.push(parse_complex(p)?);
        }
        if out.is_empty() {
            return Err(Failure::usage("give --grid or at least one --v"));
        }
        Ok(out)
    }
}

fn parse_params(raw: &[String]) -> Outcome<BTreeMap<String, C64>> {
    let mut out = BTreeMap::new();
    for p in raw {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("parameter {p:?} is not KEY=VALUE")))?;
        out.insert(k.to_string(), parse_complex(v)?);
    }
    Ok(out)
}

fn resolve_fn(name: &Option<String>, params: &[String], expr: &Option<String>) -> Outcome<Option<RepFn>> {
    match (name, expr) {
        (_, Some(e)) => {
            if !params.is_empty() {
                return Err(Failure::usage("parameters apply to catalog names, not expressions"));
            }
            Ok(Some(parse_repfn(e)?))
        }
        (Some(n), None) => Ok(Some(std_rep(n, &parse_params(params)?)?.repfn)),
        (None, None) if params.is_empty() => Ok(None),
        (None, None) => Err(Failure::usage("parameters given without a function name")),
    }
}

impl XiArgs {
    fn get(&self) -> Outcome<Option<RepFn>> {
        resolve_fn(&self.xi, &self.params, &self.xi_expr)
    }

    fn require(&self) -> Outcome<RepFn> {
        self.get()?.ok_or_else(|| Failure::usage("give --xi NAME or --xi-expr"))
    }
}

impl EtaArgs {
    fn get(&self) -> Outcome<Option<RepFn>> {
        resolve_fn(&self.eta, &self.eta_params, &self.eta_expr)
    }
}

impl BracketArgs {
    fn get(&self) -> Outcome<(f64, f64)> {
        let parts: Vec<&str> = self.bracket.split(',').collect();
        let bad = || Failure::usage(format!("bracket {:?} is not LO,HI", self.bracket));
        if parts.len() != 2 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(bad());
        }
        Ok((lo, hi))
    }
}

fn parse_v(v: &Option<String>) -> Outcome<C64> {
    let v = v.as_ref().ok_or_else(|| Failure::usage("this target needs --v"))?;
    Ok(parse_complex(v)?)
}

struct Ctx {
    format: Option<Format>,
    seed: u64,
    threads: Option<usize>,
    quad: QuadratureConfig,
    tol: Option<f64>,
}

impl Ctx {
    fn format(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    fn sim(&self, paths: usize, batch: usize, antithetic: bool) -> Outcome<SimConfig> {
        let cfg = SimConfig {
            n_paths: paths,
            seed: self.seed,
            batch_size: batch,
            antithetic,
            threads: self.threads,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn levy(m: &Model) -> Outcome<LevyTriplet> {
    match m {
        Model::Levy(t) => Ok(t.clone()),
        Model::Margrabe(mm) => Ok(mm.assembled_triplet()?),
        Model::Discrete(_) => Err(Failure::usage("this command needs a levy or margrabe model")),
    }
}

fn discrete(m: &Model) -> Outcome<&DiscreteModel> {
    match m {
        Model::Discrete(d) => Ok(d),
        other => Err(Failure::usage(format!(
            "this command needs a discrete model, got {}",
            other.kind()
        ))),
    }
}

fn optimum(m: &Model, args: &LambdaArgs, quad: &QuadratureConfig) -> Outcome<f64> {
    if let Some(l) = args.lambda_star {
        return Ok(l);
    }
    let bracket = args.bracket.get()?;
    Ok(match m {
        Model::Discrete(d) => optimize_exp_utility_discrete(d, bracket)?,
        other => optimize_exp_utility_with(&levy(other)?, bracket, quad)?,
    }
    .lambda_star)
}

fn cmd_drift(m: &Model, xi: &XiArgs, truncation: &Option<Vec<String>>, ctx: &Ctx) -> Outcome<Report> {
    let xi = xi.require()?;
    let mut t = levy(m)?;
    if let Some(names) = truncation {
        let h = names
            .iter()
            .map(|s| Truncation::from_name(s.trim()))
            .collect::<semirep::Result<Vec<_>>>()?;
        let spec = match h.as_slice() {
            [one] => TruncationSpec::uniform(*one, t.dim()),
            _ => TruncationSpec::new(h),
        };
        t = t.retruncate_with(&spec, &ctx.quad)?;
    }
    let r = drift_with(&xi, &t, &ctx.quad)?;
    let text = match ctx.format(Format::Json) {
        Format::Json => to_json(&json!({
            "xi": xi.to_string(),
            "truncation": t.truncation().components().iter().map(|h| h.name()).collect::<Vec<_>>(),
            "total": complex_vec(&r.total),
            "linear_part": complex_vec(&r.linear_part),
            "quadratic_part": complex_vec(&r.quadratic_part),
            "jump_part": complex_vec(&r.jump_part),
            "quadrature_error": r.quadrature_error,
        })),
        Format::Csv => {
            let rows = (0..r.total.len())
                .map(|k| {
                    let mut row = vec![k.to_string()];
                    for z in [r.total[k], r.linear_part[k], r.quadratic_part[k], r.jump_part[k]] {
                        row.push(real(z.re));
                        row.push(real(z.im));
                    }
                    row
                })
                .collect::<Vec<_>>();
            to_csv(
                &[
                    "component",
                    "re_total",
                    "im_total",
                    "re_linear",
                    "im_linear",
                    "re_quadratic",
                    "im_quadratic",
                    "re_jump",
                    "im_jump",
                ],
                &rows,
            )
        }
    };
    Ok(Report::ok(text))
}

/// Evaluates `f` on every grid point; failures become flagged rows.
fn grid_report(
    points: &[C64],
    format: Format,
    extra: serde_json::Value,
    f: impl Fn(C64) -> semirep::Result<C64>,
) -> Report {
    let results: Vec<(C64, semirep::Result<C64>)> = points.iter().map(|&v| (v, f(v))).collect();
    let partial = results.iter().any(|(_, r)| r.is_err());
    let text = match format {
        Format::Csv => {
            let rows = results
                .iter()
                .map(|(v, r)| match r {
                    Ok(k) => vec![real(v.re), real(v.im), real(k.re), real(k.im), "ok".into()],
                    Err(e) => vec![real(v.re), real(v.im), "NaN".into(), "NaN".into(), e.to_string()],
                })
                .collect::<Vec<_>>();
            to_csv(&["re_v", "im_v", "re_kappa", "im_kappa", "status"], &rows)
        }
        Format::Json => {
            let rows = results
                .iter()
                .map(|(v, r)| match r {
                    Ok(k) => json!({ "v": complex(*v), "kappa": complex(*k) }),
                    Err(e) => json!({ "v": complex(*v), "kappa": null, "error": e.to_string() }),
                })
                .collect::<Vec<_>>();
            let mut obj = extra;
            obj["rows"] = json!(rows);
            to_json(&obj)
        }
    };
    Report { text, partial }
}

fn cmd_cumulant(m: &Model, grid: &GridArgs, ctx: &Ctx) -> Outcome<Report> {
    let points = grid.points()?;
    let format = ctx.format(Format::Csv);
    Ok(match m {
        Model::Margrabe(mm) => grid_report(&points, format, json!({}), |v| Ok(margrabe_kappa(v, mm))),
        Model::Levy(t) => {
            if t.dim() != 1 {
                return Err(Failure::usage("cumulant needs a one-dimensional levy model"));
            }
            grid_report(&points, format, json!({}), |v| cumulant_with(v, t, &ctx.quad))
        }
        Model::Discrete(_) => return Err(Failure::usage("cumulant needs a levy or margrabe model")),
    })
}

fn cmd_price(m: &Model, beta: f64, u_max: f64, max_doublings: u32, ctx: &Ctx) -> Outcome<Report> {
    let Model::Margrabe(mm) = m else {
        return Err(Failure::usage("price-margrabe needs a margrabe model"));
    };
    let cfg = ContourConfig {
        beta,
        u_max,
        rel_tol: ctx.tol.unwrap_or(ContourConfig::default().rel_tol),
        max_doublings,
    };
    let r = margrabe_price(mm, &cfg)?;
    let text = match ctx.format(Format::Json) {
        Format::Json => to_json(&json!({
            "price": r.price,
            "kappa0": r.kappa0,
            "lambda2_Q1": r.lambda2_q1,
            "lambda1_Q2": r.lambda1_q2,
            "tail_mass": r.tail_mass,
            "nodes": r.nodes,
            "symmetry_residual": r.symmetry_residual,
        })),
        Format::Csv => to_csv(
            &["price", "kappa0", "lambda2_Q1", "lambda1_Q2", "tail_mass", "nodes"],
            &[vec![
                real(r.price),
                real(r.kappa0),
                real(r.lambda2_q1),
                real(r.lambda1_q2),
                real(r.tail_mass),
                r.nodes.to_string(),
            ]],
        ),
    };
    Ok(Report::ok(text))
}

fn optimum_report(o: &UtilityOptimum, format: Format) -> String {
    match format {
        Format::Json => to_json(&json!({
            "lambda_star": o.lambda_star,
            "value": o.value,
            "derivative": o.derivative,
            "curvature": o.curvature,
        })),
        Format::Csv => to_csv(
            &["lambda_star", "value", "derivative", "curvature"],
            &[vec![
                real(o.lambda_star),
                real(o.value),
                real(o.derivative),
                real(o.curvature),
            ]],
        ),
    }
}

fn cmd_utility(m: &Model, bracket: &BracketArgs, ctx: &Ctx) -> Outcome<Report> {
    let bracket = bracket.get()?;
    let o = match m {
        Model::Discrete(d) => optimize_exp_utility_discrete(d, bracket)?,
        other => optimize_exp_utility_with(&levy(other)?, bracket, &ctx.quad)?,
    };
    Ok(Report::ok(optimum_report(&o, ctx.format(Format::Json))))
}

fn cmd_memm(m: &Model, grid: &GridArgs, lambda: &LambdaArgs, ctx: &Ctx) -> Outcome<Report> {
    let t = levy(m)?;
    let points = grid.points()?;
    let ls = optimum(m, lambda, &ctx.quad)?;
    Ok(grid_report(
        &points,
        ctx.format(Format::Csv),
        json!({ "lambda_star": ls }),
        |v| memm_cumulant_with(v, ls, &t, &ctx.quad),
    ))
}

struct Verify<'a> {
    target: Target,
    v: &'a Option<String>,
    xi: &'a XiArgs,
    eta: &'a EtaArgs,
    lambda: &'a LambdaArgs,
    horizon: f64,
    sim: SimConfig,
}

fn cmd_mc_verify(m: &Model, a: &Verify<'_>, ctx: &Ctx) -> Outcome<Report> {
    let mut horizon = a.horizon;
    let mut extra = json!({});
    let (analytic, est): (C64, McEstimate) = match (a.target, m) {
        (Target::Margrabe, Model::Margrabe(mm)) => {
            horizon = mm.maturity;
            let cfg = ContourConfig {
                rel_tol: ctx.tol.unwrap_or(ContourConfig::default().rel_tol),
                ..ContourConfig::default()
            };
            let p = margrabe_price(mm, &cfg)?.price;
            (C64::new(p, 0.0), mc_margrabe(mm, &a.sim)?)
        }
        (Target::Margrabe, _) => return Err(Failure::usage("the margrabe target needs a margrabe model")),
        (target, Model::Discrete(d)) => {
            let (xi, eta) = match target {
                Target::Cumulant => (rep_exp_affine(parse_v(a.v)?), None),
                Target::Memm => {
                    let ls = optimum(m, a.lambda, &ctx.quad)?;
                    extra["lambda_star"] = json!(ls);
                    (rep_exp_affine(parse_v(a.v)?), Some(rep_exp_utility(ls)))
                }
                _ => (a.xi.require()?, a.eta.get()?),
            };
            let analytic = match &eta {
                Some(e) => discrete_q_stoch_exp(&xi, e, d, horizon)?,
                None => discrete_stoch_exp(&xi, d, horizon)?,
            };
            (analytic, mc_discrete(&xi, eta.as_ref(), d, horizon, &a.sim)?)
        }
        (target, other) => {
            let t = levy(other)?;
            let (xi, eta) = match target {
                Target::Cumulant => (rep_exp_affine(parse_v(a.v)?), None),
                Target::Memm => {
                    let ls = optimum(m, a.lambda, &ctx.quad)?;
                    extra["lambda_star"] = json!(ls);
                    (rep_exp_affine(parse_v(a.v)?), Some(rep_exp_utility(ls)))
                }
                _ => (a.xi.require()?, a.eta.get()?),
            };
            if xi.output_dim() != 1 {
                return Err(Failure::usage("mc-verify needs a scalar ξ"));
            }
            match eta {
                Some(e) => {
                    let b = drift_q_with(&xi, &e, &t, &ctx.quad)?.total[0];
                    ((b * horizon).exp(), mc_reweighted(&xi, &e, &t, horizon, &a.sim)?)
                }
                None => (
                    expectation_stoch_exp(&xi, &t, horizon)?,
                    mc_stoch_exp(&xi, &t, horizon, &a.sim)?,
                ),
            }
        }
    };
    let z = est.z_score(analytic);
    let target = a
        .target
        .to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string();
    let text = match ctx.format(Format::Json) {
        Format::Json => {
            let mut obj = json!({
                "target": target,
                "horizon": horizon,
                "analytic": complex(analytic),
                "mean": complex(est.mean),
                "std_error": est.std_error,
                "z": z,
                "n_paths": est.n_paths,
                "n_effective": est.n_effective,
                "non_finite": est.non_finite,
                "kurtosis": est.kurtosis,
                "heavy_tailed": est.heavy_tailed(),
                "seed": a.sim.seed,
                "antithetic": a.sim.antithetic,
            });
            if let Some(ls) = extra.get("lambda_star") {
                obj["lambda_star"] = ls.clone();
            }
            to_json(&obj)
        }
        Format::Csv => to_csv(
            &[
                "target",
                "re_analytic",
                "im_analytic",
                "re_mean",
                "im_mean",
                "std_error",
                "z",
                "n_paths",
                "seed",
            ],
            &[vec![
                target,
                real(analytic.re),
                real(analytic.im),
                real(est.mean.re),
                real(est.mean.im),
                real(est.std_error),
                real(z),
                est.n_paths.to_string(),
                a.sim.seed.to_string(),
            ]],
        ),
    };
    Ok(Report::ok(text))
}

#[allow(clippy::too_many_arguments)]
fn cmd_discrete(
    m: &Model,
    what: DiscreteCommand,
    horizon: f64,
    lambda: Option<f64>,
    v: &Option<String>,
    xi: &XiArgs,
    eta: &EtaArgs,
    lambda_star: &LambdaArgs,
    ctx: &Ctx,
) -> Outcome<Report> {
    let d = discrete(m)?;
    let mut obj =
        json!({ "command": what.to_possible_value().expect("no skipped variants").get_name(), "horizon": horizon });
    let values: Vec<C64> = match what {
        DiscreteCommand::Utility => {
            let l = lambda.ok_or_else(|| Failure::usage("utility needs --lambda"))?;
            obj["lambda"] = json!(l);
            vec![discrete_stoch_exp(&rep_exp_utility(l), d, horizon)?]
        }
        DiscreteCommand::Mgf => {
            let v = parse_v(v)?;
            obj["v"] = json!(complex(v));
            vec![discrete_stoch_exp(&rep_exp_affine(v), d, horizon)?]
        }
        DiscreteCommand::QMgf => {
            let v = parse_v(v)?;
            let ls = optimum(m, lambda_star, &ctx.quad)?;
            obj["v"] = json!(complex(v));
            obj["lambda_star"] = json!(ls);
            vec![discrete_q_stoch_exp(
                &rep_exp_affine(v),
                &rep_exp_utility(ls),
                d,
                horizon,
            )?]
        }
        DiscreteCommand::StochExp => {
            let xi = xi.require()?;
            match eta.get()? {
                Some(e) => vec![discrete_q_stoch_exp(&xi, &e, d, horizon)?],
                None => vec![discrete_stoch_exp(&xi, d, horizon)?],
            }
        }
        DiscreteCommand::Compensator => discrete_compensator(&xi.require()?, d, horizon)?,
    };
    let text = match ctx.format(Format::Json) {
        Format::Json => {
            obj["value"] = if values.len() == 1 {
                json!(complex(values[0]))
            } else {
                json!(complex_vec(&values))
            };
            to_json(&obj)
        }
        Format::Csv => to_csv(
            &["component", "re_value", "im_value"],
            &values
                .iter()
                .enumerate()
                .map(|(k, z)| vec![k.to_string(), real(z.re), real(z.im)])
                .collect::<Vec<_>>(),
        ),
    };
    Ok(Report::ok(text))
}

fn load_model(path: &Option<PathBuf>) -> Outcome<Model> {
    let path = path
        .as_ref()
        .ok_or_else(|| Failure::usage("--model FILE is required"))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read model {}: {e}", path.display())))?;
    let file = ModelFile::parse(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    Ok(file.to_model()?)
}

fn run(cli: &Cli) -> Outcome<Report> {
    if let Some(t) = cli.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Failure::usage("--tol must be positive"));
        }
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    let quad = QuadratureConfig {
        rel_tol: cli.tol.unwrap_or(QuadratureConfig::default().rel_tol),
        ..QuadratureConfig::default()
    };
    let ctx = Ctx {
        format: cli.format,
        seed: cli.seed,
        threads: cli.threads,
        quad,
        tol: cli.tol,
    };
    let m = load_model(&cli.model)?;
    match &cli.command {
        Command::Model => Ok(Report::ok(to_json(&ModelFile::from_model(&m)))),
        Command::Drift { xi, truncation } => cmd_drift(&m, xi, truncation, &ctx),
        Command::Cumulant { grid } => cmd_cumulant(&m, grid, &ctx),
        Command::PriceMargrabe {
            beta,
            u_max,
            max_doublings,
        } => cmd_price(&m, *beta, *u_max, *max_doublings, &ctx),
        Command::Utility { bracket } => cmd_utility(&m, bracket, &ctx),
        Command::Memm { grid, lambda } => cmd_memm(&m, grid, lambda, &ctx),
        Command::McVerify {
            target,
            v,
            xi,
            eta,
            lambda,
            horizon,
            paths,
            batch,
            antithetic,
        } => {
            let a = Verify {
                target: *target,
                v,
                xi,
                eta,
                lambda,
                horizon: *horizon,
                sim: ctx.sim(*paths, *batch, *antithetic)?,
            };
            cmd_mc_verify(&m, &a, &ctx)
        }
        Command::Discrete {
            what,
            horizon,
            lambda,
            v,
            xi,
            eta,
            lambda_star,
        } => cmd_discrete(&m, *what, *horizon, *lambda, v, xi, eta, lambda_star, &ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            let written = match &cli.out {
                Some(p) => std::fs::write(p, &report.text),
                None => {
                    print!("{}", report.text);
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: cannot write report: {e}");
                return ExitCode::from(1);
            }
            if report.partial {
                eprintln!("error: some grid points failed; see the status column");
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
