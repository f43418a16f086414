//! Drift, cumulant, utility optimum and a Monte Carlo cross-check for a
//! one-dimensional Merton log-price model.

use semirep::calculus::{rep_exp_affine, rep_log_return};
use semirep::drift::drift;
use semirep::mcoracle::{mc_stoch_exp, SimConfig};
use semirep::models::{JumpMeasure, LevyTriplet, TruncationSpec};
use semirep::pricing::{cumulant, memm_cumulant, optimize_exp_utility};
use semirep::C64;

fn main() -> semirep::Result<()> {
    // log-jumps Z ~ N(-0.1, 0.15²) at rate 0.5
    let yields = JumpMeasure::gaussian_push(0.5, vec![-0.1], vec![vec![0.0225]])?;
    let jumps = JumpMeasure::image(yields, rep_log_return())?;
    let x = LevyTriplet::new(vec![0.05], vec![vec![0.04]], jumps, TruncationSpec::unit_clip(1))?;

    let v = C64::new(1.0, 2.0);
    let report = drift(&rep_exp_affine(v), &x)?;
    println!(
        "drift of e^(vX): {} (jump part {})",
        report.total[0], report.jump_part[0]
    );
    println!("kappa(v) = {}", cumulant(v, &x)?);

    let opt = optimize_exp_utility(&x, (-20.0, 20.0))?;
    println!("lambda* = {:.10}", opt.lambda_star);
    println!(
        "kappa_Q(1) = {:e}",
        memm_cumulant(C64::new(1.0, 0.0), opt.lambda_star, &x)?
    );

    let est = mc_stoch_exp(&rep_exp_affine(v), &x, 1.0, &SimConfig::default())?;
    let exact = cumulant(v, &x)?.exp();
    println!(
        "E[e^(vX_1)] = {exact}, MC {} ± {:.2e} (z = {:.2})",
        est.mean,
        est.std_error,
        est.z_score(exact)
    );
    Ok(())
}
