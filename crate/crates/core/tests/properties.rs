mod common;

use common::*;
use proptest::prelude::*;
use semirep::calculus::{
    girsanov_adjust, pushforward_characteristics, rep_exp_affine, rep_exp_utility, rep_log_return, PushforwardMode,
};
use semirep::drift::{discrete_q_stoch_exp, discrete_stoch_exp, drift, drift_q};
use semirep::models::{Atom, DiscreteModel, JumpMeasure, LevyTriplet, MeasureKind, Truncation, TruncationSpec};
use semirep::pricing::{margrabe_kappa, margrabe_price, ContourConfig, MargrabeModel};
use semirep::RepFn;

fn truncation() -> impl Strategy<Value = Truncation> {
    prop_oneof![
        Just(Truncation::Zero),
        Just(Truncation::Identity),
        Just(Truncation::UnitClip)
    ]
}

fn atoms_1d() -> impl Strategy<Value = Vec<Atom>> {
    prop::collection::vec((-0.9f64..3.0, 0.01f64..2.0), 1..6).prop_map(|v| {
        let mut out: Vec<Atom> = Vec::new();
        for (x, w) in v {
            if x.abs() > 1e-6 && out.iter().all(|a| (a.point[0] - x).abs() > 1e-9) {
                out.push(Atom {
                    point: vec![x],
                    intensity: w,
                });
            }
        }
        if out.is_empty() {
            out.push(Atom {
                point: vec![0.5],
                intensity: 1.0,
            });
        }
        out
    })
}

// log-price jumps Z ~ N(m, s2) at rate lam
fn merton_1d(b: f64, c: f64, lam: f64, m: f64, s2: f64, h: Truncation) -> LevyTriplet {
    let yields = JumpMeasure::gaussian_push(lam, vec![m], vec![vec![s2]]).unwrap();
    let f = JumpMeasure::image(yields, rep_log_return()).unwrap();
    LevyTriplet::new(vec![b], vec![vec![c]], f, TruncationSpec::uniform(h, 1)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn jet_matches_finite_differences(tr in tree()) {
        let f = tr.repfn();
        let (dj, dh) = f.finite_difference_jet(1e-4).unwrap().relative_deviation(&f.jet_at_zero());
        prop_assert!(dj <= JET_JACOBIAN, "jacobian {dj:e}");
        prop_assert!(dh <= JET_HESSIAN, "hessian {dh:e}");
    }

    #[test]
    fn compose_follows_chain_rule(p in tree(), a in tree(), b in tree()) {
        let psi = p.repfn();
        let xi = RepFn::new(2, vec![a.centered(), b.centered()]).unwrap();
        let jet = RepFn::compose(&psi, &xi).unwrap().jet_at_zero();
        let (jac, hes) = chain_rule(&psi.jet_at_zero(), &xi.jet_at_zero());
        for i in 0..2 {
            prop_assert!(max_rel(jet.jacobian[0][i], jac[0][i]) <= 1e-12);
            for j in 0..2 {
                prop_assert!(max_rel(jet.hessian[0][i][j], hes[0][i][j]) <= 1e-12);
            }
        }
    }

    #[test]
    fn drift_is_truncation_invariant(
        b in -0.2f64..0.2, c2 in 0.0f64..0.2, lam in 0.0f64..2.0, m in -0.5f64..0.3, s2 in 0.001f64..0.3,
        h in truncation(), h2 in truncation(), vr in -2.0f64..2.0, vi in -3.0f64..3.0,
    ) {
        let t = merton_1d(b, c2, lam, m, s2, h);
        let t2 = t.retruncate(&TruncationSpec::uniform(h2, 1)).unwrap();
        let xi = rep_exp_affine(c(vr, vi));
        let x = drift(&xi, &t).unwrap().total[0];
        let y = drift(&xi, &t2).unwrap().total[0];
        prop_assert!((x - y).norm() <= RETRUNCATION * x.norm().max(1e-3), "{x} vs {y}");
    }

    #[test]
    fn retruncation_round_trip(atoms in atoms_1d(), b in -1.0f64..1.0, h in truncation(), h2 in truncation()) {
        let f = JumpMeasure::atoms(1, atoms).unwrap();
        let t = LevyTriplet::new(vec![b], vec![vec![0.0]], f, TruncationSpec::uniform(h, 1)).unwrap();
        let back = t.retruncate(&TruncationSpec::uniform(h2, 1)).unwrap()
            .retruncate(&TruncationSpec::uniform(h, 1)).unwrap();
        prop_assert!((back.drift()[0] - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }

    #[test]
    fn girsanov_zero_density_is_bit_exact(
        lam in 0.0f64..2.0, m in -0.5f64..0.3, s2 in 0.001f64..0.3, vr in -2.0f64..2.0, vi in -3.0f64..3.0,
    ) {
        let t = merton_1d(0.03, 0.04, lam, m, s2, Truncation::UnitClip);
        let xi = rep_exp_affine(c(vr, vi));
        prop_assert_eq!(girsanov_adjust(&xi, &RepFn::zero(1, 1)).unwrap(), xi.clone());
        let a = drift(&xi, &t).unwrap().total;
        let q = drift_q(&xi, &RepFn::zero(1, 1), &t).unwrap().total;
        prop_assert_eq!(a[0].re.to_bits(), q[0].re.to_bits());
        prop_assert_eq!(a[0].im.to_bits(), q[0].im.to_bits());
    }

    #[test]
    fn pushforward_preserves_atom_mass(atoms in atoms_1d(), v in -2.0f64..2.0) {
        let f = JumpMeasure::atoms(1, atoms.clone()).unwrap();
        let t = LevyTriplet::new(vec![0.0], vec![vec![0.0]], f, TruncationSpec::identity(1)).unwrap();
        let xi = rep_exp_affine(c(v, 0.0));
        let y = pushforward_characteristics(&xi, &t, &TruncationSpec::identity(1), PushforwardMode::Exact).unwrap();
        // e^{vx} − 1 is injective for v ≠ 0 and sends nonzero x to nonzero y
        let expect: f64 = if v == 0.0 { 0.0 } else { atoms.iter().map(|a| a.intensity).sum() };
        let got = match y.jumps().kind() {
            MeasureKind::Atoms(a) => {
                if v != 0.0 {
                    prop_assert_eq!(a.len(), atoms.len());
                }
                a.iter().map(|a| a.intensity).sum::<f64>()
            }
            _ => y.jumps().total_mass(),
        };
        prop_assert!((got - expect).abs() <= 1e-12 * (1.0 + expect));
    }

    #[test]
    fn discrete_closed_forms_hold(pu in 0.05f64..0.6, pd in 0.05f64..0.35, lam in -5.0f64..5.0, n in 0usize..5) {
        let pm = 1.0 - pu - pd;
        prop_assume!(pm > 0.01);
        let m = DiscreteModel::trinomial(pu, pm, pd).unwrap();
        let moves = [1.1f64.ln(), 0.0, 0.9f64.ln()];
        let got = discrete_stoch_exp(&rep_exp_utility(lam), &m, n as f64 + 0.5).unwrap();
        let brute = enumerate_trinomial([pu, pm, pd], moves, n, &|x| c((-lam * x.exp_m1()).exp(), 0.0));
        prop_assert!(max_rel(got, brute) <= CLOSED_FORM);
        let q = discrete_q_stoch_exp(&rep_exp_affine(c(0.7, 0.0)), &rep_exp_utility(lam), &m, n as f64).unwrap();
        let w = |x: f64| (-lam * x.exp_m1()).exp();
        let num = enumerate_trinomial([pu, pm, pd], moves, n, &|x| c((0.7 * x).exp() * w(x), 0.0));
        let den = enumerate_trinomial([pu, pm, pd], moves, n, &|x| c(w(x), 0.0));
        prop_assert!(max_rel(q, num / den) <= CLOSED_FORM);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn exchange_price_is_homogeneous_and_bounded(
        s1 in 50.0f64..150.0, s2 in 50.0f64..150.0, k in 0.5f64..4.0, lam in 0.0f64..0.8, d2 in 0.0f64..0.05,
    ) {
        let mut mm = MargrabeModel {
            sigma1_sq: 0.04, sigma12: 0.01, sigma2_sq: 0.06,
            jump_intensity: lam, jump_mean: [-0.05, 0.02], jump_cov: [[0.04, 0.01], [0.01, 0.05]],
            default_atoms: if d2 > 0.0 { vec![Atom { point: vec![0.1, -1.0], intensity: d2 }] } else { vec![] },
            s1, s2, maturity: 1.0,
        };
        let k0 = margrabe_kappa(c(0.0, 0.0), &mm);
        prop_assert!((k0.re + 1.1 * d2).abs() <= 1e-15);
        let p = margrabe_price(&mm, &ContourConfig::default()).unwrap().price;
        // (S₁ − S₂)⁺ ≤ S₁ and ≥ S₁ − S₂ for martingales
        prop_assert!(p <= s1 * (1.0 + 1e-9));
        prop_assert!(p >= (s1 - s2) - 1e-9 * s1);
        mm.s1 *= k;
        mm.s2 *= k;
        let pk = margrabe_price(&mm, &ContourConfig::default()).unwrap().price;
        prop_assert!((pk - k * p).abs() <= 1e-9 * pk.max(1.0));
    }
}
