//! Invariants of the Bellman operator and the engines on random instances.

mod common;

use proptest::prelude::*;

use semilinear::algorithms::{solve, write_trace_csv, SolverConfig};
use semilinear::models::Model;
use semilinear::stochastic::monte_carlo_rollout;
use semilinear::{apply_g, apply_g_mu, evaluate_policy, certify_stability, CostVector, Engine, SemilinearModel};

fn instance() -> impl Strategy<Value = (&'static str, u64, Model)> {
    (0usize..4, 0u64..400).prop_map(|(f, s)| {
        let family = common::FAMILIES[f];
        (family, s, common::instance(family, s))
    })
}

fn slack(family: &str, c: &CostVector) -> f64 {
    let scale = c.as_slice().iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    if family == "positive_linear" {
        1e-13 * scale
    } else {
        0.0
    }
}

fn le(a: &CostVector, b: &CostVector, s: f64) -> bool {
    a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| *x <= *y + s)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bellman_is_monotone((family, seed, m) in instance(), k in 0u64..1000) {
        let mut r = common::rng(seed * 1000 + k);
        let c = common::random_cost(&mut r, m.dim(), 5.0);
        let bump = common::random_cost(&mut r, m.dim(), 1.0);
        let c2 = CostVector::new(c.as_vector() + bump.as_vector()).unwrap();
        let (g1, _) = apply_g(&m, &c).unwrap();
        let (g2, _) = apply_g(&m, &c2).unwrap();
        prop_assert!(le(&g1, &g2, slack(family, &g2)), "{g1} vs {g2}");
    }

    #[test]
    fn bellman_is_dominated_by_every_policy((_f, seed, m) in instance(), k in 0u64..1000) {
        let mut r = common::rng(seed * 7 + k);
        let c = common::random_cost(&mut r, m.dim(), 5.0);
        let (g, _) = apply_g(&m, &c).unwrap();
        let scale = g.as_slice().iter().fold(1.0_f64, |a, v| a.max(*v));
        for p in m.policies().take(300) {
            let gm = apply_g_mu(&p, &c, m.alpha()).unwrap();
            prop_assert!(le(&g, &gm, 1e-13 * scale));
        }
    }

    #[test]
    fn greedy_policy_attains_the_minimum((family, seed, m) in instance(), k in 0u64..1000) {
        let mut r = common::rng(seed * 13 + k);
        let c = common::random_cost(&mut r, m.dim(), 5.0);
        let (g, p) = apply_g(&m, &c).unwrap();
        let gm = apply_g_mu(&p, &c, m.alpha()).unwrap();
        if family == "positive_linear" {
            prop_assert!(g.max_abs_diff(&gm) <= 1e-13 * (1.0 + g.as_slice().iter().fold(0.0_f64, |a, v| a.max(*v))));
        } else {
            prop_assert_eq!(g, gm);
        }
    }

    #[test]
    fn bellman_is_concave((_f, seed, m) in instance(), lambda in 0.0f64..1.0) {
        let mut r = common::rng(seed * 17 + 3);
        let a = common::random_cost(&mut r, m.dim(), 5.0);
        let b = common::random_cost(&mut r, m.dim(), 5.0);
        let mix = CostVector::new(a.as_vector() * lambda + b.as_vector() * (1.0 - lambda)).unwrap();
        let (ga, _) = apply_g(&m, &a).unwrap();
        let (gb, _) = apply_g(&m, &b).unwrap();
        let (gm, _) = apply_g(&m, &mix).unwrap();
        for i in 0..m.dim() {
            let chord = lambda * ga[i] + (1.0 - lambda) * gb[i];
            prop_assert!(gm[i] >= chord - 1e-12 * (1.0 + chord.abs()));
        }
    }

    #[test]
    fn stable_policy_cost_is_a_fixed_point_of_its_map((_f, _s, m) in instance()) {
        for p in m.policies().take(50) {
            let (stable, _) = certify_stability(p.a(), m.alpha()).unwrap();
            if !stable {
                continue;
            }
            let c = evaluate_policy(&p, m.alpha()).unwrap();
            let again = apply_g_mu(&p, &c, m.alpha()).unwrap();
            let scale = c.as_slice().iter().fold(1.0_f64, |a, v| a.max(*v));
            prop_assert!(c.max_abs_diff(&again) <= 1e-11 * scale);
        }
    }

    #[test]
    fn value_iteration_stays_below_the_fixed_point((family, _s, m) in instance()) {
        let Ok(pi) = solve(&m, Engine::PolicyIteration, &SolverConfig::default().with_tolerance(1e-12)) else {
            return Ok(());
        };
        let vi = solve(&m, Engine::ValueIteration, &SolverConfig::default().with_tolerance(1e-10)).unwrap();
        let s = 1e-9 * pi.c_star.as_slice().iter().fold(1.0_f64, |a, v| a.max(*v));
        for t in &vi.trace {
            prop_assert!(le(&t.c, &pi.c_star, s + slack(family, &pi.c_star)));
        }
    }

    #[test]
    fn trace_csv_round_trips_bitwise((_f, _s, m) in instance()) {
        let Ok(r) = solve(&m, Engine::ValueIteration, &SolverConfig::default().with_max_iterations(20)) else {
            return Ok(());
        };
        let mut buf = Vec::new();
        write_trace_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header: Vec<_> = lines.next().unwrap().split(',').collect();
        prop_assert_eq!(header.len(), 2 + m.dim());
        prop_assert_eq!(&header[..2], &["iter", "residual"]);
        for (line, point) in lines.zip(&r.trace) {
            let fields: Vec<&str> = line.split(',').collect();
            prop_assert_eq!(fields[0].parse::<usize>().unwrap(), point.iteration);
            prop_assert_eq!(fields[1].parse::<f64>().unwrap().to_bits(), point.residual.to_bits());
            for (i, f) in fields[2..].iter().enumerate() {
                prop_assert_eq!(f.parse::<f64>().unwrap().to_bits(), point.c[i].to_bits());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rollouts_are_reproducible(seed in 0u64..50, rollout_seed in 0u64..1000) {
        let m = common::stochastic_positive_linear(seed);
        let ce = semilinear::stochastic::certainty_equivalent(&m).unwrap();
        let Ok(sol) = solve(&ce, Engine::PolicyIteration, &SolverConfig::default()) else {
            return Ok(());
        };
        let x0 = nalgebra::DVector::from_element(m.dim(), 1.0);
        let a = monte_carlo_rollout(&m, &sol.policy.control, &x0, 30, 200, rollout_seed).unwrap();
        let b = monte_carlo_rollout(&m, &sol.policy.control, &x0, 30, 200, rollout_seed).unwrap();
        prop_assert_eq!(a, b);
    }
}
