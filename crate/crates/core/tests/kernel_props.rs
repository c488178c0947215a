use modtransit::kernel::{solve_lp, LpOptions, LpStatus, Sense, SolverModel};
use proptest::prelude::*;

/// Checks primal feasibility, dual sign conditions and complementary
/// slackness of an optimal LP answer.
fn assert_kkt(m: &SolverModel, x: &[f64], y: &[f64], tol: f64) {
    assert!(m.max_violation(x) < tol, "primal violation {}", m.max_violation(x));
    let act = m.row_activity(x);
    for (i, c) in m.cons.iter().enumerate() {
        let slack = act[i] - c.rhs;
        match c.sense {
            Sense::Le => assert!(y[i] <= tol, "row {} dual {}", i, y[i]),
            Sense::Ge => assert!(y[i] >= -tol, "row {} dual {}", i, y[i]),
            Sense::Eq => {}
        }
        if c.sense != Sense::Eq {
            assert!((y[i] * slack).abs() < tol * (1.0 + y[i].abs()), "row {} cs", i);
        }
    }
    let mut r: Vec<f64> = m.vars.iter().map(|v| v.cost).collect();
    for (i, c) in m.cons.iter().enumerate() {
        for &(j, a) in &c.coeffs {
            r[j] -= y[i] * a;
        }
    }
    for (j, v) in m.vars.iter().enumerate() {
        let at_lower = (x[j] - v.lower).abs() < 1e-7;
        let at_upper = (x[j] - v.upper).abs() < 1e-7;
        if at_lower && !at_upper {
            assert!(r[j] >= -tol, "var {} reduced cost {}", j, r[j]);
        } else if at_upper && !at_lower {
            assert!(r[j] <= tol, "var {} reduced cost {}", j, r[j]);
        } else if !at_lower && !at_upper {
            assert!(r[j].abs() <= tol, "var {} reduced cost {}", j, r[j]);
        }
    }
}

#[test]
fn degenerate_transport_matches_vertex_enumeration() {
    // 2 supplies x 3 demands, total supply = total demand (degenerate)
    let supply = [5.0, 5.0];
    let demand = [3.0, 4.0, 3.0];
    let cost = [[4.0, 6.0, 9.0], [5.0, 3.0, 8.0]];
    let mut m = SolverModel::new("transport");
    let mut x = [[0usize; 3]; 2];
    for s in 0..2 {
        for d in 0..3 {
            x[s][d] = m.add_var(format!("x[{},{}]", s, d), 0.0, f64::INFINITY, cost[s][d]);
        }
    }
    for s in 0..2 {
        m.add_con(format!("s{}", s), (0..3).map(|d| (x[s][d], 1.0)).collect(), Sense::Le, supply[s]);
    }
    for d in 0..3 {
        m.add_con(format!("d{}", d), (0..2).map(|s| (x[s][d], 1.0)).collect(), Sense::Ge, demand[d]);
    }
    let r = solve_lp(&m, &LpOptions::default());
    assert_eq!(r.status, LpStatus::Optimal);
    // enumerate: x[0][0], x[0][1] determine everything since supplies are tight
    let mut best = f64::INFINITY;
    let steps = 60;
    for a in 0..=steps {
        for b in 0..=steps {
            let x00 = 3.0 * a as f64 / steps as f64;
            let x01 = 4.0 * b as f64 / steps as f64;
            let x02 = 5.0 - x00 - x01;
            let (x10, x11, x12) = (3.0 - x00, 4.0 - x01, 3.0 - x02);
            let all = [x00, x01, x02, x10, x11, x12];
            if all.iter().all(|&v| v >= -1e-12) {
                let c: f64 = all
                    .iter()
                    .zip(cost.iter().flatten())
                    .map(|(v, c)| v * c)
                    .sum();
                best = best.min(c);
            }
        }
    }
    assert!((r.objective - best).abs() < 1e-9, "{} vs {}", r.objective, best);
    assert_kkt(&m, &r.x, &r.duals, 1e-7);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_box_lps_satisfy_kkt(
        nv in 2usize..8,
        nc in 1usize..8,
        seed_costs in proptest::collection::vec(-5.0f64..5.0, 8),
        seed_coefs in proptest::collection::vec(-3.0f64..3.0, 64),
        seed_rhs in proptest::collection::vec(0.0f64..10.0, 8),
        senses in proptest::collection::vec(0u8..3, 8),
    ) {
        // x = 0 satisfies Le rows with rhs >= 0; Ge and Eq rows get rhs built
        // from a known feasible point so every instance is feasible
        let point: Vec<f64> = (0..nv).map(|j| (j as f64 * 0.37).fract() * 2.0).collect();
        let mut m = SolverModel::new("rand");
        for j in 0..nv {
            m.add_var(format!("x{}", j), 0.0, 4.0, seed_costs[j]);
        }
        for i in 0..nc {
            let coeffs: Vec<(usize, f64)> = (0..nv)
                .map(|j| (j, seed_coefs[i * 8 + j]))
                .filter(|&(_, a)| a.abs() > 0.05)
                .collect();
            let act: f64 = coeffs.iter().map(|&(j, a)| a * point[j]).sum();
            let (sense, rhs) = match senses[i] {
                0 => (Sense::Le, act + seed_rhs[i]),
                1 => (Sense::Ge, act - seed_rhs[i]),
                _ => (Sense::Eq, act),
            };
            m.add_con(format!("r{}", i), coeffs, sense, rhs);
        }
        let r = solve_lp(&m, &LpOptions::default());
        prop_assert_eq!(r.status, LpStatus::Optimal);
        assert_kkt(&m, &r.x, &r.duals, 1e-6);
        prop_assert!(r.objective <= m.objective_value(&point) + 1e-7);
    }
}
