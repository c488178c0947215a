use std::sync::OnceLock;

use proptest::prelude::*;

use modtransit::assignment::{conservation_residual, solve_assignment, Backend};
use modtransit::benders::{make_classic_cut, solve_subproblem, BendersContext, SubproblemBackend};
use modtransit::design::{append_design_rows, enumerate_designs, DesignDecision};
use modtransit::kernel::SolverModel;
use modtransit::synthetic::{toy_instances, Instance};
use modtransit::waittime::{conditional_waits, line_choice_probabilities, mode_choice_probabilities};

struct Toy {
    inst: Instance,
    designs: Vec<DesignDecision>,
    values: Vec<f64>,
}

fn toy() -> &'static Toy {
    static T: OnceLock<Toy> = OnceLock::new();
    T.get_or_init(|| {
        let inst = toy_instances().remove(1);
        let designs = enumerate_designs(&inst.net, &inst.config);
        let ctx = BendersContext::new(&inst.net, &inst.config).unwrap();
        let values = designs.iter().map(|d| ctx.evaluate(d).unwrap()).collect();
        Toy { inst, designs, values }
    })
}

fn cost(inst: &Instance, d: &DesignDecision) -> f64 {
    let ctx = BendersContext::new(&inst.net, &inst.config).unwrap();
    solve_assignment(&ctx.problem(d), Backend::Hyperpath).unwrap().objective
}

fn rates() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..5.0, 1..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn line_choice_is_a_distribution(r in rates()) {
        let (p, ew) = line_choice_probabilities(&r).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!((ew * r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let cond = conditional_waits(&r).unwrap();
        prop_assert!((cond.iter().sum::<f64>() - ew).abs() < 1e-12 * (1.0 + ew));
    }

    #[test]
    fn more_mod_supply_shortens_the_wait(t in 0.0f64..5.0, m in 0.001f64..5.0, k in 1.01f64..4.0) {
        let a = mode_choice_probabilities(t, m).unwrap();
        let b = mode_choice_probabilities(t, m * k).unwrap();
        prop_assert!((a.p_mod + a.p_transit - 1.0).abs() < 1e-12);
        prop_assert!(b.expected_wait < a.expected_wait);
        prop_assert!(b.p_mod > a.p_mod);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// A classic cut built at one design never overestimates another.
    #[test]
    fn classic_cuts_underestimate(src in any::<prop::sample::Index>(), dst in any::<prop::sample::Index>()) {
        let t = toy();
        let ctx = BendersContext::new(&t.inst.net, &t.inst.config).unwrap();
        let s = src.get(&t.designs);
        let sp = solve_subproblem(&ctx, s, SubproblemBackend::Hyperpath).unwrap();
        let cut = make_classic_cut(&ctx, &sp);
        let i = dst.index(t.designs.len());
        let v = t.values[i];
        prop_assert!(cut.evaluate(&ctx.space.bits(&t.designs[i])) <= v + 1e-6 * (1.0 + v));
        prop_assert!((cut.evaluate(&ctx.space.bits(s)) - sp.objective).abs() <= 1e-6 * (1.0 + sp.objective));
    }

    /// Raising one rate (a line frequency or a zone fleet) never raises cost.
    #[test]
    fn cost_is_monotone_in_rates(pick in any::<prop::sample::Index>(), which in any::<prop::sample::Index>()) {
        let t = toy();
        let (net, cfg) = (&t.inst.net, &t.inst.config);
        let d = pick.get(&t.designs).clone();
        let mut up = d.clone();
        let nl = net.lines.len();
        let j = which.index(nl + net.zones.len());
        if j < nl {
            up.line_freq[j] = match d.line_freq[j] {
                None => Some(0),
                Some(f) => Some((f + 1).min(cfg.frequencies.len() - 1)),
            };
        } else {
            let z = j - nl;
            up.zone_fleet[z] = (d.zone_fleet[z] + 1).min(cfg.fleet_sizes.len() - 1);
        }
        let (a, b) = (cost(&t.inst, &d), cost(&t.inst, &up));
        prop_assert!(b <= a + 1e-9 * (1.0 + a), "{} -> {}", a, b);
    }

    #[test]
    fn flows_are_conserved(pick in any::<prop::sample::Index>()) {
        let t = toy();
        let ctx = BendersContext::new(&t.inst.net, &t.inst.config).unwrap();
        let sol = solve_assignment(&ctx.problem(pick.get(&t.designs)), Backend::Hyperpath).unwrap();
        for d in &sol.per_destination {
            prop_assert!(conservation_residual(&t.inst.net, d) < 1e-9);
        }
        prop_assert!((sol.split.total() - sol.objective).abs() < 1e-9 * (1.0 + sol.objective));
    }

    #[test]
    fn design_encoding_round_trips(pick in any::<prop::sample::Index>()) {
        let t = toy();
        let mut m = SolverModel::new("design");
        let dv = append_design_rows(&mut m, &t.inst.net, &t.inst.config);
        let d = pick.get(&t.designs);
        let x = dv.encode(d, m.num_vars());
        prop_assert_eq!(&dv.decode(&x), d);
        prop_assert!(m.max_violation(&x) < 1e-9);
    }
}
