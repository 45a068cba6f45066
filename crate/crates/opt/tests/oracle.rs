use ewsim_opt::{
    solve_lp, solve_milp, LinearProgram, MilpOptions, MixedIntegerProgram, Sense, SolveStatus, VarId,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
struct Unit {
    p_min: f64,
    p_max: f64,
    marginal: f64,
    no_load: f64,
    startup: f64,
}

#[derive(Clone, Debug)]
struct Instance {
    units: Vec<Unit>,
    load: Vec<f64>,
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n_units = rng.gen_range(1..=4);
    let max_periods = (12 / n_units).min(4);
    let n_periods = rng.gen_range(1..=max_periods);
    let units: Vec<Unit> = (0..n_units)
        .map(|_| {
            let p_max = rng.gen_range(20..=200) as f64;
            Unit {
                p_min: (rng.gen_range(0..=5) as f64 * 0.1 * p_max).round(),
                p_max,
                marginal: rng.gen_range(5..=90) as f64,
                no_load: rng.gen_range(0..=400) as f64,
                startup: rng.gen_range(0..=2000) as f64,
            }
        })
        .collect();
    let cap: f64 = units.iter().map(|u| u.p_max).sum();
    let load = (0..n_periods)
        .map(|_| (rng.gen_range(0.0..1.05) * cap).round())
        .collect();
    Instance { units, load }
}

fn build(inst: &Instance) -> (MixedIntegerProgram, Vec<Vec<VarId>>) {
    let mut p = MixedIntegerProgram::new("uc");
    let mut on = Vec::new();
    for (i, u) in inst.units.iter().enumerate() {
        let mut row = Vec::new();
        let mut prev: Option<VarId> = None;
        for t in 0..inst.load.len() {
            let x = p.add_binary(format!("u{i}_{t}"), u.no_load);
            let s = p.lp.add_var(format!("s{i}_{t}"), 0.0, 1.0, u.startup);
            let mut terms = vec![(s, 1.0), (x, -1.0)];
            if let Some(pv) = prev {
                terms.push((pv, 1.0));
            }
            p.lp.add_constraint(format!("start{i}_{t}"), terms, Sense::Ge, 0.0);
            row.push(x);
            prev = Some(x);
        }
        on.push(row);
    }
    for (t, &d) in inst.load.iter().enumerate() {
        let mut bal = Vec::new();
        for (i, u) in inst.units.iter().enumerate() {
            let g = p.lp.add_var(format!("p{i}_{t}"), 0.0, u.p_max, u.marginal);
            p.lp.add_constraint(format!("hi{i}_{t}"), vec![(g, 1.0), (on[i][t], -u.p_max)], Sense::Le, 0.0);
            p.lp.add_constraint(format!("lo{i}_{t}"), vec![(g, 1.0), (on[i][t], -u.p_min)], Sense::Ge, 0.0);
            bal.push((g, 1.0));
        }
        p.lp.add_constraint(format!("bal{t}"), bal, Sense::Eq, d);
    }
    (p, on)
}

/// Merit-order dispatch of one period for a fixed commitment; None if infeasible.
fn greedy_period(units: &[Unit], on: &[bool], load: f64) -> Option<f64> {
    let committed: Vec<&Unit> = units.iter().zip(on).filter(|(_, &o)| o).map(|(u, _)| u).collect();
    let floor: f64 = committed.iter().map(|u| u.p_min).sum();
    let ceil: f64 = committed.iter().map(|u| u.p_max).sum();
    if load < floor - 1e-9 || load > ceil + 1e-9 {
        return None;
    }
    let mut cost: f64 = committed.iter().map(|u| u.p_min * u.marginal + u.no_load).sum();
    let mut rest = load - floor;
    let mut order = committed.clone();
    order.sort_by(|a, b| a.marginal.total_cmp(&b.marginal));
    for u in order {
        let take = rest.min(u.p_max - u.p_min);
        cost += take * u.marginal;
        rest -= take;
    }
    Some(cost)
}

/// Exhaustive enumeration over every commitment pattern (all units start offline).
fn enumerate(inst: &Instance) -> Option<f64> {
    let n = inst.units.len();
    let t_len = inst.load.len();
    let bits = n * t_len;
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << bits) {
        let status = |i: usize, t: usize| mask >> (i * t_len + t) & 1 == 1;
        let mut total = 0.0;
        let mut ok = true;
        for t in 0..t_len {
            let on: Vec<bool> = (0..n).map(|i| status(i, t)).collect();
            match greedy_period(&inst.units, &on, inst.load[t]) {
                Some(c) => total += c,
                None => {
                    ok = false;
                    break;
                }
            }
            for i in 0..n {
                if on[i] && (t == 0 || !status(i, t - 1)) {
                    total += inst.units[i].startup;
                }
            }
        }
        if ok && best.map_or(true, |b| total < b) {
            best = Some(total);
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn milp_matches_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng);
        let (p, _) = build(&inst);
        prop_assert!(p.binaries.len() <= 12);
        let r = solve_milp(&p, &MilpOptions::default()).unwrap();
        match enumerate(&inst) {
            Some(best) => {
                prop_assert_eq!(r.status, SolveStatus::Optimal);
                prop_assert!((r.objective - best).abs() <= 1e-6 * best.abs().max(1.0),
                    "milp {} vs oracle {}", r.objective, best);
                prop_assert!(p.lp.max_violation(&r.values) <= 1e-6);
                for b in &p.binaries {
                    let x = r.values[b.0];
                    prop_assert!((x - x.round()).abs() <= 1e-6);
                }
            }
            None => prop_assert_eq!(r.status, SolveStatus::Infeasible),
        }
    }

    #[test]
    fn lp_optimum_bounds_every_feasible_point(
        costs in prop::collection::vec(-5.0f64..5.0, 3),
        rows in prop::collection::vec((prop::collection::vec(-3.0f64..3.0, 3), 1.0f64..10.0), 1..5),
        probes in prop::collection::vec(prop::collection::vec(0.0f64..4.0, 3), 20),
    ) {
        let mut lp = LinearProgram::new("dual");
        let xs: Vec<VarId> = costs.iter().enumerate().map(|(j, &c)| lp.add_var(format!("x{j}"), 0.0, 4.0, c)).collect();
        for (k, (a, b)) in rows.iter().enumerate() {
            let terms = xs.iter().zip(a).map(|(&x, &v)| (x, v)).collect();
            lp.add_constraint(format!("r{k}"), terms, Sense::Le, *b);
        }
        // The origin is feasible by construction, so the program is bounded and feasible.
        let r = solve_lp(&lp);
        prop_assert_eq!(r.status, SolveStatus::Optimal);
        prop_assert!(lp.max_violation(&r.values) <= 1e-6);
        for x in probes {
            if lp.max_violation(&x) == 0.0 {
                prop_assert!(lp.objective_value(&x) >= r.objective - 1e-7);
            }
        }
    }
}

#[test]
fn two_dimensional_cover_matches_vertex_enumeration() {
    let mut lp = LinearProgram::new("cover");
    let x = lp.add_var("x", 0.0, 2.0, 1.0);
    let y = lp.add_var("y", 0.0, 2.0, 1.0);
    lp.add_constraint("cover", vec![(x, 1.0), (y, 1.0)], Sense::Ge, 3.0);
    // Vertices of the feasible polygon: (1,2), (2,1), (2,2).
    let oracle = [(1.0, 2.0), (2.0, 1.0), (2.0, 2.0)]
        .iter()
        .map(|(a, b)| a + b)
        .fold(f64::INFINITY, f64::min);
    let r = solve_lp(&lp);
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.objective - oracle).abs() < 1e-9);
}

#[test]
fn solves_are_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let inst = random_instance(&mut rng);
        let (p, _) = build(&inst);
        let a = solve_milp(&p, &MilpOptions::default()).unwrap();
        let b = solve_milp(&p, &MilpOptions::default()).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.gap.to_bits(), b.gap.to_bits());
        assert_eq!((a.iterations, a.nodes), (b.iterations, b.nodes));
        let bits = |r: &ewsim_opt::SolveResult| r.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }
}

#[test]
fn two_unit_two_hour_commitment_costs_6100() {
    let inst = Instance {
        units: vec![
            Unit { p_min: 50.0, p_max: 200.0, marginal: 20.0, no_load: 0.0, startup: 100.0 },
            Unit { p_min: 20.0, p_max: 100.0, marginal: 50.0, no_load: 0.0, startup: 50.0 },
        ],
        load: vec![150.0, 150.0],
    };
    let (p, on) = build(&inst);
    let r = solve_milp(&p, &MilpOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.objective - 6100.0).abs() < 1e-6);
    assert_eq!(enumerate(&inst), Some(6100.0));
    assert_eq!(r.value(on[0][0]), 1.0);
    assert_eq!(r.value(on[1][1]), 0.0);
}
