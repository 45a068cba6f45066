//! End-to-end acceptance suite. Runs every criterion, prints one PASS/FAIL
//! line each, and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use ewsim_core::commitment::InitialState;
use ewsim_core::forecast::ForecastSet;
use ewsim_core::network::Network;
use ewsim_core::reserves::{load_following, ramping, ReserveState, CURTAILMENT_RESPONSE_MINUTES, LOAD_FOLLOWING_MINUTES};
use ewsim_core::scenario::{
    parse_time, BaseClass, CoolingSpec, CoolingTech, ForecastConfig, Fuel, Generator, ReservePolicy, TimeSeries,
    Zone,
};
use ewsim_core::scuc::{build_scuc, solve_scuc};
use ewsim_core::sim::{run_pair, simulate, SimConfig, SimOutput};
use ewsim_core::water::{cooling_water, heat_to_cooling};
use ewsim_core::{canonical_fixture, classify_resources, Classification, Mode, ResourceClass, Scenario};
use ewsim_opt::{solve_milp, MilpOptions, MixedIntegerProgram, Sense, SolveStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------- MILP oracle

struct UcInstance {
    demand: Vec<f64>,
    reserve: Vec<f64>,
    p_min: Vec<f64>,
    p_max: Vec<f64>,
    marginal: Vec<f64>,
    no_load: Vec<f64>,
    startup: Vec<f64>,
    initially_on: Vec<bool>,
}

fn random_instance(rng: &mut ChaCha8Rng) -> UcInstance {
    let units = rng.gen_range(2..=4);
    let steps = 12 / units;
    let steps = rng.gen_range(1..=steps.min(4));
    let p_max: Vec<f64> = (0..units).map(|_| rng.gen_range(50..300) as f64).collect();
    let p_min: Vec<f64> = p_max.iter().map(|&p| (p * rng.gen_range(0.0..0.5)).round()).collect();
    let cap: f64 = p_max.iter().sum();
    UcInstance {
        demand: (0..steps).map(|_| rng.gen_range(0.1..0.8) * cap).map(f64::round).collect(),
        reserve: (0..steps).map(|_| rng.gen_range(0.0..0.15) * cap).map(f64::round).collect(),
        marginal: (0..units).map(|_| rng.gen_range(10..90) as f64).collect(),
        no_load: (0..units).map(|_| rng.gen_range(0..500) as f64).collect(),
        startup: (0..units).map(|_| rng.gen_range(0..2000) as f64).collect(),
        initially_on: (0..units).map(|_| rng.gen_bool(0.5)).collect(),
        p_min,
        p_max,
    }
}

fn uc_program(inst: &UcInstance) -> MixedIntegerProgram {
    let n = inst.p_max.len();
    let steps = inst.demand.len();
    let mut mip = MixedIntegerProgram::new("uc");
    let mut u = vec![Vec::new(); n];
    let mut p = vec![Vec::new(); n];
    for g in 0..n {
        for t in 0..steps {
            u[g].push(mip.add_binary(format!("u{g}_{t}"), inst.no_load[g]));
            p[g].push(mip.lp.add_var(format!("p{g}_{t}"), 0.0, inst.p_max[g], inst.marginal[g]));
            let s = mip.lp.add_var(format!("s{g}_{t}"), 0.0, f64::INFINITY, inst.startup[g]);
            let mut terms = vec![(s, 1.0), (u[g][t], -1.0)];
            let mut rhs = 0.0;
            if t > 0 {
                terms.push((u[g][t - 1], 1.0));
            } else if inst.initially_on[g] {
                rhs = -1.0;
            }
            mip.lp.add_constraint(format!("start{g}_{t}"), terms, Sense::Ge, rhs);
            mip.lp.add_constraint(
                format!("hi{g}_{t}"),
                vec![(p[g][t], 1.0), (u[g][t], -inst.p_max[g])],
                Sense::Le,
                0.0,
            );
            mip.lp.add_constraint(
                format!("lo{g}_{t}"),
                vec![(p[g][t], 1.0), (u[g][t], -inst.p_min[g])],
                Sense::Ge,
                0.0,
            );
        }
    }
    for t in 0..steps {
        let bal = (0..n).map(|g| (p[g][t], 1.0)).collect();
        mip.lp.add_constraint(format!("bal{t}"), bal, Sense::Eq, inst.demand[t]);
        let res = (0..n).map(|g| (u[g][t], inst.p_max[g])).collect();
        mip.lp.add_constraint(format!("res{t}"), res, Sense::Ge, inst.demand[t] + inst.reserve[t]);
    }
    mip
}

/// Cheapest dispatch of one step with a fixed on-set: everyone at minimum,
/// the rest filled in merit order.
fn merit_order(inst: &UcInstance, on: &[bool], demand: f64) -> Option<f64> {
    let idx: Vec<usize> = (0..on.len()).filter(|&g| on[g]).collect();
    let floor: f64 = idx.iter().map(|&g| inst.p_min[g]).sum();
    let ceil: f64 = idx.iter().map(|&g| inst.p_max[g]).sum();
    if demand < floor - 1e-9 || demand > ceil + 1e-9 {
        return None;
    }
    let mut cost: f64 = idx.iter().map(|&g| inst.marginal[g] * inst.p_min[g]).sum();
    let mut left = demand - floor;
    let mut order = idx.clone();
    order.sort_by(|&a, &b| inst.marginal[a].total_cmp(&inst.marginal[b]));
    for g in order {
        let take = left.min(inst.p_max[g] - inst.p_min[g]);
        cost += inst.marginal[g] * take;
        left -= take;
    }
    Some(cost)
}

fn enumerate(inst: &UcInstance) -> Option<f64> {
    let n = inst.p_max.len();
    let steps = inst.demand.len();
    let bits = n * steps;
    let mut best: Option<f64> = None;
    'patterns: for mask in 0u32..(1 << bits) {
        let on = |g: usize, t: usize| mask >> (g * steps + t) & 1 == 1;
        let mut total = 0.0;
        for t in 0..steps {
            let set: Vec<bool> = (0..n).map(|g| on(g, t)).collect();
            let cap: f64 = (0..n).filter(|&g| set[g]).map(|g| inst.p_max[g]).sum();
            if cap < inst.demand[t] + inst.reserve[t] - 1e-9 {
                continue 'patterns;
            }
            match merit_order(inst, &set, inst.demand[t]) {
                Some(c) => total += c,
                None => continue 'patterns,
            }
            for g in 0..n {
                if set[g] {
                    total += inst.no_load[g];
                    let before = if t == 0 { inst.initially_on[g] } else { on(g, t - 1) };
                    if !before {
                        total += inst.startup[g];
                    }
                }
            }
        }
        best = Some(best.map_or(total, |b: f64| b.min(total)));
    }
    best
}

fn milp_oracle() -> Outcome {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    let mut feasible = 0;
    for k in 0..50 {
        let inst = random_instance(&mut rng);
        let mip = uc_program(&inst);
        let r = solve_milp(&mip, &MilpOptions::default()).expect("well-formed program");
        match enumerate(&inst) {
            Some(best) => {
                feasible += 1;
                if r.status != SolveStatus::Optimal {
                    return outcome(false, format!("instance {k}: solver {:?}, enumeration {best}", r.status));
                }
                worst = worst.max((r.objective - best).abs());
            }
            None => {
                if r.status != SolveStatus::Infeasible {
                    return outcome(false, format!("instance {k}: solver {:?}, enumeration infeasible", r.status));
                }
            }
        }
    }
    let t = clock.elapsed();
    outcome(
        worst <= 1e-6 && t < Duration::from_secs(60),
        format!("50 instances ({feasible} feasible), max |Δobj| {worst:.2e}, {:.2} s", t.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- SCUC hand case

fn gas_unit(id: &str, p_min: f64, p_max: f64, marginal: f64, startup: f64) -> Generator {
    Generator {
        id: id.into(),
        zone: "Z".into(),
        fuel: Fuel::Gas,
        base_class: BaseClass::Dispatchable,
        p_min,
        p_max,
        ramp: 100.0,
        min_up: 0,
        min_down: 0,
        startup_cost: startup,
        no_load_cost: 0.0,
        marginal_cost: marginal,
        fast_start: false,
        curtail_price: 0.0,
        profile_id: None,
        cooling: Some(CoolingSpec::with_defaults(CoolingTech::WetTower, 0.5, 0.2)),
        emission_factor: 181.0,
    }
}

fn two_unit_scenario() -> Scenario {
    let start = parse_time("2040-01-01T00:00:00").unwrap();
    let load = TimeSeries {
        id: "load_Z".into(),
        start,
        step: 60,
        values: vec![150.0; 48],
    };
    Scenario {
        name: "two-unit".into(),
        zones: vec![Zone {
            id: "Z".into(),
            name: "Zone".into(),
        }],
        pipes: vec![],
        generators: vec![gas_unit("G1", 50.0, 200.0, 20.0, 100.0), gas_unit("G2", 20.0, 100.0, 50.0, 50.0)],
        storage_units: vec![],
        water_loads: vec![],
        profiles: BTreeMap::from([("load_Z".to_string(), load)]),
        zone_loads: BTreeMap::from([("Z".to_string(), "load_Z".to_string())]),
        swing_zone: "Z".into(),
        regulation_capacity: 30.0,
        reserve_policy: ReservePolicy {
            lfr_peak_fraction: 0.0,
            lfr_vre_fraction: 0.0,
            ramp_up_mw_per_min: 0.0,
            ramp_down_mw_per_min: 0.0,
        },
        start,
        end: start + chrono::Duration::days(1),
        forecast: ForecastConfig::exact(),
        seed: 1,
        storage_drawdown: 0.0,
        forecast_overrides: BTreeMap::new(),
    }
}

fn scuc_hand_case() -> Outcome {
    let clock = Instant::now();
    let s = two_unit_scenario();
    let classes = classify_resources(&s, Mode::Conventional);
    let net = Network::from_scenario(&s).unwrap();
    let fc = ForecastSet::build(&s, &s.forecast, s.seed);
    let problem = build_scuc(&s, &classes, &net, &fc, 0, 2, InitialState::cold(&s, &classes)).unwrap();
    let sched = solve_scuc(&problem, &MilpOptions::default()).unwrap();
    let t = clock.elapsed();
    outcome(
        (sched.objective - 6100.0).abs() < 1e-6 && t < Duration::from_secs(1),
        format!("total cost {:.4} $, {:.3} s", sched.objective, t.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- simulation criteria

fn week(seed: Option<u64>) -> SimConfig {
    SimConfig {
        seed,
        ..SimConfig::default()
    }
}

fn balance(runs: &[&SimOutput]) -> Outcome {
    let mut detail = Vec::new();
    let mut pass = true;
    for r in runs {
        let st = &r.stats;
        let ok = st.minute_records == 10_080 && st.max_balance_error <= 1e-6 && st.max_kcl_residual <= 1e-9;
        pass &= ok;
        detail.push(format!(
            "{}: {} minutes, max |balance| {:.1e} MW, max KCL {:.1e}",
            r.mode, st.minute_records, st.max_balance_error, st.max_kcl_residual
        ));
    }
    outcome(pass, detail.join("; "))
}

fn directional() -> Outcome {
    let checks = [
        "day_ahead_cost",
        "real_time_cost",
        "water_withdrawal",
        "co2",
        "lfr_down_mean",
    ];
    let mut wins = [0usize; 5];
    for seed in 1..=5u64 {
        let pair = run_pair(&canonical_fixture(), &week(Some(seed))).expect("pair runs");
        let r = &pair.report;
        let get = |m: &str| r.get(m).unwrap_or_else(|| panic!("metric {m} missing"));
        let holds = [
            get("day_ahead_cost").flexible <= get("day_ahead_cost").conventional,
            get("real_time_cost").flexible <= get("real_time_cost").conventional,
            get("water_withdrawal").conventional >= get("water_withdrawal").flexible,
            get("co2").conventional >= get("co2").flexible,
            get("lfr_down_mean").flexible >= get("lfr_down_mean").conventional,
        ];
        for (w, h) in wins.iter_mut().zip(holds) {
            *w += h as usize;
        }
    }
    let detail = checks
        .iter()
        .zip(wins)
        .map(|(m, w)| format!("{m} {w}/5"))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(wins.iter().all(|&w| w >= 4), detail)
}

fn water_arithmetic() -> Outcome {
    let mut ot = CoolingSpec::with_defaults(CoolingTech::OnceThrough, 0.5, 0.2);
    ot.delta_t = 10.0;
    let (w_ot, _) = cooling_water(1.0, &ot);
    let mut wt = CoolingSpec::with_defaults(CoolingTech::WetTower, 0.38, 0.12);
    wt.k_latent = 0.9;
    wt.n_cc = 5.0;
    let (w_wt, c_wt) = cooling_water(1.0, &wt);
    let ratio = w_wt / c_wt;
    let pass = (w_ot - 51.6).abs() <= 0.1
        && (c_wt - 1.74).abs() <= 0.05
        && ratio == 1.25
        && (heat_to_cooling(1.0, &ot) - 0.6).abs() < 1e-12;
    outcome(
        pass,
        format!("once-through {w_ot:.3} m3/MWh, wet tower {c_wt:.4} m3/MWh, withdrawal/consumption {ratio}"),
    )
}

/// Reserve sums written straight from their definitions.
fn reserve_reference(st: &ReserveState, s: &Scenario, c: &Classification) -> [f64; 4] {
    let mut lfr_up = 0.0;
    let mut lfr_down = 0.0;
    let mut ramp_up = 0.0;
    let mut ramp_down = 0.0;
    for (i, g) in s.generators.iter().enumerate() {
        let p = st.output[i];
        let class = c.class_of(i);
        if class == ResourceClass::Dispatchable && st.online[i] {
            let reach = LOAD_FOLLOWING_MINUTES * g.ramp;
            lfr_up += (g.p_max - p).min(reach).max(0.0);
            lfr_down += (p - g.p_min).min(reach).max(0.0);
            ramp_up += g.ramp.min(g.p_max - p).max(0.0);
            ramp_down += g.ramp.min(p - g.p_min).max(0.0);
        } else if class == ResourceClass::SemiDispatchable {
            let headroom = st.available[i] - p;
            lfr_up += headroom.max(0.0);
            lfr_down += p.max(0.0);
            ramp_up += (headroom / CURTAILMENT_RESPONSE_MINUTES).max(0.0);
            ramp_down += (p / CURTAILMENT_RESPONSE_MINUTES).max(0.0);
        }
    }
    for k in 0..st.shed.len() {
        lfr_up += (st.shed_capacity[k] - st.shed[k]).max(0.0);
        lfr_down += st.shed[k].max(0.0);
    }
    [lfr_up, lfr_down, ramp_up, ramp_down]
}

fn reserve_oracle() -> Outcome {
    let s = canonical_fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut mismatches = 0;
    for k in 0..1000 {
        let mode = if k % 2 == 0 { Mode::Flexible } else { Mode::Conventional };
        let c = classify_resources(&s, mode);
        let n = s.generators.len();
        let mut st = ReserveState {
            online: (0..n).map(|_| rng.gen_bool(0.7)).collect(),
            output: vec![0.0; n],
            available: vec![0.0; n],
            shed: Vec::new(),
            shed_capacity: Vec::new(),
        };
        for (i, g) in s.generators.iter().enumerate() {
            st.available[i] = if g.profile_id.is_some() { rng.gen_range(0.0..=g.p_max) } else { 0.0 };
            st.output[i] = match c.class_of(i) {
                ResourceClass::Dispatchable if st.online[i] => rng.gen_range(g.p_min..=g.p_max),
                ResourceClass::Dispatchable => 0.0,
                ResourceClass::SemiDispatchable => rng.gen_range(0.0..=st.available[i]),
                ResourceClass::FixedInjection => st.available[i],
                ResourceClass::MustRun => g.p_max,
            };
        }
        for (w, _) in s.water_loads.iter().enumerate() {
            let cap = c.shed_fraction[w] * rng.gen_range(0.0..100.0);
            st.shed_capacity.push(cap);
            st.shed.push(if cap > 0.0 { rng.gen_range(0.0..=cap) } else { 0.0 });
        }
        let (lu, ld) = load_following(&st, &s, &c);
        let (ru, rd) = ramping(&st, &s, &c);
        if [lu, ld, ru, rd] != reserve_reference(&st, &s, &c) {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("1000 states, {mismatches} mismatches"))
}

fn zero_noise() -> Outcome {
    let mut s = canonical_fixture();
    s.forecast = ForecastConfig::exact();
    let mut pass = true;
    let mut detail = Vec::new();
    for mode in [Mode::Conventional, Mode::Flexible] {
        let out = simulate(&s, mode, &week(None)).expect("exact run");
        let reg = out.series.regulation.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let res = out.series.residual.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let exhausted = out.series.exhausted_pct();
        pass &= reg <= 1e-6 && res <= 1e-6 && exhausted == 0.0;
        detail.push(format!("{mode}: max |reg| {reg:.1e}, max |residual| {res:.1e}, exhausted {exhausted}%"));
    }
    outcome(pass, detail.join("; "))
}

fn determinism(a: &SimOutput, b: &SimOutput) -> Outcome {
    let da = tempfile::tempdir().unwrap();
    let db = tempfile::tempdir().unwrap();
    a.write(da.path()).unwrap();
    b.write(db.path()).unwrap();
    let mut differing = Vec::new();
    let mut compared = 0;
    for name in a.files.keys().filter(|n| n.ends_with(".csv")) {
        compared += 1;
        let x = std::fs::read(da.path().join(name)).unwrap();
        let y = std::fs::read(db.path().join(name)).unwrap();
        if x != y {
            differing.push(name.clone());
        }
    }
    outcome(
        differing.is_empty() && compared > 0,
        format!("{compared} CSV files compared, differing: {differing:?}"),
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("1 MILP oracle", milp_oracle()));
    results.push(("2 SCUC hand case", scuc_hand_case()));

    let fixture = canonical_fixture();
    let clock = Instant::now();
    let conv = simulate(&fixture, Mode::Conventional, &week(None)).expect("conventional week");
    let elapsed = clock.elapsed();
    let flex = simulate(&fixture, Mode::Flexible, &week(None)).expect("flexible week");
    results.push(("3 balance invariants", balance(&[&conv, &flex])));
    results.push(("4 directional scorecard", directional()));
    results.push(("5 water arithmetic", water_arithmetic()));
    results.push(("6 reserve oracle", reserve_oracle()));
    results.push(("7 zero-noise fixed point", zero_noise()));
    let again = simulate(&fixture, Mode::Conventional, &week(None)).expect("repeat week");
    results.push(("8 determinism", determinism(&conv, &again)));
    results.push((
        "9 performance envelope",
        outcome(
            elapsed < Duration::from_secs(300),
            format!("fixture week, conventional, {:.1} s", elapsed.as_secs_f64()),
        ),
    ));

    let mut failed = 0;
    for (name, o) in &results {
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += !o.pass as usize;
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
