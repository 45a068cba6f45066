//! Ten-minute economic dispatch with commitments fixed.

use ewsim_opt::{solve_lp, LinearProgram, SolveStatus, VarId};
use thiserror::Error;

use crate::commitment::{RESERVE_SHORTFALL_PRICE, SHORTFALL_PRICE};
use crate::network::Network;
use crate::rtuc::StatusTimeline;
use crate::scenario::{Classification, ResourceClass, Scenario};

pub const SCED_STEP: i64 = 10;
/// Price of moving storage off its real-time schedule, $/MWh.
pub const STORAGE_DEVIATION_PRICE: f64 = RESERVE_SHORTFALL_PRICE;

#[derive(Debug, Error, PartialEq)]
pub enum ScedError {
    #[error("dispatch at minute {minute}: solver returned {status:?}")]
    Solver { minute: i64, status: SolveStatus },
}

/// System snapshot at one dispatch point.
#[derive(Clone, Debug, PartialEq)]
pub struct DispatchState {
    pub minute: i64,
    pub on: Vec<bool>,
    pub setpoint: Vec<f64>,
    pub curtailed: Vec<f64>,
    /// Injection available to each profile-driven unit (0 for others).
    pub available: Vec<f64>,
    pub shed: Vec<f64>,
    pub storage_gen: Vec<f64>,
    pub storage_pump: Vec<f64>,
    /// Storage energy at the end of the interval.
    pub storage_energy: Vec<f64>,
    /// Per zone: unserved (+) or surplus (−) energy the dispatch could not avoid, MW.
    pub shortfall: Vec<f64>,
    /// Production cost, $/min, penalties excluded.
    pub cost_per_min: f64,
}

impl DispatchState {
    pub fn total_shortfall(&self) -> f64 {
        self.shortfall.iter().sum()
    }
}

pub struct ScedInputs<'a> {
    pub s: &'a Scenario,
    pub classes: &'a Classification,
    pub network: &'a Network,
    pub minute: i64,
    pub timeline: &'a StatusTimeline,
    /// Realized state at the previous dispatch point; `None` for the
    /// initial dispatch, which has no ramp or start-up limits.
    pub prev: Option<&'a DispatchState>,
    /// Zonal load plus water demand.
    pub zone_demand: Vec<f64>,
    pub water_demand: Vec<f64>,
    pub available: Vec<f64>,
    /// Scheduled storage (generate, pump) for the interval; the dispatch
    /// may move off it at a price.
    pub storage: Vec<(f64, f64)>,
}

/// Point of `[lo, hi]` nearest to `[a, b]`, or their intersection.
fn intersect_or_nearest(lo: f64, hi: f64, a: f64, b: f64) -> (f64, f64) {
    let (l, h) = (lo.max(a), hi.min(b));
    if l <= h {
        (l, h)
    } else if b < lo {
        (b, b)
    } else {
        (a, a)
    }
}

/// Bounds on a dispatchable unit's output at `minute`.
pub fn dispatchable_bounds(
    inp: &ScedInputs,
    gi: usize,
) -> (f64, f64) {
    let g = &inp.s.generators[gi];
    let on = inp.timeline.at(gi, inp.minute);
    if !on {
        return (0.0, 0.0);
    }
    let step = SCED_STEP as f64 * g.ramp;
    let start_cap = g.p_min.max(step);
    let mut hi = g.p_max;
    let prev = match inp.prev {
        None => return (g.p_min, g.p_max),
        Some(p) => p,
    };
    let was_on = prev.on[gi];
    if !was_on {
        hi = hi.min(start_cap);
    }
    // Leave room to come down to a shut-down in time.
    if step < g.p_max {
        let horizon = (g.p_max / step.max(1e-9)).ceil() as i64 + 1;
        for k in 1..=horizon.min(1000) {
            if !inp.timeline.at(gi, inp.minute + SCED_STEP * k) {
                hi = hi.min(start_cap + step * (k - 1) as f64);
                break;
            }
        }
    }
    let lo = g.p_min.min(hi);
    if was_on {
        let x = prev.setpoint[gi];
        intersect_or_nearest(lo, hi, x - step, x + step)
    } else {
        (lo, hi)
    }
}

pub fn run_sced(inp: &ScedInputs) -> Result<DispatchState, ScedError> {
    let s = inp.s;
    let t = inp.minute;
    let mut lp = LinearProgram::new(format!("sced_{t}"));
    let per_min = 1.0 / 60.0;
    let ng = s.generators.len();
    let mut on = vec![false; ng];
    let mut p_var: Vec<Option<VarId>> = vec![None; ng];
    let mut p_const = vec![0.0; ng];

    for (gi, g) in s.generators.iter().enumerate() {
        match inp.classes.class_of(gi) {
            ResourceClass::Dispatchable => {
                on[gi] = inp.timeline.at(gi, t);
                let (lo, hi) = dispatchable_bounds(inp, gi);
                p_var[gi] = Some(lp.add_var(format!("p[{}]", g.id), lo, hi, per_min * g.marginal_cost));
            }
            ResourceClass::SemiDispatchable => {
                on[gi] = true;
                let f = inp.available[gi];
                if f < 0.0 {
                    p_const[gi] = f;
                    continue;
                }
                let (lo, hi) = match inp.prev {
                    Some(prev) => {
                        let b = (SCED_STEP as f64 * g.ramp).max((f - prev.available[gi]).abs());
                        let x = prev.setpoint[gi];
                        intersect_or_nearest(0.0, f, x - b, x + b)
                    }
                    None => (0.0, f),
                };
                lp.add_objective_constant(per_min * g.curtail_price * f);
                p_var[gi] = Some(lp.add_var(format!("p[{}]", g.id), lo, hi, -per_min * g.curtail_price));
            }
            ResourceClass::FixedInjection => {
                on[gi] = true;
                p_const[gi] = inp.available[gi];
            }
            ResourceClass::MustRun => {
                on[gi] = true;
                p_const[gi] = g.p_max;
            }
        }
    }

    // Storage follows its schedule unless moving it avoids a shortfall;
    // any change of net output is charged at the deviation price.
    let dh = SCED_STEP as f64 / 60.0;
    let mut storage_vars = Vec::new();
    let mut storage_e0 = Vec::new();
    for (k, st) in s.storage_units.iter().enumerate() {
        let e0 = inp.prev.map_or(st.initial_energy, |p| p.storage_energy[k]);
        let (g0, q0) = inp.storage[k];
        let gen = lp.add_var(format!("gen[{}]", st.id), 0.0, st.p_max_gen, 0.0);
        let pump = lp.add_var(format!("pump[{}]", st.id), 0.0, st.p_max_pump, 0.0);
        let dev_price = per_min * STORAGE_DEVIATION_PRICE;
        let up = lp.add_var(format!("dev_up[{}]", st.id), 0.0, f64::INFINITY, dev_price);
        let down = lp.add_var(format!("dev_down[{}]", st.id), 0.0, f64::INFINITY, dev_price);
        let sched = g0.clamp(0.0, st.p_max_gen) - q0.clamp(0.0, st.p_max_pump);
        lp.add_constraint(
            format!("schedule[{}]", st.id),
            vec![(gen, 1.0), (pump, -1.0), (up, -1.0), (down, 1.0)],
            ewsim_opt::Sense::Eq,
            sched,
        );
        let energy = vec![(pump, dh * st.round_trip_eff), (gen, -dh)];
        lp.add_constraint(format!("empty[{}]", st.id), energy.clone(), ewsim_opt::Sense::Ge, -e0);
        lp.add_constraint(format!("full[{}]", st.id), energy, ewsim_opt::Sense::Le, st.energy_cap - e0);
        storage_vars.push((gen, pump));
        storage_e0.push(e0);
    }

    let shed_var: Vec<Option<VarId>> = s
        .water_loads
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let cap = inp.classes.shed_fraction[k] * inp.water_demand[k];
            (cap > 0.0).then(|| lp.add_var(format!("shed[{}]", w.id), 0.0, cap, per_min * w.shed_price))
        })
        .collect();

    let net = inp.network;
    let nz = net.num_zones();
    let flows: Vec<VarId> = (0..net.num_pipes())
        .map(|l| lp.add_var(format!("flow[{}]", net.pipe_ids[l]), -net.limit(l), net.limit(l), 0.0))
        .collect();
    let penalty = per_min * SHORTFALL_PRICE;
    let short: Vec<VarId> = (0..nz)
        .map(|z| lp.add_var(format!("short[{}]", net.zone_ids[z]), 0.0, f64::INFINITY, penalty))
        .collect();
    let over: Vec<VarId> = (0..nz)
        .map(|z| lp.add_var(format!("over[{}]", net.zone_ids[z]), 0.0, f64::INFINITY, penalty))
        .collect();

    let zone_of = |id: &str| net.zone_ids.iter().position(|z| z == id).expect("zone");
    let mut rows: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); nz];
    let mut rhs = inp.zone_demand.clone();
    for (gi, g) in s.generators.iter().enumerate() {
        let z = zone_of(&g.zone);
        match p_var[gi] {
            Some(v) => rows[z].push((v, 1.0)),
            None => rhs[z] -= p_const[gi],
        }
    }
    for (k, st) in s.storage_units.iter().enumerate() {
        let (gen, pump) = storage_vars[k];
        rows[zone_of(&st.zone)].push((gen, 1.0));
        rows[zone_of(&st.zone)].push((pump, -1.0));
    }
    for (k, w) in s.water_loads.iter().enumerate() {
        if let Some(v) = shed_var[k] {
            rows[zone_of(&w.zone)].push((v, 1.0));
        }
    }
    for (l, &f) in flows.iter().enumerate() {
        let (a, b) = net.endpoints(l);
        rows[a].push((f, -1.0));
        rows[b].push((f, 1.0));
    }
    for z in 0..nz {
        rows[z].push((short[z], 1.0));
        rows[z].push((over[z], -1.0));
        lp.add_constraint(
            format!("balance[{}]", net.zone_ids[z]),
            std::mem::take(&mut rows[z]),
            ewsim_opt::Sense::Eq,
            rhs[z],
        );
    }
    for (c, cyc) in net.cycles().iter().enumerate() {
        let terms = cyc.iter().map(|&(l, d)| (flows[l], d * net.reactance(l))).collect();
        lp.add_constraint(format!("loop[{c}]"), terms, ewsim_opt::Sense::Eq, 0.0);
    }

    let r = solve_lp(&lp);
    if !r.is_optimal() {
        return Err(ScedError::Solver {
            minute: t,
            status: r.status,
        });
    }
    let setpoint: Vec<f64> = (0..ng)
        .map(|gi| p_var[gi].map_or(p_const[gi], |v| r.value(v)))
        .collect();
    let curtailed: Vec<f64> = (0..ng)
        .map(|gi| match inp.classes.class_of(gi) {
            ResourceClass::SemiDispatchable => (inp.available[gi].max(0.0) - setpoint[gi]).max(0.0),
            _ => 0.0,
        })
        .collect();
    let storage_gen: Vec<f64> = storage_vars.iter().map(|&(g, _)| r.value(g).max(0.0)).collect();
    let storage_pump: Vec<f64> = storage_vars.iter().map(|&(_, q)| r.value(q).max(0.0)).collect();
    let storage_energy = s
        .storage_units
        .iter()
        .enumerate()
        .map(|(k, st)| {
            (storage_e0[k] + dh * (st.round_trip_eff * storage_pump[k] - storage_gen[k])).clamp(0.0, st.energy_cap)
        })
        .collect();
    let shed: Vec<f64> = shed_var.iter().map(|v| v.map_or(0.0, |v| r.value(v).max(0.0))).collect();
    let shortfall = (0..nz).map(|z| r.value(short[z]) - r.value(over[z])).collect();
    let cost_per_min = production_cost_per_min(s, &setpoint, &curtailed, &shed);
    Ok(DispatchState {
        minute: t,
        on,
        setpoint,
        curtailed,
        available: (0..ng)
            .map(|gi| {
                if s.generators[gi].profile_id.is_some() {
                    inp.available[gi]
                } else {
                    0.0
                }
            })
            .collect(),
        shed,
        storage_gen,
        storage_pump,
        storage_energy,
        shortfall,
        cost_per_min,
    })
}

/// Energy, curtailment and shedding cost of one operating point, $/min.
pub fn production_cost_per_min(s: &Scenario, setpoint: &[f64], curtailed: &[f64], shed: &[f64]) -> f64 {
    let gen: f64 = s
        .generators
        .iter()
        .zip(setpoint.iter().zip(curtailed))
        .map(|(g, (p, c))| g.marginal_cost * p + g.curtail_price * c)
        .sum();
    let sh: f64 = s.water_loads.iter().zip(shed).map(|(w, x)| w.shed_price * x).sum();
    (gen + sh) / 60.0
}
