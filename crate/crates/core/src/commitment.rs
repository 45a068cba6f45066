//! Commitment program shared by the day-ahead and real-time layers.
//!
//! A [`Window`] describes a block of equal steps: forecasts per step, which
//! unit statuses are free or pinned, the state the block starts from and the
//! reserve targets. [`build`] turns it into a MIP and [`decode`] reads a
//! solution back as a [`CommitmentSchedule`].

use ewsim_opt::{solve_milp, MilpOptions, MixedIntegerProgram, Sense, SolveResult, SolveStatus, VarId};
use thiserror::Error;

use crate::forecast::ForecastSet;
use crate::network::Network;
use crate::scenario::{Classification, Horizon, ResourceClass, Scenario};

/// Price of unserved or surplus energy in relaxed programs, $/MWh.
pub const SHORTFALL_PRICE: f64 = 1e4;
/// Price of uncovered reserve in relaxed programs, $/MW per hour.
pub const RESERVE_SHORTFALL_PRICE: f64 = 1000.0;
/// Slack above which a relaxed step counts as binding.
const SLACK_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Commit {
    Free,
    Forced(bool),
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnitState {
    pub on: bool,
    /// How long the unit has held `on`, in minutes.
    pub minutes_in_state: i64,
    /// Output just before the window. `None` lifts the ramp limit on the
    /// first step.
    pub output: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialState {
    pub units: Vec<UnitState>,
    pub storage_energy: Vec<f64>,
}

impl InitialState {
    /// State at the start of a run: dispatchable units have been off for
    /// their minimum down time, everything else is running, storage holds
    /// its initial energy.
    pub fn cold(s: &Scenario, classes: &Classification) -> Self {
        let units = s
            .generators
            .iter()
            .enumerate()
            .map(|(i, g)| match classes.class_of(i) {
                ResourceClass::Dispatchable => UnitState {
                    on: false,
                    minutes_in_state: g.min_down as i64 * 60,
                    output: Some(0.0),
                },
                ResourceClass::MustRun => UnitState {
                    on: true,
                    minutes_in_state: i64::MAX / 4,
                    output: Some(g.p_max),
                },
                _ => UnitState {
                    on: true,
                    minutes_in_state: i64::MAX / 4,
                    output: None,
                },
            })
            .collect();
        InitialState {
            units,
            storage_energy: s.storage_units.iter().map(|u| u.initial_energy).collect(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CommitError {
    #[error("{name} is infeasible; binding steps {binding:?}")]
    Infeasible { name: String, binding: Vec<usize> },
    #[error("{name}: solver returned {status:?}")]
    Solver { name: String, status: SolveStatus },
    #[error("{name}: malformed program: {message}")]
    Model { name: String, message: String },
}

/// Everything a commitment program needs for one block of steps.
#[derive(Clone, Debug)]
pub struct Window<'a> {
    pub name: String,
    pub s: &'a Scenario,
    pub classes: &'a Classification,
    pub network: &'a Network,
    /// Minutes after the scenario start of step 0.
    pub start_minute: i64,
    pub step: u32,
    /// Zonal load plus water-utility demand, `[step][zone]`.
    pub zone_demand: Vec<Vec<f64>>,
    /// `[step][water load]`.
    pub water_demand: Vec<Vec<f64>>,
    /// Forecast injection of profile-driven units, `[step][generator]`.
    pub available: Vec<Vec<f64>>,
    /// `[generator][step]`; only read for dispatchable units.
    pub commit: Vec<Vec<Commit>>,
    pub initial: InitialState,
    pub reserve_up: Vec<f64>,
    pub reserve_down: Vec<f64>,
    /// System ramp requirements, MW/min.
    pub ramp_up: f64,
    pub ramp_down: f64,
    /// Minimum storage energy at the end of the window.
    pub storage_target: Vec<f64>,
    pub relaxed: bool,
}

/// Peak of the day-ahead forecast of total demand over calendar day `day`.
pub fn daily_peak(s: &Scenario, forecasts: &ForecastSet, day: i64) -> f64 {
    (0..24)
        .map(|h| {
            let m = (day * 1440 + h * 60) as f64;
            let load: f64 = s.zone_loads.values().map(|id| forecasts.value(Horizon::DayAhead, id, m)).sum();
            let water: f64 = s
                .water_loads
                .iter()
                .map(|w| forecasts.value(Horizon::DayAhead, &w.profile_id, m))
                .sum();
            load + water
        })
        .fold(0.0, f64::max)
}

impl<'a> Window<'a> {
    /// Window filled from `horizon` forecasts, all dispatchable statuses
    /// free, and the scenario's reserve policy.
    #[allow(clippy::too_many_arguments)]
    pub fn from_forecasts(
        name: impl Into<String>,
        s: &'a Scenario,
        classes: &'a Classification,
        network: &'a Network,
        forecasts: &ForecastSet,
        horizon: Horizon,
        start_minute: i64,
        step: u32,
        steps: usize,
        initial: InitialState,
    ) -> Self {
        let minute = |t: usize| (start_minute + t as i64 * step as i64) as f64;
        let mut zone_demand = Vec::with_capacity(steps);
        let mut water_demand = Vec::with_capacity(steps);
        let mut available = Vec::with_capacity(steps);
        for t in 0..steps {
            let m = minute(t);
            let mut zd: Vec<f64> = s
                .zones
                .iter()
                .map(|z| {
                    s.zone_loads
                        .get(&z.id)
                        .map_or(0.0, |id| forecasts.value(horizon, id, m))
                })
                .collect();
            let wd: Vec<f64> = s
                .water_loads
                .iter()
                .map(|w| forecasts.value(horizon, &w.profile_id, m))
                .collect();
            for (w, d) in s.water_loads.iter().zip(&wd) {
                zd[network.zone_ids.iter().position(|z| *z == w.zone).expect("zone")] += d;
            }
            zone_demand.push(zd);
            water_demand.push(wd);
            available.push(
                s.generators
                    .iter()
                    .map(|g| {
                        g.profile_id
                            .as_deref()
                            .map_or(0.0, |id| forecasts.value(horizon, id, m))
                    })
                    .collect(),
            );
        }
        let vre = s.vre_capacity();
        let mut reserve_up = Vec::with_capacity(steps);
        let mut last_day = i64::MIN;
        let mut req = 0.0;
        for t in 0..steps {
            let day = (minute(t) as i64).div_euclid(1440);
            if day != last_day {
                req = s.reserve_policy.requirement(daily_peak(s, forecasts, day), vre);
                last_day = day;
            }
            reserve_up.push(req);
        }
        let storage_target = s
            .storage_units
            .iter()
            .zip(&initial.storage_energy)
            .map(|(_, e0)| (e0 - s.storage_drawdown).max(0.0))
            .collect();
        Window {
            name: name.into(),
            s,
            classes,
            network,
            start_minute,
            step,
            zone_demand,
            water_demand,
            available,
            commit: vec![vec![Commit::Free; steps]; s.generators.len()],
            initial,
            reserve_down: reserve_up.clone(),
            reserve_up,
            ramp_up: s.reserve_policy.ramp_up_mw_per_min,
            ramp_down: s.reserve_policy.ramp_down_mw_per_min,
            storage_target,
            relaxed: false,
        }
    }

    pub fn steps(&self) -> usize {
        self.zone_demand.len()
    }

    fn hours(&self) -> f64 {
        self.step as f64 / 60.0
    }
}

/// A variable or a value fixed before the solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Term {
    Var(VarId),
    Const(f64),
}

impl Term {
    fn value(self, x: &[f64]) -> f64 {
        match self {
            Term::Var(v) => x[v.0],
            Term::Const(c) => c,
        }
    }
}

/// Row under construction; constants fold into the right-hand side.
#[derive(Default)]
struct Row {
    terms: Vec<(VarId, f64)>,
    constant: f64,
}

impl Row {
    fn add(&mut self, t: Term, coef: f64) -> &mut Self {
        match t {
            Term::Var(v) => self.terms.push((v, coef)),
            Term::Const(c) => self.constant += coef * c,
        }
        self
    }

    fn push(self, mip: &mut MixedIntegerProgram, name: String, sense: Sense, rhs: f64) {
        if !self.terms.is_empty() {
            mip.lp.add_constraint(name, self.terms, sense, rhs - self.constant);
        }
    }
}

#[derive(Clone, Debug)]
struct Layout {
    u: Vec<Vec<Term>>,
    start: Vec<Vec<Term>>,
    p: Vec<Vec<Term>>,
    store_gen: Vec<Vec<VarId>>,
    store_pump: Vec<Vec<VarId>>,
    energy: Vec<Vec<VarId>>,
    shed: Vec<Vec<Option<VarId>>>,
    /// Per step: every penalised slack with its price per unit.
    slacks: Vec<Vec<(VarId, f64)>>,
}

pub struct CommitmentProgram {
    pub mip: MixedIntegerProgram,
    layout: Layout,
}

/// Steps an `hours`-long minimum run spans at `step` minutes.
fn run_steps(hours: u32, step: u32) -> usize {
    (hours as usize * 60).div_ceil(step as usize)
}

/// Largest |b − a| with a ∈ [lo_a, hi_a] and b ∈ [lo_b, hi_b].
fn span(a: (f64, f64), b: (f64, f64)) -> f64 {
    (b.1 - a.0).max(a.1 - b.0)
}

pub fn build(w: &Window) -> CommitmentProgram {
    let s = w.s;
    let n = w.steps();
    let dh = w.hours();
    let mut mip = MixedIntegerProgram::new(w.name.clone());
    let ng = s.generators.len();

    let mut u = vec![Vec::with_capacity(n); ng];
    let mut start = vec![Vec::with_capacity(n); ng];
    let mut p = vec![Vec::with_capacity(n); ng];
    let mut p_range = vec![Vec::with_capacity(n); ng];

    for (gi, g) in s.generators.iter().enumerate() {
        let init = &w.initial.units[gi];
        match w.classes.class_of(gi) {
            ResourceClass::Dispatchable => {
                let mut status: Vec<Commit> = w.commit[gi].clone();
                // Finish any minimum run already under way.
                let m = init.minutes_in_state.max(0);
                let need = if init.on {
                    (g.min_up as i64 * 60 - m).max(0)
                } else {
                    (g.min_down as i64 * 60 - m).max(0)
                };
                let lock = (need as usize).div_ceil(w.step as usize).min(n);
                for c in status.iter_mut().take(lock) {
                    if *c == Commit::Free {
                        *c = Commit::Forced(init.on);
                    }
                }
                let free = status.contains(&Commit::Free);
                for (t, c) in status.iter().enumerate() {
                    let ut = if free {
                        let (lo, hi) = match c {
                            Commit::Free => (0.0, 1.0),
                            Commit::Forced(b) => (*b as u8 as f64, *b as u8 as f64),
                        };
                        let v = mip.lp.add_var(format!("u[{},{}]", g.id, t), lo, hi, dh * g.no_load_cost);
                        mip.mark_binary(v);
                        Term::Var(v)
                    } else {
                        let on = matches!(c, Commit::Forced(true));
                        if on {
                            mip.lp.add_objective_constant(dh * g.no_load_cost);
                        }
                        Term::Const(on as u8 as f64)
                    };
                    u[gi].push(ut);
                    let (lo, hi) = match ut {
                        Term::Const(x) if x > 0.5 => (g.p_min, g.p_max),
                        Term::Const(_) => (0.0, 0.0),
                        Term::Var(_) => (0.0, g.p_max),
                    };
                    let pv = mip.lp.add_var(format!("p[{},{}]", g.id, t), lo, hi, dh * g.marginal_cost);
                    p[gi].push(Term::Var(pv));
                    p_range[gi].push((lo, hi));
                }
                for t in 0..n {
                    let prev = if t == 0 {
                        Term::Const(init.on as u8 as f64)
                    } else {
                        u[gi][t - 1]
                    };
                    let st = match (u[gi][t], prev) {
                        (Term::Const(a), Term::Const(b)) => {
                            let x = (a - b).max(0.0);
                            mip.lp.add_objective_constant(x * g.startup_cost);
                            Term::Const(x)
                        }
                        _ => {
                            let v = mip.lp.add_var(format!("s[{},{}]", g.id, t), 0.0, 1.0, g.startup_cost);
                            let mut r = Row::default();
                            r.add(Term::Var(v), 1.0).add(u[gi][t], -1.0).add(prev, 1.0);
                            r.push(&mut mip, format!("start[{},{}]", g.id, t), Sense::Ge, 0.0);
                            Term::Var(v)
                        }
                    };
                    start[gi].push(st);
                    if let Term::Var(_) = u[gi][t] {
                        let mut hi = Row::default();
                        hi.add(p[gi][t], 1.0).add(u[gi][t], -g.p_max);
                        hi.push(&mut mip, format!("pmax[{},{}]", g.id, t), Sense::Le, 0.0);
                        if g.p_min > 0.0 {
                            let mut lo = Row::default();
                            lo.add(p[gi][t], 1.0).add(u[gi][t], -g.p_min);
                            lo.push(&mut mip, format!("pmin[{},{}]", g.id, t), Sense::Ge, 0.0);
                        }
                    }
                }
                // Minimum up and down times.
                let up = run_steps(g.min_up, w.step);
                let down = run_steps(g.min_down, w.step);
                for t in 0..n {
                    if up > 1 {
                        let mut r = Row::default();
                        for st in &start[gi][t.saturating_sub(up - 1)..=t] {
                            r.add(*st, 1.0);
                        }
                        r.add(u[gi][t], -1.0);
                        r.push(&mut mip, format!("minup[{},{}]", g.id, t), Sense::Le, 0.0);
                    }
                    if down > 1 {
                        let mut r = Row::default();
                        for st in &start[gi][t.saturating_sub(down - 1)..=t] {
                            r.add(*st, 1.0);
                        }
                        let before = if t >= down {
                            u[gi][t - down]
                        } else {
                            Term::Const(init.on as u8 as f64)
                        };
                        r.add(before, 1.0);
                        r.push(&mut mip, format!("mindown[{},{}]", g.id, t), Sense::Le, 1.0);
                    }
                }
                // Ramping, with room to pass p_min on start-up and shut-down.
                let dr = w.step as f64 * g.ramp;
                let k = dr.max(g.p_min);
                for t in 0..n {
                    let (p_prev, u_prev, range_prev) = if t == 0 {
                        match init.output {
                            Some(x) => (Term::Const(x), Term::Const(init.on as u8 as f64), (x, x)),
                            None => continue,
                        }
                    } else {
                        (p[gi][t - 1], u[gi][t - 1], p_range[gi][t - 1])
                    };
                    if dr >= span(range_prev, p_range[gi][t]) {
                        continue;
                    }
                    let mut r = Row::default();
                    r.add(p[gi][t], 1.0).add(p_prev, -1.0).add(u_prev, k - dr);
                    r.push(&mut mip, format!("rampup[{},{}]", g.id, t), Sense::Le, k);
                    let mut r = Row::default();
                    r.add(p_prev, 1.0).add(p[gi][t], -1.0).add(u[gi][t], k - dr);
                    r.push(&mut mip, format!("rampdn[{},{}]", g.id, t), Sense::Le, k);
                }
            }
            ResourceClass::SemiDispatchable => {
                for t in 0..n {
                    let f = w.available[t][gi];
                    u[gi].push(Term::Const(1.0));
                    start[gi].push(Term::Const(0.0));
                    if f >= 0.0 {
                        let v = mip.lp.add_var(format!("p[{},{}]", g.id, t), 0.0, f, -dh * g.curtail_price);
                        mip.lp.add_objective_constant(dh * g.curtail_price * f);
                        p[gi].push(Term::Var(v));
                        p_range[gi].push((0.0, f));
                    } else {
                        p[gi].push(Term::Const(f));
                        p_range[gi].push((f, f));
                    }
                }
                let dr = w.step as f64 * g.ramp;
                for t in 0..n {
                    let (p_prev, f_prev, range_prev) = if t == 0 {
                        match init.output {
                            Some(x) => (Term::Const(x), x, (x, x)),
                            None => continue,
                        }
                    } else {
                        (p[gi][t - 1], w.available[t - 1][gi], p_range[gi][t - 1])
                    };
                    let b = dr.max((w.available[t][gi] - f_prev).abs());
                    if b >= span(range_prev, p_range[gi][t]) {
                        continue;
                    }
                    let mut r = Row::default();
                    r.add(p[gi][t], 1.0).add(p_prev, -1.0);
                    r.push(&mut mip, format!("rampup[{},{}]", g.id, t), Sense::Le, b);
                    let mut r = Row::default();
                    r.add(p_prev, 1.0).add(p[gi][t], -1.0);
                    r.push(&mut mip, format!("rampdn[{},{}]", g.id, t), Sense::Le, b);
                }
            }
            ResourceClass::FixedInjection => {
                for t in 0..n {
                    let f = w.available[t][gi];
                    u[gi].push(Term::Const(1.0));
                    start[gi].push(Term::Const(0.0));
                    p[gi].push(Term::Const(f));
                    p_range[gi].push((f, f));
                }
            }
            ResourceClass::MustRun => {
                for _ in 0..n {
                    u[gi].push(Term::Const(1.0));
                    start[gi].push(Term::Const(0.0));
                    p[gi].push(Term::Const(g.p_max));
                    p_range[gi].push((g.p_max, g.p_max));
                    mip.lp.add_objective_constant(dh * (g.no_load_cost + g.marginal_cost * g.p_max));
                }
            }
        }
    }

    // Storage.
    let mut store_gen = Vec::new();
    let mut store_pump = Vec::new();
    let mut energy = Vec::new();
    for (k, st) in s.storage_units.iter().enumerate() {
        let (mut gv, mut qv, mut ev) = (Vec::new(), Vec::new(), Vec::new());
        for t in 0..n {
            gv.push(mip.lp.add_var(format!("sg[{},{}]", st.id, t), 0.0, st.p_max_gen, 0.0));
            qv.push(mip.lp.add_var(format!("sq[{},{}]", st.id, t), 0.0, st.p_max_pump, 0.0));
            let lo = if t + 1 == n {
                w.storage_target[k].clamp(0.0, st.energy_cap)
            } else {
                0.0
            };
            ev.push(mip.lp.add_var(format!("e[{},{}]", st.id, t), lo, st.energy_cap, 0.0));
            let mut r = Row::default();
            r.add(Term::Var(ev[t]), 1.0)
                .add(Term::Var(qv[t]), -dh * st.round_trip_eff)
                .add(Term::Var(gv[t]), dh);
            let prev = if t == 0 {
                Term::Const(w.initial.storage_energy[k])
            } else {
                Term::Var(ev[t - 1])
            };
            r.add(prev, -1.0);
            r.push(&mut mip, format!("soc[{},{}]", st.id, t), Sense::Eq, 0.0);
        }
        store_gen.push(gv);
        store_pump.push(qv);
        energy.push(ev);
    }

    // Sheddable water load.
    let mut shed: Vec<Vec<Option<VarId>>> = Vec::new();
    for (k, wl) in s.water_loads.iter().enumerate() {
        let frac = w.classes.shed_fraction[k];
        shed.push(
            (0..n)
                .map(|t| {
                    (frac > 0.0).then(|| {
                        mip.lp.add_var(
                            format!("shed[{},{}]", wl.id, t),
                            0.0,
                            frac * w.water_demand[t][k],
                            dh * wl.shed_price,
                        )
                    })
                })
                .collect(),
        );
    }

    let zone_of = |id: &str| w.network.zone_ids.iter().position(|z| z == id).expect("zone");
    let gen_zone: Vec<usize> = s.generators.iter().map(|g| zone_of(&g.zone)).collect();
    let st_zone: Vec<usize> = s.storage_units.iter().map(|x| zone_of(&x.zone)).collect();
    let wl_zone: Vec<usize> = s.water_loads.iter().map(|x| zone_of(&x.zone)).collect();
    let nz = w.network.num_zones();
    let mut slacks = vec![Vec::new(); n];

    for t in 0..n {
        // Zonal balance with DC flows.
        let flows: Vec<VarId> = (0..w.network.num_pipes())
            .map(|l| {
                let lim = w.network.limit(l);
                mip.lp.add_var(format!("flow[{},{}]", w.network.pipe_ids[l], t), -lim, lim, 0.0)
            })
            .collect();
        let mut rows: Vec<Row> = (0..nz).map(|_| Row::default()).collect();
        for gi in 0..ng {
            rows[gen_zone[gi]].add(p[gi][t], 1.0);
        }
        for k in 0..s.storage_units.len() {
            rows[st_zone[k]]
                .add(Term::Var(store_gen[k][t]), 1.0)
                .add(Term::Var(store_pump[k][t]), -1.0);
        }
        for (k, sh) in shed.iter().enumerate() {
            if let Some(v) = sh[t] {
                rows[wl_zone[k]].add(Term::Var(v), 1.0);
            }
        }
        for (l, &f) in flows.iter().enumerate() {
            let (a, b) = w.network.endpoints(l);
            rows[a].add(Term::Var(f), -1.0);
            rows[b].add(Term::Var(f), 1.0);
        }
        if w.relaxed {
            for (z, row) in rows.iter_mut().enumerate() {
                let zid = &w.network.zone_ids[z];
                let short = mip.lp.add_var(format!("short[{},{}]", zid, t), 0.0, f64::INFINITY, dh * SHORTFALL_PRICE);
                let over = mip.lp.add_var(format!("over[{},{}]", zid, t), 0.0, f64::INFINITY, dh * SHORTFALL_PRICE);
                row.add(Term::Var(short), 1.0).add(Term::Var(over), -1.0);
                slacks[t].push((short, dh * SHORTFALL_PRICE));
                slacks[t].push((over, dh * SHORTFALL_PRICE));
            }
        }
        for (z, row) in rows.into_iter().enumerate() {
            let name = format!("balance[{},{}]", w.network.zone_ids[z], t);
            if row.terms.is_empty() {
                continue;
            }
            row.push(&mut mip, name, Sense::Eq, w.zone_demand[t][z]);
        }
        for (c, cyc) in w.network.cycles().iter().enumerate() {
            let terms = cyc.iter().map(|&(l, d)| (flows[l], d * w.network.reactance(l))).collect();
            mip.lp.add_constraint(format!("loop[{},{}]", c, t), terms, Sense::Eq, 0.0);
        }

        // Reserves.
        let mut up = Row::default();
        let mut down = Row::default();
        let mut ramp_up = Row::default();
        let mut ramp_down = Row::default();
        let want_ramp_up = w.ramp_up > 0.0;
        let want_ramp_down = w.ramp_down > 0.0;
        for (gi, g) in s.generators.iter().enumerate() {
            match w.classes.class_of(gi) {
                ResourceClass::Dispatchable => {
                    if u[gi][t] == Term::Const(0.0) {
                        continue;
                    }
                    let reach = w.step as f64 * g.ramp;
                    for (row, ucoef, pcoef, tag, wanted) in [
                        (&mut up, g.p_max, -1.0, "rup", w.reserve_up[t] > 0.0),
                        (&mut down, -g.p_min, 1.0, "rdn", w.reserve_down[t] > 0.0),
                    ] {
                        if !wanted {
                            continue;
                        }
                        if reach >= g.p_max - g.p_min {
                            row.add(u[gi][t], ucoef).add(p[gi][t], pcoef);
                        } else {
                            let r = mip.lp.add_var(format!("{}[{},{}]", tag, g.id, t), 0.0, f64::INFINITY, 0.0);
                            let mut lim = Row::default();
                            lim.add(Term::Var(r), 1.0).add(u[gi][t], -ucoef).add(p[gi][t], -pcoef);
                            lim.push(&mut mip, format!("{}room[{},{}]", tag, g.id, t), Sense::Le, 0.0);
                            let mut lim = Row::default();
                            lim.add(Term::Var(r), 1.0).add(u[gi][t], -reach);
                            lim.push(&mut mip, format!("{}reach[{},{}]", tag, g.id, t), Sense::Le, 0.0);
                            row.add(Term::Var(r), 1.0);
                        }
                    }
                    for (row, ucoef, pcoef, tag, wanted) in [
                        (&mut ramp_up, g.p_max, -1.0, "rrup", want_ramp_up),
                        (&mut ramp_down, -g.p_min, 1.0, "rrdn", want_ramp_down),
                    ] {
                        if !wanted {
                            continue;
                        }
                        let r = mip.lp.add_var(format!("{}[{},{}]", tag, g.id, t), 0.0, f64::INFINITY, 0.0);
                        let mut lim = Row::default();
                        lim.add(Term::Var(r), 1.0).add(u[gi][t], -ucoef).add(p[gi][t], -pcoef);
                        lim.push(&mut mip, format!("{}room[{},{}]", tag, g.id, t), Sense::Le, 0.0);
                        let mut lim = Row::default();
                        lim.add(Term::Var(r), 1.0).add(u[gi][t], -g.ramp);
                        lim.push(&mut mip, format!("{}reach[{},{}]", tag, g.id, t), Sense::Le, 0.0);
                        row.add(Term::Var(r), 1.0);
                    }
                }
                ResourceClass::SemiDispatchable => {
                    if let Term::Var(_) = p[gi][t] {
                        let f = w.available[t][gi];
                        up.add(Term::Const(f), 1.0).add(p[gi][t], -1.0);
                        down.add(p[gi][t], 1.0);
                        ramp_up.add(Term::Const(f / 5.0), 1.0).add(p[gi][t], -0.2);
                        ramp_down.add(p[gi][t], 0.2);
                    }
                }
                _ => {}
            }
        }
        for (k, sh) in shed.iter().enumerate() {
            if let Some(v) = sh[t] {
                let cap = w.classes.shed_fraction[k] * w.water_demand[t][k];
                up.add(Term::Const(cap), 1.0).add(Term::Var(v), -1.0);
                down.add(Term::Var(v), 1.0);
            }
        }
        let targets = [
            (up, w.reserve_up[t], "reserve_up", dh * RESERVE_SHORTFALL_PRICE),
            (down, w.reserve_down[t], "reserve_dn", dh * RESERVE_SHORTFALL_PRICE),
            (ramp_up, w.ramp_up, "ramp_up", dh * RESERVE_SHORTFALL_PRICE),
            (ramp_down, w.ramp_down, "ramp_dn", dh * RESERVE_SHORTFALL_PRICE),
        ];
        for (mut row, req, tag, price) in targets {
            if req <= 0.0 {
                continue;
            }
            if w.relaxed {
                let v = mip.lp.add_var(format!("{}_short[{}]", tag, t), 0.0, f64::INFINITY, price);
                row.add(Term::Var(v), 1.0);
                slacks[t].push((v, price));
            }
            if row.terms.is_empty() {
                // Nothing can supply reserve; keep the program honestly infeasible.
                if row.constant < req {
                    let v = mip.lp.add_var(format!("{}_none[{}]", tag, t), 0.0, 0.0, 0.0);
                    row.add(Term::Var(v), 1.0);
                } else {
                    continue;
                }
            }
            row.push(&mut mip, format!("{}[{}]", tag, t), Sense::Ge, req);
        }
    }

    CommitmentProgram {
        mip,
        layout: Layout {
            u,
            start,
            p,
            store_gen,
            store_pump,
            energy,
            shed,
            slacks,
        },
    }
}

/// Per-step schedule decoded from a commitment program.
#[derive(Clone, Debug, PartialEq)]
pub struct CommitmentSchedule {
    pub start_minute: i64,
    pub step: u32,
    /// `[generator][step]`.
    pub on: Vec<Vec<bool>>,
    pub setpoint: Vec<Vec<f64>>,
    pub curtailed: Vec<Vec<f64>>,
    /// `[storage][step]`.
    pub storage_gen: Vec<Vec<f64>>,
    pub storage_pump: Vec<Vec<f64>>,
    pub storage_energy: Vec<Vec<f64>>,
    /// `[water load][step]`.
    pub shed: Vec<Vec<f64>>,
    /// Production cost of each step including start-ups, $ per step.
    pub step_cost: Vec<f64>,
    /// Slack penalties per step (relaxed programs only).
    pub penalty: Vec<f64>,
    pub objective: f64,
    pub relaxed: bool,
}

impl CommitmentSchedule {
    pub fn steps(&self) -> usize {
        self.step_cost.len()
    }

    /// Steps whose slacks are in use.
    pub fn binding_steps(&self) -> Vec<usize> {
        (0..self.steps()).filter(|&t| self.penalty[t] > SLACK_TOL).collect()
    }

    /// State handed to a window that begins right after step `t`.
    pub fn state_after(&self, t: usize, before: &InitialState) -> InitialState {
        let units = self
            .on
            .iter()
            .enumerate()
            .map(|(gi, on)| {
                let now = on[t];
                let run = on[..=t].iter().rev().take_while(|&&x| x == now).count() as i64;
                let mut minutes = run * self.step as i64;
                if run as usize == t + 1 && before.units[gi].on == now {
                    minutes = minutes.saturating_add(before.units[gi].minutes_in_state);
                }
                UnitState {
                    on: now,
                    minutes_in_state: minutes,
                    output: Some(self.setpoint[gi][t]),
                }
            })
            .collect();
        InitialState {
            units,
            storage_energy: self.storage_energy.iter().map(|e| e[t]).collect(),
        }
    }
}

pub fn decode(w: &Window, prog: &CommitmentProgram, r: &SolveResult) -> CommitmentSchedule {
    let s = w.s;
    let x = &r.values;
    let n = w.steps();
    let dh = w.hours();
    let lay = &prog.layout;
    let mut on = Vec::new();
    let mut setpoint = Vec::new();
    let mut curtailed = Vec::new();
    let mut step_cost = vec![0.0; n];
    for (gi, g) in s.generators.iter().enumerate() {
        let class = w.classes.class_of(gi);
        let mut o = Vec::with_capacity(n);
        let mut sp = Vec::with_capacity(n);
        let mut cu = Vec::with_capacity(n);
        for t in 0..n {
            let ut = lay.u[gi][t].value(x);
            let is_on = ut > 0.5;
            let mut pt = lay.p[gi][t].value(x);
            if class == ResourceClass::Dispatchable && !is_on {
                pt = 0.0;
            }
            let c = if class == ResourceClass::SemiDispatchable {
                (w.available[t][gi].max(0.0) - pt).max(0.0)
            } else {
                0.0
            };
            let u_cost = if is_on { 1.0 } else { 0.0 };
            step_cost[t] += lay.start[gi][t].value(x).round() * g.startup_cost
                + dh * (g.no_load_cost * u_cost + g.marginal_cost * pt + g.curtail_price * c);
            o.push(is_on);
            sp.push(pt);
            cu.push(c);
        }
        on.push(o);
        setpoint.push(sp);
        curtailed.push(cu);
    }
    let shed: Vec<Vec<f64>> = lay
        .shed
        .iter()
        .enumerate()
        .map(|(k, v)| {
            v.iter()
                .enumerate()
                .map(|(t, var)| {
                    let val = var.map_or(0.0, |v| x[v.0].max(0.0));
                    step_cost[t] += dh * s.water_loads[k].shed_price * val;
                    val
                })
                .collect()
        })
        .collect();
    let read = |vars: &Vec<Vec<VarId>>| -> Vec<Vec<f64>> {
        vars.iter().map(|v| v.iter().map(|id| x[id.0]).collect()).collect()
    };
    let penalty = lay
        .slacks
        .iter()
        .map(|sl| sl.iter().map(|(v, price)| x[v.0] * price).sum())
        .collect();
    CommitmentSchedule {
        start_minute: w.start_minute,
        step: w.step,
        on,
        setpoint,
        curtailed,
        storage_gen: read(&lay.store_gen),
        storage_pump: read(&lay.store_pump),
        storage_energy: read(&lay.energy),
        shed,
        step_cost,
        penalty,
        objective: r.objective,
        relaxed: w.relaxed,
    }
}

/// Solve an already built program and decode it. A strict window that is
/// infeasible reports the steps where a relaxed copy needs slack.
pub fn solve_built(
    w: &Window,
    prog: &CommitmentProgram,
    opts: &MilpOptions,
) -> Result<CommitmentSchedule, CommitError> {
    let r = solve_milp(&prog.mip, opts).map_err(|e| CommitError::Model {
        name: w.name.clone(),
        message: e.to_string(),
    })?;
    match r.status {
        SolveStatus::Optimal => Ok(decode(w, prog, &r)),
        SolveStatus::NodeLimit if r.has_solution() => Ok(decode(w, prog, &r)),
        SolveStatus::Infeasible if !w.relaxed => {
            let mut relaxed = w.clone();
            relaxed.relaxed = true;
            let binding = match solve_window(&relaxed, opts) {
                Ok(sched) => sched.binding_steps(),
                Err(_) => Vec::new(),
            };
            Err(CommitError::Infeasible {
                name: w.name.clone(),
                binding,
            })
        }
        status => Err(CommitError::Solver {
            name: w.name.clone(),
            status,
        }),
    }
}

pub fn solve_window(w: &Window, opts: &MilpOptions) -> Result<CommitmentSchedule, CommitError> {
    solve_built(w, &build(w), opts)
}

/// System-wide supply minus demand at step `t`. Flows cancel out.
pub fn step_imbalance(w: &Window, sched: &CommitmentSchedule, t: usize) -> f64 {
    let gen: f64 = sched.setpoint.iter().map(|p| p[t]).sum();
    let store: f64 = (0..sched.storage_gen.len())
        .map(|k| sched.storage_gen[k][t] - sched.storage_pump[k][t])
        .sum();
    let shed: f64 = sched.shed.iter().map(|x| x[t]).sum();
    let demand: f64 = w.zone_demand[t].iter().sum();
    gen + store + shed - demand
}
