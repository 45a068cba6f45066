//! Rolling four-layer simulation and run artifacts.
//!
//! Per day one day-ahead commitment, per hour one real-time commitment, per
//! ten minutes one dispatch, and per minute the physical layer: setpoint
//! trajectories, regulation, network flows, reserves and water accounting.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::Duration;
use ewsim_opt::{write_lp, MilpOptions, SolveStatus};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commitment::{CommitError, CommitmentSchedule, InitialState, UnitState};
use crate::forecast::ForecastSet;
use crate::metrics::{
    compare_runs, curtailment_metrics, duration_curve, histogram, CurtailmentMetrics, DeltaReport,
    DistributionSummary, MetricsError, RunSeries,
};
use crate::network::{Network, NetworkError};
use crate::regulation::{lerp, ramp_trajectory, settle_minute, MINUTES_PER_INTERVAL};
use crate::reserves::{regulation_mileage, snapshot, MileageMode, ReserveState};
use crate::rtuc::{run_rtuc, RtucInputs, StatusTimeline, RTUC_STEP, RTUC_STEPS};
use crate::scenario::{classify_resources, Classification, Horizon, Mode, ResourceClass, Scenario};
use crate::sced::{production_cost_per_min, run_sced, DispatchState, ScedError, ScedInputs, SCED_STEP};
use crate::scuc::{build_scuc, solve_scuc, ScucError, SCUC_HOURS, SCUC_STEP};
use crate::water::aggregate_water;

/// Largest per-day energy-ledger error accepted, MWh.
pub const LEDGER_TOLERANCE_MWH: f64 = 1e-3;

const RTUC_WINDOW_MINUTES: i64 = RTUC_STEP as i64 * RTUC_STEPS as i64;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("day-ahead commitment decided at minute {minute}: {source}")]
    Scuc { minute: i64, source: ScucError },
    #[error("real-time commitment at minute {minute}: {source}")]
    Rtuc { minute: i64, source: CommitError },
    #[error(transparent)]
    Sced(#[from] ScedError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Artifact { path: PathBuf, message: String },
}

impl SimError {
    /// The run stopped because some layer had no feasible solution.
    pub fn is_infeasibility(&self) -> bool {
        match self {
            SimError::Scuc { source: ScucError::Commit(e), .. } | SimError::Rtuc { source: e, .. } => {
                matches!(e, CommitError::Infeasible { .. } | CommitError::Solver { status: SolveStatus::Infeasible, .. })
            }
            SimError::Sced(ScedError::Solver { status, .. }) => *status == SolveStatus::Infeasible,
            _ => false,
        }
    }

    pub fn is_validation(&self) -> bool {
        matches!(self, SimError::Invalid(_))
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    /// Forecast seed; the scenario's own seed when `None`.
    pub seed: Option<u64>,
    /// Simulate only the first `days` days.
    pub days: Option<u32>,
    pub milp: MilpOptions,
    pub mileage: MileageMode,
    /// Keep the LP text of every day-ahead program among the artifacts.
    pub dump_lp: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: None,
            days: None,
            milp: MilpOptions {
                rel_gap: 1e-6,
                ..MilpOptions::default()
            },
            mileage: MileageMode::Energy,
            dump_lp: false,
        }
    }
}

/// Energy flows of one simulated day, MWh.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DayLedger {
    pub day: u32,
    pub generation: f64,
    pub storage_discharge: f64,
    pub storage_charge: f64,
    pub regulation: f64,
    pub residual: f64,
    pub shed: f64,
    pub load: f64,
}

impl DayLedger {
    /// Supply including shed water load minus served demand.
    pub fn error(&self) -> f64 {
        self.generation + self.storage_discharge + self.regulation + self.residual + self.shed
            - self.load
            - self.storage_charge
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub scuc_hours: usize,
    pub scuc_solves: usize,
    pub rtuc_runs: usize,
    /// Hours whose real-time commitment needed priced slacks.
    pub rtuc_relaxed: Vec<i64>,
    /// Dispatches that set the target of a ten-minute interval.
    pub sced_runs: usize,
    /// Dispatch points that used shortfall slacks.
    pub sced_shortfall_points: Vec<i64>,
    pub minute_records: usize,
    pub max_balance_error: f64,
    pub max_kcl_residual: f64,
    pub flow_violation_minutes: usize,
    pub ledger: Vec<DayLedger>,
}

impl RunStats {
    pub fn max_ledger_error(&self) -> f64 {
        self.ledger.iter().map(|d| d.error().abs()).fold(0.0, f64::max)
    }
}

/// Result of one simulated run, held in memory until written out.
#[derive(Clone, Debug)]
pub struct SimOutput {
    pub scenario_id: String,
    pub mode: Mode,
    pub seed: u64,
    pub days: u32,
    pub series: RunSeries,
    pub stats: RunStats,
    pub mileage: MileageMode,
    /// File name to body; CSV bodies are byte-identical across reruns.
    pub files: BTreeMap<String, String>,
    pub wall_clock_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    /// Data rows, header excluded.
    pub rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunArtifacts {
    pub run_id: String,
    pub scenario_id: String,
    pub mode: Mode,
    pub seed: u64,
    pub days: u32,
    pub dir: PathBuf,
    pub files: Vec<ManifestEntry>,
    pub wall_clock_seconds: f64,
}

fn num(x: f64) -> String {
    if x.abs() < 5e-7 {
        "0.000000".into()
    } else {
        format!("{x:.6}")
    }
}

fn join(v: impl IntoIterator<Item = String>) -> String {
    v.into_iter().collect::<Vec<_>>().join(",")
}

/// Day-ahead schedules by day index, including the look-ahead day.
struct DayPlans {
    plans: Vec<Option<CommitmentSchedule>>,
}

impl DayPlans {
    fn storage_energy_at_hour(&self, hour: i64, k: usize) -> Option<f64> {
        let d = hour.div_euclid(SCUC_HOURS as i64) as usize;
        let t = hour.rem_euclid(SCUC_HOURS as i64) as usize;
        self.plans.get(d)?.as_ref().map(|p| p.storage_energy[k][t])
    }
}

struct Run<'a> {
    s: &'a Scenario,
    classes: Classification,
    network: Network,
    forecasts: ForecastSet,
    cfg: &'a SimConfig,
    timeline: StatusTimeline,
    plans: DayPlans,
    day_inits: Vec<InitialState>,
    cold: InitialState,
    rtuc: Option<CommitmentSchedule>,
    stats: RunStats,
    series: RunSeries,
    commitments: String,
    dispatch: String,
    minute_csv: String,
    reserves_csv: String,
    water_csv: String,
    emissions_csv: String,
    lp_dumps: BTreeMap<String, String>,
}

impl<'a> Run<'a> {
    fn profile_gens(&self) -> impl Iterator<Item = (usize, &'a str)> + 'a {
        self.s
            .generators
            .iter()
            .enumerate()
            .filter_map(|(gi, g)| g.profile_id.as_deref().map(|p| (gi, p)))
    }

    /// Day-ahead commitment for `day`, decided at `decided_at`.
    fn day_ahead(&mut self, day: usize, decided_at: i64) -> Result<(), SimError> {
        let init = if day == 0 {
            self.cold.clone()
        } else {
            let prev = self.plans.plans[day - 1].as_ref().expect("previous day planned");
            prev.state_after(SCUC_HOURS - 1, &self.day_inits[day - 1])
        };
        let start = day as i64 * 1440;
        let err = |source| SimError::Scuc {
            minute: decided_at,
            source,
        };
        let problem = build_scuc(self.s, &self.classes, &self.network, &self.forecasts, start, SCUC_HOURS, init.clone())
            .map_err(err)?;
        if self.cfg.dump_lp {
            self.lp_dumps.insert(format!("lp/scuc_day{day}.lp"), write_lp(&problem.program.mip));
        }
        let plan = solve_scuc(&problem, &self.cfg.milp).map_err(err)?;
        self.stats.scuc_solves += 1;
        for (gi, g) in self.s.generators.iter().enumerate() {
            self.timeline.write(gi, start, SCUC_STEP, &plan.on[gi]);
            for t in 0..plan.steps() {
                let _ = writeln!(
                    self.commitments,
                    "scuc,{},{},{},{},{}",
                    decided_at,
                    start + t as i64 * SCUC_STEP as i64,
                    g.id,
                    plan.on[gi][t] as u8,
                    num(plan.setpoint[gi][t])
                );
            }
        }
        self.day_inits.push(init);
        self.plans.plans.push(Some(plan));
        Ok(())
    }

    /// State of every unit just before `minute`, as the real-time layer sees it.
    fn current_state(&self, minute: i64, realized: Option<&DispatchState>, storage: &[f64]) -> InitialState {
        let Some(r) = realized else {
            return self.cold.clone();
        };
        let units = self
            .s
            .generators
            .iter()
            .enumerate()
            .map(|(gi, _)| match self.classes.class_of(gi) {
                ResourceClass::Dispatchable => {
                    let cold = &self.cold.units[gi];
                    let before = if self.timeline.at(gi, 0) == cold.on {
                        cold.minutes_in_state
                    } else {
                        0
                    };
                    let (on, minutes) = self.timeline.minutes_in_state_before(gi, minute, before);
                    UnitState {
                        on,
                        minutes_in_state: minutes,
                        output: Some(r.setpoint[gi]),
                    }
                }
                _ => self.cold.units[gi].clone(),
            })
            .collect();
        InitialState {
            units,
            storage_energy: storage.to_vec(),
        }
    }

    fn real_time(&mut self, minute: i64, realized: Option<&DispatchState>) -> Result<(), SimError> {
        let storage_now: Vec<f64> = match realized {
            Some(r) => r.storage_energy.clone(),
            None => self.cold.storage_energy.clone(),
        };
        let current = self.current_state(minute, realized, &storage_now);
        let end_hour = (minute + RTUC_WINDOW_MINUTES) / 60 - 1;
        let hours = RTUC_WINDOW_MINUTES as f64 / 60.0;
        let storage_target = self
            .s
            .storage_units
            .iter()
            .enumerate()
            .map(|(k, st)| {
                let reach = storage_now[k] + hours * st.round_trip_eff * st.p_max_pump;
                let planned = self.plans.storage_energy_at_hour(end_hour, k).unwrap_or(storage_now[k]);
                planned.min(reach).min(st.energy_cap)
            })
            .collect();
        let inp = RtucInputs {
            s: self.s,
            classes: &self.classes,
            network: &self.network,
            forecasts: &self.forecasts,
            start_minute: minute,
            timeline: &self.timeline,
            current,
            storage_target,
        };
        let out = run_rtuc(&inp, &self.cfg.milp).map_err(|source| SimError::Rtuc { minute, source })?;
        self.stats.rtuc_runs += 1;
        if out.relaxed {
            self.stats.rtuc_relaxed.push(minute);
        }
        let sched = out.schedule;
        for (gi, g) in self.s.generators.iter().enumerate() {
            if g.fast_start && self.classes.class_of(gi) == ResourceClass::Dispatchable {
                self.timeline.write(gi, minute, RTUC_STEP, &sched.on[gi]);
            }
            for t in 0..sched.steps() {
                let _ = writeln!(
                    self.commitments,
                    "rtuc,{},{},{},{},{}",
                    minute,
                    minute + t as i64 * RTUC_STEP as i64,
                    g.id,
                    sched.on[gi][t] as u8,
                    num(sched.setpoint[gi][t])
                );
            }
        }
        self.rtuc = Some(sched);
        Ok(())
    }

    fn dispatch_at(&mut self, minute: i64, prev: Option<&DispatchState>) -> Result<DispatchState, SimError> {
        let s = self.s;
        let fc = &self.forecasts;
        let m = minute as f64;
        let water_demand: Vec<f64> = s
            .water_loads
            .iter()
            .map(|w| fc.value(Horizon::Dispatch, &w.profile_id, m))
            .collect();
        let mut zone_demand: Vec<f64> = self
            .network
            .zone_ids
            .iter()
            .map(|z| s.zone_loads.get(z).map_or(0.0, |id| fc.value(Horizon::Dispatch, id, m)))
            .collect();
        for (w, d) in s.water_loads.iter().zip(&water_demand) {
            zone_demand[self.zone(&w.zone)] += d;
        }
        let mut available = vec![0.0; s.generators.len()];
        for (gi, p) in self.profile_gens() {
            available[gi] = fc.value(Horizon::Dispatch, p, m);
        }
        let rt = self.rtuc.as_ref().expect("real-time commitment precedes dispatch");
        let idx = (((minute - rt.start_minute) / RTUC_STEP as i64).max(0) as usize).min(rt.steps() - 1);
        let storage = (0..s.storage_units.len())
            .map(|k| (rt.storage_gen[k][idx], rt.storage_pump[k][idx]))
            .collect();
        let d = run_sced(&ScedInputs {
            s,
            classes: &self.classes,
            network: &self.network,
            minute,
            timeline: &self.timeline,
            prev,
            zone_demand,
            water_demand,
            available,
            storage,
        })?;
        if d.shortfall.iter().any(|x| x.abs() > 1e-6) {
            self.stats.sced_shortfall_points.push(minute);
        }
        let row = d
            .setpoint
            .iter()
            .chain(&d.curtailed)
            .chain(&d.storage_gen)
            .chain(&d.storage_pump)
            .chain(&d.storage_energy)
            .chain(&d.shed)
            .map(|&x| num(x));
        let _ = writeln!(
            self.dispatch,
            "{},{},{},{}",
            minute,
            join(row),
            num(d.total_shortfall()),
            num(d.cost_per_min)
        );
        Ok(d)
    }

    fn zone(&self, id: &str) -> usize {
        self.network.zone_ids.iter().position(|z| z == id).expect("zone")
    }

    fn semi_output(&self, gi: usize, minute: i64, curtail: f64) -> (f64, f64, f64) {
        let p = self.s.generators[gi].profile_id.as_deref().expect("profile");
        let a = self.s.actual(p, minute as f64);
        if a < 0.0 {
            return (a, 0.0, a);
        }
        let c = curtail.clamp(0.0, a);
        (a - c, c, a)
    }

    /// Realized state at the end of an interval whose target was `d`.
    fn realize(&self, d: &DispatchState, outputs: &[f64], storage_energy: Vec<f64>) -> DispatchState {
        let s = self.s;
        let mut r = d.clone();
        r.setpoint = outputs.to_vec();
        for (gi, _) in self.profile_gens() {
            let (p, c, a) = match self.classes.class_of(gi) {
                ResourceClass::SemiDispatchable => self.semi_output(gi, d.minute, d.curtailed[gi]),
                _ => (outputs[gi], 0.0, outputs[gi]),
            };
            r.setpoint[gi] = p;
            r.curtailed[gi] = c;
            r.available[gi] = a;
        }
        for (k, w) in s.water_loads.iter().enumerate() {
            let cap = self.classes.shed_fraction[k] * s.actual(&w.profile_id, d.minute as f64).max(0.0);
            r.shed[k] = d.shed[k].clamp(0.0, cap);
        }
        r.storage_energy = storage_energy;
        r
    }

    /// Simulate minutes `[prev.minute, next.minute)`; returns the realized
    /// state at `next.minute`.
    fn interval(&mut self, prev: &DispatchState, next: &DispatchState) -> Result<DispatchState, SimError> {
        let s = self.s;
        let ng = s.generators.len();
        let nst = s.storage_units.len();
        let paths: Vec<Option<[f64; MINUTES_PER_INTERVAL + 1]>> = (0..ng)
            .map(|gi| {
                (self.classes.class_of(gi) == ResourceClass::Dispatchable).then(|| {
                    let g = &s.generators[gi];
                    let ramp = if prev.on[gi] != next.on[gi] {
                        g.ramp.max(g.p_min / MINUTES_PER_INTERVAL as f64)
                    } else {
                        g.ramp
                    };
                    ramp_trajectory(prev.setpoint[gi], next.setpoint[gi], ramp)
                })
            })
            .collect();
        let mut energy = prev.storage_energy.clone();
        for k in 0..MINUTES_PER_INTERVAL {
            let minute = prev.minute + k as i64;
            let m = minute as f64;
            let day = (minute / 1440) as usize;
            let mut output = vec![0.0; ng];
            let mut curtailed = vec![0.0; ng];
            let mut available = vec![0.0; ng];
            for gi in 0..ng {
                let g = &s.generators[gi];
                match self.classes.class_of(gi) {
                    ResourceClass::Dispatchable => output[gi] = paths[gi].expect("path")[k],
                    ResourceClass::SemiDispatchable => {
                        let c = lerp(prev.curtailed[gi], next.curtailed[gi], k);
                        let (p, c, a) = self.semi_output(gi, minute, c);
                        output[gi] = p;
                        curtailed[gi] = c;
                        available[gi] = a;
                    }
                    ResourceClass::FixedInjection => {
                        let a = s.actual(g.profile_id.as_deref().expect("profile"), m);
                        output[gi] = a;
                        available[gi] = a;
                    }
                    ResourceClass::MustRun => output[gi] = g.p_max,
                }
            }

            let mut st_gen = vec![0.0; nst];
            let mut st_pump = vec![0.0; nst];
            for (j, st) in s.storage_units.iter().enumerate() {
                let mut gen = lerp(prev.storage_gen[j], next.storage_gen[j], k).max(0.0);
                let mut pump = lerp(prev.storage_pump[j], next.storage_pump[j], k).max(0.0);
                let dh = 1.0 / 60.0;
                let room = (st.energy_cap - energy[j]) / dh + gen;
                pump = pump.min((room / st.round_trip_eff).max(0.0));
                gen = gen.min((energy[j] / dh + st.round_trip_eff * pump).max(0.0));
                energy[j] = (energy[j] + dh * (st.round_trip_eff * pump - gen)).clamp(0.0, st.energy_cap);
                st_gen[j] = gen;
                st_pump[j] = pump;
            }

            let mut net = vec![0.0; self.network.num_zones()];
            let mut load_total = 0.0;
            for (z, zid) in self.network.zone_ids.iter().enumerate() {
                if let Some(id) = s.zone_loads.get(zid) {
                    let l = s.actual(id, m);
                    net[z] -= l;
                    load_total += l;
                }
            }
            let mut shed = vec![0.0; s.water_loads.len()];
            let mut shed_cap = vec![0.0; s.water_loads.len()];
            for (w, wl) in s.water_loads.iter().enumerate() {
                let demand = s.actual(&wl.profile_id, m);
                shed_cap[w] = self.classes.shed_fraction[w] * demand.max(0.0);
                shed[w] = lerp(prev.shed[w], next.shed[w], k).clamp(0.0, shed_cap[w]);
                let z = self.zone(&wl.zone);
                net[z] -= demand - shed[w];
                load_total += demand;
            }
            for (gi, g) in s.generators.iter().enumerate() {
                net[self.zone(&g.zone)] += output[gi];
            }
            for (j, st) in s.storage_units.iter().enumerate() {
                net[self.zone(&st.zone)] += st_gen[j] - st_pump[j];
            }

            let rec = settle_minute(&self.network, minute, net, s.regulation_capacity)?;
            self.stats.minute_records += 1;
            self.stats.max_balance_error = self.stats.max_balance_error.max(rec.balance_error().abs());
            self.stats.max_kcl_residual = self.stats.max_kcl_residual.max(rec.kcl_residual);
            if !rec.flow_violations.is_empty() {
                self.stats.flow_violation_minutes += 1;
            }

            let online: Vec<bool> = (0..ng)
                .map(|gi| self.timeline.at(gi, minute) || output[gi] > 1e-9)
                .collect();
            let state = ReserveState {
                online,
                output: output.clone(),
                available: available.clone(),
                shed: shed.clone(),
                shed_capacity: shed_cap,
            };
            let snap = snapshot(minute, &state, s, &self.classes, rec.regulation);
            let water = aggregate_water(minute, &output, s);
            let cost = production_cost_per_min(s, &output, &curtailed, &shed);

            let semi_avail: f64 = (0..ng)
                .filter(|&gi| self.classes.class_of(gi) == ResourceClass::SemiDispatchable)
                .map(|gi| available[gi].max(0.0))
                .sum();
            let curt_total: f64 = curtailed.iter().sum();
            let shed_total: f64 = shed.iter().sum();
            let gen_total: f64 = output.iter().sum();
            let dis: f64 = st_gen.iter().sum();
            let chg: f64 = st_pump.iter().sum();

            let ser = &mut self.series;
            ser.lfr_up.push(snap.lfr_up);
            ser.lfr_down.push(snap.lfr_down);
            ser.ramp_up.push(snap.ramp_up);
            ser.ramp_down.push(snap.ramp_down);
            ser.curtailed.push(curt_total);
            ser.semi_available.push(semi_avail);
            ser.raw_imbalance.push(rec.raw_imbalance);
            ser.regulation.push(rec.regulation);
            ser.residual.push(rec.residual);
            ser.reg_exhausted.push(rec.reg_exhausted);
            ser.withdrawal.push(water.withdrawal);
            ser.consumption.push(water.consumption);
            ser.co2.push(water.co2);
            ser.rt_cost.push(cost);

            while self.stats.ledger.len() <= day {
                let day = self.stats.ledger.len() as u32;
                self.stats.ledger.push(DayLedger { day, ..Default::default() });
            }
            let l = &mut self.stats.ledger[day];
            let h = 1.0 / 60.0;
            l.generation += gen_total * h;
            l.storage_discharge += dis * h;
            l.storage_charge += chg * h;
            l.regulation += rec.regulation * h;
            l.residual += rec.residual * h;
            l.shed += shed_total * h;
            l.load += load_total * h;

            let _ = writeln!(
                self.minute_csv,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                minute,
                num(load_total),
                num(gen_total),
                num(dis - chg),
                num(shed_total),
                num(curt_total),
                num(semi_avail),
                num(rec.raw_imbalance),
                num(rec.regulation),
                num(rec.residual),
                rec.reg_exhausted as u8,
                num(cost),
                join(output.iter().map(|&x| num(x))),
                join(rec.flows.iter().map(|&x| num(x))),
            );
            let _ = writeln!(
                self.reserves_csv,
                "{},{},{},{},{},{}",
                minute,
                num(snap.lfr_up),
                num(snap.lfr_down),
                num(snap.ramp_up),
                num(snap.ramp_down),
                num(snap.reg_available)
            );
            let thermal: Vec<usize> = (0..ng).filter(|&gi| s.generators[gi].cooling.is_some()).collect();
            let _ = writeln!(
                self.water_csv,
                "{},{},{},{}",
                minute,
                num(water.withdrawal),
                num(water.consumption),
                join(thermal.iter().flat_map(|&gi| {
                    let u = water.per_unit[gi];
                    [num(u.withdrawal), num(u.consumption)]
                }))
            );
            let _ = writeln!(
                self.emissions_csv,
                "{},{},{},{}",
                minute,
                num(water.fuel),
                num(water.co2),
                join(thermal.iter().map(|&gi| num(water.per_unit[gi].co2)))
            );
        }
        let mut outputs = next.setpoint.clone();
        for (gi, p) in paths.iter().enumerate() {
            if let Some(p) = p {
                outputs[gi] = p[MINUTES_PER_INTERVAL];
            }
        }
        Ok(self.realize(next, &outputs, energy))
    }
}

fn headers(s: &Scenario) -> BTreeMap<&'static str, String> {
    let gens = || s.generators.iter().map(|g| g.id.clone());
    let thermal = || s.generators.iter().filter(|g| g.cooling.is_some());
    let mut h = BTreeMap::new();
    h.insert("commitments.csv", "layer,decided_at,minute,generator,on,setpoint".to_string());
    let mut d = vec!["minute".to_string()];
    d.extend(gens().map(|g| format!("p_{g}")));
    d.extend(gens().map(|g| format!("curtail_{g}")));
    for pre in ["gen", "pump", "energy"] {
        d.extend(s.storage_units.iter().map(|u| format!("{pre}_{}", u.id)));
    }
    d.extend(s.water_loads.iter().map(|w| format!("shed_{}", w.id)));
    d.push("shortfall".into());
    d.push("cost_per_min".into());
    h.insert("dispatch_10min.csv", d.join(","));
    let mut m: Vec<String> = [
        "minute", "load", "generation", "storage_net", "shed", "curtailed", "semi_available", "raw_imbalance",
        "regulation", "residual", "reg_exhausted", "rt_cost",
    ]
    .iter()
    .map(|x| x.to_string())
    .collect();
    m.extend(gens().map(|g| format!("p_{g}")));
    m.extend(s.pipes.iter().map(|p| format!("flow_{}", p.id)));
    h.insert("minute.csv", m.join(","));
    h.insert("reserves.csv", "minute,lfr_up,lfr_down,ramp_up,ramp_down,reg_available".into());
    let mut w = vec!["minute".to_string(), "withdrawal".into(), "consumption".into()];
    for g in thermal() {
        w.push(format!("withdrawal_{}", g.id));
        w.push(format!("consumption_{}", g.id));
    }
    h.insert("water.csv", w.join(","));
    let mut e = vec!["minute".to_string(), "fuel".into(), "co2".into()];
    e.extend(thermal().map(|g| format!("co2_{}", g.id)));
    h.insert("emissions.csv", e.join(","));
    h
}

/// The scenario cut to the first `days` days, checked for simulation.
pub fn prepare(s: &Scenario, days: Option<u32>) -> Result<Scenario, SimError> {
    s.validate().map_err(SimError::Invalid)?;
    let mut s = s.clone();
    if s.horizon_minutes() <= 0 || s.horizon_minutes() % 1440 != 0 {
        return Err(SimError::Invalid(vec![format!(
            "horizon of {} minutes is not a whole number of days",
            s.horizon_minutes()
        )]));
    }
    if let Some(d) = days {
        if d == 0 || d > s.days() {
            return Err(SimError::Invalid(vec![format!(
                "cannot simulate {d} days of a {}-day scenario",
                s.days()
            )]));
        }
        s.end = s.start + Duration::days(d as i64);
    }
    Ok(s)
}

/// Run the full layered simulation of `s` in `mode`.
pub fn simulate(s: &Scenario, mode: Mode, cfg: &SimConfig) -> Result<SimOutput, SimError> {
    let clock = Instant::now();
    let s = prepare(s, cfg.days)?;
    let seed = cfg.seed.unwrap_or(s.seed);
    let classes = classify_resources(&s, mode);
    let network = Network::from_scenario(&s)?;
    let forecasts = ForecastSet::build(&s, &s.forecast, seed);
    let days = s.days();
    let horizon = s.horizon_minutes();
    let cold = InitialState::cold(&s, &classes);
    let hdr = headers(&s);
    let line = |name: &str| format!("{}\n", hdr[name]);
    let mut run = Run {
        s: &s,
        timeline: StatusTimeline::new(s.generators.len(), (days as usize + 1) * 96),
        classes,
        network,
        forecasts,
        cfg,
        plans: DayPlans { plans: Vec::new() },
        day_inits: Vec::new(),
        cold,
        rtuc: None,
        stats: RunStats::default(),
        series: RunSeries::default(),
        commitments: line("commitments.csv"),
        dispatch: line("dispatch_10min.csv"),
        minute_csv: line("minute.csv"),
        reserves_csv: line("reserves.csv"),
        water_csv: line("water.csv"),
        emissions_csv: line("emissions.csv"),
        lp_dumps: BTreeMap::new(),
    };

    run.day_ahead(0, 0)?;
    run.real_time(0, None)?;
    let first = run.dispatch_at(0, None)?;
    let mut realized = run.realize(&first, &first.setpoint, s.storage_units.iter().map(|u| u.initial_energy).collect());

    let mut minute = 0;
    while minute < horizon {
        let next_minute = minute + SCED_STEP;
        if next_minute < horizon && next_minute % 60 == 0 {
            if next_minute % 1440 == 720 {
                let day = (next_minute / 1440) as usize + 1;
                run.day_ahead(day, next_minute)?;
            }
            run.real_time(next_minute, Some(&realized))?;
        }
        let target = run.dispatch_at(next_minute, Some(&realized))?;
        run.stats.sced_runs += 1;
        realized = run.interval(&realized, &target)?;
        minute = next_minute;
    }
    run.stats.scuc_hours = days as usize * SCUC_HOURS;

    let mut da_cost = Vec::with_capacity(days as usize * SCUC_HOURS);
    for d in 0..days as usize {
        da_cost.extend_from_slice(&run.plans.plans[d].as_ref().expect("planned").step_cost);
    }
    run.series.da_cost = da_cost;

    let mut costs = String::from("hour,day_ahead_cost,real_time_cost\n");
    for (h, da) in run.series.da_cost.iter().enumerate() {
        let rt: f64 = run.series.rt_cost[h * 60..(h + 1) * 60].iter().sum();
        let _ = writeln!(costs, "{h},{},{}", num(*da), num(rt));
    }
    let mut balance = String::from(
        "day,generation,storage_discharge,storage_charge,regulation,residual,shed,load,error\n",
    );
    for l in &run.stats.ledger {
        let _ = writeln!(
            balance,
            "{},{},{},{},{},{},{},{},{}",
            l.day,
            num(l.generation),
            num(l.storage_discharge),
            num(l.storage_charge),
            num(l.regulation),
            num(l.residual),
            num(l.shed),
            num(l.load),
            format!("{:.9}", l.error())
        );
    }

    let mut files = BTreeMap::new();
    files.insert("commitments.csv".to_string(), run.commitments);
    files.insert("dispatch_10min.csv".to_string(), run.dispatch);
    files.insert("minute.csv".to_string(), run.minute_csv);
    files.insert("reserves.csv".to_string(), run.reserves_csv);
    files.insert("water.csv".to_string(), run.water_csv);
    files.insert("emissions.csv".to_string(), run.emissions_csv);
    files.insert("costs.csv".to_string(), costs);
    files.insert("balance.csv".to_string(), balance);
    files.insert("duration_curves.csv".to_string(), duration_csv(&run.series));
    files.insert("histograms.csv".to_string(), histogram_csv(&run.series));
    files.extend(run.lp_dumps);

    Ok(SimOutput {
        scenario_id: s.name.clone(),
        mode,
        seed,
        days,
        series: run.series,
        stats: run.stats,
        mileage: cfg.mileage,
        files,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
    })
}

fn duration_csv(series: &RunSeries) -> String {
    let curves = [
        duration_curve(&series.curtailed),
        duration_curve(&series.lfr_up),
        duration_curve(&series.lfr_down),
        duration_curve(&series.raw_imbalance),
    ];
    let mut out = String::from("fraction,curtailed,lfr_up,lfr_down,raw_imbalance\n");
    for i in 0..curves[0].len() {
        let _ = writeln!(
            out,
            "{},{}",
            num(curves[0][i].0),
            join(curves.iter().map(|c| num(c[i].1)))
        );
    }
    out
}

fn histogram_csv(series: &RunSeries) -> String {
    let mut out = String::from("metric,lower,upper,count\n");
    for (name, v) in [
        ("raw_imbalance", &series.raw_imbalance),
        ("regulation", &series.regulation),
        ("lfr_up", &series.lfr_up),
        ("lfr_down", &series.lfr_down),
    ] {
        for (lo, hi, c) in histogram(v, 40) {
            let _ = writeln!(out, "{name},{},{},{c}", num(lo), num(hi));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub scenario_id: String,
    pub mode: Mode,
    pub seed: u64,
    pub days: u32,
    pub stats: RunStats,
    pub distributions: BTreeMap<String, DistributionSummary>,
    pub curtailment: CurtailmentMetrics,
    pub regulation_exhausted_pct: f64,
    pub mileage_mode: MileageMode,
    pub regulation_mileage: f64,
    pub totals: BTreeMap<String, f64>,
}

impl SimOutput {
    pub fn run_id(&self) -> String {
        format!("{}-{}-s{}-d{}", self.scenario_id, self.mode, self.seed, self.days)
    }

    pub fn summary(&self) -> Result<RunSummary, SimError> {
        let ser = &self.series;
        let distributions = ser
            .summaries()?
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let sum = |v: &[f64]| v.iter().sum::<f64>();
        let mut totals = BTreeMap::new();
        totals.insert("water_withdrawal_m3".to_string(), sum(&ser.withdrawal));
        totals.insert("water_consumption_m3".to_string(), sum(&ser.consumption));
        totals.insert("co2_t".to_string(), sum(&ser.co2) / 1000.0);
        totals.insert("day_ahead_cost".to_string(), sum(&ser.da_cost));
        totals.insert("real_time_cost".to_string(), sum(&ser.rt_cost));
        Ok(RunSummary {
            run_id: self.run_id(),
            scenario_id: self.scenario_id.clone(),
            mode: self.mode,
            seed: self.seed,
            days: self.days,
            stats: self.stats.clone(),
            distributions,
            curtailment: curtailment_metrics(&ser.curtailed, &ser.semi_available),
            regulation_exhausted_pct: ser.exhausted_pct(),
            mileage_mode: self.mileage,
            regulation_mileage: regulation_mileage(&ser.regulation, self.mileage),
            totals,
        })
    }

    /// Write every artifact plus `summary.json` and `manifest.json` to `dir`.
    pub fn write(&self, dir: &Path) -> Result<RunArtifacts, SimError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut entries = Vec::new();
        for (name, body) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(io_err(parent))?;
            }
            fs::write(&path, body).map_err(io_err(&path))?;
            let rows = if name.ends_with(".csv") {
                body.lines().count().saturating_sub(1)
            } else {
                body.lines().count()
            };
            entries.push(ManifestEntry {
                file: name.clone(),
                rows,
            });
        }
        let summary = serde_json::to_string_pretty(&self.summary()?).expect("summary serializes");
        let path = dir.join("summary.json");
        fs::write(&path, summary + "\n").map_err(io_err(&path))?;
        entries.push(ManifestEntry {
            file: "summary.json".into(),
            rows: 1,
        });
        let artifacts = RunArtifacts {
            run_id: self.run_id(),
            scenario_id: self.scenario_id.clone(),
            mode: self.mode,
            seed: self.seed,
            days: self.days,
            dir: dir.to_path_buf(),
            files: entries,
            wall_clock_seconds: self.wall_clock_seconds,
        };
        let path = dir.join("manifest.json");
        let body = serde_json::to_string_pretty(&artifacts).expect("manifest serializes");
        fs::write(&path, body + "\n").map_err(io_err(&path))?;
        Ok(artifacts)
    }
}

#[derive(Clone, Debug)]
pub struct PairOutput {
    pub flexible: SimOutput,
    pub conventional: SimOutput,
    pub report: DeltaReport,
}

/// Both modes with the same seed and forecasts, run side by side.
pub fn run_pair(s: &Scenario, cfg: &SimConfig) -> Result<PairOutput, SimError> {
    let (flex, conv) = std::thread::scope(|scope| {
        let f = scope.spawn(|| simulate(s, Mode::Flexible, cfg));
        let c = simulate(s, Mode::Conventional, cfg);
        (f.join().expect("flexible run panicked"), c)
    });
    let (flexible, conventional) = (flex?, conv?);
    let report = compare_runs(&flexible.series, &conventional.series)?;
    Ok(PairOutput {
        flexible,
        conventional,
        report,
    })
}

impl PairOutput {
    /// Each run in its own subdirectory, the delta report beside them.
    pub fn write(&self, dir: &Path) -> Result<(RunArtifacts, RunArtifacts), SimError> {
        let f = self.flexible.write(&dir.join("flexible"))?;
        let c = self.conventional.write(&dir.join("conventional"))?;
        write_report(&self.report, dir)?;
        Ok((f, c))
    }
}

pub fn write_report(report: &DeltaReport, dir: &Path) -> Result<(), SimError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv = dir.join("delta_report.csv");
    fs::write(&csv, report.to_csv()).map_err(io_err(&csv))?;
    let txt = dir.join("delta_report.txt");
    fs::write(&txt, report.render()).map_err(io_err(&txt))?;
    Ok(())
}

fn read_columns(path: &Path, wanted: &[&str]) -> Result<Vec<Vec<f64>>, SimError> {
    let bad = |message: String| SimError::Artifact {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let idx: Vec<usize> = wanted
        .iter()
        .map(|w| {
            header
                .iter()
                .position(|h| h == *w)
                .ok_or_else(|| bad(format!("missing column {w}")))
        })
        .collect::<Result<_, _>>()?;
    let mut cols = vec![Vec::new(); wanted.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        for (c, &i) in idx.iter().enumerate() {
            let v: f64 = rec[i].parse().map_err(|_| bad(format!("bad number '{}'", &rec[i])))?;
            cols[c].push(v);
        }
    }
    Ok(cols)
}

/// Rebuild the statistics input of a run from its artifact directory.
pub fn load_series(dir: &Path) -> Result<RunSeries, SimError> {
    let mut m = read_columns(
        &dir.join("minute.csv"),
        &["curtailed", "semi_available", "raw_imbalance", "regulation", "residual", "reg_exhausted", "rt_cost"],
    )?
    .into_iter();
    let mut r = read_columns(&dir.join("reserves.csv"), &["lfr_up", "lfr_down", "ramp_up", "ramp_down"])?.into_iter();
    let mut w = read_columns(&dir.join("water.csv"), &["withdrawal", "consumption"])?.into_iter();
    let mut e = read_columns(&dir.join("emissions.csv"), &["co2"])?.into_iter();
    let mut c = read_columns(&dir.join("costs.csv"), &["day_ahead_cost"])?.into_iter();
    let next = |it: &mut std::vec::IntoIter<Vec<f64>>| it.next().expect("column");
    let curtailed = next(&mut m);
    let semi_available = next(&mut m);
    let raw_imbalance = next(&mut m);
    let regulation = next(&mut m);
    let residual = next(&mut m);
    let reg_exhausted = next(&mut m).into_iter().map(|x| x != 0.0).collect();
    let rt_cost = next(&mut m);
    Ok(RunSeries {
        lfr_up: next(&mut r),
        lfr_down: next(&mut r),
        ramp_up: next(&mut r),
        ramp_down: next(&mut r),
        curtailed,
        semi_available,
        raw_imbalance,
        regulation,
        residual,
        reg_exhausted,
        withdrawal: next(&mut w),
        consumption: next(&mut w),
        co2: next(&mut e),
        rt_cost,
        da_cost: next(&mut c),
    })
}

pub fn load_summary(dir: &Path) -> Result<RunSummary, SimError> {
    let path = dir.join("summary.json");
    let body = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&body).map_err(|e| SimError::Artifact {
        path,
        message: e.to_string(),
    })
}

/// Plain-text overview of a run's summary.
pub fn render_summary(sum: &RunSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "run {} ({} mode, seed {}, {} days)", sum.run_id, sum.mode, sum.seed, sum.days);
    let st = &sum.stats;
    let _ = writeln!(
        out,
        "layers: {} day-ahead hours, {} real-time commitments ({} relaxed), {} dispatches, {} minutes",
        st.scuc_hours,
        st.rtuc_runs,
        st.rtuc_relaxed.len(),
        st.sced_runs,
        st.minute_records
    );
    let _ = writeln!(
        out,
        "balance: max minute error {:.3e} MW, max KCL residual {:.3e}, max daily ledger error {:.3e} MWh",
        st.max_balance_error,
        st.max_kcl_residual,
        st.max_ledger_error()
    );
    let _ = writeln!(out, "{:<16} {:>12} {:>12} {:>12} {:>12} {:>12}", "series", "mean", "std", "min", "p95-exc", "max");
    for (k, d) in &sum.distributions {
        let _ = writeln!(
            out,
            "{:<16} {:>12.3} {:>12.3} {:>12.3} {:>12.3} {:>12.3}",
            k, d.mean, d.std, d.min, d.p95_exceeded, d.max
        );
    }
    let c = &sum.curtailment;
    let _ = writeln!(
        out,
        "curtailment: {:.4} GWh ({:.2}% of energy, {:.2}% of time, max {:.1} MW)",
        c.total_gwh, c.energy_pct, c.time_pct, c.max_mw
    );
    let _ = writeln!(
        out,
        "regulation: exhausted {:.2}% of minutes, mileage {:.6} ({:?})",
        sum.regulation_exhausted_pct, sum.regulation_mileage, sum.mileage_mode
    );
    for (k, v) in &sum.totals {
        let _ = writeln!(out, "{k}: {v:.3}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::canonical_fixture;
    use crate::scenario::ForecastConfig;

    fn one_day() -> SimConfig {
        SimConfig {
            days: Some(1),
            ..SimConfig::default()
        }
    }

    #[test]
    fn layer_cadence_over_one_day() {
        let out = simulate(&canonical_fixture(), Mode::Conventional, &one_day()).unwrap();
        assert_eq!(out.stats.scuc_hours, 24);
        assert_eq!(out.stats.rtuc_runs, 24);
        assert_eq!(out.stats.sced_runs, 144);
        assert_eq!(out.stats.minute_records, 1440);
        assert_eq!(out.series.da_cost.len(), 24);
        assert!(out.stats.max_ledger_error() < LEDGER_TOLERANCE_MWH);
        assert_eq!(out.files["minute.csv"].lines().count(), 1441);
        assert_eq!(out.files["costs.csv"].lines().count(), 25);
    }

    #[test]
    fn exact_forecasts_need_no_regulation() {
        let mut s = canonical_fixture();
        s.forecast = ForecastConfig::exact();
        for mode in [Mode::Flexible, Mode::Conventional] {
            let out = simulate(&s, mode, &one_day()).unwrap();
            assert!(out.series.regulation.iter().all(|r| r.abs() < 1e-6), "{mode}");
            assert!(out.series.residual.iter().all(|r| r.abs() < 1e-6), "{mode}");
            assert_eq!(out.series.exhausted_pct(), 0.0);
        }
    }

    #[test]
    fn reruns_are_identical() {
        let a = simulate(&canonical_fixture(), Mode::Flexible, &one_day()).unwrap();
        let b = simulate(&canonical_fixture(), Mode::Flexible, &one_day()).unwrap();
        assert_eq!(a.files, b.files);
    }

    #[test]
    fn artifacts_round_trip() {
        let out = simulate(&canonical_fixture(), Mode::Conventional, &one_day()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let art = out.write(dir.path()).unwrap();
        let minute = art.files.iter().find(|f| f.file == "minute.csv").unwrap();
        assert_eq!(minute.rows, 1440);
        let back = load_series(dir.path()).unwrap();
        assert_eq!(back.minutes(), out.series.minutes());
        let report = compare_runs(&back, &back).unwrap();
        assert!(report.rows.iter().all(|r| r.delta == 0.0));
        let sum = load_summary(dir.path()).unwrap();
        assert_eq!(sum.run_id, out.run_id());
    }

    #[test]
    fn no_flexible_resources_means_equal_modes() {
        let mut s = canonical_fixture();
        for g in &mut s.generators {
            if g.fuel.is_hydro() {
                g.fuel = crate::scenario::Fuel::Wind;
            }
        }
        for w in &mut s.water_loads {
            w.sheddable_fraction = 0.0;
        }
        let pair = run_pair(&s, &one_day()).unwrap();
        for r in &pair.report.rows {
            assert!(r.delta.abs() < 1e-6, "{} differs by {}", r.metric, r.delta);
        }
    }

    #[test]
    fn partial_horizons_are_rejected() {
        let mut s = canonical_fixture();
        s.end -= Duration::minutes(30);
        assert!(matches!(simulate(&s, Mode::Flexible, &SimConfig::default()), Err(SimError::Invalid(_))));
        let too_long = SimConfig {
            days: Some(30),
            ..SimConfig::default()
        };
        assert!(simulate(&canonical_fixture(), Mode::Flexible, &too_long).unwrap_err().is_validation());
    }
}
