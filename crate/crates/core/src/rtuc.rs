//! Hourly re-commitment of fast-start units over a four-hour look-ahead.

use ewsim_opt::MilpOptions;

use crate::commitment::{solve_window, Commit, CommitError, CommitmentSchedule, InitialState, Window};
use crate::forecast::ForecastSet;
use crate::network::Network;
use crate::scenario::{Classification, Horizon, ResourceClass, Scenario};

pub const RTUC_STEP: u32 = 15;
pub const RTUC_STEPS: usize = 16;
/// Steps of each solution that are acted on; the rest is look-ahead.
pub const RTUC_COMMITTED: usize = 4;

/// On/off status of every generator on a 15-minute grid. Later writes
/// replace earlier ones; reads past the end hold the last value.
#[derive(Clone, Debug, PartialEq)]
pub struct StatusTimeline {
    on: Vec<Vec<bool>>,
}

impl StatusTimeline {
    pub fn new(generators: usize, quarters: usize) -> Self {
        StatusTimeline {
            on: vec![vec![false; quarters.max(1)]; generators],
        }
    }

    pub fn quarters(&self) -> usize {
        self.on.first().map_or(0, Vec::len)
    }

    fn index(&self, minute: i64) -> usize {
        (minute.div_euclid(RTUC_STEP as i64).max(0) as usize).min(self.quarters() - 1)
    }

    pub fn at(&self, gen: usize, minute: i64) -> bool {
        self.on[gen][self.index(minute)]
    }

    /// Record statuses held for `step` minutes each from `start_minute`.
    pub fn write(&mut self, gen: usize, start_minute: i64, step: u32, statuses: &[bool]) {
        let per = (step / RTUC_STEP).max(1) as usize;
        let first = start_minute.div_euclid(RTUC_STEP as i64);
        for (k, &b) in statuses.iter().enumerate() {
            for j in 0..per {
                let q = first + (k * per + j) as i64;
                if q >= 0 && (q as usize) < self.quarters() {
                    self.on[gen][q as usize] = b;
                }
            }
        }
    }

    /// Minutes the unit has held its status at the quarter before `minute`,
    /// counted back to the start of the grid.
    pub fn minutes_in_state_before(&self, gen: usize, minute: i64, before_grid: i64) -> (bool, i64) {
        let q = minute.div_euclid(RTUC_STEP as i64);
        if q <= 0 {
            return (self.on[gen][0], before_grid);
        }
        let last = (q - 1) as usize;
        let last = last.min(self.quarters() - 1);
        let state = self.on[gen][last];
        let run = self.on[gen][..=last].iter().rev().take_while(|&&x| x == state).count();
        let mut minutes = run as i64 * RTUC_STEP as i64;
        if run == last + 1 {
            minutes = minutes.saturating_add(before_grid);
        }
        (state, minutes)
    }
}

#[derive(Clone, Debug)]
pub struct RtucOutcome {
    pub schedule: CommitmentSchedule,
    /// The strict program was infeasible and slacks were priced in.
    pub relaxed: bool,
}

pub struct RtucInputs<'a> {
    pub s: &'a Scenario,
    pub classes: &'a Classification,
    pub network: &'a Network,
    pub forecasts: &'a ForecastSet,
    /// Hour boundary, minutes after the scenario start.
    pub start_minute: i64,
    pub timeline: &'a StatusTimeline,
    pub current: InitialState,
    pub storage_target: Vec<f64>,
}

/// Non-fast units follow the timeline; fast units are free except at step
/// 0, which is already in force.
pub fn rtuc_window<'a>(inp: &RtucInputs<'a>) -> Window<'a> {
    let mut w = Window::from_forecasts(
        format!("rtuc_{}", inp.start_minute),
        inp.s,
        inp.classes,
        inp.network,
        inp.forecasts,
        Horizon::HourAhead,
        inp.start_minute,
        RTUC_STEP,
        RTUC_STEPS,
        inp.current.clone(),
    );
    for (gi, g) in inp.s.generators.iter().enumerate() {
        if inp.classes.class_of(gi) != ResourceClass::Dispatchable {
            continue;
        }
        w.commit[gi] = (0..RTUC_STEPS)
            .map(|t| {
                let m = inp.start_minute + (t as u32 * RTUC_STEP) as i64;
                if g.fast_start && t > 0 {
                    Commit::Free
                } else {
                    Commit::Forced(inp.timeline.at(gi, m))
                }
            })
            .collect();
    }
    w.storage_target = inp.storage_target.clone();
    w
}

pub fn run_rtuc(inp: &RtucInputs, opts: &MilpOptions) -> Result<RtucOutcome, CommitError> {
    let mut w = rtuc_window(inp);
    match solve_window(&w, opts) {
        Ok(schedule) => Ok(RtucOutcome {
            schedule,
            relaxed: false,
        }),
        Err(CommitError::Infeasible { .. }) => {
            w.relaxed = true;
            let schedule = solve_window(&w, opts)?;
            Ok(RtucOutcome {
                schedule,
                relaxed: true,
            })
        }
        Err(e) => Err(e),
    }
}
