//! Day-ahead unit commitment at hourly resolution.

use ewsim_opt::MilpOptions;
use thiserror::Error;

use crate::commitment::{
    build, solve_built, CommitError, CommitmentProgram, CommitmentSchedule, InitialState, Window,
};
use crate::forecast::{ForecastSet, LOOKAHEAD_MINUTES};
use crate::network::Network;
use crate::scenario::{Classification, Horizon, Scenario};

pub const SCUC_STEP: u32 = 60;
pub const SCUC_HOURS: usize = 24;

#[derive(Debug, Error, PartialEq)]
pub enum ScucError {
    #[error("day-ahead window {start}..{end} min runs past the forecast data ({limit} min)")]
    Horizon { start: i64, end: i64, limit: i64 },
    #[error(transparent)]
    Commit(#[from] CommitError),
}

pub struct ScucProblem<'a> {
    pub window: Window<'a>,
    pub program: CommitmentProgram,
}

/// Build the day-ahead program for `hours` hours from `start_minute`.
#[allow(clippy::too_many_arguments)]
pub fn build_scuc<'a>(
    s: &'a Scenario,
    classes: &'a Classification,
    network: &'a Network,
    forecasts: &ForecastSet,
    start_minute: i64,
    hours: usize,
    initial: InitialState,
) -> Result<ScucProblem<'a>, ScucError> {
    let end = start_minute + (hours as i64 - 1) * SCUC_STEP as i64;
    let limit = s.horizon_minutes() + LOOKAHEAD_MINUTES;
    if start_minute < 0 || end > limit {
        return Err(ScucError::Horizon {
            start: start_minute,
            end,
            limit,
        });
    }
    let day = start_minute.div_euclid(1440);
    let window = Window::from_forecasts(
        format!("scuc_day{day}"),
        s,
        classes,
        network,
        forecasts,
        Horizon::DayAhead,
        start_minute,
        SCUC_STEP,
        hours,
        initial,
    );
    let program = build(&window);
    Ok(ScucProblem { window, program })
}

pub fn solve_scuc(problem: &ScucProblem, opts: &MilpOptions) -> Result<CommitmentSchedule, ScucError> {
    Ok(solve_built(&problem.window, &problem.program, opts)?)
}
