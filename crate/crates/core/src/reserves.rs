//! Physical reserve quantities of a one-minute operating point.

use serde::{Deserialize, Serialize};

use crate::scenario::{Classification, ResourceClass, Scenario};

/// Reach of load-following reserve, minutes.
pub const LOAD_FOLLOWING_MINUTES: f64 = 10.0;
/// Minutes a semi-dispatchable resource needs to release its headroom.
pub const CURTAILMENT_RESPONSE_MINUTES: f64 = 5.0;

/// Operating point the reserve sums are evaluated on. Vectors are indexed
/// like the scenario's generators and water loads.
#[derive(Clone, Debug, PartialEq)]
pub struct ReserveState {
    pub online: Vec<bool>,
    pub output: Vec<f64>,
    /// Realized available injection of profile-driven units.
    pub available: Vec<f64>,
    pub shed: Vec<f64>,
    /// Largest shed each water load could take right now.
    pub shed_capacity: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReserveSnapshot {
    pub minute: i64,
    pub lfr_up: f64,
    pub lfr_down: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    pub reg_available: f64,
}

/// Upward and downward load-following reserve, MW.
pub fn load_following(state: &ReserveState, s: &Scenario, classes: &Classification) -> (f64, f64) {
    let mut up = 0.0;
    let mut down = 0.0;
    for (gi, g) in s.generators.iter().enumerate() {
        let p = state.output[gi];
        match classes.class_of(gi) {
            ResourceClass::Dispatchable if state.online[gi] => {
                let reach = LOAD_FOLLOWING_MINUTES * g.ramp;
                up += (g.p_max - p).min(reach).max(0.0);
                down += (p - g.p_min).min(reach).max(0.0);
            }
            ResourceClass::SemiDispatchable => {
                up += (state.available[gi] - p).max(0.0);
                down += p.max(0.0);
            }
            _ => {}
        }
    }
    for (k, &shed) in state.shed.iter().enumerate() {
        up += (state.shed_capacity[k] - shed).max(0.0);
        down += shed.max(0.0);
    }
    (up, down)
}

/// Upward and downward ramping capability, MW/min.
pub fn ramping(state: &ReserveState, s: &Scenario, classes: &Classification) -> (f64, f64) {
    let mut up = 0.0;
    let mut down = 0.0;
    for (gi, g) in s.generators.iter().enumerate() {
        let p = state.output[gi];
        match classes.class_of(gi) {
            ResourceClass::Dispatchable if state.online[gi] => {
                up += g.ramp.min(g.p_max - p).max(0.0);
                down += g.ramp.min(p - g.p_min).max(0.0);
            }
            ResourceClass::SemiDispatchable => {
                up += ((state.available[gi] - p) / CURTAILMENT_RESPONSE_MINUTES).max(0.0);
                down += (p / CURTAILMENT_RESPONSE_MINUTES).max(0.0);
            }
            _ => {}
        }
    }
    (up, down)
}

pub fn snapshot(
    minute: i64,
    state: &ReserveState,
    s: &Scenario,
    classes: &Classification,
    regulation: f64,
) -> ReserveSnapshot {
    let (lfr_up, lfr_down) = load_following(state, s, classes);
    let (ramp_up, ramp_down) = ramping(state, s, classes);
    ReserveSnapshot {
        minute,
        lfr_up,
        lfr_down,
        ramp_up,
        ramp_down,
        reg_available: (s.regulation_capacity - regulation.abs()).max(0.0),
    }
}

/// How regulation mileage is accumulated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MileageMode {
    /// Regulation energy, GWh: Σ|reg|·(1/60 h).
    #[default]
    Energy,
    /// Regulation movement, GW: Σ|reg(t) − reg(t−1)|.
    Movement,
}

pub fn regulation_mileage(regulation: &[f64], mode: MileageMode) -> f64 {
    match mode {
        MileageMode::Energy => regulation.iter().map(|r| r.abs()).sum::<f64>() / 60.0 / 1000.0,
        MileageMode::Movement => {
            regulation.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / 1000.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{classify_resources, Mode};
    use crate::testkit::{nuclear, one_zone, thermal, wind};

    fn setup() -> (Scenario, Classification) {
        let mut g = thermal("G1", 50.0, 200.0, 20.0, 0.0);
        g.ramp = 10.0;
        let s = one_zone(
            vec![g, wind("W1", 100.0, 12.0), nuclear("N1", 100.0)],
            &[300.0; 24],
            &[("W1_profile", vec![80.0; 24])],
        );
        let c = classify_resources(&s, Mode::Conventional);
        (s, c)
    }

    fn state(p: f64, wind_p: f64, wind_avail: f64) -> ReserveState {
        ReserveState {
            online: vec![true, true, true],
            output: vec![p, wind_p, 100.0],
            available: vec![0.0, wind_avail, 0.0],
            shed: vec![],
            shed_capacity: vec![],
        }
    }

    #[test]
    fn unit_headroom_capped_by_reach() {
        let (s, c) = setup();
        let (up, down) = load_following(&state(180.0, 0.0, 0.0), &s, &c);
        assert_eq!(up, 20.0);
        assert_eq!(down, 100.0);
    }

    #[test]
    fn curtailed_wind_counts_both_ways() {
        let (s, c) = setup();
        let (up, down) = load_following(&state(50.0, 60.0, 80.0), &s, &c);
        assert_eq!(up, 100.0 + 20.0);
        assert_eq!(down, 0.0 + 60.0);
        let (rup, _) = ramping(&state(200.0, 60.0, 80.0), &s, &c);
        assert_eq!(rup, 4.0);
    }

    #[test]
    fn saturated_fleet_has_no_upward_reserve() {
        let (s, c) = setup();
        let st = state(200.0, 80.0, 80.0);
        assert_eq!(load_following(&st, &s, &c).0, 0.0);
        assert_eq!(ramping(&st, &s, &c).0, 0.0);
    }

    #[test]
    fn ramp_rate_bounds_unit_contribution() {
        let (s, c) = setup();
        assert_eq!(ramping(&state(180.0, 0.0, 0.0), &s, &c).0, 10.0);
        assert_eq!(ramping(&state(195.0, 0.0, 0.0), &s, &c).0, 5.0);
    }

    #[test]
    fn mileage() {
        assert_eq!(regulation_mileage(&[0.0; 60], MileageMode::Energy), 0.0);
        assert!((regulation_mileage(&[30.0; 60], MileageMode::Energy) - 0.03).abs() < 1e-15);
        let alt: Vec<f64> = (0..60).map(|i| if i % 2 == 0 { 30.0 } else { -30.0 }).collect();
        assert!((regulation_mileage(&alt, MileageMode::Energy) - 0.03).abs() < 1e-15);
        assert!((regulation_mileage(&alt, MileageMode::Movement) - 59.0 * 60.0 / 1000.0).abs() < 1e-12);
    }

    #[test]
    fn snapshot_reports_spare_regulation() {
        let (s, c) = setup();
        let snap = snapshot(3, &state(180.0, 0.0, 0.0), &s, &c, -12.0);
        assert_eq!(snap.reg_available, 18.0);
        assert_eq!(snap.minute, 3);
    }
}
