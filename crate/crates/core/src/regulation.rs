//! One-minute physical layer: setpoint trajectories, regulation and flows.

use crate::network::{Network, NetworkError};

/// Minutes between dispatch points.
pub const MINUTES_PER_INTERVAL: usize = 10;

/// Per-minute path from `prev` towards `next`: the straight line, clipped so
/// no minute moves by more than `ramp`. Entry `k` is the value `k` minutes
/// after `prev`; the last entry is where the unit actually ends up.
pub fn ramp_trajectory(prev: f64, next: f64, ramp: f64) -> [f64; MINUTES_PER_INTERVAL + 1] {
    let mut out = [prev; MINUTES_PER_INTERVAL + 1];
    let n = MINUTES_PER_INTERVAL as f64;
    for k in 1..=MINUTES_PER_INTERVAL {
        let line = if k == MINUTES_PER_INTERVAL {
            next
        } else {
            prev + (next - prev) * k as f64 / n
        };
        let last = out[k - 1];
        out[k] = line.clamp(last - ramp, last + ramp);
    }
    out
}

pub fn interpolate_setpoints(prev: f64, next: f64, k: usize, ramp: f64) -> f64 {
    ramp_trajectory(prev, next, ramp)[k.min(MINUTES_PER_INTERVAL)]
}

/// Straight-line value `k` minutes into an interval, no ramp limit.
pub fn lerp(prev: f64, next: f64, k: usize) -> f64 {
    if k >= MINUTES_PER_INTERVAL {
        next
    } else {
        prev + (next - prev) * k as f64 / MINUTES_PER_INTERVAL as f64
    }
}

/// Split a raw imbalance into what regulation covers and what is left.
pub fn deploy_regulation(raw_imbalance: f64, capacity: f64) -> (f64, f64) {
    let reg = raw_imbalance.clamp(-capacity, capacity);
    (reg, raw_imbalance - reg)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinuteRecord {
    pub minute: i64,
    /// Net zonal injections including regulation and residual at the swing zone.
    pub injections: Vec<f64>,
    pub flows: Vec<f64>,
    /// Demand minus supply before regulation, MW.
    pub raw_imbalance: f64,
    pub regulation: f64,
    pub residual: f64,
    pub reg_exhausted: bool,
    pub flow_violations: Vec<(usize, f64)>,
    pub kcl_residual: f64,
}

impl MinuteRecord {
    /// Supply minus demand after regulation and residual absorption.
    pub fn balance_error(&self) -> f64 {
        self.injections.iter().sum()
    }
}

/// Settle one minute: `net` are zonal supply-minus-demand injections before
/// regulation. The swing zone picks up regulation and the residual.
pub fn settle_minute(
    network: &Network,
    minute: i64,
    mut net: Vec<f64>,
    regulation_capacity: f64,
) -> Result<MinuteRecord, NetworkError> {
    let raw: f64 = -net.iter().sum::<f64>();
    let (reg, residual) = deploy_regulation(raw, regulation_capacity);
    net[network.swing] += reg + residual;
    let flows = network.dc_power_flow(&net)?;
    let kcl_residual = network.kcl_residual(&net, &flows);
    Ok(MinuteRecord {
        minute,
        flow_violations: network.violations(&flows),
        injections: net,
        flows,
        raw_imbalance: raw,
        regulation: reg,
        residual,
        reg_exhausted: raw.abs() > regulation_capacity,
        kcl_residual,
    })
}
