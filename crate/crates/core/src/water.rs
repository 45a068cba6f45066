//! Heat-balance water and CO₂ accounting for thermal units.

use serde::{Deserialize, Serialize};

use crate::scenario::{CoolingSpec, CoolingTech, Scenario};

/// kJ per MWh.
const KJ_PER_MWH: f64 = 3.6e6;
/// Specific heat of water, kJ/(kg·K).
pub const CP_WATER: f64 = 4.186;
/// Latent heat of vaporization, kJ/kg.
pub const H_FG: f64 = 2450.0;
/// kg per m³.
pub const WATER_DENSITY: f64 = 1000.0;

/// Heat the cooling system must reject for `e` MWh of electricity, MWh_th.
pub fn heat_to_cooling(e: f64, spec: &CoolingSpec) -> f64 {
    e * (1.0 - spec.efficiency - spec.k_os) / spec.efficiency
}

/// (withdrawal, consumption) in m³ for `h` MWh_th rejected once-through.
pub fn once_through(h: f64, spec: &CoolingSpec) -> (f64, f64) {
    let withdrawal = KJ_PER_MWH * h / (CP_WATER * spec.delta_t) / WATER_DENSITY;
    (withdrawal, spec.k_ot_evap * withdrawal)
}

/// (withdrawal, consumption) in m³ for `h` MWh_th rejected by a wet tower.
pub fn wet_tower(h: f64, spec: &CoolingSpec) -> (f64, f64) {
    let consumption = KJ_PER_MWH * h * spec.k_latent / H_FG / WATER_DENSITY;
    (consumption * spec.n_cc / (spec.n_cc - 1.0), consumption)
}

/// (withdrawal, consumption) in m³ for `e` MWh of electricity.
pub fn cooling_water(e: f64, spec: &CoolingSpec) -> (f64, f64) {
    let h = heat_to_cooling(e, spec);
    match spec.technology {
        CoolingTech::OnceThrough => once_through(h, spec),
        CoolingTech::WetTower => wet_tower(h, spec),
        CoolingTech::Dry => (0.0, 0.0),
    }
}

/// (fuel heat MWh_th, CO₂ kg) for `e` MWh of electricity.
pub fn emissions_and_fuel(e: f64, efficiency: f64, emission_factor: f64) -> (f64, f64) {
    let fuel = e / efficiency;
    (fuel, fuel * emission_factor)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UnitWater {
    pub withdrawal: f64,
    pub consumption: f64,
    pub fuel: f64,
    pub co2: f64,
}

/// System totals for one minute: m³/min, MWh_th/min and kg/min.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WaterRecord {
    pub minute: i64,
    pub withdrawal: f64,
    pub consumption: f64,
    pub fuel: f64,
    pub co2: f64,
    /// Indexed like the scenario's generators; zero for non-thermal units.
    pub per_unit: Vec<UnitWater>,
}

/// Water, fuel and CO₂ for one minute of unit outputs in MW.
pub fn aggregate_water(minute: i64, output: &[f64], s: &Scenario) -> WaterRecord {
    let mut rec = WaterRecord {
        minute,
        ..Default::default()
    };
    for (g, &p) in s.generators.iter().zip(output) {
        let mut u = UnitWater::default();
        if let Some(spec) = &g.cooling {
            let e = p.max(0.0) / 60.0;
            let (w, c) = cooling_water(e, spec);
            let (fuel, co2) = emissions_and_fuel(e, spec.efficiency, g.emission_factor);
            u = UnitWater {
                withdrawal: w,
                consumption: c,
                fuel,
                co2,
            };
        }
        rec.withdrawal += u.withdrawal;
        rec.consumption += u.consumption;
        rec.fuel += u.fuel;
        rec.co2 += u.co2;
        rec.per_unit.push(u);
    }
    rec
}
