//! The bundled three-zone desk-scale scenario.
//!
//! Profiles are hourly so that every 10-minute dispatch point falls on a
//! straight segment of every series. Weather is drawn from a fixed-seed
//! generator, so the fixture is identical on every call.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use chrono::Duration;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scenario::{
    parse_time, BaseClass, CoolingSpec, CoolingTech, ForecastConfig, Ar1, Fuel, Generator, Pipe,
    ReservePolicy, Scenario, StorageUnit, TimeSeries, WaterLoad, Zone,
};

const WEATHER_SEED: u64 = 0x2040_0401;
/// Days of profile data; one more than the simulated week so day-ahead
/// and look-ahead windows never run off the end.
const PROFILE_DAYS: usize = 8;
const SIM_DAYS: i64 = 7;

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

#[allow(clippy::too_many_arguments)]
fn thermal(
    id: &str,
    zone: &str,
    fuel: Fuel,
    p: (f64, f64),
    ramp: f64,
    runs: (u32, u32),
    costs: (f64, f64, f64),
    fast_start: bool,
    cooling: CoolingSpec,
) -> Generator {
    Generator {
        id: id.into(),
        zone: zone.into(),
        fuel,
        base_class: if fuel == Fuel::Nuclear {
            BaseClass::MustRun
        } else {
            BaseClass::Dispatchable
        },
        p_min: p.0,
        p_max: p.1,
        ramp,
        min_up: runs.0,
        min_down: runs.1,
        startup_cost: costs.0,
        no_load_cost: costs.1,
        marginal_cost: costs.2,
        fast_start,
        curtail_price: 0.0,
        profile_id: None,
        cooling: Some(cooling),
        emission_factor: fuel.default_emission_factor(),
    }
}

fn variable(id: &str, zone: &str, fuel: Fuel, p_max: f64, ramp: f64, price: f64) -> Generator {
    Generator {
        id: id.into(),
        zone: zone.into(),
        fuel,
        base_class: BaseClass::Variable,
        p_min: 0.0,
        p_max,
        ramp,
        min_up: 0,
        min_down: 0,
        startup_cost: 0.0,
        no_load_cost: 0.0,
        marginal_cost: 0.0,
        fast_start: false,
        curtail_price: price,
        profile_id: Some(format!("{}_profile", id.to_lowercase())),
        cooling: None,
        emission_factor: 0.0,
    }
}

/// Load shape in [0, 1] with a morning shoulder and an early-evening peak.
fn load_shape(hour: f64) -> f64 {
    let evening = (-((hour - 18.0) / 3.5).powi(2)).exp();
    let morning = 0.6 * (-((hour - 9.0) / 2.5).powi(2)).exp();
    let night = 0.5 - 0.5 * (2.0 * PI * (hour - 4.0) / 24.0).cos();
    (0.45 * night + 0.55 * evening.max(morning)).min(1.0)
}

/// The canonical fixture: 3 zones, 2 pipes, 6 generators, one pumped
/// storage plant and two water-utility loads over one week.
pub fn canonical_fixture() -> Scenario {
    let start = parse_time("2040-04-01T00:00:00").expect("fixture start");
    let hours = PROFILE_DAYS * 24;
    let mut rng = ChaCha8Rng::seed_from_u64(WEATHER_SEED);

    let mut wind = Vec::with_capacity(hours);
    let mut x: f64 = 0.55;
    for h in 0..hours {
        let hod = (h % 24) as f64;
        let target = 0.45 + 0.2 * (2.0 * PI * hod / 24.0).cos();
        let z: f64 = rng.gen_range(-1.0..1.0);
        x = (0.85 * x + 0.15 * target + 0.09 * z).clamp(0.04, 0.96);
        wind.push(round1(450.0 * x));
    }
    let clouds: Vec<f64> = (0..PROFILE_DAYS).map(|_| rng.gen_range(0.55..1.0)).collect();
    let rain: Vec<f64> = (0..PROFILE_DAYS).map(|_| rng.gen_range(0.0..25.0)).collect();
    let busy: Vec<f64> = (0..PROFILE_DAYS)
        .map(|d| if d % 7 >= 5 { 0.93 } else { 1.0 } * rng.gen_range(0.97..1.03))
        .collect();

    let mut solar = Vec::with_capacity(hours);
    let mut hydro = Vec::with_capacity(hours);
    let mut total_load = Vec::with_capacity(hours);
    let mut wl_c = Vec::with_capacity(hours);
    let mut wl_s = Vec::with_capacity(hours);
    for h in 0..hours {
        let d = h / 24;
        let hod = (h % 24) as f64;
        let sun = ((PI * (hod - 6.0) / 13.0).sin()).max(0.0);
        solar.push(round1(350.0 * sun * clouds[d]));
        hydro.push(round1(105.0 + rain[d] + 12.0 * (2.0 * PI * (hod - 3.0) / 24.0).cos()));
        total_load.push(busy[d] * (820.0 + 400.0 * load_shape(hod)));
        // Water utilities pump harder overnight and in the morning.
        let pumping = 0.85 + 0.15 * (2.0 * PI * (hod - 2.0) / 24.0).cos();
        wl_c.push(round1(80.0 * pumping));
        wl_s.push(round1(60.0 * pumping));
    }
    let share = [("N", 0.25), ("C", 0.45), ("S", 0.30)];

    let mut profiles = BTreeMap::new();
    let mut add = |id: &str, values: Vec<f64>| {
        profiles.insert(
            id.to_string(),
            TimeSeries {
                id: id.to_string(),
                start,
                step: 60,
                values,
            },
        );
    };
    add("wind1_profile", wind);
    add("solar1_profile", solar);
    add("hyd1_profile", hydro);
    add("water_C", wl_c);
    add("water_S", wl_s);
    let mut zone_loads = BTreeMap::new();
    for (z, f) in share {
        let id = format!("load_{}", z);
        add(&id, total_load.iter().map(|l| round1(l * f)).collect());
        zone_loads.insert(z.to_string(), id);
    }

    let generators = vec![
        thermal(
            "NUC1",
            "C",
            Fuel::Nuclear,
            (400.0, 400.0),
            0.0,
            (0, 0),
            (0.0, 0.0, 7.0),
            false,
            CoolingSpec::with_defaults(CoolingTech::OnceThrough, 0.33, 0.02),
        ),
        thermal(
            "CC1",
            "C",
            Fuel::Gas,
            (150.0, 620.0),
            8.0,
            (4, 4),
            (9000.0, 1800.0, 32.0),
            false,
            CoolingSpec::with_defaults(CoolingTech::WetTower, 0.50, 0.20),
        ),
        thermal(
            "PK1",
            "S",
            Fuel::Oil,
            (25.0, 200.0),
            15.0,
            (1, 1),
            (800.0, 350.0, 95.0),
            true,
            CoolingSpec::with_defaults(CoolingTech::OnceThrough, 0.38, 0.12),
        ),
        variable("WIND1", "N", Fuel::Wind, 450.0, 20.0, 12.0),
        variable("SOLAR1", "S", Fuel::Solar, 350.0, 20.0, 12.0),
        variable("HYD1", "N", Fuel::HydroRor, 160.0, 10.0, 4.5),
    ];

    Scenario {
        name: "desk3".into(),
        zones: vec![
            Zone {
                id: "N".into(),
                name: "North".into(),
            },
            Zone {
                id: "C".into(),
                name: "Central".into(),
            },
            Zone {
                id: "S".into(),
                name: "South".into(),
            },
        ],
        pipes: vec![
            Pipe {
                id: "P_NC".into(),
                from_zone: "N".into(),
                to_zone: "C".into(),
                limit: 450.0,
                reactance: 0.05,
            },
            Pipe {
                id: "P_CS".into(),
                from_zone: "C".into(),
                to_zone: "S".into(),
                limit: 700.0,
                reactance: 0.05,
            },
        ],
        generators,
        storage_units: vec![StorageUnit {
            id: "PS1".into(),
            zone: "N".into(),
            p_max_gen: 120.0,
            p_max_pump: 120.0,
            energy_cap: 900.0,
            round_trip_eff: 0.78,
            initial_energy: 450.0,
        }],
        water_loads: vec![
            WaterLoad {
                id: "WL_C".into(),
                zone: "C".into(),
                profile_id: "water_C".into(),
                sheddable_fraction: 0.5,
                shed_price: 55.0,
            },
            WaterLoad {
                id: "WL_S".into(),
                zone: "S".into(),
                profile_id: "water_S".into(),
                sheddable_fraction: 0.5,
                shed_price: 55.0,
            },
        ],
        profiles,
        zone_loads,
        swing_zone: "C".into(),
        regulation_capacity: 30.0,
        reserve_policy: ReservePolicy {
            lfr_peak_fraction: 0.04,
            lfr_vre_fraction: 0.04,
            ramp_up_mw_per_min: 0.0,
            ramp_down_mw_per_min: 0.0,
        },
        start,
        end: start + Duration::days(SIM_DAYS),
        forecast: ForecastConfig {
            day_ahead: Ar1 {
                phi: 0.9,
                sigma_pct: 5.0,
            },
            hour_ahead: Ar1 {
                phi: 0.8,
                sigma_pct: 2.0,
            },
            dispatch: Ar1 {
                phi: 0.5,
                sigma_pct: 0.5,
            },
        },
        seed: 2040,
        storage_drawdown: 0.0,
        forecast_overrides: BTreeMap::new(),
    }
}
