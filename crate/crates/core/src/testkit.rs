//! Small hand-checkable scenarios for unit tests.

use std::collections::BTreeMap;

use chrono::Duration;

use crate::scenario::{
    parse_time, BaseClass, CoolingSpec, CoolingTech, ForecastConfig, Fuel, Generator, ReservePolicy,
    Scenario, TimeSeries, WaterLoad, Zone,
};

pub fn thermal(id: &str, p_min: f64, p_max: f64, marginal: f64, startup: f64) -> Generator {
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

pub fn nuclear(id: &str, p: f64) -> Generator {
    Generator {
        fuel: Fuel::Nuclear,
        base_class: BaseClass::MustRun,
        ramp: 0.0,
        cooling: Some(CoolingSpec::with_defaults(CoolingTech::OnceThrough, 0.33, 0.02)),
        emission_factor: 0.0,
        ..thermal(id, p, p, 7.0, 0.0)
    }
}

pub fn wind(id: &str, p_max: f64, price: f64) -> Generator {
    Generator {
        fuel: Fuel::Wind,
        base_class: BaseClass::Variable,
        curtail_price: price,
        profile_id: Some(format!("{id}_profile")),
        cooling: None,
        emission_factor: 0.0,
        ..thermal(id, 0.0, p_max, 0.0, 0.0)
    }
}

/// One zone `Z`, hourly profiles, a day-long horizon and exact forecasts.
/// `profiles` maps series id to hourly values; `load` is the zone load.
pub fn one_zone(gens: Vec<Generator>, load: &[f64], profiles: &[(&str, Vec<f64>)]) -> Scenario {
    let start = parse_time("2040-01-01T00:00:00").unwrap();
    let mut map = BTreeMap::new();
    let mut put = |id: &str, values: Vec<f64>| {
        map.insert(
            id.to_string(),
            TimeSeries {
                id: id.to_string(),
                start,
                step: 60,
                values,
            },
        );
    };
    put("load_Z", load.to_vec());
    for (id, v) in profiles {
        put(id, v.clone());
    }
    Scenario {
        name: "toy".into(),
        zones: vec![Zone {
            id: "Z".into(),
            name: "Zone".into(),
        }],
        pipes: vec![],
        generators: gens,
        storage_units: vec![],
        water_loads: vec![],
        profiles: map,
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
        end: start + Duration::days(1),
        forecast: ForecastConfig::exact(),
        seed: 1,
        storage_drawdown: 0.0,
        forecast_overrides: BTreeMap::new(),
    }
}

pub fn water_load(id: &str, frac: f64, price: f64) -> WaterLoad {
    WaterLoad {
        id: id.into(),
        zone: "Z".into(),
        profile_id: format!("{id}_profile"),
        sheddable_fraction: frac,
        shed_price: price,
    }
}
