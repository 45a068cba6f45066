//! Forecast synthesis and net load.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDateTime};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::scenario::{Ar1, ForecastConfig, Fuel, Horizon, Scenario, TimeSeries};

/// Transmission losses in the net-load identity; the zonal model is lossless.
pub const LOSSES_MW: f64 = 0.0;

/// Extra coverage past the horizon end so look-ahead windows stay inside data.
pub const LOOKAHEAD_MINUTES: i64 = 1440;

#[derive(Debug, Error, PartialEq)]
pub enum ForecastError {
    #[error("profile {id} does not cover {from} .. {to}")]
    CoverageGap {
        id: String,
        from: NaiveDateTime,
        to: NaiveDateTime,
    },
    #[error("resolution must be positive")]
    BadResolution,
}

/// Multiply `actual` by `1 + e(t)` with `e` a stationary AR(1) process and
/// clamp to `bounds`.
pub fn synthesize_with<R: Rng>(
    actual: &TimeSeries,
    model: Ar1,
    bounds: (f64, f64),
    rng: &mut R,
) -> TimeSeries {
    let sigma = model.sigma_pct / 100.0;
    let innov = sigma * (1.0 - model.phi * model.phi).max(0.0).sqrt();
    let mut e = 0.0;
    let values = actual
        .values
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let z: f64 = rng.sample(StandardNormal);
            e = if k == 0 { sigma * z } else { model.phi * e + innov * z };
            (a * (1.0 + e)).clamp(bounds.0, bounds.1)
        })
        .collect();
    TimeSeries {
        id: actual.id.clone(),
        start: actual.start,
        step: actual.step,
        values,
    }
}

pub fn synthesize_forecast(actual: &TimeSeries, model: Ar1, bounds: (f64, f64), seed: u64) -> TimeSeries {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    synthesize_with(actual, model, bounds, &mut rng)
}

/// Every profile that is forecast, with its clamp range.
pub fn forecast_series(s: &Scenario) -> BTreeMap<String, (f64, f64)> {
    let mut out: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for id in s.zone_loads.values() {
        out.insert(id.clone(), (0.0, f64::INFINITY));
    }
    for w in &s.water_loads {
        out.insert(w.profile_id.clone(), (0.0, f64::INFINITY));
    }
    for g in &s.generators {
        if let Some(p) = &g.profile_id {
            let lo = if g.fuel == Fuel::Tieline { -g.p_max } else { 0.0 };
            let e = out.entry(p.clone()).or_insert((lo, g.p_max));
            e.0 = e.0.min(lo);
            e.1 = if e.1.is_finite() { e.1.max(g.p_max) } else { g.p_max };
        }
    }
    out
}

/// Forecasts for the three decision horizons, each on its own grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastSet {
    origin: NaiveDateTime,
    series: BTreeMap<(Horizon, String), TimeSeries>,
}

impl ForecastSet {
    /// Draw all forecasts from one RNG stream: horizons in fixed order,
    /// series in id order. Explicit scenario forecasts take precedence.
    pub fn build(s: &Scenario, config: &ForecastConfig, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let targets = forecast_series(s);
        let mut series = BTreeMap::new();
        for h in Horizon::ALL {
            let step = h.step();
            let count = ((s.horizon_minutes() + LOOKAHEAD_MINUTES) / step as i64) as usize + 1;
            for (id, bounds) in &targets {
                let actual = match s.profiles.get(id) {
                    Some(p) => p.resample(id, s.start, step, count),
                    None => continue,
                };
                let f = synthesize_with(&actual, config.model(*h), *bounds, &mut rng);
                let key = (*h, id.clone());
                let chosen = match s.forecast_overrides.get(&key) {
                    Some(o) => o.clone(),
                    None => f,
                };
                series.insert(key, chosen);
            }
        }
        ForecastSet {
            origin: s.start,
            series,
        }
    }

    /// Value of series `id` as forecast for horizon `h`, `minute` after the
    /// scenario start. Unknown series read as zero.
    pub fn value(&self, h: Horizon, id: &str, minute: f64) -> f64 {
        self.series
            .get(&(h, id.to_string()))
            .map_or(0.0, |ts| ts.sample(self.origin, minute))
    }

    pub fn get(&self, h: Horizon, id: &str) -> Option<&TimeSeries> {
        self.series.get(&(h, id.to_string()))
    }
}

/// System load plus water-utility demand minus every uncurtailed variable
/// injection, sampled every `resolution` minutes over `[t0, t1]` (minutes
/// after the scenario start).
pub fn net_load(s: &Scenario, t0: i64, t1: i64, resolution: u32) -> Result<TimeSeries, ForecastError> {
    if resolution == 0 {
        return Err(ForecastError::BadResolution);
    }
    let from = s.time_of(t0);
    let to = s.time_of(t1);
    let mut loads: Vec<&str> = s.zone_loads.values().map(String::as_str).collect();
    loads.extend(s.water_loads.iter().map(|w| w.profile_id.as_str()));
    let injections: Vec<&str> = s
        .generators
        .iter()
        .filter(|g| {
            matches!(
                g.fuel,
                Fuel::Wind | Fuel::Solar | Fuel::Tieline | Fuel::HydroRor | Fuel::HydroPond
            )
        })
        .filter_map(|g| g.profile_id.as_deref())
        .collect();
    for id in loads.iter().chain(&injections) {
        match s.profiles.get(*id) {
            Some(p) if p.covers(from, to) => {}
            _ => {
                return Err(ForecastError::CoverageGap {
                    id: id.to_string(),
                    from,
                    to,
                })
            }
        }
    }
    let count = ((t1 - t0) / resolution as i64) as usize + 1;
    let values = (0..count)
        .map(|k| {
            let m = (t0 + k as i64 * resolution as i64) as f64;
            let demand: f64 = loads.iter().map(|id| s.actual(id, m)).sum();
            let vre: f64 = injections.iter().map(|id| s.actual(id, m)).sum();
            demand - vre - LOSSES_MW
        })
        .collect();
    Ok(TimeSeries {
        id: "net_load".into(),
        start: from,
        step: resolution,
        values,
    })
}

pub fn minutes_between(a: NaiveDateTime, b: NaiveDateTime) -> i64 {
    (b - a).num_minutes()
}

pub fn shift(t: NaiveDateTime, minutes: i64) -> NaiveDateTime {
    t + Duration::minutes(minutes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::canonical_fixture;
    use crate::scenario::{parse_time, BaseClass, Generator, Zone};

    fn flat(id: &str, v: f64) -> TimeSeries {
        TimeSeries {
            id: id.into(),
            start: parse_time("2040-01-01T00:00:00").unwrap(),
            step: 60,
            values: vec![v; 25],
        }
    }

    fn vre(id: &str, fuel: Fuel) -> Generator {
        Generator {
            id: id.into(),
            zone: "A".into(),
            fuel,
            base_class: BaseClass::Variable,
            p_min: 0.0,
            p_max: 500.0,
            ramp: 10.0,
            min_up: 0,
            min_down: 0,
            startup_cost: 0.0,
            no_load_cost: 0.0,
            marginal_cost: 0.0,
            fast_start: false,
            curtail_price: 4.5,
            profile_id: Some(format!("{}_p", id)),
            cooling: None,
            emission_factor: 0.0,
        }
    }

    fn one_zone(load: f64, wind: f64, tie: f64, ror: f64) -> Scenario {
        let mut s = canonical_fixture();
        s.zones = vec![Zone {
            id: "A".into(),
            name: "A".into(),
        }];
        s.pipes.clear();
        s.storage_units.clear();
        s.water_loads.clear();
        s.swing_zone = "A".into();
        s.start = parse_time("2040-01-01T00:00:00").unwrap();
        s.end = s.start + Duration::days(1);
        s.generators = vec![
            vre("W", Fuel::Wind),
            vre("T", Fuel::Tieline),
            vre("R", Fuel::HydroRor),
        ];
        s.profiles = BTreeMap::new();
        for (id, v) in [("load_A", load), ("W_p", wind), ("T_p", tie), ("R_p", ror)] {
            s.profiles.insert(id.into(), flat(id, v));
        }
        s.zone_loads = [("A".to_string(), "load_A".to_string())].into();
        s
    }

    #[test]
    fn net_load_subtracts_variable_injections() {
        let s = one_zone(1000.0, 200.0, 100.0, 50.0);
        let nl = net_load(&s, 0, 60, 15).unwrap();
        assert_eq!(nl.values, vec![650.0; 5]);
    }

    #[test]
    fn net_load_without_variables_is_load() {
        let s = one_zone(1000.0, 0.0, 0.0, 0.0);
        assert!(net_load(&s, 0, 120, 60).unwrap().values.iter().all(|&v| v == 1000.0));
    }

    #[test]
    fn wind_equal_to_load_nets_to_zero() {
        let s = one_zone(300.0, 300.0, 0.0, 0.0);
        assert!(net_load(&s, 0, 120, 60).unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn net_load_reports_coverage_gap() {
        let s = one_zone(300.0, 300.0, 0.0, 0.0);
        assert!(matches!(
            net_load(&s, 0, 3000, 60),
            Err(ForecastError::CoverageGap { .. })
        ));
    }

    #[test]
    fn zero_sigma_reproduces_actual() {
        let a = flat("x", 123.0);
        let f = synthesize_forecast(&a, Ar1 { phi: 0.7, sigma_pct: 0.0 }, (0.0, 500.0), 9);
        assert_eq!(f, a);
    }

    #[test]
    fn same_seed_same_series() {
        let a = flat("x", 100.0);
        let m = Ar1 { phi: 0.8, sigma_pct: 10.0 };
        let f1 = synthesize_forecast(&a, m, (0.0, 1e9), 5);
        let f2 = synthesize_forecast(&a, m, (0.0, 1e9), 5);
        assert_eq!(f1, f2);
        assert_ne!(f1, synthesize_forecast(&a, m, (0.0, 1e9), 6));
    }

    #[test]
    fn ar1_spread_matches_sigma() {
        let mut a = flat("x", 100.0);
        a.values = vec![100.0; 10_000];
        let f = synthesize_forecast(&a, Ar1 { phi: 0.8, sigma_pct: 10.0 }, (0.0, 1e9), 1);
        let n = f.values.len() as f64;
        let mean = f.values.iter().sum::<f64>() / n;
        let std = (f.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(std >= 0.05 * mean && std <= 0.20 * mean, "std {std} mean {mean}");
    }

    #[test]
    fn forecasts_respect_caps() {
        let s = canonical_fixture();
        let mut cfg = s.forecast.clone();
        cfg.day_ahead.sigma_pct = 60.0;
        let fs = ForecastSet::build(&s, &cfg, 3);
        let wind = fs.get(Horizon::DayAhead, "wind1_profile").unwrap();
        assert!(wind.values.iter().all(|&v| (0.0..=450.0).contains(&v)));
    }

    #[test]
    fn exact_config_gives_actuals_on_grid() {
        let s = canonical_fixture();
        let fs = ForecastSet::build(&s, &ForecastConfig::exact(), 11);
        for id in ["load_N", "wind1_profile", "water_C"] {
            for m in [0.0, 10.0, 60.0, 620.0, 5000.0] {
                assert_eq!(fs.value(Horizon::Dispatch, id, m), s.actual(id, m));
            }
            for m in [0.0, 15.0, 60.0, 615.0] {
                assert_eq!(fs.value(Horizon::HourAhead, id, m), s.actual(id, m));
            }
            let mid = fs.value(Horizon::Dispatch, id, 615.0);
            assert!((mid - s.actual(id, 615.0)).abs() < 1e-9);
        }
    }

    proptest::proptest! {
        #[test]
        fn net_load_is_linear_in_variable_profiles(load in 0.0f64..2000.0, w in 0.0f64..400.0, t in -100.0f64..100.0, r in 0.0f64..200.0) {
            let a = net_load(&one_zone(load, w, t, r), 0, 60, 60).unwrap();
            let b = net_load(&one_zone(load, 2.0 * w, 2.0 * t, 2.0 * r), 0, 60, 60).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                proptest::prop_assert!(((load - x) * 2.0 - (load - y)).abs() < 1e-9);
            }
        }
    }
}
