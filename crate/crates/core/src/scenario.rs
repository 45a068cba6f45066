//! Static description of a power system and its time series.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

pub const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Clone, Debug, PartialEq)]
pub struct Zone {
    pub id: String,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pipe {
    pub id: String,
    pub from_zone: String,
    pub to_zone: String,
    /// Interface limit, MW.
    pub limit: f64,
    /// Per-unit reactance.
    pub reactance: f64,
}

macro_rules! string_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s.trim() {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!("unknown {} '{}'", stringify!($name), other)),
                }
            }
        }
    };
}

string_enum!(Fuel {
    Nuclear => "nuclear",
    Gas => "gas",
    Coal => "coal",
    Oil => "oil",
    Biomass => "biomass",
    Wind => "wind",
    Solar => "solar",
    HydroRor => "hydro_ror",
    HydroPond => "hydro_pond",
    PumpedStorage => "pumped_storage",
    Tieline => "tieline",
});

string_enum!(BaseClass {
    Dispatchable => "dispatchable",
    MustRun => "must_run",
    Variable => "variable",
});

string_enum!(CoolingTech {
    OnceThrough => "once_through",
    WetTower => "wet_tower",
    Dry => "dry",
});

string_enum!(Mode {
    Conventional => "conventional",
    Flexible => "flexible",
});

impl Fuel {
    /// Fuels burned (or fissioned) in a steam cycle that needs cooling.
    pub fn is_thermal(self) -> bool {
        matches!(self, Fuel::Nuclear | Fuel::Gas | Fuel::Coal | Fuel::Oil | Fuel::Biomass)
    }

    pub fn is_hydro(self) -> bool {
        matches!(self, Fuel::HydroRor | Fuel::HydroPond)
    }

    /// Default CO₂ factor, kg per MWh of fuel heat.
    pub fn default_emission_factor(self) -> f64 {
        match self {
            Fuel::Gas => 181.0,
            Fuel::Coal => 340.0,
            Fuel::Oil => 264.0,
            _ => 0.0,
        }
    }

    /// Default (efficiency, non-cooling loss fraction) where one is shipped.
    pub fn default_heat_balance(self) -> Option<(f64, f64)> {
        match self {
            Fuel::Gas => Some((0.50, 0.20)),
            Fuel::Coal | Fuel::Oil => Some((0.38, 0.12)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoolingSpec {
    pub technology: CoolingTech,
    pub efficiency: f64,
    pub k_os: f64,
    /// Condenser temperature rise, K (once-through).
    pub delta_t: f64,
    /// Share of rejected heat leaving as latent heat (wet tower).
    pub k_latent: f64,
    /// Cycles of concentration (wet tower).
    pub n_cc: f64,
    /// Downstream evaporation as a share of once-through withdrawal.
    pub k_ot_evap: f64,
}

pub const DEFAULT_DELTA_T: f64 = 10.0;
pub const DEFAULT_K_LATENT: f64 = 0.9;
pub const DEFAULT_N_CC: f64 = 5.0;
pub const DEFAULT_K_OT_EVAP: f64 = 0.01;

impl CoolingSpec {
    pub fn with_defaults(technology: CoolingTech, efficiency: f64, k_os: f64) -> Self {
        CoolingSpec {
            technology,
            efficiency,
            k_os,
            delta_t: DEFAULT_DELTA_T,
            k_latent: DEFAULT_K_LATENT,
            n_cc: DEFAULT_N_CC,
            k_ot_evap: DEFAULT_K_OT_EVAP,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        let ok = |c: bool, msg: &str| if c { Ok(()) } else { Err(msg.to_string()) };
        ok(self.efficiency > 0.0 && self.efficiency < 1.0, "efficiency must lie in (0, 1)")?;
        ok(self.k_os >= 0.0, "k_os must be non-negative")?;
        ok(self.efficiency + self.k_os < 1.0, "efficiency + k_os must be below 1")?;
        ok(self.delta_t > 0.0, "delta_t must be positive")?;
        ok((0.0..=1.0).contains(&self.k_latent), "k_latent must lie in [0, 1]")?;
        ok(self.n_cc > 1.0, "n_cc must exceed 1")?;
        ok((0.0..=1.0).contains(&self.k_ot_evap), "k_ot_evap must lie in [0, 1]")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub id: String,
    pub zone: String,
    pub fuel: Fuel,
    pub base_class: BaseClass,
    pub p_min: f64,
    pub p_max: f64,
    /// MW/min.
    pub ramp: f64,
    /// Hours.
    pub min_up: u32,
    pub min_down: u32,
    pub startup_cost: f64,
    /// $/h while online.
    pub no_load_cost: f64,
    /// $/MWh.
    pub marginal_cost: f64,
    pub fast_start: bool,
    /// $/MWh of curtailed energy.
    pub curtail_price: f64,
    pub profile_id: Option<String>,
    pub cooling: Option<CoolingSpec>,
    /// kg CO₂ per MWh of fuel heat.
    pub emission_factor: f64,
}

impl Generator {
    pub fn is_variable(&self) -> bool {
        self.base_class == BaseClass::Variable
            || matches!(
                self.fuel,
                Fuel::Wind | Fuel::Solar | Fuel::Tieline | Fuel::HydroRor | Fuel::HydroPond
            )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StorageUnit {
    pub id: String,
    pub zone: String,
    pub p_max_gen: f64,
    pub p_max_pump: f64,
    pub energy_cap: f64,
    pub round_trip_eff: f64,
    pub initial_energy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaterLoad {
    pub id: String,
    pub zone: String,
    pub profile_id: String,
    pub sheddable_fraction: f64,
    pub shed_price: f64,
}

/// Instantaneous samples on a regular grid, linearly interpolated between
/// samples and held flat after the last one (up to `len × step`).
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub id: String,
    pub start: NaiveDateTime,
    /// Minutes between samples.
    pub step: u32,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn end(&self) -> NaiveDateTime {
        self.start + Duration::minutes(self.step as i64 * self.values.len() as i64)
    }

    pub fn covers(&self, from: NaiveDateTime, to: NaiveDateTime) -> bool {
        !self.values.is_empty() && self.start <= from && self.end() >= to
    }

    /// Value `minutes` after the series start.
    pub fn value_at(&self, minutes: f64) -> f64 {
        let n = self.values.len();
        if n == 0 {
            return 0.0;
        }
        if minutes <= 0.0 {
            return self.values[0];
        }
        let pos = minutes / self.step as f64;
        let i = pos.floor() as usize;
        if i + 1 >= n {
            return self.values[n - 1];
        }
        let w = pos - i as f64;
        if w == 0.0 {
            return self.values[i];
        }
        self.values[i] + (self.values[i + 1] - self.values[i]) * w
    }

    /// Value at `minute` measured from `origin`.
    pub fn sample(&self, origin: NaiveDateTime, minute: f64) -> f64 {
        let shift = (origin - self.start).num_minutes() as f64;
        self.value_at(minute + shift)
    }

    /// Resample onto a new grid of `count` points starting at `start`.
    pub fn resample(&self, id: &str, start: NaiveDateTime, step: u32, count: usize) -> TimeSeries {
        let values = (0..count)
            .map(|k| self.sample(start, (k as u32 * step) as f64))
            .collect();
        TimeSeries {
            id: id.to_string(),
            start,
            step,
            values,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReservePolicy {
    /// Load-following requirement as a share of the day's peak load.
    pub lfr_peak_fraction: f64,
    /// Additional share of installed wind, solar and tie-line capacity.
    pub lfr_vre_fraction: f64,
    #[serde(default)]
    pub ramp_up_mw_per_min: f64,
    #[serde(default)]
    pub ramp_down_mw_per_min: f64,
}

impl Default for ReservePolicy {
    fn default() -> Self {
        ReservePolicy {
            lfr_peak_fraction: 0.02,
            lfr_vre_fraction: 0.05,
            ramp_up_mw_per_min: 0.0,
            ramp_down_mw_per_min: 0.0,
        }
    }
}

impl ReservePolicy {
    pub fn requirement(&self, peak_load: f64, vre_capacity: f64) -> f64 {
        self.lfr_peak_fraction * peak_load + self.lfr_vre_fraction * vre_capacity
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ar1 {
    pub phi: f64,
    /// Standard deviation of the multiplicative error, percent.
    pub sigma_pct: f64,
}

impl Ar1 {
    pub const EXACT: Ar1 = Ar1 {
        phi: 0.0,
        sigma_pct: 0.0,
    };
}

string_enum!(Horizon {
    DayAhead => "day_ahead",
    HourAhead => "hour_ahead",
    Dispatch => "dispatch",
});

impl Horizon {
    /// Grid spacing of forecasts issued for this horizon, minutes.
    pub fn step(self) -> u32 {
        match self {
            Horizon::DayAhead => 60,
            Horizon::HourAhead => 15,
            Horizon::Dispatch => 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastConfig {
    pub day_ahead: Ar1,
    pub hour_ahead: Ar1,
    pub dispatch: Ar1,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
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
                sigma_pct: 1.0,
            },
        }
    }
}

impl ForecastConfig {
    pub fn exact() -> Self {
        ForecastConfig {
            day_ahead: Ar1::EXACT,
            hour_ahead: Ar1::EXACT,
            dispatch: Ar1::EXACT,
        }
    }

    pub fn model(&self, h: Horizon) -> Ar1 {
        match h {
            Horizon::DayAhead => self.day_ahead,
            Horizon::HourAhead => self.hour_ahead,
            Horizon::Dispatch => self.dispatch,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub zones: Vec<Zone>,
    pub pipes: Vec<Pipe>,
    pub generators: Vec<Generator>,
    pub storage_units: Vec<StorageUnit>,
    pub water_loads: Vec<WaterLoad>,
    pub profiles: BTreeMap<String, TimeSeries>,
    /// Zone id → load profile id.
    pub zone_loads: BTreeMap<String, String>,
    pub swing_zone: String,
    /// Symmetric regulation capacity, MW.
    pub regulation_capacity: f64,
    pub reserve_policy: ReservePolicy,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    pub forecast: ForecastConfig,
    pub seed: u64,
    /// Allowed fall in stored energy over a commitment day, MWh per unit.
    pub storage_drawdown: f64,
    /// Explicit forecasts that replace synthesized ones.
    pub forecast_overrides: BTreeMap<(Horizon, String), TimeSeries>,
}

impl Scenario {
    pub fn horizon_minutes(&self) -> i64 {
        (self.end - self.start).num_minutes()
    }

    pub fn days(&self) -> u32 {
        (self.horizon_minutes() / 1440) as u32
    }

    pub fn zone_index(&self, id: &str) -> Option<usize> {
        self.zones.iter().position(|z| z.id == id)
    }

    pub fn generator(&self, id: &str) -> Option<&Generator> {
        self.generators.iter().find(|g| g.id == id)
    }

    /// Actual value of a profile `minute` minutes after the scenario start.
    pub fn actual(&self, profile_id: &str, minute: f64) -> f64 {
        self.profiles
            .get(profile_id)
            .map_or(0.0, |p| p.sample(self.start, minute))
    }

    /// Installed wind, solar and tie-line capacity.
    pub fn vre_capacity(&self) -> f64 {
        self.generators
            .iter()
            .filter(|g| matches!(g.fuel, Fuel::Wind | Fuel::Solar | Fuel::Tieline))
            .map(|g| g.p_max)
            .sum()
    }

    pub fn time_of(&self, minute: i64) -> NaiveDateTime {
        self.start + Duration::minutes(minute)
    }

    /// Check every structural invariant; returns one message per problem.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();
        let mut push = |m: String| errs.push(m);

        if self.zones.is_empty() {
            push("scenario has no zones".into());
        }
        dupes(self.zones.iter().map(|z| z.id.as_str()), "zone", &mut push);
        dupes(self.pipes.iter().map(|p| p.id.as_str()), "pipe", &mut push);
        dupes(self.generators.iter().map(|g| g.id.as_str()), "generator", &mut push);
        dupes(self.storage_units.iter().map(|s| s.id.as_str()), "storage unit", &mut push);
        dupes(self.water_loads.iter().map(|w| w.id.as_str()), "water load", &mut push);

        let zone_ok = |z: &str| self.zones.iter().any(|x| x.id == z);
        for p in &self.pipes {
            if p.from_zone == p.to_zone {
                push(format!("pipe {} connects zone {} to itself", p.id, p.from_zone));
            }
            for z in [&p.from_zone, &p.to_zone] {
                if !zone_ok(z) {
                    push(format!("pipe {} references unknown zone {}", p.id, z));
                }
            }
            if !(p.limit > 0.0) {
                push(format!("pipe {} limit must be positive", p.id));
            }
            if !(p.reactance > 0.0) {
                push(format!("pipe {} reactance must be positive", p.id));
            }
        }
        for g in &self.generators {
            if let Err(m) = check_generator(g, |z| zone_ok(z), |p| self.profiles.contains_key(p)) {
                push(format!("generator {}: {}", g.id, m));
            }
        }
        for s in &self.storage_units {
            if !zone_ok(&s.zone) {
                push(format!("storage {} references unknown zone {}", s.id, s.zone));
            }
            if !(s.p_max_gen >= 0.0 && s.p_max_pump >= 0.0 && s.energy_cap >= 0.0) {
                push(format!("storage {} ratings must be non-negative", s.id));
            }
            if !(s.initial_energy >= 0.0 && s.initial_energy <= s.energy_cap) {
                push(format!("storage {} initial energy outside [0, energy_cap]", s.id));
            }
            if !(s.round_trip_eff > 0.0 && s.round_trip_eff <= 1.0) {
                push(format!("storage {} round-trip efficiency outside (0, 1]", s.id));
            }
        }
        for w in &self.water_loads {
            if !zone_ok(&w.zone) {
                push(format!("water load {} references unknown zone {}", w.id, w.zone));
            }
            if !self.profiles.contains_key(&w.profile_id) {
                push(format!("water load {} references unknown profile {}", w.id, w.profile_id));
            }
            if !(0.0..=1.0).contains(&w.sheddable_fraction) {
                push(format!("water load {} sheddable fraction outside [0, 1]", w.id));
            }
            if !(w.shed_price >= 0.0) {
                push(format!("water load {} shed price must be non-negative", w.id));
            }
        }
        for (zone, prof) in &self.zone_loads {
            if !zone_ok(zone) {
                push(format!("zone load mapping references unknown zone {}", zone));
            }
            if !self.profiles.contains_key(prof) {
                push(format!("zone {} load references unknown profile {}", zone, prof));
            }
        }
        if !zone_ok(&self.swing_zone) {
            push(format!("swing zone {} does not exist", self.swing_zone));
        }
        if !(self.regulation_capacity >= 0.0) {
            push("regulation capacity must be non-negative".into());
        }
        let rp = &self.reserve_policy;
        if !(rp.lfr_peak_fraction >= 0.0
            && rp.lfr_vre_fraction >= 0.0
            && rp.ramp_up_mw_per_min >= 0.0
            && rp.ramp_down_mw_per_min >= 0.0)
        {
            push("reserve policy coefficients must be non-negative".into());
        }
        for h in Horizon::ALL {
            let m = self.forecast.model(*h);
            if !(m.sigma_pct >= 0.0) || !(m.phi.abs() < 1.0) {
                push(format!("forecast model {} needs sigma_pct >= 0 and |phi| < 1", h));
            }
        }
        if !(self.storage_drawdown >= 0.0) {
            push("storage drawdown must be non-negative".into());
        }
        let minutes = self.horizon_minutes();
        if minutes <= 0 || minutes % 1440 != 0 {
            push(format!("horizon {} .. {} is not a whole number of days", self.start, self.end));
        }
        for p in self.profiles.values() {
            if ![1, 15, 60].contains(&p.step) {
                push(format!("profile {} step {} min is not 1, 15 or 60", p.id, p.step));
            }
            if p.values.iter().any(|v| !v.is_finite()) {
                push(format!("profile {} has non-finite values", p.id));
            }
            if !p.covers(self.start, self.end) {
                push(format!("profile {} does not cover the simulation horizon", p.id));
            }
        }
        if !self.zones.is_empty() && !self.is_connected() {
            push("zonal network is not connected".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::new();
        queue.push_back(self.zones[0].id.as_str());
        seen.insert(self.zones[0].id.as_str());
        while let Some(z) = queue.pop_front() {
            for p in &self.pipes {
                let next = if p.from_zone == z {
                    p.to_zone.as_str()
                } else if p.to_zone == z {
                    p.from_zone.as_str()
                } else {
                    continue;
                };
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        self.zones.iter().all(|z| seen.contains(z.id.as_str()))
    }
}

fn dupes<'a>(ids: impl Iterator<Item = &'a str>, what: &str, push: &mut impl FnMut(String)) {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            push(format!("duplicate {} id {}", what, id));
        }
    }
}

/// Per-record generator checks shared by validation and file loading.
pub fn check_generator(
    g: &Generator,
    zone_exists: impl Fn(&str) -> bool,
    profile_exists: impl Fn(&str) -> bool,
) -> Result<(), String> {
    if !zone_exists(&g.zone) {
        return Err(format!("unknown zone {}", g.zone));
    }
    let finite = [
        g.p_min,
        g.p_max,
        g.ramp,
        g.startup_cost,
        g.no_load_cost,
        g.marginal_cost,
        g.curtail_price,
        g.emission_factor,
    ];
    if finite.iter().any(|v| !v.is_finite()) {
        return Err("numeric fields must be finite".into());
    }
    if !(g.p_min >= 0.0 && g.p_min <= g.p_max) {
        return Err(format!("needs 0 <= p_min ({}) <= p_max ({})", g.p_min, g.p_max));
    }
    if g.ramp < 0.0 {
        return Err("ramp must be non-negative".into());
    }
    if g.fast_start && !(g.min_up == g.min_down && g.min_up <= 1) {
        return Err("fast-start units need min_up = min_down <= 1".into());
    }
    if g.base_class == BaseClass::MustRun && g.p_min != g.p_max {
        return Err("must-run units need p_min = p_max".into());
    }
    if g.is_variable() {
        match &g.profile_id {
            None => return Err("variable resources need a profile".into()),
            Some(p) if !profile_exists(p) => return Err(format!("unknown profile {}", p)),
            _ => {}
        }
    }
    if g.fuel.is_thermal() {
        match &g.cooling {
            None => return Err("thermal units need a cooling spec".into()),
            Some(c) => c.check()?,
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ResourceClass {
    Dispatchable,
    MustRun,
    SemiDispatchable,
    FixedInjection,
}

/// Effective operating classes under one mode.
#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub mode: Mode,
    /// Indexed like `Scenario::generators`.
    pub generators: Vec<ResourceClass>,
    /// Effective sheddable fraction per water load (0 when not sheddable).
    pub shed_fraction: Vec<f64>,
}

impl Classification {
    pub fn class_of(&self, gen_index: usize) -> ResourceClass {
        self.generators[gen_index]
    }

    pub fn is_sheddable(&self, load_index: usize) -> bool {
        self.shed_fraction[load_index] > 0.0
    }

    pub fn by_id<'a>(&self, s: &'a Scenario) -> BTreeMap<&'a str, ResourceClass> {
        s.generators
            .iter()
            .zip(&self.generators)
            .map(|(g, c)| (g.id.as_str(), *c))
            .collect()
    }
}

/// Map every generator to its effective class under `mode`.
pub fn classify_resources(s: &Scenario, mode: Mode) -> Classification {
    let generators = s
        .generators
        .iter()
        .map(|g| match g.fuel {
            Fuel::Wind | Fuel::Solar | Fuel::Tieline => ResourceClass::SemiDispatchable,
            Fuel::HydroRor | Fuel::HydroPond => match mode {
                Mode::Flexible => ResourceClass::SemiDispatchable,
                Mode::Conventional => ResourceClass::FixedInjection,
            },
            Fuel::Nuclear => ResourceClass::MustRun,
            _ if g.base_class == BaseClass::MustRun => ResourceClass::MustRun,
            _ if g.base_class == BaseClass::Variable => ResourceClass::SemiDispatchable,
            _ => ResourceClass::Dispatchable,
        })
        .collect();
    let shed_fraction = s
        .water_loads
        .iter()
        .map(|w| match mode {
            Mode::Flexible => w.sheddable_fraction,
            Mode::Conventional => 0.0,
        })
        .collect();
    Classification {
        mode,
        generators,
        shed_fraction,
    }
}

pub fn parse_time(s: &str) -> Result<NaiveDateTime, String> {
    let t = s.trim();
    NaiveDateTime::parse_from_str(t, TIME_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(t, "%Y-%m-%dT%H:%M"))
        .or_else(|_| NaiveDateTime::parse_from_str(t, "%Y-%m-%d %H:%M:%S"))
        .map_err(|e| format!("bad timestamp '{}': {}", t, e))
}

pub fn format_time(t: NaiveDateTime) -> String {
    t.format(TIME_FORMAT).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::canonical_fixture;

    #[test]
    fn hydro_class_depends_on_mode() {
        let s = canonical_fixture();
        let hyd = s.generators.iter().position(|g| g.fuel == Fuel::HydroRor).unwrap();
        assert_eq!(
            classify_resources(&s, Mode::Conventional).class_of(hyd),
            ResourceClass::FixedInjection
        );
        assert_eq!(
            classify_resources(&s, Mode::Flexible).class_of(hyd),
            ResourceClass::SemiDispatchable
        );
    }

    #[test]
    fn nuclear_is_must_run_in_both_modes() {
        let s = canonical_fixture();
        let nuc = s.generators.iter().position(|g| g.fuel == Fuel::Nuclear).unwrap();
        for m in Mode::ALL {
            assert_eq!(classify_resources(&s, *m).class_of(nuc), ResourceClass::MustRun);
        }
    }

    #[test]
    fn flexible_only_upgrades_to_semi_dispatchable() {
        let s = canonical_fixture();
        let c = classify_resources(&s, Mode::Conventional);
        let f = classify_resources(&s, Mode::Flexible);
        for (a, b) in c.generators.iter().zip(&f.generators) {
            if a != b {
                assert_eq!(*a, ResourceClass::FixedInjection);
                assert_eq!(*b, ResourceClass::SemiDispatchable);
            }
            if *a == ResourceClass::SemiDispatchable {
                assert_eq!(*b, ResourceClass::SemiDispatchable);
            }
        }
        assert!(c.shed_fraction.iter().all(|&x| x == 0.0));
        assert!(f.shed_fraction.iter().any(|&x| x > 0.0));
    }

    #[test]
    fn series_interpolates_and_holds() {
        let t0 = parse_time("2040-01-01T00:00:00").unwrap();
        let ts = TimeSeries {
            id: "x".into(),
            start: t0,
            step: 60,
            values: vec![0.0, 60.0, 30.0],
        };
        assert_eq!(ts.value_at(30.0), 30.0);
        assert_eq!(ts.value_at(90.0), 45.0);
        assert_eq!(ts.value_at(170.0), 30.0);
        assert_eq!(ts.value_at(-5.0), 0.0);
        assert!(ts.covers(t0, t0 + Duration::minutes(180)));
        assert!(!ts.covers(t0, t0 + Duration::minutes(181)));
    }

    #[test]
    fn self_loop_pipe_is_rejected() {
        let mut s = canonical_fixture();
        s.pipes[0].to_zone = s.pipes[0].from_zone.clone();
        let errs = s.validate().unwrap_err();
        assert!(errs.iter().any(|e| e.contains("to itself")), "{errs:?}");
    }

    #[test]
    fn disconnected_network_is_rejected() {
        let mut s = canonical_fixture();
        s.pipes.pop();
        let errs = s.validate().unwrap_err();
        assert!(errs.iter().any(|e| e.contains("not connected")));
    }

    #[test]
    fn fast_start_needs_short_runs() {
        let mut s = canonical_fixture();
        let g = s.generators.iter_mut().find(|g| g.fast_start).unwrap();
        g.min_up = 2;
        assert!(s.validate().is_err());
    }
}
