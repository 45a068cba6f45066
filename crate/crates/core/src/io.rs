//! Reading and writing scenario directories.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{
    check_generator, format_time, parse_time, CoolingSpec, CoolingTech, ForecastConfig,
    Fuel, Generator, Horizon, Pipe, ReservePolicy, Scenario, StorageUnit, TimeSeries, WaterLoad,
    Zone, DEFAULT_DELTA_T, DEFAULT_K_LATENT, DEFAULT_K_OT_EVAP, DEFAULT_N_CC,
};

pub const ZONES: &str = "zones.csv";
pub const PIPES: &str = "pipes.csv";
pub const GENERATORS: &str = "generators.csv";
pub const STORAGE: &str = "storage.csv";
pub const WATER_LOADS: &str = "water_loads.csv";
pub const PROFILES: &str = "profiles.csv";
pub const FORECASTS: &str = "forecasts.csv";
pub const CONFIG: &str = "scenario.toml";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{file}: required file is missing")]
    MissingFile { file: String },
    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file} row {row}: {message}")]
    Malformed { file: String, row: u64, message: String },
    #[error("{file} row {row}: dangling reference: {message}")]
    Dangling { file: String, row: u64, message: String },
    #[error("{file}: {message}")]
    Config { file: String, message: String },
    #[error("{file}: horizon mismatch: {message}")]
    Horizon { file: String, message: String },
    #[error("invalid scenario: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

type Result<T> = std::result::Result<T, ScenarioError>;

#[derive(Debug, Serialize, Deserialize)]
struct ConfigFile {
    #[serde(default)]
    name: Option<String>,
    swing_zone: String,
    regulation_capacity_mw: f64,
    start: String,
    end: String,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    storage_drawdown_mwh: f64,
    #[serde(default)]
    reserve_policy: ReservePolicy,
    #[serde(default)]
    forecast: ForecastConfig,
    zone_loads: BTreeMap<String, String>,
}

fn open_csv(dir: &Path, file: &str, required: bool) -> Result<Option<csv::Reader<fs::File>>> {
    let path = dir.join(file);
    if !path.exists() {
        return if required {
            Err(ScenarioError::MissingFile { file: file.into() })
        } else {
            Ok(None)
        };
    }
    let f = fs::File::open(&path).map_err(|source| ScenarioError::Io {
        file: file.into(),
        source,
    })?;
    Ok(Some(
        csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(f),
    ))
}

/// Parse every row of `file` with `parse`, tagging errors with the line number.
fn rows<T>(
    dir: &Path,
    file: &str,
    required: bool,
    mut parse: impl FnMut(&Row) -> std::result::Result<T, String>,
) -> Result<Vec<T>> {
    let Some(mut rdr) = open_csv(dir, file, required)? else {
        return Ok(Vec::new());
    };
    let headers = rdr
        .headers()
        .map_err(|e| ScenarioError::Malformed {
            file: file.into(),
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ScenarioError::Malformed {
            file: file.into(),
            row: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = Row {
            headers: &headers,
            rec: &rec,
            line,
        };
        out.push(parse(&row).map_err(|message| ScenarioError::Malformed {
            file: file.into(),
            row: line,
            message,
        })?);
    }
    Ok(out)
}

struct Row<'a> {
    headers: &'a csv::StringRecord,
    rec: &'a csv::StringRecord,
    line: u64,
}

impl Row<'_> {
    fn opt(&self, col: &str) -> std::result::Result<Option<&str>, String> {
        let idx = self
            .headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| format!("missing column '{}'", col))?;
        Ok(self.rec.get(idx).filter(|v| !v.is_empty()))
    }

    fn text(&self, col: &str) -> std::result::Result<String, String> {
        self.opt(col)?
            .map(str::to_string)
            .ok_or_else(|| format!("column '{}' is empty", col))
    }

    fn num(&self, col: &str) -> std::result::Result<f64, String> {
        let v = self.text(col)?;
        parse_f64(&v, col)
    }

    fn opt_num(&self, col: &str) -> std::result::Result<Option<f64>, String> {
        self.opt(col)?.map(|v| parse_f64(v, col)).transpose()
    }

    fn hours(&self, col: &str) -> std::result::Result<u32, String> {
        let v = self.text(col)?;
        v.parse()
            .map_err(|_| format!("column '{}' must be a non-negative integer, got '{}'", col, v))
    }

    fn flag(&self, col: &str) -> std::result::Result<bool, String> {
        match self.text(col)?.to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(format!("column '{}' must be a boolean, got '{}'", col, other)),
        }
    }

    fn parsed<T: std::str::FromStr<Err = String>>(&self, col: &str) -> std::result::Result<T, String> {
        self.text(col)?.parse()
    }
}

fn parse_f64(v: &str, col: &str) -> std::result::Result<f64, String> {
    let x: f64 = v
        .parse()
        .map_err(|_| format!("column '{}' is not a number: '{}'", col, v))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("column '{}' is not finite", col))
    }
}

fn parse_generator(r: &Row) -> std::result::Result<Generator, String> {
    let fuel: Fuel = r.parsed("fuel")?;
    let cooling = match r.opt("cooling")? {
        None => None,
        Some(t) => {
            let technology: CoolingTech = t.parse()?;
            let defaults = fuel.default_heat_balance();
            let efficiency = r
                .opt_num("efficiency")?
                .or(defaults.map(|d| d.0))
                .ok_or("efficiency is required for this fuel")?;
            let k_os = r
                .opt_num("k_os")?
                .or(defaults.map(|d| d.1))
                .ok_or("k_os is required for this fuel")?;
            Some(CoolingSpec {
                technology,
                efficiency,
                k_os,
                delta_t: r.opt_num("delta_t")?.unwrap_or(DEFAULT_DELTA_T),
                k_latent: r.opt_num("k_latent")?.unwrap_or(DEFAULT_K_LATENT),
                n_cc: r.opt_num("n_cc")?.unwrap_or(DEFAULT_N_CC),
                k_ot_evap: r.opt_num("k_ot_evap")?.unwrap_or(DEFAULT_K_OT_EVAP),
            })
        }
    };
    Ok(Generator {
        id: r.text("id")?,
        zone: r.text("zone")?,
        fuel,
        base_class: r.parsed("base_class")?,
        p_min: r.num("p_min")?,
        p_max: r.num("p_max")?,
        ramp: r.num("ramp")?,
        min_up: r.hours("min_up")?,
        min_down: r.hours("min_down")?,
        startup_cost: r.num("startup_cost")?,
        no_load_cost: r.num("no_load_cost")?,
        marginal_cost: r.num("marginal_cost")?,
        fast_start: r.flag("fast_start")?,
        curtail_price: r.opt_num("curtail_price")?.unwrap_or(0.0),
        profile_id: r.opt("profile_id")?.map(str::to_string),
        cooling,
        emission_factor: r
            .opt_num("emission_factor")?
            .unwrap_or_else(|| fuel.default_emission_factor()),
    })
}

fn io_err(file: &str) -> impl FnOnce(std::io::Error) -> ScenarioError + '_ {
    move |source| ScenarioError::Io {
        file: file.into(),
        source,
    }
}

/// Group long-form samples into regular series; the step is inferred from
/// the first two timestamps of each series.
fn build_series(
    file: &str,
    samples: Vec<(u64, String, NaiveDateTime, f64)>,
) -> Result<BTreeMap<String, TimeSeries>> {
    let mut grouped: BTreeMap<String, Vec<(u64, NaiveDateTime, f64)>> = BTreeMap::new();
    for (line, id, t, v) in samples {
        grouped.entry(id).or_default().push((line, t, v));
    }
    let mut out = BTreeMap::new();
    for (id, pts) in grouped {
        let step = if pts.len() > 1 {
            (pts[1].1 - pts[0].1).num_minutes()
        } else {
            60
        };
        if step <= 0 {
            return Err(ScenarioError::Malformed {
                file: file.into(),
                row: pts[1].0,
                message: format!("series {} timestamps must increase", id),
            });
        }
        for (k, w) in pts.windows(2).enumerate() {
            if (w[1].1 - w[0].1).num_minutes() != step {
                return Err(ScenarioError::Malformed {
                    file: file.into(),
                    row: w[1].0,
                    message: format!(
                        "series {} is not on a regular {}-minute grid (sample {})",
                        id,
                        step,
                        k + 1
                    ),
                });
            }
        }
        out.insert(
            id.clone(),
            TimeSeries {
                id,
                start: pts[0].1,
                step: step as u32,
                values: pts.iter().map(|p| p.2).collect(),
            },
        );
    }
    Ok(out)
}

/// Load and fully validate a scenario directory.
pub fn load_scenario(dir: impl AsRef<Path>) -> Result<Scenario> {
    let dir = dir.as_ref();
    let cfg_path = dir.join(CONFIG);
    if !cfg_path.exists() {
        return Err(ScenarioError::MissingFile { file: CONFIG.into() });
    }
    let text = fs::read_to_string(&cfg_path).map_err(io_err(CONFIG))?;
    let cfg: ConfigFile = toml::from_str(&text).map_err(|e| ScenarioError::Config {
        file: CONFIG.into(),
        message: e.to_string(),
    })?;
    let cfg_err = |message: String| ScenarioError::Config {
        file: CONFIG.into(),
        message,
    };
    let start = parse_time(&cfg.start).map_err(cfg_err)?;
    let end = parse_time(&cfg.end).map_err(cfg_err)?;

    let zones = rows(dir, ZONES, true, |r| {
        Ok(Zone {
            id: r.text("id")?,
            name: r.opt("name")?.unwrap_or_default().to_string(),
        })
    })?;
    let pipes = rows(dir, PIPES, true, |r| {
        Ok(Pipe {
            id: r.text("id")?,
            from_zone: r.text("from")?,
            to_zone: r.text("to")?,
            limit: r.num("limit_mw")?,
            reactance: r.num("reactance_pu")?,
        })
    })?;
    let generators = rows(dir, GENERATORS, true, parse_generator)?;
    let storage_units = rows(dir, STORAGE, false, |r| {
        Ok(StorageUnit {
            id: r.text("id")?,
            zone: r.text("zone")?,
            p_max_gen: r.num("p_max_gen")?,
            p_max_pump: r.num("p_max_pump")?,
            energy_cap: r.num("energy_cap")?,
            round_trip_eff: r.num("round_trip_eff")?,
            initial_energy: r.num("initial_energy")?,
        })
    })?;
    let water_loads = rows(dir, WATER_LOADS, false, |r| {
        Ok(WaterLoad {
            id: r.text("id")?,
            zone: r.text("zone")?,
            profile_id: r.text("profile_id")?,
            sheddable_fraction: r.num("sheddable_fraction")?,
            shed_price: r.num("shed_price")?,
        })
    })?;

    let samples = rows(dir, PROFILES, true, |r| {
        Ok((
            r.line,
            r.text("series_id")?,
            parse_time(&r.text("timestamp_iso8601")?)?,
            r.num("value_mw")?,
        ))
    })?;
    let profiles = build_series(PROFILES, samples)?;

    let fsamples = rows(dir, FORECASTS, false, |r| {
        let h: Horizon = r.parsed("horizon")?;
        Ok((
            h,
            (
                r.line,
                r.text("series_id")?,
                parse_time(&r.text("timestamp_iso8601")?)?,
                r.num("value_mw")?,
            ),
        ))
    })?;
    let mut forecast_overrides = BTreeMap::new();
    for h in Horizon::ALL {
        let part: Vec<_> = fsamples
            .iter()
            .filter(|(hh, _)| hh == h)
            .map(|(_, x)| x.clone())
            .collect();
        for (id, ts) in build_series(FORECASTS, part)? {
            forecast_overrides.insert((*h, id), ts);
        }
    }

    let name = cfg.name.clone().unwrap_or_else(|| {
        dir.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into())
    });
    let s = Scenario {
        name,
        zones,
        pipes,
        generators,
        storage_units,
        water_loads,
        profiles,
        zone_loads: cfg.zone_loads,
        swing_zone: cfg.swing_zone,
        regulation_capacity: cfg.regulation_capacity_mw,
        reserve_policy: cfg.reserve_policy,
        start,
        end,
        forecast: cfg.forecast,
        seed: cfg.seed,
        storage_drawdown: cfg.storage_drawdown_mwh,
        forecast_overrides,
    };
    check_references(&s)?;
    s.validate().map_err(ScenarioError::Invalid)?;
    Ok(s)
}

/// Report cross-file references and coverage with file and row context.
fn check_references(s: &Scenario) -> Result<()> {
    let zone_ok = |z: &str| s.zones.iter().any(|x| x.id == z);
    for (i, g) in s.generators.iter().enumerate() {
        let row = i as u64 + 2;
        if let Some(p) = &g.profile_id {
            if !s.profiles.contains_key(p) {
                return Err(ScenarioError::Dangling {
                    file: GENERATORS.into(),
                    row,
                    message: format!("generator {} profile {} not found in {}", g.id, p, PROFILES),
                });
            }
        }
        if !zone_ok(&g.zone) {
            return Err(ScenarioError::Dangling {
                file: GENERATORS.into(),
                row,
                message: format!("generator {} zone {} not found in {}", g.id, g.zone, ZONES),
            });
        }
        check_generator(g, zone_ok, |p| s.profiles.contains_key(p)).map_err(|message| {
            ScenarioError::Malformed {
                file: GENERATORS.into(),
                row,
                message,
            }
        })?;
    }
    for (i, p) in s.pipes.iter().enumerate() {
        for z in [&p.from_zone, &p.to_zone] {
            if !zone_ok(z) {
                return Err(ScenarioError::Dangling {
                    file: PIPES.into(),
                    row: i as u64 + 2,
                    message: format!("pipe {} zone {} not found in {}", p.id, z, ZONES),
                });
            }
        }
        if p.from_zone == p.to_zone {
            return Err(ScenarioError::Malformed {
                file: PIPES.into(),
                row: i as u64 + 2,
                message: format!("pipe {} has from = to = {}", p.id, p.from_zone),
            });
        }
    }
    for (i, w) in s.water_loads.iter().enumerate() {
        if !s.profiles.contains_key(&w.profile_id) {
            return Err(ScenarioError::Dangling {
                file: WATER_LOADS.into(),
                row: i as u64 + 2,
                message: format!("water load {} profile {} not found", w.id, w.profile_id),
            });
        }
    }
    for (z, p) in &s.zone_loads {
        if !s.profiles.contains_key(p) || !zone_ok(z) {
            return Err(ScenarioError::Config {
                file: CONFIG.into(),
                message: format!("zone_loads entry {} = {} is dangling", z, p),
            });
        }
    }
    for p in s.profiles.values() {
        if !p.covers(s.start, s.end) {
            return Err(ScenarioError::Horizon {
                file: PROFILES.into(),
                message: format!(
                    "series {} spans {} .. {} but the horizon is {} .. {}",
                    p.id,
                    format_time(p.start),
                    format_time(p.end()),
                    format_time(s.start),
                    format_time(s.end)
                ),
            });
        }
    }
    Ok(())
}

fn num(x: f64) -> String {
    format!("{}", x)
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn writer(dir: &Path, file: &str) -> Result<csv::Writer<fs::File>> {
    let f = fs::File::create(dir.join(file)).map_err(io_err(file))?;
    Ok(csv::Writer::from_writer(f))
}

fn csv_err(file: &str) -> impl Fn(csv::Error) -> ScenarioError + '_ {
    move |e| ScenarioError::Io {
        file: file.into(),
        source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
    }
}

/// Write `s` as a scenario directory readable by [`load_scenario`].
pub fn write_scenario(s: &Scenario, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err("."))?;

    let mut w = writer(dir, ZONES)?;
    let e = csv_err(ZONES);
    w.write_record(["id", "name"]).map_err(&e)?;
    for z in &s.zones {
        w.write_record([&z.id, &z.name]).map_err(&e)?;
    }
    w.flush().map_err(io_err(ZONES))?;

    let mut w = writer(dir, PIPES)?;
    let e = csv_err(PIPES);
    w.write_record(["id", "from", "to", "limit_mw", "reactance_pu"]).map_err(&e)?;
    for p in &s.pipes {
        w.write_record([&p.id, &p.from_zone, &p.to_zone, &num(p.limit), &num(p.reactance)])
            .map_err(&e)?;
    }
    w.flush().map_err(io_err(PIPES))?;

    let mut w = writer(dir, GENERATORS)?;
    let e = csv_err(GENERATORS);
    w.write_record([
        "id", "zone", "fuel", "base_class", "p_min", "p_max", "ramp", "min_up", "min_down",
        "startup_cost", "no_load_cost", "marginal_cost", "fast_start", "curtail_price",
        "profile_id", "cooling", "efficiency", "k_os", "delta_t", "k_latent", "n_cc", "k_ot_evap",
        "emission_factor",
    ])
    .map_err(&e)?;
    for g in &s.generators {
        let c = g.cooling.as_ref();
        w.write_record([
            g.id.clone(),
            g.zone.clone(),
            g.fuel.to_string(),
            g.base_class.to_string(),
            num(g.p_min),
            num(g.p_max),
            num(g.ramp),
            g.min_up.to_string(),
            g.min_down.to_string(),
            num(g.startup_cost),
            num(g.no_load_cost),
            num(g.marginal_cost),
            g.fast_start.to_string(),
            num(g.curtail_price),
            g.profile_id.clone().unwrap_or_default(),
            c.map(|c| c.technology.to_string()).unwrap_or_default(),
            opt_num(c.map(|c| c.efficiency)),
            opt_num(c.map(|c| c.k_os)),
            opt_num(c.map(|c| c.delta_t)),
            opt_num(c.map(|c| c.k_latent)),
            opt_num(c.map(|c| c.n_cc)),
            opt_num(c.map(|c| c.k_ot_evap)),
            num(g.emission_factor),
        ])
        .map_err(&e)?;
    }
    w.flush().map_err(io_err(GENERATORS))?;

    let mut w = writer(dir, STORAGE)?;
    let e = csv_err(STORAGE);
    w.write_record([
        "id", "zone", "p_max_gen", "p_max_pump", "energy_cap", "round_trip_eff", "initial_energy",
    ])
    .map_err(&e)?;
    for u in &s.storage_units {
        w.write_record([
            u.id.clone(),
            u.zone.clone(),
            num(u.p_max_gen),
            num(u.p_max_pump),
            num(u.energy_cap),
            num(u.round_trip_eff),
            num(u.initial_energy),
        ])
        .map_err(&e)?;
    }
    w.flush().map_err(io_err(STORAGE))?;

    let mut w = writer(dir, WATER_LOADS)?;
    let e = csv_err(WATER_LOADS);
    w.write_record(["id", "zone", "profile_id", "sheddable_fraction", "shed_price"])
        .map_err(&e)?;
    for l in &s.water_loads {
        w.write_record([
            l.id.clone(),
            l.zone.clone(),
            l.profile_id.clone(),
            num(l.sheddable_fraction),
            num(l.shed_price),
        ])
        .map_err(&e)?;
    }
    w.flush().map_err(io_err(WATER_LOADS))?;

    write_series(dir, PROFILES, s.profiles.values().map(|p| (None, p)))?;
    if !s.forecast_overrides.is_empty() {
        write_series(
            dir,
            FORECASTS,
            s.forecast_overrides.iter().map(|((h, _), p)| (Some(*h), p)),
        )?;
    }

    let cfg = ConfigFile {
        name: Some(s.name.clone()),
        swing_zone: s.swing_zone.clone(),
        regulation_capacity_mw: s.regulation_capacity,
        start: format_time(s.start),
        end: format_time(s.end),
        seed: s.seed,
        storage_drawdown_mwh: s.storage_drawdown,
        reserve_policy: s.reserve_policy.clone(),
        forecast: s.forecast.clone(),
        zone_loads: s.zone_loads.clone(),
    };
    let text = toml::to_string_pretty(&cfg).map_err(|e| ScenarioError::Config {
        file: CONFIG.into(),
        message: e.to_string(),
    })?;
    fs::write(dir.join(CONFIG), text).map_err(io_err(CONFIG))?;
    Ok(dir.to_path_buf())
}

fn write_series<'a>(
    dir: &Path,
    file: &str,
    series: impl Iterator<Item = (Option<Horizon>, &'a TimeSeries)>,
) -> Result<()> {
    let mut w = writer(dir, file)?;
    let e = csv_err(file);
    let mut header_done = false;
    for (h, ts) in series {
        if !header_done {
            if h.is_some() {
                w.write_record(["horizon", "series_id", "timestamp_iso8601", "value_mw"])
            } else {
                w.write_record(["series_id", "timestamp_iso8601", "value_mw"])
            }
            .map_err(&e)?;
            header_done = true;
        }
        for (k, v) in ts.values.iter().enumerate() {
            let t = format_time(ts.start + chrono::Duration::minutes(k as i64 * ts.step as i64));
            match h {
                Some(h) => w.write_record([h.as_str(), &ts.id, &t, &num(*v)]),
                None => w.write_record([ts.id.as_str(), &t, &num(*v)]),
            }
            .map_err(&e)?;
        }
    }
    if !header_done {
        w.write_record(["series_id", "timestamp_iso8601", "value_mw"]).map_err(&e)?;
    }
    w.flush().map_err(io_err(file))?;
    Ok(())
}
