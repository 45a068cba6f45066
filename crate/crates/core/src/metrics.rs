//! Distribution statistics and flexible-versus-conventional comparison.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reserves::{regulation_mileage, MileageMode};

/// Total curtailment at or below this level counts as not curtailed, MW.
pub const CURTAILMENT_THRESHOLD: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("empty series")]
    Empty,
    #[error("runs cover different horizons ({flexible} vs {conventional} minutes)")]
    HorizonMismatch { flexible: usize, conventional: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub mean: f64,
    pub std: f64,
    pub max: f64,
    pub min: f64,
    /// Level exceeded by 95 % of the samples.
    pub p95_exceeded: f64,
    pub count: usize,
}

/// Linear interpolation between order statistics at rank `q·(n−1)`.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Population statistics of a series.
pub fn summarize(series: &[f64]) -> Result<DistributionSummary, MetricsError> {
    if series.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(DistributionSummary {
        mean,
        std: var.sqrt(),
        max: sorted[sorted.len() - 1],
        min: sorted[0],
        p95_exceeded: quantile_sorted(&sorted, 0.05),
        count: series.len(),
    })
}

/// Values sorted high to low against the fraction of time they are reached.
pub fn duration_curve(series: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = series.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, v)| ((i + 1) as f64 / n, v))
        .collect()
}

/// Equal-width bins over [min, max]: (lower edge, upper edge, count).
pub fn histogram(series: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    if series.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &x in series {
        let b = (((x - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, c)| (lo + b as f64 * width, lo + (b + 1) as f64 * width, c))
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CurtailmentMetrics {
    pub total_gwh: f64,
    /// Share of available semi-dispatchable energy that was curtailed, %.
    pub energy_pct: f64,
    /// Share of minutes with curtailment above the threshold, %.
    pub time_pct: f64,
    pub max_mw: f64,
}

/// `curtailed` and `available` are per-minute system totals in MW.
pub fn curtailment_metrics(curtailed: &[f64], available: &[f64]) -> CurtailmentMetrics {
    if curtailed.is_empty() {
        return CurtailmentMetrics::default();
    }
    let total: f64 = curtailed.iter().sum();
    let avail: f64 = available.iter().map(|a| a.max(0.0)).sum();
    let active = curtailed.iter().filter(|&&c| c > CURTAILMENT_THRESHOLD).count();
    CurtailmentMetrics {
        total_gwh: total / 60.0 / 1000.0,
        energy_pct: if avail > 0.0 { total / avail * 100.0 } else { 0.0 },
        time_pct: active as f64 / curtailed.len() as f64 * 100.0,
        max_mw: curtailed.iter().copied().fold(0.0, f64::max),
    }
}

/// Per-minute and per-hour series of one run, the input to every statistic.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSeries {
    pub lfr_up: Vec<f64>,
    pub lfr_down: Vec<f64>,
    pub ramp_up: Vec<f64>,
    pub ramp_down: Vec<f64>,
    pub curtailed: Vec<f64>,
    pub semi_available: Vec<f64>,
    pub raw_imbalance: Vec<f64>,
    pub regulation: Vec<f64>,
    pub residual: Vec<f64>,
    pub reg_exhausted: Vec<bool>,
    /// m³ per minute.
    pub withdrawal: Vec<f64>,
    pub consumption: Vec<f64>,
    /// kg per minute.
    pub co2: Vec<f64>,
    /// Real-time production cost per minute, $.
    pub rt_cost: Vec<f64>,
    /// Day-ahead production cost per hour, $.
    pub da_cost: Vec<f64>,
}

impl RunSeries {
    pub fn minutes(&self) -> usize {
        self.regulation.len()
    }

    /// Named distribution summaries of every per-minute quantity.
    pub fn summaries(&self) -> Result<Vec<(&'static str, DistributionSummary)>, MetricsError> {
        Ok(vec![
            ("lfr_up", summarize(&self.lfr_up)?),
            ("lfr_down", summarize(&self.lfr_down)?),
            ("ramp_up", summarize(&self.ramp_up)?),
            ("ramp_down", summarize(&self.ramp_down)?),
            ("curtailment", summarize(&self.curtailed)?),
            ("raw_imbalance", summarize(&self.raw_imbalance)?),
            ("regulation", summarize(&self.regulation)?),
            ("residual", summarize(&self.residual)?),
            ("withdrawal", summarize(&self.withdrawal)?),
            ("consumption", summarize(&self.consumption)?),
            ("co2", summarize(&self.co2)?),
            ("rt_cost", summarize(&self.rt_cost)?),
        ])
    }

    pub fn exhausted_pct(&self) -> f64 {
        if self.reg_exhausted.is_empty() {
            return 0.0;
        }
        let n = self.reg_exhausted.iter().filter(|&&e| e).count();
        n as f64 / self.reg_exhausted.len() as f64 * 100.0
    }
}

/// Which difference a metric reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    FlexibleMinusConventional,
    ConventionalMinusFlexible,
}

impl SignConvention {
    pub fn label(self) -> &'static str {
        match self {
            Self::FlexibleMinusConventional => "flexible-conventional",
            Self::ConventionalMinusFlexible => "conventional-flexible",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub group: String,
    pub metric: String,
    pub unit: String,
    pub flexible: f64,
    pub conventional: f64,
    pub delta: f64,
    /// Delta relative to the conventional value, %. None when that is zero.
    pub percent: Option<f64>,
    pub convention: SignConvention,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub rows: Vec<DeltaRow>,
}

pub const GROUPS: [&str; 5] = [
    "reserves",
    "curtailment",
    "regulation_imbalance",
    "environmental",
    "economic",
];

impl DeltaReport {
    pub fn get(&self, metric: &str) -> Option<&DeltaRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    pub fn groups(&self) -> Vec<&str> {
        let mut g: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !g.contains(&r.group.as_str()) {
                g.push(&r.group);
            }
        }
        g
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("group,metric,unit,flexible,conventional,delta,percent,convention\n");
        for r in &self.rows {
            let pct = r.percent.map(|p| format!("{p:.6}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.6},{},{}",
                r.group,
                r.metric,
                r.unit,
                r.flexible,
                r.conventional,
                r.delta,
                pct,
                r.convention.label()
            );
        }
        out
    }

    /// Fixed-width plain-text table.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<30} {:>16} {:>16} {:>16} {:>9}  {}",
            "metric", "flexible", "conventional", "delta", "%", "sign"
        );
        let mut group = "";
        for r in &self.rows {
            if r.group != group {
                group = &r.group;
                let _ = writeln!(out, "[{group}]");
            }
            let pct = r.percent.map(|p| format!("{p:.2}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<30} {:>16.3} {:>16.3} {:>16.3} {:>9}  {}",
                format!("{} ({})", r.metric, r.unit),
                r.flexible,
                r.conventional,
                r.delta,
                pct,
                r.convention.label()
            );
        }
        out
    }
}

fn row(
    group: &str,
    metric: &str,
    unit: &str,
    flexible: f64,
    conventional: f64,
    convention: SignConvention,
) -> DeltaRow {
    let delta = match convention {
        SignConvention::FlexibleMinusConventional => flexible - conventional,
        SignConvention::ConventionalMinusFlexible => conventional - flexible,
    };
    let percent = if conventional != 0.0 {
        Some(delta / conventional.abs() * 100.0)
    } else if delta == 0.0 {
        Some(0.0)
    } else {
        None
    };
    DeltaRow {
        group: group.into(),
        metric: metric.into(),
        unit: unit.into(),
        flexible,
        conventional,
        delta,
        percent,
        convention,
    }
}

/// Scorecard of flexible against conventional operation.
pub fn compare_runs(flexible: &RunSeries, conventional: &RunSeries) -> Result<DeltaReport, MetricsError> {
    use SignConvention::*;
    if flexible.minutes() != conventional.minutes() || flexible.da_cost.len() != conventional.da_cost.len() {
        return Err(MetricsError::HorizonMismatch {
            flexible: flexible.minutes(),
            conventional: conventional.minutes(),
        });
    }
    let f = flexible.summaries()?;
    let c = conventional.summaries()?;
    let stat = |list: &[(&str, DistributionSummary)], name: &str| {
        list.iter().find(|(n, _)| *n == name).map(|(_, s)| *s).unwrap()
    };
    let mut rows = Vec::new();

    for name in ["lfr_up", "lfr_down", "ramp_up", "ramp_down"] {
        let unit = if name.starts_with("lfr") { "MW" } else { "MW/min" };
        let (a, b) = (stat(&f, name), stat(&c, name));
        rows.push(row("reserves", &format!("{name}_mean"), unit, a.mean, b.mean, FlexibleMinusConventional));
        rows.push(row("reserves", &format!("{name}_std"), unit, a.std, b.std, FlexibleMinusConventional));
        rows.push(row("reserves", &format!("{name}_max"), unit, a.max, b.max, FlexibleMinusConventional));
        rows.push(row("reserves", &format!("{name}_min"), unit, a.min, b.min, FlexibleMinusConventional));
        rows.push(row("reserves", &format!("{name}_p95"), unit, a.p95_exceeded, b.p95_exceeded, FlexibleMinusConventional));
    }

    let fc = curtailment_metrics(&flexible.curtailed, &flexible.semi_available);
    let cc = curtailment_metrics(&conventional.curtailed, &conventional.semi_available);
    rows.push(row("curtailment", "curtailed_energy", "GWh", fc.total_gwh, cc.total_gwh, FlexibleMinusConventional));
    rows.push(row("curtailment", "curtailed_energy_share", "%", fc.energy_pct, cc.energy_pct, FlexibleMinusConventional));
    rows.push(row("curtailment", "time_curtailed", "%", fc.time_pct, cc.time_pct, FlexibleMinusConventional));
    rows.push(row("curtailment", "max_curtailment", "MW", fc.max_mw, cc.max_mw, FlexibleMinusConventional));

    let g = "regulation_imbalance";
    rows.push(row(g, "time_regulation_exhausted", "%", flexible.exhausted_pct(), conventional.exhausted_pct(), FlexibleMinusConventional));
    rows.push(row(
        g,
        "regulation_mileage",
        "GWh",
        regulation_mileage(&flexible.regulation, MileageMode::Energy),
        regulation_mileage(&conventional.regulation, MileageMode::Energy),
        FlexibleMinusConventional,
    ));
    let (a, b) = (stat(&f, "raw_imbalance"), stat(&c, "raw_imbalance"));
    rows.push(row(g, "imbalance_mean", "MW", a.mean, b.mean, FlexibleMinusConventional));
    rows.push(row(g, "imbalance_std", "MW", a.std, b.std, FlexibleMinusConventional));
    let (a, b) = (stat(&f, "residual"), stat(&c, "residual"));
    rows.push(row(g, "residual_std", "MW", a.std, b.std, FlexibleMinusConventional));

    let total = |v: &[f64]| v.iter().sum::<f64>();
    let g = "environmental";
    rows.push(row(g, "water_withdrawal", "m3", total(&flexible.withdrawal), total(&conventional.withdrawal), ConventionalMinusFlexible));
    rows.push(row(g, "water_consumption", "m3", total(&flexible.consumption), total(&conventional.consumption), ConventionalMinusFlexible));
    rows.push(row(g, "co2", "t", total(&flexible.co2) / 1000.0, total(&conventional.co2) / 1000.0, ConventionalMinusFlexible));

    let g = "economic";
    rows.push(row(g, "day_ahead_cost", "$", total(&flexible.da_cost), total(&conventional.da_cost), FlexibleMinusConventional));
    rows.push(row(g, "real_time_cost", "$", total(&flexible.rt_cost), total(&conventional.rt_cost), FlexibleMinusConventional));

    Ok(DeltaReport { rows })
}
