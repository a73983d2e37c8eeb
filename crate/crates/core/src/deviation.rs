//! Deviation between measured and expected output, the performance ratio,
//! daily aggregation, and the four grouping schemes.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingestion::{MeasurementSeries, PlantConfig, SLOT_HOURS};

/// Daily groups must hold more than this many samples.
pub const DAILY_GROUP_MIN_EXCLUSIVE: usize = 25;
/// Thirty-minute groups with fewer samples are dropped.
pub const THIRTY_MIN_GROUP_MIN: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationKind {
    Absolute,
    Relative,
    Pr,
}

impl DeviationKind {
    pub fn label(&self) -> &'static str {
        match self {
            DeviationKind::Absolute => "absolute",
            DeviationKind::Relative => "relative",
            DeviationKind::Pr => "PR",
        }
    }
}

impl fmt::Display for DeviationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    /// One point per 5-minute slot.
    Sample,
    /// One point per calendar day, timestamped at midnight.
    Daily,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupingScheme {
    FiveMinSingle,
    ThirtyMinGroup,
    DailyGroup,
    DailySingle,
}

impl GroupingScheme {
    pub const ALL: [GroupingScheme; 4] = [
        GroupingScheme::FiveMinSingle,
        GroupingScheme::ThirtyMinGroup,
        GroupingScheme::DailyGroup,
        GroupingScheme::DailySingle,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            GroupingScheme::FiveMinSingle => "5 min single",
            GroupingScheme::ThirtyMinGroup => "30 min group",
            GroupingScheme::DailyGroup => "daily group",
            GroupingScheme::DailySingle => "daily single",
        }
    }

    pub fn resolution(&self) -> Resolution {
        match self {
            GroupingScheme::DailySingle => Resolution::Daily,
            _ => Resolution::Sample,
        }
    }

    /// Schemes that yield a single verdict per day.
    pub fn is_daily(&self) -> bool {
        matches!(self, GroupingScheme::DailyGroup | GroupingScheme::DailySingle)
    }
}

impl fmt::Display for GroupingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationPoint {
    pub timestamp: NaiveDateTime,
    pub value: f64,
    pub kind: DeviationKind,
}

impl DeviationPoint {
    pub fn day(&self) -> NaiveDate {
        self.timestamp.date()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationSeries {
    pub kind: DeviationKind,
    pub resolution: Resolution,
    pub points: Vec<DeviationPoint>,
    /// Slots (or days) whose deviation was filtered out: relative deviation
    /// below the denominator floor, or PR with zero irradiation.
    pub filtered: Vec<NaiveDateTime>,
}

impl DeviationSeries {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }
}

/// `(E_meas − E_exp) / P_nom`.
pub fn absolute_deviation(e_meas: f64, e_exp: f64, p_nom: f64) -> f64 {
    (e_meas - e_exp) / p_nom
}

/// `E_meas / E_exp − 1`, or `None` when `E_exp` is below `floor`.
pub fn relative_deviation(e_meas: f64, e_exp: f64, floor: f64) -> Option<f64> {
    if e_exp >= floor && e_exp > 0.0 {
        Some(e_meas / e_exp - 1.0)
    } else {
        None
    }
}

/// IEC 61724 performance ratio `(E / P_nom)·(G_STC / H_POA)` with
/// G_STC = 1 kW/m² and H_POA in kWh/m². `None` when H_POA is not positive.
pub fn performance_ratio(e: f64, p_nom: f64, h_poa: f64) -> Option<f64> {
    if h_poa > 0.0 {
        Some(e / p_nom * (1.0 / h_poa))
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyEnergy {
    pub day: NaiveDate,
    /// Measured energy, kWh.
    pub e_meas: f64,
    /// In-plane irradiation, kWh/m².
    pub h_poa: f64,
    /// Valid samples that day.
    pub samples: usize,
}

/// Daily sums over valid records; each record contributes one slot of
/// energy and irradiation. Days without valid records are absent.
pub fn aggregate_daily(series: &MeasurementSeries) -> Vec<DailyEnergy> {
    let mut out: Vec<DailyEnergy> = Vec::new();
    for r in series.valid() {
        let day = r.day();
        match out.last_mut() {
            Some(d) if d.day == day => {
                d.e_meas += r.ac_power * SLOT_HOURS;
                d.h_poa += r.irradiance * SLOT_HOURS / 1000.0;
                d.samples += 1;
            }
            _ => out.push(DailyEnergy {
                day,
                e_meas: r.ac_power * SLOT_HOURS,
                h_poa: r.irradiance * SLOT_HOURS / 1000.0,
                samples: 1,
            }),
        }
    }
    out
}

/// Valid samples per day.
pub fn daylight_counts(series: &MeasurementSeries) -> BTreeMap<NaiveDate, usize> {
    let mut counts = BTreeMap::new();
    for r in series.valid() {
        *counts.entry(r.day()).or_insert(0) += 1;
    }
    counts
}

fn point_value(
    kind: DeviationKind,
    e_meas: f64,
    e_exp: Option<f64>,
    h_poa: f64,
    config: &PlantConfig,
    floor: f64,
) -> Option<f64> {
    match kind {
        DeviationKind::Absolute => Some(absolute_deviation(e_meas, e_exp?, config.p_nom)),
        DeviationKind::Relative => relative_deviation(e_meas, e_exp?, floor),
        DeviationKind::Pr => performance_ratio(e_meas, config.p_nom, h_poa),
    }
}

/// Per-slot deviations. `predicted` holds the expected power (kW) per
/// record and is ignored for PR. Records that are not valid, or that have no
/// prediction, produce no point.
pub fn sample_deviations(
    series: &MeasurementSeries,
    predicted: &[Option<f64>],
    kind: DeviationKind,
    config: &PlantConfig,
) -> DeviationSeries {
    let floor = config.relative_denominator_floor * config.p_nom * SLOT_HOURS;
    let mut points = Vec::new();
    let mut filtered = Vec::new();
    for (i, r) in series.records.iter().enumerate() {
        if !r.is_valid() {
            continue;
        }
        let e_exp = predicted.get(i).copied().flatten().map(|p| p * SLOT_HOURS);
        if kind != DeviationKind::Pr && e_exp.is_none() {
            continue;
        }
        let h = r.irradiance * SLOT_HOURS / 1000.0;
        match point_value(kind, r.ac_power * SLOT_HOURS, e_exp, h, config, floor) {
            Some(value) => points.push(DeviationPoint {
                timestamp: r.timestamp,
                value,
                kind,
            }),
            None => filtered.push(r.timestamp),
        }
    }
    DeviationSeries {
        kind,
        resolution: Resolution::Sample,
        points,
        filtered,
    }
}

/// Per-day deviations computed from energies summed over the slots that
/// carry a prediction (all valid slots for PR). For relative deviation the
/// floor is the configured fraction of P_nom over the summed slot time.
pub fn daily_deviations(
    series: &MeasurementSeries,
    predicted: &[Option<f64>],
    kind: DeviationKind,
    config: &PlantConfig,
) -> DeviationSeries {
    // day -> (e_meas, e_exp, h_poa, slots)
    let mut days: BTreeMap<NaiveDate, (f64, f64, f64, usize)> = BTreeMap::new();
    for (i, r) in series.records.iter().enumerate() {
        if !r.is_valid() {
            continue;
        }
        let pred = predicted.get(i).copied().flatten();
        if kind != DeviationKind::Pr && pred.is_none() {
            continue;
        }
        let e = days.entry(r.day()).or_insert((0.0, 0.0, 0.0, 0));
        e.0 += r.ac_power * SLOT_HOURS;
        e.1 += pred.unwrap_or(0.0) * SLOT_HOURS;
        e.2 += r.irradiance * SLOT_HOURS / 1000.0;
        e.3 += 1;
    }
    let mut points = Vec::new();
    let mut filtered = Vec::new();
    for (day, (e_meas, e_exp, h, slots)) in days {
        let timestamp = day.and_hms_opt(0, 0, 0).expect("midnight exists");
        let floor = config.relative_denominator_floor * config.p_nom * SLOT_HOURS * slots as f64;
        match point_value(kind, e_meas, Some(e_exp), h, config, floor) {
            Some(value) => points.push(DeviationPoint {
                timestamp,
                value,
                kind,
            }),
            None => filtered.push(timestamp),
        }
    }
    DeviationSeries {
        kind,
        resolution: Resolution::Daily,
        points,
        filtered,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGroup {
    pub day: NaiveDate,
    pub window_start: NaiveDateTime,
    pub values: Vec<f64>,
    pub n: usize,
    pub mean: f64,
    pub range: f64,
    /// Sample standard deviation (n − 1 denominator); zero for n = 1.
    pub stddev: f64,
}

impl SampleGroup {
    pub fn from_values(window_start: NaiveDateTime, values: Vec<f64>) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let stddev = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            day: window_start.date(),
            window_start,
            values,
            n,
            mean,
            range: hi - lo,
            stddev,
        }
    }
}

fn half_hour_start(ts: NaiveDateTime) -> NaiveDateTime {
    let minute = if ts.minute() < 30 { 0 } else { 30 };
    ts.date()
        .and_hms_opt(ts.hour(), minute, 0)
        .expect("valid clock time")
}

fn group_by_key<K: PartialEq>(
    points: &[DeviationPoint],
    key: impl Fn(&DeviationPoint) -> K,
    start: impl Fn(&DeviationPoint) -> NaiveDateTime,
    keep: impl Fn(usize) -> bool,
) -> Vec<SampleGroup> {
    let mut groups = Vec::new();
    let mut i = 0;
    while i < points.len() {
        let k = key(&points[i]);
        let mut j = i + 1;
        while j < points.len() && key(&points[j]) == k {
            j += 1;
        }
        if keep(j - i) {
            let values = points[i..j].iter().map(|p| p.value).collect();
            groups.push(SampleGroup::from_values(start(&points[i]), values));
        }
        i = j;
    }
    groups
}

/// Groups a time-sorted deviation series. Thirty-minute windows are aligned
/// to :00 and :30 and need at least two points; daily groups need more than
/// 25. `DailySingle` accepts only daily-resolution input.
pub fn group_samples(series: &DeviationSeries, scheme: GroupingScheme) -> Result<Vec<SampleGroup>> {
    if series.resolution != scheme.resolution() {
        return Err(Error::Misuse(format!(
            "{scheme} grouping needs {:?}-resolution deviations, got {:?}",
            scheme.resolution(),
            series.resolution
        )));
    }
    let pts = &series.points;
    Ok(match scheme {
        GroupingScheme::FiveMinSingle | GroupingScheme::DailySingle => pts
            .iter()
            .map(|p| SampleGroup::from_values(p.timestamp, vec![p.value]))
            .collect(),
        GroupingScheme::ThirtyMinGroup => group_by_key(
            pts,
            |p| half_hour_start(p.timestamp),
            |p| half_hour_start(p.timestamp),
            |n| n >= THIRTY_MIN_GROUP_MIN,
        ),
        GroupingScheme::DailyGroup => group_by_key(
            pts,
            |p| p.day(),
            |p| p.day().and_hms_opt(0, 0, 0).expect("midnight exists"),
            |n| n > DAILY_GROUP_MIN_EXCLUSIVE,
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::MeasurementRecord;
    use chrono::Duration;

    fn start() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2021, 3, 1).unwrap().and_hms_opt(10, 0, 0).unwrap()
    }

    fn sample_series(values: &[f64], step_min: i64) -> DeviationSeries {
        DeviationSeries {
            kind: DeviationKind::Absolute,
            resolution: Resolution::Sample,
            points: values
                .iter()
                .enumerate()
                .map(|(i, &value)| DeviationPoint {
                    timestamp: start() + Duration::minutes(step_min * i as i64),
                    value,
                    kind: DeviationKind::Absolute,
                })
                .collect(),
            filtered: vec![],
        }
    }

    #[test]
    fn absolute_values() {
        assert_eq!(absolute_deviation(50.0, 50.0, 10.0), 0.0);
        assert!((absolute_deviation(80.0, 100.0, 100.0) + 0.2).abs() < 1e-15);
        assert_eq!(
            absolute_deviation(160.0, 200.0, 100.0),
            2.0 * absolute_deviation(80.0, 100.0, 100.0)
        );
    }

    #[test]
    fn relative_values() {
        assert_eq!(relative_deviation(7.0, 7.0, 1.0), Some(0.0));
        assert!((relative_deviation(80.0, 100.0, 1.0).unwrap() + 0.2).abs() < 1e-15);
        assert_eq!(relative_deviation(0.3, 0.4, 0.5), None);
    }

    #[test]
    fn pr_values() {
        assert_eq!(performance_ratio(500.0, 100.0, 5.0), Some(1.0));
        assert!((performance_ratio(400.0, 100.0, 5.0).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(performance_ratio(1.0, 100.0, 0.0), None);
        let a = performance_ratio(400.0, 100.0, 5.0).unwrap();
        let b = performance_ratio(1200.0, 300.0, 5.0).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn daily_aggregation() {
        let day = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
        let recs: Vec<MeasurementRecord> = (0..288)
            .map(|i| {
                MeasurementRecord::new(day.and_hms_opt(0, 0, 0).unwrap() + Duration::minutes(5 * i), 600.0, 12.0)
            })
            .collect();
        let d = aggregate_daily(&MeasurementSeries::new("p", recs));
        assert_eq!(d.len(), 1);
        assert!((d[0].e_meas - 288.0).abs() < 1e-9);
        assert_eq!(d[0].samples, 288);

        let mut recs = vec![
            MeasurementRecord::new(day.and_hms_opt(12, 0, 0).unwrap(), 800.0, 60.0),
            MeasurementRecord::new(day.succ_opt().unwrap().and_hms_opt(12, 0, 0).unwrap(), 800.0, 60.0),
        ];
        recs[1].quality = crate::ingestion::Quality::LowIrradiance;
        let d = aggregate_daily(&MeasurementSeries::new("p", recs));
        assert_eq!(d.len(), 1);
        assert!((d[0].e_meas - 5.0).abs() < 1e-12);
    }

    #[test]
    fn thirty_minute_groups() {
        let g = group_samples(&sample_series(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 5), GroupingScheme::ThirtyMinGroup).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].n, 6);
        assert_eq!(g[0].range, 5.0);
        assert_eq!(g[0].mean, 3.5);
        // Seven points spill one into the next window, which is then dropped.
        let g = group_samples(&sample_series(&[1.0; 7], 5), GroupingScheme::ThirtyMinGroup).unwrap();
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn daily_group_threshold() {
        let g = group_samples(&sample_series(&[0.5; 100], 1), GroupingScheme::DailyGroup).unwrap();
        assert_eq!((g.len(), g[0].n), (1, 100));
        let g = group_samples(&sample_series(&[0.5; 20], 5), GroupingScheme::DailyGroup).unwrap();
        assert!(g.is_empty());
        let g = group_samples(&sample_series(&[0.5; 25], 5), GroupingScheme::DailyGroup).unwrap();
        assert!(g.is_empty());
        let g = group_samples(&sample_series(&[0.5; 26], 5), GroupingScheme::DailyGroup).unwrap();
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn daily_single_rejects_sample_points() {
        let err = group_samples(&sample_series(&[1.0, 2.0], 5), GroupingScheme::DailySingle).unwrap_err();
        assert!(matches!(err, Error::Misuse(_)));
    }

    #[test]
    fn unity_correction_relative_equals_pr_minus_one() {
        let cfg = PlantConfig::new("p", 80.0);
        let day = NaiveDate::from_ymd_opt(2021, 5, 5).unwrap();
        let recs: Vec<MeasurementRecord> = (0..100)
            .map(|i| {
                let g = 100.0 + 7.0 * i as f64;
                MeasurementRecord::new(
                    day.and_hms_opt(6, 0, 0).unwrap() + Duration::minutes(5 * i),
                    g,
                    0.07 * g + (i as f64 * 0.3).sin(),
                )
            })
            .collect();
        let s = MeasurementSeries::new("p", recs);
        // phi == 1 means expected power P_nom·G/G_STC.
        let pred: Vec<Option<f64>> = s.records.iter().map(|r| Some(cfg.p_nom * r.irradiance / 1000.0)).collect();
        let rel = daily_deviations(&s, &pred, DeviationKind::Relative, &cfg);
        let pr = daily_deviations(&s, &pred, DeviationKind::Pr, &cfg);
        assert!((rel.points[0].value - (pr.points[0].value - 1.0)).abs() < 1e-12);
    }
}
