//! Measurement and ticket ingestion.
//!
//! Measurement files are UTF-8 CSV with the header
//! `timestamp,irradiance_wm2,ac_power_kw`, one row per 5-minute slot.
//! Ticket files are CSV with the header `plant_id,date`. Plant
//! configuration is a small TOML document whose keys mirror
//! [`PlantConfig`].

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Length of one monitoring slot.
pub const SLOT_MINUTES: i64 = 5;
/// Length of one monitoring slot in hours.
pub const SLOT_HOURS: f64 = SLOT_MINUTES as f64 / 60.0;
/// Irradiance at standard test conditions, W/m².
pub const G_STC: f64 = 1000.0;

pub const MEASUREMENT_HEADER: [&str; 3] = ["timestamp", "irradiance_wm2", "ac_power_kw"];
pub const TICKET_HEADER: [&str; 2] = ["plant_id", "date"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quality {
    Valid,
    OutOfPhysicalRange,
    Night,
    LowIrradiance,
    Missing,
}

/// One 5-minute averaged sample of plane-of-array irradiance (W/m²) and AC
/// power (kW).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementRecord {
    pub timestamp: NaiveDateTime,
    pub irradiance: f64,
    pub ac_power: f64,
    pub quality: Quality,
}

impl MeasurementRecord {
    pub fn new(timestamp: NaiveDateTime, irradiance: f64, ac_power: f64) -> Self {
        let quality = if irradiance.is_finite() && ac_power.is_finite() {
            Quality::Valid
        } else {
            Quality::Missing
        };
        Self {
            timestamp,
            irradiance,
            ac_power,
            quality,
        }
    }

    pub fn day(&self) -> NaiveDate {
        self.timestamp.date()
    }

    pub fn is_valid(&self) -> bool {
        self.quality == Quality::Valid
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementSeries {
    pub plant_id: String,
    pub records: Vec<MeasurementRecord>,
}

impl MeasurementSeries {
    pub fn new(plant_id: impl Into<String>, records: Vec<MeasurementRecord>) -> Self {
        Self {
            plant_id: plant_id.into(),
            records,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn valid(&self) -> impl Iterator<Item = &MeasurementRecord> + '_ {
        self.records.iter().filter(|r| r.is_valid())
    }

    pub fn valid_count(&self) -> usize {
        self.valid().count()
    }

    pub fn first_day(&self) -> Option<NaiveDate> {
        self.records.first().map(|r| r.day())
    }

    pub fn last_day(&self) -> Option<NaiveDate> {
        self.records.last().map(|r| r.day())
    }

    /// Number of calendar days from the first to the last record, inclusive.
    pub fn span_days(&self) -> i64 {
        match (self.first_day(), self.last_day()) {
            (Some(a), Some(b)) => (b - a).num_days() + 1,
            _ => 0,
        }
    }

    /// Distinct calendar days present in the series, ascending.
    pub fn days(&self) -> Vec<NaiveDate> {
        let mut days: Vec<NaiveDate> = self.records.iter().map(|r| r.day()).collect();
        days.dedup();
        days
    }
}

/// Inclusive bounds for feasible measurement values. `power_max` defaults
/// to 1.2 × P_nom when absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalLimits {
    #[serde(default = "default_irradiance_min")]
    pub irradiance_min: f64,
    #[serde(default = "default_irradiance_max")]
    pub irradiance_max: f64,
    #[serde(default)]
    pub power_min: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_max: Option<f64>,
}

fn default_irradiance_min() -> f64 {
    0.0
}
fn default_irradiance_max() -> f64 {
    1600.0
}

impl Default for PhysicalLimits {
    fn default() -> Self {
        Self {
            irradiance_min: default_irradiance_min(),
            irradiance_max: default_irradiance_max(),
            power_min: 0.0,
            power_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub plant_id: String,
    /// Nominal (installed) power, kW.
    pub p_nom: f64,
    #[serde(default = "default_g_stc")]
    pub g_stc: f64,
    #[serde(default = "default_low_irradiance_cutoff")]
    pub low_irradiance_cutoff: f64,
    /// Fraction of P_nom below which relative deviations are filtered.
    #[serde(default = "default_relative_floor")]
    pub relative_denominator_floor: f64,
    #[serde(default = "default_training_days")]
    pub training_days: u32,
    #[serde(default)]
    pub physical_limits: PhysicalLimits,
}

fn default_g_stc() -> f64 {
    G_STC
}
fn default_low_irradiance_cutoff() -> f64 {
    50.0
}
fn default_relative_floor() -> f64 {
    0.05
}
fn default_training_days() -> u32 {
    365
}

impl PlantConfig {
    pub fn new(plant_id: impl Into<String>, p_nom: f64) -> Self {
        Self {
            plant_id: plant_id.into(),
            p_nom,
            g_stc: G_STC,
            low_irradiance_cutoff: default_low_irradiance_cutoff(),
            relative_denominator_floor: default_relative_floor(),
            training_days: default_training_days(),
            physical_limits: PhysicalLimits::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.plant_id.trim().is_empty() {
            return Err(Error::Config("plant_id must not be empty".into()));
        }
        if !(self.p_nom.is_finite() && self.p_nom > 0.0) {
            return Err(Error::Config(format!("p_nom must be > 0, got {}", self.p_nom)));
        }
        if self.g_stc != G_STC {
            return Err(Error::Config(format!("g_stc must be 1000, got {}", self.g_stc)));
        }
        let floor = self.relative_denominator_floor;
        if !(floor > 0.0 && floor < 1.0) {
            return Err(Error::Config(format!(
                "relative_denominator_floor must be in (0, 1), got {floor}"
            )));
        }
        if !self.low_irradiance_cutoff.is_finite() || self.low_irradiance_cutoff < 0.0 {
            return Err(Error::Config("low_irradiance_cutoff must be >= 0".into()));
        }
        if self.training_days == 0 {
            return Err(Error::Config("training_days must be >= 1".into()));
        }
        let lim = &self.physical_limits;
        let power_max = self.power_max();
        if !(lim.irradiance_min.is_finite()
            && lim.irradiance_max.is_finite()
            && lim.irradiance_min < lim.irradiance_max)
        {
            return Err(Error::Config("irradiance limits must satisfy min < max".into()));
        }
        if !(lim.power_min.is_finite() && power_max.is_finite() && lim.power_min < power_max) {
            return Err(Error::Config("power limits must satisfy min < max".into()));
        }
        Ok(())
    }

    pub fn power_max(&self) -> f64 {
        self.physical_limits.power_max.unwrap_or(1.2 * self.p_nom)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: PlantConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("plant config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

/// Counters collected while reading a measurement file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestWarnings {
    pub duplicate_timestamps: usize,
    /// Rows dropped because their timestamp could not be read.
    pub unreadable_rows: usize,
    pub missing_values: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub series: MeasurementSeries,
    pub warnings: IngestWarnings,
}

pub fn parse_timestamp(text: &str) -> Option<NaiveDateTime> {
    let text = text.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Some(dt.naive_utc());
    }
    NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(text, "%Y-%m-%d %H:%M:%S"))
        .ok()
}

pub fn format_timestamp(ts: &NaiveDateTime) -> String {
    ts.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

fn parse_value(field: Option<&[u8]>) -> f64 {
    field
        .and_then(|b| std::str::from_utf8(b).ok())
        .and_then(|s| s.trim().parse::<f64>().ok())
        .unwrap_or(f64::NAN)
}

fn header_matches(record: &csv::ByteRecord, expected: &[&str]) -> bool {
    record.len() == expected.len()
        && record
            .iter()
            .zip(expected)
            .all(|(field, want)| std::str::from_utf8(field).map(str::trim) == Ok(*want))
}

pub fn parse_measurements(path: impl AsRef<Path>, config: &PlantConfig) -> Result<Ingested> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_measurements_reader(file, config)
}

/// Reads a measurement CSV. Rows with unreadable values are kept as
/// `Missing`; rows with an unreadable timestamp are dropped and counted.
/// The result is sorted by timestamp with the first occurrence of each
/// timestamp retained.
pub fn parse_measurements_reader<R: Read>(reader: R, config: &PlantConfig) -> Result<Ingested> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows = csv.byte_records();
    let header = match rows.next() {
        None => return Err(Error::EmptyInput("measurement file has no content".into())),
        Some(h) => h?,
    };
    if !header_matches(&header, &MEASUREMENT_HEADER) {
        return Err(Error::Schema(format!(
            "expected header `{}`",
            MEASUREMENT_HEADER.join(",")
        )));
    }

    let mut warnings = IngestWarnings::default();
    let mut records = Vec::new();
    for row in rows {
        let row = match row {
            Ok(r) => r,
            Err(_) => {
                warnings.unreadable_rows += 1;
                continue;
            }
        };
        let Some(ts) = row
            .get(0)
            .and_then(|b| std::str::from_utf8(b).ok())
            .and_then(parse_timestamp)
        else {
            warnings.unreadable_rows += 1;
            continue;
        };
        let record = MeasurementRecord::new(ts, parse_value(row.get(1)), parse_value(row.get(2)));
        if record.quality == Quality::Missing {
            warnings.missing_values += 1;
        }
        records.push(record);
    }
    if records.is_empty() && warnings.unreadable_rows == 0 {
        return Err(Error::EmptyInput("measurement file has no data rows".into()));
    }

    // Stable sort keeps file order among equal timestamps.
    records.sort_by_key(|r| r.timestamp);
    let before = records.len();
    records.dedup_by_key(|r| r.timestamp);
    warnings.duplicate_timestamps = before - records.len();

    Ok(Ingested {
        series: MeasurementSeries::new(config.plant_id.clone(), records),
        warnings,
    })
}

pub fn write_measurements<W: Write>(writer: W, series: &MeasurementSeries) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(MEASUREMENT_HEADER)?;
    for r in &series.records {
        csv.write_record([
            format_timestamp(&r.timestamp),
            r.irradiance.to_string(),
            r.ac_power.to_string(),
        ])?;
    }
    csv.flush().map_err(|e| Error::io("<measurement writer>", e))?;
    Ok(())
}

fn classify(record: &MeasurementRecord, config: &PlantConfig) -> Quality {
    if record.quality == Quality::Missing
        || !record.irradiance.is_finite()
        || !record.ac_power.is_finite()
    {
        return Quality::Missing;
    }
    let lim = &config.physical_limits;
    let g = record.irradiance;
    let p = record.ac_power;
    if g < lim.irradiance_min || g > lim.irradiance_max || p < lim.power_min || p > config.power_max()
    {
        Quality::OutOfPhysicalRange
    } else if g <= 0.0 {
        Quality::Night
    } else if g < config.low_irradiance_cutoff {
        Quality::LowIrradiance
    } else {
        Quality::Valid
    }
}

/// Re-derives the quality flag of every record. Missing records stay
/// missing; all others are flagged in the order out-of-range, night, low
/// irradiance, valid.
pub fn apply_quality_filter(series: &MeasurementSeries, config: &PlantConfig) -> MeasurementSeries {
    let records = series
        .records
        .iter()
        .map(|r| MeasurementRecord {
            quality: classify(r, config),
            ..*r
        })
        .collect();
    MeasurementSeries::new(series.plant_id.clone(), records)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityCounts {
    pub valid: usize,
    pub out_of_physical_range: usize,
    pub night: usize,
    pub low_irradiance: usize,
    pub missing: usize,
}

pub fn quality_counts(series: &MeasurementSeries) -> QualityCounts {
    let mut counts = QualityCounts::default();
    for r in &series.records {
        match r.quality {
            Quality::Valid => counts.valid += 1,
            Quality::OutOfPhysicalRange => counts.out_of_physical_range += 1,
            Quality::Night => counts.night += 1,
            Quality::LowIrradiance => counts.low_irradiance += 1,
            Quality::Missing => counts.missing += 1,
        }
    }
    counts
}

/// Splits off the first `training_days` calendar days (counted from the
/// first record's date) as the training partition.
pub fn split_train_eval(
    series: &MeasurementSeries,
    config: &PlantConfig,
) -> Result<(MeasurementSeries, MeasurementSeries)> {
    let first = series
        .first_day()
        .ok_or_else(|| Error::InsufficientData("empty series".into()))?;
    let span = series.span_days();
    if span <= i64::from(config.training_days) {
        return Err(Error::InsufficientData(format!(
            "series spans {span} days, need more than {} for training plus evaluation",
            config.training_days
        )));
    }
    let boundary = first + Duration::days(i64::from(config.training_days));
    let cut = series.records.partition_point(|r| r.day() < boundary);
    let train = MeasurementSeries::new(series.plant_id.clone(), series.records[..cut].to_vec());
    let eval = MeasurementSeries::new(series.plant_id.clone(), series.records[cut..].to_vec());
    Ok((train, eval))
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TicketCalendar {
    pub plant_id: String,
    pub ticketed_days: BTreeSet<NaiveDate>,
}

impl TicketCalendar {
    pub fn new(plant_id: impl Into<String>) -> Self {
        Self {
            plant_id: plant_id.into(),
            ticketed_days: BTreeSet::new(),
        }
    }

    pub fn contains(&self, day: &NaiveDate) -> bool {
        self.ticketed_days.contains(day)
    }

    pub fn insert(&mut self, day: NaiveDate) -> bool {
        self.ticketed_days.insert(day)
    }

    pub fn len(&self) -> usize {
        self.ticketed_days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticketed_days.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &NaiveDate> + '_ {
        self.ticketed_days.iter()
    }
}

/// Ticket calendars for a whole portfolio, keyed by plant id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TicketBook {
    pub calendars: BTreeMap<String, TicketCalendar>,
}

impl TicketBook {
    /// Calendar for `plant_id`; plants without tickets get an empty one.
    pub fn calendar(&self, plant_id: &str) -> TicketCalendar {
        self.calendars
            .get(plant_id)
            .cloned()
            .unwrap_or_else(|| TicketCalendar::new(plant_id))
    }

    pub fn insert(&mut self, calendar: TicketCalendar) {
        let entry = self
            .calendars
            .entry(calendar.plant_id.clone())
            .or_insert_with(|| TicketCalendar::new(calendar.plant_id.clone()));
        entry.ticketed_days.extend(calendar.ticketed_days);
    }

    pub fn total_days(&self) -> usize {
        self.calendars.values().map(TicketCalendar::len).sum()
    }
}

pub fn parse_tickets(path: impl AsRef<Path>) -> Result<TicketBook> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_tickets_reader(file)
}

/// Reads a ticket CSV. An empty file is an empty book; otherwise the
/// `plant_id,date` header is required and every row must carry an ISO date.
pub fn parse_tickets_reader<R: Read>(reader: R) -> Result<TicketBook> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut book = TicketBook::default();
    let mut rows = csv.byte_records();
    match rows.next() {
        None => return Ok(book),
        Some(header) => {
            if !header_matches(&header?, &TICKET_HEADER) {
                return Err(Error::Schema(format!(
                    "expected header `{}`",
                    TICKET_HEADER.join(",")
                )));
            }
        }
    }
    for row in rows {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| row.get(i).and_then(|b| std::str::from_utf8(b).ok()).map(str::trim);
        let plant = match field(0) {
            Some(p) if !p.is_empty() => p.to_string(),
            _ => {
                return Err(Error::Row {
                    line,
                    message: "missing plant_id".into(),
                })
            }
        };
        let date = field(1)
            .and_then(|d| NaiveDate::parse_from_str(d, "%Y-%m-%d").ok())
            .ok_or_else(|| Error::Row {
                line,
                message: "unparseable date".into(),
            })?;
        book.calendars
            .entry(plant.clone())
            .or_insert_with(|| TicketCalendar::new(plant))
            .insert(date);
    }
    Ok(book)
}

pub fn write_tickets<W: Write>(writer: W, book: &TicketBook) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    if book.total_days() == 0 {
        csv.flush().map_err(|e| Error::io("<ticket writer>", e))?;
        return Ok(());
    }
    csv.write_record(TICKET_HEADER)?;
    for cal in book.calendars.values() {
        for day in &cal.ticketed_days {
            csv.write_record([cal.plant_id.as_str(), &day.format("%Y-%m-%d").to_string()])?;
        }
    }
    csv.flush().map_err(|e| Error::io("<ticket writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveTime;

    fn cfg() -> PlantConfig {
        PlantConfig::new("p1", 100.0)
    }

    fn ts(day: u32, h: u32, m: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2020, 1, day)
            .unwrap()
            .and_time(NaiveTime::from_hms_opt(h, m, 0).unwrap())
    }

    fn series_of_days(days: i64) -> MeasurementSeries {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let records = (0..days)
            .map(|d| {
                let t = (start + Duration::days(d)).and_hms_opt(12, 0, 0).unwrap();
                MeasurementRecord::new(t, 500.0, 50.0)
            })
            .collect();
        MeasurementSeries::new("p1", records)
    }

    #[test]
    fn three_valid_rows() {
        let text = "timestamp,irradiance_wm2,ac_power_kw\n\
                    2020-01-01T10:00:00Z,500,50\n\
                    2020-01-01T10:05:00Z,510,51\n\
                    2020-01-01T10:10:00Z,520,52\n";
        let got = parse_measurements_reader(text.as_bytes(), &cfg()).unwrap();
        assert_eq!(got.series.len(), 3);
        assert!(got.series.records.iter().all(|r| r.quality == Quality::Valid));
        assert_eq!(got.series.records[1].irradiance, 510.0);
    }

    #[test]
    fn nan_power_is_missing() {
        let text = "timestamp,irradiance_wm2,ac_power_kw\n2020-01-01T10:00:00Z,500,NaN\n";
        let got = parse_measurements_reader(text.as_bytes(), &cfg()).unwrap();
        assert_eq!(got.series.records[0].quality, Quality::Missing);
        assert_eq!(got.warnings.missing_values, 1);
    }

    #[test]
    fn duplicate_timestamp_keeps_first() {
        let text = "timestamp,irradiance_wm2,ac_power_kw\n\
                    2020-01-01T10:05:00Z,600,60\n\
                    2020-01-01T10:00:00Z,500,50\n\
                    2020-01-01T10:05:00Z,700,70\n";
        let got = parse_measurements_reader(text.as_bytes(), &cfg()).unwrap();
        assert_eq!(got.series.len(), 2);
        assert_eq!(got.warnings.duplicate_timestamps, 1);
        assert_eq!(got.series.records[0].timestamp, ts(1, 10, 0));
        assert_eq!(got.series.records[1].irradiance, 600.0);
    }

    #[test]
    fn header_and_empty_errors() {
        let err = parse_measurements_reader("time,g,p\n".as_bytes(), &cfg()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
        let err = parse_measurements_reader("".as_bytes(), &cfg()).unwrap_err();
        assert!(matches!(err, Error::EmptyInput(_)));
    }

    #[test]
    fn unreadable_timestamp_dropped() {
        let text = "timestamp,irradiance_wm2,ac_power_kw\nyesterday,1,2\n2020-01-01 10:00:00,5,abc\n";
        let got = parse_measurements_reader(text.as_bytes(), &cfg()).unwrap();
        assert_eq!(got.warnings.unreadable_rows, 1);
        assert_eq!(got.series.len(), 1);
        assert_eq!(got.series.records[0].quality, Quality::Missing);
    }

    #[test]
    fn quality_flags() {
        let c = cfg();
        let s = MeasurementSeries::new(
            "p1",
            vec![
                MeasurementRecord::new(ts(1, 9, 0), 49.0, 1.0),
                MeasurementRecord::new(ts(1, 9, 5), 2000.0, 10.0),
                MeasurementRecord::new(ts(1, 9, 10), 0.0, 0.0),
                MeasurementRecord::new(ts(1, 9, 15), 500.0, 130.0),
                MeasurementRecord::new(ts(1, 9, 20), 500.0, 50.0),
                MeasurementRecord::new(ts(1, 9, 25), f64::NAN, 50.0),
            ],
        );
        let f = apply_quality_filter(&s, &c);
        let q: Vec<Quality> = f.records.iter().map(|r| r.quality).collect();
        assert_eq!(
            q,
            vec![
                Quality::LowIrradiance,
                Quality::OutOfPhysicalRange,
                Quality::Night,
                Quality::OutOfPhysicalRange,
                Quality::Valid,
                Quality::Missing,
            ]
        );
    }

    #[test]
    fn all_valid_day_has_no_flags() {
        let s = series_of_days(3);
        let f = apply_quality_filter(&s, &cfg());
        assert_eq!(quality_counts(&f).valid, 3);
    }

    #[test]
    fn split_sizes() {
        let c = cfg();
        let (train, eval) = split_train_eval(&series_of_days(400), &c).unwrap();
        assert_eq!(train.span_days(), 365);
        assert_eq!(eval.span_days(), 35);
        let (train, eval) = split_train_eval(&series_of_days(730), &c).unwrap();
        assert_eq!(train.days().len(), 365);
        assert_eq!(eval.days().len(), 365);
        let err = split_train_eval(&series_of_days(365), &c).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn tickets_set_semantics() {
        let text = "plant_id,date\np1,2020-03-02\np1,2020-01-05\np1,2020-03-02\n";
        let book = parse_tickets_reader(text.as_bytes()).unwrap();
        let cal = book.calendar("p1");
        assert_eq!(cal.len(), 2);
        let days: Vec<_> = cal.iter().copied().collect();
        assert!(days.windows(2).all(|w| w[0] < w[1]));
        assert!(parse_tickets_reader("".as_bytes()).unwrap().calendars.is_empty());
        assert!(book.calendar("other").is_empty());
    }

    #[test]
    fn ticket_row_error_has_line() {
        let text = "plant_id,date\np1,2020-01-01\np1,01/02/2020\n";
        match parse_tickets_reader(text.as_bytes()).unwrap_err() {
            Error::Row { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn config_roundtrip_and_validation() {
        let mut c = cfg();
        c.physical_limits.power_max = Some(130.0);
        let back = PlantConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
        let minimal = PlantConfig::from_toml_str("plant_id = \"a\"\np_nom = 55.0\n").unwrap();
        assert_eq!(minimal.training_days, 365);
        assert_eq!(minimal.power_max(), 66.0);
        assert!(PlantConfig::from_toml_str("plant_id = \"a\"\np_nom = -1.0\n").is_err());
        assert!(PlantConfig::from_toml_str("plant_id = \"a\"\np_nom = 1.0\ng_stc = 900.0\n").is_err());
        assert!(PlantConfig::from_toml_str("plant_id = \"a\"\np_nom = 1.0\nbogus = 1\n").is_err());
    }
}
