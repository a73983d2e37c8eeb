//! CSV exports of intermediate series.

use std::io::Write;

use crate::clustering::ClusterResult;
use crate::deviation::{DeviationSeries, SampleGroup};
use crate::energy_loss::DailyLoss;
use crate::error::{Error, Result};
use crate::ingestion::format_timestamp;
use crate::spc::ChartVerdict;

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::Csv(e.into()))
}

/// `timestamp,kind,value,filtered`; filtered slots have an empty value.
pub fn write_deviations<W: Write>(writer: W, series: &DeviationSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "kind", "value", "filtered"])?;
    let mut rows: Vec<(chrono::NaiveDateTime, Option<f64>)> = series
        .points
        .iter()
        .map(|p| (p.timestamp, Some(p.value)))
        .chain(series.filtered.iter().map(|t| (*t, None)))
        .collect();
    rows.sort_by_key(|r| r.0);
    for (ts, value) in rows {
        w.write_record([
            format_timestamp(&ts),
            series.kind.label().to_string(),
            value.map(|v| v.to_string()).unwrap_or_default(),
            value.is_none().to_string(),
        ])?;
    }
    finish(w)
}

/// `timestamp,value,ucl,lcl,out`.
pub fn write_verdicts<W: Write>(writer: W, verdicts: &[ChartVerdict]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "value", "ucl", "lcl", "out"])?;
    for v in verdicts {
        w.write_record([
            format_timestamp(&v.timestamp),
            v.monitored_value.to_string(),
            v.ucl.to_string(),
            v.lcl.to_string(),
            v.out_of_control.to_string(),
        ])?;
    }
    finish(w)
}

/// `timestamp,value,cluster,faulty`, one row per clustered group.
pub fn write_clusters<W: Write>(writer: W, groups: &[SampleGroup], result: &ClusterResult) -> Result<()> {
    if groups.len() != result.labels.len() {
        return Err(Error::Misuse(format!(
            "{} groups but {} cluster labels",
            groups.len(),
            result.labels.len()
        )));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "value", "cluster", "faulty"])?;
    for ((g, label), faulty) in groups.iter().zip(&result.labels).zip(&result.faulty) {
        w.write_record([
            format_timestamp(&g.window_start),
            g.mean.to_string(),
            label.to_string(),
            faulty.to_string(),
        ])?;
    }
    finish(w)
}

/// `date,e_nom,e_exp,e_loss,se_loss,pl`.
pub fn write_daily_loss<W: Write>(writer: W, losses: &[DailyLoss]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "e_nom", "e_exp", "e_loss", "se_loss", "pl"])?;
    for l in losses {
        w.write_record([
            l.day.format("%Y-%m-%d").to_string(),
            l.e_nom.to_string(),
            l.e_exp.to_string(),
            l.e_loss.to_string(),
            l.se_loss.to_string(),
            l.pl.to_string(),
        ])?;
    }
    finish(w)
}
