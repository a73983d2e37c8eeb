//! Statistical process control: estimation of the process mean and
//! standard deviation from training groups, Shewhart and EWMA charts, and
//! the per-day out-of-control fraction.

use std::collections::BTreeMap;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::deviation::{GroupingScheme, SampleGroup};
use crate::error::{Error, Result};

/// Minimum number of training groups for a usable estimate.
pub const MIN_TRAINING_GROUPS: usize = 20;
pub const DEFAULT_LIMIT_WIDTH: f64 = 3.5;
pub const DEFAULT_EWMA_LAMBDA: f64 = 0.2;

/// Unbiasing constants for the range estimator, by sample size.
pub const D_TABLE: [(usize, f64); 5] = [(2, 1.128), (3, 1.693), (4, 2.059), (5, 2.326), (6, 2.534)];

/// Constant for the adjacent-range estimator of individual measurements.
pub const D_ADJACENT: f64 = 1.128;

pub fn d_constant(n: usize) -> Option<f64> {
    D_TABLE.iter().find(|(k, _)| *k == n).map(|(_, d)| *d)
}

/// Large-sample approximation `4(n−1)/(4n−3)` of the s-bar unbiasing constant.
pub fn c_approx(n: f64) -> f64 {
    4.0 * (n - 1.0) / (4.0 * n - 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaEstimator {
    SbarOverC,
    RbarOverD,
    AdjacentRange,
}

impl SigmaEstimator {
    pub fn for_scheme(scheme: GroupingScheme) -> Self {
        match scheme {
            GroupingScheme::FiveMinSingle | GroupingScheme::DailySingle => SigmaEstimator::AdjacentRange,
            GroupingScheme::ThirtyMinGroup => SigmaEstimator::RbarOverD,
            GroupingScheme::DailyGroup => SigmaEstimator::SbarOverC,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessStats {
    pub mu: f64,
    pub sigma: f64,
    pub estimator: SigmaEstimator,
    /// Mean sample size of the training groups.
    pub n_ref: f64,
    pub groups: usize,
    /// Set when the training data has no spread (sigma = 0).
    pub degenerate: bool,
}

/// Grand average of group means and a sigma estimate chosen by scheme:
/// adjacent ranges over consecutive values for single schemes, mean of
/// `R/d(n)` for thirty-minute groups, and `s̄ / c(n̄)` for daily groups.
pub fn estimate_stats(groups: &[SampleGroup], scheme: GroupingScheme) -> Result<ProcessStats> {
    if groups.len() < MIN_TRAINING_GROUPS {
        return Err(Error::InsufficientData(format!(
            "need {MIN_TRAINING_GROUPS} training groups, got {}",
            groups.len()
        )));
    }
    let m = groups.len() as f64;
    let mu = groups.iter().map(|g| g.mean).sum::<f64>() / m;
    let n_ref = groups.iter().map(|g| g.n as f64).sum::<f64>() / m;
    let estimator = SigmaEstimator::for_scheme(scheme);
    let sigma = match estimator {
        SigmaEstimator::AdjacentRange => {
            let sum: f64 = groups.windows(2).map(|w| (w[1].mean - w[0].mean).abs()).sum();
            sum / (m - 1.0) / D_ADJACENT
        }
        SigmaEstimator::RbarOverD => {
            let mut sum = 0.0;
            for g in groups {
                let d = d_constant(g.n).ok_or_else(|| {
                    Error::Misuse(format!("range estimator needs 2 <= n <= 6, got n = {}", g.n))
                })?;
                sum += g.range / d;
            }
            sum / m
        }
        SigmaEstimator::SbarOverC => {
            if let Some(g) = groups.iter().find(|g| g.n < 2) {
                return Err(Error::Misuse(format!("s-bar estimator needs n >= 2, got {}", g.n)));
            }
            let s_bar = groups.iter().map(|g| g.stddev).sum::<f64>() / m;
            s_bar / c_approx(n_ref)
        }
    };
    Ok(ProcessStats {
        mu,
        sigma,
        estimator,
        n_ref,
        groups: groups.len(),
        degenerate: sigma == 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    Shewhart,
    Ewma,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub kind: ChartKind,
    /// Limit width L in sigma units.
    pub limit_width: f64,
    /// EWMA smoothing factor; ignored by Shewhart charts.
    pub lambda: f64,
    pub stats: ProcessStats,
}

impl ChartSpec {
    pub fn shewhart(stats: ProcessStats, limit_width: f64) -> Self {
        Self {
            kind: ChartKind::Shewhart,
            limit_width,
            lambda: 1.0,
            stats,
        }
    }

    pub fn ewma(stats: ProcessStats, limit_width: f64, lambda: f64) -> Self {
        Self {
            kind: ChartKind::Ewma,
            limit_width,
            lambda,
            stats,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.limit_width > 0.0 && self.limit_width.is_finite()) {
            return Err(Error::Config(format!("limit width must be > 0, got {}", self.limit_width)));
        }
        if self.kind == ChartKind::Ewma && !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::Config(format!("EWMA lambda must be in (0, 1], got {}", self.lambda)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlLimits {
    pub ucl: f64,
    pub center: f64,
    pub lcl: f64,
}

/// `μ ± L·σ/√n`.
pub fn shewhart_limits(spec: &ChartSpec, n: usize) -> ControlLimits {
    let half = spec.limit_width * spec.stats.sigma / (n.max(1) as f64).sqrt();
    ControlLimits {
        ucl: spec.stats.mu + half,
        center: spec.stats.mu,
        lcl: spec.stats.mu - half,
    }
}

/// Standard deviation of the EWMA statistic after `t` steps.
pub fn ewma_sigma(sigma0: f64, lambda: f64, t: u32) -> f64 {
    let decay = (1.0 - lambda).powi(2 * t as i32);
    sigma0 * (lambda / (2.0 - lambda) * (1.0 - decay)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartVerdict {
    pub timestamp: NaiveDateTime,
    /// Group mean (Shewhart) or EWMA statistic.
    pub monitored_value: f64,
    pub ucl: f64,
    pub lcl: f64,
    pub out_of_control: bool,
    /// Samples represented by this verdict.
    pub n: usize,
}

impl ChartVerdict {
    fn new(timestamp: NaiveDateTime, value: f64, ucl: f64, lcl: f64, n: usize) -> Self {
        Self {
            timestamp,
            monitored_value: value,
            ucl,
            lcl,
            out_of_control: value > ucl || value < lcl,
            n,
        }
    }

    pub fn day(&self) -> NaiveDate {
        self.timestamp.date()
    }
}

pub fn shewhart_classify(groups: &[SampleGroup], spec: &ChartSpec) -> Vec<ChartVerdict> {
    groups
        .iter()
        .map(|g| {
            let lim = shewhart_limits(spec, g.n);
            ChartVerdict::new(g.window_start, g.mean, lim.ucl, lim.lcl, g.n)
        })
        .collect()
}

/// EWMA chart over group means, starting from `z₀ = μ`. For groups of size
/// n the per-step sigma is `σ/√n`.
pub fn ewma_classify(groups: &[SampleGroup], spec: &ChartSpec) -> Vec<ChartVerdict> {
    let lambda = spec.lambda;
    let mu = spec.stats.mu;
    let mut z = mu;
    groups
        .iter()
        .enumerate()
        .map(|(i, g)| {
            z = lambda * g.mean + (1.0 - lambda) * z;
            let sigma0 = spec.stats.sigma / (g.n.max(1) as f64).sqrt();
            let half = spec.limit_width * ewma_sigma(sigma0, lambda, (i + 1) as u32);
            ChartVerdict::new(g.window_start, z, mu + half, mu - half, g.n)
        })
        .collect()
}

pub fn classify(groups: &[SampleGroup], spec: &ChartSpec) -> Vec<ChartVerdict> {
    match spec.kind {
        ChartKind::Shewhart => shewhart_classify(groups, spec),
        ChartKind::Ewma => ewma_classify(groups, spec),
    }
}

/// Per day, the share of daylight samples covered by out-of-control
/// verdicts. Days without daylight samples or without any verdict are
/// absent.
pub fn daily_out_fraction(
    verdicts: &[ChartVerdict],
    daylight_counts: &BTreeMap<NaiveDate, usize>,
) -> BTreeMap<NaiveDate, f64> {
    let mut out_samples: BTreeMap<NaiveDate, usize> = BTreeMap::new();
    for v in verdicts {
        *out_samples.entry(v.day()).or_insert(0) += if v.out_of_control { v.n } else { 0 };
    }
    out_samples
        .into_iter()
        .filter_map(|(day, out)| {
            let total = *daylight_counts.get(&day)?;
            (total > 0).then(|| (day, (out as f64 / total as f64).min(1.0)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Duration;

    fn ts(i: usize) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2022, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
            + Duration::minutes(5 * i as i64)
    }

    fn singles(values: &[f64]) -> Vec<SampleGroup> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| SampleGroup::from_values(ts(i), vec![v]))
            .collect()
    }

    fn stats(mu: f64, sigma: f64) -> ProcessStats {
        ProcessStats {
            mu,
            sigma,
            estimator: SigmaEstimator::AdjacentRange,
            n_ref: 1.0,
            groups: 100,
            degenerate: sigma == 0.0,
        }
    }

    #[test]
    fn d_table_values() {
        assert_eq!(d_constant(2), Some(1.128));
        assert_eq!(d_constant(6), Some(2.534));
        assert_eq!(d_constant(7), None);
        assert!((c_approx(30.0) - 116.0 / 117.0).abs() < 1e-15);
    }

    #[test]
    fn too_few_groups() {
        let err = estimate_stats(&singles(&[1.0; 19]), GroupingScheme::FiveMinSingle).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn constant_training_is_degenerate() {
        let s = estimate_stats(&singles(&[0.3; 40]), GroupingScheme::DailySingle).unwrap();
        assert_eq!(s.sigma, 0.0);
        assert!(s.degenerate);
        assert!((s.mu - 0.3).abs() < 1e-15);
    }

    #[test]
    fn adjacent_range_hand_value() {
        // ranges 1, 2, 1, ... mean 4/3 over three diffs.
        let vals: Vec<f64> = [0.0, 1.0, -1.0, 0.0].iter().cycle().take(21).copied().collect();
        let s = estimate_stats(&singles(&vals), GroupingScheme::FiveMinSingle).unwrap();
        let diffs: f64 = vals.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        assert!((s.sigma - diffs / 20.0 / 1.128).abs() < 1e-15);
    }

    #[test]
    fn shewhart_limit_values() {
        let spec = ChartSpec::shewhart(stats(0.0, 1.0), 3.5);
        let l = shewhart_limits(&spec, 1);
        assert_eq!((l.ucl, l.center, l.lcl), (3.5, 0.0, -3.5));
        let l = shewhart_limits(&spec, 4);
        assert_eq!((l.ucl, l.lcl), (1.75, -1.75));
        let flat = ChartSpec::shewhart(stats(0.2, 0.0), 3.5);
        let l = shewhart_limits(&flat, 1);
        assert_eq!((l.ucl, l.lcl), (0.2, 0.2));
        let v = shewhart_classify(&singles(&[0.2, 0.2000001]), &flat);
        assert_eq!((v[0].out_of_control, v[1].out_of_control), (false, true));
    }

    #[test]
    fn shewhart_verdicts() {
        let spec = ChartSpec::shewhart(stats(1.0, 0.5), 3.5);
        let v = shewhart_classify(&singles(&[1.0, 1.0 - 4.0 * 0.5]), &spec);
        assert!(!v[0].out_of_control);
        assert!(v[1].out_of_control);
    }

    #[test]
    fn ewma_steady_state_and_constant_input() {
        let s = ewma_sigma(1.0, 0.2, 10_000);
        assert!((s - 1.0 / 3.0).abs() < 1e-12);
        let spec = ChartSpec::ewma(stats(0.4, 0.1), 3.5, 0.2);
        let v = ewma_classify(&singles(&[0.4; 500]), &spec);
        assert!(v.iter().all(|x| (x.monitored_value - 0.4).abs() < 1e-15 && !x.out_of_control));
    }

    #[test]
    fn ewma_lambda_one_matches_shewhart() {
        let vals: Vec<f64> = (0..200).map(|i| ((i * 37) % 17) as f64 * 0.3 - 2.5).collect();
        let st = stats(0.0, 0.7);
        let e = ewma_classify(&singles(&vals), &ChartSpec::ewma(st, 3.5, 1.0));
        let s = shewhart_classify(&singles(&vals), &ChartSpec::shewhart(st, 3.5));
        assert_eq!(e, s);
    }

    #[test]
    fn spec_validation() {
        assert!(ChartSpec::ewma(stats(0.0, 1.0), 3.5, 0.0).validate().is_err());
        assert!(ChartSpec::ewma(stats(0.0, 1.0), 3.5, 1.0).validate().is_ok());
        assert!(ChartSpec::shewhart(stats(0.0, 1.0), 0.0).validate().is_err());
    }

    #[test]
    fn out_fraction_values() {
        let day = NaiveDate::from_ymd_opt(2022, 1, 1).unwrap();
        let verdict = |i: usize, out: bool| ChartVerdict {
            timestamp: ts(i),
            monitored_value: 0.0,
            ucl: 1.0,
            lcl: -1.0,
            out_of_control: out,
            n: 1,
        };
        let mut counts = BTreeMap::new();
        counts.insert(day, 96);
        let v: Vec<ChartVerdict> = (0..96).map(|i| verdict(i, i < 12)).collect();
        assert_eq!(daily_out_fraction(&v, &counts)[&day], 0.125);
        counts.insert(day, 100);
        let v: Vec<ChartVerdict> = (0..100).map(|i| verdict(i, false)).collect();
        assert_eq!(daily_out_fraction(&v, &counts)[&day], 0.0);
        let v: Vec<ChartVerdict> = (0..100).map(|i| verdict(i, true)).collect();
        assert_eq!(daily_out_fraction(&v, &counts)[&day], 1.0);
        assert!(daily_out_fraction(&v, &BTreeMap::new()).is_empty());
    }
}
