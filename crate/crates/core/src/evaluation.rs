//! Scoring daily alerts against the ticket calendar.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::energy_loss::DailyLoss;
use crate::error::{Error, Result};
use crate::ingestion::TicketCalendar;
use crate::pipeline::DetectorConfig;
use crate::spc::ChartVerdict;

/// Threshold attached to the closing (1, 1) ROC point, where every day alerts.
pub const ALERT_ALL_THRESHOLD: f64 = -1.0;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DailyAlerts {
    pub source: String,
    pub alerts: BTreeMap<NaiveDate, bool>,
}

impl DailyAlerts {
    pub fn alert_count(&self) -> usize {
        self.alerts.values().filter(|&&a| a).count()
    }
}

/// A day alerts when its fraction is strictly above `threshold`.
pub fn alerts_from_fractions(fractions: &BTreeMap<NaiveDate, f64>, threshold: f64, source: &str) -> DailyAlerts {
    DailyAlerts {
        source: source.to_string(),
        alerts: fractions.iter().map(|(d, f)| (*d, *f > threshold)).collect(),
    }
}

/// Daily chart verdicts become alerts directly. Several verdicts on one day
/// alert if any is out of control.
pub fn alerts_from_verdicts(verdicts: &[ChartVerdict], source: &str) -> DailyAlerts {
    let mut alerts = BTreeMap::new();
    for v in verdicts {
        *alerts.entry(v.day()).or_insert(false) |= v.out_of_control;
    }
    DailyAlerts {
        source: source.to_string(),
        alerts,
    }
}

/// Daily cluster labels (one point per day) become alerts directly.
pub fn alerts_from_labels(days: &[NaiveDate], faulty: &[bool], source: &str) -> DailyAlerts {
    let mut alerts = BTreeMap::new();
    for (d, f) in days.iter().zip(faulty) {
        *alerts.entry(*d).or_insert(false) |= *f;
    }
    DailyAlerts {
        source: source.to_string(),
        alerts,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = ConfusionCounts;
    fn add(self, o: Self) -> Self {
        ConfusionCounts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ConfusionCounts::default(), |a, b| a + b)
    }
}

/// Confusion counts over the alerted days that fall in `eval_days`
/// (inclusive range; `None` uses every day in `alerts`).
pub fn confusion(
    alerts: &DailyAlerts,
    tickets: &TicketCalendar,
    eval_days: Option<(NaiveDate, NaiveDate)>,
) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for (day, &alert) in &alerts.alerts {
        if let Some((lo, hi)) = eval_days {
            if *day < lo || *day > hi {
                continue;
            }
        }
        match (tickets.contains(day), alert) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// `(sensitivity, specificity)`; a rate with an empty denominator is `None`.
pub fn rates(c: &ConfusionCounts) -> (Option<f64>, Option<f64>) {
    (ratio(c.tp, c.tp + c.fn_), ratio(c.tn, c.tn + c.fp))
}

/// Sums of SE_loss over ticketed days that alerted (TP) and did not (FN).
pub fn relevance_sums(alerts: &DailyAlerts, tickets: &TicketCalendar, losses: &[DailyLoss]) -> (f64, f64) {
    let mut tp_rel = 0.0;
    let mut fn_rel = 0.0;
    for l in losses {
        if !tickets.contains(&l.day) {
            continue;
        }
        match alerts.alerts.get(&l.day) {
            Some(true) => tp_rel += l.se_loss,
            Some(false) => fn_rel += l.se_loss,
            None => {}
        }
    }
    (tp_rel, fn_rel)
}

/// `TP_rel / (TP_rel + FN_rel)`, `None` when both sums are zero.
pub fn weighted_sensitivity(alerts: &DailyAlerts, tickets: &TicketCalendar, losses: &[DailyLoss]) -> Option<f64> {
    let (tp, fn_) = relevance_sums(alerts, tickets, losses);
    (tp + fn_ > 0.0).then(|| tp / (tp + fn_))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC over `(fraction, ticketed)` day observations. Thresholds are 1, every
/// distinct fraction value, and 0, visited in descending order; the curve
/// is closed at (1, 1).
pub fn roc_from_observations(obs: &[(f64, bool)]) -> Result<RocCurve> {
    let positives = obs.iter().filter(|(_, t)| *t).count();
    let negatives = obs.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateRoc(format!(
            "{positives} ticketed and {negatives} clean days"
        )));
    }
    let mut sorted: Vec<(f64, bool)> = obs.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut thresholds: Vec<f64> = sorted.iter().map(|(f, _)| *f).collect();
    thresholds.extend([0.0, 1.0]);
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();

    let mut points: Vec<RocPoint> = Vec::with_capacity(thresholds.len() + 1);
    let (mut tp, mut fp, mut i) = (0usize, 0usize, 0usize);
    for thr in thresholds {
        while i < sorted.len() && sorted[i].0 > thr {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let p = RocPoint {
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
            threshold: thr,
        };
        if points.last().is_none_or(|q| q.fpr != p.fpr || q.tpr != p.tpr) {
            points.push(p);
        }
    }
    if points.last().is_none_or(|q| q.fpr != 1.0 || q.tpr != 1.0) {
        points.push(RocPoint {
            fpr: 1.0,
            tpr: 1.0,
            threshold: ALERT_ALL_THRESHOLD,
        });
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}

/// ROC for one plant's daily fractions against its ticket calendar.
pub fn roc(fractions: &BTreeMap<NaiveDate, f64>, tickets: &TicketCalendar) -> Result<RocCurve> {
    let obs: Vec<(f64, bool)> = fractions.iter().map(|(d, f)| (*f, tickets.contains(d))).collect();
    roc_from_observations(&obs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YoudenChoice {
    pub threshold: f64,
    pub j: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// Threshold in [0, 1] maximising `J = TPR − FPR`; ties go to the larger
/// threshold.
pub fn youden_optimal(curve: &RocCurve) -> YoudenChoice {
    let mut best: Option<YoudenChoice> = None;
    for p in curve.points.iter().filter(|p| (0.0..=1.0).contains(&p.threshold)) {
        let j = p.tpr - p.fpr;
        let better = match best {
            None => true,
            Some(b) => j > b.j || (j == b.j && p.threshold > b.threshold),
        };
        if better {
            best = Some(YoudenChoice {
                threshold: p.threshold,
                j,
                tpr: p.tpr,
                fpr: p.fpr,
            });
        }
    }
    best.unwrap_or(YoudenChoice {
        threshold: 1.0,
        j: 0.0,
        tpr: 0.0,
        fpr: 0.0,
    })
}

/// How per-plant results are combined into portfolio rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Sum confusion counts over plants, then compute rates.
    #[default]
    Micro,
    /// Mean of per-plant rates (plants with an undefined rate are skipped).
    Macro,
}

/// Daily detector output for one plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DailyOutput {
    /// Fraction of daylight flagged; turned into alerts with a threshold.
    Fractions(BTreeMap<NaiveDate, f64>),
    /// Direct Boolean alerts.
    Alerts(BTreeMap<NaiveDate, bool>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantOutcome {
    pub plant_id: String,
    pub output: DailyOutput,
    pub tickets: TicketCalendar,
    pub losses: Vec<DailyLoss>,
    /// Evaluation days with daylight data but no detector output.
    pub excluded_days: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantBreakdown {
    pub plant_id: String,
    pub confusion: ConfusionCounts,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub weighted_sensitivity: Option<f64>,
    pub excluded_days: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub detector: DetectorConfig,
    pub sensitivity: Option<f64>,
    pub weighted_sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    /// Youden-optimal fraction threshold, for fraction-based detectors.
    pub threshold: Option<f64>,
    pub auc: Option<f64>,
    pub confusion: ConfusionCounts,
    pub averaging: Averaging,
    pub plants: Vec<PlantBreakdown>,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Portfolio-level scoring. For fraction outputs a single ROC is built over
/// the pooled plant-days and its Youden-optimal threshold is applied to
/// every plant. Plants listed in `failures` are reported with their error
/// and contribute nothing.
pub fn evaluate_portfolio(
    detector: DetectorConfig,
    outcomes: &[PlantOutcome],
    failures: &[(String, String)],
    averaging: Averaging,
) -> DetectionReport {
    let pooled: Vec<(f64, bool)> = outcomes
        .iter()
        .filter_map(|o| match &o.output {
            DailyOutput::Fractions(f) => Some(f.iter().map(|(d, v)| (*v, o.tickets.contains(d)))),
            DailyOutput::Alerts(_) => None,
        })
        .flatten()
        .collect();
    let has_fractions = outcomes.iter().any(|o| matches!(o.output, DailyOutput::Fractions(_)));
    let (threshold, auc) = if has_fractions {
        match roc_from_observations(&pooled) {
            Ok(curve) => (Some(youden_optimal(&curve).threshold), Some(curve.auc)),
            // Without both classes there is nothing to tune: alert on any flagged sample.
            Err(_) => (Some(0.0), None),
        }
    } else {
        (None, None)
    };

    let source = detector.to_string();
    let mut plants = Vec::new();
    let (mut tp_rel, mut fn_rel) = (0.0, 0.0);
    for o in outcomes {
        let alerts = match &o.output {
            DailyOutput::Fractions(f) => alerts_from_fractions(f, threshold.unwrap_or(0.0), &source),
            DailyOutput::Alerts(a) => DailyAlerts {
                source: source.clone(),
                alerts: a.clone(),
            },
        };
        let c = confusion(&alerts, &o.tickets, None);
        let (sens, spec) = rates(&c);
        let (tp, fn_) = relevance_sums(&alerts, &o.tickets, &o.losses);
        tp_rel += tp;
        fn_rel += fn_;
        plants.push(PlantBreakdown {
            plant_id: o.plant_id.clone(),
            confusion: c,
            sensitivity: sens,
            specificity: spec,
            weighted_sensitivity: (tp + fn_ > 0.0).then(|| tp / (tp + fn_)),
            excluded_days: o.excluded_days,
            error: None,
        });
    }
    let confusion: ConfusionCounts = plants.iter().map(|p| p.confusion).sum();
    let (sensitivity, specificity, weighted_sensitivity) = match averaging {
        Averaging::Micro => {
            let (s, p) = rates(&confusion);
            (s, p, (tp_rel + fn_rel > 0.0).then(|| tp_rel / (tp_rel + fn_rel)))
        }
        Averaging::Macro => (
            mean_defined(plants.iter().map(|p| p.sensitivity)),
            mean_defined(plants.iter().map(|p| p.specificity)),
            mean_defined(plants.iter().map(|p| p.weighted_sensitivity)),
        ),
    };
    for (plant_id, error) in failures {
        plants.push(PlantBreakdown {
            plant_id: plant_id.clone(),
            confusion: ConfusionCounts::default(),
            sensitivity: None,
            specificity: None,
            weighted_sensitivity: None,
            excluded_days: 0,
            error: Some(error.clone()),
        });
    }
    plants.sort_by(|a, b| a.plant_id.cmp(&b.plant_id));
    DetectionReport {
        detector,
        sensitivity,
        weighted_sensitivity,
        specificity,
        threshold,
        auc,
        confusion,
        averaging,
        plants,
    }
}

pub const TABLE2_HEADER: [&str; 7] = [
    "statistical analysis",
    "modeling",
    "grouping",
    "deviation",
    "sensitivity",
    "weighted sensitivity",
    "specificity",
];

fn fmt_rate(r: Option<f64>) -> String {
    r.map(|v| format!("{v:.3}")).unwrap_or_else(|| "NA".into())
}

/// Writes one summary row per report, in the given order.
pub fn write_table2<W: Write>(writer: W, reports: &[DetectionReport]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(TABLE2_HEADER)?;
    for r in reports {
        let d = &r.detector;
        csv.write_record([
            d.analysis.label().to_string(),
            d.model.label().to_string(),
            d.grouping.label().to_string(),
            d.deviation.label().to_string(),
            fmt_rate(r.sensitivity),
            fmt_rate(r.weighted_sensitivity),
            fmt_rate(r.specificity),
        ])?;
    }
    csv.flush().map_err(|e| Error::io("<table writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy_loss::loss_for;
    use chrono::Duration;

    fn d(i: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 1, 1).unwrap() + Duration::days(i)
    }

    fn cal(days: &[i64]) -> TicketCalendar {
        let mut c = TicketCalendar::new("p");
        for &i in days {
            c.insert(d(i));
        }
        c
    }

    fn alerts(flags: &[bool]) -> DailyAlerts {
        DailyAlerts {
            source: "t".into(),
            alerts: flags.iter().enumerate().map(|(i, &a)| (d(i as i64), a)).collect(),
        }
    }

    #[test]
    fn fraction_thresholds() {
        let f: BTreeMap<NaiveDate, f64> = [(d(0), 0.1), (d(1), 0.5), (d(2), 0.0)].into_iter().collect();
        let a = alerts_from_fractions(&f, 0.3, "x");
        assert_eq!(a.alerts.values().copied().collect::<Vec<_>>(), vec![false, true, false]);
        assert_eq!(alerts_from_fractions(&f, 0.0, "x").alert_count(), 2);
        assert_eq!(alerts_from_fractions(&f, 1.0, "x").alert_count(), 0);
        let clustered: BTreeMap<NaiveDate, f64> = [(d(0), 30.0 / 96.0)].into_iter().collect();
        assert_eq!(alerts_from_fractions(&clustered, 0.2, "x").alert_count(), 1);
    }

    #[test]
    fn confusion_small_cases() {
        let c = confusion(&alerts(&[true, false, true]), &cal(&[0, 1]), None);
        assert_eq!((c.tp, c.fn_, c.fp, c.tn), (1, 1, 1, 0));
        let c = confusion(&alerts(&[false; 10]), &cal(&[]), None);
        assert_eq!(c.tn, 10);
        let c = confusion(&alerts(&[true, false, true, false]), &cal(&[0, 2]), None);
        assert_eq!((c.fp, c.fn_), (0, 0));
        let c = confusion(&alerts(&[true, true, true]), &cal(&[]), Some((d(1), d(1))));
        assert_eq!(c.total(), 1);
    }

    #[test]
    fn rate_values() {
        let (s, _) = rates(&ConfusionCounts { tp: 1, fn_: 1, ..Default::default() });
        assert_eq!(s, Some(0.5));
        let (_, p) = rates(&ConfusionCounts { tn: 4, ..Default::default() });
        assert_eq!(p, Some(1.0));
        let (s, _) = rates(&ConfusionCounts::default());
        assert_eq!(s, None);
    }

    #[test]
    fn weighted_vs_plain() {
        // Ten ticketed days; only day 0 carries loss and only day 0 alerts.
        let tickets = cal(&(0..10).collect::<Vec<_>>());
        let mut flags = vec![false; 10];
        flags[0] = true;
        let losses: Vec<DailyLoss> = (0..10)
            .map(|i| {
                let meas = if i == 0 { 50.0 } else { 100.0 };
                loss_for(d(i), 100.0, 100.0, meas, 0.0, 100.0)
            })
            .collect();
        let a = alerts(&flags);
        assert_eq!(weighted_sensitivity(&a, &tickets, &losses), Some(1.0));
        let (s, _) = rates(&confusion(&a, &tickets, None));
        assert_eq!(s, Some(0.1));
        assert_eq!(weighted_sensitivity(&alerts(&[false; 10]), &tickets, &losses), Some(0.0));
        assert_eq!(weighted_sensitivity(&alerts(&[true; 10]), &tickets, &losses), Some(1.0));
    }

    #[test]
    fn roc_exhaustive_small_case() {
        let obs = [(1.0, true), (1.0, true), (0.0, false), (0.0, false)];
        let c = roc_from_observations(&obs).unwrap();
        let pts: Vec<(f64, f64)> = c.points.iter().map(|p| (p.fpr, p.tpr)).collect();
        assert_eq!(pts, vec![(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]);
        assert_eq!(c.auc, 1.0);
        let y = youden_optimal(&c);
        assert_eq!((y.j, y.threshold), (1.0, 0.0));
    }

    #[test]
    fn roc_degenerate() {
        assert!(matches!(roc_from_observations(&[(0.5, true)]), Err(Error::DegenerateRoc(_))));
        assert!(matches!(roc_from_observations(&[(0.5, false)]), Err(Error::DegenerateRoc(_))));
    }

    #[test]
    fn youden_enumeration() {
        let curve = RocCurve {
            points: vec![
                RocPoint { fpr: 0.0, tpr: 0.0, threshold: 1.0 },
                RocPoint { fpr: 0.1, tpr: 0.8, threshold: 0.4 },
                RocPoint { fpr: 1.0, tpr: 1.0, threshold: 0.0 },
            ],
            auc: 0.0,
        };
        let y = youden_optimal(&curve);
        assert_eq!(y.threshold, 0.4);
        assert!((y.j - 0.7).abs() < 1e-12);
        let diag = RocCurve {
            points: vec![
                RocPoint { fpr: 0.0, tpr: 0.0, threshold: 1.0 },
                RocPoint { fpr: 0.5, tpr: 0.5, threshold: 0.5 },
                RocPoint { fpr: 1.0, tpr: 1.0, threshold: 0.0 },
            ],
            auc: 0.5,
        };
        assert_eq!(youden_optimal(&diag).threshold, 1.0);
    }
}
