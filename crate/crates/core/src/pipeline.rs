//! Per-plant detector runs: filter, split, fit, compute deviations, group,
//! estimate process statistics on training data and classify the
//! evaluation window.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::clustering::{cluster_detect, ClusterPolicy, ClusterResult};
use crate::deviation::{
    aggregate_daily, daily_deviations, daylight_counts, group_samples, sample_deviations, DeviationKind,
    DeviationSeries, GroupingScheme, Resolution, SampleGroup,
};
use crate::energy_loss::{daily_loss, DailyLoss};
use crate::error::{Error, Result};
use crate::evaluation::{DailyOutput, PlantOutcome};
use crate::ingestion::{
    apply_quality_filter, quality_counts, split_train_eval, MeasurementSeries, PlantConfig, QualityCounts,
    TicketCalendar,
};
use crate::models::{
    fit_arx, fit_empirical, fit_polyreg, mapd, AccuracyReport, ArxLagSource, EmpiricalModel, FittedModel,
};
use crate::spc::{
    classify, daily_out_fraction, estimate_stats, ChartSpec, ChartVerdict, ProcessStats, DEFAULT_EWMA_LAMBDA,
    DEFAULT_LIMIT_WIDTH,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Shewhart,
    Ewma,
    #[serde(rename = "kmeans")]
    KMeans,
}

impl Analysis {
    pub fn label(&self) -> &'static str {
        match self {
            Analysis::Shewhart => "Shewhart",
            Analysis::Ewma => "EWMA",
            Analysis::KMeans => "k-means",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Arx,
    #[serde(rename = "polyreg")]
    PolyReg,
    Empirical,
    /// No model; only valid with PR.
    None,
}

impl ModelKind {
    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::Arx => "ARX",
            ModelKind::PolyReg => "PolyReg",
            ModelKind::Empirical => "Empirical",
            ModelKind::None => "-",
        }
    }
}

/// One detector: statistical analysis × model × grouping × deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub analysis: Analysis,
    pub model: ModelKind,
    pub grouping: GroupingScheme,
    pub deviation: DeviationKind,
}

impl DetectorConfig {
    pub fn new(analysis: Analysis, model: ModelKind, grouping: GroupingScheme, deviation: DeviationKind) -> Self {
        Self {
            analysis,
            model,
            grouping,
            deviation,
        }
    }

    /// PR needs no model; absolute and relative deviations need one.
    pub fn validate(&self) -> Result<()> {
        match (self.deviation, self.model) {
            (DeviationKind::Pr, ModelKind::None) => Ok(()),
            (DeviationKind::Pr, m) => Err(Error::Config(format!("PR takes no model, got {}", m.label()))),
            (d, ModelKind::None) => Err(Error::Config(format!("{d} deviation needs a model"))),
            _ => Ok(()),
        }
    }

    /// File-name friendly identifier.
    pub fn slug(&self) -> String {
        format!(
            "{}_{}_{}_{}",
            self.analysis.label(),
            self.model.label(),
            self.grouping.label(),
            self.deviation.label()
        )
        .to_lowercase()
        .replace(['-', ' '], "")
        .replace("__", "_none_")
    }

    /// The nine best-performing detectors of the published comparison, in
    /// descending order of field specificity.
    pub fn reference_set() -> Vec<DetectorConfig> {
        use Analysis::*;
        use DeviationKind::*;
        use GroupingScheme::*;
        use ModelKind as M;
        vec![
            Self::new(KMeans, M::Arx, DailySingle, Relative),
            Self::new(Ewma, M::Arx, FiveMinSingle, Absolute),
            Self::new(Ewma, M::Arx, FiveMinSingle, Relative),
            Self::new(KMeans, M::Arx, DailySingle, Absolute),
            Self::new(KMeans, M::PolyReg, DailySingle, Relative),
            Self::new(KMeans, M::None, DailySingle, Pr),
            Self::new(KMeans, M::Empirical, DailySingle, Relative),
            Self::new(Ewma, M::PolyReg, FiveMinSingle, Absolute),
            Self::new(Shewhart, M::None, DailySingle, Pr),
        ]
    }
}

impl fmt::Display for DetectorConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} / {} / {} / {}",
            self.analysis.label(),
            self.model.label(),
            self.grouping.label(),
            self.deviation.label()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub limit_width: f64,
    pub lambda: f64,
    pub lag_source: ArxLagSource,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            limit_width: DEFAULT_LIMIT_WIDTH,
            lambda: DEFAULT_EWMA_LAMBDA,
            lag_source: ArxLagSource::Measured,
        }
    }
}

/// Filtered, split plant data shared by every detector.
#[derive(Debug, Clone)]
pub struct PreparedPlant {
    pub config: PlantConfig,
    pub tickets: TicketCalendar,
    pub train: MeasurementSeries,
    pub eval: MeasurementSeries,
    pub quality: QualityCounts,
    pub daily_h: HashMap<NaiveDate, f64>,
    pub eval_daylight: BTreeMap<NaiveDate, usize>,
    /// Model used for the daily loss estimate, when it could be fitted.
    pub loss_model: Option<EmpiricalModel>,
    pub losses: Vec<DailyLoss>,
    pub warnings: Vec<String>,
}

pub fn prepare_plant(config: &PlantConfig, series: &MeasurementSeries, tickets: &TicketCalendar) -> Result<PreparedPlant> {
    config.validate()?;
    let filtered = apply_quality_filter(series, config);
    let quality = quality_counts(&filtered);
    let (train, eval) = split_train_eval(&filtered, config)?;
    let train_daily = aggregate_daily(&train);
    let eval_daily = aggregate_daily(&eval);
    let daily_h = train_daily
        .iter()
        .chain(&eval_daily)
        .map(|d| (d.day, d.h_poa))
        .collect();
    let mut warnings = Vec::new();
    let (loss_model, losses) = match fit_empirical(&train_daily, tickets, config) {
        Ok(m) => (Some(m), daily_loss(&eval_daily, &m, config.p_nom)),
        Err(e) => {
            warnings.push(format!("no energy-loss model: {e}"));
            (None, Vec::new())
        }
    };
    Ok(PreparedPlant {
        config: config.clone(),
        tickets: tickets.clone(),
        eval_daylight: daylight_counts(&eval),
        train,
        eval,
        quality,
        daily_h,
        loss_model,
        losses,
        warnings,
    })
}

/// Fits the requested model on the non-ticketed training data.
pub fn fit_model(plant: &PreparedPlant, kind: ModelKind) -> Result<Option<FittedModel>> {
    Ok(Some(match kind {
        ModelKind::None => return Ok(None),
        ModelKind::PolyReg => FittedModel::PolyReg(fit_polyreg(&plant.train, &plant.tickets)?),
        ModelKind::Arx => FittedModel::Arx(fit_arx(&plant.train, &plant.tickets)?),
        ModelKind::Empirical => FittedModel::Empirical(fit_empirical(
            &aggregate_daily(&plant.train),
            &plant.tickets,
            &plant.config,
        )?),
    }))
}

fn predictions(plant: &PreparedPlant, series: &MeasurementSeries, model: Option<&FittedModel>, lag: ArxLagSource) -> Vec<Option<f64>> {
    match model {
        Some(m) => m.predict_series(series, &plant.daily_h, plant.config.p_nom, lag),
        None => vec![None; series.len()],
    }
}

pub fn deviation_series(
    plant: &PreparedPlant,
    series: &MeasurementSeries,
    model: Option<&FittedModel>,
    kind: DeviationKind,
    resolution: Resolution,
    lag: ArxLagSource,
) -> DeviationSeries {
    let predicted = predictions(plant, series, model, lag);
    match resolution {
        Resolution::Sample => sample_deviations(series, &predicted, kind, &plant.config),
        Resolution::Daily => daily_deviations(series, &predicted, kind, &plant.config),
    }
}

/// Sample-level accuracy of a model on the non-ticketed evaluation window.
/// Measurements below the relative-deviation floor are excluded.
pub fn model_accuracy(plant: &PreparedPlant, model: &FittedModel, lag: ArxLagSource) -> Result<AccuracyReport> {
    let predicted = model.predict_series(&plant.eval, &plant.daily_h, plant.config.p_nom, lag);
    let (measured, expected): (Vec<f64>, Vec<f64>) = plant
        .eval
        .records
        .iter()
        .zip(&predicted)
        .filter(|(r, _)| !plant.tickets.contains(&r.day()))
        .filter_map(|(r, p)| p.map(|p| (r.ac_power, p)))
        .unzip();
    mapd(&measured, &expected, plant.config.relative_denominator_floor * plant.config.p_nom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunCounters {
    /// Deviation points removed by the relative-deviation floor or zero irradiation.
    pub filtered_points: usize,
    /// Windows dropped by the minimum group size rule.
    pub dropped_groups: usize,
    pub training_groups: usize,
    pub evaluation_groups: usize,
    /// Evaluation days with daylight data but no detector output.
    pub excluded_days: usize,
}

impl std::ops::AddAssign for RunCounters {
    fn add_assign(&mut self, o: Self) {
        self.filtered_points += o.filtered_points;
        self.dropped_groups += o.dropped_groups;
        self.training_groups += o.training_groups;
        self.evaluation_groups += o.evaluation_groups;
        self.excluded_days += o.excluded_days;
    }
}

/// Everything one detector produced for one plant.
#[derive(Debug, Clone)]
pub struct DetectorRun {
    pub detector: DetectorConfig,
    pub model: Option<FittedModel>,
    pub stats: ProcessStats,
    pub evaluation_deviations: DeviationSeries,
    pub evaluation_groups: Vec<SampleGroup>,
    /// Chart verdicts; empty for clustering.
    pub verdicts: Vec<ChartVerdict>,
    pub clusters: Option<ClusterResult>,
    pub outcome: PlantOutcome,
    pub counters: RunCounters,
}

fn window_key(scheme: GroupingScheme, ts: NaiveDateTime) -> NaiveDateTime {
    use chrono::Timelike;
    match scheme {
        GroupingScheme::ThirtyMinGroup => ts
            .date()
            .and_hms_opt(ts.hour(), if ts.minute() < 30 { 0 } else { 30 }, 0)
            .expect("valid clock time"),
        GroupingScheme::DailyGroup => ts.date().and_hms_opt(0, 0, 0).expect("midnight exists"),
        _ => ts,
    }
}

fn dropped_windows(dev: &DeviationSeries, scheme: GroupingScheme, kept: usize) -> usize {
    let windows: BTreeSet<NaiveDateTime> = dev.points.iter().map(|p| window_key(scheme, p.timestamp)).collect();
    windows.len().saturating_sub(kept)
}

/// Share of daylight samples in flagged groups, per day.
fn flagged_fractions(
    groups: &[SampleGroup],
    flags: &[bool],
    daylight: &BTreeMap<NaiveDate, usize>,
) -> BTreeMap<NaiveDate, f64> {
    let mut flagged: BTreeMap<NaiveDate, usize> = BTreeMap::new();
    for (g, &f) in groups.iter().zip(flags) {
        *flagged.entry(g.day).or_insert(0) += if f { g.n } else { 0 };
    }
    flagged
        .into_iter()
        .filter_map(|(day, n)| {
            let total = *daylight.get(&day)?;
            (total > 0).then(|| (day, (n as f64 / total as f64).min(1.0)))
        })
        .collect()
}

fn daily_flags(groups: &[SampleGroup], flags: &[bool]) -> BTreeMap<NaiveDate, bool> {
    let mut alerts = BTreeMap::new();
    for (g, &f) in groups.iter().zip(flags) {
        *alerts.entry(g.day).or_insert(false) |= f;
    }
    alerts
}

/// Runs one detector on a prepared plant.
pub fn run_detector(plant: &PreparedPlant, detector: &DetectorConfig, options: &RunOptions) -> Result<DetectorRun> {
    detector.validate()?;
    let model = fit_model(plant, detector.model)?;
    let scheme = detector.grouping;
    let resolution = scheme.resolution();
    let lag = options.lag_source;

    let mut train_dev = deviation_series(plant, &plant.train, model.as_ref(), detector.deviation, resolution, lag);
    let train_filtered = train_dev.filtered.len();
    train_dev.points.retain(|p| !plant.tickets.contains(&p.day()));
    let train_groups = group_samples(&train_dev, scheme)?;
    let stats = estimate_stats(&train_groups, scheme)?;

    let eval_dev = deviation_series(plant, &plant.eval, model.as_ref(), detector.deviation, resolution, lag);
    let eval_groups = group_samples(&eval_dev, scheme)?;

    let (flags, verdicts, clusters) = match detector.analysis {
        Analysis::Shewhart | Analysis::Ewma => {
            let spec = if detector.analysis == Analysis::Shewhart {
                ChartSpec::shewhart(stats, options.limit_width)
            } else {
                ChartSpec::ewma(stats, options.limit_width, options.lambda)
            };
            spec.validate()?;
            let verdicts = classify(&eval_groups, &spec);
            let flags = verdicts.iter().map(|v| v.out_of_control).collect::<Vec<_>>();
            (flags, verdicts, None)
        }
        Analysis::KMeans => {
            let values: Vec<f64> = eval_groups.iter().map(|g| g.mean).collect();
            let result = cluster_detect(&values, &stats, &ClusterPolicy::from_stats(&stats))?;
            (result.faulty.clone(), Vec::new(), Some(result))
        }
    };

    let output = if scheme.is_daily() {
        DailyOutput::Alerts(daily_flags(&eval_groups, &flags))
    } else if verdicts.is_empty() {
        DailyOutput::Fractions(flagged_fractions(&eval_groups, &flags, &plant.eval_daylight))
    } else {
        DailyOutput::Fractions(daily_out_fraction(&verdicts, &plant.eval_daylight))
    };
    let covered: BTreeSet<NaiveDate> = match &output {
        DailyOutput::Alerts(a) => a.keys().copied().collect(),
        DailyOutput::Fractions(f) => f.keys().copied().collect(),
    };
    let excluded_days = plant.eval_daylight.keys().filter(|d| !covered.contains(d)).count();

    let counters = RunCounters {
        filtered_points: train_filtered + eval_dev.filtered.len(),
        dropped_groups: dropped_windows(&train_dev, scheme, train_groups.len())
            + dropped_windows(&eval_dev, scheme, eval_groups.len()),
        training_groups: train_groups.len(),
        evaluation_groups: eval_groups.len(),
        excluded_days,
    };
    let outcome = PlantOutcome {
        plant_id: plant.config.plant_id.clone(),
        output,
        tickets: plant.tickets.clone(),
        losses: plant.losses.clone(),
        excluded_days,
    };
    Ok(DetectorRun {
        detector: *detector,
        model,
        stats,
        evaluation_deviations: eval_dev,
        evaluation_groups: eval_groups,
        verdicts,
        clusters,
        outcome,
        counters,
    })
}
