//! Orchestration behind the `pvafd` command: run manifests, portfolio
//! generation and report rendering.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use pvafd_core::evaluation::{evaluate_portfolio, write_table2, Averaging, DetectionReport};
use pvafd_core::export::{write_clusters, write_daily_loss, write_deviations, write_verdicts};
use pvafd_core::ingestion::{
    parse_measurements, parse_tickets, write_measurements, write_tickets, IngestWarnings, MeasurementSeries,
    PlantConfig, QualityCounts, TicketBook, TicketCalendar,
};
use pvafd_core::models::{ArxLagSource, ModelDocument};
use pvafd_core::pipeline::{prepare_plant, run_detector, DetectorConfig, DetectorRun, PreparedPlant, RunCounters, RunOptions};
use pvafd_core::spc::{DEFAULT_EWMA_LAMBDA, DEFAULT_LIMIT_WIDTH};
use pvafd_core::synthetic::{ticket_book, PortfolioSpec};
use pvafd_core::Error;

pub const REPORT_JSON: &str = "report.json";
pub const TABLE_CSV: &str = "table2.csv";
pub const RUN_LOG: &str = "run-log.json";
pub const TICKETS_CSV: &str = "tickets.csv";
pub const RUN_MANIFEST: &str = "manifest.toml";

/// Parses TOML and reports failures with the path of the offending field.
pub fn from_toml_with_path<T: serde::de::DeserializeOwned>(text: &str) -> pvafd_core::Result<T> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::Config(e.message().to_string()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            Error::Config(inner.message().to_string())
        } else {
            Error::Config(format!("{path}: {}", inner.message()))
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantEntry {
    /// Plant configuration (TOML).
    pub config: PathBuf,
    /// Measurement CSV.
    pub measurements: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub limit_width: f64,
    pub lambda: f64,
    pub averaging: Averaging,
    pub arx_lags: ArxLagSource,
    /// Also write per-plant deviation, verdict, cluster and loss series.
    pub export_series: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            limit_width: DEFAULT_LIMIT_WIDTH,
            lambda: DEFAULT_EWMA_LAMBDA,
            averaging: Averaging::Micro,
            arx_lags: ArxLagSource::Measured,
            export_series: false,
        }
    }
}

impl Settings {
    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            limit_width: self.limit_width,
            lambda: self.lambda,
            lag_source: self.arx_lags,
        }
    }
}

/// Declarative description of a run. Relative paths are resolved against
/// the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub plants: Vec<PlantEntry>,
    /// Portfolio description to synthesise in memory instead of `plants`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub portfolio: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tickets: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub settings: Settings,
    #[serde(default)]
    pub detectors: Vec<DetectorConfig>,
}

impl RunManifest {
    pub fn from_toml_str(text: &str) -> pvafd_core::Result<Self> {
        let m: RunManifest = from_toml_with_path(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut m = Self::from_toml_str(&text).with_context(|| format!("in manifest {}", path.display()))?;
        m.resolve(path.parent().unwrap_or(Path::new(".")));
        Ok(m)
    }

    pub fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for e in &mut self.plants {
            join(&mut e.config);
            join(&mut e.measurements);
        }
        self.portfolio.iter_mut().for_each(join);
        self.tickets.iter_mut().for_each(join);
        self.out.iter_mut().for_each(join);
    }

    pub fn validate(&self) -> pvafd_core::Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        match (self.plants.is_empty(), &self.portfolio) {
            (true, None) => return cfg("plants: plant list is empty".into()),
            (false, Some(_)) => return cfg("portfolio: cannot be combined with plants".into()),
            _ => {}
        }
        if self.portfolio.is_some() && self.tickets.is_some() {
            return cfg("tickets: a synthetic portfolio carries its own tickets".into());
        }
        if self.detectors.is_empty() {
            return cfg("detectors: no detector configurations".into());
        }
        let mut seen = BTreeSet::new();
        for (i, d) in self.detectors.iter().enumerate() {
            d.validate().map_err(|e| Error::Config(format!("detectors[{i}]: {}", strip(&e))))?;
            if !seen.insert(*d) {
                return cfg(format!("detectors[{i}]: duplicate of an earlier detector ({d})"));
            }
        }
        let s = &self.settings;
        if !(s.limit_width > 0.0 && s.limit_width.is_finite()) {
            return cfg(format!("settings.limit_width: must be > 0, got {}", s.limit_width));
        }
        if !(s.lambda > 0.0 && s.lambda <= 1.0) {
            return cfg(format!("settings.lambda: must be in (0, 1], got {}", s.lambda));
        }
        Ok(())
    }
}

fn strip(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Command-line overrides applied on top of the manifest.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub limit_width: Option<f64>,
    pub lambda: Option<f64>,
    pub seed: Option<u64>,
    pub macro_average: bool,
    pub workers: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, manifest: &mut RunManifest) -> pvafd_core::Result<()> {
        if let Some(l) = self.limit_width {
            manifest.settings.limit_width = l;
        }
        if let Some(l) = self.lambda {
            manifest.settings.lambda = l;
        }
        if self.macro_average {
            manifest.settings.averaging = Averaging::Macro;
        }
        manifest.validate()
    }
}

/// One plant ready for detection.
#[derive(Debug, Clone)]
pub struct PlantInput {
    pub config: PlantConfig,
    pub series: MeasurementSeries,
    pub tickets: TicketCalendar,
    pub ingest: IngestWarnings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantLog {
    pub plant_id: String,
    pub records: usize,
    pub ingest: IngestWarnings,
    pub quality: Option<QualityCounts>,
    pub ticketed_days: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorLog {
    pub detector: String,
    /// Summed per-plant processing time.
    pub cpu_ms: f64,
    pub counters: RunCounters,
    pub failed_plants: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub wall_ms: f64,
    pub settings: Settings,
    pub plants: Vec<PlantLog>,
    pub detectors: Vec<DetectorLog>,
}

/// Everything produced by a run, before it is written to disk.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub reports: Vec<DetectionReport>,
    pub log: RunLog,
    pub models: Vec<ModelDocument>,
    pub runs: Vec<DetectorRun>,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .context("building worker pool")?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Loads (or synthesises) the plants named by the manifest. Plants that
/// fail to load are returned as `(id, error)` pairs.
pub fn load_plants(manifest: &RunManifest, seed: Option<u64>) -> Result<(Vec<PlantInput>, Vec<(String, String)>)> {
    if let Some(path) = &manifest.portfolio {
        let mut spec = PortfolioSpec::load(path).with_context(|| format!("in portfolio {}", path.display()))?;
        if let Some(s) = seed {
            spec.seed = s;
        }
        return Ok((synthesize(&spec)?, Vec::new()));
    }
    let book = match &manifest.tickets {
        Some(p) => parse_tickets(p).with_context(|| format!("reading tickets {}", p.display()))?,
        None => TicketBook::default(),
    };
    let loaded: Vec<std::result::Result<PlantInput, (String, String)>> = manifest
        .plants
        .par_iter()
        .map(|entry| {
            let fallback_id = entry
                .config
                .file_stem()
                .map(|s| s.to_string_lossy().trim_end_matches(".plant").to_string())
                .unwrap_or_default();
            let config = PlantConfig::load(&entry.config).map_err(|e| (fallback_id, e.to_string()))?;
            let ingested = parse_measurements(&entry.measurements, &config)
                .map_err(|e| (config.plant_id.clone(), e.to_string()))?;
            Ok(PlantInput {
                tickets: book.calendar(&config.plant_id),
                series: ingested.series,
                ingest: ingested.warnings,
                config,
            })
        })
        .collect();
    let mut plants = Vec::new();
    let mut failures = Vec::new();
    for r in loaded {
        match r {
            Ok(p) => plants.push(p),
            Err(f) => {
                warn!("plant {}: {}", f.0, f.1);
                failures.push(f);
            }
        }
    }
    let mut ids = BTreeSet::new();
    for p in &plants {
        if !ids.insert(p.config.plant_id.clone()) {
            bail!(Error::Config(format!("plants: duplicate plant id {}", p.config.plant_id)));
        }
    }
    Ok((plants, failures))
}

pub fn synthesize(spec: &PortfolioSpec) -> Result<Vec<PlantInput>> {
    let plants: Vec<_> = (0..spec.plants)
        .into_par_iter()
        .map(|i| spec.synthesize(i))
        .collect::<pvafd_core::Result<_>>()?;
    Ok(plants
        .into_iter()
        .map(|p| PlantInput {
            config: p.config,
            series: p.series,
            tickets: p.tickets,
            ingest: IngestWarnings::default(),
        })
        .collect())
}

/// Runs every detector on every plant. Per-plant failures are recorded in
/// the reports and the log; they never abort the run.
pub fn execute(
    plants: &[PlantInput],
    load_failures: &[(String, String)],
    detectors: &[DetectorConfig],
    settings: &Settings,
) -> RunOutput {
    let start = Instant::now();
    let prepared: Vec<std::result::Result<PreparedPlant, String>> = plants
        .par_iter()
        .map(|p| prepare_plant(&p.config, &p.series, &p.tickets).map_err(|e| e.to_string()))
        .collect();

    let mut plant_logs: Vec<PlantLog> = plants
        .iter()
        .zip(&prepared)
        .map(|(p, prep)| PlantLog {
            plant_id: p.config.plant_id.clone(),
            records: p.series.len(),
            ingest: p.ingest,
            quality: prep.as_ref().ok().map(|x| x.quality),
            ticketed_days: p.tickets.len(),
            warnings: prep.as_ref().map(|x| x.warnings.clone()).unwrap_or_default(),
            error: prep.as_ref().err().cloned(),
        })
        .collect();
    plant_logs.extend(load_failures.iter().map(|(id, e)| PlantLog {
        plant_id: id.clone(),
        records: 0,
        ingest: IngestWarnings::default(),
        quality: None,
        ticketed_days: 0,
        warnings: Vec::new(),
        error: Some(e.clone()),
    }));
    plant_logs.sort_by(|a, b| a.plant_id.cmp(&b.plant_id));

    let options = settings.run_options();
    let tasks: Vec<(usize, usize)> = (0..detectors.len())
        .flat_map(|d| (0..prepared.len()).map(move |p| (d, p)))
        .collect();
    let results: Vec<(std::result::Result<DetectorRun, String>, Duration)> = tasks
        .par_iter()
        .map(|&(d, p)| {
            let t = Instant::now();
            let r = match &prepared[p] {
                Ok(plant) => run_detector(plant, &detectors[d], &options).map_err(|e| e.to_string()),
                Err(e) => Err(format!("preparation failed: {e}")),
            };
            (r, t.elapsed())
        })
        .collect();

    let mut reports = Vec::with_capacity(detectors.len());
    let mut detector_logs = Vec::with_capacity(detectors.len());
    let mut runs = Vec::new();
    let mut models = Vec::new();
    let mut modelled = BTreeSet::new();
    let mut results = results.into_iter();
    for detector in detectors {
        let mut outcomes = Vec::new();
        let mut failures: Vec<(String, String)> = load_failures.to_vec();
        let mut counters = RunCounters::default();
        let mut cpu = Duration::ZERO;
        for (plant, (result, elapsed)) in plants.iter().zip(results.by_ref().take(prepared.len())) {
            cpu += elapsed;
            match result {
                Ok(run) => {
                    counters += run.counters;
                    outcomes.push(run.outcome.clone());
                    if let Some(m) = run.model {
                        if modelled.insert((plant.config.plant_id.clone(), detector.model)) {
                            models.push(model_document(prepared_ok(&prepared, plant), m));
                        }
                    }
                    if settings.export_series {
                        runs.push(run);
                    }
                }
                Err(e) => {
                    warn!("{detector} on {}: {e}", plant.config.plant_id);
                    failures.push((plant.config.plant_id.clone(), e));
                }
            }
        }
        info!(
            "{detector}: {} plants, {} failed, {:.0} ms",
            outcomes.len(),
            failures.len(),
            ms(cpu)
        );
        detector_logs.push(DetectorLog {
            detector: detector.to_string(),
            cpu_ms: ms(cpu),
            counters,
            failed_plants: failures.len(),
        });
        reports.push(evaluate_portfolio(*detector, &outcomes, &failures, settings.averaging));
    }
    models.sort_by(|a, b| a.plant_id.cmp(&b.plant_id).then(model_tag(a).cmp(model_tag(b))));

    RunOutput {
        reports,
        models,
        runs,
        log: RunLog {
            wall_ms: ms(start.elapsed()),
            settings: *settings,
            plants: plant_logs,
            detectors: detector_logs,
        },
    }
}

fn prepared_ok<'a>(prepared: &'a [std::result::Result<PreparedPlant, String>], plant: &PlantInput) -> &'a PreparedPlant {
    prepared
        .iter()
        .flatten()
        .find(|p| p.config.plant_id == plant.config.plant_id)
        .expect("a successful run implies a prepared plant")
}

fn model_tag(doc: &ModelDocument) -> &'static str {
    use pvafd_core::models::FittedModel::*;
    match doc.coefficients {
        PolyReg(_) => "polyreg",
        Arx(_) => "arx",
        Empirical(_) => "empirical",
    }
}

fn model_document(plant: &PreparedPlant, model: pvafd_core::models::FittedModel) -> ModelDocument {
    ModelDocument {
        plant_id: plant.config.plant_id.clone(),
        fitted_on_days: plant.config.training_days,
        training_points: plant
            .train
            .valid()
            .filter(|r| !plant.tickets.contains(&r.day()))
            .count(),
        coefficients: model,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn write_table(path: &Path, reports: &[DetectionReport]) -> Result<()> {
    let mut w = create(path)?;
    write_table2(&mut w, reports)?;
    w.flush()?;
    Ok(())
}

/// Writes reports, the run log, fitted models and optional series exports.
pub fn write_outputs(out: &Path, output: &RunOutput) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_json(&out.join(REPORT_JSON), &output.reports)?;
    write_table(&out.join(TABLE_CSV), &output.reports)?;
    write_json(&out.join(RUN_LOG), &output.log)?;

    let models_dir = out.join("models");
    fs::create_dir_all(&models_dir)?;
    for doc in &output.models {
        let path = models_dir.join(format!("{}.{}.toml", doc.plant_id, model_tag(doc)));
        fs::write(&path, doc.to_toml_string()).with_context(|| format!("writing {}", path.display()))?;
    }

    for run in &output.runs {
        let dir = out.join("series").join(&run.outcome.plant_id);
        fs::create_dir_all(&dir)?;
        let slug = run.detector.slug();
        write_deviations(create(&dir.join(format!("{slug}.deviations.csv")))?, &run.evaluation_deviations)?;
        if !run.verdicts.is_empty() {
            write_verdicts(create(&dir.join(format!("{slug}.verdicts.csv")))?, &run.verdicts)?;
        }
        if let Some(c) = &run.clusters {
            write_clusters(create(&dir.join(format!("{slug}.clusters.csv")))?, &run.evaluation_groups, c)?;
        }
        let loss = dir.join("daily-loss.csv");
        if !loss.exists() {
            write_daily_loss(create(&loss)?, &run.outcome.losses)?;
        }
    }
    Ok(())
}

/// Loads a manifest, applies overrides, runs it and writes the results.
pub fn run_manifest_file(path: &Path, out: Option<&Path>, overrides: &Overrides) -> Result<RunOutput> {
    let mut manifest = RunManifest::load(path)?;
    overrides.apply(&mut manifest)?;
    let out_dir = out
        .map(Path::to_path_buf)
        .or_else(|| manifest.out.clone())
        .context("no output directory: pass --out or set `out` in the manifest")?;
    let output = with_workers(overrides.workers, || -> Result<RunOutput> {
        let (plants, failures) = load_plants(&manifest, overrides.seed)?;
        info!("{} plants loaded, {} failed", plants.len(), failures.len());
        Ok(execute(&plants, &failures, &manifest.detectors, &manifest.settings))
    })??;
    write_outputs(&out_dir, &output)?;
    Ok(output)
}

/// Writes a synthetic portfolio in the ingestion formats together with a
/// run manifest covering the reference detectors. Returns the plant ids.
pub fn generate(spec: &PortfolioSpec, out: &Path, workers: Option<usize>) -> Result<Vec<String>> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let plants = with_workers(workers, || {
        (0..spec.plants)
            .into_par_iter()
            .map(|i| -> Result<_> {
                let p = spec.synthesize(i)?;
                let id = &p.config.plant_id;
                let mut w = create(&out.join(format!("{id}.csv")))?;
                write_measurements(&mut w, &p.series)?;
                w.flush()?;
                fs::write(out.join(format!("{id}.plant.toml")), p.config.to_toml_string())?;
                Ok(p)
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut w = create(&out.join(TICKETS_CSV))?;
    write_tickets(&mut w, &ticket_book(&plants))?;
    w.flush()?;

    let manifest = RunManifest {
        plants: plants
            .iter()
            .map(|p| PlantEntry {
                config: format!("{}.plant.toml", p.config.plant_id).into(),
                measurements: format!("{}.csv", p.config.plant_id).into(),
            })
            .collect(),
        portfolio: None,
        tickets: Some(TICKETS_CSV.into()),
        out: Some("results".into()),
        settings: Settings::default(),
        detectors: DetectorConfig::reference_set(),
    };
    fs::write(out.join(RUN_MANIFEST), manifest.to_toml_string())?;
    Ok(plants.into_iter().map(|p| p.config.plant_id).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

/// Re-renders stored reports: rewrites the CSV table next to the JSON and
/// prints the requested format to `sink`.
pub fn render_report(dir: &Path, format: ReportFormat, sink: &mut impl Write) -> Result<()> {
    let path = dir.join(REPORT_JSON);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let reports: Vec<DetectionReport> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    write_table(&dir.join(TABLE_CSV), &reports)?;
    match format {
        ReportFormat::Csv => write_table2(&mut *sink, &reports)?,
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut *sink, &reports)?;
            writeln!(sink)?;
        }
        ReportFormat::Text => {
            let cell = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.3}"));
            writeln!(
                sink,
                "{:<10} {:<10} {:<14} {:<10} {:>6} {:>6} {:>6} {:>8}",
                "analysis", "model", "grouping", "deviation", "sens", "wsens", "spec", "thresh"
            )?;
            for r in &reports {
                let d = &r.detector;
                writeln!(
                    sink,
                    "{:<10} {:<10} {:<14} {:<10} {:>6} {:>6} {:>6} {:>8}",
                    d.analysis.label(),
                    d.model.label(),
                    d.grouping.label(),
                    d.deviation.label(),
                    cell(r.sensitivity),
                    cell(r.weighted_sensitivity),
                    cell(r.specificity),
                    cell(r.threshold),
                )?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const DETECTOR: &str = "[[detectors]]\nanalysis = \"shewhart\"\nmodel = \"none\"\ngrouping = \"daily_single\"\ndeviation = \"pr\"\n";

    #[test]
    fn empty_plant_list_is_a_config_error() {
        let err = RunManifest::from_toml_str(DETECTOR).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.starts_with("plants:")), "{err}");
    }

    #[test]
    fn field_path_in_parse_errors() {
        let text = format!("portfolio = \"p.toml\"\n{}", DETECTOR.replace("shewhart", "cusum"));
        let err = RunManifest::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("detectors[0].analysis"), "{err}");
    }

    #[test]
    fn invalid_detector_reports_index() {
        let text = format!("portfolio = \"p.toml\"\n{DETECTOR}{}", DETECTOR.replace("\"none\"", "\"arx\""));
        let err = RunManifest::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("detectors[1]"), "{err}");
    }

    #[test]
    fn manifest_round_trip() {
        let m = RunManifest {
            plants: vec![PlantEntry {
                config: "a.plant.toml".into(),
                measurements: "a.csv".into(),
            }],
            portfolio: None,
            tickets: Some("tickets.csv".into()),
            out: None,
            settings: Settings::default(),
            detectors: DetectorConfig::reference_set(),
        };
        assert_eq!(RunManifest::from_toml_str(&m.to_toml_string()).unwrap(), m);
    }

    #[test]
    fn overrides_are_validated() {
        let mut m = RunManifest::from_toml_str(&format!("portfolio = \"p.toml\"\n{DETECTOR}")).unwrap();
        let o = Overrides {
            lambda: Some(1.5),
            ..Default::default()
        };
        assert!(o.apply(&mut m).is_err());
    }
}
