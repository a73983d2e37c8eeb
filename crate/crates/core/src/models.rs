//! Performance models: second-order polynomial regression on irradiance,
//! ARX(2,2) on power and irradiance, and the empirical daily energy
//! correction. All fits are ordinary least squares via a column-scaled QR
//! decomposition.

use std::collections::HashMap;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::deviation::DailyEnergy;
use crate::error::{Error, Result};
use crate::ingestion::{MeasurementRecord, MeasurementSeries, PlantConfig, TicketCalendar, G_STC, SLOT_MINUTES};

/// Relative pivot size below which a design matrix is treated as rank deficient.
const RANK_TOLERANCE: f64 = 1e-10;
/// Days below this in-plane irradiation (kWh/m²) are left out of the empirical fit.
pub const EMPIRICAL_MIN_IRRADIATION: f64 = 2.0;
pub const EMPIRICAL_MIN_DAYS: usize = 20;
/// Residuals beyond this many standard deviations are outliers in the empirical fit.
pub const EMPIRICAL_OUTLIER_SIGMAS: f64 = 3.0;

/// Solves `min ||A x - b||²`. Columns are scaled to unit max-norm before the
/// QR factorisation so that irradiance and its square are conditioned alike.
pub(crate) fn least_squares(mut design: DMatrix<f64>, target: DVector<f64>) -> Result<Vec<f64>> {
    let (rows, cols) = design.shape();
    if rows < cols {
        return Err(Error::InsufficientData(format!(
            "{rows} rows for {cols} coefficients"
        )));
    }
    let mut scales = Vec::with_capacity(cols);
    for j in 0..cols {
        let mut col = design.column_mut(j);
        let s = col.amax();
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::DegenerateFit(format!("regressor {j} is identically zero")));
        }
        col /= s;
        scales.push(s);
    }
    let qr = design.qr();
    let r = qr.r();
    let max_pivot = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    for i in 0..cols {
        if r[(i, i)].abs() <= RANK_TOLERANCE * max_pivot {
            return Err(Error::DegenerateFit("design matrix is rank deficient".into()));
        }
    }
    let qtb = qr.q().transpose() * target;
    let x = r
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::DegenerateFit("singular triangular factor".into()))?;
    let coefs: Vec<f64> = x.iter().zip(&scales).map(|(v, s)| v / s).collect();
    if coefs.iter().any(|c| !c.is_finite()) {
        return Err(Error::DegenerateFit("non-finite coefficient".into()));
    }
    Ok(coefs)
}

/// `P = a0 + a1·G + a2·G²` with P in kW and G in W/m².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyRegModel {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

pub fn fit_polyreg(train: &MeasurementSeries, tickets: &TicketCalendar) -> Result<PolyRegModel> {
    let rows: Vec<&MeasurementRecord> = train
        .valid()
        .filter(|r| !tickets.contains(&r.day()))
        .collect();
    if rows.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "polynomial fit needs 3 valid points, got {}",
            rows.len()
        )));
    }
    let design = DMatrix::from_fn(rows.len(), 3, |i, j| rows[i].irradiance.powi(j as i32));
    let target = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.ac_power));
    let c = least_squares(design, target)?;
    Ok(PolyRegModel {
        a0: c[0],
        a1: c[1],
        a2: c[2],
    })
}

/// Predicted AC power in kW; negative values are clamped to zero.
pub fn predict_polyreg(model: &PolyRegModel, g: f64) -> f64 {
    (model.a0 + model.a1 * g + model.a2 * g * g).max(0.0)
}

/// `P(t) = a1·P(t−1) + a2·P(t−2) + b0·G(t) + b1·G(t−1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArxModel {
    pub a1: f64,
    pub a2: f64,
    pub b0: f64,
    pub b1: f64,
}

/// Where the power lags come from when the ARX model is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArxLagSource {
    /// One-step-ahead: lags are the measured power values.
    #[default]
    Measured,
    /// Free-run simulation: lags are the model's own previous outputs,
    /// seeded with the first two measured values of each contiguous run.
    Simulated,
}

fn is_next_slot(prev: &MeasurementRecord, next: &MeasurementRecord) -> bool {
    next.timestamp - prev.timestamp == Duration::minutes(SLOT_MINUTES)
}

/// Indices `t` such that records `t−2, t−1, t` are valid and occupy three
/// consecutive 5-minute slots.
pub fn arx_rows(records: &[MeasurementRecord]) -> Vec<usize> {
    (2..records.len())
        .filter(|&t| {
            let (r2, r1, r0) = (&records[t - 2], &records[t - 1], &records[t]);
            r2.is_valid()
                && r1.is_valid()
                && r0.is_valid()
                && is_next_slot(r2, r1)
                && is_next_slot(r1, r0)
        })
        .collect()
}

pub fn fit_arx(train: &MeasurementSeries, tickets: &TicketCalendar) -> Result<ArxModel> {
    let recs = &train.records;
    let rows: Vec<usize> = arx_rows(recs)
        .into_iter()
        .filter(|&t| !tickets.contains(&recs[t].day()) && !tickets.contains(&recs[t - 2].day()))
        .collect();
    if rows.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "ARX fit needs 4 contiguous triples of valid samples, got {}",
            rows.len()
        )));
    }
    let design = DMatrix::from_fn(rows.len(), 4, |i, j| {
        let t = rows[i];
        match j {
            0 => recs[t - 1].ac_power,
            1 => recs[t - 2].ac_power,
            2 => recs[t].irradiance,
            _ => recs[t - 1].irradiance,
        }
    });
    let target = DVector::from_iterator(rows.len(), rows.iter().map(|&t| recs[t].ac_power));
    let c = least_squares(design, target)?;
    Ok(ArxModel {
        a1: c[0],
        a2: c[1],
        b0: c[2],
        b1: c[3],
    })
}

pub fn predict_arx(model: &ArxModel, p_lag1: f64, p_lag2: f64, g: f64, g_lag1: f64) -> f64 {
    (model.a1 * p_lag1 + model.a2 * p_lag2 + model.b0 * g + model.b1 * g_lag1).max(0.0)
}

/// Daily correction `φ(H) = a·H + b` of the nominal energy, with `sigma` the
/// RMS difference between corrected expected and measured daily energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalModel {
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
}

impl EmpiricalModel {
    pub fn correction(&self, h_poa: f64) -> f64 {
        self.a * h_poa + self.b
    }
}

/// Nominal daily energy `P_nom · H_POA / G_STC` in kWh (H in kWh/m²).
pub fn nominal_energy(p_nom: f64, h_poa: f64) -> f64 {
    p_nom * h_poa / (G_STC / 1000.0)
}

fn fit_ratio_line(days: &[&DailyEnergy], p_nom: f64) -> Result<(f64, f64)> {
    let design = DMatrix::from_fn(days.len(), 2, |i, j| if j == 0 { days[i].h_poa } else { 1.0 });
    let target = DVector::from_iterator(
        days.len(),
        days.iter().map(|d| d.e_meas / nominal_energy(p_nom, d.h_poa)),
    );
    let c = least_squares(design, target)?;
    Ok((c[0], c[1]))
}

pub fn fit_empirical(
    train_daily: &[DailyEnergy],
    tickets: &TicketCalendar,
    config: &PlantConfig,
) -> Result<EmpiricalModel> {
    let p_nom = config.p_nom;
    let admissible: Vec<&DailyEnergy> = train_daily
        .iter()
        .filter(|d| !tickets.contains(&d.day) && d.h_poa >= EMPIRICAL_MIN_IRRADIATION)
        .collect();
    let need = |n: usize| {
        if n < EMPIRICAL_MIN_DAYS {
            Err(Error::InsufficientData(format!(
                "empirical fit needs {EMPIRICAL_MIN_DAYS} admissible days, got {n}"
            )))
        } else {
            Ok(())
        }
    };
    need(admissible.len())?;

    let (a, b) = fit_ratio_line(&admissible, p_nom)?;
    let residuals: Vec<f64> = admissible
        .iter()
        .map(|d| d.e_meas / nominal_energy(p_nom, d.h_poa) - (a * d.h_poa + b))
        .collect();
    let spread = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
    let kept: Vec<&DailyEnergy> = admissible
        .iter()
        .zip(&residuals)
        .filter(|(_, r)| spread == 0.0 || r.abs() <= EMPIRICAL_OUTLIER_SIGMAS * spread)
        .map(|(d, _)| *d)
        .collect();
    need(kept.len())?;

    let (a, b) = fit_ratio_line(&kept, p_nom)?;
    let model = EmpiricalModel { a, b, sigma: 0.0 };
    let sse: f64 = kept
        .iter()
        .map(|d| {
            let e_exp = nominal_energy(p_nom, d.h_poa) * model.correction(d.h_poa);
            (e_exp - d.e_meas).powi(2)
        })
        .sum();
    Ok(EmpiricalModel {
        sigma: (sse / kept.len() as f64).sqrt(),
        ..model
    })
}

/// Expected daily energy in kWh, clamped at zero.
pub fn predict_empirical(model: &EmpiricalModel, h_poa: f64, p_nom: f64) -> f64 {
    (nominal_energy(p_nom, h_poa) * model.correction(h_poa)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// Mean absolute percentage deviation, percent.
    pub mapd: f64,
    pub n_points: usize,
    /// Pairs left out because the measured value was below the floor.
    pub excluded: usize,
}

/// Mean absolute percentage deviation between measured and predicted
/// values. Pairs whose measured magnitude is below `min_measured` are
/// excluded.
pub fn mapd(measured: &[f64], predicted: &[f64], min_measured: f64) -> Result<AccuracyReport> {
    if measured.len() != predicted.len() {
        return Err(Error::Misuse(format!(
            "measured ({}) and predicted ({}) lengths differ",
            measured.len(),
            predicted.len()
        )));
    }
    let floor = min_measured.max(f64::MIN_POSITIVE);
    let mut sum = 0.0;
    let mut n = 0usize;
    for (m, p) in measured.iter().zip(predicted) {
        if m.abs() >= floor {
            sum += (m - p).abs() / m.abs();
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::InsufficientData("no pairs above the measurement floor".into()));
    }
    Ok(AccuracyReport {
        mapd: 100.0 * sum / n as f64,
        n_points: n,
        excluded: measured.len() - n,
    })
}

/// A fitted performance model of any supported kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FittedModel {
    #[serde(rename = "polyreg")]
    PolyReg(PolyRegModel),
    Arx(ArxModel),
    Empirical(EmpiricalModel),
}

/// Plain-text key-value form of a fitted model plus fit metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub plant_id: String,
    pub fitted_on_days: u32,
    pub training_points: usize,
    pub coefficients: FittedModel,
}

impl ModelDocument {
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("model document serializes")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let doc: ModelDocument =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let finite = match doc.coefficients {
            FittedModel::PolyReg(m) => [m.a0, m.a1, m.a2].iter().all(|v| v.is_finite()),
            FittedModel::Arx(m) => [m.a1, m.a2, m.b0, m.b1].iter().all(|v| v.is_finite()),
            FittedModel::Empirical(m) => {
                m.a.is_finite() && m.b.is_finite() && m.sigma.is_finite() && m.sigma >= 0.0
            }
        };
        if !finite {
            return Err(Error::Config("model coefficients must be finite".into()));
        }
        Ok(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

impl FittedModel {
    /// Sample-level expected AC power (kW) for every record. `None` marks
    /// records that are not valid, or ARX slots without contiguous lags.
    /// `daily_h_poa` supplies the day's irradiation for the empirical model.
    pub fn predict_series(
        &self,
        series: &MeasurementSeries,
        daily_h_poa: &HashMap<NaiveDate, f64>,
        p_nom: f64,
        lag_source: ArxLagSource,
    ) -> Vec<Option<f64>> {
        let recs = &series.records;
        match self {
            FittedModel::PolyReg(m) => recs
                .iter()
                .map(|r| r.is_valid().then(|| predict_polyreg(m, r.irradiance)))
                .collect(),
            FittedModel::Empirical(m) => recs
                .iter()
                .map(|r| {
                    if !r.is_valid() {
                        return None;
                    }
                    let h = daily_h_poa.get(&r.day())?;
                    Some((p_nom * r.irradiance / G_STC * m.correction(*h)).max(0.0))
                })
                .collect(),
            FittedModel::Arx(m) => predict_arx_series(m, recs, lag_source),
        }
    }
}

fn predict_arx_series(
    model: &ArxModel,
    recs: &[MeasurementRecord],
    lag_source: ArxLagSource,
) -> Vec<Option<f64>> {
    let mut out = vec![None; recs.len()];
    for t in arx_rows(recs) {
        let (p1, p2) = match lag_source {
            ArxLagSource::Measured => (recs[t - 1].ac_power, recs[t - 2].ac_power),
            ArxLagSource::Simulated => (
                out[t - 1].unwrap_or(recs[t - 1].ac_power),
                out[t - 2].unwrap_or(recs[t - 2].ac_power),
            ),
        };
        out[t] = Some(predict_arx(model, p1, p2, recs[t].irradiance, recs[t - 1].irradiance));
    }
    out
}
