//! Reproducible synthetic plants: clear-sky envelope with cloud noise, a
//! power model with irradiance roll-off, a seasonal temperature proxy and
//! autocorrelated mismatch noise, and fault injection with matching
//! tickets.

use std::f64::consts::PI;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingestion::{MeasurementRecord, MeasurementSeries, PlantConfig, TicketBook, TicketCalendar, SLOT_MINUTES};

pub const MAX_IRRADIANCE: f64 = 1400.0;
const SLOTS_PER_DAY: i64 = 24 * 60 / SLOT_MINUTES;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeatherModel {
    pub seed: u64,
    pub start: NaiveDate,
    pub latitude_deg: f64,
    /// Plane-of-array irradiance with the sun at the zenith, W/m².
    pub peak_irradiance: f64,
    /// Probability that a day is overcast.
    pub overcast_probability: f64,
    /// Daily clearness index ranges for overcast and clear days.
    pub overcast_clearness: (f64, f64),
    pub clear_clearness: (f64, f64),
    /// Standard deviation of intra-day cloud modulation on broken-cloud days.
    pub cloud_noise: f64,
    /// Slot-to-slot persistence of the cloud modulation.
    pub cloud_persistence: f64,
}

impl Default for WeatherModel {
    fn default() -> Self {
        Self {
            seed: 0,
            start: NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date"),
            latitude_deg: 50.0,
            peak_irradiance: 1150.0,
            overcast_probability: 0.3,
            overcast_clearness: (0.2, 0.5),
            clear_clearness: (0.65, 1.0),
            cloud_noise: 0.15,
            cloud_persistence: 0.9,
        }
    }
}

/// Plant-side conversion from irradiance to AC power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerModel {
    /// System efficiency at low irradiance and 25 °C.
    pub base_efficiency: f64,
    /// Efficiency loss `κ·(G/1000)²`.
    pub rolloff: f64,
    /// Relative power change per kelvin of module temperature above 25 °C.
    pub temperature_coefficient: f64,
    pub ambient_mean_c: f64,
    pub ambient_amplitude_c: f64,
    /// Module heating at 1000 W/m², K.
    pub module_heating_k: f64,
    /// White multiplicative noise.
    pub white_noise: f64,
    /// Stationary standard deviation of the AR(1) multiplicative noise.
    pub ar_noise: f64,
    pub ar_persistence: f64,
    /// Output ceiling as a multiple of P_nom.
    pub clip: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            base_efficiency: 0.9,
            rolloff: 0.06,
            temperature_coefficient: -0.0035,
            ambient_mean_c: 10.0,
            ambient_amplitude_c: 8.0,
            module_heating_k: 20.0,
            white_noise: 0.01,
            ar_noise: 0.02,
            ar_persistence: 0.97,
            clip: 1.1,
        }
    }
}

impl PowerModel {
    /// Noise-free power for irradiance `g` at ambient temperature `ambient`.
    pub fn ideal_power(&self, p_nom: f64, g: f64, ambient: f64) -> f64 {
        let x = g / 1000.0;
        let t_module = ambient + self.module_heating_k * x;
        let eta = self.base_efficiency
            * (1.0 - self.rolloff * x * x)
            * (1.0 + self.temperature_coefficient * (t_module - 25.0));
        p_nom * x * eta
    }
}

fn sin_elevation(latitude_deg: f64, day_of_year: u32, hour: f64) -> f64 {
    let lat = latitude_deg.to_radians();
    let decl = (23.44f64).to_radians() * (2.0 * PI * (day_of_year as f64 - 81.0) / 365.0).sin();
    let hour_angle = (15.0 * (hour - 12.0)).to_radians();
    lat.sin() * decl.sin() + lat.cos() * decl.cos() * hour_angle.cos()
}

fn ambient_temperature(power: &PowerModel, day_of_year: u32) -> f64 {
    // Warmest around late July.
    power.ambient_mean_c
        + power.ambient_amplitude_c * (2.0 * PI * (day_of_year as f64 - 110.0) / 365.0).sin()
}

fn round_to(v: f64, step: f64) -> f64 {
    (v / step).round() * step
}

/// Simulates `days` days on the full 5-minute grid starting at midnight of
/// `weather.start`. Night slots carry zero irradiance and power.
pub fn generate_plant(config: &PlantConfig, weather: &WeatherModel, power: &PowerModel, days: u32) -> MeasurementSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(weather.seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
    let ar_innov = power.ar_noise * (1.0 - power.ar_persistence.powi(2)).max(0.0).sqrt();
    let cloud_innov = (1.0 - weather.cloud_persistence.powi(2)).max(0.0).sqrt();
    let mut ar_state = 0.0;
    let mut records = Vec::with_capacity(days as usize * SLOTS_PER_DAY as usize);

    for d in 0..days {
        let date = weather.start + Duration::days(i64::from(d));
        let doy = date.ordinal();
        let overcast = rng.random::<f64>() < weather.overcast_probability;
        let (lo, hi) = if overcast {
            weather.overcast_clearness
        } else {
            weather.clear_clearness
        };
        let clearness = rng.random_range(lo..=hi);
        // Broken clouds are strongest on intermediate days.
        let cloud_sd = weather.cloud_noise * 4.0 * clearness * (1.0 - clearness);
        let ambient = ambient_temperature(power, doy) + 2.0 * normal(&mut rng) + 6.0 * (clearness - 0.6);
        let mut cloud = 0.0;
        let midnight = date.and_hms_opt(0, 0, 0).expect("midnight exists");

        for slot in 0..SLOTS_PER_DAY {
            let timestamp = midnight + Duration::minutes(slot * SLOT_MINUTES);
            let hour = (slot * SLOT_MINUTES) as f64 / 60.0;
            let elev = sin_elevation(weather.latitude_deg, doy, hour);
            cloud = weather.cloud_persistence * cloud + cloud_innov * normal(&mut rng);
            ar_state = power.ar_persistence * ar_state + ar_innov * normal(&mut rng);
            let white = power.white_noise * normal(&mut rng);
            if elev <= 0.0 {
                records.push(MeasurementRecord::new(timestamp, 0.0, 0.0));
                continue;
            }
            let clear_sky = weather.peak_irradiance * elev.powf(0.8);
            let g = (clear_sky * clearness * (1.0 + cloud_sd * cloud)).clamp(0.0, MAX_IRRADIANCE);
            let p = power.ideal_power(config.p_nom, g, ambient) * (1.0 + ar_state + white);
            let p = p.clamp(0.0, power.clip * config.p_nom);
            records.push(MeasurementRecord::new(timestamp, round_to(g, 0.01), round_to(p, 0.001)));
        }
    }
    MeasurementSeries::new(config.plant_id.clone(), records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    Outage,
    PartialDerate,
    /// Derate growing linearly to `magnitude` on the last episode day.
    Drift,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultEpisode {
    pub start: NaiveDate,
    pub duration_days: u32,
    pub kind: FaultKind,
    /// Fractional power loss.
    pub magnitude: f64,
}

impl FaultEpisode {
    pub fn end(&self) -> NaiveDate {
        self.start + Duration::days(i64::from(self.duration_days) - 1)
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.duration_days).map(move |i| self.start + Duration::days(i64::from(i)))
    }

    /// Power loss fraction on `day`, or `None` outside the episode.
    pub fn derate_on(&self, day: NaiveDate) -> Option<f64> {
        if day < self.start || day > self.end() {
            return None;
        }
        let k = (day - self.start).num_days() as f64 + 1.0;
        Some(match self.kind {
            FaultKind::Outage => 1.0,
            FaultKind::PartialDerate => self.magnitude,
            FaultKind::Drift => self.magnitude * k / f64::from(self.duration_days),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FaultPlan {
    pub episodes: Vec<FaultEpisode>,
}

impl FaultPlan {
    pub fn validate(&self) -> Result<()> {
        for e in &self.episodes {
            if e.duration_days == 0 {
                return Err(Error::Plan(format!("episode at {} has zero duration", e.start)));
            }
            if !(e.magnitude > 0.0 && e.magnitude <= 1.0) {
                return Err(Error::Plan(format!(
                    "episode at {} has magnitude {} outside (0, 1]",
                    e.start, e.magnitude
                )));
            }
        }
        let mut sorted: Vec<&FaultEpisode> = self.episodes.iter().collect();
        sorted.sort_by_key(|e| e.start);
        for w in sorted.windows(2) {
            if w[1].start <= w[0].end() {
                return Err(Error::Plan(format!(
                    "episodes starting {} and {} overlap",
                    w[0].start, w[1].start
                )));
            }
        }
        Ok(())
    }

    pub fn ticket_days(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.episodes.iter().flat_map(FaultEpisode::days)
    }
}

/// Applies every episode to the series and returns the ticket calendar of
/// all episode days.
pub fn inject_faults(series: &MeasurementSeries, plan: &FaultPlan) -> Result<(MeasurementSeries, TicketCalendar)> {
    plan.validate()?;
    let mut out = series.clone();
    for r in &mut out.records {
        let day = r.day();
        if let Some(loss) = plan.episodes.iter().find_map(|e| e.derate_on(day)) {
            r.ac_power *= 1.0 - loss;
        }
    }
    let mut tickets = TicketCalendar::new(series.plant_id.clone());
    tickets.ticketed_days.extend(plan.ticket_days());
    Ok((out, tickets))
}

/// Removes a random `fraction` of ticket days, emulating unrecorded faults.
pub fn drop_tickets(calendar: &TicketCalendar, fraction: f64, seed: u64) -> TicketCalendar {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = TicketCalendar::new(calendar.plant_id.clone());
    for day in calendar.iter() {
        if rng.random::<f64>() >= fraction {
            out.insert(*day);
        }
    }
    out
}

/// Draws `count` non-overlapping episodes inside `[window_start,
/// window_start + window_days)`. The window is cut into equal slots with
/// one episode placed at random in each, leaving at least one clean day
/// between episodes.
pub fn random_fault_plan(rng: &mut impl Rng, window_start: NaiveDate, window_days: u32, faults: &FaultSpec) -> Result<FaultPlan> {
    let count = faults.episodes_per_plant;
    if count == 0 {
        return Ok(FaultPlan::default());
    }
    if faults.kinds.is_empty() {
        return Err(Error::Plan("no fault kinds to draw from".into()));
    }
    let slot = window_days / count;
    if slot < faults.duration_max + 1 {
        return Err(Error::Plan(format!(
            "{count} episodes of up to {} days do not fit in {window_days} days",
            faults.duration_max
        )));
    }
    let mut episodes = Vec::with_capacity(count as usize);
    for i in 0..count {
        let duration = rng.random_range(faults.duration_min..=faults.duration_max);
        let offset = rng.random_range(0..=(slot - duration - 1));
        let kind = faults.kinds[rng.random_range(0..faults.kinds.len())];
        let magnitude = match kind {
            FaultKind::Outage => 1.0,
            _ => round_to(rng.random_range(faults.magnitude_min..=faults.magnitude_max), 0.01),
        };
        episodes.push(FaultEpisode {
            start: window_start + Duration::days(i64::from(i * slot + offset)),
            duration_days: duration,
            kind,
            magnitude,
        });
    }
    let plan = FaultPlan { episodes };
    plan.validate()?;
    Ok(plan)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultWindow {
    /// Episodes only after the training period.
    #[default]
    Evaluation,
    /// Episodes anywhere in the series.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaultSpec {
    pub episodes_per_plant: u32,
    pub kinds: Vec<FaultKind>,
    pub magnitude_min: f64,
    pub magnitude_max: f64,
    pub duration_min: u32,
    pub duration_max: u32,
    pub window: FaultWindow,
    /// Fraction of fault days left without a ticket.
    pub ticket_drop_fraction: f64,
}

impl Default for FaultSpec {
    fn default() -> Self {
        Self {
            episodes_per_plant: 5,
            kinds: vec![FaultKind::Outage, FaultKind::PartialDerate],
            magnitude_min: 0.3,
            magnitude_max: 0.8,
            duration_min: 1,
            duration_max: 10,
            window: FaultWindow::Evaluation,
            ticket_drop_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitPlan {
    pub plant: String,
    pub episodes: Vec<FaultEpisode>,
}

/// Declarative description of a synthetic portfolio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PortfolioSpec {
    pub seed: u64,
    pub plants: u32,
    pub days: u32,
    pub start: NaiveDate,
    pub p_nom_min: f64,
    pub p_nom_max: f64,
    pub training_days: u32,
    pub faults: FaultSpec,
    pub weather: WeatherModel,
    pub power: PowerModel,
    /// Replace the random plan of the named plants.
    pub plans: Vec<ExplicitPlan>,
}

impl Default for PortfolioSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            plants: 10,
            days: 730,
            start: NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date"),
            p_nom_min: 55.0,
            p_nom_max: 1550.0,
            training_days: 365,
            faults: FaultSpec::default(),
            weather: WeatherModel::default(),
            power: PowerModel::default(),
            plans: Vec::new(),
        }
    }
}

impl PortfolioSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: PortfolioSpec = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.plants == 0 {
            return Err(Error::Config("plants must be >= 1".into()));
        }
        if self.days == 0 {
            return Err(Error::Config("days must be >= 1".into()));
        }
        if !(self.p_nom_min > 0.0 && self.p_nom_min <= self.p_nom_max && self.p_nom_max.is_finite()) {
            return Err(Error::Config("need 0 < p_nom_min <= p_nom_max".into()));
        }
        let f = &self.faults;
        if f.duration_min == 0 || f.duration_min > f.duration_max {
            return Err(Error::Config("need 1 <= duration_min <= duration_max".into()));
        }
        if !(f.magnitude_min > 0.0 && f.magnitude_min <= f.magnitude_max && f.magnitude_max <= 1.0) {
            return Err(Error::Config("need 0 < magnitude_min <= magnitude_max <= 1".into()));
        }
        if !(0.0..=1.0).contains(&f.ticket_drop_fraction) {
            return Err(Error::Config("ticket_drop_fraction must be in [0, 1]".into()));
        }
        let w = &self.weather;
        if !(0.0..=1.0).contains(&w.overcast_probability)
            || !(w.overcast_clearness.0 <= w.overcast_clearness.1)
            || !(w.clear_clearness.0 <= w.clear_clearness.1)
            || !(0.0..1.0).contains(&w.cloud_persistence)
            || !(0.0..1.0).contains(&self.power.ar_persistence)
        {
            return Err(Error::Config("weather or power parameters out of range".into()));
        }
        Ok(())
    }

    pub fn plant_id(index: u32) -> String {
        format!("plant-{index:03}")
    }

    fn plant_seed(&self, index: u32, stream: u64) -> u64 {
        // splitmix-style mixing keeps per-plant streams independent.
        let mut z = self
            .seed
            .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(u64::from(index) * 4 + stream + 1));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Builds plant `index` of the portfolio.
    pub fn synthesize(&self, index: u32) -> Result<SyntheticPlant> {
        let plant_id = Self::plant_id(index);
        let mut rng = ChaCha8Rng::seed_from_u64(self.plant_seed(index, 0));
        let log_p = rng.random_range(self.p_nom_min.ln()..=self.p_nom_max.ln());
        let mut config = PlantConfig::new(plant_id.clone(), round_to(log_p.exp(), 0.1).max(0.1));
        config.training_days = self.training_days;

        let weather = WeatherModel {
            seed: self.plant_seed(index, 1),
            start: self.start,
            ..self.weather
        };
        let clean = generate_plant(&config, &weather, &self.power, self.days);

        let plan = match self.plans.iter().find(|p| p.plant == plant_id) {
            Some(p) => FaultPlan {
                episodes: p.episodes.clone(),
            },
            None => {
                let (window_start, window_days) = match self.faults.window {
                    FaultWindow::Evaluation => (
                        self.start + Duration::days(i64::from(self.training_days)),
                        self.days.saturating_sub(self.training_days),
                    ),
                    FaultWindow::All => (self.start, self.days),
                };
                random_fault_plan(&mut rng, window_start, window_days, &self.faults)?
            }
        };
        let (series, tickets) = inject_faults(&clean, &plan)?;
        let tickets = if self.faults.ticket_drop_fraction > 0.0 {
            drop_tickets(&tickets, self.faults.ticket_drop_fraction, self.plant_seed(index, 2))
        } else {
            tickets
        };
        Ok(SyntheticPlant {
            config,
            series,
            tickets,
            plan,
        })
    }

    pub fn synthesize_all(&self) -> Result<Vec<SyntheticPlant>> {
        (0..self.plants).map(|i| self.synthesize(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPlant {
    pub config: PlantConfig,
    pub series: MeasurementSeries,
    pub tickets: TicketCalendar,
    pub plan: FaultPlan,
}

pub fn ticket_book(plants: &[SyntheticPlant]) -> TicketBook {
    let mut book = TicketBook::default();
    for p in plants {
        if !p.tickets.is_empty() {
            book.insert(p.tickets.clone());
        }
    }
    book
}
