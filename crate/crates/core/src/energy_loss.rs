//! Daily energy-loss estimate used to weight tickets by relevance.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::deviation::DailyEnergy;
use crate::models::{nominal_energy, EmpiricalModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyLoss {
    pub day: NaiveDate,
    pub e_nom: f64,
    pub e_exp: f64,
    /// `max(0, E_exp − 2σ − E_meas)`, kWh.
    pub e_loss: f64,
    /// Specific loss, kWh/kWp.
    pub se_loss: f64,
    /// Performance loss `E_loss / E_exp`, clamped to [0, 1].
    pub pl: f64,
}

/// Loss for a single day given its expected and measured energy.
pub fn loss_for(day: NaiveDate, e_nom: f64, e_exp: f64, e_meas: f64, sigma: f64, p_nom: f64) -> DailyLoss {
    let e_loss = (e_exp - 2.0 * sigma - e_meas).max(0.0);
    let pl = if e_exp > 0.0 { (e_loss / e_exp).clamp(0.0, 1.0) } else { 0.0 };
    DailyLoss {
        day,
        e_nom,
        e_exp,
        e_loss,
        se_loss: e_loss / p_nom,
        pl,
    }
}

pub fn daily_loss(daily: &[DailyEnergy], model: &EmpiricalModel, p_nom: f64) -> Vec<DailyLoss> {
    daily
        .iter()
        .map(|d| {
            let e_nom = nominal_energy(p_nom, d.h_poa);
            let e_exp = e_nom * model.correction(d.h_poa);
            loss_for(d.day, e_nom, e_exp, d.e_meas, model.sigma, p_nom)
        })
        .collect()
}

/// Bin edges are upper-inclusive performance-loss fractions; returns
/// `(ticket_count, se_loss_sum)` per bin.
pub fn pl_histogram(losses: &[DailyLoss], edges: &[f64]) -> Vec<(usize, f64)> {
    let mut bins = vec![(0usize, 0.0f64); edges.len()];
    for l in losses {
        if let Some(i) = edges.iter().position(|&e| l.pl <= e) {
            bins[i].0 += 1;
            bins[i].1 += l.se_loss;
        }
    }
    bins
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day() -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 7, 1).unwrap()
    }

    #[test]
    fn loss_values() {
        let l = loss_for(day(), 100.0, 100.0, 80.0, 5.0, 100.0);
        assert!((l.e_loss - 10.0).abs() < 1e-12);
        assert!((l.se_loss - 0.1).abs() < 1e-12);
        assert!((l.pl - 0.1).abs() < 1e-12);
        let none = loss_for(day(), 100.0, 100.0, 95.0, 5.0, 100.0);
        assert_eq!(none.e_loss, 0.0);
        let zero_exp = loss_for(day(), 0.0, 0.0, 0.0, 0.0, 100.0);
        assert_eq!(zero_exp.pl, 0.0);
    }

    #[test]
    fn daily_loss_uses_correction() {
        let m = EmpiricalModel { a: -0.01, b: 0.95, sigma: 5.0 };
        let d = DailyEnergy { day: day(), e_meas: 400.0, h_poa: 5.0, samples: 120 };
        let l = daily_loss(&[d], &m, 100.0);
        assert!((l[0].e_nom - 500.0).abs() < 1e-9);
        assert!((l[0].e_exp - 450.0).abs() < 1e-9);
        assert!((l[0].e_loss - 40.0).abs() < 1e-9);
    }

    #[test]
    fn histogram_bins() {
        let ls = [
            loss_for(day(), 100.0, 100.0, 97.0, 0.0, 10.0),
            loss_for(day(), 100.0, 100.0, 50.0, 0.0, 10.0),
        ];
        let h = pl_histogram(&ls, &[0.05, 0.5, 1.0]);
        assert_eq!(h[0].0, 1);
        assert_eq!(h[1].0, 1);
        assert_eq!(h[2].0, 0);
    }
}
