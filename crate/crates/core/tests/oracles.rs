use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use pvafd_core::clustering::{kmeans_1d, kmeans_1d_optimal};
use pvafd_core::deviation::{GroupingScheme, SampleGroup};
use pvafd_core::evaluation::roc_from_observations;
use pvafd_core::ingestion::{MeasurementRecord, MeasurementSeries, TicketCalendar};
use pvafd_core::models::{fit_arx, fit_polyreg, mapd};
use pvafd_core::spc::{estimate_stats, ewma_sigma};

fn ts(i: usize) -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2020, 6, 1).unwrap().and_hms_opt(6, 0, 0).unwrap() + Duration::minutes(5 * i as i64)
}

/// Gaussian elimination with partial pivoting on the normal equations.
fn normal_equations(rows: &[Vec<f64>], target: &[f64]) -> Vec<f64> {
    let p = rows[0].len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (x, y) in rows.iter().zip(target) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += x[i] * x[j];
            }
            a[i][p] += x[i] * y;
        }
    }
    for col in 0..p {
        let pivot = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        for r in col + 1..p {
            let f = a[r][col] / a[col][col];
            for c in col..=p {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|j| a[i][j] * x[j]).sum();
        x[i] = (a[i][p] - s) / a[i][i];
    }
    x
}

fn assert_close(a: f64, b: f64, rel: f64) {
    assert!((a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-12), "{a} vs {b}");
}

#[test]
fn polyreg_agrees_with_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let records: Vec<MeasurementRecord> = (0..400)
        .map(|i| {
            let g = rng.random_range(60.0..1200.0);
            let p = 0.5 + 0.09 * g - 8e-6 * g * g + rng.sample::<f64, _>(StandardNormal);
            MeasurementRecord::new(ts(i), g, p)
        })
        .collect();
    let series = MeasurementSeries::new("p", records.clone());
    let fit = fit_polyreg(&series, &TicketCalendar::new("p")).unwrap();
    // Work in kW/m² so that the normal equations stay well conditioned.
    let rows: Vec<Vec<f64>> = records.iter().map(|r| {
        let g = r.irradiance / 1000.0;
        vec![1.0, g, g * g]
    }).collect();
    let target: Vec<f64> = records.iter().map(|r| r.ac_power).collect();
    let x = normal_equations(&rows, &target);
    assert_close(fit.a0, x[0], 1e-7);
    assert_close(fit.a1, x[1] / 1000.0, 1e-7);
    assert_close(fit.a2, x[2] / 1e6, 1e-7);
}

#[test]
fn arx_agrees_with_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut g: Vec<f64> = vec![500.0];
    let mut p: Vec<f64> = vec![40.0, 41.0];
    for t in 1..600 {
        g.push((g[t - 1] + rng.random_range(-40.0..40.0)).clamp(80.0, 1100.0));
    }
    for t in 2..600 {
        let next = 0.5 * p[t - 1] + 0.2 * p[t - 2] + 0.02 * g[t] + 0.01 * g[t - 1] + 0.3 * rng.sample::<f64, _>(StandardNormal);
        p.push(next);
    }
    let records: Vec<MeasurementRecord> = (0..600).map(|t| MeasurementRecord::new(ts(t), g[t], p[t])).collect();
    let fit = fit_arx(&MeasurementSeries::new("p", records), &TicketCalendar::new("p")).unwrap();
    let rows: Vec<Vec<f64>> = (2..600).map(|t| vec![p[t - 1], p[t - 2], g[t] / 1000.0, g[t - 1] / 1000.0]).collect();
    let x = normal_equations(&rows, &p[2..]);
    assert_close(fit.a1, x[0], 1e-7);
    assert_close(fit.a2, x[1], 1e-7);
    assert_close(fit.b0, x[2] / 1000.0, 1e-7);
    assert_close(fit.b1, x[3] / 1000.0, 1e-7);
}

#[test]
fn mapd_by_hand() {
    let r = mapd(&[10.0, 20.0, 0.1, 40.0], &[11.0, 18.0, 5.0, 40.0], 1.0).unwrap();
    // (10% + 10% + 0%) over the three samples above the floor.
    assert_close(r.mapd, 20.0 / 3.0, 1e-12);
}

/// Exhaustive search over all assignments of points to k labels.
fn exhaustive_sse(values: &[f64], k: usize) -> f64 {
    let n = values.len();
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    loop {
        let mut sse = 0.0;
        let mut used = 0;
        for c in 0..k {
            let members: Vec<f64> = values.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(v, _)| *v).collect();
            if members.is_empty() {
                continue;
            }
            used += 1;
            let mean = members.iter().sum::<f64>() / members.len() as f64;
            sse += members.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        }
        if used == k {
            best = best.min(sse);
        }
        let mut i = 0;
        while i < n && labels[i] == k - 1 {
            labels[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
        labels[i] += 1;
    }
}

#[test]
fn kmeans_against_exhaustive_assignment() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let n = rng.random_range(3..=9);
        let k = rng.random_range(2..=3);
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let oracle = exhaustive_sse(&values, k);
        let exact = kmeans_1d_optimal(&values, k).unwrap();
        assert!((exact.sse - oracle).abs() <= 1e-9 * oracle.max(1e-12), "{values:?} k={k}");
        let lloyd = kmeans_1d(&values, k, 1000).unwrap();
        assert!(lloyd.sse >= oracle - 1e-9 * oracle.max(1e-12));
    }
}

#[test]
fn ewma_sigma_against_recursion() {
    // Var(z_t) = (1 − λ)² Var(z_{t−1}) + λ² σ².
    for lambda in [0.1, 0.2, 0.7] {
        let mut var = 0.0;
        for t in 1..=200u32 {
            var = (1.0 - lambda) * (1.0 - lambda) * var + lambda * lambda * 4.0;
            assert_close(ewma_sigma(2.0, lambda, t), var.sqrt(), 1e-12);
        }
    }
}

#[test]
fn adjacent_range_by_hand() {
    let values = [1.0, 3.0, 2.0, 6.0, 5.0, 5.0, 4.0, 7.0, 3.0, 4.0, 2.0, 2.5, 3.5, 1.0, 2.0, 4.0, 3.0, 5.0, 2.0, 4.0, 3.0];
    let groups: Vec<SampleGroup> = values.iter().enumerate().map(|(i, &v)| SampleGroup::from_values(ts(i), vec![v])).collect();
    let s = estimate_stats(&groups, GroupingScheme::FiveMinSingle).unwrap();
    let mr: f64 = values.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / 20.0;
    assert_close(s.sigma, mr / 1.128, 1e-12);
    assert_close(s.mu, values.iter().sum::<f64>() / 21.0, 1e-12);
}

#[test]
fn subgroup_range_by_hand() {
    let data = [
        [1.0, 2.0, 4.0, 3.0, 2.5, 2.0],
        [0.0, 1.0, 1.5, 3.0, 2.0, 1.0],
        [2.0, 2.0, 2.5, 3.5, 1.5, 2.0],
    ];
    let groups: Vec<SampleGroup> = (0..24)
        .map(|i| SampleGroup::from_values(ts(6 * i), data[i % 3].to_vec()))
        .collect();
    let s = estimate_stats(&groups, GroupingScheme::ThirtyMinGroup).unwrap();
    let rbar = (3.0 + 3.0 + 2.0) / 3.0;
    assert_close(s.sigma, rbar / 2.534, 1e-12);
}

/// Mann-Whitney: AUC is the probability a positive outscores a negative,
/// with ties counted as one half.
#[test]
fn auc_equals_rank_statistic() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let obs: Vec<(f64, bool)> = (0..300)
            .map(|_| {
                let pos = rng.random_bool(0.3);
                let f: f64 = rng.random_range(0..=20) as f64 / 20.0;
                (if pos { f.sqrt() } else { f }, pos)
            })
            .collect();
        let pos: Vec<f64> = obs.iter().filter(|o| o.1).map(|o| o.0).collect();
        let neg: Vec<f64> = obs.iter().filter(|o| !o.1).map(|o| o.0).collect();
        let mut wins = 0.0;
        for p in &pos {
            for n in &neg {
                wins += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
            }
        }
        let u = wins / (pos.len() * neg.len()) as f64;
        assert_close(roc_from_observations(&obs).unwrap().auc, u, 1e-12);
    }
}
