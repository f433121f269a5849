//! Equilibrium-window metrics over day series.
//!
//! All reports average the last few days of a run per seed and then average
//! across seeds.

use serde::{Deserialize, Serialize};

use crate::env::reward;
use crate::error::{config_err, Result};
use crate::sim::DaySummary;

/// Days at the end of a run that count as the equilibrium window.
pub const WINDOW_DAYS: usize = 6;

/// Window averages of one run, or the cross-seed mean of several.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Mean travel time over all travelers (min).
    pub aitt: f64,
    /// Mean travel time over car travelers only (min); `None` if nobody drove.
    pub car_aitt: Option<f64>,
    /// Token price ($/token); `None` when no market operates.
    pub token_price: Option<f64>,
    /// Transit share in percent.
    pub pt_share_pct: f64,
    pub welfare_per_capita: f64,
    pub reward: f64,
    pub toll_amplitude: f64,
    pub toll_center: f64,
    pub toll_width: f64,
    /// Max minus min of the daily amplitude within the window.
    pub oscillation: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Last-`window`-day averages of `days`.
///
/// Car-only AITT weights each day by its car share, so it is the mean over
/// all car trips in the window.
pub fn window_metrics(days: &[DaySummary], window: usize, free_flow_time: f64, pt_target: f64, market: bool) -> Result<MetricsReport> {
    if window == 0 || days.len() < window {
        return Err(config_err(format!("need at least {window} days, got {}", days.len())));
    }
    let w = &days[days.len() - window..];
    let car_weight: f64 = w.iter().filter(|d| d.car_aitt.is_some()).map(|d| 1.0 - d.pt_share).sum();
    let car_aitt = (car_weight > 0.0).then(|| {
        w.iter().filter_map(|d| d.car_aitt.map(|c| c * (1.0 - d.pt_share))).sum::<f64>() / car_weight
    });
    let amplitudes = w.iter().map(|d| d.amplitude);
    let max = amplitudes.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = amplitudes.fold(f64::INFINITY, f64::min);
    Ok(MetricsReport {
        aitt: mean(w.iter().map(|d| d.aitt)),
        car_aitt,
        token_price: market.then(|| mean(w.iter().map(|d| d.price))),
        pt_share_pct: 100.0 * mean(w.iter().map(|d| d.pt_share)),
        welfare_per_capita: mean(w.iter().map(|d| d.welfare_per_capita)),
        reward: mean(w.iter().map(|d| reward(d.aitt, d.pt_share, free_flow_time, pt_target))),
        toll_amplitude: mean(w.iter().map(|d| d.amplitude)),
        toll_center: mean(w.iter().map(|d| d.center)),
        toll_width: mean(w.iter().map(|d| d.width)),
        oscillation: max - min,
    })
}

/// Cross-seed mean of per-seed reports. Optional fields average over the
/// seeds where they are present.
pub fn average_reports(reports: &[MetricsReport]) -> Result<MetricsReport> {
    if reports.is_empty() {
        return Err(config_err("no reports to average"));
    }
    let avg = |f: fn(&MetricsReport) -> f64| mean(reports.iter().map(f));
    let avg_opt = |f: fn(&MetricsReport) -> Option<f64>| {
        let present: Vec<f64> = reports.iter().filter_map(f).collect();
        (!present.is_empty()).then(|| mean(present.into_iter()))
    };
    Ok(MetricsReport {
        aitt: avg(|r| r.aitt),
        car_aitt: avg_opt(|r| r.car_aitt),
        token_price: avg_opt(|r| r.token_price),
        pt_share_pct: avg(|r| r.pt_share_pct),
        welfare_per_capita: avg(|r| r.welfare_per_capita),
        reward: avg(|r| r.reward),
        toll_amplitude: avg(|r| r.toll_amplitude),
        toll_center: avg(|r| r.toll_center),
        toll_width: avg(|r| r.toll_width),
        oscillation: avg(|r| r.oscillation),
    })
}

/// Number of days in the last `window` whose net revenue stays within `±threshold`.
pub fn revenue_band_days(days: &[DaySummary], window: usize, threshold: f64) -> usize {
    days.iter().rev().take(window).filter(|d| d.net_revenue.abs() <= threshold).count()
}

#[cfg(test)]
pub(crate) fn day(day: u32, aitt: f64, amplitude: f64) -> DaySummary {
    DaySummary {
        day,
        amplitude,
        center: 443.05,
        width: 63.18,
        price: 1.2,
        aitt,
        car_aitt: Some(aitt + 5.0),
        pt_share: 0.2,
        net_revenue: 0.0,
        welfare_per_capita: -10.0,
        overrun: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_trace_reproduces_day_values() {
        let days: Vec<_> = (0..10).map(|d| day(d, 40.0, 3.0)).collect();
        let m = window_metrics(&days, 6, 24.0, 0.1, true).unwrap();
        assert_eq!(m.aitt, 40.0);
        assert!((m.car_aitt.unwrap() - 45.0).abs() < 1e-12);
        assert_eq!(m.token_price, Some(1.2));
        assert!((m.pt_share_pct - 20.0).abs() < 1e-12);
        assert_eq!(m.oscillation, 0.0);
        assert!((m.reward - (-40.0 / 24.0 - 0.1)).abs() < 1e-12);
    }

    #[test]
    fn alternating_window_mean() {
        let days: Vec<_> = (0..6).map(|d| day(d, if d % 2 == 0 { 30.0 } else { 40.0 }, d as f64)).collect();
        let m = window_metrics(&days, 6, 24.0, 0.1, false).unwrap();
        assert_eq!(m.aitt, 35.0);
        assert_eq!(m.token_price, None);
        assert_eq!(m.oscillation, 5.0);
    }

    #[test]
    fn window_uses_last_days_only() {
        let mut days: Vec<_> = (0..4).map(|d| day(d, 100.0, 7.0)).collect();
        days.extend((4..10).map(|d| day(d, 20.0, 1.0)));
        assert_eq!(window_metrics(&days, 6, 24.0, 0.1, true).unwrap().aitt, 20.0);
        assert!(window_metrics(&days[..5], 6, 24.0, 0.1, true).is_err());
    }

    #[test]
    fn car_aitt_weights_by_car_share() {
        let mut a = day(0, 30.0, 0.0);
        a.car_aitt = Some(30.0);
        a.pt_share = 0.5;
        let mut b = day(1, 30.0, 0.0);
        b.car_aitt = Some(60.0);
        b.pt_share = 0.0;
        let m = window_metrics(&[a, b], 2, 24.0, 0.1, true).unwrap();
        // 0.5 * 30 + 1.0 * 60 over 1.5
        assert!((m.car_aitt.unwrap() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn averaging_skips_missing_prices() {
        let days: Vec<_> = (0..6).map(|d| day(d, 30.0, 0.0)).collect();
        let a = window_metrics(&days, 6, 24.0, 0.1, true).unwrap();
        let b = MetricsReport { aitt: 50.0, token_price: None, ..a.clone() };
        let avg = average_reports(&[a, b]).unwrap();
        assert_eq!(avg.aitt, 40.0);
        assert_eq!(avg.token_price, Some(1.2));
        assert!(average_reports(&[]).is_err());
    }

    #[test]
    fn band_counts() {
        let mut days: Vec<_> = (0..8).map(|d| day(d, 30.0, 0.0)).collect();
        days[7].net_revenue = 500.0;
        days[6].net_revenue = -20.0;
        assert_eq!(revenue_band_days(&days, 6, 50.0), 5);
    }
}
