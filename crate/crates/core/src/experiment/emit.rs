//! Result files: CSV with a fixed header, pretty JSON and NDJSON.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::TraceWriter;
use crate::error::Result;
use crate::metrics::MetricsReport;
use crate::ppo::IterationStats;
use crate::sim::DaySummary;

/// A flat CSV record with a known column order.
///
/// The header is spelled out so that an empty result set still produces a
/// header line.
pub trait Row: Serialize {
    const HEADER: &'static [&'static str];
}

pub fn write_csv_to<W: Write, R: Row>(out: W, rows: &[R]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(R::HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv<R: Row>(path: &Path, rows: &[R]) -> Result<()> {
    write_csv_to(BufWriter::new(File::create(path)?), rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn write_ndjson<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = TraceWriter::new(BufWriter::new(File::create(path)?));
    for r in records {
        w.write(r)?;
    }
    w.into_inner().flush()?;
    Ok(())
}

/// One simulated day of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayRow {
    pub config_hash: String,
    pub seed: u64,
    /// Which policy or baseline produced the day.
    pub policy: String,
    pub day: u32,
    #[serde(rename = "M")]
    pub amplitude: f64,
    #[serde(rename = "mu")]
    pub center: f64,
    #[serde(rename = "sigma")]
    pub width: f64,
    pub price: f64,
    pub aitt: f64,
    pub car_aitt: Option<f64>,
    pub pt_share: f64,
    pub net_revenue: f64,
    pub welfare_per_capita: f64,
    pub reward: f64,
}

impl Row for DayRow {
    const HEADER: &'static [&'static str] = &[
        "config_hash",
        "seed",
        "policy",
        "day",
        "M",
        "mu",
        "sigma",
        "price",
        "aitt",
        "car_aitt",
        "pt_share",
        "net_revenue",
        "welfare_per_capita",
        "reward",
    ];
}

impl DayRow {
    pub fn new(config_hash: &str, seed: u64, policy: &str, d: &DaySummary, reward: f64) -> Self {
        Self {
            config_hash: config_hash.to_string(),
            seed,
            policy: policy.to_string(),
            day: d.day,
            amplitude: d.amplitude,
            center: d.center,
            width: d.width,
            price: d.price,
            aitt: d.aitt,
            car_aitt: d.car_aitt,
            pt_share: d.pt_share,
            net_revenue: d.net_revenue,
            welfare_per_capita: d.welfare_per_capita,
            reward,
        }
    }
}

/// Window metrics of one seed, or of the cross-seed mean when `seed` is `"mean"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub config_hash: String,
    pub seed: String,
    pub policy: String,
    pub aitt: f64,
    pub car_aitt: Option<f64>,
    /// Empty when no market operates.
    pub token_price: Option<f64>,
    pub pt_share_pct: f64,
    pub welfare_per_capita: f64,
    pub reward: f64,
    #[serde(rename = "M")]
    pub toll_amplitude: f64,
    #[serde(rename = "mu")]
    pub toll_center: f64,
    #[serde(rename = "sigma")]
    pub toll_width: f64,
    pub oscillation: f64,
}

impl Row for MetricsRow {
    const HEADER: &'static [&'static str] = &[
        "config_hash",
        "seed",
        "policy",
        "aitt",
        "car_aitt",
        "token_price",
        "pt_share_pct",
        "welfare_per_capita",
        "reward",
        "M",
        "mu",
        "sigma",
        "oscillation",
    ];
}

impl MetricsRow {
    pub fn new(config_hash: &str, seed: &str, policy: &str, m: &MetricsReport) -> Self {
        Self {
            config_hash: config_hash.to_string(),
            seed: seed.to_string(),
            policy: policy.to_string(),
            aitt: m.aitt,
            car_aitt: m.car_aitt,
            token_price: m.token_price,
            pt_share_pct: m.pt_share_pct,
            welfare_per_capita: m.welfare_per_capita,
            reward: m.reward,
            toll_amplitude: m.toll_amplitude,
            toll_center: m.toll_center,
            toll_width: m.toll_width,
            oscillation: m.oscillation,
        }
    }
}

/// One learning-curve point of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub config_hash: String,
    pub seed: u64,
    /// Run label, e.g. a sweep cell.
    pub run: String,
    pub iteration: usize,
    pub mean_return: f64,
    pub aitt_last6: f64,
    #[serde(rename = "toll_M_mean")]
    pub toll_m_mean: f64,
    pub kl: f64,
    pub entropy: f64,
    #[serde(rename = "L_T")]
    pub l_t: f64,
    #[serde(rename = "L_S")]
    pub l_s: f64,
}

impl Row for CurveRow {
    const HEADER: &'static [&'static str] = &[
        "config_hash",
        "seed",
        "run",
        "iteration",
        "mean_return",
        "aitt_last6",
        "toll_M_mean",
        "kl",
        "entropy",
        "L_T",
        "L_S",
    ];
}

impl CurveRow {
    pub fn new(config_hash: &str, seed: u64, run: &str, s: &IterationStats) -> Self {
        Self {
            config_hash: config_hash.to_string(),
            seed,
            run: run.to_string(),
            iteration: s.iteration,
            mean_return: s.mean_return,
            aitt_last6: s.aitt_last6,
            toll_m_mean: s.toll_m_mean,
            kl: s.kl,
            entropy: s.entropy,
            l_t: s.l_t,
            l_s: s.l_s,
        }
    }
}

/// One evaluation of the equilibrium optimizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoHistoryRow {
    pub config_hash: String,
    pub seed: u64,
    pub iteration: usize,
    #[serde(rename = "M")]
    pub amplitude: f64,
    #[serde(rename = "mu")]
    pub center: f64,
    #[serde(rename = "sigma")]
    pub width: f64,
    pub objective: f64,
    pub running_best: f64,
}

impl Row for BoHistoryRow {
    const HEADER: &'static [&'static str] =
        &["config_hash", "seed", "iteration", "M", "mu", "sigma", "objective", "running_best"];
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::day;

    /// Header as serde would derive it from the field names.
    fn derived_header<R: Row>(row: &R) -> Vec<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(row).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        text.lines().next().unwrap().split(',').map(str::to_string).collect()
    }

    fn check<R: Row>(row: &R) {
        assert_eq!(derived_header(row), R::HEADER.to_vec());
    }

    #[test]
    fn headers_match_fields() {
        let d = day(3, 40.0, 2.0);
        check(&DayRow::new("h", 1, "nt", &d, -1.0));
        let m = crate::metrics::window_metrics(&vec![d; 6], 6, 24.0, 0.1, true).unwrap();
        check(&MetricsRow::new("h", "mean", "bo", &m));
        let s = IterationStats {
            iteration: 0,
            mean_return: 0.0,
            aitt_last6: 0.0,
            toll_m_mean: 0.0,
            kl: 0.0,
            entropy: 0.0,
            l_t: 0.0,
            l_s: 0.0,
            value_loss: 0.0,
            surrogate: 0.0,
            updates: 0,
            early_stopped: false,
        };
        check(&CurveRow::new("h", 1, "r", &s));
        check(&BoHistoryRow {
            config_hash: "h".into(),
            seed: 1,
            iteration: 0,
            amplitude: 0.0,
            center: 0.0,
            width: 0.0,
            objective: 0.0,
            running_best: 0.0,
        });
    }

    #[test]
    fn empty_set_is_header_only() {
        let mut out = Vec::new();
        write_csv_to::<_, DayRow>(&mut out, &[]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 1);
    }

    #[test]
    fn missing_price_is_empty_cell() {
        let d = day(0, 30.0, 0.0);
        let m = crate::metrics::window_metrics(&vec![d; 6], 6, 24.0, 0.1, false).unwrap();
        let mut out = Vec::new();
        write_csv_to(&mut out, &[MetricsRow::new("h", "1", "nt", &m)]).unwrap();
        let text = String::from_utf8(out).unwrap();
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[5], "");
    }
}
