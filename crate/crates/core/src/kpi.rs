//! Run metrics and cross-run aggregation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simcore::LogRow;

/// Smallest |action_db| counted as a significant adjustment.
pub const SIGNIFICANT_ACTION_DB: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub run_id: String,
    pub rows: usize,
    pub outage_rate_pct: f64,
    pub action_rate_pct: f64,
    pub mean_sinr_db: f64,
    pub sinr_variance_db2: f64,
    pub mean_tx_power_dbm: f64,
    pub energy_proxy_mwh: f64,
    pub reward_sum: f64,
}

impl KpiReport {
    /// Share of steps without outage, in percent.
    pub fn success_pct(&self) -> f64 {
        100.0 - self.outage_rate_pct
    }
}

fn nonempty(rows: &[LogRow]) -> Result<()> {
    if rows.is_empty() {
        Err(Error::EmptyLog)
    } else {
        Ok(())
    }
}

pub fn outage_rate(rows: &[LogRow], gamma1_db: f64) -> Result<f64> {
    nonempty(rows)?;
    let below = rows.iter().filter(|r| r.sinr_db < gamma1_db).count();
    Ok(100.0 * below as f64 / rows.len() as f64)
}

pub fn action_rate(rows: &[LogRow]) -> Result<f64> {
    nonempty(rows)?;
    let acted = rows.iter().filter(|r| r.action_db.abs() >= SIGNIFICANT_ACTION_DB).count();
    Ok(100.0 * acted as f64 / rows.len() as f64)
}

/// Linear-domain transmit energy in mWh.
pub fn energy_proxy_mwh(rows: &[LogRow], step_minutes: u32) -> f64 {
    let hours = f64::from(step_minutes) / 60.0;
    rows.iter().map(|r| 10f64.powf(r.tx_power_dbm / 10.0) * hours).sum()
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// std / |mean|; zero spread around zero is 0, any spread around zero is
/// undefined.
pub fn coefficient_of_variation(metric: &str, mean: f64, std: f64) -> Result<f64> {
    if mean == 0.0 {
        if std == 0.0 {
            Ok(0.0)
        } else {
            Err(Error::UndefinedCov {
                metric: metric.to_string(),
                std,
            })
        }
    } else {
        Ok(std / mean.abs())
    }
}

pub fn kpi_report(run_id: &str, rows: &[LogRow], gamma1_db: f64, step_minutes: u32) -> Result<KpiReport> {
    nonempty(rows)?;
    let sinr: Vec<f64> = rows.iter().map(|r| r.sinr_db).collect();
    let (mean_sinr, std_sinr) = mean_std(&sinr);
    let tx: Vec<f64> = rows.iter().map(|r| r.tx_power_dbm).collect();
    Ok(KpiReport {
        run_id: run_id.to_string(),
        rows: rows.len(),
        outage_rate_pct: outage_rate(rows, gamma1_db)?,
        action_rate_pct: action_rate(rows)?,
        mean_sinr_db: mean_sinr,
        sinr_variance_db2: std_sinr * std_sinr,
        mean_tx_power_dbm: mean_std(&tx).0,
        energy_proxy_mwh: energy_proxy_mwh(rows, step_minutes),
        reward_sum: rows.iter().map(|r| r.reward_total).sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    /// `None` when the spread sits around a zero mean.
    pub cov: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub reports: Vec<KpiReport>,
    pub metrics: Vec<MetricSummary>,
}

type Getter = fn(&KpiReport) -> f64;

const METRICS: [(&str, Getter); 8] = [
    ("outage_rate_pct", |r| r.outage_rate_pct),
    ("success_pct", |r| r.success_pct()),
    ("action_rate_pct", |r| r.action_rate_pct),
    ("mean_sinr_db", |r| r.mean_sinr_db),
    ("sinr_variance_db2", |r| r.sinr_variance_db2),
    ("mean_tx_power_dbm", |r| r.mean_tx_power_dbm),
    ("energy_proxy_mwh", |r| r.energy_proxy_mwh),
    ("reward_sum", |r| r.reward_sum),
];

impl AggregateReport {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.metric == name)
    }

    /// CoV of `name`, failing when it is undefined.
    pub fn cov(&self, name: &str) -> Result<f64> {
        let m = self
            .metric(name)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown metric {name}")))?;
        coefficient_of_variation(name, m.mean, m.std)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,mean,std,cov\n");
        for m in &self.metrics {
            let cov = m.cov.map(|c| c.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{}", m.metric, m.mean, m.std, cov);
        }
        s
    }
}

pub fn aggregate(reports: &[KpiReport]) -> Result<AggregateReport> {
    if reports.len() < 2 {
        return Err(Error::TooFewReports {
            needed: 2,
            got: reports.len(),
        });
    }
    let metrics = METRICS
        .iter()
        .map(|(name, get)| {
            let values: Vec<f64> = reports.iter().map(get).collect();
            let (mean, std) = mean_std(&values);
            MetricSummary {
                metric: name.to_string(),
                mean,
                std,
                cov: coefficient_of_variation(name, mean, std).ok(),
            }
        })
        .collect();
    Ok(AggregateReport {
        reports: reports.to_vec(),
        metrics,
    })
}

/// Structured-text summary: one JSON object per run, then the aggregate.
pub fn render_report(reports: &[KpiReport], agg: Option<&AggregateReport>) -> Result<String> {
    let mut s = String::new();
    for r in reports {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    if let Some(a) = agg {
        s.push_str(&serde_json::to_string(&serde_json::json!({ "aggregate": a.metrics }))?);
        s.push('\n');
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::Tier;
    use crate::time::Timestamp;
    use proptest::prelude::*;

    pub(crate) fn row(i: i64, sinr: f64, tx: f64, action: f64) -> LogRow {
        LogRow {
            timestamp: Timestamp(i),
            tx_power_dbm: tx,
            load: 0.5,
            interference_dbm: -105.0,
            shadow_db: 0.0,
            fast_fade_db: 0.0,
            weather_loss_db: 0.0,
            blockage_db: 0.0,
            sinr_db: sinr,
            prb_used: 137,
            event_active: false,
            tier: Tier::Hold,
            action_db: action,
            reward_total: 7.0,
            outage_flag: sinr < 15.0,
        }
    }

    #[test]
    fn three_in_a_hundred() {
        let rows: Vec<_> = (0..100).map(|i| row(i, if i < 3 { 12.0 } else { 20.0 }, 43.0, 0.0)).collect();
        assert_eq!(outage_rate(&rows, 15.0).unwrap(), 3.0);
        assert_eq!(action_rate(&rows).unwrap(), 0.0);
    }

    #[test]
    fn twelve_adjustments_in_a_day() {
        let rows: Vec<_> = (0..1440).map(|i| row(i, 20.0, 43.0, if i % 120 == 0 { -1.0 } else { 0.0 })).collect();
        assert!((action_rate(&rows).unwrap() - 1200.0 / 1440.0).abs() < 1e-12);
    }

    #[test]
    fn empty_log_is_an_error() {
        assert!(matches!(outage_rate(&[], 15.0), Err(Error::EmptyLog)));
        assert!(matches!(action_rate(&[]), Err(Error::EmptyLog)));
    }

    #[test]
    fn energy_of_one_watt_for_an_hour() {
        let rows: Vec<_> = (0..60).map(|i| row(i, 20.0, 30.0, 0.0)).collect();
        assert!((energy_proxy_mwh(&rows, 1) - 1000.0).abs() < 1e-9);
    }

    fn report(outage: f64) -> KpiReport {
        KpiReport {
            run_id: format!("r{outage}"),
            rows: 1440,
            outage_rate_pct: outage,
            action_rate_pct: 0.0,
            mean_sinr_db: 20.0,
            sinr_variance_db2: 4.0,
            mean_tx_power_dbm: 43.0,
            energy_proxy_mwh: 1.0,
            reward_sum: 10.0,
        }
    }

    #[test]
    fn aggregate_examples() {
        let a = aggregate(&[report(2.0), report(4.0)]).unwrap();
        let m = a.metric("outage_rate_pct").unwrap();
        assert_eq!((m.mean, m.std), (3.0, 1.0));
        assert!((a.cov("outage_rate_pct").unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let same = aggregate(&[report(1.0), report(1.0)]).unwrap();
        assert_eq!(same.cov("outage_rate_pct").unwrap(), 0.0);
        assert_eq!(same.cov("action_rate_pct").unwrap(), 0.0);
        assert!(matches!(aggregate(&[report(1.0)]), Err(Error::TooFewReports { .. })));
        assert!(a.to_csv().starts_with("metric,mean,std,cov\noutage_rate_pct,3,1,"));
    }

    #[test]
    fn cov_around_zero_mean() {
        assert!(matches!(coefficient_of_variation("x", 0.0, 1.0), Err(Error::UndefinedCov { .. })));
        assert_eq!(coefficient_of_variation("x", -2.0, 1.0).unwrap(), 0.5);
    }

    proptest! {
        #[test]
        fn outage_matches_flags_and_ignores_order(
            sinrs in proptest::collection::vec(0.0f64..30.0, 1..200),
            rot in 0usize..200,
        ) {
            let mut rows: Vec<_> = sinrs.iter().enumerate().map(|(i, &s)| row(i as i64, s, 43.0, 0.0)).collect();
            let flags = rows.iter().filter(|r| r.outage_flag).count() as f64;
            let rate = outage_rate(&rows, 15.0).unwrap();
            prop_assert!((rate - 100.0 * flags / rows.len() as f64).abs() < 1e-12);
            let k = rot % rows.len();
            rows.rotate_left(k);
            prop_assert_eq!(outage_rate(&rows, 15.0).unwrap(), rate);
        }

        #[test]
        fn energy_drops_with_any_power_cut(
            powers in proptest::collection::vec(30.0f64..49.0, 1..50),
            idx in 0usize..50,
            cut in 0.1f64..5.0,
        ) {
            let rows: Vec<_> = powers.iter().enumerate().map(|(i, &p)| row(i as i64, 20.0, p, 0.0)).collect();
            let mut lower = rows.clone();
            let i = idx % lower.len();
            lower[i].tx_power_dbm -= cut;
            prop_assert!(energy_proxy_mwh(&lower, 1) < energy_proxy_mwh(&rows, 1));
        }
    }
}
