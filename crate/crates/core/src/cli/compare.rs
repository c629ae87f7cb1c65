//! Side-by-side evaluation of the three controllers over an event-day suite.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::runs::{new_run_dir, simulate, snapshot, write_file, write_manifest, ControllerSpec, RunManifest, FORMAT_VERSION, MODEL, REPORT};
use crate::agent::PersonaName;
use crate::error::{Error, Result};
use crate::forecaster::LstmForecaster;
use crate::kpi::{aggregate, kpi_report, AggregateReport, KpiReport};
use crate::scenario::{event_day_suite, Scenario, SuiteConfig};
use crate::simcore::CarrierProfile;

pub const TABLE: &str = "table.csv";
pub const AGGREGATE: &str = "aggregate.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub day: String,
    pub controller: String,
    pub carrier: CarrierProfile,
    pub rain: bool,
    pub kpi: KpiReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOutcome {
    pub rows: Vec<CompareRow>,
    /// Controller label to its suite aggregate, in run order.
    pub aggregates: Vec<(String, AggregateReport)>,
}

impl CompareOutcome {
    pub fn aggregate_of(&self, controller: &str) -> Option<&AggregateReport> {
        self.aggregates.iter().find(|(c, _)| c == controller).map(|(_, a)| a)
    }
}

/// Runs fixed, reactive and proactive on every suite day; the first
/// failure aborts with the failing run's id.
pub fn compare_suite(
    base: &Scenario,
    seed: u64,
    cfg: &SuiteConfig,
    model: &LstmForecaster,
    persona: PersonaName,
    mut progress: impl FnMut(&str),
) -> Result<CompareOutcome> {
    let specs = [ControllerSpec::Fixed, ControllerSpec::Reactive, ControllerSpec::Proactive(persona)];
    let mut rows = Vec::new();
    for day in event_day_suite(base, seed, cfg) {
        for spec in specs {
            let run_id = format!("{}-{}", day.scenario.name, spec.label());
            progress(&run_id);
            let report = simulate(&day, spec, Some(model))
                .and_then(|log| kpi_report(&run_id, &log.rows, day.thresholds.gamma1_db, day.sim.step_minutes))
                .map_err(|e| Error::RunFailed {
                    run_id: run_id.clone(),
                    source: Box::new(e),
                })?;
            rows.push(CompareRow {
                day: day.scenario.name.clone(),
                controller: spec.label(),
                carrier: day.sim.carrier_profile,
                rain: day.weather.rain_mm_per_h > 0.0,
                kpi: report,
            });
        }
    }
    let mut aggregates = Vec::new();
    for spec in specs {
        let label = spec.label();
        let reports: Vec<KpiReport> = rows.iter().filter(|r| r.controller == label).map(|r| r.kpi.clone()).collect();
        aggregates.push((label, aggregate(&reports)?));
    }
    Ok(CompareOutcome { rows, aggregates })
}

const TABLE_METRICS: [&str; 5] = ["outage_rate_pct", "action_rate_pct", "mean_sinr_db", "mean_tx_power_dbm", "energy_proxy_mwh"];

fn kpi_values(k: &KpiReport) -> [f64; 5] {
    [k.outage_rate_pct, k.action_rate_pct, k.mean_sinr_db, k.mean_tx_power_dbm, k.energy_proxy_mwh]
}

/// One row per run followed by one mean row per controller.
pub fn table_csv(c: &CompareOutcome) -> String {
    let mut s = format!("day,controller,carrier,rain,{}\n", TABLE_METRICS.join(","));
    for r in &c.rows {
        let v = kpi_values(&r.kpi);
        let _ = writeln!(
            s,
            "{},{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4}",
            r.day,
            r.controller,
            r.carrier.as_str(),
            u8::from(r.rain),
            v[0],
            v[1],
            v[2],
            v[3],
            v[4]
        );
    }
    for (label, agg) in &c.aggregates {
        let _ = write!(s, "aggregate,{label},,");
        for m in TABLE_METRICS {
            let _ = write!(s, ",{:.4}", agg.metric(m).map_or(f64::NAN, |x| x.mean));
        }
        s.push('\n');
    }
    s
}

pub fn aggregate_csv(c: &CompareOutcome) -> String {
    let mut s = String::from("controller,metric,mean,std,cov\n");
    for (label, agg) in &c.aggregates {
        for line in agg.to_csv().lines().skip(1) {
            let _ = writeln!(s, "{label},{line}");
        }
    }
    s
}

/// Human-readable side-by-side summary.
pub fn render_table(c: &CompareOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<14} {:<24} {:>9} {:>9} {:>10} {:>9}", "day", "controller", "outage%", "action%", "sinr_db", "mWh");
    for r in &c.rows {
        let v = kpi_values(&r.kpi);
        let _ = writeln!(s, "{:<14} {:<24} {:>9.3} {:>9.3} {:>10.3} {:>9.1}", r.day, r.controller, v[0], v[1], v[2], v[4]);
    }
    for (label, agg) in &c.aggregates {
        let m = |n: &str| agg.metric(n).map_or(f64::NAN, |x| x.mean);
        let _ = writeln!(
            s,
            "{:<14} {:<24} {:>9.3} {:>9.3} {:>10.3} {:>9.1}",
            "aggregate",
            label,
            m("outage_rate_pct"),
            m("action_rate_pct"),
            m("mean_sinr_db"),
            m("energy_proxy_mwh")
        );
    }
    s
}

/// `compare`: runs the suite and writes table, aggregates and manifest.
pub fn execute_compare(
    out: &Path,
    base: &Scenario,
    seed: u64,
    cfg: &SuiteConfig,
    model_bytes: &[u8],
    persona: PersonaName,
    command_line: Vec<String>,
    progress: impl FnMut(&str),
) -> Result<(PathBuf, CompareOutcome)> {
    let model = LstmForecaster::from_archive(model_bytes)?;
    let (run_id, dir) = new_run_dir(out, &format!("compare-{seed}"))?;
    let outcome = compare_suite(base, seed, cfg, &model, persona, progress)?;
    write_file(&dir.join(TABLE), table_csv(&outcome).as_bytes())?;
    write_file(&dir.join(AGGREGATE), aggregate_csv(&outcome).as_bytes())?;
    write_file(&dir.join(REPORT), render_table(&outcome).as_bytes())?;
    write_file(&dir.join(MODEL), model_bytes)?;
    let manifest = RunManifest {
        format_version: FORMAT_VERSION,
        run_id,
        command: "compare".into(),
        command_line,
        seed,
        controller: Some("fixed,reactive,proactive".into()),
        persona: Some(persona.to_string()),
        config: snapshot(base, &dir)?,
        start: base.scenario.start,
        end: base.scenario.start,
        model_version: Some(model.model_version.clone()),
        params: serde_json::json!({ "suite": cfg }),
        artifacts: BTreeMap::from([
            ("table".into(), TABLE.into()),
            ("aggregate".into(), AGGREGATE.into()),
            ("report".into(), REPORT.into()),
            ("model".into(), MODEL.into()),
        ]),
    };
    write_manifest(&dir, &manifest)?;
    Ok((dir, outcome))
}
