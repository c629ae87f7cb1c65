//! Training corpora, model training, forecasts and feed files.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::runs::{new_run_dir, snapshot, write_file, write_manifest, RunManifest, FORMAT_VERSION, MODEL, REPORT};
use crate::agent::control_loop;
use crate::baselines::FixedPower;
use crate::error::{Error, Result};
use crate::feeds::{read_reports, validate, write_reports, FeedHub, SignalKind, SourceReport, ValidatedSignal};
use crate::forecaster::{
    accuracy, build_dataset, forecast, predict_samples, split_samples, train, write_history, Arch, ForecastResult, LoadForecaster,
    LstmForecaster, StepContext, TrainConfig, TrainOutcome,
};
use crate::scenario::{draw_event, Scenario};
use crate::simcore::{read_run_log, write_run_log, LogRow, WeatherRecord, World, WorldInputs};
use crate::time::{Timestamp, MINUTES_PER_DAY};

pub const CORPUS: &str = "corpus.csv";
pub const CONTEXT: &str = "context.csv";
pub const HISTORY: &str = "history.csv";
pub const FORECAST: &str = "forecast.csv";

/// Synthetic days appended to a scenario to build a training corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub event_probability: f64,
    pub rain_probability: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            event_probability: 0.5,
            rain_probability: 0.3,
        }
    }
}

/// `days` of world inputs starting at the scenario's first midnight: the
/// scenario's own events plus random event days and rain spells.
pub fn corpus_inputs(scenario: &Scenario, days: u32, cfg: &CorpusConfig) -> Result<WorldInputs> {
    if days == 0 {
        return Err(Error::InvalidConfig("days must be >= 1".into()));
    }
    let start = scenario.scenario.start;
    let first_day = Timestamp(start.minutes() - start.minute_of_day());
    let step = i64::from(scenario.sim.step_minutes);
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.sim.rng_seed ^ 0xc0de_da7a);
    let mut events = scenario.events.clone();
    let w = &scenario.weather;
    let base = |t| WeatherRecord {
        timestamp: t,
        rain_mm_per_h: 0.0,
        humidity_pct: w.humidity_pct,
        temperature_c: w.temperature_c,
        foliage_loss_db: w.foliage_loss_db,
        ducting_flag: false,
    };
    let per_day = (MINUTES_PER_DAY / step) as usize;
    let mut weather = Vec::with_capacity(per_day * days as usize);
    for d in 0..i64::from(days) {
        let day = first_day.plus_minutes(d * MINUTES_PER_DAY);
        if rng.random::<f64>() < cfg.event_probability {
            events.push(draw_event(&mut rng, day, events.len() + 1));
        }
        let rain = (rng.random::<f64>() < cfg.rain_probability).then(|| {
            let rate: f64 = rng.random_range(2.0..30.0);
            let from: i64 = rng.random_range(0..1300);
            let len: i64 = rng.random_range(60..=240);
            (rate, from, from + len)
        });
        for k in 0..per_day as i64 {
            let m = k * step;
            let mut r = base(day.plus_minutes(m));
            if let Some((rate, from, to)) = rain {
                if m >= from && m < to {
                    r.rain_mm_per_h = rate;
                    r.humidity_pct = r.humidity_pct.max(90.0);
                }
            }
            weather.push(r);
        }
    }
    Ok(WorldInputs {
        sim: scenario.sim.clone(),
        traffic: scenario.traffic.clone(),
        events,
        weather,
        start: first_day,
        outage_threshold_db: scenario.thresholds.gamma1_db,
    })
}

/// Fixed-power rollout over `inputs` plus the feed-validated context of
/// every row.
pub fn generate_corpus(inputs: WorldInputs, feeds: &crate::feeds::FeedConfig) -> Result<(Vec<LogRow>, Vec<StepContext>)> {
    let ticks = inputs.weather.len();
    let mut hub = FeedHub::from_inputs(&inputs, feeds);
    let mut world = World::new(inputs)?;
    let thresholds = crate::agent::PolicyThresholds {
        gamma1_db: world.inputs().outage_threshold_db,
        ..Default::default()
    };
    let log = control_loop(&mut world, &mut FixedPower, &thresholds, ticks)?;
    let mut contexts = Vec::with_capacity(ticks);
    for r in &log.rows {
        contexts.push(StepContext::from_signals(r.timestamp, &hub.signals_at(r.timestamp)?));
        hub.forget_before(r.timestamp);
    }
    Ok((log.rows, contexts))
}

pub fn write_contexts<W: std::io::Write>(out: W, contexts: &[StepContext]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in contexts {
        w.serialize(c)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_contexts<R: std::io::Read>(input: R) -> Result<Vec<StepContext>> {
    let mut out = Vec::new();
    for row in csv::Reader::from_reader(input).deserialize() {
        out.push(row?);
    }
    Ok(out)
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::file(path, e))
}

pub fn load_corpus(corpus: &Path, context: &Path) -> Result<(Vec<LogRow>, Vec<StepContext>)> {
    let rows = read_run_log(open(corpus)?)?;
    let contexts = read_contexts(open(context)?)?;
    if rows.len() != contexts.len() {
        return Err(Error::LengthMismatch(rows.len(), contexts.len()));
    }
    Ok((rows, contexts))
}

/// `generate`: writes corpus and context CSVs into a new run directory.
pub fn execute_generate(
    out: &Path,
    scenario: &Scenario,
    days: u32,
    cfg: &CorpusConfig,
    command_line: Vec<String>,
) -> Result<PathBuf> {
    scenario.validate()?;
    let inputs = corpus_inputs(scenario, days, cfg)?;
    let (run_id, dir) = new_run_dir(out, &format!("generate-{days}d-{}", scenario.sim.rng_seed))?;
    let start = inputs.start;
    let (rows, contexts) = generate_corpus(inputs, &scenario.feeds).map_err(|e| Error::RunFailed {
        run_id: run_id.clone(),
        source: Box::new(e),
    })?;
    let mut buf = Vec::new();
    write_run_log(&mut buf, &rows)?;
    write_file(&dir.join(CORPUS), &buf)?;
    buf.clear();
    write_contexts(&mut buf, &contexts)?;
    write_file(&dir.join(CONTEXT), &buf)?;
    let manifest = RunManifest {
        format_version: FORMAT_VERSION,
        run_id,
        command: "generate".into(),
        command_line,
        seed: scenario.sim.rng_seed,
        controller: Some("fixed".into()),
        persona: None,
        config: snapshot(scenario, &dir)?,
        start,
        end: rows.last().map_or(start, |r| r.timestamp),
        model_version: None,
        params: serde_json::json!({ "days": days, "corpus": cfg }),
        artifacts: BTreeMap::from([("corpus".into(), CORPUS.into()), ("context".into(), CONTEXT.into())]),
    };
    write_manifest(&dir, &manifest)?;
    Ok(dir)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub model_version: String,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub residual_sigma: f64,
    /// One-step accuracy on the (thinned) validation split.
    pub validation_accuracy_pct: f64,
    pub train_samples: usize,
    pub validation_samples: usize,
}

pub struct TrainOutput {
    pub run_id: String,
    pub dir: PathBuf,
    pub forecaster: LstmForecaster,
    pub outcome: TrainOutcome,
    pub report: TrainReport,
}

/// Trains on in-memory rows; the report's accuracy covers the validation
/// split.
pub fn fit(
    rows: &[LogRow],
    contexts: &[StepContext],
    arch: Arch,
    cfg: &TrainConfig,
    step_minutes: u32,
) -> Result<(LstmForecaster, TrainOutcome, TrainReport)> {
    let ds = build_dataset(rows, contexts, arch.window, 1, step_minutes)?;
    let outcome = train(arch, &ds, cfg)?;
    let (train_idx, val_idx) = split_samples(&ds, cfg);
    let predicted = predict_samples(&outcome.model, &ds, &val_idx)?;
    let actual: Vec<f64> = val_idx.iter().map(|&s| ds.target(s)).collect();
    let forecaster = LstmForecaster::new(outcome.model.clone(), outcome.residual_sigma)?;
    let report = TrainReport {
        model_version: forecaster.model_version.clone(),
        epochs_run: outcome.history.len(),
        best_epoch: outcome.best_epoch,
        best_val_mse: outcome.residual_sigma.powi(2),
        residual_sigma: outcome.residual_sigma,
        validation_accuracy_pct: accuracy(&predicted, &actual)?,
        train_samples: train_idx.len(),
        validation_samples: val_idx.len(),
    };
    Ok((forecaster, outcome, report))
}

/// `train`: copies the corpus into a new run directory and writes the
/// model archive, epoch history and report there.
pub fn execute_train(
    out: &Path,
    corpus: &Path,
    context: &Path,
    arch: Arch,
    cfg: &TrainConfig,
    command_line: Vec<String>,
) -> Result<TrainOutput> {
    cfg.validate()?;
    let (rows, contexts) = load_corpus(corpus, context)?;
    let step = match rows.as_slice() {
        [a, b, ..] => (b.timestamp.minutes() - a.timestamp.minutes()).max(1) as u32,
        _ => 1,
    };
    let (run_id, dir) = new_run_dir(out, &format!("train-{}", cfg.seed))?;
    let (forecaster, outcome, report) = fit(&rows, &contexts, arch, cfg, step).map_err(|e| Error::RunFailed {
        run_id: run_id.clone(),
        source: Box::new(e),
    })?;
    for (src, name) in [(corpus, CORPUS), (context, CONTEXT)] {
        fs::copy(src, dir.join(name)).map_err(|e| Error::file(src, e))?;
    }
    write_file(&dir.join(MODEL), &forecaster.to_archive()?)?;
    let mut buf = Vec::new();
    write_history(&mut buf, &outcome.history)?;
    write_file(&dir.join(HISTORY), &buf)?;
    write_file(&dir.join(REPORT), format!("{}\n", serde_json::to_string(&report)?).as_bytes())?;
    let manifest = RunManifest {
        format_version: FORMAT_VERSION,
        run_id: run_id.clone(),
        command: "train".into(),
        command_line,
        seed: cfg.seed,
        controller: None,
        persona: None,
        config: toml::to_string(cfg).map_err(|e| Error::ScenarioParse(e.to_string()))?,
        start: rows.first().map_or(Timestamp(0), |r| r.timestamp),
        end: rows.last().map_or(Timestamp(0), |r| r.timestamp),
        model_version: Some(forecaster.model_version.clone()),
        params: serde_json::json!({ "arch": arch, "train": cfg }),
        artifacts: BTreeMap::from([
            ("corpus".into(), CORPUS.into()),
            ("context".into(), CONTEXT.into()),
            ("model".into(), MODEL.into()),
            ("history".into(), HISTORY.into()),
            ("report".into(), REPORT.into()),
        ]),
    };
    write_manifest(&dir, &manifest)?;
    Ok(TrainOutput {
        run_id,
        dir,
        forecaster,
        outcome,
        report,
    })
}

/// Forecast `horizon` steps past the end of `rows`; future contexts come
/// from the scenario's scheduled events and weather.
pub fn forecast_after(
    model: &LstmForecaster,
    rows: &[LogRow],
    contexts: &[StepContext],
    scenario: &Scenario,
    horizon: i64,
) -> Result<ForecastResult> {
    let w = model.window();
    if rows.len() < w {
        return Err(Error::TooShort {
            needed: w,
            got: rows.len(),
        });
    }
    let tail = &rows[rows.len() - w..];
    let loads: Vec<f64> = tail.iter().map(|r| r.load).collect();
    let mut ctx: Vec<StepContext> = contexts[contexts.len() - w + 1..].to_vec();
    let last = tail[w - 1].timestamp;
    let step = i64::from(scenario.sim.step_minutes);
    let inputs = scenario.world_inputs()?;
    for k in 1..=horizon.max(0) {
        let t = last.plus_minutes(k * step);
        ctx.push(StepContext::from_truth(t, &inputs.events, &inputs.weather_at(t)));
    }
    forecast(model, &loads, &ctx, horizon)
}

/// Writes every source's raw report for each tick of the scenario.
pub fn dump_feeds<W: std::io::Write>(scenario: &Scenario, out: W) -> Result<usize> {
    let inputs = scenario.world_inputs()?;
    let hub = FeedHub::from_inputs(&inputs, &scenario.feeds);
    let mut reports = Vec::new();
    for k in 0..scenario.ticks() as i64 {
        let t = inputs.timestamp_of(k);
        for kind in SignalKind::ALL {
            reports.extend(hub.reports_at(kind, t));
        }
    }
    write_reports(out, &reports)?;
    Ok(reports.len())
}

/// Groups reports by `(kind, timestamp)` and validates each group.
pub fn validate_reports(reports: &[SourceReport]) -> Result<Vec<ValidatedSignal>> {
    let mut groups: BTreeMap<(Timestamp, &'static str), Vec<SourceReport>> = BTreeMap::new();
    for r in reports {
        groups.entry((r.timestamp, r.kind.as_str())).or_default().push(r.clone());
    }
    groups.values().map(|g| validate(g)).collect()
}

pub fn read_report_file(path: &Path) -> Result<Vec<SourceReport>> {
    read_reports(BufReader::new(open(path)?))
}
