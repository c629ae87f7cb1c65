//! Run directories, manifests and replay.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{control_loop, write_traces, PersonaName, PowerController, ProactiveAgent, RunLog};
use crate::baselines::{FixedPower, ReactiveAgent};
use crate::error::{Error, Result};
use crate::feeds::FeedHub;
use crate::forecaster::LstmForecaster;
use crate::kpi::{kpi_report, render_report, KpiReport};
use crate::scenario::Scenario;
use crate::simcore::{read_run_log, write_run_log, World};
use crate::time::Timestamp;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";
pub const METRICS: &str = "metrics.csv";
pub const TRACES: &str = "traces.log";
pub const REPORT: &str = "report.txt";
pub const MODEL: &str = "model.archive";
pub const WEATHER: &str = "weather.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerSpec {
    Fixed,
    Reactive,
    Proactive(PersonaName),
}

impl ControllerSpec {
    pub fn label(&self) -> String {
        match self {
            ControllerSpec::Fixed => "fixed".into(),
            ControllerSpec::Reactive => "reactive".into(),
            ControllerSpec::Proactive(p) => format!("proactive:{p}"),
        }
    }

    /// `fixed`, `reactive`, `proactive` (scenario persona) or
    /// `proactive:<persona>`.
    pub fn parse(s: &str, default_persona: PersonaName) -> Result<Self> {
        match s.split_once(':') {
            None if s == "fixed" => Ok(ControllerSpec::Fixed),
            None if s == "reactive" => Ok(ControllerSpec::Reactive),
            None if s == "proactive" => Ok(ControllerSpec::Proactive(default_persona)),
            Some(("proactive", p)) => Ok(ControllerSpec::Proactive(p.parse()?)),
            _ => Err(Error::InvalidConfig(format!("unknown controller {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub run_id: String,
    pub command: String,
    pub command_line: Vec<String>,
    pub seed: u64,
    pub controller: Option<String>,
    pub persona: Option<String>,
    /// Scenario snapshot; a weather CSV is copied next to the manifest.
    pub config: String,
    pub start: Timestamp,
    pub end: Timestamp,
    pub model_version: Option<String>,
    /// Command-specific settings needed to replay.
    pub params: serde_json::Value,
    /// Artifact role to file name inside the run directory.
    pub artifacts: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn scenario(&self, dir: &Path) -> Result<Scenario> {
        let mut s = Scenario::from_toml(&self.config)?;
        if let Some(csv) = &s.weather.csv {
            if csv.is_relative() {
                s.weather.csv = Some(dir.join(csv));
            }
        }
        Ok(s)
    }
}

/// Creates a fresh directory `<base>/<stem>` (or `<stem>-2`, `-3`, ...);
/// existing directories are never reused.
pub fn new_run_dir(base: &Path, stem: &str) -> Result<(String, PathBuf)> {
    fs::create_dir_all(base).map_err(|e| Error::file(base, e))?;
    for n in 1.. {
        let id = if n == 1 { stem.to_string() } else { format!("{stem}-{n}") };
        let dir = base.join(&id);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok((id, dir)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::file(&dir, e)),
        }
    }
    unreachable!("unbounded search")
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::file(path, e))
}

/// Snapshot of `scenario` for a manifest in `dir`, copying any weather CSV.
pub fn snapshot(scenario: &Scenario, dir: &Path) -> Result<String> {
    let mut s = scenario.clone();
    if let Some(src) = &scenario.weather.csv {
        let bytes = fs::read(src).map_err(|e| Error::file(src, e))?;
        write_file(&dir.join(WEATHER), &bytes)?;
        s.weather.csv = Some(PathBuf::from(WEATHER));
    }
    s.to_toml()
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    write_file(&dir.join(MANIFEST), serde_json::to_string_pretty(manifest)?.as_bytes())
}

fn build_controller(
    scenario: &Scenario,
    spec: ControllerSpec,
    model: Option<&LstmForecaster>,
) -> Result<Box<dyn PowerController>> {
    Ok(match spec {
        ControllerSpec::Fixed => Box::new(FixedPower),
        ControllerSpec::Reactive => Box::new(ReactiveAgent::new(scenario.thresholds)?),
        ControllerSpec::Proactive(name) => {
            let model = model.ok_or(Error::MissingModel)?;
            let mut persona = scenario.persona.resolve();
            if persona.name != name {
                persona = crate::agent::Persona::named(name);
            }
            let inputs = scenario.world_inputs()?;
            Box::new(ProactiveAgent::new(
                persona,
                scenario.thresholds,
                scenario.sim.clone(),
                scenario.agent,
                Some(Box::new(model.clone())),
                FeedHub::from_inputs(&inputs, &scenario.feeds),
            )?)
        }
    })
}

/// Runs one controller over the scenario in memory.
pub fn simulate(scenario: &Scenario, spec: ControllerSpec, model: Option<&LstmForecaster>) -> Result<RunLog> {
    scenario.validate()?;
    let mut controller = build_controller(scenario, spec, model)?;
    let mut world = World::new(scenario.world_inputs()?)?;
    control_loop(&mut world, controller.as_mut(), &scenario.thresholds, scenario.ticks())
}

pub struct RunOutput {
    pub run_id: String,
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub kpi: KpiReport,
}

/// Executes a controller run and persists it as a run directory.
pub fn execute_run(
    out: &Path,
    scenario: &Scenario,
    spec: ControllerSpec,
    model_bytes: Option<&[u8]>,
    command_line: Vec<String>,
) -> Result<RunOutput> {
    let model = match (spec, model_bytes) {
        (ControllerSpec::Proactive(_), None) => return Err(Error::MissingModel),
        (ControllerSpec::Proactive(_), Some(b)) => Some(LstmForecaster::from_archive(b)?),
        _ => None,
    };
    let stem = format!("run-{}-{}", spec.label().replace(':', "-"), scenario.sim.rng_seed);
    let (run_id, dir) = new_run_dir(out, &stem)?;
    let log = simulate(scenario, spec, model.as_ref()).map_err(|e| Error::RunFailed {
        run_id: run_id.clone(),
        source: Box::new(e),
    })?;

    let mut artifacts = BTreeMap::new();
    let mut csv = Vec::new();
    write_run_log(&mut csv, &log.rows)?;
    write_file(&dir.join(METRICS), &csv)?;
    artifacts.insert("metrics".into(), METRICS.into());
    let mut traces = Vec::new();
    write_traces(&mut traces, &log.traces)?;
    write_file(&dir.join(TRACES), &traces)?;
    artifacts.insert("traces".into(), TRACES.into());
    if let Some(b) = model_bytes.filter(|_| model.is_some()) {
        write_file(&dir.join(MODEL), b)?;
        artifacts.insert("model".into(), MODEL.into());
    }
    let kpi = kpi_report(&run_id, &log.rows, scenario.thresholds.gamma1_db, scenario.sim.step_minutes)?;
    write_file(&dir.join(REPORT), render_report(std::slice::from_ref(&kpi), None)?.as_bytes())?;
    artifacts.insert("report".into(), REPORT.into());

    let manifest = RunManifest {
        format_version: FORMAT_VERSION,
        run_id: run_id.clone(),
        command: "run".into(),
        command_line,
        seed: scenario.sim.rng_seed,
        controller: Some(spec.label()),
        persona: match spec {
            ControllerSpec::Proactive(p) => Some(p.to_string()),
            _ => None,
        },
        config: snapshot(scenario, &dir)?,
        start: scenario.scenario.start,
        end: log.rows.last().map_or(scenario.scenario.start, |r| r.timestamp),
        model_version: model.as_ref().map(|m| m.model_version.clone()),
        params: serde_json::json!({}),
        artifacts,
    };
    write_manifest(&dir, &manifest)?;
    Ok(RunOutput {
        run_id,
        dir,
        manifest,
        kpi,
    })
}

/// KPIs recomputed from a run directory's metrics.
pub fn report_dir(dir: &Path) -> Result<KpiReport> {
    let manifest = RunManifest::load(&dir.join(MANIFEST))?;
    let scenario = manifest.scenario(dir)?;
    let path = dir.join(METRICS);
    let file = fs::File::open(&path).map_err(|e| Error::file(&path, e))?;
    let rows = read_run_log(file)?;
    kpi_report(&manifest.run_id, &rows, scenario.thresholds.gamma1_db, scenario.sim.step_minutes)
}

/// Re-executes the run described by `manifest_path` into a new directory
/// under `out` and checks its primary artifact byte for byte.
pub fn replay(manifest_path: &Path, out: &Path) -> Result<PathBuf> {
    let manifest = RunManifest::load(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut argv = vec!["replay".to_string(), manifest_path.display().to_string()];
    let (new_dir, artifact) = match manifest.command.as_str() {
        "run" => {
            let scenario = manifest.scenario(dir)?;
            let spec = ControllerSpec::parse(
                manifest.controller.as_deref().unwrap_or("fixed"),
                scenario.persona.name,
            )?;
            let model = match manifest.artifacts.get("model") {
                Some(f) => Some(fs::read(dir.join(f)).map_err(|e| Error::file(dir.join(f), e))?),
                None => None,
            };
            let o = execute_run(out, &scenario, spec, model.as_deref(), std::mem::take(&mut argv))?;
            (o.dir, METRICS)
        }
        "generate" => {
            let scenario = manifest.scenario(dir)?;
            let days = manifest.params["days"].as_u64().unwrap_or(1) as u32;
            let cfg = serde_json::from_value(manifest.params["corpus"].clone())?;
            let o = super::corpus::execute_generate(out, &scenario, days, &cfg, std::mem::take(&mut argv))?;
            (o, super::corpus::CORPUS)
        }
        "train" => {
            let cfg = serde_json::from_value(manifest.params["train"].clone())?;
            let arch = serde_json::from_value(manifest.params["arch"].clone())?;
            let o = super::corpus::execute_train(
                out,
                &dir.join(super::corpus::CORPUS),
                &dir.join(super::corpus::CONTEXT),
                arch,
                &cfg,
                std::mem::take(&mut argv),
            )?;
            (o.dir, MODEL)
        }
        "compare" => {
            let scenario = manifest.scenario(dir)?;
            let cfg = serde_json::from_value(manifest.params["suite"].clone())?;
            let persona = manifest.persona.as_deref().unwrap_or("strategic").parse()?;
            let model = fs::read(dir.join(MODEL)).map_err(|e| Error::file(dir.join(MODEL), e))?;
            let (o, _) = super::compare::execute_compare(
                out,
                &scenario,
                manifest.seed,
                &cfg,
                &model,
                persona,
                std::mem::take(&mut argv),
                |_| {},
            )?;
            (o, super::compare::TABLE)
        }
        other => {
            return Err(Error::ReplayMismatch {
                manifest: manifest_path.to_path_buf(),
                detail: format!("command {other:?} is not replayable"),
            })
        }
    };
    let a = fs::read(dir.join(artifact)).map_err(|e| Error::file(dir.join(artifact), e))?;
    let b = fs::read(new_dir.join(artifact)).map_err(|e| Error::file(new_dir.join(artifact), e))?;
    if a != b {
        return Err(Error::ReplayMismatch {
            manifest: manifest_path.to_path_buf(),
            detail: format!("{artifact} differs (replayed into {})", new_dir.display()),
        });
    }
    Ok(new_dir)
}

/// Reads a run directory's log rows.
pub fn read_metrics(dir: &Path) -> Result<Vec<crate::simcore::LogRow>> {
    let path = dir.join(METRICS);
    let file = fs::File::open(&path).map_err(|e| Error::file(&path, e))?;
    read_run_log(file)
}
