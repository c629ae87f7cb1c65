use std::collections::VecDeque;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{
    decide, effective_stress_sinr, reward, Action, FeedView, Persona, PolicyThresholds, RewardBreakdown,
    RewardWeights, StressEstimate, TraceMode,
};
use crate::error::{Error, Result};
use crate::feeds::FeedHub;
use crate::forecaster::{ForecastResult, LoadForecaster, StepContext};
use crate::simcore::{LogRow, NetworkState, SimConfig, World};
use crate::time::Timestamp;

/// Anything that turns the latest observed state into an action.
pub trait PowerController {
    /// Controller label recorded in manifests, e.g. `proactive:strategic`.
    fn name(&self) -> String;

    fn reward_weights(&self) -> RewardWeights {
        RewardWeights::default()
    }

    fn decide(&mut self, state: &NetworkState) -> Result<Action>;
}

/// One line of the trace log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub timestamp: Timestamp,
    pub thought: String,
    pub rationale: String,
    pub inputs_digest: String,
    pub mode: TraceMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub controller: String,
    pub rows: Vec<LogRow>,
    pub traces: Vec<TraceRecord>,
    pub rewards: Vec<RewardBreakdown>,
}

/// Runs `ticks` decide/step/reward iterations. Each tick decides on the
/// last observed state, advances the world and logs the resulting state
/// with the action that produced it.
pub fn control_loop(
    world: &mut World,
    controller: &mut dyn PowerController,
    thresholds: &PolicyThresholds,
    ticks: usize,
) -> Result<RunLog> {
    let weights = controller.reward_weights();
    let mut log = RunLog {
        controller: controller.name(),
        rows: Vec::with_capacity(ticks),
        traces: Vec::with_capacity(ticks),
        rewards: Vec::with_capacity(ticks),
    };
    for _ in 0..ticks {
        let before = world.last_state().clone();
        let action = controller.decide(&before)?;
        let after = world.step(&action)?;
        let r = reward(&before, &after, &action, thresholds, &weights);
        log.rows.push(LogRow::new(&after, action.tier, action.power_delta_db, r.total));
        log.traces.push(TraceRecord {
            timestamp: after.timestamp,
            thought: action.trace.thought,
            rationale: action.trace.action_rationale,
            inputs_digest: action.trace.inputs_digest,
            mode: action.trace.mode,
        });
        log.rewards.push(r);
    }
    Ok(log)
}

pub fn write_traces<W: Write>(mut out: W, traces: &[TraceRecord]) -> Result<()> {
    for t in traces {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_traces<R: BufRead>(input: R) -> Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Forecast cadence of the proactive agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    /// Steps ahead the stress estimate looks.
    pub horizon_steps: usize,
    /// A fresh forecast is computed every this many ticks; each one covers
    /// enough steps to keep the full horizon in view until the next.
    pub refresh_every: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            horizon_steps: 30,
            refresh_every: 15,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_steps == 0 || self.refresh_every == 0 {
            return Err(Error::InvalidConfig("agent horizon_steps and refresh_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// Persona-driven controller reading the forecaster and validated feeds.
pub struct ProactiveAgent {
    persona: Persona,
    thresholds: PolicyThresholds,
    sim: SimConfig,
    cfg: AgentConfig,
    forecaster: Option<Box<dyn LoadForecaster>>,
    feeds: FeedHub,
    history: VecDeque<f64>,
    forecast: Option<ForecastResult>,
    ticks_since_refresh: usize,
    last_stress: Option<StressEstimate>,
}

impl ProactiveAgent {
    pub fn new(
        persona: Persona,
        thresholds: PolicyThresholds,
        sim: SimConfig,
        cfg: AgentConfig,
        forecaster: Option<Box<dyn LoadForecaster>>,
        feeds: FeedHub,
    ) -> Result<Self> {
        persona.validate()?;
        thresholds.validate()?;
        cfg.validate()?;
        Ok(Self {
            persona,
            thresholds,
            sim,
            cfg,
            forecaster,
            feeds,
            history: VecDeque::new(),
            forecast: None,
            ticks_since_refresh: 0,
            last_stress: None,
        })
    }

    pub fn persona(&self) -> &Persona {
        &self.persona
    }

    /// Drops the forecaster; later decisions run in reactive-fallback mode.
    pub fn disable_forecaster(&mut self) {
        self.forecaster = None;
        self.forecast = None;
    }

    pub fn last_stress(&self) -> Option<&StressEstimate> {
        self.last_stress.as_ref()
    }

    fn step_ts(&self, t: Timestamp, k: i64) -> Timestamp {
        t.plus_minutes(k * i64::from(self.sim.step_minutes))
    }

    fn refresh_forecast(&mut self, t: Timestamp) -> Result<()> {
        let Some(fc) = self.forecaster.as_ref() else {
            return Ok(());
        };
        let window = fc.window();
        if self.history.len() < window {
            return Ok(());
        }
        let stale = self.forecast.is_none() || self.ticks_since_refresh >= self.cfg.refresh_every;
        if !stale {
            return Ok(());
        }
        let horizon = self.cfg.horizon_steps + self.cfg.refresh_every - 1;
        let loads: Vec<f64> = self.history.iter().skip(self.history.len() - window).copied().collect();
        // contexts[j] belongs to the step after loads[j].
        let first = -(window as i64) + 2;
        let mut contexts = Vec::with_capacity(window - 1 + horizon);
        for k in first..=(horizon as i64) {
            let ts = self.step_ts(t, k);
            contexts.push(StepContext::from_signals(ts, &self.feeds.signals_at(ts)?));
        }
        // A failing forecaster degrades to reactive mode for this refresh.
        self.forecast = fc.forecast(&loads, &contexts, horizon).ok();
        self.ticks_since_refresh = 0;
        Ok(())
    }
}

impl PowerController for ProactiveAgent {
    fn name(&self) -> String {
        format!("proactive:{}", self.persona.name)
    }

    fn reward_weights(&self) -> RewardWeights {
        self.persona.reward_weights
    }

    fn decide(&mut self, state: &NetworkState) -> Result<Action> {
        let t = state.timestamp;
        self.history.push_back(state.load);
        let keep = self.forecaster.as_ref().map_or(1, |f| f.window());
        while self.history.len() > keep {
            self.history.pop_front();
        }
        self.ticks_since_refresh += 1;
        self.refresh_forecast(t)?;

        let mut view = FeedView {
            now: Some(self.feeds.signals_at(t)?),
            ahead: Vec::with_capacity(self.cfg.horizon_steps),
        };
        for k in 1..=self.cfg.horizon_steps as i64 {
            view.ahead.push(self.feeds.signals_at(self.step_ts(t, k))?);
        }
        let back = self.history.len().max(2) as i64;
        self.feeds.forget_before(self.step_ts(t, -back));

        let stress = effective_stress_sinr(
            state,
            self.forecast.as_ref(),
            &view,
            self.persona.forecast_weight,
            self.cfg.horizon_steps,
            &self.sim,
        );
        let action = decide(state, &stress, &self.thresholds, self.persona.threshold_margin_db);
        self.last_stress = Some(stress);
        Ok(action)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feeds::FeedConfig;
    use crate::forecaster::PersistenceForecaster;
    use crate::simcore::{EventRecord, TrafficModel, WorldInputs};

    fn inputs(seed: u64) -> WorldInputs {
        let start = Timestamp::from_ymd_hm(2025, 6, 14, 0, 0);
        WorldInputs {
            sim: SimConfig {
                rng_seed: seed,
                ..SimConfig::default()
            },
            traffic: TrafficModel::default(),
            events: vec![EventRecord {
                event_id: "derby".into(),
                start: start.plus_minutes(17 * 60),
                end: start.plus_minutes(20 * 60),
                demand_multiplier: 3.0,
                crowd_density_factor: 0.8,
                location_tag: "stadium".into(),
            }],
            weather: vec![],
            start,
            outage_threshold_db: 15.0,
        }
    }

    fn agent(i: &WorldInputs) -> ProactiveAgent {
        ProactiveAgent::new(
            Persona::strategic(),
            PolicyThresholds::default(),
            i.sim.clone(),
            AgentConfig::default(),
            Some(Box::new(PersistenceForecaster::new(10))),
            FeedHub::from_inputs(i, &FeedConfig::default()),
        )
        .unwrap()
    }

    fn run(seed: u64, ticks: usize) -> RunLog {
        let i = inputs(seed);
        let mut w = World::new(i.clone()).unwrap();
        control_loop(&mut w, &mut agent(&i), &PolicyThresholds::default(), ticks).unwrap()
    }

    #[test]
    fn one_row_per_tick() {
        let log = run(1, 1440);
        assert_eq!(log.rows.len(), 1440);
        assert_eq!(log.traces.len(), 1440);
        assert_eq!(log.controller, "proactive:strategic");
    }

    #[test]
    fn deterministic() {
        assert_eq!(run(5, 300), run(5, 300));
    }

    #[test]
    fn rewards_match_rows() {
        let log = run(2, 200);
        for (row, r) in log.rows.iter().zip(&log.rewards) {
            assert_eq!(row.reward_total, r.total);
        }
    }

    #[test]
    fn warmup_then_proactive() {
        let log = run(3, 30);
        assert_eq!(log.traces[0].mode, TraceMode::ReactiveFallback);
        assert_eq!(log.traces[29].mode, TraceMode::Proactive);
    }

    #[test]
    fn disabling_forecaster_degrades_mode() {
        let i = inputs(4);
        let mut w = World::new(i.clone()).unwrap();
        let mut a = agent(&i);
        let th = PolicyThresholds::default();
        let first = control_loop(&mut w, &mut a, &th, 60).unwrap();
        assert_eq!(first.traces.last().unwrap().mode, TraceMode::Proactive);
        a.disable_forecaster();
        let rest = control_loop(&mut w, &mut a, &th, 60).unwrap();
        assert!(rest.traces.iter().all(|t| t.mode == TraceMode::ReactiveFallback));
    }

    #[test]
    fn trace_lines_round_trip() {
        let log = run(6, 20);
        let mut buf = Vec::new();
        write_traces(&mut buf, &log.traces).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().contains("\"inputs_digest\""));
        assert_eq!(read_traces(buf.as_slice()).unwrap(), log.traces);
    }
}
