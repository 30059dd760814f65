//! Event-driven time-domain simulation of switching scenarios.
//!
//! A scenario is a sequence of switch operations on one network. For each
//! event the simulator re-solves the power flow at the pre-event topology,
//! rebuilds the linearized model, synthesizes the feedforward controller
//! (proposed strategy) or leaves the feedback loops alone, and integrates
//! the deviation dynamics exactly until the next event. Physical unit
//! states carry over across the per-event re-linearizations.

mod events;
mod integrate;
mod metrics;
mod profiles;

pub use events::{run_switch_event, EventReport, SegmentResult};
pub use integrate::{discretize, integrate_lti};
pub use metrics::{compute_metrics, Metrics, SettleBand, SignalMetrics, WindowMetrics};
pub use profiles::{ProfileEntry, ProfileSet, Sinusoid};

use crate::fvc::{SynthError, UncertaintySpec};
use crate::netmodel::{NetModelError, NetworkDescription};
use crate::ssanalysis::AnalysisError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario validation error: {0}")]
    Validation(String),
    #[error("integration failed at step {step}: {msg}")]
    Integration { step: usize, msg: String },
    #[error("metrics error: {0}")]
    Metrics(String),
    #[error("synthesis failed at event {event_index} ({event_id}): {source}")]
    Synthesis {
        event_index: usize,
        event_id: String,
        source: SynthError,
    },
    #[error(transparent)]
    Model(#[from] NetModelError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Feedforward controllers synthesized per event, on top of the
    /// existing feedback loops.
    Proposed,
    /// Existing PI feedback loops alone.
    FeedbackOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchAction {
    Open,
    Close,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchEvent {
    pub time_s: f64,
    pub switch: String,
    pub action: SwitchAction,
    /// Per-event override of the controller energy cap.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Per-event override of the uncertainty fractions.
    #[serde(default)]
    pub uncertainty: Option<UncertaintySpec>,
}

impl SwitchEvent {
    pub fn id(&self) -> String {
        let act = match self.action {
            SwitchAction::Open => "open",
            SwitchAction::Close => "close",
        };
        format!("{}:{}", self.switch, act)
    }
}

/// What to do when a per-event synthesis fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SynthFailurePolicy {
    #[default]
    Abort,
    /// Run the event with the feedback loops alone and record the fallback.
    FallbackFeedbackOnly,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub network: NetworkDescription,
    pub events: Vec<SwitchEvent>,
    pub strategy: Strategy,
    pub delay_s: f64,
    pub dt_s: f64,
    pub settle_horizon_s: f64,
    pub uncertainty: UncertaintySpec,
    pub gamma: f64,
    pub profiles: Option<ProfileSet>,
    pub seed: u64,
    pub on_synth_failure: SynthFailurePolicy,
    /// Strictness margin scale for the synthesis LMIs.
    pub eps_rel: f64,
    /// Whether the controller-energy cap is enforced.
    pub energy_bound: bool,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if self.dt_s <= 0.0 {
            return Err(SimError::Validation("dt_s must be positive".into()));
        }
        if self.settle_horizon_s < 10.0 * self.dt_s {
            return Err(SimError::Validation(
                "settle_horizon_s must be at least 10 dt".into(),
            ));
        }
        if self.delay_s < 0.0 {
            return Err(SimError::Validation("delay_s must be nonnegative".into()));
        }
        if self.gamma <= 0.0 && self.energy_bound {
            return Err(SimError::Validation(
                "gamma must be positive when the energy bound is enforced".into(),
            ));
        }
        self.uncertainty
            .validate()
            .map_err(|e| SimError::Validation(e.to_string()))?;
        let mut last = f64::NEG_INFINITY;
        for (i, ev) in self.events.iter().enumerate() {
            if self.network.switch_by_id(&ev.switch).is_none() {
                return Err(SimError::Validation(format!(
                    "event {i} references unknown switch {:?}",
                    ev.switch
                )));
            }
            if ev.time_s <= last {
                return Err(SimError::Validation(format!(
                    "event times must strictly increase (events {} and {})",
                    i.saturating_sub(1),
                    i
                )));
            }
            if ev.time_s < 0.0 {
                return Err(SimError::Validation(format!("event {i} time is negative")));
            }
            if let Some(u) = &ev.uncertainty {
                u.validate().map_err(|e| SimError::Validation(e.to_string()))?;
            }
            last = ev.time_s;
        }
        if let Some(p) = &self.profiles {
            for e in &p.entries {
                if self.network.loads.iter().all(|l| l.id != e.load) {
                    return Err(SimError::Validation(format!(
                        "profile references unknown load {:?}",
                        e.load
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Marks the first sample of an event's segment.
#[derive(Debug, Clone, Serialize)]
pub struct EventMarker {
    pub sample: usize,
    pub time_s: f64,
    pub event_index: usize,
    pub event_id: String,
}

/// Contiguous slice of the trace produced under one model.
#[derive(Debug, Clone, Serialize)]
pub struct SegmentInfo {
    pub start_sample: usize,
    /// Exclusive.
    pub end_sample: usize,
    pub event_index: Option<usize>,
    /// Infinity norm of the deviation-state derivative at the segment end.
    pub end_derivative_norm: f64,
}

/// Time series of the monitored signals. Deviations are relative to each
/// segment's pre-event steady state; `segments` records how well each
/// segment settled.
#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub dt_s: f64,
    pub time_s: Vec<f64>,
    /// Generator channel ids, synchronous units first.
    pub dg_ids: Vec<String>,
    /// Monitored non-generator buses (network order).
    pub bus_ids: Vec<String>,
    /// Per-channel terminal voltage deviation (measured state), pu.
    pub dv_dg: Vec<Vec<f64>>,
    /// Per-bus voltage magnitude deviation, pu.
    pub dv_bus: Vec<Vec<f64>>,
    /// Per-channel active/reactive power deviations, system pu.
    pub p_dg: Vec<Vec<f64>>,
    pub q_dg: Vec<Vec<f64>>,
    /// Per-channel feedforward output signals.
    pub u_ff: Vec<Vec<f64>>,
    pub markers: Vec<EventMarker>,
    pub segments: Vec<SegmentInfo>,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.time_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_s.is_empty()
    }
}

/// Full result of a scenario run.
#[derive(Debug)]
pub struct ScenarioRun {
    pub trace: SimulationTrace,
    pub metrics: Metrics,
    pub event_reports: Vec<EventReport>,
}

/// Executes all events in order with state carry-over between segments.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioRun> {
    scenario.validate()?;
    let mut engine = events::Engine::new(scenario)?;

    // Quiet lead-in up to the first event (or the whole horizon when the
    // scenario has no events).
    let first_event_t = scenario
        .events
        .first()
        .map(|e| e.time_s)
        .unwrap_or(scenario.settle_horizon_s);
    if first_event_t > 0.0 {
        engine.run_quiet_segment(first_event_t, scenario.events.is_empty())?;
    }

    for i in 0..scenario.events.len() {
        let horizon = if i + 1 < scenario.events.len() {
            scenario.events[i + 1].time_s - scenario.events[i].time_s
        } else {
            scenario.settle_horizon_s
        };
        engine.run_event_segment(i, horizon, i + 1 == scenario.events.len())?;
    }

    let (trace, event_reports) = engine.finish();
    let metrics = compute_metrics(&trace, &SettleBand::default())?;
    Ok(ScenarioRun {
        trace,
        metrics,
        event_reports,
    })
}
