//! Scenario ingestion, validation, and result persistence.
//!
//! The JSON scenario format is defined in `docs/scenario_format.md`; the
//! `version` field is mandatory. Unknown keys are rejected, ZIP coefficient
//! weights are normalized on parse, and every cross-reference (buses,
//! switches, loads) is validated before any computation runs.

mod outputs;

pub use outputs::{
    parse_trace_csv, write_eig_csv, write_outputs, write_run_report, write_svp_csv,
    write_synth_report, EventReportJson, Manifest, ManifestEntry, MatrixJson, OutputBundle,
    RunReport,
};

use crate::fvc::UncertaintySpec;
use crate::netmodel::{
    Bus, IgUnit, Line, LoadUnit, NetModelError, NetworkDescription, SgUnit, Switch, ZipLoad,
};
use crate::simulator::{
    ProfileSet, Scenario, SimError, Strategy, SwitchEvent, SynthFailurePolicy,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SCENARIO_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("parse error at {pointer}: {msg}")]
    Parse { pointer: String, msg: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("i/o failure at {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] NetModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

pub type Result<T> = std::result::Result<T, IoError>;

/// Load entry as written in scenario files: unnormalized ZIP weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSpec {
    pub id: String,
    pub bus: String,
    pub p_mw: f64,
    pub q_mvar: f64,
    pub zip_p: [f64; 3],
    pub zip_q: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub s_base_mva: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub switches: Vec<Switch>,
    pub sg_units: Vec<SgUnit>,
    pub ig_units: Vec<IgUnit>,
    pub loads: Vec<LoadSpec>,
    pub slack: String,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_settle_horizon() -> f64 {
    10.0
}
fn default_gamma() -> f64 {
    10.0
}
fn default_eps_rel() -> f64 {
    1e-7
}
fn default_energy_bound() -> bool {
    true
}

/// Top-level scenario document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    pub network: NetworkSpec,
    pub events: Vec<SwitchEvent>,
    pub strategy: Strategy,
    #[serde(default)]
    pub delay_s: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default = "default_settle_horizon")]
    pub settle_horizon_s: f64,
    #[serde(default)]
    pub uncertainty: UncertaintySpec,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub profiles: Option<ProfileSet>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub on_synth_failure: SynthFailurePolicy,
    #[serde(default = "default_eps_rel")]
    pub eps_rel: f64,
    #[serde(default = "default_energy_bound")]
    pub energy_bound: bool,
}

impl ScenarioFile {
    pub fn into_scenario(self) -> Result<Scenario> {
        if self.version != SCENARIO_FORMAT_VERSION {
            return Err(IoError::Validation(format!(
                "unsupported scenario format version {} (expected {})",
                self.version, SCENARIO_FORMAT_VERSION
            )));
        }
        let ns = self.network;
        let loads = ns
            .loads
            .into_iter()
            .map(|l| {
                Ok(LoadUnit {
                    id: l.id,
                    bus: l.bus,
                    zip: ZipLoad::from_weights(l.p_mw, l.q_mvar, l.zip_p, l.zip_q)?,
                })
            })
            .collect::<std::result::Result<Vec<_>, NetModelError>>()?;
        let network = NetworkDescription {
            s_base_mva: ns.s_base_mva,
            buses: ns.buses,
            lines: ns.lines,
            switches: ns.switches,
            sg_units: ns.sg_units,
            ig_units: ns.ig_units,
            loads,
            slack: ns.slack,
        };
        let scenario = Scenario {
            network,
            events: self.events,
            strategy: self.strategy,
            delay_s: self.delay_s,
            dt_s: self.dt_s,
            settle_horizon_s: self.settle_horizon_s,
            uncertainty: self.uncertainty,
            gamma: self.gamma,
            profiles: self.profiles,
            seed: self.seed,
            on_synth_failure: self.on_synth_failure,
            eps_rel: self.eps_rel,
            energy_bound: self.energy_bound,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_scenario(s: &Scenario) -> Self {
        let n = &s.network;
        ScenarioFile {
            version: SCENARIO_FORMAT_VERSION,
            network: NetworkSpec {
                s_base_mva: n.s_base_mva,
                buses: n.buses.clone(),
                lines: n.lines.clone(),
                switches: n.switches.clone(),
                sg_units: n.sg_units.clone(),
                ig_units: n.ig_units.clone(),
                loads: n
                    .loads
                    .iter()
                    .map(|l| LoadSpec {
                        id: l.id.clone(),
                        bus: l.bus.clone(),
                        p_mw: l.zip.p_mw,
                        q_mvar: l.zip.q_mvar,
                        zip_p: [l.zip.p_z, l.zip.p_i, l.zip.p_p],
                        zip_q: [l.zip.q_z, l.zip.q_i, l.zip.q_p],
                    })
                    .collect(),
                slack: n.slack.clone(),
            },
            events: s.events.clone(),
            strategy: s.strategy,
            delay_s: s.delay_s,
            dt_s: s.dt_s,
            settle_horizon_s: s.settle_horizon_s,
            uncertainty: s.uncertainty,
            gamma: s.gamma,
            profiles: s.profiles.clone(),
            seed: s.seed,
            on_synth_failure: s.on_synth_failure,
            eps_rel: s.eps_rel,
            energy_bound: s.energy_bound,
        }
    }
}

/// Parses and fully validates a scenario from JSON bytes.
pub fn parse_scenario_bytes(bytes: &[u8]) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let file: ScenarioFile =
        serde_path_to_error::deserialize(de).map_err(|e| IoError::Parse {
            pointer: format!("/{}", e.path().to_string().replace('.', "/")),
            msg: e.inner().to_string(),
        })?;
    file.into_scenario()
}

/// Parses and fully validates a scenario file.
pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    let bytes = std::fs::read(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario_bytes(&bytes)
}

/// Serializes a scenario back to its file form (normalized weights).
pub fn scenario_to_json(s: &Scenario) -> String {
    serde_json::to_string_pretty(&ScenarioFile::from_scenario(s)).expect("serializable")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> String {
        r#"{
  "version": 1,
  "network": {
    "s_base_mva": 1.0,
    "buses": [{"id": "b1", "v_nom_kv": 4.8}, {"id": "b2", "v_nom_kv": 4.8}],
    "lines": [{"id": "l12", "from": "b1", "to": "b2", "r_pu": 0.02, "x_pu": 0.06}],
    "switches": [{"id": "sw1", "kind": "ssw", "from": "b1", "to": "b2", "closed": false, "r_pu": 0.02, "x_pu": 0.05}],
    "sg_units": [],
    "ig_units": [],
    "loads": [{"id": "ld2", "bus": "b2", "p_mw": 0.1, "q_mvar": 0.05,
               "zip_p": [1.5, -2.3, 1.8], "zip_q": [7.4, -12.0, 5.6]}],
    "slack": "b1"
  },
  "events": [{"time_s": 1.0, "switch": "sw1", "action": "close"}],
  "strategy": "feedback-only",
  "dt_s": 0.001,
  "settle_horizon_s": 2.0
}"#
        .to_string()
    }

    #[test]
    fn parses_and_normalizes_weights() {
        let s = parse_scenario_bytes(minimal_json().as_bytes()).unwrap();
        let z = &s.network.loads[0].zip;
        assert!((z.p_z + z.p_i + z.p_p - 1.0).abs() < 1e-12);
        assert!((z.q_z + z.q_i + z.q_p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn round_trips_to_identical_structure() {
        let s1 = parse_scenario_bytes(minimal_json().as_bytes()).unwrap();
        let json = scenario_to_json(&s1);
        let s2 = parse_scenario_bytes(json.as_bytes()).unwrap();
        assert_eq!(scenario_to_json(&s2), json);
    }

    #[test]
    fn rejects_unknown_keys_with_pointer() {
        let bad = minimal_json().replace("\"dt_s\": 0.001,", "\"dt_s\": 0.001, \"bogus\": 1,");
        match parse_scenario_bytes(bad.as_bytes()) {
            Err(IoError::Parse { msg, .. }) => assert!(msg.contains("bogus"), "{msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_decreasing_event_times() {
        let bad = minimal_json().replace(
            r#"[{"time_s": 1.0, "switch": "sw1", "action": "close"}]"#,
            r#"[{"time_s": 1.0, "switch": "sw1", "action": "close"},
                {"time_s": 0.5, "switch": "sw1", "action": "open"}]"#,
        );
        match parse_scenario_bytes(bad.as_bytes()) {
            Err(IoError::Sim(SimError::Validation(msg))) => {
                assert!(msg.contains("events 0 and 1"), "{msg}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_wrong_version() {
        let bad = minimal_json().replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(
            parse_scenario_bytes(bad.as_bytes()),
            Err(IoError::Validation(_))
        ));
    }
}
