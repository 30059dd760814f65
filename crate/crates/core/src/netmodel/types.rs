//! Static description of a reconfigurable distribution network.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetModelError {
    #[error("configuration error: {msg}; de-energized island: {island:?}")]
    Configuration { msg: String, island: Vec<String> },
    #[error("power flow did not converge after {iterations} iterations (residual {residual:.3e} pu)")]
    PowerFlow { iterations: usize, residual: f64 },
    #[error("parameter error ({unit}): {msg}")]
    Parameter { unit: String, msg: String },
    #[error("singular load at bus {bus}: |V| = {vmag:.3e} pu below the 1e-3 floor")]
    SingularLoad { bus: String, vmag: f64 },
    #[error("model error: {msg}")]
    Model { msg: String },
    #[error("validation error: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, NetModelError>;

/// Synchronous generator parameters: a sixth-order subtransient machine with
/// swing dynamics, a voltage transducer, a PI voltage regulator, and a
/// lead-lag plus first-order amplifier exciter stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgParams {
    pub s_n_mva: f64,
    pub v_n_kv: f64,
    /// Inertia constant (s) in `M dw/dt = Tm - Te - D w`.
    pub m_s: f64,
    pub d: f64,
    pub x_d: f64,
    pub x_d_p: f64,
    pub x_d_pp: f64,
    pub x_q: f64,
    pub x_q_p: f64,
    pub x_q_pp: f64,
    pub t_do_p: f64,
    pub t_do_pp: f64,
    pub t_qo_p: f64,
    pub t_qo_pp: f64,
    /// Amplifier lag (s).
    pub t_a: f64,
    /// Lead-lag denominator constant (s).
    pub t_b: f64,
    /// Lead-lag numerator constant (s).
    pub t_c: f64,
    /// Voltage transducer lag (s).
    pub t_r: f64,
    /// Amplifier gain.
    pub k_a: f64,
    pub pi_kp_v: f64,
    pub pi_ki_v: f64,
}

impl SgParams {
    pub fn validate(&self, unit: &str) -> Result<()> {
        let err = |msg: &str| {
            Err(NetModelError::Parameter {
                unit: unit.to_string(),
                msg: msg.to_string(),
            })
        };
        if self.s_n_mva <= 0.0 {
            return err("S_n must be positive");
        }
        if self.m_s <= 0.0 {
            return err("inertia M must be positive");
        }
        if self.k_a <= 0.0 {
            return err("amplifier gain K_A must be positive");
        }
        for (name, t) in [
            ("T'_do", self.t_do_p),
            ("T''_do", self.t_do_pp),
            ("T'_qo", self.t_qo_p),
            ("T''_qo", self.t_qo_pp),
            ("T_A", self.t_a),
            ("T_B", self.t_b),
            ("T_C", self.t_c),
            ("T_R", self.t_r),
        ] {
            if t <= 0.0 {
                return err(&format!("time constant {name} must be positive"));
            }
        }
        if !(self.x_d >= self.x_d_p && self.x_d_p >= self.x_d_pp && self.x_d_pp > 0.0) {
            return err("d-axis reactances must satisfy X_d >= X'_d >= X''_d > 0");
        }
        if !(self.x_q >= self.x_q_p && self.x_q_p >= self.x_q_pp && self.x_q_pp > 0.0) {
            return err("q-axis reactances must satisfy X_q >= X'_q >= X''_q > 0");
        }
        Ok(())
    }
}

/// Inverter-based generator parameters: averaged voltage-source converter
/// behind an RL filter, inner PI current loops, an outer PI loop on the
/// measured terminal-voltage magnitude, and a measurement lag. The DC link
/// is assumed stiff at `v_dc`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IgParams {
    pub s_n_mva: f64,
    pub v_dc_v: f64,
    /// Filter inductance (H), converted to per-unit on the unit base.
    pub l_f_h: f64,
    /// Filter resistance (ohm).
    pub r_f_ohm: f64,
    /// Voltage transducer lag (s).
    pub t_r: f64,
    pub pi_kp_v: f64,
    pub pi_ki_v: f64,
    pub pi_kp_i: f64,
    pub pi_ki_i: f64,
}

impl IgParams {
    pub fn validate(&self, unit: &str) -> Result<()> {
        let err = |msg: &str| {
            Err(NetModelError::Parameter {
                unit: unit.to_string(),
                msg: msg.to_string(),
            })
        };
        if self.s_n_mva <= 0.0 {
            return err("S_n must be positive");
        }
        if self.l_f_h <= 0.0 {
            return err("filter inductance L_f must be positive");
        }
        if self.r_f_ohm <= 0.0 {
            return err("filter resistance R_f must be positive");
        }
        if self.t_r <= 0.0 {
            return err("transducer lag T_R must be positive");
        }
        for (name, g) in [
            ("P_V", self.pi_kp_v),
            ("I_V", self.pi_ki_v),
            ("P_I", self.pi_kp_i),
            ("I_I", self.pi_ki_i),
        ] {
            if g < 0.0 {
                return err(&format!("gain {name} must be nonnegative"));
            }
        }
        Ok(())
    }
}

/// Voltage-dependent load: constant-impedance / constant-current /
/// constant-power mixture. Coefficients are stored normalized (each triple
/// sums to one); [`ZipLoad::from_weights`] normalizes raw weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZipLoad {
    pub p_mw: f64,
    pub q_mvar: f64,
    pub p_z: f64,
    pub p_i: f64,
    pub p_p: f64,
    pub q_z: f64,
    pub q_i: f64,
    pub q_p: f64,
}

impl ZipLoad {
    /// Builds a load from unnormalized coefficient weights.
    pub fn from_weights(
        p_mw: f64,
        q_mvar: f64,
        zip_p: [f64; 3],
        zip_q: [f64; 3],
    ) -> Result<Self> {
        let sp: f64 = zip_p.iter().sum();
        let sq: f64 = zip_q.iter().sum();
        if sp.abs() < 1e-9 || sq.abs() < 1e-9 {
            return Err(NetModelError::Validation(
                "ZIP coefficient weights sum to zero; cannot normalize".into(),
            ));
        }
        Ok(ZipLoad {
            p_mw,
            q_mvar,
            p_z: zip_p[0] / sp,
            p_i: zip_p[1] / sp,
            p_p: zip_p[2] / sp,
            q_z: zip_q[0] / sq,
            q_i: zip_q[1] / sq,
            q_p: zip_q[2] / sq,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let sp = self.p_z + self.p_i + self.p_p;
        let sq = self.q_z + self.q_i + self.q_p;
        if (sp - 1.0).abs() > 1e-9 || (sq - 1.0).abs() > 1e-9 {
            return Err(NetModelError::Validation(format!(
                "normalized ZIP coefficients must sum to 1 (got {sp}, {sq})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchKind {
    /// Tie switch, between feeders.
    Tsw,
    /// Sectionalizing switch, along a feeder.
    Ssw,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: String,
    pub v_nom_kv: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub id: String,
    pub from: String,
    pub to: String,
    pub r_pu: f64,
    pub x_pu: f64,
    /// Total line-charging susceptance, split half per end.
    #[serde(default)]
    pub b_shunt_pu: f64,
}

fn default_switch_r() -> f64 {
    1e-4
}
fn default_switch_x() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Switch {
    pub id: String,
    pub kind: SwitchKind,
    pub from: String,
    pub to: String,
    pub closed: bool,
    /// Series impedance of the closed switch path (switchable line segment).
    #[serde(default = "default_switch_r")]
    pub r_pu: f64,
    #[serde(default = "default_switch_x")]
    pub x_pu: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgUnit {
    pub id: String,
    pub bus: String,
    pub p_set_mw: f64,
    pub v_set_pu: f64,
    pub params: SgParams,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IgUnit {
    pub id: String,
    pub bus: String,
    pub p_set_mw: f64,
    pub v_set_pu: f64,
    pub params: IgParams,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadUnit {
    pub id: String,
    pub bus: String,
    #[serde(flatten)]
    pub zip: ZipLoad,
}

/// The static scenario input: buses, branches, switches, generation and
/// load placements, and the slack (substation) bus.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDescription {
    pub s_base_mva: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub switches: Vec<Switch>,
    pub sg_units: Vec<SgUnit>,
    pub ig_units: Vec<IgUnit>,
    pub loads: Vec<LoadUnit>,
    pub slack: String,
}

impl NetworkDescription {
    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn slack_index(&self) -> usize {
        self.bus_index(&self.slack).expect("validated slack bus")
    }

    pub fn switch_by_id(&self, id: &str) -> Option<&Switch> {
        self.switches.iter().find(|s| s.id == id)
    }

    /// Initial switch states as declared in the description.
    pub fn initial_switch_states(&self) -> BTreeMap<String, bool> {
        self.switches
            .iter()
            .map(|s| (s.id.clone(), s.closed))
            .collect()
    }

    /// Total number of generator channels, synchronous units first.
    pub fn dg_channel_ids(&self) -> Vec<String> {
        self.sg_units
            .iter()
            .map(|u| u.id.clone())
            .chain(self.ig_units.iter().map(|u| u.id.clone()))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.s_base_mva <= 0.0 {
            return Err(NetModelError::Validation(
                "s_base_mva must be positive".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for b in &self.buses {
            if !seen.insert(b.id.clone()) {
                return Err(NetModelError::Validation(format!(
                    "duplicate bus id {:?}",
                    b.id
                )));
            }
            if b.v_nom_kv <= 0.0 {
                return Err(NetModelError::Validation(format!(
                    "bus {:?} nominal voltage must be positive",
                    b.id
                )));
            }
        }
        if self.bus_index(&self.slack).is_none() {
            return Err(NetModelError::Validation(format!(
                "slack bus {:?} is not a declared bus",
                self.slack
            )));
        }
        let check_endpoint = |what: &str, id: &str, bus: &str| -> Result<()> {
            if self.bus_index(bus).is_none() {
                return Err(NetModelError::Validation(format!(
                    "{what} {id:?} references unknown bus {bus:?}"
                )));
            }
            Ok(())
        };
        let mut ids = BTreeSet::new();
        for l in &self.lines {
            check_endpoint("line", &l.id, &l.from)?;
            check_endpoint("line", &l.id, &l.to)?;
            if l.from == l.to {
                return Err(NetModelError::Validation(format!(
                    "line {:?} connects a bus to itself",
                    l.id
                )));
            }
            if l.r_pu.hypot(l.x_pu) < 1e-12 {
                return Err(NetModelError::Validation(format!(
                    "line {:?} has (near-)zero series impedance",
                    l.id
                )));
            }
            if !ids.insert(l.id.clone()) {
                return Err(NetModelError::Validation(format!(
                    "duplicate branch id {:?}",
                    l.id
                )));
            }
        }
        for s in &self.switches {
            check_endpoint("switch", &s.id, &s.from)?;
            check_endpoint("switch", &s.id, &s.to)?;
            if s.r_pu.hypot(s.x_pu) < 1e-12 {
                return Err(NetModelError::Validation(format!(
                    "switch {:?} has (near-)zero series impedance",
                    s.id
                )));
            }
            if !ids.insert(s.id.clone()) {
                return Err(NetModelError::Validation(format!(
                    "duplicate branch id {:?}",
                    s.id
                )));
            }
        }
        let mut unit_ids = BTreeSet::new();
        let mut dg_buses = BTreeSet::new();
        for u in &self.sg_units {
            check_endpoint("sg unit", &u.id, &u.bus)?;
            u.params.validate(&u.id)?;
            if !unit_ids.insert(u.id.clone()) {
                return Err(NetModelError::Validation(format!(
                    "duplicate unit id {:?}",
                    u.id
                )));
            }
            if !dg_buses.insert(u.bus.clone()) {
                return Err(NetModelError::Validation(format!(
                    "bus {:?} hosts more than one generator unit",
                    u.bus
                )));
            }
            if u.p_set_mw.abs() > u.params.s_n_mva {
                return Err(NetModelError::Validation(format!(
                    "unit {:?} setpoint exceeds its MVA rating",
                    u.id
                )));
            }
        }
        for u in &self.ig_units {
            check_endpoint("ig unit", &u.id, &u.bus)?;
            u.params.validate(&u.id)?;
            if !unit_ids.insert(u.id.clone()) {
                return Err(NetModelError::Validation(format!(
                    "duplicate unit id {:?}",
                    u.id
                )));
            }
            if !dg_buses.insert(u.bus.clone()) {
                return Err(NetModelError::Validation(format!(
                    "bus {:?} hosts more than one generator unit",
                    u.bus
                )));
            }
            if u.p_set_mw.abs() > u.params.s_n_mva {
                return Err(NetModelError::Validation(format!(
                    "unit {:?} setpoint exceeds its MVA rating",
                    u.id
                )));
            }
        }
        if dg_buses.contains(&self.slack) {
            return Err(NetModelError::Validation(
                "the slack bus cannot host a modeled generator unit".into(),
            ));
        }
        for ld in &self.loads {
            check_endpoint("load", &ld.id, &ld.bus)?;
            ld.zip.validate()?;
            if !unit_ids.insert(ld.id.clone()) {
                return Err(NetModelError::Validation(format!(
                    "duplicate unit id {:?}",
                    ld.id
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_bus() -> NetworkDescription {
        NetworkDescription {
            s_base_mva: 1.0,
            buses: vec![
                Bus {
                    id: "b1".into(),
                    v_nom_kv: 4.8,
                },
                Bus {
                    id: "b2".into(),
                    v_nom_kv: 4.8,
                },
            ],
            lines: vec![Line {
                id: "l12".into(),
                from: "b1".into(),
                to: "b2".into(),
                r_pu: 1.0 / 26.0,
                x_pu: 5.0 / 26.0,
                b_shunt_pu: 0.0,
            }],
            switches: vec![],
            sg_units: vec![],
            ig_units: vec![],
            loads: vec![],
            slack: "b1".into(),
        }
    }

    #[test]
    fn validates_clean_network() {
        assert!(two_bus().validate().is_ok());
    }

    #[test]
    fn rejects_unknown_endpoint() {
        let mut n = two_bus();
        n.lines[0].to = "nope".into();
        assert!(matches!(
            n.validate(),
            Err(NetModelError::Validation(_))
        ));
    }

    #[test]
    fn zip_weights_normalize() {
        let z = ZipLoad::from_weights(0.1, 0.05, [1.5, -2.3, 1.8], [7.4, -12.0, 5.6]).unwrap();
        assert!((z.p_z + z.p_i + z.p_p - 1.0).abs() < 1e-12);
        assert!((z.q_z + z.q_i + z.q_p - 1.0).abs() < 1e-12);
        z.validate().unwrap();
    }
}
