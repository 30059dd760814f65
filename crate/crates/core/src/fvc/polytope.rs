//! Uncertainty polytope: vertex models from parameter error extremes.

use super::program::VertexData;
use super::{Result, SynthError};
use crate::netmodel::{build_event_model, DnStateSpace, EventModelInputs, OperatingPoint, ParamScales};
use serde::{Deserialize, Serialize};

/// Error fractions for the uncertain estimates: exciter amplifier gain,
/// filter inductance, and the demand of the loads switched by the event.
/// A zero entry is inactive and does not double the vertex count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySpec {
    #[serde(default)]
    pub ka: f64,
    #[serde(default)]
    pub lf: f64,
    #[serde(default)]
    pub sr: f64,
}

impl Default for UncertaintySpec {
    fn default() -> Self {
        UncertaintySpec {
            ka: 0.0,
            lf: 0.0,
            sr: 0.0,
        }
    }
}

impl UncertaintySpec {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [("ka", self.ka), ("lf", self.lf), ("sr", self.sr)] {
            if !(0.0..1.0).contains(&f) {
                return Err(SynthError::Assembly(format!(
                    "uncertainty fraction {name} = {f} must lie in [0, 1)"
                )));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.ka == 0.0 && self.lf == 0.0 && self.sr == 0.0
    }
}

/// A vertex: the scalings that produced it and the assembled plant.
#[derive(Debug, Clone)]
pub struct VertexModel {
    pub scales: ParamScales,
    pub signature: String,
    pub model: DnStateSpace,
}

impl VertexModel {
    pub fn data(&self) -> VertexData {
        VertexData::from_model(&self.model, &self.signature)
    }
}

/// Rebuilds the event model at every sign combination of the active
/// uncertainty fractions. No active fractions: a single nominal vertex.
pub fn enumerate_polytope(
    inputs: &EventModelInputs,
    op: &OperatingPoint,
    spec: &UncertaintySpec,
) -> Result<Vec<VertexModel>> {
    spec.validate()?;
    let mut active: Vec<(&str, f64)> = Vec::new();
    if spec.ka > 0.0 {
        active.push(("ka", spec.ka));
    }
    if spec.lf > 0.0 {
        active.push(("lf", spec.lf));
    }
    if spec.sr > 0.0 {
        active.push(("sr", spec.sr));
    }
    let count = 1usize << active.len();
    let mut out = Vec::with_capacity(count);
    for mask in 0..count {
        let mut scales = ParamScales::default();
        let mut signature = String::new();
        for (bit, (name, frac)) in active.iter().enumerate() {
            let positive = (mask >> bit) & 1 == 1;
            let factor = if positive { 1.0 + frac } else { 1.0 - frac };
            match *name {
                "ka" => scales.ka = factor,
                "lf" => scales.lf = factor,
                "sr" => scales.sr = factor,
                _ => unreachable!(),
            }
            if !signature.is_empty() {
                signature.push(' ');
            }
            signature.push_str(name);
            signature.push(if positive { '+' } else { '-' });
        }
        let model = build_event_model(inputs, op, &scales).map_err(|e| {
            SynthError::Assembly(format!(
                "vertex assembly failed at [{signature}]: {e}"
            ))
        })?;
        out.push(VertexModel {
            scales,
            signature,
            model,
        });
    }
    Ok(out)
}
