//! Linearized state-space modeling of a reconfigurable distribution network.
//!
//! Pipeline per switch configuration/event:
//!
//! 1. [`build_admittance`] / [`AdmittancePair`]: nodal admittance before and
//!    after the event; network reconfiguration is a discrete step between
//!    the two matrices.
//! 2. [`solve_steady_state`]: Newton power flow for the pre-event operating
//!    point (generator buses hold voltage, ZIP loads are voltage dependent).
//! 3. [`linearize_dgs`] + [`zip_load_jacobian`]: analytic Jacobians of every
//!    dynamic unit and load around that point.
//! 4. [`assemble_dn_model`]: closes the unit dynamics through the algebraic
//!    network; the slack bus is an ideal source and is eliminated. The step
//!    input channel carries the admittance change acting on the pre-event
//!    voltages.
//!
//! All operations are pure functions of their inputs and deterministic.

mod admittance;
mod assemble;
pub mod dg;
mod powerflow;
#[cfg(test)]
pub(crate) mod testnet;
mod types;
mod zip;

pub use admittance::{build_admittance, energized_buses, stamp_complex, AdmittancePair, BuiltAdmittance};
pub use assemble::{
    assemble_dn_model, build_event_model, linearize_dgs, DgLinearization, DnStateSpace,
    EventModelInputs, ParamScales, StateLabel,
};
pub use powerflow::{solve_steady_state, DgSetpoint, DgSetpoints, DgSteady, OperatingPoint};
pub use types::{
    Bus, IgParams, IgUnit, Line, LoadUnit, NetModelError, NetworkDescription, SgParams, SgUnit,
    Switch, SwitchKind, ZipLoad,
};
pub use zip::zip_load_jacobian;
