//! Modeling and control of reconfigurable distribution networks.
//!
//! The crate is organized around the pipeline that turns a switching event
//! into a voltage-regulation story:
//!
//! - [`netmodel`] builds the linearized state-space model of the network
//!   (synchronous and inverter-based generators, ZIP loads, algebraic
//!   network) together with the switching-induced disturbance channel.
//! - [`fvc`] synthesizes the optimal robust feedforward voltage controller
//!   by solving a convex LMI program over a polytope of uncertain models,
//!   recovers the controller realization, and verifies the certificate.
//! - [`ssanalysis`] provides frequency-domain analysis: eigenvalues,
//!   singular-value sweeps, H-infinity / H2 norms, and a Padé-approximated
//!   communication delay model.
//! - [`simulator`] runs event-driven time-domain simulations of switching
//!   scenarios and computes the voltage metrics.
//! - [`scenario_io`] is the data boundary: scenario files in, traces,
//!   metrics, and synthesis reports out.

pub mod fvc;
pub mod linalg;
pub mod netmodel;
pub mod scenario_io;
pub mod simulator;
pub mod ssanalysis;

pub use fvc::{FvController, SynthesisCertificate, UncertaintySpec, VerificationReport};
pub use netmodel::{
    AdmittancePair, DgLinearization, DnStateSpace, IgParams, NetworkDescription, OperatingPoint,
    SgParams, ZipLoad,
};
pub use scenario_io::{parse_scenario, write_outputs};
pub use simulator::{Metrics, Scenario, SimulationTrace, Strategy, SwitchEvent};
pub use ssanalysis::{OverallStateSpace, StateSpace};

/// Nominal system frequency. All bundled data targets 60 Hz feeders; the
/// synchronous reference frame and per-unit reactance conversions use it.
pub const NOMINAL_FREQ_HZ: f64 = 60.0;

/// Angular system frequency in rad/s.
pub fn omega_s() -> f64 {
    2.0 * std::f64::consts::PI * NOMINAL_FREQ_HZ
}
