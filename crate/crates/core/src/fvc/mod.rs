//! Synthesis of the optimal robust feedforward voltage controller.
//!
//! The controller is a full-plant-order LTI filter driven by the switching
//! signal. Its parameters come from a convex program with LMI constraints:
//! minimize the closed-loop H-infinity bound `J` subject to, per uncertainty
//! vertex, a bounded-real block in the transformed variables; a coupling
//! block tying the Lyapunov partition together; and a Schur-complement
//! energy block capping the controller output energy by `gamma`.
//!
//! Pipeline: [`enumerate_polytope`] -> [`assemble_program`] -> [`solve_lmi`]
//! -> [`recover_controller`] -> [`verify_certificate`].

mod polytope;
mod program;
mod recover;
pub mod sdp;
mod solve;
mod verify;

pub use polytope::{enumerate_polytope, UncertaintySpec, VertexModel};
pub use program::{assemble_program, LmiProgram, SynthesisVars, VarCatalog, VertexData};
pub use recover::recover_controller;
pub use solve::{solve_lmi, SolveConfig};
pub use verify::{verify_certificate, CheckResult, VerificationReport};

use crate::netmodel::NetModelError;
use crate::ssanalysis::AnalysisError;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("infeasible program; binding constraint family: {binding_family}")]
    Infeasible { binding_family: String },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("controller recovery failed: {0}")]
    Recovery(String),
    #[error("certificate reconstruction failed: {0}")]
    Reconstruction(String),
    #[error("certificate is not optimal: {0}")]
    NotOptimal(String),
    #[error(transparent)]
    Model(#[from] NetModelError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

pub type Result<T> = std::result::Result<T, SynthError>;

/// Synthesized feedforward controller `(A_FF, B_FF, C_FF)`; same order as
/// the plant, one output per generator channel.
#[derive(Debug, Clone)]
pub struct FvController {
    pub a_ff: DMatrix<f64>,
    pub b_ff: DVector<f64>,
    pub c_ff: DMatrix<f64>,
}

impl FvController {
    pub fn order(&self) -> usize {
        self.a_ff.nrows()
    }

    /// A controller with zero response (open-loop / feedback-only runs).
    pub fn disabled(order: usize, channels: usize) -> Self {
        FvController {
            a_ff: -DMatrix::identity(order, order),
            b_ff: DVector::zeros(order),
            c_ff: DMatrix::zeros(channels, order),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

/// Post-solve constraint margins, computed on the unscaled blocks.
#[derive(Debug, Clone, Serialize)]
pub struct Margins {
    /// Max eigenvalue over all vertex bounded-real blocks (feasible: < 0).
    pub bounded_real_max_eig: f64,
    /// Min eigenvalue of the coupling block (feasible: > 0).
    pub coupling_min_eig: f64,
    /// Min eigenvalue of the energy Schur block, when enabled.
    pub energy_min_eig: Option<f64>,
    pub l1_min_eig: f64,
    pub l2_min_eig: f64,
    /// `gamma - tr(U)`, when the energy bound is enabled.
    pub trace_slack: Option<f64>,
    /// Strictness margin used when the program was assembled.
    pub eps: f64,
}

/// Output of the LMI solve: optimal objective, the transformed decision
/// matrices needed to recover and verify the controller, and solver data.
///
/// The bounded-real blocks carry the raw LMI variable `j_lmi`, which caps
/// the squared H-infinity norm (the scaled form with a unit input block
/// and the bound in the output corner); `j_opt = sqrt(j_lmi)` is the
/// certified norm bound itself.
#[derive(Debug, Clone)]
pub struct SynthesisCertificate {
    pub j_opt: f64,
    pub j_lmi: f64,
    pub l1: DMatrix<f64>,
    pub l2: DMatrix<f64>,
    pub l3: DMatrix<f64>,
    pub l4: DVector<f64>,
    pub l5: DMatrix<f64>,
    pub u_energy: DMatrix<f64>,
    pub gamma: f64,
    pub status: SynthStatus,
    pub margins: Margins,
    pub iterations: u32,
    pub wall_time_s: f64,
}
