//! Solving the assembled program and packaging the certificate.

use super::program::LmiProgram;
use super::sdp::{ClarabelBackend, SdpBackend, SdpSettings, SolveStatus};
use super::{Margins, Result, SynthError, SynthStatus, SynthesisCertificate};
use crate::linalg;

/// Solve configuration: backend settings plus the diagnostic re-solve used
/// to attribute infeasibility to a constraint family.
#[derive(Debug, Clone, Default)]
pub struct SolveConfig {
    pub settings: SdpSettings,
}

/// Minimizes `J` over the program's LMI constraints.
pub fn solve_lmi(program: &LmiProgram, config: &SolveConfig) -> Result<SynthesisCertificate> {
    let backend = ClarabelBackend;
    let sdp = program.to_sdp();
    let out = backend.solve(&sdp, &config.settings)?;
    match out.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => {
            // Attribute the failure: if dropping the energy bound restores
            // feasibility, the energy family was binding.
            let family = if program.include_energy_bound {
                let mut relaxed = program.clone();
                relaxed.include_energy_bound = false;
                match backend.solve(&relaxed.to_sdp(), &config.settings) {
                    Ok(o) if o.status == SolveStatus::Optimal => {
                        "energy bound (Schur block / trace cap)"
                    }
                    _ => "bounded-real or coupling blocks",
                }
            } else {
                "bounded-real or coupling blocks"
            };
            return Err(SynthError::Infeasible {
                binding_family: family.to_string(),
            });
        }
        SolveStatus::NumericalFailure(msg) => {
            return Err(SynthError::Solver(format!(
                "solver stopped without an optimality certificate: {msg}"
            )));
        }
    }

    let vars = program.catalog.unpack(&out.x);
    let bounded_real_max_eig = program
        .vertices
        .iter()
        .map(|v| linalg::symmetric_eig_max(&program.eval_bounded_real(v, &vars)))
        .fold(f64::NEG_INFINITY, f64::max);
    let coupling_min_eig = linalg::symmetric_eig_min(&program.eval_coupling(&vars));
    let (energy_min_eig, trace_slack) = if program.include_energy_bound {
        (
            Some(linalg::symmetric_eig_min(&program.eval_energy(&vars))),
            Some(program.gamma - vars.u.trace()),
        )
    } else {
        (None, None)
    };
    let margins = Margins {
        bounded_real_max_eig,
        coupling_min_eig,
        energy_min_eig,
        l1_min_eig: linalg::symmetric_eig_min(&vars.l1),
        l2_min_eig: linalg::symmetric_eig_min(&vars.l2),
        trace_slack,
        eps: program.eps,
    };

    Ok(SynthesisCertificate {
        j_opt: vars.j.max(0.0).sqrt(),
        j_lmi: vars.j,
        l1: vars.l1,
        l2: vars.l2,
        l3: vars.l3,
        l4: vars.l4,
        l5: vars.l5,
        u_energy: vars.u,
        gamma: program.gamma,
        status: SynthStatus::Optimal,
        margins,
        iterations: out.iterations,
        wall_time_s: out.solve_time_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fvc::program::{assemble_program, VertexData};
    use crate::fvc::recover_controller;
    use crate::ssanalysis::{hinf_norm, StateSpace};
    use nalgebra::{DMatrix, DVector};

    fn scalar_plant() -> (VertexData, DMatrix<f64>) {
        (
            VertexData {
                a_dn: DMatrix::from_row_slice(1, 1, &[-1.0]),
                b_dg: DMatrix::from_row_slice(1, 1, &[1.0]),
                b_nr: DVector::from_vec(vec![1.0]),
                signature: String::new(),
            },
            DMatrix::from_row_slice(1, 1, &[1.0]),
        )
    }

    #[test]
    fn scalar_plant_beats_open_loop() {
        // Open loop 1/(s+1) has peak 1 at DC; the feedforward filter can
        // cancel most of it.
        let (v, c) = scalar_plant();
        let prog = assemble_program(vec![v.clone()], c.clone(), 100.0, 1e-7, true).unwrap();
        let cert = solve_lmi(&prog, &SolveConfig::default()).unwrap();
        assert!(cert.j_opt < 0.5, "J = {}", cert.j_opt);
        // Closed-loop sweep respects the bound.
        let fvc = recover_controller(&cert).unwrap();
        let a_cl = DMatrix::from_row_slice(
            2,
            2,
            &[
                v.a_dn[(0, 0)],
                (v.b_dg[(0, 0)] * fvc.c_ff[(0, 0)]),
                0.0,
                fvc.a_ff[(0, 0)],
            ],
        );
        let b_cl = DMatrix::from_column_slice(2, 1, &[v.b_nr[0], fvc.b_ff[0]]);
        let c_cl = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let ss = StateSpace::new(a_cl, b_cl, c_cl).unwrap();
        let swept = hinf_norm(&ss, 1e-8).unwrap();
        assert!(
            swept <= cert.j_opt * (1.0 + 1e-4),
            "swept {} > J {}",
            swept,
            cert.j_opt
        );
    }

    #[test]
    fn zero_gamma_is_infeasible_on_energy_family() {
        let (v, c) = scalar_plant();
        let prog = assemble_program(vec![v], c, 0.0, 1e-7, true).unwrap();
        match solve_lmi(&prog, &SolveConfig::default()) {
            Err(SynthError::Infeasible { binding_family }) => {
                assert!(binding_family.contains("energy"), "{binding_family}");
            }
            other => panic!("expected Infeasible, got {other:?}"),
        }
    }

    #[test]
    fn deterministic_j() {
        let (v, c) = scalar_plant();
        let prog = assemble_program(vec![v], c, 100.0, 1e-7, true).unwrap();
        let a = solve_lmi(&prog, &SolveConfig::default()).unwrap();
        let b = solve_lmi(&prog, &SolveConfig::default()).unwrap();
        assert_eq!(a.j_opt.to_bits(), b.j_opt.to_bits());
    }
}
