//! Independent verification of a synthesis certificate.
//!
//! The solver works in transformed variables; this module reconstructs the
//! original Lyapunov certificate and re-checks every claim against the
//! recovered controller: positive definiteness, the closed-loop
//! bounded-real matrix per vertex, the congruence identity tying the two
//! variable spaces together, swept H-infinity norms, and the energy cap.

use super::program::LmiProgram;
use super::{FvController, Result, SynthError, SynthStatus, SynthesisCertificate, VertexModel};
use crate::linalg;
use crate::ssanalysis::{assemble_overall, hinf_norm};
use nalgebra::DMatrix;

#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckResult {
    pub pass: bool,
    /// Signed margin; the meaning depends on the check (eigenvalue,
    /// residual, or slack).
    pub margin: f64,
}

fn check(pass: bool, margin: f64) -> CheckResult {
    CheckResult { pass, margin }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct VerificationReport {
    /// Min eigenvalue of the reconstructed Lyapunov matrix (pass: > 0).
    pub lyapunov_pd: CheckResult,
    /// `||Q Q^{-1} - I||_inf` of the reconstructed partition (pass: < 1e-8).
    pub inverse_residual: CheckResult,
    /// Max eigenvalue of the closed-loop bounded-real matrix per vertex
    /// (pass: < solver tolerance).
    pub vertex_brl: Vec<CheckResult>,
    /// Spectral abscissa of each vertex closed loop (pass: < 0).
    pub vertex_hurwitz: Vec<CheckResult>,
    /// Swept H-infinity norm per vertex against `J (1 + 1e-4)`.
    pub vertex_hinf: Vec<CheckResult>,
    /// Entrywise relative error of the congruence identity per vertex
    /// (pass: < 1e-6).
    pub congruence: Vec<CheckResult>,
    /// Min eigenvalue of `U - L5 (L2 - L1)^{-1} L5^T` (pass: > 0).
    pub energy_lmi: Option<CheckResult>,
    /// `gamma - tr(U)` (pass: > 0).
    pub trace_bound: Option<CheckResult>,
    /// Impulse-response energy of the controller output,
    /// `tr(C_FF W_c C_FF^T)` with `W_c` the controllability Gramian.
    pub ff_output_energy: f64,
    pub pass: bool,
}

/// Verification tolerances.
const INV_RESIDUAL_TOL: f64 = 1e-8;
const BRL_EIG_TOL: f64 = 1e-8;
const CONGRUENCE_TOL: f64 = 1e-6;
const HINF_SLACK: f64 = 1e-4;

pub fn verify_certificate(
    program: &LmiProgram,
    vertices: &[VertexModel],
    fvc: &FvController,
    cert: &SynthesisCertificate,
) -> Result<VerificationReport> {
    if cert.status != SynthStatus::Optimal {
        return Err(SynthError::NotOptimal(
            "verification requires an optimal certificate".into(),
        ));
    }
    let n = cert.l1.nrows();
    let m = cert.l5.nrows();
    let ident = DMatrix::<f64>::identity(n, n);

    // Partition blocks: the upper-left of Q is L1^{-1}, the off-diagonal is
    // U = L1^{-1} - L2^{-1}; Q^{-1} holds L2 and V = -L2; the remaining
    // blocks follow from Q Q^{-1} = I.
    let l1_inv = cert
        .l1
        .clone()
        .try_inverse()
        .ok_or_else(|| SynthError::Reconstruction("L1 is singular".into()))?;
    let l2_inv = cert
        .l2
        .clone()
        .try_inverse()
        .ok_or_else(|| SynthError::Reconstruction("L2 is singular".into()))?;
    let u_block = &l1_inv - &l2_inv;
    let svd = u_block.clone().svd(false, false);
    if svd.singular_values.min() <= 0.0
        || svd.singular_values.max() / svd.singular_values.min() > 1e14
    {
        return Err(SynthError::Reconstruction(
            "partition block L1^{-1} - L2^{-1} is singular".into(),
        ));
    }
    let l2_minus_l1 = &cert.l2 - &cert.l1;
    let l2_minus_l1_lu = l2_minus_l1.clone().lu();
    let n_block = &cert.l2
        * l2_minus_l1_lu
            .solve(&cert.l2)
            .ok_or_else(|| SynthError::Reconstruction("L2 - L1 is singular".into()))?;

    let mut q = DMatrix::zeros(2 * n, 2 * n);
    q.view_mut((0, 0), (n, n)).copy_from(&l1_inv);
    q.view_mut((0, n), (n, n)).copy_from(&u_block);
    q.view_mut((n, 0), (n, n)).copy_from(&u_block);
    q.view_mut((n, n), (n, n)).copy_from(&u_block);
    let mut q_inv = DMatrix::zeros(2 * n, 2 * n);
    q_inv.view_mut((0, 0), (n, n)).copy_from(&cert.l2);
    q_inv.view_mut((0, n), (n, n)).copy_from(&(-&cert.l2));
    q_inv.view_mut((n, 0), (n, n)).copy_from(&(-&cert.l2));
    q_inv.view_mut((n, n), (n, n)).copy_from(&n_block);

    let q_min_eig = linalg::symmetric_eig_min(&q);
    let lyapunov_pd = check(q_min_eig > 0.0, q_min_eig);
    let residual = linalg::max_abs(&(&q * &q_inv - DMatrix::identity(2 * n, 2 * n)));
    let inverse_residual = check(residual < INV_RESIDUAL_TOL, residual);

    // Per-vertex closed-loop checks with the shared Q.
    let mut vertex_brl = Vec::new();
    let mut vertex_hurwitz = Vec::new();
    let mut vertex_hinf = Vec::new();
    let mut congruence = Vec::new();
    // Congruence transform: T = [[L2, L1], [-L2, 0]], extended by the
    // input row and output channels.
    let mut t = DMatrix::zeros(2 * n, 2 * n);
    t.view_mut((0, 0), (n, n)).copy_from(&cert.l2);
    t.view_mut((0, n), (n, n)).copy_from(&cert.l1);
    t.view_mut((n, 0), (n, n)).copy_from(&(-&cert.l2));
    let mut t_ext = DMatrix::zeros(2 * n + 1 + m, 2 * n + 1 + m);
    t_ext.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&t);
    for k in 0..(1 + m) {
        t_ext[(2 * n + k, 2 * n + k)] = 1.0;
    }

    let vars = super::program::SynthesisVars {
        j: cert.j_lmi,
        l1: cert.l1.clone(),
        l2: cert.l2.clone(),
        l3: cert.l3.clone(),
        l4: cert.l4.clone(),
        l5: cert.l5.clone(),
        u: cert.u_energy.clone(),
    };

    for vm in vertices {
        let od = assemble_overall(&vm.model, fvc)?;
        let dim = 2 * n + 1 + m;
        let mut c_n = DMatrix::zeros(dim, dim);
        let qa = &q * &od.a_od;
        c_n.view_mut((0, 0), (2 * n, 2 * n))
            .copy_from(&(&qa + qa.transpose()));
        let qb = &q * &od.b_od;
        for i in 0..2 * n {
            c_n[(i, 2 * n)] = qb[i];
            c_n[(2 * n, i)] = qb[i];
        }
        c_n[(2 * n, 2 * n)] = -1.0;
        for ch in 0..m {
            for i in 0..2 * n {
                c_n[(i, 2 * n + 1 + ch)] = od.c_od[(ch, i)];
                c_n[(2 * n + 1 + ch, i)] = od.c_od[(ch, i)];
            }
            c_n[(2 * n + 1 + ch, 2 * n + 1 + ch)] = -cert.j_lmi;
        }
        let brl_eig = linalg::symmetric_eig_max(&c_n);
        vertex_brl.push(check(brl_eig < BRL_EIG_TOL, brl_eig));

        let abscissa = linalg::spectral_abscissa(&od.a_od);
        vertex_hurwitz.push(check(abscissa < 0.0, abscissa));

        let swept = hinf_norm(&od.to_ss(), 1e-8)?;
        vertex_hinf.push(check(
            swept <= cert.j_opt * (1.0 + HINF_SLACK),
            cert.j_opt * (1.0 + HINF_SLACK) - swept,
        ));

        // Congruence identity: the transformed closed-loop matrix equals
        // the assembled bounded-real block at the solved variables.
        let vd = vm.data();
        let lhs = program.eval_bounded_real(&vd, &vars);
        let rhs = t_ext.transpose() * &c_n * &t_ext;
        let scale = linalg::max_abs(&lhs).max(linalg::max_abs(&rhs)).max(1e-12);
        let err = linalg::max_abs(&(&lhs - &rhs)) / scale;
        congruence.push(check(err < CONGRUENCE_TOL, err));
    }
    let _ = ident;

    // Energy cap in the transformed variables.
    let (energy_lmi, trace_bound) = if program.include_energy_bound {
        let schur = &cert.u_energy
            - &cert.l5
                * l2_minus_l1_lu
                    .solve(&cert.l5.transpose())
                    .ok_or_else(|| SynthError::Reconstruction("L2 - L1 is singular".into()))?;
        let schur_min = linalg::symmetric_eig_min(&schur);
        // (L2 - L1) must itself be positive definite for the Schur
        // reduction to be meaningful; report marginal otherwise.
        let diff_min = linalg::symmetric_eig_min(&l2_minus_l1);
        let slack = cert.gamma - cert.u_energy.trace();
        (
            Some(check(schur_min > 0.0 && diff_min > 0.0, schur_min.min(diff_min))),
            Some(check(slack > 0.0, slack)),
        )
    } else {
        (None, None)
    };

    // Controller output impulse energy (reported, not asserted).
    let w_c = linalg::lyapunov(
        &fvc.a_ff,
        &(DMatrix::from_column_slice(n, 1, fvc.b_ff.as_slice())
            * DMatrix::from_column_slice(n, 1, fvc.b_ff.as_slice()).transpose()),
    );
    let ff_output_energy = (&fvc.c_ff * &w_c * fvc.c_ff.transpose()).trace();

    let pass = lyapunov_pd.pass
        && inverse_residual.pass
        && vertex_brl.iter().all(|c| c.pass)
        && vertex_hurwitz.iter().all(|c| c.pass)
        && vertex_hinf.iter().all(|c| c.pass)
        && congruence.iter().all(|c| c.pass)
        && energy_lmi.as_ref().map_or(true, |c| c.pass)
        && trace_bound.as_ref().map_or(true, |c| c.pass)
        && ff_output_energy.is_finite();

    Ok(VerificationReport {
        lyapunov_pd,
        inverse_residual,
        vertex_brl,
        vertex_hurwitz,
        vertex_hinf,
        congruence,
        energy_lmi,
        trace_bound,
        ff_output_energy,
        pass,
    })
}
