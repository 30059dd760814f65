//! Recovery of the controller realization from the transformed variables.

use super::{FvController, Result, SynthError, SynthStatus, SynthesisCertificate};
use crate::linalg;
use nalgebra::DMatrix;

/// Recovers `(A_FF, B_FF, C_FF)`:
///
/// ```text
/// A_FF = (L1 L2^{-1} - I)^{-1} L3 L2^{-1}
/// B_FF = (I - L1 L2^{-1})^{-1} L4
/// C_FF = -L5 L2^{-1}
/// ```
pub fn recover_controller(cert: &SynthesisCertificate) -> Result<FvController> {
    if cert.status != SynthStatus::Optimal {
        return Err(SynthError::NotOptimal(
            "controller recovery requires an optimal certificate".into(),
        ));
    }
    let n = cert.l1.nrows();
    let l2_lu = cert.l2.clone().lu();
    // X L2^{-1} computed as solve(L2, X^T)^T (L2 symmetric).
    let solve_right = |x: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        l2_lu
            .solve(&x.transpose())
            .map(|s| s.transpose())
            .ok_or_else(|| SynthError::Recovery("L2 is singular".into()))
    };
    let l1_l2inv = solve_right(&cert.l1)?;
    let w = &l1_l2inv - DMatrix::identity(n, n);
    let svd = w.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 0.0 || smax / smin > 1e12 {
        return Err(SynthError::Recovery(format!(
            "(L1 L2^-1 - I) is near singular (condition {:.3e}); increase the strictness margin",
            if smin > 0.0 { smax / smin } else { f64::INFINITY }
        )));
    }
    let w_lu = w.clone().lu();
    let l3_l2inv = solve_right(&cert.l3)?;
    let a_ff = w_lu
        .solve(&l3_l2inv)
        .ok_or_else(|| SynthError::Recovery("controller state-matrix solve failed".into()))?;
    let b_ff = (-&w)
        .lu()
        .solve(&cert.l4)
        .ok_or_else(|| SynthError::Recovery("controller input-matrix solve failed".into()))?;
    let c_ff = -solve_right(&cert.l5)?;

    let abscissa = linalg::spectral_abscissa(&a_ff);
    if abscissa >= 0.0 {
        return Err(SynthError::Recovery(format!(
            "recovered controller is not Hurwitz (spectral abscissa {abscissa:.3e})"
        )));
    }
    Ok(FvController { a_ff, b_ff, c_ff })
}
