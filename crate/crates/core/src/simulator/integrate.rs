//! Fixed-step LTI integration by exact discretization.
//!
//! For piecewise-constant inputs the matrix exponential of the augmented
//! `[A B; 0 0]` block over one step gives the exact state transition, so
//! step responses carry no truncation error.

use super::SimError;
use nalgebra::{DMatrix, DVector};

/// One-step exact discretization `(A_d, B_d)` of `(A, B)` over `dt`.
pub fn discretize(a: &DMatrix<f64>, b: &DMatrix<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let p = b.ncols();
    let mut aug = DMatrix::zeros(n + p, n + p);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    aug.view_mut((0, n), (n, p)).copy_from(b);
    let e = (aug * dt).exp();
    (
        e.view((0, 0), (n, n)).clone_owned(),
        e.view((0, n), (n, p)).clone_owned(),
    )
}

/// Integrates `x' = A x + B u(t)` from `x0` over `n_steps` of length `dt`,
/// with `u` constant on each step (`u(k)` holds on `[k dt, (k+1) dt)`).
/// Returns states at the `n_steps + 1` sample instants.
pub fn integrate_lti(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    x0: &DVector<f64>,
    u: &mut dyn FnMut(usize) -> DVector<f64>,
    n_steps: usize,
    dt: f64,
) -> Result<Vec<DVector<f64>>, SimError> {
    if dt <= 0.0 {
        return Err(SimError::Validation("dt must be positive".into()));
    }
    let lam_max = crate::linalg::eigenvalues(a)
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max);
    if lam_max > 0.0 && dt > 0.1 / lam_max {
        log::warn!(
            "integration step {dt} s does not resolve the fastest mode (|lambda|max = {lam_max:.3e} rad/s, suggested dt <= {:.3e} s); samples are exact but may alias",
            0.1 / lam_max
        );
    }
    let (ad, bd) = discretize(a, b, dt);
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(x0.clone());
    let mut x = x0.clone();
    for k in 0..n_steps {
        x = &ad * &x + &bd * u(k);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(SimError::Integration {
                step: k + 1,
                msg: "state became non-finite".into(),
            });
        }
        out.push(x.clone());
    }
    Ok(out)
}
