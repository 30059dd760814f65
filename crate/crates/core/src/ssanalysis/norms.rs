//! The H2 norm via a dense Lyapunov solve.

use super::{AnalysisError, Result, StateSpace};
use crate::linalg;

/// H2 norm: `sqrt(tr(C P C^T))` with `A P + P A^T + B B^T = 0`.
pub fn h2_norm(ss: &StateSpace) -> Result<f64> {
    let abscissa = linalg::spectral_abscissa(&ss.a);
    if !(abscissa < 0.0) {
        return Err(AnalysisError::UnstableSystem { abscissa });
    }
    let w = &ss.b * ss.b.transpose();
    let p = linalg::lyapunov(&ss.a, &w);
    let val = (&ss.c * &p * ss.c.transpose()).trace();
    Ok(val.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn first_order_analytic() {
        // ||1/(s+1)||_2^2 = 1/2.
        let ss = StateSpace::new(
            DMatrix::from_row_slice(1, 1, &[-1.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
        )
        .unwrap();
        assert_relative_eq!(h2_norm(&ss).unwrap(), 0.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn lyapunov_residual() {
        let a = DMatrix::from_row_slice(3, 3, &[-2.0, 1.0, 0.0, 0.0, -1.0, 0.5, -0.3, 0.0, -4.0]);
        let b = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, -1.0]);
        let w = &b * b.transpose();
        let p = linalg::lyapunov(&a, &w);
        let resid = &a * &p + &p * a.transpose() + &w;
        assert!(linalg::max_abs(&resid) < 1e-10 * linalg::max_abs(&w));
    }

    #[test]
    fn matches_impulse_energy() {
        // Numeric time integration of the squared impulse response.
        let a = DMatrix::from_row_slice(2, 2, &[-0.8, 0.4, -0.1, -1.5]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, -0.5]);
        let c = DMatrix::from_row_slice(1, 2, &[0.7, 0.2]);
        let ss = StateSpace::new(a.clone(), b.clone(), c.clone()).unwrap();
        let h2 = h2_norm(&ss).unwrap();
        let dt = 1e-4;
        let steps = 300_000; // 30 s horizon, slowest mode ~ e^{-0.8 t}
        let phi = (a * dt).exp();
        let mut x = b.column(0).clone_owned();
        let mut energy = 0.0;
        for _ in 0..steps {
            let y = &c * &x;
            energy += y[(0, 0)] * y[(0, 0)] * dt;
            x = &phi * x;
        }
        assert_relative_eq!(h2, energy.sqrt(), max_relative = 1e-2);
    }

    #[test]
    fn unstable_rejected() {
        let ss = StateSpace::new(
            DMatrix::from_row_slice(1, 1, &[0.2]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
        )
        .unwrap();
        assert!(matches!(
            h2_norm(&ss),
            Err(AnalysisError::UnstableSystem { .. })
        ));
    }
}
