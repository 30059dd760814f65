//! Second-order Padé model of the feedforward communication delay.

use super::{AnalysisError, Result, StateSpace};
use crate::fvc::FvController;
use crate::netmodel::DnStateSpace;
use nalgebra::{DMatrix, DVector};

/// The all-pass rational factor approximating `exp(-s T_d)`:
///
/// ```text
/// (T_d^2 s^2 - 6 T_d s + 12) / (T_d^2 s^2 + 6 T_d s + 12)
/// ```
///
/// `T_d = 0` degenerates to unity.
#[derive(Debug, Clone)]
pub struct PadeFactor {
    pub t_d: f64,
    /// Numerator coefficients, ascending powers of s.
    pub num: [f64; 3],
    /// Denominator coefficients, ascending powers of s.
    pub den: [f64; 3],
}

pub fn pade_delay_factor(t_d: f64) -> Result<PadeFactor> {
    if t_d < 0.0 {
        return Err(AnalysisError::Parameter(format!(
            "delay must be nonnegative, got {t_d}"
        )));
    }
    if t_d == 0.0 {
        return Ok(PadeFactor {
            t_d,
            num: [1.0, 0.0, 0.0],
            den: [1.0, 0.0, 0.0],
        });
    }
    Ok(PadeFactor {
        t_d,
        num: [12.0, -6.0 * t_d, t_d * t_d],
        den: [12.0, 6.0 * t_d, t_d * t_d],
    })
}

impl PadeFactor {
    /// Complex value at angular frequency `omega`.
    pub fn value_at(&self, omega: f64) -> nalgebra::Complex<f64> {
        let s = nalgebra::Complex::new(0.0, omega);
        let num = self.num[0] + self.num[1] * s + self.num[2] * s * s;
        let den = self.den[0] + self.den[1] * s + self.den[2] * s * s;
        num / den
    }

    /// Controllable-canonical realization `(A_p, B_p, C_p, D_p)` of the
    /// factor; `None` for the unity (zero-delay) case.
    ///
    /// For `T_d > 0` the factor is `1 - (12/T_d) * s / (s^2 + a1 s + a0)`
    /// with `a1 = 6/T_d`, `a0 = 12/T_d^2`.
    pub fn state_space(&self) -> Option<(DMatrix<f64>, DVector<f64>, DMatrix<f64>, f64)> {
        if self.t_d == 0.0 {
            return None;
        }
        let a1 = 6.0 / self.t_d;
        let a0 = 12.0 / (self.t_d * self.t_d);
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -a0, -a1]);
        let b = DVector::from_vec(vec![0.0, 1.0]);
        let c = DMatrix::from_row_slice(1, 2, &[0.0, -12.0 / self.t_d]);
        Some((a, b, c, 1.0))
    }
}

/// The overall model with the feedforward channel driven through the Padé
/// delay factor. `ss` realizes the full response to the switching signal.
#[derive(Debug, Clone)]
pub struct DelayedModel {
    pub t_d: f64,
    pub pade: PadeFactor,
    pub ss: StateSpace,
    pub plant_order: usize,
}

/// Builds the delayed overall realization: the plant channel sees the
/// switching step directly, the controller channel sees it through the
/// all-pass delay factor. `T_d = 0` returns the undelayed stack.
pub fn assemble_delayed(dn: &DnStateSpace, fvc: &FvController, t_d: f64) -> Result<DelayedModel> {
    let overall = super::assemble_overall(dn, fvc)?;
    let pade = pade_delay_factor(t_d)?;
    let n2 = overall.a_od.nrows();
    let n = overall.plant_order;
    match pade.state_space() {
        None => Ok(DelayedModel {
            t_d,
            pade,
            ss: overall.to_ss(),
            plant_order: n,
        }),
        Some((a_p, b_p, c_p, d_p)) => {
            // Augmented states: [x_plant; x_ff; x_pade].
            let mut a = DMatrix::zeros(n2 + 2, n2 + 2);
            a.view_mut((0, 0), (n2, n2)).copy_from(&overall.a_od);
            // Controller input matrix picks up the pade output.
            let bff_cp = {
                let mut m = DMatrix::zeros(n2, 2);
                let block = DMatrix::from_column_slice(n, 1, fvc.b_ff.as_slice()) * &c_p;
                m.view_mut((n, 0), (n, 2)).copy_from(&block);
                m
            };
            a.view_mut((0, n2), (n2, 2)).copy_from(&bff_cp);
            a.view_mut((n2, n2), (2, 2)).copy_from(&a_p);
            let mut b = DMatrix::zeros(n2 + 2, 1);
            for i in 0..n {
                b[(i, 0)] = dn.b_nr[i];
            }
            for i in 0..n {
                b[(n + i, 0)] = fvc.b_ff[i] * d_p;
            }
            b[(n2, 0)] = b_p[0];
            b[(n2 + 1, 0)] = b_p[1];
            let mut c = DMatrix::zeros(dn.n_channels(), n2 + 2);
            c.view_mut((0, 0), (dn.n_channels(), n2))
                .copy_from(&overall.c_od);
            Ok(DelayedModel {
                t_d,
                pade,
                ss: StateSpace::new(a, b, c)?,
                plant_order: n,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_delay_is_unity() {
        let p = pade_delay_factor(0.0).unwrap();
        for &w in &[0.0, 0.5, 10.0] {
            let v = p.value_at(w);
            assert_relative_eq!(v.re, 1.0, epsilon = 1e-15);
            assert_relative_eq!(v.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn all_pass_unit_modulus() {
        let p = pade_delay_factor(0.25).unwrap();
        for &w in &[0.01, 1.0, 100.0] {
            assert_relative_eq!(p.value_at(w).norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn phase_matches_exact_delay_at_low_frequency() {
        let t_d = 0.1;
        let p = pade_delay_factor(t_d).unwrap();
        let w = 1.0;
        let phase = p.value_at(w).arg();
        assert_relative_eq!(phase, -w * t_d, epsilon = 1e-4);
    }

    #[test]
    fn negative_delay_rejected() {
        assert!(pade_delay_factor(-0.1).is_err());
    }

    #[test]
    fn realization_matches_rational_factor() {
        let p = pade_delay_factor(0.3).unwrap();
        let (a, b, c, d) = p.state_space().unwrap();
        let ss = StateSpace::new(
            a,
            DMatrix::from_column_slice(2, 1, b.as_slice()),
            c,
        )
        .unwrap();
        for &w in &[0.1, 1.0, 30.0] {
            let g = ss.response_at(w).unwrap()[(0, 0)] + nalgebra::Complex::new(d, 0.0);
            let exact = p.value_at(w);
            assert_relative_eq!(g.re, exact.re, epsilon = 1e-10);
            assert_relative_eq!(g.im, exact.im, epsilon = 1e-10);
        }
    }
}
