//! Frequency-domain analysis of open- and closed-loop models.

mod delay;
mod freq;
mod norms;

pub use delay::{assemble_delayed, pade_delay_factor, DelayedModel, PadeFactor};
pub use freq::{frequency_response, hinf_norm, FrequencyGrid, FrequencyResponseData};
pub use norms::h2_norm;

use crate::fvc::FvController;
use crate::linalg;
use crate::netmodel::{DnStateSpace, StateLabel};
use nalgebra::{Complex, DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("system is not asymptotically stable (spectral abscissa {abscissa:.3e})")]
    UnstableSystem { abscissa: f64 },
    #[error("evaluation frequency {freq_hz:.6e} Hz coincides with a system pole")]
    PoleOnAxis { freq_hz: f64 },
    #[error("parameter error: {0}")]
    Parameter(String),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

/// A strictly proper LTI system `x' = A x + B u`, `y = C x`.
#[derive(Debug, Clone)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || c.ncols() != n {
            return Err(AnalysisError::Assembly(format!(
                "inconsistent dimensions: A {}x{}, B {}x{}, C {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        Ok(StateSpace { a, b, c })
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    /// Complex response matrix `C (jw I - A)^{-1} B` at angular frequency `w`.
    pub fn response_at(&self, omega: f64) -> Result<linalg::CMatrix> {
        let n = self.n_states();
        let mut m = linalg::to_complex(&self.a).map(|z| -z);
        for i in 0..n {
            m[(i, i)] += Complex::new(0.0, omega);
        }
        let lu = m.lu();
        let sol = lu
            .solve(&linalg::to_complex(&self.b))
            .ok_or(AnalysisError::PoleOnAxis {
                freq_hz: omega / (2.0 * std::f64::consts::PI),
            })?;
        Ok(linalg::to_complex(&self.c) * sol)
    }

    /// DC gain `C (-A)^{-1} B`.
    pub fn dc_gain(&self) -> Result<DMatrix<f64>> {
        let lu = (-&self.a).lu();
        let sol = lu.solve(&self.b).ok_or(AnalysisError::PoleOnAxis { freq_hz: 0.0 })?;
        Ok(&self.c * sol)
    }

    pub fn eigenvalues(&self) -> Vec<Complex<f64>> {
        linalg::eigenvalues(&self.a)
    }
}

/// Eigenvalues of a square matrix (sorted by real part, then imaginary).
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    linalg::eigenvalues(a)
}

/// Plant and feedforward controller stacked into the overall dynamics.
///
/// The state matrix is block upper-triangular with the plant and controller
/// on the diagonal, so the overall spectrum is the union of the two spectra.
#[derive(Debug, Clone)]
pub struct OverallStateSpace {
    pub a_od: DMatrix<f64>,
    pub b_od: DVector<f64>,
    pub c_od: DMatrix<f64>,
    pub state_labels: Vec<StateLabel>,
    pub plant_order: usize,
}

impl OverallStateSpace {
    pub fn to_ss(&self) -> StateSpace {
        StateSpace {
            a: self.a_od.clone(),
            b: DMatrix::from_column_slice(self.b_od.len(), 1, self.b_od.as_slice()),
            c: self.c_od.clone(),
        }
    }
}

/// Stacks the plant with a feedforward controller:
///
/// ```text
/// A_OD = [ A_DN  B_DG C_FF ]     B_OD = [ B_NR ]     C_OD = [ C_DG  O ]
///        [  O       A_FF   ]             [ B_FF ]
/// ```
pub fn assemble_overall(dn: &DnStateSpace, fvc: &FvController) -> Result<OverallStateSpace> {
    let n = dn.n_states();
    let m = dn.n_channels();
    if fvc.a_ff.nrows() != n || fvc.c_ff.nrows() != m || fvc.b_ff.len() != n {
        return Err(AnalysisError::Assembly(format!(
            "controller order {} / channels {} do not match plant order {} / channels {}",
            fvc.a_ff.nrows(),
            fvc.c_ff.nrows(),
            n,
            m
        )));
    }
    let mut a_od = DMatrix::zeros(2 * n, 2 * n);
    a_od.view_mut((0, 0), (n, n)).copy_from(&dn.a_dn);
    a_od.view_mut((0, n), (n, n)).copy_from(&(&dn.b_dg * &fvc.c_ff));
    a_od.view_mut((n, n), (n, n)).copy_from(&fvc.a_ff);
    let mut b_od = DVector::zeros(2 * n);
    b_od.rows_mut(0, n).copy_from(&dn.b_nr);
    b_od.rows_mut(n, n).copy_from(&fvc.b_ff);
    let mut c_od = DMatrix::zeros(m, 2 * n);
    c_od.view_mut((0, 0), (m, n)).copy_from(&dn.c_dg);
    let mut state_labels = dn.state_labels.clone();
    for lbl in &dn.state_labels {
        state_labels.push(StateLabel {
            unit: format!("ff:{}", lbl.unit),
            state: lbl.state,
        });
    }
    Ok(OverallStateSpace {
        a_od,
        b_od,
        c_od,
        state_labels,
        plant_order: n,
    })
}
