//! Singular-value sweeps and the H-infinity norm.

use super::{AnalysisError, Result, StateSpace};
use crate::linalg;
use std::f64::consts::PI;

/// Log-spaced frequency grid in Hz.
#[derive(Debug, Clone)]
pub struct FrequencyGrid {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub points: usize,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        FrequencyGrid {
            f_min_hz: 1e-4,
            f_max_hz: 1e5,
            points: 400,
        }
    }
}

impl FrequencyGrid {
    pub fn frequencies(&self) -> Vec<f64> {
        assert!(self.points >= 2 && self.f_min_hz > 0.0 && self.f_max_hz > self.f_min_hz);
        let l0 = self.f_min_hz.ln();
        let l1 = self.f_max_hz.ln();
        (0..self.points)
            .map(|i| (l0 + (l1 - l0) * i as f64 / (self.points - 1) as f64).exp())
            .collect()
    }
}

/// Per-frequency singular values, sorted descending within each row.
#[derive(Debug, Clone)]
pub struct FrequencyResponseData {
    pub freq_hz: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
}

impl FrequencyResponseData {
    pub fn peak(&self) -> f64 {
        self.sigma
            .iter()
            .filter_map(|s| s.first().copied())
            .fold(0.0, f64::max)
    }
}

/// Singular values of `G(j 2 pi f)` over a grid of frequencies in Hz.
pub fn frequency_response(ss: &StateSpace, freq_hz: &[f64]) -> Result<FrequencyResponseData> {
    if freq_hz.is_empty() {
        return Err(AnalysisError::Parameter("empty frequency grid".into()));
    }
    let mut last = 0.0;
    for &f in freq_hz {
        if f <= 0.0 || f <= last {
            return Err(AnalysisError::Parameter(
                "frequency grid must be positive and strictly increasing".into(),
            ));
        }
        last = f;
    }
    // Reject grid points that collide with imaginary-axis poles.
    let eig = ss.eigenvalues();
    let scale = linalg::max_abs(&ss.a).max(1.0);
    let mut sigma = Vec::with_capacity(freq_hz.len());
    for &f in freq_hz {
        let w = 2.0 * PI * f;
        let near_pole = eig
            .iter()
            .any(|l| (l.re.powi(2) + (l.im - w).powi(2)).sqrt() < 1e-9 * scale);
        if near_pole {
            return Err(AnalysisError::PoleOnAxis { freq_hz: f });
        }
        let g = ss.response_at(w)?;
        sigma.push(linalg::complex_singular_values(&g));
    }
    Ok(FrequencyResponseData {
        freq_hz: freq_hz.to_vec(),
        sigma,
    })
}

fn sigma_max_at(ss: &StateSpace, omega: f64) -> f64 {
    let g = ss.response_at(omega).expect("Hurwitz system has no pole on the axis");
    linalg::complex_singular_values(&g)
        .first()
        .copied()
        .unwrap_or(0.0)
}

/// H-infinity norm by a coarse log sweep plus golden-section refinement
/// around every local maximum (including the zero-frequency end).
pub fn hinf_norm(ss: &StateSpace, tol: f64) -> Result<f64> {
    hinf_norm_on(ss, &FrequencyGrid::default(), tol)
}

pub fn hinf_norm_on(ss: &StateSpace, grid: &FrequencyGrid, tol: f64) -> Result<f64> {
    let abscissa = linalg::spectral_abscissa(&ss.a);
    if !(abscissa < 0.0) {
        return Err(AnalysisError::UnstableSystem { abscissa });
    }
    // Candidate frequencies in rad/s, with a DC sample in front.
    let mut omegas: Vec<f64> = vec![0.0];
    omegas.extend(grid.frequencies().iter().map(|f| 2.0 * PI * f));
    let values: Vec<f64> = omegas.iter().map(|&w| sigma_max_at(ss, w)).collect();

    let mut best = 0.0f64;
    let n = omegas.len();
    for i in 0..n {
        let is_local_max = (i == 0 || values[i] >= values[i - 1])
            && (i + 1 == n || values[i] >= values[i + 1]);
        if !is_local_max {
            continue;
        }
        let lo = if i == 0 { omegas[0] } else { omegas[i - 1] };
        let hi = if i + 1 == n { omegas[n - 1] } else { omegas[i + 1] };
        let refined = golden_max(|w| sigma_max_at(ss, w), lo, hi, tol);
        best = best.max(refined).max(values[i]);
    }
    Ok(best)
}

/// Golden-section maximization on `[lo, hi]` (linear in omega).
fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo, hi);
    if !(b > a) {
        return f(a);
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..120 {
        if (b - a) <= tol * (1.0 + b.abs()) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn first_order(a: f64) -> StateSpace {
        // G(s) = 1 / (s + a)
        StateSpace::new(
            DMatrix::from_row_slice(1, 1, &[-a]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
        )
        .unwrap()
    }

    #[test]
    fn first_order_response() {
        let ss = first_order(1.0);
        let w0 = 1.0 / (2.0 * PI); // f such that omega = 1
        let data = frequency_response(&ss, &[1e-6, w0]).unwrap();
        assert_relative_eq!(data.sigma[0][0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(data.sigma[1][0], 1.0 / 2f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn diagonal_two_channel_dc() {
        // diag(1/(s+1), 2/(s+2)): singular values at DC are {2, 1}.
        let ss = StateSpace::new(
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let data = frequency_response(&ss, &[1e-8]).unwrap();
        assert_relative_eq!(data.sigma[0][0], 2.0, epsilon = 1e-6);
        assert_relative_eq!(data.sigma[0][1], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn hinf_peak_at_dc() {
        let ss = first_order(2.0);
        let norm = hinf_norm(&ss, 1e-6).unwrap();
        assert_relative_eq!(norm, 0.5, max_relative = 1e-6);
    }

    #[test]
    fn hinf_resonant_peak() {
        // G = wn^2 / (s^2 + 2 zeta wn s + wn^2), peak 1/(2 zeta sqrt(1-zeta^2)).
        let (zeta, wn) = (0.1, 1.0);
        let ss = StateSpace::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -wn * wn, -2.0 * zeta * wn]),
            DMatrix::from_row_slice(2, 1, &[0.0, wn * wn]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap();
        let expected = 1.0 / (2.0 * zeta * (1.0 - zeta * zeta).sqrt());
        let norm = hinf_norm(&ss, 1e-8).unwrap();
        assert_relative_eq!(norm, expected, max_relative = 1e-6);
    }

    #[test]
    fn unstable_system_rejected() {
        let ss = first_order(-0.5);
        assert!(matches!(
            hinf_norm(&ss, 1e-6),
            Err(AnalysisError::UnstableSystem { .. })
        ));
    }

    #[test]
    fn grid_must_increase() {
        let ss = first_order(1.0);
        assert!(frequency_response(&ss, &[1.0, 0.5]).is_err());
        assert!(frequency_response(&ss, &[]).is_err());
    }
}
