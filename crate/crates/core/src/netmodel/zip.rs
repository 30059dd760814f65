//! ZIP load injection currents and their voltage Jacobians.

use super::types::{NetModelError, Result, ZipLoad};
use nalgebra::{Complex, DMatrix};

/// Voltage-magnitude floor below which the constant-power branch of the
/// Jacobian is considered singular.
pub const V_FLOOR: f64 = 1e-3;

impl ZipLoad {
    /// Drawn active/reactive power (system pu) at voltage magnitude `u` pu.
    pub fn power_at(&self, u: f64, s_base_mva: f64) -> (f64, f64) {
        let p0 = self.p_mw / s_base_mva;
        let q0 = self.q_mvar / s_base_mva;
        (
            p0 * (self.p_z * u * u + self.p_i * u + self.p_p),
            q0 * (self.q_z * u * u + self.q_i * u + self.q_p),
        )
    }

    /// d(P)/du and d(Q)/du at magnitude `u`.
    fn power_slope(&self, u: f64, s_base_mva: f64) -> (f64, f64) {
        let p0 = self.p_mw / s_base_mva;
        let q0 = self.q_mvar / s_base_mva;
        (
            p0 * (2.0 * self.p_z * u + self.p_i),
            q0 * (2.0 * self.q_z * u + self.q_i),
        )
    }

    /// Injection current (system pu) of the load at complex voltage `v`.
    /// Injection is negative of the drawn current: `I = -conj(S(|v|) / v)`.
    pub fn injection_current(&self, v: Complex<f64>, s_base_mva: f64) -> Complex<f64> {
        let u = v.norm();
        if u < V_FLOOR {
            return Complex::new(0.0, 0.0);
        }
        let (p, q) = self.power_at(u, s_base_mva);
        let s = Complex::new(p, q);
        -(s.conj() * v) / (u * u)
    }

    /// 2x2 real Jacobian d(I_inj)/d(v_dq) of the injection current.
    pub fn injection_jacobian(
        &self,
        v: Complex<f64>,
        s_base_mva: f64,
        bus_id: &str,
    ) -> Result<DMatrix<f64>> {
        let (vd, vq) = (v.re, v.im);
        let u = v.norm();
        if u < V_FLOOR {
            return Err(NetModelError::SingularLoad {
                bus: bus_id.to_string(),
                vmag: u,
            });
        }
        let (p, q) = self.power_at(u, s_base_mva);
        let (dp, dq_) = self.power_slope(u, s_base_mva);
        let u2 = u * u;
        // Drawn current components: a = (P vd + Q vq)/u^2, b = (P vq - Q vd)/u^2.
        let du_dvd = vd / u;
        let du_dvq = vq / u;
        let a_num = p * vd + q * vq;
        let b_num = p * vq - q * vd;
        let da_dvd = (p + (dp * vd + dq_ * vq) * du_dvd) / u2 - 2.0 * vd * a_num / (u2 * u2);
        let da_dvq = (q + (dp * vd + dq_ * vq) * du_dvq) / u2 - 2.0 * vq * a_num / (u2 * u2);
        let db_dvd = (-q + (dp * vq - dq_ * vd) * du_dvd) / u2 - 2.0 * vd * b_num / (u2 * u2);
        let db_dvq = (p + (dp * vq - dq_ * vd) * du_dvq) / u2 - 2.0 * vq * b_num / (u2 * u2);
        // Injection = -(drawn current).
        Ok(DMatrix::from_row_slice(
            2,
            2,
            &[-da_dvd, -da_dvq, -db_dvd, -db_dvq],
        ))
    }
}

/// Block-diagonal load Jacobian over a bus frame. `loads` pairs each load
/// with its frame position; `v_eval` gives the complex voltage at which each
/// load is linearized (the pre-event point for energized loads, the rated
/// point for loads about to be restored).
pub fn zip_load_jacobian(
    loads: &[(usize, &ZipLoad, &str)],
    v_eval: &[Complex<f64>],
    s_base_mva: f64,
    n_frame: usize,
) -> Result<DMatrix<f64>> {
    let mut d_l = DMatrix::zeros(2 * n_frame, 2 * n_frame);
    for (k, (pos, load, bus_id)) in loads.iter().enumerate() {
        let block = load.injection_jacobian(v_eval[k], s_base_mva, bus_id)?;
        for i in 0..2 {
            for j in 0..2 {
                d_l[(2 * pos + i, 2 * pos + j)] += block[(i, j)];
            }
        }
    }
    Ok(d_l)
}
