//! Nonlinear generator unit models and their analytic linearizations.
//!
//! Two unit types:
//!
//! - Synchronous generator: sixth-order subtransient machine (swing plus
//!   four rotor-flux states), a voltage transducer, a PI voltage regulator,
//!   and a lead-lag + first-order amplifier exciter. The feedforward input
//!   adds to the exciter reference, downstream of the PI regulator, so the
//!   voltage integrator still pins the measured terminal voltage in steady
//!   state.
//! - Inverter-based generator: averaged converter behind an RL filter with
//!   filter currents kept in the synchronous network frame; inner PI current
//!   loops act on the in-phase/quadrature current components relative to the
//!   instantaneous terminal-voltage direction, an outer PI loop regulates the
//!   measured voltage magnitude through the quadrature (reactive) current
//!   reference, and the feedforward input adds to that reference. The
//!   in-phase (active) current reference is held at its dispatch value.
//!
//! All voltages/currents are per-unit; machine-internal quantities are on
//! the unit MVA base (bus nominal voltage base), injections are reported on
//! the system base. Time is in seconds.
//!
//! Every unit exposes the nonlinear state derivative, the steady state for
//! a given terminal condition, the network current injection, and analytic
//! Jacobians of both. The Jacobians are hand-derived; tests check them
//! against central finite differences of the nonlinear functions.

use super::types::{IgParams, NetModelError, Result, SgParams};
use crate::omega_s;
use nalgebra::{Complex, DMatrix, DVector};

pub const SG_STATES: usize = 10;
pub const SG_STATE_NAMES: [&str; SG_STATES] = [
    "rotor_angle",
    "speed_dev",
    "emf_q_tr",
    "emf_q_sub",
    "emf_d_tr",
    "emf_d_sub",
    "v_meas",
    "avr_pi_int",
    "exc_leadlag",
    "field_voltage",
];
/// Index of the measured-voltage (transducer) state within an SG block.
pub const SG_VMEAS: usize = 6;

pub const IG_STATES: usize = 6;
pub const IG_STATE_NAMES: [&str; IG_STATES] = [
    "filter_i_d",
    "filter_i_q",
    "v_meas",
    "vreg_int",
    "ireg_p_int",
    "ireg_r_int",
];
pub const IG_VMEAS: usize = 2;

/// Operating references fixed between events.
#[derive(Debug, Clone, Copy)]
pub struct SgContext {
    pub torque_mech: f64,
    pub v_ref: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct IgContext {
    pub active_current_ref: f64,
    pub v_ref: f64,
}

/// Per-unit Jacobians of a unit's derivative and injection maps.
#[derive(Debug, Clone)]
pub struct UnitJacobians {
    /// d f / d x, n x n.
    pub f_x: DMatrix<f64>,
    /// d f / d v_dq, n x 2.
    pub f_v: DMatrix<f64>,
    /// d f / d u, n x 1.
    pub f_u: DVector<f64>,
    /// d I_inj / d x (system base), 2 x n.
    pub i_x: DMatrix<f64>,
    /// d I_inj / d v_dq (system base), 2 x 2.
    pub i_v: DMatrix<f64>,
}

// ---------------------------------------------------------------------------
// Synchronous generator
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SgModel {
    pub params: SgParams,
    /// S_n / S_base: unit-base current to system-base injection.
    pub s_scale: f64,
    /// Optional scaling of the amplifier gain (polytope vertices).
    pub ka_scale: f64,
}

impl SgModel {
    pub fn new(params: &SgParams, s_base_mva: f64) -> Self {
        SgModel {
            params: params.clone(),
            s_scale: params.s_n_mva / s_base_mva,
            ka_scale: 1.0,
        }
    }

    fn ka(&self) -> f64 {
        self.params.k_a * self.ka_scale
    }

    /// Machine-frame voltages/currents for rotor angle `delta` and network
    /// voltage `v` (both system/unit pu; voltage bases coincide).
    fn stator(&self, delta: f64, eq_pp: f64, ed_pp: f64, vd_net: f64, vq_net: f64) -> Stator {
        let p = &self.params;
        let (s, c) = delta.sin_cos();
        let vd = vd_net * s - vq_net * c;
        let vq = vd_net * c + vq_net * s;
        let id = (eq_pp - vq) / p.x_d_pp;
        let iq = (vd - ed_pp) / p.x_q_pp;
        Stator { s, c, vd, vq, id, iq }
    }

    /// Steady state for a terminal voltage `v` (system pu) and dispatched
    /// `p_sys`, `q_sys` (system pu, injection).
    pub fn steady_state(
        &self,
        unit: &str,
        v: Complex<f64>,
        p_sys: f64,
        q_sys: f64,
    ) -> Result<(DVector<f64>, SgContext)> {
        let p = &self.params;
        if v.norm() < 0.5 {
            return Err(NetModelError::Parameter {
                unit: unit.to_string(),
                msg: format!("terminal voltage {:.3} pu too low for a steady state", v.norm()),
            });
        }
        let p_u = p_sys / self.s_scale;
        let q_u = q_sys / self.s_scale;
        let i = (Complex::new(p_u, q_u) / v).conj();
        // The voltage behind X_q lies on the machine q-axis.
        let e_qaxis = v + Complex::new(0.0, p.x_q) * i;
        let delta = e_qaxis.im.atan2(e_qaxis.re);
        let st = self.stator_currents_from(delta, v, i);
        let (vd, vq, id, iq) = st;
        let eq_pp = vq + p.x_d_pp * id;
        let ed_pp = vd - p.x_q_pp * iq;
        let eq_p = eq_pp + (p.x_d_p - p.x_d_pp) * id;
        let e_fd = eq_p + (p.x_d - p.x_d_p) * id;
        let ed_p = (p.x_q - p.x_q_p) * iq;
        let t_e = vd * id + vq * iq;
        let v_t = v.norm();
        let y_ll = e_fd / self.ka();
        let x_ll = y_ll;
        let x_pi = y_ll;
        let mut x = DVector::zeros(SG_STATES);
        x[0] = delta;
        x[1] = 0.0;
        x[2] = eq_p;
        x[3] = eq_pp;
        x[4] = ed_p;
        x[5] = ed_pp;
        x[6] = v_t;
        x[7] = x_pi;
        x[8] = x_ll;
        x[9] = e_fd;
        Ok((
            x,
            SgContext {
                torque_mech: t_e,
                v_ref: v_t,
            },
        ))
    }

    fn stator_currents_from(
        &self,
        delta: f64,
        v: Complex<f64>,
        i: Complex<f64>,
    ) -> (f64, f64, f64, f64) {
        let (s, c) = delta.sin_cos();
        let vd = v.re * s - v.im * c;
        let vq = v.re * c + v.im * s;
        let id = i.re * s - i.im * c;
        let iq = i.re * c + i.im * s;
        (vd, vq, id, iq)
    }

    /// Nonlinear state derivative.
    pub fn derivative(&self, x: &DVector<f64>, v: (f64, f64), u: f64, ctx: &SgContext) -> DVector<f64> {
        let p = &self.params;
        let st = self.stator(x[0], x[3], x[5], v.0, v.1);
        let t_e = st.vd * st.id + st.vq * st.iq;
        let v_t = v.0.hypot(v.1);
        let e = ctx.v_ref - x[6];
        let y_in = p.pi_kp_v * e + x[7] + u;
        let tc_tb = p.t_c / p.t_b;
        let y_ll = tc_tb * y_in + (1.0 - tc_tb) * x[8];
        let mut f = DVector::zeros(SG_STATES);
        f[0] = omega_s() * x[1];
        f[1] = (ctx.torque_mech - t_e - p.d * x[1]) / p.m_s;
        f[2] = (x[9] - x[2] - (p.x_d - p.x_d_p) * st.id) / p.t_do_p;
        f[3] = (x[2] - x[3] - (p.x_d_p - p.x_d_pp) * st.id) / p.t_do_pp;
        f[4] = (-x[4] + (p.x_q - p.x_q_p) * st.iq) / p.t_qo_p;
        f[5] = (x[4] - x[5] + (p.x_q_p - p.x_q_pp) * st.iq) / p.t_qo_pp;
        f[6] = (v_t - x[6]) / p.t_r;
        f[7] = p.pi_ki_v * e;
        f[8] = (y_in - x[8]) / p.t_b;
        f[9] = (self.ka() * y_ll - x[9]) / p.t_a;
        f
    }

    /// Injection current into the network, system base.
    pub fn injection(&self, x: &DVector<f64>, v: (f64, f64)) -> (f64, f64) {
        let st = self.stator(x[0], x[3], x[5], v.0, v.1);
        let i_d_net = st.id * st.s + st.iq * st.c;
        let i_q_net = -st.id * st.c + st.iq * st.s;
        (self.s_scale * i_d_net, self.s_scale * i_q_net)
    }

    pub fn jacobians(&self, x: &DVector<f64>, v: (f64, f64), ctx: &SgContext) -> UnitJacobians {
        let _ = ctx;
        let p = &self.params;
        let st = self.stator(x[0], x[3], x[5], v.0, v.1);
        let Stator { s, c, vd, vq, id, iq } = st;
        let (xdpp, xqpp) = (p.x_d_pp, p.x_q_pp);

        // Stator algebra partials.
        let did_dd = vd / xdpp; // d i_d / d delta
        let did_de = 1.0 / xdpp; // d i_d / d E''_q
        let diq_dd = vq / xqpp;
        let diq_de = -1.0 / xqpp; // d i_q / d E''_d
        let did_dvd = -c / xdpp;
        let did_dvq = -s / xdpp;
        let diq_dvd = s / xqpp;
        let diq_dvq = -c / xqpp;
        // Torque partials (T_e = vd id + vq iq).
        let dte_dd = vq * id + vd * did_dd - vd * iq + vq * diq_dd;
        let dte_deqpp = vd * did_de;
        let dte_dedpp = vq * diq_de;
        let dte_dvd = s * id + vd * did_dvd + c * iq + vq * diq_dvd;
        let dte_dvq = -c * id + vd * did_dvq + s * iq + vq * diq_dvq;
        let v_t = v.0.hypot(v.1);
        let dvt_dvd = v.0 / v_t;
        let dvt_dvq = v.1 / v_t;

        let mut f_x = DMatrix::zeros(SG_STATES, SG_STATES);
        let mut f_v = DMatrix::zeros(SG_STATES, 2);
        let mut f_u = DVector::zeros(SG_STATES);

        f_x[(0, 1)] = omega_s();

        f_x[(1, 0)] = -dte_dd / p.m_s;
        f_x[(1, 1)] = -p.d / p.m_s;
        f_x[(1, 3)] = -dte_deqpp / p.m_s;
        f_x[(1, 5)] = -dte_dedpp / p.m_s;
        f_v[(1, 0)] = -dte_dvd / p.m_s;
        f_v[(1, 1)] = -dte_dvq / p.m_s;

        let kd2 = p.x_d - p.x_d_p;
        f_x[(2, 0)] = -kd2 * did_dd / p.t_do_p;
        f_x[(2, 2)] = -1.0 / p.t_do_p;
        f_x[(2, 3)] = -kd2 * did_de / p.t_do_p;
        f_x[(2, 9)] = 1.0 / p.t_do_p;
        f_v[(2, 0)] = -kd2 * did_dvd / p.t_do_p;
        f_v[(2, 1)] = -kd2 * did_dvq / p.t_do_p;

        let kd3 = p.x_d_p - p.x_d_pp;
        f_x[(3, 0)] = -kd3 * did_dd / p.t_do_pp;
        f_x[(3, 2)] = 1.0 / p.t_do_pp;
        f_x[(3, 3)] = (-1.0 - kd3 * did_de) / p.t_do_pp;
        f_v[(3, 0)] = -kd3 * did_dvd / p.t_do_pp;
        f_v[(3, 1)] = -kd3 * did_dvq / p.t_do_pp;

        let kq4 = p.x_q - p.x_q_p;
        f_x[(4, 0)] = kq4 * diq_dd / p.t_qo_p;
        f_x[(4, 4)] = -1.0 / p.t_qo_p;
        f_x[(4, 5)] = kq4 * diq_de / p.t_qo_p;
        f_v[(4, 0)] = kq4 * diq_dvd / p.t_qo_p;
        f_v[(4, 1)] = kq4 * diq_dvq / p.t_qo_p;

        let kq5 = p.x_q_p - p.x_q_pp;
        f_x[(5, 0)] = kq5 * diq_dd / p.t_qo_pp;
        f_x[(5, 4)] = 1.0 / p.t_qo_pp;
        f_x[(5, 5)] = (-1.0 + kq5 * diq_de) / p.t_qo_pp;
        f_v[(5, 0)] = kq5 * diq_dvd / p.t_qo_pp;
        f_v[(5, 1)] = kq5 * diq_dvq / p.t_qo_pp;

        f_x[(6, 6)] = -1.0 / p.t_r;
        f_v[(6, 0)] = dvt_dvd / p.t_r;
        f_v[(6, 1)] = dvt_dvq / p.t_r;

        f_x[(7, 6)] = -p.pi_ki_v;

        f_x[(8, 6)] = -p.pi_kp_v / p.t_b;
        f_x[(8, 7)] = 1.0 / p.t_b;
        f_x[(8, 8)] = -1.0 / p.t_b;
        f_u[8] = 1.0 / p.t_b;

        let tc_tb = p.t_c / p.t_b;
        let ka = self.ka();
        f_x[(9, 6)] = -ka * tc_tb * p.pi_kp_v / p.t_a;
        f_x[(9, 7)] = ka * tc_tb / p.t_a;
        f_x[(9, 8)] = ka * (1.0 - tc_tb) / p.t_a;
        f_x[(9, 9)] = -1.0 / p.t_a;
        f_u[9] = ka * tc_tb / p.t_a;

        let mut i_x = DMatrix::zeros(2, SG_STATES);
        i_x[(0, 0)] = self.s_scale * (id * c - iq * s + did_dd * s + diq_dd * c);
        i_x[(0, 3)] = self.s_scale * (did_de * s);
        i_x[(0, 5)] = self.s_scale * (diq_de * c);
        i_x[(1, 0)] = self.s_scale * (id * s + iq * c - did_dd * c + diq_dd * s);
        i_x[(1, 3)] = self.s_scale * (-did_de * c);
        i_x[(1, 5)] = self.s_scale * (diq_de * s);

        let mut i_v = DMatrix::zeros(2, 2);
        i_v[(0, 0)] = self.s_scale * (did_dvd * s + diq_dvd * c);
        i_v[(0, 1)] = self.s_scale * (did_dvq * s + diq_dvq * c);
        i_v[(1, 0)] = self.s_scale * (-did_dvd * c + diq_dvd * s);
        i_v[(1, 1)] = self.s_scale * (-did_dvq * c + diq_dvq * s);

        UnitJacobians { f_x, f_v, f_u, i_x, i_v }
    }
}

struct Stator {
    s: f64,
    c: f64,
    vd: f64,
    vq: f64,
    id: f64,
    iq: f64,
}

// ---------------------------------------------------------------------------
// Inverter-based generator
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct IgModel {
    pub params: IgParams,
    pub s_scale: f64,
    /// Filter reactance, pu on the unit base.
    pub x_f: f64,
    /// Filter resistance, pu on the unit base.
    pub r_f: f64,
}

impl IgModel {
    pub fn new(params: &IgParams, bus_v_nom_kv: f64, s_base_mva: f64) -> Self {
        let z_base = bus_v_nom_kv * bus_v_nom_kv / params.s_n_mva;
        IgModel {
            params: params.clone(),
            s_scale: params.s_n_mva / s_base_mva,
            x_f: omega_s() * params.l_f_h / z_base,
            r_f: params.r_f_ohm / z_base,
        }
    }

    /// Rescales the physical filter inductance (polytope vertices).
    pub fn with_lf_scale(mut self, scale: f64) -> Self {
        self.x_f *= scale;
        self
    }

    pub fn steady_state(
        &self,
        unit: &str,
        v: Complex<f64>,
        p_sys: f64,
        q_sys: f64,
    ) -> Result<(DVector<f64>, IgContext)> {
        let v_t = v.norm();
        if v_t < 0.5 {
            return Err(NetModelError::Parameter {
                unit: unit.to_string(),
                msg: format!("terminal voltage {v_t:.3} pu too low for a steady state"),
            });
        }
        let p_u = p_sys / self.s_scale;
        let q_u = q_sys / self.s_scale;
        let c = v.re / v_t;
        let s = v.im / v_t;
        let i_p = p_u / v_t;
        let i_r = q_u / v_t;
        let i_fd = c * i_p + s * i_r;
        let i_fq = s * i_p - c * i_r;
        let e_d = v.re + self.r_f * i_fd - self.x_f * i_fq;
        let e_q = v.im + self.r_f * i_fq + self.x_f * i_fd;
        let e_p = c * e_d + s * e_q;
        let e_r = s * e_d - c * e_q;
        let mut x = DVector::zeros(IG_STATES);
        x[0] = i_fd;
        x[1] = i_fq;
        x[2] = v_t;
        x[3] = i_r;
        x[4] = e_p - v_t;
        x[5] = e_r;
        Ok((
            x,
            IgContext {
                active_current_ref: i_p,
                v_ref: v_t,
            },
        ))
    }

    /// Control algebra common to the derivative and its Jacobians.
    fn control(&self, x: &DVector<f64>, v: (f64, f64), u: f64, ctx: &IgContext) -> IgAlgebra {
        let p = &self.params;
        let v_t = v.0.hypot(v.1);
        let c = v.0 / v_t;
        let s = v.1 / v_t;
        let i_p = c * x[0] + s * x[1];
        let i_r = s * x[0] - c * x[1];
        let e_v = ctx.v_ref - x[2];
        let i_r_ref = p.pi_kp_v * e_v + x[3] + u;
        let err_p = ctx.active_current_ref - i_p;
        let err_r = i_r_ref - i_r;
        let e_p = v_t + p.pi_kp_i * err_p + x[4];
        let e_r = p.pi_kp_i * err_r + x[5];
        let e_d = c * e_p + s * e_r;
        let e_q = s * e_p - c * e_r;
        IgAlgebra {
            v_t,
            c,
            s,
            e_v,
            err_p,
            err_r,
            e_p,
            e_r,
            e_d,
            e_q,
        }
    }

    pub fn derivative(&self, x: &DVector<f64>, v: (f64, f64), u: f64, ctx: &IgContext) -> DVector<f64> {
        let p = &self.params;
        let g = self.control(x, v, u, ctx);
        let k = omega_s() / self.x_f;
        let mut f = DVector::zeros(IG_STATES);
        f[0] = k * (g.e_d - v.0 - self.r_f * x[0]) + omega_s() * x[1];
        f[1] = k * (g.e_q - v.1 - self.r_f * x[1]) - omega_s() * x[0];
        f[2] = (g.v_t - x[2]) / p.t_r;
        f[3] = p.pi_ki_v * g.e_v;
        f[4] = p.pi_ki_i * g.err_p;
        f[5] = p.pi_ki_i * g.err_r;
        f
    }

    pub fn injection(&self, x: &DVector<f64>, _v: (f64, f64)) -> (f64, f64) {
        (self.s_scale * x[0], self.s_scale * x[1])
    }

    pub fn jacobians(&self, x: &DVector<f64>, v: (f64, f64), ctx: &IgContext) -> UnitJacobians {
        let p = &self.params;
        let g = self.control(x, v, 0.0, ctx);
        let IgAlgebra { v_t, c, s, .. } = g;
        let k = omega_s() / self.x_f;

        // State-side partials of the control algebra.
        // err_p/err_r depend on the filter currents through the rotation and
        // on the measurement/integrator states.
        let derrp_dx = [-c, -s, 0.0, 0.0, 0.0, 0.0];
        let derrr_dx = [-s, c, -p.pi_kp_v, 1.0, 0.0, 0.0];
        let mut dep_dx = [0.0; IG_STATES];
        let mut der_dx = [0.0; IG_STATES];
        for i in 0..IG_STATES {
            dep_dx[i] = p.pi_kp_i * derrp_dx[i];
            der_dx[i] = p.pi_kp_i * derrr_dx[i];
        }
        dep_dx[4] += 1.0;
        der_dx[5] += 1.0;

        let mut f_x = DMatrix::zeros(IG_STATES, IG_STATES);
        for i in 0..IG_STATES {
            let ded = c * dep_dx[i] + s * der_dx[i];
            let deq = s * dep_dx[i] - c * der_dx[i];
            f_x[(0, i)] = k * ded;
            f_x[(1, i)] = k * deq;
        }
        f_x[(0, 0)] += -k * self.r_f;
        f_x[(0, 1)] += omega_s();
        f_x[(1, 0)] += -omega_s();
        f_x[(1, 1)] += -k * self.r_f;
        f_x[(2, 2)] = -1.0 / p.t_r;
        f_x[(3, 2)] = -p.pi_ki_v;
        for i in 0..IG_STATES {
            f_x[(4, i)] = p.pi_ki_i * derrp_dx[i];
            f_x[(5, i)] = p.pi_ki_i * derrr_dx[i];
        }

        // Voltage-side partials: v_t, c, s all vary with (v_d, v_q).
        let dvt = [c, s];
        let dc = [s * s / v_t, -c * s / v_t];
        let ds = [-c * s / v_t, c * c / v_t];
        let mut f_v = DMatrix::zeros(IG_STATES, 2);
        for j in 0..2 {
            let dip = x[0] * dc[j] + x[1] * ds[j];
            let dir = x[0] * ds[j] - x[1] * dc[j];
            let derrp = -dip;
            let derrr = -dir;
            let dep = dvt[j] + p.pi_kp_i * derrp;
            let der = p.pi_kp_i * derrr;
            let ded = dc[j] * g.e_p + c * dep + ds[j] * g.e_r + s * der;
            let deq = ds[j] * g.e_p + s * dep - dc[j] * g.e_r - c * der;
            let unit = if j == 0 { (1.0, 0.0) } else { (0.0, 1.0) };
            f_v[(0, j)] = k * (ded - unit.0);
            f_v[(1, j)] = k * (deq - unit.1);
            f_v[(2, j)] = dvt[j] / p.t_r;
            f_v[(4, j)] = p.pi_ki_i * derrp;
            f_v[(5, j)] = p.pi_ki_i * derrr;
        }

        let mut f_u = DVector::zeros(IG_STATES);
        f_u[0] = k * s * p.pi_kp_i;
        f_u[1] = k * (-c) * p.pi_kp_i;
        f_u[5] = p.pi_ki_i;

        let mut i_x = DMatrix::zeros(2, IG_STATES);
        i_x[(0, 0)] = self.s_scale;
        i_x[(1, 1)] = self.s_scale;
        let i_v = DMatrix::zeros(2, 2);

        UnitJacobians { f_x, f_v, f_u, i_x, i_v }
    }
}

struct IgAlgebra {
    v_t: f64,
    c: f64,
    s: f64,
    e_v: f64,
    err_p: f64,
    err_r: f64,
    e_p: f64,
    e_r: f64,
    e_d: f64,
    e_q: f64,
}

#[cfg(test)]
pub(crate) mod test_params {
    use super::*;

    pub fn sg_params() -> SgParams {
        SgParams {
            s_n_mva: 0.6,
            v_n_kv: 2.4,
            m_s: 0.5,
            d: 0.1,
            x_d: 2.24,
            x_d_p: 0.17,
            x_d_pp: 0.12,
            x_q: 1.1,
            x_q_p: 0.2,
            x_q_pp: 0.1,
            t_do_p: 4.5,
            t_do_pp: 0.03,
            t_qo_p: 0.9,
            t_qo_pp: 0.1,
            t_a: 0.02,
            t_b: 5.0,
            t_c: 1.0,
            t_r: 0.05,
            k_a: 200.0,
            pi_kp_v: 2.0,
            pi_ki_v: 4.0,
        }
    }

    pub fn ig_params() -> IgParams {
        IgParams {
            s_n_mva: 0.2,
            v_dc_v: 380.0,
            l_f_h: 0.08,
            r_f_ohm: 0.91,
            t_r: 0.05,
            pi_kp_v: 1.0,
            pi_ki_v: 2.0,
            pi_kp_i: 20.0,
            pi_ki_i: 30.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::test_params::*;
    use super::*;
    use approx::assert_relative_eq;

    fn fd_check(
        n: usize,
        f: &dyn Fn(&DVector<f64>, (f64, f64), f64) -> DVector<f64>,
        x0: &DVector<f64>,
        v0: (f64, f64),
        jac_x: &DMatrix<f64>,
        jac_v: &DMatrix<f64>,
        jac_u: &DVector<f64>,
    ) {
        let h = 1e-6;
        for k in 0..n {
            let mut xp = x0.clone();
            let mut xm = x0.clone();
            xp[k] += h;
            xm[k] -= h;
            let col = (f(&xp, v0, 0.0) - f(&xm, v0, 0.0)) / (2.0 * h);
            for i in 0..jac_x.nrows() {
                assert_relative_eq!(
                    jac_x[(i, k)],
                    col[i],
                    max_relative = 1e-5,
                    epsilon = 1e-7
                );
            }
        }
        for (k, dv) in [((v0.0 + h, v0.1), (v0.0 - h, v0.1)), ((v0.0, v0.1 + h), (v0.0, v0.1 - h))]
            .iter()
            .enumerate()
        {
            let col = (f(x0, dv.0, 0.0) - f(x0, dv.1, 0.0)) / (2.0 * h);
            for i in 0..jac_v.nrows() {
                assert_relative_eq!(
                    jac_v[(i, k)],
                    col[i],
                    max_relative = 1e-5,
                    epsilon = 1e-7
                );
            }
        }
        let col = (f(x0, v0, h) - f(x0, v0, -h)) / (2.0 * h);
        for i in 0..jac_u.len() {
            assert_relative_eq!(jac_u[i], col[i], max_relative = 1e-5, epsilon = 1e-9);
        }
    }

    #[test]
    fn sg_steady_state_has_zero_derivative() {
        let m = SgModel::new(&sg_params(), 1.0);
        let v = Complex::new(1.01, 0.05);
        let (x0, ctx) = m.steady_state("sg", v, 0.3, 0.12).unwrap();
        let f = m.derivative(&x0, (v.re, v.im), 0.0, &ctx);
        assert!(f.amax() < 1e-10, "residual {:.3e}", f.amax());
        // Injection reproduces the dispatched power: S = v * conj(i).
        let (i_d, i_q) = m.injection(&x0, (v.re, v.im));
        let s = Complex::new(v.re, v.im) * Complex::new(i_d, i_q).conj();
        assert_relative_eq!(s.re, 0.3, epsilon = 1e-10);
        assert_relative_eq!(s.im, 0.12, epsilon = 1e-10);
    }

    #[test]
    fn ig_steady_state_has_zero_derivative() {
        let m = IgModel::new(&ig_params(), 4.8, 1.0);
        let v = Complex::new(0.99, -0.03);
        let (x0, ctx) = m.steady_state("ig", v, 0.15, 0.05).unwrap();
        let f = m.derivative(&x0, (v.re, v.im), 0.0, &ctx);
        assert!(f.amax() < 1e-10, "residual {:.3e}", f.amax());
        let (i_d, i_q) = m.injection(&x0, (v.re, v.im));
        let s = Complex::new(v.re, v.im) * Complex::new(i_d, i_q).conj();
        assert_relative_eq!(s.re, 0.15, epsilon = 1e-10);
        assert_relative_eq!(s.im, 0.05, epsilon = 1e-10);
    }

    #[test]
    fn sg_jacobians_match_finite_differences() {
        let m = SgModel::new(&sg_params(), 1.0);
        let v = Complex::new(1.0, 0.08);
        let (x0, ctx) = m.steady_state("sg", v, 0.35, 0.1).unwrap();
        let jac = m.jacobians(&x0, (v.re, v.im), &ctx);
        fd_check(
            SG_STATES,
            &|x, vv, u| m.derivative(x, vv, u, &ctx),
            &x0,
            (v.re, v.im),
            &jac.f_x,
            &jac.f_v,
            &jac.f_u,
        );
        // Injection Jacobians.
        let inj = |x: &DVector<f64>, vv: (f64, f64), _u: f64| {
            let (a, b) = m.injection(x, vv);
            DVector::from_vec(vec![a, b])
        };
        fd_check(
            SG_STATES,
            &inj,
            &x0,
            (v.re, v.im),
            &jac.i_x,
            &jac.i_v,
            &DVector::zeros(2),
        );
    }

    #[test]
    fn ig_jacobians_match_finite_differences() {
        let m = IgModel::new(&ig_params(), 4.8, 1.0);
        let v = Complex::new(0.97, 0.04);
        let (x0, ctx) = m.steady_state("ig", v, 0.12, -0.02).unwrap();
        let jac = m.jacobians(&x0, (v.re, v.im), &ctx);
        fd_check(
            IG_STATES,
            &|x, vv, u| m.derivative(x, vv, u, &ctx),
            &x0,
            (v.re, v.im),
            &jac.f_x,
            &jac.f_v,
            &jac.f_u,
        );
        let inj = |x: &DVector<f64>, vv: (f64, f64), _u: f64| {
            let (a, b) = m.injection(x, vv);
            DVector::from_vec(vec![a, b])
        };
        fd_check(
            IG_STATES,
            &inj,
            &x0,
            (v.re, v.im),
            &jac.i_x,
            &jac.i_v,
            &DVector::zeros(2),
        );
    }

    #[test]
    fn ig_open_loop_filter_poles() {
        // All PI gains zero: the current sub-block of the state Jacobian is
        // the RL filter with synchronous-frame coupling, eigenvalues
        // -R_f/L_f +/- j w_s.
        let mut p = ig_params();
        p.pi_kp_v = 0.0;
        p.pi_ki_v = 0.0;
        p.pi_kp_i = 0.0;
        p.pi_ki_i = 0.0;
        let m = IgModel::new(&p, 4.8, 1.0);
        let v = Complex::new(1.0, 0.0);
        let (x0, ctx) = m.steady_state("ig", v, 0.0, 0.0).unwrap();
        let jac = m.jacobians(&x0, (v.re, v.im), &ctx);
        let block = jac.f_x.view((0, 0), (2, 2)).clone_owned();
        let eigs = crate::linalg::eigenvalues(&block);
        let expected_re = -p.r_f_ohm / p.l_f_h;
        for e in &eigs {
            assert_relative_eq!(e.re, expected_re, max_relative = 1e-9);
            assert_relative_eq!(e.im.abs(), omega_s(), max_relative = 1e-9);
        }
    }

    #[test]
    fn two_identical_sgs_have_identical_blocks() {
        let m1 = SgModel::new(&sg_params(), 1.0);
        let m2 = SgModel::new(&sg_params(), 1.0);
        let v = Complex::new(1.0, 0.02);
        let (x1, c1) = m1.steady_state("a", v, 0.3, 0.1).unwrap();
        let (x2, c2) = m2.steady_state("b", v, 0.3, 0.1).unwrap();
        let j1 = m1.jacobians(&x1, (v.re, v.im), &c1);
        let j2 = m2.jacobians(&x2, (v.re, v.im), &c2);
        assert_eq!(j1.f_x, j2.f_x);
        assert_eq!(j1.f_v, j2.f_v);
    }
}
