//! Steady-state solution of the nonlinear injection equations.
//!
//! Newton iteration on polar power mismatches: generator buses hold voltage
//! magnitude (their PI voltage loops pin the terminal in steady state), load
//! buses are PQ with ZIP voltage dependence, the slack bus is the
//! substation at 1 per unit, zero angle.

use super::admittance::{energized_buses, stamp_complex};
use super::dg::{IgModel, SgContext, SgModel};
use super::types::{NetModelError, NetworkDescription, Result};
use crate::linalg::{CMatrix, CVector};
use crate::netmodel::dg::IgContext;
use nalgebra::{Complex, DMatrix, DVector};
use std::collections::BTreeMap;

pub const PF_TOL: f64 = 1e-10;
pub const PF_MAX_ITER: usize = 50;

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct DgSetpoint {
    pub p_mw: f64,
    pub v_pu: f64,
}

pub type DgSetpoints = BTreeMap<String, DgSetpoint>;

impl NetworkDescription {
    /// Setpoints as declared on the unit records.
    pub fn default_setpoints(&self) -> DgSetpoints {
        let mut m = BTreeMap::new();
        for u in &self.sg_units {
            m.insert(
                u.id.clone(),
                DgSetpoint {
                    p_mw: u.p_set_mw,
                    v_pu: u.v_set_pu,
                },
            );
        }
        for u in &self.ig_units {
            m.insert(
                u.id.clone(),
                DgSetpoint {
                    p_mw: u.p_set_mw,
                    v_pu: u.v_set_pu,
                },
            );
        }
        m
    }
}

/// Internal steady state of a generator unit.
#[derive(Debug, Clone)]
pub enum DgSteady {
    Sg { x: DVector<f64>, ctx: SgContext },
    Ig { x: DVector<f64>, ctx: IgContext },
}

impl DgSteady {
    pub fn state(&self) -> &DVector<f64> {
        match self {
            DgSteady::Sg { x, .. } => x,
            DgSteady::Ig { x, .. } => x,
        }
    }
}

/// A converged operating point on the energized bus set.
#[derive(Debug, Clone)]
pub struct OperatingPoint {
    /// Energized buses (network indices, ascending; slack included).
    pub frame_buses: Vec<usize>,
    /// Complex bus voltages over the frame.
    pub v0: CVector,
    /// Device-side complex injection currents over the frame.
    pub i0: CVector,
    /// Internal steady states per generator unit.
    pub dg_states: BTreeMap<String, DgSteady>,
    /// Solved (P, Q) injection per generator unit, system pu.
    pub dg_pq: BTreeMap<String, (f64, f64)>,
    /// Final current-balance residual, infinity norm.
    pub residual: f64,
}

impl OperatingPoint {
    pub fn frame_pos(&self, bus: usize) -> Option<usize> {
        self.frame_buses.iter().position(|&b| b == bus)
    }

    pub fn v_at(&self, bus: usize) -> Option<Complex<f64>> {
        self.frame_pos(bus).map(|p| self.v0[p])
    }

    /// Interleaved dq voltage vector over the frame.
    pub fn v0_dq(&self) -> DVector<f64> {
        crate::linalg::dq_expand_vec(&self.v0)
    }
}

struct BusRole {
    /// Frame position of the slack bus.
    slack: usize,
    /// Frame positions of generator buses (voltage held).
    pv: Vec<usize>,
    /// Remaining frame positions.
    pq: Vec<usize>,
}

/// Solves the steady state of one switch configuration.
pub fn solve_steady_state(
    network: &NetworkDescription,
    switch_states: &BTreeMap<String, bool>,
    setpoints: &DgSetpoints,
) -> Result<OperatingPoint> {
    network.validate()?;
    let energized = energized_buses(network, switch_states)?;
    let frame: Vec<usize> = energized.iter().copied().collect();
    let pos: BTreeMap<usize, usize> = frame.iter().enumerate().map(|(p, &b)| (b, p)).collect();
    let n = frame.len();
    let s_base = network.s_base_mva;

    // Generators must sit on energized buses.
    let mut dead_dgs = Vec::new();
    let mut gen_p = vec![0.0f64; n];
    let mut vset = vec![1.0f64; n];
    let mut is_pv = vec![false; n];
    for (id, bus) in network
        .sg_units
        .iter()
        .map(|u| (&u.id, &u.bus))
        .chain(network.ig_units.iter().map(|u| (&u.id, &u.bus)))
    {
        let bidx = network.bus_index(bus).unwrap();
        match pos.get(&bidx) {
            Some(&p) => {
                let sp = setpoints.get(id).ok_or_else(|| {
                    NetModelError::Validation(format!("missing setpoint for unit {id:?}"))
                })?;
                gen_p[p] += sp.p_mw / s_base;
                vset[p] = sp.v_pu;
                is_pv[p] = true;
            }
            None => dead_dgs.push(bus.clone()),
        }
    }
    if !dead_dgs.is_empty() {
        return Err(NetModelError::Configuration {
            msg: "generator units sit in a de-energized island".into(),
            island: dead_dgs,
        });
    }

    // Loads on energized buses.
    let loads: Vec<(usize, &super::types::LoadUnit)> = network
        .loads
        .iter()
        .filter_map(|ld| {
            let bidx = network.bus_index(&ld.bus).unwrap();
            pos.get(&bidx).map(|&p| (p, ld))
        })
        .collect();

    let y = stamp_complex(network, switch_states, &frame)?;
    let slack_pos = pos[&network.slack_index()];
    let role = BusRole {
        slack: slack_pos,
        pv: (0..n).filter(|&p| p != slack_pos && is_pv[p]).collect(),
        pq: (0..n).filter(|&p| p != slack_pos && !is_pv[p]).collect(),
    };

    let v = newton_polar(&y, &role, &gen_p, &vset, &loads, s_base)?;

    // Device-side injections and residual.
    let mut i0 = CVector::zeros(n);
    let mut dg_pq = BTreeMap::new();
    let mut dg_states = BTreeMap::new();
    for (p, ld) in &loads {
        i0[*p] += ld.zip.injection_current(v[*p], s_base);
    }
    let ynet = &y * &v;
    for u in &network.sg_units {
        let p = pos[&network.bus_index(&u.bus).unwrap()];
        let vb = v[p];
        let p_sys = setpoints[&u.id].p_mw / s_base;
        // Reactive output balances the bus: Q_dg = Q_network + Q_load.
        let s_net = vb * ynet[p].conj();
        let mut q_sys = s_net.im;
        for (lp, ld) in &loads {
            if lp == &p {
                q_sys += ld.zip.power_at(vb.norm(), s_base).1;
            }
        }
        let model = SgModel::new(&u.params, s_base);
        let (x, ctx) = model.steady_state(&u.id, vb, p_sys, q_sys)?;
        let (ind, inq) = model.injection(&x, (vb.re, vb.im));
        i0[p] += Complex::new(ind, inq);
        dg_pq.insert(u.id.clone(), (p_sys, q_sys));
        dg_states.insert(u.id.clone(), DgSteady::Sg { x, ctx });
    }
    for u in &network.ig_units {
        let p = pos[&network.bus_index(&u.bus).unwrap()];
        let vb = v[p];
        let p_sys = setpoints[&u.id].p_mw / s_base;
        let s_net = vb * ynet[p].conj();
        let mut q_sys = s_net.im;
        for (lp, ld) in &loads {
            if lp == &p {
                q_sys += ld.zip.power_at(vb.norm(), s_base).1;
            }
        }
        let bus_kv = network.buses[network.bus_index(&u.bus).unwrap()].v_nom_kv;
        let model = IgModel::new(&u.params, bus_kv, s_base);
        let (x, ctx) = model.steady_state(&u.id, vb, p_sys, q_sys)?;
        let (ind, inq) = model.injection(&x, (vb.re, vb.im));
        i0[p] += Complex::new(ind, inq);
        dg_pq.insert(u.id.clone(), (p_sys, q_sys));
        dg_states.insert(u.id.clone(), DgSteady::Ig { x, ctx });
    }
    // The substation supplies the remainder at the slack bus.
    i0[slack_pos] = ynet[slack_pos];

    let residual = (&i0 - &ynet).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if residual > 1e-8 {
        return Err(NetModelError::PowerFlow {
            iterations: PF_MAX_ITER,
            residual,
        });
    }

    Ok(OperatingPoint {
        frame_buses: frame,
        v0: v,
        i0,
        dg_states,
        dg_pq,
        residual,
    })
}

fn newton_polar(
    y: &CMatrix,
    role: &BusRole,
    gen_p: &[f64],
    vset: &[f64],
    loads: &[(usize, &super::types::LoadUnit)],
    s_base: f64,
) -> Result<CVector> {
    let n = y.nrows();
    let mut vm = vec![1.0f64; n];
    let mut th = vec![0.0f64; n];
    vm[role.slack] = 1.0;
    for &p in &role.pv {
        vm[p] = vset[p];
    }

    let n_th = role.pv.len() + role.pq.len();
    let n_v = role.pq.len();
    let th_vars: Vec<usize> = role.pv.iter().chain(role.pq.iter()).copied().collect();
    let v_vars: Vec<usize> = role.pq.clone();

    let g = y.map(|z| z.re);
    let b = y.map(|z| z.im);

    let mut last_norm = f64::INFINITY;
    for _iter in 0..PF_MAX_ITER {
        // Network injections.
        let mut p_net = vec![0.0f64; n];
        let mut q_net = vec![0.0f64; n];
        for i in 0..n {
            for j in 0..n {
                let tij = th[i] - th[j];
                let (sin, cos) = tij.sin_cos();
                p_net[i] += vm[i] * vm[j] * (g[(i, j)] * cos + b[(i, j)] * sin);
                q_net[i] += vm[i] * vm[j] * (g[(i, j)] * sin - b[(i, j)] * cos);
            }
        }
        // Specified injections with ZIP voltage dependence.
        let mut p_spec = gen_p.to_vec();
        let mut q_spec = vec![0.0f64; n];
        let mut dp_dv = vec![0.0f64; n];
        let mut dq_dv = vec![0.0f64; n];
        for (pidx, ld) in loads {
            let (pl, ql) = ld.zip.power_at(vm[*pidx], s_base);
            p_spec[*pidx] -= pl;
            q_spec[*pidx] -= ql;
            let p0 = ld.zip.p_mw / s_base;
            let q0 = ld.zip.q_mvar / s_base;
            dp_dv[*pidx] -= p0 * (2.0 * ld.zip.p_z * vm[*pidx] + ld.zip.p_i);
            dq_dv[*pidx] -= q0 * (2.0 * ld.zip.q_z * vm[*pidx] + ld.zip.q_i);
        }

        let mut f = DVector::zeros(n_th + n_v);
        for (k, &i) in th_vars.iter().enumerate() {
            f[k] = p_spec[i] - p_net[i];
        }
        for (k, &i) in v_vars.iter().enumerate() {
            f[n_th + k] = q_spec[i] - q_net[i];
        }
        let fnorm = f.amax();
        if fnorm < PF_TOL {
            let v = CVector::from_iterator(
                n,
                (0..n).map(|i| Complex::from_polar(vm[i], th[i])),
            );
            return Ok(v);
        }
        last_norm = fnorm;

        // Jacobian of the mismatch: d(spec - net).
        let mut jac = DMatrix::zeros(n_th + n_v, n_th + n_v);
        for (r, &i) in th_vars.iter().enumerate() {
            for (cc, &j) in th_vars.iter().enumerate() {
                let d = if i == j {
                    -q_net[i] - b[(i, i)] * vm[i] * vm[i]
                } else {
                    let tij = th[i] - th[j];
                    let (sin, cos) = tij.sin_cos();
                    vm[i] * vm[j] * (g[(i, j)] * sin - b[(i, j)] * cos)
                };
                jac[(r, cc)] = -d;
            }
            for (cc, &j) in v_vars.iter().enumerate() {
                let d = if i == j {
                    p_net[i] / vm[i] + g[(i, i)] * vm[i]
                } else {
                    let tij = th[i] - th[j];
                    let (sin, cos) = tij.sin_cos();
                    vm[i] * (g[(i, j)] * cos + b[(i, j)] * sin)
                };
                // Mismatch derivative includes the load slope on the diagonal.
                let extra = if i == j { dp_dv[i] } else { 0.0 };
                jac[(r, n_th + cc)] = extra - d;
            }
        }
        for (r, &i) in v_vars.iter().enumerate() {
            for (cc, &j) in th_vars.iter().enumerate() {
                let d = if i == j {
                    p_net[i] - g[(i, i)] * vm[i] * vm[i]
                } else {
                    let tij = th[i] - th[j];
                    let (sin, cos) = tij.sin_cos();
                    -vm[i] * vm[j] * (g[(i, j)] * cos + b[(i, j)] * sin)
                };
                jac[(n_th + r, cc)] = -d;
            }
            for (cc, &j) in v_vars.iter().enumerate() {
                let d = if i == j {
                    q_net[i] / vm[i] - b[(i, i)] * vm[i]
                } else {
                    let tij = th[i] - th[j];
                    let (sin, cos) = tij.sin_cos();
                    vm[i] * (g[(i, j)] * sin - b[(i, j)] * cos)
                };
                let extra = if i == j { dq_dv[i] } else { 0.0 };
                jac[(n_th + r, n_th + cc)] = extra - d;
            }
        }

        let step = jac.lu().solve(&f).ok_or(NetModelError::PowerFlow {
            iterations: PF_MAX_ITER,
            residual: fnorm,
        })?;
        // F(x) + J dx = 0 with J = dF/dx; we built jac = dF/dx directly.
        for (k, &i) in th_vars.iter().enumerate() {
            th[i] -= step[k];
        }
        for (k, &i) in v_vars.iter().enumerate() {
            vm[i] -= step[n_th + k];
        }
    }
    Err(NetModelError::PowerFlow {
        iterations: PF_MAX_ITER,
        residual: last_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::types::{Bus, Line, LoadUnit, NetworkDescription, ZipLoad};
    use approx::assert_relative_eq;

    fn bare(buses: usize) -> NetworkDescription {
        NetworkDescription {
            s_base_mva: 1.0,
            buses: (1..=buses)
                .map(|i| Bus {
                    id: format!("b{i}"),
                    v_nom_kv: 4.8,
                })
                .collect(),
            lines: (1..buses)
                .map(|i| Line {
                    id: format!("l{i}"),
                    from: format!("b{i}"),
                    to: format!("b{}", i + 1),
                    r_pu: 0.02,
                    x_pu: 0.05,
                    b_shunt_pu: 0.0,
                })
                .collect(),
            switches: vec![],
            sg_units: vec![],
            ig_units: vec![],
            loads: vec![],
            slack: "b1".into(),
        }
    }

    #[test]
    fn no_load_flat_start() {
        let n = bare(2);
        let op = solve_steady_state(&n, &BTreeMap::new(), &BTreeMap::new()).unwrap();
        for v in op.v0.iter() {
            assert_relative_eq!(v.re, 1.0, epsilon = 1e-12);
            assert_relative_eq!(v.im, 0.0, epsilon = 1e-12);
        }
        assert!(op.i0.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn three_bus_zip_residual() {
        let mut n = bare(3);
        n.loads.push(LoadUnit {
            id: "ld3".into(),
            bus: "b3".into(),
            zip: ZipLoad::from_weights(0.3, 0.1, [1.5, -2.3, 1.8], [7.4, -12.0, 5.6]).unwrap(),
        });
        let op = solve_steady_state(&n, &BTreeMap::new(), &BTreeMap::new()).unwrap();
        // Direct substitution: device injections vs network currents.
        assert!(op.residual < 1e-10, "residual {:.2e}", op.residual);
        assert!(op.v0[2].norm() < 1.0);
    }

    #[test]
    fn doubling_load_weakly_decreases_voltages() {
        let mut n = bare(3);
        n.loads.push(LoadUnit {
            id: "ld3".into(),
            bus: "b3".into(),
            zip: ZipLoad::from_weights(0.2, 0.08, [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]).unwrap(),
        });
        let op1 = solve_steady_state(&n, &BTreeMap::new(), &BTreeMap::new()).unwrap();
        n.loads[0].zip.p_mw *= 2.0;
        n.loads[0].zip.q_mvar *= 2.0;
        let op2 = solve_steady_state(&n, &BTreeMap::new(), &BTreeMap::new()).unwrap();
        for i in 0..3 {
            assert!(op2.v0[i].norm() <= op1.v0[i].norm() + 1e-9);
        }
    }
}
