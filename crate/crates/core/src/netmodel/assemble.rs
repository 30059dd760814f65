//! Aggregation of unit linearizations and closure through the algebraic
//! network into the switchable state-space model.

use super::admittance::{energized_buses, AdmittancePair};
use super::dg::{IgModel, SgModel, IG_STATE_NAMES, IG_VMEAS, SG_STATE_NAMES, SG_VMEAS};
use super::powerflow::{DgSetpoints, OperatingPoint};
use super::types::{NetModelError, NetworkDescription, Result};
use super::zip::zip_load_jacobian;
use crate::linalg;
use nalgebra::{Complex, DMatrix, DVector};
use std::collections::{BTreeMap, BTreeSet};

/// One state of the aggregated model: which unit it belongs to and what it is.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateLabel {
    pub unit: String,
    pub state: &'static str,
}

/// Parameter scalings used by the uncertainty polytope vertices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamScales {
    /// Exciter amplifier gains of all synchronous units.
    pub ka: f64,
    /// Filter inductances of all inverter units.
    pub lf: f64,
    /// Ratings of the loads energized or de-energized by the event.
    pub sr: f64,
}

impl Default for ParamScales {
    fn default() -> Self {
        ParamScales {
            ka: 1.0,
            lf: 1.0,
            sr: 1.0,
        }
    }
}

/// Block-aggregated linearization of all generator units over a bus frame.
///
/// The bus frame is the ordered list of model buses (slack excluded);
/// voltage-coupled matrices use interleaved dq coordinates over it.
#[derive(Debug, Clone)]
pub struct DgLinearization {
    pub a_x: DMatrix<f64>,
    pub b_v: DMatrix<f64>,
    pub c_x: DMatrix<f64>,
    pub d_v: DMatrix<f64>,
    pub b_u: DMatrix<f64>,
    pub labels: Vec<StateLabel>,
    /// Channel ids, synchronous units first.
    pub channel_ids: Vec<String>,
    /// State index of each channel's measured-voltage state.
    pub vmeas_rows: Vec<usize>,
    /// Frame position of each channel's bus.
    pub channel_bus_pos: Vec<usize>,
    /// Injection current of each channel at the operating point, system pu.
    pub channel_i0: Vec<Complex<f64>>,
}

/// The switchable network model: plant matrices plus the algebraic output
/// maps the simulator needs to reconstruct bus voltages and unit powers.
#[derive(Debug, Clone)]
pub struct DnStateSpace {
    pub a_dn: DMatrix<f64>,
    pub b_dg: DMatrix<f64>,
    pub b_nr: DVector<f64>,
    pub c_dg: DMatrix<f64>,
    pub state_labels: Vec<StateLabel>,
    pub output_labels: Vec<String>,
    /// Model buses (network indices; slack excluded), matching the dq frame.
    pub frame_buses: Vec<usize>,
    /// dq bus-voltage deviation map: dV = bus_v_x * dX + bus_v_u * u.
    pub bus_v_x: DMatrix<f64>,
    pub bus_v_u: DVector<f64>,
    /// Inverse of the network closure matrix (bus response to injections).
    pub z_net: DMatrix<f64>,
    /// Aggregated unit output/feedthrough maps: dI = c_x dX - d_v dV.
    pub c_x: DMatrix<f64>,
    pub d_v: DMatrix<f64>,
    /// `B_V Z`: state response to extra bus current injections.
    pub b_v_z: DMatrix<f64>,
    /// Frame position of each channel's bus.
    pub channel_bus_pos: Vec<usize>,
    /// Operating-point injection current per channel, system pu.
    pub channel_i0: Vec<(f64, f64)>,
    /// Operating-point dq voltage per frame bus (zero for buses energized
    /// only after the event).
    pub v0_frame: Vec<(f64, f64)>,
}

impl DnStateSpace {
    pub fn n_states(&self) -> usize {
        self.a_dn.nrows()
    }

    pub fn n_channels(&self) -> usize {
        self.c_dg.nrows()
    }
}

/// Linearizes every generator unit at the operating point, block-diagonally,
/// over the given bus frame.
pub fn linearize_dgs(
    network: &NetworkDescription,
    op: &OperatingPoint,
    frame_buses: &[usize],
    scales: &ParamScales,
) -> Result<DgLinearization> {
    struct UnitBlock {
        id: String,
        f_x: DMatrix<f64>,
        f_v: DMatrix<f64>,
        f_u: DVector<f64>,
        i_x: DMatrix<f64>,
        i_v: DMatrix<f64>,
        bus_pos: usize,
        vmeas: usize,
        names: &'static [&'static str],
        i0: Complex<f64>,
    }

    let pos: BTreeMap<usize, usize> = frame_buses
        .iter()
        .enumerate()
        .map(|(p, &b)| (b, p))
        .collect();
    let n_fr = frame_buses.len();

    let mut blocks: Vec<UnitBlock> = Vec::new();

    for u in &network.sg_units {
        let bidx = network.bus_index(&u.bus).unwrap();
        let v = op.v_at(bidx).ok_or_else(|| NetModelError::Configuration {
            msg: format!("unit {:?} is not on an energized bus", u.id),
            island: vec![u.bus.clone()],
        })?;
        let (p_sys, q_sys) = op.dg_pq[&u.id];
        let mut model = SgModel::new(&u.params, network.s_base_mva);
        model.ka_scale = scales.ka;
        let (x0, ctx) = model.steady_state(&u.id, v, p_sys, q_sys)?;
        let jac = model.jacobians(&x0, (v.re, v.im), &ctx);
        let (i_d, i_q) = model.injection(&x0, (v.re, v.im));
        blocks.push(UnitBlock {
            id: u.id.clone(),
            f_x: jac.f_x,
            f_v: jac.f_v,
            f_u: jac.f_u,
            i_x: jac.i_x,
            i_v: jac.i_v,
            bus_pos: pos[&bidx],
            vmeas: SG_VMEAS,
            names: &SG_STATE_NAMES,
            i0: Complex::new(i_d, i_q),
        });
    }
    for u in &network.ig_units {
        let bidx = network.bus_index(&u.bus).unwrap();
        let v = op.v_at(bidx).ok_or_else(|| NetModelError::Configuration {
            msg: format!("unit {:?} is not on an energized bus", u.id),
            island: vec![u.bus.clone()],
        })?;
        let (p_sys, q_sys) = op.dg_pq[&u.id];
        let bus_kv = network.buses[bidx].v_nom_kv;
        let model =
            IgModel::new(&u.params, bus_kv, network.s_base_mva).with_lf_scale(scales.lf);
        let (x0, ctx) = model.steady_state(&u.id, v, p_sys, q_sys)?;
        let jac = model.jacobians(&x0, (v.re, v.im), &ctx);
        let (i_d, i_q) = model.injection(&x0, (v.re, v.im));
        blocks.push(UnitBlock {
            id: u.id.clone(),
            f_x: jac.f_x,
            f_v: jac.f_v,
            f_u: jac.f_u,
            i_x: jac.i_x,
            i_v: jac.i_v,
            bus_pos: pos[&bidx],
            vmeas: IG_VMEAS,
            names: &IG_STATE_NAMES,
            i0: Complex::new(i_d, i_q),
        });
    }

    let n: usize = blocks.iter().map(|b| b.f_x.nrows()).sum();
    let m = blocks.len();
    let mut a_x = DMatrix::zeros(n, n);
    let mut b_v = DMatrix::zeros(n, 2 * n_fr);
    let mut c_x = DMatrix::zeros(2 * n_fr, n);
    let mut d_v = DMatrix::zeros(2 * n_fr, 2 * n_fr);
    let mut b_u = DMatrix::zeros(n, m);
    let mut labels = Vec::with_capacity(n);
    let mut channel_ids = Vec::with_capacity(m);
    let mut vmeas_rows = Vec::with_capacity(m);
    let mut channel_bus_pos = Vec::with_capacity(m);
    let mut channel_i0 = Vec::with_capacity(m);

    let mut row = 0usize;
    for (ch, blk) in blocks.into_iter().enumerate() {
        let nu = blk.f_x.nrows();
        a_x.view_mut((row, row), (nu, nu)).copy_from(&blk.f_x);
        for r in 0..nu {
            for c in 0..2 {
                b_v[(row + r, 2 * blk.bus_pos + c)] = blk.f_v[(r, c)];
            }
            b_u[(row + r, ch)] = blk.f_u[r];
        }
        for r in 0..2 {
            for c in 0..nu {
                c_x[(2 * blk.bus_pos + r, row + c)] = blk.i_x[(r, c)];
            }
            for c in 0..2 {
                // D_V is minus the injection sensitivity: dI = C_X dX - D_V dV.
                d_v[(2 * blk.bus_pos + r, 2 * blk.bus_pos + c)] += -blk.i_v[(r, c)];
            }
        }
        for name in blk.names.iter() {
            labels.push(StateLabel {
                unit: blk.id.clone(),
                state: name,
            });
        }
        vmeas_rows.push(row + blk.vmeas);
        channel_bus_pos.push(blk.bus_pos);
        channel_ids.push(blk.id);
        channel_i0.push(blk.i0);
        row += nu;
    }

    Ok(DgLinearization {
        a_x,
        b_v,
        c_x,
        d_v,
        b_u,
        labels,
        channel_ids,
        vmeas_rows,
        channel_bus_pos,
        channel_i0,
    })
}

/// Closes the unit dynamics through the algebraic network.
///
/// `pair` must be built on the model frame plus the slack bus; the slack is
/// eliminated as an ideal source (its voltage deviation is zero), which
/// reduces all network matrices to the model frame.
pub fn assemble_dn_model(
    lin: &DgLinearization,
    d_l: &DMatrix<f64>,
    pair: &AdmittancePair,
    op: &OperatingPoint,
    slack_bus: usize,
) -> Result<DnStateSpace> {
    let frame_buses: Vec<usize> = pair
        .frame_buses
        .iter()
        .copied()
        .filter(|&b| b != slack_bus)
        .collect();
    let n_fr = frame_buses.len();
    let n = lin.a_x.nrows();
    let m = lin.channel_ids.len();
    if lin.b_v.ncols() != 2 * n_fr || d_l.nrows() != 2 * n_fr {
        return Err(NetModelError::Model {
            msg: format!(
                "dimension mismatch: linearization frame {} vs admittance frame {}",
                lin.b_v.ncols() / 2,
                n_fr
            ),
        });
    }

    // dq row/col selector for the non-slack frame inside the pair frame.
    let keep: Vec<usize> = pair
        .frame_buses
        .iter()
        .enumerate()
        .filter(|&(_, &b)| b != slack_bus)
        .flat_map(|(p, _)| [2 * p, 2 * p + 1])
        .collect();
    let y_after_rr = pair.y_after_dq.select_rows(&keep).select_columns(&keep);

    // Step current: delta-Y times the pre-event voltage, full frame columns
    // (newly energized buses hold zero pre-event voltage).
    let v0_full: DVector<f64> = {
        let mut v = DVector::zeros(2 * pair.frame_buses.len());
        for (p, &b) in pair.frame_buses.iter().enumerate() {
            if let Some(vb) = op.v_at(b) {
                v[2 * p] = vb.re;
                v[2 * p + 1] = vb.im;
            }
        }
        v
    };
    let di_t_full = &pair.delta_dq * &v0_full;
    let di_t = DVector::from_iterator(keep.len(), keep.iter().map(|&k| di_t_full[k]));

    let closure = &y_after_rr + &lin.d_v - d_l;
    let svd = closure.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 0.0 || smax / smin > 1e12 {
        return Err(NetModelError::Model {
            msg: format!(
                "singular network closure matrix (condition estimate {:.3e})",
                if smin > 0.0 { smax / smin } else { f64::INFINITY }
            ),
        });
    }
    let lu = closure.lu();
    let z_net = lu
        .solve(&DMatrix::identity(2 * n_fr, 2 * n_fr))
        .ok_or_else(|| NetModelError::Model {
            msg: "network closure solve failed".into(),
        })?;
    let z_cx = &z_net * &lin.c_x;
    let z_dit = &z_net * &di_t;

    let a_dn = &lin.a_x + &lin.b_v * &z_cx;
    let b_v_z = &lin.b_v * &z_net;
    let b_nr = -(&lin.b_v * &z_dit);
    let mut c_dg = DMatrix::zeros(m, n);
    for (ch, &r) in lin.vmeas_rows.iter().enumerate() {
        c_dg[(ch, r)] = 1.0;
    }

    let abscissa = linalg::spectral_abscissa(&a_dn);
    if abscissa >= 0.0 {
        return Err(NetModelError::Model {
            msg: format!(
                "assembled plant is not Hurwitz (spectral abscissa {abscissa:.3e})"
            ),
        });
    }

    // Bus voltage deviations: dV = Z C_X dX - Z dI_T u.
    let bus_v_x = z_cx;
    let bus_v_u = -z_dit;
    let v0_frame: Vec<(f64, f64)> = frame_buses
        .iter()
        .map(|&b| match op.v_at(b) {
            Some(v) => (v.re, v.im),
            None => (0.0, 0.0),
        })
        .collect();

    Ok(DnStateSpace {
        a_dn,
        b_dg: lin.b_u.clone(),
        b_nr,
        c_dg,
        state_labels: lin.labels.clone(),
        output_labels: lin.channel_ids.clone(),
        frame_buses,
        bus_v_x,
        bus_v_u,
        z_net,
        c_x: lin.c_x.clone(),
        d_v: lin.d_v.clone(),
        b_v_z,
        channel_bus_pos: lin.channel_bus_pos.clone(),
        channel_i0: lin.channel_i0.iter().map(|c| (c.re, c.im)).collect(),
        v0_frame,
    })
}

/// Everything needed to (re)build the model of one switch event.
#[derive(Debug, Clone)]
pub struct EventModelInputs<'a> {
    pub network: &'a NetworkDescription,
    pub pre_states: &'a BTreeMap<String, bool>,
    pub post_states: &'a BTreeMap<String, bool>,
    pub setpoints: &'a DgSetpoints,
}

/// Builds the event model at the given operating point (pre-event steady
/// state) with optional parameter scalings. Used for the nominal model and
/// re-run per uncertainty-polytope vertex.
pub fn build_event_model(
    inp: &EventModelInputs,
    op: &OperatingPoint,
    scales: &ParamScales,
) -> Result<DnStateSpace> {
    let network = inp.network;
    let pre_set: BTreeSet<usize> = energized_buses(network, inp.pre_states)?;
    let post_set: BTreeSet<usize> = energized_buses(network, inp.post_states)?;
    let slack = network.slack_index();

    // Generators must stay energized on both sides of the event.
    let mut dead = Vec::new();
    for (id, bus) in network
        .sg_units
        .iter()
        .map(|u| (&u.id, &u.bus))
        .chain(network.ig_units.iter().map(|u| (&u.id, &u.bus)))
    {
        let b = network.bus_index(bus).unwrap();
        if !pre_set.contains(&b) || !post_set.contains(&b) {
            dead.push(format!("{id}@{bus}"));
        }
    }
    if !dead.is_empty() {
        return Err(NetModelError::Configuration {
            msg: "generator units are de-energized across the event".into(),
            island: dead,
        });
    }

    // Model frame: union of pre/post energized buses; buses dead on both
    // sides drop out entirely.
    let union: BTreeSet<usize> = pre_set.union(&post_set).copied().collect();
    let pair_frame: Vec<usize> = union.iter().copied().collect();
    let model_frame: Vec<usize> = pair_frame
        .iter()
        .copied()
        .filter(|&b| b != slack)
        .collect();

    let pair = AdmittancePair::build(network, inp.pre_states, inp.post_states, &pair_frame)?;
    let lin = linearize_dgs(network, op, &model_frame, scales)?;

    // Load Jacobians: pre-energized loads at their operating voltage,
    // restored loads at the rated point; ratings of loads whose energization
    // changes are scaled by the restored-demand factor.
    let fpos: BTreeMap<usize, usize> = model_frame
        .iter()
        .enumerate()
        .map(|(p, &b)| (b, p))
        .collect();
    let mut scaled_loads = Vec::new();
    for ld in &network.loads {
        let b = network.bus_index(&ld.bus).unwrap();
        if b == slack || !union.contains(&b) {
            continue;
        }
        let changes = pre_set.contains(&b) != post_set.contains(&b);
        let mut zip = ld.zip.clone();
        if changes && scales.sr != 1.0 {
            zip.p_mw *= scales.sr;
            zip.q_mvar *= scales.sr;
        }
        let v_eval = if pre_set.contains(&b) {
            op.v_at(b).ok_or_else(|| NetModelError::Model {
                msg: format!("operating point is missing bus {:?}", ld.bus),
            })?
        } else {
            Complex::new(1.0, 0.0)
        };
        scaled_loads.push((fpos[&b], zip, ld.bus.clone(), v_eval));
    }
    let load_refs: Vec<(usize, &super::types::ZipLoad, &str)> = scaled_loads
        .iter()
        .map(|(p, z, bus, _)| (*p, z, bus.as_str()))
        .collect();
    let v_evals: Vec<Complex<f64>> = scaled_loads.iter().map(|(_, _, _, v)| *v).collect();
    let d_l = zip_load_jacobian(&load_refs, &v_evals, network.s_base_mva, model_frame.len())?;

    assemble_dn_model(&lin, &d_l, &pair, op, slack)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::dg::test_params::{ig_params, sg_params};
    use crate::netmodel::powerflow::solve_steady_state;
    use crate::netmodel::testnet::desk3;
    use approx::assert_relative_eq;

    #[test]
    fn no_switch_event_gives_zero_bnr() {
        let net = desk3();
        let states = net.initial_switch_states();
        let sp = net.default_setpoints();
        let op = solve_steady_state(&net, &states, &sp).unwrap();
        let inputs = EventModelInputs {
            network: &net,
            pre_states: &states,
            post_states: &states,
            setpoints: &sp,
        };
        let model = build_event_model(&inputs, &op, &ParamScales::default()).unwrap();
        assert_eq!(model.b_nr.amax(), 0.0);
        // C_DG is a 0/1 selector with exactly one 1 per row.
        for r in 0..model.c_dg.nrows() {
            let ones = model
                .c_dg
                .row(r)
                .iter()
                .filter(|&&x| (x - 1.0).abs() < 1e-15)
                .count();
            let zeros = model
                .c_dg
                .row(r)
                .iter()
                .filter(|&&x| x.abs() < 1e-15)
                .count();
            assert_eq!(ones, 1);
            assert_eq!(zeros, model.c_dg.ncols() - 1);
        }
    }

    #[test]
    fn assembled_plant_is_hurwitz_with_table_parameters() {
        let net = desk3();
        let states = net.initial_switch_states();
        let sp = net.default_setpoints();
        let op = solve_steady_state(&net, &states, &sp).unwrap();
        let mut post = states.clone();
        post.insert("tsw1".into(), true);
        let inputs = EventModelInputs {
            network: &net,
            pre_states: &states,
            post_states: &post,
            setpoints: &sp,
        };
        let model = build_event_model(&inputs, &op, &ParamScales::default()).unwrap();
        assert!(crate::linalg::spectral_abscissa(&model.a_dn) < 0.0);
        assert!(model.b_nr.amax() > 0.0);
        // Labels form a bijection onto states.
        assert_eq!(model.state_labels.len(), model.n_states());
        // Output order: synchronous units first.
        assert_eq!(model.output_labels, vec!["sg1".to_string(), "ig1".to_string()]);
    }

    #[test]
    fn steady_state_gain_from_disturbance_is_zero_at_dg_buses() {
        // Integral voltage loops reject constant disturbances at the
        // measured outputs: C_DG A^{-1} B_NR = 0.
        let net = desk3();
        let states = net.initial_switch_states();
        let sp = net.default_setpoints();
        let op = solve_steady_state(&net, &states, &sp).unwrap();
        let mut post = states.clone();
        post.insert("tsw1".into(), true);
        let inputs = EventModelInputs {
            network: &net,
            pre_states: &states,
            post_states: &post,
            setpoints: &sp,
        };
        let model = build_event_model(&inputs, &op, &ParamScales::default()).unwrap();
        let xinf = model.a_dn.clone().lu().solve(&model.b_nr).unwrap();
        let dv_inf = &model.c_dg * xinf;
        assert!(dv_inf.amax() < 1e-9, "settled dV_DG {:.3e}", dv_inf.amax());
    }

    #[test]
    fn vertex_scaling_touches_expected_entries() {
        let net = desk3();
        let states = net.initial_switch_states();
        let sp = net.default_setpoints();
        let op = solve_steady_state(&net, &states, &sp).unwrap();
        let mut post = states.clone();
        post.insert("tsw1".into(), true);
        let inputs = EventModelInputs {
            network: &net,
            pre_states: &states,
            post_states: &post,
            setpoints: &sp,
        };
        let nominal = build_event_model(&inputs, &op, &ParamScales::default()).unwrap();
        let ka_hi = build_event_model(
            &inputs,
            &op,
            &ParamScales {
                ka: 1.3,
                ..Default::default()
            },
        )
        .unwrap();
        // Only rows of the exciter stage may differ.
        let field_rows: Vec<usize> = nominal
            .state_labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.state == "field_voltage")
            .map(|(i, _)| i)
            .collect();
        assert!(!field_rows.is_empty());
        let diff = &ka_hi.a_dn - &nominal.a_dn;
        for r in 0..diff.nrows() {
            let row_norm = diff.row(r).amax();
            if field_rows.contains(&r) {
                assert!(row_norm > 1e-9);
            } else {
                assert!(row_norm < 1e-12, "row {r} changed by {row_norm:.3e}");
            }
        }
    }

    #[test]
    fn sg_ig_parameter_fixtures_are_valid() {
        sg_params().validate("sg").unwrap();
        ig_params().validate("ig").unwrap();
    }
}
