//! Per-event model rebuild, synthesis, and exact segment integration.

use super::integrate::discretize;
use super::profiles::ProfileSampler;
use super::{
    EventMarker, Result, Scenario, SegmentInfo, SimError, SimulationTrace, Strategy, SwitchAction,
    SwitchEvent, SynthFailurePolicy,
};
use crate::fvc::{
    assemble_program, enumerate_polytope, recover_controller, solve_lmi, verify_certificate,
    FvController, SolveConfig, SynthesisCertificate, UncertaintySpec, VerificationReport,
};
use crate::netmodel::{
    build_event_model, solve_steady_state, DgSetpoints, DnStateSpace, EventModelInputs,
    NetworkDescription, OperatingPoint, ParamScales,
};
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;

/// Settle threshold on the deviation-state derivative at event boundaries.
pub const SETTLE_DERIV_TOL: f64 = 1e-6;

/// Synthesis outcome attached to one event.
#[derive(Debug)]
pub struct EventReport {
    pub event_index: usize,
    pub event_id: String,
    pub time_s: f64,
    pub vertex_count: usize,
    pub certificate: Option<SynthesisCertificate>,
    pub verification: Option<VerificationReport>,
    pub fell_back: bool,
}

/// Standalone single-event result.
#[derive(Debug)]
pub struct SegmentResult {
    pub trace: SimulationTrace,
    pub report: EventReport,
    pub post_states: BTreeMap<String, bool>,
}

pub(super) struct Engine<'a> {
    scenario: &'a Scenario,
    setpoints: DgSetpoints,
    switch_states: BTreeMap<String, bool>,
    sampler: ProfileSampler,
    profiled_loads: Vec<(String, f64, f64)>,
    /// Absolute unit states at the end of the previous segment.
    carry: Option<BTreeMap<String, DVector<f64>>>,
    last_segment_deriv: f64,
    t_cursor: f64,
    dg_ids: Vec<String>,
    bus_ids: Vec<String>,
    trace: TraceAccum,
    reports: Vec<EventReport>,
}

struct TraceAccum {
    time_s: Vec<f64>,
    dv_dg: Vec<Vec<f64>>,
    dv_bus: Vec<Vec<f64>>,
    p_dg: Vec<Vec<f64>>,
    q_dg: Vec<Vec<f64>>,
    u_ff: Vec<Vec<f64>>,
    markers: Vec<EventMarker>,
    segments: Vec<SegmentInfo>,
}

impl<'a> Engine<'a> {
    pub(super) fn new(scenario: &'a Scenario) -> Result<Self> {
        let network = &scenario.network;
        let setpoints = network.default_setpoints();
        let dg_ids = network.dg_channel_ids();
        let dg_buses: Vec<String> = network
            .sg_units
            .iter()
            .map(|u| u.bus.clone())
            .chain(network.ig_units.iter().map(|u| u.bus.clone()))
            .collect();
        let bus_ids: Vec<String> = network
            .buses
            .iter()
            .filter(|b| b.id != network.slack && !dg_buses.contains(&b.id))
            .map(|b| b.id.clone())
            .collect();
        let sampler = ProfileSampler::new(scenario.profiles.as_ref(), scenario.seed, scenario.dt_s);
        let profiled_loads = sampler
            .load_ids()
            .iter()
            .map(|id| {
                let ld = network.loads.iter().find(|l| &l.id == id).expect("validated");
                (
                    ld.bus.clone(),
                    ld.zip.p_mw / network.s_base_mva,
                    ld.zip.q_mvar / network.s_base_mva,
                )
            })
            .collect();
        let n_ch = dg_ids.len();
        let n_bus = bus_ids.len();
        Ok(Engine {
            scenario,
            setpoints,
            switch_states: network.initial_switch_states(),
            sampler,
            profiled_loads,
            carry: None,
            last_segment_deriv: 0.0,
            t_cursor: 0.0,
            dg_ids,
            bus_ids,
            trace: TraceAccum {
                time_s: Vec::new(),
                dv_dg: vec![Vec::new(); n_ch],
                dv_bus: vec![Vec::new(); n_bus],
                p_dg: vec![Vec::new(); n_ch],
                q_dg: vec![Vec::new(); n_ch],
                u_ff: vec![Vec::new(); n_ch],
                markers: Vec::new(),
                segments: Vec::new(),
            },
            reports: Vec::new(),
        })
    }

    pub(super) fn finish(self) -> (SimulationTrace, Vec<EventReport>) {
        let t = self.trace;
        (
            SimulationTrace {
                dt_s: self.scenario.dt_s,
                time_s: t.time_s,
                dg_ids: self.dg_ids,
                bus_ids: self.bus_ids,
                dv_dg: t.dv_dg,
                dv_bus: t.dv_bus,
                p_dg: t.p_dg,
                q_dg: t.q_dg,
                u_ff: t.u_ff,
                markers: t.markers,
                segments: t.segments,
            },
            self.reports,
        )
    }

    /// A segment with no switching step. Without profiles the system sits
    /// at its steady state and the deviations are identically zero.
    pub(super) fn run_quiet_segment(&mut self, horizon_s: f64, include_endpoint: bool) -> Result<()> {
        let dt = self.scenario.dt_s;
        let n_steps = steps_for(horizon_s, dt);
        if self.sampler.is_empty() && self.carry.is_none() {
            let start = self.trace.time_s.len();
            let n_samples = n_steps + usize::from(include_endpoint);
            for k in 0..n_samples {
                self.trace.time_s.push(self.t_cursor + k as f64 * dt);
                for ch in 0..self.dg_ids.len() {
                    self.trace.dv_dg[ch].push(0.0);
                    self.trace.p_dg[ch].push(0.0);
                    self.trace.q_dg[ch].push(0.0);
                    self.trace.u_ff[ch].push(0.0);
                }
                for b in 0..self.bus_ids.len() {
                    self.trace.dv_bus[b].push(0.0);
                }
            }
            self.trace.segments.push(SegmentInfo {
                start_sample: start,
                end_sample: self.trace.time_s.len(),
                event_index: None,
                end_derivative_norm: 0.0,
            });
            self.last_segment_deriv = 0.0;
            self.t_cursor += n_steps as f64 * dt;
            return Ok(());
        }
        let op = solve_steady_state(&self.scenario.network, &self.switch_states, &self.setpoints)?;
        let inputs = EventModelInputs {
            network: &self.scenario.network,
            pre_states: &self.switch_states,
            post_states: &self.switch_states,
            setpoints: &self.setpoints,
        };
        let model = build_event_model(&inputs, &op, &ParamScales::default())?;
        self.integrate_segment(&model, &op, None, false, n_steps, include_endpoint, None)
    }

    /// Runs one switch event: power flow at the pre-event topology, model
    /// rebuild, per-event synthesis (proposed strategy), and exact
    /// integration until the horizon.
    pub(super) fn run_event_segment(
        &mut self,
        event_index: usize,
        horizon_s: f64,
        include_endpoint: bool,
    ) -> Result<()> {
        let scenario = self.scenario;
        let event = &scenario.events[event_index];
        if self.last_segment_deriv > SETTLE_DERIV_TOL {
            log::warn!(
                "event {} ({}) starts before the previous segment settled (derivative norm {:.3e})",
                event_index,
                event.id(),
                self.last_segment_deriv
            );
        }
        let mut post_states = self.switch_states.clone();
        post_states.insert(
            event.switch.clone(),
            matches!(event.action, SwitchAction::Close),
        );

        let op = solve_steady_state(&scenario.network, &self.switch_states, &self.setpoints)?;
        let inputs = EventModelInputs {
            network: &scenario.network,
            pre_states: &self.switch_states,
            post_states: &post_states,
            setpoints: &self.setpoints,
        };
        let model = build_event_model(&inputs, &op, &ParamScales::default())?;

        // A toggle that does not change the admittance injects nothing;
        // there is nothing to preempt, so the controller stays out.
        let trivial = model.b_nr.amax() == 0.0;
        let (fvc, certificate, verification, fell_back, vertex_count) = if trivial
            || scenario.strategy == Strategy::FeedbackOnly
        {
            (None, None, None, false, 0)
        } else {
            let unc = event.uncertainty.unwrap_or(scenario.uncertainty);
            let gamma = event.gamma.unwrap_or(scenario.gamma);
            match synthesize(scenario, &inputs, &op, &unc, gamma) {
                Ok((fvc, cert, report, nv)) => (Some(fvc), Some(cert), Some(report), false, nv),
                Err(e) => match scenario.on_synth_failure {
                    SynthFailurePolicy::Abort => {
                        return Err(SimError::Synthesis {
                            event_index,
                            event_id: event.id(),
                            source: e,
                        });
                    }
                    SynthFailurePolicy::FallbackFeedbackOnly => {
                        log::warn!(
                            "event {} ({}): synthesis failed ({e}); falling back to feedback-only",
                            event_index,
                            event.id()
                        );
                        (None, None, None, true, 0)
                    }
                },
            }
        };

        let marker = EventMarker {
            sample: self.trace.time_s.len(),
            time_s: self.t_cursor,
            event_index,
            event_id: event.id(),
        };
        self.trace.markers.push(marker);
        self.reports.push(EventReport {
            event_index,
            event_id: event.id(),
            time_s: event.time_s,
            vertex_count,
            certificate,
            verification,
            fell_back,
        });

        let dt = scenario.dt_s;
        let n_steps = steps_for(horizon_s, dt);
        self.integrate_segment(
            &model,
            &op,
            fvc.as_ref(),
            true,
            n_steps,
            include_endpoint,
            Some(event_index),
        )?;
        self.switch_states = post_states;
        Ok(())
    }

    /// Exact march of the augmented deviation dynamics over one segment,
    /// emitting all monitored outputs.
    #[allow(clippy::too_many_arguments)]
    fn integrate_segment(
        &mut self,
        model: &DnStateSpace,
        op: &OperatingPoint,
        fvc: Option<&FvController>,
        step_input: bool,
        n_steps: usize,
        include_endpoint: bool,
        event_index: Option<usize>,
    ) -> Result<()> {
        let scenario = self.scenario;
        let dt = scenario.dt_s;
        let n = model.n_states();
        let _ = model.n_channels();
        let total = if fvc.is_some() { 2 * n } else { n };
        let n_dist = self.profiled_loads.len();

        // Augmented dynamics and input columns: [step, delayed step, dists].
        let mut a_aug = DMatrix::zeros(total, total);
        a_aug.view_mut((0, 0), (n, n)).copy_from(&model.a_dn);
        if let Some(f) = fvc {
            a_aug
                .view_mut((0, n), (n, n))
                .copy_from(&(&model.b_dg * &f.c_ff));
            a_aug.view_mut((n, n), (n, n)).copy_from(&f.a_ff);
        }
        let mut b_aug = DMatrix::zeros(total, 2 + n_dist);
        for i in 0..n {
            b_aug[(i, 0)] = model.b_nr[i];
        }
        if let Some(f) = fvc {
            for i in 0..n {
                b_aug[(n + i, 1)] = f.b_ff[i];
            }
        }
        // Disturbance stamps: fractional load-demand deviations entering
        // through the load Jacobian channel.
        let frame_pos: BTreeMap<usize, usize> = model
            .frame_buses
            .iter()
            .enumerate()
            .map(|(p, &b)| (b, p))
            .collect();
        let mut v_dist = Vec::with_capacity(n_dist);
        for (e, (bus, p0, q0)) in self.profiled_loads.iter().enumerate() {
            let bidx = scenario.network.bus_index(bus).unwrap();
            let mut stamp = DVector::zeros(2 * model.frame_buses.len());
            if let Some(&p) = frame_pos.get(&bidx) {
                let (vd, vq) = model.v0_frame[p];
                let u2 = vd * vd + vq * vq;
                if u2 > 0.25 {
                    stamp[2 * p] = -(vd * p0 + vq * q0) / u2;
                    stamp[2 * p + 1] = -(vq * p0 - vd * q0) / u2;
                }
            }
            let col = &model.b_v_z * &stamp;
            for i in 0..n {
                b_aug[(i, 2 + e)] = col[i];
            }
            v_dist.push(&model.z_net * &stamp);
        }

        // Fastest-mode resolution advisory.
        let lam_max = crate::linalg::eigenvalues(&a_aug)
            .iter()
            .map(|l| l.norm())
            .fold(0.0, f64::max);
        if lam_max > 0.0 && dt > 0.1 / lam_max {
            log::warn!(
                "dt = {dt} s does not resolve the fastest mode (|lambda|max = {lam_max:.3e} rad/s); exact sampling may alias"
            );
        }

        // Initial deviation state from carried-over absolute unit states.
        let mut x = DVector::zeros(total);
        if let Some(carry) = &self.carry {
            let offsets = unit_offsets(model);
            for (unit, x_abs) in carry {
                if let (Some(&off), Some(steady)) = (offsets.get(unit), op.dg_states.get(unit)) {
                    let x0 = steady.state();
                    for i in 0..x0.len() {
                        x[off + i] = x_abs[i] - x0[i];
                    }
                }
            }
        }

        let (ad, bd) = discretize(&a_aug, &b_aug, dt);
        // Delay split: the feedforward channel switches on at t = T_d.
        let delay = if fvc.is_some() && step_input {
            scenario.delay_s
        } else {
            0.0
        };
        let k_delay = (delay / dt).floor() as usize;
        let frac = delay - k_delay as f64 * dt;
        let split = if frac > 1e-12 {
            let (ad_a, bd_a) = discretize(&a_aug, &b_aug, frac);
            let (ad_b, bd_b) = discretize(&a_aug, &b_aug, dt - frac);
            Some((ad_a, bd_a, ad_b, bd_b))
        } else {
            None
        };

        let u1 = if step_input { 1.0 } else { 0.0 };
        let n_samples = n_steps + usize::from(include_endpoint);
        let start_sample = self.trace.time_s.len();
        let mut u_vec = DVector::zeros(2 + n_dist);
        let mut last_w = vec![0.0; n_dist];
        for k in 0..n_steps {
            let t_local = k as f64 * dt;
            let w = self.sampler.sample(self.t_cursor + t_local);
            last_w.clone_from_slice(&w);
            if k < n_samples {
                self.emit_sample(model, fvc, &x, u1, &w, &v_dist, self.t_cursor + t_local);
            }
            // March one step with the delayed channel held appropriately.
            let u2_now = if delay > 0.0 {
                if t_local + 1e-12 < delay {
                    0.0
                } else {
                    1.0
                }
            } else {
                u1
            };
            u_vec[0] = u1;
            u_vec[1] = if fvc.is_some() { u2_now } else { 0.0 };
            for (e, we) in w.iter().enumerate() {
                u_vec[2 + e] = *we;
            }
            x = if k == k_delay && split.is_some() {
                let (ad_a, bd_a, ad_b, bd_b) = split.as_ref().unwrap();
                let mut ua = u_vec.clone();
                ua[1] = 0.0;
                let mut ub = u_vec.clone();
                ub[1] = 1.0;
                let mid = ad_a * &x + bd_a * ua;
                ad_b * mid + bd_b * ub
            } else {
                &ad * &x + &bd * &u_vec
            };
            if !x.iter().all(|v| v.is_finite()) {
                return Err(SimError::Integration {
                    step: k + 1,
                    msg: "state became non-finite".into(),
                });
            }
        }
        if include_endpoint {
            let t_local = n_steps as f64 * dt;
            let w = self.sampler.sample(self.t_cursor + t_local);
            last_w.clone_from_slice(&w);
            self.emit_sample(model, fvc, &x, u1, &w, &v_dist, self.t_cursor + t_local);
        }

        // Settle diagnostics and carry-over of absolute unit states.
        u_vec[0] = u1;
        u_vec[1] = if fvc.is_some() && (delay == 0.0 || n_steps as f64 * dt >= delay) {
            u1
        } else {
            0.0
        };
        for (e, we) in last_w.iter().enumerate() {
            u_vec[2 + e] = *we;
        }
        let deriv = (&a_aug * &x + &b_aug * &u_vec).amax();
        self.trace.segments.push(SegmentInfo {
            start_sample,
            end_sample: self.trace.time_s.len(),
            event_index,
            end_derivative_norm: deriv,
        });
        self.last_segment_deriv = deriv;

        let offsets = unit_offsets(model);
        let mut carry = BTreeMap::new();
        for (unit, steady) in &op.dg_states {
            let off = offsets[unit];
            let x0 = steady.state();
            let mut x_abs = DVector::zeros(x0.len());
            for i in 0..x0.len() {
                x_abs[i] = x0[i] + x[off + i];
            }
            carry.insert(unit.clone(), x_abs);
        }
        self.carry = Some(carry);
        self.t_cursor += n_steps as f64 * dt;
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn emit_sample(
        &mut self,
        model: &DnStateSpace,
        fvc: Option<&FvController>,
        x: &DVector<f64>,
        u1: f64,
        w: &[f64],
        v_dist: &[DVector<f64>],
        t: f64,
    ) {
        let n = model.n_states();
        let x_plant = x.rows(0, n).clone_owned();
        self.trace.time_s.push(t);
        let dv_dg = &model.c_dg * &x_plant;
        for ch in 0..self.dg_ids.len() {
            self.trace.dv_dg[ch].push(dv_dg[ch]);
        }
        if let Some(f) = fvc {
            let x_ff = x.rows(n, n).clone_owned();
            let u_ff = &f.c_ff * x_ff;
            for ch in 0..self.dg_ids.len() {
                self.trace.u_ff[ch].push(u_ff[ch]);
            }
        } else {
            for ch in 0..self.dg_ids.len() {
                self.trace.u_ff[ch].push(0.0);
            }
        }
        // Bus voltage deviations.
        let mut dv_dq = &model.bus_v_x * &x_plant + &model.bus_v_u * u1;
        for (e, we) in w.iter().enumerate() {
            if *we != 0.0 {
                dv_dq += &v_dist[e] * *we;
            }
        }
        let frame_pos: BTreeMap<usize, usize> = model
            .frame_buses
            .iter()
            .enumerate()
            .map(|(p, &b)| (b, p))
            .collect();
        for (bi, bus_id) in self.bus_ids.iter().enumerate() {
            let bidx = self.scenario.network.bus_index(bus_id).unwrap();
            let val = match frame_pos.get(&bidx) {
                Some(&p) => {
                    let (v0d, v0q) = model.v0_frame[p];
                    let vd = v0d + dv_dq[2 * p];
                    let vq = v0q + dv_dq[2 * p + 1];
                    vd.hypot(vq) - v0d.hypot(v0q)
                }
                None => 0.0,
            };
            self.trace.dv_bus[bi].push(val);
        }
        // Channel power deviations.
        let di = &model.c_x * &x_plant - &model.d_v * &dv_dq;
        for ch in 0..self.dg_ids.len() {
            let bp = model.channel_bus_pos[ch];
            let (i0d, i0q) = model.channel_i0[ch];
            let (v0d, v0q) = model.v0_frame[bp];
            let (dvd, dvq) = (dv_dq[2 * bp], dv_dq[2 * bp + 1]);
            let (did, diq) = (di[2 * bp], di[2 * bp + 1]);
            let dp = i0d * dvd + i0q * dvq + v0d * did + v0q * diq;
            let dq = i0d * dvq - i0q * dvd + v0q * did - v0d * diq;
            self.trace.p_dg[ch].push(dp);
            self.trace.q_dg[ch].push(dq);
        }
    }
}

fn steps_for(horizon_s: f64, dt: f64) -> usize {
    ((horizon_s / dt).round() as usize).max(1)
}

/// First state index of each unit in the model's label order.
fn unit_offsets(model: &DnStateSpace) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for (i, lbl) in model.state_labels.iter().enumerate() {
        out.entry(lbl.unit.clone()).or_insert(i);
    }
    out
}

fn synthesize(
    scenario: &Scenario,
    inputs: &EventModelInputs,
    op: &OperatingPoint,
    uncertainty: &UncertaintySpec,
    gamma: f64,
) -> crate::fvc::Result<(
    FvController,
    SynthesisCertificate,
    VerificationReport,
    usize,
)> {
    let vertices = enumerate_polytope(inputs, op, uncertainty)?;
    let nv = vertices.len();
    let c_dg = vertices[0].model.c_dg.clone();
    let program = assemble_program(
        vertices.iter().map(|v| v.data()).collect(),
        c_dg,
        gamma,
        scenario.eps_rel,
        scenario.energy_bound,
    )?;
    let cert = solve_lmi(&program, &SolveConfig::default())?;
    let fvc = recover_controller(&cert)?;
    let report = verify_certificate(&program, &vertices, &fvc, &cert)?;
    Ok((fvc, cert, report, nv))
}

/// Runs a single switch event from a given switch configuration and
/// returns the segment trace, the synthesis report, and the post-event
/// switch states.
#[allow(clippy::too_many_arguments)]
pub fn run_switch_event(
    network: &NetworkDescription,
    pre_states: &BTreeMap<String, bool>,
    event: &SwitchEvent,
    strategy: Strategy,
    delay_s: f64,
    dt_s: f64,
    horizon_s: f64,
    uncertainty: &UncertaintySpec,
    gamma: f64,
) -> Result<SegmentResult> {
    let mut net = network.clone();
    for sw in net.switches.iter_mut() {
        sw.closed = pre_states.get(&sw.id).copied().unwrap_or(sw.closed);
    }
    let scenario = Scenario {
        network: net,
        events: vec![SwitchEvent {
            time_s: 0.0,
            switch: event.switch.clone(),
            action: event.action,
            gamma: event.gamma,
            uncertainty: event.uncertainty,
        }],
        strategy,
        delay_s,
        dt_s,
        settle_horizon_s: horizon_s,
        uncertainty: *uncertainty,
        gamma,
        profiles: None,
        seed: 0,
        on_synth_failure: SynthFailurePolicy::Abort,
        eps_rel: 1e-7,
        energy_bound: true,
    };
    scenario.validate()?;
    let mut engine = Engine::new(&scenario)?;
    engine.run_event_segment(0, horizon_s, true)?;
    let post_states = engine.switch_states.clone();
    let (trace, mut reports) = engine.finish();
    Ok(SegmentResult {
        trace,
        report: reports.remove(0),
        post_states,
    })
}
