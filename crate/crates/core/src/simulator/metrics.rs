//! Voltage-quality metrics over a simulation trace.
//!
//! Per monitored signal (generator channels and load buses):
//!
//! - rms deviation over the full trace; the scenario average is the mean of
//!   the per-signal rms values,
//! - peak-to-peak deviation per event window, maximized over signals,
//! - settling time per event window: the last instant the deviation leaves
//!   a band around its settled value, measured from the event.

use super::{Result, SimError, SimulationTrace};
use serde::Serialize;
use std::collections::BTreeMap;

/// Settling band: `max(rel * peak-to-peak, abs_floor_pu)` around the
/// settled value.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SettleBand {
    pub rel: f64,
    pub abs_floor_pu: f64,
}

impl Default for SettleBand {
    fn default() -> Self {
        SettleBand {
            rel: 0.02,
            abs_floor_pu: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SignalMetrics {
    pub dv_rms: f64,
    pub dv_pk: f64,
    pub dt_set: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct WindowMetrics {
    pub event_index: usize,
    pub event_id: String,
    pub dv_pk_max: f64,
    pub dt_set_max: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Metrics {
    pub dv_rms_avg: f64,
    pub dv_pk_max: f64,
    pub dt_set_max: f64,
    pub per_bus: BTreeMap<String, SignalMetrics>,
    pub per_event: Vec<WindowMetrics>,
    pub q_rms_per_dg: BTreeMap<String, f64>,
    pub q_rms_sum: f64,
}

pub fn compute_metrics(trace: &SimulationTrace, band: &SettleBand) -> Result<Metrics> {
    if trace.is_empty() {
        return Err(SimError::Metrics("trace has no samples".into()));
    }
    let n_samples = trace.len();
    let dt = trace.dt_s;

    // Event windows: [marker_k, marker_{k+1}) and the tail after the last.
    let mut windows: Vec<(usize, usize, usize, String)> = Vec::new();
    for (k, m) in trace.markers.iter().enumerate() {
        let end = trace
            .markers
            .get(k + 1)
            .map(|nm| nm.sample)
            .unwrap_or(n_samples);
        if end <= m.sample + 1 {
            return Err(SimError::Metrics(format!(
                "event window {k} is shorter than the settle window"
            )));
        }
        windows.push((m.sample, end, m.event_index, m.event_id.clone()));
    }

    let signals: Vec<(String, &Vec<f64>)> = trace
        .dg_ids
        .iter()
        .cloned()
        .zip(trace.dv_dg.iter())
        .chain(trace.bus_ids.iter().cloned().zip(trace.dv_bus.iter()))
        .collect();
    if signals.is_empty() {
        return Err(SimError::Metrics("trace has no monitored signals".into()));
    }

    let mut per_bus = BTreeMap::new();
    let mut rms_sum = 0.0;
    for (id, series) in &signals {
        debug_assert_eq!(series.len(), n_samples);
        let ms = series.iter().map(|v| v * v).sum::<f64>() / n_samples as f64;
        let rms = ms.sqrt();
        rms_sum += rms;
        let mut pk_sig = 0.0f64;
        let mut set_sig = 0.0f64;
        for (start, end, _, _) in &windows {
            let (pk, dt_set) = window_metrics(&series[*start..*end], dt, band);
            pk_sig = pk_sig.max(pk);
            set_sig = set_sig.max(dt_set);
        }
        per_bus.insert(
            id.clone(),
            SignalMetrics {
                dv_rms: rms,
                dv_pk: pk_sig,
                dt_set: set_sig,
            },
        );
    }
    let dv_rms_avg = rms_sum / signals.len() as f64;

    let mut per_event = Vec::new();
    for (start, end, idx, id) in &windows {
        let mut pk_max = 0.0f64;
        let mut set_max = 0.0f64;
        for (_, series) in &signals {
            let (pk, dt_set) = window_metrics(&series[*start..*end], dt, band);
            pk_max = pk_max.max(pk);
            set_max = set_max.max(dt_set);
        }
        per_event.push(WindowMetrics {
            event_index: *idx,
            event_id: id.clone(),
            dv_pk_max: pk_max,
            dt_set_max: set_max,
        });
    }
    let dv_pk_max = per_event.iter().map(|w| w.dv_pk_max).fold(0.0, f64::max);
    let dt_set_max = per_event.iter().map(|w| w.dt_set_max).fold(0.0, f64::max);

    let mut q_rms_per_dg = BTreeMap::new();
    let mut q_rms_sum = 0.0;
    for (id, series) in trace.dg_ids.iter().zip(trace.q_dg.iter()) {
        let rms = (series.iter().map(|v| v * v).sum::<f64>() / n_samples as f64).sqrt();
        q_rms_per_dg.insert(id.clone(), rms);
        q_rms_sum += rms;
    }

    Ok(Metrics {
        dv_rms_avg,
        dv_pk_max,
        dt_set_max,
        per_bus,
        per_event,
        q_rms_per_dg,
        q_rms_sum,
    })
}

/// Peak-to-peak and settling time of one window.
fn window_metrics(w: &[f64], dt: f64, band: &SettleBand) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in w {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let pk = hi - lo;
    let settled = *w.last().unwrap();
    let tol = (band.rel * pk).max(band.abs_floor_pu);
    let mut last_out = None;
    for (k, &v) in w.iter().enumerate() {
        if (v - settled).abs() > tol {
            last_out = Some(k);
        }
    }
    let dt_set = match last_out {
        // The band is exited for the last time at sample k; settled from
        // the next sample on.
        Some(k) => (k + 1) as f64 * dt,
        None => 0.0,
    };
    (pk, dt_set)
}
