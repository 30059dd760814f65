//! Result persistence: deterministic CSV/JSON writers, content digests,
//! and the run report.

use super::{IoError, Result};
use crate::fvc::{SynthStatus, SynthesisCertificate};
use crate::linalg;
use crate::simulator::{
    EventMarker, EventReport, Metrics, SegmentInfo, SimulationTrace,
};
use crate::ssanalysis::FrequencyResponseData;
use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Row-major matrix with explicit dimensions, as used by all JSON reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        MatrixJson {
            rows: m.nrows(),
            cols: m.ncols(),
            data: linalg::row_major(m),
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        linalg::from_row_major(self.rows, self.cols, &self.data)
    }
}

/// Synthesis report for one event, serialized as `synth_<event>.json`.
#[derive(Debug, Clone, Serialize)]
pub struct SynthReportJson {
    pub event_index: usize,
    pub event_id: String,
    pub j_opt: f64,
    pub gamma: f64,
    pub status: SynthStatus,
    pub margins: crate::fvc::Margins,
    pub vertex_count: usize,
    pub a_ff: MatrixJson,
    pub b_ff: MatrixJson,
    pub c_ff: MatrixJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<crate::fvc::VerificationReport>,
}

/// Event summary inside the run report.
#[derive(Debug, Clone, Serialize)]
pub struct EventReportJson {
    pub event_index: usize,
    pub event_id: String,
    pub time_s: f64,
    pub vertex_count: usize,
    pub fell_back: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_opt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification_pass: Option<bool>,
}

impl EventReportJson {
    pub fn from_report(r: &EventReport) -> Self {
        EventReportJson {
            event_index: r.event_index,
            event_id: r.event_id.clone(),
            time_s: r.time_s,
            vertex_count: r.vertex_count,
            fell_back: r.fell_back,
            j_opt: r.certificate.as_ref().map(|c| c.j_opt),
            verification_pass: r.verification.as_ref().map(|v| v.pass),
        }
    }
}

/// Run metadata: digests and wall times live here, never in the
/// deterministic content files.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub tool_version: String,
    pub input_digest: String,
    pub events: Vec<EventReportJson>,
    pub wall_time_s: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    hex_string(&h.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

fn write_file(dir: &Path, name: &str, content: &[u8], manifest: &mut Vec<ManifestEntry>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(io_err(&path))?;
    manifest.push(ManifestEntry {
        name: name.to_string(),
        sha256: sha256_hex(content),
    });
    Ok(())
}

/// Shortest round-trip float formatting (scientific); parsing the text
/// recovers the exact bits, which keeps metrics recomputed from a written
/// trace identical to the original.
fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

/// Serializes a trace to the CSV layout
/// `time_s, dv_<id>.., q_<dg>.., p_<dg>.., uff_<dg>.., event`.
pub fn trace_to_csv(trace: &SimulationTrace) -> String {
    let mut head = vec!["time_s".to_string()];
    for id in trace.dg_ids.iter().chain(trace.bus_ids.iter()) {
        head.push(format!("dv_{id}"));
    }
    for id in &trace.dg_ids {
        head.push(format!("q_{id}"));
    }
    for id in &trace.dg_ids {
        head.push(format!("p_{id}"));
    }
    for id in &trace.dg_ids {
        head.push(format!("uff_{id}"));
    }
    head.push("event".to_string());
    let mut out = head.join(",");
    out.push('\n');
    let marker_at: BTreeMap<usize, &str> = trace
        .markers
        .iter()
        .map(|m| (m.sample, m.event_id.as_str()))
        .collect();
    for k in 0..trace.len() {
        let mut row = Vec::with_capacity(head.len());
        row.push(fmt_f64(trace.time_s[k]));
        for s in trace.dv_dg.iter().chain(trace.dv_bus.iter()) {
            row.push(fmt_f64(s[k]));
        }
        for s in &trace.q_dg {
            row.push(fmt_f64(s[k]));
        }
        for s in &trace.p_dg {
            row.push(fmt_f64(s[k]));
        }
        for s in &trace.u_ff {
            row.push(fmt_f64(s[k]));
        }
        row.push(marker_at.get(&k).unwrap_or(&"").to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Reads a trace back from the CSV layout written by [`trace_to_csv`].
pub fn parse_trace_csv(path: &Path) -> Result<SimulationTrace> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| IoError::Validation("empty trace file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"time_s") || cols.last() != Some(&"event") {
        return Err(IoError::Validation(
            "trace header must start with time_s and end with event".into(),
        ));
    }
    let dg_ids: Vec<String> = cols
        .iter()
        .filter_map(|c| c.strip_prefix("q_").map(|s| s.to_string()))
        .collect();
    let dv_ids: Vec<String> = cols
        .iter()
        .filter_map(|c| c.strip_prefix("dv_").map(|s| s.to_string()))
        .collect();
    let bus_ids: Vec<String> = dv_ids
        .iter()
        .filter(|id| !dg_ids.contains(id))
        .cloned()
        .collect();
    let n_dg = dg_ids.len();
    let n_dv = dv_ids.len();
    let expect = 1 + n_dv + 3 * n_dg + 1;
    if cols.len() != expect {
        return Err(IoError::Validation(format!(
            "trace header has {} columns, expected {}",
            cols.len(),
            expect
        )));
    }
    let mut trace = SimulationTrace {
        dt_s: 0.0,
        time_s: Vec::new(),
        dg_ids: dg_ids.clone(),
        bus_ids,
        dv_dg: vec![Vec::new(); n_dg],
        dv_bus: vec![Vec::new(); n_dv - n_dg],
        p_dg: vec![Vec::new(); n_dg],
        q_dg: vec![Vec::new(); n_dg],
        u_ff: vec![Vec::new(); n_dg],
        markers: Vec::new(),
        segments: Vec::new(),
    };
    let parse = |s: &str, row: usize| -> Result<f64> {
        s.parse::<f64>().map_err(|e| IoError::Parse {
            pointer: format!("row {row}"),
            msg: format!("bad float {s:?}: {e}"),
        })
    };
    for (r, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != expect {
            return Err(IoError::Validation(format!(
                "row {r} has {} fields, expected {}",
                f.len(),
                expect
            )));
        }
        let k = trace.time_s.len();
        trace.time_s.push(parse(f[0], r)?);
        let mut idx = 1;
        for ch in 0..n_dg {
            trace.dv_dg[ch].push(parse(f[idx + ch], r)?);
        }
        for b in 0..(n_dv - n_dg) {
            trace.dv_bus[b].push(parse(f[idx + n_dg + b], r)?);
        }
        idx += n_dv;
        for ch in 0..n_dg {
            trace.q_dg[ch].push(parse(f[idx + ch], r)?);
        }
        idx += n_dg;
        for ch in 0..n_dg {
            trace.p_dg[ch].push(parse(f[idx + ch], r)?);
        }
        idx += n_dg;
        for ch in 0..n_dg {
            trace.u_ff[ch].push(parse(f[idx + ch], r)?);
        }
        idx += n_dg;
        let ev = f[idx];
        if !ev.is_empty() {
            trace.markers.push(EventMarker {
                sample: k,
                time_s: trace.time_s[k],
                event_index: trace.markers.len(),
                event_id: ev.to_string(),
            });
        }
    }
    if trace.time_s.len() >= 2 {
        trace.dt_s = trace.time_s[1] - trace.time_s[0];
    }
    trace.segments.push(SegmentInfo {
        start_sample: 0,
        end_sample: trace.time_s.len(),
        event_index: None,
        end_derivative_norm: 0.0,
    });
    Ok(trace)
}

/// Frequency sweep as `freq_hz, sigma_1..sigma_m` rows.
pub fn svp_to_csv(data: &FrequencyResponseData) -> String {
    let m = data.sigma.iter().map(|s| s.len()).max().unwrap_or(0);
    let mut out = String::from("freq_hz");
    for i in 1..=m {
        out.push_str(&format!(",sigma_{i}"));
    }
    out.push('\n');
    for (f, sv) in data.freq_hz.iter().zip(data.sigma.iter()) {
        out.push_str(&fmt_f64(*f));
        for v in sv {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

pub fn eig_to_csv(eigs: &[Complex<f64>]) -> String {
    let mut out = String::from("re,im\n");
    for e in eigs {
        out.push_str(&format!("{},{}\n", fmt_f64(e.re), fmt_f64(e.im)));
    }
    out
}

pub fn write_svp_csv(path: &Path, data: &FrequencyResponseData) -> Result<()> {
    std::fs::write(path, svp_to_csv(data)).map_err(io_err(path))
}

pub fn write_eig_csv(path: &Path, eigs: &[Complex<f64>]) -> Result<()> {
    std::fs::write(path, eig_to_csv(eigs)).map_err(io_err(path))
}

pub fn write_synth_report(path: &Path, report: &SynthReportJson) -> Result<()> {
    let json = serde_json::to_string_pretty(report).expect("serializable");
    std::fs::write(path, json).map_err(io_err(path))
}

pub fn synth_report_json(
    report: &EventReport,
    cert: &SynthesisCertificate,
    fvc: Option<&crate::fvc::FvController>,
) -> SynthReportJson {
    // The controller realization is recomputed from the certificate when
    // not supplied.
    let (a_ff, b_ff, c_ff) = match fvc {
        Some(f) => (f.a_ff.clone(), DMatrix::from_column_slice(f.b_ff.len(), 1, f.b_ff.as_slice()), f.c_ff.clone()),
        None => match crate::fvc::recover_controller(cert) {
            Ok(f) => (
                f.a_ff.clone(),
                DMatrix::from_column_slice(f.b_ff.len(), 1, f.b_ff.as_slice()),
                f.c_ff.clone(),
            ),
            Err(_) => (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)),
        },
    };
    SynthReportJson {
        event_index: report.event_index,
        event_id: report.event_id.clone(),
        j_opt: cert.j_opt,
        gamma: cert.gamma,
        status: cert.status,
        margins: cert.margins.clone(),
        vertex_count: report.vertex_count,
        a_ff: MatrixJson::from_matrix(&a_ff),
        b_ff: MatrixJson::from_matrix(&b_ff),
        c_ff: MatrixJson::from_matrix(&c_ff),
        verification: report.verification.clone(),
    }
}

/// Optional frequency-domain artifacts to persist next to the run outputs.
#[derive(Debug, Default)]
pub struct OutputBundle {
    pub svp: Vec<(String, FrequencyResponseData)>,
    pub eig: Vec<(String, Vec<Complex<f64>>)>,
}

/// Writes the deterministic result files and the digest manifest:
/// `trace.csv`, `metrics.json`, `synth_<event>.json`, `svp_<tag>.csv`,
/// `eig_<tag>.csv`, `manifest.json`.
pub fn write_outputs(
    trace: &SimulationTrace,
    metrics: &Metrics,
    reports: &[EventReport],
    extras: &OutputBundle,
    out_dir: &Path,
) -> Result<Manifest> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut entries = Vec::new();
    write_file(out_dir, "trace.csv", trace_to_csv(trace).as_bytes(), &mut entries)?;
    let metrics_json = serde_json::to_string_pretty(metrics).expect("serializable");
    write_file(out_dir, "metrics.json", metrics_json.as_bytes(), &mut entries)?;
    for r in reports {
        if let Some(cert) = &r.certificate {
            let json = serde_json::to_string_pretty(&synth_report_json(r, cert, None))
                .expect("serializable");
            write_file(
                out_dir,
                &format!("synth_{}.json", r.event_index),
                json.as_bytes(),
                &mut entries,
            )?;
        }
    }
    for (tag, data) in &extras.svp {
        write_file(
            out_dir,
            &format!("svp_{tag}.csv"),
            svp_to_csv(data).as_bytes(),
            &mut entries,
        )?;
    }
    for (tag, eigs) in &extras.eig {
        write_file(
            out_dir,
            &format!("eig_{tag}.csv"),
            eig_to_csv(eigs).as_bytes(),
            &mut entries,
        )?;
    }
    let manifest = Manifest { files: entries };
    let path = out_dir.join("manifest.json");
    let mut f = std::fs::File::create(&path).map_err(io_err(&path))?;
    f.write_all(
        serde_json::to_string_pretty(&manifest)
            .expect("serializable")
            .as_bytes(),
    )
    .map_err(io_err(&path))?;
    Ok(manifest)
}

pub fn write_run_report(path: &Path, report: &RunReport) -> Result<()> {
    let json = serde_json::to_string_pretty(report).expect("serializable");
    std::fs::write(path, json).map_err(io_err(path))
}
