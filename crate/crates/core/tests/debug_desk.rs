//! Exploratory: end-to-end desk-scale pipeline numbers.

use fvcgrid_core::fvc::{
    assemble_program, enumerate_polytope, recover_controller, solve_lmi, verify_certificate,
    SolveConfig, UncertaintySpec,
};
use fvcgrid_core::netmodel::*;
use fvcgrid_core::ssanalysis::{assemble_overall, hinf_norm, StateSpace};
use nalgebra::DMatrix;
use std::collections::BTreeMap;
use std::time::Instant;

fn desk3() -> NetworkDescription {
    let json = std::fs::read_to_string(
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/desk3.json"),
    )
    .unwrap();
    let scenario = fvcgrid_core::scenario_io::parse_scenario_bytes(json.as_bytes()).unwrap();
    scenario.network
}

#[test]
fn desk_pipeline_numbers() {
    let net = desk3();
    let states = net.initial_switch_states();
    let sp = net.default_setpoints();
    let op = solve_steady_state(&net, &states, &sp).unwrap();
    println!("PF residual {:.2e}", op.residual);
    for (i, v) in op.v0.iter().enumerate() {
        println!("  bus {} V = {:.4} ∠ {:.3} deg", i, v.norm(), v.arg().to_degrees());
    }
    for (id, pq) in &op.dg_pq {
        println!("  {} P={:.4} Q={:.4}", id, pq.0, pq.1);
    }

    let mut post = states.clone();
    post.insert("tsw1".into(), true);
    let inputs = EventModelInputs {
        network: &net,
        pre_states: &states,
        post_states: &post,
        setpoints: &sp,
    };
    let model = build_event_model(&inputs, &op, &ParamScales::default()).unwrap();
    let n = model.n_states();
    println!("n_states = {n}");
    let eigs = fvcgrid_core::linalg::eigenvalues(&model.a_dn);
    println!(
        "A_DN abscissa = {:.4}, |lambda|max = {:.1}",
        eigs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max),
        eigs.iter().map(|l| l.norm()).fold(0.0, f64::max)
    );
    for e in &eigs {
        println!("   lambda = {:.5} + {:.5}j", e.re, e.im);
    }

    // Open-loop (feedback-only) norm.
    let open = StateSpace::new(
        model.a_dn.clone(),
        DMatrix::from_column_slice(n, 1, model.b_nr.as_slice()),
        model.c_dg.clone(),
    )
    .unwrap();
    let open_norm = hinf_norm(&open, 1e-8).unwrap();
    println!("feedback-only ||G||inf = {:.6e}", open_norm);

    // P1 synthesis.
    let t0 = Instant::now();
    let vertices = enumerate_polytope(&inputs, &op, &UncertaintySpec::default()).unwrap();
    let program = assemble_program(
        vertices.iter().map(|v| v.data()).collect(),
        model.c_dg.clone(),
        10.0,
        1e-7,
        true,
    )
    .unwrap();
    let cert = solve_lmi(&program, &SolveConfig::default()).unwrap();
    println!(
        "P1: J = {:.6e} (lmi {:.3e}) iters {} in {:.2}s; margins {:?}",
        cert.j_opt,
        cert.j_lmi,
        cert.iterations,
        t0.elapsed().as_secs_f64(),
        cert.margins
    );
    let fvc = recover_controller(&cert).unwrap();
    let od = assemble_overall(&model, &fvc).unwrap();
    let closed = hinf_norm(&od.to_ss(), 1e-8).unwrap();
    println!("closed-loop swept = {:.6e} (<= J? {})", closed, closed <= cert.j_opt * 1.0001);
    let report = verify_certificate(&program, &vertices, &fvc, &cert).unwrap();
    println!(
        "verify pass = {} (inv resid {:.2e}, congruence max {:.2e})",
        report.pass,
        report.inverse_residual.margin,
        report
            .congruence
            .iter()
            .map(|c| c.margin)
            .fold(0.0f64, f64::max)
    );

    // P2 with 30% uncertainty on all three.
    let t0 = Instant::now();
    let unc = UncertaintySpec {
        ka: 0.3,
        lf: 0.3,
        sr: 0.3,
    };
    let vertices8 = enumerate_polytope(&inputs, &op, &unc).unwrap();
    println!("vertices: {}", vertices8.len());
    for v in &vertices8 {
        let ab = fvcgrid_core::linalg::spectral_abscissa(&v.model.a_dn);
        println!("  [{}] abscissa {:.4}", v.signature, ab);
    }
    let program8 = assemble_program(
        vertices8.iter().map(|v| v.data()).collect(),
        model.c_dg.clone(),
        10.0,
        1e-7,
        true,
    )
    .unwrap();
    let cert8 = solve_lmi(&program8, &SolveConfig::default()).unwrap();
    println!(
        "P2: J = {:.6e} in {:.2}s (J_P2 >= J_P1? {})",
        cert8.j_opt,
        t0.elapsed().as_secs_f64(),
        cert8.j_opt >= cert.j_opt * (1.0 - 1e-6)
    );
    let fvc8 = recover_controller(&cert8).unwrap();
    let report8 = verify_certificate(&program8, &vertices8, &fvc8, &cert8).unwrap();
    println!("verify8 pass = {}", report8.pass);
    for (i, c) in report8.vertex_hinf.iter().enumerate() {
        println!("  vertex {} hinf margin {:.3e} pass {}", i, c.margin, c.pass);
    }
}
