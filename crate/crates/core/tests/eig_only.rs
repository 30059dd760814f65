use fvcgrid_core::netmodel::*;
use fvcgrid_core::fvc::UncertaintySpec;
use std::collections::BTreeMap;

#[test]
fn eigs_only() {
    let json = std::fs::read_to_string(
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/desk3.json"),
    ).unwrap();
    let scenario = fvcgrid_core::scenario_io::parse_scenario_bytes(json.as_bytes()).unwrap();
    let net = scenario.network;
    let states = net.initial_switch_states();
    let sp = net.default_setpoints();
    let op = solve_steady_state(&net, &states, &sp).unwrap();
    let mut post = states.clone();
    post.insert("tsw1".into(), true);
    let inputs = EventModelInputs { network: &net, pre_states: &states, post_states: &post, setpoints: &sp };
    let model = build_event_model(&inputs, &op, &ParamScales::default()).unwrap();
    for (e, lbl) in fvcgrid_core::linalg::eigenvalues(&model.a_dn).iter().zip(model.state_labels.iter()) {
        println!("   lambda = {:12.5} {:+12.5}j   (state slot {} / {})", e.re, e.im, lbl.unit, lbl.state);
    }
    let _ = UncertaintySpec::default();
    let _: BTreeMap<String, bool> = BTreeMap::new();
}
