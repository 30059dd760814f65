//! Shared in-crate test fixture: a 3-bus desk-scale network with one
//! synchronous and one inverter unit. Mirrors the bundled scenario data.

use super::dg::test_params::{ig_params, sg_params};
use super::types::*;

pub(crate) fn desk3() -> NetworkDescription {
    NetworkDescription {
        s_base_mva: 1.0,
        buses: vec![
            Bus {
                id: "b1".into(),
                v_nom_kv: 4.8,
            },
            Bus {
                id: "b2".into(),
                v_nom_kv: 2.4,
            },
            Bus {
                id: "b3".into(),
                v_nom_kv: 4.8,
            },
        ],
        lines: vec![
            Line {
                id: "l12".into(),
                from: "b1".into(),
                to: "b2".into(),
                r_pu: 0.15,
                x_pu: 0.5,
                b_shunt_pu: 0.0,
            },
            Line {
                id: "l23".into(),
                from: "b2".into(),
                to: "b3".into(),
                r_pu: 0.2,
                x_pu: 0.6,
                b_shunt_pu: 0.0,
            },
        ],
        switches: vec![
            Switch {
                id: "ssw1".into(),
                kind: SwitchKind::Ssw,
                from: "b2".into(),
                to: "b3".into(),
                closed: true,
                r_pu: 0.2,
                x_pu: 0.6,
            },
            Switch {
                id: "tsw1".into(),
                kind: SwitchKind::Tsw,
                from: "b1".into(),
                to: "b3".into(),
                closed: false,
                r_pu: 0.15,
                x_pu: 0.45,
            },
        ],
        sg_units: vec![SgUnit {
            id: "sg1".into(),
            bus: "b2".into(),
            p_set_mw: 0.3,
            v_set_pu: 1.0,
            params: sg_params(),
        }],
        ig_units: vec![IgUnit {
            id: "ig1".into(),
            bus: "b3".into(),
            p_set_mw: 0.12,
            v_set_pu: 1.0,
            params: ig_params(),
        }],
        loads: vec![
            LoadUnit {
                id: "ld2".into(),
                bus: "b2".into(),
                zip: ZipLoad::from_weights(0.35, 0.12, [1.5, -2.3, 1.8], [7.4, -12.0, 5.6])
                    .unwrap(),
            },
            LoadUnit {
                id: "ld3".into(),
                bus: "b3".into(),
                zip: ZipLoad::from_weights(0.25, 0.1, [1.5, -2.3, 1.8], [7.4, -12.0, 5.6])
                    .unwrap(),
            },
        ],
        slack: "b1".into(),
    }
}
