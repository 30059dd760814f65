//! Nodal admittance stamping and topology queries.

use super::types::{NetModelError, NetworkDescription, Result};
use crate::linalg::{dq_expand, CMatrix};
use nalgebra::{Complex, DMatrix};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// A branch as seen by the stamping routine: closed switches and lines.
#[derive(Debug, Clone, Copy)]
struct Branch {
    from: usize,
    to: usize,
    y_series: Complex<f64>,
    y_shunt_half: Complex<f64>,
}

fn active_branches(
    network: &NetworkDescription,
    switch_states: &BTreeMap<String, bool>,
) -> Result<Vec<Branch>> {
    for sw in &network.switches {
        if !switch_states.contains_key(&sw.id) {
            return Err(NetModelError::Validation(format!(
                "switch_states is missing switch {:?}",
                sw.id
            )));
        }
    }
    for id in switch_states.keys() {
        if network.switch_by_id(id).is_none() {
            return Err(NetModelError::Validation(format!(
                "switch_states references unknown switch {id:?}"
            )));
        }
    }
    let mut out = Vec::new();
    for l in &network.lines {
        let z = Complex::new(l.r_pu, l.x_pu);
        out.push(Branch {
            from: network.bus_index(&l.from).unwrap(),
            to: network.bus_index(&l.to).unwrap(),
            y_series: z.inv(),
            y_shunt_half: Complex::new(0.0, l.b_shunt_pu / 2.0),
        });
    }
    for s in &network.switches {
        if switch_states[&s.id] {
            let z = Complex::new(s.r_pu, s.x_pu);
            out.push(Branch {
                from: network.bus_index(&s.from).unwrap(),
                to: network.bus_index(&s.to).unwrap(),
                y_series: z.inv(),
                y_shunt_half: Complex::new(0.0, 0.0),
            });
        }
    }
    Ok(out)
}

/// Buses connected to the slack through closed branches, sorted by index.
pub fn energized_buses(
    network: &NetworkDescription,
    switch_states: &BTreeMap<String, bool>,
) -> Result<BTreeSet<usize>> {
    let branches = active_branches(network, switch_states)?;
    let n = network.buses.len();
    let mut adj = vec![Vec::new(); n];
    for b in &branches {
        adj[b.from].push(b.to);
        adj[b.to].push(b.from);
    }
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    let slack = network.slack_index();
    seen.insert(slack);
    queue.push_back(slack);
    while let Some(i) = queue.pop_front() {
        for &j in &adj[i] {
            if seen.insert(j) {
                queue.push_back(j);
            }
        }
    }
    Ok(seen)
}

/// Complex nodal admittance over an ordered bus subset. Branches with an
/// endpoint outside the subset are skipped entirely (a branch into a dead
/// island carries no current because the island never energizes).
pub fn stamp_complex(
    network: &NetworkDescription,
    switch_states: &BTreeMap<String, bool>,
    frame_buses: &[usize],
) -> Result<CMatrix> {
    let branches = active_branches(network, switch_states)?;
    let pos: BTreeMap<usize, usize> = frame_buses
        .iter()
        .enumerate()
        .map(|(p, &b)| (b, p))
        .collect();
    let n = frame_buses.len();
    let mut y = CMatrix::zeros(n, n);
    for b in &branches {
        match (pos.get(&b.from), pos.get(&b.to)) {
            (Some(&i), Some(&j)) => {
                y[(i, i)] += b.y_series + b.y_shunt_half;
                y[(j, j)] += b.y_series + b.y_shunt_half;
                y[(i, j)] -= b.y_series;
                y[(j, i)] -= b.y_series;
            }
            _ => continue,
        }
    }
    Ok(y)
}

/// A single configuration's admittance: complex nodal matrix plus its real
/// dq expansion, on the full declared bus set.
#[derive(Debug, Clone)]
pub struct BuiltAdmittance {
    pub complex: CMatrix,
    pub dq: DMatrix<f64>,
}

/// Builds the full-network admittance for one switch configuration and
/// reports any buses cut off from the slack.
pub fn build_admittance(
    network: &NetworkDescription,
    switch_states: &BTreeMap<String, bool>,
) -> Result<BuiltAdmittance> {
    let energized = energized_buses(network, switch_states)?;
    if energized.len() != network.buses.len() {
        let island: Vec<String> = network
            .buses
            .iter()
            .enumerate()
            .filter(|(i, _)| !energized.contains(i))
            .map(|(_, b)| b.id.clone())
            .collect();
        return Err(NetModelError::Configuration {
            msg: "configuration leaves buses disconnected from the slack".into(),
            island,
        });
    }
    let all: Vec<usize> = (0..network.buses.len()).collect();
    let complex = stamp_complex(network, switch_states, &all)?;
    let dq = dq_expand(&complex);
    Ok(BuiltAdmittance { complex, dq })
}

/// Pre/post-event admittances on a common bus frame.
///
/// `frame_buses` must list the buses energized before or after the event
/// (union), slack included; branches touching buses outside the frame are
/// dead on both sides of the event and drop out.
#[derive(Debug, Clone)]
pub struct AdmittancePair {
    pub frame_buses: Vec<usize>,
    pub y_before: CMatrix,
    pub y_after: CMatrix,
    pub y_before_dq: DMatrix<f64>,
    pub y_after_dq: DMatrix<f64>,
    pub delta_dq: DMatrix<f64>,
}

impl AdmittancePair {
    pub fn build(
        network: &NetworkDescription,
        pre_states: &BTreeMap<String, bool>,
        post_states: &BTreeMap<String, bool>,
        frame_buses: &[usize],
    ) -> Result<Self> {
        let y_before = stamp_complex(network, pre_states, frame_buses)?;
        let y_after = stamp_complex(network, post_states, frame_buses)?;
        for (name, y) in [("Y_B", &y_before), ("Y_A", &y_after)] {
            let asym = (y - y.transpose()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if asym > 1e-9 {
                return Err(NetModelError::Model {
                    msg: format!("{name} is not symmetric (reciprocal network violated)"),
                });
            }
        }
        let y_before_dq = dq_expand(&y_before);
        let y_after_dq = dq_expand(&y_after);
        let delta_dq = &y_after_dq - &y_before_dq;
        Ok(AdmittancePair {
            frame_buses: frame_buses.to_vec(),
            y_before,
            y_after,
            y_before_dq,
            y_after_dq,
            delta_dq,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::types::{Bus, Line, Switch, SwitchKind};
    use approx::assert_relative_eq;
    use nalgebra::Complex;

    fn two_bus_switchable() -> NetworkDescription {
        NetworkDescription {
            s_base_mva: 1.0,
            buses: vec![
                Bus {
                    id: "b1".into(),
                    v_nom_kv: 4.8,
                },
                Bus {
                    id: "b2".into(),
                    v_nom_kv: 4.8,
                },
            ],
            lines: vec![],
            switches: vec![Switch {
                id: "sw".into(),
                kind: SwitchKind::Ssw,
                from: "b1".into(),
                to: "b2".into(),
                closed: true,
                r_pu: 1.0 / 26.0,
                x_pu: 5.0 / 26.0,
            }],
            sg_units: vec![],
            ig_units: vec![],
            loads: vec![],
            slack: "b1".into(),
        }
    }

    #[test]
    fn single_branch_stamp() {
        // y = 1/(r + jx) with r = 1/26, x = 5/26  ->  y = 1 - j5
        let n = two_bus_switchable();
        let states = n.initial_switch_states();
        let built = build_admittance(&n, &states).unwrap();
        let y = built.complex[(0, 0)];
        assert_relative_eq!(y.re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(y.im, -5.0, epsilon = 1e-12);
        assert_relative_eq!(built.complex[(0, 1)].re, -1.0, epsilon = 1e-12);
        assert_relative_eq!(built.complex[(0, 1)].im, 5.0, epsilon = 1e-12);
        assert_relative_eq!(built.complex[(1, 1)].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn open_switch_is_configuration_error() {
        let n = two_bus_switchable();
        let mut states = n.initial_switch_states();
        states.insert("sw".into(), false);
        match build_admittance(&n, &states) {
            Err(NetModelError::Configuration { island, .. }) => {
                assert_eq!(island, vec!["b2".to_string()]);
            }
            other => panic!("expected ConfigurationError, got {other:?}"),
        }
        // The stamp itself is an open circuit.
        let y = stamp_complex(&n, &states, &[0, 1]).unwrap();
        assert_eq!(y[(0, 0)], Complex::new(0.0, 0.0));
    }

    #[test]
    fn missing_switch_state_rejected() {
        let n = two_bus_switchable();
        let states = BTreeMap::new();
        assert!(build_admittance(&n, &states).is_err());
    }

    /// Brute-force stamp oracle built straight from the branch list.
    fn oracle_stamp(
        branches: &[(usize, usize, Complex<f64>)],
        n: usize,
    ) -> CMatrix {
        let mut y = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    for &(f, t, ys) in branches {
                        if f == i || t == i {
                            y[(i, i)] += ys;
                        }
                    }
                } else {
                    for &(f, t, ys) in branches {
                        if (f, t) == (i, j) || (f, t) == (j, i) {
                            y[(i, j)] -= ys;
                        }
                    }
                }
            }
        }
        y
    }

    #[test]
    fn three_bus_radial_matches_oracle() {
        let mk_line = |id: &str, from: &str, to: &str, r: f64, x: f64| Line {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            r_pu: r,
            x_pu: x,
            b_shunt_pu: 0.0,
        };
        let n = NetworkDescription {
            s_base_mva: 1.0,
            buses: ["b1", "b2", "b3"]
                .iter()
                .map(|id| Bus {
                    id: (*id).into(),
                    v_nom_kv: 4.8,
                })
                .collect(),
            lines: vec![
                mk_line("l12", "b1", "b2", 0.02, 0.06),
                mk_line("l23", "b2", "b3", 0.03, 0.05),
            ],
            switches: vec![],
            sg_units: vec![],
            ig_units: vec![],
            loads: vec![],
            slack: "b1".into(),
        };
        let built = build_admittance(&n, &BTreeMap::new()).unwrap();
        let branches = vec![
            (0usize, 1usize, Complex::new(0.02, 0.06).inv()),
            (1, 2, Complex::new(0.03, 0.05).inv()),
        ];
        let oracle = oracle_stamp(&branches, 3);
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(
                    built.complex[(i, j)].re,
                    oracle[(i, j)].re,
                    epsilon = 1e-12
                );
                assert_relative_eq!(
                    built.complex[(i, j)].im,
                    oracle[(i, j)].im,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn identical_states_give_zero_delta() {
        let n = two_bus_switchable();
        let states = n.initial_switch_states();
        let pair = AdmittancePair::build(&n, &states, &states, &[0, 1]).unwrap();
        assert_eq!(pair.delta_dq.iter().fold(0.0f64, |a, &x| a.max(x.abs())), 0.0);
    }
}
