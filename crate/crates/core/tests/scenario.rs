mod common;

use std::f64::consts::FRAC_1_SQRT_2;

use approx::assert_abs_diff_eq;
use flexcoop::scenario::{
    compute_gsf, load_scenario, parse_scenario, polygon_coefficients, polygon_vertices, scale_interface_limits,
    validate, ScenarioError, TransmissionLine, TransmissionNetwork,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use common::fixture;

const TWO_BUS: &str = r#"{
  "transmission": {"nodes": ["a", "b"], "lines": [{"from": "a", "to": "b", "x": 0.1, "fmax": 5}]}
}"#;

#[test]
fn minimal_document() {
    let s = load_scenario(TWO_BUS).unwrap();
    assert_eq!(s.transmission.lines.len(), 1);
    assert!(s.dsos.is_empty());
}

#[test]
fn distribution_cycle_is_rejected() {
    let mut s = fixture("feeder_overload.json");
    let dup = s.dsos[0].lines[0].clone();
    s.dsos[0].lines.push(dup);
    let r = validate(&s);
    assert!(r.violations.iter().any(|v| v.message.starts_with("radiality violated at dso dso")), "{r}");
}

#[test]
fn desk_fixture_has_three_feeders() {
    let s = fixture("ieee14_3dso.json");
    assert_eq!(s.transmission.nodes.len(), 14);
    let sizes: Vec<usize> = s.sorted_dsos().iter().map(|d| d.lines.len() + 1).collect();
    assert_eq!(sizes, vec![18, 69, 141]);
    assert!(validate(&s).is_valid());
}

#[test]
fn inverted_voltage_bounds_name_the_node() {
    let mut s = fixture("feeder_overload.json");
    let text = serde_json::to_string(&s.dsos[0].vmin).unwrap();
    assert_eq!(text, "0.9");
    s.dsos[0].vmin = serde_json::from_str(r#"{"default": 0.9, "1": 1.2}"#).unwrap();
    let r = validate(&s);
    assert_eq!(r.violations.len(), 1, "{r}");
    assert!(r.violations[0].location.contains("node[1]"));
}

#[test]
fn two_feeders_on_one_interface() {
    let mut s = fixture("two_bus_dso.json");
    let mut twin = s.dsos[0].clone();
    twin.id = "twin".into();
    s.dsos.push(twin);
    let r = validate(&s);
    assert!(r.violations.iter().any(|v| v.message.contains("duplicate interface")), "{r}");
}

#[test]
fn invalid_documents_fail_to_load() {
    let text = TWO_BUS.replace("0.1", "-0.1");
    assert!(matches!(load_scenario(&text), Err(ScenarioError::Invalid(_))));
    assert!(parse_scenario(&text).is_ok());
}

#[test]
fn square_polygon() {
    let f = polygon_coefficients(4, 1.0).unwrap();
    let angles: Vec<f64> = f.iter().map(|h| h.beta.atan2(h.alpha).to_degrees().rem_euclid(360.0)).collect();
    for (a, want) in angles.iter().zip([45.0, 135.0, 225.0, 315.0]) {
        assert_abs_diff_eq!(*a, want, epsilon = 1e-9);
    }
    for h in &f {
        assert_abs_diff_eq!(h.delta, -FRAC_1_SQRT_2, epsilon = 1e-12);
    }
    // |P| + |Q| ≤ S^max: the vertices (±S, 0), (0, ±S) are tight
    for (p, q) in polygon_vertices(4, 1.0) {
        assert_abs_diff_eq!(p.abs() + q.abs(), 1.0, epsilon = 1e-12);
        assert!(f.iter().all(|h| h.holds(p, q, 1e-12)));
    }
    assert!(polygon_coefficients(3, 1.0).is_err());
}

#[test]
fn interface_scaling() {
    let s = fixture("ieee14_3dso.json");
    assert_eq!(scale_interface_limits(&s, 1.0).unwrap(), s);
    for k in [0.5, 0.2] {
        let t = scale_interface_limits(&s, k).unwrap();
        for (a, b) in s.dsos.iter().zip(&t.dsos) {
            assert_abs_diff_eq!(b.tp_max, k * a.tp_max, epsilon = 1e-12);
            assert_abs_diff_eq!(b.tp_min, k * a.tp_min, epsilon = 1e-12);
            assert_eq!(a.tq_max, b.tq_max);
        }
        assert_eq!(t.bids, s.bids);
    }
    assert!(scale_interface_limits(&s, 0.0).is_err());
}

fn ring(n: usize, xs: &[f64], chords: &[(usize, usize)]) -> TransmissionNetwork {
    let mut lines: Vec<TransmissionLine> = (0..n)
        .map(|i| TransmissionLine {
            from: i.to_string(),
            to: ((i + 1) % n).to_string(),
            x: xs[i % xs.len()],
            fmax: 1.0,
        })
        .collect();
    for (k, &(a, b)) in chords.iter().enumerate() {
        if a % n != b % n {
            lines.push(TransmissionLine {
                from: (a % n).to_string(),
                to: (b % n).to_string(),
                x: xs[(k + 1) % xs.len()],
                fmax: 1.0,
            });
        }
    }
    TransmissionNetwork {
        nodes: (0..n).map(|i| i.to_string()).collect(),
        lines,
        interface_nodes: vec![],
        slack: Some("0".into()),
    }
}

proptest! {
    #[test]
    fn polygon_is_inscribed(sides in 4usize..40, s in 0.1f64..100.0, t in 0.0f64..std::f64::consts::TAU, r in 0.0f64..1.0) {
        let f = polygon_coefficients(sides, s).unwrap();
        for (p, q) in polygon_vertices(sides, s) {
            prop_assert!(f.iter().all(|h| h.holds(p, q, 1e-9 * s)));
            prop_assert!(((p * p + q * q).sqrt() - s).abs() <= 1e-9 * s);
        }
        // points of the polygon lie in the disc; the disc of radius cos(π/M)·S lies in the polygon
        let inner = s * (std::f64::consts::PI / sides as f64).cos();
        let (p, q) = (r * inner * t.cos(), r * inner * t.sin());
        prop_assert!(f.iter().all(|h| h.holds(p, q, 1e-9 * s)));
        let (p, q) = (1.001 * s * t.cos(), 1.001 * s * t.sin());
        prop_assert!(!f.iter().all(|h| h.holds(p, q, 0.0)));
    }

    /// Flows from the shift factors equal those of a DC power flow solved
    /// directly on the reduced susceptance system.
    #[test]
    fn shift_factors_match_dc_power_flow(
        n in 2usize..8,
        xs in prop::collection::vec(0.05f64..1.0, 1..8),
        chords in prop::collection::vec((0usize..8, 0usize..8), 0..4),
        inj in prop::collection::vec(-10.0f64..10.0, 8),
    ) {
        let t = ring(n, &xs, &chords);
        let g = compute_gsf(&t).unwrap();
        let mut b = DMatrix::<f64>::zeros(n, n);
        let idx = |s: &str| s.parse::<usize>().unwrap();
        for l in &t.lines {
            let (i, j) = (idx(&l.from), idx(&l.to));
            b[(i, i)] += 1.0 / l.x;
            b[(j, j)] += 1.0 / l.x;
            b[(i, j)] -= 1.0 / l.x;
            b[(j, i)] -= 1.0 / l.x;
        }
        let p: Vec<f64> = inj[..n].to_vec();
        let reduced = b.view((1, 1), (n - 1, n - 1)).into_owned();
        let theta = reduced.lu().solve(&DVector::from_column_slice(&p[1..])).unwrap();
        let angle = |k: usize| if k == 0 { 0.0 } else { theta[k - 1] };
        let flows = g.flows(&p);
        for (k, l) in t.lines.iter().enumerate() {
            let want = (angle(idx(&l.from)) - angle(idx(&l.to))) / l.x;
            prop_assert!((flows[k] - want).abs() <= 1e-9 * (1.0 + want.abs()));
        }
        prop_assert!(g.x.iter().all(|row| row[0] == 0.0));
    }
}
