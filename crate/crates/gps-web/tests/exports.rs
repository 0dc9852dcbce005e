use gps_web::{free_energy_curve, gamma_c_curve, phase_scan};

const FLAT: &str = r#"{"family": "gamma_ratio", "parameters": {"alpha": 1.5}}"#;
const DOUBLE: &str = r#"{"family": "modified_gamma_ratio", "parameters": {"alpha": 1.5}, "overrides": [{"site": 3, "value": 0.01}]}"#;

#[test]
fn flat_kernel_has_constant_critical_ratio() {
    let c = gamma_c_curve(FLAT, 0.1, 5.0, 20).unwrap();
    assert_eq!(c.points.len(), 20);
    assert!(c.points.iter().all(|p| (p.y.unwrap() - 2.0).abs() < 1e-6));
}

#[test]
fn free_energy_is_nondecreasing_and_flat_past_the_critical_ratio() {
    let c = free_energy_curve(FLAT, 1.0, 0.5, 4.0, 30).unwrap();
    let f: Vec<f64> = c.points.iter().map(|p| p.y.unwrap()).collect();
    assert!(f.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12)));
    let past: Vec<f64> = c.points.iter().filter(|p| p.x > 2.0).map(|p| p.y.unwrap()).collect();
    assert!(past.iter().all(|v| (v - past[0]).abs() <= 1e-12 * past[0]));
    let json = serde_json::to_string(&c).unwrap();
    assert!(json.contains("\"regime\""));
}

#[test]
fn scan_finds_both_crossings() {
    let s = phase_scan(DOUBLE, 2.2, 1e-3, 6.0, 256).unwrap();
    assert_eq!(s.transitions.len(), 2);
}

#[test]
fn bad_input_is_an_error() {
    assert!(gamma_c_curve("{", 0.1, 1.0, 5).is_err());
    assert!(gamma_c_curve(FLAT, 1.0, 0.1, 5).is_err());
    assert!(free_energy_curve(FLAT, 1.0, 0.5, 4.0, 1_000_000).is_err());
}
