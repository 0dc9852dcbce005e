//! WebAssembly bindings for the static demo page.
//!
//! Each export takes a kernel spec as JSON plus grid parameters and returns a
//! JSON document for the page to plot.  The same functions are callable from
//! native Rust, which is how the tests exercise them.

use gps_core::error::GpsError;
use gps_core::kernels::{KernelSpec, PinningModel};
use gps_core::ldp::{rate_and_free_energy, Regime};
use gps_core::phase::{gamma_c_of, scan_transitions, TransitionRecord};
use gps_core::tilt::{solve, DEFAULT_TOL};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Upper bound on grid sizes accepted from the page.
pub const MAX_POINTS: usize = 4096;

/// Bisection tolerance for located transitions.
const SCAN_TOL: f64 = 1e-8;

#[derive(Debug, Serialize)]
pub struct CurvePoint {
    pub x: f64,
    /// `None` where the solver failed; the page leaves a gap.
    pub y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
}

#[derive(Debug, Serialize)]
pub struct Curve {
    pub kernel_hash: String,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Serialize)]
pub struct Scan {
    pub kernel_hash: String,
    pub gamma: f64,
    pub transitions: Vec<TransitionRecord>,
}

fn model(spec_json: &str) -> Result<(PinningModel, String), GpsError> {
    let spec = KernelSpec::from_json(spec_json)?;
    Ok((PinningModel::from_spec(&spec)?, spec.hash()))
}

fn grid(lo: f64, hi: f64, points: usize, log: bool) -> Result<Vec<f64>, GpsError> {
    if !(lo.is_finite() && hi.is_finite() && hi > lo) || !(2..=MAX_POINTS).contains(&points) || (log && lo <= 0.0) {
        return Err(GpsError::Domain(format!("invalid grid [{lo}, {hi}] with {points} points")));
    }
    let (a, b) = if log { (lo.ln(), hi.ln()) } else { (lo, hi) };
    Ok((0..points)
        .map(|i| {
            let x = a + (b - a) * i as f64 / (points - 1) as f64;
            if log {
                x.exp()
            } else {
                x
            }
        })
        .collect())
}

/// Critical aspect ratio `γ_c` on an `h` grid.
pub fn gamma_c_curve(spec_json: &str, h_lo: f64, h_hi: f64, points: usize) -> Result<Curve, GpsError> {
    let (m, kernel_hash) = model(spec_json)?;
    let points = grid(h_lo, h_hi, points, h_lo > 0.0)?
        .into_iter()
        .map(|h| CurvePoint { x: h, y: gamma_c_of(&m, h).ok(), regime: None })
        .collect();
    Ok(Curve { kernel_hash, points })
}

/// Free energy against the aspect ratio at fixed `h`, with the regime of each point.
pub fn free_energy_curve(spec_json: &str, h: f64, gamma_lo: f64, gamma_hi: f64, points: usize) -> Result<Curve, GpsError> {
    let (m, kernel_hash) = model(spec_json)?;
    let (k, h_eff) = m.at(h)?;
    let t = solve(&k, h_eff, DEFAULT_TOL)?;
    let points = grid(gamma_lo, gamma_hi, points, true)?
        .into_iter()
        .map(|gamma| match rate_and_free_energy(&t, gamma, DEFAULT_TOL) {
            Ok(r) => CurvePoint { x: gamma, y: Some(r.free_energy), regime: Some(r.regime) },
            Err(_) => CurvePoint { x: gamma, y: None, regime: None },
        })
        .collect();
    Ok(Curve { kernel_hash, points })
}

/// Transitions in `h` at fixed aspect ratio.
pub fn phase_scan(spec_json: &str, gamma: f64, h_lo: f64, h_hi: f64, points: usize) -> Result<Scan, GpsError> {
    let (m, kernel_hash) = model(spec_json)?;
    if !(2..=MAX_POINTS).contains(&points) {
        return Err(GpsError::Domain(format!("grid of {points} points is outside 2..={MAX_POINTS}")));
    }
    let transitions = scan_transitions(&m, gamma, (h_lo, h_hi), points, SCAN_TOL)?;
    Ok(Scan { kernel_hash, gamma, transitions })
}

fn to_js<T: Serialize>(r: Result<T, GpsError>) -> Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = gammaCCurve)]
pub fn gamma_c_curve_js(spec_json: &str, h_lo: f64, h_hi: f64, points: usize) -> Result<String, JsError> {
    to_js(gamma_c_curve(spec_json, h_lo, h_hi, points))
}

#[wasm_bindgen(js_name = freeEnergyCurve)]
pub fn free_energy_curve_js(spec_json: &str, h: f64, gamma_lo: f64, gamma_hi: f64, points: usize) -> Result<String, JsError> {
    to_js(free_energy_curve(spec_json, h, gamma_lo, gamma_hi, points))
}

#[wasm_bindgen(js_name = phaseScan)]
pub fn phase_scan_js(spec_json: &str, gamma: f64, h_lo: f64, h_hi: f64, points: usize) -> Result<String, JsError> {
    to_js(phase_scan(spec_json, gamma, h_lo, h_hi, points))
}
