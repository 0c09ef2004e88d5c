//! Browser demo: envelope, shock curve and solution slices computed in wasm
//! and drawn on a canvas by `www/main.js`.
//!
//! The exported functions return JSON strings; [`plot`] holds the same
//! operations as plain Rust so they can be tested natively.

use wasm_bindgen::prelude::*;

pub mod plot;

fn to_js<T: serde::Serialize>(r: Result<T, shockfit::Error>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

fn spec(family: &str, order: f64, correction: f64) -> Result<plot::ProfileSpec, JsError> {
    plot::ProfileSpec::parse(family, order, correction).map_err(|e| JsError::new(&e.to_string()))
}

/// Cusp edges `x_plus`, `x_minus` for `0 < t - t* <= tau_max`.
#[wasm_bindgen]
pub fn envelope_curve(family: &str, order: f64, correction: f64, tau_max: f64, samples: usize) -> Result<String, JsError> {
    let s = spec(family, order, correction)?;
    to_js(plot::envelope_curve(&s, tau_max, samples))
}

/// Shock position from blowup up to the end of the constructed curve.
#[wasm_bindgen]
pub fn shock_curve(family: &str, order: f64, correction: f64) -> Result<String, JsError> {
    let s = spec(family, order, correction)?;
    to_js(plot::shock_curve(&s))
}

/// Entropy solution `u(t, x)` along `|x - x*| <= half_width` at `t - t* = tau`.
#[wasm_bindgen]
pub fn field_slice(family: &str, order: f64, correction: f64, tau: f64, half_width: f64, samples: usize) -> Result<String, JsError> {
    let s = spec(family, order, correction)?;
    to_js(plot::field_slice(&s, tau, half_width, samples))
}
