//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string; the page
//! parses it and draws the curves on a canvas. Detunings are in units of
//! γ_s and Fisher information in γ_s⁻², as in the command-line tool.

use fisherspec::fisher::FisherEvaluator;
use fisherspec::medium::PhysicalConstants;
use fisherspec::{
    copies_fisher, fisher_curve, noon_state, DetuningGrid, Error, Medium, ProbeState, PsoConfig,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest photon number the page offers; beyond this a swarm run stops
/// being interactive.
pub const DEMO_N_MAX: usize = 10;

#[derive(Debug, Serialize, PartialEq)]
pub struct ArmCurves {
    pub delta: Vec<f64>,
    pub transmissivity: Vec<f64>,
    pub phase: Vec<f64>,
    pub chi_re: Vec<f64>,
    pub chi_im: Vec<f64>,
}

#[derive(Debug, Serialize, PartialEq)]
pub struct Curve {
    pub label: String,
    pub fisher: Vec<f64>,
    pub peak: f64,
    pub peak_delta: f64,
}

#[derive(Debug, Serialize, PartialEq)]
pub struct FisherCurves {
    pub delta: Vec<f64>,
    pub curves: Vec<Curve>,
}

#[derive(Debug, Serialize, PartialEq)]
pub struct Optimized {
    pub coefficients: Vec<f64>,
    pub peak: f64,
    pub peak_delta: f64,
    pub trace: Vec<f64>,
    pub delta: Vec<f64>,
    pub fisher: Vec<f64>,
    /// Peak of N independent single photons on the same grid, for scale.
    pub single_photons_peak: f64,
}

fn setup(density: f64, min: f64, max: f64, points: usize) -> Result<(Medium, DetuningGrid), Error> {
    let m = Medium::sodium_d1(density)?;
    let grid = DetuningGrid::in_linewidths(&m, min, max, points)?;
    Ok((m, grid))
}

fn check_n(n: usize) -> Result<(), Error> {
    if n == 0 || n > DEMO_N_MAX {
        return Err(Error::InvalidState(format!(
            "photon number must be between 1 and {DEMO_N_MAX}, got {n}"
        )));
    }
    Ok(())
}

fn scaled(m: &Medium, deltas: &[f64]) -> Vec<f64> {
    deltas.iter().map(|d| d / m.gamma_s).collect()
}

fn curve(label: &str, m: &Medium, c: &fisherspec::FisherCurve) -> Curve {
    let g2 = m.gamma_s * m.gamma_s;
    Curve {
        label: label.to_string(),
        fisher: c.values.iter().map(|v| v * g2).collect(),
        peak: c.peak_value * g2,
        peak_delta: c.peak_delta / m.gamma_s,
    }
}

/// Susceptibility, transmissivity and phase of the sodium D1 cell.
pub fn arm_curves(density: f64, min: f64, max: f64, points: usize) -> Result<ArmCurves, Error> {
    let (m, grid) = setup(density, min, max, points)?;
    let mut out = ArmCurves {
        delta: scaled(&m, grid.deltas()),
        transmissivity: Vec::with_capacity(points),
        phase: Vec::with_capacity(points),
        chi_re: Vec::with_capacity(points),
        chi_im: Vec::with_capacity(points),
    };
    for &d in grid.deltas() {
        let chi = m.susceptibility(d);
        out.chi_re.push(chi.chi_re);
        out.chi_im.push(chi.chi_im);
        // An opaque cell transmits nothing; plot it as T = 0 with the
        // phase still defined by χ′.
        let (t, phi) = match m.arm_response(d) {
            Ok(arm) => (arm.transmissivity, arm.phase),
            Err(Error::Opaque { .. }) => {
                let omega = m.omega0 + d;
                (
                    0.0,
                    -chi.chi_re * omega * m.length / (2.0 * PhysicalConstants::CODATA.c),
                )
            }
            Err(e) => return Err(e),
        };
        out.transmissivity.push(t);
        out.phase.push(phi);
    }
    Ok(out)
}

/// Fisher curves of the reference probes with N photons.
pub fn reference_curves(
    density: f64,
    n: usize,
    min: f64,
    max: f64,
    points: usize,
) -> Result<FisherCurves, Error> {
    check_n(n)?;
    let (m, grid) = setup(density, min, max, points)?;
    let single = fisher_curve(&ProbeState::basis(1, 0)?, &m, &grid)?;
    let noon1 = fisher_curve(&noon_state(1)?, &m, &grid)?;
    let curves = vec![
        curve("single photons", &m, &copies_fisher(&single, n)?),
        curve("NOON", &m, &fisher_curve(&noon_state(n)?, &m, &grid)?),
        curve("NOON copies", &m, &copies_fisher(&noon1, n)?),
    ];
    Ok(FisherCurves {
        delta: scaled(&m, grid.deltas()),
        curves,
    })
}

/// Swarm search for the best real N-photon probe on the given grid.
pub fn optimize(
    density: f64,
    n: usize,
    seed: u64,
    iterations: usize,
    min: f64,
    max: f64,
    points: usize,
) -> Result<Optimized, Error> {
    check_n(n)?;
    let (m, grid) = setup(density, min, max, points)?;
    let mut config = PsoConfig::new(n, &m, seed);
    config.objective_grid = grid.clone();
    config.n_iterations = iterations;
    let result = fisherspec::optimize_state(&m, &config)?;
    let best = FisherEvaluator::new(&result.best_state, &m)?.curve(&grid)?;
    let single = fisher_curve(&ProbeState::basis(1, 0)?, &m, &grid)?;
    let g2 = m.gamma_s * m.gamma_s;
    Ok(Optimized {
        coefficients: result.best_state.coeffs().iter().map(|c| c.re).collect(),
        peak: result.best_objective * g2,
        peak_delta: result.best_delta / m.gamma_s,
        trace: result.objective_trace.iter().map(|v| v * g2).collect(),
        delta: scaled(&m, grid.deltas()),
        fisher: best.values.iter().map(|v| v * g2).collect(),
        single_photons_peak: n as f64 * single.peak_value * g2,
    })
}

fn to_js<T: Serialize>(r: Result<T, Error>) -> Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = armCurves)]
pub fn arm_curves_js(density: f64, min: f64, max: f64, points: usize) -> Result<String, JsError> {
    to_js(arm_curves(density, min, max, points))
}

#[wasm_bindgen(js_name = referenceCurves)]
pub fn reference_curves_js(
    density: f64,
    n: usize,
    min: f64,
    max: f64,
    points: usize,
) -> Result<String, JsError> {
    to_js(reference_curves(density, n, min, max, points))
}

#[wasm_bindgen(js_name = optimizeProbe)]
pub fn optimize_js(
    density: f64,
    n: usize,
    seed: u32,
    iterations: usize,
    min: f64,
    max: f64,
    points: usize,
) -> Result<String, JsError> {
    to_js(optimize(
        density,
        n,
        u64::from(seed),
        iterations,
        min,
        max,
        points,
    ))
}
