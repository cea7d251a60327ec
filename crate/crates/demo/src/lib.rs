//! Browser bindings for the wave-equation submodeling demo.
//!
//! The crate builds both as a `cdylib` for `wasm32-unknown-unknown` (via
//! `wasm-pack build --target web`) and as a native `rlib` so the workspace
//! test suite covers the same code paths without a wasm toolchain.
//!
//! Three operations are exposed to the page:
//! 1. solve the full model for a chosen source,
//! 2. drive the zone-of-interest submodel from the solved boundary trace and
//!    compare it with the restricted full solution,
//! 3. compute the pointwise amplitude map of the zone.

use wasm_bindgen::prelude::*;

use wavezoom::config::RunConfig;
use wavezoom::fem::{solve_full, solve_submodel};
use wavezoom::grid::{build_grid, sample_on_subboundary, sample_on_subgrid, FieldSeries};
use wavezoom::lhs::ParamVector;
use wavezoom::metrics::max_amplitude;

// Errors cross the ABI as strings so the same code runs natively in tests;
// `JsValue` itself cannot be constructed outside a wasm runtime.
fn err_to_js(e: wavezoom::Error) -> String {
    e.to_string()
}

/// One solved configuration: the full field, its restriction to the zone of
/// interest, and the trace-driven submodel field.
#[wasm_bindgen]
pub struct Simulation {
    full: FieldSeries,
    truth: FieldSeries,
    zoomed: FieldSeries,
}

#[wasm_bindgen]
impl Simulation {
    /// Solve the node-aligned reference setup for a source at
    /// `(x_s, y_s)` with angular frequency `omega`, over `n_t` time steps.
    #[wasm_bindgen(constructor)]
    pub fn new(omega: f64, x_s: f64, y_s: f64, n_t: usize) -> Result<Simulation, String> {
        let mut cfg = RunConfig::aligned();
        cfg.n_t = n_t;
        cfg.validate().map_err(err_to_js)?;
        let time = cfg.time().map_err(err_to_js)?;
        let grid = build_grid(cfg.full).map_err(err_to_js)?;
        let subgrid = build_grid(cfg.sub).map_err(err_to_js)?;
        let p = ParamVector { omega, x_s, y_s };
        let full = solve_full(&p, &grid, &time, cfg.c, Some(&cfg.sub)).map_err(err_to_js)?;
        let truth = sample_on_subgrid(&full, &cfg.sub).map_err(err_to_js)?;
        let trace = sample_on_subboundary(&full, &cfg.sub).map_err(err_to_js)?;
        let zoomed = solve_submodel(&trace, &subgrid, &time, cfg.c).map_err(err_to_js)?;
        Ok(Simulation { full, truth, zoomed })
    }

    pub fn n_t(&self) -> usize {
        self.full.n_t
    }

    pub fn full_nx(&self) -> usize {
        self.full.spec.n_x
    }

    pub fn full_ny(&self) -> usize {
        self.full.spec.n_y
    }

    pub fn sub_nx(&self) -> usize {
        self.truth.spec.n_x
    }

    pub fn sub_ny(&self) -> usize {
        self.truth.spec.n_y
    }

    /// Row-major `[n_y, n_x]` frame of the full field at time index `t`.
    pub fn full_frame(&self, t: usize) -> Vec<f64> {
        self.full.frame(t.min(self.full.n_t - 1)).to_vec()
    }

    /// Restricted full solution on the zone of interest at time index `t`.
    pub fn truth_frame(&self, t: usize) -> Vec<f64> {
        self.truth.frame(t.min(self.truth.n_t - 1)).to_vec()
    }

    /// Trace-driven submodel solution on the zone of interest at `t`.
    pub fn zoom_frame(&self, t: usize) -> Vec<f64> {
        self.zoomed.frame(t.min(self.zoomed.n_t - 1)).to_vec()
    }

    /// Largest absolute value over the whole full-field trajectory, for a
    /// shared color scale.
    pub fn full_scale(&self) -> f64 {
        self.full.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest absolute value over the zone-of-interest trajectory.
    pub fn sub_scale(&self) -> f64 {
        self.truth.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Relative L-infinity mismatch between the submodel and the restricted
    /// full solution; at node-aligned grids this sits at solver round-off.
    pub fn zoom_error(&self) -> f64 {
        let denom = self.sub_scale();
        if denom == 0.0 {
            return 0.0;
        }
        self.zoomed
            .values
            .iter()
            .zip(&self.truth.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            / denom
    }

    /// Pointwise amplitude map `|max_t u - min_t u|` on the zone of
    /// interest, row-major `[n_y, n_x]`.
    pub fn amplitude_map(&self) -> Vec<f64> {
        max_amplitude(&self.truth)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulation_exposes_consistent_shapes() {
        let sim = Simulation::new(5000.0, -1.85, -0.65, 40).unwrap();
        assert_eq!(sim.n_t(), 40);
        assert_eq!(sim.full_frame(0).len(), sim.full_nx() * sim.full_ny());
        assert_eq!(sim.truth_frame(5).len(), sim.sub_nx() * sim.sub_ny());
        assert_eq!(sim.zoom_frame(5).len(), sim.sub_nx() * sim.sub_ny());
        assert_eq!(sim.amplitude_map().len(), sim.sub_nx() * sim.sub_ny());
        assert!(sim.full_scale() > 0.0);
    }

    #[test]
    fn zoom_error_is_round_off_on_aligned_grids() {
        let sim = Simulation::new(5000.0, -1.85, -0.65, 60).unwrap();
        assert!(sim.zoom_error() <= 1e-8, "zoom error {}", sim.zoom_error());
    }

    #[test]
    fn invalid_source_is_reported() {
        // A source inside the zone of interest is rejected in exclusion mode.
        assert!(Simulation::new(5000.0, 1.0, 0.0, 20).is_err());
    }

    #[test]
    fn frame_index_is_clamped() {
        let sim = Simulation::new(5000.0, -1.85, -0.65, 10).unwrap();
        assert_eq!(sim.full_frame(999), sim.full_frame(9));
    }
}
