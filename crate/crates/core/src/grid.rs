//! Cartesian grids, node numbering, boundary enumeration, and restriction
//! between the full domain and the zone of interest.
//!
//! Node numbering is row-major, `j * n_x + i`. Boundary cycles start at the
//! lower-left corner and run counterclockwise. Both conventions are part of
//! the persistence format and must not change.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Axis-aligned rectangular grid of `n_x * n_y` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub n_x: usize,
    pub n_y: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, n_x: usize, n_y: usize) -> Result<Self> {
        let spec = GridSpec { x_min, x_max, y_min, y_max, n_x, n_y };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min < self.x_max) || !(self.y_min < self.y_max) {
            return Err(Error::config(format!(
                "degenerate extents: [{}, {}] x [{}, {}]",
                self.x_min, self.x_max, self.y_min, self.y_max
            )));
        }
        if self.n_x < 2 || self.n_y < 2 {
            return Err(Error::config(format!(
                "node counts must be >= 2 per axis, got {} x {}",
                self.n_x, self.n_y
            )));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_x - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.n_y - 1) as f64
    }

    pub fn n_nodes(&self) -> usize {
        self.n_x * self.n_y
    }

    pub fn n_elements(&self) -> usize {
        (self.n_x - 1) * (self.n_y - 1)
    }

    /// Row-major node id of node `(i, j)`.
    pub fn node_id(&self, i: usize, j: usize) -> usize {
        j * self.n_x + i
    }

    /// Coordinates of node `(i, j)`.
    pub fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.x_min + i as f64 * self.dx(),
            self.y_min + j as f64 * self.dy(),
        )
    }

    /// True when the closure of `other` lies inside the closure of `self`,
    /// with a small tolerance for round-off in derived extents.
    pub fn contains(&self, other: &GridSpec) -> bool {
        let tol = 1e-12 * (self.x_max - self.x_min).max(self.y_max - self.y_min);
        other.x_min >= self.x_min - tol
            && other.x_max <= self.x_max + tol
            && other.y_min >= self.y_min - tol
            && other.y_max <= self.y_max + tol
    }

    /// Nearest node to a point, as `(i, j)`.
    pub fn nearest_node(&self, x: f64, y: f64) -> (usize, usize) {
        let i = ((x - self.x_min) / self.dx()).round().clamp(0.0, (self.n_x - 1) as f64) as usize;
        let j = ((y - self.y_min) / self.dy()).round().clamp(0.0, (self.n_y - 1) as f64) as usize;
        (i, j)
    }

    /// True for nodes on the outer rectangle.
    pub fn on_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.n_x - 1 || j == self.n_y - 1
    }
}

/// Uniform time grid `t_n = n * dt`, `n = 0..n_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub n_t: usize,
    pub dt: f64,
}

impl TimeGrid {
    pub fn new(n_t: usize, dt: f64) -> Result<Self> {
        if dt <= 0.0 {
            return Err(Error::config(format!("time step must be positive, got {dt}")));
        }
        if n_t < 3 {
            return Err(Error::config(format!(
                "second-order time scheme needs n_t >= 3, got {n_t}"
            )));
        }
        Ok(TimeGrid { n_t, dt })
    }

    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn t_final(&self) -> f64 {
        (self.n_t - 1) as f64 * self.dt
    }
}

/// A grid together with its element connectivity.
///
/// Elements are bilinear quadrilaterals listed row-major by their lower-left
/// node; local node order is LL, LR, UR, UL (counterclockwise).
#[derive(Debug, Clone)]
pub struct Grid {
    pub spec: GridSpec,
    pub elements: Vec<[usize; 4]>,
}

/// Build connectivity for a validated spec.
pub fn build_grid(spec: GridSpec) -> Result<Grid> {
    spec.validate()?;
    let mut elements = Vec::with_capacity(spec.n_elements());
    for j in 0..spec.n_y - 1 {
        for i in 0..spec.n_x - 1 {
            elements.push([
                spec.node_id(i, j),
                spec.node_id(i + 1, j),
                spec.node_id(i + 1, j + 1),
                spec.node_id(i, j + 1),
            ]);
        }
    }
    Ok(Grid { spec, elements })
}

impl Grid {
    /// Node ids on the outer rectangle, in row-major order.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let s = &self.spec;
        let mut out = Vec::new();
        for j in 0..s.n_y {
            for i in 0..s.n_x {
                if s.on_boundary(i, j) {
                    out.push(s.node_id(i, j));
                }
            }
        }
        out
    }
}

/// Ordered trace of the boundary cycle of a sub-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryIndex {
    /// `(i, j)` indices into the sub-grid, counterclockwise from lower-left.
    pub nodes: Vec<(usize, usize)>,
}

impl BoundaryIndex {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Enumerate the boundary of a sub-grid counterclockwise starting at
/// `(x_min, y_min)`: bottom edge, right edge, top edge, left edge.
pub fn boundary_index(sub: &GridSpec) -> Result<BoundaryIndex> {
    sub.validate()?;
    let (nx, ny) = (sub.n_x, sub.n_y);
    let mut nodes = Vec::with_capacity(2 * nx + 2 * ny - 4);
    for i in 0..nx {
        nodes.push((i, 0));
    }
    for j in 1..ny {
        nodes.push((nx - 1, j));
    }
    for i in (0..nx - 1).rev() {
        nodes.push((i, ny - 1));
    }
    for j in (1..ny - 1).rev() {
        nodes.push((0, j));
    }
    debug_assert_eq!(nodes.len(), 2 * nx + 2 * ny - 4);
    Ok(BoundaryIndex { nodes })
}

/// A space-time field on a Cartesian grid, shape `[n_t, n_y, n_x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSeries {
    pub spec: GridSpec,
    pub n_t: usize,
    pub values: Vec<f64>,
}

impl FieldSeries {
    pub fn zeros(spec: GridSpec, n_t: usize) -> Self {
        FieldSeries {
            spec,
            n_t,
            values: vec![0.0; n_t * spec.n_nodes()],
        }
    }

    pub fn at(&self, t: usize, j: usize, i: usize) -> f64 {
        self.values[t * self.spec.n_nodes() + self.spec.node_id(i, j)]
    }

    /// Nodal values at one time step, row-major over nodes.
    pub fn frame(&self, t: usize) -> &[f64] {
        let n = self.spec.n_nodes();
        &self.values[t * n..(t + 1) * n]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [f64] {
        let n = self.spec.n_nodes();
        &mut self.values[t * n..(t + 1) * n]
    }
}

/// Time series of Dirichlet values on the ordered boundary nodes of a
/// sub-grid, shape `[n_t, n_b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub n_t: usize,
    pub n_b: usize,
    pub values: Vec<f64>,
}

impl BoundaryTrace {
    pub fn zeros(n_t: usize, n_b: usize) -> Self {
        BoundaryTrace { n_t, n_b, values: vec![0.0; n_t * n_b] }
    }

    pub fn step(&self, t: usize) -> &[f64] {
        &self.values[t * self.n_b..(t + 1) * self.n_b]
    }

    pub fn step_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.values[t * self.n_b..(t + 1) * self.n_b]
    }
}

/// Bilinear interpolation of a nodal frame at an arbitrary point inside the
/// grid. Points coinciding with a node reproduce the nodal value exactly.
pub fn interpolate(spec: &GridSpec, frame: &[f64], x: f64, y: f64) -> Result<f64> {
    let (dx, dy) = (spec.dx(), spec.dy());
    let tol_x = 1e-10 * (spec.x_max - spec.x_min);
    let tol_y = 1e-10 * (spec.y_max - spec.y_min);
    if x < spec.x_min - tol_x || x > spec.x_max + tol_x || y < spec.y_min - tol_y || y > spec.y_max + tol_y {
        return Err(Error::domain(format!("point ({x}, {y}) outside the grid")));
    }
    let fx = (x - spec.x_min) / dx;
    let fy = (y - spec.y_min) / dy;
    // Snap to the exact node when the point coincides with one.
    let (ri, rj) = (fx.round(), fy.round());
    if (fx - ri).abs() < 1e-9 && (fy - rj).abs() < 1e-9 {
        let i = ri.clamp(0.0, (spec.n_x - 1) as f64) as usize;
        let j = rj.clamp(0.0, (spec.n_y - 1) as f64) as usize;
        return Ok(frame[spec.node_id(i, j)]);
    }
    let i = (fx.floor() as usize).min(spec.n_x - 2);
    let j = (fy.floor() as usize).min(spec.n_y - 2);
    let xi = fx - i as f64;
    let eta = fy - j as f64;
    let v00 = frame[spec.node_id(i, j)];
    let v10 = frame[spec.node_id(i + 1, j)];
    let v11 = frame[spec.node_id(i + 1, j + 1)];
    let v01 = frame[spec.node_id(i, j + 1)];
    Ok(v00 * (1.0 - xi) * (1.0 - eta) + v10 * xi * (1.0 - eta) + v11 * xi * eta + v01 * (1.0 - xi) * eta)
}

/// Restrict a field on the full domain to the boundary cycle of a sub-grid.
///
/// Values come from bilinear interpolation in the containing element; when a
/// sub-grid node coincides with a full-grid node the nodal value is gathered
/// exactly.
pub fn sample_on_subboundary(field: &FieldSeries, sub: &GridSpec) -> Result<BoundaryTrace> {
    if !field.spec.contains(sub) {
        return Err(Error::domain("sub-grid extends outside the full grid".to_string()));
    }
    let bidx = boundary_index(sub)?;
    let n_b = bidx.len();
    let mut trace = BoundaryTrace::zeros(field.n_t, n_b);
    for t in 0..field.n_t {
        let frame = field.frame(t);
        let row = trace.step_mut(t);
        for (k, &(i, j)) in bidx.nodes.iter().enumerate() {
            let (x, y) = sub.coords(i, j);
            row[k] = interpolate(&field.spec, frame, x, y)?;
        }
    }
    Ok(trace)
}

/// Restrict a field on the full domain to every node of a sub-grid.
pub fn sample_on_subgrid(field: &FieldSeries, sub: &GridSpec) -> Result<FieldSeries> {
    if !field.spec.contains(sub) {
        return Err(Error::domain("sub-grid extends outside the full grid".to_string()));
    }
    sub.validate()?;
    let mut out = FieldSeries::zeros(*sub, field.n_t);
    for t in 0..field.n_t {
        let frame = field.frame(t);
        let n = sub.n_nodes();
        for j in 0..sub.n_y {
            for i in 0..sub.n_x {
                let (x, y) = sub.coords(i, j);
                out.values[t * n + sub.node_id(i, j)] = interpolate(&field.spec, frame, x, y)?;
            }
        }
    }
    Ok(out)
}

/// Gather the boundary cycle of a field that already lives on the sub-grid.
pub fn gather_boundary(field: &FieldSeries) -> Result<BoundaryTrace> {
    let bidx = boundary_index(&field.spec)?;
    let n_b = bidx.len();
    let mut trace = BoundaryTrace::zeros(field.n_t, n_b);
    for t in 0..field.n_t {
        let frame = field.frame(t);
        let row = trace.step_mut(t);
        for (k, &(i, j)) in bidx.nodes.iter().enumerate() {
            row[k] = frame[field.spec.node_id(i, j)];
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_spec() -> GridSpec {
        GridSpec::new(-8.0, 8.0, -4.0, 4.0, 40, 20).unwrap()
    }

    #[test]
    fn reference_grid_counts() {
        let grid = build_grid(reference_spec()).unwrap();
        assert_eq!(grid.spec.n_nodes(), 800);
        assert_eq!(grid.elements.len(), 741);
        assert!((grid.spec.dx() - 16.0 / 39.0).abs() < 1e-15);
    }

    #[test]
    fn smallest_grid() {
        let grid = build_grid(GridSpec::new(0.0, 1.0, 0.0, 1.0, 2, 2).unwrap()).unwrap();
        assert_eq!(grid.spec.n_nodes(), 4);
        assert_eq!(grid.elements.len(), 1);
        assert_eq!(grid.boundary_nodes().len(), 4);
    }

    #[test]
    fn reference_grid_boundary_count() {
        // Oracle: enumerate nodes with i in {0, 39} or j in {0, 19}.
        let spec = reference_spec();
        let mut count = 0;
        for j in 0..spec.n_y {
            for i in 0..spec.n_x {
                if i == 0 || i == 39 || j == 0 || j == 19 {
                    count += 1;
                }
            }
        }
        assert_eq!(count, 116);
        let grid = build_grid(spec).unwrap();
        assert_eq!(grid.boundary_nodes().len(), 116);
    }

    #[test]
    fn rejects_degenerate_specs() {
        assert!(GridSpec::new(0.0, 0.0, 0.0, 1.0, 4, 4).is_err());
        assert!(GridSpec::new(0.0, 1.0, 0.0, 1.0, 1, 4).is_err());
    }

    #[test]
    fn boundary_cycle_counts() {
        let sub = GridSpec::new(0.0, 1.0, 0.0, 1.0, 21, 11).unwrap();
        assert_eq!(boundary_index(&sub).unwrap().len(), 60);
        let sub = GridSpec::new(0.0, 1.0, 0.0, 1.0, 3, 2).unwrap();
        assert_eq!(boundary_index(&sub).unwrap().len(), 6);
    }

    #[test]
    fn smallest_boundary_cycle_order() {
        let sub = GridSpec::new(0.0, 1.0, 0.0, 1.0, 2, 2).unwrap();
        let bidx = boundary_index(&sub).unwrap();
        assert_eq!(bidx.nodes, vec![(0, 0), (1, 0), (1, 1), (0, 1)]);
    }

    #[test]
    fn boundary_cycle_is_closed_neighbor_chain() {
        let sub = GridSpec::new(-1.0, 1.0, 0.0, 3.0, 7, 5).unwrap();
        let bidx = boundary_index(&sub).unwrap();
        let n = bidx.len();
        assert_eq!(n, 2 * 7 + 2 * 5 - 4);
        for k in 0..n {
            let (i0, j0) = bidx.nodes[k];
            let (i1, j1) = bidx.nodes[(k + 1) % n];
            let d = (i0 as i64 - i1 as i64).abs() + (j0 as i64 - j1 as i64).abs();
            assert_eq!(d, 1, "nodes {k} and {} are not grid neighbors", (k + 1) % n);
        }
        // No duplicates.
        let mut seen = bidx.nodes.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), n);
    }

    #[test]
    fn trace_reproduces_constants() {
        let spec = reference_spec();
        let mut field = FieldSeries::zeros(spec, 3);
        field.values.fill(3.5);
        let sub = GridSpec::new(-0.8, 7.2, -2.0, 2.0, 21, 11).unwrap();
        let trace = sample_on_subboundary(&field, &sub).unwrap();
        for v in &trace.values {
            assert!((v - 3.5).abs() < 1e-14);
        }
    }

    #[test]
    fn trace_reproduces_bilinear_fields_exactly() {
        let spec = reference_spec();
        let mut field = FieldSeries::zeros(spec, 1);
        for j in 0..spec.n_y {
            for i in 0..spec.n_x {
                let (x, y) = spec.coords(i, j);
                field.values[spec.node_id(i, j)] = x * y;
            }
        }
        let sub = GridSpec::new(-0.8, 7.2, -2.0, 2.0, 21, 11).unwrap();
        let bidx = boundary_index(&sub).unwrap();
        let trace = sample_on_subboundary(&field, &sub).unwrap();
        for (k, &(i, j)) in bidx.nodes.iter().enumerate() {
            let (x, y) = sub.coords(i, j);
            assert!((trace.values[k] - x * y).abs() < 1e-12, "node ({i}, {j})");
        }
    }

    #[test]
    fn aligned_mode_gathers_exactly() {
        // 41x21 on [-8,8]x[-4,4] has dx = dy = 0.4; the 21x11 sub-grid on
        // [-0.8, 7.2] x [-2, 2] is node-aligned.
        let spec = GridSpec::new(-8.0, 8.0, -4.0, 4.0, 41, 21).unwrap();
        let mut field = FieldSeries::zeros(spec, 2);
        for (k, v) in field.values.iter_mut().enumerate() {
            *v = (k as f64 * 0.37).sin();
        }
        let sub = GridSpec::new(-0.8, 7.2, -2.0, 2.0, 21, 11).unwrap();
        let bidx = boundary_index(&sub).unwrap();
        let trace = sample_on_subboundary(&field, &sub).unwrap();
        for t in 0..2 {
            for (k, &(i, j)) in bidx.nodes.iter().enumerate() {
                let (x, y) = sub.coords(i, j);
                let gi = ((x - spec.x_min) / spec.dx()).round() as usize;
                let gj = ((y - spec.y_min) / spec.dy()).round() as usize;
                let direct = field.frame(t)[spec.node_id(gi, gj)];
                assert_eq!(trace.step(t)[k], direct);
            }
        }
    }

    #[test]
    fn restriction_is_linear() {
        let spec = reference_spec();
        let sub = GridSpec::new(-0.8, 7.2, -2.0, 2.0, 11, 7).unwrap();
        let mut u = FieldSeries::zeros(spec, 2);
        let mut v = FieldSeries::zeros(spec, 2);
        for k in 0..u.values.len() {
            u.values[k] = (k as f64 * 0.11).sin();
            v.values[k] = (k as f64 * 0.07).cos();
        }
        let (alpha, beta) = (2.5, -1.25);
        let mut combo = FieldSeries::zeros(spec, 2);
        for k in 0..combo.values.len() {
            combo.values[k] = alpha * u.values[k] + beta * v.values[k];
        }
        let tu = sample_on_subboundary(&u, &sub).unwrap();
        let tv = sample_on_subboundary(&v, &sub).unwrap();
        let tc = sample_on_subboundary(&combo, &sub).unwrap();
        for k in 0..tc.values.len() {
            let expect = alpha * tu.values[k] + beta * tv.values[k];
            assert!((tc.values[k] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_error_is_second_order() {
        // Max trace error of sin(x)cos(y) should drop by ~4x when halving h.
        let sub = GridSpec::new(-0.8, 7.2, -2.0, 2.0, 33, 17).unwrap();
        let mut errs = Vec::new();
        for &(nx, ny) in &[(41usize, 21usize), (81, 41)] {
            let spec = GridSpec::new(-8.0, 8.0, -4.0, 4.0, nx, ny).unwrap();
            let mut field = FieldSeries::zeros(spec, 1);
            for j in 0..ny {
                for i in 0..nx {
                    let (x, y) = spec.coords(i, j);
                    field.values[spec.node_id(i, j)] = x.sin() * y.cos();
                }
            }
            let bidx = boundary_index(&sub).unwrap();
            let trace = sample_on_subboundary(&field, &sub).unwrap();
            let mut err: f64 = 0.0;
            for (k, &(i, j)) in bidx.nodes.iter().enumerate() {
                let (x, y) = sub.coords(i, j);
                err = err.max((trace.values[k] - x.sin() * y.cos()).abs());
            }
            errs.push(err);
        }
        let ratio = errs[0] / errs[1];
        assert!(
            (3.5..=4.5).contains(&ratio),
            "expected ~4x error reduction, got {ratio} ({errs:?})"
        );
    }

    #[test]
    fn sub_outside_full_is_rejected() {
        let field = FieldSeries::zeros(reference_spec(), 1);
        let sub = GridSpec::new(7.0, 9.0, -1.0, 1.0, 4, 4).unwrap();
        assert!(sample_on_subboundary(&field, &sub).is_err());
    }
}
