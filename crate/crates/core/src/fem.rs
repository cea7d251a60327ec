//! Bilinear quadrilateral FEM for the 2D wave equation with the implicit
//! second-order time scheme
//!
//! ```text
//! (M + c^2 dt^2 K) u^n = M (2 u^{n-1} - u^{n-2} + c^2 dt^2 f^n) + Dirichlet lifting
//! ```
//!
//! The system matrix is constant in time, so it is factored once per
//! simulation and reused each step. Prescribed nodes carry exactly the
//! prescribed values after imposition.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::grid::{boundary_index, BoundaryTrace, FieldSeries, Grid, GridSpec, TimeGrid};
use crate::lhs::ParamVector;
use crate::{Error, Result};

/// Symmetric sparse matrix in CSR form (full storage).
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Build from (row, col, value) triplets; duplicates are accumulated.
    pub fn from_triplets(n: usize, triplets: Vec<(usize, usize, f64)>) -> Self {
        csr_from_dup_triplets(n, triplets)
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(out.len(), self.n);
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            out[r] = acc;
        }
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn sum(&self) -> f64 {
        self.vals.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Element mass and stiffness matrices for a dx-by-dy rectangle, local node
/// order LL, LR, UR, UL. Integrated with 2x2 Gauss quadrature, which is exact
/// for products of bilinear shape functions and their gradients.
pub fn element_matrices(dx: f64, dy: f64) -> ([[f64; 4]; 4], [[f64; 4]; 4]) {
    let g = 1.0 / 3.0_f64.sqrt();
    let pts = [(-g, -g), (g, -g), (g, g), (-g, g)];
    let mut me = [[0.0; 4]; 4];
    let mut ke = [[0.0; 4]; 4];
    let det = dx * dy / 4.0;
    for &(xi, eta) in &pts {
        let shape = [
            (1.0 - xi) * (1.0 - eta) / 4.0,
            (1.0 + xi) * (1.0 - eta) / 4.0,
            (1.0 + xi) * (1.0 + eta) / 4.0,
            (1.0 - xi) * (1.0 + eta) / 4.0,
        ];
        // d/dxi, d/deta of the shape functions, mapped to physical space.
        let dxi = [
            -(1.0 - eta) / 4.0,
            (1.0 - eta) / 4.0,
            (1.0 + eta) / 4.0,
            -(1.0 + eta) / 4.0,
        ];
        let deta = [
            -(1.0 - xi) / 4.0,
            -(1.0 + xi) / 4.0,
            (1.0 + xi) / 4.0,
            (1.0 - xi) / 4.0,
        ];
        for a in 0..4 {
            for b in 0..4 {
                me[a][b] += shape[a] * shape[b] * det;
                let gax = dxi[a] * 2.0 / dx;
                let gay = deta[a] * 2.0 / dy;
                let gbx = dxi[b] * 2.0 / dx;
                let gby = deta[b] * 2.0 / dy;
                ke[a][b] += (gax * gbx + gay * gby) * det;
            }
        }
    }
    (me, ke)
}

/// Assembled operators and the factored system matrix for one grid with a
/// fixed Dirichlet node set.
pub struct WaveOperators {
    pub grid: Grid,
    pub c: f64,
    pub dt: f64,
    /// Mass matrix.
    pub mass: Csr,
    /// Stiffness matrix.
    pub stiffness: Csr,
    /// System matrix `S = M + c^2 dt^2 K`.
    pub system: Csr,
    /// Constrained node ids, in imposition order.
    pub dirichlet: Vec<usize>,
    /// Free node ids.
    pub free: Vec<usize>,
    /// node id -> index into `free`, or None if constrained.
    free_index: Vec<Option<usize>>,
    chol: Cholesky<f64, Dyn>,
}

/// Assemble M, K, and the factored system matrix. `dirichlet` lists the
/// constrained node ids in the order their values will be supplied.
pub fn assemble(grid: &Grid, dirichlet: Vec<usize>, c: f64, dt: f64) -> Result<WaveOperators> {
    if c <= 0.0 || dt <= 0.0 {
        return Err(Error::config(format!("need c > 0 and dt > 0, got c = {c}, dt = {dt}")));
    }
    let n = grid.spec.n_nodes();
    let (me, ke) = element_matrices(grid.spec.dx(), grid.spec.dy());
    let mut trip_m = Vec::with_capacity(grid.elements.len() * 16);
    let mut trip_k = Vec::with_capacity(grid.elements.len() * 16);
    for el in &grid.elements {
        for a in 0..4 {
            for b in 0..4 {
                trip_m.push((el[a], el[b], me[a][b]));
                trip_k.push((el[a], el[b], ke[a][b]));
            }
        }
    }
    let mass = csr_from_dup_triplets(n, trip_m);
    let stiffness = csr_from_dup_triplets(n, trip_k);
    let scale = c * c * dt * dt;
    let mut system = mass.clone();
    // M and K share the sparsity pattern of the element assembly.
    debug_assert_eq!(system.cols, stiffness.cols);
    for (sv, kv) in system.vals.iter_mut().zip(stiffness.vals.iter()) {
        *sv += scale * kv;
    }

    let mut free_index = vec![None; n];
    let mut constrained = vec![false; n];
    for &d in &dirichlet {
        if constrained[d] {
            return Err(Error::config(format!("duplicate Dirichlet node {d}")));
        }
        constrained[d] = true;
    }
    let mut free = Vec::with_capacity(n - dirichlet.len());
    for id in 0..n {
        if !constrained[id] {
            free_index[id] = Some(free.len());
            free.push(id);
        }
    }
    let nf = free.len();
    let mut s_ff = DMatrix::<f64>::zeros(nf, nf);
    for (r_local, &r) in free.iter().enumerate() {
        let (cols, vals) = system.row(r);
        for (&cc, &v) in cols.iter().zip(vals) {
            if let Some(c_local) = free_index[cc] {
                s_ff[(r_local, c_local)] = v;
            }
        }
    }
    let chol = Cholesky::new(s_ff)
        .ok_or_else(|| Error::numerical("system matrix is not positive definite".to_string()))?;
    Ok(WaveOperators {
        grid: grid.clone(),
        c,
        dt,
        mass,
        stiffness,
        system,
        dirichlet,
        free,
        free_index,
        chol,
    })
}

fn csr_from_dup_triplets(n: usize, triplets: Vec<(usize, usize, f64)>) -> Csr {
    // Coalesce duplicate (row, col) pairs before building the CSR arrays.
    let mut t = triplets;
    t.sort_unstable_by_key(|&(r, c, _)| (r, c));
    let mut coalesced: Vec<(usize, usize, f64)> = Vec::with_capacity(t.len());
    for (r, c, v) in t {
        match coalesced.last_mut() {
            Some(last) if last.0 == r && last.1 == c => last.2 += v,
            _ => coalesced.push((r, c, v)),
        }
    }
    let mut row_ptr = vec![0usize; n + 1];
    let mut cols = Vec::with_capacity(coalesced.len());
    let mut vals = Vec::with_capacity(coalesced.len());
    let mut cur_row = 0usize;
    for (r, c, v) in coalesced {
        while cur_row < r {
            cur_row += 1;
            row_ptr[cur_row] = cols.len();
        }
        cols.push(c);
        vals.push(v);
    }
    while cur_row < n {
        cur_row += 1;
        row_ptr[cur_row] = cols.len();
    }
    Csr { n, row_ptr, cols, vals }
}

impl WaveOperators {
    /// The full right-hand side `M (2 u1 - u2 + c^2 dt^2 f)` before Dirichlet
    /// elimination.
    pub fn rhs(&self, u1: &[f64], u2: &[f64], f_n: &[f64]) -> Vec<f64> {
        let n = self.mass.n;
        let scale = self.c * self.c * self.dt * self.dt;
        let mut work = vec![0.0; n];
        for i in 0..n {
            work[i] = 2.0 * u1[i] - u2[i] + scale * f_n[i];
        }
        let mut rhs = vec![0.0; n];
        self.mass.matvec(&work, &mut rhs);
        rhs
    }

    /// Advance one time step. `bc` supplies the Dirichlet values in the order
    /// of `self.dirichlet`.
    pub fn step(&self, u1: &[f64], u2: &[f64], f_n: &[f64], bc: &[f64]) -> Result<Vec<f64>> {
        let n = self.mass.n;
        if u1.len() != n || u2.len() != n || f_n.len() != n {
            return Err(Error::shape(format!("state length must be {n}")));
        }
        if bc.len() != self.dirichlet.len() {
            return Err(Error::shape(format!(
                "expected {} Dirichlet values, got {}",
                self.dirichlet.len(),
                bc.len()
            )));
        }
        for v in u1.iter().chain(u2).chain(f_n).chain(bc) {
            if !v.is_finite() {
                return Err(Error::numerical("non-finite input state".to_string()));
            }
        }
        let rhs = self.rhs(u1, u2, f_n);

        // Lifting: subtract S * u_bc on the free rows.
        let mut u = vec![0.0; n];
        for (k, &d) in self.dirichlet.iter().enumerate() {
            u[d] = bc[k];
        }
        let mut lift = vec![0.0; n];
        self.system.matvec(&u, &mut lift);
        let mut b = DVector::<f64>::zeros(self.free.len());
        for (r_local, &r) in self.free.iter().enumerate() {
            b[r_local] = rhs[r] - lift[r];
        }
        let x = self.chol.solve(&b);
        for (r_local, &r) in self.free.iter().enumerate() {
            u[r] = x[r_local];
        }
        Ok(u)
    }

    /// Relative residual of the free-node equations for a computed state.
    pub fn step_residual(&self, u: &[f64], u1: &[f64], u2: &[f64], f_n: &[f64]) -> f64 {
        let rhs = self.rhs(u1, u2, f_n);
        let mut su = vec![0.0; self.system.n];
        self.system.matvec(u, &mut su);
        let mut num = 0.0;
        let mut den = 0.0;
        for &r in &self.free {
            num += (su[r] - rhs[r]) * (su[r] - rhs[r]);
            den += rhs[r] * rhs[r];
        }
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }

    pub fn is_free(&self, node: usize) -> bool {
        self.free_index[node].is_some()
    }
}

/// Sinusoidal point source `f(t) = sin(omega t)` applied at the nearest grid
/// node.
#[derive(Debug, Clone, Copy)]
pub struct SourceTerm {
    pub x_s: f64,
    pub y_s: f64,
    pub omega: f64,
    pub node: usize,
}

impl SourceTerm {
    /// Locate the source on the grid. The nearest node must be strictly
    /// inside the domain. With `exclude` set, the source point must lie
    /// outside the closure of that sub-domain.
    pub fn new(spec: &GridSpec, omega: f64, x_s: f64, y_s: f64, exclude: Option<&GridSpec>) -> Result<Self> {
        let (i, j) = spec.nearest_node(x_s, y_s);
        if spec.on_boundary(i, j) {
            return Err(Error::config(format!(
                "source ({x_s}, {y_s}) maps to a boundary node of the full domain"
            )));
        }
        if let Some(sub) = exclude {
            let inside = x_s >= sub.x_min && x_s <= sub.x_max && y_s >= sub.y_min && y_s <= sub.y_max;
            if inside {
                return Err(Error::config(format!(
                    "source ({x_s}, {y_s}) lies inside the zone of interest"
                )));
            }
        }
        Ok(SourceTerm { x_s, y_s, omega, node: spec.node_id(i, j) })
    }

    /// Nodal forcing vector at time `t`.
    pub fn nodal(&self, n_nodes: usize, t: f64) -> Vec<f64> {
        let mut f = vec![0.0; n_nodes];
        f[self.node] = (self.omega * t).sin();
        f
    }
}

/// Solve the full model on `grid` with homogeneous Dirichlet boundary
/// conditions and zero initial displacement and velocity.
pub fn solve_full(p: &ParamVector, grid: &Grid, time: &TimeGrid, c: f64, exclude: Option<&GridSpec>) -> Result<FieldSeries> {
    let source = SourceTerm::new(&grid.spec, p.omega, p.x_s, p.y_s, exclude)?;
    let dirichlet = grid.boundary_nodes();
    let ops = assemble(grid, dirichlet, c, time.dt)?;
    let n = grid.spec.n_nodes();
    let bc = vec![0.0; ops.dirichlet.len()];

    let mut out = FieldSeries::zeros(grid.spec, time.n_t);
    let mut u_prev2 = vec![0.0; n];
    let mut u_prev1 = vec![0.0; n];
    for step_idx in 1..time.n_t {
        let f_n = source.nodal(n, time.t(step_idx));
        let u = ops.step(&u_prev1, &u_prev2, &f_n, &bc)?;
        out.frame_mut(step_idx).copy_from_slice(&u);
        u_prev2 = u_prev1;
        u_prev1 = u;
    }
    Ok(out)
}

/// Solve the Dirichlet-driven submodel on `subgrid`: zero forcing, boundary
/// values from `trace`, zero initial state.
pub fn solve_submodel(trace: &BoundaryTrace, subgrid: &Grid, time: &TimeGrid, c: f64) -> Result<FieldSeries> {
    let bidx = boundary_index(&subgrid.spec)?;
    if trace.n_t != time.n_t {
        return Err(Error::shape(format!(
            "trace has {} steps, time grid has {}",
            trace.n_t, time.n_t
        )));
    }
    if trace.n_b != bidx.len() {
        return Err(Error::shape(format!(
            "trace has {} boundary nodes, sub-grid has {}",
            trace.n_b,
            bidx.len()
        )));
    }
    let dirichlet: Vec<usize> = bidx
        .nodes
        .iter()
        .map(|&(i, j)| subgrid.spec.node_id(i, j))
        .collect();
    let ops = assemble(subgrid, dirichlet, c, time.dt)?;
    let n = subgrid.spec.n_nodes();
    let zero_f = vec![0.0; n];

    let mut out = FieldSeries::zeros(subgrid.spec, time.n_t);
    // Impose the trace on the initial frame; interior starts at rest.
    {
        let frame0 = out.frame_mut(0);
        for (k, &d) in ops.dirichlet.iter().enumerate() {
            frame0[d] = trace.step(0)[k];
        }
    }
    let mut u_prev2 = out.frame(0).to_vec();
    let mut u_prev1 = u_prev2.clone();
    for step_idx in 1..time.n_t {
        let u = ops.step(&u_prev1, &u_prev2, &zero_f, trace.step(step_idx))?;
        out.frame_mut(step_idx).copy_from_slice(&u);
        u_prev2 = u_prev1;
        u_prev1 = u;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, sample_on_subgrid, GridSpec};

    fn reference_grid() -> Grid {
        build_grid(GridSpec::new(-8.0, 8.0, -4.0, 4.0, 40, 20).unwrap()).unwrap()
    }

    #[test]
    fn stiffness_annihilates_constants() {
        let grid = reference_grid();
        let ops = assemble(&grid, vec![], 2000.0, 4e-5).unwrap();
        let ones = vec![1.0; grid.spec.n_nodes()];
        let mut out = vec![0.0; grid.spec.n_nodes()];
        ops.stiffness.matvec(&ones, &mut out);
        let max = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max <= 1e-12 * ops.stiffness.max_abs(), "max |K 1| = {max}");
    }

    #[test]
    fn mass_sums_to_domain_area() {
        let grid = reference_grid();
        let ops = assemble(&grid, vec![], 2000.0, 4e-5).unwrap();
        assert!((ops.mass.sum() - 128.0).abs() < 1e-9, "sum M = {}", ops.mass.sum());
    }

    #[test]
    fn unit_element_mass_pattern() {
        // Exact integrals of bilinear shape products on the unit square:
        // diagonal 1/9, edge neighbors 1/18, opposite corners 1/36.
        let (me, _) = element_matrices(1.0, 1.0);
        let mut total = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                let expect = match (a + 4 - b) % 4 {
                    0 => 1.0 / 9.0,
                    2 => 1.0 / 36.0,
                    _ => 1.0 / 18.0,
                };
                assert!((me[a][b] - expect).abs() < 1e-15, "entry ({a}, {b}) = {}", me[a][b]);
                total += me[a][b];
            }
        }
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_dynamics_stay_zero() {
        let grid = reference_grid();
        let ops = assemble(&grid, grid.boundary_nodes(), 2000.0, 4e-5).unwrap();
        let n = grid.spec.n_nodes();
        let u = ops
            .step(&vec![0.0; n], &vec![0.0; n], &vec![0.0; n], &vec![0.0; ops.dirichlet.len()])
            .unwrap();
        assert!(u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constants_are_stationary() {
        let grid = reference_grid();
        let ops = assemble(&grid, grid.boundary_nodes(), 2000.0, 4e-5).unwrap();
        let n = grid.spec.n_nodes();
        let five = vec![5.0; n];
        let u = ops
            .step(&five, &five, &vec![0.0; n], &vec![5.0; ops.dirichlet.len()])
            .unwrap();
        for &v in &u {
            assert!((v - 5.0).abs() < 1e-9, "got {v}");
        }
    }

    #[test]
    fn step_residual_is_tiny() {
        let grid = reference_grid();
        let ops = assemble(&grid, grid.boundary_nodes(), 2000.0, 4e-5).unwrap();
        let n = grid.spec.n_nodes();
        let u1: Vec<f64> = (0..n).map(|k| (0.01 * k as f64).sin()).collect();
        let u2: Vec<f64> = (0..n).map(|k| (0.02 * k as f64).cos()).collect();
        let mut f = vec![0.0; n];
        f[405] = 1.0;
        let bc = vec![0.0; ops.dirichlet.len()];
        let mut u = ops.step(&u1, &u2, &f, &bc).unwrap();
        // Residual is defined on the free rows with the prescribed values in
        // place, so keep the Dirichlet entries.
        for (k, &d) in ops.dirichlet.iter().enumerate() {
            u[d] = bc[k];
        }
        let res = ops.step_residual(&u, &u1, &u2, &f);
        assert!(res <= 1e-10, "residual {res}");
    }

    #[test]
    fn zero_forcing_gives_zero_field() {
        let grid = reference_grid();
        let time = TimeGrid::new(20, 4e-5).unwrap();
        let p = ParamVector { omega: 0.0, x_s: -1.85, y_s: -0.65 };
        let u = solve_full(&p, &grid, &time, 2000.0, None).unwrap();
        assert!(u.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reference_parameters_produce_activity_in_zone() {
        let grid = reference_grid();
        let time = TimeGrid::new(100, 4e-5).unwrap();
        let p = ParamVector { omega: 5000.0, x_s: -1.85, y_s: -0.65 };
        let u = solve_full(&p, &grid, &time, 2000.0, None).unwrap();
        assert!(u.values.iter().all(|v| v.is_finite()));
        let sub = GridSpec::new(-0.8, 7.2, -2.0, 2.0, 21, 11).unwrap();
        let restricted = sample_on_subgrid(&u, &sub).unwrap();
        let max = restricted.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max > 0.0, "wavefront never reached the zone of interest");
    }

    #[test]
    fn source_on_boundary_is_rejected() {
        let grid = reference_grid();
        let time = TimeGrid::new(10, 4e-5).unwrap();
        let p = ParamVector { omega: 5000.0, x_s: -8.0, y_s: 0.0 };
        assert!(solve_full(&p, &grid, &time, 2000.0, None).is_err());
    }

    #[test]
    fn source_in_zone_rejected_in_exclusion_mode() {
        let grid = reference_grid();
        let time = TimeGrid::new(10, 4e-5).unwrap();
        let sub = GridSpec::new(-0.8, 7.2, -2.0, 2.0, 21, 11).unwrap();
        let p = ParamVector { omega: 5000.0, x_s: 1.0, y_s: 0.0 };
        assert!(solve_full(&p, &grid, &time, 2000.0, Some(&sub)).is_err());
    }

    #[test]
    fn zero_trace_gives_zero_submodel_field() {
        let sub = build_grid(GridSpec::new(-0.8, 7.2, -2.0, 2.0, 21, 11).unwrap()).unwrap();
        let time = TimeGrid::new(15, 4e-5).unwrap();
        let trace = BoundaryTrace::zeros(15, 60);
        let u = solve_submodel(&trace, &sub, &time, 2000.0).unwrap();
        assert!(u.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_trace_relaxes_toward_constant() {
        let sub = build_grid(GridSpec::new(0.0, 1.0, 0.0, 1.0, 9, 9).unwrap()).unwrap();
        let n_t = 400;
        let time = TimeGrid::new(n_t, 1e-2).unwrap();
        let mut trace = BoundaryTrace::zeros(n_t, 32);
        trace.values.fill(1.0);
        let u = solve_submodel(&trace, &sub, &time, 1.0).unwrap();
        // Interior drifts toward the boundary value as transients are solved.
        let center = u.at(n_t - 1, 4, 4);
        let early = u.at(2, 4, 4);
        assert!(center > early, "no relaxation: early {early}, late {center}");
        assert!((center - 1.0).abs() < 0.8, "center value {center}");
    }

    #[test]
    fn trace_shape_mismatch_is_rejected() {
        let sub = build_grid(GridSpec::new(-0.8, 7.2, -2.0, 2.0, 21, 11).unwrap()).unwrap();
        let time = TimeGrid::new(15, 4e-5).unwrap();
        let trace = BoundaryTrace::zeros(15, 59);
        assert!(solve_submodel(&trace, &sub, &time, 2000.0).is_err());
        let trace = BoundaryTrace::zeros(14, 60);
        assert!(solve_submodel(&trace, &sub, &time, 2000.0).is_err());
    }

    #[test]
    fn solution_is_linear_in_inputs() {
        let sub = build_grid(GridSpec::new(0.0, 1.0, 0.0, 1.0, 7, 5).unwrap()).unwrap();
        let n_t = 12;
        let time = TimeGrid::new(n_t, 1e-3).unwrap();
        let n_b = 2 * 7 + 2 * 5 - 4;
        let mut t1 = BoundaryTrace::zeros(n_t, n_b);
        let mut t2 = BoundaryTrace::zeros(n_t, n_b);
        for k in 0..t1.values.len() {
            t1.values[k] = (0.3 * k as f64).sin();
            t2.values[k] = (0.17 * k as f64).cos();
        }
        let mut tsum = BoundaryTrace::zeros(n_t, n_b);
        for k in 0..tsum.values.len() {
            tsum.values[k] = t1.values[k] + t2.values[k];
        }
        let u1 = solve_submodel(&t1, &sub, &time, 10.0).unwrap();
        let u2 = solve_submodel(&t2, &sub, &time, 10.0).unwrap();
        let usum = solve_submodel(&tsum, &sub, &time, 10.0).unwrap();
        let scale = usum.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..usum.values.len() {
            let expect = u1.values[k] + u2.values[k];
            assert!((usum.values[k] - expect).abs() <= 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn dirichlet_values_are_imposed_exactly() {
        let grid = reference_grid();
        let ops = assemble(&grid, grid.boundary_nodes(), 2000.0, 4e-5).unwrap();
        let n = grid.spec.n_nodes();
        let bc: Vec<f64> = (0..ops.dirichlet.len()).map(|k| 0.1 * k as f64).collect();
        let u = ops.step(&vec![0.0; n], &vec![0.0; n], &vec![0.0; n], &bc).unwrap();
        for (k, &d) in ops.dirichlet.iter().enumerate() {
            assert_eq!(u[d], bc[k]);
        }
    }
}
