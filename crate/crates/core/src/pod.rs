//! Snapshot proper orthogonal decomposition and the forest-backed surrogate.
//!
//! Modes come from the eigen-decomposition of the temporal correlation
//! matrix of the snapshot set; a regression forest then maps `(p, t)` to the
//! generalized coordinates.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::forest::{fit_forest, Forest, ForestHyper};
use crate::lhs::ParamVector;
use crate::{Error, Result};

/// Snapshot matrix, `m` rows of `n_dof` values each.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshots {
    pub m: usize,
    pub n_dof: usize,
    pub data: Vec<f64>,
}

impl Snapshots {
    pub fn new(m: usize, n_dof: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != m * n_dof {
            return Err(Error::shape(format!(
                "snapshot data length {} != {m} x {n_dof}",
                data.len()
            )));
        }
        Ok(Snapshots { m, n_dof, data })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_dof..(i + 1) * self.n_dof]
    }
}

/// Truncated POD basis. Modes are orthonormal rows under the configured
/// diagonal inner-product weights (identity by default).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PodBasis {
    /// `[rank, n_dof]`, row-major.
    pub modes: Vec<f64>,
    /// Eigenvalues of the retained modes, descending.
    pub eigenvalues: Vec<f64>,
    pub rank: usize,
    pub n_dof: usize,
    /// Diagonal inner-product weights, or `None` for the identity.
    pub weights: Option<Vec<f64>>,
}

fn dot_w(a: &[f64], b: &[f64], w: Option<&[f64]>) -> f64 {
    match w {
        None => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        Some(w) => a.iter().zip(b).zip(w).map(|((x, y), ww)| ww * x * y).sum(),
    }
}

/// Temporal correlation matrix `C_ij = (U_i, U_j)`, `m x m`, symmetric PSD.
pub fn correlation_matrix(snapshots: &Snapshots, weights: Option<&[f64]>) -> DMatrix<f64> {
    let m = snapshots.m;
    let mut c = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = dot_w(snapshots.row(i), snapshots.row(j), weights);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

/// Eigen-decompose the correlation matrix and build the truncated basis.
///
/// The rank is the smallest `k` whose eigenvalues capture `1 - energy_tol`
/// of the total energy; eigenvalues at or below `1e-12 * lambda_1` are
/// always dropped. All-zero snapshot sets yield an empty basis.
pub fn pod_modes(c: &DMatrix<f64>, snapshots: &Snapshots, energy_tol: f64, weights: Option<Vec<f64>>) -> Result<PodBasis> {
    let m = snapshots.m;
    if c.nrows() != m || c.ncols() != m {
        return Err(Error::shape(format!("correlation matrix is {}x{}, expected {m}x{m}", c.nrows(), c.ncols())));
    }
    let eig = SymmetricEigen::new(c.clone());
    let mut pairs: Vec<(f64, usize)> = eig.eigenvalues.iter().cloned().zip(0..m).collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let total: f64 = pairs.iter().map(|&(l, _)| l.max(0.0)).sum();
    if total <= 0.0 {
        return Ok(PodBasis { modes: vec![], eigenvalues: vec![], rank: 0, n_dof: snapshots.n_dof, weights });
    }
    let lambda1 = pairs[0].0;
    let mut rank = 0;
    let mut captured = 0.0;
    for &(l, _) in &pairs {
        if l <= 1e-12 * lambda1 {
            break;
        }
        rank += 1;
        captured += l;
        if captured >= (1.0 - energy_tol) * total {
            break;
        }
    }
    let n_dof = snapshots.n_dof;
    let mut modes = vec![0.0; rank * n_dof];
    let mut eigenvalues = Vec::with_capacity(rank);
    for (k, &(lambda, col)) in pairs.iter().take(rank).enumerate() {
        eigenvalues.push(lambda);
        let inv_sqrt = 1.0 / lambda.sqrt();
        let a = eig.eigenvectors.column(col);
        let row = &mut modes[k * n_dof..(k + 1) * n_dof];
        for i in 0..m {
            let coef = a[i] * inv_sqrt;
            if coef == 0.0 {
                continue;
            }
            for (rv, sv) in row.iter_mut().zip(snapshots.row(i)) {
                *rv += coef * sv;
            }
        }
    }
    Ok(PodBasis { modes, eigenvalues, rank, n_dof, weights })
}

impl PodBasis {
    pub fn mode(&self, k: usize) -> &[f64] {
        &self.modes[k * self.n_dof..(k + 1) * self.n_dof]
    }

    /// Generalized coordinates `alpha_k = (U, Phi_k)`.
    pub fn project(&self, field: &[f64]) -> Result<Vec<f64>> {
        if field.len() != self.n_dof {
            return Err(Error::shape(format!("field length {} != {}", field.len(), self.n_dof)));
        }
        Ok((0..self.rank)
            .map(|k| dot_w(field, self.mode(k), self.weights.as_deref()))
            .collect())
    }

    /// `sum_k alpha_k Phi_k`.
    pub fn reconstruct(&self, coords: &[f64]) -> Result<Vec<f64>> {
        if coords.len() != self.rank {
            return Err(Error::shape(format!("{} coordinates for rank {}", coords.len(), self.rank)));
        }
        let mut out = vec![0.0; self.n_dof];
        for (k, &a) in coords.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (o, &mv) in out.iter_mut().zip(self.mode(k)) {
                *o += a * mv;
            }
        }
        Ok(out)
    }

    /// Max deviation of `Phi Phi^T` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..self.rank {
            for b in a..self.rank {
                let d = dot_w(self.mode(a), self.mode(b), self.weights.as_deref());
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((d - target).abs());
            }
        }
        worst
    }
}

/// POD basis plus one regression forest per generalized coordinate, trained
/// on `(omega, x_s, y_s, t)` inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PodRf {
    pub basis: PodBasis,
    pub forests: Vec<Forest>,
    pub hyper: ForestHyper,
}

/// Serializable forest bundle for persistence.
#[derive(Debug, Serialize, Deserialize)]
pub struct PodRfForests {
    pub hyper: ForestHyper,
    pub forests: Vec<Forest>,
}

impl PodRf {
    /// Fit the per-coordinate forests. `inputs` are `(p, t)` rows matching
    /// the snapshot rows the basis was built from.
    pub fn fit(basis: PodBasis, inputs: &[(ParamVector, f64)], snapshots: &Snapshots, hyper: &ForestHyper, seed: u64) -> Result<Self> {
        if inputs.len() != snapshots.m {
            return Err(Error::shape(format!(
                "{} input rows for {} snapshots",
                inputs.len(),
                snapshots.m
            )));
        }
        let n = inputs.len();
        let mut x = Vec::with_capacity(4 * n);
        for (p, t) in inputs {
            x.extend_from_slice(&[p.omega, p.x_s, p.y_s, *t]);
        }
        let mut targets = vec![vec![0.0; n]; basis.rank];
        for (row, snap) in (0..n).map(|i| (i, snapshots.row(i))) {
            let alpha = basis.project(snap)?;
            for (k, &a) in alpha.iter().enumerate() {
                targets[k][row] = a;
            }
        }
        let forests = targets
            .iter()
            .enumerate()
            .map(|(k, y)| fit_forest(&x, y, 4, hyper, seed.wrapping_add(k as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(PodRf { basis, forests, hyper: *hyper })
    }

    /// Predicted generalized coordinates at `(p, t)`.
    pub fn predict_coords(&self, p: &ParamVector, t: f64) -> Vec<f64> {
        let x = [p.omega, p.x_s, p.y_s, t];
        self.forests.iter().map(|f| f.predict(&x)).collect()
    }

    /// Reconstructed field at `(p, t)`.
    pub fn predict_field(&self, p: &ParamVector, t: f64) -> Result<Vec<f64>> {
        if self.forests.len() != self.basis.rank {
            return Err(Error::missing("surrogate is not trained".to_string()));
        }
        self.basis.reconstruct(&self.predict_coords(p, t))
    }
}
