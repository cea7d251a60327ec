//! Latin hypercube sampling of the simulation parameter vector.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Simulation parameters `p = (omega, x_s, y_s)`; the wave speed `c` is fixed
/// across all samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    /// Angular frequency of the source, rad/s.
    pub omega: f64,
    /// Source x coordinate, m.
    pub x_s: f64,
    /// Source y coordinate, m.
    pub y_s: f64,
}

impl ParamVector {
    pub fn as_array(&self) -> [f64; 3] {
        [self.omega, self.x_s, self.y_s]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        ParamVector { omega: a[0], x_s: a[1], y_s: a[2] }
    }
}

/// Per-component sampling bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub omega: (f64, f64),
    pub x_s: (f64, f64),
    pub y_s: (f64, f64),
}

impl ParamBounds {
    /// Table-default ranges: omega in [4750, 5250] rad/s, source position in
    /// [-2.2, -1.5] x [-1.8, 0.5] m.
    pub fn reference_defaults() -> Self {
        ParamBounds {
            omega: (4750.0, 5250.0),
            x_s: (-2.2, -1.5),
            y_s: (-1.8, 0.5),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("omega", self.omega), ("x_s", self.x_s), ("y_s", self.y_s)] {
            if !(lo < hi) {
                return Err(Error::config(format!("bounds for {name}: min {lo} must be < max {hi}")));
            }
        }
        Ok(())
    }

    fn as_array(&self) -> [(f64, f64); 3] {
        [self.omega, self.x_s, self.y_s]
    }

    pub fn contains(&self, p: &ParamVector) -> bool {
        let v = p.as_array();
        self.as_array()
            .iter()
            .zip(v.iter())
            .all(|(&(lo, hi), &x)| x >= lo && x <= hi)
    }
}

/// Latin hypercube sample of `n` parameter vectors.
///
/// Per axis, each of the `n` equal-width strata receives exactly one sample,
/// placed uniformly within its stratum; the strata are assigned by an
/// independent random permutation per axis. Deterministic for a given seed.
pub fn lhs_sample(n: usize, bounds: &ParamBounds, seed: u64) -> Result<Vec<ParamVector>> {
    if n == 0 {
        return Err(Error::config("sample count must be >= 1".to_string()));
    }
    bounds.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = bounds.as_array();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(3);
    for &(lo, hi) in &b {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        let width = (hi - lo) / n as f64;
        let col: Vec<f64> = strata
            .into_iter()
            .map(|s| {
                let u: f64 = rng.gen_range(0.0..1.0);
                lo + (s as f64 + u) * width
            })
            .collect();
        columns.push(col);
    }
    Ok((0..n)
        .map(|k| ParamVector {
            omega: columns[0][k],
            x_s: columns[1][k],
            y_s: columns[2][k],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Oracle: each axis has exactly one sample per stratum.
    fn assert_stratified(samples: &[ParamVector], bounds: &ParamBounds) {
        let n = samples.len();
        let b = bounds.as_array();
        for dim in 0..3 {
            let (lo, hi) = b[dim];
            let width = (hi - lo) / n as f64;
            let mut hits = vec![0usize; n];
            for p in samples {
                let x = p.as_array()[dim];
                let s = (((x - lo) / width).floor() as usize).min(n - 1);
                hits[s] += 1;
            }
            assert!(hits.iter().all(|&h| h == 1), "dim {dim}: {hits:?}");
        }
    }

    #[test]
    fn single_sample_is_inside_the_box() {
        let bounds = ParamBounds::reference_defaults();
        let s = lhs_sample(1, &bounds, 7).unwrap();
        assert_eq!(s.len(), 1);
        assert!(bounds.contains(&s[0]));
        assert!((4750.0..=5250.0).contains(&s[0].omega));
        assert!((-2.2..=-1.5).contains(&s[0].x_s));
        assert!((-1.8..=0.5).contains(&s[0].y_s));
    }

    #[test]
    fn unit_cube_quartiles() {
        let bounds = ParamBounds { omega: (0.0, 1.0), x_s: (0.0, 1.0), y_s: (0.0, 1.0) };
        let s = lhs_sample(4, &bounds, 42).unwrap();
        assert_stratified(&s, &bounds);
    }

    #[test]
    fn stratification_holds_for_various_sizes_and_seeds() {
        let bounds = ParamBounds::reference_defaults();
        for &n in &[4usize, 10, 100] {
            for seed in 0..5u64 {
                let s = lhs_sample(n, &bounds, seed).unwrap();
                assert_stratified(&s, &bounds);
            }
        }
    }

    #[test]
    fn same_seed_is_bit_equal() {
        let bounds = ParamBounds::reference_defaults();
        let a = lhs_sample(32, &bounds, 123).unwrap();
        let b = lhs_sample(32, &bounds, 123).unwrap();
        assert_eq!(a, b);
        let c = lhs_sample(32, &bounds, 124).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_bounds_rejected() {
        let bounds = ParamBounds { omega: (1.0, 1.0), x_s: (0.0, 1.0), y_s: (0.0, 1.0) };
        assert!(lhs_sample(4, &bounds, 0).is_err());
        assert!(lhs_sample(0, &ParamBounds::reference_defaults(), 0).is_err());
    }
}
