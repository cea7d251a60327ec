//! Dataset generation and persistence.
//!
//! A dataset directory holds `manifest.json` (config snapshot, seed, sample
//! list with per-array SHA-256 digests), `params.f64`, and one field array
//! per sample under `fields/`. Generation is a pure function of
//! `(config, seed)`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::container::{read_array, sha256_file, write_array};
use crate::fem::solve_full;
use crate::grid::{build_grid, FieldSeries, GridSpec, TimeGrid};
use crate::lhs::{lhs_sample, ParamBounds, ParamVector};
use crate::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

/// Which dataset a directory holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
    Mc,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Test => write!(f, "test"),
            Split::Mc => write!(f, "mc"),
        }
    }
}

/// Physical setup shared by all samples of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub full: GridSpec,
    pub sub: GridSpec,
    pub time: TimeGrid,
    /// Wave speed, m/s.
    pub c: f64,
    /// Reject samples whose source lies inside the closure of the sub-domain.
    pub exclude_source_from_sub: bool,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.full.validate()?;
        self.sub.validate()?;
        if !self.full.contains(&self.sub) {
            return Err(Error::config("zone of interest extends outside the full domain".to_string()));
        }
        if self.c <= 0.0 {
            return Err(Error::config(format!("wave speed must be positive, got {}", self.c)));
        }
        Ok(())
    }
}

/// Parameter vectors paired with their solved fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub split: Split,
    pub seed: u64,
    pub sim: SimConfig,
    pub bounds: ParamBounds,
    pub samples: Vec<(ParamVector, FieldSeries)>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Sample `count` parameter vectors by Latin hypercube and solve the full
/// model for each. A sample violating the source-exclusion rule fails the
/// whole generation with its index reported; it is never silently resampled.
pub fn generate_dataset(
    split: Split,
    sim: &SimConfig,
    bounds: &ParamBounds,
    count: usize,
    seed: u64,
    jobs: usize,
) -> Result<Dataset> {
    sim.validate()?;
    let params = lhs_sample(count, bounds, seed)?;
    let grid = build_grid(sim.full)?;
    let exclude = sim.exclude_source_from_sub.then_some(&sim.sub);

    let jobs = jobs.max(1);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<FieldSeries>>>> = Mutex::new((0..count).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(count.max(1)) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= count {
                    break;
                }
                let out = solve_full(&params[k], &grid, &sim.time, sim.c, exclude);
                results.lock().unwrap()[k] = Some(out);
            });
        }
    });

    let mut samples = Vec::with_capacity(count);
    for (k, slot) in results.into_inner().unwrap().into_iter().enumerate() {
        let field = slot
            .expect("worker left a sample unsolved")
            .map_err(|e| Error::config(format!("sample {k} ({:?}): {e}", params[k])))?;
        samples.push((params[k], field));
    }
    Ok(Dataset { split, seed, sim: *sim, bounds: *bounds, samples })
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    split: Split,
    seed: u64,
    sim: SimConfig,
    bounds: ParamBounds,
    n_samples: usize,
    field_shape: Vec<usize>,
    params_sha256: String,
    fields_sha256: Vec<String>,
}

/// Persist a dataset. Writing the same dataset twice produces byte-identical
/// directories.
pub fn save(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("fields"))?;
    let n = dataset.len();
    let mut flat_params = Vec::with_capacity(3 * n);
    for (p, _) in &dataset.samples {
        flat_params.extend_from_slice(&p.as_array());
    }
    let params_path = dir.join("params.f64");
    write_array(&params_path, &[n, 3], &flat_params)?;

    let spec = dataset.sim.full;
    let field_shape = vec![dataset.sim.time.n_t, spec.n_y, spec.n_x];
    let mut fields_sha = Vec::with_capacity(n);
    for (k, (_, field)) in dataset.samples.iter().enumerate() {
        let path = dir.join("fields").join(format!("{k}.f64"));
        write_array(&path, &field_shape, &field.values)?;
        fields_sha.push(sha256_file(&path)?);
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        split: dataset.split,
        seed: dataset.seed,
        sim: dataset.sim,
        bounds: dataset.bounds,
        n_samples: n,
        field_shape,
        params_sha256: sha256_file(&params_path)?,
        fields_sha256: fields_sha,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

/// Load a dataset, verifying version, shapes, and array digests.
pub fn load(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.exists() {
        return Err(Error::missing(format!("{} has no manifest.json", dir.display())));
    }
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::shape(format!(
            "manifest version {} unsupported (expected {MANIFEST_VERSION})",
            manifest.version
        )));
    }
    let params_path = dir.join("params.f64");
    if sha256_file(&params_path)? != manifest.params_sha256 {
        return Err(Error::shape("params.f64 digest mismatch".to_string()));
    }
    let (pdims, pdata) = read_array(&params_path)?;
    if pdims != vec![manifest.n_samples, 3] {
        return Err(Error::shape(format!("params shape {pdims:?}, expected [{}, 3]", manifest.n_samples)));
    }
    let spec = manifest.sim.full;
    let expect_shape = vec![manifest.sim.time.n_t, spec.n_y, spec.n_x];
    if manifest.field_shape != expect_shape {
        return Err(Error::shape(format!(
            "manifest field shape {:?} inconsistent with config {:?}",
            manifest.field_shape, expect_shape
        )));
    }
    let mut samples = Vec::with_capacity(manifest.n_samples);
    for k in 0..manifest.n_samples {
        let path = dir.join("fields").join(format!("{k}.f64"));
        if sha256_file(&path)? != manifest.fields_sha256[k] {
            return Err(Error::shape(format!("fields/{k}.f64 digest mismatch")));
        }
        let (dims, values) = read_array(&path)?;
        if dims != expect_shape {
            return Err(Error::shape(format!("fields/{k}.f64 shape {dims:?}, expected {expect_shape:?}")));
        }
        let p = ParamVector::from_array([pdata[3 * k], pdata[3 * k + 1], pdata[3 * k + 2]]);
        samples.push((p, FieldSeries { spec, n_t: manifest.sim.time.n_t, values }));
    }
    Ok(Dataset {
        split: manifest.split,
        seed: manifest.seed,
        sim: manifest.sim,
        bounds: manifest.bounds,
        samples,
    })
}

/// Hex digest of a dataset's manifest, used by the determinism harness.
pub fn manifest_sha256(dir: &Path) -> Result<String> {
    sha256_file(&dir.join("manifest.json"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble;

    fn smoke_sim() -> SimConfig {
        SimConfig {
            full: GridSpec::new(-8.0, 8.0, -4.0, 4.0, 20, 10).unwrap(),
            sub: GridSpec::new(-0.8, 7.2, -2.0, 2.0, 11, 6).unwrap(),
            time: TimeGrid::new(10, 4e-5).unwrap(),
            c: 2000.0,
            exclude_source_from_sub: true,
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let sim = smoke_sim();
        let bounds = ParamBounds::reference_defaults();
        let a = generate_dataset(Split::Train, &sim, &bounds, 3, 11, 1).unwrap();
        let b = generate_dataset(Split::Train, &sim, &bounds, 3, 11, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exclusion_violation_is_reported_not_resampled() {
        let sim = smoke_sim();
        // Bounds entirely inside the zone of interest force a violation.
        let bounds = ParamBounds { omega: (4750.0, 5250.0), x_s: (1.0, 2.0), y_s: (-1.0, 1.0) };
        let err = generate_dataset(Split::Train, &sim, &bounds, 2, 0, 1).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "got {err:?}");
        assert!(err.to_string().contains("sample 0"));
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let sim = smoke_sim();
        let bounds = ParamBounds::reference_defaults();
        let d = generate_dataset(Split::Test, &sim, &bounds, 2, 5, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save(&d, dir.path()).unwrap();
        let loaded = load(dir.path()).unwrap();
        assert_eq!(d, loaded);
        // Manifests are stable across repeated saves.
        let h1 = manifest_sha256(dir.path()).unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        save(&d, dir2.path()).unwrap();
        assert_eq!(h1, manifest_sha256(dir2.path()).unwrap());
    }

    #[test]
    fn empty_dataset_round_trips() {
        let d = Dataset {
            split: Split::Mc,
            seed: 0,
            sim: smoke_sim(),
            bounds: ParamBounds::reference_defaults(),
            samples: vec![],
        };
        let dir = tempfile::tempdir().unwrap();
        save(&d, dir.path()).unwrap();
        let loaded = load(dir.path()).unwrap();
        assert!(loaded.is_empty());
    }

    #[test]
    fn corrupted_field_fails_to_load() {
        let sim = smoke_sim();
        let d = generate_dataset(Split::Test, &sim, &ParamBounds::reference_defaults(), 1, 5, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save(&d, dir.path()).unwrap();
        let victim = dir.path().join("fields").join("0.f64");
        let mut bytes = fs::read(&victim).unwrap();
        bytes.truncate(bytes.len() - 8);
        fs::write(&victim, &bytes).unwrap();
        assert!(load(dir.path()).is_err());
    }

    #[test]
    fn stored_fields_pass_the_solver_residual_oracle() {
        let sim = smoke_sim();
        let d = generate_dataset(Split::Train, &sim, &ParamBounds::reference_defaults(), 2, 3, 1).unwrap();
        let grid = build_grid(sim.full).unwrap();
        let ops = assemble(&grid, grid.boundary_nodes(), sim.c, sim.time.dt).unwrap();
        for (p, field) in &d.samples {
            let src = crate::fem::SourceTerm::new(&sim.full, p.omega, p.x_s, p.y_s, None).unwrap();
            for &t in &[2usize, 5, 9] {
                let f_n = src.nodal(sim.full.n_nodes(), sim.time.t(t));
                let res = ops.step_residual(field.frame(t), field.frame(t - 1), field.frame(t - 2), &f_n);
                assert!(res <= 1e-10, "t = {t}: residual {res}");
            }
        }
    }
}
