//! Run configuration: one JSON file drives dataset generation, training,
//! evaluation, and the uncertainty-quantification reports. Every field has a
//! default reproducing the reference setup, so an empty object `{}` is a
//! valid full-scale configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{SimConfig, Split};
use crate::grid::{GridSpec, TimeGrid};
use crate::lhs::ParamBounds;
use crate::models::{ModelVariant, PodRfHyper, TrainHyper};
use crate::{Error, Result};

/// Monte-Carlo reporting knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UqConfig {
    /// Latent draws per generative variant when estimating discrepancies.
    pub n_draws: usize,
    /// Bins of the amplitude histograms.
    pub hist_bins: usize,
}

impl Default for UqConfig {
    fn default() -> Self {
        UqConfig { n_draws: 100, hist_bins: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    /// Full simulation domain.
    pub full: GridSpec,
    /// Zone of interest; must nest inside `full`.
    pub sub: GridSpec,
    pub n_t: usize,
    pub dt: f64,
    /// Wave speed, m/s.
    pub c: f64,
    pub bounds: ParamBounds,
    pub n_train: usize,
    pub n_test: usize,
    pub n_mc: usize,
    /// Reject parameter draws whose source falls inside the zone of interest.
    pub exclude_source_from_sub: bool,
    pub seed: u64,
    /// Worker threads for dataset generation; 1 keeps runs sequential.
    pub jobs: usize,
    /// Optimizer settings for the deterministic regressors.
    pub train: TrainHyper,
    /// Optimizer settings for the adversarial variants; the critic objective
    /// wants a momentum-free, lower learning-rate schedule.
    pub wgan: TrainHyper,
    pub pod: PodRfHyper,
    pub uq: UqConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            output_dir: PathBuf::from("out"),
            full: GridSpec { x_min: -8.0, x_max: 8.0, y_min: -4.0, y_max: 4.0, n_x: 40, n_y: 20 },
            sub: GridSpec { x_min: -0.8, x_max: 7.2, y_min: -2.0, y_max: 2.0, n_x: 21, n_y: 11 },
            n_t: 100,
            dt: 4e-5,
            c: 2000.0,
            bounds: ParamBounds::reference_defaults(),
            n_train: 100,
            n_test: 10,
            n_mc: 1000,
            exclude_source_from_sub: true,
            seed: 42,
            jobs: 1,
            train: TrainHyper::default(),
            wgan: TrainHyper::wgan_defaults(),
            pod: PodRfHyper::default(),
            uq: UqConfig::default(),
        }
    }
}

impl RunConfig {
    /// Default configuration with the full grid refined to 41 x 21 so every
    /// zone-of-interest node coincides with a full-grid node (dx = dy = 0.4).
    pub fn aligned() -> Self {
        let mut cfg = RunConfig::default();
        cfg.full.n_x = 41;
        cfg.full.n_y = 21;
        cfg
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::config(format!("config file {} does not exist", path.display())));
        }
        let cfg: RunConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Collect every problem at once so a bad config fails with a complete
    /// list instead of one error per run.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if let Err(e) = self.full.validate() {
            problems.push(format!("full: {e}"));
        }
        if let Err(e) = self.sub.validate() {
            problems.push(format!("sub: {e}"));
        }
        if self.full.validate().is_ok() && self.sub.validate().is_ok() && !self.full.contains(&self.sub) {
            problems.push("sub: zone of interest extends outside the full domain".to_string());
        }
        if let Err(e) = TimeGrid::new(self.n_t, self.dt) {
            problems.push(format!("time: {e}"));
        }
        if self.c <= 0.0 {
            problems.push(format!("c: wave speed must be positive, got {}", self.c));
        }
        if let Err(e) = self.bounds.validate() {
            problems.push(format!("bounds: {e}"));
        }
        for (name, n) in [("n_train", self.n_train), ("n_test", self.n_test), ("n_mc", self.n_mc)] {
            if n == 0 {
                problems.push(format!("{name}: dataset size must be at least 1"));
            }
        }
        if self.exclude_source_from_sub && self.bounds.validate().is_ok() && self.sub.validate().is_ok() {
            let (xl, xh) = self.bounds.x_s;
            let (yl, yh) = self.bounds.y_s;
            let overlap_x = xh >= self.sub.x_min && xl <= self.sub.x_max;
            let overlap_y = yh >= self.sub.y_min && yl <= self.sub.y_max;
            if overlap_x && overlap_y {
                problems.push(
                    "bounds: source box intersects the zone of interest while source exclusion is on"
                        .to_string(),
                );
            }
        }
        if self.jobs == 0 {
            problems.push("jobs: worker count must be at least 1".to_string());
        }
        if self.uq.n_draws == 0 {
            problems.push("uq.n_draws: must be at least 1".to_string());
        }
        if self.uq.hist_bins == 0 {
            problems.push("uq.hist_bins: must be at least 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::config(problems.join("; ")))
        }
    }

    pub fn time(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.n_t, self.dt)
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            full: self.full,
            sub: self.sub,
            time: TimeGrid { n_t: self.n_t, dt: self.dt },
            c: self.c,
            exclude_source_from_sub: self.exclude_source_from_sub,
        }
    }

    pub fn dataset_dir(&self, split: Split) -> PathBuf {
        self.output_dir.join("datasets").join(split.to_string())
    }

    pub fn model_dir(&self, variant: ModelVariant) -> PathBuf {
        // Zoom couplings reuse the trained base model.
        self.output_dir.join("models").join(ModelVariant::new(variant.kind, false).to_string())
    }

    pub fn report_dir(&self) -> PathBuf {
        self.output_dir.join("reports")
    }

    /// Split-specific generation seed derived from the base seed.
    pub fn split_seed(&self, split: Split) -> u64 {
        match split {
            Split::Train => self.seed,
            Split::Test => self.seed.wrapping_add(1),
            Split::Mc => self.seed.wrapping_add(2),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_reproduce_reference_constants() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!((cfg.full.x_min, cfg.full.x_max), (-8.0, 8.0));
        assert_eq!((cfg.full.y_min, cfg.full.y_max), (-4.0, 4.0));
        assert_eq!((cfg.full.n_x, cfg.full.n_y), (40, 20));
        assert_eq!((cfg.n_t, cfg.dt, cfg.c), (100, 4e-5, 2000.0));
        assert_eq!((cfg.n_train, cfg.n_test, cfg.n_mc), (100, 10, 1000));
        assert_eq!(cfg.bounds.omega, (4750.0, 5250.0));
        assert_eq!(cfg.bounds.x_s, (-2.2, -1.5));
        assert_eq!(cfg.bounds.y_s, (-1.8, 0.5));
        // Half-extents of the zone of interest are 4 x 2.
        assert_eq!(cfg.sub.x_max - cfg.sub.x_min, 8.0);
        assert_eq!(cfg.sub.y_max - cfg.sub.y_min, 4.0);
    }

    #[test]
    fn aligned_mode_nests_exactly() {
        let cfg = RunConfig::aligned();
        cfg.validate().unwrap();
        assert_eq!((cfg.full.n_x, cfg.full.n_y), (41, 21));
        assert!((cfg.full.dx() - 0.4).abs() < 1e-12);
        assert!((cfg.sub.dx() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn empty_json_gives_defaults() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn partial_json_overrides_only_named_fields() {
        let cfg: RunConfig = serde_json::from_str(r#"{"n_train": 4, "jobs": 2}"#).unwrap();
        assert_eq!(cfg.n_train, 4);
        assert_eq!(cfg.jobs, 2);
        assert_eq!(cfg.n_mc, 1000);
    }

    #[test]
    fn validation_lists_every_problem() {
        let mut cfg = RunConfig::default();
        cfg.bounds.omega = (5250.0, 4750.0);
        cfg.n_test = 0;
        cfg.c = -1.0;
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("bounds"), "{msg}");
        assert!(msg.contains("n_test"), "{msg}");
        assert!(msg.contains("c:"), "{msg}");
    }

    #[test]
    fn sub_outside_full_is_rejected() {
        let mut cfg = RunConfig::default();
        cfg.sub.x_max = 9.0;
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("outside the full domain"), "{msg}");
    }

    #[test]
    fn source_box_inside_zone_is_rejected_when_exclusion_is_on() {
        let mut cfg = RunConfig::default();
        cfg.bounds.x_s = (0.0, 1.0);
        cfg.bounds.y_s = (-1.0, 0.0);
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("source box intersects"), "{msg}");
        cfg.exclude_source_from_sub = false;
        cfg.validate().unwrap();
    }

    #[test]
    fn missing_config_file_is_a_config_error() {
        let err = RunConfig::load(Path::new("/nonexistent/config.json")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
