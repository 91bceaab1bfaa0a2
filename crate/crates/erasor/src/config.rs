//! Pipeline parameters and the plain key-value config file loader.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};

/// All tunables of the removal pipeline.
///
/// Defaults target a vehicle-mounted spinning LiDAR: dynamic objects in
/// urban scenes sit in a bounded height band around the sensor, so the
/// volume of interest is a flat cylinder (radius `l_max`, heights in
/// `(h_min, h_max)`).
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Maximum planar radius of the volume of interest, meters.
    pub l_max: f64,
    /// Lower height bound of the volume of interest, meters (exclusive).
    pub h_min: f64,
    /// Upper height bound of the volume of interest, meters (exclusive).
    pub h_max: f64,
    /// Number of radial rings in the polar occupancy grid.
    pub n_rings: usize,
    /// Number of azimuthal sectors in the polar occupancy grid.
    pub n_sectors: usize,
    /// Scan-ratio threshold below which a bin counts as potentially dynamic.
    pub ratio_threshold: f64,
    /// Bins with fewer points than this on either side skip the ratio test.
    pub min_bin_points: usize,
    /// Height margin above the lowest-point mean for ground seed selection, meters.
    pub tau_seed: f64,
    /// Distance margin of the fitted ground plane, meters.
    pub tau_g: f64,
    /// Number of fit/extract rounds of the region-wise ground fit.
    pub num_rgpf_iterations: usize,
    /// Number of lowest points whose mean height anchors seed selection.
    pub num_seed_points: usize,
    /// Edge length of the evaluation voxel grid, meters.
    pub voxel_size: f64,
    /// Semantic class ids counted as dynamic ground truth.
    pub dynamic_classes: BTreeSet<u16>,
    /// Rebuild the map spatial index every this many applied frame deltas.
    pub index_rebuild_every: usize,
    /// Compute all frame deltas against the raw map instead of the
    /// progressively cleaned one, then apply their union.
    pub independent_frames: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            l_max: 80.0,
            h_min: -1.0,
            h_max: 3.0,
            n_rings: 20,
            n_sectors: 60,
            ratio_threshold: 0.2,
            min_bin_points: 10,
            tau_seed: 0.5,
            tau_g: 0.15,
            num_rgpf_iterations: 3,
            num_seed_points: 20,
            voxel_size: 0.2,
            dynamic_classes: [252, 253, 254, 255, 256, 257, 259].into_iter().collect(),
            index_rebuild_every: 1,
            independent_frames: false,
        }
    }
}

impl PipelineConfig {
    /// Checks the parameter invariants, naming the offending field.
    // Negated comparisons on purpose: they also reject NaN values.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        fn fail(field: &'static str, detail: String) -> Result<()> {
            Err(Error::ConfigInvariant { field, detail })
        }
        if !(self.l_max > 0.0) {
            return fail("L_max", format!("must be > 0, got {}", self.l_max));
        }
        if !(self.h_min < self.h_max) {
            return fail(
                "h_min",
                format!("h_min {} must be < h_max {}", self.h_min, self.h_max),
            );
        }
        if self.n_rings < 1 {
            return fail("N_r", "must be >= 1".into());
        }
        if self.n_sectors < 1 {
            return fail("N_theta", "must be >= 1".into());
        }
        if !(self.ratio_threshold > 0.0 && self.ratio_threshold < 1.0) {
            return fail(
                "ratio_threshold",
                format!("must lie in (0, 1), got {}", self.ratio_threshold),
            );
        }
        if !(self.tau_g > 0.0) {
            return fail("tau_g", format!("must be > 0, got {}", self.tau_g));
        }
        if !(self.tau_seed >= 0.0) {
            return fail("tau_seed", format!("must be >= 0, got {}", self.tau_seed));
        }
        if self.num_rgpf_iterations < 1 {
            return fail("num_rgpf_iterations", "must be >= 1".into());
        }
        if self.num_seed_points < 1 {
            return fail("num_seed_points", "must be >= 1".into());
        }
        if !(self.voxel_size > 0.0) {
            return fail(
                "voxel_size",
                format!("must be > 0, got {}", self.voxel_size),
            );
        }
        if self.index_rebuild_every < 1 {
            return fail("index_rebuild_every", "must be >= 1".into());
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            value.parse().map_err(|e| Error::ConfigValue {
                key: key.to_string(),
                detail: format!("cannot parse `{value}`: {e}"),
            })
        }
        match key {
            "L_max" => self.l_max = num(key, value)?,
            "h_min" => self.h_min = num(key, value)?,
            "h_max" => self.h_max = num(key, value)?,
            "N_r" => self.n_rings = num(key, value)?,
            "N_theta" => self.n_sectors = num(key, value)?,
            "ratio_threshold" => self.ratio_threshold = num(key, value)?,
            "min_bin_points" => self.min_bin_points = num(key, value)?,
            "tau_seed" => self.tau_seed = num(key, value)?,
            "tau_g" => self.tau_g = num(key, value)?,
            "num_rgpf_iterations" => self.num_rgpf_iterations = num(key, value)?,
            "num_seed_points" => self.num_seed_points = num(key, value)?,
            "voxel_size" => self.voxel_size = num(key, value)?,
            "index_rebuild_every" => self.index_rebuild_every = num(key, value)?,
            "independent_frames" => self.independent_frames = num(key, value)?,
            "dynamic_classes" => {
                let mut classes = BTreeSet::new();
                for item in value.split(',') {
                    let item = item.trim();
                    if item.is_empty() {
                        continue;
                    }
                    classes.insert(num::<u16>(key, item)?);
                }
                self.dynamic_classes = classes;
            }
            _ => {
                return Err(Error::UnknownConfigKey {
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn is_dynamic_class(&self, label: Option<u16>) -> bool {
        label.is_some_and(|l| self.dynamic_classes.contains(&l))
    }
}

/// Parses config text in `key = value` form. Lines may carry `#` comments;
/// unknown keys are rejected and missing keys keep their defaults.
impl std::str::FromStr for PipelineConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigValue {
                key: line.to_string(),
                detail: "expected `key = value`".into(),
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Loads a config file, apply defaults for missing keys.
pub fn load_config(path: impl AsRef<Path>) -> Result<PipelineConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.parse()
}
