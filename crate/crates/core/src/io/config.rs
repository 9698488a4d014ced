//! Run configuration from a flat TOML document with dotted keys.
//!
//! ```toml
//! tracker.move_pos_threshold = 0.05
//! noise.pos_sigma = 0.3
//! noise.dropout.heavy = 0.5
//! noise.fp_rate_by_class.MSU = 0.0
//! classes.MSU.extent = [0.8, 0.8, 1.8]
//! classes.CART.symmetry_planes = 1
//! metrics.alpha_sweep = true
//! ```
//!
//! Every key not listed in [`RunConfig::keys`] is rejected. Angles are
//! radians, durations seconds, lengths metres.

use std::path::{Path, PathBuf};

use toml::Value;

use crate::doe::Occlusion;
use crate::error::{Error, Result};
use crate::geometry::{ClassId, ClassRegistry, ClassSpec, PlanarPose};
use crate::metrics::{EvalMode, EvalOptions, DEFAULT_ALPHA};
use crate::simulate::{NoiseModel, SimParams};
use crate::tracker::TrackerConfig;

/// Environment variable holding the default config file path.
pub const CONFIG_ENV: &str = "OBTRACK_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricFlags {
    pub alpha: f64,
    pub alpha_sweep: bool,
}

impl Default for MetricFlags {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            alpha_sweep: false,
        }
    }
}

impl MetricFlags {
    pub fn options(&self, mode: EvalMode) -> EvalOptions {
        EvalOptions {
            mode,
            alpha: self.alpha,
            alpha_sweep: self.alpha_sweep,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub tracker: TrackerConfig,
    pub noise: NoiseModel,
    pub sim: SimParams,
    pub classes: ClassRegistry,
    pub metrics: MetricFlags,
    pub output_dir: Option<PathBuf>,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

fn float(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) if f.is_finite() => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::config(format!("{key}: expected a finite number"))),
    }
}

fn uint(key: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(Error::config(format!("{key}: expected a non-negative integer"))),
    }
}

fn boolean(key: &str, v: &Value) -> Result<bool> {
    v.as_bool()
        .ok_or_else(|| Error::config(format!("{key}: expected true or false")))
}

fn floats<const N: usize>(key: &str, v: &Value) -> Result<[f64; N]> {
    let arr = v
        .as_array()
        .filter(|a| a.len() == N)
        .ok_or_else(|| Error::config(format!("{key}: expected an array of {N} numbers")))?;
    let mut out = [0.0; N];
    for (o, x) in out.iter_mut().zip(arr) {
        *o = float(key, x)?;
    }
    Ok(out)
}

fn occlusion_index(key: &str, level: &str) -> Result<usize> {
    Occlusion::ALL
        .iter()
        .position(|o| o.key() == level)
        .ok_or_else(|| Error::config(format!("unknown config key `{key}`")))
}

#[derive(Default)]
struct ClassPatch {
    extent: Option<[f64; 3]>,
    planes: Option<u8>,
}

impl RunConfig {
    /// Scalar keys accepted in addition to the per-level, per-class and
    /// per-class-spec families documented in the module header.
    pub fn keys() -> &'static [&'static str] {
        &[
            "tracker.move_pos_threshold",
            "tracker.move_yaw_threshold",
            "tracker.confirm_count",
            "tracker.confirm_window",
            "tracker.history_capacity",
            "tracker.prune_after_tentative",
            "tracker.prune_after_confirmed",
            "tracker.stationary_reentry_frames",
            "tracker.orientation_outlier_threshold",
            "tracker.orientation_outlier_frames",
            "tracker.flip_vote_margin",
            "tracker.motion_min_history",
            "tracker.gate_scale",
            "tracker.spawn_gate_scale",
            "tracker.sensor_offset.x",
            "tracker.sensor_offset.y",
            "tracker.sensor_offset.heading",
            "noise.pos_sigma",
            "noise.yaw_sigma",
            "noise.flip_prob",
            "noise.dropout.<none|light|heavy>",
            "noise.sigma_scale.<none|light|heavy>",
            "noise.fp_rate",
            "noise.fp_rate_by_class.<CLASS>",
            "noise.fp_extent_jitter",
            "noise.fp_region",
            "noise.latency",
            "sim.duration",
            "sim.rate",
            "sim.object_linear_speed",
            "sim.object_angular_speed",
            "sim.object_spacing",
            "classes.<CLASS>.extent",
            "classes.<CLASS>.symmetry_planes",
            "metrics.alpha",
            "metrics.alpha_sweep",
            "output.dir",
        ]
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        let mut entries = Vec::new();
        flatten("", &table, &mut entries);

        let mut cfg = RunConfig::default();
        let mut offset = [
            cfg.tracker.sensor_offset.x,
            cfg.tracker.sensor_offset.y,
            cfg.tracker.sensor_offset.heading(),
        ];
        let mut patches: std::collections::BTreeMap<ClassId, ClassPatch> = Default::default();

        for (key, v) in &entries {
            let k = key.as_str();
            let t = &mut cfg.tracker;
            let n = &mut cfg.noise;
            let s = &mut cfg.sim;
            match k {
                "tracker.move_pos_threshold" => t.move_pos_threshold = float(k, v)?,
                "tracker.move_yaw_threshold" => t.move_yaw_threshold = float(k, v)?,
                "tracker.confirm_count" => t.confirm_count = uint(k, v)? as usize,
                "tracker.confirm_window" => t.confirm_window = float(k, v)?,
                "tracker.history_capacity" => t.history_capacity = uint(k, v)? as usize,
                "tracker.prune_after_tentative" => t.prune_after_tentative = float(k, v)?,
                "tracker.prune_after_confirmed" => t.prune_after_confirmed = float(k, v)?,
                "tracker.stationary_reentry_frames" => {
                    t.stationary_reentry_frames = uint(k, v)?.try_into().map_err(|_| Error::config(format!("{k}: out of range")))?
                }
                "tracker.orientation_outlier_threshold" => t.orientation_outlier_threshold = float(k, v)?,
                "tracker.orientation_outlier_frames" => {
                    t.orientation_outlier_frames = uint(k, v)?.try_into().map_err(|_| Error::config(format!("{k}: out of range")))?
                }
                "tracker.flip_vote_margin" => {
                    t.flip_vote_margin = uint(k, v)?.try_into().map_err(|_| Error::config(format!("{k}: out of range")))?
                }
                "tracker.motion_min_history" => t.motion_min_history = uint(k, v)? as usize,
                "tracker.gate_scale" => t.gate_scale = float(k, v)?,
                "tracker.spawn_gate_scale" => t.spawn_gate_scale = float(k, v)?,
                "tracker.sensor_offset.x" => offset[0] = float(k, v)?,
                "tracker.sensor_offset.y" => offset[1] = float(k, v)?,
                "tracker.sensor_offset.heading" => offset[2] = float(k, v)?,
                "noise.pos_sigma" => n.pos_sigma = float(k, v)?,
                "noise.yaw_sigma" => n.yaw_sigma = float(k, v)?,
                "noise.flip_prob" => n.flip_prob = float(k, v)?,
                "noise.fp_rate" => n.fp_rate = float(k, v)?,
                "noise.fp_extent_jitter" => n.fp_extent_jitter = float(k, v)?,
                "noise.fp_region" => n.fp_region = floats::<4>(k, v)?,
                "noise.latency" => n.latency = float(k, v)?,
                "sim.duration" => s.duration = float(k, v)?,
                "sim.rate" => s.rate = float(k, v)?,
                "sim.object_linear_speed" => s.object_linear_speed = float(k, v)?,
                "sim.object_angular_speed" => s.object_angular_speed = float(k, v)?,
                "sim.object_spacing" => s.object_spacing = float(k, v)?,
                "metrics.alpha" => cfg.metrics.alpha = float(k, v)?,
                "metrics.alpha_sweep" => cfg.metrics.alpha_sweep = boolean(k, v)?,
                "output.dir" => {
                    let dir = v
                        .as_str()
                        .ok_or_else(|| Error::config(format!("{k}: expected a path string")))?;
                    cfg.output_dir = Some(PathBuf::from(dir));
                }
                _ => {
                    let parts: Vec<&str> = k.split('.').collect();
                    match parts.as_slice() {
                        ["noise", "dropout", level] => n.dropout[occlusion_index(k, level)?] = float(k, v)?,
                        ["noise", "sigma_scale", level] => n.sigma_scale[occlusion_index(k, level)?] = float(k, v)?,
                        ["noise", "fp_rate_by_class", class] => {
                            n.fp_rate_by_class.insert(class.parse()?, float(k, v)?);
                        }
                        ["classes", class, field] => {
                            let p = patches.entry(class.parse()?).or_default();
                            match *field {
                                "extent" => p.extent = Some(floats::<3>(k, v)?),
                                "symmetry_planes" => {
                                    p.planes = Some(uint(k, v)?.try_into().map_err(|_| Error::config(format!("{k}: out of range")))?)
                                }
                                _ => return Err(Error::config(format!("unknown config key `{k}`"))),
                            }
                        }
                        _ => return Err(Error::config(format!("unknown config key `{k}`"))),
                    }
                }
            }
        }

        cfg.tracker.sensor_offset = PlanarPose::new(offset[0], offset[1], offset[2], 0.0);
        for (class, patch) in patches {
            let (extent, planes) = match cfg.classes.get(&class) {
                Some(spec) => (
                    patch.extent.unwrap_or(spec.nominal_extent),
                    patch.planes.unwrap_or(spec.symmetry_planes),
                ),
                None => (
                    patch.extent.ok_or_else(|| {
                        Error::config(format!("classes.{class}.extent is required for a new class"))
                    })?,
                    patch.planes.unwrap_or(0),
                ),
            };
            cfg.classes.insert(ClassSpec::new(class, extent, planes)?);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.tracker.validate()?;
        self.noise.validate()?;
        self.sim.validate()?;
        if !(self.metrics.alpha > 0.0 && self.metrics.alpha < 1.0) {
            return Err(Error::config(format!(
                "metrics.alpha = {} must lie in (0, 1)",
                self.metrics.alpha
            )));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Loads `path`, else the file named by [`CONFIG_ENV`], else defaults.
    pub fn resolve(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn dotted_and_sectioned_keys() {
        let cfg = RunConfig::from_toml_str(
            "tracker.confirm_count = 4\n\n[noise]\ndropout.heavy = 0.5\npos_sigma = 0.3\nfp_rate_by_class.MW = 0\n\n[metrics]\nalpha_sweep = true\n",
        )
        .unwrap();
        assert_eq!(cfg.tracker.confirm_count, 4);
        assert_eq!(cfg.noise.dropout[2], 0.5);
        assert_eq!(cfg.noise.pos_sigma, 0.3);
        assert_eq!(cfg.noise.fp_rate_for(&ClassId::Mw), 0.0);
        assert!(cfg.metrics.alpha_sweep);
    }

    #[test]
    fn unknown_keys_are_errors() {
        for doc in [
            "tracker.move_pos_treshold = 0.1",
            "noise.dropout.medium = 0.1",
            "classes.MW.colour = 1",
            "bogus = 1",
        ] {
            let err = RunConfig::from_toml_str(doc).unwrap_err();
            assert!(matches!(err, Error::Config(ref m) if m.contains("unknown config key")), "{doc}: {err}");
        }
    }

    #[test]
    fn type_and_range_errors() {
        assert!(RunConfig::from_toml_str("tracker.confirm_count = 2.5").is_err());
        assert!(RunConfig::from_toml_str("noise.flip_prob = 1.5").is_err());
        assert!(RunConfig::from_toml_str("metrics.alpha = 1.0").is_err());
        assert!(RunConfig::from_toml_str("classes.MSU.symmetry_planes = 3").is_err());
        assert!(RunConfig::from_toml_str("tracker.gate_scale = \"x\"").is_err());
        assert!(RunConfig::from_toml_str("not toml [").is_err());
    }

    #[test]
    fn class_overrides_and_new_classes() {
        let cfg = RunConfig::from_toml_str(
            "classes.MSU.extent = [1.0, 1.0, 2.0]\nclasses.CART.extent = [1, 0.5, 1]\nclasses.CART.symmetry_planes = 1\n",
        )
        .unwrap();
        let msu = cfg.classes.get(&ClassId::Msu).unwrap();
        assert_eq!(msu.nominal_extent, [1.0, 1.0, 2.0]);
        assert_eq!(msu.symmetry_planes, 2);
        assert_eq!(cfg.classes.symmetry_planes(&"CART".parse().unwrap()), 1);
        assert!(RunConfig::from_toml_str("classes.NEW.symmetry_planes = 1").is_err());
    }

    #[test]
    fn sensor_offset_keys() {
        let cfg = RunConfig::from_toml_str("[tracker.sensor_offset]\nx = 0.3\nheading = 0.1\n").unwrap();
        assert_eq!(cfg.tracker.sensor_offset.x, 0.3);
        assert_eq!(cfg.tracker.sensor_offset.heading(), 0.1);
    }
}
