use std::path::{Path, PathBuf};

use crate::colorfeat::{TrainingRegion, DEFAULT_D_MAX};
use crate::error::{Error, Result};
use crate::imagecore::StructuringElement;
use crate::kv::KeyValues;
use crate::morphpost::MorphConfig;
use crate::shadowfilter::DEFAULT_MIN_AREA;
use crate::svmseg::{TrainParams, DEFAULT_C, DEFAULT_SAMPLES_PER_CLASS, DEFAULT_TOL};

/// Frames per reporting group.
pub const DEFAULT_GROUP_SIZE: usize = 10;

/// Every tunable of the pipeline.
///
/// The text form is one `key = value` per line with the field names below as
/// keys; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub training_region: TrainingRegion,
    pub d_max: f64,
    pub filtering_enabled: bool,
    pub min_shadow_area: usize,
    pub se_detect: StructuringElement,
    pub se_post: StructuringElement,
    pub svm_c: f64,
    pub svm_tol: f64,
    pub samples_per_class: usize,
    pub seed: u64,
    pub open_first: bool,
    pub fill_holes: bool,
    pub keep_largest: bool,
    pub group_size: usize,
    pub output_dir: Option<PathBuf>,
    pub dump_stages: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            training_region: TrainingRegion::Trapezoid,
            d_max: DEFAULT_D_MAX,
            filtering_enabled: true,
            min_shadow_area: DEFAULT_MIN_AREA,
            se_detect: StructuringElement::square3(),
            se_post: StructuringElement::square3(),
            svm_c: DEFAULT_C,
            svm_tol: DEFAULT_TOL,
            samples_per_class: DEFAULT_SAMPLES_PER_CLASS,
            seed: 0,
            open_first: true,
            fill_holes: true,
            keep_largest: true,
            group_size: DEFAULT_GROUP_SIZE,
            output_dir: None,
            dump_stages: false,
        }
    }
}

const KEYS: &[&str] = &[
    "training_region",
    "d_max",
    "filtering_enabled",
    "min_shadow_area",
    "se_detect",
    "se_post",
    "svm_c",
    "svm_tol",
    "samples_per_class",
    "seed",
    "open_first",
    "fill_holes",
    "keep_largest",
    "group_size",
    "output_dir",
    "dump_stages",
];

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.d_max > 0.0) {
            return bad(format!("d_max must be positive, got {}", self.d_max));
        }
        if !(self.svm_c > 0.0) {
            return bad(format!("svm_c must be positive, got {}", self.svm_c));
        }
        if !(self.svm_tol > 0.0) {
            return bad(format!("svm_tol must be positive, got {}", self.svm_tol));
        }
        if self.samples_per_class == 0 {
            return bad("samples_per_class must be positive".into());
        }
        if self.min_shadow_area == 0 {
            return bad("min_shadow_area must be positive".into());
        }
        if self.group_size == 0 {
            return bad("group_size must be positive".into());
        }
        Ok(())
    }

    pub fn morph(&self) -> MorphConfig {
        MorphConfig {
            se: self.se_post.clone(),
            open_first: self.open_first,
            fill_holes: self.fill_holes,
            keep_largest: self.keep_largest,
            ..MorphConfig::default()
        }
    }

    pub fn train_params(&self) -> TrainParams {
        TrainParams::new(self.svm_c, self.svm_tol)
    }

    /// Apply `key = value` overrides on top of `self`.
    pub fn apply(&mut self, kv: &KeyValues) -> Result<()> {
        for key in kv.keys() {
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!("unknown key {key:?}")));
            }
        }
        let cfg_err = |key: &str, e: &dyn std::fmt::Display| Error::Config(format!("{key}: {e}"));
        macro_rules! parse {
            ($key:literal, $field:ident) => {
                if let Some(v) = kv.get($key) {
                    self.$field = v.parse().map_err(|e| cfg_err($key, &e))?;
                }
            };
        }
        parse!("training_region", training_region);
        parse!("d_max", d_max);
        parse!("filtering_enabled", filtering_enabled);
        parse!("min_shadow_area", min_shadow_area);
        parse!("se_detect", se_detect);
        parse!("se_post", se_post);
        parse!("svm_c", svm_c);
        parse!("svm_tol", svm_tol);
        parse!("samples_per_class", samples_per_class);
        parse!("seed", seed);
        parse!("open_first", open_first);
        parse!("fill_holes", fill_holes);
        parse!("keep_largest", keep_largest);
        parse!("group_size", group_size);
        parse!("dump_stages", dump_stages);
        if let Some(v) = kv.get("output_dir") {
            self.output_dir = (!v.is_empty()).then(|| PathBuf::from(v));
        }
        self.validate()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply(&KeyValues::parse(text)?)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }

    pub fn to_text(&self) -> String {
        let mut kv = KeyValues::default();
        kv.push("training_region", &self.training_region);
        kv.push("d_max", format!("{:?}", self.d_max));
        kv.push("filtering_enabled", self.filtering_enabled);
        kv.push("min_shadow_area", self.min_shadow_area);
        kv.push("se_detect", &self.se_detect);
        kv.push("se_post", &self.se_post);
        kv.push("svm_c", format!("{:?}", self.svm_c));
        kv.push("svm_tol", format!("{:?}", self.svm_tol));
        kv.push("samples_per_class", self.samples_per_class);
        kv.push("seed", self.seed);
        kv.push("open_first", self.open_first);
        kv.push("fill_holes", self.fill_holes);
        kv.push("keep_largest", self.keep_largest);
        kv.push("group_size", self.group_size);
        kv.push(
            "output_dir",
            self.output_dir
                .as_deref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
        kv.push("dump_stages", self.dump_stages);
        kv.to_text()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let cfg = PipelineConfig {
            training_region: "rect:10,200,300,240".parse().unwrap(),
            filtering_enabled: false,
            se_post: "cross:5".parse().unwrap(),
            output_dir: Some("out/run".into()),
            seed: 42,
            ..PipelineConfig::default()
        };
        assert_eq!(PipelineConfig::from_text(&cfg.to_text()).unwrap(), cfg);
        let d = PipelineConfig::default();
        assert_eq!(PipelineConfig::from_text(&d.to_text()).unwrap(), d);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = PipelineConfig::from_text("# tuned\nsvm_c = 100\nse_detect = cross:3\n").unwrap();
        assert_eq!(cfg.svm_c, 100.0);
        assert_eq!(cfg.se_detect, StructuringElement::cross3());
        assert_eq!(cfg.d_max, DEFAULT_D_MAX);
    }

    #[test]
    fn bad_values_rejected() {
        assert!(PipelineConfig::from_text("d_max = -1").is_err());
        assert!(PipelineConfig::from_text("svm_c = abc").is_err());
        assert!(PipelineConfig::from_text("colour = red").is_err());
        assert!(PipelineConfig::from_text("se_post = disk:3").is_err());
        assert!(PipelineConfig::from_text("group_size = 0").is_err());
    }
}
