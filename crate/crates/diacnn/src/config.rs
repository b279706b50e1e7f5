//! TOML run configuration. Unknown keys are errors; every field has a default.

use std::path::{Path, PathBuf};

use diacnn_core::data::{binary_task_filter, Dataset, PreprocessConfig};
use diacnn_core::net::{build_baseline_cnn, build_diacnn, build_mini_inception, ModelSpec};
use diacnn_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
#[derive(Default)]
pub enum Task {
    /// All eight ODIR classes.
    #[default]
    Multiclass,
    /// Two classes; samples outside both sets are dropped.
    Binary { positive: Vec<String>, negative: Vec<String> },
}


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    /// Manifest CSV, relative to the config file.
    pub manifest: PathBuf,
    pub task: Task,
    /// Used only when the manifest has no split assignments.
    pub ratios: [f64; 3],
    pub stratify: bool,
    pub seed: u64,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self { manifest: PathBuf::from("manifest.csv"), task: Task::Multiclass, ratios: [0.8, 0.1, 0.1], stratify: true, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelPreset {
    Diacnn,
    BaselineCnn,
    MiniInception,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub preset: ModelPreset,
    /// Channel width of the first stage (DiaCNN) or of the blocks (mini inception).
    pub net_width: usize,
    /// Defaults to the number of classes in the task.
    pub num_classes: Option<usize>,
    /// Parameter initialization seed; defaults to `train.seed`.
    pub init_seed: Option<u64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { preset: ModelPreset::Diacnn, net_width: 16, num_classes: None, init_seed: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Run directory, relative to the config file.
    pub dir: PathBuf,
    /// Split whose features are embedded by `report`.
    pub eval_split: String,
    pub tsne_perplexity: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("run"), eval_split: "test".into(), tsne_perplexity: 30.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dataset: DatasetSection,
    pub preprocess: PreprocessConfig,
    pub model: ModelSection,
    pub train: TrainConfig,
    /// Augment training batches with `preprocess.augment`.
    pub augment: bool,
    pub output: OutputSection,
    /// Directory the relative paths above are resolved against.
    #[serde(skip)]
    pub base: PathBuf,
}

impl RunConfig {
    /// Parses without touching the filesystem.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses `path` and checks that the manifest it names exists.
    /// Returns the config with the file's exact text.
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        if !cfg.manifest_path().is_file() {
            return Err(Error::Config(format!("manifest {} does not exist", cfg.manifest_path().display())));
        }
        Ok((cfg, text))
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.base.join(&self.dataset.manifest)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.base.join(&self.output.dir)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies the `--seed` flag to every seed in the run.
    pub fn override_seed(&mut self, seed: u64) {
        self.dataset.seed = seed;
        self.preprocess.seed = seed;
        self.train.seed = seed;
        self.model.init_seed = None;
    }

    pub fn validate(&self) -> Result<()> {
        self.preprocess.validate()?;
        self.train.validate()?;
        if let Task::Binary { positive, negative } = &self.dataset.task {
            let odir = Dataset::odir();
            for t in positive.iter().chain(negative) {
                odir.class_index(t).ok_or_else(|| Error::Config(format!("unknown class `{t}` in dataset.task")))?;
            }
        }
        if !(self.output.tsne_perplexity >= 1.0) {
            return Err(Error::Config("output.tsne_perplexity must be at least 1".into()));
        }
        self.output.eval_split.parse::<diacnn_core::data::Split>().map_err(Error::Config)?;
        Ok(())
    }

    /// Applies the task mapping to a loaded manifest.
    pub fn apply_task(&self, ds: &Dataset) -> Result<Dataset> {
        match &self.dataset.task {
            Task::Multiclass => Ok(ds.clone()),
            Task::Binary { positive, negative } => {
                let ids = |names: &[String]| -> Vec<usize> { names.iter().filter_map(|n| ds.class_index(n)).collect() };
                Ok(binary_task_filter(ds, &ids(positive), &ids(negative))?)
            }
        }
    }

    pub fn task_classes(&self) -> usize {
        match self.dataset.task {
            Task::Multiclass => diacnn_core::data::ODIR_CLASSES.len(),
            Task::Binary { .. } => 2,
        }
    }

    pub fn init_seed(&self) -> u64 {
        self.model.init_seed.unwrap_or(self.train.seed)
    }

    /// Builds the network and checks it accepts the preprocessed images.
    pub fn build_model(&self) -> Result<ModelSpec> {
        let k = self.model.num_classes.unwrap_or(self.task_classes());
        if k != self.task_classes() {
            return Err(Error::Config(format!("model.num_classes {k} does not match the task's {} classes", self.task_classes())));
        }
        let hw = self.preprocess.output_hw();
        let spec = match self.model.preset {
            ModelPreset::Diacnn => build_diacnn(self.model.net_width, k)?,
            ModelPreset::BaselineCnn => build_baseline_cnn(k, hw)?,
            ModelPreset::MiniInception => build_mini_inception(k, self.model.net_width)?,
        };
        let [_, h, w] = spec.input_shape;
        if (h, w) != hw {
            return Err(Error::Config(format!(
                "{:?} expects {h}×{w} input but preprocessing produces {}×{}; set preprocess.input_hw",
                self.model.preset, hw.0, hw.1
            )));
        }
        Ok(spec)
    }
}
