use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::data::{load_mnist_idx, subset, synth_blobs, Dataset};
use crate::error::{ensure, Error, Result};
use crate::estimator::Aggregation;
use crate::nn::{LayerSpec, ModelSpec};
use crate::optim::OptimizerConfig;
use crate::range_test::{PeakMode, RangeTestConfig};
use crate::schedules::{MomentumConfig, ScheduleConfig};

pub const CONFIG_VERSION: u32 = 1;

/// Environment variable naming the directory that holds the four MNIST
/// IDX files when a config does not give one.
pub const MNIST_DIR_ENV: &str = "SUPERCONV_MNIST_DIR";

pub const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataConfig {
    Mnist {
        #[serde(default)]
        dir: Option<PathBuf>,
        /// Balanced training subset; the test set is always used whole.
        #[serde(default)]
        per_class: Option<usize>,
        /// Defaults to the experiment seed.
        #[serde(default)]
        subset_seed: Option<u64>,
    },
    Blobs {
        n_classes: usize,
        per_class: usize,
        test_per_class: usize,
        spread: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub layers: Vec<LayerSpec>,
}

impl ModelConfig {
    pub fn spec(&self, seed: u64) -> ModelSpec {
        ModelSpec {
            layers: self.layers.clone(),
            seed,
        }
    }

    /// Layer kinds and widths, ignoring batchnorm averaging and dropout
    /// ratios.
    pub fn shape(&self) -> Vec<(&'static str, usize, usize)> {
        self.layers
            .iter()
            .map(|l| match *l {
                LayerSpec::Dense { inputs, outputs } => ("dense", inputs, outputs),
                LayerSpec::Batchnorm { dim, .. } => ("batchnorm", dim, dim),
                LayerSpec::Relu => ("relu", 0, 0),
                LayerSpec::Dropout { .. } => ("dropout", 0, 0),
            })
            .collect()
    }
}

fn default_alpha() -> f64 {
    crate::estimator::DEFAULT_ALPHA
}
fn one() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(default)]
    pub enabled: bool,
    /// Iterations between parameter snapshots.
    #[serde(default = "one")]
    pub cadence: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub aggregation: Aggregation,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            cadence: 1,
            alpha: default_alpha(),
            aggregation: Aggregation::AbsSum,
        }
    }
}

fn default_divisor() -> f64 {
    4.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(default = "default_divisor")]
    pub divisor: f64,
    #[serde(default)]
    pub peak: PeakMode,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            divisor: default_divisor(),
            peak: PeakMode::Accuracy,
        }
    }
}

/// The comparison arm of a limited-data sweep. Unset fields inherit from
/// the main config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub schedule: ScheduleConfig,
    pub momentum: MomentumConfig,
    #[serde(default)]
    pub epochs: Option<u64>,
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub trials: Option<usize>,
    pub baseline: BaselineConfig,
}

/// One experiment, as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub batch_size: usize,
    #[serde(default)]
    pub epochs: Option<u64>,
    #[serde(default)]
    pub iterations: Option<u64>,
    /// Iterations between test evaluations; defaults to once per epoch.
    /// The last iteration is always evaluated.
    #[serde(default)]
    pub eval_every: Option<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Test accuracies whose first crossing is reported in the summary.
    #[serde(default)]
    pub thresholds: Vec<f64>,
    pub data: DataConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    pub schedule: ScheduleConfig,
    pub momentum: MomentumConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub range_test: Option<RangeTestConfig>,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

impl ExperimentConfig {
    /// Parses a config; relative data paths resolve against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> std::result::Result<Self, String> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        if let DataConfig::Mnist { dir: Some(dir), .. } = &mut cfg.data {
            if dir.is_relative() {
                *dir = base_dir.join(&*dir);
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|message| Error::Config {
            path: path.to_path_buf(),
            message,
        })
    }

    /// Checks everything that does not need the data.
    pub fn validate(&self) -> Result<()> {
        ensure(self.version == CONFIG_VERSION, || {
            format!("config version {} is not supported (expected {CONFIG_VERSION})", self.version)
        })?;
        ensure(self.batch_size >= 1, || "batch_size must be positive".into())?;
        match (self.epochs, self.iterations) {
            (Some(_), Some(_)) => return Err(Error::Validation("give either epochs or iterations, not both".into())),
            (None, None) => return Err(Error::Validation("one of epochs or iterations is required".into())),
            _ => {}
        }
        ensure(self.eval_every != Some(0), || "eval_every must be positive".into())?;
        ensure(self.estimator.cadence >= 1, || "estimator cadence must be positive".into())?;
        ensure(self.thresholds.iter().all(|t| (0.0..=1.0).contains(t)), || {
            "thresholds are accuracies in [0,1]".into()
        })?;
        self.model.spec(self.seed).validate()?;
        self.optimizer.validate()?;
        if let Some(rt) = &self.range_test {
            rt.validate()?;
        }
        match &self.data {
            DataConfig::Mnist { per_class, .. } => {
                ensure(per_class.is_none_or(|p| p >= 1), || "per_class must be positive".into())
            }
            DataConfig::Blobs {
                per_class,
                test_per_class,
                ..
            } => ensure(*per_class >= 1 && *test_per_class >= 1, || {
                "blob counts must be positive".into()
            }),
        }
    }

    /// Total iterations for a training set of `n_train` examples.
    pub fn total_iters(&self, n_train: usize) -> u64 {
        match (self.epochs, self.iterations) {
            (Some(e), _) => e * self.iters_per_epoch(n_train),
            (None, Some(i)) => i,
            (None, None) => 0,
        }
    }

    pub fn iters_per_epoch(&self, n_train: usize) -> u64 {
        n_train.div_ceil(self.batch_size.max(1)) as u64
    }

    /// Loads (train, test), checking the model fits the data and the batch
    /// fits the training set.
    pub fn load_data(&self) -> Result<(Arc<Dataset>, Arc<Dataset>)> {
        let (train, test) = match &self.data {
            DataConfig::Mnist {
                dir,
                per_class,
                subset_seed,
            } => {
                let dir = match dir {
                    Some(d) => d.clone(),
                    None => default_mnist_dir()?,
                };
                let (train, test) = mnist(&dir)?;
                match per_class {
                    Some(k) => (Arc::new(subset(&train, *k, subset_seed.unwrap_or(self.seed))?), test),
                    None => (train, test),
                }
            }
            DataConfig::Blobs {
                n_classes,
                per_class,
                test_per_class,
                spread,
            } => (
                Arc::new(synth_blobs(*n_classes, *per_class, *spread, derive_seed(self.seed, SeedStream::TrainData))?),
                Arc::new(synth_blobs(*n_classes, *test_per_class, *spread, derive_seed(self.seed, SeedStream::TestData))?),
            ),
        };
        ensure(self.batch_size <= train.len(), || {
            format!("batch_size {} exceeds the {} training examples", self.batch_size, train.len())
        })?;
        let (n_in, n_out) = self.model.spec(self.seed).validate()?;
        ensure(n_in == train.n_features(), || {
            format!("model takes {n_in} inputs but the data has {} features", train.n_features())
        })?;
        ensure(n_out == train.n_classes(), || {
            format!("model has {n_out} outputs but the data has {} classes", train.n_classes())
        })?;
        Ok((train, test))
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum SeedStream {
    Shuffle,
    TrainData,
    TestData,
}

/// Independent sub-seed for one consumer of the experiment seed.
pub(crate) fn derive_seed(seed: u64, stream: SeedStream) -> u64 {
    let tag = match stream {
        SeedStream::Shuffle => 0x5348_5546,
        SeedStream::TrainData => 0x5452_4e00,
        SeedStream::TestData => 0x5445_5354,
    };
    // splitmix64 finaliser
    let mut z = seed ^ tag;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `$SUPERCONV_MNIST_DIR`, else the first `data/mnist` found walking up
/// from the working directory.
pub fn default_mnist_dir() -> Result<PathBuf> {
    if let Some(dir) = std::env::var_os(MNIST_DIR_ENV) {
        return Ok(PathBuf::from(dir));
    }
    let cwd = std::env::current_dir().map_err(|e| Error::io(".", e))?;
    for dir in cwd.ancestors() {
        let candidate = dir.join("data").join("mnist");
        if candidate.join(MNIST_FILES[0]).is_file() {
            return Ok(candidate);
        }
    }
    Err(Error::InsufficientData(format!(
        "MNIST not found: set {MNIST_DIR_ENV} or place the IDX files under data/mnist"
    )))
}

type Split = (Arc<Dataset>, Arc<Dataset>);

/// Loads MNIST once per process and directory.
pub fn mnist(dir: &Path) -> Result<Split> {
    static CACHE: OnceLock<Mutex<HashMap<PathBuf, Split>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = dir.canonicalize().unwrap_or_else(|_| dir.to_path_buf());
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(hit) = map.get(&key) {
        return Ok(hit.clone());
    }
    let [ti, tl, vi, vl] = MNIST_FILES.map(|f| dir.join(f));
    let split = (Arc::new(load_mnist_idx(&ti, &tl)?), Arc::new(load_mnist_idx(&vi, &vl)?));
    map.insert(key, split.clone());
    Ok(split)
}
