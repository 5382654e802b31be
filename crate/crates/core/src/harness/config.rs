//! JSON run configuration. Unknown keys are rejected everywhere.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::channel::{FadingModel, InterferenceModel};
use crate::error::{Error, Result};
use crate::optim::{OptimizerKind, ServerHyperParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Quadratic,
    LeastSquares,
    LogisticRegression,
    SoftmaxLinear,
    SmallMlp { hidden: usize },
}

fn default_true() -> bool {
    true
}

fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Balanced synthetic classification. Exactly one of `train_size` and
    /// `train_per_client` is given; the latter scales the data with `n_clients`.
    GaussianMixture {
        num_classes: usize,
        num_features: usize,
        #[serde(default)]
        train_size: Option<usize>,
        #[serde(default)]
        train_per_client: Option<usize>,
        test_size: usize,
        separation: f64,
        noise: f64,
        /// Append a constant-1 feature.
        #[serde(default = "default_true")]
        bias: bool,
    },
    LinearRegression {
        num_features: usize,
        size: usize,
        noise: f64,
    },
    QuadraticCenters {
        dim: usize,
        size: usize,
        spread: f64,
    },
    Csv {
        path: PathBuf,
        #[serde(default)]
        test_path: Option<PathBuf>,
        #[serde(default)]
        num_classes: Option<usize>,
        #[serde(default = "default_one")]
        feature_scale: f64,
        #[serde(default)]
        bias: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PartitionSpec {
    Iid,
    Dirichlet { concentration: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FadingSpec {
    /// Mean `mean`; the spread follows from the Rayleigh law.
    Rayleigh {
        mean: f64,
    },
    Constant {
        value: f64,
    },
    GaussianTruncated {
        mean: f64,
        std: f64,
    },
}

impl FadingSpec {
    pub fn build(&self) -> Result<FadingModel> {
        match *self {
            FadingSpec::Rayleigh { mean } => FadingModel::rayleigh(mean),
            FadingSpec::Constant { value } => FadingModel::constant(value),
            FadingSpec::GaussianTruncated { mean, std } => {
                FadingModel::gaussian_truncated(mean, std)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            FadingSpec::Rayleigh { mean } | FadingSpec::GaussianTruncated { mean, .. } => mean,
            FadingSpec::Constant { value } => value,
        }
    }

    pub fn with_mean(&self, mean: f64) -> Self {
        match *self {
            FadingSpec::Rayleigh { .. } => FadingSpec::Rayleigh { mean },
            FadingSpec::Constant { .. } => FadingSpec::Constant { value: mean },
            FadingSpec::GaussianTruncated { std, .. } => {
                FadingSpec::GaussianTruncated { mean, std }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferenceSpec {
    pub tail_index: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub fading: FadingSpec,
    pub interference: InterferenceSpec,
}

/// Initial model. `Auto` is zeros for the convex models and
/// uniform(-0.1, 0.1) for the MLP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    Auto,
    Zeros,
    Uniform { radius: f64 },
    Constant { value: f64 },
}

fn default_init() -> InitSpec {
    InitSpec::Auto
}

fn default_beta2() -> f64 {
    0.9
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    pub eta: f64,
    #[serde(default)]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    pub epsilon: f64,
    /// Defaults to the interference tail index.
    #[serde(default)]
    pub alpha_exp: Option<f64>,
    /// Every entry of the initial accumulator.
    #[serde(default)]
    pub v_init: f64,
    #[serde(default = "default_init")]
    pub w_init: InitSpec,
}

fn default_local_steps() -> usize {
    1
}

fn default_local_lr() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub dataset: DatasetSpec,
    pub partition: PartitionSpec,
    pub n_clients: usize,
    /// Local gradient steps per round; 1 sends the plain gradient.
    #[serde(default = "default_local_steps")]
    pub local_steps: usize,
    #[serde(default = "default_local_lr")]
    pub local_lr: f64,
    pub channel: ChannelSpec,
    pub optimizer: OptimizerSpec,
    pub rounds: usize,
    /// Defaults to 1 when `rounds <= 500` and 5 otherwise.
    #[serde(default)]
    pub eval_every: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub allow_alpha_mismatch: bool,
    /// Box radius used when deriving the gradient bound for unbounded losses.
    #[serde(default)]
    pub domain_radius: Option<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn eval_every(&self) -> usize {
        self.eval_every
            .unwrap_or(if self.rounds <= 500 { 1 } else { 5 })
    }

    pub fn alpha_exp(&self) -> f64 {
        self.optimizer
            .alpha_exp
            .unwrap_or(self.channel.interference.tail_index)
    }

    pub fn hyper_params(&self) -> ServerHyperParams {
        ServerHyperParams {
            eta: self.optimizer.eta,
            beta1: self.optimizer.beta1,
            beta2: self.optimizer.beta2,
            epsilon: self.optimizer.epsilon,
            alpha_exp: self.alpha_exp(),
        }
    }

    /// Checks everything that can be checked without generating data.
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::invalid("rounds", "must be at least 1"));
        }
        if self.n_clients == 0 {
            return Err(Error::invalid("n_clients", "must be at least 1"));
        }
        if self.local_steps == 0 {
            return Err(Error::invalid("local_steps", "must be at least 1"));
        }
        if !(self.local_lr.is_finite() && self.local_lr > 0.0) {
            return Err(Error::invalid("local_lr", "must be > 0"));
        }
        if self.eval_every == Some(0) {
            return Err(Error::invalid("eval_every", "must be at least 1"));
        }
        self.channel.fading.build()?;
        InterferenceModel::new(
            self.channel.interference.tail_index,
            self.channel.interference.scale,
            1,
        )?;
        self.hyper_params().validate(self.optimizer.kind)?;
        if !(self.optimizer.v_init.is_finite() && self.optimizer.v_init >= 0.0) {
            return Err(Error::invalid("v_init", "must be finite and >= 0"));
        }
        if let Some(a) = self.optimizer.alpha_exp {
            let t = self.channel.interference.tail_index;
            if a != t && !self.allow_alpha_mismatch && self.optimizer.kind != OptimizerKind::FedAvgM
            {
                return Err(Error::Config(format!(
                    "alpha_exp {a} differs from the interference tail index {t}; \
                     set allow_alpha_mismatch to run this ablation"
                )));
            }
        }
        if let PartitionSpec::Dirichlet { concentration } = self.partition {
            if !(concentration.is_finite() && concentration > 0.0) {
                return Err(Error::invalid("concentration", "must be > 0"));
            }
        }
        match self.optimizer.w_init {
            InitSpec::Uniform { radius } if !(radius.is_finite() && radius >= 0.0) => {
                return Err(Error::invalid("w_init.radius", "must be finite and >= 0"));
            }
            InitSpec::Constant { value } if !value.is_finite() => {
                return Err(Error::invalid("w_init.value", "must be finite"));
            }
            _ => {}
        }
        if let DatasetSpec::GaussianMixture {
            train_size,
            train_per_client,
            ..
        } = &self.dataset
        {
            if train_size.is_some() == train_per_client.is_some() {
                return Err(Error::Config(
                    "gaussian_mixture needs exactly one of train_size and train_per_client".into(),
                ));
            }
        }
        Ok(())
    }
}
