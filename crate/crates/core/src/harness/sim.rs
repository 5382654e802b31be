//! The federated round loop: clients, channel, server.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ota_aggregate, sample_fading, sample_interference, InterferenceModel};
use crate::error::{Error, Result};
use crate::harness::config::{DatasetSpec, InitSpec, ModelSpec, PartitionSpec, RunConfig};
use crate::harness::rng::{stream, Purpose};
use crate::optim::{server_step, ServerState};
use crate::param::ParamVector;
use crate::tasks::dataset::{
    gaussian_mixture, linear_regression, load_csv, quadratic_centers, LabelKind, MixtureSpec,
};
use crate::tasks::{
    accuracy, client_update, dirichlet_partition, iid_partition, local_loss_and_gradient, mean_of,
    Dataset, LossModel, Partition,
};

/// Global loss above this value counts as divergence.
pub const DIVERGENCE_LOSS: f64 = 1e12;

/// Metrics of the global model `w_t` after `round` server steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub round: usize,
    pub global_train_loss: f64,
    /// `||∇f(w_t)||²` of the exact global objective, not the noisy aggregate.
    pub grad_norm_sq: f64,
    pub test_accuracy: Option<f64>,
    pub effective_step_min: f64,
    pub effective_step_median: f64,
    pub effective_step_max: f64,
    pub diverged: bool,
}

/// Generated data, model, and partition of a run.
#[derive(Debug, Clone)]
pub struct Task {
    pub model: LossModel,
    pub train: Dataset,
    pub test: Option<Dataset>,
    pub partition: Partition,
}

/// Random draws made in each round, for auditing stream usage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DrawLedger {
    pub fading: Vec<usize>,
    pub interference: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<MetricsRecord>,
    /// Round at which the run was aborted.
    pub diverged_round: Option<usize>,
    pub final_w: ParamVector,
    pub draws: DrawLedger,
}

impl RunOutcome {
    pub fn final_record(&self) -> &MetricsRecord {
        self.records.last().expect("a run always records round 0")
    }
}

fn model_for(spec: &ModelSpec, train: &Dataset) -> Result<LossModel> {
    let p = train.num_features();
    let classes = || {
        train
            .num_classes()
            .ok_or_else(|| Error::Config("model needs class labels".into()))
    };
    let model = match *spec {
        ModelSpec::Quadratic => LossModel::Quadratic { dim: p },
        ModelSpec::LeastSquares => LossModel::LeastSquares { dim: p },
        ModelSpec::LogisticRegression => {
            if classes()? != 2 {
                return Err(Error::Config(
                    "logistic_regression needs exactly 2 classes".into(),
                ));
            }
            LossModel::LogisticRegression { dim: p }
        }
        ModelSpec::SoftmaxLinear => LossModel::SoftmaxLinear {
            num_features: p,
            num_classes: classes()?,
        },
        ModelSpec::SmallMlp { hidden } => {
            if hidden == 0 {
                return Err(Error::invalid("hidden", "must be at least 1"));
            }
            LossModel::SmallMlp {
                num_features: p,
                hidden,
                num_classes: classes()?,
            }
        }
    };
    model
        .check_dataset(train)
        .map_err(|e| Error::Config(e.to_string()))?;
    Ok(model)
}

/// Generates (or loads) the data and partitions it across clients.
pub fn build_task(config: &RunConfig) -> Result<Task> {
    config.validate()?;
    let mut data_rng = stream(config.seed, Purpose::Data, 0, 0);
    let n = config.n_clients;
    let (train, test) = match &config.dataset {
        DatasetSpec::GaussianMixture {
            num_classes,
            num_features,
            train_size,
            train_per_client,
            test_size,
            separation,
            noise,
            bias,
        } => {
            let spec = MixtureSpec {
                num_classes: *num_classes,
                num_features: *num_features,
                train_size: train_size.unwrap_or_else(|| train_per_client.unwrap_or(0) * n),
                test_size: *test_size,
                separation: *separation,
                noise: *noise,
                bias: *bias,
            };
            let (train, test) = gaussian_mixture(&spec, &mut data_rng)?;
            (train, (!test.is_empty()).then_some(test))
        }
        DatasetSpec::LinearRegression {
            num_features,
            size,
            noise,
        } => (
            linear_regression(*num_features, *size, *noise, &mut data_rng)?,
            None,
        ),
        DatasetSpec::QuadraticCenters { dim, size, spread } => (
            quadratic_centers(*dim, *size, *spread, &mut data_rng)?,
            None,
        ),
        DatasetSpec::Csv {
            path,
            test_path,
            num_classes,
            feature_scale,
            bias,
        } => {
            let kind = match config.model {
                ModelSpec::LeastSquares => LabelKind::Real,
                _ => LabelKind::Class,
            };
            let load = |p: &std::path::Path| -> Result<Dataset> {
                let ds = load_csv(p, kind, *num_classes, *feature_scale)?;
                Ok(if *bias { ds.with_bias_column() } else { ds })
            };
            let train = load(path)?;
            let test = test_path.as_deref().map(load).transpose()?;
            (train, test)
        }
    };
    let model = model_for(&config.model, &train)?;
    if let Some(test) = &test {
        model
            .check_dataset(test)
            .map_err(|e| Error::Config(format!("test set: {e}")))?;
    }
    let mut part_rng = stream(config.seed, Purpose::Partition, 0, 0);
    let partition = match config.partition {
        PartitionSpec::Iid => iid_partition(train.len(), n, &mut part_rng)?,
        PartitionSpec::Dirichlet { concentration } => {
            dirichlet_partition(&train, n, concentration, &mut part_rng)?
        }
    };
    Ok(Task {
        model,
        train,
        test,
        partition,
    })
}

/// Starting point `w_0` drawn from the run's init stream.
pub fn initial_model(config: &RunConfig, model: &LossModel) -> Result<ParamVector> {
    let d = model.dim();
    let mut rng = stream(config.seed, Purpose::Init, 0, 0);
    let uniform = |radius: f64, rng: &mut rand_chacha::ChaCha8Rng| {
        ParamVector::new((0..d).map(|_| rng.gen_range(-radius..=radius)).collect())
    };
    match config.optimizer.w_init {
        InitSpec::Auto => match model {
            LossModel::SmallMlp { .. } => uniform(0.1, &mut rng),
            _ => Ok(ParamVector::zeros(d)),
        },
        InitSpec::Zeros => Ok(ParamVector::zeros(d)),
        InitSpec::Uniform { radius } => uniform(radius, &mut rng),
        InitSpec::Constant { value } => ParamVector::filled(d, value),
    }
}

struct Evaluation {
    loss: f64,
    grad_norm_sq: f64,
}

fn evaluate_global(task: &Task, w: &ParamVector) -> Result<Evaluation> {
    let per_client = task
        .partition
        .clients()
        .par_iter()
        .map(|idx| local_loss_and_gradient(&task.model, w, &task.train, idx))
        .collect::<Result<Vec<_>>>()?;
    let mut loss = 0.0;
    for (k, (l, _)) in per_client.iter().enumerate() {
        loss += (l - loss) / (k + 1) as f64;
    }
    let grads: Vec<ParamVector> = per_client.into_iter().map(|(_, g)| g).collect();
    Ok(Evaluation {
        loss,
        grad_norm_sq: mean_of(&grads)?.norm_sq(),
    })
}

fn step_summary(mut steps: Vec<f64>) -> (f64, f64, f64) {
    steps.sort_by(f64::total_cmp);
    let n = steps.len();
    let median = if n % 2 == 1 {
        steps[n / 2]
    } else {
        0.5 * (steps[n / 2 - 1] + steps[n / 2])
    };
    (steps[0], median, steps[n - 1])
}

fn record(task: &Task, state: &ServerState, config: &RunConfig) -> MetricsRecord {
    let (smin, smed, smax) = step_summary(state.effective_steps(&config.hyper_params()));
    let (loss, grad_norm_sq) = match evaluate_global(task, &state.w) {
        Ok(e) => (e.loss, e.grad_norm_sq),
        Err(_) => (f64::NAN, f64::NAN),
    };
    let test_accuracy = match &task.test {
        Some(test) if task.model.is_classifier() => accuracy(&task.model, &state.w, test),
        _ => None,
    };
    let diverged = !(loss.is_finite() && grad_norm_sq.is_finite()) || loss > DIVERGENCE_LOSS;
    MetricsRecord {
        round: state.round,
        global_train_loss: loss,
        grad_norm_sq,
        test_accuracy,
        effective_step_min: smin,
        effective_step_median: smed,
        effective_step_max: smax,
        diverged,
    }
}

fn diverged_record(round: usize) -> MetricsRecord {
    MetricsRecord {
        round,
        global_train_loss: f64::NAN,
        grad_norm_sq: f64::NAN,
        test_accuracy: None,
        effective_step_min: f64::NAN,
        effective_step_median: f64::NAN,
        effective_step_max: f64::NAN,
        diverged: true,
    }
}

/// Runs the configured number of rounds on the current rayon pool.
///
/// Client work in a round runs in parallel, but every client draws from its
/// own (client, round) stream and contributions are summed in client order,
/// so results do not depend on the pool size.
pub fn run_simulation(config: &RunConfig) -> Result<RunOutcome> {
    let task = build_task(config)?;
    run_on_task(config, &task)
}

/// Like [`run_simulation`] but with a prepared task.
pub fn run_on_task(config: &RunConfig, task: &Task) -> Result<RunOutcome> {
    config.validate()?;
    let hp = config.hyper_params();
    let fading = config.channel.fading.build()?;
    let d = task.model.dim();
    let interference = InterferenceModel::new(
        config.channel.interference.tail_index,
        config.channel.interference.scale,
        d,
    )?;
    let w0 = initial_model(config, &task.model)?;
    let v0 = ParamVector::filled(d, config.optimizer.v_init)?;
    let mut state = ServerState::new(config.optimizer.kind, w0, v0)?;
    let every = config.eval_every();
    let mut records = Vec::new();
    let mut draws = DrawLedger::default();
    let mut diverged_round = None;

    for t in 0..config.rounds {
        if t % every == 0 {
            let r = record(task, &state, config);
            let bad = r.diverged;
            records.push(r);
            if bad {
                diverged_round = Some(t);
                break;
            }
        }
        let round = t as u64;
        let client_results = task
            .partition
            .clients()
            .par_iter()
            .enumerate()
            .map(|(n, idx)| {
                let grad = client_update(
                    &task.model,
                    &state.w,
                    &task.train,
                    idx,
                    config.local_steps,
                    config.local_lr,
                );
                let h = sample_fading(
                    &fading,
                    &mut stream(config.seed, Purpose::Fading, n as u64, round),
                );
                grad.map(|g| (g, h))
            })
            .collect::<Result<Vec<_>>>();
        let step = client_results.and_then(|results| {
            let (grads, fadings): (Vec<_>, Vec<_>) = results.into_iter().unzip();
            draws.fading.push(fadings.len());
            let noise = sample_interference(
                &interference,
                &mut stream(config.seed, Purpose::Interference, 0, round),
            )?;
            draws.interference.push(noise.dim());
            let g = ota_aggregate(&grads, &fadings, &noise)?;
            server_step(&state, &hp, &g)
        });
        match step {
            Ok(next) => state = next,
            Err(Error::NonFinite { .. }) => {
                records.push(diverged_record(t + 1));
                diverged_round = Some(t + 1);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if diverged_round.is_none() {
        let r = record(task, &state, config);
        if r.diverged {
            diverged_round = Some(state.round);
        }
        records.push(r);
    }
    Ok(RunOutcome {
        records,
        diverged_round,
        final_w: state.w,
        draws,
    })
}

/// Runs on a dedicated pool with `workers` threads.
pub fn run_with_workers(config: &RunConfig, workers: usize) -> Result<RunOutcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_simulation(config))
}
