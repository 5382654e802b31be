//! One-axis parameter sweeps with several seeds per point.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{PartitionSpec, RunConfig};
use crate::harness::export::{export_run, format_real, write_file};
use crate::harness::plot::{emit_plot_script, Curve};
use crate::harness::sim::{run_simulation, RunOutcome};

pub const DEFAULT_SEEDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Interference tail index, and `alpha_exp` when it is set explicitly.
    Alpha,
    NClients,
    /// Dirichlet concentration.
    Dir,
    Beta1,
    Beta2,
    Eta,
    Epsilon,
    /// Interference scale.
    Scale,
    /// Mean fading gain.
    MuC,
    Rounds,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::Alpha => "alpha",
            Axis::NClients => "n_clients",
            Axis::Dir => "dir",
            Axis::Beta1 => "beta1",
            Axis::Beta2 => "beta2",
            Axis::Eta => "eta",
            Axis::Epsilon => "epsilon",
            Axis::Scale => "scale",
            Axis::MuC => "mu_c",
            Axis::Rounds => "rounds",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(name.to_owned()))
            .map_err(|_| Error::Config(format!("unknown sweep axis {name:?}")))
    }
}

fn as_count(axis: Axis, value: f64) -> Result<usize> {
    if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
        Ok(value as usize)
    } else {
        Err(Error::Config(format!(
            "{} needs a positive integer, got {value}",
            axis.name()
        )))
    }
}

/// Copy of `base` with the axis set to `value`.
pub fn apply_axis(base: &RunConfig, axis: Axis, value: f64) -> Result<RunConfig> {
    let mut c = base.clone();
    match axis {
        Axis::Alpha => {
            c.channel.interference.tail_index = value;
            if c.optimizer.alpha_exp.is_some() && !c.allow_alpha_mismatch {
                c.optimizer.alpha_exp = Some(value);
            }
        }
        Axis::NClients => c.n_clients = as_count(axis, value)?,
        Axis::Dir => match &mut c.partition {
            PartitionSpec::Dirichlet { concentration } => *concentration = value,
            PartitionSpec::Iid => {
                return Err(Error::Config("dir axis needs a dirichlet partition".into()))
            }
        },
        Axis::Beta1 => c.optimizer.beta1 = value,
        Axis::Beta2 => c.optimizer.beta2 = value,
        Axis::Eta => c.optimizer.eta = value,
        Axis::Epsilon => c.optimizer.epsilon = value,
        Axis::Scale => c.channel.interference.scale = value,
        Axis::MuC => c.channel.fading = c.channel.fading.with_mean(value),
        Axis::Rounds => c.rounds = as_count(axis, value)?,
    }
    c.validate()?;
    Ok(c)
}

/// Sweep description as read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: RunConfig,
    pub axis: Axis,
    pub values: Vec<f64>,
    /// Explicit seeds; otherwise `num_seeds` consecutive seeds from `base.seed`.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub num_seeds: Option<usize>,
}

impl SweepSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (0..self.num_seeds.unwrap_or(DEFAULT_SEEDS) as u64)
                .map(|i| self.base.seed.wrapping_add(i))
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub seed: u64,
    pub config: RunConfig,
    pub outcome: RunOutcome,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub axis: Axis,
    pub values: Vec<f64>,
    /// Value-major, seeds in the given order.
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub value: f64,
    pub seeds: usize,
    pub diverged_runs: usize,
    pub mean_final_loss: f64,
    pub std_final_loss: f64,
    pub mean_final_accuracy: Option<f64>,
    pub std_final_accuracy: Option<f64>,
    pub mean_final_grad_norm_sq: f64,
    pub std_final_grad_norm_sq: f64,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl SweepTable {
    pub fn points_for(&self, value: f64) -> impl Iterator<Item = &SweepPoint> {
        self.points.iter().filter(move |p| p.value == value)
    }

    /// One row per axis value. Diverged runs are counted and left out of the
    /// means.
    pub fn summary(&self) -> Vec<SummaryRow> {
        self.values
            .iter()
            .map(|&value| {
                let pts: Vec<&SweepPoint> = self.points_for(value).collect();
                let ok: Vec<&SweepPoint> = pts
                    .iter()
                    .copied()
                    .filter(|p| p.outcome.diverged_round.is_none())
                    .collect();
                let finals: Vec<_> = ok.iter().map(|p| p.outcome.final_record()).collect();
                let (mean_loss, std_loss) = mean_std(
                    &finals
                        .iter()
                        .map(|r| r.global_train_loss)
                        .collect::<Vec<_>>(),
                );
                let (mean_g, std_g) =
                    mean_std(&finals.iter().map(|r| r.grad_norm_sq).collect::<Vec<_>>());
                let acc: Option<Vec<f64>> = finals.iter().map(|r| r.test_accuracy).collect();
                let (mean_acc, std_acc) = match acc {
                    Some(a) if !a.is_empty() => {
                        let (m, s) = mean_std(&a);
                        (Some(m), Some(s))
                    }
                    _ => (None, None),
                };
                SummaryRow {
                    value,
                    seeds: pts.len(),
                    diverged_runs: pts.len() - ok.len(),
                    mean_final_loss: mean_loss,
                    std_final_loss: std_loss,
                    mean_final_accuracy: mean_acc,
                    std_final_accuracy: std_acc,
                    mean_final_grad_norm_sq: mean_g,
                    std_final_grad_norm_sq: std_g,
                }
            })
            .collect()
    }
}

/// Runs every (value, seed) pair, in parallel on the current rayon pool.
pub fn run_sweep(
    base: &RunConfig,
    axis: Axis,
    values: &[f64],
    seeds: &[u64],
) -> Result<SweepTable> {
    if values.is_empty() || seeds.is_empty() {
        return Err(Error::Config(
            "sweep needs at least one value and one seed".into(),
        ));
    }
    let mut configs = Vec::with_capacity(values.len() * seeds.len());
    for &value in values {
        let c = apply_axis(base, axis, value)?;
        for &seed in seeds {
            configs.push((value, seed, RunConfig { seed, ..c.clone() }));
        }
    }
    let points = configs
        .into_par_iter()
        .map(|(value, seed, config)| {
            let outcome = run_simulation(&config)?;
            Ok(SweepPoint {
                value,
                seed,
                config,
                outcome,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        axis,
        values: values.to_vec(),
        points,
    })
}

pub fn run_sweep_with_workers(spec: &SweepSpec, workers: usize) -> Result<SweepTable> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_sweep(&spec.base, spec.axis, &spec.values, &spec.seeds()))
}

pub const SUMMARY_COLUMNS: [&str; 9] = [
    "axis_value",
    "seeds",
    "diverged_runs",
    "mean_final_loss",
    "std_final_loss",
    "mean_final_accuracy",
    "std_final_accuracy",
    "mean_final_grad_norm_sq",
    "std_final_grad_norm_sq",
];

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = SUMMARY_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let fields = [
            format_real(r.value),
            r.seeds.to_string(),
            r.diverged_runs.to_string(),
            format_real(r.mean_final_loss),
            format_real(r.std_final_loss),
            r.mean_final_accuracy.map(format_real).unwrap_or_default(),
            r.std_final_accuracy.map(format_real).unwrap_or_default(),
            format_real(r.mean_final_grad_norm_sq),
            format_real(r.std_final_grad_norm_sq),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn value_dir(axis: Axis, value: f64) -> PathBuf {
    PathBuf::from(format!("{}_{value}", axis.name()))
}

/// Seed-averaged curve over the rounds every non-diverged seed recorded.
fn mean_curve_csv(points: &[&SweepPoint]) -> String {
    let ok: Vec<&&SweepPoint> = points
        .iter()
        .filter(|p| p.outcome.diverged_round.is_none())
        .collect();
    let mut out = String::from("round,mean_global_train_loss,mean_test_accuracy\n");
    let Some(first) = ok.first() else {
        return out;
    };
    for (i, rec) in first.outcome.records.iter().enumerate() {
        let rows: Option<Vec<_>> = ok
            .iter()
            .map(|p| p.outcome.records.get(i).filter(|r| r.round == rec.round))
            .collect();
        let Some(rows) = rows else { break };
        let (loss, _) = mean_std(&rows.iter().map(|r| r.global_train_loss).collect::<Vec<_>>());
        let acc: Option<Vec<f64>> = rows.iter().map(|r| r.test_accuracy).collect();
        let acc = acc.map(|a| format_real(mean_std(&a).0)).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", rec.round, format_real(loss), acc));
    }
    out
}

/// Writes per-run metrics, per-value mean curves, `summary.csv`, and `plot.gp`.
pub fn export_sweep(table: &SweepTable, dir: &Path) -> Result<()> {
    let mut curves = Vec::new();
    for &value in &table.values {
        let vdir = value_dir(table.axis, value);
        let pts: Vec<&SweepPoint> = table.points_for(value).collect();
        for p in &pts {
            export_run(
                &p.config,
                &p.outcome,
                &dir.join(&vdir).join(format!("seed_{}", p.seed)),
            )?;
        }
        let mean_path = vdir.join("mean.csv");
        write_file(&dir.join(&mean_path), &mean_curve_csv(&pts))?;
        let classified = pts
            .first()
            .is_some_and(|p| p.outcome.final_record().test_accuracy.is_some());
        curves.push(Curve {
            label: format!("{} = {value}", table.axis.name()),
            csv: mean_path,
            loss_column: 2,
            accuracy_column: classified.then_some(3),
        });
    }
    write_file(&dir.join("summary.csv"), &summary_csv(&table.summary()))?;
    emit_plot_script(&curves, "sweep.png", &dir.join("plot.gp"))
}
