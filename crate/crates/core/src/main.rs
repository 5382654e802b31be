use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use adota::analysis::{
    adagrad_bound, adam_bound, default_k, estimate_tail_index, run_selftest, BoundInputs,
};
use adota::harness::export::write_file;
use adota::harness::plot::{emit_plot_script, Curve};
use adota::harness::{
    export_run, export_sweep, run_sweep_with_workers, run_with_workers, RunConfig, SweepSpec,
};
use adota::{Error, Result};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "adota",
    version,
    about = "Adaptive federated learning over a fading, heavy-tailed analog channel"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Input file (run/sweep config, or bound inputs).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "adota-out")]
    out: PathBuf,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Allow an optimizer exponent that differs from the interference tail index.
    #[arg(long, global = true)]
    allow_alpha_mismatch: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write metrics.csv, metrics.json and plot.gp.
    Run,
    /// Sweep one parameter over several seeds.
    Sweep,
    /// Evaluate a convergence bound from a JSON file of bound inputs.
    Bound {
        #[arg(long, value_enum, default_value_t = BoundKind::AdagradOta)]
        optimizer: BoundKind,
    },
    /// Estimate the tail index of samples (whitespace- or comma-separated reals).
    EstimateAlpha {
        samples: PathBuf,
        /// Number of order statistics; defaults to floor(sqrt(n)).
        #[arg(long)]
        k: Option<usize>,
    },
    /// Randomized checks of the supporting inequalities.
    Selftest {
        #[arg(long, default_value_t = 10_000)]
        instances: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundKind {
    AdagradOta,
    AdamOta,
}

enum Outcome {
    Done,
    Diverged,
    Failed,
}

fn require_config(cli: &Cli) -> Result<&Path> {
    cli.config
        .as_deref()
        .ok_or_else(|| Error::Config("--config <path> is required".into()))
}

fn workers(cli: &Cli) -> usize {
    cli.workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn run(cli: &Cli) -> Result<Outcome> {
    let mut config = RunConfig::load(require_config(cli)?)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.allow_alpha_mismatch |= cli.allow_alpha_mismatch;
    let outcome = run_with_workers(&config, workers(cli))?;
    export_run(&config, &outcome, &cli.out)?;
    let last = outcome.final_record();
    let curve = Curve {
        label: "run".into(),
        csv: PathBuf::from("metrics.csv"),
        loss_column: 2,
        accuracy_column: last.test_accuracy.map(|_| 4),
    };
    emit_plot_script(&[curve], "metrics.png", &cli.out.join("plot.gp"))?;
    match outcome.diverged_round {
        Some(round) => {
            eprintln!(
                "diverged at round {round}; metrics kept in {}",
                cli.out.display()
            );
            Ok(Outcome::Diverged)
        }
        None => {
            let acc = last
                .test_accuracy
                .map(|a| format!(" test_accuracy={a:.4}"))
                .unwrap_or_default();
            println!(
                "round={} loss={:.6e} grad_norm_sq={:.6e}{acc}",
                last.round, last.global_train_loss, last.grad_norm_sq
            );
            Ok(Outcome::Done)
        }
    }
}

fn sweep(cli: &Cli) -> Result<Outcome> {
    let mut spec = SweepSpec::load(require_config(cli)?)?;
    if let Some(seed) = cli.seed {
        spec.base.seed = seed;
    }
    spec.base.allow_alpha_mismatch |= cli.allow_alpha_mismatch;
    let table = run_sweep_with_workers(&spec, workers(cli))?;
    export_sweep(&table, &cli.out)?;
    for row in table.summary() {
        println!(
            "{}={} seeds={} diverged={} mean_final_loss={:.6e} std={:.3e}",
            spec.axis.name(),
            row.value,
            row.seeds,
            row.diverged_runs,
            row.mean_final_loss,
            row.std_final_loss
        );
    }
    Ok(Outcome::Done)
}

fn bound(cli: &Cli, kind: BoundKind) -> Result<Outcome> {
    let path = require_config(cli)?;
    let text = read_input(path)?;
    let inputs: BoundInputs = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let record = match kind {
        BoundKind::AdagradOta => {
            let b = adagrad_bound(&inputs)?;
            json!({"optimizer": "adagrad_ota", "upsilon": b.upsilon, "bound": b.bound,
                   "terms": {"initial_gap": b.initial_gap, "accumulation": b.accumulation}})
        }
        BoundKind::AdamOta => {
            let b = adam_bound(&inputs)?;
            json!({"optimizer": "adam_ota", "upsilon": b.upsilon, "bound": b.bound,
                   "terms": {"initial_gap": b.initial_gap, "transient": b.transient, "floor": b.floor}})
        }
    };
    let text = serde_json::to_string_pretty(&record)? + "\n";
    write_file(&cli.out.join("bound.json"), &text)?;
    print!("{text}");
    Ok(Outcome::Done)
}

/// Unreadable inputs are configuration errors.
fn read_input(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let text = read_input(path)?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Config(format!("{}: {t:?} is not a number", path.display())))
        })
        .collect()
}

fn estimate_alpha(cli: &Cli, samples: &Path, k: Option<usize>) -> Result<Outcome> {
    let xs = read_samples(samples)?;
    let est = estimate_tail_index(&xs, k.unwrap_or_else(|| default_k(xs.len())))?;
    let text = serde_json::to_string_pretty(&est)? + "\n";
    write_file(&cli.out.join("alpha.json"), &text)?;
    print!("{text}");
    if est.out_of_range {
        eprintln!(
            "raw estimate {} is outside (1, 2]; reported value is clamped",
            est.raw
        );
    }
    Ok(Outcome::Done)
}

fn selftest(cli: &Cli, instances: usize) -> Result<Outcome> {
    let reports = run_selftest(instances, cli.seed.unwrap_or(0))?;
    let mut ok = true;
    for r in &reports {
        ok &= r.passed();
        println!(
            "{} {}: {} instances, {} violations, worst lhs-rhs {:.3e}",
            if r.passed() { "PASS" } else { "FAIL" },
            r.name,
            r.instances,
            r.violations,
            r.worst_gap
        );
    }
    write_file(
        &cli.out.join("selftest.json"),
        &(serde_json::to_string_pretty(&reports)? + "\n"),
    )?;
    Ok(if ok { Outcome::Done } else { Outcome::Failed })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run => run(&cli),
        Command::Sweep => sweep(&cli),
        Command::Bound { optimizer } => bound(&cli, *optimizer),
        Command::EstimateAlpha { samples, k } => estimate_alpha(&cli, samples, *k),
        Command::Selftest { instances } => selftest(&cli, *instances),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Diverged) => ExitCode::from(EXIT_DIVERGED),
        Ok(Outcome::Failed) => ExitCode::from(EXIT_FAILURE),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() {
                EXIT_CONFIG
            } else {
                EXIT_FAILURE
            })
        }
    }
}
