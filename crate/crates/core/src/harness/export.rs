//! Metrics files: CSV with a fixed column order plus a JSON sidecar.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::harness::sim::{MetricsRecord, RunOutcome};

pub const METRICS_COLUMNS: [&str; 8] = [
    "round",
    "global_train_loss",
    "grad_norm_sq",
    "test_accuracy",
    "effective_step_min",
    "effective_step_median",
    "effective_step_max",
    "diverged",
];

/// Scientific notation with 17 significant digits, enough to round-trip any f64.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_owned()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_owned()
    } else {
        format!("{x:.16e}")
    }
}

fn parse_real(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Config(format!("bad real {s:?} in metrics file")))
}

pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut out = METRICS_COLUMNS.join(",");
    out.push('\n');
    for r in records {
        let fields = [
            r.round.to_string(),
            format_real(r.global_train_loss),
            format_real(r.grad_norm_sq),
            r.test_accuracy.map(format_real).unwrap_or_default(),
            format_real(r.effective_step_min),
            format_real(r.effective_step_median),
            format_real(r.effective_step_max),
            r.diverged.to_string(),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != METRICS_COLUMNS {
        return Err(Error::Config(format!(
            "unexpected metrics header {header:?}"
        )));
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let round = row[0]
            .parse()
            .map_err(|_| Error::Config(format!("bad round {:?}", &row[0])))?;
        let test_accuracy = match &row[3] {
            "" => None,
            s => Some(parse_real(s)?),
        };
        let diverged = row[7]
            .parse()
            .map_err(|_| Error::Config(format!("bad diverged flag {:?}", &row[7])))?;
        records.push(MetricsRecord {
            round,
            global_train_loss: parse_real(&row[1])?,
            grad_norm_sq: parse_real(&row[2])?,
            test_accuracy,
            effective_step_min: parse_real(&row[4])?,
            effective_step_median: parse_real(&row[5])?,
            effective_step_max: parse_real(&row[6])?,
            diverged,
        });
    }
    Ok(records)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn export_metrics(records: &[MetricsRecord], path: &Path) -> Result<()> {
    write_file(path, &metrics_csv(records))
}

#[derive(Serialize)]
struct Sidecar<'a> {
    seed: u64,
    config: &'a RunConfig,
    rounds_completed: usize,
    diverged_round: Option<usize>,
    model_dim: usize,
}

/// Writes `metrics.csv` and `metrics.json` (resolved config and seed) into `dir`.
pub fn export_run(config: &RunConfig, outcome: &RunOutcome, dir: &Path) -> Result<()> {
    export_metrics(&outcome.records, &dir.join("metrics.csv"))?;
    let sidecar = Sidecar {
        seed: config.seed,
        config,
        rounds_completed: outcome.final_record().round,
        diverged_round: outcome.diverged_round,
        model_dim: outcome.final_w.dim(),
    };
    let mut json = serde_json::to_string_pretty(&sidecar)?;
    json.push('\n');
    write_file(&dir.join("metrics.json"), &json)
}
