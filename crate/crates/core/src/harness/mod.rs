pub mod config;
pub mod export;
pub mod plot;
pub mod rng;
pub mod sim;
pub mod sweep;

pub use config::RunConfig;
pub use export::{export_metrics, export_run, metrics_csv, parse_metrics_csv};
pub use sim::{
    build_task, initial_model, run_on_task, run_simulation, run_with_workers, MetricsRecord,
    RunOutcome, Task,
};
pub use sweep::{
    apply_axis, export_sweep, run_sweep, run_sweep_with_workers, Axis, SweepSpec, SweepTable,
};
