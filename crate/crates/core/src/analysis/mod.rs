pub mod bounds;
pub mod hill;
pub mod inequalities;
pub mod selftest;

pub use bounds::{adagrad_bound, adam_bound, upsilon, AdagradBound, AdamBound, BoundInputs};
pub use hill::{default_k, estimate_tail_index, TailIndexEstimate};
pub use inequalities::{
    alpha_smoothness_sides, cumulative_ratio_sides, ema_ratio_sides, power_expansion_sides,
    QuadraticForm,
};
pub use selftest::{run_selftest, CheckReport};
