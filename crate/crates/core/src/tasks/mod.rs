pub mod dataset;
pub mod model;
pub mod partition;

pub use dataset::{Dataset, LabelKind, MixtureSpec, Targets};
pub use model::{
    accuracy, client_update, global_gradient, global_loss, grad_bound_c, local_gradient,
    local_loss, local_loss_and_gradient, mean_of, predict, quadratic_optimum, LossModel,
};
pub use partition::{dirichlet_partition, iid_partition, Partition};
