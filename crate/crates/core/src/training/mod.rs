//! Equilibrium Propagation training: estimators, local rule, optimizer and epoch loop.

mod config;
mod ep;
mod fit;
mod gradient;
mod optim;

pub use config::{EpConfig, EpMode, OptimizerKind};
pub use ep::{
    ep_curve, ep_gradient_symmetric, ep_gradient_truncated, ep_gradient_two_phase, local_weight_update,
    phi_grad_params, run_phases, FixedPoints,
};
pub use fit::{
    evaluate, fit, fit_from, CsvMetricsSink, EpochMetrics, Evaluation, FitOptions, FitResult, MetricsSink, Split,
    METRICS_HEADER,
};
pub use gradient::{cosine, rel_mse, relative_error, GradientBundle, Provenance, REL_MSE_EPS};
pub use optim::{optimizer_step, Optimizer};
