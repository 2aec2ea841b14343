//! Phantom construction, noise, error metrics, FLOP accounting and the
//! method comparison harness.

pub mod comparison;
pub mod flops;
pub mod metrics;
pub mod noise;
pub mod phantom;

pub use comparison::{run_comparison, ComparisonConfig, EvalReport, ModelSet, ReportRow};
pub use flops::{count_flops, MethodDescriptor};
pub use metrics::{label_nrmse, nrmse, nrmse_abs};
pub use noise::add_noise;
pub use phantom::{build_phantom, Phantom, PhantomSpec, Region};
