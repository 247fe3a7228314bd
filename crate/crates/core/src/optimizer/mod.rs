//! Adam, the augmented Lagrangian, the training loop and the constrained pipeline.

pub mod adam;
pub mod lagrangian;
pub mod pipeline;
pub mod train;

pub use adam::{AdamConfig, AdamState};
pub use lagrangian::{
    estimate_constraint, lagrangian_gradient, Constraint, ConstraintEstimate, ConstraintFn, ConstraintSpec,
    LagrangianConfig, LagrangianState,
};
pub use pipeline::{constrained_pipeline, ConstantSource, PipelineConstants, PipelineResult};
pub use train::{train, MultiplierRow, TraceRow, TrainConfig, TrainResult};
