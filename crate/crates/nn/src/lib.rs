//! Reverse-mode tape, message passing layers over shortest-path hops,
//! training harness and sensitivity probes.

pub mod batch;
pub mod checkpoint;
pub mod experiment;
pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod params;
pub mod pooling;
pub mod squash;
pub mod tape;

pub use batch::{Batch, GraphStructure, Needs};
pub use checkpoint::{report_alphas, Checkpoint, CheckpointError};
pub use gradcheck::{grad_check, grad_check_report, GradCheckError, GradCheckReport};
pub use model::{InputEncoding, Model, ModelConfig, ModelError, ModelKind};
pub use params::{Adam, ParamId, ParamStore, Pass};
pub use pooling::PoolMode;
pub use tape::{Gradients, Mat, Pairs, Tape, Var};
pub use experiment::{run_experiment, run_on_dataset, ExperimentConfig, ExperimentError, Report, RunResult};
