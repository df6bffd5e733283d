//! Synthetic data, workloads, exact labels, the baseline, and training.

pub mod baseline;
pub mod datagen;
pub mod evaluate;
pub mod executor;
pub mod querygen;
pub mod train;

pub use baseline::IndependenceBaseline;
pub use datagen::{generate_dataset, DatasetConfig};
pub use evaluate::{qerrors, Errors, Evaluation};
pub use executor::{execute_reference, label_plan, CostTable, ExecConfig, ExecError};
pub use querygen::{generate_queries, generate_workload, WorkloadConfig};
pub use train::{
    encode_examples, select_loss_weight, split_indices, train, Example, TrainConfig, TrainError, TrainOutcome,
    OMEGA_CANDIDATES,
};
