//! Learned cost and cardinality estimation for physical query plans.

pub mod data;
pub mod estimator;
pub mod featurizer;
pub mod model;
pub mod nn;
pub mod plan;
pub mod pool;
pub mod schema;
pub mod strings;
pub mod trainer;

pub use data::{Dataset, SampleStore};
pub use estimator::{EstimateError, Estimator};
pub use featurizer::{EncodedPlanBatch, Featurizer, FeaturizerConfig, StringEncoder};
pub use model::checkpoint::Checkpoint;
pub use model::{Metrics, ModelConfig, TargetNormalizer, TreeModel};
pub use plan::{PlanDigest, PlanNode, PlanTree, Predicate};
pub use pool::{Estimate, MemoryPool};
pub use schema::SchemaCatalog;
