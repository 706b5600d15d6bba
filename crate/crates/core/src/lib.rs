//! Reachability-weighted sampling for offline goal-conditioned RL.
//!
//! A tabular goal-conditioned critic and softmax actor are trained offline on
//! gridworld trajectories. Goals for each update are drawn uniformly from the
//! dataset and the resulting samples are re-weighted by a two-parameter
//! logistic classifier over Q-values, trained with a non-negative
//! positive-unlabeled risk (hindsight goals are the positives, uniform goals
//! the unlabeled set).
//!
//! Learned quantities are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`, which the CLI uses.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod env;
pub mod error;
pub mod eval;
pub mod reach;
pub mod relabel;
pub mod scalar;
pub mod trainer;
pub mod value;
pub mod weight;

pub use config::{Sampler, TrainerConfig, WeightMode};
pub use dataset::{OfflineDataset, Source, Trajectory, Transition};
pub use env::{Action, Goal, Maze, State};
pub use error::{Error, Result};
pub use reach::PuVariant;
pub use scalar::Scalar;

pub type QTable = value::GoalConditionedQ<f64>;
pub type Policy = value::PolicyTable<f64>;
pub type Classifier = reach::ReachabilityClassifier<f64>;
pub type Batch = relabel::WeightedBatch<f64>;
pub type Run = trainer::RunState<f64>;
pub type Checkpoint = checkpoint::Checkpoint<f64>;

pub type QTable32 = value::GoalConditionedQ<f32>;
pub type Policy32 = value::PolicyTable<f32>;
pub type Run32 = trainer::RunState<f32>;
