//! Steering the running average vector cost of a Stackelberg stochastic game
//! toward a target set.
//!
//! The leader moves first, the follower sees its action, and every step
//! produces a cost vector in `[-1, 1]^K`. Given a target `D`, the leader
//! looks at the running average `x_n`, projects it onto `D`, and plays the
//! min-max policy of the game scalarized along `λ = (x - P_D(x)) / ‖·‖`.
//! With a known kernel that policy comes from [`planner::solve_minmax`];
//! without one, [`learner::LearnerState`] learns it with two-timescale
//! Q-learning.
//!
//! ## Examples
//!
//! Each major piece has a runnable example in `crates/core/examples/`:
//!
//! - **`validate_fixtures`** - load model files, validate them, check irreducibility
//! - **`target_geometry`** - projections, steering directions, support functions
//! - **`minmax_planner`** - solve a scalarized game and compare with brute force
//! - **`approachability_check`** - sweep directions for a certificate or counterexample
//! - **`blackwell_controller`** - run the exact controller against a worst-case follower
//! - **`nonconvex_union`** - two-ball union target, per-piece convergence
//! - **`q_learning_approach`** - the learner on an unknown kernel
//! - **`batch_report`** - seed batch to CSV, aggregate JSON and an SVG chart
//!
//! ```bash
//! cargo run --release -p sgapproach --example blackwell_controller
//! ```
//!
//! The `sgapproach` binary wraps the same calls: `validate`, `solve`,
//! `check`, `run`, `learn` and `report`.

pub mod adversary;
pub mod approach;
pub mod cli;
pub mod env;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod learner;
pub mod model;
pub mod planner;
pub mod report;
pub mod sim;
mod vecops;

pub use adversary::{Adversary, AdversarySpec};
pub use approach::{check_approachable_convex, check_approachable_nonconvex, Controller, PointSampler};
pub use env::{Environment, ModelEnvironment};
pub use error::{Error, Result};
pub use geometry::TargetSet;
pub use learner::{LearnerConfig, LearnerState};
pub use model::{validate_model, GameModel, PolicyTable};
pub use planner::{brute_force_value, scalarize, solve_minmax, PlannerOptions, PlannerSolution};
pub use report::{load_config, run_batch, RunConfig};
pub use sim::{metrics, run_episode, EpisodeOptions, LeaderKind, RecordStride, TrajectoryRecord};
