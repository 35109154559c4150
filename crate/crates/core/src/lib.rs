//! Offline learning of Nash equilibria in KL-regularized two-player
//! zero-sum contextual games.
//!
//! The pipeline is: sample an offline dataset ([`estimation::sample_dataset`]),
//! fit a payoff table by least squares over a finite class
//! ([`estimation::least_squares_fit`]), then solve the regularized game the
//! estimate induces, either exactly ([`solver::nash_oracle`]) or by self-play
//! mirror descent ([`solver::selfplay_run`]). [`analysis`] holds numerical
//! checks of the identities and bounds that govern the duality gap of the
//! result, [`harness`] runs the sample-size and iteration sweeps, and
//! [`suite`] bundles every check into the `verify` run.
//!
//! Game arithmetic is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases. Analysis and sweeps run in
//! `f64`.

// NaN-rejecting checks are written as `!(x > 0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod estimation;
pub mod game;
pub mod harness;
pub mod io;
pub mod scalar;
pub mod solver;
pub mod suite;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type PayoffTable64 = game::PayoffTable<f64>;
pub type Policy64 = game::Policy<f64>;
pub type JointPolicy64 = game::JointPolicy<f64>;
pub type GameConfig64 = game::GameConfig<f64>;
pub type GameInstance64 = game::GameInstance<f64>;
pub type FunctionClass64 = estimation::FunctionClass<f64>;
pub type OfflineDataset64 = estimation::OfflineDataset<f64>;

pub type PayoffTable32 = game::PayoffTable<f32>;
pub type Policy32 = game::Policy<f32>;
pub type JointPolicy32 = game::JointPolicy<f32>;
pub type GameConfig32 = game::GameConfig<f32>;
pub type GameInstance32 = game::GameInstance<f32>;
