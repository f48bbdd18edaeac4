//! Worst-case coarse-correlated equilibria for N-player normal-form games.
//!
//! The crate is split along the lines of the computation:
//!
//! - [`game`], [`strategy`], [`regret`]: the game model, strategy types,
//!   expected utilities, deviation regrets and ε-CCE membership.
//! - [`learner`], [`dynamics`]: uncoupled no-regret learners (Hedge,
//!   regret matching, Exp3) and the simultaneous-play runner.
//! - [`simplex`], [`oracle`], [`smoothness`]: an exact two-phase simplex,
//!   the worst/best-case CCE linear program built on it, and smoothness
//!   certificates for cost-minimization games.
//! - [`blackwell`]: the approachability-based sampler with a no-regret
//!   halfspace oracle and binary search over the target value.
//! - [`lagrangian`]: the decoupled multiplier sampler with pluggable
//!   regret estimators.
//! - [`robust`]: the outer bandit loop over ego actions and cross
//!   evaluation against opponent populations.
//! - [`envs`]: generated games, reward transforms and welfare functions.
//!
//! Everything here is pure computation over `alloc`; file formats, the
//! CLI and experiment orchestration live in the `robustcce` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod blackwell;
pub mod dynamics;
pub mod envs;
pub mod error;
pub mod game;
pub mod lagrangian;
pub mod learner;
pub(crate) mod math;
pub mod normalize;
pub mod oracle;
pub mod rationality;
pub mod regret;
pub mod rng;
pub mod robust;
pub mod simplex;
pub mod smoothness;
pub mod strategy;

pub use error::{Error, Result};
pub use game::{ActionSpace, DenseGame, Game, Objective, StageGame};
pub use strategy::{EgoStrategy, PlayMixture, ProductStrategy};

/// Absolute tolerance for probability vectors summing to one.
pub const PROB_TOL: f64 = 1e-9;

/// Default tolerance for ε-CCE membership checks.
pub const MEMBERSHIP_TOL: f64 = 1e-7;
