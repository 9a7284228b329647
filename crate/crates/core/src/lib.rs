//! Team fictitious play and related learning dynamics for multi-team games.
//!
//! * [`game`]: teams, pairwise potential tables, validators, coarsening.
//! * [`beliefs`]: belief profiles, the empirical-average update, step sizes.
//! * [`dynamics`]: Team-FP, Independent Team-FP, SFP and MWU.
//! * [`metrics`]: exact team-Nash gap and the Lyapunov diagnostic.
//! * [`markov`]: finite-horizon multi-team Markov games.
//! * [`gamegen`]: seeded generators for the experiment families.
//! * [`io`]: game files and CSV output.
//! * [`trials`]: independent trials, in parallel with the `parallel` feature.

// `!(x >= 0.0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beliefs;
pub mod dynamics;
pub mod error;
pub mod game;
pub mod gamegen;
pub mod io;
pub mod markov;
pub mod metrics;
pub mod trials;

pub use error::{Error, Result};
