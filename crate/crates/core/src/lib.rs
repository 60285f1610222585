//! Self-play learning of approximate Nash equilibria in two-player zero-sum
//! games.
//!
//! The crate bundles:
//! - four games behind one abstraction ([`games`]): Matching Pennies,
//!   Rock-Paper-Scissors, 4x4 Othello, and modified Leduc Hold'em;
//! - replay memories ([`memory`]): a circular buffer and a reservoir sampler;
//! - an exact exploitability evaluator ([`eval`]) used as the ground-truth
//!   convergence metric everywhere;
//! - the learners: fictitious play ([`fp`]), NFSP ([`nfsp`]), MCTS-backed
//!   MC-NFSP ([`mcts`], [`mcnfsp`]), and the parallel ANFSP ([`anfsp`]).

pub mod anfsp;
pub mod eval;
pub mod fp;
pub mod games;
pub mod mcnfsp;
pub mod mcts;
pub mod memory;
pub mod metrics;
pub mod nets;
pub mod nfsp;
