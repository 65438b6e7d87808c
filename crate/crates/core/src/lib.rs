//! Wildfire suppression policy optimization: a stochastic wildfire MDP, a
//! trajectory-stitching surrogate evaluator and an SMAC optimizer.

pub mod mdp;
pub mod policy;
pub mod rng;
pub mod smac;
pub mod surrogate;
