//! Continuous-time Markov chain view of a network: reachable states, the
//! transition-rate generator, chemical master equation (transient and
//! stationary), finite-state projection and exact stochastic simulation.

mod cme;
mod fsp;
mod generator;
mod space;
mod ssa;
mod steady;

pub use cme::{cme_solve, uniformize, CmeOptions, DistributionTable, Horizon};
pub use fsp::{fsp_prune, FspOptions};
pub use generator::Generator;
pub use space::{reachable_states, reachable_states_capped, StateSpace, DEFAULT_STATE_CAP};
pub use ssa::{replicate_seed, rng_from_seed, ssa_ensemble, ssa_sample, ssa_trajectory, RNG_ALGORITHM};
pub use steady::{
    cme_steady_state, cme_steady_state_capped, stationary_distribution, stationary_distribution_with, StationaryMethod,
    DENSE_LIMIT,
};
