use std::sync::Arc;

use serde::{Serialize, Serializer};

use super::fsp::{fsp_solve, FspOptions};
use super::generator::Generator;
use super::space::{reachable_states_capped, StateSpace, DEFAULT_STATE_CAP};
use crate::crn::{Crn, PopulationVector};
use crate::error::{Error, Result};

/// Snapshot time of a distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Time(f64),
    Steady,
}

impl Serialize for Horizon {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Horizon::Time(t) => s.serialize_f64(*t),
            Horizon::Steady => s.serialize_str("steady"),
        }
    }
}

impl std::fmt::Display for Horizon {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Horizon::Time(t) => write!(f, "{t}"),
            Horizon::Steady => write!(f, "steady"),
        }
    }
}

/// Probability mass over an enumerated state space.
#[derive(Debug, Clone)]
pub struct DistributionTable {
    pub space: Arc<StateSpace>,
    pub probs: Vec<f64>,
    pub horizon: Horizon,
    /// Upper bound on the mass lost to state-space truncation.
    pub pruned_mass: f64,
}

impl DistributionTable {
    pub fn point_mass(space: Arc<StateSpace>, index: usize, horizon: Horizon) -> Self {
        let mut probs = vec![0.0; space.len()];
        probs[index] = 1.0;
        DistributionTable {
            space,
            probs,
            horizon,
            pruned_mass: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PopulationVector, f64)> {
        self.space.iter().zip(self.probs.iter().copied())
    }

    pub fn probability(&self, x: &[u32]) -> f64 {
        self.space.index_of(x).map_or(0.0, |i| self.probs[i])
    }

    /// Total-variation distance, matching states by value.
    pub fn total_variation(&self, other: &DistributionTable) -> f64 {
        let mut sum = 0.0;
        for (x, p) in self.iter() {
            sum += (p - other.probability(x)).abs();
        }
        for (x, p) in other.iter() {
            if self.space.index_of(x).is_none() {
                sum += p;
            }
        }
        0.5 * sum
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmeOptions {
    /// Total truncation error budget of the Poisson series.
    pub tol: f64,
    pub state_cap: usize,
    /// Finite-state projection with pruning; exact enumeration when `None`.
    pub fsp: Option<FspOptions>,
}

impl Default for CmeOptions {
    fn default() -> Self {
        CmeOptions {
            tol: 1e-9,
            state_cap: DEFAULT_STATE_CAP,
            fsp: None,
        }
    }
}

const MAX_POISSON_MEAN: f64 = 400.0;

/// Advances `p` by `exp(K tau)` using uniformization. The Poisson series of
/// every macro-step is truncated once its tail drops below its share of
/// `tol`; the tail weight is assigned to the last iterate.
pub fn uniformize(gen: &Generator, p: &mut Vec<f64>, tau: f64, tol: f64) {
    let n = gen.len();
    let q = gen.max_exit_rate();
    if tau <= 0.0 || n == 0 || q == 0.0 {
        return;
    }
    let n_steps = (q * tau / MAX_POISSON_MEAN).ceil().max(1.0) as usize;
    let lambda = q * tau / n_steps as f64;
    let step_tol = (tol / n_steps as f64).max(1e-15);
    let k_max = (lambda + 12.0 * lambda.sqrt() + 60.0) as usize;
    let mut v = vec![0.0; n];
    let mut kv = vec![0.0; n];
    let mut acc = vec![0.0; n];
    for _ in 0..n_steps {
        v.copy_from_slice(p);
        let mut w = (-lambda).exp();
        let mut cum = w;
        for (a, vi) in acc.iter_mut().zip(&v) {
            *a = w * vi;
        }
        let mut k = 0;
        while 1.0 - cum > step_tol && k < k_max {
            gen.apply(&v, &mut kv);
            for (vi, ki) in v.iter_mut().zip(&kv) {
                *vi += ki / q;
            }
            k += 1;
            w *= lambda / k as f64;
            cum += w;
            for (a, vi) in acc.iter_mut().zip(&v) {
                *a += w * vi;
            }
        }
        let rest = (1.0 - cum).max(0.0);
        for (pi, (a, vi)) in p.iter_mut().zip(acc.iter().zip(&v)) {
            *pi = (a + rest * vi).max(0.0);
        }
    }
}

/// `π(τ) = exp(K τ) δ_{x0}`.
pub fn cme_solve(crn: &Crn, x0: &PopulationVector, tau: f64, opts: &CmeOptions) -> Result<DistributionTable> {
    crn.check_dim(x0.len())?;
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::Range(format!(
            "snapshot time must be finite and non-negative, got {tau}"
        )));
    }
    if let Some(fsp) = &opts.fsp {
        return fsp_solve(crn, x0, tau, opts.tol, opts.state_cap, fsp);
    }
    let space = reachable_states_capped(crn, x0, opts.state_cap)?;
    let gen = Generator::new(crn, &space);
    let mut p = vec![0.0; space.len()];
    p[0] = 1.0;
    uniformize(&gen, &mut p, tau, opts.tol);
    Ok(DistributionTable {
        space: Arc::new(space),
        probs: p,
        horizon: Horizon::Time(tau),
        pruned_mass: 0.0,
    })
}
