use std::sync::Arc;

use super::cme::{uniformize, DistributionTable, Horizon};
use super::generator::Generator;
use super::space::{successor, StateSpace};
use crate::crn::{Crn, PopulationVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FspOptions {
    /// States whose probability falls below this value are dropped.
    pub threshold: f64,
    /// Time between re-expansions of the projected space.
    pub macro_step: f64,
}

impl Default for FspOptions {
    fn default() -> Self {
        FspOptions {
            threshold: 1e-12,
            macro_step: 1.0,
        }
    }
}

/// Removes states with probability below `threshold`. The remaining mass is
/// not renormalized; the removed mass is added to the table's bound and
/// also returned.
pub fn fsp_prune(dist: &DistributionTable, threshold: f64) -> Result<(DistributionTable, f64)> {
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::Range(format!(
            "pruning threshold must lie in [0, 1), got {threshold}"
        )));
    }
    let mut kept = Vec::new();
    let mut probs = Vec::new();
    let mut removed = 0.0;
    for (x, p) in dist.iter() {
        if p < threshold {
            removed += p;
        } else {
            kept.push(x.clone());
            probs.push(p);
        }
    }
    let table = DistributionTable {
        space: Arc::new(StateSpace::from_states(kept)),
        probs,
        horizon: dist.horizon,
        pruned_mass: dist.pruned_mass + removed,
    };
    Ok((table, removed))
}

fn expand(crn: &Crn, space: &mut StateSpace, layers: usize, cap: usize) -> Result<bool> {
    let mut frontier: Vec<usize> = (0..space.len()).collect();
    for _ in 0..layers {
        let mut next = Vec::new();
        for &i in &frontier {
            for l in 0..crn.n_reactions() {
                if let Some(y) = successor(crn, space.get(i), l) {
                    if space.index_of(&y).is_none() {
                        if space.len() >= cap {
                            return Err(Error::ExplosionGuard { cap });
                        }
                        next.push(space.insert(y));
                    }
                }
            }
        }
        if next.is_empty() {
            return Ok(true);
        }
        frontier = next;
    }
    Ok(false)
}

/// Transient CME on an adaptively projected state space: before every
/// macro-step the space grows by breadth-first layers until the mass leaking
/// out during the step is within budget, and afterwards low-probability
/// states are pruned. Leaked and pruned mass accumulate in `pruned_mass`.
pub(crate) fn fsp_solve(
    crn: &Crn,
    x0: &PopulationVector,
    tau: f64,
    tol: f64,
    cap: usize,
    opts: &FspOptions,
) -> Result<DistributionTable> {
    if !(opts.macro_step.is_finite() && opts.macro_step > 0.0) {
        return Err(Error::Range(format!(
            "macro-step must be positive, got {}",
            opts.macro_step
        )));
    }
    let mut space = StateSpace::from_states(vec![x0.clone()]);
    let mut p = vec![1.0];
    let mut pruned = 0.0;
    let mut t = 0.0;
    while t < tau {
        let dt = opts.macro_step.min(tau - t);
        let budget = opts.threshold.max(tol * dt / tau);
        let mass_before: f64 = p.iter().sum();
        let mut layers = 1;
        let (next_space, next_p, leaked) = loop {
            let mut trial = space.clone();
            let closed = expand(crn, &mut trial, layers, cap)?;
            let gen = Generator::new(crn, &trial);
            let mut q = p.clone();
            q.resize(trial.len(), 0.0);
            uniformize(&gen, &mut q, dt, tol * dt / tau);
            let leaked = (mass_before - q.iter().sum::<f64>()).max(0.0);
            if closed || leaked <= budget || layers >= 256 {
                break (trial, q, leaked);
            }
            layers *= 2;
        };
        pruned += leaked;
        let table = DistributionTable {
            space: Arc::new(next_space),
            probs: next_p,
            horizon: Horizon::Time(t + dt),
            pruned_mass: 0.0,
        };
        let (kept, removed) = fsp_prune(&table, opts.threshold)?;
        pruned += removed;
        space = Arc::try_unwrap(kept.space).unwrap_or_else(|s| (*s).clone());
        p = kept.probs;
        t += dt;
    }
    Ok(DistributionTable {
        space: Arc::new(space),
        probs: p,
        horizon: Horizon::Time(tau),
        pruned_mass: pruned,
    })
}
