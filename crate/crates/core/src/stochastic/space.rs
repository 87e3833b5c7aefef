use std::collections::{HashMap, VecDeque};

use crate::crn::{Crn, PopulationVector};
use crate::error::{Error, Result};

pub const DEFAULT_STATE_CAP: usize = 5_000_000;

/// Enumerated set of population vectors with reverse lookup.
#[derive(Debug, Clone, Default)]
pub struct StateSpace {
    states: Vec<PopulationVector>,
    index: HashMap<PopulationVector, usize>,
}

impl StateSpace {
    /// Builds a space from distinct states, keeping their order.
    pub fn from_states(states: Vec<PopulationVector>) -> Self {
        let mut space = StateSpace::default();
        for s in states {
            space.insert(s);
        }
        space
    }

    /// Adds `x` if new and returns its index.
    pub fn insert(&mut self, x: PopulationVector) -> usize {
        if let Some(&i) = self.index.get(&x) {
            return i;
        }
        let i = self.states.len();
        self.index.insert(x.clone(), i);
        self.states.push(x);
        i
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[PopulationVector] {
        &self.states
    }

    pub fn get(&self, i: usize) -> &PopulationVector {
        &self.states[i]
    }

    pub fn index_of(&self, x: &[u32]) -> Option<usize> {
        self.index.get(x).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PopulationVector> {
        self.states.iter()
    }
}

/// Successor of `x` under reaction `l`, if every reactant is available.
pub(crate) fn successor(crn: &Crn, x: &[u32], l: usize) -> Option<PopulationVector> {
    let src = crn.reactants(l).coefficients();
    let dst = crn.products(l).coefficients();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        if x[i] < src[i] {
            return None;
        }
        out.push(x[i] - src[i] + dst[i]);
    }
    Some(PopulationVector(out))
}

/// Breadth-first closure of `x0` under all reactions.
pub fn reachable_states(crn: &Crn, x0: &PopulationVector) -> Result<StateSpace> {
    reachable_states_capped(crn, x0, DEFAULT_STATE_CAP)
}

pub fn reachable_states_capped(crn: &Crn, x0: &PopulationVector, cap: usize) -> Result<StateSpace> {
    crn.check_dim(x0.len())?;
    let mut space = StateSpace::default();
    space.insert(x0.clone());
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for l in 0..crn.n_reactions() {
            let Some(y) = successor(crn, space.get(i), l) else {
                continue;
            };
            if space.index_of(&y).is_none() {
                if space.len() >= cap {
                    return Err(Error::ExplosionGuard { cap });
                }
                queue.push_back(space.insert(y));
            }
        }
    }
    Ok(space)
}
