//! Reaction-network model: states, complexes, mass-action reactions,
//! population vectors, compositions and observable queries.
//!
//! A state label may carry the set of agent types it involves inside
//! braces, optionally followed by an activity tag: `{1,2}w` is the waiting
//! state shared by one agent of type 1 and one of type 2. Labels without
//! braces involve no agent type (shared resources, by-products).

use std::collections::HashMap;
use std::fmt;
use std::ops::{Deref, Index};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type StateId = usize;

/// A named state of the network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct State {
    label: String,
    types: Vec<String>,
}

impl State {
    pub fn new(label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        validate_label(&label)?;
        let types = parse_type_set(&label);
        Ok(State { label, types })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// The multiset of agent types involved in this state, as written in the label.
    pub fn types(&self) -> &[String] {
        &self.types
    }

    /// Number of agents aggregated in this state (|I| counted with multiplicity).
    pub fn group_size(&self) -> usize {
        self.types.len()
    }
}

fn validate_label(label: &str) -> Result<()> {
    if label.is_empty() {
        return Err(Error::validation("empty state label"));
    }
    if let Some(c) = label
        .chars()
        .find(|c| c.is_whitespace() || matches!(c, '+' | ':' | '=' | '#' | '*' | '<' | '>'))
    {
        return Err(Error::validation(format!(
            "state label `{label}` contains reserved character `{c}`"
        )));
    }
    if label.chars().all(|c| c.is_ascii_digit()) {
        return Err(Error::validation(format!(
            "state label `{label}` must not be a bare number"
        )));
    }
    Ok(())
}

fn parse_type_set(label: &str) -> Vec<String> {
    let (Some(open), Some(close)) = (label.find('{'), label.find('}')) else {
        return Vec::new();
    };
    if close < open {
        return Vec::new();
    }
    label[open + 1..close]
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Non-negative integer combination of states.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Complex(Vec<u32>);

impl Complex {
    pub fn new(coefficients: Vec<u32>) -> Self {
        Complex(coefficients)
    }

    pub fn coefficients(&self) -> &[u32] {
        &self.0
    }

    /// Total number of state units in the complex.
    pub fn molecularity(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Iterator over `(state, multiplicity)` pairs with non-zero multiplicity.
    pub fn support(&self) -> impl Iterator<Item = (StateId, u32)> + '_ {
        self.0.iter().enumerate().filter(|(_, &m)| m > 0).map(|(i, &m)| (i, m))
    }

    /// The state if this complex is exactly one unit of a single state.
    pub fn as_single_state(&self) -> Option<StateId> {
        let mut it = self.support();
        match (it.next(), it.next()) {
            (Some((i, 1)), None) => Some(i),
            _ => None,
        }
    }
}

/// Directed reaction between two complexes with a mass-action rate constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reaction {
    pub source: usize,
    pub target: usize,
    pub rate: f64,
}

/// An agent type together with the state its agents start in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeDecl {
    pub name: String,
    pub initial: StateId,
}

/// Immutable mass-action reaction network.
#[derive(Debug, Clone, PartialEq)]
pub struct Crn {
    types: Vec<TypeDecl>,
    states: Vec<State>,
    complexes: Vec<Complex>,
    reactions: Vec<Reaction>,
}

impl Crn {
    pub fn builder() -> CrnBuilder {
        CrnBuilder::default()
    }

    pub fn types(&self) -> &[TypeDecl] {
        &self.types
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn complexes(&self) -> &[Complex] {
        &self.complexes
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_complexes(&self) -> usize {
        self.complexes.len()
    }

    pub fn n_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn state_id(&self, label: &str) -> Option<StateId> {
        self.states.iter().position(|s| s.label == label)
    }

    pub fn type_index(&self, name: &str) -> Option<usize> {
        self.types.iter().position(|t| t.name == name)
    }

    pub fn rates(&self) -> Vec<f64> {
        self.reactions.iter().map(|r| r.rate).collect()
    }

    pub fn reactants(&self, reaction: usize) -> &Complex {
        &self.complexes[self.reactions[reaction].source]
    }

    pub fn products(&self, reaction: usize) -> &Complex {
        &self.complexes[self.reactions[reaction].target]
    }

    /// Number of agents of type `type_idx` held by one unit of `state`.
    pub fn type_multiplicity(&self, state: StateId, type_idx: usize) -> u32 {
        let name = &self.types[type_idx].name;
        self.states[state].types.iter().filter(|t| *t == name).count() as u32
    }

    /// Copy of the network with every rate constant replaced.
    pub fn with_rates(&self, rates: &[f64]) -> Result<Crn> {
        if rates.len() != self.reactions.len() {
            return Err(Error::DimensionMismatch {
                expected: self.reactions.len(),
                found: rates.len(),
            });
        }
        let mut out = self.clone();
        for (r, &k) in out.reactions.iter_mut().zip(rates) {
            check_rate(k)?;
            r.rate = k;
        }
        Ok(out)
    }

    /// Stoichiometry matrix, one row per state and one column per reaction.
    pub fn stoichiometry_matrix(&self) -> Vec<Vec<i64>> {
        let mut gamma = vec![vec![0i64; self.reactions.len()]; self.states.len()];
        for (l, _) in self.reactions.iter().enumerate() {
            for (i, d) in self.net_change(l).into_iter().enumerate() {
                gamma[i][l] = d;
            }
        }
        gamma
    }

    /// Column `l` of the stoichiometry matrix.
    pub fn net_change(&self, reaction: usize) -> Vec<i64> {
        let src = self.reactants(reaction).coefficients();
        let dst = self.products(reaction).coefficients();
        src.iter().zip(dst).map(|(&a, &b)| b as i64 - a as i64).collect()
    }

    /// Mass-action propensity of one reaction, `κ ∏ x_i^ρ_i`, zero when any
    /// reactant count is below its multiplicity.
    pub fn reaction_propensity(&self, reaction: usize, x: &[u32]) -> f64 {
        let r = &self.reactions[reaction];
        let mut value = r.rate;
        for (i, m) in self.complexes[r.source].support() {
            if x[i] < m {
                return 0.0;
            }
            value *= (x[i] as f64).powi(m as i32);
        }
        value
    }

    /// Propensities of all reactions at population `x`.
    pub fn propensities(&self, x: &[u32]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        Ok((0..self.reactions.len())
            .map(|l| self.reaction_propensity(l, x))
            .collect())
    }

    /// Fires reaction `l` once.
    pub fn apply_reaction(&self, x: &PopulationVector, reaction: usize) -> Result<PopulationVector> {
        self.check_dim(x.len())?;
        if reaction >= self.reactions.len() {
            return Err(Error::Range(format!("reaction index {reaction}")));
        }
        let src = self.reactants(reaction).coefficients();
        let dst = self.products(reaction).coefficients();
        let mut out = x.0.clone();
        for i in 0..out.len() {
            if out[i] < src[i] {
                return Err(Error::InsufficientReactants { reaction });
            }
            out[i] = out[i] - src[i] + dst[i];
        }
        Ok(PopulationVector(out))
    }

    pub(crate) fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.states.len() {
            return Err(Error::DimensionMismatch {
                expected: self.states.len(),
                found,
            });
        }
        Ok(())
    }

    /// Index of the reaction that undoes `reaction`, if present.
    pub fn reverse_of(&self, reaction: usize) -> Option<usize> {
        let r = &self.reactions[reaction];
        self.reactions
            .iter()
            .position(|s| s.source == r.target && s.target == r.source)
    }
}

fn check_rate(k: f64) -> Result<()> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::validation(format!(
            "rate constant must be finite and positive, got {k}"
        )));
    }
    Ok(())
}

/// Incremental construction of a [`Crn`]; complexes are deduplicated as they appear.
#[derive(Debug, Default, Clone)]
pub struct CrnBuilder {
    types: Vec<(String, Option<String>)>,
    states: Vec<State>,
    reactions: Vec<(Vec<(StateId, u32)>, Vec<(StateId, u32)>, f64)>,
}

impl CrnBuilder {
    /// Declares an agent type; `initial` names its starting state. When absent,
    /// the unique state whose type set is exactly `{name}` is used.
    pub fn add_type(&mut self, name: impl Into<String>, initial: Option<&str>) -> &mut Self {
        self.types.push((name.into(), initial.map(str::to_owned)));
        self
    }

    pub fn add_state(&mut self, label: impl Into<String>) -> Result<StateId> {
        let state = State::new(label)?;
        if self.states.iter().any(|s| s.label == state.label) {
            return Err(Error::validation(format!("duplicate state `{}`", state.label)));
        }
        self.states.push(state);
        Ok(self.states.len() - 1)
    }

    pub fn state_id(&self, label: &str) -> Option<StateId> {
        self.states.iter().position(|s| s.label == label)
    }

    /// Adds one directed reaction given as `(state, multiplicity)` lists.
    pub fn add_reaction(
        &mut self,
        reactants: &[(StateId, u32)],
        products: &[(StateId, u32)],
        rate: f64,
    ) -> Result<&mut Self> {
        check_rate(rate)?;
        for &(s, _) in reactants.iter().chain(products) {
            if s >= self.states.len() {
                return Err(Error::validation(format!("unknown state index {s}")));
            }
        }
        self.reactions.push((reactants.to_vec(), products.to_vec(), rate));
        Ok(self)
    }

    /// Adds a forward/backward pair.
    pub fn add_reversible(
        &mut self,
        left: &[(StateId, u32)],
        right: &[(StateId, u32)],
        forward: f64,
        backward: f64,
    ) -> Result<&mut Self> {
        self.add_reaction(left, right, forward)?;
        self.add_reaction(right, left, backward)
    }

    pub fn build(&self) -> Result<Crn> {
        let n = self.states.len();
        let mut complexes: Vec<Complex> = Vec::new();
        let mut index: HashMap<Complex, usize> = HashMap::new();
        let mut intern = |terms: &[(StateId, u32)]| {
            let mut coeffs = vec![0u32; n];
            for &(s, m) in terms {
                coeffs[s] += m;
            }
            let c = Complex(coeffs);
            *index.entry(c.clone()).or_insert_with(|| {
                complexes.push(c);
                complexes.len() - 1
            })
        };
        let mut reactions = Vec::with_capacity(self.reactions.len());
        for (src, dst, rate) in &self.reactions {
            let source = intern(src);
            let target = intern(dst);
            if source == target {
                return Err(Error::validation(
                    "reaction has identical reactant and product complexes",
                ));
            }
            reactions.push(Reaction {
                source,
                target,
                rate: *rate,
            });
        }

        let mut types = Vec::with_capacity(self.types.len());
        for (name, initial) in &self.types {
            if types.iter().any(|t: &TypeDecl| &t.name == name) {
                return Err(Error::validation(format!("duplicate type `{name}`")));
            }
            let initial = match initial {
                Some(label) => self.state_id(label).ok_or_else(|| {
                    Error::validation(format!("initial state `{label}` of type `{name}` is not declared"))
                })?,
                None => {
                    let candidates: Vec<_> = self
                        .states
                        .iter()
                        .enumerate()
                        .filter(|(_, s)| s.types.len() == 1 && &s.types[0] == name)
                        .map(|(i, _)| i)
                        .collect();
                    match candidates.as_slice() {
                        [only] => *only,
                        _ => return Err(Error::MissingInitialState(name.clone())),
                    }
                }
            };
            if !self.states[initial].types.iter().any(|t| t == name) {
                return Err(Error::validation(format!(
                    "initial state `{}` of type `{name}` does not involve that type",
                    self.states[initial].label
                )));
            }
            types.push(TypeDecl {
                name: name.clone(),
                initial,
            });
        }

        Ok(Crn {
            types,
            states: self.states.clone(),
            complexes,
            reactions,
        })
    }
}

/// Occupancy of every state (the system-level state).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PopulationVector(pub Vec<u32>);

impl PopulationVector {
    pub fn zeros(n: usize) -> Self {
        PopulationVector(vec![0; n])
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&c| c as u64).sum()
    }
}

impl Deref for PopulationVector {
    type Target = [u32];
    fn deref(&self) -> &[u32] {
        &self.0
    }
}

impl std::borrow::Borrow<[u32]> for PopulationVector {
    fn borrow(&self) -> &[u32] {
        &self.0
    }
}

impl From<Vec<u32>> for PopulationVector {
    fn from(v: Vec<u32>) -> Self {
        PopulationVector(v)
    }
}

impl fmt::Display for PopulationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

/// One observable component: the states whose counts are summed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryGroup {
    pub name: String,
    pub states: Vec<StateId>,
}

/// Observation function `y_i = Σ_{j ∈ Ω_i} x_j` over disjoint groups.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QuerySpec {
    groups: Vec<QueryGroup>,
}

impl QuerySpec {
    pub fn new(groups: Vec<QueryGroup>, n_states: usize) -> Result<Self> {
        let mut owner: HashMap<StateId, &str> = HashMap::new();
        for g in &groups {
            for &s in &g.states {
                if s >= n_states {
                    return Err(Error::validation(format!(
                        "query group `{}` references state index {s} out of range",
                        g.name
                    )));
                }
                if let Some(prev) = owner.insert(s, &g.name) {
                    return Err(Error::validation(format!(
                        "query groups `{prev}` and `{}` share state index {s}",
                        g.name
                    )));
                }
            }
        }
        Ok(QuerySpec { groups })
    }

    /// Every state observed on its own.
    pub fn identity(crn: &Crn) -> Self {
        QuerySpec {
            groups: crn
                .states()
                .iter()
                .enumerate()
                .map(|(i, s)| QueryGroup {
                    name: s.label().to_owned(),
                    states: vec![i],
                })
                .collect(),
        }
    }

    /// `y_i` counts the states aggregating exactly `i` agents, for `i = 1..=max_size`.
    pub fn group_size_counts(crn: &Crn, max_size: usize) -> Self {
        let groups = (1..=max_size)
            .map(|size| QueryGroup {
                name: format!("size{size}"),
                states: crn
                    .states()
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.group_size() == size)
                    .map(|(i, _)| i)
                    .collect(),
            })
            .collect();
        QuerySpec { groups }
    }

    pub fn groups(&self) -> &[QueryGroup] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn evaluate(&self, x: &[u32]) -> Vec<u32> {
        self.groups
            .iter()
            .map(|g| g.states.iter().map(|&s| x[s]).sum())
            .collect()
    }
}

/// The database: agent counts per type plus fixed resource counts per state.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Composition {
    pub type_counts: IndexMap<String, u64>,
    pub resource_counts: IndexMap<String, u64>,
}

impl Composition {
    pub fn new(type_counts: IndexMap<String, u64>, resource_counts: IndexMap<String, u64>) -> Self {
        Composition {
            type_counts,
            resource_counts,
        }
    }

    /// Total number of agents.
    pub fn total(&self) -> u64 {
        self.type_counts.values().sum()
    }

    pub fn count(&self, type_name: &str) -> u64 {
        self.type_counts.get(type_name).copied().unwrap_or(0)
    }

    pub fn with_count(&self, type_name: &str, count: u64) -> Self {
        let mut out = self.clone();
        out.type_counts.insert(type_name.to_owned(), count);
        out
    }

    /// Counts in declaration order.
    pub fn counts(&self) -> Vec<u64> {
        self.type_counts.values().copied().collect()
    }
}

impl Index<&str> for Composition {
    type Output = u64;
    fn index(&self, type_name: &str) -> &u64 {
        &self.type_counts[type_name]
    }
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (k, v)) in self.type_counts.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}:{v}")?;
        }
        write!(f, "}}")
    }
}
