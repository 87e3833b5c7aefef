//! Differential-privacy leakage of a network's observable output.
//!
//! A database is summarized by its composition (agents per type). Two
//! compositions are adjacent when one agent changes type. The leakage of a
//! composition is the largest absolute log-ratio of the probability of any
//! observation under the composition and under any adjacent one, after adding
//! `ν` to every observation probability.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::factorial::ln_factorial;

use crate::crn::{Composition, Crn, PopulationVector, QuerySpec};
use crate::deterministic::{steady_state, MeanState, SteadyStateOptions};
use crate::error::{Error, Result};
use crate::stochastic::{
    cme_solve, reachable_states_capped, stationary_distribution_with, CmeOptions, DistributionTable, Generator,
    Horizon, StateSpace, StationaryMethod,
};
use crate::structure;

/// Observations ties within this distance of ε are all reported.
pub const TIE_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_NU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdjacencyPair {
    pub base: Composition,
    pub variant: Composition,
    /// Source and destination type of the moved agent.
    pub moved: (String, String),
}

/// Every composition reachable by moving one agent to another type.
pub fn adjacent_compositions(db: &Composition) -> Vec<AdjacencyPair> {
    let mut out: Vec<AdjacencyPair> = Vec::new();
    for (s, &n) in &db.type_counts {
        if n == 0 {
            continue;
        }
        for t in db.type_counts.keys() {
            if t == s {
                continue;
            }
            let variant = db.with_count(s, n - 1).with_count(t, db.count(t) + 1);
            if out.iter().any(|p| p.variant == variant) {
                continue;
            }
            out.push(AdjacencyPair {
                base: db.clone(),
                variant,
                moved: (s.clone(), t.clone()),
            });
        }
    }
    out
}

/// Places every agent in its type's initial state and fills resource states.
pub fn initial_state(db: &Composition, crn: &Crn) -> Result<PopulationVector> {
    let mut x = vec![0u32; crn.n_states()];
    for (name, &count) in &db.type_counts {
        let t = crn
            .type_index(name)
            .ok_or_else(|| Error::MissingInitialState(name.clone()))?;
        x[crn.types()[t].initial] += to_u32(count)?;
    }
    for (label, &count) in &db.resource_counts {
        let s = crn
            .state_id(label)
            .ok_or_else(|| Error::validation(format!("resource state `{label}` is not declared")))?;
        x[s] += to_u32(count)?;
    }
    Ok(PopulationVector(x))
}

fn to_u32(count: u64) -> Result<u32> {
    u32::try_from(count).map_err(|_| Error::Range(format!("count {count} exceeds 32 bits")))
}

/// `ln ∏ᵢ x̄ᵢ^{xᵢ} e^{−x̄ᵢ} / xᵢ!`; `−∞` when some `x̄ᵢ = 0 < xᵢ`.
pub fn log_product_poisson(xbar: &[f64], x: &[u32]) -> f64 {
    let mut l = 0.0;
    for (&m, &k) in xbar.iter().zip(x) {
        if k > 0 {
            if m <= 0.0 {
                return f64::NEG_INFINITY;
            }
            l += k as f64 * m.ln() - ln_factorial(k as u64);
        }
        l -= m;
    }
    l
}

/// Product of independent Poisson probabilities at `x`, optionally divided
/// by the sum of the product over `space`.
pub fn stationary_product_poisson(xbar: &[f64], x: &[u32], normalize_over: Option<&StateSpace>) -> f64 {
    let l = log_product_poisson(xbar, x);
    match normalize_over {
        None => l.exp(),
        Some(space) => {
            let logs: Vec<f64> = space.iter().map(|s| log_product_poisson(xbar, s)).collect();
            (l - log_sum_exp(&logs)).exp()
        }
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
}

/// Log-ratio of the two unnormalized product-Poisson laws at `x`:
/// `Σᵢ xᵢ ln(x̄ᵢ/x̄′ᵢ) − x̄ᵢ + x̄′ᵢ`.
pub fn identity_kernel(xbar: &[f64], xbar_variant: &[f64], x: &[u32]) -> f64 {
    let mut k = 0.0;
    for ((&a, &b), &n) in xbar.iter().zip(xbar_variant).zip(x) {
        if n > 0 {
            k += n as f64 * (a / b).ln();
        }
        k += b - a;
    }
    k
}

/// Probability of every observation.
pub type ObservableDistribution = BTreeMap<Vec<u32>, f64>;

/// Pushforward of a distribution through the query.
pub fn observable_distribution(pi: &DistributionTable, q: &QuerySpec) -> ObservableDistribution {
    let mut out = BTreeMap::new();
    for (x, p) in pi.iter() {
        *out.entry(q.evaluate(x)).or_insert(0.0) += p;
    }
    out
}

/// How the product-Poisson stationary law is read on a finite class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StationaryLaw {
    /// The product of Poisson terms as written, without a normalizing constant.
    Unnormalized,
    /// Normalized over the reachable class of each composition.
    Renormalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakageMethod {
    ClosedFormIdentity,
    ClosedFormQuery,
    CmeSnapshot,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakageOptions {
    pub nu: f64,
    pub steady: SteadyStateOptions,
    pub cme: CmeOptions,
    pub stationary_method: StationaryMethod,
}

impl Default for LeakageOptions {
    fn default() -> Self {
        LeakageOptions {
            nu: DEFAULT_NU,
            steady: SteadyStateOptions::default(),
            cme: CmeOptions::default(),
            stationary_method: StationaryMethod::Auto,
        }
    }
}

/// One maximizing (variant, observation) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Argmax {
    pub variant: Composition,
    pub moved: (String, String),
    pub observation: Vec<u32>,
    pub value: f64,
    pub p_base: f64,
    pub p_variant: f64,
    /// The observation is unreachable under one of the two compositions.
    pub outside_class: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeakageReport {
    pub epsilon: f64,
    pub method: LeakageMethod,
    pub law: Option<StationaryLaw>,
    pub nu: f64,
    pub horizon: Horizon,
    pub base: Composition,
    pub variants: usize,
    /// All maximizers within [`TIE_TOLERANCE`] of ε, in enumeration order.
    pub argmaxima: Vec<Argmax>,
    /// States at which a law was evaluated outside its own reachable class.
    pub out_of_class_evaluations: usize,
}

impl LeakageReport {
    pub fn argmax(&self) -> Option<&Argmax> {
        self.argmaxima.first()
    }
}

fn smoothed_log_ratio(p: f64, q: f64, nu: f64) -> f64 {
    ((p + nu).ln() - (q + nu).ln()).abs()
}

fn check_nu(nu: f64) -> Result<()> {
    if !(nu.is_finite() && nu > 0.0) {
        return Err(Error::Range(format!(
            "smoothing ν must be finite and positive, got {nu}"
        )));
    }
    Ok(())
}

fn require_complex_balanced(crn: &Crn) -> Result<()> {
    let weakly_reversible = structure::is_weakly_reversible(crn);
    let (deficiency, _) = structure::deficiency(crn);
    if weakly_reversible && deficiency == 0 {
        Ok(())
    } else {
        Err(Error::NotComplexBalanced {
            weakly_reversible,
            deficiency,
        })
    }
}

struct Candidate {
    variant: usize,
    observation: Vec<u32>,
    value: f64,
    p_base: f64,
    p_variant: f64,
    outside_class: bool,
}

fn collect_argmaxima(pairs: &[AdjacencyPair], candidates: Vec<Candidate>) -> (f64, Vec<Argmax>) {
    let eps = candidates.iter().fold(0.0f64, |m, c| m.max(c.value));
    let argmaxima = candidates
        .into_iter()
        .filter(|c| c.value >= eps - TIE_TOLERANCE)
        .map(|c| Argmax {
            variant: pairs[c.variant].variant.clone(),
            moved: pairs[c.variant].moved.clone(),
            observation: c.observation,
            value: c.value,
            p_base: c.p_base,
            p_variant: c.p_variant,
            outside_class: c.outside_class,
        })
        .collect();
    (eps, argmaxima)
}

/// What is computed for every composition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Analysis {
    /// Product-Poisson stationary law aggregated through the query.
    SteadyClosedForm(StationaryLaw),
    /// Chemical master equation at the given horizon.
    Snapshot(Horizon),
}

type CompositionKey = (Vec<(String, u64)>, Vec<(String, u64)>);
type Slot = Arc<Mutex<Option<Arc<ObservableDistribution>>>>;

fn key(db: &Composition) -> CompositionKey {
    (
        db.type_counts.iter().map(|(k, v)| (k.clone(), *v)).collect(),
        db.resource_counts.iter().map(|(k, v)| (k.clone(), *v)).collect(),
    )
}

/// Observable distributions per composition, computed once and shared
/// between every leakage evaluation that needs them.
pub struct LeakageEngine<'a> {
    crn: &'a Crn,
    query: QuerySpec,
    analysis: Analysis,
    opts: LeakageOptions,
    cache: Mutex<HashMap<CompositionKey, Slot>>,
}

impl<'a> LeakageEngine<'a> {
    pub fn new(crn: &'a Crn, query: QuerySpec, analysis: Analysis, opts: LeakageOptions) -> Result<Self> {
        check_nu(opts.nu)?;
        if let Some(g) = query
            .groups()
            .iter()
            .find(|g| g.states.iter().any(|&s| s >= crn.n_states()))
        {
            return Err(Error::validation(format!(
                "query group `{}` references an unknown state",
                g.name
            )));
        }
        if matches!(analysis, Analysis::SteadyClosedForm(_)) {
            require_complex_balanced(crn)?;
        }
        Ok(LeakageEngine {
            crn,
            query,
            analysis,
            opts,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn method(&self) -> LeakageMethod {
        match self.analysis {
            Analysis::SteadyClosedForm(_) => LeakageMethod::ClosedFormQuery,
            Analysis::Snapshot(_) => LeakageMethod::CmeSnapshot,
        }
    }

    fn compute(&self, db: &Composition) -> Result<ObservableDistribution> {
        let x0 = initial_state(db, self.crn)?;
        match self.analysis {
            Analysis::SteadyClosedForm(law) => {
                let space = reachable_states_capped(self.crn, &x0, self.opts.cme.state_cap)?;
                let x0f: Vec<f64> = x0.iter().map(|&v| v as f64).collect();
                let xbar = steady_state(self.crn, &x0f, &self.opts.steady)?;
                let logs: Vec<f64> = space.iter().map(|x| log_product_poisson(&xbar, x)).collect();
                let shift = match law {
                    StationaryLaw::Unnormalized => 0.0,
                    StationaryLaw::Renormalized => log_sum_exp(&logs),
                };
                let mut out = BTreeMap::new();
                for (x, l) in space.iter().zip(&logs) {
                    *out.entry(self.query.evaluate(x)).or_insert(0.0) += (l - shift).exp();
                }
                Ok(out)
            }
            Analysis::Snapshot(Horizon::Time(tau)) => {
                let pi = cme_solve(self.crn, &x0, tau, &self.opts.cme)?;
                Ok(observable_distribution(&pi, &self.query))
            }
            Analysis::Snapshot(Horizon::Steady) => {
                let space = reachable_states_capped(self.crn, &x0, self.opts.cme.state_cap)?;
                let gen = Generator::new(self.crn, &space);
                let probs = stationary_distribution_with(&gen, self.opts.stationary_method)?;
                let pi = DistributionTable {
                    space: Arc::new(space),
                    probs,
                    horizon: Horizon::Steady,
                    pruned_mass: 0.0,
                };
                Ok(observable_distribution(&pi, &self.query))
            }
        }
    }

    /// Observable distribution of one composition (cached).
    pub fn observable(&self, db: &Composition) -> Result<Arc<ObservableDistribution>> {
        let slot = self
            .cache
            .lock()
            .expect("cache lock")
            .entry(key(db))
            .or_default()
            .clone();
        let mut guard = slot.lock().expect("cache slot lock");
        if let Some(hit) = guard.as_ref() {
            return Ok(hit.clone());
        }
        let value = Arc::new(self.compute(db)?);
        *guard = Some(value.clone());
        Ok(value)
    }

    pub fn leakage(&self, db: &Composition) -> Result<LeakageReport> {
        let pairs = adjacent_compositions(db);
        let base = self.observable(db)?;
        let variants: Vec<Arc<ObservableDistribution>> = pairs
            .par_iter()
            .map(|p| self.observable(&p.variant))
            .collect::<Result<_>>()?;
        let nu = self.opts.nu;
        let mut candidates = Vec::new();
        for (v, obs) in variants.iter().enumerate() {
            let mut ys: Vec<&Vec<u32>> = base.keys().chain(obs.keys()).collect();
            ys.sort();
            ys.dedup();
            for y in ys {
                let (pb, pv) = (base.get(y), obs.get(y));
                let (p, q) = (pb.copied().unwrap_or(0.0), pv.copied().unwrap_or(0.0));
                candidates.push(Candidate {
                    variant: v,
                    observation: y.clone(),
                    value: smoothed_log_ratio(p, q, nu),
                    p_base: p,
                    p_variant: q,
                    outside_class: pb.is_none() || pv.is_none(),
                });
            }
        }
        let (epsilon, argmaxima) = collect_argmaxima(&pairs, candidates);
        Ok(LeakageReport {
            epsilon,
            method: self.method(),
            law: match self.analysis {
                Analysis::SteadyClosedForm(law) => Some(law),
                Analysis::Snapshot(_) => None,
            },
            nu,
            horizon: match self.analysis {
                Analysis::SteadyClosedForm(_) => Horizon::Steady,
                Analysis::Snapshot(h) => h,
            },
            base: db.clone(),
            variants: pairs.len(),
            argmaxima,
            out_of_class_evaluations: 0,
        })
    }
}

/// Steady-state leakage of the full population vector from the
/// product-Poisson law. With [`StationaryLaw::Unnormalized`] every state of
/// the union of both classes is scored by [`identity_kernel`], also where a
/// law is evaluated outside its own class; the ν-smoothed ratio is used only
/// where one of the two products is exactly zero.
pub fn leakage_steady_identity(
    crn: &Crn,
    db: &Composition,
    law: StationaryLaw,
    opts: &LeakageOptions,
) -> Result<LeakageReport> {
    if law == StationaryLaw::Renormalized {
        let engine = LeakageEngine::new(crn, QuerySpec::identity(crn), Analysis::SteadyClosedForm(law), *opts)?;
        let mut report = engine.leakage(db)?;
        report.method = LeakageMethod::ClosedFormIdentity;
        return Ok(report);
    }
    check_nu(opts.nu)?;
    require_complex_balanced(crn)?;
    let prepare = |d: &Composition| -> Result<(StateSpace, MeanState)> {
        let x0 = initial_state(d, crn)?;
        let space = reachable_states_capped(crn, &x0, opts.cme.state_cap)?;
        let x0f: Vec<f64> = x0.iter().map(|&v| v as f64).collect();
        Ok((space, steady_state(crn, &x0f, &opts.steady)?))
    };
    let pairs = adjacent_compositions(db);
    let (base_space, xbar) = prepare(db)?;
    let variants: Vec<(StateSpace, MeanState)> =
        pairs.par_iter().map(|p| prepare(&p.variant)).collect::<Result<_>>()?;
    let mut candidates = Vec::new();
    let mut out_of_class = 0;
    for (v, (space, xbar_v)) in variants.iter().enumerate() {
        let mut seen: HashSet<&[u32]> = HashSet::new();
        for x in base_space.iter().chain(space.iter()) {
            if !seen.insert(x) {
                continue;
            }
            let in_base = base_space.index_of(x).is_some();
            let in_variant = space.index_of(x).is_some();
            out_of_class += usize::from(!in_base) + usize::from(!in_variant);
            let lb = log_product_poisson(&xbar, x);
            let lv = log_product_poisson(xbar_v, x);
            let value = if lb.is_finite() && lv.is_finite() {
                identity_kernel(&xbar, xbar_v, x).abs()
            } else {
                smoothed_log_ratio(lb.exp(), lv.exp(), opts.nu)
            };
            candidates.push(Candidate {
                variant: v,
                observation: x.to_vec(),
                value,
                p_base: lb.exp(),
                p_variant: lv.exp(),
                outside_class: !(in_base && in_variant),
            });
        }
    }
    let (epsilon, argmaxima) = collect_argmaxima(&pairs, candidates);
    Ok(LeakageReport {
        epsilon,
        method: LeakageMethod::ClosedFormIdentity,
        law: Some(law),
        nu: opts.nu,
        horizon: Horizon::Steady,
        base: db.clone(),
        variants: pairs.len(),
        argmaxima,
        out_of_class_evaluations: out_of_class,
    })
}

/// Steady-state leakage through a query, from fiber sums of the
/// product-Poisson law.
pub fn leakage_steady_query(
    crn: &Crn,
    db: &Composition,
    q: &QuerySpec,
    law: StationaryLaw,
    opts: &LeakageOptions,
) -> Result<LeakageReport> {
    LeakageEngine::new(crn, q.clone(), Analysis::SteadyClosedForm(law), *opts)?.leakage(db)
}

/// Leakage of a snapshot taken at `horizon`, from the chemical master equation.
pub fn leakage_snapshot(
    crn: &Crn,
    db: &Composition,
    q: &QuerySpec,
    horizon: Horizon,
    opts: &LeakageOptions,
) -> Result<LeakageReport> {
    if let Horizon::Time(t) = horizon {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Range(format!(
                "snapshot time must be finite and non-negative, got {t}"
            )));
        }
    }
    LeakageEngine::new(crn, q.clone(), Analysis::Snapshot(horizon), *opts)?.leakage(db)
}
