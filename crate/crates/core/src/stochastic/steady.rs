use std::sync::Arc;

use super::cme::{DistributionTable, Horizon};
use super::generator::Generator;
use super::space::{reachable_states_capped, DEFAULT_STATE_CAP};
use crate::crn::{Crn, PopulationVector};
use crate::error::{Error, Result};
use crate::sparse::{gmres, CsrMatrix, Ilu0};

/// Spaces up to this size are solved densely by GTH elimination.
pub const DENSE_LIMIT: usize = 2000;

/// Stationary distribution `K π̄ = 0, Σ π̄ = 1` of the chain on the class
/// reachable from `x0`.
pub fn cme_steady_state(crn: &Crn, x0: &PopulationVector) -> Result<DistributionTable> {
    cme_steady_state_capped(crn, x0, DEFAULT_STATE_CAP)
}

pub fn cme_steady_state_capped(crn: &Crn, x0: &PopulationVector, cap: usize) -> Result<DistributionTable> {
    let space = reachable_states_capped(crn, x0, cap)?;
    let gen = Generator::new(crn, &space);
    let probs = stationary_distribution(&gen)?;
    Ok(DistributionTable {
        space: Arc::new(space),
        probs,
        horizon: Horizon::Steady,
        pruned_mass: 0.0,
    })
}

/// Linear solver for the stationary balance equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StationaryMethod {
    /// Dense elimination up to [`DENSE_LIMIT`] states, iterative beyond.
    #[default]
    Auto,
    Dense,
    Iterative,
}

impl StationaryMethod {
    pub fn resolve(self, n: usize) -> StationaryMethod {
        match self {
            StationaryMethod::Auto if n <= DENSE_LIMIT => StationaryMethod::Dense,
            StationaryMethod::Auto => StationaryMethod::Iterative,
            other => other,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StationaryMethod::Auto => "auto",
            StationaryMethod::Dense => "gth",
            StationaryMethod::Iterative => "ilu0-gmres",
        }
    }
}

/// Null vector of an irreducible generator, normalized to unit mass.
pub fn stationary_distribution(gen: &Generator) -> Result<Vec<f64>> {
    stationary_distribution_with(gen, StationaryMethod::Auto)
}

pub fn stationary_distribution_with(gen: &Generator, method: StationaryMethod) -> Result<Vec<f64>> {
    let n = gen.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let classes = gen.communicating_classes();
    if classes > 1 {
        return Err(Error::Reducible { classes });
    }
    let mut pi = match method.resolve(n) {
        StationaryMethod::Dense => gth(gen),
        _ => iterative(gen)?,
    };
    let total: f64 = pi.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::NonConvergence("stationary solve produced no mass".into()));
    }
    for p in &mut pi {
        *p /= total;
    }
    Ok(pi)
}

/// Grassmann–Taksar–Heyman elimination; subtraction-free, so small
/// probabilities keep full relative accuracy.
fn gth(gen: &Generator) -> Vec<f64> {
    let n = gen.len();
    // r[i * n + j] = rate i → j
    let mut r = vec![0.0; n * n];
    for j in 0..n {
        for (i, v) in gen.out_transitions(j) {
            r[j * n + i] = v;
        }
    }
    for k in (1..n).rev() {
        let s: f64 = r[k * n..k * n + k].iter().sum();
        for i in 0..k {
            r[i * n + k] /= s;
        }
        for i in 0..k {
            let f = r[i * n + k];
            if f == 0.0 {
                continue;
            }
            for j in 0..k {
                r[i * n + j] += f * r[k * n + j];
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        pi[k] = (0..k).map(|i| pi[i] * r[i * n + k]).sum();
    }
    pi
}

/// Pins `π̄_0 = 1` and solves the remaining balance equations by
/// ILU(0)-preconditioned GMRES.
fn iterative(gen: &Generator) -> Result<Vec<f64>> {
    let n = gen.len();
    let a = gen.to_csr_without(0);
    let mut b = vec![0.0; n - 1];
    for (i, v) in gen.out_transitions(0) {
        b[i - 1] = -v;
    }
    let ilu = Ilu0::new(&a)?;
    let mut x = vec![0.0; n - 1];
    gmres(&a, &b, &mut x, &ilu, 1e-12, 80, 20_000)?;
    let mut pi = Vec::with_capacity(n);
    pi.push(1.0);
    pi.extend(x.into_iter().map(|v| v.max(0.0)));
    polish(gen, &mut pi);
    Ok(pi)
}

/// Gauss–Seidel sweeps on the balance equations
/// `π_i · exit_i = Σ_j π_j · rate(j → i)`. Every update is a sum of
/// non-negative terms, so the sweeps restore relative accuracy in
/// probabilities far below the solver's normwise residual.
fn polish(gen: &Generator, pi: &mut [f64]) {
    let n = gen.len();
    let mut triplets = Vec::new();
    for j in 0..n {
        for (i, v) in gen.out_transitions(j) {
            triplets.push((i, j, v));
        }
    }
    let inflow = CsrMatrix::from_triplets(n, triplets);
    let exit: Vec<f64> = gen.diagonal().iter().map(|d| -d).collect();
    for _ in 0..POLISH_SWEEPS {
        let mut change = 0.0f64;
        for i in 0..n {
            let mut s = 0.0;
            for k in inflow.row_ptr[i]..inflow.row_ptr[i + 1] {
                s += inflow.values[k] * pi[inflow.col_idx[k]];
            }
            let next = s / exit[i];
            if next > 0.0 {
                change = change.max(((next - pi[i]) / next).abs());
            }
            pi[i] = next;
        }
        let total: f64 = pi.iter().sum();
        for p in pi.iter_mut() {
            *p /= total;
        }
        if change < POLISH_TOL {
            break;
        }
    }
}

const POLISH_SWEEPS: usize = 200;
const POLISH_TOL: f64 = 1e-13;
