//! Mean-field mass-action dynamics `ẋ = Γ r(x) = M A ψ(x)` and the positive
//! equilibrium of complex-balanced networks.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::crn::Crn;
use crate::error::{Error, Result};
use crate::linalg::{independent_rows, integer_null_space, transpose};
use crate::structure;

/// Ensemble-average occupancy of every state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeanState(pub Vec<f64>);

impl Deref for MeanState {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

fn reaction_flux(crn: &Crn, l: usize, x: &[f64]) -> f64 {
    let r = &crn.reactions()[l];
    crn.complexes()[r.source]
        .support()
        .fold(r.rate, |acc, (i, m)| acc * x[i].powi(m as i32))
}

fn flux(crn: &Crn, x: &[f64]) -> Vec<f64> {
    (0..crn.n_reactions()).map(|l| reaction_flux(crn, l, x)).collect()
}

/// `Γ · r(x)`.
pub fn ode_rhs(crn: &Crn, x: &[f64]) -> Result<Vec<f64>> {
    crn.check_dim(x.len())?;
    let r = flux(crn, x);
    let mut dx = vec![0.0; crn.n_states()];
    for (l, rl) in r.iter().enumerate() {
        for (i, d) in crn.net_change(l).into_iter().enumerate() {
            if d != 0 {
                dx[i] += d as f64 * rl;
            }
        }
    }
    Ok(dx)
}

/// `M · A_κ · ψ(x)`: complex composition matrix, weighted Laplacian of the
/// complex graph and monomials of every complex.
pub fn ode_rhs_factored(crn: &Crn, x: &[f64]) -> Result<Vec<f64>> {
    crn.check_dim(x.len())?;
    let nc = crn.n_complexes();
    let mut m = DMatrix::<f64>::zeros(crn.n_states(), nc);
    for (j, c) in crn.complexes().iter().enumerate() {
        for (i, k) in c.support() {
            m[(i, j)] = k as f64;
        }
    }
    let mut a = DMatrix::<f64>::zeros(nc, nc);
    for r in crn.reactions() {
        a[(r.target, r.source)] += r.rate;
        a[(r.source, r.source)] -= r.rate;
    }
    let psi = DVector::from_iterator(
        nc,
        crn.complexes()
            .iter()
            .map(|c| c.support().fold(1.0, |acc, (i, k)| acc * x[i].powi(k as i32))),
    );
    Ok((m * a * psi).iter().copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateOptions {
    /// Absolute bound on `‖ẋ‖∞`, raised to the floating-point floor of the
    /// flux magnitudes when those are large.
    pub tol: f64,
    pub max_newton_iter: usize,
    pub max_integration_time: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        SteadyStateOptions {
            tol: 1e-10,
            max_newton_iter: 100,
            max_integration_time: 1e8,
        }
    }
}

/// Network restricted to the states that can become populated from `x0`.
struct Reduced<'a> {
    crn: &'a Crn,
    states: Vec<usize>,
    reactions: Vec<usize>,
    /// Γ restricted to active states and reactions (rows: states).
    gamma: Vec<Vec<i64>>,
    flux_rows: Vec<usize>,
    conservation: Vec<Vec<i64>>,
    totals: Vec<f64>,
}

impl<'a> Reduced<'a> {
    fn new(crn: &'a Crn, x0: &[f64]) -> Self {
        let n = crn.n_states();
        let mut present: Vec<bool> = x0.iter().map(|&v| v > 0.0).collect();
        let mut active = vec![false; crn.n_reactions()];
        loop {
            let mut changed = false;
            for l in 0..crn.n_reactions() {
                if !active[l] && crn.reactants(l).support().all(|(i, _)| present[i]) {
                    active[l] = true;
                    changed = true;
                    for (i, _) in crn.products(l).support() {
                        present[i] = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let states: Vec<usize> = (0..n).filter(|&i| present[i]).collect();
        let reactions: Vec<usize> = (0..crn.n_reactions()).filter(|&l| active[l]).collect();
        let gamma: Vec<Vec<i64>> = states
            .iter()
            .map(|&i| reactions.iter().map(|&l| crn.net_change(l)[i]).collect())
            .collect();
        let flux_rows = independent_rows(&gamma);
        let conservation = integer_null_space(&transpose(&gamma, reactions.len()), states.len());
        let totals = conservation
            .iter()
            .map(|c| c.iter().zip(&states).map(|(&ci, &i)| ci as f64 * x0[i]).sum())
            .collect();
        Reduced {
            crn,
            states,
            reactions,
            gamma,
            flux_rows,
            conservation,
            totals,
        }
    }

    fn expand(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.crn.n_states()];
        for (k, &i) in self.states.iter().enumerate() {
            x[i] = y[k];
        }
        x
    }

    fn fluxes(&self, y: &[f64]) -> Vec<f64> {
        let x = self.expand(y);
        self.reactions.iter().map(|&l| reaction_flux(self.crn, l, &x)).collect()
    }

    fn rhs(&self, y: &[f64]) -> Vec<f64> {
        let r = self.fluxes(y);
        self.gamma
            .iter()
            .map(|row| row.iter().zip(&r).map(|(&g, &rl)| g as f64 * rl).sum())
            .collect()
    }

    /// Flux rows followed by conservation rows.
    fn residual(&self, y: &[f64]) -> DVector<f64> {
        let dy = self.rhs(y);
        let mut f: Vec<f64> = self.flux_rows.iter().map(|&k| dy[k]).collect();
        for (c, total) in self.conservation.iter().zip(&self.totals) {
            f.push(c.iter().zip(y).map(|(&ci, &v)| ci as f64 * v).sum::<f64>() - total);
        }
        DVector::from_vec(f)
    }

    fn jacobian(&self, y: &[f64]) -> DMatrix<f64> {
        let n = self.states.len();
        let x = self.expand(y);
        // d r_l / d y_k for every active reaction
        let mut dr = DMatrix::<f64>::zeros(self.reactions.len(), n);
        for (col, &l) in self.reactions.iter().enumerate() {
            let r = &self.crn.reactions()[l];
            let src = &self.crn.complexes()[r.source];
            for (k, &i) in self.states.iter().enumerate() {
                let m = src.coefficients()[i];
                if m == 0 {
                    continue;
                }
                let mut v = r.rate * m as f64 * x[i].powi(m as i32 - 1);
                for (j, mj) in src.support() {
                    if j != i {
                        v *= x[j].powi(mj as i32);
                    }
                }
                dr[(col, k)] = v;
            }
        }
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for (row, &k) in self.flux_rows.iter().enumerate() {
            for c in 0..n {
                let mut v = 0.0;
                for (col, &g) in self.gamma[k].iter().enumerate() {
                    if g != 0 {
                        v += g as f64 * dr[(col, c)];
                    }
                }
                jac[(row, c)] = v;
            }
        }
        for (row, c) in self.conservation.iter().enumerate() {
            for (k, &ci) in c.iter().enumerate() {
                jac[(self.flux_rows.len() + row, k)] = ci as f64;
            }
        }
        jac
    }

    /// Convergence threshold on `‖ẏ‖∞` and on the conservation residual.
    fn thresholds(&self, y: &[f64], tol: f64) -> (f64, f64) {
        let flux_scale = self.fluxes(y).iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let mass_scale = self.totals.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
        (
            tol.max(64.0 * f64::EPSILON * flux_scale),
            tol.max(64.0 * f64::EPSILON * mass_scale),
        )
    }

    fn converged(&self, y: &[f64], tol: f64) -> bool {
        let (ft, ct) = self.thresholds(y, tol);
        let f = self.residual(y);
        let nf = self.flux_rows.len();
        let rhs_ok = self.rhs(y).iter().all(|v| v.abs() < ft);
        let cons_ok = f.iter().skip(nf).all(|v| v.abs() < ct);
        rhs_ok && cons_ok
    }

    fn newton(&self, mut y: Vec<f64>, opts: &SteadyStateOptions) -> Option<Vec<f64>> {
        let mut f = self.residual(&y);
        for _ in 0..opts.max_newton_iter {
            if self.converged(&y, opts.tol) {
                return Some(y);
            }
            let step = self.jacobian(&y).lu().solve(&(-&f))?;
            let norm = f.norm();
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = y.iter().zip(step.iter()).map(|(a, d)| a + alpha * d).collect();
                if trial.iter().all(|&v| v > 0.0) {
                    let ft = self.residual(&trial);
                    if ft.norm() <= (1.0 - 1e-4 * alpha) * norm || ft.norm() == 0.0 {
                        y = trial;
                        f = ft;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                return None;
            }
        }
        self.converged(&y, opts.tol).then_some(y)
    }

    /// Dormand–Prince integration of the reduced ODE until `‖ẏ‖∞` is small.
    fn integrate(&self, mut y: Vec<f64>, opts: &SteadyStateOptions) -> Option<Vec<f64>> {
        const A: [[f64; 6]; 7] = [
            [0.0; 6],
            [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
            [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
            [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
            [
                19372.0 / 6561.0,
                -25360.0 / 2187.0,
                64448.0 / 6561.0,
                -212.0 / 729.0,
                0.0,
                0.0,
            ],
            [
                9017.0 / 3168.0,
                -355.0 / 33.0,
                46732.0 / 5247.0,
                49.0 / 176.0,
                -5103.0 / 18656.0,
                0.0,
            ],
            [
                35.0 / 384.0,
                0.0,
                500.0 / 1113.0,
                125.0 / 192.0,
                -2187.0 / 6784.0,
                11.0 / 84.0,
            ],
        ];
        const E: [f64; 7] = [
            71.0 / 57600.0,
            0.0,
            -71.0 / 16695.0,
            71.0 / 1920.0,
            -17253.0 / 339200.0,
            22.0 / 525.0,
            -1.0 / 40.0,
        ];
        let n = y.len();
        let (rtol, atol) = (1e-9, 1e-12);
        let mut t = 0.0;
        let mut h = 1e-3;
        let mut k1 = self.rhs(&y);
        let mut steps = 0usize;
        while t < opts.max_integration_time && steps < 5_000_000 {
            steps += 1;
            let (ft, _) = self.thresholds(&y, opts.tol);
            let slack = 1e4 * ft;
            if k1.iter().all(|v| v.abs() < slack) {
                return Some(y);
            }
            let mut k = vec![k1.clone()];
            for s in 1..7 {
                let ys: Vec<f64> = (0..n)
                    .map(|i| y[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>())
                    .collect();
                k.push(self.rhs(&ys.iter().map(|v| v.max(0.0)).collect::<Vec<_>>()));
            }
            let y_new: Vec<f64> = (0..n)
                .map(|i| y[i] + h * (0..6).map(|j| A[6][j] * k[j][i]).sum::<f64>())
                .collect();
            let err = (0..n)
                .map(|i| {
                    let e = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
                    let sc = atol + rtol * y[i].abs().max(y_new[i].abs());
                    (e / sc).powi(2)
                })
                .sum::<f64>()
                / n.max(1) as f64;
            let err = err.sqrt();
            if err <= 1.0 && y_new.iter().all(|&v| v > 0.0) {
                t += h;
                y = y_new;
                k1 = k[6].clone();
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                h *= factor;
            } else {
                h *= if err.is_finite() {
                    (0.9 * err.powf(-0.2)).clamp(0.1, 0.5)
                } else {
                    0.1
                };
            }
            if h < 1e-300 {
                return None;
            }
        }
        None
    }
}

/// The unique positive equilibrium in the compatibility class of `x0`.
/// States that can never be populated from `x0` stay at zero.
pub fn steady_state(crn: &Crn, x0: &[f64], opts: &SteadyStateOptions) -> Result<MeanState> {
    crn.check_dim(x0.len())?;
    if let Some(v) = x0.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Range(format!(
            "initial state entry {v} is not a finite non-negative number"
        )));
    }
    let report_wr = structure::is_weakly_reversible(crn);
    let (deficiency, _) = structure::deficiency(crn);
    if !(report_wr && deficiency == 0) {
        return Err(Error::NotComplexBalanced {
            weakly_reversible: report_wr,
            deficiency,
        });
    }
    let reduced = Reduced::new(crn, x0);
    if reduced.states.is_empty() {
        return Ok(MeanState(vec![0.0; crn.n_states()]));
    }
    let guess: Vec<f64> = reduced
        .states
        .iter()
        .map(|&i| if x0[i] > 0.0 { x0[i] } else { 1e-6 })
        .collect();
    let y = match reduced.newton(guess.clone(), opts) {
        Some(y) => y,
        None => {
            let warm = reduced
                .integrate(guess, opts)
                .ok_or_else(|| Error::NonConvergence("mean-field integration did not settle".into()))?;
            reduced
                .newton(warm, opts)
                .ok_or_else(|| Error::NonConvergence("Newton iteration failed after integration warm start".into()))?
        }
    };
    Ok(MeanState(reduced.expand(&y)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isomerization_splits_evenly() {
        let mut b = Crn::builder();
        let a = b.add_state("a").unwrap();
        let c = b.add_state("b").unwrap();
        b.add_reversible(&[(a, 1)], &[(c, 1)], 1.0, 1.0).unwrap();
        let crn = b.build().unwrap();
        let xbar = steady_state(&crn, &[10.0, 0.0], &SteadyStateOptions::default()).unwrap();
        assert!((xbar[0] - 5.0).abs() < 1e-10 && (xbar[1] - 5.0).abs() < 1e-10);
    }

    #[test]
    fn irreversible_network_is_rejected() {
        let mut b = Crn::builder();
        let a = b.add_state("a").unwrap();
        let c = b.add_state("b").unwrap();
        b.add_reaction(&[(a, 1)], &[(c, 1)], 1.0).unwrap();
        let crn = b.build().unwrap();
        assert!(matches!(
            steady_state(&crn, &[1.0, 0.0], &SteadyStateOptions::default()),
            Err(Error::NotComplexBalanced {
                weakly_reversible: false,
                ..
            })
        ));
    }
}
