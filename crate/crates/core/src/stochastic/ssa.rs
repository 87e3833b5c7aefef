use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::crn::{Crn, PopulationVector};
use crate::error::{Error, Result};

/// Identifier of the generator recorded alongside every seed.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng";

/// Seed of replicate `index` in an ensemble seeded with `seed`.
pub fn replicate_seed(seed: u64, index: u64) -> u64 {
    seed ^ index
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn check(crn: &Crn, x0: &PopulationVector, tau: f64) -> Result<()> {
    crn.check_dim(x0.len())?;
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::Range(format!(
            "snapshot time must be finite and non-negative, got {tau}"
        )));
    }
    Ok(())
}

fn run<R: Rng>(
    crn: &Crn,
    x0: &PopulationVector,
    tau: f64,
    rng: &mut R,
    mut record: Option<&mut Vec<(f64, PopulationVector)>>,
) -> PopulationVector {
    let mut x = x0.clone();
    let mut t = 0.0;
    let mut a = vec![0.0; crn.n_reactions()];
    if let Some(rec) = record.as_deref_mut() {
        rec.push((0.0, x.clone()));
    }
    loop {
        for (l, al) in a.iter_mut().enumerate() {
            *al = crn.reaction_propensity(l, &x);
        }
        let a0: f64 = a.iter().sum();
        if a0 <= 0.0 {
            return x;
        }
        let u: f64 = 1.0 - rng.random::<f64>();
        t += -u.ln() / a0;
        if t > tau {
            return x;
        }
        let target = rng.random::<f64>() * a0;
        let mut acc = 0.0;
        let mut chosen = None;
        for (l, &al) in a.iter().enumerate() {
            if al > 0.0 {
                acc += al;
                chosen = Some(l);
                if target < acc {
                    break;
                }
            }
        }
        let l = chosen.expect("positive total propensity");
        x = crn
            .apply_reaction(&x, l)
            .expect("reaction with positive propensity has its reactants");
        if let Some(rec) = record.as_deref_mut() {
            rec.push((t, x.clone()));
        }
    }
}

/// One exact (Gillespie direct method) draw of `x(τ)`.
pub fn ssa_sample(crn: &Crn, x0: &PopulationVector, tau: f64, seed: u64) -> Result<PopulationVector> {
    check(crn, x0, tau)?;
    Ok(run(crn, x0, tau, &mut rng_from_seed(seed), None))
}

/// Jump times and states of one trajectory up to `τ`, starting with `(0, x0)`.
pub fn ssa_trajectory<R: Rng>(
    crn: &Crn,
    x0: &PopulationVector,
    tau: f64,
    rng: &mut R,
) -> Result<Vec<(f64, PopulationVector)>> {
    check(crn, x0, tau)?;
    let mut rec = Vec::new();
    run(crn, x0, tau, rng, Some(&mut rec));
    Ok(rec)
}

/// `runs` independent draws; replicate `i` uses `replicate_seed(seed, i)`.
pub fn ssa_ensemble(crn: &Crn, x0: &PopulationVector, tau: f64, seed: u64, runs: u64) -> Result<Vec<PopulationVector>> {
    check(crn, x0, tau)?;
    Ok((0..runs)
        .into_par_iter()
        .map(|i| run(crn, x0, tau, &mut rng_from_seed(replicate_seed(seed, i)), None))
        .collect())
}
