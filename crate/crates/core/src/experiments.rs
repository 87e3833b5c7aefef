//! Parameter sweeps over populations, rate groups and tree topologies, and
//! the summary statistics used to read them.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::crn::{Composition, Crn, QuerySpec};
use crate::error::{Error, Result};
use crate::parser::ModelFile;
use crate::privacy::{
    Analysis, LeakageEngine, LeakageMethod, LeakageOptions, LeakageReport, ObservableDistribution, StationaryLaw,
};
use crate::stochastic::{rng_from_seed, Horizon, RNG_ALGORITHM};
use crate::structure;
use crate::trees::{enumerate_binary_trees, tree_model, CollabTree, TreeShape};

/// `Σ_y π_y (Σᵢ i·yᵢ)/(Σᵢ yᵢ)` for a query whose group `i` (1-based) counts
/// groups of size `i`. Observations with no groups are excluded from the
/// normalizer.
pub fn average_aggregate_size(pi_y: &ObservableDistribution, q: &QuerySpec) -> f64 {
    let mut weighted = 0.0;
    let mut mass = 0.0;
    for (y, &p) in pi_y {
        let groups: u64 = y.iter().take(q.len()).map(|&v| v as u64).sum();
        if groups == 0 {
            continue;
        }
        let size: u64 = y.iter().enumerate().map(|(i, &v)| (i as u64 + 1) * v as u64).sum();
        weighted += p * size as f64 / groups as f64;
        mass += p;
    }
    if mass > 0.0 {
        weighted / mass
    } else {
        0.0
    }
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::DegenerateInput("correlation needs at least two points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput("correlation of a constant series".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// What a sweep axis varies.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AxisKind {
    /// Agent count of one type.
    Population { type_name: String },
    /// Common rate constant of a group of reactions (1-based indices).
    RateGroup { reactions: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Axis {
    pub name: String,
    #[serde(flatten)]
    pub kind: AxisKind,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn population(type_name: &str, counts: impl IntoIterator<Item = u64>) -> Axis {
        Axis {
            name: format!("N[{type_name}]"),
            kind: AxisKind::Population {
                type_name: type_name.to_owned(),
            },
            values: counts.into_iter().map(|c| c as f64).collect(),
        }
    }

    pub fn rate_group(reactions: &[usize], values: impl IntoIterator<Item = f64>) -> Axis {
        let list: Vec<String> = reactions.iter().map(usize::to_string).collect();
        Axis {
            name: format!("k[{}]", list.join(",")),
            kind: AxisKind::RateGroup {
                reactions: reactions.to_vec(),
            },
            values: values.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub coords: Vec<f64>,
    pub epsilon: Option<f64>,
    pub error: Option<String>,
    pub argmax_variant: Option<Vec<u64>>,
    pub argmax_observation: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub axes: Vec<Axis>,
    /// Row-major over the axes: the last axis varies fastest.
    pub cells: Vec<SweepCell>,
    pub method: LeakageMethod,
    pub law: Option<StationaryLaw>,
    pub nu: f64,
    pub horizon: Horizon,
}

impl SweepResult {
    pub fn values(&self) -> Vec<Option<f64>> {
        self.cells.iter().map(|c| c.epsilon).collect()
    }

    /// First cell with the smallest ε, skipping failed cells.
    pub fn argmin(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in self.cells.iter().enumerate() {
            if let Some(e) = c.epsilon {
                if best.is_none_or(|(_, b)| e < b) {
                    best = Some((i, e));
                }
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = self.axes.iter().map(|a| a.name.clone()).collect();
        header.extend(["epsilon", "error", "argmax_variant", "argmax_observation"].map(String::from));
        w.write_record(&header).map_err(csv_error)?;
        let join = |v: &[String]| v.join(" ");
        for c in &self.cells {
            let mut row: Vec<String> = c.coords.iter().map(|v| v.to_string()).collect();
            row.push(c.epsilon.map(format_real).unwrap_or_default());
            row.push(c.error.clone().unwrap_or_default());
            row.push(
                c.argmax_variant
                    .as_ref()
                    .map(|v| join(&v.iter().map(u64::to_string).collect::<Vec<_>>()))
                    .unwrap_or_default(),
            );
            row.push(
                c.argmax_observation
                    .as_ref()
                    .map(|v| join(&v.iter().map(u32::to_string).collect::<Vec<_>>()))
                    .unwrap_or_default(),
            );
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush().map_err(|e| Error::Range(format!("write failed: {e}")))?;
        Ok(())
    }
}

/// Shortest representation that round-trips to the same `f64`.
pub fn format_real(v: f64) -> String {
    format!("{v:?}")
}

fn csv_error(e: csv::Error) -> Error {
    Error::Range(format!("CSV write failed: {e}"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub leakage: LeakageOptions,
    pub law: StationaryLaw,
    pub horizon: Horizon,
    /// Use the master equation even where the closed form applies.
    pub force_cme: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            leakage: LeakageOptions::default(),
            law: StationaryLaw::Renormalized,
            horizon: Horizon::Steady,
            force_cme: false,
        }
    }
}

/// Closed form when the network is complex-balanced and the horizon is the
/// steady state, master equation otherwise.
pub fn select_analysis(crn: &Crn, opts: &SweepOptions) -> Analysis {
    let closed_form = opts.horizon == Horizon::Steady
        && !opts.force_cme
        && structure::is_weakly_reversible(crn)
        && structure::deficiency(crn).0 == 0;
    if closed_form {
        Analysis::SteadyClosedForm(opts.law)
    } else {
        Analysis::Snapshot(opts.horizon)
    }
}

fn grid(axes: &[Axis]) -> Vec<Vec<f64>> {
    let mut cells = vec![Vec::new()];
    for axis in axes {
        cells = cells
            .into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |&v| {
                    let mut c = prefix.clone();
                    c.push(v);
                    c
                })
            })
            .collect();
    }
    cells
}

fn check_axes(model: &ModelFile, axes: &[Axis]) -> Result<()> {
    for axis in axes {
        if axis.values.is_empty() {
            return Err(Error::validation(format!("axis {} has no values", axis.name)));
        }
        match &axis.kind {
            AxisKind::Population { type_name } => {
                if !model.composition.type_counts.contains_key(type_name) {
                    return Err(Error::validation(format!("unknown type `{type_name}` in sweep axis")));
                }
                if let Some(v) = axis.values.iter().find(|v| !(v.fract() == 0.0 && **v >= 0.0)) {
                    return Err(Error::Range(format!("population {v} is not a non-negative integer")));
                }
            }
            AxisKind::RateGroup { reactions } => {
                if let Some(r) = reactions.iter().find(|&&r| r == 0 || r > model.crn.n_reactions()) {
                    return Err(Error::validation(format!(
                        "reaction {r} out of range 1..={}",
                        model.crn.n_reactions()
                    )));
                }
                if let Some(v) = axis.values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                    return Err(Error::Range(format!("rate {v} is not positive")));
                }
            }
        }
    }
    Ok(())
}

fn cell_setup(model: &ModelFile, axes: &[Axis], coords: &[f64]) -> Result<(Option<Crn>, Composition)> {
    let mut db = model.composition.clone();
    let mut rates: Option<Vec<f64>> = None;
    for (axis, &v) in axes.iter().zip(coords) {
        match &axis.kind {
            AxisKind::Population { type_name } => db = db.with_count(type_name, v as u64),
            AxisKind::RateGroup { reactions } => {
                let r = rates.get_or_insert_with(|| model.crn.rates());
                for &l in reactions {
                    r[l - 1] = v;
                }
            }
        }
    }
    let crn = rates.map(|r| model.crn.with_rates(&r)).transpose()?;
    Ok((crn, db))
}

fn cell_from(coords: Vec<f64>, outcome: Result<LeakageReport>) -> SweepCell {
    match outcome {
        Ok(r) => {
            let best = r.argmax();
            SweepCell {
                coords,
                epsilon: Some(r.epsilon),
                error: None,
                argmax_variant: best.map(|a| a.variant.counts()),
                argmax_observation: best.map(|a| a.observation.clone()),
            }
        }
        Err(e) => SweepCell {
            coords,
            epsilon: None,
            error: Some(e.to_string()),
            argmax_variant: None,
            argmax_observation: None,
        },
    }
}

/// Leakage of the model's query at every point of the grid spanned by `axes`.
/// Cells that fail are kept and carry the error message.
pub fn sweep(model: &ModelFile, axes: &[Axis], opts: &SweepOptions) -> Result<SweepResult> {
    check_axes(model, axes)?;
    let analysis = select_analysis(&model.crn, opts);
    let shared = LeakageEngine::new(&model.crn, model.query.clone(), analysis, opts.leakage)?;
    let cells: Vec<SweepCell> = grid(axes)
        .into_par_iter()
        .map(|coords| {
            let outcome = cell_setup(model, axes, &coords).and_then(|(crn, db)| match crn {
                None => shared.leakage(&db),
                Some(crn) => LeakageEngine::new(&crn, model.query.clone(), analysis, opts.leakage)?.leakage(&db),
            });
            cell_from(coords, outcome)
        })
        .collect();
    let (law, horizon) = match analysis {
        Analysis::SteadyClosedForm(law) => (Some(law), Horizon::Steady),
        Analysis::Snapshot(h) => (None, h),
    };
    Ok(SweepResult {
        axes: axes.to_vec(),
        cells,
        method: shared.method(),
        law,
        nu: opts.leakage.nu,
        horizon,
    })
}

/// Two-dimensional grid over the counts of two types, all others fixed.
pub fn population_sweep(
    model: &ModelFile,
    type_a: &str,
    type_b: &str,
    range_a: &[u64],
    range_b: &[u64],
    opts: &SweepOptions,
) -> Result<SweepResult> {
    let axes = [
        Axis::population(type_a, range_a.iter().copied()),
        Axis::population(type_b, range_b.iter().copied()),
    ];
    sweep(model, &axes, opts)
}

/// Two-dimensional grid over two groups of rate constants (1-based reaction
/// indices), populations fixed.
pub fn rate_sweep(
    model: &ModelFile,
    group_a: &[usize],
    group_b: &[usize],
    range_a: &[f64],
    range_b: &[f64],
    opts: &SweepOptions,
) -> Result<SweepResult> {
    let axes = [
        Axis::rate_group(group_a, range_a.iter().copied()),
        Axis::rate_group(group_b, range_b.iter().copied()),
    ];
    sweep(model, &axes, opts)
}

pub const RANDOM_RATE_RANGE: (f64, f64) = (0.1, 2.0);

#[derive(Debug, Clone, PartialEq)]
pub enum TreeRates {
    /// Every shape with `n` leaves, all rates 1.
    FixedUnit,
    /// One shape, `draws` times; forward rates uniform in
    /// [`RANDOM_RATE_RANGE`], backward rates 1.
    RandomUniform { shape: TreeShape, draws: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeRecord {
    pub index: usize,
    pub shape: String,
    pub depth: usize,
    pub avg_group_size: f64,
    pub epsilon: f64,
    /// Forward rates in post-order of the internal nodes.
    pub forward_rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeSweep {
    pub n_leaves: usize,
    pub per_type: u64,
    pub seed: Option<u64>,
    pub rng: Option<&'static str>,
    pub law: StationaryLaw,
    pub nu: f64,
    pub records: Vec<TreeRecord>,
}

impl TreeSweep {
    pub fn depth_correlation(&self) -> Result<f64> {
        let d: Vec<f64> = self.records.iter().map(|r| r.depth as f64).collect();
        pearson(&d, &self.epsilons())
    }

    pub fn group_size_correlation(&self) -> Result<f64> {
        let s: Vec<f64> = self.records.iter().map(|r| r.avg_group_size).collect();
        pearson(&s, &self.epsilons())
    }

    fn epsilons(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.epsilon).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "shape", "depth", "avg_group_size", "epsilon", "forward_rates"])
            .map_err(csv_error)?;
        for r in &self.records {
            let rates: Vec<String> = r.forward_rates.iter().map(|&v| format_real(v)).collect();
            w.write_record([
                r.index.to_string(),
                r.shape.clone(),
                r.depth.to_string(),
                format_real(r.avg_group_size),
                format_real(r.epsilon),
                rates.join(" "),
            ])
            .map_err(csv_error)?;
        }
        w.flush().map_err(|e| Error::Range(format!("write failed: {e}")))?;
        Ok(())
    }
}

/// Balanced shape: the two subtrees of every node differ by at most one leaf.
pub fn balanced_tree(n_leaves: usize) -> TreeShape {
    if n_leaves <= 1 {
        TreeShape::Leaf
    } else {
        TreeShape::join(balanced_tree(n_leaves / 2), balanced_tree(n_leaves - n_leaves / 2))
    }
}

/// Steady-state leakage of the group-size query for a family of trees, with
/// `per_type` agents of every type. Random rates are drawn from one stream
/// seeded with `seed`, tree by tree and node by node in post-order.
pub fn tree_sweep(
    n_leaves: usize,
    rates: &TreeRates,
    seed: u64,
    per_type: u64,
    law: StationaryLaw,
    opts: &LeakageOptions,
) -> Result<TreeSweep> {
    let trees: Vec<CollabTree> = match rates {
        TreeRates::FixedUnit => enumerate_binary_trees(n_leaves)?
            .into_iter()
            .map(CollabTree::with_unit_rates)
            .collect(),
        TreeRates::RandomUniform { shape, draws } => {
            if shape.leaves() != n_leaves {
                return Err(Error::DimensionMismatch {
                    expected: n_leaves,
                    found: shape.leaves(),
                });
            }
            let mut rng = rng_from_seed(seed);
            let (lo, hi) = RANDOM_RATE_RANGE;
            (0..*draws)
                .map(|_| CollabTree {
                    shape: shape.clone(),
                    rates: (0..shape.internal_nodes())
                        .map(|_| (rng.random_range(lo..=hi), 1.0))
                        .collect(),
                })
                .collect()
        }
    };
    let records = trees
        .par_iter()
        .enumerate()
        .map(|(index, tree)| {
            let model = tree_model(tree, per_type)?;
            let engine = LeakageEngine::new(&model.crn, model.query.clone(), Analysis::SteadyClosedForm(law), *opts)?;
            let report = engine.leakage(&model.composition)?;
            let pi_y = engine.observable(&model.composition)?;
            Ok(TreeRecord {
                index,
                shape: tree.shape.to_string(),
                depth: tree.depth(),
                avg_group_size: average_aggregate_size(&pi_y, &model.query),
                epsilon: report.epsilon,
                forward_rates: tree.rates.iter().map(|r| r.0).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let random = matches!(rates, TreeRates::RandomUniform { .. });
    Ok(TreeSweep {
        n_leaves,
        per_type,
        seed: random.then_some(seed),
        rng: random.then_some(RNG_ALGORITHM),
        law,
        nu: opts.nu,
        records,
    })
}

/// `P(𝒟 | y) = π_𝒟(y) / (π_𝒟(y) + π_𝒟′(y))` for two equally likely
/// compositions observed at the master-equation steady state.
pub fn steady_posterior(crn: &Crn, q: &QuerySpec, db: &Composition, other: &Composition, y: &[u32]) -> Result<f64> {
    let engine = LeakageEngine::new(
        crn,
        q.clone(),
        Analysis::Snapshot(Horizon::Steady),
        LeakageOptions::default(),
    )?;
    let p = engine.observable(db)?.get(y).copied().unwrap_or(0.0);
    let p_other = engine.observable(other)?.get(y).copied().unwrap_or(0.0);
    if p + p_other == 0.0 {
        return Err(Error::DegenerateInput(format!(
            "observation {y:?} is impossible under both compositions"
        )));
    }
    Ok(p / (p + p_other))
}
