//! `crnpriv`: structure, dynamics and privacy leakage of reaction-network
//! models from the command line.

mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crnpriv::experiments::{balanced_tree, select_analysis, sweep, Axis, SweepOptions, TreeRates};
use crnpriv::privacy::{
    initial_state, leakage_snapshot, leakage_steady_identity, observable_distribution, Analysis, LeakageEngine,
    LeakageOptions, StationaryLaw,
};
use crnpriv::stochastic::{
    cme_solve, ssa_ensemble, CmeOptions, FspOptions, Horizon, StationaryMethod, DEFAULT_STATE_CAP, RNG_ALGORITHM,
};
use crnpriv::trees::enumerate_binary_trees;
use crnpriv::{parse_spec, ModelFile, QuerySpec};

use report::{csv_document, json_document, with_manifest_line, RunManifest};

#[derive(Parser)]
#[command(
    name = "crnpriv",
    version,
    about = "Privacy leakage of agent populations modelled as reaction networks"
)]
struct Cli {
    /// Worker threads (defaults to CRNPRIV_THREADS, then the number of CPUs).
    #[arg(long, global = true, env = "CRNPRIV_THREADS")]
    threads: Option<usize>,

    /// Omit the start time and wall-clock duration from the manifest.
    #[arg(long, global = true)]
    no_timestamp: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Structural report: linkage classes, deficiency, conservation laws.
    Analyze { model: PathBuf },
    /// Deterministic mass-action equilibrium from the model's initial state.
    SteadyState {
        model: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Observable distribution at time `--tau` or at steady state (CSV).
    Distribution {
        model: PathBuf,
        #[command(flatten)]
        horizon: HorizonArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Observe the full population vector instead of the model's query.
        #[arg(long)]
        identity: bool,
    },
    /// Differential-privacy leakage of the model's observable (JSON).
    Leakage {
        model: PathBuf,
        #[command(flatten)]
        horizon: HorizonArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = crnpriv::privacy::DEFAULT_NU)]
        nu: f64,
        /// Use the master equation even where the closed form applies.
        #[arg(long)]
        force_cme: bool,
        /// Observe the full population vector instead of the model's query.
        #[arg(long)]
        identity: bool,
        /// Reading of the product-Poisson law on a finite class (closed form
        /// only; identity leakage defaults to unnormalized, queries to
        /// renormalized).
        #[arg(long, value_enum)]
        law: Option<LawArg>,
    },
    /// Empirical observable histogram from seeded stochastic simulation (CSV).
    Simulate {
        model: PathBuf,
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value_t = 10_000)]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Leakage over a grid of populations and rate groups (CSV and JSON).
    Sweep {
        model: PathBuf,
        /// `pop:TYPE=LO..HI[:STEP]`, `rate:R1,R2,…=LO..HI:STEP` (1-based
        /// reactions) or an explicit value list after `=`, e.g. `pop:2=4,8,12`.
        #[arg(long = "axis", required = true)]
        axes: Vec<String>,
        #[command(flatten)]
        horizon: HorizonArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = crnpriv::privacy::DEFAULT_NU)]
        nu: f64,
        #[arg(long)]
        force_cme: bool,
        #[arg(long, value_enum, default_value_t = LawArg::Renormalized)]
        law: LawArg,
        /// Writes `PREFIX.csv` and `PREFIX.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Leakage of collaboration trees (CSV, one row per tree).
    Trees {
        #[arg(long)]
        leaves: usize,
        /// Draw forward rates uniformly from [0.1, 2] for one balanced shape.
        #[arg(long)]
        random_rates: bool,
        #[arg(long, default_value_t = 200)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        per_type: u64,
        #[arg(long, default_value_t = crnpriv::privacy::DEFAULT_NU)]
        nu: f64,
        #[arg(long, value_enum, default_value_t = LawArg::Renormalized)]
        law: LawArg,
        /// List shapes and depths only.
        #[arg(long)]
        shapes_only: bool,
    },
}

#[derive(Args)]
struct HorizonArgs {
    /// Snapshot time.
    #[arg(long, conflicts_with = "steady")]
    tau: Option<f64>,
    /// Stationary distribution (the default).
    #[arg(long)]
    steady: bool,
}

impl HorizonArgs {
    fn horizon(&self) -> Horizon {
        self.tau.map_or(Horizon::Steady, Horizon::Time)
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    state_cap: usize,
    /// Transient error tolerance.
    #[arg(long, default_value_t = 1e-9)]
    cme_tol: f64,
    /// Enable finite state projection with this pruning threshold.
    #[arg(long)]
    fsp_threshold: Option<f64>,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    stationary: MethodArg,
}

impl SolverArgs {
    fn cme(&self) -> CmeOptions {
        CmeOptions {
            tol: self.cme_tol,
            state_cap: self.state_cap,
            fsp: self.fsp_threshold.map(|threshold| FspOptions {
                threshold,
                ..Default::default()
            }),
        }
    }

    fn record(&self, m: &mut RunManifest) {
        m.set("state_cap", self.state_cap);
        m.set("cme_tol", self.cme_tol);
        m.set("fsp_threshold", self.fsp_threshold);
        m.set("stationary_solver", self.stationary.method().name());
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LawArg {
    Renormalized,
    Unnormalized,
}

impl LawArg {
    fn law(self) -> StationaryLaw {
        match self {
            LawArg::Renormalized => StationaryLaw::Renormalized,
            LawArg::Unnormalized => StationaryLaw::Unnormalized,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Dense,
    Iterative,
}

impl MethodArg {
    fn method(self) -> StationaryMethod {
        match self {
            MethodArg::Auto => StationaryMethod::Auto,
            MethodArg::Dense => StationaryMethod::Dense,
            MethodArg::Iterative => StationaryMethod::Iterative,
        }
    }
}

fn load(path: &Path, manifest: &mut RunManifest) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    manifest.model(path, &text);
    let model = parse_spec(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(model)
}

fn leakage_options(nu: f64, solver: &SolverArgs) -> LeakageOptions {
    LeakageOptions {
        nu,
        cme: solver.cme(),
        stationary_method: solver.stationary.method(),
        ..Default::default()
    }
}

fn horizon_name(h: Horizon) -> serde_json::Value {
    serde_json::to_value(h).expect("horizon serializes")
}

fn run(cli: Cli, argv: Vec<String>) -> Result<String> {
    let stamp = !cli.no_timestamp;
    match cli.command {
        Command::Analyze { model } => {
            let mut m = RunManifest::new("analyze", argv, stamp);
            let file = load(&model, &mut m)?;
            let report = crnpriv::structure::analyze(&file.crn);
            let mut value = serde_json::to_value(&report)?;
            value["n_linkage_classes"] = json!(report.n_linkage_classes());
            value["states"] = json!(file.crn.states().iter().map(|s| s.label()).collect::<Vec<_>>());
            m.finish();
            json_document(&m, value)
        }
        Command::SteadyState { model, tol } => {
            let mut m = RunManifest::new("steady-state", argv, stamp);
            let file = load(&model, &mut m)?;
            m.set("tol", tol);
            let x0 = initial_state(&file.composition, &file.crn)?;
            let x0f: Vec<f64> = x0.iter().map(|&v| v as f64).collect();
            let opts = crnpriv::deterministic::SteadyStateOptions {
                tol,
                ..Default::default()
            };
            let xbar = crnpriv::deterministic::steady_state(&file.crn, &x0f, &opts)?;
            m.finish();
            json_document(
                &m,
                json!({
                    "states": file.crn.states().iter().map(|s| s.label()).collect::<Vec<_>>(),
                    "x0": x0.0,
                    "mean": xbar.0,
                }),
            )
        }
        Command::Distribution {
            model,
            horizon,
            solver,
            identity,
        } => {
            let mut m = RunManifest::new("distribution", argv, stamp);
            let file = load(&model, &mut m)?;
            let h = horizon.horizon();
            m.set("horizon", horizon_name(h));
            solver.record(&mut m);
            let q = if identity {
                QuerySpec::identity(&file.crn)
            } else {
                file.query.clone()
            };
            let x0 = initial_state(&file.composition, &file.crn)?;
            let pi = match h {
                Horizon::Time(tau) => cme_solve(&file.crn, &x0, tau, &solver.cme())?,
                Horizon::Steady => {
                    let space = crnpriv::stochastic::reachable_states_capped(&file.crn, &x0, solver.state_cap)?;
                    let gen = crnpriv::stochastic::Generator::new(&file.crn, &space);
                    let probs = crnpriv::stochastic::stationary_distribution_with(&gen, solver.stationary.method())?;
                    crnpriv::stochastic::DistributionTable {
                        space: std::sync::Arc::new(space),
                        probs,
                        horizon: Horizon::Steady,
                        pruned_mass: 0.0,
                    }
                }
            };
            m.set("states", pi.len());
            m.set("pruned_mass", pi.pruned_mass);
            let obs = observable_distribution(&pi, &q);
            let mut header: Vec<String> = q.groups().iter().map(|g| g.name.clone()).collect();
            header.push("probability".into());
            let rows: Vec<Vec<String>> = obs
                .iter()
                .map(|(y, p)| {
                    let mut row: Vec<String> = y.iter().map(u32::to_string).collect();
                    row.push(report::format_float(*p));
                    row
                })
                .collect();
            m.finish();
            csv_document(&m, &header, &rows)
        }
        Command::Leakage {
            model,
            horizon,
            solver,
            nu,
            force_cme,
            identity,
            law,
        } => {
            let mut m = RunManifest::new("leakage", argv, stamp);
            let file = load(&model, &mut m)?;
            let h = horizon.horizon();
            m.set("horizon", horizon_name(h));
            m.set("nu", nu);
            m.set("force_cme", force_cme);
            solver.record(&mut m);
            let opts = leakage_options(nu, &solver);
            let q = if identity {
                QuerySpec::identity(&file.crn)
            } else {
                file.query.clone()
            };
            let sweep_opts = SweepOptions {
                leakage: opts,
                law: law.map_or(StationaryLaw::Renormalized, LawArg::law),
                horizon: h,
                force_cme,
            };
            let report = match select_analysis(&file.crn, &sweep_opts) {
                Analysis::SteadyClosedForm(_) if identity => {
                    let law = law.map_or(StationaryLaw::Unnormalized, LawArg::law);
                    leakage_steady_identity(&file.crn, &file.composition, law, &opts)?
                }
                Analysis::SteadyClosedForm(law) => {
                    LeakageEngine::new(&file.crn, q, Analysis::SteadyClosedForm(law), opts)?
                        .leakage(&file.composition)?
                }
                Analysis::Snapshot(h) => leakage_snapshot(&file.crn, &file.composition, &q, h, &opts)?,
            };
            m.set("method", report.method);
            m.set("law", report.law);
            m.finish();
            json_document(&m, &report)
        }
        Command::Simulate { model, tau, runs, seed } => {
            let mut m = RunManifest::new("simulate", argv, stamp);
            let file = load(&model, &mut m)?;
            m.set("tau", tau);
            m.set("runs", runs);
            m.set("seed", seed);
            m.set("rng", RNG_ALGORITHM);
            m.set("replicate_seed", "seed XOR replicate index");
            if runs == 0 {
                bail!(crnpriv::Error::Range("at least one run is required".into()));
            }
            let x0 = initial_state(&file.composition, &file.crn)?;
            let samples = ssa_ensemble(&file.crn, &x0, tau, seed, runs)?;
            let mut counts: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
            for x in &samples {
                *counts.entry(file.query.evaluate(x)).or_insert(0) += 1;
            }
            let mut header: Vec<String> = file.query.groups().iter().map(|g| g.name.clone()).collect();
            header.extend(["count".to_string(), "frequency".to_string()]);
            let rows: Vec<Vec<String>> = counts
                .iter()
                .map(|(y, &c)| {
                    let mut row: Vec<String> = y.iter().map(u32::to_string).collect();
                    row.push(c.to_string());
                    row.push(report::format_float(c as f64 / runs as f64));
                    row
                })
                .collect();
            m.finish();
            csv_document(&m, &header, &rows)
        }
        Command::Sweep {
            model,
            axes,
            horizon,
            solver,
            nu,
            force_cme,
            law,
            out,
        } => {
            let mut m = RunManifest::new("sweep", argv, stamp);
            let file = load(&model, &mut m)?;
            let axes: Vec<Axis> = axes.iter().map(|a| parse_axis(a)).collect::<Result<_>>()?;
            let opts = SweepOptions {
                leakage: leakage_options(nu, &solver),
                law: law.law(),
                horizon: horizon.horizon(),
                force_cme,
            };
            m.set("nu", nu);
            m.set("horizon", horizon_name(opts.horizon));
            m.set("force_cme", force_cme);
            solver.record(&mut m);
            let result = sweep(&file, &axes, &opts)?;
            m.set("method", result.method);
            m.set("law", result.law);
            m.set("failed_cells", result.failures());
            m.finish();
            let mut csv = Vec::new();
            result.write_csv(&mut csv)?;
            let csv_path = out.with_extension("csv");
            let json_path = out.with_extension("json");
            let csv_text = with_manifest_line(&m, csv)?;
            let json_text = json_document(&m, &result)?;
            std::fs::write(&csv_path, csv_text).with_context(|| format!("writing {}", csv_path.display()))?;
            std::fs::write(&json_path, &json_text).with_context(|| format!("writing {}", json_path.display()))?;
            Ok(json_text)
        }
        Command::Trees {
            leaves,
            random_rates,
            draws,
            seed,
            per_type,
            nu,
            law,
            shapes_only,
        } => {
            let mut m = RunManifest::new("trees", argv, stamp);
            m.set("leaves", leaves);
            if shapes_only {
                let shapes = enumerate_binary_trees(leaves)?;
                let rows: Vec<Vec<String>> = shapes
                    .iter()
                    .enumerate()
                    .map(|(i, s)| vec![i.to_string(), s.to_string(), s.depth().to_string()])
                    .collect();
                m.finish();
                let header = ["index", "shape", "depth"].map(String::from);
                return csv_document(&m, &header, &rows);
            }
            let rates = if random_rates {
                m.set("rates", "random_uniform");
                m.set("draws", draws);
                m.set("seed", seed);
                m.set("rng", RNG_ALGORITHM);
                TreeRates::RandomUniform {
                    shape: balanced_tree(leaves),
                    draws,
                }
            } else {
                m.set("rates", "fixed_unit");
                TreeRates::FixedUnit
            };
            m.set("per_type", per_type);
            m.set("nu", nu);
            m.set("law", law.law());
            let opts = LeakageOptions {
                nu,
                ..Default::default()
            };
            let result = crnpriv::experiments::tree_sweep(leaves, &rates, seed, per_type, law.law(), &opts)?;
            if result.records.len() >= 2 {
                m.set("pearson_depth", result.depth_correlation().ok());
                m.set("pearson_avg_group_size", result.group_size_correlation().ok());
            }
            m.finish();
            let mut csv = Vec::new();
            result.write_csv(&mut csv)?;
            with_manifest_line(&m, csv)
        }
    }
}

/// `pop:TYPE=SPEC` or `rate:R1,R2=SPEC` with SPEC `LO..HI[:STEP]` or `V1,V2,…`.
fn parse_axis(text: &str) -> Result<Axis> {
    let (kind, rest) = text
        .split_once(':')
        .ok_or_else(|| anyhow!("axis `{text}`: expected `pop:…` or `rate:…`"))?;
    let (target, spec) = rest
        .split_once('=')
        .ok_or_else(|| anyhow!("axis `{text}`: expected `=` before the values"))?;
    let values = parse_values(spec).with_context(|| format!("axis `{text}`"))?;
    match kind {
        "pop" => {
            let counts = values
                .iter()
                .map(|&v| {
                    if v >= 0.0 && v.fract() == 0.0 {
                        Ok(v as u64)
                    } else {
                        Err(anyhow!("axis `{text}`: population {v} is not a non-negative integer"))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Axis::population(target, counts))
        }
        "rate" => {
            let reactions = target
                .split(',')
                .map(|r| {
                    r.trim()
                        .parse::<usize>()
                        .map_err(|_| anyhow!("axis `{text}`: bad reaction index `{r}`"))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Axis::rate_group(&reactions, values))
        }
        other => bail!("axis `{text}`: unknown axis kind `{other}`"),
    }
}

fn parse_values(spec: &str) -> Result<Vec<f64>> {
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| anyhow!("bad number `{s}`"));
    if let Some((lo, rest)) = spec.split_once("..") {
        let (hi, step) = match rest.split_once(':') {
            Some((hi, step)) => (num(hi)?, num(step)?),
            None => (num(rest)?, 1.0),
        };
        let lo = num(lo)?;
        if !(step > 0.0) || hi < lo {
            bail!("range {spec} is empty or has a non-positive step");
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        // round to the step's decimal grid so 0.2 + 4·0.4 prints as 1.8
        let values = (0..=n).map(|i| {
            let v = lo + i as f64 * step;
            (v * 1e9).round() / 1e9
        });
        return Ok(values.collect());
    }
    spec.split(',').map(num).collect()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<crnpriv::Error>() {
        Some(crnpriv::Error::ExplosionGuard { .. }) => 3,
        Some(e) if e.is_input_error() => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli, argv) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
