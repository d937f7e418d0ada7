//! Command implementations behind the `mdtk` binary.
//!
//! Exit codes: 0 success, 1 I/O failure or a failed `oracle-check`, 2 invalid input,
//! 3 problem size beyond the supported enumeration limits.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use mdtk_core::applications::kruns::{build_kruns_with, KRunsSpec, SigmaMethod};
use mdtk_core::applications::subgraph::{build_subgraph, SubgraphSpec};
use mdtk_core::applications::ustat::{build_ustat, UStatKernel, UStatSpec};
use mdtk_core::deps::{build_dependency, structural_params, StructuralParams};
use mdtk_core::mc::{estimate_tails, relative_error_table, ExperimentConfig, Sampler, RNG_ID};
use mdtk_core::model::{parse_model_json, BaseVariable, LocalStatisticModel};
use mdtk_core::moments::{
    exact_gamma_cost, gamma_exact, kruns_gamma_analytic, moments_exact, moments_mc, MomentMethod, MomentSummary,
};
use mdtk_core::report::{self, Field, Record, REFERENCE_GRID, REFERENCE_PROVENANCE};
use mdtk_core::tails::{
    kruns_params, kruns_x_max, subgraph_bound, theorem1_bound, ustat_params, BoundConstants, Pattern,
    TailApproxKind,
};
use mdtk_core::validation::run_oracle_suite;
use mdtk_core::Error;

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const TABLE1_REPS: u64 = 1_000_000;
pub const DEFAULT_REPS: u64 = 100_000;

/// Largest enumeration workload (joint configurations) for an exact third moment.
pub const EXACT_GAMMA_BUDGET: u64 = 200_000_000;

const MOMENT_SEED_SALT: u64 = 0x006d_6f6d_656e_7473;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Usage(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("oracle cross-check failed")]
    SuiteFailed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_unsupported_size() => 3,
            CliError::Core(_) | CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::SuiteFailed => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "mdtk", version, about = "Skewness-corrected tail approximations for local statistics")]
pub struct Cli {
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Monte Carlo replications (table1 defaults to 10^6, other runs to 10^5).
    #[arg(long, global = true)]
    pub reps: Option<u64>,
    /// Worker lanes; defaults to the available parallelism.
    #[arg(long, global = true, env = "MDTK_DEFAULT_LANES")]
    pub lanes: Option<usize>,
    /// Output file; a `<output>.manifest.json` sidecar is written next to it.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SigmaChoice {
    Auto,
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MomentChoice {
    Auto,
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TailKind {
    Normal,
    Skew,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Theorem1,
    Kruns,
    Ustat,
    Subgraph,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Circular 2-runs with n = 1500, p = 0.25 against the reference relative errors.
    Table1 {
        #[arg(long, value_delimiter = ',')]
        x: Option<Vec<f64>>,
    },
    /// Circular k-runs experiment.
    Kruns {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        x: Vec<f64>,
        /// How sigma is obtained when k > 2 (k = 2 has a closed form).
        #[arg(long, value_enum, default_value_t = SigmaChoice::Auto)]
        sigma: SigmaChoice,
        #[arg(long = "C", default_value_t = 1.0)]
        c: f64,
        #[arg(long = "C0", default_value_t = 1.0)]
        c0: f64,
    },
    /// Non-degenerate U-statistic experiment.
    Ustat {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        s: usize,
        /// product | product-linear
        #[arg(long, default_value = "product")]
        kernel: String,
        /// rademacher | bernoulli:<p>
        #[arg(long, default_value = "rademacher")]
        base: String,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        x: Vec<f64>,
        #[arg(long = "C", default_value_t = 1.0)]
        c: f64,
        #[arg(long = "C0", default_value_t = 1.0)]
        c0: f64,
    },
    /// Subgraph counts in G(N, p).
    Subgraph {
        #[arg(long = "N")]
        n_vertices: usize,
        #[arg(long)]
        p: f64,
        /// edge | triangle | path:<L> | custom:<edge-list-file>
        #[arg(long)]
        pattern: String,
        /// Require the exact third moment; falls back to Monte Carlo with a warning.
        #[arg(long)]
        exact_moments: bool,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        x: Vec<f64>,
        #[arg(long = "C", default_value_t = 1.0)]
        c: f64,
        #[arg(long = "C0", default_value_t = 1.0)]
        c0: f64,
    },
    /// Moments and structural parameters of a model file.
    Moments {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = MomentChoice::Auto)]
        method: MomentChoice,
    },
    /// Tail approximations at given points.
    Tails {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        gamma: f64,
        #[arg(long, value_enum, default_value_t = TailKind::Skew)]
        kind: TailKind,
        /// Same as `--format json`.
        #[arg(long)]
        json: bool,
    },
    /// Relative-error bounds and range endpoints.
    Bounds {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        x: Vec<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        d: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        kernel: Option<String>,
        #[arg(long)]
        base: Option<String>,
        #[arg(long = "N")]
        n_vertices: Option<usize>,
        #[arg(long)]
        pattern: Option<String>,
        #[arg(long = "C", default_value_t = 1.0)]
        c: f64,
        #[arg(long = "C0", default_value_t = 1.0)]
        c0: f64,
    },
    /// Cross-checks exact moments, tails and the sampler against brute-force enumeration.
    OracleCheck {
        #[arg(long, default_value_t = 50)]
        models: usize,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Table1 { .. } => "table1",
            Command::Kruns { .. } => "kruns",
            Command::Ustat { .. } => "ustat",
            Command::Subgraph { .. } => "subgraph",
            Command::Moments { .. } => "moments",
            Command::Tails { .. } => "tails",
            Command::Bounds { .. } => "bounds",
            Command::OracleCheck { .. } => "oracle-check",
        }
    }
}

/// Rendered output plus the run-specific part of the manifest.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub body: String,
    pub results: Value,
    pub warnings: Vec<String>,
    /// Set when the command ran but its checks failed.
    pub failed: bool,
}

fn default_lanes() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn render(records: &[Record], format: Format) -> String {
    match format {
        Format::Csv => report::to_csv(records),
        Format::Json => report::to_json(records),
    }
}

fn check_grid(x: &[f64]) -> CliResult<()> {
    if x.is_empty() {
        return Err(CliError::Usage("--x needs at least one value".into()));
    }
    Ok(())
}

pub fn parse_base(text: &str) -> CliResult<BaseVariable> {
    let base = match text.split_once(':') {
        None if text == "rademacher" => BaseVariable::Rademacher,
        Some(("bernoulli", p)) => BaseVariable::Bernoulli {
            p: p.parse().map_err(|_| CliError::Usage(format!("bad probability in '{text}'")))?,
        },
        _ => return Err(CliError::Usage(format!("unknown base '{text}' (rademacher | bernoulli:<p>)"))),
    };
    base.validate()?;
    Ok(base)
}

pub fn parse_pattern(text: &str) -> CliResult<Pattern> {
    match text.split_once(':') {
        None if text == "edge" => Ok(Pattern::edge()),
        None if text == "triangle" => Ok(Pattern::triangle()),
        Some(("path", len)) => {
            let len: usize = len
                .parse()
                .map_err(|_| CliError::Usage(format!("bad path length in '{text}'")))?;
            Ok(Pattern::path(len)?)
        }
        Some(("custom", file)) => {
            let content = std::fs::read_to_string(file).map_err(|source| CliError::Io {
                path: file.to_string(),
                source,
            })?;
            Ok(Pattern::parse_edge_list(&content)?)
        }
        _ => Err(CliError::Usage(format!(
            "unknown pattern '{text}' (edge | triangle | path:<L> | custom:<file>)"
        ))),
    }
}

fn summary_json(s: &MomentSummary) -> Value {
    json!({
        "sigma2": s.sigma2,
        "var_w": s.var_w,
        "gamma": s.gamma,
        "method": s.method.label(),
        "std_errors": s.std_errors.map(|(v, g)| json!({"var_w": v, "gamma": g})),
    })
}

/// Exact third moment if the enumeration budget allows, otherwise Monte Carlo.
fn gamma_exact_or_mc<S: Sampler>(
    model: Option<&LocalStatisticModel>,
    sampler: &S,
    reps: u64,
    seed: u64,
    lanes: usize,
    warnings: &mut Vec<String>,
    requested_exact: bool,
) -> CliResult<(f64, Value)> {
    if let Some(model) = model {
        let deps = build_dependency(model)?;
        let cost = exact_gamma_cost(model, &deps);
        if cost <= EXACT_GAMMA_BUDGET {
            match gamma_exact(model, &deps) {
                Ok(g) => return Ok((g, json!({"gamma": g, "method": MomentMethod::ExactEnumeration.label()}))),
                Err(e) if e.is_unsupported_size() => {}
                Err(e) => return Err(e.into()),
            }
        }
        if requested_exact {
            warnings.push(format!(
                "exact third moment needs {cost} joint configurations (budget {EXACT_GAMMA_BUDGET}); using Monte Carlo"
            ));
        }
    } else if requested_exact {
        warnings.push("no enumerable model at this size; exact third moment unavailable, using Monte Carlo".into());
    }
    let mc = moments_mc(sampler, reps.max(1000), seed ^ MOMENT_SEED_SALT, lanes)?;
    Ok((mc.gamma, summary_json(&mc)))
}

struct RunSetup<'a> {
    grid: &'a [f64],
    reps: u64,
    seed: u64,
    lanes: usize,
    format: Format,
}

/// Tail estimation, relative errors and per-x bound columns.
fn run_experiment<S: Sampler>(
    sampler: &S,
    gamma: f64,
    setup: &RunSetup,
    bound: impl Fn(f64) -> CliResult<(f64, f64, bool)>,
) -> CliResult<(String, Vec<Value>)> {
    let config = ExperimentConfig {
        x_grid: setup.grid.to_vec(),
        reps: setup.reps,
        seed: setup.seed,
        lanes: setup.lanes,
    };
    let est = estimate_tails(sampler, &config)?;
    let rows = relative_error_table(&est, gamma)?;
    let mut records = report::tail_records(&est, &rows, &config);
    let mut bounds = Vec::new();
    for (rec, &x) in records.iter_mut().zip(setup.grid) {
        let (value, x_max, in_range) = bound(x)?;
        rec.push(("bound".into(), Field::Real(value)));
        rec.push(("x_max".into(), Field::Real(x_max)));
        rec.push(("in_range".into(), Field::Bool(in_range)));
        bounds.push(json!({"x": x, "bound": value, "x_max": x_max, "in_range": in_range}));
    }
    Ok((render(&records, setup.format), bounds))
}

fn theorem1_cols(params: StructuralParams, c: BoundConstants) -> impl Fn(f64) -> CliResult<(f64, f64, bool)> {
    move |x| {
        let r = theorem1_bound(params, x, c)?;
        Ok((r.bound_value, r.x_max, r.in_range))
    }
}

pub fn cmd_table1(x: Option<Vec<f64>>, reps: u64, seed: u64, lanes: usize, format: Format) -> CliResult<CommandOutput> {
    let grid = x.unwrap_or_else(|| REFERENCE_GRID.to_vec());
    check_grid(&grid)?;
    let spec = KRunsSpec { n: 1500, k: 2, p: 0.25 };
    let kr = build_kruns_with(spec, SigmaMethod::Auto)?;
    let gamma = kruns_gamma_analytic(spec.n, spec.p)?;
    let config = ExperimentConfig {
        x_grid: grid,
        reps,
        seed,
        lanes,
    };
    let est = estimate_tails(&kr.sampler, &config)?;
    let rows = relative_error_table(&est, gamma)?;
    let records = report::table1_records(&est, &rows, &config);
    let cells = report::compare_with_reference(&rows);
    let results = json!({
        "model": {"n": spec.n, "k": spec.k, "p": spec.p},
        "sigma2": kr.sigma2,
        "sigma_source": kr.sigma_source.label(),
        "gamma": gamma,
        "gamma_method": MomentMethod::Analytic.label(),
        "reference_provenance": REFERENCE_PROVENANCE,
        "comparison": serde_json::to_value(&cells).expect("serializable"),
        "counts": est.iter().map(|e| json!({"x": e.x, "right": e.count_right, "left": e.count_left})).collect::<Vec<_>>(),
    });
    Ok(CommandOutput {
        body: render(&records, format),
        results,
        warnings: Vec::new(),
        failed: false,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_kruns(
    spec: KRunsSpec,
    grid: &[f64],
    sigma: SigmaChoice,
    constants: BoundConstants,
    reps: u64,
    seed: u64,
    lanes: usize,
    format: Format,
) -> CliResult<CommandOutput> {
    check_grid(grid)?;
    let method = match sigma {
        SigmaChoice::Auto => SigmaMethod::Auto,
        SigmaChoice::Exact => SigmaMethod::Exact,
        SigmaChoice::Mc => SigmaMethod::MonteCarlo {
            reps: reps.max(1000),
            seed: seed ^ MOMENT_SEED_SALT,
            lanes,
        },
    };
    let kr = build_kruns_with(spec, method)?;
    let mut warnings = Vec::new();
    let (gamma, gamma_info) = if spec.k == 2 && spec.n >= 4 {
        let g = kruns_gamma_analytic(spec.n, spec.p)?;
        (g, json!({"gamma": g, "method": MomentMethod::Analytic.label()}))
    } else {
        gamma_exact_or_mc(Some(&kr.model), &kr.sampler, reps, seed, lanes, &mut warnings, false)?
    };
    let sigma_value = kr.sigma2.sqrt();
    let setup = RunSetup {
        grid,
        reps,
        seed,
        lanes,
        format,
    };
    let params = kruns_params(spec.n, spec.k, sigma_value);
    let (body, bounds) = run_experiment(&kr.sampler, gamma, &setup, theorem1_cols(params, constants))?;
    let results = json!({
        "model": spec,
        "sigma2": kr.sigma2,
        "sigma_source": serde_json::to_value(kr.sigma_source).expect("serializable"),
        "moments": gamma_info,
        "parameters": params,
        "range_kruns": kruns_x_max(spec.n, spec.k, sigma_value, constants.c0),
        "constants": constants,
        "bounds": bounds,
    });
    Ok(CommandOutput {
        body,
        results,
        warnings,
        failed: false,
    })
}

pub fn cmd_ustat(
    spec: UStatSpec,
    grid: &[f64],
    constants: BoundConstants,
    setup: (u64, u64, usize, Format),
) -> CliResult<CommandOutput> {
    check_grid(grid)?;
    let (reps, seed, lanes, format) = setup;
    let u = build_ustat(spec.clone())?;
    let mut warnings = Vec::new();
    let (gamma, gamma_info) = gamma_exact_or_mc(u.model.as_ref(), &u.sampler, reps, seed, lanes, &mut warnings, false)?;
    let params = ustat_params(spec.m, spec.s, u.kernel_check.c1, u.sigma2.sqrt());
    let run = RunSetup {
        grid,
        reps,
        seed,
        lanes,
        format,
    };
    let (body, bounds) = run_experiment(&u.sampler, gamma, &run, theorem1_cols(params, constants))?;
    let results = json!({
        "model": {"m": spec.m, "s": spec.s, "kernel": format!("{:?}", spec.kernel), "base": spec.base},
        "kernel_check": {"mean": u.kernel_check.mean, "eg2": u.kernel_check.eg2, "c1": u.kernel_check.c1},
        "sigma2": u.sigma2,
        "sigma_source": u.sigma_source.label(),
        "moments": gamma_info,
        "parameters": params,
        "constants": constants,
        "bounds": bounds,
    });
    Ok(CommandOutput {
        body,
        results,
        warnings,
        failed: false,
    })
}

pub fn cmd_subgraph(
    spec: SubgraphSpec,
    exact_moments: bool,
    grid: &[f64],
    constants: BoundConstants,
    setup: (u64, u64, usize, Format),
) -> CliResult<CommandOutput> {
    check_grid(grid)?;
    let (reps, seed, lanes, format) = setup;
    let g = build_subgraph(spec.clone())?;
    let mut warnings = Vec::new();
    let run = RunSetup {
        grid,
        reps,
        seed,
        lanes,
        format,
    };
    let pattern = spec.pattern.clone();
    let n = spec.n_vertices as f64;
    let p = spec.p;
    let bound = move |x: f64| -> CliResult<(f64, f64, bool)> {
        let r = subgraph_bound(n, p, &pattern, x, constants)?;
        Ok((r.bound_value, r.x_max, r.in_range))
    };
    let (gamma, gamma_info, body, bounds) = match (&g.sampler, &g.model) {
        (Some(sampler), model) => {
            let (gamma, info) = gamma_exact_or_mc(model.as_ref(), sampler, reps, seed, lanes, &mut warnings, exact_moments)?;
            let (body, bounds) = run_experiment(sampler, gamma, &run, bound)?;
            (gamma, info, body, bounds)
        }
        (None, Some(model)) => {
            let (gamma, info) = gamma_exact_or_mc(Some(model), model, reps, seed, lanes, &mut warnings, exact_moments)?;
            let (body, bounds) = run_experiment(model, gamma, &run, bound)?;
            (gamma, info, body, bounds)
        }
        (None, None) => unreachable!("builder returns a sampler or a model"),
    };
    let results = json!({
        "model": spec,
        "copies": g.copies,
        "sigma2": g.sigma2,
        "sigma_source": g.sigma_source.label(),
        "gamma": gamma,
        "moments": gamma_info,
        "psi": mdtk_core::tails::subgraph_psi(n, p, &spec.pattern)?,
        "constants": constants,
        "bounds": bounds,
    });
    Ok(CommandOutput {
        body,
        results,
        warnings,
        failed: false,
    })
}

pub fn cmd_moments(path: &Path, method: MomentChoice, setup: (u64, u64, usize, Format)) -> CliResult<CommandOutput> {
    let (reps, seed, lanes, format) = setup;
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let model = parse_model_json(&text)?;
    let deps = build_dependency(&model)?;
    let mut warnings = Vec::new();
    let summary = match method {
        MomentChoice::Mc => moments_mc(&model, reps.max(1000), seed ^ MOMENT_SEED_SALT, lanes)?,
        MomentChoice::Exact => moments_exact(&model, &deps)?,
        MomentChoice::Auto => match moments_exact(&model, &deps) {
            Ok(s) => s,
            Err(e) if e.is_unsupported_size() => {
                warnings.push(format!("{e}; using Monte Carlo"));
                moments_mc(&model, reps.max(1000), seed ^ MOMENT_SEED_SALT, lanes)?
            }
            Err(e) => return Err(e.into()),
        },
    };
    let (delta, delta_source) = model.delta();
    let params = structural_params(&model)?;
    let mut rec: Record = vec![
        ("n".into(), Field::Int(model.n() as u64)),
        ("m".into(), Field::Int(model.m() as u64)),
        ("s".into(), Field::Real(params.s)),
        ("d".into(), Field::Real(params.d)),
        ("delta".into(), Field::Real(delta)),
        (
            "delta_source".into(),
            Field::Text(serde_json::to_value(delta_source).expect("serializable").as_str().unwrap_or("").into()),
        ),
        ("sigma2".into(), Field::Real(summary.sigma2)),
        ("var_w".into(), Field::Real(summary.var_w)),
        ("gamma".into(), Field::Real(summary.gamma)),
        ("method".into(), Field::Text(summary.method.label().into())),
    ];
    let (se_var, se_gamma) = summary.std_errors.map_or((Field::Missing, Field::Missing), |(a, b)| (Field::Real(a), Field::Real(b)));
    rec.push(("se_var_w".into(), se_var));
    rec.push(("se_gamma".into(), se_gamma));
    rec.push(("variance_ceiling".into(), Field::Real(params.variance_ceiling())));
    rec.push(("skewness_ceiling".into(), Field::Real(params.skewness_ceiling())));
    Ok(CommandOutput {
        body: render(&[rec], format),
        results: json!({"moments": summary_json(&summary), "parameters": params}),
        warnings,
        failed: false,
    })
}

pub fn cmd_tails(x: &[f64], gamma: f64, kind: TailKind, format: Format) -> CliResult<CommandOutput> {
    check_grid(x)?;
    if !gamma.is_finite() {
        return Err(CliError::Usage(format!("gamma = {gamma} must be finite")));
    }
    let approx = match kind {
        TailKind::Normal => TailApproxKind::Normal,
        TailKind::Skew => TailApproxKind::SkewCorrected { gamma },
        TailKind::Poisson => TailApproxKind::StandardizedPoisson { gamma },
    };
    approx.validate()?;
    let mut records = Vec::new();
    for &xi in x {
        let value = approx.right_tail(xi)?;
        records.push(vec![
            ("x".to_string(), Field::Real(xi)),
            ("gamma".to_string(), Field::Real(if kind == TailKind::Normal { 0.0 } else { gamma })),
            ("kind".to_string(), Field::Text(format!("{kind:?}").to_lowercase())),
            ("tail".to_string(), Field::Real(value)),
        ]);
    }
    Ok(CommandOutput {
        body: render(&records, format),
        results: json!({"kind": approx}),
        warnings: Vec::new(),
        failed: false,
    })
}

fn need<T>(v: Option<T>, flag: &str, family: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Usage(format!("--{flag} is required for --family {family}")))
}

pub struct BoundsArgs {
    pub family: Family,
    pub x: Vec<f64>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub s: Option<f64>,
    pub d: Option<f64>,
    pub delta: Option<f64>,
    pub k: Option<usize>,
    pub p: Option<f64>,
    pub kernel: Option<String>,
    pub base: Option<String>,
    pub n_vertices: Option<usize>,
    pub pattern: Option<String>,
    pub constants: BoundConstants,
}

pub fn cmd_bounds(args: BoundsArgs, format: Format) -> CliResult<CommandOutput> {
    check_grid(&args.x)?;
    let c = args.constants;
    let mut records = Vec::new();
    let mut results = json!({"family": format!("{:?}", args.family).to_lowercase(), "constants": c});
    let push_theorem1 = |records: &mut Vec<Record>, params: StructuralParams, extra: &[(String, Field)]| -> CliResult<()> {
        for &x in &args.x {
            let r = theorem1_bound(params, x, c)?;
            let mut rec: Record = vec![
                ("x".into(), Field::Real(x)),
                ("n".into(), Field::Real(params.n)),
                ("m".into(), Field::Real(params.m)),
                ("s".into(), Field::Real(params.s)),
                ("d".into(), Field::Real(params.d)),
                ("delta".into(), Field::Real(params.delta)),
                ("bound".into(), Field::Real(r.bound_value)),
                ("x_max".into(), Field::Real(r.x_max)),
                ("in_range".into(), Field::Bool(r.in_range)),
                ("C".into(), Field::Real(c.c)),
                ("C0".into(), Field::Real(c.c0)),
            ];
            rec.extend_from_slice(extra);
            records.push(rec);
        }
        Ok(())
    };
    match args.family {
        Family::Theorem1 => {
            let n = need(args.n, "n", "theorem1")? as f64;
            let m = args.m.map_or(n, |m| m as f64);
            let params = StructuralParams::new(
                n,
                m,
                need(args.s, "s", "theorem1")?,
                need(args.d, "d", "theorem1")?,
                need(args.delta, "delta", "theorem1")?,
            );
            push_theorem1(&mut records, params, &[])?;
        }
        Family::Kruns => {
            let spec = KRunsSpec {
                n: need(args.n, "n", "kruns")?,
                k: args.k.unwrap_or(2),
                p: need(args.p, "p", "kruns")?,
            };
            let kr = build_kruns_with(spec, SigmaMethod::Auto)?;
            let sigma = kr.sigma2.sqrt();
            let range = kruns_x_max(spec.n, spec.k, sigma, c.c0);
            push_theorem1(
                &mut records,
                kruns_params(spec.n, spec.k, sigma),
                &[
                    ("sigma".into(), Field::Real(sigma)),
                    ("sigma_source".into(), Field::Text(kr.sigma_source.label().into())),
                    ("x_max_kruns".into(), Field::Real(range)),
                ],
            )?;
            results["x_max_kruns"] = json!(range);
        }
        Family::Ustat => {
            let spec = UStatSpec {
                m: need(args.m, "m", "ustat")?,
                s: need(args.s, "s", "ustat")? as usize,
                kernel: UStatKernel::parse(args.kernel.as_deref().unwrap_or("product"))?,
                base: parse_base(args.base.as_deref().unwrap_or("rademacher"))?,
            };
            let u = build_ustat(spec.clone())?;
            let sigma = u.sigma2.sqrt();
            push_theorem1(
                &mut records,
                ustat_params(spec.m, spec.s, u.kernel_check.c1, sigma),
                &[("sigma".into(), Field::Real(sigma)), ("c1".into(), Field::Real(u.kernel_check.c1))],
            )?;
        }
        Family::Subgraph => {
            let nv = need(args.n_vertices, "N", "subgraph")? as f64;
            let p = need(args.p, "p", "subgraph")?;
            let pattern = parse_pattern(&need(args.pattern.clone(), "pattern", "subgraph")?)?;
            for &x in &args.x {
                let r = subgraph_bound(nv, p, &pattern, x, c)?;
                records.push(vec![
                    ("x".into(), Field::Real(x)),
                    ("N".into(), Field::Real(nv)),
                    ("p".into(), Field::Real(p)),
                    ("v".into(), Field::Int(pattern.v() as u64)),
                    ("e".into(), Field::Int(pattern.e() as u64)),
                    ("psi".into(), Field::Real(r.psi)),
                    ("bound".into(), Field::Real(r.bound_value)),
                    ("x_max".into(), Field::Real(r.x_max)),
                    ("in_range".into(), Field::Bool(r.in_range)),
                    ("C".into(), Field::Real(c.c)),
                    ("C0".into(), Field::Real(c.c0)),
                ]);
            }
        }
    }
    Ok(CommandOutput {
        body: render(&records, format),
        results,
        warnings: Vec::new(),
        failed: false,
    })
}

pub fn cmd_oracle_check(models: usize, seed: u64) -> CliResult<CommandOutput> {
    let report = run_oracle_suite(seed, models)?;
    let value = serde_json::to_value(&report).expect("serializable");
    Ok(CommandOutput {
        body: serde_json::to_string_pretty(&value).expect("serializable") + "\n",
        results: json!({"passed": report.passed}),
        warnings: Vec::new(),
        failed: !report.passed,
    })
}

/// Dispatches a parsed command line.
pub fn execute(cli: &Cli) -> CliResult<CommandOutput> {
    let lanes = cli.lanes.unwrap_or_else(default_lanes);
    if lanes == 0 {
        return Err(CliError::Usage("--lanes must be at least 1".into()));
    }
    let reps = cli.reps.unwrap_or(DEFAULT_REPS);
    let setup = (reps, cli.seed, lanes, cli.format);
    match &cli.command {
        Command::Table1 { x } => cmd_table1(x.clone(), cli.reps.unwrap_or(TABLE1_REPS), cli.seed, lanes, cli.format),
        Command::Kruns { n, k, p, x, sigma, c, c0 } => cmd_kruns(
            KRunsSpec { n: *n, k: *k, p: *p },
            x,
            *sigma,
            BoundConstants::new(*c, *c0)?,
            reps,
            cli.seed,
            lanes,
            cli.format,
        ),
        Command::Ustat { m, s, kernel, base, x, c, c0 } => {
            let spec = UStatSpec {
                m: *m,
                s: *s,
                kernel: UStatKernel::parse(kernel)?,
                base: parse_base(base)?,
            };
            cmd_ustat(spec, x, BoundConstants::new(*c, *c0)?, setup)
        }
        Command::Subgraph { n_vertices, p, pattern, exact_moments, x, c, c0 } => {
            let spec = SubgraphSpec {
                n_vertices: *n_vertices,
                p: *p,
                pattern: parse_pattern(pattern)?,
            };
            cmd_subgraph(spec, *exact_moments, x, BoundConstants::new(*c, *c0)?, setup)
        }
        Command::Moments { model, method } => cmd_moments(model, *method, setup),
        Command::Tails { x, gamma, kind, json } => {
            cmd_tails(x, *gamma, *kind, if *json { Format::Json } else { cli.format })
        }
        Command::Bounds {
            family,
            x,
            n,
            m,
            s,
            d,
            delta,
            k,
            p,
            kernel,
            base,
            n_vertices,
            pattern,
            c,
            c0,
        } => cmd_bounds(
            BoundsArgs {
                family: *family,
                x: x.clone(),
                n: *n,
                m: *m,
                s: *s,
                d: *d,
                delta: *delta,
                k: *k,
                p: *p,
                kernel: kernel.clone(),
                base: base.clone(),
                n_vertices: *n_vertices,
                pattern: pattern.clone(),
                constants: BoundConstants::new(*c, *c0)?,
            },
            cli.format,
        ),
        Command::OracleCheck { models } => cmd_oracle_check(*models, cli.seed),
    }
}

/// Sidecar path for an output file.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn manifest(cli: &Cli, args: &[String], out: &CommandOutput, wall_seconds: f64) -> Value {
    json!({
        "subcommand": cli.command.name(),
        "args": args,
        "seed": cli.seed,
        "reps": cli.reps,
        "lanes": cli.lanes.unwrap_or_else(default_lanes),
        "rng_id": RNG_ID,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_seconds": wall_seconds,
        "outputs": cli.output.as_ref().map(|p| vec![p.display().to_string()]).unwrap_or_default(),
        "warnings": out.warnings,
        "results": out.results,
    })
}

/// Runs a command line end to end and returns the process exit code.
pub fn main_with_args(args: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let start = Instant::now();
    let result = execute(&cli).and_then(|out| {
        for w in &out.warnings {
            eprintln!("warning: {w}");
        }
        match &cli.output {
            Some(path) => {
                let wall = start.elapsed().as_secs_f64();
                std::fs::write(path, &out.body).map_err(|source| CliError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                let mpath = manifest_path(path);
                let text = serde_json::to_string_pretty(&manifest(&cli, &args[1..], &out, wall)).expect("serializable");
                std::fs::write(&mpath, text + "\n").map_err(|source| CliError::Io {
                    path: mpath.display().to_string(),
                    source,
                })?;
            }
            None => print!("{}", out.body),
        }
        if out.failed {
            Err(CliError::SuiteFailed)
        } else {
            Ok(())
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
