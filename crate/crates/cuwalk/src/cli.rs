//! Command-line front end.
//!
//! Exit codes: 0 success, 1 the command's check failed, 2 input error,
//! 3 precondition violation (for example a vanishing reference overlap).
//! Outcome indices are 1-based everywhere in CLI output.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cuwalk_core::channel::{channels_equal, random_classical_unitary, ClassicalUnitary};
use cuwalk_core::limit::{
    estimate_limit_tensors, first_jump_ks, limit_model, weak_convergence_study, HFamily, SdeModel, SdeReference,
    WeakConvergenceConfig, DEFAULT_PROBE_HS,
};
use cuwalk_core::obtuse::{obtuse_from_probabilities, ObtuseRV};
use cuwalk_core::presets::{dim2_example, Preset};
use cuwalk_core::rng::{derive_seed, stream_rng};
use cuwalk_core::tensor3::{tensor_from_rv, verify_double_symmetry};
use cuwalk_core::walk::{full_tensor_evolution, iterate_channel, WalkOptions, Walker, DILATION_BUDGET};
use cuwalk_core::CMatrix;
use rayon::prelude::*;
use serde_json::json;

use crate::csv::{CsvTable, Field};
use crate::error::CliError;
use crate::format::{
    read_json, to_json_string, ClassicalUnitaryJson, FamilyJson, LimitTensorsJson, ModelJson, ObtuseJson, TensorJson,
};
use crate::parallel::{monte_carlo_channel_par, RayonRunner};

/// Exact reconstruction required by `channel decompose`.
const RECONSTRUCTION_TOL: f64 = 1e-9;
/// Largest step count accepted by `walk simulate --verify-oracle`.
const ORACLE_MAX_STEPS: usize = 3;
const RANDOM_INSTANCE_TAG: u64 = 0x2A4D;

#[derive(Debug, Parser)]
#[command(name = "cuwalk", version, about = "Classical unitary interactions, their random walks and continuous limits")]
pub struct Cli {
    /// Worker threads for Monte-Carlo trials (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Omit the timestamp line from CSV headers.
    #[arg(long, global = true)]
    pub no_timestamp: bool,

    #[command(subcommand)]
    pub command: Group,
}

#[derive(Debug, Subcommand)]
pub enum Group {
    /// Obtuse systems.
    #[command(subcommand)]
    Obtuse(ObtuseCmd),
    /// Three-tensors of obtuse random variables.
    #[command(subcommand)]
    Tensor3(TensorCmd),
    /// Classical unitaries and their channels.
    #[command(subcommand)]
    Channel(ChannelCmd),
    /// Random walks on the unitary group.
    #[command(subcommand)]
    Walk(WalkCmd),
    /// Continuous-time limits.
    #[command(subcommand)]
    Limit(LimitCmd),
}

#[derive(Debug, Subcommand)]
pub enum ObtuseCmd {
    /// Check the obtuse condition and print the canonical law.
    Validate { file: PathBuf },
    /// Canonical real obtuse system for comma-separated probabilities.
    FromProbs {
        #[arg(value_delimiter = ',', num_args = 1.., allow_hyphen_values = true)]
        probabilities: Vec<f64>,
    },
}

#[derive(Debug, Subcommand)]
pub enum TensorCmd {
    /// Tensor `S^{ij}_k` of an obtuse system file.
    FromRv { file: PathBuf },
    /// Check the double-symmetry conditions of a tensor file.
    Check {
        file: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

#[derive(Debug, Subcommand)]
pub enum ChannelCmd {
    /// Probabilities, values, A, B_j and the reconstruction residual.
    Decompose(CuSource),
    /// Compare the channels of two classical unitaries.
    CheckEqual {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Build a classical unitary from branch states and unitaries.
    FromBranches { file: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum WalkCmd {
    /// Sample trajectories `V_0, …, V_n` to CSV.
    Simulate(SimulateArgs),
}

#[derive(Debug, Subcommand)]
pub enum LimitCmd {
    /// Extrapolated limit tensors `M^{ij}_k`.
    Tensors {
        #[command(flatten)]
        family: FamilySource,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_PROBE_HS)]
        hs: Vec<f64>,
    },
    /// Limit equation with a synthesized driver.
    Model {
        #[command(flatten)]
        family: FamilySource,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_PROBE_HS)]
        hs: Vec<f64>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Weak convergence of the walk to its limit equation.
    Converge(ConvergeArgs),
}

/// Where a single classical unitary comes from.
#[derive(Debug, Args)]
pub struct CuSource {
    /// Classical unitary JSON file.
    pub file: Option<PathBuf>,
    /// `dim2-example` or an h-family preset.
    #[arg(long, conflicts_with_all = ["file", "random"])]
    pub preset: Option<String>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Step size for h-family presets.
    #[arg(long)]
    pub h: Option<f64>,
    /// Haar-random branches and unitaries.
    #[arg(long, conflicts_with = "file")]
    pub random: bool,
    #[arg(long, default_value_t = 2)]
    pub dim_sys: usize,
    #[arg(long, default_value_t = 3)]
    pub dim_env: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: CuSource,
    #[arg(long)]
    pub steps: usize,
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
    /// Output CSV (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Omit the flattened `V_k` entries.
    #[arg(long)]
    pub no_entries: bool,
    /// Compare the exact dilation with the channel power and the Monte-Carlo
    /// average (steps <= 3).
    #[arg(long)]
    pub verify_oracle: bool,
}

#[derive(Debug, Args)]
pub struct FamilySource {
    /// Family JSON file `{"preset": ..}`.
    #[arg(conflicts_with = "preset")]
    pub file: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReferenceKind {
    /// Exact mean equations.
    Mean,
    /// Monte Carlo over the integrator.
    Sde,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    /// `[family.json] [model.json]`; with `--preset` only the model file.
    pub files: Vec<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [4e-2, 1e-2, 2.5e-3])]
    pub hs: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ReferenceKind::Mean)]
    pub reference: ReferenceKind,
    /// Integrator step for `--reference sde`.
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Integrator trials for `--reference sde` (default: `--trials`).
    #[arg(long)]
    pub sde_trials: Option<u64>,
    /// Step size of the first-jump test for jump families.
    #[arg(long, default_value_t = 1e-3)]
    pub ks_h: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses the process arguments, runs the command and maps the outcome to
/// an exit code.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let ctx = Context { runner: RayonRunner::new(cli.jobs)?, timestamp: !cli.no_timestamp };
    match &cli.command {
        Group::Obtuse(c) => obtuse(c),
        Group::Tensor3(c) => tensor3(c),
        Group::Channel(c) => channel(c),
        Group::Walk(WalkCmd::Simulate(a)) => simulate(&ctx, a),
        Group::Limit(c) => limit(&ctx, c),
    }
}

struct Context {
    runner: RayonRunner,
    timestamp: bool,
}

fn print_json(value: &impl serde::Serialize) -> Result<(), CliError> {
    crate::csv::write_stdout(&(to_json_string(value) + "\n"))
}

fn obtuse(cmd: &ObtuseCmd) -> Result<(), CliError> {
    match cmd {
        ObtuseCmd::Validate { file } => {
            let input: ObtuseJson = read_json(file)?;
            let system = input.to_system().map_err(|e| match e {
                CliError::Input(msg) if msg.contains("not obtuse") => CliError::Criterion(msg),
                other => other,
            })?;
            let r = system.law_residuals();
            print_json(&json!({
                "system": ObtuseJson::from(&system),
                "law_residuals": {
                    "total_probability": r.total_probability,
                    "mean": r.mean,
                    "covariance": r.covariance,
                },
            }))?;
            Ok(())
        }
        ObtuseCmd::FromProbs { probabilities } => {
            print_json(&ObtuseJson::from(&obtuse_from_probabilities(probabilities)?))?;
            Ok(())
        }
    }
}

fn tensor3(cmd: &TensorCmd) -> Result<(), CliError> {
    match cmd {
        TensorCmd::FromRv { file } => {
            let input: ObtuseJson = read_json(file)?;
            let rv = ObtuseRV::new(input.to_system()?);
            print_json(&TensorJson::from(&tensor_from_rv(&rv)))?;
            Ok(())
        }
        TensorCmd::Check { file, tol } => {
            let input: TensorJson = read_json(file)?;
            let report = verify_double_symmetry(&input.to_tensor()?, *tol);
            let failing: Vec<&str> = report.failing().iter().map(|f| f.name()).collect();
            print_json(&json!({
                "tol": report.tol,
                "unit": report.unit,
                "swap": report.swap,
                "associativity": report.associativity,
                "conjugate_associativity": report.conjugate_associativity,
                "failing": failing,
                "passes": report.passes(),
            }))?;
            if report.passes() {
                Ok(())
            } else {
                Err(CliError::Criterion(format!("symmetry violated: {}", failing.join(", "))))
            }
        }
    }
}

fn load_cu(path: &Path) -> Result<ClassicalUnitary, CliError> {
    read_json::<ClassicalUnitaryJson>(path)?.to_classical_unitary()
}

fn resolve_cu(src: &CuSource) -> Result<ClassicalUnitary, CliError> {
    if let Some(file) = &src.file {
        return load_cu(file);
    }
    if let Some(name) = &src.preset {
        if name == "dim2-example" {
            return Ok(dim2_example(src.p.unwrap_or(0.5), src.tau.unwrap_or(0.0))?);
        }
        let fam = Preset::from_name(name, src.p, src.tau)?;
        let h = src.h.ok_or_else(|| CliError::Input(format!("preset `{name}` needs --h")))?;
        return Ok(fam.build(h)?);
    }
    if src.random {
        let mut rng = stream_rng(derive_seed(src.seed, RANDOM_INSTANCE_TAG), 0);
        return Ok(random_classical_unitary(&mut rng, src.dim_sys, src.dim_env)?);
    }
    Err(CliError::Input("give a JSON file, --preset or --random".into()))
}

fn channel(cmd: &ChannelCmd) -> Result<(), CliError> {
    match cmd {
        ChannelCmd::Decompose(src) => {
            let cu = resolve_cu(src)?;
            let residual = cu.reconstruction_residual();
            print_json(&ClassicalUnitaryJson::from(&cu))?;
            if residual <= RECONSTRUCTION_TOL {
                Ok(())
            } else {
                Err(CliError::Criterion(format!("reconstruction residual {residual:.3e} > {RECONSTRUCTION_TOL:e}")))
            }
        }
        ChannelCmd::CheckEqual { a, b, tol } => {
            let (ca, cb) = (load_cu(a)?.channel()?, load_cu(b)?.channel()?);
            if ca.dim() != cb.dim() {
                return Err(CliError::Input(format!("channels act on C^{} and C^{}", ca.dim(), cb.dim())));
            }
            let equal = channels_equal(&ca, &cb, *tol);
            print_json(&json!({ "equal": equal, "choi_distance": ca.choi().distance(&cb.choi()), "tol": tol }))?;
            if equal {
                Ok(())
            } else {
                Err(CliError::Criterion("channels differ".into()))
            }
        }
        ChannelCmd::FromBranches { file } => {
            print_json(&ClassicalUnitaryJson::from(&load_cu(file)?))?;
            Ok(())
        }
    }
}

fn entry_columns(d: usize) -> Vec<String> {
    let mut cols = Vec::with_capacity(2 * d * d);
    for r in 1..=d {
        for c in 1..=d {
            cols.push(format!("v{r}{c}_re"));
            cols.push(format!("v{r}{c}_im"));
        }
    }
    cols
}

fn simulate(ctx: &Context, a: &SimulateArgs) -> Result<(), CliError> {
    let cu = resolve_cu(&a.source)?;
    if a.verify_oracle && a.steps > ORACLE_MAX_STEPS {
        return Err(CliError::Precondition(format!(
            "--verify-oracle needs --steps <= {ORACLE_MAX_STEPS}, got {}",
            a.steps
        )));
    }
    if a.trials == 0 {
        return Err(CliError::Input("--trials must be at least 1".into()));
    }
    let walker = Walker::new(&cu)?;
    let d = cu.dim_sys();
    let seed = a.source.seed;

    let mut columns = vec!["trial".to_string(), "step".to_string(), "outcome".to_string()];
    if !a.no_entries {
        columns.extend(entry_columns(d));
    }
    let column_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = CsvTable::new("walk simulate", seed, ctx.timestamp, &column_refs);
    table.comment("steps", &a.steps.to_string());
    table.comment("trials", &a.trials.to_string());
    table.comment("dim_sys", &d.to_string());
    table.comment("dim_env", &cu.dim_env().to_string());
    table.comment("outcome", "1-based; 0 marks the initial state");

    let paths = ctx.runner.install(|| {
        (0..a.trials)
            .into_par_iter()
            .map(|trial| walker.simulate(WalkOptions { steps: a.steps, seed, trial, retain: !a.no_entries }))
            .collect::<Vec<_>>()
    });

    let mut counts = vec![0u64; cu.dim_env()];
    let mut oracle_lines = Vec::new();
    let mut oracle_failure = None;
    if a.verify_oracle {
        let rho = CMatrix::from_fn(d, d, |r, c| if r == 0 && c == 0 { 1.0.into() } else { 0.0.into() });
        let dilation = full_tensor_evolution(&cu, a.steps, &rho, DILATION_BUDGET)?;
        let power = iterate_channel(&cu.channel()?, &rho, a.steps)?;
        let mc = monte_carlo_channel_par(&ctx.runner, &walker, &rho, a.steps, a.trials, seed);
        let exact_gap = dilation.distance(&power);
        let excess = mc.excess_over(&power, 4.0);
        oracle_lines.push(("oracle_dilation_vs_channel", exact_gap));
        oracle_lines.push(("oracle_mc_excess_4se", excess));
        if exact_gap > 1e-10 {
            oracle_failure = Some(format!("dilation and channel power differ by {exact_gap:.3e}"));
        } else if excess > 1e-12 {
            oracle_failure = Some(format!("Monte-Carlo average outside 4 standard errors by {excess:.3e}"));
        }
    }
    for (k, v) in &oracle_lines {
        table.comment(k, &crate::csv::format_real(*v));
    }

    for path in &paths {
        for step in 0..=a.steps {
            let outcome = if step == 0 { 0 } else { path.outcome_indices[step - 1] + 1 };
            if step > 0 {
                counts[outcome - 1] += 1;
            }
            let mut fields = vec![Field::Int(path.trial), Field::Int(step as u64), Field::Int(outcome as u64)];
            if !a.no_entries {
                for z in path.unitaries[step].as_slice() {
                    fields.push(Field::Real(z.re));
                    fields.push(Field::Real(z.im));
                }
            }
            table.row(&fields);
        }
    }
    if let Some(p) = table.write(a.out.as_deref())? {
        eprintln!("wrote {}", p.display());
    }
    let summary: Vec<String> = counts.iter().enumerate().map(|(i, c)| format!("{}:{c}", i + 1)).collect();
    eprintln!("outcome counts {}", summary.join(" "));
    for (k, v) in &oracle_lines {
        eprintln!("{k} = {v:.3e}");
    }
    match oracle_failure {
        Some(msg) => Err(CliError::Criterion(msg)),
        None => Ok(()),
    }
}

fn resolve_family(src: &FamilySource) -> Result<Preset, CliError> {
    match (&src.file, &src.preset) {
        (Some(f), _) => read_json::<FamilyJson>(f)?.to_preset(),
        (None, Some(name)) => Ok(Preset::from_name(name, src.p, src.tau)?),
        (None, None) => Err(CliError::Input("give a family JSON file or --preset".into())),
    }
}

fn model_for(fam: &Preset, hs: &[f64], tol: f64) -> Result<(String, SdeModel), CliError> {
    let (template, model) = limit_model(fam, hs, tol)?;
    Ok((template.name().to_string(), model))
}

fn limit(ctx: &Context, cmd: &LimitCmd) -> Result<(), CliError> {
    match cmd {
        LimitCmd::Tensors { family, hs } => {
            let fam = resolve_family(family)?;
            let est = estimate_limit_tensors(&fam, hs)?;
            let analytic_distance = fam.analytic_tensors().map(|m| m.distance(&est));
            print_json(&json!({
                "family": fam.name(),
                "tensors": LimitTensorsJson::from(&est),
                "analytic_distance": analytic_distance,
            }))?;
            Ok(())
        }
        LimitCmd::Model { family, hs, tol } => {
            let fam = resolve_family(family)?;
            let (template, model) = model_for(&fam, hs, *tol)?;
            let mut json = ModelJson::from(&model);
            json.template = Some(template);
            print_json(&json)?;
            Ok(())
        }
        LimitCmd::Converge(a) => converge(ctx, a),
    }
}

fn converge(ctx: &Context, a: &ConvergeArgs) -> Result<(), CliError> {
    let (fam, model_file) = match (&a.preset, a.files.as_slice()) {
        (Some(name), [] | [_]) => (Preset::from_name(name, a.p, a.tau)?, a.files.first()),
        (None, [fam] | [fam, _]) => (read_json::<FamilyJson>(fam)?.to_preset()?, a.files.get(1)),
        _ => return Err(CliError::Input("expected [family.json] [model.json] or --preset [model.json]".into())),
    };
    let model = match model_file {
        Some(f) => read_json::<ModelJson>(f)?.to_model()?,
        None => model_for(&fam, &DEFAULT_PROBE_HS, 1e-9)?.1,
    };
    let reference = match a.reference {
        ReferenceKind::Mean => SdeReference::MeanEquation,
        ReferenceKind::Sde => SdeReference::MonteCarlo { dt: a.dt, trials: a.sde_trials.unwrap_or(a.trials) },
    };
    let cfg = WeakConvergenceConfig {
        reference,
        ..WeakConvergenceConfig::new(model.dim_sys(), a.t, a.hs.clone(), a.trials, a.seed)
    };
    let report = weak_convergence_study(&fam, &model, &cfg, &ctx.runner)?;

    let mut table = CsvTable::new(
        "limit converge",
        a.seed,
        ctx.timestamp,
        &["h", "observable", "discrete_mean", "sde_mean", "abs_error", "stderr"],
    );
    table.comment("family", &fam.name());
    table.comment("t", &a.t.to_string());
    table.comment("trials", &a.trials.to_string());
    table.comment(
        "reference",
        &match reference {
            SdeReference::MeanEquation => "mean-equation".to_string(),
            SdeReference::MonteCarlo { dt, trials } => format!("sde dt={dt} trials={trials}"),
        },
    );
    for (k, l) in report.levels.iter().enumerate() {
        table.comment(
            &format!("level{}", k + 1),
            &format!("h={} steps={} error={:.9e} sigma={:.9e}", l.h, l.steps, l.error, l.sigma),
        );
    }
    table.comment("monotone", &report.monotone.to_string());
    if let Some(order) = report.order {
        table.comment("order", &format!("{order:.4}"));
    }
    if let Some(outcome) = fam.jump_outcome() {
        let ks = first_jump_ks(&fam, a.ks_h, outcome, a.trials, derive_seed(a.seed, 0x4B53), &ctx.runner)?;
        table.comment(
            "first_jump_ks",
            &format!("h={} outcome={} statistic={:.6e} censored={}", ks.h, outcome + 1, ks.statistic, ks.censored),
        );
        eprintln!("first-jump KS distance vs Exp(1) at h = {}: {:.4}", ks.h, ks.statistic);
    }
    for r in &report.rows {
        table.row(&[
            Field::Real(r.h),
            Field::Text(r.observable.label()),
            Field::Real(r.discrete_mean),
            Field::Real(r.sde_mean),
            Field::Real(r.abs_error),
            Field::Real(r.stderr),
        ]);
    }
    if let Some(p) = table.write(a.out.as_deref())? {
        eprintln!("wrote {}", p.display());
    }
    for l in &report.levels {
        eprintln!("h = {:<10} error = {:.4e}  sigma = {:.4e}", l.h, l.error, l.sigma);
    }
    if report.monotone {
        Ok(())
    } else {
        Err(CliError::Criterion("error does not decrease beyond the 2-sigma band at every refinement".into()))
    }
}
