//! Command-line front end. `run` parses arguments, dispatches to the library
//! and maps errors to exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | any other failure |
//! | 2 | usage error (unknown flag, bad value) |
//! | 3 | malformed or unreadable config file |
//! | 4 | missing dataset |
//!
//! The output root is `--out`, else `$PIFT_OUT`, else the config's
//! `output_dir`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::experiments::{
    audit_ratios, audit_residual, audit_to_csv, build_datasets, evaluate, generate_ood_to_dir, generate_to_dir,
    load_datasets, predict_set, run_experiment, save_predictions, ExperimentSpec, Regime,
};
use crate::fields::Grid;
use crate::operator::{load_checkpoint, save_checkpoint};
use crate::residual::PdeTask;
use crate::train::{finetune, pretrain, Augmentation, LossMode, Start};

pub const OUT_ENV: &str = "PIFT_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_MISSING_DATASET: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "pift", version, about = "Fine-tuning spectral neural operators on Poisson and Helmholtz problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate labeled datasets: the full pool and OOD set of a config, or
    /// a standalone set with --task/--seed.
    Generate(GenerateArgs),
    /// Pretrain the surrogate model and write <out>/pretrained.ckpt.
    Pretrain(SpecArgs),
    /// Fine-tune (or train from scratch) on the first M pool samples.
    Finetune(FinetuneArgs),
    /// Evaluate a checkpoint on the test sets of a config.
    Evaluate(EvaluateArgs),
    /// Full sweep: datasets, pretraining, every configuration x M; writes <out>/scaling.csv.
    Scaling(SpecArgs),
    /// Residual of reference solutions on several grids.
    AuditResidual(AuditArgs),
}

#[derive(Debug, Args)]
struct SpecArgs {
    /// Experiment config (JSON mirroring ExperimentSpec)
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output root (overrides $PIFT_OUT and the config's output_dir)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TaskArg {
    Poisson,
    Helmholtz,
}

impl TaskArg {
    fn task(self) -> PdeTask {
        match self {
            TaskArg::Poisson => PdeTask::Poisson,
            TaskArg::Helmholtz => PdeTask::helmholtz(),
        }
    }
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Standalone mode: task of the generated set
    #[arg(long, conflicts_with = "config")]
    task: Option<TaskArg>,
    /// Standalone mode: data seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Standalone mode: grid side
    #[arg(long, default_value_t = 64)]
    n: usize,
    /// Standalone mode: number of samples
    #[arg(long, default_value_t = 64)]
    count: usize,
    /// Standalone mode: draw from the out-of-distribution families
    #[arg(long)]
    ood: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Data,
    Physics,
    Hybrid,
}

#[derive(Debug, Args)]
struct FinetuneArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Labeled samples M taken after the reserved test block
    #[arg(long, value_name = "M")]
    samples: usize,
    /// Train from a fresh initialization instead of the pretrained model
    #[arg(long)]
    scratch: bool,
    /// Add unlabeled out-of-distribution inputs to each batch (physics/hybrid)
    #[arg(long)]
    augment: bool,
    /// Pretrained checkpoint (default: config value, then <out>/pretrained.ckpt)
    #[arg(long, value_name = "FILE")]
    checkpoint: Option<PathBuf>,
    /// Override the config's step count
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RegimeArg {
    Interp,
    Extrap,
    Both,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, value_name = "FILE")]
    checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    regime: RegimeArg,
    /// Also write predictions as datasets under <out>/predictions/
    #[arg(long)]
    save_predictions: bool,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[arg(long, value_enum, default_value = "poisson")]
    task: TaskArg,
    /// Comma-separated grid sides
    #[arg(long, value_delimiter = ',', default_values_t = [33usize, 65])]
    grids: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to stderr as one line.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(CliError(code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    }
}

struct CliError(i32, String);

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::MissingDataset(_) => EXIT_MISSING_DATASET,
            Error::Malformed { .. } | Error::Json(_) => EXIT_CONFIG,
            _ => EXIT_FAILURE,
        };
        CliError(code, e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn load_spec(path: Option<&Path>) -> CliResult<ExperimentSpec> {
    match path {
        None => Ok(ExperimentSpec::default()),
        Some(p) => ExperimentSpec::load(p).map_err(|e| CliError(EXIT_CONFIG, format!("config {}: {e}", p.display()))),
    }
}

fn out_root(flag: Option<&Path>, spec: &ExperimentSpec) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => spec.output_dir.clone(),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Generate(a) => generate(a),
        Command::Pretrain(a) => pretrain_cmd(a),
        Command::Finetune(a) => finetune_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Scaling(a) => scaling(a),
        Command::AuditResidual(a) => audit(a),
    }
}

fn generate(a: GenerateArgs) -> CliResult<()> {
    if let Some(task) = a.task {
        let task = task.task();
        let spec = ExperimentSpec::default();
        let root = out_root(a.spec.out.as_deref(), &spec);
        let kind = if a.ood { "ood" } else { "train" };
        let dir = root.join("data").join(format!("{}_{kind}_n{}_seed{}", task.name(), a.n, a.seed));
        let grid = Grid::new(a.n)?;
        let set = if a.ood {
            generate_ood_to_dir(&task, grid, a.count, a.seed, &dir)?
        } else {
            generate_to_dir(&task, grid, a.count, a.seed, &dir)?
        };
        println!("{} {}", dir.display(), set.checksum());
        return Ok(());
    }
    let spec = load_spec(a.spec.config.as_deref())?;
    let root = out_root(a.spec.out.as_deref(), &spec);
    let (data, paths) = build_datasets(&spec, &root)?;
    println!("{} {}", paths.pool.display(), data.pool.checksum());
    println!("{} {}", paths.ood.display(), data.ood.checksum());
    Ok(())
}

fn pretrain_cmd(a: SpecArgs) -> CliResult<()> {
    let spec = load_spec(a.config.as_deref())?;
    let root = out_root(a.out.as_deref(), &spec);
    create_dir(&root.join("logs"))?;
    let (ckpt, log) = pretrain(&spec.pretrain_config())?;
    let path = root.join("pretrained.ckpt");
    save_checkpoint(&ckpt, &path)?;
    log.write_csv(root.join("logs").join("pretrain.csv"))?;
    let last = log.last().map_or(f64::NAN, |r| r.total_loss);
    println!("{} steps={} final_loss={last:e}", path.display(), ckpt.meta.steps);
    Ok(())
}

fn finetune_cmd(a: FinetuneArgs) -> CliResult<()> {
    let spec = load_spec(a.spec.config.as_deref())?;
    let root = out_root(a.spec.out.as_deref(), &spec);
    let data = load_datasets(&spec, &root)?;
    let pool = data.training(a.samples)?;
    let mut cfg = spec.train_config(crate::experiments::Configuration::FtData, a.samples);
    cfg.mode = match a.mode {
        ModeArg::Data => LossMode::Data,
        ModeArg::Physics => LossMode::Physics,
        ModeArg::Hybrid => LossMode::hybrid(),
    };
    if let Some(steps) = a.steps {
        cfg.steps = steps;
    }
    if a.augment {
        if cfg.mode == LossMode::Data {
            return Err(CliError(EXIT_USAGE, "--augment needs a physics or hybrid mode".into()));
        }
        cfg.augmentation = Augmentation::each_of(spec.task.extrapolation_families());
    }
    let pretrained;
    let start = if a.scratch {
        Start::Scratch(spec.operator)
    } else {
        let path = a
            .checkpoint
            .or_else(|| spec.pretrained_checkpoint.clone())
            .unwrap_or_else(|| root.join("pretrained.ckpt"));
        if !path.exists() {
            return Err(CliError(
                EXIT_FAILURE,
                format!("no pretrained checkpoint at {}; run pretrain or pass --scratch", path.display()),
            ));
        }
        pretrained = load_checkpoint(&path)?;
        Start::Pretrained {
            from: &pretrained,
            output_scale: spec.operator.output_scale,
        }
    };
    let (mut ckpt, log) = finetune(start, &spec.task, &pool, &cfg)?;
    ckpt.meta.grid_n = Some(spec.grid_n);
    let stem = format!("{}{}_M{}", if a.scratch { "scratch-" } else { "ft-" }, cfg.mode.name(), a.samples);
    create_dir(&root.join("logs"))?;
    log.write_csv(root.join("logs").join(format!("{stem}.csv")))?;
    let path = root.join(format!("{stem}.ckpt"));
    save_checkpoint(&ckpt, &path)?;
    let ev = evaluate(&ckpt.model, &data.in_dist_test()?, &spec.task)?;
    println!(
        "{} interp median_rel_l1_solution={:e} median_rel_l1_residual={:e}",
        path.display(),
        ev.median_solution,
        ev.median_residual
    );
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs) -> CliResult<()> {
    let spec = load_spec(a.spec.config.as_deref())?;
    let root = out_root(a.spec.out.as_deref(), &spec);
    let data = load_datasets(&spec, &root)?;
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let regimes: &[Regime] = match a.regime {
        RegimeArg::Interp => &[Regime::Interp],
        RegimeArg::Extrap => &[Regime::Extrap],
        RegimeArg::Both => &[Regime::Interp, Regime::Extrap],
    };
    println!("regime,median_rel_l1_solution,median_rel_l1_residual,mean_abs_residual");
    for &regime in regimes {
        let set = data.test_set(regime)?;
        let ev = evaluate(&ckpt.model, &set, &spec.task)?;
        println!("{},{:e},{:e},{:e}", regime.name(), ev.median_solution, ev.median_residual, ev.mean_abs_residual);
        if a.save_predictions {
            let preds = predict_set(&ckpt.model, &spec.task, &set)?;
            save_predictions(&set, preds, root.join("predictions").join(regime.name()))?;
        }
    }
    Ok(())
}

fn scaling(a: SpecArgs) -> CliResult<()> {
    let spec = load_spec(a.config.as_deref())?;
    let root = out_root(a.out.as_deref(), &spec);
    let outcome = run_experiment(&spec, &root)?;
    let failed = outcome.rows.iter().filter(|r| !r.is_ok()).count();
    println!("{} rows={} failed={failed}", root.join("scaling.csv").display(), outcome.rows.len());
    Ok(())
}

fn audit(a: AuditArgs) -> CliResult<()> {
    let task = a.task.task();
    let rows = audit_residual(&task, &a.grids, a.count, a.seed)?;
    let root = out_root(a.out.as_deref(), &ExperimentSpec::default());
    create_dir(&root)?;
    let path = root.join("audit_residual.csv");
    write_file(&path, &audit_to_csv(&rows))?;
    println!("{}", path.display());
    for pair in a.grids.windows(2) {
        let ratios = audit_ratios(&rows, pair[0], pair[1]);
        let mean = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
        println!("n={} -> n={}: mean |r| ratio {mean:.3}", pair[0], pair[1]);
    }
    Ok(())
}
