//! Dataset builds, scaling sweeps over the five training configurations,
//! evaluation and the residual audit of reference solutions.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::fem::{label_sampleset, solve_task, write_solve_log, FEM_TOLERANCE};
use crate::fields::{median_over_samples, relative_l1, save_sampleset, Grid, SampleSet, ScalarField2D};
use crate::operator::{save_checkpoint, Checkpoint, NeuralOperator, OperatorConfig};
use crate::residual::{mean_abs_residual, residual_rel_l1, PdeTask};
use crate::rng::derive_seed;
use crate::sources::{gen_input_set, gen_ood_testset};
use crate::train::{finetune, predict, pretrain, Augmentation, LossMode, PretrainConfig, Start, TrainConfig};

/// First line of every scaling CSV.
pub const SCALING_SCHEMA: &str = "# pift scaling v1";
pub const SCALING_HEADER: &str =
    "config,M,regime,median_rel_l1_solution,median_rel_l1_residual,mean_abs_residual,wall_time_s,status";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Configuration {
    #[serde(rename = "ft-data")]
    FtData,
    #[serde(rename = "ft-physics")]
    FtPhysics,
    #[serde(rename = "ft-hybrid")]
    FtHybrid,
    #[serde(rename = "scratch-data")]
    ScratchData,
    #[serde(rename = "scratch-physics")]
    ScratchPhysics,
}

impl Configuration {
    pub const ALL: [Configuration; 5] = [
        Configuration::FtData,
        Configuration::FtPhysics,
        Configuration::FtHybrid,
        Configuration::ScratchData,
        Configuration::ScratchPhysics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Configuration::FtData => "ft-data",
            Configuration::FtPhysics => "ft-physics",
            Configuration::FtHybrid => "ft-hybrid",
            Configuration::ScratchData => "scratch-data",
            Configuration::ScratchPhysics => "scratch-physics",
        }
    }

    pub fn mode(self) -> LossMode {
        match self {
            Configuration::FtData | Configuration::ScratchData => LossMode::Data,
            Configuration::FtPhysics | Configuration::ScratchPhysics => LossMode::Physics,
            Configuration::FtHybrid => LossMode::hybrid(),
        }
    }

    pub fn pretrained(self) -> bool {
        matches!(self, Configuration::FtData | Configuration::FtPhysics | Configuration::FtHybrid)
    }
}

impl FromStr for Configuration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Configuration::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown configuration {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Interp,
    Extrap,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Interp => "interp",
            Regime::Extrap => "extrap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    pub data: u64,
    pub ood: u64,
    pub pretrain: u64,
    pub train: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            data: 1,
            ood: 2,
            pretrain: 3,
            train: 4,
        }
    }
}

/// Optimization settings shared by every cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingSpec {
    pub batch_size: usize,
    pub steps: usize,
    pub lr_backbone: f64,
    pub lr_embed: f64,
    /// Extrapolation-family inputs added to every hybrid batch.
    pub hybrid_augmentation: bool,
}

impl Default for TrainingSpec {
    fn default() -> Self {
        TrainingSpec {
            batch_size: 8,
            steps: 200,
            lr_backbone: 1e-3,
            lr_embed: 1e-2,
            hybrid_augmentation: true,
        }
    }
}

/// Mirrors the JSON config file field for field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub task: PdeTask,
    pub grid_n: usize,
    pub m_list: Vec<usize>,
    pub configurations: Vec<Configuration>,
    pub test_in_dist: usize,
    pub test_ood: usize,
    pub train_pool: usize,
    pub seeds: Seeds,
    pub output_dir: PathBuf,
    pub operator: OperatorConfig,
    pub training: TrainingSpec,
    pub pretrain_steps: usize,
    pub pretrain_lr: f64,
    pub pretrain_batch_size: usize,
    /// Reuse this checkpoint instead of pretraining.
    pub pretrained_checkpoint: Option<PathBuf>,
    /// When false, wall times are written as 0 so reruns are byte-identical.
    pub record_wall_time: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            task: PdeTask::Poisson,
            grid_n: 64,
            m_list: vec![1, 4, 16, 64, 256],
            configurations: Configuration::ALL.to_vec(),
            test_in_dist: 240,
            test_ood: 50,
            train_pool: 4096,
            seeds: Seeds::default(),
            output_dir: PathBuf::from("results"),
            operator: OperatorConfig::for_task(&PdeTask::Poisson),
            training: TrainingSpec::default(),
            pretrain_steps: 400,
            pretrain_lr: 1e-3,
            pretrain_batch_size: 8,
            pretrained_checkpoint: None,
            record_wall_time: false,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        Grid::new(self.grid_n)?;
        if self.m_list.is_empty() {
            return bad("M list is empty".into());
        }
        if self.m_list.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("M list must be strictly ascending: {:?}", self.m_list));
        }
        if self.m_list.last().copied().unwrap_or(0) > self.train_pool {
            return bad(format!("largest M exceeds the training pool of {}", self.train_pool));
        }
        if self.configurations.is_empty() {
            return bad("no configurations".into());
        }
        let unique: BTreeSet<_> = self.configurations.iter().collect();
        if unique.len() != self.configurations.len() {
            return bad("duplicate configurations".into());
        }
        if self.test_in_dist == 0 || self.test_ood == 0 {
            return bad("test sets must be non-empty".into());
        }
        if self.operator.in_channels != self.task.in_channels() {
            return bad(format!(
                "{} takes {} input channels, operator has {}",
                self.task.name(),
                self.task.in_channels(),
                self.operator.in_channels
            ));
        }
        self.operator.validate_for_grid(self.grid_n)?;
        self.train_config(Configuration::FtHybrid, 0).validate()
    }

    /// Operator fields left out of the JSON follow the task: a missing
    /// `operator` block gets the task's default sizes and a missing
    /// `output_scale` gets the task's scale.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        let mut spec: ExperimentSpec = serde_json::from_value(raw.clone())?;
        match raw.get("operator") {
            None => spec.operator = OperatorConfig::for_task(&spec.task),
            Some(op) if op.get("output_scale").is_none() => spec.operator.output_scale = spec.task.output_scale(),
            Some(_) => {}
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentSpec::from_json(&text).map_err(|e| Error::Malformed {
            what: path.display().to_string(),
            detail: e.to_string(),
        })
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.grid_n).expect("validated grid")
    }

    pub fn pretrain_config(&self) -> PretrainConfig {
        PretrainConfig {
            grid_n: self.grid_n,
            operator: OperatorConfig {
                in_channels: 1,
                output_scale: 1.0,
                ..self.operator
            },
            steps: self.pretrain_steps,
            batch_size: self.pretrain_batch_size,
            lr: self.pretrain_lr,
            seed: self.seeds.pretrain,
            ..PretrainConfig::default()
        }
    }

    /// Training settings of one sweep cell.
    pub fn train_config(&self, config: Configuration, m: usize) -> TrainConfig {
        let t = &self.training;
        let augmentation = if config == Configuration::FtHybrid && t.hybrid_augmentation {
            Augmentation::each_of(self.task.extrapolation_families())
        } else {
            Augmentation::Off
        };
        TrainConfig {
            mode: config.mode(),
            batch_size: t.batch_size,
            steps: t.steps,
            lr_backbone: t.lr_backbone,
            lr_embed: t.lr_embed,
            augmentation,
            seed: crate::rng::derive_seed2(self.seeds.train, config as u64, m as u64),
            ..TrainConfig::default()
        }
    }
}

/// Labeled pool (test block first) and the out-of-distribution test set.
#[derive(Debug, Clone)]
pub struct Datasets {
    pub pool: SampleSet,
    pub ood: SampleSet,
    pub test_in_dist: usize,
}

impl Datasets {
    pub fn in_dist_test(&self) -> Result<SampleSet> {
        self.pool.slice(0..self.test_in_dist)
    }

    /// The first `m` samples after the reserved test block.
    pub fn training(&self, m: usize) -> Result<SampleSet> {
        self.pool.slice(self.test_in_dist..self.test_in_dist + m)
    }

    pub fn test_set(&self, regime: Regime) -> Result<SampleSet> {
        match regime {
            Regime::Interp => self.in_dist_test(),
            Regime::Extrap => Ok(self.ood.clone()),
        }
    }
}

/// Generates and labels the pool and OOD set in memory.
pub fn generate_datasets(spec: &ExperimentSpec) -> Result<Datasets> {
    spec.validate()?;
    let grid = spec.grid();
    let total = spec.test_in_dist + spec.train_pool;
    let inputs = gen_input_set(grid, &spec.task.training_family(), total, spec.seeds.data)?;
    let (pool, _) = label_sampleset(&spec.task, &inputs, FEM_TOLERANCE)?;
    let (ood, _) = label_sampleset(&spec.task, &ood_inputs(&spec.task, grid, spec.test_ood, spec.seeds.ood)?, FEM_TOLERANCE)?;
    Ok(Datasets {
        pool,
        ood,
        test_in_dist: spec.test_in_dist,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPaths {
    pub pool: PathBuf,
    pub ood: PathBuf,
}

pub fn dataset_paths(root: &Path) -> DatasetPaths {
    DatasetPaths {
        pool: root.join("data").join("pool"),
        ood: root.join("data").join("ood"),
    }
}

/// Generates, labels and saves both sets under `<root>/data/`.
pub fn build_datasets(spec: &ExperimentSpec, root: &Path) -> Result<(Datasets, DatasetPaths)> {
    let data = generate_datasets(spec)?;
    let paths = dataset_paths(root);
    save_sampleset(&data.pool, &paths.pool)?;
    save_sampleset(&data.ood, &paths.ood)?;
    Ok((data, paths))
}

/// Loads previously built sets.
pub fn load_datasets(spec: &ExperimentSpec, root: &Path) -> Result<Datasets> {
    let paths = dataset_paths(root);
    let pool = crate::fields::load_sampleset(&paths.pool)?;
    let ood = crate::fields::load_sampleset(&paths.ood)?;
    if pool.len() < spec.test_in_dist + spec.m_list.last().copied().unwrap_or(0) {
        return Err(Error::Shape(format!("pool at {} is too small for the spec", paths.pool.display())));
    }
    if pool.grid() != spec.grid() || ood.grid() != spec.grid() {
        return Err(Error::GridMismatch {
            expected: spec.grid_n,
            found: pool.grid().n(),
        });
    }
    Ok(Datasets {
        pool,
        ood,
        test_in_dist: spec.test_in_dist,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleMetrics {
    pub solution_rel_l1: f64,
    pub residual_rel_l1: f64,
    pub mean_abs_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalMetrics {
    pub median_solution: f64,
    pub median_residual: f64,
    pub mean_abs_residual: f64,
    pub per_sample: Vec<SampleMetrics>,
}

/// Metrics of boundary-enforced predictions against a labeled set.
pub fn evaluate_predictions(task: &PdeTask, set: &SampleSet, preds: &[ScalarField2D]) -> Result<EvalMetrics> {
    let truths = set
        .solutions()
        .ok_or_else(|| Error::Empty("evaluation needs a labeled set".into()))?;
    if preds.len() != truths.len() {
        return Err(Error::Shape(format!("{} predictions for {} samples", preds.len(), truths.len())));
    }
    let mut per_sample = Vec::with_capacity(preds.len());
    for ((pred, truth), inputs) in preds.iter().zip(truths).zip(set.inputs()) {
        per_sample.push(SampleMetrics {
            solution_rel_l1: relative_l1(pred, truth)?,
            residual_rel_l1: residual_rel_l1(task, pred, inputs)?,
            mean_abs_residual: mean_abs_residual(task, pred, inputs)?,
        });
    }
    let sol: Vec<f64> = per_sample.iter().map(|m| m.solution_rel_l1).collect();
    let res: Vec<f64> = per_sample.iter().map(|m| m.residual_rel_l1).collect();
    let mean_abs = per_sample.iter().map(|m| m.mean_abs_residual).sum::<f64>() / per_sample.len() as f64;
    Ok(EvalMetrics {
        median_solution: median_over_samples(&sol)?,
        median_residual: median_over_samples(&res)?,
        mean_abs_residual: mean_abs,
        per_sample,
    })
}

pub fn predict_set(model: &NeuralOperator, task: &PdeTask, set: &SampleSet) -> Result<Vec<ScalarField2D>> {
    set.inputs().iter().map(|inputs| predict(model, task, inputs)).collect()
}

/// Forward pass over `set`, then [`evaluate_predictions`].
pub fn evaluate(model: &NeuralOperator, set: &SampleSet, task: &PdeTask) -> Result<EvalMetrics> {
    if set.channels() != task.in_channels() {
        return Err(Error::Shape(format!(
            "{} takes {} channels, test set has {}",
            task.name(),
            task.in_channels(),
            set.channels()
        )));
    }
    let preds = predict_set(model, task, set)?;
    evaluate_predictions(task, set, &preds)
}

/// Predictions stored as a dataset whose solutions are the model outputs.
pub fn save_predictions(set: &SampleSet, preds: Vec<ScalarField2D>, dir: impl AsRef<Path>) -> Result<()> {
    let out = SampleSet::new(
        set.grid(),
        set.inputs().to_vec(),
        Some(preds),
        "predictions",
        json!({ "source_checksum": set.checksum() }),
        set.manifest().seed,
    )?;
    save_sampleset(&out, dir)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub config: Configuration,
    pub m: usize,
    pub regime: Regime,
    pub median_solution: f64,
    pub median_residual: f64,
    pub mean_abs_residual: f64,
    pub wall_time_s: f64,
    pub status: String,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn failed(config: Configuration, m: usize, regime: Regime, reason: &str) -> Self {
        let reason: String = reason
            .chars()
            .map(|c| if c == ',' || c == '\n' { ';' } else { c })
            .collect();
        ResultRow {
            config,
            m,
            regime,
            median_solution: f64::NAN,
            median_residual: f64::NAN,
            mean_abs_residual: f64::NAN,
            wall_time_s: 0.0,
            status: format!("failed: {reason}"),
        }
    }
}

pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut rows: Vec<&ResultRow> = rows.iter().collect();
    rows.sort_by_key(|r| (r.config, r.m, r.regime));
    let mut s = format!("{SCALING_SCHEMA}\n{SCALING_HEADER}\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{:e},{:e},{:e},{:e},{}",
            r.config.name(),
            r.m,
            r.regime.name(),
            r.median_solution,
            r.median_residual,
            r.mean_abs_residual,
            r.wall_time_s,
            r.status
        )
        .expect("string write");
    }
    s
}

/// Parses a scaling CSV written by [`rows_to_csv`].
pub fn parse_scaling_csv(text: &str) -> Result<Vec<ResultRow>> {
    let malformed = |detail: String| Error::Malformed {
        what: "scaling csv".into(),
        detail,
    };
    let mut lines = text.lines();
    if lines.next() != Some(SCALING_SCHEMA) || lines.next() != Some(SCALING_HEADER) {
        return Err(malformed("missing schema or header line".into()));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| malformed(format!("{s:?}: {e}")));
    lines
        .map(|line| {
            let f: Vec<&str> = line.splitn(8, ',').collect();
            if f.len() != 8 {
                return Err(malformed(format!("row {line:?}")));
            }
            Ok(ResultRow {
                config: f[0].parse()?,
                m: f[1].parse().map_err(|e| malformed(format!("M {:?}: {e}", f[1])))?,
                regime: match f[2] {
                    "interp" => Regime::Interp,
                    "extrap" => Regime::Extrap,
                    other => return Err(malformed(format!("regime {other:?}"))),
                },
                median_solution: num(f[3])?,
                median_residual: num(f[4])?,
                mean_abs_residual: num(f[5])?,
                wall_time_s: num(f[6])?,
                status: f[7].to_string(),
            })
        })
        .collect()
}

/// Training record of one sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRun {
    pub config: Configuration,
    pub m: usize,
    /// Pool indices (including the reserved offset) seen in training batches.
    pub train_indices: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingOutcome {
    pub rows: Vec<ResultRow>,
    pub runs: Vec<CellRun>,
}

impl ScalingOutcome {
    pub fn row(&self, config: Configuration, m: usize, regime: Regime) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.config == config && r.m == m && r.regime == regime)
    }

    pub fn csv(&self) -> String {
        rows_to_csv(&self.rows)
    }
}

/// Pretrains per the spec, or loads `pretrained_checkpoint` when set.
pub fn obtain_pretrained(spec: &ExperimentSpec) -> Result<Checkpoint> {
    match &spec.pretrained_checkpoint {
        Some(path) => crate::operator::load_checkpoint(path),
        None => Ok(pretrain(&spec.pretrain_config())?.0),
    }
}

/// Runs every configuration x M cell; divergent cells become failure rows.
/// When `out` is given, per-cell training logs are written under
/// `<out>/logs/`.
pub fn run_scaling(spec: &ExperimentSpec, data: &Datasets, pretrained: &Checkpoint, out: Option<&Path>) -> Result<ScalingOutcome> {
    spec.validate()?;
    let tests = [(Regime::Interp, data.in_dist_test()?), (Regime::Extrap, data.ood.clone())];
    if let Some(dir) = out {
        std::fs::create_dir_all(dir.join("logs")).map_err(|e| Error::io(dir, e))?;
    }
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for &config in &spec.configurations {
        for &m in &spec.m_list {
            let train_set = data.training(m)?;
            let train_cfg = spec.train_config(config, m);
            let start = if config.pretrained() {
                Start::Pretrained {
                    from: pretrained,
                    output_scale: spec.operator.output_scale,
                }
            } else {
                Start::Scratch(spec.operator)
            };
            let clock = Instant::now();
            let outcome = finetune(start, &spec.task, &train_set, &train_cfg);
            let elapsed = clock.elapsed().as_secs_f64();
            let (ckpt, log) = match outcome {
                Ok(v) => v,
                Err(e) => {
                    for (regime, _) in &tests {
                        rows.push(ResultRow::failed(config, m, *regime, &e.to_string()));
                    }
                    continue;
                }
            };
            if let Some(dir) = out {
                log.write_csv(dir.join("logs").join(format!("{}_M{m}.csv", config.name())))?;
            }
            runs.push(CellRun {
                config,
                m,
                train_indices: log.used_indices().into_iter().map(|i| i + data.test_in_dist).collect(),
            });
            for (regime, set) in &tests {
                let row = match evaluate(&ckpt.model, set, &spec.task) {
                    Ok(ev) => ResultRow {
                        config,
                        m,
                        regime: *regime,
                        median_solution: ev.median_solution,
                        median_residual: ev.median_residual,
                        mean_abs_residual: ev.mean_abs_residual,
                        wall_time_s: if spec.record_wall_time { elapsed } else { 0.0 },
                        status: "ok".into(),
                    },
                    Err(e) => ResultRow::failed(config, m, *regime, &e.to_string()),
                };
                rows.push(row);
            }
        }
    }
    rows.sort_by_key(|r| (r.config, r.m, r.regime));
    Ok(ScalingOutcome { rows, runs })
}

/// Full pipeline: datasets, pretrained checkpoint, sweep, `scaling.csv`.
pub fn run_experiment(spec: &ExperimentSpec, out: &Path) -> Result<ScalingOutcome> {
    spec.validate()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let (data, _) = build_datasets(spec, out)?;
    let pretrained = obtain_pretrained(spec)?;
    save_checkpoint(&pretrained, out.join("pretrained.ckpt"))?;
    let outcome = run_scaling(spec, &data, &pretrained, Some(out))?;
    let csv = out.join("scaling.csv");
    std::fs::write(&csv, outcome.csv()).map_err(|e| Error::io(&csv, e))?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub n: usize,
    pub sample: usize,
    pub mean_abs_residual: f64,
    pub residual_rel_l1: f64,
}

/// Finite-difference residual of reference solutions for the same seeded
/// inputs on several grids.
pub fn audit_residual(task: &PdeTask, grids: &[usize], count: usize, seed: u64) -> Result<Vec<AuditRow>> {
    let mut rows = Vec::new();
    for &n in grids {
        let grid = Grid::new(n)?;
        for k in 0..count {
            let sample_seed = derive_seed(seed, k as u64);
            let inputs = task.training_family().sample(grid, sample_seed)?;
            let (u, _) = solve_task(task, grid, &inputs, FEM_TOLERANCE * 1e-2).map_err(|e| Error::SampleFailed {
                index: k,
                source: Box::new(e),
            })?;
            rows.push(AuditRow {
                n,
                sample: k,
                mean_abs_residual: mean_abs_residual(task, &u, &inputs)?,
                residual_rel_l1: residual_rel_l1(task, &u, &inputs)?,
            });
        }
    }
    Ok(rows)
}

/// Per-sample ratio of mean |r| between consecutive grids.
pub fn audit_ratios(rows: &[AuditRow], coarse: usize, fine: usize) -> Vec<f64> {
    let pick = |n: usize| rows.iter().filter(move |r| r.n == n);
    pick(coarse)
        .filter_map(|c| {
            pick(fine)
                .find(|f| f.sample == c.sample)
                .map(|f| c.mean_abs_residual / f.mean_abs_residual)
        })
        .collect()
}

pub fn audit_to_csv(rows: &[AuditRow]) -> String {
    let mut s = String::from("n,sample,mean_abs_residual,residual_rel_l1\n");
    for r in rows {
        writeln!(s, "{},{},{:e},{:e}", r.n, r.sample, r.mean_abs_residual, r.residual_rel_l1).expect("string write");
    }
    s
}

/// Generates a labeled set and writes it with its solve log.
pub fn generate_to_dir(task: &PdeTask, grid: Grid, count: usize, seed: u64, dir: &Path) -> Result<SampleSet> {
    let inputs = gen_input_set(grid, &task.training_family(), count, seed)?;
    let (set, reports) = label_sampleset(task, &inputs, FEM_TOLERANCE)?;
    save_sampleset(&set, dir)?;
    write_solve_log(dir.join("solve.log"), &reports)?;
    Ok(set)
}

/// Generates the out-of-distribution test set of `task` and writes it.
pub fn generate_ood_to_dir(task: &PdeTask, grid: Grid, count: usize, seed: u64, dir: &Path) -> Result<SampleSet> {
    let (set, reports) = label_sampleset(task, &ood_inputs(task, grid, count, seed)?, FEM_TOLERANCE)?;
    save_sampleset(&set, dir)?;
    write_solve_log(dir.join("solve.log"), &reports)?;
    Ok(set)
}

/// Unlabeled extrapolation inputs: the nine extreme source families for
/// Poisson, wavy-stripe media for Helmholtz.
pub fn ood_inputs(task: &PdeTask, grid: Grid, count: usize, seed: u64) -> Result<SampleSet> {
    match task {
        PdeTask::Poisson => gen_ood_testset(grid, count, seed),
        PdeTask::Helmholtz { .. } => {
            let family = task.extrapolation_families().remove(0);
            gen_input_set(grid, &family, count, seed)
        }
    }
}
