//! Losses, the Adam update with per-subset learning rates, surrogate
//! pre-training and the fine-tuning / from-scratch training loop.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{median_over_samples, relative_l1, Grid, SampleSet, ScalarField2D};
use crate::operator::{Checkpoint, CheckpointMeta, NeuralOperator, OperatorConfig, Subset};
use crate::residual::{enforce_boundary, pde_residual, residual_loss_grad, PdeTask};
use crate::rng::{derive_seed, derive_seed2, rng_from_seed};
use crate::sources::{gen_gaussian_blobs, BlobParams, InputFamily};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    Data,
    Physics,
    Hybrid { data: f64, physics: f64 },
}

impl LossMode {
    /// Equal-weight hybrid.
    pub fn hybrid() -> Self {
        LossMode::Hybrid {
            data: 1.0,
            physics: 1.0,
        }
    }

    /// `(data weight, physics weight)`.
    pub fn weights(&self) -> (f64, f64) {
        match *self {
            LossMode::Data => (1.0, 0.0),
            LossMode::Physics => (0.0, 1.0),
            LossMode::Hybrid { data, physics } => (data, physics),
        }
    }

    pub fn needs_solutions(&self) -> bool {
        self.weights().0 > 0.0
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossMode::Data => "data",
            LossMode::Physics => "physics",
            LossMode::Hybrid { .. } => "hybrid",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (d, p) = self.weights();
        if !(d >= 0.0 && p >= 0.0 && d.is_finite() && p.is_finite()) || d + p == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "hybrid weights must be non-negative and not both zero, got ({d}, {p})"
            )));
        }
        Ok(())
    }
}

/// Unlabeled inputs added to every batch and trained under physics loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Augmentation {
    #[default]
    Off,
    OnTheFly {
        families: Vec<InputFamily>,
        per_batch: usize,
    },
}

impl Augmentation {
    /// One draw per family per batch.
    pub fn each_of(families: Vec<InputFamily>) -> Self {
        let per_batch = families.len();
        Augmentation::OnTheFly { families, per_batch }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub mode: LossMode,
    pub batch_size: usize,
    pub steps: usize,
    pub lr_backbone: f64,
    pub lr_embed: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub augmentation: Augmentation,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: LossMode::hybrid(),
            batch_size: 8,
            steps: 500,
            lr_backbone: 1e-3,
            lr_embed: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            augmentation: Augmentation::Off,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.mode.validate()?;
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.lr_backbone >= 0.0 && self.lr_embed >= 0.0) {
            return bad("learning rates must be non-negative");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return bad("moment coefficients must lie in [0, 1) and eps > 0");
        }
        if let Augmentation::OnTheFly { families, per_batch } = &self.augmentation {
            if families.is_empty() || *per_batch == 0 {
                return bad("augmentation needs at least one family and one draw per batch");
            }
            if self.mode == LossMode::Data {
                return bad("augmented inputs carry no solutions; data mode cannot use them");
            }
        }
        Ok(())
    }

    pub fn optimizer_name(&self) -> String {
        format!("adam(beta1={}, beta2={}, eps={:e})", self.beta1, self.beta2, self.eps)
    }
}

/// One batch member; `solution` is present for labeled samples.
#[derive(Debug, Clone, Copy)]
pub struct BatchItem<'a> {
    pub inputs: &'a [ScalarField2D],
    pub solution: Option<&'a ScalarField2D>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub data: f64,
    pub physics: f64,
    pub total: f64,
}

/// Mean relative L1 over a batch of (boundary-enforced) predictions.
pub fn data_loss(preds: &[ScalarField2D], truths: &[ScalarField2D]) -> Result<f64> {
    if preds.is_empty() || preds.len() != truths.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} solutions",
            preds.len(),
            truths.len()
        )));
    }
    let mut total = 0.0;
    for (p, t) in preds.iter().zip(truths) {
        total += relative_l1(p, t)?;
    }
    Ok(total / preds.len() as f64)
}

/// Losses of raw model outputs on a batch and, optionally, `∂total/∂output`
/// per item.
///
/// Data loss averages over labeled items and is taken after boundary
/// enforcement; physics loss averages over every item.
pub fn batch_loss(
    task: &PdeTask,
    mode: LossMode,
    outputs: &[ScalarField2D],
    batch: &[BatchItem<'_>],
    with_grad: bool,
) -> Result<(LossParts, Vec<ScalarField2D>)> {
    if batch.is_empty() || outputs.len() != batch.len() {
        return Err(Error::Shape(format!("{} outputs for {} batch items", outputs.len(), batch.len())));
    }
    let (wd, wp) = mode.weights();
    let labeled = batch.iter().filter(|b| b.solution.is_some()).count();
    if wd > 0.0 && labeled == 0 {
        return Err(Error::Empty(format!("{} loss needs labeled samples", mode.name())));
    }
    let mut parts = LossParts::default();
    let mut grads = Vec::new();
    for (raw, item) in outputs.iter().zip(batch) {
        task.check_inputs(raw, item.inputs)?;
        let mut g = vec![0.0; raw.len()];
        if let Some(truth) = item.solution {
            let boundary = task.boundary_for(item.inputs);
            let pred = enforce_boundary(raw, boundary);
            let norm = truth.l1_norm();
            parts.data += relative_l1(&pred, truth)? / labeled as f64;
            if with_grad && wd > 0.0 {
                let c = wd / (labeled as f64 * norm);
                let n = raw.side();
                for (k, (p, t)) in pred.values().iter().zip(truth.values()).enumerate() {
                    let (i, j) = (k / n, k % n);
                    if i > 0 && j > 0 && i < n - 1 && j < n - 1 {
                        if p != t {
                            g[k] = c * (p - t).signum();
                        }
                    }
                }
            }
        }
        let count = batch.len() as f64;
        let (phys, pg) = residual_loss_grad(task, raw, item.inputs, wp / count)?;
        parts.physics += phys / count;
        if with_grad && wp > 0.0 {
            for (gk, v) in g.iter_mut().zip(pg.values()) {
                *gk += v;
            }
        }
        if with_grad {
            grads.push(ScalarField2D::from_raw_unchecked(raw.side(), raw.h(), g));
        }
    }
    parts.total = wd * parts.data + wp * parts.physics;
    Ok((parts, grads))
}

/// `total_loss(mode, batch)` without gradients.
pub fn total_loss(task: &PdeTask, mode: LossMode, outputs: &[ScalarField2D], batch: &[BatchItem<'_>]) -> Result<LossParts> {
    Ok(batch_loss(task, mode, outputs, batch, false)?.0)
}

/// Adam with a learning rate per coordinate. Coordinates whose rate is zero
/// are skipped entirely and stay bitwise unchanged.
#[derive(Debug, Clone)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(len: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            beta1,
            beta2,
            eps,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64], lr: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for k in 0..params.len() {
            if lr[k] == 0.0 {
                continue;
            }
            let g = grad[k];
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
            let mh = self.m[k] / c1;
            let vh = self.v[k] / c2;
            params[k] -= lr[k] * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub data_loss: f64,
    pub physics_loss: f64,
    pub total_loss: f64,
    pub grad_norm: f64,
    /// Pool indices of the labeled part of the batch.
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<StepRecord>,
    pub optimizer: String,
    pub checkpoint: Option<std::path::PathBuf>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,data_loss,physics_loss,total_loss,grad_norm\n");
        for r in &self.records {
            writeln!(s, "{},{:e},{:e},{:e},{:e}", r.step, r.data_loss, r.physics_loss, r.total_loss, r.grad_norm)
                .expect("string write");
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_csv()).map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn last(&self) -> Option<&StepRecord> {
        self.records.last()
    }

    /// Every pool index that appeared in a training batch.
    pub fn used_indices(&self) -> std::collections::BTreeSet<usize> {
        self.records.iter().flat_map(|r| r.indices.iter().copied()).collect()
    }
}

/// Model plus optimizer state; one [`Trainer::step`] per mini-batch.
pub struct Trainer {
    pub task: PdeTask,
    pub mode: LossMode,
    model: NeuralOperator,
    adam: Adam,
    lr: Vec<f64>,
    steps_done: usize,
}

impl Trainer {
    pub fn new(model: NeuralOperator, task: PdeTask, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let lr = model
            .layout()
            .subset_mask()
            .into_iter()
            .map(|s| match s {
                Subset::Backbone => config.lr_backbone,
                Subset::Embedding => config.lr_embed,
            })
            .collect();
        let len = model.params().len();
        Ok(Trainer {
            task,
            mode: config.mode,
            model,
            adam: Adam::new(len, config.beta1, config.beta2, config.eps),
            lr,
            steps_done: 0,
        })
    }

    pub fn model(&self) -> &NeuralOperator {
        &self.model
    }

    pub fn into_model(self) -> NeuralOperator {
        self.model
    }

    /// Loss parts and gradient at the current parameters.
    pub fn loss_and_gradient(&self, batch: &[BatchItem<'_>]) -> Result<(LossParts, Vec<f64>)> {
        let mut tapes = Vec::with_capacity(batch.len());
        let mut outputs = Vec::with_capacity(batch.len());
        for item in batch {
            let tape = self.model.forward_tape(item.inputs)?;
            outputs.push(self.model.tape_output(&tape));
            tapes.push(tape);
        }
        let (parts, d_outs) = batch_loss(&self.task, self.mode, &outputs, batch, true)?;
        if !parts.total.is_finite() {
            return Err(Error::Diverged(format!("loss {} at step {}", parts.total, self.steps_done)));
        }
        let mut grad = vec![0.0; self.model.params().len()];
        for (tape, d) in tapes.iter().zip(&d_outs) {
            self.model.backward(tape, d, &mut grad)?;
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged(format!("gradient at step {}", self.steps_done)));
        }
        Ok((parts, grad))
    }

    /// One Adam update; the record holds the losses before the update.
    pub fn step(&mut self, batch: &[BatchItem<'_>], indices: Vec<usize>) -> Result<StepRecord> {
        let (parts, grad) = self.loss_and_gradient(batch)?;
        self.adam.update(self.model.params_mut(), &grad, &self.lr);
        if self.model.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged(format!("parameters after step {}", self.steps_done)));
        }
        let record = StepRecord {
            step: self.steps_done,
            data_loss: parts.data,
            physics_loss: parts.physics,
            total_loss: parts.total,
            grad_norm: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
            indices,
        };
        self.steps_done += 1;
        Ok(record)
    }
}

/// Where a training run starts.
#[derive(Debug, Clone, Copy)]
pub enum Start<'a> {
    /// Transfer the backbone, re-draw lifting and projection, and use the
    /// task's own output scale.
    Pretrained { from: &'a Checkpoint, output_scale: f64 },
    /// Fresh initialization of the given architecture.
    Scratch(OperatorConfig),
}

/// Draws pool indices: epoch shuffles when the pool covers a batch,
/// otherwise uniform draws with replacement.
struct Sampler {
    pool: usize,
    batch: usize,
    order: Vec<usize>,
    cursor: usize,
}

impl Sampler {
    fn new(pool: usize, batch: usize) -> Self {
        Sampler {
            pool,
            batch,
            order: (0..pool).collect(),
            cursor: pool,
        }
    }

    fn next(&mut self, rng: &mut impl Rng) -> Vec<usize> {
        if self.pool == 0 {
            return Vec::new();
        }
        if self.pool < self.batch {
            return (0..self.batch).map(|_| rng.gen_range(0..self.pool)).collect();
        }
        let mut out = Vec::with_capacity(self.batch);
        while out.len() < self.batch {
            if self.cursor == self.pool {
                self.order.shuffle(rng);
                self.cursor = 0;
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        out
    }
}

/// Fine-tunes a pretrained operator on `pool`, or trains from scratch.
///
/// In physics mode the pool's solutions are ignored; an empty pool is legal
/// there and batches are then filled with fresh training-family inputs
/// (or only augmentation draws when augmentation is on).
pub fn finetune(start: Start<'_>, task: &PdeTask, pool: &SampleSet, config: &TrainConfig) -> Result<(Checkpoint, TrainLog)> {
    config.validate()?;
    let grid = pool.grid();
    if !pool.is_empty() && pool.channels() != task.in_channels() {
        return Err(Error::Shape(format!(
            "{} takes {} input channels, pool has {}",
            task.name(),
            task.in_channels(),
            pool.channels()
        )));
    }
    if config.mode.needs_solutions() {
        if pool.is_empty() {
            return Err(Error::Empty(format!("{} mode needs labeled samples", config.mode.name())));
        }
        if !pool.has_solutions() {
            return Err(Error::Empty(format!("{} mode needs solutions in the pool", config.mode.name())));
        }
    }
    let init_seed = derive_seed(config.seed, 1);
    let (model, tags) = match start {
        Start::Pretrained { from: ckpt, output_scale } => {
            let cfg = OperatorConfig {
                in_channels: task.in_channels(),
                output_scale,
                ..*ckpt.config()
            };
            (NeuralOperator::transfer_init(&ckpt.model, cfg, init_seed)?, vec!["finetuned".to_string()])
        }
        Start::Scratch(cfg) => {
            if cfg.in_channels != task.in_channels() {
                return Err(Error::Shape(format!(
                    "{} takes {} input channels, config has {}",
                    task.name(),
                    task.in_channels(),
                    cfg.in_channels
                )));
            }
            (NeuralOperator::init(cfg, init_seed)?, vec!["scratch".to_string()])
        }
    };
    model.config().validate_for_grid(grid.n())?;
    let mut trainer = Trainer::new(model, *task, config)?;
    let use_labels = config.mode.needs_solutions() || pool.has_solutions();
    let mut sampler = Sampler::new(pool.len(), config.batch_size);
    let mut batch_rng = rng_from_seed(derive_seed(config.seed, 2));
    let aug_seed = derive_seed(config.seed, 3);
    let fresh_seed = derive_seed(config.seed, 4);
    let mut log = TrainLog {
        records: Vec::with_capacity(config.steps),
        optimizer: config.optimizer_name(),
        checkpoint: None,
    };
    for step in 0..config.steps {
        let indices = sampler.next(&mut batch_rng);
        let mut extra: Vec<Vec<ScalarField2D>> = Vec::new();
        match &config.augmentation {
            Augmentation::OnTheFly { families, per_batch } => {
                for j in 0..*per_batch {
                    let family = &families[j % families.len()];
                    extra.push(family.sample(grid, derive_seed2(aug_seed, step as u64, j as u64))?);
                }
            }
            Augmentation::Off if pool.is_empty() => {
                let family = task.training_family();
                for j in 0..config.batch_size {
                    extra.push(family.sample(grid, derive_seed2(fresh_seed, step as u64, j as u64))?);
                }
            }
            Augmentation::Off => {}
        }
        let mut batch: Vec<BatchItem<'_>> = indices
            .iter()
            .map(|&i| BatchItem {
                inputs: pool.input(i),
                solution: if use_labels { pool.solution(i) } else { None },
            })
            .collect();
        batch.extend(extra.iter().map(|inputs| BatchItem {
            inputs,
            solution: None,
        }));
        let record = trainer.step(&batch, indices)?;
        log.records.push(record);
    }
    let meta = CheckpointMeta {
        seed: config.seed,
        steps: config.steps,
        loss_mode: config.mode.name().to_string(),
        tags,
        grid_n: Some(grid.n()),
        task: Some(task.name().to_string()),
        optimizer: Some(log.optimizer.clone()),
    };
    Ok((Checkpoint::new(trainer.into_model(), meta), log))
}

/// Boundary-enforced prediction of `model` for one sample.
pub fn predict(model: &NeuralOperator, task: &PdeTask, inputs: &[ScalarField2D]) -> Result<ScalarField2D> {
    let raw = model.forward(inputs)?;
    task.check_inputs(&raw, inputs)?;
    Ok(enforce_boundary(&raw, task.boundary_for(inputs)))
}

/// Relative L1 residual of a boundary-enforced prediction.
pub fn prediction_residual(task: &PdeTask, pred: &ScalarField2D, inputs: &[ScalarField2D]) -> Result<ScalarField2D> {
    pde_residual(task, pred, inputs)
}

/// Periodic Gaussian smoothing `exp(-2π² s² |κ|²)` applied in Fourier space.
pub fn gaussian_smooth(field: &ScalarField2D, width: f64) -> ScalarField2D {
    let n = field.side();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut data: Vec<Complex64> = field.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let transform = |data: &mut Vec<Complex64>, plan: &std::sync::Arc<dyn rustfft::Fft<f64>>| {
        plan.process(data);
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = data[i * n + j];
            }
            plan.process(&mut col);
            for i in 0..n {
                data[i * n + j] = col[i];
            }
        }
    };
    transform(&mut data, &fwd);
    let signed = |k: usize| if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    let c = 2.0 * std::f64::consts::PI.powi(2) * width * width;
    for ky in 0..n {
        for kx in 0..n {
            let k2 = signed(ky).powi(2) + signed(kx).powi(2);
            data[ky * n + kx] *= (-c * k2).exp() / (n * n) as f64;
        }
    }
    transform(&mut data, &inv);
    let values = data.iter().map(|z| z.re).collect();
    ScalarField2D::from_raw_unchecked(n, field.h(), values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub grid_n: usize,
    pub operator: OperatorConfig,
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Smoothing length in unit-square coordinates.
    pub smoothing: f64,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            grid_n: 64,
            operator: OperatorConfig::default(),
            steps: 1000,
            batch_size: 8,
            lr: 1e-3,
            smoothing: 0.05,
            seed: 0,
        }
    }
}

/// One surrogate sample: a blob field and its smoothed counterpart.
pub fn surrogate_pair(grid: Grid, smoothing: f64, seed: u64) -> Result<(ScalarField2D, ScalarField2D)> {
    let f = gen_gaussian_blobs(grid, &BlobParams::default(), seed)?;
    let target = gaussian_smooth(&f, smoothing);
    Ok((f, target))
}

/// Data-driven training on the smoothing surrogate with fresh samples every
/// step. The relative L1 loss is taken on the raw output.
pub fn pretrain(config: &PretrainConfig) -> Result<(Checkpoint, TrainLog)> {
    let grid = Grid::new(config.grid_n)?;
    config.operator.validate_for_grid(grid.n())?;
    if config.operator.in_channels != 1 {
        return Err(Error::InvalidParameter("the surrogate task has one input channel".into()));
    }
    if config.batch_size == 0 || !(config.lr >= 0.0) || !(config.smoothing > 0.0) {
        return Err(Error::InvalidParameter(format!("invalid pretraining config {config:?}")));
    }
    let model = NeuralOperator::init(config.operator, derive_seed(config.seed, 1))?;
    let train_cfg = TrainConfig {
        mode: LossMode::Data,
        batch_size: config.batch_size,
        lr_backbone: config.lr,
        lr_embed: config.lr,
        seed: config.seed,
        ..TrainConfig::default()
    };
    let lr = vec![config.lr; model.params().len()];
    let mut model = model;
    let mut adam = Adam::new(lr.len(), train_cfg.beta1, train_cfg.beta2, train_cfg.eps);
    let sample_seed = derive_seed(config.seed, 5);
    let mut log = TrainLog {
        records: Vec::with_capacity(config.steps),
        optimizer: train_cfg.optimizer_name(),
        checkpoint: None,
    };
    for step in 0..config.steps {
        let mut grad = vec![0.0; lr.len()];
        let mut loss = 0.0;
        for j in 0..config.batch_size {
            let (f, target) = surrogate_pair(grid, config.smoothing, derive_seed2(sample_seed, step as u64, j as u64))?;
            let (l, g) = model.gradient(&[f], |out| {
                let norm = target.l1_norm();
                let l = relative_l1(out, &target)?;
                let d = ScalarField2D::from_raw_unchecked(
                    out.side(),
                    out.h(),
                    out.values()
                        .iter()
                        .zip(target.values())
                        .map(|(p, t)| if p == t { 0.0 } else { (p - t).signum() / norm })
                        .collect(),
                );
                Ok((l, d))
            })?;
            loss += l / config.batch_size as f64;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b / config.batch_size as f64;
            }
        }
        adam.update(model.params_mut(), &grad, &lr);
        if model.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged(format!("pretraining parameters at step {step}")));
        }
        log.records.push(StepRecord {
            step,
            data_loss: loss,
            physics_loss: 0.0,
            total_loss: loss,
            grad_norm: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
            indices: Vec::new(),
        });
    }
    let meta = CheckpointMeta {
        seed: config.seed,
        steps: config.steps,
        loss_mode: "data".into(),
        tags: vec!["pretrained".into()],
        grid_n: Some(grid.n()),
        task: Some("smoothing_surrogate".into()),
        optimizer: Some(log.optimizer.clone()),
    };
    Ok((Checkpoint::new(model, meta), log))
}

/// Median relative L1 of the raw output on `count` held-out surrogate
/// samples drawn from `seed`.
pub fn surrogate_error(model: &NeuralOperator, grid: Grid, smoothing: f64, count: usize, seed: u64) -> Result<f64> {
    let mut errors = Vec::with_capacity(count);
    for k in 0..count {
        let (f, target) = surrogate_pair(grid, smoothing, derive_seed(seed, k as u64))?;
        errors.push(relative_l1(&model.forward(&[f])?, &target)?);
    }
    median_over_samples(&errors)
}
