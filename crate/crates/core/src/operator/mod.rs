//! Compact Fourier neural operator with a hand-written reverse pass.
//!
//! Layout of one forward pass on an `n x n` node grid:
//!
//! ```text
//! input (c channels) ++ [x, y]  --lifting-->  h0 (w channels)
//! h_{l+1} = gelu(Spectral_l(h_l) + W_l h_l + b_l)      l = 0..L
//! output = s · (q · h_L + q0)
//! ```
//!
//! `s` is a fixed output scale from the config, not a trained parameter; it
//! puts targets of very different magnitude within reach of the optimizer.
//! The two coordinate channels let the otherwise translation-equivariant
//! network see where the boundary is. Parameters live in one flat vector
//! whose blocks are tagged [`Subset::Backbone`] (spectral and bypass weights)
//! or [`Subset::Embedding`] (lifting and projection).

mod checkpoint;
pub mod spectral;

use ndarray::{linalg::general_mat_mul, Array2, ArrayView2, Axis};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::ScalarField2D;
use crate::residual::PdeTask;
use crate::rng::rng_from_seed;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, CHECKPOINT_VERSION};

/// Extra input channels holding the node coordinates.
pub const COORD_CHANNELS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorConfig {
    pub in_channels: usize,
    pub width: usize,
    pub layers: usize,
    pub modes: usize,
    /// Fixed factor applied to the projected output.
    #[serde(default = "unit_scale")]
    pub output_scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig {
            in_channels: 1,
            width: 32,
            layers: 4,
            modes: 12,
            output_scale: 1.0,
        }
    }
}

impl OperatorConfig {
    /// Default sizes with the channel count and output scale of `task`.
    pub fn for_task(task: &PdeTask) -> Self {
        OperatorConfig {
            in_channels: task.in_channels(),
            output_scale: task.output_scale(),
            ..OperatorConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.output_scale.is_finite() && self.output_scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "output scale must be positive, got {}",
                self.output_scale
            )));
        }
        if self.in_channels == 0 || self.width == 0 || self.layers == 0 || self.modes == 0 {
            return Err(Error::InvalidParameter(format!(
                "operator dimensions must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Also checks `m ≤ ⌊n/2⌋` for the grid side `n`.
    pub fn validate_for_grid(&self, n: usize) -> Result<()> {
        self.validate()?;
        if self.modes > n / 2 {
            return Err(Error::InvalidParameter(format!(
                "{} modes exceed half of grid side {n}",
                self.modes
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        let (c, w, m) = (self.in_channels + COORD_CHANNELS, self.width, self.modes);
        w * c + w + self.layers * (2 * spectral::mode_count(m) * w * w + w * w + w) + w + 1
    }

    /// Same backbone shapes, so backbone weights can be transferred.
    pub fn backbone_compatible(&self, other: &OperatorConfig) -> bool {
        self.width == other.width && self.layers == other.layers && self.modes == other.modes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    /// Spectral and bypass weights, transferred from a pretrained model.
    Backbone,
    /// Lifting and projection, re-drawn on transfer.
    Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub offset: usize,
    pub len: usize,
    pub subset: Subset,
    /// Uniform initialization half-width.
    pub init_scale: f64,
}

impl ParamBlock {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}


/// Subset index map of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub blocks: Vec<ParamBlock>,
}

impl Layout {
    pub fn new(config: &OperatorConfig) -> Self {
        let (c, w, m) = (config.in_channels + COORD_CHANNELS, config.width, config.modes);
        let mut blocks = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, len: usize, subset: Subset, init_scale: f64| {
            blocks.push(ParamBlock {
                name,
                offset,
                len,
                subset,
                init_scale,
            });
            offset += len;
        };
        let lift = 1.0 / (c as f64).sqrt();
        let hidden = 1.0 / (w as f64).sqrt();
        push("lifting.weight".into(), w * c, Subset::Embedding, lift);
        push("lifting.bias".into(), w, Subset::Embedding, lift);
        for l in 0..config.layers {
            let spec = 1.0 / (w * m) as f64;
            push(format!("layer{l}.spectral"), 2 * spectral::mode_count(m) * w * w, Subset::Backbone, spec);
            push(format!("layer{l}.bypass.weight"), w * w, Subset::Backbone, hidden);
            push(format!("layer{l}.bypass.bias"), w, Subset::Backbone, hidden);
        }
        push("projection.weight".into(), w, Subset::Embedding, hidden);
        push("projection.bias".into(), 1, Subset::Embedding, hidden);
        Layout { blocks }
    }

    pub fn len(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.offset + b.len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn block(&self, name: &str) -> Option<&ParamBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    /// Subset tag of every coordinate.
    pub fn subset_mask(&self) -> Vec<Subset> {
        let mut mask = Vec::with_capacity(self.len());
        for b in &self.blocks {
            mask.extend(std::iter::repeat(b.subset).take(b.len));
        }
        mask
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

// exp-based tanh; absolute error stays near machine epsilon and it is
// several times cheaper than libm tanh, which dominated the step cost.
fn tanh(u: f64) -> f64 {
    1.0 - 2.0 / ((2.0 * u).exp() + 1.0)
}

/// GELU value and derivative sharing one tanh evaluation.
fn gelu_with_grad(z: f64) -> (f64, f64) {
    let t = tanh(GELU_C * (z + GELU_A * z * z * z));
    let g = 0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * z * z);
    (0.5 * z * (1.0 + t), g)
}

/// Operator weights: a config plus its flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralOperator {
    config: OperatorConfig,
    params: Vec<f64>,
}

struct LayerTape {
    input: Array2<f64>,
    spectrum: Vec<Complex64>,
    // activation derivative at the pre-activation
    dact: Array2<f64>,
}

/// Intermediate values of one forward pass, consumed by [`NeuralOperator::backward`].
pub struct Tape {
    n: usize,
    h: f64,
    lifted_input: Array2<f64>,
    layers: Vec<LayerTape>,
    last: Array2<f64>,
}

impl Tape {
    pub fn side(&self) -> usize {
        self.n
    }
}

impl NeuralOperator {
    /// Seeded initialization, drawn block by block in layout order.
    pub fn init(config: OperatorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        let mut rng = rng_from_seed(seed);
        let mut params = vec![0.0; layout.len()];
        for b in &layout.blocks {
            for p in &mut params[b.range()] {
                *p = rng.gen_range(-b.init_scale..b.init_scale);
            }
        }
        Ok(NeuralOperator { config, params })
    }

    pub fn zeros(config: OperatorConfig) -> Result<Self> {
        config.validate()?;
        Ok(NeuralOperator {
            config,
            params: vec![0.0; config.param_count()],
        })
    }

    pub fn from_params(config: OperatorConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if params.len() != config.param_count() {
            return Err(Error::Shape(format!(
                "config needs {} parameters, got {}",
                config.param_count(),
                params.len()
            )));
        }
        if let Some(k) = params.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(k));
        }
        Ok(NeuralOperator { config, params })
    }

    /// Backbone copied from `source`, embedding drawn fresh from `seed`.
    pub fn transfer_init(source: &NeuralOperator, config: OperatorConfig, seed: u64) -> Result<Self> {
        if !source.config.backbone_compatible(&config) {
            return Err(Error::Shape(format!(
                "backbone of {:?} does not fit {:?}",
                source.config, config
            )));
        }
        let mut model = NeuralOperator::init(config, seed)?;
        let src_layout = source.layout();
        for b in model.layout().blocks.iter().filter(|b| b.subset == Subset::Backbone) {
            let src = src_layout.block(&b.name).expect("compatible backbone");
            model.params[b.range()].copy_from_slice(&source.params[src.range()]);
        }
        Ok(model)
    }

    pub fn config(&self) -> &OperatorConfig {
        &self.config
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&self.config)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn into_params(self) -> Vec<f64> {
        self.params
    }

    pub fn forward(&self, inputs: &[ScalarField2D]) -> Result<ScalarField2D> {
        let tape = self.forward_tape(inputs)?;
        Ok(self.output_of(&tape))
    }

    fn check_inputs(&self, inputs: &[ScalarField2D]) -> Result<(usize, f64)> {
        if inputs.len() != self.config.in_channels {
            return Err(Error::Shape(format!(
                "operator takes {} input channels, got {}",
                self.config.in_channels,
                inputs.len()
            )));
        }
        let first = &inputs[0];
        for f in &inputs[1..] {
            first.check_same_shape(f)?;
        }
        self.config.validate_for_grid(first.side())?;
        Ok((first.side(), first.h()))
    }

    fn output_of(&self, tape: &Tape) -> ScalarField2D {
        let w = self.config.width;
        let lay = self.layout();
        let q = &self.params[lay.blocks[lay.blocks.len() - 2].range()];
        let q0 = self.params[lay.blocks[lay.blocks.len() - 1].offset];
        let np = tape.n * tape.n;
        let mut out = vec![q0; np];
        for o in 0..w {
            let row = tape.last.row(o);
            for (dst, v) in out.iter_mut().zip(row.iter()) {
                *dst += q[o] * v;
            }
        }
        let s = self.config.output_scale;
        if s != 1.0 {
            out.iter_mut().for_each(|v| *v *= s);
        }
        ScalarField2D::from_raw_unchecked(tape.n, tape.h, out)
    }

    /// Forward pass keeping what the reverse pass needs.
    pub fn forward_tape(&self, inputs: &[ScalarField2D]) -> Result<Tape> {
        let (n, h) = self.check_inputs(inputs)?;
        let cfg = self.config;
        let (c, w, m) = (cfg.in_channels + COORD_CHANNELS, cfg.width, cfg.modes);
        let np = n * n;
        let lay = self.layout();
        let mut x = Array2::<f64>::zeros((c, np));
        for (k, f) in inputs.iter().enumerate() {
            x.row_mut(k).as_slice_mut().expect("contiguous").copy_from_slice(f.values());
        }
        for p in 0..np {
            x[[c - 2, p]] = (p % n) as f64 * h;
            x[[c - 1, p]] = (p / n) as f64 * h;
        }
        let lift_w = self.matrix(&lay.blocks[0], w, c);
        let lift_b = &self.params[lay.blocks[1].range()];
        let mut hcur = Array2::<f64>::zeros((w, np));
        general_mat_mul(1.0, &lift_w, &x, 0.0, &mut hcur);
        add_bias(&mut hcur, lift_b);

        let modes = spectral::mode_count(m);
        let mut layers = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let spec = &self.params[lay.blocks[2 + 3 * l].range()];
            let bw = self.matrix(&lay.blocks[3 + 3 * l], w, w);
            let bb = &self.params[lay.blocks[4 + 3 * l].range()];
            let mut z = Array2::<f64>::zeros((w, np));
            general_mat_mul(1.0, &bw, &hcur, 0.0, &mut z);
            add_bias(&mut z, bb);
            let mut spectrum = vec![Complex64::new(0.0, 0.0); w * modes];
            spectral::spectral_conv(spec, w, hcur.view(), n, m, &mut spectrum, z.view_mut());
            let mut next = z;
            let mut dact = Array2::<f64>::zeros((w, np));
            ndarray::Zip::from(&mut next).and(&mut dact).for_each(|v, d| {
                let (a, g) = gelu_with_grad(*v);
                *v = a;
                *d = g;
            });
            layers.push(LayerTape {
                input: std::mem::replace(&mut hcur, next),
                spectrum,
                dact,
            });
        }
        Ok(Tape {
            n,
            h,
            lifted_input: x,
            layers,
            last: hcur,
        })
    }

    /// Output field recorded on a tape.
    pub fn tape_output(&self, tape: &Tape) -> ScalarField2D {
        self.output_of(tape)
    }

    /// Adds `∂L/∂θ` to `grad` given `d_out = ∂L/∂output` (node field).
    pub fn backward(&self, tape: &Tape, d_out: &ScalarField2D, grad: &mut [f64]) -> Result<()> {
        if grad.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "gradient buffer has {} slots, model {}",
                grad.len(),
                self.params.len()
            )));
        }
        if d_out.side() != tape.n {
            return Err(Error::GridMismatch {
                expected: tape.n,
                found: d_out.side(),
            });
        }
        let cfg = self.config;
        let (c, w, m) = (cfg.in_channels + COORD_CHANNELS, cfg.width, cfg.modes);
        let n = tape.n;
        let np = n * n;
        let modes = spectral::mode_count(m);
        let scale = 1.0 / (np as f64);
        let lay = self.layout();
        let nb = lay.blocks.len();
        let s = self.config.output_scale;
        let scaled: Vec<f64>;
        let dy = if s == 1.0 {
            d_out.values()
        } else {
            scaled = d_out.values().iter().map(|v| v * s).collect();
            &scaled
        };

        // Projection.
        let q_block = &lay.blocks[nb - 2];
        let q = &self.params[q_block.range()];
        for o in 0..w {
            grad[q_block.offset + o] += tape.last.row(o).iter().zip(dy).map(|(a, b)| a * b).sum::<f64>();
        }
        grad[lay.blocks[nb - 1].offset] += dy.iter().sum::<f64>();
        let mut dh = Array2::<f64>::zeros((w, np));
        for o in 0..w {
            for (dst, v) in dh.row_mut(o).iter_mut().zip(dy) {
                *dst = q[o] * v;
            }
        }

        let mut g_spec_o = vec![Complex64::new(0.0, 0.0); modes];
        let mut g_in = vec![Complex64::new(0.0, 0.0); w * modes];
        let mut buf = vec![0.0; np];
        for l in (0..cfg.layers).rev() {
            let t = &tape.layers[l];
            let spec_block = &lay.blocks[2 + 3 * l];
            let bw_block = &lay.blocks[3 + 3 * l];
            let bb_block = &lay.blocks[4 + 3 * l];
            let spec = &self.params[spec_block.range()];
            let mut dz = dh;
            dz *= &t.dact;

            // Bypass.
            let mut gw = Array2::<f64>::zeros((w, w));
            general_mat_mul(1.0, &dz, &t.input.t(), 0.0, &mut gw);
            for (dst, v) in grad[bw_block.range()].iter_mut().zip(gw.iter()) {
                *dst += v;
            }
            for (o, s) in dz.sum_axis(Axis(1)).iter().enumerate() {
                grad[bb_block.offset + o] += s;
            }
            let bw = self.matrix(bw_block, w, w);
            let mut dh_in = Array2::<f64>::zeros((w, np));
            general_mat_mul(1.0, &bw.t(), &dz, 0.0, &mut dh_in);

            // Spectral path.
            g_in.fill(Complex64::new(0.0, 0.0));
            let gs = &mut grad[spec_block.range()];
            for o in 0..w {
                spectral::analyze(dz.row(o).as_slice().expect("contiguous"), n, m, &mut g_spec_o);
                for k in 0..modes {
                    let g = g_spec_o[k] * scale;
                    let base = (k * w + o) * w * 2;
                    for i in 0..w {
                        let xi = t.spectrum[i * modes + k];
                        let gw = g * xi.conj();
                        gs[base + 2 * i] += gw.re;
                        gs[base + 2 * i + 1] += gw.im;
                        let wk = Complex64::new(spec[base + 2 * i], spec[base + 2 * i + 1]);
                        g_in[i * modes + k] += wk.conj() * g;
                    }
                }
            }
            for i in 0..w {
                spectral::synthesize(&g_in[i * modes..(i + 1) * modes], n, m, &mut buf);
                for (dst, v) in dh_in.row_mut(i).iter_mut().zip(&buf) {
                    *dst += v;
                }
            }
            dh = dh_in;
        }

        // Lifting.
        let mut gl = Array2::<f64>::zeros((w, c));
        general_mat_mul(1.0, &dh, &tape.lifted_input.t(), 0.0, &mut gl);
        for (dst, v) in grad[lay.blocks[0].range()].iter_mut().zip(gl.iter()) {
            *dst += v;
        }
        for (o, s) in dh.sum_axis(Axis(1)).iter().enumerate() {
            grad[lay.blocks[1].offset + o] += s;
        }
        Ok(())
    }

    /// Loss and gradient for one sample. `loss` maps the raw output to
    /// `(L, ∂L/∂output)`.
    pub fn gradient<F>(&self, inputs: &[ScalarField2D], loss: F) -> Result<(f64, Vec<f64>)>
    where
        F: FnOnce(&ScalarField2D) -> Result<(f64, ScalarField2D)>,
    {
        let tape = self.forward_tape(inputs)?;
        let out = self.output_of(&tape);
        let (value, d_out) = loss(&out)?;
        if !value.is_finite() {
            return Err(Error::Diverged(format!("loss is {value}")));
        }
        let mut grad = vec![0.0; self.params.len()];
        self.backward(&tape, &d_out, &mut grad)?;
        if let Some(k) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::Diverged(format!("non-finite gradient at coordinate {k}")));
        }
        Ok((value, grad))
    }

    fn matrix(&self, block: &ParamBlock, rows: usize, cols: usize) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((rows, cols), &self.params[block.range()]).expect("block shape")
    }
}

fn add_bias(a: &mut Array2<f64>, bias: &[f64]) {
    for (mut row, &b) in a.rows_mut().into_iter().zip(bias) {
        row += b;
    }
}

#[cfg(test)]
mod tests;
