//! Seeded generators for every input-field distribution: Gaussian-blob
//! sources, nine extreme out-of-distribution source families, and Helmholtz
//! media.
//!
//! Every generator is a pure function of `(grid, params, seed)`. Generated
//! fields are rescaled so that `max |f| <= AMPLITUDE_BOUND`.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::fields::{Grid, SampleSet, ScalarField2D};
use crate::rng::{derive_seed, rng_from_seed};

pub const AMPLITUDE_BOUND: f64 = 2.0;

/// Boundary value range of the Helmholtz problem.
pub const BOUNDARY_VALUE_RANGE: (f64, f64) = (0.25, 0.5);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobParams {
    /// Inclusive range of the number of blobs.
    pub count: (usize, usize),
    pub amplitude: (f64, f64),
    /// Amplitudes with smaller magnitude are rejected and redrawn.
    pub min_abs_amplitude: f64,
    pub sigma: (f64, f64),
    /// Range of both center coordinates.
    pub center: (f64, f64),
}

impl Default for BlobParams {
    fn default() -> Self {
        BlobParams {
            count: (1, 6),
            amplitude: (-1.0, 1.0),
            min_abs_amplitude: 0.05,
            sigma: (0.05, 0.15),
            center: (0.1, 0.9),
        }
    }
}

impl BlobParams {
    /// Positive-amplitude components used for Helmholtz media.
    pub fn medium_default() -> Self {
        BlobParams {
            count: (1, 4),
            amplitude: (0.2, 1.0),
            min_abs_amplitude: 0.0,
            sigma: (0.05, 0.15),
            center: (0.1, 0.9),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("blob params: {what}")));
        if self.count.0 > self.count.1 {
            return bad("empty count range");
        }
        if !(self.amplitude.0 <= self.amplitude.1) || !(self.center.0 <= self.center.1) {
            return bad("empty amplitude or center range");
        }
        if !(self.sigma.0 > 0.0 && self.sigma.0 <= self.sigma.1) {
            return bad("sigma range must be positive and non-empty");
        }
        let max_abs = self.amplitude.0.abs().max(self.amplitude.1.abs());
        if self.min_abs_amplitude > max_abs {
            return bad("amplitude exclusion covers the whole range");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub amplitude: f64,
    pub cx: f64,
    pub cy: f64,
    pub sigma: f64,
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

pub fn sample_blobs(params: &BlobParams, rng: &mut ChaCha8Rng) -> Vec<Blob> {
    let k = rng.gen_range(params.count.0..=params.count.1);
    (0..k)
        .map(|_| {
            let amplitude = loop {
                let a = uniform(rng, params.amplitude);
                if a.abs() >= params.min_abs_amplitude {
                    break a;
                }
            };
            Blob {
                amplitude,
                cx: uniform(rng, params.center),
                cy: uniform(rng, params.center),
                sigma: uniform(rng, params.sigma),
            }
        })
        .collect()
}

/// `sum_i A_i exp(-|p - c_i|^2 / (2 sigma_i^2))` at every node, unscaled.
pub fn render_blobs(grid: Grid, blobs: &[Blob]) -> ScalarField2D {
    ScalarField2D::from_fn(grid, |x, y| {
        blobs
            .iter()
            .map(|b| {
                let r2 = (x - b.cx).powi(2) + (y - b.cy).powi(2);
                b.amplitude * (-r2 / (2.0 * b.sigma * b.sigma)).exp()
            })
            .sum()
    })
}

/// Rescales so that `max |f| <= AMPLITUDE_BOUND`; fields already within the
/// bound are returned unchanged.
pub fn enforce_bound(field: ScalarField2D) -> ScalarField2D {
    let m = field.max_abs();
    if m > AMPLITUDE_BOUND {
        field.scaled(AMPLITUDE_BOUND / m)
    } else {
        field
    }
}

pub fn gen_gaussian_blobs(grid: Grid, params: &BlobParams, seed: u64) -> Result<ScalarField2D> {
    params.validate()?;
    let mut rng = rng_from_seed(seed);
    let blobs = sample_blobs(params, &mut rng);
    Ok(enforce_bound(render_blobs(grid, &blobs)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremeKind {
    SinusoidalWaves,
    RadialPattern,
    AngularPattern,
    Checkerboard,
    RandomPolygons,
    PerlinLikeNoise,
    StripePattern,
    SpiralPattern,
    RandomLines,
}

impl ExtremeKind {
    pub const ALL: [ExtremeKind; 9] = [
        ExtremeKind::SinusoidalWaves,
        ExtremeKind::RadialPattern,
        ExtremeKind::AngularPattern,
        ExtremeKind::Checkerboard,
        ExtremeKind::RandomPolygons,
        ExtremeKind::PerlinLikeNoise,
        ExtremeKind::StripePattern,
        ExtremeKind::SpiralPattern,
        ExtremeKind::RandomLines,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExtremeKind::SinusoidalWaves => "sinusoidal_waves",
            ExtremeKind::RadialPattern => "radial_pattern",
            ExtremeKind::AngularPattern => "angular_pattern",
            ExtremeKind::Checkerboard => "checkerboard",
            ExtremeKind::RandomPolygons => "random_polygons",
            ExtremeKind::PerlinLikeNoise => "perlin_like_noise",
            ExtremeKind::StripePattern => "stripe_pattern",
            ExtremeKind::SpiralPattern => "spiral_pattern",
            ExtremeKind::RandomLines => "random_lines",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<(f64, f64)>,
    pub amplitude: f64,
}

impl Polygon {
    fn contains(&self, x: f64, y: f64) -> bool {
        let v = &self.vertices;
        let mut inside = false;
        let mut j = v.len() - 1;
        for i in 0..v.len() {
            let (xi, yi) = v[i];
            let (xj, yj) = v[j];
            if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub px: f64,
    pub py: f64,
    pub angle: f64,
    pub width: f64,
    pub amplitude: f64,
}

/// A fully parameterized member of one extreme family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExtremeShape {
    /// `A sin(2 pi (kx x + ky y) + phase)`
    SinusoidalWaves { kx: f64, ky: f64, amplitude: f64, phase: f64 },
    /// Concentric rings `A cos(2 pi rings r + phase)`.
    RadialPattern { cx: f64, cy: f64, rings: f64, amplitude: f64, phase: f64 },
    /// `A cos(lobes theta + phase)` around a center.
    AngularPattern { cx: f64, cy: f64, lobes: f64, amplitude: f64, phase: f64 },
    /// `+A` / `-A` cells, `+A` in the cell containing the origin.
    Checkerboard { cells: usize, amplitude: f64 },
    RandomPolygons { polygons: Vec<Polygon> },
    /// Two-octave smoothed value noise on lattices of `base` and `2 base` cells.
    PerlinLikeNoise { base: usize, octaves: Vec<Vec<f64>>, amplitude: f64 },
    /// Square-wave stripes along direction `angle`.
    StripePattern { angle: f64, stripes: f64, amplitude: f64, phase: f64 },
    SpiralPattern { cx: f64, cy: f64, arms: f64, tightness: f64, amplitude: f64 },
    /// Gaussian ridges along infinite lines.
    RandomLines { lines: Vec<Line> },
}

fn signed(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let a = rng.gen_range(lo..hi);
    if rng.gen_bool(0.5) {
        a
    } else {
        -a
    }
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn value_noise(lattice: &[f64], cells: usize, x: f64, y: f64) -> f64 {
    let gx = (x * cells as f64).clamp(0.0, cells as f64);
    let gy = (y * cells as f64).clamp(0.0, cells as f64);
    let i0 = (gy.floor() as usize).min(cells - 1);
    let j0 = (gx.floor() as usize).min(cells - 1);
    let ty = smoothstep(gy - i0 as f64);
    let tx = smoothstep(gx - j0 as f64);
    let at = |i: usize, j: usize| lattice[i * (cells + 1) + j];
    let top = at(i0, j0) * (1.0 - tx) + at(i0, j0 + 1) * tx;
    let bottom = at(i0 + 1, j0) * (1.0 - tx) + at(i0 + 1, j0 + 1) * tx;
    top * (1.0 - ty) + bottom * ty
}

impl ExtremeShape {
    pub fn sample(kind: ExtremeKind, rng: &mut ChaCha8Rng) -> ExtremeShape {
        match kind {
            ExtremeKind::SinusoidalWaves => {
                let (kx, ky) = loop {
                    let kx = rng.gen_range(0..=8) as f64;
                    let ky = rng.gen_range(0..=8) as f64;
                    if kx + ky > 0.0 {
                        break (kx, if rng.gen_bool(0.5) { ky } else { -ky });
                    }
                };
                ExtremeShape::SinusoidalWaves {
                    kx,
                    ky,
                    amplitude: rng.gen_range(0.5..2.0),
                    phase: rng.gen_range(0.0..TAU),
                }
            }
            ExtremeKind::RadialPattern => ExtremeShape::RadialPattern {
                cx: rng.gen_range(0.2..0.8),
                cy: rng.gen_range(0.2..0.8),
                rings: rng.gen_range(1..=8) as f64,
                amplitude: rng.gen_range(0.5..2.0),
                phase: rng.gen_range(0.0..TAU),
            },
            ExtremeKind::AngularPattern => ExtremeShape::AngularPattern {
                cx: rng.gen_range(0.2..0.8),
                cy: rng.gen_range(0.2..0.8),
                lobes: rng.gen_range(1..=8) as f64,
                amplitude: rng.gen_range(0.5..2.0),
                phase: rng.gen_range(0.0..TAU),
            },
            ExtremeKind::Checkerboard => ExtremeShape::Checkerboard {
                cells: rng.gen_range(2..=8),
                amplitude: signed(rng, 0.5, 2.0),
            },
            ExtremeKind::RandomPolygons => {
                let count = rng.gen_range(1..=3);
                let polygons = (0..count)
                    .map(|_| {
                        let k = rng.gen_range(3..=8);
                        let cx = rng.gen_range(0.25..0.75);
                        let cy = rng.gen_range(0.25..0.75);
                        let mut angles: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..TAU)).collect();
                        angles.sort_by(f64::total_cmp);
                        let vertices = angles
                            .into_iter()
                            .map(|t| {
                                let r = rng.gen_range(0.08..0.3);
                                (cx + r * t.cos(), cy + r * t.sin())
                            })
                            .collect();
                        Polygon {
                            vertices,
                            amplitude: signed(rng, 0.5, 1.5),
                        }
                    })
                    .collect();
                ExtremeShape::RandomPolygons { polygons }
            }
            ExtremeKind::PerlinLikeNoise => {
                let base = rng.gen_range(2..=6);
                let octaves = [base, 2 * base]
                    .iter()
                    .map(|&c| (0..(c + 1) * (c + 1)).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect();
                ExtremeShape::PerlinLikeNoise {
                    base,
                    octaves,
                    amplitude: rng.gen_range(1.0..2.0),
                }
            }
            ExtremeKind::StripePattern => ExtremeShape::StripePattern {
                angle: rng.gen_range(0.0..PI),
                stripes: rng.gen_range(2..=10) as f64,
                amplitude: signed(rng, 0.5, 2.0),
                phase: rng.gen_range(0.0..TAU),
            },
            ExtremeKind::SpiralPattern => ExtremeShape::SpiralPattern {
                cx: rng.gen_range(0.3..0.7),
                cy: rng.gen_range(0.3..0.7),
                arms: rng.gen_range(1..=4) as f64,
                tightness: rng.gen_range(2.0..8.0),
                amplitude: rng.gen_range(0.5..2.0),
            },
            ExtremeKind::RandomLines => {
                let count = rng.gen_range(2..=6);
                let lines = (0..count)
                    .map(|_| Line {
                        px: rng.gen_range(0.1..0.9),
                        py: rng.gen_range(0.1..0.9),
                        angle: rng.gen_range(0.0..PI),
                        width: rng.gen_range(0.01..0.04),
                        amplitude: signed(rng, 0.5, 1.5),
                    })
                    .collect();
                ExtremeShape::RandomLines { lines }
            }
        }
    }

    pub fn kind(&self) -> ExtremeKind {
        match self {
            ExtremeShape::SinusoidalWaves { .. } => ExtremeKind::SinusoidalWaves,
            ExtremeShape::RadialPattern { .. } => ExtremeKind::RadialPattern,
            ExtremeShape::AngularPattern { .. } => ExtremeKind::AngularPattern,
            ExtremeShape::Checkerboard { .. } => ExtremeKind::Checkerboard,
            ExtremeShape::RandomPolygons { .. } => ExtremeKind::RandomPolygons,
            ExtremeShape::PerlinLikeNoise { .. } => ExtremeKind::PerlinLikeNoise,
            ExtremeShape::StripePattern { .. } => ExtremeKind::StripePattern,
            ExtremeShape::SpiralPattern { .. } => ExtremeKind::SpiralPattern,
            ExtremeShape::RandomLines { .. } => ExtremeKind::RandomLines,
        }
    }

    /// Evaluates the shape at every node, without the amplitude bound.
    pub fn render(&self, grid: Grid) -> ScalarField2D {
        match self {
            ExtremeShape::SinusoidalWaves { kx, ky, amplitude, phase } => {
                ScalarField2D::from_fn(grid, |x, y| amplitude * (TAU * (kx * x + ky * y) + phase).sin())
            }
            ExtremeShape::RadialPattern { cx, cy, rings, amplitude, phase } => {
                ScalarField2D::from_fn(grid, |x, y| {
                    let r = (x - cx).hypot(y - cy);
                    amplitude * (TAU * rings * r + phase).cos()
                })
            }
            ExtremeShape::AngularPattern { cx, cy, lobes, amplitude, phase } => {
                ScalarField2D::from_fn(grid, |x, y| {
                    let theta = (y - cy).atan2(x - cx);
                    amplitude * (lobes * theta + phase).cos()
                })
            }
            ExtremeShape::Checkerboard { cells, amplitude } => {
                let c = *cells;
                ScalarField2D::from_fn(grid, |x, y| {
                    let cell = |t: f64| ((t * c as f64).floor() as usize).min(c - 1);
                    if (cell(x) + cell(y)) % 2 == 0 {
                        *amplitude
                    } else {
                        -amplitude
                    }
                })
            }
            ExtremeShape::RandomPolygons { polygons } => ScalarField2D::from_fn(grid, |x, y| {
                polygons
                    .iter()
                    .filter(|p| p.contains(x, y))
                    .map(|p| p.amplitude)
                    .sum()
            }),
            ExtremeShape::PerlinLikeNoise { base, octaves, amplitude } => {
                ScalarField2D::from_fn(grid, |x, y| {
                    let mut total = 0.0;
                    let mut weight = 1.0;
                    let mut norm = 0.0;
                    let mut cells = *base;
                    for lattice in octaves {
                        total += weight * value_noise(lattice, cells, x, y);
                        norm += weight;
                        weight *= 0.5;
                        cells *= 2;
                    }
                    amplitude * total / norm
                })
            }
            ExtremeShape::StripePattern { angle, stripes, amplitude, phase } => {
                let (s, c) = angle.sin_cos();
                ScalarField2D::from_fn(grid, |x, y| {
                    let v = (TAU * stripes * (x * c + y * s) + phase).sin();
                    if v >= 0.0 {
                        *amplitude
                    } else {
                        -amplitude
                    }
                })
            }
            ExtremeShape::SpiralPattern { cx, cy, arms, tightness, amplitude } => {
                ScalarField2D::from_fn(grid, |x, y| {
                    let r = (x - cx).hypot(y - cy);
                    let theta = (y - cy).atan2(x - cx);
                    amplitude * (arms * theta + TAU * tightness * r).cos()
                })
            }
            ExtremeShape::RandomLines { lines } => ScalarField2D::from_fn(grid, |x, y| {
                lines
                    .iter()
                    .map(|l| {
                        let (s, c) = l.angle.sin_cos();
                        let d = -(x - l.px) * s + (y - l.py) * c;
                        l.amplitude * (-d * d / (2.0 * l.width * l.width)).exp()
                    })
                    .sum()
            }),
        }
    }
}

pub fn gen_extreme(grid: Grid, kind: ExtremeKind, seed: u64) -> ScalarField2D {
    let mut rng = rng_from_seed(seed);
    enforce_bound(ExtremeShape::sample(kind, &mut rng).render(grid))
}

/// Out-of-distribution Poisson sources, cycling through the nine families by index.
pub fn gen_ood_testset(grid: Grid, count: usize, seed: u64) -> Result<SampleSet> {
    if count == 0 {
        return Err(Error::InvalidParameter("OOD set needs at least one sample".into()));
    }
    let kinds: Vec<ExtremeKind> = (0..count).map(|i| ExtremeKind::ALL[i % 9]).collect();
    let inputs = kinds
        .iter()
        .enumerate()
        .map(|(i, &kind)| vec![gen_extreme(grid, kind, derive_seed(seed, i as u64))])
        .collect();
    SampleSet::new(
        grid,
        inputs,
        None,
        "poisson/extreme_sources",
        json!({
            "kinds": kinds.iter().map(|k| k.name()).collect::<Vec<_>>(),
            "allocation": "round_robin",
            "amplitude_bound": AMPLITUDE_BOUND,
        }),
        seed,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripeMediumParams {
    pub orientation: (f64, f64),
    /// Inclusive stripe-count range, at least one stripe.
    pub stripes: (usize, usize),
    pub waviness: (f64, f64),
    /// Inclusive range of the number of undulations along a stripe.
    pub undulations: (usize, usize),
    pub level: (f64, f64),
}

impl Default for StripeMediumParams {
    fn default() -> Self {
        StripeMediumParams {
            orientation: (0.0, PI),
            stripes: (2, 6),
            waviness: (0.0, 0.1),
            undulations: (1, 3),
            level: (0.2, 1.0),
        }
    }
}

impl StripeMediumParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.orientation.0 <= self.orientation.1
            && self.stripes.0 >= 1
            && self.stripes.0 <= self.stripes.1
            && self.waviness.0 <= self.waviness.1
            && self.undulations.0 <= self.undulations.1
            && self.level.0 <= self.level.1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("stripe medium params: empty range".into()))
        }
    }
}

/// `level (1 + sin(2 pi stripes (s + waviness sin(2 pi undulations t)))) / 2`
/// in coordinates `(s, t)` rotated by `orientation`.
pub fn render_wavy_stripes(
    grid: Grid,
    orientation: f64,
    stripes: f64,
    waviness: f64,
    undulations: f64,
    level: f64,
) -> ScalarField2D {
    let (sn, cs) = orientation.sin_cos();
    ScalarField2D::from_fn(grid, |x, y| {
        let s = x * cs + y * sn;
        let t = -x * sn + y * cs;
        let arg = TAU * stripes * (s + waviness * (TAU * undulations * t).sin());
        level * 0.5 * (1.0 + arg.sin())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediumFamily {
    GaussianComponents(BlobParams),
    WavyStripes(StripeMediumParams),
}

impl MediumFamily {
    pub fn gaussian() -> Self {
        MediumFamily::GaussianComponents(BlobParams::medium_default())
    }

    pub fn wavy_stripes() -> Self {
        MediumFamily::WavyStripes(StripeMediumParams::default())
    }
}

/// Coefficient field `a` and boundary value `b ~ U[0.25, 0.5]`.
pub fn gen_helmholtz_medium(grid: Grid, family: &MediumFamily, seed: u64) -> Result<(ScalarField2D, f64)> {
    let mut rng = rng_from_seed(seed);
    let a = match family {
        MediumFamily::GaussianComponents(params) => {
            params.validate()?;
            render_blobs(grid, &sample_blobs(params, &mut rng))
        }
        MediumFamily::WavyStripes(p) => {
            p.validate()?;
            let orientation = uniform(&mut rng, p.orientation);
            let stripes = rng.gen_range(p.stripes.0..=p.stripes.1) as f64;
            let waviness = uniform(&mut rng, p.waviness);
            let undulations = rng.gen_range(p.undulations.0..=p.undulations.1) as f64;
            let level = uniform(&mut rng, p.level);
            render_wavy_stripes(grid, orientation, stripes, waviness, undulations, level)
        }
    };
    let b = rng.gen_range(BOUNDARY_VALUE_RANGE.0..=BOUNDARY_VALUE_RANGE.1);
    Ok((enforce_bound(a), b))
}

/// A distribution of model inputs, one entry per input channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFamily {
    GaussianBlobs(BlobParams),
    Extreme(ExtremeKind),
    /// Helmholtz inputs `[a, b broadcast]`.
    Medium(MediumFamily),
}

impl InputFamily {
    pub fn channels(&self) -> usize {
        match self {
            InputFamily::Medium(_) => 2,
            _ => 1,
        }
    }

    pub fn name(&self) -> String {
        match self {
            InputFamily::GaussianBlobs(_) => "gaussian_blobs".into(),
            InputFamily::Extreme(k) => k.name().into(),
            InputFamily::Medium(MediumFamily::GaussianComponents(_)) => "medium_gaussian".into(),
            InputFamily::Medium(MediumFamily::WavyStripes(_)) => "medium_wavy_stripes".into(),
        }
    }

    /// All nine extreme source families.
    pub fn all_extreme() -> Vec<InputFamily> {
        ExtremeKind::ALL.iter().map(|&k| InputFamily::Extreme(k)).collect()
    }

    pub fn sample(&self, grid: Grid, seed: u64) -> Result<Vec<ScalarField2D>> {
        Ok(match self {
            InputFamily::GaussianBlobs(p) => vec![gen_gaussian_blobs(grid, p, seed)?],
            InputFamily::Extreme(kind) => vec![gen_extreme(grid, *kind, seed)],
            InputFamily::Medium(family) => {
                let (a, b) = gen_helmholtz_medium(grid, family, seed)?;
                vec![a, ScalarField2D::constant(grid, b)]
            }
        })
    }
}

/// Unlabeled set of `count` inputs with per-sample seeds derived from `seed`.
pub fn gen_input_set(grid: Grid, family: &InputFamily, count: usize, seed: u64) -> Result<SampleSet> {
    let inputs = (0..count)
        .map(|i| family.sample(grid, derive_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    SampleSet::new(
        grid,
        inputs,
        None,
        family.name(),
        json!({ "family": family, "amplitude_bound": AMPLITUDE_BOUND }),
        seed,
    )
}
