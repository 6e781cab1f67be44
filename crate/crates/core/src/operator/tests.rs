use super::*;
use crate::residual::PdeTask;
use crate::fields::Grid;
use proptest::prelude::*;
use rand::Rng;
use std::f64::consts::PI;

fn tiny() -> OperatorConfig {
    OperatorConfig {
        in_channels: 1,
        width: 4,
        layers: 2,
        modes: 4,
        output_scale: 1.0,
    }
}

fn random_inputs(n: usize, channels: usize, seed: u64) -> Vec<ScalarField2D> {
    let mut rng = rng_from_seed(seed);
    let g = Grid::new(n).unwrap();
    (0..channels)
        .map(|_| ScalarField2D::from_fn(g, |_, _| rng.gen_range(-1.0..1.0)))
        .collect()
}

#[test]
fn zero_parameters_give_zero_output() {
    let model = NeuralOperator::zeros(tiny()).unwrap();
    let out = model.forward(&random_inputs(16, 1, 0)).unwrap();
    assert!(out.values().iter().all(|&v| v == 0.0));
}

#[test]
fn output_shape_follows_input() {
    for n in [8, 13, 16] {
        let model = NeuralOperator::init(tiny(), 1).unwrap();
        let out = model.forward(&random_inputs(n, 1, 1)).unwrap();
        assert_eq!(out.side(), n);
        assert!(out.is_finite());
    }
}

#[test]
fn channel_and_mode_mismatch_rejected() {
    let model = NeuralOperator::init(tiny(), 1).unwrap();
    assert!(matches!(model.forward(&random_inputs(16, 2, 0)), Err(Error::Shape(_))));
    assert!(model.forward(&random_inputs(7, 1, 0)).is_err());
}

/// Full n² x n² DFT matrix, modes outside the retained set zeroed.
fn dense_spectral_layer(weights: &[f64], width: usize, input: &Array2<f64>, n: usize, m: usize) -> Array2<f64> {
    let keep_ky = |ky: usize| ky < m || ky >= n - m;
    let np = n * n;
    let mut out = Array2::<f64>::zeros((width, np));
    let mode_index = |ky: usize, kx: usize| {
        let r = if ky < m { ky } else { ky + 2 * m - n };
        r * m + kx
    };
    for ky in (0..n).filter(|&k| keep_ky(k)) {
        for kx in 0..m {
            let k = mode_index(ky, kx);
            let basis: Vec<Complex64> = (0..np)
                .map(|p| {
                    let (i, j) = (p / n, p % n);
                    let phase = 2.0 * PI * ((ky * i + kx * j) as f64) / n as f64;
                    Complex64::new(phase.cos(), phase.sin())
                })
                .collect();
            let xhat: Vec<Complex64> = (0..width)
                .map(|c| (0..np).map(|p| input[[c, p]] * basis[p].conj()).sum())
                .collect();
            for o in 0..width {
                let mut y = Complex64::new(0.0, 0.0);
                for i in 0..width {
                    let base = ((k * width + o) * width + i) * 2;
                    y += Complex64::new(weights[base], weights[base + 1]) * xhat[i];
                }
                for p in 0..np {
                    out[[o, p]] += (y * basis[p]).re / np as f64;
                }
            }
        }
    }
    out
}

#[test]
fn spectral_layer_matches_dense_dft() {
    let mut rng = rng_from_seed(9);
    for (n, m, width) in [(8, 4, 3), (16, 4, 2), (16, 8, 2)] {
        let weights: Vec<f64> = (0..2 * spectral::mode_count(m) * width * width)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let input = Array2::from_shape_fn((width, n * n), |_| rng.gen_range(-1.0..1.0));
        let mut fast = Array2::<f64>::zeros((width, n * n));
        let mut spectrum = vec![Complex64::new(0.0, 0.0); width * spectral::mode_count(m)];
        spectral::spectral_conv(&weights, width, input.view(), n, m, &mut spectrum, fast.view_mut());
        let dense = dense_spectral_layer(&weights, width, &input, n, m);
        let err = (&fast - &dense).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(err < 1e-10, "n={n} m={m}: {err:e}");
    }
}

fn sum_of_squares(out: &ScalarField2D) -> Result<(f64, ScalarField2D)> {
    let loss = out.values().iter().map(|v| v * v).sum::<f64>();
    Ok((loss, out.map(|v| 2.0 * v)))
}

fn check_gradient(config: OperatorConfig, n: usize, seed: u64) {
    let model = NeuralOperator::init(config, seed).unwrap();
    let inputs = random_inputs(n, config.in_channels, seed + 100);
    let (_, grad) = model.gradient(&inputs, sum_of_squares).unwrap();
    let step = 1e-5;
    let eval = |params: Vec<f64>| {
        let m = NeuralOperator::from_params(config, params).unwrap();
        sum_of_squares(&m.forward(&inputs).unwrap()).unwrap().0
    };
    let scale = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
    for k in 0..grad.len() {
        let mut p = model.params().to_vec();
        p[k] += step;
        let up = eval(p.clone());
        p[k] -= 2.0 * step;
        let down = eval(p);
        let fd = (up - down) / (2.0 * step);
        let denom = grad[k].abs().max(fd.abs()).max(1e-6 * scale);
        assert!((grad[k] - fd).abs() / denom < 1e-4, "coordinate {k}: {} vs {fd}", grad[k]);
    }
}

#[test]
fn gradient_matches_finite_differences() {
    check_gradient(tiny(), 16, 3);
    check_gradient(
        OperatorConfig {
            in_channels: 2,
            width: 3,
            layers: 1,
            modes: 3,
            output_scale: 0.3,
        },
        9,
        4,
    );
}

#[test]
fn disconnected_layers_get_zero_gradient() {
    let mut model = NeuralOperator::init(tiny(), 5).unwrap();
    let lay = model.layout();
    for name in ["layer1.spectral", "layer1.bypass.weight"] {
        let b = lay.block(name).unwrap();
        model.params_mut()[b.range()].fill(0.0);
    }
    let (_, grad) = model.gradient(&random_inputs(16, 1, 5), sum_of_squares).unwrap();
    for name in ["lifting.weight", "lifting.bias", "layer0.spectral", "layer0.bypass.weight", "layer0.bypass.bias"] {
        let b = lay.block(name).unwrap();
        assert!(grad[b.range()].iter().all(|&g| g == 0.0), "{name}");
    }
    assert!(grad[lay.block("projection.weight").unwrap().range()].iter().any(|&g| g != 0.0));
}

#[test]
fn non_finite_loss_is_reported() {
    let model = NeuralOperator::init(tiny(), 5).unwrap();
    let r = model.gradient(&random_inputs(16, 1, 5), |o| Ok((f64::NAN, o.clone())));
    assert!(matches!(r, Err(Error::Diverged(_))));
}

#[test]
fn initialization_is_deterministic() {
    let a = NeuralOperator::init(tiny(), 11).unwrap();
    let b = NeuralOperator::init(tiny(), 11).unwrap();
    let c = NeuralOperator::init(tiny(), 12).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn initialization_respects_block_scales() {
    let cfg = OperatorConfig::default();
    let model = NeuralOperator::init(cfg, 0).unwrap();
    for b in model.layout().blocks {
        assert!(model.params()[b.range()].iter().all(|v| v.abs() <= b.init_scale), "{}", b.name);
    }
    let spec = model.layout().block("layer0.spectral").unwrap().init_scale;
    assert_eq!(spec, 1.0 / (32.0 * 12.0));
}

fn enumerate_tagged(config: &OperatorConfig) -> (usize, usize, usize) {
    let (c, w, m, l) = (config.in_channels + 2, config.width, config.modes, config.layers);
    let mut backbone = 0;
    let mut embed = 0;
    for _ in 0..w {
        for _ in 0..c {
            embed += 1;
        }
        embed += 1;
    }
    for _ in 0..l {
        for _ky in 0..2 * m {
            for _kx in 0..m {
                for _o in 0..w {
                    for _i in 0..w {
                        backbone += 2;
                    }
                }
            }
        }
        backbone += w * w + w;
    }
    embed += w + 1;
    (backbone + embed, backbone, embed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]
    #[test]
    fn param_count_matches_enumeration(c in 1usize..4, w in 1usize..9, l in 1usize..5, m in 1usize..7) {
        let cfg = OperatorConfig { in_channels: c, width: w, layers: l, modes: m, output_scale: 1.0 };
        let (total, backbone, embed) = enumerate_tagged(&cfg);
        prop_assert_eq!(cfg.param_count(), total);
        let mask = Layout::new(&cfg).subset_mask();
        prop_assert_eq!(mask.len(), total);
        prop_assert_eq!(mask.iter().filter(|s| **s == Subset::Backbone).count(), backbone);
        prop_assert_eq!(mask.iter().filter(|s| **s == Subset::Embedding).count(), embed);
    }
}

fn backbone_and_embedding(model: &NeuralOperator) -> (Vec<f64>, Vec<f64>) {
    let mask = model.layout().subset_mask();
    let mut bb = Vec::new();
    let mut em = Vec::new();
    for (v, s) in model.params().iter().zip(mask) {
        match s {
            Subset::Backbone => bb.push(*v),
            Subset::Embedding => em.push(*v),
        }
    }
    (bb, em)
}

#[test]
fn transfer_copies_backbone_and_redraws_embedding() {
    let source = NeuralOperator::init(tiny(), 1).unwrap();
    let moved = NeuralOperator::transfer_init(&source, tiny(), 2).unwrap();
    let (sb, se) = backbone_and_embedding(&source);
    let (mb, me) = backbone_and_embedding(&moved);
    assert!(sb.iter().zip(&mb).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_ne!(se, me);
    let inputs = random_inputs(16, 1, 3);
    assert_ne!(source.forward(&inputs).unwrap(), moved.forward(&inputs).unwrap());
}

#[test]
fn transfer_to_more_input_channels() {
    let source = NeuralOperator::init(tiny(), 1).unwrap();
    let cfg = OperatorConfig { in_channels: 2, ..tiny() };
    let moved = NeuralOperator::transfer_init(&source, cfg, 2).unwrap();
    assert_eq!(moved.layout().block("lifting.weight").unwrap().len, 4 * 4);
    assert_eq!(backbone_and_embedding(&source).0, backbone_and_embedding(&moved).0);
    assert!(moved.forward(&random_inputs(16, 2, 0)).is_ok());
}

#[test]
fn transfer_rejects_other_backbone() {
    let source = NeuralOperator::init(tiny(), 1).unwrap();
    let cfg = OperatorConfig { width: 5, ..tiny() };
    assert!(matches!(NeuralOperator::transfer_init(&source, cfg, 0), Err(Error::Shape(_))));
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    let meta = CheckpointMeta {
        seed: 4,
        steps: 17,
        loss_mode: "hybrid".into(),
        tags: vec!["pretrained".into()],
        grid_n: Some(16),
        ..Default::default()
    };
    let ckpt = Checkpoint::new(NeuralOperator::init(tiny(), 4).unwrap(), meta);
    save_checkpoint(&ckpt, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back, ckpt);
    assert!(back.has_tag("pretrained"));
    for s in 0..10 {
        let x = random_inputs(16, 1, s);
        let a = ckpt.model.forward(&x).unwrap();
        let b = back.model.forward(&x).unwrap();
        assert!(a.values().iter().zip(b.values()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}

#[test]
fn checkpoint_keeps_inexact_output_scale() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scaled.ckpt");
    let config = OperatorConfig {
        output_scale: PdeTask::Poisson.output_scale(),
        ..tiny()
    };
    let ckpt = Checkpoint::new(NeuralOperator::init(config, 2).unwrap(), CheckpointMeta::default());
    save_checkpoint(&ckpt, &path).unwrap();
    assert_eq!(load_checkpoint(&path).unwrap().config().output_scale.to_bits(), config.output_scale.to_bits());
}

#[test]
fn checkpoint_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    let ckpt = Checkpoint::new(NeuralOperator::init(tiny(), 4).unwrap(), CheckpointMeta::default());
    save_checkpoint(&ckpt, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();

    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::SizeMismatch { .. })));

    let cut = bytes.iter().position(|&b| b == b'\n').unwrap() + 20;
    std::fs::write(&path, &bytes[..cut]).unwrap();
    assert!(load_checkpoint(&path).is_err());

    let mut v2 = bytes.clone();
    v2[9] = b'2';
    std::fs::write(&path, &v2).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Version(2))));

    std::fs::write(&path, &bytes).unwrap();
    let other = OperatorConfig { width: 5, ..tiny() };
    assert!(matches!(load_checkpoint(&path).unwrap().expect_config(&other), Err(Error::Shape(_))));
    assert!(load_checkpoint(dir.path().join("absent")).is_err());
}
