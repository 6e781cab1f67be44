//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.
//!
//! Training criteria run at a reduced scale (n = 32, w = 16, L = 3, m = 8)
//! so the whole suite finishes in a few minutes on one core.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use pift::experiments::{
    audit_ratios, audit_residual, generate_datasets, run_experiment, run_scaling, Configuration, Datasets,
    ExperimentSpec, Regime, Seeds, TrainingSpec,
};
use pift::fem::{generate_labeled_set, solve_helmholtz, solve_poisson, FEM_TOLERANCE};
use pift::fields::{load_sampleset, save_sampleset};
use pift::operator::spectral::{mode_count, retained_ky, spectral_conv};
use pift::residual::fd_laplacian;
use pift::rng::rng_from_seed;
use pift::train::{finetune, pretrain, BatchItem, Start, Trainer};
use pift::*;
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn small_operator(task: &PdeTask) -> OperatorConfig {
    OperatorConfig {
        in_channels: task.in_channels(),
        width: 16,
        layers: 3,
        modes: 8,
        output_scale: task.output_scale(),
    }
}

fn small_spec(task: PdeTask) -> ExperimentSpec {
    ExperimentSpec {
        task,
        grid_n: 32,
        test_in_dist: 64,
        test_ood: 50,
        train_pool: 256,
        operator: small_operator(&task),
        training: TrainingSpec {
            batch_size: 8,
            steps: 500,
            lr_backbone: 1e-3,
            lr_embed: 1e-2,
            hybrid_augmentation: true,
        },
        pretrain_steps: 1500,
        pretrain_lr: 1e-3,
        pretrain_batch_size: 8,
        ..ExperimentSpec::default()
    }
}

// Loss of a parameter vector, computed without the library's loss code.
fn oracle_loss(config: OperatorConfig, params: &[f64], mode: LossMode, samples: &[(Vec<ScalarField2D>, ScalarField2D)]) -> f64 {
    let model = NeuralOperator::from_params(config, params.to_vec()).unwrap();
    let (wd, wp) = mode.weights();
    let (mut data, mut phys) = (0.0, 0.0);
    for (inputs, truth) in samples {
        let raw = model.forward(inputs).unwrap();
        let n = raw.side();
        let h = raw.h();
        let u = |i: usize, j: usize| if i == 0 || j == 0 || i == n - 1 || j == n - 1 { 0.0 } else { raw.get(i, j) };
        let mut num = 0.0;
        for i in 0..n {
            for j in 0..n {
                num += (u(i, j) - truth.get(i, j)).abs();
            }
        }
        data += num / truth.l1_norm();
        let mut sq = 0.0;
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                let lap = (u(i + 1, j) + u(i - 1, j) + u(i, j + 1) + u(i, j - 1) - 4.0 * u(i, j)) / (h * h);
                let r = -lap - inputs[0].get(i, j);
                sq += r * r;
            }
        }
        phys += sq / ((n - 2) * (n - 2)) as f64;
    }
    let k = samples.len() as f64;
    wd * data / k + wp * phys / k
}

fn gradient_oracle() -> Verdict {
    let clock = Instant::now();
    let task = PdeTask::Poisson;
    let config = OperatorConfig {
        in_channels: 1,
        width: 4,
        layers: 2,
        modes: 4,
        output_scale: 1.0,
    };
    let (set, _) = generate_labeled_set(&task, Grid::new(16).unwrap(), 2, 11).unwrap();
    let samples: Vec<_> = (0..2).map(|k| (set.input(k).to_vec(), set.solution(k).unwrap().clone())).collect();
    let model = NeuralOperator::init(config, 5).unwrap();
    let mut worst: f64 = 0.0;
    for mode in [LossMode::Data, LossMode::Physics, LossMode::hybrid()] {
        let cfg = TrainConfig {
            mode,
            ..TrainConfig::default()
        };
        let trainer = Trainer::new(model.clone(), task, &cfg).unwrap();
        let batch: Vec<_> = samples
            .iter()
            .map(|(i, s)| BatchItem {
                inputs: i,
                solution: Some(s),
            })
            .collect();
        let (parts, grad) = trainer.loss_and_gradient(&batch).unwrap();
        let base = oracle_loss(config, model.params(), mode, &samples);
        assert!((parts.total - base).abs() <= 1e-10 * base.abs().max(1.0), "loss {} vs oracle {base}", parts.total);
        let scale = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        let step = 1e-5;
        for k in 0..grad.len() {
            let mut p = model.params().to_vec();
            p[k] += step;
            let up = oracle_loss(config, &p, mode, &samples);
            p[k] -= 2.0 * step;
            let down = oracle_loss(config, &p, mode, &samples);
            let fd = (up - down) / (2.0 * step);
            let denom = grad[k].abs().max(fd.abs()).max(1e-6 * scale);
            worst = worst.max((grad[k] - fd).abs() / denom);
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    verdict(
        worst < 1e-4 && secs < 120.0,
        format!("max rel err {worst:.2e} over data/physics/hybrid (tol 1e-4), {secs:.1}s (limit 120s)"),
    )
}

fn spectral_oracle() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut rng = rng_from_seed(21);
    for (n, m) in [(8, 4), (8, 2), (16, 4), (16, 8)] {
        let width = 3;
        let modes = mode_count(m);
        let weights: Vec<f64> = (0..2 * modes * width * width).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let input = ndarray::Array2::from_shape_fn((width, n * n), |_| rng.gen_range(-1.0..1.0));
        let mut out = ndarray::Array2::<f64>::zeros((width, n * n));
        let mut spectrum = vec![Complex64::new(0.0, 0.0); width * modes];
        spectral_conv(&weights, width, input.view(), n, m, &mut spectrum, out.view_mut());
        let phase = |ky: usize, kx: usize, i: usize, j: usize| {
            let t = 2.0 * PI * ((ky * i + kx * j) % n) as f64 / n as f64;
            Complex64::new(t.cos(), t.sin())
        };
        let mut xhat = vec![Complex64::new(0.0, 0.0); width * modes];
        for c in 0..width {
            for r in 0..2 * m {
                for kx in 0..m {
                    let ky = retained_ky(n, m, r);
                    for a in 0..n {
                        for b in 0..n {
                            xhat[c * modes + r * m + kx] += input[[c, a * n + b]] * phase(ky, kx, a, b).conj();
                        }
                    }
                }
            }
        }
        for o in 0..width {
            for i in 0..n {
                for j in 0..n {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for r in 0..2 * m {
                        for kx in 0..m {
                            let k = r * m + kx;
                            for c in 0..width {
                                let base = ((k * width + o) * width + c) * 2;
                                acc += Complex64::new(weights[base], weights[base + 1])
                                    * xhat[c * modes + k]
                                    * phase(retained_ky(n, m, r), kx, i, j);
                            }
                        }
                    }
                    let expected = acc.re / (n * n) as f64;
                    worst = worst.max((out[[o, i * n + j]] - expected).abs());
                }
            }
        }
    }
    verdict(worst < 1e-10, format!("max abs diff vs dense DFT {worst:.2e} on 8x8 and 16x16 (tol 1e-10)"))
}

fn fem_convergence() -> Verdict {
    let clock = Instant::now();
    let mut errors = Vec::new();
    for n in [17, 33, 65] {
        let grid = Grid::new(n).unwrap();
        let f = ScalarField2D::from_fn(grid, |x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin());
        let (u, _) = solve_poisson(grid, &f, 1e-12).unwrap();
        let exact = ScalarField2D::from_fn(grid, |x, y| (PI * x).sin() * (PI * y).sin());
        let err = u.values().iter().zip(exact.values()).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
        errors.push(err);
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let secs = clock.elapsed().as_secs_f64();
    verdict(
        orders.iter().all(|o| (1.8..=2.2).contains(o)) && secs < 60.0,
        format!("L-inf orders {orders:.3?} (range [1.8, 2.2]), {secs:.1}s (limit 60s)"),
    )
}

fn stencil_exactness() -> Verdict {
    let mut worst: f64 = 0.0;
    for n in [3, 5, 9, 17, 33, 65, 129] {
        let grid = Grid::new(n).unwrap();
        let u = ScalarField2D::from_fn(grid, |x, y| x * (1.0 - x) * y * (1.0 - y));
        let lap = fd_laplacian(&u, PadMode::Zero);
        worst = worst.max((lap.get(n / 2, n / 2) + 1.0).abs());
    }
    verdict(worst < 1e-10, format!("max |lap + 1| at the center {worst:.2e} over n in 3..129 (tol 1e-10)"))
}

fn residual_consistency() -> Verdict {
    let rows = audit_residual(&PdeTask::Poisson, &[33, 65], 10, 8).unwrap();
    let ratios = audit_ratios(&rows, 33, 65);
    let (lo, hi) = ratios.iter().fold((f64::MAX, f64::MIN), |(a, b), r| (a.min(*r), b.max(*r)));
    verdict(
        ratios.len() == 10 && lo >= 3.5 && hi <= 4.5,
        format!("mean |r| ratio n=33 -> 65 on {} sources in [{lo:.3}, {hi:.3}] (range [3.5, 4.5])", ratios.len()),
    )
}

struct Shared {
    spec: ExperimentSpec,
    data: Datasets,
    pretrained: Checkpoint,
}

fn zero_data_physics(s: &Shared) -> Verdict {
    let task = s.spec.task;
    let pool = s.data.training(0).unwrap();
    let test = s.data.in_dist_test().unwrap();
    let start = || Start::Pretrained {
        from: &s.pretrained,
        output_scale: s.spec.operator.output_scale,
    };
    let mut cfg = s.spec.train_config(Configuration::FtPhysics, 0);
    cfg.steps = 0;
    let (untrained, _) = finetune(start(), &task, &pool, &cfg).unwrap();
    let before = pift::experiments::evaluate(&untrained.model, &test, &task).unwrap().median_solution;
    cfg.steps = 2000;
    let clock = Instant::now();
    let (trained, _) = finetune(start(), &task, &pool, &cfg).unwrap();
    let secs = clock.elapsed().as_secs_f64();
    let after = pift::experiments::evaluate(&trained.model, &test, &task).unwrap().median_solution;
    let factor = before / after;
    verdict(
        factor >= 5.0 && secs < 900.0,
        format!(
            "median rel-L1 {before:.4} -> {after:.4} on {} tests, factor {factor:.2} (need >= 5), 2000 steps in {secs:.0}s (limit 900s)",
            test.len()
        ),
    )
}

fn scratch_data_trend(s: &Shared) -> Verdict {
    let spec = ExperimentSpec {
        configurations: vec![Configuration::ScratchData],
        m_list: vec![1, 4, 16, 64, 256],
        ..s.spec.clone()
    };
    let out = run_scaling(&spec, &s.data, &s.pretrained, None).unwrap();
    let errs: Vec<f64> = spec
        .m_list
        .iter()
        .map(|&m| out.row(Configuration::ScratchData, m, Regime::Interp).unwrap().median_solution)
        .collect();
    let violations = errs.windows(2).filter(|w| !(w[1] <= w[0])).count();
    verdict(
        violations <= 1,
        format!("scratch-data interp medians over M=1,4,16,64,256: {errs:.4?}, {violations} violation(s) (max 1)"),
    )
}

fn hybrid_ood_at_one_sample(s: &Shared) -> Verdict {
    let mut wins = 0;
    let mut detail = Vec::new();
    for seed in [4, 5, 6] {
        let spec = ExperimentSpec {
            configurations: vec![Configuration::FtHybrid, Configuration::ScratchData],
            m_list: vec![1],
            training: TrainingSpec {
                batch_size: 1,
                ..s.spec.training.clone()
            },
            seeds: Seeds {
                train: seed,
                ..s.spec.seeds
            },
            ..s.spec.clone()
        };
        let out = run_scaling(&spec, &s.data, &s.pretrained, None).unwrap();
        let hybrid = out.row(Configuration::FtHybrid, 1, Regime::Extrap).unwrap().median_solution;
        let scratch = out.row(Configuration::ScratchData, 1, Regime::Extrap).unwrap().median_solution;
        if hybrid < scratch {
            wins += 1;
        }
        detail.push(format!("seed {seed}: {hybrid:.4} vs {scratch:.4}"));
    }
    verdict(
        wins >= 2,
        format!("M=1 OOD median ft-hybrid vs scratch-data: {} ({wins}/3 lower, need 2)", detail.join("; ")),
    )
}

fn physics_residual_below_data(s: &Shared) -> Verdict {
    let mut wins = 0;
    let mut detail = Vec::new();
    for seed in [4, 5, 6] {
        let spec = ExperimentSpec {
            configurations: vec![Configuration::FtData, Configuration::FtPhysics],
            m_list: vec![16, 64],
            seeds: Seeds {
                train: seed,
                ..s.spec.seeds
            },
            ..s.spec.clone()
        };
        let out = run_scaling(&spec, &s.data, &s.pretrained, None).unwrap();
        let mut ok = true;
        for m in [16, 64] {
            let phys = out.row(Configuration::FtPhysics, m, Regime::Interp).unwrap().median_residual;
            let data = out.row(Configuration::FtData, m, Regime::Interp).unwrap().median_residual;
            ok &= phys < data;
            detail.push(format!("seed {seed} M={m}: {phys:.3} vs {data:.3}"));
        }
        wins += ok as usize;
    }
    verdict(
        wins >= 2,
        format!("interp median residual ft-physics vs ft-data: {} ({wins}/3 seeds lower at both M, need 2)", detail.join("; ")),
    )
}

fn sweep_determinism() -> Verdict {
    let spec = ExperimentSpec {
        training: TrainingSpec {
            steps: 10,
            ..small_spec(PdeTask::Poisson).training
        },
        pretrain_steps: 20,
        ..small_spec(PdeTask::Poisson)
    };
    let run = |dir: &Path| {
        run_experiment(&spec, dir).unwrap();
        std::fs::read(dir.join("scaling.csv")).unwrap()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (first, second) = (run(a.path()), run(b.path()));
    let rows = String::from_utf8_lossy(&first).lines().filter(|l| !l.starts_with('#')).count() - 1;
    verdict(
        first == second && rows == 50,
        format!(
            "5 configurations x M=1,4,16,64,256 (10 steps each): {rows} rows, byte-identical: {}",
            first == second
        ),
    )
}

fn dataset_integrity() -> Verdict {
    let mut checks = Vec::new();
    for task in [PdeTask::Poisson, PdeTask::helmholtz()] {
        let (set, _) = generate_labeled_set(&task, Grid::new(17).unwrap(), 5, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_sampleset(&set, dir.path()).unwrap();
        let back = load_sampleset(dir.path()).unwrap();
        let bits = |s: &SampleSet| -> Vec<u64> {
            let mut v: Vec<u64> = s.inputs().iter().flatten().flat_map(|f| f.values().iter().map(|x| x.to_bits())).collect();
            v.extend(s.solutions().unwrap().iter().flat_map(|f| f.values().iter().map(|x| x.to_bits())));
            v
        };
        checks.push(("round trip", bits(&set) == bits(&back) && set.checksum() == back.checksum()));

        let inputs = dir.path().join("inputs.bin");
        let original = std::fs::read(&inputs).unwrap();
        let mut flipped = original.clone();
        flipped[original.len() / 2] ^= 0x01;
        std::fs::write(&inputs, &flipped).unwrap();
        checks.push(("flipped byte", matches!(load_sampleset(dir.path()), Err(Error::ChecksumMismatch { .. }))));
        std::fs::write(&inputs, &original[..original.len() - 8]).unwrap();
        checks.push(("truncated", matches!(load_sampleset(dir.path()), Err(Error::SizeMismatch { .. }))));
        std::fs::write(&inputs, &original).unwrap();

        let manifest = dir.path().join("manifest.json");
        let text = std::fs::read_to_string(&manifest).unwrap();
        let mut json: serde_json::Value = serde_json::from_str(&text).unwrap();
        json["format_version"] = serde_json::json!(99);
        std::fs::write(&manifest, json.to_string()).unwrap();
        checks.push(("version", matches!(load_sampleset(dir.path()), Err(Error::Version(99)))));
        std::fs::write(&manifest, "{ not json").unwrap();
        checks.push(("manifest", matches!(load_sampleset(dir.path()), Err(Error::Malformed { .. }))));
        std::fs::remove_dir_all(dir.path()).unwrap();
        checks.push(("missing", matches!(load_sampleset(dir.path()), Err(Error::MissingDataset(_)))));
    }
    let failed: Vec<_> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    verdict(
        failed.is_empty(),
        format!("{} checks on Poisson and Helmholtz sets, failed: {failed:?}", checks.len()),
    )
}

fn helmholtz_coverage(pretrained: &Checkpoint) -> Verdict {
    let grid = Grid::new(33).unwrap();
    let mut rng = rng_from_seed(12);
    let mut worst: f64 = 0.0;
    let omega = 2.5 * PI;
    for _ in 0..20 {
        let b = rng.gen_range(0.25..0.5);
        let (u, _) = solve_helmholtz(grid, &ScalarField2D::zeros(grid), omega, b, FEM_TOLERANCE).unwrap();
        worst = worst.max(u.values().iter().fold(0.0f64, |a, v| a.max((v - b).abs() / b)));
    }
    let spec = ExperimentSpec {
        configurations: vec![Configuration::FtPhysics],
        m_list: vec![16],
        test_in_dist: 32,
        test_ood: 16,
        train_pool: 64,
        training: TrainingSpec {
            steps: 200,
            ..small_spec(PdeTask::Poisson).training
        },
        ..small_spec(PdeTask::helmholtz())
    };
    let data = generate_datasets(&spec).unwrap();
    let out = run_scaling(&spec, &data, pretrained, None).unwrap();
    let rows: Vec<String> = out
        .rows
        .iter()
        .map(|r| format!("{}: sol {:.3} res {:.3} {}", r.regime.name(), r.median_solution, r.median_residual, r.status))
        .collect();
    let both = [Regime::Interp, Regime::Extrap]
        .iter()
        .all(|&g| out.row(Configuration::FtPhysics, 16, g).is_some_and(|r| r.is_ok() && r.median_solution.is_finite()));
    verdict(
        worst <= 1e-8 && both,
        format!("a=0 gives max |u-b|/b {worst:.1e} over 20 b (tol 1e-8); physics fine-tuning rows [{}]", rows.join("; ")),
    )
}

fn main() {
    let total = Instant::now();
    let mut failures = 0;
    let mut report = |id: usize, name: &str, f: &mut dyn FnMut() -> Verdict| {
        let clock = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.pass {
            failures += 1;
        }
        println!(
            "{} {id:>2} {name}: {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            clock.elapsed().as_secs_f64()
        );
    };

    report(1, "gradient-oracle", &mut gradient_oracle);
    report(2, "spectral-layer-oracle", &mut spectral_oracle);
    report(3, "fem-convergence", &mut fem_convergence);
    report(4, "stencil-exactness", &mut stencil_exactness);
    report(5, "residual-consistency", &mut residual_consistency);

    let spec = small_spec(PdeTask::Poisson);
    let clock = Instant::now();
    let data = generate_datasets(&spec).expect("datasets");
    let (pretrained, _) = pretrain(&spec.pretrain_config()).expect("pretraining");
    println!("     setup: datasets and {} pretraining steps [{:.1}s]", spec.pretrain_steps, clock.elapsed().as_secs_f64());
    let shared = Shared { spec, data, pretrained };

    report(6, "zero-data-physics", &mut || zero_data_physics(&shared));
    report(7, "scratch-data-trend", &mut || scratch_data_trend(&shared));
    report(8, "hybrid-ood-at-one-sample", &mut || hybrid_ood_at_one_sample(&shared));
    report(9, "physics-residual-below-data", &mut || physics_residual_below_data(&shared));
    report(10, "sweep-determinism", &mut sweep_determinism);
    report(11, "dataset-integrity", &mut dataset_integrity);
    report(12, "helmholtz-coverage", &mut || helmholtz_coverage(&shared.pretrained));

    println!("{failures} of 12 criteria failed [{:.0}s total]", total.elapsed().as_secs_f64());
    if failures > 0 {
        std::process::exit(1);
    }
}
