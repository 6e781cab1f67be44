//! Fine-tune a pretrained operator on Poisson with the physics loss only:
//! no reference solutions are used for training.
//!
//! cargo run --release --example physics_finetune -- [steps]

use pift::experiments::{evaluate, generate_datasets, ExperimentSpec, TrainingSpec};
use pift::train::{finetune, pretrain, LossMode, Start, TrainConfig};
use pift::{OperatorConfig, PdeTask};

fn main() -> pift::Result<()> {
    let steps = std::env::args().nth(1).map_or(2000, |s| s.parse().expect("step count"));
    let task = PdeTask::Poisson;
    let spec = ExperimentSpec {
        grid_n: 32,
        m_list: vec![1],
        test_in_dist: 32,
        test_ood: 8,
        train_pool: 8,
        operator: OperatorConfig {
            width: 16,
            layers: 3,
            modes: 8,
            ..OperatorConfig::for_task(&task)
        },
        training: TrainingSpec::default(),
        pretrain_steps: 800,
        ..ExperimentSpec::default()
    };
    let data = generate_datasets(&spec)?;
    let test = data.in_dist_test()?;
    let (pretrained, _) = pretrain(&spec.pretrain_config())?;
    let start = || Start::Pretrained {
        from: &pretrained,
        output_scale: spec.operator.output_scale,
    };
    let no_labels = data.training(0)?;

    for steps in [0, steps] {
        let cfg = TrainConfig {
            mode: LossMode::Physics,
            steps,
            ..TrainConfig::default()
        };
        let (ckpt, log) = finetune(start(), &task, &no_labels, &cfg)?;
        let ev = evaluate(&ckpt.model, &test, &task)?;
        let last = log.last().map_or(f64::NAN, |r| r.physics_loss);
        println!(
            "{steps:>5} steps: median solution rel-L1 {:.4}, residual rel-L1 {:.4}, last physics loss {last:.3e}",
            ev.median_solution, ev.median_residual
        );
    }
    Ok(())
}
