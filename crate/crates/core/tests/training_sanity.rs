use pift::experiments::predict_set;
use pift::fem::generate_labeled_set;
use pift::train::{data_loss, finetune, Start};
use pift::*;

#[test]
fn data_mode_reduces_training_loss() {
    let task = PdeTask::Poisson;
    let (set, _) = generate_labeled_set(&task, Grid::new(32).unwrap(), 64, 17).unwrap();
    let operator = OperatorConfig {
        in_channels: 1,
        width: 16,
        layers: 3,
        modes: 8,
        output_scale: task.output_scale(),
    };
    let loss_after = |steps: usize| {
        let cfg = TrainConfig {
            mode: LossMode::Data,
            steps,
            seed: 9,
            ..TrainConfig::default()
        };
        let (ckpt, _) = finetune(Start::Scratch(operator), &task, &set, &cfg).unwrap();
        data_loss(&predict_set(&ckpt.model, &task, &set).unwrap(), set.solutions().unwrap()).unwrap()
    };
    let initial = loss_after(0);
    let trained = loss_after(500);
    assert!(trained < 0.3 * initial, "data loss {initial} -> {trained}");
}
