//! Pretrain on the smoothing surrogate, then transfer the backbone into a
//! Poisson model and a two-channel Helmholtz model.
//!
//! cargo run --release --example pretrain_and_transfer -- [steps]

use pift::operator::Subset;
use pift::train::{pretrain, surrogate_error, PretrainConfig};
use pift::{Grid, NeuralOperator, OperatorConfig, PdeTask};

fn main() -> pift::Result<()> {
    let steps = std::env::args().nth(1).map_or(400, |s| s.parse().expect("step count"));
    let operator = OperatorConfig {
        in_channels: 1,
        width: 16,
        layers: 3,
        modes: 8,
        output_scale: 1.0,
    };
    let cfg = PretrainConfig {
        grid_n: 32,
        operator,
        steps,
        ..PretrainConfig::default()
    };
    let grid = Grid::new(cfg.grid_n)?;
    let untrained = NeuralOperator::init(operator, 1)?;
    let before = surrogate_error(&untrained, grid, cfg.smoothing, 16, 99)?;
    let (ckpt, log) = pretrain(&cfg)?;
    let after = surrogate_error(&ckpt.model, grid, cfg.smoothing, 16, 99)?;
    for r in log.records.iter().step_by((steps / 8).max(1)) {
        println!("step {:>5}  loss {:.4}", r.step, r.total_loss);
    }
    println!("held-out surrogate rel-L1: {before:.4} -> {after:.4} (tags {:?})", ckpt.meta.tags);

    for task in [PdeTask::Poisson, PdeTask::helmholtz()] {
        let target = OperatorConfig {
            in_channels: task.in_channels(),
            output_scale: task.output_scale(),
            ..operator
        };
        let model = NeuralOperator::transfer_init(&ckpt.model, target, 5)?;
        let layout = model.layout();
        let source = ckpt.model.layout();
        // Offsets shift with the lifting size, so match blocks by name.
        let copied = layout.blocks.iter().filter(|b| b.subset == Subset::Backbone).all(|b| {
            let from = source.block(&b.name).expect("same backbone");
            model.params()[b.range()] == ckpt.model.params()[from.range()]
        });
        println!(
            "{:<9} {} params, backbone copied: {copied}, embedding re-initialized",
            task.name(),
            layout.len()
        );
    }
    Ok(())
}
