//! Build a spectral neural operator, inspect its parameter layout, run a
//! forward pass and round-trip it through a checkpoint.
//!
//! cargo run --release --example spectral_operator

use pift::operator::{load_checkpoint, save_checkpoint, CheckpointMeta, Subset};
use pift::sources::{gen_gaussian_blobs, BlobParams};
use pift::{Checkpoint, Grid, NeuralOperator, OperatorConfig, PdeTask};

fn main() -> pift::Result<()> {
    let config = OperatorConfig::for_task(&PdeTask::Poisson);
    let model = NeuralOperator::init(config, 7)?;
    let layout = model.layout();
    println!("{config:?}");
    println!("{} parameters ({} closed form)", layout.len(), config.param_count());
    for subset in [Subset::Backbone, Subset::Embedding] {
        let count = layout.blocks.iter().filter(|b| b.subset == subset).map(|b| b.len).sum::<usize>();
        println!("  {subset:?}: {count}");
    }
    for b in layout.blocks.iter().take(5) {
        println!("  {:<18} offset {:>7} len {:>7} init ±{:.3e}", b.name, b.offset, b.len, b.init_scale);
    }

    let grid = Grid::new(64)?;
    let f = gen_gaussian_blobs(grid, &BlobParams::default(), 3)?;
    let u = model.forward(std::slice::from_ref(&f))?;
    println!("forward on {}x{}: max|f| {:.3}, max|u| {:.3e}", grid.n(), grid.n(), f.max_abs(), u.max_abs());

    let path = std::env::temp_dir().join("pift-example.ckpt");
    let meta = CheckpointMeta {
        seed: 7,
        loss_mode: "none".into(),
        ..CheckpointMeta::default()
    };
    save_checkpoint(&Checkpoint::new(model.clone(), meta), &path)?;
    let back = load_checkpoint(&path)?;
    assert_eq!(back.model.forward(std::slice::from_ref(&f))?, u);
    println!("checkpoint {} reproduces the forward pass bitwise", path.display());
    Ok(())
}
