//! Helmholtz with variable media: reference solves on Gaussian and
//! wavy-stripe media, then physics-informed fine-tuning of a transferred
//! two-channel operator.
//!
//! cargo run --release --example helmholtz -- [steps]

use pift::experiments::{generate_datasets, run_scaling, Configuration, ExperimentSpec, TrainingSpec};
use pift::fem::solve_task;
use pift::train::pretrain;
use pift::{Grid, OperatorConfig, PdeTask};

fn main() -> pift::Result<()> {
    let steps = std::env::args().nth(1).map_or(300, |s| s.parse().expect("step count"));
    let task = PdeTask::helmholtz();
    let grid = Grid::new(33)?;
    let families = [task.training_family()].into_iter().chain(task.extrapolation_families());
    for family in families {
        let inputs = family.sample(grid, 3)?;
        let (u, report) = solve_task(&task, grid, &inputs, 1e-10)?;
        println!(
            "{:<22} a in [{:.2}, {:.2}], b = {:.3}, max|u| {:.3}, solver residual {:.1e}",
            family.name(),
            inputs[0].values().iter().cloned().fold(f64::MAX, f64::min),
            inputs[0].max_abs(),
            inputs[1].get(0, 0),
            u.max_abs(),
            report.residual
        );
    }

    let spec = ExperimentSpec {
        task,
        grid_n: 32,
        m_list: vec![16],
        configurations: vec![Configuration::FtPhysics, Configuration::FtData],
        test_in_dist: 32,
        test_ood: 16,
        train_pool: 32,
        operator: OperatorConfig {
            width: 16,
            layers: 3,
            modes: 8,
            ..OperatorConfig::for_task(&task)
        },
        training: TrainingSpec {
            steps,
            ..TrainingSpec::default()
        },
        pretrain_steps: 400,
        ..ExperimentSpec::default()
    };
    let data = generate_datasets(&spec)?;
    let (pretrained, _) = pretrain(&spec.pretrain_config())?;
    let outcome = run_scaling(&spec, &data, &pretrained, None)?;
    print!("{}", outcome.csv());
    Ok(())
}
