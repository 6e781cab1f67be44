//! A small scaling sweep over all five configurations, written as
//! `scaling.csv` plus per-cell training logs.
//!
//! cargo run --release --example scaling_sweep -- [out_dir]

use pift::experiments::{run_experiment, ExperimentSpec, Regime, TrainingSpec};
use pift::{OperatorConfig, PdeTask};

fn main() -> pift::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/example-sweep".into());
    let spec = ExperimentSpec {
        grid_n: 32,
        m_list: vec![1, 8, 32],
        test_in_dist: 32,
        test_ood: 18,
        train_pool: 32,
        operator: OperatorConfig {
            width: 12,
            layers: 2,
            modes: 6,
            ..OperatorConfig::for_task(&PdeTask::Poisson)
        },
        training: TrainingSpec {
            steps: 150,
            ..TrainingSpec::default()
        },
        pretrain_steps: 300,
        ..ExperimentSpec::default()
    };
    let outcome = run_experiment(&spec, out.as_ref())?;
    println!("{:<16} {:>3} {:>10} {:>10}", "config", "M", "interp", "extrap");
    for &config in &spec.configurations {
        for &m in &spec.m_list {
            let cell = |regime| outcome.row(config, m, regime).map_or(f64::NAN, |r| r.median_solution);
            println!("{:<16} {m:>3} {:>10.4} {:>10.4}", config.name(), cell(Regime::Interp), cell(Regime::Extrap));
        }
    }
    println!("wrote {out}/scaling.csv");
    Ok(())
}
