//! Finite-difference residual of reference solutions under grid refinement.
//! The mean |r| should drop about 4x per halving of h.
//!
//! cargo run --release --example residual_audit -- [samples]

use pift::experiments::{audit_ratios, audit_residual};
use pift::PdeTask;

fn main() -> pift::Result<()> {
    let count = std::env::args().nth(1).map_or(5, |s| s.parse().expect("sample count"));
    let grids = [17, 33, 65];
    for task in [PdeTask::Poisson, PdeTask::helmholtz()] {
        let rows = audit_residual(&task, &grids, count, 8)?;
        for w in grids.windows(2) {
            let ratios = audit_ratios(&rows, w[0], w[1]);
            let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
            println!("{:<9} n={:>2} -> {:>2}: mean |r| ratio {mean:.3}", task.name(), w[0], w[1]);
        }
        let finest: Vec<String> = rows
            .iter()
            .filter(|r| r.n == 65)
            .map(|r| format!("{:.2e}", r.residual_rel_l1))
            .collect();
        println!("{:<9} relative residual at n=65: {}", task.name(), finest.join(" "));
    }
    Ok(())
}
