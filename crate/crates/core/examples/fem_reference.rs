//! Reference solutions with bilinear finite elements: convergence on a
//! manufactured Poisson problem and the trivial Helmholtz case a = 0.
//!
//! cargo run --release --example fem_reference

use std::f64::consts::PI;

use pift::fem::{solve_helmholtz, solve_poisson, FEM_TOLERANCE};
use pift::{Grid, ScalarField2D};

fn main() -> pift::Result<()> {
    let mut previous: Option<f64> = None;
    for n in [9, 17, 33, 65, 129] {
        let grid = Grid::new(n)?;
        let f = ScalarField2D::from_fn(grid, |x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin());
        let (u, report) = solve_poisson(grid, &f, 1e-12)?;
        let exact = ScalarField2D::from_fn(grid, |x, y| (PI * x).sin() * (PI * y).sin());
        let err = u.values().iter().zip(exact.values()).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
        let order = previous.map_or(String::new(), |e| format!("order {:.3}", (e / err).log2()));
        println!("n={n:>3}  L-inf error {err:.3e}  {order:<12} CG iterations {}", report.iterations);
        previous = Some(err);
    }

    let grid = Grid::new(33)?;
    let (u, report) = solve_helmholtz(grid, &ScalarField2D::zeros(grid), 2.5 * PI, 0.4, FEM_TOLERANCE)?;
    let dev = u.values().iter().fold(0.0f64, |a, v| a.max((v - 0.4).abs()));
    println!("helmholtz a=0, b=0.4: max |u - b| = {dev:.2e} (residual {:.1e})", report.residual);
    Ok(())
}
