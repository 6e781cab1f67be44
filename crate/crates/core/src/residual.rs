//! Finite-difference PDE residuals with Dirichlet data imposed by padding.
//!
//! A model emits a raw node field `u` on the `n x n` grid. Only its interior
//! `(n-2)^2` block is used: the interior is padded with the boundary value
//! (zero for Poisson, `b` for Helmholtz) and the 5-point Laplacian is applied
//! at every interior node. Boundary conditions therefore hold exactly and no
//! penalty term is needed.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{pad, PadMode, ScalarField2D};
use crate::sources::{BlobParams, InputFamily, MediumFamily};

/// Frequency of the Helmholtz task.
pub const HELMHOLTZ_OMEGA: f64 = 5.0 * PI / 2.0;

/// Floor below which a relative-residual normalizer is considered degenerate.
pub const NORMALIZER_EPS: f64 = 1e-12;

/// Which steady PDE governs the downstream task.
///
/// - Poisson: `-Δu = f` with `u = 0` on the boundary; input channels `[f]`.
/// - Helmholtz: `-Δu - ω² a u = 0` with `u = b` on the boundary; input
///   channels `[a, b]` where the second channel is `b` broadcast to every node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PdeTask {
    Poisson,
    Helmholtz { omega: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Boundary {
    ZeroDirichlet,
    ConstantDirichlet(f64),
}

impl Boundary {
    pub fn pad_mode(self) -> PadMode {
        match self {
            Boundary::ZeroDirichlet => PadMode::Zero,
            Boundary::ConstantDirichlet(b) => PadMode::Constant(b),
        }
    }
}

impl PdeTask {
    pub fn helmholtz() -> Self {
        PdeTask::Helmholtz {
            omega: HELMHOLTZ_OMEGA,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PdeTask::Poisson => "poisson",
            PdeTask::Helmholtz { .. } => "helmholtz",
        }
    }

    pub fn in_channels(&self) -> usize {
        match self {
            PdeTask::Poisson => 1,
            PdeTask::Helmholtz { .. } => 2,
        }
    }

    /// Typical solution magnitude per unit input: `1/(2π²)` for Poisson (the
    /// inverse of the lowest Dirichlet eigenvalue), 1 for Helmholtz where
    /// the solution follows the boundary value.
    pub fn output_scale(&self) -> f64 {
        match self {
            PdeTask::Poisson => 1.0 / (2.0 * std::f64::consts::PI * std::f64::consts::PI),
            PdeTask::Helmholtz { .. } => 1.0,
        }
    }

    /// Interpolation-regime input distribution.
    pub fn training_family(&self) -> InputFamily {
        match self {
            PdeTask::Poisson => InputFamily::GaussianBlobs(BlobParams::default()),
            PdeTask::Helmholtz { .. } => InputFamily::Medium(MediumFamily::gaussian()),
        }
    }

    /// Extrapolation-regime input families.
    pub fn extrapolation_families(&self) -> Vec<InputFamily> {
        match self {
            PdeTask::Poisson => InputFamily::all_extreme(),
            PdeTask::Helmholtz { .. } => vec![InputFamily::Medium(MediumFamily::wavy_stripes())],
        }
    }

    pub fn check_inputs(&self, u: &ScalarField2D, inputs: &[ScalarField2D]) -> Result<()> {
        if inputs.len() != self.in_channels() {
            return Err(Error::Shape(format!(
                "{} task expects {} input channels, got {}",
                self.name(),
                self.in_channels(),
                inputs.len()
            )));
        }
        if u.side() < 3 {
            return Err(Error::InvalidGrid(format!("side {} has no interior", u.side())));
        }
        for field in inputs {
            u.check_same_shape(field)?;
        }
        Ok(())
    }

    /// Boundary condition of one sample; Helmholtz reads `b` from channel 1.
    pub fn boundary_for(&self, inputs: &[ScalarField2D]) -> Boundary {
        match self {
            PdeTask::Poisson => Boundary::ZeroDirichlet,
            PdeTask::Helmholtz { .. } => Boundary::ConstantDirichlet(inputs[1].get(0, 0)),
        }
    }
}

/// 5-point Laplacian `(u_E + u_W + u_N + u_S - 4 u_C) / h^2` of `u` after
/// padding it per `mode`. Output has the same side as `u`.
pub fn fd_laplacian(u: &ScalarField2D, mode: PadMode) -> ScalarField2D {
    let k = u.side();
    let p = pad(u, mode);
    let s = k + 2;
    let pv = p.values();
    let inv_h2 = 1.0 / (u.h() * u.h());
    let mut out = Vec::with_capacity(k * k);
    for i in 0..k {
        let c = (i + 1) * s;
        for j in 0..k {
            let cj = c + j + 1;
            let lap = pv[cj - 1] + pv[cj + 1] + pv[cj - s] + pv[cj + s] - 4.0 * pv[cj];
            out.push(lap * inv_h2);
        }
    }
    ScalarField2D::from_raw_unchecked(k, u.h(), out)
}

/// Raw model output with the boundary ring replaced by the Dirichlet data.
pub fn enforce_boundary(raw: &ScalarField2D, boundary: Boundary) -> ScalarField2D {
    pad(&raw.interior(), boundary.pad_mode())
}

/// Residual at the interior nodes: `-Δ_h u - f` (Poisson) or
/// `-Δ_h u - ω² a u` (Helmholtz), with `u` padded by its boundary data.
pub fn pde_residual(task: &PdeTask, u: &ScalarField2D, inputs: &[ScalarField2D]) -> Result<ScalarField2D> {
    task.check_inputs(u, inputs)?;
    let interior = u.interior();
    let mut r = fd_laplacian(&interior, task.boundary_for(inputs).pad_mode());
    match task {
        PdeTask::Poisson => {
            let f = inputs[0].interior();
            for (rv, fv) in r.values_mut().iter_mut().zip(f.values()) {
                *rv = -*rv - fv;
            }
        }
        PdeTask::Helmholtz { omega } => {
            let w2 = omega * omega;
            let a = inputs[0].interior();
            for ((rv, av), uv) in r.values_mut().iter_mut().zip(a.values()).zip(interior.values()) {
                *rv = -*rv - w2 * av * uv;
            }
        }
    }
    Ok(r)
}

/// Mean over the batch and the interior nodes of the squared residual.
pub fn physics_loss(task: &PdeTask, u_batch: &[ScalarField2D], input_batch: &[&[ScalarField2D]]) -> Result<f64> {
    if u_batch.is_empty() {
        return Err(Error::Empty("physics loss of an empty batch".into()));
    }
    if u_batch.len() != input_batch.len() {
        return Err(Error::Shape(format!(
            "{} outputs for {} inputs",
            u_batch.len(),
            input_batch.len()
        )));
    }
    let mut total = 0.0;
    for (u, inputs) in u_batch.iter().zip(input_batch) {
        let r = pde_residual(task, u, inputs)?;
        total += r.values().iter().map(|v| v * v).sum::<f64>() / r.len() as f64;
    }
    Ok(total / u_batch.len() as f64)
}

/// Mean squared residual of one sample and `weight` times its gradient with
/// respect to the raw output `u` (zero on the boundary ring).
pub fn residual_loss_grad(
    task: &PdeTask,
    u: &ScalarField2D,
    inputs: &[ScalarField2D],
    weight: f64,
) -> Result<(f64, ScalarField2D)> {
    let r = pde_residual(task, u, inputs)?;
    let count = r.len() as f64;
    let loss = r.values().iter().map(|v| v * v).sum::<f64>() / count;
    let scale = 2.0 * weight / count;
    // The zero-padded 5-point stencil is symmetric, so it is its own adjoint.
    let lap_r = fd_laplacian(&r, PadMode::Zero);
    let mut g_int: Vec<f64> = lap_r.values().iter().map(|v| -scale * v).collect();
    if let PdeTask::Helmholtz { omega } = task {
        let w2 = omega * omega;
        let a = inputs[0].interior();
        for ((g, av), rv) in g_int.iter_mut().zip(a.values()).zip(r.values()) {
            *g -= scale * w2 * av * rv;
        }
    }
    let interior = ScalarField2D::from_raw_unchecked(r.side(), r.h(), g_int);
    Ok((loss, pad(&interior, PadMode::Zero)))
}

/// Normalizer of the relative residual: `||f||_1` (Poisson) or
/// `||ω² a u||_1 + ε` (Helmholtz), over interior nodes.
fn residual_normalizer(task: &PdeTask, u: &ScalarField2D, inputs: &[ScalarField2D]) -> f64 {
    match task {
        PdeTask::Poisson => inputs[0].interior().l1_norm(),
        PdeTask::Helmholtz { omega } => {
            let a = inputs[0].interior();
            let ui = u.interior();
            let s: f64 = a
                .values()
                .iter()
                .zip(ui.values())
                .map(|(av, uv)| (omega * omega * av * uv).abs())
                .sum();
            s + NORMALIZER_EPS
        }
    }
}

/// `||r||_1` divided by the task's normalizer.
pub fn residual_rel_l1(task: &PdeTask, u: &ScalarField2D, inputs: &[ScalarField2D]) -> Result<f64> {
    let r = pde_residual(task, u, inputs)?;
    let norm = residual_normalizer(task, u, inputs);
    if norm < NORMALIZER_EPS {
        return Err(Error::Degenerate(format!(
            "residual normalizer {norm:e} below {NORMALIZER_EPS:e}"
        )));
    }
    Ok(r.l1_norm() / norm)
}

pub fn mean_abs_residual(task: &PdeTask, u: &ScalarField2D, inputs: &[ScalarField2D]) -> Result<f64> {
    let r = pde_residual(task, u, inputs)?;
    Ok(r.l1_norm() / r.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;
    use proptest::prelude::*;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    fn bubble(g: Grid) -> ScalarField2D {
        ScalarField2D::from_fn(g, |x, y| x * (1.0 - x) * y * (1.0 - y))
    }

    #[test]
    fn laplacian_of_zero_is_zero() {
        let u = ScalarField2D::zeros(grid(9)).interior();
        assert!(fd_laplacian(&u, PadMode::Zero).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bubble_center_value_is_minus_one() {
        for n in [5, 9, 17, 33, 65] {
            let lap = fd_laplacian(&bubble(grid(n)).interior(), PadMode::Zero);
            let c = (n - 2) / 2;
            assert!((lap.get(c, c) + 1.0).abs() < 1e-10, "n={n}: {}", lap.get(c, c));
        }
    }

    #[test]
    fn sine_mode_is_discrete_eigenfunction() {
        let g = grid(17);
        let h = g.h();
        let u = ScalarField2D::from_fn(g, |x, y| (PI * x).sin() * (PI * y).sin());
        let lam = -(8.0 / (h * h)) * (PI * h / 2.0).sin().powi(2);
        let ui = u.interior();
        let lap = fd_laplacian(&ui, PadMode::Zero);
        for (l, v) in lap.values().iter().zip(ui.values()) {
            assert!((l - lam * v).abs() < 1e-10);
        }
    }

    #[test]
    fn stencil_exact_for_quadratic() {
        // u = 1 + 3x^2 + 2xy - y^2, Laplacian 4; nodes next to the padded ring are skipped.
        let g = grid(11);
        let u = ScalarField2D::from_fn(g, |x, y| 1.0 + 3.0 * x * x + 2.0 * x * y - y * y);
        let lap = fd_laplacian(&u.interior(), PadMode::Zero);
        let k = lap.side();
        for i in 1..k - 1 {
            for j in 1..k - 1 {
                assert!((lap.get(i, j) - 4.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn bubble_residual_vanishes_everywhere() {
        for n in [7, 16, 33] {
            let g = grid(n);
            let f = ScalarField2D::from_fn(g, |x, y| 2.0 * x * (1.0 - x) + 2.0 * y * (1.0 - y));
            let r = pde_residual(&PdeTask::Poisson, &bubble(g), &[f]).unwrap();
            assert!(r.max_abs() < 1e-10, "n={n}: {}", r.max_abs());
        }
    }

    #[test]
    fn poisson_residual_of_zero_is_minus_source() {
        let g = grid(12);
        let f = ScalarField2D::from_fn(g, |x, y| (3.0 * x).sin() + y);
        let r = pde_residual(&PdeTask::Poisson, &ScalarField2D::zeros(g), &[f.clone()]).unwrap();
        let fi = f.interior();
        for (rv, fv) in r.values().iter().zip(fi.values()) {
            assert_eq!(*rv, -fv);
        }
        let rel = residual_rel_l1(&PdeTask::Poisson, &ScalarField2D::zeros(g), &[f]).unwrap();
        assert!((rel - 1.0).abs() < 1e-15);
    }

    #[test]
    fn raw_boundary_ring_is_ignored() {
        let g = grid(10);
        let f = ScalarField2D::from_fn(g, |x, _| x);
        let u = ScalarField2D::from_fn(g, |x, y| x * y);
        let mut u2 = u.clone();
        for k in 0..10 {
            u2.set(0, k, 99.0);
            u2.set(k, 9, -7.0);
        }
        let r1 = pde_residual(&PdeTask::Poisson, &u, &[f.clone()]).unwrap();
        let r2 = pde_residual(&PdeTask::Poisson, &u2, &[f]).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn helmholtz_constant_matches_constant_boundary() {
        let g = grid(15);
        let b = 0.4;
        let a = ScalarField2D::zeros(g);
        let u = ScalarField2D::constant(g, b);
        let inputs = [a, ScalarField2D::constant(g, b)];
        let r = pde_residual(&PdeTask::helmholtz(), &u, &inputs).unwrap();
        assert!(r.values().iter().all(|&v| v == 0.0));
        let rel = residual_rel_l1(&PdeTask::helmholtz(), &u, &inputs).unwrap();
        assert_eq!(rel, 0.0);
    }

    #[test]
    fn enforce_boundary_sets_ring() {
        let g = grid(6);
        let raw = ScalarField2D::constant(g, 3.0);
        let u = enforce_boundary(&raw, Boundary::ConstantDirichlet(0.3));
        for i in 0..6 {
            for j in 0..6 {
                let expect = if g.is_boundary(i, j) { 0.3 } else { 3.0 };
                assert_eq!(u.get(i, j), expect);
            }
        }
    }

    #[test]
    fn physics_loss_cases() {
        let g = grid(8);
        let f = ScalarField2D::constant(g, -2.0);
        // u = 0 gives r = -f = 2 everywhere.
        let loss = physics_loss(&PdeTask::Poisson, &[ScalarField2D::zeros(g)], &[&[f.clone()]]).unwrap();
        assert_eq!(loss, 4.0);
        assert!(physics_loss(&PdeTask::Poisson, &[], &[]).is_err());
        let bub = bubble(g);
        let lap = fd_laplacian(&bub.interior(), PadMode::Zero);
        let exact_f = pad(&lap.scaled(-1.0), PadMode::Zero);
        let l0 = physics_loss(&PdeTask::Poisson, &[bub], &[&[exact_f]]).unwrap();
        assert_eq!(l0, 0.0);
    }

    #[test]
    fn physics_loss_matches_two_loop_oracle() {
        use rand::Rng;
        let mut rng = crate::rng::rng_from_seed(5);
        let g = grid(7);
        let h = g.h();
        let n = 7;
        let mut us = Vec::new();
        let mut fs = Vec::new();
        for _ in 0..3 {
            us.push(ScalarField2D::from_values(g, (0..49).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap());
            fs.push(ScalarField2D::from_values(g, (0..49).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap());
        }
        let mut oracle = 0.0;
        for (u, f) in us.iter().zip(&fs) {
            let val = |i: usize, j: usize| {
                if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
                    0.0
                } else {
                    u.get(i, j)
                }
            };
            let mut s = 0.0;
            for i in 1..n - 1 {
                for j in 1..n - 1 {
                    let lap = (val(i + 1, j) + val(i - 1, j) + val(i, j + 1) + val(i, j - 1) - 4.0 * val(i, j)) / (h * h);
                    let r = -lap - f.get(i, j);
                    s += r * r;
                }
            }
            oracle += s / 25.0;
        }
        oracle /= 3.0;
        let inputs: Vec<&[ScalarField2D]> = fs.iter().map(std::slice::from_ref).collect();
        let loss = physics_loss(&PdeTask::Poisson, &us, &inputs).unwrap();
        assert!((loss - oracle).abs() <= 1e-12 * oracle);
    }

    #[test]
    fn residual_gradient_matches_finite_differences() {
        use rand::Rng;
        let mut rng = crate::rng::rng_from_seed(8);
        let g = grid(6);
        for task in [PdeTask::Poisson, PdeTask::helmholtz()] {
            let u = ScalarField2D::from_values(g, (0..36).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let mut inputs = vec![ScalarField2D::from_values(g, (0..36).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()];
            if task.in_channels() == 2 {
                inputs.push(ScalarField2D::constant(g, 0.3));
            }
            let (_, grad) = residual_loss_grad(&task, &u, &inputs, 1.5).unwrap();
            for k in 0..36 {
                let eps = 1e-6;
                let mut up = u.clone();
                up.values_mut()[k] += eps;
                let mut dn = u.clone();
                dn.values_mut()[k] -= eps;
                let lp = residual_loss_grad(&task, &up, &inputs, 1.0).unwrap().0;
                let lm = residual_loss_grad(&task, &dn, &inputs, 1.0).unwrap().0;
                let fd = 1.5 * (lp - lm) / (2.0 * eps);
                let an = grad.values()[k];
                assert!((fd - an).abs() <= 1e-6 * (1.0 + an.abs()), "{task:?} {k}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn channel_mismatch_rejected() {
        let g = grid(5);
        let u = ScalarField2D::zeros(g);
        assert!(pde_residual(&PdeTask::helmholtz(), &u, &[u.clone()]).is_err());
        assert!(pde_residual(&PdeTask::Poisson, &u, &[ScalarField2D::zeros(grid(6))]).is_err());
    }

    #[test]
    fn degenerate_normalizer_reported() {
        let g = grid(5);
        let u = ScalarField2D::zeros(g);
        assert!(matches!(
            residual_rel_l1(&PdeTask::Poisson, &u, &[u.clone()]),
            Err(Error::Degenerate(_))
        ));
    }

    fn small_field() -> impl Strategy<Value = ScalarField2D> {
        prop::collection::vec(-5.0f64..5.0, 36)
            .prop_map(|v| ScalarField2D::from_values(Grid::new(6).unwrap(), v).unwrap())
    }

    proptest! {
        #[test]
        fn laplacian_is_linear(u in small_field(), v in small_field(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let comb = ScalarField2D::from_values(
                Grid::new(6).unwrap(),
                u.values().iter().zip(v.values()).map(|(x, y)| a * x + b * y).collect(),
            ).unwrap();
            let lc = fd_laplacian(&comb, PadMode::Zero);
            let lu = fd_laplacian(&u, PadMode::Zero);
            let lv = fd_laplacian(&v, PadMode::Zero);
            let scale = 1.0 / (u.h() * u.h());
            for k in 0..36 {
                let expect = a * lu.values()[k] + b * lv.values()[k];
                prop_assert!((lc.values()[k] - expect).abs() <= 1e-12 * scale * 100.0);
            }
        }

        #[test]
        fn physics_loss_nonnegative(u in small_field(), f in small_field()) {
            let l = physics_loss(&PdeTask::Poisson, &[u], &[&[f]]).unwrap();
            prop_assert!(l >= 0.0);
        }
    }
}
