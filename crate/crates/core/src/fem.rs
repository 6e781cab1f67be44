//! Reference solver: bilinear quadrilateral elements on the structured node
//! grid with 2x2 Gauss quadrature.
//!
//! Dirichlet data is imposed by eliminating the boundary unknowns. The
//! Poisson free block is symmetric positive definite and solved with
//! Jacobi-preconditioned conjugate gradients; the Helmholtz block may be
//! indefinite and is factorized with a banded LU with partial pivoting.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde_json::json;

use crate::error::{Error, Result};
use crate::fields::{Grid, SampleSet, ScalarField2D};
use crate::residual::PdeTask;
use crate::sources::gen_input_set;

/// Relative algebraic residual accepted by the reference solves.
pub const FEM_TOLERANCE: f64 = 1e-10;

const GAUSS: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)

/// Reference-square corner signs, counter-clockwise from `(-1, -1)`.
const CORNERS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

fn shape(a: usize, xi: f64, eta: f64) -> f64 {
    let (sa, ta) = CORNERS[a];
    0.25 * (1.0 + sa * xi) * (1.0 + ta * eta)
}

fn shape_grad(a: usize, xi: f64, eta: f64) -> (f64, f64) {
    let (sa, ta) = CORNERS[a];
    (0.25 * sa * (1.0 + ta * eta), 0.25 * ta * (1.0 + sa * xi))
}

fn gauss_points() -> [(f64, f64); 4] {
    [(-GAUSS, -GAUSS), (GAUSS, -GAUSS), (GAUSS, GAUSS), (-GAUSS, GAUSS)]
}

/// `∫ ∇φ_a · ∇φ_b` over an `h x h` cell. Independent of `h` in two dimensions.
pub fn element_stiffness(h: f64) -> [[f64; 4]; 4] {
    let jac = h / 2.0;
    let det = jac * jac;
    let mut k = [[0.0; 4]; 4];
    for (xi, eta) in gauss_points() {
        for a in 0..4 {
            let (ga_x, ga_y) = shape_grad(a, xi, eta);
            for b in 0..4 {
                let (gb_x, gb_y) = shape_grad(b, xi, eta);
                k[a][b] += (ga_x * gb_x + ga_y * gb_y) / (jac * jac) * det;
            }
        }
    }
    k
}

/// `∫ w φ_a φ_b` with `w` bilinearly interpolated from its corner values.
pub fn element_mass(h: f64, weight: [f64; 4]) -> [[f64; 4]; 4] {
    let det = h * h / 4.0;
    let mut m = [[0.0; 4]; 4];
    for (xi, eta) in gauss_points() {
        let phi: [f64; 4] = std::array::from_fn(|a| shape(a, xi, eta));
        let w: f64 = (0..4).map(|c| weight[c] * phi[c]).sum();
        for a in 0..4 {
            for b in 0..4 {
                m[a][b] += w * phi[a] * phi[b] * det;
            }
        }
    }
    m
}

/// Global node indices of cell `(ci, cj)` in local corner order.
fn cell_nodes(n: usize, ci: usize, cj: usize) -> [usize; 4] {
    [ci * n + cj, ci * n + cj + 1, (ci + 1) * n + cj + 1, (ci + 1) * n + cj]
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub rows: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate `(row, col)` entries in a fixed order.
    fn from_triplets(rows: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; rows + 1];
        let mut col_idx = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
            rows,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.rows) {
            *yr = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, r)).collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.rows).all(|r| self.row(r).all(|(c, v)| (self.get(c, r) - v).abs() <= tol))
    }
}

/// Assembled operator over every grid node plus the Dirichlet constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub grid: Grid,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// `(dof, prescribed value)`, sorted by dof.
    pub constraints: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative algebraic residual of the free block.
    pub residual: f64,
    pub wall_time_s: f64,
}

fn boundary_constraints(grid: Grid, value: f64) -> Vec<(usize, f64)> {
    let n = grid.n();
    (0..n * n)
        .filter(|&k| grid.is_boundary(k / n, k % n))
        .map(|k| (k, value))
        .collect()
}

/// Assembles `K - ω² M_a` (with `M_a` omitted when `coefficient` is `None`)
/// and the load `∫ φ_i s` with `s` bilinearly interpolated from nodes.
fn assemble(
    grid: Grid,
    coefficient: Option<(&ScalarField2D, f64)>,
    source: Option<&ScalarField2D>,
    boundary_value: f64,
) -> SparseSystem {
    let n = grid.n();
    let h = grid.h();
    let ke = element_stiffness(h);
    let me = element_mass(h, [1.0; 4]);
    let mut triplets = Vec::with_capacity((n - 1) * (n - 1) * 16);
    let mut rhs = vec![0.0; n * n];
    for ci in 0..n - 1 {
        for cj in 0..n - 1 {
            let nodes = cell_nodes(n, ci, cj);
            let mut local = ke;
            if let Some((a, omega)) = coefficient {
                let w: [f64; 4] = std::array::from_fn(|c| a.values()[nodes[c]]);
                let ma = element_mass(h, w);
                for p in 0..4 {
                    for q in 0..4 {
                        local[p][q] -= omega * omega * ma[p][q];
                    }
                }
            }
            for p in 0..4 {
                for q in 0..4 {
                    triplets.push((nodes[p], nodes[q], local[p][q]));
                }
            }
            if let Some(f) = source {
                for p in 0..4 {
                    rhs[nodes[p]] += (0..4).map(|q| me[p][q] * f.values()[nodes[q]]).sum::<f64>();
                }
            }
        }
    }
    SparseSystem {
        grid,
        matrix: CsrMatrix::from_triplets(n * n, triplets),
        rhs,
        constraints: boundary_constraints(grid, boundary_value),
    }
}

pub fn assemble_poisson(grid: Grid, f: &ScalarField2D) -> Result<SparseSystem> {
    f.check_on(grid)?;
    Ok(assemble(grid, None, Some(f), 0.0))
}

/// Free-block system after eliminating constrained dofs.
struct Reduced {
    matrix: CsrMatrix,
    rhs: Vec<f64>,
    free: Vec<usize>,
}

fn reduce(sys: &SparseSystem) -> Reduced {
    let total = sys.matrix.rows;
    let mut prescribed = vec![None; total];
    for &(d, v) in &sys.constraints {
        prescribed[d] = Some(v);
    }
    let free: Vec<usize> = (0..total).filter(|&d| prescribed[d].is_none()).collect();
    let mut position = vec![usize::MAX; total];
    for (k, &d) in free.iter().enumerate() {
        position[d] = k;
    }
    let mut row_ptr = vec![0];
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    let mut rhs = Vec::with_capacity(free.len());
    for &d in &free {
        let mut b = sys.rhs[d];
        for (c, v) in sys.matrix.row(d) {
            match prescribed[c] {
                Some(u) => b -= v * u,
                None => {
                    col_idx.push(position[c]);
                    values.push(v);
                }
            }
        }
        rhs.push(b);
        row_ptr.push(col_idx.len());
    }
    Reduced {
        matrix: CsrMatrix {
            rows: free.len(),
            row_ptr,
            col_idx,
            values,
        },
        rhs,
        free,
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let mut ax = vec![0.0; b.len()];
    a.matvec(x, &mut ax);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let bn = norm(b);
    if bn == 0.0 {
        norm(&r)
    } else {
        norm(&r) / bn
    }
}

/// Jacobi-preconditioned conjugate gradients on an SPD matrix.
/// Returns the solution, iteration count and true relative residual.
pub fn conjugate_gradient(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize, f64)> {
    let nrows = a.rows;
    let mut x = vec![0.0; nrows];
    let bn = norm(b);
    if bn == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; nrows];
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NearSingular(format!("CG curvature {pap:e} at iteration {it}")));
        }
        let alpha = rz / pap;
        for k in 0..nrows {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let mut restart = false;
        if norm(&r) / bn <= tol {
            let true_res = relative_residual(a, &x, b);
            if true_res <= tol {
                return Ok((x, it, true_res));
            }
            // Recursive residual drifted from the true one: restart from it.
            a.matvec(&x, &mut ap);
            for k in 0..nrows {
                r[k] = b[k] - ap[k];
            }
            restart = true;
        }
        for k in 0..nrows {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = if restart { 0.0 } else { rz_new / rz };
        rz = rz_new;
        for k in 0..nrows {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: relative_residual(a, &x, b),
    })
}

/// Banded LU factorization with partial pivoting (LAPACK `gbtf2` layout).
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Factorizes a square CSR matrix whose entries lie within `kl` below and
    /// `ku` above the diagonal.
    pub fn factorize(a: &CsrMatrix, kl: usize, ku: usize) -> Result<Self> {
        let n = a.rows;
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * n];
        for r in 0..n {
            for (c, v) in a.row(r) {
                if r > c + kl || c > r + ku {
                    return Err(Error::Shape(format!("entry ({r},{c}) outside band")));
                }
                ab[c * ldab + kv + r - c] += v;
            }
        }
        let mut pivots = vec![0; n];
        let mut ju = 0;
        let mut max_pivot = 0.0f64;
        let mut min_pivot = f64::INFINITY;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ldab;
            let mut jp = 0;
            let mut best = ab[col + kv].abs();
            for t in 1..=km {
                let v = ab[col + kv + t].abs();
                if v > best {
                    best = v;
                    jp = t;
                }
            }
            pivots[j] = j + jp;
            if best == 0.0 {
                return Err(Error::NearSingular(format!("zero pivot in column {j}")));
            }
            max_pivot = max_pivot.max(best);
            min_pivot = min_pivot.min(best);
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let base = c * ldab + kv;
                    ab.swap(base + j - c, base + j + jp - c);
                }
            }
            let pivot = ab[col + kv];
            for t in 1..=km {
                ab[col + kv + t] /= pivot;
            }
            for c in j + 1..=ju {
                let base = c * ldab + kv;
                let ujc = ab[base + j - c];
                if ujc != 0.0 {
                    for t in 1..=km {
                        let l = ab[col + kv + t];
                        ab[base + j + t - c] -= l * ujc;
                    }
                }
            }
        }
        if min_pivot < 1e-13 * max_pivot {
            return Err(Error::NearSingular(format!(
                "pivot ratio {:e}",
                min_pivot / max_pivot
            )));
        }
        Ok(BandedLu {
            n,
            kl,
            ku,
            ldab,
            ab,
            pivots,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, kl, kv, ldab) = (self.n, self.kl, self.kl + self.ku, self.ldab);
        let mut x = b.to_vec();
        for j in 0..n {
            x.swap(j, self.pivots[j]);
            let km = kl.min(n - 1 - j);
            let xj = x[j];
            for t in 1..=km {
                x[j + t] -= self.ab[j * ldab + kv + t] * xj;
            }
        }
        for j in (0..n).rev() {
            let base = j * ldab + kv;
            x[j] /= self.ab[base];
            let xj = x[j];
            for i in j.saturating_sub(kv)..j {
                x[i] -= self.ab[base + i - j] * xj;
            }
        }
        x
    }
}

fn direct_solve(red: &Reduced, band: usize, tol: f64) -> Result<(Vec<f64>, usize, f64)> {
    if norm(&red.rhs) == 0.0 {
        return Ok((vec![0.0; red.rhs.len()], 0, 0.0));
    }
    let lu = BandedLu::factorize(&red.matrix, band, band)?;
    let mut x = lu.solve(&red.rhs);
    let mut res = relative_residual(&red.matrix, &x, &red.rhs);
    let mut refinements = 0;
    while res > tol && refinements < 3 {
        let mut ax = vec![0.0; x.len()];
        red.matrix.matvec(&x, &mut ax);
        let r: Vec<f64> = red.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let dx = lu.solve(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        res = relative_residual(&red.matrix, &x, &red.rhs);
        refinements += 1;
    }
    if res > tol {
        return Err(Error::NearSingular(format!(
            "relative residual {res:e} after {refinements} refinements"
        )));
    }
    Ok((x, refinements, res))
}

fn expand(sys: &SparseSystem, red: &Reduced, x: &[f64]) -> ScalarField2D {
    let mut values = vec![0.0; sys.matrix.rows];
    for &(d, v) in &sys.constraints {
        values[d] = v;
    }
    for (k, &d) in red.free.iter().enumerate() {
        values[d] = x[k];
    }
    ScalarField2D::from_values(sys.grid, values).expect("finite solve output")
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")))
    }
}

/// `-Δu = f` on the unit square with `u = 0` on the boundary.
pub fn solve_poisson(grid: Grid, f: &ScalarField2D, tol: f64) -> Result<(ScalarField2D, SolveReport)> {
    check_tol(tol)?;
    let start = Instant::now();
    let sys = assemble_poisson(grid, f)?;
    let red = reduce(&sys);
    let cap = 10 * grid.n() * grid.n();
    let (x, iterations, residual) = conjugate_gradient(&red.matrix, &red.rhs, tol, cap)?;
    let u = expand(&sys, &red, &x);
    Ok((
        u,
        SolveReport {
            iterations,
            residual,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    ))
}

/// `-Δu - ω² a u = s` with `u = b` on the boundary.
pub fn solve_helmholtz_forced(
    grid: Grid,
    a: &ScalarField2D,
    omega: f64,
    b: f64,
    source: Option<&ScalarField2D>,
    tol: f64,
) -> Result<(ScalarField2D, SolveReport)> {
    check_tol(tol)?;
    a.check_on(grid)?;
    if let Some(s) = source {
        s.check_on(grid)?;
    }
    let start = Instant::now();
    let sys = assemble(grid, Some((a, omega)), source, b);
    let red = reduce(&sys);
    let band = grid.n() - 1;
    let (x, iterations, residual) = direct_solve(&red, band, tol)?;
    let u = expand(&sys, &red, &x);
    Ok((
        u,
        SolveReport {
            iterations,
            residual,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    ))
}

/// `-Δu - ω² a u = 0` with `u = b` on the boundary.
pub fn solve_helmholtz(grid: Grid, a: &ScalarField2D, omega: f64, b: f64, tol: f64) -> Result<(ScalarField2D, SolveReport)> {
    solve_helmholtz_forced(grid, a, omega, b, None, tol)
}

/// Reference solution for one sample's input channels.
pub fn solve_task(task: &PdeTask, grid: Grid, inputs: &[ScalarField2D], tol: f64) -> Result<(ScalarField2D, SolveReport)> {
    if inputs.len() != task.in_channels() {
        return Err(Error::Shape(format!(
            "{} expects {} channels, got {}",
            task.name(),
            task.in_channels(),
            inputs.len()
        )));
    }
    match task {
        PdeTask::Poisson => solve_poisson(grid, &inputs[0], tol),
        PdeTask::Helmholtz { omega } => {
            let b = inputs[1].get(0, 0);
            solve_helmholtz(grid, &inputs[0], *omega, b, tol)
        }
    }
}

/// Pairs every input of `set` with its reference solution.
pub fn label_sampleset(task: &PdeTask, set: &SampleSet, tol: f64) -> Result<(SampleSet, Vec<SolveReport>)> {
    let grid = set.grid();
    let mut solutions = Vec::with_capacity(set.len());
    let mut reports = Vec::with_capacity(set.len());
    for (index, inputs) in set.inputs().iter().enumerate() {
        let (u, report) = solve_task(task, grid, inputs, tol).map_err(|e| Error::SampleFailed {
            index,
            source: Box::new(e),
        })?;
        solutions.push(u);
        reports.push(report);
    }
    let labeled = set.with_solutions(
        solutions,
        json!({
            "task": task,
            "solver": "fem_q1_gauss2x2",
            "solver_tolerance": tol,
        }),
    )?;
    Ok((labeled, reports))
}

/// `count` training-distribution inputs of `task` with reference solutions.
pub fn generate_labeled_set(task: &PdeTask, grid: Grid, count: usize, seed: u64) -> Result<(SampleSet, Vec<SolveReport>)> {
    if count == 0 {
        return Err(Error::InvalidParameter("labeled set needs at least one sample".into()));
    }
    let inputs = gen_input_set(grid, &task.training_family(), count, seed)?;
    label_sampleset(task, &inputs, FEM_TOLERANCE)
}

/// One line per sample: `index iterations residual`.
pub fn write_solve_log(path: impl AsRef<Path>, reports: &[SolveReport]) -> Result<()> {
    let mut text = String::new();
    for (k, r) in reports.iter().enumerate() {
        writeln!(text, "{k} {} {:e}", r.iterations, r.residual).expect("string write");
    }
    std::fs::write(path.as_ref(), text).map_err(|e| Error::io(path.as_ref(), e))
}
