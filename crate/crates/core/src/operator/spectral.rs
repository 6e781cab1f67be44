//! Truncated 2-D discrete Fourier transforms used by the spectral layers.
//!
//! Retained modes are `kx ∈ [0, m)` along the fast (column) axis and
//! `ky ∈ [0, m) ∪ [n - m, n)` along rows, stored as
//! `index = (block * m + t) * m + kx` with `ky = t` for block 0 and
//! `ky = n - m + t` for block 1.

use std::cell::RefCell;
use std::sync::Arc;

use ndarray::{ArrayView2, ArrayViewMut2};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

pub fn mode_count(m: usize) -> usize {
    2 * m * m
}

/// Row frequency of retained mode row `r ∈ [0, 2m)`.
pub fn retained_ky(n: usize, m: usize, r: usize) -> usize {
    if r < m {
        r
    } else {
        n - 2 * m + r
    }
}

/// Unnormalized forward DFT `Σ x[i,j] e^{-2πi(ky i + kx j)/n}` at the
/// retained modes. `x` is row-major `n x n`; `out` has `mode_count(m)` slots.
pub fn analyze(x: &[f64], n: usize, m: usize, out: &mut [Complex64]) {
    debug_assert_eq!(x.len(), n * n);
    debug_assert_eq!(out.len(), mode_count(m));
    let (fwd, _) = plans(n);
    let zero = Complex64::new(0.0, 0.0);
    // Row pass: two real rows per complex FFT, keeping only kx < m.
    let mut kept = vec![zero; n * m];
    let mut row = vec![zero; n];
    for i in (0..n).step_by(2) {
        let b = (i + 1 < n).then(|| &x[(i + 1) * n..(i + 2) * n]);
        for j in 0..n {
            row[j] = Complex64::new(x[i * n + j], b.map_or(0.0, |b| b[j]));
        }
        fwd.process(&mut row);
        for kx in 0..m {
            let z = row[kx];
            let zc = row[(n - kx) % n].conj();
            kept[i * m + kx] = 0.5 * (z + zc);
            if i + 1 < n {
                kept[(i + 1) * m + kx] = Complex64::new(0.0, -0.5) * (z - zc);
            }
        }
    }
    let col = &mut row;
    for kx in 0..m {
        for i in 0..n {
            col[i] = kept[i * m + kx];
        }
        fwd.process(col);
        for r in 0..2 * m {
            out[r * m + kx] = col[retained_ky(n, m, r)];
        }
    }
}

/// `Re Σ_k c[k] e^{+2πi(ky i + kx j)/n}` over retained modes, unnormalized.
pub fn synthesize(coeffs: &[Complex64], n: usize, m: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), n * n);
    debug_assert_eq!(coeffs.len(), mode_count(m));
    let (_, inv) = plans(n);
    let zero = Complex64::new(0.0, 0.0);
    let mut kept = vec![zero; n * m];
    let mut col = vec![zero; n];
    for kx in 0..m {
        col.fill(zero);
        for r in 0..2 * m {
            col[retained_ky(n, m, r)] = coeffs[r * m + kx];
        }
        inv.process(&mut col);
        for i in 0..n {
            kept[i * m + kx] = col[i];
        }
    }
    // Row pass: Re of the inverse equals the inverse of the Hermitian part,
    // so two rows share one complex FFT (real parts in re, im).
    let row = &mut col;
    let i_unit = Complex64::new(0.0, 1.0);
    for i in (0..n).step_by(2) {
        row.fill(zero);
        for kx in 0..m {
            let a = kept[i * m + kx];
            let b = if i + 1 < n { kept[(i + 1) * m + kx] } else { zero };
            let half_a = 0.5 * a;
            let half_b = 0.5 * b;
            row[kx] += half_a + i_unit * half_b;
            let neg = (n - kx) % n;
            row[neg] += half_a.conj() + i_unit * half_b.conj();
        }
        inv.process(row);
        for j in 0..n {
            out[i * n + j] = row[j].re;
            if i + 1 < n {
                out[(i + 1) * n + j] = row[j].im;
            }
        }
    }
}

/// One spectral convolution: for every output channel `o`,
/// `out[o] += Re IDFT(Σ_i W_oi(k) X̂_i(k)) / n²` over the retained modes.
///
/// `weights` is laid out `[mode][out][in][re, im]`; `input` and `out` are
/// `width x n²`. The input spectra are written to `spectrum`
/// (`width * mode_count(m)`, channel-major) for the reverse pass.
pub fn spectral_conv(
    weights: &[f64],
    width: usize,
    input: ArrayView2<'_, f64>,
    n: usize,
    m: usize,
    spectrum: &mut [Complex64],
    mut out: ArrayViewMut2<'_, f64>,
) {
    let modes = mode_count(m);
    debug_assert_eq!(weights.len(), 2 * modes * width * width);
    for (i, row) in input.rows().into_iter().enumerate() {
        let row = row.as_standard_layout();
        analyze(row.as_slice().expect("contiguous"), n, m, &mut spectrum[i * modes..(i + 1) * modes]);
    }
    let scale = 1.0 / (n * n) as f64;
    let mut mixed = vec![Complex64::new(0.0, 0.0); modes];
    let mut buf = vec![0.0; n * n];
    for o in 0..width {
        for (k, slot) in mixed.iter_mut().enumerate() {
            let wk = &weights[(k * width + o) * width * 2..(k * width + o + 1) * width * 2];
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..width {
                acc += Complex64::new(wk[2 * i], wk[2 * i + 1]) * spectrum[i * modes + k];
            }
            *slot = acc;
        }
        synthesize(&mixed, n, m, &mut buf);
        for (dst, v) in out.row_mut(o).iter_mut().zip(&buf) {
            *dst += scale * v;
        }
    }
}
