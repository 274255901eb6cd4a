//! Triangular `F`: components are resolved one after another,
//! `u_k = E_{β_k}(f_kk t^{β_k})φ_k + Σ_j (t^{β_k−1}E_{β_k,β_k}(f_kk t^{β_k})) ∗ (f_kj u_j)`
//! (Caputo; RL uses `t^{β_k−1}E_{β_k,β_k}` for the free term), with the
//! convolutions done by product integration on the grid.

use num_complex::Complex64;

use super::{
    assemble, sample_times, DerivativeKind, Method, OperatorSamples, SolveOptions, SystemSpec, TimeGrid, Trajectory,
};
use crate::error::{Error, Result};
use crate::frac_ops::{convolve_singular, convolve_weakly_singular, SampledFunction};
use crate::linalg::{self, CMatrix};
use crate::ml_scalar::{ml, MLParams};
use crate::special::rgamma;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Triangle {
    Lower,
    Upper,
}

/// Entries below `1e-14·‖F‖` count as zero. Diagonal matrices are lower.
pub fn detect_triangle(f: &CMatrix) -> Option<Triangle> {
    let tol = 1e-14 * linalg::frobenius(f);
    if linalg::is_lower_triangular(f, tol) {
        Some(Triangle::Lower)
    } else if linalg::is_upper_triangular(f, tol) {
        Some(Triangle::Upper)
    } else {
        None
    }
}

/// `∫_0^t (t−τ)^{β−1} E_{β,β}(λ(t−τ)^β) g(τ) dτ`, with `g(τ) = τ^{b−1}v(τ)`
/// when `singular = Some(b)`.
///
/// `E_{β,β}(λs^β)` is not smooth at `s = 0`, which limits plain product
/// integration to order `2β`. Its leading power terms `c_n s^{nβ}` (up to
/// `nβ ≥ 2`) are convolved exactly and only the `C²` remainder is
/// interpolated.
fn kernel_convolution(
    beta: f64,
    lambda: Complex64,
    phi: &SampledFunction,
    data: &SampledFunction,
    singular: Option<f64>,
) -> Result<SampledFunction> {
    let conv = |order: f64, kernel: &SampledFunction| match singular {
        None => convolve_weakly_singular(order, kernel, data),
        Some(b) => convolve_singular(order, kernel, b, data),
    };
    let t_max = phi.t(phi.len() - 1);
    let top = (2.0 / beta).ceil() as usize;
    let mut powers = Vec::new();
    let mut c = Complex64::new(1.0, 0.0);
    for n in 0..=top {
        let e = n as f64 * beta;
        let coeff = c * rgamma(e + beta);
        // large partial sums would cancel against φ
        if n > 0 && coeff.norm() * t_max.powf(e) > 1e4 {
            break;
        }
        powers.push((e, coeff));
        c *= lambda;
    }
    let remainder = phi.map(|t, z| {
        z - powers
            .iter()
            .map(|&(e, coeff)| if e == 0.0 { coeff } else { coeff * t.powf(e) })
            .sum::<Complex64>()
    });
    let ones = SampledFunction::new(phi.step(), vec![Complex64::new(1.0, 0.0); phi.len()])?;
    let mut out = conv(beta, &remainder)?;
    for &(e, coeff) in &powers {
        out = out.add(&conv(beta + e, &ones)?.scale(coeff))?;
    }
    Ok(out)
}

fn ml_samples(beta: f64, nu: f64, lambda: Complex64, grid: &TimeGrid) -> Result<SampledFunction> {
    let p = MLParams::new(beta, nu)?;
    let vals = grid
        .points()
        .iter()
        .map(|&t| ml(p, lambda * t.powf(beta)))
        .collect::<Result<Vec<_>>>()?;
    SampledFunction::new(grid.step(), vals)
}

/// Columns of `S` on `grid`. Caputo: `S(t_i)`; RL: `t^{1−β_j} S₊(t)_{jl}` at
/// every grid point (finite at `t = 0`).
fn triangular_columns(spec: &SystemSpec, grid: &TimeGrid, tri: Triangle) -> Result<Vec<Vec<SampledFunction>>> {
    let m = spec.dim();
    let f = &spec.matrix;
    let b = spec.orders.as_slice();
    let rl = spec.kind == DerivativeKind::RiemannLiouville;
    // φ_k(t) = E_{β_k,β_k}(f_kk t^{β_k}) and the Caputo free term E_{β_k}(f_kk t^{β_k})
    let kernels: Vec<SampledFunction> = (0..m)
        .map(|k| ml_samples(b[k], b[k], f[(k, k)], grid))
        .collect::<Result<_>>()?;
    let free: Vec<SampledFunction> = if rl {
        kernels.clone()
    } else {
        (0..m)
            .map(|k| ml_samples(b[k], 1.0, f[(k, k)], grid))
            .collect::<Result<_>>()?
    };
    let order: Vec<usize> = match tri {
        Triangle::Lower => (0..m).collect(),
        Triangle::Upper => (0..m).rev().collect(),
    };
    let zero = SampledFunction::new(grid.step(), vec![Complex64::new(0.0, 0.0); grid.len()])?;
    let mut columns = Vec::with_capacity(m);
    for l in 0..m {
        let mut comps: Vec<Option<SampledFunction>> = vec![None; m];
        for (pos, &k) in order.iter().enumerate() {
            let mut u = if k == l { free[k].clone() } else { zero.clone() };
            for &j in &order[..pos] {
                let fkj = f[(k, j)];
                if fkj == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let uj = comps[j].as_ref().expect("resolved earlier");
                if uj.sup_norm() == 0.0 {
                    continue;
                }
                let c = if rl {
                    // kernel ∗ (τ^{β_j−1} v_j), rescaled by t^{1−β_k}
                    let conv = kernel_convolution(b[k], f[(k, k)], &kernels[k], uj, Some(b[j]))?;
                    conv.map(|t, z| if t == 0.0 { z } else { z * t.powf(1.0 - b[k]) })
                } else {
                    kernel_convolution(b[k], f[(k, k)], &kernels[k], uj, None)?
                };
                u = u.add(&c.scale(fkj))?;
            }
            comps[k] = Some(u);
        }
        columns.push(comps.into_iter().map(|c| c.expect("all resolved")).collect());
    }
    Ok(columns)
}

pub fn triangular_operator(spec: &SystemSpec, grid: &TimeGrid, opts: &SolveOptions) -> Result<OperatorSamples> {
    let tri = detect_triangle(&spec.matrix)
        .ok_or_else(|| Error::WrongStructure("matrix is neither lower nor upper triangular".into()))?;
    let refine = opts.refine.max(1);
    let fine = grid.refined(refine);
    let cols = triangular_columns(spec, &fine, tri)?;
    let m = spec.dim();
    let times = sample_times(grid, spec.kind);
    let b = spec.orders.as_slice();
    let matrices = times
        .iter()
        .map(|&t| {
            let i = (t / fine.step()).round() as usize;
            CMatrix::from_fn(m, m, |j, l| {
                let v = cols[l][j].values()[i];
                match spec.kind {
                    DerivativeKind::Caputo => v,
                    DerivativeKind::RiemannLiouville => v * t.powf(b[j] - 1.0),
                }
            })
        })
        .collect();
    Ok(OperatorSamples {
        times,
        matrices,
        truncation: None,
        error_estimate: fine.step().powf(1.0 + spec.orders.min()),
        notes: vec![format!("{tri:?} triangular recurrence, grid refined {refine}×")],
    })
}

pub fn solve_triangular(spec: &SystemSpec, grid: &TimeGrid, opts: &SolveOptions) -> Result<Trajectory> {
    let ops = triangular_operator(spec, grid, opts)?;
    assemble(spec, grid, ops, Method::Triangular)
}
