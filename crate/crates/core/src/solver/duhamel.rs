//! Fractional Duhamel principle: the forced response
//! `∫_0^t S(t−τ) D₊^{1−B} H(τ) dτ` (Caputo) or `∫_0^t S₊(t−τ) H(τ) dτ` (RL),
//! realised by product-integration convolutions on the grid.

use num_complex::Complex64;

use super::{DerivativeKind, OperatorSamples, SystemSpec, TimeGrid};
use crate::error::{Error, Result};
use crate::frac_ops::{caputo_deriv, convolve, convolve_weakly_singular, SampledFunction};
use crate::special::rgamma;

fn sample_forcing(spec: &SystemSpec, grid: &TimeGrid) -> Result<Vec<SampledFunction>> {
    let hs = spec
        .forcing
        .as_ref()
        .ok_or_else(|| Error::InvalidForcing("system has no forcing".into()))?;
    hs.iter()
        .enumerate()
        .map(|(j, hj)| {
            let f = SampledFunction::from_fn(grid.step(), grid.steps(), |t| hj(t))?;
            if let Some(i) = f.values().iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::InvalidForcing(format!(
                    "component {} is not finite at t = {}",
                    j + 1,
                    grid.t(i)
                )));
            }
            Ok(f)
        })
        .collect()
}

/// Entry `(j, l)` of the operator samples as a sampled function on the full
/// grid; in RL mode returns `t^{1−β_l} S₊(t)_{jl}` with its limit at `t = 0`.
fn entry_function(
    ops: &OperatorSamples,
    grid: &TimeGrid,
    kind: DerivativeKind,
    beta_l: f64,
    j: usize,
    l: usize,
) -> Result<SampledFunction> {
    let h = grid.step();
    let values = match kind {
        DerivativeKind::Caputo => ops.matrices.iter().map(|s| s[(j, l)]).collect(),
        DerivativeKind::RiemannLiouville => {
            let limit = if j == l { rgamma(beta_l) } else { 0.0 };
            std::iter::once(Complex64::new(limit, 0.0))
                .chain(
                    ops.times
                        .iter()
                        .zip(&ops.matrices)
                        .map(|(&t, s)| s[(j, l)] * t.powf(1.0 - beta_l)),
                )
                .collect()
        }
    };
    SampledFunction::new(h, values)
}

/// Forced response at `ops.times`.
pub fn forced_response(spec: &SystemSpec, grid: &TimeGrid, ops: &OperatorSamples) -> Result<Vec<Vec<Complex64>>> {
    let m = spec.dim();
    let expected = match spec.kind {
        DerivativeKind::Caputo => grid.len(),
        DerivativeKind::RiemannLiouville => grid.len() - 1,
    };
    if ops.matrices.len() != expected {
        return Err(Error::IncompatibleGrids(format!(
            "operator has {} samples, grid needs {expected}",
            ops.matrices.len()
        )));
    }
    let hs = sample_forcing(spec, grid)?;
    let one = SampledFunction::from_real_fn(grid.step(), grid.steps(), |_| 1.0)?;
    let mut total = vec![vec![Complex64::new(0.0, 0.0); m]; grid.len()];

    for l in 0..m {
        let beta = spec.orders[l];
        let h_l = &hs[l];
        if h_l.sup_norm() == 0.0 {
            continue;
        }
        for j in 0..m {
            let s_jl = entry_function(ops, grid, spec.kind, beta, j, l)?;
            let contrib = match spec.kind {
                DerivativeKind::Caputo if beta == 1.0 => convolve(&s_jl, h_l)?,
                DerivativeKind::Caputo => {
                    // D₊^{1−β}H = H(0) t^{β−1}/Γ(β) + Caputo derivative of H
                    let h0 = h_l.values()[0];
                    let regular = caputo_deriv(h_l, 1.0 - beta)?;
                    // the regular part may itself start like a power of t
                    let mut c = convolve_weakly_singular(1.0, &s_jl, &regular)?;
                    if h0 != Complex64::new(0.0, 0.0) {
                        let sing = convolve_weakly_singular(beta, &one, &s_jl)?.scale(h0 * rgamma(beta));
                        c = c.add(&sing)?;
                    }
                    c
                }
                DerivativeKind::RiemannLiouville => convolve_weakly_singular(beta, &s_jl, h_l)?,
            };
            for (row, v) in total.iter_mut().zip(contrib.values()) {
                row[j] += v;
            }
        }
    }
    if spec.kind == DerivativeKind::RiemannLiouville {
        total.remove(0);
    }
    Ok(total)
}
