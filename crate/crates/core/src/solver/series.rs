//! General multi-order series solution: every term of `p_{jl} R^k` becomes
//! one closed-form kernel `t^{kβ₁+ν'−1} E^{(k)}_{β₁,ν'}(λt^{β₁})/k!`.
//!
//! Truncation is adaptive: the sum stops once three consecutive series
//! indices contribute less than `series_tol` of the running maximum. Times at
//! which the estimated error (tail plus cancellation) exceeds `fallback_tol`
//! are recomputed by Talbot inversion.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{assemble, sample_times, Method, OperatorSamples, SolveOptions, SystemSpec, TimeGrid, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::ml_scalar::{ml_deriv_scaled, MLParams, ScaledDerivSeries};
use crate::oracles::talbot_invert;
use crate::symbol::SeriesExpansion;

/// Contributions below this (for unit data) are never generated.
const PRUNE_TOL: f64 = 1e-14;

struct Accum {
    // [entry][time]
    value: Vec<Vec<Complex64>>,
    abs: Vec<Vec<f64>>,
}

impl Accum {
    fn zeros(entries: usize, n: usize) -> Self {
        Self {
            value: vec![vec![Complex64::new(0.0, 0.0); n]; entries],
            abs: vec![vec![0.0; n]; entries],
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.value.iter_mut().zip(other.value) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.abs.iter_mut().zip(other.abs) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self
    }
}

/// Powers of `x_i = λ t_i^{β₁}` shared by every kernel: all kernels of the
/// series are power series in the same variable, so each one costs a dot
/// product per time.
struct PowerTable {
    ln_t: Vec<f64>,
    x: Vec<Complex64>,
    // [time][n]
    pows: Vec<Vec<Complex64>>,
    abs_pows: Vec<Vec<f64>>,
}

impl PowerTable {
    fn new(times: &[f64], base: f64, lambda: Complex64) -> Self {
        let n = times.len();
        Self {
            ln_t: times.iter().map(|t| t.ln()).collect(),
            x: times.iter().map(|&t| lambda * t.powf(base)).collect(),
            pows: vec![vec![Complex64::new(1.0, 0.0)]; n],
            abs_pows: vec![vec![1.0]; n],
        }
    }

    fn ensure(&mut self, len: usize) {
        for ((row, arow), &x) in self.pows.iter_mut().zip(&mut self.abs_pows).zip(&self.x) {
            let ax = x.norm();
            while row.len() < len {
                let last = *row.last().expect("nonempty");
                let alast = *arow.last().expect("nonempty");
                row.push(last * x);
                arow.push(alast * ax);
            }
        }
    }

    /// `t_i^{exponent} Σ_n c_n x_i^n`, or the full evaluator when the Taylor
    /// sum cancels.
    fn eval(&self, series: &ScaledDerivSeries, exponent: f64, i: usize) -> Result<Complex64> {
        let lt = self.ln_t[i];
        let tp = if exponent == 0.0 {
            1.0
        } else if lt == f64::NEG_INFINITY {
            if exponent > 0.0 {
                return Ok(Complex64::new(0.0, 0.0));
            }
            f64::INFINITY
        } else {
            (exponent * lt).exp()
        };
        let c = series.coefficients();
        let row = &self.pows[i][..c.len()];
        let arow = &self.abs_pows[i][..c.len()];
        let mut v = Complex64::new(0.0, 0.0);
        let mut a = 0.0;
        for ((&cn, &p), &ap) in c.iter().zip(row).zip(arow) {
            v += p * cn;
            a += ap * cn.abs();
        }
        if !ScaledDerivSeries::accepts(v, a) {
            v = ml_deriv_scaled(series.params(), self.x[i], series.order())?;
        }
        Ok(v * tp)
    }
}

/// Sum of the terms of one series index at every time.
fn order_contribution(
    terms: &[Vec<Vec<crate::symbol::KernelTerm>>],
    table: &mut PowerTable,
    lambda: Complex64,
    t_max: f64,
) -> Result<Accum> {
    let m = terms.len();
    let n = table.x.len();
    // group by the kernel's second parameter
    let mut groups: BTreeMap<u64, (f64, usize, f64, Vec<(usize, Complex64, f64)>)> = BTreeMap::new();
    for (j, row) in terms.iter().enumerate() {
        for (l, list) in row.iter().enumerate() {
            for t in list {
                let nu = t.ml_nu();
                let key = (nu * 1e11).round() as u64;
                let g = groups
                    .entry(key)
                    .or_insert((nu, t.deriv_order, t.time_exponent(), Vec::new()));
                g.3.push((j * m + l, t.coeff, t.coeff.norm()));
            }
        }
    }
    let Some(base) = terms.iter().flatten().flatten().next().map(|t| t.base) else {
        return Ok(Accum::zeros(m * m, n));
    };
    let radius = lambda.norm() * t_max.powf(base);
    let groups: Vec<_> = groups
        .into_values()
        .map(|(nu, k, e, members)| {
            let e = if e.abs() <= 1e-12 { 0.0 } else { e };
            MLParams::new(base, nu).map(|p| (ScaledDerivSeries::new(p, k, radius), e, members))
        })
        .collect::<Result<_>>()?;
    let longest = groups.iter().map(|g| g.0.coefficients().len()).max().unwrap_or(1);
    table.ensure(longest);
    let table = &*table;
    groups
        .par_iter()
        .try_fold(
            || Accum::zeros(m * m, n),
            |mut acc, (series, e, members)| -> Result<Accum> {
                for i in 0..n {
                    let v = table.eval(series, *e, i)?;
                    if v == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let av = v.norm();
                    for &(ent, q, aq) in members {
                        acc.value[ent][i] += q * v;
                        acc.abs[ent][i] += aq * av;
                    }
                }
                Ok(acc)
            },
        )
        .try_reduce(|| Accum::zeros(m * m, n), |a, b| Ok(a.merge(b)))
}

pub fn series_operator(spec: &SystemSpec, grid: &TimeGrid, opts: &SolveOptions) -> Result<OperatorSamples> {
    let m = spec.dim();
    let times = sample_times(grid, spec.kind);
    let t_max = grid.t_max();
    let mut expansion = SeriesExpansion::new(&spec.orders, &spec.matrix, spec.kind)?.with_pruning(t_max, PRUNE_TOL);
    let lambda = expansion.lambda();
    let n = times.len();
    let mut sum = Accum::zeros(m * m, n);
    let mut table = PowerTable::new(&times, expansion.base(), lambda);
    let mut recent: Vec<Vec<f64>> = Vec::new(); // per-index max contribution at each time
    let cap = opts.truncation.unwrap_or(opts.max_truncation);
    let k_used = loop {
        let k = expansion.next_index();
        let terms = expansion.next_order()?;
        let contrib = order_contribution(&terms, &mut table, lambda, t_max)?;
        let per_time: Vec<f64> = (0..n)
            .map(|i| (0..m * m).map(|e| contrib.value[e][i].norm()).fold(0.0, f64::max))
            .collect();
        sum = sum.merge(contrib);
        recent.push(per_time);
        if recent.len() > 3 {
            recent.remove(0);
        }
        if k >= cap {
            break k;
        }
        // the absolute sums only grow: once cancellation alone exceeds the
        // tolerance everywhere, no truncation can succeed
        let hopeless = (0..n).filter(|&i| times[i] > 0.0).all(|i| {
            let abs = (0..m * m).map(|e| sum.abs[e][i]).fold(0.0, f64::max);
            !(4.0 * f64::EPSILON * abs <= opts.fallback_tol)
        });
        if hopeless {
            break k;
        }
        if opts.truncation.is_none() && recent.len() == 3 {
            let scale = sum
                .value
                .iter()
                .flatten()
                .map(|z| z.norm())
                .fold(0.0, f64::max)
                .max(1e-300);
            let last = recent.iter().flatten().copied().fold(0.0, f64::max);
            if last < opts.series_tol * scale {
                break k;
            }
        }
    };
    // per-time error: tail of the last indices plus cancellation in the sum
    let errors: Vec<f64> = (0..n)
        .map(|i| {
            let tail = recent.iter().map(|r| r[i]).fold(0.0, f64::max);
            let cancel = (0..m * m).map(|e| sum.abs[e][i]).fold(0.0, f64::max) * 4.0 * f64::EPSILON;
            tail + cancel
        })
        .collect();
    let mut matrices: Vec<CMatrix> = (0..n)
        .map(|i| CMatrix::from_fn(m, m, |j, l| sum.value[j * m + l][i]))
        .collect();
    let mut notes = vec![format!("series truncated at k = {k_used}")];
    let bad: Vec<usize> = (0..n).filter(|&i| !(errors[i] <= opts.fallback_tol)).collect();
    if !bad.is_empty() {
        let replaced: Vec<(usize, CMatrix)> = bad
            .par_iter()
            .map(|&i| {
                if times[i] == 0.0 {
                    // only reached in Caputo mode, where S(0) = I
                    return Ok((i, CMatrix::identity(m, m)));
                }
                talbot_invert(&spec.orders, &spec.matrix, spec.kind, times[i], &opts.contour).map(|s| (i, s))
            })
            .collect::<Result<_>>()?;
        for (i, s) in replaced {
            matrices[i] = s;
        }
        notes.push(format!(
            "series error estimate above {:e} at {} of {} times (from t = {}); those used Talbot inversion",
            opts.fallback_tol,
            bad.len(),
            n,
            times[bad[0]]
        ));
    }
    let error_estimate = (0..n)
        .filter(|i| !bad.contains(i))
        .map(|i| errors[i])
        .fold(0.0, f64::max);
    if matrices
        .iter()
        .flatten()
        .any(|z| !(z.re.is_finite() && z.im.is_finite()))
    {
        return Err(Error::Overflow("series solution is not finite".into()));
    }
    Ok(OperatorSamples {
        times,
        matrices,
        truncation: Some(k_used),
        error_estimate,
        notes,
    })
}

pub fn solve_series(spec: &SystemSpec, grid: &TimeGrid, opts: &SolveOptions) -> Result<Trajectory> {
    let ops = series_operator(spec, grid, opts)?;
    assemble(spec, grid, ops, Method::Series)
}
