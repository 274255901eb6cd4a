//! Equal orders: `S(t) = M E_β(t^β(Λ+N)) M^{-1}` from the Jordan form of `F`
//! (Caputo), or `t^{β−1} M E_{β,β}(t^β(Λ+N)) M^{-1}` (RL).

use rayon::prelude::*;

use super::{
    assemble, sample_times, DerivativeKind, Method, OperatorSamples, SolveOptions, SystemSpec, TimeGrid, Trajectory,
};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::ml_matrix::{jordan_decompose_with, matrix_ml, JordanForm, JordanOptions};

pub(crate) fn jordan_of(f: &CMatrix, opts: &SolveOptions) -> Result<JordanForm> {
    let jo = JordanOptions {
        cluster_tol: (opts.cluster_tol > 0.0).then_some(opts.cluster_tol),
        cond_cap: opts.cond_cap,
    };
    jordan_decompose_with(f, &jo)
}

/// `S(t)` for the order-`β` system with Jordan form `jf` at each time.
pub(crate) fn commensurate_samples(
    beta: f64,
    jf: &JordanForm,
    kind: DerivativeKind,
    times: &[f64],
) -> Result<Vec<CMatrix>> {
    times
        .par_iter()
        .map(|&t| match kind {
            DerivativeKind::Caputo => matrix_ml(beta, 1.0, t, jf),
            DerivativeKind::RiemannLiouville => {
                Ok(matrix_ml(beta, beta, t, jf)? * num_complex::Complex64::new(t.powf(beta - 1.0), 0.0))
            }
        })
        .collect()
}

pub fn commensurate_operator(spec: &SystemSpec, grid: &TimeGrid, opts: &SolveOptions) -> Result<OperatorSamples> {
    if !spec.orders.is_commensurate() {
        return Err(Error::WrongStructure(
            "the commensurate method needs equal orders".into(),
        ));
    }
    let jf = jordan_of(&spec.matrix, opts)?;
    let times = sample_times(grid, spec.kind);
    let matrices = commensurate_samples(spec.orders[0], &jf, spec.kind, &times)?;
    Ok(OperatorSamples {
        times,
        matrices,
        truncation: None,
        error_estimate: 1e-10,
        notes: vec![format!(
            "Jordan blocks: {:?}",
            jf.blocks().iter().map(|b| b.size).collect::<Vec<_>>()
        )],
    })
}

pub fn solve_commensurate(spec: &SystemSpec, grid: &TimeGrid, opts: &SolveOptions) -> Result<Trajectory> {
    let ops = commensurate_operator(spec, grid, opts)?;
    assemble(spec, grid, ops, Method::Commensurate)
}
