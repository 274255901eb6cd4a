//! Solution operators for linear multi-order systems
//! `D^{β_j} u_j = Σ_l f_{jl} u_l + h_j`, in Caputo or Riemann–Liouville form.
//!
//! Every method produces samples of the matrix symbol `S(t)` on a uniform
//! grid; trajectories are `S(t)Φ` plus the Duhamel term for the forcing.

pub mod commensurate;
pub mod duhamel;
pub mod rational;
pub mod series;
pub mod triangular;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::oracles::{self, ContourParams};
pub use rational::Ratio;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DerivativeKind {
    Caputo,
    RiemannLiouville,
}

/// Orders `β_j ∈ (0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiOrder {
    orders: Vec<f64>,
}

impl MultiOrder {
    pub fn new(orders: Vec<f64>) -> Result<Self> {
        if orders.is_empty() {
            return Err(Error::InvalidArgument("at least one order is required".into()));
        }
        if let Some(&b) = orders.iter().find(|&&b| !(b > 0.0 && b <= 1.0)) {
            return Err(Error::InvalidOrder(b));
        }
        Ok(Self { orders })
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.orders
    }

    pub fn min(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Unvalidated exponent list (used for polynomial lattices).
    pub(crate) fn exponents(orders: Vec<f64>) -> Self {
        Self { orders }
    }

    /// All orders equal (to 1e-14).
    pub fn is_commensurate(&self) -> bool {
        let b0 = self.orders[0];
        self.orders.iter().all(|b| (b - b0).abs() <= 1e-14)
    }
}

impl std::ops::Index<usize> for MultiOrder {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.orders[i]
    }
}

pub type ForcingFn = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

#[derive(Clone)]
pub struct SystemSpec {
    pub orders: MultiOrder,
    pub matrix: CMatrix,
    pub initial: Vec<Complex64>,
    pub forcing: Option<Vec<ForcingFn>>,
    pub kind: DerivativeKind,
    /// Exact orders, when known; required by the rational method.
    pub rational_orders: Option<Vec<Ratio>>,
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemSpec")
            .field("orders", &self.orders)
            .field("matrix", &self.matrix)
            .field("initial", &self.initial)
            .field("forcing", &self.forcing.as_ref().map(|v| v.len()))
            .field("kind", &self.kind)
            .field("rational_orders", &self.rational_orders)
            .finish()
    }
}

impl SystemSpec {
    pub fn new(orders: MultiOrder, matrix: CMatrix, initial: Vec<Complex64>, kind: DerivativeKind) -> Result<Self> {
        let m = orders.len();
        if matrix.nrows() != m || matrix.ncols() != m {
            return Err(Error::Dimension(format!(
                "matrix is {}×{} but there are {m} orders",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if initial.len() != m {
            return Err(Error::Dimension(format!(
                "initial vector has {} entries, expected {m}",
                initial.len()
            )));
        }
        if matrix
            .iter()
            .chain(&initial)
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::InvalidArgument(
                "matrix and initial vector must be finite".into(),
            ));
        }
        Ok(Self {
            orders,
            matrix,
            initial,
            forcing: None,
            kind,
            rational_orders: None,
        })
    }

    /// Builds a system whose orders are exact fractions.
    pub fn rational(
        orders: Vec<Ratio>,
        matrix: CMatrix,
        initial: Vec<Complex64>,
        kind: DerivativeKind,
    ) -> Result<Self> {
        let mo = MultiOrder::new(orders.iter().map(|r| r.value()).collect())?;
        let mut spec = Self::new(mo, matrix, initial, kind)?;
        spec.rational_orders = Some(orders);
        Ok(spec)
    }

    pub fn with_forcing(mut self, forcing: Vec<ForcingFn>) -> Result<Self> {
        if forcing.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "forcing has {} components, expected {}",
                forcing.len(),
                self.dim()
            )));
        }
        self.forcing = Some(forcing);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.orders.len()
    }

    pub fn has_forcing(&self) -> bool {
        self.forcing.is_some()
    }
}

/// Uniform grid `t_i = i·h`, `i = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    step: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn uniform(t_max: f64, steps: usize) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("t_max = {t_max} must be positive")));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("at least one step is required".into()));
        }
        Ok(Self {
            step: t_max / steps as f64,
            steps,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn t_max(&self) -> f64 {
        self.t(self.steps)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.t(i)).collect()
    }

    /// The same span with `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            step: self.step / factor as f64,
            steps: self.steps * factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Series,
    Commensurate,
    Rational,
    Triangular,
    Talbot,
    Adams,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Series => "series",
            Method::Commensurate => "commensurate",
            Method::Rational => "rational",
            Method::Triangular => "triangular",
            Method::Talbot => "talbot",
            Method::Adams => "adams",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "series" => Method::Series,
            "commensurate" => Method::Commensurate,
            "rational" => Method::Rational,
            "triangular" => Method::Triangular,
            "talbot" => Method::Talbot,
            "adams" => Method::Adams,
            other => return Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        })
    }
}

/// Sampled solution. In Riemann–Liouville mode the solution is singular at
/// `t = 0`, so the first grid point is omitted.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
    pub method: Method,
    /// Series truncation order, when applicable.
    pub truncation: Option<usize>,
    pub error_estimate: f64,
    pub notes: Vec<String>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }

    pub fn component(&self, j: usize) -> Vec<Complex64> {
        self.states.iter().map(|s| s[j]).collect()
    }

    /// Max componentwise deviation over common times in `[from, to]`.
    pub fn max_deviation_on(&self, other: &Trajectory, from: f64, to: f64) -> Result<f64> {
        let mut worst: f64 = 0.0;
        let mut matched = 0;
        let mut j = 0;
        for (i, &t) in self.times.iter().enumerate() {
            while j < other.times.len() && other.times[j] < t - 1e-12 * t.max(1.0) {
                j += 1;
            }
            if j == other.times.len() {
                break;
            }
            if (other.times[j] - t).abs() > 1e-12 * t.max(1.0) || t < from - 1e-12 || t > to + 1e-12 {
                continue;
            }
            matched += 1;
            for (a, b) in self.states[i].iter().zip(&other.states[j]) {
                worst = worst.max((a - b).norm());
            }
        }
        if matched == 0 {
            return Err(Error::IncompatibleGrids("trajectories share no time points".into()));
        }
        Ok(worst)
    }

    pub fn max_deviation(&self, other: &Trajectory) -> Result<f64> {
        self.max_deviation_on(other, f64::NEG_INFINITY, f64::INFINITY)
    }
}

/// `S(t_i)` at the grid points (excluding `t = 0` in RL mode).
#[derive(Debug, Clone)]
pub struct OperatorSamples {
    pub times: Vec<f64>,
    pub matrices: Vec<CMatrix>,
    pub truncation: Option<usize>,
    pub error_estimate: f64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Fixed series truncation; adaptive when `None`.
    pub truncation: Option<usize>,
    pub max_truncation: usize,
    /// Relative size of the last terms at which the series stops.
    pub series_tol: f64,
    /// Series error estimate above which Talbot takes over.
    pub fallback_tol: f64,
    pub contour: ContourParams,
    /// Eigenvalue clustering tolerance for Jordan decompositions (≤ 0: default).
    pub cluster_tol: f64,
    pub cond_cap: f64,
    /// Internal grid refinement for convolution-based methods.
    pub refine: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            truncation: None,
            max_truncation: 200,
            series_tol: 1e-10,
            fallback_tol: 1e-6,
            contour: ContourParams::default(),
            cluster_tol: 0.0,
            cond_cap: crate::ml_matrix::DEFAULT_COND_CAP,
            refine: 1,
        }
    }
}

/// Solves `spec` on `grid` with the requested method, including the forcing.
pub fn solve(spec: &SystemSpec, grid: &TimeGrid, method: Method, opts: &SolveOptions) -> Result<Trajectory> {
    match method {
        Method::Series => series::solve_series(spec, grid, opts),
        Method::Commensurate => commensurate::solve_commensurate(spec, grid, opts),
        Method::Rational => rational::solve_rational(spec, grid, opts),
        Method::Triangular => triangular::solve_triangular(spec, grid, opts),
        Method::Talbot => solve_talbot(spec, grid, opts),
        Method::Adams => oracles::adams_pc_refined(spec, grid, opts.refine),
    }
}

/// Samples of `S(t)` (Caputo) or `S₊(t)` (RL) by `method`; the initial data
/// and forcing of `spec` are ignored.
pub fn operator(spec: &SystemSpec, grid: &TimeGrid, method: Method, opts: &SolveOptions) -> Result<OperatorSamples> {
    match method {
        Method::Series => series::series_operator(spec, grid, opts),
        Method::Commensurate => commensurate::commensurate_operator(spec, grid, opts),
        Method::Rational => {
            let ratios = spec
                .rational_orders
                .as_ref()
                .ok_or_else(|| Error::RequiresRationalOrders("orders were not given as exact fractions".into()))?;
            rational::rational_operator(spec, ratios, grid, opts)
        }
        Method::Triangular => triangular::triangular_operator(spec, grid, opts),
        Method::Talbot => oracles::talbot_samples(&spec.orders, &spec.matrix, spec.kind, &grid.points(), &opts.contour),
        Method::Adams => {
            let m = spec.dim();
            let mut columns = Vec::with_capacity(m);
            for l in 0..m {
                let mut unit = spec.clone();
                unit.forcing = None;
                unit.initial = (0..m)
                    .map(|j| Complex64::new(if j == l { 1.0 } else { 0.0 }, 0.0))
                    .collect();
                columns.push(oracles::adams_pc_refined(&unit, grid, opts.refine)?);
            }
            let times = columns[0].times.clone();
            let matrices = (0..times.len())
                .map(|i| CMatrix::from_fn(m, m, |j, l| columns[l].states[i][j]))
                .collect();
            Ok(OperatorSamples {
                times,
                matrices,
                truncation: None,
                error_estimate: columns[0].error_estimate,
                notes: columns[0].notes.clone(),
            })
        }
    }
}

/// Picks a method from the structure of the system: triangular, then
/// commensurate, then series.
pub fn auto_method(spec: &SystemSpec) -> Method {
    let tol = 1e-14 * linalg::frobenius(&spec.matrix);
    if spec.dim() > 1
        && (linalg::is_lower_triangular(&spec.matrix, tol) || linalg::is_upper_triangular(&spec.matrix, tol))
    {
        Method::Triangular
    } else if spec.orders.is_commensurate() {
        Method::Commensurate
    } else {
        Method::Series
    }
}

pub fn solve_talbot(spec: &SystemSpec, grid: &TimeGrid, opts: &SolveOptions) -> Result<Trajectory> {
    let ops = oracles::talbot_samples(&spec.orders, &spec.matrix, spec.kind, &grid.points(), &opts.contour)?;
    assemble(spec, grid, ops, Method::Talbot)
}

/// `S(t)Φ` plus the Duhamel term.
pub(crate) fn assemble(spec: &SystemSpec, grid: &TimeGrid, ops: OperatorSamples, method: Method) -> Result<Trajectory> {
    let phi = nalgebra::DVector::from_column_slice(&spec.initial);
    let mut states: Vec<Vec<Complex64>> = ops
        .matrices
        .iter()
        .map(|s| (s * &phi).iter().copied().collect())
        .collect();
    let mut notes = ops.notes.clone();
    if spec.has_forcing() {
        let forced = duhamel::forced_response(spec, grid, &ops)?;
        for (st, f) in states.iter_mut().zip(forced) {
            for (a, b) in st.iter_mut().zip(f) {
                *a += b;
            }
        }
        notes.push("forcing handled by the Duhamel convolution".into());
    }
    if states.iter().flatten().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Overflow(format!("{method} solution is not finite on the grid")));
    }
    Ok(Trajectory {
        times: ops.times,
        states,
        method,
        truncation: ops.truncation,
        error_estimate: ops.error_estimate,
        notes,
    })
}

/// Grid points at which the operator is sampled for `kind`.
pub(crate) fn sample_times(grid: &TimeGrid, kind: DerivativeKind) -> Vec<f64> {
    let pts = grid.points();
    match kind {
        DerivativeKind::Caputo => pts,
        DerivativeKind::RiemannLiouville => pts[1..].to_vec(),
    }
}
