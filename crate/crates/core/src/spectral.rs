//! Pseudo-differential systems on a 1-D periodic grid: the matrix symbol is
//! evaluated at every discrete frequency, each Fourier mode is propagated by
//! a solver method, and the result is transformed back.
//!
//! Transform convention: `û_k = Σ_j u_j e^{−2πijk/n}` and the inverse carries
//! the `1/n`. Mode `k` has frequency `ξ_k = 2πk/L` for `k < n/2` and
//! `2π(k−n)/L` otherwise (the Nyquist mode is taken as negative).

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::solver::{self, DerivativeKind, Method, MultiOrder, Ratio, SolveOptions, SystemSpec, TimeGrid};

/// `m` complex components sampled at `n` equispaced points of `[0, L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    length: f64,
    // [point][component]
    values: Vec<Vec<Complex64>>,
}

impl GridField {
    pub fn new(length: f64, values: Vec<Vec<Complex64>>) -> Result<Self> {
        let n = values.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "grid size {n} is not a power of two ≥ 2"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidArgument(format!("period {length} must be positive")));
        }
        let m = values[0].len();
        if m == 0 || values.iter().any(|v| v.len() != m) {
            return Err(Error::Dimension(
                "every grid point needs the same number of components".into(),
            ));
        }
        if values.iter().flatten().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidArgument("field values must be finite".into()));
        }
        Ok(Self { length, values })
    }

    pub fn zeros(n: usize, length: f64, m: usize) -> Result<Self> {
        Self::new(length, vec![vec![Complex64::new(0.0, 0.0); m]; n])
    }

    pub fn from_fn(n: usize, length: f64, f: impl Fn(f64) -> Vec<Complex64>) -> Result<Self> {
        let h = length / n as f64;
        Self::new(length, (0..n).map(|i| f(i as f64 * h)).collect())
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn points(&self) -> Vec<f64> {
        let h = self.length / self.n() as f64;
        (0..self.n()).map(|i| i as f64 * h).collect()
    }

    pub fn values(&self) -> &[Vec<Complex64>] {
        &self.values
    }

    pub fn component(&self, j: usize) -> Vec<Complex64> {
        self.values.iter().map(|v| v[j]).collect()
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.n() != other.n() || self.dim() != other.dim() || self.length != other.length {
            return Err(Error::IncompatibleGrids(
                "fields differ in size, components or period".into(),
            ));
        }
        Ok(())
    }

    /// `a·self + other`.
    pub fn axpy(&self, a: Complex64, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x.iter().zip(y).map(|(&p, &q)| a * p + q).collect())
            .collect();
        Self::new(self.length, values)
    }

    pub fn max_deviation(&self, other: &Self) -> Result<f64> {
        self.check_shape(other)?;
        Ok(self
            .values
            .iter()
            .flatten()
            .zip(other.values.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Fourier coefficients, `[mode][component]`.
    pub fn spectrum(&self) -> Vec<Vec<Complex64>> {
        let (n, m) = (self.n(), self.dim());
        let fft = FftPlanner::new().plan_fft_forward(n);
        let mut out = vec![vec![Complex64::new(0.0, 0.0); m]; n];
        for j in 0..m {
            let mut buf = self.component(j);
            fft.process(&mut buf);
            for (row, v) in out.iter_mut().zip(buf) {
                row[j] = v;
            }
        }
        out
    }

    /// Inverse of [`GridField::spectrum`].
    pub fn from_spectrum(length: f64, spectrum: &[Vec<Complex64>]) -> Result<Self> {
        let n = spectrum.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "grid size {n} is not a power of two ≥ 2"
            )));
        }
        let m = spectrum[0].len();
        let ifft = FftPlanner::new().plan_fft_inverse(n);
        let mut values = vec![vec![Complex64::new(0.0, 0.0); m]; n];
        let scale = 1.0 / n as f64;
        for j in 0..m {
            let mut buf: Vec<Complex64> = spectrum.iter().map(|r| r[j]).collect();
            ifft.process(&mut buf);
            for (row, v) in values.iter_mut().zip(buf) {
                row[j] = v * scale;
            }
        }
        Self::new(length, values)
    }
}

/// Frequencies of the modes in transform order.
pub fn frequencies(n: usize, length: f64) -> Vec<f64> {
    let w = 2.0 * std::f64::consts::PI / length;
    (0..n)
        .map(|k| {
            if k < n / 2 {
                k as f64 * w
            } else {
                (k as f64 - n as f64) * w
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SpectralOptions {
    pub kind: DerivativeKind,
    /// Time steps on `[0, t]` for the grid-based methods (triangular, Adams).
    pub steps: usize,
    pub solve: SolveOptions,
    /// Exact orders for the rational method.
    pub rational_orders: Option<Vec<Ratio>>,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            kind: DerivativeKind::Caputo,
            steps: 1024,
            solve: SolveOptions::default(),
            rational_orders: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralSolution {
    pub field: GridField,
    pub warnings: Vec<String>,
}

/// Per-mode default. Grid-based methods are avoided: symbols grow with `|ξ|`
/// and their kernels vary on time scales far below any fixed step.
fn mode_method(spec: &SystemSpec) -> Method {
    if spec.orders.is_commensurate() {
        Method::Commensurate
    } else if spec.rational_orders.is_some() {
        Method::Rational
    } else {
        Method::Series
    }
}

/// Matrix symbol `S(t, ξ)` (or `S₊`) of one mode.
pub fn mode_operator(
    f: CMatrix,
    orders: &MultiOrder,
    t: f64,
    method: Option<Method>,
    opts: &SpectralOptions,
) -> Result<CMatrix> {
    let m = orders.len();
    let mut spec = SystemSpec::new(orders.clone(), f, vec![Complex64::new(0.0, 0.0); m], opts.kind)?;
    spec.rational_orders = opts.rational_orders.clone();
    let method = method.unwrap_or_else(|| mode_method(&spec));
    let steps = match method {
        Method::Triangular | Method::Adams => opts.steps,
        _ => 1,
    };
    let grid = TimeGrid::uniform(t, steps)?;
    let ops = solver::operator(&spec, &grid, method, &opts.solve)?;
    ops.matrices
        .last()
        .cloned()
        .ok_or_else(|| Error::Consistency("operator has no samples".into()))
}

/// `Ψ(t) = S(t, ξ)Ψ(0)` mode by mode. `method = None` picks a method per mode
/// from the structure of `symbol(ξ)`.
///
/// A non-finite symbol at `ξ = 0` holds the zero mode constant (with a
/// warning); anywhere else it is an error.
pub fn solve_on_grid(
    symbol: &(dyn Fn(f64) -> CMatrix + Sync),
    orders: &MultiOrder,
    initial: &GridField,
    t: f64,
    method: Option<Method>,
    opts: &SpectralOptions,
) -> Result<SpectralSolution> {
    let m = orders.len();
    if initial.dim() != m {
        return Err(Error::Dimension(format!(
            "field has {} components, system has {m}",
            initial.dim()
        )));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time {t} must be positive")));
    }
    let spectrum = initial.spectrum();
    let xi = frequencies(initial.n(), initial.length());
    let zero = Complex64::new(0.0, 0.0);
    let solved: Vec<(Vec<Complex64>, Option<String>)> = spectrum
        .par_iter()
        .zip(&xi)
        .map(|(coeffs, &x)| {
            let f = symbol(x);
            let finite = f.nrows() == m && f.ncols() == m && f.iter().all(|z| z.re.is_finite() && z.im.is_finite());
            if !finite {
                if x == 0.0 {
                    return Ok((
                        coeffs.clone(),
                        Some("symbol is not finite at ξ = 0; zero mode held constant".into()),
                    ));
                }
                return Err(Error::SingularSymbol(x));
            }
            if coeffs.iter().all(|&c| c == zero) {
                return Ok((coeffs.clone(), None));
            }
            let s = mode_operator(f, orders, t, method, opts)?;
            let v = nalgebra::DVector::from_column_slice(coeffs);
            Ok(((s * v).iter().copied().collect(), None))
        })
        .collect::<Result<_>>()?;
    let mut warnings = Vec::new();
    let mut out = Vec::with_capacity(solved.len());
    for (v, w) in solved {
        out.push(v);
        warnings.extend(w);
    }
    Ok(SpectralSolution {
        field: GridField::from_spectrum(initial.length(), &out)?,
        warnings,
    })
}
