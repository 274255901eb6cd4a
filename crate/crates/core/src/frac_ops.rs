//! Fractional integrals and derivatives, Volterra convolution and a numerical
//! Laplace transform for functions sampled on a uniform grid `t_i = i·h`.
//!
//! All singular kernels are integrated exactly against the piecewise-linear
//! interpolant of the data (product integration), which keeps the
//! second-order rate for smooth data.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::special::{gamma, rgamma};

#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    h: f64,
    values: Vec<Complex64>,
}

impl SampledFunction {
    pub fn new(h: f64, values: Vec<Complex64>) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("grid step {h} must be positive")));
        }
        if values.is_empty() {
            return Err(Error::InvalidArgument(
                "sampled function needs at least one point".into(),
            ));
        }
        Ok(Self { h, values })
    }

    /// From explicit grid points, which must start at 0 and be uniform to
    /// 1e-12 relative.
    pub fn from_grid(grid: &[f64], values: Vec<Complex64>) -> Result<Self> {
        if grid.len() != values.len() || grid.len() < 2 {
            return Err(Error::InvalidArgument(
                "grid and values must match, with ≥ 2 points".into(),
            ));
        }
        if grid[0] != 0.0 {
            return Err(Error::InvalidArgument("grid must start at t = 0".into()));
        }
        let h = grid[1] - grid[0];
        for (i, &t) in grid.iter().enumerate() {
            if ((t - i as f64 * h) / (i as f64 * h).max(h)).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!("grid is not uniform at index {i}")));
            }
        }
        Self::new(h, values)
    }

    /// Samples `f` at `t_i = i·h`, `i = 0..n`.
    pub fn from_fn(h: f64, n: usize, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        Self::new(h, (0..=n).map(|i| f(i as f64 * h)).collect())
    }

    /// Real-valued convenience version of [`from_fn`](Self::from_fn).
    pub fn from_real_fn(h: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_fn(h, n, |t| Complex64::new(f(t), 0.0))
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| self.t(i)).collect()
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.values.len() == other.values.len() && ((self.h - other.h) / self.h).abs() <= 1e-12
    }

    fn check_grid(&self, other: &Self) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::IncompatibleGrids(format!(
                "(h={}, n={}) vs (h={}, n={})",
                self.h,
                self.len(),
                other.h,
                other.len()
            )))
        }
    }

    pub fn map(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Self {
        Self {
            h: self.h,
            values: self.values.iter().enumerate().map(|(i, &v)| f(self.t(i), v)).collect(),
        }
    }

    pub fn scale(&self, a: Complex64) -> Self {
        self.map(|_, v| a * v)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        Ok(Self {
            h: self.h,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// `max |f(t_i) − g(t_i)|` over indices with `t_i ∈ [from, to]`.
    pub fn sup_dist_on(&self, other: &Self, from: f64, to: f64) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .enumerate()
            .filter(|(i, _)| {
                let t = self.t(*i);
                t >= from - 1e-12 && t <= to + 1e-12
            })
            .map(|(_, (a, b))| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn sup_dist(&self, other: &Self) -> Result<f64> {
        self.sup_dist_on(other, 0.0, f64::INFINITY)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Product-integration weights: `∫_0^{t_n} (t_n−τ)^{α−1} p(τ) dτ = Σ_j w_j p_j`
/// for the piecewise-linear interpolant `p`, scaled by `h^{−α}·α(α+1)`.
/// Returns the Toeplitz part `c_k` (k = n−j ≥ 1, interior nodes) and the
/// endpoint weights are built by [`product_weights_row`].
fn pow_table(alpha: f64, n: usize) -> Vec<f64> {
    (0..=n + 1).map(|k| (k as f64).powf(alpha + 1.0)).collect()
}

/// Weight of node `j` in the row for `t_n` (unscaled; multiply by
/// `h^α/(α(α+1))` to get the kernel integral without `1/Γ(α)`).
#[inline]
fn product_weight(pw: &[f64], alpha: f64, n: usize, j: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if j == 0 {
        let nf = n as f64;
        pw[n - 1] - (nf - alpha - 1.0) * nf.powf(alpha)
    } else if j == n {
        1.0
    } else {
        let k = n - j;
        pw[k + 1] - 2.0 * pw[k] + pw[k - 1]
    }
}

/// `∫_0^{t_n} (t_n−τ)^{α−1} p(τ) dτ` for every `n`, where `p_j = data(n, j)`.
fn product_integrate(
    h: f64,
    len: usize,
    alpha: f64,
    data: impl Fn(usize, usize) -> Complex64 + Sync,
) -> Vec<Complex64> {
    use rayon::prelude::*;
    let pw = pow_table(alpha, len);
    let scale = h.powf(alpha) / (alpha * (alpha + 1.0));
    (0..len)
        .into_par_iter()
        .map(|n| {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..=n {
                acc += data(n, j) * product_weight(&pw, alpha, n, j);
            }
            acc * scale
        })
        .collect()
}

/// `(J^α f)(t) = (1/Γ(α)) ∫_0^t (t−τ)^{α−1} f(τ) dτ`.
pub fn frac_integral(f: &SampledFunction, alpha: f64) -> Result<SampledFunction> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidOrder(alpha));
    }
    let v = &f.values;
    let mut out = product_integrate(f.h, f.len(), alpha, |_, j| v[j]);
    if let Some(gamma_) = start_exponent(v) {
        // replace the linear interpolant on [0, h] by f₀ + (f₁−f₀)(τ/h)^γ
        let hp = f.h.powf(alpha);
        let d = v[1] - v[0];
        for (n, o) in out.iter_mut().enumerate().skip(1) {
            *o += d * hp * (first_cell_moment(alpha, gamma_, n) - first_cell_moment(alpha, 1.0, n));
        }
    }
    let rg = rgamma(alpha);
    SampledFunction::new(f.h, out.into_iter().map(|x| x * rg).collect())
}

/// Exponent `γ` of a power-law start `f(t) ≈ f(0) + c t^γ`, read off the
/// first three samples. `None` when the samples look smooth (`γ ≈ 1`) or do
/// not follow a power law.
fn start_exponent(v: &[Complex64]) -> Option<f64> {
    if v.len() < 3 {
        return None;
    }
    let d1 = v[1] - v[0];
    if d1.norm() == 0.0 {
        return None;
    }
    let r = (v[2] - v[0]) / d1;
    if r.im.abs() > 1e-3 * r.norm() || !(r.re > 1.01 && r.re < 2.0) {
        return None;
    }
    let g = r.re.log2();
    ((g - 1.0).abs() > 1e-3).then_some(g)
}

/// `∫_0^1 (n−u)^{α−1} u^γ du` for `n ≥ 1`.
fn first_cell_moment(alpha: f64, gamma_: f64, n: usize) -> f64 {
    if n == 1 {
        return gamma(gamma_ + 1.0) * gamma(alpha) / gamma(gamma_ + 1.0 + alpha);
    }
    // binomial series in u/n
    let nf = n as f64;
    let mut coeff = 1.0;
    let mut pw = nf.powf(alpha - 1.0);
    let mut sum = 0.0;
    for j in 0..200 {
        let term = coeff * pw / (gamma_ + j as f64 + 1.0);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
        coeff *= (j as f64 + 1.0 - alpha) / (j as f64 + 1.0);
        pw /= nf;
    }
    sum
}

fn check_derivative_order(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidOrder(beta))
    }
}

/// Caputo derivative of order `β ∈ (0,1)` by the L1 scheme.
pub fn caputo_deriv(f: &SampledFunction, beta: f64) -> Result<SampledFunction> {
    check_derivative_order(beta)?;
    let n = f.len();
    let b: Vec<f64> = (0..n)
        .map(|k| ((k + 1) as f64).powf(1.0 - beta) - (k as f64).powf(1.0 - beta))
        .collect();
    let diffs: Vec<Complex64> = (0..n.saturating_sub(1))
        .map(|j| f.values[j + 1] - f.values[j])
        .collect();
    let scale = f.h.powf(-beta) * rgamma(2.0 - beta);
    use rayon::prelude::*;
    let out = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..i {
                acc += diffs[j] * b[i - j - 1];
            }
            acc * scale
        })
        .collect();
    SampledFunction::new(f.h, out)
}

/// Riemann–Liouville derivative `d/dt J^{1−β} f`, `β ∈ (0,1)`.
///
/// The constant part `f(0)` is differentiated analytically
/// (`f(0) t^{−β}/Γ(1−β)`); the rest by second-order differences of the
/// product-integration fractional integral. The value at `t = 0` is the
/// limit when `f(0) = 0` and `±∞` otherwise.
pub fn rl_deriv(f: &SampledFunction, beta: f64) -> Result<SampledFunction> {
    check_derivative_order(beta)?;
    let n = f.len();
    let f0 = f.values[0];
    let shifted = f.map(|_, v| v - f0);
    let integral = frac_integral(&shifted, 1.0 - beta)?.values;
    let h = f.h;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    if n >= 3 {
        for i in 1..n - 1 {
            out[i] = (integral[i + 1] - integral[i - 1]) / (2.0 * h);
        }
        out[n - 1] = (3.0 * integral[n - 1] - 4.0 * integral[n - 2] + integral[n - 3]) / (2.0 * h);
    } else if n == 2 {
        out[1] = (integral[1] - integral[0]) / h;
    }
    let c = rgamma(1.0 - beta);
    for (i, o) in out.iter_mut().enumerate() {
        if i == 0 {
            *o = if f0 == Complex64::new(0.0, 0.0) {
                Complex64::new(0.0, 0.0)
            } else {
                f0 * f64::INFINITY
            };
        } else {
            *o += f0 * (c * (i as f64 * h).powf(-beta));
        }
    }
    SampledFunction::new(h, out)
}

/// `(f ∗ g)(t) = ∫_0^t f(τ) g(t−τ) dτ` by the trapezoidal rule; both inputs
/// must be finite everywhere (see [`convolve_weakly_singular`] otherwise).
pub fn convolve(f: &SampledFunction, g: &SampledFunction) -> Result<SampledFunction> {
    f.check_grid(g)?;
    if f.values
        .iter()
        .chain(&g.values)
        .any(|v| !(v.re.is_finite() && v.im.is_finite()))
    {
        return Err(Error::InvalidArgument(
            "convolution input is not finite; declare the singularity via convolve_weakly_singular".into(),
        ));
    }
    let (fv, gv, h) = (&f.values, &g.values, f.h);
    use rayon::prelude::*;
    let out = (0..f.len())
        .into_par_iter()
        .map(|n| {
            if n == 0 {
                return Complex64::new(0.0, 0.0);
            }
            let mut acc = 0.5 * (fv[0] * gv[n] + fv[n] * gv[0]);
            for j in 1..n {
                acc += fv[j] * gv[n - j];
            }
            acc * h
        })
        .collect();
    SampledFunction::new(h, out)
}

/// `(k ∗ g)(t)` for a kernel `k(t) = t^{γ−1} φ(t)` with `γ > 0` and smooth `φ`
/// sampled on the grid. The product `φ(t−τ)g(τ)` is interpolated linearly and
/// integrated exactly against `(t−τ)^{γ−1}`; power-law starts of `φ` or `g`
/// are modelled on the cell they affect.
pub fn convolve_weakly_singular(gamma_exp: f64, phi: &SampledFunction, g: &SampledFunction) -> Result<SampledFunction> {
    phi.check_grid(g)?;
    if !(gamma_exp > 0.0 && gamma_exp.is_finite()) {
        return Err(Error::InvalidOrder(gamma_exp));
    }
    let (pv, gv) = (&phi.values, &g.values);
    let mut out = product_integrate(phi.h, phi.len(), gamma_exp, |n, j| pv[n - j] * gv[j]);
    let hp = phi.h.powf(gamma_exp);
    let m = |x: f64, n: usize| first_cell_moment(gamma_exp, x, n);
    // power-law starts: g near τ = 0 (first cell) and φ near 0, i.e. τ
    // near t (last cell); the other factor is taken linear on the cell
    if let Some(eg) = start_exponent(gv) {
        let d = gv[1] - gv[0];
        for (n, o) in out.iter_mut().enumerate().skip(1) {
            let dphi = pv[n - 1] - pv[n];
            *o += d * hp * (pv[n] * (m(eg, n) - m(1.0, n)) + dphi * (m(eg + 1.0, n) - m(1.0, n)));
        }
    }
    if let Some(ep) = start_exponent(pv) {
        let e = pv[1] - pv[0];
        let a = gamma_exp;
        for (n, o) in out.iter_mut().enumerate().skip(1) {
            let dg = gv[n - 1] - gv[n];
            *o += e * hp * (gv[n] * (1.0 / (a + ep) - 1.0 / (a + 1.0)) + dg * (1.0 / (a + ep + 1.0) - 1.0 / (a + 2.0)));
        }
    }
    SampledFunction::new(phi.h, out)
}

const GL_X: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_W: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Moments `∫ (x−y)^{a−1} y^{b−1} q(y) dy` over unit cells `[i, i+1]` of a
/// target at `x = n`, for `q ∈ {1, y − i}`. Interior cells use Gauss–Legendre
/// with tabulated powers; the two cells touching a singularity use a
/// binomial series.
struct CellMoments {
    a: f64,
    b: f64,
    // 0.5·w_q·(i + r_q)^{b−1} and (k + 1 − r_q)^{a−1}
    left: Vec<[f64; 8]>,
    right: Vec<[f64; 8]>,
}

impl CellMoments {
    fn new(a: f64, b: f64, len: usize) -> Self {
        let r: Vec<f64> = GL_X.iter().map(|x| 0.5 * (x + 1.0)).collect();
        let table = |e: f64, mirror: bool| -> Vec<[f64; 8]> {
            (0..len)
                .map(|i| {
                    let mut row = [0.0; 8];
                    for q in 0..8 {
                        let y = if mirror { i as f64 + 1.0 - r[q] } else { i as f64 + r[q] };
                        let w = if mirror { 1.0 } else { 0.5 * GL_W[q] };
                        row[q] = w * y.powf(e - 1.0);
                    }
                    row
                })
                .collect()
        };
        Self {
            a,
            b,
            left: table(b, false),
            right: table(a, true),
        }
    }

    fn get(&self, n: usize, i: usize) -> (f64, f64) {
        let (a, b) = (self.a, self.b);
        let nf = n as f64;
        if n == 1 {
            // Beta integrals on the single cell
            let m0 = gamma(a) * gamma(b) * rgamma(a + b);
            let m1 = gamma(a) * gamma(b + 1.0) * rgamma(a + b + 1.0);
            return (m0, m1);
        }
        // ∫_0^1 u^{p−1} (n−u)^{q−1} u^e du = n^{q−1} Σ_k C(q−1,k)(−1/n)^k/(p+e+k)
        let edge = |p: f64, q: f64, e: f64| -> f64 {
            let mut acc = 0.0;
            let mut coef = 1.0;
            for k in 0..200 {
                let term = coef / (p + e + k as f64);
                acc += term;
                if term.abs() < 1e-17 * acc.abs() && k > 2 {
                    break;
                }
                coef *= (q - 1.0 - k as f64) / ((k + 1) as f64) * (-1.0 / nf);
            }
            nf.powf(q - 1.0) * acc
        };
        if i == 0 {
            // singular at y = 0
            (edge(b, a, 0.0), edge(b, a, 1.0))
        } else if i == n - 1 {
            // u = n − y; y − i = 1 − u
            let m0 = edge(a, b, 0.0);
            (m0, m0 - edge(a, b, 1.0))
        } else {
            let (l, rt) = (&self.left[i], &self.right[n - i - 1]);
            let (mut m0, mut m1) = (0.0, 0.0);
            for q in 0..8 {
                let v = l[q] * rt[q];
                m0 += v;
                m1 += v * 0.5 * (GL_X[q] + 1.0);
            }
            (m0, m1)
        }
    }
}

/// `∫_0^t (t−τ)^{a−1} φ(t−τ) τ^{b−1} v(τ) dτ` for `a, b > 0` and smooth `φ`, `v`:
/// the product `φ(t−τ)v(τ)` is interpolated linearly and integrated exactly
/// against both power singularities.
pub fn convolve_singular(a: f64, phi: &SampledFunction, b: f64, v: &SampledFunction) -> Result<SampledFunction> {
    phi.check_grid(v)?;
    for x in [a, b] {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::InvalidOrder(x));
        }
    }
    if b == 1.0 {
        return convolve_weakly_singular(a, phi, v);
    }
    let (pv, vv, h) = (&phi.values, &v.values, phi.h);
    let scale = h.powf(a + b - 1.0);
    let moments = CellMoments::new(a, b, phi.len());
    use rayon::prelude::*;
    let mut out = (0..phi.len())
        .into_par_iter()
        .map(|n| {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n {
                let (m0, m1) = moments.get(n, i);
                acc += pv[n - i] * vv[i] * (m0 - m1) + pv[n - i - 1] * vv[i + 1] * m1;
            }
            acc * scale
        })
        .collect::<Vec<_>>();
    // power-law start of v on the first cell, as in convolve_weakly_singular
    if let Some(ev) = start_exponent(vv) {
        let d = vv[1] - vv[0];
        let m = |x: f64, n: usize| first_cell_moment(a, b - 1.0 + x, n);
        for (n, o) in out.iter_mut().enumerate().skip(1) {
            let dphi = pv[n - 1] - pv[n];
            *o += d * scale * (pv[n] * (m(ev, n) - m(1.0, n)) + dphi * (m(ev + 1.0, n) - m(1.0, n)));
        }
    }
    SampledFunction::new(h, out)
}

/// Applies `(I − μ J^β)^{-1}` as the Neumann series `Σ (μJ^β)^n f`.
pub fn neumann_resolvent(f: &SampledFunction, mu: Complex64, beta: f64, tol: f64) -> Result<SampledFunction> {
    const CAP: usize = 500;
    let mut term = f.clone();
    let mut sum = f.clone();
    let mut prev = term.sup_norm();
    for n in 1..CAP {
        term = frac_integral(&term, beta)?.scale(mu);
        sum = sum.add(&term)?;
        let tn = term.sup_norm();
        if n > 10 && tn > prev {
            return Err(Error::SeriesDivergence { terms: n });
        }
        if tn <= tol * sum.sup_norm().max(f64::MIN_POSITIVE) {
            return Ok(sum);
        }
        prev = tn;
    }
    Err(Error::SeriesDivergence { terms: CAP })
}

// ------------------------------------------------------------ Laplace

#[derive(Debug, Clone, Copy)]
pub struct LaplaceValue {
    pub value: Complex64,
    /// Estimated magnitude of `∫_{T}^{∞} e^{−st} f(t) dt`.
    pub tail: f64,
    /// Estimated quadrature error on `[0, T]`.
    pub quad_error: f64,
}

/// Tanh-sinh quadrature of `g` on `[a, b]`, tolerant of integrable endpoint
/// singularities. Returns (value, error estimate).
fn tanh_sinh(g: &dyn Fn(f64) -> Complex64, a: f64, b: f64) -> (Complex64, f64) {
    use std::f64::consts::FRAC_PI_2;
    let half = 0.5 * (b - a);
    let node = |x: f64| -> (f64, f64, f64) {
        // returns (distance from a, distance from b, weight)
        let s = FRAC_PI_2 * x.sinh();
        let ch = s.cosh();
        let w = FRAC_PI_2 * x.cosh() / (ch * ch);
        // 1 - tanh(s) and 1 + tanh(s) computed without cancellation
        let e = (-2.0 * s.abs()).exp();
        let small = 2.0 * e / (1.0 + e);
        let (da, db) = if s >= 0.0 {
            (2.0 - small, small)
        } else {
            (small, 2.0 - small)
        };
        (half * da, half * db, w)
    };
    let eval = |x: f64| -> Complex64 {
        let (da, db, w) = node(x);
        if da <= 0.0 || db <= 0.0 || w < 1e-300 {
            return Complex64::new(0.0, 0.0);
        }
        let t = if da < db { a + da } else { b - db };
        let v = g(t);
        if v.re.is_finite() && v.im.is_finite() {
            v * w
        } else {
            Complex64::new(0.0, 0.0)
        }
    };
    let tmax = 6.2;
    let mut hstep = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    while k as f64 * hstep <= tmax {
        let x = k as f64 * hstep;
        sum += eval(x) + eval(-x);
        k += 1;
    }
    let mut prev = sum * hstep * half;
    let mut err = f64::INFINITY;
    for _level in 0..8 {
        hstep *= 0.5;
        let mut k = 1;
        while k as f64 * hstep <= tmax {
            let x = k as f64 * hstep;
            sum += eval(x) + eval(-x);
            k += 2;
        }
        let cur = sum * hstep * half;
        err = (cur - prev).norm();
        if err <= 1e-15 * cur.norm() {
            return (cur, err);
        }
        prev = cur;
    }
    (prev, err)
}

/// `∫_0^{T} e^{−st} f(t) dt` by piecewise tanh-sinh quadrature, with an
/// estimate of the neglected tail based on the growth of `f` near `T`.
/// Fails when the tail (or quadrature error) exceeds `tol·|value|`.
pub fn laplace_numeric(f: &dyn Fn(f64) -> Complex64, s: Complex64, t_cut: f64, tol: f64) -> Result<LaplaceValue> {
    if !(s.re > 0.0) {
        return Err(Error::InvalidArgument(format!("Re(s) must be positive, got {s}")));
    }
    if !(t_cut > 0.0 && t_cut.is_finite()) {
        return Err(Error::InvalidArgument(format!("cut-off {t_cut} must be positive")));
    }
    let g = |t: f64| (-s * t).exp() * f(t);
    // geometric panels resolve the t = 0 behaviour, unit panels the rest
    let mut edges = vec![0.0];
    let mut e = t_cut.min(1.0) * 1e-3;
    while e < t_cut.min(1.0) {
        edges.push(e);
        e *= 10.0;
    }
    let mut x = t_cut.min(1.0);
    let panel = (1.0 / s.norm()).clamp(0.05, 1.0);
    while x < t_cut {
        edges.push(x);
        x += panel;
    }
    edges.push(t_cut);
    let mut value = Complex64::new(0.0, 0.0);
    let mut quad_error = 0.0;
    for w in edges.windows(2) {
        if w[1] - w[0] <= 0.0 {
            continue;
        }
        let (v, e) = tanh_sinh(&g, w[0], w[1]);
        value += v;
        quad_error += e;
    }
    // tail: |f| ~ |f(T)| e^{κ(t−T)} beyond the cut
    let ft = f(t_cut).norm();
    let fp = f(0.9 * t_cut).norm();
    let kappa = if ft > 0.0 && fp > 0.0 {
        ((ft / fp).ln() / (0.1 * t_cut)).max(0.0)
    } else {
        0.0
    };
    let tail = if s.re > kappa {
        ft * (-s.re * t_cut).exp() / (s.re - kappa)
    } else {
        f64::INFINITY
    };
    let scale = value.norm().max(f64::MIN_POSITIVE);
    if !(tail <= tol * scale) {
        return Err(Error::InaccurateTransform { tail, tol: tol * scale });
    }
    if !(quad_error <= tol * scale) {
        return Err(Error::InaccurateTransform {
            tail: quad_error,
            tol: tol * scale,
        });
    }
    Ok(LaplaceValue {
        value,
        tail,
        quad_error,
    })
}

/// `t^{a}` sampled on the grid (convenience for kernels).
pub fn power_function(h: f64, n: usize, a: f64) -> Result<SampledFunction> {
    SampledFunction::from_real_fn(h, n, |t| if t == 0.0 && a == 0.0 { 1.0 } else { t.powf(a) })
}

/// `Γ(a+1)Γ(b+1)/Γ(a+b+2)`: the coefficient in `t^a ∗ t^b = B·t^{a+b+1}`.
pub fn power_convolution_coeff(a: f64, b: f64) -> f64 {
    gamma(a + 1.0) * gamma(b + 1.0) * rgamma(a + b + 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: f64 = 1.0 / 1024.0;
    const N: usize = 1024;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn singular_convolution_with_root_start() {
        // ∫ (t−τ)^{a−1} τ^{b−1} (1 + τ^{1/2}) dτ = B(a,b) t^{a+b−1} + B(a,b+½) t^{a+b−½}
        let (a, b) = (0.8, 0.6);
        let beta = |x: f64, y: f64| gamma(x) * gamma(y) / gamma(x + y);
        let err = |n: usize| {
            let h = 1.0 / n as f64;
            let one = SampledFunction::from_real_fn(h, n, |_| 1.0).unwrap();
            let v = SampledFunction::from_real_fn(h, n, |t| 1.0 + t.sqrt()).unwrap();
            let out = convolve_singular(a, &one, b, &v).unwrap();
            (1..=n)
                .map(|i| {
                    let t = out.t(i);
                    let want = beta(a, b) * t.powf(a + b - 1.0) + beta(a, b + 0.5) * t.powf(a + b - 0.5);
                    (out.values()[i].re - want).abs()
                })
                .fold(0.0, f64::max)
        };
        // the second cell limits the rate to h^{a+b−1/2}
        let (coarse, fine) = (err(512), err(1024));
        assert!(fine < 5e-5, "{fine}");
        assert!((coarse / fine).log2() > 0.8, "{coarse} {fine}");
    }

    #[test]
    fn integral_of_one() {
        let one = SampledFunction::from_real_fn(H, N, |_| 1.0).unwrap();
        let j1 = frac_integral(&one, 1.0).unwrap();
        let t = SampledFunction::from_real_fn(H, N, |t| t).unwrap();
        assert!(j1.sup_dist(&t).unwrap() < 1e-13);
        let jh = frac_integral(&one, 0.5).unwrap();
        let want = SampledFunction::from_real_fn(H, N, |t| t.sqrt() / gamma(1.5)).unwrap();
        let e = jh.sup_dist(&want).unwrap();
        assert!(e < 1e-12, "{e}");
    }

    #[test]
    fn rejects_bad_orders() {
        let one = SampledFunction::from_real_fn(H, 8, |_| 1.0).unwrap();
        assert!(matches!(frac_integral(&one, 0.0), Err(Error::InvalidOrder(_))));
        assert!(caputo_deriv(&one, 1.0).is_err());
        assert!(rl_deriv(&one, 0.0).is_err());
    }

    #[test]
    fn caputo_power_rule_and_constants() {
        let k = SampledFunction::from_real_fn(H, N, |_| 3.0).unwrap();
        assert!(caputo_deriv(&k, 0.4).unwrap().sup_norm() == 0.0);
        let t = SampledFunction::from_real_fn(H, N, |t| t).unwrap();
        let d = caputo_deriv(&t, 0.5).unwrap();
        let want = SampledFunction::from_real_fn(H, N, |t| t.sqrt() / gamma(1.5)).unwrap();
        assert!(d.sup_dist(&want).unwrap() < 1e-12);
    }

    #[test]
    fn rl_of_constant() {
        let one = SampledFunction::from_real_fn(H, N, |_| 1.0).unwrap();
        let d = rl_deriv(&one, 0.5).unwrap();
        for i in 1..=N {
            let t = i as f64 * H;
            let want = t.powf(-0.5) * rgamma(0.5);
            assert!((d.values()[i].re - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn convolution_polynomials() {
        let one = SampledFunction::from_real_fn(H, N, |_| 1.0).unwrap();
        let t = SampledFunction::from_real_fn(H, N, |t| t).unwrap();
        assert!(convolve(&one, &one).unwrap().sup_dist(&t).unwrap() < 1e-13);
        let t3 = SampledFunction::from_real_fn(H, N, |t| t * t * t / 6.0).unwrap();
        assert!(convolve(&t, &t).unwrap().sup_dist(&t3).unwrap() < 1e-6);
        let short = SampledFunction::from_real_fn(H, N / 2, |t| t).unwrap();
        assert!(matches!(convolve(&t, &short), Err(Error::IncompatibleGrids(_))));
    }

    #[test]
    fn weakly_singular_convolution_is_exact_for_linear_data() {
        // t^{-1/2} ∗ t = B(1/2, 2) t^{3/2}
        let one = SampledFunction::from_real_fn(H, N, |_| 1.0).unwrap();
        let t = SampledFunction::from_real_fn(H, N, |t| t).unwrap();
        let r = convolve_weakly_singular(0.5, &one, &t).unwrap();
        let coeff = power_convolution_coeff(-0.5, 1.0);
        let want = SampledFunction::from_real_fn(H, N, |t| coeff * t.powf(1.5)).unwrap();
        assert!(r.sup_dist(&want).unwrap() < 1e-13);
    }

    #[test]
    fn laplace_elementary() {
        let one = |_t: f64| c(1.0);
        let v = laplace_numeric(&one, c(3.0), 30.0, 1e-10).unwrap();
        assert!((v.value.re - 1.0 / 3.0).abs() < 1e-13);
        let inv_sqrt = |t: f64| c(t.powf(-0.5));
        let v = laplace_numeric(&inv_sqrt, c(2.0), 40.0, 1e-10).unwrap();
        assert!(
            (v.value.re - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-11,
            "{:?}",
            v
        );
        let grow = |t: f64| c((2.0 * t).exp());
        assert!(matches!(
            laplace_numeric(&grow, c(1.5), 10.0, 1e-10),
            Err(Error::InaccurateTransform { .. })
        ));
    }

    #[test]
    fn neumann_geometric() {
        // (I - μJ^1)^{-1} 1 = e^{μt}
        let one = SampledFunction::from_real_fn(H, N, |_| 1.0).unwrap();
        let r = neumann_resolvent(&one, c(-1.0), 1.0, 1e-14).unwrap();
        let want = SampledFunction::from_real_fn(H, N, |t| (-t).exp()).unwrap();
        assert!(r.sup_dist(&want).unwrap() < 1e-6);
    }

    #[test]
    fn doubly_singular_convolution_of_powers() {
        // t^{a−1} ∗ t^{b−1} = B(a,b) t^{a+b−1}
        let one = SampledFunction::from_real_fn(H, N, |_| 1.0).unwrap();
        for &(a, b) in &[(0.5, 0.5), (0.3, 0.8), (0.7, 0.2)] {
            let r = convolve_singular(a, &one, b, &one).unwrap();
            let coeff = gamma(a) * gamma(b) * rgamma(a + b);
            let want = SampledFunction::from_real_fn(H, N, |t| coeff * t.powf(a + b - 1.0)).unwrap();
            let e = r.sup_dist_on(&want, H, 1.0).unwrap();
            assert!(e < 1e-12 * coeff * H.powf((a + b - 1.0).min(0.0)), "{a} {b} {e}");
        }
    }
}
