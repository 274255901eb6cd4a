//! Two-parameter Mittag-Leffler function `E_{β,ν}(z) = Σ zⁿ/Γ(βn+ν)` and its
//! derivatives in `z`.
//!
//! Three evaluation regimes are combined:
//!
//! * **series** — compensated Taylor summation, used whenever the series does
//!   not suffer from cancellation (peak term small, or all terms of one sign);
//! * **contour** — trapezoidal quadrature of the inverse Laplace integral
//!   `(1/2πi) ∫ e^s s^{β−ν} / (s^β − z) ds` on the parabola `s = μ(1+iu)²`,
//!   plus residues of the poles `s^β = z` lying to the right of it;
//! * **asymptotic** — for `|z| ≥ 100` the pole residues plus the algebraic
//!   tail `−Σ z^{−k}/Γ(ν−βk)`, truncated at its smallest term.
//!
//! Scaled derivatives `E^{(k)}(z)/k!` use the differentiated series, the same
//! contour with `(s^β − z)^{k+1}` in the denominator when every pole can be
//! kept left of the parabola, and a Cauchy integral otherwise.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::special::{binomial, factorial, ln_gamma, rgamma};

/// Largest derivative order accepted by [`ml_deriv`].
pub const MAX_DERIV_ORDER: usize = 20;

/// Target accuracy (absolute for |E| ≤ 1, relative above).
const TARGET: f64 = 1e-10;

const ASYMPTOTIC_RADIUS: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MLParams {
    beta: f64,
    nu: f64,
}

impl MLParams {
    pub fn new(beta: f64, nu: f64) -> Result<Self> {
        if !(beta.is_finite() && nu.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Mittag-Leffler parameters must be finite (beta={beta}, nu={nu})"
            )));
        }
        if !(beta > 0.0 && beta <= 2.0) {
            return Err(Error::InvalidArgument(format!(
                "beta={beta} outside the supported range (0, 2]"
            )));
        }
        if nu <= 0.0 {
            return Err(Error::InvalidArgument(format!("nu={nu} must be positive")));
        }
        Ok(Self { beta, nu })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    fn is_exp(&self) -> bool {
        self.beta == 1.0 && self.nu == 1.0
    }
}

/// Which algorithm produced a value; exposed for diagnostics and tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Exact,
    Series,
    Contour,
    Asymptotic,
    Cauchy,
}

#[derive(Debug, Clone, Copy)]
pub struct Evaluation {
    pub value: Complex64,
    pub error_estimate: f64,
    pub regime: Regime,
}

/// `E_{β,ν}(z)`.
pub fn ml(params: MLParams, z: Complex64) -> Result<Complex64> {
    Ok(ml_eval(params, z)?.value)
}

/// `d^k/dz^k E_{β,ν}(z)` for `k ≤ 20`.
pub fn ml_deriv(params: MLParams, z: Complex64, k: usize) -> Result<Complex64> {
    if k > MAX_DERIV_ORDER {
        return Err(Error::UnsupportedOrder {
            order: k,
            cap: MAX_DERIV_ORDER,
        });
    }
    if k == 0 {
        return ml(params, z);
    }
    let scaled = ml_deriv_scaled_eval(params, z, k)?;
    Ok(scaled.value * factorial(k))
}

/// `E^{(k)}_{β,ν}(z) / k!` without the order cap; the scaling keeps the
/// values representable for the large `k` needed by the series solver.
pub fn ml_deriv_scaled(params: MLParams, z: Complex64, k: usize) -> Result<Complex64> {
    Ok(ml_deriv_scaled_eval(params, z, k)?.value)
}

/// `E_{β,ν}(z)` with regime and error estimate.
pub fn ml_eval(params: MLParams, z: Complex64) -> Result<Evaluation> {
    ml_deriv_scaled_eval(params, z, 0)
}

/// `E^{(k)}_{β,ν}(z)/k!` with regime and error estimate.
pub fn ml_deriv_scaled_eval(params: MLParams, z: Complex64, k: usize) -> Result<Evaluation> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite argument {z}")));
    }
    if params.is_exp() {
        let v = z.exp() / factorial(k);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Overflow(format!("exp({z})")));
        }
        return Ok(Evaluation {
            value: v,
            error_estimate: 2.0 * f64::EPSILON * v.norm(),
            regime: Regime::Exact,
        });
    }
    if z == Complex64::new(0.0, 0.0) {
        let v = Complex64::new(rgamma(params.beta * k as f64 + params.nu), 0.0);
        return Ok(Evaluation {
            value: v,
            error_estimate: f64::EPSILON * v.norm(),
            regime: Regime::Series,
        });
    }

    let series_first = params.beta == 2.0 || series_is_promising(params, z, k);
    if series_first {
        if let Some(ev) = series(params, z, k) {
            if params.beta == 2.0 || acceptable(&ev) {
                return finish(ev);
            }
        }
        if params.beta == 2.0 {
            return Err(Error::AccuracyLoss {
                context: format!("series for beta=2 at z={z}"),
                estimate: f64::INFINITY,
            });
        }
    }

    if k == 0 && z.norm() >= ASYMPTOTIC_RADIUS {
        if let Some(ev) = asymptotic(params, z)? {
            if acceptable(&ev) {
                return finish(ev);
            }
        }
    }

    let poles = poles(params, z);
    match contour(params, z, k, &poles)? {
        Some(ev) => finish(ev),
        None => cauchy(params, z, k),
    }
}

fn acceptable(ev: &Evaluation) -> bool {
    ev.error_estimate <= 1e-3 * TARGET * ev.value.norm().max(1.0)
}

fn finish(ev: Evaluation) -> Result<Evaluation> {
    if !(ev.value.re.is_finite() && ev.value.im.is_finite()) {
        return Err(Error::Overflow(format!(
            "Mittag-Leffler value ({:?} regime)",
            ev.regime
        )));
    }
    if ev.error_estimate > TARGET * ev.value.norm().max(1.0) {
        return Err(Error::AccuracyLoss {
            context: format!("Mittag-Leffler evaluation ({:?} regime)", ev.regime),
            estimate: ev.error_estimate,
        });
    }
    Ok(ev)
}

// ---------------------------------------------------------------- series

/// `ln C(n+k,k) − ln Γ(β(n+k)+ν)`, i.e. the log-coefficient of `zⁿ`.
fn log_coeff(beta: f64, nu: f64, k: usize, n: usize) -> f64 {
    let lc = if k == 0 {
        0.0
    } else {
        ln_gamma((n + k + 1) as f64) - ln_gamma((n + 1) as f64) - ln_gamma((k + 1) as f64)
    };
    lc - ln_gamma(beta * (n + k) as f64 + nu)
}

/// Coefficient of `zⁿ` in `E^{(k)}(z)/k!`.
pub(crate) fn series_coeff(beta: f64, nu: f64, k: usize, n: usize) -> f64 {
    let arg = beta * (n + k) as f64 + nu;
    let c = binomial(n + k, k);
    if c < 1e300 && arg < 170.0 {
        c * rgamma(arg)
    } else {
        log_coeff(beta, nu, k, n).exp()
    }
}

/// Log of the largest series term and the index where it occurs.
fn log_peak(params: MLParams, z: Complex64, k: usize) -> (f64, usize) {
    let lz = z.norm().ln();
    let mut best = f64::NEG_INFINITY;
    let mut at = 0;
    for n in 0..20_000 {
        let v = n as f64 * lz + log_coeff(params.beta, params.nu, k, n);
        if v > best {
            best = v;
            at = n;
        } else if n > at + 2 {
            // log-concave in n: once decreasing, it stays decreasing
            break;
        }
    }
    (best, at)
}

fn series_is_promising(params: MLParams, z: Complex64, k: usize) -> bool {
    let (lp, at) = log_peak(params, z, k);
    if at > 5_000 {
        return false;
    }
    let positive_real = z.im == 0.0 && z.re > 0.0;
    positive_real && lp < 700.0 || lp < 5.0 * std::f64::consts::LN_10
}

#[derive(Default)]
struct Kahan {
    sum: Complex64,
    comp: Complex64,
}

impl Kahan {
    fn add(&mut self, x: Complex64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

fn series(params: MLParams, z: Complex64, k: usize) -> Option<Evaluation> {
    let (beta, nu) = (params.beta, params.nu);
    let lz = z.norm().ln();
    let unit = z / z.norm();
    let mut acc = Kahan::default();
    let mut abs_sum = 0.0;
    let mut power = Complex64::new(1.0, 0.0); // zⁿ while representable
    let mut phase = Complex64::new(1.0, 0.0);
    let mut use_log = false;
    let mut prev_mag = f64::INFINITY;
    for n in 0..20_000usize {
        if n > 0 {
            power *= z;
            phase *= unit;
            if power.norm() > 1e250 {
                use_log = true;
            }
        }
        let term = if use_log {
            let lm = n as f64 * lz + log_coeff(beta, nu, k, n);
            phase * lm.exp()
        } else {
            power * series_coeff(beta, nu, k, n)
        };
        let mag = term.norm();
        if !mag.is_finite() {
            return None;
        }
        acc.add(term);
        abs_sum += mag;
        let converged = mag <= 1e-17 * acc.sum.norm().max(1e-300) || mag <= 1e-18 * abs_sum;
        if n > 2 && mag < prev_mag && converged {
            let value = acc.sum;
            let err = 4.0 * f64::EPSILON * abs_sum + (n as f64).sqrt() * f64::EPSILON * value.norm();
            return Some(Evaluation {
                value,
                error_estimate: err,
                regime: Regime::Series,
            });
        }
        prev_mag = mag;
    }
    None
}

// ---------------------------------------------------------------- poles

#[derive(Debug, Clone, Copy)]
struct Pole {
    radius: f64,
    theta: f64,
}

impl Pole {
    fn s(&self) -> Complex64 {
        Complex64::from_polar(self.radius, self.theta)
    }

    /// `r cos²(θ/2)`: the pole lies right of the parabola with parameter μ
    /// exactly when μ < this value.
    fn crit(&self) -> f64 {
        let c = (0.5 * self.theta).cos();
        self.radius * c * c
    }

    /// `Re √(s/μ)`; > 1 means right of the parabola.
    fn reach(&self, mu: f64) -> f64 {
        (self.radius / mu).sqrt() * (0.5 * self.theta).cos()
    }
}

/// Solutions of `s^β = z` on the principal sheet.
fn poles(params: MLParams, z: Complex64) -> Vec<Pole> {
    let r = z.norm().powf(1.0 / params.beta);
    let arg = z.arg();
    let mut out = Vec::new();
    for j in -2i32..=2 {
        let phi = arg + 2.0 * PI * j as f64;
        if phi.abs() < params.beta * PI {
            out.push(Pole {
                radius: r,
                theta: phi / params.beta,
            });
        }
    }
    out
}

/// `(1/β) s^{1−ν} e^{s}` at a pole, using the pole's own argument so the
/// branch is unambiguous.
fn residue(params: MLParams, p: &Pole) -> Complex64 {
    let s = p.s();
    let log_s = Complex64::new(p.radius.ln(), p.theta);
    ((1.0 - params.nu) * log_s + s).exp() / params.beta
}

// ---------------------------------------------------------------- contour

const MU_MIN: f64 = 1e-3;
const MU_MAX: f64 = 60.0;

/// Picks the parabola parameter: as close to the preferred value as possible
/// while keeping every pole a factor 2 away (in `crit`) from the contour.
/// Derivatives (`k > 0`) require all poles on the left.
fn choose_mu(params: MLParams, k: usize, poles: &[Pole]) -> Option<f64> {
    let pref = 2.0f64.max(params.nu - params.beta);
    let valid = |mu: f64| {
        (MU_MIN..=MU_MAX).contains(&mu)
            && poles.iter().all(|p| {
                let c = p.crit();
                mu >= 2.0 * c * (1.0 - 1e-12) || (k == 0 && mu <= 0.5 * c * (1.0 + 1e-12))
            })
    };
    if k > 0 {
        let cmax = poles.iter().map(|p| p.crit()).fold(0.0, f64::max);
        let mu = pref.max(2.0 * cmax);
        // keeping far-right poles on the left costs e^{μ} in cancellation
        return (mu <= 16.0f64.max(pref) && valid(mu)).then_some(mu);
    }
    if valid(pref) {
        return Some(pref);
    }
    let mut cands: Vec<f64> = Vec::new();
    for p in poles {
        cands.push(0.5 * p.crit());
        cands.push(2.0 * p.crit());
    }
    // prefer the largest admissible μ below the preferred one (right poles
    // contribute exact residues), then the smallest one above
    let below = cands
        .iter()
        .copied()
        .filter(|&m| m <= pref && valid(m))
        .fold(None, |a: Option<f64>, m| Some(a.map_or(m, |x| x.max(m))));
    if let Some(m) = below {
        if m >= 0.05 {
            return Some(m);
        }
    }
    let above = cands
        .iter()
        .copied()
        .filter(|&m| m > pref && valid(m))
        .fold(None, |a: Option<f64>, m| Some(a.map_or(m, |x| x.min(m))));
    match (below, above) {
        (_, Some(a)) if a <= 12.0 => Some(a),
        (Some(b), _) => Some(b),
        (None, a) => a,
    }
}

fn contour(params: MLParams, z: Complex64, k: usize, poles: &[Pole]) -> Result<Option<Evaluation>> {
    let Some(mu) = choose_mu(params, k, poles) else {
        return Ok(None);
    };
    let (beta, nu) = (params.beta, params.nu);

    // strip of analyticity in the quadrature variable on each side
    let mut d_right: f64 = 1.0;
    let mut d_left: f64 = 1.0; // the branch cut sits at distance exactly 1
    let mut res = Complex64::new(0.0, 0.0);
    let mut res_abs = 0.0;
    for p in poles {
        let reach = p.reach(mu);
        if reach > 1.0 {
            d_right = d_right.min(reach - 1.0);
            let r = residue(params, p);
            if !(r.re.is_finite() && r.im.is_finite()) {
                return Err(Error::Overflow(format!("pole residue of E at z={z}")));
            }
            res += r;
            res_abs += r.norm();
        } else {
            d_left = d_left.min(1.0 - reach);
        }
    }
    let growth = mu * ((1.0 + d_right).powi(2) - 1.0);
    let h = (2.0 * PI * d_right / (37.0 + growth)).min(2.0 * PI * d_left / 37.0);
    let u_max = (1.0 + 45.0 / mu).sqrt();
    let n_half = (u_max / h).ceil() as usize;

    let power = (k + 1) as i32;
    let eval = |u: f64| -> Complex64 {
        let w = Complex64::new(1.0, u);
        let s = mu * w * w;
        let ls = s.ln();
        let sb = (beta * ls).exp();
        let num = (s + (beta - nu) * ls).exp() * w;
        num / (sb - z).powi(power)
    };

    let mut acc = Kahan::default();
    let mut abs_sum = 0.0;
    let f0 = eval(0.0);
    acc.add(f0);
    abs_sum += f0.norm();
    for j in 1..=n_half {
        let u = j as f64 * h;
        // conjugate symmetry is not assumed: z may be complex
        let a = eval(u);
        let b = eval(-u);
        acc.add(a);
        acc.add(b);
        abs_sum += a.norm() + b.norm();
    }
    let integral = acc.sum * (h * mu / PI);
    let integral_abs = abs_sum * (h * mu / PI);
    let value = integral + res;
    let err = 16.0 * f64::EPSILON * (integral_abs + res_abs) + 1e-15 * integral_abs;
    Ok(Some(Evaluation {
        value,
        error_estimate: err,
        regime: Regime::Contour,
    }))
}

// ---------------------------------------------------------------- asymptotic

fn asymptotic(params: MLParams, z: Complex64) -> Result<Option<Evaluation>> {
    if params.beta >= 2.0 {
        return Ok(None);
    }
    let mut value = Complex64::new(0.0, 0.0);
    for p in poles(params, z) {
        let r = residue(params, &p);
        if !(r.re.is_finite() && r.im.is_finite()) {
            return Err(Error::Overflow(format!("Mittag-Leffler growth at z={z}")));
        }
        value += r;
    }
    let zinv = z.inv();
    let mut zpow = Complex64::new(1.0, 0.0);
    let mut tail = Kahan::default();
    let mut prev = f64::INFINITY;
    let mut smallest = f64::INFINITY;
    for k in 1..200 {
        zpow *= zinv;
        let term = zpow * rgamma(params.nu - params.beta * k as f64);
        let mag = term.norm();
        if mag > prev && mag > 0.0 && k > 2 {
            break; // divergent part of the expansion reached
        }
        tail.add(term);
        if mag > 0.0 {
            smallest = smallest.min(mag);
            prev = mag;
        }
        // the smallest term bounds the truncation error
        if mag != 0.0 && mag < 1e-18 * tail.sum.norm().max(value.norm()) {
            smallest = mag;
            break;
        }
    }
    let v = value - tail.sum;
    Ok(Some(Evaluation {
        value: v,
        error_estimate: smallest + 4.0 * f64::EPSILON * v.norm(),
        regime: Regime::Asymptotic,
    }))
}

// ---------------------------------------------------------------- Cauchy

fn cauchy(params: MLParams, z: Complex64, k: usize) -> Result<Evaluation> {
    let rate = (1.0 / params.beta) * z.norm().max(1.0).powf(1.0 / params.beta - 1.0);
    let base = (z.norm() / 4.0).max(0.5);
    let mut radii = vec![base, base / 2.0, base / 4.0];
    radii.push(((k as f64 + 1.0) / rate).max(0.05));
    let mut best: Option<Evaluation> = None;
    for &rho in &radii {
        let Ok((v, diff, fmax)) = cauchy_at(params, z, k, rho) else {
            continue;
        };
        let round = 64.0 * f64::EPSILON * fmax / rho.powi(k as i32);
        let est = diff + round;
        if best.as_ref().is_none_or(|b| est < b.error_estimate) {
            best = Some(Evaluation {
                value: v,
                error_estimate: est,
                regime: Regime::Cauchy,
            });
        }
    }
    match best {
        Some(ev) => Ok(ev),
        None => Err(Error::AccuracyLoss {
            context: format!("derivative of order {k} at z={z}"),
            estimate: f64::INFINITY,
        }),
    }
}

/// Scaled derivative from `N` and `N/2` equispaced samples on a circle.
fn cauchy_at(params: MLParams, z: Complex64, k: usize, rho: f64) -> Result<(Complex64, f64, f64)> {
    const N: usize = 64;
    let mut samples = Vec::with_capacity(N);
    for j in 0..N {
        let w = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / N as f64);
        let v = ml_eval(params, z + rho * w)?.value;
        samples.push((w, v));
    }
    let combine = |step: usize| {
        let mut acc = Kahan::default();
        let mut cnt = 0;
        for (w, v) in samples.iter().step_by(step) {
            acc.add(v * w.powi(-(k as i32)));
            cnt += 1;
        }
        acc.sum / (cnt as f64 * rho.powi(k as i32))
    };
    let full = combine(1);
    let half = combine(2);
    let fmax = samples.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max);
    Ok((full, (full - half).norm(), fmax))
}

// ---------------------------------------------------------------- kernels

/// Precomputed Taylor coefficients of `x ↦ E^{(k)}_{β,ν}(x)/k!`, valid for
/// `|x| ≤ radius`. Evaluation by Horner's rule also returns the sum of
/// absolute term values, so callers can detect cancellation and fall back to
/// [`ml_deriv_scaled`].
#[derive(Debug, Clone)]
pub struct ScaledDerivSeries {
    params: MLParams,
    k: usize,
    radius: f64,
    coeffs: Vec<f64>,
}

impl ScaledDerivSeries {
    pub fn new(params: MLParams, k: usize, radius: f64) -> Self {
        let radius = radius.max(1e-300);
        let lr = radius.ln();
        let mut coeffs = Vec::new();
        let mut peak = f64::NEG_INFINITY;
        for n in 0..4_000usize {
            let lc = log_coeff(params.beta, params.nu, k, n);
            let lt = lc + n as f64 * lr;
            peak = peak.max(lt);
            coeffs.push(series_coeff(params.beta, params.nu, k, n));
            if n > 2 && lt < peak - 42.0 {
                break;
            }
        }
        Self {
            params,
            k,
            radius,
            coeffs,
        }
    }

    pub fn params(&self) -> MLParams {
        self.params
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Whether a Taylor value with absolute term sum `abs` is accurate enough.
    pub fn accepts(value: Complex64, abs: f64) -> bool {
        64.0 * f64::EPSILON * abs <= 1e-3 * TARGET * value.norm().max(1.0)
    }

    /// `(value, Σ|terms|)`; `x` must satisfy `|x| ≤ radius`.
    pub fn eval(&self, x: Complex64) -> (Complex64, f64) {
        let ax = x.norm();
        let mut v = Complex64::new(0.0, 0.0);
        let mut a = 0.0;
        for &c in self.coeffs.iter().rev() {
            v = v * x + c;
            a = a * ax + c.abs();
        }
        (v, a)
    }

    /// Value with automatic fallback to the full evaluator when the Taylor
    /// sum loses more than the accuracy budget to cancellation.
    pub fn eval_checked(&self, x: Complex64) -> Result<Complex64> {
        if x.norm() <= self.radius {
            let (v, a) = self.eval(x);
            if Self::accepts(v, a) {
                return Ok(v);
            }
        }
        ml_deriv_scaled(self.params, x, self.k)
    }
}

/// `(t^{a−1}E_{β₁,a}(λ₁t^{β₁})) ∗ (t^{b−1}E_{β₂,b}(λ₂t^{β₂}))` at `t`, summed
/// termwise with the Beta integral:
/// `Σ_{n,m} λ₁ⁿλ₂ᵐ t^{β₁n+β₂m+a+b−1} / Γ(β₁n+β₂m+a+b)`.
///
/// Intended for moderate `|λ_j| t^{β_j}` (no cancellation control).
pub fn ml_convolution(
    first: MLParams,
    lambda1: Complex64,
    second: MLParams,
    lambda2: Complex64,
    t: f64,
) -> Result<Complex64> {
    if !(t >= 0.0 && t.is_finite()) || !(lambda1.norm().is_finite() && lambda2.norm().is_finite()) {
        return Err(Error::InvalidArgument(format!("ml_convolution at t = {t}")));
    }
    let (b1, b2) = (first.beta, second.beta);
    let shift = first.nu + second.nu - 1.0;
    if t == 0.0 {
        return if shift > 0.0 {
            Ok(Complex64::new(0.0, 0.0))
        } else if shift == 0.0 {
            Ok(Complex64::new(1.0, 0.0))
        } else {
            Err(Error::Overflow("convolution is singular at t = 0".into()))
        };
    }
    // the peak term grows like exp(|λ₁t^{β₁}|^{1/β₁} + |λ₂t^{β₂}|^{1/β₂})
    let growth = (lambda1.norm() * t.powf(b1)).powf(1.0 / b1) + (lambda2.norm() * t.powf(b2)).powf(1.0 / b2);
    if growth > 12.0 {
        return convolution_quadrature(first, lambda1, second, lambda2, t);
    }
    let lt = t.ln();
    let zero = Complex64::new(0.0, 0.0);
    let mut acc = zero;
    let mut global: f64 = 0.0;
    let mut prev_row = f64::INFINITY;
    let mut ln1 = Complex64::new(1.0, 0.0);
    for n in 0..20_000usize {
        let mut row_max: f64 = 0.0;
        let mut prev = f64::INFINITY;
        let mut ln2 = Complex64::new(1.0, 0.0);
        for m in 0..20_000usize {
            let e = b1 * n as f64 + b2 * m as f64 + shift;
            let term = ln1 * ln2 * ((e * lt).exp() * rgamma(e + 1.0));
            let mag = term.norm();
            acc += term;
            row_max = row_max.max(mag);
            global = global.max(mag);
            if lambda2 == zero || (m > 0 && mag <= prev && mag < 1e-18 * global.max(acc.norm())) {
                break;
            }
            prev = mag;
            ln2 *= lambda2;
        }
        if lambda1 == zero || (n > 0 && row_max <= prev_row && row_max < 1e-18 * global.max(acc.norm())) {
            break;
        }
        prev_row = row_max;
        ln1 *= lambda1;
    }
    // the double series cancels badly for large arguments
    if acc.re.is_finite() && acc.im.is_finite() && global * f64::EPSILON <= 1e-3 * TARGET * acc.norm().max(1e-300) {
        return Ok(acc);
    }
    convolution_quadrature(first, lambda1, second, lambda2, t)
}

/// Tanh-sinh rule for the convolution integral; both endpoint singularities
/// are of power type, which the double-exponential map absorbs.
fn convolution_quadrature(
    first: MLParams,
    lambda1: Complex64,
    second: MLParams,
    lambda2: Complex64,
    t: f64,
) -> Result<Complex64> {
    use std::f64::consts::FRAC_PI_2;
    let integrand = |x: f64| -> Result<Complex64> {
        let q = FRAC_PI_2 * x.sinh();
        // u = τ/t and 1 − u, both without cancellation
        let u = 1.0 / (1.0 + (-2.0 * q).exp());
        let v = 1.0 / (1.0 + (2.0 * q).exp());
        let (a, b) = (t * u, t * v);
        if a == 0.0 || b == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let f1 = a.powf(first.nu - 1.0) * ml(first, lambda1 * a.powf(first.beta))?;
        let f2 = b.powf(second.nu - 1.0) * ml(second, lambda2 * b.powf(second.beta))?;
        let w = 2.0 * t * u * v * FRAC_PI_2 * x.cosh();
        Ok(f1 * f2 * w)
    };
    let range = 6.0;
    let mut h = 0.125;
    let mut sum = integrand(0.0)?;
    let mut k = 1;
    while k as f64 * h <= range {
        let x = k as f64 * h;
        sum += integrand(x)? + integrand(-x)?;
        k += 1;
    }
    let mut prev = sum * h;
    for _ in 0..6 {
        // halve the step: only the odd multiples are new
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= range {
            let x = k as f64 * h;
            sum += integrand(x)? + integrand(-x)?;
            k += 2;
        }
        let est = sum * h;
        if (est - prev).norm() <= 1e-13 * est.norm().max(1e-300) {
            return Ok(est);
        }
        prev = est;
    }
    if prev.re.is_finite() && prev.im.is_finite() {
        Ok(prev)
    } else {
        Err(Error::Overflow("ml_convolution".into()))
    }
}
