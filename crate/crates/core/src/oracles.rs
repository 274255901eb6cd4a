//! Reference solvers that share no code with the Mittag-Leffler machinery:
//! Talbot inversion of the exact resolvent symbol, a fractional Adams
//! predictor–corrector, and a Padé matrix exponential.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::solver::{DerivativeKind, Method, MultiOrder, OperatorSamples, SystemSpec, TimeGrid, Trajectory};
use crate::special::gamma;

// Weideman's optimised Talbot contour
//   s(θ) = σ + (M/t)(a θ cot(bθ) − c + i d θ),  −π < θ < π
const TAL_A: f64 = 0.5017;
const TAL_B: f64 = 0.6407;
const TAL_C: f64 = 0.6122;
const TAL_D: f64 = 0.2645;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourParams {
    node_count: usize,
    /// Contour size is `scale / t` (the t-dependence rule).
    scale: f64,
    /// Horizontal shift; by default a bound on the real parts of the
    /// singularities of the symbol.
    shift: Option<f64>,
}

impl Default for ContourParams {
    fn default() -> Self {
        Self {
            node_count: 48,
            scale: 32.0,
            shift: None,
        }
    }
}

impl ContourParams {
    pub fn new(node_count: usize, scale: f64, shift: Option<f64>) -> Result<Self> {
        if node_count < 8 || node_count % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "node count {node_count} must be even and at least 8"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "contour scale {scale} must be positive"
            )));
        }
        Ok(Self {
            node_count,
            scale,
            shift,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn shift(&self) -> Option<f64> {
        self.shift
    }

    pub fn with_node_count(self, node_count: usize) -> Result<Self> {
        Self::new(node_count, self.scale, self.shift)
    }

    /// Nodes `s_k` and weights `w_k` with `f(t) ≈ Σ w_k e^{s_k t} F(s_k)`
    /// for singularities inside `bound`.
    fn nodes(&self, t: f64, bound: PoleBound) -> Vec<(Complex64, Complex64)> {
        let sigma = self.shift.unwrap_or(bound.real);
        // the contour must clear a disk of radius ~2·radius left of σ
        let scale = self.scale.max(4.0 * bound.radius * t);
        let n = self.node_count.max(2 * (0.75 * scale).ceil() as usize);
        let mu = scale / t;
        let h = 2.0 * std::f64::consts::PI / n as f64;
        (0..n)
            .map(|k| {
                let th = -std::f64::consts::PI + (k as f64 + 0.5) * h;
                let (sn, cs) = (TAL_B * th).sin_cos();
                let cot = cs / sn;
                let s = Complex64::new(sigma + mu * (TAL_A * th * cot - TAL_C), mu * TAL_D * th);
                let ds = Complex64::new(mu * (TAL_A * cot - TAL_A * TAL_B * th / (sn * sn)), mu * TAL_D);
                // (1/2πi)·h·s'(θ)
                let w = ds * h / Complex64::new(0.0, 2.0 * std::f64::consts::PI);
                (s, w)
            })
            .collect()
    }
}

/// Inverse Laplace transform of a scalar function analytic outside the
/// disk `|s| ≤ radius` (and off the negative real axis).
pub fn talbot_scalar(
    f: impl Fn(Complex64) -> Complex64,
    t: f64,
    params: &ContourParams,
    radius: f64,
) -> Result<Complex64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("inversion time {t} must be positive")));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (s, w) in params.nodes(t, PoleBound { radius, real: radius }) {
        let v = f(s);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NodeCollision(format!("transform not finite at s = {s}")));
        }
        acc += w * (s * t).exp() * v;
    }
    Ok(acc)
}

/// Where the poles of a symbol may lie: `|s| ≤ radius`, `Re s ≤ real`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PoleBound {
    radius: f64,
    real: f64,
}

/// Poles of `(Is^B − F)^{-1}` on the principal sheet. If `v` is a null
/// vector and `|v_j|` is its largest entry, `s^{β_j}` lies in the Gershgorin
/// disk of row `j` and in the sector `|arg w| < β_jπ`; rows whose disk
/// misses the sector contribute nothing.
fn pole_bound(orders: &[f64], f: &CMatrix) -> PoleBound {
    use std::f64::consts::PI;
    let mut bound = PoleBound { radius: 0.0, real: 0.0 };
    for (j, &b) in orders.iter().enumerate() {
        let c = f[(j, j)];
        let r: f64 = (0..orders.len()).filter(|&l| l != j).map(|l| f[(j, l)].norm()).sum();
        let edge = b * PI;
        let inside = |w: Complex64| w.norm() == 0.0 || w.arg().abs() < edge;
        // distance from c to the boundary rays arg w = ±βπ
        let ray_hits = [1.0, -1.0].iter().any(|&sgn: &f64| {
            let u = Complex64::from_polar(1.0, sgn * edge);
            let p = (c.re * u.re + c.im * u.im).max(0.0);
            (c - u * p).norm() <= r
        });
        let circle: Vec<Complex64> = (0..720)
            .map(|k| c + Complex64::from_polar(r, 2.0 * PI * k as f64 / 720.0))
            .collect();
        let hits: Vec<Complex64> = std::iter::once(c).chain(circle).filter(|&w| inside(w)).collect();
        if hits.is_empty() && !ray_hits {
            continue;
        }
        let rho = (c.norm() + r).powf(1.0 / b);
        bound.radius = bound.radius.max(rho);
        // Re(w^{1/β}) is harmonic, so its maximum is on the boundary; the
        // rays map to the negative real axis
        let top = hits
            .iter()
            .map(|w| w.norm().powf(1.0 / b) * (w.arg() / b).cos())
            .fold(0.0, f64::max);
        // slack for the sampling of the circle
        bound.real = bound.real.max(top + 0.02 * rho + 1e-3);
    }
    bound
}

/// Resolvent symbol `(Is^B − F)^{-1} Is^{B−1}` (Caputo) or `(Is^B − F)^{-1}` (RL)
/// on the principal branch.
pub fn resolvent_symbol(orders: &[f64], f: &CMatrix, kind: DerivativeKind, s: Complex64) -> Result<CMatrix> {
    let m = orders.len();
    let ln_s = s.ln();
    let mut a = -f.clone();
    for j in 0..m {
        a[(j, j)] += (ln_s * orders[j]).exp();
    }
    let rhs = match kind {
        DerivativeKind::Caputo => CMatrix::from_diagonal(&DVector::from_iterator(
            m,
            orders.iter().map(|&b| (ln_s * (b - 1.0)).exp()),
        )),
        DerivativeKind::RiemannLiouville => CMatrix::identity(m, m),
    };
    let x = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NodeCollision(format!("resolvent singular at s = {s}")))?;
    let scale = linalg::max_abs(&rhs).max(1.0);
    if x.iter()
        .any(|z| !(z.re.is_finite() && z.im.is_finite()) || z.norm() > 1e12 * scale)
    {
        return Err(Error::NodeCollision(format!("resolvent nearly singular at s = {s}")));
    }
    Ok(x)
}

fn talbot_once(orders: &[f64], f: &CMatrix, kind: DerivativeKind, t: f64, params: &ContourParams) -> Result<CMatrix> {
    let m = orders.len();
    let bound = pole_bound(orders, f);
    let mut acc = CMatrix::zeros(m, m);
    for (s, w) in params.nodes(t, bound) {
        let r = resolvent_symbol(orders, f, kind, s)?;
        acc += r * (w * (s * t).exp());
    }
    Ok(acc)
}

/// `S(t) = L^{-1}[(Is^B − F)^{-1} Is^{B−1}]` (Caputo) or `L^{-1}[(Is^B − F)^{-1}]`
/// (RL) by Talbot quadrature. A node collision is retried once on a
/// perturbed contour.
pub fn talbot_invert(
    orders: &MultiOrder,
    f: &CMatrix,
    kind: DerivativeKind,
    t: f64,
    params: &ContourParams,
) -> Result<CMatrix> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("inversion time {t} must be positive")));
    }
    if f.nrows() != orders.len() || f.ncols() != orders.len() {
        return Err(Error::Dimension("matrix does not match the orders".into()));
    }
    match talbot_once(orders.as_slice(), f, kind, t, params) {
        Err(Error::NodeCollision(_)) => {
            let perturbed = ContourParams {
                scale: params.scale * 1.013,
                shift: Some(params.shift.unwrap_or(pole_bound(orders.as_slice(), f).real) + 0.01),
                ..*params
            };
            talbot_once(orders.as_slice(), f, kind, t, &perturbed)
        }
        other => other,
    }
}

/// Talbot samples of `S` on `times` (`t = 0` maps to the identity in Caputo
/// mode and is skipped in RL mode).
pub fn talbot_samples(
    orders: &MultiOrder,
    f: &CMatrix,
    kind: DerivativeKind,
    times: &[f64],
    params: &ContourParams,
) -> Result<OperatorSamples> {
    let m = orders.len();
    let times: Vec<f64> = times
        .iter()
        .copied()
        .filter(|&t| kind == DerivativeKind::Caputo || t > 0.0)
        .collect();
    let matrices = times
        .par_iter()
        .map(|&t| {
            if t == 0.0 {
                Ok(CMatrix::identity(m, m))
            } else {
                talbot_invert(orders, f, kind, t, params)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OperatorSamples {
        times,
        matrices,
        truncation: None,
        error_estimate: 1e-8,
        notes: vec![],
    })
}

/// Fractional Adams–Bashforth–Moulton predictor–corrector for Caputo
/// systems, with per-component memory weights.
pub fn adams_pc(spec: &SystemSpec, grid: &TimeGrid) -> Result<Trajectory> {
    if spec.kind != DerivativeKind::Caputo {
        return Err(Error::InvalidArgument(
            "the Adams predictor–corrector handles Caputo systems only".into(),
        ));
    }
    let m = spec.dim();
    let n_steps = grid.steps();
    let h = grid.step();
    let f = &spec.matrix;
    let y0 = DVector::from_column_slice(&spec.initial);
    let forcing = |t: f64| -> DVector<Complex64> {
        match &spec.forcing {
            Some(hs) => DVector::from_iterator(m, hs.iter().map(|hj| hj(t))),
            None => DVector::zeros(m),
        }
    };
    let rhs = |t: f64, y: &DVector<Complex64>| -> DVector<Complex64> { f * y + forcing(t) };

    struct Weights {
        pred: Vec<f64>,
        corr: Vec<f64>,
        cp: f64,
        cc: f64,
        beta: f64,
    }
    let weights: Vec<Weights> = spec
        .orders
        .as_slice()
        .iter()
        .map(|&b| Weights {
            pred: (0..=n_steps)
                .map(|k| ((k + 1) as f64).powf(b) - (k as f64).powf(b))
                .collect(),
            corr: (0..=n_steps)
                .map(|k| {
                    ((k + 2) as f64).powf(b + 1.0) + (k as f64).powf(b + 1.0) - 2.0 * ((k + 1) as f64).powf(b + 1.0)
                })
                .collect(),
            cp: h.powf(b) / gamma(b + 1.0),
            cc: h.powf(b) / gamma(b + 2.0),
            beta: b,
        })
        .collect();

    let mut ys: Vec<DVector<Complex64>> = Vec::with_capacity(n_steps + 1);
    let mut fs: Vec<DVector<Complex64>> = Vec::with_capacity(n_steps + 1);
    ys.push(y0.clone());
    fs.push(rhs(0.0, &y0));
    for n in 0..n_steps {
        let t1 = grid.t(n + 1);
        let mut pred = y0.clone();
        let mut hist = DVector::<Complex64>::zeros(m);
        for (j, w) in weights.iter().enumerate() {
            let mut p = Complex64::new(0.0, 0.0);
            let mut c = Complex64::new(0.0, 0.0);
            for i in 0..=n {
                p += fs[i][j] * w.pred[n - i];
                if i > 0 {
                    c += fs[i][j] * w.corr[n - i];
                }
            }
            let nf = n as f64;
            let a0 = nf.powf(w.beta + 1.0) - (nf - w.beta) * (nf + 1.0).powf(w.beta);
            c += fs[0][j] * a0;
            pred[j] += p * w.cp;
            hist[j] = c;
        }
        let fp = rhs(t1, &pred);
        let mut y = y0.clone();
        for (j, w) in weights.iter().enumerate() {
            y[j] += (fp[j] + hist[j]) * w.cc;
        }
        if y.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::BlowUp { step: n + 1 });
        }
        fs.push(rhs(t1, &y));
        ys.push(y);
    }
    Ok(Trajectory {
        times: grid.points(),
        states: ys.into_iter().map(|y| y.iter().copied().collect()).collect(),
        method: Method::Adams,
        truncation: None,
        error_estimate: h.powf(1.0 + spec.orders.min()),
        notes: vec![],
    })
}

/// Adams on a grid refined by `factor`, sampled back onto `grid`.
pub fn adams_pc_refined(spec: &SystemSpec, grid: &TimeGrid, factor: usize) -> Result<Trajectory> {
    let factor = factor.max(1);
    let fine = adams_pc(spec, &grid.refined(factor))?;
    Ok(Trajectory {
        times: grid.points(),
        states: fine.states.into_iter().step_by(factor).collect(),
        notes: vec![format!("integrated on a grid refined {factor}×")],
        ..fine
    })
}

/// Matrix exponential by scaling and squaring with a [6/6] Padé approximant.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let x = a / Complex64::new(2f64.powi(squarings), 0.0);
    // c_k = (12−k)! 6! / (12! k! (6−k)!)
    let mut coeffs = [0.0; 7];
    coeffs[0] = 1.0;
    for k in 1..=6 {
        coeffs[k] = coeffs[k - 1] * (6 - k + 1) as f64 / (k as f64 * (12 - k + 1) as f64);
    }
    let id = CMatrix::identity(n, n);
    let mut num = id.clone() * Complex64::new(coeffs[0], 0.0);
    let mut den = num.clone();
    let mut pow = id;
    for (k, &ck) in coeffs.iter().enumerate().skip(1) {
        pow = &pow * &x;
        let term = &pow * Complex64::new(ck, 0.0);
        num += &term;
        if k % 2 == 0 {
            den += &term;
        } else {
            den -= &term;
        }
    }
    let mut r = den
        .lu()
        .solve(&num)
        .expect("Padé denominator is nonsingular for ‖X‖ ≤ 1/2");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}
