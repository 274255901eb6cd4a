//! Algebra of "fractional-exponent polynomials" `Σ c_γ s^γ` and the term
//! lists of the general multi-order series solution.
//!
//! With `β₁ = min β`, `β_* = β₂+…+β_m` and `Ψ(s) = det(Is^B − F)` written as
//! `Ψ = s^{β_*}(s^{β₁} − λ) − R(s)`, where `−λ` is the coefficient of
//! `s^{β_*}` and `R` collects every lower term,
//!
//! ```text
//! 1/Ψ = Σ_k R^k s^{−(k+1)β_*} / (s^{β₁} − λ)^{k+1}.
//! ```
//!
//! Each monomial `c s^γ` of `p_{jl}·R^k` then inverts to
//! `c t^{kβ₁+ν'−1} E^{(k)}_{β₁,ν'}(λt^{β₁})/k!` with `ν' = (k+1)β_* + β₁ − γ`.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::ml_scalar::{ml_deriv_scaled, MLParams};
use crate::solver::{DerivativeKind, MultiOrder};
use crate::special::ln_gamma;

/// Exponents closer than this are merged.
pub const EXPONENT_TOL: f64 = 1e-12;
/// Coefficients below this magnitude are dropped during expansion.
pub const COEFF_FLOOR: f64 = 1e-300;
/// Hard cap on stored monomials/terms.
pub const TERM_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrExpPoly {
    // ascending exponents, unique within EXPONENT_TOL, nonzero coefficients
    terms: Vec<(f64, Complex64)>,
}

impl FrExpPoly {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::monomial(0.0, c)
    }

    pub fn one() -> Self {
        Self::constant(Complex64::new(1.0, 0.0))
    }

    pub fn monomial(exponent: f64, c: Complex64) -> Self {
        Self::from_terms(vec![(exponent, c)])
    }

    pub fn from_terms(mut terms: Vec<(f64, Complex64)>) -> Self {
        terms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, Complex64)> = Vec::with_capacity(terms.len());
        let mut anchor = f64::NEG_INFINITY;
        for (e, c) in terms {
            match out.last_mut() {
                Some(last) if e - anchor <= EXPONENT_TOL => last.1 += c,
                _ => {
                    anchor = e;
                    out.push((e, c));
                }
            }
        }
        out.retain(|(_, c)| *c != Complex64::new(0.0, 0.0));
        Self { terms: out }
    }

    pub fn terms(&self) -> &[(f64, Complex64)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of `s^e` (zero when absent).
    pub fn coeff(&self, e: f64) -> Complex64 {
        self.terms
            .iter()
            .find(|(x, _)| (x - e).abs() <= EXPONENT_TOL)
            .map_or(Complex64::new(0.0, 0.0), |t| t.1)
    }

    pub fn max_exponent(&self) -> Option<f64> {
        self.terms.last().map(|t| t.0)
    }

    pub fn min_exponent(&self) -> Option<f64> {
        self.terms.first().map(|t| t.0)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_terms(self.terms.iter().chain(&other.terms).copied().collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, a: Complex64) -> Self {
        Self::from_terms(self.terms.iter().map(|&(e, c)| (e, c * a)).collect())
    }

    /// Multiplies by `s^e`.
    pub fn shift(&self, e: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|&(x, c)| (x + e, c)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut v = Vec::with_capacity(self.len() * other.len());
        for &(e1, c1) in &self.terms {
            for &(e2, c2) in &other.terms {
                v.push((e1 + e2, c1 * c2));
            }
        }
        Self::from_terms(v)
    }

    pub fn pow(&self, k: usize) -> Self {
        (0..k).fold(Self::one(), |acc, _| acc.mul(self))
    }

    /// Drops monomials for which `keep(exponent, coefficient)` is false.
    pub fn retain(&mut self, mut keep: impl FnMut(f64, Complex64) -> bool) {
        self.terms.retain(|&(e, c)| keep(e, c));
    }

    /// Value at `s` on the principal branch `s^γ = exp(γ log s)`.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        let ln_s = s.ln();
        self.terms.iter().map(|&(e, c)| c * (ln_s * e).exp()).sum()
    }
}

/// Determinant of a matrix of polynomials by cofactor expansion along the
/// columns, memoised over the set of used rows.
fn det_poly(mat: &[Vec<FrExpPoly>]) -> FrExpPoly {
    let n = mat.len();
    if n == 0 {
        return FrExpPoly::one();
    }
    fn rec(mat: &[Vec<FrExpPoly>], col: usize, used: u64, memo: &mut HashMap<u64, FrExpPoly>) -> FrExpPoly {
        let n = mat.len();
        if col == n {
            return FrExpPoly::one();
        }
        if let Some(p) = memo.get(&used) {
            return p.clone();
        }
        let mut acc = FrExpPoly::zero();
        let mut sign = 1.0;
        for row in 0..n {
            if used & (1 << row) != 0 {
                continue;
            }
            if !mat[row][col].is_zero() {
                let minor = rec(mat, col + 1, used | (1 << row), memo);
                acc = acc.add(&mat[row][col].mul(&minor).scale(Complex64::new(sign, 0.0)));
            }
            sign = -sign;
        }
        memo.insert(used, acc.clone());
        acc
    }
    rec(mat, 0, 0, &mut HashMap::new())
}

fn check_dims(orders: &MultiOrder, f: &CMatrix) -> Result<usize> {
    let m = orders.len();
    if f.nrows() != m || f.ncols() != m {
        return Err(Error::Dimension(format!(
            "matrix is {}×{} but there are {m} orders",
            f.nrows(),
            f.ncols()
        )));
    }
    if m > 20 {
        return Err(Error::InvalidArgument(
            "symbol expansion supports at most 20 equations".into(),
        ));
    }
    Ok(m)
}

fn symbol_matrix(orders: &[f64], f: &CMatrix) -> Vec<Vec<FrExpPoly>> {
    let m = orders.len();
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut p = FrExpPoly::constant(-f[(i, j)]);
                    if i == j {
                        p = p.add(&FrExpPoly::monomial(orders[i], Complex64::new(1.0, 0.0)));
                    }
                    p
                })
                .collect()
        })
        .collect()
}

/// `Ψ(s) = det(Is^B − F)`.
pub fn char_function(orders: &MultiOrder, f: &CMatrix) -> Result<FrExpPoly> {
    check_dims(orders, f)?;
    Ok(det_poly(&symbol_matrix(orders.as_slice(), f)))
}

fn cofactor_numerators_raw(orders: &[f64], f: &CMatrix, kind: DerivativeKind) -> Vec<Vec<FrExpPoly>> {
    let m = orders.len();
    let mat = symbol_matrix(orders, f);
    let mut out = vec![vec![FrExpPoly::zero(); m]; m];
    for l in 0..m {
        for j in 0..m {
            // adj_{jl} = (−1)^{j+l} det(minor without row l, column j)
            let minor: Vec<Vec<FrExpPoly>> = (0..m)
                .filter(|&r| r != l)
                .map(|r| (0..m).filter(|&c| c != j).map(|c| mat[r][c].clone()).collect())
                .collect();
            let sign = if (j + l) % 2 == 0 { 1.0 } else { -1.0 };
            let mut p = det_poly(&minor).scale(Complex64::new(sign, 0.0));
            if kind == DerivativeKind::Caputo {
                p = p.shift(orders[l] - 1.0);
            }
            out[j][l] = p;
        }
    }
    out
}

/// Cramer numerators `p_{jl}` with `L[u_j] = Σ_l p_{jl} φ_l / Ψ`.
pub fn cofactor_numerators(orders: &MultiOrder, f: &CMatrix, kind: DerivativeKind) -> Result<Vec<Vec<FrExpPoly>>> {
    check_dims(orders, f)?;
    Ok(cofactor_numerators_raw(orders.as_slice(), f, kind))
}

/// One inverse-transformed series term
/// `c · t^{kβ+ν'−1} E^{(k)}_{β,ν'}(λt^β)/k!` with `ν' = second + integral_order`,
/// i.e. `J^{integral_order}` applied to the basic kernel of the mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelTerm {
    pub coeff: Complex64,
    pub integral_order: f64,
    pub deriv_order: usize,
    pub base: f64,
    /// Second Mittag-Leffler parameter of the basic kernel: 1 (Caputo) or β (RL).
    pub second: f64,
}

impl KernelTerm {
    pub fn ml_nu(&self) -> f64 {
        self.second + self.integral_order
    }

    pub fn time_exponent(&self) -> f64 {
        self.deriv_order as f64 * self.base + self.ml_nu() - 1.0
    }

    /// Laplace transform `c s^{β−ν'}/(s^β − λ)^{k+1}`.
    pub fn laplace(&self, s: Complex64, lambda: Complex64) -> Complex64 {
        let ln_s = s.ln();
        let sb = (ln_s * self.base).exp();
        self.coeff * (ln_s * (self.base - self.ml_nu())).exp() / (sb - lambda).powi(self.deriv_order as i32 + 1)
    }

    pub fn eval(&self, t: f64, lambda: Complex64) -> Result<Complex64> {
        let params = MLParams::new(self.base, self.ml_nu())?;
        let e = self.time_exponent();
        let tp = if e == 0.0 { 1.0 } else { t.powf(e) };
        if tp == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let z = lambda * t.powf(self.base);
        Ok(self.coeff * tp * ml_deriv_scaled(params, z, self.deriv_order)?)
    }
}

/// `T^{kβ+ν'−1} Σ_n C(n+k,k) x^n / Γ(β(n+k)+ν')`: a bound on
/// `|t^{kβ+ν'−1} E^{(k)}_{β,ν'}(λt^β)/k!|` on `(0, T]` for `x = |λ|T^β`.
fn kernel_bound(beta: f64, nu: f64, k: usize, x: f64, t_max: f64) -> f64 {
    let e = k as f64 * beta + nu - 1.0;
    if e < -EXPONENT_TOL {
        return f64::INFINITY;
    }
    let lnx = if x > 0.0 { x.ln() } else { f64::NEG_INFINITY };
    let lk = ln_gamma(k as f64 + 1.0);
    let mut sum = 0.0;
    let mut prev = f64::NEG_INFINITY;
    for n in 0..4000usize {
        let lt = ln_gamma((n + k) as f64 + 1.0) - ln_gamma(n as f64 + 1.0) - lk
            + if n == 0 { 0.0 } else { n as f64 * lnx }
            - ln_gamma(beta * (n + k) as f64 + nu);
        let term = lt.exp();
        sum += term;
        if n > 0 && lt < prev && term <= 1e-17 * sum {
            break;
        }
        if x == 0.0 {
            break;
        }
        prev = lt;
    }
    let tp = if e.abs() <= EXPONENT_TOL { 1.0 } else { t_max.powf(e) };
    sum * tp
}

/// Suffix-maximum envelope of the kernel bound in `ν'` for one `k`.
struct BoundTable {
    step: f64,
    suffix_max: Vec<f64>,
}

impl BoundTable {
    fn new(beta: f64, k: usize, x: f64, t_max: f64) -> Self {
        let step = 0.05;
        let mut vals = Vec::new();
        let mut nu: f64 = 0.0;
        loop {
            let b = kernel_bound(beta, nu.max(1e-9), k, x, t_max);
            vals.push(if b.is_finite() { b } else { f64::INFINITY });
            nu += step;
            let past_peak = nu > t_max + 4.0 && nu > 4.0;
            if (past_peak && b < 1e-300) || nu > 400.0 {
                break;
            }
        }
        let mut suffix_max = vals.clone();
        for i in (0..suffix_max.len().saturating_sub(1)).rev() {
            suffix_max[i] = suffix_max[i].max(suffix_max[i + 1]);
        }
        Self { step, suffix_max }
    }

    /// Upper bound for every `ν'' ≥ nu` (with a safety factor).
    fn sup_from(&self, nu: f64) -> f64 {
        let i = (nu.max(0.0) / self.step).floor() as usize;
        if i >= self.suffix_max.len() {
            0.0
        } else {
            2.0 * self.suffix_max[i]
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Pruning {
    t_max: f64,
    abs_tol: f64,
}

/// Incremental generator of the series terms, one `k` at a time.
#[derive(Debug, Clone)]
pub struct SeriesExpansion {
    m: usize,
    kind: DerivativeKind,
    /// `perm[new] = old`; the smallest order is moved to the front.
    perm: Vec<usize>,
    base: f64,
    beta_star: f64,
    lambda: Complex64,
    numerators: Vec<Vec<FrExpPoly>>,
    remainder: FrExpPoly,
    power: FrExpPoly,
    k: usize,
    pruning: Option<Pruning>,
    stored: usize,
}

impl SeriesExpansion {
    pub fn new(orders: &MultiOrder, f: &CMatrix, kind: DerivativeKind) -> Result<Self> {
        let m = check_dims(orders, f)?;
        let b = orders.as_slice();
        let imin = (0..m).fold(0, |best, i| if b[i] < b[best] { i } else { best });
        let mut perm: Vec<usize> = (0..m).collect();
        perm.swap(0, imin);
        let pb: Vec<f64> = perm.iter().map(|&i| b[i]).collect();
        let pf = CMatrix::from_fn(m, m, |i, j| f[(perm[i], perm[j])]);
        let base = pb[0];
        let beta_star: f64 = pb[1..].iter().sum();
        let psi = det_poly(&symbol_matrix(&pb, &pf));
        let lambda = -psi.coeff(beta_star);
        // Ψ = s^{β*}(s^{β₁} − λ) − R
        let lead = FrExpPoly::from_terms(vec![(base + beta_star, Complex64::new(1.0, 0.0)), (beta_star, -lambda)]);
        let remainder = lead.sub(&psi);
        if let Some(e) = remainder.max_exponent() {
            if e > beta_star + EXPONENT_TOL {
                return Err(Error::Consistency(format!(
                    "remainder exponent {e} exceeds β_* = {beta_star}"
                )));
            }
        }
        let numerators = cofactor_numerators_raw(&pb, &pf, kind);
        Ok(Self {
            m,
            kind,
            perm,
            base,
            beta_star,
            lambda,
            numerators,
            remainder,
            power: FrExpPoly::one(),
            k: 0,
            pruning: None,
            stored: 0,
        })
    }

    /// Drops monomials whose contribution on `(0, t_max]` is provably below
    /// `abs_tol` (relative to unit initial data).
    pub fn with_pruning(mut self, t_max: f64, abs_tol: f64) -> Self {
        self.pruning = Some(Pruning { t_max, abs_tol });
        self
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn beta_star(&self) -> f64 {
        self.beta_star
    }

    pub fn kind(&self) -> DerivativeKind {
        self.kind
    }

    pub fn remainder(&self) -> &FrExpPoly {
        &self.remainder
    }

    /// The next series index to be produced.
    pub fn next_index(&self) -> usize {
        self.k
    }

    fn second(&self) -> f64 {
        match self.kind {
            DerivativeKind::Caputo => 1.0,
            DerivativeKind::RiemannLiouville => self.base,
        }
    }

    fn inverse_perm(&self) -> Vec<usize> {
        let mut inv = vec![0; self.m];
        for (new, &old) in self.perm.iter().enumerate() {
            inv[old] = new;
        }
        inv
    }

    /// Terms of series index `k` for every entry `(j, l)` (original
    /// indexing), then advances to `k+1`.
    pub fn next_order(&mut self) -> Result<Vec<Vec<Vec<KernelTerm>>>> {
        let k = self.k;
        let kf = k as f64;
        let nu_shift = (kf + 1.0) * self.beta_star + self.base;
        let second = self.second();
        // the bounds grow like exp(x^{1/β}); past f64 range they prune nothing
        let table = self.pruning.and_then(|p| {
            let x = self.lambda.norm() * p.t_max.powf(self.base);
            (x.powf(1.0 / self.base) < 600.0).then(|| BoundTable::new(self.base, k, x, p.t_max))
        });
        let p_abs_max = self
            .numerators
            .iter()
            .flatten()
            .flat_map(|p| p.terms().iter().map(|t| t.1.norm()))
            .fold(0.0, f64::max);
        let p_exp_max = self
            .numerators
            .iter()
            .flatten()
            .filter_map(|p| p.max_exponent())
            .fold(f64::NEG_INFINITY, f64::max);

        if let (Some(p), Some(tab)) = (self.pruning, &table) {
            let thr = p.abs_tol * 1e-4;
            self.power.retain(|g, c| {
                let nu_min = nu_shift - g - p_exp_max;
                c.norm() * p_abs_max * tab.sup_from(nu_min) >= thr
            });
        }
        self.power.retain(|_, c| c.norm() >= COEFF_FLOOR);

        let inv = self.inverse_perm();
        let mut out = vec![vec![Vec::new(); self.m]; self.m];
        for (j_old, row) in out.iter_mut().enumerate() {
            for (l_old, slot) in row.iter_mut().enumerate() {
                let p = &self.numerators[inv[j_old]][inv[l_old]];
                let prod = p.mul(&self.power);
                for &(g, c) in prod.terms() {
                    if c.norm() < COEFF_FLOOR {
                        continue;
                    }
                    let mut nu_p = nu_shift - g;
                    let mut nu = nu_p - second;
                    if nu.abs() <= EXPONENT_TOL {
                        nu = 0.0;
                        nu_p = second;
                    }
                    if nu < -EXPONENT_TOL {
                        return Err(Error::Consistency(format!(
                            "negative integral order {nu} in entry ({j_old},{l_old}) at k = {k}"
                        )));
                    }
                    if let (Some(pr), Some(tab)) = (self.pruning, &table) {
                        if c.norm() * tab.sup_from(nu_p) < pr.abs_tol {
                            continue;
                        }
                    }
                    slot.push(KernelTerm {
                        coeff: c,
                        integral_order: nu,
                        deriv_order: k,
                        base: self.base,
                        second,
                    });
                }
                self.stored += slot.len();
            }
        }
        if self.stored + self.power.len() > TERM_CAP {
            return Err(Error::TruncationLimit(TERM_CAP));
        }
        self.power = self.power.mul(&self.remainder);
        self.k += 1;
        Ok(out)
    }

    /// `Σ_{k≤K} R^k s^{−(k+1)β_*}/(s^{β₁} − λ)^{k+1}`, the partial sums of `1/Ψ`,
    /// with `R^k` taken from the expanded polynomials.
    pub fn reciprocal_partial_sum(&self, s: Complex64, k_max: usize) -> Complex64 {
        let ln_s = s.ln();
        let denom = (ln_s * self.beta_star).exp() * ((ln_s * self.base).exp() - self.lambda);
        let mut power = FrExpPoly::one();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut d = denom;
        for _ in 0..=k_max {
            acc += power.eval(s) / d;
            power = power.mul(&self.remainder);
            d *= denom;
        }
        acc
    }
}

/// Complete term list up to series index `K`.
#[derive(Debug, Clone)]
pub struct SeriesTermList {
    pub lambda: Complex64,
    pub base: f64,
    pub kind: DerivativeKind,
    pub truncation: usize,
    entries: Vec<Vec<Vec<KernelTerm>>>,
}

impl SeriesTermList {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entry(&self, j: usize, l: usize) -> &[KernelTerm] {
        &self.entries[j][l]
    }

    pub fn term_count(&self) -> usize {
        self.entries.iter().flatten().map(|v| v.len()).sum()
    }

    /// Laplace transform of entry `(j, l)` of the truncated series.
    pub fn laplace_entry(&self, j: usize, l: usize, s: Complex64) -> Complex64 {
        self.entries[j][l].iter().map(|t| t.laplace(s, self.lambda)).sum()
    }

    /// Time-domain value of entry `(j, l)`.
    pub fn eval_entry(&self, j: usize, l: usize, t: f64) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for term in &self.entries[j][l] {
            acc += term.eval(t, self.lambda)?;
        }
        Ok(acc)
    }
}

pub fn series_terms(orders: &MultiOrder, f: &CMatrix, kind: DerivativeKind, k_max: usize) -> Result<SeriesTermList> {
    let mut exp = SeriesExpansion::new(orders, f, kind)?;
    let m = exp.dim();
    let mut entries = vec![vec![Vec::new(); m]; m];
    for _ in 0..=k_max {
        let order = exp.next_order()?;
        for (j, row) in order.into_iter().enumerate() {
            for (l, terms) in row.into_iter().enumerate() {
                entries[j][l].extend(terms);
            }
        }
    }
    Ok(SeriesTermList {
        lambda: exp.lambda(),
        base: exp.base(),
        kind,
        truncation: k_max,
        entries,
    })
}
