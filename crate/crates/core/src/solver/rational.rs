//! Rational orders `β_j = n_j/p`: the system is rewritten as an
//! `N = Σ n_j` dimensional commensurate system of order `1/p` whose block
//! heads carry the original unknowns.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use num_integer::Integer;
use rayon::prelude::*;

use super::commensurate::{commensurate_samples, jordan_of};
use super::{
    assemble, sample_times, DerivativeKind, Method, OperatorSamples, SolveOptions, SystemSpec, TimeGrid, Trajectory,
};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::ml_scalar::{ml, MLParams};
use crate::oracles::talbot_samples;
use crate::symbol::{char_function, cofactor_numerators, FrExpPoly};

/// Positive rational in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ratio {
    num: u64,
    den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidArgument("zero denominator".into()));
        }
        let g = num.gcd(&den).max(1);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Ratio {
    type Err = Error;
    /// `"q/p"` or an integer.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::RequiresRationalOrders(format!("'{s}' is not of the form q/p"));
        let (q, p) = match s.split_once('/') {
            Some((q, p)) => (q.trim(), p.trim()),
            None => (s.trim(), "1"),
        };
        Ratio::new(q.parse().map_err(|_| bad())?, p.parse().map_err(|_| bad())?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalReduction {
    /// Common denominator.
    pub p: u64,
    /// `n_j = β_j p`.
    pub n: Vec<u64>,
    /// Augmented size `Σ n_j`.
    pub total: u64,
}

pub fn reduce_rational(orders: &[Ratio]) -> Result<RationalReduction> {
    if orders.is_empty() {
        return Err(Error::InvalidArgument("at least one order is required".into()));
    }
    for r in orders {
        if r.num == 0 || r.num > r.den {
            return Err(Error::InvalidOrder(r.value()));
        }
    }
    let p = orders.iter().fold(1u64, |acc, r| acc.lcm(&r.den));
    let n: Vec<u64> = orders.iter().map(|r| r.num * (p / r.den)).collect();
    let total = n.iter().sum();
    Ok(RationalReduction { p, n, total })
}

/// The augmented order-`1/p` system.
#[derive(Debug, Clone)]
pub struct Augmented {
    pub reduction: RationalReduction,
    pub order: f64,
    pub matrix: CMatrix,
    /// Index of the first (head) and last (tail) row of each block.
    pub heads: Vec<usize>,
    pub tails: Vec<usize>,
}

impl Augmented {
    /// Initial vector with `φ_j` at each block head.
    pub fn initial(&self, phi: &[Complex64]) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); self.matrix.nrows()];
        for (&h, &p) in self.heads.iter().zip(phi) {
            v[h] = p;
        }
        v
    }
}

/// Augmented dimension above which the dense construction is refused.
pub const MAX_AUGMENTED: u64 = 4096;

pub fn build_augmented(orders: &[Ratio], f: &CMatrix) -> Result<Augmented> {
    let red = reduce_rational(orders)?;
    let m = orders.len();
    if f.nrows() != m || f.ncols() != m {
        return Err(Error::Dimension("matrix does not match the orders".into()));
    }
    if red.total > MAX_AUGMENTED {
        return Err(Error::InvalidArgument(format!(
            "augmented system of size {} exceeds {MAX_AUGMENTED}",
            red.total
        )));
    }
    let size = red.total as usize;
    let mut heads = Vec::with_capacity(m);
    let mut tails = Vec::with_capacity(m);
    let mut off = 0;
    for &nj in &red.n {
        heads.push(off);
        tails.push(off + nj as usize - 1);
        off += nj as usize;
    }
    let mut a = CMatrix::zeros(size, size);
    for j in 0..m {
        for r in heads[j]..tails[j] {
            a[(r, r + 1)] = Complex64::new(1.0, 0.0);
        }
        for k in 0..m {
            a[(tails[j], heads[k])] += f[(j, k)];
        }
    }
    Ok(Augmented {
        order: 1.0 / red.p as f64,
        reduction: red,
        matrix: a,
        heads,
        tails,
    })
}

fn rational_orders(spec: &SystemSpec, ratios: &[Ratio]) -> Result<()> {
    if ratios.len() != spec.dim() {
        return Err(Error::Dimension("one rational order per equation is required".into()));
    }
    for (r, &b) in ratios.iter().zip(spec.orders.as_slice()) {
        if (r.value() - b).abs() > 1e-15 {
            return Err(Error::Consistency(format!("rational order {r} does not match {b}")));
        }
    }
    Ok(())
}

/// `S(t)` via the augmented commensurate system. Caputo entries are
/// `S̃(head_j, head_k)`, RL entries `S̃₊(head_j, tail_k)`.
pub fn rational_operator(
    spec: &SystemSpec,
    ratios: &[Ratio],
    grid: &TimeGrid,
    opts: &SolveOptions,
) -> Result<OperatorSamples> {
    rational_orders(spec, ratios)?;
    let aug = build_augmented(ratios, &spec.matrix)?;
    let times = sample_times(grid, spec.kind);
    let m = spec.dim();
    let mut notes = vec![format!(
        "augmented system: p = {}, size {}",
        aug.reduction.p, aug.reduction.total
    )];
    let jf = match jordan_of(&aug.matrix, opts) {
        Ok(jf) => jf,
        Err(e) => {
            notes.push(format!(
                "augmented Jordan decomposition failed ({e}); used Talbot inversion"
            ));
            let mut ops = talbot_samples(&spec.orders, &spec.matrix, spec.kind, &times, &opts.contour)?;
            ops.notes = notes;
            return Ok(ops);
        }
    };
    let cols = match spec.kind {
        DerivativeKind::Caputo => &aug.heads,
        DerivativeKind::RiemannLiouville => &aug.tails,
    };
    let matrices = if jf.is_diagonal() {
        // only the head rows and the selected columns of M·E·M⁻¹ are needed
        let (tr, inv) = (jf.transform(), jf.transform_inv());
        let alpha = aug.order;
        let (nu, rl) = match spec.kind {
            DerivativeKind::Caputo => (1.0, false),
            DerivativeKind::RiemannLiouville => (alpha, true),
        };
        let p = MLParams::new(alpha, nu)?;
        times
            .par_iter()
            .map(|&t| {
                let pre = if rl { t.powf(alpha - 1.0) } else { 1.0 };
                let ta = t.powf(alpha);
                let e = jf
                    .blocks()
                    .iter()
                    .map(|b| Ok(ml(p, b.eigenvalue * ta)? * pre))
                    .collect::<Result<Vec<_>>>()?;
                Ok(CMatrix::from_fn(m, m, |j, k| {
                    e.iter()
                        .enumerate()
                        .map(|(l, el)| tr[(aug.heads[j], l)] * el * inv[(l, cols[k])])
                        .sum()
                }))
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        commensurate_samples(aug.order, &jf, spec.kind, &times)?
            .iter()
            .map(|s| CMatrix::from_fn(m, m, |j, k| s[(aug.heads[j], cols[k])]))
            .collect()
    };
    Ok(OperatorSamples {
        times,
        matrices,
        truncation: None,
        error_estimate: 1e-10,
        notes,
    })
}

pub fn solve_rational(spec: &SystemSpec, grid: &TimeGrid, opts: &SolveOptions) -> Result<Trajectory> {
    let ratios = spec
        .rational_orders
        .clone()
        .ok_or_else(|| Error::RequiresRationalOrders("orders were not given as exact fractions".into()))?;
    let ops = rational_operator(spec, &ratios, grid, opts)?;
    assemble(spec, grid, ops, Method::Rational)
}

fn poly_derivative(p: &FrExpPoly) -> FrExpPoly {
    FrExpPoly::from_terms(
        p.terms()
            .iter()
            .filter(|(e, _)| *e != 0.0)
            .map(|&(e, c)| (e - 1.0, c * e))
            .collect(),
    )
}

/// Partial-fraction form: with simple eigenvalues `λ_ℓ` of the augmented
/// matrix, `s_{jk}(t) = Σ_ℓ C^{jk}_ℓ t^{1/p−β_k} E_{1/p, 1/p−β_k+1}(λ_ℓ t^{1/p})`
/// (Caputo) or `Σ_ℓ C^{jk}_ℓ t^{1/p−1} E_{1/p,1/p}(λ_ℓ t^{1/p})` (RL), where
/// `C^{jk}_ℓ = P_{jk}(λ_ℓ)/P_N'(λ_ℓ)`. Fails when eigenvalues cluster.
pub fn partial_fraction_operator(
    spec: &SystemSpec,
    ratios: &[Ratio],
    times: &[f64],
    min_separation: f64,
) -> Result<Vec<CMatrix>> {
    rational_orders(spec, ratios)?;
    let aug = build_augmented(ratios, &spec.matrix)?;
    let m = spec.dim();
    let alpha = aug.order;
    // polynomials in λ = s^{1/p}: exponents n_j
    let lattice: Vec<f64> = aug.reduction.n.iter().map(|&n| n as f64).collect();
    let pn = char_function_lattice(&lattice, &spec.matrix)?;
    let adj = cofactor_lattice(&lattice, &spec.matrix)?;
    let dpn = poly_derivative(&pn);
    let (_, tri) = aug.matrix.clone().schur().unpack();
    let lambdas: Vec<Complex64> = tri.diagonal().iter().copied().collect();
    let scale = lambdas.iter().map(|z| z.norm()).fold(1.0, f64::max);
    for (i, a) in lambdas.iter().enumerate() {
        for b in &lambdas[i + 1..] {
            if (a - b).norm() < min_separation * scale {
                return Err(Error::IllConditioned {
                    condition: scale / (a - b).norm().max(1e-300),
                });
            }
        }
    }
    let eval_int = |p: &FrExpPoly, z: Complex64| -> Complex64 {
        p.terms().iter().map(|&(e, c)| c * z.powi(e.round() as i32)).sum()
    };
    let coeffs: Vec<Vec<Vec<Complex64>>> = lambdas
        .iter()
        .map(|&lam| {
            let d = eval_int(&dpn, lam);
            (0..m)
                .map(|j| (0..m).map(|k| eval_int(&adj[j][k], lam) / d).collect())
                .collect()
        })
        .collect();
    let betas = spec.orders.as_slice().to_vec();
    times
        .par_iter()
        .map(|&t| {
            if t == 0.0 && spec.kind == DerivativeKind::Caputo {
                return Ok(CMatrix::identity(m, m));
            }
            let ta = t.powf(alpha);
            let mut s = CMatrix::zeros(m, m);
            for (l, &lam) in lambdas.iter().enumerate() {
                for k in 0..m {
                    let (nu, pre) = match spec.kind {
                        DerivativeKind::Caputo => (alpha - betas[k] + 1.0, t.powf(alpha - betas[k])),
                        DerivativeKind::RiemannLiouville => (alpha, t.powf(alpha - 1.0)),
                    };
                    let e = ml(MLParams::new(alpha, nu)?, lam * ta)? * pre;
                    for j in 0..m {
                        s[(j, k)] += coeffs[l][j][k] * e;
                    }
                }
            }
            Ok(s)
        })
        .collect()
}

fn char_function_lattice(n: &[f64], f: &CMatrix) -> Result<FrExpPoly> {
    char_function(&unchecked_orders(n), f)
}

fn cofactor_lattice(n: &[f64], f: &CMatrix) -> Result<Vec<Vec<FrExpPoly>>> {
    cofactor_numerators(&unchecked_orders(n), f, DerivativeKind::RiemannLiouville)
}

/// Integer "orders" used only as polynomial exponents.
fn unchecked_orders(n: &[f64]) -> super::MultiOrder {
    super::MultiOrder::exponents(n.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> Ratio {
        s.parse().unwrap()
    }

    #[test]
    fn counting() {
        let red = reduce_rational(&[r("1/2"), r("2/3"), r("1/5"), r("6/7")]).unwrap();
        assert_eq!((red.p, red.total), (210, 467));
        let red = reduce_rational(&[r("1/2"), r("1/3")]).unwrap();
        assert_eq!((red.p, red.total, red.n.clone()), (6, 5, vec![3, 2]));
        let red = reduce_rational(&[r("1"), r("1")]).unwrap();
        assert_eq!((red.p, red.total), (1, 2));
        assert!(matches!("0.5".parse::<Ratio>(), Err(Error::RequiresRationalOrders(_))));
        assert_eq!(r("2/4"), Ratio::new(1, 2).unwrap());
    }

    #[test]
    fn companion_layout() {
        let f = CMatrix::from_element(1, 1, Complex64::new(-2.0, 0.0));
        let aug = build_augmented(&[r("1/2")], &f).unwrap();
        assert_eq!((aug.order, aug.matrix.nrows()), (0.5, 1));
        assert_eq!(aug.matrix[(0, 0)], Complex64::new(-2.0, 0.0));

        let f = CMatrix::from_fn(2, 2, |j, k| Complex64::new((10 * j + k + 1) as f64, 0.0));
        let aug = build_augmented(&[r("1/2"), r("1/4")], &f).unwrap();
        assert_eq!((aug.order, aug.matrix.nrows()), (0.25, 3));
        assert_eq!((aug.heads.clone(), aug.tails.clone()), (vec![0, 2], vec![1, 2]));
        let c = |x: f64| Complex64::new(x, 0.0);
        assert_eq!(aug.matrix[(0, 1)], c(1.0));
        assert_eq!(aug.matrix[(1, 0)], c(1.0));
        assert_eq!(aug.matrix[(1, 2)], c(2.0));
        assert_eq!(aug.matrix[(2, 0)], c(11.0));
        assert_eq!(aug.matrix[(2, 2)], c(12.0));
        assert_eq!(aug.matrix[(0, 0)], c(0.0));
    }
}
