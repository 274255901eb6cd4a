//! Jordan decomposition and matrix-valued Mittag-Leffler functions.
//!
//! `matrix_ml` evaluates `M·E_{β,ν}(t^β(Λ+N))·M⁻¹` block by block: a Jordan
//! block of eigenvalue λ contributes the upper-triangular Toeplitz matrix with
//! entries `t^{rβ} E^{(r)}_{β,ν}(λt^β)/r!` on its r-th superdiagonal.
//! `vector_indexed_ml` sums `Σ diag(1/Γ(nβ_j+ν_j)) Zⁿ` directly and needs no
//! decomposition.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, cond, frobenius, inverse, null_space, numerical_rank, CMatrix};
use crate::ml_scalar::{ml_deriv_scaled, MLParams};
use crate::special::rgamma;

/// Default condition-number cap for the Jordan transform.
pub const DEFAULT_COND_CAP: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JordanBlock {
    pub eigenvalue: Complex64,
    pub size: usize,
}

/// `Z = M (Λ+N) M⁻¹`.
#[derive(Debug, Clone)]
pub struct JordanForm {
    transform: CMatrix,
    transform_inv: CMatrix,
    blocks: Vec<JordanBlock>,
}

#[derive(Debug, Clone, Copy)]
pub struct JordanOptions {
    /// Absolute clustering tolerance; `None` means `1e-6·‖Z‖`.
    pub cluster_tol: Option<f64>,
    pub cond_cap: f64,
}

impl Default for JordanOptions {
    fn default() -> Self {
        Self {
            cluster_tol: None,
            cond_cap: DEFAULT_COND_CAP,
        }
    }
}

impl JordanForm {
    /// Builds a form from a known transform and block list (e.g. when the
    /// structure is known analytically).
    pub fn from_parts(transform: CMatrix, blocks: Vec<JordanBlock>) -> Result<Self> {
        let m: usize = blocks.iter().map(|b| b.size).sum();
        if transform.nrows() != m || transform.ncols() != m {
            return Err(Error::Dimension(format!(
                "transform is {}x{} but blocks sum to {m}",
                transform.nrows(),
                transform.ncols()
            )));
        }
        if blocks.iter().any(|b| b.size == 0) {
            return Err(Error::InvalidArgument("empty Jordan block".into()));
        }
        let transform_inv = inverse(&transform)?;
        Ok(Self {
            transform,
            transform_inv,
            blocks,
        })
    }

    pub fn transform(&self) -> &CMatrix {
        &self.transform
    }

    pub fn transform_inv(&self) -> &CMatrix {
        &self.transform_inv
    }

    pub fn blocks(&self) -> &[JordanBlock] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.transform.nrows()
    }

    /// `Λ + N` as a dense matrix.
    pub fn jordan_matrix(&self) -> CMatrix {
        let m = self.dim();
        let mut j = CMatrix::zeros(m, m);
        let mut off = 0;
        for b in &self.blocks {
            for i in 0..b.size {
                j[(off + i, off + i)] = b.eigenvalue;
                if i + 1 < b.size {
                    j[(off + i, off + i + 1)] = c(1.0, 0.0);
                }
            }
            off += b.size;
        }
        j
    }

    pub fn reconstruct(&self) -> CMatrix {
        &self.transform * self.jordan_matrix() * &self.transform_inv
    }

    pub fn is_diagonal(&self) -> bool {
        self.blocks.iter().all(|b| b.size == 1)
    }

    /// Applies `f(λ, r)` (the r-th superdiagonal value of a block) and maps
    /// back: `M · blockdiag(Toeplitz) · M⁻¹`.
    pub fn apply_block_function<F>(&self, mut f: F) -> Result<CMatrix>
    where
        F: FnMut(Complex64, usize) -> Result<Complex64>,
    {
        let m = self.dim();
        let mut inner = CMatrix::zeros(m, m);
        let mut off = 0;
        for b in &self.blocks {
            for r in 0..b.size {
                let v = f(b.eigenvalue, r)?;
                for i in 0..b.size - r {
                    inner[(off + i, off + i + r)] = v;
                }
            }
            off += b.size;
        }
        Ok(&self.transform * inner * &self.transform_inv)
    }
}

/// Jordan decomposition with default options and the given clustering
/// tolerance (non-positive values select the default `1e-6·‖Z‖`).
pub fn jordan_decompose(matrix: &CMatrix, cluster_tol: f64) -> Result<JordanForm> {
    let opts = JordanOptions {
        cluster_tol: (cluster_tol > 0.0).then_some(cluster_tol),
        ..JordanOptions::default()
    };
    jordan_decompose_with(matrix, &opts)
}

pub fn jordan_decompose_with(matrix: &CMatrix, opts: &JordanOptions) -> Result<JordanForm> {
    let m = matrix.nrows();
    if m == 0 || matrix.ncols() != m {
        return Err(Error::Dimension(
            "Jordan decomposition needs a non-empty square matrix".into(),
        ));
    }
    if matrix.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let znorm = frobenius(matrix);
    if znorm == 0.0 {
        return JordanForm::from_parts(
            CMatrix::identity(m, m),
            vec![
                JordanBlock {
                    eigenvalue: c(0.0, 0.0),
                    size: 1
                };
                m
            ],
        );
    }
    let tol = opts.cluster_tol.unwrap_or(1e-6 * znorm);

    let schur = matrix.clone().schur();
    let (q, t) = schur.unpack();
    let eig: Vec<Complex64> = (0..m).map(|i| t[(i, i)]).collect();

    // single-linkage clustering, ordered by first occurrence on the diagonal
    let mut cluster_of = vec![usize::MAX; m];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..m {
        if cluster_of[i] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        let mut members = vec![i];
        cluster_of[i] = id;
        let mut k = 0;
        while k < members.len() {
            let a = eig[members[k]];
            for j in 0..m {
                if cluster_of[j] == usize::MAX && (eig[j] - a).norm() <= tol {
                    cluster_of[j] = id;
                    members.push(j);
                }
            }
            k += 1;
        }
        members.sort_unstable();
        clusters.push(members);
    }

    let mut columns: Vec<nalgebra::DVector<Complex64>> = Vec::with_capacity(m);
    let mut blocks = Vec::new();
    let rank_tol = f64::EPSILON.sqrt() * znorm.max(1.0);
    for members in &clusters {
        if members.len() == 1 {
            let i = members[0];
            columns.push(schur_eigenvector(&q, &t, i));
            blocks.push(JordanBlock {
                eigenvalue: eig[i],
                size: 1,
            });
            continue;
        }
        let lam = members.iter().map(|&i| eig[i]).sum::<Complex64>() / members.len() as f64;
        let (vecs, sizes) = cluster_chains(matrix, lam, members.len(), rank_tol)?;
        columns.extend(vecs);
        blocks.extend(sizes.into_iter().map(|size| JordanBlock { eigenvalue: lam, size }));
    }

    let transform = CMatrix::from_columns(&columns);
    let kappa = cond(&transform);
    if !(kappa <= opts.cond_cap) {
        return Err(Error::IllConditioned { condition: kappa });
    }
    let jf = JordanForm::from_parts(transform, blocks)?;
    let resid = frobenius(&(jf.reconstruct() - matrix));
    if resid > 1e-8 * znorm {
        return Err(Error::IllConditioned {
            condition: kappa.max(resid / (f64::EPSILON * znorm)),
        });
    }
    Ok(jf)
}

/// Eigenvector for the simple eigenvalue `t[i,i]` of the Schur form.
fn schur_eigenvector(q: &CMatrix, t: &CMatrix, i: usize) -> nalgebra::DVector<Complex64> {
    let m = t.nrows();
    let lam = t[(i, i)];
    let mut x = nalgebra::DVector::<Complex64>::zeros(m);
    x[i] = c(1.0, 0.0);
    let scale = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for j in (0..i).rev() {
        let mut s = c(0.0, 0.0);
        for l in j + 1..=i {
            s += t[(j, l)] * x[l];
        }
        let mut d = t[(j, j)] - lam;
        if d.norm() < f64::EPSILON * scale {
            d = c(f64::EPSILON * scale, 0.0);
        }
        x[j] = -s / d;
    }
    let v = q * x;
    let n = v.norm();
    v / c(n, 0.0)
}

/// Jordan chains of `Z` for the eigenvalue cluster centred at `lam` with
/// algebraic multiplicity `alg`. Returns chain vectors (bottom of each chain
/// first) and block sizes, largest blocks first.
fn cluster_chains(
    z: &CMatrix,
    lam: Complex64,
    alg: usize,
    rank_tol: f64,
) -> Result<(Vec<nalgebra::DVector<Complex64>>, Vec<usize>)> {
    let m = z.nrows();
    let a = z - CMatrix::identity(m, m) * lam;

    // rank(A^k) for k = 0..=alg
    let mut powers = vec![CMatrix::identity(m, m)];
    let mut ranks = vec![m];
    for k in 1..=alg {
        let p = &a * &powers[k - 1];
        ranks.push(numerical_rank(&p, rank_tol * (k as f64)));
        powers.push(p);
        if ranks[k] == m - alg {
            break;
        }
    }
    let kmax = ranks.len() - 1;
    if ranks[kmax] != m - alg {
        return Err(Error::IllConditioned {
            condition: f64::INFINITY,
        });
    }
    // number of blocks of size ≥ k is r_{k-1} - r_k
    let at_least = |k: usize| ranks[k - 1] - ranks[k];

    struct Chain {
        top: nalgebra::DVector<Complex64>,
        len: usize,
    }
    let mut chains: Vec<Chain> = Vec::new();
    for k in (1..=kmax).rev() {
        let exact = at_least(k) - if k < kmax { at_least(k + 1) } else { 0 };
        if exact == 0 {
            continue;
        }
        let ker_k = null_space(&powers[k], rank_tol * k as f64);
        // span that new tops must avoid: ker(A^{k-1}) plus existing chains at height k
        let mut avoid: Vec<nalgebra::DVector<Complex64>> = Vec::new();
        if k > 1 {
            let ker_prev = null_space(&powers[k - 1], rank_tol * (k - 1) as f64);
            avoid.extend(ker_prev.column_iter().map(|c| c.into_owned()));
        }
        for ch in &chains {
            avoid.push(&powers[ch.len - k] * &ch.top);
        }
        let proj = project_out(&ker_k, &avoid);
        let svd = proj.svd(true, false);
        let u = svd.u.expect("requested U");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].partial_cmp(&svd.singular_values[i]).unwrap());
        if order.len() < exact || svd.singular_values[order[exact - 1]] < 1e-6 {
            return Err(Error::IllConditioned {
                condition: f64::INFINITY,
            });
        }
        for &i in order.iter().take(exact) {
            chains.push(Chain {
                top: u.column(i).into_owned(),
                len: k,
            });
        }
    }

    let mut vecs = Vec::new();
    let mut sizes = Vec::new();
    for ch in &chains {
        for r in (0..ch.len).rev() {
            vecs.push(&powers[r] * &ch.top);
        }
        sizes.push(ch.len);
    }
    Ok((vecs, sizes))
}

/// Columns of `basis` with the span of `avoid` projected out.
fn project_out(basis: &CMatrix, avoid: &[nalgebra::DVector<Complex64>]) -> CMatrix {
    // modified Gram-Schmidt with reorthogonalisation; dependent directions
    // of the avoided span are dropped
    let scale = avoid.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut ortho: Vec<nalgebra::DVector<Complex64>> = Vec::new();
    for v in avoid {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &ortho {
                let d = q.dotc(&w);
                w -= q * d;
            }
        }
        let n = w.norm();
        if n > 1e-10 * scale {
            ortho.push(w / c(n, 0.0));
        }
    }
    let mut out = basis.clone();
    for mut col in out.column_iter_mut() {
        for _ in 0..2 {
            for q in &ortho {
                let d = q.dotc(&col);
                col -= q * d;
            }
        }
    }
    out
}

/// `M · 𝔼_{β,ν}(t^β(Λ+N)) · M⁻¹`.
pub fn matrix_ml(beta: f64, nu: f64, t: f64, jf: &JordanForm) -> Result<CMatrix> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "time {t} must be finite and non-negative"
        )));
    }
    let params = MLParams::new(beta, nu)?;
    let tb = t.powf(beta);
    jf.apply_block_function(|lam, r| {
        let v = ml_deriv_scaled(params, lam * tb, r)?;
        Ok(v * tb.powi(r as i32))
    })
}

/// Diagonal matrix of `1/Γ(nβ_j + ν_j)`.
fn gamma_diag(b: &[f64], v: &[f64], n: usize) -> Vec<f64> {
    b.iter().zip(v).map(|(&bj, &vj)| rgamma(n as f64 * bj + vj)).collect()
}

/// `Σ_n diag(1/Γ(nB+V)) Zⁿ`, truncated when three consecutive term norms
/// fall below `tol` times the accumulated norm.
pub fn vector_indexed_ml(b: &[f64], v: &[f64], z: &CMatrix, tol: f64) -> Result<CMatrix> {
    const TERM_CAP: usize = 1000;
    let m = z.nrows();
    if z.ncols() != m || b.len() != m || v.len() != m {
        return Err(Error::Dimension(format!(
            "B has {} entries, V has {}, Z is {}x{}",
            b.len(),
            v.len(),
            z.nrows(),
            z.ncols()
        )));
    }
    if b.iter().chain(v).any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidArgument("vector index entries must be positive".into()));
    }
    let mut power = CMatrix::identity(m, m);
    let mut sum = CMatrix::zeros(m, m);
    let mut small_run = 0;
    for n in 0..TERM_CAP {
        if n > 0 {
            power = z * &power;
        }
        let g = gamma_diag(b, v, n);
        let mut term = power.clone();
        for (i, gi) in g.iter().enumerate() {
            term.row_mut(i).scale_mut(*gi);
        }
        sum += &term;
        let tn = frobenius(&term);
        if !tn.is_finite() || !frobenius(&sum).is_finite() {
            return Err(Error::SeriesDivergence { terms: n });
        }
        if tn <= tol * frobenius(&sum) {
            small_run += 1;
            if small_run >= 3 {
                return Ok(sum);
            }
        } else {
            small_run = 0;
        }
    }
    Err(Error::SeriesDivergence { terms: TERM_CAP })
}
