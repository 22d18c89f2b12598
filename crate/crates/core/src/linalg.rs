//! Dense helpers on top of nalgebra that tolerate empty dimensions. The
//! SVD and symmetric eigensolver come from faer.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative singular-value cutoff used for every pseudoinverse.
pub const PINV_RCOND: f64 = 1e-10;

/// Thin SVD pieces `(u, sigma, v)` with `m = u diag(sigma) v^T`.
struct Svd {
    u: DMatrix<f64>,
    s: DVector<f64>,
    v: DMatrix<f64>,
}

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// faer's thin SVD; nalgebra's is avoided because it can stall or lose
/// accuracy on the integer, highly degenerate incidence matrices. If faer
/// reports non-convergence, an eigendecomposition of the smaller Gram matrix
/// is used instead.
fn svd(m: &DMatrix<f64>) -> Svd {
    match to_faer(m).thin_svd() {
        Ok(d) => {
            let s = d.S().column_vector();
            Svd {
                u: from_faer(d.U()),
                s: DVector::from_fn(s.nrows(), |i, _| s[i]),
                v: from_faer(d.V()),
            }
        }
        Err(e) => {
            log::warn!(
                "SVD of a {}x{} matrix failed ({e:?}); falling back to the Gram eigendecomposition",
                m.nrows(),
                m.ncols()
            );
            gram_svd(m)
        }
    }
}

fn gram_svd(m: &DMatrix<f64>) -> Svd {
    let (r, c) = m.shape();
    let tall = r >= c;
    let gram = if tall { m.tr_mul(m) } else { m * m.transpose() };
    let (vals, vecs) = sym_eigen_sorted(&gram);
    let k = vals.len();
    // squared singular values are only resolved down to about eps * max
    let floor = k as f64 * f64::EPSILON * vals.max().max(0.0);
    let s = DVector::from_iterator(
        k,
        vals.iter().rev().map(|v| if *v > floor { v.sqrt() } else { 0.0 }),
    );
    let side = DMatrix::from_fn(k, k, |i, j| vecs[(i, k - 1 - j)]);
    // the other side's singular vectors, zero where sigma vanishes
    let mut other = if tall { m * &side } else { m.tr_mul(&side) };
    for (j, mut col) in other.column_iter_mut().enumerate() {
        if s[j] > 0.0 {
            col /= s[j];
        } else {
            col.fill(0.0);
        }
    }
    if tall {
        Svd { u: other, s, v: side }
    } else {
        Svd { u: side, s, v: other }
    }
}

/// Moore-Penrose pseudoinverse, discarding singular values below
/// `rcond * sigma_max`.
pub fn pinv(m: &DMatrix<f64>, rcond: f64) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let d = svd(m);
    let smax = d.s.max();
    if smax == 0.0 {
        return DMatrix::zeros(c, r);
    }
    let cut = rcond * smax;
    let mut out = DMatrix::zeros(c, r);
    for (i, &s) in d.s.iter().enumerate() {
        if s > cut {
            // out += v_i u_i^T / s
            out.ger(1.0 / s, &d.v.column(i), &d.u.column(i), 1.0);
        }
    }
    out
}

/// Minimum-norm least-squares solution of `m x = b`.
pub fn lstsq(m: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> DVector<f64> {
    pinv(m, rcond) * b
}

/// Numerical rank with the same relative cutoff convention as [`pinv`].
pub fn rank(m: &DMatrix<f64>, rcond: f64) -> usize {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return 0;
    }
    let s = svd(m).s;
    let smax = s.max();
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rcond * smax).count()
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending. The input
/// is symmetrised first.
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = to_faer(&sym)
        .self_adjoint_eigen(faer::Side::Lower)
        .map(|e| {
            let s = e.S().column_vector();
            (DVector::from_fn(n, |i, _| s[i]), from_faer(e.U()))
        })
        .or_else(|e| {
            log::warn!("faer eigendecomposition failed ({e:?}); retrying with nalgebra");
            SymmetricEigen::try_new(sym.clone(), 5.0 * f64::EPSILON, 1000 * n.max(10))
                .map(|e| (e.eigenvalues, e.eigenvectors))
                .ok_or(e)
        })
        .expect("symmetric eigendecomposition converges");
    let (eigenvalues, eigenvectors) = eig;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eigenvectors.column(src));
    }
    (values, vectors)
}

/// Euclidean orthonormal basis for the column span of `m`.
pub fn orthonormal_columns(m: &DMatrix<f64>, rcond: f64) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(r, 0);
    }
    let d = svd(m);
    let smax = d.s.max();
    let u = d.u;
    let keep: Vec<usize> = d
        .s
        .iter()
        .enumerate()
        .filter(|(_, &s)| smax > 0.0 && s > rcond * smax)
        .map(|(i, _)| i)
        .collect();
    DMatrix::from_fn(r, keep.len(), |i, j| u[(i, keep[j])])
}

/// `diag(d) * m`
pub fn scale_rows(m: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= d[i];
    }
    out
}

/// `m * diag(d)`
pub fn scale_cols(m: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= d[j];
    }
    out
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
