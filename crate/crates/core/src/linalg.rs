//! Small dense linear-algebra helpers on top of nalgebra.
//!
//! Rank decisions everywhere use the same rule: a singular value is zero when
//! it is below `max(rows, cols) * eps * sigma_max`.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};
use crate::Matrix;

/// Singular value decomposition with singular values sorted in descending order.
pub struct SortedSvd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v_t: Matrix,
}

pub fn svd(m: &Matrix) -> SortedSvd {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return SortedSvd {
            u: Matrix::zeros(r, 0),
            singular_values: Vec::new(),
            v_t: Matrix::zeros(0, c),
        };
    }
    // nalgebra's SVD occasionally returns factors that do not reproduce the
    // input when singular values nearly coincide; faer's does not.
    let fm = faer::Mat::<f64>::from_fn(r, c, |i, j| m[(i, j)]);
    let (u, values, v_t) = match fm.thin_svd() {
        Ok(f) => {
            let (fu, fv, fs) = (f.U(), f.V(), f.S().column_vector());
            (
                Matrix::from_fn(r, k, |i, j| fu[(i, j)]),
                (0..k).map(|i| fs[i]).collect::<Vec<f64>>(),
                Matrix::from_fn(k, c, |i, j| fv[(j, i)]),
            )
        }
        Err(_) => {
            let f = SVD::new(m.clone(), true, true);
            (
                f.u.expect("u requested"),
                f.singular_values.iter().copied().collect(),
                f.v_t.expect("v_t requested"),
            )
        }
    };
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut su = Matrix::zeros(r, k);
    let mut sv = Matrix::zeros(k, c);
    let mut s = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        su.set_column(dst, &u.column(src));
        sv.set_row(dst, &v_t.row(src));
        s.push(values[src]);
    }
    SortedSvd {
        u: su,
        singular_values: s,
        v_t: sv,
    }
}

/// Threshold below which a singular value of an `r x c` matrix counts as zero.
pub fn rank_tolerance(r: usize, c: usize, sigma_max: f64) -> f64 {
    r.max(c) as f64 * f64::EPSILON * sigma_max
}

pub fn rank(m: &Matrix) -> usize {
    let s = svd(m).singular_values;
    let Some(&smax) = s.first() else { return 0 };
    let tol = rank_tolerance(m.nrows(), m.ncols(), smax);
    s.iter().filter(|&&x| x > tol).count()
}

/// Moore-Penrose pseudoinverse.
pub fn pinv(m: &Matrix) -> Matrix {
    let (r, c) = m.shape();
    let d = svd(m);
    let Some(&smax) = d.singular_values.first() else {
        return Matrix::zeros(c, r);
    };
    let tol = rank_tolerance(r, c, smax);
    let mut out = Matrix::zeros(c, r);
    for (i, &s) in d.singular_values.iter().enumerate() {
        if s > tol {
            out += d.v_t.row(i).transpose() * d.u.column(i).transpose() / s;
        }
    }
    out
}

/// Minimum-norm least-squares solution of `a x = b` together with the
/// Frobenius norm of the residual `a x - b`.
pub fn lstsq(a: &Matrix, b: &Matrix) -> (Matrix, f64) {
    let x = pinv(a) * b;
    let res = (a * &x - b).norm();
    (x, res)
}

/// Orthonormal basis (as columns) of the right kernel of `m`.
pub fn null_space(m: &Matrix) -> Matrix {
    let (r, c) = m.shape();
    if c == 0 {
        return Matrix::zeros(0, 0);
    }
    // Pad with zero rows so the thin SVD returns a full c x c right factor.
    let padded = if r < c {
        let mut p = Matrix::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let d = svd(&padded);
    let smax = d.singular_values.first().copied().unwrap_or(0.0);
    let tol = rank_tolerance(r, c, smax);
    let rk = d.singular_values.iter().filter(|&&s| s > tol).count();
    let mut basis = Matrix::zeros(c, c - rk);
    for (j, i) in (rk..c).enumerate() {
        basis.set_column(j, &d.v_t.row(i).transpose());
    }
    basis
}

/// Column-major vectorization.
pub fn vec(m: &Matrix) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &DVector<f64>, rows: usize, cols: usize) -> Matrix {
    Matrix::from_column_slice(rows, cols, v.as_slice())
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// Stack matrices vertically; all must share a column count.
pub fn vstack(blocks: &[&Matrix]) -> Matrix {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        debug_assert_eq!(b.ncols(), cols);
        out.view_mut((at, 0), (b.nrows(), cols)).copy_from(*b);
        at += b.nrows();
    }
    out
}

/// Smallest eigenvalue of the symmetric part of `m` and a unit eigenvector.
pub fn min_eig_sym(m: &Matrix) -> (f64, DVector<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let (idx, &val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    (val, eig.eigenvectors.column(idx).into_owned())
}

pub fn check_finite(name: &str, m: &Matrix) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(name.to_string()))
    }
}

pub fn check_shape(name: &str, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
    if m.shape() == (rows, cols) {
        Ok(())
    } else {
        Err(Error::shape(name, (rows, cols), m.shape()))
    }
}

/// Build a matrix from row slices. Panics on ragged input; meant for literals.
pub fn from_rows(rows: &[&[f64]]) -> Matrix {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    DMatrix::from_fn(r, c, |i, j| rows[i][j])
}
