//! Dense linear-algebra kernel: pseudo-inverse, minimum-norm least squares,
//! eigendecomposition with left/right vectors, Kronecker/vectorization
//! utilities, and spectral radius.
//!
//! Decompositions are delegated to LAPACK (linked through the system
//! OpenBLAS). This layer fixes the conventions everything downstream relies
//! on: the singular-value cutoff used to truncate pseudo-inverses and the
//! eigenvalue ordering, so repeated runs produce identical results.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use ndarray_linalg::{Eig, EigVals, JobSvd, SVDDC};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default relative singular-value cutoff: `max(rows, cols) * f64::EPSILON`.
pub fn default_rel_tol(rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON
}

/// Frobenius norm.
pub fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Squared Frobenius norm, the residue accumulator used throughout.
pub fn frobenius_sq(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>()
}

fn check_nonempty(a: &ArrayView2<f64>, what: &str) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::InvalidInput(format!("{what}: empty matrix")));
    }
    Ok(())
}

/// Economy SVD factors of a real matrix, with the truncation rank implied by
/// a relative cutoff. Kept so callers can reuse one decomposition for several
/// solves against the same matrix.
pub struct SvdFactors {
    /// m x r left singular vectors.
    pub u: Array2<f64>,
    /// Singular values, descending, length r = min(m, n).
    pub sigma: Array1<f64>,
    /// r x n right singular vectors (transposed).
    pub vt: Array2<f64>,
    /// Number of singular values above the cutoff.
    pub rank: usize,
}

impl SvdFactors {
    /// Decompose `a`; `rel_tol` defaults to [`default_rel_tol`].
    pub fn new(a: &Array2<f64>, rel_tol: Option<f64>) -> Result<Self> {
        check_nonempty(&a.view(), "svd")?;
        let (u, sigma, vt) = a
            .svddc(JobSvd::Some)
            .map_err(|e| Error::NonConvergence(format!("svd: {e}")))?;
        let u = u.expect("svddc with JobSvd::Some returns U");
        let vt = vt.expect("svddc with JobSvd::Some returns Vt");
        let tol = rel_tol.unwrap_or_else(|| default_rel_tol(a.nrows(), a.ncols()));
        let cutoff = tol * sigma.get(0).copied().unwrap_or(0.0);
        let rank = sigma.iter().take_while(|&&s| s > cutoff && s > 0.0).count();
        Ok(Self { u, sigma, vt, rank })
    }

    /// Moore-Penrose pseudo-inverse `V diag(1/sigma.) U^T` with truncation.
    pub fn pinv(&self) -> Array2<f64> {
        let r = self.rank;
        // (n x r) . (r x m), scaling the columns of V by 1/sigma_i.
        let mut v_scaled = self.vt.slice(ndarray::s![..r, ..]).t().to_owned();
        for (j, mut col) in v_scaled.axis_iter_mut(Axis(1)).enumerate() {
            col.mapv_inplace(|x| x / self.sigma[j]);
        }
        v_scaled.dot(&self.u.slice(ndarray::s![.., ..r]).t())
    }

    /// Minimum-norm least-squares solution of `A X = B`.
    pub fn solve(&self, b: &Array2<f64>) -> Result<Array2<f64>> {
        if b.nrows() != self.u.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "lstsq: lhs has {} rows, rhs has {}",
                self.u.nrows(),
                b.nrows()
            )));
        }
        let r = self.rank;
        let mut t = self.u.slice(ndarray::s![.., ..r]).t().dot(b);
        for (i, mut row) in t.axis_iter_mut(Axis(0)).enumerate() {
            row.mapv_inplace(|x| x / self.sigma[i]);
        }
        Ok(self.vt.slice(ndarray::s![..r, ..]).t().dot(&t))
    }

    /// Minimum-norm least-squares solution of `X A = B`, i.e. `B . pinv(A)`.
    pub fn solve_right(&self, b: &Array2<f64>) -> Result<Array2<f64>> {
        if b.ncols() != self.vt.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "lstsq (right): lhs has {} columns, rhs has {}",
                self.vt.ncols(),
                b.ncols()
            )));
        }
        let r = self.rank;
        let mut t = b.dot(&self.vt.slice(ndarray::s![..r, ..]).t());
        for (j, mut col) in t.axis_iter_mut(Axis(1)).enumerate() {
            col.mapv_inplace(|x| x / self.sigma[j]);
        }
        Ok(t.dot(&self.u.slice(ndarray::s![.., ..r]).t()))
    }
}

/// Moore-Penrose pseudo-inverse via SVD. Singular values at or below
/// `rel_tol * sigma_max` are treated as zero.
pub fn pinv(a: &Array2<f64>, rel_tol: Option<f64>) -> Result<Array2<f64>> {
    Ok(SvdFactors::new(a, rel_tol)?.pinv())
}

/// Minimum-norm `X` minimizing `||A X - B||_F`. Equals `pinv(A) . B`.
pub fn lstsq(a: &Array2<f64>, b: &Array2<f64>, rel_tol: Option<f64>) -> Result<Array2<f64>> {
    SvdFactors::new(a, rel_tol)?.solve(b)
}

/// Full eigendecomposition of a real square matrix.
///
/// Eigenvalues are sorted by descending modulus, ties broken by descending
/// real part, then descending imaginary part. `right` and `left` hold the
/// eigenvectors as columns, aligned with `values`; the left vectors are the
/// right eigenvectors of the transpose, matched to the sorted eigenvalues.
pub struct EigenDecomposition {
    pub values: Array1<Complex64>,
    pub right: Array2<Complex64>,
    pub left: Array2<Complex64>,
}

fn eig_sort_key(z: &Complex64) -> (f64, f64, f64) {
    (z.norm(), z.re, z.im)
}

fn sort_eig(
    values: Array1<Complex64>,
    vectors: Array2<Complex64>,
) -> (Array1<Complex64>, Array2<Complex64>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| {
        let (ma, ra, ia) = eig_sort_key(&values[i]);
        let (mb, rb, ib) = eig_sort_key(&values[j]);
        (mb, rb, ib)
            .partial_cmp(&(ma, ra, ia))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let sorted_vals = Array1::from_iter(order.iter().map(|&i| values[i]));
    let mut sorted_vecs = Array2::zeros(vectors.dim());
    for (dst, &src) in order.iter().enumerate() {
        sorted_vecs.column_mut(dst).assign(&vectors.column(src));
    }
    (sorted_vals, sorted_vecs)
}

/// Greedy one-to-one pairing of the transpose's eigenvalues to the sorted
/// primary ones, so each left vector sits in the column of its own
/// eigenvalue even when the two LAPACK calls order near-ties differently.
fn match_left_vectors(
    sorted_vals: &Array1<Complex64>,
    left_vals: &Array1<Complex64>,
    left_vecs: &Array2<Complex64>,
) -> Array2<Complex64> {
    let d = sorted_vals.len();
    let mut used = vec![false; d];
    let mut matched = Array2::zeros(left_vecs.dim());
    for i in 0..d {
        let mut best = usize::MAX;
        let mut best_dist = f64::INFINITY;
        for j in 0..d {
            if used[j] {
                continue;
            }
            let dist = (left_vals[j] - sorted_vals[i]).norm();
            if dist < best_dist {
                best_dist = dist;
                best = j;
            }
        }
        used[best] = true;
        matched.column_mut(i).assign(&left_vecs.column(best));
    }
    matched
}

/// Eigenvalues plus right and left eigenvectors of a square matrix.
pub fn eig(a: &Array2<f64>) -> Result<EigenDecomposition> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "eig: matrix is {}x{}, not square",
            a.nrows(),
            a.ncols()
        )));
    }
    let (vals_r, vecs_r) = a
        .eig()
        .map_err(|e| Error::NonConvergence(format!("eig: {e}")))?;
    let (values, right) = sort_eig(vals_r, vecs_r);
    let at = a.t().to_owned();
    let (vals_l, vecs_l) = at
        .eig()
        .map_err(|e| Error::NonConvergence(format!("eig (transpose): {e}")))?;
    let left = match_left_vectors(&values, &vals_l, &vecs_l);
    Ok(EigenDecomposition { values, right, left })
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(a: &Array2<f64>) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "spectral_radius: matrix is {}x{}, not square",
            a.nrows(),
            a.ncols()
        )));
    }
    let vals = a
        .eigvals()
        .map_err(|e| Error::NonConvergence(format!("eigvals: {e}")))?;
    Ok(vals.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Kronecker product, shape `(a.rows * b.rows) x (a.cols * b.cols)`.
pub fn kron(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == 0.0 {
                continue;
            }
            let mut block = out.slice_mut(ndarray::s![i * br..(i + 1) * br, j * bc..(j + 1) * bc]);
            block.assign(&(b * aij));
        }
    }
    out
}

/// Column-stacking vectorization (column-major).
pub fn vectorize(m: &Array2<f64>) -> Array1<f64> {
    Array1::from_iter(m.t().iter().copied())
}

/// Inverse of [`vectorize`] given the target shape.
pub fn unvectorize(v: &Array1<f64>, rows: usize, cols: usize) -> Result<Array2<f64>> {
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "unvectorize: {} entries cannot fill {rows}x{cols}",
            v.len()
        )));
    }
    let m = Array2::from_shape_vec((cols, rows), v.to_vec())
        .expect("shape checked above")
        .reversed_axes();
    Ok(m.to_owned())
}

/// Reject non-finite entries; used when matrices enter from external data.
pub fn ensure_finite(a: &Array2<f64>, what: &str) -> Result<()> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(what.to_string()));
    }
    Ok(())
}
