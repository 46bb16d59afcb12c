//! Moore-Penrose pseudoinverse and minimum-norm least squares.
//!
//! The singular value decomposition comes from `faer`; everything else
//! (cutoff, reassembly, shape checks) lives here.

use faer::linalg::matmul;
use faer::{Accum, Mat, MatMut, Par};

use super::matrix::clear_vector_upper;
use super::Matrix;
use crate::{Error, Result};

/// Singular values below `PINV_RELATIVE_CUTOFF * sigma_max` are treated as zero.
pub const PINV_RELATIVE_CUTOFF: f64 = 1e-12;

/// Moore-Penrose pseudoinverse `H⁺` via SVD.
pub fn pseudoinverse(h: &Matrix) -> Result<Matrix> {
    pseudoinverse_with_cutoff(h, PINV_RELATIVE_CUTOFF)
}

pub fn pseudoinverse_with_cutoff(h: &Matrix, rel_cutoff: f64) -> Result<Matrix> {
    let (m, n) = h.shape();
    let (u, v_scaled) = scaled_svd(h, rel_cutoff)?;
    // H⁺ = (V Σ⁺) Uᵀ
    let mut out = Matrix::zeros(n, m);
    let dst = MatMut::from_row_major_slice_mut(out.as_mut_slice(), n, m);
    matmul::matmul(dst, Accum::Replace, v_scaled.as_ref(), u.transpose(), 1.0, Par::Seq);
    clear_vector_upper();
    Ok(out)
}

/// Thin SVD `H = U Σ Vᵀ`, returned as `U` and `V Σ⁺` where singular values
/// at or below `rel_cutoff · σmax` count as zero.
fn scaled_svd(h: &Matrix, rel_cutoff: f64) -> Result<(Mat<f64>, Mat<f64>)> {
    if h.is_empty() {
        return Err(Error::Dimension(format!(
            "pseudoinverse of an empty {}x{} matrix",
            h.rows(),
            h.cols()
        )));
    }
    if !h.is_finite() {
        return Err(Error::Domain("pseudoinverse input has non-finite entries".into()));
    }
    let svd = h.view().thin_svd();
    clear_vector_upper();
    let svd = svd.map_err(|e| Error::Domain(format!("singular value decomposition failed: {e:?}")))?;
    let sigma = svd.S().column_vector();
    let sigma_max = sigma.iter().fold(0.0_f64, |acc, &s| acc.max(s));
    let cutoff = rel_cutoff * sigma_max;
    let mut v = svd.V().to_owned();
    for (k, &s) in sigma.iter().enumerate() {
        let inv = if s <= cutoff || s == 0.0 { 0.0 } else { 1.0 / s };
        v.col_mut(k).iter_mut().for_each(|x| *x *= inv);
    }
    Ok((svd.U().to_owned(), v))
}

/// Minimum-norm least-squares solution `Q = H⁺ T` of `min ‖HQ − T‖_F`,
/// evaluated as `(V Σ⁺)(Uᵀ T)` without forming `H⁺`.
pub fn solve_least_squares(h: &Matrix, t: &Matrix) -> Result<Matrix> {
    if h.rows() != t.rows() {
        return Err(Error::Dimension(format!(
            "least squares: H has {} rows but T has {}",
            h.rows(),
            t.rows()
        )));
    }
    let (u, v_scaled) = scaled_svd(h, PINV_RELATIVE_CUTOFF)?;
    let mut ut_t = Mat::<f64>::zeros(u.ncols(), t.cols());
    matmul::matmul(ut_t.as_mut(), Accum::Replace, u.transpose(), t.view(), 1.0, Par::Seq);
    let mut out = Matrix::zeros(h.cols(), t.cols());
    let dst = MatMut::from_row_major_slice_mut(out.as_mut_slice(), h.cols(), t.cols());
    matmul::matmul(dst, Accum::Replace, v_scaled.as_ref(), ut_t.as_ref(), 1.0, Par::Seq);
    clear_vector_upper();
    Ok(out)
}
