//! Dense linear-algebra kernels.
//!
//! Everything works on column-major `nalgebra` matrices. Real data lives in
//! [`Mat`]; anything that touches the spectral form of a reduced model is
//! complex ([`CMat`]), with real inputs promoted on entry.

mod eig;
mod expm;
mod kron;
mod sylvester;

pub use eig::{eig, ColumnKind, SpectralDecomposition, DIAGONALIZABLE_LIMIT};
pub use expm::expm;
pub use kron::{kron, trace_product, unvec, vec};
pub use sylvester::{
    solve_diag_left, solve_diag_right, solve_shifted_columns, solve_sylvester,
    solve_sylvester_real, solve_time_limited_sylvester, time_limited_rhs,
};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;
pub type C64 = Complex64;

/// Promote a real matrix to complex storage.
pub fn to_complex(m: &Mat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Real part of a complex matrix.
pub fn real_part(m: &CMat) -> Mat {
    m.map(|z| z.re)
}

/// Largest absolute imaginary part.
pub fn max_imag(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.im.abs()))
}

pub fn fro(m: &Mat) -> f64 {
    m.norm()
}

pub fn cfro(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm1(m: &Mat) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Diagonal matrix with the given complex entries.
pub fn cdiag(d: &[C64]) -> CMat {
    CMat::from_diagonal(&CVec::from_column_slice(d))
}

/// `e^{D t}` for a diagonal `D` given by its entries.
pub fn exp_diag(d: &[C64], t: f64) -> Vec<C64> {
    d.iter().map(|&l| (l * t).exp()).collect()
}

/// `diag(s) * M`.
pub fn scale_rows(diag: &[C64], m: &CMat) -> CMat {
    let mut out = m.clone();
    for (i, &s) in diag.iter().enumerate() {
        out.row_mut(i).iter_mut().for_each(|z| *z *= s);
    }
    out
}

/// `M * diag(s)`.
pub fn scale_cols(m: &CMat, diag: &[C64]) -> CMat {
    let mut out = m.clone();
    for (j, &s) in diag.iter().enumerate() {
        out.column_mut(j).iter_mut().for_each(|z| *z *= s);
    }
    out
}

/// Ratio of extreme singular values; `inf` for a numerically singular matrix.
pub fn condition_number(m: &CMat) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn condition_number_real(m: &Mat) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub(crate) fn ensure_square(m: &Mat, context: &'static str) -> crate::Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(crate::Error::dim(
            context,
            format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(m.nrows())
}

pub(crate) fn ensure_square_c(m: &CMat, context: &'static str) -> crate::Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(crate::Error::dim(
            context,
            format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(m.nrows())
}

pub(crate) fn ensure_finite(m: &Mat, context: &str) -> crate::Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(crate::Error::Validation(format!(
            "{context}: matrix has non-finite entries"
        )))
    }
}
