use nalgebra::{ClosedAddAssign, ClosedMulAssign, DMatrix, DVector, Scalar};
use num_traits::{One, Zero};

/// Kronecker product `X (x) Y`.
pub fn kron<T>(x: &DMatrix<T>, y: &DMatrix<T>) -> DMatrix<T>
where
    T: Scalar + Zero + ClosedMulAssign + Copy,
{
    let (p, q) = (y.nrows(), y.ncols());
    DMatrix::from_fn(x.nrows() * p, x.ncols() * q, |i, j| {
        x[(i / p, j / q)] * y[(i % p, j % q)]
    })
}

/// Column-stacking vectorization.
pub fn vec<T: Scalar + Copy>(x: &DMatrix<T>) -> DVector<T> {
    DVector::from_column_slice(x.as_slice())
}

/// Inverse of [`vec`] for a `rows x cols` matrix.
pub fn unvec<T: Scalar + Copy>(v: &DVector<T>, rows: usize, cols: usize) -> DMatrix<T> {
    assert_eq!(v.len(), rows * cols, "unvec: length mismatch");
    DMatrix::from_column_slice(rows, cols, v.as_slice())
}

/// `tr(X Y Z)` evaluated as `vec(X^T)^T (I (x) Y) vec(Z)`.
pub fn trace_product<T>(x: &DMatrix<T>, y: &DMatrix<T>, z: &DMatrix<T>) -> crate::Result<T>
where
    T: Scalar + Zero + One + ClosedMulAssign + ClosedAddAssign + Copy,
{
    if x.ncols() != y.nrows() || y.ncols() != z.nrows() || z.ncols() != x.nrows() {
        return Err(crate::Error::dim(
            "trace_product",
            format!(
                "{}x{} * {}x{} * {}x{} is not square-conformable",
                x.nrows(),
                x.ncols(),
                y.nrows(),
                y.ncols(),
                z.nrows(),
                z.ncols()
            ),
        ));
    }
    let ident = DMatrix::<T>::identity(z.ncols(), z.ncols());
    let op = kron(&ident, y);
    let lhs = vec(&x.transpose());
    let rhs = op * vec(z);
    Ok(lhs.dot(&rhs))
}
