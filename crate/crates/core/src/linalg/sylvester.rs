//! Sylvester solvers.
//!
//! The generic solver handles `A1 X + X A2^T = R` by complex Schur reduction of
//! both coefficients followed by column-wise triangular back-substitution.
//! When one coefficient is diagonal (the spectral form of a reduced model) the
//! equation decouples into independent shifted solves, one per column.

use rayon::prelude::*;

use super::{cfro, ensure_square, ensure_square_c, max_imag, real_part, to_complex, CMat, Mat, C64};
use crate::{Error, Result};

// Relative margin on min |l_i(A1) + l_j(A2)|.
const OVERLAP_TOL: f64 = 1e-12;
// Relative size of the smallest LU pivot before a shift counts as singular.
const PIVOT_TOL: f64 = 1e-14;

/// Solve `A1 X + X A2^T = rhs` over the complex numbers.
pub fn solve_sylvester(a1: &CMat, a2: &CMat, rhs: &CMat) -> Result<CMat> {
    let d1 = ensure_square_c(a1, "solve_sylvester A1")?;
    let d2 = ensure_square_c(a2, "solve_sylvester A2")?;
    if rhs.nrows() != d1 || rhs.ncols() != d2 {
        return Err(Error::dim(
            "solve_sylvester",
            format!(
                "rhs is {}x{}, expected {d1}x{d2}",
                rhs.nrows(),
                rhs.ncols()
            ),
        ));
    }

    let (u1, t1) = a1.clone().schur().unpack();
    let (u2, t2) = a2.transpose().schur().unpack();

    let tolerance = OVERLAP_TOL * (cfro(a1) + cfro(a2));
    let min_sum = (0..d1)
        .flat_map(|i| (0..d2).map(move |j| (i, j)))
        .map(|(i, j)| (t1[(i, i)] + t2[(j, j)]).norm())
        .fold(f64::INFINITY, f64::min);
    if min_sum <= tolerance {
        return Err(Error::SingularOperator { min_sum, tolerance });
    }

    let factors = SchurPair { u1, t1, u2, t2 };
    let mut x = factors.solve(rhs);
    // Refinement against the original residual recovers entries that are
    // small relative to ||X|| when A1, A2 are sparse or banded.
    for _ in 0..REFINEMENT_STEPS {
        let residual = rhs - a1 * &x - &x * a2.transpose();
        x += factors.solve(&residual);
    }
    Ok(x)
}

const REFINEMENT_STEPS: usize = 2;

struct SchurPair {
    u1: CMat,
    t1: CMat,
    u2: CMat,
    t2: CMat,
}

impl SchurPair {
    fn solve(&self, rhs: &CMat) -> CMat {
        let (t1, t2) = (&self.t1, &self.t2);
        let (d1, d2) = (t1.nrows(), t2.nrows());
        let f = self.u1.adjoint() * rhs * &self.u2;
        let mut y = CMat::zeros(d1, d2);
        for j in 0..d2 {
            let mut col = f.column(j).clone_owned();
            for k in 0..j {
                let coef = t2[(k, j)];
                if coef != C64::new(0.0, 0.0) {
                    col -= y.column(k) * coef;
                }
            }
            // (T1 + t2_jj I) y_j = col, upper triangular.
            let shift = t2[(j, j)];
            for i in (0..d1).rev() {
                let mut acc = col[i];
                for l in i + 1..d1 {
                    acc -= t1[(i, l)] * y[(l, j)];
                }
                y[(i, j)] = acc / (t1[(i, i)] + shift);
            }
        }
        &self.u1 * y * self.u2.adjoint()
    }
}

/// Real-input wrapper around [`solve_sylvester`]; the imaginary residue of
/// the complex solve is dropped.
pub fn solve_sylvester_real(a1: &Mat, a2: &Mat, rhs: &Mat) -> Result<Mat> {
    let x = solve_sylvester(&to_complex(a1), &to_complex(a2), &to_complex(rhs))?;
    debug_assert!(max_imag(&x) <= 1e-6 * (1.0 + super::cfro(&x)));
    Ok(real_part(&x))
}

/// `-K + E1 K E2^T`, the right-hand side of the time-limited Sylvester equation
/// with `K = K1 K2^T` and `Ei = e^{Ai T}`.
pub fn time_limited_rhs(e1: &Mat, k: &Mat, e2: &Mat) -> Mat {
    e1 * k * e2.transpose() - k
}

/// `X = int_0^T e^{A1 s} K1 K2^T e^{A2^T s} ds`, obtained from the Sylvester
/// equation `A1 X + X A2^T = -K1 K2^T + e^{A1 T} K1 K2^T e^{A2^T T}`.
pub fn solve_time_limited_sylvester(
    a1: &Mat,
    a2: &Mat,
    k1: &Mat,
    k2: &Mat,
    horizon: f64,
) -> Result<Mat> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::Validation(format!(
            "time horizon must be finite and non-negative, got {horizon}"
        )));
    }
    let d1 = ensure_square(a1, "solve_time_limited_sylvester A1")?;
    let d2 = ensure_square(a2, "solve_time_limited_sylvester A2")?;
    if k1.nrows() != d1 || k2.nrows() != d2 || k1.ncols() != k2.ncols() {
        return Err(Error::dim(
            "solve_time_limited_sylvester",
            format!(
                "K1 is {}x{}, K2 is {}x{} for A1 {d1}x{d1}, A2 {d2}x{d2}",
                k1.nrows(),
                k1.ncols(),
                k2.nrows(),
                k2.ncols()
            ),
        ));
    }
    let k = k1 * k2.transpose();
    let e1 = super::expm(&(a1 * horizon))?;
    let e2 = super::expm(&(a2 * horizon))?;
    let rhs = time_limited_rhs(&e1, &k, &e2);
    solve_sylvester_real(a1, a2, &rhs)
}

/// Solve `-X D - A X = rhs` for diagonal `D = diag(d)`, column by column:
/// `(-A - d_i I) x_i = rhs_i`.
pub fn solve_shifted_columns(a: &Mat, d: &[C64], rhs: &CMat) -> Result<CMat> {
    let n = ensure_square(a, "solve_shifted_columns")?;
    if rhs.nrows() != n || rhs.ncols() != d.len() {
        return Err(Error::dim(
            "solve_shifted_columns",
            format!(
                "rhs is {}x{}, expected {n}x{}",
                rhs.nrows(),
                rhs.ncols(),
                d.len()
            ),
        ));
    }
    let neg_a = to_complex(a).map(|z| -z);
    let columns: Vec<Result<Vec<C64>>> = (0..d.len())
        .into_par_iter()
        .map(|i| {
            let b = rhs.column(i);
            if b.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                return Ok(vec![C64::new(0.0, 0.0); n]);
            }
            let mut m = neg_a.clone();
            for k in 0..n {
                m[(k, k)] -= d[i];
            }
            let scale = cfro(&m);
            let lu = m.lu();
            let u = lu.u();
            let min_pivot = (0..n).map(|k| u[(k, k)].norm()).fold(f64::INFINITY, f64::min);
            let singular = Error::SingularShift {
                index: i,
                re: d[i].re,
                im: d[i].im,
            };
            if min_pivot <= PIVOT_TOL * scale {
                return Err(singular);
            }
            let x = lu.solve(&b.clone_owned()).ok_or(singular)?;
            Ok(x.iter().copied().collect())
        })
        .collect();

    let mut out = CMat::zeros(n, d.len());
    for (i, col) in columns.into_iter().enumerate() {
        let col = col?;
        out.column_mut(i).copy_from_slice(&col);
    }
    Ok(out)
}

/// Solve `A X + X D = f` for diagonal `D = diag(d)`.
pub fn solve_diag_right(a: &Mat, d: &[C64], f: &CMat) -> Result<CMat> {
    solve_shifted_columns(a, d, &(-f))
}

/// Solve `D Y + Y M^T = f` for diagonal `D = diag(d)`.
pub fn solve_diag_left(m: &Mat, d: &[C64], f: &CMat) -> Result<CMat> {
    Ok(solve_diag_right(m, d, &f.transpose())?.transpose())
}

#[cfg(test)]
mod tests {
    use super::super::kron::{kron, unvec, vec};
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn stable(rng: &mut ChaCha8Rng, n: usize) -> Mat {
        let mut a = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        for i in 0..n {
            a[(i, i)] -= n as f64;
        }
        a
    }

    /// Oracle: explicit Kronecker system `[(I (x) A1) + (A2 (x) I)] vec(X) = vec(R)`.
    fn kron_solve(a1: &CMat, a2: &CMat, rhs: &CMat) -> CMat {
        let (d1, d2) = (a1.nrows(), a2.nrows());
        let op = kron(&CMat::identity(d2, d2), a1) + kron(a2, &CMat::identity(d1, d1));
        let x = op.lu().solve(&vec(rhs)).unwrap();
        unvec(&x, d1, d2)
    }

    #[test]
    fn scalar_equation() {
        let one = CMat::from_element(1, 1, c(-1.0));
        let x = solve_sylvester(&one, &one, &one).unwrap();
        assert_relative_eq!(x[(0, 0)].re, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn decoupled_scalars() {
        let a1 = super::super::cdiag(&[c(-1.0), c(-2.0)]);
        let a2 = CMat::from_element(1, 1, c(-3.0));
        let rhs = CMat::from_element(2, 1, c(-1.0));
        let x = solve_sylvester(&a1, &a2, &rhs).unwrap();
        assert_relative_eq!(x[(0, 0)].re, 0.25, epsilon = 1e-15);
        assert_relative_eq!(x[(1, 0)].re, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn matches_kronecker_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a1 = to_complex(&stable(&mut rng, 5));
        let a2 = to_complex(&stable(&mut rng, 5));
        let rhs = CMat::from_fn(5, 5, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let x = solve_sylvester(&a1, &a2, &rhs).unwrap();
        let oracle = kron_solve(&a1, &a2, &rhs);
        assert!(cfro(&(&x - &oracle)) <= 1e-10 * cfro(&oracle));
        let resid = &a1 * &x + &x * a2.transpose() - &rhs;
        assert!(cfro(&resid) <= 1e-12 * (cfro(&a1) * cfro(&x) * 2.0 + cfro(&rhs)));
    }

    #[test]
    fn overlapping_spectra_are_rejected() {
        let a1 = super::super::cdiag(&[c(1.0), c(-2.0)]);
        let a2 = super::super::cdiag(&[c(-1.0)]);
        let rhs = CMat::from_element(2, 1, c(1.0));
        assert!(matches!(
            solve_sylvester(&a1, &a2, &rhs),
            Err(Error::SingularOperator { .. })
        ));
    }

    #[test]
    fn time_limited_zero_horizon_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a1 = stable(&mut rng, 3);
        let a2 = stable(&mut rng, 2);
        let k1 = Mat::from_fn(3, 2, |_, _| rng.random_range(-1.0..1.0));
        let k2 = Mat::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
        let x = solve_time_limited_sylvester(&a1, &a2, &k1, &k2, 0.0).unwrap();
        assert!(x.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn time_limited_scalar_closed_form() {
        let a = Mat::from_element(1, 1, -1.0);
        let k = Mat::from_element(1, 1, 1.0);
        let x = solve_time_limited_sylvester(&a, &a, &k, &k, 2f64.ln()).unwrap();
        // (1 - e^{-2T}) / 2 with T = ln 2.
        assert_relative_eq!(x[(0, 0)], 0.375, epsilon = 1e-15);
    }

    #[test]
    fn time_limited_rejects_negative_horizon() {
        let a = Mat::from_element(1, 1, -1.0);
        assert!(matches!(
            solve_time_limited_sylvester(&a, &a, &a, &a, -1.0),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn shifted_columns_diagonal() {
        let a = Mat::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
        let rhs = CMat::from_element(2, 1, c(1.0));
        let x = solve_shifted_columns(&a, &[c(-3.0)], &rhs).unwrap();
        // (-A + 3I) x = rhs  =>  x = (1/4, 1/5).
        assert_relative_eq!(x[(0, 0)].re, 0.25, epsilon = 1e-15);
        assert_relative_eq!(x[(1, 0)].re, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn shifted_columns_homogeneous() {
        let a = Mat::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
        let x = solve_shifted_columns(&a, &[c(-3.0)], &CMat::zeros(2, 1)).unwrap();
        assert!(x.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn shifted_columns_match_generic_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = stable(&mut rng, 8);
        let d = vec![C64::new(-0.5, 1.5), C64::new(-0.5, -1.5), C64::new(-2.0, 0.0)];
        let rhs = CMat::from_fn(8, 3, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let x = solve_shifted_columns(&a, &d, &rhs).unwrap();
        let dm = super::super::cdiag(&d);
        let y = solve_sylvester(&to_complex(&(-&a)), &(-dm.transpose()), &rhs).unwrap();
        assert!(cfro(&(&x - &y)) <= 1e-10 * cfro(&y));
        let resid = -(&x * &dm) - to_complex(&a) * &x - &rhs;
        assert!(cfro(&resid) <= 1e-10 * cfro(&rhs));
    }

    #[test]
    fn shift_collision_names_the_shift() {
        let a = Mat::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
        let rhs = CMat::from_element(2, 2, c(1.0));
        match solve_shifted_columns(&a, &[c(-3.0), c(2.0)], &rhs) {
            Err(Error::SingularShift { index, re, .. }) => {
                assert_eq!(index, 1);
                assert_eq!(re, 2.0);
            }
            other => panic!("expected singular shift, got {other:?}"),
        }
    }
}
