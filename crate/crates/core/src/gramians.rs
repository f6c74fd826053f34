//! Time-limited and infinite Gramians of a (full, reduced) pair.

use crate::linalg::{self, expm, solve_diag_left, solve_sylvester_real, to_complex, CMat, Mat};
use crate::system::{LtiSystem, ReducedSystem};
use crate::{Error, Result};

/// The six time-limited Gramians at horizon `horizon`.
///
/// `p`, `p2`, `phat` are reachability-type (`n x n`, `n x r`, `r x r`);
/// `q`, `q2`, `qhat` are observability-type (`n x n`, `r x n`, `r x r`).
#[derive(Debug, Clone)]
pub struct GramianSet {
    pub p: Mat,
    pub p2: Mat,
    pub phat: Mat,
    pub q: Mat,
    pub q2: Mat,
    pub qhat: Mat,
    pub horizon: f64,
}

/// `e^{A T}` and `e^{A^ T}` for one horizon.
#[derive(Debug, Clone)]
pub(crate) struct Exponentials {
    pub full: Mat,
    pub reduced: Mat,
}

impl Exponentials {
    pub fn new(full: &LtiSystem, reduced: &LtiSystem, horizon: f64) -> Result<Self> {
        check_horizon(horizon)?;
        Ok(Self {
            full: expm(&(full.a() * horizon))?,
            reduced: expm(&(reduced.a() * horizon))?,
        })
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::Validation(format!(
            "time horizon must be finite and non-negative, got {horizon}"
        )));
    }
    Ok(())
}

/// Solve `A1 X + X A2^T = -K1 K2^T + E1 K1 K2^T E2^T` with precomputed `Ei`.
fn time_limited(a1: &Mat, a2: &Mat, e1: &Mat, e2: &Mat, k1: &Mat, k2: &Mat, which: &'static str) -> Result<Mat> {
    let k = k1 * k2.transpose();
    let rhs = linalg::time_limited_rhs(e1, &k, e2);
    solve_sylvester_real(a1, a2, &rhs).map_err(Error::gramian(which))
}

fn symmetrize(x: Mat) -> Mat {
    (&x + x.transpose()) * 0.5
}

pub(crate) fn reachability_with(full: &LtiSystem, red: &LtiSystem, ex: &Exponentials) -> Result<(Mat, Mat, Mat)> {
    let (a, ar) = (full.a(), red.a());
    let p = time_limited(a, a, &ex.full, &ex.full, full.b(), full.b(), "P_T")?;
    let p2 = time_limited(a, ar, &ex.full, &ex.reduced, full.b(), red.b(), "P2_T")?;
    let phat = time_limited(ar, ar, &ex.reduced, &ex.reduced, red.b(), red.b(), "Phat_T")?;
    Ok((symmetrize(p), p2, symmetrize(phat)))
}

/// `P_T`, `P2_T`, `Phat_T` only.
pub fn reachability_gramians(full: &LtiSystem, red: &LtiSystem, horizon: f64) -> Result<(Mat, Mat, Mat)> {
    full.ensure_io_compatible(red)?;
    let ex = Exponentials::new(full, red, horizon)?;
    reachability_with(full, red, &ex)
}

/// Infinite-horizon `P`, `P2`, `Phat` (right-hand sides without the exponential terms).
pub fn infinite_reachability_gramians(full: &LtiSystem, red: &LtiSystem) -> Result<(Mat, Mat, Mat)> {
    full.ensure_io_compatible(red)?;
    let (a, ar, b, br) = (full.a(), red.a(), full.b(), red.b());
    let p = solve_sylvester_real(a, a, &-(b * b.transpose())).map_err(Error::gramian("P_inf"))?;
    let p2 = solve_sylvester_real(a, ar, &-(b * br.transpose())).map_err(Error::gramian("P2_inf"))?;
    let phat = solve_sylvester_real(ar, ar, &-(br * br.transpose())).map_err(Error::gramian("Phat_inf"))?;
    Ok((symmetrize(p), p2, symmetrize(phat)))
}

pub(crate) fn gramian_set_with(full: &LtiSystem, red: &LtiSystem, ex: &Exponentials, horizon: f64) -> Result<GramianSet> {
    let (p, p2, phat) = reachability_with(full, red, ex)?;
    let (at, art) = (full.a().transpose(), red.a().transpose());
    let (eat, eart) = (ex.full.transpose(), ex.reduced.transpose());
    let (ct, crt) = (full.c().transpose(), red.c().transpose());
    let q = time_limited(&at, &at, &eat, &eat, &ct, &ct, "Q_T")?;
    let q2 = time_limited(&art, &at, &eart, &eat, &crt, &ct, "Q2_T")?;
    let qhat = time_limited(&art, &art, &eart, &eart, &crt, &crt, "Qhat_T")?;
    Ok(GramianSet {
        p,
        p2,
        phat,
        q: symmetrize(q),
        q2,
        qhat: symmetrize(qhat),
        horizon,
    })
}

/// Solve all six time-limited Gramian equations.
pub fn compute_gramian_set(full: &LtiSystem, red: &LtiSystem, horizon: f64) -> Result<GramianSet> {
    full.ensure_io_compatible(red)?;
    let ex = Exponentials::new(full, red, horizon)?;
    gramian_set_with(full, red, &ex, horizon)
}

/// `||A1 X + X A2^T - R||_F / (||A1|| ||X|| + ||X|| ||A2|| + ||R||)`.
pub fn sylvester_residual(a1: &Mat, a2: &Mat, rhs: &Mat, x: &Mat) -> f64 {
    let res = a1 * x + x * a2.transpose() - rhs;
    let scale = (a1.norm() + a2.norm()) * x.norm() + rhs.norm();
    if scale == 0.0 {
        0.0
    } else {
        res.norm() / scale
    }
}

impl GramianSet {
    /// Relative residuals of the six defining equations, in field order.
    pub fn residuals(&self, full: &LtiSystem, red: &LtiSystem) -> Result<[f64; 6]> {
        let ex = Exponentials::new(full, red, self.horizon)?;
        let (a, ar) = (full.a(), red.a());
        let (at, art) = (a.transpose(), ar.transpose());
        let (eat, eart) = (ex.full.transpose(), ex.reduced.transpose());
        let (b, br) = (full.b(), red.b());
        let (ct, crt) = (full.c().transpose(), red.c().transpose());
        let rhs = |e1: &Mat, k1: &Mat, k2: &Mat, e2: &Mat| linalg::time_limited_rhs(e1, &(k1 * k2.transpose()), e2);
        Ok([
            sylvester_residual(a, a, &rhs(&ex.full, b, b, &ex.full), &self.p),
            sylvester_residual(a, ar, &rhs(&ex.full, b, br, &ex.reduced), &self.p2),
            sylvester_residual(ar, ar, &rhs(&ex.reduced, br, br, &ex.reduced), &self.phat),
            sylvester_residual(&at, &at, &rhs(&eat, &ct, &ct, &eat), &self.q),
            sylvester_residual(&art, &at, &rhs(&eart, &crt, &ct, &eat), &self.q2),
            sylvester_residual(&art, &art, &rhs(&eart, &crt, &crt, &eart), &self.qhat),
        ])
    }
}

/// Two sides of one trace identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePair {
    pub lhs: f64,
    pub rhs: f64,
}

impl TracePair {
    /// `|lhs - rhs| / max(|lhs|, |rhs|)`, zero when both vanish.
    pub fn relative_gap(&self) -> f64 {
        let scale = self.lhs.abs().max(self.rhs.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.lhs - self.rhs).abs() / scale
        }
    }
}

/// `tr(C P C^T) = tr(B^T Q B)`, `tr(C^ P^ C^^T) = tr(B^^T Q^ B^)` and
/// `tr(C P2 C^^T) = tr(B^^T Q2 B)`.
pub fn trace_identities(full: &LtiSystem, red: &LtiSystem, set: &GramianSet) -> [TracePair; 3] {
    let (b, c, br, cr) = (full.b(), full.c(), red.b(), red.c());
    [
        TracePair {
            lhs: (c * &set.p * c.transpose()).trace(),
            rhs: (b.transpose() * &set.q * b).trace(),
        },
        TracePair {
            lhs: (cr * &set.phat * cr.transpose()).trace(),
            rhs: (br.transpose() * &set.qhat * br).trace(),
        },
        TracePair {
            lhs: (c * &set.p2 * cr.transpose()).trace(),
            rhs: (br.transpose() * &set.q2 * b).trace(),
        },
    ]
}

/// `Q~_inf` (`r x r`) and `Q~2_inf` (`r x n`) in the spectral coordinates of the reduced model.
#[derive(Debug, Clone)]
pub struct InfiniteGramians {
    pub q_tilde: CMat,
    pub q2_tilde: CMat,
}

/// Solve `D Q + Q D = -C~^T C~` entrywise and `D Q2 + Q2 A = -C~^T C`.
pub fn compute_infinite_gramians(red: &ReducedSystem, full: &LtiSystem) -> Result<InfiniteGramians> {
    red.check_pairing(full)?;
    let d = red.eigenvalues();
    let ct = red.c_tilde();
    let ctc = ct.transpose() * ct;
    let scale = d.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = 1e-12 * 2.0 * scale;
    let r = d.len();
    let mut q = CMat::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            let s = d[i] + d[j];
            if s.norm() <= tol {
                return Err(Error::gramian("Qtilde_inf")(Error::SingularOperator {
                    min_sum: s.norm(),
                    tolerance: tol,
                }));
            }
            q[(i, j)] = -ctc[(i, j)] / s;
        }
    }
    let rhs = -(ct.transpose() * to_complex(full.c()));
    let q2 = solve_diag_left(&full.a().transpose(), d, &rhs).map_err(Error::gramian("Qtilde2_inf"))?;
    Ok(InfiniteGramians { q_tilde: q, q2_tilde: q2 })
}

impl InfiniteGramians {
    /// Relative residuals of the two defining equations.
    pub fn residuals(&self, red: &ReducedSystem, full: &LtiSystem) -> [f64; 2] {
        let d = red.eigenvalues();
        let ct = red.c_tilde();
        let a = to_complex(full.a());
        let dq = linalg::scale_rows(d, &self.q_tilde);
        let r1 = &dq + dq.transpose() + ct.transpose() * ct;
        let dq2 = linalg::scale_rows(d, &self.q2_tilde);
        let rhs2 = ct.transpose() * to_complex(full.c());
        let r2 = &dq2 + &self.q2_tilde * &a + &rhs2;
        let dn = linalg::cfro(&linalg::cdiag(d));
        [
            relative(&r1, 2.0 * dn * linalg::cfro(&self.q_tilde) + linalg::cfro(&(ct.transpose() * ct))),
            relative(&r2, (dn + a.norm()) * linalg::cfro(&self.q2_tilde) + linalg::cfro(&rhs2)),
        ]
    }
}

fn relative(res: &CMat, scale: f64) -> f64 {
    if scale == 0.0 {
        0.0
    } else {
        linalg::cfro(res) / scale
    }
}

/// Gramians in the spectral coordinates of the reduced model.
///
/// `P~ = S P^ S^T`, `P~2 = P2 S^T`, `Q~ = S^{-T} Q^ S^{-1}`, `Q~2 = S^{-T} Q2`.
#[derive(Debug, Clone)]
pub struct TransformedGramians {
    pub p_tilde: CMat,
    pub p2_tilde: CMat,
    pub q_tilde: CMat,
    pub q2_tilde: CMat,
}

pub fn transformed_gramians(red: &ReducedSystem, set: &GramianSet) -> Result<TransformedGramians> {
    let sp = red.spectral();
    let kappa = sp.condition_number();
    if !(kappa <= linalg::DIAGONALIZABLE_LIMIT) {
        return Err(Error::Conditioning { condition: kappa });
    }
    let r = red.order();
    if set.phat.nrows() != r || set.p2.ncols() != r || set.q2.nrows() != r {
        return Err(Error::dim(
            "transformed_gramians",
            format!("Gramian set does not match reduced order {r}"),
        ));
    }
    let s = sp.s();
    let si = sp.s_inv();
    Ok(TransformedGramians {
        p_tilde: s * to_complex(&set.phat) * s.transpose(),
        p2_tilde: to_complex(&set.p2) * s.transpose(),
        q_tilde: si.transpose() * to_complex(&set.qhat) * si,
        q2_tilde: si.transpose() * to_complex(&set.q2),
    })
}

impl TransformedGramians {
    /// Relative residuals of the four transformed Sylvester equations:
    /// `A P~2 + P~2 D`, `D P~ + P~ D`, `D Q~2 + Q~2 A`, `D Q~ + Q~ D`, each
    /// against `-K + E1 K E2`.
    pub fn residuals(&self, full: &LtiSystem, red: &ReducedSystem, horizon: f64) -> Result<[f64; 4]> {
        let d = red.eigenvalues();
        let ed = linalg::exp_diag(d, horizon);
        let a = to_complex(full.a());
        let ea = to_complex(&expm(&(full.a() * horizon))?);
        let b = to_complex(full.b());
        let c = to_complex(full.c());
        let (bt, ct) = (red.b_tilde(), red.c_tilde());
        let dn = linalg::cfro(&linalg::cdiag(d));
        let an = a.norm();

        let k = &b * bt.transpose();
        let rhs = &ea * linalg::scale_cols(&k, &ed) - &k;
        let res = &a * &self.p2_tilde + linalg::scale_cols(&self.p2_tilde, d) - &rhs;
        let e33 = relative(&res, (an + dn) * linalg::cfro(&self.p2_tilde) + linalg::cfro(&rhs));

        let k = bt * bt.transpose();
        let rhs = linalg::scale_cols(&linalg::scale_rows(&ed, &k), &ed) - &k;
        let res = linalg::scale_rows(d, &self.p_tilde) + linalg::scale_cols(&self.p_tilde, d) - &rhs;
        let e34 = relative(&res, 2.0 * dn * linalg::cfro(&self.p_tilde) + linalg::cfro(&rhs));

        let k = ct.transpose() * &c;
        let rhs = linalg::scale_rows(&ed, &k) * &ea - &k;
        let res = linalg::scale_rows(d, &self.q2_tilde) + &self.q2_tilde * &a - &rhs;
        let e39 = relative(&res, (an + dn) * linalg::cfro(&self.q2_tilde) + linalg::cfro(&rhs));

        let k = ct.transpose() * ct;
        let rhs = linalg::scale_cols(&linalg::scale_rows(&ed, &k), &ed) - &k;
        let res = linalg::scale_rows(d, &self.q_tilde) + linalg::scale_cols(&self.q_tilde, d) - &rhs;
        let e310 = relative(&res, 2.0 * dn * linalg::cfro(&self.q_tilde) + linalg::cfro(&rhs));

        Ok([e33, e34, e39, e310])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{SpectralDecomposition, C64};
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(a: f64, b: f64, c: f64) -> LtiSystem {
        LtiSystem::new(
            Mat::from_element(1, 1, a),
            Mat::from_element(1, 1, b),
            Mat::from_element(1, 1, c),
            "scalar",
        )
        .unwrap()
    }

    fn random_system(rng: &mut ChaCha8Rng, n: usize, m: usize, p: usize) -> LtiSystem {
        let mut a = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        for i in 0..n {
            a[(i, i)] -= n as f64 * 0.8;
        }
        let b = Mat::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        let c = Mat::from_fn(p, n, |_, _| rng.random_range(-1.0..1.0));
        LtiSystem::new(a, b, c, "random").unwrap()
    }

    #[test]
    fn zero_horizon_gives_zero_set() {
        let s = scalar(-1.0, 1.0, 1.0);
        let set = compute_gramian_set(&s, &s, 0.0).unwrap();
        for m in [&set.p, &set.p2, &set.phat, &set.q, &set.q2, &set.qhat] {
            assert_eq!(m.norm(), 0.0);
        }
    }

    #[test]
    fn scalar_closed_form() {
        let s = scalar(-1.0, 1.0, 1.0);
        let set = compute_gramian_set(&s, &s, 2f64.ln()).unwrap();
        for m in [&set.p, &set.p2, &set.phat, &set.q, &set.q2, &set.qhat] {
            assert_relative_eq!(m[(0, 0)], 0.375, epsilon = 1e-15);
        }
        for pair in trace_identities(&s, &s, &set) {
            assert_relative_eq!(pair.lhs, 0.375, epsilon = 1e-15);
            assert_relative_eq!(pair.rhs, 0.375, epsilon = 1e-15);
        }
    }

    #[test]
    fn set_residuals_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let full = random_system(&mut rng, 6, 2, 2);
        let red = random_system(&mut rng, 2, 2, 2);
        let set = compute_gramian_set(&full, &red, 1.0).unwrap();
        for r in set.residuals(&full, &red).unwrap() {
            assert!(r < 1e-12, "residual {r}");
        }
        assert_eq!(set.p, set.p.transpose());
        assert_eq!(set.q, set.q.transpose());
        for pair in trace_identities(&full, &red, &set) {
            assert!(pair.relative_gap() < 1e-10);
        }
    }

    #[test]
    fn io_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let full = random_system(&mut rng, 4, 2, 1);
        let red = random_system(&mut rng, 2, 1, 1);
        assert!(compute_gramian_set(&full, &red, 1.0).is_err());
    }

    #[test]
    fn overlap_names_the_gramian() {
        // Eigenvalues 1 and -1 make A (+) A^ singular for the cross Gramian.
        let full = LtiSystem::new(
            Mat::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0])),
            Mat::from_element(2, 1, 1.0),
            Mat::from_element(1, 2, 1.0),
            "f",
        )
        .unwrap();
        let red = scalar(1.0, 1.0, 1.0);
        match compute_gramian_set(&full, &red, 1.0) {
            Err(Error::Gramian { which, .. }) => assert_eq!(which, "P2_T"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn infinite_gramian_entrywise() {
        // Keep D = diag(-1, -2) as given rather than the canonical order.
        let base = LtiSystem::new(
            Mat::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0])),
            Mat::from_element(2, 1, 1.0),
            Mat::from_row_slice(1, 2, &[1.0, 1.0]),
            "r",
        )
        .unwrap();
        let eigs = vec![C64::new(-1.0, 0.0), C64::new(-2.0, 0.0)];
        let spectral = SpectralDecomposition::from_eigenvectors(eigs, CMat::identity(2, 2)).unwrap();
        let red = ReducedSystem::with_spectral(base, spectral).unwrap();
        let full = LtiSystem::new(
            Mat::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0, -3.0])),
            Mat::from_element(3, 1, 1.0),
            Mat::from_element(1, 3, 1.0),
            "f",
        )
        .unwrap();
        let inf = compute_infinite_gramians(&red, &full).unwrap();
        let expected = [[0.5, 1.0 / 3.0], [1.0 / 3.0, 0.25]];
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(inf.q_tilde[(i, j)].re, expected[i][j], epsilon = 1e-15);
                assert_eq!(inf.q_tilde[(i, j)].im, 0.0);
            }
        }
        for r in inf.residuals(&red, &full) {
            assert!(r < 1e-14);
        }
    }

    #[test]
    fn scalar_congruence() {
        let s = scalar(-1.0, 1.0, 1.0);
        let d = vec![C64::new(-1.0, 0.0)];
        let spectral = SpectralDecomposition::from_eigenvectors(d, CMat::from_element(1, 1, C64::new(0.5, 0.0))).unwrap();
        let red = ReducedSystem::with_spectral(s.clone(), spectral).unwrap();
        let set = compute_gramian_set(&s, red.base(), 1.0).unwrap();
        let t = transformed_gramians(&red, &set).unwrap();
        assert_relative_eq!(t.p_tilde[(0, 0)].re, 4.0 * set.phat[(0, 0)], epsilon = 1e-15);
        assert_relative_eq!(t.q_tilde[(0, 0)].re, set.qhat[(0, 0)] / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn transformed_residuals_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let full = random_system(&mut rng, 6, 1, 2);
        let red = ReducedSystem::new(random_system(&mut rng, 3, 1, 2)).unwrap();
        let set = compute_gramian_set(&full, red.base(), 1.0).unwrap();
        let t = transformed_gramians(&red, &set).unwrap();
        for r in t.residuals(&full, &red, 1.0).unwrap() {
            assert!(r < 1e-9, "residual {r}");
        }
    }
}
