//! IRKA and its time-limited counterpart.

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{
    self, expm, solve_shifted_columns, to_complex, CMat, ColumnKind, Mat, C64,
};
use crate::system::{LtiSystem, ReducedSystem};
use crate::{Error, Result};

/// Limit on `kappa(W^T V)` before the projection is declared broken.
pub const PROJECTION_LIMIT: f64 = 1e12;

const RANK_TOL: f64 = 1e-12;
const PAIR_TOL: f64 = 1e-8;
const IMAG_DUST: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Irka,
    #[serde(rename = "tlirka")]
    TlIrka,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Irka => "irka",
            Method::TlIrka => "tlirka",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Irka => "IRKA",
            Method::TlIrka => "TL-IRKA",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 100,
        }
    }
}

/// Petrov–Galerkin bases with orthonormal columns.
#[derive(Debug, Clone)]
pub struct ProjectionPair {
    pub v: Mat,
    pub w: Mat,
    /// Condition number of `W^T V`.
    pub condition: f64,
}

impl ProjectionPair {
    /// The oblique projector `V (W^T V)^{-1} W^T`, formed densely.
    pub fn projector(&self) -> Result<Mat> {
        let wtv = self.w.transpose() * &self.v;
        let inv = wtv
            .try_inverse()
            .ok_or(Error::ProjectionBreakdown { condition: f64::INFINITY })?;
        Ok(&self.v * inv * self.w.transpose())
    }

    /// Reduced triple `((W^T V)^{-1} W^T A V, (W^T V)^{-1} W^T B, C V)`.
    pub fn project(&self, sys: &LtiSystem) -> Result<(Mat, Mat, Mat)> {
        let wtv = self.w.transpose() * &self.v;
        let lu = wtv.lu();
        let breakdown = Error::ProjectionBreakdown { condition: self.condition };
        let a = lu
            .solve(&(self.w.transpose() * sys.a() * &self.v))
            .ok_or(breakdown)?;
        let b = lu
            .solve(&(self.w.transpose() * sys.b()))
            .ok_or(Error::ProjectionBreakdown { condition: self.condition })?;
        Ok((a, b, sys.c() * &self.v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub eigenvalues: Vec<(f64, f64)>,
    pub convergence: f64,
    pub hurwitz: bool,
}

#[derive(Debug, Clone)]
pub struct ReductionRun {
    pub reduced: ReducedSystem,
    pub projection: ProjectionPair,
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    pub method: Method,
    pub seed: Option<u64>,
    pub horizon: Option<f64>,
    pub elapsed_seconds: f64,
}

impl ReductionRun {
    /// The final model is not Hurwitz.
    pub fn degraded(&self) -> bool {
        !self.reduced.base().stability().is_hurwitz
    }
}

/// Where IRKA starts.
#[derive(Debug, Clone)]
pub enum InitialGuess {
    Random { seed: u64 },
    Given(ReducedSystem),
}

/// Seeded random start: diagonal `A^` with eigenvalues `-10^u`, `u ~ U(-2, 2)`,
/// and standard normal `B^`, `C^`.
pub fn random_initial(sys: &LtiSystem, r: usize, seed: u64) -> Result<ReducedSystem> {
    check_order(sys, r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eigs: Vec<f64> = (0..r).map(|_| -10f64.powf(rng.random_range(-2.0..2.0))).collect();
    eigs.sort_by(f64::total_cmp);
    let a = Mat::from_diagonal(&nalgebra::DVector::from_vec(eigs));
    let b = Mat::from_fn(r, sys.m(), |_, _| rng.sample(StandardNormal));
    let c = Mat::from_fn(sys.p(), r, |_, _| rng.sample(StandardNormal));
    ReducedSystem::from_matrices(a, b, c, format!("random init (seed {seed})"))
}

fn check_order(sys: &LtiSystem, r: usize) -> Result<()> {
    if r == 0 || r > sys.n() {
        return Err(Error::Validation(format!(
            "reduced order must be in 1..={}, got {r}",
            sys.n()
        )));
    }
    Ok(())
}

/// `max_i |l_i - l'_i| / |l'_i|` with `l'` the current iterate, both in canonical order.
pub fn convergence_measure(prev: &[C64], curr: &[C64]) -> f64 {
    if prev.len() != curr.len() {
        return f64::INFINITY;
    }
    prev.iter()
        .zip(curr)
        .map(|(p, c)| (p - c).norm() / c.norm().max(1e-300))
        .fold(0.0, f64::max)
}

/// Replace each conjugate column pair `(v, conj v)` by `(sqrt2 Re v, sqrt2 Im v)`.
pub fn realify_basis(vc: &CMat, kinds: &[ColumnKind]) -> Result<Mat> {
    if kinds.len() != vc.ncols() {
        return Err(Error::dim(
            "realify_basis",
            format!("{} columns but {} column kinds", vc.ncols(), kinds.len()),
        ));
    }
    let s2 = std::f64::consts::SQRT_2;
    let mut out = Mat::zeros(vc.nrows(), vc.ncols());
    let mut j = 0;
    while j < kinds.len() {
        let col = vc.column(j);
        let scale = col.norm().max(f64::MIN_POSITIVE);
        match kinds[j] {
            ColumnKind::Real => {
                if col.iter().any(|z| z.im.abs() > IMAG_DUST * scale) {
                    return Err(Error::Pairing { column: j });
                }
                out.column_mut(j).copy_from(&col.map(|z| z.re));
                j += 1;
            }
            ColumnKind::PairLeading => {
                if j + 1 >= kinds.len() || kinds[j + 1] != ColumnKind::PairTrailing {
                    return Err(Error::Pairing { column: j });
                }
                let partner = vc.column(j + 1);
                let gap = col
                    .iter()
                    .zip(partner.iter())
                    .map(|(a, b)| (a.conj() - b).norm())
                    .fold(0.0, f64::max);
                if gap > PAIR_TOL * scale {
                    return Err(Error::Pairing { column: j });
                }
                out.column_mut(j).copy_from(&col.map(|z| s2 * z.re));
                out.column_mut(j + 1).copy_from(&col.map(|z| s2 * z.im));
                j += 2;
            }
            ColumnKind::PairTrailing => return Err(Error::Pairing { column: j }),
        }
    }
    Ok(out)
}

/// Orthonormal basis for the column span via column-pivoted QR.
pub fn orthonormalize(x: &Mat) -> Result<Mat> {
    let r = x.ncols();
    let qr = x.clone().col_piv_qr();
    let rr = qr.r();
    let lead = rr[(0, 0)].abs();
    let rank = (0..r.min(x.nrows()))
        .take_while(|&k| rr[(k, k)].abs() > RANK_TOL * lead && lead > 0.0)
        .count();
    if rank < r {
        return Err(Error::RankDeficient { rank, expected: r });
    }
    Ok(qr.q().columns(0, r).clone_owned())
}

struct Horizon {
    t: f64,
    ea: Mat,
}

/// Right-hand sides of the shifted solves for the current spectral form.
fn basis_rhs(sys: &LtiSystem, red: &ReducedSystem, horizon: Option<&Horizon>) -> (CMat, CMat) {
    let b = to_complex(sys.b());
    let ct = to_complex(&sys.c().transpose());
    let kv = &b * red.b_tilde().transpose();
    let kw = &ct * red.c_tilde();
    match horizon {
        None => (kv, kw),
        Some(h) => {
            let ed = linalg::exp_diag(red.eigenvalues(), h.t);
            let ea = to_complex(&h.ea);
            let eat = ea.transpose();
            let v = &kv - &ea * linalg::scale_cols(&kv, &ed);
            let w = &kw - eat * linalg::scale_cols(&kw, &ed);
            (v, w)
        }
    }
}

fn solve_bases(sys: &LtiSystem, red: &ReducedSystem, horizon: Option<&Horizon>) -> Result<(CMat, CMat)> {
    let d = red.eigenvalues();
    let (rv, rw) = basis_rhs(sys, red, horizon);
    let at = sys.a().transpose();
    let (v, w) = rayon::join(
        || solve_shifted_columns(sys.a(), d, &rv),
        || solve_shifted_columns(&at, d, &rw),
    );
    Ok((v?, w?))
}

/// Complex bases `V`, `W` of one iteration, before realification:
/// `-V D - A V = B B~^T - e^{AT} B B~^T e^{DT}` and the dual equation for `W`.
/// Without a horizon the exponential terms are dropped.
pub fn interpolation_bases(sys: &LtiSystem, red: &ReducedSystem, horizon: Option<f64>) -> Result<(CMat, CMat)> {
    let h = match horizon {
        Some(t) => Some(Horizon {
            t,
            ea: expm(&(sys.a() * t))?,
        }),
        None => None,
    };
    solve_bases(sys, red, h.as_ref())
}

fn iterate(
    sys: &LtiSystem,
    r: usize,
    init: &ReducedSystem,
    horizon: Option<f64>,
    opts: &ReductionOptions,
    method: Method,
    seed: Option<u64>,
) -> Result<ReductionRun> {
    check_order(sys, r)?;
    if init.order() != r {
        return Err(Error::Validation(format!(
            "initial model has order {}, expected {r}",
            init.order()
        )));
    }
    init.check_pairing(sys)?;
    if !(opts.tolerance > 0.0) {
        return Err(Error::Validation("tolerance must be positive".into()));
    }
    let start = Instant::now();
    let h = match horizon {
        Some(t) if t > 0.0 && t.is_finite() => Some(Horizon {
            t,
            ea: expm(&(sys.a() * t))?,
        }),
        Some(t) => return Err(Error::Validation(format!("horizon must be positive, got {t}"))),
        None => None,
    };

    let mut current = init.clone();
    let mut iterations = Vec::new();
    let mut projection = None;
    let mut converged = false;
    for k in 1..=opts.max_iterations {
        let (vc, wc) = solve_bases(sys, &current, h.as_ref())?;
        let kinds = current.spectral().kinds();
        let v = orthonormalize(&realify_basis(&vc, kinds)?)?;
        let w = orthonormalize(&realify_basis(&wc, kinds)?)?;
        let condition = linalg::condition_number_real(&(w.transpose() * &v));
        if !(condition <= PROJECTION_LIMIT) {
            return Err(Error::ProjectionBreakdown { condition });
        }
        let pair = ProjectionPair { v, w, condition };
        let (a, b, c) = pair.project(sys)?;
        let next = ReducedSystem::from_matrices(a, b, c, format!("{method} iterate {k}"))?;
        let measure = convergence_measure(current.eigenvalues(), next.eigenvalues());
        iterations.push(IterationRecord {
            iteration: k,
            eigenvalues: next.eigenvalues().iter().map(|z| (z.re, z.im)).collect(),
            convergence: measure,
            hurwitz: next.base().stability().is_hurwitz,
        });
        current = next;
        projection = Some(pair);
        if measure < opts.tolerance {
            converged = true;
            break;
        }
    }
    let projection = projection.ok_or_else(|| Error::Validation("max_iterations must be at least 1".into()))?;
    let label = match method {
        Method::Irka => "IRKA",
        Method::TlIrka => "TL-IRKA",
    };
    let base = current.base().clone().with_label(label);
    let reduced = ReducedSystem::with_spectral(base, current.spectral().clone())?;
    Ok(ReductionRun {
        reduced,
        projection,
        iterations,
        converged,
        method,
        seed,
        horizon,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Conventional (infinite-horizon) IRKA.
pub fn irka(sys: &LtiSystem, r: usize, init: InitialGuess, opts: &ReductionOptions) -> Result<ReductionRun> {
    let (start, seed) = match init {
        InitialGuess::Random { seed } => (random_initial(sys, r, seed)?, Some(seed)),
        InitialGuess::Given(red) => (red, None),
    };
    iterate(sys, r, &start, None, opts, Method::Irka, seed)
}

/// Time-limited IRKA-type iteration on `[0, horizon]`.
pub fn tl_irka(
    sys: &LtiSystem,
    r: usize,
    horizon: f64,
    init: &ReducedSystem,
    opts: &ReductionOptions,
) -> Result<ReductionRun> {
    iterate(sys, r, init, Some(horizon), opts, Method::TlIrka, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn diag_system() -> LtiSystem {
        LtiSystem::new(
            Mat::from_diagonal(&DVector::from_vec(vec![-1.0, -10.0])),
            Mat::from_element(2, 1, 1.0),
            Mat::from_element(1, 2, 1.0),
            "diag",
        )
        .unwrap()
    }

    #[test]
    fn measure_examples() {
        assert_eq!(convergence_measure(&[c(-1.0, 0.0)], &[c(-1.0, 0.0)]), 0.0);
        assert_relative_eq!(convergence_measure(&[c(-1.0, 0.0)], &[c(-1.1, 0.0)]), 0.1 / 1.1, epsilon = 1e-15);
    }

    #[test]
    fn realify_real_passthrough() {
        let vc = CMat::from_fn(3, 2, |i, j| c((i + j) as f64, 0.0));
        let out = realify_basis(&vc, &[ColumnKind::Real, ColumnKind::Real]).unwrap();
        assert_eq!(out, linalg::real_part(&vc));
    }

    #[test]
    fn realify_pair() {
        let v = [c(1.0, 1.0), c(1.0, -1.0)];
        let vc = CMat::from_fn(2, 2, |i, j| if j == 0 { v[i] } else { v[i].conj() });
        let out = realify_basis(&vc, &[ColumnKind::PairLeading, ColumnKind::PairTrailing]).unwrap();
        let s = std::f64::consts::SQRT_2;
        assert_eq!(out, Mat::from_row_slice(2, 2, &[s, s, s, -s]));
    }

    #[test]
    fn realify_rejects_unpaired() {
        let vc = CMat::from_fn(2, 2, |i, _| c(1.0, i as f64));
        let err = realify_basis(&vc, &[ColumnKind::PairLeading, ColumnKind::PairTrailing]).unwrap_err();
        assert!(matches!(err, Error::Pairing { column: 0 }));
        let err = realify_basis(&vc, &[ColumnKind::Real, ColumnKind::Real]).unwrap_err();
        assert!(matches!(err, Error::Pairing { column: 0 }));
    }

    #[test]
    fn orthonormalize_checks_rank() {
        let x = Mat::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!(matches!(orthonormalize(&x), Err(Error::RankDeficient { rank: 1, expected: 2 })));
        let q = orthonormalize(&Mat::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 1.0])).unwrap();
        assert_relative_eq!(q.transpose() * &q, Mat::identity(2, 2), epsilon = 1e-14);
    }

    #[test]
    fn random_initial_is_deterministic_and_stable() {
        let sys = diag_system();
        let a = random_initial(&sys, 2, 3).unwrap();
        let b = random_initial(&sys, 2, 3).unwrap();
        assert_eq!(a.base().a(), b.base().a());
        assert_eq!(a.base().b(), b.base().b());
        assert!(a.base().stability().is_hurwitz);
        for z in a.eigenvalues() {
            assert!(z.re <= -1e-2 && z.re >= -1e2);
        }
    }

    #[test]
    fn full_order_is_a_fixed_point() {
        let sys = diag_system();
        let init = ReducedSystem::new(sys.clone()).unwrap();
        let run = irka(&sys, 2, InitialGuess::Given(init.clone()), &ReductionOptions::default()).unwrap();
        assert!(run.converged);
        assert_eq!(run.iterations.len(), 1);
        let run = tl_irka(&sys, 2, 1.0, &init, &ReductionOptions::default()).unwrap();
        assert!(run.converged);
        assert_eq!(run.iterations.len(), 1);
    }

    #[test]
    fn order_validation() {
        let sys = diag_system();
        assert!(irka(&sys, 0, InitialGuess::Random { seed: 0 }, &ReductionOptions::default()).is_err());
        assert!(irka(&sys, 3, InitialGuess::Random { seed: 0 }, &ReductionOptions::default()).is_err());
    }

    #[test]
    fn non_convergence_is_reported() {
        let sys = diag_system();
        let opts = ReductionOptions {
            tolerance: 1e-300,
            max_iterations: 2,
        };
        let run = irka(&sys, 1, InitialGuess::Random { seed: 1 }, &opts).unwrap();
        assert!(!run.converged);
        assert_eq!(run.iterations.len(), 2);
    }
}
