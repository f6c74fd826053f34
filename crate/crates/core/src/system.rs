//! State-space systems, impulse responses and time-limited H2 error norms.

use nalgebra::DVector;

use crate::gramians;
use crate::linalg::{self, eig, expm, CMat, Mat, SpectralDecomposition};
use crate::{Error, Result};

/// Outcome of the Hurwitz test on a state matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurwitzReport {
    pub max_real_eigenvalue: f64,
    pub is_hurwitz: bool,
}

/// `x' = A x + B u`, `y = C x`, `x(0) = 0`.
#[derive(Debug, Clone)]
pub struct LtiSystem {
    a: Mat,
    b: Mat,
    c: Mat,
    label: String,
    stability: HurwitzReport,
}

impl LtiSystem {
    pub fn new(a: Mat, b: Mat, c: Mat, label: impl Into<String>) -> Result<Self> {
        let n = linalg::ensure_square(&a, "LtiSystem A")?;
        if n == 0 {
            return Err(Error::Validation("state dimension must be at least 1".into()));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::dim(
                "LtiSystem B",
                format!("B is {}x{}, expected {n} rows", b.nrows(), b.ncols()),
            ));
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(Error::dim(
                "LtiSystem C",
                format!("C is {}x{}, expected {n} columns", c.nrows(), c.ncols()),
            ));
        }
        for (name, m) in [("A", &a), ("B", &b), ("C", &c)] {
            linalg::ensure_finite(m, name)?;
        }
        let stability = hurwitz_report(&a);
        Ok(Self {
            a,
            b,
            c,
            label: label.into(),
            stability,
        })
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn b(&self) -> &Mat {
        &self.b
    }

    pub fn c(&self) -> &Mat {
        &self.c
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Number of inputs.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// Number of outputs.
    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn stability(&self) -> HurwitzReport {
        self.stability
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub(crate) fn ensure_io_compatible(&self, other: &LtiSystem) -> Result<()> {
        if self.m() != other.m() || self.p() != other.p() {
            return Err(Error::dim(
                "system pairing",
                format!(
                    "{} has (m, p) = ({}, {}), {} has ({}, {})",
                    self.label,
                    self.m(),
                    self.p(),
                    other.label,
                    other.m(),
                    other.p()
                ),
            ));
        }
        Ok(())
    }
}

fn hurwitz_report(a: &Mat) -> HurwitzReport {
    let max_re = a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    // Eigenvalues on the imaginary axis come back with roundoff of either sign.
    let margin = 1e-13 * a.norm();
    HurwitzReport {
        max_real_eigenvalue: max_re,
        is_hurwitz: max_re < -margin,
    }
}

/// Stability report for the state matrix. Never fails; reduced iterates are
/// allowed to be unstable.
pub fn validate_hurwitz(sys: &LtiSystem) -> HurwitzReport {
    sys.stability
}

/// Reduced model together with its spectral form `(D, B~, C~)`.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    base: LtiSystem,
    spectral: SpectralDecomposition,
    b_tilde: CMat,
    c_tilde: CMat,
}

impl ReducedSystem {
    pub fn new(base: LtiSystem) -> Result<Self> {
        let spectral = eig(base.a())?;
        Self::with_spectral(base, spectral)
    }

    /// Attach a caller-supplied eigendecomposition of `A^`.
    pub fn with_spectral(base: LtiSystem, spectral: SpectralDecomposition) -> Result<Self> {
        if spectral.order() != base.n() {
            return Err(Error::dim(
                "ReducedSystem",
                format!(
                    "decomposition of order {} for a system of order {}",
                    spectral.order(),
                    base.n()
                ),
            ));
        }
        let residual = spectral.reconstruction_residual(base.a());
        let tol = 1e-10 * spectral.condition_number().max(1.0);
        if residual > tol {
            return Err(Error::Validation(format!(
                "spectral decomposition does not reproduce A^: residual {residual:.3e}"
            )));
        }
        let b_tilde = spectral.s() * linalg::to_complex(base.b());
        let c_tilde = linalg::to_complex(base.c()) * spectral.s_inv();
        Ok(Self {
            base,
            spectral,
            b_tilde,
            c_tilde,
        })
    }

    pub fn from_matrices(a: Mat, b: Mat, c: Mat, label: impl Into<String>) -> Result<Self> {
        Self::new(LtiSystem::new(a, b, c, label)?)
    }

    pub fn base(&self) -> &LtiSystem {
        &self.base
    }

    pub fn spectral(&self) -> &SpectralDecomposition {
        &self.spectral
    }

    /// `B~ = S B^`.
    pub fn b_tilde(&self) -> &CMat {
        &self.b_tilde
    }

    /// `C~ = C^ S^{-1}`.
    pub fn c_tilde(&self) -> &CMat {
        &self.c_tilde
    }

    pub fn eigenvalues(&self) -> &[linalg::C64] {
        self.spectral.eigenvalues()
    }

    pub fn order(&self) -> usize {
        self.base.n()
    }

    /// Check that this model can stand in for `full`: same inputs and outputs
    /// and an order not exceeding the full one.
    pub fn check_pairing(&self, full: &LtiSystem) -> Result<()> {
        full.ensure_io_compatible(&self.base)?;
        if self.order() > full.n() {
            return Err(Error::Validation(format!(
                "reduced order {} exceeds full order {}",
                self.order(),
                full.n()
            )));
        }
        Ok(())
    }
}

/// Impulse-response error between a full and a reduced model on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTrace {
    pub times: Vec<f64>,
    pub absolute: Vec<f64>,
    /// `None` where the full response is below [`RELATIVE_FLOOR`].
    pub relative: Vec<Option<f64>>,
}

impl ErrorTrace {
    /// Largest absolute error over samples with `t <= t_end`.
    pub fn max_absolute_until(&self, t_end: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.absolute)
            .filter(|(t, _)| **t <= t_end * (1.0 + 1e-12))
            .map(|(_, e)| *e)
            .fold(0.0, f64::max)
    }
}

/// Full responses with Frobenius norm at or below this carry no relative error.
pub const RELATIVE_FLOOR: f64 = 1e-12;

/// `count` equally spaced samples covering `[0, t_end]`.
pub fn uniform_grid(t_end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count)
            .map(|k| t_end * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

fn grid_step(times: &[f64]) -> Result<Option<f64>> {
    if times.is_empty() {
        return Err(Error::Validation("time grid is empty".into()));
    }
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::Validation("time grid must be finite and non-negative".into()));
    }
    if times.len() == 1 {
        return Ok(None);
    }
    let h = times[1] - times[0];
    if !(h > 0.0) {
        return Err(Error::Validation("time grid must be increasing".into()));
    }
    for (k, &t) in times.iter().enumerate() {
        let expected = times[0] + k as f64 * h;
        if (t - expected).abs() > 1e-9 * expected.abs().max(1.0) {
            return Err(Error::Validation(format!(
                "time grid is not uniform at sample {k}: {t} vs {expected}"
            )));
        }
    }
    Ok(Some(h))
}

/// Impulse response `C e^{A t} B` on a uniform grid, one `p x m` matrix per
/// sample. Uses a single `e^{A h}` propagated by repeated multiplication.
pub fn impulse_response(sys: &LtiSystem, times: &[f64]) -> Result<Vec<Mat>> {
    let step = grid_step(times)?;
    let mut state = if times[0] == 0.0 {
        sys.b().clone()
    } else {
        expm(&(sys.a() * times[0]))? * sys.b()
    };
    let propagator = match step {
        Some(h) => Some(expm(&(sys.a() * h))?),
        None => None,
    };
    let mut out = Vec::with_capacity(times.len());
    out.push(sys.c() * &state);
    if let Some(e) = propagator {
        for _ in 1..times.len() {
            state = &e * state;
            out.push(sys.c() * &state);
        }
    }
    Ok(out)
}

/// Absolute and relative impulse-response errors of `reduced` against `full`.
pub fn error_trace(full: &LtiSystem, reduced: &LtiSystem, times: &[f64]) -> Result<ErrorTrace> {
    full.ensure_io_compatible(reduced)?;
    let y = impulse_response(full, times)?;
    let yr = impulse_response(reduced, times)?;
    let mut absolute = Vec::with_capacity(times.len());
    let mut relative = Vec::with_capacity(times.len());
    for (yk, yrk) in y.iter().zip(&yr) {
        let err = (yk - yrk).norm();
        let base = yk.norm();
        absolute.push(err);
        relative.push((base > RELATIVE_FLOOR).then(|| err / base));
    }
    Ok(ErrorTrace {
        times: times.to_vec(),
        absolute,
        relative,
    })
}

fn clamp_norm_square(value: f64, scale: f64) -> f64 {
    if value < 0.0 && value > -1e-10 * scale.max(f64::MIN_POSITIVE) {
        0.0
    } else {
        value
    }
}

/// `||Sigma - Sigma^||^2_{H2,T} = tr(C P C^T) + tr(C^ P^ C^^T) - 2 tr(C P2 C^^T)`.
pub fn h2t_norm_squared_of_error(full: &LtiSystem, reduced: &LtiSystem, horizon: f64) -> Result<f64> {
    full.ensure_io_compatible(reduced)?;
    let (p, p2, phat) = gramians::reachability_gramians(full, reduced, horizon)?;
    Ok(error_from_gramians(full, reduced, &p, &p2, &phat))
}

fn error_from_gramians(full: &LtiSystem, reduced: &LtiSystem, p: &Mat, p2: &Mat, phat: &Mat) -> f64 {
    let t_full = (full.c() * p * full.c().transpose()).trace();
    let t_red = (reduced.c() * phat * reduced.c().transpose()).trace();
    let t_cross = (full.c() * p2 * reduced.c().transpose()).trace();
    clamp_norm_square(t_full + t_red - 2.0 * t_cross, t_full.abs() + t_red.abs())
}

/// Infinite-horizon H2 error squared. Both systems must be Hurwitz.
pub fn h2_norm_squared_of_error(full: &LtiSystem, reduced: &LtiSystem) -> Result<f64> {
    full.ensure_io_compatible(reduced)?;
    for sys in [full, reduced] {
        if !sys.stability().is_hurwitz {
            return Err(Error::Validation(format!(
                "infinite-horizon H2 norm needs a Hurwitz system; {} has max real eigenvalue {}",
                sys.label(),
                sys.stability().max_real_eigenvalue
            )));
        }
    }
    let (p, p2, phat) = gramians::infinite_reachability_gramians(full, reduced)?;
    Ok(error_from_gramians(full, reduced, &p, &p2, &phat))
}

/// Outputs at the grid instants for a zero-order-hold input `u` (one column
/// per sample, the last column only marks the end of the final interval).
pub fn zoh_outputs(sys: &LtiSystem, step: f64, u: &Mat) -> Result<Vec<DVector<f64>>> {
    if u.nrows() != sys.m() {
        return Err(Error::dim(
            "zoh_outputs",
            format!("input has {} channels, system has {}", u.nrows(), sys.m()),
        ));
    }
    let (n, m) = (sys.n(), sys.m());
    let mut aug = Mat::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(sys.a());
    aug.view_mut((0, n), (n, m)).copy_from(sys.b());
    let e = expm(&(aug * step))?;
    let phi = e.view((0, 0), (n, n)).clone_owned();
    let gamma = e.view((0, n), (n, m)).clone_owned();

    let mut x = DVector::zeros(n);
    let mut out = Vec::with_capacity(u.ncols());
    out.push(sys.c() * &x);
    for k in 0..u.ncols().saturating_sub(1) {
        x = &phi * x + &gamma * u.column(k);
        out.push(sys.c() * &x);
    }
    Ok(out)
}

/// Both sides of `max_t ||y - y^|| <= ||Sigma - Sigma^||_{H2,T} ||u||_{L2,T}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl BoundCheck {
    /// Quadrature slack granted to the inequality.
    pub const SLACK: f64 = 1e-3;

    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + Self::SLACK)
    }
}

/// Discrete `L2` norm of a zero-order-hold input.
pub fn zoh_l2_norm(u: &Mat, step: f64) -> f64 {
    let cols = u.ncols().saturating_sub(1);
    (0..cols)
        .map(|k| u.column(k).norm_squared() * step)
        .sum::<f64>()
        .sqrt()
}

/// Evaluate the output-error bound for an input sampled uniformly on
/// `[0, horizon]` (`u` is `m x (N+1)`).
pub fn output_error_bound_check(
    full: &LtiSystem,
    reduced: &LtiSystem,
    horizon: f64,
    u: &Mat,
) -> Result<BoundCheck> {
    full.ensure_io_compatible(reduced)?;
    if u.ncols() < 2 {
        return Err(Error::Validation("input needs at least two samples".into()));
    }
    if !(horizon > 0.0) {
        return Err(Error::Validation(format!("horizon must be positive, got {horizon}")));
    }
    let step = horizon / (u.ncols() - 1) as f64;
    let y = zoh_outputs(full, step, u)?;
    let yr = zoh_outputs(reduced, step, u)?;
    let lhs = y
        .iter()
        .zip(&yr)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let norm = h2t_norm_squared_of_error(full, reduced, horizon)?.max(0.0).sqrt();
    Ok(BoundCheck {
        lhs,
        rhs: norm * zoh_l2_norm(u, step),
    })
}
