//! First-order optimality conditions for the time-limited H2 error.
//!
//! All conditions are expressed in the spectral coordinates `(D, B~, C~)` of
//! the reduced model. Complex quantities use the plain (non-conjugating)
//! transpose throughout.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gramians::{self, Exponentials};
use crate::linalg::{
    self, expm, kron, scale_cols, scale_rows, solve_diag_left, solve_diag_right, to_complex, vec, CMat, CVec, Mat,
    C64,
};
use crate::reduction::ProjectionPair;
use crate::system::{LtiSystem, ReducedSystem};
use crate::{Error, Result};

/// Unknown count above which the explicit Kronecker path refuses to run.
pub const EXPLICIT_CAP: usize = 4096;

/// Denominators below this leave a metric undefined.
pub const METRIC_FLOOR: f64 = 1e-300;

/// Gramian-form residuals: `C~ P~ - C P~2`, `Q~ B~ - Q~2 B` and the `r` scalar
/// eigenvalue conditions.
#[derive(Debug, Clone)]
pub struct WilsonResiduals {
    pub c: CMat,
    pub b: CMat,
    pub lambda: Vec<C64>,
}

impl WilsonResiduals {
    pub fn c_norm(&self) -> f64 {
        linalg::cfro(&self.c)
    }

    pub fn b_norm(&self) -> f64 {
        linalg::cfro(&self.b)
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Shared data for one (full, reduced, horizon) evaluation.
struct Context<'a> {
    full: &'a LtiSystem,
    red: &'a ReducedSystem,
    t: f64,
    d: Vec<C64>,
    ed: Vec<C64>,
    ea: CMat,
    ear: CMat,
    b: CMat,
    c: CMat,
    bh: CMat,
    ch: CMat,
}

impl<'a> Context<'a> {
    fn new(full: &'a LtiSystem, red: &'a ReducedSystem, t: f64) -> Result<Self> {
        red.check_pairing(full)?;
        let ex = Exponentials::new(full, red.base(), t)?;
        let d = red.eigenvalues().to_vec();
        Ok(Self {
            full,
            red,
            t,
            ed: linalg::exp_diag(&d, t),
            d,
            ea: to_complex(&ex.full),
            ear: to_complex(&ex.reduced),
            b: to_complex(full.b()),
            c: to_complex(full.c()),
            bh: to_complex(red.base().b()),
            ch: to_complex(red.base().c()),
        })
    }

    fn bt(&self) -> &CMat {
        self.red.b_tilde()
    }

    fn ct(&self) -> &CMat {
        self.red.c_tilde()
    }

    fn a(&self) -> &Mat {
        self.full.a()
    }

    fn ah(&self) -> &Mat {
        self.red.base().a()
    }

    /// `e^{DT} M` and `M e^{DT}`.
    fn edl(&self, m: &CMat) -> CMat {
        scale_rows(&self.ed, m)
    }

    fn edr(&self, m: &CMat) -> CMat {
        scale_cols(m, &self.ed)
    }
}

/// Evaluate the Gramian-form residuals.
pub fn wilson_residuals(full: &LtiSystem, red: &ReducedSystem, horizon: f64) -> Result<WilsonResiduals> {
    let ctx = Context::new(full, red, horizon)?;
    let set = gramians::compute_gramian_set(full, red.base(), horizon)?;
    let tg = gramians::transformed_gramians(red, &set)?;
    let inf = gramians::compute_infinite_gramians(red, full)?;
    let (bt, ct) = (ctx.bt(), ctx.ct());

    let c = ct * &tg.p_tilde - &ctx.c * &tg.p2_tilde;
    let b = &tg.q_tilde * bt - &tg.q2_tilde * &ctx.b;

    let t = C64::new(horizon, 0.0);
    let n2 = &tg.p2_tilde - ctx.edr(&(&ctx.ea * &ctx.b * bt.transpose())) * t;
    let n1 = &tg.p_tilde - ctx.edr(&ctx.edl(&(bt * bt.transpose()))) * t;
    let lambda = (0..red.order())
        .map(|i| diag_of_product(&inf.q2_tilde, &n2, i) - diag_of_product(&inf.q_tilde, &n1, i))
        .collect();
    Ok(WilsonResiduals { c, b, lambda })
}

/// `(X Y)_{ii}`.
fn diag_of_product(x: &CMat, y: &CMat, i: usize) -> C64 {
    x.row(i).iter().zip(y.column(i).iter()).map(|(a, b)| a * b).sum()
}

/// Both sides of the three Kronecker-form conditions.
#[derive(Debug, Clone)]
pub struct KroneckerConditions {
    pub c_lhs: CVec,
    pub c_rhs: CVec,
    pub b_lhs: CVec,
    pub b_rhs: CVec,
    pub lambda_lhs: Vec<C64>,
    pub lambda_rhs: Vec<C64>,
}

impl KroneckerConditions {
    pub fn c_difference(&self) -> CVec {
        &self.c_lhs - &self.c_rhs
    }

    pub fn b_difference(&self) -> CVec {
        &self.b_lhs - &self.b_rhs
    }

    pub fn lambda_difference(&self) -> Vec<C64> {
        self.lambda_lhs.iter().zip(&self.lambda_rhs).map(|(l, r)| l - r).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Sylvester solves with diagonal `D`; no Kronecker matrices are formed.
    Direct,
    /// Literal Kronecker operators, for cross-checking small instances.
    Explicit,
}

pub fn kronecker_conditions(full: &LtiSystem, red: &ReducedSystem, horizon: f64, mode: Mode) -> Result<KroneckerConditions> {
    let ctx = Context::new(full, red, horizon)?;
    match mode {
        Mode::Direct => direct_conditions(&ctx),
        Mode::Explicit => explicit_conditions(&ctx),
    }
}

/// `M1 = Y1 - T e^{DT} B~ B^T e^{A^T T}` with `D Y1 + Y1 A^T = e^{DT} B~ B^T e^{A^T T} - B~ B^T`.
fn lambda_rhs_kernel(ctx: &Context) -> Result<CMat> {
    let k = ctx.bt() * ctx.b.transpose();
    let ek = ctx.edl(&k) * ctx.ea.transpose();
    let z1 = solve_diag_left(ctx.a(), &ctx.d, &(&ek - &k))?;
    Ok(z1 - ek * C64::new(ctx.t, 0.0))
}

fn unit_row(m: &CMat, i: usize) -> CMat {
    let mut out = CMat::zeros(m.nrows(), m.ncols());
    out.row_mut(i).copy_from(&m.row(i));
    out
}

fn trace3(x: &CMat, y: &CMat, z: &CMat) -> C64 {
    // tr(X Y Z) without forming the square product.
    let xy = x * y;
    (0..xy.nrows()).map(|k| diag_of_product(&xy, z, k)).sum()
}

fn direct_conditions(ctx: &Context) -> Result<KroneckerConditions> {
    let (bt, ct, d) = (ctx.bt(), ctx.ct(), &ctx.d[..]);
    let r = d.len();
    let tc = C64::new(ctx.t, 0.0);

    let k = &ctx.bh * bt.transpose();
    let x = solve_diag_right(ctx.ah(), d, &(ctx.edr(&(&ctx.ear * &k)) - &k))?;
    let c_lhs = vec(&(&ctx.ch * x));
    let k = &ctx.b * bt.transpose();
    let x2 = solve_diag_right(ctx.a(), d, &(ctx.edr(&(&ctx.ea * &k)) - &k))?;
    let c_rhs = vec(&(&ctx.c * x2));

    let k = ct.transpose() * &ctx.ch;
    let y = solve_diag_left(&ctx.ah().transpose(), d, &(ctx.edl(&k) * &ctx.ear - &k))?;
    let b_lhs = vec(&(y * &ctx.bh));
    let k = ct.transpose() * &ctx.c;
    let z = solve_diag_left(&ctx.a().transpose(), d, &(ctx.edl(&k) * &ctx.ea - &k))?;
    let b_rhs = vec(&(z * &ctx.b));

    let k = bt * ctx.bh.transpose();
    let ek = ctx.edl(&k) * ctx.ear.transpose();
    let y1 = solve_diag_left(ctx.ah(), d, &(&ek - &k))?;
    let m1 = y1 - ek * tc;
    let m2 = lambda_rhs_kernel(ctx)?;
    let cht = ctx.ch.transpose();
    let clt = ctx.c.transpose();
    let pairs: Vec<Result<(C64, C64)>> = (0..r)
        .into_par_iter()
        .map(|i| {
            let y2 = solve_diag_left(ctx.ah(), d, &unit_row(&m1, i))?;
            let z2 = solve_diag_left(ctx.a(), d, &unit_row(&m2, i))?;
            Ok((trace3(ct, &y2, &cht), trace3(ct, &z2, &clt)))
        })
        .collect();
    let mut lambda_lhs = Vec::with_capacity(r);
    let mut lambda_rhs = Vec::with_capacity(r);
    for p in pairs {
        let (l, rr) = p?;
        lambda_lhs.push(l);
        lambda_rhs.push(rr);
    }
    Ok(KroneckerConditions {
        c_lhs,
        c_rhs,
        b_lhs,
        b_rhs,
        lambda_lhs,
        lambda_rhs,
    })
}

fn cident(n: usize) -> CMat {
    CMat::identity(n, n)
}

fn lu_solve(op: CMat, rhs: &CVec) -> Result<CVec> {
    let lu = op.lu();
    lu.solve(rhs).ok_or(Error::SingularOperator {
        min_sum: 0.0,
        tolerance: 0.0,
    })
}

fn explicit_conditions(ctx: &Context) -> Result<KroneckerConditions> {
    let (n, r) = (ctx.full.n(), ctx.red.order());
    let (m, p) = (ctx.full.m(), ctx.full.p());
    if n * r > EXPLICIT_CAP {
        return Err(Error::SizeCap {
            unknowns: n * r,
            cap: EXPLICIT_CAP,
        });
    }
    let (bt, ct) = (ctx.bt(), ctx.ct());
    let dm = linalg::cdiag(&ctx.d);
    let edm = linalg::cdiag(&ctx.ed);
    let a = to_complex(ctx.a());
    let ah = to_complex(ctx.ah());
    let (ir, in_) = (cident(r), cident(n));
    let vec_im = vec(&cident(m));
    let vec_ip = vec(&cident(p));
    let tc = C64::new(ctx.t, 0.0);

    // Condition on C~.
    let k_hat = kron(&ir, &ah) + kron(&dm, &ir);
    let src = kron(&(&edm * bt), &(&ctx.ear * &ctx.bh)) * &vec_im - kron(bt, &ctx.bh) * &vec_im;
    let c_lhs = kron(&ir, &ctx.ch) * lu_solve(k_hat, &src)?;
    let k_full = kron(&ir, &a) + kron(&dm, &in_);
    let src = kron(&(&edm * bt), &(&ctx.ea * &ctx.b)) * &vec_im - kron(bt, &ctx.b) * &vec_im;
    let c_rhs = kron(&ir, &ctx.c) * lu_solve(k_full, &src)?;

    // Condition on B~.
    let vec_ip_c = &vec_ip;
    let k_hat = kron(&ir, &dm) + kron(&ah.transpose(), &ir);
    let src = kron(&(ctx.ear.transpose() * ctx.ch.transpose()), &(&edm * ct.transpose())) * vec_ip_c
        - kron(&ctx.ch.transpose(), &ct.transpose()) * vec_ip_c;
    let b_lhs = kron(&ctx.bh.transpose(), &ir) * lu_solve(k_hat, &src)?;
    let k_full = kron(&in_, &dm) + kron(&a.transpose(), &ir);
    let src = kron(&(ctx.ea.transpose() * ctx.c.transpose()), &(&edm * ct.transpose())) * vec_ip_c
        - kron(&ctx.c.transpose(), &ct.transpose()) * vec_ip_c;
    let b_rhs = kron(&ctx.b.transpose(), &ir) * lu_solve(k_full, &src)?;

    // Eigenvalue conditions.
    let k2_hat = (kron(&ir, &dm) + kron(&ah, &ir)).lu();
    let e_src = kron(&(&ctx.ear * &ctx.bh), &(&edm * bt)) * &vec_im;
    let src = &e_src - kron(&ctx.bh, bt) * &vec_im;
    let inner = k2_hat.solve(&src).ok_or(singular())? - e_src * tc;
    let k2 = (kron(&in_, &dm) + kron(&a, &ir)).lu();
    let e_src = kron(&(&ctx.ea * &ctx.b), &(&edm * bt)) * &vec_im;
    let src = &e_src - kron(&ctx.b, bt) * &vec_im;
    let inner2 = k2.solve(&src).ok_or(singular())? - e_src * tc;
    let left = kron(&ctx.ch, ct).transpose() * &vec_ip;
    let right = kron(&ctx.c, ct).transpose() * &vec_ip;
    let mut lambda_lhs = Vec::with_capacity(r);
    let mut lambda_rhs = Vec::with_capacity(r);
    for i in 0..r {
        let mut ei = CMat::zeros(r, r);
        ei[(i, i)] = C64::new(1.0, 0.0);
        let y2 = k2_hat.solve(&(kron(&ir, &ei) * &inner)).ok_or(singular())?;
        lambda_lhs.push(left.dot(&y2));
        let z2 = k2.solve(&(kron(&in_, &ei) * &inner2)).ok_or(singular())?;
        lambda_rhs.push(right.dot(&z2));
    }
    Ok(KroneckerConditions {
        c_lhs,
        c_rhs,
        b_lhs,
        b_rhs,
        lambda_lhs,
        lambda_rhs,
    })
}

fn singular() -> Error {
    Error::SingularOperator {
        min_sum: 0.0,
        tolerance: 0.0,
    }
}

/// Normalized residuals `E_c`, `E_b`, `E_lambda`; `None` when a denominator vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub e_c: Option<f64>,
    pub e_b: Option<f64>,
    pub e_lambda: Option<f64>,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den >= METRIC_FLOOR).then(|| num / den)
}

pub fn condition_metrics(k: &KroneckerConditions) -> Metrics {
    let e_c = ratio(k.c_difference().norm(), k.c_lhs.norm());
    let e_b = ratio(k.b_difference().norm(), k.b_lhs.norm());
    let e_lambda = k
        .lambda_lhs
        .iter()
        .zip(&k.lambda_rhs)
        .map(|(l, r)| ratio((l - r).norm(), l.norm()))
        .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)));
    Metrics { e_c, e_b, e_lambda }
}

/// Closed-form deviations of a projected model from the Kronecker conditions.
#[derive(Debug, Clone)]
pub struct Deviations {
    pub e_c: CVec,
    pub e_b: CVec,
    pub e_lambda1: Vec<C64>,
    pub e_lambda2: Vec<C64>,
}

impl Deviations {
    pub fn e_lambda(&self) -> Vec<C64> {
        self.e_lambda1.iter().zip(&self.e_lambda2).map(|(a, b)| a + b).collect()
    }
}

/// Deviation terms for `red = ((W^T V)^{-1} W^T A V, (W^T V)^{-1} W^T B, C V)`.
///
/// `e^{A Pr T}` and `e^{Pr A T}` are formed densely.
pub fn projection_deviations(
    full: &LtiSystem,
    red: &ReducedSystem,
    projection: &ProjectionPair,
    horizon: f64,
) -> Result<Deviations> {
    let ctx = Context::new(full, red, horizon)?;
    let (v, w) = (&projection.v, &projection.w);
    let (n, r) = (full.n(), red.order());
    if v.shape() != (n, r) || w.shape() != (n, r) {
        return Err(Error::dim(
            "projection_deviations",
            format!("projection bases are {:?} and {:?}, expected ({n}, {r})", v.shape(), w.shape()),
        ));
    }
    let wtv = w.transpose() * v;
    let wtv_inv = wtv
        .clone()
        .try_inverse()
        .ok_or(Error::ProjectionBreakdown { condition: f64::INFINITY })?;
    let left = &wtv_inv * w.transpose();
    let pr = v * &left;
    let a = full.a();
    let e_apr = expm(&(a * &pr * horizon))?;
    let e_pra = expm(&(&pr * a * horizon))?;
    let e_a = linalg::real_part(&ctx.ea);

    let g = to_complex(&(&left * (&e_apr - &e_a) * full.b()));
    let h = to_complex(&(full.c() * (&e_pra - &e_a) * v));
    let (bt, ct, d) = (ctx.bt(), ctx.ct(), &ctx.d[..]);
    let tc = C64::new(horizon, 0.0);

    let x = solve_diag_right(ctx.ah(), d, &ctx.edr(&(&g * bt.transpose())))?;
    let e_c = vec(&(&ctx.ch * x));
    let y = solve_diag_left(&ctx.ah().transpose(), d, &ctx.edl(&(ct.transpose() * &h)))?;
    let e_b = vec(&(y * &ctx.bh));

    let k = ctx.edl(&(bt * g.transpose()));
    let y = solve_diag_left(ctx.ah(), d, &k)?;
    let m1 = y - k * tc;
    let m2 = lambda_rhs_kernel(&ctx)?;
    let wc = to_complex(&(w * wtv_inv.transpose()));
    let vt = to_complex(&v.transpose());
    let cht = ctx.ch.transpose();
    let tail = ctx.ea.transpose() * ctx.c.transpose();
    let terms: Vec<Result<(C64, C64)>> = (0..r)
        .into_par_iter()
        .map(|i| {
            let y2 = solve_diag_left(ctx.ah(), d, &unit_row(&m1, i))?;
            let e1 = trace3(ct, &y2, &cht);
            let f = unit_row(&m2, i);
            let y = solve_diag_left(ctx.ah(), d, &(&f * &wc))?;
            let z = solve_diag_left(a, d, &f)?;
            let delta = y * &vt - z;
            let e2 = trace3(&ctx.edr(ct), &delta, &tail);
            Ok((e1, e2))
        })
        .collect();
    let mut e_lambda1 = Vec::with_capacity(r);
    let mut e_lambda2 = Vec::with_capacity(r);
    for t in terms {
        let (a, b) = t?;
        e_lambda1.push(a);
        e_lambda2.push(b);
    }
    Ok(Deviations {
        e_c,
        e_b,
        e_lambda1,
        e_lambda2,
    })
}

/// Analytic versus central-difference gradient of the reduced-parameter error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeReport {
    pub value: f64,
    pub max_relative_discrepancy: f64,
    pub parameters: usize,
}

/// The part of the squared error that depends on `(lambda, B~, C~)`:
/// `tr(C~ P~ C~^T) - 2 tr(C P~2 C~^T)`.
pub fn reduced_error_functional(full: &LtiSystem, lambda: &[C64], bt: &CMat, ct: &CMat, horizon: f64) -> Result<C64> {
    let ea = to_complex(&expm(&(full.a() * horizon))?);
    functional_with(full, &ea, lambda, bt, ct, horizon)
}

fn tl_diag_gramian(lambda: &[C64], k: &CMat, t: f64) -> CMat {
    CMat::from_fn(lambda.len(), lambda.len(), |i, j| {
        let s = lambda[i] + lambda[j];
        ((s * t).exp() - 1.0) * k[(i, j)] / s
    })
}

fn functional_with(full: &LtiSystem, ea: &CMat, lambda: &[C64], bt: &CMat, ct: &CMat, t: f64) -> Result<C64> {
    let pt = tl_diag_gramian(lambda, &(bt * bt.transpose()), t);
    let p2 = tilde_p2(full, ea, lambda, bt, t)?;
    let c = to_complex(full.c());
    Ok(trace3(ct, &pt, &ct.transpose()) - trace3(&c, &p2, &ct.transpose()) * 2.0)
}

fn tilde_p2(full: &LtiSystem, ea: &CMat, lambda: &[C64], bt: &CMat, t: f64) -> Result<CMat> {
    let k = to_complex(full.b()) * bt.transpose();
    let ed = linalg::exp_diag(lambda, t);
    solve_diag_right(full.a(), lambda, &(scale_cols(&(ea * &k), &ed) - k))
}

struct AnalyticGradient {
    lambda: Vec<C64>,
    bt: CMat,
    ct: CMat,
}

fn analytic_gradient(full: &LtiSystem, ea: &CMat, lambda: &[C64], bt: &CMat, ct: &CMat, t: f64) -> Result<AnalyticGradient> {
    let r = lambda.len();
    let c = to_complex(full.c());
    let b = to_complex(full.b());
    let ed = linalg::exp_diag(lambda, t);
    let tc = C64::new(t, 0.0);
    let pt = tl_diag_gramian(lambda, &(bt * bt.transpose()), t);
    let p2 = tilde_p2(full, ea, lambda, bt, t)?;
    let qt = tl_diag_gramian(lambda, &(ct.transpose() * ct), t);
    let k = ct.transpose() * &c;
    let q2 = solve_diag_left(&full.a().transpose(), lambda, &(scale_rows(&ed, &k) * ea - k))?;

    let g_c = (ct * &pt - &c * &p2) * C64::new(2.0, 0.0);
    let g_b = (&qt * bt - &q2 * &b) * C64::new(2.0, 0.0);

    let ctc = ct.transpose() * ct;
    let q_inf = CMat::from_fn(r, r, |i, j| -ctc[(i, j)] / (lambda[i] + lambda[j]));
    let q2_inf = solve_diag_left(&full.a().transpose(), lambda, &-(ct.transpose() * &c))?;
    let n2 = &p2 - scale_cols(&(ea * &b * bt.transpose()), &ed) * tc;
    let n1 = &pt - scale_cols(&scale_rows(&ed, &(bt * bt.transpose())), &ed) * tc;
    let g_l = (0..r)
        .map(|i| (diag_of_product(&q_inf, &n1, i) - diag_of_product(&q2_inf, &n2, i)) * 2.0)
        .collect();
    Ok(AnalyticGradient { lambda: g_l, bt: g_b, ct: g_c })
}

/// Compare the analytic gradient of [`reduced_error_functional`] at the
/// spectral form of `red` against central differences with step
/// `1e-6 max(1, |x|)` along the real direction of each parameter.
pub fn derivative_check(full: &LtiSystem, red: &ReducedSystem, horizon: f64) -> Result<DerivativeReport> {
    red.check_pairing(full)?;
    let lambda = red.eigenvalues().to_vec();
    let (bt, ct) = (red.b_tilde().clone(), red.c_tilde().clone());
    derivative_check_at(full, &lambda, &bt, &ct, horizon)
}

/// [`derivative_check`] at arbitrary spectral parameters.
pub fn derivative_check_at(full: &LtiSystem, lambda: &[C64], bt: &CMat, ct: &CMat, horizon: f64) -> Result<DerivativeReport> {
    let ea = to_complex(&expm(&(full.a() * horizon))?);
    let f = |l: &[C64], b: &CMat, c: &CMat| functional_with(full, &ea, l, b, c, horizon);
    let value = f(lambda, bt, ct)?;
    let grad = analytic_gradient(full, &ea, lambda, bt, ct, horizon)?;
    let step = |x: C64| 1e-6 * x.norm().max(1.0);

    let mut pairs: Vec<(C64, C64)> = Vec::new();
    for i in 0..lambda.len() {
        let h = step(lambda[i]);
        let (mut up, mut dn) = (lambda.to_vec(), lambda.to_vec());
        up[i] += h;
        dn[i] -= h;
        pairs.push((grad.lambda[i], (f(&up, bt, ct)? - f(&dn, bt, ct)?) / (2.0 * h)));
    }
    for idx in 0..bt.len() {
        let h = step(bt[idx]);
        let (mut up, mut dn) = (bt.clone(), bt.clone());
        up[idx] += h;
        dn[idx] -= h;
        pairs.push((grad.bt[idx], (f(lambda, &up, ct)? - f(lambda, &dn, ct)?) / (2.0 * h)));
    }
    for idx in 0..ct.len() {
        let h = step(ct[idx]);
        let (mut up, mut dn) = (ct.clone(), ct.clone());
        up[idx] += h;
        dn[idx] -= h;
        pairs.push((grad.ct[idx], (f(lambda, bt, &up)? - f(lambda, bt, &dn)?) / (2.0 * h)));
    }
    let scale = pairs
        .iter()
        .map(|(a, _)| a.norm())
        .fold(value.norm(), f64::max)
        .max(f64::MIN_POSITIVE);
    let max_rel = pairs.iter().map(|(a, fd)| (a - fd).norm() / scale).fold(0.0, f64::max);
    Ok(DerivativeReport {
        value: value.re,
        max_relative_discrepancy: max_rel,
        parameters: pairs.len(),
    })
}

/// Everything known about how close a reduced model is to first-order optimality.
#[derive(Debug, Clone)]
pub struct OptimalityReport {
    pub wilson: WilsonResiduals,
    pub kron: KroneckerConditions,
    pub metrics: Metrics,
    pub deviations: Option<Deviations>,
}

impl OptimalityReport {
    pub fn evaluate(
        full: &LtiSystem,
        red: &ReducedSystem,
        horizon: f64,
        projection: Option<&ProjectionPair>,
    ) -> Result<Self> {
        let wilson = wilson_residuals(full, red, horizon)?;
        let kron = kronecker_conditions(full, red, horizon, Mode::Direct)?;
        let metrics = condition_metrics(&kron);
        let deviations = match projection {
            Some(p) => Some(projection_deviations(full, red, p, horizon)?),
            None => None,
        };
        Ok(Self {
            wilson,
            kron,
            metrics,
            deviations,
        })
    }
}

/// `||x - y|| / max(||x||, ||y||)`, zero when both vanish.
pub fn relative_gap(x: &CVec, y: &CVec) -> f64 {
    let scale = x.norm().max(y.norm());
    if scale == 0.0 {
        0.0
    } else {
        (x - y).norm() / scale
    }
}

/// [`relative_gap`] for scalar lists.
pub fn relative_gap_scalars(x: &[C64], y: &[C64]) -> f64 {
    relative_gap(&DVector::from_column_slice(x), &DVector::from_column_slice(y))
}
