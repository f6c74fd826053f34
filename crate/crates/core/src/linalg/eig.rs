use std::cmp::Ordering;

use super::{condition_number, ensure_finite, ensure_square, to_complex, CMat, CVec, Mat, C64};
use crate::{Error, Result};

/// Eigenvector matrices with condition number above this are treated as defective.
pub const DIAGONALIZABLE_LIMIT: f64 = 1e12;

const PAIR_TOL: f64 = 1e-10;
const PHASE_PIVOT: f64 = 1e-8;

/// How an eigenvalue (and the matching basis column) relates to its neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Real,
    /// First member of a conjugate pair, the one with positive imaginary part.
    PairLeading,
    PairTrailing,
}

/// Diagonal form `D = S M S^{-1}` of a real square matrix.
///
/// Columns of `S^{-1}` are right eigenvectors, each with unit 2-norm and its
/// first non-negligible entry real and positive. Conjugate pairs stay exact
/// conjugates of each other.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    s: CMat,
    s_inv: CMat,
    eigenvalues: Vec<C64>,
    kinds: Vec<ColumnKind>,
    condition: f64,
}

impl SpectralDecomposition {
    /// Build a decomposition from eigenvalues and a matching right-eigenvector
    /// matrix (`S^{-1}`), without renormalizing the eigenvectors.
    pub fn from_eigenvectors(eigenvalues: Vec<C64>, s_inv: CMat) -> Result<Self> {
        let r = eigenvalues.len();
        if s_inv.nrows() != r || s_inv.ncols() != r {
            return Err(Error::dim(
                "spectral decomposition",
                format!("{r} eigenvalues but a {}x{} transform", s_inv.nrows(), s_inv.ncols()),
            ));
        }
        let condition = condition_number(&s_inv);
        if !condition.is_finite() || condition > DIAGONALIZABLE_LIMIT {
            return Err(Error::NonDiagonalizable { condition });
        }
        let s = s_inv
            .clone()
            .lu()
            .try_inverse()
            .ok_or(Error::NonDiagonalizable { condition })?;
        let kinds = classify(&eigenvalues);
        Ok(Self {
            s,
            s_inv,
            eigenvalues,
            kinds,
            condition,
        })
    }

    /// The transform `S` with `D = S M S^{-1}`.
    pub fn s(&self) -> &CMat {
        &self.s
    }

    pub fn s_inv(&self) -> &CMat {
        &self.s_inv
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    /// Estimate of the condition number of `S` (2-norm).
    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    pub fn order(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `D` as an explicit matrix; off-diagonal entries are exactly zero.
    pub fn d(&self) -> CMat {
        super::cdiag(&self.eigenvalues)
    }

    /// `||S M S^{-1} - D||_F / ||M||_F`.
    pub fn reconstruction_residual(&self, m: &Mat) -> f64 {
        let sm = &self.s * to_complex(m) * &self.s_inv - self.d();
        super::cfro(&sm) / m.norm().max(f64::MIN_POSITIVE)
    }
}

/// Spectral decomposition of a real diagonalizable matrix.
///
/// Eigenvalues are ordered by real part, then by modulus of the imaginary
/// part, with the positive-imaginary member of a conjugate pair first.
pub fn eig(m: &Mat) -> Result<SpectralDecomposition> {
    let r = ensure_square(m, "eig")?;
    ensure_finite(m, "eig")?;
    if r == 0 {
        return Err(Error::Validation("eig: empty matrix".into()));
    }
    let scale = m.norm();
    let (q, t) = to_complex(m).schur().unpack();
    let raw: Vec<C64> = (0..r).map(|k| t[(k, k)]).collect();

    // Snap real eigenvalues, pair the complex ones.
    let mut entries: Vec<(C64, usize)> = Vec::with_capacity(r);
    let mut complex: Vec<(C64, usize)> = Vec::new();
    for (k, &l) in raw.iter().enumerate() {
        if l.im.abs() <= PAIR_TOL * l.norm() + 1e-13 * scale {
            entries.push((C64::new(l.re, 0.0), k));
        } else {
            complex.push((l, k));
        }
    }
    let mut used = vec![false; complex.len()];
    let mut pairs: Vec<(C64, usize)> = Vec::new();
    for i in 0..complex.len() {
        if used[i] || complex[i].0.im < 0.0 {
            continue;
        }
        let li = complex[i].0;
        let partner = (0..complex.len())
            .filter(|&j| !used[j] && j != i && complex[j].0.im < 0.0)
            .min_by(|&a, &b| {
                let da = (li - complex[a].0.conj()).norm();
                let db = (li - complex[b].0.conj()).norm();
                da.total_cmp(&db)
            });
        match partner {
            Some(j) if (li - complex[j].0.conj()).norm() <= 1e3 * PAIR_TOL * li.norm() + 1e-12 * scale => {
                used[i] = true;
                used[j] = true;
                let mean = (li + complex[j].0.conj()) * 0.5;
                pairs.push((mean, complex[i].1));
            }
            _ => {
                return Err(Error::Validation(format!(
                    "eig: complex eigenvalue {li} of a real matrix has no conjugate partner"
                )))
            }
        }
    }
    if used.iter().any(|u| !u) {
        return Err(Error::Validation(
            "eig: unpaired complex eigenvalue of a real matrix".into(),
        ));
    }

    // Canonical ordering: real part, then |imag|, +imag before -imag.
    let mut ordered: Vec<(C64, usize, bool)> = entries
        .iter()
        .map(|&(l, k)| (l, k, false))
        .chain(pairs.iter().map(|&(l, k)| (l, k, true)))
        .collect();
    ordered.sort_by(|a, b| canonical_cmp(a.0, b.0));

    let mut eigenvalues = Vec::with_capacity(r);
    let mut s_inv = CMat::zeros(r, r);
    let mut col = 0;
    for &(l, k, paired) in &ordered {
        let mut x = schur_eigenvector(&q, &t, k);
        if !paired {
            // A real eigenvalue of a real matrix has a real eigenvector up to phase.
            x = normalize(&x).map(|z| C64::new(z.re, 0.0));
        }
        let x = normalize(&x);
        s_inv.set_column(col, &x);
        eigenvalues.push(l);
        col += 1;
        if paired {
            s_inv.set_column(col, &x.map(|z| z.conj()));
            eigenvalues.push(l.conj());
            col += 1;
        }
    }
    SpectralDecomposition::from_eigenvectors(eigenvalues, s_inv)
}

/// Total order used for eigenvalue lists throughout the crate.
pub(crate) fn canonical_cmp(a: C64, b: C64) -> Ordering {
    a.re.total_cmp(&b.re)
        .then(a.im.abs().total_cmp(&b.im.abs()))
        .then(b.im.total_cmp(&a.im))
}

fn classify(eigenvalues: &[C64]) -> Vec<ColumnKind> {
    let mut kinds = vec![ColumnKind::Real; eigenvalues.len()];
    let mut i = 0;
    while i < eigenvalues.len() {
        let l = eigenvalues[i];
        if l.im != 0.0 && l.im > 0.0 && i + 1 < eigenvalues.len() {
            let next = eigenvalues[i + 1];
            if (l - next.conj()).norm() <= PAIR_TOL * l.norm().max(f64::MIN_POSITIVE) {
                kinds[i] = ColumnKind::PairLeading;
                kinds[i + 1] = ColumnKind::PairTrailing;
                i += 2;
                continue;
            }
        }
        i += 1;
    }
    kinds
}

/// Eigenvector for the `k`-th diagonal entry of the triangular Schur factor.
fn schur_eigenvector(q: &CMat, t: &CMat, k: usize) -> CVec {
    let n = t.nrows();
    let lambda = t[(k, k)];
    let smin = (f64::EPSILON * t.norm()).max(f64::MIN_POSITIVE);
    let mut y = CVec::zeros(n);
    y[k] = C64::new(1.0, 0.0);
    for j in (0..k).rev() {
        let mut acc = C64::new(0.0, 0.0);
        for l in j + 1..=k {
            acc += t[(j, l)] * y[l];
        }
        let mut denom = t[(j, j)] - lambda;
        if denom.norm() < smin {
            denom = C64::new(smin, 0.0);
        }
        y[j] = -acc / denom;
    }
    q * y
}

/// Unit 2-norm with the first non-negligible entry real and positive.
fn normalize(x: &CVec) -> CVec {
    let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let pivot = x
        .iter()
        .find(|z| z.norm() > PHASE_PIVOT * norm)
        .copied()
        .unwrap_or(C64::new(1.0, 0.0));
    let phase = pivot.conj() / pivot.norm();
    x.map(|z| z * phase / norm)
}
