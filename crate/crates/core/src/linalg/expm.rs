use super::{ensure_finite, ensure_square, norm1, Mat};
use crate::Result;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norm for which the [13/13] approximant meets unit roundoff.
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by [13/13] Padé approximation with scaling and squaring.
///
/// The scaling exponent is the smallest `s` with `||M||_1 / 2^s <= theta_13`.
pub fn expm(m: &Mat) -> Result<Mat> {
    let n = ensure_square(m, "expm")?;
    ensure_finite(m, "expm")?;
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }

    let norm = norm1(m);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = m * 2f64.powi(-s);

    let ident = Mat::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;

    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = &a * (u_inner + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1]);
    let v_inner = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = v_inner + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| crate::Error::Validation("expm: Pade denominator is singular".into()))?;

    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}
