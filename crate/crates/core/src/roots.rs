//! Bracketed scalar root finding for fallible objectives.

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrentOutcome {
    pub root: f64,
    pub value: f64,
    /// Final bracket, ordered.
    pub bracket: (f64, f64),
    pub evaluations: usize,
    pub converged: bool,
}

/// Brent's method on `[a, b]` given `f(a)` and `f(b)` of opposite sign.
///
/// Stops when `|f| ≤ f_tol` or the bracket is narrower than `x_tol`.
#[allow(clippy::too_many_arguments)]
pub fn brent<F>(mut f: F, a: f64, b: f64, fa: f64, fb: f64, f_tol: f64, x_tol: f64, max_iter: usize) -> Result<BrentOutcome>
where
    F: FnMut(f64) -> Result<f64>,
{
    if fa == 0.0 {
        return Ok(BrentOutcome { root: a, value: 0.0, bracket: (a, a), evaluations: 0, converged: true });
    }
    if fb == 0.0 {
        return Ok(BrentOutcome { root: b, value: 0.0, bracket: (b, b), evaluations: 0, converged: true });
    }
    if fa.signum() == fb.signum() {
        return Err(invalid(format!("no sign change on [{a}, {b}]")));
    }
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    let mut evaluations = 0;

    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * x_tol;
        let m = 0.5 * (c - b);
        if fb.abs() <= f_tol || m.abs() <= tol {
            return Ok(BrentOutcome { root: b, value: fb, bracket: ordered(b, c), evaluations, converged: true });
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * m * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0)), (q - 1.0) * (r - 1.0) * (s - 1.0))
            };
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
        evaluations += 1;
    }
    Ok(BrentOutcome { root: b, value: fb, bracket: ordered(b, c), evaluations, converged: false })
}

fn ordered(x: f64, y: f64) -> (f64, f64) {
    if x <= y {
        (x, y)
    } else {
        (y, x)
    }
}
