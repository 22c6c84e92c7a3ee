//! Bracketed scalar root finding (Brent's method).

use crate::error::{Error, Result};

/// Find a root of `f` in `[a, b]` with `f(a)` and `f(b)` of opposite sign.
/// Converges to `rel_tol` relative (plus a small absolute floor).
pub fn brent<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(Error::RootFinding(format!(
            "root not bracketed: f({a}) = {fa:.3e}, f({b}) = {fb:.3e}"
        )));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.abs() > fc.abs() {
            (a, b, c) = (b, c, b);
            (fa, fb, fc) = (fb, fc, fb);
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * rel_tol * b.abs().max(1e-300);
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() < tol || fa.abs() <= fb.abs() {
            d = m;
            e = m;
        } else {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                // secant
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                // inverse quadratic
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        }
        (a, fa) = (b, fb);
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if (fb > 0.0) == (fc > 0.0) {
            (c, fc) = (a, fa);
            d = b - a;
            e = d;
        }
    }
    Err(Error::RootFinding("brent: iteration limit".into()))
}

/// Expand an upper bracket `[a, hi]` by doubling `hi - a` until `f` changes
/// sign, then solve with Brent. `f(a)` must be nonzero and finite.
pub fn brent_expanding<F: Fn(f64) -> f64>(f: F, a: f64, hi0: f64, rel_tol: f64) -> Result<f64> {
    let fa = f(a);
    let mut hi = hi0;
    for _ in 0..80 {
        if fa * f(hi) <= 0.0 {
            return brent(f, a, hi, rel_tol);
        }
        hi = a + 2.0 * (hi - a);
        if !hi.is_finite() {
            break;
        }
    }
    Err(Error::RootFinding("bracket expansion failed".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cubic_root() {
        let r = brent(|x| x * x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert_relative_eq!(r, 2f64.powf(1.0 / 3.0), max_relative = 1e-12);
    }

    #[test]
    fn expanding_bracket() {
        let r = brent_expanding(|x| x.exp() - 100.0, 0.0, 0.5, 1e-14).unwrap();
        assert_relative_eq!(r, 100f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn unbracketed_reports() {
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }
}
