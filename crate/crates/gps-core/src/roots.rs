//! Bracketed one-dimensional root finders.
//!
//! Every solver in the crate works on a monotone scalar map, so a sign
//! change is always available before the search starts.  Two methods are
//! provided: a Newton iteration safeguarded by bisection (used when an
//! analytic derivative is cheap) and Brent's method (used for nested
//! problems where the derivative is not available).

use crate::error::{GpsError, Result};

/// Outcome of a successful root search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    /// Location of the root.
    pub x: f64,
    /// Function value at `x`.
    pub residual: f64,
    /// Number of function evaluations after the initial bracket check.
    pub iterations: usize,
    /// Final bracket.
    pub lo: f64,
    pub hi: f64,
}

const MAX_ITER: usize = 300;

fn width_small(lo: f64, hi: f64, xtol: f64) -> bool {
    (hi - lo).abs() <= xtol + 4.0 * f64::EPSILON * lo.abs().max(hi.abs())
}

/// Newton iteration kept inside a shrinking bracket `[lo, hi]`.
///
/// `f` returns the value and derivative.  The search runs until the bracket
/// or the Newton step reaches `xtol` (plus a few ulps), then checks that the
/// residual is at most `ftol`.
pub fn newton_bisect<F>(
    what: &'static str,
    mut f: F,
    lo: f64,
    hi: f64,
    start: Option<f64>,
    xtol: f64,
    ftol: f64,
) -> Result<Root>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (mut lo, mut hi) = (lo.min(hi), lo.max(hi));
    let f_lo = f(lo).0;
    let f_hi = f(hi).0;
    if f_lo == 0.0 {
        return Ok(Root { x: lo, residual: 0.0, iterations: 0, lo, hi: lo });
    }
    if f_hi == 0.0 {
        return Ok(Root { x: hi, residual: 0.0, iterations: 0, lo: hi, hi });
    }
    if !(f_lo.signum() != f_hi.signum()) || f_lo.is_nan() || f_hi.is_nan() {
        return Err(GpsError::NoBracket { what, lo, hi, f_lo, f_hi });
    }
    let lo_negative = f_lo < 0.0;
    let mut x = match start {
        Some(s) if s > lo && s < hi => s,
        _ => 0.5 * (lo + hi),
    };
    let mut last = (x, f64::NAN);
    for it in 1..=MAX_ITER {
        let (fx, dfx) = f(x);
        last = (x, fx);
        if fx == 0.0 {
            return Ok(Root { x, residual: 0.0, iterations: it, lo: x, hi: x });
        }
        if fx.is_nan() {
            // Treat an undefined value as lying beyond the root on the side of `hi`.
            hi = x;
        } else if (fx < 0.0) == lo_negative {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - x).abs();
        x = next;
        if width_small(lo, hi, xtol) || step <= xtol + 4.0 * f64::EPSILON * x.abs() {
            let (fx, _) = f(x);
            let (x, fx) = if fx.abs() <= last.1.abs() || last.1.is_nan() { (x, fx) } else { last };
            if fx.abs() <= ftol || width_small(lo, hi, xtol) || step == 0.0 {
                return Ok(Root { x, residual: fx, iterations: it + 1, lo, hi });
            }
        }
    }
    Err(GpsError::NoConvergence { what, iterations: MAX_ITER, lo, hi, residual: last.1 })
}

/// Brent's method on a bracket with a sign change.
pub fn brent<F>(what: &'static str, mut f: F, a: f64, b: f64, xtol: f64) -> Result<Root>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(Root { x: a, residual: 0.0, iterations: 0, lo: a, hi: a });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, residual: 0.0, iterations: 0, lo: b, hi: b });
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(GpsError::NoBracket { what, lo: a.min(b), hi: a.max(b), f_lo: fa, f_hi: fb });
    }
    let (mut c, mut fc) = (b, fb);
    let (mut d, mut e) = (b - a, b - a);
    for it in 1..=MAX_ITER {
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
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(Root { x: b, residual: fb, iterations: it, lo: b.min(c), hi: b.max(c) });
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Err(GpsError::NoConvergence { what, iterations: MAX_ITER, lo: b.min(c), hi: b.max(c), residual: fb })
}

/// Plain bisection; used by oracles and for maps that are only piecewise smooth.
pub fn bisect<F>(what: &'static str, mut f: F, lo: f64, hi: f64, xtol: f64) -> Result<Root>
where
    F: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = (lo.min(hi), lo.max(hi));
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(GpsError::NoBracket { what, lo, hi, f_lo, f_hi });
    }
    let lo_negative = f_lo < 0.0;
    let mut it = 0;
    while !width_small(lo, hi, xtol) && it < 2000 {
        it += 1;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(Root { x: mid, residual: 0.0, iterations: it, lo: mid, hi: mid });
        }
        if (fm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    Ok(Root { x, residual: f(x), iterations: it, lo, hi })
}

/// Golden-section search for the minimum of a unimodal function on `[a, b]`.
pub fn golden_min<F>(mut f: F, a: f64, b: f64, xtol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a, b);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > xtol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_finds_sqrt_two() {
        let r = newton_bisect("sqrt", |x| (x * x - 2.0, 2.0 * x), 0.0, 2.0, None, 0.0, 1e-14).unwrap();
        assert!((r.x - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn brent_matches_bisection() {
        let f = |x: f64| x.cos() - x;
        let a = brent("cos", f, 0.0, 1.0, 1e-15).unwrap();
        let b = bisect("cos", f, 0.0, 1.0, 0.0).unwrap();
        assert!((a.x - b.x).abs() < 1e-14);
    }

    #[test]
    fn missing_bracket_is_reported() {
        assert!(matches!(
            brent("pos", |x| x * x + 1.0, -1.0, 1.0, 1e-12),
            Err(GpsError::NoBracket { .. })
        ));
    }

    #[test]
    fn golden_section_locates_parabola_minimum() {
        let (x, _) = golden_min(|x| (x - 0.3).powi(2), 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
    }
}
