//! Exponential tilt of the pinned renewal and the feasible boundary of the
//! two-parameter tilt.
//!
//! For pinning strength `h > 0` the weights `e^h K(n+m)` have total mass
//! larger than one; the tilt `g` is the unique rate with
//! `Σ_{n,m} e^h K(n+m) e^{-(n+m) g} = 1`.  Tilting the two coordinates
//! separately gives the map
//!
//! `q(λ₁, λ₂) = Σ_{n,m} e^h K(n+m) e^{-(g-λ₁) n - (g-λ₂) m}`,
//!
//! finite on `(-∞, g]²`.  The level set `q = 1` is a concave decreasing curve
//! through the origin that meets the edge `λ₂ = g` at `λ₁ = λ̄₁ < -g`.

use crate::error::{domain, Result};
use crate::kernels::Kernel;
use crate::roots::newton_bisect;

/// Default tolerance on the defining equations.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Solved scalar quantities at one pinning strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltState {
    pub h: f64,
    /// Diagonal tilt; zero for `h <= 0`.
    pub g: f64,
    /// Abscissa where the feasible curve meets `λ₂ = g`; undefined for `h <= 0`.
    pub lambda1_bar: Option<f64>,
    /// Critical slope: the strand ratio where the optimal tilt reaches the corner.
    pub gamma_c: Option<f64>,
    /// `|ln q(0, 0)|` at the solved tilt.
    pub residual_g: f64,
    /// `|ln q(λ̄₁, g)|`.
    pub residual_lambda1_bar: f64,
    pub iterations: usize,
}

impl TiltState {
    /// Free energy outside the Cramér region, `g - λ̄₁`.
    pub fn plateau_free_energy(&self) -> Option<f64> {
        self.lambda1_bar.map(|l| self.g - l)
    }
}

/// Sampled feasible boundary with its slope.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    pub h: f64,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub slope: Vec<f64>,
}

/// A kernel at a fixed pinning strength with its solved tilt.
#[derive(Debug, Clone)]
pub struct Tilted {
    kernel: Kernel,
    state: TiltState,
}

/// `g(h)`: the unique root of `h + ln Σ (t-1) K(t) e^{-t g} = 0`, or zero for `h <= 0`.
pub fn solve_g(kernel: &Kernel, h: f64, tol: f64) -> Result<(f64, f64, usize)> {
    if h.is_nan() || !h.is_finite() {
        return domain(format!("pinning strength must be finite, got {h}"));
    }
    if h <= 0.0 {
        return Ok((0.0, 0.0, 0));
    }
    // ln Σ (t-1)K(t)e^{-tg} <= -2g, so the root lies below h/2.
    let f = |g: f64| {
        let s = kernel.ln_damped(0, 0, g, g);
        let d = kernel.ln_damped(1, 0, g, g);
        (h + s, -2.0 * (d - s).exp())
    };
    let root = newton_bisect("tilt g(h)", f, 0.0, 0.5 * h, None, 0.0, tol)?;
    Ok((root.x, root.residual.abs(), root.iterations))
}

/// `x = g - λ̄₁`: root of `h + ln Σ K(n+m) e^{-x n} = 0`, bracketed in `[g, h]`.
pub fn solve_corner_rate(kernel: &Kernel, h: f64, g: f64, tol: f64) -> Result<(f64, f64, usize)> {
    if h <= 0.0 {
        return domain("the corner of the feasible curve exists only for h > 0");
    }
    let f = |x: f64| {
        let s = kernel.ln_damped(0, 0, x, 0.0);
        let d = kernel.ln_damped(1, 0, x, 0.0);
        (h + s, -(d - s).exp())
    };
    let hi = h.max(2.0 * g);
    let root = newton_bisect("corner rate g - lambda1_bar", f, g, hi, Some(2.0 * g), 0.0, tol)?;
    Ok((root.x, root.residual.abs(), root.iterations))
}

/// Ratio of the damped first moments at the corner: `Σ m K e^{-x n} / Σ n K e^{-x n}`.
pub fn gamma_c_at(kernel: &Kernel, corner_rate: f64) -> f64 {
    let num = kernel.ln_damped(0, 1, corner_rate, 0.0);
    if num.is_infinite() {
        return f64::INFINITY;
    }
    (num - kernel.ln_damped(1, 0, corner_rate, 0.0)).exp()
}

/// Solves the tilt, the corner of the feasible curve and the critical slope.
pub fn solve(kernel: &Kernel, h: f64, tol: f64) -> Result<Tilted> {
    let (g, residual_g, it_g) = solve_g(kernel, h, tol)?;
    if h <= 0.0 {
        let state = TiltState {
            h,
            g,
            lambda1_bar: None,
            gamma_c: None,
            residual_g,
            residual_lambda1_bar: 0.0,
            iterations: it_g,
        };
        return Ok(Tilted { kernel: kernel.clone(), state });
    }
    let (x, residual_l, it_l) = solve_corner_rate(kernel, h, g, tol)?;
    let state = TiltState {
        h,
        g,
        lambda1_bar: Some(g - x),
        gamma_c: Some(gamma_c_at(kernel, x)),
        residual_g,
        residual_lambda1_bar: residual_l,
        iterations: it_g + it_l,
    };
    Ok(Tilted { kernel: kernel.clone(), state })
}

impl Tilted {
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn state(&self) -> &TiltState {
        &self.state
    }

    pub fn h(&self) -> f64 {
        self.state.h
    }

    pub fn g(&self) -> f64 {
        self.state.g
    }

    /// Corner rate `g - λ̄₁`; panics for `h <= 0`.
    pub fn corner_rate(&self) -> f64 {
        self.state.plateau_free_energy().expect("corner rate requires h > 0")
    }

    pub fn gamma_c(&self) -> f64 {
        self.state.gamma_c.expect("critical slope requires h > 0")
    }

    /// `ln q(λ₁, λ₂)`; `+∞` when either argument exceeds `g`.
    pub fn ln_q(&self, lambda1: f64, lambda2: f64) -> f64 {
        let (a, b) = (self.state.g - lambda1, self.state.g - lambda2);
        if a < 0.0 || b < 0.0 {
            return f64::INFINITY;
        }
        self.state.h + self.kernel.ln_damped(0, 0, a, b)
    }

    pub fn q(&self, lambda1: f64, lambda2: f64) -> f64 {
        self.ln_q(lambda1, lambda2).exp()
    }

    /// `ln Σ n^i m^j e^h K(n+m) e^{-a n - b m}` in the rate variables `a = g - λ₁`, `b = g - λ₂`.
    pub fn ln_moment(&self, i: u32, j: u32, a: f64, b: f64) -> f64 {
        self.state.h + self.kernel.ln_damped(i, j, a, b)
    }

    /// Rate `b = g - λ₂` on the feasible curve above the rate `a = g - λ₁`.
    pub fn boundary_rate(&self, a: f64, tol: f64) -> Result<f64> {
        let x = self.corner_rate();
        if !(a >= 0.0 && a <= x * (1.0 + 1e-15)) {
            return domain(format!("rate {a} outside the feasible range [0, {x}]"));
        }
        let top = self.ln_moment(0, 0, a, 0.0);
        if top <= tol {
            return Ok(0.0);
        }
        let f = |b: f64| {
            let s = self.ln_moment(0, 0, a, b);
            let d = self.ln_moment(0, 1, a, b);
            (s, -(d - s).exp())
        };
        // ln q decreases at least at unit rate in b, so the root lies below `top`.
        let hi = top + (1e-6 * top).max(1e-10);
        let root = newton_bisect("feasible boundary", f, 0.0, hi, None, 0.0, tol)?;
        Ok(root.x)
    }

    /// `(λ̃₂(λ₁), λ̃₂'(λ₁))` on the feasible curve, for `λ₁` in `[λ̄₁, g]`.
    pub fn boundary(&self, lambda1: f64, tol: f64) -> Result<(f64, f64)> {
        let g = self.state.g;
        let a = g - lambda1;
        let b = self.boundary_rate(a, tol)?;
        Ok((g - b, self.boundary_slope(a, b)))
    }

    /// Slope `-∂₁q/∂₂q` of the feasible curve at rates `(a, b)`.
    pub fn boundary_slope(&self, a: f64, b: f64) -> f64 {
        -(self.kernel.ln_damped(1, 0, a, b) - self.kernel.ln_damped(0, 1, a, b)).exp()
    }

    /// Boundary sampled at `points` equally spaced abscissae on `[λ̄₁, 0]`.
    pub fn boundary_curve(&self, points: usize, tol: f64) -> Result<BoundaryCurve> {
        let lo = self.state.lambda1_bar.expect("boundary requires h > 0");
        let mut curve = BoundaryCurve { h: self.state.h, lambda1: vec![], lambda2: vec![], slope: vec![] };
        for k in 0..points {
            let l1 = if points == 1 { lo } else { lo * (1.0 - k as f64 / (points - 1) as f64) };
            let (l2, d) = self.boundary(l1, tol)?;
            curve.lambda1.push(l1);
            curve.lambda2.push(l2);
            curve.slope.push(d);
        }
        Ok(curve)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_pinning_has_zero_tilt() {
        let k = Kernel::gamma_ratio(1.5).unwrap();
        let t = solve(&k, 0.0, DEFAULT_TOL).unwrap();
        assert_eq!(t.g(), 0.0);
        assert!(t.state().gamma_c.is_none());
    }

    #[test]
    fn curve_endpoints() {
        let k = Kernel::gamma_ratio(1.5).unwrap();
        let t = solve(&k, 1.0, DEFAULT_TOL).unwrap();
        let (l2, d) = t.boundary(0.0, DEFAULT_TOL).unwrap();
        assert!(l2.abs() < 1e-12 && (d + 1.0).abs() < 1e-12, "{l2} {d}");
        let (l2, _) = t.boundary(t.state().lambda1_bar.unwrap(), DEFAULT_TOL).unwrap();
        assert!((l2 - t.g()).abs() < 1e-10, "{l2} {}", t.g());
        assert!(t.ln_q(0.0, 0.0).abs() < 1e-12);
    }
}
