//! Off-diagonal decay rate and the constrained free energy.
//!
//! Along the ray `M ≈ γN` the free energy is `F_γ = min (a + γ b)` over
//! rates `(a, b) = (g - λ₁, g - λ₂)` on the feasible curve `q(λ₁, λ₂) = 1`
//! with `λ₁, λ₂ <= g`.  When `γ` lies strictly between `1/γ_c` and `γ_c` the
//! minimizer is interior and satisfies the tangency condition
//! `λ̃₂'(λ₁) = -1/γ`; otherwise it sits at a corner of the curve and the free
//! energy is affine in `γ`.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::roots::brent;
use crate::tilt::Tilted;

/// Relative distance to the critical slope below which the regime is reported as `Boundary`.
pub const BOUNDARY_TOL: f64 = 1e-10;

/// Which branch of the variational problem is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// Interior optimizer: `γ` strictly inside the Cramér interval.
    Cramer,
    /// Corner optimizer: `γ` outside the Cramér interval.
    NonCramer,
    /// `γ` equal to a critical slope within tolerance.
    Boundary,
    /// `h <= 0`: free energy zero.
    Delocalized,
}

/// Solution of the variational problem at `(h, γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateResult {
    pub h: f64,
    pub gamma: f64,
    pub regime: Regime,
    /// Off-diagonal decay `λ̂₁ + γ λ̂₂`; `None` for `h <= 0`.
    pub rate: Option<f64>,
    /// Optimizer `(λ̂₁, λ̂₂)`.
    pub optimizer: Option<(f64, f64)>,
    pub free_energy: f64,
    /// Corner value `g - λ̄₁` (free energy outside the Cramér region).
    pub plateau: Option<f64>,
    /// Interior value, defined only when the optimizer is interior.
    pub interior_free_energy: Option<f64>,
}

impl RateResult {
    /// Rates `(a, b) = (g - λ̂₁, g - λ̂₂)` of the limiting step law.
    pub fn rates(&self, g: f64) -> Option<(f64, f64)> {
        self.optimizer.map(|(l1, l2)| (g - l1, g - l2))
    }
}

/// Rate `a = g - λ₁` where the feasible-curve slope equals `-1/γ`, for `γ` in `(1/γ_c, γ_c)`.
fn tangency_rate(t: &Tilted, gamma: f64, tol: f64) -> Result<(f64, f64)> {
    let x = t.corner_rate();
    let psi = |a: f64| -> f64 {
        match t.boundary_rate(a, tol) {
            Ok(b) => t.boundary_slope(a, b) + 1.0 / gamma,
            Err(_) => f64::NAN,
        }
    };
    // The slope decreases from -1/γ_c at the corner to -γ_c at a = 0, so ψ increases in a.
    let root = brent("tangency point", psi, 0.0, x, 1e-15 * x.max(1e-300))?;
    let b = t.boundary_rate(root.x, tol)?;
    Ok((root.x, b))
}

/// Direct solution of the variational problem for any `γ > 0`, without the symmetry reduction.
pub fn rate_direct(t: &Tilted, gamma: f64, tol: f64) -> Result<RateResult> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return domain(format!("slope must be positive and finite, got {gamma}"));
    }
    let st = *t.state();
    if st.h <= 0.0 {
        return Ok(delocalized(st.h, gamma));
    }
    let g = st.g;
    let x = t.corner_rate();
    let gc = t.gamma_c();
    let on_boundary = |a: f64, b: f64| ((a / b) - 1.0).abs() <= BOUNDARY_TOL;
    let (a, b, regime) = if gamma >= gc || on_boundary(gamma, gc) {
        (x, 0.0, if on_boundary(gamma, gc) { Regime::Boundary } else { Regime::NonCramer })
    } else if gamma <= 1.0 / gc || on_boundary(gamma, 1.0 / gc) {
        (0.0, x, if on_boundary(gamma, 1.0 / gc) { Regime::Boundary } else { Regime::NonCramer })
    } else if gamma == 1.0 {
        (g, g, Regime::Cramer)
    } else {
        let (a, b) = tangency_rate(t, gamma, tol)?;
        (a, b, Regime::Cramer)
    };
    let free_energy = a + gamma * b;
    Ok(RateResult {
        h: st.h,
        gamma,
        regime,
        rate: Some((1.0 + gamma) * g - free_energy),
        optimizer: Some((g - a, g - b)),
        free_energy,
        plateau: Some(x),
        interior_free_energy: if regime == Regime::Cramer { Some(free_energy) } else { None },
    })
}

fn delocalized(h: f64, gamma: f64) -> RateResult {
    RateResult {
        h,
        gamma,
        regime: Regime::Delocalized,
        rate: None,
        optimizer: None,
        free_energy: 0.0,
        plateau: None,
        interior_free_energy: None,
    }
}

/// Free energy and decay rate along slope `γ`.  Slopes below one are mapped
/// to `1/γ` by exchanging the strands: `F_γ = γ F_{1/γ}`.
pub fn rate_and_free_energy(t: &Tilted, gamma: f64, tol: f64) -> Result<RateResult> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return domain(format!("slope must be positive and finite, got {gamma}"));
    }
    if t.h() <= 0.0 {
        return Ok(delocalized(t.h(), gamma));
    }
    if gamma >= 1.0 {
        return rate_direct(t, gamma, tol);
    }
    let mirror = rate_direct(t, 1.0 / gamma, tol)?;
    let (l1, l2) = mirror.optimizer.expect("h > 0");
    Ok(RateResult {
        h: mirror.h,
        gamma,
        regime: mirror.regime,
        rate: mirror.rate.map(|d| gamma * d),
        optimizer: Some((l2, l1)),
        free_energy: gamma * mirror.free_energy,
        plateau: mirror.plateau,
        interior_free_energy: mirror.interior_free_energy.map(|f| gamma * f),
    })
}

/// `(∂F/∂h, ∂F/∂γ)` at a solved point.
///
/// `∂F/∂h = e^{-h} / Σ n K(n+m) e^{-a n - b m}` holds on the interior branch
/// and at the corner `(x, 0)`; the corner `(0, x)` is the mirror image.
pub fn free_energy_derivative(t: &Tilted, r: &RateResult) -> (f64, f64) {
    if r.regime == Regime::Delocalized {
        return (0.0, 0.0);
    }
    let (a, b) = r.rates(t.g()).expect("h > 0");
    let k = t.kernel();
    let h = t.h();
    if a == 0.0 && b > 0.0 {
        // Corner (0, x): F = γ x.
        let dx = (-h - k.ln_damped(1, 0, b, 0.0)).exp();
        return (r.gamma * dx, b);
    }
    let d_h = (-h - k.ln_damped(1, 0, a, b)).exp();
    let d_gamma = if r.regime == Regime::Cramer { b } else { 0.0 };
    (d_h, d_gamma)
}

/// Report of structural checks on `γ ↦ D_h(1, γ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DPropertiesReport {
    pub h: f64,
    pub gammas: Vec<f64>,
    pub rates: Vec<f64>,
    /// Largest `|γ D(1, 1/γ) - D(1, γ)|`, both sides from the direct solver.
    pub max_symmetry_error: f64,
    /// Most negative second divided difference of `D` on the (sorted) samples.
    pub min_second_difference: f64,
    /// Largest violation of `D(2, γ₁+γ₂) <= D(1, γ₁) + D(1, γ₂)`.
    pub max_subadditivity_violation: f64,
    /// `D` at `γ = 1` (zero).
    pub rate_at_one: f64,
    pub violations: Vec<String>,
}

/// Symmetry, convexity and subadditivity of the decay rate on sampled slopes.
pub fn d_properties_check(t: &Tilted, samples: &[f64], tol: f64) -> Result<DPropertiesReport> {
    if t.h() <= 0.0 {
        return domain("decay-rate checks need h > 0");
    }
    let mut gammas: Vec<f64> = samples.to_vec();
    gammas.sort_by(f64::total_cmp);
    let d = |gamma: f64| -> Result<f64> { Ok(rate_direct(t, gamma, tol)?.rate.expect("h > 0")) };
    let rates = gammas.iter().map(|&gm| d(gm)).collect::<Result<Vec<_>>>()?;
    let mut violations = Vec::new();
    let mut max_symmetry_error = 0.0f64;
    for (&gm, &rate) in gammas.iter().zip(&rates) {
        let err = (gm * d(1.0 / gm)? - rate).abs();
        max_symmetry_error = max_symmetry_error.max(err);
        if err > 1e-9 {
            violations.push(format!("symmetry at gamma={gm}: error {err:e}"));
        }
    }
    let mut min_second_difference = f64::INFINITY;
    for w in 1..gammas.len().saturating_sub(1) {
        let (x0, x1, x2) = (gammas[w - 1], gammas[w], gammas[w + 1]);
        let s = ((rates[w + 1] - rates[w]) / (x2 - x1) - (rates[w] - rates[w - 1]) / (x1 - x0)) / (x2 - x0) * 2.0;
        min_second_difference = min_second_difference.min(s);
        if s < -1e-9 {
            violations.push(format!("convexity at gamma={x1}: second difference {s:e}"));
        }
    }
    let mut max_subadditivity_violation = 0.0f64;
    for (i, &g1) in gammas.iter().enumerate() {
        for (j, &g2) in gammas.iter().enumerate().skip(i) {
            let joint = 2.0 * d(0.5 * (g1 + g2))?;
            let v = joint - rates[i] - rates[j];
            max_subadditivity_violation = max_subadditivity_violation.max(v);
            if v > 1e-9 {
                violations.push(format!("subadditivity at ({g1}, {g2}): excess {v:e}"));
            }
        }
    }
    let rate_at_one = d(1.0)?;
    if rate_at_one.abs() > 1e-12 {
        violations.push(format!("rate at gamma=1 is {rate_at_one:e}"));
    }
    Ok(DPropertiesReport {
        h: t.h(),
        gammas,
        rates,
        max_symmetry_error,
        min_second_difference,
        max_subadditivity_violation,
        rate_at_one,
        violations,
    })
}

/// `e^h K(i+j) e^{-a i - b j}`: the step law of the limiting renewal seen from a typical contact.
pub fn limit_step_probability(t: &Tilted, rates: (f64, f64), i: u64, j: u64) -> f64 {
    if i == 0 || j == 0 {
        return 0.0;
    }
    (t.h() + t.kernel().ln_value(i + j) - rates.0 * i as f64 - rates.1 * j as f64).exp()
}

/// Total mass of the limiting step law (one on the feasible curve).
pub fn limit_step_total(t: &Tilted, rates: (f64, f64)) -> f64 {
    t.ln_moment(0, 0, rates.0, rates.1).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Kernel;
    use crate::tilt::{solve, DEFAULT_TOL};

    #[test]
    fn diagonal_has_zero_rate() {
        let k = Kernel::gamma_ratio(1.5).unwrap();
        let t = solve(&k, 1.0, DEFAULT_TOL).unwrap();
        let r = rate_and_free_energy(&t, 1.0, DEFAULT_TOL).unwrap();
        assert_eq!(r.rate, Some(0.0));
        assert!((r.free_energy - 2.0 * t.g()).abs() < 1e-15);
    }

    #[test]
    fn plateau_beyond_critical_slope() {
        let k = Kernel::gamma_ratio(1.5).unwrap();
        let t = solve(&k, 1.0, DEFAULT_TOL).unwrap();
        let r3 = rate_and_free_energy(&t, 3.0, DEFAULT_TOL).unwrap();
        let r5 = rate_and_free_energy(&t, 5.0, DEFAULT_TOL).unwrap();
        assert_eq!(r3.regime, Regime::NonCramer);
        assert_eq!(r3.free_energy, r5.free_energy);
        assert_eq!(r3.free_energy, t.corner_rate());
    }

    #[test]
    fn mirror_matches_direct() {
        let k = Kernel::gamma_ratio(1.5).unwrap();
        let t = solve(&k, 1.0, DEFAULT_TOL).unwrap();
        for &gm in &[0.3, 0.6, 0.8] {
            let a = rate_and_free_energy(&t, gm, DEFAULT_TOL).unwrap();
            let b = rate_direct(&t, gm, DEFAULT_TOL).unwrap();
            assert!((a.free_energy - b.free_energy).abs() < 1e-11, "{gm}: {a:?} {b:?}");
        }
    }
}
