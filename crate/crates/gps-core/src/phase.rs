//! Phase diagrams in the pinning strength at fixed strand ratio.
//!
//! Transitions inside the localized phase happen where `γ_c(h) - γ` changes
//! sign.  The scanner evaluates `γ_c` on a log-spaced grid, refines every sign
//! change by bisection, classifies the order from the second moment of the
//! kernel and the slope `γ_c'`, and reports near-tangencies without deciding
//! them.  The small-`h` part measures the critical behaviour of the free
//! energy near the denaturation point `h = 0`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::kernels::{Kernel, PinningModel};
use crate::ldp::{free_energy_derivative, rate_and_free_energy, Regime};
use crate::roots::{bisect, brent};
use crate::tilt::{solve, Tilted, DEFAULT_TOL};

/// Default number of grid points of a scan.
pub const DEFAULT_GRID: usize = 512;
/// Default bracket width of a located transition.
pub const DEFAULT_TOL_H: f64 = 1e-8;
/// Grid extrema of `|γ_c - γ|` below this value are reported as tangencies.
pub const TANGENCY_TOL: f64 = 1e-6;

/// Kind of a located critical point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TransitionKind {
    /// The localization transition at `h = 0`.
    Denaturation,
    /// `γ_c` decreases through `γ`: Cramér below, non-Cramér above.
    CramerExit,
    /// `γ_c` increases through `γ`: non-Cramér below, Cramér above.
    CramerEntry,
    /// `γ_c` touches `γ` without a detected sign change.
    Tangential,
}

/// Order of a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TransitionOrder {
    Second,
    /// Lower bound only: the second derivative is continuous.
    ThirdOrMore,
    NoTransition,
    Undetermined,
}

/// A located critical point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionRecord {
    pub h_star: f64,
    pub kind: TransitionKind,
    pub bracket: (f64, f64),
    /// `γ_c'(h★)`.
    pub gamma_c_slope: f64,
    /// Central finite difference of `γ_c` across `h★`, for the sign test.
    pub gamma_c_slope_fd: f64,
    pub order: TransitionOrder,
    /// `F''(Cramér side) - F''(other side)` from the closed form; zero when continuous.
    pub jump: f64,
    /// The same gap measured by finite differences of `∂F/∂h` on both sides.
    pub jump_fd: Option<f64>,
}

/// Small-`h` behaviour of the regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SmallHRegime {
    /// `Σ t² K(t) < ∞`: the free energy follows the diagonal one.
    FiniteSecondMoment,
    /// Infinite second moment and `γ < 1/(α-1)`: interior optimizer.
    Cramer,
    /// Infinite second moment and `γ > 1/(α-1)`: corner optimizer.
    Corner,
}

/// Fitted critical behaviour of `F_γ(h)` as `h ↘ 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalExponentReport {
    pub alpha: f64,
    pub gamma: f64,
    pub h: Vec<f64>,
    pub free_energy: Vec<f64>,
    pub diagonal_free_energy: Vec<f64>,
    /// Least-squares slope of `ln F_γ` against `ln h`.
    pub fitted_exponent: f64,
    /// `F_γ / F_1` at the smallest `h`.
    pub fitted_c_alpha_gamma: f64,
    /// `F_γ / h` at the smallest `h`.
    pub ratio_over_h: f64,
    /// `2 / Σ t (t-1) K(t)` when the second moment is finite.
    pub moment_constant: Option<f64>,
    pub regime: SmallHRegime,
}

/// `γ_c` at scan parameter `h` under `model`.
pub fn gamma_c_of(model: &PinningModel, h: f64) -> Result<f64> {
    let (k, h_eff) = model.at(h)?;
    if h_eff <= 0.0 {
        return domain(format!("critical slope undefined in the delocalized phase (effective h = {h_eff})"));
    }
    Ok(solve(&k, h_eff, DEFAULT_TOL)?.gamma_c())
}

/// Limit of `γ_c(h)` as `h → ∞`: `Σ m K(1+m) / Σ K(1+m)`.
pub fn gamma_c_large_h(k: &Kernel) -> f64 {
    1.0 / k.ln_diagonal(0, 0.0).exp()
}

/// Closed form of `γ_c'(h)` for a fixed kernel:
/// `-(c'/S₁₀)(S₁₁ - γ_c S₂₀)` with sums at `(c, 0)` and `c' = e^{-h}/S₁₀`.
pub fn gamma_c_derivative(t: &Tilted) -> f64 {
    let k = t.kernel();
    let x = t.corner_rate();
    let s10 = k.ln_damped(1, 0, x, 0.0).exp();
    let s11 = k.ln_damped(1, 1, x, 0.0).exp();
    let s20 = k.ln_damped(2, 0, x, 0.0).exp();
    let c_prime = (-t.h()).exp() / s10;
    -c_prime / s10 * (s11 - t.gamma_c() * s20)
}

/// Closed form of the second-derivative gap at a transition where `γ_c = γ`:
/// `-e^h F'^3 (S₁₁ - γ S₂₀)² / (S₀₂ - 2γ S₁₁ + γ² S₂₀)`, `F' = e^{-h}/S₁₀`.
/// Zero when `Σ m² K = ∞`.
pub fn second_derivative_jump(t: &Tilted, gamma: f64) -> f64 {
    let k = t.kernel();
    let x = t.corner_rate();
    let s02 = k.ln_damped(0, 2, x, 0.0);
    if s02.is_infinite() {
        return 0.0;
    }
    let s10 = k.ln_damped(1, 0, x, 0.0).exp();
    let s11 = k.ln_damped(1, 1, x, 0.0).exp();
    let s20 = k.ln_damped(2, 0, x, 0.0).exp();
    let s02 = s02.exp();
    let f1 = (-t.h()).exp() / s10;
    let num = s11 - gamma * s20;
    -t.h().exp() * f1.powi(3) * num * num / (s02 - 2.0 * gamma * s11 + gamma * gamma * s20)
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| if i + 1 == n { hi } else { (a + (b - a) * i as f64 / (n - 1) as f64).exp() }).collect()
}

/// Locates every sign change of `γ_c(h) - γ` on `h_range`.
///
/// A lower end of exactly zero adds the denaturation point and starts the
/// grid at `1e-6 * hi`.
pub fn scan_transitions(
    model: &PinningModel,
    gamma: f64,
    h_range: (f64, f64),
    grid: usize,
    tol_h: f64,
) -> Result<Vec<TransitionRecord>> {
    let (lo, hi) = h_range;
    if !(lo >= 0.0 && hi > lo) || grid < 2 || !(tol_h > 0.0) {
        return domain(format!("invalid scan: range ({lo}, {hi}), grid {grid}, tol {tol_h}"));
    }
    if !(gamma > 0.0) {
        return domain(format!("slope must be positive, got {gamma}"));
    }
    let mut records = Vec::new();
    let start = if lo == 0.0 {
        records.push(TransitionRecord {
            h_star: 0.0,
            kind: TransitionKind::Denaturation,
            bracket: (0.0, 0.0),
            gamma_c_slope: f64::NAN,
            gamma_c_slope_fd: f64::NAN,
            order: TransitionOrder::Undetermined,
            jump: 0.0,
            jump_fd: None,
        });
        1e-6 * hi
    } else {
        lo
    };
    let hs = log_grid(start, hi, grid);
    let values: Vec<f64> = hs.par_iter().map(|&h| gamma_c_of(model, h)).collect::<Result<Vec<_>>>()?;
    let diff: Vec<f64> = values.iter().map(|v| v - gamma).collect();
    for w in 0..hs.len() - 1 {
        let (d0, d1) = (diff[w], diff[w + 1]);
        if d0 == 0.0 || d0.signum() != d1.signum() {
            if d0 == 0.0 && w > 0 && diff[w - 1].signum() == d1.signum() {
                continue;
            }
            let f = |h: f64| gamma_c_of(model, h).map(|v| v - gamma).unwrap_or(f64::NAN);
            let root = bisect("transition", f, hs[w], hs[w + 1], tol_h)?;
            let kind = if d0 > 0.0 || d1 < 0.0 { TransitionKind::CramerExit } else { TransitionKind::CramerEntry };
            records.push(classify_order(model, gamma, root.x, (root.lo, root.hi), kind)?);
        }
    }
    for w in 1..hs.len() - 1 {
        let (a, b, c) = (diff[w - 1].abs(), diff[w].abs(), diff[w + 1].abs());
        let same_sign = diff[w - 1].signum() == diff[w].signum() && diff[w].signum() == diff[w + 1].signum();
        if same_sign && b < a && b < c && b < TANGENCY_TOL {
            let fd = (values[w + 1] - values[w - 1]) / (hs[w + 1] - hs[w - 1]);
            records.push(TransitionRecord {
                h_star: hs[w],
                kind: TransitionKind::Tangential,
                bracket: (hs[w - 1], hs[w + 1]),
                gamma_c_slope: fd,
                gamma_c_slope_fd: fd,
                order: TransitionOrder::Undetermined,
                jump: 0.0,
                jump_fd: None,
            });
        }
    }
    records.sort_by(|a, b| a.h_star.total_cmp(&b.h_star));
    Ok(records)
}

/// Derivative of the free energy with respect to the scan parameter, by
/// central differences of `F` (for temperature models) or the closed form.
fn free_energy_slope(model: &PinningModel, gamma: f64, h: f64) -> Result<f64> {
    match model {
        PinningModel::Fixed(k) => {
            let t = solve(k, h, DEFAULT_TOL)?;
            let r = rate_and_free_energy(&t, gamma, DEFAULT_TOL)?;
            Ok(free_energy_derivative(&t, &r).0)
        }
        PinningModel::Temperature { .. } => {
            let d = 1e-5 * h.max(1e-3);
            let f = |h: f64| -> Result<f64> {
                let (k, he) = model.at(h)?;
                Ok(rate_and_free_energy(&solve(&k, he, DEFAULT_TOL)?, gamma, DEFAULT_TOL)?.free_energy)
            };
            Ok((f(h + d)? - f(h - d)?) / (2.0 * d))
        }
    }
}

/// Fills in `γ_c'`, the order and the second-derivative gap of a located transition.
pub fn classify_order(
    model: &PinningModel,
    gamma: f64,
    h_star: f64,
    bracket: (f64, f64),
    kind: TransitionKind,
) -> Result<TransitionRecord> {
    let delta = 1e-5 * h_star.max(1e-3);
    let fd = (gamma_c_of(model, h_star + delta)? - gamma_c_of(model, h_star - delta)?) / (2.0 * delta);
    let (slope, jump, order) = match model {
        PinningModel::Fixed(k) => {
            let t = solve(k, h_star, DEFAULT_TOL)?;
            let slope = gamma_c_derivative(&t);
            let alpha = k.alpha();
            if slope == 0.0 {
                (slope, 0.0, TransitionOrder::ThirdOrMore)
            } else if alpha == 2.0 {
                (slope, 0.0, TransitionOrder::Undetermined)
            } else if k.second_moment_finite() {
                (slope, second_derivative_jump(&t, gamma), TransitionOrder::Second)
            } else {
                (slope, 0.0, TransitionOrder::ThirdOrMore)
            }
        }
        PinningModel::Temperature { .. } => {
            // No closed form for the jump when the kernel moves with the scan parameter.
            let order = if model.alpha() < 2.0 { TransitionOrder::ThirdOrMore } else { TransitionOrder::Undetermined };
            (fd, 0.0, order)
        }
    };
    let jump_fd = if order == TransitionOrder::Second {
        Some(jump_by_finite_differences(model, gamma, h_star, slope > 0.0)?)
    } else {
        None
    };
    Ok(TransitionRecord { h_star, kind, bracket, gamma_c_slope: slope, gamma_c_slope_fd: fd, order, jump, jump_fd })
}

/// One-sided second derivatives of `F` from `∂F/∂h`, Richardson-extrapolated,
/// returned as `F''(Cramér side) - F''(other side)`.
fn jump_by_finite_differences(model: &PinningModel, gamma: f64, h_star: f64, cramer_above: bool) -> Result<f64> {
    let d0 = free_energy_slope(model, gamma, h_star)?;
    let side = |sign: f64| -> Result<f64> {
        let mut est = Vec::new();
        for &delta in &[2e-4, 1e-4] {
            let d = free_energy_slope(model, gamma, h_star + sign * delta)?;
            est.push((d - d0) / (sign * delta));
        }
        Ok(2.0 * est[1] - est[0])
    };
    let above = side(1.0)?;
    let below = side(-1.0)?;
    Ok(if cramer_above { above - below } else { below - above })
}

/// `(a₁^α - a₂^α)/(a₁ - a₂)`, with the removable singularity at `a₁ = a₂` handled by a series.
fn b_alpha(alpha: f64, a1: f64, a2: f64) -> f64 {
    let m = 0.5 * (a1 + a2);
    let d = 0.5 * (a1 - a2);
    if d.abs() > 1e-3 * m {
        (a1.powf(alpha) - a2.powf(alpha)) / (a1 - a2)
    } else {
        let r = (d / m).powi(2);
        let c2 = (alpha - 1.0) * (alpha - 2.0) / 6.0;
        let c4 = c2 * (alpha - 3.0) * (alpha - 4.0) / 20.0;
        let c6 = c4 * (alpha - 5.0) * (alpha - 6.0) / 42.0;
        alpha * m.powf(alpha - 1.0) * (1.0 + r * (c2 + r * (c4 + r * c6)))
    }
}

/// Limit of `F_γ(h)/F_1(h)` as `h ↘ 0` for `α` in (1, 2) and `γ >= 1`:
/// `½ min (a₁ + γ a₂)` subject to `b_α(a) = α`.  For `γ >= 1/(α-1)` the
/// minimizer is the corner `a₂ = 0` and the value is `α^{1/(α-1)}/2`.
pub fn limit_c_alpha_gamma(alpha: f64, gamma: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return domain(format!("limit problem needs alpha in (1, 2), got {alpha}"));
    }
    if !(gamma >= 1.0) {
        return domain(format!("limit problem needs gamma >= 1, got {gamma}"));
    }
    if gamma == 1.0 {
        return Ok(1.0);
    }
    let a1_max = alpha.powf(1.0 / (alpha - 1.0));
    if gamma >= 1.0 / (alpha - 1.0) {
        return Ok(0.5 * a1_max);
    }
    let a2_of = |a1: f64| -> f64 {
        if b_alpha(alpha, a1, 0.0) >= alpha {
            return 0.0;
        }
        bisect("constraint", |a2| b_alpha(alpha, a1, a2) - alpha, 0.0, 1.0, 1e-16).map(|r| r.x).unwrap_or(f64::NAN)
    };
    // Stationarity: (1 - a₂^{α-1}) / (a₁^{α-1} - 1) = γ; the left side runs from 1 to 1/(α-1).
    let psi = |a1: f64| {
        let a2 = a2_of(a1);
        (1.0 - a2.powf(alpha - 1.0)) / (a1.powf(alpha - 1.0) - 1.0) - gamma
    };
    let root = brent("limit tangency", psi, 1.0 + 1e-7, a1_max, 1e-15)?;
    let a2 = a2_of(root.x);
    Ok(0.5 * (root.x + gamma * a2))
}

/// Free energies along a decreasing grid of small `h` and fitted exponents.
pub fn small_h_exponent(k: &Kernel, gamma: f64, h_grid: &[f64]) -> Result<CriticalExponentReport> {
    if h_grid.len() < 2 {
        return domain("exponent fit needs at least two grid points");
    }
    if h_grid.iter().any(|h| !(*h > 0.0)) || h_grid.windows(2).any(|w| w[1] >= w[0]) {
        return domain("h grid must be positive and strictly decreasing");
    }
    let rows = h_grid
        .par_iter()
        .map(|&h| -> Result<(f64, f64)> {
            let t = solve(k, h, DEFAULT_TOL)?;
            let r = rate_and_free_energy(&t, gamma, DEFAULT_TOL)?;
            Ok((r.free_energy, 2.0 * t.g()))
        })
        .collect::<Result<Vec<_>>>()?;
    let free_energy: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let diagonal: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let xs: Vec<f64> = h_grid.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = free_energy.iter().map(|f| f.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let last = h_grid.len() - 1;
    let alpha = k.alpha();
    let moment_constant = if k.second_moment_finite() {
        let mean_step = k.ln_damped(1, 0, 0.0, 0.0).exp() * 2.0;
        Some(2.0 / mean_step)
    } else {
        None
    };
    let regime = if k.second_moment_finite() {
        SmallHRegime::FiniteSecondMoment
    } else if gamma < 1.0 / (alpha - 1.0) {
        SmallHRegime::Cramer
    } else {
        SmallHRegime::Corner
    };
    Ok(CriticalExponentReport {
        alpha,
        gamma,
        h: h_grid.to_vec(),
        fitted_exponent: sxy / sxx,
        fitted_c_alpha_gamma: free_energy[last] / diagonal[last],
        ratio_over_h: free_energy[last] / h_grid[last],
        free_energy,
        diagonal_free_energy: diagonal,
        moment_constant,
        regime,
    })
}

/// Regime of the variational problem at `(h, γ)` under `model`.
pub fn regime_at(model: &PinningModel, gamma: f64, h: f64) -> Result<Regime> {
    let (k, he) = model.at(h)?;
    Ok(rate_and_free_energy(&solve(&k, he, DEFAULT_TOL)?, gamma, DEFAULT_TOL)?.regime)
}

/// Locates `h` with `γ_c(h) = γ` inside a known bracket (used by tests of continuity).
pub fn locate_crossing(model: &PinningModel, gamma: f64, lo: f64, hi: f64, tol_h: f64) -> Result<f64> {
    let f = |h: f64| gamma_c_of(model, h).map(|v| v - gamma).unwrap_or(f64::NAN);
    Ok(brent("crossing", f, lo, hi, tol_h)?.x)
}
