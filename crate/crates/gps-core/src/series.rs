//! Damped sums of sequences that are completely monotone beyond a finite head.
//!
//! Every built-in sequence has the form `a(t) = head(t)` for finitely many
//! small `t` and `a(t) = scale * b(t)` beyond, where `b` is a Laplace
//! transform `b(t) = ∫_0^∞ w(u) e^{-ut} du` with a positive weight `w`:
//!
//! * power laws `(t + shift)^{-s} = Γ(s)^{-1} ∫ u^{s-1} e^{-u (t + shift)} du`;
//! * gamma ratios `|Γ(t-α)/(Γ(-α) t!)| = |c_α| ∫ e^{-u (t-α)} (1-e^{-u})^α du`
//!   with `c_α = 1/(Γ(-α)Γ(1+α))`, valid for `t > α`.
//!
//! Exchanging sum and integral turns any damped single or double sum into a
//! one-dimensional integral of elementary functions (Eulerian rational
//! functions of `e^{-u-x}`).  The integrand is positive, so nothing cancels,
//! and after the substitution `u = e^v` it is analytic in a strip around the
//! real axis; the trapezoid rule then converges geometrically.  Below the
//! smallest scale of the integrand it is a pure power of `u`, and that part is
//! summed in closed form.

use std::sync::Arc;

use statrs::function::gamma::ln_gamma;

/// Step of the trapezoid rule in `v = ln u`.
const STEP: f64 = 0.2;
/// How far (in `ln u`) below the smallest scale the explicit nodes extend.
const LOWER_MARGIN: f64 = 36.0;
/// Target decay of the integrand at the upper end, in e-folds.
const UPPER_EFOLDS: f64 = 46.0;
/// Number of gamma-ratio magnitudes cached by the multiplicative recurrence.
pub(crate) const GAMMA_CACHE: usize = 1 << 14;

/// Completely monotone base law with its Laplace weight.
#[derive(Debug, Clone)]
pub(crate) enum BaseLaw {
    /// `(t + shift)^{-s}` for `t >= t_min`, with `t_min + shift > 0` and `s > 0`.
    Power { s: f64, shift: f64, t_min: u32, ln_gamma_s: f64 },
    /// `|Γ(t-α)/(Γ(-α) t!)|` for `t >= t_min = floor(α) + 1`.
    GammaRatio { alpha: f64, t_min: u32, ln_c: f64, ln_abs_gamma_neg: f64, cache: Arc<[f64]> },
}

impl BaseLaw {
    pub(crate) fn power(s: f64, shift: f64, t_min: u32) -> BaseLaw {
        debug_assert!(s > 0.0 && t_min as f64 + shift > 0.0);
        BaseLaw::Power { s, shift, t_min, ln_gamma_s: ln_gamma(s) }
    }

    /// Gamma-ratio law; `alpha` must be positive and not an integer.
    pub(crate) fn gamma_ratio(alpha: f64) -> BaseLaw {
        let t_min = alpha.floor() as u32 + 1;
        let t_min = t_min.max(2);
        let sin = (std::f64::consts::PI * alpha).sin();
        let ln_c = (sin.abs() / std::f64::consts::PI).ln();
        // |Γ(-α)| through the reflection formula Γ(-α)Γ(1+α) = -π / sin(πα).
        let ln_abs_gamma_neg = std::f64::consts::PI.ln() - sin.abs().ln() - ln_gamma(1.0 + alpha);
        let cache = signed_gamma_ratio_values(alpha, GAMMA_CACHE).iter().map(|v| v.abs()).collect::<Vec<_>>();
        BaseLaw::GammaRatio { alpha, t_min, ln_c, ln_abs_gamma_neg, cache: cache.into() }
    }

    pub(crate) fn t_min(&self) -> u32 {
        match self {
            BaseLaw::Power { t_min, .. } | BaseLaw::GammaRatio { t_min, .. } => *t_min,
        }
    }

    /// Exponent `s` of the tail `b(t) ~ C t^{-s}`.
    pub(crate) fn tail_exponent(&self) -> f64 {
        match self {
            BaseLaw::Power { s, .. } => *s,
            BaseLaw::GammaRatio { alpha, .. } => 1.0 + alpha,
        }
    }

    /// Constant `C` of the tail `b(t) ~ C t^{-s}`.
    pub(crate) fn tail_constant(&self) -> f64 {
        match self {
            BaseLaw::Power { .. } => 1.0,
            BaseLaw::GammaRatio { ln_abs_gamma_neg, .. } => (-ln_abs_gamma_neg).exp(),
        }
    }

    pub(crate) fn ln_value(&self, t: u64) -> f64 {
        match self {
            BaseLaw::Power { s, shift, .. } => -s * (t as f64 + shift).ln(),
            BaseLaw::GammaRatio { alpha, cache, ln_abs_gamma_neg, .. } => {
                if (t as usize) < cache.len() {
                    cache[t as usize].ln()
                } else {
                    let t = t as f64;
                    ln_gamma(t - alpha) - ln_gamma(t + 1.0) - ln_abs_gamma_neg
                }
            }
        }
    }

    pub(crate) fn value(&self, t: u64) -> f64 {
        match self {
            BaseLaw::Power { s, shift, .. } => (t as f64 + shift).powf(-s),
            BaseLaw::GammaRatio { cache, .. } if (t as usize) < cache.len() => cache[t as usize],
            _ => self.ln_value(t).exp(),
        }
    }

    /// Logarithm of the Laplace weight `w(u)`.
    fn ln_weight(&self, u: f64) -> f64 {
        match self {
            BaseLaw::Power { s, shift, ln_gamma_s, .. } => (s - 1.0) * u.ln() - shift * u - ln_gamma_s,
            BaseLaw::GammaRatio { alpha, ln_c, .. } => ln_c + alpha * u + alpha * (-(-u).exp_m1()).ln(),
        }
    }

    /// Exponent `κ` of `w(u) ~ W u^κ` as `u -> 0`.
    fn small_exponent(&self) -> f64 {
        match self {
            BaseLaw::Power { s, .. } => s - 1.0,
            BaseLaw::GammaRatio { alpha, .. } => *alpha,
        }
    }

    /// Exponential growth rate `ρ` of `w(u) ~ e^{ρ u}` as `u -> ∞`.
    fn growth_rate(&self) -> f64 {
        match self {
            BaseLaw::Power { shift, .. } => -shift,
            BaseLaw::GammaRatio { alpha, .. } => *alpha,
        }
    }
}

/// Signed values `Γ(t-α)/(Γ(-α) t!)` for `t = 0..len` from the ratio recurrence.
pub(crate) fn signed_gamma_ratio_values(alpha: f64, len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len.max(3)];
    v[0] = 1.0;
    v[1] = -alpha;
    for t in 1..v.len() - 1 {
        v[t + 1] = v[t] * (t as f64 - alpha) / (t as f64 + 1.0);
    }
    // K(2) = α(α-1)/2 exactly; the recurrence reproduces it, the closed form removes one rounding.
    v[2] = alpha * (alpha - 1.0) / 2.0;
    for t in 2..v.len() - 1 {
        v[t + 1] = v[t] * (t as f64 - alpha) / (t as f64 + 1.0);
    }
    v.truncate(len);
    v
}

/// A positive sequence `a(t)`, `t >= first`: explicit head values, then `scale * b(t)`.
#[derive(Debug, Clone)]
pub(crate) struct Series {
    pub first: u32,
    pub head: Vec<f64>,
    pub scale: f64,
    pub law: BaseLaw,
}

/// Eulerian polynomials `A_l(r)`, `l = 1..=8`, coefficients in increasing powers.
const EULERIAN: [&[f64]; 9] = [
    &[1.0],
    &[1.0],
    &[1.0, 1.0],
    &[1.0, 4.0, 1.0],
    &[1.0, 11.0, 11.0, 1.0],
    &[1.0, 26.0, 66.0, 26.0, 1.0],
    &[1.0, 57.0, 302.0, 302.0, 57.0, 1.0],
    &[1.0, 120.0, 1191.0, 2416.0, 1191.0, 120.0, 1.0],
    &[1.0, 247.0, 4293.0, 15619.0, 15619.0, 4293.0, 247.0, 1.0],
];

pub(crate) const MAX_POWER: u32 = 6;

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `E_l(r) = Σ_{n>=0} n^l r^n` (with `0^0 = 1`) for `l = 0..=p`, given `r` and `q = 1 - r`.
fn eulerian_sums(p: u32, r: f64, q: f64, out: &mut [f64; 9]) {
    out[0] = 1.0 / q;
    let mut qpow = q;
    for l in 1..=p as usize {
        qpow *= q;
        let poly = EULERIAN[l].iter().rev().fold(0.0, |acc, c| acc * r + c);
        out[l] = r * poly / qpow;
    }
}

/// `S(p, k) = Σ_{n>=0} (n+k)^p r^n` from the Eulerian sums.
fn shifted_sum(p: u32, k: u32, e: &[f64; 9]) -> f64 {
    if k == 0 {
        return e[p as usize];
    }
    let kf = k as f64;
    (0..=p).map(|l| binomial(p, l) * kf.powi((p - l) as i32) * e[l as usize]).sum()
}

/// Geometric factor `r^k` computed in the log domain.
fn rpow(ln_r: f64, k: u32) -> f64 {
    (ln_r * k as f64).exp()
}

impl Series {
    /// Last index covered by the explicit head, plus one.
    pub(crate) fn head_end(&self) -> u32 {
        self.first + self.head.len() as u32
    }

    fn base_start(&self) -> u32 {
        self.law.t_min().max(self.first)
    }

    pub(crate) fn value(&self, t: u64) -> f64 {
        if t < self.first as u64 {
            0.0
        } else if t < self.head_end() as u64 {
            self.head[(t - self.first as u64) as usize]
        } else {
            self.scale * self.law.value(t)
        }
    }

    pub(crate) fn ln_value(&self, t: u64) -> f64 {
        if t < self.first as u64 {
            f64::NEG_INFINITY
        } else if t < self.head_end() as u64 {
            self.head[(t - self.first as u64) as usize].ln()
        } else {
            self.scale.ln() + self.law.ln_value(t)
        }
    }

    /// Head value minus the base contribution at `t`, for `t` inside the head.
    fn head_correction(&self, t: u32) -> f64 {
        let base = if t >= self.base_start() { self.scale * self.law.value(t as u64) } else { 0.0 };
        self.head[(t - self.first) as usize] - base
    }

    /// `ln Σ_{t>=first} t^p a(t) e^{-x t}`; `+∞` when the sum diverges.
    pub(crate) fn ln_single(&self, p: u32, x: f64) -> f64 {
        assert!(p <= MAX_POWER);
        if x < 0.0 || x.is_nan() {
            return f64::INFINITY;
        }
        let kappa = self.law.small_exponent();
        if x == 0.0 && kappa - p as f64 <= 0.0 {
            return f64::INFINITY;
        }
        let tm = self.base_start();
        let scales = [x];
        let mut e = [0.0; 9];
        let integral = self.integrate(tm as f64, &scales, kappa + 1.0 - if x == 0.0 { (p + 1) as f64 } else { 0.0 }, |u| {
            let y = u + x;
            let r = (-y).exp();
            let q = -(-y).exp_m1();
            eulerian_sums(p, r, q, &mut e);
            shifted_sum(p, tm, &e)
        });
        let mut total = self.scale * integral * (-x * (tm - self.first) as f64).exp();
        for t in self.first..self.head_end() {
            let c = self.head_correction(t);
            if c != 0.0 {
                total += c * (t as f64).powi(p as i32) * (-x * (t - self.first) as f64).exp();
            }
        }
        -x * self.first as f64 + total.ln()
    }

    /// `ln Σ_{n,m>=1} n^i m^j a(n+m) e^{-a n - b m}`; `+∞` when the sum diverges.
    pub(crate) fn ln_double(&self, i: u32, j: u32, a: f64, b: f64) -> f64 {
        assert!(i <= MAX_POWER && j <= MAX_POWER);
        if a < 0.0 || b < 0.0 || a.is_nan() || b.is_nan() {
            return f64::INFINITY;
        }
        let kappa = self.law.small_exponent();
        let poles = if a == 0.0 { (i + 1) as f64 } else { 0.0 } + if b == 0.0 { (j + 1) as f64 } else { 0.0 };
        let exponent = kappa + 1.0 - poles;
        if exponent <= 0.0 {
            return f64::INFINITY;
        }
        let tm = self.base_start().max(2);
        let scales = [a, b];
        let mut e1 = [0.0; 9];
        let mut e2 = [0.0; 9];
        let integral = self.integrate(tm as f64, &scales, exponent, |u| {
            let y1 = u + a;
            let y2 = u + b;
            let (r1, q1) = ((-y1).exp(), -(-y1).exp_m1());
            let (r2, q2) = ((-y2).exp(), -(-y2).exp_m1());
            eulerian_sums(i, r1, q1, &mut e1);
            eulerian_sums(j, r2, q2, &mut e2);
            // Σ_{n+m>=tm} n^i m^j r1^{n-1} r2^{m-1} with the common factor e^{-u (tm-2)} removed.
            let mut psi = rpow(-a, tm - 2) * shifted_sum(i, tm - 1, &e1) * shifted_sum(j, 1, &e2);
            for n in 1..tm - 1 {
                let k = tm - 1 - n;
                psi += (n as f64).powi(i as i32) * rpow(-a, n - 1) * rpow(-b, k) * shifted_sum(j, k + 1, &e2);
            }
            psi
        });
        let mut total = self.scale * integral;
        for t in 2.max(self.first)..self.head_end() {
            let c = self.head_correction(t);
            if c != 0.0 {
                total += c * inner_scaled(i, j, a, b, t);
            }
        }
        -a - b + total.ln()
    }

    /// Trapezoid rule for `∫_0^∞ w(u) e^{-c u} ψ(u) du` in the variable `v = ln u`.
    ///
    /// `scales` are the positive damping scales of `ψ`; `exponent` is the power
    /// of `u` (in the `v` measure) of the integrand below the smallest scale.
    fn integrate<F: FnMut(f64) -> f64>(&self, c: f64, scales: &[f64], exponent: f64, mut psi: F) -> f64 {
        let smallest = scales.iter().copied().filter(|s| *s > 0.0).fold(1.0f64, f64::min);
        let v_lo = smallest.ln() - LOWER_MARGIN;
        let rate = c - self.law.growth_rate();
        debug_assert!(rate > 0.0);
        let kappa = self.law.small_exponent().max(0.0);
        let u_hi = (UPPER_EFOLDS + kappa * (1.0 + UPPER_EFOLDS / rate).ln()) / rate;
        let v_hi = u_hi.max(1.0).ln() + 0.5;
        let n = ((v_hi - v_lo) / STEP).ceil() as usize;
        let mut sum = 0.0;
        let mut first = 0.0;
        for k in 0..=n {
            let v = v_lo + k as f64 * STEP;
            let u = v.exp();
            let val = (self.law.ln_weight(u) - c * u + v).exp() * psi(u);
            if k == 0 {
                first = val;
            }
            sum += val;
        }
        let ratio = (-exponent * STEP).exp();
        sum += first * ratio / (1.0 - ratio);
        sum * STEP
    }
}

/// `Σ_{n=1}^{t-1} n^i (t-n)^j e^{-a(n-1) - b(t-n-1)}`: the inner anti-diagonal sum with `e^{-a-b}` removed.
pub(crate) fn inner_scaled(i: u32, j: u32, a: f64, b: f64, t: u32) -> f64 {
    (1..t)
        .map(|n| {
            let m = t - n;
            (n as f64).powi(i as i32) * (m as f64).powi(j as i32) * (-a * (n - 1) as f64 - b * (m - 1) as f64).exp()
        })
        .sum()
}

/// Truncated anti-diagonal sum `Σ_{t=2}^{horizon} a(t) Σ_{n+m=t} n^i m^j e^{-a n - b m}`.
///
/// The inner sums are carried from one anti-diagonal to the next through the
/// power sums `G_k(t) = Σ_{n<t} n^k ρ^n`, `ρ = e^{-(a-b)} <= 1`, so the cost is
/// linear in the horizon.  Requires `i + j <= MAX_POWER`.
pub(crate) fn anti_diagonal_sum(series: &Series, i: u32, j: u32, a: f64, b: f64, horizon: u64) -> f64 {
    // The sum is symmetric under (n, i, a) <-> (m, j, b); orient so that a >= b.
    let (i, j, a, b) = if a >= b { (i, j, a, b) } else { (j, i, b, a) };
    let rho_ln = -(a - b);
    let kmax = (i + j) as usize;
    let mut g = vec![0.0f64; kmax + 1];
    let mut total = 0.0;
    for t in 2..=horizon {
        // Add the n = t-1 term to every power sum.
        let n = (t - 1) as f64;
        let w = (rho_ln * n).exp();
        let mut pw = w;
        for gk in g.iter_mut() {
            *gk += pw;
            pw *= n;
        }
        let at = series.value(t);
        if at == 0.0 {
            continue;
        }
        let tf = t as f64;
        // Σ_n n^i (t-n)^j ρ^n = Σ_l C(j,l) t^{j-l} (-1)^l G_{i+l}
        let mut inner = 0.0;
        for l in 0..=j {
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            inner += sign * binomial(j, l) * tf.powi((j - l) as i32) * g[(i + l) as usize];
        }
        total += at * (-b * tf).exp() * inner;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_double(s: &Series, i: u32, j: u32, a: f64, b: f64, n_max: u64) -> f64 {
        let mut total = 0.0;
        for n in 1..=n_max {
            for m in 1..=n_max {
                total += (n as f64).powi(i as i32)
                    * (m as f64).powi(j as i32)
                    * s.value(n + m)
                    * (-a * n as f64 - b * m as f64).exp();
            }
        }
        total
    }

    fn gamma_series(alpha: f64) -> Series {
        Series { first: 2, head: vec![], scale: 1.0, law: BaseLaw::gamma_ratio(alpha) }
    }

    #[test]
    fn gamma_ratio_normalization_from_integral() {
        let s = gamma_series(1.5);
        let t1 = s.ln_single(1, 0.0).exp();
        let t0 = s.ln_single(0, 0.0).exp();
        assert!((t1 - t0 - 1.0).abs() < 1e-13, "{}", t1 - t0);
        // Σ_{t>=2} K(t) = α - 1 from (1-z)^α at z = 1.
        assert!((t0 - 0.5).abs() < 1e-13, "{t0}");
    }

    #[test]
    fn damped_double_sum_matches_naive() {
        let s = gamma_series(1.5);
        for &(i, j, a, b) in &[(0, 0, 0.3, 0.7), (1, 0, 0.5, 0.2), (1, 1, 0.4, 0.4), (0, 2, 0.6, 0.3), (2, 0, 0.25, 0.9)] {
            let exact = s.ln_double(i, j, a, b).exp();
            let naive = naive_double(&s, i, j, a, b, 400);
            assert!((exact / naive - 1.0).abs() < 1e-13, "{i}{j} {a} {b}: {exact} vs {naive}");
        }
    }

    #[test]
    fn closed_form_damped_sum_small_damping() {
        // Σ_{t>=2} K1(t) z^t = (1-z)^α - 1 + α z.
        let alpha = 1.5;
        let s = gamma_series(alpha);
        for &x in &[1e-12f64, 1e-8, 1e-4, 0.1] {
            let z: f64 = (-x).exp();
            let one_minus_z = -(-x).exp_m1();
            let closed = one_minus_z.powf(alpha) - one_minus_z * alpha + (alpha - 1.0);
            let got = s.ln_single(0, x).exp();
            assert!((got / closed - 1.0).abs() < 2e-14, "{x}: {got} vs {closed}, z={z}");
        }
        let direct: f64 = (2..200u64).map(|t| s.value(t) * (-3.0 * t as f64).exp()).sum();
        assert!((s.ln_single(0, 3.0).exp() / direct - 1.0).abs() < 1e-14);
    }

    #[test]
    fn anti_diagonal_matches_naive_truncated() {
        let s = gamma_series(1.5);
        for &(i, j, a, b) in &[(0, 0, 0.1, 0.0), (1, 0, 0.1, 0.3), (0, 1, 0.3, 0.1), (1, 1, 0.2, 0.05)] {
            let h = 600;
            let ad = anti_diagonal_sum(&s, i, j, a, b, h);
            let mut naive = 0.0;
            for n in 1..h {
                for m in 1..=(h - n) {
                    naive += (n as f64).powi(i as i32)
                        * (m as f64).powi(j as i32)
                        * s.value(n + m)
                        * (-a * n as f64 - b * m as f64).exp();
                }
            }
            assert!((ad / naive - 1.0).abs() < 1e-10, "{ad} vs {naive}");
        }
    }

    #[test]
    fn power_law_with_head_and_shift() {
        let law = BaseLaw::power(2.15, -2.0, 3);
        let s = Series { first: 2, head: vec![0.7], scale: 0.3, law };
        let naive = naive_double(&s, 1, 0, 0.35, 0.5, 500);
        let exact = s.ln_double(1, 0, 0.35, 0.5).exp();
        assert!((exact / naive - 1.0).abs() < 1e-12, "{exact} {naive}");
        let single: f64 = (2..20000u64).map(|t| s.value(t) * (t as f64).powi(2) * (-0.01 * t as f64).exp()).sum();
        let exact = s.ln_single(2, 0.01).exp();
        assert!((exact / single - 1.0).abs() < 1e-12, "{exact} {single}");
    }

    #[test]
    fn divergent_sums_flagged() {
        let s = gamma_series(1.5);
        assert_eq!(s.ln_double(0, 1, 0.0, 0.0), f64::INFINITY);
        assert!(s.ln_double(0, 1, 0.5, 0.0).is_finite());
        assert_eq!(s.ln_double(0, 2, 0.5, 0.0), f64::INFINITY);
        assert_eq!(s.ln_single(2, 0.0), f64::INFINITY);
    }
}
