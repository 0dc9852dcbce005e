//! Inter-arrival laws on the lattice diagonal sums and free-end weights.
//!
//! A [`Kernel`] is a probability law on steps `(n, m)` with `n, m >= 1` whose
//! weight depends only on `t = n + m`, so it is described by a sequence
//! `K(t)`, `t >= 2`, with `Σ_t (t-1) K(t) = 1`.  Every kernel is stored as a
//! finite head of explicit values followed by a positive multiple of a
//! completely monotone base law; see [`crate::series`] for the summation
//! engine that exploits this.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{domain, GpsError, Result};
use crate::series::{anti_diagonal_sum, signed_gamma_ratio_values, BaseLaw, Series};

/// Default truncation horizon for certificates.
pub const DEFAULT_HORIZON: u64 = 1_000_000;
/// Default bound on the truncated tail mass.
pub const DEFAULT_EPSILON_TAIL: f64 = 1e-12;

/// Kernel family names used in declarative specs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `K(t) = Γ(t-α)/(Γ(-α) t!)`, parameters `{alpha}` with `alpha` in (1, 2).
    GammaRatio,
    /// Gamma ratio with finitely many sites overridden, parameters `{alpha}`.
    ModifiedGammaRatio,
    /// `K(t) = C t^{-1-α}`, parameters `{alpha}`; optional overrides.
    PowerLaw,
    /// Loop-entropy kernel at fixed inverse temperature, parameters `{c, e_b, e_l, beta}`.
    Biophysics,
    /// Loop-entropy kernel where the scan variable is the inverse temperature, parameters `{c, e_b, e_l}`.
    BiophysicsScan,
    /// Explicit values for `t = 2, 3, ...` given as overrides, followed by
    /// `tail_constant * t^{-1-alpha}`; parameters `{alpha, tail_constant}`.
    Tabulated,
}

/// One overridden site of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Override {
    pub site: u64,
    pub value: f64,
}

/// Declarative description of a kernel (or of a temperature-dependent kernel family).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: Family,
    pub parameters: BTreeMap<String, f64>,
    #[serde(default)]
    pub overrides: Vec<Override>,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_epsilon_tail")]
    pub epsilon_tail: f64,
}

fn default_horizon() -> u64 {
    DEFAULT_HORIZON
}

fn default_epsilon_tail() -> f64 {
    DEFAULT_EPSILON_TAIL
}

impl KernelSpec {
    pub fn new(family: Family, parameters: &[(&str, f64)]) -> KernelSpec {
        KernelSpec {
            family,
            parameters: parameters.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            overrides: Vec::new(),
            horizon: DEFAULT_HORIZON,
            epsilon_tail: DEFAULT_EPSILON_TAIL,
        }
    }

    pub fn with_overrides(mut self, overrides: &[(u64, f64)]) -> KernelSpec {
        self.overrides = overrides.iter().map(|&(site, value)| Override { site, value }).collect();
        self
    }

    pub fn param(&self, name: &str) -> Result<f64> {
        self.parameters
            .get(name)
            .copied()
            .ok_or_else(|| GpsError::Config(format!("kernel family {:?} needs parameter `{name}`", self.family)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("kernel spec serializes")
    }

    pub fn from_json(text: &str) -> Result<KernelSpec> {
        Ok(serde_json::from_str(text)?)
    }

    /// Short hexadecimal digest of the canonical JSON form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    fn check_parameters(&self, allowed: &[&str]) -> Result<()> {
        for key in self.parameters.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(GpsError::Config(format!(
                    "unknown parameter `{key}` for kernel family {:?} (expected {allowed:?})",
                    self.family
                )));
            }
        }
        Ok(())
    }
}

/// Certified truncation of the normalization sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBound {
    pub horizon: u64,
    /// Upper bound on `Σ_{t > horizon} (t-1) K(t)`.
    pub epsilon_tail: f64,
}

/// Which coordinate carries the polynomial factor in [`Kernel::moment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentWeight {
    /// No polynomial factor: `Σ K(n+m) e^{-x n}`.
    None,
    /// `Σ n^p K(n+m) e^{-x n}`.
    FirstCoordinate,
    /// `Σ m^p K(n+m) e^{-x n}`.
    SecondCoordinate,
}

/// A damped kernel sum with its truncated certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentValue {
    /// The full sum; `+∞` when it diverges.
    pub value: f64,
    /// Sum over anti-diagonals `t <= horizon`.
    pub truncated: f64,
    /// Upper bound on the anti-diagonals beyond the horizon (`+∞` when no bound applies).
    pub tail_bound: f64,
    pub horizon: u64,
}

/// Normalized inter-arrival law `K(t)`, `t >= 2`.
#[derive(Debug, Clone)]
pub struct Kernel {
    spec: KernelSpec,
    alpha: f64,
    series: Series,
}

/// Signed raw law before validation: explicit head on `t = 2..`, then `scale * b(t)`.
struct RawLaw {
    head: Vec<f64>,
    scale: f64,
    law: BaseLaw,
}

impl RawLaw {
    fn value(&self, t: u64) -> f64 {
        if ((t - 2) as usize) < self.head.len() {
            self.head[(t - 2) as usize]
        } else if t >= self.law.t_min() as u64 {
            self.scale * self.law.value(t)
        } else {
            0.0
        }
    }
}

/// Which loop-length convention the biophysics kernel follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiophysicsConvention {
    /// A loop closing a step `t = n + m >= 3` has `t - 2` unpaired bases and
    /// weight `e^{-β E_l} (t-2)^{-c}`; matches the pair recursion exactly.
    LoopLength,
    /// Weight `t^{-c} e^{β (E_b - E_l 1_{t>2})}` with the inverse temperature as scan variable.
    TotalLength,
}

/// Parameters of the loop-entropy model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiophysicsParams {
    /// Loop exponent, `> 2`.
    pub c: f64,
    /// Binding energy, `> 0`.
    pub e_b: f64,
    /// Loop initiation penalty, `> 0` (zero allowed to switch it off).
    pub e_l: f64,
    /// Inverse temperature, `>= 0`.
    pub beta: f64,
}

impl Kernel {
    /// `K(t) = Γ(t-α)/(Γ(-α) t!)` for `α` in (1, 2).
    pub fn gamma_ratio(alpha: f64) -> Result<Kernel> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return domain(format!("gamma-ratio kernel needs alpha in (1, 2), got {alpha}"));
        }
        Kernel::from_spec(&KernelSpec::new(Family::GammaRatio, &[("alpha", alpha)]))
    }

    /// Gamma-ratio kernel with sites overridden and the sites beyond the last override rescaled.
    pub fn modified_gamma_ratio(alpha: f64, overrides: &[(u64, f64)]) -> Result<Kernel> {
        Kernel::from_spec(&KernelSpec::new(Family::ModifiedGammaRatio, &[("alpha", alpha)]).with_overrides(overrides))
    }

    /// `K(t) = C t^{-1-α}` with `α > 1`.
    pub fn power_law(alpha: f64) -> Result<Kernel> {
        Kernel::from_spec(&KernelSpec::new(Family::PowerLaw, &[("alpha", alpha)]))
    }

    /// Table of values for `t = 2, 3, ..., 1 + values.len()` and a power tail beyond; renormalized.
    pub fn tabulated(values: &[f64], alpha: f64, tail_constant: f64) -> Result<Kernel> {
        let overrides: Vec<(u64, f64)> = values.iter().enumerate().map(|(i, v)| (i as u64 + 2, *v)).collect();
        Kernel::from_spec(
            &KernelSpec::new(Family::Tabulated, &[("alpha", alpha), ("tail_constant", tail_constant)])
                .with_overrides(&overrides),
        )
    }

    /// Normalized loop-entropy kernel and the pinning parameter that reproduces
    /// the pair weights at inverse temperature `beta`.
    pub fn biophysics(p: BiophysicsParams, convention: BiophysicsConvention) -> Result<(Kernel, f64)> {
        check_biophysics(&p)?;
        let spec = match convention {
            BiophysicsConvention::LoopLength => KernelSpec::new(
                Family::Biophysics,
                &[("c", p.c), ("e_b", p.e_b), ("e_l", p.e_l), ("beta", p.beta)],
            ),
            BiophysicsConvention::TotalLength => {
                KernelSpec::new(Family::BiophysicsScan, &[("c", p.c), ("e_b", p.e_b), ("e_l", p.e_l)])
            }
        };
        let (series, pinning) = biophysics_series(&p, convention);
        let kernel = Kernel { alpha: p.c - 1.0, series, spec };
        Ok((kernel, pinning))
    }

    /// Builds a fixed kernel from a spec.  `biophysics_scan` specs describe a
    /// temperature-dependent family; use [`PinningModel::from_spec`] for those.
    pub fn from_spec(spec: &KernelSpec) -> Result<Kernel> {
        if spec.epsilon_tail <= 0.0 || !spec.epsilon_tail.is_finite() || spec.horizon < 2 {
            return Err(GpsError::Config("horizon must be >= 2 and epsilon_tail positive".into()));
        }
        let (alpha, raw, renormalize) = match spec.family {
            Family::GammaRatio => {
                spec.check_parameters(&["alpha"])?;
                let alpha = spec.param("alpha")?;
                if !(alpha > 1.0 && alpha < 2.0) {
                    return domain(format!("gamma-ratio kernel needs alpha in (1, 2), got {alpha}"));
                }
                (alpha, gamma_ratio_raw(alpha), false)
            }
            Family::ModifiedGammaRatio => {
                spec.check_parameters(&["alpha"])?;
                let alpha = spec.param("alpha")?;
                if !(alpha > 1.0 && alpha < 3.0) || alpha == 2.0 {
                    return domain(format!("modified gamma-ratio kernel needs alpha in (1, 2) or (2, 3), got {alpha}"));
                }
                (alpha, gamma_ratio_raw(alpha), false)
            }
            Family::PowerLaw => {
                spec.check_parameters(&["alpha"])?;
                let alpha = spec.param("alpha")?;
                if !(alpha > 1.0) || !alpha.is_finite() {
                    return domain(format!("power-law kernel needs alpha > 1, got {alpha}"));
                }
                let law = BaseLaw::power(1.0 + alpha, 0.0, 2);
                let raw = RawLaw { head: vec![], scale: 1.0, law };
                (alpha, raw, true)
            }
            Family::Tabulated => {
                spec.check_parameters(&["alpha", "tail_constant"])?;
                let alpha = spec.param("alpha")?;
                let tail_constant = spec.param("tail_constant")?;
                if !(alpha > 1.0) || !(tail_constant > 0.0) {
                    return domain("tabulated kernel needs alpha > 1 and tail_constant > 0");
                }
                let law = BaseLaw::power(1.0 + alpha, 0.0, 2);
                let raw = RawLaw { head: vec![], scale: tail_constant, law };
                (alpha, raw, true)
            }
            Family::Biophysics => {
                spec.check_parameters(&["c", "e_b", "e_l", "beta"])?;
                if !spec.overrides.is_empty() {
                    return Err(GpsError::Config("biophysics kernels take no overrides".into()));
                }
                let p = BiophysicsParams {
                    c: spec.param("c")?,
                    e_b: spec.param("e_b")?,
                    e_l: spec.param("e_l")?,
                    beta: spec.param("beta")?,
                };
                check_biophysics(&p)?;
                let (series, _) = biophysics_series(&p, BiophysicsConvention::LoopLength);
                return Ok(Kernel { spec: spec.clone(), alpha: p.c - 1.0, series });
            }
            Family::BiophysicsScan => {
                return Err(GpsError::Config(
                    "biophysics_scan describes a temperature-dependent family, not a single kernel".into(),
                ))
            }
        };
        if spec.family == Family::GammaRatio && !spec.overrides.is_empty() {
            return Err(GpsError::Config("gamma_ratio takes no overrides; use modified_gamma_ratio".into()));
        }
        let mut series = apply_overrides(raw, &spec.overrides, spec.family == Family::Tabulated)?;
        if renormalize {
            let total = series.ln_single(1, 0.0).exp() - series.ln_single(0, 0.0).exp();
            for v in series.head.iter_mut() {
                *v /= total;
            }
            series.scale /= total;
        }
        Ok(Kernel { spec: spec.clone(), alpha, series })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    /// Digest of the defining spec.
    pub fn hash(&self) -> String {
        self.spec.hash()
    }

    /// Tail exponent: `K(t) ~ C t^{-1-α}`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Constant `C` of the tail `K(t) ~ C t^{-1-α}`.
    pub fn tail_constant(&self) -> f64 {
        self.series.scale * self.series.law.tail_constant()
    }

    pub fn value(&self, t: u64) -> f64 {
        self.series.value(t)
    }

    pub fn ln_value(&self, t: u64) -> f64 {
        self.series.ln_value(t)
    }

    /// Number of explicit sites before the base law takes over.
    pub fn head_end(&self) -> u64 {
        self.series.head_end().max(self.series.law.t_min()) as u64
    }

    /// `sup_{t >= from} K(t) t^{1+α}`, an envelope constant for the tail.
    pub fn envelope(&self, from: u64) -> f64 {
        let from = from.max(self.head_end());
        let s = self.series.law.tail_exponent();
        let at = self.series.scale * self.series.law.value(from) * (from as f64).powf(s);
        at.max(self.tail_constant())
    }

    /// Whether `Σ m^2 K(n+m)` is finite, equivalently `α > 2`.
    pub fn second_moment_finite(&self) -> bool {
        self.alpha > 2.0
    }

    /// `ln Σ_{n,m} n^i m^j K(n+m) e^{-a n - b m}`.
    pub fn ln_damped(&self, i: u32, j: u32, a: f64, b: f64) -> f64 {
        self.series.ln_double(i, j, a, b)
    }

    /// `ln Σ_{t>=2} t^p K(t) e^{-x t}`.
    pub fn ln_diagonal(&self, p: u32, x: f64) -> f64 {
        self.series.ln_single(p, x)
    }

    /// `ln Σ_{t>=2} (t-1) K(t) e^{-x t}`, the mass of the law damped along the diagonal.
    pub fn ln_tilt_sum(&self, x: f64) -> f64 {
        self.ln_damped(0, 0, x, x)
    }

    /// Damped moment `Σ_{n,m} w(n,m)^p K(n+m) e^{-x n}` with truncation certificate at `horizon`.
    ///
    /// Errors only on negative damping; divergence is reported as `+∞`.
    pub fn moment(&self, p: u32, x: f64, weight: MomentWeight, horizon: Option<u64>) -> Result<MomentValue> {
        if x < 0.0 || x.is_nan() {
            return domain(format!("damping must be nonnegative, got {x}"));
        }
        let (i, j) = match weight {
            MomentWeight::None => (0, 0),
            MomentWeight::FirstCoordinate => (p, 0),
            MomentWeight::SecondCoordinate => (0, p),
        };
        let horizon = horizon.unwrap_or(self.spec.horizon).max(self.head_end());
        let value = self.ln_damped(i, j, x, 0.0).exp();
        let truncated = anti_diagonal_sum(&self.series, i, j, x, 0.0, horizon);
        let tail_bound = self.moment_tail_bound(i + j, x, i, horizon);
        Ok(MomentValue { value, truncated, tail_bound, horizon })
    }

    /// Bound on `Σ_{t > T} K(t) Σ_{n+m=t} n^i m^j e^{-x n}` with `q = i + j`.
    fn moment_tail_bound(&self, q: u32, x: f64, i: u32, horizon: u64) -> f64 {
        let s = self.series.law.tail_exponent();
        let env = self.envelope(horizon);
        let tf = horizon as f64;
        // Inner sum is at most t^{q+1}, giving Σ_{t>T} env t^{q+1-s} <= env T^{q+2-s}/(s-q-2).
        let polynomial = if s > q as f64 + 2.0 { env * tf.powf(q as f64 + 2.0 - s) / (s - q as f64 - 2.0) } else { f64::INFINITY };
        // With damping, the inner sum is at most t^{q-i} Σ_n n^i e^{-x n}.
        let damped = if x > 0.0 && s > (q - i) as f64 + 1.0 {
            let geometric: f64 = {
                let r = (-x).exp();
                let q1 = -(-x).exp_m1();
                // Σ_{n>=1} n^i r^n through the Eulerian identity for small i.
                match i {
                    0 => r / q1,
                    1 => r / (q1 * q1),
                    2 => r * (1.0 + r) / (q1 * q1 * q1),
                    _ => (1..).take(100_000).map(|n: u64| (n as f64).powi(i as i32) * (-x * n as f64).exp()).sum(),
                }
            };
            let e = (q - i) as f64 + 1.0 - s;
            geometric * env * tf.powf(e) / (-e)
        } else {
            f64::INFINITY
        };
        polynomial.min(damped)
    }

    /// Certified truncation of the normalization sum at the spec horizon.
    pub fn tail_bound(&self) -> TailBound {
        self.tail_bound_at(self.spec.horizon)
    }

    /// Bound on `Σ_{t>T}(t-1)K(t)` from the envelope `K(t) <= E t^{-s}`:
    /// the sum is at most `E ∫_T^∞ x^{1-s} dx`.
    pub fn tail_bound_at(&self, horizon: u64) -> TailBound {
        let horizon = horizon.max(self.head_end());
        let s = self.series.law.tail_exponent();
        let epsilon_tail = self.envelope(horizon) * (horizon as f64).powf(2.0 - s) / (s - 2.0);
        TailBound { horizon, epsilon_tail }
    }

    /// `Σ_{t=2}^{T} (t-1) K(t)` summed directly.
    pub fn truncated_mass(&self, horizon: u64) -> f64 {
        let mut total = 0.0;
        let mut comp = 0.0;
        for t in 2..=horizon {
            // Kahan summation keeps the million-term sum at full precision.
            let y = (t - 1) as f64 * self.value(t) - comp;
            let s = total + y;
            comp = (s - total) - y;
            total = s;
        }
        total
    }
}

fn gamma_ratio_raw(alpha: f64) -> RawLaw {
    let law = BaseLaw::gamma_ratio(alpha);
    let t_min = law.t_min() as usize;
    let signed = signed_gamma_ratio_values(alpha, t_min + 1);
    let head: Vec<f64> = signed[2..t_min].to_vec();
    let scale = signed[t_min].signum();
    RawLaw { head, scale, law }
}

/// Replaces sites and rescales everything beyond the last overridden site so
/// that `Σ (t-1) K(t) = 1` is preserved.  With `replace_all` the overrides
/// form the whole head and the tail constant is kept (renormalized later).
fn apply_overrides(raw: RawLaw, overrides: &[Override], replace_all: bool) -> Result<Series> {
    let last = overrides.iter().map(|o| o.site).max().unwrap_or(0);
    for o in overrides {
        if o.site < 2 {
            return domain(format!("override site {} is below 2", o.site));
        }
        if !(o.value > 0.0) || !o.value.is_finite() {
            return domain(format!("override value at site {} must be positive, got {}", o.site, o.value));
        }
    }
    if last > 1 << 20 {
        return domain("override sites beyond 2^20 are not supported");
    }
    let head_end = last.max(raw.head.len() as u64 + 1).max(raw.law.t_min() as u64 - 1);
    let mut head: Vec<f64> = (2..=head_end).map(|t| raw.value(t)).collect();
    if replace_all {
        let sites: Vec<u64> = overrides.iter().map(|o| o.site).collect();
        if let Some(missing) = (2..=last).find(|t| !sites.contains(t)) {
            return domain(format!("tabulated kernel is missing site {missing}"));
        }
    }
    let mut base_mass = 0.0;
    let mut new_mass = 0.0;
    for t in 2..=last {
        base_mass += (t - 1) as f64 * raw.value(t);
    }
    for o in overrides {
        head[(o.site - 2) as usize] = o.value;
    }
    for t in 2..=last {
        new_mass += (t - 1) as f64 * head[(t - 2) as usize];
    }
    let factor = if replace_all || overrides.is_empty() { 1.0 } else { (1.0 - new_mass) / (1.0 - base_mass) };
    for t in (last + 1).max(2)..=head_end {
        head[(t - 2) as usize] *= factor;
    }
    let scale = raw.scale * factor;
    if !(scale > 0.0) || !scale.is_finite() {
        return domain(format!("renormalization constant of the rescaled tail is not positive ({factor:e})"));
    }
    if let Some(t) = head.iter().position(|v| !(*v > 0.0)) {
        return domain(format!("kernel value at site {} is not positive", t + 2));
    }
    Ok(Series { first: 2, head, scale, law: raw.law })
}

fn check_biophysics(p: &BiophysicsParams) -> Result<()> {
    if !(p.c > 2.0) || !p.c.is_finite() {
        return domain(format!("loop exponent c must exceed 2, got {}", p.c));
    }
    if !(p.e_b >= 0.0) || !(p.e_l >= 0.0) || !(p.beta >= 0.0) {
        return domain("energies and inverse temperature must be nonnegative");
    }
    Ok(())
}

/// `Σ_{t>=3} (t-1) (t + shift)^{-c}` through the summation engine.
fn power_tail_mass(c: f64, shift: f64) -> f64 {
    let law = BaseLaw::power(c, shift, 3);
    let s = Series { first: 3, head: vec![], scale: 1.0, law };
    s.ln_single(1, 0.0).exp() - s.ln_single(0, 0.0).exp()
}

/// Normalized series and effective pinning parameter for a loop-entropy model.
fn biophysics_series(p: &BiophysicsParams, convention: BiophysicsConvention) -> (Series, f64) {
    match convention {
        BiophysicsConvention::LoopLength => {
            let loop_mass = power_tail_mass(p.c, -2.0);
            let penalty = (-p.beta * p.e_l).exp();
            let total = 1.0 + penalty * loop_mass;
            let law = BaseLaw::power(p.c, -2.0, 3);
            let series = Series { first: 2, head: vec![1.0 / total], scale: penalty / total, law };
            (series, p.beta * p.e_b + total.ln())
        }
        BiophysicsConvention::TotalLength => {
            // C = 1 / Σ_{t>=2} (t-1) t^{-c}.
            let two = 2f64.powf(-p.c);
            let c_norm = 1.0 / (two + power_tail_mass(p.c, 0.0));
            let w2 = c_norm * two * (p.beta * p.e_b).exp();
            let tail = c_norm * (p.beta * (p.e_b - p.e_l)).exp();
            let mass = w2 + tail * power_tail_mass(p.c, 0.0);
            let law = BaseLaw::power(p.c, 0.0, 3);
            let series = Series { first: 2, head: vec![w2 / mass], scale: tail / mass, law };
            (series, mass.ln())
        }
    }
}

/// A pinning model: the map from the scan parameter to a normalized kernel
/// and the effective pinning strength.
#[derive(Debug, Clone)]
pub enum PinningModel {
    /// The kernel is fixed and the scan parameter is the pinning strength itself.
    Fixed(Kernel),
    /// Loop-entropy model whose scan parameter is the inverse temperature.
    Temperature { c: f64, e_b: f64, e_l: f64, spec: KernelSpec },
}

impl PinningModel {
    pub fn from_spec(spec: &KernelSpec) -> Result<PinningModel> {
        if spec.family == Family::BiophysicsScan {
            spec.check_parameters(&["c", "e_b", "e_l"])?;
            if !spec.overrides.is_empty() {
                return Err(GpsError::Config("biophysics kernels take no overrides".into()));
            }
            let (c, e_b, e_l) = (spec.param("c")?, spec.param("e_b")?, spec.param("e_l")?);
            check_biophysics(&BiophysicsParams { c, e_b, e_l, beta: 0.0 })?;
            Ok(PinningModel::Temperature { c, e_b, e_l, spec: spec.clone() })
        } else {
            Ok(PinningModel::Fixed(Kernel::from_spec(spec)?))
        }
    }

    /// Kernel and effective pinning strength at scan parameter `h`.
    pub fn at(&self, h: f64) -> Result<(Kernel, f64)> {
        match self {
            PinningModel::Fixed(k) => Ok((k.clone(), h)),
            PinningModel::Temperature { c, e_b, e_l, .. } => {
                if h < 0.0 {
                    return domain(format!("inverse temperature must be nonnegative, got {h}"));
                }
                let p = BiophysicsParams { c: *c, e_b: *e_b, e_l: *e_l, beta: h };
                Kernel::biophysics(p, BiophysicsConvention::TotalLength)
            }
        }
    }

    pub fn spec(&self) -> &KernelSpec {
        match self {
            PinningModel::Fixed(k) => k.spec(),
            PinningModel::Temperature { spec, .. } => spec,
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            PinningModel::Fixed(k) => k.alpha(),
            PinningModel::Temperature { c, .. } => c - 1.0,
        }
    }
}

/// Free-end weight `K_f(n) = (n+1)^{-ᾱ}`, `n >= 0`, so that `K_f(0) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FreeEndKernel {
    Power { alpha_bar: f64 },
    /// `K_f = 1_{n=0}`: no free ends at all.
    Delta,
}

/// Delocalized sub-regime decided by the free-end exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndRegime {
    EndsFree,
    EndsPinned,
    Boundary,
}

impl FreeEndKernel {
    pub fn power(alpha_bar: f64) -> FreeEndKernel {
        FreeEndKernel::Power { alpha_bar }
    }

    pub fn value(&self, n: u64) -> f64 {
        match self {
            FreeEndKernel::Power { alpha_bar } => ((n + 1) as f64).powf(-alpha_bar),
            FreeEndKernel::Delta => {
                if n == 0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn ln_value(&self, n: u64) -> f64 {
        match self {
            FreeEndKernel::Power { alpha_bar } => -alpha_bar * ((n + 1) as f64).ln(),
            FreeEndKernel::Delta => {
                if n == 0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// `Σ_{n>=0} K_f(n)`, finite iff `ᾱ > 1`.
    pub fn total(&self) -> f64 {
        match self {
            FreeEndKernel::Power { alpha_bar } if *alpha_bar > 1.0 => {
                let s = Series { first: 0, head: vec![], scale: 1.0, law: BaseLaw::power(*alpha_bar, 1.0, 0) };
                s.ln_single(0, 0.0).exp()
            }
            FreeEndKernel::Power { .. } => f64::INFINITY,
            FreeEndKernel::Delta => 1.0,
        }
    }

    /// Comparison of `ᾱ` with `(1+α)/2`.
    pub fn regime(&self, alpha: f64) -> EndRegime {
        let pivot = (1.0 + alpha) / 2.0;
        match self {
            FreeEndKernel::Power { alpha_bar } if *alpha_bar < pivot => EndRegime::EndsFree,
            FreeEndKernel::Power { alpha_bar } if *alpha_bar == pivot => EndRegime::Boundary,
            _ => EndRegime::EndsPinned,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma;

    #[test]
    fn gamma_ratio_second_site_matches_gamma_function() {
        let k = Kernel::gamma_ratio(1.5).unwrap();
        let direct = gamma(0.5) / (gamma(-1.5) * 2.0);
        assert!((k.value(2) - direct).abs() < 1e-14);
    }

    #[test]
    fn normalization_with_certificate() {
        let k = Kernel::gamma_ratio(1.5).unwrap();
        let tb = k.tail_bound();
        let mass = k.truncated_mass(tb.horizon);
        assert!(mass <= 1.0 + 1e-12 && mass + tb.epsilon_tail >= 1.0 - 1e-12, "{mass} {tb:?}");
    }

    #[test]
    fn modified_kernel_identity_and_constant() {
        let k1 = Kernel::gamma_ratio(1.5).unwrap();
        let same = Kernel::modified_gamma_ratio(1.5, &[(3, k1.value(3))]).unwrap();
        for t in 2..50 {
            assert!((same.value(t) / k1.value(t) - 1.0).abs() < 1e-14);
        }
        let kappa = 0.01;
        let k2 = Kernel::modified_gamma_ratio(1.5, &[(3, kappa)]).unwrap();
        let c = (1.0 - k1.value(2) - 2.0 * kappa) / (1.0 - k1.value(2) - 2.0 * k1.value(3));
        assert!((k2.value(10) / k1.value(10) - c).abs() < 1e-14);
        assert_eq!(k2.value(2), k1.value(2));
    }

    #[test]
    fn spec_round_trip() {
        let spec = KernelSpec::new(Family::ModifiedGammaRatio, &[("alpha", 2.5)]).with_overrides(&[(2, 0.02)]);
        let back = KernelSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(spec, back);
        assert_eq!(spec.hash(), back.hash());
    }

    #[test]
    fn unknown_parameter_rejected() {
        let spec = KernelSpec::new(Family::GammaRatio, &[("alpha", 1.5), ("beta", 1.0)]);
        assert!(matches!(Kernel::from_spec(&spec), Err(GpsError::Config(_))));
    }

    #[test]
    fn free_end_total_is_zeta() {
        let kf = FreeEndKernel::power(2.0);
        assert!((kf.total() - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-13);
    }
}
