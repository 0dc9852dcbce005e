//! Exact sampling of constrained and free paths, forward simulation of the
//! tilted renewal, and comparison of empirical path statistics with their
//! limit laws.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, GpsError, Result};
use crate::exact_dp::{log_sum_exp, PartitionTable};
use crate::kernels::{EndRegime, FreeEndKernel, Kernel};
use crate::ldp::{limit_step_probability, rate_and_free_energy, Regime};
use crate::tilt::{solve, Tilted, DEFAULT_TOL};

/// Default cutoff for binned laws; larger values fall in one pooled cell.
pub const DEFAULT_BIN_CUTOFF: usize = 64;

/// Contact points after the origin, strictly increasing in both coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct RenewalPath {
    pub points: Vec<(u32, u32)>,
}

impl RenewalPath {
    pub fn last(&self) -> (u32, u32) {
        self.points.last().copied().unwrap_or((0, 0))
    }

    /// Increments between consecutive contacts, starting from the origin.
    pub fn steps(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let starts = std::iter::once((0, 0)).chain(self.points.iter().copied());
        starts.zip(self.points.iter().copied()).map(|(a, b)| (b.0 - a.0, b.1 - a.1))
    }
}

/// A free-end sample: the bridge to the last contact and the unpaired end lengths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FreeSample {
    pub path: RenewalPath,
    pub free_ends: (u32, u32),
}

/// Summary statistics of one path in an `N × M` box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathStats {
    pub contact_fraction: f64,
    pub last_contact: (u32, u32),
    pub free_ends: (u32, u32),
    pub inter_arrivals: BTreeMap<(u32, u32), u64>,
}

pub fn path_stats(path: &RenewalPath, n: u32, m: u32) -> PathStats {
    let last = path.last();
    let mut inter_arrivals = BTreeMap::new();
    for s in path.steps() {
        *inter_arrivals.entry(s).or_insert(0) += 1;
    }
    PathStats {
        contact_fraction: path.points.len() as f64 / n.max(1) as f64,
        last_contact: last,
        free_ends: (n - last.0, m - last.1),
        inter_arrivals,
    }
}

/// Generator for path `index`: one seed, one independent stream per path.
pub fn path_rng(seed: u64, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Backward sampler for the constrained measure, sharing one table.
pub struct BridgeSampler<'a> {
    table: &'a PartitionTable,
    /// `ln(e^h K(t))`.
    ln_step: Vec<f64>,
    step: Vec<f64>,
    decay_a: Vec<f64>,
    decay_b: Vec<f64>,
    totals: Vec<OnceLock<Box<[f64]>>>,
}

/// Anti-diagonals scanned directly before switching to cached totals.
const DIRECT_SCAN: usize = 48;

impl<'a> BridgeSampler<'a> {
    pub fn new(kernel: &Kernel, table: &'a PartitionTable) -> Result<BridgeSampler<'a>> {
        if kernel.hash() != table.kernel_hash() {
            return Err(GpsError::Config("table was built for a different kernel".into()));
        }
        let (n, m) = (table.n_max(), table.m_max());
        let h = table.h();
        let ln_step: Vec<f64> = (0..=(n + m) as u64).map(|t| if t < 2 { f64::NEG_INFINITY } else { h + kernel.ln_value(t) }).collect();
        let step = ln_step.iter().map(|x| x.exp()).collect();
        let (a, b) = table.rates();
        let decay_a = (0..=n).map(|i| (-a * i as f64).exp()).collect();
        let decay_b = (0..=m).map(|j| (-b * j as f64).exp()).collect();
        let totals = (0..(n + 1) * (m + 1)).map(|_| OnceLock::new()).collect();
        Ok(BridgeSampler { table, ln_step, step, decay_a, decay_b, totals })
    }

    /// Scaled weight of the step `(i, j)` into `(n, m)`.
    fn weight(&self, n: usize, m: usize, i: usize, j: usize) -> f64 {
        self.step[i + j] * self.decay_a[i] * self.decay_b[j] * self.table.scaled(n - i, m - j)
    }

    /// Running weight total at the end of every anti-diagonal `t` of the cell, built once.
    fn diagonal_totals(&self, n: usize, m: usize) -> &[f64] {
        self.totals[n * (self.table.m_max() + 1) + m].get_or_init(|| {
            let mut acc = 0.0;
            let mut out = vec![0.0; n + m + 1];
            for t in 2..=n + m {
                for i in t.saturating_sub(m).max(1)..=n.min(t - 1) {
                    acc += self.weight(n, m, i, t - i);
                }
                out[t] = acc;
            }
            out.into_boxed_slice()
        })
    }

    /// Draws the last step `(i, j)` of a path ending at `(n, m)`.
    ///
    /// Candidates are visited by increasing `t = i + j`, then increasing `i`.
    /// Short steps are found by a direct scan; long ones by bisection on the
    /// cached per-diagonal totals, which accumulate in the same order.
    fn previous<R: Rng>(&self, n: usize, m: usize, rng: &mut R) -> (usize, usize) {
        let y = self.table.scaled(n, m);
        let u: f64 = rng.random();
        if y > 1e-250 {
            let target = u * y;
            let mut acc = 0.0;
            let mut last = None;
            let scan_end = (n + m).min(DIRECT_SCAN);
            for t in 2..=scan_end {
                for i in t.saturating_sub(m).max(1)..=n.min(t - 1) {
                    let w = self.weight(n, m, i, t - i);
                    if w > 0.0 {
                        acc += w;
                        last = Some((i, t - i));
                        if acc >= target {
                            return (i, t - i);
                        }
                    }
                }
            }
            if scan_end < n + m {
                let totals = self.diagonal_totals(n, m);
                let t = (scan_end + 1 + totals[scan_end + 1..].partition_point(|&c| c < target)).min(n + m);
                let mut acc = totals[t - 1];
                for i in t.saturating_sub(m).max(1)..=n.min(t - 1) {
                    let w = self.weight(n, m, i, t - i);
                    if w > 0.0 {
                        acc += w;
                        last = Some((i, t - i));
                        if acc >= target {
                            return (i, t - i);
                        }
                    }
                }
                // Rounding left the target above the total: take the last positive candidate.
                for tt in (2..=n + m).rev() {
                    for i in (tt.saturating_sub(m).max(1)..=n.min(tt - 1)).rev() {
                        if self.weight(n, m, i, tt - i) > 0.0 {
                            return (i, tt - i);
                        }
                    }
                }
            }
            if let Some(s) = last {
                return s;
            }
        }
        // Log-domain fallback for cells that underflow in the rescaled domain.
        let lz = self.table.log_z(n, m);
        let mut acc = 0.0;
        let mut last = (n, m);
        for t in 2..=n + m {
            for i in t.saturating_sub(m).max(1)..=n.min(t - 1) {
                let j = t - i;
                let lw = self.ln_step[t] + self.table.log_z(n - i, m - j) - lz;
                if lw > f64::NEG_INFINITY {
                    acc += lw.exp();
                    last = (i, j);
                    if acc >= u {
                        return (i, j);
                    }
                }
            }
        }
        last
    }

    /// One path from the origin to `(n, m)`.
    pub fn bridge<R: Rng>(&self, n: usize, m: usize, rng: &mut R) -> RenewalPath {
        let mut points = Vec::new();
        let (mut a, mut b) = (n, m);
        while a > 0 && b > 0 {
            points.push((a as u32, b as u32));
            let (i, j) = self.previous(a, b, rng);
            a -= i;
            b -= j;
        }
        points.reverse();
        RenewalPath { points }
    }
}

/// `count` exact samples of the constrained measure on `[0,n] × [0,m]`.
pub fn sample_constrained(kernel: &Kernel, table: &PartitionTable, n: usize, m: usize, seed: u64, count: usize) -> Result<Vec<RenewalPath>> {
    if n > table.n_max() || m > table.m_max() || n == 0 || m == 0 {
        return domain(format!("endpoint ({n}, {m}) outside the table"));
    }
    if table.log_z(n, m) == f64::NEG_INFINITY {
        return domain("endpoint has zero weight");
    }
    let s = BridgeSampler::new(kernel, table)?;
    Ok((0..count)
        .into_par_iter()
        .map(|idx| s.bridge(n, m, &mut path_rng(seed, idx as u64)))
        .collect())
}

/// Normalized law of the last contact `(i, j)` in the free model, row-major over `[0,n] × [0,m]`.
pub fn last_contact_law(table: &PartitionTable, kf: &FreeEndKernel, n: usize, m: usize) -> Vec<f64> {
    let logs = table.free_summands(kf, n, m);
    let total = log_sum_exp(&logs);
    logs.iter().map(|l| (l - total).exp()).collect()
}

/// `count` exact samples of the free measure on `[0,n] × [0,m]`.
pub fn sample_free(
    kernel: &Kernel,
    kf: &FreeEndKernel,
    table: &PartitionTable,
    n: usize,
    m: usize,
    seed: u64,
    count: usize,
) -> Result<Vec<FreeSample>> {
    if n > table.n_max() || m > table.m_max() {
        return domain(format!("box ({n}, {m}) outside the table"));
    }
    let law = last_contact_law(table, kf, n, m);
    let mut cdf = Vec::with_capacity(law.len());
    let mut acc = 0.0;
    for p in &law {
        acc += p;
        cdf.push(acc);
    }
    let s = BridgeSampler::new(kernel, table)?;
    let width = m + 1;
    Ok((0..count)
        .into_par_iter()
        .map(|idx| {
            let mut rng = path_rng(seed, idx as u64);
            let u: f64 = rng.random::<f64>() * acc;
            let mut cell = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            while law[cell] == 0.0 && cell > 0 {
                cell -= 1;
            }
            let (i, j) = (cell / width, cell % width);
            let path = if i == 0 && j == 0 { RenewalPath { points: vec![] } } else { s.bridge(i, j, &mut rng) };
            FreeSample { path, free_ends: ((n - i) as u32, (m - j) as u32) }
        })
        .collect())
}

/// Stop rule for forward simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// At most this many steps.
    Steps(usize),
    /// Stop once a contact reaches or passes `(n, m)` in either coordinate.
    Box(u64, u64),
}

/// Forward path of the tilted renewal.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPath {
    pub points: Vec<(u64, u64)>,
    /// The renewal terminated (only possible for `h < 0`).
    pub killed: bool,
}

/// I.i.d. steps from `e^{h - t g} K(t)` split uniformly along each diagonal,
/// with killing mass `1 - e^h` when `h < 0`.
pub struct TiltedRenewal {
    kernel: Kernel,
    h: f64,
    g: f64,
    /// Cumulative mass of the diagonal law for `t = 2..=cutoff`.
    cdf: Vec<f64>,
    cutoff: u64,
    tail_mass: f64,
    envelope: f64,
}

const FORWARD_CUTOFF: u64 = 1 << 16;

impl TiltedRenewal {
    pub fn new(kernel: &Kernel, h: f64) -> Result<TiltedRenewal> {
        if h == 0.0 {
            return domain("forward simulation needs h != 0 (h = 0 is null recurrent)");
        }
        let g = solve(kernel, h, DEFAULT_TOL)?.g();
        let mut cdf = Vec::with_capacity(FORWARD_CUTOFF as usize);
        let mut acc = 0.0;
        for t in 2..=FORWARD_CUTOFF {
            acc += ((t - 1) as f64) * (h - g * t as f64 + kernel.ln_value(t)).exp();
            cdf.push(acc);
        }
        let total = if h > 0.0 { 1.0 } else { h.exp() };
        Ok(TiltedRenewal {
            kernel: kernel.clone(),
            h,
            g,
            cdf,
            cutoff: FORWARD_CUTOFF,
            tail_mass: (total - acc).max(0.0),
            envelope: kernel.envelope(FORWARD_CUTOFF + 1),
        })
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    /// One step `(n, m)`, or `None` when the renewal is killed.
    pub fn step<R: Rng>(&self, rng: &mut R) -> Option<(u64, u64)> {
        let table = *self.cdf.last().unwrap();
        let u: f64 = rng.random();
        let t = if u < table {
            self.cdf.partition_point(|&c| c <= u) as u64 + 2
        } else if u < table + self.tail_mass {
            self.tail_step(rng)
        } else {
            return None;
        };
        let n = rng.random_range(1..t);
        Some((n, t - n))
    }

    /// Rejection from a Pareto proposal above the cutoff:
    /// `(t-1) e^{h-tg} K(t) <= e^h E t^{-α}` with `E` the kernel envelope.
    fn tail_step<R: Rng>(&self, rng: &mut R) -> u64 {
        let alpha = self.kernel.alpha();
        let x0 = self.cutoff as f64;
        let scale = self.h.exp() * self.envelope / ((alpha - 1.0) * x0.powf(alpha - 1.0));
        loop {
            let v: f64 = 1.0 - rng.random::<f64>();
            let x = x0 * v.powf(-1.0 / (alpha - 1.0));
            if !(x < 9e15) {
                continue;
            }
            let t = (x.ceil() as u64).max(self.cutoff + 1);
            let tf = t as f64;
            let proposal = ((tf - 1.0) / x0).powf(1.0 - alpha) - (tf / x0).powf(1.0 - alpha);
            let target = (tf - 1.0) * (self.h - self.g * tf + self.kernel.ln_value(t)).exp();
            if rng.random::<f64>() * scale * proposal <= target {
                return t;
            }
        }
    }

    pub fn simulate<R: Rng>(&self, stop: StopRule, rng: &mut R) -> ForwardPath {
        let mut points = Vec::new();
        let (mut a, mut b) = (0u64, 0u64);
        loop {
            match stop {
                StopRule::Steps(s) if points.len() >= s => break,
                StopRule::Box(n, m) if a >= n || b >= m => break,
                _ => {}
            }
            match self.step(rng) {
                Some((i, j)) => {
                    a += i;
                    b += j;
                    points.push((a, b));
                }
                None => return ForwardPath { points, killed: true },
            }
        }
        ForwardPath { points, killed: false }
    }

    /// Fraction of `count` paths that visit `(n, m)`, with its standard error.
    pub fn hit_frequency(&self, n: u64, m: u64, seed: u64, count: usize) -> (f64, f64) {
        let hits: usize = (0..count)
            .into_par_iter()
            .map(|idx| {
                let p = self.simulate(StopRule::Box(n, m), &mut path_rng(seed, idx as u64));
                (p.points.last() == Some(&(n, m))) as usize
            })
            .sum();
        let p = hits as f64 / count as f64;
        (p, (p * (1.0 - p) / count as f64).sqrt())
    }
}

/// Binned empirical-versus-exact comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LawComparison {
    pub samples: u64,
    pub cutoff: usize,
    pub total_variation: f64,
    /// Largest absolute per-cell z-score among cells with positive exact mass.
    pub max_abs_z: f64,
    /// Exact mass of the pooled tail cell.
    pub tail_exact: f64,
    pub tail_empirical: f64,
}

/// Compares counts on `[0, cutoff)²` plus a pooled tail with an exact law.
pub fn compare_binned(counts: &HashMap<(u32, u32), u64>, exact: impl Fn(u32, u32) -> f64, cutoff: usize) -> LawComparison {
    let n: u64 = counts.values().sum();
    let nf = n.max(1) as f64;
    let mut tv = 0.0;
    let mut max_z: f64 = 0.0;
    let mut inside_exact = 0.0;
    let mut inside_emp = 0.0;
    for i in 0..cutoff as u32 {
        for j in 0..cutoff as u32 {
            let p = exact(i, j);
            let q = counts.get(&(i, j)).copied().unwrap_or(0) as f64 / nf;
            inside_exact += p;
            inside_emp += q;
            tv += (p - q).abs();
            if p > 0.0 {
                max_z = max_z.max((q - p).abs() / (p * (1.0 - p) / nf).sqrt());
            }
        }
    }
    let tail_exact = (1.0 - inside_exact).max(0.0);
    let tail_empirical = 1.0 - inside_emp;
    tv += (tail_exact - tail_empirical).abs();
    LawComparison { samples: n, cutoff, total_variation: 0.5 * tv, max_abs_z: max_z, tail_exact, tail_empirical }
}

/// Which limit law the samples were compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LimitRegime {
    /// `h > 0`, `γ` in the Cramér interval: free ends and steps have exponentially tilted limits.
    Cramer,
    /// `h < 0`, ends heavier than the loops: the last contact stays near the origin.
    EndsFree,
    /// `h < 0`, loops heavier than the ends: free ends stay short.
    EndsPinned,
}

/// Empirical path laws against their closed-form limits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitLawReport {
    pub regime: LimitRegime,
    pub h: f64,
    pub gamma: f64,
    pub n: usize,
    pub m: usize,
    /// Law of the free ends `(N - i_k, M - j_k)` (Cramér, EndsPinned) or of the last contact (EndsFree).
    pub end_law: LawComparison,
    /// Step law (Cramér only).
    pub step_law: Option<LawComparison>,
    /// Total mass of the exact step law.
    pub step_law_total: Option<f64>,
    /// Fraction of paths with a contact whose first coordinate lies in `[N/4, 3N/4]` (EndsPinned only).
    pub mid_box_contact: Option<f64>,
}

/// Compares free samples with the limit law selected by `(h, γ)` and the end exponent.
pub fn limit_law_report(
    kernel: &Kernel,
    kf: &FreeEndKernel,
    samples: &[FreeSample],
    n: usize,
    m: usize,
    h: f64,
    cutoff: usize,
) -> Result<LimitLawReport> {
    let gamma = m as f64 / n as f64;
    let mut ends: HashMap<(u32, u32), u64> = HashMap::new();
    let mut lasts: HashMap<(u32, u32), u64> = HashMap::new();
    for s in samples {
        *ends.entry(s.free_ends).or_insert(0) += 1;
        *lasts.entry(s.path.last()).or_insert(0) += 1;
    }
    if h > 0.0 {
        let t: Tilted = solve(kernel, h, DEFAULT_TOL)?;
        let r = rate_and_free_energy(&t, gamma, DEFAULT_TOL)?;
        if r.regime != Regime::Cramer {
            return Err(GpsError::Domain(format!("γ = {gamma} is outside the Cramér interval at h = {h}")));
        }
        let rates = r.rates(t.g()).expect("h > 0");
        let norm = |rate: f64| -> f64 {
            match kf {
                FreeEndKernel::Delta => 1.0,
                FreeEndKernel::Power { alpha_bar } => {
                    let mut s = 0.0;
                    let mut i = 0u64;
                    loop {
                        let term = (-alpha_bar * ((i + 1) as f64).ln() - rate * i as f64).exp();
                        s += term;
                        i += 1;
                        if term < 1e-18 * s || i > 10_000_000 {
                            break s;
                        }
                    }
                }
            }
        };
        let (ca, cb) = (norm(rates.0), norm(rates.1));
        let end_exact = |i: u32, j: u32| kf.value(i as u64) * (-rates.0 * i as f64).exp() * kf.value(j as u64) * (-rates.1 * j as f64).exp() / (ca * cb);
        let mut steps: HashMap<(u32, u32), u64> = HashMap::new();
        for s in samples {
            for st in s.path.steps() {
                *steps.entry(st).or_insert(0) += 1;
            }
        }
        let step_exact = |i: u32, j: u32| limit_step_probability(&t, rates, i as u64, j as u64);
        Ok(LimitLawReport {
            regime: LimitRegime::Cramer,
            h,
            gamma,
            n,
            m,
            end_law: compare_binned(&ends, end_exact, cutoff),
            step_law: Some(compare_binned(&steps, step_exact, cutoff)),
            step_law_total: Some(crate::ldp::limit_step_total(&t, rates)),
            mid_box_contact: None,
        })
    } else if h < 0.0 {
        match kf.regime(kernel.alpha()) {
            EndRegime::EndsFree => {
                let size = cutoff.min(n).min(m);
                let table = PartitionTable::build(kernel, size, size, h)?;
                let kill = 1.0 - h.exp();
                let exact = |i: u32, j: u32| {
                    if (i as usize) <= size && (j as usize) <= size {
                        kill * table.log_z(i as usize, j as usize).exp()
                    } else {
                        0.0
                    }
                };
                Ok(LimitLawReport {
                    regime: LimitRegime::EndsFree,
                    h,
                    gamma,
                    n,
                    m,
                    end_law: compare_binned(&lasts, exact, cutoff),
                    step_law: None,
                    step_law_total: None,
                    mid_box_contact: None,
                })
            }
            EndRegime::EndsPinned => {
                let total = kf.total();
                let exact = |i: u32, j: u32| kf.value(i as u64) * kf.value(j as u64) / (total * total);
                let (lo, hi) = (n as u32 / 4, 3 * n as u32 / 4);
                let mid = samples.iter().filter(|s| s.path.points.iter().any(|p| p.0 >= lo && p.0 <= hi)).count();
                Ok(LimitLawReport {
                    regime: LimitRegime::EndsPinned,
                    h,
                    gamma,
                    n,
                    m,
                    end_law: compare_binned(&ends, exact, cutoff),
                    step_law: None,
                    step_law_total: None,
                    mid_box_contact: Some(mid as f64 / samples.len().max(1) as f64),
                })
            }
            EndRegime::Boundary => Err(GpsError::Domain("the end exponent sits exactly on the regime boundary".into())),
        }
    } else {
        Err(GpsError::Domain("no limit law is available at h = 0".into()))
    }
}

/// Total-variation distance between the empirical path law and exact probabilities.
pub fn path_law_distance(paths: &[RenewalPath], exact: &HashMap<RenewalPath, f64>) -> f64 {
    let mut counts: HashMap<&RenewalPath, u64> = HashMap::new();
    for p in paths {
        *counts.entry(p).or_insert(0) += 1;
    }
    let nf = paths.len() as f64;
    let mut tv = 0.0;
    for (p, q) in exact {
        tv += (q - counts.get(p).copied().unwrap_or(0) as f64 / nf).abs();
    }
    for (p, c) in &counts {
        if !exact.contains_key(*p) {
            tv += *c as f64 / nf;
        }
    }
    0.5 * tv
}

/// Row-per-contact CSV body: `path_id,contact,n,m`.  Paths without contacts
/// emit one row with contact index 0 at the origin so every id appears.
pub fn write_paths_csv<W: Write>(mut w: W, paths: &[RenewalPath]) -> std::io::Result<()> {
    writeln!(w, "path_id,contact,n,m")?;
    for (id, p) in paths.iter().enumerate() {
        if p.points.is_empty() {
            writeln!(w, "{id},0,0,0")?;
        }
        for (c, (a, b)) in p.points.iter().enumerate() {
            writeln!(w, "{id},{},{a},{b}", c + 1)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_box_has_one_path() {
        let k = Kernel::gamma_ratio(1.5).unwrap();
        let t = PartitionTable::build(&k, 1, 1, 0.3).unwrap();
        let paths = sample_constrained(&k, &t, 1, 1, 7, 10).unwrap();
        assert!(paths.iter().all(|p| p.points == vec![(1, 1)]));
    }

    #[test]
    fn seeds_are_reproducible() {
        let k = Kernel::gamma_ratio(1.5).unwrap();
        let t = PartitionTable::build(&k, 20, 25, 0.8).unwrap();
        let a = sample_constrained(&k, &t, 20, 25, 3, 50).unwrap();
        let b = sample_constrained(&k, &t, 20, 25, 3, 50).unwrap();
        assert_eq!(a, b);
        let c = sample_constrained(&k, &t, 20, 25, 4, 50).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn paths_are_strictly_increasing() {
        let k = Kernel::gamma_ratio(1.5).unwrap();
        let t = PartitionTable::build(&k, 30, 30, 1.0).unwrap();
        for p in sample_constrained(&k, &t, 30, 30, 1, 100).unwrap() {
            assert_eq!(p.last(), (30, 30));
            assert!(p.steps().all(|(i, j)| i >= 1 && j >= 1));
        }
    }
}
