//! Exact finite-size partition functions.
//!
//! The constrained partition function obeys the renewal recursion
//! `Z_{n,m} = Σ_{i<=n, j<=m} e^h K(i+j) Z_{n-i,m-j}` with `Z_{0,0} = 1`.
//! Grouping the inner sum by `t = i + j` and carrying, for every column `m`,
//! the vector
//!
//! `V_{n,m}(t) = Σ_{i+j=t} e^{-a i - b j} Y_{n-i,m-j}`,
//! `V_{n,m}(t) = e^{-a} V_{n-1,m}(t-1) + e^{-a - b(t-1)} Y_{n-1,m-t+1}`,
//!
//! gives `Y_{n,m} = Σ_t e^h K(t) V_{n,m}(t)` in `O(n + m)` per cell, where
//! `Y_{n,m} = Z_{n,m} e^{-a n - b m}` is the partition function rescaled by
//! a point `(a, b)` of the feasible curve.  With that choice the rescaled
//! step weights form a (sub-)probability, so `Y <= 1` and the recursion only
//! adds positive numbers.  Cells whose rescaled value underflows are
//! recomputed directly in the log domain.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, GpsError, Result};
use crate::kernels::{FreeEndKernel, Kernel};
use crate::ldp::rate_and_free_energy;
use crate::tilt::{solve, DEFAULT_TOL};

/// Default memory budget for tables: 4 GiB.
pub const DEFAULT_MEMORY_BUDGET: u64 = 4 << 30;
/// Rescaled values below this are recomputed in the log domain.
const TINY: f64 = 1e-250;
const DUMP_MAGIC: &[u8; 8] = b"GPSZTAB\0";
const DUMP_VERSION: u32 = 1;

/// How the table is rescaled during the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scaling {
    /// Optimal rates for the ray through the table corner (zero for `h <= 0`).
    Auto,
    /// Explicit rates `(a, b)`; the rescaled step weights must have mass at most one.
    Rates(f64, f64),
}

/// Log-domain grid of `Z^c_{n,m}` for `0 <= n <= N`, `0 <= m <= M`.
#[derive(Debug, Clone)]
pub struct PartitionTable {
    n_max: usize,
    m_max: usize,
    h: f64,
    kernel_hash: String,
    rates: (f64, f64),
    log_z: Vec<f64>,
    scaled: Vec<f64>,
    fallback_cells: usize,
}

fn required_bytes(n: usize, m: usize) -> u64 {
    let cells = (n as u64 + 1) * (m as u64 + 1);
    let carry = (m as u64 + 1) * (n as u64 + m as u64 + 2);
    8 * (2 * cells + carry)
}

/// Rates of the feasible-curve point selected by the ray `M/N`.
fn auto_rates(k: &Kernel, n: usize, m: usize, h: f64) -> Result<(f64, f64)> {
    if h <= 0.0 {
        return Ok((0.0, 0.0));
    }
    let t = solve(k, h, DEFAULT_TOL)?;
    let gamma = (m.max(1) as f64) / (n.max(1) as f64);
    let r = rate_and_free_energy(&t, gamma, DEFAULT_TOL)?;
    Ok(r.rates(t.g()).expect("h > 0"))
}

impl PartitionTable {
    /// Builds the table with automatic rescaling and the default memory budget.
    pub fn build(k: &Kernel, n: usize, m: usize, h: f64) -> Result<PartitionTable> {
        PartitionTable::build_with(k, n, m, h, Scaling::Auto, DEFAULT_MEMORY_BUDGET)
    }

    pub fn build_with(k: &Kernel, n: usize, m: usize, h: f64, scaling: Scaling, budget: u64) -> Result<PartitionTable> {
        if !h.is_finite() {
            return domain(format!("pinning strength must be finite, got {h}"));
        }
        let need = required_bytes(n, m);
        if need > budget {
            return Err(GpsError::Size { rows: n + 1, cols: m + 1, required_bytes: need, budget_bytes: budget });
        }
        let (a, b) = match scaling {
            Scaling::Auto => auto_rates(k, n, m, h)?,
            Scaling::Rates(a, b) => (a, b),
        };
        let width = m + 1;
        let tmax = n + m;
        let weights: Vec<f64> = (0..=tmax as u64).map(|t| if t < 2 { 0.0 } else { (h + k.ln_value(t)).exp() }).collect();
        let ln_weights: Vec<f64> = (0..=tmax as u64).map(|t| if t < 2 { f64::NEG_INFINITY } else { h + k.ln_value(t) }).collect();
        let ea = (-a).exp();
        let eb: Vec<f64> = (0..=tmax).map(|s| (-a - b * s as f64).exp()).collect();

        let mut log_z = vec![f64::NEG_INFINITY; (n + 1) * width];
        let mut scaled = vec![0.0; (n + 1) * width];
        log_z[0] = 0.0;
        scaled[0] = 1.0;
        let mut carry: Vec<Vec<f64>> = (0..width).map(|mm| vec![0.0; n + mm + 2]).collect();
        let mut fallback_cells = 0;

        for row in 1..=n {
            let (done, _) = log_z.split_at(row * width);
            let prev: &[f64] = &scaled[(row - 1) * width..row * width];
            let cells: Vec<(f64, f64, bool)> = carry
                .par_iter_mut()
                .enumerate()
                .map(|(col, v)| {
                    if col == 0 {
                        return (0.0, f64::NEG_INFINITY, false);
                    }
                    // Update the carried anti-diagonal sums in place, highest t first.
                    let top = row + col;
                    for t in (2..=top).rev() {
                        let mut val = if t >= 3 { ea * v[t - 1] } else { 0.0 };
                        let j = t - 1;
                        if j <= col {
                            val += eb[j] * prev[col - j];
                        }
                        v[t] = val;
                    }
                    if col < row && row <= m && col <= n {
                        // Mirror of an already finished cell.
                        let lz = done[col * width + row];
                        return ((lz - a * row as f64 - b * col as f64).exp(), lz, false);
                    }
                    let mut y = 0.0;
                    for t in 2..=top {
                        y += weights[t] * v[t];
                    }
                    if y >= TINY {
                        (y, y.ln() + a * row as f64 + b * col as f64, false)
                    } else {
                        (y, direct_log_cell(done, width, row, col, &ln_weights), true)
                    }
                })
                .collect();
            for (col, (y, lz, fell_back)) in cells.into_iter().enumerate() {
                scaled[row * width + col] = y;
                log_z[row * width + col] = lz;
                fallback_cells += fell_back as usize;
            }
        }
        Ok(PartitionTable { n_max: n, m_max: m, h, kernel_hash: k.hash(), rates: (a, b), log_z, scaled, fallback_cells })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn kernel_hash(&self) -> &str {
        &self.kernel_hash
    }

    /// Rescaling rates `(a, b)` used during the sweep.
    pub fn rates(&self) -> (f64, f64) {
        self.rates
    }

    /// Number of cells recomputed in the log domain.
    pub fn fallback_cells(&self) -> usize {
        self.fallback_cells
    }

    /// `ln Z^c_{n,m}`.
    pub fn log_z(&self, n: usize, m: usize) -> f64 {
        self.log_z[n * (self.m_max + 1) + m]
    }

    /// `Z^c_{n,m} e^{-a n - b m}` (zero if it underflows).
    pub fn scaled(&self, n: usize, m: usize) -> f64 {
        self.scaled[n * (self.m_max + 1) + m]
    }

    /// Row-major log values.
    pub fn values(&self) -> &[f64] {
        &self.log_z
    }

    /// Writes the versioned binary dump: magic, version, N, M, h, kernel hash,
    /// rescaling rates, then `(N+1)(M+1)` little-endian log values row by row.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&(self.n_max as u64).to_le_bytes())?;
        w.write_all(&(self.m_max as u64).to_le_bytes())?;
        w.write_all(&self.h.to_le_bytes())?;
        let hash = self.kernel_hash.as_bytes();
        w.write_all(&(hash.len() as u32).to_le_bytes())?;
        w.write_all(hash)?;
        w.write_all(&self.rates.0.to_le_bytes())?;
        w.write_all(&self.rates.1.to_le_bytes())?;
        for v in &self.log_z {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_dump<R: Read>(mut r: R) -> Result<PartitionTable> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(GpsError::Config("not a partition-table dump".into()));
        }
        let version = read_u32(&mut r)?;
        if version != DUMP_VERSION {
            return Err(GpsError::Config(format!("unsupported dump version {version}")));
        }
        let n = read_u64(&mut r)? as usize;
        let m = read_u64(&mut r)? as usize;
        let h = read_f64(&mut r)?;
        let len = read_u32(&mut r)? as usize;
        let mut hash = vec![0u8; len];
        r.read_exact(&mut hash)?;
        let kernel_hash = String::from_utf8(hash).map_err(|e| GpsError::Config(format!("bad kernel hash: {e}")))?;
        let rates = (read_f64(&mut r)?, read_f64(&mut r)?);
        let cells = (n + 1).checked_mul(m + 1).ok_or_else(|| GpsError::Config("dump dimensions overflow".into()))?;
        let mut log_z = Vec::with_capacity(cells);
        for _ in 0..cells {
            log_z.push(read_f64(&mut r)?);
        }
        let width = m + 1;
        let scaled = (0..cells)
            .map(|c| (log_z[c] - rates.0 * (c / width) as f64 - rates.1 * (c % width) as f64).exp())
            .collect();
        Ok(PartitionTable { n_max: n, m_max: m, h, kernel_hash, rates, log_z, scaled, fallback_cells: 0 })
    }

    /// Log weights `ln K_f(N-i) + ln K_f(M-j) + ln Z^c_{i,j}` of the last contact `(i, j)`.
    pub fn free_summands(&self, kf: &FreeEndKernel, n: usize, m: usize) -> Vec<f64> {
        assert!(n <= self.n_max && m <= self.m_max);
        let mut out = Vec::with_capacity((n + 1) * (m + 1));
        for i in 0..=n {
            let fi = kf.ln_value((n - i) as u64);
            for j in 0..=m {
                out.push(fi + kf.ln_value((m - j) as u64) + self.log_z(i, j));
            }
        }
        out
    }

    /// `ln Z^f_{n,m}` for any `n <= N`, `m <= M`.
    pub fn log_free(&self, kf: &FreeEndKernel, n: usize, m: usize) -> f64 {
        log_sum_exp(&self.free_summands(kf, n, m))
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// `ln Σ exp(x_i)`, ignoring `-∞` entries.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let mx = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + xs.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
}

/// Direct log-domain evaluation of one cell from finished rows.
fn direct_log_cell(done: &[f64], width: usize, row: usize, col: usize, ln_weights: &[f64]) -> f64 {
    let mut terms = Vec::with_capacity(row * col);
    for i in 1..=row {
        for j in 1..=col {
            let prev = done[(row - i) * width + (col - j)];
            if prev > f64::NEG_INFINITY {
                terms.push(prev + ln_weights[i + j]);
            }
        }
    }
    log_sum_exp(&terms)
}

/// `ln Z^c_{N,M}` keeping only the previous row and the carried sums.
///
/// Cells that underflow in the rescaled domain are dropped, which only
/// affects the result when the corner itself underflows; that case is
/// reported as an error so the caller can fall back to a full table.
pub fn corner_log_z(k: &Kernel, n: usize, m: usize, h: f64) -> Result<f64> {
    let (a, b) = auto_rates(k, n, m, h)?;
    let tmax = n + m;
    let weights: Vec<f64> = (0..=tmax as u64).map(|t| if t < 2 { 0.0 } else { (h + k.ln_value(t)).exp() }).collect();
    let ea = (-a).exp();
    let eb: Vec<f64> = (0..=tmax).map(|s| (-a - b * s as f64).exp()).collect();
    let mut prev = vec![0.0; m + 1];
    prev[0] = 1.0;
    let mut carry: Vec<Vec<f64>> = (0..=m).map(|mm| vec![0.0; n + mm + 2]).collect();
    for row in 1..=n {
        let cur: Vec<f64> = carry
            .par_iter_mut()
            .enumerate()
            .map(|(col, v)| {
                if col == 0 {
                    return 0.0;
                }
                let top = row + col;
                let mut y = 0.0;
                for t in (2..=top).rev() {
                    let mut val = if t >= 3 { ea * v[t - 1] } else { 0.0 };
                    let j = t - 1;
                    if j <= col {
                        val += eb[j] * prev[col - j];
                    }
                    v[t] = val;
                    y += weights[t] * val;
                }
                y
            })
            .collect();
        prev = cur;
    }
    let y = prev[m];
    if !(y >= TINY) {
        return domain(format!("corner value underflows in the rescaled domain ({y:e}); build a full table"));
    }
    Ok(y.ln() + a * n as f64 + b * m as f64)
}

/// Which first-pair convention the pair recursion uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FirstPair {
    /// `W_1^1 = 1`.
    Unit,
    /// `W_1^1 = e^{β E_b}`: the first pair carries its binding energy.
    Rewarded,
}

/// Parameters of the pair recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairModel {
    pub c: f64,
    pub e_b: f64,
    pub e_l: f64,
    pub beta: f64,
    /// Exponent of the free-end weight `A(l) = (l+1)^{-cbar}`.
    pub cbar: f64,
    pub first_pair: FirstPair,
}

/// `ln Z_N^M` of the pair model:
/// `W_{r+1}^{s+1} = e^{β E_b} W_r^s + e^{β(E_b-E_l)} Σ_{i<r, i'<s, i+i'>0} B(i+i') W_{r-i}^{s-i'}`
/// with `B(l) = l^{-c}`, `W_1^s = W_r^1 = 0` for `r, s > 1`, and
/// `Z_N^M = Σ_{i<N, j<M} A(i) A(j) W_{N-i}^{M-j}`.
pub fn pair_model_log_z(p: &PairModel, n: usize, m: usize) -> Result<f64> {
    if n < 1 || m < 1 {
        return domain("pair model needs N, M >= 1");
    }
    if !(p.c > 2.0) {
        return domain(format!("loop exponent c must exceed 2, got {}", p.c));
    }
    let width = m + 1;
    let mut lw = vec![f64::NEG_INFINITY; (n + 1) * width];
    lw[width + 1] = match p.first_pair {
        FirstPair::Unit => 0.0,
        FirstPair::Rewarded => p.beta * p.e_b,
    };
    let stack = p.beta * p.e_b;
    let looped = p.beta * (p.e_b - p.e_l);
    for r1 in 2..=n {
        for s1 in 2..=m {
            let (r, s) = (r1 - 1, s1 - 1);
            let mut terms = vec![stack + lw[r * width + s]];
            for i in 0..r {
                for ip in 0..s {
                    if i + ip == 0 {
                        continue;
                    }
                    let w = lw[(r - i) * width + (s - ip)];
                    if w > f64::NEG_INFINITY {
                        terms.push(looped - p.c * ((i + ip) as f64).ln() + w);
                    }
                }
            }
            lw[r1 * width + s1] = log_sum_exp(&terms);
        }
    }
    let mut terms = Vec::new();
    for i in 0..n {
        for j in 0..m {
            let w = lw[(n - i) * width + (m - j)];
            if w > f64::NEG_INFINITY {
                terms.push(-p.cbar * ((i + 1) as f64).ln() - p.cbar * ((j + 1) as f64).ln() + w);
            }
        }
    }
    Ok(log_sum_exp(&terms))
}

/// `ln Z^c_{n,m}` by explicit enumeration of every pair of compositions of
/// `n` and `m` into the same number of positive parts.  Exponential cost;
/// intended for boxes up to about `12 × 12`.
pub fn enumerate_log_z(k: &Kernel, n: usize, m: usize, h: f64) -> Result<f64> {
    if n == 0 || m == 0 || n > 20 || m > 20 {
        return domain(format!("enumeration supports 1 <= N, M <= 20, got ({n}, {m})"));
    }
    let parts_n = compositions(n);
    let parts_m = compositions(m);
    let mut terms = Vec::new();
    for a in &parts_n {
        for b in parts_m.iter().filter(|b| b.len() == a.len()) {
            let mut lw = 0.0;
            for (i, j) in a.iter().zip(b) {
                lw += h + k.ln_value((i + j) as u64);
            }
            terms.push(lw);
        }
    }
    Ok(log_sum_exp(&terms))
}

/// All compositions of `n` into positive parts, from cut-point bitmasks.
fn compositions(n: usize) -> Vec<Vec<usize>> {
    (0..1u32 << (n - 1))
        .map(|mask| {
            let mut parts = Vec::new();
            let mut len = 1;
            for bit in 0..n - 1 {
                if mask >> bit & 1 == 1 {
                    parts.push(len);
                    len = 1;
                } else {
                    len += 1;
                }
            }
            parts.push(len);
            parts
        })
        .collect()
}

/// Per-size free-energy estimates along a ray and their extrapolation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteSizeReport {
    pub h: f64,
    pub gamma: f64,
    pub sizes: Vec<usize>,
    /// `(1/N) ln Z^c_{N, round(γN)}`.
    pub constrained: Vec<f64>,
    /// `(1/N) ln Z^f_{N, round(γN)}`.
    pub free: Vec<f64>,
    /// `free - constrained` per size.
    pub gap: Vec<f64>,
    /// Fit of `F + c₁ ln N / N + c₂ / N` to the constrained values.
    pub extrapolated_constrained: f64,
    pub extrapolated_free: f64,
}

/// Least-squares fit of `f_N = F + c₁ ln N / N + c₂ / N`; returns `F`.
/// With two sizes the logarithmic term is dropped.
pub fn extrapolate(sizes: &[usize], values: &[f64]) -> f64 {
    let rows: Vec<Vec<f64>> = sizes
        .iter()
        .map(|&s| {
            let n = s as f64;
            if sizes.len() >= 3 {
                vec![1.0, n.ln() / n, 1.0 / n]
            } else {
                vec![1.0, 1.0 / n]
            }
        })
        .collect();
    let p = rows[0].len();
    let mut ata = vec![vec![0.0; p]; p];
    let mut aty = vec![0.0; p];
    for (row, y) in rows.iter().zip(values) {
        for i in 0..p {
            aty[i] += row[i] * y;
            for j in 0..p {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    solve_small(ata, aty)[0]
}

/// Gaussian elimination with partial pivoting for tiny dense systems.
fn solve_small(mut a: Vec<Vec<f64>>, mut y: Vec<f64>) -> Vec<f64> {
    let n = y.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        y.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            y[row] -= f * y[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (y[row] - s) / a[row][row];
    }
    x
}

/// Builds one table at the largest size and reads every smaller corner from it.
pub fn finite_size_free_energy(
    k: &Kernel,
    kf: &FreeEndKernel,
    h: f64,
    gamma: f64,
    sizes: &[usize],
) -> Result<FiniteSizeReport> {
    if sizes.len() < 3 {
        return domain("finite-size extrapolation needs at least three sizes");
    }
    let n_max = *sizes.iter().max().unwrap();
    let m_of = |n: usize| (gamma * n as f64).round() as usize;
    let table = PartitionTable::build(k, n_max, m_of(n_max), h)?;
    let mut constrained = Vec::new();
    let mut free = Vec::new();
    for &n in sizes {
        let m = m_of(n);
        constrained.push(table.log_z(n, m) / n as f64);
        free.push(table.log_free(kf, n, m) / n as f64);
    }
    let gap = free.iter().zip(&constrained).map(|(f, c)| f - c).collect();
    Ok(FiniteSizeReport {
        h,
        gamma,
        sizes: sizes.to_vec(),
        extrapolated_constrained: extrapolate(sizes, &constrained),
        extrapolated_free: extrapolate(sizes, &free),
        constrained,
        free,
        gap,
    })
}
