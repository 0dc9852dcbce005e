#![allow(clippy::needless_range_loop)]

use gps_core::error::GpsError;
use gps_core::exact_dp::{
    corner_log_z, enumerate_log_z, finite_size_free_energy, pair_model_log_z, FirstPair, PairModel, PartitionTable, Scaling,
};
use gps_core::kernels::{BiophysicsConvention, BiophysicsParams, FreeEndKernel, Kernel};
use gps_core::tilt::{solve, DEFAULT_TOL};

fn kernels() -> Vec<Kernel> {
    vec![
        Kernel::gamma_ratio(1.5).unwrap(),
        Kernel::modified_gamma_ratio(1.5, &[(3, 0.01)]).unwrap(),
        Kernel::modified_gamma_ratio(2.5, &[(2, 0.02)]).unwrap(),
        Kernel::power_law(1.3).unwrap(),
    ]
}

/// Plain quadruple-loop recursion in the linear domain with explicit weights.
fn naive_table(weight: impl Fn(usize, usize) -> f64, n: usize, m: usize) -> Vec<Vec<f64>> {
    let mut z = vec![vec![0.0; m + 1]; n + 1];
    z[0][0] = 1.0;
    for a in 1..=n {
        for b in 1..=m {
            let mut s = 0.0;
            for i in 1..=a {
                for j in 1..=b {
                    s += weight(i, j) * z[a - i][b - j];
                }
            }
            z[a][b] = s;
        }
    }
    z
}

#[test]
fn matches_naive_recursion_on_rectangles() {
    for k in kernels() {
        for h in [-1.0, 0.0, 0.4, 2.0] {
            let (n, m) = (25, 17);
            let t = PartitionTable::build(&k, n, m, h).unwrap();
            let z = naive_table(|i, j| h.exp() * k.value((i + j) as u64), n, m);
            for a in 0..=n {
                for b in 0..=m {
                    let want = z[a][b].ln();
                    let got = t.log_z(a, b);
                    if want == f64::NEG_INFINITY {
                        assert_eq!(got, want);
                    } else {
                        assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{a} {b} {got} {want}");
                    }
                }
            }
        }
    }
}

#[test]
fn tilt_identity_through_tilted_kernel() {
    // Z^c = e^{(N+M) g} P((N, M) in the tilted renewal), the latter from the tilted weights.
    let k = Kernel::gamma_ratio(1.5).unwrap();
    let h = 0.9;
    let g = solve(&k, h, DEFAULT_TOL).unwrap().g();
    let p = naive_table(|i, j| (h - g * (i + j) as f64).exp() * k.value((i + j) as u64), 20, 30);
    let t = PartitionTable::build(&k, 20, 30, h).unwrap();
    for (a, b) in [(1, 1), (5, 9), (20, 30), (20, 20)] {
        let via_tilt = (a + b) as f64 * g + p[a][b].ln();
        assert!((t.log_z(a, b) - via_tilt).abs() < 1e-12 * via_tilt.abs().max(1.0));
        assert!(p[a][b] <= 1.0);
    }
}

#[test]
fn library_enumeration_agrees() {
    let k = Kernel::gamma_ratio(1.5).unwrap();
    let t = PartitionTable::build(&k, 7, 9, 0.3).unwrap();
    for (a, b) in [(1, 1), (3, 5), (7, 9)] {
        let e = enumerate_log_z(&k, a, b, 0.3).unwrap();
        assert!((t.log_z(a, b) - e).abs() < 1e-12 * e.abs().max(1.0));
    }
}

#[test]
fn boundary_cells_and_subunit_bound() {
    for k in kernels() {
        for h in [-2.0, -0.3, 0.0] {
            let t = PartitionTable::build(&k, 30, 30, h).unwrap();
            assert_eq!(t.log_z(0, 0), 0.0);
            for a in 1..=30 {
                assert_eq!(t.log_z(a, 0), f64::NEG_INFINITY);
                assert_eq!(t.log_z(0, a), f64::NEG_INFINITY);
                for b in 1..=30 {
                    assert!(t.log_z(a, b) <= 1e-13, "Z > 1 at ({a}, {b}) for h = {h}");
                }
            }
        }
    }
}

#[test]
fn free_partition_function_by_direct_convolution() {
    let k = Kernel::gamma_ratio(1.5).unwrap();
    let kf = FreeEndKernel::power(1.5);
    let h = 0.7;
    let big = PartitionTable::build(&k, 8, 8, h).unwrap();
    let mut direct = 0.0;
    for i in 0..=8usize {
        for j in 0..=8usize {
            let zc = if i == 0 && j == 0 {
                1.0
            } else if i == 0 || j == 0 {
                0.0
            } else {
                PartitionTable::build(&k, i, j, h).unwrap().log_z(i, j).exp()
            };
            direct += kf.value((8 - i) as u64) * kf.value((8 - j) as u64) * zc;
        }
    }
    let lf = big.log_free(&kf, 8, 8);
    assert!((lf - direct.ln()).abs() < 1e-12 * lf.abs().max(1.0));
    assert!(lf >= big.log_z(8, 8));
}

#[test]
fn degenerate_free_ends_reduce_to_constrained() {
    let k = Kernel::gamma_ratio(1.7).unwrap();
    let t = PartitionTable::build(&k, 12, 15, -0.2).unwrap();
    assert_eq!(t.log_free(&FreeEndKernel::Delta, 12, 15), t.log_z(12, 15));
}

#[test]
fn dump_round_trip() {
    let k = Kernel::modified_gamma_ratio(2.5, &[(2, 0.02)]).unwrap();
    let t = PartitionTable::build(&k, 9, 13, 1.1).unwrap();
    let mut bytes = Vec::new();
    t.write_dump(&mut bytes).unwrap();
    let back = PartitionTable::read_dump(bytes.as_slice()).unwrap();
    assert_eq!((back.n_max(), back.m_max(), back.h(), back.kernel_hash()), (9, 13, 1.1, k.hash().as_str()));
    assert!(t.values().iter().zip(back.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert!(t.values().len() == back.values().len());
    bytes[0] = b'X';
    assert!(matches!(PartitionTable::read_dump(bytes.as_slice()), Err(GpsError::Config(_))));
}

#[test]
fn log_domain_fallback_matches_rescaled_sweep() {
    let k = Kernel::gamma_ratio(1.5).unwrap();
    let h = 6.0;
    // Oversized rescaling rates push most cells below the linear-domain floor.
    let forced = PartitionTable::build_with(&k, 200, 3, h, Scaling::Rates(5.0, 5.0), u64::MAX).unwrap();
    assert!(forced.fallback_cells() > 0);
    let auto = PartitionTable::build(&k, 200, 3, h).unwrap();
    for a in [1, 50, 120, 200] {
        for b in 1..=3 {
            let (x, y) = (forced.log_z(a, b), auto.log_z(a, b));
            assert!((x - y).abs() <= 1e-11 * y.abs().max(1.0), "{a} {b}: {x} vs {y}");
        }
    }
}

#[test]
fn streaming_corner_and_budget() {
    let k = Kernel::power_law(1.8).unwrap();
    let t = PartitionTable::build(&k, 50, 70, 0.6).unwrap();
    assert!((corner_log_z(&k, 50, 70, 0.6).unwrap() - t.log_z(50, 70)).abs() < 1e-12 * t.log_z(50, 70).abs());
    match PartitionTable::build_with(&k, 1000, 1000, 0.6, Scaling::Auto, 1 << 20) {
        Err(GpsError::Size { required_bytes, budget_bytes, .. }) => assert!(required_bytes > budget_bytes),
        other => panic!("expected a size error, got {other:?}"),
    }
}

fn pair(first_pair: FirstPair, e_b: f64) -> PairModel {
    PairModel { c: 2.15, e_b, e_l: 0.7, beta: 1.3, cbar: 1.4, first_pair }
}

#[test]
fn pair_recursion_smallest_box() {
    assert_eq!(pair_model_log_z(&pair(FirstPair::Unit, 1.0), 1, 1).unwrap(), 0.0);
    assert!(pair_model_log_z(&pair(FirstPair::Unit, 1.0), 0, 1).is_err());
}

#[test]
fn pair_recursion_matches_renewal_free_partition_function() {
    let p = pair(FirstPair::Unit, 1.0);
    let (k, h) = Kernel::biophysics(BiophysicsParams { c: p.c, e_b: p.e_b, e_l: p.e_l, beta: p.beta }, BiophysicsConvention::LoopLength).unwrap();
    let kf = FreeEndKernel::power(p.cbar);
    let t = PartitionTable::build(&k, 8, 8, h).unwrap();
    for n in 0..=8 {
        for m in 0..=8 {
            let free = t.log_free(&kf, n, m);
            let unit = pair_model_log_z(&p, n + 1, m + 1).unwrap();
            let rewarded = pair_model_log_z(&pair(FirstPair::Rewarded, 1.0), n + 1, m + 1).unwrap();
            assert!((unit - free).abs() < 1e-10, "{n} {m}");
            assert!((rewarded - p.beta * p.e_b - free).abs() < 1e-10, "{n} {m}");
        }
    }
}

#[test]
fn pair_recursion_monotone_in_binding_energy() {
    for (n, m) in [(3, 3), (6, 9), (10, 7)] {
        let lo = pair_model_log_z(&pair(FirstPair::Rewarded, 0.5), n, m).unwrap();
        let hi = pair_model_log_z(&pair(FirstPair::Rewarded, 1.5), n, m).unwrap();
        assert!(hi >= lo);
    }
}

#[test]
fn finite_size_estimates() {
    let k = Kernel::gamma_ratio(1.5).unwrap();
    let kf = FreeEndKernel::power(1.5);
    let neg = finite_size_free_energy(&k, &kf, -0.5, 1.0, &[25, 50, 100]).unwrap();
    assert!(neg.constrained.windows(2).all(|w| w[1].abs() < w[0].abs()));
    let pos = finite_size_free_energy(&k, &kf, 1.0, 1.0, &[50, 100, 200]).unwrap();
    assert!(pos.gap.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
    let g = solve(&k, 1.0, DEFAULT_TOL).unwrap().g();
    assert!((pos.extrapolated_constrained - 2.0 * g).abs() < 1e-3);
    assert!(finite_size_free_energy(&k, &kf, 1.0, 1.0, &[50, 100]).is_err());
}
