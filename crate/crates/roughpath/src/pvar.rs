//! p-variation over grid partitions by dynamic programming, and the
//! two-level rough-path distance built from the same supremum.
//!
//! The supremum is taken over sub-partitions of the sample grid, which is a
//! lower bound for the continuous-time supremum; refinement studies are the
//! caller's tool for quantifying the gap.

use crate::error::{invalid, Result};
use crate::grid::{require_same_grid, GridPath};
use crate::sig::{RoughPathGrid, SignaturePath};

/// Core DP: maximum of `sum_j w(i_j, i_{j+1})` over all sub-partitions
/// `0 = i_0 < ... < i_m = n_points - 1`. `O(N^2)` evaluations of `w`.
pub fn partition_supremum(n_points: usize, mut w: impl FnMut(usize, usize) -> f64) -> f64 {
    if n_points < 2 {
        return 0.0;
    }
    let mut best = vec![0.0f64; n_points];
    for j in 1..n_points {
        let mut b = f64::NEG_INFINITY;
        for i in 0..j {
            let cand = best[i] + w(i, j);
            if cand > b {
                b = cand;
            }
        }
        best[j] = b;
    }
    best[n_points - 1]
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) {
        return Err(invalid(format!("p-variation needs p >= 1, got {p}")));
    }
    Ok(())
}

/// p-variation of a grid of group elements (signature path or rough path
/// grid), using the homogeneous norm of Chen increments.
pub fn p_variation_group(times_len: usize, increment_norm: impl Fn(usize, usize) -> f64, p: f64) -> Result<f64> {
    check_p(p)?;
    let total = partition_supremum(times_len, |i, j| increment_norm(i, j).powf(p));
    Ok(total.powf(1.0 / p))
}

/// p-variation of a rough path grid.
pub fn p_variation_rough(path: &RoughPathGrid, p: f64) -> Result<f64> {
    check_p(p)?;
    // depth-2 increments from prefix blocks, avoiding group ops per pair
    let d = path.dim();
    let total = partition_supremum(path.len(), |i, j| {
        let gi = path.element(i);
        let gj = path.element(j);
        let mut sq1 = 0.0;
        for c in 0..d {
            let v = gj.level(1)[c] - gi.level(1)[c];
            sq1 += v * v;
        }
        let mut sq2 = 0.0;
        for a in 0..d {
            for b in 0..d {
                let v = gj.level(2)[a * d + b] - gi.level(2)[a * d + b]
                    - gi.level(1)[a] * (gj.level(1)[b] - gi.level(1)[b]);
                sq2 += v * v;
            }
        }
        (sq1.sqrt() + sq2.sqrt().sqrt()).powf(p)
    });
    Ok(total.powf(1.0 / p))
}

/// p-variation of a signature path at its full depth.
pub fn p_variation_signature(path: &SignaturePath, p: f64) -> Result<f64> {
    check_p(p)?;
    let total = partition_supremum(path.len(), |i, j| {
        path.increment(i, j).expect("indices in range").hnorm().powf(p)
    });
    Ok(total.powf(1.0 / p))
}

/// p-variation of a Banach-space-valued grid path (increments are value
/// differences, Euclidean norm).
pub fn p_variation_banach(path: &GridPath, p: f64) -> Result<f64> {
    check_p(p)?;
    let d = path.dim();
    let total = partition_supremum(path.len(), |i, j| {
        let (a, b) = (path.value(i), path.value(j));
        let sq: f64 = (0..d).map(|c| (b[c] - a[c]) * (b[c] - a[c])).sum();
        sq.sqrt().powf(p)
    });
    Ok(total.powf(1.0 / p))
}

/// Two-level rough-path distance on a shared grid:
/// `max_k sup_D (sum_j |pi_k(inc) - pi_k(inc~)|^{p/k})^{1/p}`, `k = 1, 2`,
/// with the supremum over grid sub-partitions.
pub fn dp_distance(a: &RoughPathGrid, b: &RoughPathGrid, p: f64) -> Result<f64> {
    if !(2.0..3.0).contains(&p) {
        return Err(invalid(format!("rough-path distance needs p in [2, 3), got {p}")));
    }
    require_same_grid(a.times(), b.times(), "dp_distance")?;
    if a.dim() != b.dim() {
        return Err(invalid("dp_distance needs matching dimensions"));
    }
    let d = a.dim();
    let n = a.len();

    let level1 = partition_supremum(n, |i, j| {
        let mut sq = 0.0;
        for c in 0..d {
            let va = a.element(j).level(1)[c] - a.element(i).level(1)[c];
            let vb = b.element(j).level(1)[c] - b.element(i).level(1)[c];
            sq += (va - vb) * (va - vb);
        }
        sq.sqrt().powf(p)
    });
    let level2 = partition_supremum(n, |i, j| {
        let mut sq = 0.0;
        for r in 0..d {
            for c in 0..d {
                let va = a.element(j).level(2)[r * d + c] - a.element(i).level(2)[r * d + c]
                    - a.element(i).level(1)[r]
                        * (a.element(j).level(1)[c] - a.element(i).level(1)[c]);
                let vb = b.element(j).level(2)[r * d + c] - b.element(i).level(2)[r * d + c]
                    - b.element(i).level(1)[r]
                        * (b.element(j).level(1)[c] - b.element(i).level(1)[c]);
                sq += (va - vb) * (va - vb);
            }
        }
        sq.sqrt().powf(p / 2.0)
    });
    Ok(level1.powf(1.0 / p).max(level2.powf(1.0 / p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sig::pl_signature;

    fn path_1d(values: &[f64]) -> GridPath {
        let times = (0..values.len()).map(|i| i as f64).collect();
        GridPath::new(times, 1, values.to_vec()).unwrap()
    }

    /// Exhaustive supremum over all sub-partitions (interior subsets).
    pub fn brute_force_supremum(n_points: usize, w: impl Fn(usize, usize) -> f64) -> f64 {
        let interior = n_points - 2;
        let mut best = f64::NEG_INFINITY;
        for mask in 0u32..(1 << interior) {
            let mut pts = vec![0usize];
            for b in 0..interior {
                if mask & (1 << b) != 0 {
                    pts.push(b + 1);
                }
            }
            pts.push(n_points - 1);
            let total: f64 = pts.windows(2).map(|v| w(v[0], v[1])).sum();
            if total > best {
                best = total;
            }
        }
        best
    }

    #[test]
    fn monotone_path_total_increment() {
        let path = path_1d(&[0.0, 1.0, 2.0]);
        for p in [1.0, 1.5, 2.0, 3.0] {
            assert!((p_variation_banach(&path, p).unwrap() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn up_down_path_p2() {
        let path = path_1d(&[0.0, 1.0, 0.0]);
        // brute force over partitions of 3 points: {0,2} gives 0, {0,1,2} gives 2
        let brute = brute_force_supremum(3, |i, j| {
            let d = (path.value(j)[0] - path.value(i)[0]).abs();
            d.powi(2)
        });
        assert!((brute - 2.0).abs() < 1e-15);
        assert!((p_variation_banach(&path, 2.0).unwrap() - brute.sqrt()).abs() < 1e-15);
        assert!((p_variation_banach(&path, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn constant_path_is_flat() {
        let path = GridPath::new(vec![0.0, 1.0, 2.0], 2, vec![0.5; 6]).unwrap();
        assert_eq!(p_variation_banach(&path, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_p() {
        let path = path_1d(&[0.0, 1.0]);
        assert!(p_variation_banach(&path, 0.5).is_err());
        let sig = pl_signature(&path, 2).unwrap().restrict2().unwrap();
        assert!(dp_distance(&sig, &sig, 1.5).is_err());
        assert!(dp_distance(&sig, &sig, 3.0).is_err());
    }

    #[test]
    fn dp_matches_brute_force_on_small_grids() {
        use rand::prelude::*;
        let mut rng = rand::rngs::StdRng::seed_from_u64(99);
        for _ in 0..50 {
            let n = rng.random_range(3..=9);
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let path = path_1d(&values);
            let p = rng.random_range(1.0..3.0);
            let w = |i: usize, j: usize| (path.value(j)[0] - path.value(i)[0]).abs().powf(p);
            let brute = brute_force_supremum(n, w);
            let dp = partition_supremum(n, w);
            assert!((brute - dp).abs() < 1e-12);
        }
    }

    #[test]
    fn pvar_monotone_in_p() {
        use rand::prelude::*;
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        let values: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let path = path_1d(&values);
        let mut prev = f64::INFINITY;
        for p in [1.0, 1.5, 2.0, 2.5, 3.0] {
            let v = p_variation_banach(&path, p).unwrap();
            assert!(v <= prev + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn level1_pvar_at_p1_is_total_variation() {
        let path = path_1d(&[0.0, 1.0, -0.5, 0.25]);
        let tv = 1.0 + 1.5 + 0.75;
        assert!((p_variation_banach(&path, 1.0).unwrap() - tv).abs() < 1e-12);
        let sig = pl_signature(&path, 1).unwrap();
        let group = p_variation_signature(&sig, 1.0).unwrap();
        assert!((group - tv).abs() < 1e-12);
    }

    #[test]
    fn distance_to_self_is_zero_and_symmetric() {
        let path = GridPath::new(
            vec![0.0, 0.4, 1.0, 1.7],
            2,
            vec![0.0, 0.0, 0.3, -0.1, -0.2, 0.5, 0.9, 0.4],
        )
        .unwrap();
        let other = GridPath::new(
            vec![0.0, 0.4, 1.0, 1.7],
            2,
            vec![0.0, 0.0, 0.1, 0.2, -0.5, 0.1, 0.3, -0.2],
        )
        .unwrap();
        let a = pl_signature(&path, 2).unwrap().restrict2().unwrap();
        let b = pl_signature(&other, 2).unwrap().restrict2().unwrap();
        assert_eq!(dp_distance(&a, &a, 2.5).unwrap(), 0.0);
        let ab = dp_distance(&a, &b, 2.5).unwrap();
        let ba = dp_distance(&b, &a, 2.5).unwrap();
        assert!((ab - ba).abs() < 1e-13);
        assert!(ab > 0.0);
    }

    #[test]
    fn rough_pvar_matches_signature_pvar_at_depth2() {
        let path = GridPath::new(
            vec![0.0, 0.5, 1.0, 1.5, 2.0],
            2,
            vec![0.0, 0.0, 0.3, -0.1, -0.2, 0.5, 0.6, 0.2, 0.9, -0.4],
        )
        .unwrap();
        let sig = pl_signature(&path, 2).unwrap();
        let rough = sig.restrict2().unwrap();
        let a = p_variation_signature(&sig, 2.3).unwrap();
        let b = p_variation_rough(&rough, 2.3).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
