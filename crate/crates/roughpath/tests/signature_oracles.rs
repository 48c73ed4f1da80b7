//! Oracle checks for signatures and the grid metrics: brute-force
//! iterated integrals by quadrature, exhaustive partition enumeration,
//! and the factorial-decay shape of extended levels.

use roughpath::grid::GridPath;
use roughpath::lift::{sample_brownian, strat_lift};
use roughpath::pvar::{dp_distance, p_variation_banach, partition_supremum};
use roughpath::sig::{lyons_extend, pl_signature, RoughPathGrid};
use roughpath::tensor::TruncatedTensor;

/// Iterated Riemann-Stieltjes integrals of a polygon up to depth 3 by
/// brute-force quadrature: the polygon is refined to a fine parameter grid
/// and the nested sums are accumulated directly.
fn quadrature_signature(path: &GridPath, refine: usize) -> Vec<Vec<f64>> {
    let d = path.dim();
    // refine the polygon
    let mut pts: Vec<Vec<f64>> = Vec::new();
    for i in 0..path.len() - 1 {
        let (a, b) = (path.value(i), path.value(i + 1));
        for r in 0..refine {
            let lam = r as f64 / refine as f64;
            pts.push((0..d).map(|c| a[c] + lam * (b[c] - a[c])).collect());
        }
    }
    pts.push(path.value(path.len() - 1).to_vec());

    let n = pts.len() - 1;
    let mut level1 = vec![0.0; d];
    let mut level2 = vec![0.0; d * d];
    let mut level3 = vec![0.0; d * d * d];
    // running values of the lower iterated integrals at the left endpoint
    for k in 0..n {
        let prev1 = level1.clone();
        let prev2 = level2.clone();
        let inc: Vec<f64> = (0..d).map(|c| pts[k + 1][c] - pts[k][c]).collect();
        // trapezoid value of the integrand halfway through the step keeps
        // the quadrature second-order on each linear segment
        for a in 0..d {
            for b in 0..d {
                let mid1 = prev1[a] + 0.5 * inc[a];
                level2[a * d + b] += mid1 * inc[b];
            }
        }
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    // midpoint of the level-2 integrand along the segment:
                    // I2(s) = prev2 + prev1 (x) delta s + delta^2 s^2/2
                    let mid2 = prev2[a * d + b]
                        + 0.5 * prev1[a] * inc[b]
                        + 0.125 * inc[a] * inc[b];
                    level3[(a * d + b) * d + c] += mid2 * inc[c];
                }
            }
        }
        for c in 0..d {
            level1[c] += inc[c];
        }
    }
    vec![level1, level2, level3]
}

#[test]
fn pl_signature_matches_quadrature_oracle() {
    use rand::prelude::*;
    let mut rng = rand::rngs::StdRng::seed_from_u64(2718);
    for _ in 0..5 {
        let values: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let path = GridPath::new(vec![0.0, 0.6, 1.0], 2, values).unwrap();
        let sig = pl_signature(&path, 3).unwrap();
        let got = sig.element(sig.len() - 1);
        let oracle = quadrature_signature(&path, 4000);
        for (k, want) in oracle.iter().enumerate() {
            for (a, b) in got.level(k + 1).iter().zip(want.iter()) {
                assert!((a - b).abs() < 1e-8, "level {} mismatch: {a} vs {b}", k + 1);
            }
        }
    }
}

#[test]
fn dp_distance_level1_shift_matches_brute_force() {
    // base path: constant zero; comparison: flat, then one slope-c segment,
    // then flat again. The distance reduces to the level-1 p-variation of
    // the difference as long as the level-2 contribution stays below it.
    let c = 0.6;
    let times: Vec<f64> = (0..=4).map(|i| i as f64 * 0.25).collect();
    let shift = GridPath::new(times.clone(), 1, vec![0.0, 0.0, c * 0.25, c * 0.25, c * 0.25])
        .unwrap();
    let gamma = RoughPathGrid::identity_path(times.clone(), 1).unwrap();
    let gamma_shifted = pl_signature(&shift, 2).unwrap().restrict2().unwrap();
    let p = 2.5;
    let got = dp_distance(&gamma, &gamma_shifted, p).unwrap();

    // brute force both level suprema over all sub-partitions
    let n = times.len();
    let brute = |weight: &dyn Fn(usize, usize) -> f64| -> f64 {
        let interior = n - 2;
        let mut best = f64::NEG_INFINITY;
        for mask in 0u32..(1 << interior) {
            let mut pts = vec![0usize];
            for b in 0..interior {
                if mask & (1 << b) != 0 {
                    pts.push(b + 1);
                }
            }
            pts.push(n - 1);
            let total: f64 = pts.windows(2).map(|w| weight(w[0], w[1])).sum();
            best = best.max(total);
        }
        best
    };
    let lvl1 = brute(&|i, j| {
        let da = gamma_shifted.element(j).level(1)[0] - gamma_shifted.element(i).level(1)[0];
        da.abs().powf(p)
    })
    .powf(1.0 / p);
    let lvl2 = brute(&|i, j| {
        let gi = gamma_shifted.element(i);
        let gj = gamma_shifted.element(j);
        let v = gj.level(2)[0] - gi.level(2)[0] - gi.level(1)[0] * (gj.level(1)[0] - gi.level(1)[0]);
        v.abs().powf(p / 2.0)
    })
    .powf(1.0 / p);
    assert!((got - lvl1.max(lvl2)).abs() < 1e-12);
    // the shift is small, so level 1 dominates and equals c * L
    assert!((got - c * 0.25).abs() < 1e-12);
    assert!((got - p_variation_banach(&shift, p).unwrap()).abs() < 1e-12);
}

#[test]
fn extension_levels_decay_like_powers_of_interval_variation() {
    // |pi_k(extension increment)| <= C * (p-variation over the interval)^k:
    // the worst constant stays bounded across dyadic interval scales
    let steps = 256;
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
    let b = sample_brownian(&times, 2, 77).unwrap();
    let lift = strat_lift(&b).unwrap();
    let ext = lyons_extend(&lift, 4).unwrap();
    let p = 2.5;
    let mut worst_per_scale: Vec<f64> = Vec::new();
    for scale in [4usize, 8, 16, 32, 64] {
        let mut worst = 0.0f64;
        for start in (0..steps).step_by(scale) {
            let end = start + scale;
            // p-variation of the depth-2 path over the window
            let window = partition_supremum(scale + 1, |i, j| {
                lift.increment(start + i, start + j).unwrap().hnorm().powf(p)
            })
            .powf(1.0 / p);
            let inc = ext.increment(start, end).unwrap();
            for k in 1..=4 {
                let norm: f64 =
                    inc.level(k).iter().map(|x| x * x).sum::<f64>().sqrt();
                let ratio = norm / window.powi(k as i32);
                worst = worst.max(ratio);
            }
        }
        worst_per_scale.push(worst);
    }
    let lo = worst_per_scale.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = worst_per_scale.iter().cloned().fold(0.0f64, f64::max);
    // bounded ratio across scales (generous band for a qualitative check)
    assert!(hi / lo < 10.0, "ratios across scales: {worst_per_scale:?}");
    assert!(hi < 2.0, "unexpectedly large constant: {worst_per_scale:?}");
}

#[test]
fn extension_converges_under_grid_refinement() {
    // the extension along a refined grid approaches the direct signature
    // of the underlying bounded-variation polygon
    let coarse_err = extension_gap(8);
    let fine_err = extension_gap(64);
    assert!(fine_err < coarse_err / 4.0, "{coarse_err} -> {fine_err}");

    fn extension_gap(steps: usize) -> f64 {
        let path = GridPath::sample_fn(1.0, steps, 2, |t, out| {
            out[0] = (3.0 * t).sin();
            out[1] = t * t - t;
        })
        .unwrap();
        let truth = GridPath::sample_fn(1.0, 2048, 2, |t, out| {
            out[0] = (3.0 * t).sin();
            out[1] = t * t - t;
        })
        .unwrap();
        let want = pl_signature(&truth, 3).unwrap();
        let ext = lyons_extend(&strat_lift(&path).unwrap().clone(), 3).unwrap();
        let got = ext.element(ext.len() - 1);
        let reference = want.element(want.len() - 1);
        got.level(3)
            .iter()
            .zip(reference.level(3).iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[test]
fn random_inverse_property_any_seed() {
    use rand::prelude::*;
    let mut rng = rand::rngs::StdRng::seed_from_u64(9099);
    for _ in 0..20 {
        let levels = (1..=4u32)
            .map(|k| (0..2usize.pow(k)).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let g = TruncatedTensor::from_levels(2, levels).unwrap();
        assert!(g.mul(&g.inv()).unwrap().is_identity(1e-12));
    }
}
