//! Dense arithmetic in the step-`n` truncated tensor group over `R^d`.
//!
//! Elements are stored as one coefficient block per tensor level; the scalar
//! level is fixed to 1, so every value of this type is a group element. The
//! group product truncates above the stored depth, the inverse is the
//! alternating Neumann sum, and the homogeneous norm is
//! `sum_k |pi_k(g)|^(1/k)` with the Frobenius norm per level.

use crate::error::{invalid, Result};

/// Default absolute tolerance for unit-scale equality checks.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Group element of `T^(n)(R^d)`: blocks `levels[k-1]` of length `d^k`,
/// `k = 1..=n`, scalar level implicitly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedTensor {
    dim: usize,
    levels: Vec<Vec<f64>>,
}

impl TruncatedTensor {
    /// Group identity `(1, 0, ..., 0)`.
    pub fn identity(dim: usize, depth: usize) -> Self {
        assert!(dim >= 1 && depth >= 1, "dim and depth must be >= 1");
        let levels = (1..=depth).map(|k| vec![0.0; dim.pow(k as u32)]).collect();
        TruncatedTensor { dim, levels }
    }

    /// Builds an element from explicit level blocks (level 1 first).
    pub fn from_levels(dim: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        if dim < 1 || levels.is_empty() {
            return Err(invalid("tensor needs dim >= 1 and depth >= 1"));
        }
        for (i, block) in levels.iter().enumerate() {
            let want = dim.pow(i as u32 + 1);
            if block.len() != want {
                return Err(invalid(format!(
                    "level {} block has {} entries, expected {}",
                    i + 1,
                    block.len(),
                    want
                )));
            }
            if block.iter().any(|x| !x.is_finite()) {
                return Err(invalid(format!("level {} block has non-finite entries", i + 1)));
            }
        }
        Ok(TruncatedTensor { dim, levels })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Coefficient block of level `k` (1-based).
    pub fn level(&self, k: usize) -> &[f64] {
        &self.levels[k - 1]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.levels[k - 1]
    }

    /// Group product `self (x) rhs`, truncated at the stored depth.
    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        if self.dim != rhs.dim || self.depth() != rhs.depth() {
            return Err(invalid(format!(
                "tensor product needs matching shape: ({}, {}) vs ({}, {})",
                self.dim,
                self.depth(),
                rhs.dim,
                rhs.dim
            )));
        }
        let mut out = TruncatedTensor::identity(self.dim, self.depth());
        mul_into(&mut out.levels, &self.levels, &rhs.levels, self.dim);
        Ok(out)
    }

    /// Group inverse via the alternating sum of tensor powers of `g - 1`.
    pub fn inv(&self) -> Self {
        let n = self.depth();
        let mut out = TruncatedTensor::identity(self.dim, n);
        // power = (g - 1)^(x)j, lowest non-zero level is j.
        let mut power = self.levels.clone();
        let mut sign = -1.0;
        for _ in 1..=n {
            for (dst, src) in out.levels.iter_mut().zip(power.iter()) {
                for (d, s) in dst.iter_mut().zip(src.iter()) {
                    *d += sign * s;
                }
            }
            power = conv_no_scalar(&power, &self.levels, self.dim);
            sign = -sign;
        }
        out
    }

    /// Homogeneous norm `sum_k |pi_k(g)|^(1/k)` (Frobenius norm per level).
    pub fn hnorm(&self) -> f64 {
        self.levels
            .iter()
            .enumerate()
            .map(|(i, block)| {
                let sq: f64 = block.iter().map(|x| x * x).sum();
                sq.sqrt().powf(1.0 / (i as f64 + 1.0))
            })
            .sum()
    }

    /// Dilation: level `k` scaled by `c^k`.
    pub fn dilate(&self, c: f64) -> Self {
        let mut out = self.clone();
        let mut factor = 1.0;
        for block in out.levels.iter_mut() {
            factor *= c;
            for x in block.iter_mut() {
                *x *= factor;
            }
        }
        out
    }

    /// Tensor exponential of an algebra element with the given level blocks
    /// (missing levels are zero), truncated at `depth`.
    pub fn exp(dim: usize, depth: usize, log_levels: &[Vec<f64>]) -> Result<Self> {
        let mut arg: Vec<Vec<f64>> = (1..=depth).map(|k| vec![0.0; dim.pow(k as u32)]).collect();
        for (i, block) in log_levels.iter().enumerate() {
            if i >= depth {
                break;
            }
            if block.len() != arg[i].len() {
                return Err(invalid(format!(
                    "exp argument level {} has {} entries, expected {}",
                    i + 1,
                    block.len(),
                    arg[i].len()
                )));
            }
            arg[i].copy_from_slice(block);
        }
        let mut out = TruncatedTensor::identity(dim, depth);
        let mut term = arg.clone();
        for j in 1..=depth {
            let scale = 1.0 / factorial(j);
            for (dst, src) in out.levels.iter_mut().zip(term.iter()) {
                for (d, s) in dst.iter_mut().zip(src.iter()) {
                    *d += scale * s;
                }
            }
            if j < depth {
                term = conv_no_scalar(&term, &arg, dim);
            }
        }
        Ok(out)
    }

    /// Group logarithm of a depth-2 element: `(pi_1, pi_2 - pi_1 (x) pi_1 / 2)`.
    pub fn log2(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.depth() != 2 {
            return Err(invalid("log2 needs a depth-2 element"));
        }
        let d = self.dim;
        let l1 = self.levels[0].clone();
        let mut l2 = self.levels[1].clone();
        for i in 0..d {
            for j in 0..d {
                l2[i * d + j] -= 0.5 * l1[i] * l1[j];
            }
        }
        Ok((l1, l2))
    }

    /// Truncates or zero-extends to `depth` levels.
    pub fn with_depth(&self, depth: usize) -> Self {
        let mut levels: Vec<Vec<f64>> = self.levels.iter().take(depth).cloned().collect();
        for k in levels.len() + 1..=depth {
            levels.push(vec![0.0; self.dim.pow(k as u32)]);
        }
        TruncatedTensor { dim: self.dim, levels }
    }

    /// In-place right-multiplication by the step exponential
    /// `exp(dy + q)` for depth-1 and depth-2 elements (`q` a level-2
    /// block). Allocation-free hot path of the solvers; higher depths go
    /// through [`TruncatedTensor::exp`].
    pub(crate) fn mul_assign_step2(&mut self, dy: &[f64], q: &[f64]) {
        let d = self.dim;
        debug_assert!(self.depth() <= 2 && dy.len() == d);
        if self.depth() == 2 {
            // level 2 of the step: dy (x) dy / 2 + q
            let (head, tail) = self.levels.split_at_mut(1);
            let l1 = &head[0];
            let l2 = &mut tail[0];
            for a in 0..d {
                for b in 0..d {
                    l2[a * d + b] += 0.5 * dy[a] * dy[b] + q[a * d + b] + l1[a] * dy[b];
                }
            }
        }
        for (x, v) in self.levels[0].iter_mut().zip(dy.iter()) {
            *x += v;
        }
    }

    /// Entrywise max absolute difference across all levels.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.levels
            .iter()
            .zip(other.levels.iter())
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dim == other.dim && self.depth() == other.depth() && self.max_abs_diff(other) <= tol
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.levels.iter().flatten().all(|x| x.abs() <= tol)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `out += g (x) h` restricted to the bilinear cross terms (level-0 parts of
/// both factors treated as zero), plus the `j = 0` / `j = k` terms.
fn mul_into(out: &mut [Vec<f64>], g: &[Vec<f64>], h: &[Vec<f64>], dim: usize) {
    let n = out.len();
    for k in 1..=n {
        let block = &mut out[k - 1];
        for (d, s) in block.iter_mut().zip(g[k - 1].iter()) {
            *d += s;
        }
        for (d, s) in block.iter_mut().zip(h[k - 1].iter()) {
            *d += s;
        }
        for j in 1..k {
            let a = &g[j - 1];
            let b = &h[k - j - 1];
            let bn = dim.pow((k - j) as u32);
            for (ia, &va) in a.iter().enumerate() {
                if va == 0.0 {
                    continue;
                }
                let base = ia * bn;
                for (ib, &vb) in b.iter().enumerate() {
                    block[base + ib] += va * vb;
                }
            }
        }
    }
}

/// Convolution of two scalar-free algebra elements: level `m` of `u (x) v` is
/// `sum_{i=1}^{m-1} u_i (x) v_{m-i}`.
fn conv_no_scalar(u: &[Vec<f64>], v: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let n = u.len();
    let mut out: Vec<Vec<f64>> = (1..=n).map(|k| vec![0.0; dim.pow(k as u32)]).collect();
    for m in 2..=n {
        let block = &mut out[m - 1];
        for i in 1..m {
            let a = &u[i - 1];
            let b = &v[m - i - 1];
            let bn = dim.pow((m - i) as u32);
            for (ia, &va) in a.iter().enumerate() {
                if va == 0.0 {
                    continue;
                }
                let base = ia * bn;
                for (ib, &vb) in b.iter().enumerate() {
                    block[base + ib] += va * vb;
                }
            }
        }
    }
    out
}

/// Splitting of a depth-2 group value into its weakly geometric part and the
/// symmetric drift that remains.
#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Weakly geometric part: `1 + pi_1 + Anti(pi_2) + pi_1^(x)2 / 2`.
    pub geometric: TruncatedTensor,
    /// Symmetric drift `Sym(pi_2) - pi_1^(x)2 / 2`, a `d x d` block (row-major).
    pub drift: Vec<f64>,
}

/// Splits a depth-2 group element into geometric part and symmetric drift.
pub fn decompose_geo_drift(g: &TruncatedTensor) -> Result<Decomposition> {
    if g.depth() != 2 {
        return Err(invalid("decompose_geo_drift needs a depth-2 element"));
    }
    let d = g.dim();
    let a = g.level(1);
    let b = g.level(2);
    let mut geo2 = vec![0.0; d * d];
    let mut drift = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let anti = 0.5 * (b[i * d + j] - b[j * d + i]);
            let sym = 0.5 * (b[i * d + j] + b[j * d + i]);
            let half_sq = 0.5 * a[i] * a[j];
            geo2[i * d + j] = anti + half_sq;
            drift[i * d + j] = sym - half_sq;
        }
    }
    let geometric = TruncatedTensor::from_levels(d, vec![a.to_vec(), geo2])?;
    Ok(Decomposition { geometric, drift })
}

impl Decomposition {
    /// Rebuilds the original element: `pi_2 = Anti(pi_2(geo)) + drift + pi_1^(x)2 / 2`.
    pub fn recombine(&self) -> TruncatedTensor {
        let d = self.geometric.dim();
        let a = self.geometric.level(1);
        let g2 = self.geometric.level(2);
        let mut b = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let anti = 0.5 * (g2[i * d + j] - g2[j * d + i]);
                b[i * d + j] = anti + self.drift[i * d + j] + 0.5 * a[i] * a[j];
            }
        }
        TruncatedTensor::from_levels(d, vec![a.to_vec(), b]).expect("shape preserved")
    }
}

/// Symmetric part of a `d x d` block.
pub fn sym_part(m: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = 0.5 * (m[i * d + j] + m[j * d + i]);
        }
    }
    out
}

/// Antisymmetric part of a `d x d` block.
pub fn anti_part(m: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = 0.5 * (m[i * d + j] - m[j * d + i]);
        }
    }
    out
}

/// `out += scale * u (x) v` for vectors `u`, `v`.
pub fn outer_into(out: &mut [f64], u: &[f64], v: &[f64], scale: f64) {
    let dv = v.len();
    for (i, &ui) in u.iter().enumerate() {
        let base = i * dv;
        for (j, &vj) in v.iter().enumerate() {
            out[base + j] += scale * ui * vj;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand::rngs::StdRng;

    fn random_group(dim: usize, depth: usize, rng: &mut StdRng) -> TruncatedTensor {
        let levels = (1..=depth)
            .map(|k| (0..dim.pow(k as u32)).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        TruncatedTensor::from_levels(dim, levels).unwrap()
    }

    #[test]
    fn product_1d_depth2() {
        let g = TruncatedTensor::from_levels(1, vec![vec![2.0], vec![3.0]]).unwrap();
        let h = TruncatedTensor::from_levels(1, vec![vec![5.0], vec![7.0]]).unwrap();
        let gh = g.mul(&h).unwrap();
        assert_eq!(gh.level(1), &[7.0]);
        assert_eq!(gh.level(2), &[20.0]);
    }

    #[test]
    fn product_with_identity() {
        let mut rng = StdRng::seed_from_u64(7);
        let g = random_group(3, 4, &mut rng);
        let id = TruncatedTensor::identity(3, 4);
        assert!(g.mul(&id).unwrap().approx_eq(&g, 0.0));
        assert!(id.mul(&g).unwrap().approx_eq(&g, 0.0));
    }

    #[test]
    fn product_of_segment_exponentials() {
        // exp(e1) (x) exp(e2) at depth 2: level 2 = e1e1/2 + e2e2/2 + e1 (x) e2.
        let e1 = TruncatedTensor::exp(2, 2, &[vec![1.0, 0.0]]).unwrap();
        let e2 = TruncatedTensor::exp(2, 2, &[vec![0.0, 1.0]]).unwrap();
        let prod = e1.mul(&e2).unwrap();
        assert_eq!(prod.level(1), &[1.0, 1.0]);
        let want = [0.5, 1.0, 0.0, 0.5];
        for (a, b) in prod.level(2).iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn inverse_1d_depth2() {
        let g = TruncatedTensor::from_levels(1, vec![vec![2.0], vec![3.0]]).unwrap();
        let inv = g.inv();
        assert_eq!(inv.level(1), &[-2.0]);
        assert_eq!(inv.level(2), &[1.0]);
        assert!(g.mul(&inv).unwrap().is_identity(1e-14));
    }

    #[test]
    fn inverse_of_identity() {
        let id = TruncatedTensor::identity(2, 3);
        assert!(id.inv().approx_eq(&id, 0.0));
    }

    #[test]
    fn inverse_random_depth4() {
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..20 {
            let g = random_group(2, 4, &mut rng);
            assert!(g.mul(&g.inv()).unwrap().is_identity(1e-12));
            assert!(g.inv().mul(&g).unwrap().is_identity(1e-12));
        }
    }

    #[test]
    fn associativity_random_depth4() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..20 {
            let g = random_group(2, 4, &mut rng);
            let h = random_group(2, 4, &mut rng);
            let k = random_group(2, 4, &mut rng);
            let left = g.mul(&h).unwrap().mul(&k).unwrap();
            let right = g.mul(&h.mul(&k).unwrap()).unwrap();
            assert!(left.approx_eq(&right, 1e-12));
        }
    }

    #[test]
    fn homogeneous_norm_examples() {
        // |v| = 5 on level 1, |A| = 4 on level 2 -> 5 + 2.
        let g = TruncatedTensor::from_levels(2, vec![vec![3.0, 4.0], vec![4.0, 0.0, 0.0, 0.0]])
            .unwrap();
        assert!((g.hnorm() - 7.0).abs() < 1e-14);
        assert_eq!(TruncatedTensor::identity(2, 2).hnorm(), 0.0);
        let h = TruncatedTensor::from_levels(2, vec![vec![0.0, 0.0], vec![9.0, 0.0, 0.0, 0.0]])
            .unwrap();
        assert!((h.hnorm() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn norm_zero_iff_identity() {
        let mut rng = StdRng::seed_from_u64(11);
        let g = random_group(3, 3, &mut rng);
        assert!(g.hnorm() > 0.0);
        assert_eq!(TruncatedTensor::identity(3, 3).hnorm(), 0.0);
    }

    #[test]
    fn dilation_is_homogeneous() {
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..10 {
            let g = random_group(2, 3, &mut rng);
            let c = rng.random_range(0.1..3.0);
            assert!((g.dilate(c).hnorm() - c * g.hnorm()).abs() < 1e-12 * (1.0 + g.hnorm()));
        }
    }

    #[test]
    fn decomposition_pure_drift() {
        // (1, 0, -Q/2) with Q symmetric: geometric = identity, drift = -Q/2.
        let q = [2.0, 0.5, 0.5, 1.0];
        let level2: Vec<f64> = q.iter().map(|x| -0.5 * x).collect();
        let g = TruncatedTensor::from_levels(2, vec![vec![0.0, 0.0], level2.clone()]).unwrap();
        let dec = decompose_geo_drift(&g).unwrap();
        assert!(dec.geometric.is_identity(1e-15));
        for (a, b) in dec.drift.iter().zip(level2.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn decomposition_geometric_input_has_zero_drift() {
        let v = vec![0.3, -1.2];
        let mut l2 = vec![0.7, 0.0, 0.0, -0.4]; // antisymmetric part will be added next
        l2[1] += 0.9;
        l2[2] -= 0.9;
        // force Sym(pi_2) = v (x) v / 2
        let mut sym = vec![0.0; 4];
        outer_into(&mut sym, &v, &v, 0.5);
        let anti = anti_part(&l2, 2);
        let level2: Vec<f64> = sym.iter().zip(anti.iter()).map(|(s, a)| s + a).collect();
        let g = TruncatedTensor::from_levels(2, vec![v, level2]).unwrap();
        let dec = decompose_geo_drift(&g).unwrap();
        assert!(dec.drift.iter().all(|x| x.abs() < 1e-15));
        assert!(dec.recombine().approx_eq(&g, 1e-15));
    }

    #[test]
    fn decomposition_round_trip_random() {
        let mut rng = StdRng::seed_from_u64(29);
        for _ in 0..50 {
            let g = random_group(3, 2, &mut rng);
            let dec = decompose_geo_drift(&g).unwrap();
            assert!(dec.recombine().approx_eq(&g, 1e-12));
            // drift block is symmetric
            for i in 0..3 {
                for j in 0..3 {
                    assert!((dec.drift[i * 3 + j] - dec.drift[j * 3 + i]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn decompose_rejects_wrong_depth() {
        let g = TruncatedTensor::identity(2, 3);
        assert!(decompose_geo_drift(&g).is_err());
    }

    #[test]
    fn mul_rejects_shape_mismatch() {
        let g = TruncatedTensor::identity(2, 2);
        let h = TruncatedTensor::identity(3, 2);
        assert!(g.mul(&h).is_err());
    }

    #[test]
    fn exp_of_level2_lie_element_truncates() {
        // exp of a pure area element has no level-3 part.
        let area = vec![0.0, 0.8, -0.8, 0.0];
        let g = TruncatedTensor::exp(2, 3, &[vec![0.0, 0.0], area]).unwrap();
        assert!(g.level(3).iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn geometric_increments_stay_geometric() {
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..20 {
            let g = random_group(2, 2, &mut rng);
            let h = random_group(2, 2, &mut rng);
            let gs = decompose_geo_drift(&g).unwrap().geometric;
            let hs = decompose_geo_drift(&h).unwrap().geometric;
            let inc = gs.inv().mul(&hs).unwrap();
            let d = decompose_geo_drift(&inc).unwrap();
            assert!(d.drift.iter().all(|x| x.abs() < 1e-12));
        }
    }
}
