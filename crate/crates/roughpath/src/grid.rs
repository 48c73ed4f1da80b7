//! Paths sampled on a strictly increasing time grid, and sub-grids of them.

use crate::error::{invalid, mismatch, Result};

/// An `R^d`-valued path sampled at `N + 1` grid times.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    times: Vec<f64>,
    dim: usize,
    values: Vec<f64>, // (N + 1) x dim, row-major
}

impl GridPath {
    pub fn new(times: Vec<f64>, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim < 1 {
            return Err(invalid("path dimension must be >= 1"));
        }
        if times.len() < 1 {
            return Err(invalid("path needs at least one grid point"));
        }
        if values.len() != times.len() * dim {
            return Err(invalid(format!(
                "value storage has {} entries, expected {}",
                values.len(),
                times.len() * dim
            )));
        }
        if !times.windows(2).all(|w| w[0] < w[1]) {
            return Err(invalid("grid times must be strictly increasing"));
        }
        if times.iter().chain(values.iter()).any(|x| !x.is_finite()) {
            return Err(invalid("grid times and values must be finite"));
        }
        Ok(GridPath { times, dim, values })
    }

    /// Constant-zero path on the given grid.
    pub fn zeros(times: Vec<f64>, dim: usize) -> Result<Self> {
        let n = times.len();
        GridPath::new(times, dim, vec![0.0; n * dim])
    }

    /// Samples `f(t)` on a uniform grid of `steps` intervals over `[0, t_max]`.
    pub fn sample_fn(t_max: f64, steps: usize, dim: usize, f: impl Fn(f64, &mut [f64])) -> Result<Self> {
        if steps < 1 || t_max <= 0.0 {
            return Err(invalid("sample_fn needs steps >= 1 and t_max > 0"));
        }
        let times: Vec<f64> = (0..=steps).map(|i| t_max * i as f64 / steps as f64).collect();
        let mut values = vec![0.0; (steps + 1) * dim];
        for (i, &t) in times.iter().enumerate() {
            f(t, &mut values[i * dim..(i + 1) * dim]);
        }
        GridPath::new(times, dim, values)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn last(&self) -> &[f64] {
        self.value(self.len() - 1)
    }

    /// Applies `f` pointwise, producing an `out_dim`-dimensional path.
    pub fn map(&self, out_dim: usize, f: impl Fn(&[f64], &mut [f64])) -> Result<Self> {
        let mut values = vec![0.0; self.len() * out_dim];
        for i in 0..self.len() {
            f(self.value(i), &mut values[i * out_dim..(i + 1) * out_dim]);
        }
        GridPath::new(self.times.clone(), out_dim, values)
    }

    /// Chord interpolation pinned at the partition points, evaluated on the
    /// full grid: within each partition interval the values run linearly
    /// between the endpoint samples.
    pub fn chord(&self, partition: &Partition) -> Result<Self> {
        partition.check_against(self.len())?;
        let mut values = vec![0.0; self.values.len()];
        for w in partition.indices().windows(2) {
            let (a, b) = (w[0], w[1]);
            let (ta, tb) = (self.times[a], self.times[b]);
            for i in a..=b {
                let lambda = (self.times[i] - ta) / (tb - ta);
                for c in 0..self.dim {
                    values[i * self.dim + c] = self.values[a * self.dim + c]
                        + lambda * (self.values[b * self.dim + c] - self.values[a * self.dim + c]);
                }
            }
        }
        GridPath::new(self.times.clone(), self.dim, values)
    }

    /// Restriction to the partition points.
    pub fn restrict(&self, partition: &Partition) -> Result<Self> {
        partition.check_against(self.len())?;
        let times = partition.indices().iter().map(|&i| self.times[i]).collect();
        let mut values = Vec::with_capacity(partition.len() * self.dim);
        for &i in partition.indices() {
            values.extend_from_slice(self.value(i));
        }
        GridPath::new(times, self.dim, values)
    }

    pub fn same_grid(&self, other: &GridPath) -> bool {
        self.times == other.times
    }
}

/// Checks that two grids agree exactly.
pub fn require_same_grid(a: &[f64], b: &[f64], what: &str) -> Result<()> {
    if a != b {
        return Err(mismatch(format!("{what}: time grids differ")));
    }
    Ok(())
}

/// A sub-grid of a sampled path's grid, stored as indices into it. Always
/// contains the first and last grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    indices: Vec<usize>,
}

impl Partition {
    pub fn from_indices(indices: Vec<usize>, n_points: usize) -> Result<Self> {
        if indices.len() < 2 {
            return Err(invalid("partition needs at least two points"));
        }
        if indices[0] != 0 || *indices.last().unwrap() != n_points - 1 {
            return Err(invalid("partition must contain the first and last grid point"));
        }
        if !indices.windows(2).all(|w| w[0] < w[1]) {
            return Err(invalid("partition indices must be strictly increasing"));
        }
        Ok(Partition { indices })
    }

    /// The full grid as a partition.
    pub fn full(n_points: usize) -> Self {
        Partition { indices: (0..n_points).collect() }
    }

    /// Dyadic partition with `2^m` intervals; the number of grid intervals
    /// must be divisible by `2^m`.
    pub fn dyadic(n_points: usize, m: u32) -> Result<Self> {
        let intervals = n_points - 1;
        let pieces = 1usize << m;
        if intervals % pieces != 0 {
            return Err(invalid(format!(
                "{intervals} grid intervals cannot be split into 2^{m} dyadic pieces"
            )));
        }
        let stride = intervals / pieces;
        Ok(Partition { indices: (0..=pieces).map(|k| k * stride).collect() })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n_intervals(&self) -> usize {
        self.indices.len() - 1
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub(crate) fn check_against(&self, n_points: usize) -> Result<()> {
        if *self.indices.last().unwrap() != n_points - 1 {
            return Err(mismatch(format!(
                "partition ends at index {} but the grid has {} points",
                self.indices.last().unwrap(),
                n_points
            )));
        }
        Ok(())
    }
}
