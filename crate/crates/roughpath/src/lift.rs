//! Simulation of Brownian motion and martingales `M = int phi dB`, their
//! left-point (Ito) and trapezoid (Stratonovich) level-2 lifts, quadratic
//! variation grids and piecewise-linear approximations of both, and the
//! perturbation of a fixed rough path by an independent martingale.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, mismatch, Result};
use crate::grid::{require_same_grid, GridPath, Partition};
use crate::rng::substream;
use crate::sig::RoughPathGrid;
use crate::tensor::{outer_into, TruncatedTensor};

/// Grid path of symmetric `d x d` matrices: the quadratic variation of a
/// sampled martingale, starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketGrid {
    times: Vec<f64>,
    dim: usize,
    values: Vec<f64>, // (N + 1) x d^2, row-major matrices
}

impl BracketGrid {
    pub fn new(times: Vec<f64>, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != times.len() * dim * dim {
            return Err(invalid("bracket storage size does not match grid"));
        }
        if !times.windows(2).all(|w| w[0] < w[1]) {
            return Err(invalid("bracket grid times must be strictly increasing"));
        }
        for (i, m) in values.chunks_exact(dim * dim).enumerate() {
            for r in 0..dim {
                for c in 0..dim {
                    if (m[r * dim + c] - m[c * dim + r]).abs() > 1e-12 {
                        return Err(invalid(format!("bracket value {i} is not symmetric")));
                    }
                }
            }
        }
        Ok(BracketGrid { times, dim, values })
    }

    pub fn zeros(times: Vec<f64>, dim: usize) -> Result<Self> {
        let n = times.len();
        BracketGrid::new(times, dim, vec![0.0; n * dim * dim])
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

    /// Matrix value at grid point `i`, row-major.
    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim * self.dim..(i + 1) * self.dim * self.dim]
    }

    /// Flattened view, one `d x d` row per time.
    pub fn as_grid_path(&self) -> GridPath {
        GridPath::new(self.times.clone(), self.dim * self.dim, self.values.clone())
            .expect("valid by construction")
    }
}

/// Deterministic integrand, seed and replica count for a simulated
/// martingale `M = int phi dB`. Grid paths only hold finite entries, so
/// the integrand is square-integrable over the grid by construction.
#[derive(Debug, Clone)]
pub struct NoiseSpec {
    /// `d x d` matrix path, stored row-major as a `d^2`-dimensional grid path.
    pub phi: GridPath,
    pub seed: u64,
    pub paths: usize,
}

impl NoiseSpec {
    pub fn new(phi: GridPath, seed: u64, paths: usize) -> Result<Self> {
        let d2 = phi.dim();
        let d = (d2 as f64).sqrt().round() as usize;
        if d * d != d2 {
            return Err(invalid("noise integrand must be a square-matrix path"));
        }
        if paths < 1 {
            return Err(invalid("noise spec needs at least one path"));
        }
        Ok(NoiseSpec { phi, seed, paths })
    }

    pub fn matrix_dim(&self) -> usize {
        (self.phi.dim() as f64).sqrt().round() as usize
    }

    /// Constant integrand `scale * I` on the given grid.
    pub fn constant_identity(times: Vec<f64>, d: usize, scale: f64, seed: u64, paths: usize) -> Result<Self> {
        let n = times.len();
        let mut values = vec![0.0; n * d * d];
        for i in 0..n {
            for c in 0..d {
                values[i * d * d + c * d + c] = scale;
            }
        }
        NoiseSpec::new(GridPath::new(times, d * d, values)?, seed, paths)
    }
}

/// Independent Gaussian increments with variance `t_{i+1} - t_i` per
/// coordinate; deterministic given the seed.
pub fn sample_brownian(times: &[f64], dim: usize, seed: u64) -> Result<GridPath> {
    sample_brownian_stream(times, dim, seed, &[])
}

/// Brownian sample in the substream identified by `ids` (replica index,
/// interval index, ...).
pub fn sample_brownian_stream(times: &[f64], dim: usize, seed: u64, ids: &[u64]) -> Result<GridPath> {
    if times.len() < 2 {
        return Err(invalid("brownian sample needs at least two grid points"));
    }
    let mut rng = substream(seed, ids);
    let mut values = vec![0.0; times.len() * dim];
    for i in 1..times.len() {
        let sdt = (times[i] - times[i - 1]).sqrt();
        for c in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            values[i * dim + c] = values[(i - 1) * dim + c] + sdt * z;
        }
    }
    GridPath::new(times.to_vec(), dim, values)
}

/// Left-point Ito sums `M_{i+1} = M_i + phi(t_i) (B_{i+1} - B_i)`, `M_0 = 0`.
pub fn martingale_path(phi: &GridPath, brownian: &GridPath) -> Result<GridPath> {
    require_same_grid(phi.times(), brownian.times(), "martingale integrand vs driver")?;
    let d = brownian.dim();
    if phi.dim() != d * d {
        return Err(mismatch("integrand must be a d x d matrix path over the driver"));
    }
    let n = brownian.len();
    let mut values = vec![0.0; n * d];
    for i in 0..n - 1 {
        let m = phi.value(i);
        let (b0, b1) = (brownian.value(i), brownian.value(i + 1));
        for r in 0..d {
            let mut acc = values[i * d + r];
            for c in 0..d {
                acc += m[r * d + c] * (b1[c] - b0[c]);
            }
            values[(i + 1) * d + r] = acc;
        }
    }
    GridPath::new(brownian.times().to_vec(), d, values)
}

/// Samples the martingale described by `spec` on the given grid.
pub fn martingale_from_phi(spec: &NoiseSpec, times: &[f64]) -> Result<GridPath> {
    require_same_grid(spec.phi.times(), times, "noise integrand vs requested grid")?;
    let d = spec.matrix_dim();
    let b = sample_brownian(times, d, spec.seed)?;
    martingale_path(&spec.phi, &b)
}

/// Level-2 lift by left-point sums on the path's own grid:
/// level 2 at `t_j` is `sum_{i<j} (Z_i - Z_0) (x) (Z_{i+1} - Z_i)`.
pub fn ito_lift(z: &GridPath) -> Result<RoughPathGrid> {
    lift_with(z, LiftRule::LeftPoint)
}

/// Level-2 lift by trapezoid sums; identical to the depth-2 signature of the
/// sample polygon.
pub fn strat_lift(z: &GridPath) -> Result<RoughPathGrid> {
    lift_with(z, LiftRule::Trapezoid)
}

enum LiftRule {
    LeftPoint,
    Trapezoid,
}

fn lift_with(z: &GridPath, rule: LiftRule) -> Result<RoughPathGrid> {
    if z.len() < 2 {
        return Err(invalid("level-2 lift needs at least two grid points"));
    }
    let d = z.dim();
    let z0 = z.value(0).to_vec();
    let mut elements = Vec::with_capacity(z.len());
    elements.push(TruncatedTensor::identity(d, 2));
    let mut level2 = vec![0.0; d * d];
    let mut a = vec![0.0; d];
    let mut inc = vec![0.0; d];
    let mut mid = vec![0.0; d];
    for i in 0..z.len() - 1 {
        let (zi, zj) = (z.value(i), z.value(i + 1));
        for c in 0..d {
            inc[c] = zj[c] - zi[c];
            mid[c] = match rule {
                LiftRule::LeftPoint => zi[c] - z0[c],
                LiftRule::Trapezoid => 0.5 * (zi[c] + zj[c]) - z0[c],
            };
            a[c] = zj[c] - z0[c];
        }
        outer_into(&mut level2, &mid, &inc, 1.0);
        elements.push(TruncatedTensor::from_levels(d, vec![a.clone(), level2.clone()])?);
    }
    RoughPathGrid::new(z.times().to_vec(), elements)
}

/// Piecewise-linear quadratic-variation approximation along the partition:
/// within each partition interval the value interpolates linearly towards
/// the added squared increment. Evaluated on the full grid of `z`.
pub fn bracket_pl(z: &GridPath, partition: &Partition) -> Result<BracketGrid> {
    partition.check_against(z.len())?;
    let d = z.dim();
    let n = z.len();
    let mut values = vec![0.0; n * d * d];
    let mut acc = vec![0.0; d * d];
    let mut sq = vec![0.0; d * d];
    let mut inc = vec![0.0; d];
    for w in partition.indices().windows(2) {
        let (a, b) = (w[0], w[1]);
        let (za, zb) = (z.value(a), z.value(b));
        for c in 0..d {
            inc[c] = zb[c] - za[c];
        }
        sq.iter_mut().for_each(|x| *x = 0.0);
        outer_into(&mut sq, &inc, &inc, 1.0);
        let (ta, tb) = (z.times()[a], z.times()[b]);
        for i in a..=b {
            let lambda = (z.times()[i] - ta) / (tb - ta);
            for k in 0..d * d {
                values[i * d * d + k] = acc[k] + lambda * sq[k];
            }
        }
        for k in 0..d * d {
            acc[k] += sq[k];
        }
    }
    BracketGrid::new(z.times().to_vec(), d, values)
}

/// Bracket approximation on the path's own full grid (the reference
/// "fine-grid" bracket).
pub fn bracket_fine(z: &GridPath) -> Result<BracketGrid> {
    bracket_pl(z, &Partition::full(z.len()))
}

/// Ito lift of the chord interpolation along `partition`: the depth-2
/// polygon signature of the interpolated path, with half the interpolated
/// bracket removed from the symmetric level-2 block.
pub fn pl_ito_lift(z: &GridPath, partition: &Partition) -> Result<RoughPathGrid> {
    let chord = z.chord(partition)?;
    let geo = strat_lift(&chord)?;
    let bracket = bracket_pl(z, partition)?;
    shift_level2(&geo, &bracket, -1.0)
}

/// Shifts the level-2 block by `sign * Q_t / 2` at every grid time; level 1
/// is unchanged.
pub fn shift_level2(gamma: &RoughPathGrid, q: &BracketGrid, sign: f64) -> Result<RoughPathGrid> {
    require_same_grid(gamma.times(), q.times(), "level-2 shift")?;
    let d = gamma.dim();
    if q.dim() != d {
        return Err(mismatch("bracket dimension does not match rough path"));
    }
    let mut elements = Vec::with_capacity(gamma.len());
    for i in 0..gamma.len() {
        let e = gamma.element(i);
        let mut level2 = e.level(2).to_vec();
        for (x, b) in level2.iter_mut().zip(q.value(i).iter()) {
            *x += 0.5 * sign * b;
        }
        elements.push(TruncatedTensor::from_levels(d, vec![e.level(1).to_vec(), level2])?);
    }
    RoughPathGrid::new(gamma.times().to_vec(), elements)
}

/// How the cross integrals of a perturbed rough path are discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CrossRule {
    /// Trapezoid sums (Stratonovich reading of the cross integrals).
    #[default]
    Trapezoid,
    /// Left-point sums (Ito reading). Both have zero expectation for a
    /// fixed base path and a martingale perturbation.
    LeftPoint,
}

/// A fixed rough path perturbed by an independent martingale: level 1 gains
/// `M`, level 2 gains the Stratonovich double integral of `M` plus the
/// cross integrals between the base and the noise.
#[derive(Debug, Clone)]
pub struct PerturbedLift {
    pub base: RoughPathGrid,
    pub noise_sig: RoughPathGrid,
    /// Cross term `int a (x) dM + int M (x) da` accumulated from 0, one
    /// `d x d` block per grid time.
    pub cross: GridPath,
    pub combined: RoughPathGrid,
}

/// Assembles the perturbed lift of `gamma` by the martingale path `m`.
pub fn perturbed_lift(gamma: &RoughPathGrid, m: &GridPath, rule: CrossRule) -> Result<PerturbedLift> {
    require_same_grid(gamma.times(), m.times(), "perturbed lift")?;
    let d = gamma.dim();
    if m.dim() != d {
        return Err(mismatch("noise dimension does not match rough path"));
    }
    let n = gamma.len();
    let noise_sig = strat_lift(m)?;

    let mut cross_vals = vec![0.0; n * d * d];
    let mut acc = vec![0.0; d * d];
    let mut elements = Vec::with_capacity(n);
    elements.push(TruncatedTensor::identity(d, 2));
    let m0 = m.value(0).to_vec();
    let mut da = vec![0.0; d];
    let mut dm = vec![0.0; d];
    let mut am = vec![0.0; d];
    let mut mm = vec![0.0; d];
    for i in 0..n - 1 {
        let (a0, a1) = (gamma.element(i).level(1), gamma.element(i + 1).level(1));
        let (mi, mj) = (m.value(i), m.value(i + 1));
        for c in 0..d {
            da[c] = a1[c] - a0[c];
            dm[c] = mj[c] - mi[c];
            match rule {
                CrossRule::Trapezoid => {
                    am[c] = 0.5 * (a0[c] + a1[c]);
                    mm[c] = 0.5 * (mi[c] + mj[c]) - m0[c];
                }
                CrossRule::LeftPoint => {
                    am[c] = a0[c];
                    mm[c] = mi[c] - m0[c];
                }
            }
        }
        outer_into(&mut acc, &am, &dm, 1.0);
        outer_into(&mut acc, &mm, &da, 1.0);
        cross_vals[(i + 1) * d * d..(i + 2) * d * d].copy_from_slice(&acc);

        let mut level1 = vec![0.0; d];
        let mut level2 = vec![0.0; d * d];
        for c in 0..d {
            level1[c] = a1[c] + mj[c] - m0[c];
        }
        for k in 0..d * d {
            level2[k] = gamma.element(i + 1).level(2)[k] + noise_sig.element(i + 1).level(2)[k]
                + acc[k];
        }
        elements.push(TruncatedTensor::from_levels(d, vec![level1, level2])?);
    }
    let combined = RoughPathGrid::new(gamma.times().to_vec(), elements)?;
    Ok(PerturbedLift {
        base: gamma.clone(),
        noise_sig,
        cross: GridPath::new(gamma.times().to_vec(), d * d, cross_vals)?,
        combined,
    })
}

/// Symmetric PSD square root of a `d x d` matrix, negative eigenvalues from
/// round-off clipped to zero.
pub fn psd_sqrt(mat: &[f64], d: usize) -> Vec<f64> {
    let m = DMatrix::from_row_slice(d, d, mat);
    let sym = (&m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut out = DMatrix::zeros(d, d);
    for k in 0..d {
        let lam = eig.eigenvalues[k].max(0.0).sqrt();
        let v = eig.eigenvectors.column(k);
        for r in 0..d {
            for c in 0..d {
                out[(r, c)] += lam * v[r] * v[c];
            }
        }
    }
    out.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect()
}

/// Quadratic variation of the martingale `int phi dB`: per-step increments
/// `phi(t_i) phi(t_i)^T (t_{i+1} - t_i)`.
pub fn bracket_of_phi(phi: &GridPath) -> Result<BracketGrid> {
    let d2 = phi.dim();
    let d = (d2 as f64).sqrt().round() as usize;
    if d * d != d2 {
        return Err(invalid("integrand must be a square-matrix path"));
    }
    let n = phi.len();
    let mut values = vec![0.0; n * d2];
    for i in 0..n - 1 {
        let dt = phi.times()[i + 1] - phi.times()[i];
        let m = phi.value(i);
        for r in 0..d {
            for c in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += m[r * d + k] * m[c * d + k];
                }
                values[(i + 1) * d2 + r * d + c] = values[i * d2 + r * d + c] + acc * dt;
            }
        }
    }
    BracketGrid::new(phi.times().to_vec(), d, values)
}

/// Square-root integrand for a bracket grid: per grid step, the symmetric
/// PSD square root of (bracket increment / dt), held constant on the step.
/// The final grid point repeats the last step's value (left-point use only).
pub fn psi_from_bracket(bracket: &BracketGrid) -> Result<GridPath> {
    let d = bracket.dim();
    let n = bracket.len();
    if n < 2 {
        return Err(invalid("bracket grid needs at least two points"));
    }
    let mut values = vec![0.0; n * d * d];
    let mut inc = vec![0.0; d * d];
    for i in 0..n - 1 {
        let dt = bracket.times()[i + 1] - bracket.times()[i];
        for k in 0..d * d {
            inc[k] = (bracket.value(i + 1)[k] - bracket.value(i)[k]) / dt;
        }
        let root = psd_sqrt(&inc, d);
        values[i * d * d..(i + 1) * d * d].copy_from_slice(&root);
    }
    let last = values[(n - 2) * d * d..(n - 1) * d * d].to_vec();
    values[(n - 1) * d * d..].copy_from_slice(&last);
    GridPath::new(bracket.times().to_vec(), d * d, values)
}
