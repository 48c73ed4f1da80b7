//! Canned experiment drivers shared by the command-line harness and the
//! acceptance suite. Every experiment is a pure function of its
//! configuration and seed.

use rayon::prelude::*;

use crate::averaging::{concat_discounted, convergence_study, ExpectationMode, SchemeConfig, StudyReport};
use crate::bdg::{bdg_ratio_check, MartingaleSpec, MomentReport};
use crate::error::{invalid, Result};
use crate::field::{make_field, make_map, LinearScalar};
use crate::grid::{GridPath, Partition};
use crate::lift::{
    bracket_fine, bracket_pl, ito_lift, martingale_path, pl_ito_lift, psi_from_bracket,
    sample_brownian_stream, strat_lift, NoiseSpec,
};
use crate::pvar::{dp_distance, p_variation_banach};
use crate::rde::{rde_solve, sde_euler_maruyama};
use crate::sig::RoughPathGrid;
use crate::stats::median;
use crate::tensor::TruncatedTensor;

pub fn uniform_times(steps: usize, t_max: f64) -> Vec<f64> {
    (0..=steps).map(|i| t_max * i as f64 / steps as f64).collect()
}

/// Exponential-field comparison against the closed-form strong solution
/// and the plain Euler discretization.
#[derive(Debug, Clone)]
pub struct GbmReport {
    pub steps: usize,
    pub paths: usize,
    /// Median relative error of the rough solve over the left-point lift
    /// against `y0 exp(B_T - T/2)`.
    pub median_rel_err_ito: f64,
    /// Median relative error of the rough solve over the trapezoid lift
    /// against `y0 exp(B_T)`.
    pub median_rel_err_strat: f64,
    /// Largest sup-norm gap between the rough solve and Euler over the
    /// same driver grid.
    pub max_gap_euler: f64,
    pub per_path: Vec<(f64, f64)>, // (rel err ito, rel err strat)
}

pub fn gbm_comparison(steps: usize, paths: usize, t_max: f64, y0: f64, seed: u64) -> Result<GbmReport> {
    let times = uniform_times(steps, t_max);
    let vf = LinearScalar { lambda: 1.0 };
    let xi = TruncatedTensor::from_levels(1, vec![vec![y0]])?;
    let rows: Vec<Result<(f64, f64, f64)>> = (0..paths)
        .into_par_iter()
        .map(|r| {
            let b = sample_brownian_stream(&times, 1, seed, &[r as u64])?;
            let bt = b.last()[0];
            let ito_sol = rde_solve(&ito_lift(&b)?, &vf, &xi)?;
            let strat_sol = rde_solve(&strat_lift(&b)?, &vf, &xi)?;
            let em = sde_euler_maruyama(&b, &vf, &[y0])?;
            let exact_ito = y0 * (bt - 0.5 * t_max).exp();
            let exact_strat = y0 * bt.exp();
            let mut gap = 0f64;
            for i in 0..times.len() {
                gap = gap.max((ito_sol.first_level.value(i)[0] - em.value(i)[0]).abs());
            }
            Ok((
                (ito_sol.first_level.last()[0] - exact_ito).abs() / exact_ito.abs(),
                (strat_sol.first_level.last()[0] - exact_strat).abs() / exact_strat.abs(),
                gap,
            ))
        })
        .collect();
    let mut rel_ito = Vec::with_capacity(paths);
    let mut rel_strat = Vec::with_capacity(paths);
    let mut max_gap = 0f64;
    let mut per_path = Vec::with_capacity(paths);
    for row in rows {
        let (a, b, g) = row?;
        rel_ito.push(a);
        rel_strat.push(b);
        max_gap = max_gap.max(g);
        per_path.push((a, b));
    }
    Ok(GbmReport {
        steps,
        paths,
        median_rel_err_ito: median(&rel_ito),
        median_rel_err_strat: median(&rel_strat),
        max_gap_euler: max_gap,
        per_path,
    })
}

/// One row per dyadic level: the median rough-path distance between the
/// chord-interpolated left-point lift and the full-grid one.
pub fn pl_lift_convergence(
    fine_steps: usize,
    paths: usize,
    levels: &[u32],
    p: f64,
    dim: usize,
    seed: u64,
) -> Result<Vec<(u32, f64)>> {
    let times = uniform_times(fine_steps, 1.0);
    let mut rows = Vec::with_capacity(levels.len());
    let per_path: Vec<Result<Vec<f64>>> = (0..paths)
        .into_par_iter()
        .map(|r| {
            let b = sample_brownian_stream(&times, dim, seed, &[r as u64])?;
            let reference = ito_lift(&b)?;
            let mut out = Vec::with_capacity(levels.len());
            for &m in levels {
                let part = Partition::dyadic(times.len(), m)?;
                let approx = pl_ito_lift(&b, &part)?;
                out.push(dp_distance(&approx, &reference, p)?);
            }
            Ok(out)
        })
        .collect();
    let table: Vec<Vec<f64>> = per_path.into_iter().collect::<Result<Vec<_>>>()?;
    for (k, &m) in levels.iter().enumerate() {
        let column: Vec<f64> = table.iter().map(|row| row[k]).collect();
        rows.push((m, median(&column)));
    }
    Ok(rows)
}

/// One row per dyadic level: the mean `q`-variation of the gap between
/// the coarse and fine bracket approximations of Brownian motion, where
/// `q` is the variation order applied to the difference path.
pub fn bracket_convergence(
    fine_steps: usize,
    paths: usize,
    levels: &[u32],
    q: f64,
    seed: u64,
) -> Result<Vec<(u32, f64)>> {
    let times = uniform_times(fine_steps, 1.0);
    let per_path: Vec<Result<Vec<f64>>> = (0..paths)
        .into_par_iter()
        .map(|r| {
            let b = sample_brownian_stream(&times, 1, seed, &[r as u64])?;
            let fine = bracket_fine(&b)?;
            let mut out = Vec::with_capacity(levels.len());
            for &m in levels {
                let part = Partition::dyadic(times.len(), m)?;
                let coarse = bracket_pl(&b, &part)?;
                let diff_values: Vec<f64> = coarse
                    .as_grid_path()
                    .values_flat()
                    .iter()
                    .zip(fine.as_grid_path().values_flat().iter())
                    .map(|(a, b)| a - b)
                    .collect();
                let diff = GridPath::new(times.clone(), 1, diff_values)?;
                out.push(p_variation_banach(&diff, q)?);
            }
            Ok(out)
        })
        .collect();
    let table: Vec<Vec<f64>> = per_path.into_iter().collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(levels.len());
    for (k, &m) in levels.iter().enumerate() {
        let column: Vec<f64> = table.iter().map(|row| row[k]).collect();
        let mean = crate::stats::mean_se(&column).0;
        rows.push((m, mean));
    }
    Ok(rows)
}

/// Configuration of the full averaging convergence experiment: an outer
/// martingale is sampled and trapezoid-lifted, the noise integrand is the
/// square root of its bracket density, and the scheme runs over dyadic
/// partitions against the fine-grid reference.
#[derive(Debug, Clone)]
pub struct AveragingStudyConfig {
    pub fine_steps: usize,
    pub t_max: f64,
    pub dim: usize,
    pub field_key: String,
    pub field_scale: f64,
    /// Frequency of the trigonometric field (ignored by other keys).
    pub field_freq: f64,
    pub depth: usize,
    pub mc_samples: usize,
    pub levels: Vec<u32>,
    pub outer_paths: usize,
    pub seed: u64,
}

impl Default for AveragingStudyConfig {
    fn default() -> Self {
        AveragingStudyConfig {
            fine_steps: 512,
            t_max: 1.0,
            dim: 2,
            field_key: "trig".into(),
            field_scale: 0.8,
            field_freq: 1.0,
            depth: 2,
            mc_samples: 10_000,
            levels: (3..=8).collect(),
            outer_paths: 20,
            seed: 2024,
        }
    }
}

/// Per-level median (over outer paths) of the sup error against the
/// fine-grid reference.
#[derive(Debug, Clone)]
pub struct AveragingStudyReport {
    pub levels: Vec<u32>,
    pub median_sup_error: Vec<f64>,
    /// One study per outer path.
    pub per_path: Vec<StudyReport>,
}

/// The outer martingale integrand: mildly time-varying, non-diagonal.
fn outer_phi(times: &[f64], d: usize) -> Result<GridPath> {
    let n = times.len();
    let mut values = vec![0.0; n * d * d];
    for (i, &t) in times.iter().enumerate() {
        for r in 0..d {
            values[i * d * d + r * d + r] = 1.0 + 0.3 * (2.0 * t + r as f64).sin();
            if r + 1 < d {
                values[i * d * d + r * d + r + 1] = 0.2 * (3.0 * t).cos();
            }
        }
    }
    GridPath::new(times.to_vec(), d * d, values)
}

pub fn averaging_study(cfg: &AveragingStudyConfig) -> Result<AveragingStudyReport> {
    let times = uniform_times(cfg.fine_steps, cfg.t_max);
    let vf: Box<dyn crate::field::VectorField> = if cfg.field_key == "trig" {
        Box::new(crate::field::Trig {
            d: cfg.dim,
            e: cfg.dim,
            amp: cfg.field_scale,
            freq: cfg.field_freq,
        })
    } else {
        make_field(&cfg.field_key, cfg.dim, cfg.dim, cfg.field_scale)?
    };
    let mut xi = TruncatedTensor::identity(cfg.dim, cfg.depth);
    for s in 0..cfg.dim {
        xi.level_mut(1)[s] = 0.2 - 0.3 * s as f64;
    }
    let phi_z = outer_phi(&times, cfg.dim)?;
    let partitions: Vec<Partition> = cfg
        .levels
        .iter()
        .map(|&m| Partition::dyadic(times.len(), m))
        .collect::<Result<Vec<_>>>()?;

    let mut per_path = Vec::with_capacity(cfg.outer_paths);
    for outer in 0..cfg.outer_paths {
        let b = sample_brownian_stream(&times, cfg.dim, cfg.seed, &[0xfeed, outer as u64])?;
        let z = martingale_path(&phi_z, &b)?;
        let gamma = strat_lift(&z)?;
        let psi = psi_from_bracket(&bracket_fine(&z)?)?;
        let noise = NoiseSpec::new(psi, cfg.seed ^ ((outer as u64) << 32) ^ 0x5eed, cfg.mc_samples)?;
        let base = SchemeConfig {
            partition: partitions[0].clone(),
            mc_samples: cfg.mc_samples,
            depth: cfg.depth,
            noise,
            expectation_mode: ExpectationMode::MonteCarlo,
            mc_floor: 100.min(cfg.mc_samples),
        };
        per_path.push(convergence_study(&gamma, vf.as_ref(), &xi, &partitions, &base, None)?);
    }
    let mut median_sup_error = Vec::with_capacity(cfg.levels.len());
    for k in 0..cfg.levels.len() {
        let column: Vec<f64> = per_path.iter().map(|s| s.rows[k].sup_error).collect();
        median_sup_error.push(median(&column));
    }
    Ok(AveragingStudyReport { levels: cfg.levels.clone(), median_sup_error, per_path })
}

/// The linear closed-form run: trivial base path, unit Brownian noise.
/// Returns `(partition level, final level-1 value, |value - y0 exp(-T/2)|)`.
pub fn averaging_linear_exactness(
    fine_steps: usize,
    t_max: f64,
    y0: f64,
    levels: &[u32],
    depth: usize,
    seed: u64,
) -> Result<Vec<(u32, f64, f64)>> {
    let times = uniform_times(fine_steps, t_max);
    let gamma = RoughPathGrid::identity_path(times.clone(), 1)?;
    let vf = LinearScalar { lambda: 1.0 };
    let mut levels_out = vec![vec![y0]];
    for k in 2..=depth {
        levels_out.push(vec![0.0; 1usize.pow(k as u32)]);
    }
    let xi = TruncatedTensor::from_levels(1, levels_out)?;
    let noise = NoiseSpec::constant_identity(times.clone(), 1, 1.0, seed, 1)?;
    let want = y0 * (-0.5 * t_max).exp();
    let mut rows = Vec::with_capacity(levels.len());
    for &m in levels {
        let cfg = SchemeConfig {
            partition: Partition::dyadic(times.len(), m)?,
            mc_samples: 1,
            depth,
            noise: noise.clone(),
            expectation_mode: ExpectationMode::ClosedFormLinear,
            mc_floor: 1,
        };
        let out = concat_discounted(&gamma, &vf, &xi, &cfg)?;
        let value = out.values.last().unwrap().level(1)[0];
        rows.push((m, value, (value - want).abs()));
    }
    Ok(rows)
}

/// Chain-rule residual study: per mesh level, the median level-1 and
/// level-2 residuals of the decomposition over Brownian paths.
#[derive(Debug, Clone)]
pub struct ItoLemmaStudyRow {
    pub steps: usize,
    pub median_level1: f64,
    pub median_level2: f64,
}

pub fn ito_lemma_study(
    map_key: &str,
    step_counts: &[usize],
    paths: usize,
    seed: u64,
) -> Result<Vec<ItoLemmaStudyRow>> {
    let f = make_map(map_key, 1, 1.0)?;
    let mut rows = Vec::with_capacity(step_counts.len());
    for &steps in step_counts {
        let times = uniform_times(steps, 1.0);
        let residuals: Vec<Result<(f64, f64)>> = (0..paths)
            .into_par_iter()
            .map(|r| {
                let z = sample_brownian_stream(&times, 1, seed, &[r as u64])?;
                let res = crate::itolemma::verify_ito_lemma(f.as_ref(), &z)?;
                Ok((res.level1, res.level2))
            })
            .collect();
        let pairs = residuals.into_iter().collect::<Result<Vec<_>>>()?;
        let l1: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let l2: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        rows.push(ItoLemmaStudyRow {
            steps,
            median_level1: median(&l1),
            median_level2: median(&l2),
        });
    }
    Ok(rows)
}

/// The moment-ratio battery: the depth-1 endpoint identity at one horizon
/// and the depth-`depth` signature ratio across horizons.
#[derive(Debug, Clone)]
pub struct BdgStudy {
    pub endpoint_report: MomentReport,
    pub horizon_reports: Vec<MomentReport>,
}

pub fn bdg_study(
    p: f64,
    q: f64,
    depth: usize,
    paths: usize,
    horizons: &[f64],
    steps: usize,
    seed: u64,
) -> Result<BdgStudy> {
    if horizons.is_empty() {
        return Err(invalid("need at least one horizon"));
    }
    let endpoint_report =
        bdg_ratio_check(&MartingaleSpec::brownian(1, 1.0, steps), p, 2.0, 1, paths, seed)?;
    let mut horizon_reports = Vec::with_capacity(horizons.len());
    for &t in horizons {
        horizon_reports.push(bdg_ratio_check(
            &MartingaleSpec::brownian(1, t, steps),
            p,
            q,
            depth,
            paths,
            seed ^ t.to_bits(),
        )?);
    }
    Ok(BdgStudy { endpoint_report, horizon_reports })
}
