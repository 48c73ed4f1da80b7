//! Statistical checks of the moment equivalence between a lifted
//! martingale's p-variation and powers of its bracket, for the power
//! family of moderate functions.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::grid::GridPath;
use crate::lift::{bracket_fine, ito_lift, martingale_path, sample_brownian_stream};
use crate::pvar::{p_variation_banach, p_variation_rough, p_variation_signature};
use crate::sig::extend_to_depth;
use crate::stats::mean_se;

/// Family of simulated martingales for the ratio checks.
#[derive(Debug, Clone)]
pub enum MartingaleKind {
    Brownian,
    /// `c B` for a scaling-invariance check.
    ScaledBrownian(f64),
    /// `int phi dB` with a fixed matrix integrand.
    PhiMartingale(GridPath),
}

#[derive(Debug, Clone)]
pub struct MartingaleSpec {
    pub dim: usize,
    pub t_max: f64,
    pub steps: usize,
    pub kind: MartingaleKind,
}

impl MartingaleSpec {
    pub fn brownian(dim: usize, t_max: f64, steps: usize) -> Self {
        MartingaleSpec { dim, t_max, steps, kind: MartingaleKind::Brownian }
    }
}

/// Monte Carlo moment estimates and their ratios. All moments carry the
/// standard error of the mean.
#[derive(Debug, Clone)]
pub struct MomentReport {
    pub p: f64,
    pub q: f64,
    pub depth: usize,
    pub n_paths: usize,
    pub t_max: f64,
    /// `E(||I_n(Z)||_{p-var}^q)`.
    pub sig_pvar_moment: (f64, f64),
    /// `E(||<Z>||_inf^{q/2})`.
    pub bracket_moment: (f64, f64),
    /// `E(|Z_T - Z_0|^q)`.
    pub endpoint_moment: (f64, f64),
    /// Signature moment over bracket moment.
    pub ratio_sig: f64,
    /// Endpoint moment over bracket moment.
    pub ratio_endpoint: f64,
}

impl MomentReport {
    /// Standard error of `ratio_endpoint` by first-order propagation.
    pub fn ratio_endpoint_se(&self) -> f64 {
        ratio_se(self.endpoint_moment, self.bracket_moment)
    }

    pub fn ratio_sig_se(&self) -> f64 {
        ratio_se(self.sig_pvar_moment, self.bracket_moment)
    }
}

fn ratio_se(num: (f64, f64), den: (f64, f64)) -> f64 {
    let r = num.0 / den.0;
    r * ((num.1 / num.0).powi(2) + (den.1 / den.0).powi(2)).sqrt()
}

/// Estimates the moments `E||I_n(Z)||_{p-var}^q`, `E||<Z>||_inf^{q/2}` and
/// `E|Z_T - Z_0|^q` over `n_paths` simulated martingales and reports their
/// ratios.
pub fn bdg_ratio_check(
    spec: &MartingaleSpec,
    p: f64,
    q: f64,
    depth: usize,
    n_paths: usize,
    seed: u64,
) -> Result<MomentReport> {
    if p <= 2.0 {
        return Err(invalid("ratio check needs p > 2"));
    }
    if !(q > 0.0 && q <= 4.0) {
        return Err(invalid("power family restricted to q in (0, 4]"));
    }
    if n_paths < 1_000 {
        return Err(invalid("ratio check needs at least 1000 paths"));
    }
    if depth < 1 {
        return Err(invalid("ratio check needs depth >= 1"));
    }
    let times: Vec<f64> =
        (0..=spec.steps).map(|i| spec.t_max * i as f64 / spec.steps as f64).collect();

    let samples: Vec<Result<[f64; 3]>> = (0..n_paths)
        .into_par_iter()
        .map(|r| {
            let b = sample_brownian_stream(&times, spec.dim, seed, &[r as u64])?;
            let z = match &spec.kind {
                MartingaleKind::Brownian => b,
                MartingaleKind::ScaledBrownian(c) => b.map(spec.dim, |v, out| {
                    for (o, x) in out.iter_mut().zip(v.iter()) {
                        *o = c * x;
                    }
                })?,
                MartingaleKind::PhiMartingale(phi) => martingale_path(phi, &b)?,
            };
            let lift = ito_lift(&z)?;
            let pvar = match depth {
                1 => p_variation_banach(&lift.first_level(), p)?,
                2 => p_variation_rough(&lift, p)?,
                _ => p_variation_signature(&extend_to_depth(&lift, depth)?, p)?,
            };
            let bracket = bracket_fine(&z)?;
            // increments are positive semidefinite, so the sup-norm of the
            // bracket over all windows is attained on the full window
            let bnorm: f64 = bracket
                .value(bracket.len() - 1)
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt();
            let endpoint: f64 = z
                .last()
                .iter()
                .zip(z.value(0).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            Ok([pvar.powf(q), bnorm.powf(0.5 * q), endpoint.powf(q)])
        })
        .collect();

    let mut sig = Vec::with_capacity(n_paths);
    let mut bra = Vec::with_capacity(n_paths);
    let mut end = Vec::with_capacity(n_paths);
    for s in samples {
        let [a, b, c] = s?;
        sig.push(a);
        bra.push(b);
        end.push(c);
    }
    let sig_pvar_moment = mean_se(&sig);
    let bracket_moment = mean_se(&bra);
    let endpoint_moment = mean_se(&end);
    Ok(MomentReport {
        p,
        q,
        depth,
        n_paths,
        t_max: spec.t_max,
        sig_pvar_moment,
        bracket_moment,
        endpoint_moment,
        ratio_sig: sig_pvar_moment.0 / bracket_moment.0,
        ratio_endpoint: endpoint_moment.0 / bracket_moment.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_endpoint_ratio_is_one() {
        let spec = MartingaleSpec::brownian(1, 1.0, 64);
        let report = bdg_ratio_check(&spec, 2.5, 2.0, 1, 4_000, 7).unwrap();
        let se = report.ratio_endpoint_se();
        assert!(
            (report.ratio_endpoint - 1.0).abs() <= 3.0 * se,
            "ratio {} +- {se}",
            report.ratio_endpoint
        );
    }

    #[test]
    fn scaling_leaves_ratios_invariant() {
        // same seed: both moments scale by c^q exactly, so the ratio is
        // reproduced to round-off
        let base = MartingaleSpec::brownian(2, 1.0, 32);
        let scaled = MartingaleSpec {
            kind: MartingaleKind::ScaledBrownian(2.0),
            ..base.clone()
        };
        let a = bdg_ratio_check(&base, 2.5, 2.0, 2, 1_000, 11).unwrap();
        let b = bdg_ratio_check(&scaled, 2.5, 2.0, 2, 1_000, 11).unwrap();
        assert!((a.ratio_sig - b.ratio_sig).abs() < 1e-10 * a.ratio_sig.abs());
        assert!((a.ratio_endpoint - b.ratio_endpoint).abs() < 1e-10);
        // and the scaled moments themselves moved by 2^q
        assert!((b.bracket_moment.0 / a.bracket_moment.0 - 4.0).abs() < 1e-10);
    }

    #[test]
    fn ratios_are_positive_and_finite() {
        let spec = MartingaleSpec::brownian(2, 0.5, 32);
        for depth in [1usize, 2, 3] {
            let report = bdg_ratio_check(&spec, 2.5, 1.5, depth, 1_000, 13).unwrap();
            assert!(report.ratio_sig.is_finite() && report.ratio_sig > 0.0);
            assert!(report.ratio_endpoint.is_finite() && report.ratio_endpoint > 0.0);
        }
    }

    #[test]
    fn preconditions_are_enforced() {
        let spec = MartingaleSpec::brownian(1, 1.0, 16);
        assert!(bdg_ratio_check(&spec, 2.0, 2.0, 1, 1_000, 1).is_err());
        assert!(bdg_ratio_check(&spec, 2.5, 5.0, 1, 1_000, 1).is_err());
        assert!(bdg_ratio_check(&spec, 2.5, 2.0, 1, 100, 1).is_err());
    }
}
