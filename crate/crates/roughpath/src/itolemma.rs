//! Pathwise decomposition of the chain rule: the Stratonovich lift of
//! `f(Z)` splits into the rough integral of `Df` against the left-point
//! lift of `Z` plus a bounded-variation group path built from the bracket,
//! with the cross terms between the two entering as Young integrals.

use crate::error::{invalid, Error, Result};
use crate::field::{DerivOneForm, OneForm, ScalarMap};
use crate::grid::{require_same_grid, GridPath};
use crate::lift::{bracket_fine, ito_lift, strat_lift, BracketGrid};
use crate::rde::rough_integral_one_form;
use crate::sig::RoughPathGrid;
use crate::tensor::TruncatedTensor;

/// Bounded-variation companion path: `x1 = (1/2) int D^2 f(Z) d<Z>`,
/// `x2 = (1/2) int Df(Z) (x) Df(Z) d<Z>`, assembled into the group path
/// `H_t = (1, x1_t, int x1 (x) dx1 + x2_t)`.
#[derive(Debug, Clone)]
pub struct HPath {
    pub x1: GridPath,
    pub x2: GridPath,
    pub group: RoughPathGrid,
}

/// Left-point Riemann-Stieltjes sums `sum a_u (x) (h increment)`,
/// accumulated from zero along the shared grid.
pub fn young_integral(a: &GridPath, h: &GridPath) -> Result<GridPath> {
    require_same_grid(a.times(), h.times(), "young integral")?;
    let (ea, eh) = (a.dim(), h.dim());
    let n = a.len();
    let mut values = vec![0.0; n * ea * eh];
    for i in 0..n - 1 {
        let av = a.value(i);
        let (h0, h1) = (h.value(i), h.value(i + 1));
        for r in 0..ea {
            for c in 0..eh {
                values[(i + 1) * ea * eh + r * eh + c] =
                    values[i * ea * eh + r * eh + c] + av[r] * (h1[c] - h0[c]);
            }
        }
    }
    GridPath::new(a.times().to_vec(), ea * eh, values)
}

/// Builds the bounded-variation companion of `f` along `z` with the given
/// bracket.
pub fn build_h_path(f: &dyn ScalarMap, z: &GridPath, bracket: &BracketGrid) -> Result<HPath> {
    require_same_grid(z.times(), bracket.times(), "path vs bracket")?;
    let d = f.input_dim();
    let e = f.output_dim();
    if z.dim() != d || bracket.dim() != d {
        return Err(invalid("path and bracket must live on the map's input space"));
    }
    let n = z.len();
    let mut d2 = vec![0.0; e * d * d];
    let mut df = vec![0.0; e * d];
    let mut x1 = vec![0.0; n * e];
    let mut x2 = vec![0.0; n * e * e];
    for i in 0..n - 1 {
        let zi = z.value(i);
        if !f.second_deriv_into(zi, &mut d2) {
            return Err(Error::UnsupportedField(
                "bounded-variation companion needs the second derivative".into(),
            ));
        }
        f.deriv_into(zi, &mut df);
        let (q0, q1) = (bracket.value(i), bracket.value(i + 1));
        for s in 0..e {
            let mut acc = 0.0;
            for a in 0..d {
                for b in 0..d {
                    acc += 0.5 * d2[(s * d + b) * d + a] * (q1[a * d + b] - q0[a * d + b]);
                }
            }
            x1[(i + 1) * e + s] = x1[i * e + s] + acc;
        }
        for s in 0..e {
            for s2 in 0..e {
                let mut acc = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        acc += 0.5 * df[s * d + a] * df[s2 * d + b] * (q1[a * d + b] - q0[a * d + b]);
                    }
                }
                x2[(i + 1) * e * e + s * e + s2] = x2[i * e * e + s * e + s2] + acc;
            }
        }
    }
    let x1 = GridPath::new(z.times().to_vec(), e, x1)?;
    let x2 = GridPath::new(z.times().to_vec(), e * e, x2)?;
    let x1_area = young_integral(&x1, &x1)?;
    let mut elements = Vec::with_capacity(n);
    for i in 0..n {
        let l1 = x1.value(i).to_vec();
        let l2: Vec<f64> = x1_area
            .value(i)
            .iter()
            .zip(x2.value(i).iter())
            .map(|(a, b)| a + b)
            .collect();
        elements.push(TruncatedTensor::from_levels(e, vec![l1, l2])?);
    }
    Ok(HPath { x1, x2, group: RoughPathGrid::new(z.times().to_vec(), elements)? })
}

/// A one-form evaluated at `origin + z`, so integrands can see the actual
/// path values rather than increments from the path start.
struct ShiftedOneForm<'a> {
    inner: &'a dyn OneForm,
    origin: Vec<f64>,
}

impl OneForm for ShiftedOneForm<'_> {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }
    fn eval_into(&self, z: &[f64], out: &mut [f64]) {
        let shifted: Vec<f64> = self.origin.iter().zip(z.iter()).map(|(o, x)| o + x).collect();
        self.inner.eval_into(&shifted, out);
    }
    fn jacobian_into(&self, z: &[f64], out: &mut [f64]) -> bool {
        let shifted: Vec<f64> = self.origin.iter().zip(z.iter()).map(|(o, x)| o + x).collect();
        self.inner.jacobian_into(&shifted, out)
    }
}

/// Residuals of the decomposition, per level (sup over grid times).
#[derive(Debug, Clone)]
pub struct ItoLemmaResidual {
    pub level1: f64,
    pub level2: f64,
}

/// Evaluates both sides of the decomposition on the grid of `z` and
/// returns the sup-norm residual per level.
///
/// Left side: the trapezoid lift of the image path `f(Z)`. Right side:
/// the rough integral of `Df` against the left-point lift of `Z`, the
/// companion path from the fine-grid bracket, and the two left-sum Young
/// cross integrals between their first levels.
pub fn verify_ito_lemma(f: &dyn ScalarMap, z: &GridPath) -> Result<ItoLemmaResidual> {
    let e = f.output_dim();
    let image = z.map(e, |zi, out| f.eval_into(zi, out))?;
    let lhs = strat_lift(&image)?;

    let driver = ito_lift(z)?;
    let deriv = DerivOneForm { map: f };
    let shifted = ShiftedOneForm { inner: &deriv, origin: z.value(0).to_vec() };
    let ri = rough_integral_one_form(&shifted, &driver)?;

    let bracket = bracket_fine(z)?;
    let h = build_h_path(f, z, &bracket)?;

    let ri_first = ri.first_level();
    let cross_rh = young_integral(&ri_first, &h.x1)?;
    let cross_hr = young_integral(&h.x1, &ri_first)?;

    let mut level1 = 0f64;
    let mut level2 = 0f64;
    for i in 0..z.len() {
        for s in 0..e {
            let rhs = ri.element(i).level(1)[s] + h.x1.value(i)[s];
            level1 = level1.max((lhs.element(i).level(1)[s] - rhs).abs());
        }
        for k in 0..e * e {
            let rhs = ri.element(i).level(2)[k]
                + h.group.element(i).level(2)[k]
                + cross_rh.value(i)[k]
                + cross_hr.value(i)[k];
            level2 = level2.max((lhs.element(i).level(2)[k] - rhs).abs());
        }
    }
    Ok(ItoLemmaResidual { level1, level2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{LinearMap, SinMap, Square1d};
    use crate::lift::sample_brownian;
    use crate::stats::median;

    #[test]
    fn young_constant_integrand() {
        let h = GridPath::sample_fn(1.0, 50, 2, |t, out| {
            out[0] = t * t;
            out[1] = -t;
        })
        .unwrap();
        let a = GridPath::sample_fn(1.0, 50, 1, |_, out| out[0] = 3.0).unwrap();
        let integral = young_integral(&a, &h).unwrap();
        let last = integral.last();
        assert!((last[0] - 3.0 * 1.0).abs() < 1e-13);
        assert!((last[1] + 3.0).abs() < 1e-13);
    }

    #[test]
    fn young_linear_integrand_riemann() {
        // int_0^1 t dt = 1/2 up to O(mesh)
        let steps = 1000;
        let t_path = GridPath::sample_fn(1.0, steps, 1, |t, out| out[0] = t).unwrap();
        let integral = young_integral(&t_path, &t_path).unwrap();
        let err = (integral.last()[0] - 0.5).abs();
        assert!(err < 1.0 / steps as f64, "err {err}");
    }

    #[test]
    fn young_matches_analytic_oracle_on_smooth_pair() {
        // int_0^1 a dh with a = 0.05 sin t, h = 0.05 t^2:
        // 0.005 int t sin t dt = 0.005 (sin 1 - cos 1)
        let steps = 10_000;
        let a = GridPath::sample_fn(1.0, steps, 1, |t, out| out[0] = 0.05 * t.sin()).unwrap();
        let h = GridPath::sample_fn(1.0, steps, 1, |t, out| out[0] = 0.05 * t * t).unwrap();
        let integral = young_integral(&a, &h).unwrap();
        let oracle = 0.005 * (1f64.sin() - 1f64.cos());
        assert!((integral.last()[0] - oracle).abs() < 1e-6);

        // a = h case against the exact half-square
        let g = GridPath::sample_fn(1.0, steps, 1, |t, out| out[0] = 0.05 * (t * t + t.sin())).unwrap();
        let self_int = young_integral(&g, &g).unwrap();
        let exact = 0.5 * (g.last()[0] * g.last()[0] - g.value(0)[0] * g.value(0)[0]);
        assert!((self_int.last()[0] - exact).abs() < 1e-6);
    }

    #[test]
    fn h_path_linear_map_has_zero_x1() {
        let times: Vec<f64> = (0..=64).map(|i| i as f64 / 64.0).collect();
        let z = sample_brownian(&times, 2, 3).unwrap();
        let bracket = bracket_fine(&z).unwrap();
        let f = LinearMap { d: 2, coef: 1.5 };
        let h = build_h_path(&f, &z, &bracket).unwrap();
        assert!(h.x1.values_flat().iter().all(|x| *x == 0.0));
        // the assembled group path is multiplicative
        let chained = h.group.increment(0, 20).unwrap()
            .mul(&h.group.increment(20, 64).unwrap()).unwrap();
        assert!(chained.approx_eq(&h.group.increment(0, 64).unwrap(), 1e-13));
        // x2 = (coef^2 / 2) <Z>
        for i in 0..z.len() {
            for k in 0..4 {
                assert!((h.x2.value(i)[k] - 0.5 * 2.25 * bracket.value(i)[k]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn h_path_square_map_tracks_bracket() {
        let times: Vec<f64> = (0..=4096).map(|i| i as f64 / 4096.0).collect();
        let z = sample_brownian(&times, 1, 5).unwrap();
        let bracket = bracket_fine(&z).unwrap();
        let h = build_h_path(&Square1d, &z, &bracket).unwrap();
        // x1_T = <Z>_T, which concentrates near T = 1
        assert!((h.x1.last()[0] - 1.0).abs() < 0.1);
        assert!((h.x1.last()[0] - bracket.value(z.len() - 1)[0]).abs() < 1e-12);
    }

    #[test]
    fn h_path_zero_bracket_is_trivial() {
        let times: Vec<f64> = (0..=32).map(|i| i as f64 / 32.0).collect();
        let z = sample_brownian(&times, 1, 7).unwrap();
        let zero = BracketGrid::zeros(times.clone(), 1).unwrap();
        let h = build_h_path(&Square1d, &z, &zero).unwrap();
        assert!(h.group.elements().iter().all(|el| el.is_identity(0.0)));
    }

    #[test]
    fn linear_map_residuals_cancel_exactly() {
        let times: Vec<f64> = (0..=256).map(|i| i as f64 / 256.0).collect();
        let z = sample_brownian(&times, 2, 11).unwrap();
        let res = verify_ito_lemma(&LinearMap { d: 2, coef: 0.8 }, &z).unwrap();
        assert!(res.level1 < 1e-10, "level 1 {}", res.level1);
        assert!(res.level2 < 1e-10, "level 2 {}", res.level2);
    }

    #[test]
    fn square_map_level1_telescopes() {
        let times: Vec<f64> = (0..=1024).map(|i| i as f64 / 1024.0).collect();
        let mut residuals = Vec::new();
        for r in 0..10 {
            let z = crate::lift::sample_brownian_stream(&times, 1, 13, &[r]).unwrap();
            let res = verify_ito_lemma(&Square1d, &z).unwrap();
            residuals.push(res.level1);
        }
        assert!(median(&residuals) < 1e-10);
    }

    #[test]
    fn smooth_path_residual_is_quadrature_error() {
        let z = GridPath::sample_fn(1.0, 2_000, 1, |t, out| out[0] = 0.2 * t.sin()).unwrap();
        let res = verify_ito_lemma(&SinMap { amp: 1.0 }, &z).unwrap();
        assert!(res.level1 < 1e-6, "level 1 {}", res.level1);
        assert!(res.level2 < 1e-6, "level 2 {}", res.level2);
    }

    #[test]
    fn companion_variation_is_bounded_by_bracket_variation() {
        // grid 1-variation of x1 (resp. x2) is at most half the sup of
        // |D^2 f| (resp. |Df|^2) times the bracket's 1-variation
        let times: Vec<f64> = (0..=256).map(|i| i as f64 / 256.0).collect();
        let z = sample_brownian(&times, 1, 19).unwrap();
        let bracket = bracket_fine(&z).unwrap();
        let f = SinMap { amp: 1.3 };
        let h = build_h_path(&f, &z, &bracket).unwrap();
        let var1 = |p: &GridPath| -> f64 {
            (0..p.len() - 1)
                .map(|i| {
                    p.value(i + 1)
                        .iter()
                        .zip(p.value(i).iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .sum()
        };
        let bracket_var = var1(&bracket.as_grid_path());
        let sup_d2f = 1.3;
        let sup_df_sq = 1.3 * 1.3;
        assert!(var1(&h.x1) <= 0.5 * sup_d2f * bracket_var + 1e-12);
        assert!(var1(&h.x2) <= 0.5 * sup_df_sq * bracket_var + 1e-12);
    }

    #[test]
    fn sin_map_level1_residual_halves_under_refinement() {
        // per-step defects are conditionally centered, so the accumulated
        // residual scales linearly with the mesh
        let mut medians = Vec::new();
        for level in [6u32, 7, 8, 9] {
            let steps = 1usize << level;
            let times: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
            let mut residuals = Vec::new();
            for r in 0..40 {
                let z = crate::lift::sample_brownian_stream(&times, 1, 17, &[r]).unwrap();
                residuals.push(verify_ito_lemma(&SinMap { amp: 1.0 }, &z).unwrap().level1);
            }
            medians.push(median(&residuals));
        }
        for w in medians.windows(2) {
            let ratio = w[1] / w[0];
            assert!((0.3..0.8).contains(&ratio), "ratios {medians:?}");
        }
    }
}
