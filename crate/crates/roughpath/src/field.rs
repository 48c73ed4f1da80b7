//! Vector fields driving differential equations, one-form integrands, and
//! smooth maps with first and second derivatives. Built-ins are available
//! by string key for the CLI.

use crate::error::{invalid, Error, Result};
use crate::rng::substream;
use rand::Rng;

/// A field `f: R^e -> L(R^d, R^e)` with optional derivatives.
///
/// Layouts (row-major): `eval` writes `e x d`; `jacobian` writes
/// `e x d x e` with `[(s*d + i)*e + k] = d f^{s,i} / d y^k`; `hessian`
/// writes `e x d x e x e`.
pub trait VectorField: Sync {
    fn driver_dim(&self) -> usize;
    fn state_dim(&self) -> usize;
    /// Declared smoothness class.
    fn lip_beta(&self) -> f64 {
        3.0
    }
    /// Declared bound on the field and its derivatives.
    fn lip_norm(&self) -> f64;
    fn eval_into(&self, y: &[f64], out: &mut [f64]);
    /// Returns false when the derivative is not available.
    fn jacobian_into(&self, _y: &[f64], _out: &mut [f64]) -> bool {
        false
    }
    fn hessian_into(&self, _y: &[f64], _out: &mut [f64]) -> bool {
        false
    }
    /// Field and Jacobian in one call; solvers sit in this method, so
    /// fields whose value and derivative share work can override it.
    fn eval_jac_into(&self, y: &[f64], f_out: &mut [f64], jac_out: &mut [f64]) -> bool {
        self.eval_into(y, f_out);
        self.jacobian_into(y, jac_out)
    }
    /// `Some(lambda)` when this is the scalar linear field `f(y) = lambda y`.
    fn linear_coeff(&self) -> Option<f64> {
        None
    }
}

/// Scalar linear field `f(y) = lambda y` with `d = e = 1`.
#[derive(Debug, Clone)]
pub struct LinearScalar {
    pub lambda: f64,
}

impl VectorField for LinearScalar {
    fn driver_dim(&self) -> usize {
        1
    }
    fn state_dim(&self) -> usize {
        1
    }
    fn lip_norm(&self) -> f64 {
        self.lambda.abs()
    }
    fn eval_into(&self, y: &[f64], out: &mut [f64]) {
        out[0] = self.lambda * y[0];
    }
    fn jacobian_into(&self, _y: &[f64], out: &mut [f64]) -> bool {
        out[0] = self.lambda;
        true
    }
    fn hessian_into(&self, _y: &[f64], out: &mut [f64]) -> bool {
        out[0] = 0.0;
        true
    }
    fn linear_coeff(&self) -> Option<f64> {
        Some(self.lambda)
    }
}

/// Constant field: `f(y)^{s,i} = coef` when `i == s mod d`, else 0.
#[derive(Debug, Clone)]
pub struct Constant {
    pub d: usize,
    pub e: usize,
    pub coef: f64,
}

impl VectorField for Constant {
    fn driver_dim(&self) -> usize {
        self.d
    }
    fn state_dim(&self) -> usize {
        self.e
    }
    fn lip_norm(&self) -> f64 {
        self.coef.abs()
    }
    fn eval_into(&self, _y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for s in 0..self.e {
            out[s * self.d + (s % self.d)] = self.coef;
        }
    }
    fn jacobian_into(&self, _y: &[f64], out: &mut [f64]) -> bool {
        out.fill(0.0);
        true
    }
    fn hessian_into(&self, _y: &[f64], out: &mut [f64]) -> bool {
        out.fill(0.0);
        true
    }
}

/// Bounded trigonometric field:
/// `f(y)^{s,i} = amp * sin(freq * y_{(s+i) mod e} + theta_{s,i})`.
/// Smooth with all derivatives bounded.
#[derive(Debug, Clone)]
pub struct Trig {
    pub d: usize,
    pub e: usize,
    pub amp: f64,
    pub freq: f64,
}

impl Trig {
    fn phase(&self, s: usize, i: usize) -> f64 {
        0.3 + 0.7 * (s * self.d + i) as f64
    }
}

impl VectorField for Trig {
    fn driver_dim(&self) -> usize {
        self.d
    }
    fn state_dim(&self) -> usize {
        self.e
    }
    fn lip_norm(&self) -> f64 {
        self.amp.abs() * self.freq.abs().max(1.0).powi(2)
    }
    fn eval_into(&self, y: &[f64], out: &mut [f64]) {
        for s in 0..self.e {
            for i in 0..self.d {
                out[s * self.d + i] =
                    self.amp * (self.freq * y[(s + i) % self.e] + self.phase(s, i)).sin();
            }
        }
    }
    fn jacobian_into(&self, y: &[f64], out: &mut [f64]) -> bool {
        out.fill(0.0);
        for s in 0..self.e {
            for i in 0..self.d {
                let k = (s + i) % self.e;
                out[(s * self.d + i) * self.e + k] =
                    self.amp * self.freq * (self.freq * y[k] + self.phase(s, i)).cos();
            }
        }
        true
    }
    fn hessian_into(&self, y: &[f64], out: &mut [f64]) -> bool {
        out.fill(0.0);
        let e = self.e;
        for s in 0..e {
            for i in 0..self.d {
                let k = (s + i) % e;
                out[((s * self.d + i) * e + k) * e + k] = -self.amp
                    * self.freq
                    * self.freq
                    * (self.freq * y[k] + self.phase(s, i)).sin();
            }
        }
        true
    }
    fn eval_jac_into(&self, y: &[f64], f_out: &mut [f64], jac_out: &mut [f64]) -> bool {
        jac_out.fill(0.0);
        for s in 0..self.e {
            for i in 0..self.d {
                let k = (s + i) % self.e;
                let (sin, cos) = (self.freq * y[k] + self.phase(s, i)).sin_cos();
                f_out[s * self.d + i] = self.amp * sin;
                jac_out[(s * self.d + i) * self.e + k] = self.amp * self.freq * cos;
            }
        }
        true
    }
}

/// Smoothly clipped polynomial field:
/// `f(y)^{s,i} = amp * y_k / sqrt(1 + y_k^2)` with `k = (s+i) mod e`.
#[derive(Debug, Clone)]
pub struct PolyClip {
    pub d: usize,
    pub e: usize,
    pub amp: f64,
}

impl VectorField for PolyClip {
    fn driver_dim(&self) -> usize {
        self.d
    }
    fn state_dim(&self) -> usize {
        self.e
    }
    fn lip_norm(&self) -> f64 {
        self.amp.abs()
    }
    fn eval_into(&self, y: &[f64], out: &mut [f64]) {
        for s in 0..self.e {
            for i in 0..self.d {
                let x = y[(s + i) % self.e];
                out[s * self.d + i] = self.amp * x / (1.0 + x * x).sqrt();
            }
        }
    }
    fn jacobian_into(&self, y: &[f64], out: &mut [f64]) -> bool {
        out.fill(0.0);
        for s in 0..self.e {
            for i in 0..self.d {
                let k = (s + i) % self.e;
                let x = y[k];
                out[(s * self.d + i) * self.e + k] = self.amp * (1.0 + x * x).powf(-1.5);
            }
        }
        true
    }
    fn hessian_into(&self, y: &[f64], out: &mut [f64]) -> bool {
        out.fill(0.0);
        let e = self.e;
        for s in 0..e {
            for i in 0..self.d {
                let k = (s + i) % e;
                let x = y[k];
                out[((s * self.d + i) * e + k) * e + k] =
                    self.amp * (-3.0 * x) * (1.0 + x * x).powf(-2.5);
            }
        }
        true
    }
}

/// Scalar sine field `f(y) = amp * sin(y)`, `d = e = 1`.
#[derive(Debug, Clone)]
pub struct SinScalar {
    pub amp: f64,
}

impl VectorField for SinScalar {
    fn driver_dim(&self) -> usize {
        1
    }
    fn state_dim(&self) -> usize {
        1
    }
    fn lip_norm(&self) -> f64 {
        self.amp.abs()
    }
    fn eval_into(&self, y: &[f64], out: &mut [f64]) {
        out[0] = self.amp * y[0].sin();
    }
    fn jacobian_into(&self, y: &[f64], out: &mut [f64]) -> bool {
        out[0] = self.amp * y[0].cos();
        true
    }
    fn hessian_into(&self, y: &[f64], out: &mut [f64]) -> bool {
        out[0] = -self.amp * y[0].sin();
        true
    }
}

/// Builds a driving field by registry key. `scale` multiplies the field.
///
/// Keys: `linear1d` / `gbm` (scalar linear), `const`, `trig`, `polyclip`,
/// `sin1d`.
pub fn make_field(key: &str, d: usize, e: usize, scale: f64) -> Result<Box<dyn VectorField>> {
    match key {
        "linear1d" | "gbm" => {
            if d != 1 || e != 1 {
                return Err(invalid("linear1d needs d = e = 1"));
            }
            Ok(Box::new(LinearScalar { lambda: scale }))
        }
        "const" => Ok(Box::new(Constant { d, e, coef: scale })),
        "trig" => Ok(Box::new(Trig { d, e, amp: scale, freq: 1.0 })),
        "polyclip" => Ok(Box::new(PolyClip { d, e, amp: scale })),
        "sin1d" => {
            if d != 1 || e != 1 {
                return Err(invalid("sin1d needs d = e = 1"));
            }
            Ok(Box::new(SinScalar { amp: scale }))
        }
        other => Err(invalid(format!("unknown field key '{other}'"))),
    }
}

/// Checks the declared Jacobian against central finite differences on
/// random probe points; relative tolerance 1e-5.
pub fn validate_jacobian(vf: &dyn VectorField, probes: usize, seed: u64) -> Result<()> {
    let (d, e) = (vf.driver_dim(), vf.state_dim());
    let mut jac = vec![0.0; e * d * e];
    let mut rng = substream(seed, &[0xf1e1d]);
    let h = 1e-6;
    let mut fp = vec![0.0; e * d];
    let mut fm = vec![0.0; e * d];
    for _ in 0..probes {
        let y: Vec<f64> = (0..e).map(|_| rng.random_range(-2.0..2.0)).collect();
        if !vf.jacobian_into(&y, &mut jac) {
            return Err(Error::UnsupportedField("field has no Jacobian".into()));
        }
        for k in 0..e {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[k] += h;
            ym[k] -= h;
            vf.eval_into(&yp, &mut fp);
            vf.eval_into(&ym, &mut fm);
            for s in 0..e {
                for i in 0..d {
                    let fd = (fp[s * d + i] - fm[s * d + i]) / (2.0 * h);
                    let an = jac[(s * d + i) * e + k];
                    let scale = an.abs().max(1.0);
                    if (fd - an).abs() > 1e-5 * scale {
                        return Err(invalid(format!(
                            "jacobian entry ({s},{i},{k}) disagrees with finite differences: {an} vs {fd}"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// A one-form integrand `g: R^d -> L(R^d, R^e)` evaluated along a rough
/// path's own first level.
///
/// Layouts: `eval` writes `e x d`; `jacobian` writes `e x d x d` with
/// `[(s*d + b)*d + a] = d g^{s,b} / d z^a`.
pub trait OneForm: Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn eval_into(&self, z: &[f64], out: &mut [f64]);
    fn jacobian_into(&self, _z: &[f64], _out: &mut [f64]) -> bool {
        false
    }
}

/// Scalar identity one-form `g(z) = c z` (`d = e = 1`), so the rough
/// integral is `c int Z dZ`.
#[derive(Debug, Clone)]
pub struct ScalarOneForm {
    pub coef: f64,
}

impl OneForm for ScalarOneForm {
    fn input_dim(&self) -> usize {
        1
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn eval_into(&self, z: &[f64], out: &mut [f64]) {
        out[0] = self.coef * z[0];
    }
    fn jacobian_into(&self, _z: &[f64], out: &mut [f64]) -> bool {
        out[0] = self.coef;
        true
    }
}

/// Constant one-form `g(z) = C` with `C_{s,b} = coef * [b == s mod d]`.
#[derive(Debug, Clone)]
pub struct ConstOneForm {
    pub d: usize,
    pub e: usize,
    pub coef: f64,
}

impl OneForm for ConstOneForm {
    fn input_dim(&self) -> usize {
        self.d
    }
    fn output_dim(&self) -> usize {
        self.e
    }
    fn eval_into(&self, _z: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for s in 0..self.e {
            out[s * self.d + (s % self.d)] = self.coef;
        }
    }
    fn jacobian_into(&self, _z: &[f64], out: &mut [f64]) -> bool {
        out.fill(0.0);
        true
    }
}

/// A smooth map `f: R^d -> R^e` with first and second derivatives.
///
/// Layouts: `deriv` writes `e x d`; `second_deriv` writes `e x d x d` with
/// `[(s*d + b)*d + a] = d^2 f^s / d z^a d z^b`.
pub trait ScalarMap: Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn eval_into(&self, z: &[f64], out: &mut [f64]);
    fn deriv_into(&self, z: &[f64], out: &mut [f64]);
    fn second_deriv_into(&self, _z: &[f64], _out: &mut [f64]) -> bool {
        false
    }
}

/// The derivative of a map, used as the integrand of a rough integral.
pub struct DerivOneForm<'a> {
    pub map: &'a dyn ScalarMap,
}

impl OneForm for DerivOneForm<'_> {
    fn input_dim(&self) -> usize {
        self.map.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.map.output_dim()
    }
    fn eval_into(&self, z: &[f64], out: &mut [f64]) {
        self.map.deriv_into(z, out);
    }
    fn jacobian_into(&self, z: &[f64], out: &mut [f64]) -> bool {
        self.map.second_deriv_into(z, out)
    }
}

/// `f(z) = z^2` on `R`.
#[derive(Debug, Clone)]
pub struct Square1d;

impl ScalarMap for Square1d {
    fn input_dim(&self) -> usize {
        1
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn eval_into(&self, z: &[f64], out: &mut [f64]) {
        out[0] = z[0] * z[0];
    }
    fn deriv_into(&self, z: &[f64], out: &mut [f64]) {
        out[0] = 2.0 * z[0];
    }
    fn second_deriv_into(&self, _z: &[f64], out: &mut [f64]) -> bool {
        out[0] = 2.0;
        true
    }
}

/// Linear map `f(z) = c z` on `R^d` (componentwise).
#[derive(Debug, Clone)]
pub struct LinearMap {
    pub d: usize,
    pub coef: f64,
}

impl ScalarMap for LinearMap {
    fn input_dim(&self) -> usize {
        self.d
    }
    fn output_dim(&self) -> usize {
        self.d
    }
    fn eval_into(&self, z: &[f64], out: &mut [f64]) {
        for (o, zi) in out.iter_mut().zip(z.iter()) {
            *o = self.coef * zi;
        }
    }
    fn deriv_into(&self, _z: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for s in 0..self.d {
            out[s * self.d + s] = self.coef;
        }
    }
    fn second_deriv_into(&self, _z: &[f64], out: &mut [f64]) -> bool {
        out.fill(0.0);
        true
    }
}

/// `f(z) = amp * sin(z)` on `R`.
#[derive(Debug, Clone)]
pub struct SinMap {
    pub amp: f64,
}

impl ScalarMap for SinMap {
    fn input_dim(&self) -> usize {
        1
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn eval_into(&self, z: &[f64], out: &mut [f64]) {
        out[0] = self.amp * z[0].sin();
    }
    fn deriv_into(&self, z: &[f64], out: &mut [f64]) {
        out[0] = self.amp * z[0].cos();
    }
    fn second_deriv_into(&self, z: &[f64], out: &mut [f64]) -> bool {
        out[0] = -self.amp * z[0].sin();
        true
    }
}

/// Builds a smooth map by registry key: `square1d`, `linear`, `sin1d`.
pub fn make_map(key: &str, d: usize, scale: f64) -> Result<Box<dyn ScalarMap>> {
    match key {
        "square1d" => {
            if d != 1 {
                return Err(invalid("square1d needs d = 1"));
            }
            Ok(Box::new(Square1d))
        }
        "linear" => Ok(Box::new(LinearMap { d, coef: scale })),
        "sin1d" => {
            if d != 1 {
                return Err(invalid("sin1d map needs d = 1"));
            }
            Ok(Box::new(SinMap { amp: scale }))
        }
        other => Err(invalid(format!("unknown map key '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_keys_resolve() {
        assert!(make_field("gbm", 1, 1, 1.0).is_ok());
        assert!(make_field("trig", 2, 2, 0.5).is_ok());
        assert!(make_field("nope", 1, 1, 1.0).is_err());
        assert!(make_field("linear1d", 2, 1, 1.0).is_err());
    }

    #[test]
    fn jacobians_match_finite_differences() {
        for key in ["linear1d", "const", "trig", "polyclip", "sin1d"] {
            let (d, e) = if key == "linear1d" || key == "sin1d" { (1, 1) } else { (2, 3) };
            let vf = make_field(key, d, e, 0.8).unwrap();
            validate_jacobian(vf.as_ref(), 10, 123).unwrap_or_else(|err| {
                panic!("{key}: {err}");
            });
        }
    }

    #[test]
    fn linear_coeff_only_on_scalar_linear() {
        assert_eq!(make_field("gbm", 1, 1, 2.0).unwrap().linear_coeff(), Some(2.0));
        assert_eq!(make_field("trig", 1, 1, 2.0).unwrap().linear_coeff(), None);
    }

    #[test]
    fn deriv_one_form_exposes_second_derivative() {
        let map = Square1d;
        let form = DerivOneForm { map: &map };
        let mut out = [0.0];
        form.eval_into(&[3.0], &mut out);
        assert_eq!(out[0], 6.0);
        let mut jac = [0.0];
        assert!(form.jacobian_into(&[3.0], &mut jac));
        assert_eq!(jac[0], 2.0);
    }
}
