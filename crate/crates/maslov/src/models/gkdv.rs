//! Generalized KdV solitary waves `u = alpha sech^(2/p)(gamma x)`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{MaslovError, Result};
use crate::spectral::{Scaling, SystemDefinition};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GkdvModel {
    pub p: f64,
    pub s: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl GkdvModel {
    pub fn new(p: f64, s: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(MaslovError::Config(format!("gKdV needs p >= 1, got {p}")));
        }
        if !(s > 0.0) || !s.is_finite() {
            return Err(MaslovError::Config(format!("gKdV needs s > 0, got {s}")));
        }
        let alpha = (0.5 * s * (p + 1.0) * (p + 2.0)).powf(1.0 / p);
        let gamma = p * s.sqrt() / 2.0;
        Ok(GkdvModel { p, s, alpha, gamma })
    }

    fn sech2(&self, x: f64) -> f64 {
        let c = (self.gamma * x).cosh();
        if c.is_finite() {
            1.0 / (c * c)
        } else {
            0.0
        }
    }

    /// `u^p = alpha^p sech^2(gamma x)`.
    pub fn u_pow_p(&self, x: f64) -> f64 {
        self.alpha.powf(self.p) * self.sech2(x)
    }

    pub fn u(&self, x: f64) -> f64 {
        self.alpha * self.sech2(x).powf(1.0 / self.p)
    }

    /// `(u, u', u'', u''')` from the closed form and the wave equation.
    pub fn derivatives(&self, x: f64) -> [f64; 4] {
        let u = self.u(x);
        let up = self.u_pow_p(x);
        let t = (self.gamma * x).tanh();
        let u1 = -(2.0 * self.gamma / self.p) * u * t;
        let u2 = self.s * u - u * up / (self.p + 1.0);
        let u3 = self.s * u1 - up * u1;
        [u, u1, u2, u3]
    }

    /// `a(x) = u^p - s` and `a'(x) = -2 gamma alpha^p sech^2 tanh`.
    pub fn a_and_prime(&self, x: f64) -> (f64, f64) {
        let up = self.u_pow_p(x);
        let t = (self.gamma * x).tanh();
        (up - self.s, -2.0 * self.gamma * up * t)
    }

    /// Residual of `u'' = s u - u^(p+1)/(p+1)` with `u''` by central differences.
    pub fn wave_residual(&self, x: f64) -> f64 {
        let h = 1e-4;
        let d2 = (self.u(x + h) - 2.0 * self.u(x) + self.u(x - h)) / (h * h);
        let u = self.u(x);
        d2 - (self.s * u - u.powf(self.p + 1.0) / (self.p + 1.0))
    }

    pub fn a_limit(&self, lambda: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, -lambda, self.s, 0.0])
    }

    pub fn m_matrix(&self) -> DMatrix<f64> {
        let rs = self.s.sqrt();
        DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 1.0 / rs, 1.0, 0.0, 0.0, 1.0, 0.0, -1.0 / self.s])
    }

    /// Roots `z1 < 0 < z2` of `(p+1)(p+2) z^2 + p(p+2) z - p`.
    pub fn quadratic_roots(&self) -> (f64, f64) {
        let p = self.p;
        let (a, b, c) = ((p + 1.0) * (p + 2.0), p * (p + 2.0), -p);
        let d = (b * b - 4.0 * a * c).sqrt();
        let q = -0.5 * (b + d);
        let (r1, r2) = (q / a, c / q);
        (r1.min(r2), r1.max(r2))
    }

    /// The two finite right-shelf crossings at `lambda = 0`.
    pub fn crossing_points(&self) -> (f64, f64) {
        let (z1, z2) = self.quadratic_roots();
        (z1.atanh() / self.gamma, z2.atanh() / self.gamma)
    }

    /// `int sech^(4/p)(y) dy` over the line.
    pub fn c_p(&self) -> f64 {
        let e = 4.0 / self.p;
        // sech^e decays like 2^e e^(-e|y|)
        let ymax = 40.0 / e + 10.0;
        simpson(|y| (1.0 / y.cosh()).powf(e), -ymax, ymax, 20_001)
    }

    /// `d/ds (alpha^2 / gamma)`.
    pub fn d_ds_alpha2_over_gamma(&self) -> f64 {
        let r = self.alpha * self.alpha / self.gamma;
        r * (4.0 - self.p) / (2.0 * self.p * self.s)
    }

    /// `k-` with `eta-(x; 0) = k- (u', u'', u''')`, from the `x -> -inf` asymptotics.
    pub fn k_minus(&self, kappa0: f64) -> f64 {
        let rs = self.s.sqrt();
        kappa0 / (rs * self.alpha * 2f64.powf(2.0 / self.p))
    }

    /// `k+` with `Y~+(x; 0) = k+ (u, u', u'' + a u)`, from the `x -> +inf` asymptotics.
    pub fn k_plus(&self, kappa0: f64) -> f64 {
        kappa0 / (self.alpha * 2f64.powf(2.0 / self.p))
    }

    /// `kappa(0) = 1/sqrt(2 s)` for the gKdV normalization.
    pub fn kappa0(&self) -> f64 {
        1.0 / (2.0 * self.s).sqrt()
    }
}

pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, nodes: usize) -> f64 {
    let n = if nodes.is_multiple_of(2) { nodes + 1 } else { nodes.max(3) };
    let h = (b - a) / (n - 1) as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n - 1 {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

pub fn gkdv_system(model: &GkdvModel) -> SystemDefinition {
    let m = *model;
    let coeff = Arc::new(move |x: f64, lambda: f64, buf: &mut [f64]| {
        let (a, ap) = m.a_and_prime(x);
        buf.copy_from_slice(&[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, -lambda - ap, -a, 0.0]);
    });
    let lim = Arc::new(move |lambda: f64| m.a_limit(lambda));
    SystemDefinition {
        n: 3,
        coeff,
        a_minus: lim.clone(),
        a_plus: lim,
        m_matrix: model.m_matrix(),
        label: format!("gkdv(p={}, s={})", model.p, model.s),
        scaling: Scaling::Kappa,
        omega2_orientation: 1.0,
        symmetric_limits: true,
    }
}

/// Closed-form detection pair at `lambda = 0`, each up to its own positive
/// constant: `((2 gamma/p) u'' + u''', u') / |(u', u'', u''')|`.
pub fn gkdv_shelf_zero(model: &GkdvModel, x: f64) -> (f64, f64) {
    let [_, u1, u2, u3] = model.derivatives(x);
    let nrm = (u1 * u1 + u2 * u2 + u3 * u3).sqrt();
    ((2.0 * model.gamma / model.p * u2 + u3) / nrm, u1 / nrm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wave_equation_holds() {
        for p in [1.0, 2.0, 3.5, 4.5] {
            let m = GkdvModel::new(p, 0.5).unwrap();
            for k in 0..=100 {
                let x = -5.0 + 0.1 * k as f64;
                let [u, _, u2, _] = m.derivatives(x);
                assert!((u2 - (m.s * u - u.powf(p + 1.0) / (p + 1.0))).abs() < 1e-12);
                assert!(m.wave_residual(x).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn quadratic_roots_p1() {
        let m = GkdvModel::new(1.0, 1.0).unwrap();
        let (z1, z2) = m.quadratic_roots();
        assert!((z1 - (-3.0 - 33f64.sqrt()) / 12.0).abs() < 1e-14);
        assert!((z2 - (-3.0 + 33f64.sqrt()) / 12.0).abs() < 1e-14);
        assert!((z1 + 0.728_713).abs() < 1e-5 && (z2 - 0.228_713).abs() < 1e-5);
    }

    #[test]
    fn c_p_closed_form_p2() {
        // p = 2: int sech^2 = 2
        let m = GkdvModel::new(2.0, 1.0).unwrap();
        assert!((m.c_p() - 2.0).abs() < 1e-10);
        // p = 1: int sech^4 = 4/3
        let m = GkdvModel::new(1.0, 1.0).unwrap();
        assert!((m.c_p() - 4.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GkdvModel::new(0.5, 1.0).is_err());
        assert!(GkdvModel::new(2.0, -1.0).is_err());
    }
}
