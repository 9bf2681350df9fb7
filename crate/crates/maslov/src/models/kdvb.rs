//! KdV-Burgers fronts `nu u'' + u' = (u^2 - 1)/2` connecting `u = 1` to `u = -1`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{MaslovError, Result};
use crate::ode::{integrate, OdeOptions};
use crate::spectral::{Scaling, SystemDefinition};

const TABLE_STEP: f64 = 1e-3;
const SADDLE_OFFSET: f64 = 1e-8;
const X_BUDGET: f64 = 5000.0;
const CONVERGED: f64 = 1e-13;
const C_SUP_MARGIN: f64 = 1e-6;

/// Tabulated front on a uniform grid with Hermite interpolation.
#[derive(Debug, Clone)]
pub struct WaveTable {
    pub x0: f64,
    pub h: f64,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    nu: f64,
    /// Unstable rate of the saddle at `u = 1`.
    rate_left: f64,
}

impl WaveTable {
    pub fn x_end(&self) -> f64 {
        self.x0 + self.h * (self.u.len() - 1) as f64
    }

    fn accel(&self, u: f64, w: f64) -> f64 {
        (0.5 * (u * u - 1.0) - w) / self.nu
    }

    /// `(u, u')` at `x`; exponential tail on the left, rest state on the right.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        if x <= self.x0 {
            let d = (1.0 - self.u[0]) * (self.rate_left * (x - self.x0)).exp();
            return (1.0 - d, -self.rate_left * d);
        }
        let last = self.u.len() - 1;
        if x >= self.x_end() {
            return (self.u[last], self.w[last]);
        }
        let s = (x - self.x0) / self.h;
        let k = (s.floor() as usize).min(last - 1);
        let t = s - k as f64;
        let h = self.h;
        let (u0, u1, w0, w1) = (self.u[k], self.u[k + 1], self.w[k], self.w[k + 1]);
        let (a0, a1) = (self.accel(u0, w0), self.accel(u1, w1));
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let u = h00 * u0 + h10 * h * w0 + h01 * u1 + h11 * h * w1;
        let w = h00 * w0 + h10 * h * a0 + h01 * w1 + h11 * h * a1;
        (u, w)
    }
}

#[derive(Debug, Clone)]
pub struct KdvbModel {
    pub nu: f64,
    pub wave: WaveTable,
    /// `sup |u|` over the table plus a small safety margin.
    pub c_sup: f64,
}

impl KdvbModel {
    /// `(u, u', u'', u''')` with the higher derivatives from the wave equation.
    pub fn derivatives(&self, x: f64) -> [f64; 4] {
        let (u, u1) = self.wave.eval(x);
        let u2 = (0.5 * (u * u - 1.0) - u1) / self.nu;
        let u3 = (u * u1 - u2) / self.nu;
        [u, u1, u2, u3]
    }

    /// `nu u'' + u' - (u^2 - 1)/2` with `u''` from central differences of `u'`.
    pub fn wave_residual(&self, x: f64) -> f64 {
        let h = 1e-4;
        let (u, u1) = self.wave.eval(x);
        let d2 = (self.wave.eval(x + h).1 - self.wave.eval(x - h).1) / (2.0 * h);
        self.nu * d2 + u1 - 0.5 * (u * u - 1.0)
    }

    pub fn a_limit(&self, lambda: f64, u_end: f64) -> DMatrix<f64> {
        let inv = 1.0 / self.nu;
        DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, inv, -lambda, u_end, -inv])
    }

    pub fn m_matrix() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0])
    }

    /// Energy-estimate threshold below which the left shelf cannot be crossed.
    pub fn left_shelf_bound(&self) -> f64 {
        kdvb_left_shelf_threshold(self.nu, self.c_sup)
    }

    /// Interior critical points of `u` and points where `u = -1` on `[a, b]`,
    /// sorted, each tagged `true` for a critical point.
    pub fn crossing_census(&self, a: f64, b: f64) -> Vec<(f64, bool)> {
        let n = ((b - a) / 1e-3).ceil() as usize;
        let mut out = Vec::new();
        let mut prev = self.derivatives(a);
        for k in 1..=n {
            let x = a + (b - a) * k as f64 / n as f64;
            let cur = self.derivatives(x);
            let xp = x - (b - a) / n as f64;
            if prev[1].signum() != cur[1].signum() && prev[1] != 0.0 {
                out.push((bisect(|t| self.derivatives(t)[1], xp, x), true));
            }
            if (prev[0] + 1.0).signum() != (cur[0] + 1.0).signum() && prev[0] != -1.0 {
                out.push((bisect(|t| self.derivatives(t)[0] + 1.0, xp, x), false));
            }
            prev = cur;
        }
        out.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
        out
    }
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if (f(m) > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// `-(1/(2 eps delta) + 3C/(2 eps))` with `eps = delta = min(nu/4, 1/(3C))`.
pub fn kdvb_left_shelf_threshold(nu: f64, c: f64) -> f64 {
    let eps = (nu / 4.0).min(1.0 / (3.0 * c));
    -(1.0 / (2.0 * eps * eps) + 3.0 * c / (2.0 * eps))
}

/// Build the front by shooting along the unstable manifold of the saddle
/// `(1, 0)` of `u' = w`, `w' = ((u^2 - 1)/2 - w)/nu`.
pub fn kdvb_wave(nu: f64) -> Result<KdvbModel> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(MaslovError::Config(format!("KdV-Burgers needs nu > 0, got {nu}")));
    }
    if (nu - 0.25).abs() < 1e-12 {
        return Err(MaslovError::Config("nu = 1/4 is the excluded borderline case".into()));
    }
    let r = (-1.0 + (1.0 + 4.0 * nu).sqrt()) / (2.0 * nu);
    let d = SADDLE_OFFSET;
    let y0 = [1.0 - d, -d * r];
    let opts = OdeOptions {
        rtol: 1e-12,
        atol: 1e-15,
        h_init: 1e-3,
        h_max: 0.05,
        renormalize: false,
        relative_atol: false,
        ..Default::default()
    };
    let rhs = |_: f64, y: &[f64], f: &mut [f64]| {
        f[0] = y[1];
        f[1] = (0.5 * (y[0] * y[0] - 1.0) - y[1]) / nu;
    };
    // integrate in chunks until the state settles at (-1, 0)
    let chunk = 50.0;
    let mut x = 0.0;
    let mut y = y0;
    let mut us = vec![y0[0]];
    let mut ws = vec![y0[1]];
    loop {
        let tr = integrate(rhs, x, x + chunk, &y, &opts, None)?;
        let steps = (chunk / TABLE_STEP).round() as usize;
        for k in 1..=steps {
            let (v, _) = tr.eval(x + k as f64 * TABLE_STEP);
            if !(v[0].abs() < 10.0) {
                return Err(MaslovError::Wave(format!("trajectory left the bounded region near x = {}", x + k as f64 * TABLE_STEP)));
            }
            us.push(v[0]);
            ws.push(v[1]);
        }
        let (yend, _) = tr.final_state(true);
        y = [yend[0], yend[1]];
        x += chunk;
        if (y[0] + 1.0).abs() + y[1].abs() < CONVERGED {
            break;
        }
        if x > X_BUDGET {
            return Err(MaslovError::Wave(format!("no convergence to (-1, 0) within x = {X_BUDGET}")));
        }
    }
    // recentre at the first zero of u
    let k0 = us
        .windows(2)
        .position(|p| p[0] > 0.0 && p[1] <= 0.0)
        .ok_or_else(|| MaslovError::Wave("profile never crosses zero".into()))?;
    let mut table = WaveTable { x0: 0.0, h: TABLE_STEP, u: us, w: ws, nu, rate_left: r };
    let xa = k0 as f64 * TABLE_STEP;
    let zero = bisect(|t| table.eval(t).0, xa, xa + TABLE_STEP);
    table.x0 = -zero;
    let c_sup = table.u.iter().fold(0.0f64, |m, v| m.max(v.abs())) + C_SUP_MARGIN;
    Ok(KdvbModel { nu, wave: table, c_sup })
}

pub fn kdvb_system(model: &KdvbModel) -> SystemDefinition {
    let m = Arc::new(model.clone());
    let mc = m.clone();
    let inv = 1.0 / model.nu;
    let coeff = Arc::new(move |x: f64, lambda: f64, buf: &mut [f64]| {
        let (u, u1) = mc.wave.eval(x);
        buf.copy_from_slice(&[0.0, 1.0, 0.0, 0.0, 0.0, inv, u1 - lambda, u, -inv]);
    });
    let (ml, mr) = (m.clone(), m);
    SystemDefinition {
        n: 3,
        coeff,
        a_minus: Arc::new(move |l| ml.a_limit(l, 1.0)),
        a_plus: Arc::new(move |l| mr.a_limit(l, -1.0)),
        m_matrix: KdvbModel::m_matrix(),
        label: format!("kdvb(nu={})", model.nu),
        scaling: Scaling::UnitNorm,
        omega2_orientation: -1.0,
        symmetric_limits: false,
    }
}

/// Closed-form detection pair at `lambda = 0`, each up to its own positive
/// constant: `(u'(u + 1), -u'') / |(u', u'', nu u''')|`.
pub fn kdvb_shelf_zero(model: &KdvbModel, x: f64) -> (f64, f64) {
    let [u, u1, u2, u3] = model.derivatives(x);
    let nrm = (u1 * u1 + u2 * u2 + (model.nu * u3).powi(2)).sqrt();
    (u1 * (u + 1.0) / nrm, -u2 / nrm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_values() {
        assert!((kdvb_left_shelf_threshold(0.125, 1.0) + 560.0).abs() < 1e-9);
        assert!((kdvb_left_shelf_threshold(4.0 / 3.0, 1.0) + 9.0).abs() < 1e-9);
    }

    #[test]
    fn borderline_rejected() {
        assert!(kdvb_wave(0.25).is_err());
        assert!(kdvb_wave(-1.0).is_err());
    }
}
