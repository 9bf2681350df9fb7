//! Dormand-Prince 5(4) with cubic Hermite dense output.
//!
//! For linear problems the state can be renormalized whenever its norm leaves
//! `[1e-6, 1e6]`; the dropped factor is accumulated as a natural-log scale per
//! stored node so magnitudes can be reconstructed later.

use crate::error::{MaslovError, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
    /// Renormalize and track a log scale (linear problems only).
    pub renormalize: bool,
    /// Measure `atol` against the current state norm instead of absolutely.
    pub relative_atol: bool,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-2,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
            renormalize: true,
            relative_atol: true,
        }
    }
}

const RENORM_LO: f64 = 1e-6;
const RENORM_HI: f64 = 1e6;

// Dormand-Prince tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Accepted nodes of an integration, stored with `xs` ascending.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dim: usize,
    pub xs: Vec<f64>,
    ys: Vec<f64>,
    fs: Vec<f64>,
    log_scale: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.xs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }
    pub fn x_max(&self) -> f64 {
        *self.xs.last().unwrap()
    }
    /// Node `k` as stored (in its own scale) plus that scale.
    pub fn node(&self, k: usize) -> (&[f64], f64) {
        (&self.ys[k * self.dim..(k + 1) * self.dim], self.log_scale[k])
    }

    fn locate(&self, x: f64) -> usize {
        let n = self.xs.len();
        if n < 2 || x <= self.xs[0] {
            return 0;
        }
        if x >= self.xs[n - 1] {
            return n - 2;
        }
        match self.xs.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
            Ok(k) => k.min(n - 2),
            Err(k) => k - 1,
        }
    }

    /// State at `x` (clamped to the integrated range) written into `out`,
    /// returning the log scale it is expressed in.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) -> f64 {
        let d = self.dim;
        if self.xs.len() == 1 {
            out.copy_from_slice(&self.ys[..d]);
            return self.log_scale[0];
        }
        let k = self.locate(x);
        let (x0, x1) = (self.xs[k], self.xs[k + 1]);
        let h = x1 - x0;
        let t = ((x - x0) / h).clamp(0.0, 1.0);
        let r = (self.log_scale[k + 1] - self.log_scale[k]).exp();
        let (y0, y1) = (&self.ys[k * d..(k + 1) * d], &self.ys[(k + 1) * d..(k + 2) * d]);
        let (f0, f1) = (&self.fs[k * d..(k + 1) * d], &self.fs[(k + 1) * d..(k + 2) * d]);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        for i in 0..d {
            out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * r * y1[i] + h11 * h * r * f1[i];
        }
        self.log_scale[k]
    }

    pub fn eval(&self, x: f64) -> (Vec<f64>, f64) {
        let mut out = vec![0.0; self.dim];
        let ls = self.eval_into(x, &mut out);
        (out, ls)
    }

    /// Unit direction and natural log of the magnitude at `x`.
    pub fn dir_logmag(&self, x: f64) -> (Vec<f64>, f64) {
        let (mut y, ls) = self.eval(x);
        let nrm = norm(&y);
        for v in y.iter_mut() {
            *v /= nrm;
        }
        (y, ls + nrm.ln())
    }

    /// State at the last integrated point (in integration order).
    pub fn final_state(&self, forward: bool) -> (Vec<f64>, f64) {
        let k = if forward { self.xs.len() - 1 } else { 0 };
        let (y, ls) = self.node(k);
        (y.to_vec(), ls)
    }
}

#[inline]
pub fn norm(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Integrate `y' = rhs(x, y)` from `x0` to `x1` (either direction).
///
/// `hook`, if given, may modify the state after every accepted step; it
/// returns true when it changed anything.
pub fn integrate<F>(
    mut rhs: F,
    x0: f64,
    x1: f64,
    y0: &[f64],
    opts: &OdeOptions,
    mut hook: Option<&mut dyn FnMut(f64, &mut [f64]) -> bool>,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let d = y0.len();
    let dir = if x1 >= x0 { 1.0 } else { -1.0 };
    let span = (x1 - x0).abs();
    let mut xs = vec![x0];
    let mut ys = y0.to_vec();
    let mut ls = vec![0.0];
    let mut y = y0.to_vec();
    let mut scale = 0.0;
    if opts.renormalize {
        let n0 = norm(&y);
        if n0 == 0.0 || !n0.is_finite() {
            return Err(MaslovError::Integration { x: x0, reason: "zero or non-finite initial state".into() });
        }
        if !(RENORM_LO..=RENORM_HI).contains(&n0) {
            y.iter_mut().for_each(|v| *v /= n0);
            scale = n0.ln();
            ys.copy_from_slice(&y);
            ls[0] = scale;
        }
    }
    let mut k1 = vec![0.0; d];
    rhs(x0, &y, &mut k1);
    let mut fs = k1.clone();
    if span == 0.0 {
        return Ok(Trajectory { dim: d, xs, ys, fs, log_scale: ls });
    }
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut tmp = vec![0.0; d];
    let mut ynew = vec![0.0; d];
    let mut x = x0;
    let mut h = opts.h_init.min(opts.h_max).min(span);
    let mut steps = 0usize;
    let mut last_fail = false;
    while (x1 - x) * dir > 0.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(MaslovError::Integration { x, reason: "step budget exhausted".into() });
        }
        let remaining = (x1 - x).abs();
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        if h < 1e-14 * (1.0 + x.abs()) {
            return Err(MaslovError::Integration { x, reason: "step size underflow".into() });
        }
        let hs = h * dir;
        macro_rules! stage {
            ($out:expr, $c:expr, $($a:expr, $k:expr),+) => {{
                for i in 0..d {
                    tmp[i] = y[i] + hs * (0.0 $(+ $a * $k[i])+);
                }
                rhs(x + $c * hs, &tmp, &mut $out);
            }};
        }
        stage!(k2, C2, A21, k1);
        stage!(k3, C3, A31, k1, A32, k2);
        stage!(k4, C4, A41, k1, A42, k2, A43, k3);
        stage!(k5, C5, A51, k1, A52, k2, A53, k3, A54, k4);
        stage!(k6, 1.0, A61, k1, A62, k2, A63, k3, A64, k4, A65, k5);
        for i in 0..d {
            ynew[i] = y[i] + hs * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        let xnew = if last { x1 } else { x + hs };
        rhs(xnew, &ynew, &mut k7);
        let ynorm = if opts.relative_atol { norm(&y).max(norm(&ynew)) } else { 1.0 };
        let mut err = 0.0;
        for i in 0..d {
            let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol * ynorm + opts.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = (err / d as f64).sqrt();
        if !err.is_finite() {
            h *= 0.25;
            last_fail = true;
            continue;
        }
        if err > 1.0 {
            let fac = (0.9 * err.powf(-0.2)).max(0.2);
            h *= fac;
            last_fail = true;
            continue;
        }
        x = xnew;
        std::mem::swap(&mut y, &mut ynew);
        std::mem::swap(&mut k1, &mut k7);
        if let Some(hk) = hook.as_mut() {
            if hk(x, &mut y) {
                rhs(x, &y, &mut k1);
            }
        }
        if opts.renormalize {
            let n = norm(&y);
            if n == 0.0 || !n.is_finite() {
                return Err(MaslovError::Integration { x, reason: "state collapsed or overflowed".into() });
            }
            if !(RENORM_LO..=RENORM_HI).contains(&n) {
                for i in 0..d {
                    y[i] /= n;
                    k1[i] /= n;
                }
                scale += n.ln();
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(MaslovError::Integration { x, reason: "non-finite state".into() });
        }
        xs.push(x);
        ys.extend_from_slice(&y);
        fs.extend_from_slice(&k1);
        ls.push(scale);
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        let fac = if last_fail { fac.min(1.0) } else { fac };
        h = (h * fac).min(opts.h_max);
        last_fail = false;
    }
    if dir < 0.0 {
        xs.reverse();
        let n = xs.len();
        let mut ys2 = Vec::with_capacity(ys.len());
        let mut fs2 = Vec::with_capacity(fs.len());
        for k in (0..n).rev() {
            ys2.extend_from_slice(&ys[k * d..(k + 1) * d]);
            fs2.extend_from_slice(&fs[k * d..(k + 1) * d]);
        }
        ls.reverse();
        return Ok(Trajectory { dim: d, xs, ys: ys2, fs: fs2, log_scale: ls });
    }
    Ok(Trajectory { dim: d, xs, ys, fs, log_scale: ls })
}

/// Integrate the linear system `y' = M(x) y` where `fill(x, buf)` writes `M`
/// row-major into an `n*n` buffer.
pub fn integrate_linear<G>(
    mut fill: G,
    x0: f64,
    x1: f64,
    y0: &[f64],
    opts: &OdeOptions,
    hook: Option<&mut dyn FnMut(f64, &mut [f64]) -> bool>,
) -> Result<Trajectory>
where
    G: FnMut(f64, &mut [f64]),
{
    let n = y0.len();
    let mut m = vec![0.0; n * n];
    let rhs = move |x: f64, y: &[f64], out: &mut [f64]| {
        fill(x, &mut m);
        for i in 0..n {
            let row = &m[i * n..(i + 1) * n];
            out[i] = row.iter().zip(y).map(|(a, b)| a * b).sum();
        }
    };
    integrate(rhs, x0, x1, y0, opts, hook)
}
