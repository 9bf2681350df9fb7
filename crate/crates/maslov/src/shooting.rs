//! Rescaled shooting for `eta-` (forward from `-L`) and `Y~+` (backward from
//! `+L`), and the normalized detection pair built from them.

use nalgebra::DVector;

use crate::error::{MaslovError, Result};
use crate::exterior::{
    adjugate, coform_to_covector, induced_matrix_slice, wedge_top_slice, CoForm, OneForm,
};
use crate::ode::{integrate_linear, norm, OdeOptions, Trajectory};
use crate::spectral::{null_vector, spectral_data, AsymptoticSpectrum, SystemDefinition, GAP_TOL};

/// Below this sine between `eta-(x_m)` and the plane `ker z(x_m)` the column
/// is treated as sitting on an eigenvalue and its `x > x_m` part is stabilized.
pub const EIGEN_EDGE_TOL: f64 = 1e-8;
/// Parallelism required before the backward fastest-decaying solution is used.
const PARALLEL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationChoice {
    pub l_minus: f64,
    pub l_plus: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl TruncationChoice {
    pub fn symmetric(l: f64) -> Self {
        TruncationChoice { l_minus: l, l_plus: l, rtol: 1e-10, atol: 1e-12 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l_minus > 0.0 && self.l_plus > 0.0) {
            return Err(MaslovError::Config("truncation lengths must be positive".into()));
        }
        for t in [self.rtol, self.atol] {
            if !(t > 0.0 && t <= 1e-4) {
                return Err(MaslovError::Config(format!("tolerance {t} outside (0, 1e-4]")));
            }
        }
        Ok(())
    }

    pub fn ode_options(&self) -> OdeOptions {
        OdeOptions { rtol: self.rtol, atol: self.atol, ..Default::default() }
    }

    pub fn doubled(&self) -> Self {
        TruncationChoice { l_minus: 2.0 * self.l_minus, l_plus: 2.0 * self.l_plus, ..*self }
    }
}

/// Smallest `L` in `[10, 500]` with `|A(+-x; lambda) - A+-(lambda)| < tol * gap`
/// for all `x >= L` on a 0.25 grid and all sampled lambda.
pub fn select_truncation(sys: &SystemDefinition, lambda_range: (f64, f64), tol: f64) -> Result<TruncationChoice> {
    let (l_lo, l_hi) = (10.0, 500.0);
    let nl = 9;
    let lambdas: Vec<f64> = (0..nl)
        .map(|k| lambda_range.0 + (lambda_range.1 - lambda_range.0) * k as f64 / (nl - 1) as f64)
        .collect();
    let mut gap_m = f64::INFINITY;
    let mut gap_p = f64::INFINITY;
    for &l in &lambdas {
        let sp = spectral_data(sys, l)?;
        gap_m = gap_m.min(sp.mu_minus - sp.mu_star_minus);
        gap_p = gap_p.min(sp.mu_plus - sp.mu_star_plus);
    }
    let side = |sign: f64, gap: f64| -> Result<f64> {
        let step = 0.25;
        let mut x = l_hi;
        let mut worst = l_lo;
        let mut violated_at_end = false;
        while x >= l_lo {
            let bad = lambdas.iter().any(|&l| {
                let a = sys.coeff_matrix(sign * x, l);
                let lim = if sign > 0.0 { (sys.a_plus)(l) } else { (sys.a_minus)(l) };
                (a - lim).norm() >= tol * gap
            });
            if bad {
                if x == l_hi {
                    violated_at_end = true;
                }
                worst = x + step;
                break;
            }
            x -= step;
        }
        if violated_at_end {
            return Err(MaslovError::Config(format!(
                "coefficient tolerance {tol} not reached within L <= {l_hi}"
            )));
        }
        Ok(worst.max(l_lo))
    };
    let lm = side(-1.0, gap_m)?;
    let lp = side(1.0, gap_p)?;
    Ok(TruncationChoice { l_minus: lm, l_plus: lp, rtol: 1e-10, atol: 1e-12 })
}

fn shifted_coeff(sys: &SystemDefinition, lambda: f64, shift: f64) -> impl FnMut(f64, &mut [f64]) + '_ {
    let n = sys.n;
    move |x, buf| {
        (sys.coeff)(x, lambda, buf);
        for i in 0..n {
            buf[i * n + i] -= shift;
        }
    }
}

fn induced_shifted(sys: &SystemDefinition, lambda: f64, shift: f64) -> impl FnMut(f64, &mut [f64]) + '_ {
    let n = sys.n;
    let mut a = vec![0.0; n * n];
    move |x, buf| {
        (sys.coeff)(x, lambda, &mut a);
        induced_matrix_slice(n, &a, buf);
        for i in 0..n {
            buf[i * n + i] += shift;
        }
    }
}

/// `u' = (A - mu- I) u` forward from `-L` with `u(-L) = v-`.
pub fn integrate_eta_minus(sys: &SystemDefinition, lambda: f64, trunc: &TruncationChoice) -> Result<Trajectory> {
    let sp = spectral_data(sys, lambda)?;
    eta_from_spec(sys, &sp, trunc, trunc.l_plus)
}

fn eta_from_spec(
    sys: &SystemDefinition,
    sp: &AsymptoticSpectrum,
    trunc: &TruncationChoice,
    x_end: f64,
) -> Result<Trajectory> {
    integrate_linear(
        shifted_coeff(sys, sp.lambda, sp.mu_minus),
        -trunc.l_minus,
        x_end,
        sp.v_minus.as_slice(),
        &trunc.ode_options(),
        None,
    )
}

/// `U' = (A~ + mu+ I) U` backward from `+L` with `U(L) = V~+`.
pub fn integrate_ytilde_plus(sys: &SystemDefinition, lambda: f64, trunc: &TruncationChoice) -> Result<Trajectory> {
    let sp = spectral_data(sys, lambda)?;
    ytilde_from_spec(sys, &sp, trunc, -trunc.l_minus)
}

fn ytilde_from_spec(
    sys: &SystemDefinition,
    sp: &AsymptoticSpectrum,
    trunc: &TruncationChoice,
    x_end: f64,
) -> Result<Trajectory> {
    integrate_linear(
        induced_shifted(sys, sp.lambda, sp.mu_plus),
        trunc.l_plus,
        x_end,
        sp.vtilde_plus.as_slice(),
        &trunc.ode_options(),
        None,
    )
}

/// Detection pair from a 1-form and the spectral data (the `c -> inf` form).
pub fn psi_pair_at(u: &OneForm, spec: &AsymptoticSpectrum) -> Result<(f64, f64)> {
    let nu = u.norm();
    if nu == 0.0 || !nu.is_finite() {
        return Err(MaslovError::Degenerate("psi_pair_at called with u = 0".into()));
    }
    let nv = spec.vtilde_plus.norm();
    let w1 = wedge_top_slice(u.as_slice(), spec.vtilde_plus.as_slice());
    let w2 = wedge_top_slice(u.as_slice(), spec.vtilde_m_plus.as_slice());
    Ok((w1 / (nu * nv), w2 / (nu * nv)))
}

#[derive(Debug, Clone)]
enum Tail {
    /// Backward solution of `w' = (A - mu_f I) w`; `eta = sign * e^(off + mu_f x) w`.
    Backward { traj: Trajectory, mu_f: f64, offset: f64, sign: f64 },
    /// Forward continuation projected onto `ker z(x)` after every step.
    Projected { traj: Trajectory, offset: f64 },
}

/// How a column decides whether to stabilize its right half.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdgeMode {
    #[default]
    Auto,
    Force,
    Never,
}

/// Everything computed at one lambda: both rescaled solutions, plus the
/// stabilized continuation of `eta-` when lambda is an eigenvalue.
#[derive(Debug, Clone)]
pub struct ColumnPath {
    pub lambda: f64,
    pub spec: AsymptoticSpectrum,
    pub trunc: TruncationChoice,
    pub eta: Trajectory,
    pub ytilde: Option<Trajectory>,
    pub eigen_edge: bool,
    pub x_m: f64,
    /// Sine between `eta-(x_m)` and `ker z(x_m)`, when `ytilde` exists.
    pub edge_sine: Option<f64>,
    tail: Option<Tail>,
    adj_t: Vec<f64>,
    orientation: f64,
    n: usize,
}

impl ColumnPath {
    /// Forward solution only, up to `x_end`. Cheap; no stabilization.
    pub fn eta_only(sys: &SystemDefinition, lambda: f64, trunc: &TruncationChoice, x_end: f64) -> Result<Self> {
        let spec = spectral_data(sys, lambda)?;
        let eta = eta_from_spec(sys, &spec, trunc, x_end.min(trunc.l_plus).max(-trunc.l_minus))?;
        Ok(Self::assemble(sys, spec, *trunc, eta, None))
    }

    /// Both solutions over the whole truncation window, with automatic
    /// stabilization at eigenvalue columns.
    pub fn full(sys: &SystemDefinition, lambda: f64, trunc: &TruncationChoice) -> Result<Self> {
        Self::full_with(sys, lambda, trunc, EdgeMode::Auto)
    }

    pub fn full_with(sys: &SystemDefinition, lambda: f64, trunc: &TruncationChoice, mode: EdgeMode) -> Result<Self> {
        let spec = spectral_data(sys, lambda)?;
        let eta = eta_from_spec(sys, &spec, trunc, trunc.l_plus)?;
        let yt = ytilde_from_spec(sys, &spec, trunc, -trunc.l_minus)?;
        let mut col = Self::assemble(sys, spec, *trunc, eta, Some(yt));
        col.x_m = 0.0f64.clamp(-trunc.l_minus, trunc.l_plus);
        let sine = col.kernel_sine(col.x_m);
        col.edge_sine = Some(sine);
        let edge = match mode {
            EdgeMode::Auto => sine < EIGEN_EDGE_TOL,
            EdgeMode::Force => true,
            EdgeMode::Never => false,
        };
        if edge {
            col.tail = Some(col.build_tail(sys)?);
            col.eigen_edge = true;
        }
        Ok(col)
    }

    fn assemble(
        sys: &SystemDefinition,
        spec: AsymptoticSpectrum,
        trunc: TruncationChoice,
        eta: Trajectory,
        ytilde: Option<Trajectory>,
    ) -> Self {
        let adj = adjugate(&sys.m_matrix);
        let n = sys.n;
        let adj_t: Vec<f64> = (0..n * n).map(|k| adj[(k % n, k / n)]).collect();
        ColumnPath {
            lambda: spec.lambda,
            spec,
            trunc,
            eta,
            ytilde,
            eigen_edge: false,
            x_m: f64::INFINITY,
            edge_sine: None,
            tail: None,
            adj_t,
            orientation: sys.omega2_orientation,
            n,
        }
    }

    fn build_tail(&self, sys: &SystemDefinition) -> Result<Tail> {
        let n = self.n;
        let xm = self.x_m;
        let (udir, ulog) = self.eta_raw(xm);
        let ev = &self.spec.plus_eigenvalues;
        let (last, prev) = (ev[n - 1], ev[n - 2]);
        if last.im.abs() <= GAP_TOL && prev.re - last.re > GAP_TOL {
            let mu_f = last.re;
            let ap = (sys.a_plus)(self.lambda);
            let mut vf = null_vector(&(ap - nalgebra::DMatrix::identity(n, n) * mu_f));
            crate::spectral::sign_normalize(&mut vf);
            let traj = integrate_linear(
                shifted_coeff(sys, self.lambda, mu_f),
                self.trunc.l_plus,
                xm,
                vf.as_slice(),
                &self.trunc.ode_options(),
                None,
            )?;
            let (wd, wlog) = traj.dir_logmag(xm);
            let cos: f64 = wd.iter().zip(&udir).map(|(a, b)| a * b).sum();
            let sine = (1.0 - cos * cos).max(0.0).sqrt();
            if sine < PARALLEL_TOL {
                // eta(x_m) = sign * e^(offset + mu_f x_m) |w(x_m)| dir
                let offset = ulog - wlog - mu_f * xm;
                let sign = cos.signum();
                return Ok(Tail::Backward { traj, mu_f, offset, sign });
            }
        }
        let yt = self.ytilde.as_ref().expect("full column has ytilde");
        let (y0, ls0) = self.eta.eval(xm);
        let mut ubuf = vec![0.0; n];
        let mut hook = |x: f64, y: &mut [f64]| {
            yt.eval_into(x, &mut ubuf);
            let z = covector_slice(&ubuf);
            let zz: f64 = z.iter().map(|v| v * v).sum();
            let zy: f64 = z.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
            let c = zy / zz;
            for i in 0..y.len() {
                y[i] -= c * z[i];
            }
            true
        };
        let traj = integrate_linear(
            shifted_coeff(sys, self.lambda, self.spec.mu_minus),
            xm,
            self.trunc.l_plus,
            &y0,
            &self.trunc.ode_options(),
            Some(&mut hook),
        )?;
        Ok(Tail::Projected { traj, offset: ls0 })
    }

    /// Unit direction of the unstabilized forward solution and
    /// `log|eta-(x)|` (including the `e^(mu- x)` factor).
    fn eta_raw(&self, x: f64) -> (Vec<f64>, f64) {
        let (d, lm) = self.eta.dir_logmag(x);
        (d, lm + self.spec.mu_minus * x)
    }

    /// Unit direction of `eta-(x)` and `log|eta-(x)|`.
    pub fn eta_at(&self, x: f64) -> (Vec<f64>, f64) {
        match &self.tail {
            Some(Tail::Backward { traj, mu_f, offset, sign }) if x > self.x_m => {
                let (mut d, lm) = traj.dir_logmag(x);
                d.iter_mut().for_each(|v| *v *= sign);
                (d, lm + offset + mu_f * x)
            }
            Some(Tail::Projected { traj, offset }) if x > self.x_m => {
                let (d, lm) = traj.dir_logmag(x);
                (d, lm + offset + self.spec.mu_minus * x)
            }
            _ => self.eta_raw(x),
        }
    }

    /// Unit direction of `Y~+(x)` and `log|Y~+(x)|`.
    pub fn ytilde_at(&self, x: f64) -> Result<(Vec<f64>, f64)> {
        let yt = self
            .ytilde
            .as_ref()
            .ok_or_else(|| MaslovError::Precondition("column was built without Y~+".into()))?;
        let (d, lm) = yt.dir_logmag(x);
        Ok((d, lm - self.spec.mu_plus * x))
    }

    fn kernel_sine(&self, x: f64) -> f64 {
        let (u, _) = self.eta_raw(x);
        match self.ytilde_at(x) {
            Ok((yv, _)) => wedge_top_slice(&u, &yv).abs(),
            Err(_) => f64::NAN,
        }
    }

    /// `(psi1, psi2)` against `V~+` and `V~_M+`.
    pub fn psi_plus(&self, x: f64) -> (f64, f64) {
        let (u, _) = self.eta_at(x);
        let nv = self.spec.vtilde_plus.norm();
        (
            wedge_top_slice(&u, self.spec.vtilde_plus.as_slice()) / nv,
            wedge_top_slice(&u, self.spec.vtilde_m_plus.as_slice()) / nv,
        )
    }

    /// `(psi1, psi2)` of the finite-`c` pair at `x = c`; `psi1` has the sign of `D(lambda)`.
    pub fn psi_c(&self, c: f64) -> Result<(f64, f64)> {
        let (u, _) = self.eta_at(c);
        let (yv, _) = self.ytilde_at(c)?;
        let zm = self.compound_covector(&yv);
        let w1 = wedge_top_slice(&u, &yv);
        let w2: f64 = zm.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() * self.orientation;
        Ok((w1, w2))
    }

    fn compound_covector(&self, cv: &[f64]) -> Vec<f64> {
        let n = self.n;
        let z = covector_slice(cv);
        (0..n).map(|i| (0..n).map(|j| self.adj_t[i * n + j] * z[j]).sum()).collect()
    }

    /// `D(lambda) = eta- ^ Y~+` evaluated at `x`.
    pub fn evans(&self, x: f64) -> Result<f64> {
        let (u, lu) = self.eta_at(x);
        let (yv, ly) = self.ytilde_at(x)?;
        Ok((lu + ly).exp() * wedge_top_slice(&u, &yv))
    }

    /// Sampled path of the two rescaled solutions.
    pub fn solution_path(&self, xs: &[f64]) -> Result<SolutionPath> {
        let mut u_minus = Vec::with_capacity(xs.len());
        let mut u_tilde_plus = Vec::with_capacity(xs.len());
        let yt = self
            .ytilde
            .as_ref()
            .ok_or_else(|| MaslovError::Precondition("column was built without Y~+".into()))?;
        for &x in xs {
            let (d, lm) = self.eta_at(x);
            let s = (lm - self.spec.mu_minus * x).exp();
            u_minus.push(OneForm(DVector::from_iterator(d.len(), d.into_iter().map(|v| v * s))));
            let (y, ls) = yt.eval(x);
            let s = ls.exp();
            u_tilde_plus.push(CoForm(DVector::from_iterator(y.len(), y.into_iter().map(|v| v * s))));
        }
        Ok(SolutionPath { xs: xs.to_vec(), u_minus, u_tilde_plus, lambda: self.lambda })
    }
}

#[inline]
fn covector_slice(cv: &[f64]) -> Vec<f64> {
    let n = cv.len();
    (0..n).map(|j| if j % 2 == 0 { cv[n - 1 - j] } else { -cv[n - 1 - j] }).collect()
}

/// Rescaled solutions `u-` and `U~+` sampled on a grid.
#[derive(Debug, Clone)]
pub struct SolutionPath {
    pub xs: Vec<f64>,
    pub u_minus: Vec<OneForm>,
    pub u_tilde_plus: Vec<CoForm>,
    pub lambda: f64,
}

/// The finite-`c` detection pair at `x = c`.
pub fn finite_c_pair(sys: &SystemDefinition, lambda: f64, c: f64, trunc: &TruncationChoice) -> Result<(f64, f64)> {
    if c < -trunc.l_minus || c > trunc.l_plus {
        return Err(MaslovError::Precondition(format!("c = {c} outside the truncation window")));
    }
    ColumnPath::full(sys, lambda, trunc)?.psi_c(c)
}

/// Cosine similarity helper used by oracle comparisons.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    d / (norm(a) * norm(b))
}

/// Covector of a CoForm as a plain vector (convenience re-export).
pub fn covector(cv: &CoForm) -> Vec<f64> {
    coform_to_covector(cv).as_slice().to_vec()
}
