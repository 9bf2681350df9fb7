//! Evans function `D(lambda) = eta- ^ Y~+`, its derivatives at `lambda = 0`,
//! the `lambda -> -inf` trend and the corner increment at `(0, c)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MaslovError, Result};
use crate::exterior::wedge_top_slice;
use crate::models::gkdv::{simpson, GkdvModel};
use crate::shooting::{ColumnPath, TruncationChoice};
use crate::spectral::SystemDefinition;

/// `|D(0)|` below which the translation zero is accepted.
pub const ZERO_TOL: f64 = 1e-8;
const QUAD_NODES: usize = 8001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvansSample {
    pub lambda: f64,
    pub value: f64,
    pub x_match: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMethod {
    ClosedForm,
    Quadrature,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub d0: f64,
    pub d1: f64,
    pub d2: Option<f64>,
    pub method: DerivativeMethod,
}

pub fn evans_at(sys: &SystemDefinition, lambda: f64, x_match: f64, trunc: &TruncationChoice) -> Result<EvansSample> {
    let col = ColumnPath::full(sys, lambda, trunc)?;
    Ok(EvansSample { lambda, value: col.evans(x_match)?, x_match })
}

/// `D` on a lambda grid, matched at `x_match`.
pub fn evans_sweep(
    sys: &SystemDefinition,
    lambdas: &[f64],
    x_match: f64,
    trunc: &TruncationChoice,
) -> Result<Vec<EvansSample>> {
    lambdas.par_iter().map(|&l| evans_at(sys, l, x_match, trunc)).collect()
}

/// Brackets `(a, b)` of consecutive samples where `D` changes sign.
pub fn sign_change_brackets(samples: &[EvansSample]) -> Vec<(f64, f64)> {
    samples
        .windows(2)
        .filter(|w| w[0].value != 0.0 && w[1].value != 0.0 && w[0].value.signum() != w[1].value.signum())
        .map(|w| (w[0].lambda, w[1].lambda))
        .collect()
}

/// `D'(0) = int (A_lambda eta-) ^ Y~+ dx` by composite Simpson on the window.
pub fn evans_dprime0(sys: &SystemDefinition, trunc: &TruncationChoice) -> Result<DerivativeReport> {
    let col = ColumnPath::full(sys, 0.0, trunc)?;
    let d0 = col.evans(0.0)?;
    if d0.abs() > ZERO_TOL {
        return Err(MaslovError::Inapplicable(format!("D(0) = {d0:e} does not vanish")));
    }
    let d1 = quadrature(&col, sys, trunc, |v| v)?;
    Ok(DerivativeReport { d0, d1, d2: None, method: DerivativeMethod::Quadrature })
}

/// `int |(A_lambda eta-) ^ Y~+| dx`, the natural scale for judging `D'(0) = 0`.
pub fn evans_dprime0_scale(sys: &SystemDefinition, trunc: &TruncationChoice) -> Result<f64> {
    let col = ColumnPath::full(sys, 0.0, trunc)?;
    quadrature(&col, sys, trunc, f64::abs)
}

fn quadrature<G: Fn(f64) -> f64>(
    col: &ColumnPath,
    sys: &SystemDefinition,
    trunc: &TruncationChoice,
    g: G,
) -> Result<f64> {
    let n = sys.n;
    let integrand = |x: f64| -> f64 {
        let (u, lu) = col.eta_at(x);
        let (y, ly) = match col.ytilde_at(x) {
            Ok(v) => v,
            Err(_) => return f64::NAN,
        };
        let al = sys.a_lambda(x);
        let au: Vec<f64> = (0..n).map(|i| (0..n).map(|j| al[(i, j)] * u[j]).sum()).collect();
        g((lu + ly).exp() * wedge_top_slice(&au, &y))
    };
    let v = simpson(integrand, -trunc.l_minus, trunc.l_plus, QUAD_NODES);
    if !v.is_finite() {
        return Err(MaslovError::Integration { x: f64::NAN, reason: "non-finite D'(0) integrand".into() });
    }
    Ok(v)
}

/// `D''(0) = k- k+ c_p d/ds(alpha^2/gamma)` for gKdV.
pub fn evans_d2prime0_gkdv(model: &GkdvModel) -> Result<DerivativeReport> {
    if (model.p - 4.0).abs() < 1e-12 {
        return Err(MaslovError::Degenerate("p = 4: D''(0) vanishes identically".into()));
    }
    let k0 = model.kappa0();
    let d2 = model.k_minus(k0) * model.k_plus(k0) * model.c_p() * model.d_ds_alpha2_over_gamma();
    Ok(DerivativeReport { d0: 0.0, d1: 0.0, d2: Some(d2), method: DerivativeMethod::ClosedForm })
}

/// One-sided second difference `(D(-2h) - 2 D(-h) + D(0)) / h^2`.
pub fn evans_d2_finite_difference(sys: &SystemDefinition, h: f64, trunc: &TruncationChoice) -> Result<DerivativeReport> {
    let v = evans_sweep(sys, &[0.0, -h, -2.0 * h], 0.0, trunc)?;
    let (d0, d1m, d2m) = (v[0].value, v[1].value, v[2].value);
    let d1 = (3.0 * d0 - 4.0 * d1m + d2m) / (2.0 * h);
    let d2 = (d2m - 2.0 * d1m + d0) / (h * h);
    Ok(DerivativeReport { d0, d1, d2: Some(d2), method: DerivativeMethod::FiniteDifference })
}

/// `D(lambda_probe)`, which tends to 1 as `lambda -> -inf` when the two
/// asymptotic matrices coincide.
pub fn evans_infinity_check(sys: &SystemDefinition, lambda_probe: f64, trunc: &TruncationChoice) -> Result<f64> {
    if !sys.symmetric_limits {
        return Err(MaslovError::Inapplicable(format!(
            "{}: A- and A+ differ, so D has no normalized limit at -inf",
            sys.label
        )));
    }
    Ok(evans_at(sys, lambda_probe, 0.0, trunc)?.value)
}

/// Increment at the corner `(0, c)`: `+1` when the tracking point reaches the
/// crossing counterclockwise as `lambda -> 0-`, else 0. `d_sign` is the sign
/// of the first nonvanishing derivative `D^(order)(0)`, so that
/// `sgn D(0-) = d_sign (-1)^order`; `psi2_sign` is the sign of `psi2` at large `x`.
pub fn corner_increment(d_sign: i32, order: u32, psi2_sign: i32) -> Result<i64> {
    if d_sign == 0 || psi2_sign == 0 {
        return Err(MaslovError::Degenerate("corner increment undecidable: zero sign".into()));
    }
    let below = d_sign.signum() * if order.is_multiple_of(2) { 1 } else { -1 };
    Ok(if below * psi2_sign.signum() < 0 { 1 } else { 0 })
}
