//! The eigenvalue problem `y' = A(x; lambda) y`, its asymptotic matrices and
//! the leading spectral data at `x -> -inf` and `x -> +inf`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{MaslovError, Result};
use crate::exterior::{compound_action, wedge_top, CoForm, OneForm, SquareMatrix};

/// Fills a row-major `n*n` buffer with `A(x; lambda)`.
pub type CoeffFn = Arc<dyn Fn(f64, f64, &mut [f64]) + Send + Sync>;
/// `lambda -> A(+-inf; lambda)`.
pub type AsymFn = Arc<dyn Fn(f64) -> SquareMatrix + Send + Sync>;

pub const GAP_TOL: f64 = 1e-9;

/// How `v-` and `V~+` are scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scaling {
    /// `v- = kappa v^-`, `V~+ = kappa V~^+` with `v^-_1 = 1`, `V~^+_1 = 1` and
    /// `kappa = (v^- ^ V~^+)^(-1/2)`, so that `v- ^ V~+ = 1`. Needs `A- = A+`
    /// up to the point of the wedge being positive.
    Kappa,
    /// `|v-| = 1`, `w+ v+ = 1`, `|V~+| = 1`.
    UnitNorm,
}

#[derive(Clone)]
pub struct SystemDefinition {
    pub n: usize,
    pub coeff: CoeffFn,
    pub a_minus: AsymFn,
    pub a_plus: AsymFn,
    pub m_matrix: SquareMatrix,
    pub label: String,
    pub scaling: Scaling,
    /// Extra factor (+1 or -1) applied to `V~_M+` after the compound action of `M`.
    pub omega2_orientation: f64,
    /// True when `A-(lambda) = A+(lambda)` identically.
    pub symmetric_limits: bool,
}

impl fmt::Debug for SystemDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemDefinition")
            .field("n", &self.n)
            .field("label", &self.label)
            .field("m_matrix", &self.m_matrix)
            .field("scaling", &self.scaling)
            .finish()
    }
}

impl SystemDefinition {
    pub fn coeff_matrix(&self, x: f64, lambda: f64) -> SquareMatrix {
        let n = self.n;
        let mut buf = vec![0.0; n * n];
        (self.coeff)(x, lambda, &mut buf);
        DMatrix::from_row_slice(n, n, &buf)
    }

    /// `dA/dlambda` at `x`, exact for coefficients affine in lambda.
    pub fn a_lambda(&self, x: f64) -> SquareMatrix {
        (self.coeff_matrix(x, 1.0) - self.coeff_matrix(x, -1.0)) * 0.5
    }

    /// Same system with a different `M`.
    pub fn with_m(&self, m: SquareMatrix) -> Result<Self> {
        check_invertible(&m)?;
        let mut s = self.clone();
        s.m_matrix = m;
        s.omega2_orientation = 1.0;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(MaslovError::Precondition("system dimension must be >= 2".into()));
        }
        if self.m_matrix.nrows() != self.n || self.m_matrix.ncols() != self.n {
            return Err(MaslovError::Precondition("M has the wrong shape".into()));
        }
        check_invertible(&self.m_matrix)
    }
}

fn check_invertible(m: &SquareMatrix) -> Result<()> {
    if !m.is_square() || m.determinant().abs() <= 1e-12 {
        return Err(MaslovError::Precondition("M must be invertible".into()));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct AsymptoticSpectrum {
    pub lambda: f64,
    pub mu_minus: f64,
    pub mu_plus: f64,
    pub mu_star_minus: f64,
    pub mu_star_plus: f64,
    pub v_minus: OneForm,
    pub v_plus: OneForm,
    pub w_plus: DVector<f64>,
    pub vtilde_plus: CoForm,
    pub vtilde_m_plus: CoForm,
    pub kappa: f64,
    /// Eigenvalues of `A+(lambda)`, sorted by descending real part.
    pub plus_eigenvalues: Vec<Complex<f64>>,
}

#[derive(Debug, Clone)]
pub struct LeadingPair {
    pub mu: f64,
    /// Largest real part among the remaining eigenvalues.
    pub mu_star: f64,
    pub v: DVector<f64>,
    pub w: DVector<f64>,
    pub eigenvalues: Vec<Complex<f64>>,
}

/// Eigenvalues sorted by descending real part, ties by ascending imaginary part.
pub fn sorted_eigenvalues(a: &SquareMatrix) -> Vec<Complex<f64>> {
    let mut ev: Vec<Complex<f64>> = if a.nrows() == 3 {
        cardano_eigenvalues(a).to_vec()
    } else {
        a.clone().complex_eigenvalues().iter().copied().collect()
    };
    ev.sort_by(|p, q| {
        q.re.partial_cmp(&p.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(p.im.partial_cmp(&q.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    ev
}

/// Roots of the characteristic polynomial of a 3x3 matrix in closed form.
pub fn cardano_eigenvalues(a: &SquareMatrix) -> [Complex<f64>; 3] {
    let tr = a.trace();
    let m2 = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)] + a[(0, 0)] * a[(2, 2)]
        - a[(0, 2)] * a[(2, 0)]
        + a[(1, 1)] * a[(2, 2)]
        - a[(1, 2)] * a[(2, 1)];
    let det = a.determinant();
    // mu^3 + b mu^2 + c mu + d
    let (b, c, d) = (-tr, m2, -det);
    let poly = |m: f64| ((m + b) * m + c) * m + d;
    let dpoly = |m: f64| (3.0 * m + 2.0 * b) * m + c;
    let polish = |mut m: f64| {
        for _ in 0..4 {
            let dp = dpoly(m);
            if dp == 0.0 {
                break;
            }
            let step = poly(m) / dp;
            if !step.is_finite() {
                break;
            }
            m -= step;
        }
        m
    };
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = 4.0 * p * p * p + 27.0 * q * q;
    if disc < 0.0 {
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * r)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        let two_pi_3 = 2.0 * std::f64::consts::PI / 3.0;
        let roots = [0, 1, 2].map(|k| polish(r * (phi - two_pi_3 * k as f64).cos() - shift));
        roots.map(|x| Complex::new(x, 0.0))
    } else {
        let s = (disc / 108.0).sqrt();
        let t = (-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt();
        let r = polish(t - shift);
        // deflate: mu^2 + (b + r) mu + (c + r (b + r))
        let bb = b + r;
        let cc = c + r * bb;
        let dd = bb * bb - 4.0 * cc;
        if dd >= 0.0 {
            let sq = dd.sqrt();
            let r1 = if bb >= 0.0 { (-bb - sq) / 2.0 } else { (-bb + sq) / 2.0 };
            let r2 = if r1 != 0.0 { cc / r1 } else { -bb - r1 };
            [r, polish(r1), polish(r2)].map(|x| Complex::new(x, 0.0))
        } else {
            let im = (-dd).sqrt() / 2.0;
            [Complex::new(r, 0.0), Complex::new(-bb / 2.0, im), Complex::new(-bb / 2.0, -im)]
        }
    }
}

/// Unit null vector of a (numerically) singular real matrix.
pub fn null_vector(b: &SquareMatrix) -> DVector<f64> {
    let n = b.nrows();
    if n == 3 {
        let row = |i: usize| nalgebra::Vector3::new(b[(i, 0)], b[(i, 1)], b[(i, 2)]);
        let cands = [row(0).cross(&row(1)), row(0).cross(&row(2)), row(1).cross(&row(2))];
        let best = cands
            .iter()
            .max_by(|p, q| p.norm().partial_cmp(&q.norm()).unwrap())
            .unwrap();
        if best.norm() > 1e-300 {
            let c = best / best.norm();
            return DVector::from_column_slice(c.as_slice());
        }
    }
    let svd = b.clone().svd(false, true);
    let vt = svd.v_t.expect("svd requested v_t");
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|p, q| p.1.partial_cmp(q.1).unwrap())
        .unwrap();
    vt.row(imin).transpose()
}

/// Flip so that the first component of non-negligible size is positive.
pub fn sign_normalize(v: &mut DVector<f64>) {
    let scale = v.amax();
    if let Some(x) = v.iter().find(|x| x.abs() > 1e-8 * scale) {
        if *x < 0.0 {
            v.neg_mut();
        }
    }
}

/// Flip `v` to have a non-negative dot product with `prev`.
pub fn align_sign(v: &mut DVector<f64>, prev: &DVector<f64>) {
    if v.dot(prev) < 0.0 {
        v.neg_mut();
    }
}

/// Simple real eigenvalue of largest real part with right/left eigenvectors,
/// `w v = 1`, `v` sign-normalized.
pub fn leading_eigenpair(a: &SquareMatrix) -> Result<LeadingPair> {
    if !a.is_square() || a.nrows() < 2 {
        return Err(MaslovError::Precondition("leading_eigenpair needs a square matrix, n >= 2".into()));
    }
    let ev = sorted_eigenvalues(a);
    let (l0, l1) = (ev[0], ev[1]);
    let scale = 1.0 + l0.norm();
    if l0.im.abs() > GAP_TOL * scale || l0.re - l1.re <= GAP_TOL {
        return Err(MaslovError::AssumptionC { mu1: fmt_c(l0), mu2: fmt_c(l1) });
    }
    let mu = l0.re;
    let n = a.nrows();
    let shifted = a - DMatrix::identity(n, n) * mu;
    let mut v = null_vector(&shifted);
    sign_normalize(&mut v);
    let mut w = null_vector(&shifted.transpose());
    let wv = w.dot(&v);
    if wv.abs() < 1e-14 {
        return Err(MaslovError::Degenerate("left and right eigenvectors are orthogonal".into()));
    }
    w /= wv;
    Ok(LeadingPair { mu, mu_star: l1.re, v, w, eigenvalues: ev })
}

fn fmt_c(z: Complex<f64>) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else {
        format!("{}{:+}i", z.re, z.im)
    }
}

/// `V~_j = (-1)^(n-j) w_(n+1-j)`; the CoForm whose covector is `w`.
pub fn tilde_eigvec_from_left(w: &DVector<f64>) -> CoForm {
    crate::exterior::covector_to_coform(w)
}

/// Leading spectral data at both ends for a real `lambda`.
pub fn spectral_data(sys: &SystemDefinition, lambda: f64) -> Result<AsymptoticSpectrum> {
    let am = (sys.a_minus)(lambda);
    let ap = (sys.a_plus)(lambda);
    let lm = leading_eigenpair(&am)?;
    let lp = leading_eigenpair(&ap)?;
    let (v_minus, vtilde_plus, kappa) = match sys.scaling {
        Scaling::Kappa => {
            let mut vh = lm.v.clone();
            vh /= vh[0];
            let mut vt = tilde_eigvec_from_left(&lp.w).0;
            vt /= vt[0];
            let pairing = wedge_top(&OneForm(vh.clone()), &CoForm(vt.clone()))?;
            if !(pairing > 0.0) {
                return Err(MaslovError::Inapplicable(format!(
                    "kappa scaling needs a positive pairing, got {pairing} at lambda = {lambda}"
                )));
            }
            let k = 1.0 / pairing.sqrt();
            (vh * k, vt * k, k)
        }
        Scaling::UnitNorm => {
            let v = lm.v.normalize();
            let vt = tilde_eigvec_from_left(&lp.w).0;
            let vt = &vt / vt.norm();
            (v, vt, 1.0)
        }
    };
    let vtilde_plus = CoForm(vtilde_plus);
    let mut vm = compound_action(&sys.m_matrix, &vtilde_plus)?;
    vm.0 *= sys.omega2_orientation;
    Ok(AsymptoticSpectrum {
        lambda,
        mu_minus: lm.mu,
        mu_plus: lp.mu,
        mu_star_minus: lm.mu_star,
        mu_star_plus: lp.mu_star,
        v_minus: OneForm(v_minus),
        v_plus: OneForm(lp.v.clone()),
        w_plus: lp.w.clone(),
        vtilde_plus,
        vtilde_m_plus: vm,
        kappa,
        plus_eigenvalues: lp.eigenvalues,
    })
}

/// The point where the two non-leading roots of `mu^3 - s mu + lambda` merge.
pub fn coalescence_lambda_gkdv(s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(MaslovError::Domain(format!("coalescence needs s > 0, got {s}")));
    }
    Ok(-2.0 * (s / 3.0).powf(1.5))
}
