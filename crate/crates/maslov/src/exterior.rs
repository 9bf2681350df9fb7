//! 1-forms, (n-1)-forms and the wedge pairing between them.
//!
//! A [`CoForm`] stores the coefficients of an (n-1)-form in the basis
//! `e1^...^e(n-1), e1^...^e(n-2)^en, ..., e2^...^en`: slot `j` (1-based) is
//! the basis element that omits `e(n+1-j)`. Coefficients are raw minors; every
//! alternating sign lives in [`wedge_top`] and [`coform_to_covector`].

use nalgebra::{DMatrix, DVector};

use crate::error::{MaslovError, Result};

pub type SquareMatrix = DMatrix<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct OneForm(pub DVector<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct CoForm(pub DVector<f64>);

impl OneForm {
    pub fn from_slice(v: &[f64]) -> Self {
        OneForm(DVector::from_column_slice(v))
    }
    pub fn dim(&self) -> usize {
        self.0.len()
    }
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

impl CoForm {
    pub fn from_slice(v: &[f64]) -> Self {
        CoForm(DVector::from_column_slice(v))
    }
    pub fn dim(&self) -> usize {
        self.0.len()
    }
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// Slice form of [`wedge_top`], used in the integrator hot loops.
#[inline]
pub fn wedge_top_slice(v: &[f64], cv: &[f64]) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for i in 0..n {
        let t = v[i] * cv[n - 1 - i];
        if i % 2 == 0 {
            acc += t;
        } else {
            acc -= t;
        }
    }
    acc
}

/// Coefficient of `e1^...^en` in `v ^ V`.
pub fn wedge_top(v: &OneForm, cv: &CoForm) -> Result<f64> {
    if v.dim() != cv.dim() {
        return Err(MaslovError::Precondition(format!(
            "wedge_top dimension mismatch: {} vs {}",
            v.dim(),
            cv.dim()
        )));
    }
    Ok(wedge_top_slice(v.as_slice(), cv.as_slice()))
}

/// The matrix driving the (n-1)-form flow: `a~_ij = (-1)^(i+j+1) a_(n+1-j)(n+1-i)`.
///
/// The wedge of n-1 solutions of `y' = A y` satisfies `Y' = (tr A + A~) Y`.
pub fn induced_matrix(a: &SquareMatrix) -> Result<SquareMatrix> {
    if !a.is_square() {
        return Err(MaslovError::Precondition("induced_matrix needs a square matrix".into()));
    }
    let n = a.nrows();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        // zero-based: (-1)^(i+j+1) with 1-based i,j equals -(-1)^(i+j) here
        let s = if (i + j) % 2 == 0 { -1.0 } else { 1.0 };
        s * a[(n - 1 - j, n - 1 - i)]
    }))
}

/// Row-major slice version of [`induced_matrix`].
#[inline]
pub fn induced_matrix_slice(n: usize, a: &[f64], out: &mut [f64]) {
    for i in 0..n {
        for j in 0..n {
            let s = if (i + j) % 2 == 0 { -1.0 } else { 1.0 };
            out[i * n + j] = s * a[(n - 1 - j) * n + (n - 1 - i)];
        }
    }
}

/// Wedge of the columns of an n x (n-1) matrix, as a CoForm.
pub fn columns_to_coform(cols: &DMatrix<f64>) -> Result<CoForm> {
    let n = cols.nrows();
    if n < 2 || cols.ncols() != n - 1 {
        return Err(MaslovError::Precondition(format!(
            "columns_to_coform expects n x (n-1), got {} x {}",
            cols.nrows(),
            cols.ncols()
        )));
    }
    let mut out = DVector::zeros(n);
    for j in 0..n {
        let skip = n - 1 - j;
        let minor = cols.clone().remove_row(skip);
        out[j] = minor.determinant();
    }
    Ok(CoForm(out))
}

/// Row vector `z` with `z . y = wedge_top(y, V)` for every `y`.
pub fn coform_to_covector(cv: &CoForm) -> DVector<f64> {
    let n = cv.dim();
    DVector::from_fn(n, |j, _| {
        let s = if j % 2 == 0 { 1.0 } else { -1.0 };
        s * cv.0[n - 1 - j]
    })
}

/// Inverse of [`coform_to_covector`].
pub fn covector_to_coform(z: &DVector<f64>) -> CoForm {
    let n = z.len();
    // V_k = (-1)^(n-k) z_(n+1-k), 1-based
    CoForm(DVector::from_fn(n, |k, _| {
        let s = if (n - 1 - k).is_multiple_of(2) { 1.0 } else { -1.0 };
        s * z[n - 1 - k]
    }))
}

/// `wedge_top(A u, U) + wedge_top(u, A~ U)`; zero up to rounding.
pub fn conjugation_residual(a: &SquareMatrix, u: &OneForm, cv: &CoForm) -> Result<f64> {
    let n = a.nrows();
    if !a.is_square() || u.dim() != n || cv.dim() != n {
        return Err(MaslovError::Precondition("conjugation_residual dimension mismatch".into()));
    }
    let au = OneForm(a * &u.0);
    let at = induced_matrix(a)?;
    let atu = CoForm(at * &cv.0);
    Ok(wedge_top(&au, cv)? + wedge_top(u, &atu)?)
}

/// Action of `M` on an (n-1)-form: `(M y1)^...^(M y(n-1))` from `y1^...^y(n-1)`.
///
/// In covector terms this is `z -> z adj(M)`.
pub fn compound_action(m: &SquareMatrix, cv: &CoForm) -> Result<CoForm> {
    let n = m.nrows();
    if !m.is_square() || cv.dim() != n {
        return Err(MaslovError::Precondition("compound_action dimension mismatch".into()));
    }
    let adj = adjugate(m);
    let z = coform_to_covector(cv);
    let zm = adj.transpose() * z;
    Ok(covector_to_coform(&zm))
}

/// Classical adjugate via cofactors (exact for singular matrices too).
pub fn adjugate(m: &SquareMatrix) -> SquareMatrix {
    let n = m.nrows();
    if n == 1 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    DMatrix::from_fn(n, n, |i, j| {
        // adj_ij = (-1)^(i+j) det(M with row j and column i removed)
        let minor = m.clone().remove_row(j).remove_column(i);
        let s = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        s * minor.determinant()
    })
}
