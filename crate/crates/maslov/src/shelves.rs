//! Shelves of the Maslov box, the boundary invariant, top-shelf eigenvalue
//! detection, invariance-loss scanning and the eigenvalue-count bound.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MaslovError, Result};
use crate::exterior::{compound_action, SquareMatrix};
use crate::index::{
    crossing_count, crossing_direction, lift_angle, shelf_index, CrossingEvent, CrossingKind, IndexOptions,
    PsiSource, ShelfResult,
};
use crate::shooting::{ColumnPath, TruncationChoice};
use crate::spectral::SystemDefinition;

/// Relative `|psi1|` below which the tail of a full-line path is taken to
/// have arrived at an asymptotic crossing.
pub const TAIL_TOL: f64 = 1e-8;
const CACHE_LIMIT: usize = 4096;
/// Relative size of `psi1` at a window endpoint treated as an exact zero.
pub const ENDPOINT_ZERO: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxWindow {
    pub lambda: (f64, f64),
    pub x: (f64, f64),
}

impl BoxWindow {
    pub fn new(l1: f64, l2: f64, c1: f64, c2: f64) -> Result<Self> {
        if !(l1 < l2) || !(c1 < c2) {
            return Err(MaslovError::Config(format!("empty box [{l1},{l2}] x [{c1},{c2}]")));
        }
        Ok(BoxWindow { lambda: (l1, l2), x: (c1, c2) })
    }
}

impl ColumnPath {
    /// The same column with `V~_M+` rebuilt from another `M`.
    pub fn with_m(&self, m: &SquareMatrix) -> Result<ColumnPath> {
        let mut c = self.clone();
        c.spec.vtilde_m_plus = compound_action(m, &self.spec.vtilde_plus)?;
        Ok(c)
    }
}

/// `(lambda, x) -> (psi1, psi2)` with columns cached per lambda.
pub struct PsiField<'a> {
    pub sys: &'a SystemDefinition,
    pub trunc: TruncationChoice,
    pub x_cap: f64,
    cache: Mutex<HashMap<u64, Arc<ColumnPath>>>,
    pinned: Vec<Arc<ColumnPath>>,
}

impl<'a> PsiField<'a> {
    pub fn new(sys: &'a SystemDefinition, trunc: TruncationChoice, x_cap: f64) -> Self {
        PsiField { sys, trunc, x_cap, cache: Mutex::new(HashMap::new()), pinned: Vec::new() }
    }

    /// Use this column whenever its exact lambda is requested.
    pub fn pin(&mut self, col: Arc<ColumnPath>) {
        self.pinned.push(col);
    }

    pub fn column(&self, lambda: f64) -> Result<Arc<ColumnPath>> {
        if let Some(c) = self.pinned.iter().find(|c| c.lambda.to_bits() == lambda.to_bits()) {
            return Ok(c.clone());
        }
        let key = lambda.to_bits();
        if let Some(c) = self.cache.lock().unwrap().get(&key) {
            return Ok(c.clone());
        }
        let col = Arc::new(ColumnPath::eta_only(self.sys, lambda, &self.trunc, self.x_cap)?);
        let mut g = self.cache.lock().unwrap();
        if g.len() >= CACHE_LIMIT {
            g.clear();
        }
        g.insert(key, col.clone());
        Ok(col)
    }

    pub fn psi(&self, lambda: f64, x: f64) -> Result<(f64, f64)> {
        Ok(self.column(lambda)?.psi_plus(x))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxResult {
    pub bottom: ShelfResult,
    pub right: ShelfResult,
    pub top: ShelfResult,
    pub left: ShelfResult,
    /// `bottom + right - top - left`, absent when a shelf lost invariance.
    pub m: Option<i64>,
    pub window: BoxWindow,
}

/// All four shelves of the box, each traversed in its natural direction
/// (lambda increasing on bottom and top, x increasing on left and right).
pub fn maslov_box(
    sys: &SystemDefinition,
    window: BoxWindow,
    trunc: &TruncationChoice,
    opts: &IndexOptions,
) -> Result<BoxResult> {
    let (l1, l2) = window.lambda;
    let (c1, c2) = window.x;
    let right_col = Arc::new(ColumnPath::full(sys, l2, trunc)?);
    let left_col = Arc::new(ColumnPath::eta_only(sys, l1, trunc, c2)?);
    let mut field = PsiField::new(sys, *trunc, c2);
    field.pin(right_col.clone());
    field.pin(left_col.clone());
    let bottom = shelf_index(&|l: f64| field.psi(l, c1), l1, l2, opts)?;
    let right = shelf_index(&|x: f64| Ok(right_col.psi_plus(x)), c1, c2, opts)?;
    let top = shelf_index(&|l: f64| field.psi(l, c2), l1, l2, opts)?;
    let left = shelf_index(&|x: f64| Ok(left_col.psi_plus(x)), c1, c2, opts)?;
    let m = if [&bottom, &right, &top, &left].iter().any(|s| s.broken) {
        None
    } else {
        Some(bottom.index + right.index - top.index - left.index)
    };
    Ok(BoxResult { bottom, right, top, left, m, window })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FullLineResult {
    pub lambda: f64,
    pub shelf: ShelfResult,
    /// Index over the whole line including the asymptotic extension.
    pub index: Option<i64>,
    /// Finite crossings only.
    pub finite_crossings: Vec<CrossingEvent>,
    pub asymptotic: Option<CrossingEvent>,
    /// Crossings keep appearing in the right half of the window.
    pub accumulating: bool,
    pub eigen_edge: bool,
}

/// Shelf at fixed lambda over `[-L, L]` with the asymptotic extension.
pub fn full_line_shelf(
    sys: &SystemDefinition,
    lambda: f64,
    trunc: &TruncationChoice,
    opts: &IndexOptions,
) -> Result<FullLineResult> {
    let col = ColumnPath::full(sys, lambda, trunc)?;
    full_line_from_column(&col, opts)
}

pub fn full_line_from_column(col: &ColumnPath, opts: &IndexOptions) -> Result<FullLineResult> {
    let (a, b) = (-col.trunc.l_minus, col.trunc.l_plus);
    let o = IndexOptions { tail_tol: Some(TAIL_TOL), ..*opts };
    let shelf = shelf_index(&|x: f64| Ok(col.psi_plus(x)), a, b, &o)?;
    let finite: Vec<CrossingEvent> =
        shelf.crossings.iter().filter(|c| c.kind != CrossingKind::Asymptotic).cloned().collect();
    let accumulating = finite.iter().any(|c| c.location > 0.5 * b);
    let asymptotic = asymptotic_from_path(&shelf, &o)?;
    let index = if shelf.broken || accumulating { None } else { Some(shelf.index) };
    Ok(FullLineResult {
        lambda: col.lambda,
        shelf,
        index,
        finite_crossings: finite,
        asymptotic,
        accumulating,
        eigen_edge: col.eigen_edge,
    })
}

fn asymptotic_from_path(shelf: &ShelfResult, o: &IndexOptions) -> Result<Option<CrossingEvent>> {
    if shelf.broken || shelf.path.len() < 2 {
        return Ok(None);
    }
    let ang = lift_angle(&shelf.path, o)?;
    let n = ang.theta.len();
    if !ang.snapped[n - 1] {
        return Ok(None);
    }
    let mut k = n - 1;
    while k > 0 && ang.snapped[k - 1] {
        k -= 1;
    }
    if k == 0 {
        return Ok(None);
    }
    let d = crossing_count(ang.theta[k]) - crossing_count(ang.theta[k - 1]);
    Ok(Some(CrossingEvent {
        location: f64::INFINITY,
        direction: d as i32,
        kind: CrossingKind::Asymptotic,
        slope_direction: None,
        psi2: shelf.path.psi2[n - 1],
    }))
}

/// Contribution of the crossing at `x = +inf`, if there is one: +1 when the
/// tracking point arrives counterclockwise, 0 when clockwise.
pub fn asymptotic_right_extension(
    sys: &SystemDefinition,
    lambda: f64,
    trunc: &TruncationChoice,
    opts: &IndexOptions,
) -> Result<Option<CrossingEvent>> {
    let r = full_line_shelf(sys, lambda, trunc, opts)?;
    if r.accumulating {
        return Err(MaslovError::Resolution(format!(
            "crossings accumulate toward +inf at lambda = {lambda}; the limit is not resolved (increase L)"
        )));
    }
    Ok(r.asymptotic)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueEstimate {
    pub lambda: f64,
    pub bracket: (f64, f64),
    pub direction: i32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopShelfResult {
    pub c: f64,
    pub shelf: ShelfResult,
    pub eigenvalues: Vec<EigenvalueEstimate>,
}

/// Sweep lambda at `x = c` with the finite-`c` pair, whose first component
/// has the sign of the Evans function; every interior sign change is an
/// eigenvalue, refined by bisection to `tol`.
pub fn top_shelf_eigenvalues(
    sys: &SystemDefinition,
    lambda_window: (f64, f64),
    c: f64,
    n_grid: usize,
    trunc: &TruncationChoice,
    tol: f64,
) -> Result<TopShelfResult> {
    let (l1, l2) = lambda_window;
    if c > trunc.l_plus || c < -trunc.l_minus {
        return Err(MaslovError::Precondition(format!("c = {c} outside the truncation window")));
    }
    let pc = |l: f64| -> Result<(f64, f64)> { ColumnPath::full(sys, l, trunc)?.psi_c(c) };
    let n = n_grid.max(16);
    let mut ls: Vec<f64> = (0..n).map(|k| l1 + (l2 - l1) * k as f64 / (n - 1) as f64).collect();
    let mut vals: Vec<(f64, f64)> = ls.par_iter().map(|&l| pc(l)).collect::<Result<_>>()?;
    // a window endpoint sitting on an eigenvalue (lambda = 0 for translation
    // invariant waves) carries only roundoff; its sign is meaningless
    let is_zero = |v: (f64, f64)| v.0.abs() < ENDPOINT_ZERO * v.0.hypot(v.1);
    // so approach it by halving steps: the samples just inside carry the sign
    // of D next to the endpoint, and an eigenvalue in the last grid cell shows
    let step = (l2 - l1) / (n - 1) as f64;
    for (edge, dir) in [(0usize, 1.0), (n - 1, -1.0)] {
        if !is_zero(vals[edge]) {
            continue;
        }
        let mut extra = Vec::new();
        for k in 1..=20 {
            let l = ls[edge] + dir * step / f64::powi(2.0, k);
            let v = pc(l)?;
            if is_zero(v) {
                break;
            }
            extra.push((l, v));
        }
        for (l, v) in extra {
            let at = ls.partition_point(|&x| x < l);
            ls.insert(at, l);
            vals.insert(at, v);
        }
    }
    let n = ls.len();
    let edge_zero = |k: usize| (k == 0 || k == n - 1) && is_zero(vals[k]);
    let mut eig = Vec::new();
    for k in 1..n {
        let (a, b) = (vals[k - 1].0, vals[k].0);
        if a == 0.0 || b == 0.0 || edge_zero(k - 1) || edge_zero(k) || a.signum() == b.signum() {
            continue;
        }
        let (mut lo, mut hi) = (ls[k - 1], ls[k]);
        let sa = a > 0.0;
        while hi - lo > tol {
            let m = 0.5 * (lo + hi);
            if (pc(m)?.0 > 0.0) == sa {
                lo = m;
            } else {
                hi = m;
            }
        }
        let root = 0.5 * (lo + hi);
        let (_, p2) = pc(root)?;
        let h = (tol * 10.0).max(1e-6);
        let slope = (pc(root + h)?.0 - pc(root - h)?.0) / (2.0 * h);
        let direction = crossing_direction(slope, p2).unwrap_or(0);
        eig.push(EigenvalueEstimate { lambda: root, bracket: (lo, hi), direction });
    }
    let opts = IndexOptions { n_initial: n, ..Default::default() };
    let shelf = shelf_index(&pc, l1, l2, &opts)?;
    Ok(TopShelfResult { c, shelf, eigenvalues: eig })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub lambda: f64,
    pub x: f64,
    pub residual: f64,
}

/// Points inside the window where `psi1` and `psi2` vanish together.
pub fn invariance_scan(
    sys: &SystemDefinition,
    window: BoxWindow,
    grid: (usize, usize),
    trunc: &TruncationChoice,
) -> Result<Vec<LossPoint>> {
    let (l1, l2) = window.lambda;
    let (c1, c2) = window.x;
    let (nl, nx) = (grid.0.max(4), grid.1.max(4));
    let ls: Vec<f64> = (0..nl).map(|k| l1 + (l2 - l1) * k as f64 / (nl - 1) as f64).collect();
    let xs: Vec<f64> = (0..nx).map(|k| c1 + (c2 - c1) * k as f64 / (nx - 1) as f64).collect();
    let field = PsiField::new(sys, *trunc, c2);
    let table: Vec<Vec<(f64, f64)>> = ls
        .par_iter()
        .map(|&l| -> Result<Vec<(f64, f64)>> {
            let col = field.column(l)?;
            Ok(xs.iter().map(|&x| col.psi_plus(x)).collect())
        })
        .collect::<Result<_>>()?;
    let changes = |v: [f64; 4]| v.iter().any(|a| *a > 0.0) && v.iter().any(|a| *a < 0.0);
    let mut seeds = Vec::new();
    for i in 0..nl - 1 {
        for j in 0..nx - 1 {
            let c = [table[i][j], table[i + 1][j], table[i][j + 1], table[i + 1][j + 1]];
            if changes(c.map(|p| p.0)) && changes(c.map(|p| p.1)) {
                seeds.push((0.5 * (ls[i] + ls[i + 1]), 0.5 * (xs[j] + xs[j + 1])));
            }
        }
    }
    let dl = (l2 - l1) / (nl - 1) as f64;
    let dx = (c2 - c1) / (nx - 1) as f64;
    let found: Vec<Option<LossPoint>> = seeds
        .par_iter()
        .map(|&(l0, x0)| newton_loss(sys, trunc, c2, l0, x0, dl, dx, window).unwrap_or(None))
        .collect();
    let mut out: Vec<LossPoint> = Vec::new();
    for p in found.into_iter().flatten() {
        if !out.iter().any(|q| (q.lambda - p.lambda).abs() < 1e-3 && (q.x - p.x).abs() < 1e-3) {
            out.push(p);
        }
    }
    out.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap());
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn newton_loss(
    sys: &SystemDefinition,
    trunc: &TruncationChoice,
    x_cap: f64,
    l0: f64,
    x0: f64,
    dl: f64,
    dx: f64,
    window: BoxWindow,
) -> Result<Option<LossPoint>> {
    let f = |l: f64, x: f64| -> Result<(f64, f64)> {
        Ok(ColumnPath::eta_only(sys, l, trunc, x_cap)?.psi_plus(x))
    };
    let (mut l, mut x) = (l0, x0);
    for _ in 0..40 {
        let (f1, f2) = f(l, x)?;
        let hl = 1e-6 * (1.0 + l.abs());
        let hx = 1e-6 * (1.0 + x.abs());
        let (a1, a2) = f(l + hl, x)?;
        let (b1, b2) = f(l, x + hx)?;
        let (j11, j21) = ((a1 - f1) / hl, (a2 - f2) / hl);
        let (j12, j22) = ((b1 - f1) / hx, (b2 - f2) / hx);
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            return Ok(None);
        }
        let sl = (j22 * f1 - j12 * f2) / det;
        let sx = (-j21 * f1 + j11 * f2) / det;
        l -= sl;
        x -= sx;
        if (l - l0).abs() > 3.0 * dl.abs() || (x - x0).abs() > 3.0 * dx.abs() {
            return Ok(None);
        }
        // keep iterates (and their finite-difference stencils) in the window
        l = l.clamp(window.lambda.0, window.lambda.1 - 2e-6 * (1.0 + l.abs()));
        x = x.clamp(window.x.0, window.x.1 - 2e-6 * (1.0 + x.abs()));
        if sl.abs() < 1e-11 * (1.0 + l.abs()) && sx.abs() < 1e-11 * (1.0 + x.abs()) {
            break;
        }
    }
    let (f1, f2) = f(l, x)?;
    let res = (f1 * f1 + f2 * f2).sqrt();
    let inside = l >= window.lambda.0 && l <= window.lambda.1 && x >= window.x.0 && x <= window.x.1;
    if res < 1e-7 && inside {
        Ok(Some(LossPoint { lambda: l, x, residual: res }))
    } else {
        Ok(None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityOutcome {
    pub index_m: i64,
    pub index_alt: i64,
    pub difference: i64,
    pub inconclusive: bool,
}

/// Recompute a fixed-lambda shelf on `[x0, x1]` with `V~_M+` built from
/// `alt_m` and compare indices; the difference is even when both are invariant.
pub fn exchange_parity_check(
    col: &ColumnPath,
    x_range: (f64, f64),
    alt_m: &SquareMatrix,
    opts: &IndexOptions,
) -> Result<ParityOutcome> {
    let alt = col.with_m(alt_m)?;
    let a = shelf_index(&|x: f64| Ok(col.psi_plus(x)), x_range.0, x_range.1, opts)?;
    let b = shelf_index(&|x: f64| Ok(alt.psi_plus(x)), x_range.0, x_range.1, opts)?;
    Ok(ParityOutcome {
        index_m: a.index,
        index_alt: b.index,
        difference: a.index - b.index,
        inconclusive: a.broken || b.broken,
    })
}

/// Same check along an arbitrary shelf given as two sources.
pub fn exchange_parity_sources<S: PsiSource + ?Sized, T: PsiSource + ?Sized>(
    with_m: &S,
    with_alt: &T,
    t_range: (f64, f64),
    opts: &IndexOptions,
) -> Result<ParityOutcome> {
    let a = shelf_index(with_m, t_range.0, t_range.1, opts)?;
    let b = shelf_index(with_alt, t_range.0, t_range.1, opts)?;
    Ok(ParityOutcome {
        index_m: a.index,
        index_alt: b.index,
        difference: a.index - b.index,
        inconclusive: a.broken || b.broken,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub right_full: i64,
    pub left_full: i64,
    pub bottom: i64,
    pub m: i64,
    /// Corner increment from the Evans function at `lambda = 0`.
    pub corner: i64,
}

/// Lower bound on the number of distinct eigenvalues in `[lambda1, lambda2)`:
/// `N + corner >= |R - L + B - m|`.
pub fn count_bound(inp: &BoundInputs) -> i64 {
    ((inp.right_full - inp.left_full + inp.bottom - inp.m).abs() - inp.corner).max(0)
}

/// Convenience: bound from a box plus full-line indices.
pub fn count_bound_from_box(b: &BoxResult, right_full: Option<i64>, left_full: Option<i64>, corner: i64) -> Option<i64> {
    let m = b.m?;
    Some(count_bound(&BoundInputs {
        right_full: right_full?,
        left_full: left_full?,
        bottom: b.bottom.index,
        m,
        corner,
    }))
}
