//! Consolidated stability reports for the built-in models.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{MaslovError, Result};
use crate::evans::{corner_increment, evans_d2prime0_gkdv, evans_dprime0, DerivativeReport};
use crate::index::IndexOptions;
use crate::models::gkdv::{gkdv_system, GkdvModel};
use crate::models::kdvb::{kdvb_system, KdvbModel};
use crate::shelves::{
    count_bound, full_line_from_column, full_line_shelf, invariance_scan, maslov_box, top_shelf_eigenvalues,
    BoundInputs, BoxResult, BoxWindow, EigenvalueEstimate, FullLineResult, LossPoint, PsiField,
};
use crate::shooting::{ColumnPath, TruncationChoice};
use crate::spectral::SystemDefinition;
use crate::tracer::{trace_box_curves, CurveReport, TraceOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictKind {
    Unstable,
    ConsistentWithStability,
    /// Invariance broke on the top shelf: spectrum is present by the dichotomy.
    SpectrumDetected,
    Inconclusive,
}

impl VerdictKind {
    pub fn exit_code(self) -> i32 {
        match self {
            VerdictKind::ConsistentWithStability => 0,
            VerdictKind::Unstable => 2,
            VerdictKind::SpectrumDetected => 3,
            VerdictKind::Inconclusive => 5,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            VerdictKind::Unstable => "unstable",
            VerdictKind::ConsistentWithStability => "consistent with stability",
            VerdictKind::SpectrumDetected => "spectrum detected via the invariance dichotomy",
            VerdictKind::Inconclusive => "inconclusive",
        }
    }
}

/// Grids, windows and truncation for one analysis run.
#[derive(Debug, Clone, Copy)]
pub struct RunSettings {
    pub window: BoxWindow,
    /// `(n_lambda, n_x)`.
    pub grid: (usize, usize),
    pub trunc: TruncationChoice,
    pub trace: bool,
}

impl RunSettings {
    pub fn index_options(&self) -> IndexOptions {
        IndexOptions { n_initial: self.grid.0.max(self.grid.1).max(16), ..Default::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub model: String,
    pub verdict: VerdictKind,
    pub summary: String,
    pub window: BoxWindow,
    pub right_full: Option<i64>,
    pub left_full: Option<i64>,
    pub bottom: i64,
    pub m: Option<i64>,
    pub corner: Option<i64>,
    /// Lower bound on the number of negative real eigenvalues.
    pub bound: Option<i64>,
    pub derivative: Option<DerivativeReport>,
    pub top_eigenvalues: Vec<EigenvalueEstimate>,
    pub loss_points: Vec<LossPoint>,
    pub curves_right_to_right: Option<usize>,
    pub curves_right_to_other: Option<usize>,
    pub notes: Vec<String>,
}

impl StabilityReport {
    pub fn exit_code(&self) -> i32 {
        self.verdict.exit_code()
    }

    /// Multi-line human-readable report.
    pub fn text(&self) -> String {
        let opt = |v: Option<i64>| v.map(|k| k.to_string()).unwrap_or_else(|| "undefined".into());
        let mut s = format!("{}: {}\n", self.model, self.summary);
        s += &format!(
            "  box lambda in [{}, {}], x in [{}, {}]\n",
            self.window.lambda.0, self.window.lambda.1, self.window.x.0, self.window.x.1
        );
        s += &format!("  right shelf (full line) index: {}\n", opt(self.right_full));
        s += &format!("  left shelf (full line) index:  {}\n", opt(self.left_full));
        s += &format!("  bottom shelf index:            {}\n", self.bottom);
        s += &format!("  boundary invariant m:          {}\n", opt(self.m));
        s += &format!("  corner increment:              {}\n", opt(self.corner));
        s += &format!("  eigenvalue count bound:        {}\n", opt(self.bound));
        for e in &self.top_eigenvalues {
            s += &format!("  eigenvalue on the top shelf:   {:.6} (direction {})\n", e.lambda, e.direction);
        }
        for p in &self.loss_points {
            s += &format!("  invariance lost at (lambda, x) = ({:.4}, {:.4})\n", p.lambda, p.x);
        }
        for n in &self.notes {
            s += &format!("  note: {n}\n");
        }
        s
    }
}

/// Everything the decision needs, computed by the model-specific drivers.
#[derive(Debug, Clone)]
pub struct VerdictInputs {
    pub model: String,
    pub boxr: BoxResult,
    pub right_full: Option<FullLineResult>,
    pub left_full: Option<i64>,
    pub corner: Option<i64>,
    pub derivative: Option<DerivativeReport>,
    pub top_eigenvalues: Vec<EigenvalueEstimate>,
    pub loss_points: Vec<LossPoint>,
    pub curves: Option<CurveReport>,
    pub notes: Vec<String>,
}

pub fn assess(inp: VerdictInputs) -> StabilityReport {
    let b = &inp.boxr;
    let right = inp.right_full.as_ref().and_then(|r| r.index);
    let bound = match (right, inp.left_full, b.m, inp.corner) {
        (Some(r), Some(l), Some(m), Some(c)) => {
            Some(count_bound(&BoundInputs { right_full: r, left_full: l, bottom: b.bottom.index, m, corner: c }))
        }
        _ => None,
    };
    let mut notes = inp.notes.clone();
    if !inp.loss_points.is_empty() {
        notes.push(format!(
            "{} interior invariance-loss point(s): psi2 changes sign along the spectral curve there, so crossing \
             directions at its two ends need not cancel; indices of shelves avoiding these points are unaffected",
            inp.loss_points.len()
        ));
    }
    let (rr, ro) = match &inp.curves {
        Some(c) => (Some(c.right_to_right), Some(c.right_to_other)),
        None => (None, None),
    };
    let (verdict, summary) = if b.top.broken {
        (VerdictKind::SpectrumDetected, "invariance broken on the top shelf; spectrum is present".to_string())
    } else if let Some(e) = inp.top_eigenvalues.first() {
        let n = bound.unwrap_or(0).max(inp.top_eigenvalues.len() as i64);
        (VerdictKind::Unstable, format!("unstable, N >= {n}; eigenvalue near {:.4}", e.lambda))
    } else if let Some(n) = bound.filter(|n| *n >= 1) {
        (VerdictKind::Unstable, format!("unstable, N >= {n}"))
    } else if let Some(0) = bound {
        (VerdictKind::ConsistentWithStability, format!("consistent with stability; N >= 0 with m = {}", b.m.unwrap_or(0)))
    } else if b.m.is_some() && inp.curves.as_ref().is_some_and(|c| c.stalled == 0 && c.right_to_other <= 1) {
        let c = inp.curves.as_ref().unwrap();
        let mut s = "consistent with stability; all right-shelf crossings pair-cancel in window".to_string();
        if c.right_to_other > 0 {
            s += " (one curve leaves through the window edge)";
        }
        (VerdictKind::ConsistentWithStability, s)
    } else {
        (VerdictKind::Inconclusive, "inconclusive: bound ingredients undefined".to_string())
    };
    StabilityReport {
        model: inp.model,
        verdict,
        summary,
        window: b.window,
        right_full: right,
        left_full: inp.left_full,
        bottom: b.bottom.index,
        m: b.m,
        corner: inp.corner,
        bound,
        derivative: inp.derivative,
        top_eigenvalues: inp.top_eigenvalues,
        loss_points: inp.loss_points,
        curves_right_to_right: rr,
        curves_right_to_other: ro,
        notes,
    }
}

/// `psi1 > 0` along the whole left shelf at `lambda1`, i.e. no crossings there.
pub fn gkdv_left_shelf_guard(model: &GkdvModel, lambda1: f64, trunc: &TruncationChoice) -> Result<bool> {
    let sys = gkdv_system(model);
    let col = ColumnPath::eta_only(&sys, lambda1, trunc, trunc.l_plus)?;
    let n = 4001;
    Ok((0..n).all(|k| {
        let x = -trunc.l_minus + (trunc.l_minus + trunc.l_plus) * k as f64 / (n - 1) as f64;
        col.psi_plus(x).0 > 0.0
    }))
}

fn common(
    sys: &SystemDefinition,
    set: &RunSettings,
) -> Result<(BoxResult, FullLineResult, Vec<EigenvalueEstimate>, Vec<LossPoint>, Option<CurveReport>)> {
    let opts = set.index_options();
    let w = set.window;
    let boxr = maslov_box(sys, w, &set.trunc, &opts)?;
    let right_col = Arc::new(ColumnPath::full(sys, w.lambda.1, &set.trunc)?);
    let right = full_line_from_column(&right_col, &opts)?;
    let top = top_shelf_eigenvalues(sys, w.lambda, w.x.1, set.grid.0.max(16), &set.trunc, 1e-5)?;
    let loss = invariance_scan(sys, w, set.grid, &set.trunc)?;
    let curves = if set.trace {
        let mut field = PsiField::new(sys, set.trunc, w.x.1);
        field.pin(right_col);
        Some(trace_box_curves(&field, &boxr, &TraceOptions::default())?)
    } else {
        None
    };
    Ok((boxr, right, top.eigenvalues, loss, curves))
}

/// A verdict together with the box data it was derived from.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub boxr: BoxResult,
    pub right_full: FullLineResult,
    pub curves: Option<CurveReport>,
    pub report: StabilityReport,
}

/// Full gKdV analysis on the given box.
pub fn gkdv_verdict(model: &GkdvModel, set: &RunSettings) -> Result<StabilityReport> {
    Ok(gkdv_analysis(model, set)?.report)
}

/// Full KdV-Burgers analysis on the given box.
pub fn kdvb_verdict(model: &KdvbModel, set: &RunSettings) -> Result<StabilityReport> {
    Ok(kdvb_analysis(model, set)?.report)
}

fn analysis(inp: VerdictInputs) -> Analysis {
    let boxr = inp.boxr.clone();
    let right_full = inp.right_full.clone().expect("right shelf is always computed");
    let curves = inp.curves.clone();
    Analysis { boxr, right_full, curves, report: assess(inp) }
}

pub fn gkdv_analysis(model: &GkdvModel, set: &RunSettings) -> Result<Analysis> {
    if (model.p - 4.0).abs() < 1e-12 {
        return Err(MaslovError::Degenerate("p = 4 is the degenerate case of the dichotomy".into()));
    }
    let sys = gkdv_system(model);
    let (boxr, right, top, loss, curves) = common(&sys, set)?;
    let mut notes = Vec::new();
    let d2 = evans_d2prime0_gkdv(model)?;
    let psi2_end = right.shelf.path.psi2.last().copied().unwrap_or(0.0);
    let corner = corner_increment(d2.d2.unwrap_or(0.0).signum() as i32, 2, psi2_end.signum() as i32).ok();
    let l1 = set.window.lambda.0;
    let left_full = if gkdv_left_shelf_guard(model, l1, &set.trunc)? {
        Some(0)
    } else {
        notes.push(format!("left shelf at lambda = {l1} has crossings; lambda1 should be more negative"));
        full_line_shelf(&sys, l1, &set.trunc, &set.index_options())?.index
    };
    Ok(analysis(VerdictInputs {
        model: format!("gKdV p = {}, s = {}", model.p, model.s),
        boxr,
        right_full: Some(right),
        left_full,
        corner,
        derivative: Some(d2),
        top_eigenvalues: top,
        loss_points: loss,
        curves,
        notes,
    }))
}

pub fn kdvb_analysis(model: &KdvbModel, set: &RunSettings) -> Result<Analysis> {
    let sys = kdvb_system(model);
    let (boxr, right, top, loss, curves) = common(&sys, set)?;
    let mut notes = Vec::new();
    let d1 = evans_dprime0(&sys, &set.trunc)?;
    let psi2_end = right.shelf.path.psi2.last().copied().unwrap_or(0.0);
    let corner = corner_increment(d1.d1.signum() as i32, 1, psi2_end.signum() as i32).ok();
    let l1 = set.window.lambda.0;
    let threshold = model.left_shelf_bound();
    let left_full = if l1 <= threshold {
        notes.push(format!("lambda1 = {l1} is below the energy threshold {threshold:.3}; left shelf is empty"));
        Some(0)
    } else {
        full_line_shelf(&sys, l1, &set.trunc, &set.index_options())?.index
    };
    if right.accumulating {
        notes.push("right-shelf crossings accumulate as x -> +inf; the full-line index is undefined".into());
    }
    Ok(analysis(VerdictInputs {
        model: format!("KdV-Burgers nu = {}", model.nu),
        boxr,
        right_full: Some(right),
        left_full,
        corner,
        derivative: Some(d1),
        top_eigenvalues: top,
        loss_points: loss,
        curves,
        notes,
    }))
}
