//! Spectral curves: the `psi1 = 0` level set inside a box, traced by
//! continuation from the crossings found on the right and top shelves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::index::{CrossingKind, ShelfResult};
use crate::shelves::{BoxResult, BoxWindow, PsiField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralCurvePoint {
    pub lambda: f64,
    pub x: f64,
    pub psi2_sign: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shelf {
    Bottom,
    Right,
    Top,
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveEnd {
    pub shelf: Shelf,
    pub lambda: f64,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCurve {
    pub points: Vec<SpectralCurvePoint>,
    pub entry: CurveEnd,
    /// `None` when continuation stalled inside the box.
    pub exit: Option<CurveEnd>,
}

impl SpectralCurve {
    pub fn lambda_min(&self) -> f64 {
        self.points.iter().map(|p| p.lambda).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TraceOptions {
    /// Initial step as a fraction of the lambda window.
    pub h_init: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub max_points: usize,
    pub tol: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { h_init: 1.0 / 512.0, h_max: 1.0 / 64.0, h_min: 1e-7, max_points: 20_000, tol: 1e-10 }
    }
}

/// Scaled coordinates: both window sides map to `[0, 1]`.
#[derive(Clone, Copy)]
struct Frame {
    w: BoxWindow,
}

impl Frame {
    fn sl(&self) -> f64 {
        self.w.lambda.1 - self.w.lambda.0
    }
    fn sx(&self) -> f64 {
        self.w.x.1 - self.w.x.0
    }
    fn to_unit(&self, l: f64, x: f64) -> (f64, f64) {
        ((l - self.w.lambda.0) / self.sl(), (x - self.w.x.0) / self.sx())
    }
    fn from_unit(&self, a: f64, b: f64) -> (f64, f64) {
        (self.w.lambda.0 + a * self.sl(), self.w.x.0 + b * self.sx())
    }
}

fn psi1(field: &PsiField, l: f64, x: f64) -> Result<f64> {
    Ok(field.psi(l, x)?.0)
}

/// Newton with a finite-difference slope for `g(t) = 0` near `t0`.
fn solve_1d<G: Fn(f64) -> Result<f64>>(g: G, t0: f64, scale: f64, tol: f64) -> Result<Option<f64>> {
    let mut t = t0;
    let h = 1e-7 * scale;
    // evaluation failures (e.g. leaving the lambda range where the system is
    // hyperbolic) count as non-convergence
    for _ in 0..30 {
        let (Ok(f), Ok(fh)) = (g(t), g(t - h)) else {
            return Ok(None);
        };
        let d = (f - fh) / h;
        if d == 0.0 || !d.is_finite() {
            return Ok(None);
        }
        let step = f / d;
        t -= step;
        if (t - t0).abs() > 0.05 * scale {
            return Ok(None);
        }
        if step.abs() < tol * scale {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

fn inside(a: f64, b: f64) -> bool {
    (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b)
}

/// Follow one branch of `psi1 = 0` from a boundary seed until it leaves the box.
pub fn trace_curve(
    field: &PsiField,
    window: BoxWindow,
    entry: CurveEnd,
    opts: &TraceOptions,
) -> Result<SpectralCurve> {
    let fr = Frame { w: window };
    let mut pts: Vec<(f64, f64)> = vec![fr.to_unit(entry.lambda, entry.x)];
    // first tangent: along the level set, pointing into the box
    let inward = match entry.shelf {
        Shelf::Right => (-1.0, 0.0),
        Shelf::Left => (1.0, 0.0),
        Shelf::Top => (0.0, -1.0),
        Shelf::Bottom => (0.0, 1.0),
    };
    let mut tan = level_tangent(field, &fr, pts[0], inward)?;
    let mut h = opts.h_init;
    let mut exit = None;
    while pts.len() < opts.max_points {
        let (a0, b0) = *pts.last().unwrap();
        let (pa, pb) = (a0 + h * tan.0, b0 + h * tan.1);
        if !inside(pa, pb) && pts.len() > 1 {
            exit = Some(exit_point(field, &fr, (a0, b0), (pa, pb), opts)?);
            break;
        }
        let corrected = if tan.0.abs() >= tan.1.abs() {
            let (l, xg) = fr.from_unit(pa, pb);
            solve_1d(|x| psi1(field, l, x), xg, fr.sx(), opts.tol)?.map(|x| fr.to_unit(l, x))
        } else {
            let (lg, x) = fr.from_unit(pa, pb);
            solve_1d(|l| psi1(field, l, x), lg, fr.sl(), opts.tol)?.map(|l| fr.to_unit(l, x))
        };
        let accept = corrected.and_then(|(a, b)| {
            let (da, db) = (a - a0, b - b0);
            let dist = (da * da + db * db).sqrt();
            let cos = (da * tan.0 + db * tan.1) / dist.max(1e-300);
            (dist > 0.2 * h && dist < 3.0 * h && cos > 0.8).then_some((a, b, da / dist, db / dist))
        });
        let Some((a, b, ta, tb)) = accept else {
            h *= 0.5;
            if h < opts.h_min {
                break;
            }
            continue;
        };
        if !inside(a, b) {
            exit = Some(exit_point(field, &fr, (a0, b0), (a, b), opts)?);
            break;
        }
        pts.push((a, b));
        tan = (ta, tb);
        h = (h * 1.5).min(opts.h_max);
    }
    let points = pts
        .iter()
        .map(|&(a, b)| {
            let (l, x) = fr.from_unit(a, b);
            let s = field.psi(l, x).map(|p| p.1.signum() as i32).unwrap_or(0);
            SpectralCurvePoint { lambda: l, x, psi2_sign: s }
        })
        .collect();
    Ok(SpectralCurve { points, entry, exit })
}

fn level_tangent(field: &PsiField, fr: &Frame, p: (f64, f64), inward: (f64, f64)) -> Result<(f64, f64)> {
    let h = 1e-6;
    // one-sided differences stepping into the box
    let (a, b) = p;
    let f0 = psi1(field, fr.from_unit(a, b).0, fr.from_unit(a, b).1)?;
    let sa = if inward.0 != 0.0 { inward.0 } else if a > 0.5 { -1.0 } else { 1.0 };
    let sb = if inward.1 != 0.0 { inward.1 } else if b > 0.5 { -1.0 } else { 1.0 };
    let (l1, x1) = fr.from_unit(a + sa * h, b);
    let (l2, x2) = fr.from_unit(a, b + sb * h);
    let ga = (psi1(field, l1, x1)? - f0) / (sa * h);
    let gb = (psi1(field, l2, x2)? - f0) / (sb * h);
    let n = (ga * ga + gb * gb).sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Ok(inward);
    }
    let mut t = (-gb / n, ga / n);
    if t.0 * inward.0 + t.1 * inward.1 < 0.0 {
        t = (-t.0, -t.1);
    }
    Ok(t)
}

fn exit_point(field: &PsiField, fr: &Frame, p: (f64, f64), q: (f64, f64), opts: &TraceOptions) -> Result<CurveEnd> {
    // first side crossed along the segment p -> q
    let mut best = (f64::INFINITY, Shelf::Right);
    let cands = [
        (Shelf::Left, p.0, q.0, 0.0),
        (Shelf::Right, p.0, q.0, 1.0),
        (Shelf::Bottom, p.1, q.1, 0.0),
        (Shelf::Top, p.1, q.1, 1.0),
    ];
    for (shelf, s0, s1, edge) in cands {
        if (s0 - edge) * (s1 - edge) <= 0.0 && s0 != s1 {
            let t = (edge - s0) / (s1 - s0);
            if t < best.0 {
                best = (t, shelf);
            }
        }
    }
    let (t, shelf) = best;
    let (ga, gb) = (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1));
    let (l, x) = fr.from_unit(ga.clamp(0.0, 1.0), gb.clamp(0.0, 1.0));
    let (l, x) = match shelf {
        Shelf::Left | Shelf::Right => {
            let x = solve_1d(|x| psi1(field, l, x), x, fr.sx(), opts.tol)?.unwrap_or(x);
            (l, x)
        }
        Shelf::Top | Shelf::Bottom => {
            let l = solve_1d(|l| psi1(field, l, x), l, fr.sl(), opts.tol)?.unwrap_or(l);
            (l, x)
        }
    };
    Ok(CurveEnd { shelf, lambda: l, x })
}

fn seeds(shelf: &ShelfResult, which: Shelf, window: BoxWindow) -> Vec<CurveEnd> {
    shelf
        .crossings
        .iter()
        .filter(|c| c.kind != CrossingKind::Asymptotic)
        .map(|c| match which {
            Shelf::Right => CurveEnd { shelf: which, lambda: window.lambda.1, x: c.location },
            Shelf::Left => CurveEnd { shelf: which, lambda: window.lambda.0, x: c.location },
            Shelf::Top => CurveEnd { shelf: which, lambda: c.location, x: window.x.1 },
            Shelf::Bottom => CurveEnd { shelf: which, lambda: c.location, x: window.x.0 },
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveReport {
    pub curves: Vec<SpectralCurve>,
    /// Curves entering through the right shelf and leaving through it.
    pub right_to_right: usize,
    /// Right-shelf entries leaving through another shelf.
    pub right_to_other: usize,
    /// Curves that stalled inside the box.
    pub stalled: usize,
}

/// Trace every curve seeded on the right and top shelves of a computed box.
/// A seed reached as the exit of an earlier curve is not traced again.
pub fn trace_box_curves(field: &PsiField, b: &BoxResult, opts: &TraceOptions) -> Result<CurveReport> {
    let w = b.window;
    let mut all: Vec<CurveEnd> = seeds(&b.right, Shelf::Right, w);
    all.extend(seeds(&b.top, Shelf::Top, w));
    all.extend(seeds(&b.bottom, Shelf::Bottom, w));
    all.extend(seeds(&b.left, Shelf::Left, w));
    // trace all seeds in parallel, then drop duplicates (the same curve seen from both ends)
    let traced: Vec<SpectralCurve> = all.par_iter().map(|&s| trace_curve(field, w, s, opts)).collect::<Result<_>>()?;
    let fr = Frame { w };
    let close = |p: &CurveEnd, q: &CurveEnd| {
        let (a, b) = fr.to_unit(p.lambda, p.x);
        let (c, d) = fr.to_unit(q.lambda, q.x);
        p.shelf == q.shelf && ((a - c).powi(2) + (b - d).powi(2)).sqrt() < 1e-4
    };
    let mut curves: Vec<SpectralCurve> = Vec::new();
    for c in traced {
        let dup = curves.iter().any(|k| match (&k.exit, &c.exit) {
            (Some(ke), Some(ce)) => close(ke, &c.entry) && close(&k.entry, ce),
            (Some(ke), None) => close(ke, &c.entry),
            _ => false,
        });
        if !dup {
            curves.push(c);
        }
    }
    let mut rr = 0;
    let mut ro = 0;
    let mut stalled = 0;
    for c in &curves {
        let ends = [Some(c.entry), c.exit];
        let n_right = ends.iter().flatten().filter(|e| e.shelf == Shelf::Right).count();
        match c.exit {
            None => stalled += 1,
            Some(_) if n_right == 2 => rr += 1,
            Some(_) if n_right == 1 => ro += 1,
            _ => {}
        }
    }
    Ok(CurveReport { curves, right_to_right: rr, right_to_other: ro, stalled })
}
