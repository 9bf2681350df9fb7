//! Winding of the tracking point along a path of detection pairs.
//!
//! The tracking point is represented by the doubled angle
//! `theta = 2 atan2(-psi2, psi1)`, continuously lifted. A crossing
//! (`psi1 = 0`) is `theta` at an odd multiple of pi and
//! `d theta/dt = 2 psi1'/psi2` there, so counterclockwise means
//! `psi1'/psi2 > 0`. With `F(theta) = floor((theta - pi)/(2 pi)) + 1`, the
//! index of a path is `F(theta_end) - F(theta_start)`; samples sitting on a
//! crossing are snapped to the exact odd multiple of pi, which realizes the
//! endpoint rules (departures count only when clockwise, arrivals only when
//! counterclockwise, plateaus only at entry and exit).

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MaslovError, Result};

/// Anything that can produce `(psi1, psi2)` at a shelf parameter.
pub trait PsiSource: Sync {
    fn psi(&self, t: f64) -> Result<(f64, f64)>;
}

impl<F> PsiSource for F
where
    F: Fn(f64) -> Result<(f64, f64)> + Sync,
{
    fn psi(&self, t: f64) -> Result<(f64, f64)> {
        self(t)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PsiPath {
    pub ts: Vec<f64>,
    pub psi1: Vec<f64>,
    pub psi2: Vec<f64>,
}

impl PsiPath {
    pub fn len(&self) -> usize {
        self.ts.len()
    }
    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }
    pub fn invariance_min(&self) -> f64 {
        self.psi1
            .iter()
            .zip(&self.psi2)
            .map(|(a, b)| a * a + b * b)
            .fold(f64::INFINITY, f64::min)
    }
    pub fn reversed(&self) -> PsiPath {
        let mut p = self.clone();
        p.ts.reverse();
        p.psi1.reverse();
        p.psi2.reverse();
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossingKind {
    Interior,
    StartDeparture,
    EndArrival,
    Asymptotic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub location: f64,
    pub direction: i32,
    pub kind: CrossingKind,
    /// `sgn(psi1'/psi2)` from a central difference, when a source was available.
    pub slope_direction: Option<i32>,
    pub psi2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShelfResult {
    pub index: i64,
    pub crossings: Vec<CrossingEvent>,
    pub invariance_min: f64,
    pub broken: bool,
    #[serde(skip)]
    pub path: PsiPath,
}

#[derive(Debug, Clone)]
pub struct TrackingAngle {
    pub ts: Vec<f64>,
    pub theta: Vec<f64>,
    pub snapped: Vec<bool>,
    pub crossing_angle: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct IndexOptions {
    pub n_initial: usize,
    /// `|psi1|/|psi|` below which a sample is taken to sit on a crossing.
    pub snap_tol: f64,
    /// When set, the maximal suffix with `|psi1|/|psi|` below this value is
    /// snapped as well (asymptotic arrival at the end of a long path).
    pub tail_tol: Option<f64>,
    pub max_samples: usize,
    /// `psi1^2 + psi2^2` below this breaks invariance.
    pub invariance_tol: f64,
    /// Refine crossing locations to this relative tolerance.
    pub locate_rtol: f64,
}

impl Default for IndexOptions {
    fn default() -> Self {
        IndexOptions {
            n_initial: 256,
            snap_tol: 1e-12,
            tail_tol: None,
            max_samples: 1 << 20,
            invariance_tol: 1e-12,
            locate_rtol: 1e-10,
        }
    }
}

#[inline]
fn raw_angle(p1: f64, p2: f64) -> f64 {
    2.0 * (-p2).atan2(p1)
}

/// Change of the vector angle of `(psi1, -psi2)`, wrapped to `(-pi, pi]`.
/// The pair is a continuous vector, so this (not the doubled angle) is what
/// sampling must resolve; doubling it gives the tracking-angle increment.
#[inline]
fn vector_step(a1: f64, a2: f64, b1: f64, b2: f64) -> f64 {
    wrap((-b2).atan2(b1) - (-a2).atan2(a1))
}

const MAX_VECTOR_STEP: f64 = PI / 4.0;

#[inline]
fn roundoff_width(ta: f64, tb: f64) -> bool {
    (tb - ta).abs() <= 1e-12 * (1.0 + ta.abs().max(tb.abs()))
}

#[inline]
fn wrap(d: f64) -> f64 {
    let mut d = d % (2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    } else if d <= -PI {
        d += 2.0 * PI;
    }
    d
}

/// Number of odd multiples of pi at or below `theta`, up to a constant.
#[inline]
pub fn crossing_count(theta: f64) -> i64 {
    ((theta - PI) / (2.0 * PI)).floor() as i64 + 1
}

fn nearest_odd_pi(theta: f64) -> f64 {
    let k = ((theta - PI) / (2.0 * PI)).round();
    PI + 2.0 * PI * k
}

fn rel_psi1(p1: f64, p2: f64) -> f64 {
    p1.abs() / (p1 * p1 + p2 * p2).sqrt()
}

/// Sample a source on `[t0, t1]`, bisecting until consecutive doubled
/// angles differ by less than pi/2.
pub fn sample_path<S: PsiSource + ?Sized>(src: &S, t0: f64, t1: f64, opts: &IndexOptions) -> Result<PsiPath> {
    let n0 = opts.n_initial.max(2);
    let ts: Vec<f64> = (0..n0).map(|k| t0 + (t1 - t0) * k as f64 / (n0 - 1) as f64).collect();
    let vals: Vec<(f64, f64)> = ts.par_iter().map(|&t| src.psi(t)).collect::<Result<_>>()?;
    let mut pts: Vec<(f64, f64, f64)> = ts.iter().zip(vals).map(|(&t, (a, b))| (t, a, b)).collect();
    loop {
        let mut mids = Vec::new();
        for (k, w) in pts.windows(2).enumerate() {
            let (ta, a1, a2) = w[0];
            let (tb, b1, b2) = w[1];
            let ia = a1 * a1 + a2 * a2;
            let ib = b1 * b1 + b2 * b2;
            if ia < opts.invariance_tol || ib < opts.invariance_tol {
                continue;
            }
            let d = vector_step(a1, a2, b1, b2).abs();
            if d >= MAX_VECTOR_STEP && !roundoff_width(ta, tb) {
                mids.push((k, 0.5 * (ta + tb)));
            }
        }
        if mids.is_empty() {
            break;
        }
        if pts.len() + mids.len() > opts.max_samples {
            return Err(MaslovError::Resolution(format!(
                "angle refinement needs more than {} samples",
                opts.max_samples
            )));
        }
        let new: Vec<(f64, f64)> = mids.par_iter().map(|&(_, t)| src.psi(t)).collect::<Result<_>>()?;
        let mut merged = Vec::with_capacity(pts.len() + mids.len());
        let mut j = 0;
        for (k, p) in pts.iter().enumerate() {
            merged.push(*p);
            if j < mids.len() && mids[j].0 == k {
                merged.push((mids[j].1, new[j].0, new[j].1));
                j += 1;
            }
        }
        pts = merged;
    }
    Ok(PsiPath {
        ts: pts.iter().map(|p| p.0).collect(),
        psi1: pts.iter().map(|p| p.1).collect(),
        psi2: pts.iter().map(|p| p.2).collect(),
    })
}

/// Continuous lift of the doubled angle, with crossing samples snapped.
pub fn lift_angle(path: &PsiPath, opts: &IndexOptions) -> Result<TrackingAngle> {
    let n = path.len();
    if n == 0 {
        return Err(MaslovError::Precondition("empty path".into()));
    }
    let mut snapped = vec![false; n];
    for k in 0..n {
        snapped[k] = rel_psi1(path.psi1[k], path.psi2[k]) < opts.snap_tol;
    }
    if let Some(tt) = opts.tail_tol {
        let mut k = n;
        while k > 0 && rel_psi1(path.psi1[k - 1], path.psi2[k - 1]) < tt {
            k -= 1;
        }
        for s in snapped.iter_mut().skip(k) {
            *s = true;
        }
    }
    let mut theta = Vec::with_capacity(n);
    let mut th = raw_angle(path.psi1[0], path.psi2[0]);
    if snapped[0] {
        th = nearest_odd_pi(th);
    }
    theta.push(th);
    for k in 1..n {
        let v = vector_step(path.psi1[k - 1], path.psi2[k - 1], path.psi1[k], path.psi2[k]);
        let d = if v.abs() < MAX_VECTOR_STEP {
            2.0 * v
        } else {
            if !roundoff_width(path.ts[k - 1], path.ts[k]) {
                return Err(MaslovError::Resolution(format!(
                    "angle jump {v:.3} between t = {} and t = {}",
                    path.ts[k - 1], path.ts[k]
                )));
            }
            // unresolvable at roundoff width: a near-pi jump is a sign flip of
            // the pair (projectively continuous), anything else is taken as
            // the vector rotation it is
            if v.abs() > 0.75 * PI {
                wrap(2.0 * v)
            } else {
                2.0 * v
            }
        };
        th += d;
        if snapped[k] {
            th = nearest_odd_pi(th);
        }
        theta.push(th);
    }
    Ok(TrackingAngle { ts: path.ts.clone(), theta, snapped, crossing_angle: PI })
}

/// Sign of `psi1'/psi2`: +1 counterclockwise, -1 clockwise, 0 tangential.
pub fn crossing_direction(psi1_slope: f64, psi2_value: f64) -> Result<i32> {
    if psi2_value == 0.0 {
        return Err(MaslovError::Degenerate("psi2 vanishes at the crossing; not a regular crossing".into()));
    }
    if psi1_slope.abs() < 1e-13 {
        return Ok(0);
    }
    Ok(if psi1_slope / psi2_value > 0.0 { 1 } else { -1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathEnd {
    Start,
    Finish,
}

/// Contribution of a path endpoint sitting on a crossing.
pub fn endpoint_adjust(angle: &TrackingAngle, end: PathEnd) -> i64 {
    let n = angle.theta.len();
    if n < 2 {
        return 0;
    }
    match end {
        PathEnd::Start => {
            if !angle.snapped[0] {
                return 0;
            }
            let d = crossing_count(angle.theta[1]) - crossing_count(angle.theta[0]);
            d.min(0)
        }
        PathEnd::Finish => {
            if !angle.snapped[n - 1] {
                return 0;
            }
            let d = crossing_count(angle.theta[n - 1]) - crossing_count(angle.theta[n - 2]);
            d.max(0)
        }
    }
}

/// Index and crossing events of an already sampled path.
pub fn shelf_index_path(path: &PsiPath, opts: &IndexOptions) -> Result<ShelfResult> {
    index_with_locator::<fn(f64) -> Result<(f64, f64)>>(path, opts, None)
}

/// Sample a source, compute its index and refine each crossing.
pub fn shelf_index<S: PsiSource + ?Sized>(src: &S, t0: f64, t1: f64, opts: &IndexOptions) -> Result<ShelfResult> {
    let path = sample_path(src, t0, t1, opts)?;
    index_with_locator(&path, opts, Some(src))
}

fn index_with_locator<S: PsiSource + ?Sized>(
    path: &PsiPath,
    opts: &IndexOptions,
    src: Option<&S>,
) -> Result<ShelfResult> {
    let inv = path.invariance_min();
    if inv < opts.invariance_tol {
        // keep the part before the break for diagnostics
        let cut = path
            .psi1
            .iter()
            .zip(&path.psi2)
            .position(|(a, b)| a * a + b * b < opts.invariance_tol)
            .unwrap_or(path.len());
        let mut partial = PsiPath {
            ts: path.ts[..cut].to_vec(),
            psi1: path.psi1[..cut].to_vec(),
            psi2: path.psi2[..cut].to_vec(),
        };
        let (index, crossings) = if partial.len() >= 2 {
            let r = events(&partial, opts, src)?;
            (r.0, r.1)
        } else {
            (0, vec![])
        };
        partial = path.clone();
        return Ok(ShelfResult { index, crossings, invariance_min: inv, broken: true, path: partial });
    }
    let (index, crossings) = events(path, opts, src)?;
    Ok(ShelfResult { index, crossings, invariance_min: inv, broken: false, path: path.clone() })
}

fn events<S: PsiSource + ?Sized>(path: &PsiPath, opts: &IndexOptions, src: Option<&S>) -> Result<(i64, Vec<CrossingEvent>)> {
    let ang = lift_angle(path, opts)?;
    let n = ang.theta.len();
    let index = crossing_count(ang.theta[n - 1]) - crossing_count(ang.theta[0]);
    let tail_start = if opts.tail_tol.is_some() {
        let mut k = n;
        while k > 0 && ang.snapped[k - 1] {
            k -= 1;
        }
        k
    } else {
        n
    };
    let width = (path.ts[n - 1] - path.ts[0]).abs();
    let mut out = Vec::new();
    for k in 1..n {
        let fa = crossing_count(ang.theta[k - 1]);
        let fb = crossing_count(ang.theta[k]);
        if fa == fb {
            continue;
        }
        let dir = (fb - fa).signum() as i32;
        let (ta, tb) = (ang.ts[k - 1], ang.ts[k]);
        let kind = if k >= tail_start {
            CrossingKind::Asymptotic
        } else if k == n - 1 && ang.snapped[k] {
            CrossingKind::EndArrival
        } else if k == 1 && ang.snapped[0] {
            CrossingKind::StartDeparture
        } else {
            CrossingKind::Interior
        };
        let target = PI + 2.0 * PI * (fa.max(fb) - 1) as f64;
        let loc = match (kind, src) {
            (CrossingKind::Interior, Some(s)) => {
                locate(s, ta, tb, ang.theta[k - 1], path.psi1[k - 1], path.psi2[k - 1], target, opts.locate_rtol)?
            }
            (CrossingKind::StartDeparture, _) => ta,
            (CrossingKind::EndArrival, _) => tb,
            (CrossingKind::Asymptotic, _) => path.ts[n - 1],
            (CrossingKind::Interior, None) => {
                let (a, b) = (path.psi1[k - 1], path.psi1[k]);
                if a != b { ta + (tb - ta) * a / (a - b) } else { 0.5 * (ta + tb) }
            }
        };
        let (psi2, slope_direction) = match src {
            Some(s) if kind == CrossingKind::Interior => {
                let h = 1e-5 * width;
                let (_, p2) = s.psi(loc)?;
                let (l1, _) = s.psi((loc - h).max(path.ts[0].min(path.ts[n - 1])))?;
                let (r1, _) = s.psi((loc + h).min(path.ts[0].max(path.ts[n - 1])))?;
                let slope = (r1 - l1) / (2.0 * h) * (path.ts[n - 1] - path.ts[0]).signum();
                (p2, crossing_direction(slope, p2).ok())
            }
            _ => {
                let j = if kind == CrossingKind::StartDeparture { k - 1 } else { k };
                (path.psi2[j], None)
            }
        };
        out.push(CrossingEvent { location: loc, direction: dir, kind, slope_direction, psi2 });
    }
    Ok((index, out))
}

#[allow(clippy::too_many_arguments)]
fn locate<S: PsiSource + ?Sized>(
    src: &S,
    mut ta: f64,
    mut tb: f64,
    theta_a: f64,
    pa1: f64,
    pa2: f64,
    target: f64,
    rtol: f64,
) -> Result<f64> {
    // theta(t) = theta_a + 2 vector_step(a, t) is continuous on the interval
    let side = |t: f64| -> Result<bool> {
        let (p1, p2) = src.psi(t)?;
        Ok(theta_a + 2.0 * vector_step(pa1, pa2, p1, p2) >= target)
    };
    let sa = theta_a >= target;
    let scale = ta.abs().max(tb.abs()).max(1.0);
    for _ in 0..200 {
        if (tb - ta).abs() <= rtol * scale {
            break;
        }
        let m = 0.5 * (ta + tb);
        if side(m)? == sa {
            ta = m;
        } else {
            tb = m;
        }
    }
    Ok(0.5 * (ta + tb))
}
