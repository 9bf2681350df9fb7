//! The four subcommands. Each returns the process exit code on success.

use std::fs;
use std::path::Path;

use maslov_box::evans::{
    corner_increment, evans_d2_finite_difference, evans_d2prime0_gkdv, evans_dprime0, evans_sweep,
    sign_change_brackets, DerivativeReport,
};
use maslov_box::index::{CrossingEvent, ShelfResult};
use maslov_box::models::gkdv::GkdvModel;
use maslov_box::models::kdvb::kdvb_wave;
use maslov_box::shooting::ColumnPath;
use maslov_box::verdict::{gkdv_analysis, kdvb_analysis, Analysis, RunSettings};
use maslov_box::{MaslovError, Result};
use serde::Serialize;

use crate::output;
use crate::config::{build, Built, ModelSpec, RunConfig};
use crate::output::{
    fmt17, write_columns, write_curves_csv, write_json_lines, write_shelf_csv, Figure, Mark, Series,
};

const WAVE_POINTS: usize = 2001;
/// Step of the finite-difference check of `D''(0)`.
const FD_STEP: f64 = 1e-3;

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| if k + 1 == n { b } else { a + (b - a) * k as f64 / (n - 1) as f64 }).collect()
}

fn padded(r: (f64, f64)) -> (f64, f64) {
    let d = 0.05 * (r.1 - r.0);
    (r.0 - d, r.1 + d)
}

/// Profile `x, u, u', u''` on the x window.
pub fn cmd_wave(cfg: &RunConfig) -> Result<i32> {
    let xs = linspace(cfg.x.0, cfg.x.1, WAVE_POINTS);
    let (rows, label): (Vec<[f64; 4]>, String) = match cfg.model {
        ModelSpec::Gkdv { p, s } => {
            let m = GkdvModel::new(p, s)?;
            (xs.iter().map(|&x| m.derivatives(x)).collect(), format!("gKdV p = {p}, s = {s}"))
        }
        ModelSpec::Kdvb { nu } => {
            let m = kdvb_wave(nu)?;
            (xs.iter().map(|&x| m.derivatives(x)).collect(), format!("KdV-Burgers nu = {nu}"))
        }
    };
    ensure_dir(&cfg.out)?;
    if cfg.csv {
        write_columns(
            &cfg.out.join("wave.csv"),
            &["x", "u", "u_x", "u_xx"],
            xs.iter().zip(&rows).map(|(&x, r)| vec![x, r[0], r[1], r[2]]),
        )?;
    }
    if cfg.svg {
        let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r[0]), b.max(r[0])));
        let fig = Figure {
            title: format!("stationary wave, {label}"),
            xlabel: "x".into(),
            ylabel: "u".into(),
            xrange: cfg.x,
            yrange: padded((lo, hi.max(lo + 1e-12))),
            frame: None,
            series: vec![Series {
                points: xs.iter().zip(&rows).map(|(&x, r)| (x, r[0])).collect(),
                color: "#1f4e9c",
                mark: Mark::Line,
            }],
        };
        fig.save(&cfg.out.join("wave.svg"))?;
    }
    let imax = (0..rows.len()).max_by(|&a, &b| rows[a][0].total_cmp(&rows[b][0])).unwrap_or(0);
    println!("{label}: {} samples on [{}, {}], max u = {:.6} at x = {:.4}", xs.len(), cfg.x.0, cfg.x.1, rows[imax][0], xs[imax]);
    Ok(0)
}

fn settings(cfg: &RunConfig, trunc: maslov_box::shooting::TruncationChoice) -> Result<RunSettings> {
    Ok(RunSettings { window: cfg.window()?, grid: cfg.grid, trunc, trace: true })
}

/// Box, full-line right shelf, curves and verdict for a config.
pub fn run_analysis(cfg: &RunConfig) -> Result<Analysis> {
    let setup = build(cfg)?;
    let set = settings(cfg, setup.trunc)?;
    match &setup.built {
        Built::Gkdv(m) => gkdv_analysis(m, &set),
        Built::Kdvb(m) => kdvb_analysis(m, &set),
    }
}

#[derive(Serialize)]
struct ShelfLine<'a> {
    shelf: &'a str,
    index: i64,
    broken: bool,
    invariance_min: f64,
    crossings: &'a [CrossingEvent],
}

#[derive(Serialize)]
struct BoxLine {
    m: Option<i64>,
    lambda: (f64, f64),
    x: (f64, f64),
    right_full_line_index: Option<i64>,
    right_to_right: Option<usize>,
    right_to_other: Option<usize>,
    stalled: Option<usize>,
    lambda_min: Option<f64>,
}

const SHELVES: [&str; 4] = ["bottom", "right", "top", "left"];

fn shelves(a: &Analysis) -> [&ShelfResult; 4] {
    [&a.boxr.bottom, &a.boxr.right, &a.boxr.top, &a.boxr.left]
}

fn write_box_outputs(cfg: &RunConfig, a: &Analysis) -> Result<()> {
    let dir = &cfg.out;
    let curves = a.curves.as_ref().map(|c| c.curves.as_slice()).unwrap_or(&[]);
    if cfg.csv {
        for (name, s) in SHELVES.iter().zip(shelves(a)) {
            write_shelf_csv(&dir.join(format!("shelf_{name}.csv")), s)?;
        }
        let mut w = csv::Writer::from_path(dir.join("crossings.csv")).map_err(output::io)?;
        w.write_record(["shelf", "location", "direction", "kind"]).map_err(output::io)?;
        for (name, s) in SHELVES.iter().zip(shelves(a)) {
            for c in &s.crossings {
                let kind = serde_json::to_value(c.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
                w.write_record([name.to_string(), fmt17(c.location), c.direction.to_string(), kind]).map_err(output::io)?;
            }
        }
        w.flush()?;
        write_curves_csv(&dir.join("curves.csv"), curves)?;
    }
    let mut lines: Vec<serde_json::Value> = Vec::new();
    for (name, s) in SHELVES.iter().zip(shelves(a)) {
        let l = ShelfLine { shelf: name, index: s.index, broken: s.broken, invariance_min: s.invariance_min, crossings: &s.crossings };
        lines.push(serde_json::to_value(l).map_err(|e| MaslovError::Io(e.to_string()))?);
    }
    let w = a.boxr.window;
    let bl = BoxLine {
        m: a.boxr.m,
        lambda: w.lambda,
        x: w.x,
        right_full_line_index: a.right_full.index,
        right_to_right: a.curves.as_ref().map(|c| c.right_to_right),
        right_to_other: a.curves.as_ref().map(|c| c.right_to_other),
        stalled: a.curves.as_ref().map(|c| c.stalled),
        lambda_min: curves.iter().map(|c| c.lambda_min()).reduce(f64::min),
    };
    lines.push(serde_json::to_value(bl).map_err(|e| MaslovError::Io(e.to_string()))?);
    write_json_lines(&dir.join("box.jsonl"), &lines)?;
    write_json_lines(&dir.join("verdict.json"), std::slice::from_ref(&a.report))?;
    if cfg.svg {
        box_figure(a).save(&dir.join("box.svg"))?;
    }
    Ok(())
}

/// Spectral curves, boundary crossings and invariance-loss points in the box.
pub fn box_figure(a: &Analysis) -> Figure {
    let w = a.boxr.window;
    let mut series: Vec<Series> = a
        .curves
        .iter()
        .flat_map(|c| c.curves.iter())
        .map(|c| Series { points: c.points.iter().map(|p| (p.lambda, p.x)).collect(), color: "#c0392b", mark: Mark::Line })
        .collect();
    let mut marks = Vec::new();
    for (name, s) in SHELVES.iter().zip(shelves(a)) {
        for c in s.crossings.iter().filter(|c| c.location.is_finite()) {
            marks.push(match *name {
                "bottom" => (c.location, w.x.0),
                "top" => (c.location, w.x.1),
                "left" => (w.lambda.0, c.location),
                _ => (w.lambda.1, c.location),
            });
        }
    }
    series.push(Series { points: marks, color: "#1f4e9c", mark: Mark::Dots });
    series.push(Series {
        points: a.report.loss_points.iter().map(|p| (p.lambda, p.x)).collect(),
        color: "black",
        mark: Mark::Dots,
    });
    Figure {
        title: format!("{}: m = {}", a.report.model, a.boxr.m.map(|m| m.to_string()).unwrap_or_else(|| "undefined".into())),
        xlabel: "λ".into(),
        ylabel: "x".into(),
        xrange: padded(w.lambda),
        yrange: padded(w.x),
        frame: Some((w.lambda, w.x)),
        series,
    }
}

/// Box shelves, spectral curves and the resulting verdict.
pub fn cmd_box(cfg: &RunConfig) -> Result<i32> {
    let a = run_analysis(cfg)?;
    ensure_dir(&cfg.out)?;
    write_box_outputs(cfg, &a)?;
    for (name, s) in SHELVES.iter().zip(shelves(&a)) {
        let locs: Vec<String> = s.crossings.iter().map(|c| format!("{:.6}({:+})", c.location, c.direction)).collect();
        println!("{name:>6} shelf: index {:>3}, crossings [{}]{}", s.index, locs.join(", "), if s.broken { ", invariance broken" } else { "" });
    }
    println!("m = {}", a.boxr.m.map(|m| m.to_string()).unwrap_or_else(|| "undefined".into()));
    if let Some(c) = &a.curves {
        println!(
            "spectral curves: {} traced, {} right-to-right, {} right-to-other, {} stalled",
            c.curves.len(),
            c.right_to_right,
            c.right_to_other,
            c.stalled
        );
    }
    println!("verdict: {}", a.report.summary);
    Ok(a.report.exit_code())
}

#[derive(Serialize)]
struct EvansReport {
    model: String,
    brackets: Vec<(f64, f64)>,
    derivative: DerivativeReport,
    finite_difference: Option<DerivativeReport>,
    corner: Option<i64>,
}

/// `D` on the lambda window plus derivatives at 0 and the corner increment.
pub fn cmd_evans(cfg: &RunConfig) -> Result<i32> {
    let setup = build(cfg)?;
    let (sys, trunc) = (&setup.sys, &setup.trunc);
    let lambdas = linspace(cfg.lambda.0, cfg.lambda.1, cfg.grid.0);
    let samples = evans_sweep(sys, &lambdas, 0.0, trunc)?;
    let brackets = sign_change_brackets(&samples);
    let (model, derivative, fd, order) = match &setup.built {
        Built::Gkdv(m) => {
            let d2 = evans_d2prime0_gkdv(m)?;
            let d1 = evans_dprime0(sys, trunc)?;
            let fd = evans_d2_finite_difference(sys, FD_STEP, trunc)?;
            (format!("gKdV p = {}, s = {}", m.p, m.s), DerivativeReport { d0: d1.d0, d1: d1.d1, ..d2 }, Some(fd), 2)
        }
        Built::Kdvb(m) => (format!("KdV-Burgers nu = {}", m.nu), evans_dprime0(sys, trunc)?, None, 1),
    };
    let lead = if order == 2 { derivative.d2.unwrap_or(0.0) } else { derivative.d1 };
    let psi2_end = ColumnPath::full(sys, cfg.lambda.1, trunc)?.psi_plus(trunc.l_plus).1;
    let corner = corner_increment(lead.signum() as i32, order, psi2_end.signum() as i32).ok();
    ensure_dir(&cfg.out)?;
    if cfg.csv {
        write_columns(&cfg.out.join("evans.csv"), &["lambda", "D"], samples.iter().map(|s| vec![s.lambda, s.value]))?;
    }
    let report = EvansReport { model, brackets, derivative, finite_difference: fd, corner };
    write_json_lines(&cfg.out.join("evans_report.json"), std::slice::from_ref(&report))?;
    if cfg.svg {
        let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s.value), b.max(s.value)));
        Figure {
            title: format!("Evans function, {}", report.model),
            xlabel: "λ".into(),
            ylabel: "D".into(),
            xrange: cfg.lambda,
            yrange: padded((lo.min(0.0), hi.max(lo + 1e-12))),
            frame: None,
            series: vec![Series { points: samples.iter().map(|s| (s.lambda, s.value)).collect(), color: "#1f4e9c", mark: Mark::Line }],
        }
        .save(&cfg.out.join("evans.svg"))?;
    }
    println!("{}", report.model);
    println!("  D(0)   = {:.6e}", report.derivative.d0);
    println!("  D'(0)  = {:.6e}", report.derivative.d1);
    if let Some(d2) = report.derivative.d2 {
        println!("  D''(0) = {d2:.6e} (closed form)");
    }
    if let Some(f) = report.finite_difference.and_then(|f| f.d2) {
        println!("  D''(0) = {f:.6e} (finite difference, h = {FD_STEP})");
    }
    println!("  corner increment: {}", corner.map(|c| c.to_string()).unwrap_or_else(|| "undecided".into()));
    for (a, b) in &report.brackets {
        println!("  D changes sign in [{a:.6}, {b:.6}]");
    }
    Ok(0)
}

/// Consolidated stability report.
pub fn cmd_verdict(cfg: &RunConfig) -> Result<i32> {
    let a = run_analysis(cfg)?;
    ensure_dir(&cfg.out)?;
    write_json_lines(&cfg.out.join("verdict.json"), std::slice::from_ref(&a.report))?;
    print!("{}", a.report.text());
    Ok(a.report.exit_code())
}

/// Exit code for a failed run: 4 for configuration problems, 5 for numerics.
pub fn error_exit_code(e: &MaslovError) -> i32 {
    match e {
        MaslovError::Config(_) | MaslovError::Precondition(_) | MaslovError::Domain(_) => 4,
        _ => 5,
    }
}
