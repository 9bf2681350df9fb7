//! CSV, JSON-lines and SVG emitters.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use maslov_box::index::{PsiPath, ShelfResult};
use maslov_box::tracer::SpectralCurve;
use maslov_box::Result;
use serde::Serialize;
use svg::node::element::{Circle, Group, Line, Polyline, Rectangle, Text};
use svg::Document;

pub(crate) fn io(e: csv::Error) -> maslov_box::MaslovError {
    maslov_box::MaslovError::Io(e.to_string())
}

/// 17 significant digits; parses back to the identical `f64`.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_columns(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r.iter().map(|v| fmt17(*v))).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// `t, psi1, psi2` of a sampled shelf.
pub fn write_shelf_csv(path: &Path, shelf: &ShelfResult) -> Result<()> {
    let p = &shelf.path;
    write_columns(path, &["t", "psi1", "psi2"], (0..p.len()).map(|k| vec![p.ts[k], p.psi1[k], p.psi2[k]]))
}

pub fn read_shelf_csv(path: &Path) -> Result<PsiPath> {
    let mut r = csv::Reader::from_path(path).map_err(io)?;
    let (mut ts, mut p1, mut p2) = (Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(io)?;
        let f = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| maslov_box::MaslovError::Config(format!("{}: malformed row", path.display())))
        };
        ts.push(f(0)?);
        p1.push(f(1)?);
        p2.push(f(2)?);
    }
    Ok(PsiPath { ts, psi1: p1, psi2: p2 })
}

pub fn write_curves_csv(path: &Path, curves: &[SpectralCurve]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["curve", "lambda", "x", "psi2_sign"]).map_err(io)?;
    for (i, c) in curves.iter().enumerate() {
        for p in &c.points {
            w.write_record([i.to_string(), fmt17(p.lambda), fmt17(p.x), p.psi2_sign.to_string()]).map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One JSON object per line.
pub fn write_json_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut f = File::create(path)?;
    for it in items {
        let line = serde_json::to_string(it).map_err(|e| maslov_box::MaslovError::Config(e.to_string()))?;
        writeln!(f, "{line}")?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub enum Mark {
    Line,
    Dots,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
    pub mark: Mark,
}

/// A minimal static 2-D plot.
#[derive(Debug, Clone)]
pub struct Figure {
    pub title: String,
    pub xlabel: String,
    pub ylabel: String,
    pub xrange: (f64, f64),
    pub yrange: (f64, f64),
    pub frame: Option<((f64, f64), (f64, f64))>,
    pub series: Vec<Series>,
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const ML: f64 = 70.0;
const MR: f64 = 20.0;
const MT: f64 = 40.0;
const MB: f64 = 55.0;

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

impl Figure {
    fn sx(&self, v: f64) -> f64 {
        ML + (v - self.xrange.0) / (self.xrange.1 - self.xrange.0) * (W - ML - MR)
    }
    fn sy(&self, v: f64) -> f64 {
        H - MB - (v - self.yrange.0) / (self.yrange.1 - self.yrange.0) * (H - MT - MB)
    }

    pub fn to_document(&self) -> Document {
        let mut doc = Document::new()
            .set("viewBox", (0, 0, W, H))
            .set("width", W)
            .set("height", H)
            .add(Rectangle::new().set("width", W).set("height", H).set("fill", "white"));
        let axes = Group::new().set("stroke", "black").set("stroke-width", 1);
        let (x0, x1) = (self.sx(self.xrange.0), self.sx(self.xrange.1));
        let (y0, y1) = (self.sy(self.yrange.0), self.sy(self.yrange.1));
        let mut axes = axes
            .add(Line::new().set("x1", x0).set("y1", y0).set("x2", x1).set("y2", y0))
            .add(Line::new().set("x1", x0).set("y1", y0).set("x2", x0).set("y2", y1));
        let mut labels = Group::new().set("font-family", "sans-serif").set("font-size", 12);
        for t in ticks(self.xrange.0, self.xrange.1) {
            let px = self.sx(t);
            axes = axes.add(Line::new().set("x1", px).set("y1", y0).set("x2", px).set("y2", y0 + 5.0));
            labels = labels.add(
                Text::new(format!("{t}")).set("x", px).set("y", y0 + 18.0).set("text-anchor", "middle"),
            );
        }
        for t in ticks(self.yrange.0, self.yrange.1) {
            let py = self.sy(t);
            axes = axes.add(Line::new().set("x1", x0 - 5.0).set("y1", py).set("x2", x0).set("y2", py));
            labels = labels.add(
                Text::new(format!("{t}")).set("x", x0 - 8.0).set("y", py + 4.0).set("text-anchor", "end"),
            );
        }
        labels = labels
            .add(
                Text::new(self.xlabel.clone())
                    .set("x", 0.5 * (x0 + x1))
                    .set("y", H - 12.0)
                    .set("text-anchor", "middle")
                    .set("font-size", 15),
            )
            .add(
                Text::new(self.ylabel.clone())
                    .set("x", 18.0)
                    .set("y", 0.5 * (y0 + y1))
                    .set("text-anchor", "middle")
                    .set("font-size", 15),
            )
            .add(
                Text::new(self.title.clone())
                    .set("x", 0.5 * W)
                    .set("y", 22.0)
                    .set("text-anchor", "middle")
                    .set("font-size", 14),
            );
        doc = doc.add(axes).add(labels);
        if let Some(((a, b), (c, d))) = self.frame {
            let (px, py) = (self.sx(a), self.sy(d));
            doc = doc.add(
                Rectangle::new()
                    .set("x", px)
                    .set("y", py)
                    .set("width", self.sx(b) - px)
                    .set("height", self.sy(c) - py)
                    .set("fill", "none")
                    .set("stroke", "#444")
                    .set("stroke-dasharray", "4,3"),
            );
        }
        for s in &self.series {
            match s.mark {
                Mark::Line => {
                    let pts: Vec<String> =
                        s.points.iter().map(|&(a, b)| format!("{:.2},{:.2}", self.sx(a), self.sy(b))).collect();
                    doc = doc.add(
                        Polyline::new()
                            .set("points", pts.join(" "))
                            .set("fill", "none")
                            .set("stroke", s.color)
                            .set("stroke-width", 1.5),
                    );
                }
                Mark::Dots => {
                    let mut g = Group::new().set("fill", s.color);
                    for &(a, b) in &s.points {
                        g = g.add(Circle::new().set("cx", self.sx(a)).set("cy", self.sy(b)).set("r", 3));
                    }
                    doc = doc.add(g);
                }
            }
        }
        doc
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        svg::save(path, &self.to_document())?;
        Ok(())
    }
}
