//! Run configuration: INI file plus command-line overrides.
//!
//! ```ini
//! [model]
//! name = gkdv        ; or kdvb
//! p = 3.5
//! s = 0.5
//! nu = 2
//!
//! [box]
//! lambda = -7, 0
//! x = -5, 5
//! grid = 141, 101
//!
//! [numerics]
//! rtol = 1e-10
//! atol = 1e-12
//! truncation = auto  ; or a length L
//!
//! [output]
//! dir = out
//! csv = true
//! svg = true
//! ```

use std::path::{Path, PathBuf};

use ini::Ini;
use maslov_box::models::gkdv::{gkdv_system, GkdvModel};
use maslov_box::models::kdvb::{kdvb_system, kdvb_wave, KdvbModel};
use maslov_box::shelves::BoxWindow;
use maslov_box::shooting::{select_truncation, TruncationChoice};
use maslov_box::spectral::SystemDefinition;
use maslov_box::{MaslovError, Result};

pub const MIN_GRID: usize = 16;
const GKDV_DEFAULT_L: f64 = 25.0;
const TRUNC_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSpec {
    Gkdv { p: f64, s: f64 },
    Kdvb { nu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub lambda: (f64, f64),
    pub x: (f64, f64),
    pub grid: (usize, usize),
    pub rtol: f64,
    pub atol: f64,
    pub truncation: Truncation,
    pub out: PathBuf,
    pub csv: bool,
    pub svg: bool,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub model: Option<String>,
    pub p: Option<f64>,
    pub s: Option<f64>,
    pub nu: Option<f64>,
    pub lmin: Option<f64>,
    pub lmax: Option<f64>,
    pub xmin: Option<f64>,
    pub xmax: Option<f64>,
    pub grid: Option<(usize, usize)>,
    pub out: Option<PathBuf>,
    pub svg: Option<bool>,
}

fn cfg_err(msg: impl Into<String>) -> MaslovError {
    MaslovError::Config(msg.into())
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim().parse().map_err(|_| cfg_err(format!("{key}: '{v}' is not a number")))
}

fn parse_pair<T: std::str::FromStr>(key: &str, v: &str) -> Result<(T, T)> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(cfg_err(format!("{key}: expected two comma-separated values, got '{v}'")));
    }
    let p = |s: &str| s.parse::<T>().map_err(|_| cfg_err(format!("{key}: cannot parse '{s}'")));
    Ok((p(parts[0])?, p(parts[1])?))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(cfg_err(format!("{key}: '{v}' is not a boolean"))),
    }
}

/// Parse a grid given as `n` or `nl,nx`.
pub fn parse_grid(v: &str) -> Result<(usize, usize)> {
    if v.contains(',') {
        parse_pair("grid", v)
    } else {
        let n: usize = v.trim().parse().map_err(|_| cfg_err(format!("grid: cannot parse '{v}'")))?;
        Ok((n, n))
    }
}

#[derive(Default)]
struct Raw {
    model: Option<String>,
    p: Option<f64>,
    s: Option<f64>,
    nu: Option<f64>,
    lambda: Option<(f64, f64)>,
    x: Option<(f64, f64)>,
    grid: Option<(usize, usize)>,
    rtol: Option<f64>,
    atol: Option<f64>,
    truncation: Option<Truncation>,
    out: Option<PathBuf>,
    csv: Option<bool>,
    svg: Option<bool>,
}

fn read_ini(text: &str) -> Result<Raw> {
    let ini = Ini::load_from_str(text).map_err(|e| cfg_err(format!("config: {e}")))?;
    let mut raw = Raw::default();
    for (sec, props) in ini.iter() {
        let sec = sec.unwrap_or("").to_ascii_lowercase();
        for (k, v) in props.iter() {
            let key = format!("{sec}.{}", k.to_ascii_lowercase());
            match key.as_str() {
                "model.name" => raw.model = Some(v.trim().to_ascii_lowercase()),
                "model.p" => raw.p = Some(parse_f64(&key, v)?),
                "model.s" => raw.s = Some(parse_f64(&key, v)?),
                "model.nu" => raw.nu = Some(parse_f64(&key, v)?),
                "box.lambda" => raw.lambda = Some(parse_pair(&key, v)?),
                "box.x" => raw.x = Some(parse_pair(&key, v)?),
                "box.grid" => raw.grid = Some(parse_grid(v)?),
                "numerics.rtol" => raw.rtol = Some(parse_f64(&key, v)?),
                "numerics.atol" => raw.atol = Some(parse_f64(&key, v)?),
                "numerics.truncation" => {
                    raw.truncation = Some(if v.trim().eq_ignore_ascii_case("auto") {
                        Truncation::Auto
                    } else {
                        Truncation::Fixed(parse_f64(&key, v)?)
                    })
                }
                "output.dir" => raw.out = Some(PathBuf::from(v.trim())),
                "output.csv" => raw.csv = Some(parse_bool(&key, v)?),
                "output.svg" => raw.svg = Some(parse_bool(&key, v)?),
                _ => return Err(cfg_err(format!("unknown config key '{key}'"))),
            }
        }
    }
    Ok(raw)
}

impl RunConfig {
    /// Build from optional INI text and overrides, filling model defaults.
    pub fn from_sources(ini_text: Option<&str>, ov: &Overrides) -> Result<Self> {
        let mut raw = match ini_text {
            Some(t) => read_ini(t)?,
            None => Raw::default(),
        };
        if ov.model.is_some() {
            raw.model = ov.model.clone();
        }
        raw.p = ov.p.or(raw.p);
        raw.s = ov.s.or(raw.s);
        raw.nu = ov.nu.or(raw.nu);
        raw.grid = ov.grid.or(raw.grid);
        raw.out = ov.out.clone().or(raw.out);
        raw.svg = ov.svg.or(raw.svg);
        let name = raw.model.clone().unwrap_or_else(|| "gkdv".into());
        let (model, dl, dx) = match name.as_str() {
            "gkdv" => {
                let m = ModelSpec::Gkdv { p: raw.p.unwrap_or(3.5), s: raw.s.unwrap_or(0.5) };
                (m, (-7.0, 0.0), (-5.0, 5.0))
            }
            "kdvb" => {
                let nu = raw.nu.unwrap_or(2.0);
                let (l, x) = if nu < 0.25 { ((-5.0, 0.0), (-20.0, 20.0)) } else { ((-0.02, 0.0), (-22.0, 22.0)) };
                (ModelSpec::Kdvb { nu }, l, x)
            }
            other => return Err(cfg_err(format!("unknown model '{other}' (expected gkdv or kdvb)"))),
        };
        let mut lambda = raw.lambda.unwrap_or(dl);
        let mut x = raw.x.unwrap_or(dx);
        if let Some(v) = ov.lmin {
            lambda.0 = v;
        }
        if let Some(v) = ov.lmax {
            lambda.1 = v;
        }
        if let Some(v) = ov.xmin {
            x.0 = v;
        }
        if let Some(v) = ov.xmax {
            x.1 = v;
        }
        let default_trunc = match model {
            ModelSpec::Gkdv { .. } => Truncation::Fixed(GKDV_DEFAULT_L),
            ModelSpec::Kdvb { .. } => Truncation::Auto,
        };
        let cfg = RunConfig {
            model,
            lambda,
            x,
            grid: raw.grid.unwrap_or((141, 101)),
            rtol: raw.rtol.unwrap_or(1e-10),
            atol: raw.atol.unwrap_or(1e-12),
            truncation: raw.truncation.unwrap_or(default_trunc),
            out: raw.out.unwrap_or_else(|| PathBuf::from("out")),
            csv: raw.csv.unwrap_or(true),
            svg: raw.svg.unwrap_or(true),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<Self> {
        let text = match path {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|e| cfg_err(format!("{}: {e}", p.display())))?),
            None => None,
        };
        Self::from_sources(text.as_deref(), ov)
    }

    pub fn validate(&self) -> Result<()> {
        let (l1, l2) = self.lambda;
        let (c1, c2) = self.x;
        if !(l1 < l2) || !(c1 < c2) {
            return Err(cfg_err("windows must be nonempty"));
        }
        if l2 > 0.0 {
            return Err(cfg_err(format!("lambda window must lie in (-inf, 0], got upper end {l2}")));
        }
        if self.grid.0 < MIN_GRID || self.grid.1 < MIN_GRID {
            return Err(cfg_err(format!("grid must be at least {MIN_GRID} per axis")));
        }
        for t in [self.rtol, self.atol] {
            if !(t > 0.0 && t <= 1e-4) {
                return Err(cfg_err(format!("tolerance {t} outside (0, 1e-4]")));
            }
        }
        match self.model {
            ModelSpec::Gkdv { p, s } => {
                GkdvModel::new(p, s)?;
            }
            ModelSpec::Kdvb { nu } => {
                if !(nu > 0.0) || (nu - 0.25).abs() < 1e-12 {
                    return Err(cfg_err(format!("KdV-Burgers needs nu > 0, nu != 1/4, got {nu}")));
                }
            }
        }
        if let Truncation::Fixed(l) = self.truncation {
            if !(l > 0.0) || l < c2.abs().max(c1.abs()) {
                return Err(cfg_err(format!("truncation L = {l} must cover the x window")));
            }
        }
        Ok(())
    }

    pub fn window(&self) -> Result<BoxWindow> {
        BoxWindow::new(self.lambda.0, self.lambda.1, self.x.0, self.x.1)
    }
}

/// A built model with its system and resolved truncation.
pub enum Built {
    Gkdv(GkdvModel),
    Kdvb(Box<KdvbModel>),
}

pub struct Setup {
    pub built: Built,
    pub sys: SystemDefinition,
    pub trunc: TruncationChoice,
}

pub fn build(cfg: &RunConfig) -> Result<Setup> {
    let (built, sys) = match cfg.model {
        ModelSpec::Gkdv { p, s } => {
            let m = GkdvModel::new(p, s)?;
            let sys = gkdv_system(&m);
            (Built::Gkdv(m), sys)
        }
        ModelSpec::Kdvb { nu } => {
            let m = kdvb_wave(nu)?;
            let sys = kdvb_system(&m);
            (Built::Kdvb(Box::new(m)), sys)
        }
    };
    let mut trunc = match cfg.truncation {
        Truncation::Fixed(l) => TruncationChoice::symmetric(l),
        Truncation::Auto => select_truncation(&sys, cfg.lambda, TRUNC_TOL)?,
    };
    trunc.l_minus = trunc.l_minus.max(-cfg.x.0);
    trunc.l_plus = trunc.l_plus.max(cfg.x.1);
    trunc.rtol = cfg.rtol;
    trunc.atol = cfg.atol;
    trunc.validate()?;
    Ok(Setup { built, sys, trunc })
}
