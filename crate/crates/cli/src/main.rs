use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use maslov_box_cli::commands::{cmd_box, cmd_evans, cmd_verdict, cmd_wave, error_exit_code};
use maslov_box_cli::config::{parse_grid, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "maslov-box", version, about = "Hyperplane index boxes, spectral curves and Evans functions")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Stationary wave profile
    Wave(Opts),
    /// Shelf indices, boundary invariant and spectral curves of a box
    Box(Opts),
    /// Evans function sweep and derivatives at zero
    Evans(Opts),
    /// Consolidated stability report
    Verdict(Opts),
}

#[derive(Args)]
struct Opts {
    /// INI configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// gkdv or kdvb
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lmin: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lmax: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    xmin: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    xmax: Option<f64>,
    /// `n` or `nl,nx`
    #[arg(long)]
    grid: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit SVG figures
    #[arg(long)]
    svg: Option<bool>,
}

fn load(o: &Opts) -> maslov_box::Result<RunConfig> {
    let ov = Overrides {
        model: o.model.as_ref().map(|m| m.to_ascii_lowercase()),
        p: o.p,
        s: o.s,
        nu: o.nu,
        lmin: o.lmin,
        lmax: o.lmax,
        xmin: o.xmin,
        xmax: o.xmax,
        grid: o.grid.as_deref().map(parse_grid).transpose()?,
        out: o.out.clone(),
        svg: o.svg,
    };
    RunConfig::load(o.config.as_deref(), &ov)
}

fn init_threads() {
    if let Some(n) = std::env::var("MASLOV_BOX_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    let (opts, run): (&Opts, fn(&RunConfig) -> maslov_box::Result<i32>) = match &cli.cmd {
        Cmd::Wave(o) => (o, cmd_wave),
        Cmd::Box(o) => (o, cmd_box),
        Cmd::Evans(o) => (o, cmd_evans),
        Cmd::Verdict(o) => (o, cmd_verdict),
    };
    let code = match load(opts).and_then(|cfg| run(&cfg)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            error_exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
