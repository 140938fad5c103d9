//! Command-line driver.
//!
//! Every command reads the same handful of settings, from a flat
//! `key = value` file (`--config`) overridden by flags:
//!
//! ```text
//!     d1        = 0.4            # or start:end:step
//!     delta2    = 0:0.64:0.02
//!     L         = 20
//!     dx        = 0.1
//!     accuracy  = 6              # stencil order, 4 or 6
//!     out       = results/run1   # file prefix
//!     plots     = true
//!     solve     = pushed         # sweep only: pushed | pulled | transition
//!     margin    = 0.05           # spectrum only: window Re lambda >= -margin
//! ```
//!
//! Output files are `<out>_<command>.csv` (and `.svg` with `--plots`).
//! Floats are written with 17 significant digits so identical inputs give
//! identical files.

use crate::continuation::{self, FrontSolution, Grid, SweepPlan, SweepRecord, SweepSolve, SweepVar};
use crate::error::Error;
use crate::pme::{self, ExpansionReport};
use crate::spectra::{self, SpectralWindow, WeightedLinearization};
use clap::{Parser, Subcommand};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "frontlab", version, about = "Fronts of the logistic Keller-Segel model with chemorepulsion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat key = value settings file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Value or start:end:step.
    #[arg(long, global = true)]
    pub d1: Option<String>,
    /// Value or start:end:step.
    #[arg(long, global = true)]
    pub delta2: Option<String>,
    /// Domain half-width.
    #[arg(long = "L", global = true)]
    pub l: Option<f64>,
    /// Grid spacing
    #[arg(long, global = true)]
    pub dx: Option<f64>,
    /// Output prefix.
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    pub plots: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Pushed speeds against the porous-medium expansion.
    Speeds,
    /// One front profile.
    Front,
    /// Transition locus d1*(delta^2).
    Transition,
    /// Natural-parameter sweep of pushed, pulled or transition fronts.
    Sweep,
    /// Closed forms against independent quadrature.
    Verify,
    /// Point spectrum of one front in its weighted space.
    Spectrum,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Speeds => "speeds",
            Command::Front => "front",
            Command::Transition => "transition",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
            Command::Spectrum => "spectrum",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numerical(_) | CliError::Io(_) => EXIT_NUMERICAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParams(m) => CliError::Usage(m),
            e => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// A single value or an inclusive `start:end:step` range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl Range {
    pub fn single(v: f64) -> Self {
        Range { start: v, end: v, step: 1.0 }
    }

    pub fn parse(s: &str) -> CliResult<Range> {
        let num = |t: &str| {
            t.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| CliError::Usage(format!("not a number: {t:?}")))
        };
        let parts: Vec<&str> = s.split(':').collect();
        let r = match parts.as_slice() {
            [v] => Range::single(num(v)?),
            [a, b, h] => Range { start: num(a)?, end: num(b)?, step: num(h)? },
            _ => return Err(CliError::Usage(format!("expected a value or start:end:step, got {s:?}"))),
        };
        if r.end < r.start || !(r.step > 0.0) {
            return Err(CliError::Usage(format!("empty range {s:?}")));
        }
        Ok(r)
    }

    pub fn is_single(&self) -> bool {
        self.start == self.end
    }

    pub fn values(&self) -> Vec<f64> {
        let count = ((self.end - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub d1: Range,
    pub delta2: Range,
    pub grid: Grid,
    pub out: String,
    pub emit_plots: bool,
    pub solve: SweepSolve,
    pub margin: f64,
}

impl RunConfig {
    /// Defaults of `command`, then the config file, then the flags.
    pub fn from_cli(cli: &Cli) -> CliResult<RunConfig> {
        let (d1, delta2) = match cli.command {
            Command::Speeds | Command::Sweep => ("0.2:0.49:0.01", "0.1"),
            Command::Front => ("0.4", "0.1"),
            Command::Transition => ("0.5", "0:0.64:0.02"),
            Command::Verify | Command::Spectrum => ("0.4", "0"),
        };
        let mut kv: Vec<(String, String)> = vec![
            ("d1".into(), d1.into()),
            ("delta2".into(), delta2.into()),
            ("L".into(), "20".into()),
            ("dx".into(), "0.1".into()),
            ("accuracy".into(), continuation::DEFAULT_ACCURACY.to_string()),
            ("out".into(), "frontlab".into()),
            ("plots".into(), "false".into()),
            ("solve".into(), "pushed".into()),
            ("margin".into(), "0.05".into()),
        ];
        let mut set = |k: &str, v: String| match kv.iter_mut().find(|(key, _)| key == k) {
            Some(slot) => {
                slot.1 = v;
                Ok(())
            }
            None => Err(CliError::Usage(format!("unknown config key {k:?}"))),
        };
        if let Some(path) = &cli.config {
            let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            for (i, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| CliError::Usage(format!("{}:{}: expected key = value", path.display(), i + 1)))?;
                set(k.trim(), v.trim().to_string())?;
            }
        }
        if let Some(v) = &cli.d1 {
            set("d1", v.clone())?;
        }
        if let Some(v) = &cli.delta2 {
            set("delta2", v.clone())?;
        }
        if let Some(v) = cli.l {
            set("L", v.to_string())?;
        }
        if let Some(v) = cli.dx {
            set("dx", v.to_string())?;
        }
        if let Some(v) = &cli.out {
            set("out", v.clone())?;
        }
        if cli.plots {
            set("plots", "true".into())?;
        }
        let get = |k: &str| kv.iter().find(|(key, _)| key == k).map(|(_, v)| v.as_str()).unwrap();
        let num = |k: &str| {
            get(k).parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| CliError::Usage(format!("{k} must be a number")))
        };
        let accuracy = get("accuracy").parse::<usize>().map_err(|_| CliError::Usage("accuracy must be 4 or 6".into()))?;
        let grid = Grid::with_accuracy(num("L")?, num("dx")?, accuracy).map_err(|e| CliError::Usage(e.to_string()))?;
        let emit_plots = match get("plots") {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" => false,
            v => return Err(CliError::Usage(format!("plots must be true or false, got {v:?}"))),
        };
        let solve = match get("solve") {
            "pushed" => SweepSolve::Pushed,
            "pulled" => SweepSolve::Pulled,
            "transition" => SweepSolve::Transition,
            v => return Err(CliError::Usage(format!("solve must be pushed, pulled or transition, got {v:?}"))),
        };
        let cfg = RunConfig {
            command: cli.command,
            d1: Range::parse(get("d1"))?,
            delta2: Range::parse(get("delta2"))?,
            grid,
            out: get("out").to_string(),
            emit_plots,
            solve,
            margin: num("margin")?,
        };
        if cfg.d1.start <= 0.0 || cfg.delta2.start < 0.0 {
            return Err(CliError::Usage("need d1 > 0 and delta2 >= 0".into()));
        }
        if cfg.out.is_empty() {
            return Err(CliError::Usage("empty output prefix".into()));
        }
        Ok(cfg)
    }

    fn path(&self, ext: &str) -> PathBuf {
        PathBuf::from(format!("{}_{}.{}", self.out, self.command.name(), ext))
    }
}

/// Fixed float formatting for CSV cells.
pub fn fmt(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "nan".into()
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn csv(provenance: &str, header: &str, rows: &[String]) -> String {
    let mut s = format!("# {provenance}\n{header}\n");
    for r in rows {
        s.push_str(r);
        s.push('\n');
    }
    s
}

fn grid_note(g: &Grid) -> String {
    format!("L={}, dx={}, stencil order {}", g.l, g.dx, g.accuracy)
}

/// Pushed below the predicted transition, pulled above.
fn solve_auto(d1: f64, delta2: f64, grid: &Grid) -> crate::Result<FrontSolution> {
    let delta = delta2.sqrt();
    if d1 < pme::transition_expansion(delta) {
        continuation::solve_pushed(d1, delta, grid, None)
    } else {
        continuation::solve_pulled(d1, delta, grid, None)
    }
}

// ---------------------------------------------------------------------------
// Commands

pub fn cmd_verify(cfg: &RunConfig) -> CliResult<ExpansionReport> {
    let rep = pme::expansion_report()?;
    let rows: Vec<String> = rep
        .rows
        .iter()
        .map(|r| format!("{},{},{},{},{},{}", r.quantity, fmt(r.closed_form), fmt(r.oracle), fmt(r.abs_dev), fmt(r.tol), r.pass))
        .collect();
    println!("{:<34} {:>22} {:>22} {:>10} {}", "quantity", "closed_form", "oracle", "abs_dev", "pass");
    for r in &rep.rows {
        println!("{:<34} {:>22.15} {:>22.15} {:>10.2e} {}", r.quantity, r.closed_form, r.oracle, r.abs_dev, r.pass);
    }
    let prov = "closed_form: closed-form expression; oracle: independent quadrature or reference value; dimensionless";
    write_file(&cfg.path("csv"), &csv(prov, "quantity,closed_form,oracle,abs_dev,tol,pass", &rows))?;
    Ok(rep)
}

pub fn cmd_speeds(cfg: &RunConfig) -> CliResult<Vec<SweepRecord>> {
    let mut recs = vec![];
    for delta2 in cfg.delta2.values() {
        recs.extend(continuation::sweep(&SweepPlan {
            vary: SweepVar::D1,
            start: cfg.d1.start,
            end: cfg.d1.end,
            step: cfg.d1.step,
            fixed: delta2,
            solve: SweepSolve::Pushed,
            grid: cfg.grid,
            bracket_halfwidth: 0.01,
        }));
    }
    let rows: Vec<String> = recs
        .iter()
        .map(|r| {
            let cpm = pme::c_pm(r.d1);
            let cexp = pme::pushed_speed_expansion(r.d1, r.delta2.sqrt()).unwrap_or(f64::NAN);
            format!(
                "{},{},{},{},{},{},{}",
                fmt(r.d1),
                fmt(r.delta2),
                fmt(r.c),
                fmt(cpm),
                fmt(cexp),
                fmt(r.c - cpm),
                r.status.unwrap_or("ok")
            )
        })
        .collect();
    let prov = format!(
        "c_numeric: computed pushed speed ({}); c_pm, c_expansion: closed form; dev = c_numeric - c_pm; speeds in units of the comoving frame",
        grid_note(&cfg.grid)
    );
    write_file(&cfg.path("csv"), &csv(&prov, "d1,delta2,c_numeric,c_pm,c_expansion,dev,status", &rows))?;
    if cfg.emit_plots {
        let mut plot = Plot::new("pushed speed deviation", "d1", "c - c_pm");
        for delta2 in cfg.delta2.values() {
            let pts: Vec<(f64, f64)> =
                recs.iter().filter(|r| r.delta2 == delta2 && !r.is_gap()).map(|r| (r.d1, r.c - pme::c_pm(r.d1))).collect();
            plot.series(&format!("numeric, delta^2 = {delta2}"), pts, COLORS[0], true);
            let fine: Vec<(f64, f64)> = dense(cfg.d1.start, cfg.d1.end.min(0.5), 200)
                .into_iter()
                .filter_map(|d| pme::c_ps2(d).ok().map(|c| (d, c * delta2)))
                .collect();
            plot.series(&format!("expansion, delta^2 = {delta2}"), fine, "black", false);
        }
        write_file(&cfg.path("svg"), &plot.render())?;
    }
    Ok(recs)
}

pub fn cmd_transition(cfg: &RunConfig) -> CliResult<Vec<SweepRecord>> {
    let plan = SweepPlan {
        vary: SweepVar::Delta2,
        start: cfg.delta2.start,
        end: cfg.delta2.end,
        step: cfg.delta2.step,
        fixed: f64::NAN,
        solve: SweepSolve::Transition,
        grid: cfg.grid,
        bracket_halfwidth: 0.01,
    };
    let recs = continuation::sweep(&plan);
    let rows: Vec<String> = recs
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{}",
                fmt(r.delta2),
                fmt(r.d1_star),
                fmt(r.a_slope),
                fmt(pme::transition_expansion(r.delta2.sqrt())),
                fmt(r.a),
                r.status.unwrap_or("ok")
            )
        })
        .collect();
    for r in recs.iter().filter(|r| r.is_gap()) {
        eprintln!("gap at delta2 = {}: {}", r.delta2, r.status.unwrap_or(""));
    }
    let prov = format!(
        "d1_star, a_slope: computed ({}); linear_pred = 1/2 + d12 delta2: closed form; resid: canonical tail coefficient a at the root",
        grid_note(&cfg.grid)
    );
    write_file(&cfg.path("csv"), &csv(&prov, "delta2,d1_star,a_slope,linear_pred,resid,status", &rows))?;
    if cfg.emit_plots {
        let mut plot = Plot::new("pushed-to-pulled transition", "delta^2", "d1*");
        // gaps split the numeric curve
        let mut seg = vec![];
        for r in &recs {
            if r.is_gap() {
                if !seg.is_empty() {
                    plot.series("numeric", std::mem::take(&mut seg), COLORS[0], true);
                }
            } else {
                seg.push((r.delta2, r.d1_star));
            }
        }
        if !seg.is_empty() {
            plot.series("numeric", seg, COLORS[0], true);
        }
        let lin = dense(cfg.delta2.start, cfg.delta2.end, 2).into_iter().map(|d| (d, pme::transition_expansion(d.sqrt()))).collect();
        plot.series("linear prediction", lin, "black", false);
        write_file(&cfg.path("svg"), &plot.render())?;
    }
    Ok(recs)
}

pub fn cmd_sweep(cfg: &RunConfig) -> CliResult<Vec<SweepRecord>> {
    let (vary, range, fixed) = match (cfg.solve, cfg.d1.is_single(), cfg.delta2.is_single()) {
        (SweepSolve::Transition, _, _) => (SweepVar::Delta2, cfg.delta2, f64::NAN),
        (_, false, true) | (_, true, true) => (SweepVar::D1, cfg.d1, cfg.delta2.start),
        (_, true, false) => (SweepVar::Delta2, cfg.delta2, cfg.d1.start),
        (_, false, false) => return Err(CliError::Usage("sweep varies one of d1 and delta2, not both".into())),
    };
    let plan = SweepPlan {
        vary,
        start: range.start,
        end: range.end,
        step: range.step,
        fixed,
        solve: cfg.solve,
        grid: cfg.grid,
        bracket_halfwidth: 0.01,
    };
    let recs = continuation::sweep(&plan);
    let kind = match cfg.solve {
        SweepSolve::Pushed => "pushed",
        SweepSolve::Pulled => "pulled",
        SweepSolve::Transition => "transition",
    };
    let rows: Vec<String> = recs
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{}",
                fmt(r.d1),
                fmt(r.delta2),
                kind,
                fmt(r.c),
                fmt(r.a),
                fmt(r.eta_ps),
                fmt(r.residual),
                r.status.unwrap_or("ok")
            )
        })
        .collect();
    let prov = format!("all columns computed ({}); a in the gauge u(x0) = 1/2; residual: max interior residual", grid_note(&cfg.grid));
    write_file(&cfg.path("csv"), &csv(&prov, "d1,delta2,kind,c,a,eta_ps,residual,status", &rows))?;
    if cfg.emit_plots {
        let (xl, pts): (&str, Vec<(f64, f64)>) = match vary {
            SweepVar::D1 => ("d1", recs.iter().filter(|r| !r.is_gap()).map(|r| (r.d1, r.c)).collect()),
            SweepVar::Delta2 => ("delta^2", recs.iter().filter(|r| !r.is_gap()).map(|r| (r.delta2, r.c)).collect()),
        };
        let mut plot = Plot::new("front speed", xl, "c");
        plot.series(kind, pts, COLORS[0], true);
        write_file(&cfg.path("svg"), &plot.render())?;
    }
    Ok(recs)
}

pub fn cmd_front(cfg: &RunConfig) -> CliResult<FrontSolution> {
    let (d1, delta2) = single_point(cfg)?;
    let f = solve_auto(d1, delta2, &cfg.grid)?;
    let (a, b) = f.canonical_tail();
    println!("kind      {}", f.kind.as_str());
    println!("c         {:.15}", f.c);
    println!("nu        {:.15}", f.nu_farfield);
    println!("a, b      {a:.6e}, {b:.6e}  (gauge u(x0) = 1/2)");
    println!("residual  {:.3e}", f.residual_norm);
    println!("condition {:.3e}", f.condition);
    let (du, dv) = f.derivs();
    let rows: Vec<String> = f
        .grid
        .xs()
        .iter()
        .zip(du.iter().zip(&dv))
        .map(|(x, (u, v))| format!("{},{},{},{},{}", fmt(*x), fmt(u[0]), fmt(v[0]), fmt(u[1]), fmt(v[1])))
        .collect();
    let prov = format!(
        "computed {} front, d1={d1}, delta2={delta2}, c={} ({}); x in comoving coordinates",
        f.kind.as_str(),
        fmt(f.c),
        grid_note(&cfg.grid)
    );
    write_file(&cfg.path("csv"), &csv(&prov, "x,u,v,u_x,v_x", &rows))?;
    if cfg.emit_plots {
        let mut plot = Plot::new(&format!("{} front, d1 = {d1}, delta^2 = {delta2}", f.kind.as_str()), "x", "u, v");
        let xs = f.grid.xs();
        plot.series("u", xs.iter().zip(&du).map(|(x, d)| (*x, d[0])).collect(), COLORS[0], false);
        plot.series("v", xs.iter().zip(&dv).map(|(x, d)| (*x, d[0])).collect(), COLORS[1], false);
        write_file(&cfg.path("svg"), &plot.render())?;
    }
    Ok(f)
}

pub fn cmd_spectrum(cfg: &RunConfig) -> CliResult<Vec<spectra::Candidate>> {
    let (d1, delta2) = single_point(cfg)?;
    let f = solve_auto(d1, delta2, &cfg.grid)?;
    let eta = match f.kind {
        pme::FrontKind::Pushed => spectra::pushed_weight(&f),
        _ => f.params.eta_lin(),
    };
    let lin = WeightedLinearization::assemble(&f, 0.0, eta);
    let cands = spectra::point_spectrum_window(&lin, SpectralWindow::new(cfg.margin))?;
    println!("{} front, weight eta_+ = {eta:.6}, zero-mode residual {:.3e}", f.kind.as_str(), lin.zero_mode_residual());
    for c in &cands {
        println!("  lambda = {:+.6e} {:+.6e}i  {:<9}  drift {:.1e}", c.lambda.re, c.lambda.im, c.class.as_str(), c.drift);
    }
    let mut body = Vec::new();
    spectra::write_csv(&mut body, d1, delta2, &cands)?;
    let rows: Vec<String> = String::from_utf8_lossy(&body).lines().map(String::from).collect();
    let prov = format!(
        "computed eigenvalues in the window Re lambda >= -{}, |lambda| <= {}, weight eta_+ = {} ({}); class from drift under L -> 1.25 L",
        cfg.margin,
        spectra::DEFAULT_LAMBDA_MAX,
        fmt(eta),
        grid_note(&cfg.grid)
    );
    write_file(&cfg.path("csv"), &csv(&prov, spectra::CSV_HEADER, &rows))?;
    if cfg.emit_plots {
        let mut plot = Plot::new("point spectrum window", "Re lambda", "Im lambda");
        for (cls, col) in [(spectra::Class::Point, COLORS[0]), (spectra::Class::Essential, COLORS[1])] {
            let pts = cands.iter().filter(|c| c.class == cls).map(|c| (c.lambda.re, c.lambda.im)).collect();
            plot.scatter(cls.as_str(), pts, col);
        }
        write_file(&cfg.path("svg"), &plot.render())?;
    }
    Ok(cands)
}

fn single_point(cfg: &RunConfig) -> CliResult<(f64, f64)> {
    if !cfg.d1.is_single() || !cfg.delta2.is_single() {
        return Err(CliError::Usage(format!("{} takes single values of d1 and delta2", cfg.command.name())));
    }
    Ok((cfg.d1.start, cfg.delta2.start))
}

pub fn run_config(cfg: &RunConfig) -> CliResult<()> {
    match cfg.command {
        Command::Verify => {
            let rep = cmd_verify(cfg)?;
            if !rep.all_pass() {
                let bad: Vec<&str> = rep.rows.iter().filter(|r| !r.pass).map(|r| r.quantity.as_str()).collect();
                return Err(CliError::Numerical(format!("failed checks: {}", bad.join(", "))));
            }
        }
        Command::Speeds => {
            cmd_speeds(cfg)?;
        }
        Command::Transition => {
            cmd_transition(cfg)?;
        }
        Command::Sweep => {
            cmd_sweep(cfg)?;
        }
        Command::Front => {
            cmd_front(cfg)?;
        }
        Command::Spectrum => {
            cmd_spectrum(cfg)?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match RunConfig::from_cli(&cli).and_then(|cfg| run_config(&cfg)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

// ---------------------------------------------------------------------------
// SVG

const COLORS: [&str; 2] = ["#1f5fa8", "#c0392b"];

fn dense(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

struct Series {
    name: String,
    points: Vec<(f64, f64)>,
    color: String,
    line: bool,
    markers: bool,
}

/// Minimal static line/scatter plot.
pub struct Plot {
    title: String,
    xlabel: String,
    ylabel: String,
    series: Vec<Series>,
}

impl Plot {
    pub fn new(title: &str, xlabel: &str, ylabel: &str) -> Plot {
        Plot { title: title.into(), xlabel: xlabel.into(), ylabel: ylabel.into(), series: vec![] }
    }

    pub fn series(&mut self, name: &str, points: Vec<(f64, f64)>, color: &str, markers: bool) {
        self.series.push(Series { name: name.into(), points, color: color.into(), line: true, markers });
    }

    pub fn scatter(&mut self, name: &str, points: Vec<(f64, f64)>, color: &str) {
        self.series.push(Series { name: name.into(), points, color: color.into(), line: false, markers: true });
    }

    pub fn render(&self) -> String {
        let (w, h, ml, mr, mt, mb) = (720.0, 480.0, 80.0, 20.0, 40.0, 60.0);
        let pts = self.series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in pts {
            x0 = x0.min(*x);
            x1 = x1.max(*x);
            y0 = y0.min(*y);
            y1 = y1.max(*y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        let pad = |a: f64, b: f64| {
            let d = if b > a { 0.05 * (b - a) } else { 0.5 * a.abs().max(1e-3) };
            (a - d, b + d)
        };
        let ((x0, x1), (y0, y1)) = (pad(x0, x1), pad(y0, y1));
        let sx = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
        let sy = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, esc(&self.title));
        let _ = writeln!(
            s,
            r#"<rect x="{ml}" y="{mt}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            w - ml - mr,
            h - mt - mb
        );
        for t in ticks(x0, x1) {
            let _ = writeln!(s, r#"<line x1="{0:.1}" y1="{1}" x2="{0:.1}" y2="{2}" stroke="black"/>"#, sx(t), h - mb, h - mb + 5.0);
            let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, sx(t), h - mb + 18.0, tick_label(t));
        }
        for t in ticks(y0, y1) {
            let _ = writeln!(s, r#"<line x1="{}" y1="{1:.1}" x2="{2}" y2="{1:.1}" stroke="black"/>"#, ml - 5.0, sy(t), ml);
            let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, ml - 8.0, sy(t) + 4.0, tick_label(t));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (ml + w - mr) / 2.0, h - 15.0, esc(&self.xlabel));
        let _ = writeln!(
            s,
            r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
            (mt + h - mb) / 2.0,
            esc(&self.ylabel)
        );
        let mut seen: Vec<&str> = vec![];
        for ser in &self.series {
            let ok: Vec<&(f64, f64)> = ser.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
            if ser.line && ok.len() > 1 {
                let path: Vec<String> = ok.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1))).collect();
                let _ = writeln!(s, r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#, ser.color, path.join(" "));
            }
            if ser.markers {
                for p in &ok {
                    let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#, sx(p.0), sy(p.1), ser.color);
                }
            }
            // legend, one entry per name
            if seen.contains(&ser.name.as_str()) {
                continue;
            }
            let k = seen.len();
            seen.push(&ser.name);
            let ly = mt + 16.0 + 16.0 * k as f64;
            let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"/>"#, ml + 10.0, ml + 30.0, ser.color);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, ml + 36.0, ly + 4.0, esc(&ser.name));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn ticks(a: f64, b: f64) -> Vec<f64> {
    let raw = (b - a) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (a / step).ceil() as i64;
    let last = (b / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(t: f64) -> String {
    if t == 0.0 {
        "0".into()
    } else if t.abs() < 1e-3 || t.abs() >= 1e4 {
        format!("{t:.1e}")
    } else {
        let s = format!("{t:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> CliResult<RunConfig> {
        let cli = Cli::try_parse_from(std::iter::once("frontlab").chain(args.iter().copied())).map_err(|e| CliError::Usage(e.to_string()))?;
        RunConfig::from_cli(&cli)
    }

    #[test]
    fn ranges() {
        assert_eq!(Range::parse("0.4").unwrap().values(), vec![0.4]);
        assert_eq!(Range::parse("0:0.1:0.05").unwrap().values().len(), 3);
        assert!(Range::parse("0.2:0.1:0.01").is_err());
        assert!(Range::parse("a").is_err());
        assert!(Range::parse("0:1").is_err());
    }

    #[test]
    fn flags_override_defaults() {
        let cfg = parse(&["front", "--d1", "0.3", "--L", "15", "--dx", "0.05", "--plots"]).unwrap();
        assert_eq!(cfg.d1, Range::single(0.3));
        assert_eq!(cfg.grid.n, 601);
        assert!(cfg.emit_plots);
        assert_eq!(cfg.delta2, Range::single(0.1));
    }

    #[test]
    fn config_file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        fs::write(&p, "# comment\nd1 = 0.35\ndelta2=0.05 # trailing\naccuracy = 4\n").unwrap();
        let cfg = parse(&["spectrum", "--config", p.to_str().unwrap(), "--delta2", "0"]).unwrap();
        assert_eq!(cfg.d1, Range::single(0.35));
        assert_eq!(cfg.delta2, Range::single(0.0));
        assert_eq!(cfg.grid.accuracy, 4);
    }

    #[test]
    fn malformed_input_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.cfg");
        fs::write(&p, "d1 0.3\n").unwrap();
        assert!(matches!(parse(&["front", "--config", p.to_str().unwrap()]), Err(CliError::Usage(_))));
        fs::write(&p, "colour = red\n").unwrap();
        assert!(matches!(parse(&["front", "--config", p.to_str().unwrap()]), Err(CliError::Usage(_))));
        assert!(matches!(parse(&["front", "--dx", "0.3"]), Err(CliError::Usage(_))));
        assert_eq!(run(["frontlab", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["frontlab", "front", "--d1", "x"]), EXIT_USAGE);
    }

    #[test]
    fn fixed_formatting() {
        assert_eq!(fmt(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt(f64::NAN), "nan");
    }

    #[test]
    fn tick_positions() {
        assert_eq!(ticks(0.0, 1.0), vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
        assert_eq!(tick_label(0.5), "0.5");
    }
}
