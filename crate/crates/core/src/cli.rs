//! `dendrite` command-line front end.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::Zero;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::addressing::VertexId;
use crate::error::{Error, Result};
use crate::exit_time::{boundary_resistance_bounds, exit_point_rows, exit_ratio_experiment, write_point_csv};
use crate::graph::{self, lattice, BallRegion, LevelGraph, DEFAULT_MAX_LEVEL};
use crate::harmonics::{
    discrete_approximation, energy_closed, eval_closed, psi_coefficients, HarmonicSpec, PsiCase,
};
use crate::harnack::{ehi_ratio, weh_threshold_scan};
use crate::measure::{
    ball_measure, doubling_ratio, doubling_witness, epsilon0, epsilon1, harmonic_weights, integrate_pw_harmonic,
    u_down_integral, u_up_integral, IntegralBounds, WeightVector,
};
use crate::rational::{fmt_f64, fmt_rational, int, parse_rational, pow2, ratio, to_f64, Rational};
use crate::solver::{ball_equilibrium, effective_resistance};
use crate::stats::log2_slope;
use crate::verify::{parse_suites, run_suite, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_CAPACITY: i32 = 4;

/// Fully resolved run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub s0: Rational,
    pub weights: WeightVector,
    pub max_level: u32,
    pub tolerance: String,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
}

/// File form of [`RunConfig`]; every field optional, rationals as strings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s0: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_level: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            s0: ratio(1, 2),
            weights: WeightVector::equal(),
            max_level: DEFAULT_MAX_LEVEL,
            tolerance: "desk".into(),
            output_dir: None,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn to_file(&self) -> ConfigFile {
        ConfigFile {
            s0: Some(fmt_rational(&self.s0)),
            weights: Some(self.weights.to_string()),
            max_level: Some(self.max_level),
            tolerance: Some(self.tolerance.clone()),
            output_dir: self.output_dir.clone(),
            seed: Some(self.seed),
        }
    }

    /// Overlays the fields present in `file`.
    pub fn apply(&mut self, file: &ConfigFile) -> Result<()> {
        if let Some(s) = &file.s0 {
            self.s0 = parse_rational(s)?;
        }
        if let Some(w) = &file.weights {
            self.weights = w.parse()?;
        }
        if let Some(l) = file.max_level {
            self.max_level = l;
        }
        if let Some(t) = &file.tolerance {
            self.tolerance = t.clone();
        }
        if let Some(d) = &file.output_dir {
            self.output_dir = Some(d.clone());
        }
        if let Some(s) = file.seed {
            self.seed = s;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.s0 <= Rational::zero() || self.s0 >= int(1) {
            return Err(Error::InvalidParameter(format!("s0 = {} must lie in (0, 1)", self.s0)));
        }
        if self.max_level == 0 || self.max_level > graph::LEVEL_LIMIT {
            return Err(Error::InvalidParameter(format!(
                "max_level must lie in 1..={}",
                graph::LEVEL_LIMIT
            )));
        }
        VerifyOptions::preset(&self.tolerance, self.max_level, self.seed)?;
        Ok(())
    }

    fn echo(&self) -> Value {
        serde_json::to_value(self.to_file()).expect("config serializes")
    }

    fn out_path(&self, p: &Path) -> PathBuf {
        match &self.output_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn require_half(&self, what: &str) -> Result<()> {
        if self.s0 != ratio(1, 2) {
            return Err(Error::Unsupported(format!("{what} is defined for s0 = 1/2 only")));
        }
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(name = "dendrite", version, about = "Resistance, measure and Harnack experiments on a tree-like fractal")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON config file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Resistance renormalization factor of maps 0 and 1.
    #[arg(long, global = true)]
    pub s0: Option<String>,
    /// Measure weights "w0,w2"; w1 = w0 and w3 = w2.
    #[arg(long, global = true)]
    pub weights: Option<String>,
    /// Largest level any command may build (also `DENDRITE_MAX_LEVEL`)
    #[arg(long, global = true)]
    pub max_level: Option<u32>,
    /// Tolerance preset: desk, quick or strict.
    #[arg(long, global = true)]
    pub tolerance: Option<String>,
    /// Directory that relative `--out` and `--summary` paths resolve against
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Seed for sampled points in `verify` and `doubling`
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Export the level-L network.
    Graph {
        #[arg(long)]
        level: u32,
        #[arg(long, value_enum, default_value_t = GraphFormat::Json)]
        format: GraphFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Effective resistance between two vertex sets ("word:corner", "-" for the empty word).
    Resistance {
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        from: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        to: Vec<String>,
        #[arg(long)]
        level: u32,
        /// Floating-point solve instead of exact rationals.
        #[arg(long)]
        float: bool,
    },
    /// Ball statistics: resistance to the frontier and measure bounds.
    Ball {
        #[arg(long, default_value = "2:1", allow_hyphen_values = true)]
        center: String,
        /// Radius as a rational; alternative to --n.
        #[arg(long, conflicts_with = "n")]
        radius: Option<String>,
        /// Use B(q0, 2^-n).
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        level: u32,
    },
    /// Closed-form harmonic functions and potential tables.
    Harmonics {
        #[command(subcommand)]
        what: HarmonicsCommand,
    },
    /// Quadrature weights and certified integrals of the closed forms.
    Measure {
        /// Refinement depth cap for the certified quadrature.
        #[arg(long, default_value_t = 12)]
        depth: u32,
    },
    /// Exit-time ratio inf G1 / sup G1 over n.
    ExitRatio {
        #[arg(long, default_value = "2..5")]
        n: String,
        #[arg(long, default_value_t = 5)]
        level_offset: u32,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-point resistance and Green bounds.
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Elliptic Harnack ratio inf/sup over eps·B_n.
    Ehi {
        #[arg(long, default_value = "2..5")]
        n: String,
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long, default_value = "1/2")]
        eps: String,
        #[arg(long, default_value_t = 6)]
        level_offset: u32,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Weak Harnack growth scan over w2/w0 = 2^(1-delta)·rho.
    Weh {
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(long, value_delimiter = ',', default_value = "1/2,1,3/2,2")]
        rho: Vec<String>,
        #[arg(long, default_value = "2..5")]
        n: String,
        #[arg(long, default_value_t = 6)]
        level_offset: u32,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Volume doubling at the witnesses y_n and at sampled lattice points.
    Doubling {
        #[arg(long, default_value = "2..6")]
        n: String,
        #[arg(long, default_value_t = 5)]
        level_offset: u32,
        /// Lattice points of V_n sampled per n (all of them if fewer).
        #[arg(long, default_value_t = 32)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Run invariant suites; exits 1 on any failure.
    Verify {
        /// all, or a comma list of tree, geometry, maximum, green, superposition.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GraphFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ClosedKind {
    UDown,
    UUp,
    UMinus,
    UPlus,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PsiKind {
    Xmk,
    Yk,
}

#[derive(Debug, Subcommand)]
pub enum HarmonicsCommand {
    /// Closed-form energy and values, optionally against a level-L solve.
    Closed {
        #[arg(long, value_enum)]
        function: ClosedKind,
        /// Boundary data "a,b,c" for u-minus (q2,q1,q3) and u-plus.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<String>,
        /// Lattice points to evaluate at.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        at: Vec<String>,
        #[arg(long)]
        level: Option<u32>,
    },
    /// Equilibrium-potential table at typical points.
    Psi {
        #[arg(long, value_enum)]
        case: PsiKind,
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 0)]
        m0: u32,
        #[arg(long)]
        k0: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `a..b` (inclusive) or a single integer.
pub fn parse_range(s: &str) -> Result<RangeInclusive<u32>> {
    let err = || Error::Parse(format!("not a range: {s:?} (expected a..b)"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a, b.trim_start_matches('=')),
        None => (s, s),
    };
    let a: u32 = a.trim().parse().map_err(|_| err())?;
    let b: u32 = b.trim().parse().map_err(|_| err())?;
    if a == 0 || a > b {
        return Err(Error::InvalidParameter(format!("range {s:?} must satisfy 1 <= a <= b")));
    }
    Ok(a..=b)
}

fn parse_vertices(xs: &[String]) -> Result<Vec<VertexId>> {
    xs.iter().map(|x| x.trim().parse()).collect()
}

/// Exit code of a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Capacity(_) => EXIT_CAPACITY,
        Error::Io(_) | Error::Csv(_) => EXIT_FAILURE,
        _ => EXIT_VALIDATION,
    }
}

/// Merges defaults, the config file, `DENDRITE_MAX_LEVEL` and the flags,
/// in increasing precedence.
pub fn resolve_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &g.config {
        let text = std::fs::read_to_string(path)?;
        let file: ConfigFile = serde_json::from_str(&text)?;
        cfg.apply(&file)?;
    }
    if let Ok(v) = std::env::var("DENDRITE_MAX_LEVEL") {
        cfg.max_level = v
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("DENDRITE_MAX_LEVEL={v:?} is not an integer")))?;
    }
    cfg.apply(&ConfigFile {
        s0: g.s0.clone(),
        weights: g.weights.clone(),
        max_level: g.max_level,
        tolerance: g.tolerance.clone(),
        output_dir: g.out_dir.clone(),
        seed: g.seed,
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let cfg = resolve_config(&cli.global)?;
    graph::set_max_level(cfg.max_level);
    if let Some(d) = &cfg.output_dir {
        std::fs::create_dir_all(d)?;
    }
    let mut stdout = io::stdout().lock();
    match &cli.command {
        Command::Graph { level, format, out } => cmd_graph(&cfg, *level, *format, out.as_deref()),
        Command::Resistance { from, to, level, float } => {
            let from = parse_vertices(from)?;
            let to = parse_vertices(to)?;
            let g = LevelGraph::new(*level, cfg.s0.clone())?;
            if *float {
                writeln!(stdout, "{}", fmt_f64(effective_resistance::<f64>(&g, &from, &to)?))?;
            } else {
                writeln!(stdout, "{}", fmt_rational(&effective_resistance::<Rational>(&g, &from, &to)?))?;
            }
            Ok(EXIT_OK)
        }
        Command::Ball { center, radius, n, level } => {
            cmd_ball(&cfg, center, radius.as_deref(), *n, *level, &mut stdout)
        }
        Command::Harmonics { what } => cmd_harmonics(&cfg, what, &mut stdout),
        Command::Measure { depth } => cmd_measure(&cfg, *depth, &mut stdout),
        Command::ExitRatio { n, level_offset, out, points, summary } => {
            cfg.require_half("the exit-time experiment")?;
            let range = parse_range(n)?;
            check_levels(&cfg, &range, *level_offset)?;
            let report = exit_ratio_experiment(range.clone(), &cfg.weights, *level_offset)?;
            let csv_to_file = out.is_some();
            emit_csv(&cfg, "exit-ratio", out.as_deref(), |w| report.write_csv(w))?;
            if let Some(p) = points {
                let rows = exit_point_rows(range, &cfg.weights, *level_offset)?;
                emit_csv(&cfg, "exit-ratio", Some(p), |w| write_point_csv(&rows, w))?;
            }
            let body = json!({
                "command": "exit-ratio",
                "config": cfg.echo(),
                "level_offset": level_offset,
                "n_range": [report.n_range.0, report.n_range.1],
                "slope": report.fit.map(|f| f.slope),
                "stderr": report.fit.map(|f| f.stderr),
                "rows": report.rows,
            });
            emit_summary(&cfg, summary.as_deref(), csv_to_file, &body)?;
            Ok(EXIT_OK)
        }
        Command::Ehi { n, k, eps, level_offset, out, summary } => {
            cfg.require_half("the Harnack experiment")?;
            let range = parse_range(n)?;
            let eps = parse_rational(eps)?;
            check_levels(&cfg, &range, *level_offset)?;
            let mut rows = Vec::new();
            for n in range.clone() {
                let g = LevelGraph::new(n + level_offset, cfg.s0.clone())?;
                rows.push(ehi_ratio(&g, n, *k, &eps)?);
            }
            emit_csv(&cfg, "ehi", out.as_deref(), |w| {
                let mut wtr = csv::Writer::from_writer(w);
                wtr.write_record(["n", "L", "inf", "sup", "ratio", "model"])?;
                for r in &rows {
                    wtr.write_record([
                        r.n.to_string(),
                        r.level.to_string(),
                        fmt_f64(r.inf),
                        fmt_f64(r.sup),
                        fmt_f64(r.ratio),
                        fmt_f64(r.model),
                    ])?;
                }
                wtr.flush()?;
                Ok(())
            })?;
            let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
            let fit = log2_slope(&xs, &ys);
            let body = json!({
                "command": "ehi",
                "config": cfg.echo(),
                "k": k,
                "epsilon": fmt_rational(&eps),
                "level_offset": level_offset,
                "slope": fit.map(|f| f.slope),
                "stderr": fit.map(|f| f.stderr),
                "rows": rows,
            });
            emit_summary(&cfg, summary.as_deref(), out.is_some(), &body)?;
            Ok(EXIT_OK)
        }
        Command::Weh { delta, rho, n, level_offset, out, summary } => {
            cfg.require_half("the Harnack experiment")?;
            if !(*delta > 0.0 && *delta <= 1.0) {
                return Err(Error::InvalidParameter("delta must lie in (0, 1]".into()));
            }
            let rhos: Vec<Rational> = rho.iter().map(|r| parse_rational(r)).collect::<Result<_>>()?;
            let range = parse_range(n)?;
            check_levels(&cfg, &range, *level_offset)?;
            let report = weh_threshold_scan(*delta, &rhos, range, *level_offset)?;
            emit_csv(&cfg, "weh", out.as_deref(), |w| report.write_csv(w))?;
            let body = json!({
                "command": "weh",
                "config": cfg.echo(),
                "delta": delta,
                "level_offset": level_offset,
                "n_range": [report.n_range.0, report.n_range.1],
                "growth": report.growth,
            });
            emit_summary(&cfg, summary.as_deref(), out.is_some(), &body)?;
            Ok(EXIT_OK)
        }
        Command::Doubling { n, level_offset, samples, out, summary } => {
            cmd_doubling(&cfg, n, *level_offset, *samples, out.as_deref(), summary.as_deref())
        }
        Command::Verify { suite, summary } => {
            let suites = parse_suites(suite)?;
            let opts = VerifyOptions::preset(&cfg.tolerance, cfg.max_level, cfg.seed)?;
            let mut all = Vec::new();
            for s in suites {
                for c in run_suite(s, &opts)? {
                    writeln!(stdout, "{c}")?;
                    all.push(c);
                }
            }
            let failed = all.iter().filter(|c| !c.passed).count();
            writeln!(stdout, "{} checks, {failed} failed", all.len())?;
            if let Some(p) = summary {
                let body = json!({ "command": "verify", "config": cfg.echo(), "checks": all });
                write_json(&cfg.out_path(p), &body)?;
            }
            Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILURE })
        }
    }
}

fn check_levels(cfg: &RunConfig, range: &RangeInclusive<u32>, offset: u32) -> Result<()> {
    let top = range.end() + offset;
    if top > cfg.max_level {
        return Err(Error::Capacity(format!(
            "n = {} needs level {top}, above max_level = {}",
            range.end(),
            cfg.max_level
        )));
    }
    Ok(())
}

fn open(cfg: &RunConfig, path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(cfg.out_path(p))?)),
        None => Box::new(io::stdout()),
    })
}

/// CSV report behind a single comment line echoing the config.
fn emit_csv(
    cfg: &RunConfig,
    command: &str,
    path: Option<&Path>,
    body: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    let mut w = open(cfg, path)?;
    writeln!(w, "# dendrite {command} {}", cfg.echo())?;
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, body: &Value) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, body)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

/// Summary JSON goes to `path` if given, else to stdout when the CSV went
/// to a file, else to stderr.
fn emit_summary(cfg: &RunConfig, path: Option<&Path>, csv_to_file: bool, body: &Value) -> Result<()> {
    if let Some(p) = path {
        return write_json(&cfg.out_path(p), body);
    }
    let text = serde_json::to_string_pretty(body)?;
    if csv_to_file {
        println!("{text}");
    } else {
        eprintln!("{text}");
    }
    Ok(())
}

fn print_json(out: &mut dyn Write, body: &Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, body)?;
    writeln!(out)?;
    Ok(())
}

fn bounds_json(b: &IntegralBounds) -> Value {
    json!({
        "lower": fmt_rational(&b.lower),
        "upper": fmt_rational(&b.upper),
        "lower_f64": b.lower_f64(),
        "upper_f64": b.upper_f64(),
    })
}

fn cmd_graph(cfg: &RunConfig, level: u32, format: GraphFormat, out: Option<&Path>) -> Result<i32> {
    let g = LevelGraph::new(level, cfg.s0.clone())?;
    match format {
        GraphFormat::Json => {
            let body = json!({ "command": "graph", "config": cfg.echo(), "graph": g.to_json() });
            let mut w = open(cfg, out)?;
            print_json(&mut w, &body)?;
            w.flush()?;
        }
        GraphFormat::Csv => emit_csv(cfg, "graph", out, |w| {
            let mut wtr = csv::Writer::from_writer(w);
            wtr.write_record(["u", "v", "conductance"])?;
            for (u, v, r) in g.edge_list() {
                wtr.write_record([u.to_string(), v.to_string(), fmt_rational(&r)])?;
            }
            wtr.flush()?;
            Ok(())
        })?,
    }
    Ok(EXIT_OK)
}

fn cmd_ball(
    cfg: &RunConfig,
    center: &str,
    radius: Option<&str>,
    n: Option<u32>,
    level: u32,
    out: &mut dyn Write,
) -> Result<i32> {
    let x: VertexId = center.parse()?;
    let r = match (radius, n) {
        (Some(r), _) => parse_rational(r)?,
        (None, Some(n)) => pow2(-(n as i64)),
        (None, None) => return Err(Error::InvalidParameter("give --radius or --n".into())),
    };
    if r <= Rational::zero() {
        return Err(Error::InvalidParameter("radius must be positive".into()));
    }
    let g = LevelGraph::new(level, cfg.s0.clone())?;
    let ball = BallRegion::new(&g, &x, &r)?;
    let resistance = if ball.frontier().is_empty() {
        None
    } else {
        Some(ball_equilibrium::<f64>(&g, &ball, &x)?.1)
    };
    let bounds = match n {
        Some(n) if x == VertexId::q0() && cfg.s0 == ratio(1, 2) => {
            let (lo, hi) = boundary_resistance_bounds(&g, &x, n)?;
            Some(json!({ "lower": lo, "upper": hi }))
        }
        _ => None,
    };
    let body = json!({
        "command": "ball",
        "config": cfg.echo(),
        "center": x.to_string(),
        "radius": fmt_rational(&r),
        "level": level,
        "interior": ball.interior_count(),
        "frontier": ball.frontier().len(),
        "cut_edges": ball.cut_edges().len(),
        "resistance_to_frontier": resistance,
        "resistance_bounds": bounds,
        "measure": bounds_json(&ball_measure(&g, &cfg.weights, &ball)?),
    });
    print_json(out, &body)?;
    Ok(EXIT_OK)
}

fn closed_spec(cfg: &RunConfig, kind: ClosedKind, values: &[String]) -> Result<HarmonicSpec> {
    let vals: Vec<Rational> = values.iter().map(|v| parse_rational(v)).collect::<Result<_>>()?;
    let three = || -> Result<[Rational; 3]> {
        <[Rational; 3]>::try_from(vals.clone())
            .map_err(|_| Error::InvalidParameter("--values needs exactly three entries a,b,c".into()))
    };
    match kind {
        ClosedKind::UDown => HarmonicSpec::u_down(cfg.s0.clone()),
        ClosedKind::UUp => {
            cfg.require_half("u-up")?;
            Ok(HarmonicSpec::u_up())
        }
        ClosedKind::UMinus => {
            let [a2, a1, a3] = three()?;
            HarmonicSpec::u_minus(a2, a1, a3, cfg.s0.clone())
        }
        ClosedKind::UPlus => {
            let [a, b, c] = three()?;
            HarmonicSpec::u_plus(a, b, c, cfg.s0.clone())
        }
    }
}

fn cmd_harmonics(cfg: &RunConfig, what: &HarmonicsCommand, out: &mut dyn Write) -> Result<i32> {
    match what {
        HarmonicsCommand::Closed { function, values, at, level } => {
            let spec = closed_spec(cfg, *function, values)?;
            let points = parse_vertices(at)?;
            let mut evals = Vec::new();
            for p in &points {
                evals.push(json!({ "at": p.to_string(), "value": fmt_rational(&eval_closed(&spec, p)?) }));
            }
            let discrete = match level {
                Some(l) => {
                    let g = LevelGraph::new(*l, cfg.s0.clone())?;
                    let (f, e) = discrete_approximation::<f64>(&spec, &g)?;
                    let vals: Vec<Value> = points
                        .iter()
                        .map(|p| json!({ "at": p.to_string(), "value": f.get(&g, p).copied() }))
                        .collect();
                    Some(json!({ "level": l, "energy": e, "values": vals }))
                }
                None => None,
            };
            let energy = energy_closed(&spec);
            let body = json!({
                "command": "harmonics",
                "config": cfg.echo(),
                "function": format!("{function:?}"),
                "energy": fmt_rational(&energy),
                "energy_f64": to_f64(&energy),
                "values": evals,
                "discrete": discrete,
            });
            print_json(out, &body)?;
        }
        HarmonicsCommand::Psi { case, n, m0, k0, out: path } => {
            cfg.require_half("the potential tables")?;
            let case = match case {
                PsiKind::Xmk => PsiCase::Xmk { n: *n, m0: *m0, k0: *k0 },
                PsiKind::Yk => PsiCase::Yk { n: *n, k0: *k0 },
            };
            let table = psi_coefficients(case)?;
            emit_csv(cfg, "harmonics psi", path.as_deref(), |w| table.write_csv(w))?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_measure(cfg: &RunConfig, depth: u32, out: &mut dyn Write) -> Result<i32> {
    let w = &cfg.weights;
    let p = harmonic_weights(w, &cfg.s0);
    let down_spec = HarmonicSpec::u_down(cfg.s0.clone())?;
    let down = integrate_pw_harmonic(&down_spec, w, &cfg.s0, Some(depth))?;
    let up = if cfg.s0 == ratio(1, 2) {
        let b = integrate_pw_harmonic(&HarmonicSpec::u_up(), w, &cfg.s0, Some(depth))?;
        let exact = u_up_integral(w);
        Some(json!({
            "exact": fmt_rational(&exact),
            "exact_f64": to_f64(&exact),
            "certified": bounds_json(&b),
        }))
    } else {
        None
    };
    let exact_down = u_down_integral(w, &cfg.s0);
    let e0 = epsilon0(w);
    let e1 = epsilon1(w);
    let body = json!({
        "command": "measure",
        "config": cfg.echo(),
        "harmonic_weights": p.iter().map(fmt_rational).collect::<Vec<_>>(),
        "u_down": {
            "exact": fmt_rational(&exact_down),
            "exact_f64": to_f64(&exact_down),
            "certified": bounds_json(&down),
        },
        "u_up": up,
        "epsilon0": fmt_rational(&e0),
        "epsilon1": fmt_rational(&e1),
    });
    print_json(out, &body)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct DoublingRow {
    n: u32,
    level: u32,
    point: String,
    radius: String,
    ratio_lower: f64,
    ratio_upper: f64,
}

fn cmd_doubling(
    cfg: &RunConfig,
    n: &str,
    offset: u32,
    samples: usize,
    out: Option<&Path>,
    summary: Option<&Path>,
) -> Result<i32> {
    let range = parse_range(n)?;
    check_levels(cfg, &range, offset)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    let mut witness = Vec::new();
    let mut worst_lattice = 0f64;
    for n in range {
        let level = n + offset;
        let g = LevelGraph::new(level, cfg.s0.clone())?;
        let y = doubling_witness(n);
        let r = pow2(-(n as i64));
        let (lo, hi) = doubling_ratio(&g, &cfg.weights, &y, &r)?;
        witness.push(json!({ "n": n, "ratio_lower": to_f64(&lo), "reference": 3.0 / 16.0 * 2f64.powi(n as i32) }));
        rows.push(DoublingRow {
            n,
            level,
            point: y.to_string(),
            radius: fmt_rational(&r),
            ratio_lower: to_f64(&lo),
            ratio_upper: to_f64(&hi),
        });
        let pts = lattice(n);
        let chosen: Vec<&VertexId> = if pts.len() <= samples {
            pts.iter().collect()
        } else {
            let mut c: Vec<&VertexId> = pts.choose_multiple(&mut rng, samples).collect();
            c.sort();
            c
        };
        let r = pow2(-(n as i64) - 1);
        for x in chosen {
            let (lo, hi) = doubling_ratio(&g, &cfg.weights, x, &r)?;
            worst_lattice = worst_lattice.max(to_f64(&hi));
            rows.push(DoublingRow {
                n,
                level,
                point: x.to_string(),
                radius: fmt_rational(&r),
                ratio_lower: to_f64(&lo),
                ratio_upper: to_f64(&hi),
            });
        }
    }
    emit_csv(cfg, "doubling", out, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        for r in &rows {
            wtr.serialize(r)?;
        }
        wtr.flush()?;
        Ok(())
    })?;
    let body = json!({
        "command": "doubling",
        "config": cfg.echo(),
        "level_offset": offset,
        "witness": witness,
        "lattice_max_ratio_upper": worst_lattice,
    });
    emit_summary(cfg, summary, out.is_some(), &body)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("2..5").unwrap(), 2..=5);
        assert_eq!(parse_range("2..=5").unwrap(), 2..=5);
        assert_eq!(parse_range("3").unwrap(), 3..=3);
        assert!(parse_range("5..2").is_err());
        assert!(parse_range("x").is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = RunConfig {
            s0: ratio(2, 5),
            weights: "1/6,1/3".parse().unwrap(),
            max_level: 9,
            tolerance: "strict".into(),
            output_dir: Some("reports".into()),
            seed: 42,
        };
        let text = serde_json::to_string(&cfg.to_file()).unwrap();
        let file: ConfigFile = serde_json::from_str(&text).unwrap();
        let mut back = RunConfig::default();
        back.apply(&file).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let cfg = RunConfig { s0: int(1), ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = RunConfig { tolerance: "loose".into(), ..Default::default() };
        assert!(cfg.validate().is_err());
        assert!(serde_json::from_str::<ConfigFile>(r#"{"levels": 3}"#).is_err());
    }
}
