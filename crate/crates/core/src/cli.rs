//! Command-line front end.
//!
//! Every command reads an optional JSON config, writes one JSON document (or
//! a CSV table for `sample`) to stdout, and exits with 0 on success, 2 when a
//! property is flagged, and 1 on errors.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::apps::{
    doubled_gtp, eval_gap, solve_bojanov, solve_gtp, BojanovProblem, GtpProblem,
};
use crate::error::{Error, Result};
use crate::evaluator::{jacobian_delta, profile, sum_translates, Problem};
use crate::kernels::{KernelSpec, SmoothingKind};
use crate::oracle::{check_mmatrix, check_sandwich, convergence_probe, grid_minimax, DEFAULT_SEED};
use crate::solver::{maximin, minimax, minimax_global, solve_equioscillation, SolveOptions, SolveReport, Start};
use crate::torus::{locate, NodeSystem, Permutation, SimplexLocation};

#[derive(Debug, Parser)]
#[command(name = "torus-minimax", version, about = "Minimax and equioscillation solver for sums of translates on the torus")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// JSON problem config; `-` reads stdin.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Permutation literal such as `2,1,3`.
    #[arg(long, global = true)]
    sigma: Option<String>,
    /// Sweep every simplex (minimax only).
    #[arg(long, global = true)]
    all_sigma: bool,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write plot samples to this CSV file.
    #[arg(long, global = true)]
    emit_samples: Option<PathBuf>,
    /// Read node and angle inputs in degrees.
    #[arg(long, global = true)]
    degrees: bool,
    /// Omit the timestamp field so reruns are byte-identical.
    #[arg(long, global = true)]
    no_timestamp: bool,
    /// Free nodes `y_1,…,y_n`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    nodes: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// F(y, t) at one point.
    Eval {
        #[arg(long, allow_hyphen_values = true)]
        t: Option<f64>,
    },
    /// Arc maxima under a permutation (all compatible ones on a boundary).
    Profile,
    /// Solve Δ_σ = 0.
    Equioscillate,
    /// M(S_σ), or the global minimum with --all-sigma.
    Minimax,
    /// m(S_σ).
    Maximin,
    /// Extremal generalized polynomial on an interval.
    Bojanov {
        /// `a,b`
        #[arg(long, allow_hyphen_values = true)]
        interval: Option<String>,
        #[arg(long)]
        exponents: Option<String>,
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Extremal generalized trigonometric polynomial.
    Gtp {
        #[arg(long)]
        exponents: Option<String>,
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Run an oracle check.
    Verify {
        #[arg(long, value_enum)]
        check: Check,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        resolution: Option<usize>,
        /// Approximation levels for `convergence`, e.g. `4,16,64`.
        #[arg(long)]
        levels: Option<String>,
        #[arg(long, value_enum)]
        kind: Option<Kind>,
    },
    /// CSV of (t, F(y,t)) on a uniform grid.
    Sample {
        #[arg(long)]
        resolution: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Check {
    Sandwich,
    Mmatrix,
    Convergence,
    GridMinimax,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Bump,
    LogCusp,
    SqrtCusp,
}

impl From<Kind> for SmoothingKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Bump => SmoothingKind::Bump,
            Kind::LogCusp => SmoothingKind::LogCusp,
            Kind::SqrtCusp => SmoothingKind::SqrtCusp,
        }
    }
}

/// JSON problem config. Every field is optional; flags override it.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub kernels: Option<Vec<KernelSpec>>,
    #[serde(default)]
    pub nodes: Option<Vec<f64>>,
    #[serde(default)]
    pub sigma: Option<Permutation>,
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default)]
    pub degrees: bool,
    #[serde(default)]
    pub options: Option<SolveOptions>,
    #[serde(default)]
    pub interval: Option<[f64; 2]>,
    #[serde(default)]
    pub exponents: Option<Vec<f64>>,
    #[serde(default)]
    pub resolution: Option<usize>,
    /// Extra points for the sandwich check.
    #[serde(default)]
    pub extra_points: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct Envelope<'a> {
    schema: u32,
    command: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp: Option<u64>,
    ok: bool,
    result: Value,
}

struct Outcome {
    ok: bool,
    result: Value,
}

/// Entry point for the binary.
pub fn main_entry() -> i32 {
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdin.lock(), &mut stdout.lock(), &mut stderr.lock())
}

/// Parses `args` and dispatches; returns the process exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let info = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = if info { write!(out, "{e}") } else { write!(err, "{e}") };
            return if info { 0 } else { 1 };
        }
    };
    match dispatch(&cli, stdin, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn dispatch(cli: &Cli, stdin: &mut dyn Read, out: &mut dyn Write) -> Result<i32> {
    let (cfg, base_dir) = load_config(cli.config.as_deref(), stdin)?;
    let degrees = cli.degrees || cfg.degrees;
    let ctx = Context { cli, cfg, base_dir, degrees };
    let (name, outcome) = match &cli.cmd {
        Cmd::Eval { t } => ("eval", ctx.eval(*t)?),
        Cmd::Profile => ("profile", ctx.profile()?),
        Cmd::Equioscillate => ("equioscillate", ctx.equioscillate()?),
        Cmd::Minimax => ("minimax", ctx.minimax()?),
        Cmd::Maximin => ("maximin", ctx.maximin()?),
        Cmd::Bojanov { interval, exponents, resolution } => {
            ("bojanov", ctx.bojanov(interval.as_deref(), exponents.as_deref(), *resolution)?)
        }
        Cmd::Gtp { exponents, resolution } => ("gtp", ctx.gtp(exponents.as_deref(), *resolution)?),
        Cmd::Verify { check, samples, resolution, levels, kind } => {
            ("verify", ctx.verify(*check, *samples, *resolution, levels.as_deref(), *kind)?)
        }
        Cmd::Sample { resolution } => {
            return ctx.sample(*resolution, out);
        }
    };
    let timestamp = (!cli.no_timestamp).then(|| {
        std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
    });
    let env = Envelope { schema: 1, command: name, timestamp, ok: outcome.ok, result: outcome.result };
    let text = serde_json::to_string_pretty(&env).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out, "{text}").map_err(|e| Error::Io(e.to_string()))?;
    Ok(if outcome.ok { 0 } else { 2 })
}

fn load_config(path: Option<&Path>, stdin: &mut dyn Read) -> Result<(Config, PathBuf)> {
    let Some(path) = path else {
        return Ok((Config::default(), PathBuf::from(".")));
    };
    let (text, dir) = if path == Path::new("-") {
        let mut s = String::new();
        stdin.read_to_string(&mut s).map_err(|e| Error::Io(e.to_string()))?;
        (s, PathBuf::from("."))
    } else {
        let s = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        (s, path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")))
    };
    let cfg: Config = serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("config: {e}")))?;
    Ok((cfg, dir))
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<f64>().map_err(|e| Error::InvalidInput(format!("{p:?}: {e}"))))
        .collect()
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Io(e.to_string()))
}

fn report_ok(r: &SolveReport) -> bool {
    r.converged() && r.flags.preconditions != Some(false) && r.flags.certified != Some(false)
}

struct Context<'a> {
    cli: &'a Cli,
    cfg: Config,
    base_dir: PathBuf,
    degrees: bool,
}

impl Context<'_> {
    fn angle(&self, v: f64) -> f64 {
        if self.degrees {
            v.to_radians()
        } else {
            v
        }
    }

    fn problem(&self) -> Result<Problem> {
        let mut specs = self
            .cfg
            .kernels
            .clone()
            .ok_or_else(|| Error::InvalidInput("config must list kernels".into()))?;
        for s in &mut specs {
            s.resolve_tables(&self.base_dir)?;
        }
        Problem::new(specs)
    }

    fn nodes(&self) -> Result<Option<NodeSystem>> {
        let raw = match &self.cli.nodes {
            Some(s) => Some(parse_list(s)?),
            None => self.cfg.nodes.clone(),
        };
        Ok(raw.map(|v| NodeSystem::new(v.into_iter().map(|x| self.angle(x)).collect())))
    }

    fn require_nodes(&self, p: &Problem) -> Result<NodeSystem> {
        let y = self.nodes()?.ok_or_else(|| Error::InvalidInput("nodes are required".into()))?;
        p.check_nodes(&y)?;
        Ok(y)
    }

    fn sigma(&self, n: usize) -> Result<Permutation> {
        let s = match &self.cli.sigma {
            Some(s) => s.parse()?,
            None => self.cfg.sigma.clone().unwrap_or_else(|| Permutation::identity(n)),
        };
        if s.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: s.n() });
        }
        Ok(s)
    }

    fn options(&self) -> Result<SolveOptions> {
        let mut o = self.cfg.options.clone().unwrap_or_default();
        if let Some(t) = self.cli.tol {
            o.tol_residual = t;
        }
        if let Some(m) = self.cli.max_iter {
            o.max_iter = m;
        }
        if let Some(s) = self.cli.seed {
            o.seed = s;
        }
        if let Start::User(y) = &o.start {
            if self.degrees {
                o.start = Start::User(NodeSystem::new(y.as_slice().iter().map(|v| v.to_radians()).collect()));
            }
        } else if let Some(s) = &self.cli.nodes {
            // config nodes describe an evaluation point, not a start
            o.start = Start::User(NodeSystem::new(parse_list(s)?.into_iter().map(|x| self.angle(x)).collect()));
        }
        o.validate()?;
        Ok(o)
    }

    fn eval(&self, t: Option<f64>) -> Result<Outcome> {
        let p = self.problem()?;
        let y = self.require_nodes(&p)?;
        let t = self.angle(t.or(self.cfg.t).ok_or_else(|| Error::InvalidInput("--t is required".into()))?);
        let v = sum_translates(&p, &y, t)?;
        Ok(Outcome { ok: true, result: json!({ "t": t, "nodes": y, "value": v }) })
    }

    fn profile(&self) -> Result<Outcome> {
        let p = self.problem()?;
        let y = self.require_nodes(&p)?;
        let explicit = self.cli.sigma.is_some() || self.cfg.sigma.is_some();
        let sigmas = if explicit {
            vec![self.sigma(p.n())?]
        } else {
            match locate(&y) {
                SimplexLocation::Interior(s) => vec![s],
                SimplexLocation::Boundary(list) => list,
            }
        };
        let profiles = sigmas.iter().map(|s| profile(&p, &y, s)).collect::<Result<Vec<_>>>()?;
        Ok(Outcome { ok: true, result: json!({ "nodes": y, "location": locate(&y), "profiles": profiles }) })
    }

    fn equioscillate(&self) -> Result<Outcome> {
        let p = self.problem()?;
        let r = solve_equioscillation(&p, &self.sigma(p.n())?, &self.options()?)?;
        Ok(Outcome { ok: r.converged(), result: to_value(&r)? })
    }

    fn minimax(&self) -> Result<Outcome> {
        let p = self.problem()?;
        let o = self.options()?;
        if self.cli.all_sigma {
            let g = minimax_global(&p, &o)?;
            return Ok(Outcome { ok: report_ok(&g.best), result: to_value(&g)? });
        }
        let r = minimax(&p, &self.sigma(p.n())?, &o)?;
        Ok(Outcome { ok: report_ok(&r), result: to_value(&r)? })
    }

    fn maximin(&self) -> Result<Outcome> {
        let p = self.problem()?;
        let r = maximin(&p, &self.sigma(p.n())?, &self.options()?)?;
        Ok(Outcome { ok: r.converged(), result: to_value(&r)? })
    }

    fn exponents(&self, flag: Option<&str>) -> Result<Vec<f64>> {
        match flag {
            Some(s) => parse_list(s),
            None => self.cfg.exponents.clone().ok_or_else(|| Error::InvalidInput("--exponents is required".into())),
        }
    }

    fn bojanov(&self, interval: Option<&str>, exponents: Option<&str>, resolution: Option<usize>) -> Result<Outcome> {
        let [a, b] = match interval {
            Some(s) => {
                let v = parse_list(s)?;
                if v.len() != 2 {
                    return Err(Error::InvalidInput("--interval takes a,b".into()));
                }
                [v[0], v[1]]
            }
            None => self.cfg.interval.unwrap_or([-1.0, 1.0]),
        };
        let q = BojanovProblem::new(a, b, self.exponents(exponents)?)?;
        let poly = solve_bojanov(&q, &self.options()?)?;
        if let Some(path) = &self.cli.emit_samples {
            let rows = resolution.or(self.cfg.resolution).unwrap_or(1000).max(2);
            let pts = (0..rows).map(|i| {
                let x = a + (b - a) * i as f64 / (rows - 1) as f64;
                (x, eval_gap(x, &poly))
            });
            write_csv(path, ["x", "abs_p"], pts)?;
        }
        Ok(Outcome { ok: !poly.flagged, result: to_value(&poly)? })
    }

    fn gtp(&self, exponents: Option<&str>, resolution: Option<usize>) -> Result<Outcome> {
        let q = GtpProblem { exponents: self.exponents(exponents)? };
        let r = solve_gtp(&q, &self.options()?)?;
        if let Some(path) = &self.cli.emit_samples {
            let rows = resolution.or(self.cfg.resolution).unwrap_or(1000).max(1);
            let pts = (0..rows).map(|i| {
                let t = std::f64::consts::TAU * i as f64 / rows as f64;
                (t, doubled_gtp(t, &r.w, &q.exponents))
            });
            write_csv(path, ["t", "abs_t"], pts)?;
        }
        let ok = report_ok(&r.report) && r.interlacing;
        Ok(Outcome { ok, result: to_value(&r)? })
    }

    fn verify(
        &self,
        check: Check,
        samples: Option<usize>,
        resolution: Option<usize>,
        levels: Option<&str>,
        kind: Option<Kind>,
    ) -> Result<Outcome> {
        let p = self.problem()?;
        let sigma = self.sigma(p.n())?;
        let o = self.options()?;
        match check {
            Check::Sandwich => {
                let m = minimax(&p, &sigma, &o)?;
                let extra: Vec<NodeSystem> = self
                    .cfg
                    .extra_points
                    .iter()
                    .map(|v| NodeSystem::new(v.iter().map(|x| self.angle(*x)).collect()))
                    .collect();
                let seed = self.cli.seed.unwrap_or(DEFAULT_SEED);
                let r = check_sandwich(&p, &sigma, m.objective, samples.unwrap_or(100), seed, &extra, 1e-9)?;
                Ok(Outcome { ok: r.holds(), result: json!({ "check": "sandwich", "minimax": m.objective, "report": r }) })
            }
            Check::Mmatrix => {
                let r = solve_equioscillation(&p, &sigma, &o)?;
                let j = jacobian_delta(&p, &r.nodes, &sigma)?;
                let mm = check_mmatrix(&j);
                let ok = mm.ok && r.converged();
                Ok(Outcome { ok, result: json!({ "check": "mmatrix", "nodes": r.nodes, "report": mm }) })
            }
            Check::Convergence => {
                let y = self.require_nodes(&p)?;
                let levels = match levels {
                    Some(s) => s
                        .split(',')
                        .map(|v| v.trim().parse::<u32>().map_err(|e| Error::InvalidInput(format!("{v:?}: {e}"))))
                        .collect::<Result<Vec<_>>>()?,
                    None => vec![4, 16, 64, 256],
                };
                let kind: SmoothingKind = kind.unwrap_or(Kind::SqrtCusp).into();
                let t = convergence_probe(&p, kind, &levels, &y, &sigma)?;
                let ok = t.within_bounds() && t.non_increasing();
                Ok(Outcome { ok, result: json!({ "check": "convergence", "table": t }) })
            }
            Check::GridMinimax => {
                let g = grid_minimax(&p, &sigma, resolution.unwrap_or(60))?;
                let m = minimax(&p, &sigma, &o)?;
                let diff = (g.estimate - m.objective).abs();
                Ok(Outcome {
                    ok: diff <= 1e-4,
                    result: json!({ "check": "grid-minimax", "grid": g, "solver": m.objective, "difference": diff }),
                })
            }
        }
    }

    fn sample(&self, resolution: Option<usize>, out: &mut dyn Write) -> Result<i32> {
        let p = self.problem()?;
        let y = self.require_nodes(&p)?;
        let rows = resolution.or(self.cfg.resolution).unwrap_or(1000);
        if rows == 0 {
            return Err(Error::InvalidInput("resolution must be positive".into()));
        }
        let pts = (0..rows).map(|i| {
            let t = std::f64::consts::TAU * i as f64 / rows as f64;
            (t, p.value(&y, t))
        });
        match &self.cli.emit_samples {
            Some(path) => {
                write_csv(path, ["t", "F"], pts)?;
                let env = Envelope {
                    schema: 1,
                    command: "sample",
                    timestamp: None,
                    ok: true,
                    result: json!({ "rows": rows, "path": path }),
                };
                let text = serde_json::to_string_pretty(&env).map_err(|e| Error::Io(e.to_string()))?;
                writeln!(out, "{text}").map_err(|e| Error::Io(e.to_string()))?;
            }
            None => {
                let mut w = csv::Writer::from_writer(out);
                write_rows(&mut w, ["t", "F"], pts)?;
            }
        }
        Ok(0)
    }
}

fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn write_rows<W: Write>(w: &mut csv::Writer<W>, header: [&str; 2], pts: impl Iterator<Item = (f64, f64)>) -> Result<()> {
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for (a, b) in pts {
        w.write_record([fmt17(a), fmt17(b)]).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

fn write_csv(path: &Path, header: [&str; 2], pts: impl Iterator<Item = (f64, f64)>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_rows(&mut w, header, pts)
}
