//! Concave kernel functions on the torus `𝕋 = ℝ/2πℤ`.
//!
//! A kernel is a concave function on `(0, 2π)` whose limits at `0+` and
//! `2π−` agree (possibly both `−∞`); it is extended `2π`-periodically. The
//! value at the gluing point `0 ≡ 2π` is that common limit.
//!
//! [`KernelSpec`] is the serializable description used in configs; a
//! [`Kernel`] is a validated, immutable evaluator built from it.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::ExtReal;

/// Which one-sided derivative to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Closed-form perturbations used to approximate a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingKind {
    /// `K + (1/k)·sqrt(π² − (t−π)²)`: strictly concave, infinite slopes at 0.
    Bump,
    /// `K + min(0, log(k·d(t,0)))`: forces `K(0) = −∞`.
    LogCusp,
    /// `K + min(0, sqrt(d(t,0)) − 1/k)`: infinite slopes at 0, within `1/k` of `K`.
    SqrtCusp,
}

/// Serializable kernel description.
///
/// ```
/// use torus_minimax::kernels::KernelSpec;
/// let spec: KernelSpec = serde_json::from_str(
///     r#"{"family":"weighted","weight":2.5,"base":{"family":"log_sine"}}"#,
/// ).unwrap();
/// assert_eq!(spec, KernelSpec::weighted(2.5, KernelSpec::LogSine));
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `log|sin(t/2)|`.
    LogSine,
    /// `−(2 sin(t/2))^(−p)`, the negated Riesz kernel.
    Riesz { p: f64 },
    /// `π − |t − π|`.
    Tent,
    /// `t(2π − t)`.
    Parabola,
    /// Piecewise linear interpolation of samples covering `[0, 2π]`.
    ///
    /// Either `samples` is given inline or `path` names a two-column CSV
    /// that is loaded by [`KernelSpec::resolve_tables`].
    Table {
        #[serde(default)]
        samples: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<String>,
    },
    Weighted { weight: f64, base: Box<KernelSpec> },
    Sum { terms: Vec<KernelSpec> },
    Smoothed { base: Box<KernelSpec>, level: u32, kind: SmoothingKind },
}

impl KernelSpec {
    pub fn riesz(p: f64) -> Self {
        KernelSpec::Riesz { p }
    }

    pub fn weighted(weight: f64, base: KernelSpec) -> Self {
        KernelSpec::Weighted { weight, base: Box::new(base) }
    }

    pub fn sum(terms: Vec<KernelSpec>) -> Self {
        KernelSpec::Sum { terms }
    }

    pub fn table(samples: Vec<[f64; 2]>) -> Self {
        KernelSpec::Table { samples, path: None }
    }

    /// Splits a weighted spec into `(base, weight)`; other specs have weight 1.
    pub fn base_and_weight(&self) -> (&KernelSpec, f64) {
        match self {
            KernelSpec::Weighted { weight, base } => (base, *weight),
            other => (other, 1.0),
        }
    }

    /// Loads every table kernel given by `path`, relative to `base_dir`.
    pub fn resolve_tables(&mut self, base_dir: &std::path::Path) -> Result<()> {
        match self {
            KernelSpec::Table { samples, path } => {
                if let Some(p) = path.take() {
                    let full = base_dir.join(&p);
                    *samples = load_table_csv(&full)?;
                }
                Ok(())
            }
            KernelSpec::Weighted { base, .. } | KernelSpec::Smoothed { base, .. } => {
                base.resolve_tables(base_dir)
            }
            KernelSpec::Sum { terms } => {
                terms.iter_mut().try_for_each(|t| t.resolve_tables(base_dir))
            }
            _ => Ok(()),
        }
    }
}

/// Reads `(t, K(t))` rows from a CSV file; a header row is optional.
pub fn load_table_csv(path: &std::path::Path) -> Result<Vec<[f64; 2]>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Io(e.to_string()))?;
        if rec.len() < 2 {
            return Err(Error::InvalidKernel(format!("table row {i} has fewer than 2 columns")));
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(t), Ok(v)) => out.push([t, v]),
            // tolerate a header line
            _ if i == 0 => continue,
            _ => return Err(Error::InvalidKernel(format!("table row {i} is not numeric"))),
        }
    }
    Ok(out)
}

/// Returns the approximating kernel spec at the given level.
pub fn approximant(base: &KernelSpec, level: u32, kind: SmoothingKind) -> Result<KernelSpec> {
    if level == 0 {
        return Err(Error::InvalidKernel("approximation level must be >= 1".into()));
    }
    Ok(KernelSpec::Smoothed { base: Box::new(base.clone()), level, kind })
}

/// Singularity and smoothness flags of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelClass {
    pub finite_at_zero: bool,
    /// `K(0) = K(2π) = −∞`.
    pub cond_inf: bool,
    /// `D₋K(0) = −∞`.
    pub cond_inf_prime_minus: bool,
    /// `D₊K(0) = +∞`.
    pub cond_inf_prime_plus: bool,
    /// Either one-sided derivative at 0 is infinite.
    pub cond_inf_prime: bool,
    pub c1: bool,
    pub c2: bool,
    pub strictly_concave: bool,
    pub even_symmetric: bool,
}

/// Reduces an angle into `[0, 2π)`.
#[inline]
pub fn reduce(t: f64) -> f64 {
    let u = t.rem_euclid(TAU);
    if u >= TAU {
        0.0
    } else {
        u
    }
}

#[derive(Debug, Clone)]
struct Table {
    ts: Vec<f64>,
    vs: Vec<f64>,
    slopes: Vec<f64>,
}

impl Table {
    fn new(samples: &[[f64; 2]]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidKernel("table needs at least two samples".into()));
        }
        let ts: Vec<f64> = samples.iter().map(|s| s[0]).collect();
        let vs: Vec<f64> = samples.iter().map(|s| s[1]).collect();
        if vs.iter().chain(ts.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidKernel("table samples must be finite".into()));
        }
        if ts[0].abs() > 1e-12 || (ts[ts.len() - 1] - TAU).abs() > 1e-12 {
            return Err(Error::InvalidKernel("table must span exactly [0, 2π]".into()));
        }
        if ts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidKernel("table abscissae must be strictly increasing".into()));
        }
        let scale = vs.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if (vs[0] - vs[vs.len() - 1]).abs() > 1e-12 * scale {
            return Err(Error::InvalidKernel("table values at 0 and 2π must agree".into()));
        }
        let slopes: Vec<f64> = ts
            .windows(2)
            .zip(vs.windows(2))
            .map(|(t, v)| (v[1] - v[0]) / (t[1] - t[0]))
            .collect();
        let sscale = slopes.iter().fold(1.0f64, |a, s| a.max(s.abs()));
        if slopes.windows(2).any(|w| w[1] > w[0] + 1e-12 * sscale) {
            return Err(Error::InvalidKernel("table samples are not concave".into()));
        }
        let mut ts = ts;
        let last = ts.len() - 1;
        ts[0] = 0.0;
        ts[last] = TAU;
        Ok(Table { ts, vs, slopes })
    }

    /// Index of the segment `[ts[i], ts[i+1])` containing `u`.
    fn segment(&self, u: f64) -> usize {
        let i = self.ts.partition_point(|&x| x <= u);
        i.saturating_sub(1).min(self.slopes.len() - 1)
    }

    fn value(&self, u: f64) -> f64 {
        let i = self.segment(u);
        self.vs[i] + self.slopes[i] * (u - self.ts[i])
    }

    fn deriv(&self, u: f64, side: Side) -> f64 {
        let i = self.segment(u);
        match side {
            Side::Right => self.slopes[i],
            Side::Left => {
                if u == self.ts[i] {
                    if i == 0 {
                        self.slopes[self.slopes.len() - 1]
                    } else {
                        self.slopes[i - 1]
                    }
                } else {
                    self.slopes[i]
                }
            }
        }
    }

    fn is_even(&self) -> bool {
        let scale = self.vs.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        self.ts.iter().all(|&t| (self.value(reduce(TAU - t)) - self.value(reduce(t))).abs() <= 1e-12 * scale)
    }
}

#[derive(Debug, Clone)]
enum Node {
    LogSine,
    Riesz(f64),
    Tent,
    Parabola,
    Table(Table),
    Weighted(f64, Box<Node>),
    Sum(Vec<Node>),
    Smoothed(Box<Node>, f64, SmoothingKind),
}

/// Distance to the gluing point and the sign of `d/du` of that distance.
#[inline]
fn fold(u: f64) -> (f64, f64) {
    if u <= PI {
        (u, 1.0)
    } else {
        (TAU - u, -1.0)
    }
}

/// Derivative of an even profile `g(d)` at `u`, where `g'` is given on `d > 0`.
#[inline]
fn even_deriv(u: f64, side: Side, gprime: impl Fn(f64) -> f64) -> f64 {
    if u == 0.0 {
        return match side {
            Side::Right => gprime(0.0),
            Side::Left => -gprime(0.0),
        };
    }
    let (d, s) = fold(u);
    s * gprime(d)
}

impl Node {
    fn build(spec: &KernelSpec) -> Result<Node> {
        Ok(match spec {
            KernelSpec::LogSine => Node::LogSine,
            KernelSpec::Riesz { p } => {
                if !(p.is_finite() && *p > 0.0) {
                    return Err(Error::InvalidKernel(format!("riesz exponent must be positive, got {p}")));
                }
                Node::Riesz(*p)
            }
            KernelSpec::Tent => Node::Tent,
            KernelSpec::Parabola => Node::Parabola,
            KernelSpec::Table { samples, path } => {
                if samples.is_empty() {
                    if let Some(p) = path {
                        return Err(Error::InvalidKernel(format!("table file {p} was not loaded")));
                    }
                }
                Node::Table(Table::new(samples)?)
            }
            KernelSpec::Weighted { weight, base } => {
                if !(weight.is_finite() && *weight > 0.0) {
                    return Err(Error::InvalidKernel(format!("weight must be positive, got {weight}")));
                }
                Node::Weighted(*weight, Box::new(Node::build(base)?))
            }
            KernelSpec::Sum { terms } => {
                if terms.is_empty() {
                    return Err(Error::InvalidKernel("sum kernel needs at least one term".into()));
                }
                Node::Sum(terms.iter().map(Node::build).collect::<Result<_>>()?)
            }
            KernelSpec::Smoothed { base, level, kind } => {
                if *level == 0 {
                    return Err(Error::InvalidKernel("approximation level must be >= 1".into()));
                }
                Node::Smoothed(Box::new(Node::build(base)?), *level as f64, *kind)
            }
        })
    }

    fn value(&self, u: f64) -> f64 {
        match self {
            Node::LogSine => {
                if u == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    (fold(u).0 * 0.5).sin().ln()
                }
            }
            Node::Riesz(p) => {
                if u == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    -(2.0 * (fold(u).0 * 0.5).sin()).powf(-p)
                }
            }
            Node::Tent => PI - (u - PI).abs(),
            Node::Parabola => u * (TAU - u),
            Node::Table(t) => t.value(u),
            Node::Weighted(r, b) => r * b.value(u),
            Node::Sum(ts) => ts.iter().map(|t| t.value(u)).sum(),
            Node::Smoothed(b, k, kind) => b.value(u) + smoothing_value(u, *k, *kind),
        }
    }

    fn deriv(&self, u: f64, side: Side) -> f64 {
        match self {
            Node::LogSine => even_deriv(u, side, |d| {
                if d == 0.0 {
                    f64::INFINITY
                } else {
                    0.5 / (d * 0.5).tan()
                }
            }),
            Node::Riesz(p) => even_deriv(u, side, |d| {
                if d == 0.0 {
                    f64::INFINITY
                } else {
                    let s = 2.0 * (d * 0.5).sin();
                    p * s.powf(-p - 1.0) * (d * 0.5).cos()
                }
            }),
            Node::Tent => {
                if u < PI || (u == PI && side == Side::Left) {
                    if u == 0.0 && side == Side::Left {
                        -1.0
                    } else {
                        1.0
                    }
                } else {
                    -1.0
                }
            }
            Node::Parabola => {
                if u == 0.0 && side == Side::Left {
                    -TAU
                } else {
                    TAU - 2.0 * u
                }
            }
            Node::Table(t) => t.deriv(u, side),
            Node::Weighted(r, b) => r * b.deriv(u, side),
            Node::Sum(ts) => ts.iter().map(|t| t.deriv(u, side)).sum(),
            Node::Smoothed(b, k, kind) => b.deriv(u, side) + smoothing_deriv(u, side, *k, *kind),
        }
    }

    fn second(&self, u: f64) -> Option<f64> {
        match self {
            Node::LogSine => {
                let s = (fold(u).0 * 0.5).sin();
                Some(-0.25 / (s * s))
            }
            Node::Riesz(p) => {
                let h = fold(u).0 * 0.5;
                let s = 2.0 * h.sin();
                let (c, sn) = (h.cos(), h.sin());
                Some(-p * s.powf(-p - 2.0) * ((p + 1.0) * c * c + sn * sn))
            }
            Node::Parabola => Some(-2.0),
            Node::Tent | Node::Table(_) => None,
            Node::Weighted(r, b) => b.second(u).map(|v| r * v),
            Node::Sum(ts) => ts.iter().map(|t| t.second(u)).sum(),
            Node::Smoothed(b, k, SmoothingKind::Bump) => {
                let w = u * (TAU - u);
                b.second(u).map(|v| v - PI * PI / (k * w * w.sqrt()))
            }
            Node::Smoothed(_, _, _) => None,
        }
    }

    fn c1(&self) -> bool {
        match self {
            Node::LogSine | Node::Riesz(_) | Node::Parabola => true,
            Node::Tent | Node::Table(_) => false,
            Node::Weighted(_, b) => b.c1(),
            Node::Sum(ts) => ts.iter().all(Node::c1),
            Node::Smoothed(b, _, SmoothingKind::Bump) => b.c1(),
            Node::Smoothed(..) => false,
        }
    }

    fn c2(&self) -> bool {
        match self {
            Node::LogSine | Node::Riesz(_) | Node::Parabola => true,
            Node::Tent | Node::Table(_) => false,
            Node::Weighted(_, b) => b.c2(),
            Node::Sum(ts) => ts.iter().all(Node::c2),
            Node::Smoothed(b, _, SmoothingKind::Bump) => b.c2(),
            Node::Smoothed(..) => false,
        }
    }

    fn strictly_concave(&self) -> bool {
        match self {
            Node::LogSine | Node::Riesz(_) | Node::Parabola => true,
            Node::Tent | Node::Table(_) => false,
            Node::Weighted(_, b) => b.strictly_concave(),
            Node::Sum(ts) => ts.iter().any(Node::strictly_concave),
            Node::Smoothed(_, _, SmoothingKind::Bump) => true,
            Node::Smoothed(b, _, _) => b.strictly_concave(),
        }
    }

    fn even(&self) -> bool {
        match self {
            Node::LogSine | Node::Riesz(_) | Node::Parabola | Node::Tent => true,
            Node::Table(t) => t.is_even(),
            Node::Weighted(_, b) | Node::Smoothed(b, _, _) => b.even(),
            Node::Sum(ts) => ts.iter().all(Node::even),
        }
    }
}

fn smoothing_value(u: f64, k: f64, kind: SmoothingKind) -> f64 {
    match kind {
        SmoothingKind::Bump => (u * (TAU - u)).max(0.0).sqrt() / k,
        SmoothingKind::LogCusp => {
            let d = fold(u).0;
            if d == 0.0 {
                f64::NEG_INFINITY
            } else {
                (k * d).ln().min(0.0)
            }
        }
        SmoothingKind::SqrtCusp => (fold(u).0.sqrt() - 1.0 / k).min(0.0),
    }
}

fn smoothing_deriv(u: f64, side: Side, k: f64, kind: SmoothingKind) -> f64 {
    match kind {
        SmoothingKind::Bump => {
            if u == 0.0 {
                return match side {
                    Side::Right => f64::INFINITY,
                    Side::Left => f64::NEG_INFINITY,
                };
            }
            (PI - u) / (k * (u * (TAU - u)).sqrt())
        }
        SmoothingKind::LogCusp | SmoothingKind::SqrtCusp => {
            let threshold = match kind {
                SmoothingKind::LogCusp => 1.0 / k,
                _ => 1.0 / (k * k),
            };
            let g = |d: f64| -> f64 {
                if d == 0.0 {
                    f64::INFINITY
                } else if kind == SmoothingKind::LogCusp {
                    1.0 / d
                } else {
                    0.5 / d.sqrt()
                }
            };
            if u == 0.0 {
                return match side {
                    Side::Right => f64::INFINITY,
                    Side::Left => f64::NEG_INFINITY,
                };
            }
            let (d, s) = fold(u);
            // moving in the direction of `side` increases or decreases d
            let toward_larger_d = (side == Side::Right) == (s > 0.0);
            let inside = if toward_larger_d { d < threshold } else { d <= threshold };
            if inside {
                s * g(d)
            } else {
                0.0
            }
        }
    }
}

/// A validated concave kernel. Immutable and cheap to share across threads.
#[derive(Debug, Clone)]
pub struct Kernel {
    spec: KernelSpec,
    node: Node,
    class: KernelClass,
}

impl Kernel {
    pub fn new(spec: KernelSpec) -> Result<Self> {
        let node = Node::build(&spec)?;
        let at0 = node.value(0.0);
        let dr = node.deriv(0.0, Side::Right);
        let dl = node.deriv(0.0, Side::Left);
        let class = KernelClass {
            finite_at_zero: at0.is_finite(),
            cond_inf: at0 == f64::NEG_INFINITY,
            cond_inf_prime_minus: dl == f64::NEG_INFINITY,
            cond_inf_prime_plus: dr == f64::INFINITY,
            cond_inf_prime: dl == f64::NEG_INFINITY || dr == f64::INFINITY,
            c1: node.c1(),
            c2: node.c2(),
            strictly_concave: node.strictly_concave(),
            even_symmetric: node.even(),
        };
        Ok(Kernel { spec, node, class })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn class(&self) -> KernelClass {
        self.class
    }

    /// `K(t)` with `t` reduced mod 2π; `−∞` is returned as `f64::NEG_INFINITY`.
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        self.node.value(reduce(t))
    }

    pub fn eval(&self, t: f64) -> ExtReal {
        ExtReal::from_f64(self.value(t))
    }

    /// One-sided derivative `D₋K(t)` or `D₊K(t)`; at `t = 0` these are the
    /// limits from `2π−` and `0+` respectively.
    #[inline]
    pub fn deriv(&self, t: f64, side: Side) -> f64 {
        self.node.deriv(reduce(t), side)
    }

    /// Midpoint of the superdifferential `[D₊K(t), D₋K(t)]`, a valid slope of
    /// a supporting line wherever both one-sided derivatives are finite.
    pub fn support_slope(&self, t: f64) -> f64 {
        let u = reduce(t);
        let l = self.node.deriv(u, Side::Left);
        let r = self.node.deriv(u, Side::Right);
        if l == r {
            l
        } else {
            0.5 * (l + r)
        }
    }

    /// `K''(t)` on `(0, 2π)`; only available for `C²` kernels.
    pub fn second_deriv(&self, t: f64) -> Result<f64> {
        if !self.class.c2 {
            return Err(Error::Capability("second derivative requested on a non-C² kernel".into()));
        }
        let u = reduce(t);
        if u == 0.0 {
            return Err(Error::InvalidInput("second derivative is only defined on (0, 2π)".into()));
        }
        self.node
            .second(u)
            .ok_or_else(|| Error::Capability("second derivative unavailable".into()))
    }
}

/// Flags of a kernel spec; validates the spec on the way.
pub fn classify(spec: &KernelSpec) -> Result<KernelClass> {
    Ok(Kernel::new(spec.clone())?.class())
}
