//! The sum of translates `F(y,t) = Σ_j K_j(t − y_j)`, its arc maxima, and
//! the Jacobians of the arc maxima and of their consecutive differences.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::{ser_f64, ExtReal};
use crate::kernels::{Kernel, KernelSpec, Side};
use crate::torus::{arcs, Arc, NodeSystem, Permutation};

/// Kernels `K_0..K_n`; `K_0` sits at the anchor `y_0 = 0`.
#[derive(Debug, Clone)]
pub struct Problem {
    kernels: Vec<Kernel>,
}

impl Problem {
    pub fn new(specs: Vec<KernelSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidInput("a problem needs at least one kernel".into()));
        }
        let kernels = specs.into_iter().map(Kernel::new).collect::<Result<_>>()?;
        Ok(Problem { kernels })
    }

    pub fn from_kernels(kernels: Vec<Kernel>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::InvalidInput("a problem needs at least one kernel".into()));
        }
        Ok(Problem { kernels })
    }

    /// Number of free nodes.
    pub fn n(&self) -> usize {
        self.kernels.len() - 1
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn kernel(&self, j: usize) -> &Kernel {
        &self.kernels[j]
    }

    pub fn specs(&self) -> Vec<KernelSpec> {
        self.kernels.iter().map(|k| k.spec().clone()).collect()
    }

    /// Applies `f` to every kernel spec.
    pub fn map_specs(&self, f: impl Fn(&KernelSpec) -> Result<KernelSpec>) -> Result<Problem> {
        Problem::new(self.kernels.iter().map(|k| f(k.spec())).collect::<Result<_>>()?)
    }

    pub fn check_nodes(&self, y: &NodeSystem) -> Result<()> {
        if y.n() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: y.n() });
        }
        Ok(())
    }

    /// `F(y,t)` as a raw `f64` (`−∞` allowed).
    #[inline]
    pub fn value(&self, y: &NodeSystem, t: f64) -> f64 {
        let mut s = self.kernels[0].value(t);
        for (j, k) in self.kernels.iter().enumerate().skip(1) {
            s += k.value(t - y.get(j));
        }
        s
    }

    /// One-sided `t`-derivative of `F(y,·)`.
    #[inline]
    pub fn dt(&self, y: &NodeSystem, t: f64, side: Side) -> f64 {
        let mut s = self.kernels[0].deriv(t, side);
        for (j, k) in self.kernels.iter().enumerate().skip(1) {
            s += k.deriv(t - y.get(j), side);
        }
        s
    }
}

/// Sum of translates with the first node anchored at 0.
pub fn sum_translates(p: &Problem, y: &NodeSystem, t: f64) -> Result<ExtReal> {
    p.check_nodes(y)?;
    Ok(ExtReal::from_f64(p.value(y, t)))
}

/// `Σ_j K_j(t − y_full[j])` with no anchoring.
pub fn sum_translates_full(p: &Problem, y_full: &[f64], t: f64) -> Result<ExtReal> {
    if y_full.len() != p.kernels.len() {
        return Err(Error::DimensionMismatch { expected: p.kernels.len(), got: y_full.len() });
    }
    let s: f64 = p.kernels.iter().zip(y_full).map(|(k, &yj)| k.value(t - yj)).sum();
    Ok(ExtReal::from_f64(s))
}

/// One-dimensional maximizer used on each arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Maximizer {
    /// Bisection on the sign of the one-sided derivatives of `F(y,·)`.
    Bisection,
    /// Golden-section search on values only.
    Golden,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    /// Width below which the maximizer search stops.
    pub tol_z: f64,
    pub maximizer: Maximizer,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { tol_z: 1e-12 * std::f64::consts::TAU, maximizer: Maximizer::Bisection }
    }
}

/// Maximum of `F(y,·)` on one arc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcMax {
    pub j: usize,
    pub start: f64,
    pub end: f64,
    pub z: f64,
    #[serde(serialize_with = "ser_f64")]
    pub m: f64,
    pub z_on_boundary: bool,
    pub non_unique: bool,
}

/// Per-arc maxima and their extremes under one permutation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArcProfile {
    pub sigma: Permutation,
    /// `arcs[j]` describes `I_{σ,j}`.
    pub arcs: Vec<ArcMax>,
    #[serde(serialize_with = "ser_f64")]
    pub m_bar: f64,
    #[serde(serialize_with = "ser_f64")]
    pub m_under: f64,
}

impl ArcProfile {
    /// `(m_0, …, m_n)`.
    pub fn m(&self) -> Vec<f64> {
        self.arcs.iter().map(|a| a.m).collect()
    }

    pub fn z(&self) -> Vec<f64> {
        self.arcs.iter().map(|a| a.z).collect()
    }

    /// `max_j m_j − min_j m_j`.
    pub fn spread(&self) -> f64 {
        self.m_bar - self.m_under
    }

    pub fn ext_m(&self) -> Vec<ExtReal> {
        self.arcs.iter().map(|a| ExtReal::from_f64(a.m)).collect()
    }
}

fn bisect_max(p: &Problem, y: &NodeSystem, a: f64, b: f64, tol: f64) -> (f64, bool) {
    let up = |t: f64| p.dt(y, t, Side::Right) > 0.0;
    let down = |t: f64| p.dt(y, t, Side::Left) < 0.0;
    if !up(a) {
        // F is non-increasing right of a; a plateau may still start here
        let r = plateau_end(&down, a, b, tol);
        return if r - a > tol { (0.5 * (a + r), true) } else { (a, false) };
    }
    if !down(b) {
        let l = plateau_start(&up, a, b, tol);
        return if b - l > tol { (0.5 * (l + b), true) } else { (b, false) };
    }
    let (mut lo, mut hi) = (a, b);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if up(mid) {
            lo = mid;
        } else if down(mid) {
            hi = mid;
        } else {
            // 0 lies in the superdifferential at mid; measure the plateau
            let l = plateau_start(&up, lo, mid, tol);
            let r = plateau_end(&down, mid, hi, tol);
            if r - l > tol {
                return (0.5 * (l + r), true);
            }
            return (mid, false);
        }
    }
    (0.5 * (lo + hi), false)
}

/// Smallest point of `[a, b]` where `up` stops holding (`up(a)` is assumed).
fn plateau_start(up: &impl Fn(f64) -> bool, a: f64, b: f64, tol: f64) -> f64 {
    let (mut lo, mut hi) = (a, b);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if up(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest point of `[a, b]` before `down` starts holding.
fn plateau_end(down: &impl Fn(f64) -> bool, a: f64, b: f64, tol: f64) -> f64 {
    let (mut lo, mut hi) = (a, b);
    if !down(b) {
        return b;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if down(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn golden_max(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    // Pull −∞ endpoints inward until values are finite.
    let (mut lo, mut hi) = (a, b);
    let step = ((b - a) / 4.0).min(1e-3);
    while !f(lo).is_finite() && hi - lo > tol {
        lo += step.min((hi - lo) / 2.0);
    }
    while !f(hi).is_finite() && hi - lo > tol {
        hi -= step.min((hi - lo) / 2.0);
    }
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    // endpoints of the original arc may beat the interior
    [a, b].into_iter().fold(mid, |best, e| if f(e) > f(best) { e } else { best })
}

fn arc_max_on(p: &Problem, y: &NodeSystem, arc: &Arc, opts: &EvalOptions) -> ArcMax {
    let (a, b) = (arc.start, arc.end);
    let base = ArcMax { j: arc.j, start: a, end: b, z: a, m: 0.0, z_on_boundary: true, non_unique: false };
    if arc.is_degenerate() {
        return ArcMax { m: p.value(y, a), ..base };
    }
    let tol = opts.tol_z.max(f64::EPSILON * b);
    let (mut z, non_unique) = match opts.maximizer {
        Maximizer::Bisection => bisect_max(p, y, a, b, tol),
        Maximizer::Golden => (golden_max(|t| p.value(y, t), a, b, tol), false),
    };
    let mut m = p.value(y, z);
    for e in [a, b] {
        if (z - e).abs() <= tol {
            let me = p.value(y, e);
            if me >= m {
                z = e;
                m = me;
            }
        }
    }
    let z_on_boundary = (z - a).abs() <= tol || (b - z).abs() <= tol;
    ArcMax { z, m, z_on_boundary, non_unique, ..base }
}

/// Maximizer and maximum of `F(y,·)` on the arc `I_{σ,j}`.
pub fn arc_max(p: &Problem, y: &NodeSystem, sigma: &Permutation, j: usize) -> Result<ArcMax> {
    arc_max_with(p, y, sigma, j, &EvalOptions::default())
}

pub fn arc_max_with(p: &Problem, y: &NodeSystem, sigma: &Permutation, j: usize, opts: &EvalOptions) -> Result<ArcMax> {
    p.check_nodes(y)?;
    if j > p.n() {
        return Err(Error::InvalidInput(format!("arc index {j} out of range 0..={}", p.n())));
    }
    let part = arcs(y, sigma)?;
    Ok(arc_max_on(p, y, &part.arcs[j], opts))
}

pub fn profile(p: &Problem, y: &NodeSystem, sigma: &Permutation) -> Result<ArcProfile> {
    profile_with(p, y, sigma, &EvalOptions::default())
}

pub fn profile_with(p: &Problem, y: &NodeSystem, sigma: &Permutation, opts: &EvalOptions) -> Result<ArcProfile> {
    p.check_nodes(y)?;
    let part = arcs(y, sigma)?;
    let arcs: Vec<ArcMax> = part.arcs.iter().map(|a| arc_max_on(p, y, a, opts)).collect();
    let m_bar = arcs.iter().map(|a| a.m).fold(f64::NEG_INFINITY, f64::max);
    let m_under = arcs.iter().map(|a| a.m).fold(f64::INFINITY, f64::min);
    Ok(ArcProfile { sigma: sigma.clone(), arcs, m_bar, m_under })
}

/// How to evaluate `K_r'` in the Jacobian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Slopes {
    /// Require `C¹` kernels and interior maximizers.
    Strict,
    /// Use the midpoint of the one-sided derivatives; never fails.
    Support,
}

pub(crate) fn jacobian_m_from(p: &Problem, y: &NodeSystem, prof: &ArcProfile, mode: Slopes) -> Result<DMatrix<f64>> {
    let n = p.n();
    if mode == Slopes::Strict {
        if let Some(k) = p.kernels.iter().position(|k| !k.class().c1) {
            return Err(Error::JacobianUnavailable(format!("kernel {k} is not C¹")));
        }
        if let Some(a) = prof.arcs.iter().find(|a| a.z_on_boundary) {
            return Err(Error::JacobianUnavailable(format!("maximizer of arc {} lies on the arc boundary", a.j)));
        }
    }
    let mut jm = DMatrix::zeros(n + 1, n);
    for (j, a) in prof.arcs.iter().enumerate() {
        for r in 1..=n {
            let k = &p.kernels[r];
            let u = a.z - y.get(r);
            let d = match mode {
                Slopes::Strict => k.deriv(u, Side::Right),
                Slopes::Support => k.support_slope(u),
            };
            if mode == Slopes::Strict && !d.is_finite() {
                return Err(Error::JacobianUnavailable(format!("z_{j} coincides with node y_{r}")));
            }
            jm[(j, r - 1)] = -d;
        }
    }
    Ok(jm)
}

/// `∂m_j/∂y_r = −K_r'(z_j − y_r)`, rows `j = 0..n`, columns `r = 1..n`.
pub fn jacobian_m(p: &Problem, y: &NodeSystem, sigma: &Permutation) -> Result<DMatrix<f64>> {
    let prof = profile(p, y, sigma)?;
    jacobian_m_from(p, y, &prof, Slopes::Strict)
}

/// `Δ_σ(y)_k = m_σ(k) − m_σ(k−1)`, `k = 1..n`.
///
/// A component involving `−∞` maxima is reported as `±∞`.
pub fn delta(p: &Problem, y: &NodeSystem, sigma: &Permutation) -> Result<Vec<f64>> {
    Ok(delta_from(&profile(p, y, sigma)?))
}

pub(crate) fn delta_from(prof: &ArcProfile) -> Vec<f64> {
    let s = &prof.sigma;
    (1..=s.n())
        .map(|k| {
            let d = prof.arcs[s.at(k)].m - prof.arcs[s.at(k - 1)].m;
            if d.is_nan() {
                f64::INFINITY
            } else {
                d
            }
        })
        .collect()
}

/// Rows of `jacobian_m` differenced in σ-order, with columns in σ-order too.
pub(crate) fn jacobian_delta_from(jm: &DMatrix<f64>, sigma: &Permutation) -> DMatrix<f64> {
    let n = sigma.n();
    DMatrix::from_fn(n, n, |row, col| {
        let k = row + 1;
        let r = sigma.at(col + 1) - 1;
        jm[(sigma.at(k), r)] - jm[(sigma.at(k - 1), r)]
    })
}

/// Jacobian of `Δ_σ` with respect to the σ-ordered nodes `(y_σ(1), …, y_σ(n))`.
///
/// Entry `(k, l)` is `∂Δ_k/∂y_σ(l)`. With this ordering the negated matrix
/// is a Z-matrix whenever the maximizers interlace the nodes.
pub fn jacobian_delta(p: &Problem, y: &NodeSystem, sigma: &Permutation) -> Result<DMatrix<f64>> {
    let jm = jacobian_m(p, y, sigma)?;
    Ok(jacobian_delta_from(&jm, sigma))
}
