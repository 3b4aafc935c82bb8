//! Equioscillation, minimax and maximin solvers on a single simplex, the
//! global sweep over simplices, and the perturbation descent step.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::evaluator::{
    delta_from, jacobian_delta_from, jacobian_m_from, profile_with, ArcProfile, EvalOptions, Problem, Slopes,
};
use crate::ext::ser_f64;
use crate::kernels::{approximant, SmoothingKind};
use crate::torus::{NodeSystem, Permutation};

/// Where the iteration starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", content = "nodes", rename_all = "snake_case")]
pub enum Start {
    #[default]
    Equidistant,
    User(NodeSystem),
    /// Best point of a coarse lattice (small `n`) or of seeded random samples.
    CoarseGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Damping {
    /// Step shrink factor.
    pub factor: f64,
    pub min_step: f64,
    /// Required relative decrease of `‖Δ‖∞` per unit step.
    pub armijo: f64,
}

impl Default for Damping {
    fn default() -> Self {
        Damping { factor: 0.5, min_step: (2.0f64).powi(-30), armijo: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub tol_residual: f64,
    pub max_iter: usize,
    pub damping: Damping,
    /// Approximation levels; an exact stage always follows.
    pub homotopy_levels: Vec<u32>,
    pub start: Start,
    pub eval: EvalOptions,
    pub seed: u64,
    /// Extra random starts used when a minimax point cannot be certified.
    pub multistart: usize,
    /// Largest `n` for the exhaustive sweep over simplices.
    pub sigma_cap: usize,
    /// Probe offset for the local minimality certificate.
    pub probe_h: f64,
    /// Slack allowed in the certificate.
    pub probe_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol_residual: 1e-10,
            max_iter: 200,
            damping: Damping::default(),
            homotopy_levels: vec![4, 16, 64, 256],
            start: Start::Equidistant,
            eval: EvalOptions::default(),
            seed: 0x5eed,
            multistart: 8,
            sigma_cap: 6,
            probe_h: 1e-4,
            probe_tol: 1e-9,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_residual > 0.0) || !(self.probe_h > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidInput("tolerances and iteration counts must be positive".into()));
        }
        if self.homotopy_levels.contains(&0) || self.homotopy_levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("homotopy levels must be positive and increasing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    BoundarySuspected,
    MaxIter,
    JacobianSingular,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub stage: String,
    pub iter: usize,
    #[serde(serialize_with = "ser_f64")]
    pub residual: f64,
    pub step: f64,
}

/// Diagnostics beyond the status.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Flags {
    /// Whether the hypotheses identifying equioscillation with minimax hold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preconditions: Option<bool>,
    /// Outcome of the local minimality probe.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certified: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub status: Status,
    pub simplex: Permutation,
    pub nodes: NodeSystem,
    pub profile: ArcProfile,
    /// `‖Δ_σ‖∞` at `nodes`.
    #[serde(serialize_with = "ser_f64")]
    pub residual: f64,
    /// `m̄` for equioscillation and minimax, `m̲` for maximin.
    #[serde(serialize_with = "ser_f64")]
    pub objective: f64,
    pub flags: Flags,
    pub trace: Vec<TraceEntry>,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

// ---------------------------------------------------------------------------
// σ-ordered position vectors

fn positions(y: &NodeSystem, sigma: &Permutation) -> Vec<f64> {
    (1..=sigma.n()).map(|k| y.get(sigma.at(k))).collect()
}

fn is_interior(q: &[f64]) -> bool {
    let mut prev = 0.0;
    for &v in q {
        if !(v > prev) {
            return false;
        }
        prev = v;
    }
    prev < TAU
}

fn min_gap(q: &[f64]) -> f64 {
    let mut prev = 0.0;
    let mut g = f64::INFINITY;
    for &v in q.iter().chain(std::iter::once(&TAU)) {
        g = g.min(v - prev);
        prev = v;
    }
    g
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| if x.is_nan() { f64::INFINITY } else { a.max(x.abs()) })
}

fn random_positions(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let mut q: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * TAU).collect();
        q.sort_by(f64::total_cmp);
        if is_interior(&q) && min_gap(&q) > 1e-6 {
            return q;
        }
    }
}

/// Evaluation context for one problem on one simplex.
struct Ctx<'a> {
    p: &'a Problem,
    sigma: &'a Permutation,
    opts: &'a SolveOptions,
}

struct State {
    q: Vec<f64>,
    prof: ArcProfile,
    delta: Vec<f64>,
    res: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Exit {
    Converged,
    Stalled,
    Singular,
    MaxIter,
}

impl Ctx<'_> {
    fn nodes(&self, q: &[f64]) -> NodeSystem {
        NodeSystem::from_positions(self.sigma, q)
    }

    fn state(&self, q: Vec<f64>) -> Result<State> {
        let prof = profile_with(self.p, &self.nodes(&q), self.sigma, &self.opts.eval)?;
        let delta = delta_from(&prof);
        let res = inf_norm(&delta);
        Ok(State { q, prof, delta, res })
    }

    fn newton(&self, s0: State, stage: &str, trace: &mut Vec<TraceEntry>) -> Result<(State, Exit)> {
        let n = self.sigma.n();
        let d = &self.opts.damping;
        let mut s = s0;
        for iter in 0..self.opts.max_iter {
            if s.res <= self.opts.tol_residual {
                return Ok((s, Exit::Converged));
            }
            let y = self.nodes(&s.q);
            let jm = jacobian_m_from(self.p, &y, &s.prof, Slopes::Support)?;
            let jd = jacobian_delta_from(&jm, self.sigma);
            let sv = jd.clone().singular_values();
            let (smax, smin) = (sv.max(), sv.min());
            if !(smin > 0.0) || smax / smin > 1e12 {
                return Ok((s, Exit::Singular));
            }
            let rhs = DVector::from_iterator(n, s.delta.iter().map(|v| -v));
            let Some(step) = jd.lu().solve(&rhs) else {
                return Ok((s, Exit::Singular));
            };
            let mut lam = 1.0;
            let next = loop {
                if lam < d.min_step {
                    break None;
                }
                let q: Vec<f64> = s.q.iter().zip(step.iter()).map(|(a, b)| a + lam * b).collect();
                if is_interior(&q) {
                    let t = self.state(q)?;
                    if t.res < s.res * (1.0 - d.armijo * lam) {
                        break Some(t);
                    }
                }
                lam *= d.factor;
            };
            match next {
                Some(t) => {
                    trace.push(TraceEntry { stage: stage.to_string(), iter, residual: t.res, step: lam });
                    s = t;
                }
                None => return Ok((s, Exit::Stalled)),
            }
        }
        let exit = if s.res <= self.opts.tol_residual { Exit::Converged } else { Exit::MaxIter };
        Ok((s, exit))
    }

    /// Gauss–Seidel sweeps: solve `Δ_k = 0` in `y_σ(k)` one coordinate at a time.
    fn sweeps(&self, s0: State, stage: &str, trace: &mut Vec<TraceEntry>) -> Result<(State, Exit)> {
        let n = self.sigma.n();
        let mut s = s0;
        let sweeps = self.opts.max_iter.min(60);
        for iter in 0..sweeps {
            if s.res <= self.opts.tol_residual {
                return Ok((s, Exit::Converged));
            }
            let before = s.res;
            for k in 0..n {
                let lo_b = if k == 0 { 0.0 } else { s.q[k - 1] };
                let hi_b = if k + 1 == n { TAU } else { s.q[k + 1] };
                let margin = 1e-12 * (hi_b - lo_b).max(1e-300);
                let g = |x: f64| -> Result<f64> {
                    let mut q = s.q.clone();
                    q[k] = x;
                    let st = self.state(q)?;
                    Ok(st.delta[k])
                };
                let (mut a, mut b) = (lo_b + margin, hi_b - margin);
                if !(b > a) {
                    continue;
                }
                let (mut fa, mut fb) = (g(a)?, g(b)?);
                let x = if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() {
                    if fa.abs() < fb.abs() {
                        a
                    } else {
                        b
                    }
                } else {
                    // Illinois variant of regula falsi
                    let mut side = 0i8;
                    let mut x = 0.5 * (a + b);
                    for _ in 0..100 {
                        x = if fa.is_finite() && fb.is_finite() {
                            (a * fb - b * fa) / (fb - fa)
                        } else {
                            0.5 * (a + b)
                        };
                        if !(x > a && x < b) {
                            x = 0.5 * (a + b);
                        }
                        let fx = g(x)?;
                        if fx.abs() <= 0.1 * self.opts.tol_residual || b - a <= 4.0 * f64::EPSILON * b {
                            break;
                        }
                        if fx.signum() == fb.signum() {
                            b = x;
                            fb = fx;
                            if side == -1 {
                                fa *= 0.5;
                            }
                            side = -1;
                        } else {
                            a = x;
                            fa = fx;
                            if side == 1 {
                                fb *= 0.5;
                            }
                            side = 1;
                        }
                    }
                    x
                };
                s.q[k] = x;
            }
            s = self.state(s.q)?;
            trace.push(TraceEntry { stage: format!("{stage}/sweep"), iter, residual: s.res, step: 1.0 });
            if !(s.res < before) {
                return Ok((s, Exit::Stalled));
            }
        }
        let exit = if s.res <= self.opts.tol_residual { Exit::Converged } else { Exit::MaxIter };
        Ok((s, exit))
    }

    /// Newton, then coordinate sweeps, then a Newton polish.
    fn solve_stage(&self, q: Vec<f64>, stage: &str, trace: &mut Vec<TraceEntry>) -> Result<(State, Exit)> {
        let s = self.state(q)?;
        let (s, exit) = self.newton(s, stage, trace)?;
        if exit == Exit::Converged {
            return Ok((s, exit));
        }
        let (s2, exit2) = self.sweeps(s, stage, trace)?;
        if exit2 == Exit::Converged {
            return Ok((s2, exit2));
        }
        let (s3, exit3) = self.newton(s2, stage, trace)?;
        if exit3 == Exit::Converged {
            return Ok((s3, exit3));
        }
        let combined = if exit == Exit::Singular || exit3 == Exit::Singular { Exit::Singular } else { exit3 };
        Ok((s3, combined))
    }
}

fn start_positions(p: &Problem, sigma: &Permutation, opts: &SolveOptions) -> Result<Vec<f64>> {
    let n = sigma.n();
    match &opts.start {
        Start::Equidistant => Ok(positions(&NodeSystem::equidistant(sigma), sigma)),
        Start::User(y) => {
            p.check_nodes(y)?;
            let q = positions(y, sigma);
            if !is_interior(&q) {
                return Err(Error::IncompatibleSimplex {
                    sigma: sigma.to_string(),
                    reason: "start point is not interior to the simplex".into(),
                });
            }
            Ok(q)
        }
        Start::CoarseGrid => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut cands = vec![positions(&NodeSystem::equidistant(sigma), sigma)];
            cands.extend((0..64 * n.max(1)).map(|_| random_positions(&mut rng, n)));
            let mut best = (f64::INFINITY, cands[0].clone());
            for q in cands {
                let m = profile_with(p, &NodeSystem::from_positions(sigma, &q), sigma, &opts.eval)?.m_bar;
                if m < best.0 {
                    best = (m, q);
                }
            }
            Ok(best.1)
        }
    }
}

fn check_dims(p: &Problem, sigma: &Permutation) -> Result<()> {
    if sigma.n() != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), got: sigma.n() });
    }
    Ok(())
}

fn status_of(exit: Exit, q: &[f64]) -> Status {
    match exit {
        Exit::Converged => Status::Converged,
        _ if min_gap(q) < 1e-9 => Status::BoundarySuspected,
        Exit::Singular => Status::JacobianSingular,
        Exit::Stalled | Exit::MaxIter => Status::MaxIter,
    }
}

fn report(sigma: &Permutation, s: State, status: Status, objective: f64, trace: Vec<TraceEntry>) -> SolveReport {
    SolveReport {
        status,
        simplex: sigma.clone(),
        nodes: NodeSystem::from_positions(sigma, &s.q),
        residual: s.res,
        objective,
        profile: s.prof,
        flags: Flags::default(),
        trace,
    }
}

/// Finds `w ∈ S_σ` with `Δ_σ(w) = 0`.
///
/// Runs damped Newton on the exact kernels first; if that fails, follows a
/// homotopy through smoothed kernels and finishes with an exact stage.
pub fn solve_equioscillation(p: &Problem, sigma: &Permutation, opts: &SolveOptions) -> Result<SolveReport> {
    check_dims(p, sigma)?;
    opts.validate()?;
    let ctx = Ctx { p, sigma, opts };
    let q0 = start_positions(p, sigma, opts)?;
    let mut trace = Vec::new();
    let (s, exit) = ctx.solve_stage(q0.clone(), "exact", &mut trace)?;
    if exit == Exit::Converged || sigma.n() == 0 {
        let m = s.prof.m_bar;
        return Ok(report(sigma, s, Status::Converged, m, trace));
    }

    let kind = if p.kernels().iter().all(|k| k.class().c2) { SmoothingKind::Bump } else { SmoothingKind::SqrtCusp };
    let mut q = q0;
    for &level in &opts.homotopy_levels {
        let pk = p.map_specs(|s| approximant(s, level, kind))?;
        let ck = Ctx { p: &pk, sigma, opts };
        let stage = format!("{}:{level}", kind_name(kind));
        let (sk, _) = ck.solve_stage(q.clone(), &stage, &mut trace)?;
        if is_interior(&sk.q) {
            q = sk.q;
        }
    }
    let (s2, exit2) = ctx.solve_stage(q, "exact", &mut trace)?;
    let (best, exit) = if s2.res <= s.res { (s2, exit2) } else { (s, exit) };
    let status = status_of(exit, &best.q);
    let m = best.prof.m_bar;
    let mut r = report(sigma, best, status, m, trace);
    r.flags.notes.push(format!("homotopy with {} approximants", kind_name(kind)));
    Ok(r)
}

fn kind_name(k: SmoothingKind) -> &'static str {
    match k {
        SmoothingKind::Bump => "bump",
        SmoothingKind::LogCusp => "log_cusp",
        SmoothingKind::SqrtCusp => "sqrt_cusp",
    }
}

/// Whether every kernel is strictly concave and either all satisfy the
/// derivative blow-up condition at 0 or all are `C¹`.
pub fn minimax_preconditions(p: &Problem) -> bool {
    let ks = p.kernels();
    ks.iter().all(|k| k.class().strictly_concave)
        && (ks.iter().all(|k| k.class().cond_inf_prime) || ks.iter().all(|k| k.class().c1))
}

/// Checks `m̄(w ± h·e_i) ≥ m̄(w) − tol` for every coordinate direction that
/// stays inside the simplex.
fn certify(p: &Problem, sigma: &Permutation, w: &NodeSystem, m_bar: f64, opts: &SolveOptions) -> Result<bool> {
    for i in 0..p.n() {
        for sgn in [-1.0, 1.0] {
            let mut v = w.as_slice().to_vec();
            v[i] += sgn * opts.probe_h;
            if !(v[i] > 0.0 && v[i] < TAU) {
                continue;
            }
            let y = NodeSystem::new(v);
            if !is_interior(&positions(&y, sigma)) {
                continue;
            }
            let m = profile_with(p, &y, sigma, &opts.eval)?.m_bar;
            if m < m_bar - opts.probe_tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// `M(S_σ) = inf_{y∈S_σ} m̄(y)`.
///
/// Under the hypotheses of [`minimax_preconditions`] the minimizer is the
/// equioscillation point; it is computed that way and then probed for local
/// minimality. Otherwise, or if the probe fails, a perturbation descent from
/// several starts is used and the report carries the corresponding flags.
pub fn minimax(p: &Problem, sigma: &Permutation, opts: &SolveOptions) -> Result<SolveReport> {
    check_dims(p, sigma)?;
    opts.validate()?;
    let pre = minimax_preconditions(p);
    if pre {
        let mut r = solve_equioscillation(p, sigma, opts)?;
        r.flags.preconditions = Some(true);
        if r.converged() {
            let ok = certify(p, sigma, &r.nodes, r.profile.m_bar, opts)?;
            r.flags.certified = Some(ok);
            if ok {
                r.objective = r.profile.m_bar;
                return Ok(r);
            }
            r.flags.notes.push("equioscillation point is not a local minimum".into());
        }
        let mut d = descend_multistart(p, sigma, opts, Some(&r))?;
        d.flags.preconditions = Some(true);
        d.flags.certified = Some(false);
        d.flags.notes.splice(0..0, r.flags.notes);
        return Ok(d);
    }
    let mut d = descend_multistart(p, sigma, opts, None)?;
    d.flags.preconditions = Some(false);
    d.flags.notes.insert(0, "kernels do not meet the minimax hypotheses; value is a descent estimate".into());
    Ok(d)
}

fn descend_multistart(p: &Problem, sigma: &Permutation, opts: &SolveOptions, prior: Option<&SolveReport>) -> Result<SolveReport> {
    let n = sigma.n();
    let mut starts = vec![positions(&NodeSystem::equidistant(sigma), sigma)];
    if let Some(r) = prior {
        let q = positions(&r.nodes, sigma);
        if is_interior(&q) {
            starts.push(q);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    starts.extend((0..opts.multistart).map(|_| random_positions(&mut rng, n)));
    let results: Vec<Result<SolveReport>> = starts.into_par_iter().map(|q| descend(p, sigma, q, opts)).collect();
    let mut best: Option<SolveReport> = None;
    for r in results {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.objective < b.objective) {
            best = Some(r);
        }
    }
    let mut best = best.expect("at least one start");
    best.flags.notes.push(format!("perturbation descent from {} starts", 2 + opts.multistart));
    Ok(best)
}

/// Minimizes `m̄` by moving along perturbation directions that lower every
/// ε-active arc maximum.
fn descend(p: &Problem, sigma: &Permutation, q0: Vec<f64>, opts: &SolveOptions) -> Result<SolveReport> {
    let ctx = Ctx { p, sigma, opts };
    let n = sigma.n();
    let mut s = ctx.state(q0)?;
    let mut eps = 1e-2 * (1.0 + s.prof.m_bar.abs());
    let mut trace = Vec::new();
    let iters = opts.max_iter * 10;
    let mut it = 0;
    while it < iters && eps > 1e-13 {
        it += 1;
        let active: Vec<usize> = (0..=n).filter(|&j| s.prof.arcs[j].m >= s.prof.m_bar - eps).collect();
        let y = ctx.nodes(&s.q);
        let dir = match descent_direction_from(p, &y, &s.prof, &active, &[]) {
            Ok(a) => a,
            Err(_) => {
                eps *= 0.1;
                continue;
            }
        };
        // direction in σ-ordered coordinates
        let dq: Vec<f64> = (1..=n).map(|k| dir[sigma.at(k) - 1]).collect();
        let mut h = 0.25 * min_gap(&s.q);
        let mut moved = false;
        while h > 1e-15 {
            let q: Vec<f64> = s.q.iter().zip(&dq).map(|(a, b)| a + h * b).collect();
            if is_interior(&q) {
                let t = ctx.state(q)?;
                if t.prof.m_bar < s.prof.m_bar {
                    s = t;
                    moved = true;
                    break;
                }
            }
            h *= 0.5;
        }
        trace.push(TraceEntry { stage: "descent".into(), iter: it, residual: s.res, step: h });
        if !moved {
            eps *= 0.1;
        }
    }
    // polish with Newton when the point is close to equioscillating
    let polished = if s.prof.spread() < 1e-4 * (1.0 + s.prof.m_bar.abs()) {
        let (t, exit) = ctx.newton(ctx.state(s.q.clone())?, "polish", &mut trace)?;
        (exit == Exit::Converged && t.prof.m_bar <= s.prof.m_bar + opts.probe_tol).then_some(t)
    } else {
        None
    };
    let (s, status) = match polished {
        Some(t) => (t, Status::Converged),
        None => {
            let st = if min_gap(&s.q) < 1e-9 {
                Status::BoundarySuspected
            } else if s.res <= opts.tol_residual {
                Status::Converged
            } else {
                Status::MaxIter
            };
            (s, st)
        }
    };
    let m = s.prof.m_bar;
    Ok(report(sigma, s, status, m, trace))
}

/// One row of the per-simplex table of a global sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimplexEntry {
    pub sigma: Permutation,
    #[serde(serialize_with = "ser_f64")]
    pub objective: f64,
    pub status: Status,
    /// Set when this simplex carries the same kernel sequence as an earlier one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub same_as: Option<Permutation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalReport {
    pub best: SolveReport,
    pub table: Vec<SimplexEntry>,
}

/// `M = min_σ M(S_σ)` by a sweep over all simplices.
pub fn minimax_global(p: &Problem, opts: &SolveOptions) -> Result<GlobalReport> {
    let n = p.n();
    if n > opts.sigma_cap {
        return Err(Error::TooLarge(format!(
            "n = {n} exceeds the permutation sweep cap {}; pass explicit permutations instead",
            opts.sigma_cap
        )));
    }
    let all = Permutation::all(n);
    let specs = p.specs();
    let key = |s: &Permutation| -> String {
        (1..=n).map(|k| serde_json::to_string(&specs[s.at(k)]).unwrap_or_default()).collect::<Vec<_>>().join("|")
    };
    let mut reps: Vec<(String, Permutation)> = Vec::new();
    let mut same_as: Vec<Option<Permutation>> = Vec::with_capacity(all.len());
    for s in &all {
        let k = key(s);
        match reps.iter().find(|(rk, _)| *rk == k) {
            Some((_, r)) => same_as.push(Some(r.clone())),
            None => {
                reps.push((k, s.clone()));
                same_as.push(None);
            }
        }
    }
    let solved: Vec<Result<SolveReport>> = reps.par_iter().map(|(_, s)| minimax(p, s, opts)).collect();
    let solved: Vec<SolveReport> = solved.into_iter().collect::<Result<_>>()?;
    let lookup = |s: &Permutation| solved.iter().find(|r| &r.simplex == s).expect("representative solved");
    let table = all
        .iter()
        .zip(&same_as)
        .map(|(s, sa)| {
            let r = lookup(sa.as_ref().unwrap_or(s));
            SimplexEntry { sigma: s.clone(), objective: r.objective, status: r.status, same_as: sa.clone() }
        })
        .collect();
    let best = solved
        .iter()
        .fold(None::<&SolveReport>, |b, r| match b {
            Some(b) if b.objective <= r.objective => Some(b),
            _ => Some(r),
        })
        .expect("n! ≥ 1")
        .clone();
    Ok(GlobalReport { best, table })
}

/// Minimum-norm point of the convex hull of the rows of `g`.
fn min_norm_hull(g: &[Vec<f64>]) -> Vec<f64> {
    let k = g.len();
    let dim = g[0].len();
    let combine = |lam: &[f64], idx: &[usize]| -> Vec<f64> {
        let mut v = vec![0.0; dim];
        for (l, &i) in lam.iter().zip(idx) {
            for (vv, gg) in v.iter_mut().zip(&g[i]) {
                *vv += l * gg;
            }
        }
        v
    };
    let norm2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let mut best = g[0].clone();
    let mut best_n = norm2(&best);
    if k > 14 {
        // Frank–Wolfe for large active sets
        let mut lam = vec![1.0 / k as f64; k];
        let idx: Vec<usize> = (0..k).collect();
        for it in 0..2000 {
            let x = combine(&lam, &idx);
            let (i, _) = g
                .iter()
                .enumerate()
                .map(|(i, gi)| (i, gi.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()))
                .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            let step = 2.0 / (it as f64 + 2.0);
            for (j, l) in lam.iter_mut().enumerate() {
                *l = (1.0 - step) * *l + if j == i { step } else { 0.0 };
            }
        }
        return combine(&lam, &idx);
    }
    for mask in 1u32..(1 << k) {
        let idx: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let m = idx.len();
        if m == 1 {
            continue;
        }
        let mut a = DMatrix::zeros(m + 1, m + 1);
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                a[(r, c)] = g[i].iter().zip(&g[j]).map(|(x, y)| x * y).sum::<f64>();
            }
            a[(r, m)] = 1.0;
            a[(m, r)] = 1.0;
        }
        let mut rhs = DVector::zeros(m + 1);
        rhs[m] = 1.0;
        let Some(sol) = a.lu().solve(&rhs) else { continue };
        let lam: Vec<f64> = sol.iter().take(m).copied().collect();
        if lam.iter().any(|l| *l < -1e-12 || !l.is_finite()) {
            continue;
        }
        let v = combine(&lam, &idx);
        let nv = norm2(&v);
        if nv < best_n {
            best = v;
            best_n = nv;
        }
    }
    for gi in g {
        let nv = norm2(gi);
        if nv < best_n {
            best = gi.clone();
            best_n = nv;
        }
    }
    best
}

/// `m(S_σ) = sup_{y∈S_σ} m̲(y)` by ε-supergradient ascent.
///
/// The ascent direction is the minimum-norm point of the convex hull of the
/// ε-active rows of the Jacobian of the arc maxima. Once all arcs are nearly
/// equal the point is polished by Newton on `Δ_σ`.
pub fn maximin(p: &Problem, sigma: &Permutation, opts: &SolveOptions) -> Result<SolveReport> {
    check_dims(p, sigma)?;
    opts.validate()?;
    let n = sigma.n();
    let ctx = Ctx { p, sigma, opts };
    let mut s = ctx.state(start_positions(p, sigma, opts)?)?;
    let mut trace = Vec::new();
    if n == 0 {
        let m = s.prof.m_under;
        return Ok(report(sigma, s, Status::Converged, m, trace));
    }
    let scale = 1.0 + s.prof.m_under.abs();
    let mut eps = 1e-2 * scale;
    let mut it = 0;
    let iters = opts.max_iter * 10;
    while it < iters && eps > 1e-14 * scale {
        it += 1;
        let y = ctx.nodes(&s.q);
        let jm = jacobian_m_from(p, &y, &s.prof, Slopes::Support)?;
        let active: Vec<usize> = (0..=n).filter(|&j| s.prof.arcs[j].m <= s.prof.m_under + eps).collect();
        let rows: Vec<Vec<f64>> = active
            .iter()
            .map(|&j| (1..=n).map(|k| jm[(j, sigma.at(k) - 1)]).collect())
            .collect();
        let d = min_norm_hull(&rows);
        let dn = inf_norm(&d);
        if !(dn > 1e-12) {
            eps *= 0.1;
            continue;
        }
        let d2: f64 = d.iter().map(|x| x * x).sum();
        let mut h = (0.25 * min_gap(&s.q) / dn).min(1.0);
        let mut moved = false;
        while h * dn > 1e-15 {
            let q: Vec<f64> = s.q.iter().zip(&d).map(|(a, b)| a + h * b).collect();
            if is_interior(&q) {
                let t = ctx.state(q)?;
                if t.prof.m_under >= s.prof.m_under + 1e-4 * h * d2 {
                    s = t;
                    moved = true;
                    break;
                }
            }
            h *= 0.5;
        }
        trace.push(TraceEntry { stage: "ascent".into(), iter: it, residual: s.res, step: h });
        if !moved {
            eps *= 0.1;
        }
        if s.prof.spread() < 1e-6 * scale {
            let (t, exit) = ctx.newton(ctx.state(s.q.clone())?, "polish", &mut trace)?;
            if exit == Exit::Converged && t.prof.m_under >= s.prof.m_under - 1e-12 * scale {
                let m = t.prof.m_under;
                return Ok(report(sigma, t, Status::Converged, m, trace));
            }
        }
    }
    let status = if min_gap(&s.q) < 1e-9 {
        Status::BoundarySuspected
    } else if eps <= 1e-14 * scale {
        // no ascent direction at any ε: a maximizer of m̲ up to tolerance
        Status::Converged
    } else {
        Status::MaxIter
    };
    let m = s.prof.m_under;
    let mut r = report(sigma, s, status, m, trace);
    if r.residual > opts.tol_residual {
        r.flags.notes.push("maximin point does not equioscillate".into());
    }
    Ok(r)
}

/// A linear constraint `x · a = 0` on the direction.
pub type Frozen = Vec<f64>;

/// Direction `a` (natural node order, `‖a‖∞ = 1`) that strictly lowers every
/// active arc maximum to first order: `Σ_r a_r μ_ir > 0` with
/// `μ_ir` a supporting slope of `K_r` at `z_i − y_r`, and `x · a = 0` for
/// every frozen constraint `x`.
pub fn descent_direction(
    p: &Problem,
    y: &NodeSystem,
    sigma: &Permutation,
    active: &[usize],
    frozen: &[Frozen],
) -> Result<Vec<f64>> {
    let prof = crate::evaluator::profile(p, y, sigma)?;
    descent_direction_from(p, y, &prof, active, frozen)
}

fn descent_direction_from(
    p: &Problem,
    y: &NodeSystem,
    prof: &ArcProfile,
    active: &[usize],
    frozen: &[Frozen],
) -> Result<Vec<f64>> {
    let n = p.n();
    if active.is_empty() {
        return Err(Error::InvalidInput("active set is empty".into()));
    }
    if let Some(&j) = active.iter().find(|&&j| j > n) {
        return Err(Error::InvalidInput(format!("arc index {j} out of range")));
    }
    if frozen.iter().any(|x| x.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: frozen.iter().map(Vec::len).find(|&l| l != n).unwrap() });
    }
    if active.len() + frozen.len() > n {
        return Err(Error::Infeasible(format!(
            "{} active arcs and {} constraints leave no room in dimension {n}",
            active.len(),
            frozen.len()
        )));
    }
    // μ_ir = supporting slope of K_r at z_i − y_r
    let jm = jacobian_m_from(p, y, prof, Slopes::Support)?;
    let rows = active.len() + frozen.len();
    let mut a = DMatrix::zeros(rows, n);
    let mut b = DVector::zeros(rows);
    for (r, &i) in active.iter().enumerate() {
        for c in 0..n {
            a[(r, c)] = -jm[(i, c)];
        }
        b[r] = 1.0;
    }
    for (r, x) in frozen.iter().enumerate() {
        for c in 0..n {
            a[(active.len() + r, c)] = x[c];
        }
    }
    let ok = |v: &[f64]| -> bool {
        let g: Vec<f64> = (0..active.len()).map(|r| (0..n).map(|c| a[(r, c)] * v[c]).sum()).collect();
        let f: Vec<f64> = (active.len()..rows).map(|r| (0..n).map(|c| a[(r, c)] * v[c]).sum()).collect();
        g.iter().all(|x| *x > 0.0) && f.iter().all(|x| x.abs() <= 1e-12)
    };
    if a.iter().all(|v| v.is_finite()) {
        if let Ok(pinv) = a.clone().pseudo_inverse(1e-12) {
            let sol: Vec<f64> = (pinv * &b).iter().copied().collect();
            let scale = inf_norm(&sol);
            if scale > 0.0 && scale.is_finite() {
                let sol: Vec<f64> = sol.iter().map(|v| v / scale).collect();
                if ok(&sol) {
                    return Ok(sol);
                }
            }
        }
    }
    if n <= 4 {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for code in 0..3usize.pow(n as u32) {
            let v: Vec<f64> = (0..n).map(|i| ((code / 3usize.pow(i as u32)) % 3) as f64 - 1.0).collect();
            if v.iter().all(|x| *x == 0.0) || !ok(&v) {
                continue;
            }
            let worst = (0..active.len())
                .map(|r| (0..n).map(|c| a[(r, c)] * v[c]).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            if best.as_ref().is_none_or(|(w, _)| worst > *w) {
                best = Some((worst, v));
            }
        }
        if let Some((_, v)) = best {
            return Ok(v);
        }
    }
    Err(Error::Infeasible("no direction lowers every active arc".into()))
}

/// Moves `y_j` down by `b·h` and `y_k` up by `a·h`, where `a = 1/r_k` and
/// `b = 1/r_j` when both kernels are weights of a common base and `a = b = 1`
/// otherwise.
pub fn pull_apart(p: &Problem, y: &NodeSystem, j: usize, k: usize, h: f64) -> Result<NodeSystem> {
    p.check_nodes(y)?;
    let n = p.n();
    if j == 0 || k == 0 || j > n || k > n || j == k {
        return Err(Error::InvalidInput(format!("pull_apart needs two distinct free nodes, got {j} and {k}")));
    }
    if !(h >= 0.0) {
        return Err(Error::InvalidInput(format!("step must be non-negative, got {h}")));
    }
    let (yj, yk) = (y.get(j), y.get(k));
    if yj > yk {
        return Err(Error::InvalidInput(format!("expected y_{j} ≤ y_{k}")));
    }
    let (bj, rj) = p.kernel(j).spec().base_and_weight();
    let (bk, rk) = p.kernel(k).spec().base_and_weight();
    let (a, b) = if bj == bk { (1.0 / rk, 1.0 / rj) } else { (1.0, 1.0) };
    let bound = (yj / b).min((TAU - yk) / a);
    if h > 0.0 && h >= bound {
        return Err(Error::StepTooLarge(format!("h = {h} must stay below {bound}")));
    }
    let mut v = y.as_slice().to_vec();
    v[j - 1] = yj - b * h;
    v[k - 1] = yk + a * h;
    Ok(NodeSystem::new(v))
}
