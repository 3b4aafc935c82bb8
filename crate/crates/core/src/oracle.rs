//! Brute-force estimates and property checks used to validate the solvers.
//!
//! Everything here evaluates kernels directly and finds arc maxima with its
//! own golden-section search, so a bug in the evaluator cannot hide itself.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::evaluator::{profile, ArcProfile, Problem};
use crate::ext::{ser_f64, ser_f64_vec};
use crate::kernels::{approximant, SmoothingKind};
use crate::torus::{sort_nodes, NodeSystem, Permutation};

/// Default seed recorded in sampling reports.
pub const DEFAULT_SEED: u64 = 20_240_601;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn f_at(p: &Problem, full: &[f64], t: f64) -> f64 {
    p.kernels().iter().zip(full).map(|(k, &y)| k.value(t - y)).sum()
}

/// Maximum of `f` on `[a, b]` by golden-section search; `−∞` endpoints are
/// pulled inward first.
pub fn golden_max(f: impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    if b - a <= 1e-12 {
        return (a, f(a));
    }
    let (mut lo, mut hi) = (a, b);
    let mut step = (b - a) * 1e-9;
    while !f(lo).is_finite() && step < (hi - lo) / 2.0 {
        lo = a + step;
        step *= 4.0;
    }
    let mut step = (b - a) * 1e-9;
    while !f(hi).is_finite() && step < (hi - lo) / 2.0 {
        hi = b - step;
        step *= 4.0;
    }
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-13 * (1.0 + hi.abs()) {
            break;
        }
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
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    for e in [a, b] {
        let fe = f(e);
        if fe > best.1 {
            best = (e, fe);
        }
    }
    best
}

/// σ-ordered positions including both ends, computed independently of the
/// torus module. Points of the closure are accepted.
fn oracle_positions(y: &[f64], sigma: &Permutation) -> Option<Vec<f64>> {
    let n = sigma.n();
    let mut pos = vec![0.0];
    for k in 1..=n {
        let mut v = y[sigma.at(k) - 1].rem_euclid(TAU);
        let prev = *pos.last().unwrap();
        if v < prev {
            if v <= 1e-12 {
                v = TAU;
            } else if prev - v <= 1e-12 {
                v = prev;
            } else {
                return None;
            }
        }
        pos.push(v);
    }
    pos.push(TAU);
    Some(pos)
}

/// Arc maxima `(m_0..m_n)` indexed by kernel, via golden-section search.
pub fn oracle_arc_maxima(p: &Problem, y: &[f64], sigma: &Permutation) -> Option<Vec<f64>> {
    let pos = oracle_positions(y, sigma)?;
    let full: Vec<f64> = std::iter::once(0.0).chain(y.iter().copied()).collect();
    let mut m = vec![0.0; sigma.n() + 1];
    for k in 0..=sigma.n() {
        m[sigma.at(k)] = golden_max(|t| f_at(p, &full, t), pos[k], pos[k + 1]).1;
    }
    Some(m)
}

fn oracle_m_bar(p: &Problem, y: &[f64], sigma: &Permutation) -> f64 {
    oracle_arc_maxima(p, y, sigma).map_or(f64::NAN, |m| m.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// `sup_t F(y,t)` from a uniform grid refined in the best cell.
pub fn grid_sup(p: &Problem, y: &NodeSystem, resolution: usize) -> Result<f64> {
    p.check_nodes(y)?;
    if resolution < 10 * (p.n() + 1) {
        return Err(Error::InvalidInput(format!("resolution must be at least {}", 10 * (p.n() + 1))));
    }
    let full = y.full();
    let h = TAU / resolution as f64;
    let (i, v) = (0..resolution)
        .into_par_iter()
        .map(|i| (i, f_at(p, &full, i as f64 * h)))
        .reduce(|| (usize::MAX, f64::NEG_INFINITY), |a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a });
    if i == usize::MAX {
        return Ok(f64::NEG_INFINITY);
    }
    let c = i as f64 * h;
    let (_, r) = golden_max(|t| f_at(p, &full, t), c - h, c + h);
    Ok(v.max(r))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridMinimax {
    pub sigma: Permutation,
    /// Best `m̄` found; an upper bound on `M(S_σ)` up to arc-max rounding.
    #[serde(serialize_with = "ser_f64")]
    pub estimate: f64,
    pub nodes: NodeSystem,
    /// Grid value before refinement.
    #[serde(serialize_with = "ser_f64")]
    pub grid_value: f64,
    /// Largest change of `m̄` over the final pattern of neighbours.
    pub tolerance: f64,
    pub evaluated: usize,
}

/// Interior ordered grid `0 < y_σ(1) < … < y_σ(n) < 2π` with spacing `2π/R`,
/// followed by a shrinking pattern search over the `3ⁿ` neighbours.
pub fn grid_minimax(p: &Problem, sigma: &Permutation, node_resolution: usize) -> Result<GridMinimax> {
    let n = p.n();
    if sigma.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: sigma.n() });
    }
    if n > 3 {
        return Err(Error::TooLarge(format!("grid_minimax supports n ≤ 3, got {n}")));
    }
    if node_resolution <= n {
        return Err(Error::InvalidInput("node resolution too small".into()));
    }
    let r = node_resolution;
    let h0 = TAU / r as f64;
    let to_y = |q: &[f64]| -> Vec<f64> {
        let mut y = vec![0.0; n];
        for (k, &v) in q.iter().enumerate() {
            y[sigma.at(k + 1) - 1] = v;
        }
        y
    };
    let eval = |q: &[f64]| oracle_m_bar(p, &to_y(q), sigma);

    // All strictly increasing index tuples in 1..r, split over the first index.
    let firsts: Vec<usize> = if n == 0 { vec![0] } else { (1..r).collect() };
    let (best_idx, best_val, count) = firsts
        .into_par_iter()
        .map(|i1| {
            let mut best: (Vec<usize>, f64) = (Vec::new(), f64::INFINITY);
            let mut count = 0usize;
            let mut idx = Vec::with_capacity(n);
            if n > 0 {
                idx.push(i1);
            }
            fn rec(
                idx: &mut Vec<usize>,
                n: usize,
                r: usize,
                h0: f64,
                eval: &dyn Fn(&[f64]) -> f64,
                best: &mut (Vec<usize>, f64),
                count: &mut usize,
            ) {
                if idx.len() == n {
                    let q: Vec<f64> = idx.iter().map(|&i| i as f64 * h0).collect();
                    let v = eval(&q);
                    *count += 1;
                    if v < best.1 {
                        *best = (idx.clone(), v);
                    }
                    return;
                }
                let start = idx.last().map_or(1, |&l| l + 1);
                for i in start..r {
                    idx.push(i);
                    rec(idx, n, r, h0, eval, best, count);
                    idx.pop();
                }
            }
            rec(&mut idx, n, r, h0, &eval, &mut best, &mut count);
            (best.0, best.1, count)
        })
        .reduce(
            || (Vec::new(), f64::INFINITY, 0),
            |a, b| {
                let cnt = a.2 + b.2;
                // lowest value, ties to the lexicographically smallest cell
                if b.1 < a.1 || (b.1 == a.1 && !b.0.is_empty() && (a.0.is_empty() || b.0 < a.0)) {
                    (b.0, b.1, cnt)
                } else {
                    (a.0, a.1, cnt)
                }
            },
        );
    let mut q: Vec<f64> = best_idx.iter().map(|&i| i as f64 * h0).collect();
    let grid_value = best_val;
    let mut val = best_val;
    let mut evaluated = count;
    let eval_m = |q: &[f64]| oracle_arc_maxima(p, &to_y(q), sigma);

    let mut tolerance = pattern_search(&eval, &mut q, &mut val, h0, &mut evaluated);
    // Pattern search stalls on ridges where several arc maxima tie, so
    // alternate it with finite-difference equalization steps.
    for _ in 0..50 {
        if n == 0 || !equalize(&eval_m, &mut q, &mut val, &mut evaluated) {
            break;
        }
        tolerance = pattern_search(&eval, &mut q, &mut val, 1e-6, &mut evaluated);
    }
    Ok(GridMinimax {
        sigma: sigma.clone(),
        estimate: val,
        nodes: NodeSystem::new(to_y(&q)),
        grid_value,
        tolerance,
        evaluated,
    })
}

fn in_closure(q: &[f64]) -> bool {
    let mut prev = 0.0;
    for &v in q {
        if v < prev {
            return false;
        }
        prev = v;
    }
    prev <= TAU
}

/// Shrinking pattern search over the `3ⁿ − 1` neighbours down to step
/// `1e−10`; returns the largest change of the objective over the final pattern.
fn pattern_search(eval: &(dyn Fn(&[f64]) -> f64 + Sync), q: &mut Vec<f64>, val: &mut f64, h0: f64, evaluated: &mut usize) -> f64 {
    let n = q.len();
    let dirs: Vec<Vec<f64>> = (0..3usize.pow(n as u32))
        .map(|c| (0..n).map(|i| ((c / 3usize.pow(i as u32)) % 3) as f64 - 1.0).collect::<Vec<f64>>())
        .filter(|d| d.iter().any(|x| *x != 0.0))
        .collect();
    let mut h = h0;
    let mut tolerance = 0.0;
    while n > 0 && h >= 1e-10 {
        let cands: Vec<(Vec<f64>, f64)> = dirs
            .par_iter()
            .filter_map(|d| {
                let c: Vec<f64> = q.iter().zip(d).map(|(a, b)| a + h * b).collect();
                in_closure(&c).then(|| {
                    let v = eval(&c);
                    (c, v)
                })
            })
            .collect();
        *evaluated += cands.len();
        let best = cands.iter().filter(|c| !c.1.is_nan()).fold(None::<&(Vec<f64>, f64)>, |b, c| match b {
            Some(b) if b.1 <= c.1 => Some(b),
            _ => Some(c),
        });
        match best {
            Some((c, v)) if *v < *val => {
                *q = c.clone();
                *val = *v;
            }
            _ => {
                tolerance = cands.iter().map(|c| (c.1 - *val).abs()).filter(|v| v.is_finite()).fold(0.0, f64::max);
                h *= 0.5;
            }
        }
    }
    tolerance
}

/// One step towards equal arc maxima using central-difference gradients of
/// the golden-section maxima; accepted only if `m̄` strictly decreases.
fn equalize(
    eval_m: &(dyn Fn(&[f64]) -> Option<Vec<f64>> + Sync),
    q: &mut Vec<f64>,
    val: &mut f64,
    evaluated: &mut usize,
) -> bool {
    const H: f64 = 1e-6;
    let n = q.len();
    let Some(m) = eval_m(q) else { return false };
    if m.iter().any(|v| !v.is_finite()) {
        return false;
    }
    // unknowns (d, t) with m_j + Σ_i G_ji d_i = t on every arc
    let mut a = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        let shifted = |s: f64| {
            let mut c = q.clone();
            c[i] += s;
            eval_m(&c)
        };
        let (Some(mp), Some(mm)) = (shifted(H), shifted(-H)) else { return false };
        *evaluated += 2;
        for j in 0..=n {
            a[(j, i)] = (mp[j] - mm[j]) / (2.0 * H);
        }
    }
    for j in 0..=n {
        a[(j, n)] = -1.0;
    }
    let rhs = -nalgebra::DVector::from_vec(m);
    let Some(sol) = a.lu().solve(&rhs) else { return false };
    let mut step = 1.0;
    while step > 1e-6 {
        let c: Vec<f64> = q.iter().enumerate().map(|(i, v)| v + step * sol[i]).collect();
        if in_closure(&c) {
            *evaluated += 1;
            if let Some(mc) = eval_m(&c) {
                let v = mc.into_iter().fold(f64::NEG_INFINITY, f64::max);
                if v < *val {
                    *q = c;
                    *val = v;
                    return true;
                }
            }
        }
        step *= 0.5;
    }
    false
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// `m̲(x) > M`.
    Lower,
    /// `m̄(y) < M`.
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: Bound,
    pub point: NodeSystem,
    #[serde(serialize_with = "ser_f64")]
    pub value: f64,
    pub margin: f64,
}

/// Two points with `m̲(x) > m̄(y)`; no single value can separate them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairWitness {
    pub x: NodeSystem,
    pub y: NodeSystem,
    pub m_under_x: f64,
    pub m_bar_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub sigma: Permutation,
    pub seed: u64,
    pub samples: usize,
    #[serde(serialize_with = "ser_f64")]
    pub m_estimate: f64,
    pub tol: f64,
    #[serde(serialize_with = "ser_f64")]
    pub max_m_under: f64,
    #[serde(serialize_with = "ser_f64")]
    pub min_m_bar: f64,
    pub violations: Vec<Violation>,
    pub pair_witness: Option<PairWitness>,
}

impl SandwichReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty() && self.pair_witness.is_none()
    }
}

/// Random interior node system of `S_σ`.
pub fn random_interior(rng: &mut ChaCha8Rng, sigma: &Permutation) -> NodeSystem {
    loop {
        let mut q: Vec<f64> = (0..sigma.n()).map(|_| rng.random::<f64>() * TAU).collect();
        q.sort_by(f64::total_cmp);
        if q.first().is_none_or(|&v| v > 0.0) && q.windows(2).all(|w| w[1] > w[0]) {
            return NodeSystem::from_positions(sigma, &q);
        }
    }
}

/// Checks `m̲(x) ≤ M ≤ m̄(y)` on random interior samples plus `extra` points
/// (which may lie in the closure of `S_σ`).
pub fn check_sandwich(
    p: &Problem,
    sigma: &Permutation,
    m_estimate: f64,
    samples: usize,
    seed: u64,
    extra: &[NodeSystem],
    tol: f64,
) -> Result<SandwichReport> {
    if sigma.n() != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), got: sigma.n() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts: Vec<NodeSystem> = (0..samples).map(|_| random_interior(&mut rng, sigma)).collect();
    pts.extend(extra.iter().cloned());
    let vals: Vec<Option<(f64, f64)>> = pts
        .par_iter()
        .map(|y| {
            let m = oracle_arc_maxima(p, y.as_slice(), sigma)?;
            let lo = m.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Some((lo, hi))
        })
        .collect();
    let mut violations = Vec::new();
    let (mut ix, mut iy) = (None, None);
    let (mut max_lo, mut min_hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (i, v) in vals.iter().enumerate() {
        let Some((lo, hi)) = *v else {
            return Err(Error::IncompatibleSimplex { sigma: sigma.to_string(), reason: format!("sample {i}") });
        };
        if lo > m_estimate + tol {
            violations.push(Violation { kind: Bound::Lower, point: pts[i].clone(), value: lo, margin: lo - m_estimate });
        }
        if hi < m_estimate - tol {
            violations.push(Violation { kind: Bound::Upper, point: pts[i].clone(), value: hi, margin: m_estimate - hi });
        }
        if lo > max_lo {
            max_lo = lo;
            ix = Some(i);
        }
        if hi < min_hi {
            min_hi = hi;
            iy = Some(i);
        }
    }
    let pair_witness = match (ix, iy) {
        (Some(i), Some(j)) if max_lo > min_hi + tol => Some(PairWitness {
            x: pts[i].clone(),
            y: pts[j].clone(),
            m_under_x: max_lo,
            m_bar_y: min_hi,
        }),
        _ => None,
    };
    Ok(SandwichReport {
        sigma: sigma.clone(),
        seed,
        samples: pts.len(),
        m_estimate,
        tol,
        max_m_under: max_lo,
        min_m_bar: min_hi,
        violations,
        pair_witness,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Majorization {
    /// `m_j(x) > m_j(y)` for every arc.
    Strict,
    /// `m_j(x) ≥ m_j(y)` for every arc.
    Weak,
    None,
}

/// Whether `x` majorizes `y`, comparing arc maxima with tolerance `1e−12`.
pub fn check_majorization(x: &ArcProfile, y: &ArcProfile) -> Result<Majorization> {
    if x.sigma != y.sigma {
        return Err(Error::InvalidInput(format!("profiles use different permutations {} and {}", x.sigma, y.sigma)));
    }
    Ok(majorization(&x.m(), &y.m()))
}

pub fn majorization(mx: &[f64], my: &[f64]) -> Majorization {
    const TOL: f64 = 1e-12;
    if mx.iter().zip(my).all(|(a, b)| *a > *b + TOL) {
        Majorization::Strict
    } else if mx.iter().zip(my).all(|(a, b)| *a >= *b - TOL) {
        Majorization::Weak
    } else {
        Majorization::None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MMatrixReport {
    pub ok: bool,
    pub diagonal_positive: bool,
    pub off_diagonal_negative: bool,
    pub column_sums_positive: bool,
    #[serde(serialize_with = "ser_f64_vec")]
    pub column_sums: Vec<f64>,
    pub issues: Vec<String>,
}

/// Checks that `A = −J` has positive diagonal, negative off-diagonal and
/// positive column sums.
pub fn check_mmatrix(j: &DMatrix<f64>) -> MMatrixReport {
    let a = -j;
    let n = a.nrows();
    let mut issues = Vec::new();
    let (mut dpos, mut offneg, mut cpos) = (true, true, true);
    if a.ncols() != n {
        issues.push(format!("matrix is {}×{}, not square", n, a.ncols()));
        return MMatrixReport {
            ok: false,
            diagonal_positive: false,
            off_diagonal_negative: false,
            column_sums_positive: false,
            column_sums: vec![],
            issues,
        };
    }
    for r in 0..n {
        for c in 0..n {
            let v = a[(r, c)];
            if r == c && !(v > 0.0) {
                dpos = false;
                issues.push(format!("A[{r},{c}] = {v} is not positive"));
            } else if r != c && !(v < 0.0) {
                offneg = false;
                issues.push(format!("A[{r},{c}] = {v} is not negative"));
            }
        }
    }
    let column_sums: Vec<f64> = (0..n).map(|c| a.column(c).sum()).collect();
    for (c, s) in column_sums.iter().enumerate() {
        if !(*s > 0.0) {
            cpos = false;
            issues.push(format!("column {c} sums to {s}"));
        }
    }
    MMatrixReport {
        ok: dpos && offneg && cpos,
        diagonal_positive: dpos,
        off_diagonal_negative: offneg,
        column_sums_positive: cpos,
        column_sums,
        issues,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub level: u32,
    pub deviation: f64,
    /// A priori bound on the deviation, when one is known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub kind: SmoothingKind,
    #[serde(serialize_with = "ser_f64_vec")]
    pub base: Vec<f64>,
    pub rows: Vec<ProbeRow>,
}

impl ConvergenceTable {
    pub fn within_bounds(&self) -> bool {
        self.rows.iter().all(|r| r.bound.is_none_or(|b| r.deviation <= b + 1e-12))
    }

    pub fn non_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].deviation <= w[0].deviation + 1e-12)
    }
}

/// Sup-deviation of sorted arc-max vectors under approximants from the base.
pub fn convergence_probe(
    p: &Problem,
    kind: SmoothingKind,
    levels: &[u32],
    y: &NodeSystem,
    sigma: &Permutation,
) -> Result<ConvergenceTable> {
    let base = sort_nodes(&profile(p, y, sigma)?.m());
    let n1 = (p.n() + 1) as f64;
    let rows = levels
        .iter()
        .map(|&level| {
            let pk = p.map_specs(|s| approximant(s, level, kind))?;
            let mk = sort_nodes(&profile(&pk, y, sigma)?.m());
            let deviation = base
                .iter()
                .zip(&mk)
                .map(|(a, b)| if a == b { 0.0 } else { (a - b).abs() })
                .fold(0.0, f64::max);
            let bound = match kind {
                SmoothingKind::SqrtCusp => Some(n1 / level as f64),
                SmoothingKind::Bump => Some(n1 * PI / level as f64),
                SmoothingKind::LogCusp => None,
            };
            Ok(ProbeRow { level, deviation, bound })
        })
        .collect::<Result<_>>()?;
    Ok(ConvergenceTable { kind, base, rows })
}

/// Minimum over `x_1 < … < x_n` in `[a, b]` of `sup_x ∏|x − x_j|^{ν_j}`,
/// by an interval grid with spacing `step` and a shrinking pattern search.
/// Returns `(nodes, norm)`.
pub fn grid_bojanov(a: f64, b: f64, nu: &[f64], step: f64) -> Result<(Vec<f64>, f64)> {
    let n = nu.len();
    if n == 0 || n > 3 {
        return Err(Error::TooLarge(format!("grid_bojanov supports 1 ≤ n ≤ 3, got {n}")));
    }
    if !(a < b) || !(step > 0.0) {
        return Err(Error::InvalidInput("need a < b and a positive step".into()));
    }
    let log_norm = |x: &[f64]| -> f64 {
        let lp = |t: f64| nu.iter().zip(x).map(|(v, xj)| v * (t - xj).abs().ln()).sum::<f64>();
        let mut edges = vec![a];
        edges.extend_from_slice(x);
        edges.push(b);
        edges.windows(2).map(|w| golden_max(lp, w[0], w[1]).1).fold(f64::NEG_INFINITY, f64::max)
    };
    let cells = ((b - a) / step).round() as usize;
    let h0 = (b - a) / cells as f64;
    let firsts: Vec<usize> = (1..cells).collect();
    let (best_idx, _) = firsts
        .into_par_iter()
        .map(|i1| {
            let mut best = (vec![i1], f64::INFINITY);
            let mut idx = vec![i1];
            fn rec(idx: &mut Vec<usize>, n: usize, cells: usize, f: &dyn Fn(&[usize]) -> f64, best: &mut (Vec<usize>, f64)) {
                if idx.len() == n {
                    let v = f(idx);
                    if v < best.1 {
                        *best = (idx.clone(), v);
                    }
                    return;
                }
                for i in idx.last().unwrap() + 1..cells {
                    idx.push(i);
                    rec(idx, n, cells, f, best);
                    idx.pop();
                }
            }
            let f = |ix: &[usize]| log_norm(&ix.iter().map(|&i| a + i as f64 * h0).collect::<Vec<_>>());
            rec(&mut idx, n, cells, &f, &mut best);
            best
        })
        .reduce(|| (Vec::new(), f64::INFINITY), |x, y| if y.1 < x.1 || (y.1 == x.1 && y.0 < x.0) { y } else { x });
    let mut x: Vec<f64> = best_idx.iter().map(|&i| a + i as f64 * h0).collect();
    let mut val = log_norm(&x);
    let dirs: Vec<Vec<f64>> = (0..3usize.pow(n as u32))
        .map(|c| (0..n).map(|i| ((c / 3usize.pow(i as u32)) % 3) as f64 - 1.0).collect::<Vec<f64>>())
        .filter(|d| d.iter().any(|v| *v != 0.0))
        .collect();
    let mut h = h0;
    while h >= 1e-12 {
        let best = dirs
            .iter()
            .filter_map(|d| {
                let c: Vec<f64> = x.iter().zip(d).map(|(p, q)| p + h * q).collect();
                let ordered = c.windows(2).all(|w| w[0] < w[1]) && c[0] > a && c[n - 1] < b;
                ordered.then(|| (log_norm(&c), c))
            })
            .fold(None::<(f64, Vec<f64>)>, |acc, c| match acc {
                Some(acc) if acc.0 <= c.0 => Some(acc),
                _ => Some(c),
            });
        match best {
            Some((v, c)) if v < val => {
                x = c;
                val = v;
            }
            _ => h *= 0.5,
        }
    }
    Ok((x, val.exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn example() -> Problem {
        let q = KernelSpec::weighted(0.1, KernelSpec::Parabola);
        Problem::new(vec![KernelSpec::Tent, KernelSpec::Tent, q.clone(), q]).unwrap()
    }

    #[test]
    fn grid_sup_examples() {
        let e = NodeSystem::new(vec![PI, PI / 2.0, 1.5 * PI]);
        let v = grid_sup(&example(), &e, 100_000).unwrap();
        assert_abs_diff_eq!(v, PI + 0.15 * PI * PI, epsilon = 1e-8);
        let single = Problem::new(vec![KernelSpec::LogSine]).unwrap();
        assert_abs_diff_eq!(grid_sup(&single, &NodeSystem::new(vec![]), 100).unwrap(), 0.0, epsilon = 1e-12);
        let flat = Problem::new(vec![KernelSpec::Tent, KernelSpec::Tent]).unwrap();
        assert_abs_diff_eq!(grid_sup(&flat, &NodeSystem::new(vec![PI]), 100).unwrap(), PI, epsilon = 1e-12);
        assert!(grid_sup(&single, &NodeSystem::new(vec![]), 5).is_err());
    }

    #[test]
    fn grid_minimax_examples() {
        let p = Problem::new(vec![KernelSpec::LogSine; 3]).unwrap();
        let g = grid_minimax(&p, &Permutation::identity(2), 60).unwrap();
        assert_abs_diff_eq!(g.estimate, -2.0 * LN_2, epsilon = 1e-8);
        assert_abs_diff_eq!(g.nodes.get(1), TAU / 3.0, epsilon = 1e-4);
        assert_abs_diff_eq!(g.nodes.get(2), 2.0 * TAU / 3.0, epsilon = 1e-4);

        let pair = Problem::new(vec![KernelSpec::riesz(0.5); 2]).unwrap();
        let g = grid_minimax(&pair, &Permutation::identity(1), 37).unwrap();
        assert_abs_diff_eq!(g.nodes.get(1), PI, epsilon = 1e-6);

        let big = Problem::new(vec![KernelSpec::LogSine; 5]).unwrap();
        assert!(matches!(grid_minimax(&big, &Permutation::identity(4), 10), Err(Error::TooLarge(_))));
    }

    #[test]
    fn sandwich_examples() {
        let pair = Problem::new(vec![KernelSpec::LogSine; 2]).unwrap();
        let id = Permutation::identity(1);
        let r = check_sandwich(&pair, &id, -LN_2, 200, DEFAULT_SEED, &[], 1e-9).unwrap();
        assert!(r.holds());

        // two equioscillation-type points e and x break the sandwich
        let s2 = 2f64.sqrt();
        let e = NodeSystem::new(vec![PI, PI / 2.0, 1.5 * PI]);
        let x = NodeSystem::new(vec![PI + (3.0 - 2.0 * s2) * 0.1 * PI * PI, (2.0 * s2 - 2.0) * PI, 0.0]);
        let s = Permutation::new(vec![2, 1, 3]).unwrap();
        let r = check_sandwich(&example(), &s, 4.6, 50, DEFAULT_SEED, &[e, x], 1e-9).unwrap();
        let w = r.pair_witness.expect("witness");
        assert!(w.m_under_x > w.m_bar_y);
    }

    #[test]
    fn majorization_examples() {
        assert_eq!(majorization(&[1.0, 2.0], &[1.0, 2.0]), Majorization::Weak);
        assert_eq!(majorization(&[1.5, 2.5], &[1.0, 2.0]), Majorization::Strict);
        assert_eq!(majorization(&[0.5, 2.5], &[1.0, 2.0]), Majorization::None);
        let p = Problem::new(vec![KernelSpec::LogSine; 2]).unwrap();
        let a = profile(&p, &NodeSystem::new(vec![1.0]), &Permutation::identity(1)).unwrap();
        assert_eq!(check_majorization(&a, &a).unwrap(), Majorization::Weak);
    }

    #[test]
    fn mmatrix_examples() {
        let p = Problem::new(vec![KernelSpec::LogSine; 3]).unwrap();
        let id = Permutation::identity(2);
        let j = crate::evaluator::jacobian_delta(&p, &NodeSystem::equidistant(&id), &id).unwrap();
        assert!(check_mmatrix(&j).ok);
        // A = −J given directly
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, -1.0, 2.0]);
        let r = check_mmatrix(&-a);
        assert!(!r.ok && !r.off_diagonal_negative && r.diagonal_positive);
        assert!(check_mmatrix(&-DMatrix::from_element(1, 1, 3.0)).ok);
    }

    #[test]
    fn convergence_probe_examples() {
        let p = Problem::new(vec![KernelSpec::Tent; 3]).unwrap();
        let s = Permutation::identity(2);
        let y = NodeSystem::new(vec![1.5, 4.0]);
        let t = convergence_probe(&p, SmoothingKind::SqrtCusp, &[4, 16, 64], &y, &s).unwrap();
        assert!(t.within_bounds() && t.non_increasing());
        let t = convergence_probe(&p, SmoothingKind::Bump, &[10, 100, 1000, 10000], &y, &s).unwrap();
        assert!(t.within_bounds() && t.non_increasing());
        assert!(t.rows.last().unwrap().deviation < 1e-3);
    }

    #[test]
    fn grid_bojanov_chebyshev() {
        let (x, norm) = grid_bojanov(-1.0, 1.0, &[1.0, 1.0], 1e-2).unwrap();
        assert_abs_diff_eq!(norm, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(x[1], 0.5f64.sqrt(), epsilon = 1e-6);
    }

    proptest! {
        #[test]
        fn grid_sup_never_exceeds_m_bar(y in proptest::collection::vec(0.01..(TAU - 0.01), 2)) {
            let p = Problem::new(vec![KernelSpec::LogSine, KernelSpec::weighted(2.0, KernelSpec::Parabola), KernelSpec::Tent]).unwrap();
            let y = NodeSystem::new(y);
            if let crate::torus::SimplexLocation::Interior(s) = crate::torus::locate(&y) {
                let m = profile(&p, &y, &s).unwrap().m_bar;
                let g = grid_sup(&p, &y, 300).unwrap();
                prop_assert!(g <= m + 1e-9);
                prop_assert!(g >= m - 1e-6);
            }
        }
    }
}
