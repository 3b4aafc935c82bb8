//! Extremal generalized trigonometric polynomials on the torus and
//! generalized algebraic polynomials on an interval.
//!
//! `T(t) = ∏ |sin((t − w_j)/2)|^{r_j}` has `log T = F` for weighted
//! `log|sin(·/2)|` kernels, so the torus minimax value gives `‖T‖ = exp(M)`.
//! Mirroring nodes as `t ↦ 2π − t` turns pairs of factors into
//! `½|cos t − cos α|`, which carries the torus problem to an interval.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::evaluator::Problem;
use crate::kernels::{reduce, KernelSpec};
use crate::solver::{minimax, SolveOptions, SolveReport};
use crate::torus::Permutation;

/// Exponents `r_0..r_n` of a generalized trigonometric polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtpProblem {
    pub exponents: Vec<f64>,
}

/// Interval `[a, b]` and exponents `ν_1..ν_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BojanovProblem {
    pub a: f64,
    pub b: f64,
    pub exponents: Vec<f64>,
}

impl BojanovProblem {
    pub fn new(a: f64, b: f64, exponents: Vec<f64>) -> Result<Self> {
        let q = BojanovProblem { a, b, exponents };
        q.validate()?;
        Ok(q)
    }

    fn validate(&self) -> Result<()> {
        if !(self.a < self.b) || !self.a.is_finite() || !self.b.is_finite() {
            return Err(Error::InvalidInput(format!("need a < b, got [{}, {}]", self.a, self.b)));
        }
        validate_exponents(&self.exponents)
    }

    /// `L(x) = ((b−a)/2)·x + (b+a)/2`, mapping `[−1, 1]` onto `[a, b]`.
    pub fn affine(&self, x: f64) -> f64 {
        0.5 * (self.b - self.a) * x + 0.5 * (self.b + self.a)
    }

    pub fn total_exponent(&self) -> f64 {
        self.exponents.iter().sum()
    }
}

fn validate_exponents(r: &[f64]) -> Result<()> {
    if r.is_empty() {
        return Err(Error::InvalidInput("at least one exponent is required".into()));
    }
    if let Some(v) = r.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidInput(format!("exponents must be positive, got {v}")));
    }
    Ok(())
}

fn weighted_log_sine(r: f64) -> KernelSpec {
    KernelSpec::weighted(r, KernelSpec::LogSine)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GtpReport {
    pub report: SolveReport,
    /// `w_0 = 0 < w_1 < … < w_n`.
    pub w: Vec<f64>,
    /// Maximizer of `|T|` on each arc `[w_j, w_{j+1}]`.
    pub z: Vec<f64>,
    pub norm: f64,
    pub interlacing: bool,
}

/// Minimizes `‖T‖` over `0 = w_0 < w_1 < … < w_n < 2π`.
pub fn solve_gtp(q: &GtpProblem, opts: &SolveOptions) -> Result<GtpReport> {
    validate_exponents(&q.exponents)?;
    let p = Problem::new(q.exponents.iter().map(|&r| weighted_log_sine(r)).collect())?;
    let sigma = Permutation::identity(p.n());
    let report = minimax(&p, &sigma, opts)?;
    let w = report.nodes.full();
    let z = report.profile.z();
    let interlacing = (0..w.len()).all(|j| {
        let next = if j + 1 < w.len() { w[j + 1] } else { TAU };
        w[j] < z[j] && z[j] < next
    });
    let norm = report.objective.exp();
    Ok(GtpReport { report, w, z, norm, interlacing })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoubledReport {
    pub report: SolveReport,
    /// Weights `(r_n, …, r_1, r_1, …, r_n)` in node order.
    pub weights: Vec<f64>,
    /// Rotated nodes `t_1 < … < t_{2n}` with `t_1 + t_{2n} = 2π`.
    pub t: Vec<f64>,
    /// Rotated arc maximizers: `z[0] ≈ 0` for the arc across `0`, then one
    /// per arc `[t_k, t_{k+1}]`.
    pub z: Vec<f64>,
    /// `max_k |t_k + t_{2n+1−k} − 2π|`.
    pub symmetry_residual: f64,
    /// `max |z_k + z_{2n+2−k} − 2π|` over the arcs away from `0`, together with `|z_1|`.
    pub z_symmetry_residual: f64,
    pub flagged: bool,
}

/// Tolerance on node symmetry after normalization.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Solves the `2n`-node problem with mirrored weights and rotates it so
/// that `t_1 + t_{2n} = 2π`.
pub fn solve_doubled_symmetric(r: &[f64], opts: &SolveOptions) -> Result<DoubledReport> {
    validate_exponents(r)?;
    let n = r.len();
    let weights: Vec<f64> = r.iter().rev().chain(r.iter()).copied().collect();
    let p = Problem::new(weights.iter().map(|&w| weighted_log_sine(w)).collect())?;
    let sigma = Permutation::identity(2 * n - 1);
    let report = minimax(&p, &sigma, opts)?;
    let raw = report.nodes.full();
    let c = 0.5 * (TAU - raw[2 * n - 1]);
    let t: Vec<f64> = raw.iter().map(|v| v + c).collect();
    let symmetry_residual = (0..2 * n).map(|k| (t[k] + t[2 * n - 1 - k] - TAU).abs()).fold(0.0, f64::max);

    // arc k (0-based) runs from t[k] to t[k+1]; the last one wraps over 0
    let zr: Vec<f64> = report.profile.z().iter().map(|v| v + c).collect();
    let wrap = {
        let v = reduce(zr[2 * n - 1]);
        if v > PI {
            v - TAU
        } else {
            v
        }
    };
    let mut z = vec![wrap];
    z.extend(zr[..2 * n - 1].iter().copied());
    let mut z_res = wrap.abs();
    for k in 1..2 * n {
        z_res = z_res.max((z[k] + z[2 * n - k] - TAU).abs());
    }
    let flagged = !report.converged() || symmetry_residual > SYMMETRY_TOL;
    Ok(DoubledReport { report, weights, t, z, symmetry_residual, z_symmetry_residual: z_res, flagged })
}

/// `x_j = L(cos t_{n+1−j})` for symmetric nodes `t_1 < … < t_{2n}`.
pub fn transfer_to_interval(t_nodes: &[f64], q: &BojanovProblem) -> Result<Vec<f64>> {
    q.validate()?;
    let m = t_nodes.len();
    if m == 0 || !m.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!("need an even number of torus nodes, got {m}")));
    }
    let n = m / 2;
    if q.exponents.len() != n {
        return Err(Error::DimensionMismatch { expected: q.exponents.len(), got: n });
    }
    let asym = (0..m).map(|k| (t_nodes[k] + t_nodes[m - 1 - k] - TAU).abs()).fold(0.0, f64::max);
    if asym > SYMMETRY_TOL {
        return Err(Error::InvalidInput(format!("torus nodes are not symmetric (residual {asym:e})")));
    }
    Ok((1..=n).map(|j| q.affine(t_nodes[n - j].cos())).collect())
}

/// `s_j = L(cos z_{n+1−j})` for the maximizers `z_1 ≈ 0, z_2, …, z_{n+1} ≈ π`.
fn transfer_alternation(z: &[f64], q: &BojanovProblem) -> Vec<f64> {
    let n = q.exponents.len();
    (0..=n).map(|j| q.affine(z[n - j].cos())).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremalPolynomial {
    pub a: f64,
    pub b: f64,
    pub exponents: Vec<f64>,
    /// `a < x_1 < … < x_n < b`.
    pub nodes: Vec<f64>,
    /// `a = s_0 < s_1 < … < s_n = b`.
    pub alternation: Vec<f64>,
    pub norm: f64,
    /// `max_j ||P(s_j)| − norm| / norm`.
    pub equioscillation_residual: f64,
    pub interlacing: bool,
    pub flagged: bool,
    pub torus: DoubledReport,
}

/// Relative tolerance for `|P(s_j)| = ‖P‖`.
pub const EQUIOSCILLATION_TOL: f64 = 1e-7;

/// Extremal `P(x) = ∏ |x − x_j|^{ν_j}` minimizing the sup norm on `[a, b]`.
pub fn solve_bojanov(q: &BojanovProblem, opts: &SolveOptions) -> Result<ExtremalPolynomial> {
    q.validate()?;
    let torus = solve_doubled_symmetric(&q.exponents, opts)?;
    let nodes = transfer_to_interval(&torus.t, q)?;
    let mut alternation = transfer_alternation(&torus.z, q);
    alternation[0] = q.a;
    *alternation.last_mut().unwrap() = q.b;
    // ‖P‖ = (b−a)^{Σν}·‖T‖
    let norm = (q.b - q.a).powf(q.total_exponent()) * torus.report.objective.exp();
    let gap = |x: f64| eval_gap_raw(x, &nodes, &q.exponents);
    let equioscillation_residual =
        alternation.iter().map(|&s| (gap(s) - norm).abs() / norm).fold(0.0, f64::max);
    let n = nodes.len();
    let interlacing = (0..n).all(|j| alternation[j] < nodes[j] && nodes[j] < alternation[j + 1]);
    let flagged = torus.flagged || equioscillation_residual > EQUIOSCILLATION_TOL || !interlacing;
    Ok(ExtremalPolynomial {
        a: q.a,
        b: q.b,
        exponents: q.exponents.clone(),
        nodes,
        alternation,
        norm,
        equioscillation_residual,
        interlacing,
        flagged,
        torus,
    })
}

fn eval_gap_raw(x: f64, nodes: &[f64], nu: &[f64]) -> f64 {
    nodes.iter().zip(nu).map(|(xj, v)| (x - xj).abs().powf(*v)).product()
}

/// `∏_j |x − x_j|^{ν_j}`.
pub fn eval_gap(x: f64, poly: &ExtremalPolynomial) -> f64 {
    eval_gap_raw(x, &poly.nodes, &poly.exponents)
}

/// `T(t) = ∏_k |sin((t − t_k)/2)|^{w_k}` for the doubled node set.
pub fn doubled_gtp(t: f64, t_nodes: &[f64], weights: &[f64]) -> f64 {
    t_nodes.iter().zip(weights).map(|(tk, w)| ((t - tk) / 2.0).sin().abs().powf(*w)).product()
}

/// `|P(L(cos t))·((b−a)/2)^{−Σν}·2^{−Σν} − T(t)|` for symmetric nodes.
pub fn transference_identity_check(t: f64, q: &BojanovProblem, t_nodes: &[f64]) -> Result<f64> {
    let x = transfer_to_interval(t_nodes, q)?;
    let n = q.exponents.len();
    // node t_k carries the exponent of its interval image
    let weights: Vec<f64> = q.exponents.iter().rev().chain(q.exponents.iter()).copied().collect();
    debug_assert_eq!(weights.len(), 2 * n);
    let s = q.total_exponent();
    let lhs = eval_gap_raw(q.affine(t.cos()), &x, &q.exponents) * (0.5 * (q.b - q.a)).powf(-s) * 2f64.powf(-s);
    Ok((lhs - doubled_gtp(t, t_nodes, &weights)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    #[test]
    fn gtp_examples() {
        let r = solve_gtp(&GtpProblem { exponents: vec![1.0; 3] }, &opts()).unwrap();
        assert_abs_diff_eq!(r.w[1], TAU / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.w[2], 2.0 * TAU / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.norm, 0.25, epsilon = 1e-10);
        assert!(r.interlacing);

        let r = solve_gtp(&GtpProblem { exponents: vec![1.0, 1.0] }, &opts()).unwrap();
        assert_abs_diff_eq!(r.w[1], PI, epsilon = 1e-9);
        assert_abs_diff_eq!(r.norm, 0.5, epsilon = 1e-10);
    }

    #[test]
    fn gtp_scaling_raises_the_norm_to_a_power() {
        let base = solve_gtp(&GtpProblem { exponents: vec![1.0, 2.0, 0.5] }, &opts()).unwrap();
        let scaled = solve_gtp(&GtpProblem { exponents: vec![3.0, 6.0, 1.5] }, &opts()).unwrap();
        for (a, b) in base.w.iter().zip(&scaled.w) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
        assert_abs_diff_eq!(scaled.norm, base.norm.powi(3), epsilon = 1e-10);
        assert!(base.interlacing);
    }

    #[test]
    fn doubled_examples() {
        let d = solve_doubled_symmetric(&[1.0], &opts()).unwrap();
        assert_eq!(d.t.len(), 2);
        assert_abs_diff_eq!(d.t[0] + d.t[1], TAU, epsilon = 1e-12);
        assert!(d.symmetry_residual <= SYMMETRY_TOL);

        let d = solve_doubled_symmetric(&[1.0, 1.0], &opts()).unwrap();
        for w in d.t.windows(2) {
            assert_abs_diff_eq!(w[1] - w[0], PI / 2.0, epsilon = 1e-9);
        }
        assert!(d.symmetry_residual <= SYMMETRY_TOL && d.z_symmetry_residual <= 1e-8);
        assert!(!d.flagged);
    }

    #[test]
    fn transfer_examples() {
        let q = BojanovProblem::new(-1.0, 1.0, vec![1.0]).unwrap();
        let x = transfer_to_interval(&[TAU / 3.0, 2.0 * TAU / 3.0], &q).unwrap();
        assert_abs_diff_eq!(x[0], -0.5, epsilon = 1e-15);
        let x = transfer_to_interval(&[PI, PI], &q).unwrap();
        assert_abs_diff_eq!(x[0], q.a, epsilon = 1e-15);
        assert!(transfer_to_interval(&[1.0, 2.0], &q).is_err());
        let q2 = BojanovProblem::new(0.0, 4.0, vec![1.0]).unwrap();
        assert_abs_diff_eq!(q2.affine(-0.5), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn bojanov_chebyshev_n2() {
        let q = BojanovProblem::new(-1.0, 1.0, vec![1.0, 1.0]).unwrap();
        let p = solve_bojanov(&q, &opts()).unwrap();
        let r = 0.5f64.sqrt();
        assert_abs_diff_eq!(p.nodes[0], -r, epsilon = 1e-9);
        assert_abs_diff_eq!(p.nodes[1], r, epsilon = 1e-9);
        assert_abs_diff_eq!(p.norm, 0.5, epsilon = 1e-10);
        for (s, want) in p.alternation.iter().zip([-1.0, 0.0, 1.0]) {
            assert_abs_diff_eq!(*s, want, epsilon = 1e-9);
        }
        assert!(p.interlacing && !p.flagged);
        assert_abs_diff_eq!(eval_gap(0.0, &p), 0.5, epsilon = 1e-10);
        assert_eq!(eval_gap(p.nodes[0], &p), 0.0);
        assert_abs_diff_eq!(eval_gap(1.0, &p), p.norm, epsilon = 1e-9);
    }

    #[test]
    fn bojanov_affine_covariance() {
        let unit = solve_bojanov(&BojanovProblem::new(-1.0, 1.0, vec![1.0, 2.0]).unwrap(), &opts()).unwrap();
        let q = BojanovProblem::new(0.0, 3.0, vec![1.0, 2.0]).unwrap();
        let p = solve_bojanov(&q, &opts()).unwrap();
        for (a, b) in unit.nodes.iter().zip(&p.nodes) {
            assert_abs_diff_eq!(q.affine(*a), *b, epsilon = 1e-8);
        }
        assert_abs_diff_eq!(p.norm, unit.norm * 1.5f64.powi(3), epsilon = 1e-9);
    }

    #[test]
    fn squared_chebyshev_and_reversal() {
        let a = solve_bojanov(&BojanovProblem::new(-1.0, 1.0, vec![2.0, 2.0, 2.0]).unwrap(), &opts()).unwrap();
        assert_abs_diff_eq!(a.norm, 1.0 / 16.0, epsilon = 1e-10);
        // reversing the exponents mirrors the nodes and keeps the norm
        let f = solve_bojanov(&BojanovProblem::new(-1.0, 1.0, vec![1.0, 2.0]).unwrap(), &opts()).unwrap();
        let r = solve_bojanov(&BojanovProblem::new(-1.0, 1.0, vec![2.0, 1.0]).unwrap(), &opts()).unwrap();
        assert_abs_diff_eq!(f.norm, r.norm, epsilon = 1e-10);
        assert_abs_diff_eq!(f.nodes[0], -r.nodes[1], epsilon = 1e-8);
    }

    #[test]
    fn transference_identity() {
        let q = BojanovProblem::new(-1.0, 1.0, vec![1.0, 2.5]).unwrap();
        let t = [0.4, 1.9, TAU - 1.9, TAU - 0.4];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let s: f64 = rng.random::<f64>() * TAU;
            assert!(transference_identity_check(s, &q, &t).unwrap() <= 1e-10);
        }
        assert!(transference_identity_check(t[1], &q, &t).unwrap() <= 1e-15);
        // the half-angle identity itself
        let (s, al): (f64, f64) = (0.7, 2.2);
        let lhs = ((s - al) / 2.0).sin() * ((s + al - TAU) / 2.0).sin();
        assert_abs_diff_eq!(lhs, 0.5 * (s.cos() - al.cos()), epsilon = 1e-15);
    }

    #[test]
    fn invalid_inputs() {
        assert!(BojanovProblem::new(1.0, -1.0, vec![1.0]).is_err());
        assert!(BojanovProblem::new(-1.0, 1.0, vec![0.0]).is_err());
        assert!(solve_gtp(&GtpProblem { exponents: vec![] }, &opts()).is_err());
    }
}
