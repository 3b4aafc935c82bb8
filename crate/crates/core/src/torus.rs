//! Node systems on the torus, simplices `S_σ`, and their arc partitions.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::reduce;

/// Absolute tolerance for treating two angles as equal.
pub const ANGLE_TOL: f64 = 1e-12;

/// Free nodes `y_1..y_n`, each reduced into `[0, 2π)`; `y_0 = 0` is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeSystem {
    y: Vec<f64>,
}

impl NodeSystem {
    pub fn new(y: Vec<f64>) -> Self {
        NodeSystem { y: y.into_iter().map(reduce).collect() }
    }

    /// Equidistant nodes `y_σ(k) = 2πk/(n+1)`.
    pub fn equidistant(sigma: &Permutation) -> Self {
        let n = sigma.n();
        let mut y = vec![0.0; n];
        for k in 1..=n {
            y[sigma.at(k) - 1] = TAU * k as f64 / (n + 1) as f64;
        }
        NodeSystem { y }
    }

    /// Builds the node system whose σ-ordered positions are `pos[k-1] = y_σ(k)`.
    pub fn from_positions(sigma: &Permutation, pos: &[f64]) -> Self {
        let mut y = vec![0.0; sigma.n()];
        for (k, &p) in pos.iter().enumerate() {
            y[sigma.at(k + 1) - 1] = p;
        }
        NodeSystem::new(y)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// `y_j` for `j = 0..=n`, with `y_0 = 0`.
    pub fn get(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.y[j - 1]
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.y
    }

    /// `(0, y_1, …, y_n)`.
    pub fn full(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.y.iter().copied()).collect()
    }
}

/// A bijection of `{1..n}`, extended by `σ(0) = 0` and `σ(n+1) = n+1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Permutation {
    sigma: Vec<usize>,
}

impl Permutation {
    pub fn new(sigma: Vec<usize>) -> Result<Self> {
        let n = sigma.len();
        let mut seen = vec![false; n + 1];
        for &s in &sigma {
            if s == 0 || s > n || seen[s] {
                return Err(Error::InvalidPermutation(format!("{sigma:?} is not a bijection of 1..{n}")));
            }
            seen[s] = true;
        }
        Ok(Permutation { sigma })
    }

    pub fn identity(n: usize) -> Self {
        Permutation { sigma: (1..=n).collect() }
    }

    pub fn n(&self) -> usize {
        self.sigma.len()
    }

    /// `σ(k)` for `k = 0..=n+1`.
    pub fn at(&self, k: usize) -> usize {
        match k {
            0 => 0,
            k if k == self.sigma.len() + 1 => k,
            k => self.sigma[k - 1],
        }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.sigma
    }

    /// Position `k` with `σ(k) = j`; `inverse(0) = 0`.
    pub fn inverse(&self, j: usize) -> usize {
        if j == 0 {
            return 0;
        }
        self.sigma.iter().position(|&s| s == j).map(|p| p + 1).unwrap_or(j)
    }

    /// All `n!` permutations in lexicographic order.
    pub fn all(n: usize) -> Vec<Permutation> {
        let mut out = Vec::new();
        let mut cur: Vec<usize> = (1..=n).collect();
        loop {
            out.push(Permutation { sigma: cur.clone() });
            // next lexicographic permutation
            let Some(i) = (1..cur.len()).rev().find(|&i| cur[i - 1] < cur[i]) else {
                break;
            };
            let j = (i..cur.len()).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
            cur.swap(i - 1, j);
            cur[i..].reverse();
        }
        out
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        Permutation::new(v).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.sigma.iter().map(|s| s.to_string()).collect();
        write!(f, "({})", s.join(","))
    }
}

impl FromStr for Permutation {
    type Err = Error;

    /// Parses literals like `"2,1,3"` or `"(2,1,3)"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_start_matches('(').trim_end_matches(')');
        if s.trim().is_empty() {
            return Ok(Permutation::identity(0));
        }
        let v = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidPermutation(format!("{s:?}: {e}")))?;
        Permutation::new(v)
    }
}

/// A closed arc `[start, end]` with `0 ≤ start ≤ end ≤ 2π`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    /// Kernel index `j` whose node starts this arc.
    pub j: usize,
    pub start: f64,
    pub end: f64,
}

impl Arc {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_degenerate(&self) -> bool {
        self.len() <= ANGLE_TOL
    }
}

/// The `n+1` arcs `I_{σ,j}` of a node system, indexed by `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcPartition {
    pub sigma: Permutation,
    /// `arcs[j]` is `I_{σ,j}`.
    pub arcs: Vec<Arc>,
    /// σ-ordered positions `0 = p_0 ≤ p_1 ≤ … ≤ p_n ≤ p_{n+1} = 2π`.
    pub positions: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut: Option<f64>,
}

impl ArcPartition {
    /// Arcs in counterclockwise order starting at `I_0`.
    pub fn in_order(&self) -> impl Iterator<Item = &Arc> + '_ {
        (0..self.arcs.len()).map(move |k| &self.arcs[self.sigma.at(k)])
    }

    pub fn total_length(&self) -> f64 {
        self.arcs.iter().map(Arc::len).sum()
    }

    pub fn min_gap(&self) -> f64 {
        self.arcs.iter().map(Arc::len).fold(f64::INFINITY, f64::min)
    }

    /// Arcs seen on the line after cutting the torus at `c`.
    ///
    /// Coordinates are measured from `c`, so every piece lies in `[0, 2π]`;
    /// the arc containing `c` is split into a head and a tail piece.
    pub fn cut_view(&self, c: f64) -> Vec<Arc> {
        let c = reduce(c);
        let mut pieces = Vec::with_capacity(self.arcs.len() + 1);
        for a in self.in_order() {
            if a.start <= c && c < a.end {
                pieces.push(Arc { j: a.j, start: 0.0, end: a.end - c });
                pieces.push(Arc { j: a.j, start: TAU - (c - a.start), end: TAU });
            } else {
                let s = reduce(a.start - c);
                pieces.push(Arc { j: a.j, start: s, end: s + a.len() });
            }
        }
        pieces.sort_by(|a, b| a.start.total_cmp(&b.start));
        pieces
    }
}

/// Where a node system sits relative to the simplices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "sigma", rename_all = "snake_case")]
pub enum SimplexLocation {
    Interior(Permutation),
    Boundary(Vec<Permutation>),
}

/// `d_T(a, b) = min(|a−b|, 2π−|a−b|)` on reduced angles.
pub fn torus_dist(a: f64, b: f64) -> f64 {
    let d = reduce(a - b);
    d.min(TAU - d)
}

/// Maximum coordinatewise torus distance.
pub fn node_dist(x: &NodeSystem, y: &NodeSystem) -> Result<f64> {
    if x.n() != y.n() {
        return Err(Error::DimensionMismatch { expected: x.n(), got: y.n() });
    }
    Ok(x.y.iter().zip(&y.y).map(|(&a, &b)| torus_dist(a, b)).fold(0.0, f64::max))
}

/// Stable non-decreasing rearrangement.
pub fn sort_nodes(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Arc partition of `y` under `σ`. `y` must lie in the closure of `S_σ`.
///
/// A node equal to `0` that comes after a positive node is read as `2π`.
pub fn arcs(y: &NodeSystem, sigma: &Permutation) -> Result<ArcPartition> {
    let n = y.n();
    if sigma.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: sigma.n() });
    }
    let incompatible = |reason: String| Error::IncompatibleSimplex { sigma: sigma.to_string(), reason };
    let mut pos = Vec::with_capacity(n + 2);
    pos.push(0.0);
    for k in 1..=n {
        let prev = pos[k - 1];
        let mut p = y.get(sigma.at(k));
        if TAU - p <= ANGLE_TOL {
            p = TAU;
        }
        if p < prev {
            if p <= ANGLE_TOL {
                p = TAU;
            } else if prev - p <= ANGLE_TOL {
                p = prev;
            } else {
                return Err(incompatible(format!(
                    "y_{} = {p} precedes y_{} = {prev}",
                    sigma.at(k),
                    sigma.at(k - 1)
                )));
            }
        }
        pos.push(p);
    }
    pos.push(TAU);
    let mut arcs = vec![Arc { j: 0, start: 0.0, end: 0.0 }; n + 1];
    for k in 0..=n {
        let j = sigma.at(k);
        arcs[j] = Arc { j, start: pos[k], end: pos[k + 1] };
    }
    Ok(ArcPartition { sigma: sigma.clone(), arcs, positions: pos, cut: None })
}

/// Locates `y` in the interior of a unique simplex or on a common boundary.
pub fn locate(y: &NodeSystem) -> SimplexLocation {
    let n = y.n();
    // zero-class nodes may sit at either end of the ordering
    let canon = |v: f64| if v <= ANGLE_TOL || TAU - v <= ANGLE_TOL { 0.0 } else { v };
    let mut idx: Vec<usize> = (1..=n).collect();
    idx.sort_by(|&a, &b| canon(y.get(a)).total_cmp(&canon(y.get(b))).then(a.cmp(&b)));
    let zeros: Vec<usize> = idx.iter().copied().filter(|&j| canon(y.get(j)) == 0.0).collect();
    let rest: Vec<usize> = idx.iter().copied().filter(|&j| canon(y.get(j)) != 0.0).collect();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &j in &rest {
        match groups.last_mut() {
            Some(g) if y.get(j) - y.get(*g.last().unwrap()) <= ANGLE_TOL => g.push(j),
            _ => groups.push(vec![j]),
        }
    }
    if zeros.is_empty() && groups.iter().all(|g| g.len() == 1) {
        return SimplexLocation::Interior(Permutation { sigma: rest });
    }

    // Zero-class nodes are arranged together with a divider: those before it
    // sit at 0, those after it at 2π.
    const DIVIDER: usize = usize::MAX;
    let mut zero_arrangements = Vec::new();
    let mut with_div = zeros.clone();
    with_div.push(DIVIDER);
    for p in permutations_of(&with_div) {
        let d = p.iter().position(|&x| x == DIVIDER).unwrap();
        zero_arrangements.push((p[..d].to_vec(), p[d + 1..].to_vec()));
    }
    let mut middles: Vec<Vec<usize>> = vec![Vec::new()];
    for g in &groups {
        let gp = permutations_of(g);
        middles = middles
            .into_iter()
            .flat_map(|m| {
                gp.iter().map(move |q| {
                    let mut m = m.clone();
                    m.extend_from_slice(q);
                    m
                })
            })
            .collect();
    }
    let mut out = Vec::new();
    for (front, back) in &zero_arrangements {
        for m in &middles {
            let mut s = front.clone();
            s.extend_from_slice(m);
            s.extend_from_slice(back);
            out.push(Permutation { sigma: s });
        }
    }
    out.sort();
    out.dedup();
    SimplexLocation::Boundary(out)
}

fn permutations_of(items: &[usize]) -> Vec<Vec<usize>> {
    Permutation::all(items.len())
        .into_iter()
        .map(|p| p.sigma.iter().map(|&i| items[i - 1]).collect())
        .collect()
}

/// Midpoint of a longest arc of the partition induced by `y ∪ {0}`.
///
/// Ties go to the arc with the smallest start angle.
pub fn admissible_cut(y: &NodeSystem) -> f64 {
    let mut pts = sort_nodes(&y.full());
    pts.push(TAU);
    let mut best = (f64::NEG_INFINITY, 0.0);
    for w in pts.windows(2) {
        let len = w[1] - w[0];
        if len > best.0 + ANGLE_TOL {
            best = (len, w[0]);
        }
    }
    reduce(best.1 + best.0 / 2.0)
}

/// Lower bound on the distance between an admissible cut and any node.
pub fn cut_margin(n: usize) -> f64 {
    PI / (2 * n + 2) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn perm(v: &[usize]) -> Permutation {
        Permutation::new(v.to_vec()).unwrap()
    }

    #[test]
    fn torus_dist_examples() {
        assert_abs_diff_eq!(torus_dist(0.0, 1.5 * PI), PI / 2.0, epsilon = 1e-15);
        assert_eq!(torus_dist(1.3, 1.3), 0.0);
        assert_abs_diff_eq!(torus_dist(PI / 4.0, 0.75 * PI), PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn node_dist_examples() {
        let a = NodeSystem::new(vec![1.0, 2.0]);
        assert_eq!(node_dist(&a, &a).unwrap(), 0.0);
        let d = node_dist(&NodeSystem::new(vec![0.1]), &NodeSystem::new(vec![TAU - 0.1])).unwrap();
        assert_abs_diff_eq!(d, 0.2, epsilon = 1e-15);
        let d = node_dist(&a, &NodeSystem::new(vec![1.5, 2.0])).unwrap();
        assert_abs_diff_eq!(d, 0.5, epsilon = 1e-15);
        assert!(node_dist(&a, &NodeSystem::new(vec![1.0])).is_err());
    }

    #[test]
    fn locate_examples() {
        let e = NodeSystem::new(vec![PI, PI / 2.0, 1.5 * PI]);
        assert_eq!(locate(&e), SimplexLocation::Interior(perm(&[2, 1, 3])));
        match locate(&NodeSystem::new(vec![PI, PI])) {
            SimplexLocation::Boundary(list) => assert_eq!(list, vec![perm(&[1, 2]), perm(&[2, 1])]),
            other => panic!("{other:?}"),
        }
        assert!(matches!(locate(&NodeSystem::new(vec![0.0])), SimplexLocation::Boundary(_)));
    }

    #[test]
    fn boundary_permutations_are_all_compatible() {
        let y = NodeSystem::new(vec![0.0, 2.0, 0.0, 2.0]);
        let SimplexLocation::Boundary(list) = locate(&y) else { panic!() };
        // 3! arrangements of two zeros and a divider, 2! for the tied pair
        assert_eq!(list.len(), 12);
        for s in &list {
            arcs(&y, s).unwrap();
        }
    }

    #[test]
    fn arcs_examples() {
        let p = arcs(&NodeSystem::new(vec![PI]), &Permutation::identity(1)).unwrap();
        assert_eq!((p.arcs[0].start, p.arcs[0].end), (0.0, PI));
        assert_eq!((p.arcs[1].start, p.arcs[1].end), (PI, TAU));

        let e = NodeSystem::new(vec![PI, PI / 2.0, 1.5 * PI]);
        let p = arcs(&e, &perm(&[2, 1, 3])).unwrap();
        let got: Vec<(f64, f64)> = p.in_order().map(|a| (a.start, a.end)).collect();
        assert_eq!(got, vec![(0.0, PI / 2.0), (PI / 2.0, PI), (PI, 1.5 * PI), (1.5 * PI, TAU)]);

        let p = arcs(&NodeSystem::new(vec![PI, PI]), &Permutation::identity(2)).unwrap();
        assert!(p.arcs[1].is_degenerate());
        assert_eq!(p.arcs[2].start, PI);

        assert!(matches!(
            arcs(&NodeSystem::new(vec![2.0, 1.0]), &Permutation::identity(2)),
            Err(Error::IncompatibleSimplex { .. })
        ));
    }

    #[test]
    fn zero_node_after_positive_wraps_to_two_pi() {
        let x = NodeSystem::new(vec![3.0, 2.0, 0.0]);
        let p = arcs(&x, &perm(&[2, 1, 3])).unwrap();
        assert_eq!(p.arcs[1].end, TAU);
        assert!(p.arcs[3].is_degenerate());
        let p = arcs(&x, &perm(&[3, 2, 1])).unwrap();
        assert!(p.arcs[0].is_degenerate());
        assert_eq!((p.arcs[3].start, p.arcs[3].end), (0.0, 2.0));
    }

    #[test]
    fn admissible_cut_examples() {
        assert_abs_diff_eq!(admissible_cut(&NodeSystem::new(vec![PI])), PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(admissible_cut(&NodeSystem::new(vec![PI / 2.0, PI])), 1.5 * PI, epsilon = 1e-15);
        let eq = NodeSystem::equidistant(&Permutation::identity(2));
        assert_abs_diff_eq!(admissible_cut(&eq), PI / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn cut_view_covers_the_line() {
        let y = NodeSystem::new(vec![1.0, 4.0]);
        let p = arcs(&y, &Permutation::identity(2)).unwrap();
        let c = admissible_cut(&y);
        let v = p.cut_view(c);
        assert_eq!(v.len(), 4);
        assert_eq!(v[0].start, 0.0);
        assert_abs_diff_eq!(v.last().unwrap().end, TAU, epsilon = 1e-12);
        for w in v.windows(2) {
            assert_abs_diff_eq!(w[0].end, w[1].start, epsilon = 1e-12);
        }
    }

    #[test]
    fn sort_examples() {
        assert_eq!(sort_nodes(&[3.0, 1.0, 2.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(sort_nodes(&[1.0, 2.0]), vec![1.0, 2.0]);
        assert_eq!(sort_nodes(&[2.0, 2.0, 1.0]), vec![1.0, 2.0, 2.0]);
    }

    #[test]
    fn permutation_parsing_and_enumeration() {
        assert_eq!("2,1,3".parse::<Permutation>().unwrap(), perm(&[2, 1, 3]));
        assert_eq!("(3,2,1)".parse::<Permutation>().unwrap(), perm(&[3, 2, 1]));
        assert!("1,1".parse::<Permutation>().is_err());
        assert_eq!(Permutation::all(4).len(), 24);
        let p = perm(&[2, 3, 1]);
        assert_eq!((p.at(0), p.at(1), p.at(3), p.at(4)), (0, 2, 1, 4));
        assert_eq!(p.inverse(1), 3);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[2,3,1]");
        assert!(serde_json::from_str::<Permutation>("[2,2]").is_err());
    }

    fn nodes(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0..TAU, n)
    }

    proptest! {
        #[test]
        fn partition_is_complete(y in (1usize..7).prop_flat_map(nodes)) {
            let y = NodeSystem::new(y);
            let sigma = match locate(&y) {
                SimplexLocation::Interior(s) => s,
                SimplexLocation::Boundary(l) => l[0].clone(),
            };
            let p = arcs(&y, &sigma).unwrap();
            prop_assert!((p.total_length() - TAU).abs() <= 1e-12);
            prop_assert_eq!(p.arcs.len(), y.n() + 1);
        }

        #[test]
        fn interior_arcs_are_positive(y in (1usize..7).prop_flat_map(nodes)) {
            let y = NodeSystem::new(y);
            if let SimplexLocation::Interior(s) = locate(&y) {
                let p = arcs(&y, &s).unwrap();
                prop_assert!(p.arcs.iter().all(|a| a.len() > 0.0));
            }
        }

        #[test]
        fn cut_is_far_from_nodes(y in (1usize..9).prop_flat_map(nodes)) {
            let y = NodeSystem::new(y);
            let c = admissible_cut(&y);
            for v in y.full() {
                prop_assert!(torus_dist(c, v) >= cut_margin(y.n()) - 1e-12);
            }
        }

        #[test]
        fn sort_is_idempotent_permutation(x in proptest::collection::vec(-10.0..10.0f64, 0..20)) {
            let s = sort_nodes(&x);
            prop_assert_eq!(sort_nodes(&s), s.clone());
            let mut a = x.clone();
            a.sort_by(f64::total_cmp);
            prop_assert_eq!(a, s);
        }
    }
}
