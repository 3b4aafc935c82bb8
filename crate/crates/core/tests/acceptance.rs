//! One line per acceptance criterion; exits non-zero if any fails.

use std::f64::consts::{LN_2, PI, TAU};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use torus_minimax::apps::{
    eval_gap, solve_bojanov, solve_doubled_symmetric, transference_identity_check, BojanovProblem,
};
use torus_minimax::evaluator::{jacobian_delta, jacobian_m, profile, Problem};
use torus_minimax::kernels::{approximant, KernelSpec, SmoothingKind};
use torus_minimax::oracle::{
    check_mmatrix, check_sandwich, convergence_probe, grid_bojanov, grid_minimax, grid_sup, majorization,
    random_interior, Majorization, DEFAULT_SEED,
};
use torus_minimax::solver::{maximin, minimax, solve_equioscillation, SolveOptions, Start};
use torus_minimax::torus::{NodeSystem, Permutation};
use torus_minimax::Error;

type Check = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|x| x.to_string())
}

fn perm(v: &[usize]) -> Permutation {
    Permutation::new(v.to_vec()).unwrap()
}

fn example() -> Problem {
    let q = KernelSpec::weighted(0.1, KernelSpec::Parabola);
    Problem::new(vec![KernelSpec::Tent, KernelSpec::Tent, q.clone(), q]).unwrap()
}

fn c1_example_equioscillation() -> Check {
    let p = example();
    let s = perm(&[2, 1, 3]);
    let e_pt = NodeSystem::new(vec![PI, PI / 2.0, 1.5 * PI]);
    let want = PI + 0.15 * PI * PI;
    let prof = e(profile(&p, &e_pt, &s))?;
    let dev = prof.m().iter().map(|m| (m - want).abs()).fold(0.0, f64::max);
    ensure(dev <= 1e-9, format!("max |m_j(e) − π − 0.15π²| = {dev:.2e}"))?;
    let opts = SolveOptions { start: Start::Equidistant, ..SolveOptions::default() };
    let r = e(solve_equioscillation(&p, &s, &opts))?;
    let dist = r.nodes.as_slice().iter().zip(e_pt.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(r.converged() && dist <= 1e-7, format!("solver status {:?}, distance to e {dist:.2e}", r.status))?;
    Ok(format!("m deviation {dev:.1e}, node distance {dist:.1e}"))
}

fn c2_example_boundary() -> Check {
    let p = example();
    let s2 = 2f64.sqrt();
    let q = 0.1 * PI * PI;
    let x2 = (2.0 * s2 - 2.0) * PI;
    let x = NodeSystem::new(vec![PI + (3.0 - 2.0 * s2) * q, x2, 0.0]);
    let prof = e(profile(&p, &x, &perm(&[3, 2, 1])))?;
    let m = prof.m();
    let z = prof.z();
    let m0 = PI + q * (14.0 * s2 - 19.0);
    let m1 = PI + q * (6.0 * s2 - 7.0);
    let dm = [m0, m1, m1, m1].iter().zip(&m).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let dz = [PI + x2 / 2.0, PI, x2 / 2.0].iter().zip(&z[1..]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(dm <= 1e-9 && dz <= 1e-9, format!("m deviation {dm:.2e}, z deviation {dz:.2e}"))?;
    Ok(format!("m_0 = {:.12}, m_1..3 = {:.12}, z deviation {dz:.1e}", m[0], m[1]))
}

fn c3_simplex_dependence() -> Check {
    let base = example();
    let p = e(base.map_specs(|s| approximant(s, 50, SmoothingKind::Bump)))?;
    let a = perm(&[2, 1, 3]);
    let b = perm(&[3, 2, 1]);
    let ga = e(grid_minimax(&p, &a, 120))?;
    let gb = e(grid_minimax(&p, &b, 120))?;
    let opts = SolveOptions::default();
    let sa = e(minimax(&p, &a, &opts))?;
    let sb = e(minimax(&p, &b, &opts))?;
    let gap = ga.estimate - gb.estimate;
    // grid refinement tolerances plus grid/solver disagreement on each side
    let tol = ga.tolerance + gb.tolerance + (ga.estimate - sa.objective).abs() + (gb.estimate - sb.objective).abs();
    ensure(gap > 10.0 * tol, format!("gap {gap:.6e} vs 10× tolerance {:.3e}", 10.0 * tol))?;
    Ok(format!(
        "M(S_(2,1,3)) ≈ {:.9}, M(S_(3,2,1)) ≈ {:.9}, gap {gap:.3e}, combined tolerance {tol:.1e}",
        ga.estimate, gb.estimate
    ))
}

fn c4_equidistant_optimum() -> Check {
    let mut worst: f64 = 0.0;
    for n in 2..=5 {
        let p = Problem::new(vec![KernelSpec::LogSine; n + 1]).unwrap();
        let s = Permutation::identity(n);
        let opts = SolveOptions::default();
        let r = e(minimax(&p, &s, &opts))?;
        let want = -(n as f64) * LN_2;
        let dn = (1..=n).map(|j| (r.nodes.get(j) - TAU * j as f64 / (n + 1) as f64).abs()).fold(0.0, f64::max);
        let dm = (r.objective - want).abs();
        let gs = e(grid_sup(&p, &NodeSystem::equidistant(&s), 1_000_000))?;
        let dg = (gs - want).abs();
        let mm = e(maximin(&p, &s, &opts))?;
        let dmm = (mm.objective - r.objective).abs();
        ensure(
            dn <= 1e-8 && dm <= 1e-8 && dg <= 1e-8 && dmm <= 1e-8,
            format!("n={n}: nodes {dn:.2e}, M {dm:.2e}, grid {dg:.2e}, M−m {dmm:.2e}"),
        )?;
        worst = worst.max(dn).max(dm).max(dg).max(dmm);
    }
    Ok(format!("n = 2..5, worst deviation {worst:.1e}"))
}

fn c5_bojanov_classical() -> Check {
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for n in 2..=5usize {
        let q = e(BojanovProblem::new(-1.0, 1.0, vec![1.0; n]))?;
        let poly = e(solve_bojanov(&q, &SolveOptions::default()))?;
        let mut cheb: Vec<f64> = (1..=n).map(|k| ((2 * k - 1) as f64 * PI / (2 * n) as f64).cos()).collect();
        cheb.sort_by(f64::total_cmp);
        let dx = cheb.iter().zip(&poly.nodes).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let dnorm = (poly.norm - 2f64.powi(1 - n as i32)).abs();
        let vals: Vec<f64> = poly.alternation.iter().map(|s| eval_gap(*s, &poly)).collect();
        let hi = vals.iter().copied().fold(f64::MIN, f64::max);
        let lo = vals.iter().copied().fold(f64::MAX, f64::min);
        ensure(
            dx <= 1e-7 && dnorm <= 1e-9 && hi - lo <= 1e-7,
            format!("n={n}: nodes {dx:.2e}, norm {dnorm:.2e}, spread {:.2e}", hi - lo),
        )?;
        worst = (worst.0.max(dx), worst.1.max(dnorm), worst.2.max(hi - lo));
    }
    Ok(format!("n = 2..5, nodes {:.1e}, norm {:.1e}, |P(s_j)| spread {:.1e}", worst.0, worst.1, worst.2))
}

fn c6_bojanov_asymmetric() -> Check {
    let nu = [1.0, 2.0];
    let q = e(BojanovProblem::new(-1.0, 1.0, nu.to_vec()))?;
    let poly = e(solve_bojanov(&q, &SolveOptions::default()))?;
    ensure(poly.interlacing, "interlacing fails")?;
    ensure(poly.equioscillation_residual <= 1e-7, format!("equioscillation residual {:.2e}", poly.equioscillation_residual))?;
    let (gx, gnorm) = e(grid_bojanov(-1.0, 1.0, &nu, 1e-3))?;
    let dx = gx.iter().zip(&poly.nodes).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let dn = (gnorm - poly.norm).abs();
    ensure(dx <= 1e-4 && dn <= 1e-6, format!("grid nodes {dx:.2e}, grid norm {dn:.2e}"))?;
    Ok(format!(
        "nodes ({:.9}, {:.9}), norm {:.12}, grid agreement nodes {dx:.1e} norm {dn:.1e}",
        poly.nodes[0], poly.nodes[1], poly.norm
    ))
}

fn c7_jacobian_suite() -> Check {
    let specs = vec![
        KernelSpec::LogSine,
        KernelSpec::riesz(2.0),
        KernelSpec::Parabola,
        KernelSpec::weighted(0.5, KernelSpec::LogSine),
    ];
    let p = Problem::new(specs).unwrap();
    let n = p.n();
    let sigmas = Permutation::all(n);
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let (mut i, mut skipped) = (0, 0);
    while i < 50 {
        let s = &sigmas[rng.random_range(0..sigmas.len())];
        let y = random_interior(&mut rng, s);
        // parabola nodes can carry an arc maximum, where m_j has no such partials
        let jm = match jacobian_m(&p, &y, s) {
            Ok(j) => j,
            Err(Error::JacobianUnavailable(_)) => {
                skipped += 1;
                continue;
            }
            Err(x) => return Err(x.to_string()),
        };
        i += 1;
        for r in 0..n {
            let shift = |d: f64| {
                let mut v = y.as_slice().to_vec();
                v[r] += d;
                profile(&p, &NodeSystem::new(v), s).map(|pr| pr.m())
            };
            let (plus, minus) = (e(shift(h))?, e(shift(-h))?);
            for j in 0..=n {
                let fd = (plus[j] - minus[j]) / (2.0 * h);
                // relative error with a unit floor for near-zero entries
                let rel = (jm[(j, r)] - fd).abs() / fd.abs().max(1.0);
                worst = worst.max(rel);
                ensure(rel <= 1e-5, format!("sample {i}, σ={s}, entry ({j},{}): rel error {rel:.2e}", r + 1))?;
            }
        }
    }
    let mut checked = 0;
    for s in &sigmas {
        let r = e(solve_equioscillation(&p, s, &SolveOptions::default()))?;
        ensure(r.converged(), format!("σ={s}: equioscillation status {:?}", r.status))?;
        let j: DMatrix<f64> = e(jacobian_delta(&p, &r.nodes, s))?;
        let mm = check_mmatrix(&j);
        ensure(mm.ok, format!("σ={s}: {:?}", mm.issues))?;
        checked += 1;
    }
    Ok(format!("50 random points ({skipped} boundary maximizers skipped), worst rel error {worst:.1e}; M-matrix at {checked} solved points"))
}

fn c8_sandwich_majorization() -> Check {
    let p = Problem::new(vec![
        KernelSpec::weighted(2.0, KernelSpec::LogSine),
        KernelSpec::LogSine,
        KernelSpec::LogSine,
        KernelSpec::LogSine,
    ])
    .unwrap();
    let opts = SolveOptions::default();
    let mut lines = Vec::new();
    for s in [Permutation::identity(3), perm(&[2, 3, 1])] {
        let m = e(minimax(&p, &s, &opts))?;
        let rep = e(check_sandwich(&p, &s, m.objective, 100, DEFAULT_SEED, &[], 1e-9))?;
        ensure(rep.holds(), format!("σ={s}: {} violations", rep.violations.len()))?;
        let w = e(maximin(&p, &s, &opts))?;
        let mw = w.profile.m();
        let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED + 1);
        for k in 0..100 {
            let x = random_interior(&mut rng, &s);
            let mx = e(profile(&p, &x, &s))?.m();
            ensure(majorization(&mx, &mw) == Majorization::None, format!("σ={s}: sample {k} majorizes the maximin point"))?;
        }
        lines.push(format!("σ={s} M={:.10}", m.objective));
    }
    let ex = example();
    let s = perm(&[2, 1, 3]);
    let s2 = 2f64.sqrt();
    let e_pt = NodeSystem::new(vec![PI, PI / 2.0, 1.5 * PI]);
    let x = NodeSystem::new(vec![PI + (3.0 - 2.0 * s2) * 0.1 * PI * PI, (2.0 * s2 - 2.0) * PI, 0.0]);
    let rep = e(check_sandwich(&ex, &s, PI + 0.15 * PI * PI, 100, DEFAULT_SEED, &[e_pt, x], 1e-9))?;
    let w = rep.pair_witness.ok_or("no sandwich witness on the tent/parabola example")?;
    lines.push(format!("witness m̲(x)={:.9} > m̄(y)={:.9}", w.m_under_x, w.m_bar_y));
    Ok(lines.join("; "))
}

fn c9_convergence_probe() -> Check {
    let levels = [4, 16, 64, 256];
    let cases: Vec<(usize, Vec<f64>, Permutation)> = vec![
        (2, vec![1.5, 4.0], Permutation::identity(2)),
        (3, vec![PI, PI / 2.0, 1.5 * PI], perm(&[2, 1, 3])),
        (4, vec![5.0, 0.7, 3.3, 2.0], perm(&[2, 4, 3, 1])),
        // clustered nodes put arc maxima inside the smoothed region
        (3, vec![0.03, 0.07, 3.0], Permutation::identity(3)),
        (4, vec![0.004, 0.01, 3.0, 3.002], Permutation::identity(4)),
    ];
    let mut out = Vec::new();
    for (n, y, s) in cases {
        let p = Problem::new(vec![KernelSpec::Tent; n + 1]).unwrap();
        let t = e(convergence_probe(&p, SmoothingKind::SqrtCusp, &levels, &NodeSystem::new(y), &s))?;
        let devs: Vec<String> = t.rows.iter().map(|r| format!("{:.2e}", r.deviation)).collect();
        ensure(t.within_bounds() && t.non_increasing(), format!("n={n}: deviations {devs:?}"))?;
        out.push(format!("n={n} [{}]", devs.join(", ")));
    }
    Ok(out.join("; "))
}

fn c10_doubled_symmetric() -> Check {
    let d = e(solve_doubled_symmetric(&[1.0, 2.0], &SolveOptions::default()))?;
    ensure(d.t.len() == 4, "expected four nodes")?;
    ensure(d.symmetry_residual <= 1e-8, format!("symmetry residual {:.2e}", d.symmetry_residual))?;
    let q = e(BojanovProblem::new(-1.0, 1.0, vec![1.0, 2.0]))?;
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let t = rng.random::<f64>() * TAU;
        worst = worst.max(e(transference_identity_check(t, &q, &d.t))?);
    }
    ensure(worst <= 1e-10, format!("transference residual {worst:.2e}"))?;
    Ok(format!("symmetry residual {:.1e}, transference residual {worst:.1e}", d.symmetry_residual))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("example equioscillation", Duration::from_secs(1), c1_example_equioscillation),
        ("example boundary profile", Duration::from_secs(1), c2_example_boundary),
        ("simplex dependence", Duration::from_secs(300), c3_simplex_dependence),
        ("equidistant optimum", Duration::from_secs(10), c4_equidistant_optimum),
        ("classical extremal polynomial", Duration::from_secs(30), c5_bojanov_classical),
        ("asymmetric extremal polynomial", Duration::from_secs(120), c6_bojanov_asymmetric),
        ("jacobian suite", Duration::from_secs(60), c7_jacobian_suite),
        ("sandwich and majorization", Duration::from_secs(120), c8_sandwich_majorization),
        ("convergence probe", Duration::from_secs(60), c9_convergence_probe),
        ("doubled symmetric consistency", Duration::from_secs(60), c10_doubled_symmetric),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = f();
        let took = start.elapsed();
        let res = res.and_then(|m| {
            if took <= *budget {
                Ok(m)
            } else {
                Err(format!("{m}; runtime {took:.2?} over budget {budget:?}"))
            }
        });
        match res {
            Ok(m) => println!("criterion {:>2} PASS  {name} ({took:.2?}): {m}", i + 1),
            Err(m) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({took:.2?}): {m}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
