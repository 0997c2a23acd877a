//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines are always printed. The exit
//! status is nonzero when a criterion fails unexpectedly. Clauses listed in
//! `KNOWN_UNATTAINABLE` are still executed and reported with their real result.

use std::f64::consts::{E, PI};
use std::time::{Duration, Instant};

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hypdich::coefficients::{compute_extrema, HyperbolicSystem};
use hypdich::conditions::{
    corollary_check, lemma_iso_bound, remark_constant_thresholds, theorem2_check, theorem3_check, DecayCouplingConfig,
    SignCase, Verdict,
};
use hypdich::dichotomy::assembly::iso_inverse_norms;
use hypdich::dichotomy::monodromy::{angle, eigvec_near};
use hypdich::dichotomy::*;
use hypdich::evolution::{exp_bound, simulate, Evolution, EvolutionConfig};
use hypdich::expr::{check_x_periodicity, BinaryOp, Expr, UnaryOp, Var};
use hypdich::grid::GridFunction;
use hypdich::reduction::{reduce, reduced_coefficients, trichotomy_const_check, SecondOrderDoc, SecondOrderEq};

/// Clauses that fail for reasons recorded in the decisions ledger.
/// 10c: the reduced coupling matrix has equal rows, so `theorem3_check` can never
/// pass on a reduced system while the trichotomy test passes on a large region.
const KNOWN_UNATTAINABLE: &[&str] = &["10c"];

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: &'static str, pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { id, pass, detail: detail.into() }
}

fn sys(a: &[&str], b: &[&[&str]]) -> HyperbolicSystem {
    HyperbolicSystem::from_strings(a, b, 10.0).unwrap()
}

fn decoupled() -> HyperbolicSystem {
    sys(&["1", "-1"], &[&["1", "0"], &["0", "-1"]])
}

fn max_err(a: &GridFunction, b: &GridFunction) -> f64 {
    a.dist_sup(b)
}

// 1. explicit solution of the decoupled constant system
fn explicit_error(np: usize, dt: f64) -> f64 {
    let s = decoupled();
    let evo = Evolution::new(&s, EvolutionConfig::with_grid(np, dt)).unwrap();
    let exact = |t: f64| {
        GridFunction::from_fn(2, np, |j, x| {
            if j == 0 {
                (-t).exp() * (2.0 * PI * (x - t)).sin()
            } else {
                t.exp() * (2.0 * PI * (x + t)).cos()
            }
        })
    };
    let (_, snaps) = simulate(&evo, 1.0, 0.0, &exact(0.0), 1).unwrap();
    snaps.iter().map(|(t, g)| max_err(g, &exact(*t))).fold(0.0, f64::max)
}

fn criterion_1() -> Vec<Outcome> {
    const TOL: f64 = 1e-3;
    const FACTOR: f64 = 2.0;
    // below this the error is round-off and the ratio carries no information
    const FLOOR: f64 = 1e-12;
    let start = Instant::now();
    let e1 = explicit_error(256, 1.0 / 256.0);
    let e2 = explicit_error(512, 1.0 / 512.0);
    let elapsed = start.elapsed();
    let ratio_ok = e2 <= e1 / FACTOR || (e1 <= FLOOR && e2 <= FLOOR);
    // off-grid feet: dt is not a multiple of the cell width
    let o1 = explicit_error(256, 0.7 / 256.0);
    let o2 = explicit_error(512, 0.7 / 512.0);
    vec![
        outcome("1a", e1 <= TOL, format!("error {e1:.3e} at N=256, dt=1/256 (tol {TOL:e})")),
        outcome("1b", ratio_ok, format!("refined error {e2:.3e}, both at round-off: {}", e1 <= FLOOR && e2 <= FLOOR)),
        outcome("1c", o2 <= o1 / FACTOR, format!("off-grid dt=0.7/N: {o1:.3e} -> {o2:.3e}, factor {:.1}", o1 / o2)),
        outcome("1d", elapsed < Duration::from_secs(10), format!("runtime {:.2}s", elapsed.as_secs_f64())),
    ]
}

// 2. evolution family axioms
fn random_system(rng: &mut ChaCha8Rng) -> HyperbolicSystem {
    let mut r = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let a1 = format!("{:.3} + {:.3}*sin(2*pi*x + {:.3})*cos({:.3}*t)", r(0.8, 1.5), r(0.0, 0.4), r(0.0, 6.0), r(0.0, 2.0));
    let a2 = format!("-{:.3} - {:.3}*cos(2*pi*x)^2*exp(-t^2)", r(0.8, 1.5), r(0.0, 0.4));
    let mut b = Vec::new();
    for _ in 0..4 {
        b.push(format!("{:.3} + {:.3}*sin(2*pi*x + {:.3}*t)", r(-1.0, 1.0), r(0.0, 1.0), r(0.0, 2.0)));
    }
    let b: Vec<&str> = b.iter().map(|s| s.as_str()).collect();
    sys(&[&a1, &a2], &[&b[..2], &b[2..]])
}

fn criterion_2() -> Vec<Outcome> {
    const COCYCLE_TOL: f64 = 1e-3;
    const BOUND_SLACK: f64 = 1.01;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // default simulation grid
    let np = 256;
    let (mut identity_exact, mut worst_cocycle, mut worst_ratio) = (true, 0.0f64, 0.0f64);
    for _ in 0..5 {
        let s = random_system(&mut rng);
        let evo = Evolution::new(&s, EvolutionConfig::with_grid(np, 1.0 / np as f64)).unwrap();
        let ext = compute_extrema(&s, 257, 257).unwrap();
        let omega = exp_bound(&ext, s.n()).omega;
        for _ in 0..20 {
            let mut tr = [0.0; 3];
            for v in &mut tr {
                *v = rng.random_range(-1.0..1.0);
            }
            let (c1, c2, ph) = (rng.random_range(1..4) as f64, rng.random_range(1..4) as f64, rng.random_range(0.0..6.0));
            let u = GridFunction::from_fn(2, np, |j, x| {
                if j == 0 { (2.0 * PI * c1 * x + ph).sin() } else { (2.0 * PI * c2 * x).cos() }
            });
            let u = {
                let mut u = u;
                u.scale(1.0 / u.sup_norm());
                u
            };
            let [t, r, s0] = tr;
            identity_exact &= evo.apply(t, t, &u).unwrap() == u;
            worst_cocycle = worst_cocycle.max(evo.cocycle_defect(t, r, s0, &u).unwrap());
            let (lo, hi) = if s0 <= t { (s0, t) } else { (t, s0) };
            let norm = evo.apply(hi, lo, &u).unwrap().sup_norm();
            worst_ratio = worst_ratio.max(norm / (omega * (hi - lo)).exp());
        }
    }
    let elapsed = start.elapsed();
    vec![
        outcome("2a", identity_exact, "U(t,t) u == u bitwise on 100 samples"),
        outcome("2b", worst_cocycle <= COCYCLE_TOL, format!("worst cocycle defect {worst_cocycle:.3e} (tol {COCYCLE_TOL:e})")),
        outcome("2c", worst_ratio <= BOUND_SLACK, format!("max |U(t,s)u| / exp(omega (t-s)) = {worst_ratio:.4}")),
        outcome("2d", elapsed < Duration::from_secs(120), format!("runtime {:.2}s", elapsed.as_secs_f64())),
    ]
}

// 3. condition checkers
fn criterion_3() -> Vec<Outcome> {
    const TOL: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let a: f64 = rng.random_range(-3.0..3.0);
        let b: f64 = rng.random_range(-3.0..3.0);
        if a.abs() < 1e-3 || b.abs() < 1e-3 {
            continue;
        }
        let closed = if a * b > 0.0 { b.abs() } else { b.abs() / (2.0 * (-b / a).exp() - 1.0) };
        worst = worst.max((remark_constant_thresholds(a, b).unwrap() - closed).abs());
    }
    let anchors = (remark_constant_thresholds(1.0, 2.0).unwrap() - 2.0).abs()
        + (remark_constant_thresholds(1.0, -1.0).unwrap() - 1.0 / (2.0 * E - 1.0)).abs();
    let mut disagree = 0;
    let mut passes = 0;
    for _ in 0..50 {
        let n = rng.random_range(2..4usize);
        let mut a = Vec::new();
        let mut b = vec![vec![String::new(); n]; n];
        for j in 0..n {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            a.push(format!("{}", sign * rng.random_range(0.5..2.0)));
            for k in 0..n {
                let v: f64 = if j == k {
                    let m = rng.random_range(0.2..2.5);
                    if rng.random_bool(0.5) { m } else { -m }
                } else {
                    rng.random_range(-0.6..0.6)
                };
                b[j][k] = format!("{v}");
            }
        }
        let a_ref: Vec<&str> = a.iter().map(|s| s.as_str()).collect();
        let rows: Vec<Vec<&str>> = b.iter().map(|r| r.iter().map(|s| s.as_str()).collect()).collect();
        let rows_ref: Vec<&[&str]> = rows.iter().map(|r| r.as_slice()).collect();
        let s = sys(&a_ref, &rows_ref);
        let ext = compute_extrema(&s, 33, 3).unwrap();
        let th = theorem3_check(&s, &ext).unwrap();
        let co = corollary_check(&s, &ext).unwrap();
        if (th.verdict == Verdict::Pass) != co.pass {
            disagree += 1;
        }
        passes += (th.verdict == Verdict::Pass) as usize;
    }
    vec![
        outcome("3a", worst <= TOL && anchors <= TOL, format!("max threshold error {worst:.1e}, anchors {anchors:.1e}")),
        outcome("3b", disagree == 0, format!("{disagree} disagreements on 50 systems ({passes} pass, {} fail)", 50 - passes)),
    ]
}

// 4. isolated inverse norms against the bound
fn criterion_4() -> Vec<Outcome> {
    const SLACK: f64 = 1.05;
    let mut out = Vec::new();
    for (id, a, b, case) in [
        ("4a", "1", "1 + 0.5*sin(2*pi*x)", SignCase::PP),
        ("4b", "-1", "-1 - 0.5*sin(2*pi*x)", SignCase::MM),
        ("4c", "1", "-1 - 0.5*cos(2*pi*x)", SignCase::PM),
    ] {
        let s = sys(&[a], &[&[b]]);
        let ext = compute_extrema(&s, 257, 3).unwrap();
        let e = &ext.components[0];
        let classified = SignCase::classify(e);
        let bound = lemma_iso_bound(case, e).unwrap();
        let cfg = AssemblyConfig { interp: TimeInterp::Linear, ..AssemblyConfig::new(128, 128, 8.0) };
        let asm = assemble(&s, &cfg).unwrap();
        let norm = iso_inverse_norms(&asm).unwrap()[0];
        out.push(outcome(
            id,
            classified == case && norm <= SLACK * bound,
            format!("{case:?}: |(I-C)^-1| = {norm:.5} vs bound {bound:.5} on 128x128"),
        ));
    }
    out
}

// 5. positive detection
fn criterion_5() -> Vec<Outcome> {
    const MASS_TOL: f64 = 1e-3;
    const OMEGA_REL: f64 = 0.1;
    let r = detect(&decoupled(), &DichotomyConfig::default()).unwrap();
    let mass = r.off_block_mass(2, &[0]).unwrap_or(f64::INFINITY);
    let omega = r.fit.as_ref().map(|f| f.omega).unwrap_or(f64::NAN);
    vec![
        outcome("5a", r.verdict == DichotomyVerdict::Dichotomy, format!("verdict {:?}, notes {:?}", r.verdict, r.notes)),
        outcome("5b", mass <= MASS_TOL, format!("off-block mass {mass:.2e}")),
        outcome("5c", (omega - 1.0).abs() <= OMEGA_REL, format!("fitted omega {omega:.4}")),
    ]
}

// 6. refutation with a constant nontrivial solution
fn criterion_6() -> Vec<Outcome> {
    const TOL: f64 = 1e-3;
    const SV_TOL: f64 = 1e-4;
    let s = sys(&["1", "-1"], &[&["1", "2"], &["0.5", "1"]]);
    let np = 32;
    let m = monodromy_projection(&s, 1.0, np, None, &MonodromyConfig::default()).unwrap();
    let near = m.nearest(1.0, 0.0).unwrap();
    let dist = ((near.re - 1.0).powi(2) + near.im.powi(2)).sqrt();
    let v = eigvec_near(&m.matrix, near.re).unwrap();
    let field: Vec<f64> = (0..2 * np).map(|r| if r < np { 2.0 } else { -1.0 }).collect();
    let ang = angle(&v, &field);
    let levels: Vec<AssemblyConfig> = DichotomyConfig::default()
        .svd_levels
        .iter()
        .map(|&(nx, nt)| AssemblyConfig::new(nx, nt, 10.0))
        .collect();
    let trace = svd_trace(&s, &levels).unwrap();
    let rel: Vec<f64> = trace.iter().map(|l| l.relative).collect();
    vec![
        outcome("6a", dist <= TOL, format!("eigenvalue {:.6}{:+.1e}i, distance {dist:.1e} from 1", near.re, near.im)),
        outcome("6b", ang <= TOL, format!("eigenvector angle to (2,-1) {ang:.1e}")),
        outcome("6c", rel.last().is_some_and(|&r| r < SV_TOL), format!("relative sigma_min {:?}", rel.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>())),
    ]
}

// 7. refutation with imaginary spectrum
fn criterion_7() -> Vec<Outcome> {
    const TOL: f64 = 1e-3;
    const REL: f64 = 1e-2;
    let s = sys(&["1", "-1"], &[&["1", "1"], &["-3", "-1"]]);
    let m = monodromy_projection(&s, 1.0, 32, None, &MonodromyConfig::default()).unwrap();
    let rate = 2f64.sqrt();
    let on = m.near_unit_circle(TOL);
    let args: Vec<f64> = on.iter().map(|e| e.arg).collect();
    let args_ok = on.len() == 2 && args.iter().all(|a| (a.abs() - rate).abs() <= REL * rate);
    // oracle: lambda^2 - (b11 + b22) lambda + det b = 0 gives lambda = +-i sqrt(2)
    let (tr, det) = (1.0 + -1.0, 1.0 * -1.0 - 1.0 * -3.0);
    let oracle = ((4.0 * det - tr * tr) as f64).sqrt() / 2.0;
    vec![
        outcome("7a", on.len() == 2, format!("{} eigenvalues within {TOL:e} of the unit circle", on.len())),
        outcome("7b", args_ok && (oracle - rate).abs() < 1e-15, format!("arguments {args:.5?} vs rate {rate:.5}")),
    ]
}

// 8. bounded solution: space-time solve against the Green's function
fn criterion_8() -> Vec<Outcome> {
    const STEADY_TOL: f64 = 1e-8;
    const AGREE_TOL: f64 = 2e-3;
    let s = decoupled();
    let asm = assemble(&s, &AssemblyConfig::new(64, 40, 10.0)).unwrap();
    let sol = solve_bounded(&asm, &vec![1.0; asm.dim()], &BoundedConfig::default()).unwrap();
    let mut steady = 0.0f64;
    for j in 0..2 {
        let want = if j == 0 { 1.0 } else { -1.0 };
        for m in 0..asm.n_t() {
            for i in 0..asm.n_x() {
                steady = steady.max((sol.at(&asm, j, i, m) - want).abs());
            }
        }
    }
    let np = 64;
    let evo = Evolution::new(&s, EvolutionConfig::with_grid(np, 1.0 / np as f64)).unwrap();
    let p = Mat::<f64>::from_fn(2 * np, 2 * np, |r, c| if r == c && r < np { 1.0 } else { 0.0 });
    let cfg = GreenConfig { window: 20.0, h: 1.0 / 32.0, tail_tol: 1e-6, m: 2.0, omega: 1.0 };
    let ones = |_: f64| GridFunction::from_fn(2, np, |_, _| 1.0);
    let g1 = greens_apply(&evo, &p, &ones, 0.0, &cfg).unwrap();
    let mut steady_green = 0.0f64;
    for i in 0..np {
        steady_green = steady_green.max((g1.u.get(0, i) - 1.0).abs()).max((g1.u.get(1, i) + 1.0).abs());
    }
    let forcing = |j: usize, x: f64, t: f64| if j == 0 { (2.0 * PI * x).sin() / t.cosh() } else { 0.5 * (2.0 * PI * x).cos() * (-t * t).exp() };
    let f = |t: f64| GridFunction::from_fn(2, np, |j, x| forcing(j, x, t));
    let g = greens_apply(&evo, &p, &f, 0.0, &cfg).unwrap();
    let asm = assemble(&s, &AssemblyConfig::new(32, 256, 8.0)).unwrap();
    let b = solve_bounded(&asm, &asm.sample(forcing), &BoundedConfig::default()).unwrap();
    let m0 = 128;
    let mut worst = 0.0f64;
    for j in 0..2 {
        for i in 0..32 {
            worst = worst.max((b.at(&asm, j, i, m0) - g.u.get(j, 2 * i)).abs());
        }
    }
    vec![
        outcome(
            "8a",
            steady <= STEADY_TOL && steady_green <= AGREE_TOL,
            format!("steady state: space-time {steady:.1e} ({}), Green {steady_green:.1e}", sol.method),
        ),
        outcome("8b", worst <= AGREE_TOL && asm.time(m0).abs() < 1e-12, format!("nonconstant forcing agreement {worst:.2e}")),
    ]
}

// 9. decaying coupling
fn criterion_9() -> Vec<Outcome> {
    let start = Instant::now();
    let c = "exp(-t^2)*sin(2*pi*x)";
    let s = sys(&["1", "-1"], &[&["-1", c], &[c, "-1"]]);
    let ext = compute_extrema(&s, 257, 257).unwrap();
    let th = theorem2_check(&s, &ext, &DecayCouplingConfig::default()).unwrap();
    let dc = th.decay_coupling.as_ref().unwrap();
    let factor_ok = dc.factorization.iter().all(|f| f.verdict == Verdict::Pass && (f.min_speed_gap - 2.0).abs() < 1e-12);
    let r = detect(&s, &DichotomyConfig::default()).unwrap();
    let elapsed = start.elapsed();
    let omega = r.fit.as_ref().map(|f| f.omega);
    vec![
        outcome(
            "9a",
            th.verdict == Verdict::Pass && dc.k0 && factor_ok,
            format!("theorem2_check {:?}, k0 {}, factorization gap 2: {factor_ok}", th.verdict, dc.k0),
        ),
        outcome(
            "9b",
            r.verdict == DichotomyVerdict::Dichotomy && r.route == Route::FiniteTime,
            format!("verdict {:?} via {:?}, rank {:?}, omega {omega:.4?}", r.verdict, r.route, r.rank),
        ),
        outcome("9c", elapsed < Duration::from_secs(300), format!("runtime {:.1}s", elapsed.as_secs_f64())),
    ]
}

// 10. reduction
fn eq(a: f64, a1: f64, a2: f64) -> SecondOrderEq {
    SecondOrderEq::from_doc(&SecondOrderDoc {
        a: format!("{a}"),
        a1: format!("{a1}"),
        a2: format!("{a2}"),
        a3: None,
        sample_window: 10.0,
    })
    .unwrap()
}

fn criterion_10() -> Vec<Outcome> {
    let (_, b) = reduced_coefficients(&eq(1.0, 3.0, 1.0));
    let vals: Vec<Option<f64>> = b.iter().flatten().map(|e| e.as_const()).collect();
    let exact = vals == vec![Some(2.0), Some(1.0), Some(2.0), Some(1.0)];
    let tri = trichotomy_const_check(1.0, 3.0, 1.0).unwrap();
    let margins_ok =
        tri.verdict == Verdict::Pass && (tri.margins[0] - 2.0).abs() < 1e-12 && (tri.margins[1] - 2.873).abs() < 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut disagree, mut tri_pass) = (Vec::new(), 0);
    for _ in 0..20 {
        let a = if rng.random_bool(0.5) { 1.0 } else { -1.0 } * rng.random_range(0.5..2.0);
        let (a1, a2): (f64, f64) = (rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0));
        let (a, a1, a2) = ((a * 100.0f64).round() / 100.0, (a1 * 100.0f64).round() / 100.0, (a2 * 100.0f64).round() / 100.0);
        let s = reduce(&eq(a, a1, a2), 10.0).unwrap();
        let ext = compute_extrema(&s, 17, 3).unwrap();
        let th = theorem3_check(&s, &ext).unwrap().verdict;
        let tv = trichotomy_const_check(a, a1, a2).unwrap().verdict;
        tri_pass += (tv == Verdict::Pass) as usize;
        if th != tv {
            disagree.push(format!("({a},{a1},{a2}): {th:?} vs {tv:?}"));
        }
    }
    let (_, anchor_th) = {
        let s = reduce(&eq(1.0, 3.0, 1.0), 10.0).unwrap();
        let ext = compute_extrema(&s, 17, 3).unwrap();
        ((), theorem3_check(&s, &ext).unwrap())
    };
    vec![
        outcome("10a", exact, format!("(1,3,1) reduces to b = {vals:?}")),
        outcome("10b", margins_ok, format!("trichotomy margins [{:.6}, {:.6}] {:?}", tri.margins[0], tri.margins[1], tri.verdict)),
        outcome(
            "10c",
            disagree.is_empty(),
            format!(
                "{} of 20 random triples disagree ({tri_pass} trichotomy passes); (1,3,1) gives {:?} with beta<threshold {:?}; first disagreement: {:?}",
                disagree.len(),
                anchor_th.verdict,
                anchor_th.components.iter().map(|c| format!("{:.4}<{:.4}?", c.beta_j, c.threshold)).collect::<Vec<_>>(),
                disagree.first()
            ),
        ),
    ]
}

// 11. parser suite
const UNARY: [UnaryOp; 7] =
    [UnaryOp::Neg, UnaryOp::Sin, UnaryOp::Cos, UnaryOp::Exp, UnaryOp::Tanh, UnaryOp::Sqrt, UnaryOp::Log];
const BINARY: [BinaryOp; 5] = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div, BinaryOp::Pow];

fn random_expr(rng: &mut ChaCha8Rng, depth: usize) -> Expr {
    if depth == 0 || rng.random_bool(0.25) {
        return match rng.random_range(0..5) {
            0 => Expr::constant(rng.random_range(-5.0..5.0)),
            1 => Expr::constant(rng.random_range(0..100) as f64 / 4.0),
            2 => Expr::constant(PI),
            3 => Expr::var(Var::X),
            _ => Expr::var(Var::T),
        };
    }
    if rng.random_bool(0.4) {
        let op = UNARY[rng.random_range(0..UNARY.len())];
        Expr::unary(op, random_expr(rng, depth - 1))
    } else {
        let op = BINARY[rng.random_range(0..BINARY.len())];
        Expr::binary(op, random_expr(rng, depth - 1), random_expr(rng, depth - 1))
    }
}

/// Compositions that stay smooth and moderate on `[-1, 1]^2`.
fn smooth_expr(rng: &mut ChaCha8Rng, depth: usize) -> Expr {
    if depth == 0 || rng.random_bool(0.2) {
        return match rng.random_range(0..3) {
            0 => Expr::constant(rng.random_range(-2.0..2.0)),
            1 => Expr::var(Var::X),
            _ => Expr::var(Var::T),
        };
    }
    let pos = |e: Expr| Expr::binary(BinaryOp::Add, Expr::constant(2.0), Expr::unary(UnaryOp::Sin, e));
    let sub = |rng: &mut ChaCha8Rng| smooth_expr(rng, depth - 1);
    match rng.random_range(0..8) {
        0 => Expr::unary(UNARY[rng.random_range(0..5)], sub(rng)),
        1 | 2 => Expr::binary(BINARY[rng.random_range(0..3)], sub(rng), sub(rng)),
        3 => Expr::binary(BinaryOp::Div, sub(rng), pos(sub(rng))),
        4 => Expr::unary(UnaryOp::Sqrt, pos(sub(rng))),
        5 => Expr::unary(UnaryOp::Log, pos(sub(rng))),
        6 => Expr::binary(BinaryOp::Pow, sub(rng), Expr::constant(rng.random_range(2..4) as f64)),
        _ => Expr::binary(BinaryOp::Pow, pos(sub(rng)), Expr::unary(UnaryOp::Tanh, sub(rng))),
    }
}

fn criterion_11() -> Vec<Outcome> {
    const DIFF_TOL: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut round_trip_fail = 0;
    for _ in 0..100 {
        let e = random_expr(&mut rng, 5);
        let p1 = Expr::parse(&e.to_string()).unwrap();
        let p2 = Expr::parse(&p1.to_string()).unwrap();
        let same_value = match (e.eval(0.3, -0.4), p1.eval(0.3, -0.4)) {
            (Ok(a), Ok(b)) => a.to_bits() == b.to_bits(),
            (Err(_), Err(_)) => true,
            _ => false,
        };
        if p1 != p2 || !same_value {
            round_trip_fail += 1;
        }
    }
    let (mut checked, mut worst) = (0, 0.0f64);
    let h = 1e-5;
    while checked < 100 {
        let e = smooth_expr(&mut rng, 4);
        let (x, t) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if !e.eval(x, t).is_ok_and(|v| v.abs() < 1e4) {
            continue;
        }
        checked += 1;
        for (v, dx, dt) in [(Var::X, h, 0.0), (Var::T, 0.0, h)] {
            let sym = e.diff(v).eval(x, t).unwrap();
            let fd = (e.eval(x + dx, t + dt).unwrap() - e.eval(x - dx, t - dt).unwrap()) / (2.0 * h);
            worst = worst.max((sym - fd).abs() / (1.0 + sym.abs()));
        }
    }
    let corpus: [(&str, bool); 20] = [
        ("sin(2*pi*x)", true),
        ("cos(4*pi*x)*t", true),
        ("exp(sin(2*pi*x))", true),
        ("1/(2 + cos(2*pi*x))", true),
        ("sin(2*pi*x)^2 + cos(2*pi*x)^2", true),
        ("tanh(cos(6*pi*x))", true),
        ("sqrt(2 + sin(2*pi*x))", true),
        ("log(3 + cos(2*pi*x)) * exp(-t^2)", true),
        ("sin(2*pi*(x + t))", true),
        ("2 + 0*t", true),
        ("x", false),
        ("sin(x)", false),
        ("sin(pi*x)", false),
        ("cos(3*x)", false),
        ("x^2", false),
        ("exp(x)", false),
        ("sin(2*pi*x) + 0.001*x", false),
        ("t*x", false),
        ("sin(2*pi*1.01*x)", false),
        ("tanh(x - t)", false),
    ];
    let ts: Vec<f64> = (0..9).map(|k| -4.0 + k as f64).collect();
    let correct = corpus
        .iter()
        .filter(|(src, label)| check_x_periodicity(&Expr::parse(src).unwrap(), &ts, 64, 1e-9).unwrap() == *label)
        .count();
    vec![
        outcome("11a", round_trip_fail == 0, format!("{round_trip_fail} of 100 round trips failed")),
        outcome("11b", worst <= DIFF_TOL, format!("worst relative derivative error {worst:.2e} on 100 expressions")),
        outcome("11c", correct == 20, format!("{correct}/20 periodicity labels correct")),
    ]
}

fn main() {
    let criteria: [(usize, fn() -> Vec<Outcome>); 11] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut unexpected = Vec::new();
    for (n, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == &n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let parts = run();
        let pass = parts.iter().all(|p| p.pass);
        let known: Vec<&str> = parts.iter().filter(|p| !p.pass && KNOWN_UNATTAINABLE.contains(&p.id)).map(|p| p.id).collect();
        let tag = if pass { "PASS" } else if known.len() == parts.iter().filter(|p| !p.pass).count() { "FAIL (known)" } else { "FAIL" };
        println!("criterion {n}: {tag} [{:.1}s]", start.elapsed().as_secs_f64());
        for p in &parts {
            println!("  {} {}: {}", if p.pass { "ok  " } else { "FAIL" }, p.id, p.detail);
            if !p.pass && !KNOWN_UNATTAINABLE.contains(&p.id) {
                unexpected.push(p.id);
            }
            if p.pass && KNOWN_UNATTAINABLE.contains(&p.id) {
                println!("  note {}: listed as unattainable but passed", p.id);
                unexpected.push(p.id);
            }
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected results: {unexpected:?}");
        std::process::exit(1);
    }
}
