use hypdich::coefficients::{compute_extrema, HyperbolicSystem};
use hypdich::conditions::{lemma_iso_bound, SignCase};
use hypdich::dichotomy::assembly::{iso_inverse_norms, IsoSolver};
use hypdich::dichotomy::monodromy::{angle, eigvec_near};
use hypdich::dichotomy::propagate::{apply_mat, propagator};
use hypdich::dichotomy::splitting::propagated_angle;
use hypdich::dichotomy::*;
use hypdich::evolution::{Evolution, EvolutionConfig};
use hypdich::grid::GridFunction;

use faer::Mat;
use std::f64::consts::PI;

fn sys(a: &[&str], b: &[&[&str]]) -> HyperbolicSystem {
    HyperbolicSystem::from_strings(a, b, 10.0).unwrap()
}

fn decoupled() -> HyperbolicSystem {
    sys(&["1", "-1"], &[&["1", "0"], &["0", "-1"]])
}

#[test]
fn pure_transport_rows_interpolate_with_unit_weight() {
    let s = sys(&["1 + 0.3*sin(2*pi*x)"], &[&["0"]]);
    let asm = assemble(&s, &AssemblyConfig::new(16, 32, 4.0)).unwrap();
    for r in 0..asm.dim() {
        let sum: f64 = asm.c().row(r).map(|(_, v)| v).sum();
        assert!((sum - 1.0).abs() < 1e-12, "row {r}: {sum}");
    }
    assert_eq!(asm.d().nnz(), 0);
}

#[test]
fn damping_weight_at_the_right_end() {
    let s = sys(&["1"], &[&["1"]]);
    let asm = assemble(&s, &AssemblyConfig::new(16, 32, 4.0)).unwrap();
    let r = asm.index(0, 0, 10);
    let w: f64 = asm.c().row(r).map(|(_, v)| v).sum();
    assert!((w - (-1.0f64).exp()).abs() < 1e-12);
}

#[test]
fn coupling_integral_of_ones() {
    let s = sys(&["1", "-1"], &[&["0", "1"], &["0", "1"]]);
    let asm = assemble(&s, &AssemblyConfig::new(32, 32, 4.0)).unwrap();
    let ones = vec![1.0; asm.dim()];
    let du = asm.d().apply(&ones);
    let v = du[asm.index(0, 0, 12)];
    assert!((v + 1.0).abs() < 1e-12, "{v}");
}

#[test]
fn iso_solver_matches_dense_inverse() {
    let s = sys(&["1", "-1"], &[&["1 + 0.5*sin(2*pi*x)", "0"], &["0", "2"]]);
    let asm = assemble(&s, &AssemblyConfig::new(8, 16, 4.0)).unwrap();
    let iso = IsoSolver::new(&asm).unwrap();
    let dense = assembly::dense_iso_inverse(&asm);
    let g: Vec<f64> = (0..asm.dim()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
    let u = iso.solve(&asm, &g);
    let ref_u = hypdich::dichotomy::linalg::mat_vec(&dense, &g);
    let err = u.iter().zip(&ref_u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-11, "{err}");
    let dense_norm = hypdich::dichotomy::linalg::inf_norm(&dense);
    let per = asm.n_x() * asm.n_t();
    let norm0 = iso.inverse_norm(&asm, 0).max(iso.inverse_norm(&asm, 1));
    assert!((norm0 - dense_norm).abs() < 1e-10 * dense_norm, "{norm0} vs {dense_norm} ({per})");
}

#[test]
fn iso_norms_respect_the_bound_in_three_sign_cases() {
    for (a, b, case) in [
        ("1", "1 + 0.5*sin(2*pi*x)", SignCase::PP),
        ("-1", "-1 - 0.5*sin(2*pi*x)", SignCase::MM),
        ("1", "-1 - 0.5*cos(2*pi*x)", SignCase::PM),
    ] {
        let s = sys(&[a], &[&[b]]);
        let ext = compute_extrema(&s, 257, 3).unwrap();
        let e = &ext.components[0];
        assert_eq!(SignCase::classify(e), case);
        let bound = lemma_iso_bound(case, e).unwrap();
        let cfg = AssemblyConfig { interp: TimeInterp::Linear, ..AssemblyConfig::new(32, 64, 8.0) };
        let asm = assemble(&s, &cfg).unwrap();
        let norm = iso_inverse_norms(&asm).unwrap()[0];
        assert!(norm <= 1.05 * bound, "{case:?}: {norm} > {bound}");
    }
}

#[test]
fn constant_steady_state_is_recovered() {
    let s = decoupled();
    let asm = assemble(&s, &AssemblyConfig::new(64, 40, 10.0)).unwrap();
    let f = vec![1.0; asm.dim()];
    let sol = solve_bounded(&asm, &f, &BoundedConfig::default()).unwrap();
    for j in 0..2 {
        let want = if j == 0 { 1.0 } else { -1.0 };
        for m in 0..asm.n_t() {
            for i in 0..asm.n_x() {
                let v = sol.at(&asm, j, i, m);
                assert!((v - want).abs() < 1e-8, "j={j} i={i} m={m}: {v}");
            }
        }
    }
    assert!(sol.residual < 1e-10);
    let zero = solve_bounded(&asm, &vec![0.0; asm.dim()], &BoundedConfig::default()).unwrap();
    assert!(zero.u.iter().all(|v| v.abs() < 1e-14));
}

#[test]
fn gmres_route_matches_dense_route() {
    let s = sys(&["1", "-1"], &[&["1", "0.3*sin(2*pi*x)"], &["0.2", "-1"]]);
    let asm = assemble(&s, &AssemblyConfig::new(16, 40, 10.0)).unwrap();
    let f = asm.sample(|j, x, t| if j == 0 { (2.0 * PI * x).cos() / t.cosh() } else { 0.5 });
    let dense = solve_bounded(&asm, &f, &BoundedConfig::default()).unwrap();
    let cfg = BoundedConfig { dense_limit: 0, ..Default::default() };
    let iter = solve_bounded(&asm, &f, &cfg).unwrap();
    assert_eq!(iter.method, "gmres");
    let err = dense.u.iter().zip(&iter.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-9, "{err}");
}

#[test]
fn decoupled_monodromy_splits_by_component() {
    let s = decoupled();
    let m = monodromy_projection(&s, 1.0, 32, None, &MonodromyConfig::default()).unwrap();
    assert_eq!(m.evidence, DichotomyVerdict::Dichotomy);
    assert_eq!(m.inside, 32);
    let e1 = (-1.0f64).exp();
    for ev in &m.eigenvalues[..32] {
        assert!((ev.modulus - e1).abs() < 1e-6);
    }
    for ev in &m.eigenvalues[32..] {
        assert!((ev.modulus - e1.recip()).abs() < 1e-5);
    }
    let p = m.projection.unwrap();
    for r in 0..64 {
        for c in 0..64 {
            let want = if r == c && r < 32 { 1.0 } else { 0.0 };
            assert!((p[(r, c)] - want).abs() < 1e-8);
        }
    }
}

#[test]
fn constant_field_is_a_unit_eigenvector_for_the_singular_coupling() {
    let s = sys(&["1", "-1"], &[&["1", "2"], &["0.5", "1"]]);
    let m = monodromy_projection(&s, 1.0, 32, None, &MonodromyConfig::default()).unwrap();
    assert_eq!(m.evidence, DichotomyVerdict::NoDichotomy);
    let near = m.nearest(1.0, 0.0).unwrap();
    assert!((near.re - 1.0).abs() < 1e-6 && near.im.abs() < 1e-6, "{near:?}");
    let v = eigvec_near(&m.matrix, near.re).unwrap();
    let field: Vec<f64> = (0..64).map(|r| if r < 32 { 2.0 } else { -1.0 }).collect();
    assert!(angle(&v, &field) < 1e-6);
}

#[test]
fn rotating_constant_mode_sits_on_the_unit_circle() {
    let s = sys(&["1", "-1"], &[&["1", "1"], &["-3", "-1"]]);
    let m = monodromy_projection(&s, 1.0, 32, None, &MonodromyConfig::default()).unwrap();
    assert_eq!(m.evidence, DichotomyVerdict::NoDichotomy);
    let on = m.near_unit_circle(1e-3);
    assert_eq!(on.len(), 2, "{on:?}");
    for e in on {
        assert!((e.arg.abs() - 2f64.sqrt()).abs() < 1e-2 * 2f64.sqrt());
    }
}

#[test]
fn decay_fit_of_the_decoupled_system() {
    let s = decoupled();
    let evo = Evolution::new(&s, EvolutionConfig::with_grid(32, 1.0 / 32.0)).unwrap();
    let p = Mat::<f64>::from_fn(64, 64, |r, c| if r == c && r < 32 { 1.0 } else { 0.0 });
    let f = decay_fit(&evo, &p, &FitConfig::default()).unwrap();
    assert!((f.omega - 1.0).abs() < 1e-6, "{f:?}");
    assert!((f.m - 2.0).abs() < 1e-6);
    assert!(f.residual < 1e-6);
}

#[test]
fn scalar_stable_equation_has_identity_projection() {
    let s = sys(&["1"], &[&["1"]]);
    let m = monodromy_projection(&s, 1.0, 16, None, &MonodromyConfig::default()).unwrap();
    let p = m.projection.unwrap();
    let id = Mat::<f64>::identity(16, 16);
    assert!(hypdich::dichotomy::linalg::max_abs(&(&p - &id)) < 1e-10);
    let evo = Evolution::new(&s, EvolutionConfig::with_grid(16, 1.0 / 16.0)).unwrap();
    let f = decay_fit(&evo, &p, &FitConfig::default()).unwrap();
    assert!((f.omega - 1.0).abs() < 0.1);
    // t = s samples see the norm of P itself
    assert!(f.samples.iter().filter(|s| s.0 == 0.0).all(|s| (s.1 - 1.0).abs() < 1e-10));
}

#[test]
fn propagated_stable_space_stays_invariant() {
    let s = sys(&["1", "-1"], &[&["1", "0.3"], &["0.2", "-1"]]);
    let m = monodromy_projection(&s, 1.0, 16, None, &MonodromyConfig::default()).unwrap();
    let p = m.projection.unwrap();
    let evo = Evolution::new(&s, EvolutionConfig::with_grid(16, 1.0 / 16.0)).unwrap();
    for t in [0.25, 0.5, 1.0] {
        let ang = propagated_angle(&evo, &p, &p, t).unwrap();
        assert!(ang < 1e-3, "t={t}: {ang}");
    }
}

#[test]
fn green_function_jumps_by_the_identity() {
    // transport is only strongly continuous, so the jump is measured on smooth data
    let s = sys(&["1", "-1"], &[&["1", "0.3"], &["0.2", "-1"]]);
    let m = monodromy_projection(&s, 1.0, 32, None, &MonodromyConfig::default()).unwrap();
    let p = m.projection.unwrap();
    let dt = 1.0 / 1024.0;
    let evo = Evolution::new(&s, EvolutionConfig::with_grid(32, dt)).unwrap();
    let eps = 2.0 * dt;
    let sigma = 0.5;
    let v = GridFunction::from_fn(2, 32, |j, x| if j == 0 { (2.0 * PI * x).sin() } else { (2.0 * PI * x).cos() });
    let w = evo.apply(0.0, sigma, &v).unwrap();
    let mut jump = evo.apply(sigma + eps, 0.0, &apply_mat(&p, &w)).unwrap();
    let mut rest = w.clone();
    rest.axpy(-1.0, &apply_mat(&p, &w));
    jump.axpy(1.0, &evo.apply(sigma - eps, 0.0, &rest).unwrap());
    let err = jump.dist_sup(&v) / v.sup_norm();
    assert!(err < 5e-2, "{err}");
    let _ = propagator;
}

fn green_const(s: &HyperbolicSystem, np: usize) -> (Evolution<'_>, Mat<f64>) {
    let evo = Evolution::new(s, EvolutionConfig::with_grid(np, 1.0 / np as f64)).unwrap();
    let p = Mat::<f64>::from_fn(2 * np, 2 * np, |r, c| if r == c && r < np { 1.0 } else { 0.0 });
    (evo, p)
}

#[test]
fn green_route_steady_and_zero_forcing() {
    let s = decoupled();
    let (evo, p) = green_const(&s, 16);
    let cfg = GreenConfig { window: 20.0, h: 1.0 / 16.0, tail_tol: 1e-6, m: 2.0, omega: 1.0 };
    let ones = |_: f64| GridFunction::from_fn(2, 16, |_, _| 1.0);
    let r = greens_apply(&evo, &p, &ones, 0.3125, &cfg).unwrap();
    for i in 0..16 {
        assert!((r.u.get(0, i) - 1.0).abs() < 1e-6, "{}", r.u.get(0, i));
        assert!((r.u.get(1, i) + 1.0).abs() < 1e-6);
    }
    let zero = |_: f64| GridFunction::zeros(2, 16);
    let r = greens_apply(&evo, &p, &zero, 0.0, &cfg).unwrap();
    assert_eq!(r.u.sup_norm(), 0.0);
    let short = GreenConfig { window: 2.0, ..cfg };
    assert!(matches!(greens_apply(&evo, &p, &ones, 0.0, &short), Err(DichotomyError::TailTooLarge { .. })));
}

#[test]
fn green_and_bounded_routes_agree_on_a_localized_forcing() {
    let s = decoupled();
    let (evo, p) = green_const(&s, 64);
    let cfg = GreenConfig { window: 20.0, h: 1.0 / 32.0, tail_tol: 1e-6, m: 2.0, omega: 1.0 };
    let f = |t: f64| GridFunction::from_fn(2, 64, |j, x| if j == 0 { (2.0 * PI * x).sin() / t.cosh() } else { 0.0 });
    let g = greens_apply(&evo, &p, &f, 0.0, &cfg).unwrap();
    let asm = assemble(&s, &AssemblyConfig::new(32, 256, 8.0)).unwrap();
    let fv = asm.sample(|j, x, t| if j == 0 { (2.0 * PI * x).sin() / t.cosh() } else { 0.0 });
    let b = solve_bounded(&asm, &fv, &BoundedConfig::default()).unwrap();
    let m0 = 128;
    assert!(asm.time(m0).abs() < 1e-12);
    let mut worst = 0.0f64;
    for i in 0..32 {
        worst = worst.max((b.at(&asm, 0, i, m0) - g.u.get(0, 2 * i)).abs());
        worst = worst.max(b.at(&asm, 1, i, m0).abs());
    }
    assert!(worst < 2e-3, "{worst}");
    // explicit oracle: u_1(x, 0) = int_{-inf}^0 e^s sin(2 pi (x + s)) sech(s) ds
    let oracle = |x: f64| {
        let n = 40_000;
        let h = 40.0 / n as f64;
        (0..=n)
            .map(|k| {
                let sv = -40.0 + k as f64 * h;
                let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                w * sv.exp() * (2.0 * PI * (x + sv)).sin() / sv.cosh()
            })
            .sum::<f64>()
            * h
            / 3.0
    };
    for i in [0, 5, 17, 40] {
        let x = i as f64 / 64.0;
        assert!((g.u.get(0, i) - oracle(x)).abs() < 1e-3);
    }
}

#[test]
fn singular_values_separate_singular_and_regular_systems() {
    let singular = sys(&["1", "-1"], &[&["1", "2"], &["0.5", "1"]]);
    let lv = svd_trace(
        &singular,
        &[AssemblyConfig::new(8, 20, 10.0), AssemblyConfig::new(16, 40, 10.0)],
    )
    .unwrap();
    assert!(lv[1].relative < 1e-4, "{lv:?}");
    let regular = decoupled();
    let lv = svd_trace(&regular, &[AssemblyConfig::new(8, 20, 10.0), AssemblyConfig::new(16, 40, 10.0)]).unwrap();
    assert!(lv.iter().all(|l| l.relative > 1e-2), "{lv:?}");
}

#[test]
fn detect_flags_the_rotating_system() {
    let s = sys(&["1", "-1"], &[&["1", "1"], &["-3", "-1"]]);
    let cfg = DichotomyConfig { n_points: 16, svd_levels: vec![(8, 20)], ..Default::default() };
    let r = detect(&s, &cfg).unwrap();
    assert_eq!(r.verdict, DichotomyVerdict::NoDichotomy);
    assert_eq!(r.route, Route::Monodromy);
}

#[test]
fn detect_confirms_the_decoupled_system() {
    let s = decoupled();
    let cfg = DichotomyConfig { n_points: 16, svd_levels: vec![(8, 20), (16, 40)], ..Default::default() };
    let r = detect(&s, &cfg).unwrap();
    assert_eq!(r.verdict, DichotomyVerdict::Dichotomy, "{:?}", r.notes);
    assert!(r.off_block_mass(2, &[0]).unwrap() < 1e-3);
    let fit = r.fit.unwrap();
    assert!((fit.omega - 1.0).abs() < 0.1);
    assert!(r.idempotence_defect.unwrap() < 1e-6);
    assert_eq!(r.component_rank.unwrap(), vec![1.0, 0.0]);
}
