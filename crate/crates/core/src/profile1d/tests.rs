use super::*;
use crate::potential::estimate_constants;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXACT_GL: f64 = 0.942_809_041_582_063_4; // 2√2/3

fn tanh_profile(grid: Grid1D) -> Profile {
    Profile::from_fn(grid, |x| [(x / 2f64.sqrt()).tanh(), 0.0])
}

fn random_profile(grid: Grid1D, rng: &mut ChaCha8Rng) -> Profile {
    let a: f64 = rng.gen_range(-1.0..1.0);
    let b: f64 = rng.gen_range(0.3..2.0);
    let mut p = Profile::from_fn(grid, |x| {
        [(x / b).tanh(), a * (-x * x).exp()]
    });
    for v in p.half_mut().iter_mut().skip(1) {
        v[0] += rng.gen_range(-0.01..0.01);
        v[1] += rng.gen_range(-0.05..0.05);
    }
    p.clamp_boundary();
    p
}

/// Five-point Gauss–Legendre rule on `[a, b]`.
fn gauss5<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let nodes = [
        (0.0, 0.568_888_888_888_888_9),
        (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (0.906_179_845_938_664, 0.236_926_885_056_189_1),
        (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    ];
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    nodes.iter().map(|(x, w)| w * f(m + r * x)).sum::<f64>() * r
}

#[test]
fn tanh_profile_has_the_exact_action() {
    let g = Grid1D::new(20.0, 4001).unwrap();
    let v = tanh_profile(g).action(&Potential::GinzburgLandau);
    assert!((v - EXACT_GL).abs() < 1e-4, "{v}");
}

#[test]
fn ramp_matches_quadrature_oracle() {
    let g = Grid1D::new(20.0, 4001).unwrap();
    let v = Profile::ramp(g).action(&Potential::GinzburgLandau);
    // kinetic ½·2 plus ∫(x²−1)²/4 on [−1, 1], a quartic, so Gauss is exact
    let oracle = 1.0 + gauss5(|x| 0.25 * (x * x - 1.0).powi(2), -1.0, 1.0);
    assert!((v - oracle).abs() < 1e-8, "{v} vs {oracle}");
}

#[test]
fn zero_potential_leaves_the_kinetic_part() {
    let g = Grid1D::new(5.0, 201).unwrap();
    let p = Profile::from_fn(g, |x| [x.clamp(-2.0, 2.0) / 2.0, 0.3 * (-x * x).exp()]);
    let full = p.full();
    let h = g.h();
    let kin: f64 = full
        .windows(2)
        .map(|c| 0.5 * ((c[1][0] - c[0][0]).powi(2) + (c[1][1] - c[0][1]).powi(2)) / h)
        .sum();
    assert!((p.action(&Potential::Zero) - kin).abs() < 1e-13);
}

#[test]
fn half_and_full_actions_agree() {
    let g = Grid1D::new(6.0, 301).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pot = Potential::channel(0.9, 0.05).unwrap();
    for _ in 0..5 {
        let p = random_profile(g, &mut rng);
        let a = p.action(&pot);
        let b = full_action(&g, &p.full(), &pot);
        assert!((a - b).abs() < 1e-12 * a.max(1.0));
        let c = g.center();
        let split = p.action_on(&pot, 0, c) + p.action_on(&pot, c, g.n() - 1);
        assert!((split - b).abs() < 1e-12 * b.max(1.0));
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let g = Grid1D::new(4.0, 161).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pot = Potential::channel(0.9, 0.05).unwrap();
    let p = random_profile(g, &mut rng);
    let grad = p.action_gradient(&pot);
    let eps = 1e-6;
    for _ in 0..50 {
        let i = rng.gen_range(0..g.half_len() - 1);
        let k = if i == 0 { 1 } else { rng.gen_range(0..2) };
        let mut pp = p.clone();
        pp.half_mut()[i][k] += eps;
        let mut pm = p.clone();
        pm.half_mut()[i][k] -= eps;
        let fd = (pp.action(&pot) - pm.action(&pot)) / (2.0 * eps);
        let err = (fd - grad[i][k]).abs() / grad[i][k].abs().max(1e-3);
        assert!(err < 1e-6, "node {i} comp {k}: fd {fd} vs {}", grad[i][k]);
    }
}

#[test]
fn full_gradient_of_a_mirrored_profile_is_mirrored() {
    let g = Grid1D::new(4.0, 161).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let p = random_profile(g, &mut rng);
    let full = full_gradient(&g, &p.full(), &Potential::GinzburgLandau);
    let n = g.n();
    for i in 0..n {
        let j = n - 1 - i;
        assert!((full[i][0] + full[j][0]).abs() < 1e-12);
        assert!((full[i][1] - full[j][1]).abs() < 1e-12);
    }
}

#[test]
fn symmetrize_fixes_symmetric_profiles() {
    let g = Grid1D::new(8.0, 401).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let pot = Potential::channel(0.9, 0.05).unwrap();
    let p = random_profile(g, &mut rng);
    let s = symmetrize(&g, &p.full(), &pot, 1e-3).unwrap();
    for (a, b) in s.profile.half().iter().zip(p.half()) {
        assert!((a[0] - b[0]).abs() < 1e-15 && (a[1] - b[1]).abs() < 1e-15);
    }
}

#[test]
fn symmetrize_shifted_profile_does_not_increase_action() {
    let g = Grid1D::new(10.0, 501).unwrap();
    let pot = Potential::GinzburgLandau;
    let p = Profile::from_fn(g, |x| [(x / 2f64.sqrt()).tanh(), 0.2 * (-x * x).exp()]);
    let mut full = p.full();
    full.rotate_right(2);
    full[0] = full[2];
    full[1] = full[2];
    let v = full_action(&g, &full, &pot);
    let s = symmetrize(&g, &full, &pot, 1e-3).unwrap();
    assert!(s.profile.action(&pot) <= v + 1e-12);
    assert!(s.profile.sign_condition_holds());
}

#[test]
fn symmetrize_is_reflection_equivariant() {
    let g = Grid1D::new(8.0, 401).unwrap();
    let pot = Potential::channel(0.9, 0.05).unwrap();
    let full: Vec<Point> = g
        .nodes()
        .iter()
        .map(|&x| [((x - 0.37) / 1.3).tanh(), 0.4 * (-(x - 0.2) * (x - 0.2)).exp()])
        .collect();
    let mirrored: Vec<Point> = full.iter().rev().map(|p| [-p[0], p[1]]).collect();
    let a = symmetrize(&g, &full, &pot, 1e-2).unwrap();
    let b = symmetrize(&g, &mirrored, &pot, 1e-2).unwrap();
    for (p, q) in a.profile.half().iter().zip(b.profile.half()) {
        assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
    }
}

#[test]
fn symmetrize_rejects_non_connections() {
    let g = Grid1D::new(4.0, 161).unwrap();
    let full = vec![[1.0, 0.0]; g.n()];
    assert!(matches!(
        symmetrize(&g, &full, &Potential::GinzburgLandau, 1e-3),
        Err(ProfileError::Boundary { .. })
    ));
    // with a loose boundary tolerance the constant path is admissible but
    // q₁ never changes sign
    let full = vec![[0.5, 0.0]; g.n()];
    assert!(matches!(
        symmetrize(&g, &full, &Potential::GinzburgLandau, 1.0),
        Err(ProfileError::NotAConnection)
    ));
}

#[test]
fn minimize_reaches_the_exact_value_from_the_ramp() {
    let g = Grid1D::new(20.0, 2001).unwrap();
    let res = minimize(&Profile::ramp(g), &Potential::GinzburgLandau, &MinimizeOptions::default()).unwrap();
    assert!(res.converged, "residual {}", res.residual);
    assert!((res.action - EXACT_GL).abs() < 1e-3, "{}", res.action);
    for w in res.history.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
    assert!(res.profile.el_residual_max(&Potential::GinzburgLandau) < 1e-8);
    let again = minimize(&res.profile, &Potential::GinzburgLandau, &MinimizeOptions::default()).unwrap();
    assert_eq!(again.iterations, 0);
    assert_eq!(again.profile.half(), res.profile.half());
}

#[test]
fn non_converged_runs_are_flagged() {
    let g = Grid1D::new(20.0, 2001).unwrap();
    let opts = MinimizeOptions {
        max_iter: 3,
        ..MinimizeOptions::default()
    };
    let res = minimize(&Profile::ramp(g), &Potential::GinzburgLandau, &opts).unwrap();
    assert!(!res.converged);
    assert!(matches!(res.into_minimizer(), Err(ProfileError::NotConverged { .. })));
}

#[test]
fn tail_truncation_respects_the_bound() {
    let pot = Potential::GinzburgLandau;
    let hyp = estimate_constants(&pot, [[-4.0, 4.0], [-4.0, 4.0]], 64).unwrap();
    let g = Grid1D::new(20.0, 2001).unwrap();
    let q = tanh_profile(g);
    let full = q.full();
    let delta = 0.05f64.min(1.9 * hyp.delta_bar);
    let t0 = (g.center()..g.n())
        .find(|&i| dist(full[i], A_PLUS) <= delta)
        .unwrap();
    let d = dist(full[t0], A_PLUS);
    let cut = truncate_tail(&q, t0, d, &hyp, &pot).unwrap();
    assert!(cut.margin >= 0.0, "margin {}", cut.margin);
    assert!(cut.profile.sign_condition_holds());
    // bridge cost alone is within δ²/2 + w̄δ²
    let bridge = cut.modified_action - cut.head_action;
    assert!(bridge <= d * d / 2.0 + hyp.w_hi * d * d + 1e-12);
}

#[test]
fn tail_truncation_is_idempotent_on_flat_tails() {
    let pot = Potential::GinzburgLandau;
    let hyp = estimate_constants(&pot, [[-4.0, 4.0], [-4.0, 4.0]], 64).unwrap();
    let g = Grid1D::new(10.0, 1001).unwrap();
    let q = Profile::ramp(g);
    let t0 = g.center() + (2.0 / g.h()).round() as usize;
    let cut = truncate_tail(&q, t0, 0.0, &hyp, &pot).unwrap();
    assert_eq!(cut.profile.half(), q.half());
}

#[test]
fn tail_truncation_near_the_boundary_is_a_geometry_error() {
    let pot = Potential::GinzburgLandau;
    let hyp = estimate_constants(&pot, [[-4.0, 4.0], [-4.0, 4.0]], 64).unwrap();
    let g = Grid1D::new(10.0, 1001).unwrap();
    let q = Profile::ramp(g);
    assert!(matches!(
        truncate_tail(&q, g.n() - 3, 0.0, &hyp, &pot),
        Err(ProfileError::Geometry(_))
    ));
}
