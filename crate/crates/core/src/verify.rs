//! Machine-checkable forms of the a priori estimates.
//!
//! Every check yields an [`AuditResult`] with a signed margin (positive
//! means satisfied) and the tolerance it was judged against. Failures are
//! results, not errors.

use crate::potential::{chi, HypothesisReport, Potential, A_PLUS};
use crate::profile1d::{dist, h1_distance, l2_distance, truncate_tail, HeteroclinicAtlas, Profile};
use crate::strip2d::{renormalized_action, ExtendOptions, Extension, Field, Level, SolutionKind, SolutionReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditResult {
    pub name: String,
    pub passed: bool,
    pub margin: f64,
    pub context: BTreeMap<String, f64>,
}

impl AuditResult {
    /// Passed iff `margin ≥ −tolerance`; the tolerance is stored in `context`.
    pub fn new<'a>(
        name: impl Into<String>,
        margin: f64,
        tolerance: f64,
        context: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Self {
        let mut ctx: BTreeMap<String, f64> = context.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        ctx.insert("tolerance".into(), tolerance);
        Self {
            name: name.into(),
            passed: margin.is_finite() && margin >= -tolerance,
            margin,
            context: ctx,
        }
    }
}

pub fn all_passed(results: &[AuditResult]) -> bool {
    results.iter().all(|r| r.passed)
}

/// `min over node pairs (σ, τ) with W ≥ μ > 0 on [σ, τ]` of
/// `V_(σ,τ)(q) − √(2μ)|q(τ) − q(σ)|`, and the largest action it saw.
fn stime1dim_margin(q: &Profile, pot: &Potential) -> (f64, usize) {
    let g = q.grid();
    let h = g.h();
    let full = q.full();
    let w: Vec<f64> = full.iter().map(|p| pot.value(*p)).collect();
    let mut prefix = vec![0.0; full.len()];
    for i in 1..full.len() {
        let d = dist(full[i], full[i - 1]);
        prefix[i] = prefix[i - 1] + 0.5 * d * d / h + 0.5 * h * (w[i] + w[i - 1]);
    }
    (0..full.len())
        .into_par_iter()
        .map(|a| {
            let mut mu = w[a];
            let mut worst = f64::INFINITY;
            let mut pairs = 0;
            for b in a + 1..full.len() {
                mu = mu.min(w[b]);
                if mu <= 0.0 {
                    break;
                }
                let lhs = prefix[b] - prefix[a];
                worst = worst.min(lhs - (2.0 * mu).sqrt() * dist(full[a], full[b]));
                pairs += 1;
            }
            (worst, pairs)
        })
        .reduce(|| (f64::INFINITY, 0), |x, y| (x.0.min(y.0), x.1 + y.1))
}

/// One result per estimate and profile: the `L∞` radius, tail
/// concentration, the one-dimensional lower bound, the tail-truncation
/// bound and the Euler–Lagrange residual. Ordered by estimate, then profile.
pub fn audit_profiles(
    profiles: &[Profile],
    m: f64,
    hyp: &HypothesisReport,
    pot: &Potential,
    el_tol: f64,
) -> Vec<AuditResult> {
    let lambda = hyp.lambda0;
    let r_lambda = hyp.linf_radius(m, lambda);
    let mut out = Vec::new();
    for (k, q) in profiles.iter().enumerate() {
        let norm = q.linf_norm();
        out.push(AuditResult::new(
            format!("linf_bound[{k}]"),
            r_lambda - norm,
            0.0,
            [("r_lambda", r_lambda), ("linf_norm", norm), ("lambda", lambda)],
        ));
    }
    for (k, q) in profiles.iter().enumerate() {
        let g = q.grid();
        let full = q.full();
        let omega = hyp.omega_at(q.linf_norm() + 1.0);
        let t_formula = (m + lambda) / (omega * hyp.delta0 * hyp.delta0);
        let t_measured = (0..full.len())
            .filter(|&i| chi(full[i]) >= hyp.delta_bar)
            .map(|i| g.x(i).abs())
            .fold(0.0, f64::max);
        out.push(AuditResult::new(
            format!("tail_concentration[{k}]"),
            t_formula - t_measured,
            g.h(),
            [("t_formula", t_formula), ("t_measured", t_measured), ("omega", omega)],
        ));
    }
    for (k, q) in profiles.iter().enumerate() {
        let (margin, pairs) = stime1dim_margin(q, pot);
        let slack = 1e-12 * q.action(pot).max(1.0);
        out.push(AuditResult::new(
            format!("stime1dim[{k}]"),
            if pairs == 0 { 0.0 } else { margin },
            slack,
            [("pairs", pairs as f64), ("h", q.grid().h())],
        ));
    }
    for (k, q) in profiles.iter().enumerate() {
        let g = q.grid();
        let full = q.full();
        let t0 = (g.center() + 1..g.n()).find(|&i| dist(full[i], A_PLUS) <= hyp.delta_bar);
        let name = format!("tail_truncation[{k}]");
        let res = t0
            .ok_or_else(|| "profile never enters the δ̄-ball".to_string())
            .and_then(|t0| {
                truncate_tail(q, t0, dist(full[t0], A_PLUS), hyp, pot)
                    .map(|c| (t0, c))
                    .map_err(|e| e.to_string())
            });
        out.push(match res {
            Ok((t0, cut)) => AuditResult::new(
                name,
                cut.margin.min(cut.bound - m),
                1e-12 * m.max(1.0),
                [
                    ("t0", g.x(t0)),
                    ("delta", dist(full[t0], A_PLUS)),
                    ("bound", cut.bound),
                    ("head_action", cut.head_action),
                ],
            ),
            Err(_) => AuditResult::new(name, f64::NEG_INFINITY, 0.0, []),
        });
    }
    for (k, q) in profiles.iter().enumerate() {
        let r = q.el_residual_max(pot);
        out.push(AuditResult::new(
            format!("el_residual[{k}]"),
            10.0 * el_tol - r,
            0.0,
            [("residual", r), ("el_tol", el_tol)],
        ));
    }
    out
}

/// [`audit_profiles`] over the cluster representatives of an atlas.
pub fn audit_1d(atlas: &HeteroclinicAtlas, hyp: &HypothesisReport, pot: &Potential, el_tol: f64) -> Vec<AuditResult> {
    let reps: Vec<Profile> = atlas.minimizers().cloned().collect();
    audit_profiles(&reps, atlas.m, hyp, pot, el_tol)
}

/// Pairwise slice checks: the worst `φ_{c,(y₁,y₂)} − √(2μ)‖u₁ − u₂‖` over
/// pairs with `V ≥ c + μ > c` in between, and the largest slice distance.
fn slice_pair_margins(u: &Field, c: f64, v: &[f64]) -> (f64, usize, f64) {
    let ny = u.grid().ny();
    let k = u.grid().k();
    let gx = u.grid().grid_x;
    let mut prefix = vec![0.0; ny];
    for j in 1..ny {
        let d = l2_distance(&gx, u.slice(j), u.slice(j - 1));
        prefix[j] = prefix[j - 1] + d * d / (2.0 * k) + 0.5 * k * (v[j] + v[j - 1] - 2.0 * c);
    }
    (0..ny)
        .into_par_iter()
        .map(|a| {
            let mut mu = v[a] - c;
            let mut worst = f64::INFINITY;
            let mut pairs = 0;
            let mut diam = 0.0f64;
            for b in a + 1..ny {
                let d = l2_distance(&gx, u.slice(a), u.slice(b));
                diam = diam.max(d);
                mu = mu.min(v[b] - c);
                if mu > 0.0 {
                    worst = worst.min(prefix[b] - prefix[a] - (2.0 * mu).sqrt() * d);
                    pairs += 1;
                }
            }
            (worst, pairs, diam)
        })
        .reduce(
            || (f64::INFINITY, 0, 0.0),
            |x, y| (x.0.min(y.0), x.1 + y.1, x.2.max(y.2)),
        )
}

fn in_sublevel(q: &[crate::potential::Point], target: &Profile, level: &Level, v: f64, v_tol: f64) -> (f64, f64) {
    let d = h1_distance(&level.grid_x, q, target.half());
    (level.d0 - d, level.c + v_tol - v)
}

/// Checks on a solved strip: continuity, the two-dimensional lower bound,
/// the bounded-trajectory estimate, the lower bound on `m_c`, energy and
/// equipartition, Neumann data and seams, classification and membership of
/// the turning slices. `u` is the minimised (unextended) field.
pub fn audit_2d(u: &Field, ext: &Extension, level: &Level, pot: &Potential) -> Vec<AuditResult> {
    let report: &SolutionReport = &ext.report;
    let c = level.c;
    let v = u.slice_actions(pot);
    let phi = renormalized_action(u, c, pot);
    let scale = phi.abs().max(1.0);
    let mut out = Vec::new();

    let m = crate::strip2d::slice_metrics(u, level, pot);
    out.push(AuditResult::new(
        "continuity",
        -m.continuity_violation,
        m.continuity_slack,
        [("violation", m.continuity_violation)],
    ));

    let (worst, pairs, diam) = slice_pair_margins(u, c, &v);
    out.push(AuditResult::new(
        "stime2dim",
        if pairs == 0 { 0.0 } else { worst },
        1e-12 * scale,
        [("pairs", pairs as f64), ("k", u.grid().k())],
    ));

    let gap = level.m_star - c;
    let big_c = 1.0 / (2.0 * gap.max(f64::MIN_POSITIVE)).sqrt();
    out.push(AuditResult::new(
        "bounded_trajectory",
        big_c * phi - diam,
        1e-12 * scale,
        [("C", big_c), ("phi_c", phi), ("max_slice_distance", diam)],
    ));

    let opposite = l2_distance(&level.grid_x, u.slice(0), level.minus.half()) <= level.d0
        && l2_distance(&level.grid_x, u.slice(u.grid().ny() - 1), level.plus.half()) <= level.d0
        && level.star_holds;
    let lower = level.action_lower_bound();
    out.push(AuditResult::new(
        "m_c_lower_bound",
        if opposite { phi - lower } else { 0.0 },
        1e-12 * scale,
        [("phi_c", phi), ("bound", lower), ("applies", opposite as u8 as f64)],
    ));

    let energy_tol = 1e-2 * c.abs();
    out.push(AuditResult::new(
        "energy",
        energy_tol - report.energy_dev,
        0.0,
        [("energy_dev", report.energy_dev), ("bound", energy_tol)],
    ));
    out.push(AuditResult::new(
        "equipartition",
        1e-2 - report.equipartition_rel,
        0.0,
        [("gap", report.equipartition_gap), ("relative", report.equipartition_rel)],
    ));

    let neumann = [report.neumann_s, report.neumann_t]
        .into_iter()
        .flatten()
        .fold(f64::NEG_INFINITY, f64::max);
    if neumann.is_finite() {
        out.push(AuditResult::new(
            "neumann",
            report.neumann_tol - neumann,
            0.0,
            [("norm", neumann), ("neumann_tol", report.neumann_tol)],
        ));
    }
    if let Some(seam) = report.seam_residual {
        out.push(AuditResult::new(
            "seam_residual",
            5.0 * report.truncation_residual - seam,
            0.0,
            [("seam", seam), ("interior", report.truncation_residual)],
        ));
    }

    let consistent = match report.kind {
        SolutionKind::Heteroclinic => report.s_c.is_none() && report.t_c.is_none(),
        SolutionKind::HomoclinicLeft => report.s_c.is_some() && report.t_c.is_none(),
        SolutionKind::HomoclinicRight => report.s_c.is_none() && report.t_c.is_some(),
        SolutionKind::BrakeOrbit => report.s_c.is_some() && report.t_c.is_some() && report.period_half.is_some(),
    };
    out.push(AuditResult::new(
        "classification",
        if consistent { 0.0 } else { -1.0 },
        0.0,
        [("offset", level.offset)],
    ));

    // turning slices lie in the sublevel components; polished ends only
    // reach the level to within the polish's level tolerance
    let mut ends = Vec::new();
    let mut level_slack = 0.0;
    if let Some(p) = &ext.polish {
        let w = &p.window;
        let last = w.grid().ny() - 1;
        let vs = w.slice_actions(pot);
        level_slack = ExtendOptions::default().level_tol * level.offset;
        ends.push(("turning_minus", in_sublevel(w.slice(0), &level.minus, level, vs[0], report.v_tol)));
        ends.push(("turning_plus", in_sublevel(w.slice(last), &level.plus, level, vs[last], report.v_tol)));
    } else {
        let index = |y: f64| ((y - u.grid().y_start()) / u.grid().k()).round() as usize;
        if let Some(j) = report.s_c.map(index) {
            ends.push(("turning_minus", in_sublevel(u.slice(j), &level.minus, level, v[j], report.v_tol)));
        }
        if let Some(j) = report.t_c.map(index) {
            ends.push(("turning_plus", in_sublevel(u.slice(j), &level.plus, level, v[j], report.v_tol)));
        }
    }
    for (name, (dist_margin, level_margin)) in ends {
        out.push(AuditResult::new(
            name,
            dist_margin.min(level_margin),
            level_slack,
            [("distance_margin", dist_margin), ("level_margin", level_margin), ("v_tol", report.v_tol)],
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid1D;
    use crate::potential::estimate_constants;
    use crate::profile1d::{minimize, MinimizeOptions};

    fn gl_setup() -> (Profile, HypothesisReport, Potential) {
        let pot = Potential::GinzburgLandau;
        let g = Grid1D::new(10.0, 401).unwrap();
        let q = minimize(&Profile::ramp(g), &pot, &MinimizeOptions::default())
            .unwrap()
            .into_minimizer()
            .unwrap();
        let hyp = estimate_constants(&pot, [[-4.0, 4.0], [-4.0, 4.0]], 64).unwrap();
        (q, hyp, pot)
    }

    #[test]
    fn converged_minimizer_passes_every_one_dimensional_check() {
        let (q, hyp, pot) = gl_setup();
        let m = q.action(&pot);
        let res = audit_profiles(std::slice::from_ref(&q), m, &hyp, &pot, 1e-6);
        let names: Vec<&str> = res.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "linf_bound[0]",
                "tail_concentration[0]",
                "stime1dim[0]",
                "tail_truncation[0]",
                "el_residual[0]"
            ]
        );
        for r in &res {
            assert!(r.passed, "{r:?}");
            assert!(r.context.contains_key("tolerance"));
        }
    }

    #[test]
    fn oversized_profile_fails_the_linf_check() {
        let (q, hyp, pot) = gl_setup();
        let m = q.action(&pot);
        let mut big = q.clone();
        let r = hyp.linf_radius(m, hyp.lambda0);
        big.half_mut()[3][1] = 2.0 * r;
        let res = audit_profiles(&[big], m, &hyp, &pot, 1e-6);
        let linf = res.iter().find(|a| a.name == "linf_bound[0]").unwrap();
        assert!(!linf.passed);
        assert!(linf.margin < 0.0);
        assert!(!all_passed(&res));
        let el = res.iter().find(|a| a.name == "el_residual[0]").unwrap();
        assert!(!el.passed);
    }

    #[test]
    fn empty_input_gives_no_results() {
        let (_, hyp, pot) = gl_setup();
        assert!(audit_profiles(&[], 1.0, &hyp, &pot, 1e-6).is_empty());
        assert!(all_passed(&[]));
    }

    #[test]
    fn audits_are_deterministic() {
        let (q, hyp, pot) = gl_setup();
        let m = q.action(&pot);
        let a = audit_profiles(std::slice::from_ref(&q), m, &hyp, &pot, 1e-6);
        let b = audit_profiles(std::slice::from_ref(&q), m, &hyp, &pot, 1e-6);
        assert_eq!(a, b);
    }

    #[test]
    fn y_independent_field_has_exact_energy() {
        use crate::grid::Grid2D;
        use crate::strip2d::{classify_and_extend, detect_turning, slice_metrics, ExtendOptions};
        let (q, _, pot) = gl_setup();
        let level = Level::from_profiles(q.clone(), q.clone(), 0.0, 1e-3, 0.1, &pot);
        let u = Field::constant(Grid2D::new(*q.grid(), 5.0, 65).unwrap(), &q).unwrap();
        let metrics = slice_metrics(&u, &level, &pot);
        let turning = detect_turning(&metrics, &level, 1e-12).unwrap();
        let ext = classify_and_extend(&u, &turning, &level, &pot, &ExtendOptions::default()).unwrap();
        let res = audit_2d(&u, &ext, &level, &pot);
        let energy = res.iter().find(|a| a.name == "energy").unwrap();
        assert_eq!(energy.context["energy_dev"], 0.0);
        assert_eq!(energy.margin, energy.context["bound"]);
        assert!(all_passed(&res), "{res:?}");
        assert_eq!(res, audit_2d(&u, &ext, &level, &pot));
    }

    proptest::proptest! {
        #[test]
        fn pass_flag_matches_margin(margin in -1e3f64..1e3, tol in 0.0f64..1e2) {
            let r = AuditResult::new("p", margin, tol, [("x", margin)]);
            proptest::prop_assert_eq!(r.passed, margin >= -tol);
            proptest::prop_assert_eq!(r.context.len(), 2);
        }
    }

    #[test]
    fn pass_flag_respects_tolerance() {
        assert!(AuditResult::new("x", -1e-9, 1e-8, []).passed);
        assert!(!AuditResult::new("x", -1e-7, 1e-8, []).passed);
        assert!(!AuditResult::new("x", f64::NAN, 1.0, []).passed);
        assert_eq!(AuditResult::new("x", 0.0, 0.5, []).context["tolerance"], 0.5);
    }
}
