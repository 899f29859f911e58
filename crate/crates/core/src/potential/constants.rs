//! Grid estimates of the structural constants of a double well.

use super::{chi, sym_eigenvalues, Point, Potential, PotentialError, A_MINUS, A_PLUS};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Radii at which `ω_r` is tabulated.
pub const OMEGA_RADII: [f64; 7] = [0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0];

/// Smallest `δ̄` tried by the dyadic search.
const DELTA_BAR_FLOOR: f64 = 1.0 / (1u64 << 30) as f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// Radius beyond which `W ≥ mu0`.
    #[serde(rename = "R")]
    pub r: f64,
    pub mu0: f64,
    pub delta_bar: f64,
    pub w_lo: f64,
    pub w_hi: f64,
    pub delta0: f64,
    pub lambda0: f64,
    /// `(r, ω_r)` pairs with `W ≥ ω_r χ²` on `{χ ≤ r}`.
    pub omega_r: Vec<(f64, f64)>,
    pub grid_n: usize,
    pub search_box: [[f64; 2]; 2],
}

impl HypothesisReport {
    /// `ω_r` for the smallest tabulated radius `≥ r` (the last entry otherwise).
    pub fn omega_at(&self, r: f64) -> f64 {
        self.omega_r
            .iter()
            .find(|(rr, _)| *rr >= r)
            .or(self.omega_r.last())
            .map(|(_, w)| *w)
            .unwrap_or(0.0)
    }

    /// `√(2w̲)δ₀(δ̄−δ₀) − δ₀²(1+2w̄)/2`.
    pub fn lambda0_formula(&self) -> f64 {
        lambda0(self.w_lo, self.w_hi, self.delta_bar, self.delta0)
    }

    /// Ratio condition on `δ₀`: `δ₀/(δ̄−δ₀) < 2√(2w̲)/(1+2w̄)`.
    pub fn ratio_condition_holds(&self) -> bool {
        self.delta0 / (self.delta_bar - self.delta0)
            < 2.0 * (2.0 * self.w_lo).sqrt() / (1.0 + 2.0 * self.w_hi)
    }

    /// Radius bound for profiles with action at most `m + lambda`
    /// (an `L∞` bound derived from `√(2μ₀)·r ≤ m + λ` on an annulus crossing).
    pub fn linf_radius(&self, m: f64, lambda: f64) -> f64 {
        2.0 * self.r.max((m + lambda) / (2.0 * self.mu0).sqrt())
    }
}

fn lambda0(w_lo: f64, w_hi: f64, delta_bar: f64, delta0: f64) -> f64 {
    (2.0 * w_lo).sqrt() * delta0 * (delta_bar - delta0) - 0.5 * delta0 * delta0 * (1.0 + 2.0 * w_hi)
}

/// Points of two polar grids of radius `radius` centred on the wells.
fn ball_samples(radius: f64, n: usize) -> Vec<Point> {
    let mut pts = Vec::with_capacity(2 * (n * n + 1));
    for a in [A_MINUS, A_PLUS] {
        pts.push(a);
        for k in 1..=n {
            let rho = radius * k as f64 / n as f64;
            for l in 0..n {
                let th = std::f64::consts::TAU * l as f64 / n as f64;
                pts.push([a[0] + rho * th.cos(), a[1] + rho * th.sin()]);
            }
        }
    }
    pts
}

fn box_samples(search_box: [[f64; 2]; 2], n: usize) -> Vec<Point> {
    let [[x0, x1], [y0, y1]] = search_box;
    let mut pts = Vec::with_capacity(n * n);
    for i in 0..n {
        let x = x0 + (x1 - x0) * i as f64 / (n - 1) as f64;
        for j in 0..n {
            pts.push([x, y0 + (y1 - y0) * j as f64 / (n - 1) as f64]);
        }
    }
    pts
}

/// `(¼ min λ_min(D²W), ½ max λ_max(D²W))` over `{χ ≤ radius}`.
///
/// The upper constant is twice the spectral quarter so that both the
/// Hessian bound `D²W ≤ 4w̄` and the value bound `W ≤ w̄χ²` hold.
fn hessian_bounds(p: &Potential, radius: f64, n: usize) -> (f64, f64) {
    ball_samples(radius, n)
        .par_iter()
        .map(|&x| sym_eigenvalues(&p.hess(x)))
        .collect::<Vec<_>>()
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
            (lo.min(0.25 * a), hi.max(0.5 * b))
        })
}

/// Estimates `R, μ₀, δ̄, w̲, w̄, δ₀, λ₀` and `ω_r` on sampling grids.
pub fn estimate_constants(
    p: &Potential,
    search_box: [[f64; 2]; 2],
    grid_n: usize,
) -> Result<HypothesisReport, PotentialError> {
    if grid_n < 64 {
        return Err(PotentialError::Parameter(format!(
            "grid_n must be at least 64, got {grid_n}"
        )));
    }
    let [[x0, x1], [y0, y1]] = search_box;
    if !(x0 < x1 && y0 < y1) {
        return Err(PotentialError::Parameter("empty search box".into()));
    }

    let samples: Vec<(f64, f64)> = box_samples(search_box, grid_n)
        .par_iter()
        .map(|&x| ((x[0] * x[0] + x[1] * x[1]).sqrt(), p.value(x)))
        .collect();
    let r_cap = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    let mut r = 2.0;
    let mu0 = loop {
        if r >= r_cap {
            return Err(PotentialError::Hypothesis {
                hypothesis: "(W2)",
                reason: format!("no radius below {r_cap:.3} with W bounded away from 0 outside"),
            });
        }
        let inf = samples
            .iter()
            .filter(|s| s.0 > r)
            .map(|s| s.1)
            .fold(f64::INFINITY, f64::min);
        if inf > 0.0 {
            break inf;
        }
        r += 0.5;
    };

    let mut delta_bar = 0.125;
    let (w_lo, w_hi) = loop {
        let (lo, hi) = hessian_bounds(p, 2.0 * delta_bar, grid_n);
        if lo > 0.0 && hi > lo {
            break (lo, hi);
        }
        delta_bar *= 0.5;
        if delta_bar < DELTA_BAR_FLOOR {
            return Err(PotentialError::Hypothesis {
                hypothesis: "(W1)",
                reason: "Hessian is not positive definite on any ball around the wells".into(),
            });
        }
    };

    // maximiser of λ₀(δ₀) = aδ₀(δ̄−δ₀) − bδ₀²
    let a = (2.0 * w_lo).sqrt();
    let b = 0.5 * (1.0 + 2.0 * w_hi);
    let delta0 = a * delta_bar / (2.0 * (a + b));
    let lambda0 = lambda0(w_lo, w_hi, delta_bar, delta0);

    let omega_r = OMEGA_RADII
        .iter()
        .map(|&rad| {
            let w = ball_samples(rad, grid_n)
                .par_iter()
                .filter_map(|&x| {
                    let c = chi(x);
                    (c > 1e-12 && c <= rad).then(|| p.value(x) / (c * c))
                })
                .collect::<Vec<_>>()
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            (rad, w)
        })
        .collect();

    Ok(HypothesisReport {
        r,
        mu0,
        delta_bar,
        w_lo,
        w_hi,
        delta0,
        lambda0,
        omega_r,
        grid_n,
        search_box,
    })
}

/// Result of sampling a potential against the double-well hypotheses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialAudit {
    pub min_value: f64,
    pub max_evenness_defect: f64,
    /// Samples with `W < 1e-12` farther than `1e-6` from both wells.
    pub spurious_zeros: usize,
    /// Worst violation of `w̲χ² ≤ W ≤ w̄χ²` on `{χ ≤ 2δ̄}` (0 when satisfied).
    pub quadratic_bound_violation: f64,
}

impl PotentialAudit {
    pub fn passed(&self) -> bool {
        self.min_value >= 0.0
            && self.max_evenness_defect == 0.0
            && self.spurious_zeros == 0
            && self.quadratic_bound_violation <= 1e-12
    }
}

pub fn audit_potential(
    p: &Potential,
    report: &HypothesisReport,
    grid_n: usize,
) -> PotentialAudit {
    let pts = box_samples(report.search_box, grid_n);
    let mut min_value = f64::INFINITY;
    let mut even = 0.0f64;
    let mut spurious = 0;
    for x in &pts {
        let w = p.value(*x);
        min_value = min_value.min(w);
        even = even.max((w - p.value([-x[0], x[1]])).abs());
        if w < 1e-12 && chi(*x) > 1e-6 {
            spurious += 1;
        }
    }
    let mut viol = 0.0f64;
    for x in ball_samples(2.0 * report.delta_bar, grid_n) {
        let c2 = chi(x).powi(2);
        let w = p.value(x);
        viol = viol.max(report.w_lo * c2 - w).max(w - report.w_hi * c2);
    }
    PotentialAudit {
        min_value,
        max_evenness_defect: even,
        spurious_zeros: spurious,
        quadratic_bound_violation: viol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BOX: [[f64; 2]; 2] = [[-4.0, 4.0], [-4.0, 4.0]];

    #[test]
    fn ginzburg_landau_constants() {
        let rep = estimate_constants(&Potential::GinzburgLandau, BOX, 96).unwrap();
        assert_eq!(rep.r, 2.0);
        // |u| > 2 implies |u² − 1| ≥ 3
        assert!(rep.mu0 >= 2.25, "mu0 = {}", rep.mu0);
        assert!(rep.lambda0 > 0.0);
        assert!(rep.w_lo > 0.0 && rep.w_lo < rep.w_hi);
        assert!(rep.delta_bar > 0.0 && rep.delta_bar <= 0.125);
        assert!(rep.ratio_condition_holds());
        assert!((rep.lambda0 - rep.lambda0_formula()).abs() < 1e-18);
        assert!(rep.omega_r.iter().all(|(_, w)| *w > 0.0));
    }

    #[test]
    fn channel_constants() {
        let p = Potential::channel(0.9, 0.05).unwrap();
        let rep = estimate_constants(&p, BOX, 96).unwrap();
        assert!(rep.lambda0 > 0.0);
        assert!(rep.mu0 > 0.0);
        assert!(rep.ratio_condition_holds());
        let audit = audit_potential(&p, &rep, 96);
        assert!(audit.passed(), "{audit:?}");
    }

    #[test]
    fn delta0_maximises_lambda0() {
        let rep = estimate_constants(&Potential::GinzburgLandau, BOX, 64).unwrap();
        for f in [0.5, 0.9, 1.1, 1.5] {
            let d = rep.delta0 * f;
            assert!(lambda0(rep.w_lo, rep.w_hi, rep.delta_bar, d) <= rep.lambda0);
        }
    }

    #[test]
    fn small_grids_are_rejected() {
        assert!(matches!(
            estimate_constants(&Potential::GinzburgLandau, BOX, 32),
            Err(PotentialError::Parameter(_))
        ));
    }

    #[test]
    fn degenerate_wells_fail_w1() {
        // bare channel form: D²W(a±) is singular in u₂
        let p = Potential::channel(0.9, 0.0).unwrap();
        match estimate_constants(&p, BOX, 64) {
            Err(PotentialError::Hypothesis { hypothesis, .. }) => assert_eq!(hypothesis, "(W1)"),
            other => panic!("expected (W1) failure, got {other:?}"),
        }
    }

    #[test]
    fn json_uses_fixed_key_names() {
        let rep = estimate_constants(&Potential::GinzburgLandau, BOX, 64).unwrap();
        let v: serde_json::Value = serde_json::to_value(&rep).unwrap();
        for k in ["R", "mu0", "delta_bar", "w_lo", "w_hi", "delta0", "lambda0", "omega_r"] {
            assert!(v.get(k).is_some(), "missing {k}");
        }
        assert!(v["omega_r"][0].as_array().unwrap().len() == 2);
    }
}
