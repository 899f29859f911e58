//! Per-slice quantities, turning slices and the energy identity.

use super::{Field, Level, StripError};
use crate::potential::Potential;
use crate::profile1d::l2_distance;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceMetrics {
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    /// `½‖∂_y u‖²` by central differences (one-sided at the ends).
    pub kinetic: Vec<f64>,
    /// `kinetic − V`.
    pub energy: Vec<f64>,
    pub dist_minus: Vec<f64>,
    pub dist_plus: Vec<f64>,
    /// Worst `‖u_a − u_b‖² − ‖∂_y u‖²_{(a,b)}|y_b − y_a|` over slice pairs.
    pub continuity_violation: f64,
    /// Roundoff allowance for the check above.
    pub continuity_slack: f64,
}

impl SliceMetrics {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

fn weighted_sq(w: &[f64], a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    a.iter()
        .zip(b)
        .zip(w)
        .map(|((p, q), wi)| wi * ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)))
        .sum()
}

pub fn slice_metrics(u: &Field, level: &Level, pot: &Potential) -> SliceMetrics {
    let grid = u.grid();
    let ny = grid.ny();
    let k = grid.k();
    let gx = grid.grid_x;
    let w = gx.half_weights();
    let v = u.slice_actions(pot);
    let kinetic: Vec<f64> = (0..ny)
        .into_par_iter()
        .map(|j| {
            let (a, b, span) = if j == 0 {
                (1, 0, k)
            } else if j + 1 == ny {
                (ny - 1, ny - 2, k)
            } else {
                (j + 1, j - 1, 2.0 * k)
            };
            0.5 * weighted_sq(&w, u.slice(a), u.slice(b)) / (span * span)
        })
        .collect();
    let energy = kinetic.iter().zip(&v).map(|(t, vv)| t - vv).collect();
    let qm = level.minus.half();
    let qp = level.plus.half();
    let dist_minus = (0..ny).map(|j| l2_distance(&gx, u.slice(j), qm)).collect();
    let dist_plus = (0..ny).map(|j| l2_distance(&gx, u.slice(j), qp)).collect();

    // prefix sums of the cell kinetic density ‖Δu‖²/k
    let mut prefix = vec![0.0; ny];
    for j in 1..ny {
        prefix[j] = prefix[j - 1] + weighted_sq(&w, u.slice(j), u.slice(j - 1)) / k;
    }
    let violation = (0..ny)
        .into_par_iter()
        .map(|a| {
            let mut worst = f64::NEG_INFINITY;
            for b in a + 1..ny {
                let lhs = weighted_sq(&w, u.slice(a), u.slice(b));
                let rhs = (prefix[b] - prefix[a]) * (b - a) as f64 * k;
                worst = worst.max(lhs - rhs);
            }
            worst
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    let scale = prefix[ny - 1] * grid.length();
    SliceMetrics {
        y: (0..ny).map(|j| grid.y(j)).collect(),
        v,
        kinetic,
        energy,
        dist_minus,
        dist_plus,
        continuity_violation: violation,
        continuity_slack: 1e-12 * scale.max(1.0),
    }
}

/// Turning slices; `None` stands for `−∞` (for `s`) and `+∞` (for `t`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Turning {
    pub s: Option<usize>,
    pub t: Option<usize>,
    pub s_y: f64,
    pub t_y: f64,
    pub v_tol: f64,
}

impl Turning {
    pub fn both_finite(&self) -> bool {
        self.s.is_some() && self.t.is_some()
    }
}

/// `s_c`: last interior slice within `d₀` of `q⁻` with `V ≤ c + v_tol`;
/// `t_c`: first later interior slice with `V ≤ c + v_tol`. End slices are
/// anchors standing for `y = ∓∞` and never count. At `c = m` both are
/// infinite by convention.
pub fn detect_turning(metrics: &SliceMetrics, level: &Level, v_tol: f64) -> Result<Turning, StripError> {
    let ny = metrics.len();
    let c = level.c;
    let mut out = Turning {
        s: None,
        t: None,
        s_y: f64::NEG_INFINITY,
        t_y: f64::INFINITY,
        v_tol,
    };
    if level.offset == 0.0 || ny < 3 {
        return Ok(out);
    }
    let low = |j: usize| metrics.v[j] <= c + v_tol;
    out.s = (1..ny - 1)
        .rev()
        .find(|&j| low(j) && metrics.dist_minus[j] <= level.d0);
    let start = out.s.map_or(1, |s| s + 1);
    out.t = (start..ny - 1).find(|&j| low(j));
    if let Some(s) = out.s {
        out.s_y = metrics.y[s];
    }
    if let Some(t) = out.t {
        out.t_y = metrics.y[t];
    }
    if out.s_y >= out.t_y {
        return Err(StripError::Turning { s: out.s_y, t: out.t_y });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyAudit {
    /// `max |E_j + c|` strictly inside `(s_c, t_c)`.
    pub energy_dev: f64,
    pub energy_dev_rel: f64,
    /// `∫ kinetic` and `∫ (V − c)` over `[s_c, t_c]`.
    pub a: f64,
    pub b: f64,
    pub equipartition_gap: f64,
    pub equipartition_rel: f64,
    pub slices: usize,
}

/// Energy constancy and equipartition over the turning window (the whole
/// interior when a turning slice is infinite).
pub fn energy_audit(metrics: &SliceMetrics, turning: &Turning, c: f64) -> EnergyAudit {
    let ny = metrics.len();
    let lo = turning.s.unwrap_or(0);
    let hi = turning.t.unwrap_or(ny - 1);
    let mut dev = 0.0f64;
    for j in lo + 1..hi {
        dev = dev.max((metrics.energy[j] + c).abs());
    }
    let mut a = 0.0;
    let mut b = 0.0;
    for j in lo..hi {
        let dy = metrics.y[j + 1] - metrics.y[j];
        a += 0.5 * dy * (metrics.kinetic[j] + metrics.kinetic[j + 1]);
        b += 0.5 * dy * (metrics.v[j] + metrics.v[j + 1] - 2.0 * c);
    }
    let gap = (a - b).abs();
    // roundoff floor, so that A = B = 0 up to rounding counts as equal
    let span = metrics.y[hi] - metrics.y[lo];
    let denom = a.abs().max(b.abs()).max(1e-12 * c.abs() * span);
    EnergyAudit {
        energy_dev: dev,
        energy_dev_rel: dev / c.abs().max(f64::MIN_POSITIVE),
        a,
        b,
        equipartition_gap: gap,
        equipartition_rel: if denom > 0.0 { gap / denom } else { 0.0 },
        slices: hi.saturating_sub(lo + 1),
    }
}

/// Change of `φ` under `y ↦ y/s`: `f(s) = (1/s − 1)A + (s − 1)B`.
pub fn rescaling_defect(a: f64, b: f64, s: f64) -> f64 {
    (1.0 / s - 1.0) * a + (s - 1.0) * b
}
