//! One-dimensional connections between the wells.
//!
//! A [`Profile`] stores only the nodes with `x ≥ 0`; the other half is the
//! mirror image `q(−x) = (−q₁(x), q₂(x))`, so the symmetric class is exact.
//! The discrete action uses cell differences for `½|q̇|²` and the trapezoid
//! rule for `W(q)`; its Euler–Lagrange equation at interior nodes is
//! `−D₂q + ∇W(q) = 0` with the three-point second difference `D₂`.

mod atlas;
mod lbfgs;

pub use atlas::{build_atlas, classify_sublevel, AtlasOptions, Cluster, HeteroclinicAtlas, StartSummary, Sublevel};
pub use lbfgs::{minimize, MinimizeOptions, Minimized};

use crate::grid::{Grid1D, GridError};
use crate::potential::{HypothesisReport, Point, Potential, A_MINUS, A_PLUS};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("path does not connect the wells: first component never changes sign")]
    NotAConnection,
    #[error("boundary value {value:?} is farther than {tol} from {target:?}")]
    Boundary { value: Point, target: Point, tol: f64 },
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("minimisation stopped after {iterations} iterations with residual {residual:.3e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("symmetrisation could not reach action {target} (best {best})")]
    NoDescent { target: f64, best: f64 },
    #[error("atlas: {0}")]
    Atlas(String),
    #[error("sublevel classification matches both components (check cluster_eps)")]
    AtlasInconsistency,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Discretized symmetric path on `[-Lx, Lx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    grid: Grid1D,
    half: Vec<Point>,
    action: Option<f64>,
}

impl Profile {
    /// Builds a profile from its values at `x ≥ 0` (index 0 is `x = 0`).
    /// The first component at the origin is set to 0.
    pub fn from_half(grid: Grid1D, mut half: Vec<Point>) -> Result<Self, ProfileError> {
        if half.len() != grid.half_len() {
            return Err(ProfileError::Precondition(format!(
                "expected {} half-grid values, got {}",
                grid.half_len(),
                half.len()
            )));
        }
        if half.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(ProfileError::Precondition("non-finite profile value".into()));
        }
        half[0][0] = 0.0;
        Ok(Self {
            grid,
            half,
            action: None,
        })
    }

    /// Samples `f` at the nodes `x ≥ 0`.
    pub fn from_fn<F: Fn(f64) -> Point>(grid: Grid1D, f: F) -> Self {
        let c = grid.center();
        let half = (0..grid.half_len()).map(|j| f(grid.x(c + j))).collect();
        Self::from_half(grid, half).expect("sampled profile has the right length")
    }

    /// The ramp `z₀`: linear from `a₋` to `a₊` on `[-1, 1]`, constant outside.
    pub fn ramp(grid: Grid1D) -> Self {
        Self::from_fn(grid, |x| [x.clamp(-1.0, 1.0), 0.0])
    }

    /// Takes the `x ≥ 0` half of a full-grid path (no symmetry check).
    pub fn from_full(grid: Grid1D, full: &[Point]) -> Result<Self, ProfileError> {
        if full.len() != grid.n() {
            return Err(ProfileError::Precondition(format!(
                "expected {} nodes, got {}",
                grid.n(),
                full.len()
            )));
        }
        Self::from_half(grid, full[grid.center()..].to_vec())
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn half(&self) -> &[Point] {
        &self.half
    }

    pub fn half_mut(&mut self) -> &mut [Point] {
        self.action = None;
        &mut self.half
    }

    pub fn cached_action(&self) -> Option<f64> {
        self.action
    }

    pub(crate) fn set_cached_action(&mut self, v: f64) {
        self.action = Some(v);
    }

    /// Mirrored values on the full grid.
    pub fn full(&self) -> Vec<Point> {
        mirror_half(&self.half)
    }

    pub fn clamp_boundary(&mut self) {
        let last = self.half.len() - 1;
        self.half[last] = A_PLUS;
        self.action = None;
    }

    /// `|q(±Lx) − a±|`.
    pub fn boundary_distance(&self) -> f64 {
        dist(self.half[self.half.len() - 1], A_PLUS)
    }

    /// Clamps `q₁(x) > 0` for `x > 0`; returns whether any node moved.
    pub fn enforce_sign(&mut self) -> bool {
        let h = self.grid.h();
        let mut active = false;
        let last = self.half.len() - 1;
        for (j, p) in self.half.iter_mut().enumerate().take(last).skip(1) {
            let floor = 1e-9 * h * j as f64;
            if p[0] < floor {
                p[0] = floor;
                active = true;
            }
        }
        if active {
            self.action = None;
        }
        active
    }

    pub fn sign_condition_holds(&self) -> bool {
        self.half[1..].iter().all(|p| p[0] > 0.0)
    }

    pub fn action(&self, pot: &Potential) -> f64 {
        half_action(&self.grid, &self.half, pot)
    }

    /// Windowed action on the closed full-grid node range `[lo, hi]`.
    pub fn action_on(&self, pot: &Potential, lo: usize, hi: usize) -> f64 {
        action_on(&self.grid, &self.full(), pot, lo, hi)
    }

    /// Gradient of the discrete action with respect to the half-grid values.
    /// Entries for the fixed values (`q₁(0)` and the boundary node) are zero.
    pub fn action_gradient(&self, pot: &Potential) -> Vec<Point> {
        let mut g = vec![[0.0; 2]; self.half.len()];
        half_gradient(&self.grid, &self.half, pot, &mut g);
        mask_fixed(&mut g);
        g
    }

    /// `−D₂q + ∇W(q)` at the free half-grid nodes (0 at fixed entries).
    pub fn el_residual(&self, pot: &Potential) -> Vec<Point> {
        let w = self.grid.half_weights();
        let mut g = self.action_gradient(pot);
        for (gi, wi) in g.iter_mut().zip(&w) {
            gi[0] /= wi;
            gi[1] /= wi;
        }
        g
    }

    pub fn el_residual_max(&self, pot: &Potential) -> f64 {
        self.el_residual(pot)
            .iter()
            .fold(0.0, |m, r| m.max(r[0].abs()).max(r[1].abs()))
    }

    /// `L²(ℝ)` distance through the trapezoid rule.
    pub fn l2_distance(&self, other: &Profile) -> f64 {
        l2_distance(&self.grid, &self.half, &other.half)
    }

    /// `H¹(ℝ)` distance: `L²` part plus the cell-difference seminorm.
    pub fn h1_distance(&self, other: &Profile) -> f64 {
        h1_distance(&self.grid, &self.half, &other.half)
    }

    pub fn linf_norm(&self) -> f64 {
        self.half
            .iter()
            .fold(0.0, |m, p| m.max((p[0] * p[0] + p[1] * p[1]).sqrt()))
    }
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub(crate) fn mirror_half(half: &[Point]) -> Vec<Point> {
    let nh = half.len();
    let mut full = Vec::with_capacity(2 * nh - 1);
    for j in (1..nh).rev() {
        full.push([-half[j][0], half[j][1]]);
    }
    full.extend_from_slice(half);
    full
}

pub(crate) fn mask_fixed(g: &mut [Point]) {
    g[0][0] = 0.0;
    let last = g.len() - 1;
    g[last] = [0.0, 0.0];
}

/// Discrete action of a symmetric path from its half-grid values.
pub fn half_action(grid: &Grid1D, half: &[Point], pot: &Potential) -> f64 {
    let h = grid.h();
    let w = grid.half_weights();
    let mut kin = 0.0;
    for c in half.windows(2) {
        let d0 = c[1][0] - c[0][0];
        let d1 = c[1][1] - c[0][1];
        kin += d0 * d0 + d1 * d1;
    }
    let pot_sum: f64 = half.iter().zip(&w).map(|(p, wi)| wi * pot.value(*p)).sum();
    kin / h + pot_sum
}

/// Gradient of [`half_action`] at every half-grid entry (fixed ones included).
pub fn half_gradient(grid: &Grid1D, half: &[Point], pot: &Potential, out: &mut [Point]) {
    let h = grid.h();
    let nh = half.len();
    let s = 2.0 / h;
    for i in 0..nh {
        let wi = if i == 0 || i == nh - 1 { h } else { 2.0 * h };
        let gw = pot.grad(half[i]);
        let mut lap = [0.0; 2];
        for k in 0..2 {
            let mut acc = 0.0;
            if i > 0 {
                acc += half[i][k] - half[i - 1][k];
            }
            if i + 1 < nh {
                acc += half[i][k] - half[i + 1][k];
            }
            lap[k] = s * acc;
        }
        out[i] = [lap[0] + wi * gw[0], lap[1] + wi * gw[1]];
    }
}

/// Action of a full-grid path restricted to the node range `[lo, hi]`
/// (cells inside the range, trapezoid weights `½h` at its ends).
pub fn action_on(grid: &Grid1D, full: &[Point], pot: &Potential, lo: usize, hi: usize) -> f64 {
    assert!(lo <= hi && hi < full.len());
    let h = grid.h();
    if lo == hi {
        return 0.0;
    }
    let mut kin = 0.0;
    for i in lo..hi {
        let d = [full[i + 1][0] - full[i][0], full[i + 1][1] - full[i][1]];
        kin += d[0] * d[0] + d[1] * d[1];
    }
    let mut pot_sum = 0.5 * (pot.value(full[lo]) + pot.value(full[hi]));
    for p in &full[lo + 1..hi] {
        pot_sum += pot.value(*p);
    }
    0.5 * kin / h + h * pot_sum
}

pub fn full_action(grid: &Grid1D, full: &[Point], pot: &Potential) -> f64 {
    action_on(grid, full, pot, 0, full.len() - 1)
}

/// Gradient of [`full_action`] with respect to every node.
pub fn full_gradient(grid: &Grid1D, full: &[Point], pot: &Potential) -> Vec<Point> {
    let h = grid.h();
    let n = full.len();
    (0..n)
        .map(|i| {
            let wi = if i == 0 || i == n - 1 { 0.5 * h } else { h };
            let gw = pot.grad(full[i]);
            let mut out = [0.0; 2];
            for k in 0..2 {
                let mut acc = 0.0;
                if i > 0 {
                    acc += full[i][k] - full[i - 1][k];
                }
                if i + 1 < n {
                    acc += full[i][k] - full[i + 1][k];
                }
                out[k] = acc / h + wi * gw[k];
            }
            out
        })
        .collect()
}

pub(crate) fn l2_distance(grid: &Grid1D, a: &[Point], b: &[Point]) -> f64 {
    let w = grid.half_weights();
    a.iter()
        .zip(b)
        .zip(&w)
        .map(|((p, q), wi)| wi * ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn h1_distance(grid: &Grid1D, a: &[Point], b: &[Point]) -> f64 {
    let l2 = l2_distance(grid, a, b).powi(2);
    let h = grid.h();
    let mut semi = 0.0;
    for i in 0..a.len() - 1 {
        for k in 0..2 {
            let d = (a[i + 1][k] - b[i + 1][k]) - (a[i][k] - b[i][k]);
            semi += d * d;
        }
    }
    // both mirror halves
    (l2 + 2.0 * semi / h).sqrt()
}

#[inline]
fn lerp(a: Point, b: Point, t: f64) -> Point {
    if t == 0.0 {
        a
    } else if t == 1.0 {
        b
    } else {
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    }
}

/// Which half of the input the symmetrised profile was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeptHalf {
    Right,
    Left,
}

/// Outcome of [`symmetrize`].
#[derive(Debug, Clone)]
pub struct Symmetrized {
    pub profile: Profile,
    pub kept: KeptHalf,
    /// Windowed actions right of the last and left of the first sign change.
    pub right_action: f64,
    pub left_action: f64,
    pub input_action: f64,
    /// Whether descent steps were needed after resampling.
    pub polished: bool,
}

/// Replaces a connection by a symmetric one of no larger action.
///
/// The half after the last sign change of `q₁` (or before the first one,
/// whichever carries less action) is translated to the origin, reflected
/// with `(q₁, q₂)(t) ↦ (−q₁(−t), q₂(−t))` and resampled on the grid. The
/// resampling is linear; if it costs more than the input, the result is
/// relaxed by descent on the symmetric class until the bound holds.
pub fn symmetrize(
    grid: &Grid1D,
    full: &[Point],
    pot: &Potential,
    boundary_tol: f64,
) -> Result<Symmetrized, ProfileError> {
    let n = grid.n();
    if full.len() != n {
        return Err(ProfileError::Precondition(format!(
            "expected {n} nodes, got {}",
            full.len()
        )));
    }
    let tol = 10.0 * boundary_tol;
    for (value, target) in [(full[0], A_MINUS), (full[n - 1], A_PLUS)] {
        if dist(value, target) > tol {
            return Err(ProfileError::Boundary { value, target, tol });
        }
    }
    let first_nonneg = full.iter().position(|p| p[0] >= 0.0);
    let last_nonpos = full.iter().rposition(|p| p[0] <= 0.0);
    let (Some(i_left), Some(i_right)) = (first_nonneg, last_nonpos) else {
        return Err(ProfileError::NotAConnection);
    };
    if i_left == 0 || i_right == n - 1 {
        return Err(ProfileError::NotAConnection);
    }
    let h = grid.h();
    let input_action = full_action(grid, full, pot);

    // right crossing in cell [i_right, i_right+1], fraction th_r from i_right
    let a = full[i_right][0];
    let b = full[i_right + 1][0];
    let th_r = if a == 0.0 { 0.0 } else { -a / (b - a) };
    let p_r = lerp(full[i_right], full[i_right + 1], th_r);
    let right_action = {
        let rest = 1.0 - th_r;
        let d = [full[i_right + 1][0] - full[i_right][0], full[i_right + 1][1] - full[i_right][1]];
        let part = 0.5 * rest * (d[0] * d[0] + d[1] * d[1]) / h
            + 0.5 * rest * h * (pot.value(p_r) + pot.value(full[i_right + 1]));
        part + action_on(grid, full, pot, i_right + 1, n - 1)
    };

    // left crossing in cell [i_left-1, i_left], fraction th_l from i_left-1
    let a = full[i_left - 1][0];
    let b = full[i_left][0];
    let th_l = if b == 0.0 { 1.0 } else { a / (a - b) };
    let p_l = lerp(full[i_left - 1], full[i_left], th_l);
    let left_action = {
        let d = [full[i_left][0] - full[i_left - 1][0], full[i_left][1] - full[i_left - 1][1]];
        let part = 0.5 * th_l * (d[0] * d[0] + d[1] * d[1]) / h
            + 0.5 * th_l * h * (pot.value(full[i_left - 1]) + pot.value(p_l));
        part + action_on(grid, full, pot, 0, i_left - 1)
    };

    let nh = grid.half_len();
    let build = |kept: KeptHalf| -> Profile {
        let half: Vec<Point> = (0..nh)
            .map(|j| match kept {
                KeptHalf::Right => {
                    let i = i_right + j;
                    if i + 1 < n {
                        lerp(full[i], full[i + 1], th_r)
                    } else {
                        A_PLUS
                    }
                }
                KeptHalf::Left => {
                    if j < i_left {
                        let i = i_left - 1 - j;
                        let p = lerp(full[i], full[i + 1], th_l);
                        [-p[0], p[1]]
                    } else {
                        A_PLUS
                    }
                }
            })
            .collect();
        let mut prof = Profile::from_half(*grid, half).expect("length matches grid");
        prof.clamp_boundary();
        prof
    };

    let preferred = if right_action <= left_action {
        KeptHalf::Right
    } else {
        KeptHalf::Left
    };
    let other = match preferred {
        KeptHalf::Right => KeptHalf::Left,
        KeptHalf::Left => KeptHalf::Right,
    };
    let target = input_action + 1e-12;
    let mut best: Option<(Profile, KeptHalf, f64)> = None;
    for kept in [preferred, other] {
        let prof = build(kept);
        let v = prof.action(pot);
        if v <= target {
            let mut prof = prof;
            prof.set_cached_action(v);
            return Ok(Symmetrized {
                profile: prof,
                kept,
                right_action,
                left_action,
                input_action,
                polished: false,
            });
        }
        if best.as_ref().is_none_or(|b| v < b.2) {
            best = Some((prof, kept, v));
        }
    }
    let (start, kept, start_v) = best.expect("two candidates were built");
    let opts = MinimizeOptions {
        target_action: Some(input_action),
        max_iter: 2000,
        ..MinimizeOptions::default()
    };
    let res = minimize(&start, pot, &opts)?;
    let v = res.profile.action(pot);
    if v <= target {
        let mut prof = res.profile;
        prof.set_cached_action(v);
        Ok(Symmetrized {
            profile: prof,
            kept,
            right_action,
            left_action,
            input_action,
            polished: true,
        })
    } else {
        Err(ProfileError::NoDescent {
            target: input_action,
            best: v.min(start_v),
        })
    }
}

/// Result of [`truncate_tail`].
#[derive(Debug, Clone)]
pub struct TailCut {
    pub profile: Profile,
    /// Action of the modified path before re-symmetrisation.
    pub modified_action: f64,
    /// `V_(−Lx, t₀](q)`.
    pub head_action: f64,
    /// `V_(−Lx, t₀](q) + (δ²/(2L) + w̄δ²L)` with bridge length `L ≈ 1`.
    pub bound: f64,
    pub margin: f64,
    pub bridge_length: f64,
}

/// Cuts the tail after node `t0` and bridges linearly to `a₊` over a unit
/// length, then re-symmetrises.
pub fn truncate_tail(
    q: &Profile,
    t0: usize,
    delta: f64,
    hyp: &HypothesisReport,
    pot: &Potential,
) -> Result<TailCut, ProfileError> {
    let grid = *q.grid();
    let h = grid.h();
    let n = grid.n();
    if t0 <= grid.center() {
        return Err(ProfileError::Geometry("t0 must lie right of the origin".into()));
    }
    let cells = (1.0 / h).round().max(1.0) as usize;
    if t0 + cells > n - 1 {
        return Err(ProfileError::Geometry(format!(
            "t0 = {:.4} leaves no room for a unit bridge before Lx = {}",
            grid.x(t0),
            grid.half_length()
        )));
    }
    let full = q.full();
    let actual = dist(full[t0], A_PLUS);
    let speed = full
        .windows(2)
        .map(|c| dist(c[0], c[1]) / h)
        .fold(0.0, f64::max);
    if (actual - delta).abs() > h * speed + 1e-12 {
        return Err(ProfileError::Precondition(format!(
            "|q(t0) − a+| = {actual:.6} does not match delta = {delta:.6}"
        )));
    }
    if actual >= 2.0 * hyp.delta_bar {
        return Err(ProfileError::Precondition(format!(
            "|q(t0) − a+| = {actual:.3e} is not below 2·delta_bar = {:.3e}",
            2.0 * hyp.delta_bar
        )));
    }
    let mut modified = full.clone();
    let start = full[t0];
    for (k, slot) in modified.iter_mut().enumerate().skip(t0) {
        let s = (k - t0) as f64 / cells as f64;
        *slot = if s >= 1.0 { A_PLUS } else { lerp(start, A_PLUS, s) };
    }
    let modified_action = full_action(&grid, &modified, pot);
    let head_action = action_on(&grid, &full, pot, 0, t0);
    let len = cells as f64 * h;
    let bound = head_action + actual * actual / (2.0 * len) + hyp.w_hi * actual * actual * len;
    let sym = symmetrize(&grid, &modified, pot, 1e-3)?;
    let v = sym.profile.action(pot);
    Ok(TailCut {
        profile: sym.profile,
        modified_action,
        head_action,
        bound,
        margin: bound - v,
        bridge_length: len,
    })
}

#[cfg(test)]
mod tests;
