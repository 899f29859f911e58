//! Classification by turning slices and the reflected entire solutions.

use super::metrics::{energy_audit, slice_metrics, SliceMetrics, Turning};
use super::operator::{flat, points, renormalized_action, Ends, StripOperator};
use super::residual::pde_residual_rows;
use super::{Field, Level, StripError};
use crate::grid::Grid2D;
use crate::linalg::minres;
use crate::potential::{Point, Potential};
use crate::profile1d::l2_distance;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionKind {
    /// `s_c = −∞`, `t_c = +∞`.
    Heteroclinic,
    /// `s_c` finite, `t_c = +∞`: reflected about `s_c`.
    HomoclinicLeft,
    /// `s_c = −∞`, `t_c` finite: reflected about `t_c`.
    HomoclinicRight,
    /// Both finite: periodic with period `2T_c`.
    BrakeOrbit,
}

impl SolutionKind {
    pub fn from_turning(t: &Turning) -> Self {
        match (t.s.is_some(), t.t.is_some()) {
            (false, false) => Self::Heteroclinic,
            (true, false) => Self::HomoclinicLeft,
            (false, true) => Self::HomoclinicRight,
            (true, true) => Self::BrakeOrbit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub c: f64,
    /// `c − m`.
    pub offset: f64,
    pub m: f64,
    pub m_star: f64,
    pub d0: f64,
    pub ell0: f64,
    pub kind: SolutionKind,
    /// `None` stands for `−∞`.
    pub s_c: Option<f64>,
    /// `None` stands for `+∞`.
    pub t_c: Option<f64>,
    #[serde(rename = "T_c")]
    pub period_half: Option<f64>,
    pub energy_dev: f64,
    pub energy_dev_rel: f64,
    pub equipartition_gap: f64,
    pub equipartition_rel: f64,
    /// Five-point residual of the output field.
    pub residual: f64,
    /// Fourth-order residual away from the seams.
    pub truncation_residual: f64,
    /// Fourth-order residual on the seam rows.
    pub seam_residual: Option<f64>,
    pub phi_c: f64,
    /// `‖∂_y u‖` in L² at the turning slices (one-sided on the polished window).
    pub neumann_s: Option<f64>,
    pub neumann_t: Option<f64>,
    pub neumann_tol: f64,
    pub seam_certified: bool,
    /// L² distances of the outermost free slices to `q∓`.
    pub endpoint_dist_minus: f64,
    pub endpoint_dist_plus: f64,
    /// Far end of a homoclinic: Euler–Lagrange residual and `V − c`.
    pub far_end_el_residual: Option<f64>,
    pub far_end_level_gap: Option<f64>,
    pub v_tol: f64,
    pub continuity_violation: f64,
    pub lx: f64,
    pub nx: usize,
    pub y_start: f64,
    pub y_length: f64,
    pub ny: usize,
}

#[derive(Debug, Clone)]
pub struct ExtendOptions {
    pub neumann_tol: f64,
    /// Newton tolerance for the free-end problem (nodal residual).
    pub polish_tol: f64,
    pub max_newton: usize,
    pub max_krylov: usize,
    pub max_secant: usize,
    /// Accept `|V_end − c| ≤ level_tol·(c − m)`.
    pub level_tol: f64,
}

impl Default for ExtendOptions {
    fn default() -> Self {
        Self {
            neumann_tol: 1e-3,
            polish_tol: 1e-6,
            max_newton: 60,
            max_krylov: 3000,
            max_secant: 40,
            level_tol: 1e-3,
        }
    }
}

/// Free-end solution on `[s_c, s_c + T_c]` with `V = c` at both ends.
#[derive(Debug, Clone)]
pub struct BrakePolish {
    pub window: Field,
    pub period_half: f64,
    pub end_v: [f64; 2],
    pub residual: f64,
    pub converged: bool,
    pub secant_iterations: usize,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct Extension {
    pub report: SolutionReport,
    /// One period for brake orbits, the reflected field for homoclinics,
    /// the input for heteroclinics.
    pub field: Field,
    pub metrics: SliceMetrics,
    pub polish: Option<BrakePolish>,
}

fn sq_norm(g: &[Point]) -> f64 {
    flat(g).iter().map(|v| v * v).sum()
}

/// Newton with MINRES for a critical point (not necessarily a minimum).
fn critical_point(op: &StripOperator, x: &mut [Point], tol: f64, max_newton: usize, max_krylov: usize) -> (bool, usize, f64) {
    let n = x.len();
    let mut g = vec![[0.0; 2]; n];
    op.gradient(x, &mut g);
    let mut residual = op.nodal_residual(&g);
    let mut norm = sq_norm(&g);
    let pre = op.preconditioner();
    let mut hv = vec![[0.0; 2]; n];
    let mut x_new = vec![[0.0; 2]; n];
    let mut g_new = vec![[0.0; 2]; n];
    let mut it = 0;
    let mut short_steps = 0;
    while residual > tol && it < max_newton && short_steps < 3 {
        let lin = op.linearize(x);
        let rhs: Vec<f64> = flat(&g).iter().map(|v| -v).collect();
        let (p, kr) = minres(
            &rhs,
            |d, out| {
                op.hess_vec(&lin, points(d), &mut hv);
                out.copy_from_slice(flat(&hv));
            },
            |r, z| pre.solve(r, z),
            1e-8,
            max_krylov,
        );
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-6 {
            for (xn, (xi, pi)) in x_new.iter_mut().zip(x.iter().zip(points(&p))) {
                *xn = [xi[0] + step * pi[0], xi[1] + step * pi[1]];
            }
            op.gradient(&x_new, &mut g_new);
            let nn = sq_norm(&g_new);
            if nn.is_finite() && nn < norm * (1.0 - 1e-4 * step) {
                norm = nn;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        // the near-translation mode makes full steps fail once the
        // residual reaches the level of the end-slice coupling
        short_steps = if step < 1e-2 { short_steps + 1 } else { 0 };
        x.copy_from_slice(&x_new);
        std::mem::swap(&mut g, &mut g_new);
        residual = op.nodal_residual(&g);
        it += 1;
        log::trace!("free-end newton {it}: residual {residual:.3e}, step {step}, minres {kr}");
    }
    (residual <= tol, it, residual)
}

/// Re-solves `u` between the finite turning slices with free ends and
/// adjusts the length `T` (secant on `ln(V_end − m)`) until `V_end = c`.
pub fn polish_brake_orbit(
    u: &Field,
    turning: &Turning,
    level: &Level,
    pot: &Potential,
    opts: &ExtendOptions,
) -> Result<BrakePolish, StripError> {
    let (Some(s), Some(t)) = (turning.s, turning.t) else {
        return Err(StripError::Polish("turning slices are not both finite".into()));
    };
    let init = u.window(s, t)?;
    let cells = t - s;
    let gx = u.grid().grid_x;
    let gap_c = level.c - level.m;
    if !(gap_c > 0.0) {
        return Err(StripError::Polish("level c equals m".into()));
    }
    let mut x = init.values().to_vec();
    let nh = init.nh();
    let mut newton_total = 0;
    let mut solve = |len: f64, x: &mut Vec<Point>| -> Result<(f64, [f64; 2], bool, f64), StripError> {
        let grid = Grid2D::span(gx, init.grid().y_start(), len, cells + 1)?;
        let op = StripOperator {
            grid,
            pot,
            c: level.c,
            penalty: 0.0,
            ends: Ends::Free,
        };
        let (conv, it, res) = critical_point(&op, x, opts.polish_tol, opts.max_newton, opts.max_krylov);
        newton_total += it;
        let v0 = crate::profile1d::half_action(&gx, &x[..nh], pot);
        let v1 = crate::profile1d::half_action(&gx, &x[cells * nh..], pot);
        let mean = 0.5 * (v0 + v1);
        let f = ((mean - level.m).max(1e-300)).ln() - gap_c.ln();
        log::debug!("polish T = {len:.6}: V_end - c = ({:.3e}, {:.3e}), residual {res:.2e}", v0 - level.c, v1 - level.c);
        Ok((f, [v0, v1], conv, res))
    };
    let mut len0 = init.grid().length();
    let (mut f0, mut ends, mut conv, mut res) = solve(len0, &mut x)?;
    let mut iterations = 0;
    let done = |ends: [f64; 2]| (0.5 * (ends[0] + ends[1]) - level.c).abs() <= opts.level_tol * gap_c;
    if !done(ends) {
        let mut len1 = len0 * if f0 > 0.0 { 1.05 } else { 0.95 };
        let mut x1 = x.clone();
        let (mut f1, mut ends1, mut conv1, mut res1) = solve(len1, &mut x1)?;
        iterations = 1;
        while !done(ends1) && iterations < opts.max_secant {
            let slope = (f1 - f0) / (len1 - len0);
            let mut next = if slope.is_finite() && slope != 0.0 {
                len1 - f1 / slope
            } else {
                len1 * 1.05
            };
            next = next.clamp(0.8 * len1, 1.25 * len1);
            len0 = len1;
            f0 = f1;
            len1 = next;
            (f1, ends1, conv1, res1) = solve(len1, &mut x1)?;
            iterations += 1;
        }
        len0 = len1;
        x = x1;
        ends = ends1;
        conv = conv1;
        res = res1;
    }
    let grid = Grid2D::span(gx, init.grid().y_start(), len0, cells + 1)?;
    let window = Field::new(grid, x)?;
    let d_minus = l2_distance(&gx, window.slice(0), level.minus.half());
    let d_plus = l2_distance(&gx, window.slice(cells), level.plus.half());
    if d_minus > level.d0 || d_plus > level.d0 {
        return Err(StripError::Polish(format!(
            "free ends left the sublevel neighbourhoods (distances {d_minus:.3e}, {d_plus:.3e})"
        )));
    }
    Ok(BrakePolish {
        window,
        period_half: len0,
        end_v: ends,
        residual: res,
        converged: conv && done(ends),
        secant_iterations: iterations,
        newton_iterations: newton_total,
    })
}

/// Rows `src(r)` of `u` stacked into a field on `[y_start, y_start + len]`.
fn restack(u: &Field, y_start: f64, len: f64, src: impl Fn(usize) -> usize, rows: usize) -> Result<Field, StripError> {
    let grid = Grid2D::span(u.grid().grid_x, y_start, len, rows)?;
    let values = (0..rows).flat_map(|r| u.slice(src(r)).iter().copied()).collect();
    Field::new(grid, values)
}

fn slice_diff_norm(u: &Field, a: usize, b: usize, scale: f64) -> f64 {
    l2_distance(&u.grid().grid_x, u.slice(a), u.slice(b)) / scale
}

/// Classifies `u` by its turning slices and builds the reflected solution.
pub fn classify_and_extend(
    u: &Field,
    turning: &Turning,
    level: &Level,
    pot: &Potential,
    opts: &ExtendOptions,
) -> Result<Extension, StripError> {
    let kind = SolutionKind::from_turning(turning);
    let ny = u.grid().ny();
    let k = u.grid().k();
    let gx = u.grid().grid_x;
    let phi_c = renormalized_action(u, level.c, pot);
    let base = slice_metrics(u, level, pot);
    let mut polish = None;
    let mut neumann_s = None;
    let mut neumann_t = None;
    let mut far = None;
    let (field, metrics, audit, seams, periodic, s_c, t_c, period_half) = match kind {
        SolutionKind::Heteroclinic => {
            let audit = energy_audit(&base, turning, level.c);
            (u.clone(), base.clone(), audit, vec![], false, None, None, None)
        }
        SolutionKind::HomoclinicLeft | SolutionKind::HomoclinicRight => {
            let j = turning.s.or(turning.t).expect("one turning slice is finite");
            let nj = slice_diff_norm(u, j + 1, j - 1, 2.0 * k);
            let (far_j, span, src): (usize, usize, Box<dyn Fn(usize) -> usize>) = if kind == SolutionKind::HomoclinicLeft {
                neumann_s = Some(nj);
                let l = ny - 2 - j;
                (ny - 2, l, Box::new(move |r: usize| j + l.abs_diff(r)))
            } else {
                neumann_t = Some(nj);
                let l = j - 1;
                (1, l, Box::new(move |r: usize| j - l.abs_diff(r)))
            };
            let y0 = u.grid().y(j) - span as f64 * k;
            let field = restack(u, y0, 2.0 * span as f64 * k, src, 2 * span + 1)?;
            let q = u.slice_profile(far_j);
            far = Some((q.el_residual_max(pot), q.action(pot) - level.c));
            let audit = energy_audit(&base, turning, level.c);
            let m = slice_metrics(&field, level, pot);
            let ys = turning.s.map(|_| turning.s_y);
            let yt = turning.t.map(|_| turning.t_y);
            (field, m, audit, vec![span], false, ys, yt, None)
        }
        SolutionKind::BrakeOrbit => {
            let p = polish_brake_orbit(u, turning, level, pot, opts)?;
            let w = &p.window;
            let cells = w.grid().ny() - 1;
            let kw = w.grid().k();
            neumann_s = Some(slice_diff_norm(w, 1, 0, kw));
            neumann_t = Some(slice_diff_norm(w, cells, cells - 1, kw));
            let wm = slice_metrics(w, level, pot);
            let wt = Turning {
                s: Some(0),
                t: Some(cells),
                s_y: w.grid().y(0),
                t_y: w.grid().y(cells),
                v_tol: turning.v_tol,
            };
            let audit = energy_audit(&wm, &wt, level.c);
            let field = restack(
                w,
                w.grid().y_start(),
                2.0 * p.period_half,
                |r| if r <= cells { r } else { 2 * cells - r },
                2 * cells + 1,
            )?;
            let (sy, ty, th) = (wt.s_y, wt.t_y, p.period_half);
            polish = Some(p);
            (field, wm, audit, vec![0, cells], true, Some(sy), Some(ty), Some(th))
        }
    };
    let full = field.full_rows();
    let r2 = pde_residual_rows(field.grid(), &full, pot, periodic, 2);
    let r4 = pde_residual_rows(field.grid(), &full, pot, periodic, 4);
    let interior = r4.max_excluding(&seams);
    let seam_residual = if seams.is_empty() {
        None
    } else {
        Some(seams.iter().filter_map(|&j| r4.row(j)).fold(0.0, f64::max))
    };
    let neumann_ok = [neumann_s, neumann_t].iter().flatten().all(|v| *v <= opts.neumann_tol);
    let seam_ok = seam_residual.is_none_or(|s| s <= 5.0 * interior);
    let polished_ok = polish.as_ref().is_none_or(|p| p.converged);
    let report = SolutionReport {
        c: level.c,
        offset: level.offset,
        m: level.m,
        m_star: level.m_star,
        d0: level.d0,
        ell0: level.ell0(),
        kind,
        s_c,
        t_c,
        period_half,
        energy_dev: audit.energy_dev,
        energy_dev_rel: audit.energy_dev_rel,
        equipartition_gap: audit.equipartition_gap,
        equipartition_rel: audit.equipartition_rel,
        residual: r2.max(),
        truncation_residual: interior,
        seam_residual,
        phi_c,
        neumann_s,
        neumann_t,
        neumann_tol: opts.neumann_tol,
        seam_certified: kind == SolutionKind::Heteroclinic || (neumann_ok && seam_ok && polished_ok),
        endpoint_dist_minus: l2_distance(&gx, u.slice(1), level.minus.half()),
        endpoint_dist_plus: l2_distance(&gx, u.slice(ny - 2), level.plus.half()),
        far_end_el_residual: far.map(|f| f.0),
        far_end_level_gap: far.map(|f| f.1),
        v_tol: turning.v_tol,
        continuity_violation: base.continuity_violation,
        lx: gx.half_length(),
        nx: gx.n(),
        y_start: field.grid().y_start(),
        y_length: field.grid().length(),
        ny: field.grid().ny(),
    };
    Ok(Extension {
        report,
        field,
        metrics,
        polish,
    })
}
