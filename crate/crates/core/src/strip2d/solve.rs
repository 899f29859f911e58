//! Newton–CG minimisation of the penalised renormalised action.

use super::operator::{flat, points, Ends, StripOperator};
use super::{Field, Level, StripError};
use crate::linalg::{dot, norm_inf, truncated_pcg, CgExit};
use crate::potential::{Point, Potential};

#[derive(Debug, Clone)]
pub struct StripOptions {
    /// Target for the nodal residual of `−Δu + ∇W(u)` (plus penalty force).
    pub tol: f64,
    pub max_newton: usize,
    pub max_cg: usize,
    /// Allowed violation of `V_j ≥ c`; `None` means `1e−2·(m* − m)`.
    pub constraint_tol: Option<f64>,
    pub max_escalations: usize,
}

impl Default for StripOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_newton: 200,
            max_cg: 2000,
            constraint_tol: None,
            max_escalations: 6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StripOutcome {
    pub field: Field,
    pub c: f64,
    /// `φ_c` without the penalty.
    pub phi_c: f64,
    pub penalty_weight: f64,
    pub converged: bool,
    /// `min_j V_j ≥ c − constraint_tol` over interior slices.
    pub constraint_ok: bool,
    pub constraint_tol: f64,
    pub min_interior_v: f64,
    pub newton_iterations: usize,
    pub cg_iterations: usize,
    pub residual: f64,
    pub escalations: usize,
    /// Penalised objective after each accepted step, per penalty level.
    pub history: Vec<Vec<f64>>,
}

struct Stage {
    converged: bool,
    iterations: usize,
    cg: usize,
    residual: f64,
    history: Vec<f64>,
}

/// Newton iterations for a fixed operator; `x` is updated in place.
fn newton(
    op: &StripOperator,
    x: &mut [Point],
    tol: f64,
    max_newton: usize,
    max_cg: usize,
) -> Stage {
    let n = x.len();
    let mut g = vec![[0.0; 2]; n];
    let mut f = op.gradient(x, &mut g);
    let mut residual = op.nodal_residual(&g);
    let mut history = vec![f];
    let mut x_new = vec![[0.0; 2]; n];
    let mut g_new = vec![[0.0; 2]; n];
    let mut iterations = 0;
    let mut cg_total = 0;
    let pre = op.preconditioner();
    let mut hv_buf = vec![[0.0; 2]; n];
    while residual > tol && iterations < max_newton {
        let lin = op.linearize(x);
        let eta = residual.sqrt().clamp(1e-6, 0.1);
        let (mut p, exit, cg_it) = truncated_pcg(
            flat(&g),
            |d, out| {
                op.hess_vec(&lin, points(d), &mut hv_buf);
                out.copy_from_slice(flat(&hv_buf));
            },
            |r, z| pre.solve(r, z),
            eta,
            max_cg,
        );
        cg_total += cg_it;
        let mut slope = dot(flat(&g), &p);
        if !(slope < 0.0) {
            pre.solve(&flat(&g).iter().map(|v| -v).collect::<Vec<_>>(), &mut p);
            slope = dot(flat(&g), &p);
        }
        if exit == CgExit::NegativeCurvature {
            log::trace!("negative curvature after {cg_it} CG steps");
        }
        let noise = 1e-13 * f.abs().max(1.0);
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-16 {
            for (xn, (xi, pi)) in x_new.iter_mut().zip(x.iter().zip(points(&p))) {
                *xn = [xi[0] + step * pi[0], xi[1] + step * pi[1]];
            }
            let f_new = op.gradient(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= f + 1e-4 * step * slope + noise {
                accepted = Some(f_new);
                break;
            }
            step *= 0.5;
        }
        let Some(f_new) = accepted else {
            log::debug!("line search stalled at residual {residual:.3e}");
            break;
        };
        x.copy_from_slice(&x_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
        history.push(f);
        residual = op.nodal_residual(&g);
        iterations += 1;
        log::trace!(
            "newton {iterations}: f = {f:.15e}, residual = {residual:.3e}, step = {step}, cg = {cg_it}, |p| = {:.3e}",
            norm_inf(&p)
        );
    }
    Stage {
        converged: residual <= tol,
        iterations,
        cg: cg_total,
        residual,
        history,
    }
}

/// Minimises the penalised `φ_c` with both end slices fixed.
pub fn minimize_strip(
    init: &Field,
    level: &Level,
    pot: &Potential,
    opts: &StripOptions,
) -> Result<StripOutcome, StripError> {
    if level.offset > 0.0 && !level.star_holds {
        return Err(StripError::StarFails { clusters: 1 });
    }
    if init.grid().grid_x != level.grid_x {
        return Err(StripError::Shape("strip x-grid differs from the level grid".into()));
    }
    let grid = *init.grid();
    let ny = grid.ny();
    let constraint_tol = opts
        .constraint_tol
        .unwrap_or(1e-2 * (level.m_star - level.m))
        .max(f64::MIN_POSITIVE);
    let mut op = StripOperator {
        grid,
        pot,
        c: level.c,
        penalty: if level.offset > 0.0 { 1.0 / constraint_tol } else { 0.0 },
        ends: Ends::Anchored,
    };
    let mut x = init.values().to_vec();
    let mut history = Vec::new();
    let mut total_newton = 0;
    let mut total_cg = 0;
    let mut escalations = 0;
    loop {
        let stage = newton(&op, &mut x, opts.tol, opts.max_newton, opts.max_cg);
        total_newton += stage.iterations;
        total_cg += stage.cg;
        history.push(stage.history);
        let (phi, _, v) = op.parts(&x);
        let min_v = v[1..ny - 1].iter().copied().fold(f64::INFINITY, f64::min);
        let constraint_ok = op.penalty == 0.0 || min_v >= level.c - constraint_tol;
        log::debug!(
            "penalty {:.3e}: phi_c = {phi:.12e}, min V - c = {:.3e}, residual = {:.3e}",
            op.penalty,
            min_v - level.c,
            stage.residual
        );
        if constraint_ok || escalations >= opts.max_escalations {
            let field = Field::new(grid, x)?;
            return Ok(StripOutcome {
                field,
                c: level.c,
                phi_c: phi,
                penalty_weight: op.penalty,
                converged: stage.converged,
                constraint_ok,
                constraint_tol,
                min_interior_v: min_v,
                newton_iterations: total_newton,
                cg_iterations: total_cg,
                residual: stage.residual,
                escalations,
                history,
            });
        }
        op.penalty *= 10.0;
        escalations += 1;
    }
}
