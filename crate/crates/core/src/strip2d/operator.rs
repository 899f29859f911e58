//! The discrete renormalised action, its gradient and Hessian products.

use super::Field;
use crate::grid::Grid2D;
use crate::linalg::solve_tridiagonal;
use crate::potential::{Mat2, Point, Potential};
use crate::profile1d::{half_action, half_gradient};
use rayon::prelude::*;

/// Treatment of the first and last slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ends {
    /// End slices are fixed.
    Anchored,
    /// End slices are free (natural boundary condition `∂_y u = 0`).
    Free,
}

/// `φ_c` plus the exterior penalty `Σ_j k w (c − V_j)₊²` over interior slices.
#[derive(Debug, Clone, Copy)]
pub struct StripOperator<'a> {
    pub grid: Grid2D,
    pub pot: &'a Potential,
    pub c: f64,
    pub penalty: f64,
    pub ends: Ends,
}

/// State-dependent data for Hessian products.
pub struct Linearization {
    gv: Vec<Point>,
    hw: Vec<Mat2>,
    f: Vec<f64>,
    active: Vec<bool>,
}

impl<'a> StripOperator<'a> {
    pub fn new(grid: Grid2D, pot: &'a Potential, c: f64) -> Self {
        Self {
            grid,
            pot,
            c,
            penalty: 0.0,
            ends: Ends::Anchored,
        }
    }

    fn nh(&self) -> usize {
        self.grid.grid_x.half_len()
    }

    fn omega(&self, j: usize) -> f64 {
        if j == 0 || j + 1 == self.grid.ny() {
            0.5
        } else {
            1.0
        }
    }

    fn row_free(&self, j: usize) -> bool {
        self.ends == Ends::Free || (j > 0 && j + 1 < self.grid.ny())
    }

    fn penalized(&self, j: usize) -> bool {
        self.penalty > 0.0 && j > 0 && j + 1 < self.grid.ny()
    }

    /// `(φ_c, penalty, V_j)`.
    pub fn parts(&self, vals: &[Point]) -> (f64, f64, Vec<f64>) {
        let nh = self.nh();
        let gx = self.grid.grid_x;
        let k = self.grid.k();
        let w = gx.half_weights();
        let v: Vec<f64> = vals.par_chunks(nh).map(|r| half_action(&gx, r, self.pot)).collect();
        let kin: f64 = vals
            .par_chunks(nh)
            .zip(vals[nh..].par_chunks(nh))
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .zip(&w)
                    .map(|((p, q), wi)| wi * ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)))
                    .sum::<f64>()
            })
            .collect::<Vec<_>>()
            .iter()
            .sum::<f64>()
            / (2.0 * k);
        let mut pot_part = 0.0;
        let mut pen = 0.0;
        for (j, vj) in v.iter().enumerate() {
            pot_part += self.omega(j) * k * (vj - self.c);
            if self.penalized(j) {
                pen += k * self.penalty * (self.c - vj).max(0.0).powi(2);
            }
        }
        (kin + pot_part, pen, v)
    }

    pub fn value(&self, vals: &[Point]) -> f64 {
        let (phi, pen, _) = self.parts(vals);
        phi + pen
    }

    /// Gradient of [`StripOperator::value`]; fixed entries are zero.
    pub fn gradient(&self, vals: &[Point], out: &mut [Point]) -> f64 {
        let nh = self.nh();
        let ny = self.grid.ny();
        let gx = self.grid.grid_x;
        let k = self.grid.k();
        let w = gx.half_weights();
        let (phi, pen, v) = self.parts(vals);
        out.par_chunks_mut(nh).enumerate().for_each(|(j, row)| {
            if !self.row_free(j) {
                row.iter_mut().for_each(|p| *p = [0.0; 2]);
                return;
            }
            let u = &vals[j * nh..(j + 1) * nh];
            half_gradient(&gx, u, self.pot, row);
            let f = if self.penalized(j) {
                1.0 - 2.0 * self.penalty * (self.c - v[j]).max(0.0)
            } else {
                1.0
            };
            let s = k * self.omega(j) * f;
            for i in 0..nh {
                let mut lap = [0.0; 2];
                for (jj, ok) in [(j.wrapping_sub(1), j > 0), (j + 1, j + 1 < ny)] {
                    if ok {
                        let nb = vals[jj * nh + i];
                        lap[0] += u[i][0] - nb[0];
                        lap[1] += u[i][1] - nb[1];
                    }
                }
                row[i][0] = s * row[i][0] + w[i] * lap[0] / k;
                row[i][1] = s * row[i][1] + w[i] * lap[1] / k;
            }
            row[0][0] = 0.0;
            row[nh - 1] = [0.0; 2];
        });
        phi + pen
    }

    pub fn linearize(&self, vals: &[Point]) -> Linearization {
        let nh = self.nh();
        let gx = self.grid.grid_x;
        let v = self.parts(vals).2;
        let mut gv = vec![[0.0; 2]; vals.len()];
        gv.par_chunks_mut(nh)
            .zip(vals.par_chunks(nh))
            .for_each(|(g, u)| half_gradient(&gx, u, self.pot, g));
        let hw = vals.par_iter().map(|p| self.pot.hess(*p)).collect();
        let mut f = vec![1.0; v.len()];
        let mut active = vec![false; v.len()];
        for (j, vj) in v.iter().enumerate() {
            if self.penalized(j) && *vj < self.c {
                f[j] = 1.0 - 2.0 * self.penalty * (self.c - vj);
                active[j] = true;
            }
        }
        for row in gv.chunks_mut(nh) {
            row[0][0] = 0.0;
            row[nh - 1] = [0.0; 2];
        }
        Linearization { gv, hw, f, active }
    }

    /// Hessian–vector product at the linearisation point.
    pub fn hess_vec(&self, lin: &Linearization, d: &[Point], out: &mut [Point]) {
        let nh = self.nh();
        let ny = self.grid.ny();
        let gx = self.grid.grid_x;
        let k = self.grid.k();
        let h = gx.h();
        let w = gx.half_weights();
        out.par_chunks_mut(nh).enumerate().for_each(|(j, row)| {
            if !self.row_free(j) {
                row.iter_mut().for_each(|p| *p = [0.0; 2]);
                return;
            }
            let dj = &d[j * nh..(j + 1) * nh];
            let s = k * self.omega(j);
            let mut proj = 0.0;
            if lin.active[j] {
                let g = &lin.gv[j * nh..(j + 1) * nh];
                proj = g.iter().zip(dj).map(|(a, b)| a[0] * b[0] + a[1] * b[1]).sum::<f64>();
            }
            for i in 0..nh {
                let mut xs = [0.0; 2];
                for kk in 0..2 {
                    let mut acc = 0.0;
                    if i > 0 {
                        acc += dj[i][kk] - dj[i - 1][kk];
                    }
                    if i + 1 < nh {
                        acc += dj[i][kk] - dj[i + 1][kk];
                    }
                    xs[kk] = 2.0 / h * acc;
                }
                let hm = lin.hw[j * nh + i];
                xs[0] += w[i] * (hm[0][0] * dj[i][0] + hm[0][1] * dj[i][1]);
                xs[1] += w[i] * (hm[1][0] * dj[i][0] + hm[1][1] * dj[i][1]);
                let mut ys = [0.0; 2];
                for (jj, ok) in [(j.wrapping_sub(1), j > 0), (j + 1, j + 1 < ny)] {
                    if ok {
                        let nb = d[jj * nh + i];
                        ys[0] += dj[i][0] - nb[0];
                        ys[1] += dj[i][1] - nb[1];
                    }
                }
                let mut r = [
                    s * lin.f[j] * xs[0] + w[i] * ys[0] / k,
                    s * lin.f[j] * xs[1] + w[i] * ys[1] / k,
                ];
                if lin.active[j] {
                    let g = lin.gv[j * nh + i];
                    let t = s * 2.0 * self.penalty * proj;
                    r[0] += t * g[0];
                    r[1] += t * g[1];
                }
                row[i] = r;
            }
            row[0][0] = 0.0;
            row[nh - 1] = [0.0; 2];
        });
    }

    /// Max over free entries of `|g| / (k ω_j μ_i)`: the nodal residual of
    /// `−Δu + ∇W(u)` (plus the penalty force).
    pub fn nodal_residual(&self, g: &[Point]) -> f64 {
        let nh = self.nh();
        let k = self.grid.k();
        let w = self.grid.grid_x.half_weights();
        g.par_chunks(nh)
            .enumerate()
            .map(|(j, row)| {
                let s = k * self.omega(j);
                row.iter()
                    .zip(&w)
                    .fold(0.0f64, |m, (p, wi)| m.max(p[0].abs().max(p[1].abs()) / (s * wi)))
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Block preconditioner: one tridiagonal system per slice and component.
    pub fn preconditioner(&self) -> LinePrecond {
        let nh = self.nh();
        let ny = self.grid.ny();
        let k = self.grid.k();
        let h = self.grid.grid_x.h();
        let w = self.grid.grid_x.half_weights();
        let rows = (0..ny)
            .map(|j| {
                if !self.row_free(j) {
                    return None;
                }
                let s = k * self.omega(j) * 2.0 / h;
                let ny_nb = (j > 0) as usize + (j + 1 < ny) as usize;
                let mass: Vec<f64> = w
                    .iter()
                    .map(|wi| wi * (ny_nb as f64 / k + k * self.omega(j)))
                    .collect();
                let mut comps = Vec::with_capacity(2);
                for comp in 0..2 {
                    let mut diag = vec![0.0; nh];
                    let mut off = vec![0.0; nh - 1];
                    for i in 0..nh {
                        let fixed = i == nh - 1 || (i == 0 && comp == 0);
                        if fixed {
                            diag[i] = 1.0;
                            continue;
                        }
                        let nb = (i > 0) as usize + (i + 1 < nh) as usize;
                        diag[i] = s * nb as f64 + mass[i];
                        if i + 1 < nh && !(i + 1 == nh - 1) {
                            off[i] = -s;
                        }
                    }
                    if comp == 0 {
                        off[0] = 0.0;
                    }
                    comps.push((diag, off));
                }
                Some(comps)
            })
            .collect();
        LinePrecond { nh, rows }
    }
}

pub struct LinePrecond {
    nh: usize,
    rows: Vec<Option<Vec<(Vec<f64>, Vec<f64>)>>>,
}

impl LinePrecond {
    /// `z = P⁻¹ r` on flat vectors (two reals per point).
    pub fn solve(&self, r: &[f64], z: &mut [f64]) {
        let nh = self.nh;
        z.par_chunks_mut(2 * nh)
            .zip(r.par_chunks(2 * nh))
            .zip(self.rows.par_iter())
            .for_each_init(
                || (Vec::new(), Vec::new()),
                |(buf, work), ((zr, rr), blk)| match blk {
                    None => zr.iter_mut().for_each(|v| *v = 0.0),
                    Some(comps) => {
                        for (comp, (diag, off)) in comps.iter().enumerate() {
                            buf.clear();
                            buf.extend((0..nh).map(|i| rr[2 * i + comp]));
                            solve_tridiagonal(diag, off, buf, work);
                            for i in 0..nh {
                                zr[2 * i + comp] = buf[i];
                            }
                        }
                        zr[0] = 0.0;
                        zr[2 * (nh - 1)] = 0.0;
                        zr[2 * (nh - 1) + 1] = 0.0;
                    }
                },
            );
    }
}

pub(crate) fn flat(v: &[Point]) -> &[f64] {
    v.as_flattened()
}

pub(crate) fn points(v: &[f64]) -> &[Point] {
    let (chunks, rest) = v.as_chunks::<2>();
    debug_assert!(rest.is_empty());
    chunks
}

/// Discrete `φ_c` of a field with anchored ends.
pub fn renormalized_action(u: &Field, c: f64, pot: &Potential) -> f64 {
    StripOperator::new(*u.grid(), pot, c).parts(u.values()).0
}

/// `φ_c` restricted to the slices `j0..=j1` (trapezoid ends at `j0`, `j1`).
pub fn renormalized_action_on(u: &Field, c: f64, pot: &Potential, j0: usize, j1: usize) -> f64 {
    assert!(j0 <= j1 && j1 < u.grid().ny());
    if j0 == j1 {
        return 0.0;
    }
    let nh = u.nh();
    let k = u.grid().k();
    let gx = u.grid().grid_x;
    let w = gx.half_weights();
    let vals = u.values();
    let mut total = 0.0;
    for j in j0..j1 {
        let a = &vals[j * nh..(j + 1) * nh];
        let b = &vals[(j + 1) * nh..(j + 2) * nh];
        let kin: f64 = a
            .iter()
            .zip(b)
            .zip(&w)
            .map(|((p, q), wi)| wi * ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)))
            .sum();
        let va = half_action(&gx, a, pot) - c;
        let vb = half_action(&gx, b, pot) - c;
        total += kin / (2.0 * k) + 0.5 * k * (va + vb);
    }
    total
}

/// Gradient of `φ_c` with respect to the free values (anchored ends).
pub fn strip_gradient(u: &Field, c: f64, pot: &Potential) -> Vec<Point> {
    let mut g = vec![[0.0; 2]; u.values().len()];
    StripOperator::new(*u.grid(), pot, c).gradient(u.values(), &mut g);
    g
}
