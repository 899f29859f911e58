//! Pointwise residuals of `−Δu + ∇W(u) = 0`.

use super::Field;
use crate::grid::Grid2D;
use crate::potential::{Point, Potential};
use rayon::prelude::*;

/// Row-wise maxima of a residual.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRows {
    /// `None` for rows that are not evaluated (too close to an open end).
    pub rows: Vec<Option<f64>>,
}

impl ResidualRows {
    pub fn max(&self) -> f64 {
        self.rows.iter().flatten().fold(0.0, |m, v| m.max(*v))
    }

    /// Maximum over evaluated rows other than those listed.
    pub fn max_excluding(&self, skip: &[usize]) -> f64 {
        self.rows
            .iter()
            .enumerate()
            .filter(|(j, _)| !skip.contains(j))
            .filter_map(|(_, v)| *v)
            .fold(0.0, f64::max)
    }

    pub fn row(&self, j: usize) -> Option<f64> {
        self.rows.get(j).copied().flatten()
    }
}

/// Residual on full rows (`ny × nx` points, mirrored already).
///
/// `order = 2` uses the five-point Laplacian, `order = 4` the fourth-order
/// stencil. With `periodic` the last row duplicates the first and rows wrap
/// with period `ny − 1`; otherwise rows within reach of the ends are skipped,
/// as are columns within reach of `x = ±Lx`.
pub fn pde_residual_rows(grid: &Grid2D, full: &[Point], pot: &Potential, periodic: bool, order: usize) -> ResidualRows {
    let nx = grid.grid_x.n();
    let ny = grid.ny();
    assert_eq!(full.len(), nx * ny);
    let reach = if order >= 4 { 2 } else { 1 };
    let h2 = grid.grid_x.h().powi(2);
    let k2 = grid.k().powi(2);
    let period = ny - 1;
    let at = |j: isize, i: usize| -> Point {
        let jj = if periodic {
            j.rem_euclid(period as isize) as usize
        } else {
            j as usize
        };
        full[jj * nx + i]
    };
    let rows = (0..ny)
        .into_par_iter()
        .map(|j| {
            let evaluated = if periodic {
                j < period
            } else {
                j >= reach && j + reach < ny
            };
            if !evaluated {
                return None;
            }
            let jj = j as isize;
            let mut worst = 0.0f64;
            for i in reach..nx - reach {
                let u = at(jj, i);
                let gw = pot.grad(u);
                let mut r = [0.0; 2];
                for c in 0..2 {
                    let (dxx, dyy) = if reach == 2 {
                        (
                            (-at(jj, i - 2)[c] + 16.0 * at(jj, i - 1)[c] - 30.0 * u[c] + 16.0 * at(jj, i + 1)[c]
                                - at(jj, i + 2)[c])
                                / (12.0 * h2),
                            (-at(jj - 2, i)[c] + 16.0 * at(jj - 1, i)[c] - 30.0 * u[c] + 16.0 * at(jj + 1, i)[c]
                                - at(jj + 2, i)[c])
                                / (12.0 * k2),
                        )
                    } else {
                        (
                            (at(jj, i - 1)[c] - 2.0 * u[c] + at(jj, i + 1)[c]) / h2,
                            (at(jj - 1, i)[c] - 2.0 * u[c] + at(jj + 1, i)[c]) / k2,
                        )
                    };
                    r[c] = -(dxx + dyy) + gw[c];
                }
                worst = worst.max(r[0].abs().max(r[1].abs()));
            }
            Some(worst)
        })
        .collect();
    ResidualRows { rows }
}

/// Interior maximum of `|−(D²_x + D²_y)u + ∇W(u)|` with the five-point Laplacian.
pub fn pde_residual(u: &Field, pot: &Potential) -> f64 {
    pde_residual_rows(u.grid(), &u.full_rows(), pot, false, 2).max()
}

/// Interior maximum of the residual with fourth-order differences; for a
/// solution of the five-point scheme this measures the discretisation error.
pub fn truncation_residual(u: &Field, pot: &Potential) -> f64 {
    pde_residual_rows(u.grid(), &u.full_rows(), pot, false, 4).max()
}
