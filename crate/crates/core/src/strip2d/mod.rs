//! Layered solutions on a strip.
//!
//! A [`Field`] is a stack of symmetric profiles, one per slice `y = y_j`.
//! The renormalised action
//! `φ_c(u) = Σ_cells ‖u_{j+1} − u_j‖²/(2k) + Σ_j ω_j k (V(u_j) − c)`
//! (trapezoid weights `ω_j`) is minimised with the two end slices anchored
//! at the minimisers `q∓` and an exterior penalty for `V(u_j) ≥ c`.

mod extend;
mod metrics;
mod operator;
mod residual;
mod solve;

pub use extend::{classify_and_extend, polish_brake_orbit, BrakePolish, ExtendOptions, Extension, SolutionKind, SolutionReport};
pub use metrics::{detect_turning, energy_audit, rescaling_defect, slice_metrics, EnergyAudit, SliceMetrics, Turning};
pub use operator::{renormalized_action, renormalized_action_on, strip_gradient, Ends, StripOperator};
pub use residual::{pde_residual, pde_residual_rows, truncation_residual, ResidualRows};
pub use solve::{minimize_strip, StripOptions, StripOutcome};

use crate::grid::{Grid1D, Grid2D, GridError};
use crate::potential::{Point, Potential};
use crate::profile1d::{minimize, symmetrize, HeteroclinicAtlas, MinimizeOptions, Profile, ProfileError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StripError {
    #[error("hypothesis (*) fails: the minimisers form {clusters} cluster(s), so levels c > m are not available")]
    StarFails { clusters: usize },
    #[error("level {c} outside [m, m*] = [{m}, {m_star}]")]
    Level { c: f64, m: f64, m_star: f64 },
    #[error("field shape: {0}")]
    Shape(String),
    #[error("turning slices are inconsistent: s_c = {s} ≥ t_c = {t}")]
    Turning { s: f64, t: f64 },
    #[error("brake-orbit polish failed: {0}")]
    Polish(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Stack of half-grid profiles on a [`Grid2D`], slice-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid2D,
    values: Vec<Point>,
}

impl Field {
    /// `values` holds `ny` slices of `half_len` points each.
    pub fn new(grid: Grid2D, mut values: Vec<Point>) -> Result<Self, StripError> {
        let nh = grid.grid_x.half_len();
        if values.len() != nh * grid.ny() {
            return Err(StripError::Shape(format!(
                "expected {}×{} values, got {}",
                grid.ny(),
                nh,
                values.len()
            )));
        }
        for row in values.chunks_mut(nh) {
            row[0][0] = 0.0;
        }
        Ok(Self { grid, values })
    }

    pub fn from_slices(grid: Grid2D, slices: &[Profile]) -> Result<Self, StripError> {
        if slices.len() != grid.ny() || slices.iter().any(|p| p.grid() != &grid.grid_x) {
            return Err(StripError::Shape("slices do not match the strip grid".into()));
        }
        Self::new(grid, slices.iter().flat_map(|p| p.half().iter().copied()).collect())
    }

    /// `u(x, y) = q(x)` for every slice.
    pub fn constant(grid: Grid2D, q: &Profile) -> Result<Self, StripError> {
        Self::from_slices(grid, &vec![q.clone(); grid.ny()])
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn nh(&self) -> usize {
        self.grid.grid_x.half_len()
    }

    pub fn values(&self) -> &[Point] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Point] {
        &mut self.values
    }

    pub fn slice(&self, j: usize) -> &[Point] {
        let nh = self.nh();
        &self.values[j * nh..(j + 1) * nh]
    }

    pub fn slice_mut(&mut self, j: usize) -> &mut [Point] {
        let nh = self.nh();
        &mut self.values[j * nh..(j + 1) * nh]
    }

    pub fn slice_profile(&self, j: usize) -> Profile {
        Profile::from_half(self.grid.grid_x, self.slice(j).to_vec()).expect("slice length matches grid")
    }

    /// Slice actions `V(u(·, y_j))`.
    pub fn slice_actions(&self, pot: &Potential) -> Vec<f64> {
        use rayon::prelude::*;
        let gx = self.grid.grid_x;
        self.values
            .par_chunks(self.nh())
            .map(|row| crate::profile1d::half_action(&gx, row, pot))
            .collect()
    }

    /// Mirrored values, `ny` rows of `nx` points.
    pub fn full_rows(&self) -> Vec<Point> {
        self.values
            .chunks(self.nh())
            .flat_map(crate::profile1d::mirror_half)
            .collect()
    }

    /// Slices `j0..=j1` as a field on the corresponding sub-strip.
    pub fn window(&self, j0: usize, j1: usize) -> Result<Field, StripError> {
        if j1 <= j0 + 1 || j1 >= self.grid.ny() {
            return Err(StripError::Shape(format!("bad slice window {j0}..={j1}")));
        }
        let k = self.grid.k();
        let grid = Grid2D::span(self.grid.grid_x, self.grid.y(j0), (j1 - j0) as f64 * k, j1 - j0 + 1)?;
        let nh = self.nh();
        Field::new(grid, self.values[j0 * nh..(j1 + 1) * nh].to_vec())
    }
}

/// The atlas data restated on the strip's x-grid.
///
/// The minimisers are re-converged on `grid_x`, so that `m_h` is the exact
/// discrete minimum there and the offset `c − m_h` is the prescribed one.
#[derive(Debug, Clone)]
pub struct Level {
    pub grid_x: Grid1D,
    pub c: f64,
    /// `c − m` as prescribed relative to the atlas.
    pub offset: f64,
    pub m: f64,
    pub m_star: f64,
    pub d0: f64,
    pub minus: Profile,
    pub plus: Profile,
    pub star_holds: bool,
}

impl Level {
    /// Level `c = m + c_rel·(m* − m)` on `grid_x`.
    pub fn new(
        atlas: &HeteroclinicAtlas,
        pot: &Potential,
        grid_x: Grid1D,
        c_rel: f64,
        el_tol: f64,
    ) -> Result<Self, StripError> {
        if !(0.0..=1.0).contains(&c_rel) {
            return Err(StripError::Level {
                c: atlas.m + c_rel * (atlas.m_star - atlas.m),
                m: atlas.m,
                m_star: atlas.m_star,
            });
        }
        if c_rel > 0.0 && !atlas.star_holds {
            return Err(StripError::StarFails {
                clusters: atlas.clusters.len(),
            });
        }
        let (qm, qp) = atlas.endpoints();
        let opts = MinimizeOptions {
            el_tol,
            ..MinimizeOptions::default()
        };
        let reconverge = |q: &Profile| -> Result<Profile, StripError> {
            let seed = resample(q, grid_x);
            Ok(minimize(&seed, pot, &opts)?.into_minimizer()?)
        };
        let minus = reconverge(qm)?;
        let plus = if atlas.star_holds { reconverge(qp)? } else { minus.clone() };
        let m = minus.action(pot).min(plus.action(pot));
        let offset = c_rel * (atlas.m_star - atlas.m);
        Ok(Self {
            grid_x,
            c: m + offset,
            offset,
            m,
            m_star: m + (atlas.m_star - atlas.m),
            d0: atlas.d0,
            minus,
            plus,
            star_holds: atlas.star_holds,
        })
    }

    /// Level built directly from converged endpoint profiles.
    pub fn from_profiles(minus: Profile, plus: Profile, offset: f64, m_star_gap: f64, d0: f64, pot: &Potential) -> Self {
        let m = minus.action(pot).min(plus.action(pot));
        Self {
            grid_x: *minus.grid(),
            c: m + offset,
            offset,
            m,
            m_star: m + m_star_gap,
            d0,
            star_holds: minus.half() != plus.half(),
            minus,
            plus,
        }
    }

    /// `ℓ₀ = min{1, √((m* − c)/2)·d₀}`.
    pub fn ell0(&self) -> f64 {
        (((self.m_star - self.c).max(0.0) / 2.0).sqrt() * self.d0).min(1.0)
    }

    /// `√(2(m* − c))·d₀`.
    pub fn action_lower_bound(&self) -> f64 {
        (2.0 * (self.m_star - self.c).max(0.0)).sqrt() * self.d0
    }
}

/// Linear resampling of a profile onto another grid (padding with `a₊`).
pub fn resample(q: &Profile, grid: Grid1D) -> Profile {
    if q.grid() == &grid {
        return q.clone();
    }
    let src = q.grid();
    let h = src.h();
    let half = q.half();
    let mut p = Profile::from_fn(grid, |x| {
        let s = x / h;
        let i = s.floor() as usize;
        if i + 1 >= half.len() {
            return crate::potential::A_PLUS;
        }
        let t = s - i as f64;
        [
            half[i][0] + t * (half[i + 1][0] - half[i][0]),
            half[i][1] + t * (half[i + 1][1] - half[i][1]),
        ]
    });
    p.clamp_boundary();
    p
}

/// `C¹` smoothstep from 0 to 1 on `[−a, a]`.
fn smoothstep(y: f64, a: f64) -> f64 {
    let t = ((y + a) / (2.0 * a)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// `u₀ = (1 − θ(y)) q⁻ + θ(y) q⁺` with `θ` switching on `|y| ≤ Ly/4`,
/// each slice re-symmetrised. The end slices are exactly `q∓`.
pub fn initial_field(level: &Level, grid: Grid2D, pot: &Potential) -> Result<Field, StripError> {
    if grid.grid_x != level.grid_x {
        return Err(StripError::Shape("strip x-grid differs from the level grid".into()));
    }
    let a = 0.25 * grid.half_height();
    let mid = grid.y_start() + grid.half_height();
    let gx = grid.grid_x;
    let qm = level.minus.full();
    let qp = level.plus.full();
    let slices = (0..grid.ny())
        .map(|j| {
            let th = if j == 0 {
                0.0
            } else if j == grid.ny() - 1 {
                1.0
            } else {
                smoothstep(grid.y(j) - mid, a)
            };
            if th == 0.0 {
                return Ok(level.minus.clone());
            }
            if th == 1.0 {
                return Ok(level.plus.clone());
            }
            let full: Vec<Point> = qm
                .iter()
                .zip(&qp)
                .map(|(p, q)| [(1.0 - th) * p[0] + th * q[0], (1.0 - th) * p[1] + th * q[1]])
                .collect();
            Ok(symmetrize(&gx, &full, pot, 1e-3)?.profile)
        })
        .collect::<Result<Vec<_>, StripError>>()?;
    Field::from_slices(grid, &slices)
}
