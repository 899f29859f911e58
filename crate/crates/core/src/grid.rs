//! Uniform grids on the truncated line and strip.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("half length must be positive and finite, got {0}")]
    Length(f64),
    #[error("node count must be odd and at least {min}, got {n}")]
    Nodes { n: usize, min: usize },
}

/// Uniform grid on `[-Lx, Lx]` with an odd node count, so `x = 0` is a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    half_length: f64,
    n: usize,
}

impl Grid1D {
    pub const MIN_NODES: usize = 129;

    pub fn new(half_length: f64, n: usize) -> Result<Self, GridError> {
        Self::with_min(half_length, n, Self::MIN_NODES)
    }

    /// Like [`Grid1D::new`] with a relaxed node floor, for coarse test grids.
    pub fn with_min(half_length: f64, n: usize, min: usize) -> Result<Self, GridError> {
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(GridError::Length(half_length));
        }
        if n.is_multiple_of(2) || n < min.max(5) {
            return Err(GridError::Nodes { n, min: min.max(5) });
        }
        Ok(Self { half_length, n })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_length / (self.n - 1) as f64
    }

    /// Index of the node `x = 0`.
    pub fn center(&self) -> usize {
        (self.n - 1) / 2
    }

    /// Number of nodes with `x ≥ 0`.
    pub fn half_len(&self) -> usize {
        self.center() + 1
    }

    pub fn x(&self, i: usize) -> f64 {
        // symmetric formula keeps x(center + j) == -x(center - j) exactly
        let c = self.center() as f64;
        (i as f64 - c) * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Grid with the spacing halved over the same interval.
    pub fn refined(&self) -> Self {
        Self {
            half_length: self.half_length,
            n: 2 * self.n - 1,
        }
    }

    /// Trapezoid weights on the half grid for the full-line `L²` product of
    /// symmetric pairs: `h` at the centre and the boundary, `2h` in between.
    pub fn half_weights(&self) -> Vec<f64> {
        let nh = self.half_len();
        let h = self.h();
        (0..nh)
            .map(|i| if i == 0 || i == nh - 1 { h } else { 2.0 * h })
            .collect()
    }
}

/// Strip grid: x-grid from [`Grid1D`] and `ny` uniformly spaced slices
/// starting at `y_start`; the default strip is `[-Ly, Ly]` with `ny ≥ 65`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub grid_x: Grid1D,
    y_start: f64,
    length: f64,
    ny: usize,
}

impl Grid2D {
    pub const MIN_SLICES: usize = 65;

    pub fn new(grid_x: Grid1D, half_height: f64, ny: usize) -> Result<Self, GridError> {
        Self::with_min(grid_x, half_height, ny, Self::MIN_SLICES)
    }

    pub fn with_min(grid_x: Grid1D, half_height: f64, ny: usize, min: usize) -> Result<Self, GridError> {
        if ny < min.max(3) {
            return Err(GridError::Nodes { n: ny, min: min.max(3) });
        }
        Self::span(grid_x, -half_height, 2.0 * half_height, ny)
    }

    /// Slices on `[y_start, y_start + length]`.
    pub fn span(grid_x: Grid1D, y_start: f64, length: f64, ny: usize) -> Result<Self, GridError> {
        if !(length > 0.0 && length.is_finite() && y_start.is_finite()) {
            return Err(GridError::Length(length));
        }
        if ny < 3 {
            return Err(GridError::Nodes { n: ny, min: 3 });
        }
        Ok(Self {
            grid_x,
            y_start,
            length,
            ny,
        })
    }

    pub fn half_height(&self) -> f64 {
        0.5 * self.length
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn y_start(&self) -> f64 {
        self.y_start
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn k(&self) -> f64 {
        self.length / (self.ny - 1) as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_start + j as f64 * self.k()
    }

    pub fn refined(&self) -> Self {
        Self {
            grid_x: self.grid_x.refined(),
            y_start: self.y_start,
            length: self.length,
            ny: 2 * self.ny - 1,
        }
    }
}
