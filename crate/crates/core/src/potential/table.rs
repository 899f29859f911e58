//! Tabulated potentials with bicubic Hermite interpolation.

use super::{Mat2, Point, PotentialError};

/// A user-supplied potential sampled on a uniform grid over
/// `[0, x_max] × [y_min, y_max]`; values for `u₁ < 0` come from the mirror
/// image, so evenness in `u₁` is exact.
///
/// Nodal derivatives are central differences of the table (zero across the
/// mirror line and at the wells). Outside the table the nearest boundary
/// value is used plus the squared distance to the box.
#[derive(Debug, Clone)]
pub struct TablePotential {
    x_max: f64,
    y_min: f64,
    y_max: f64,
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    // [f, fx, fy, fxy] per node, row-major in x then y
    nodes: Vec<[f64; 4]>,
}

impl TablePotential {
    /// `values[i][j]` is `W(i·dx, y_min + j·dy)`.
    pub fn from_grid(
        x_max: f64,
        y_min: f64,
        y_max: f64,
        values: Vec<Vec<f64>>,
    ) -> Result<Self, PotentialError> {
        let nx = values.len();
        if nx < 4 {
            return Err(PotentialError::Table("need at least 4 columns in u1".into()));
        }
        let ny = values[0].len();
        if ny < 4 || values.iter().any(|r| r.len() != ny) {
            return Err(PotentialError::Table("ragged table or fewer than 4 rows in u2".into()));
        }
        if !(x_max > 1.0 && y_min < 0.0 && y_max > 0.0) {
            return Err(PotentialError::Table(
                "table box must contain the wells (±1, 0) in its interior".into(),
            ));
        }
        if values.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(PotentialError::Table("values must be finite and non-negative".into()));
        }
        let dx = x_max / (nx - 1) as f64;
        let dy = (y_max - y_min) / (ny - 1) as f64;
        let iw = (1.0 / dx).round() as usize;
        let jw = (-y_min / dy).round() as usize;
        if ((iw as f64) * dx - 1.0).abs() > 1e-9 || (y_min + jw as f64 * dy).abs() > 1e-9 {
            return Err(PotentialError::Table("(1, 0) must be a table node".into()));
        }
        if values[iw][jw] != 0.0 {
            return Err(PotentialError::Table("W(1, 0) must be exactly 0".into()));
        }

        let f = |i: usize, j: usize| values[i][j];
        let dfx = |i: usize, j: usize| -> f64 {
            if i == 0 {
                0.0
            } else if i == nx - 1 {
                (f(i, j) - f(i - 1, j)) / dx
            } else {
                (f(i + 1, j) - f(i - 1, j)) / (2.0 * dx)
            }
        };
        let dfy = |i: usize, j: usize, g: &dyn Fn(usize, usize) -> f64| -> f64 {
            if j == 0 {
                (g(i, 1) - g(i, 0)) / dy
            } else if j == ny - 1 {
                (g(i, j) - g(i, j - 1)) / dy
            } else {
                (g(i, j + 1) - g(i, j - 1)) / (2.0 * dy)
            }
        };
        let mut nodes = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                let mut n = [f(i, j), dfx(i, j), dfy(i, j, &f), dfy(i, j, &dfx)];
                if i == iw && j == jw {
                    n[1] = 0.0;
                    n[2] = 0.0;
                    n[3] = 0.0;
                }
                nodes.push(n);
            }
        }
        Ok(Self {
            x_max,
            y_min,
            y_max,
            nx,
            ny,
            dx,
            dy,
            nodes,
        })
    }

    /// Samples `w` on the grid; convenient for auditing closed forms.
    pub fn sample<F: Fn(Point) -> f64>(
        w: F,
        x_max: f64,
        y_min: f64,
        y_max: f64,
        nx: usize,
        ny: usize,
    ) -> Result<Self, PotentialError> {
        let dx = x_max / (nx - 1) as f64;
        let dy = (y_max - y_min) / (ny - 1) as f64;
        let values = (0..nx)
            .map(|i| (0..ny).map(|j| w([i as f64 * dx, y_min + j as f64 * dy])).collect())
            .collect();
        Self::from_grid(x_max, y_min, y_max, values)
    }

    pub fn value(&self, p: Point) -> f64 {
        self.eval_all(p).0
    }

    pub fn grad(&self, p: Point) -> Point {
        self.eval_all(p).1
    }

    pub fn hess(&self, p: Point) -> Mat2 {
        self.eval_all(p).2
    }

    fn eval_all(&self, p: Point) -> (f64, Point, Mat2) {
        let sign = if p[0] < 0.0 { -1.0 } else { 1.0 };
        let x = p[0].abs();
        let (xc, ex) = clamp_excess(x, 0.0, self.x_max);
        let (yc, ey) = clamp_excess(p[1], self.y_min, self.y_max);

        let i = ((xc / self.dx).floor() as usize).min(self.nx - 2);
        let j = (((yc - self.y_min) / self.dy).floor() as usize).min(self.ny - 2);
        let s = (xc - i as f64 * self.dx) / self.dx;
        let t = (yc - self.y_min - j as f64 * self.dy) / self.dy;
        let bs = hermite(s);
        let bt = hermite(t);

        let mut v = 0.0;
        let mut vx = 0.0;
        let mut vy = 0.0;
        let mut vxx = 0.0;
        let mut vxy = 0.0;
        let mut vyy = 0.0;
        for (a, corner_x) in [(0usize, i), (1, i + 1)] {
            for (b, corner_y) in [(0usize, j), (1, j + 1)] {
                let n = self.nodes[corner_x * self.ny + corner_y];
                // (coefficient, x-basis index, y-basis index)
                let terms = [
                    (n[0], a, b),
                    (n[1] * self.dx, 2 + a, b),
                    (n[2] * self.dy, a, 2 + b),
                    (n[3] * self.dx * self.dy, 2 + a, 2 + b),
                ];
                for (c, ix, iy) in terms {
                    let (h, hd, hdd) = bs[ix];
                    let (g, gd, gdd) = bt[iy];
                    v += c * h * g;
                    vx += c * hd * g / self.dx;
                    vy += c * h * gd / self.dy;
                    vxx += c * hdd * g / (self.dx * self.dx);
                    vxy += c * hd * gd / (self.dx * self.dy);
                    vyy += c * h * gdd / (self.dy * self.dy);
                }
            }
        }
        v += ex * ex + ey * ey;
        vx += 2.0 * ex;
        vy += 2.0 * ey;
        if ex != 0.0 {
            vxx = 2.0;
            vxy = 0.0;
        }
        if ey != 0.0 {
            vyy = 2.0;
            vxy = 0.0;
        }
        (
            v,
            [sign * vx, vy],
            [[vxx, sign * vxy], [sign * vxy, vyy]],
        )
    }
}

fn clamp_excess(x: f64, lo: f64, hi: f64) -> (f64, f64) {
    if x < lo {
        (lo, x - lo)
    } else if x > hi {
        (hi, x - hi)
    } else {
        (x, 0.0)
    }
}

/// Cubic Hermite basis `[h00, h01, h10, h11]` with first and second derivatives.
fn hermite(s: f64) -> [(f64, f64, f64); 4] {
    let s2 = s * s;
    let s3 = s2 * s;
    [
        (2.0 * s3 - 3.0 * s2 + 1.0, 6.0 * s2 - 6.0 * s, 12.0 * s - 6.0),
        (-2.0 * s3 + 3.0 * s2, -6.0 * s2 + 6.0 * s, -12.0 * s + 6.0),
        (s3 - 2.0 * s2 + s, 3.0 * s2 - 4.0 * s + 1.0, 6.0 * s - 4.0),
        (s3 - s2, 3.0 * s2 - 2.0 * s, 6.0 * s - 2.0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;

    fn gl_table() -> TablePotential {
        let gl = Potential::GinzburgLandau;
        TablePotential::sample(|p| gl.value(p), 3.0, -3.0, 3.0, 121, 241).unwrap()
    }

    #[test]
    fn reproduces_nodes_and_is_even() {
        let t = gl_table();
        let gl = Potential::GinzburgLandau;
        assert!((t.value([0.5, 0.25]) - gl.value([0.5, 0.25])).abs() < 1e-12);
        assert_eq!(t.value([1.0, 0.0]), 0.0);
        for p in [[0.37, 0.11], [1.3, -0.7], [2.2, 1.9]] {
            assert_eq!(t.value(p), t.value([-p[0], p[1]]));
            assert!((t.value(p) - gl.value(p)).abs() < 1e-4);
        }
    }

    #[test]
    fn interpolant_derivatives_are_consistent() {
        let t = gl_table();
        let eps = 1e-6;
        // points off the cell edges, where the interpolant is only C¹
        for p in [[0.37, 0.11], [-1.31, -0.71], [0.93, 0.02]] {
            let g = t.grad(p);
            for k in 0..2 {
                let mut pp = p;
                let mut pm = p;
                pp[k] += eps;
                pm[k] -= eps;
                let fd = (t.value(pp) - t.value(pm)) / (2.0 * eps);
                assert!((fd - g[k]).abs() < 1e-6, "k={k} fd={fd} g={}", g[k]);
                let gp = t.grad(pp);
                let gm = t.grad(pm);
                let h = t.hess(p);
                for l in 0..2 {
                    assert!(((gp[l] - gm[l]) / (2.0 * eps) - h[l][k]).abs() < 1e-5);
                }
            }
        }
        assert_eq!(t.grad([1.0, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn rejects_tables_without_a_zero_well() {
        let err = TablePotential::sample(|p| 1.0 + p[0] * p[0], 3.0, -3.0, 3.0, 31, 61);
        assert!(err.is_err());
        let err = TablePotential::sample(|_| 0.0, 0.5, -3.0, 3.0, 31, 61);
        assert!(err.is_err());
    }
}
