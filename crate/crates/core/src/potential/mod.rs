//! Symmetric double-well potentials on the plane.
//!
//! Every built-in potential vanishes exactly at `a± = (±1, 0)`, is strictly
//! positive elsewhere and is even in the first coordinate. Values, gradients
//! and Hessians are closed forms; [`estimate_constants`] audits the numerical
//! constants that the one- and two-dimensional solvers rely on.

mod constants;
mod table;

pub use constants::{audit_potential, estimate_constants, HypothesisReport, PotentialAudit};
pub use table::TablePotential;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

pub const A_MINUS: Point = [-1.0, 0.0];
pub const A_PLUS: Point = [1.0, 0.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("non-finite point ({0}, {1})")]
    Domain(f64, f64),
    #[error("invalid potential parameter: {0}")]
    Parameter(String),
    #[error("hypothesis {hypothesis} fails: {reason}")]
    Hypothesis {
        hypothesis: &'static str,
        reason: String,
    },
    #[error("invalid table: {0}")]
    Table(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    GinzburgLandau,
    Channel,
    UserTable,
}

/// A double-well energy density `W: R² → [0, ∞)`.
#[derive(Debug, Clone)]
pub enum Potential {
    /// `W(z) = |z² − 1|² / 4` with `z = u₁ + i u₂`.
    GinzburgLandau,
    /// `W = (u₁² − 1)² + (u₂² − δ(1 − u₁²))² + ε u₂²`.
    Channel { delta_ch: f64, eps_w: f64 },
    UserTable(Box<TablePotential>),
    /// Identically zero. Only meant for tests of the kinetic part of the
    /// action; it is not an admissible double well.
    #[doc(hidden)]
    Zero,
}

impl Potential {
    pub fn channel(delta_ch: f64, eps_w: f64) -> Result<Self, PotentialError> {
        if !(delta_ch > 0.0 && delta_ch.is_finite()) {
            return Err(PotentialError::Parameter(format!(
                "channel depth must be positive, got {delta_ch}"
            )));
        }
        if !(eps_w >= 0.0 && eps_w.is_finite()) {
            return Err(PotentialError::Parameter(format!(
                "well stiffness must be non-negative, got {eps_w}"
            )));
        }
        Ok(Potential::Channel { delta_ch, eps_w })
    }

    pub fn kind(&self) -> PotentialKind {
        match self {
            Potential::GinzburgLandau | Potential::Zero => PotentialKind::GinzburgLandau,
            Potential::Channel { .. } => PotentialKind::Channel,
            Potential::UserTable(_) => PotentialKind::UserTable,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            Potential::Channel { delta_ch, eps_w } => vec![*delta_ch, *eps_w],
            _ => Vec::new(),
        }
    }

    pub fn minima(&self) -> (Point, Point) {
        (A_MINUS, A_PLUS)
    }

    /// Short human-readable label, used in reports.
    pub fn label(&self) -> String {
        match self {
            Potential::GinzburgLandau => "gl".to_string(),
            Potential::Channel { delta_ch, eps_w } => {
                format!("channel(delta_ch={delta_ch}, eps_w={eps_w})")
            }
            Potential::UserTable(_) => "table".to_string(),
            Potential::Zero => "zero".to_string(),
        }
    }

    /// Checked evaluation of `W`.
    pub fn eval(&self, p: Point) -> Result<f64, PotentialError> {
        check_finite(p)?;
        Ok(self.value(p))
    }

    pub fn gradient(&self, p: Point) -> Result<Point, PotentialError> {
        check_finite(p)?;
        Ok(self.grad(p))
    }

    pub fn hessian(&self, p: Point) -> Result<Mat2, PotentialError> {
        check_finite(p)?;
        Ok(self.hess(p))
    }

    /// Unchecked value, for inner loops.
    #[inline]
    pub fn value(&self, p: Point) -> f64 {
        let [u1, u2] = p;
        match self {
            Potential::GinzburgLandau => {
                let re = u1 * u1 - u2 * u2 - 1.0;
                let im = 2.0 * u1 * u2;
                0.25 * (re * re + im * im)
            }
            Potential::Channel { delta_ch, eps_w } => {
                let a = u1 * u1 - 1.0;
                let b = u2 * u2 - delta_ch * (1.0 - u1 * u1);
                a * a + b * b + eps_w * u2 * u2
            }
            Potential::UserTable(t) => t.value(p),
            Potential::Zero => 0.0,
        }
    }

    #[inline]
    pub fn grad(&self, p: Point) -> Point {
        let [u1, u2] = p;
        match self {
            Potential::GinzburgLandau => {
                let r2 = u1 * u1 + u2 * u2;
                [u1 * (r2 - 1.0), u2 * (r2 + 1.0)]
            }
            Potential::Channel { delta_ch, eps_w } => {
                let a = u1 * u1 - 1.0;
                let b = u2 * u2 - delta_ch * (1.0 - u1 * u1);
                [
                    4.0 * u1 * (a + delta_ch * b),
                    4.0 * u2 * b + 2.0 * eps_w * u2,
                ]
            }
            Potential::UserTable(t) => t.grad(p),
            Potential::Zero => [0.0, 0.0],
        }
    }

    #[inline]
    pub fn hess(&self, p: Point) -> Mat2 {
        let [u1, u2] = p;
        match self {
            Potential::GinzburgLandau => {
                let r2 = u1 * u1 + u2 * u2;
                let off = 2.0 * u1 * u2;
                [
                    [r2 - 1.0 + 2.0 * u1 * u1, off],
                    [off, r2 + 1.0 + 2.0 * u2 * u2],
                ]
            }
            Potential::Channel { delta_ch, eps_w } => {
                let a = u1 * u1 - 1.0;
                let b = u2 * u2 - delta_ch * (1.0 - u1 * u1);
                let h11 = 4.0 * (a + delta_ch * b) + 8.0 * u1 * u1 * (1.0 + delta_ch * delta_ch);
                let h12 = 8.0 * delta_ch * u1 * u2;
                let h22 = 4.0 * b + 8.0 * u2 * u2 + 2.0 * eps_w;
                [[h11, h12], [h12, h22]]
            }
            Potential::UserTable(t) => t.hess(p),
            Potential::Zero => [[0.0; 2]; 2],
        }
    }
}

fn check_finite(p: Point) -> Result<(), PotentialError> {
    if p[0].is_finite() && p[1].is_finite() {
        Ok(())
    } else {
        Err(PotentialError::Domain(p[0], p[1]))
    }
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn sym_eigenvalues(m: &Mat2) -> (f64, f64) {
    let tr = m[0][0] + m[1][1];
    let diff = m[0][0] - m[1][1];
    let disc = (0.25 * diff * diff + m[0][1] * m[0][1]).sqrt();
    (0.5 * tr - disc, 0.5 * tr + disc)
}

/// `χ(x) = min(|x − a₋|, |x − a₊|)`.
#[inline]
pub fn chi(p: Point) -> f64 {
    let dm = ((p[0] - A_MINUS[0]).powi(2) + p[1].powi(2)).sqrt();
    let dp = ((p[0] - A_PLUS[0]).powi(2) + p[1].powi(2)).sqrt();
    dm.min(dp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn builtins() -> Vec<Potential> {
        vec![
            Potential::GinzburgLandau,
            Potential::channel(0.9, 0.05).unwrap(),
            Potential::channel(0.5, 0.3).unwrap(),
        ]
    }

    #[test]
    fn values_at_reference_points() {
        let ch = Potential::channel(0.9, 0.05).unwrap();
        assert_eq!(ch.eval([1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(ch.eval([-1.0, 0.0]).unwrap(), 0.0);
        assert!((ch.eval([0.0, 0.0]).unwrap() - 1.81).abs() < 1e-15);
        assert!((Potential::GinzburgLandau.eval([0.0, 0.0]).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn non_finite_input_is_a_domain_error() {
        let p = Potential::GinzburgLandau;
        assert!(matches!(p.eval([f64::NAN, 0.0]), Err(PotentialError::Domain(..))));
        assert!(p.gradient([0.0, f64::INFINITY]).is_err());
        assert!(p.hessian([f64::NEG_INFINITY, 0.0]).is_err());
    }

    #[test]
    fn evenness_in_first_coordinate_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for pot in builtins() {
            for _ in 0..100 {
                let x: f64 = rng.gen_range(-3.0..3.0);
                let y: f64 = rng.gen_range(-3.0..3.0);
                assert_eq!(pot.value([x, y]), pot.value([-x, y]));
            }
        }
    }

    #[test]
    fn minima_are_critical_and_nondegenerate() {
        for pot in builtins() {
            for a in [A_MINUS, A_PLUS] {
                assert_eq!(pot.grad(a), [0.0, 0.0]);
                let (lo, _) = sym_eigenvalues(&pot.hess(a));
                assert!(lo > 0.0, "{} not positive definite at {a:?}", pot.label());
            }
        }
        let (lo, hi) = sym_eigenvalues(&Potential::channel(0.9, 0.05).unwrap().hess(A_PLUS));
        assert!((lo - 0.1).abs() < 1e-14);
        assert!((hi - 8.0 * 1.81).abs() < 1e-12);
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for pot in builtins() {
            for _ in 0..1000 {
                let p = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
                let g = pot.grad(p);
                let h = pot.hess(p);
                let eps = 1e-5;
                for k in 0..2 {
                    let mut pp = p;
                    let mut pm = p;
                    pp[k] += eps;
                    pm[k] -= eps;
                    let fd = (pot.value(pp) - pot.value(pm)) / (2.0 * eps);
                    let gnorm = (g[0] * g[0] + g[1] * g[1]).sqrt();
                    assert!((fd - g[k]).abs() / (1.0 + gnorm) < 1e-6);
                    let gp = pot.grad(pp);
                    let gm = pot.grad(pm);
                    for l in 0..2 {
                        let fdh = (gp[l] - gm[l]) / (2.0 * eps);
                        assert!((fdh - h[l][k]).abs() / (1.0 + h[l][k].abs()) < 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn channel_parameters_are_validated() {
        assert!(Potential::channel(0.0, 0.1).is_err());
        assert!(Potential::channel(0.9, -0.1).is_err());
        assert!(Potential::channel(f64::NAN, 0.1).is_err());
    }

    #[test]
    fn eigenvalues_of_symmetric_matrix() {
        let (lo, hi) = sym_eigenvalues(&[[2.0, 1.0], [1.0, 2.0]]);
        assert!((lo - 1.0).abs() < 1e-15 && (hi - 3.0).abs() < 1e-15);
    }
}
