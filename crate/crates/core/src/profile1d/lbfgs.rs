//! Preconditioned L-BFGS on the free half-grid values.

use super::{half_action, half_gradient, Profile, ProfileError};
use crate::linalg::{dot, solve_tridiagonal};
use crate::potential::{Point, Potential};
use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub struct MinimizeOptions {
    /// Stop when the nodal Euler–Lagrange residual drops below this.
    pub el_tol: f64,
    pub max_iter: usize,
    pub memory: usize,
    /// Stop as soon as the action is at most this value.
    pub target_action: Option<f64>,
    /// Keep a copy of every `snapshot_every`-th iterate (0 disables).
    pub snapshot_every: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            el_tol: 1e-8,
            max_iter: 20_000,
            memory: 10,
            target_action: None,
            snapshot_every: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimized {
    pub profile: Profile,
    pub action: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Max nodal residual `|−D₂q + ∇W(q)|` at exit.
    pub residual: f64,
    /// Action after every accepted step (first entry: the seed).
    pub history: Vec<f64>,
    pub snapshots: Vec<Profile>,
    /// Whether the sign projection fired and a second pass was run.
    pub sign_projected: bool,
}

impl Minimized {
    /// The profile, or an error if the run did not converge.
    pub fn into_minimizer(self) -> Result<Profile, ProfileError> {
        if self.converged {
            Ok(self.profile)
        } else {
            Err(ProfileError::NotConverged {
                iterations: self.iterations,
                residual: self.residual,
            })
        }
    }
}

/// Free variables: `q₁` at nodes `1..nh−1`, then `q₂` at nodes `0..nh−1`.
struct Layout {
    nh: usize,
}

impl Layout {
    fn n1(&self) -> usize {
        self.nh - 2
    }

    fn len(&self) -> usize {
        2 * self.nh - 3
    }

    fn pack(&self, half: &[Point]) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.len());
        z.extend(half[1..self.nh - 1].iter().map(|p| p[0]));
        z.extend(half[..self.nh - 1].iter().map(|p| p[1]));
        z
    }

    fn unpack(&self, z: &[f64], half: &mut [Point]) {
        let n1 = self.n1();
        for i in 1..self.nh - 1 {
            half[i][0] = z[i - 1];
        }
        for i in 0..self.nh - 1 {
            half[i][1] = z[n1 + i];
        }
    }

    fn pack_grad(&self, g: &[Point], out: &mut [f64]) {
        let n1 = self.n1();
        for i in 1..self.nh - 1 {
            out[i - 1] = g[i][0];
        }
        for i in 0..self.nh - 1 {
            out[n1 + i] = g[i][1];
        }
    }
}

/// `P = (2/h)·L + M`: the kinetic stiffness plus the lumped mass, with a
/// Dirichlet end for `q₁` at the origin and a free end for `q₂`.
struct Precond {
    n1: usize,
    d1: Vec<f64>,
    o1: Vec<f64>,
    d2: Vec<f64>,
    o2: Vec<f64>,
    work: Vec<f64>,
}

impl Precond {
    fn new(h: f64, nh: usize) -> Self {
        let s = 2.0 / h;
        let n1 = nh - 2;
        let d1 = vec![2.0 * s + 2.0 * h; n1];
        let o1 = vec![-s; n1.saturating_sub(1)];
        let mut d2 = vec![2.0 * s + 2.0 * h; nh - 1];
        d2[0] = s + h;
        let o2 = vec![-s; nh - 2];
        Self {
            n1,
            d1,
            o1,
            d2,
            o2,
            work: Vec::new(),
        }
    }

    fn solve(&mut self, v: &mut [f64]) {
        let (a, b) = v.split_at_mut(self.n1);
        solve_tridiagonal(&self.d1, &self.o1, a, &mut self.work);
        solve_tridiagonal(&self.d2, &self.o2, b, &mut self.work);
    }
}

struct Problem<'a> {
    pot: &'a Potential,
    profile: Profile,
    layout: Layout,
    inv_w: Vec<f64>,
    gbuf: Vec<Point>,
}

impl Problem<'_> {
    fn eval(&mut self, z: &[f64], grad: &mut [f64]) -> f64 {
        let grid = *self.profile.grid();
        let half = self.profile.half_mut();
        self.layout.unpack(z, half);
        half_gradient(&grid, half, self.pot, &mut self.gbuf);
        self.layout.pack_grad(&self.gbuf, grad);
        half_action(&grid, half, self.pot)
    }

    fn residual(&self, grad: &[f64]) -> f64 {
        grad.iter()
            .zip(&self.inv_w)
            .fold(0.0, |m, (g, w)| m.max((g * w).abs()))
    }
}

/// Minimises the discrete action over the symmetric class starting from
/// `seed`; the boundary value and `q₁(0) = 0` stay fixed.
pub fn minimize(seed: &Profile, pot: &Potential, opts: &MinimizeOptions) -> Result<Minimized, ProfileError> {
    let mut first = run(seed.clone(), pot, opts)?;
    let mut fixed = first.profile.clone();
    if fixed.enforce_sign() {
        let mut second = run(fixed, pot, opts)?;
        second.iterations += first.iterations;
        let mut history = std::mem::take(&mut first.history);
        history.extend(second.history.iter().skip(1));
        second.history = history;
        first.snapshots.append(&mut second.snapshots);
        second.snapshots = first.snapshots;
        second.sign_projected = true;
        return Ok(second);
    }
    Ok(first)
}

fn run(seed: Profile, pot: &Potential, opts: &MinimizeOptions) -> Result<Minimized, ProfileError> {
    let grid = *seed.grid();
    let nh = grid.half_len();
    if nh < 3 {
        return Err(ProfileError::Precondition("grid too coarse".into()));
    }
    let layout = Layout { nh };
    let w = grid.half_weights();
    let mut inv_w: Vec<f64> = w[1..nh - 1].iter().map(|x| 1.0 / x).collect();
    inv_w.extend(w[..nh - 1].iter().map(|x| 1.0 / x));
    let mut z = layout.pack(seed.half());
    let nz = z.len();
    let mut prob = Problem {
        pot,
        profile: seed,
        layout,
        inv_w,
        gbuf: vec![[0.0; 2]; nh],
    };
    let mut pre = Precond::new(grid.h(), nh);

    let mut g = vec![0.0; nz];
    let mut f = prob.eval(&z, &mut g);
    if !f.is_finite() {
        return Err(ProfileError::Precondition("seed has non-finite action".into()));
    }
    let mut history = vec![f];
    let mut snapshots = Vec::new();
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut gamma = 1.0;
    let mut residual = prob.residual(&g);
    let mut converged = residual < opts.el_tol;
    let mut iterations = 0;

    let mut z_new = vec![0.0; nz];
    let mut g_new = vec![0.0; nz];
    let mut d = vec![0.0; nz];
    let mut alphas = vec![0.0; opts.memory];

    while !converged && iterations < opts.max_iter {
        if opts.target_action.is_some_and(|t| f <= t) {
            break;
        }
        // two-loop recursion with H₀ = γ P⁻¹
        for (di, gi) in d.iter_mut().zip(&g) {
            *di = -gi;
        }
        for (k, (s, y, rho)) in mem.iter().enumerate().rev() {
            let a = rho * dot(s, &d);
            alphas[k] = a;
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
        }
        pre.solve(&mut d);
        for di in d.iter_mut() {
            *di *= gamma;
        }
        for (k, (s, y, rho)) in mem.iter().enumerate() {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (alphas[k] - b) * si;
            }
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 || !slope.is_finite() {
            mem.clear();
            gamma = 1.0;
            for (di, gi) in d.iter_mut().zip(&g) {
                *di = -gi;
            }
            pre.solve(&mut d);
            slope = dot(&g, &d);
        }

        let noise = 1e-14 * f.abs().max(1.0);
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-20 {
            for i in 0..nz {
                z_new[i] = z[i] + step * d[i];
            }
            let f_new = prob.eval(&z_new, &mut g_new);
            if f_new.is_finite() && f_new <= f + 1e-4 * step * slope + noise {
                accepted = Some(f_new);
                break;
            }
            step *= 0.5;
        }
        let Some(f_new) = accepted else {
            if mem.is_empty() {
                break;
            }
            mem.clear();
            gamma = 1.0;
            continue;
        };
        iterations += 1;

        let s: Vec<f64> = z_new.iter().zip(&z).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            let mut pinv_y = y.clone();
            pre.solve(&mut pinv_y);
            let ypy = dot(&y, &pinv_y);
            if ypy > 0.0 {
                gamma = sy / ypy;
            }
            if mem.len() == opts.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        std::mem::swap(&mut z, &mut z_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
        history.push(f);
        residual = prob.residual(&g);
        converged = residual < opts.el_tol;
        if opts.snapshot_every > 0 && iterations % opts.snapshot_every == 0 {
            let mut snap = prob.profile.clone();
            prob.layout.unpack(&z, snap.half_mut());
            snapshots.push(snap);
        }
    }
    let mut profile = prob.profile;
    prob.layout.unpack(&z, profile.half_mut());
    profile.set_cached_action(f);
    Ok(Minimized {
        profile,
        action: f,
        converged,
        iterations,
        residual,
        history,
        snapshots,
        sign_projected: false,
    })
}
