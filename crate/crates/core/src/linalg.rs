//! Small dense/iterative kernels shared by the solvers.

/// Solves a symmetric tridiagonal system in place (Thomas algorithm).
///
/// `diag` has length n, `off` has length n-1 (sub- and super-diagonal).
/// The matrix must be diagonally dominant or SPD.
pub fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &mut [f64], work: &mut Vec<f64>) {
    let n = diag.len();
    if n == 0 {
        return;
    }
    work.clear();
    work.resize(n, 0.0);
    let mut denom = diag[0];
    rhs[0] /= denom;
    for i in 1..n {
        work[i] = off[i - 1] / denom;
        denom = diag[i] - off[i - 1] * work[i];
        rhs[i] = (rhs[i] - off[i - 1] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= work[i + 1] * rhs[i + 1];
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CgExit {
    Converged,
    NegativeCurvature,
    MaxIterations,
}

/// Preconditioned conjugate gradients for `H p = -g`, truncated on negative
/// curvature (returns the current iterate, or the preconditioned steepest
/// descent direction if curvature is non-positive at the first step).
pub fn truncated_pcg<H, P>(
    g: &[f64],
    mut hess: H,
    mut precond: P,
    rel_tol: f64,
    max_iter: usize,
) -> (Vec<f64>, CgExit, usize)
where
    H: FnMut(&[f64], &mut [f64]),
    P: FnMut(&[f64], &mut [f64]),
{
    let n = g.len();
    let mut p = vec![0.0; n];
    let mut r: Vec<f64> = g.iter().map(|x| -x).collect();
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut d = z.clone();
    let mut rz = dot(&r, &z);
    let r0 = rz.abs().sqrt();
    let mut hd = vec![0.0; n];
    for it in 0..max_iter {
        hess(&d, &mut hd);
        let curv = dot(&d, &hd);
        if curv <= 1e-300 * dot(&d, &d) {
            if it == 0 {
                return (d, CgExit::NegativeCurvature, it);
            }
            return (p, CgExit::NegativeCurvature, it);
        }
        let alpha = rz / curv;
        axpy(alpha, &d, &mut p);
        axpy(-alpha, &hd, &mut r);
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        if rz_new.abs().sqrt() <= rel_tol * r0 {
            return (p, CgExit::Converged, it + 1);
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for (di, zi) in d.iter_mut().zip(&z) {
            *di = zi + beta * *di;
        }
    }
    (p, CgExit::MaxIterations, max_iter)
}

/// Preconditioned MINRES for symmetric (possibly indefinite) `A x = b`,
/// with a symmetric positive definite preconditioner. Returns the solution
/// and the number of iterations.
pub fn minres<A, P>(b: &[f64], mut apply: A, mut precond: P, rel_tol: f64, max_iter: usize) -> (Vec<f64>, usize)
where
    A: FnMut(&[f64], &mut [f64]),
    P: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r1 = b.to_vec();
    let mut y = vec![0.0; n];
    precond(&r1, &mut y);
    let mut beta1 = dot(&r1, &y);
    if beta1 <= 0.0 {
        return (x, 0);
    }
    beta1 = beta1.sqrt();
    let mut r2 = r1.clone();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut av = vec![0.0; n];

    for it in 1..=max_iter {
        let s = 1.0 / beta;
        for i in 0..n {
            v[i] = s * y[i];
        }
        apply(&v, &mut av);
        let mut yy = av.clone();
        if it >= 2 {
            axpy(-beta / oldb, &r1, &mut yy);
        }
        let alfa = dot(&v, &yy);
        axpy(-alfa / beta, &r2, &mut yy);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&yy);
        precond(&r2, &mut y);
        oldb = beta;
        let b2 = dot(&r2, &y);
        if b2 < 0.0 {
            // preconditioner not positive definite
            return (x, it);
        }
        beta = b2.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = (gbar * gbar + beta * beta).sqrt().max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        for i in 0..n {
            let w1 = w2[i];
            w2[i] = w[i];
            w[i] = (v[i] - oldeps * w1 - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }
        if phibar <= rel_tol * beta1 {
            return (x, it);
        }
    }
    (x, max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lap(n: usize, shift: f64) -> impl Fn(&[f64], &mut [f64]) {
        move |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                y[i] = (2.0 + shift) * x[i] - l - r;
            }
        }
    }

    #[test]
    fn thomas_solves_laplacian() {
        let n = 50;
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = vec![0.0; n];
        lap(n, 0.1)(&x_true, &mut b);
        let diag = vec![2.1; n];
        let off = vec![-1.0; n - 1];
        let mut work = Vec::new();
        solve_tridiagonal(&diag, &off, &mut b, &mut work);
        for i in 0..n {
            assert!((b[i] - x_true[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn pcg_converges_on_spd_system() {
        let n = 80;
        let a = lap(n, 0.01);
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let mut b = vec![0.0; n];
        a(&x_true, &mut b);
        let g: Vec<f64> = b.iter().map(|v| -v).collect();
        let (x, exit, _) = truncated_pcg(&g, &a, |r, z| z.copy_from_slice(r), 1e-12, 500);
        assert_eq!(exit, CgExit::Converged);
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn minres_solves_indefinite_system() {
        let n = 60;
        let a = lap(n, -0.5);
        let x_true: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.7).sin()).collect();
        let mut b = vec![0.0; n];
        a(&x_true, &mut b);
        let (x, _) = minres(&b, &a, |r, z| z.copy_from_slice(r), 1e-13, 2000);
        let mut ax = vec![0.0; n];
        a(&x, &mut ax);
        let res: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        assert!(res < 1e-9, "residual {res}");
    }
}
