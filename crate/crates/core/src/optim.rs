//! Projected quasi-Newton minimization over a box, with central finite
//! difference gradients.
//!
//! Each iteration fixes the variables held at a bound by an outward-pointing
//! gradient, takes an inverse-BFGS step in the remaining ones and runs a
//! projected Armijo backtracking search along the clamped path.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug)]
pub struct BoxOptions {
    pub max_iterations: usize,
    /// Stop when the projected gradient's max-norm drops below this times `|f|`.
    pub gradient_tolerance: f64,
    /// Stop when an accepted step moves no coordinate by more than this.
    pub step_tolerance: f64,
    pub fd_step: f64,
    /// Treat `lower` and `upper` as the same point in every coordinate: a
    /// variable stuck at one bound may jump to the other one.
    pub periodic: bool,
}

#[derive(Clone, Debug)]
pub struct BoxResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;

fn clamp(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((xi, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *xi = xi.clamp(*lo, *hi);
    }
}

/// Central differences, falling back to one-sided ones when a probe is not finite.
pub fn fd_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], fx: f64, h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let fp = f(&probe);
            probe[i] = x[i] - h;
            let fm = f(&probe);
            probe[i] = x[i];
            match (fp.is_finite(), fm.is_finite()) {
                (true, true) => (fp - fm) / (2.0 * h),
                (true, false) if fx.is_finite() => (fp - fx) / h,
                (false, true) if fx.is_finite() => (fx - fm) / h,
                _ => 0.0,
            }
        })
        .collect()
}

fn projected_gradient_norm(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&lo, &hi))| (xi - (xi - gi).clamp(lo, hi)).abs())
        .fold(0.0, f64::max)
}

fn outward(xi: f64, gi: f64, lo: f64, hi: f64) -> bool {
    (xi <= lo && gi > 0.0) || (xi >= hi && gi < 0.0)
}

pub fn minimize_box<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &BoxOptions,
) -> BoxResult {
    let n = x0.len();
    let mut x = x0.to_vec();
    clamp(&mut x, lower, upper);
    let mut fx = f(&x);
    if !fx.is_finite() || n == 0 {
        return BoxResult {
            x,
            f: fx,
            iterations: 0,
            converged: n == 0,
        };
    }
    let mut g = fd_gradient(&f, &x, fx, opts.fd_step);
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut wraps_left = 2 * n;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        if projected_gradient_norm(&x, &g, lower, upper) <= opts.gradient_tolerance * fx.abs() {
            if opts.periodic && wraps_left > 0 && try_wrap(&f, &mut x, &mut fx, &g, lower, upper) {
                wraps_left -= 1;
                g = fd_gradient(&f, &x, fx, opts.fd_step);
                hinv.fill_with_identity();
                continue;
            }
            converged = true;
            break;
        }
        iterations += 1;

        let free: Vec<bool> = (0..n).map(|i| !outward(x[i], g[i], lower[i], upper[i])).collect();
        let gv = DVector::from_iterator(n, (0..n).map(|i| if free[i] { g[i] } else { 0.0 }));
        let mut d = -(&hinv * &gv);
        for i in 0..n {
            if !free[i] {
                d[i] = 0.0;
            }
        }
        if d.dot(&gv) >= 0.0 {
            hinv.fill_with_identity();
            d = -gv.clone();
        }

        let Some((x_new, f_new)) = line_search(&f, &x, fx, &g, &d, lower, upper) else {
            if hinv.is_identity(0.0) {
                break;
            }
            hinv.fill_with_identity();
            continue;
        };

        let s = DVector::from_iterator(n, x_new.iter().zip(&x).map(|(a, b)| a - b));
        let step = s.amax();
        let g_new = fd_gradient(&f, &x_new, f_new, opts.fd_step);
        let y = DVector::from_iterator(n, g_new.iter().zip(&g).map(|(a, b)| a - b));
        x = x_new;
        fx = f_new;
        g = g_new;

        if step < opts.step_tolerance {
            converged = true;
            break;
        }
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            bfgs_update(&mut hinv, &s, &y, sy);
        }
    }
    BoxResult {
        x,
        f: fx,
        iterations,
        converged,
    }
}

fn line_search<F: Fn(&[f64]) -> f64>(
    f: &F,
    x: &[f64],
    fx: f64,
    g: &[f64],
    d: &DVector<f64>,
    lower: &[f64],
    upper: &[f64],
) -> Option<(Vec<f64>, f64)> {
    // First trial step moves no coordinate by more than one unit.
    let mut alpha = (1.0 / d.amax()).min(1.0);
    if !alpha.is_finite() {
        return None;
    }
    let mut trial = vec![0.0; x.len()];
    for _ in 0..MAX_BACKTRACKS {
        for i in 0..x.len() {
            trial[i] = x[i] + alpha * d[i];
        }
        clamp(&mut trial, lower, upper);
        let decrease: f64 = trial.iter().zip(x).zip(g).map(|((t, xi), gi)| gi * (t - xi)).sum();
        let ft = f(&trial);
        if ft.is_finite() && ft <= fx + ARMIJO * decrease && ft <= fx {
            return Some((trial, ft));
        }
        alpha *= 0.5;
    }
    None
}

/// Inverse-Hessian BFGS update.
fn bfgs_update(hinv: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>, sy: f64) {
    let rho = 1.0 / sy;
    let hy = &*hinv * y;
    let yhy = y.dot(&hy);
    // H+ = H - rho (s hy^T + hy s^T) + (rho^2 yHy + rho) s s^T
    let coef = rho * rho * yhy + rho;
    *hinv -= (s * hy.transpose() + &hy * s.transpose()) * rho;
    *hinv += s * s.transpose() * coef;
}

/// Moves coordinates pinned at a bound by an outward gradient to the opposite
/// bound. Accepted only when the objective does not increase.
fn try_wrap<F: Fn(&[f64]) -> f64>(
    f: &F,
    x: &mut [f64],
    fx: &mut f64,
    g: &[f64],
    lower: &[f64],
    upper: &[f64],
) -> bool {
    let mut trial = x.to_vec();
    let mut moved = false;
    for i in 0..x.len() {
        if x[i] <= lower[i] && g[i] > 0.0 {
            trial[i] = upper[i];
            moved = true;
        } else if x[i] >= upper[i] && g[i] < 0.0 {
            trial[i] = lower[i];
            moved = true;
        }
    }
    if !moved {
        return false;
    }
    let ft = f(&trial);
    if ft.is_finite() && ft <= *fx {
        x.copy_from_slice(&trial);
        *fx = ft;
        true
    } else {
        false
    }
}
