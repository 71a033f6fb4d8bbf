//! Numerical certification of the two-scale expansion that justifies the
//! singular-arc concavity rule: oscillatory perturbations h0 = theta(x)
//! cos(kx) evolve as theta(x)cos(kx)e^{-k^2 t} plus a first-order
//! corrector, with an L2 remainder of size O(1/k^2), and the compensating
//! zero-mean constants alpha_k decay like 1/k^4.

use crate::adjoint::linearized_solve;
use crate::error::{Error, Result};
use crate::grid::{Grid, Grid1D, ScalarField, TimeConfig};
use crate::pde::forward_solve;
use crate::reaction::ReactionModel;

const PI: f64 = std::f64::consts::PI;

/// Smooth bump supported in (a, b): exp(1 - 1/(1 - s^2)) with
/// s = 2(x - a)/(b - a) - 1, together with its exact derivative.
#[derive(Debug, Clone)]
pub struct CutoffProfile {
    pub a: f64,
    pub b: f64,
    pub field: ScalarField,
    pub dfield: ScalarField,
}

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

fn bump_derivative(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        let d = 1.0 - s * s;
        bump(s) * (-2.0 * s / (d * d))
    }
}

/// Build the standard bump rescaled to (a, b) on the given grid.
pub fn make_cutoff(a: f64, b: f64, grid: Grid1D) -> Result<CutoffProfile> {
    if !(0.0 < a && a < b && b < PI) {
        return Err(Error::Config(format!(
            "cutoff support ({a}, {b}) must sit inside (0, pi)"
        )));
    }
    let nodes_inside = (b - a) / grid.dx();
    if nodes_inside < 32.0 {
        return Err(Error::Config(format!(
            "cutoff support ({a}, {b}) resolved by only {nodes_inside:.1} cells; need >= 32"
        )));
    }
    let to_s = move |x: f64| 2.0 * (x - a) / (b - a) - 1.0;
    let field = ScalarField::from_fn_1d(grid, |x| bump(to_s(x)));
    let scale = 2.0 / (b - a);
    let dfield = ScalarField::from_fn_1d(grid, |x| scale * bump_derivative(to_s(x)));
    Ok(CutoffProfile {
        a,
        b,
        field,
        dfield,
    })
}

/// Composed two-scale ansatz at time t for mode k, evaluated nodewise:
/// e^{-k^2 t} (theta(x) cos(kx) - 2kt theta'(x) sin(kx)).
pub fn leading_terms(theta: &CutoffProfile, k: usize, t: f64) -> ScalarField {
    let g = match theta.field.grid {
        Grid::One(g) => g,
        Grid::Two(_) => unreachable!("cutoffs are one-dimensional"),
    };
    let kf = k as f64;
    let decay = (-kf * kf * t).exp();
    let values = (0..g.n)
        .map(|i| {
            let x = g.node(i);
            decay
                * (theta.field.values[i] * (kf * x).cos()
                    - 2.0 * kf * t * theta.dfield.values[i] * (kf * x).sin())
        })
        .collect();
    ScalarField {
        grid: theta.field.grid,
        values,
    }
}

/// Remainder-decay certificate data for a frequency sweep.
#[derive(Debug, Clone)]
pub struct RemainderSweep {
    pub k_list: Vec<usize>,
    /// sup over sampled t of ||R_k(t, .)||_{L2}.
    pub sup_norms: Vec<f64>,
    /// Least-squares slope of log sup-norm against log k.
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Zero-mean compensators alpha_k = -int theta cos(k.) / int theta.
    pub alpha: Vec<f64>,
    /// Space-time integrals of R_k^2 over (0, T) x Omega.
    pub time_integrated: Vec<f64>,
}

/// Times where the remainder transient lives: geometric refinement of
/// (0, 5/k^2] plus a uniform tail up to T.
fn sample_levels(k: usize, tc: &TimeConfig) -> Vec<usize> {
    let dt = tc.dt();
    let t_fast = 5.0 / (k * k) as f64;
    let mut times = Vec::new();
    let mut t = t_fast.min(tc.t_final);
    for _ in 0..32 {
        times.push(t);
        t *= 0.5;
    }
    let tail_start = t_fast.min(tc.t_final);
    for i in 1..=20 {
        times.push(tail_start + (tc.t_final - tail_start) * i as f64 / 20.0);
    }
    let mut levels: Vec<usize> = times
        .iter()
        .map(|&t| ((t / dt).round() as usize).clamp(1, tc.nt))
        .collect();
    levels.sort_unstable();
    levels.dedup();
    levels
}

/// Solve the linearized equation for each k with h0 = theta cos(kx)
/// against the trajectory from `u_background`, and measure how fast the
/// ansatz remainder decays in k.
pub fn remainder_sweep(
    u_background: &ScalarField,
    model: &ReactionModel,
    theta: &CutoffProfile,
    k_list: &[usize],
    tc: &TimeConfig,
) -> Result<RemainderSweep> {
    let g = *u_background.grid.as_1d()?;
    if g.xmin.abs() > 1e-9 || (g.xmax - PI).abs() > 1e-9 {
        return Err(Error::Config("remainder sweep runs on (0, pi)".into()));
    }
    if theta.field.grid != u_background.grid {
        return Err(Error::Config("cutoff and background grids differ".into()));
    }
    if k_list.is_empty() {
        return Err(Error::Config("empty k list".into()));
    }
    let k_max = *k_list.iter().max().unwrap();
    if g.dx() > PI / (16.0 * k_max as f64) + 1e-15 {
        return Err(Error::Config(format!(
            "dx = {} under-resolves k = {k_max}; need dx <= pi/(16 k)",
            g.dx()
        )));
    }
    if tc.dt() > 1.0 / (10.0 * (k_max * k_max) as f64) + 1e-15 {
        return Err(Error::Config(format!(
            "dt = {} under-resolves e^(-k^2 t) for k = {k_max}; need dt <= 1/(10 k^2)",
            tc.dt()
        )));
    }

    let traj = forward_solve(u_background, model, tc)?;
    let theta_mass = theta.field.mass();

    let mut sup_norms = Vec::with_capacity(k_list.len());
    let mut alpha = Vec::with_capacity(k_list.len());
    let mut time_integrated = Vec::with_capacity(k_list.len());

    for &k in k_list {
        let kf = k as f64;
        let h0 = ScalarField {
            grid: theta.field.grid,
            values: (0..g.n)
                .map(|i| theta.field.values[i] * (kf * g.node(i)).cos())
                .collect(),
        };
        let h = linearized_solve(&traj, model, &h0)?;

        let mut sup = 0.0f64;
        for &level in &sample_levels(k, tc) {
            let t = tc.level(level);
            let ansatz = leading_terms(theta, k, t);
            let mut norm2 = 0.0;
            for i in 0..g.n {
                let r = h.fields[level].values[i] - ansatz.values[i];
                norm2 += h0.grid.weight(i) * r * r;
            }
            sup = sup.max(norm2.sqrt());
        }
        sup_norms.push(sup);

        // full space-time integral of R^2 (trapezoid in both variables)
        let dt = tc.dt();
        let mut total = 0.0;
        for level in 0..=tc.nt {
            let wt = if level == 0 || level == tc.nt {
                0.5 * dt
            } else {
                dt
            };
            let t = tc.level(level);
            let ansatz = leading_terms(theta, k, t);
            let mut slice = 0.0;
            for i in 0..g.n {
                let r = h.fields[level].values[i] - ansatz.values[i];
                slice += h0.grid.weight(i) * r * r;
            }
            total += wt * slice;
        }
        time_integrated.push(total);

        let osc = ScalarField {
            grid: theta.field.grid,
            values: (0..g.n)
                .map(|i| theta.field.values[i] * (kf * g.node(i)).cos())
                .collect(),
        };
        alpha.push(-osc.mass() / theta_mass);
    }

    let (slope, intercept, r2) = log_log_fit(k_list, &sup_norms);
    Ok(RemainderSweep {
        k_list: k_list.to_vec(),
        sup_norms,
        slope,
        intercept,
        r2,
        alpha,
        time_integrated,
    })
}

fn log_log_fit(ks: &[usize], norms: &[f64]) -> (f64, f64, f64) {
    let n = ks.len() as f64;
    let xs: Vec<f64> = ks.iter().map(|&k| (k as f64).ln()).collect();
    let ys: Vec<f64> = norms.iter().map(|&v| v.max(1e-300).ln()).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx.max(1e-300);
    let intercept = ym - slope * xm;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let p = intercept + slope * x;
            (y - p) * (y - p)
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - ym) * (y - ym)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (slope, intercept, r2)
}

/// Adaptive Simpson quadrature of `t^(m-1) e^(-k^2 t)` on (0, T), returned
/// as the ratio against the large-k limit (m-1)!/k^(2m).
pub fn laplace_check(m: usize, k: usize, t_final: f64) -> f64 {
    assert!(m >= 1 && k >= 1);
    let kk = (k * k) as f64;
    let f = |t: f64| t.powi(m as i32 - 1) * (-kk * t).exp();
    // split where the integrand lives: most mass sits below ~10/k^2
    let cut = (10.0 / kk).min(t_final);
    let mut integral = adaptive_simpson(&f, 0.0, cut, 1e-13, 40);
    if cut < t_final {
        integral += adaptive_simpson(&f, cut, t_final, 1e-13, 40);
    }
    let mut factorial = 1.0;
    for i in 2..m {
        factorial *= i as f64;
    }
    integral * kk.powi(m as i32) / factorial
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let whole = simpson(f, a, b);
    let mid = 0.5 * (a + b);
    let left = simpson(f, a, mid);
    let right = simpson(f, mid, b);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        left + right + (left + right - whole) / 15.0
    } else {
        adaptive_simpson(f, a, mid, 0.5 * tol, depth - 1)
            + adaptive_simpson(f, mid, b, 0.5 * tol, depth - 1)
    }
}
