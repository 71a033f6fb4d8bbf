//! Backward adjoint solves, first/second derivatives of the objective and
//! the linearized (perturbation) equation.
//!
//! The adjoint PDE `-p_t - Lap p = f'(u) p`, `p(T) = 1` is discretized
//! independently of the forward scheme (continuous-adjoint choice): the
//! time-reversed trapezoidal analogue of the forward stepper with the
//! potential f'(u(t,x)) read from the stored forward trajectory. The
//! resulting O(dt) gradient gap is bounded by the finite-difference
//! consistency tests.

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::pde::{Adi2D, Trajectory};
use crate::reaction::{Deriv, ReactionModel};
use crate::tridiag::TriScratch;

/// Backward adjoint history; `fields[j]` is p at forward time level j.
#[derive(Debug, Clone)]
pub struct AdjointTrajectory {
    pub times: Vec<f64>,
    pub fields: Vec<ScalarField>,
}

impl AdjointTrajectory {
    pub fn initial(&self) -> &ScalarField {
        &self.fields[0]
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    /// Smallest p(0, .) value; nonpositive values signal a mesh too coarse
    /// for the discrete maximum principle.
    pub fn min_initial_value(&self) -> f64 {
        self.initial().min()
    }
}

/// First-derivative bundle: the gradient field p(0,.) and optional
/// directional/second-order values for a probe direction.
#[derive(Debug, Clone)]
pub struct GradientReport {
    pub gradient_field: ScalarField,
    pub directional: Option<f64>,
    pub hessian_form: Option<f64>,
}

fn potential(traj: &Trajectory, model: &ReactionModel, level: usize) -> Vec<f64> {
    traj.fields[level]
        .values
        .iter()
        .map(|&v| model.eval(Deriv::FPrime, v))
        .collect()
}

/// Solve the adjoint equation backward from `p(T) = 1` along a stored
/// forward trajectory.
///
/// The potential of the backward step onto level j is sampled at level j
/// on both sides of the trapezoidal update (one-sided in time). This is
/// the continuous-adjoint choice: the gradient carries an O(dt) gap
/// against exact derivatives of the discrete objective, which the
/// finite-difference checks pin down.
pub fn adjoint_solve(traj: &Trajectory, model: &ReactionModel) -> Result<AdjointTrajectory> {
    let nt = traj.times.len() - 1;
    let grid = traj.grid();
    let dt = traj.dt();
    let n = grid.node_count();

    let mut fields = vec![ScalarField::constant(grid, 0.0); nt + 1];
    fields[nt] = ScalarField::constant(grid, 1.0);
    let mut p = fields[nt].values.clone();

    match grid {
        Grid::One(g) => {
            let dx = g.dx();
            let (mut sub, mut diag, mut sup) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            let (mut lap, mut rhs) = (vec![0.0; n], vec![0.0; n]);
            let mut scratch = TriScratch::with_capacity(n);
            for j in (0..nt).rev() {
                let a_here = potential(traj, model, j);
                crate::pde::cn_step_linear_1d(
                    &mut p, &a_here, &a_here, dx, dt, &mut sub, &mut diag, &mut sup, &mut lap,
                    &mut rhs, &mut scratch,
                );
                check_finite(&p, j)?;
                fields[j] = ScalarField {
                    grid,
                    values: p.clone(),
                };
            }
        }
        Grid::Two(g) => {
            let mut work = Adi2D::new(g.nx, g.ny, g.dx(), g.dy(), dt);
            for j in (0..nt).rev() {
                let a_here = potential(traj, model, j);
                work.step_linear(&mut p, &a_here, &a_here);
                check_finite(&p, j)?;
                fields[j] = ScalarField {
                    grid,
                    values: p.clone(),
                };
            }
        }
    }
    Ok(AdjointTrajectory {
        times: traj.times.clone(),
        fields,
    })
}

fn check_finite(values: &[f64], step: usize) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            what: "numerical blow-up in adjoint solve".into(),
            step,
        });
    }
    Ok(())
}

/// The L2 gradient of the objective: p(0, .). The directional derivative
/// against a direction h0 is the quadrature inner product `<p(0,.), h0>`.
pub fn gradient(adj: &AdjointTrajectory) -> ScalarField {
    adj.initial().clone()
}

/// Forward solve of the linearized equation `h_t - Lap h = f'(u) h` with
/// the potential frozen from a stored forward trajectory.
pub fn linearized_solve(
    traj: &Trajectory,
    model: &ReactionModel,
    h0: &ScalarField,
) -> Result<Trajectory> {
    let grid = traj.grid();
    if h0.grid != grid {
        return Err(Error::Config(
            "perturbation grid does not match trajectory grid".into(),
        ));
    }
    let nt = traj.times.len() - 1;
    let dt = traj.dt();
    let n = grid.node_count();

    let mut fields = Vec::with_capacity(nt + 1);
    fields.push(h0.clone());
    let mut h = h0.values.clone();

    match grid {
        Grid::One(g) => {
            let dx = g.dx();
            let (mut sub, mut diag, mut sup) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            let (mut lap, mut rhs) = (vec![0.0; n], vec![0.0; n]);
            let mut scratch = TriScratch::with_capacity(n);
            let mut a_here = potential(traj, model, 0);
            for j in 0..nt {
                let a_next = potential(traj, model, j + 1);
                crate::pde::cn_step_linear_1d(
                    &mut h, &a_here, &a_next, dx, dt, &mut sub, &mut diag, &mut sup, &mut lap,
                    &mut rhs, &mut scratch,
                );
                check_finite(&h, j + 1)?;
                fields.push(ScalarField {
                    grid,
                    values: h.clone(),
                });
                a_here = a_next;
            }
        }
        Grid::Two(g) => {
            let mut work = Adi2D::new(g.nx, g.ny, g.dx(), g.dy(), dt);
            let mut a_here = potential(traj, model, 0);
            for j in 0..nt {
                let a_next = potential(traj, model, j + 1);
                work.step_linear(&mut h, &a_here, &a_next);
                check_finite(&h, j + 1)?;
                fields.push(ScalarField {
                    grid,
                    values: h.clone(),
                });
                a_here = a_next;
            }
        }
    }
    let (lo, hi) = fields
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| {
            (lo.min(f.min()), hi.max(f.max()))
        });
    Ok(Trajectory::from_parts(
        traj.times.clone(),
        fields,
        *model,
        lo,
        hi,
    ))
}

/// Space-time quadrature of `f''(u) p h^2` with `h` from
/// [`linearized_solve`]: the second Gateaux derivative of the objective
/// along `h0`.
pub fn hessian_quadratic_form(
    traj: &Trajectory,
    adj: &AdjointTrajectory,
    model: &ReactionModel,
    h0: &ScalarField,
) -> Result<f64> {
    let h_traj = linearized_solve(traj, model, h0)?;
    let grid = traj.grid();
    let nt = traj.times.len() - 1;
    let dt = traj.dt();
    let mut total = 0.0;
    for j in 0..=nt {
        let wt = if j == 0 || j == nt { 0.5 * dt } else { dt };
        let u = &traj.fields[j].values;
        let p = &adj.fields[j].values;
        let h = &h_traj.fields[j].values;
        let mut slice = 0.0;
        for i in 0..u.len() {
            slice += grid.weight(i) * model.eval(Deriv::FSecond, u[i]) * p[i] * h[i] * h[i];
        }
        total += wt * slice;
    }
    Ok(total)
}

/// One-sided difference `(p(dt,.) - p(0,.)) / dt` — the discretization the
/// singular-arc equation is written with.
pub fn estimate_pt0(adj: &AdjointTrajectory) -> ScalarField {
    let dt = adj.dt();
    let p0 = &adj.fields[0];
    let p1 = &adj.fields[1];
    let values = p0
        .values
        .iter()
        .zip(&p1.values)
        .map(|(a, b)| (b - a) / dt)
        .collect();
    ScalarField {
        grid: p0.grid,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid1D, TimeConfig};
    use crate::pde::{forward_solve, objective};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bistable() -> ReactionModel {
        ReactionModel::bistable(0.25).unwrap()
    }

    fn pi_grid(n: usize) -> Grid1D {
        Grid1D::new(0.0, std::f64::consts::PI, n).unwrap()
    }

    /// Smooth field with values inside [lo, hi].
    fn random_smooth(g: Grid1D, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> ScalarField {
        let coeffs: Vec<f64> = (1..=6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let span = g.xmax - g.xmin;
        let raw = ScalarField::from_fn_1d(g, |x| {
            coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    c * ((j + 1) as f64 * std::f64::consts::PI * (x - g.xmin) / span).cos()
                        / (j + 1) as f64
                })
                .sum::<f64>()
        });
        let (rmin, rmax) = (raw.min(), raw.max());
        let mid = 0.5 * (lo + hi);
        let amp = 0.5 * (hi - lo);
        let scale = if rmax - rmin > 1e-12 {
            2.0 * amp / (rmax - rmin)
        } else {
            0.0
        };
        ScalarField {
            grid: raw.grid,
            values: raw
                .values
                .iter()
                .map(|v| mid + scale * (v - 0.5 * (rmin + rmax)))
                .collect(),
        }
    }

    /// Zero-mean direction with unit sup-norm.
    fn random_direction(g: Grid1D, rng: &mut ChaCha8Rng) -> ScalarField {
        let raw = random_smooth(g, -1.0, 1.0, rng);
        let mean = raw.mass() / raw.grid.volume();
        let centered: Vec<f64> = raw.values.iter().map(|v| v - mean).collect();
        let sup = centered.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        ScalarField {
            grid: raw.grid,
            values: centered.iter().map(|v| v / sup).collect(),
        }
    }

    #[test]
    fn zero_reaction_gives_unit_adjoint() {
        let g = pi_grid(65);
        let u0 = ScalarField::from_fn_1d(g, |x| 0.5 + 0.3 * x.cos());
        let tc = TimeConfig::new(0.5, 100).unwrap();
        let traj = forward_solve(&u0, &ReactionModel::zero(), &tc).unwrap();
        let adj = adjoint_solve(&traj, &ReactionModel::zero()).unwrap();
        for f in &adj.fields {
            for &v in &f.values {
                assert!((v - 1.0).abs() < 1e-13);
            }
        }
        let grad = gradient(&adj);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h0 = random_direction(g, &mut rng);
        assert!(grad.inner(&h0).abs() < 1e-12, "zero-mean directions are flat");
    }

    /// ODE oracle for constant states: p(0) = exp(int_0^T f'(u(s)) ds)
    /// via fine RK4 for u and Simpson for the exponent.
    fn ode_adjoint_initial(model: &ReactionModel, c: f64, t_final: f64) -> f64 {
        let steps = 30_000usize;
        let h = t_final / steps as f64;
        let mut u = c;
        let mut us = Vec::with_capacity(steps + 1);
        us.push(u);
        for _ in 0..steps {
            let k1 = model.f(u);
            let k2 = model.f(u + 0.5 * h * k1);
            let k3 = model.f(u + 0.5 * h * k2);
            let k4 = model.f(u + h * k3);
            u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            us.push(u);
        }
        let mut integral = 0.0;
        for i in 0..steps {
            let a = model.fp(us[i]);
            let b = model.fp(us[i + 1]);
            let m = model.fp(0.5 * (us[i] + us[i + 1]));
            integral += h / 6.0 * (a + 4.0 * m + b);
        }
        integral.exp()
    }

    #[test]
    fn constant_state_adjoint_matches_ode_quadrature() {
        // for spatially constant u(t), p(t) = exp(int_t^T f'(u(s)) ds)
        let g = pi_grid(33);
        let model = bistable();
        let t_final = 1.5;
        let tc = TimeConfig::new(t_final, 6000).unwrap();
        let c = 0.6;
        let u0 = ScalarField::constant(Grid::One(g), c);
        let traj = forward_solve(&u0, &model, &tc).unwrap();
        let adj = adjoint_solve(&traj, &model).unwrap();
        let expected_p0 = ode_adjoint_initial(&model, c, t_final);
        for &v in &adj.initial().values {
            let rel = (v - expected_p0).abs() / expected_p0;
            assert!(rel < 1e-4, "p(0) = {v} vs ODE {expected_p0}");
        }
        assert!(adj.min_initial_value() > 0.0);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let g = Grid1D::new(0.0, std::f64::consts::PI, 200).unwrap();
        let model = bistable();
        let tc = TimeConfig::new(1.0, 2000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let eps = 1e-4;
        for _ in 0..3 {
            let u0 = random_smooth(g, 0.2, 0.8, &mut rng);
            let h0 = random_direction(g, &mut rng);
            let traj = forward_solve(&u0, &model, &tc).unwrap();
            let adj = adjoint_solve(&traj, &model).unwrap();
            let directional = gradient(&adj).inner(&h0);

            let perturbed = |s: f64| -> f64 {
                let u = ScalarField {
                    grid: u0.grid,
                    values: u0
                        .values
                        .iter()
                        .zip(&h0.values)
                        .map(|(a, b)| a + s * b)
                        .collect(),
                };
                objective(&forward_solve(&u, &model, &tc).unwrap())
            };
            let fd = (perturbed(eps) - perturbed(-eps)) / (2.0 * eps);
            let rel = (directional - fd).abs() / fd.abs().max(1e-12);
            assert!(rel < 1e-3, "adjoint {directional} vs FD {fd} (rel {rel})");

            // exact linearity in the direction
            let scaled = ScalarField {
                grid: h0.grid,
                values: h0.values.iter().map(|v| 3.5 * v).collect(),
            };
            let d_scaled = gradient(&adj).inner(&scaled);
            assert!((d_scaled - 3.5 * directional).abs() < 1e-12 * directional.abs().max(1.0));
        }
    }

    #[test]
    fn linearized_neumann_mode_decays_in_closed_form() {
        // f = 0: h0 = cos(kx) evolves to e^{-k^2 t} cos(kx)
        let g = pi_grid(257);
        let model = ReactionModel::zero();
        let tc = TimeConfig::new(0.25, 500).unwrap();
        let u0 = ScalarField::constant(Grid::One(g), 0.3);
        let traj = forward_solve(&u0, &model, &tc).unwrap();
        let k = 3.0;
        let h0 = ScalarField::from_fn_1d(g, |x| (k * x).cos());
        let h = linearized_solve(&traj, &model, &h0).unwrap();
        let decay = (-k * k * tc.t_final).exp();
        for (i, &v) in h.final_field().values.iter().enumerate() {
            let expect = decay * (k * g.node(i)).cos();
            assert!((v - expect).abs() < 5e-5, "node {i}: {v} vs {expect}");
        }
        // h0 = 0 stays 0
        let zero = linearized_solve(&traj, &model, &ScalarField::zeros(Grid::One(g))).unwrap();
        assert!(zero.final_field().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linearized_superposition_is_exact() {
        let g = pi_grid(129);
        let model = bistable();
        let tc = TimeConfig::new(0.5, 200).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u0 = random_smooth(g, 0.1, 0.9, &mut rng);
        let traj = forward_solve(&u0, &model, &tc).unwrap();
        let g1 = random_direction(g, &mut rng);
        let g2 = random_direction(g, &mut rng);
        let (a, b) = (1.7, -0.4);
        let combo = ScalarField {
            grid: g1.grid,
            values: g1
                .values
                .iter()
                .zip(&g2.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        };
        let s1 = linearized_solve(&traj, &model, &g1).unwrap();
        let s2 = linearized_solve(&traj, &model, &g2).unwrap();
        let sc = linearized_solve(&traj, &model, &combo).unwrap();
        for ((x, y), z) in s1
            .final_field()
            .values
            .iter()
            .zip(&s2.final_field().values)
            .zip(&sc.final_field().values)
        {
            assert!((a * x + b * y - z).abs() < 1e-12);
        }
    }

    #[test]
    fn hessian_form_linear_reaction_vanishes_and_convex_is_positive() {
        let g = pi_grid(101);
        let tc = TimeConfig::new(0.5, 250).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u0 = random_smooth(g, 0.2, 0.8, &mut rng);
        let h0 = random_direction(g, &mut rng);

        // f linear: f'' = 0 identically, the form is exactly zero
        let linear = ReactionModel::cubic(0.0, 0.0, 0.3, 0.0);
        let traj = forward_solve(&u0, &linear, &tc).unwrap();
        let adj = adjoint_solve(&traj, &linear).unwrap();
        let q = hessian_quadratic_form(&traj, &adj, &linear, &h0).unwrap();
        assert_eq!(q, 0.0);

        // convex power: f'' = 1 > 0 and p > 0, so the form is positive
        let convex = ReactionModel::convex_power(2.0).unwrap();
        let traj = forward_solve(&u0, &convex, &tc).unwrap();
        let adj = adjoint_solve(&traj, &convex).unwrap();
        let q = hessian_quadratic_form(&traj, &adj, &convex, &h0).unwrap();
        assert!(q > 0.0);

        // invariance under h0 -> -h0
        let neg = ScalarField {
            grid: h0.grid,
            values: h0.values.iter().map(|v| -v).collect(),
        };
        let qn = hessian_quadratic_form(&traj, &adj, &convex, &neg).unwrap();
        assert_eq!(q, qn);
    }

    #[test]
    fn hessian_form_matches_second_differences() {
        let g = Grid1D::new(0.0, std::f64::consts::PI, 200).unwrap();
        let model = bistable();
        let tc = TimeConfig::new(1.0, 2000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let eps = 1e-3;
        for _ in 0..2 {
            let u0 = random_smooth(g, 0.25, 0.75, &mut rng);
            let h0 = random_direction(g, &mut rng);
            let traj = forward_solve(&u0, &model, &tc).unwrap();
            let adj = adjoint_solve(&traj, &model).unwrap();
            let q = hessian_quadratic_form(&traj, &adj, &model, &h0).unwrap();
            let j = |s: f64| -> f64 {
                let u = ScalarField {
                    grid: u0.grid,
                    values: u0
                        .values
                        .iter()
                        .zip(&h0.values)
                        .map(|(a, b)| a + s * b)
                        .collect(),
                };
                objective(&forward_solve(&u, &model, &tc).unwrap())
            };
            let fd = (j(eps) - 2.0 * j(0.0) + j(-eps)) / (eps * eps);
            let rel = (q - fd).abs() / fd.abs().max(1e-12);
            assert!(rel < 1e-2, "form {q} vs second difference {fd} (rel {rel})");
        }
    }

    #[test]
    fn pt0_estimate_constant_case_and_refinement() {
        let g = pi_grid(33);
        let model = bistable();
        let c = 0.7;
        let u0 = ScalarField::constant(Grid::One(g), c);

        let run = |nt: usize| -> f64 {
            let tc = TimeConfig::new(1.0, nt).unwrap();
            let traj = forward_solve(&u0, &model, &tc).unwrap();
            let adj = adjoint_solve(&traj, &model).unwrap();
            estimate_pt0(&adj).values[5]
        };
        // continuous reference: p_t(0) = -f'(u(0)) p(0) for constant states
        let expected = -model.fp(c) * ode_adjoint_initial(&model, c, 1.0);
        let est = run(1000);
        assert!(
            (est - expected).abs() < 30.0 * (1.0 / 1000.0),
            "pt0 {est} vs {expected}"
        );
        // first-order one-sided difference: halving dt halves the deviation
        let e1 = (run(500) - expected).abs();
        let e2 = (run(1000) - expected).abs();
        let ratio = e1 / e2.max(1e-300);
        assert!(
            (1.4..=2.9).contains(&ratio),
            "refinement ratio {ratio} not O(dt)"
        );

        // zero reaction: pt0 is the zero field
        let tc = TimeConfig::new(1.0, 1000).unwrap();
        let traj0 = forward_solve(&u0, &ReactionModel::zero(), &tc).unwrap();
        let adj0 = adjoint_solve(&traj0, &ReactionModel::zero()).unwrap();
        assert!(estimate_pt0(&adj0).values.iter().all(|&v| v.abs() < 1e-12));
    }
}
