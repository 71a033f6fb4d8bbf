//! Experiment orchestration: dispatch a configured run, write its
//! artifacts (trace CSVs, field dumps, diagnostics, manifest) into the
//! output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::adjoint::{adjoint_solve, gradient};
use crate::anneal::{simulated_annealing, AnnealConfig, AnnealResult};
use crate::config::{ExperimentConfig, Method};
use crate::error::{Error, Result};
use crate::grid::{Grid, Grid1D, ScalarField, TimeConfig};
use crate::io::dump_field;
use crate::optimizer::{optimize, prop1_certificate, OptimizeOpts, OptimizeResult};
use crate::pde::{objective, solve_forward};
use crate::rearrange::{convex_block_check, parabolic_comparison_check};
use crate::reaction::ReactionModel;
use crate::twoscale::{make_cutoff, remainder_sweep};

/// What to run on a parsed configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Forward,
    Optimize,
    Anneal,
    GradCheck,
    Twoscale,
    ConvexCheck,
    Compare,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Forward => "forward",
            Mode::Optimize => "optimize",
            Mode::Anneal => "anneal",
            Mode::GradCheck => "grad-check",
            Mode::Twoscale => "twoscale",
            Mode::ConvexCheck => "convex-check",
            Mode::Compare => "compare",
        }
    }
}

/// Thread cap from the environment (RDSEED_THREADS); `compare` runs its two
/// methods concurrently unless this says 1.
pub fn max_threads() -> usize {
    std::env::var("RDSEED_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(2)
}

fn require_seed(cfg: &ExperimentConfig, what: &str) -> Result<u64> {
    cfg.seed.ok_or_else(|| {
        Error::Config(format!(
            "{what} is stochastic: set optimizer.seed (wall-clock seeding is not allowed)"
        ))
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn write_manifest(dir: &Path, cfg_text: &str, mode: Mode) -> Result<()> {
    let mut hasher = Sha256::new();
    hasher.update(cfg_text.as_bytes());
    let digest = hasher.finalize();
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    let manifest = format!(
        "mode = {}\nconfig_sha256 = {hex}\nversion = {}\n",
        mode.name(),
        env!("CARGO_PKG_VERSION")
    );
    write_text(&dir.join("manifest.txt"), &manifest)
}

/// Run one experiment; returns the output directory.
pub fn run_experiment(cfg: &ExperimentConfig, mode: Mode) -> Result<PathBuf> {
    let dir = PathBuf::from(&cfg.out_dir).join(mode.name());
    fs::create_dir_all(&dir)?;
    write_manifest(&dir, &cfg.render(), mode)?;
    match mode {
        Mode::Forward => run_forward(cfg, &dir),
        Mode::Optimize => run_optimize(cfg, &dir).map(|_| ()),
        Mode::Anneal => run_anneal(cfg, &dir, None).map(|_| ()),
        Mode::GradCheck => run_gradcheck(cfg, &dir),
        Mode::Twoscale => run_twoscale(cfg, &dir),
        Mode::ConvexCheck => run_convex_check(cfg, &dir),
        Mode::Compare => run_compare(cfg, &dir),
    }?;
    Ok(dir)
}

fn run_forward(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let u0 = cfg.initial_datum()?;
    let traj = solve_forward(&u0, &cfg.reaction, &cfg.time)?;
    dump_field(&dir.join("u0.dat"), &u0)?;
    dump_field(&dir.join("u_final.dat"), traj.final_field())?;
    if cfg.snapshot_stride > 0 {
        for (j, field) in traj.fields.iter().enumerate().step_by(cfg.snapshot_stride) {
            dump_field(&dir.join(format!("u_{j:06}.dat")), field)?;
        }
    }
    let summary = format!(
        "objective = {}\nmass_initial = {}\nmass_final = {}\novershoot = {}\n",
        objective(&traj),
        u0.mass(),
        traj.final_field().mass(),
        traj.overshoot()
    );
    write_text(&dir.join("summary.txt"), &summary)
}

/// The per-iteration trace in the pinned CSV schema.
pub fn render_trace_csv(result: &OptimizeResult) -> String {
    let mut out = String::from("iter,objective,threshold_c,flat_cell_count,tau,wall_ms\n");
    for r in &result.trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.iter, r.objective, r.threshold_c, r.flat_cell_count, r.tau, r.wall_ms
        );
    }
    out
}

fn opts_from(cfg: &ExperimentConfig) -> OptimizeOpts {
    OptimizeOpts {
        max_iter: cfg.max_iter,
        tol: cfg.tol,
        eps_flat_rel: cfg.eps_flat,
        ..OptimizeOpts::default()
    }
}

fn run_optimize(cfg: &ExperimentConfig, dir: &Path) -> Result<OptimizeResult> {
    let u0 = cfg.initial_datum()?;
    let result = optimize(&u0, &cfg.reaction, &cfg.time, cfg.mass, &opts_from(cfg))?;
    write_text(&dir.join("trace.csv"), &render_trace_csv(&result))?;
    dump_field(&dir.join("u0_final.dat"), &result.final_iterate)?;
    let report = prop1_certificate(&result, &cfg.reaction);
    write_text(&dir.join("prop1_report.txt"), &report.render())?;
    Ok(result)
}

fn run_anneal(
    cfg: &ExperimentConfig,
    dir: &Path,
    budget_override: Option<usize>,
) -> Result<AnnealResult> {
    let seed = require_seed(cfg, "annealing")?;
    let u0 = cfg.initial_datum()?;
    let j_init = objective(&solve_forward(&u0, &cfg.reaction, &cfg.time)?);
    let max_moves = budget_override
        .or(cfg.anneal_max_moves)
        .unwrap_or(cfg.max_iter * 50);
    let mut ann = AnnealConfig::from_problem(j_init, cfg.mass, seed, max_moves);
    if let Some(t) = cfg.anneal_initial_temp {
        ann.initial_temp = t;
    }
    if let Some(c) = cfg.anneal_cooling {
        ann.cooling = c;
    }
    if let Some(mm) = cfg.anneal_move_mass {
        ann.move_mass = mm;
    }
    ann.moves_per_temp = cfg.anneal_moves_per_temp;
    let result = simulated_annealing(&u0, &cfg.reaction, &cfg.time, cfg.mass, &ann)?;
    let mut csv = String::from("level,moves_done,temperature,objective,best_objective,accepted\n");
    for r in &result.trace {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.level, r.moves_done, r.temperature, r.objective, r.best_objective, r.accepted
        );
    }
    write_text(&dir.join("trace_anneal.csv"), &csv)?;
    dump_field(&dir.join("u0_final.dat"), &result.best_iterate)?;
    Ok(result)
}

fn run_gradcheck(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    use rand::Rng;
    use rand::SeedableRng;
    let seed = require_seed(cfg, "gradient check")?;
    let g = *cfg.grid.as_1d()?;
    let model = cfg.reaction;
    let tc = cfg.time;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);

    let mut csv = String::from("epsilon,fd_value,adjoint_value,rel_error\n");
    for _ in 0..cfg.gradcheck_pairs {
        // smooth interior profile and a zero-mean direction
        let coeffs: Vec<f64> = (1..=6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let span = g.xmax - g.xmin;
        let base = ScalarField::from_fn_1d(g, |x| {
            0.5 + 0.3
                * coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, c)| {
                        c * ((j + 1) as f64 * std::f64::consts::PI * (x - g.xmin) / span).cos()
                            / (j + 1) as f64
                    })
                    .sum::<f64>()
        });
        let u0 = ScalarField {
            grid: base.grid,
            values: base.values.iter().map(|v| v.clamp(0.15, 0.85)).collect(),
        };
        let dcoeffs: Vec<f64> = (1..=6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let raw = ScalarField::from_fn_1d(g, |x| {
            dcoeffs
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    c * ((j + 1) as f64 * std::f64::consts::PI * (x - g.xmin) / span).cos()
                        / (j + 1) as f64
                })
                .sum::<f64>()
        });
        let mean = raw.mass() / raw.grid.volume();
        let h0 = ScalarField {
            grid: raw.grid,
            values: raw.values.iter().map(|v| v - mean).collect(),
        };

        let traj = solve_forward(&u0, &model, &tc)?;
        let adj = adjoint_solve(&traj, &model)?;
        let adjoint_value = gradient(&adj).inner(&h0);
        for &eps in &cfg.gradcheck_epsilons {
            let j = |s: f64| -> Result<f64> {
                let u = ScalarField {
                    grid: u0.grid,
                    values: u0
                        .values
                        .iter()
                        .zip(&h0.values)
                        .map(|(a, b)| a + s * b)
                        .collect(),
                };
                Ok(objective(&solve_forward(&u, &model, &tc)?))
            };
            let fd = (j(eps)? - j(-eps)?) / (2.0 * eps);
            let rel = (adjoint_value - fd).abs() / fd.abs().max(1e-300);
            let _ = writeln!(csv, "{eps},{fd},{adjoint_value},{rel}");
        }
    }
    write_text(&dir.join("gradcheck.csv"), &csv)
}

fn run_twoscale(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let g = *cfg.grid.as_1d()?;
    let (a, b) = cfg.twoscale_support;
    let theta = make_cutoff(a, b, g)?;
    let center = 0.5 * (g.xmin + g.xmax);
    let background =
        crate::grid::centered_block(g, center, cfg.twoscale_background_mass)?;
    let sweep = remainder_sweep(
        &background,
        &cfg.reaction,
        &theta,
        &cfg.twoscale_k_list,
        &cfg.time,
    )?;
    let mut csv = String::from("k,sup_norm,sup_norm_times_k2,alpha_k,alpha_k_times_k4\n");
    for (i, &k) in sweep.k_list.iter().enumerate() {
        let k2 = (k * k) as f64;
        let _ = writeln!(
            csv,
            "{k},{},{},{},{}",
            sweep.sup_norms[i],
            sweep.sup_norms[i] * k2,
            sweep.alpha[i],
            sweep.alpha[i] * k2 * k2
        );
    }
    let _ = writeln!(
        csv,
        "# fit: slope={} intercept={} r2={}",
        sweep.slope, sweep.intercept, sweep.r2
    );
    write_text(&dir.join("sweep.csv"), &csv)
}

fn run_convex_check(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    use rand::SeedableRng;
    let seed = require_seed(cfg, "convex check")?;
    let g = *cfg.grid.as_1d()?;
    let report = convex_block_check(&cfg.reaction, g, cfg.mass, &cfg.time, cfg.convex_trials, seed)?;
    let mut csv = String::from("trial,description,J_block,J_candidate,margin\n");
    for t in &report.trials {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            t.trial, t.description, t.j_block, t.j_candidate, t.margin
        );
    }
    write_text(&dir.join("block_check.csv"), &csv)?;

    // the comparison suite reuses the bang-bang generator through fresh
    // random admissible profiles
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let mut csv = String::from("t,r,lhs,rhs,margin\n");
    let mut worst = f64::INFINITY;
    for _ in 0..cfg.convex_profiles {
        let u0 = crate::rearrange::random_admissible_bang_bang(g, cfg.mass, &mut rng);
        let report = parabolic_comparison_check(
            &cfg.reaction,
            &u0,
            &cfg.time,
            cfg.convex_t_samples,
            cfg.convex_r_samples,
        )?;
        for s in &report.samples {
            let _ = writeln!(csv, "{},{},{},{},{}", s.t, s.r, s.lhs, s.rhs, s.margin);
        }
        worst = worst.min(report.min_margin);
    }
    let _ = writeln!(csv, "# worst_margin={worst}");
    write_text(&dir.join("comparison.csv"), &csv)
}

fn run_compare(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    // method 1 first: its solve count fixes the annealing budget
    let t0 = Instant::now();
    let fixed = run_optimize(cfg, dir)?;
    let fixed_wall = t0.elapsed().as_secs_f64();
    let budget = 10 * fixed.pde_solves;

    let t1 = Instant::now();
    let annealed = run_anneal(cfg, dir, Some(budget))?;
    let anneal_wall = t1.elapsed().as_secs_f64();

    let mut csv = String::from("method,objective,wall_s,pde_solves\n");
    let _ = writeln!(
        csv,
        "fixed_point,{},{},{}",
        fixed.objective, fixed_wall, fixed.pde_solves
    );
    let _ = writeln!(
        csv,
        "simulated_annealing,{},{},{}",
        annealed.best_objective, anneal_wall, annealed.pde_solves
    );
    write_text(&dir.join("summary.csv"), &csv)
}

/// Convenience wrapper for the 1D benchmark setups used by the CLI and the
/// acceptance suite: domain (-50, 50), bistable 0.25.
pub fn table_benchmark_config(n: usize, nt: usize, seed: Option<u64>) -> ExperimentConfig {
    ExperimentConfig {
        grid: Grid::One(Grid1D::new(-50.0, 50.0, n).expect("valid benchmark grid")),
        time: TimeConfig::new(25.0, nt).expect("valid benchmark time"),
        reaction: ReactionModel::bistable(0.25).expect("valid theta"),
        mass: 13.0,
        init_kind: crate::config::InitKind::Block,
        init_center: (0.0, 0.0),
        method: Method::FixedPoint,
        max_iter: 300,
        tol: 1e-6,
        eps_flat: 0.1,
        seed,
        out_dir: "out".into(),
        snapshot_stride: 0,
        anneal_initial_temp: None,
        anneal_cooling: None,
        anneal_moves_per_temp: 50,
        anneal_move_mass: None,
        anneal_max_moves: None,
        twoscale_support: (0.7, 2.4),
        twoscale_k_list: vec![4, 8, 16, 32],
        twoscale_background_mass: std::f64::consts::PI / 4.0,
        convex_trials: 200,
        convex_profiles: 20,
        convex_t_samples: 5,
        convex_r_samples: 5,
        gradcheck_pairs: 20,
        gradcheck_epsilons: vec![1e-2, 1e-3, 1e-4, 1e-5],
    }
}
