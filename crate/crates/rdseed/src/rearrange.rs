//! Rearrangement machinery and the convex-case verification suites: the
//! centered block is a maximizer of the final-time population when the
//! reaction is convex (and a minimizer when concave), checked statistically
//! against random admissible competitors, plus the torus comparison
//! inequality behind that result.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{indicator_interval, project_to_mass, Grid, Grid1D, ScalarField, TimeConfig};
use crate::pde::{forward_solve, forward_solve_torus, objective};
use crate::reaction::ReactionModel;

const PI: f64 = std::f64::consts::PI;

/// Discrete distribution function: measures(level) = Vol({u >= level}).
#[derive(Debug, Clone)]
pub struct DistributionFunction {
    /// Distinct field values, ascending.
    pub levels: Vec<f64>,
    /// Vol({u >= level}) per level, non-increasing.
    pub measures: Vec<f64>,
}

impl DistributionFunction {
    /// Vol({u >= t}) for an arbitrary threshold.
    pub fn measure_at(&self, t: f64) -> f64 {
        // first level >= t carries the measure; below the smallest level
        // everything counts
        match self.levels.iter().position(|&l| l >= t) {
            Some(k) => self.measures[k],
            None => 0.0,
        }
    }
}

/// Exact discrete distribution function under the quadrature cell measures.
pub fn distribution_function(field: &ScalarField) -> DistributionFunction {
    let mut order: Vec<usize> = (0..field.values.len()).collect();
    order.sort_unstable_by(|&a, &b| field.values[a].partial_cmp(&field.values[b]).unwrap());
    let mut levels = Vec::new();
    let mut below = Vec::new(); // mass of {u < level}
    let mut acc = 0.0;
    for &i in &order {
        let v = field.values[i];
        if levels.last().map(|&l: &f64| l < v).unwrap_or(true) {
            levels.push(v);
            below.push(acc);
        }
        acc += field.grid.weight(i);
    }
    let total = acc;
    let measures = below.into_iter().map(|b| total - b).collect();
    DistributionFunction { levels, measures }
}

/// Cell values on a uniform periodic grid over [-pi, pi): cell j sits at
/// x_j = -pi + j * dx with dx = 2 pi / len.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusField {
    pub values: Vec<f64>,
}

impl TorusField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 4 {
            return Err(Error::Config("torus field needs at least 4 cells".into()));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("torus field has non-finite values".into()));
        }
        Ok(TorusField { values })
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI / self.values.len() as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        -PI + j as f64 * self.dx()
    }

    /// Uniform-weight quadrature mass.
    pub fn mass(&self) -> f64 {
        self.dx() * self.values.iter().sum::<f64>()
    }

    /// Index of the cell at x = 0.
    pub fn center(&self) -> usize {
        self.values.len() / 2
    }

    /// Integral over [-r, r]: cells whose node lies inside.
    pub fn centered_integral(&self, r: f64) -> f64 {
        let dx = self.dx();
        self.values
            .iter()
            .enumerate()
            .filter(|(j, _)| (-PI + *j as f64 * dx).abs() <= r)
            .map(|(_, v)| v * dx)
            .sum()
    }
}

fn expect_zero_pi(grid: &Grid1D) -> Result<()> {
    if grid.xmin.abs() > 1e-9 || (grid.xmax - PI).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "rearrangement domain must be (0, pi), got ({}, {})",
            grid.xmin, grid.xmax
        )));
    }
    Ok(())
}

/// Even reflection of a field on (0, pi) about 0, wrapped periodically:
/// the torus field has 2(n-1) cells and exactly twice the interval mass.
pub fn symmetrize_extend(field: &ScalarField) -> Result<TorusField> {
    let g = *field.grid.as_1d()?;
    expect_zero_pi(&g)?;
    let n = g.n;
    let total = 2 * (n - 1);
    let mut values = vec![0.0; total];
    for (j, v) in values.iter_mut().enumerate() {
        let i = j.abs_diff(n - 1);
        *v = field.values[i];
    }
    TorusField::new(values)
}

/// The symmetric (about 0) non-increasing periodic field with the same
/// value multiset: largest value at the center cell, then alternating
/// outward, ties placed toward the negative side first.
pub fn periodic_rearrangement(tf: &TorusField) -> TorusField {
    let n = tf.values.len();
    let mut sorted = tf.values.clone();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut out = vec![0.0; n];
    let jc = tf.center();
    let mut offset = 0usize;
    let mut k = 0usize;
    while k < n {
        if offset == 0 {
            out[jc] = sorted[k];
            k += 1;
        } else {
            if k < n && jc >= offset {
                out[jc - offset] = sorted[k];
                k += 1;
            }
            if k < n && jc + offset < n {
                out[jc + offset] = sorted[k];
                k += 1;
            }
        }
        offset += 1;
    }
    TorusField { values: out }
}

/// Convexity classification of a reaction on the relevant solution range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Convex,
    Concave,
    /// f'' vanishes identically: both convex and concave.
    Linear,
}

fn classify(model: &ReactionModel, lo: f64, hi: f64) -> Result<Shape> {
    let n = 512;
    let mut any_pos = false;
    let mut any_neg = false;
    for i in 0..=n {
        let v = lo + (hi - lo) * i as f64 / n as f64;
        let s = model.fpp(v);
        if s > 1e-12 {
            any_pos = true;
        }
        if s < -1e-12 {
            any_neg = true;
        }
    }
    match (any_pos, any_neg) {
        (true, false) => Ok(Shape::Convex),
        (false, true) => Ok(Shape::Concave),
        (false, false) => Ok(Shape::Linear),
        (true, true) => Err(Error::Config(
            "reaction is neither convex nor concave on the solution range".into(),
        )),
    }
}

/// One trial of the block-optimality check.
#[derive(Debug, Clone)]
pub struct BlockTrial {
    pub trial: usize,
    pub description: String,
    pub j_block: f64,
    pub j_candidate: f64,
    /// j_block - j_candidate: nonnegative when the block maximizes.
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct BlockCheckReport {
    pub shape: Shape,
    pub trials: Vec<BlockTrial>,
    pub min_margin: f64,
    pub max_margin: f64,
}

/// Random union of disjoint intervals with total length `m` (exact mass),
/// for statistical sweeps over bang-bang competitors.
pub fn random_admissible_bang_bang(
    grid: Grid1D,
    m: f64,
    rng: &mut ChaCha8Rng,
) -> ScalarField {
    random_bang_bang(grid, m, 4, rng)
}

/// Random union of up to `max_blocks` disjoint intervals with total length
/// `m`, rasterized to exact mass.
fn random_bang_bang(
    grid: Grid1D,
    m: f64,
    max_blocks: usize,
    rng: &mut ChaCha8Rng,
) -> ScalarField {
    let vol = grid.len();
    'retry: loop {
        let k = rng.random_range(1..=max_blocks);
        let mut cuts: Vec<f64> = (0..k - 1).map(|_| rng.random_range(0.1..0.9)).collect();
        cuts.push(0.0);
        cuts.push(1.0);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let lengths: Vec<f64> = cuts.windows(2).map(|w| (w[1] - w[0]) * m).collect();
        let mut starts = Vec::with_capacity(k);
        let mut cursor = 0.0;
        let slack = vol - m;
        if slack <= 0.0 {
            // the constraint saturates the domain; single block only
            let f = indicator_interval(grid, grid.xmin, grid.xmax).unwrap();
            return f;
        }
        for len in &lengths {
            let gap = rng.random_range(0.0..slack / k as f64);
            cursor += gap;
            if cursor + len > vol {
                continue 'retry;
            }
            starts.push(cursor);
            cursor += len;
        }
        let mut values = vec![0.0; grid.n];
        for (s, len) in starts.iter().zip(&lengths) {
            let piece =
                indicator_interval(grid, grid.xmin + s, grid.xmin + s + len).unwrap();
            for (v, p) in values.iter_mut().zip(&piece.values) {
                *v += p;
            }
        }
        if values.iter().any(|&v| v > 1.0 + 1e-12) {
            continue 'retry;
        }
        let f = ScalarField {
            grid: Grid::One(grid),
            values,
        };
        return f;
    }
}

fn random_smooth_admissible(grid: Grid1D, m: f64, rng: &mut ChaCha8Rng) -> ScalarField {
    let coeffs: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let raw = ScalarField::from_fn_1d(grid, |x| {
        0.5 + coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * ((j + 1) as f64 * x).cos() / (j + 1) as f64)
            .sum::<f64>()
    });
    let clamped = ScalarField {
        grid: raw.grid,
        values: raw.values.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
    };
    project_to_mass(&clamped, m).expect("mass inside (0, |domain|)")
}

/// Compare the block `1_(0,m)` against random admissible profiles: for a
/// convex reaction the block never loses (margins >= 0 up to scheme
/// tolerance); for a concave one it never wins.
pub fn convex_block_check(
    model: &ReactionModel,
    grid: Grid1D,
    m: f64,
    tc: &TimeConfig,
    trials: usize,
    seed: u64,
) -> Result<BlockCheckReport> {
    expect_zero_pi(&grid)?;
    if !(m > 0.0 && m < grid.len()) {
        return Err(Error::Constraint(format!("mass {m} outside (0, pi)")));
    }
    let shape = classify(model, 0.0, 1.5)?;
    let block = indicator_interval(grid, 0.0, m)?;
    let j_block = objective(&forward_solve(&block, model, tc).map_err(grow_hint)?);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(trials + 1);

    // reflected block first: equal by symmetry
    let reflected = indicator_interval(grid, PI - m, PI)?;
    let j_ref = objective(&forward_solve(&reflected, model, tc).map_err(grow_hint)?);
    rows.push(BlockTrial {
        trial: 0,
        description: "reflected block".into(),
        j_block,
        j_candidate: j_ref,
        margin: j_block - j_ref,
    });

    for t in 1..=trials {
        let (u0, description) = if t % 2 == 1 {
            (
                random_bang_bang(grid, m, 4, &mut rng),
                format!("bang-bang union #{t}"),
            )
        } else {
            (
                random_smooth_admissible(grid, m, &mut rng),
                format!("smooth profile #{t}"),
            )
        };
        let j_candidate = objective(&forward_solve(&u0, model, tc).map_err(grow_hint)?);
        rows.push(BlockTrial {
            trial: t,
            description,
            j_block,
            j_candidate,
            margin: j_block - j_candidate,
        });
    }
    let min_margin = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    let max_margin = rows
        .iter()
        .map(|r| r.margin)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(BlockCheckReport {
        shape,
        trials: rows,
        min_margin,
        max_margin,
    })
}

fn grow_hint(e: Error) -> Error {
    match e {
        Error::Numerical { what, step } => Error::Numerical {
            what: format!("{what} (convex reactions grow without bound; reduce T)"),
            step,
        },
        other => other,
    }
}

/// One (t, r) sample of the torus comparison.
#[derive(Debug, Clone, Copy)]
pub struct ComparisonSample {
    pub t: f64,
    pub r: f64,
    /// Centered mass of the solution started from the rearranged datum.
    pub lhs: f64,
    /// Centered mass of the rearranged solution.
    pub rhs: f64,
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub samples: Vec<ComparisonSample>,
    pub min_margin: f64,
}

/// Check the torus comparison inequality behind the convex-block theorem:
/// solving from the rearranged datum concentrates at least as much mass
/// near the origin as rearranging the solution, at every sampled (t, r).
pub fn parabolic_comparison_check(
    model: &ReactionModel,
    u0: &ScalarField,
    tc: &TimeConfig,
    t_samples: usize,
    r_samples: usize,
) -> Result<ComparisonReport> {
    let g = *u0.grid.as_1d()?;
    expect_zero_pi(&g)?;
    let extended = symmetrize_extend(u0)?;
    let rearranged = periodic_rearrangement(&extended);
    let dx = extended.dx();

    let u_levels = forward_solve_torus(&extended.values, dx, model, tc).map_err(grow_hint)?;
    let v_levels = forward_solve_torus(&rearranged.values, dx, model, tc).map_err(grow_hint)?;

    let mut samples = Vec::with_capacity(t_samples * r_samples);
    for ti in 0..t_samples {
        let level = if t_samples == 1 {
            0
        } else {
            ti * tc.nt / (t_samples - 1)
        };
        let t = tc.t_final * level as f64 / tc.nt as f64;
        let u_t = TorusField {
            values: u_levels[level].clone(),
        };
        let v_t = TorusField {
            values: v_levels[level].clone(),
        };
        let u_star = periodic_rearrangement(&u_t);
        for ri in 0..r_samples {
            let r = PI * (ri + 1) as f64 / r_samples as f64;
            let lhs = v_t.centered_integral(r);
            let rhs = u_star.centered_integral(r);
            samples.push(ComparisonSample {
                t,
                r,
                lhs,
                rhs,
                margin: lhs - rhs,
            });
        }
    }
    let min_margin = samples
        .iter()
        .map(|s| s.margin)
        .fold(f64::INFINITY, f64::min);
    Ok(ComparisonReport {
        samples,
        min_margin,
    })
}

/// Bang-bang extreme-point projection: threshold the field at the level
/// that preserves its mass (fractional value on the threshold cell).
pub fn bang_bang_projection(field: &ScalarField) -> ScalarField {
    let m = field.mass();
    let n = field.values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| {
        field.values[b]
            .partial_cmp(&field.values[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut values = vec![0.0; n];
    let mut remaining = m;
    for &i in &order {
        if remaining <= 0.0 {
            break;
        }
        let w = field.grid.weight(i);
        let take = w.min(remaining);
        values[i] = take / w;
        remaining -= take;
    }
    ScalarField {
        grid: field.grid,
        values,
    }
}
