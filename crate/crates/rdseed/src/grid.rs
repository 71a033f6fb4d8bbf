//! Spatial grids, nodal scalar fields and the shared trapezoidal quadrature.
//!
//! All integrals in the crate (mass, objective, inner products, norms) use
//! one rule: trapezoidal in 1D, tensor-trapezoidal in 2D. Grids are
//! vertex-centered and include the boundary nodes.

use crate::error::{Error, Result};

/// Uniform 1D grid on `[xmin, xmax]`, `n` nodes including both endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub xmin: f64,
    pub xmax: f64,
    pub n: usize,
}

impl Grid1D {
    pub fn new(xmin: f64, xmax: f64, n: usize) -> Result<Self> {
        if !(xmax > xmin) || !xmin.is_finite() || !xmax.is_finite() {
            return Err(Error::Config(format!(
                "grid1d: need xmax > xmin, got [{xmin}, {xmax}]"
            )));
        }
        if n < 3 {
            return Err(Error::Config(format!("grid1d: need n >= 3, got {n}")));
        }
        Ok(Grid1D { xmin, xmax, n })
    }

    pub fn dx(&self) -> f64 {
        (self.xmax - self.xmin) / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.xmin + i as f64 * self.dx()
    }

    pub fn len(&self) -> f64 {
        self.xmax - self.xmin
    }

    /// Trapezoidal weight of node `i` (`dx/2` at the endpoints, `dx` inside).
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.n - 1 {
            0.5 * self.dx()
        } else {
            self.dx()
        }
    }
}

/// Uniform tensor grid on `[xmin, xmax] x [ymin, ymax]`; values are stored
/// row-major: index `iy * nx + ix`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2D {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(xmax > xmin) || !(ymax > ymin) {
            return Err(Error::Config(format!(
                "grid2d: degenerate rectangle [{xmin},{xmax}]x[{ymin},{ymax}]"
            )));
        }
        if nx < 3 || ny < 3 {
            return Err(Error::Config(format!(
                "grid2d: need nx, ny >= 3, got {nx} x {ny}"
            )));
        }
        Ok(Grid2D {
            xmin,
            xmax,
            ymin,
            ymax,
            nx,
            ny,
        })
    }

    pub fn dx(&self) -> f64 {
        (self.xmax - self.xmin) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.ymax - self.ymin) / (self.ny - 1) as f64
    }

    pub fn node_x(&self, ix: usize) -> f64 {
        self.xmin + ix as f64 * self.dx()
    }

    pub fn node_y(&self, iy: usize) -> f64 {
        self.ymin + iy as f64 * self.dy()
    }

    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn area(&self) -> f64 {
        (self.xmax - self.xmin) * (self.ymax - self.ymin)
    }
}

/// Spatial domain: either a 1D interval or a 2D rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Grid {
    One(Grid1D),
    Two(Grid2D),
}

impl Grid {
    pub fn node_count(&self) -> usize {
        match self {
            Grid::One(g) => g.n,
            Grid::Two(g) => g.nx * g.ny,
        }
    }

    /// Measure of the domain.
    pub fn volume(&self) -> f64 {
        match self {
            Grid::One(g) => g.len(),
            Grid::Two(g) => g.area(),
        }
    }

    /// Quadrature weight of flat node index `i`.
    pub fn weight(&self, i: usize) -> f64 {
        match self {
            Grid::One(g) => g.weight(i),
            Grid::Two(g) => {
                let ix = i % g.nx;
                let iy = i / g.nx;
                let wx = if ix == 0 || ix == g.nx - 1 { 0.5 } else { 1.0 } * g.dx();
                let wy = if iy == 0 || iy == g.ny - 1 { 0.5 } else { 1.0 } * g.dy();
                wx * wy
            }
        }
    }

    /// All quadrature weights as a vector.
    pub fn weights(&self) -> Vec<f64> {
        (0..self.node_count()).map(|i| self.weight(i)).collect()
    }

    pub fn as_1d(&self) -> Result<&Grid1D> {
        match self {
            Grid::One(g) => Ok(g),
            Grid::Two(_) => Err(Error::Config("expected a 1D grid".into())),
        }
    }

    pub fn as_2d(&self) -> Result<&Grid2D> {
        match self {
            Grid::Two(g) => Ok(g),
            Grid::One(_) => Err(Error::Config("expected a 2D grid".into())),
        }
    }
}

impl From<Grid1D> for Grid {
    fn from(g: Grid1D) -> Self {
        Grid::One(g)
    }
}

impl From<Grid2D> for Grid {
    fn from(g: Grid2D) -> Self {
        Grid::Two(g)
    }
}

/// Nodal values of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Config(format!(
                "field length {} does not match grid node count {}",
                values.len(),
                grid.node_count()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("field contains non-finite values".into()));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        let n = grid.node_count();
        ScalarField {
            grid,
            values: vec![c; n],
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Evaluate `f(x)` (1D) at every node.
    pub fn from_fn_1d(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n).map(|i| f(grid.node(i))).collect();
        ScalarField {
            grid: Grid::One(grid),
            values,
        }
    }

    /// Evaluate `f(x, y)` at every node.
    pub fn from_fn_2d(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.nx * grid.ny);
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                values.push(f(grid.node_x(ix), grid.node_y(iy)));
            }
        }
        ScalarField {
            grid: Grid::Two(grid),
            values,
        }
    }

    /// Quadrature mass: the shared trapezoidal rule.
    pub fn mass(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| self.grid.weight(i) * v)
            .sum()
    }

    /// Weighted inner product `<self, other>` under the same rule.
    pub fn inner(&self, other: &ScalarField) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(i, (a, b))| self.grid.weight(i) * a * b)
            .sum()
    }

    /// Discrete L2 norm under the quadrature rule.
    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// True if all values lie in `[-tol, 1 + tol]`.
    pub fn within_unit_box(&self, tol: f64) -> bool {
        self.values.iter().all(|&v| v >= -tol && v <= 1.0 + tol)
    }
}

/// Indicator of the interval `(a, b)` rasterized by cell-overlap fractions,
/// so the discrete trapezoidal mass equals `b - a` exactly.
pub fn indicator_interval(grid: Grid1D, a: f64, b: f64) -> Result<ScalarField> {
    if !(a < b) {
        return Err(Error::Config(format!("indicator: need a < b, got [{a}, {b}]")));
    }
    let dx = grid.dx();
    let mut values = vec![0.0; grid.n];
    for (i, v) in values.iter_mut().enumerate() {
        let x = grid.node(i);
        // cell of node i under the trapezoidal rule
        let lo = (x - 0.5 * dx).max(grid.xmin);
        let hi = (x + 0.5 * dx).min(grid.xmax);
        let overlap = (hi.min(b) - lo.max(a)).max(0.0);
        *v = overlap / (hi - lo);
    }
    ScalarField::new(Grid::One(grid), values)
}

/// Centered block of prescribed mass: indicator of
/// `(center - mass/2, center + mass/2)`, exact to quadrature.
pub fn centered_block(grid: Grid1D, center: f64, mass: f64) -> Result<ScalarField> {
    if mass <= 0.0 || mass >= grid.len() {
        return Err(Error::Constraint(format!(
            "block mass {mass} outside (0, {})",
            grid.len()
        )));
    }
    let half = 0.5 * mass;
    if center - half < grid.xmin || center + half > grid.xmax {
        return Err(Error::Config("block does not fit in the domain".into()));
    }
    indicator_interval(grid, center - half, center + half)
}

/// Indicator of the ball of given mass (area) centered at `(cx, cy)`,
/// rasterized by subsampled cell coverage and corrected on the partial
/// cells so the discrete mass equals `mass` exactly.
pub fn indicator_ball(grid: Grid2D, cx: f64, cy: f64, mass: f64) -> Result<ScalarField> {
    if mass <= 0.0 || mass >= grid.area() {
        return Err(Error::Constraint(format!(
            "ball mass {mass} outside (0, {})",
            grid.area()
        )));
    }
    let r = (mass / std::f64::consts::PI).sqrt();
    let f = |x: f64, y: f64| {
        let (dx, dy) = (x - cx, y - cy);
        dx * dx + dy * dy <= r * r
    };
    rasterize_indicator_2d(grid, mass, f)
}

/// Indicator of the stripe `|x - cx| <= w/2` spanning the full y extent,
/// with width `w = mass / (ymax - ymin)` so the mass constraint is exact.
pub fn indicator_stripe(grid: Grid2D, cx: f64, mass: f64) -> Result<ScalarField> {
    if mass <= 0.0 || mass >= grid.area() {
        return Err(Error::Constraint(format!(
            "stripe mass {mass} outside (0, {})",
            grid.area()
        )));
    }
    let half = 0.5 * mass / (grid.ymax - grid.ymin);
    let f = |x: f64, _y: f64| (x - cx).abs() <= half;
    rasterize_indicator_2d(grid, mass, f)
}

/// Rasterize a 2D indicator by KxK subsampling per quadrature cell, then
/// rescale the partial cells so the discrete mass is exact.
fn rasterize_indicator_2d(
    grid: Grid2D,
    mass: f64,
    inside: impl Fn(f64, f64) -> bool,
) -> Result<ScalarField> {
    const K: usize = 8;
    let (dx, dy) = (grid.dx(), grid.dy());
    let mut values = vec![0.0; grid.nx * grid.ny];
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let x0 = (grid.node_x(ix) - 0.5 * dx).max(grid.xmin);
            let x1 = (grid.node_x(ix) + 0.5 * dx).min(grid.xmax);
            let y0 = (grid.node_y(iy) - 0.5 * dy).max(grid.ymin);
            let y1 = (grid.node_y(iy) + 0.5 * dy).min(grid.ymax);
            let mut hits = 0usize;
            for sy in 0..K {
                let y = y0 + (sy as f64 + 0.5) / K as f64 * (y1 - y0);
                for sx in 0..K {
                    let x = x0 + (sx as f64 + 0.5) / K as f64 * (x1 - x0);
                    if inside(x, y) {
                        hits += 1;
                    }
                }
            }
            values[grid.idx(ix, iy)] = hits as f64 / (K * K) as f64;
        }
    }
    let field = ScalarField::new(Grid::Two(grid), values)?;
    correct_partial_cells(field, mass)
}

/// Scale the fractional (strictly interior-valued) cells of an indicator
/// field so the total quadrature mass equals `target` exactly.
fn correct_partial_cells(mut field: ScalarField, target: f64) -> Result<ScalarField> {
    let g = field.grid;
    let full: f64 = field
        .values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v >= 1.0)
        .map(|(i, _)| g.weight(i))
        .sum();
    let partial: f64 = field
        .values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0 && **v < 1.0)
        .map(|(i, v)| g.weight(i) * *v)
        .sum();
    if partial <= 0.0 {
        // purely bang-bang rasterization; accept only if already exact
        if (full - target).abs() > 1e-9 * target {
            return Err(Error::Config(
                "indicator rasterization cannot reach the requested mass".into(),
            ));
        }
        return Ok(field);
    }
    let s = (target - full) / partial;
    if !(0.0..=2.0).contains(&s) {
        return Err(Error::Config(
            "indicator rasterization too coarse for an exact mass correction".into(),
        ));
    }
    for v in field.values.iter_mut() {
        if *v > 0.0 && *v < 1.0 {
            *v = (*v * s).min(1.0);
        }
    }
    // one more linear pass in the rare case the clamp above bit
    let now = field.mass();
    if (now - target).abs() > 1e-12 * target.max(1.0) {
        let partial2: f64 = field
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0 && **v < 1.0)
            .map(|(i, v)| g.weight(i) * *v)
            .sum();
        if partial2 > 0.0 {
            let s2 = 1.0 + (target - now) / partial2;
            for v in field.values.iter_mut() {
                if *v > 0.0 && *v < 1.0 {
                    *v = (*v * s2).clamp(0.0, 1.0);
                }
            }
        }
    }
    Ok(field)
}

/// Shift-and-clamp projection onto the admissible set: finds the additive
/// shift `c` such that `clamp(u + c, 0, 1)` has the requested mass.
pub fn project_to_mass(field: &ScalarField, mass: f64) -> Result<ScalarField> {
    let vol = field.grid.volume();
    if mass <= 0.0 || mass >= vol {
        return Err(Error::Constraint(format!(
            "mass {mass} outside (0, {vol})"
        )));
    }
    let eval = |c: f64| -> f64 {
        field
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| field.grid.weight(i) * (v + c).clamp(0.0, 1.0))
            .sum()
    };
    let (mut lo, mut hi) = (-2.0, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eval(mid) < mass {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    let values = field.values.iter().map(|v| (v + c).clamp(0.0, 1.0)).collect();
    let mut out = ScalarField::new(field.grid, values)?;
    // polish the last few ulps with a multiplicative touch-up on the interior
    let now = out.mass();
    let interior: f64 = out
        .values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0 && **v < 1.0)
        .map(|(i, v)| out.grid.weight(i) * *v)
        .sum();
    if interior > 0.0 {
        let s = 1.0 + (mass - now) / interior;
        if (0.0..=2.0).contains(&s) {
            for v in out.values.iter_mut() {
                if *v > 0.0 && *v < 1.0 {
                    *v = (*v * s).clamp(0.0, 1.0);
                }
            }
        }
    }
    Ok(out)
}

/// Final time plus uniform step count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeConfig {
    pub t_final: f64,
    pub nt: usize,
}

impl TimeConfig {
    pub fn new(t_final: f64, nt: usize) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::Config(format!("time: need T > 0, got {t_final}")));
        }
        if nt == 0 {
            return Err(Error::Config("time: need nt >= 1".into()));
        }
        Ok(TimeConfig { t_final, nt })
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.nt as f64
    }

    pub fn level(&self, j: usize) -> f64 {
        self.t_final * j as f64 / self.nt as f64
    }
}
