//! Experiment configuration: INI-style text with `[section]` headers,
//! `key = value` lines and `#` comments. Unknown sections or keys are
//! errors, every parameter is validated before any solve starts.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::{Grid, Grid1D, Grid2D, ScalarField, TimeConfig};
use crate::reaction::ReactionModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    FixedPoint,
    Anneal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Block,
    Ball,
    Stripe,
    Constant,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub grid: Grid,
    pub time: TimeConfig,
    pub reaction: ReactionModel,
    pub mass: f64,
    pub init_kind: InitKind,
    pub init_center: (f64, f64),
    pub method: Method,
    pub max_iter: usize,
    pub tol: f64,
    pub eps_flat: f64,
    pub seed: Option<u64>,
    pub out_dir: String,
    pub snapshot_stride: usize,
    // annealing extras
    pub anneal_initial_temp: Option<f64>,
    pub anneal_cooling: Option<f64>,
    pub anneal_moves_per_temp: usize,
    pub anneal_move_mass: Option<f64>,
    pub anneal_max_moves: Option<usize>,
    // two-scale sweep
    pub twoscale_support: (f64, f64),
    pub twoscale_k_list: Vec<usize>,
    pub twoscale_background_mass: f64,
    // convex-case suite
    pub convex_trials: usize,
    pub convex_profiles: usize,
    pub convex_t_samples: usize,
    pub convex_r_samples: usize,
    // gradient check
    pub gradcheck_pairs: usize,
    pub gradcheck_epsilons: Vec<f64>,
}

impl ExperimentConfig {
    /// Build the configured initial datum.
    pub fn initial_datum(&self) -> Result<ScalarField> {
        match (self.grid, self.init_kind) {
            (Grid::One(g), InitKind::Block) => {
                crate::grid::centered_block(g, self.init_center.0, self.mass)
            }
            (Grid::One(g), InitKind::Constant) => {
                let c = self.mass / g.len();
                Ok(ScalarField::constant(Grid::One(g), c))
            }
            (Grid::One(_), k) => Err(Error::Config(format!(
                "init kind {k:?} needs a 2D domain"
            ))),
            (Grid::Two(g), InitKind::Ball) => {
                crate::grid::indicator_ball(g, self.init_center.0, self.init_center.1, self.mass)
            }
            (Grid::Two(g), InitKind::Stripe) => {
                crate::grid::indicator_stripe(g, self.init_center.0, self.mass)
            }
            (Grid::Two(g), InitKind::Constant) => {
                let c = self.mass / g.area();
                Ok(ScalarField::constant(Grid::Two(g), c))
            }
            (Grid::Two(_), InitKind::Block) => Err(Error::Config(
                "init kind block needs a 1D domain (use ball or stripe in 2D)".into(),
            )),
        }
    }

    /// Serialize back to the INI format `parse_config` accepts.
    pub fn render(&self) -> String {
        let mut out = String::new();
        match self.grid {
            Grid::One(g) => {
                out += &format!(
                    "[domain]\nxmin = {}\nxmax = {}\nnx = {}\n",
                    g.xmin, g.xmax, g.n
                );
            }
            Grid::Two(g) => {
                out += &format!(
                    "[domain]\nxmin = {}\nxmax = {}\nnx = {}\nymin = {}\nymax = {}\nny = {}\n",
                    g.xmin, g.xmax, g.nx, g.ymin, g.ymax, g.ny
                );
            }
        }
        out += &format!("\n[time]\nT = {}\nnt = {}\n", self.time.t_final, self.time.nt);
        out += "\n[reaction]\n";
        match self.reaction {
            ReactionModel::Bistable { theta } => {
                out += &format!("kind = bistable\ntheta = {theta}\n");
            }
            ReactionModel::MonostableShifted { theta } => {
                out += &format!("kind = monostable\ntheta = {theta}\n");
            }
            ReactionModel::ConvexPower { a } => {
                out += &format!("kind = convex\na = {a}\n");
            }
            ReactionModel::CubicCustom { c3, c2, c1, c0 } => {
                out += &format!("kind = cubic\ncoeffs = {c3}, {c2}, {c1}, {c0}\n");
            }
        }
        out += &format!("\n[constraint]\nmass = {}\n", self.mass);
        out += &format!(
            "\n[init]\nkind = {}\ncenter_x = {}\ncenter_y = {}\n",
            match self.init_kind {
                InitKind::Block => "block",
                InitKind::Ball => "ball",
                InitKind::Stripe => "stripe",
                InitKind::Constant => "constant",
            },
            self.init_center.0,
            self.init_center.1
        );
        out += &format!(
            "\n[optimizer]\nmethod = {}\nmax_iter = {}\ntol = {}\neps_flat = {}\n",
            match self.method {
                Method::FixedPoint => "fixed_point",
                Method::Anneal => "anneal",
            },
            self.max_iter,
            self.tol,
            self.eps_flat
        );
        if let Some(seed) = self.seed {
            out += &format!("seed = {seed}\n");
        }
        out += &format!(
            "\n[output]\ndir = {}\nsnapshot_stride = {}\n",
            self.out_dir, self.snapshot_stride
        );
        out
    }
}

struct RawConfig {
    // (section, key) -> (line, value)
    entries: BTreeMap<(String, String), (usize, String)>,
    section_lines: BTreeMap<String, usize>,
}

fn parse_raw(text: &str) -> Result<RawConfig> {
    let mut entries = BTreeMap::new();
    let mut section_lines = BTreeMap::new();
    let mut section: Option<String> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "unterminated section header".into(),
                });
            }
            let name = line[1..line.len() - 1].trim().to_ascii_lowercase();
            if name.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "empty section name".into(),
                });
            }
            section_lines.entry(name.clone()).or_insert(line_no);
            section = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected `key = value`, got `{line}`"),
            });
        };
        let Some(section_name) = section.clone() else {
            return Err(Error::Parse {
                line: line_no,
                msg: "key outside any [section]".into(),
            });
        };
        let key = key.trim().to_ascii_lowercase();
        if key.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                msg: "empty key".into(),
            });
        }
        let prev = entries.insert(
            (section_name, key.clone()),
            (line_no, value.trim().to_string()),
        );
        if prev.is_some() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(RawConfig {
        entries,
        section_lines,
    })
}

struct Reader {
    raw: RawConfig,
    used: std::cell::RefCell<Vec<(String, String)>>,
}

impl Reader {
    fn get(&self, section: &str, key: &str) -> Option<(usize, String)> {
        let k = (section.to_string(), key.to_string());
        self.used.borrow_mut().push(k.clone());
        self.raw.entries.get(&k).cloned()
    }

    fn parse<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.get(section, key) {
            None => Ok(None),
            Some((line, value)) => value.parse::<T>().map(Some).map_err(|_| Error::Parse {
                line,
                msg: format!("cannot parse `{value}` for {section}.{key}"),
            }),
        }
    }

    fn require<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<T> {
        self.parse(section, key)?.ok_or_else(|| {
            Error::Config(format!("missing required key {section}.{key}"))
        })
    }

    fn list_f64(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get(section, key) {
            None => Ok(None),
            Some((line, value)) => value
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| Error::Parse {
                        line,
                        msg: format!("cannot parse `{}` in {section}.{key}", s.trim()),
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }

    fn list_usize(&self, section: &str, key: &str) -> Result<Option<Vec<usize>>> {
        match self.get(section, key) {
            None => Ok(None),
            Some((line, value)) => value
                .split(',')
                .map(|s| {
                    s.trim().parse::<usize>().map_err(|_| Error::Parse {
                        line,
                        msg: format!("cannot parse `{}` in {section}.{key}", s.trim()),
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }

    /// Every key must have been consumed by the schema.
    fn reject_unknown(&self) -> Result<()> {
        let used = self.used.borrow();
        for ((section, key), (line, _)) in &self.raw.entries {
            if !used.iter().any(|(s, k)| s == section && k == key) {
                return Err(Error::Parse {
                    line: *line,
                    msg: format!("unknown key {section}.{key}"),
                });
            }
        }
        const KNOWN_SECTIONS: &[&str] = &[
            "domain",
            "time",
            "reaction",
            "constraint",
            "init",
            "optimizer",
            "anneal",
            "output",
            "twoscale",
            "convex",
            "gradcheck",
        ];
        for (name, line) in &self.raw.section_lines {
            if !KNOWN_SECTIONS.contains(&name.as_str()) {
                return Err(Error::Parse {
                    line: *line,
                    msg: format!("unknown section [{name}]"),
                });
            }
        }
        Ok(())
    }
}

/// Parse and validate an experiment configuration.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw = parse_raw(text)?;
    if !raw.section_lines.contains_key("domain") {
        return Err(Error::Config("missing section [domain]".into()));
    }
    let r = Reader {
        raw,
        used: std::cell::RefCell::new(Vec::new()),
    };

    // domain
    let xmin: f64 = r.require("domain", "xmin")?;
    let xmax: f64 = r.require("domain", "xmax")?;
    let nx: usize = r.require("domain", "nx")?;
    let ymin: Option<f64> = r.parse("domain", "ymin")?;
    let ymax: Option<f64> = r.parse("domain", "ymax")?;
    let ny: Option<usize> = r.parse("domain", "ny")?;
    let grid = match (ymin, ymax, ny) {
        (None, None, None) => Grid::One(Grid1D::new(xmin, xmax, nx)?),
        (Some(y0), Some(y1), Some(ny)) => Grid::Two(Grid2D::new(xmin, xmax, y0, y1, nx, ny)?),
        _ => {
            return Err(Error::Config(
                "2D domains need all of ymin, ymax, ny".into(),
            ))
        }
    };

    // time
    let time = TimeConfig::new(r.require("time", "t")?, r.require("time", "nt")?)?;

    // reaction (defaults to the bistable benchmark term)
    let kind = r
        .get("reaction", "kind")
        .map(|(_, v)| v.to_ascii_lowercase())
        .unwrap_or_else(|| "bistable".into());
    let theta: f64 = r.parse("reaction", "theta")?.unwrap_or(0.25);
    let a: f64 = r.parse("reaction", "a")?.unwrap_or(2.0);
    let coeffs = r.list_f64("reaction", "coeffs")?;
    let reaction = match kind.as_str() {
        "bistable" => ReactionModel::bistable(theta)?,
        "monostable" => ReactionModel::monostable_shifted(theta)?,
        "convex" => ReactionModel::convex_power(a)?,
        "cubic" => {
            let c = coeffs.ok_or_else(|| {
                Error::Config("reaction.coeffs required for kind = cubic".into())
            })?;
            if c.len() != 4 {
                return Err(Error::Config(format!(
                    "reaction.coeffs needs 4 values c3, c2, c1, c0; got {}",
                    c.len()
                )));
            }
            ReactionModel::cubic(c[0], c[1], c[2], c[3])
        }
        other => {
            return Err(Error::Config(format!(
                "unknown reaction.kind `{other}` (bistable|monostable|convex|cubic)"
            )))
        }
    };

    // constraint
    let mass: f64 = r.require("constraint", "mass")?;
    if !(mass > 0.0) {
        return Err(Error::Config(format!("mass must be positive, got {mass}")));
    }
    if mass >= grid.volume() {
        return Err(Error::Config(format!(
            "mass exceeds |domain|: {mass} >= {}",
            grid.volume()
        )));
    }

    // init
    let init_kind = match r.get("init", "kind").map(|(_, v)| v.to_ascii_lowercase()) {
        None => match grid {
            Grid::One(_) => InitKind::Block,
            Grid::Two(_) => InitKind::Ball,
        },
        Some(k) => match k.as_str() {
            "block" => InitKind::Block,
            "ball" => InitKind::Ball,
            "stripe" => InitKind::Stripe,
            "constant" => InitKind::Constant,
            other => {
                return Err(Error::Config(format!(
                    "unknown init.kind `{other}` (block|ball|stripe|constant)"
                )))
            }
        },
    };
    let (def_cx, def_cy) = match grid {
        Grid::One(g) => (0.5 * (g.xmin + g.xmax), 0.0),
        Grid::Two(g) => (0.5 * (g.xmin + g.xmax), 0.5 * (g.ymin + g.ymax)),
    };
    let init_center = (
        r.parse("init", "center_x")?.unwrap_or(def_cx),
        r.parse("init", "center_y")?.unwrap_or(def_cy),
    );

    // optimizer
    let method = match r
        .get("optimizer", "method")
        .map(|(_, v)| v.to_ascii_lowercase())
    {
        None => Method::FixedPoint,
        Some(m) => match m.as_str() {
            "fixed_point" | "fixedpoint" | "fixed-point" => Method::FixedPoint,
            "anneal" | "annealing" | "simulated_annealing" => Method::Anneal,
            other => {
                return Err(Error::Config(format!(
                    "unknown optimizer.method `{other}` (fixed_point|anneal)"
                )))
            }
        },
    };
    let max_iter: usize = r.parse("optimizer", "max_iter")?.unwrap_or(100);
    let tol: f64 = r.parse("optimizer", "tol")?.unwrap_or(1e-6);
    let eps_flat: f64 = r.parse("optimizer", "eps_flat")?.unwrap_or(3e-2);
    if !(tol > 0.0) || !(eps_flat > 0.0) {
        return Err(Error::Config(
            "optimizer.tol and optimizer.eps_flat must be positive".into(),
        ));
    }
    let seed: Option<u64> = r.parse("optimizer", "seed")?;

    // output
    let out_dir = r
        .get("output", "dir")
        .map(|(_, v)| v)
        .unwrap_or_else(|| "out".into());
    let snapshot_stride: usize = r.parse("output", "snapshot_stride")?.unwrap_or(0);

    // anneal extras
    let anneal_initial_temp: Option<f64> = r.parse("anneal", "initial_temp")?;
    let anneal_cooling: Option<f64> = r.parse("anneal", "cooling")?;
    let anneal_moves_per_temp: usize = r.parse("anneal", "moves_per_temp")?.unwrap_or(50);
    let anneal_move_mass: Option<f64> = r.parse("anneal", "move_mass")?;
    let anneal_max_moves: Option<usize> = r.parse("anneal", "max_moves")?;
    if let Some(c) = anneal_cooling {
        if !(0.0 < c && c < 1.0) {
            return Err(Error::Config(format!(
                "anneal.cooling must be in (0,1), got {c}"
            )));
        }
    }

    // two-scale sweep
    let ts_a: f64 = r.parse("twoscale", "a")?.unwrap_or(0.7);
    let ts_b: f64 = r.parse("twoscale", "b")?.unwrap_or(2.4);
    let twoscale_k_list = r
        .list_usize("twoscale", "k_list")?
        .unwrap_or_else(|| vec![4, 8, 16, 32]);
    let twoscale_background_mass: f64 = r
        .parse("twoscale", "background_mass")?
        .unwrap_or(std::f64::consts::PI / 4.0);

    // convex suite
    let convex_trials: usize = r.parse("convex", "trials")?.unwrap_or(200);
    let convex_profiles: usize = r.parse("convex", "profiles")?.unwrap_or(20);
    let convex_t_samples: usize = r.parse("convex", "t_samples")?.unwrap_or(5);
    let convex_r_samples: usize = r.parse("convex", "r_samples")?.unwrap_or(5);

    // gradient check
    let gradcheck_pairs: usize = r.parse("gradcheck", "pairs")?.unwrap_or(20);
    let gradcheck_epsilons = r
        .list_f64("gradcheck", "epsilons")?
        .unwrap_or_else(|| vec![1e-2, 1e-3, 1e-4, 1e-5]);

    r.reject_unknown()?;

    let cfg = ExperimentConfig {
        grid,
        time,
        reaction,
        mass,
        init_kind,
        init_center,
        method,
        max_iter,
        tol,
        eps_flat,
        seed,
        out_dir,
        snapshot_stride,
        anneal_initial_temp,
        anneal_cooling,
        anneal_moves_per_temp,
        anneal_move_mass,
        anneal_max_moves,
        twoscale_support: (ts_a, ts_b),
        twoscale_k_list,
        twoscale_background_mass,
        convex_trials,
        convex_profiles,
        convex_t_samples,
        convex_r_samples,
        gradcheck_pairs,
        gradcheck_epsilons,
    };
    // the initial datum must be constructible (fail fast on geometry)
    cfg.initial_datum()?;
    Ok(cfg)
}
