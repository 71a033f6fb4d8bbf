//! Field persistence in a plot-friendly text format.
//!
//! 1D: `# n xmin xmax` header, then one `x value` pair per line.
//! 2D: `# nx ny xmin xmax ymin ymax` header, then ny rows of nx values.
//! Values are printed with 17 significant digits so a round trip through
//! the parser reproduces every bit.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, Grid1D, Grid2D, ScalarField};

/// Render a field in the dump format.
pub fn render_field(field: &ScalarField) -> String {
    let mut out = String::new();
    match field.grid {
        Grid::One(g) => {
            out += &format!("# {} {:.16e} {:.16e}\n", g.n, g.xmin, g.xmax);
            for (i, v) in field.values.iter().enumerate() {
                out += &format!("{:.16e} {:.16e}\n", g.node(i), v);
            }
        }
        Grid::Two(g) => {
            out += &format!(
                "# {} {} {:.16e} {:.16e} {:.16e} {:.16e}\n",
                g.nx, g.ny, g.xmin, g.xmax, g.ymin, g.ymax
            );
            for iy in 0..g.ny {
                let row: Vec<String> = (0..g.nx)
                    .map(|ix| format!("{:.16e}", field.values[g.idx(ix, iy)]))
                    .collect();
                out += &row.join(" ");
                out.push('\n');
            }
        }
    }
    out
}

pub fn dump_field(path: &Path, field: &ScalarField) -> Result<()> {
    fs::write(path, render_field(field))?;
    Ok(())
}

/// Parse a field dump (1D or 2D, recognized by the header arity).
pub fn parse_field(text: &str) -> Result<ScalarField> {
    let mut lines = text.lines().enumerate();
    let (header_line, header) = lines
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| Error::Parse {
            line: 1,
            msg: "empty field file".into(),
        })?;
    let header = header.trim();
    if !header.starts_with('#') {
        return Err(Error::Parse {
            line: header_line + 1,
            msg: "missing `#` grid header".into(),
        });
    }
    let nums: Vec<&str> = header[1..].split_whitespace().collect();
    match nums.len() {
        3 => {
            let n: usize = parse_num(nums[0], header_line + 1)?;
            let xmin: f64 = parse_num(nums[1], header_line + 1)?;
            let xmax: f64 = parse_num(nums[2], header_line + 1)?;
            let grid = Grid1D::new(xmin, xmax, n)?;
            let mut values = Vec::with_capacity(n);
            for (idx, line) in lines {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let mut cols = line.split_whitespace();
                let (Some(_x), Some(v)) = (cols.next(), cols.next()) else {
                    return Err(Error::Parse {
                        line: idx + 1,
                        msg: "expected `x value`".into(),
                    });
                };
                values.push(parse_num::<f64>(v, idx + 1)?);
            }
            if values.len() != n {
                return Err(Error::Parse {
                    line: header_line + 1,
                    msg: format!("header claims {n} nodes, file has {}", values.len()),
                });
            }
            ScalarField::new(Grid::One(grid), values)
        }
        6 => {
            let nx: usize = parse_num(nums[0], header_line + 1)?;
            let ny: usize = parse_num(nums[1], header_line + 1)?;
            let xmin: f64 = parse_num(nums[2], header_line + 1)?;
            let xmax: f64 = parse_num(nums[3], header_line + 1)?;
            let ymin: f64 = parse_num(nums[4], header_line + 1)?;
            let ymax: f64 = parse_num(nums[5], header_line + 1)?;
            let grid = Grid2D::new(xmin, xmax, ymin, ymax, nx, ny)?;
            let mut values = Vec::with_capacity(nx * ny);
            for (idx, line) in lines {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                for tok in line.split_whitespace() {
                    values.push(parse_num::<f64>(tok, idx + 1)?);
                }
            }
            if values.len() != nx * ny {
                return Err(Error::Parse {
                    line: header_line + 1,
                    msg: format!(
                        "header claims {nx} x {ny} = {} values, file has {}",
                        nx * ny,
                        values.len()
                    ),
                });
            }
            ScalarField::new(Grid::Two(grid), values)
        }
        other => Err(Error::Parse {
            line: header_line + 1,
            msg: format!("grid header needs 3 (1D) or 6 (2D) numbers, got {other}"),
        }),
    }
}

pub fn load_field(path: &Path) -> Result<ScalarField> {
    let text = fs::read_to_string(path)?;
    parse_field(&text)
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse number `{tok}`"),
    })
}
