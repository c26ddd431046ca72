//! Run configuration files.
//!
//! ```text
//! # comment
//! [problem]
//! n = 3
//! k = 2
//! alpha = 1
//! rhs = "18"
//! boundary = "(x1^2 + x2^2 + x3^2 - 3) / 2"
//!
//! [domain]
//! lower = -1, -1, -1
//! upper = 1, 1, 1
//! cells = 32
//! mask = box
//! ```
//!
//! Sections: `problem`, `domain`, `solver`, `estimates`, `run`. Expressions
//! are double-quoted; lists are comma-separated. Relative output paths are
//! resolved against the directory of the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::estimates::{EstimateParams, PParams};
use crate::frontend::expr::Expression;
use crate::solver::{GridDomain, Instance, Mask, RhsSpec, SolveConfig};
use crate::symfun::SumHessianParams;

/// Largest accepted config text.
pub const MAX_CONFIG_BYTES: usize = 1 << 20;

const SECTIONS: &[(&str, &[&str])] = &[
    ("problem", &["n", "k", "alpha", "rhs", "boundary", "rhs_positive"]),
    ("domain", &["lower", "upper", "cells", "mask", "radius"]),
    ("solver", &["tol", "max_iter", "homotopy", "max_refinements"]),
    ("estimates", &["beta", "p_beta", "a", "a_const", "radius", "refine"]),
    ("run", &["seed", "id", "field", "trace", "report"]),
];

#[derive(Debug, Clone, PartialEq)]
pub enum MaskChoice {
    Box,
    /// Ball about the box center; the inscribed radius when `None`.
    Ball(Option<f64>),
}

/// Output files; `None` entries are not written.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outputs {
    pub field: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub id: String,
    pub params: SumHessianParams,
    pub rhs: Expression,
    pub rhs_positive: bool,
    pub boundary: Expression,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cells: Vec<usize>,
    pub mask: MaskChoice,
    pub solver: SolveConfig,
    pub estimates: EstimateParams,
    /// Also solve on the once-refined grid to report the stable β.
    pub refine: bool,
    pub seed: u64,
    pub outputs: Outputs,
}

#[derive(Debug, Clone)]
struct Value {
    text: String,
    line: usize,
}

fn cfg_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

/// Strips a `#` or `;` comment that is not inside a quoted string.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' | ';' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

type Table = BTreeMap<(String, String), Value>;

fn tokenize(text: &str) -> Result<Table> {
    if text.len() > MAX_CONFIG_BYTES {
        return Err(cfg_err(0, format!("config larger than {MAX_CONFIG_BYTES} bytes")));
    }
    let mut table = Table::new();
    let mut section: Option<&'static str> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| cfg_err(line_no, "unterminated section header"))?
                .trim();
            let known = SECTIONS
                .iter()
                .find(|(s, _)| *s == name)
                .ok_or_else(|| cfg_err(line_no, format!("unknown section [{name}]")))?;
            section = Some(known.0);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| cfg_err(line_no, "expected `key = value`"))?;
        let key = key.trim();
        let sec = section.ok_or_else(|| cfg_err(line_no, format!("key `{key}` outside any section")))?;
        let keys = SECTIONS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !keys.contains(&key) {
            return Err(cfg_err(line_no, format!("unknown key `{key}` in [{sec}]")));
        }
        let slot = (sec.to_string(), key.to_string());
        if let Some(prev) = table.get(&slot) {
            return Err(cfg_err(line_no, format!("duplicate key `{key}` (first on line {})", prev.line)));
        }
        table.insert(
            slot,
            Value {
                text: value.trim().to_string(),
                line: line_no,
            },
        );
    }
    Ok(table)
}

struct Reader {
    table: Table,
}

impl Reader {
    fn get(&self, sec: &str, key: &str) -> Option<&Value> {
        self.table.get(&(sec.to_string(), key.to_string()))
    }

    fn required(&self, sec: &str, key: &str) -> Result<&Value> {
        self.get(sec, key)
            .ok_or_else(|| cfg_err(0, format!("missing required key `{key}` in [{sec}]")))
    }

    fn parse_num<T: std::str::FromStr>(v: &Value, what: &str) -> Result<T> {
        v.text
            .parse()
            .map_err(|_| cfg_err(v.line, format!("`{}` is not a valid {what}", v.text)))
    }

    fn float(&self, sec: &str, key: &str, default: f64) -> Result<f64> {
        match self.get(sec, key) {
            None => Ok(default),
            Some(v) => {
                let x: f64 = Self::parse_num(v, "number")?;
                if !x.is_finite() {
                    return Err(cfg_err(v.line, format!("`{key}` must be finite")));
                }
                Ok(x)
            }
        }
    }

    fn opt_float(&self, sec: &str, key: &str) -> Result<Option<f64>> {
        self.get(sec, key).map(|_| self.float(sec, key, 0.0)).transpose()
    }

    fn uint<T: std::str::FromStr>(&self, sec: &str, key: &str, default: T) -> Result<T> {
        self.get(sec, key).map_or(Ok(default), |v| Self::parse_num(v, "non-negative integer"))
    }

    fn bool(&self, sec: &str, key: &str, default: bool) -> Result<bool> {
        match self.get(sec, key) {
            None => Ok(default),
            Some(v) => match v.text.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                t => Err(cfg_err(v.line, format!("`{t}` is not a boolean"))),
            },
        }
    }

    fn list<T: std::str::FromStr>(v: &Value, what: &str) -> Result<Vec<T>> {
        v.text
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| cfg_err(v.line, format!("`{}` is not a valid {what}", s.trim())))
            })
            .collect()
    }

    fn float_list(&self, sec: &str, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.get(sec, key) else {
            return Ok(None);
        };
        let xs: Vec<f64> = Self::list(v, "number")?;
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(cfg_err(v.line, format!("`{key}` entries must be finite")));
        }
        Ok(Some(xs))
    }

    fn quoted(v: &Value) -> Result<&str> {
        v.text
            .strip_prefix('"')
            .and_then(|s| s.strip_suffix('"'))
            .filter(|s| !s.contains('"'))
            .ok_or_else(|| cfg_err(v.line, "expected a double-quoted string"))
    }

    fn expression(&self, sec: &str, key: &str) -> Result<Expression> {
        let v = self.required(sec, key)?;
        Expression::parse(Self::quoted(v)?).map_err(|e| cfg_err(v.line, format!("`{key}`: {e}")))
    }

    fn path(&self, key: &str, base: &Path) -> Result<Option<PathBuf>> {
        let Some(v) = self.get("run", key) else {
            return Ok(None);
        };
        let p = PathBuf::from(Self::quoted(v).unwrap_or(&v.text));
        if p.as_os_str().is_empty() {
            return Err(cfg_err(v.line, format!("`{key}` is empty")));
        }
        Ok(Some(if p.is_absolute() { p } else { base.join(p) }))
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c))
}

impl RunConfig {
    /// Parses config text; relative output paths are joined to `base`.
    pub fn parse_with_base(text: &str, base: &Path) -> Result<Self> {
        let r = Reader { table: tokenize(text)? };

        let nv = r.required("problem", "n")?;
        let n: usize = Reader::parse_num(nv, "dimension")?;
        let k: usize = Reader::parse_num(r.required("problem", "k")?, "integer")?;
        let alpha = r.float("problem", "alpha", 0.0)?;
        if !(2..=3).contains(&n) {
            return Err(cfg_err(nv.line, format!("solves need n in 2..=3, got {n}")));
        }
        let params = SumHessianParams::new(n, k, alpha).map_err(|e| cfg_err(nv.line, e.to_string()))?;

        let (lower, upper) = match (r.float_list("domain", "lower")?, r.float_list("domain", "upper")?) {
            (None, None) => (vec![-1.0; n], vec![1.0; n]),
            (Some(l), Some(u)) => (l, u),
            _ => return Err(cfg_err(0, "[domain] needs both `lower` and `upper` or neither")),
        };
        for (key, v) in [("lower", &lower), ("upper", &upper)] {
            if v.len() != n {
                let line = r.get("domain", key).map_or(0, |v| v.line);
                return Err(cfg_err(line, format!("`{key}` needs {n} entries, got {}", v.len())));
            }
        }
        let cells: Vec<usize> = match r.get("domain", "cells") {
            None => vec![16; n],
            Some(v) => {
                let c: Vec<usize> = Reader::list(v, "cell count")?;
                match c.len() {
                    1 => vec![c[0]; n],
                    m if m == n => c,
                    m => return Err(cfg_err(v.line, format!("`cells` needs 1 or {n} entries, got {m}"))),
                }
            }
        };
        let radius = r.opt_float("domain", "radius")?;
        let mask = match r.get("domain", "mask") {
            None => MaskChoice::Box,
            Some(v) => match v.text.as_str() {
                "box" | "none" => MaskChoice::Box,
                "ball" => MaskChoice::Ball(radius),
                t => return Err(cfg_err(v.line, format!("unknown mask `{t}` (expected box or ball)"))),
            },
        };

        let defaults = SolveConfig::default();
        let solver = SolveConfig {
            tol: r.float("solver", "tol", defaults.tol)?,
            max_iter: r.uint("solver", "max_iter", defaults.max_iter)?,
            homotopy: r.float_list("solver", "homotopy")?.unwrap_or(defaults.homotopy),
            max_refinements: r.uint("solver", "max_refinements", defaults.max_refinements)?,
        };
        solver
            .validate()
            .map_err(|e| cfg_err(r.get("solver", "homotopy").map_or(0, |v| v.line), e.to_string()))?;

        let pd = PParams::default();
        let ed = EstimateParams::default();
        let betas = r.float_list("estimates", "beta")?.unwrap_or(ed.betas);
        if let Some(b) = betas.iter().find(|b| **b < 1.0) {
            return Err(cfg_err(r.get("estimates", "beta").map_or(0, |v| v.line), format!("beta must be >= 1, got {b}")));
        }
        let estimates = EstimateParams {
            betas,
            p: PParams {
                beta: r.float("estimates", "p_beta", pd.beta)?,
                a: r.float("estimates", "a", pd.a)?,
                a_const: r.float("estimates", "a_const", pd.a_const)?,
            },
            radius: r.opt_float("estimates", "radius")?,
        };

        let id = match r.get("run", "id") {
            None => "run".to_string(),
            Some(v) => {
                let s = Reader::quoted(v).unwrap_or(&v.text).to_string();
                if !valid_id(&s) {
                    return Err(cfg_err(v.line, format!("id `{s}` may only use ASCII letters, digits, `_`, `-`, `.`")));
                }
                s
            }
        };

        let cfg = RunConfig {
            id,
            params,
            rhs: r.expression("problem", "rhs")?,
            rhs_positive: r.bool("problem", "rhs_positive", true)?,
            boundary: r.expression("problem", "boundary")?,
            lower,
            upper,
            cells,
            mask,
            solver,
            estimates,
            refine: r.bool("estimates", "refine", false)?,
            seed: r.uint("run", "seed", 0)?,
            outputs: Outputs {
                field: r.path("field", base)?,
                trace: r.path("trace", base)?,
                report: r.path("report", base)?,
            },
        };
        cfg.instance().map_err(|e| match e {
            Error::Config { .. } => e,
            e => cfg_err(r.get("domain", "cells").map_or(0, |v| v.line), e.to_string()),
        })?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_base(text, Path::new(""))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse_with_base(&text, path.parent().unwrap_or(Path::new("")))
    }

    pub fn grid(&self) -> Result<GridDomain> {
        self.grid_with_cells(self.cells.clone())
    }

    fn grid_with_cells(&self, cells: Vec<usize>) -> Result<GridDomain> {
        let mask = match self.mask {
            MaskChoice::Box => Mask::None,
            MaskChoice::Ball(r) => {
                let center: Vec<f64> = self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect();
                let inscribed = self
                    .lower
                    .iter()
                    .zip(&self.upper)
                    .map(|(l, u)| 0.5 * (u - l))
                    .fold(f64::INFINITY, f64::min);
                Mask::Ball {
                    center,
                    radius: r.unwrap_or(inscribed),
                }
            }
        };
        GridDomain::new(self.lower.clone(), self.upper.clone(), cells, mask)
    }

    pub fn instance(&self) -> Result<Instance> {
        self.instance_on(self.grid()?)
    }

    /// The same instance with twice the cells per axis.
    pub fn refined_instance(&self) -> Result<Instance> {
        self.instance_on(self.grid_with_cells(self.cells.iter().map(|c| 2 * c).collect())?)
    }

    fn instance_on(&self, grid: GridDomain) -> Result<Instance> {
        let rhs = RhsSpec {
            expr: self.rhs.clone(),
            require_positive: self.rhs_positive,
        };
        Instance::new(self.params, rhs, self.boundary.clone(), grid)
    }
}
