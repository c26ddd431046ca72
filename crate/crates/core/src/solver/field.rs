use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::spectral::SymMatrix;

use super::grid::{GridDomain, Mask};

const MAX_FIELD_POINTS: usize = 1 << 24;

/// Values of `u` at every point of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: GridDomain,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Argument(format!(
                "field has {} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: GridDomain, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.position(i))).collect();
        ScalarField { grid, values }
    }

    /// Whether every non-interior value is exactly zero.
    pub fn has_zero_boundary(&self) -> bool {
        (0..self.grid.len())
            .filter(|&i| !self.grid.is_interior(i))
            .all(|i| self.values[i] == 0.0)
    }

    /// Second-order central-difference Hessian at an interior point.
    pub fn hessian(&self, point: usize) -> SymMatrix {
        discrete_hessian(&self.grid, &self.values, point)
    }

    /// Centered-difference gradient at an interior point.
    pub fn gradient(&self, point: usize) -> Vec<f64> {
        centered_gradient(&self.grid, &self.values, point)
    }

    /// Multilinear interpolation onto another grid covering the same box.
    pub fn interpolate_to(&self, target: &GridDomain) -> Result<ScalarField> {
        let g = &self.grid;
        if target.dim() != g.dim() {
            return Err(Error::Argument("interpolation target has a different dimension".into()));
        }
        for a in 0..g.dim() {
            let slack = 1e-12 * (g.upper()[a] - g.lower()[a]);
            if target.lower()[a] < g.lower()[a] - slack || target.upper()[a] > g.upper()[a] + slack {
                return Err(Error::Argument("interpolation target leaves the source box".into()));
            }
        }
        let dim = g.dim();
        let values = (0..target.len())
            .map(|i| {
                let x = target.position(i);
                let mut base = vec![0usize; dim];
                let mut frac = vec![0.0; dim];
                for a in 0..dim {
                    let s = ((x[a] - g.lower()[a]) / g.spacing()[a]).clamp(0.0, g.cells()[a] as f64);
                    let j = (s.floor() as usize).min(g.cells()[a] - 1);
                    base[a] = j;
                    frac[a] = s - j as f64;
                }
                let mut v = 0.0;
                for corner in 0u32..(1 << dim) {
                    let mut w = 1.0;
                    let mut m = base.clone();
                    for a in 0..dim {
                        if corner & (1 << a) != 0 {
                            m[a] += 1;
                            w *= frac[a];
                        } else {
                            w *= 1.0 - frac[a];
                        }
                    }
                    if w != 0.0 {
                        v += w * self.values[g.flat_index(&m)];
                    }
                }
                v
            })
            .collect();
        ScalarField::new(target.clone(), values)
    }

    /// Writes the plain-text field format: a header
    /// `dim n1 [n2 [n3]] x0 [y0 [z0]] h` followed by one value per line in
    /// row-major order. Requires equal spacing on every axis.
    pub fn to_field_text(&self) -> Result<String> {
        let h = self.grid.uniform_spacing().ok_or_else(|| {
            Error::FieldFormat("field files need equal spacing on every axis".into())
        })?;
        let mut out = String::new();
        let mut header: Vec<String> = vec![self.grid.dim().to_string()];
        header.extend(self.grid.points().iter().map(|n| n.to_string()));
        header.extend(self.grid.lower().iter().map(|x| format!("{x:?}")));
        header.push(format!("{h:?}"));
        out.push_str(&header.join(" "));
        out.push('\n');
        for v in &self.values {
            writeln!(out, "{v:?}").expect("writing to a String");
        }
        Ok(out)
    }

    /// Parses the plain-text field format. The grid comes back unmasked.
    pub fn from_field_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::FieldFormat("empty field file".into()))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        let dim: usize = toks
            .first()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::FieldFormat("header must start with the dimension".into()))?;
        if !(2..=3).contains(&dim) {
            return Err(Error::FieldFormat(format!("dimension must be 2 or 3, got {dim}")));
        }
        if toks.len() != 2 * dim + 2 {
            return Err(Error::FieldFormat(format!(
                "header for dim {dim} needs {} fields, got {}",
                2 * dim + 2,
                toks.len()
            )));
        }
        let mut points = Vec::with_capacity(dim);
        for t in &toks[1..=dim] {
            let n: usize = t
                .parse()
                .map_err(|_| Error::FieldFormat(format!("bad point count `{t}`")))?;
            if !(2..=1 << 16).contains(&n) {
                return Err(Error::FieldFormat(format!("point count {n} out of range")));
            }
            points.push(n);
        }
        if points.iter().product::<usize>() > MAX_FIELD_POINTS {
            return Err(Error::FieldFormat(format!("grid larger than {MAX_FIELD_POINTS} points")));
        }
        let mut nums = Vec::with_capacity(dim + 1);
        for t in &toks[dim + 1..] {
            let v: f64 = t
                .parse()
                .map_err(|_| Error::FieldFormat(format!("bad number `{t}` in header")))?;
            if !v.is_finite() {
                return Err(Error::FieldFormat(format!("non-finite header value `{t}`")));
            }
            nums.push(v);
        }
        let h = nums[dim];
        if !(h > 0.0) {
            return Err(Error::FieldFormat(format!("spacing must be positive, got {h}")));
        }
        let lower = nums[..dim].to_vec();
        let cells: Vec<usize> = points.iter().map(|n| n - 1).collect();
        let upper: Vec<f64> = lower
            .iter()
            .zip(&cells)
            .map(|(x, c)| x + *c as f64 * h)
            .collect();
        let grid = GridDomain::new(lower, upper, cells, Mask::None)
            .map_err(|e| Error::FieldFormat(e.to_string()))?;
        let total = grid.len();
        let mut values = Vec::with_capacity(total);
        for line in lines {
            let t = line.trim();
            let v: f64 = t
                .parse()
                .map_err(|_| Error::FieldFormat(format!("bad value `{t}`")))?;
            if !v.is_finite() {
                return Err(Error::FieldFormat(format!("non-finite value `{t}`")));
            }
            if values.len() == total {
                return Err(Error::FieldFormat(format!("more than {total} values")));
            }
            values.push(v);
        }
        if values.len() != total {
            return Err(Error::FieldFormat(format!(
                "expected {total} values, found {}",
                values.len()
            )));
        }
        ScalarField::new(grid, values)
    }
}

/// Diagonal `(u₊ − 2u + u₋)/h²`; mixed entries by the four-point cross
/// `(u₊₊ − u₊₋ − u₋₊ + u₋₋)/(4 h_a h_b)`.
pub fn discrete_hessian(grid: &GridDomain, values: &[f64], point: usize) -> SymMatrix {
    let dim = grid.dim();
    let h = grid.spacing();
    let mut e = vec![0.0; dim * dim];
    let c = values[point];
    for a in 0..dim {
        let s = grid.stride(a);
        e[a * dim + a] = (values[point + s] - 2.0 * c + values[point - s]) / (h[a] * h[a]);
        for b in (a + 1)..dim {
            let t = grid.stride(b);
            let v = (values[point + s + t] - values[point + s - t] - values[point - s + t]
                + values[point - s - t])
                / (4.0 * h[a] * h[b]);
            e[a * dim + b] = v;
            e[b * dim + a] = v;
        }
    }
    SymMatrix::new(dim, e).expect("stencil output is symmetric")
}

pub fn centered_gradient(grid: &GridDomain, values: &[f64], point: usize) -> Vec<f64> {
    (0..grid.dim())
        .map(|a| {
            let s = grid.stride(a);
            (values[point + s] - values[point - s]) / (2.0 * grid.spacing()[a])
        })
        .collect()
}

/// Gradient at any box point: centered differences inside, second-order
/// one-sided differences on the faces. Exact for quadratics.
pub fn box_gradient(grid: &GridDomain, values: &[f64], point: usize) -> Vec<f64> {
    let idx = grid.multi_index(point);
    (0..grid.dim())
        .map(|a| {
            let s = grid.stride(a);
            let h2 = 2.0 * grid.spacing()[a];
            if idx[a] == 0 {
                (-3.0 * values[point] + 4.0 * values[point + s] - values[point + 2 * s]) / h2
            } else if idx[a] == grid.cells()[a] {
                (3.0 * values[point] - 4.0 * values[point - s] + values[point - 2 * s]) / h2
            } else {
                (values[point + s] - values[point - s]) / h2
            }
        })
        .collect()
}
