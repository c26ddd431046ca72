//! Finite-difference damped Newton for `S_k(η(D²u)) = f(x, u, Du)` with
//! Dirichlet data on uniform 2-D/3-D grids.

pub mod field;
pub mod grid;
pub mod linear;
pub mod newton;

use rayon::prelude::*;

use crate::cones::{eta, in_gamma_tilde};
use crate::error::{Error, Result};
use crate::frontend::expr::{Env, Expression};
use crate::spectral::{eigen_sym, spectral_derivative};
use crate::symfun::{sum_hessian, SumHessianParams};

pub use field::{box_gradient, centered_gradient, discrete_hessian, ScalarField};
pub use grid::{GridDomain, Mask};
pub use linear::CsrMatrix;
pub use newton::{initial_guess, newton_solve, newton_solve_from, InitialGuess, SolveConfig, SolveResult, TraceEntry};

/// Step of the central differences used for `∂f/∂u` and `∂f/∂p`.
pub const FD_STEP: f64 = 1e-6;

/// Right-hand side `f(x, u, Du)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsSpec {
    pub expr: Expression,
    /// Reject non-positive values of `f`.
    pub require_positive: bool,
}

impl RhsSpec {
    pub fn new(expr: Expression) -> Self {
        RhsSpec {
            expr,
            require_positive: true,
        }
    }

    pub fn parse(source: &str) -> Result<Self> {
        Ok(Self::new(Expression::parse(source)?))
    }

    pub fn eval(&self, x: &[f64], u: f64, p: &[f64]) -> Result<f64> {
        let v = self
            .expr
            .eval(&Env::new(x, u, p))
            .map_err(|e| Error::Instance(format!("f at x = {x:?}: {e}")))?;
        if self.require_positive && v <= 0.0 {
            return Err(Error::Instance(format!("f = {v} is not positive at x = {x:?}")));
        }
        Ok(v)
    }
}

/// One Dirichlet problem: operator, right-hand side, boundary data and grid.
#[derive(Debug, Clone)]
pub struct Instance {
    pub params: SumHessianParams,
    pub rhs: RhsSpec,
    /// Boundary data as an expression in `x1..x3` only.
    pub boundary: Expression,
    pub grid: GridDomain,
}

impl Instance {
    pub fn new(params: SumHessianParams, rhs: RhsSpec, boundary: Expression, grid: GridDomain) -> Result<Self> {
        if params.n != grid.dim() {
            return Err(Error::Argument(format!(
                "operator dimension {} does not match grid dimension {}",
                params.n,
                grid.dim()
            )));
        }
        if params.n > 3 {
            return Err(Error::Argument("solves support n <= 3".into()));
        }
        if boundary.depends_on_solution() {
            return Err(Error::Argument("boundary data may only depend on x1..x3".into()));
        }
        Ok(Instance {
            params,
            rhs,
            boundary,
            grid,
        })
    }

    /// Boundary expression evaluated at grid point `i`.
    pub fn boundary_value(&self, i: usize) -> Result<f64> {
        let x = self.grid.position(i);
        self.boundary
            .eval(&Env::new(&x, 0.0, &[]))
            .map_err(|e| Error::Instance(format!("boundary data at x = {x:?}: {e}")))
    }

    /// Whether the boundary data is the literal `0`.
    pub fn has_zero_boundary(&self) -> bool {
        self.boundary.is_zero_constant()
    }
}

/// Right-hand side along the continuation path:
/// `f_t = (1 − t)·f_0 + t·f` with a constant `f_0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homotopy {
    pub t: f64,
    pub f0: f64,
}

impl Homotopy {
    pub const FINAL: Homotopy = Homotopy { t: 1.0, f0: 0.0 };

    fn apply(&self, f: f64) -> f64 {
        if self.t == 1.0 {
            f
        } else {
            (1.0 - self.t) * self.f0 + self.t * f
        }
    }
}

fn rhs_at(inst: &Instance, hom: Homotopy, point: usize, values: &[f64]) -> Result<f64> {
    let x = inst.grid.position(point);
    let p = centered_gradient(&inst.grid, values, point);
    Ok(hom.apply(inst.rhs.eval(&x, values[point], &p)?))
}

/// Per-point residual `S_k(η(λ(D²_h u))) − f(x, u, D_h u)`; zero off the
/// interior.
pub fn residual(inst: &Instance, values: &[f64]) -> Result<Vec<f64>> {
    residual_with(inst, values, Homotopy::FINAL)
}

pub fn residual_with(inst: &Instance, values: &[f64], hom: Homotopy) -> Result<Vec<f64>> {
    let grid = &inst.grid;
    let per_point: Vec<Result<f64>> = (0..grid.len())
        .into_par_iter()
        .with_min_len(256)
        .map(|i| {
            if !grid.is_interior(i) {
                return Ok(0.0);
            }
            let h = discrete_hessian(grid, values, i);
            let dec = eigen_sym(&h)?;
            let s = sum_hessian(&eta(&dec.values), &inst.params);
            Ok(s - rhs_at(inst, hom, i, values)?)
        })
        .collect();
    per_point.into_iter().collect()
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Whether the discrete Hessian at interior point `i` has `η ∈ Γ̃_k`.
pub fn admissible_at(inst: &Instance, values: &[f64], i: usize) -> Result<bool> {
    let h = discrete_hessian(&inst.grid, values, i);
    let dec = eigen_sym(&h)?;
    Ok(in_gamma_tilde(&eta(&dec.values), &inst.params))
}

/// Interior points failing the admissibility test, in index order.
pub fn admissibility_violations(inst: &Instance, values: &[f64]) -> Result<Vec<usize>> {
    let grid = &inst.grid;
    let flags: Vec<Result<bool>> = (0..grid.len())
        .into_par_iter()
        .with_min_len(256)
        .map(|i| {
            if grid.is_interior(i) {
                admissible_at(inst, values, i)
            } else {
                Ok(true)
            }
        })
        .collect();
    let mut bad = Vec::new();
    for (i, ok) in flags.into_iter().enumerate() {
        if !ok? {
            bad.push(i);
        }
    }
    Ok(bad)
}

pub(crate) fn cone_error(grid: &GridDomain, i: usize) -> Error {
    Error::Cone {
        index: grid.multi_index(i),
        position: grid.position(i),
    }
}

/// Jacobian of [`residual`] with respect to the grid values. Interior rows
/// hold `dF(D²_h u) : D²_h − ∂f/∂p · D_h − ∂f/∂u`; every other row is the
/// identity. Columns of non-interior points are dropped from interior rows,
/// since Newton corrections vanish there.
pub fn linearize(inst: &Instance, values: &[f64]) -> Result<CsrMatrix> {
    linearize_with(inst, values, Homotopy::FINAL)
}

pub fn linearize_with(inst: &Instance, values: &[f64], hom: Homotopy) -> Result<CsrMatrix> {
    let grid = &inst.grid;
    let dim = grid.dim();
    let h = grid.spacing().to_vec();
    let nonlinear_rhs = inst.rhs.expr.depends_on_solution();

    let rows: Vec<Result<Vec<(usize, f64)>>> = (0..grid.len())
        .into_par_iter()
        .with_min_len(128)
        .map(|i| {
            if !grid.is_interior(i) {
                return Ok(vec![(i, 1.0)]);
            }
            let hess = discrete_hessian(grid, values, i);
            let der = spectral_derivative(&hess, &inst.params)?;
            if !in_gamma_tilde(&der.eta, &inst.params) {
                return Err(cone_error(grid, i));
            }
            let c = der.matrix();
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(1 + 2 * dim + 2 * dim * dim);
            let mut push = |j: usize, v: f64| {
                if grid.is_interior(j) {
                    row.push((j, v));
                }
            };
            let mut centre = 0.0;
            for a in 0..dim {
                let s = grid.stride(a);
                let w = c.get(a, a) / (h[a] * h[a]);
                push(i + s, w);
                push(i - s, w);
                centre -= 2.0 * w;
                for b in (a + 1)..dim {
                    let t = grid.stride(b);
                    let w = c.get(a, b) / (2.0 * h[a] * h[b]);
                    push(i + s + t, w);
                    push(i + s - t, -w);
                    push(i - s + t, -w);
                    push(i - s - t, w);
                }
            }
            if nonlinear_rhs {
                let (fu, fp) = rhs_partials(inst, i, values)?;
                centre -= hom.t * fu;
                for a in 0..dim {
                    let s = grid.stride(a);
                    let w = hom.t * fp[a] / (2.0 * h[a]);
                    push(i + s, -w);
                    push(i - s, w);
                }
            }
            row.push((i, centre));
            Ok(row)
        })
        .collect();
    let rows: Result<Vec<_>> = rows.into_iter().collect();
    Ok(CsrMatrix::from_rows(rows?))
}

/// Central differences of `f` in `u` and in each `p_a` at interior point `i`.
fn rhs_partials(inst: &Instance, i: usize, values: &[f64]) -> Result<(f64, Vec<f64>)> {
    let x = inst.grid.position(i);
    let u = values[i];
    let p = centered_gradient(&inst.grid, values, i);
    let f = |u: f64, p: &[f64]| -> Result<f64> {
        inst.rhs
            .expr
            .eval(&Env::new(&x, u, p))
            .map_err(|e| Error::Instance(format!("f at x = {x:?}: {e}")))
    };
    let e = FD_STEP;
    let fu = (f(u + e, &p)? - f(u - e, &p)?) / (2.0 * e);
    let mut fp = Vec::with_capacity(p.len());
    for a in 0..p.len() {
        let mut plus = p.clone();
        let mut minus = p.clone();
        plus[a] += e;
        minus[a] -= e;
        fp.push((f(u, &plus)? - f(u, &minus)?) / (2.0 * e));
    }
    Ok((fu, fp))
}
