use rayon::prelude::*;

use crate::cones::{eta, in_gamma_tilde};
use crate::error::{Error, Result};
use crate::spectral::eigen_sym;
use crate::symfun::sum_hessian;

use super::field::{discrete_hessian, ScalarField};
use super::linear::{self, CsrMatrix};
use super::{linearize_with, rhs_at, sup_norm, Homotopy, Instance};

/// Line search gives up below this step.
pub const MIN_STEP: f64 = 1.0 / (1u64 << 20) as f64;
const GUESS_EXPONENTS: std::ops::RangeInclusive<i32> = -30..=40;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    /// Stop once the sup-norm residual is at or below this.
    pub tol: f64,
    /// Newton iterations allowed per continuation stage.
    pub max_iter: usize,
    /// Continuation parameters `t`, ascending and ending at 1.
    pub homotopy: Vec<f64>,
    /// How many midpoints may be inserted into the schedule after failures.
    pub max_refinements: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            tol: 1e-10,
            max_iter: 50,
            homotopy: vec![1.0],
            max_refinements: 6,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Argument(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Argument("max_iter must be at least 1".into()));
        }
        let h = &self.homotopy;
        if h.is_empty() || *h.last().expect("non-empty") != 1.0 {
            return Err(Error::Argument("homotopy schedule must end at 1".into()));
        }
        if h.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) || h.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument("homotopy schedule must increase strictly within (0, 1]".into()));
        }
        Ok(())
    }
}

/// One accepted iterate. `iteration` 0 is the starting field of a stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub t: f64,
    pub iteration: usize,
    pub residual: f64,
    pub step: f64,
    /// Interior points where the iterate fails the admissibility test.
    pub violations: usize,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub field: ScalarField,
    pub iterations: usize,
    pub residual: f64,
    pub admissible: bool,
    pub trace: Vec<TraceEntry>,
    /// Scale of the quadratic in the starting field.
    pub c: f64,
}

#[derive(Debug, Clone)]
pub struct InitialGuess {
    pub field: ScalarField,
    pub c: f64,
}

fn laplacian_system(inst: &Instance) -> CsrMatrix {
    let grid = &inst.grid;
    let h = grid.spacing();
    let rows = (0..grid.len())
        .map(|i| {
            if !grid.is_interior(i) {
                return vec![(i, 1.0)];
            }
            let mut row = Vec::with_capacity(1 + 2 * grid.dim());
            let mut centre = 0.0;
            for (a, ha) in h.iter().enumerate() {
                let s = grid.stride(a);
                let w = 1.0 / (ha * ha);
                row.push((i + s, w));
                row.push((i - s, w));
                centre -= 2.0 * w;
            }
            row.push((i, centre));
            row
        })
        .collect();
    CsrMatrix::from_rows(rows)
}

/// `S_k(η(c·I)) = S_k((n − 1)c, …, (n − 1)c)`.
pub fn scaled_identity_value(inst: &Instance, c: f64) -> f64 {
    let n = inst.params.n;
    sum_hessian(&vec![(n as f64 - 1.0) * c; n], &inst.params)
}

/// Transfinite (Boolean-sum) interpolation of the boundary data at grid
/// point `i`: `T = 1 − Π_a (1 − P_a)`, where `P_a` interpolates linearly
/// between the two faces normal to axis `a`. Reproduces sums of univariate
/// functions, in particular every separable quadratic.
fn transfinite(inst: &Instance, i: usize) -> Result<f64> {
    let grid = &inst.grid;
    let dim = grid.dim();
    let multi = grid.multi_index(i);
    let cells = grid.cells();
    let mut total = 0.0;
    for subset in 1u32..(1 << dim) {
        let axes: Vec<usize> = (0..dim).filter(|a| subset & (1 << a) != 0).collect();
        let sign = if axes.len() % 2 == 1 { 1.0 } else { -1.0 };
        let mut part = 0.0;
        for corner in 0u32..(1 << axes.len()) {
            let mut m = multi.clone();
            let mut weight = 1.0;
            for (b, &a) in axes.iter().enumerate() {
                let s = multi[a] as f64 / cells[a] as f64;
                if corner & (1 << b) != 0 {
                    m[a] = cells[a];
                    weight *= s;
                } else {
                    m[a] = 0;
                    weight *= 1.0 - s;
                }
            }
            if weight != 0.0 {
                part += weight * inst.boundary_value(grid.flat_index(&m))?;
            }
        }
        total += sign * part;
    }
    Ok(total)
}

/// Smallest `c = 2^j` with `S_k(η(c·I)) ≥ sup f(x, u, Du)` over the interior,
/// or `None` if `f` cannot be evaluated on `values`.
fn dominating_scale(inst: &Instance, values: &[f64], interior: &[usize]) -> Option<f64> {
    let mut sup_f = f64::NEG_INFINITY;
    for &i in interior {
        sup_f = sup_f.max(rhs_at(inst, Homotopy::FINAL, i, values).ok()?);
    }
    GUESS_EXPONENTS
        .map(|j| 2f64.powi(j))
        .find(|&c| scaled_identity_value(inst, c) >= sup_f)
}

/// Starting field. The primary form is `u₀ = L + c·W`, where `L` is the
/// discrete harmonic extension of the boundary data and `W` solves
/// `Δ_h W = n` with `W = 0` off the interior; equivalently
/// `u₀ = c·(|x − x_c|² − r²)/2` plus a discrete harmonic correction matching
/// the boundary data. `c` is the smallest power of two with
/// `S_k(η(c·I)) ≥ sup f(x, u₀, Du₀)` for which `u₀` is also admissible at
/// every interior point.
///
/// `W` has log-singular mixed derivatives at box corners, so for large `c`
/// this can miss the admissible set on fine grids. Then the largest
/// admissible `c` below the dominating one is returned (the solve continues
/// in `f` from there, see [`newton_solve`]); failing that, the transfinite
/// interpolation of the boundary data.
pub fn initial_guess(inst: &Instance) -> Result<InitialGuess> {
    let grid = &inst.grid;
    let n = grid.dim() as f64;
    let lap = laplacian_system(inst);
    let mut g = vec![0.0; grid.len()];
    let mut ones = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        if grid.is_interior(i) {
            ones[i] = n;
        } else {
            g[i] = inst.boundary_value(i)?;
        }
    }
    let harmonic = linear::solve(&lap, &g)?;
    let w = linear::solve(&lap, &ones)?;
    let interior = grid.interior_points();

    let mut subdominant: Option<(f64, Vec<f64>)> = None;
    for j in GUESS_EXPONENTS {
        let c = 2f64.powi(j);
        let values: Vec<f64> = harmonic
            .iter()
            .zip(&w)
            .enumerate()
            .map(|(i, (l, w))| if grid.is_interior(i) { l + c * w } else { g[i] })
            .collect();
        let Some(needed) = dominating_scale(inst, &values, &interior) else {
            continue;
        };
        let (_, violations) = evaluate(inst, &values, Homotopy::FINAL)?;
        if violations > 0 {
            continue;
        }
        if needed <= c {
            return Ok(InitialGuess {
                field: ScalarField::new(grid.clone(), values)?,
                c,
            });
        }
        subdominant = Some((c, values));
    }
    if let Some((c, values)) = subdominant {
        return Ok(InitialGuess {
            field: ScalarField::new(grid.clone(), values)?,
            c,
        });
    }

    let mut values = g;
    for &i in &interior {
        values[i] = transfinite(inst, i)?;
    }
    if let Some(c) = dominating_scale(inst, &values, &interior) {
        if let Ok((_, 0)) = evaluate(inst, &values, Homotopy::FINAL) {
            return Ok(InitialGuess {
                field: ScalarField::new(grid.clone(), values)?,
                c,
            });
        }
    }
    Err(Error::Instance(
        "no admissible starting field: neither L + c·W (c a power of two) nor the transfinite interpolation of the boundary data".into(),
    ))
}

/// Continuation points `t` at which `f_t` doubles, from `f_0` up to `sup_f`.
fn doubling_schedule(f0: f64, sup_f: f64) -> Vec<f64> {
    let mut ts = Vec::new();
    if !(f0 > 0.0 && sup_f > f0) {
        return ts;
    }
    let mut target = 2.0 * f0;
    while target < sup_f {
        ts.push((target - f0) / (sup_f - f0));
        target *= 2.0;
    }
    ts
}

/// Residual and number of inadmissible interior points, from one
/// eigen-decomposition per point. A right-hand side that cannot be
/// evaluated is an error.
fn evaluate(inst: &Instance, values: &[f64], hom: Homotopy) -> Result<(Vec<f64>, usize)> {
    let grid = &inst.grid;
    let per_point: Vec<Result<(f64, bool)>> = (0..grid.len())
        .into_par_iter()
        .with_min_len(256)
        .map(|i| {
            if !grid.is_interior(i) {
                return Ok((0.0, true));
            }
            let h = discrete_hessian(grid, values, i);
            let dec = eigen_sym(&h)?;
            let e = eta(&dec.values);
            let ok = in_gamma_tilde(&e, &inst.params);
            let s = sum_hessian(&e, &inst.params);
            Ok((s - rhs_at(inst, hom, i, values)?, ok))
        })
        .collect();
    let mut r = Vec::with_capacity(grid.len());
    let mut bad = 0;
    for p in per_point {
        let (v, ok) = p?;
        r.push(v);
        bad += usize::from(!ok);
    }
    Ok((r, bad))
}

struct Stage<'a> {
    inst: &'a Instance,
    cfg: &'a SolveConfig,
    hom: Homotopy,
}

impl Stage<'_> {
    fn nonconvergence(&self, iterations: usize, residual: f64, reason: &str, trace: &[TraceEntry]) -> Error {
        Error::NonConvergence {
            iterations,
            residual,
            reason: format!("{reason} (t = {})", self.hom.t),
            trace: trace.iter().map(|e| (e.residual, e.step)).collect(),
        }
    }

    /// Damped Newton from `values`; returns the converged field and its trace.
    fn run(&self, mut values: Vec<f64>) -> Result<(Vec<f64>, Vec<TraceEntry>)> {
        let (mut r, violations) = evaluate(self.inst, &values, self.hom)?;
        let mut res = sup_norm(&r);
        let mut trace = vec![TraceEntry {
            t: self.hom.t,
            iteration: 0,
            residual: res,
            step: 0.0,
            violations,
        }];
        if violations > 0 {
            let first = super::admissibility_violations(self.inst, &values)?[0];
            return Err(super::cone_error(&self.inst.grid, first));
        }
        let mut it = 0;
        while res > self.cfg.tol {
            if it >= self.cfg.max_iter {
                return Err(self.nonconvergence(it, res, "iteration cap reached", &trace));
            }
            let a = linearize_with(self.inst, &values, self.hom)?;
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let delta = linear::solve(&a, &rhs)?;
            let mut step = 1.0;
            loop {
                let trial: Vec<f64> = values.iter().zip(&delta).map(|(u, d)| u + step * d).collect();
                // A right-hand side that fails to evaluate rejects the step.
                if let Ok((r_trial, 0)) = evaluate(self.inst, &trial, self.hom) {
                    let res_trial = sup_norm(&r_trial);
                    if res_trial < res {
                        values = trial;
                        r = r_trial;
                        res = res_trial;
                        break;
                    }
                }
                step *= 0.5;
                if step < MIN_STEP {
                    return Err(self.nonconvergence(it, res, "line search stalled", &trace));
                }
            }
            it += 1;
            trace.push(TraceEntry {
                t: self.hom.t,
                iteration: it,
                residual: res,
                step,
                violations: 0,
            });
        }
        Ok((values, trace))
    }
}

/// Solves the instance by damped Newton, continuing in `t` along
/// `f_t = (1 − t)·S_k(η(c·I)) + t·f` over the configured schedule. When the
/// start had to use a `c` below the dominating one, extra stages are added
/// at which `f_t` doubles. A failed stage is retried after inserting the
/// midpoint of the last converged `t` and the failed one.
pub fn newton_solve(inst: &Instance, cfg: &SolveConfig) -> Result<SolveResult> {
    cfg.validate()?;
    newton_solve_from(inst, cfg, initial_guess(inst)?)
}

/// [`newton_solve`] from a caller-supplied starting field. Its boundary
/// values are replaced by the instance's Dirichlet data.
pub fn newton_solve_from(inst: &Instance, cfg: &SolveConfig, guess: InitialGuess) -> Result<SolveResult> {
    cfg.validate()?;
    if guess.field.grid != inst.grid {
        return Err(Error::Argument("starting field lives on a different grid".into()));
    }
    let mut guess = guess;
    for i in 0..inst.grid.len() {
        if !inst.grid.is_interior(i) {
            guess.field.values[i] = inst.boundary_value(i)?;
        }
    }
    let f0 = scaled_identity_value(inst, guess.c);
    let interior = inst.grid.interior_points();
    let sup_f = interior
        .iter()
        .map(|&i| rhs_at(inst, Homotopy::FINAL, i, &guess.field.values))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    // A start below the dominating scale is continued in f by doublings.
    let mut schedule = doubling_schedule(f0, sup_f);
    schedule.extend(cfg.homotopy.iter().copied());
    schedule.sort_by(f64::total_cmp);
    schedule.dedup();
    let mut values = guess.field.values;
    let mut pending: Vec<f64> = schedule.into_iter().rev().collect();
    let mut t_done = 0.0;
    let mut refinements = 0;
    let mut trace = Vec::new();
    let mut iterations = 0;

    while let Some(&t) = pending.last() {
        let stage = Stage {
            inst,
            cfg,
            hom: Homotopy { t, f0 },
        };
        match stage.run(values.clone()) {
            Ok((v, stage_trace)) => {
                iterations += stage_trace.len() - 1;
                trace.extend(stage_trace);
                values = v;
                t_done = t;
                pending.pop();
            }
            Err(Error::NonConvergence { .. }) if refinements < cfg.max_refinements => {
                refinements += 1;
                pending.push(0.5 * (t_done + t));
            }
            Err(e) => return Err(e),
        }
    }

    let (r, violations) = evaluate(inst, &values, Homotopy::FINAL)?;
    Ok(SolveResult {
        field: ScalarField::new(inst.grid.clone(), values)?,
        iterations,
        residual: sup_norm(&r),
        admissible: violations == 0,
        trace,
        c: guess.c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::expr::Expression;
    use crate::solver::{GridDomain, RhsSpec};
    use crate::symfun::SumHessianParams;

    #[test]
    fn guess_reproduces_quadratic() {
        let inst = Instance::new(
            SumHessianParams::new(3, 2, 1.0).unwrap(),
            RhsSpec::parse("18").unwrap(),
            Expression::parse("(x1^2 + x2^2 + x3^2 - 3)/2").unwrap(),
            GridDomain::centered_box(3, 1.0, 8).unwrap(),
        )
        .unwrap();
        let g = initial_guess(&inst).unwrap();
        assert_eq!(g.c, 1.0);
        assert!((scaled_identity_value(&inst, 2.0) - 60.0).abs() < 1e-12);
        for (i, v) in g.field.values.iter().enumerate() {
            let x = inst.grid.position(i);
            let exact = (x.iter().map(|a| a * a).sum::<f64>() - 3.0) / 2.0;
            assert!((v - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn schedule_validation() {
        let mut cfg = SolveConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.homotopy = vec![0.5];
        assert!(cfg.validate().is_err());
        cfg.homotopy = vec![0.5, 0.25, 1.0];
        assert!(cfg.validate().is_err());
        cfg.homotopy = vec![0.25, 0.5, 1.0];
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn small_linear_solve() {
        let inst = Instance::new(
            SumHessianParams::new(2, 1, 1.0).unwrap(),
            RhsSpec::parse("3 + x1^2").unwrap(),
            Expression::parse("x1*x2").unwrap(),
            GridDomain::centered_box(2, 1.0, 8).unwrap(),
        )
        .unwrap();
        let r = newton_solve(&inst, &SolveConfig::default()).unwrap();
        assert!(r.iterations <= 2, "{:?}", r.trace);
        assert!(r.admissible && r.residual <= 1e-10);
    }
}
