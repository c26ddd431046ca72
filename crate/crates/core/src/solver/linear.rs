//! Sparse storage and the linear solves used inside Newton.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Systems with fewer unknowns than this are solved directly.
pub const DENSE_LIMIT: usize = 2500;
/// A linear solve must reduce the residual at least this much.
pub const REQUIRED_REDUCTION: f64 = 1e-8;
const KRYLOV_RTOL: f64 = 1e-11;
const KRYLOV_MAX_ITER: usize = 20_000;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                debug_assert!(c < n);
                if last == Some(c) {
                    *vals.last_mut().expect("previous entry") += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    /// Lower and upper bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for i in 0..self.n {
            for (c, _) in self.row(i) {
                if c < i {
                    kl = kl.max(i - c);
                } else {
                    ku = ku.max(c - i);
                }
            }
        }
        (kl, ku)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// Row-parallel product; each row is summed in column order, so the
    /// result does not depend on the thread count.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().with_min_len(1024).for_each(|(i, yi)| {
            *yi = self.row(i).map(|(c, v)| v * x[c]).sum();
        });
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone)]
pub struct KrylovReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn true_residual(a: &CsrMatrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    let ax = a.matvec(x);
    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
}

const MAX_CYCLES: usize = 8;

/// Right-preconditioned BiCGSTAB with a Jacobi (diagonal) preconditioner.
/// The recurrence residual can drift away from `b − Ax` on non-normal
/// operators, so the iteration is restarted from the true residual until
/// that one meets `rtol` (at most a few cycles).
pub fn bicgstab(a: &CsrMatrix, b: &[f64], rtol: f64, max_iter: usize) -> (Vec<f64>, KrylovReport) {
    let n = a.n();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    let mut report = KrylovReport {
        iterations: 0,
        relative_residual: 0.0,
    };
    if bnorm == 0.0 {
        return (x, report);
    }
    let mut r = b.to_vec();
    let mut rel = 1.0;
    for _ in 0..MAX_CYCLES {
        let budget = max_iter - report.iterations;
        if budget == 0 {
            break;
        }
        report.iterations += cycle(a, &inv_diag, &mut x, r, bnorm * rtol, budget);
        r = true_residual(a, b, &x);
        let new_rel = norm(&r) / bnorm;
        let stalled = new_rel > 0.5 * rel;
        rel = new_rel;
        if rel <= rtol || stalled {
            break;
        }
    }
    report.relative_residual = rel;
    (x, report)
}

/// One BiCGSTAB run from `x` with residual `r`; returns the iteration count.
fn cycle(a: &CsrMatrix, inv_diag: &[f64], x: &mut [f64], mut r: Vec<f64>, abs_tol: f64, max_iter: usize) -> usize {
    let n = a.n();
    let precond = |v: &[f64]| -> Vec<f64> { v.iter().zip(inv_diag).map(|(x, d)| x * d).collect() };
    let r_hat = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut t = vec![0.0; n];
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut iterations = 0;
    if norm(&r) <= abs_tol {
        return 0;
    }
    while iterations < max_iter {
        iterations += 1;
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let y = precond(&p);
        a.matvec_into(&y, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            break;
        }
        alpha = rho / denom;
        let mut s = r.clone();
        for i in 0..n {
            x[i] += alpha * y[i];
            s[i] -= alpha * v[i];
        }
        if norm(&s) <= abs_tol {
            break;
        }
        let z = precond(&s);
        a.matvec_into(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm(&r) <= abs_tol {
            break;
        }
    }
    iterations
}

/// Gaussian elimination with partial pivoting in band storage: the same
/// arithmetic as dense LU, restricted to the band. Returns `None` on a zero
/// pivot.
pub fn banded_solve(a: &CsrMatrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.n();
    let (kl, ku) = a.bandwidths();
    // Row i keeps absolute columns i − kl ..= i + kl + ku; pivoting can fill
    // up to kl extra superdiagonals.
    let width = 2 * kl + ku + 1;
    let mut band = vec![0.0; n * width];
    let at = |i: usize, j: usize| i * width + (j + kl - i);
    for i in 0..n {
        for (c, v) in a.row(i) {
            band[at(i, c)] += v;
        }
    }
    let mut rhs = b.to_vec();
    for k in 0..n {
        let last_row = (k + kl).min(n - 1);
        let last_col = (k + kl + ku).min(n - 1);
        let mut p = k;
        for i in k + 1..=last_row {
            if band[at(i, k)].abs() > band[at(p, k)].abs() {
                p = i;
            }
        }
        let pivot = band[at(p, k)];
        if pivot == 0.0 || !pivot.is_finite() {
            return None;
        }
        if p != k {
            for j in k..=last_col {
                band.swap(at(k, j), at(p, j));
            }
            rhs.swap(k, p);
        }
        for i in k + 1..=last_row {
            let m = band[at(i, k)] / pivot;
            if m == 0.0 {
                continue;
            }
            band[at(i, k)] = 0.0;
            for j in k + 1..=last_col {
                band[at(i, j)] -= m * band[at(k, j)];
            }
            rhs[i] -= m * rhs[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let last_col = (k + kl + ku).min(n - 1);
        let mut acc = rhs[k];
        for j in k + 1..=last_col {
            acc -= band[at(k, j)] * x[j];
        }
        x[k] = acc / band[at(k, k)];
    }
    Some(x)
}

/// Solves `A x = b`. Rows that are exactly the identity are eliminated
/// first; the remaining unknowns go to a direct band solve below
/// [`DENSE_LIMIT`] and to BiCGSTAB otherwise.
pub fn solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.n();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let fixed: Vec<bool> = (0..n)
        .map(|i| {
            let mut r = a.row(i);
            matches!((r.next(), r.next()), (Some((c, v)), None) if c == i && v == 1.0)
        })
        .collect();
    let active: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
    let mut slot = vec![usize::MAX; n];
    for (k, &i) in active.iter().enumerate() {
        slot[i] = k;
    }
    let mut x: Vec<f64> = (0..n).map(|i| if fixed[i] { b[i] } else { 0.0 }).collect();
    let mut rows = Vec::with_capacity(active.len());
    let mut rhs = Vec::with_capacity(active.len());
    for &i in &active {
        let mut bi = b[i];
        let mut row = Vec::new();
        for (c, v) in a.row(i) {
            if fixed[c] {
                bi -= v * x[c];
            } else {
                row.push((slot[c], v));
            }
        }
        rows.push(row);
        rhs.push(bi);
    }
    let reduced = CsrMatrix::from_rows(rows);
    let (y, iterations) = if active.len() < DENSE_LIMIT {
        let y = banded_solve(&reduced, &rhs).ok_or(Error::LinearSolver {
            relative: f64::INFINITY,
            iterations: 0,
        })?;
        (y, 1)
    } else {
        let (y, rep) = bicgstab(&reduced, &rhs, KRYLOV_RTOL, KRYLOV_MAX_ITER);
        (y, rep.iterations)
    };
    // Judge the solve on the system actually solved: the eliminated rows
    // are exact, and their couplings can dwarf the original right-hand side.
    let rnorm = norm(&rhs);
    let relative = if rnorm == 0.0 {
        0.0
    } else {
        norm(&true_residual(&reduced, &rhs, &y)) / rnorm
    };
    if !(relative <= REQUIRED_REDUCTION) {
        return Err(Error::LinearSolver {
            relative,
            iterations,
        });
    }
    for (k, &i) in active.iter().enumerate() {
        x[i] = y[k];
    }
    Ok(x)
}
