//! Small dense symmetric matrices and the matrix-space calculus of
//! `H ↦ S_k(η(λ(H)))`.
//!
//! `U[H] = tr(H)·I − H` has eigenvalues `η(λ(H))` in the same eigenframe as
//! `H`, so every quantity here reduces to the symmetric-function layer after
//! one Jacobi decomposition.

use crate::cones::eta;
use crate::error::{Error, Result};
use crate::symfun::{d2_sum_hessian, d_sum_hessian, sum_hessian, EigenTuple, SumHessianParams};

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 8;
const SYMMETRY_TOL: f64 = 1e-14;
const JACOBI_REL_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 50;
/// Relative eigenvalue gap below which the divided difference is replaced by
/// its limit.
pub const DEGENERATE_GAP: f64 = 1e-8;

/// Dense symmetric `dim × dim` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    /// Checks symmetry to `1e-14` absolute and stores the symmetrized matrix.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if !(MIN_DIM..=MAX_DIM).contains(&dim) {
            return Err(Error::Argument(format!("matrix dimension {dim} outside 2..=8")));
        }
        if entries.len() != dim * dim {
            return Err(Error::Argument(format!(
                "expected {} entries, got {}",
                dim * dim,
                entries.len()
            )));
        }
        let mut entries = entries;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let (a, b) = (entries[i * dim + j], entries[j * dim + i]);
                if (a - b).abs() > SYMMETRY_TOL {
                    return Err(Error::Argument(format!(
                        "matrix not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
                let m = 0.5 * (a + b);
                entries[i * dim + j] = m;
                entries[j * dim + i] = m;
            }
        }
        Ok(SymMatrix { dim, entries })
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut e = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                e[i * dim + j] = f(i, j);
            }
        }
        Self::new(dim, e)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diag(values: &[f64]) -> Result<Self> {
        Self::from_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, t: f64) -> SymMatrix {
        SymMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|v| v * t).collect(),
        }
    }

    /// `self + t·other`.
    pub fn add_scaled(&self, other: &SymMatrix, t: f64) -> SymMatrix {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        SymMatrix {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + t * b)
                .collect(),
        }
    }

    /// `Qᵀ·self·Q` for a square row-major `Q`.
    pub fn congruence(&self, q: &[f64]) -> SymMatrix {
        let n = self.dim;
        let mut tmp = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                tmp[i * n + j] = (0..n).map(|k| self.get(i, k) * q[k * n + j]).sum();
            }
        }
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..n).map(|k| q[k * n + i] * tmp[k * n + j]).sum();
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        SymMatrix { dim: n, entries: out }
    }
}

/// Eigenvalues sorted descending; `frame` holds the matching eigenvectors as
/// columns (row-major storage).
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: EigenTuple,
    pub frame: Vec<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `Q·diag(d)·Qᵀ`.
    pub fn compose(&self, d: &[f64]) -> SymMatrix {
        let n = self.dim();
        let q = &self.frame;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..n).map(|k| q[i * n + k] * d[k] * q[j * n + k]).sum();
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        SymMatrix { dim: n, entries: out }
    }

    /// Largest eigenvalue magnitude.
    pub fn spectral_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops to
/// `1e-13·‖M‖_F`.
pub fn eigen_sym(m: &SymMatrix) -> Result<EigenDecomposition> {
    let n = m.dim;
    let mut a = m.entries.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let target = JACOBI_REL_TOL * m.frobenius();
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off(&a) <= target;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::Numerical(format!(
                "Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps (off-diagonal {:.3e})",
                off(&a)
            )));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta.is_infinite() { 0.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                a[p * n + p] -= t * apq;
                a[q * n + q] += t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = a[r * n + p];
                        let arq = a[r * n + q];
                        let np = c * arp - s * arq;
                        let nq = s * arp + c * arq;
                        a[r * n + p] = np;
                        a[p * n + r] = np;
                        a[r * n + q] = nq;
                        a[q * n + r] = nq;
                    }
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = c * vrp - s * vrq;
                    v[r * n + q] = s * vrp + c * vrq;
                }
            }
        }
        converged = off(&a) <= target;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut frame = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        for r in 0..n {
            frame[r * n + col] = v[r * n + src];
        }
    }
    Ok(EigenDecomposition {
        values: EigenTuple::new(values)?,
        frame,
    })
}

/// `U[H] = tr(H)·I − H`.
pub fn u_operator(h: &SymMatrix) -> SymMatrix {
    let tr = h.trace();
    let n = h.dim;
    let mut e: Vec<f64> = h.entries.iter().map(|v| -v).collect();
    for i in 0..n {
        e[i * n + i] += tr;
    }
    SymMatrix { dim: n, entries: e }
}

/// Whether `F_value` returns `S_k(η)` or its `k`-th root.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FMode {
    Raw,
    Normalized,
}

fn check_dim(h: &SymMatrix, params: &SumHessianParams) -> Result<()> {
    if h.dim != params.n {
        return Err(Error::Argument(format!(
            "matrix dimension {} does not match n = {}",
            h.dim, params.n
        )));
    }
    Ok(())
}

/// `S_k(η(λ(H)))`, or `S_k^{1/k}` in normalized mode.
pub fn f_value(h: &SymMatrix, params: &SumHessianParams, mode: FMode) -> Result<f64> {
    check_dim(h, params)?;
    let dec = eigen_sym(h)?;
    let s = sum_hessian(&eta(&dec.values), params);
    match mode {
        FMode::Raw => Ok(s),
        FMode::Normalized => {
            if s <= 0.0 {
                return Err(Error::Domain(format!("S_k(eta) = {s} is not positive")));
            }
            Ok(s.powf(1.0 / params.k as f64))
        }
    }
}

/// λ-space gradient of `f(λ) = S_k(η(λ))`: `t_i = Σ_j ∂S_k/∂η_j − ∂S_k/∂η_i`.
pub fn lambda_gradient(lambda: &[f64], params: &SumHessianParams) -> Vec<f64> {
    let partials = d_sum_hessian(&eta(lambda), params);
    t_from_eta_partials(&partials)
}

fn t_from_eta_partials(partials: &[f64]) -> Vec<f64> {
    let total: f64 = partials.iter().sum();
    partials.iter().map(|p| total - p).collect()
}

/// λ-space Hessian of `f(λ) = S_k(η(λ))`, row-major. With `J = 11ᵀ − I` this is
/// `J·M·J` for the η-side Hessian `M`.
pub fn lambda_hessian(lambda: &[f64], params: &SumHessianParams) -> Vec<f64> {
    let n = lambda.len();
    let m = d2_sum_hessian(&eta(lambda), params);
    let rows: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m[i * n + j]).sum()).collect();
    let total: f64 = rows.iter().sum();
    let mut out = vec![0.0; n * n];
    for p in 0..n {
        for q in 0..n {
            out[p * n + q] = total - rows[p] - rows[q] + m[p * n + q];
        }
    }
    out
}

/// First-order data of `H ↦ S_k(η(λ(H)))` at one matrix.
#[derive(Debug, Clone)]
pub struct SpectralDerivative {
    pub decomposition: EigenDecomposition,
    pub eta: Vec<f64>,
    /// `∂S_k/∂η_i` in eigenvalue order.
    pub eta_partials: Vec<f64>,
    /// `t_i = Σ_j ∂S_k/∂η_j − ∂S_k/∂η_i` in eigenvalue order.
    pub t: Vec<f64>,
    /// `S_k(η)`.
    pub value: f64,
}

impl SpectralDerivative {
    /// The matrix derivative `Q·diag(t)·Qᵀ`.
    pub fn matrix(&self) -> SymMatrix {
        self.decomposition.compose(&self.t)
    }
}

pub fn spectral_derivative(h: &SymMatrix, params: &SumHessianParams) -> Result<SpectralDerivative> {
    check_dim(h, params)?;
    let decomposition = eigen_sym(h)?;
    let eta = eta(&decomposition.values);
    let eta_partials = d_sum_hessian(&eta, params);
    let t = t_from_eta_partials(&eta_partials);
    let value = sum_hessian(&eta, params);
    Ok(SpectralDerivative {
        decomposition,
        eta,
        eta_partials,
        t,
        value,
    })
}

/// Matrix derivative of `H ↦ S_k(η(λ(H)))`. Entry `(i, j)` is the partial with
/// respect to `h_ij` with `h_ji` held equal, halved off the diagonal, so that
/// `Σ_ij dF_ij·A_ij` is the directional derivative along a symmetric `A`.
pub fn d_f(h: &SymMatrix, params: &SumHessianParams) -> Result<SymMatrix> {
    Ok(spectral_derivative(h, params)?.matrix())
}

/// The coefficients `T^{ii}` in eigenvalue order.
pub fn t_coefficients(h: &SymMatrix, params: &SumHessianParams) -> Result<Vec<f64>> {
    Ok(spectral_derivative(h, params)?.t)
}

/// Second directional derivative `d²/ds² S_k(η(λ(H + sA)))` at `s = 0`,
/// from the eigenvalue Hessian plus the divided-difference term.
pub fn d2_f_quadratic(h: &SymMatrix, a: &SymMatrix, params: &SumHessianParams) -> Result<f64> {
    check_dim(h, params)?;
    if a.dim != h.dim {
        return Err(Error::Argument("direction has the wrong dimension".into()));
    }
    let dec = eigen_sym(h)?;
    let lambda = dec.values.values();
    let n = lambda.len();
    let grad = lambda_gradient(lambda, params);
    let hess = lambda_hessian(lambda, params);
    let at = a.congruence(&dec.frame);

    let mut diag_term = 0.0;
    for p in 0..n {
        for q in 0..n {
            diag_term += hess[p * n + q] * at.get(p, p) * at.get(q, q);
        }
    }

    let gap_tol = DEGENERATE_GAP * dec.spectral_norm().max(1.0);
    let mut off_term = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            let apq = at.get(p, q);
            if apq == 0.0 {
                continue;
            }
            let gap = lambda[p] - lambda[q];
            let dd = if gap.abs() < gap_tol {
                hess[p * n + p] - hess[p * n + q]
            } else {
                (grad[p] - grad[q]) / gap
            };
            off_term += 2.0 * dd * apq * apq;
        }
    }
    Ok(diag_term + off_term)
}

/// Second directional derivative of `H ↦ S_k^{1/k}(η(λ(H)))` along `A`.
pub fn normalized_d2(h: &SymMatrix, a: &SymMatrix, params: &SumHessianParams) -> Result<f64> {
    let der = spectral_derivative(h, params)?;
    let f = der.value;
    if f <= 0.0 {
        return Err(Error::Domain(format!("S_k(eta) = {f} is not positive")));
    }
    let df = der.matrix();
    let first: f64 = df.entries.iter().zip(&a.entries).map(|(x, y)| x * y).sum();
    let second = d2_f_quadratic(h, a, params)?;
    let r = 1.0 / params.k as f64;
    Ok(r * f.powf(r - 1.0) * second + r * (r - 1.0) * f.powf(r - 2.0) * first * first)
}
