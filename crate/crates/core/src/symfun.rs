//! Elementary symmetric polynomials and the sum Hessian function
//! `S_k(λ) = σ_k(λ) + α σ_{k-1}(λ)`.
//!
//! Every evaluation goes through the product recurrence on the coefficients of
//! `∏ (t + λ_i)`; deleted-variable forms re-run the recurrence on the shortened
//! tuple instead of dividing out a factor.

use std::ops::Deref;

use crate::error::{Error, Result};

/// A point `λ ∈ ℝⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenTuple(Vec<f64>);

impl EigenTuple {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Argument(format!(
                "tuple needs at least 2 entries, got {}",
                values.len()
            )));
        }
        Ok(EigenTuple(values))
    }

    /// Constant tuple `(c, …, c)`.
    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Copy sorted descending (`λ₁ ≥ … ≥ λₙ`).
    pub fn sorted_descending(&self) -> Self {
        let mut v = self.0.clone();
        v.sort_by(|a, b| b.total_cmp(a));
        EigenTuple(v)
    }
}

impl Deref for EigenTuple {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for EigenTuple {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// `(n, k, α)` of one sum Hessian operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumHessianParams {
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
}

impl SumHessianParams {
    pub fn new(n: usize, k: usize, alpha: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Argument(format!("n must be >= 2, got {n}")));
        }
        if k < 1 || k > n {
            return Err(Error::Argument(format!("k must satisfy 1 <= k <= n, got k={k}, n={n}")));
        }
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::Argument(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        Ok(SumHessianParams { n, k, alpha })
    }

    pub fn k_i64(&self) -> i64 {
        self.k as i64
    }
}

/// All of `σ_0, …, σ_{max_m}` of `lambda` in one pass.
pub fn sigma_all(lambda: &[f64], max_m: usize) -> Vec<f64> {
    let top = max_m.min(lambda.len());
    let mut e = vec![0.0; max_m + 1];
    e[0] = 1.0;
    for (i, &x) in lambda.iter().enumerate() {
        let hi = (i + 1).min(top);
        for j in (1..=hi).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e
}

/// `σ_m(λ)`, with `σ_0 = 1` and `σ_m = 0` for `m < 0` or `m > n`.
pub fn sigma(lambda: &[f64], m: i64) -> f64 {
    if m < 0 || m as usize > lambda.len() {
        return 0.0;
    }
    if m == 0 {
        return 1.0;
    }
    sigma_all(lambda, m as usize)[m as usize]
}

fn check_deleted(n: usize, deleted: &[usize]) -> Result<()> {
    if deleted.is_empty() || deleted.len() > 2 {
        return Err(Error::Argument(format!(
            "expected 1 or 2 deleted indices, got {}",
            deleted.len()
        )));
    }
    for &d in deleted {
        if d >= n {
            return Err(Error::Argument(format!("deleted index {d} out of range for n = {n}")));
        }
    }
    if deleted.len() == 2 && deleted[0] == deleted[1] {
        return Err(Error::Argument(format!("duplicate deleted index {}", deleted[0])));
    }
    Ok(())
}

/// The tuple with the given (0-based) coordinates removed.
pub fn delete(lambda: &[f64], deleted: &[usize]) -> Result<Vec<f64>> {
    check_deleted(lambda.len(), deleted)?;
    Ok(lambda
        .iter()
        .enumerate()
        .filter(|(i, _)| !deleted.contains(i))
        .map(|(_, &x)| x)
        .collect())
}

/// `σ_m(λ | deleted)` for one or two 0-based deleted indices.
pub fn sigma_deleted(lambda: &[f64], m: i64, deleted: &[usize]) -> Result<f64> {
    let sub = delete(lambda, deleted)?;
    Ok(sigma(&sub, m))
}

/// `S_m(λ) = σ_m(λ) + α σ_{m-1}(λ)` for arbitrary `m`.
pub fn s_m(lambda: &[f64], m: i64, alpha: f64) -> f64 {
    sigma(lambda, m) + alpha * sigma(lambda, m - 1)
}

/// `S_k(λ)` for the operator described by `params`.
pub fn sum_hessian(lambda: &[f64], params: &SumHessianParams) -> f64 {
    s_m(lambda, params.k_i64(), params.alpha)
}

/// Gradient of `S_k`: component `p` is `S_{k-1}(λ|p)`.
pub fn d_sum_hessian(lambda: &[f64], params: &SumHessianParams) -> Vec<f64> {
    let k = params.k_i64();
    (0..lambda.len())
        .map(|p| {
            let sub = delete(lambda, &[p]).expect("index in range");
            s_m(&sub, k - 1, params.alpha)
        })
        .collect()
}

/// Hessian of `S_k` in λ-space, row-major `n × n`. Off-diagonal entries are
/// `S_{k-2}(λ|pq)`; the diagonal vanishes because `S_k` is affine in each
/// coordinate.
pub fn d2_sum_hessian(lambda: &[f64], params: &SumHessianParams) -> Vec<f64> {
    let n = lambda.len();
    let k = params.k_i64();
    let mut out = vec![0.0; n * n];
    for p in 0..n {
        for q in (p + 1)..n {
            let sub = delete(lambda, &[p, q]).expect("indices in range");
            let v = s_m(&sub, k - 2, params.alpha);
            out[p * n + q] = v;
            out[q * n + p] = v;
        }
    }
    out
}

/// Binomial coefficient as a float.
pub fn binomial(n: usize, m: usize) -> f64 {
    if m > n {
        return 0.0;
    }
    let m = m.min(n - m);
    (0..m).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Newton–Maclaurin chain `((σ_m / C(n,m))^{1/m})_{m=1..n}`.
///
/// Requires every `σ_m(λ) > 0`; otherwise the root is not real and a domain
/// error is returned.
pub fn maclaurin_chain(lambda: &[f64]) -> Result<Vec<f64>> {
    let n = lambda.len();
    let e = sigma_all(lambda, n);
    (1..=n)
        .map(|m| {
            if e[m] <= 0.0 {
                return Err(Error::Domain(format!("sigma_{m} = {} is not positive", e[m])));
            }
            Ok((e[m] / binomial(n, m)).powf(1.0 / m as f64))
        })
        .collect()
}

/// Chain `(S_m^{1/m}(λ))_{m=1..k}` for the α of `params`.
pub fn s_chain(lambda: &[f64], params: &SumHessianParams) -> Result<Vec<f64>> {
    let e = sigma_all(lambda, params.k);
    (1..=params.k)
        .map(|m| {
            let s = e[m] + params.alpha * e[m - 1];
            if s <= 0.0 {
                return Err(Error::Domain(format!("S_{m} = {s} is not positive")));
            }
            Ok(s.powf(1.0 / m as f64))
        })
        .collect()
}
