//! Gårding-type cones and the λ → η transform.
//!
//! All membership tests use strict inequalities with zero slack: the cones are
//! open and boundary points are rejected.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::symfun::{sigma_all, EigenTuple, SumHessianParams};

/// Draw budget for the rejection sampler.
pub const SAMPLE_DRAW_BUDGET: u64 = 10_000_000;
/// Acceptance rate below which a cone is reported as practically empty.
pub const MIN_ACCEPTANCE_RATE: f64 = 1e-4;
const SAMPLE_BOX: (f64, f64) = (-1.0, 3.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConeId {
    /// `Γ_k`: `σ_1, …, σ_k > 0`.
    GammaK,
    /// `Γ̃_k = Γ_{k-1} ∩ {S_k > 0}`.
    GammaTildeK,
    /// `Γ'_k`: `η ∈ Γ_k`.
    GammaPrimeK,
    /// `Γ̃'_k`: `η ∈ Γ̃_k`.
    GammaTildePrimeK,
}

impl ConeId {
    pub const ALL: [ConeId; 4] = [
        ConeId::GammaK,
        ConeId::GammaTildeK,
        ConeId::GammaPrimeK,
        ConeId::GammaTildePrimeK,
    ];

    pub fn contains(&self, lambda: &[f64], params: &SumHessianParams) -> bool {
        match self {
            ConeId::GammaK => in_gamma(lambda, params.k),
            ConeId::GammaTildeK => in_gamma_tilde(lambda, params),
            ConeId::GammaPrimeK => in_gamma_prime(lambda, params, PrimeVariant::AdmissibleK),
            ConeId::GammaTildePrimeK => in_gamma_prime(lambda, params, PrimeVariant::TildeK),
        }
    }
}

impl fmt::Display for ConeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConeId::GammaK => "GAMMA_K",
            ConeId::GammaTildeK => "GAMMA_TILDE_K",
            ConeId::GammaPrimeK => "GAMMA_PRIME_K",
            ConeId::GammaTildePrimeK => "GAMMA_TILDE_PRIME_K",
        };
        f.write_str(s)
    }
}

impl FromStr for ConeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "GAMMA_K" => Ok(ConeId::GammaK),
            "GAMMA_TILDE_K" => Ok(ConeId::GammaTildeK),
            "GAMMA_PRIME_K" => Ok(ConeId::GammaPrimeK),
            "GAMMA_TILDE_PRIME_K" => Ok(ConeId::GammaTildePrimeK),
            _ => Err(Error::Argument(format!("unknown cone `{s}`"))),
        }
    }
}

/// Which η-side cone a primed membership test uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimeVariant {
    AdmissibleK,
    TildeK,
}

/// `η_i = σ_1(λ) − λ_i`. The order of `λ` is kept, so a descending `λ` gives
/// an ascending `η`.
pub fn eta(lambda: &[f64]) -> Vec<f64> {
    let s: f64 = lambda.iter().sum();
    lambda.iter().map(|&l| s - l).collect()
}

pub fn eta_tuple(lambda: &EigenTuple) -> EigenTuple {
    EigenTuple::new(eta(lambda)).expect("same length")
}

/// `σ_j(λ) > 0` for all `j = 1..=m`. `m = 0` is vacuous.
pub fn in_gamma(lambda: &[f64], m: usize) -> bool {
    if m == 0 {
        return true;
    }
    if m > lambda.len() {
        return false;
    }
    sigma_all(lambda, m)[1..].iter().all(|&s| s > 0.0)
}

/// `λ ∈ Γ_{k-1}` and `S_k(λ) > 0`.
pub fn in_gamma_tilde(lambda: &[f64], params: &SumHessianParams) -> bool {
    let k = params.k;
    if k > lambda.len() {
        return false;
    }
    let e = sigma_all(lambda, k);
    if !e[1..k].iter().all(|&s| s > 0.0) {
        return false;
    }
    e[k] + params.alpha * e[k - 1] > 0.0
}

/// Membership of `η(λ)` in `Γ_k` or `Γ̃_k`.
pub fn in_gamma_prime(lambda: &[f64], params: &SumHessianParams, variant: PrimeVariant) -> bool {
    let e = eta(lambda);
    match variant {
        PrimeVariant::AdmissibleK => in_gamma(&e, params.k),
        PrimeVariant::TildeK => in_gamma_tilde(&e, params),
    }
}

/// Seeded batch of cone points.
#[derive(Debug, Clone)]
pub struct ConeSampleBatch {
    pub samples: Vec<EigenTuple>,
    pub cone_id: ConeId,
    pub params: SumHessianParams,
    pub seed: u64,
}

impl ConeSampleBatch {
    /// CSV with one row per sample: `lambda1..lambdan,cone_id,n,k,alpha`.
    pub fn to_csv(&self) -> String {
        let n = self.params.n;
        let mut out = String::new();
        let header: Vec<String> = (1..=n).map(|i| format!("lambda{i}")).collect();
        out.push_str(&header.join(","));
        out.push_str(",cone_id,n,k,alpha\n");
        for s in &self.samples {
            let cols: Vec<String> = s.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&cols.join(","));
            out.push_str(&format!(
                ",{},{},{},{:?}\n",
                self.cone_id, n, self.params.k, self.params.alpha
            ));
        }
        out
    }
}

/// Rejection sampling from the box `[-1, 3]ⁿ`. Sample 0 is always the interior
/// point `(1, …, 1)`.
pub fn sample_cone(
    cone_id: ConeId,
    params: &SumHessianParams,
    count: usize,
    seed: u64,
) -> Result<ConeSampleBatch> {
    sample_cone_with_budget(cone_id, params, count, seed, SAMPLE_DRAW_BUDGET)
}

pub fn sample_cone_with_budget(
    cone_id: ConeId,
    params: &SumHessianParams,
    count: usize,
    seed: u64,
    budget: u64,
) -> Result<ConeSampleBatch> {
    if count == 0 {
        return Err(Error::Argument("sample count must be >= 1".into()));
    }
    let n = params.n;
    let mut samples = Vec::with_capacity(count);
    samples.push(EigenTuple::constant(n, 1.0)?);
    debug_assert!(cone_id.contains(&samples[0], params));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = 0u64;
    let mut point = vec![0.0; n];
    while samples.len() < count {
        if draws >= budget {
            let rate = (samples.len() - 1) as f64 / draws.max(1) as f64;
            return Err(Error::SamplingExhausted {
                requested: count,
                accepted: samples.len(),
                draws,
                rate,
            });
        }
        draws += 1;
        for v in point.iter_mut() {
            *v = rng.gen_range(SAMPLE_BOX.0..SAMPLE_BOX.1);
        }
        if cone_id.contains(&point, params) {
            samples.push(EigenTuple::new(point.clone())?);
        }
        // Bail early once the observed rate is hopeless for the remaining budget.
        if draws.is_multiple_of(1_000_000) {
            let rate = (samples.len() - 1) as f64 / draws as f64;
            if rate < MIN_ACCEPTANCE_RATE {
                return Err(Error::SamplingExhausted {
                    requested: count,
                    accepted: samples.len(),
                    draws,
                    rate,
                });
            }
        }
    }
    Ok(ConeSampleBatch {
        samples,
        cone_id,
        params: *params,
        seed,
    })
}
