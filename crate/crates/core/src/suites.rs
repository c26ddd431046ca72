//! Randomized property suites over the symmetric-function, cone and spectral
//! layers. Each suite reports its check count, failures and, where the
//! property involves an unknown positive constant, the empirical minimum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cones::{eta, sample_cone, ConeId};
use crate::error::Result;
use crate::spectral::{d2_f_quadratic, d_f, eigen_sym, f_value, lambda_gradient, lambda_hessian, normalized_d2, FMode, SymMatrix};
use crate::symfun::{
    binomial, d2_sum_hessian, d_sum_hessian, delete, maclaurin_chain, s_chain, s_m, sigma, sum_hessian, SumHessianParams,
};

/// Tolerances of every suite. Comparisons are relative:
/// `|a − b| ≤ tol·max(1, |a|, |b|)` unless a field says otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub identity: f64,
    /// `S_k² − S_{k−1}S_{k+1} ≥ −tol·max(1, S_k²)`.
    pub newton: f64,
    /// Absolute slack on the root-gradient lower bound.
    pub root_gradient: f64,
    pub gradient_fd: f64,
    pub hessian_fd: f64,
    pub fd_step: f64,
    /// Absolute slack on the λ-space concavity bound.
    pub lambda_concavity: f64,
    /// Absolute slack on the η-side concavity bound and the matrix form.
    pub eta_concavity: f64,
    pub ordering: f64,
    /// Empirical constants must exceed this.
    pub constant_floor: f64,
    /// Entrywise, relative to `max(1, max |dF_ij|)`.
    pub df_fd: f64,
    pub df_step: f64,
    /// Relative to `max(1, |value|)`.
    pub d2f_fd: f64,
    pub d2f_step: f64,
    pub frame_invariance: f64,
    pub composition: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: 1e-10,
            newton: 1e-12,
            root_gradient: 1e-10,
            gradient_fd: 1e-6,
            hessian_fd: 1e-5,
            fd_step: 1e-6,
            lambda_concavity: 1e-9,
            eta_concavity: 1e-8,
            ordering: 1e-10,
            constant_floor: 1e-8,
            df_fd: 1e-6,
            df_step: 1e-5,
            d2f_fd: 1e-4,
            d2f_step: 1e-3,
            frame_invariance: 1e-10,
            composition: 1e-12,
        }
    }
}

/// Outcome of one suite on one `(n, k, α)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub params: SumHessianParams,
    pub checked: usize,
    pub failures: usize,
    /// Largest `error / allowed` seen; below 1 means every check passed.
    pub worst: f64,
    /// Empirical lower bound of the suite's constant, if any.
    pub constant: Option<f64>,
    pub first_failure: Option<String>,
}

impl SuiteOutcome {
    fn new(name: &'static str, params: SumHessianParams) -> Self {
        SuiteOutcome {
            name,
            params,
            checked: 0,
            failures: 0,
            worst: 0.0,
            constant: None,
            first_failure: None,
        }
    }

    /// Records `err ≤ allowed`.
    fn check(&mut self, err: f64, allowed: f64, what: impl FnOnce() -> String) {
        self.checked += 1;
        let ratio = if err.is_nan() { f64::INFINITY } else { err / allowed };
        self.worst = self.worst.max(ratio);
        if !(err <= allowed) {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(what());
            }
        }
    }

    fn close(&mut self, a: f64, b: f64, tol: f64, what: impl FnOnce() -> String) {
        self.check((a - b).abs(), tol * 1f64.max(a.abs()).max(b.abs()), what);
    }

    fn observe_constant(&mut self, v: f64) {
        self.constant = Some(self.constant.map_or(v, |c: f64| c.min(v)));
    }

    fn finish_constant(&mut self, floor: f64) {
        if let Some(c) = self.constant {
            self.check(floor, c, || format!("empirical constant {c:e} not above {floor:e}"));
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    /// One human-readable line.
    pub fn line(&self) -> String {
        let p = &self.params;
        let c = self.constant.map_or(String::new(), |c| format!(" constant={c:.6e}"));
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let fail = self.first_failure.as_deref().map_or(String::new(), |f| format!(" first failure: {f}"));
        format!(
            "{status} {} n={} k={} alpha={} checks={} failures={} worst={:.3e}{c}{fail}",
            self.name, p.n, p.k, p.alpha, self.checked, self.failures, self.worst
        )
    }
}

fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn quad(m: &[f64], xi: &[f64]) -> f64 {
    let n = xi.len();
    (0..n).map(|p| (0..n).map(|q| m[p * n + q] * xi[p] * xi[q]).sum::<f64>()).sum()
}

fn deleted_s(lambda: &[f64], m: i64, alpha: f64, idx: &[usize]) -> Result<f64> {
    Ok(s_m(&delete(lambda, idx)?, m, alpha))
}

fn sorted_desc(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Checks `v` non-increasing with relative slack.
fn non_increasing(out: &mut SuiteOutcome, v: &[f64], tol: f64, label: &str) {
    for i in 1..v.len() {
        let scale = 1f64.max(v[i - 1].abs()).max(v[i].abs());
        out.check((v[i] - v[i - 1]).max(0.0), tol * scale, || format!("{label}: {v:?}"));
    }
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
    let mut e = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = rng.gen_range(-1.0..1.0);
            e[i * n + j] = v;
            e[j * n + i] = v;
        }
    }
    SymMatrix::new(n, e).expect("symmetric by construction")
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Result<Vec<f64>> {
    Ok(eigen_sym(&random_symmetric(rng, n))?.frame)
}

/// `Q·diag(λ)·Qᵀ`.
fn with_spectrum(q: &[f64], lambda: &[f64]) -> Result<SymMatrix> {
    let n = lambda.len();
    SymMatrix::from_fn(n, |i, j| (0..n).map(|p| q[i * n + p] * lambda[p] * q[j * n + p]).sum())
}

/// Algebraic identities on uniform draws from `[−2, 2]ⁿ`.
pub fn identity_suites(p: &SumHessianParams, count: usize, seed: u64, tol: &Tolerances) -> Result<Vec<SuiteOutcome>> {
    let (n, k, a) = (p.n, p.k_i64(), p.alpha);
    let mut rng = rng_for(seed, 1);
    let mut expansion = SuiteOutcome::new("deleted_variable_expansion", *p);
    let mut deleted_sum = SuiteOutcome::new("deleted_sum", *p);
    let mut euler = SuiteOutcome::new("euler_identity", *p);
    let mut gradient = SuiteOutcome::new("gradient_formula", *p);
    let mut hessian = SuiteOutcome::new("hessian_formula", *p);
    let h = tol.fd_step;
    for _ in 0..count {
        let l = uniform(&mut rng, n, -2.0, 2.0);
        let s = sum_hessian(&l, p);
        let ds = d_sum_hessian(&l, p);
        let d2s = d2_sum_hessian(&l, p);
        let mut total = 0.0;
        for i in 0..n {
            let rest = deleted_s(&l, k, a, &[i])?;
            total += rest;
            let lower = deleted_s(&l, k - 1, a, &[i])?;
            expansion.close(s, l[i] * lower + rest, tol.identity, || format!("lambda={l:?} i={i}"));
            gradient.close(ds[i], lower, tol.identity, || format!("formula lambda={l:?} p={i}"));
            let mut up = l.clone();
            let mut dn = l.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (sum_hessian(&up, p) - sum_hessian(&dn, p)) / (2.0 * h);
            gradient.close(ds[i], fd, tol.gradient_fd, || format!("fd lambda={l:?} p={i}"));
            let (gu, gd) = (d_sum_hessian(&up, p), d_sum_hessian(&dn, p));
            for j in 0..n {
                let exact = if i == j { 0.0 } else { deleted_s(&l, k - 2, a, &[i, j])? };
                hessian.close(d2s[i * n + j], exact, tol.identity, || format!("formula lambda={l:?} ({i},{j})"));
                let fd = (gu[j] - gd[j]) / (2.0 * h);
                hessian.close(d2s[i * n + j], fd, tol.hessian_fd, || format!("fd lambda={l:?} ({i},{j})"));
            }
        }
        let s_km1 = sigma(&l, k - 1);
        deleted_sum.close(total, (n as f64 - k as f64) * s + a * s_km1, tol.identity, || format!("lambda={l:?}"));
        let lhs: f64 = (0..n).map(|i| l[i] * ds[i]).sum();
        euler.close(lhs, k as f64 * s - a * s_km1, tol.identity, || format!("lambda={l:?}"));
    }
    Ok(vec![expansion, deleted_sum, euler, gradient, hessian])
}

/// Inequalities, cone structure and the η-side inequalities on cone samples.
pub fn inequality_suites(p: &SumHessianParams, count: usize, seed: u64, tol: &Tolerances) -> Result<Vec<SuiteOutcome>> {
    let (n, k, a) = (p.n, p.k, p.alpha);
    let ki = k as i64;
    let mut out = Vec::new();
    let mut rng = rng_for(seed, 2);

    let mut newton = SuiteOutcome::new("newton_inequality", *p);
    for _ in 0..count {
        let l = uniform(&mut rng, n, -2.0, 2.0);
        let sk = s_m(&l, ki, a);
        let gap = sk * sk - s_m(&l, ki - 1, a) * s_m(&l, ki + 1, a);
        newton.check((-gap).max(0.0), tol.newton * 1f64.max(sk * sk), || format!("lambda={l:?} gap={gap:e}"));
    }
    out.push(newton);

    let gamma = sample_cone(ConeId::GammaK, p, count, seed)?;
    let mut root = SuiteOutcome::new("root_gradient_sum", *p);
    let bound = binomial(n, k).powf(1.0 / k as f64);
    for l in &gamma.samples {
        let sk = sigma(l, ki);
        let deleted: f64 = (0..n).map(|i| sigma(&delete(l, &[i]).expect("valid index"), ki - 1)).sum();
        let total = sk.powf(1.0 / k as f64 - 1.0) * deleted / k as f64;
        root.check((bound - total).max(0.0), tol.root_gradient, || format!("lambda={l:?} sum={total}"));
    }
    out.push(root);

    let full = SumHessianParams::new(n, n, a)?;
    let gamma_n = sample_cone(ConeId::GammaK, &full, count, seed)?;
    let mut maclaurin = SuiteOutcome::new("maclaurin_chain", *p);
    for l in &gamma_n.samples {
        non_increasing(&mut maclaurin, &maclaurin_chain(l)?, tol.ordering, "chain");
    }
    out.push(maclaurin);

    let tilde = sample_cone(ConeId::GammaTildeK, p, count, seed)?;
    let mut nesting = SuiteOutcome::new("cone_nesting_convexity", *p);
    let prev = (k >= 2).then(|| SumHessianParams::new(n, k - 1, a)).transpose()?;
    let scales: &[f64] = if a == 0.0 { &[0.5, 2.0] } else { &[0.5] };
    let mut pair_rng = rng_for(seed, 3);
    for l in &tilde.samples {
        if let Some(q) = &prev {
            let ok = ConeId::GammaTildeK.contains(l, q);
            nesting.check(if ok { 0.0 } else { 1.0 }, 0.5, || format!("not in the k-1 cone: {l:?}"));
        }
        for &t in scales {
            let scaled: Vec<f64> = l.iter().map(|v| t * v).collect();
            let ok = ConeId::GammaTildeK.contains(&scaled, p);
            nesting.check(if ok { 0.0 } else { 1.0 }, 0.5, || format!("scaling by {t} leaves the cone: {l:?}"));
        }
    }
    for _ in 0..count.min(500) {
        let i = pair_rng.gen_range(0..tilde.samples.len());
        let j = pair_rng.gen_range(0..tilde.samples.len());
        let mid: Vec<f64> = tilde.samples[i].iter().zip(tilde.samples[j].iter()).map(|(x, y)| 0.5 * (x + y)).collect();
        let ok = ConeId::GammaTildeK.contains(&mid, p);
        nesting.check(if ok { 0.0 } else { 1.0 }, 0.5, || format!("midpoint {mid:?} leaves the cone"));
    }
    out.push(nesting);

    if k >= 2 {
        let mut ordering = SuiteOutcome::new("deleted_ordering", *p);
        for l in &tilde.samples {
            let l = sorted_desc(l);
            ordering.check(0f64.max(-l[k - 2]), 0.0, || format!("lambda_(k-1) not positive: {l:?}"));
            let d: Vec<f64> = (0..n).map(|i| deleted_s(&l, ki - 1, a, &[i])).collect::<Result<_>>()?;
            non_increasing(&mut ordering, &d.iter().rev().copied().collect::<Vec<_>>(), tol.ordering, "deleted values");
            ordering.check(0f64.max(-d[0]), 0.0, || format!("S_(k-1)(lambda|1) not positive: {l:?}"));
            ordering.observe_constant(d[k - 1] / s_m(&l, ki - 1, a));
        }
        ordering.finish_constant(tol.constant_floor);
        out.push(ordering);
    }

    if n >= 3 {
        let mut chain = SuiteOutcome::new("s_chain", *p);
        for l in &tilde.samples {
            non_increasing(&mut chain, &s_chain(l, p)?, tol.ordering, "chain");
        }
        out.push(chain);
    }

    let mut concave = SuiteOutcome::new("lambda_concavity", *p);
    let mut xi_rng = rng_for(seed, 4);
    for l in &tilde.samples {
        let xi = uniform(&mut xi_rng, n, -1.0, 1.0);
        let lhs = quad(&d2_sum_hessian(l, p), &xi);
        let g = dot(&d_sum_hessian(l, p), &xi);
        let rhs = (1.0 - 1.0 / k as f64) * g * g / sum_hessian(l, p);
        concave.check(lhs - rhs, tol.lambda_concavity, || format!("lambda={l:?} xi={xi:?}"));
    }
    out.push(concave);

    out.extend(eta_suites(p, count, seed, tol)?);
    Ok(out)
}

fn eta_suites(p: &SumHessianParams, count: usize, seed: u64, tol: &Tolerances) -> Result<Vec<SuiteOutcome>> {
    let (n, k, a) = (p.n, p.k, p.alpha);
    let ki = k as i64;
    let batch = sample_cone(ConeId::GammaTildePrimeK, p, count, seed)?;
    let mut rng = rng_for(seed, 5);
    let mut concave = SuiteOutcome::new("eta_concavity", *p);
    let mut matrix = SuiteOutcome::new("matrix_concavity", *p);
    let mut order = SuiteOutcome::new("eta_order", *p);
    let mut theta = SuiteOutcome::new("eta_deleted_share", *p);
    let mut eta_partials = SuiteOutcome::new("eta_partials_order", *p);
    let mut lambda_partials = SuiteOutcome::new("lambda_partials_order", *p);
    let mut root_partials = SuiteOutcome::new("root_partials_order", *p);
    let mut share = SuiteOutcome::new("partial_share", *p);
    let mut growth = SuiteOutcome::new("gradient_sum_growth", *p);
    let inner = 0 < k && k < n;
    for l in &batch.samples {
        let l = sorted_desc(l);
        let e = eta(&l);
        let f = sum_hessian(&e, p);

        let xi = uniform(&mut rng, n, -1.0, 1.0);
        let grad = lambda_gradient(&l, p);
        let g = dot(&grad, &xi);
        let lhs = quad(&lambda_hessian(&l, p), &xi);
        concave.check(lhs - (1.0 - 1.0 / k as f64) * g * g / f, tol.eta_concavity, || format!("lambda={l:?}"));

        let q = random_orthogonal(&mut rng, n)?;
        let hm = with_spectrum(&q, &l)?;
        let dir = random_symmetric(&mut rng, n);
        let d2 = normalized_d2(&hm, &dir, p)?;
        matrix.check(d2, tol.eta_concavity, || format!("lambda={l:?} d2={d2:e}"));

        non_increasing(&mut order, &e.iter().rev().copied().collect::<Vec<_>>(), tol.ordering, "eta");
        if k >= 2 {
            order.check(0f64.max(-e[n - k + 1]), 0.0, || format!("eta_(n-k+2) not positive: {e:?}"));
        }

        non_increasing(&mut eta_partials, &d_sum_hessian(&e, p), tol.ordering, "eta partials");
        non_increasing(&mut lambda_partials, &grad.iter().rev().copied().collect::<Vec<_>>(), tol.ordering, "lambda partials");
        let factor = f.powf(1.0 / k as f64 - 1.0) / k as f64;
        let root: Vec<f64> = grad.iter().map(|v| factor * v).rev().collect();
        non_increasing(&mut root_partials, &root, tol.ordering, "root partials");

        let total: f64 = grad.iter().sum();
        if inner {
            theta.observe_constant(deleted_s(&e, ki - 1, a, &[n - k])? / s_m(&e, ki - 1, a));
            share.observe_constant(grad.iter().copied().fold(f64::INFINITY, f64::min) / total);
        }
        growth.observe_constant(total / f.powf(1.0 - 1.0 / k as f64));
    }
    let mut out = vec![concave, matrix, order];
    if inner {
        theta.finish_constant(tol.constant_floor);
        share.finish_constant(tol.constant_floor);
        out.push(theta);
    }
    out.push(eta_partials);
    out.push(lambda_partials);
    out.push(root_partials);
    if inner {
        out.push(share);
    }
    growth.finish_constant(tol.constant_floor);
    out.push(growth);
    Ok(out)
}

/// Central differences at steps `h` and `h/2` combined to cancel the `h²` term.
fn richardson(h: f64, d: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    Ok((4.0 * d(0.5 * h)? - d(h)?) / 3.0)
}

/// Matrix derivative checks on random symmetric matrices, with every fourth
/// sample given a repeated eigenvalue.
pub fn spectral_suites(p: &SumHessianParams, count: usize, seed: u64, tol: &Tolerances) -> Result<Vec<SuiteOutcome>> {
    let n = p.n;
    let mut rng = rng_for(seed, 6);
    let mut df = SuiteOutcome::new("df_finite_difference", *p);
    let mut d2f = SuiteOutcome::new("d2f_finite_difference", *p);
    let mut frame = SuiteOutcome::new("frame_invariance", *p);
    let mut comp = SuiteOutcome::new("composition", *p);
    let f = |m: &SymMatrix| f_value(m, p, FMode::Raw);
    for s in 0..count {
        let hm = if s % 4 == 3 {
            let mut l = uniform(&mut rng, n, -1.0, 1.0);
            l[1] = l[0];
            with_spectrum(&random_orthogonal(&mut rng, n)?, &l)?
        } else {
            random_symmetric(&mut rng, n)
        };
        let dir = random_symmetric(&mut rng, n);

        let d = d_f(&hm, p)?;
        let scale = d.entries().iter().fold(1f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in i..n {
                let e = SymMatrix::from_fn(n, |a, b| if (a, b) == (i, j) || (a, b) == (j, i) { 1.0 } else { 0.0 })?;
                let fd = richardson(tol.df_step, |h| Ok((f(&hm.add_scaled(&e, h))? - f(&hm.add_scaled(&e, -h))?) / (2.0 * h)))?;
                let exact = if i == j { d.get(i, i) } else { 2.0 * d.get(i, j) };
                df.check((exact - fd).abs(), tol.df_fd * scale, || format!("entry ({i},{j}) of {:?}", hm.entries()));
            }
        }

        let f0 = f(&hm)?;
        let fd = richardson(tol.d2f_step, |h| {
            Ok((f(&hm.add_scaled(&dir, h))? - 2.0 * f0 + f(&hm.add_scaled(&dir, -h))?) / (h * h))
        })?;
        let exact = d2_f_quadratic(&hm, &dir, p)?;
        d2f.check((exact - fd).abs(), tol.d2f_fd * exact.abs().max(1.0), || format!("value {exact} vs {fd} at {:?}", hm.entries()));

        let q = random_orthogonal(&mut rng, n)?;
        frame.close(f(&hm.congruence(&q))?, f(&hm)?, tol.frame_invariance, || format!("{:?}", hm.entries()));

        let direct = sum_hessian(&eta(&eigen_sym(&hm)?.values), p);
        comp.close(f(&hm)?, direct, tol.composition, || format!("{:?}", hm.entries()));
    }
    Ok(vec![df, d2f, frame, comp])
}

/// Every suite for one `(n, k, α)`.
pub fn all_suites(p: &SumHessianParams, count: usize, seed: u64, tol: &Tolerances) -> Result<Vec<SuiteOutcome>> {
    let mut out = identity_suites(p, count, seed, tol)?;
    out.extend(inequality_suites(p, count, seed, tol)?);
    out.extend(spectral_suites(p, count, seed, tol)?);
    Ok(out)
}

pub const SWEEP_ALPHAS: [f64; 3] = [0.0, 0.5, 2.0];

/// `(n, k, α)` for `n ∈ 2..=8`, `k ∈ 1..=n`, α from [`SWEEP_ALPHAS`].
pub fn sweep() -> Vec<SumHessianParams> {
    let mut v = Vec::new();
    for n in 2..=8 {
        for k in 1..=n {
            for a in SWEEP_ALPHAS {
                v.push(SumHessianParams::new(n, k, a).expect("valid sweep parameters"));
            }
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_config_passes() {
        let p = SumHessianParams::new(3, 2, 1.0).unwrap();
        let tol = Tolerances::default();
        for o in all_suites(&p, 50, 1, &tol).unwrap() {
            assert!(o.passed(), "{}", o.line());
            assert!(o.checked > 0, "{}", o.name);
        }
    }

    #[test]
    fn failures_are_counted() {
        let p = SumHessianParams::new(2, 1, 0.0).unwrap();
        let mut o = SuiteOutcome::new("x", p);
        o.close(1.0, 1.0 + 1e-3, 1e-6, || "bad".into());
        o.close(1.0, 1.0, 1e-6, || "good".into());
        o.check(f64::NAN, 1.0, || "nan".into());
        assert_eq!((o.checked, o.failures), (3, 2));
        assert_eq!(o.first_failure.as_deref(), Some("bad"));
        assert!(o.line().starts_with("FAIL x n=2 k=1"));
    }
}
