//! The acceptance criteria, one PASS/FAIL line each. The lines go straight to
//! the stderr handle so they show up without `--nocapture`.

mod common;

use std::io::Write as _;
use std::time::Instant;

use common::{check_determinism, config, shipped_configs};
use sumhess::estimates::{
    pogorelov_product, relative_drift, EstimateParams, EstimateReport, FieldSummary,
};
use sumhess::frontend::config::RunConfig;
use sumhess::frontend::expr::Expression;
use sumhess::solver::{newton_solve, GridDomain, Instance, RhsSpec, SolveConfig, SolveResult};
use sumhess::suites::{identity_suites, inequality_suites, spectral_suites, sweep, SuiteOutcome, Tolerances};
use sumhess::symfun::SumHessianParams;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const SEED: u64 = 2024;

fn solve(n: usize, k: usize, f: &str, g: &str, grid: GridDomain, tol: f64) -> Result<SolveResult, String> {
    let inst = Instance::new(
        SumHessianParams::new(n, k, 1.0).map_err(|e| e.to_string())?,
        RhsSpec::parse(f).map_err(|e| e.to_string())?,
        Expression::parse(g).map_err(|e| e.to_string())?,
        grid,
    )
    .map_err(|e| e.to_string())?;
    newton_solve(&inst, &SolveConfig { tol, ..SolveConfig::default() }).map_err(|e| e.to_string())
}

fn cube(n: usize, cells: usize) -> GridDomain {
    GridDomain::centered_box(n, 1.0, cells).unwrap()
}

fn load(name: &str) -> Result<RunConfig, String> {
    RunConfig::load(&config(name)).map_err(|e| e.to_string())
}

fn solve_config(cfg: &RunConfig, refined: bool) -> Result<SolveResult, String> {
    let inst = if refined { cfg.refined_instance() } else { cfg.instance() }.map_err(|e| e.to_string())?;
    newton_solve(&inst, &cfg.solver).map_err(|e| format!("{}: {e}", cfg.id))
}

fn suite_summary(outcomes: &[SuiteOutcome]) -> Outcome {
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed()).map(|o| o.line()).collect();
    if failed.is_empty() {
        Ok(format!("{} suites", outcomes.len()))
    } else {
        Err(format!("{} of {} suites failed, first: {}", failed.len(), outcomes.len(), failed[0]))
    }
}

fn identity_sweep() -> Outcome {
    let tol = Tolerances::default();
    let start = Instant::now();
    let mut all = Vec::new();
    for p in sweep() {
        all.extend(identity_suites(&p, 1000, SEED, &tol).map_err(|e| e.to_string())?);
    }
    let secs = start.elapsed().as_secs_f64();
    let summary = suite_summary(&all)?;
    if secs >= 30.0 {
        return Err(format!("{summary} but took {secs:.1} s"));
    }
    Ok(format!("{summary} in {secs:.1} s"))
}

fn inequality_sweep() -> Outcome {
    let tol = Tolerances::default();
    let mut all = Vec::new();
    for p in sweep() {
        all.extend(inequality_suites(&p, 1000, SEED, &tol).map_err(|e| e.to_string())?);
    }
    let summary = suite_summary(&all)?;
    let constants: Vec<f64> = all.iter().filter_map(|o| o.constant).collect();
    if constants.is_empty() || !constants.iter().all(|c| *c > 0.0) {
        return Err(format!("{summary}; constants not all positive"));
    }
    let min = constants.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(format!("{summary}; {} constants, smallest {min:.3e}", constants.len()))
}

fn derivative_oracles() -> Outcome {
    let tol = Tolerances::default();
    let mut all = Vec::new();
    for p in sweep() {
        let ids = identity_suites(&p, 200, SEED, &tol).map_err(|e| e.to_string())?;
        all.extend(ids.into_iter().filter(|o| o.name == "gradient_formula" || o.name == "hessian_formula"));
        all.extend(spectral_suites(&p, 100, SEED, &tol).map_err(|e| e.to_string())?);
    }
    suite_summary(&all)
}

fn exact_quadratic() -> Outcome {
    let r = solve(3, 2, "18", "(x1^2+x2^2+x3^2-3)/2", cube(3, 32), 1e-10)?;
    let err = (0..r.field.values.len())
        .map(|i| {
            let x = r.field.grid.position(i);
            (r.field.values[i] - (x.iter().map(|v| v * v).sum::<f64>() - 3.0) / 2.0).abs()
        })
        .fold(0.0, f64::max);
    let lin = solve(3, 1, "7", "(x1^2+x2^2+x3^2)/2 + x1*x2", cube(3, 32), 1e-10)?;
    let msg = format!("sup error {err:.2e}, k=1 iterations {}", lin.iterations);
    if err <= 1e-9 && lin.iterations <= 2 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn radial_error(r: &SolveResult) -> f64 {
    (0..r.field.values.len())
        .map(|i| {
            let x = r.field.grid.position(i);
            (r.field.values[i] - (x.iter().map(|v| v * v).sum::<f64>() / 2.0).exp()).abs()
        })
        .fold(0.0, f64::max)
}

fn manufactured_convergence() -> Outcome {
    let start = Instant::now();
    let f2 = "exp(x1^2/2+x2^2/2)^2*(1+x1^2+x2^2) + exp(x1^2/2+x2^2/2)*(2+x1^2+x2^2)";
    let g2 = "exp((x1^2+x2^2)/2)";
    let e3 = "exp((x1^2+x2^2+x3^2)/2)";
    let f3 = format!("{e3}^2*(2+x1^2+x2^2+x3^2)*(6+x1^2+x2^2+x3^2) + {e3}*(6+2*(x1^2+x2^2+x3^2))");
    let mut errors2 = Vec::new();
    for cells in [32, 64, 128] {
        errors2.push(radial_error(&solve(2, 2, f2, g2, cube(2, cells), 1e-10)?));
    }
    let mut errors3 = Vec::new();
    for cells in [16, 32] {
        errors3.push(radial_error(&solve(3, 2, &f3, e3, cube(3, cells), 1e-10)?));
    }
    let ratios: Vec<f64> = errors2
        .windows(2)
        .chain(errors3.windows(2))
        .map(|w| w[0] / w[1])
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("ratios {:?} in {secs:.1} s", ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>());
    if ratios.iter().all(|r| (3.2..=4.8).contains(r)) && secs < 300.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn admissibility_safeguard() -> Outcome {
    let mut iterates = 0;
    for path in shipped_configs() {
        let cfg = RunConfig::load(&path).map_err(|e| e.to_string())?;
        let mut runs = vec![solve_config(&cfg, false)?];
        if cfg.refine {
            runs.push(solve_config(&cfg, true)?);
        }
        for r in runs {
            iterates += r.trace.len();
            if let Some(e) = r.trace.iter().find(|e| e.violations > 0) {
                return Err(format!("{}: {} violations at t = {}", cfg.id, e.violations, e.t));
            }
        }
    }
    Ok(format!("{} configs, {iterates} accepted iterates, no violations", shipped_configs().len()))
}

fn bounded_family() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for f in ["18", "72", "288"] {
        let cfg = load(&format!("zero_k2_f{f}.cfg"))?;
        let product = |r: &SolveResult| -> Result<f64, String> {
            let s = FieldSummary::new(&r.field).map_err(|e| e.to_string())?;
            Ok(pogorelov_product(&s, 1.0).map_err(|e| e.to_string())?.max)
        };
        let coarse = product(&solve_config(&cfg, false)?)?;
        let fine = product(&solve_config(&cfg, true)?)?;
        let growth = (fine / coarse).max(coarse / fine);
        ok &= coarse.is_finite() && fine.is_finite() && growth <= 3.0;
        notes.push(format!("f={f}: {coarse:.4} -> {fine:.4}"));
    }
    let msg = notes.join(", ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn weighted_k_equals_n() -> Outcome {
    let cfg = load("zero_k3.cfg")?;
    let coarse = solve_config(&cfg, false)?;
    let fine = solve_config(&cfg, true)?;
    let r = EstimateReport::compute_refined(&cfg.id, &coarse.field, &fine.field, &cfg.estimates)
        .map_err(|e| e.to_string())?;
    let drifts: Vec<String> = cfg
        .estimates
        .betas
        .iter()
        .map(|&b| {
            let p = |f| pogorelov_product(&FieldSummary::new(f).unwrap(), b).unwrap().max;
            format!("beta {b}: {:.1}%", 100.0 * relative_drift(p(&coarse.field), p(&fine.field)))
        })
        .collect();
    match r.stable_beta.flatten() {
        Some(b) => Ok(format!("stable beta = {b} ({})", drifts.join(", "))),
        None => Err(format!("no stable beta ({})", drifts.join(", "))),
    }
}

fn scale_invariance() -> Outcome {
    let ratio = |name: &str| -> Result<(f64, f64), String> {
        let cfg = load(name)?;
        let r = solve_config(&cfg, false)?;
        let rep = EstimateReport::compute(&cfg.id, &r.field, &EstimateParams::default()).map_err(|e| e.to_string())?;
        Ok((rep.interior_ratio, rep.h))
    };
    let (unit, h) = ratio("disc_unit.cfg")?;
    let (scaled, _) = ratio("disc_r2.cfg")?;
    let diff = (unit - scaled).abs();
    let msg = format!("{unit:.10} vs {scaled:.10}, difference {diff:.2e}, 5h^2 = {:.2e}", 5.0 * h * h);
    if diff <= 5.0 * h * h {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn determinism() -> Outcome {
    let results = check_determinism();
    let bad: Vec<String> = results
        .iter()
        .filter_map(|(n, r)| r.as_ref().err().map(|e| format!("{n}: {e}")))
        .collect();
    if bad.is_empty() {
        Ok(format!("{} commands", results.len()))
    } else {
        Err(bad.join("; "))
    }
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        ("identity suites", identity_sweep),
        ("inequality suites", inequality_sweep),
        ("derivative oracles", derivative_oracles),
        ("exact quadratic solve", exact_quadratic),
        ("manufactured-solution convergence", manufactured_convergence),
        ("admissibility safeguard", admissibility_safeguard),
        ("estimate boundedness, k = 2 family", bounded_family),
        ("weighted estimate, k = n", weighted_k_equals_n),
        ("scale invariance", scale_invariance),
        ("CLI determinism", determinism),
    ];
    let mut failed = Vec::new();
    let mut err = std::io::stderr();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        writeln!(err, "{tag} criterion {}: {name}: {detail} [{secs:.1} s]", i + 1).unwrap();
        if outcome.is_err() {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
