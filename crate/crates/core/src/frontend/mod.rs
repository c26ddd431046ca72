//! Expressions, run configs, CSV output and the command-line driver.

pub mod config;
pub mod expr;

use crate::solver::SolveResult;

/// Newton trace as CSV: one row per accepted iterate.
pub fn trace_csv(result: &SolveResult) -> String {
    let mut out = String::from("t,iteration,residual,step,violations\n");
    for e in &result.trace {
        out.push_str(&format!("{:?},{},{:?},{:?},{}\n", e.t, e.iteration, e.residual, e.step, e.violations));
    }
    out
}
