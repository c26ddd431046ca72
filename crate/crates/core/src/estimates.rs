//! Interior and Pogorelov-type second-derivative diagnostics on solved fields.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::solver::{box_gradient, centered_gradient, discrete_hessian, Mask, ScalarField};
use crate::spectral::eigen_sym;

/// Relative drift under refinement accepted as "stable".
pub const STABLE_DRIFT: f64 = 0.10;

/// Per-interior-point derivative data of one field.
#[derive(Debug, Clone)]
pub struct FieldSummary<'a> {
    pub field: &'a ScalarField,
    /// Interior grid indices, ascending.
    pub points: Vec<usize>,
    pub gradients: Vec<Vec<f64>>,
    /// Hessian eigenvalues, descending.
    pub eigenvalues: Vec<Vec<f64>>,
    sup_grad: f64,
}

impl<'a> FieldSummary<'a> {
    pub fn new(field: &'a ScalarField) -> Result<Self> {
        let grid = &field.grid;
        let points = grid.interior_points();
        if points.is_empty() {
            return Err(Error::Argument("field has no interior points".into()));
        }
        let data: Vec<Result<(Vec<f64>, Vec<f64>)>> = points
            .par_iter()
            .map(|&i| {
                let g = centered_gradient(grid, &field.values, i);
                let dec = eigen_sym(&discrete_hessian(grid, &field.values, i))?;
                Ok((g, dec.values.into_vec()))
            })
            .collect();
        let mut gradients = Vec::with_capacity(points.len());
        let mut eigenvalues = Vec::with_capacity(points.len());
        for d in data {
            let (g, e) = d?;
            gradients.push(g);
            eigenvalues.push(e);
        }
        let sup_sq = match grid.mask() {
            Mask::None => (0..grid.len())
                .into_par_iter()
                .map(|i| box_gradient(grid, &field.values, i).iter().map(|v| v * v).sum::<f64>())
                .reduce(|| 0.0, f64::max),
            Mask::Ball { .. } => gradients.iter().map(|g| g.iter().map(|v| v * v).sum::<f64>()).fold(0.0, f64::max),
        };
        Ok(FieldSummary {
            field,
            points,
            gradients,
            eigenvalues,
            sup_grad: sup_sq.sqrt(),
        })
    }

    fn grad_sq(&self, j: usize) -> f64 {
        self.gradients[j].iter().map(|v| v * v).sum()
    }

    /// `sup |Du|` over the closed box (one-sided differences on the faces),
    /// or over interior points for a ball mask.
    pub fn sup_grad(&self) -> f64 {
        self.sup_grad
    }

    /// Largest absolute Hessian eigenvalue at interior slot `j`.
    pub fn spectral_norm(&self, j: usize) -> f64 {
        let e = &self.eigenvalues[j];
        e[0].abs().max(e[e.len() - 1].abs())
    }

    pub fn sup_hess(&self) -> f64 {
        (0..self.points.len()).map(|j| self.spectral_norm(j)).fold(0.0, f64::max)
    }

    fn slot(&self, point: usize) -> Option<usize> {
        self.points.binary_search(&point).ok()
    }

    /// Spectral norm of the Hessian at the grid point nearest the center.
    pub fn hess_center(&self) -> Result<f64> {
        let c = self.field.grid.nearest_to_center();
        let j = self.slot(c).ok_or_else(|| {
            Error::Argument(format!(
                "grid point nearest the center (x = {:?}) is not interior",
                self.field.grid.position(c)
            ))
        })?;
        Ok(self.spectral_norm(j))
    }

    fn offset_from_center(&self, point: usize) -> Vec<f64> {
        let c = self.field.grid.center();
        self.field
            .grid
            .position(point)
            .iter()
            .zip(&c)
            .map(|(x, c)| x - c)
            .collect()
    }
}

/// A per-point diagnostic: values on interior points (`None` where the
/// point is excluded) and the maximum over the included ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub values: Vec<Option<f64>>,
    pub max: f64,
    /// Grid index of the maximum.
    pub argmax: usize,
    pub location: Vec<f64>,
    pub excluded: usize,
}

fn collect_diagnostic(s: &FieldSummary<'_>, values: Vec<Option<f64>>) -> Result<Diagnostic> {
    let mut best: Option<(usize, f64)> = None;
    for (j, v) in values.iter().enumerate() {
        if let Some(v) = v {
            if best.is_none_or(|(_, m)| *v > m) {
                best = Some((j, *v));
            }
        }
    }
    let excluded = values.iter().filter(|v| v.is_none()).count();
    let (j, max) = best.ok_or_else(|| {
        Error::Domain(format!("every one of the {excluded} interior points is excluded"))
    })?;
    let argmax = s.points[j];
    Ok(Diagnostic {
        values,
        max,
        argmax,
        location: s.field.grid.position(argmax),
        excluded,
    })
}

/// `|D²u(c)| / (1 + sup|Du| / R)` with `c` the grid point nearest the
/// domain center.
pub fn interior_ratio(s: &FieldSummary<'_>, radius: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::Argument(format!("radius must be positive, got {radius}")));
    }
    Ok(s.hess_center()? / (1.0 + s.sup_grad() / radius))
}

fn require_zero_boundary(s: &FieldSummary<'_>) -> Result<()> {
    if !s.field.has_zero_boundary() {
        return Err(Error::Argument("needs boundary data identically zero".into()));
    }
    Ok(())
}

/// `max (−u)^β |D²u|` over interior points.
pub fn pogorelov_product(s: &FieldSummary<'_>, beta: f64) -> Result<Diagnostic> {
    if !(beta >= 1.0) || !beta.is_finite() {
        return Err(Error::Argument(format!("beta must be finite and >= 1, got {beta}")));
    }
    require_zero_boundary(s)?;
    if let Some(j) = (0..s.points.len()).find(|&j| s.field.values[s.points[j]] > 0.0) {
        let i = s.points[j];
        return Err(Error::Domain(format!(
            "maximum principle violated: u = {} > 0 at x = {:?}",
            s.field.values[i],
            s.field.grid.position(i)
        )));
    }
    let values = (0..s.points.len())
        .map(|j| {
            let u = s.field.values[s.points[j]];
            Some((-u).powf(beta) * s.spectral_norm(j))
        })
        .collect();
    collect_diagnostic(s, values)
}

/// `φ = ρ·g(|Du|²/2)·λ_max(D²u)` with `ρ = 1 − |x − c|²/r²`,
/// `g(t) = (1 − t/A)^{−1/3}` and `A = sup|Du|²` (`g ≡ 1` when `A = 0`).
pub fn phi_diagnostic(s: &FieldSummary<'_>, rho_radius: f64) -> Result<Diagnostic> {
    if !(rho_radius > 0.0) {
        return Err(Error::Argument(format!("rho radius must be positive, got {rho_radius}")));
    }
    let big_a = s.sup_grad().powi(2);
    let values = (0..s.points.len())
        .map(|j| {
            let d = s.offset_from_center(s.points[j]);
            let rho = 1.0 - d.iter().map(|v| v * v).sum::<f64>() / (rho_radius * rho_radius);
            let g = if big_a == 0.0 {
                1.0
            } else {
                (1.0 - 0.5 * s.grad_sq(j) / big_a).powf(-1.0 / 3.0)
            };
            Some(rho * g * s.eigenvalues[j][0])
        })
        .collect();
    collect_diagnostic(s, values)
}

/// Constants of the test function `P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PParams {
    pub beta: f64,
    pub a: f64,
    pub a_const: f64,
}

impl Default for PParams {
    fn default() -> Self {
        PParams {
            beta: 2.0,
            a: 0.1,
            a_const: 1.0,
        }
    }
}

/// `P = β log(−u) + log u₁₁ + (a/2)|Du|² + (A/2)|x − c|²` with `u₁₁` the
/// largest Hessian eigenvalue. Points with `u ≥ 0` or `u₁₁ ≤ 0` are excluded.
pub fn p_diagnostic(s: &FieldSummary<'_>, p: PParams) -> Result<Diagnostic> {
    require_zero_boundary(s)?;
    let values = (0..s.points.len())
        .map(|j| {
            let i = s.points[j];
            let u = s.field.values[i];
            let u11 = s.eigenvalues[j][0];
            if u >= 0.0 || u11 <= 0.0 {
                return None;
            }
            let d = s.offset_from_center(i);
            let x2: f64 = d.iter().map(|v| v * v).sum();
            Some(p.beta * (-u).ln() + u11.ln() + 0.5 * p.a * s.grad_sq(j) + 0.5 * p.a_const * x2)
        })
        .collect();
    collect_diagnostic(s, values)
}

/// Sweep lists and constants for a report.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateParams {
    pub betas: Vec<f64>,
    pub p: PParams,
    /// Radius for the interior ratio and for `ρ`; the inscribed radius of
    /// the domain when `None`.
    pub radius: Option<f64>,
}

impl Default for EstimateParams {
    fn default() -> Self {
        EstimateParams {
            betas: vec![1.0, 2.0, 4.0],
            p: PParams::default(),
            radius: None,
        }
    }
}

/// Estimate quantities of one solved instance.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub id: String,
    pub h: f64,
    pub sup_grad: f64,
    pub sup_hess: f64,
    pub hess_center: f64,
    pub interior_ratio: f64,
    /// `β = 1` product; `None` unless the boundary data is zero.
    pub pogorelov: Option<f64>,
    /// One entry per swept β.
    pub weighted: Vec<(f64, Option<f64>)>,
    pub phi_max: f64,
    pub phi_argmax: Vec<f64>,
    pub p_max: Option<f64>,
    pub p_argmax: Option<Vec<f64>>,
    /// Radius used in `ρ` (the domain's inscribed radius unless overridden).
    pub rho_radius: f64,
    /// Smallest β whose product moved by at most [`STABLE_DRIFT`] under
    /// refinement; outer `None` when no refined field was supplied.
    pub stable_beta: Option<Option<f64>>,
}

impl EstimateReport {
    pub fn compute(id: &str, field: &ScalarField, params: &EstimateParams) -> Result<Self> {
        let s = FieldSummary::new(field)?;
        let radius = params.radius.unwrap_or_else(|| field.grid.inscribed_radius());
        let zero = field.has_zero_boundary();
        let phi = phi_diagnostic(&s, radius)?;
        let (pogorelov, weighted, p) = if zero {
            let pog = pogorelov_product(&s, 1.0)?.max;
            let weighted = params
                .betas
                .iter()
                .map(|&b| Ok((b, Some(pogorelov_product(&s, b)?.max))))
                .collect::<Result<Vec<_>>>()?;
            (Some(pog), weighted, Some(p_diagnostic(&s, params.p)?))
        } else {
            (None, params.betas.iter().map(|&b| (b, None)).collect(), None)
        };
        Ok(EstimateReport {
            id: id.to_string(),
            h: field.grid.h(),
            sup_grad: s.sup_grad(),
            sup_hess: s.sup_hess(),
            hess_center: s.hess_center()?,
            interior_ratio: interior_ratio(&s, radius)?,
            pogorelov,
            weighted,
            phi_max: phi.max,
            phi_argmax: phi.location,
            p_max: p.as_ref().map(|d| d.max),
            p_argmax: p.map(|d| d.location),
            rho_radius: radius,
            stable_beta: None,
        })
    }

    /// Like [`Self::compute`], also filling `stable_beta` from a solve of the
    /// same instance on a refined grid.
    pub fn compute_refined(id: &str, field: &ScalarField, refined: &ScalarField, params: &EstimateParams) -> Result<Self> {
        let mut r = Self::compute(id, field, params)?;
        r.stable_beta = Some(stable_beta(field, refined, &params.betas)?);
        Ok(r)
    }
}

/// `|fine − coarse| / |coarse|`.
pub fn relative_drift(coarse: f64, fine: f64) -> f64 {
    (fine - coarse).abs() / coarse.abs()
}

/// Smallest β in the sweep whose weighted product drifts by at most
/// [`STABLE_DRIFT`] between the two fields.
pub fn stable_beta(coarse: &ScalarField, fine: &ScalarField, betas: &[f64]) -> Result<Option<f64>> {
    let sc = FieldSummary::new(coarse)?;
    let sf = FieldSummary::new(fine)?;
    let mut sorted = betas.to_vec();
    sorted.sort_by(f64::total_cmp);
    for b in sorted {
        let pc = pogorelov_product(&sc, b)?.max;
        let pf = pogorelov_product(&sf, b)?.max;
        if relative_drift(pc, pf) <= STABLE_DRIFT {
            return Ok(Some(b));
        }
    }
    Ok(None)
}

/// Compact number format for column names: `2` rather than `2.0`.
pub fn beta_label(b: f64) -> String {
    if b.fract() == 0.0 && b.abs() < 1e15 {
        format!("{}", b as i64)
    } else {
        format!("{b}")
    }
}

/// Rows of one report table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub rows: Vec<EstimateReport>,
}

/// Table of a family of at least two instances.
pub fn family_report(rows: Vec<EstimateReport>) -> Result<ReportTable> {
    if rows.len() < 2 {
        return Err(Error::Argument(format!("a family needs at least 2 instances, got {}", rows.len())));
    }
    Ok(ReportTable { rows })
}

const NA: &str = "NA";

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), num)
}

fn point(x: &[f64]) -> String {
    x.iter().map(|v| num(*v)).collect::<Vec<_>>().join(";")
}

fn max_opt(vals: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    vals.flatten().fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
}

impl ReportTable {
    pub fn single(row: EstimateReport) -> Self {
        ReportTable { rows: vec![row] }
    }

    fn betas(&self) -> Vec<f64> {
        self.rows.first().map(|r| r.weighted.iter().map(|w| w.0).collect()).unwrap_or_default()
    }

    fn has_stable(&self) -> bool {
        self.rows.iter().any(|r| r.stable_beta.is_some())
    }

    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = [
            "id",
            "h",
            "sup_grad",
            "sup_hess",
            "hess_center",
            "interior_ratio",
            "pogorelov_product",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        h.extend(self.betas().iter().map(|b| format!("weighted_pogorelov_beta{}", beta_label(*b))));
        h.extend(
            ["phi_max", "phi_argmax", "p_max", "p_argmax", "rho_radius"]
                .iter()
                .map(|s| s.to_string()),
        );
        if self.has_stable() {
            h.push("stable_beta".into());
        }
        h
    }

    /// The per-family maximum of every numeric column (the empirical
    /// constants); locations and the spacing are `NA`.
    pub fn family_max(&self) -> Vec<String> {
        let rows = &self.rows;
        let mut out = vec!["family_max".to_string(), NA.to_string()];
        out.push(opt(max_opt(rows.iter().map(|r| Some(r.sup_grad)))));
        out.push(opt(max_opt(rows.iter().map(|r| Some(r.sup_hess)))));
        out.push(opt(max_opt(rows.iter().map(|r| Some(r.hess_center)))));
        out.push(opt(max_opt(rows.iter().map(|r| Some(r.interior_ratio)))));
        out.push(opt(max_opt(rows.iter().map(|r| r.pogorelov))));
        for k in 0..self.betas().len() {
            out.push(opt(max_opt(rows.iter().map(|r| r.weighted.get(k).and_then(|w| w.1)))));
        }
        out.push(opt(max_opt(rows.iter().map(|r| Some(r.phi_max)))));
        out.push(NA.into());
        out.push(opt(max_opt(rows.iter().map(|r| r.p_max))));
        out.push(NA.into());
        out.push(NA.into());
        if self.has_stable() {
            out.push(opt(max_opt(rows.iter().map(|r| r.stable_beta.flatten()))));
        }
        out
    }

    fn row_cells(&self, r: &EstimateReport) -> Vec<String> {
        let mut c = vec![
            r.id.clone(),
            num(r.h),
            num(r.sup_grad),
            num(r.sup_hess),
            num(r.hess_center),
            num(r.interior_ratio),
            opt(r.pogorelov),
        ];
        c.extend(r.weighted.iter().map(|w| opt(w.1)));
        c.push(num(r.phi_max));
        c.push(point(&r.phi_argmax));
        c.push(opt(r.p_max));
        c.push(r.p_argmax.as_deref().map_or_else(|| NA.to_string(), point));
        c.push(num(r.rho_radius));
        if self.has_stable() {
            c.push(opt(r.stable_beta.flatten()));
        }
        c
    }

    /// CSV with a header row; the family maximum row is appended when there
    /// are at least two instances.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{}", self.header().join(",")).expect("write to String");
        for r in &self.rows {
            writeln!(out, "{}", self.row_cells(r).join(",")).expect("write to String");
        }
        if self.rows.len() >= 2 {
            writeln!(out, "{}", self.family_max().join(",")).expect("write to String");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::GridDomain;

    fn paraboloid(grid: GridDomain) -> ScalarField {
        ScalarField::from_fn(grid, |x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            if r2 < 1.0 {
                (r2 - 1.0) / 2.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn paraboloid_on_disc() {
        let cells = 64;
        let f = paraboloid(GridDomain::centered_ball(2, 1.0, cells).unwrap());
        let h = f.grid.h();
        let s = FieldSummary::new(&f).unwrap();
        assert!((s.hess_center().unwrap() - 1.0).abs() < 1e-12);
        assert!((s.sup_grad() - 1.0).abs() < 2.0 * h);
        assert!((interior_ratio(&s, 1.0).unwrap() - 0.5).abs() < h);

        let p1 = pogorelov_product(&s, 1.0).unwrap();
        assert!((p1.max - 0.5).abs() < 1e-12);
        assert_eq!(p1.location, vec![0.0, 0.0]);
        assert!((pogorelov_product(&s, 2.0).unwrap().max - 0.25).abs() < 1e-12);

        let phi = phi_diagnostic(&s, 1.0).unwrap();
        assert!((phi.max - 1.0).abs() < 1e-12);
        assert_eq!(phi.location, vec![0.0, 0.0]);
    }

    #[test]
    fn p_function_on_paraboloid() {
        let f = paraboloid(GridDomain::centered_ball(2, 1.0, 32).unwrap());
        let s = FieldSummary::new(&f).unwrap();
        let plain = PParams {
            beta: 1.0,
            a: 0.0,
            a_const: 0.0,
        };
        let d = p_diagnostic(&s, plain).unwrap();
        assert!((d.max - 0.5f64.ln()).abs() < 1e-12);
        assert_eq!(d.location, vec![0.0, 0.0]);
        let shifted = p_diagnostic(&s, PParams { a_const: 1.0, ..plain }).unwrap();
        for (j, (a, b)) in d.values.iter().zip(&shifted.values).enumerate() {
            let x = f.grid.position(s.points[j]);
            let r2: f64 = x.iter().map(|v| v * v).sum();
            assert_eq!(a.is_some(), b.is_some());
            if let (Some(a), Some(b)) = (a, b) {
                assert!((b - a - r2 / 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sign_conditions() {
        let g = GridDomain::centered_box(2, 1.0, 8).unwrap();
        let pos = ScalarField::from_fn(g.clone(), |x| (1.0 - x[0] * x[0]) * (1.0 - x[1] * x[1]));
        let s = FieldSummary::new(&pos).unwrap();
        assert!(matches!(pogorelov_product(&s, 1.0), Err(Error::Domain(_))));
        assert!(matches!(p_diagnostic(&s, PParams::default()), Err(Error::Domain(_))));
        let nonzero = ScalarField::from_fn(g, |x| x[0] * x[0]);
        let s = FieldSummary::new(&nonzero).unwrap();
        assert!(matches!(pogorelov_product(&s, 1.0), Err(Error::Argument(_))));
        assert!(pogorelov_product(&s, 0.5).is_err());
    }

    #[test]
    fn constant_field_phi_uses_unit_g() {
        let g = GridDomain::centered_box(2, 1.0, 8).unwrap();
        let f = ScalarField::from_fn(g, |_| 0.0);
        let s = FieldSummary::new(&f).unwrap();
        let d = phi_diagnostic(&s, 1.0).unwrap();
        assert_eq!(d.max, 0.0);
    }

    #[test]
    fn csv_layout() {
        let f = paraboloid(GridDomain::centered_ball(2, 1.0, 16).unwrap());
        let params = EstimateParams::default();
        let a = EstimateReport::compute("a", &f, &params).unwrap();
        let g = ScalarField::from_fn(GridDomain::centered_box(2, 1.0, 16).unwrap(), |x| x[0] * x[0] + x[1] * x[1]);
        let b = EstimateReport::compute("b", &g, &params).unwrap();
        assert!(b.pogorelov.is_none() && b.p_max.is_none());
        let t = family_report(vec![a, b]).unwrap();
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].contains("weighted_pogorelov_beta1,weighted_pogorelov_beta2,weighted_pogorelov_beta4"));
        assert!(!lines[0].contains("stable_beta"));
        let width = lines[0].split(',').count();
        assert!(lines.iter().all(|l| l.split(',').count() == width));
        assert!(lines[2].contains("NA"));
        assert!(lines[3].starts_with("family_max,NA,"));
        assert!(family_report(vec![]).is_err());
    }

    #[test]
    fn beta_labels() {
        assert_eq!(beta_label(4.0), "4");
        assert_eq!(beta_label(1.5), "1.5");
    }
}
