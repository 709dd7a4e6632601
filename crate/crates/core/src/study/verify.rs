//! Property checks applied to a finished sweep.

use crate::cell_problems::CorrectorSet;
use crate::error::Result;
use crate::pde_solvers::ProblemSpec;
use crate::study::sweep::{prepare, run_epsilon, run_sweep_prepared, ConvergenceReport, BOUND_SLACK};

/// Tolerance for "exactly zero" metrics of constant-coefficient runs.
pub const TRIVIAL_TOL: f64 = 1e-10;
/// Admissible observed first-order slope.
pub const FIRST_ORDER: (f64, f64) = (0.9, 1.1);
/// Largest admitted growth of the 2D `error / eps` ratio over a sweep.
pub const RATIO_GROWTH: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

fn cell_checks(spec: &ProblemSpec, cs: &CorrectorSet, out: &mut Vec<Check>) {
    let mean = cs
        .solutions()
        .iter()
        .flat_map(|s| s.chi.iter())
        .map(|c| (c.iter().sum::<f64>() / c.len() as f64).abs())
        .fold(0.0, f64::max);
    out.push(Check::new("corrector zero mean", mean <= 1e-12, format!("max |<chi>| = {mean:.3e}")));

    let alpha = spec.coefficient.alpha();
    let (lo, asym) = cs.solutions().iter().fold((f64::INFINITY, 0.0f64), |(lo, asym), s| {
        let t = s.a_hom.0;
        let sym = crate::coefficients::Tensor2([
            [t[0][0], 0.5 * (t[0][1] + t[1][0])],
            [0.5 * (t[0][1] + t[1][0]), t[1][1]],
        ]);
        let (l, _) = sym.symmetric_eigen_bounds(spec.dim);
        (lo.min(l), asym.max((t[0][1] - t[1][0]).abs()))
    });
    out.push(Check::new(
        "homogenized matrix coercive",
        lo >= alpha * (1.0 - 1e-6),
        format!("min eigenvalue {lo:.6} vs alpha {alpha:.6}"),
    ));
    out.push(Check::new("homogenized matrix symmetric", asym <= 1e-10, format!("asymmetry {asym:.3e}")));
    out.push(Check::new(
        "cell residual",
        cs.residual() <= spec.cg_tol,
        format!("{:.3e} (tol {:.1e})", cs.residual(), spec.cg_tol),
    ));
}

fn list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", items.join(", "))
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Checks that depend only on the report rows.
pub fn report_checks(spec: &ProblemSpec, report: &ConvergenceReport) -> Vec<Check> {
    let mut out = Vec::new();
    let rows = &report.rows;
    if rows.is_empty() {
        return out;
    }
    if spec.coefficient.is_constant() {
        let worst = rows
            .iter()
            .map(|r| r.h1_gap.max(r.avg_grad_error).max(r.bl_corrected_error.unwrap_or(0.0)))
            .fold(0.0, f64::max);
        out.push(Check::new(
            "constant coefficient metrics vanish",
            worst <= TRIVIAL_TOL,
            format!("largest metric {worst:.3e}"),
        ));
        return out;
    }
    let h1: Vec<f64> = rows.iter().map(|r| r.h1_gap).collect();
    out.push(Check::new(
        "corrector gap strictly decreasing",
        strictly_decreasing(&h1),
        list(&h1),
    ));
    let span = rows[0].eps / rows[rows.len() - 1].eps;
    if span >= 16.0 {
        let last = h1[h1.len() - 1];
        out.push(Check::new(
            "corrector gap below 10% of first",
            last < 0.1 * h1[0],
            format!("{last:.3e} vs {:.3e}", 0.1 * h1[0]),
        ));
    }
    if spec.dim == 1 {
        if let Some(ok) = rows.iter().map(|r| r.bound_ok).collect::<Option<Vec<bool>>>() {
            let worst = rows
                .iter()
                .map(|r| r.avg_grad_error / r.bound_rhs.unwrap_or(f64::NAN))
                .fold(0.0, f64::max);
            out.push(Check::new(
                "explicit 1D bound",
                ok.iter().all(|b| *b),
                format!("max error/bound = {worst:.4} (slack {BOUND_SLACK})"),
            ));
            let ratios: Option<Vec<f64>> = rows
                .iter()
                .map(|r| Some(r.error_gradient? / r.error_bound?))
                .collect();
            if let Some(ratios) = ratios {
                let worst = ratios.iter().copied().fold(0.0, f64::max);
                out.push(Check::new(
                    "error function bound",
                    worst <= BOUND_SLACK,
                    format!("max ||e'||/bound = {worst:.4}"),
                ));
            }
            let bl: Option<Vec<f64>> = rows
                .iter()
                .map(|r| Some(r.boundary_layer_norm? / r.boundary_layer_bound?))
                .collect();
            if let Some(bl) = bl {
                let worst = bl.iter().copied().fold(0.0, f64::max);
                out.push(Check::new(
                    "boundary layer uniform bound",
                    worst <= 1.0,
                    format!("max ||v'||/bound = {worst:.4}"),
                ));
            }
        }
        if let Some(fit) = report.fitted_rates.get("avg_grad_error") {
            out.push(Check::new(
                "first-order rate",
                (FIRST_ORDER.0..=FIRST_ORDER.1).contains(&fit.slope),
                format!("slope {:.4} over {} points", fit.slope, fit.n_points),
            ));
        }
    } else if let Some(errs) = rows
        .iter()
        .map(|r| r.bl_corrected_error.map(|e| e / r.eps))
        .collect::<Option<Vec<f64>>>()
    {
        let growth = errs[errs.len() - 1] / errs[0];
        out.push(Check::new(
            "bounded error/eps trend",
            growth <= RATIO_GROWTH,
            format!("ratios {}, growth {growth:.3}x", list(&errs)),
        ));
    }
    out
}

/// Runs the sweep for `spec` and every applicable check.
pub fn verify(spec: &ProblemSpec) -> Result<(ConvergenceReport, Vec<Check>)> {
    let t = std::time::Instant::now();
    let (cs, hom) = prepare(spec)?;
    let report = run_sweep_prepared(spec, None, &cs, &hom, t.elapsed().as_secs_f64())?;
    let mut checks = Vec::new();
    cell_checks(spec, &cs, &mut checks);
    if spec.coefficient.is_constant() {
        // Nothing may oscillate: correctors and boundary layers vanish.
        let chi = cs.chi_sup();
        let mut bl_max: f64 = 0.0;
        for &eps in &spec.eps_list {
            if let Some(b) = run_epsilon(spec, &cs, &hom, eps)?.boundary_layer {
                bl_max = bl_max.max(b.v.max_abs());
            }
        }
        checks.push(Check::new(
            "constant coefficient fields vanish",
            chi <= TRIVIAL_TOL && bl_max <= TRIVIAL_TOL,
            format!("|chi| = {chi:.3e}, |v| = {bl_max:.3e}"),
        ));
    }
    checks.extend(report_checks(spec, &report));
    Ok((report, checks))
}
