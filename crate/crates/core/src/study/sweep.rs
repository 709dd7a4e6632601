//! Sweep orchestration: one cell solve and one homogenized solve, then per
//! epsilon the oscillating family, correctors, boundary layer and metrics.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cell_problems::{solve_correctors, CorrectorSet};
use crate::correctors::{
    averaged_gradient_gap, boundary_layer_1d, boundary_layer_2d, boundary_layer_bound_1d,
    bound_rhs_1d, corrector_h1_gap_of, error_function_bound_1d, error_gradient_1d,
    BoundaryLayerField,
};
use crate::error::{HomogError, Result};
use crate::grids::L2Norm;
use crate::pde_solvers::{solve_homogenized, solve_oscillating_family, Homogenized, ProblemSpec};
use crate::study::config::RunConfig;
use crate::study::rate::{fit_rate, RateFit};

/// Slack on the explicit bounds for sampled sup-norms.
pub const BOUND_SLACK: f64 = 1.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub eps: f64,
    /// `|| <u_eps>_Y - u0 ||_{H^1}`.
    pub h1_gap: f64,
    /// `|| <grad u_eps>_Y - grad u0 ||`.
    pub avg_grad_error: f64,
    /// `|| <grad u_eps>_Y - grad u0 + eps <grad v_eps>_Y ||`; absent when no
    /// boundary layer is computed.
    pub bl_corrected_error: Option<f64>,
    /// `2 eps (|a| |chi| / alpha)(|u0'|_inf + ||u0''||)`, 1D only.
    pub bound_rhs: Option<f64>,
    /// `avg_grad_error <= 1.01 bound_rhs`, 1D only.
    pub bound_ok: Option<bool>,
    /// `|| d/dx e_eps ||_{L^2(Omega x Y)}`, 1D only.
    #[serde(default)]
    pub error_gradient: Option<f64>,
    /// `eps (|a| |chi| / alpha) ||u0''||`, 1D only.
    #[serde(default)]
    pub error_bound: Option<f64>,
    /// `|| d/dx v_eps ||_{L^2(Omega x Y)}`, 1D only.
    #[serde(default)]
    pub boundary_layer_norm: Option<f64>,
    /// `(2/alpha) |a| |chi| |u0'|_inf`, 1D only.
    #[serde(default)]
    pub boundary_layer_bound: Option<f64>,
    /// CG iterations spent on this epsilon (2D only).
    #[serde(default)]
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    /// Homogenized matrix (at the first domain node when it varies with x).
    pub a_hom: Vec<Vec<f64>>,
    /// `|| grad_y chi_i ||_{L^2(Y)}` per direction.
    pub chi_gradient_norms: Vec<f64>,
    pub chi_sup: f64,
    pub residual: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub spec: Option<RunConfig>,
    pub cell: CellSummary,
    /// Sorted by strictly decreasing epsilon.
    pub rows: Vec<ReportRow>,
    pub fitted_rates: BTreeMap<String, RateFit>,
    /// Wall-clock times; the only non-reproducible part of a report.
    pub timings: Vec<Timing>,
}

impl ConvergenceReport {
    /// The report with timings cleared, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        Self {
            timings: Vec::new(),
            ..self.clone()
        }
    }

    pub fn metric(&self, name: &str) -> Vec<(f64, Option<f64>)> {
        self.rows
            .iter()
            .map(|r| {
                let v = match name {
                    "h1_gap" => Some(r.h1_gap),
                    "avg_grad_error" => Some(r.avg_grad_error),
                    "bl_corrected_error" => r.bl_corrected_error,
                    "bound_rhs" => r.bound_rhs,
                    "error_gradient" => r.error_gradient,
                    "boundary_layer_norm" => r.boundary_layer_norm,
                    _ => None,
                };
                (r.eps, v)
            })
            .collect()
    }
}

/// Cell-problem figures reported alongside every sweep.
pub fn cell_summary(spec: &ProblemSpec, cs: &CorrectorSet) -> CellSummary {
    let dim = spec.dim;
    let a = cs.a_hom();
    CellSummary {
        a_hom: (0..dim).map(|r| (0..dim).map(|c| a.get(r, c)).collect()).collect(),
        chi_gradient_norms: (0..dim).map(|d| cs.chi_gradient_norm(d, 0)).collect(),
        chi_sup: cs.chi_sup(),
        residual: cs.residual(),
        alpha: spec.coefficient.alpha(),
        beta: spec.coefficient.beta(),
    }
}

/// All artefacts of one epsilon, kept for callers that need more than the
/// report row.
pub struct EpsilonRun {
    pub family: crate::pde_solvers::OscillatingFamily,
    pub boundary_layer: Option<BoundaryLayerField>,
    pub row: ReportRow,
}

/// Solves and measures one epsilon given the shared cell and homogenized
/// solutions.
pub fn run_epsilon(
    spec: &ProblemSpec,
    cs: &CorrectorSet,
    hom: &Homogenized,
    eps: f64,
) -> Result<EpsilonRun> {
    let a = &spec.coefficient;
    let family = solve_oscillating_family(spec, eps).map_err(|e| e.in_stage("oscillating family"))?;
    let with_layer = !(a.depends_on_x() || cs.is_x_dependent());
    let bl = if !with_layer {
        None
    } else if spec.dim == 1 {
        Some(boundary_layer_1d(hom, cs, a, eps))
    } else {
        Some(boundary_layer_2d(hom, cs, a, eps, spec.cg_tol))
    }
    .transpose()
    .map_err(|e| e.in_stage("boundary layer"))?;

    let metrics = || -> Result<ReportRow> {
        let avg = averaged_gradient_gap(&family, hom, None)?;
        let mut row = ReportRow {
            eps,
            h1_gap: corrector_h1_gap_of(&family, hom)?,
            avg_grad_error: avg,
            bl_corrected_error: bl
                .as_ref()
                .map(|b| averaged_gradient_gap(&family, hom, Some(b)))
                .transpose()?,
            bound_rhs: None,
            bound_ok: None,
            error_gradient: None,
            error_bound: None,
            boundary_layer_norm: None,
            boundary_layer_bound: None,
            iterations: family.iterations + bl.as_ref().map_or(0, |b| b.iterations),
        };
        if let (1, Some(b)) = (spec.dim, bl.as_ref()) {
            let rhs = bound_rhs_1d(a, cs, hom, eps)?;
            row.bound_rhs = Some(rhs);
            row.bound_ok = Some(avg <= BOUND_SLACK * rhs);
            row.error_gradient = Some(error_gradient_1d(&family, hom, cs, b)?.l2_norm());
            row.error_bound = Some(error_function_bound_1d(a, cs, hom, eps)?);
            row.boundary_layer_norm = b.dv.as_ref().map(|d| d.l2_norm());
            row.boundary_layer_bound = Some(boundary_layer_bound_1d(a, cs, hom)?);
        }
        Ok(row)
    };
    let row = metrics().map_err(|e| e.in_stage("metrics"))?;
    Ok(EpsilonRun {
        family,
        boundary_layer: bl,
        row,
    })
}

/// Cell and homogenized solves shared by every epsilon of a sweep.
pub fn prepare(spec: &ProblemSpec) -> Result<(CorrectorSet, Homogenized)> {
    spec.validate()?;
    let domain = spec.domain_grid()?;
    let cs = solve_correctors(&spec.coefficient, spec.m, spec.cg_tol, &domain)
        .map_err(|e| e.in_stage("cell problem"))?;
    let hom = solve_homogenized(spec, &cs).map_err(|e| e.in_stage("homogenized problem"))?;
    Ok((cs, hom))
}

fn fit_metrics(rows: &[ReportRow]) -> BTreeMap<String, RateFit> {
    let mut out = BTreeMap::new();
    let metrics: [(&str, fn(&ReportRow) -> Option<f64>); 3] = [
        ("h1_gap", |r| Some(r.h1_gap)),
        ("avg_grad_error", |r| Some(r.avg_grad_error)),
        ("bl_corrected_error", |r| r.bl_corrected_error),
    ];
    for (name, get) in metrics {
        let pairs: Option<Vec<(f64, f64)>> = rows.iter().map(|r| get(r).map(|v| (r.eps, v))).collect();
        match pairs.map(|p| fit_rate(&p)) {
            Some(Ok(fit)) => {
                out.insert(name.to_string(), fit);
            }
            Some(Err(e)) => log::info!("no rate for {name}: {e}"),
            None => {}
        }
    }
    out
}

/// Runs the whole study described by `spec`.
pub fn run_sweep(spec: &ProblemSpec) -> Result<ConvergenceReport> {
    run_sweep_with_config(spec, None)
}

pub fn run_sweep_with_config(spec: &ProblemSpec, config: Option<&RunConfig>) -> Result<ConvergenceReport> {
    let t = Instant::now();
    let (cs, hom) = prepare(spec)?;
    run_sweep_prepared(spec, config, &cs, &hom, t.elapsed().as_secs_f64())
}

/// The per-epsilon part of a sweep, given the output of [`prepare`] and the
/// time it took.
pub fn run_sweep_prepared(
    spec: &ProblemSpec,
    config: Option<&RunConfig>,
    cs: &CorrectorSet,
    hom: &Homogenized,
    prepare_seconds: f64,
) -> Result<ConvergenceReport> {
    let mut timings = vec![Timing {
        stage: "cell+homogenized".into(),
        seconds: prepare_seconds,
    }];
    let mut rows = Vec::with_capacity(spec.eps_list.len());
    for &eps in &spec.eps_list {
        let t = Instant::now();
        let run = run_epsilon(spec, cs, hom, eps)?;
        log::info!("eps = {eps}: avg_grad_error = {:.3e}", run.row.avg_grad_error);
        rows.push(run.row);
        timings.push(Timing {
            stage: format!("eps={eps}"),
            seconds: t.elapsed().as_secs_f64(),
        });
    }
    if rows.windows(2).any(|w| !(w[1].eps < w[0].eps)) {
        return Err(HomogError::Config("rows must have strictly decreasing eps".into()));
    }
    Ok(ConvergenceReport {
        spec: config.cloned(),
        cell: cell_summary(spec, cs),
        fitted_rates: fit_metrics(&rows),
        rows,
        timings,
    })
}
