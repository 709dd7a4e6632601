//! Periodic cell problems `-div_y[A (grad_y chi_i + e_i)] = 0` and the
//! homogenized matrix `A_hom = <A (I + grad_y chi)>_Y`.
//!
//! In one dimension the cell equation integrates in closed form:
//! `a (1 + chi') = a_hom` with `a_hom = <1/a>^-1`. In two dimensions each
//! direction is a bilinear FEM solve on the periodic `M x M` cell grid,
//! with the constant nullspace projected out of the CG iteration.

use rayon::prelude::*;

use crate::coefficients::{CoefficientField, Tensor2};
use crate::error::{HomogError, Result};
use crate::fem::Q1Mesh;
use crate::grids::{DomainGrid, PeriodicGrid};
use crate::linalg::{conjugate_gradient, relative_residual, CgOptions};

pub const DEFAULT_CG_TOL: f64 = 1e-10;

/// Correctors at one slow-variable point.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSolution {
    /// Slow-variable point the cell problem was posed at.
    pub x: [f64; 2],
    /// Zero-mean nodal correctors, one per direction.
    pub chi: Vec<Vec<f64>>,
    /// Nodal `chi'` from the closed form (one dimension only).
    pub dchi: Option<Vec<f64>>,
    pub a_hom: Tensor2,
    pub residual: f64,
    pub iterations: usize,
}

/// Correctors and homogenized matrices; a single entry for y-only
/// coefficients, one entry per domain node otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorSet {
    cell_grid: PeriodicGrid,
    solutions: Vec<CellSolution>,
}

impl CorrectorSet {
    pub fn cell_grid(&self) -> &PeriodicGrid {
        &self.cell_grid
    }

    pub fn dim(&self) -> usize {
        self.cell_grid.dim()
    }

    pub fn is_x_dependent(&self) -> bool {
        self.solutions.len() > 1
    }

    pub fn solutions(&self) -> &[CellSolution] {
        &self.solutions
    }

    /// Correctors governing domain node `x_node`.
    pub fn at(&self, x_node: usize) -> &CellSolution {
        if self.solutions.len() == 1 {
            &self.solutions[0]
        } else {
            &self.solutions[x_node]
        }
    }

    pub fn chi(&self, dir: usize, x_node: usize) -> &[f64] {
        &self.at(x_node).chi[dir]
    }

    /// Homogenized matrix of the first (or only) cell problem.
    pub fn a_hom(&self) -> Tensor2 {
        self.solutions[0].a_hom
    }

    pub fn residual(&self) -> f64 {
        self.solutions.iter().fold(0.0, |m, s| m.max(s.residual))
    }

    /// Nodal sup-norm of all correctors.
    pub fn chi_sup(&self) -> f64 {
        self.solutions
            .iter()
            .flat_map(|s| s.chi.iter().flatten())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `|| grad_y chi_dir ||_{L^2(Y)}` for the cell problem at `x_node`.
    pub fn chi_gradient_norm(&self, dir: usize, x_node: usize) -> f64 {
        let s = self.at(x_node);
        match &s.dchi {
            Some(d) => (d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt(),
            None => Q1Mesh::periodic(&self.cell_grid).gradient_l2_norm(&s.chi[dir]),
        }
    }
}

fn check_positive(values: &[f64]) -> Result<()> {
    match values.iter().copied().find(|v| !(*v > 0.0)) {
        Some(v) => Err(HomogError::NotElliptic { min_eigenvalue: v }),
        None => Ok(()),
    }
}

fn cell_1d_at(a: &CoefficientField, x: [f64; 2], cell: &PeriodicGrid) -> Result<CellSolution> {
    let m = cell.len();
    let h = cell.spacing();
    let samples: Vec<f64> = (0..m).map(|j| a.eval(x, cell.coord(j)).0[0][0]).collect();
    check_positive(&samples)?;
    let a_hom = if samples.iter().all(|v| *v == samples[0]) {
        samples[0]
    } else {
        1.0 / (samples.iter().map(|v| 1.0 / v).sum::<f64>() / m as f64)
    };
    let dchi: Vec<f64> = samples.iter().map(|v| a_hom / v - 1.0).collect();
    let mut chi = vec![0.0; m];
    for j in 1..m {
        chi[j] = chi[j - 1] + 0.5 * h * (dchi[j - 1] + dchi[j]);
    }
    let mean = chi.iter().sum::<f64>() / m as f64;
    chi.iter_mut().for_each(|c| *c -= mean);
    let mut sol = CellSolution {
        x,
        chi: vec![chi],
        dchi: Some(dchi),
        a_hom: Tensor2::scalar(1, a_hom),
        residual: 0.0,
        iterations: 0,
    };
    sol.residual = residual_1d(&samples, &sol, h);
    Ok(sol)
}

/// Residual of the discrete 1D scheme: the trapezoid relation between
/// nodal `chi` and the closed-form `chi' = a_hom/a - 1`.
fn residual_1d(samples: &[f64], sol: &CellSolution, h: f64) -> f64 {
    let m = samples.len();
    let a_hom = sol.a_hom.get(0, 0);
    let d: Vec<f64> = samples.iter().map(|v| a_hom / v - 1.0).collect();
    let chi = &sol.chi[0];
    let (mut r2, mut b2) = (0.0, 0.0);
    for j in 0..m {
        let k = (j + 1) % m;
        let inc = 0.5 * h * (d[j] + d[k]);
        let r = (chi[k] - chi[j]) - inc;
        r2 += r * r;
        b2 += inc * inc;
    }
    if b2 == 0.0 {
        r2.sqrt()
    } else {
        (r2 / b2).sqrt()
    }
}

fn cell_2d_at(
    a: &CoefficientField,
    x: [f64; 2],
    cell: &PeriodicGrid,
    tol: f64,
) -> Result<CellSolution> {
    let mesh = Q1Mesh::periodic(cell);
    let coef = |y: [f64; 2]| a.eval(x, y);
    let k = mesh.assemble_stiffness(coef);
    let opts = CgOptions {
        tol,
        max_iter: 10 * cell.len(),
        project_constants: true,
    };
    let mut chi = Vec::with_capacity(2);
    let mut residual: f64 = 0.0;
    let mut iterations = 0;
    for dir in 0..2 {
        let rhs: Vec<f64> = mesh
            .assemble_flux_load(coef, dir)
            .into_iter()
            .map(|v| -v)
            .collect();
        let out = conjugate_gradient(&k, &rhs, None, opts)?;
        residual = residual.max(out.relative_residual);
        iterations += out.iterations;
        chi.push(out.x);
    }
    let mut sol = CellSolution {
        x,
        chi,
        dchi: None,
        a_hom: Tensor2::ZERO,
        residual,
        iterations,
    };
    sol.a_hom = a_hom_2d(a, &mesh, &sol);
    Ok(sol)
}

fn a_hom_2d(a: &CoefficientField, mesh: &Q1Mesh, sol: &CellSolution) -> Tensor2 {
    let mut out = Tensor2::ZERO;
    for dir in 0..2 {
        let mut col = [0.0; 2];
        mesh.for_each_gauss(&sol.chi[dir], |y, w, _, g| {
            let mut v = g;
            v[dir] += 1.0;
            let flux = a.eval(sol.x, y).apply(v);
            col[0] += w * flux[0];
            col[1] += w * flux[1];
        });
        out.0[0][dir] = col[0];
        out.0[1][dir] = col[1];
    }
    out
}

fn require_y_only(a: &CoefficientField) -> Result<()> {
    if a.depends_on_x() {
        return Err(HomogError::Unsupported(
            "coefficient depends on x; solve per domain node with solve_correctors".into(),
        ));
    }
    Ok(())
}

/// Closed-form 1D cell solve for a y-only coefficient.
pub fn solve_cell_1d(a: &CoefficientField, m: usize) -> Result<CorrectorSet> {
    if a.dim() != 1 {
        return Err(HomogError::Unsupported("solve_cell_1d needs dimension 1".into()));
    }
    require_y_only(a)?;
    let cell = PeriodicGrid::new(1, m)?;
    Ok(CorrectorSet {
        cell_grid: cell,
        solutions: vec![cell_1d_at(a, [0.0; 2], &cell)?],
    })
}

/// FEM cell solve on the periodic `M x M` grid for a y-only coefficient.
pub fn solve_cell_2d(a: &CoefficientField, m: usize, tol: f64) -> Result<CorrectorSet> {
    if a.dim() != 2 {
        return Err(HomogError::Unsupported("solve_cell_2d needs dimension 2".into()));
    }
    require_y_only(a)?;
    if m < 8 {
        return Err(HomogError::InvalidGrid(format!(
            "cell FEM needs M >= 8, got {m}"
        )));
    }
    let cell = PeriodicGrid::new(2, m)?;
    Ok(CorrectorSet {
        cell_grid: cell,
        solutions: vec![cell_2d_at(a, [0.0; 2], &cell, tol)?],
    })
}

/// Cell solves for any coefficient: once for y-only coefficients, otherwise
/// independently at every node of `domain`.
pub fn solve_correctors(
    a: &CoefficientField,
    m: usize,
    tol: f64,
    domain: &DomainGrid,
) -> Result<CorrectorSet> {
    if !a.depends_on_x() {
        return match a.dim() {
            1 => solve_cell_1d(a, m),
            _ => solve_cell_2d(a, m, tol),
        };
    }
    if domain.dim() != a.dim() {
        return Err(HomogError::GridMismatch(
            "domain and coefficient dimensions differ".into(),
        ));
    }
    if a.dim() == 2 && m < 8 {
        return Err(HomogError::InvalidGrid(format!(
            "cell FEM needs M >= 8, got {m}"
        )));
    }
    let cell = PeriodicGrid::new(a.dim(), m)?;
    let solutions = (0..domain.len())
        .into_par_iter()
        .map(|i| {
            let x = domain.coord(i);
            match a.dim() {
                1 => cell_1d_at(a, x, &cell),
                _ => cell_2d_at(a, x, &cell, tol),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrectorSet {
        cell_grid: cell,
        solutions,
    })
}

fn a_hom_of(a: &CoefficientField, cell: &PeriodicGrid, sol: &CellSolution) -> Tensor2 {
    match &sol.dchi {
        Some(d) => {
            let m = cell.len();
            let v = (0..m)
                .map(|j| a.eval(sol.x, cell.coord(j)).0[0][0] * (1.0 + d[j]))
                .sum::<f64>()
                / m as f64;
            Tensor2::scalar(1, v)
        }
        None => a_hom_2d(a, &Q1Mesh::periodic(cell), sol),
    }
}

/// `<A (I + grad_y chi)>_Y` recomputed from the stored correctors, using the
/// solver's quadrature. Fails for x-dependent sets; use `compute_a_hom_at`.
pub fn compute_a_hom(a: &CoefficientField, cs: &CorrectorSet) -> Result<Tensor2> {
    if cs.is_x_dependent() {
        return Err(HomogError::Unsupported(
            "A_hom varies with x; use compute_a_hom_at".into(),
        ));
    }
    Ok(a_hom_of(a, &cs.cell_grid, &cs.solutions[0]))
}

pub fn compute_a_hom_at(a: &CoefficientField, cs: &CorrectorSet, x_node: usize) -> Tensor2 {
    a_hom_of(a, &cs.cell_grid, cs.at(x_node))
}

/// Largest relative residual of the discrete cell equations over all
/// directions and cell problems.
pub fn cell_residual(a: &CoefficientField, cs: &CorrectorSet) -> f64 {
    let cell = cs.cell_grid;
    cs.solutions
        .iter()
        .map(|sol| {
            if sol.dchi.is_some() {
                let samples: Vec<f64> = (0..cell.len())
                    .map(|j| a.eval(sol.x, cell.coord(j)).0[0][0])
                    .collect();
                residual_1d(&samples, sol, cell.spacing())
            } else {
                let mesh = Q1Mesh::periodic(&cell);
                let coef = |y: [f64; 2]| a.eval(sol.x, y);
                let k = mesh.assemble_stiffness(coef);
                (0..2)
                    .map(|dir| {
                        let mut rhs: Vec<f64> = mesh
                            .assemble_flux_load(coef, dir)
                            .into_iter()
                            .map(|v| -v)
                            .collect();
                        let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
                        rhs.iter_mut().for_each(|v| *v -= mean);
                        relative_residual(&k, &sol.chi[dir], &rhs)
                    })
                    .fold(0.0, f64::max)
            }
        })
        .fold(0.0, f64::max)
}
