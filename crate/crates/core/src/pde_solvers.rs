//! Dirichlet solvers for the homogenized problem and for the translated
//! oscillating family `-div_x[A(x, y + x/eps) grad_x u_eps(x, y)] = f(x)`.
//!
//! One-dimensional problems are integrated exactly in divergence form,
//! `u(x) = int_0^x (C - F)/a` with `F' = f`; two-dimensional problems use
//! bilinear FEM with the Dirichlet nodes eliminated.

use rayon::prelude::*;

use crate::cell_problems::CorrectorSet;
use crate::coefficients::{CoefficientField, Expr, Tensor2};
use crate::error::{HomogError, Result};
use crate::fem::Q1Mesh;
use crate::grids::{DomainField, DomainGrid, PeriodicGrid, TwoScaleField};
use crate::linalg::{conjugate_gradient, CgOptions, StencilMatrix};
use crate::two_scale_ops::CellShift;

/// Translation slices solved back to back with warm starts. Fixed so the
/// result does not depend on the worker count.
const SLICE_CHUNK: usize = 16;

/// Right-hand side `f(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Constant { value: f64 },
    /// `amp * prod_d sin(pi x_d / omega_d)`.
    SineProduct { amp: f64 },
    Expression { text: String, expr: Expr },
}

impl Source {
    pub fn eval(&self, x: [f64; 2], extents: &[f64]) -> f64 {
        match self {
            Source::Constant { value } => *value,
            Source::SineProduct { amp } => extents
                .iter()
                .enumerate()
                .map(|(d, w)| (std::f64::consts::PI * x[d] / w).sin())
                .product::<f64>()
                * amp,
            Source::Expression { expr, .. } => expr.eval(x, [0.0; 2]),
        }
    }

    /// `F(x_i) = int_0^{x_i} f` at the nodes of a 1D grid.
    pub fn antiderivative_1d(&self, grid: &DomainGrid) -> Vec<f64> {
        let w = grid.extents()[0];
        let xs: Vec<f64> = (0..grid.len()).map(|i| grid.coord(i)[0]).collect();
        match self {
            Source::Constant { value } => xs.iter().map(|x| value * x).collect(),
            Source::SineProduct { amp } => {
                let k = std::f64::consts::PI / w;
                xs.iter().map(|x| amp / k * (1.0 - (k * x).cos())).collect()
            }
            Source::Expression { .. } => {
                // Three-point Gauss-Legendre per interval.
                let g = 0.5 * (0.6f64).sqrt();
                let mut out = vec![0.0; xs.len()];
                for i in 1..xs.len() {
                    let (a, b) = (xs[i - 1], xs[i]);
                    let (c, h) = (0.5 * (a + b), b - a);
                    let f = |t: f64| self.eval([t, 0.0], &[w]);
                    let s = 5.0 * f(c - g * h) + 8.0 * f(c) + 5.0 * f(c + g * h);
                    out[i] = out[i - 1] + h * s / 18.0;
                }
                out
            }
        }
    }
}

/// All inputs of a homogenization study.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub dim: usize,
    pub extents: Vec<f64>,
    pub source: Source,
    pub coefficient: CoefficientField,
    /// Strictly decreasing.
    pub eps_list: Vec<f64>,
    /// Domain nodes per dimension.
    pub n: usize,
    /// Cell nodes per dimension.
    pub m: usize,
    /// Translation samples; must equal the number of cell nodes.
    pub my: usize,
    pub cg_tol: f64,
}

impl ProblemSpec {
    pub fn domain_grid(&self) -> Result<DomainGrid> {
        DomainGrid::new(self.dim, &self.extents, self.n)
    }

    pub fn cell_grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.dim, self.m)
    }

    /// Checks grids, the epsilon list and the translation count. In 1D every
    /// epsilon must admit the exact cell shift; in 2D an incompatible
    /// epsilon only disables the shift-based diagnostics.
    pub fn validate(&self) -> Result<()> {
        let d = self.domain_grid()?;
        let c = self.cell_grid()?;
        if self.coefficient.dim() != self.dim {
            return Err(HomogError::Config("coefficient dimension differs from dim".into()));
        }
        if self.my != c.len() {
            return Err(HomogError::Config(format!(
                "My must equal the number of cell nodes ({}), got {}",
                c.len(),
                self.my
            )));
        }
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return Err(HomogError::Config(format!("cg_tol {} not in (0, 1)", self.cg_tol)));
        }
        if self.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(HomogError::Config("eps_list must be strictly decreasing".into()));
        }
        for &eps in &self.eps_list {
            match CellShift::new(&d, &c, eps) {
                Ok(_) => {}
                Err(e) if self.dim == 1 => return Err(e),
                Err(_) if eps > 0.0 => {
                    log::warn!("eps = {eps} is not grid-compatible; exact-shift diagnostics skipped")
                }
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }
}

/// Exact 1D solution with its nodal derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct Dirichlet1d {
    pub u: Vec<f64>,
    pub du: Vec<f64>,
}

fn trapezoid(v: &[f64], h: f64) -> f64 {
    let n = v.len();
    h * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[n - 1]))
}

/// `-(a u')' = f`, `u(0) = u(omega) = 0`, from nodal `a` and `F` (the
/// antiderivative of `f`) by trapezoid quadrature.
pub fn solve_dirichlet_1d_flux(a_line: &[f64], f_anti: &[f64], h: f64) -> Result<Dirichlet1d> {
    if let Some((node, v)) = a_line.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(HomogError::NonpositiveCoefficient { node, value: *v });
    }
    let n = a_line.len();
    if f_anti.len() != n || n < 2 {
        return Err(HomogError::GridMismatch("coefficient and source lengths differ".into()));
    }
    let inv: Vec<f64> = a_line.iter().map(|v| 1.0 / v).collect();
    let fb: Vec<f64> = f_anti.iter().zip(&inv).map(|(f, b)| f * b).collect();
    let c = trapezoid(&fb, h) / trapezoid(&inv, h);
    let du: Vec<f64> = f_anti.iter().zip(&inv).map(|(f, b)| (c - f) * b).collect();
    let mut u = vec![0.0; n];
    for i in 1..n - 1 {
        u[i] = u[i - 1] + 0.5 * h * (du[i - 1] + du[i]);
    }
    Ok(Dirichlet1d { u, du })
}

pub fn solve_dirichlet_1d(a_line: &[f64], f: &Source, grid: &DomainGrid) -> Result<DomainField> {
    if grid.dim() != 1 {
        return Err(HomogError::GridMismatch("solve_dirichlet_1d needs a 1D grid".into()));
    }
    let sol = solve_dirichlet_1d_flux(a_line, &f.antiderivative_1d(grid), grid.spacing(0))?;
    DomainField::new(*grid, sol.u)
}

/// Solves `K u = load` with `u = boundary` on the boundary nodes of `grid`.
pub fn solve_dirichlet_system(
    mut k: StencilMatrix,
    mut load: Vec<f64>,
    boundary: &[f64],
    grid: &DomainGrid,
    tol: f64,
    x0: Option<&[f64]>,
) -> Result<(Vec<f64>, usize)> {
    let mask = grid.boundary_mask();
    k.eliminate_dirichlet(&mask, boundary, &mut load);
    let start: Option<Vec<f64>> = x0.map(|x| {
        x.iter()
            .zip(&mask)
            .zip(boundary)
            .map(|((v, m), b)| if *m { *b } else { *v })
            .collect()
    });
    let out = conjugate_gradient(
        &k,
        &load,
        start.as_deref(),
        CgOptions {
            tol,
            max_iter: 10 * grid.len(),
            project_constants: false,
        },
    )?;
    Ok((out.x, out.iterations))
}

/// Bilinear FEM for `-div(A grad u) = f`, homogeneous Dirichlet data; `coef`
/// is sampled at the Gauss points.
pub fn solve_dirichlet_2d(
    coef: impl Fn([f64; 2]) -> Tensor2,
    f: &Source,
    grid: &DomainGrid,
    tol: f64,
) -> Result<DomainField> {
    if grid.dim() != 2 {
        return Err(HomogError::GridMismatch("solve_dirichlet_2d needs a 2D grid".into()));
    }
    let mesh = Q1Mesh::domain(grid);
    let ext = grid.extents().to_vec();
    let k = mesh.assemble_stiffness(coef);
    let load = mesh.assemble_load(|x| f.eval(x, &ext));
    let zero = vec![0.0; grid.len()];
    let (u, _) = solve_dirichlet_system(k, load, &zero, grid, tol, None)?;
    DomainField::new(*grid, u)
}

/// Homogenized solution. The 1D path also keeps the exact `u0'` and, for
/// constant `a_hom`, `u0'' = -f / a_hom`.
#[derive(Debug, Clone, PartialEq)]
pub struct Homogenized {
    pub u0: DomainField,
    pub du: Option<Vec<f64>>,
    pub d2u: Option<Vec<f64>>,
    pub a_hom: Tensor2,
}

/// Bilinear interpolation of nodal tensors on a 2D domain grid.
fn interpolate_nodal(grid: &DomainGrid, values: &[Tensor2], x: [f64; 2]) -> Tensor2 {
    let n = grid.nodes_per_dim();
    let mut idx = [0usize; 2];
    let mut t = [0.0; 2];
    for d in 0..2 {
        let s = (x[d] / grid.spacing(d)).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        idx[d] = i;
        t[d] = s - i as f64;
    }
    let at = |a: usize, b: usize| values[grid.flat_index([idx[0] + a, idx[1] + b])];
    at(0, 0)
        .scaled((1.0 - t[0]) * (1.0 - t[1]))
        .add(&at(1, 0).scaled(t[0] * (1.0 - t[1])))
        .add(&at(0, 1).scaled((1.0 - t[0]) * t[1]))
        .add(&at(1, 1).scaled(t[0] * t[1]))
}

/// `-div(A_hom grad u0) = f` with the homogenized matrix from `cs`.
pub fn solve_homogenized(spec: &ProblemSpec, cs: &CorrectorSet) -> Result<Homogenized> {
    let grid = spec.domain_grid()?;
    let a_nodes: Vec<Tensor2> = (0..grid.len()).map(|i| cs.at(i).a_hom).collect();
    if spec.dim == 1 {
        let a_line: Vec<f64> = a_nodes.iter().map(|t| t.get(0, 0)).collect();
        let sol =
            solve_dirichlet_1d_flux(&a_line, &spec.source.antiderivative_1d(&grid), grid.spacing(0))?;
        let d2u = (!cs.is_x_dependent()).then(|| {
            (0..grid.len())
                .map(|i| -spec.source.eval(grid.coord(i), &spec.extents) / a_line[0])
                .collect()
        });
        return Ok(Homogenized {
            u0: DomainField::new(grid, sol.u)?,
            du: Some(sol.du),
            d2u,
            a_hom: cs.a_hom(),
        });
    }
    let u0 = if cs.is_x_dependent() {
        solve_dirichlet_2d(|x| interpolate_nodal(&grid, &a_nodes, x), &spec.source, &grid, spec.cg_tol)?
    } else {
        let a = cs.a_hom();
        solve_dirichlet_2d(|_| a, &spec.source, &grid, spec.cg_tol)?
    };
    Ok(Homogenized {
        u0,
        du: None,
        d2u: None,
        a_hom: cs.a_hom(),
    })
}

/// `u_eps(x, y_j)` for every translation node; in 1D also the exact
/// `d/dx u_eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatingFamily {
    pub eps: f64,
    pub u: TwoScaleField,
    pub du: Option<TwoScaleField>,
    pub iterations: usize,
}

fn warn_resolution(grid: &DomainGrid, eps: f64) {
    for d in 0..grid.dim() {
        let needed = 8.0 * grid.extents()[d] / eps;
        if (grid.nodes_per_dim() as f64) < needed {
            log::warn!(
                "eps = {eps}: {} nodes per dimension under-resolve the oscillation (want >= {})",
                grid.nodes_per_dim(),
                needed.ceil()
            );
        }
    }
}

/// Coefficient samples `a(x_i, y_j + x_i/eps)` along slice `j`, taken on
/// the cell lattice through the exact shift.
pub fn oscillating_line_1d(
    a: &CoefficientField,
    shift: &CellShift,
    domain: &DomainGrid,
    cell: &PeriodicGrid,
    j: usize,
) -> Vec<f64> {
    (0..domain.len())
        .map(|i| a.eval(domain.coord(i), cell.coord(shift.forward_index(i, j))).0[0][0])
        .collect()
}

/// `A(x, y + x/eps)`.
pub fn translated_coefficient(a: &CoefficientField, y: [f64; 2], eps: f64) -> impl Fn([f64; 2]) -> Tensor2 + '_ {
    move |x| a.eval(x, [y[0] + x[0] / eps, y[1] + x[1] / eps])
}

/// Runs `build(j) -> (stiffness, load, boundary values)` and the Dirichlet
/// solve for every slice, slices of one chunk warm-starting from their
/// predecessor. Results are in slice order.
pub(crate) fn solve_slices_2d<B>(
    grid: &DomainGrid,
    slices: usize,
    tol: f64,
    build: B,
) -> Result<(Vec<Vec<f64>>, usize)>
where
    B: Fn(usize) -> (StencilMatrix, Vec<f64>, Vec<f64>) + Sync,
{
    let chunks: Vec<Result<Vec<(Vec<f64>, usize)>>> = (0..slices.div_ceil(SLICE_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut out: Vec<(Vec<f64>, usize)> = Vec::new();
            for j in c * SLICE_CHUNK..((c + 1) * SLICE_CHUNK).min(slices) {
                let (k, load, bvals) = build(j);
                let x0 = out.last().map(|(x, _)| x.as_slice());
                let sol = solve_dirichlet_system(k, load, &bvals, grid, tol, x0)
                    .map_err(|e| e.in_slice(j))?;
                out.push(sol);
            }
            Ok(out)
        })
        .collect();
    let mut values = Vec::with_capacity(slices);
    let mut iterations = 0;
    for chunk in chunks {
        for (x, it) in chunk? {
            values.push(x);
            iterations += it;
        }
    }
    Ok((values, iterations))
}

/// One Dirichlet solve per translation node `y_j` with coefficient
/// `x -> A(x, y_j + x/eps)`.
pub fn solve_oscillating_family(spec: &ProblemSpec, eps: f64) -> Result<OscillatingFamily> {
    let domain = spec.domain_grid()?;
    let cell = spec.cell_grid()?;
    if spec.my != cell.len() {
        return Err(HomogError::Config("My must equal the number of cell nodes".into()));
    }
    warn_resolution(&domain, eps);
    let a = &spec.coefficient;
    if spec.dim == 1 {
        let shift = CellShift::new(&domain, &cell, eps)?;
        let f_anti = spec.source.antiderivative_1d(&domain);
        let h = domain.spacing(0);
        let slices = (0..cell.len())
            .into_par_iter()
            .map(|j| {
                let line = oscillating_line_1d(a, &shift, &domain, &cell, j);
                solve_dirichlet_1d_flux(&line, &f_anti, h).map_err(|e| e.in_slice(j))
            })
            .collect::<Result<Vec<_>>>()?;
        let u: Vec<Vec<f64>> = slices.iter().map(|s| s.u.clone()).collect();
        let du: Vec<Vec<f64>> = slices.into_iter().map(|s| s.du).collect();
        return Ok(OscillatingFamily {
            eps,
            u: TwoScaleField::from_y_slices(domain, cell, &u)?,
            du: Some(TwoScaleField::from_y_slices(domain, cell, &du)?),
            iterations: 0,
        });
    }
    let mesh = Q1Mesh::domain(&domain);
    let load = mesh.assemble_load(|x| spec.source.eval(x, &spec.extents));
    let zero = vec![0.0; domain.len()];
    let (u, iterations) = solve_slices_2d(&domain, cell.len(), spec.cg_tol, |j| {
        let k = mesh.assemble_stiffness(translated_coefficient(a, cell.coord(j), eps));
        (k, load.clone(), zero.clone())
    })?;
    Ok(OscillatingFamily {
        eps,
        u: TwoScaleField::from_y_slices(domain, cell, &u)?,
        du: None,
        iterations,
    })
}
