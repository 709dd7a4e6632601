//! First-order corrector `u1 = grad u0 . chi`, boundary layers `v_eps`, the
//! error function `e_eps = u_eps - u0 - eps [u1(x, y + x/eps) - v_eps]`, and
//! the convergence metrics with their explicit 1D bounds.
//!
//! Sup-norms `|a|_inf` and `|chi|_inf` are taken over sample nodes, so they
//! are lower bounds of the true suprema.

use crate::cell_problems::CorrectorSet;
use crate::coefficients::CoefficientField;
use crate::error::{HomogError, Result};
use crate::fem::{periodic_bilinear, Q1Mesh};
use crate::grids::{cell_average, gradient, DomainField, DomainGrid, L2Norm, TwoScaleField};
use crate::pde_solvers::{
    oscillating_line_1d, solve_slices_2d, translated_coefficient, Homogenized, OscillatingFamily,
};
use crate::two_scale_ops::CellShift;

/// Boundary layer `v_eps(x, y)`; the 1D path also keeps `d/dx v` and the
/// constant flux `c_eps(y) = a v'`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryLayerField {
    pub v: TwoScaleField,
    pub dv: Option<TwoScaleField>,
    pub c_profile: Option<Vec<f64>>,
    pub iterations: usize,
}

/// Nodal `grad u0`, exact when the solver kept it.
pub fn u0_gradient(hom: &Homogenized) -> Vec<Vec<f64>> {
    match &hom.du {
        Some(du) => vec![du.clone()],
        None => gradient(&hom.u0).into_iter().map(|g| g.into_values()).collect(),
    }
}

fn product_corrector(grad: &[Vec<f64>], domain: &DomainGrid, cs: &CorrectorSet) -> Result<TwoScaleField> {
    let cell = *cs.cell_grid();
    if cell.dim() != domain.dim() {
        return Err(HomogError::GridMismatch("corrector and domain dimensions differ".into()));
    }
    let my = cell.len();
    let mut values = vec![0.0; domain.len() * my];
    for i in 0..domain.len() {
        let s = cs.at(i);
        for (d, g) in grad.iter().enumerate() {
            let gi = g[i];
            for (out, c) in values[i * my..(i + 1) * my].iter_mut().zip(&s.chi[d]) {
                *out += gi * c;
            }
        }
    }
    TwoScaleField::new(*domain, cell, values)
}

/// `u1(x, y) = grad u0(x) . chi(x, y)` with finite-difference `grad u0`.
pub fn first_order_corrector(u0: &DomainField, cs: &CorrectorSet) -> Result<TwoScaleField> {
    let grad: Vec<Vec<f64>> = gradient(u0).into_iter().map(|g| g.into_values()).collect();
    product_corrector(&grad, u0.grid(), cs)
}

/// `u1` from a homogenized solution, using its exact gradient when present.
pub fn first_order_corrector_of(hom: &Homogenized, cs: &CorrectorSet) -> Result<TwoScaleField> {
    product_corrector(&u0_gradient(hom), hom.u0.grid(), cs)
}

fn require_y_only(a: &CoefficientField, cs: &CorrectorSet) -> Result<()> {
    if a.depends_on_x() || cs.is_x_dependent() {
        return Err(HomogError::Unsupported(
            "boundary layers need a coefficient of y only".into(),
        ));
    }
    Ok(())
}

/// Closed-form 1D boundary layer: `v' = c_eps(y) / a(y + x/eps)` with
/// `c_eps(y) = [chi(y + omega/eps) u0'(omega) - chi(y) u0'(0)] / int_0^omega 1/a(y + t/eps) dt`.
pub fn boundary_layer_1d(
    hom: &Homogenized,
    cs: &CorrectorSet,
    a: &CoefficientField,
    eps: f64,
) -> Result<BoundaryLayerField> {
    if a.dim() != 1 {
        return Err(HomogError::Unsupported("boundary_layer_1d needs dimension 1".into()));
    }
    require_y_only(a, cs)?;
    let domain = *hom.u0.grid();
    let cell = *cs.cell_grid();
    let shift = CellShift::new(&domain, &cell, eps)?;
    let du0 = &u0_gradient(hom)[0];
    let (left, right) = (du0[0], du0[domain.len() - 1]);
    let chi = cs.chi(0, 0);
    let last = domain.len() - 1;
    let h = domain.spacing(0);

    let mut v = Vec::with_capacity(cell.len());
    let mut dv = Vec::with_capacity(cell.len());
    let mut c_profile = Vec::with_capacity(cell.len());
    for j in 0..cell.len() {
        let line = oscillating_line_1d(a, &shift, &domain, &cell, j);
        if let Some((node, value)) = line.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(HomogError::NonpositiveCoefficient { node, value: *value });
        }
        let inv: Vec<f64> = line.iter().map(|v| 1.0 / v).collect();
        let mut cum = vec![0.0; inv.len()];
        for i in 1..inv.len() {
            cum[i] = cum[i - 1] + 0.5 * h * (inv[i - 1] + inv[i]);
        }
        let start = left * chi[j];
        let end = right * chi[shift.forward_index(last, j)];
        let c = (end - start) / cum[last];
        let mut vj: Vec<f64> = cum.iter().map(|s| start + c * s).collect();
        vj[last] = end;
        v.push(vj);
        dv.push(inv.iter().map(|b| c * b).collect::<Vec<f64>>());
        c_profile.push(c);
    }
    Ok(BoundaryLayerField {
        v: TwoScaleField::from_y_slices(domain, cell, &v)?,
        dv: Some(TwoScaleField::from_y_slices(domain, cell, &dv)?),
        c_profile: Some(c_profile),
        iterations: 0,
    })
}

/// Per translation node, FEM solve of `div(A(y_j + x/eps) grad v) = 0` with
/// `v = grad u0 . chi(y_j + x/eps)` on the boundary (`chi` interpolated
/// bilinearly on the cell grid).
pub fn boundary_layer_2d(
    hom: &Homogenized,
    cs: &CorrectorSet,
    a: &CoefficientField,
    eps: f64,
    tol: f64,
) -> Result<BoundaryLayerField> {
    if a.dim() != 2 {
        return Err(HomogError::Unsupported("boundary_layer_2d needs dimension 2".into()));
    }
    require_y_only(a, cs)?;
    let domain = *hom.u0.grid();
    let cell = *cs.cell_grid();
    let mesh = Q1Mesh::domain(&domain);
    let grad = u0_gradient(hom);
    let mask = domain.boundary_mask();
    let boundary: Vec<usize> = (0..domain.len()).filter(|i| mask[*i]).collect();
    let zero = vec![0.0; domain.len()];
    let (v, iterations) = solve_slices_2d(&domain, cell.len(), tol, |j| {
        let y = cell.coord(j);
        let k = mesh.assemble_stiffness(translated_coefficient(a, y, eps));
        let mut bvals = vec![0.0; domain.len()];
        for &i in &boundary {
            let x = domain.coord(i);
            let s = [y[0] + x[0] / eps, y[1] + x[1] / eps];
            bvals[i] = (0..2)
                .map(|d| grad[d][i] * periodic_bilinear(&cell, cs.chi(d, 0), s))
                .sum();
        }
        (k, zero.clone(), bvals)
    })?;
    Ok(BoundaryLayerField {
        v: TwoScaleField::from_y_slices(domain, cell, &v)?,
        dv: None,
        c_profile: None,
        iterations,
    })
}

/// `e_eps = u_eps - u0 - eps [u1(x, y + x/eps) - v]`, the `u1` term moved by
/// the exact cell shift.
pub fn error_function(
    u_eps: &TwoScaleField,
    u0: &DomainField,
    u1: &TwoScaleField,
    v: &TwoScaleField,
    eps: f64,
) -> Result<TwoScaleField> {
    u_eps.same_grids(u1)?;
    u_eps.same_grids(v)?;
    let shift = CellShift::new(u_eps.domain_grid(), u_eps.cell_grid(), eps)?;
    let base = u_eps.sub_domain(u0)?;
    let my = u_eps.cell_grid().len();
    let mut values = base.values().to_vec();
    for i in 0..u_eps.domain_grid().len() {
        for j in 0..my {
            let k = shift.forward_index(i, j);
            values[i * my + j] -= eps * (u1.get(i, k) - v.get(i, j));
        }
    }
    TwoScaleField::new(*u_eps.domain_grid(), *u_eps.cell_grid(), values)
}

/// Exact nodal `d/dx e_eps` in 1D:
/// `u_eps' - u0' (1 + chi'(s)) - eps chi(s) u0'' + eps v'`, `s = y + x/eps`.
pub fn error_gradient_1d(
    fam: &OscillatingFamily,
    hom: &Homogenized,
    cs: &CorrectorSet,
    bl: &BoundaryLayerField,
) -> Result<TwoScaleField> {
    let missing = || HomogError::Unsupported("exact 1D derivatives unavailable".into());
    let du_eps = fam.du.as_ref().ok_or_else(missing)?;
    let du0 = hom.du.as_ref().ok_or_else(missing)?;
    let d2u0 = hom.d2u.as_ref().ok_or_else(missing)?;
    let dv = bl.dv.as_ref().ok_or_else(missing)?;
    if cs.is_x_dependent() {
        return Err(HomogError::Unsupported("exact error gradient needs y-only coefficients".into()));
    }
    let eps = fam.eps;
    let domain = *fam.u.domain_grid();
    let cell = *fam.u.cell_grid();
    let shift = CellShift::new(&domain, &cell, eps)?;
    let sol = cs.at(0);
    let dchi = sol.dchi.as_ref().ok_or_else(missing)?;
    let chi = &sol.chi[0];
    let my = cell.len();
    let mut values = vec![0.0; domain.len() * my];
    for i in 0..domain.len() {
        for j in 0..my {
            let k = shift.forward_index(i, j);
            values[i * my + j] = du_eps.get(i, j) - du0[i] * (1.0 + dchi[k]) - eps * chi[k] * d2u0[i]
                + eps * dv.get(i, j);
        }
    }
    TwoScaleField::new(domain, cell, values)
}

fn h1_norm(diff: &DomainField, grad: &[Vec<f64>]) -> f64 {
    let l2 = diff.l2_norm().powi(2);
    let g: f64 = grad
        .iter()
        .map(|g| DomainField::new(*diff.grid(), g.clone()).map(|f| f.l2_norm().powi(2)).unwrap_or(0.0))
        .sum();
    (l2 + g).sqrt()
}

/// `|| <u_eps>_Y - u0 ||_{H^1}` with finite-difference gradients.
pub fn corrector_h1_gap(u_eps: &TwoScaleField, u0: &DomainField) -> Result<f64> {
    let diff = cell_average(u_eps).add_scaled(-1.0, u0)?;
    let grad: Vec<Vec<f64>> = gradient(&diff).into_iter().map(|g| g.into_values()).collect();
    Ok(h1_norm(&diff, &grad))
}

/// The same gap from the solvers' own derivatives: exact nodal values in
/// 1D, the Q1 elementwise gradient in 2D.
pub fn corrector_h1_gap_of(fam: &OscillatingFamily, hom: &Homogenized) -> Result<f64> {
    let diff = cell_average(&fam.u).add_scaled(-1.0, &hom.u0)?;
    match (&fam.du, &hom.du) {
        (Some(du_eps), Some(du0)) => {
            let g: Vec<f64> = cell_average(du_eps)
                .values()
                .iter()
                .zip(du0)
                .map(|(p, q)| p - q)
                .collect();
            Ok(h1_norm(&diff, &[g]))
        }
        _ => {
            let mesh = Q1Mesh::domain(diff.grid());
            Ok((diff.l2_norm().powi(2) + mesh.gradient_l2_norm(diff.values()).powi(2)).sqrt())
        }
    }
}

/// `|| <grad u_eps>_Y - grad u0 + eps <grad v>_Y ||_{L^2}`; without a boundary
/// layer, `|| <grad u_eps>_Y - grad u0 ||`.
pub fn averaged_gradient_gap(
    fam: &OscillatingFamily,
    hom: &Homogenized,
    bl: Option<&BoundaryLayerField>,
) -> Result<f64> {
    let eps = fam.eps;
    match (&fam.du, &hom.du) {
        (Some(du_eps), Some(du0)) => {
            let mut g = cell_average(du_eps).add_scaled(-1.0, &DomainField::new(*hom.u0.grid(), du0.clone())?)?;
            if let Some(bl) = bl {
                let dv = bl
                    .dv
                    .as_ref()
                    .ok_or_else(|| HomogError::Unsupported("boundary layer lacks v'".into()))?;
                g = g.add_scaled(eps, &cell_average(dv))?;
            }
            Ok(g.l2_norm())
        }
        _ => {
            let mut diff = cell_average(&fam.u).add_scaled(-1.0, &hom.u0)?;
            if let Some(bl) = bl {
                diff = diff.add_scaled(eps, &cell_average(&bl.v))?;
            }
            Ok(Q1Mesh::domain(diff.grid()).gradient_l2_norm(diff.values()))
        }
    }
}

/// Sampled constants `|a|_inf |chi|_inf / alpha`.
fn corrector_constant(a: &CoefficientField, cs: &CorrectorSet) -> f64 {
    a.beta() * cs.chi_sup() / a.alpha()
}

fn required<'a>(v: &'a Option<Vec<f64>>, what: &str) -> Result<&'a [f64]> {
    v.as_deref()
        .ok_or_else(|| HomogError::Unsupported(format!("{what} unavailable for this run")))
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn line_l2(v: &[f64], grid: &DomainGrid) -> Result<f64> {
    Ok(DomainField::new(*grid, v.to_vec())?.l2_norm())
}

/// `2 eps (|a|_inf |chi|_inf / alpha) (|u0'|_inf + ||u0''||)`.
pub fn bound_rhs_1d(a: &CoefficientField, cs: &CorrectorSet, hom: &Homogenized, eps: f64) -> Result<f64> {
    if a.dim() != 1 {
        return Err(HomogError::Unsupported("bound_rhs_1d needs dimension 1".into()));
    }
    let du = required(&hom.du, "u0'")?;
    let d2u = required(&hom.d2u, "u0''")?;
    Ok(2.0 * eps * corrector_constant(a, cs) * (sup(du) + line_l2(d2u, hom.u0.grid())?))
}

/// `eps (|a|_inf |chi|_inf / alpha) ||u0''||`, the bound on `||d/dx e_eps||`.
pub fn error_function_bound_1d(
    a: &CoefficientField,
    cs: &CorrectorSet,
    hom: &Homogenized,
    eps: f64,
) -> Result<f64> {
    let d2u = required(&hom.d2u, "u0''")?;
    Ok(eps * corrector_constant(a, cs) * line_l2(d2u, hom.u0.grid())?)
}

/// `(2/alpha) |a|_inf |chi|_inf |u0'|_inf`, the uniform bound on `||v'||`.
/// Written for a unit-length interval.
pub fn boundary_layer_bound_1d(a: &CoefficientField, cs: &CorrectorSet, hom: &Homogenized) -> Result<f64> {
    let du = required(&hom.du, "u0'")?;
    Ok(2.0 * corrector_constant(a, cs) * sup(du))
}

/// `| int int d/dx u_eps(x, y - x/eps) psi - int int (u0' + d/dy u1) psi |` in
/// 1D, with `d/dy u1 = u0' chi'(y)`.
pub fn weak_two_scale_gap_1d(
    fam: &OscillatingFamily,
    hom: &Homogenized,
    cs: &CorrectorSet,
    psi: &TwoScaleField,
) -> Result<f64> {
    let missing = || HomogError::Unsupported("exact 1D derivatives unavailable".into());
    let du_eps = fam.du.as_ref().ok_or_else(missing)?;
    let du0 = hom.du.as_ref().ok_or_else(missing)?;
    let domain = *fam.u.domain_grid();
    let cell = *fam.u.cell_grid();
    let my = cell.len();
    let mut limit = vec![0.0; domain.len() * my];
    for i in 0..domain.len() {
        let dchi = cs.at(i).dchi.as_ref().ok_or_else(missing)?;
        for j in 0..my {
            limit[i * my + j] = du0[i] * (1.0 + dchi[j]);
        }
    }
    let limit = TwoScaleField::new(domain, cell, limit)?;
    let pairing = crate::two_scale_ops::two_scale_pairing(du_eps, psi, fam.eps)?;
    Ok((pairing - limit.inner(psi)?).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell_problems::solve_cell_1d;
    use crate::coefficients::{CoefficientKind, Profile};
    use crate::pde_solvers::{solve_homogenized, solve_oscillating_family, ProblemSpec, Source};

    fn spec(a: CoefficientField) -> ProblemSpec {
        ProblemSpec {
            dim: 1,
            extents: vec![1.0],
            source: Source::Constant { value: 1.0 },
            coefficient: a,
            eps_list: vec![0.125],
            n: 513,
            m: 64,
            my: 64,
            cg_tol: 1e-10,
        }
    }

    fn cosine() -> CoefficientField {
        CoefficientField::new(
            1,
            CoefficientKind::Cosine1d(Profile {
                base: 2.0,
                amp: 1.0,
                freq: 1,
            }),
            &[1.0],
        )
        .unwrap()
    }

    #[test]
    fn corrector_product_and_zero_mean() {
        let a = cosine();
        let s = spec(a.clone());
        let cs = solve_cell_1d(&a, 64).unwrap();
        let hom = solve_homogenized(&s, &cs).unwrap();
        let u1 = first_order_corrector(&hom.u0, &cs).unwrap();
        let chi = cs.chi(0, 0);
        for j in 0..64 {
            assert!((u1.get(0, j) - chi[j] / (2.0 * 3f64.sqrt())).abs() < 1e-9);
        }
        for i in 0..s.n {
            assert!(u1.y_slice(i).iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_layer_matches_boundary_data() {
        let a = cosine();
        let s = spec(a.clone());
        let cs = solve_cell_1d(&a, 64).unwrap();
        let hom = solve_homogenized(&s, &cs).unwrap();
        let u1 = first_order_corrector_of(&hom, &cs).unwrap();
        let bl = boundary_layer_1d(&hom, &cs, &a, 0.125).unwrap();
        let shift = CellShift::new(hom.u0.grid(), cs.cell_grid(), 0.125).unwrap();
        let last = s.n - 1;
        for j in 0..64 {
            assert!((bl.v.get(0, j) - u1.get(0, j)).abs() < 1e-12);
            let k = shift.forward_index(last, j);
            assert!((bl.v.get(last, j) - u1.get(last, k)).abs() < 1e-12);
        }
        let bound = boundary_layer_bound_1d(&a, &cs, &hom).unwrap();
        assert!(bl.dv.as_ref().unwrap().l2_norm() <= bound);
    }

    #[test]
    fn constant_coefficient_gives_trivial_fields() {
        let a = CoefficientField::new(1, CoefficientKind::Constant { value: 3.0 }, &[1.0]).unwrap();
        let s = spec(a.clone());
        let cs = solve_cell_1d(&a, 64).unwrap();
        let hom = solve_homogenized(&s, &cs).unwrap();
        let fam = solve_oscillating_family(&s, 0.125).unwrap();
        let u1 = first_order_corrector_of(&hom, &cs).unwrap();
        let bl = boundary_layer_1d(&hom, &cs, &a, 0.125).unwrap();
        assert_eq!(u1.max_abs(), 0.0);
        assert_eq!(bl.v.max_abs(), 0.0);
        assert!(bl.c_profile.unwrap().iter().all(|c| *c == 0.0));
        let e = error_function(&fam.u, &hom.u0, &u1, &bl.v, 0.125).unwrap();
        assert!(e.max_abs() < 1e-12);
        assert!(corrector_h1_gap(&fam.u, &hom.u0).unwrap() <= 1e-10);
        assert_eq!(bound_rhs_1d(&a, &cs, &hom, 0.125).unwrap(), 0.0);
    }

    #[test]
    fn exact_error_gradient_matches_finite_differences() {
        let a = cosine();
        let s = spec(a.clone());
        let eps = 0.125;
        let cs = solve_cell_1d(&a, 64).unwrap();
        let hom = solve_homogenized(&s, &cs).unwrap();
        let fam = solve_oscillating_family(&s, eps).unwrap();
        let u1 = first_order_corrector_of(&hom, &cs).unwrap();
        let bl = boundary_layer_1d(&hom, &cs, &a, eps).unwrap();
        let e = error_function(&fam.u, &hom.u0, &u1, &bl.v, eps).unwrap();
        let de = error_gradient_1d(&fam, &hom, &cs, &bl).unwrap();
        // Boundary values of e vanish by construction.
        let last = s.n - 1;
        for j in 0..64 {
            assert!(e.get(0, j).abs() < 1e-12 && e.get(last, j).abs() < 1e-12);
        }
        // Trapezoid integral of e' reproduces e along a slice.
        let h = 1.0 / 512.0;
        let j = 9;
        let mut acc = 0.0;
        let mut worst: f64 = 0.0;
        for i in 1..s.n {
            acc += 0.5 * h * (de.get(i - 1, j) + de.get(i, j));
            worst = worst.max((acc - e.get(i, j)).abs());
        }
        assert!(worst < 1e-4 * de.max_abs(), "{worst}");
        let bound = error_function_bound_1d(&a, &cs, &hom, eps).unwrap();
        assert!(de.l2_norm() <= 1.01 * bound);
    }

    #[test]
    fn bound_is_linear_in_eps() {
        let a = cosine();
        let s = spec(a.clone());
        let cs = solve_cell_1d(&a, 64).unwrap();
        let hom = solve_homogenized(&s, &cs).unwrap();
        let b1 = bound_rhs_1d(&a, &cs, &hom, 0.125).unwrap();
        let b2 = bound_rhs_1d(&a, &cs, &hom, 0.25).unwrap();
        assert_eq!(b2, 2.0 * b1);
        let du = hom.du.as_ref().unwrap();
        assert!((sup(du) - 1.0 / (2.0 * 3f64.sqrt())).abs() < 1e-9);
        let d2 = line_l2(hom.d2u.as_ref().unwrap(), hom.u0.grid()).unwrap();
        assert!((d2 - 1.0 / 3f64.sqrt()).abs() < 1e-9);
    }
}
