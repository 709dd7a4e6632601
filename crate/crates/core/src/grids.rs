//! Structured grids on the box domain and on the periodic unit cell, and the
//! nodal fields of one and two variables that live on them.
//!
//! Periodic grids store `M` nodes per dimension at `i/M` with wrap-around
//! indexing; there is no duplicated seam node at `y = 1`, so the equal-weight
//! mean is the periodic trapezoidal rule. Domain grids carry both boundary
//! faces and use the composite trapezoidal rule.

use serde::{Deserialize, Serialize};

use crate::error::{HomogError, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 2;

/// Uniform grid on the unit torus `[0, 1)^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    dim: usize,
    nodes_per_dim: usize,
}

impl PeriodicGrid {
    pub fn new(dim: usize, nodes_per_dim: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(HomogError::InvalidGrid(format!(
                "dimension {dim} not supported (expected 1 or 2)"
            )));
        }
        if nodes_per_dim < 2 {
            return Err(HomogError::InvalidGrid(format!(
                "M too small: {nodes_per_dim} nodes per dimension, need at least 2"
            )));
        }
        Ok(Self { dim, nodes_per_dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes_per_dim(&self) -> usize {
        self.nodes_per_dim
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.nodes_per_dim as f64
    }

    pub fn len(&self) -> usize {
        self.nodes_per_dim.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Multi-index of a flat node index; the first coordinate runs fastest.
    pub fn multi_index(&self, flat: usize) -> [usize; 2] {
        let m = self.nodes_per_dim;
        if self.dim == 1 {
            [flat, 0]
        } else {
            [flat % m, flat / m]
        }
    }

    pub fn flat_index(&self, mi: [usize; 2]) -> usize {
        if self.dim == 1 {
            mi[0]
        } else {
            mi[0] + self.nodes_per_dim * mi[1]
        }
    }

    /// Reduces a signed index modulo `M`.
    pub fn wrap(&self, i: i64) -> usize {
        i.rem_euclid(self.nodes_per_dim as i64) as usize
    }

    pub fn coord(&self, flat: usize) -> [f64; 2] {
        let mi = self.multi_index(flat);
        let h = self.spacing();
        let mut y = [0.0; 2];
        for d in 0..self.dim {
            y[d] = mi[d] as f64 * h;
        }
        y
    }
}

/// Tensor-product grid on the box `[0, extent_1] x ... x [0, extent_dim]`
/// with `N` nodes per dimension, both faces included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainGrid {
    dim: usize,
    extents: [f64; 2],
    nodes_per_dim: usize,
}

impl DomainGrid {
    pub fn new(dim: usize, extents: &[f64], nodes_per_dim: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(HomogError::InvalidGrid(format!(
                "dimension {dim} not supported (expected 1 or 2)"
            )));
        }
        if extents.len() != dim {
            return Err(HomogError::InvalidGrid(format!(
                "{} extents given for a {dim}-dimensional domain",
                extents.len()
            )));
        }
        if let Some(bad) = extents.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
            return Err(HomogError::InvalidGrid(format!("nonpositive extent {bad}")));
        }
        if nodes_per_dim < 3 {
            return Err(HomogError::InvalidGrid(format!(
                "N too small: {nodes_per_dim} nodes per dimension, need at least 3"
            )));
        }
        let mut ext = [0.0; 2];
        ext[..dim].copy_from_slice(extents);
        Ok(Self {
            dim,
            extents: ext,
            nodes_per_dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents[..self.dim]
    }

    pub fn nodes_per_dim(&self) -> usize {
        self.nodes_per_dim
    }

    pub fn intervals(&self) -> usize {
        self.nodes_per_dim - 1
    }

    pub fn spacing(&self, d: usize) -> f64 {
        self.extents[d] / self.intervals() as f64
    }

    pub fn len(&self) -> usize {
        self.nodes_per_dim.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lebesgue measure of the box.
    pub fn measure(&self) -> f64 {
        self.extents().iter().product()
    }

    pub fn multi_index(&self, flat: usize) -> [usize; 2] {
        let n = self.nodes_per_dim;
        if self.dim == 1 {
            [flat, 0]
        } else {
            [flat % n, flat / n]
        }
    }

    pub fn flat_index(&self, mi: [usize; 2]) -> usize {
        if self.dim == 1 {
            mi[0]
        } else {
            mi[0] + self.nodes_per_dim * mi[1]
        }
    }

    pub fn coord(&self, flat: usize) -> [f64; 2] {
        let mi = self.multi_index(flat);
        let mut x = [0.0; 2];
        for d in 0..self.dim {
            x[d] = if mi[d] == self.intervals() {
                self.extents[d]
            } else {
                mi[d] as f64 * self.spacing(d)
            };
        }
        x
    }

    pub fn is_boundary(&self, flat: usize) -> bool {
        let mi = self.multi_index(flat);
        (0..self.dim).any(|d| mi[d] == 0 || mi[d] == self.intervals())
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.is_boundary(i)).collect()
    }

    /// Whether `x` lies in the closed box, up to a relative rounding margin.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() >= self.dim
            && (0..self.dim).all(|d| {
                let tol = 1e-12 * self.extents[d];
                x[d] >= -tol && x[d] <= self.extents[d] + tol
            })
    }

    /// Composite trapezoidal weights, tensorised.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let n = self.nodes_per_dim;
        let line = |d: usize| -> Vec<f64> {
            let h = self.spacing(d);
            (0..n)
                .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
                .collect()
        };
        if self.dim == 1 {
            line(0)
        } else {
            let (w0, w1) = (line(0), line(1));
            (0..self.len())
                .map(|k| w0[k % n] * w1[k / n])
                .collect()
        }
    }
}

/// Nodal values of a function of the slow variable `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainField {
    grid: DomainGrid,
    values: Vec<f64>,
}

impl DomainField {
    pub fn new(grid: DomainGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(HomogError::GridMismatch(format!(
                "{} values for a domain grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: DomainGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: DomainGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coord(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &DomainGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, scale: f64, other: &DomainField) -> Result<DomainField> {
        check_domain(&self.grid, &other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + scale * b)
            .collect();
        Ok(DomainField {
            grid: self.grid,
            values,
        })
    }

    pub fn scaled(&self, scale: f64) -> DomainField {
        DomainField {
            grid: self.grid,
            values: self.values.iter().map(|v| scale * v).collect(),
        }
    }
}

/// Nodal values of a function of `(x, y)` on a domain grid times a periodic
/// cell grid. Storage is x-major: the y-slice of domain node `i` is the
/// contiguous block `values[i * M^dim .. (i + 1) * M^dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoScaleField {
    domain: DomainGrid,
    cell: PeriodicGrid,
    values: Vec<f64>,
}

impl TwoScaleField {
    pub fn new(domain: DomainGrid, cell: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if domain.dim() != cell.dim() {
            return Err(HomogError::GridMismatch(format!(
                "domain dimension {} differs from cell dimension {}",
                domain.dim(),
                cell.dim()
            )));
        }
        if values.len() != domain.len() * cell.len() {
            return Err(HomogError::GridMismatch(format!(
                "{} values for {} x {} two-scale nodes",
                values.len(),
                domain.len(),
                cell.len()
            )));
        }
        Ok(Self {
            domain,
            cell,
            values,
        })
    }

    pub fn zeros(domain: DomainGrid, cell: PeriodicGrid) -> Self {
        Self {
            domain,
            cell,
            values: vec![0.0; domain.len() * cell.len()],
        }
    }

    pub fn from_fn(
        domain: DomainGrid,
        cell: PeriodicGrid,
        f: impl Fn([f64; 2], [f64; 2]) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(domain.len() * cell.len());
        for i in 0..domain.len() {
            let x = domain.coord(i);
            for j in 0..cell.len() {
                values.push(f(x, cell.coord(j)));
            }
        }
        Self {
            domain,
            cell,
            values,
        }
    }

    /// Builds a field from per-translation slices: `slices[j][i]` is the value
    /// at domain node `i` and cell node `j`.
    pub fn from_y_slices(
        domain: DomainGrid,
        cell: PeriodicGrid,
        slices: &[Vec<f64>],
    ) -> Result<Self> {
        if slices.len() != cell.len() || slices.iter().any(|s| s.len() != domain.len()) {
            return Err(HomogError::GridMismatch(
                "slice count or slice length does not match the grids".into(),
            ));
        }
        let my = cell.len();
        let mut values = vec![0.0; domain.len() * my];
        for (j, slice) in slices.iter().enumerate() {
            for (i, v) in slice.iter().enumerate() {
                values[i * my + j] = *v;
            }
        }
        Ok(Self {
            domain,
            cell,
            values,
        })
    }

    /// Extends a y-independent field.
    pub fn from_domain(u: &DomainField, cell: PeriodicGrid) -> Self {
        let my = cell.len();
        let values = u
            .values()
            .iter()
            .flat_map(|v| std::iter::repeat_n(*v, my))
            .collect();
        Self {
            domain: *u.grid(),
            cell,
            values,
        }
    }

    pub fn domain_grid(&self) -> &DomainGrid {
        &self.domain
    }

    pub fn cell_grid(&self) -> &PeriodicGrid {
        &self.cell
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, x_node: usize, y_node: usize) -> f64 {
        self.values[x_node * self.cell.len() + y_node]
    }

    /// Values at a fixed domain node, indexed by cell node.
    pub fn y_slice(&self, x_node: usize) -> &[f64] {
        let my = self.cell.len();
        &self.values[x_node * my..(x_node + 1) * my]
    }

    /// Values at a fixed cell node, indexed by domain node.
    pub fn x_slice(&self, y_node: usize) -> Vec<f64> {
        let my = self.cell.len();
        (0..self.domain.len())
            .map(|i| self.values[i * my + y_node])
            .collect()
    }

    pub fn same_grids(&self, other: &TwoScaleField) -> Result<()> {
        check_domain(&self.domain, &other.domain)?;
        if self.cell != other.cell {
            return Err(HomogError::GridMismatch(format!(
                "cell grids differ: {:?} vs {:?}",
                self.cell, other.cell
            )));
        }
        Ok(())
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, scale: f64, other: &TwoScaleField) -> Result<TwoScaleField> {
        self.same_grids(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + scale * b)
            .collect();
        Ok(TwoScaleField {
            values,
            ..self.clone_grids()
        })
    }

    /// `self - u(x)` for a y-independent `u`.
    pub fn sub_domain(&self, u: &DomainField) -> Result<TwoScaleField> {
        check_domain(&self.domain, u.grid())?;
        let my = self.cell.len();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| v - u.values()[k / my])
            .collect();
        Ok(TwoScaleField {
            values,
            ..self.clone_grids()
        })
    }

    pub fn scaled(&self, scale: f64) -> TwoScaleField {
        TwoScaleField {
            values: self.values.iter().map(|v| scale * v).collect(),
            ..self.clone_grids()
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Quadrature of `u * psi` over `Omega x Y`.
    pub fn inner(&self, other: &TwoScaleField) -> Result<f64> {
        self.same_grids(other)?;
        let w = self.domain.quadrature_weights();
        let my = self.cell.len();
        let mut total = 0.0;
        for (i, wi) in w.iter().enumerate() {
            let a = &self.values[i * my..(i + 1) * my];
            let b = &other.values[i * my..(i + 1) * my];
            let dot: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
            total += wi * dot / my as f64;
        }
        Ok(total)
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> TwoScaleField {
        debug_assert_eq!(values.len(), self.values.len());
        TwoScaleField {
            values,
            ..self.clone_grids()
        }
    }

    fn clone_grids(&self) -> TwoScaleField {
        TwoScaleField {
            domain: self.domain,
            cell: self.cell,
            values: Vec::new(),
        }
    }
}

pub(crate) fn check_domain(a: &DomainGrid, b: &DomainGrid) -> Result<()> {
    if a != b {
        return Err(HomogError::GridMismatch(format!(
            "domain grids differ: {a:?} vs {b:?}"
        )));
    }
    Ok(())
}

pub fn build_periodic_grid(dim: usize, nodes_per_dim: usize) -> Result<PeriodicGrid> {
    PeriodicGrid::new(dim, nodes_per_dim)
}

pub fn build_domain_grid(dim: usize, extents: &[f64], nodes_per_dim: usize) -> Result<DomainGrid> {
    DomainGrid::new(dim, extents, nodes_per_dim)
}

/// Equal-weight mean over the cell nodes at every domain node.
pub fn cell_average(u: &TwoScaleField) -> DomainField {
    let my = u.cell.len() as f64;
    let values = u
        .values
        .chunks_exact(u.cell.len())
        .map(|c| c.iter().sum::<f64>() / my)
        .collect();
    DomainField {
        grid: u.domain,
        values,
    }
}

/// Discrete `L^2` norm: trapezoid over the domain, plain mean over the cell.
pub trait L2Norm {
    fn l2_norm(&self) -> f64;
}

impl L2Norm for DomainField {
    fn l2_norm(&self) -> f64 {
        let w = self.grid.quadrature_weights();
        w.iter()
            .zip(&self.values)
            .map(|(w, v)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }
}

impl L2Norm for TwoScaleField {
    fn l2_norm(&self) -> f64 {
        self.inner(self).unwrap_or(0.0).max(0.0).sqrt()
    }
}

pub fn l2_norm<T: L2Norm + ?Sized>(u: &T) -> f64 {
    u.l2_norm()
}

/// Finite-difference gradient: central in the interior, second-order
/// one-sided at the boundary faces. One field per coordinate direction.
pub fn gradient(u: &DomainField) -> Vec<DomainField> {
    let g = u.grid;
    let n = g.nodes_per_dim();
    (0..g.dim())
        .map(|d| {
            let h = g.spacing(d);
            let stride = if d == 0 { 1 } else { n };
            let values = (0..g.len())
                .map(|k| {
                    let i = g.multi_index(k)[d];
                    let at = |off: i64| u.values[(k as i64 + off * stride as i64) as usize];
                    if i == 0 {
                        (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
                    } else if i == n - 1 {
                        (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h)
                    } else {
                        (at(1) - at(-1)) / (2.0 * h)
                    }
                })
                .collect();
            DomainField { grid: g, values }
        })
        .collect()
}

/// `L^2` norm of the finite-difference gradient.
pub fn h1_seminorm(u: &DomainField) -> f64 {
    gradient(u)
        .iter()
        .map(|c| c.l2_norm().powi(2))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn periodic_grid_nodes() {
        let g = build_periodic_grid(1, 8).unwrap();
        assert_eq!(g.len(), 8);
        let ys: Vec<f64> = (0..8).map(|j| g.coord(j)[0]).collect();
        assert_eq!(ys, (0..8).map(|j| j as f64 / 8.0).collect::<Vec<_>>());

        let g2 = build_periodic_grid(2, 4).unwrap();
        assert_eq!(g2.len(), 16);
        assert_eq!(g2.spacing(), 0.25);
        assert_eq!(g2.wrap(-1), 3);
        assert_eq!(g2.wrap(4), 0);
    }

    #[test]
    fn periodic_grid_rejects_bad_input() {
        let err = build_periodic_grid(1, 1).unwrap_err();
        assert!(err.to_string().contains("M too small"));
        assert!(build_periodic_grid(3, 8).is_err());
        assert!(build_periodic_grid(0, 8).is_err());
    }

    #[test]
    fn domain_grid_boundary_partition() {
        let g = build_domain_grid(1, &[1.0], 5).unwrap();
        let xs: Vec<f64> = (0..5).map(|i| g.coord(i)[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let b: Vec<usize> = (0..5).filter(|&i| g.is_boundary(i)).collect();
        assert_eq!(b, vec![0, 4]);

        let g2 = build_domain_grid(2, &[1.0, 1.0], 3).unwrap();
        assert_eq!(g2.len(), 9);
        let nb = g2.boundary_mask().iter().filter(|b| **b).count();
        assert_eq!(nb, 8);
        assert!(!g2.is_boundary(4));

        let err = build_domain_grid(1, &[-1.0], 5).unwrap_err();
        assert!(err.to_string().contains("nonpositive extent"));
        assert!(build_domain_grid(1, &[1.0], 2).is_err());
    }

    #[test]
    fn cell_average_examples() {
        let d = build_domain_grid(1, &[1.0], 9).unwrap();
        let c = build_periodic_grid(1, 16).unwrap();
        let g = |x: [f64; 2]| 1.0 + x[0] * x[0];

        let u = TwoScaleField::from_fn(d, c, |x, _| g(x));
        let avg = cell_average(&u);
        for i in 0..d.len() {
            assert_eq!(avg.values()[i], g(d.coord(i)));
        }

        let s = TwoScaleField::from_fn(d, c, |_, y| (2.0 * PI * y[0]).sin());
        assert!(cell_average(&s).max_abs() < 1e-14);

        let w = TwoScaleField::from_fn(d, c, |x, y| g(x) * (2.0 + (2.0 * PI * y[0]).cos()));
        let avg = cell_average(&w);
        for i in 0..d.len() {
            assert!((avg.values()[i] - 2.0 * g(d.coord(i))).abs() < 1e-14);
        }
    }

    #[test]
    fn norms_of_known_functions() {
        let d = build_domain_grid(1, &[1.0], 33).unwrap();
        assert!((DomainField::from_fn(d, |_| 1.0).l2_norm() - 1.0).abs() < 1e-15);
        assert_eq!(DomainField::zeros(d).l2_norm(), 0.0);

        let d = build_domain_grid(1, &[1.0], 257).unwrap();
        let s = DomainField::from_fn(d, |x| (2.0 * PI * x[0]).sin());
        assert!((s.l2_norm() - 0.5f64.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn h1_seminorm_examples() {
        let d = build_domain_grid(1, &[1.0], 17).unwrap();
        assert!(h1_seminorm(&DomainField::from_fn(d, |_| 3.5)) < 1e-12);
        assert!((h1_seminorm(&DomainField::from_fn(d, |x| x[0])) - 1.0).abs() < 1e-12);

        let d = build_domain_grid(1, &[1.0], 257).unwrap();
        let u = DomainField::from_fn(d, |x| x[0] * (1.0 - x[0]) / (2.0 * 3f64.sqrt()));
        assert!((h1_seminorm(&u) - 1.0 / 6.0).abs() < 1e-4);
    }

    #[test]
    fn gradient_2d_is_exact_for_quadratics() {
        let d = build_domain_grid(2, &[1.0, 2.0], 9).unwrap();
        let u = DomainField::from_fn(d, |x| x[0] * x[0] + 3.0 * x[0] * x[1] - x[1] * x[1]);
        let g = gradient(&u);
        for k in 0..d.len() {
            let x = d.coord(k);
            assert!((g[0].values()[k] - (2.0 * x[0] + 3.0 * x[1])).abs() < 1e-12);
            assert!((g[1].values()[k] - (3.0 * x[0] - 2.0 * x[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn y_slice_transposition() {
        let d = build_domain_grid(1, &[1.0], 4).unwrap();
        let c = build_periodic_grid(1, 3).unwrap();
        let slices: Vec<Vec<f64>> = (0..3)
            .map(|j| (0..4).map(|i| (10 * i + j) as f64).collect())
            .collect();
        let u = TwoScaleField::from_y_slices(d, c, &slices).unwrap();
        assert_eq!(u.get(2, 1), 21.0);
        assert_eq!(u.x_slice(2), slices[2]);
    }
}
