//! The ε-cell-shift operator `F_eps: u(x, y) -> u(x, y - x/eps)`, its
//! adjoint, two-scale pairings and strong two-scale errors.
//!
//! `F_eps` is realised as an exact cyclic permutation of every y-slice. This
//! needs `x_i / eps mod 1` to land on a cell node for every domain node,
//! which holds iff the per-node step `h_d M / eps` is an integer in each
//! direction (`h_d` the domain spacing, `M` the cell nodes per dimension).

use crate::error::{HomogError, Result};
use crate::grids::{DomainGrid, PeriodicGrid, TwoScaleField};

/// Relative tolerance used when deciding whether a shift step is integral.
const STEP_TOL: f64 = 1e-9;

/// Precomputed index shifts for one `(domain grid, cell grid, eps)` triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellShift {
    domain: DomainGrid,
    cell: PeriodicGrid,
    eps: f64,
    steps: [usize; 2],
}

impl CellShift {
    pub fn new(domain: &DomainGrid, cell: &PeriodicGrid, eps: f64) -> Result<Self> {
        if domain.dim() != cell.dim() {
            return Err(HomogError::GridMismatch(format!(
                "domain dimension {} differs from cell dimension {}",
                domain.dim(),
                cell.dim()
            )));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(HomogError::IncompatibleEpsilon {
                eps,
                reason: "epsilon must be positive".into(),
            });
        }
        let m = cell.nodes_per_dim();
        let mut steps = [0; 2];
        for d in 0..domain.dim() {
            let q = domain.spacing(d) * m as f64 / eps;
            let r = q.round();
            if r < 1.0 || (q - r).abs() > STEP_TOL * r.max(1.0) {
                return Err(HomogError::IncompatibleEpsilon {
                    eps,
                    reason: format!(
                        "epsilon not grid-compatible: the shift per domain node \
                         extent*M/((N-1)*eps) = {}*{m}/({}*{eps}) = {q} must be a positive \
                         integer, i.e. (N-1)*eps must divide extent*M",
                        domain.extents()[d],
                        domain.intervals()
                    ),
                });
            }
            steps[d] = (r as usize) % m;
        }
        Ok(Self {
            domain: *domain,
            cell: *cell,
            eps,
            steps,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Steps (in cell nodes, modulo `M`) per domain node in each direction.
    pub fn steps(&self) -> [usize; 2] {
        self.steps
    }

    /// Cell-node offset representing `x_i / eps mod 1`.
    pub fn offset(&self, x_node: usize) -> [usize; 2] {
        let m = self.cell.nodes_per_dim();
        let mi = self.domain.multi_index(x_node);
        let mut off = [0; 2];
        for d in 0..self.domain.dim() {
            off[d] = (mi[d] * self.steps[d]) % m;
        }
        off
    }

    /// Index of the cell node `y_j + x_i / eps`.
    pub fn forward_index(&self, x_node: usize, y_node: usize) -> usize {
        self.moved(x_node, y_node, true)
    }

    /// Index of the cell node `y_j - x_i / eps`.
    pub fn backward_index(&self, x_node: usize, y_node: usize) -> usize {
        self.moved(x_node, y_node, false)
    }

    fn moved(&self, x_node: usize, y_node: usize, forward: bool) -> usize {
        let m = self.cell.nodes_per_dim();
        let off = self.offset(x_node);
        let mut mi = self.cell.multi_index(y_node);
        for d in 0..self.cell.dim() {
            mi[d] = if forward {
                (mi[d] + off[d]) % m
            } else {
                (mi[d] + m - off[d]) % m
            };
        }
        self.cell.flat_index(mi)
    }

    fn permute(&self, u: &TwoScaleField, forward: bool) -> Result<TwoScaleField> {
        if u.domain_grid() != &self.domain || u.cell_grid() != &self.cell {
            return Err(HomogError::GridMismatch(
                "field grids differ from the shift plan".into(),
            ));
        }
        let my = self.cell.len();
        let mut out = vec![0.0; u.values().len()];
        for i in 0..self.domain.len() {
            let src = u.y_slice(i);
            let dst = &mut out[i * my..(i + 1) * my];
            for (j, v) in dst.iter_mut().enumerate() {
                *v = src[self.moved(i, j, forward)];
            }
        }
        Ok(u.with_values(out))
    }

    pub fn apply(&self, u: &TwoScaleField) -> Result<TwoScaleField> {
        self.permute(u, false)
    }

    pub fn apply_adjoint(&self, u: &TwoScaleField) -> Result<TwoScaleField> {
        self.permute(u, true)
    }
}

/// `F_eps(u)(x, y) = u(x, y - x/eps)`.
pub fn apply_cell_shift(u: &TwoScaleField, eps: f64) -> Result<TwoScaleField> {
    CellShift::new(u.domain_grid(), u.cell_grid(), eps)?.apply(u)
}

/// `F_eps*(u)(x, y) = u(x, y + x/eps)`, the inverse permutation.
pub fn apply_cell_shift_adjoint(u: &TwoScaleField, eps: f64) -> Result<TwoScaleField> {
    CellShift::new(u.domain_grid(), u.cell_grid(), eps)?.apply_adjoint(u)
}

/// `int_{Omega x Y} u(x, y - x/eps) psi(x, y)`.
pub fn two_scale_pairing(u: &TwoScaleField, psi: &TwoScaleField, eps: f64) -> Result<f64> {
    u.same_grids(psi)?;
    apply_cell_shift(u, eps)?.inner(psi)
}

/// `|| F_eps(u) - u0 ||` over `Omega x Y`.
pub fn strong_two_scale_error(u: &TwoScaleField, u0: &TwoScaleField, eps: f64) -> Result<f64> {
    use crate::grids::L2Norm;
    u.same_grids(u0)?;
    Ok(apply_cell_shift(u, eps)?.add_scaled(-1.0, u0)?.l2_norm())
}
