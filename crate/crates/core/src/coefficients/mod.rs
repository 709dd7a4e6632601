//! Matrix coefficients `A(x, y)`, periodic in `y`, with sampled ellipticity
//! bounds and exact ε-shifted sampling.

mod expr;

pub use expr::{BinOp, Expr, Func, Var};

use std::f64::consts::PI;

use crate::error::{HomogError, Result};
use crate::grids::{DomainGrid, PeriodicGrid};
use crate::two_scale_ops::CellShift;

/// Default per-dimension sample count for the ellipticity lattice.
pub const DEFAULT_ELLIPTICITY_SAMPLES: usize = 64;

/// Small dense matrix; only the leading `dim x dim` block is meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct Tensor2(pub [[f64; 2]; 2]);

impl Tensor2 {
    pub const ZERO: Tensor2 = Tensor2([[0.0; 2]; 2]);

    pub fn scalar(dim: usize, v: f64) -> Self {
        if dim == 1 {
            Tensor2([[v, 0.0], [0.0, 0.0]])
        } else {
            Tensor2([[v, 0.0], [0.0, v]])
        }
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Tensor2([[a, 0.0], [0.0, b]])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.0[r][c]
    }

    pub fn transpose(&self) -> Self {
        let m = self.0;
        Tensor2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        let m = self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    pub fn add(&self, other: &Tensor2) -> Self {
        let mut out = self.0;
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v += other.0[r][c];
            }
        }
        Tensor2(out)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.0;
        out.iter_mut().flatten().for_each(|v| *v *= s);
        Tensor2(out)
    }

    pub fn max_abs_diff(&self, other: &Tensor2) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Extreme eigenvalues of the symmetric part of the leading block.
    pub fn symmetric_eigen_bounds(&self, dim: usize) -> (f64, f64) {
        let m = self.0;
        if dim == 1 {
            return (m[0][0], m[0][0]);
        }
        let off = 0.5 * (m[0][1] + m[1][0]);
        let mean = 0.5 * (m[0][0] + m[1][1]);
        let half = 0.5 * (m[0][0] - m[1][1]);
        let r = (half * half + off * off).sqrt();
        (mean - r, mean + r)
    }
}

/// `base + amp * cos(2 pi freq t)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Profile {
    pub base: f64,
    pub amp: f64,
    pub freq: u32,
}

impl Profile {
    pub fn eval(&self, t: f64) -> f64 {
        self.base + self.amp * (2.0 * PI * self.freq as f64 * t).cos()
    }
}

/// The closed catalog of coefficient forms.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientKind {
    /// `c I`.
    Constant { value: f64 },
    /// `base + amp cos(2 pi freq y1)`, one dimension.
    Cosine1d(Profile),
    /// `diag(p(y1), p(y1))`: layers normal to the first axis.
    Laminate2d(Profile),
    /// `prod_d p_d(y_d) I`, one profile per dimension.
    Product(Vec<Profile>),
    /// `(base + amp sin(2 pi y1) sin(2 pi y2)) I`.
    CheckerboardSmooth { base: f64, amp: f64 },
    /// Parsed scalar expression times the identity.
    Expression { text: String, expr: Expr },
}

impl CoefficientKind {
    pub fn catalog_id(&self) -> &'static str {
        match self {
            CoefficientKind::Constant { .. } => "constant",
            CoefficientKind::Cosine1d(_) => "cosine1d",
            CoefficientKind::Laminate2d(_) => "laminate2d",
            CoefficientKind::Product(_) => "product",
            CoefficientKind::CheckerboardSmooth { .. } => "checkerboard_smooth",
            CoefficientKind::Expression { .. } => "expr",
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        let bad = |what: &str| {
            Err(HomogError::Config(format!(
                "coefficient `{}` {what}, got dimension {dim}",
                self.catalog_id()
            )))
        };
        match self {
            CoefficientKind::Constant { .. } => Ok(()),
            CoefficientKind::Cosine1d(_) if dim != 1 => bad("requires dimension 1"),
            CoefficientKind::Laminate2d(_) | CoefficientKind::CheckerboardSmooth { .. }
                if dim != 2 =>
            {
                bad("requires dimension 2")
            }
            CoefficientKind::Product(p) if p.len() != dim => {
                bad("needs one profile per dimension")
            }
            CoefficientKind::Expression { expr, .. } if expr.max_coordinate() > dim => {
                bad("references a second coordinate")
            }
            _ => Ok(()),
        }
    }

    fn eval(&self, dim: usize, x: [f64; 2], y: [f64; 2]) -> Tensor2 {
        match self {
            CoefficientKind::Constant { value } => Tensor2::scalar(dim, *value),
            CoefficientKind::Cosine1d(p) => Tensor2::scalar(1, p.eval(y[0])),
            CoefficientKind::Laminate2d(p) => {
                let v = p.eval(y[0]);
                Tensor2::diag(v, v)
            }
            CoefficientKind::Product(ps) => {
                let v = ps.iter().enumerate().map(|(d, p)| p.eval(y[d])).product();
                Tensor2::scalar(dim, v)
            }
            CoefficientKind::CheckerboardSmooth { base, amp } => Tensor2::scalar(
                dim,
                base + amp * (2.0 * PI * y[0]).sin() * (2.0 * PI * y[1]).sin(),
            ),
            CoefficientKind::Expression { expr, .. } => Tensor2::scalar(dim, expr.eval(x, y)),
        }
    }

    fn depends_on_x(&self) -> bool {
        matches!(self, CoefficientKind::Expression { expr, .. } if expr.uses_x())
    }
}

/// A uniformly elliptic coefficient on a box domain.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    dim: usize,
    kind: CoefficientKind,
    domain_extents: [f64; 2],
    alpha: f64,
    beta: f64,
}

fn wrap_unit(t: f64) -> f64 {
    let w = t - t.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

impl CoefficientField {
    /// Builds the field and samples its ellipticity bounds; fails if the
    /// sampled minimum eigenvalue is not positive.
    pub fn new(dim: usize, kind: CoefficientKind, domain_extents: &[f64]) -> Result<Self> {
        Self::with_samples(dim, kind, domain_extents, DEFAULT_ELLIPTICITY_SAMPLES)
    }

    pub fn with_samples(
        dim: usize,
        kind: CoefficientKind,
        domain_extents: &[f64],
        samples: usize,
    ) -> Result<Self> {
        if !(1..=2).contains(&dim) || domain_extents.len() != dim {
            return Err(HomogError::Config(format!(
                "coefficient dimension {dim} with {} extents",
                domain_extents.len()
            )));
        }
        kind.check_dim(dim)?;
        let mut ext = [0.0; 2];
        ext[..dim].copy_from_slice(domain_extents);
        let mut field = Self {
            dim,
            kind,
            domain_extents: ext,
            alpha: f64::NAN,
            beta: f64::NAN,
        };
        let (alpha, beta) = ellipticity_bounds(&field, samples)?;
        field.alpha = alpha;
        field.beta = beta;
        Ok(field)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &CoefficientKind {
        &self.kind
    }

    pub fn catalog_id(&self) -> &'static str {
        self.kind.catalog_id()
    }

    /// Sampled lower ellipticity bound.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Sampled upper bound on the spectrum; stands in for `|A|_inf`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn depends_on_x(&self) -> bool {
        self.kind.depends_on_x()
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, CoefficientKind::Constant { .. })
    }

    /// Evaluates without the domain check; `y` is wrapped into the cell.
    pub fn eval(&self, x: [f64; 2], y: [f64; 2]) -> Tensor2 {
        let mut yw = [0.0; 2];
        for d in 0..self.dim {
            yw[d] = wrap_unit(y[d]);
        }
        self.kind.eval(self.dim, x, yw)
    }

    /// Scalar value for one-dimensional coefficients.
    pub fn eval_scalar(&self, x: f64, y: f64) -> f64 {
        self.eval([x, 0.0], [y, 0.0]).0[0][0]
    }

    /// Coefficient at `(x, y)`; rejects `x` outside the closed domain.
    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> Result<Tensor2> {
        if x.len() != self.dim || y.len() != self.dim {
            return Err(HomogError::GridMismatch(format!(
                "expected {}-dimensional points",
                self.dim
            )));
        }
        let inside = (0..self.dim).all(|d| {
            let tol = 1e-12 * self.domain_extents[d];
            x[d] >= -tol && x[d] <= self.domain_extents[d] + tol
        });
        if !inside {
            return Err(HomogError::OutsideDomain(x.to_vec()));
        }
        let mut xx = [0.0; 2];
        let mut yy = [0.0; 2];
        xx[..self.dim].copy_from_slice(x);
        yy[..self.dim].copy_from_slice(y);
        Ok(self.eval(xx, yy))
    }
}

/// Extreme eigenvalues over a lattice of `samples` points per cell
/// dimension (and a fixed 9-point-per-dimension domain lattice when the
/// coefficient depends on `x`).
pub fn ellipticity_bounds(a: &CoefficientField, samples: usize) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(HomogError::InvalidGrid(format!(
            "need at least 2 ellipticity samples per dimension, got {samples}"
        )));
    }
    let dim = a.dim;
    let ny = samples.pow(dim as u32);
    let xs: Vec<[f64; 2]> = if a.depends_on_x() {
        let nx = 9usize;
        (0..nx.pow(dim as u32))
            .map(|k| {
                let mi = [k % nx, k / nx];
                let mut x = [0.0; 2];
                for d in 0..dim {
                    x[d] = a.domain_extents[d] * mi[d] as f64 / (nx - 1) as f64;
                }
                x
            })
            .collect()
    } else {
        vec![[0.0; 2]]
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in &xs {
        for k in 0..ny {
            let mut y = [0.0; 2];
            y[0] = (k % samples) as f64 / samples as f64;
            if dim == 2 {
                y[1] = (k / samples) as f64 / samples as f64;
            }
            let (l, h) = a.eval(*x, y).symmetric_eigen_bounds(dim);
            if !(l.is_finite() && h.is_finite()) {
                return Err(HomogError::NotElliptic { min_eigenvalue: l });
            }
            lo = lo.min(l);
            hi = hi.max(h);
        }
    }
    if lo <= 0.0 {
        return Err(HomogError::NotElliptic { min_eigenvalue: lo });
    }
    Ok((lo, hi))
}

/// Matrix-valued two-scale samples `A(x_i, y_j + x_i / eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorTwoScaleField {
    pub domain: DomainGrid,
    pub cell: PeriodicGrid,
    pub values: Vec<Tensor2>,
}

impl TensorTwoScaleField {
    pub fn get(&self, x_node: usize, y_node: usize) -> Tensor2 {
        self.values[x_node * self.cell.len() + y_node]
    }
}

/// Samples `A(x_i, y_j + x_i / eps)` on every node pair. The shifted cell
/// coordinate is taken from the exact index permutation, so `eps` must be
/// grid-compatible.
pub fn shifted_sample(
    a: &CoefficientField,
    eps: f64,
    dgrid: &DomainGrid,
    cgrid: &PeriodicGrid,
) -> Result<TensorTwoScaleField> {
    let shift = CellShift::new(dgrid, cgrid, eps)?;
    let my = cgrid.len();
    let mut values = Vec::with_capacity(dgrid.len() * my);
    for i in 0..dgrid.len() {
        let x = dgrid.coord(i);
        for j in 0..my {
            values.push(a.eval(x, cgrid.coord(shift.forward_index(i, j))));
        }
    }
    Ok(TensorTwoScaleField {
        domain: *dgrid,
        cell: *cgrid,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::{build_domain_grid, build_periodic_grid};

    fn cosine(base: f64, amp: f64) -> CoefficientKind {
        CoefficientKind::Cosine1d(Profile { base, amp, freq: 1 })
    }

    #[test]
    fn evaluate_catalog_entries() {
        let c = CoefficientField::new(1, CoefficientKind::Constant { value: 5.0 }, &[1.0]).unwrap();
        assert_eq!(c.evaluate(&[0.3], &[0.7]).unwrap().get(0, 0), 5.0);

        let a = CoefficientField::new(1, cosine(2.0, 1.0), &[1.0]).unwrap();
        assert_eq!(a.evaluate(&[0.1], &[0.0]).unwrap().get(0, 0), 3.0);
        assert_eq!(
            a.evaluate(&[0.1], &[0.25]).unwrap(),
            a.evaluate(&[0.1], &[1.25]).unwrap()
        );
        assert!(matches!(
            a.evaluate(&[1.5], &[0.0]),
            Err(HomogError::OutsideDomain(_))
        ));
    }

    #[test]
    fn ellipticity_examples() {
        let c = CoefficientField::new(1, CoefficientKind::Constant { value: 5.0 }, &[1.0]).unwrap();
        assert_eq!(ellipticity_bounds(&c, 16).unwrap(), (5.0, 5.0));

        let a = CoefficientField::new(1, cosine(2.0, 1.0), &[1.0]).unwrap();
        let (lo, hi) = ellipticity_bounds(&a, 256).unwrap();
        assert!((lo - 1.0).abs() < 1e-3 && (hi - 3.0).abs() < 1e-3);

        let err = CoefficientField::new(1, cosine(0.5, 1.0), &[1.0]).unwrap_err();
        assert!(err.to_string().contains("not uniformly elliptic"));
    }

    #[test]
    fn ellipticity_refinement_is_monotone() {
        let a = CoefficientField::new(
            2,
            CoefficientKind::CheckerboardSmooth { base: 2.0, amp: 1.3 },
            &[1.0, 1.0],
        )
        .unwrap();
        let mut prev = ellipticity_bounds(&a, 3).unwrap().0;
        for k in [6, 12, 24, 48] {
            let next = ellipticity_bounds(&a, k).unwrap().0;
            assert!(next <= prev + 1e-14);
            prev = next;
        }
    }

    #[test]
    fn catalog_outputs_are_symmetric() {
        let p = Profile {
            base: 3.0,
            amp: 1.0,
            freq: 2,
        };
        let kinds = vec![
            (2, CoefficientKind::Laminate2d(p)),
            (2, CoefficientKind::Product(vec![p, p])),
            (2, CoefficientKind::CheckerboardSmooth { base: 2.0, amp: 1.0 }),
            (
                2,
                CoefficientKind::Expression {
                    text: "2 + x1*cos(2*pi*y2)".into(),
                    expr: Expr::parse("2 + x1*cos(2*pi*y2)").unwrap(),
                },
            ),
        ];
        for (dim, k) in kinds {
            let a = CoefficientField::new(dim, k, &[1.0, 1.0]).unwrap();
            for s in 0..50 {
                let t = s as f64 / 50.0;
                let m = a.eval([t, 1.0 - t], [0.37 * t, t * t]);
                assert_eq!(m, m.transpose());
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(CoefficientField::new(2, cosine(2.0, 1.0), &[1.0, 1.0]).is_err());
        let e = Expr::parse("2 + cos(y2)").unwrap();
        let k = CoefficientKind::Expression {
            text: String::new(),
            expr: e,
        };
        assert!(CoefficientField::new(1, k, &[1.0]).is_err());
    }

    #[test]
    fn shifted_sample_examples() {
        let d = build_domain_grid(1, &[1.0], 17).unwrap();
        let c = build_periodic_grid(1, 8).unwrap();
        let konst =
            CoefficientField::new(1, CoefficientKind::Constant { value: 4.0 }, &[1.0]).unwrap();
        let s = shifted_sample(&konst, 0.25, &d, &c).unwrap();
        assert!(s.values.iter().all(|t| t.get(0, 0) == 4.0));

        let a = CoefficientField::new(1, cosine(2.0, 1.0), &[1.0]).unwrap();
        let s1 = shifted_sample(&a, 1.0, &d, &c).unwrap_err();
        assert!(matches!(s1, HomogError::IncompatibleEpsilon { .. }));

        // x = 1/8 is node 2; 0 + (1/8)/(1/4) = 1/2.
        let s = shifted_sample(&a, 0.25, &d, &c).unwrap();
        assert!((s.get(2, 0).get(0, 0) - 1.0).abs() < 1e-15);
        for j in 0..8 {
            assert_eq!(s.get(0, j), a.eval([0.0, 0.0], c.coord(j)));
        }
    }

    #[test]
    fn shifted_sample_depends_on_x_over_eps_mod_one() {
        // Shift step M h / eps: eps = 1 gives 1, eps = 1/5 gives 5 == 1 (mod 4).
        let d = build_domain_grid(1, &[1.0], 5).unwrap();
        let c = build_periodic_grid(1, 4).unwrap();
        let a = CoefficientField::new(1, cosine(2.0, 1.0), &[1.0]).unwrap();
        let s1 = shifted_sample(&a, 1.0, &d, &c).unwrap();
        let s5 = shifted_sample(&a, 0.2, &d, &c).unwrap();
        assert_eq!(s1, s5);
    }
}
