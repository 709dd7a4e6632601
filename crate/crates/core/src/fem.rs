//! Bilinear (Q1) finite elements on structured 2D grids, either the periodic
//! unit cell or a Dirichlet box, with 2x2 Gauss quadrature.

use crate::coefficients::Tensor2;
use crate::grids::{DomainGrid, PeriodicGrid};
use crate::linalg::{stencil_slot, StencilMatrix};

const GAUSS: [f64; 2] = [
    0.5 - 0.288_675_134_594_812_9, // 1/2 - 1/(2 sqrt 3)
    0.5 + 0.288_675_134_594_812_9,
];

/// Local node order: (0,0), (1,0), (1,1), (0,1).
const LOCAL: [[usize; 2]; 4] = [[0, 0], [1, 0], [1, 1], [0, 1]];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Q1Mesh {
    nodes_per_dim: usize,
    periodic: bool,
    h: [f64; 2],
}

impl Q1Mesh {
    pub fn periodic(cell: &PeriodicGrid) -> Self {
        debug_assert_eq!(cell.dim(), 2);
        let h = cell.spacing();
        Self {
            nodes_per_dim: cell.nodes_per_dim(),
            periodic: true,
            h: [h, h],
        }
    }

    pub fn domain(grid: &DomainGrid) -> Self {
        debug_assert_eq!(grid.dim(), 2);
        Self {
            nodes_per_dim: grid.nodes_per_dim(),
            periodic: false,
            h: [grid.spacing(0), grid.spacing(1)],
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_dim * self.nodes_per_dim
    }

    fn elems_per_dim(&self) -> usize {
        if self.periodic {
            self.nodes_per_dim
        } else {
            self.nodes_per_dim - 1
        }
    }

    pub fn element_count(&self) -> usize {
        self.elems_per_dim().pow(2)
    }

    fn node(&self, i: usize, j: usize) -> usize {
        let n = self.nodes_per_dim;
        if self.periodic {
            (i % n) + n * (j % n)
        } else {
            i + n * j
        }
    }

    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        let ne = self.elems_per_dim();
        let (i, j) = (e % ne, e / ne);
        LOCAL.map(|[a, b]| self.node(i + a, j + b))
    }

    /// Physical Gauss points of element `e` and the common weight.
    pub fn gauss_points(&self, e: usize) -> ([[f64; 2]; 4], f64) {
        let ne = self.elems_per_dim();
        let (i, j) = (e % ne, e / ne);
        let (x0, y0) = (i as f64 * self.h[0], j as f64 * self.h[1]);
        let mut pts = [[0.0; 2]; 4];
        let mut k = 0;
        for gy in GAUSS {
            for gx in GAUSS {
                pts[k] = [x0 + gx * self.h[0], y0 + gy * self.h[1]];
                k += 1;
            }
        }
        (pts, 0.25 * self.h[0] * self.h[1])
    }

    fn reference_points() -> [[f64; 2]; 4] {
        let mut pts = [[0.0; 2]; 4];
        let mut k = 0;
        for gy in GAUSS {
            for gx in GAUSS {
                pts[k] = [gx, gy];
                k += 1;
            }
        }
        pts
    }

    /// Shape values and physical gradients at a reference point.
    fn shape(&self, xi: [f64; 2]) -> ([f64; 4], [[f64; 2]; 4]) {
        let (s, t) = (xi[0], xi[1]);
        let n = [(1.0 - s) * (1.0 - t), s * (1.0 - t), s * t, (1.0 - s) * t];
        let g = [
            [-(1.0 - t) / self.h[0], -(1.0 - s) / self.h[1]],
            [(1.0 - t) / self.h[0], -s / self.h[1]],
            [t / self.h[0], s / self.h[1]],
            [-t / self.h[0], (1.0 - s) / self.h[1]],
        ];
        (n, g)
    }

    fn empty_matrix(&self) -> StencilMatrix {
        let n = self.nodes_per_dim as i64;
        let cols = (0..self.node_count())
            .map(|k| {
                let (i, j) = ((k as i64) % n, (k as i64) / n);
                let mut c = [k as u32; 9];
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (a, b) = (i + dx, j + dy);
                        let idx = if self.periodic {
                            a.rem_euclid(n) + n * b.rem_euclid(n)
                        } else if (0..n).contains(&a) && (0..n).contains(&b) {
                            a + n * b
                        } else {
                            k as i64
                        };
                        c[stencil_slot(dx, dy)] = idx as u32;
                    }
                }
                c
            })
            .collect();
        StencilMatrix::new(cols)
    }

    /// Stiffness matrix of `int A grad u . grad v` with `A` sampled at the
    /// Gauss points.
    pub fn assemble_stiffness(&self, coef: impl Fn([f64; 2]) -> Tensor2) -> StencilMatrix {
        let mut k = self.empty_matrix();
        let refs = Self::reference_points();
        let grads: Vec<[[f64; 2]; 4]> = refs.iter().map(|p| self.shape(*p).1).collect();
        for e in 0..self.element_count() {
            let nodes = self.element_nodes(e);
            let (pts, w) = self.gauss_points(e);
            let mut ke = [[0.0; 4]; 4];
            for q in 0..4 {
                let a = coef(pts[q]);
                let g = &grads[q];
                for (bb, gb) in g.iter().enumerate() {
                    let ag = a.apply(*gb);
                    for (aa, ga) in g.iter().enumerate() {
                        ke[aa][bb] += w * (ga[0] * ag[0] + ga[1] * ag[1]);
                    }
                }
            }
            for aa in 0..4 {
                for bb in 0..4 {
                    let dx = LOCAL[bb][0] as i64 - LOCAL[aa][0] as i64;
                    let dy = LOCAL[bb][1] as i64 - LOCAL[aa][1] as i64;
                    k.add(nodes[aa], stencil_slot(dx, dy), ke[aa][bb]);
                }
            }
        }
        k
    }

    /// Load vector `int f v`.
    pub fn assemble_load(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        let mut b = vec![0.0; self.node_count()];
        let refs = Self::reference_points();
        let shapes: Vec<[f64; 4]> = refs.iter().map(|p| self.shape(*p).0).collect();
        for e in 0..self.element_count() {
            let nodes = self.element_nodes(e);
            let (pts, w) = self.gauss_points(e);
            for q in 0..4 {
                let fv = f(pts[q]) * w;
                for a in 0..4 {
                    b[nodes[a]] += fv * shapes[q][a];
                }
            }
        }
        b
    }

    /// `int grad v . A e_dir`, the right-hand side of the cell problem.
    pub fn assemble_flux_load(&self, coef: impl Fn([f64; 2]) -> Tensor2, dir: usize) -> Vec<f64> {
        let mut b = vec![0.0; self.node_count()];
        let refs = Self::reference_points();
        let grads: Vec<[[f64; 2]; 4]> = refs.iter().map(|p| self.shape(*p).1).collect();
        let mut e_dir = [0.0; 2];
        e_dir[dir] = 1.0;
        for e in 0..self.element_count() {
            let nodes = self.element_nodes(e);
            let (pts, w) = self.gauss_points(e);
            for q in 0..4 {
                let ae = coef(pts[q]).apply(e_dir);
                for a in 0..4 {
                    let g = grads[q][a];
                    b[nodes[a]] += w * (g[0] * ae[0] + g[1] * ae[1]);
                }
            }
        }
        b
    }

    /// Calls `visit(point, weight, value, gradient)` at every Gauss point for
    /// the Q1 interpolant of nodal `u`.
    pub fn for_each_gauss(&self, u: &[f64], mut visit: impl FnMut([f64; 2], f64, f64, [f64; 2])) {
        let refs = Self::reference_points();
        let shapes: Vec<([f64; 4], [[f64; 2]; 4])> =
            refs.iter().map(|p| self.shape(*p)).collect();
        for e in 0..self.element_count() {
            let nodes = self.element_nodes(e);
            let (pts, w) = self.gauss_points(e);
            for q in 0..4 {
                let (n, g) = &shapes[q];
                let mut val = 0.0;
                let mut grad = [0.0; 2];
                for a in 0..4 {
                    let ua = u[nodes[a]];
                    val += n[a] * ua;
                    grad[0] += g[a][0] * ua;
                    grad[1] += g[a][1] * ua;
                }
                visit(pts[q], w, val, grad);
            }
        }
    }

    /// `L^2` norm of the elementwise gradient of the Q1 interpolant.
    pub fn gradient_l2_norm(&self, u: &[f64]) -> f64 {
        let mut acc = 0.0;
        self.for_each_gauss(u, |_, w, _, g| acc += w * (g[0] * g[0] + g[1] * g[1]));
        acc.sqrt()
    }

    /// `L^2` norm of the Q1 interpolant.
    pub fn l2_norm(&self, u: &[f64]) -> f64 {
        let mut acc = 0.0;
        self.for_each_gauss(u, |_, w, v, _| acc += w * v * v);
        acc.sqrt()
    }
}

/// Bilinear interpolation of periodic nodal values at an arbitrary point.
pub fn periodic_bilinear(cell: &PeriodicGrid, values: &[f64], y: [f64; 2]) -> f64 {
    let m = cell.nodes_per_dim();
    let mf = m as f64;
    let (mut i0, mut t) = ([0usize; 2], [0.0; 2]);
    for d in 0..cell.dim() {
        let s = (y[d] - y[d].floor()) * mf;
        let fl = s.floor();
        i0[d] = (fl as usize) % m;
        t[d] = s - fl;
    }
    if cell.dim() == 1 {
        let (a, b) = (values[i0[0]], values[(i0[0] + 1) % m]);
        return a + t[0] * (b - a);
    }
    let at = |i: usize, j: usize| values[(i % m) + m * (j % m)];
    let (i, j) = (i0[0], i0[1]);
    let (s, r) = (t[0], t[1]);
    (1.0 - s) * (1.0 - r) * at(i, j)
        + s * (1.0 - r) * at(i + 1, j)
        + s * r * at(i + 1, j + 1)
        + (1.0 - s) * r * at(i, j + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::{build_domain_grid, build_periodic_grid};
    use crate::linalg::LinearOperator;

    #[test]
    fn stiffness_annihilates_constants_and_is_symmetric() {
        let cell = build_periodic_grid(2, 8).unwrap();
        let mesh = Q1Mesh::periodic(&cell);
        let k = mesh.assemble_stiffness(|y| {
            Tensor2([[2.0 + y[0], 0.3 * y[1]], [0.3 * y[1], 1.0 + y[0] * y[1]]])
        });
        let ones = vec![1.0; mesh.node_count()];
        let mut out = vec![0.0; mesh.node_count()];
        k.apply(&ones, &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-12));

        let mut dense = vec![vec![0.0; 64]; 64];
        for r in 0..64 {
            for s in 0..9 {
                dense[r][k.col(r, s)] += k.value(r, s);
            }
        }
        for r in 0..64 {
            for c in 0..64 {
                assert!((dense[r][c] - dense[c][r]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn load_integrates_constants() {
        let grid = build_domain_grid(2, &[2.0, 1.0], 5).unwrap();
        let mesh = Q1Mesh::domain(&grid);
        let b = mesh.assemble_load(|_| 3.0);
        assert!((b.iter().sum::<f64>() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_norm_of_linear_function_is_exact() {
        let grid = build_domain_grid(2, &[1.0, 1.0], 6).unwrap();
        let mesh = Q1Mesh::domain(&grid);
        let u: Vec<f64> = (0..grid.len())
            .map(|k| {
                let x = grid.coord(k);
                3.0 * x[0] - 4.0 * x[1]
            })
            .collect();
        assert!((mesh.gradient_l2_norm(&u) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn bilinear_interpolation_reproduces_nodes_and_wraps() {
        let cell = build_periodic_grid(2, 4).unwrap();
        let vals: Vec<f64> = (0..16).map(|k| k as f64).collect();
        assert_eq!(periodic_bilinear(&cell, &vals, [0.25, 0.5]), vals[1 + 4 * 2]);
        assert_eq!(periodic_bilinear(&cell, &vals, [1.25, -0.5]), vals[1 + 4 * 2]);
        let mid = periodic_bilinear(&cell, &vals, [0.875, 0.0]);
        assert!((mid - 0.5 * (vals[3] + vals[0])).abs() < 1e-14);
    }
}
