//! Nine-point stencil matrices on structured grids and a Jacobi-preconditioned
//! conjugate-gradient solver with optional projection of the constant
//! nullspace.

use crate::error::{HomogError, Result};

pub trait LinearOperator {
    fn len(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Sparse matrix with (at most) nine entries per row, one per neighbour
/// offset `(dx, dy)` in `{-1, 0, 1}^2`; slot `k = (dx + 1) + 3 (dy + 1)`.
#[derive(Debug, Clone)]
pub struct StencilMatrix {
    cols: Vec<[u32; 9]>,
    vals: Vec<[f64; 9]>,
}

pub const CENTER: usize = 4;

pub fn stencil_slot(dx: i64, dy: i64) -> usize {
    ((dx + 1) + 3 * (dy + 1)) as usize
}

impl StencilMatrix {
    pub fn new(cols: Vec<[u32; 9]>) -> Self {
        let vals = vec![[0.0; 9]; cols.len()];
        Self { cols, vals }
    }

    pub fn add(&mut self, row: usize, slot: usize, v: f64) {
        self.vals[row][slot] += v;
    }

    pub fn col(&self, row: usize, slot: usize) -> usize {
        self.cols[row][slot] as usize
    }

    pub fn value(&self, row: usize, slot: usize) -> f64 {
        self.vals[row][slot]
    }

    /// Imposes Dirichlet values on the masked rows by symmetric elimination:
    /// masked rows become identity rows, and their columns are moved to the
    /// right-hand side of the remaining rows.
    pub fn eliminate_dirichlet(&mut self, mask: &[bool], values: &[f64], rhs: &mut [f64]) {
        for row in 0..self.cols.len() {
            if mask[row] {
                self.vals[row] = [0.0; 9];
                self.vals[row][CENTER] = 1.0;
                rhs[row] = values[row];
                continue;
            }
            for slot in 0..9 {
                let c = self.cols[row][slot] as usize;
                if c != row && mask[c] && self.vals[row][slot] != 0.0 {
                    rhs[row] -= self.vals[row][slot] * values[c];
                    self.vals[row][slot] = 0.0;
                }
            }
        }
    }
}

impl LinearOperator for StencilMatrix {
    fn len(&self) -> usize {
        self.cols.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, cols), vals) in y.iter_mut().zip(&self.cols).zip(&self.vals) {
            let mut s = 0.0;
            for k in 0..9 {
                s += vals[k] * x[cols[k] as usize];
            }
            *yi = s;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        self.vals.iter().map(|v| v[CENTER]).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Treat constants as the nullspace: keep residuals mean-free and return
    /// the zero-mean solution.
    pub project_constants: bool,
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Relative residual `||b - A x|| / ||b||` (0 when both vanish).
pub fn relative_residual<A: LinearOperator + ?Sized>(a: &A, x: &[f64], b: &[f64]) -> f64 {
    let mut ax = vec![0.0; a.len()];
    a.apply(x, &mut ax);
    let r: f64 = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (q - p) * (q - p))
        .sum::<f64>()
        .sqrt();
    let nb = dot(b, b).sqrt();
    if nb == 0.0 {
        r
    } else {
        r / nb
    }
}

pub fn conjugate_gradient<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: CgOptions,
) -> Result<CgOutcome> {
    let n = a.len();
    let mut rhs = b.to_vec();
    if opts.project_constants {
        remove_mean(&mut rhs);
    }
    let bnorm = dot(&rhs, &rhs).sqrt();
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut r = vec![0.0; n];
    a.apply(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(&rhs) {
        *ri = bi - *ri;
    }
    if opts.project_constants {
        remove_mean(&mut r);
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    let target = opts.tol * bnorm;
    let mut rnorm = dot(&r, &r).sqrt();
    let mut it = 0;
    while rnorm > target {
        if it >= opts.max_iter {
            return Err(HomogError::NoConvergence {
                iterations: it,
                residual: rnorm / bnorm,
            });
        }
        a.apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(HomogError::NoConvergence {
                iterations: it,
                residual: rnorm / bnorm,
            });
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        if opts.project_constants {
            remove_mean(&mut r);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rnorm = dot(&r, &r).sqrt();
        it += 1;
    }
    if opts.project_constants {
        remove_mean(&mut x);
    }
    Ok(CgOutcome {
        x,
        iterations: it,
        relative_residual: rnorm / bnorm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1D periodic Laplacian embedded in the stencil format.
    fn periodic_laplacian(n: usize) -> StencilMatrix {
        let cols = (0..n)
            .map(|i| {
                let mut c = [i as u32; 9];
                c[stencil_slot(-1, 0)] = ((i + n - 1) % n) as u32;
                c[stencil_slot(1, 0)] = ((i + 1) % n) as u32;
                c
            })
            .collect();
        let mut k = StencilMatrix::new(cols);
        for i in 0..n {
            k.add(i, CENTER, 2.0);
            k.add(i, stencil_slot(-1, 0), -1.0);
            k.add(i, stencil_slot(1, 0), -1.0);
        }
        k
    }

    #[test]
    fn singular_periodic_system_is_solved_in_the_mean_free_space() {
        let n = 32;
        let k = periodic_laplacian(n);
        let b: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / n as f64).sin())
            .collect();
        let out = conjugate_gradient(
            &k,
            &b,
            None,
            CgOptions {
                tol: 1e-12,
                max_iter: 500,
                project_constants: true,
            },
        )
        .unwrap();
        assert!(out.x.iter().sum::<f64>().abs() < 1e-12);
        assert!(relative_residual(&k, &out.x, &b) < 1e-11);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let k = periodic_laplacian(8);
        let out = conjugate_gradient(
            &k,
            &[0.0; 8],
            None,
            CgOptions {
                tol: 1e-10,
                max_iter: 10,
                project_constants: true,
            },
        )
        .unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let k = periodic_laplacian(64);
        let b: Vec<f64> = (0..64).map(|i| if i == 3 { 1.0 } else { -1.0 / 63.0 }).collect();
        let err = conjugate_gradient(
            &k,
            &b,
            None,
            CgOptions {
                tol: 1e-14,
                max_iter: 2,
                project_constants: true,
            },
        )
        .unwrap_err();
        assert!(matches!(err, HomogError::NoConvergence { iterations: 2, .. }));
    }

    #[test]
    fn dirichlet_elimination_keeps_symmetry() {
        let mut k = periodic_laplacian(6);
        let mask = [true, false, false, false, false, false];
        let mut rhs = vec![0.0; 6];
        k.eliminate_dirichlet(&mask, &[2.0, 0.0, 0.0, 0.0, 0.0, 0.0], &mut rhs);
        assert_eq!(rhs[0], 2.0);
        assert_eq!(rhs[1], 2.0);
        assert_eq!(rhs[5], 2.0);
        for row in 0..6 {
            for slot in 0..9 {
                let c = k.col(row, slot);
                if c == row {
                    continue;
                }
                let back = (0..9)
                    .filter(|s| k.col(c, *s) == row)
                    .map(|s| k.value(c, s))
                    .sum::<f64>();
                assert_eq!(k.value(row, slot), back);
            }
        }
    }
}
