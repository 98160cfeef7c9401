//! Self-contained linear algebra: sparse storage with Krylov solvers, and the
//! small dense kernels (Cholesky, Jacobi eigensolver, SVD, regularized normal
//! equations) the reduced-basis layer needs.

pub mod dense;
pub mod eig;
pub mod iterative;
pub mod normal;
pub mod sparse;
pub mod svd;

pub use dense::{Cholesky, DenseMat};
pub use eig::sym_eig;
pub use iterative::{bicgstab, cg_solve, Solution, DEFAULT_TOL};
pub use normal::{condition_estimate, solve_regularized_normal};
pub use sparse::CsrMatrix;
pub use svd::{svd, Svd};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
