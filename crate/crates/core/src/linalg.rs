//! Dense Hermitian eigendecomposition and small matrix helpers.

use crate::C64;
use nalgebra::{DMatrix, DVector};

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted ascending.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// Eigenvalues, ascending.
    pub energies: Vec<f64>,
    /// Unit eigenvectors; column k belongs to `energies[k]`.
    pub vectors: DMatrix<C64>,
}

impl EigenSystem {
    /// Eigenvector of level `n` as an owned column.
    pub fn vector(&self, n: usize) -> DVector<C64> {
        self.vectors.column(n).into_owned()
    }

    /// Smallest gap between level `n` and any other level.
    pub fn gap(&self, n: usize) -> f64 {
        self.energies
            .iter()
            .enumerate()
            .filter(|(m, _)| *m != n)
            .map(|(_, e)| (e - self.energies[n]).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Diagonalize a Hermitian matrix; eigenvalues come back sorted ascending.
pub fn eigh(h: &DMatrix<C64>) -> EigenSystem {
    let n = h.nrows();
    let eig = h.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("NaN eigenvalue")
    });
    let energies: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::<C64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    EigenSystem { energies, vectors }
}

/// (M + M†)/2.
pub fn hermitize(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Largest elementwise |M − M†|.
pub fn hermiticity_error(m: &DMatrix<C64>) -> f64 {
    (m - m.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Largest elementwise modulus.
pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest elementwise |a - b|.
pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Smallest eigenvalue of a real symmetric matrix (via the Hermitian path).
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let h = m.map(|v| C64::new(v, 0.0));
    let sys = eigh(&hermitize(&h));
    sys.energies[0]
}
