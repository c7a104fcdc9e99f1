//! Dense linear algebra kernels used by the analysis modules.

mod eigen;
mod lu;
mod symmetric;

pub use eigen::{eigenvalues, EigenError, MAX_ITERS_PER_EIGENVALUE};
pub use lu::{ComplexLu, Singular};
pub use symmetric::{symmetric_eigenvalues, SYMMETRY_TOL};

use nalgebra::DMatrix;

/// Row-wise sparse view of a dense matrix, used in the integrator inner loops.
#[derive(Clone, Debug, Default)]
pub struct SparseRows {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let rows = (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .filter(|&j| m[(i, j)] != 0.0)
                    .map(|j| (j, m[(i, j)]))
                    .collect()
            })
            .collect();
        Self { rows }
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> Self {
        let full = Self::from_dense(m);
        Self { rows: rows.iter().map(|&r| full.rows[r].clone()).collect() }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn row_dot(&self, row: usize, x: &[f64]) -> f64 {
        self.rows[row].iter().map(|&(j, v)| v * x[j]).sum()
    }

    /// `(M x, x)`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        (0..self.rows.len()).map(|i| self.row_dot(i, x) * x[i]).sum()
    }
}
