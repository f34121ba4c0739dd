//! Dense symmetric linear algebra used by the search-distribution updates.
//!
//! Every matrix touched by the engine is small (d is at most a few hundred),
//! so all routines are plain O(d³) dense kernels on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

/// Absolute/relative tolerance for accepting a matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Determinants with magnitude below this are treated as singular.
pub const SINGULAR_DET: f64 = 1e-300;

/// Components smaller than this are skipped when fixing eigenvector signs.
const SIGN_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error(
        "matrix is not symmetric: |A[{row}][{col}] - A[{col}][{row}]| = {deviation:e} exceeds tolerance"
    )]
    NotSymmetric {
        row: usize,
        col: usize,
        deviation: f64,
    },
    #[error("matrix is singular: det = {det:e}, condition number ~ {condition:e}")]
    Singular { det: f64, condition: f64 },
}

/// A square matrix that has been checked to be symmetric.
///
/// Construction averages the matrix with its transpose, so downstream code can
/// rely on exact symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self, LinalgError> {
        check_square(&matrix)?;
        let d = matrix.nrows();
        let mut worst: Option<(usize, usize, f64, f64)> = None;
        for i in 0..d {
            for j in 0..d {
                let a = matrix[(i, j)];
                if !a.is_finite() {
                    return Err(LinalgError::NonFinite { row: i, col: j });
                }
                if j <= i {
                    continue;
                }
                let dev = (a - matrix[(j, i)]).abs();
                let excess = dev / (SYMMETRY_TOL * a.abs().max(1.0));
                if excess > 1.0 && worst.map_or(true, |w| excess > w.3) {
                    worst = Some((i, j, dev, excess));
                }
            }
        }
        if let Some((row, col, deviation, _)) = worst {
            return Err(LinalgError::NotSymmetric {
                row,
                col,
                deviation,
            });
        }
        Ok(Self::symmetrized(matrix))
    }

    /// Wraps a matrix that is symmetric by construction (outer products,
    /// `A·Aᵀ`, linear combinations of symmetric matrices).
    pub(crate) fn symmetrized(matrix: DMatrix<f64>) -> Self {
        let t = matrix.transpose();
        Self((matrix + t) * 0.5)
    }

    pub fn identity(d: usize) -> Self {
        Self(DMatrix::identity(d, d))
    }

    pub fn zeros(d: usize) -> Self {
        Self(DMatrix::zeros(d, d))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// `v·vᵀ`
    pub fn outer(v: &DVector<f64>) -> Self {
        Self(v * v.transpose())
    }

    /// `A·Aᵀ` for an arbitrary square `A`.
    pub fn gram(a: &DMatrix<f64>) -> Self {
        Self::symmetrized(a * a.transpose())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * s)
    }

    /// Removes the isotropic part: `A − (tr(A)/d)·I`.
    pub fn traceless(&self) -> Self {
        let d = self.dim();
        let shift = self.trace() / d as f64;
        let mut m = self.0.clone();
        for i in 0..d {
            m[(i, i)] -= shift;
        }
        Self(m)
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
///
/// Column `k` of `eigenvectors` belongs to `eigenvalues[k]`; each column has
/// its first non-negligible component non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    /// `V·diag(f(λ))·Vᵀ`
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let mut scaled = self.eigenvectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.eigenvalues[k]);
        }
        SymMatrix::symmetrized(scaled * self.eigenvectors.transpose())
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.reconstruct_with(|l| l)
    }
}

pub fn sym_eigen(a: &SymMatrix) -> EigenDecomposition {
    let d = a.dim();
    let raw = SymmetricEigen::new(a.as_matrix().clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| raw.eigenvalues[j].total_cmp(&raw.eigenvalues[i]));

    let mut eigenvalues = DVector::zeros(d);
    let mut eigenvectors = DMatrix::zeros(d, d);
    for (k, &src) in order.iter().enumerate() {
        eigenvalues[k] = raw.eigenvalues[src];
        let mut col = raw.eigenvectors.column(src).clone_owned();
        if let Some(first) = col.iter().copied().find(|c| c.abs() > SIGN_EPS) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
        eigenvectors.set_column(k, &col);
    }
    EigenDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

/// Matrix exponential of a symmetric matrix via its eigendecomposition.
pub fn sym_exp(a: &SymMatrix) -> SymMatrix {
    sym_eigen(a).reconstruct_with(f64::exp)
}

pub fn trace(a: &DMatrix<f64>) -> f64 {
    a.trace()
}

pub fn det(a: &DMatrix<f64>) -> Result<f64, LinalgError> {
    check_square(a)?;
    Ok(a.clone().lu().determinant())
}

pub fn inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    check_square(a)?;
    let lu = a.clone().lu();
    let det = lu.determinant();
    if !det.is_finite() || det.abs() <= SINGULAR_DET {
        return Err(singular(a, det));
    }
    lu.try_inverse().ok_or_else(|| singular(a, det))
}

fn singular(a: &DMatrix<f64>, det: f64) -> LinalgError {
    let sv = a.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    LinalgError::Singular { det, condition }
}

fn check_square(a: &DMatrix<f64>) -> Result<(), LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(())
}
