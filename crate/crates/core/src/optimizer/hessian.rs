use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Relative curvature threshold below which an update is skipped.
pub const CURVATURE_SKIP_RATIO: f64 = 1e-10;

/// Symmetric positive-definite approximation to the inverse Hessian.
#[derive(Clone, Debug, PartialEq)]
pub struct InverseHessian {
    matrix: DMatrix<f64>,
}

impl InverseHessian {
    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
        }
    }

    /// Wraps a square matrix after checking symmetry.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension(format!(
                "inverse Hessian must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > SYMMETRY_TOLERANCE * (1.0 + matrix.amax()) {
            return Err(Error::Dimension(format!(
                "inverse Hessian is not symmetric (max asymmetry {asym:e})"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn is_positive_definite(&self) -> bool {
        self.dim() == 0 || self.matrix.clone().cholesky().is_some()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim() == 0 {
            return f64::INFINITY;
        }
        self.matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `H v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(v)).as_slice().to_vec()
    }

    /// Block-diagonal extension `[[H, 0], [0, I_m]]` for `m` new parameters.
    pub fn expand(&self, new_params: usize) -> Self {
        let n = self.dim();
        let mut m = DMatrix::identity(n + new_params, n + new_params);
        m.view_mut((0, 0), (n, n)).copy_from(&self.matrix);
        Self { matrix: m }
    }

    /// Principal submatrix with the rows and columns in `indices` removed.
    pub fn freeze(&self, indices: &[usize]) -> Result<Self> {
        let n = self.dim();
        for (i, &idx) in indices.iter().enumerate() {
            if idx >= n {
                return Err(Error::IndexOutOfRange { index: idx, len: n });
            }
            if indices[..i].contains(&idx) {
                return Err(Error::Config(format!("index {idx} frozen twice")));
            }
        }
        let keep: Vec<usize> = (0..n).filter(|i| !indices.contains(i)).collect();
        let m = DMatrix::from_fn(keep.len(), keep.len(), |r, c| self.matrix[(keep[r], keep[c])]);
        Ok(Self { matrix: m })
    }
}

/// Result of one BFGS update attempt.
#[derive(Clone, Debug)]
pub struct Update {
    pub h: InverseHessian,
    pub skipped: bool,
}

/// `H+ = (I - rho s y^T) H (I - rho y s^T) + rho s s^T` with `rho = 1/(y^T s)`.
///
/// When `y^T s <= 1e-10 |y| |s|` the update is skipped and `H` returned as is.
pub fn bfgs_update(h: &InverseHessian, s: &[f64], y: &[f64]) -> Result<Update> {
    let n = h.dim();
    if s.len() != n || y.len() != n {
        return Err(Error::Dimension(format!(
            "update vectors of length {}/{} for a {n}x{n} inverse Hessian",
            s.len(),
            y.len()
        )));
    }
    let s = DVector::from_column_slice(s);
    let y = DVector::from_column_slice(y);
    let ys = y.dot(&s);
    if ys <= CURVATURE_SKIP_RATIO * y.norm() * s.norm() {
        log::debug!("skipping BFGS update: y^T s = {ys:e}");
        return Ok(Update {
            h: h.clone(),
            skipped: true,
        });
    }
    let rho = 1.0 / ys;
    let left = DMatrix::identity(n, n) - &s * y.transpose() * rho;
    let mut m = &left * h.matrix() * left.transpose() + &s * s.transpose() * rho;
    // Exact symmetry; the product above can differ by rounding across the diagonal.
    m = (&m + m.transpose()) * 0.5;
    Ok(Update {
        h: InverseHessian { matrix: m },
        skipped: false,
    })
}
