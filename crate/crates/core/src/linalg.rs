//! Small dense symmetric matrix helpers.

use nalgebra::{DMatrix, SymmetricEigen};

/// Eigenvalues with `|lambda| <= PINV_RELATIVE_TOL * |tr V| / d` are treated
/// as zero when pseudo-inverting.
pub const PINV_RELATIVE_TOL: f64 = 1e-10;

/// Maximum asymmetry accepted for a computed covariance matrix.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct PseudoInverse {
    pub matrix: DMatrix<f64>,
    pub rank: usize,
    /// A retained eigenvalue is negative.
    pub indefinite: bool,
}

/// Moore-Penrose inverse of a symmetric matrix through its eigen
/// decomposition.
pub fn pseudo_inverse_symmetric(v: &DMatrix<f64>) -> PseudoInverse {
    let d = v.nrows();
    let tol = PINV_RELATIVE_TOL * v.trace().abs() / d as f64;
    let eig = SymmetricEigen::new(v.clone());
    let mut inv_vals = DMatrix::zeros(d, d);
    let mut rank = 0;
    let mut indefinite = false;
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() > tol && lambda != 0.0 {
            inv_vals[(i, i)] = 1.0 / lambda;
            rank += 1;
            indefinite |= lambda < 0.0;
        }
    }
    let q = &eig.eigenvectors;
    PseudoInverse {
        matrix: q * inv_vals * q.transpose(),
        rank,
        indefinite,
    }
}

pub fn eigenvalues_symmetric(v: &DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(v.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Largest `|v_ij - v_ji|`.
pub fn asymmetry(v: &DMatrix<f64>) -> f64 {
    (v - v.transpose()).abs().max()
}

/// Entrywise (Frobenius) norm.
pub fn frobenius(v: &DMatrix<f64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
