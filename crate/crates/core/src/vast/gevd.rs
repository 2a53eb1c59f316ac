//! Joint diagonalisation of the `(R_b, R_d)` pencil.
//!
//! Symmetric-definite reduction: factor `R_d + δI = G Gᵀ`, solve the ordinary
//! symmetric eigenproblem of `C = G⁻¹ R_b G⁻ᵀ = Q Λ Qᵀ`, then back-transform
//! `U = G⁻ᵀ Q`. This gives `Uᵀ(R_d + δI)U = I` and `UᵀR_bU = Λ`.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use super::correlation::CorrelationSet;
use super::VastError;

/// Relative diagonal loading of `R_d`: `δ = REGULARIZATION * trace(R_d) / LJ`.
pub const REGULARIZATION: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct VastBasis {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// `LJ x V`, column `v` pairs with `eigenvalues[v]`.
    pub eigenvectors: DMatrix<f64>,
    /// The `δ` added to the diagonal of `R_d`.
    pub regularization_used: f64,
}

impl VastBasis {
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// The regularised dark-zone matrix the basis is orthonormal against.
    pub fn regularized_r_d(&self, corr: &CorrelationSet) -> DMatrix<f64> {
        let n = corr.r_d_matrix.nrows();
        &corr.r_d_matrix + DMatrix::identity(n, n) * self.regularization_used
    }
}

/// Diagonal loading applied to `R_d`. Falls back to the bright-zone trace
/// when the dark zone is silent.
pub fn regularization(corr: &CorrelationSet) -> f64 {
    let n = corr.r_d_matrix.nrows() as f64;
    let tr_d = corr.r_d_matrix.trace();
    let base = if tr_d > 0.0 { tr_d } else { corr.r_b_matrix.trace() };
    REGULARIZATION * base / n
}

/// Top-`v` generalised eigenpairs.
pub fn gevd(corr: &CorrelationSet, v: usize) -> Result<VastBasis, VastError> {
    let n = corr.r_b_matrix.nrows();
    if v == 0 || v > n {
        return Err(VastError::RankTooLarge { rank: v, max: n });
    }
    let delta = regularization(corr);
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(VastError::DecompositionFailure(
            "both correlation matrices vanish".into(),
        ));
    }
    let r_d_reg = &corr.r_d_matrix + DMatrix::identity(n, n) * delta;
    let chol = Cholesky::new(r_d_reg).ok_or_else(|| {
        VastError::DecompositionFailure("regularised R_d is not positive definite".into())
    })?;
    let g = chol.l();

    // C = G⁻¹ R_b G⁻ᵀ via two triangular solves.
    let x = g
        .solve_lower_triangular(&corr.r_b_matrix)
        .ok_or_else(|| VastError::DecompositionFailure("singular Cholesky factor".into()))?;
    let mut c = g
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| VastError::DecompositionFailure("singular Cholesky factor".into()))?;
    c = (&c + c.transpose()) * 0.5;

    let eig = SymmetricEigen::try_new(c, f64::EPSILON, 0).ok_or_else(|| {
        VastError::DecompositionFailure("symmetric eigensolver did not converge".into())
    })?;

    // Descending; ties keep original index order (stable sort).
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order.truncate(v);

    let q = DMatrix::from_fn(n, v, |r, col| eig.eigenvectors[(r, order[col])]);
    let mut u = g
        .transpose()
        .solve_upper_triangular(&q)
        .ok_or_else(|| VastError::DecompositionFailure("singular Cholesky factor".into()))?;
    for mut col in u.column_iter_mut() {
        // Largest-magnitude entry positive; first index wins ties.
        let (idx, _) = col
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, &x)| if x.abs() > best.1 { (i, x.abs()) } else { best });
        if col[idx] < 0.0 {
            col.neg_mut();
        }
    }

    Ok(VastBasis {
        eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        eigenvectors: u,
        regularization_used: delta,
    })
}

/// `(‖UᵀR_dU − I‖_F, ‖UᵀR_bU − Λ‖_F)` against the regularised `R_d`.
pub fn diagonalization_residuals(corr: &CorrelationSet, basis: &VastBasis) -> (f64, f64) {
    let u = &basis.eigenvectors;
    let v = basis.rank();
    let d = u.transpose() * basis.regularized_r_d(corr) * u - DMatrix::identity(v, v);
    let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&basis.eigenvalues));
    let b = u.transpose() * &corr.r_b_matrix * u - lambda;
    (d.norm(), b.norm())
}
