use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// `trace(Σ (I − P_B) C (I − P_B))` with `P_B` the orthogonal projector onto
/// the columns of `B`.
pub fn poincare_bound(c: &DMatrix<f64>, sigma: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let p = c.nrows();
    if !c.is_square() || sigma.shape() != (p, p) {
        return Err(Error::DimensionMismatch { expected: p, got: sigma.nrows() });
    }
    if b.nrows() != p {
        return Err(Error::DimensionMismatch { expected: p, got: b.nrows() });
    }
    let proj = if b.ncols() == 0 {
        DMatrix::zeros(p, p)
    } else {
        let svd = b.clone().svd(true, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if b.ncols() > p || !(smin > 1e-12 * smax) {
            return Err(Error::RankDeficient);
        }
        let u = svd.u.expect("requested U");
        &u * u.transpose()
    };
    let q = DMatrix::identity(p, p) - proj;
    Ok((sigma * &q * c * &q).trace())
}

/// `Σ^{1/2} C Σ^{1/2}`, the matrix of the same function in coordinates
/// whitened by the prior covariance.
pub fn canonical_transform(c: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if sigma.shape() != c.shape() {
        return Err(Error::DimensionMismatch { expected: c.nrows(), got: sigma.nrows() });
    }
    let eig = SymmetricEigen::new(sigma.clone());
    if eig.eigenvalues.min() < 0.0 {
        return Err(Error::InvalidArgument("covariance must be positive semi-definite".into()));
    }
    let root = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
        * eig.eigenvectors.transpose();
    Ok(&root * c * &root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn full_basis_gives_zero() {
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![0.1, 0.3]));
        assert!(poincare_bound(&c, &s, &DMatrix::identity(2, 2)).unwrap().abs() < 1e-15);
    }

    #[test]
    fn orthogonal_basis_keeps_everything() {
        // f = x1 has C = e1 e1ᵀ; projecting onto e2 removes nothing
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0 / 12.0, 0.5]));
        let b = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert!((poincare_bound(&c, &s, &b).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        assert!((poincare_bound(&c, &s, &DMatrix::zeros(2, 0)).unwrap() - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn rank_deficient_basis_rejected() {
        let c = DMatrix::identity(3, 3);
        let b = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        assert!(matches!(poincare_bound(&c, &c, &b), Err(Error::RankDeficient)));
    }

    #[test]
    fn canonical_transform_of_diagonal_covariance() {
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]));
        let t = canonical_transform(&c, &s).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[8.0, 6.0, 6.0, 27.0]);
        assert!((t - want).norm() < 1e-12);
    }
}
