//! Quantities derived from co-activity matrices.

mod bound;
mod report;

pub use bound::{canonical_transform, poincare_bound};
pub use report::{ratio_rows, write_ratio_csv, AnalysisReport, RatioRow};

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::closedform::CoActiveMatrix;
use crate::error::{Error, Result};

/// Relative size below which a gradient trace counts as zero.
pub const CONSTANT_TOL: f64 = 1e-12;
/// Overshoot of `|κ|` past 1 that is silently clamped.
const CLAMP_TOL: f64 = 1e-12;
/// Overshoot that is clamped with a warning; anything larger is an error.
const CLAMP_WARN_TOL: f64 = 1e-8;

/// `(C_kl + C_lk) / 2`, forced exactly symmetric. `C_lk` defaults to `C_klᵀ`.
pub fn symmetrize(c_kl: &DMatrix<f64>, c_lk: Option<&DMatrix<f64>>) -> Result<DMatrix<f64>> {
    if !c_kl.is_square() {
        return Err(Error::InvalidArgument("co-activity matrix must be square".into()));
    }
    let other = match c_lk {
        Some(c) if c.shape() != c_kl.shape() => {
            return Err(Error::DimensionMismatch { expected: c_kl.nrows(), got: c.nrows() })
        }
        Some(c) => c.transpose(),
        None => c_kl.clone(),
    };
    // average C_kl with C_lkᵀ, then with its own transpose
    let avg = (c_kl + other) * 0.5;
    Ok((&avg + avg.transpose()) * 0.5)
}

fn check_trace(t: f64, scale: f64) -> Result<()> {
    if !(t > 0.0) || t <= CONSTANT_TOL * scale {
        return Err(Error::ConstantFunction { trace: t });
    }
    Ok(())
}

/// `κ = t_kl / √(t_k t_l)`.
pub fn concordance(t_kl: f64, t_k: f64, t_l: f64) -> Result<f64> {
    let scale = t_k.max(t_l);
    check_trace(t_k, scale)?;
    check_trace(t_l, scale)?;
    let k = t_kl / (t_k * t_l).sqrt();
    let over = k.abs() - 1.0;
    if over <= 0.0 {
        return Ok(k);
    }
    if over > CLAMP_WARN_TOL || k.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "traces violate Cauchy-Schwarz: t_kl = {t_kl}, t_k = {t_k}, t_l = {t_l}"
        )));
    }
    if over > CLAMP_TOL {
        log::warn!("concordance {k} clamped to {}", k.signum());
    }
    Ok(k.signum())
}

/// `√((1 − κ)/2)`, a pseudo-metric on gradient fields.
pub fn discordance(kappa: f64) -> f64 {
    ((1.0 - kappa) / 2.0).max(0.0).sqrt()
}

/// Eigenstructure of a symmetrized co-activity matrix.
#[derive(Clone, Debug)]
pub struct CoActiveDecomposition {
    pub v: DMatrix<f64>,
    /// Ordered by decreasing magnitude.
    pub eigvals: DVector<f64>,
    /// Orthonormal columns matching `eigvals`.
    pub eigvecs: DMatrix<f64>,
    pub contributions: DVector<f64>,
    pub concordance: f64,
    pub t_k: f64,
    pub t_l: f64,
}

/// Order eigenvalue indices by descending `|λ|`; equal magnitudes keep
/// descending signed order.
fn magnitude_order(vals: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| {
        vals[b]
            .abs()
            .partial_cmp(&vals[a].abs())
            .unwrap_or(Ordering::Equal)
            .then(vals[b].partial_cmp(&vals[a]).unwrap_or(Ordering::Equal))
    });
    idx
}

/// Flip `w` so its largest-magnitude component is positive. Components
/// within rounding of the maximum count as tied and the first one decides.
fn fix_sign(mut w: DVector<f64>) -> DVector<f64> {
    let max = w.amax();
    if let Some(lead) = w.iter().position(|c| c.abs() >= max - 1e-12 * max.max(1.0)) {
        if w[lead] < 0.0 {
            w.neg_mut();
        }
    }
    w
}

/// Eigendecomposition of `V` with concordance and contributions.
pub fn decompose(v: &DMatrix<f64>, t_k: f64, t_l: f64) -> Result<CoActiveDecomposition> {
    if !v.is_square() {
        return Err(Error::InvalidArgument("V must be square".into()));
    }
    let asym = (v - v.transpose()).amax();
    if asym > 1e-10 * v.amax().max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidArgument(format!("V is not symmetric (max asymmetry {asym:e})")));
    }
    let kappa = concordance(v.trace(), t_k, t_l)?;
    let eig = SymmetricEigen::new(v.clone());
    let order = magnitude_order(eig.eigenvalues.as_slice());
    let p = v.nrows();
    let eigvals = DVector::from_iterator(p, order.iter().map(|&i| eig.eigenvalues[i]));
    let cols: Vec<DVector<f64>> = order.iter().map(|&i| fix_sign(eig.eigenvectors.column(i).into_owned())).collect();
    let eigvecs = DMatrix::from_columns(&cols);
    let norm = (t_k * t_l).sqrt();
    let contributions = eigvals.map(|l| l / norm);
    Ok(CoActiveDecomposition { v: v.clone(), eigvals, eigvecs, contributions, concordance: kappa, t_k, t_l })
}

impl CoActiveDecomposition {
    /// Decomposition of `C_kl` given the two self traces.
    pub fn from_matrix(c_kl: &CoActiveMatrix, t_k: f64, t_l: f64) -> Result<Self> {
        decompose(&symmetrize(c_kl.entries(), None)?, t_k, t_l)
    }

    pub fn dim(&self) -> usize {
        self.eigvals.len()
    }

    pub fn discordance(&self) -> f64 {
        discordance(self.concordance)
    }

    pub fn direction(&self, j: usize) -> DVector<f64> {
        self.eigvecs.column(j).into_owned()
    }
}

/// Per-input co-activity scores using the leading `q` eigenpairs.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivityScores {
    pub q: usize,
    pub signed: Vec<f64>,
    pub unsigned: Vec<f64>,
}

/// `α_i(q) = Σ_{j≤q} λ_j w_ij²` and its unsigned twin with `|λ_j|`.
pub fn activity_scores(dec: &CoActiveDecomposition, q: usize) -> Result<ActivityScores> {
    let p = dec.dim();
    if q == 0 || q > p {
        return Err(Error::InvalidArgument(format!("q must lie in 1..={p}, got {q}")));
    }
    let score = |i: usize, f: &dyn Fn(f64) -> f64| -> f64 {
        (0..q).map(|j| f(dec.eigvals[j]) * dec.eigvecs[(i, j)].powi(2)).sum()
    };
    Ok(ActivityScores {
        q,
        signed: (0..p).map(|i| score(i, &|l| l)).collect(),
        unsigned: (0..p).map(|i| score(i, &f64::abs)).collect(),
    })
}

/// `H = Σ_k C_k` over self matrices.
pub fn shared_matrix(cs: &[CoActiveMatrix]) -> Result<DMatrix<f64>> {
    let Some(first) = cs.first() else {
        return Err(Error::InvalidArgument("shared matrix needs at least one input".into()));
    };
    let p = first.dim();
    let mut h = DMatrix::zeros(p, p);
    for c in cs {
        if c.dim() != p {
            return Err(Error::DimensionMismatch { expected: p, got: c.dim() });
        }
        let (a, b) = c.labels();
        if a != b {
            log::warn!("shared matrix input ({a}, {b}) is a cross matrix");
        }
        h += c.entries();
    }
    Ok(h)
}

/// Dimension suggested by an eigenvalue threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct DimSelection {
    /// Number of eigenvalues with `|λ| ≥ τ`.
    pub r: usize,
    /// Largest `|λ_j| / |λ_{j+1}|` and the `j` (1-based) where it occurs.
    pub max_gap: Option<(usize, f64)>,
    pub warning: Option<String>,
}

pub fn select_dim(eigvals: &[f64], tau: f64) -> Result<DimSelection> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    let mut mags: Vec<f64> = eigvals.iter().map(|l| l.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let r = mags.iter().filter(|&&m| m >= tau).count();
    let max_gap = mags
        .windows(2)
        .enumerate()
        .map(|(j, w)| (j + 1, if w[1] > 0.0 { w[0] / w[1] } else { f64::INFINITY }))
        .filter(|(_, g)| !g.is_nan())
        .max_by(|a, b| a.1.total_cmp(&b.1));
    let warning = (r == 0).then(|| format!("no eigenvalue reaches tau = {tau}"));
    Ok(DimSelection { r, max_gap, warning })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `180·C` for the polynomial pair, from the exact gradient moments.
    fn poly_c12(beta: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[480.0, 165.0 + 315.0 * beta, 165.0, 60.0 + 90.0 * beta]) / 180.0
    }

    #[test]
    fn symmetrize_cases() {
        let c = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(symmetrize(&c, None).unwrap(), DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]));
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(symmetrize(&s, None).unwrap(), s);
        let beta = 0.7;
        let v = symmetrize(&poly_c12(beta), Some(&poly_c12(beta).transpose())).unwrap();
        assert!((v[(0, 1)] - (165.0 + 315.0 * beta / 2.0) / 180.0).abs() < 1e-15);
        assert!(symmetrize(&c, Some(&DMatrix::zeros(3, 3))).is_err());
    }

    #[test]
    fn concordance_edge_cases() {
        assert_eq!(concordance(2.0, 2.0, 2.0).unwrap(), 1.0);
        assert_eq!(discordance(1.0), 0.0);
        assert_eq!(discordance(-1.0), 1.0);
        // f against a + b f
        let (t, b) = (1.7, -2.5);
        assert!((concordance(b * t, t, b * b * t).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(concordance(1.0 + 1e-13, 1.0, 1.0).unwrap(), 1.0);
        assert!(concordance(2.0, 1.0, 1.0).is_err());
        assert!(matches!(concordance(0.0, 0.0, 1.0), Err(Error::ConstantFunction { .. })));
        assert!(matches!(concordance(0.0, 1e-15, 1.0), Err(Error::ConstantFunction { .. })));
    }

    #[test]
    fn magnitude_ordering_and_identity_vectors() {
        let v = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 2.0]));
        let d = decompose(&v, 1.0, 1.0).unwrap();
        assert_eq!(d.eigvals.as_slice(), &[2.0, -1.0]);
        assert_eq!(d.eigvecs, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        // equal magnitudes keep signed-descending order
        assert_eq!(magnitude_order(&[-3.0, 3.0, 1.0]), vec![1, 0, 2]);
    }

    #[test]
    fn sign_convention() {
        let w = fix_sign(DVector::from_vec(vec![0.3, -0.9, 0.2]));
        assert_eq!(w.as_slice(), &[-0.3, 0.9, -0.2]);
        let w = fix_sign(DVector::from_vec(vec![-0.5, 0.5]));
        assert_eq!(w.as_slice(), &[0.5, -0.5]);
    }

    #[test]
    fn scores_on_diagonal_matrix() {
        let v = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -1.0]));
        let d = decompose(&v, 1.0, 1.0).unwrap();
        let s = activity_scores(&d, 2).unwrap();
        assert_eq!(s.signed, vec![2.0, -1.0]);
        assert_eq!(s.unsigned, vec![2.0, 1.0]);
        assert!(activity_scores(&d, 0).is_err());
        assert!(activity_scores(&d, 3).is_err());
    }

    #[test]
    fn poly_pair_identities() {
        let beta = 3.0;
        let c1 = poly_c12(0.0);
        let c2 = DMatrix::from_row_slice(
            2,
            2,
            &[480.0, 165.0 + 315.0 * beta, 165.0 + 315.0 * beta, 60.0 + beta * (324.0 * beta + 180.0)],
        ) / 180.0;
        let v = symmetrize(&poly_c12(beta), None).unwrap();
        let d = decompose(&v, c1.trace(), c2.trace()).unwrap();
        assert!((d.concordance - 0.5514).abs() < 5e-4);
        assert!((d.contributions.sum() - d.concordance).abs() < 1e-12);
        let s = activity_scores(&d, 1).unwrap();
        for i in 0..2 {
            assert!((s.signed[i] - d.eigvals[0] * d.eigvecs[(i, 0)].powi(2)).abs() < 1e-15);
            assert!((s.signed[i].abs() - s.unsigned[i]).abs() < 1e-15);
        }
        // self decomposition: proportions of the total gradient
        let ds = decompose(&c2, c2.trace(), c2.trace()).unwrap();
        assert!((ds.contributions.sum() - 1.0).abs() < 1e-12);
        assert!(ds.contributions.iter().all(|&c| c >= -1e-12));
    }

    #[test]
    fn shared_matrix_sums() {
        use crate::closedform::MatrixKind;
        let c = CoActiveMatrix::new(poly_c12(0.0), ("f1", "f1"), MatrixKind::Plain);
        assert_eq!(shared_matrix(std::slice::from_ref(&c)).unwrap(), poly_c12(0.0));
        assert_eq!(shared_matrix(&[c.clone(), c.clone()]).unwrap(), poly_c12(0.0) * 2.0);
        assert!(shared_matrix(&[]).is_err());
    }

    #[test]
    fn dimension_selection() {
        let s = select_dim(&[2.0, -1.0, 0.001], 0.01).unwrap();
        assert_eq!(s.r, 2);
        assert_eq!(s.max_gap.unwrap().0, 2);
        assert!(s.warning.is_none());
        let s = select_dim(&[0.001, 0.002], 1.0).unwrap();
        assert_eq!(s.r, 0);
        assert!(s.warning.is_some());
        assert!(select_dim(&[1.0], 0.0).is_err());
    }

    #[test]
    fn asymmetric_input_rejected() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(decompose(&c, 1.0, 1.0).is_err());
    }
}
