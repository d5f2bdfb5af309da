use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{activity_scores, select_dim, CoActiveDecomposition};
use crate::error::{Error, Result};

/// Summary of one pair, as written by `coas analyze`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub pair: [String; 2],
    pub concordance: f64,
    pub discordance: f64,
    pub t_k: f64,
    pub t_l: f64,
    pub eigvals: Vec<f64>,
    pub contributions: Vec<f64>,
    /// One inner vector per eigenvector, in eigenvalue order.
    pub eigvecs: Vec<Vec<f64>>,
    pub signed_scores: Vec<f64>,
    pub unsigned_scores: Vec<f64>,
    pub q: usize,
    pub r_selected: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl AnalysisReport {
    /// `q = None` picks `q` as the number of eigenvalues with `|λ| ≥ tau`,
    /// so `tau` is then required.
    pub fn new(dec: &CoActiveDecomposition, pair: (&str, &str), q: Option<usize>, tau: Option<f64>) -> Result<Self> {
        let mut warnings = Vec::new();
        let sel = tau.map(|t| select_dim(dec.eigvals.as_slice(), t)).transpose()?;
        if let Some(w) = sel.as_ref().and_then(|s| s.warning.clone()) {
            warnings.push(w);
        }
        let r_selected = sel.as_ref().map(|s| s.r);
        let q = match (q, r_selected) {
            (Some(q), _) => q,
            (None, Some(0)) => {
                warnings.push("q=auto selected no directions; using q=1".into());
                1
            }
            (None, Some(r)) => r,
            (None, None) => return Err(Error::InvalidArgument("q=auto requires tau".into())),
        };
        let scores = activity_scores(dec, q)?;
        Ok(Self {
            pair: [pair.0.to_owned(), pair.1.to_owned()],
            concordance: dec.concordance,
            discordance: dec.discordance(),
            t_k: dec.t_k,
            t_l: dec.t_l,
            eigvals: dec.eigvals.iter().copied().collect(),
            contributions: dec.contributions.iter().copied().collect(),
            eigvecs: dec.eigvecs.column_iter().map(|c| c.iter().copied().collect()).collect(),
            signed_scores: scores.signed,
            unsigned_scores: scores.unsigned,
            q,
            r_selected,
            warnings,
        })
    }
}

/// One input's activity for each function relative to their joint co-activity.
#[derive(Clone, Debug, PartialEq)]
pub struct RatioRow {
    pub input: usize,
    pub k_ratio: f64,
    pub l_ratio: f64,
}

/// `α_k / α_kl` and `α_l / α_kl` per input.
pub fn ratio_rows(alpha_k: &[f64], alpha_l: &[f64], alpha_kl: &[f64]) -> Result<Vec<RatioRow>> {
    if alpha_k.len() != alpha_kl.len() || alpha_l.len() != alpha_kl.len() {
        return Err(Error::DimensionMismatch { expected: alpha_kl.len(), got: alpha_k.len().min(alpha_l.len()) });
    }
    Ok((0..alpha_kl.len())
        .map(|i| RatioRow { input: i + 1, k_ratio: alpha_k[i] / alpha_kl[i], l_ratio: alpha_l[i] / alpha_kl[i] })
        .collect())
}

pub fn write_ratio_csv<W: Write>(mut w: W, rows: &[RatioRow]) -> Result<()> {
    writeln!(w, "input,alpha_k_over_alpha_kl,alpha_l_over_alpha_kl")?;
    for r in rows {
        writeln!(w, "{},{:.16e},{:.16e}", r.input, r.k_ratio, r.l_ratio)?;
    }
    Ok(())
}
