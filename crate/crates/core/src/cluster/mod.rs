//! Concordance grids over ensembles and their discordance embedding.

mod mds;

pub use mds::{mds_embed, model_centers, pava, Embedding, StressSidecar, MAX_ITER, MIN_IMPROVEMENT};

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::analysis::{concordance, discordance, CONSTANT_TOL};
use crate::closedform::{cmat, cmat_trace, InputPrior};
use crate::error::{Error, Result};
use crate::model::{Ensemble, MarsSurrogate};

/// Whether member pairs compute the full matrix or only its diagonal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridMode {
    Full,
    TraceOnly,
}

/// Concordance between two models over all their member pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcordanceSummary {
    pub labels: (String, String),
    pub samples: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator); zero for one sample.
    pub sd: f64,
}

impl ConcordanceSummary {
    fn new(labels: (String, String), samples: Vec<f64>) -> Self {
        let n = samples.len();
        let mean = if n == 0 { f64::NAN } else { samples.iter().sum::<f64>() / n as f64 };
        let sd = if n < 2 {
            if n == 0 { f64::NAN } else { 0.0 }
        } else {
            (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { labels, samples, mean, sd }
    }
}

/// Member-level concordances and their per-model summaries.
#[derive(Clone, Debug)]
pub struct ConcordanceGrid {
    pub model_labels: Vec<String>,
    pub member_labels: Vec<String>,
    /// Model index of each member.
    pub membership: Vec<usize>,
    /// Member-by-member concordance; `NaN` in rows of excluded members.
    pub kappa: DMatrix<f64>,
    /// Row-major `K × K`.
    pub summaries: Vec<ConcordanceSummary>,
    /// Members dropped because their gradient vanishes.
    pub excluded: Vec<usize>,
    /// Member-with-itself pairs included in the diagonal summaries.
    pub self_pairs: usize,
    pub pair_count: usize,
}

impl ConcordanceGrid {
    pub fn models(&self) -> usize {
        self.model_labels.len()
    }

    pub fn summary(&self, k: usize, l: usize) -> &ConcordanceSummary {
        &self.summaries[k * self.models() + l]
    }

    /// Indices of members that take part in the grid.
    pub fn included(&self) -> Vec<usize> {
        (0..self.member_labels.len()).filter(|i| !self.excluded.contains(i)).collect()
    }

    /// `K × K` matrix of mean concordances.
    pub fn mean_matrix(&self) -> DMatrix<f64> {
        let k = self.models();
        DMatrix::from_fn(k, k, |a, b| self.summary(a, b).mean)
    }

    /// Discordance between included members, with their model membership.
    pub fn discordance_matrix(&self) -> (DMatrix<f64>, Vec<usize>) {
        let idx = self.included();
        let n = idx.len();
        let d = DMatrix::from_fn(n, n, |a, b| if a == b { 0.0 } else { discordance(self.kappa[(idx[a], idx[b])]) });
        (d, idx.iter().map(|&i| self.membership[i]).collect())
    }

    /// Long format: `model_k,model_l,mean,sd`.
    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "model_k,model_l,mean,sd")?;
        for s in &self.summaries {
            writeln!(w, "{},{},{:.16e},{:.16e}", s.labels.0, s.labels.1, s.mean, s.sd)?;
        }
        Ok(())
    }

    /// Every member pair: `member_k,member_l,kappa`.
    pub fn write_samples_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "member_k,member_l,kappa")?;
        for a in self.included() {
            for b in self.included() {
                writeln!(w, "{},{},{:.16e}", self.member_labels[a], self.member_labels[b], self.kappa[(a, b)])?;
            }
        }
        Ok(())
    }
}

fn pair_trace(a: &MarsSurrogate, b: &MarsSurrogate, prior: &InputPrior, mode: GridMode) -> Result<f64> {
    match mode {
        GridMode::Full => Ok(cmat(a, b, prior)?.trace()),
        GridMode::TraceOnly => cmat_trace(a, b, prior),
    }
}

/// Concordance for every pair of members across all ensembles. Pairs are
/// computed in parallel; members with a vanishing gradient are excluded.
pub fn pairwise_concordance(ensembles: &[Ensemble], prior: &InputPrior, mode: GridMode) -> Result<ConcordanceGrid> {
    let Some(first) = ensembles.first() else {
        return Err(Error::InvalidArgument("no ensembles given".into()));
    };
    for e in ensembles {
        if e.dim() != first.dim() {
            return Err(Error::DimensionMismatch { expected: first.dim(), got: e.dim() });
        }
    }
    if prior.dim() != first.dim() {
        return Err(Error::DimensionMismatch { expected: first.dim(), got: prior.dim() });
    }
    let members: Vec<(usize, &MarsSurrogate)> =
        ensembles.iter().enumerate().flat_map(|(k, e)| e.members().iter().map(move |m| (k, m))).collect();
    let n = members.len();
    let traces = members
        .par_iter()
        .map(|(_, m)| pair_trace(m, m, prior, mode))
        .collect::<Result<Vec<f64>>>()?;
    let tmax = traces.iter().copied().fold(0.0, f64::max);
    let excluded: Vec<usize> = (0..n).filter(|&i| !(traces[i] > CONSTANT_TOL * tmax)).collect();
    if !excluded.is_empty() {
        log::warn!("{} constant member(s) excluded from the concordance grid", excluded.len());
    }
    let keep: Vec<usize> = (0..n).filter(|i| !excluded.contains(i)).collect();
    let pairs: Vec<(usize, usize)> =
        keep.iter().enumerate().flat_map(|(a, &i)| keep[a + 1..].iter().map(move |&j| (i, j))).collect();
    let cross = pairs
        .par_iter()
        .map(|&(i, j)| {
            let t = pair_trace(members[i].1, members[j].1, prior, mode)?;
            concordance(t, traces[i], traces[j])
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut kappa = DMatrix::from_element(n, n, f64::NAN);
    for &i in &keep {
        kappa[(i, i)] = 1.0;
    }
    for (&(i, j), &k) in pairs.iter().zip(&cross) {
        kappa[(i, j)] = k;
        kappa[(j, i)] = k;
    }
    let kk = ensembles.len();
    let mut summaries = Vec::with_capacity(kk * kk);
    let mut self_pairs = 0;
    for a in 0..kk {
        for b in 0..kk {
            let mut samples = Vec::new();
            for &i in keep.iter().filter(|&&i| members[i].0 == a) {
                for &j in keep.iter().filter(|&&j| members[j].0 == b) {
                    samples.push(kappa[(i, j)]);
                    self_pairs += usize::from(i == j);
                }
            }
            if samples.is_empty() {
                log::warn!("no usable member pairs for ({}, {})", ensembles[a].label(), ensembles[b].label());
            }
            let labels = (ensembles[a].label().to_owned(), ensembles[b].label().to_owned());
            summaries.push(ConcordanceSummary::new(labels, samples));
        }
    }
    Ok(ConcordanceGrid {
        model_labels: ensembles.iter().map(|e| e.label().to_owned()).collect(),
        member_labels: members.iter().map(|(_, m)| m.label().to_owned()).collect(),
        membership: members.iter().map(|(k, _)| *k).collect(),
        kappa,
        summaries,
        excluded,
        self_pairs,
        pair_count: pairs.len() + n,
    })
}

/// Write embedded points as `label,member_index,x,y`.
pub fn write_points_csv<W: Write>(mut w: W, labels: &[String], membership: &[usize], points: &DMatrix<f64>) -> Result<()> {
    writeln!(w, "label,member_index,x,y")?;
    let mut seen = vec![0usize; labels.len()];
    for (r, &g) in membership.iter().enumerate() {
        let y = if points.ncols() > 1 { points[(r, 1)] } else { 0.0 };
        writeln!(w, "{},{},{:.16e},{:.16e}", labels[g], seen[g], points[(r, 0)], y)?;
        seen[g] += 1;
    }
    Ok(())
}

/// Write group centers as `label,cx,cy`.
pub fn write_centers_csv<W: Write>(mut w: W, labels: &[String], centers: &DMatrix<f64>) -> Result<()> {
    writeln!(w, "label,cx,cy")?;
    for (g, label) in labels.iter().enumerate() {
        let cy = if centers.ncols() > 1 { centers[(g, 1)] } else { 0.0 };
        writeln!(w, "{},{:.16e},{:.16e}", label, centers[(g, 0)], cy)?;
    }
    Ok(())
}
