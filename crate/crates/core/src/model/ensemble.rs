use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{fit, Domain, FitConfig, MarsSurrogate};
use crate::error::{Error, Result};

/// Several surrogates of one model, standing in for posterior draws.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    label: String,
    members: Vec<MarsSurrogate>,
}

impl Ensemble {
    pub fn new(label: impl Into<String>, members: Vec<MarsSurrogate>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(Error::InvalidArgument("an ensemble needs at least one member".into()));
        };
        for m in &members[1..] {
            if m.dim() != first.dim() {
                return Err(Error::DimensionMismatch { expected: first.dim(), got: m.dim() });
            }
            if m.domain() != first.domain() {
                return Err(Error::InvalidModel("ensemble members must share a domain".into()));
            }
        }
        Ok(Self { label: label.into(), members })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn members(&self) -> &[MarsSurrogate] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim()
    }

    pub fn domain(&self) -> &Domain {
        self.members[0].domain()
    }
}

/// Fit `b` surrogates: member 0 on the full data, the rest on bootstrap
/// resamples of the rows. Resample `i` draws from a stream keyed by
/// `(seed, i)`, so results do not depend on scheduling.
pub fn fit_ensemble(
    x: &DMatrix<f64>,
    y: &[f64],
    domain: &Domain,
    cfg: &FitConfig,
    b: usize,
    seed: u64,
    label: &str,
) -> Result<Ensemble> {
    if b == 0 {
        return Err(Error::InvalidArgument("ensemble size must be at least 1".into()));
    }
    let n = x.nrows();
    let members = (0..b)
        .into_par_iter()
        .map(|i| {
            let model = if i == 0 {
                fit(x, y, domain, cfg)?.model
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let xb = DMatrix::from_fn(n, x.ncols(), |r, c| x[(rows[r], c)]);
                let yb: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
                fit(&xb, &yb, domain, cfg)?.model
            };
            Ok(model.with_label(format!("{label}#{i}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(label, members)
}
