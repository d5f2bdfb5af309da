//! Deterministic MARS fitting: forward stepwise selection of hinge pairs
//! followed by GCV backward pruning.
//!
//! The forward pass works in unit-scaled coordinates and keeps an orthonormal
//! basis of the selected columns. For a parent column `B` and input `v`, the
//! pair `B (x - t)_+`, `B (t - x)_+` spans the same space (given `B`) as
//! `B (x - t)_+` together with `B x`, so every knot of a `(parent, input)`
//! sweep can be scored from suffix sums in `O(n M)` total.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BasisTerm, Domain, HingeFactor, MarsSurrogate, Sign};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Upper bound on basis terms, intercept excluded.
    pub max_terms: usize,
    /// Highest interaction order of a basis term.
    pub max_degree: usize,
    pub min_samples: usize,
    /// GCV cost per knot. `None` picks 3 for interaction models, 2 for additive.
    pub penalty: Option<f64>,
    /// Forward pass stops once a step explains less than this fraction of the
    /// total sum of squares.
    pub threshold: f64,
    /// Extreme points per input excluded as knot candidates. `None` uses
    /// Friedman's rule `3 - log2(alpha / p)` with `alpha = 0.05`.
    pub endspan: Option<usize>,
    /// Minimum number of points between knots on one `(parent, input)` sweep.
    /// `None` uses Friedman's rule with `alpha = 0.05`.
    pub minspan: Option<usize>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_terms: 50,
            max_degree: 3,
            min_samples: 10,
            penalty: None,
            threshold: 1e-9,
            endspan: None,
            minspan: None,
        }
    }
}

impl FitConfig {
    fn knot_penalty(&self) -> f64 {
        self.penalty.unwrap_or(if self.max_degree > 1 { 3.0 } else { 2.0 })
    }

    fn endspan_for(&self, p: usize) -> usize {
        self.endspan.unwrap_or_else(|| (3.0 - (SPAN_ALPHA / p as f64).log2()).ceil() as usize)
    }

    fn minspan_for(&self, p: usize, active: usize) -> usize {
        self.minspan.unwrap_or_else(|| {
            let l = -(-(1.0 - SPAN_ALPHA).ln() / (p as f64 * active as f64)).log2() / 2.5;
            (l.floor() as usize).max(1)
        })
    }
}

const SPAN_ALPHA: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub n: usize,
    pub n_terms: usize,
    pub train_rmse: f64,
    pub r2: f64,
    pub gcv: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub model: MarsSurrogate,
    pub report: FitReport,
}

// relative tolerance for treating a column as lying in the current span
const SPAN_TOL: f64 = 1e-10;

/// Fit a hinge-spline surrogate to rows of `x` and responses `y`.
pub fn fit(x: &DMatrix<f64>, y: &[f64], domain: &Domain, cfg: &FitConfig) -> Result<FitOutcome> {
    let n = x.nrows();
    let p = x.ncols();
    if domain.dim() != p {
        return Err(Error::DimensionMismatch { expected: domain.dim(), got: p });
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    let min = cfg.min_samples.max(2);
    if n < min {
        return Err(Error::TooFewSamples { min, got: n });
    }
    if cfg.max_degree == 0 {
        return Err(Error::InvalidArgument("max_degree must be at least 1".into()));
    }
    for r in 0..n {
        for j in 0..p {
            if !domain.contains(j, x[(r, j)]) {
                return Err(Error::DomainViolation { row: r, var: j });
            }
        }
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("response {i} is not finite")));
    }

    let mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if tss <= 1e-28 * n as f64 * mean.abs().max(1.0).powi(2) {
        let report = FitReport {
            n,
            n_terms: 0,
            train_rmse: (tss / n as f64).sqrt(),
            r2: 1.0,
            gcv: 0.0,
            warnings: vec!["response has zero variance; returning a constant model".into()],
        };
        return Ok(FitOutcome { model: MarsSurrogate::constant(domain.clone(), mean), report });
    }

    let specs = Forward::new(x, y, domain, cfg).run(tss);
    let columns = native_columns(x, &specs);
    let (keep, _) = backward_prune(&columns, y, cfg.knot_penalty())?;
    let sub = select_columns(&columns, &keep);
    let (beta, rss) = least_squares(&sub, y)?;

    let mut intercept = 0.0;
    let mut terms = Vec::with_capacity(keep.len());
    for (&c, &b) in keep.iter().zip(beta.iter()) {
        if specs[c].is_empty() {
            intercept += b;
        } else {
            terms.push(BasisTerm::new(b, specs[c].clone()));
        }
    }
    let model = MarsSurrogate::new(p, domain.clone(), intercept, terms)?;
    let n_terms = model.terms().len();
    let report = FitReport {
        n,
        n_terms,
        train_rmse: (rss / n as f64).sqrt(),
        r2: 1.0 - rss / tss,
        gcv: gcv(rss, n, keep.len(), cfg.knot_penalty()),
        warnings: Vec::new(),
    };
    Ok(FitOutcome { model, report })
}

struct Forward<'a> {
    p: usize,
    cfg: &'a FitConfig,
    /// unit-scaled inputs, one vector per input
    u: Vec<Vec<f64>>,
    /// native inputs, used for knot values
    xs: Vec<Vec<f64>>,
    /// row indices per input sorted by decreasing value
    order: Vec<Vec<usize>>,
    cols: Vec<Vec<f64>>,
    specs: Vec<Vec<HingeFactor>>,
    /// orthonormal basis, stored by row
    q_rows: Vec<Vec<f64>>,
    resid: Vec<f64>,
}

struct Candidate {
    parent: usize,
    var: usize,
    /// row index whose value is the knot
    row: usize,
    gain: f64,
}

impl<'a> Forward<'a> {
    fn new(x: &DMatrix<f64>, y: &[f64], domain: &Domain, cfg: &'a FitConfig) -> Self {
        let n = x.nrows();
        let p = x.ncols();
        let xs: Vec<Vec<f64>> = (0..p).map(|j| x.column(j).iter().copied().collect()).collect();
        let u: Vec<Vec<f64>> = xs
            .iter()
            .enumerate()
            .map(|(j, col)| col.iter().map(|v| (v - domain.lo(j)) / domain.width(j)).collect())
            .collect();
        let order = u
            .iter()
            .map(|col| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| col[b].total_cmp(&col[a]).then(a.cmp(&b)));
                idx
            })
            .collect();
        let mut fw = Self {
            p,
            cfg,
            u,
            xs,
            order,
            cols: Vec::new(),
            specs: Vec::new(),
            q_rows: vec![Vec::new(); n],
            resid: y.to_vec(),
        };
        fw.try_add(vec![1.0; n], Vec::new());
        fw
    }

    fn run(mut self, tss: f64) -> Vec<Vec<HingeFactor>> {
        loop {
            let used = self.cols.len() - 1;
            if used >= self.cfg.max_terms {
                break;
            }
            let rss: f64 = self.resid.iter().map(|r| r * r).sum();
            if rss <= 1e-24 * tss {
                break;
            }
            let Some(best) = self.best_candidate() else { break };
            if best.gain <= self.cfg.threshold * tss {
                break;
            }
            let t_unit = self.u[best.var][best.row];
            let knot = self.xs[best.var][best.row];
            let parent_col = self.cols[best.parent].clone();
            let parent_spec = self.specs[best.parent].clone();
            let uv = &self.u[best.var];
            let plus: Vec<f64> = parent_col
                .iter()
                .zip(uv)
                .map(|(b, v)| b * (v - t_unit).max(0.0))
                .collect();
            let minus: Vec<f64> = parent_col
                .iter()
                .zip(uv)
                .map(|(b, v)| b * (t_unit - v).max(0.0))
                .collect();
            let with = |sign| {
                let mut s = parent_spec.clone();
                s.push(HingeFactor::new(best.var, sign, knot));
                s.sort_by_key(|f| f.var);
                s
            };
            let added_plus = self.try_add(plus, with(Sign::Pos));
            let added_minus = if self.cols.len() - 1 < self.cfg.max_terms {
                self.try_add(minus, with(Sign::Neg))
            } else {
                false
            };
            if !added_plus && !added_minus {
                break;
            }
        }
        self.specs
    }

    /// Orthogonalize `col` against the basis and append it if it adds a new
    /// direction.
    fn try_add(&mut self, col: Vec<f64>, spec: Vec<HingeFactor>) -> bool {
        let norm0 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm0 == 0.0 {
            return false;
        }
        let m = self.cols.len();
        let mut v = col.clone();
        for _ in 0..2 {
            let mut proj = vec![0.0; m];
            for (qr, vi) in self.q_rows.iter().zip(&v) {
                for (a, q) in proj.iter_mut().zip(qr) {
                    *a += q * vi;
                }
            }
            for (qr, vi) in self.q_rows.iter().zip(v.iter_mut()) {
                *vi -= qr.iter().zip(&proj).map(|(q, a)| q * a).sum::<f64>();
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= 1e-9 * norm0 {
            return false;
        }
        let mut rq = 0.0;
        for (qr, vi) in self.q_rows.iter_mut().zip(&v) {
            qr.push(vi / norm);
        }
        for (r, vi) in self.resid.iter().zip(&v) {
            rq += r * vi / norm;
        }
        for (r, vi) in self.resid.iter_mut().zip(&v) {
            *r -= rq * vi / norm;
        }
        self.cols.push(col);
        self.specs.push(spec);
        true
    }

    fn best_candidate(&self) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        for parent in 0..self.cols.len() {
            if self.specs[parent].len() >= self.cfg.max_degree {
                continue;
            }
            for var in 0..self.p {
                if self.specs[parent].iter().any(|f| f.var == var) {
                    continue;
                }
                if let Some(c) = self.sweep(parent, var) {
                    if best.as_ref().is_none_or(|b| c.gain > b.gain) {
                        best = Some(c);
                    }
                }
            }
        }
        best
    }

    /// Score every knot for one `(parent, input)` pair.
    fn sweep(&self, parent: usize, var: usize) -> Option<Candidate> {
        let b = &self.cols[parent];
        let uv = &self.u[var];
        let m = self.cols.len();
        let rows: Vec<usize> = self.order[var].iter().copied().filter(|&i| b[i] != 0.0).collect();
        if rows.len() < 2 {
            return None;
        }

        // fixed direction d = B * x
        let mut qd = vec![0.0; m];
        let (mut dd, mut rd) = (0.0, 0.0);
        for &i in &rows {
            let d = b[i] * uv[i];
            dd += d * d;
            rd += self.resid[i] * d;
            for (a, q) in qd.iter_mut().zip(&self.q_rows[i]) {
                *a += q * d;
            }
        }
        let dperp = dd - dot(&qd, &qd);
        let d_ok = dperp > SPAN_TOL * dd;

        let (mut s_b2, mut s_b2x, mut s_b2x2, mut s_rb, mut s_rbx) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut s_qb = vec![0.0; m];
        let mut s_qbx = vec![0.0; m];
        let mut qc = vec![0.0; m];
        let mut best: Option<Candidate> = None;

        let total = rows.len();
        let endspan = self.cfg.endspan_for(self.p);
        let minspan = self.cfg.minspan_for(self.p, total);
        let mut last: Option<usize> = None;
        let mut pos = 0;
        while pos < total {
            let t = uv[rows[pos]];
            // accumulators hold rows with value strictly greater than t
            let spaced = last.is_none_or(|l| pos - l >= minspan);
            if pos > 0 && pos >= endspan && total - pos > endspan && spaced {
                last = Some(pos);
                let cc = s_b2x2 - 2.0 * t * s_b2x + t * t * s_b2;
                let dc = s_b2x2 - t * s_b2x;
                let rc = s_rbx - t * s_rb;
                for k in 0..m {
                    qc[k] = s_qbx[k] - t * s_qb[k];
                }
                let cperp = cc - dot(&qc, &qc);
                let dcp = dc - dot(&qd, &qc);
                let c_ok = cperp > SPAN_TOL * cc;
                let gain = match (d_ok, c_ok) {
                    (true, true) => {
                        let det = dperp * cperp - dcp * dcp;
                        if det > SPAN_TOL * dperp * cperp {
                            (cperp * rd * rd - 2.0 * dcp * rd * rc + dperp * rc * rc) / det
                        } else {
                            (rd * rd / dperp).max(rc * rc / cperp)
                        }
                    }
                    (false, true) => rc * rc / cperp,
                    (true, false) => rd * rd / dperp,
                    (false, false) => 0.0,
                };
                if gain.is_finite() && best.as_ref().is_none_or(|c| gain > c.gain) {
                    best = Some(Candidate { parent, var, row: rows[pos], gain });
                }
            }
            // absorb every row tied at t
            while pos < total && uv[rows[pos]] == t {
                let i = rows[pos];
                let bi = b[i];
                let xi = uv[i];
                let b2 = bi * bi;
                s_b2 += b2;
                s_b2x += b2 * xi;
                s_b2x2 += b2 * xi * xi;
                s_rb += self.resid[i] * bi;
                s_rbx += self.resid[i] * bi * xi;
                for ((a, c), q) in s_qb.iter_mut().zip(s_qbx.iter_mut()).zip(&self.q_rows[i]) {
                    *a += q * bi;
                    *c += q * bi * xi;
                }
                pos += 1;
            }
        }
        best
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn native_columns(x: &DMatrix<f64>, specs: &[Vec<HingeFactor>]) -> DMatrix<f64> {
    let n = x.nrows();
    DMatrix::from_fn(n, specs.len(), |r, c| {
        specs[c].iter().map(|f| f.value(x[(r, f.var)])).product()
    })
}

fn select_columns(x: &DMatrix<f64>, keep: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), keep.len(), |r, c| x[(r, keep[c])])
}

fn least_squares(x: &DMatrix<f64>, y: &[f64]) -> Result<(DVector<f64>, f64)> {
    let yv = DVector::from_column_slice(y);
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * &yv;
    let beta = qr.r().solve_upper_triangular(&qty).ok_or(Error::RankDeficient)?;
    let resid = &yv - x * &beta;
    Ok((beta, resid.norm_squared()))
}

fn gcv(rss: f64, n: usize, n_cols: usize, penalty: f64) -> f64 {
    let c = n_cols as f64 + penalty * (n_cols as f64 - 1.0) / 2.0;
    let denom = 1.0 - c / n as f64;
    if denom <= 0.0 {
        f64::INFINITY
    } else {
        rss / n as f64 / (denom * denom)
    }
}

/// Remove terms one at a time (smallest RSS increase first) and return the
/// subset with the lowest GCV. Column 0 is the intercept and is never dropped.
fn backward_prune(x: &DMatrix<f64>, y: &[f64], penalty: f64) -> Result<(Vec<usize>, f64)> {
    let n = x.nrows();
    let mut active: Vec<usize> = (0..x.ncols()).collect();
    let mut best = (active.clone(), f64::INFINITY);
    loop {
        let sub = select_columns(x, &active);
        let yv = DVector::from_column_slice(y);
        let qr = sub.qr();
        let r = qr.r();
        let qty = qr.q().transpose() * &yv;
        let beta = r.solve_upper_triangular(&qty).ok_or(Error::RankDeficient)?;
        let rss = (&yv - select_columns(x, &active) * &beta).norm_squared();
        let score = gcv(rss, n, active.len(), penalty);
        if score < best.1 {
            best = (active.clone(), score);
        }
        if active.len() <= 1 {
            break;
        }
        let k = active.len();
        let rinv = r
            .solve_upper_triangular(&DMatrix::identity(k, k))
            .ok_or(Error::RankDeficient)?;
        let drop = (1..k)
            .map(|j| {
                let diag: f64 = rinv.row(j).iter().map(|v| v * v).sum();
                (j, beta[j] * beta[j] / diag)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(j, _)| j)
            .expect("at least one removable column");
        active.remove(drop);
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: usize,
    /// Root mean square prediction error in response units.
    pub rmspe: f64,
    /// RMSPE after scaling the response to unit variance.
    pub rmspe_scaled: f64,
}

/// k-fold cross-validated prediction error. Fold assignment is a seeded
/// shuffle.
pub fn cross_validate(
    x: &DMatrix<f64>,
    y: &[f64],
    domain: &Domain,
    cfg: &FitConfig,
    folds: usize,
    seed: u64,
) -> Result<CvReport> {
    let n = x.nrows();
    if folds < 2 || folds > n {
        return Err(Error::InvalidArgument(format!("folds must be in 2..={n}, got {folds}")));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in idx.iter().enumerate() {
        fold_of[i] = pos % folds;
    }
    let mut sse = 0.0;
    for f in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
        let xt = DMatrix::from_fn(train.len(), x.ncols(), |r, c| x[(train[r], c)]);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let fitted = fit(&xt, &yt, domain, cfg)?.model;
        let mut row = vec![0.0; x.ncols()];
        for &i in &test {
            for (j, v) in row.iter_mut().enumerate() {
                *v = x[(i, j)];
            }
            sse += (fitted.eval_unchecked(&row) - y[i]).powi(2);
        }
    }
    let rmspe = (sse / n as f64).sqrt();
    let mean = y.iter().sum::<f64>() / n as f64;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    let rmspe_scaled = if sd > 0.0 { rmspe / sd } else { 0.0 };
    Ok(CvReport { folds, rmspe, rmspe_scaled })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_design(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        crate::montecarlo::lhs_design(n, p, &Domain::unit(p), seed).unwrap()
    }

    fn rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
        (0..x.nrows()).map(|r| x.row(r).iter().copied().collect()).collect()
    }

    #[test]
    fn linear_response_is_fit_exactly() {
        let x = grid_design(60, 2, 1);
        let y: Vec<f64> = rows(&x).iter().map(|r| 2.0 + 3.0 * r[0]).collect();
        let cfg = FitConfig { max_degree: 1, ..Default::default() };
        let out = fit(&x, &y, &Domain::unit(2), &cfg).unwrap();
        assert!(out.report.train_rmse < 1e-6, "rmse {}", out.report.train_rmse);
        assert!(out.model.terms().iter().all(|t| t.factors.iter().all(|f| f.var == 0)));
    }

    #[test]
    fn constant_response_gives_constant_model() {
        let x = grid_design(30, 3, 2);
        let y = vec![4.5; 30];
        let out = fit(&x, &y, &Domain::unit(3), &FitConfig::default()).unwrap();
        assert!(out.model.terms().is_empty());
        assert_eq!(out.model.intercept(), 4.5);
        assert_eq!(out.report.warnings.len(), 1);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let x = grid_design(5, 2, 3);
        let y = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let err = fit(&x, &y, &Domain::unit(2), &FitConfig::default()).unwrap_err();
        assert!(matches!(err, Error::TooFewSamples { min: 10, got: 5 }));
    }

    #[test]
    fn rows_outside_domain_are_rejected() {
        let mut x = grid_design(20, 2, 4);
        x[(3, 1)] = 1.5;
        let y = vec![1.0; 20];
        assert!(matches!(
            fit(&x, &y, &Domain::unit(2), &FitConfig::default()),
            Err(Error::DomainViolation { row: 3, var: 1 })
        ));
    }

    #[test]
    fn respects_term_and_degree_limits() {
        let x = grid_design(200, 3, 5);
        let y: Vec<f64> = rows(&x)
            .iter()
            .map(|r| (3.0 * r[0]).sin() * r[1] + r[2] * r[2] * r[0])
            .collect();
        let cfg = FitConfig { max_terms: 12, max_degree: 2, ..Default::default() };
        let out = fit(&x, &y, &Domain::unit(3), &cfg).unwrap();
        assert!(out.model.terms().len() <= 12);
        assert!(out.model.terms().iter().all(|t| t.degree() <= 2));
        assert!(out.report.r2 > 0.95, "r2 {}", out.report.r2);
    }

    #[test]
    fn fit_is_deterministic() {
        let x = grid_design(100, 2, 6);
        let y: Vec<f64> = rows(&x).iter().map(|r| r[0] * r[0] + r[0] * r[1]).collect();
        let a = fit(&x, &y, &Domain::unit(2), &FitConfig::default()).unwrap();
        let b = fit(&x, &y, &Domain::unit(2), &FitConfig::default()).unwrap();
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn native_scale_domain() {
        let domain = Domain::new(vec![[30.0, 60.0], [0.005, 0.02]]).unwrap();
        let u = grid_design(80, 2, 7);
        let x = DMatrix::from_fn(80, 2, |r, c| domain.lo(c) + u[(r, c)] * domain.width(c));
        let y: Vec<f64> = rows(&x).iter().map(|r| 0.1 * r[0] - 200.0 * r[1]).collect();
        let out = fit(&x, &y, &domain, &FitConfig { max_degree: 1, ..Default::default() }).unwrap();
        assert!(out.report.train_rmse < 1e-8);
        let g = out.model.gradient(&[45.0, 0.01]).unwrap();
        assert!((g[0] - 0.1).abs() < 1e-8 && (g[1] + 200.0).abs() < 1e-6);
    }

    #[test]
    fn cross_validation_reports_scaled_error() {
        let x = grid_design(100, 2, 8);
        let y: Vec<f64> = rows(&x).iter().map(|r| r[0] * r[0] + r[0] * r[1]).collect();
        let cv = cross_validate(&x, &y, &Domain::unit(2), &FitConfig::default(), 10, 1).unwrap();
        assert_eq!(cv.folds, 10);
        assert!(cv.rmspe_scaled < 0.1, "{cv:?}");
        assert!(cross_validate(&x, &y, &Domain::unit(2), &FitConfig::default(), 1, 1).is_err());
    }
}
