//! Exact co-activity matrices for pairs of hinge-spline surrogates under an
//! independent product prior.

mod matrix;
mod prior;

pub use matrix::{read_matrix_csv, write_matrix_csv, CoActiveMatrix, MatrixKind};
pub use prior::{InputPrior, Marginal};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{HingeFactor, MarsSurrogate};
use prior::{std_mass, std_pdf};

/// `∫_a^b x^r dμ_i(x)` for `r` in `0..=2`, with `[a, b]` clipped to the support.
pub fn truncated_moment(m: &Marginal, r: u32, a: f64, b: f64) -> f64 {
    assert!(r <= 2, "moment order {r} not supported");
    let (lo, hi) = m.support();
    let (a, b) = (a.max(lo), b.min(hi));
    if a >= b {
        return 0.0;
    }
    match *m {
        Marginal::Uniform { lo, hi } => {
            let k = (r + 1) as i32;
            (b.powi(k) - a.powi(k)) / (k as f64 * (hi - lo))
        }
        Marginal::Normal { mean, sd, .. } => {
            let norm = std_mass((lo - mean) / sd, (hi - mean) / sd);
            let (za, zb) = ((a - mean) / sd, (b - mean) / sd);
            let m0 = std_mass(za, zb);
            if r == 0 {
                return m0 / norm;
            }
            let (pa, pb) = (std_pdf(za), std_pdf(zb));
            let m1 = pa - pb;
            if r == 1 {
                return (mean * m0 + sd * m1) / norm;
            }
            let ta = if za.is_finite() { za * pa } else { 0.0 };
            let tb = if zb.is_finite() { zb * pb } else { 0.0 };
            let m2 = m0 + ta - tb;
            (mean * mean * m0 + 2.0 * mean * sd * m1 + sd * sd * m2) / norm
        }
    }
}

fn half_line(f: &HingeFactor) -> (f64, f64) {
    if f.sign.value() > 0.0 {
        (f.knot, f64::INFINITY)
    } else {
        (f64::NEG_INFINITY, f.knot)
    }
}

/// Interval on which both hinges are active. An absent factor places no
/// restriction. Disjoint supports collapse to `a == b`.
pub fn integration_bounds(f1: Option<&HingeFactor>, f2: Option<&HingeFactor>) -> (f64, f64) {
    let full = (f64::NEG_INFINITY, f64::INFINITY);
    let (a1, b1) = f1.map_or(full, half_line);
    let (a2, b2) = f2.map_or(full, half_line);
    let a = a1.max(a2);
    (a, b1.min(b2).max(a))
}

/// Linear piece `c0 + c1·x` living on an interval.
#[derive(Clone, Copy)]
struct Piece {
    lo: f64,
    hi: f64,
    c0: f64,
    c1: f64,
}

impl Piece {
    const ONE: Piece = Piece { lo: f64::NEG_INFINITY, hi: f64::INFINITY, c0: 1.0, c1: 0.0 };

    fn value(f: Option<&HingeFactor>) -> Piece {
        match f {
            None => Piece::ONE,
            Some(h) => {
                let s = h.sign.value();
                let (lo, hi) = half_line(h);
                Piece { lo, hi, c0: -s * h.knot, c1: s }
            }
        }
    }

    fn slope(f: Option<&HingeFactor>) -> Option<Piece> {
        f.map(|h| {
            let (lo, hi) = half_line(h);
            Piece { lo, hi, c0: h.sign.value(), c1: 0.0 }
        })
    }
}

/// `E[p·q]` for two linear pieces.
fn product_moment(m: &Marginal, p: Piece, q: Piece) -> f64 {
    let a = p.lo.max(q.lo);
    let b = p.hi.min(q.hi).max(a);
    if a >= b {
        return 0.0;
    }
    let mut acc = 0.0;
    let k0 = p.c0 * q.c0;
    if k0 != 0.0 {
        acc += k0 * truncated_moment(m, 0, a, b);
    }
    let k1 = p.c0 * q.c1 + p.c1 * q.c0;
    if k1 != 0.0 {
        acc += k1 * truncated_moment(m, 1, a, b);
    }
    let k2 = p.c1 * q.c1;
    if k2 != 0.0 {
        acc += k2 * truncated_moment(m, 2, a, b);
    }
    acc
}

/// `E[h_k'(x_i) · h_l(x_i)]`. Not symmetric in its arguments.
pub fn i1(fk: Option<&HingeFactor>, fl: Option<&HingeFactor>, m: &Marginal) -> f64 {
    match Piece::slope(fk) {
        None => 0.0,
        Some(d) => product_moment(m, d, Piece::value(fl)),
    }
}

/// `E[h_k(x_i) · h_l(x_i)]`.
pub fn i2(fk: Option<&HingeFactor>, fl: Option<&HingeFactor>, m: &Marginal) -> f64 {
    if fk.is_none() && fl.is_none() {
        return 1.0;
    }
    product_moment(m, Piece::value(fk), Piece::value(fl))
}

/// `E[h_k'(x_i) · h_l'(x_i)]`.
pub fn i3(fk: Option<&HingeFactor>, fl: Option<&HingeFactor>, m: &Marginal) -> f64 {
    match (Piece::slope(fk), Piece::slope(fl)) {
        (Some(a), Some(b)) => product_moment(m, a, b),
        _ => 0.0,
    }
}

/// `E[h'(x_i)]` for a single factor.
pub fn i4(f: Option<&HingeFactor>, m: &Marginal) -> f64 {
    Piece::slope(f).map_or(0.0, |d| product_moment(m, d, Piece::ONE))
}

/// `E[h(x_i)]`, which is `s(ξ1 − t·ξ0)` over the factor's support, or 1 when absent.
pub fn i5(f: Option<&HingeFactor>, m: &Marginal) -> f64 {
    match f {
        None => 1.0,
        Some(_) => product_moment(m, Piece::value(f), Piece::ONE),
    }
}

fn check_dims(ms: &[&MarsSurrogate], prior: &InputPrior) -> Result<()> {
    for m in ms {
        if m.dim() != prior.dim() {
            return Err(Error::DimensionMismatch { expected: prior.dim(), got: m.dim() });
        }
    }
    Ok(())
}

/// Compensated accumulator.
#[derive(Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    c: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(self) -> f64 {
        self.sum + self.c
    }
}

/// Per-variable integrals for one pair of terms, kept only where at least one
/// term carries a factor. Elsewhere I1 = I3 = 0 and I2 = 1.
struct PairTable {
    vars: Vec<usize>,
    i1kl: Vec<f64>,
    i1lk: Vec<f64>,
    i2: Vec<f64>,
    i3: Vec<f64>,
}

fn pair_table(
    tk: &[Option<HingeFactor>],
    tl: &[Option<HingeFactor>],
    prior: &InputPrior,
    need_off_diag: bool,
) -> PairTable {
    let mut t = PairTable { vars: vec![], i1kl: vec![], i1lk: vec![], i2: vec![], i3: vec![] };
    for (i, (fk, fl)) in tk.iter().zip(tl).enumerate() {
        if fk.is_none() && fl.is_none() {
            continue;
        }
        let (fk, fl, m) = (fk.as_ref(), fl.as_ref(), prior.marginal(i));
        t.vars.push(i);
        t.i2.push(i2(fk, fl, m));
        t.i3.push(i3(fk, fl, m));
        if need_off_diag {
            t.i1kl.push(i1(fk, fl, m));
            t.i1lk.push(i1(fl, fk, m));
        }
    }
    t
}

/// Product of `xs` skipping positions `a` and `b`.
fn product_except(xs: &[f64], a: usize, b: usize) -> f64 {
    xs.iter().enumerate().filter(|&(q, _)| q != a && q != b).map(|(_, v)| v).product()
}

fn assemble(mk: &MarsSurrogate, ml: &MarsSurrogate, prior: &InputPrior, full: bool) -> Result<DMatrix<f64>> {
    check_dims(&[mk, ml], prior)?;
    let p = prior.dim();
    let (fk, fl) = (mk.factor_table(), ml.factor_table());
    let mut acc = vec![Neumaier::default(); p * p];
    for (tk, rowk) in mk.terms().iter().zip(&fk) {
        for (tl, rowl) in ml.terms().iter().zip(&fl) {
            let w = tk.coef * tl.coef;
            if w == 0.0 {
                continue;
            }
            let t = pair_table(rowk, rowl, prior, full);
            for (a, &i) in t.vars.iter().enumerate() {
                if t.i3[a] != 0.0 {
                    acc[i * p + i].add(w * t.i3[a] * product_except(&t.i2, a, a));
                }
                if !full {
                    continue;
                }
                for (b, &j) in t.vars.iter().enumerate() {
                    if a == b {
                        continue;
                    }
                    let v = t.i1kl[a] * t.i1lk[b];
                    if v != 0.0 {
                        acc[i * p + j].add(w * v * product_except(&t.i2, a, b));
                    }
                }
            }
        }
    }
    Ok(DMatrix::from_fn(p, p, |i, j| acc[i * p + j].total()))
}

/// `C_kl = E[∇f_k ∇f_lᵀ]`.
pub fn cmat(mk: &MarsSurrogate, ml: &MarsSurrogate, prior: &InputPrior) -> Result<CoActiveMatrix> {
    let c = assemble(mk, ml, prior, true)?;
    Ok(CoActiveMatrix::new(c, (mk.label(), ml.label()), MatrixKind::Plain))
}

/// `t_kl = trace(C_kl)`, computing only the diagonal.
pub fn cmat_trace(mk: &MarsSurrogate, ml: &MarsSurrogate, prior: &InputPrior) -> Result<f64> {
    let c = assemble(mk, ml, prior, false)?;
    let mut acc = Neumaier::default();
    c.diagonal().iter().for_each(|&v| acc.add(v));
    Ok(acc.total())
}

/// `E[∇f]` under the prior.
pub fn expected_gradient(m: &MarsSurrogate, prior: &InputPrior) -> Result<DVector<f64>> {
    check_dims(&[m], prior)?;
    let p = prior.dim();
    let mut acc = vec![Neumaier::default(); p];
    for (term, row) in m.terms().iter().zip(m.factor_table()) {
        let e5: Vec<f64> = row.iter().enumerate().map(|(j, f)| i5(f.as_ref(), prior.marginal(j))).collect();
        for (i, f) in row.iter().enumerate() {
            if f.is_none() {
                continue;
            }
            let d = i4(f.as_ref(), prior.marginal(i));
            acc[i].add(term.coef * d * product_except(&e5, i, i));
        }
    }
    Ok(DVector::from_iterator(p, acc.into_iter().map(Neumaier::total)))
}

/// `C̃_kl = C_kl + Z_k Z_lᵀ`.
pub fn cmat_modified(mk: &MarsSurrogate, ml: &MarsSurrogate, prior: &InputPrior) -> Result<CoActiveMatrix> {
    let c = assemble(mk, ml, prior, true)?;
    let zk = expected_gradient(mk, prior)?;
    let zl = expected_gradient(ml, prior)?;
    let c = c + &zk * zl.transpose();
    Ok(CoActiveMatrix::new(c, (mk.label(), ml.label()), MatrixKind::Modified))
}
