use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ITER: usize = 500;
pub const MIN_IMPROVEMENT: f64 = 1e-8;
const MAX_HALVINGS: usize = 30;

/// Low-dimensional configuration produced by nonmetric MDS.
#[derive(Clone, Debug)]
pub struct Embedding {
    /// One row per object.
    pub points: DMatrix<f64>,
    /// Kruskal stress-1 of the final configuration.
    pub stress: f64,
    /// Stress-1 before the first iteration and after each accepted one.
    pub stress_history: Vec<f64>,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
pub struct StressSidecar {
    pub stress: f64,
    pub stress_history: Vec<f64>,
    pub iterations: usize,
    pub seed: u64,
}

impl Embedding {
    pub fn sidecar(&self) -> StressSidecar {
        StressSidecar {
            stress: self.stress,
            stress_history: self.stress_history.clone(),
            iterations: self.stress_history.len().saturating_sub(1),
            seed: self.seed,
        }
    }
}

fn distances(x: &DMatrix<f64>, pairs: &[(usize, usize)]) -> Vec<f64> {
    pairs.iter().map(|&(i, j)| (x.row(i) - x.row(j)).norm()).collect()
}

/// Least-squares non-decreasing fit to `y` (pool adjacent violators).
pub fn pava(y: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m2, n2) = blocks[blocks.len() - 1];
            let (m1, n1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let n = n1 + n2;
            *blocks.last_mut().unwrap() = ((m1 * n1 as f64 + m2 * n2 as f64) / n as f64, n);
        }
    }
    blocks.into_iter().flat_map(|(m, n)| std::iter::repeat_n(m, n)).collect()
}

/// Disparities for distances `d`: monotone in `delta`, with tied
/// dissimilarities free to follow the distances.
fn disparities(delta: &[f64], d: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| delta[a].total_cmp(&delta[b]).then(d[a].total_cmp(&d[b])).then(a.cmp(&b)));
    let fitted = pava(&order.iter().map(|&i| d[i]).collect::<Vec<_>>());
    let mut out = vec![0.0; d.len()];
    for (k, &i) in order.iter().enumerate() {
        out[i] = fitted[k];
    }
    out
}

fn stress1(d: &[f64], dhat: &[f64]) -> f64 {
    let den: f64 = d.iter().map(|v| v * v).sum();
    if den == 0.0 {
        return 0.0;
    }
    let num: f64 = d.iter().zip(dhat).map(|(a, b)| (a - b).powi(2)).sum();
    (num / den).sqrt()
}

struct State {
    x: DMatrix<f64>,
    d: Vec<f64>,
    dhat: Vec<f64>,
    stress: f64,
}

fn evaluate(x: DMatrix<f64>, delta: &[f64], pairs: &[(usize, usize)]) -> State {
    let d = distances(&x, pairs);
    let dhat = disparities(delta, &d);
    let stress = stress1(&d, &dhat);
    State { x, d, dhat, stress }
}

fn guttman(s: &State, pairs: &[(usize, usize)], target_ss: f64) -> DMatrix<f64> {
    let n = s.x.nrows();
    let ss: f64 = s.dhat.iter().map(|v| v * v).sum();
    let scale = if ss > 0.0 { (target_ss / ss).sqrt() } else { 0.0 };
    let mut b = DMatrix::zeros(n, n);
    for (k, &(i, j)) in pairs.iter().enumerate() {
        if s.d[k] > 0.0 {
            let v = -scale * s.dhat[k] / s.d[k];
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    for i in 0..n {
        let row_sum: f64 = b.row(i).sum();
        b[(i, i)] = -row_sum;
    }
    (b * &s.x) / n as f64
}

/// Classical scaling of `D`.
fn torgerson(delta: &DMatrix<f64>, dims: usize) -> DMatrix<f64> {
    let n = delta.nrows();
    let d2 = delta.map(|v| v * v);
    let j = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let b = -0.5 * &j * d2 * &j;
    let eig = SymmetricEigen::new((&b + b.transpose()) * 0.5);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
    DMatrix::from_fn(n, dims, |r, c| {
        let k = idx[c];
        eig.eigenvectors[(r, k)] * eig.eigenvalues[k].max(0.0).sqrt()
    })
}

/// Kruskal nonmetric MDS of a dissimilarity matrix: classical scaling start,
/// then majorization steps with monotone regression. A step that would raise
/// stress is halved until it does not.
pub fn mds_embed(delta: &DMatrix<f64>, dims: usize, seed: u64) -> Result<Embedding> {
    let n = delta.nrows();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("MDS needs at least 3 objects, got {n}")));
    }
    if !delta.is_square() {
        return Err(Error::InvalidArgument("dissimilarity matrix must be square".into()));
    }
    if dims == 0 || dims >= n {
        return Err(Error::InvalidArgument(format!("embedding dimension must lie in 1..{n}")));
    }
    let scale = delta.amax().max(f64::MIN_POSITIVE);
    for i in 0..n {
        if delta[(i, i)].abs() > 1e-12 * scale {
            return Err(Error::InvalidArgument("dissimilarities need a zero diagonal".into()));
        }
        for j in 0..n {
            let v = delta[(i, j)];
            if !(v >= 0.0) || (v - delta[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::InvalidArgument("dissimilarities must be symmetric and non-negative".into()));
            }
        }
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let dv: Vec<f64> = pairs.iter().map(|&(i, j)| delta[(i, j)]).collect();
    let target_ss: f64 = dv.iter().map(|v| v * v).sum();
    if target_ss == 0.0 {
        return Ok(Embedding { points: DMatrix::zeros(n, dims), stress: 0.0, stress_history: vec![0.0], seed });
    }
    let mut x0 = torgerson(delta, dims);
    if x0.norm() == 0.0 || !x0.iter().all(|v| v.is_finite()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        x0 = DMatrix::from_fn(n, dims, |_, _| rng.random::<f64>() - 0.5);
    }
    let mut cur = evaluate(x0, &dv, &pairs);
    let mut history = vec![cur.stress];
    for _ in 0..MAX_ITER {
        if cur.stress <= f64::EPSILON {
            break;
        }
        let step = guttman(&cur, &pairs, target_ss);
        let mut t = 1.0;
        let mut next = evaluate(step.clone(), &dv, &pairs);
        let mut halvings = 0;
        while next.stress > cur.stress && halvings < MAX_HALVINGS {
            t *= 0.5;
            halvings += 1;
            next = evaluate(&cur.x + (&step - &cur.x) * t, &dv, &pairs);
        }
        if next.stress > cur.stress {
            break;
        }
        let gain = cur.stress - next.stress;
        cur = next;
        history.push(cur.stress);
        if gain < MIN_IMPROVEMENT {
            break;
        }
    }
    Ok(Embedding { points: cur.x, stress: cur.stress, stress_history: history, seed })
}

/// Mean point of each group; `membership[i]` is the group of row `i`.
pub fn model_centers(points: &DMatrix<f64>, membership: &[usize], groups: usize) -> Result<DMatrix<f64>> {
    if membership.len() != points.nrows() {
        return Err(Error::DimensionMismatch { expected: points.nrows(), got: membership.len() });
    }
    let mut sums = DMatrix::zeros(groups, points.ncols());
    let mut counts = vec![0usize; groups];
    for (r, &g) in membership.iter().enumerate() {
        if g >= groups {
            return Err(Error::InvalidArgument(format!("point {r} assigned to unknown group {g}")));
        }
        counts[g] += 1;
        let mut row = sums.row_mut(g);
        row += points.row(r);
    }
    for (g, &c) in counts.iter().enumerate() {
        if c == 0 {
            return Err(Error::EmptyGroup(g));
        }
        let mut row = sums.row_mut(g);
        row /= c as f64;
    }
    Ok(sums)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_points(p: &DMatrix<f64>) -> DMatrix<f64> {
        let n = p.nrows();
        DMatrix::from_fn(n, n, |i, j| (p.row(i) - p.row(j)).norm())
    }

    fn monotone(h: &[f64]) -> bool {
        h.windows(2).all(|w| w[1] <= w[0])
    }

    #[test]
    fn pava_pools_violators() {
        assert_eq!(pava(&[1.0, 3.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(pava(&[3.0, 2.0, 1.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(pava(&[]), Vec::<f64>::new());
    }

    #[test]
    fn collinear_points_embed_exactly() {
        let d = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0]);
        let e = mds_embed(&d, 2, 0).unwrap();
        assert!(e.stress < 1e-6);
    }

    #[test]
    fn equal_distances_give_equilateral_triangle() {
        let d = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
        let e = mds_embed(&d, 2, 0).unwrap();
        assert!(e.stress < 1e-6);
        let got = from_points(&e.points);
        let (a, b, c) = (got[(0, 1)], got[(0, 2)], got[(1, 2)]);
        assert!((a - b).abs() < 1e-6 && (b - c).abs() < 1e-6);
    }

    #[test]
    fn recovers_planar_configuration() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y = DMatrix::from_fn(12, 2, |_, _| rng.random::<f64>());
        let e = mds_embed(&from_points(&y), 2, 1).unwrap();
        // orthogonal Procrustes after centering
        let center = |m: &DMatrix<f64>| {
            let mean = m.row_mean();
            DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] - mean[c])
        };
        let (x, yc) = (center(&e.points), center(&y));
        let svd = (x.transpose() * &yc).svd(true, true);
        let r = svd.u.unwrap() * svd.v_t.unwrap();
        let err = (x * r - &yc).norm() / yc.norm();
        assert!(err < 1e-4, "Procrustes error {err}");
    }

    #[test]
    fn noisy_dissimilarities_reduce_stress_monotonically() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 15;
        let y = DMatrix::from_fn(n, 4, |_, _| rng.random::<f64>());
        let mut d = from_points(&y);
        for i in 0..n {
            for j in i + 1..n {
                let v = d[(i, j)] * (1.0 + 0.3 * rng.random::<f64>());
                d[(i, j)] = v;
                d[(j, i)] = v;
            }
        }
        let e = mds_embed(&d, 2, 0).unwrap();
        assert!(monotone(&e.stress_history));
        assert!(e.stress_history.len() > 1);
        assert!(e.stress < e.stress_history[0] || e.stress_history[0] < 1e-12);
        let again = mds_embed(&d, 2, 0).unwrap();
        assert_eq!(e.points, again.points);
    }

    #[test]
    fn input_validation() {
        assert!(mds_embed(&DMatrix::zeros(2, 2), 2, 0).is_err());
        let mut d = DMatrix::from_element(3, 3, 1.0);
        assert!(mds_embed(&d, 2, 0).is_err());
        d.fill_diagonal(0.0);
        d[(0, 1)] = -1.0;
        assert!(mds_embed(&d, 2, 0).is_err());
        let e = mds_embed(&DMatrix::zeros(4, 4), 2, 0).unwrap();
        assert_eq!(e.stress, 0.0);
    }

    #[test]
    fn centers_are_group_means() {
        let p = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, -1.0, -1.0, 2.0, 0.0, 4.0, 2.0]);
        let c = model_centers(&p, &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 3.0, 1.0]));
        let c = model_centers(&p, &[0, 1, 2, 3], 4).unwrap();
        assert_eq!(c, p);
        assert!(matches!(model_centers(&p, &[0, 0, 0, 0], 2), Err(Error::EmptyGroup(1))));
    }
}
