//! Slow, direct reference implementations used as test oracles. Nothing
//! here calls into the library's numerical code; only its plain data types
//! are used for inputs and outputs.

#![allow(dead_code)]

use std::collections::BTreeMap;

use ppmi_lowrank::{DMatrix, SparseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Counts every ordered (focus, context) pair of in-vocabulary tokens at
/// distance 1..=window inside a sentence, by direct enumeration.
pub fn brute_counts(
    sentences: &[Vec<String>],
    index_of: impl Fn(&str) -> Option<usize>,
    window: usize,
) -> BTreeMap<(usize, usize), u64> {
    let mut out = BTreeMap::new();
    for s in sentences {
        for (t, focus) in s.iter().enumerate() {
            let Some(i) = index_of(focus) else { continue };
            for (u, ctx) in s.iter().enumerate() {
                if u == t || u.abs_diff(t) > window {
                    continue;
                }
                if let Some(j) = index_of(ctx) {
                    *out.entry((i, j)).or_insert(0) += 1;
                }
            }
        }
    }
    out
}

/// Word frequencies by a plain map.
pub fn brute_frequencies(sentences: &[Vec<String>]) -> BTreeMap<String, u64> {
    let mut f = BTreeMap::new();
    for s in sentences {
        for w in s {
            *f.entry(w.clone()).or_insert(0) += 1;
        }
    }
    f
}

/// `max(0, ln(p_ij / (p_i p_j)))` over a dense count matrix, with pair
/// marginals `p_i = rowsum_i / total`.
pub fn dense_ppmi(counts: &DMatrix<f64>) -> DMatrix<f64> {
    let n = counts.nrows();
    let total: f64 = counts.iter().sum();
    let row: Vec<f64> = (0..n).map(|i| (0..n).map(|j| counts[(i, j)]).sum()).collect();
    DMatrix::from_fn(n, n, |i, j| {
        let c = counts[(i, j)];
        if c == 0.0 {
            return 0.0;
        }
        let pmi = ((c / total) / ((row[i] / total) * (row[j] / total))).ln();
        pmi.max(0.0)
    })
}

/// One-sided Jacobi SVD: returns `(u, s, v)` with `s` sorted descending.
/// Slow but independent of any library decomposition.
pub fn jacobi_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let mut u = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for k in 0..m {
                    alpha += u[(k, p)] * u[(k, p)];
                    beta += u[(k, q)] * u[(k, q)];
                    gamma += u[(k, p)] * u[(k, q)];
                }
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..m {
                    let (x, y) = (u[(k, p)], u[(k, q)]);
                    u[(k, p)] = c * x - s * y;
                    u[(k, q)] = s * x + c * y;
                }
                for k in 0..n {
                    let (x, y) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * x - s * y;
                    v[(k, q)] = s * x + c * y;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| u.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let uu = DMatrix::from_fn(m, n, |i, k| {
        let j = order[k];
        if norms[j] > 0.0 {
            u[(i, j)] / norms[j]
        } else {
            0.0
        }
    });
    let vv = DMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    (uu, s, vv)
}

pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    jacobi_svd(a).1
}

/// Average ranks by counting, O(n^2).
pub fn brute_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&xi| {
            let less = x.iter().filter(|&&v| v < xi).count() as f64;
            let equal = x.iter().filter(|&&v| v == xi).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn brute_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

pub fn brute_spearman(x: &[f64], y: &[f64]) -> f64 {
    brute_pearson(&brute_ranks(x), &brute_ranks(y))
}

pub fn brute_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Sorts all candidates by (distance, index) and returns the first that is
/// not a query word.
pub fn brute_analogy(rows: &[Vec<f64>], a: usize, b: usize, c: usize) -> usize {
    let target: Vec<f64> = (0..rows[a].len()).map(|k| rows[b][k] - rows[a][k] + rows[c][k]).collect();
    let mut scored: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .map(|(j, r)| (r.iter().zip(&target).map(|(x, t)| (x - t).powi(2)).sum::<f64>(), j))
        .collect();
    scored.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
    scored.into_iter().map(|(_, j)| j).find(|&j| j != a && j != b && j != c).unwrap()
}

pub fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.random::<f64>())
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    use rand_distr::{Distribution, StandardNormal};
    DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(rng))
}

/// Non-negative matrix with roughly `density` of its entries in (0, 1].
pub fn random_sparse_nonneg(rng: &mut ChaCha8Rng, m: usize, n: usize, density: f64) -> SparseMatrix {
    let dense = DMatrix::from_fn(m, n, |_, _| {
        if rng.random::<f64>() < density {
            1.0 - rng.random::<f64>()
        } else {
            0.0
        }
    });
    SparseMatrix::from_dense(&dense).unwrap()
}

/// Orthonormal columns via modified Gram-Schmidt on a Gaussian matrix.
pub fn random_orthonormal(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    let mut q = gaussian_matrix(rng, m, n);
    for j in 0..n {
        for _ in 0..2 {
            for k in 0..j {
                let proj = q.column(k).dot(&q.column(j));
                let qk = q.column(k).clone_owned();
                let mut col = q.column_mut(j);
                col.axpy(-proj, &qk, 1.0);
            }
        }
        let norm = q.column(j).norm();
        q.column_mut(j).scale_mut(1.0 / norm);
    }
    q
}
