//! Householder QR with greedy (Businger-Golub) column pivoting.
//!
//! At step `k` the remaining column of largest norm is swapped into
//! position `k` (lowest index wins ties). Column norms are downdated after
//! each reflection and recomputed from scratch once cancellation makes the
//! downdate unreliable.

use nalgebra::{DMatrix, SVD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// `A P ~ Q R` truncated to `rank` reflections.
///
/// `r` keeps the full width (`rank x n_cols`), `perm[k]` is the original
/// column placed at position `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct QrFactors {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub perm: Vec<usize>,
}

impl QrFactors {
    pub fn rank(&self) -> usize {
        self.r.nrows()
    }

    /// `[R P^T]` restricted to the first `rows` rows: column `j` belongs to
    /// original column `j` of `A`.
    pub fn r_unpermuted(&self, rows: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(rows, self.r.ncols());
        for (k, &orig) in self.perm.iter().enumerate() {
            out.column_mut(orig).copy_from(&self.r.view((0, k), (rows, 1)));
        }
        out
    }

    /// `A P` reconstructed as `Q R`.
    pub fn reconstruct_permuted(&self) -> DMatrix<f64> {
        &self.q * &self.r
    }
}

/// Truncated pivoted QR; fails if a pivot vanishes before step `d`.
pub fn pivoted_qr(a: &SparseMatrix, d: usize) -> Result<QrFactors> {
    let (m, n) = a.shape();
    if d == 0 || d > m.min(n) {
        return Err(Error::Argument(format!(
            "rank {d} must satisfy 1 <= d <= {} for a {m}x{n} matrix",
            m.min(n)
        )));
    }
    householder(a, d, true)
}

/// Full pivoted QR (`min(m, n)` steps). Vanishing pivots are allowed and
/// leave zero rows in `R`.
pub fn pivoted_qr_full(a: &SparseMatrix) -> Result<QrFactors> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::Argument("empty matrix".into()));
    }
    householder(a, m.min(n), false)
}

fn householder(a: &SparseMatrix, steps: usize, strict: bool) -> Result<QrFactors> {
    let (m, n) = a.shape();
    let mut w = a.to_dense();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut vn1: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut vn2 = vn1.clone();
    let first_norm = vn1.iter().copied().fold(0.0, f64::max);
    let zero_pivot = f64::EPSILON * (m.max(n) as f64) * first_norm;
    let tol3z = f64::EPSILON.sqrt();
    // (v, tau) per step; H_k = I - tau v v^T acts on rows k..m
    let mut reflectors: Vec<(Vec<f64>, f64)> = Vec::with_capacity(steps);

    let pick = |vn1: &[f64], k: usize| (k..n).fold(k, |best, j| if vn1[j] > vn1[best] { j } else { best });
    for k in 0..steps {
        let mut p = pick(&vn1, k);
        let mut xnorm = w.view((k, p), (m - k, 1)).norm();
        if xnorm <= zero_pivot {
            // downdated estimates may be stale; decide on exact norms
            for j in k..n {
                vn1[j] = w.view((k, j), (m - k, 1)).norm();
                vn2[j] = vn1[j];
            }
            p = pick(&vn1, k);
            xnorm = vn1[p];
        }
        if p != k {
            w.swap_columns(p, k);
            perm.swap(p, k);
            vn1.swap(p, k);
            vn2.swap(p, k);
        }

        if xnorm <= zero_pivot || xnorm == 0.0 {
            if strict {
                return Err(Error::RankDeficient {
                    achieved: k,
                    requested: steps,
                });
            }
            // the trailing block is numerically zero: leave zero rows
            w.view_mut((k, k), (m - k, n - k)).fill(0.0);
            break;
        }

        let x0 = w[(k, k)];
        let alpha = if x0 >= 0.0 { -xnorm } else { xnorm };
        let mut v: Vec<f64> = (k..m).map(|i| w[(i, k)]).collect();
        v[0] = x0 - alpha;
        let vnorm_sq: f64 = v.iter().map(|x| x * x).sum();
        let tau = if vnorm_sq > 0.0 { 2.0 / vnorm_sq } else { 0.0 };

        w[(k, k)] = alpha;
        for i in k + 1..m {
            w[(i, k)] = 0.0;
        }

        // apply I - tau v v^T to the trailing columns
        let trailing = &mut w.as_mut_slice()[(k + 1) * m..];
        trailing.par_chunks_mut(m).for_each(|col| {
            let seg = &mut col[k..];
            let dot: f64 = seg.iter().zip(&v).map(|(a, b)| a * b).sum();
            let f = tau * dot;
            for (c, vi) in seg.iter_mut().zip(&v) {
                *c -= f * vi;
            }
        });

        for j in k + 1..n {
            if vn1[j] != 0.0 {
                let ratio = w[(k, j)].abs() / vn1[j];
                let temp = (1.0 - ratio * ratio).max(0.0);
                let temp2 = temp * (vn1[j] / vn2[j]).powi(2);
                if temp2 <= tol3z {
                    let fresh = if k + 1 < m {
                        w.view((k + 1, j), (m - k - 1, 1)).norm()
                    } else {
                        0.0
                    };
                    vn1[j] = fresh;
                    vn2[j] = fresh;
                } else {
                    vn1[j] *= temp.sqrt();
                }
            }
        }
        reflectors.push((v, tau));
    }

    let mut r = DMatrix::zeros(steps, n);
    for i in 0..steps {
        for j in i..n {
            r[(i, j)] = w[(i, j)];
        }
    }

    // Q = H_0 H_1 ... H_{steps-1} applied to the first `steps` unit vectors
    let mut q = DMatrix::<f64>::identity(m, steps);
    for (k, (v, tau)) in reflectors.iter().enumerate().rev() {
        if *tau == 0.0 {
            continue;
        }
        q.as_mut_slice().par_chunks_mut(m).for_each(|col| {
            let seg = &mut col[k..];
            let dot: f64 = seg.iter().zip(v).map(|(a, b)| a * b).sum();
            let f = tau * dot;
            for (c, vi) in seg.iter_mut().zip(v) {
                *c -= f * vi;
            }
        });
    }

    Ok(QrFactors { q, r, perm })
}

/// Ratio of a spectrum-tracking quantity to its target, or the exact-rank
/// sentinel when the target singular value is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumRatio {
    Finite(f64),
    ExactRank,
}

impl SpectrumRatio {
    fn within(&self, tau: f64) -> bool {
        match *self {
            SpectrumRatio::Finite(r) => r >= 1.0 / tau && r <= tau,
            SpectrumRatio::ExactRank => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrqrReport {
    pub d: usize,
    /// `sigma_min(R11) / sigma_d(A)`.
    pub ratio_min: f64,
    /// `sigma_max(R22) / sigma_{d+1}(A)`.
    pub ratio_max: SpectrumRatio,
    pub tau: f64,
    pub rank_revealing: bool,
}

pub const DEFAULT_RRQR_TAU: f64 = 100.0;

/// Compares the leading/trailing blocks of a full pivoted QR against the
/// singular values of `a` (dense SVD).
pub fn rrqr_spectrum_check(
    factors: &QrFactors,
    a: &SparseMatrix,
    d: usize,
    tau: f64,
) -> Result<RrqrReport> {
    let (m, n) = a.shape();
    let full = m.min(n);
    if factors.rank() != full || factors.r.ncols() != n {
        return Err(Error::Argument(format!(
            "spectrum check needs the full R ({full}x{n}), got {}x{}",
            factors.rank(),
            factors.r.ncols()
        )));
    }
    if d == 0 || d >= full {
        return Err(Error::Argument(format!("block size {d} must satisfy 1 <= d < {full}")));
    }
    let sigma = SVD::new(a.to_dense(), false, false).singular_values;
    let (sd, sd1) = (sigma[d - 1], sigma[d]);
    if sd <= 0.0 {
        return Err(Error::Argument(format!("sigma_{d}(A) is zero")));
    }
    let r11 = factors.r.view((0, 0), (d, d)).into_owned();
    let r22 = factors.r.view((d, d), (full - d, n - d)).into_owned();
    let s11 = SVD::new(r11, false, false).singular_values;
    let s22 = SVD::new(r22, false, false).singular_values;
    let min11 = s11.iter().copied().fold(f64::INFINITY, f64::min);
    let max22 = s22.iter().copied().fold(0.0, f64::max);

    let exact_tol = f64::EPSILON * (full as f64) * sigma[0];
    let ratio_min = min11 / sd;
    let ratio_max = if sd1 <= exact_tol {
        SpectrumRatio::ExactRank
    } else {
        SpectrumRatio::Finite(max22 / sd1)
    };
    let rank_revealing = SpectrumRatio::Finite(ratio_min).within(tau) && ratio_max.within(tau);
    Ok(RrqrReport {
        d,
        ratio_min,
        ratio_max,
        tau,
        rank_revealing,
    })
}
