//! Non-negative matrix factorization with Lee-Seung multiplicative updates
//! for the squared Frobenius objective, initialized by NNDSVD.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::svd::{truncated_svd_with, SvdConfig};
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Fill value for NNDSVD zeros, as a fraction of `mean(A)`.
pub const NNDSVD_FILL_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmfConfig {
    pub max_iter: usize,
    /// Stop once the relative objective decrease falls below this.
    pub tol: f64,
    pub svd: SvdConfig,
}

impl Default for NmfConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-4,
            svd: SvdConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NmfStop {
    Converged,
    MaxIterations,
    /// The objective was already zero.
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmfFactors {
    pub w: DMatrix<f64>,
    pub h: DMatrix<f64>,
    /// `||A - WH||_F^2` at initialization, then after every iteration.
    pub objective_trace: Vec<f64>,
    pub stop: NmfStop,
}

impl NmfFactors {
    pub fn rank(&self) -> usize {
        self.w.ncols()
    }

    pub fn iterations(&self) -> usize {
        self.objective_trace.len().saturating_sub(1)
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().unwrap_or(&0.0)
    }
}

fn check_input(a: &SparseMatrix, d: usize) -> Result<()> {
    let (m, n) = a.shape();
    if d == 0 || d >= m.min(n) {
        return Err(Error::Argument(format!(
            "rank {d} must satisfy 1 <= d < {} for a {m}x{n} matrix",
            m.min(n)
        )));
    }
    if let Some(min) = a.min_value() {
        if min < 0.0 {
            return Err(Error::Argument(format!(
                "NMF input must be non-negative (found {min})"
            )));
        }
    }
    Ok(())
}

/// Boutsidis-Gallopoulos NNDSVD: each singular pair contributes the
/// dominant of its positive or negative parts. Exact zeros are replaced by
/// `NNDSVD_FILL_FRACTION * mean(A)`.
pub fn nndsvd_init(a: &SparseMatrix, d: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    nndsvd_init_with(a, d, &SvdConfig::default())
}

pub fn nndsvd_init_with(
    a: &SparseMatrix,
    d: usize,
    svd: &SvdConfig,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_input(a, d)?;
    let (m, n) = a.shape();
    let f = truncated_svd_with(a, d, svd)?;
    let mut w = DMatrix::zeros(m, d);
    let mut h = DMatrix::zeros(d, n);

    let s0 = f.s[0].sqrt();
    for i in 0..m {
        w[(i, 0)] = s0 * f.u[(i, 0)].abs();
    }
    for j in 0..n {
        h[(0, j)] = s0 * f.v[(j, 0)].abs();
    }

    for c in 1..d {
        let x = f.u.column(c);
        let y = f.v.column(c);
        let norm_pos = |it: &mut dyn Iterator<Item = f64>| it.map(|t| t.max(0.0).powi(2)).sum::<f64>().sqrt();
        let norm_neg = |it: &mut dyn Iterator<Item = f64>| it.map(|t| (-t).max(0.0).powi(2)).sum::<f64>().sqrt();
        let (xp, xn) = (norm_pos(&mut x.iter().copied()), norm_neg(&mut x.iter().copied()));
        let (yp, yn) = (norm_pos(&mut y.iter().copied()), norm_neg(&mut y.iter().copied()));
        let (mp, mn) = (xp * yp, xn * yn);
        let (sign, xnorm, ynorm, mass) = if mp > mn { (1.0, xp, yp, mp) } else { (-1.0, xn, yn, mn) };
        if mass == 0.0 {
            continue;
        }
        let lambda = (f.s[c] * mass).sqrt();
        for i in 0..m {
            w[(i, c)] = lambda * (sign * x[i]).max(0.0) / xnorm;
        }
        for j in 0..n {
            h[(c, j)] = lambda * (sign * y[j]).max(0.0) / ynorm;
        }
    }

    let fill = NNDSVD_FILL_FRACTION * a.mean();
    for v in w.iter_mut().chain(h.iter_mut()) {
        if *v == 0.0 {
            *v = fill;
        }
    }
    Ok((w, h))
}

/// `||A - WH||_F^2` from trace identities, given `A H^T` and `H H^T`.
fn objective(a_norm_sq: f64, w: &DMatrix<f64>, aht: &DMatrix<f64>, hht: &DMatrix<f64>) -> f64 {
    let cross = w.dot(aht);
    let wtw = w.transpose() * w;
    let quad = wtw.dot(hht);
    let v = a_norm_sq - 2.0 * cross + quad;
    // rounding can push an exact fit slightly negative; NaN must survive
    if v < 0.0 {
        0.0
    } else {
        v
    }
}

/// Objective for arbitrary non-negative factors (used for init comparisons).
pub fn nmf_objective(a: &SparseMatrix, w: &DMatrix<f64>, h: &DMatrix<f64>) -> f64 {
    let aht = a.mul_dense(&h.transpose());
    let hht = h * h.transpose();
    objective(a.frobenius_norm_sq(), w, &aht, &hht)
}

pub fn nmf(a: &SparseMatrix, d: usize, max_iter: usize, tol: f64) -> Result<NmfFactors> {
    nmf_with(
        a,
        d,
        &NmfConfig {
            max_iter,
            tol,
            ..Default::default()
        },
    )
}

pub fn nmf_with(a: &SparseMatrix, d: usize, config: &NmfConfig) -> Result<NmfFactors> {
    check_input(a, d)?;
    let (m, n) = a.shape();
    if a.nnz() == 0 {
        return Ok(NmfFactors {
            w: DMatrix::zeros(m, d),
            h: DMatrix::zeros(d, n),
            objective_trace: vec![0.0],
            stop: NmfStop::Exact,
        });
    }
    let (w0, h0) = nndsvd_init_with(a, d, &config.svd)?;
    nmf_from(a, w0, h0, config.max_iter, config.tol)
}

/// Multiplicative updates from explicit starting factors.
pub fn nmf_from(
    a: &SparseMatrix,
    mut w: DMatrix<f64>,
    mut h: DMatrix<f64>,
    max_iter: usize,
    tol: f64,
) -> Result<NmfFactors> {
    let (m, n) = a.shape();
    let d = w.ncols();
    if w.nrows() != m || h.nrows() != d || h.ncols() != n {
        return Err(Error::Dimension(format!(
            "W is {}x{}, H is {}x{}, A is {m}x{n}",
            w.nrows(),
            w.ncols(),
            h.nrows(),
            h.ncols()
        )));
    }
    let a_norm_sq = a.frobenius_norm_sq();
    let at = a.transpose();
    let mut aht = a.mul_dense(&h.transpose());
    let mut hht = &h * h.transpose();
    let mut trace = vec![objective(a_norm_sq, &w, &aht, &hht)];
    let mut stop = NmfStop::MaxIterations;
    if trace[0] == 0.0 {
        stop = NmfStop::Exact;
    }

    for it in 1..=max_iter {
        if stop == NmfStop::Exact {
            break;
        }
        // H <- H .* (W^T A) ./ (W^T W H)
        let wt = w.transpose();
        let wta = at.mul_dense(&w).transpose();
        let wtwh = (&wt * &w) * &h;
        update(&mut h, &wta, &wtwh, "H", it, |k| k / d)?;

        // W <- W .* (A H^T) ./ (W H H^T)
        let ht = h.transpose();
        aht = a.mul_dense(&ht);
        hht = &h * &ht;
        let whht = &w * &hht;
        update(&mut w, &aht, &whht, "W", it, |k| k % m)?;

        let obj = objective(a_norm_sq, &w, &aht, &hht);
        let prev = *trace.last().unwrap();
        trace.push(obj);
        if obj == 0.0 {
            stop = NmfStop::Exact;
        } else if prev > 0.0 && obj <= prev && (prev - obj) / prev < tol {
            // the objective is monotone in exact arithmetic, so an apparent
            // rise is rounding in the trace identity and not convergence
            stop = NmfStop::Converged;
            break;
        }
    }
    Ok(NmfFactors {
        w,
        h,
        objective_trace: trace,
        stop,
    })
}

/// Element-wise `x <- x * num / den`; a zero denominator keeps `x * num`
/// at zero instead of producing 0/0. `word_of` maps a column-major offset
/// to the word index it belongs to, for error reporting.
fn update(
    x: &mut DMatrix<f64>,
    num: &DMatrix<f64>,
    den: &DMatrix<f64>,
    factor: &'static str,
    iteration: usize,
    word_of: impl Fn(usize) -> usize,
) -> Result<()> {
    for (k, ((xv, &nv), &dv)) in x.iter_mut().zip(num.iter()).zip(den.iter()).enumerate() {
        let updated = *xv * nv / dv.max(f64::MIN_POSITIVE);
        if !updated.is_finite() {
            return Err(Error::Numerical {
                factor,
                index: word_of(k),
                iteration,
            });
        }
        *xv = updated;
    }
    Ok(())
}
