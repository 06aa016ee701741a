//! Truncated SVD of a sparse matrix from block products only.
//!
//! The primary solver is randomized subspace iteration: a Gaussian sketch
//! of the range, a few power iterations, then Rayleigh-Ritz on the sampled
//! subspace, repeated until every wanted Ritz pair has a small residual.
//! If that stalls, Golub-Kahan-Lanczos bidiagonalization with full
//! reorthogonalization takes over; its Krylov space grows until the same
//! residual test passes (at full dimension it is exact).

use nalgebra::{DMatrix, DVector, SVD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdConfig {
    pub oversampling: usize,
    pub power_iterations: usize,
    pub seed: u64,
    /// Ritz residual tolerance, relative to the largest singular value.
    pub tol: f64,
    /// Subspace iterations (after the initial power iterations) before
    /// switching to Lanczos.
    pub max_iterations: usize,
}

impl Default for SvdConfig {
    fn default() -> Self {
        Self {
            oversampling: 10,
            power_iterations: 2,
            seed: 0,
            tol: 1e-10,
            max_iterations: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SvdSolver {
    Randomized,
    Lanczos,
    /// Input had no stored entries.
    Trivial,
}

/// Rank-`d` singular triplets, `a ~ u * diag(s) * v^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
    pub iterations: usize,
    pub solver: SvdSolver,
    /// Largest Ritz residual `||A v_i - s_i u_i||` at termination.
    pub residual: f64,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.s.len()
    }
}

pub fn truncated_svd(a: &SparseMatrix, d: usize) -> Result<SvdFactors> {
    truncated_svd_with(a, d, &SvdConfig::default())
}

pub fn truncated_svd_with(a: &SparseMatrix, d: usize, config: &SvdConfig) -> Result<SvdFactors> {
    let (m, n) = a.shape();
    let min_dim = m.min(n);
    if d == 0 || d >= min_dim {
        return Err(Error::Argument(format!(
            "rank {d} must satisfy 1 <= d < {min_dim} for a {m}x{n} matrix"
        )));
    }
    if a.nnz() == 0 {
        return Ok(SvdFactors {
            u: DMatrix::identity(m, d),
            s: DVector::zeros(d),
            v: DMatrix::identity(n, d),
            iterations: 0,
            solver: SvdSolver::Trivial,
            residual: 0.0,
        });
    }
    let at = a.transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    match randomized(a, &at, d, config, &mut rng) {
        Ok(f) => Ok(f),
        Err(Error::Convergence { iterations, residual }) => {
            log::debug!(
                "event=svd_fallback iterations={iterations} residual={residual:.3e}"
            );
            lanczos(a, &at, d, config, &mut rng)
        }
        Err(e) => Err(e),
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    // column-major fill order keeps the sketch reproducible for a seed
    let data: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    DMatrix::from_vec(rows, cols, data)
}

fn orthonormalize(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

/// Canonical signs: the largest-magnitude entry of each left vector is positive.
fn fix_signs(u: &mut DMatrix<f64>, v: &mut DMatrix<f64>) {
    for c in 0..u.ncols() {
        let col = u.column(c);
        let (imax, _) = col
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, &x)| if x.abs() > best.1 { (i, x.abs()) } else { best });
        if u[(imax, c)] < 0.0 {
            u.column_mut(c).neg_mut();
            v.column_mut(c).neg_mut();
        }
    }
}

const RITZ_CHECK_INTERVAL: usize = 4;

fn randomized(
    a: &SparseMatrix,
    at: &SparseMatrix,
    d: usize,
    config: &SvdConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SvdFactors> {
    let (m, n) = a.shape();
    let k = (d + config.oversampling).min(m.min(n));
    let omega = gaussian(n, k, rng);
    let mut q = orthonormalize(a.mul_dense(&omega));
    for _ in 0..config.power_iterations {
        let z = orthonormalize(at.mul_dense(&q));
        q = orthonormalize(a.mul_dense(&z));
    }

    let tol = config.tol;
    let mut residual = f64::INFINITY;
    for it in 0..=config.max_iterations {
        // the k x k SVD dominates the cost, so Ritz pairs are only checked
        // every few subspace steps
        if it % RITZ_CHECK_INTERVAL != 0 && it != config.max_iterations {
            let z = orthonormalize(at.mul_dense(&q));
            q = orthonormalize(a.mul_dense(&z));
            continue;
        }
        // B^T = A^T Q = Q2 R2, so B = R2^T Q2^T and its SVD comes from the
        // small k x k factor R2^T.
        let qr = at.mul_dense(&q).qr();
        let q2 = qr.q();
        let r2t = qr.r().transpose();
        let small = SVD::new(r2t, true, true);
        let ut = small.u.expect("requested U");
        let vt = small.v_t.expect("requested V^T");
        let s = small.singular_values;

        let aq2 = a.mul_dense(&q2);
        let av = &aq2 * vt.transpose().columns(0, d);
        let u = &q * ut.columns(0, d);
        let sigma1 = s[0];
        residual = (0..d)
            .map(|i| (av.column(i) - u.column(i) * s[i]).norm())
            .fold(0.0, f64::max);
        if !residual.is_finite() {
            return Err(Error::Convergence {
                iterations: it,
                residual,
            });
        }
        if residual <= tol * sigma1.max(f64::MIN_POSITIVE) {
            let mut u = u;
            let mut v = &q2 * vt.transpose().columns(0, d);
            fix_signs(&mut u, &mut v);
            return Ok(SvdFactors {
                u,
                s: s.rows(0, d).into_owned(),
                v,
                iterations: config.power_iterations + it,
                solver: SvdSolver::Randomized,
                residual,
            });
        }
        q = orthonormalize(aq2);
    }
    Err(Error::Convergence {
        iterations: config.power_iterations + config.max_iterations,
        residual,
    })
}

/// Classical Gram-Schmidt against `basis`, applied twice.
fn reorthogonalize(x: &mut DVector<f64>, basis: &[DVector<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(x);
            x.axpy(-c, b, 1.0);
        }
    }
}

/// A random unit vector orthogonal to every vector in `basis`.
fn fresh_direction(len: usize, basis: &[DVector<f64>], rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let mut x = DVector::from_iterator(len, (0..len).map(|_| StandardNormal.sample(rng)));
        reorthogonalize(&mut x, basis);
        let nrm = x.norm();
        if nrm > 1e-8 {
            return x / nrm;
        }
    }
}

fn stack(cols: &[DVector<f64>]) -> DMatrix<f64> {
    DMatrix::from_columns(cols)
}

fn lanczos(
    a: &SparseMatrix,
    at: &SparseMatrix,
    d: usize,
    config: &SvdConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SvdFactors> {
    let (m, n) = a.shape();
    let max_steps = m.min(n);
    let mut p_basis: Vec<DVector<f64>> = Vec::new();
    let mut q_basis: Vec<DVector<f64>> = Vec::new();
    let mut alpha = Vec::with_capacity(max_steps);
    let mut beta: Vec<f64> = Vec::with_capacity(max_steps);

    p_basis.push(fresh_direction(n, &[], rng));
    let breakdown = 1e-12 * a.frobenius_norm();
    let mut next_check = (2 * (d + config.oversampling)).min(max_steps);
    let mut residual = f64::INFINITY;

    for j in 0..max_steps {
        let mut qv = DVector::from_vec(a.mul_vec(p_basis[j].as_slice()));
        if j > 0 {
            qv.axpy(-beta[j - 1], &q_basis[j - 1], 1.0);
        }
        reorthogonalize(&mut qv, &q_basis);
        let mut aj = qv.norm();
        if aj <= breakdown {
            aj = 0.0;
            qv = fresh_direction(m, &q_basis, rng);
        } else {
            qv /= aj;
        }
        alpha.push(aj);

        let mut pv = DVector::from_vec(at.mul_vec(qv.as_slice()));
        q_basis.push(qv);
        pv.axpy(-aj, &p_basis[j], 1.0);
        reorthogonalize(&mut pv, &p_basis);
        let mut bj = pv.norm();
        if j + 1 < n {
            if bj <= breakdown {
                bj = 0.0;
                pv = fresh_direction(n, &p_basis, rng);
            } else {
                pv /= bj;
            }
            p_basis.push(pv);
        } else {
            bj = 0.0;
        }
        beta.push(bj);

        let steps = j + 1;
        if steps < d || (steps < next_check && steps < max_steps) {
            continue;
        }
        next_check = (next_check * 3 / 2).max(steps + 1);

        // upper bidiagonal B with A P = Q B
        let mut bmat = DMatrix::<f64>::zeros(steps, steps);
        for i in 0..steps {
            bmat[(i, i)] = alpha[i];
            if i + 1 < steps {
                bmat[(i, i + 1)] = beta[i];
            }
        }
        let small = SVD::new(bmat, true, true);
        let x = small.u.expect("requested U");
        let yt = small.v_t.expect("requested V^T");
        let s = small.singular_values;
        // A^T u_i - s_i v_i = beta_last * x[last, i] * p_steps
        let b_last = beta[steps - 1];
        residual = (0..d)
            .map(|i| (b_last * x[(steps - 1, i)]).abs())
            .fold(0.0, f64::max);
        if !residual.is_finite() {
            break;
        }
        if residual <= config.tol * s[0].max(f64::MIN_POSITIVE) || steps == max_steps {
            let mut u = stack(&q_basis[..steps]) * x.columns(0, d);
            let mut v = stack(&p_basis[..steps]) * yt.transpose().columns(0, d);
            fix_signs(&mut u, &mut v);
            return Ok(SvdFactors {
                u,
                s: s.rows(0, d).into_owned(),
                v,
                iterations: steps,
                solver: SvdSolver::Lanczos,
                residual,
            });
        }
    }
    Err(Error::Convergence {
        iterations: alpha.len(),
        residual,
    })
}
