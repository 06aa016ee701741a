//! Rank-`d` approximations of a sparse matrix.

pub mod nmf;
pub mod qr;
pub mod svd;

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

pub use nmf::{nmf, nmf_from, nmf_objective, nmf_with, nndsvd_init, NmfConfig, NmfFactors, NmfStop};
pub use qr::{
    pivoted_qr, pivoted_qr_full, rrqr_spectrum_check, QrFactors, RrqrReport, SpectrumRatio,
    DEFAULT_RRQR_TAU,
};
pub use svd::{truncated_svd, truncated_svd_with, SvdConfig, SvdFactors, SvdSolver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Svd,
    Qr,
    Nmf,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Svd => "svd",
            Method::Qr => "qr",
            Method::Nmf => "nmf",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FactorizationResult {
    Svd(SvdFactors),
    Qr(QrFactors),
    Nmf(NmfFactors),
}

impl FactorizationResult {
    pub fn method(&self) -> Method {
        match self {
            FactorizationResult::Svd(_) => Method::Svd,
            FactorizationResult::Qr(_) => Method::Qr,
            FactorizationResult::Nmf(_) => Method::Nmf,
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            FactorizationResult::Svd(f) => f.rank(),
            FactorizationResult::Qr(f) => f.rank(),
            FactorizationResult::Nmf(f) => f.rank(),
        }
    }

    pub fn iterations(&self) -> usize {
        match self {
            FactorizationResult::Svd(f) => f.iterations,
            FactorizationResult::Qr(f) => f.rank(),
            FactorizationResult::Nmf(f) => f.iterations(),
        }
    }

    /// Last NMF objective value; the other methods have no iterative objective.
    pub fn final_objective(&self) -> Option<f64> {
        match self {
            FactorizationResult::Nmf(f) => Some(f.final_objective()),
            _ => None,
        }
    }

    /// `(X, Y)` with `A_d = X Y`, `X` being `m x d` and `Y` being `d x n` in
    /// the original column order.
    pub fn low_rank_pair(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        match self {
            FactorizationResult::Svd(f) => {
                let mut x = f.u.clone();
                for (c, &s) in f.s.iter().enumerate() {
                    x.column_mut(c).scale_mut(s);
                }
                (x, f.v.transpose())
            }
            FactorizationResult::Qr(f) => (f.q.clone(), f.r_unpermuted(f.rank())),
            FactorizationResult::Nmf(f) => (f.w.clone(), f.h.clone()),
        }
    }
}

impl From<SvdFactors> for FactorizationResult {
    fn from(f: SvdFactors) -> Self {
        FactorizationResult::Svd(f)
    }
}

impl From<QrFactors> for FactorizationResult {
    fn from(f: QrFactors) -> Self {
        FactorizationResult::Qr(f)
    }
}

impl From<NmfFactors> for FactorizationResult {
    fn from(f: NmfFactors) -> Self {
        FactorizationResult::Nmf(f)
    }
}

/// `||A - X Y||_F` without forming `X Y`: the squared error expands to
/// `||A||^2 - 2 <X, A Y^T> + <X^T X, Y Y^T>`. When that leaves less than
/// four digits of the result, the error is recomputed row by row.
pub fn approximation_error(a: &SparseMatrix, factors: &FactorizationResult) -> Result<f64> {
    let (x, y) = factors.low_rank_pair();
    low_rank_error(a, &x, &y)
}

pub fn low_rank_error(a: &SparseMatrix, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    let (m, n) = a.shape();
    if x.nrows() != m || y.ncols() != n || x.ncols() != y.nrows() {
        return Err(Error::Argument(format!(
            "factors {}x{} * {}x{} do not match a {m}x{n} matrix",
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    let a_sq = a.frobenius_norm_sq();
    let ayt = a.mul_dense(&y.transpose());
    let err_sq = a_sq - 2.0 * x.dot(&ayt) + x.tr_mul(x).dot(&(y * y.transpose()));
    if err_sq > 1e-4 * a_sq {
        return Ok(err_sq.sqrt());
    }
    Ok(direct_error_sq(a, x, y).sqrt())
}

fn direct_error_sq(a: &SparseMatrix, x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let (m, n) = a.shape();
    let rows: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut row = (x.row(i) * y).transpose();
            for (j, v) in a.row(i) {
                row[j] -= v;
            }
            debug_assert_eq!(row.len(), n);
            row.norm_squared()
        })
        .collect();
    rows.iter().sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSidecar {
    pub method: Method,
    pub d: usize,
    pub seed: u64,
    pub iterations: usize,
    pub final_objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svd_solver: Option<SvdSolver>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svd_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nmf_stop: Option<NmfStop>,
}

pub const SIDECAR_FILE: &str = "factors.json";

fn save_dense(dir: &Path, name: &str, m: &DMatrix<f64>) -> Result<()> {
    SparseMatrix::from_dense_full(m)?.save_binary(dir.join(format!("{name}.bin")))
}

fn load_dense(dir: &Path, name: &str) -> Result<DMatrix<f64>> {
    Ok(SparseMatrix::load(dir.join(format!("{name}.bin")))?.to_dense())
}

/// Writes each factor as a binary matrix into `dir` plus a JSON sidecar.
pub fn save_factors(dir: impl AsRef<Path>, factors: &FactorizationResult, seed: u64) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut sidecar = FactorSidecar {
        method: factors.method(),
        d: factors.rank(),
        seed,
        iterations: factors.iterations(),
        final_objective: factors.final_objective(),
        svd_solver: None,
        svd_residual: None,
        nmf_stop: None,
    };
    match factors {
        FactorizationResult::Svd(f) => {
            save_dense(dir, "u", &f.u)?;
            save_dense(dir, "s", &DMatrix::from_column_slice(f.s.len(), 1, f.s.as_slice()))?;
            save_dense(dir, "v", &f.v)?;
            sidecar.svd_solver = Some(f.solver);
            sidecar.svd_residual = Some(f.residual);
        }
        FactorizationResult::Qr(f) => {
            save_dense(dir, "q", &f.q)?;
            save_dense(dir, "r", &f.r)?;
            let perm: Vec<f64> = f.perm.iter().map(|&p| p as f64).collect();
            save_dense(dir, "perm", &DMatrix::from_column_slice(perm.len(), 1, &perm))?;
        }
        FactorizationResult::Nmf(f) => {
            save_dense(dir, "w", &f.w)?;
            save_dense(dir, "h", &f.h)?;
            let t = &f.objective_trace;
            save_dense(dir, "trace", &DMatrix::from_column_slice(t.len(), 1, t))?;
            sidecar.nmf_stop = Some(f.stop);
        }
    }
    let path = dir.join(SIDECAR_FILE);
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::Consistency(format!("sidecar serialization: {e}")))?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

pub fn load_sidecar(dir: impl AsRef<Path>) -> Result<FactorSidecar> {
    let path = dir.as_ref().join(SIDECAR_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))
}

pub fn load_factors(dir: impl AsRef<Path>) -> Result<(FactorizationResult, FactorSidecar)> {
    let dir = dir.as_ref();
    let sc = load_sidecar(dir)?;
    let result = match sc.method {
        Method::Svd => {
            let s = load_dense(dir, "s")?;
            FactorizationResult::Svd(SvdFactors {
                u: load_dense(dir, "u")?,
                s: DVector::from_column_slice(s.as_slice()),
                v: load_dense(dir, "v")?,
                iterations: sc.iterations,
                solver: sc.svd_solver.unwrap_or(SvdSolver::Randomized),
                residual: sc.svd_residual.unwrap_or(0.0),
            })
        }
        Method::Qr => FactorizationResult::Qr(QrFactors {
            q: load_dense(dir, "q")?,
            r: load_dense(dir, "r")?,
            perm: load_dense(dir, "perm")?.iter().map(|&p| p as usize).collect(),
        }),
        Method::Nmf => FactorizationResult::Nmf(NmfFactors {
            w: load_dense(dir, "w")?,
            h: load_dense(dir, "h")?,
            objective_trace: load_dense(dir, "trace")?.iter().copied().collect(),
            stop: sc.nmf_stop.unwrap_or(NmfStop::MaxIterations),
        }),
    };
    if result.rank() != sc.d {
        return Err(Error::Dimension(format!(
            "sidecar declares d = {} but factors have rank {}",
            sc.d,
            result.rank()
        )));
    }
    Ok((result, sc))
}
