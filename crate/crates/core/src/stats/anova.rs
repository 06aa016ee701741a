//! Balanced two-way fixed-effects ANOVA with interaction.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::special::f_pvalue;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub method: String,
    pub dimension: usize,
    pub replicate: usize,
    pub score: f64,
}

impl Observation {
    pub fn new(method: impl Into<String>, dimension: usize, replicate: usize, score: f64) -> Self {
        Self {
            method: method.into(),
            dimension,
            replicate,
            score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub source: String,
    pub df: usize,
    pub ss: f64,
    pub ms: Option<f64>,
    pub f: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub rows: Vec<AnovaRow>,
    pub r_squared: Option<f64>,
    pub coeff_var: Option<f64>,
    pub root_mse: f64,
    pub grand_mean: f64,
}

impl AnovaTable {
    pub fn row(&self, source: &str) -> Option<&AnovaRow> {
        self.rows.iter().find(|r| r.source == source)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoWayAnova {
    /// Model, Error, Corrected Total.
    pub overall: AnovaTable,
    /// Factorization, Dimension, Interaction.
    pub effects: AnovaTable,
}

pub const MODEL: &str = "Model";
pub const ERROR: &str = "Error";
pub const TOTAL: &str = "Corrected Total";
pub const FACTOR_A: &str = "Factorization";
pub const FACTOR_B: &str = "Dimension";
pub const INTERACTION: &str = "Interaction";

/// Cells keyed by (method, dimension) with their scores sorted, so the
/// result does not depend on input order.
struct Design {
    methods: Vec<String>,
    dims: Vec<usize>,
    cells: Vec<Vec<Vec<f64>>>,
    r: usize,
}

fn design(obs: &[Observation]) -> Result<Design> {
    if let Some(o) = obs.iter().find(|o| !o.score.is_finite()) {
        return Err(Error::Argument(format!(
            "non-finite score for {} / {} / replicate {}",
            o.method, o.dimension, o.replicate
        )));
    }
    let mut map: BTreeMap<(&str, usize), Vec<f64>> = BTreeMap::new();
    for o in obs {
        map.entry((o.method.as_str(), o.dimension)).or_default().push(o.score);
    }
    let mut methods: Vec<String> = obs.iter().map(|o| o.method.clone()).collect();
    methods.sort();
    methods.dedup();
    let mut dims: Vec<usize> = obs.iter().map(|o| o.dimension).collect();
    dims.sort_unstable();
    dims.dedup();

    let count = |m: &str, d: usize| map.get(&(m, d)).map_or(0, Vec::len);
    let r = methods
        .first()
        .zip(dims.first())
        .map_or(0, |(m, &d)| count(m, d));
    let balanced = methods.iter().all(|m| dims.iter().all(|&d| count(m, d) == r));
    if !balanced || methods.len() < 2 || dims.len() < 2 || r < 2 {
        let mut listing = String::new();
        for m in &methods {
            for &d in &dims {
                let _ = write!(listing, " {m}/{d}={}", count(m, d));
            }
        }
        let why = if !balanced {
            "unequal replicates per cell"
        } else if methods.len() < 2 || dims.len() < 2 {
            "each factor needs at least two levels"
        } else {
            "each cell needs at least two replicates"
        };
        return Err(Error::Design(format!("{why}; cell counts:{listing}")));
    }
    let cells = methods
        .iter()
        .map(|m| {
            dims.iter()
                .map(|&d| {
                    let mut v = map[&(m.as_str(), d)].clone();
                    v.sort_by(f64::total_cmp);
                    v
                })
                .collect()
        })
        .collect();
    Ok(Design {
        methods,
        dims,
        cells,
        r,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn two_way_anova(obs: &[Observation]) -> Result<TwoWayAnova> {
    let Design {
        methods,
        dims,
        cells,
        r,
    } = design(obs)?;
    let (a, b) = (methods.len(), dims.len());
    let n = a * b * r;
    let all: Vec<f64> = cells.iter().flatten().flatten().copied().collect();
    let grand = mean(&all);

    let cell_mean: Vec<Vec<f64>> = cells.iter().map(|row| row.iter().map(|c| mean(c)).collect()).collect();
    let row_mean: Vec<f64> = cell_mean.iter().map(|row| mean(row)).collect();
    let col_mean: Vec<f64> = (0..b)
        .map(|j| mean(&cell_mean.iter().map(|row| row[j]).collect::<Vec<_>>()))
        .collect();

    let rf = r as f64;
    let ss_total: f64 = all.iter().map(|y| (y - grand).powi(2)).sum();
    let mut ss_error = 0.0;
    let mut ss_model = 0.0;
    let mut ss_ab = 0.0;
    for i in 0..a {
        for j in 0..b {
            let cm = cell_mean[i][j];
            ss_error += cells[i][j].iter().map(|y| (y - cm).powi(2)).sum::<f64>();
            ss_model += rf * (cm - grand).powi(2);
            ss_ab += rf * (cm - row_mean[i] - col_mean[j] + grand).powi(2);
        }
    }
    let ss_a = (b as f64) * rf * row_mean.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_b = (a as f64) * rf * col_mean.iter().map(|m| (m - grand).powi(2)).sum::<f64>();

    let df_model = a * b - 1;
    let df_error = a * b * (r - 1);
    let ms_error = ss_error / df_error as f64;
    let effect = |source: &str, df: usize, ss: f64| {
        let ms = ss / df as f64;
        let (f, p) = if ms_error > 0.0 {
            let f = ms / ms_error;
            (Some(f), Some(f_pvalue(f, df as f64, df_error as f64)))
        } else {
            (None, None)
        };
        AnovaRow {
            source: source.to_string(),
            df,
            ss,
            ms: Some(ms),
            f,
            p,
        }
    };

    let root_mse = ms_error.sqrt();
    let r_squared = (ss_total > 0.0).then(|| ss_model / ss_total);
    let coeff_var = (grand != 0.0).then(|| 100.0 * root_mse / grand);
    let table = |rows| AnovaTable {
        rows,
        r_squared,
        coeff_var,
        root_mse,
        grand_mean: grand,
    };
    let overall = table(vec![
        effect(MODEL, df_model, ss_model),
        AnovaRow {
            source: ERROR.into(),
            df: df_error,
            ss: ss_error,
            ms: Some(ms_error),
            f: None,
            p: None,
        },
        AnovaRow {
            source: TOTAL.into(),
            df: n - 1,
            ss: ss_total,
            ms: None,
            f: None,
            p: None,
        },
    ]);
    let effects = table(vec![
        effect(FACTOR_A, a - 1, ss_a),
        effect(FACTOR_B, b - 1, ss_b),
        effect(INTERACTION, (a - 1) * (b - 1), ss_ab),
    ]);
    Ok(TwoWayAnova { overall, effects })
}

/// Score minus its cell mean, in input order.
pub fn residuals(obs: &[Observation]) -> Result<Vec<f64>> {
    let d = design(obs)?;
    let mut means = BTreeMap::new();
    for (i, m) in d.methods.iter().enumerate() {
        for (j, &dim) in d.dims.iter().enumerate() {
            means.insert((m.as_str(), dim), mean(&d.cells[i][j]));
        }
    }
    Ok(obs
        .iter()
        .map(|o| o.score - means[&(o.method.as_str(), o.dimension)])
        .collect())
}

/// Which score column of a table to analyse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Similarity,
    Analogy,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Similarity, Task::Analogy];

    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Similarity => "similarity",
            Task::Analogy => "analogy",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "similarity" => Ok(Task::Similarity),
            "analogy" => Ok(Task::Analogy),
            other => Err(Error::Argument(format!(
                "unknown task {other:?} (expected similarity or analogy)"
            ))),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One line of a `method,dimension,replicate,similarity,analogy` table.
/// Empty score fields mark cells that could not be produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub method: String,
    pub dimension: usize,
    pub replicate: usize,
    pub similarity: Option<f64>,
    pub analogy: Option<f64>,
}

impl ScoreRow {
    pub fn score(&self, task: Task) -> Option<f64> {
        match task {
            Task::Similarity => self.similarity,
            Task::Analogy => self.analogy,
        }
    }
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<ScoreRow>> {
    let path = path.as_ref();
    let what = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(&what, e))?;
    let headers = reader.headers().map_err(|e| csv_error(&what, e))?.clone();
    for col in ["method", "dimension", "replicate", "similarity", "analogy"] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::parse(&what, 1, format!("missing column {col:?}")));
        }
    }
    let mut rows = Vec::new();
    for rec in reader.deserialize() {
        rows.push(rec.map_err(|e| csv_error(&what, e))?);
    }
    if rows.is_empty() {
        return Err(Error::parse(&what, 1, "no data rows"));
    }
    Ok(rows)
}

pub fn write_scores(path: impl AsRef<Path>, rows: &[ScoreRow]) -> Result<()> {
    let path = path.as_ref();
    let what = path.display().to_string();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(&what, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(&what, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(what: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(what, io),
        kind => Error::parse(what, line, format!("{kind:?}")),
    }
}

/// Observations for one task; a missing score yields a design error naming
/// the cell.
pub fn observations(rows: &[ScoreRow], task: Task) -> Result<Vec<Observation>> {
    rows.iter()
        .map(|r| {
            r.score(task)
                .map(|s| Observation::new(r.method.clone(), r.dimension, r.replicate, s))
                .ok_or_else(|| {
                    Error::Design(format!(
                        "missing {task} score for {} / {} / replicate {}",
                        r.method, r.dimension, r.replicate
                    ))
                })
        })
        .collect()
}

fn fmt_p(p: Option<f64>) -> String {
    match p {
        Some(p) if p < 1e-4 => "<.0001".into(),
        Some(p) => format!("{p:.4}"),
        None => String::new(),
    }
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or(String::new(), |v| format!("{v:.prec$}"))
}

fn write_rows(out: &mut String, rows: &[AnovaRow]) {
    let _ = writeln!(
        out,
        "{:<16} {:>3} {:>15} {:>13} {:>9} {:>8}",
        "Source", "DF", "Sum of Squares", "Mean Square", "F Value", "Pr > F"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<16} {:>3} {:>15.8} {:>13} {:>9} {:>8}",
            r.source,
            r.df,
            r.ss,
            fmt_opt(r.ms, 8),
            fmt_opt(r.f, 2),
            fmt_p(r.p)
        );
    }
}

/// Text report in the usual two-table layout.
pub fn format_report(task: Task, anova: &TwoWayAnova) -> String {
    let t = &anova.overall;
    let mut out = String::new();
    let _ = writeln!(out, "ANOVA for the {task} task\n");
    write_rows(&mut out, &t.rows);
    let _ = writeln!(
        out,
        "\n{:>10} {:>10} {:>10} {:>10}",
        "R-Square", "Coeff Var", "Root MSE", "Score Mean"
    );
    let _ = writeln!(
        out,
        "{:>10} {:>10} {:>10.6} {:>10.6}\n",
        fmt_opt(t.r_squared, 6),
        fmt_opt(t.coeff_var, 6),
        t.root_mse,
        t.grand_mean
    );
    let _ = writeln!(out, "Main and interaction effects\n");
    write_rows(&mut out, &anova.effects.rows);
    out
}
