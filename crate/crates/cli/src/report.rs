//! ANOVA reports from a score table.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ppmi_lowrank::stats::{format_report, observations, read_scores, residuals, shapiro_wilk, ShapiroWilk};
use ppmi_lowrank::{two_way_anova, Task, TwoWayAnova};
use serde::{Deserialize, Serialize};

use crate::stages::write_json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaReport {
    pub task: Task,
    pub anova: TwoWayAnova,
    /// Absent when the residuals are all zero.
    pub shapiro_wilk: Option<ShapiroWilk>,
}

#[derive(Debug, Clone)]
pub struct AnovaOutputs {
    pub report: AnovaReport,
    pub json: PathBuf,
    pub text: PathBuf,
    pub residuals: PathBuf,
}

/// Analyses one task column of `score_csv` and writes `anova_<task>.json`,
/// `anova_<task>.txt` and `residuals_<task>.csv` into `out_dir`.
pub fn run_anova(score_csv: &Path, task: Task, out_dir: &Path) -> Result<AnovaOutputs> {
    let rows = read_scores(score_csv)?;
    let obs = observations(&rows, task)?;
    let anova = two_way_anova(&obs).with_context(|| format!("{task} scores in {}", score_csv.display()))?;
    let res = residuals(&obs)?;
    let shapiro = match shapiro_wilk(&res) {
        Ok(s) => Some(s),
        Err(e) => {
            log::warn!("event=shapiro_skipped task={task} reason={}", crate::logging::quote(&e));
            None
        }
    };
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let report = AnovaReport {
        task,
        anova,
        shapiro_wilk: shapiro,
    };
    let json = out_dir.join(format!("anova_{task}.json"));
    write_json(&json, &report)?;

    let mut text = format_report(task, &report.anova);
    match shapiro {
        Some(s) => {
            let _ = writeln!(text, "\nShapiro-Wilk on residuals: n = {}, W = {:.6}, p = {:.4}", s.n, s.w, s.p_value);
        }
        None => text.push_str("\nShapiro-Wilk on residuals: not computed\n"),
    }
    let text_path = out_dir.join(format!("anova_{task}.txt"));
    fs::write(&text_path, &text).with_context(|| format!("writing {}", text_path.display()))?;

    let mut csv = String::from("method,dimension,replicate,score,fitted,residual\n");
    for (o, r) in obs.iter().zip(&res) {
        let _ = writeln!(csv, "{},{},{},{},{},{}", o.method, o.dimension, o.replicate, o.score, o.score - r, r);
    }
    let residuals_path = out_dir.join(format!("residuals_{task}.csv"));
    fs::write(&residuals_path, csv).with_context(|| format!("writing {}", residuals_path.display()))?;

    log::info!(
        "event=anova_done task={task} r_squared={} out={}",
        report.anova.overall.r_squared.map_or("none".into(), |v| format!("{v:.6}")),
        out_dir.display()
    );
    Ok(AnovaOutputs {
        report,
        json,
        text: text_path,
        residuals: residuals_path,
    })
}
