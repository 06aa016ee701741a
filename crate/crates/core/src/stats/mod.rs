//! ANOVA, normality testing and the distribution functions behind them.

pub mod anova;
pub mod shapiro;
pub mod special;

pub use anova::{
    format_report, observations, read_scores, residuals, two_way_anova, write_scores, AnovaRow, AnovaTable,
    Observation, ScoreRow, Task, TwoWayAnova,
};
pub use shapiro::{shapiro_wilk, ShapiroWilk};
pub use special::{f_pvalue, normal_cdf, normal_ppf, normal_sf, regularized_incomplete_beta};
