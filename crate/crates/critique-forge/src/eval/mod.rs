//! Evaluation harness: pass@k, Rouge-L, word overlap ratio, pairwise win
//! rate, and the per-unit aggregation protocol used to report them.

pub mod metrics;
mod solve;
mod win_rate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{pass_at_k, rouge_l, tokenize, word_overlap_ratio, RougeScore, ROUGE_BETA};
pub use solve::{solve_rate_for_problem, SolveRate, SolveSettings};
pub use win_rate::{win_rate, ComparisonUnit, WinRateOutcome};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("metric domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    PassAtK,
    WinRate,
    RougeL,
    WordOverlap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitValue {
    pub unit_id: String,
    pub value: f64,
}

/// Per-unit values plus their mean and sample standard deviation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: Metric,
    pub per_unit: Vec<UnitValue>,
    pub mean: f64,
    pub std: f64,
    pub n_units: usize,
}

/// Folds per-unit values (typically the users x samples grid) into a
/// report. At least one unit is required; callers flag grid gaps before
/// aggregating.
pub fn aggregate(metric: Metric, per_unit: Vec<UnitValue>) -> Result<MetricReport, MetricError> {
    if per_unit.is_empty() {
        return Err(MetricError::Domain(
            "aggregate requires at least one unit".into(),
        ));
    }
    let n = per_unit.len();
    let mean = per_unit.iter().map(|u| u.value).sum::<f64>() / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        let var = per_unit
            .iter()
            .map(|u| (u.value - mean).powi(2))
            .sum::<f64>()
            / (n - 1) as f64;
        var.sqrt()
    };
    Ok(MetricReport {
        metric,
        per_unit,
        mean,
        std,
        n_units: n,
    })
}

impl MetricReport {
    /// `mean ± std` in the style the metric is conventionally reported:
    /// percentages for pass@k, win rate, and word overlap; plain values for
    /// Rouge-L.
    pub fn format_summary(&self) -> String {
        match self.metric {
            Metric::RougeL => format!("{:.4} ± {:.4}", self.mean, self.std),
            _ => format!("{:.2}% ± {:.4}", self.mean * 100.0, self.std),
        }
    }
}
