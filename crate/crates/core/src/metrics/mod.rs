//! Evaluation rollouts, exploration coverage and per-run metric rows.

mod coverage;
mod eval;

use serde::Serialize;

pub use coverage::{style_divergence, CoverageGrid, StyleDivergence};
pub use eval::{evaluate, mean_std, rollout, EvalMode, EvalReport};

/// One evaluation point of a training run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub step: usize,
    pub return_mean: f64,
    pub return_std: f64,
    pub style_returns: Vec<f64>,
    pub controversy: f64,
    pub coverage: f64,
}

/// Everything a training run reports.
#[derive(Debug, Clone)]
pub struct RunResult {
    /// Strictly increasing in `step`.
    pub rows: Vec<MetricRow>,
    /// All states visited during training.
    pub coverage_grid: CoverageGrid,
    /// States reached by each style's actions after warmup.
    pub style_grids: Vec<CoverageGrid>,
    pub updates: usize,
    pub buffer_len: usize,
}

impl RunResult {
    /// Highest evaluated mean return.
    pub fn max_average_return(&self) -> f64 {
        self.rows.iter().map(|r| r.return_mean).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Mean of `return_mean` over the last `n` evaluations.
    pub fn tail_return(&self, n: usize) -> f64 {
        tail_mean(self.rows.iter().map(|r| r.return_mean), n)
    }

    /// Mean of `controversy` over the last `n` evaluations.
    pub fn tail_controversy(&self, n: usize) -> f64 {
        tail_mean(self.rows.iter().map(|r| r.controversy), n)
    }

    pub fn style_divergence(&self) -> Option<StyleDivergence> {
        style_divergence(&self.style_grids).ok()
    }
}

fn tail_mean(xs: impl DoubleEndedIterator<Item = f64>, n: usize) -> f64 {
    let tail: Vec<f64> = xs.rev().take(n.max(1)).collect();
    tail.iter().sum::<f64>() / tail.len() as f64
}
