//! Configuration, run orchestration, CSV output and charts behind the `ccep`
//! binary.
//!
//! Every run writes `<env>-<algo>-seed<N>.csv` with the columns
//! `step,return_mean,return_std,style0_return..style{K-1}_return,controversy,coverage`,
//! one row per evaluation starting at step 0.

mod config;
pub mod csv;
pub mod plot;
mod run;

pub use config::{load_config, save_config, RunConfig, OUT_DIR_ENV};
pub use run::{
    ablation, ablation_csv, ablation_markdown, bench, controversy_exp, coverage_exp, run, run_seed, run_stem,
    AblationRow, BenchReport, ControversyReport, ControversySeed, CoverageArm, CoverageSeed, RunOutput,
    SeedFailure, END_WINDOW,
};
