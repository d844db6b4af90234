use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::RunConfig;
use super::csv::{aggregate, format_row, run_header, write_text, Table, SCHEMA_VERSION};
use crate::agent::{train, Agent, Algorithm, TrainObserver};
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::metrics::{mean_std, MetricRow, RunResult};
use crate::numerics::snapshot;

/// Evaluations averaged for end-of-run statistics.
pub const END_WINDOW: usize = 5;

pub fn run_stem(env: EnvKind, algorithm: Algorithm, seed: u64) -> String {
    format!("{env}-{algorithm}-seed{seed}")
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub seed: u64,
    pub csv_path: PathBuf,
    pub result: RunResult,
}

// streams rows to disk as they arrive so long runs can be watched
struct CsvObserver {
    path: PathBuf,
    out: BufWriter<File>,
    snapshot_dir: Option<PathBuf>,
}

impl CsvObserver {
    fn create(path: PathBuf, styles: usize, snapshot_dir: Option<PathBuf>) -> Result<Self> {
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut obs = CsvObserver {
            path,
            out: BufWriter::new(file),
            snapshot_dir,
        };
        let header = run_header(styles).join(",");
        obs.line(&header)?;
        Ok(obs)
    }

    fn line(&mut self, text: &str) -> Result<()> {
        writeln!(self.out, "{text}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

impl TrainObserver for CsvObserver {
    fn on_eval(&mut self, row: &MetricRow, agent: &Agent) -> Result<()> {
        self.line(&format_row(row))?;
        if let Some(dir) = &self.snapshot_dir {
            for (j, net) in agent.actor.nets.iter().enumerate() {
                snapshot::save(net, &dir.join(format!("step{}-actor{j}.bin", row.step)))?;
            }
        }
        Ok(())
    }
}

/// Trains one seed and writes `<dir>/<env>-<algo>-seed<N>.csv`.
pub fn run_seed(cfg: &RunConfig, seed: u64, dir: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let agent_cfg = cfg.agent_config(seed);
    let stem = run_stem(cfg.env, cfg.algorithm, seed);
    let csv_path = dir.join(format!("{stem}.csv"));
    let snapshot_dir = if cfg.snapshots {
        let d = dir.join(format!("{stem}-snapshots"));
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        Some(d)
    } else {
        None
    };
    let mut observer = CsvObserver::create(csv_path.clone(), agent_cfg.variant().styles, snapshot_dir)?;
    let mut env = cfg.make_env()?;
    let mut eval_env = cfg.make_env()?;
    let trained = train(&agent_cfg, env.as_mut(), eval_env.as_mut(), &cfg.protocol(), &mut observer)?;
    Ok(RunOutput {
        seed,
        csv_path,
        result: trained.result,
    })
}

/// The `train` subcommand: one run at `cfg.seed`.
pub fn run(cfg: &RunConfig, dir: &Path) -> Result<RunOutput> {
    run_seed(cfg, cfg.seed, dir)
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub env: EnvKind,
    pub algorithm: Algorithm,
    /// Completed runs, sorted by seed.
    pub runs: Vec<RunOutput>,
    pub failures: Vec<SeedFailure>,
    /// Absent only when every seed failed.
    pub aggregate: Option<Table>,
    pub aggregate_path: Option<PathBuf>,
    pub summary_path: PathBuf,
}

impl BenchReport {
    /// Highest mean-over-seeds evaluation return.
    pub fn max_average_return(&self) -> Option<f64> {
        let col = self.aggregate.as_ref()?.column("return_mean")?;
        Some(col.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn final_returns(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.result.tail_return(END_WINDOW)).collect()
    }

    pub fn final_coverages(&self) -> Vec<f64> {
        self.runs
            .iter()
            .map(|r| r.result.rows.last().map_or(0.0, |row| row.coverage))
            .collect()
    }
}

/// Runs `seeds` (possibly in parallel), keeping whatever completes.
fn run_seeds(cfg: &RunConfig, seeds: &[u64], dir: &Path) -> (Vec<RunOutput>, Vec<SeedFailure>) {
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    let outcomes = cfg.execution.map(sorted.clone(), |seed| run_seed(cfg, seed, dir));
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (seed, outcome) in sorted.into_iter().zip(outcomes) {
        match outcome {
            Ok(r) => runs.push(r),
            Err(e) => failures.push(SeedFailure {
                seed,
                error: e.to_string(),
            }),
        }
    }
    (runs, failures)
}

/// The `bench` subcommand: every seed of `cfg.seeds`, then the aggregate.
pub fn bench(cfg: &RunConfig, dir: &Path) -> Result<BenchReport> {
    cfg.validate()?;
    let (runs, failures) = run_seeds(cfg, &cfg.seeds, dir);
    let prefix = format!("{}-{}", cfg.env, cfg.algorithm);
    let (aggregate, aggregate_path) = if runs.is_empty() {
        (None, None)
    } else {
        let rows: Vec<&[MetricRow]> = runs.iter().map(|r| r.result.rows.as_slice()).collect();
        let table = aggregate(&rows)?;
        let path = dir.join(format!("{prefix}-aggregate.csv"));
        write_text(&path, &table.to_csv())?;
        (Some(table), Some(path))
    };
    let summary_path = dir.join(format!("{prefix}-summary.json"));
    let mut report = BenchReport {
        env: cfg.env,
        algorithm: cfg.algorithm,
        runs,
        failures,
        aggregate,
        aggregate_path,
        summary_path,
    };
    write_text(&report.summary_path, &bench_summary(&report))?;
    report.failures.sort_by_key(|f| f.seed);
    Ok(report)
}

fn bench_summary(report: &BenchReport) -> String {
    let (final_mean, final_std) = mean_std(&report.final_returns());
    let (cov_mean, cov_std) = mean_std(&report.final_coverages());
    let summary = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "env": report.env,
        "algorithm": report.algorithm,
        "seeds": report.runs.iter().map(|r| r.seed).collect::<Vec<_>>(),
        "failed": report.failures,
        "max_average_return": report.max_average_return(),
        "per_seed_max_average_return": report.runs.iter().map(|r| r.result.max_average_return()).collect::<Vec<_>>(),
        "final_return_mean": finite_or_null(final_mean),
        "final_return_std": finite_or_null(final_std),
        "final_coverage_mean": finite_or_null(cov_mean),
        "final_coverage_std": finite_or_null(cov_std),
    });
    serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"
}

fn finite_or_null(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn bail_on_failures(failures: &[SeedFailure]) -> Result<()> {
    match failures.first() {
        None => Ok(()),
        Some(f) => Err(Error::config(format!(
            "{} run(s) failed; first was seed {}: {}",
            failures.len(),
            f.seed,
            f.error
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub env: EnvKind,
    pub algorithm: Algorithm,
    pub seeds: usize,
    pub max_average_return: f64,
    pub final_return_mean: f64,
    pub final_return_std: f64,
    pub final_coverage_mean: f64,
}

/// Shared skill-conditioned actor vs one actor per style, on both tasks.
///
/// Writes `ablation.csv` and `ablation.md` under `dir`.
pub fn ablation(cfg: &RunConfig, dir: &Path) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for env in [EnvKind::Pendulum, EnvKind::Pointmaze] {
        for algorithm in [Algorithm::Ccep, Algorithm::CcepSeparate] {
            let arm = RunConfig {
                env,
                algorithm,
                ..cfg.clone()
            };
            let report = bench(&arm, &dir.join("runs"))?;
            bail_on_failures(&report.failures)?;
            let (final_return_mean, final_return_std) = mean_std(&report.final_returns());
            rows.push(AblationRow {
                env,
                algorithm,
                seeds: report.runs.len(),
                max_average_return: report.max_average_return().unwrap_or(f64::NAN),
                final_return_mean,
                final_return_std,
                final_coverage_mean: mean_std(&report.final_coverages()).0,
            });
        }
    }
    write_text(&dir.join("ablation.csv"), &ablation_csv(&rows))?;
    write_text(&dir.join("ablation.md"), &ablation_markdown(&rows))?;
    Ok(rows)
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from(
        "env,algorithm,seeds,max_average_return,final_return_mean,final_return_std,final_coverage_mean\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.env,
            r.algorithm,
            r.seeds,
            r.max_average_return,
            r.final_return_mean,
            r.final_return_std,
            r.final_coverage_mean
        ));
    }
    out
}

pub fn ablation_markdown(rows: &[AblationRow]) -> String {
    let mut out = String::from(
        "| env | algorithm | seeds | max avg return | final return | final coverage |\n\
         |---|---|---:|---:|---:|---:|\n",
    );
    for r in rows {
        out.push_str(&format!(
            "| {} | {} | {} | {:.2} | {:.2} ± {:.2} | {:.4} |\n",
            r.env,
            r.algorithm,
            r.seeds,
            r.max_average_return,
            r.final_return_mean,
            r.final_return_std,
            r.final_coverage_mean
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControversySeed {
    pub seed: u64,
    /// End-of-run controversy with both critics regressing toward `y`.
    pub same: f64,
    /// End-of-run controversy with the second critic negated.
    pub opposite: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControversyReport {
    pub algorithm: Algorithm,
    pub per_seed: Vec<ControversySeed>,
    /// Seeds where `opposite > same`.
    pub exceed: usize,
}

/// Same-target vs opposite-target critics under otherwise identical runs.
///
/// End-of-run controversy is the mean of the last [`END_WINDOW`] evaluations.
/// Writes per-run CSVs under `dir/same` and `dir/opposite`, plus
/// `controversy.csv` and `controversy.json`.
pub fn controversy_exp(cfg: &RunConfig, dir: &Path) -> Result<ControversyReport> {
    let arm = |negate: bool| RunConfig {
        opposite_targets: Some(negate),
        ..cfg.clone()
    };
    let (same_cfg, opp_cfg) = (arm(false), arm(true));
    same_cfg.validate()?;
    opp_cfg.validate()?;
    let jobs: Vec<(bool, u64)> = [false, true]
        .into_iter()
        .flat_map(|neg| cfg.seeds.iter().map(move |&s| (neg, s)))
        .collect();
    let outcomes = cfg.execution.map(jobs.clone(), |(neg, seed)| {
        let (c, sub) = if neg { (&opp_cfg, "opposite") } else { (&same_cfg, "same") };
        run_seed(c, seed, &dir.join(sub)).map(|r| r.result.tail_controversy(END_WINDOW))
    });
    let mut same = Vec::new();
    let mut opposite = Vec::new();
    for ((neg, seed), outcome) in jobs.into_iter().zip(outcomes) {
        let v = outcome?;
        if neg {
            opposite.push((seed, v));
        } else {
            same.push((seed, v));
        }
    }
    same.sort_by_key(|p| p.0);
    opposite.sort_by_key(|p| p.0);
    let per_seed: Vec<ControversySeed> = same
        .iter()
        .zip(&opposite)
        .map(|(&(seed, s), &(_, o))| ControversySeed {
            seed,
            same: s,
            opposite: o,
        })
        .collect();
    let report = ControversyReport {
        algorithm: cfg.algorithm,
        exceed: per_seed.iter().filter(|r| r.opposite > r.same).count(),
        per_seed,
    };
    let mut csv = String::from("seed,same,opposite\n");
    for r in &report.per_seed {
        csv.push_str(&format!("{},{},{}\n", r.seed, r.same, r.opposite));
    }
    write_text(&dir.join("controversy.csv"), &csv)?;
    write_text(
        &dir.join("controversy.json"),
        &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"),
    )?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageSeed {
    pub seed: u64,
    pub coverage: f64,
    /// Cells reached by exactly one style; empty for single-style algorithms.
    pub unique_cells: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageArm {
    pub algorithm: Algorithm,
    pub mean_coverage: f64,
    pub per_seed: Vec<CoverageSeed>,
}

/// Training-time grid coverage of each algorithm on `cfg.env`.
///
/// Writes `coverage.csv` and `coverage.json` under `dir`.
pub fn coverage_exp(cfg: &RunConfig, algorithms: &[Algorithm], dir: &Path) -> Result<Vec<CoverageArm>> {
    let mut arms = Vec::new();
    for &algorithm in algorithms {
        let arm_cfg = RunConfig {
            algorithm,
            ..cfg.clone()
        };
        arm_cfg.validate()?;
        let (runs, failures) = run_seeds(&arm_cfg, &cfg.seeds, &dir.join("runs"));
        bail_on_failures(&failures)?;
        let per_seed: Vec<CoverageSeed> = runs
            .iter()
            .map(|r| CoverageSeed {
                seed: r.seed,
                coverage: r.result.coverage_grid.coverage(),
                unique_cells: r.result.style_divergence().map(|d| d.unique_cells).unwrap_or_default(),
            })
            .collect();
        let covs: Vec<f64> = per_seed.iter().map(|s| s.coverage).collect();
        arms.push(CoverageArm {
            algorithm,
            mean_coverage: mean_std(&covs).0,
            per_seed,
        });
    }
    let mut csv = String::from("algorithm,seed,coverage,unique_cells\n");
    for arm in &arms {
        for s in &arm.per_seed {
            let unique: Vec<String> = s.unique_cells.iter().map(|u| u.to_string()).collect();
            csv.push_str(&format!("{},{},{},{}\n", arm.algorithm, s.seed, s.coverage, unique.join(" ")));
        }
    }
    write_text(&dir.join("coverage.csv"), &csv)?;
    write_text(
        &dir.join("coverage.json"),
        &(serde_json::to_string_pretty(&arms).expect("report serializes") + "\n"),
    )?;
    Ok(arms)
}
