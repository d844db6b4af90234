use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use ccep_core::agent::Algorithm;
use ccep_core::envs::EnvKind;
use ccep_core::exec::Execution;
use ccep_core::harness::{self, plot, RunConfig};
use ccep_core::numerics::grad_check_sweep;
use ccep_core::tabular::verify_lemma;
use clap::{Args, Parser, Subcommand};

/// Grad-check pass threshold.
const GRAD_TOL: f64 = 1e-4;

#[derive(Parser)]
#[command(name = "ccep", version, about = "Multi-style cooperative exploration lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one seed and write its metric CSV.
    Train(RunArgs),
    /// Train every seed in the config and aggregate them.
    Bench(BenchArgs),
    /// Draw learning curves from metric CSVs as SVG.
    Plot(PlotArgs),
    /// Check the greedy-policy performance-gap bound on random tabular MDPs.
    VerifyLemma(TrialArgs),
    /// Compare analytic gradients with central differences on random small nets.
    GradCheck(TrialArgs),
    /// Same-target vs opposite-target critic disagreement.
    ControversyExp(BenchArgs),
    /// Shared actor vs one actor per style, on both environments.
    Ablation(BenchArgs),
    /// Training-time state coverage of ccep vs td3.
    CoverageExp(BenchArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON config; unset keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Total environment steps.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// ccep, ccep-separate, td3 or ddpg.
    #[arg(long)]
    algo: Option<Algorithm>,
    /// pendulum or pointmaze.
    #[arg(long)]
    env: Option<EnvKind>,
    /// Output root; overrides CCEP_OUT_DIR and the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct BenchArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Run seeds one after another.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(required = true)]
    csv: Vec<PathBuf>,
    #[arg(long, short)]
    output: PathBuf,
    /// Trailing moving-average window.
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Args)]
struct TrialArgs {
    /// Number of trials (MDPs or networks); defaults to 1000 / 100.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    sequential: bool,
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn build_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => harness::load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = args.steps {
        cfg.total_steps = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.algo {
        cfg.algorithm = v;
    }
    if let Some(v) = args.env {
        cfg.env = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn build_bench_config(args: &BenchArgs) -> Result<RunConfig> {
    let mut cfg = build_config(&args.run)?;
    if let Some(seeds) = &args.seeds {
        cfg.seeds = seeds.clone();
    }
    if args.sequential {
        cfg.execution = Execution::Sequential;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_root(cfg: &RunConfig, args: &RunArgs) -> PathBuf {
    cfg.output_root(args.out.as_deref())
}

fn train(args: RunArgs) -> Result<()> {
    let cfg = build_config(&args)?;
    let out = harness::run(&cfg, &out_root(&cfg, &args))?;
    let last = out.result.rows.last().expect("step-0 row always present");
    println!("wrote {}", out.csv_path.display());
    println!(
        "step {}: return {:.3} ± {:.3}, controversy {:.4}, coverage {:.4}",
        last.step, last.return_mean, last.return_std, last.controversy, last.coverage
    );
    println!("max average return {:.3}", out.result.max_average_return());
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let cfg = build_bench_config(&args)?;
    let report = harness::bench(&cfg, &out_root(&cfg, &args.run))?;
    for run in &report.runs {
        println!("seed {}: {}", run.seed, run.csv_path.display());
    }
    if let Some(p) = &report.aggregate_path {
        println!("aggregate {}", p.display());
    }
    println!("summary {}", report.summary_path.display());
    if let Some(m) = report.max_average_return() {
        println!("max average return {m:.3}");
    }
    if !report.failures.is_empty() {
        for f in &report.failures {
            eprintln!("seed {} failed: {}", f.seed, f.error);
        }
        bail!("{} of {} seeds failed", report.failures.len(), cfg.seeds.len());
    }
    Ok(())
}

fn plot_cmd(args: PlotArgs) -> Result<()> {
    let paths: Vec<&Path> = args.csv.iter().map(PathBuf::as_path).collect();
    plot::plot(&paths, &args.output, args.window)?;
    println!("wrote {}", args.output.display());
    Ok(())
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn verify_lemma_cmd(args: TrialArgs) -> Result<bool> {
    let trials = args.trials.unwrap_or(1000);
    let report = verify_lemma(trials, args.seed, execution(args.sequential))?;
    println!("trials: {}", report.trials);
    println!(
        "holds: {} ({:.2}%)",
        report.holds,
        100.0 * report.holds as f64 / report.trials.max(1) as f64
    );
    println!("max lhs/rhs ratio: {}", report.max_ratio);
    println!("result: {}", pass(report.all_hold()));
    Ok(report.all_hold())
}

fn grad_check_cmd(args: TrialArgs) -> Result<bool> {
    let nets = args.trials.unwrap_or(100);
    let sweep = grad_check_sweep(nets, args.seed, execution(args.sequential))?;
    let ok = sweep.max_relative_error < GRAD_TOL;
    println!("nets: {}", sweep.nets);
    println!("parameters checked: {} (skipped near kinks: {})", sweep.checked, sweep.skipped);
    println!("max relative error: {:e}", sweep.max_relative_error);
    println!("result: {}", pass(ok));
    Ok(ok)
}

fn controversy_exp(mut args: BenchArgs) -> Result<()> {
    // the single-style base isolates the effect of negation
    if args.run.algo.is_none() && args.run.config.is_none() {
        args.run.algo = Some(Algorithm::Td3);
    }
    let cfg = build_bench_config(&args)?;
    let dir = out_root(&cfg, &args.run).join("controversy");
    let report = harness::controversy_exp(&cfg, &dir)?;
    println!("seed  same          opposite");
    for r in &report.per_seed {
        println!("{:<5} {:<13.6} {:.6}", r.seed, r.same, r.opposite);
    }
    println!(
        "opposite > same in {}/{} seeds ({})",
        report.exceed,
        report.per_seed.len(),
        dir.display()
    );
    Ok(())
}

fn ablation(args: BenchArgs) -> Result<()> {
    let cfg = build_bench_config(&args)?;
    let dir = out_root(&cfg, &args.run).join("ablation");
    let rows = harness::ablation(&cfg, &dir)?;
    print!("{}", harness::ablation_markdown(&rows));
    println!("wrote {}", dir.join("ablation.md").display());
    Ok(())
}

fn coverage_exp(mut args: BenchArgs) -> Result<()> {
    if args.run.env.is_none() && args.run.config.is_none() {
        args.run.env = Some(EnvKind::Pointmaze);
    }
    let cfg = build_bench_config(&args)?;
    let dir = out_root(&cfg, &args.run).join("coverage");
    let arms = harness::coverage_exp(&cfg, &[Algorithm::Ccep, Algorithm::Td3], &dir)?;
    for arm in &arms {
        println!("{}: mean coverage {:.4}", arm.algorithm, arm.mean_coverage);
        for s in &arm.per_seed {
            if !s.unique_cells.is_empty() {
                println!("  seed {} unique cells per style {:?}", s.seed, s.unique_cells);
            }
        }
    }
    println!("wrote {}", dir.join("coverage.json").display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train(a) => train(a).map(|_| true),
        Command::Bench(a) => bench(a).map(|_| true),
        Command::Plot(a) => plot_cmd(a).map(|_| true),
        Command::VerifyLemma(a) => verify_lemma_cmd(a),
        Command::GradCheck(a) => grad_check_cmd(a),
        Command::ControversyExp(a) => controversy_exp(a).map(|_| true),
        Command::Ablation(a) => ablation(a).map(|_| true),
        Command::CoverageExp(a) => coverage_exp(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
