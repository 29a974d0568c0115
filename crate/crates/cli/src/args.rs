use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::evaluate::{run_evaluate, EvaluateOptions};
use crate::generate::{run_generate, GenerateOptions};
use crate::loss_check::{run_loss_check, LossCheckOptions};
use crate::overlay::{run_overlay, OverlayOptions};
use crate::phantom::{run_phantom, PhantomOptions};
use crate::stats::{run_stats, StatsOptions};
use crate::{exit_code_for, EXIT_OK, EXIT_PARTIAL};

#[derive(Debug, Parser)]
#[command(name = "scribble", version, about = "Scribble annotations from dense label volumes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write seeded synthetic label volumes and a manifest for them.
    Phantom(PhantomArgs),
    /// Generate scribbles for every case of a manifest.
    Generate(GenerateArgs),
    /// Score predictions against references with Dice.
    Evaluate(EvaluateArgs),
    /// Count annotated voxels per class.
    Stats(StatsArgs),
    /// Check loss gradients against finite differences.
    LossCheck(LossCheckArgs),
    /// Render one slice with its scribbles as a PNG.
    Overlay(OverlayArgs),
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub cases: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// TOML file with scribble settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=2))]
    pub slice_axis: Option<u8>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Reference manifest; repeat for several datasets.
    #[arg(long, required = true)]
    pub manifest: Vec<PathBuf>,
    /// Directory of predictions named after the cases.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub include_background: bool,
    #[arg(long, default_value = "prediction")]
    pub method: String,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub scribbles: PathBuf,
    /// Second scribble directory to compare totals with.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// CSV file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct LossCheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub problems: usize,
    #[arg(long, default_value_t = 5)]
    pub max_classes: usize,
    #[arg(long, default_value_t = 500)]
    pub max_voxels: usize,
    #[arg(long)]
    pub labeled_fraction: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub logit_scale: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct OverlayArgs {
    /// Dense label volume.
    #[arg(long, alias = "case")]
    pub dense: PathBuf,
    #[arg(long)]
    pub scribbles: Option<PathBuf>,
    #[arg(long)]
    pub slice: usize,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(0..=2))]
    pub slice_axis: u8,
    #[arg(long, default_value_t = 1)]
    pub scale: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code_for(&e)
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<i32> {
    match command {
        Command::Phantom(a) => {
            let manifest = run_phantom(&PhantomOptions {
                spec: a.spec,
                out: a.out,
                cases: a.cases,
                seed: a.seed,
                workers: a.workers,
            })?;
            println!("wrote {} phantoms, manifest {}", a.cases, manifest.display());
            Ok(EXIT_OK)
        }
        Command::Generate(a) => {
            let report = run_generate(&GenerateOptions {
                manifest: a.manifest,
                config: a.config,
                out: a.out,
                seed: a.seed,
                workers: a.workers,
                slice_axis: a.slice_axis.map(usize::from),
            })?;
            let mut failed = 0;
            for (case, why) in report.failures() {
                eprintln!("failed {case}: {why}");
                failed += 1;
            }
            println!(
                "generated {} of {} cases, stats in {}",
                report.cases.len() - failed,
                report.cases.len(),
                report.stats_path.display()
            );
            Ok(if failed > 0 { EXIT_PARTIAL } else { EXIT_OK })
        }
        Command::Evaluate(a) => {
            let report = run_evaluate(&EvaluateOptions {
                manifests: a.manifest,
                predictions: a.pred,
                out: a.out,
                workers: a.workers,
                include_background: a.include_background,
                method: a.method,
            })?;
            for (d, c, why) in &report.skipped {
                eprintln!("not scored {d}/{c}: {why}");
            }
            match &report.summary {
                Some(agg) => {
                    for d in &agg.datasets {
                        println!("{:<20} {:.3}", d.name, d.mean);
                    }
                    println!("{:<20} {:.3}", "mean", agg.grand_mean);
                }
                None => println!("no case could be scored"),
            }
            let partial = !report.skipped.is_empty() || report.summary.is_none();
            Ok(if partial { EXIT_PARTIAL } else { EXIT_OK })
        }
        Command::Stats(a) => {
            let report = run_stats(&StatsOptions {
                manifest: a.manifest,
                scribbles: a.scribbles,
                compare: a.compare,
                out: a.out,
                workers: a.workers,
            })?;
            let mut failed = 0;
            for c in &report.cases {
                if let Err(why) = &c.outcome {
                    eprintln!("failed {}: {why}", c.case);
                    failed += 1;
                }
            }
            println!("annotated voxels: {}", report.total);
            if let (Some(b), Some(change)) = (report.compare_total, report.relative_change()) {
                println!("comparison set: {b} ({change})");
            }
            Ok(if failed > 0 { EXIT_PARTIAL } else { EXIT_OK })
        }
        Command::LossCheck(a) => {
            let lines = run_loss_check(&LossCheckOptions {
                seed: a.seed,
                problems: a.problems,
                max_classes: a.max_classes,
                max_voxels: a.max_voxels,
                labeled_fraction: a.labeled_fraction,
                logit_scale: a.logit_scale,
                threshold: a.threshold,
            })?;
            for l in &lines {
                println!("{l}");
            }
            Ok(if lines.iter().all(|l| l.passed) { EXIT_OK } else { EXIT_PARTIAL })
        }
        Command::Overlay(a) => {
            run_overlay(&OverlayOptions {
                dense: a.dense,
                scribbles: a.scribbles,
                slice: a.slice,
                axis: usize::from(a.slice_axis),
                scale: a.scale,
                out: a.out.clone(),
            })?;
            println!("wrote {}", a.out.display());
            Ok(EXIT_OK)
        }
    }
}
