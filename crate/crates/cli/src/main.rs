//! `craft`: feature extraction and clustering of multi-Mach source spectra.

mod commands;
mod reports;
mod settings;
mod staging;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::commands::EvalInputs;
use crate::settings::{ConfigFile, Settings};

#[derive(Parser)]
#[command(name = "craft", version, about)]
struct Cli {
    /// Seed of every random choice; recorded in the manifest.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the per-source stages.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// JSON file with the same keys as the flags (snake_case).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labelled bundle.
    Gen {
        /// Instances per archetype.
        #[arg(long)]
        per_type: Option<usize>,
        /// Also include the two-mechanism archetype.
        #[arg(long)]
        with_split: bool,
    },
    /// Separate two-mechanism spectra; writes the prepared bundle.
    Prep {
        input: PathBuf,
        #[command(flatten)]
        sep: SeparationArgs,
    },
    /// Compute the feature table.
    Features {
        input: PathBuf,
        #[command(flatten)]
        feat: FeatureArgs,
    },
    /// Reduce and cluster a feature table (`features.json`).
    Cluster {
        input: PathBuf,
        #[command(flatten)]
        cluster: ClusterArgs,
    },
    /// Compare a clustering with labels.
    Evaluate {
        /// `clusters.json` from `cluster` or `pipeline`.
        #[arg(long)]
        clusters: PathBuf,
        /// `features.json`, for the feature dendrogram and cluster means.
        #[arg(long)]
        features: Option<PathBuf>,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Separation, features, clustering and, given labels, evaluation.
    Pipeline {
        input: PathBuf,
        #[command(flatten)]
        sep: SeparationArgs,
        #[command(flatten)]
        feat: FeatureArgs,
        #[command(flatten)]
        cluster: ClusterArgs,
        #[command(flatten)]
        eval: OptionalEvalArgs,
    },
}

#[derive(Args, Default)]
struct SeparationArgs {
    /// Keep every spectrum intact.
    #[arg(long)]
    no_separate: bool,
    /// Relative gain a mixed split needs over the best same-type split.
    #[arg(long)]
    min_improvement: Option<f64>,
}

#[derive(Args, Default)]
struct FeatureArgs {
    /// Level-weight exponent of the power-scaling fit.
    #[arg(long)]
    power_gamma: Option<f64>,
}

#[derive(Args, Default)]
struct ClusterArgs {
    #[arg(long)]
    min_cluster_size: Option<usize>,
    #[arg(long)]
    min_samples: Option<usize>,
    /// Cluster counts for each minimum cluster size in `A..B`.
    #[arg(long)]
    scan: Option<String>,
    /// Kernel variance fraction to keep.
    #[arg(long)]
    retain: Option<f64>,
    /// RBF width; defaults to one over the feature count.
    #[arg(long)]
    kernel_gamma: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    /// JSON object `{source id: label}`.
    #[arg(long)]
    labels: PathBuf,
    #[command(flatten)]
    rest: CorrectnessArgs,
}

#[derive(Args)]
struct OptionalEvalArgs {
    /// JSON object `{source id: label}`; enables evaluation.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[command(flatten)]
    rest: CorrectnessArgs,
}

#[derive(Args, Default)]
struct CorrectnessArgs {
    /// JSON object `{label: [correct cluster ids]}`.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Without a mask, score against the best one-to-one label/cluster pairing.
    #[arg(long)]
    matched: bool,
    /// Number of threshold steps over [0, 1].
    #[arg(long)]
    thresholds: Option<usize>,
}

fn flag(b: bool) -> Option<bool> {
    b.then_some(true)
}

impl Cli {
    fn flags(&self) -> ConfigFile {
        let mut c = ConfigFile { seed: self.seed, jobs: self.jobs, ..Default::default() };
        let sep = |c: &mut ConfigFile, a: &SeparationArgs| {
            c.no_separate = flag(a.no_separate);
            c.min_improvement = a.min_improvement;
        };
        let clu = |c: &mut ConfigFile, a: &ClusterArgs| {
            c.min_cluster_size = a.min_cluster_size;
            c.min_samples = a.min_samples;
            c.scan = a.scan.clone();
            c.retain = a.retain;
            c.kernel_gamma = a.kernel_gamma;
        };
        match &self.command {
            Command::Gen { per_type, with_split } => {
                c.per_type = *per_type;
                c.with_split = flag(*with_split);
            }
            Command::Prep { sep: a, .. } => sep(&mut c, a),
            Command::Features { feat, .. } => c.power_gamma = feat.power_gamma,
            Command::Cluster { cluster, .. } => clu(&mut c, cluster),
            Command::Evaluate { eval, .. } => {
                c.thresholds = eval.rest.thresholds;
                c.matched = flag(eval.rest.matched);
            }
            Command::Pipeline { sep: a, feat, cluster, eval, .. } => {
                sep(&mut c, a);
                c.power_gamma = feat.power_gamma;
                clu(&mut c, cluster);
                c.thresholds = eval.rest.thresholds;
                c.matched = flag(eval.rest.matched);
            }
        }
        c
    }
}

fn run(cli: &Cli) -> Result<()> {
    let file = ConfigFile::load(cli.config.as_deref())?;
    let s = Settings::resolve(file.overlay(cli.flags()))?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::Gen { .. } => commands::gen(out, &s),
        Command::Prep { input, .. } => commands::prep(input, out, &s),
        Command::Features { input, .. } => commands::features(input, out, &s),
        Command::Cluster { input, .. } => commands::cluster(input, out, &s),
        Command::Evaluate { clusters, features, eval } => {
            let inputs = EvalInputs { labels: &eval.labels, mask: eval.rest.mask.as_deref(), matched: s.matched };
            commands::evaluate(clusters, features.as_deref(), &inputs, out, &s)
        }
        Command::Pipeline { input, eval, .. } => {
            let inputs = eval.labels.as_deref().map(|labels: &Path| EvalInputs {
                labels,
                mask: eval.rest.mask.as_deref(),
                matched: s.matched,
            });
            commands::pipeline(input, inputs.as_ref(), out, &s)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
