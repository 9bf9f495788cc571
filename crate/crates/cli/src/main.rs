//! `seqprint` — behavioral sequence mining for learning-activity logs.
//!
//! `seqprint run` executes the full pipeline (ingest, label, mine, profile,
//! stability test, cluster) and drops all report files into one directory;
//! the other subcommands expose each stage individually so intermediate
//! artifacts can be inspected or recomputed with different parameters.

mod config;
mod pipeline;

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use seqprint_core::cluster;
use seqprint_core::ingest;
use seqprint_core::profiles;
use seqprint_core::sequencer::{self, BoundaryConfig};
use seqprint_core::spam::{self, Limit, MiningParams, SequenceDatabase};
use seqprint_core::stats::{self, Measure, StabilityParams};
use seqprint_core::synth::{self, CohortSpec};

use config::{ConfigOverlay, RunConfig};

#[derive(Parser)]
#[command(
    name = "seqprint",
    about = "Mine behavioral sequence patterns from learning-activity logs",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic event-log cohort
    Synth(SynthArgs),
    /// Validate an event log and report dataset statistics
    Ingest(IngestArgs),
    /// Label activities and build per-(user, session, topic) sequences
    Sequence(SequenceArgs),
    /// Mine frequent sequential patterns from labeled sequences
    Mine(MineArgs),
    /// Build per-user pattern-frequency profiles
    Profile(ProfileArgs),
    /// Run the split-half identifiability experiment
    Stability(StabilityArgs),
    /// Ward-cluster user profiles and report per-cluster frequencies
    Cluster(ClusterArgs),
    /// Run the whole pipeline end to end
    Run(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Cohort spec file (key = value; see README for the schema)
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output events CSV path
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Override the number of users
    #[arg(long)]
    users: Option<usize>,
    /// Override the distinctness knob in [0, 1]
    #[arg(long)]
    distinctness: Option<f64>,
}

#[derive(Args)]
struct IngestArgs {
    /// Input events CSV
    #[arg(long)]
    input: PathBuf,
    /// Stats JSON output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SequenceArgs {
    /// Input events CSV
    #[arg(long)]
    input: PathBuf,
    /// Output sequences CSV
    #[arg(long)]
    out: PathBuf,
    /// Split sequences at idle gaps at or above the median gap
    #[arg(long)]
    require_gap_below_median: bool,
    /// Drop all-exercise and all-example sequences
    #[arg(long)]
    require_mixed_activity: bool,
    /// Drop sequences that do not end with an exercise
    #[arg(long)]
    require_exercise_ending: bool,
}

#[derive(Args)]
struct MineArgs {
    /// Input sequences CSV
    #[arg(long)]
    input: PathBuf,
    /// Output patterns CSV
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.04)]
    minsup: f64,
    #[arg(long, default_value = "1")]
    maxgap: Limit,
    #[arg(long, default_value_t = 2)]
    minlen: usize,
    #[arg(long, default_value = "unbounded")]
    maxlen: Limit,
}

#[derive(Args)]
struct ProfileArgs {
    /// Input sequences CSV
    #[arg(long)]
    sequences: PathBuf,
    /// Mined patterns CSV defining the vocabulary
    #[arg(long)]
    patterns: PathBuf,
    /// Output profiles CSV
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "1")]
    maxgap: Limit,
    #[arg(long, default_value_t = 0.0001)]
    epsilon: f64,
}

#[derive(Args)]
struct StabilityArgs {
    /// Input sequences CSV
    #[arg(long)]
    sequences: PathBuf,
    /// Mined patterns CSV defining the vocabulary
    #[arg(long)]
    patterns: PathBuf,
    /// Per-user distances CSV output
    #[arg(long)]
    out_csv: PathBuf,
    /// Summary JSON output
    #[arg(long)]
    out_json: PathBuf,
    #[arg(long, default_value = "1")]
    maxgap: Limit,
    #[arg(long, default_value_t = 0.0001)]
    epsilon: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Distance measures, comma-separated
    #[arg(long, value_delimiter = ',', default_value = "js_divergence,cosine_distance")]
    measures: Vec<Measure>,
}

#[derive(Args)]
struct ClusterArgs {
    /// Input profiles CSV
    #[arg(long)]
    profiles: PathBuf,
    /// Directory for dendrogram.nwk, dendrogram.dot, assignments.csv,
    /// cluster_report.csv
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 2)]
    k: usize,
}

#[derive(Args)]
struct RunArgs {
    /// Input events CSV
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory for all report files
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Key-value config file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replay a previous run's manifest.json
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Minimum support fraction in (0, 1] (default 0.04)
    #[arg(long)]
    minsup: Option<f64>,
    /// Maximum position gap: an integer or `unbounded` (default 1)
    #[arg(long)]
    maxgap: Option<Limit>,
    /// Minimum pattern length (default 2)
    #[arg(long)]
    minlen: Option<usize>,
    /// Maximum pattern length: an integer or `unbounded` (default unbounded)
    #[arg(long)]
    maxlen: Option<Limit>,
    /// Smoothing constant for zero pattern counts (default 0.0001)
    #[arg(long)]
    epsilon: Option<f64>,
    /// Split sequences at idle gaps at or above the median gap
    #[arg(long)]
    require_gap_below_median: bool,
    /// Drop all-exercise and all-example sequences
    #[arg(long)]
    require_mixed_activity: bool,
    /// Drop sequences that do not end with an exercise
    #[arg(long)]
    require_exercise_ending: bool,
    /// Number of clusters to cut the dendrogram into (default 2)
    #[arg(long)]
    k: Option<usize>,
    /// Seed for the split-half experiment (default 42)
    #[arg(long)]
    seed: Option<u64>,
    /// Distance measures, comma-separated
    #[arg(long, value_delimiter = ',')]
    measures: Option<Vec<Measure>>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Synth(args) => cmd_synth(args),
        Command::Ingest(args) => cmd_ingest(args),
        Command::Sequence(args) => cmd_sequence(args),
        Command::Mine(args) => cmd_mine(args),
        Command::Profile(args) => cmd_profile(args),
        Command::Stability(args) => cmd_stability(args),
        Command::Cluster(args) => cmd_cluster(args),
        Command::Run(args) => cmd_run(args),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading cohort spec {}", path.display()))?;
            CohortSpec::from_key_value(&text).map_err(|e| anyhow!(e)).context("[synth]")?
        }
        None => CohortSpec::default(),
    };
    if let Some(users) = args.users {
        spec.n_users = users;
    }
    if let Some(distinctness) = args.distinctness {
        spec.distinctness = distinctness;
    }
    let records = synth::generate_cohort(&spec, args.seed).map_err(|e| anyhow!(e))
        .context("[synth]")?;
    pipeline::write_with(&args.out, |w| {
        ingest::write_event_log(&records, w).map_err(std::io::Error::other)
    })?;
    println!(
        "generated {} records for {} users (seed {}) -> {}",
        records.len(),
        spec.n_users,
        args.seed,
        args.out.display()
    );
    Ok(())
}

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let records = pipeline::read_events(&args.input).context("[ingest]")?;
    let stats = ingest::dataset_stats(&records);
    let json = ingest::stats_to_json(&stats);
    match &args.out {
        Some(path) => pipeline::write_text(path, &json)?,
        None => print!("{json}"),
    }
    Ok(())
}

fn cmd_sequence(args: SequenceArgs) -> Result<()> {
    let records = pipeline::read_events(&args.input).context("[sequence]")?;
    let medians = sequencer::compute_medians(&records);
    let sequences = sequencer::build_sequences(&records, &medians)
        .map_err(|e| anyhow!(e))
        .context("[sequence]")?;
    let cfg = BoundaryConfig {
        require_gap_below_median: args.require_gap_below_median,
        require_mixed_activity: args.require_mixed_activity,
        require_exercise_ending: args.require_exercise_ending,
    };
    let sequences = sequencer::filter_sequences(&sequences, &records, &cfg);
    pipeline::write_with(&args.out, |w| sequencer::write_sequences_csv(&sequences, w))?;
    println!(
        "built {} sequences from {} records -> {}",
        sequences.len(),
        records.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_mine(args: MineArgs) -> Result<()> {
    let sequences = pipeline::read_sequences(&args.input).context("[mine]")?;
    let db = SequenceDatabase::from_labeled(&sequences);
    let params = MiningParams {
        minsup: args.minsup,
        maxgap: args.maxgap,
        minlen: args.minlen,
        maxlen: args.maxlen,
    };
    let patterns = spam::mine(&db, &params).map_err(|e| anyhow!(e)).context("[mine]")?;
    pipeline::write_with(&args.out, |w| spam::write_patterns_csv(&patterns, w))?;
    println!(
        "mined {} patterns from {} sequences (minsup {}, maxgap {}, len {}..{}) -> {}",
        patterns.len(),
        db.len(),
        args.minsup,
        args.maxgap,
        args.minlen,
        args.maxlen,
        args.out.display()
    );
    Ok(())
}

fn cmd_profile(args: ProfileArgs) -> Result<()> {
    let sequences = pipeline::read_sequences(&args.sequences).context("[profile]")?;
    let vocab = pipeline::read_vocabulary(&args.patterns).context("[profile]")?;
    let user_profiles =
        profiles::build_profiles(&sequences, &vocab, args.maxgap, args.epsilon)
            .map_err(|e| anyhow!(e))
            .context("[profile]")?;
    pipeline::write_with(&args.out, |w| {
        profiles::write_profiles_csv(&vocab, &user_profiles, w)
    })?;
    println!(
        "built {} profiles over {} patterns -> {}",
        user_profiles.len(),
        vocab.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_stability(args: StabilityArgs) -> Result<()> {
    let sequences = pipeline::read_sequences(&args.sequences).context("[stability]")?;
    let vocab = pipeline::read_vocabulary(&args.patterns).context("[stability]")?;
    let params = StabilityParams {
        maxgap: args.maxgap,
        epsilon: args.epsilon,
        seed: args.seed,
        measures: args.measures,
    };
    let report = stats::stability_experiment(&sequences, &vocab, &params)
        .map_err(|e| anyhow!(e))
        .context("[stability]")?;
    pipeline::write_with(&args.out_csv, |w| stats::write_stability_csv(&report, w))?;
    pipeline::write_text(&args.out_json, &stats::stability_summary_json(&report))?;
    for user in &report.excluded_users {
        eprintln!("warning: user `{user}` has fewer than 2 sequences; excluded");
    }
    for m in &report.measures {
        println!(
            "{}: self {:.4}, other {:.4}, t = {:.3}, df = {}, p = {:.6}",
            m.measure, m.mean_self_distance, m.mean_distance_to_other, m.t, m.df, m.p
        );
    }
    Ok(())
}

fn cmd_cluster(args: ClusterArgs) -> Result<()> {
    let file = File::open(&args.profiles)
        .with_context(|| format!("opening profiles {}", args.profiles.display()))?;
    let (vocab, user_profiles) = profiles::read_profiles_csv(BufReader::new(file))
        .map_err(|e| anyhow!(e))
        .context("[cluster]")?;
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let out = |name: &str| args.out_dir.join(name);

    let tree = cluster::ward_cluster(&user_profiles)
        .map_err(|e| anyhow!(e))
        .context("[cluster]")?;
    pipeline::write_text(&out("dendrogram.nwk"), &cluster::to_newick(&tree))?;
    pipeline::write_text(&out("dendrogram.dot"), &cluster::to_dot(&tree))?;
    let assignment = cluster::cut_tree(&tree, args.k)
        .map_err(|e| anyhow!(e))
        .context("[cluster]")?;
    pipeline::write_with(&out("assignments.csv"), |w| {
        cluster::write_assignments_csv(&assignment, w)
    })?;
    let report = cluster::cluster_report(&assignment, &user_profiles)
        .map_err(|e| anyhow!(e))
        .context("[cluster]")?;
    pipeline::write_with(&out("cluster_report.csv"), |w| {
        cluster::write_cluster_report_csv(&report, &vocab.names(), w)
    })?;
    println!(
        "clustered {} users into k={} -> {}",
        user_profiles.len(),
        args.k,
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg = match &args.manifest {
        Some(path) => RunConfig::from_manifest(path)?,
        None => RunConfig::with_paths(PathBuf::new(), PathBuf::new()),
    };
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        ConfigOverlay::from_key_value(&text)
            .with_context(|| format!("parsing config {}", path.display()))?
            .apply(&mut cfg);
    }
    let flags = ConfigOverlay {
        input: args.input,
        out_dir: args.out_dir,
        minsup: args.minsup,
        maxgap: args.maxgap,
        minlen: args.minlen,
        maxlen: args.maxlen,
        epsilon: args.epsilon,
        require_gap_below_median: args.require_gap_below_median.then_some(true),
        require_mixed_activity: args.require_mixed_activity.then_some(true),
        require_exercise_ending: args.require_exercise_ending.then_some(true),
        k: args.k,
        seed: args.seed,
        measures: args.measures,
    };
    flags.apply(&mut cfg);
    if cfg.input.as_os_str().is_empty() {
        bail!("missing --input (or provide it via --config/--manifest)");
    }
    if cfg.out_dir.as_os_str().is_empty() {
        bail!("missing --out-dir (or provide it via --config/--manifest)");
    }
    pipeline::run_pipeline(&cfg)
}
