//! End-to-end pipeline execution and the report files it emits.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context, Result};

use seqprint_core::cluster;
use seqprint_core::ingest::{self, EventRecord};
use seqprint_core::profiles::{self, PatternVocabulary};
use seqprint_core::sequencer::{self, LabeledSequence};
use seqprint_core::spam::{self, SequenceDatabase};
use seqprint_core::stats;

use crate::config::RunConfig;

pub fn read_events(path: &Path) -> Result<Vec<EventRecord>> {
    let file = File::open(path)
        .with_context(|| format!("opening event log {}", path.display()))?;
    ingest::parse_event_log(BufReader::new(file)).map_err(|e| anyhow!(e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes through a closure that receives a buffered file writer.
pub fn write_with<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file =
        File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut writer = BufWriter::new(file);
    write(&mut writer).with_context(|| format!("writing {}", path.display()))?;
    writer.flush().with_context(|| format!("flushing {}", path.display()))?;
    Ok(())
}

/// Runs the whole pipeline and writes all report files. Any stage error
/// aborts with a `[stage]`-tagged message.
pub fn run_pipeline(cfg: &RunConfig) -> Result<()> {
    cfg.validate().context("[config]")?;
    std::fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating output directory {}", cfg.out_dir.display()))?;
    let out = |name: &str| cfg.out_dir.join(name);

    write_text(&out("manifest.json"), &cfg.manifest_json())?;

    // ingest
    let records = read_events(&cfg.input).context("[ingest]")?;
    let stats = ingest::dataset_stats(&records);
    write_text(&out("stats.json"), &ingest::stats_to_json(&stats))?;

    // sequence
    let medians = sequencer::compute_medians(&records);
    let sequences = sequencer::build_sequences(&records, &medians).context("[sequence]")?;
    let sequences = sequencer::filter_sequences(&sequences, &records, &cfg.boundary_config());
    write_with(&out("sequences.csv"), |w| {
        sequencer::write_sequences_csv(&sequences, w)
    })?;

    // mine
    let db = SequenceDatabase::from_labeled(&sequences);
    let patterns = spam::mine(&db, &cfg.mining_params()).context("[mine]")?;
    write_with(&out("patterns.csv"), |w| {
        spam::write_patterns_csv(&patterns, w)
    })?;

    // profile
    if patterns.is_empty() {
        return Err(anyhow!(
            "[profile] no patterns at minsup {} (database of {} sequences); lower --minsup",
            cfg.minsup,
            db.len()
        ));
    }
    let vocab = PatternVocabulary::from_patterns(&patterns).context("[profile]")?;
    let user_profiles =
        profiles::build_profiles(&sequences, &vocab, cfg.maxgap, cfg.epsilon)
            .context("[profile]")?;
    write_with(&out("profiles.csv"), |w| {
        profiles::write_profiles_csv(&vocab, &user_profiles, w)
    })?;

    // stability
    let report = stats::stability_experiment(&sequences, &vocab, &cfg.stability_params())
        .context("[stability]")?;
    write_with(&out("stability.csv"), |w| {
        stats::write_stability_csv(&report, w)
    })?;
    write_text(
        &out("stability_summary.json"),
        &stats::stability_summary_json(&report),
    )?;
    for user in &report.excluded_users {
        eprintln!("warning: user `{user}` has fewer than 2 sequences; excluded from stability");
    }

    // cluster
    let tree = cluster::ward_cluster(&user_profiles).context("[cluster]")?;
    write_text(&out("dendrogram.nwk"), &cluster::to_newick(&tree))?;
    write_text(&out("dendrogram.dot"), &cluster::to_dot(&tree))?;
    let assignment = cluster::cut_tree(&tree, cfg.k).context("[cluster]")?;
    write_with(&out("assignments.csv"), |w| {
        cluster::write_assignments_csv(&assignment, w)
    })?;
    let report = cluster::cluster_report(&assignment, &user_profiles).context("[cluster]")?;
    write_with(&out("cluster_report.csv"), |w| {
        cluster::write_cluster_report_csv(&report, &vocab.names(), w)
    })?;

    println!(
        "run complete: {} records, {} sequences, {} patterns, {} users, k={} clusters -> {}",
        records.len(),
        sequences.len(),
        patterns.len(),
        user_profiles.len(),
        cfg.k,
        cfg.out_dir.display()
    );
    Ok(())
}

/// Loads sequences for the stage subcommands.
pub fn read_sequences(path: &Path) -> Result<Vec<LabeledSequence>> {
    let file =
        File::open(path).with_context(|| format!("opening sequences {}", path.display()))?;
    sequencer::read_sequences_csv(BufReader::new(file)).map_err(|e| anyhow!(e))
}

/// Loads a mined pattern vocabulary for the stage subcommands.
pub fn read_vocabulary(path: &Path) -> Result<PatternVocabulary> {
    let file =
        File::open(path).with_context(|| format!("opening patterns {}", path.display()))?;
    let patterns = spam::read_patterns_csv(BufReader::new(file)).map_err(|e| anyhow!(e))?;
    PatternVocabulary::from_patterns(&patterns).map_err(|e| anyhow!(e))
}
