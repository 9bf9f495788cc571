//! Per-user pattern-frequency profiles over a mined vocabulary.
//!
//! Counting is by occurrence, not containment: every distinct gap-respecting
//! position tuple counts, overlaps included. Counts are smoothed by replacing
//! zeros with a small epsilon (default 0.0001) before normalizing, so every
//! profile is a strictly positive probability vector.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use thiserror::Error;

use crate::sequencer::{format_labels, parse_labels, Label, LabeledSequence};
use crate::spam::{Limit, Pattern};

/// The mined pattern set, in the canonical order produced by the miner.
/// The order is fixed for the lifetime of an experiment: profile vectors,
/// CSV columns, and cluster reports all index into it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternVocabulary {
    patterns: Vec<Vec<Label>>,
}

impl PatternVocabulary {
    pub fn new(patterns: Vec<Vec<Label>>) -> Result<Self, ProfileError> {
        let mut seen = std::collections::BTreeSet::new();
        for p in &patterns {
            if p.is_empty() {
                return Err(ProfileError::EmptyPattern);
            }
            if !seen.insert(p.clone()) {
                return Err(ProfileError::DuplicatePattern(format_labels(p)));
            }
        }
        Ok(PatternVocabulary { patterns })
    }

    pub fn from_patterns(patterns: &[Pattern]) -> Result<Self, ProfileError> {
        Self::new(patterns.iter().map(|p| p.items.clone()).collect())
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Label]> {
        self.patterns.iter().map(Vec::as_slice)
    }

    /// Canonical column headers for exports.
    pub fn names(&self) -> Vec<String> {
        self.patterns.iter().map(|p| format_labels(p)).collect()
    }
}

/// A user's smoothed, normalized frequency distribution over the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternProfile {
    pub user_id: String,
    /// Strictly positive weights summing to 1 (within 1e-9), one per
    /// vocabulary pattern.
    pub weights: Vec<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("pattern vocabulary is empty")]
    EmptyVocabulary,
    #[error("vocabulary contains an empty pattern")]
    EmptyPattern,
    #[error("duplicate pattern `{0}` in vocabulary")]
    DuplicatePattern(String),
    #[error("count vector is empty")]
    EmptyCounts,
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
}

/// Counts every gap-respecting occurrence of `pattern` in `seq`: the number
/// of strictly increasing position tuples matching the pattern with all
/// consecutive deltas within `maxgap`. Overlapping occurrences each count.
pub fn count_embeddings(seq: &[Label], pattern: &[Label], maxgap: Limit) -> u64 {
    if pattern.is_empty() || seq.is_empty() {
        return 0;
    }
    // ways[j] = number of embeddings of the processed prefix ending at j.
    let mut ways: Vec<u64> = seq
        .iter()
        .map(|&l| u64::from(l == pattern[0]))
        .collect();
    for &item in &pattern[1..] {
        let mut next = vec![0u64; seq.len()];
        for (j, &label) in seq.iter().enumerate() {
            if label != item || j == 0 {
                continue;
            }
            let lo = match maxgap {
                Limit::Finite(g) => j.saturating_sub(g),
                Limit::Unbounded => 0,
            };
            next[j] = ways[lo..j]
                .iter()
                .fold(0u64, |acc, &w| acc.saturating_add(w));
        }
        ways = next;
    }
    ways.iter().fold(0u64, |acc, &w| acc.saturating_add(w))
}

/// Per-user total occurrence counts of each vocabulary pattern across that
/// user's sequences. Users appear in sorted order.
pub fn count_occurrences(
    seqs: &[LabeledSequence],
    vocab: &PatternVocabulary,
    maxgap: Limit,
) -> Result<BTreeMap<String, Vec<u64>>, ProfileError> {
    if vocab.is_empty() {
        return Err(ProfileError::EmptyVocabulary);
    }
    let mut counts: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    for seq in seqs {
        let entry = counts
            .entry(seq.user_id.clone())
            .or_insert_with(|| vec![0; vocab.len()]);
        for (v, pattern) in vocab.iter().enumerate() {
            entry[v] =
                entry[v].saturating_add(count_embeddings(&seq.labels, pattern, maxgap));
        }
    }
    Ok(counts)
}

/// Smooths and normalizes a count vector into a probability distribution:
/// zero counts become `epsilon`, then the vector is divided by its sum.
pub fn build_profile(counts: &[u64], epsilon: f64) -> Result<Vec<f64>, ProfileError> {
    if counts.is_empty() {
        return Err(ProfileError::EmptyCounts);
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(ProfileError::BadEpsilon(epsilon));
    }
    let smoothed: Vec<f64> = counts
        .iter()
        .map(|&c| if c == 0 { epsilon } else { c as f64 })
        .collect();
    let total: f64 = smoothed.iter().sum();
    Ok(smoothed.into_iter().map(|w| w / total).collect())
}

/// Builds one profile per user appearing in `seqs`, sorted by user id.
pub fn build_profiles(
    seqs: &[LabeledSequence],
    vocab: &PatternVocabulary,
    maxgap: Limit,
    epsilon: f64,
) -> Result<Vec<PatternProfile>, ProfileError> {
    let counts = count_occurrences(seqs, vocab, maxgap)?;
    counts
        .into_iter()
        .map(|(user_id, user_counts)| {
            Ok(PatternProfile {
                user_id,
                weights: build_profile(&user_counts, epsilon)?,
            })
        })
        .collect()
}

/// Writes profiles as CSV: `user_id` followed by one column per vocabulary
/// pattern, in vocabulary order. Weights use the shortest round-trip float
/// rendering, so reading the file back loses nothing.
pub fn write_profiles_csv<W: Write>(
    vocab: &PatternVocabulary,
    profiles: &[PatternProfile],
    out: W,
) -> Result<(), std::io::Error> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["user_id".to_string()];
    header.extend(vocab.names());
    writer.write_record(&header)?;
    for profile in profiles {
        let mut row = vec![profile.user_id.clone()];
        row.extend(profile.weights.iter().map(f64::to_string));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a profiles CSV back into the vocabulary and per-user profiles.
pub fn read_profiles_csv<R: Read>(
    source: R,
) -> Result<(PatternVocabulary, Vec<PatternProfile>), String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(source);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.first().map(String::as_str) != Some("user_id") || headers.len() < 2 {
        return Err("bad profiles header: expected `user_id` plus pattern columns".to_string());
    }
    let patterns: Result<Vec<Vec<Label>>, String> =
        headers[1..].iter().map(|h| parse_labels(h)).collect();
    let vocab = PatternVocabulary::new(patterns?).map_err(|e| e.to_string())?;

    let mut profiles = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let row = row.map_err(|e| format!("row {}: {e}", idx + 1))?;
        if row.len() != headers.len() {
            return Err(format!(
                "row {}: expected {} fields, found {}",
                idx + 1,
                headers.len(),
                row.len()
            ));
        }
        let weights: Result<Vec<f64>, String> = row
            .iter()
            .skip(1)
            .map(|cell| {
                cell.parse::<f64>()
                    .map_err(|_| format!("row {}: bad weight `{cell}`", idx + 1))
            })
            .collect();
        profiles.push(PatternProfile {
            user_id: row[0].to_string(),
            weights: weights?,
        });
    }
    Ok((vocab, profiles))
}
