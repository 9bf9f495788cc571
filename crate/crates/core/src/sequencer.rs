//! Median-threshold labeling and segmentation of event logs into
//! per-(user, session, topic) behavioral sequences.
//!
//! Each activity maps to one of eight labels according to its kind, whether
//! the learner spent more than the corpus median time on that kind, and the
//! pass/fail outcome for exercises. A session and topic shift never interrupt
//! each other: records are grouped by (user, session, topic), so a user who
//! alternates topics inside one session produces one sequence per topic.
//!
//! [`BoundaryConfig`] holds three optional, stricter boundary rules (gap
//! splitting, mixed-activity, exercise ending). They default to off, which is
//! the baseline segmentation.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{ActivityKind, EventRecord, ExerciseOutcome};
use crate::util::median_of_sorted;

/// Behavioral label for a single activity.
///
/// `Over`/`Under` indicate a duration above or at-most the corpus median for
/// that activity kind (ties fall on the `Under` side). `Pass`/`Fail` variants
/// exist only for parameterized exercises.
///
/// The derived `Ord` (declaration order) is the canonical label order used
/// wherever label lists are compared lexicographically.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum Label {
    AnimatedOver,
    AnimatedUnder,
    BasicOver,
    BasicUnder,
    PassOver,
    PassUnder,
    FailOver,
    FailUnder,
}

impl Label {
    pub const ALL: [Label; 8] = [
        Label::AnimatedOver,
        Label::AnimatedUnder,
        Label::BasicOver,
        Label::BasicUnder,
        Label::PassOver,
        Label::PassUnder,
        Label::FailOver,
        Label::FailUnder,
    ];

    /// Canonical text rendering.
    ///
    /// This is the single place that fixes the symbol casing; note that for
    /// basic examples the over-median symbol is the lowercase one.
    pub fn as_str(self) -> &'static str {
        match self {
            Label::AnimatedOver => "AnEx",
            Label::AnimatedUnder => "anex",
            Label::BasicOver => "ex",
            Label::BasicUnder => "Ex",
            Label::PassOver => "P",
            Label::PassUnder => "p",
            Label::FailOver => "F",
            Label::FailUnder => "f",
        }
    }

    /// Index in [`Label::ALL`]; used by the miner's per-item bitmaps.
    pub fn index(self) -> usize {
        self as usize
    }

    /// True for the four exercise labels (P, p, F, f).
    pub fn is_exercise(self) -> bool {
        matches!(
            self,
            Label::PassOver | Label::PassUnder | Label::FailOver | Label::FailUnder
        )
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    /// Case-sensitive parse of the canonical symbols.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Label::ALL
            .iter()
            .copied()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown label `{s}`"))
    }
}

/// Parses a space-separated label string such as `AnEx ex f P p`.
pub fn parse_labels(text: &str) -> Result<Vec<Label>, String> {
    text.split_whitespace().map(Label::from_str).collect()
}

/// Renders labels as the canonical space-separated string.
pub fn format_labels(labels: &[Label]) -> String {
    labels
        .iter()
        .map(|l| l.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Per-kind median activity durations, in seconds.
///
/// Medians exist only for kinds present in the corpus the table was computed
/// from; asking for a missing kind is an error naming that kind.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianTable {
    by_kind: BTreeMap<ActivityKind, f64>,
}

impl MedianTable {
    pub fn get(&self, kind: ActivityKind) -> Option<f64> {
        self.by_kind.get(&kind).copied()
    }

    pub fn require(&self, kind: ActivityKind) -> Result<f64, SequenceError> {
        self.get(kind).ok_or(SequenceError::MissingMedian(kind))
    }

    /// Builds a table from explicit entries (used by tests and tools).
    pub fn from_entries(entries: impl IntoIterator<Item = (ActivityKind, f64)>) -> Self {
        MedianTable {
            by_kind: entries.into_iter().collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ActivityKind, f64)> + '_ {
        self.by_kind.iter().map(|(k, v)| (*k, *v))
    }
}

/// One labeled behavioral sequence for a (user, session, topic) episode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSequence {
    pub user_id: String,
    pub session_id: String,
    pub topic_id: String,
    /// Labels in chronological order; never empty.
    pub labels: Vec<Label>,
    /// Start timestamps aligned with `labels`.
    ///
    /// Sequences loaded back from CSV have no timing information and leave
    /// this empty; every stage downstream of segmentation uses only `labels`.
    pub starts: Vec<i64>,
}

/// Optional boundary rules applied after the baseline segmentation.
///
/// All rules default to off. They were evaluated as alternative sequence
/// boundary definitions and kept only so that comparison can be replayed;
/// each one shrinks the sequence set it is applied to.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryConfig {
    /// Split sequences at idle gaps at or above the median inter-activity gap.
    pub require_gap_below_median: bool,
    /// Drop sequences that are all-exercise or all-example.
    pub require_mixed_activity: bool,
    /// Drop sequences whose final label is not an exercise label.
    pub require_exercise_ending: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SequenceError {
    #[error("no median available for activity kind `{0}`: no records of that kind")]
    MissingMedian(ActivityKind),
}

/// Computes the per-kind median duration over the whole corpus.
///
/// Kinds with no records simply have no entry. Even-count medians are the
/// arithmetic mean of the two middle values.
pub fn compute_medians(records: &[EventRecord]) -> MedianTable {
    let mut durations: BTreeMap<ActivityKind, Vec<i64>> = BTreeMap::new();
    for r in records {
        durations.entry(r.kind).or_default().push(r.duration);
    }
    let by_kind = durations
        .into_iter()
        .map(|(kind, mut ds)| {
            ds.sort_unstable();
            (kind, median_of_sorted(&ds))
        })
        .collect();
    MedianTable { by_kind }
}

/// Maps one activity to its label.
///
/// The duration threshold is strict: only `duration > median` counts as the
/// over-median side, so a tie lands on the under side.
pub fn label_activity(record: &EventRecord, medians: &MedianTable) -> Result<Label, SequenceError> {
    let median = medians.require(record.kind)?;
    let over = record.duration as f64 > median;
    let label = match record.kind {
        ActivityKind::AnimatedExample => {
            if over {
                Label::AnimatedOver
            } else {
                Label::AnimatedUnder
            }
        }
        ActivityKind::BasicExample => {
            if over {
                Label::BasicOver
            } else {
                Label::BasicUnder
            }
        }
        ActivityKind::ParameterizedExercise => match (record.outcome, over) {
            (Some(ExerciseOutcome::Pass), true) => Label::PassOver,
            (Some(ExerciseOutcome::Pass), false) => Label::PassUnder,
            (Some(ExerciseOutcome::Fail), true) => Label::FailOver,
            (Some(ExerciseOutcome::Fail), false) => Label::FailUnder,
            // EventRecord validation guarantees exercises carry an outcome;
            // treat a stray None as a failed exercise attempt is wrong, so
            // fall back to the under-median fail bucket never silently:
            (None, _) => unreachable!("exercise record without outcome"),
        },
    };
    Ok(label)
}

type GroupKey = (String, String, String);

/// Groups records by (user, session, topic) with a stable chronological sort
/// inside each group. Shared by segmentation and the gap filter so both see
/// identical episode structure.
fn grouped_records(records: &[EventRecord]) -> BTreeMap<GroupKey, Vec<&EventRecord>> {
    let mut groups: BTreeMap<GroupKey, Vec<&EventRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.user_id.clone(), r.session_id.clone(), r.topic_id.clone()))
            .or_default()
            .push(r);
    }
    for group in groups.values_mut() {
        group.sort_by_key(|r| r.start);
    }
    groups
}

/// Segments records into labeled sequences, one per non-empty
/// (user, session, topic) group, sorted by that key.
pub fn build_sequences(
    records: &[EventRecord],
    medians: &MedianTable,
) -> Result<Vec<LabeledSequence>, SequenceError> {
    let mut sequences = Vec::new();
    for ((user_id, session_id, topic_id), group) in grouped_records(records) {
        let mut labels = Vec::with_capacity(group.len());
        let mut starts = Vec::with_capacity(group.len());
        for record in group {
            labels.push(label_activity(record, medians)?);
            starts.push(record.start);
        }
        sequences.push(LabeledSequence {
            user_id,
            session_id,
            topic_id,
            labels,
            starts,
        });
    }
    Ok(sequences)
}

/// Applies the enabled boundary rules, in order: gap splitting, then the
/// mixed-activity rule, then the exercise-ending rule.
///
/// `records` must be the same corpus the sequences were built from; the gap
/// rule needs activity durations, which sequences do not carry.
/// With every flag off this returns the input unchanged.
pub fn filter_sequences(
    seqs: &[LabeledSequence],
    records: &[EventRecord],
    cfg: &BoundaryConfig,
) -> Vec<LabeledSequence> {
    let mut current: Vec<LabeledSequence> = seqs.to_vec();

    if cfg.require_gap_below_median {
        current = split_at_long_gaps(&current, records);
    }
    if cfg.require_mixed_activity {
        current.retain(|seq| {
            let exercises = seq.labels.iter().filter(|l| l.is_exercise()).count();
            exercises > 0 && exercises < seq.labels.len()
        });
    }
    if cfg.require_exercise_ending {
        current.retain(|seq| seq.labels.last().is_some_and(|l| l.is_exercise()));
    }
    current
}

/// Splits sequences wherever the idle gap between consecutive activities,
/// `next.start - (prev.start + prev.duration)`, reaches the median of all
/// such gaps in the corpus.
fn split_at_long_gaps(
    seqs: &[LabeledSequence],
    records: &[EventRecord],
) -> Vec<LabeledSequence> {
    let groups = grouped_records(records);

    // Idle gaps per sequence, keyed like the sequences themselves.
    let mut gaps_by_key: BTreeMap<GroupKey, Vec<i64>> = BTreeMap::new();
    let mut all_gaps: Vec<i64> = Vec::new();
    for (key, group) in &groups {
        let gaps: Vec<i64> = group
            .windows(2)
            .map(|w| w[1].start - (w[0].start + w[0].duration))
            .collect();
        all_gaps.extend(&gaps);
        gaps_by_key.insert(key.clone(), gaps);
    }
    if all_gaps.is_empty() {
        return seqs.to_vec();
    }
    all_gaps.sort_unstable();
    let threshold = median_of_sorted(&all_gaps);

    let mut out = Vec::new();
    for seq in seqs {
        let key = (
            seq.user_id.clone(),
            seq.session_id.clone(),
            seq.topic_id.clone(),
        );
        let gaps = match gaps_by_key.get(&key) {
            // The precondition ties each sequence to one record group; a
            // sequence with no matching group passes through unsplit.
            Some(gaps) if gaps.len() + 1 == seq.labels.len() => gaps,
            _ => {
                out.push(seq.clone());
                continue;
            }
        };
        let mut fragment_start = 0usize;
        for (i, gap) in gaps.iter().enumerate() {
            if *gap as f64 >= threshold {
                out.push(fragment_of(seq, fragment_start, i + 1));
                fragment_start = i + 1;
            }
        }
        out.push(fragment_of(seq, fragment_start, seq.labels.len()));
    }
    out
}

fn fragment_of(seq: &LabeledSequence, from: usize, to: usize) -> LabeledSequence {
    LabeledSequence {
        user_id: seq.user_id.clone(),
        session_id: seq.session_id.clone(),
        topic_id: seq.topic_id.clone(),
        labels: seq.labels[from..to].to_vec(),
        starts: if seq.starts.len() == seq.labels.len() {
            seq.starts[from..to].to_vec()
        } else {
            Vec::new()
        },
    }
}

pub const SEQUENCES_HEADER: [&str; 4] = ["user_id", "session_id", "topic_id", "labels"];

/// Writes sequences as CSV: `user_id,session_id,topic_id,labels`, labels
/// space-separated in canonical rendering.
pub fn write_sequences_csv<W: Write>(
    seqs: &[LabeledSequence],
    out: W,
) -> Result<(), std::io::Error> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(SEQUENCES_HEADER)?;
    for seq in seqs {
        writer.write_record([
            seq.user_id.as_str(),
            seq.session_id.as_str(),
            seq.topic_id.as_str(),
            &format_labels(&seq.labels),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads sequences back from CSV. Timing information is not part of the
/// format, so `starts` comes back empty.
pub fn read_sequences_csv<R: Read>(source: R) -> Result<Vec<LabeledSequence>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(source);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(str::to_string)
        .collect();
    if headers != SEQUENCES_HEADER {
        return Err(format!(
            "bad sequences header: expected `{}`, found `{}`",
            SEQUENCES_HEADER.join(","),
            headers.join(",")
        ));
    }
    let mut seqs = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let row = row.map_err(|e| format!("row {}: {e}", idx + 1))?;
        if row.len() != 4 {
            return Err(format!("row {}: expected 4 fields", idx + 1));
        }
        let labels = parse_labels(&row[3]).map_err(|e| format!("row {}: {e}", idx + 1))?;
        if labels.is_empty() {
            return Err(format!("row {}: empty label list", idx + 1));
        }
        seqs.push(LabeledSequence {
            user_id: row[0].to_string(),
            session_id: row[1].to_string(),
            topic_id: row[2].to_string(),
            labels,
            starts: Vec::new(),
        });
    }
    Ok(seqs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(
        user: &str,
        session: &str,
        topic: &str,
        kind: ActivityKind,
        start: i64,
        duration: i64,
        outcome: Option<ExerciseOutcome>,
    ) -> EventRecord {
        EventRecord {
            user_id: user.into(),
            session_id: session.into(),
            topic_id: topic.into(),
            kind,
            start,
            duration,
            outcome,
        }
    }

    fn basic(start: i64, duration: i64) -> EventRecord {
        rec("u1", "s1", "t1", ActivityKind::BasicExample, start, duration, None)
    }

    #[test]
    fn median_odd_even_singleton() {
        let records: Vec<EventRecord> = [2, 4, 6]
            .iter()
            .map(|&d| basic(d, d))
            .chain(std::iter::once(rec(
                "u1",
                "s1",
                "t1",
                ActivityKind::AnimatedExample,
                0,
                5,
                None,
            )))
            .collect();
        let medians = compute_medians(&records);
        assert_eq!(medians.get(ActivityKind::BasicExample), Some(4.0));
        assert_eq!(medians.get(ActivityKind::AnimatedExample), Some(5.0));
        assert_eq!(medians.get(ActivityKind::ParameterizedExercise), None);

        let even = compute_medians(&[basic(0, 2), basic(1, 4)]);
        assert_eq!(even.get(ActivityKind::BasicExample), Some(3.0));
    }

    #[test]
    fn missing_median_names_the_kind() {
        let medians = compute_medians(&[basic(0, 10)]);
        let err = medians.require(ActivityKind::ParameterizedExercise).unwrap_err();
        assert_eq!(
            err,
            SequenceError::MissingMedian(ActivityKind::ParameterizedExercise)
        );
        assert!(err.to_string().contains("parameterized_exercise"));
    }

    #[test]
    fn labeling_examples() {
        let medians = MedianTable::from_entries([
            (ActivityKind::AnimatedExample, 90.0),
            (ActivityKind::BasicExample, 90.0),
            (ActivityKind::ParameterizedExercise, 45.0),
        ]);
        let animated = rec("u", "s", "t", ActivityKind::AnimatedExample, 0, 120, None);
        assert_eq!(label_activity(&animated, &medians).unwrap(), Label::AnimatedOver);

        // Equality falls in the under bucket.
        let tie = rec("u", "s", "t", ActivityKind::BasicExample, 0, 90, None);
        assert_eq!(label_activity(&tie, &medians).unwrap(), Label::BasicUnder);

        let quick_fail = rec(
            "u",
            "s",
            "t",
            ActivityKind::ParameterizedExercise,
            0,
            30,
            Some(ExerciseOutcome::Fail),
        );
        assert_eq!(label_activity(&quick_fail, &medians).unwrap(), Label::FailUnder);
    }

    #[test]
    fn label_rendering_round_trips() {
        for label in Label::ALL {
            assert_eq!(label.as_str().parse::<Label>().unwrap(), label);
        }
        assert_eq!(parse_labels("AnEx ex f P p").unwrap().len(), 5);
        assert!(parse_labels("EX").is_err());
    }

    #[test]
    fn topic_shift_in_one_session_yields_one_sequence_per_topic() {
        let medians = MedianTable::from_entries([(ActivityKind::BasicExample, 5.0)]);
        let records = vec![
            rec("u1", "s1", "t1", ActivityKind::BasicExample, 1, 1, None),
            rec("u1", "s1", "t2", ActivityKind::BasicExample, 2, 1, None),
            rec("u1", "s1", "t1", ActivityKind::BasicExample, 3, 1, None),
        ];
        let seqs = build_sequences(&records, &medians).unwrap();
        assert_eq!(seqs.len(), 2);
        assert_eq!(seqs[0].topic_id, "t1");
        assert_eq!(seqs[0].starts, vec![1, 3]);
        assert_eq!(seqs[1].topic_id, "t2");
        assert_eq!(seqs[1].starts, vec![2]);
    }

    #[test]
    fn episode_renders_expected_label_string() {
        let medians = MedianTable::from_entries([
            (ActivityKind::AnimatedExample, 100.0),
            (ActivityKind::BasicExample, 50.0),
            (ActivityKind::ParameterizedExercise, 40.0),
        ]);
        let records = vec![
            rec("u1", "s1", "t1", ActivityKind::AnimatedExample, 10, 150, None),
            rec("u1", "s1", "t1", ActivityKind::BasicExample, 20, 80, None),
            rec(
                "u1", "s1", "t1",
                ActivityKind::ParameterizedExercise,
                30, 10,
                Some(ExerciseOutcome::Fail),
            ),
            rec(
                "u1", "s1", "t1",
                ActivityKind::ParameterizedExercise,
                40, 90,
                Some(ExerciseOutcome::Pass),
            ),
            rec(
                "u1", "s1", "t1",
                ActivityKind::ParameterizedExercise,
                50, 20,
                Some(ExerciseOutcome::Pass),
            ),
        ];
        let seqs = build_sequences(&records, &medians).unwrap();
        assert_eq!(seqs.len(), 1);
        assert_eq!(format_labels(&seqs[0].labels), "AnEx ex f P p");
    }

    #[test]
    fn empty_input_yields_no_sequences() {
        let medians = MedianTable::from_entries([]);
        assert!(build_sequences(&[], &medians).unwrap().is_empty());
    }

    fn seq_of(labels: &str) -> LabeledSequence {
        LabeledSequence {
            user_id: "u1".into(),
            session_id: "s1".into(),
            topic_id: "t1".into(),
            labels: parse_labels(labels).unwrap(),
            starts: Vec::new(),
        }
    }

    #[test]
    fn all_flags_off_is_identity() {
        let seqs = vec![seq_of("AnEx ex"), seq_of("p P f")];
        let out = filter_sequences(&seqs, &[], &BoundaryConfig::default());
        assert_eq!(out, seqs);
    }

    #[test]
    fn exercise_ending_rule() {
        let cfg = BoundaryConfig {
            require_exercise_ending: true,
            ..Default::default()
        };
        let out = filter_sequences(&[seq_of("AnEx ex"), seq_of("AnEx ex p")], &[], &cfg);
        assert_eq!(out.len(), 1);
        assert_eq!(format_labels(&out[0].labels), "AnEx ex p");
    }

    #[test]
    fn mixed_activity_rule() {
        let cfg = BoundaryConfig {
            require_mixed_activity: true,
            ..Default::default()
        };
        let out = filter_sequences(
            &[seq_of("p P f"), seq_of("AnEx ex"), seq_of("ex p")],
            &[],
            &cfg,
        );
        assert_eq!(out.len(), 1);
        assert_eq!(format_labels(&out[0].labels), "ex p");
    }

    #[test]
    fn gap_rule_splits_at_median_gap() {
        // One episode with gaps [10, 70]; the median gap is 40, so the split
        // happens at the 70-second gap only.
        let medians = MedianTable::from_entries([(ActivityKind::BasicExample, 10.0)]);
        let records = vec![basic(0, 10), basic(20, 10), basic(100, 10)];
        let seqs = build_sequences(&records, &medians).unwrap();
        assert_eq!(seqs.len(), 1);

        let cfg = BoundaryConfig {
            require_gap_below_median: true,
            ..Default::default()
        };
        let out = filter_sequences(&seqs, &records, &cfg);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].starts, vec![0, 20]);
        assert_eq!(out[1].starts, vec![100]);
    }

    #[test]
    fn sequences_csv_round_trip() {
        let seqs = vec![seq_of("AnEx ex f P p"), seq_of("Ex")];
        let mut buf = Vec::new();
        write_sequences_csv(&seqs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("u1,s1,t1,AnEx ex f P p"));
        let loaded = read_sequences_csv(buf.as_slice()).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].labels, seqs[0].labels);
        assert!(loaded[0].starts.is_empty());
    }

    prop_compose! {
        fn arb_corpus()(
            rows in proptest::collection::vec(
                (
                    0usize..3, // user
                    0usize..3, // session
                    0usize..3, // topic
                    0usize..3, // kind
                    0i64..10_000,
                    0i64..500,
                    any::<bool>(),
                ),
                1..60,
            )
        ) -> Vec<EventRecord> {
            rows.into_iter()
                .map(|(u, s, t, k, start, duration, pass)| {
                    let kind = ActivityKind::ALL[k];
                    let outcome = (kind == ActivityKind::ParameterizedExercise)
                        .then_some(if pass { ExerciseOutcome::Pass } else { ExerciseOutcome::Fail });
                    rec(
                        &format!("u{u}"),
                        &format!("s{s}"),
                        &format!("t{t}"),
                        kind,
                        start,
                        duration,
                        outcome,
                    )
                })
                .collect()
        }
    }

    proptest! {
        // Every record appears exactly once across the output: the multiset
        // of (group key, label) pairs matches the input records.
        #[test]
        fn segmentation_preserves_records(records in arb_corpus()) {
            let medians = compute_medians(&records);
            let seqs = build_sequences(&records, &medians).unwrap();

            let mut from_seqs: Vec<(String, String, String, Label)> = seqs
                .iter()
                .flat_map(|s| {
                    s.labels.iter().map(move |l| {
                        (s.user_id.clone(), s.session_id.clone(), s.topic_id.clone(), *l)
                    })
                })
                .collect();
            let mut from_records: Vec<(String, String, String, Label)> = records
                .iter()
                .map(|r| {
                    (
                        r.user_id.clone(),
                        r.session_id.clone(),
                        r.topic_id.clone(),
                        label_activity(r, &medians).unwrap(),
                    )
                })
                .collect();
            from_seqs.sort();
            from_records.sort();
            prop_assert_eq!(from_seqs, from_records);

            prop_assert!(seqs.iter().all(|s| !s.labels.is_empty()));
            prop_assert!(seqs
                .iter()
                .all(|s| s.starts.windows(2).all(|w| w[0] <= w[1])));
        }

        #[test]
        fn default_filter_is_identity(records in arb_corpus()) {
            let medians = compute_medians(&records);
            let seqs = build_sequences(&records, &medians).unwrap();
            let out = filter_sequences(&seqs, &records, &BoundaryConfig::default());
            prop_assert_eq!(out, seqs);
        }

        // Gap splitting never loses or reorders labels, only cuts sequences.
        #[test]
        fn gap_splitting_preserves_label_stream(records in arb_corpus()) {
            let medians = compute_medians(&records);
            let seqs = build_sequences(&records, &medians).unwrap();
            let cfg = BoundaryConfig { require_gap_below_median: true, ..Default::default() };
            let out = filter_sequences(&seqs, &records, &cfg);

            let joined: Vec<Label> = out.iter().flat_map(|s| s.labels.clone()).collect();
            let original: Vec<Label> = seqs.iter().flat_map(|s| s.labels.clone()).collect();
            prop_assert_eq!(joined, original);
            prop_assert!(out.len() >= seqs.len());
        }
    }
}
