//! Parsing, validation, and summary statistics for raw activity event logs.
//!
//! The interchange format is CSV with the fixed header
//! `user_id,session_id,topic_id,kind,start,duration,outcome`. Timestamps and
//! durations are integer seconds; fractional input is truncated on parse.
//! Duplicate rows are kept, since a log may legitimately repeat an activity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Header required on every event-log CSV file.
pub const EVENT_LOG_HEADER: [&str; 7] = [
    "user_id",
    "session_id",
    "topic_id",
    "kind",
    "start",
    "duration",
    "outcome",
];

/// The three activity types a learner can perform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActivityKind {
    AnimatedExample,
    BasicExample,
    ParameterizedExercise,
}

impl ActivityKind {
    pub const ALL: [ActivityKind; 3] = [
        ActivityKind::AnimatedExample,
        ActivityKind::BasicExample,
        ActivityKind::ParameterizedExercise,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActivityKind::AnimatedExample => "animated_example",
            ActivityKind::BasicExample => "basic_example",
            ActivityKind::ParameterizedExercise => "parameterized_exercise",
        }
    }
}

impl fmt::Display for ActivityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActivityKind {
    type Err = String;

    /// Case-insensitive parse of the canonical kind names.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "animated_example" => Ok(ActivityKind::AnimatedExample),
            "basic_example" => Ok(ActivityKind::BasicExample),
            "parameterized_exercise" => Ok(ActivityKind::ParameterizedExercise),
            other => Err(format!("unknown activity kind `{other}`")),
        }
    }
}

/// Graded result of a parameterized exercise.
///
/// Only exercises carry an outcome; examples have none. That invariant is
/// encoded as `Option<ExerciseOutcome>` on [`EventRecord`] and enforced by
/// [`EventRecord::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExerciseOutcome {
    Pass,
    Fail,
}

impl ExerciseOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            ExerciseOutcome::Pass => "pass",
            ExerciseOutcome::Fail => "fail",
        }
    }
}

impl fmt::Display for ExerciseOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One logged activity event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub user_id: String,
    pub session_id: String,
    pub topic_id: String,
    pub kind: ActivityKind,
    /// Start time, seconds since the Unix epoch (UTC).
    pub start: i64,
    /// Time spent on the activity, whole seconds.
    pub duration: i64,
    /// Pass/fail for parameterized exercises, `None` for examples.
    pub outcome: Option<ExerciseOutcome>,
}

impl EventRecord {
    /// Checks the record invariants: non-negative duration, and an outcome
    /// present exactly when the activity is a parameterized exercise.
    pub fn validate(&self) -> Result<(), String> {
        if self.duration < 0 {
            return Err(format!("negative duration {}", self.duration));
        }
        match (self.kind, self.outcome) {
            (ActivityKind::ParameterizedExercise, None) => {
                Err("parameterized_exercise row is missing its pass/fail outcome".to_string())
            }
            (ActivityKind::ParameterizedExercise, Some(_)) => Ok(()),
            (_, Some(outcome)) => Err(format!(
                "outcome `{outcome}` given for non-exercise kind `{}`",
                self.kind
            )),
            (_, None) => Ok(()),
        }
    }
}

/// Corpus-level counts reported by `ingest`.
///
/// Serialized as a JSON object with exactly these keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_students: usize,
    pub n_topics: usize,
    pub max_sessions_per_student: usize,
    pub n_records: usize,
}

/// Errors raised while reading an event-log CSV stream.
///
/// Row numbers count data rows from 1 (the header row is row 0).
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("event log is missing the header row")]
    MissingHeader,
    #[error("bad header: expected `{expected}`, found `{found}`")]
    BadHeader { expected: String, found: String },
    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("row {row}: invalid record: {reason}")]
    InvalidRecord { row: usize, reason: String },
    #[error("I/O error reading event log: {0}")]
    Io(#[from] std::io::Error),
}

/// Parses an event-log CSV stream into validated records, in file order.
pub fn parse_event_log<R: Read>(source: R) -> Result<Vec<EventRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    {
        let headers = reader.headers().map_err(|e| IngestError::MalformedRow {
            row: 0,
            reason: e.to_string(),
        })?;
        if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
            return Err(IngestError::MissingHeader);
        }
        let found: Vec<&str> = headers.iter().collect();
        if found != EVENT_LOG_HEADER {
            return Err(IngestError::BadHeader {
                expected: EVENT_LOG_HEADER.join(","),
                found: found.join(","),
            });
        }
    }

    let mut records = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let row_no = idx + 1;
        let malformed = |reason: String| IngestError::MalformedRow {
            row: row_no,
            reason,
        };
        let record = row.map_err(|e| malformed(e.to_string()))?;
        if record.len() != EVENT_LOG_HEADER.len() {
            return Err(malformed(format!(
                "expected {} fields, found {}",
                EVENT_LOG_HEADER.len(),
                record.len()
            )));
        }

        let kind = ActivityKind::from_str(&record[3]).map_err(malformed)?;
        let start = parse_seconds(&record[4]).map_err(|e| malformed(format!("start: {e}")))?;
        let duration =
            parse_seconds(&record[5]).map_err(|e| malformed(format!("duration: {e}")))?;
        let outcome = match &record[6] {
            "" => None,
            text => match text.to_ascii_lowercase().as_str() {
                "pass" => Some(ExerciseOutcome::Pass),
                "fail" => Some(ExerciseOutcome::Fail),
                other => return Err(malformed(format!("unknown outcome `{other}`"))),
            },
        };

        let event = EventRecord {
            user_id: record[0].to_string(),
            session_id: record[1].to_string(),
            topic_id: record[2].to_string(),
            kind,
            start,
            duration,
            outcome,
        };
        event.validate().map_err(|reason| IngestError::InvalidRecord {
            row: row_no,
            reason,
        })?;
        records.push(event);
    }
    Ok(records)
}

/// Integer seconds; fractional input is truncated toward zero, but a sign is
/// judged before truncation so `-0.5` still rejects as negative downstream.
fn parse_seconds(text: &str) -> Result<i64, String> {
    if text.is_empty() {
        return Err("empty field".to_string());
    }
    if let Ok(v) = text.parse::<i64>() {
        return Ok(v);
    }
    let v: f64 = text
        .parse()
        .map_err(|_| format!("`{text}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{text}` is not finite"));
    }
    if v < 0.0 {
        // Preserve the sign for values in (-1, 0) that would truncate to 0.
        return Ok(-1);
    }
    Ok(v.trunc() as i64)
}

/// Writes records back out in the canonical CSV format.
///
/// `parse_event_log(write_event_log(records))` reproduces `records` exactly.
pub fn write_event_log<W: Write>(records: &[EventRecord], out: W) -> Result<(), IngestError> {
    let mut writer = csv::Writer::from_writer(out);
    writer
        .write_record(EVENT_LOG_HEADER)
        .map_err(csv_io_error)?;
    for r in records {
        writer
            .write_record([
                r.user_id.as_str(),
                r.session_id.as_str(),
                r.topic_id.as_str(),
                r.kind.as_str(),
                &r.start.to_string(),
                &r.duration.to_string(),
                r.outcome.map_or("", ExerciseOutcome::as_str),
            ])
            .map_err(csv_io_error)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_io_error(e: csv::Error) -> IngestError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IngestError::Io(io),
        other => IngestError::MalformedRow {
            row: 0,
            reason: format!("{other:?}"),
        },
    }
}

/// Summarizes a record list: distinct users and topics, the maximum number of
/// distinct sessions any one user has, and the total row count.
pub fn dataset_stats(records: &[EventRecord]) -> DatasetStats {
    let mut users: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut topics: BTreeSet<&str> = BTreeSet::new();
    for r in records {
        users.entry(&r.user_id).or_default().insert(&r.session_id);
        topics.insert(&r.topic_id);
    }
    DatasetStats {
        n_students: users.len(),
        n_topics: topics.len(),
        max_sessions_per_student: users.values().map(BTreeSet::len).max().unwrap_or(0),
        n_records: records.len(),
    }
}

/// Renders stats as the pipeline's `stats.json` payload.
pub fn stats_to_json(stats: &DatasetStats) -> String {
    let mut text = serde_json::to_string_pretty(stats).expect("stats serialize");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse_str(text: &str) -> Result<Vec<EventRecord>, IngestError> {
        parse_event_log(text.as_bytes())
    }

    const HEADER: &str = "user_id,session_id,topic_id,kind,start,duration,outcome\n";

    #[test]
    fn parses_example_row_without_outcome() {
        let records = parse_str(&format!("{HEADER}u1,s1,t1,animated_example,1000,120,\n")).unwrap();
        assert_eq!(
            records,
            vec![EventRecord {
                user_id: "u1".into(),
                session_id: "s1".into(),
                topic_id: "t1".into(),
                kind: ActivityKind::AnimatedExample,
                start: 1000,
                duration: 120,
                outcome: None,
            }]
        );
    }

    #[test]
    fn parses_exercise_outcome() {
        let records =
            parse_str(&format!("{HEADER}u1,s1,t1,parameterized_exercise,1200,30,fail\n")).unwrap();
        assert_eq!(records[0].outcome, Some(ExerciseOutcome::Fail));
    }

    #[test]
    fn outcome_on_non_exercise_is_invalid() {
        let err = parse_str(&format!("{HEADER}u1,s1,t1,basic_example,1200,30,pass\n")).unwrap_err();
        match err {
            IngestError::InvalidRecord { row, ref reason } => {
                assert_eq!(row, 1);
                assert!(reason.contains("non-exercise"), "reason: {reason}");
            }
            other => panic!("expected InvalidRecord, got {other:?}"),
        }
    }

    #[test]
    fn exercise_without_outcome_is_invalid() {
        let err =
            parse_str(&format!("{HEADER}u1,s1,t1,parameterized_exercise,1200,30,\n")).unwrap_err();
        assert!(matches!(err, IngestError::InvalidRecord { row: 1, .. }));
    }

    #[test]
    fn negative_duration_is_invalid() {
        let err = parse_str(&format!("{HEADER}u1,s1,t1,basic_example,1200,-3,\n")).unwrap_err();
        assert!(matches!(err, IngestError::InvalidRecord { row: 1, .. }));
    }

    #[test]
    fn malformed_row_reports_row_number() {
        let input = format!("{HEADER}u1,s1,t1,animated_example,1000,120,\nu2,s1,t1,nonsense,5,5,\n");
        let err = parse_str(&input).unwrap_err();
        match err {
            IngestError::MalformedRow { row, ref reason } => {
                assert_eq!(row, 2);
                assert!(reason.contains("nonsense"));
            }
            other => panic!("expected MalformedRow, got {other:?}"),
        }
    }

    #[test]
    fn kind_parse_is_case_insensitive_and_subseconds_truncate() {
        let records =
            parse_str(&format!("{HEADER}u1,s1,t1,Animated_Example,1000.9,12.7,\n")).unwrap();
        assert_eq!(records[0].kind, ActivityKind::AnimatedExample);
        assert_eq!(records[0].start, 1000);
        assert_eq!(records[0].duration, 12);
    }

    #[test]
    fn wrong_header_is_rejected() {
        let err = parse_str("a,b,c\n1,2,3\n").unwrap_err();
        assert!(matches!(err, IngestError::BadHeader { .. }));
    }

    #[test]
    fn stats_on_empty_input_are_zero() {
        assert_eq!(
            dataset_stats(&[]),
            DatasetStats {
                n_students: 0,
                n_topics: 0,
                max_sessions_per_student: 0,
                n_records: 0
            }
        );
    }

    #[test]
    fn stats_count_distinct_users_topics_and_max_sessions() {
        let mut rows = String::from(HEADER);
        // user A has sessions {s1, s2}, user B has {s1}; one topic; 5 rows.
        for (u, s) in [("a", "s1"), ("a", "s1"), ("a", "s2"), ("b", "s1"), ("b", "s1")] {
            rows.push_str(&format!("{u},{s},t1,basic_example,0,10,\n"));
        }
        let records = parse_str(&rows).unwrap();
        assert_eq!(
            dataset_stats(&records),
            DatasetStats {
                n_students: 2,
                n_topics: 1,
                max_sessions_per_student: 2,
                n_records: 5
            }
        );
    }

    #[test]
    fn stats_json_uses_exact_keys() {
        let json = stats_to_json(&dataset_stats(&[]));
        for key in [
            "\"n_students\"",
            "\"n_topics\"",
            "\"max_sessions_per_student\"",
            "\"n_records\"",
        ] {
            assert!(json.contains(key), "missing {key} in {json}");
        }
    }

    prop_compose! {
        fn arb_record()(
            user in "u[0-9]{1,2}",
            session in "s[0-9]{1,2}",
            topic in "t[0-9]{1,2}",
            kind_idx in 0usize..3,
            start in 0i64..2_000_000_000,
            duration in 0i64..100_000,
            pass in any::<bool>(),
        ) -> EventRecord {
            let kind = ActivityKind::ALL[kind_idx];
            let outcome = match kind {
                ActivityKind::ParameterizedExercise => {
                    Some(if pass { ExerciseOutcome::Pass } else { ExerciseOutcome::Fail })
                }
                _ => None,
            };
            EventRecord {
                user_id: user,
                session_id: session,
                topic_id: topic,
                kind,
                start,
                duration,
                outcome,
            }
        }
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(records in proptest::collection::vec(arb_record(), 0..40)) {
            let mut buf = Vec::new();
            write_event_log(&records, &mut buf).unwrap();
            let reparsed = parse_event_log(buf.as_slice()).unwrap();
            prop_assert_eq!(reparsed, records);
        }

        #[test]
        fn stats_are_permutation_invariant(
            records in proptest::collection::vec(arb_record(), 0..40),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = records.clone();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            shuffled.shuffle(&mut rng);
            prop_assert_eq!(dataset_stats(&records), dataset_stats(&shuffled));
        }
    }
}
