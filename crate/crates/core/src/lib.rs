//! Batch analysis of learning-activity event logs.
//!
//! The pipeline turns raw activity events into labeled behavioral sequences,
//! mines frequent sequential patterns from them (SPAM-style vertical bitmaps
//! with support, gap, and length constraints), and runs two analyses on the
//! mined pattern vocabulary:
//!
//! * a split-half stability experiment that decides whether users are
//!   statistically identifiable from their pattern-frequency profiles
//!   (Jensen-Shannon divergence and cosine distance, paired t-test), and
//! * agglomerative Ward clustering of users with per-cluster pattern
//!   frequency reports.
//!
//! Stages are pure functions over immutable inputs; every source of
//! randomness is an explicit seed, so any run is reproducible bit for bit.
//!
//! The stage order is [`ingest`] -> [`sequencer`] -> [`spam`] -> [`profiles`]
//! -> [`stats`] / [`cluster`], with [`synth`] generating seeded test cohorts
//! that exercise the whole chain.

pub mod cluster;
pub mod ingest;
pub mod profiles;
pub mod sequencer;
pub mod spam;
pub mod stats;
pub mod synth;

mod util;

pub use cluster::{ClusterReport, Dendrogram, Merge};
pub use ingest::{ActivityKind, DatasetStats, EventRecord, ExerciseOutcome};
pub use profiles::{PatternProfile, PatternVocabulary};
pub use sequencer::{BoundaryConfig, Label, LabeledSequence, MedianTable};
pub use spam::{Limit, MiningParams, Pattern, SequenceDatabase};
pub use stats::{Measure, StabilityParams, StabilityReport};
pub use synth::{BehaviorProfile, CohortSpec};
