//! Distance measures, the paired t-test, and the split-half identifiability
//! experiment.
//!
//! The experiment splits each user's sequences into random halves, builds a
//! pattern profile per half, and compares each user's self-distance (between
//! their own halves) with their mean distance to other users' second halves.
//! If behavior is user-specific, self-distances sit well below
//! distances-to-other and the paired t statistic is strongly negative.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profiles::{build_profile, PatternVocabulary, ProfileError};
use crate::sequencer::LabeledSequence;
use crate::spam::Limit;
use crate::util::derive_seed;

mod tdist;

pub use tdist::{ln_gamma, reg_inc_beta, student_t_two_sided_p};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("vector lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("cosine distance is undefined for a zero vector")]
    ZeroVector,
    #[error("need at least 2 paired samples, got {0}")]
    TooFewSamples(usize),
    #[error("need at least 2 sequences to split, got {0}")]
    TooFewSequences(usize),
    #[error("need at least 2 users with 2+ sequences, found {eligible}")]
    NotEnoughUsers { eligible: usize },
    #[error("invalid distribution: {0}")]
    BadDistribution(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// A validated probability vector: non-empty, strictly positive entries,
/// summing to 1 within 1e-9. Smoothed pattern profiles always qualify.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    pub fn new(values: Vec<f64>) -> Result<Self, StatsError> {
        if values.is_empty() {
            return Err(StatsError::BadDistribution("empty vector".into()));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(StatsError::BadDistribution(format!(
                "entries must be finite and positive, found {bad}"
            )));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(StatsError::BadDistribution(format!(
                "entries sum to {sum}, expected 1"
            )));
        }
        Ok(Distribution(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Logarithm base for entropy-derived quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogBase {
    Two,
    Natural,
}

impl LogBase {
    fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Two => x.log2(),
            LogBase::Natural => x.ln(),
        }
    }
}

fn entropy_with_base(p: &[f64], base: LogBase) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * base.log(x))
        .sum::<f64>()
}

/// Shannon entropy in bits. Zero entries contribute zero.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    entropy_with_base(p, LogBase::Two)
}

/// Jensen-Shannon divergence `H(M) - (H(P) + H(Q)) / 2` with `M` the even
/// mixture of the two distributions.
pub fn js_divergence_with_base(p: &[f64], q: &[f64], base: LogBase) -> Result<f64, StatsError> {
    if p.len() != q.len() {
        return Err(StatsError::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let mixture: Vec<f64> = p.iter().zip(q).map(|(a, b)| (a + b) / 2.0).collect();
    let jsd = entropy_with_base(&mixture, base)
        - (entropy_with_base(p, base) + entropy_with_base(q, base)) / 2.0;
    // Rounding can push an exact zero a hair negative.
    Ok(jsd.max(0.0))
}

/// Base-2 Jensen-Shannon divergence, bounded by 1.
pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64, StatsError> {
    js_divergence_with_base(p, q, LogBase::Two)
}

/// Cosine distance `1 - P.Q / (|P| |Q|)`; in [0, 1] for non-negative vectors.
pub fn cosine_distance(p: &[f64], q: &[f64]) -> Result<f64, StatsError> {
    if p.len() != q.len() {
        return Err(StatsError::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let dot: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
    let norm_p: f64 = p.iter().map(|a| a * a).sum::<f64>().sqrt();
    let norm_q: f64 = q.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm_p == 0.0 || norm_q == 0.0 {
        return Err(StatsError::ZeroVector);
    }
    Ok((1.0 - dot / (norm_p * norm_q)).max(0.0))
}

/// Result of a paired t-test: the statistic, degrees of freedom, and the
/// two-sided p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: usize,
    pub p: f64,
}

/// Paired samples t-test on `xs - ys`, with the sample (n-1) standard
/// deviation. `mean(xs) < mean(ys)` yields a negative statistic.
///
/// Degenerate differences are handled explicitly: all-zero differences give
/// `t = 0, p = 1`; zero spread around a nonzero mean gives an infinite
/// statistic with `p = 0`.
pub fn paired_t_test(xs: &[f64], ys: &[f64]) -> Result<TTest, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    let n = xs.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples(n));
    }
    let diffs: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let sd = var.sqrt();
    let df = n - 1;

    if sd == 0.0 {
        return Ok(if mean == 0.0 {
            TTest { t: 0.0, df, p: 1.0 }
        } else {
            TTest {
                t: if mean > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY },
                df,
                p: 0.0,
            }
        });
    }
    let t = mean / (sd / (n as f64).sqrt());
    let p = student_t_two_sided_p(t, df as f64);
    Ok(TTest { t, df, p })
}

/// Splits items into two halves after a seeded uniform shuffle; the first
/// half gets `ceil(n / 2)` items. Deterministic given the seed.
pub fn split_halves<T: Clone>(items: &[T], seed: u64) -> Result<(Vec<T>, Vec<T>), StatsError> {
    let n = items.len();
    if n < 2 {
        return Err(StatsError::TooFewSequences(n));
    }
    let mut shuffled: Vec<T> = items.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let second = shuffled.split_off(n.div_ceil(2));
    Ok((shuffled, second))
}

/// The distance measures the experiment reports on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    JsDivergence,
    CosineDistance,
}

impl Measure {
    pub const ALL: [Measure; 2] = [Measure::JsDivergence, Measure::CosineDistance];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::JsDivergence => "js_divergence",
            Measure::CosineDistance => "cosine_distance",
        }
    }

    pub fn distance(self, p: &[f64], q: &[f64]) -> Result<f64, StatsError> {
        match self {
            Measure::JsDivergence => js_divergence(p, q),
            Measure::CosineDistance => cosine_distance(p, q),
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "js_divergence" | "js" => Ok(Measure::JsDivergence),
            "cosine_distance" | "cosine" => Ok(Measure::CosineDistance),
            other => Err(format!("unknown measure `{other}`")),
        }
    }
}

/// Knobs of the stability experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityParams {
    pub maxgap: Limit,
    pub epsilon: f64,
    pub seed: u64,
    pub measures: Vec<Measure>,
}

impl Default for StabilityParams {
    fn default() -> Self {
        StabilityParams {
            maxgap: Limit::Finite(1),
            epsilon: 0.0001,
            seed: 0,
            measures: Measure::ALL.to_vec(),
        }
    }
}

/// Distances for one user under one measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserDistances {
    pub user_id: String,
    pub self_distance: f64,
    pub distance_to_other: f64,
}

/// The experiment's outcome for one measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureReport {
    pub measure: Measure,
    pub mean_self_distance: f64,
    pub mean_distance_to_other: f64,
    pub t: f64,
    pub df: usize,
    pub p: f64,
    pub per_user: Vec<UserDistances>,
}

/// Full stability report: one block per measure plus the users that had to
/// be excluded for having fewer than two sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub measures: Vec<MeasureReport>,
    pub excluded_users: Vec<String>,
}

fn half_counts(
    half: &[&LabeledSequence],
    vocab: &PatternVocabulary,
    maxgap: Limit,
) -> Vec<u64> {
    let mut counts = vec![0u64; vocab.len()];
    for seq in half {
        for (v, pattern) in vocab.iter().enumerate() {
            counts[v] = counts[v]
                .saturating_add(crate::profiles::count_embeddings(&seq.labels, pattern, maxgap));
        }
    }
    counts
}

/// Runs the split-half stability experiment.
///
/// For each user with at least two sequences, the sequences are shuffled with
/// a per-user stream derived from the run seed and split into halves A and B.
/// Each half becomes a smoothed profile over `vocab`. The self-distance is
/// d(A_i, B_i); the distance-to-other is the mean of d(A_i, B_j) over all
/// other users j. A paired t-test then compares the two distance populations
/// per measure.
pub fn stability_experiment(
    seqs: &[LabeledSequence],
    vocab: &PatternVocabulary,
    params: &StabilityParams,
) -> Result<StabilityReport, StatsError> {
    if vocab.is_empty() {
        return Err(StatsError::Profile(ProfileError::EmptyVocabulary));
    }
    let mut by_user: BTreeMap<&str, Vec<&LabeledSequence>> = BTreeMap::new();
    for seq in seqs {
        by_user.entry(&seq.user_id).or_default().push(seq);
    }

    let mut excluded_users = Vec::new();
    let mut users: Vec<&str> = Vec::new();
    let mut profiles_a: Vec<Vec<f64>> = Vec::new();
    let mut profiles_b: Vec<Vec<f64>> = Vec::new();
    for (user, user_seqs) in &by_user {
        if user_seqs.len() < 2 {
            excluded_users.push((*user).to_string());
            continue;
        }
        let (half_a, half_b) = split_halves(user_seqs, derive_seed(params.seed, user))?;
        let counts_a = half_counts(&half_a, vocab, params.maxgap);
        let counts_b = half_counts(&half_b, vocab, params.maxgap);
        profiles_a.push(build_profile(&counts_a, params.epsilon)?);
        profiles_b.push(build_profile(&counts_b, params.epsilon)?);
        users.push(user);
    }

    let n = users.len();
    if n < 2 {
        return Err(StatsError::NotEnoughUsers { eligible: n });
    }

    let mut measures = Vec::with_capacity(params.measures.len());
    for &measure in &params.measures {
        let mut self_distances = Vec::with_capacity(n);
        let mut other_distances = Vec::with_capacity(n);
        for i in 0..n {
            self_distances.push(measure.distance(&profiles_a[i], &profiles_b[i])?);
            let mut sum = 0.0;
            for (j, profile_b) in profiles_b.iter().enumerate() {
                if j != i {
                    sum += measure.distance(&profiles_a[i], profile_b)?;
                }
            }
            other_distances.push(sum / (n as f64 - 1.0));
        }
        let test = paired_t_test(&self_distances, &other_distances)?;
        let per_user = users
            .iter()
            .zip(self_distances.iter().zip(&other_distances))
            .map(|(user, (s, o))| UserDistances {
                user_id: (*user).to_string(),
                self_distance: *s,
                distance_to_other: *o,
            })
            .collect();
        measures.push(MeasureReport {
            measure,
            mean_self_distance: self_distances.iter().sum::<f64>() / n as f64,
            mean_distance_to_other: other_distances.iter().sum::<f64>() / n as f64,
            t: test.t,
            df: test.df,
            p: test.p,
            per_user,
        });
    }

    Ok(StabilityReport {
        measures,
        excluded_users,
    })
}

pub const STABILITY_HEADER: [&str; 4] =
    ["measure", "user_id", "self_distance", "distance_to_other"];

/// Writes the per-user distance rows as CSV, one block per measure.
pub fn write_stability_csv<W: Write>(
    report: &StabilityReport,
    out: W,
) -> Result<(), std::io::Error> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(STABILITY_HEADER)?;
    for measure in &report.measures {
        for row in &measure.per_user {
            writer.write_record([
                measure.measure.as_str(),
                &row.user_id,
                &format!("{:.6}", row.self_distance),
                &format!("{:.6}", row.distance_to_other),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct MeasureSummary {
    measure: Measure,
    self_distance: f64,
    distance_to_other: f64,
    t: f64,
    df: usize,
    p: f64,
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    measures: Vec<MeasureSummary>,
    excluded_users: &'a [String],
}

/// Renders the summary JSON: per measure, the mean self-distance, mean
/// distance-to-other, t statistic, degrees of freedom, and p-value.
pub fn stability_summary_json(report: &StabilityReport) -> String {
    let summary = SummaryJson {
        measures: report
            .measures
            .iter()
            .map(|m| MeasureSummary {
                measure: m.measure,
                self_distance: m.mean_self_distance,
                distance_to_other: m.mean_distance_to_other,
                t: m.t,
                df: m.df,
                p: m.p,
            })
            .collect(),
        excluded_users: &report.excluded_users,
    };
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serialize");
    text.push('\n');
    text
}
