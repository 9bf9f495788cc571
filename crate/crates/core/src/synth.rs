//! Seeded synthetic event-log cohorts with a controllable degree of per-user
//! behavioral distinctiveness.
//!
//! Each user walks a first-order Markov chain over activity kinds, with
//! log-normal durations and a per-user exercise pass rate, so the generated
//! logs exercise the full pipeline: median computation, labeling, and
//! segmentation all see realistic variation. `distinctness = 0` gives every
//! user the identical shared profile (a null cohort with nothing to
//! identify); `distinctness = 1` gives fully independent per-user profiles.
//!
//! Everything is derived from one seed; the same `(spec, seed)` pair always
//! produces byte-identical logs.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{ActivityKind, EventRecord, ExerciseOutcome};
use crate::util::derive_seed;

/// Markov-chain behavior model for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorProfile {
    /// Row-stochastic transition matrix over activity kinds, rows and
    /// columns in [`ActivityKind::ALL`] order.
    pub transitions: [[f64; 3]; 3],
    /// Distribution of the first activity kind in an episode.
    pub initial: [f64; 3],
    /// Per-kind log-normal duration median, seconds.
    pub duration_median: [f64; 3],
    /// Per-kind log-space dispersion.
    pub duration_sigma: [f64; 3],
    /// Probability that an exercise attempt passes.
    pub pass_probability: f64,
}

impl BehaviorProfile {
    /// The shared default profile used as the cohort base.
    pub fn base() -> Self {
        BehaviorProfile {
            transitions: [
                [0.30, 0.40, 0.30],
                [0.20, 0.30, 0.50],
                [0.15, 0.25, 0.60],
            ],
            initial: [0.40, 0.35, 0.25],
            duration_median: [90.0, 60.0, 45.0],
            duration_sigma: [0.6, 0.6, 0.7],
            pass_probability: 0.6,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let check_row = |row: &[f64; 3], what: &'static str| {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(SynthError::InvalidField {
                    field: what,
                    reason: format!("row {row:?} is not a probability distribution"),
                });
            }
            Ok(())
        };
        for row in &self.transitions {
            check_row(row, "transitions")?;
        }
        check_row(&self.initial, "initial")?;
        if self.duration_median.iter().any(|m| m.is_nan() || *m <= 0.0) {
            return Err(SynthError::InvalidField {
                field: "duration_median",
                reason: "medians must be positive".into(),
            });
        }
        if self.duration_sigma.iter().any(|s| s.is_nan() || *s <= 0.0) {
            return Err(SynthError::InvalidField {
                field: "duration_sigma",
                reason: "dispersions must be positive".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.pass_probability) {
            return Err(SynthError::InvalidField {
                field: "pass_probability",
                reason: format!("{} is outside [0, 1]", self.pass_probability),
            });
        }
        Ok(())
    }

    /// Samples a fully random profile.
    fn sample(rng: &mut ChaCha8Rng) -> Self {
        let row = |rng: &mut ChaCha8Rng| -> [f64; 3] {
            let raw = [(); 3].map(|_| 0.05 + rng.random::<f64>());
            let sum: f64 = raw.iter().sum();
            raw.map(|x| x / sum)
        };
        let transitions = [row(rng), row(rng), row(rng)];
        let initial = row(rng);
        let log_uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| -> f64 {
            (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
        };
        BehaviorProfile {
            transitions,
            initial,
            duration_median: [(); 3].map(|_| log_uniform(rng, 20.0, 300.0)),
            duration_sigma: [(); 3].map(|_| 0.3 + rng.random::<f64>() * 0.7),
            pass_probability: 0.2 + rng.random::<f64>() * 0.7,
        }
    }

    /// Linear interpolation between two profiles; probability rows are
    /// renormalized to absorb rounding.
    fn interpolate(base: &Self, other: &Self, weight: f64) -> Self {
        let lerp = |a: f64, b: f64| a + weight * (b - a);
        let lerp_row = |a: &[f64; 3], b: &[f64; 3]| -> [f64; 3] {
            let raw = [lerp(a[0], b[0]), lerp(a[1], b[1]), lerp(a[2], b[2])];
            let sum: f64 = raw.iter().sum();
            raw.map(|x| x / sum)
        };
        BehaviorProfile {
            transitions: [
                lerp_row(&base.transitions[0], &other.transitions[0]),
                lerp_row(&base.transitions[1], &other.transitions[1]),
                lerp_row(&base.transitions[2], &other.transitions[2]),
            ],
            initial: lerp_row(&base.initial, &other.initial),
            duration_median: [
                lerp(base.duration_median[0], other.duration_median[0]),
                lerp(base.duration_median[1], other.duration_median[1]),
                lerp(base.duration_median[2], other.duration_median[2]),
            ],
            duration_sigma: [
                lerp(base.duration_sigma[0], other.duration_sigma[0]),
                lerp(base.duration_sigma[1], other.duration_sigma[1]),
                lerp(base.duration_sigma[2], other.duration_sigma[2]),
            ],
            pass_probability: lerp(base.pass_probability, other.pass_probability),
        }
    }
}

/// Inclusive integer range used by the cohort spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub min: usize,
    pub max: usize,
}

impl Span {
    pub fn new(min: usize, max: usize) -> Self {
        Span { min, max }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        rng.random_range(self.min..=self.max)
    }
}

/// Shape of a synthetic cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub n_users: usize,
    /// Sessions per user.
    pub sessions: Span,
    /// Topics touched per session.
    pub topics_per_session: Span,
    /// Activities per (session, topic) episode.
    pub activities_per_episode: Span,
    /// Number of distinct topic ids the cohort can draw from.
    pub topic_pool: usize,
    /// 0 = every user shares `base`; 1 = fully independent user profiles.
    pub distinctness: f64,
    pub base: BehaviorProfile,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            n_users: 44,
            sessions: Span::new(3, 8),
            topics_per_session: Span::new(1, 4),
            activities_per_episode: Span::new(3, 10),
            topic_pool: 21,
            distinctness: 1.0,
            base: BehaviorProfile::base(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid cohort spec field `{field}`: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("unknown cohort config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for cohort config key `{key}`: {reason}")]
    BadValue { key: String, reason: String },
}

impl CohortSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_users == 0 {
            return Err(SynthError::InvalidField {
                field: "n_users",
                reason: "must be at least 1".into(),
            });
        }
        for (field, span) in [
            ("sessions", self.sessions),
            ("topics_per_session", self.topics_per_session),
            ("activities_per_episode", self.activities_per_episode),
        ] {
            if span.min == 0 || span.min > span.max {
                return Err(SynthError::InvalidField {
                    field,
                    reason: format!("range {}..={} is empty or starts at 0", span.min, span.max),
                });
            }
        }
        if self.topic_pool == 0 {
            return Err(SynthError::InvalidField {
                field: "topic_pool",
                reason: "must be at least 1".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.distinctness) {
            return Err(SynthError::InvalidField {
                field: "distinctness",
                reason: format!("{} is outside [0, 1]", self.distinctness),
            });
        }
        self.base.validate()
    }

    /// Parses the key-value cohort config format: one `key = value` per
    /// line, `#` comments. Unset keys keep their defaults.
    ///
    /// Keys: `n_users`, `sessions_min`, `sessions_max`, `topics_min`,
    /// `topics_max`, `activities_min`, `activities_max`, `topic_pool`,
    /// `distinctness`.
    pub fn from_key_value(text: &str) -> Result<Self, SynthError> {
        let mut spec = CohortSpec::default();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| SynthError::BadValue {
                    key: line.to_string(),
                    reason: "expected `key = value`".into(),
                })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |reason: &str| SynthError::BadValue {
                key: key.to_string(),
                reason: reason.to_string(),
            };
            let as_usize =
                |v: &str| v.parse::<usize>().map_err(|_| bad("expected an integer"));
            match key {
                "n_users" => spec.n_users = as_usize(value)?,
                "sessions_min" => spec.sessions.min = as_usize(value)?,
                "sessions_max" => spec.sessions.max = as_usize(value)?,
                "topics_min" => spec.topics_per_session.min = as_usize(value)?,
                "topics_max" => spec.topics_per_session.max = as_usize(value)?,
                "activities_min" => spec.activities_per_episode.min = as_usize(value)?,
                "activities_max" => spec.activities_per_episode.max = as_usize(value)?,
                "topic_pool" => spec.topic_pool = as_usize(value)?,
                "distinctness" => {
                    spec.distinctness =
                        value.parse::<f64>().map_err(|_| bad("expected a number"))?
                }
                other => return Err(SynthError::UnknownKey(other.to_string())),
            }
        }
        Ok(spec)
    }
}

/// The effective behavior profile of one user under a spec and seed.
pub fn user_profile(spec: &CohortSpec, seed: u64, user_index: usize) -> BehaviorProfile {
    if spec.distinctness == 0.0 {
        return spec.base.clone();
    }
    let mut rng =
        ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("profile/{user_index}")));
    let sampled = BehaviorProfile::sample(&mut rng);
    BehaviorProfile::interpolate(&spec.base, &sampled, spec.distinctness)
}

fn sample_category(rng: &mut ChaCha8Rng, weights: &[f64; 3]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    2
}

/// Box-Muller standard normal draw.
fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = 1.0 - rng.random::<f64>(); // (0, 1]
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Log-normal duration with the given median, at least one second.
fn sample_duration(rng: &mut ChaCha8Rng, median: f64, sigma: f64) -> i64 {
    let value = median * (sigma * std_normal(rng)).exp();
    (value.round() as i64).max(1)
}

struct Episode {
    topic: usize,
    events: VecDeque<(ActivityKind, i64, Option<ExerciseOutcome>)>,
}

/// Generates a cohort's event log. Records come out per user in
/// chronological order; start times are strictly monotone within a session.
pub fn generate_cohort(spec: &CohortSpec, seed: u64) -> Result<Vec<EventRecord>, SynthError> {
    spec.validate()?;
    let user_width = spec.n_users.to_string().len().max(2);
    let topic_width = spec.topic_pool.to_string().len().max(2);
    let mut records = Vec::new();

    for u in 0..spec.n_users {
        let profile = user_profile(spec, seed, u);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("events/{u}")));
        let user_id = format!("u{:0width$}", u + 1, width = user_width);
        let mut clock: i64 = 1_600_000_000;

        let n_sessions = spec.sessions.sample(&mut rng);
        for s in 0..n_sessions {
            let session_id = format!("s{:02}", s + 1);
            clock += rng.random_range(3_600..=259_200);

            let n_topics = spec.topics_per_session.sample(&mut rng).min(spec.topic_pool);
            let mut pool: Vec<usize> = (0..spec.topic_pool).collect();
            pool.shuffle(&mut rng);
            pool.truncate(n_topics);

            let mut episodes: Vec<Episode> = pool
                .into_iter()
                .map(|topic| {
                    let n_acts = spec.activities_per_episode.sample(&mut rng);
                    let mut events = VecDeque::with_capacity(n_acts);
                    let mut kind_idx = sample_category(&mut rng, &profile.initial);
                    for _ in 0..n_acts {
                        let kind = ActivityKind::ALL[kind_idx];
                        let duration = sample_duration(
                            &mut rng,
                            profile.duration_median[kind_idx],
                            profile.duration_sigma[kind_idx],
                        );
                        let outcome = (kind == ActivityKind::ParameterizedExercise).then(|| {
                            if rng.random::<f64>() < profile.pass_probability {
                                ExerciseOutcome::Pass
                            } else {
                                ExerciseOutcome::Fail
                            }
                        });
                        events.push_back((kind, duration, outcome));
                        kind_idx = sample_category(&mut rng, &profile.transitions[kind_idx]);
                    }
                    Episode { topic, events }
                })
                .collect();

            // Interleave episodes: usually continue the current topic, but
            // sometimes hop to another unfinished one, so per-topic grouping
            // downstream has real work to do.
            let mut current = 0usize;
            loop {
                let alive: Vec<usize> = (0..episodes.len())
                    .filter(|&i| !episodes[i].events.is_empty())
                    .collect();
                if alive.is_empty() {
                    break;
                }
                let pick = if alive.contains(&current) && rng.random::<f64>() < 0.8 {
                    current
                } else {
                    alive[rng.random_range(0..alive.len())]
                };
                current = pick;
                let (kind, duration, outcome) =
                    episodes[pick].events.pop_front().expect("alive episode");
                let record = EventRecord {
                    user_id: user_id.clone(),
                    session_id: session_id.clone(),
                    topic_id: format!(
                        "t{:0width$}",
                        episodes[pick].topic + 1,
                        width = topic_width
                    ),
                    kind,
                    start: clock,
                    duration,
                    outcome,
                };
                debug_assert!(record.validate().is_ok());
                records.push(record);
                clock += duration + rng.random_range(5..=120);
            }
        }
    }
    Ok(records)
}
