//! Shared fixture builders for the benchmark targets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqprint_core::profiles::PatternProfile;
use seqprint_core::sequencer::{build_sequences, compute_medians};
use seqprint_core::spam::SequenceDatabase;
use seqprint_core::synth::{generate_cohort, CohortSpec, Span};

/// A labeled sequence database derived from a full synthetic cohort, so
/// mining benchmarks see realistic label distributions.
pub fn cohort_database(n_users: usize, seed: u64) -> SequenceDatabase {
    let spec = CohortSpec {
        n_users,
        sessions: Span::new(4, 10),
        topics_per_session: Span::new(1, 4),
        activities_per_episode: Span::new(4, 12),
        ..CohortSpec::default()
    };
    let records = generate_cohort(&spec, seed).expect("valid spec");
    let medians = compute_medians(&records);
    let sequences = build_sequences(&records, &medians).expect("labelable records");
    SequenceDatabase::from_labeled(&sequences)
}

/// Random profile vectors for clustering benchmarks.
pub fn random_profiles(n: usize, dim: usize, seed: u64) -> Vec<PatternProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let raw: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() + 1e-4).collect();
            let total: f64 = raw.iter().sum();
            PatternProfile {
                user_id: format!("u{i:04}"),
                weights: raw.into_iter().map(|w| w / total).collect(),
            }
        })
        .collect()
}
