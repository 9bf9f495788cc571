//! Pipeline configuration: defaults, key-value config files, and the
//! `manifest.json` replay format.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use seqprint_core::sequencer::BoundaryConfig;
use seqprint_core::spam::{Limit, MiningParams};
use seqprint_core::stats::{Measure, StabilityParams};

/// Everything a pipeline run depends on. A run's `manifest.json` is exactly
/// this structure; replaying it reproduces every output byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: PathBuf,
    pub out_dir: PathBuf,
    pub minsup: f64,
    pub maxgap: Limit,
    pub minlen: usize,
    pub maxlen: Limit,
    pub epsilon: f64,
    pub require_gap_below_median: bool,
    pub require_mixed_activity: bool,
    pub require_exercise_ending: bool,
    pub k: usize,
    pub seed: u64,
    pub measures: Vec<Measure>,
}

impl RunConfig {
    /// The default configuration for the given paths: minsup 0.04, maxgap 1,
    /// minlen 2, unbounded maxlen, epsilon 0.0001, k 2, all boundary rules
    /// off, both distance measures.
    pub fn with_paths(input: PathBuf, out_dir: PathBuf) -> Self {
        RunConfig {
            input,
            out_dir,
            minsup: 0.04,
            maxgap: Limit::Finite(1),
            minlen: 2,
            maxlen: Limit::Unbounded,
            epsilon: 0.0001,
            require_gap_below_median: false,
            require_mixed_activity: false,
            require_exercise_ending: false,
            k: 2,
            seed: 42,
            measures: Measure::ALL.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.minsup > 0.0 && self.minsup <= 1.0) {
            bail!("minsup must be in (0, 1], got {}", self.minsup);
        }
        if matches!(self.maxgap, Limit::Finite(0)) {
            bail!("maxgap must be at least 1");
        }
        if self.minlen == 0 {
            bail!("minlen must be at least 1");
        }
        if let Limit::Finite(m) = self.maxlen {
            if m < self.minlen {
                bail!("maxlen {m} is smaller than minlen {}", self.minlen);
            }
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            bail!("epsilon must be positive, got {}", self.epsilon);
        }
        if self.k == 0 {
            bail!("k must be at least 1");
        }
        if self.measures.is_empty() {
            bail!("at least one measure is required");
        }
        Ok(())
    }

    pub fn mining_params(&self) -> MiningParams {
        MiningParams {
            minsup: self.minsup,
            maxgap: self.maxgap,
            minlen: self.minlen,
            maxlen: self.maxlen,
        }
    }

    pub fn boundary_config(&self) -> BoundaryConfig {
        BoundaryConfig {
            require_gap_below_median: self.require_gap_below_median,
            require_mixed_activity: self.require_mixed_activity,
            require_exercise_ending: self.require_exercise_ending,
        }
    }

    pub fn stability_params(&self) -> StabilityParams {
        StabilityParams {
            maxgap: self.maxgap,
            epsilon: self.epsilon,
            seed: self.seed,
            measures: self.measures.clone(),
        }
    }

    pub fn manifest_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialize");
        text.push('\n');
        text
    }

    pub fn from_manifest(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("parsing manifest {}", path.display()))
    }
}

/// Partial configuration from a key-value file or command-line flags;
/// unset fields keep the values of whatever they overlay.
#[derive(Debug, Default, Clone)]
pub struct ConfigOverlay {
    pub input: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub minsup: Option<f64>,
    pub maxgap: Option<Limit>,
    pub minlen: Option<usize>,
    pub maxlen: Option<Limit>,
    pub epsilon: Option<f64>,
    pub require_gap_below_median: Option<bool>,
    pub require_mixed_activity: Option<bool>,
    pub require_exercise_ending: Option<bool>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub measures: Option<Vec<Measure>>,
}

impl ConfigOverlay {
    /// Parses the `key = value` config format (`#` starts a comment).
    ///
    /// Keys mirror the flag names: `input`, `out_dir`, `minsup`, `maxgap`,
    /// `minlen`, `maxlen`, `epsilon`, `require_gap_below_median`,
    /// `require_mixed_activity`, `require_exercise_ending`, `k`, `seed`,
    /// and `measures` (comma-separated).
    pub fn from_key_value(text: &str) -> Result<Self> {
        let mut overlay = ConfigOverlay::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
            let key = key.trim();
            let value = value.trim();
            let context = || format!("line {}: bad value for `{key}`", lineno + 1);
            match key {
                "input" => overlay.input = Some(PathBuf::from(value)),
                "out_dir" => overlay.out_dir = Some(PathBuf::from(value)),
                "minsup" => overlay.minsup = Some(value.parse().with_context(context)?),
                "maxgap" => {
                    overlay.maxgap =
                        Some(Limit::from_str(value).map_err(|e| anyhow!(e)).with_context(context)?)
                }
                "minlen" => overlay.minlen = Some(value.parse().with_context(context)?),
                "maxlen" => {
                    overlay.maxlen =
                        Some(Limit::from_str(value).map_err(|e| anyhow!(e)).with_context(context)?)
                }
                "epsilon" => overlay.epsilon = Some(value.parse().with_context(context)?),
                "require_gap_below_median" => {
                    overlay.require_gap_below_median =
                        Some(value.parse().with_context(context)?)
                }
                "require_mixed_activity" => {
                    overlay.require_mixed_activity = Some(value.parse().with_context(context)?)
                }
                "require_exercise_ending" => {
                    overlay.require_exercise_ending = Some(value.parse().with_context(context)?)
                }
                "k" => overlay.k = Some(value.parse().with_context(context)?),
                "seed" => overlay.seed = Some(value.parse().with_context(context)?),
                "measures" => {
                    let measures: Result<Vec<Measure>, String> = value
                        .split(',')
                        .map(|m| Measure::from_str(m.trim()))
                        .collect();
                    overlay.measures = Some(measures.map_err(|e| anyhow!(e))?);
                }
                other => bail!("line {}: unknown config key `{other}`", lineno + 1),
            }
        }
        Ok(overlay)
    }

    /// Applies set fields on top of `cfg`.
    pub fn apply(&self, cfg: &mut RunConfig) {
        let o = self.clone();
        if let Some(v) = o.input {
            cfg.input = v;
        }
        if let Some(v) = o.out_dir {
            cfg.out_dir = v;
        }
        if let Some(v) = o.minsup {
            cfg.minsup = v;
        }
        if let Some(v) = o.maxgap {
            cfg.maxgap = v;
        }
        if let Some(v) = o.minlen {
            cfg.minlen = v;
        }
        if let Some(v) = o.maxlen {
            cfg.maxlen = v;
        }
        if let Some(v) = o.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = o.require_gap_below_median {
            cfg.require_gap_below_median = v;
        }
        if let Some(v) = o.require_mixed_activity {
            cfg.require_mixed_activity = v;
        }
        if let Some(v) = o.require_exercise_ending {
            cfg.require_exercise_ending = v;
        }
        if let Some(v) = o.k {
            cfg.k = v;
        }
        if let Some(v) = o.seed {
            cfg.seed = v;
        }
        if let Some(v) = o.measures {
            cfg.measures = v;
        }
    }
}
