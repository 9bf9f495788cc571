//! Frequent sequential pattern mining over labeled sequences, after the SPAM
//! algorithm of Ayres et al. (KDD 2002): one vertical bitmap per item, a
//! depth-first search over single-item sequence extensions, and support-based
//! pruning. The S-step transform here additionally honors a maximum-gap
//! window in the style of the SPMF library, where `maxgap = 1` means strictly
//! consecutive positions.
//!
//! Events carry exactly one label each, so itemsets are singletons and the
//! classic I-step (itemset extension) is degenerate; only S-steps are needed.
//!
//! [`brute_force_mine`] implements the identical contract by direct position
//! search, with no bitmaps, and serves as the test oracle for [`mine`].

use std::cmp::Reverse;
use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::sequencer::{format_labels, parse_labels, Label, LabeledSequence};

/// A positive bound that may be absent, for `maxgap` and `maxlen`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Limit {
    Finite(usize),
    Unbounded,
}

impl Limit {
    /// True when `value` is within the bound.
    pub fn allows(self, value: usize) -> bool {
        match self {
            Limit::Finite(n) => value <= n,
            Limit::Unbounded => true,
        }
    }
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Limit::Finite(n) => write!(f, "{n}"),
            Limit::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl FromStr for Limit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unbounded" | "none" | "inf" => Ok(Limit::Unbounded),
            other => other
                .parse::<usize>()
                .map(Limit::Finite)
                .map_err(|_| format!("expected a positive integer or `unbounded`, got `{other}`")),
        }
    }
}

impl Serialize for Limit {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Limit::Finite(n) => serializer.serialize_u64(*n as u64),
            Limit::Unbounded => serializer.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for Limit {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(u64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(n) => Ok(Limit::Finite(n as usize)),
            Raw::Text(s) => Limit::from_str(&s).map_err(D::Error::custom),
        }
    }
}

/// Mining thresholds. Defaults: 4% minimum support, maximum gap 1 (contiguous
/// occurrences), minimum pattern length 2, no maximum length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiningParams {
    /// Minimum support as a fraction of database sequences, in (0, 1].
    pub minsup: f64,
    /// Largest allowed position delta between consecutive pattern items.
    pub maxgap: Limit,
    pub minlen: usize,
    pub maxlen: Limit,
}

impl Default for MiningParams {
    fn default() -> Self {
        MiningParams {
            minsup: 0.04,
            maxgap: Limit::Finite(1),
            minlen: 2,
            maxlen: Limit::Unbounded,
        }
    }
}

impl MiningParams {
    pub fn validate(&self) -> Result<(), MinerError> {
        if !(self.minsup > 0.0 && self.minsup <= 1.0) {
            return Err(MinerError::InvalidParams(format!(
                "minsup must be in (0, 1], got {}",
                self.minsup
            )));
        }
        if let Limit::Finite(g) = self.maxgap {
            if g == 0 {
                return Err(MinerError::InvalidParams("maxgap must be >= 1".into()));
            }
        }
        if self.minlen == 0 {
            return Err(MinerError::InvalidParams("minlen must be >= 1".into()));
        }
        if let Limit::Finite(m) = self.maxlen {
            if m < self.minlen {
                return Err(MinerError::InvalidParams(format!(
                    "maxlen {m} is smaller than minlen {}",
                    self.minlen
                )));
            }
        }
        Ok(())
    }
}

/// A mined pattern with its sequence-level support: the fraction of database
/// sequences containing at least one gap-respecting occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub items: Vec<Label>,
    pub support: f64,
}

/// One sequence of the mining database.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DbSequence {
    pub id: String,
    pub labels: Vec<Label>,
}

/// The sequence database: uniquely-identified, non-empty label sequences.
#[derive(Debug, Clone, Default)]
pub struct SequenceDatabase {
    pub sequences: Vec<DbSequence>,
}

impl SequenceDatabase {
    pub fn new(sequences: Vec<DbSequence>) -> Result<Self, MinerError> {
        let mut seen = BTreeSet::new();
        for seq in &sequences {
            if seq.labels.is_empty() {
                return Err(MinerError::EmptySequence(seq.id.clone()));
            }
            if !seen.insert(seq.id.as_str()) {
                return Err(MinerError::DuplicateSequenceId(seq.id.clone()));
            }
        }
        Ok(SequenceDatabase { sequences })
    }

    /// Builds a database from labeled sequences, assigning each an id of the
    /// form `user|session|topic#k` where `k` disambiguates fragments of the
    /// same episode.
    pub fn from_labeled(seqs: &[LabeledSequence]) -> Self {
        let mut counts: std::collections::BTreeMap<(&str, &str, &str), usize> =
            std::collections::BTreeMap::new();
        let sequences = seqs
            .iter()
            .filter(|s| !s.labels.is_empty())
            .map(|s| {
                let slot = counts
                    .entry((&s.user_id, &s.session_id, &s.topic_id))
                    .or_insert(0);
                let id = format!("{}|{}|{}#{slot}", s.user_id, s.session_id, s.topic_id);
                *slot += 1;
                DbSequence {
                    id,
                    labels: s.labels.clone(),
                }
            })
            .collect();
        SequenceDatabase { sequences }
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MinerError {
    #[error("invalid mining parameters: {0}")]
    InvalidParams(String),
    #[error("duplicate sequence id `{0}`")]
    DuplicateSequenceId(String),
    #[error("sequence `{0}` is empty")]
    EmptySequence(String),
}

/// Word layout of the database's bit space: each sequence owns a word-aligned
/// run of `ceil(len / 64)` 64-bit words, bit `j` of a run marking position
/// `j` (0-based, chronological) of that sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitmapLayout {
    word_offset: Vec<usize>,
    lengths: Vec<usize>,
    total_words: usize,
}

impl BitmapLayout {
    pub fn new(db: &SequenceDatabase) -> Self {
        let mut word_offset = Vec::with_capacity(db.len());
        let mut lengths = Vec::with_capacity(db.len());
        let mut total_words = 0usize;
        for seq in &db.sequences {
            word_offset.push(total_words);
            lengths.push(seq.labels.len());
            total_words += seq.labels.len().div_ceil(64);
        }
        BitmapLayout {
            word_offset,
            lengths,
            total_words,
        }
    }

    pub fn n_sequences(&self) -> usize {
        self.lengths.len()
    }

    fn run(&self, seq: usize) -> (usize, usize, usize) {
        let len = self.lengths[seq];
        (self.word_offset[seq], len.div_ceil(64), len)
    }
}

/// A vertical bitmap over the database's bit space, interpreted against a
/// [`BitmapLayout`]. For a prefix pattern, bit (s, j) is set iff the prefix
/// has a gap-respecting occurrence in sequence `s` ending exactly at
/// position `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerticalBitmap {
    words: Vec<u64>,
}

impl VerticalBitmap {
    pub fn zeroed(layout: &BitmapLayout) -> Self {
        VerticalBitmap {
            words: vec![0; layout.total_words],
        }
    }

    pub fn set(&mut self, layout: &BitmapLayout, seq: usize, pos: usize) {
        let (off, _, len) = layout.run(seq);
        assert!(pos < len, "position {pos} out of range for sequence of length {len}");
        self.words[off + pos / 64] |= 1u64 << (pos % 64);
    }

    pub fn get(&self, layout: &BitmapLayout, seq: usize, pos: usize) -> bool {
        let (off, _, _) = layout.run(seq);
        self.words[off + pos / 64] & (1u64 << (pos % 64)) != 0
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Bitwise AND; both operands must share the same layout.
    pub fn and(&self, other: &VerticalBitmap) -> VerticalBitmap {
        debug_assert_eq!(self.words.len(), other.words.len());
        VerticalBitmap {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    /// Number of sequences with at least one set bit.
    pub fn support_count(&self, layout: &BitmapLayout) -> usize {
        (0..layout.n_sequences())
            .filter(|&s| {
                let (off, nwords, _) = layout.run(s);
                self.words[off..off + nwords].iter().any(|&w| w != 0)
            })
            .count()
    }

    /// SPAM's sequence-extension transform with a gap window: every set bit
    /// at position `j` marks candidate positions `j+1 ..= j+maxgap` (clamped
    /// to the sequence length); all original bits are cleared. ANDing the
    /// result with an item's bitmap yields the extended prefix's bitmap.
    pub fn s_step(&self, layout: &BitmapLayout, maxgap: Limit) -> VerticalBitmap {
        let mut out = vec![0u64; self.words.len()];
        for s in 0..layout.n_sequences() {
            let (off, nwords, len) = layout.run(s);
            let src = &self.words[off..off + nwords];
            if src.iter().all(|&w| w == 0) {
                continue;
            }
            match maxgap {
                Limit::Unbounded => {
                    let first = src
                        .iter()
                        .enumerate()
                        .find(|(_, &w)| w != 0)
                        .map(|(wi, &w)| wi * 64 + w.trailing_zeros() as usize)
                        .expect("nonzero run");
                    set_position_range(&mut out[off..off + nwords], first + 1, len);
                }
                Limit::Finite(gap) => {
                    let steps = gap.min(len.saturating_sub(1));
                    let mut shifted = src.to_vec();
                    let acc = &mut out[off..off + nwords];
                    for _ in 0..steps {
                        shift_forward_one(&mut shifted);
                        mask_tail(&mut shifted, len);
                        for (a, w) in acc.iter_mut().zip(&shifted) {
                            *a |= w;
                        }
                    }
                }
            }
        }
        VerticalBitmap { words: out }
    }
}

/// Sets bits for positions `from..to` within one run.
fn set_position_range(words: &mut [u64], from: usize, to: usize) {
    for pos in from..to {
        words[pos / 64] |= 1u64 << (pos % 64);
    }
}

/// Shifts a run one position forward (towards higher positions), carrying
/// across word boundaries; the carry out of the final word is discarded.
fn shift_forward_one(words: &mut [u64]) {
    let mut carry = 0u64;
    for w in words.iter_mut() {
        let next_carry = *w >> 63;
        *w = (*w << 1) | carry;
        carry = next_carry;
    }
}

/// Clears bits at or beyond `len` in the final word of a run.
fn mask_tail(words: &mut [u64], len: usize) {
    let rem = len % 64;
    if rem != 0 {
        if let Some(last) = words.last_mut() {
            *last &= (1u64 << rem) - 1;
        }
    }
}

/// Per-item vertical bitmaps for a database.
#[derive(Debug, Clone)]
pub struct ItemBitmaps {
    pub layout: BitmapLayout,
    by_label: Vec<VerticalBitmap>,
}

impl ItemBitmaps {
    pub fn bitmap(&self, label: Label) -> &VerticalBitmap {
        &self.by_label[label.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Label, &VerticalBitmap)> {
        Label::ALL.iter().map(move |&l| (l, self.bitmap(l)))
    }
}

/// Builds one vertical bitmap per label: bit (s, j) is set iff sequence `s`
/// carries that label at position `j`.
pub fn build_vertical_bitmaps(db: &SequenceDatabase) -> ItemBitmaps {
    let layout = BitmapLayout::new(db);
    let mut by_label = vec![VerticalBitmap::zeroed(&layout); Label::ALL.len()];
    for (s, seq) in db.sequences.iter().enumerate() {
        for (pos, label) in seq.labels.iter().enumerate() {
            by_label[label.index()].set(&layout, s, pos);
        }
    }
    ItemBitmaps { layout, by_label }
}

/// Smallest occurrence count that satisfies `count / n >= minsup`; ties at
/// the threshold are frequent. Never below 1.
pub fn support_threshold(minsup: f64, n: usize) -> usize {
    let nf = n as f64;
    let mut count = (minsup * nf).ceil() as usize;
    count = count.clamp(1, n.max(1));
    while count > 1 && (count - 1) as f64 / nf >= minsup {
        count -= 1;
    }
    while count < n && (count as f64) / nf < minsup {
        count += 1;
    }
    count
}

struct SearchCtx<'a> {
    layout: &'a BitmapLayout,
    items: &'a [VerticalBitmap],
    min_count: usize,
    minlen: usize,
    maxlen: Limit,
    maxgap: Limit,
}

fn explore(
    ctx: &SearchCtx<'_>,
    prefix: &mut Vec<Label>,
    bitmap: &VerticalBitmap,
    count: usize,
    out: &mut Vec<(Vec<Label>, usize)>,
) {
    if prefix.len() >= ctx.minlen && ctx.maxlen.allows(prefix.len()) {
        out.push((prefix.clone(), count));
    }
    if !ctx.maxlen.allows(prefix.len() + 1) {
        return;
    }
    let stepped = bitmap.s_step(ctx.layout, ctx.maxgap);
    if stepped.is_zero() {
        return;
    }
    for label in Label::ALL {
        let candidate = stepped.and(&ctx.items[label.index()]);
        let candidate_count = candidate.support_count(ctx.layout);
        if candidate_count >= ctx.min_count {
            prefix.push(label);
            explore(ctx, prefix, &candidate, candidate_count, out);
            prefix.pop();
        }
    }
}

/// Mines all patterns with length in `[minlen, maxlen]` and support at least
/// `minsup`, sorted by descending support and then lexicographic items.
///
/// The search tree is explored in parallel across root items; output order is
/// canonical regardless of the degree of parallelism.
pub fn mine(db: &SequenceDatabase, params: &MiningParams) -> Result<Vec<Pattern>, MinerError> {
    params.validate()?;
    let n = db.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let min_count = support_threshold(params.minsup, n);
    let bitmaps = build_vertical_bitmaps(db);
    let ctx = SearchCtx {
        layout: &bitmaps.layout,
        items: &bitmaps.by_label,
        min_count,
        minlen: params.minlen,
        maxlen: params.maxlen,
        maxgap: params.maxgap,
    };

    let mut raw: Vec<(Vec<Label>, usize)> = Label::ALL
        .par_iter()
        .map(|&root| {
            let mut out = Vec::new();
            let bitmap = bitmaps.bitmap(root);
            let count = bitmap.support_count(&bitmaps.layout);
            if count >= min_count {
                let mut prefix = vec![root];
                explore(&ctx, &mut prefix, bitmap, count, &mut out);
            }
            out
        })
        .reduce(Vec::new, |mut a, mut b| {
            a.append(&mut b);
            a
        });

    raw.sort_by(|a, b| (Reverse(a.1), &a.0).cmp(&(Reverse(b.1), &b.0)));
    Ok(raw
        .into_iter()
        .map(|(items, count)| Pattern {
            items,
            support: count as f64 / n as f64,
        })
        .collect())
}

/// True if `pattern` occurs in `seq` with every consecutive position delta
/// within `maxgap`, found by direct position search.
pub fn contains_with_gap(seq: &[Label], pattern: &[Label], maxgap: Limit) -> bool {
    if pattern.is_empty() {
        return true;
    }
    let mut reachable: Vec<bool> = seq.iter().map(|&l| l == pattern[0]).collect();
    for &item in &pattern[1..] {
        if !reachable.contains(&true) {
            return false;
        }
        let mut next = vec![false; seq.len()];
        for (j, &label) in seq.iter().enumerate() {
            if label != item || j == 0 {
                continue;
            }
            let lo = match maxgap {
                Limit::Finite(g) => j.saturating_sub(g),
                Limit::Unbounded => 0,
            };
            next[j] = reachable[lo..j].contains(&true);
        }
        reachable = next;
    }
    reachable.contains(&true)
}

/// The mining oracle: identical contract to [`mine`], implemented by
/// candidate enumeration with position-search containment and no bitmaps.
/// Extension of infrequent prefixes is pruned, which is sound because support
/// never grows under extension. Intended for small instances.
pub fn brute_force_mine(
    db: &SequenceDatabase,
    params: &MiningParams,
) -> Result<Vec<Pattern>, MinerError> {
    params.validate()?;
    let n = db.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let min_count = support_threshold(params.minsup, n);

    fn extend(
        db: &SequenceDatabase,
        params: &MiningParams,
        min_count: usize,
        prefix: &mut Vec<Label>,
        out: &mut Vec<(Vec<Label>, usize)>,
    ) {
        let count = db
            .sequences
            .iter()
            .filter(|s| contains_with_gap(&s.labels, prefix, params.maxgap))
            .count();
        if count < min_count {
            return;
        }
        if prefix.len() >= params.minlen && params.maxlen.allows(prefix.len()) {
            out.push((prefix.clone(), count));
        }
        if !params.maxlen.allows(prefix.len() + 1) {
            return;
        }
        for label in Label::ALL {
            prefix.push(label);
            extend(db, params, min_count, prefix, out);
            prefix.pop();
        }
    }

    let mut raw = Vec::new();
    for label in Label::ALL {
        let mut prefix = vec![label];
        extend(db, params, min_count, &mut prefix, &mut raw);
    }
    raw.sort_by(|a, b| (Reverse(a.1), &a.0).cmp(&(Reverse(b.1), &b.0)));
    Ok(raw
        .into_iter()
        .map(|(items, count)| Pattern {
            items,
            support: count as f64 / n as f64,
        })
        .collect())
}

pub const PATTERNS_HEADER: [&str; 2] = ["pattern", "support"];

/// Writes patterns as CSV: space-separated labels and the support with six
/// fractional digits.
pub fn write_patterns_csv<W: Write>(patterns: &[Pattern], out: W) -> Result<(), std::io::Error> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(PATTERNS_HEADER)?;
    for p in patterns {
        writer.write_record([format_labels(&p.items), format!("{:.6}", p.support)])?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a patterns CSV back, e.g. to reuse a mined vocabulary.
pub fn read_patterns_csv<R: Read>(source: R) -> Result<Vec<Pattern>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(source);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(str::to_string)
        .collect();
    if headers != PATTERNS_HEADER {
        return Err(format!(
            "bad patterns header: expected `{}`, found `{}`",
            PATTERNS_HEADER.join(","),
            headers.join(",")
        ));
    }
    let mut patterns = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let row = row.map_err(|e| format!("row {}: {e}", idx + 1))?;
        if row.len() != 2 {
            return Err(format!("row {}: expected 2 fields", idx + 1));
        }
        let items = parse_labels(&row[0]).map_err(|e| format!("row {}: {e}", idx + 1))?;
        let support: f64 = row[1]
            .parse()
            .map_err(|_| format!("row {}: bad support `{}`", idx + 1, &row[1]))?;
        patterns.push(Pattern { items, support });
    }
    Ok(patterns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Builds a database from rows of single-letter items, `A`..`H` mapping
    /// onto the eight labels in canonical order.
    fn db(rows: &[&str]) -> SequenceDatabase {
        let sequences = rows
            .iter()
            .enumerate()
            .map(|(i, row)| DbSequence {
                id: format!("S{}", i + 1),
                labels: row
                    .chars()
                    .filter(|c| !c.is_whitespace())
                    .map(|c| Label::ALL[(c as u8 - b'A') as usize])
                    .collect(),
            })
            .collect();
        SequenceDatabase { sequences }
    }

    fn bits(bitmap: &VerticalBitmap, layout: &BitmapLayout, seq: usize) -> String {
        let (_, _, len) = layout.run(seq);
        (0..len)
            .map(|p| if bitmap.get(layout, seq, p) { '1' } else { '0' })
            .collect()
    }

    fn bitmap_from(layout: &BitmapLayout, seq: usize, pattern: &str) -> VerticalBitmap {
        let mut bm = VerticalBitmap::zeroed(layout);
        for (p, c) in pattern.chars().enumerate() {
            if c == '1' {
                bm.set(layout, seq, p);
            }
        }
        bm
    }

    fn pattern_strings(patterns: &[Pattern]) -> Vec<(String, f64)> {
        patterns
            .iter()
            .map(|p| (format_labels(&p.items), p.support))
            .collect()
    }

    #[test]
    fn item_bitmaps_mark_positions() {
        let database = db(&["ABA"]);
        let bitmaps = build_vertical_bitmaps(&database);
        assert_eq!(bits(bitmaps.bitmap(Label::ALL[0]), &bitmaps.layout, 0), "101");
        assert_eq!(bits(bitmaps.bitmap(Label::ALL[1]), &bitmaps.layout, 0), "010");
    }

    #[test]
    fn item_bitmaps_partition_by_sequence() {
        let database = db(&["A", "B"]);
        let bitmaps = build_vertical_bitmaps(&database);
        let a = bitmaps.bitmap(Label::ALL[0]);
        assert_eq!(bits(a, &bitmaps.layout, 0), "1");
        assert_eq!(bits(a, &bitmaps.layout, 1), "0");
    }

    #[test]
    fn empty_database_has_empty_bitmaps() {
        let database = db(&[]);
        let bitmaps = build_vertical_bitmaps(&database);
        assert!(bitmaps.bitmap(Label::ALL[0]).is_zero());
        assert_eq!(bitmaps.layout.n_sequences(), 0);
    }

    #[test]
    fn s_step_gap_one_reaches_next_position_only() {
        let database = db(&["AAA"]);
        let layout = BitmapLayout::new(&database);
        let prefix = bitmap_from(&layout, 0, "010");
        let stepped = prefix.s_step(&layout, Limit::Finite(1));
        assert_eq!(bits(&stepped, &layout, 0), "001");
    }

    #[test]
    fn s_step_unbounded_marks_everything_after_first_bit() {
        let database = db(&["AAA"]);
        let layout = BitmapLayout::new(&database);
        let prefix = bitmap_from(&layout, 0, "100");
        let stepped = prefix.s_step(&layout, Limit::Unbounded);
        assert_eq!(bits(&stepped, &layout, 0), "011");
    }

    #[test]
    fn s_step_gap_two_unions_windows() {
        let database = db(&["AAAAA"]);
        let layout = BitmapLayout::new(&database);
        let prefix = bitmap_from(&layout, 0, "01010");
        let stepped = prefix.s_step(&layout, Limit::Finite(2));
        assert_eq!(bits(&stepped, &layout, 0), "00111");
    }

    #[test]
    fn s_step_carries_across_word_boundaries() {
        // One 130-position sequence, bits at 63 and 127.
        let labels = "A".repeat(130);
        let database = db(&[&labels]);
        let layout = BitmapLayout::new(&database);
        let mut prefix = VerticalBitmap::zeroed(&layout);
        prefix.set(&layout, 0, 63);
        prefix.set(&layout, 0, 127);

        let one = prefix.s_step(&layout, Limit::Finite(1));
        assert!(one.get(&layout, 0, 64));
        assert!(one.get(&layout, 0, 128));
        assert!(!one.get(&layout, 0, 63));
        assert_eq!((0..130).filter(|&p| one.get(&layout, 0, p)).count(), 2);

        let open = prefix.s_step(&layout, Limit::Unbounded);
        assert_eq!(
            (0..130).filter(|&p| open.get(&layout, 0, p)).count(),
            130 - 64
        );
        assert!(!open.get(&layout, 0, 63));
        assert!(open.get(&layout, 0, 129));
    }

    fn params(minsup: f64, maxgap: Limit, minlen: usize) -> MiningParams {
        MiningParams {
            minsup,
            maxgap,
            minlen,
            maxlen: Limit::Unbounded,
        }
    }

    #[test]
    fn single_pair_database() {
        let database = db(&["AB"]);
        let found = mine(&database, &params(1.0, Limit::Finite(1), 2)).unwrap();
        assert_eq!(pattern_strings(&found), vec![("AnEx anex".to_string(), 1.0)]);
    }

    #[test]
    fn support_counts_sequences_not_occurrences() {
        // Sequences: [ex P ex], [ex P], [P ex]; minsup 0.6 keeps the two
        // contiguous pairs at support 2/3, and nothing longer.
        let seqs = ["ex P ex", "ex P", "P ex"].map(|s| parse_labels(s).unwrap());
        let database = SequenceDatabase::new(
            seqs.iter()
                .enumerate()
                .map(|(i, labels)| DbSequence {
                    id: format!("S{i}"),
                    labels: labels.clone(),
                })
                .collect(),
        )
        .unwrap();
        let found = mine(&database, &params(0.6, Limit::Finite(1), 2)).unwrap();
        assert_eq!(
            pattern_strings(&found),
            vec![
                ("ex P".to_string(), 2.0 / 3.0),
                ("P ex".to_string(), 2.0 / 3.0)
            ]
        );
    }

    #[test]
    fn gap_constraint_excludes_non_contiguous_pair() {
        let database = db(&["ACB"]);
        let found = brute_force_mine(&database, &params(1.0, Limit::Finite(1), 2)).unwrap();
        let names: Vec<String> = found.iter().map(|p| format_labels(&p.items)).collect();
        // The contiguous pairs and the full triple qualify; the skip pair
        // [A, B] is excluded by the gap constraint.
        assert_eq!(names, vec!["AnEx ex", "AnEx ex anex", "ex anex"]);
        assert!(!names.iter().any(|n| n == "AnEx anex"));

        let bitmap_found = mine(&database, &params(1.0, Limit::Finite(1), 2)).unwrap();
        assert_eq!(found, bitmap_found);
    }

    #[test]
    fn overlapping_occurrences_count_once_per_sequence() {
        let database = db(&["AAA"]);
        let found = mine(&database, &params(1.0, Limit::Finite(1), 2)).unwrap();
        let aa = found
            .iter()
            .find(|p| format_labels(&p.items) == "AnEx AnEx")
            .expect("pattern [A,A]");
        assert_eq!(aa.support, 1.0);
    }

    #[test]
    fn empty_database_mines_nothing() {
        let database = db(&[]);
        assert!(mine(&database, &MiningParams::default()).unwrap().is_empty());
    }

    #[test]
    fn invalid_params_are_rejected() {
        let database = db(&["AB"]);
        for bad in [
            params(0.0, Limit::Finite(1), 2),
            params(1.01, Limit::Finite(1), 2),
            params(0.5, Limit::Finite(0), 2),
            params(0.5, Limit::Finite(1), 0),
            MiningParams {
                minsup: 0.5,
                maxgap: Limit::Finite(1),
                minlen: 3,
                maxlen: Limit::Finite(2),
            },
        ] {
            assert!(matches!(
                mine(&database, &bad),
                Err(MinerError::InvalidParams(_))
            ));
        }
    }

    #[test]
    fn threshold_boundaries() {
        assert_eq!(support_threshold(1.0, 3), 3);
        assert_eq!(support_threshold(0.6, 3), 2);
        assert_eq!(support_threshold(0.1, 20), 2);
        assert_eq!(support_threshold(0.07, 100), 7);
        assert_eq!(support_threshold(0.04, 650), 26);
        assert_eq!(support_threshold(1e-9, 5), 1);
    }

    #[test]
    fn maxlen_bounds_pattern_length() {
        let database = db(&["AAAA"]);
        let bounded = MiningParams {
            minsup: 1.0,
            maxgap: Limit::Finite(1),
            minlen: 1,
            maxlen: Limit::Finite(2),
        };
        let found = mine(&database, &bounded).unwrap();
        assert!(found.iter().all(|p| p.items.len() <= 2));
        assert_eq!(found.len(), 2); // [A] and [A,A]
    }

    #[test]
    fn patterns_csv_round_trip() {
        let database = db(&["ABAB", "AB"]);
        let found = mine(&database, &params(0.5, Limit::Finite(1), 1)).unwrap();
        let mut buf = Vec::new();
        write_patterns_csv(&found, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("pattern,support\n"));
        assert!(text.contains("1.000000"));
        let loaded = read_patterns_csv(buf.as_slice()).unwrap();
        assert_eq!(loaded.len(), found.len());
        for (a, b) in loaded.iter().zip(&found) {
            assert_eq!(a.items, b.items);
            assert!((a.support - b.support).abs() < 1e-6);
        }
    }

    // Random-database equivalence elsewhere never exceeds one 64-bit word
    // per sequence; these two pin the multi-word carry paths against the
    // position-search oracle.
    #[test]
    fn miner_matches_oracle_on_multi_word_sequences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x10f6);
        for round in 0..20 {
            let sequences: Vec<DbSequence> = (0..rng.random_range(3..=6))
                .map(|i| DbSequence {
                    id: format!("S{i}"),
                    labels: (0..rng.random_range(50..=200))
                        .map(|_| Label::ALL[rng.random_range(0..8)])
                        .collect(),
                })
                .collect();
            let database = SequenceDatabase::new(sequences).unwrap();
            for maxgap in [Limit::Finite(1), Limit::Finite(2)] {
                let p = params(0.5, maxgap, 2);
                assert_eq!(
                    mine(&database, &p).unwrap(),
                    brute_force_mine(&database, &p).unwrap(),
                    "round {round}, {maxgap:?}"
                );
            }
        }
    }

    #[test]
    fn unbounded_gap_smear_matches_oracle_across_words() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xF00D);
        // Skewed alphabets keep the frequent set small while the sequences
        // span two or three words.
        let sequences: Vec<DbSequence> = (0..4)
            .map(|i| DbSequence {
                id: format!("S{i}"),
                labels: (0..rng.random_range(100..=180))
                    .map(|_| {
                        if rng.random::<f64>() < 0.95 {
                            Label::ALL[0]
                        } else {
                            Label::ALL[1 + rng.random_range(0..2)]
                        }
                    })
                    .collect(),
            })
            .collect();
        let database = SequenceDatabase::new(sequences).unwrap();
        let p = MiningParams {
            minsup: 0.75,
            maxgap: Limit::Unbounded,
            minlen: 1,
            maxlen: Limit::Finite(12),
        };
        let fast = mine(&database, &p).unwrap();
        assert!(fast.iter().any(|pat| pat.items.len() == 12));
        assert_eq!(fast, brute_force_mine(&database, &p).unwrap());
    }

    #[test]
    fn mining_is_deterministic_across_thread_counts() {
        let database = db(&["ABABAB", "BABA", "AABB", "ABBA", "BBAA"]);
        let p = params(0.2, Limit::Finite(2), 1);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| mine(&database, &p).unwrap());
        let multi = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| mine(&database, &p).unwrap());
        assert_eq!(single, multi);
    }

    /// Contiguous-substring containment, an independent check for maxgap = 1.
    fn contains_substring(seq: &[Label], pat: &[Label]) -> bool {
        !pat.is_empty() && pat.len() <= seq.len() && seq.windows(pat.len()).any(|w| w == pat)
    }

    fn arb_db() -> impl Strategy<Value = SequenceDatabase> {
        proptest::collection::vec(
            proptest::collection::vec(0usize..8, 1..9),
            1..9,
        )
        .prop_map(|rows| SequenceDatabase {
            sequences: rows
                .into_iter()
                .enumerate()
                .map(|(i, labels)| DbSequence {
                    id: format!("S{i}"),
                    labels: labels.into_iter().map(|l| Label::ALL[l]).collect(),
                })
                .collect(),
        })
    }

    fn arb_params() -> impl Strategy<Value = MiningParams> {
        (
            prop_oneof![Just(0.2), Just(0.4), Just(0.75), Just(1.0)],
            prop_oneof![
                Just(Limit::Finite(1)),
                Just(Limit::Finite(2)),
                Just(Limit::Unbounded)
            ],
            1usize..3,
            prop_oneof![Just(Limit::Finite(4)), Just(Limit::Unbounded)],
        )
            .prop_map(|(minsup, maxgap, minlen, maxlen)| MiningParams {
                minsup,
                maxgap,
                minlen,
                maxlen,
            })
    }

    proptest! {
        #[test]
        fn miner_matches_oracle(database in arb_db(), p in arb_params()) {
            let fast = mine(&database, &p).unwrap();
            let slow = brute_force_mine(&database, &p).unwrap();
            prop_assert_eq!(fast, slow);
        }

        // Every prefix of a frequent pattern is at least as frequent.
        #[test]
        fn anti_monotone_supports(database in arb_db()) {
            let p = params(0.3, Limit::Finite(1), 1);
            let found = mine(&database, &p).unwrap();
            let support_of = |items: &[Label]| {
                database
                    .sequences
                    .iter()
                    .filter(|s| contains_with_gap(&s.labels, items, p.maxgap))
                    .count() as f64
                    / database.len() as f64
            };
            for pattern in &found {
                if pattern.items.len() > 1 {
                    let prefix = &pattern.items[..pattern.items.len() - 1];
                    prop_assert!(support_of(prefix) >= pattern.support - 1e-12);
                }
            }
        }

        // With maxgap = 1 support equals the contiguous-substring fraction.
        #[test]
        fn gap_one_is_contiguous_support(database in arb_db()) {
            let p = params(0.25, Limit::Finite(1), 2);
            let found = mine(&database, &p).unwrap();
            for pattern in &found {
                let fraction = database
                    .sequences
                    .iter()
                    .filter(|s| contains_substring(&s.labels, &pattern.items))
                    .count() as f64
                    / database.len() as f64;
                prop_assert!((pattern.support - fraction).abs() < 1e-12);
            }
        }

        // Bitmap-derived supports equal position-search supports for every
        // frequent pattern.
        #[test]
        fn bitmap_supports_match_position_search(database in arb_db(), p in arb_params()) {
            let found = mine(&database, &p).unwrap();
            for pattern in &found {
                let by_search = database
                    .sequences
                    .iter()
                    .filter(|s| contains_with_gap(&s.labels, &pattern.items, p.maxgap))
                    .count() as f64
                    / database.len() as f64;
                prop_assert!((pattern.support - by_search).abs() < 1e-12);
            }
        }
    }
}
