//! Agglomerative hierarchical clustering of user profiles with Ward linkage,
//! tree cutting, and per-cluster frequency reporting.
//!
//! Distances start as Euclidean between profile vectors; merges follow the
//! Lance-Williams recurrence on squared distances,
//! `d2(k, ij) = ((ni + nk) d2(i,k) + (nj + nk) d2(j,k) - nk d2(i,j)) / (ni + nj + nk)`,
//! with merge heights reported unsquared. Ties are broken by the
//! lexicographically smallest pair of member user ids, so the result does
//! not depend on input order. The naive O(n^3) search is deliberate; cohort
//! sizes here are tens of users.

use std::cmp::Reverse;
use std::collections::BTreeMap;
use std::io::Write;

use thiserror::Error;

use crate::profiles::PatternProfile;

/// One merge step: child node ids, the Ward distance at which they merged,
/// and the member count of the new cluster.
///
/// Node ids follow the usual stepwise convention: ids `0..n` are leaves, and
/// id `n + k` is the cluster formed by the k-th merge.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// Binary merge tree with heights: `n` leaves and exactly `n - 1` merges,
/// heights non-decreasing in merge order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    /// Leaf user ids, lexicographically sorted.
    pub leaves: Vec<String>,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    /// Height of a node: zero for leaves, the merge height otherwise.
    fn node_height(&self, node: usize) -> f64 {
        if node < self.leaves.len() {
            0.0
        } else {
            self.merges[node - self.leaves.len()].height
        }
    }

    /// Checks the structural invariants: merge count, child id ranges, each
    /// node consumed exactly once, consistent sizes, monotone heights.
    pub fn validate(&self) -> Result<(), ClusterError> {
        let n = self.leaves.len();
        if self.merges.len() + 1 != n {
            return Err(ClusterError::Malformed(format!(
                "{} merges for {} leaves",
                self.merges.len(),
                n
            )));
        }
        let mut size_of: Vec<usize> = vec![1; n];
        let mut consumed = vec![false; 2 * n - 1];
        let mut prev_height = f64::NEG_INFINITY;
        for (step, merge) in self.merges.iter().enumerate() {
            let id = n + step;
            for child in [merge.left, merge.right] {
                if child >= id {
                    return Err(ClusterError::Malformed(format!(
                        "merge {step} references future node {child}"
                    )));
                }
                if consumed[child] {
                    return Err(ClusterError::Malformed(format!(
                        "node {child} merged twice"
                    )));
                }
                consumed[child] = true;
            }
            let size = size_of[merge.left] + size_of[merge.right];
            if size != merge.size {
                return Err(ClusterError::Malformed(format!(
                    "merge {step} claims size {}, children sum to {size}",
                    merge.size
                )));
            }
            size_of.push(size);
            if merge.height < prev_height - 1e-9 {
                return Err(ClusterError::Malformed(format!(
                    "heights decrease at merge {step}: {} after {prev_height}",
                    merge.height
                )));
            }
            prev_height = prev_height.max(merge.height);
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("need at least 2 profiles to cluster, got {0}")]
    TooFewProfiles(usize),
    #[error("profile vectors have mixed lengths: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("duplicate user id `{0}` among profiles")]
    DuplicateUser(String),
    #[error("k = {k} is out of range for {n} leaves")]
    BadK { k: usize, n: usize },
    #[error("user `{0}` has no cluster assignment")]
    MissingAssignment(String),
    #[error("malformed dendrogram: {0}")]
    Malformed(String),
}

struct ActiveCluster {
    node: usize,
    size: usize,
    /// Lexicographically smallest member user id, as a leaf index into the
    /// sorted leaf list (so index order is id order).
    rep: usize,
}

fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Validates input and returns (sorted leaf ids, vectors in leaf order).
fn sorted_input(profiles: &[PatternProfile]) -> Result<(Vec<String>, Vec<Vec<f64>>), ClusterError> {
    if profiles.len() < 2 {
        return Err(ClusterError::TooFewProfiles(profiles.len()));
    }
    let dim = profiles[0].weights.len();
    for p in profiles {
        if p.weights.len() != dim {
            return Err(ClusterError::DimensionMismatch(dim, p.weights.len()));
        }
    }
    let mut order: Vec<usize> = (0..profiles.len()).collect();
    order.sort_by(|&a, &b| profiles[a].user_id.cmp(&profiles[b].user_id));
    for pair in order.windows(2) {
        if profiles[pair[0]].user_id == profiles[pair[1]].user_id {
            return Err(ClusterError::DuplicateUser(profiles[pair[0]].user_id.clone()));
        }
    }
    let leaves = order.iter().map(|&i| profiles[i].user_id.clone()).collect();
    let vectors = order.iter().map(|&i| profiles[i].weights.clone()).collect();
    Ok((leaves, vectors))
}

/// Picks the active pair with minimal squared distance, breaking exact ties
/// by the smaller (rep, rep) pair.
fn argmin_pair(dist: &[Vec<f64>], clusters: &[ActiveCluster]) -> (usize, usize) {
    let mut best: Option<(usize, usize, f64, (usize, usize))> = None;
    for i in 0..clusters.len() {
        for j in (i + 1)..clusters.len() {
            let d = dist[i][j];
            let reps = (
                clusters[i].rep.min(clusters[j].rep),
                clusters[i].rep.max(clusters[j].rep),
            );
            let better = match &best {
                None => true,
                Some((_, _, bd, breps)) => d < *bd || (d == *bd && reps < *breps),
            };
            if better {
                best = Some((i, j, d, reps));
            }
        }
    }
    let (i, j, _, _) = best.expect("at least one pair");
    (i, j)
}

/// Ward-linkage agglomerative clustering of profile vectors.
pub fn ward_cluster(profiles: &[PatternProfile]) -> Result<Dendrogram, ClusterError> {
    let (leaves, vectors) = sorted_input(profiles)?;
    let n = leaves.len();

    let mut clusters: Vec<ActiveCluster> = (0..n)
        .map(|i| ActiveCluster {
            node: i,
            size: 1,
            rep: i,
        })
        .collect();
    let mut dist: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| squared_euclidean(&vectors[i], &vectors[j]))
                .collect()
        })
        .collect();

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let (i, j) = argmin_pair(&dist, &clusters);
        let d_ij = dist[i][j];
        let (ni, nj) = (clusters[i].size as f64, clusters[j].size as f64);

        // Ward distances to the merged cluster, in surviving-index order.
        let mut new_row: Vec<f64> = Vec::with_capacity(clusters.len() - 2);
        for k in 0..clusters.len() {
            if k == i || k == j {
                continue;
            }
            let nk = clusters[k].size as f64;
            new_row.push(
                ((ni + nk) * dist[i][k] + (nj + nk) * dist[j][k] - nk * d_ij)
                    / (ni + nj + nk),
            );
        }

        let (left, right) = if clusters[i].rep < clusters[j].rep {
            (clusters[i].node, clusters[j].node)
        } else {
            (clusters[j].node, clusters[i].node)
        };
        let merged = ActiveCluster {
            node: n + step,
            size: clusters[i].size + clusters[j].size,
            rep: clusters[i].rep.min(clusters[j].rep),
        };
        merges.push(Merge {
            left,
            right,
            height: d_ij.sqrt(),
            size: merged.size,
        });

        // Drop j then i (j > i), then append the merged cluster.
        clusters.remove(j);
        clusters.remove(i);
        dist.remove(j);
        dist.remove(i);
        for row in dist.iter_mut() {
            row.remove(j);
            row.remove(i);
        }
        for (row, d) in dist.iter_mut().zip(&new_row) {
            row.push(*d);
        }
        new_row.push(0.0);
        dist.push(new_row);
        clusters.push(merged);
    }

    let tree = Dendrogram { leaves, merges };
    // Ward guarantees monotone heights; a violation is an implementation bug.
    assert!(
        tree.merges
            .windows(2)
            .all(|w| w[1].height >= w[0].height - 1e-9),
        "Ward merge heights must be non-decreasing"
    );
    Ok(tree)
}

/// Reference implementation used to validate [`ward_cluster`]: at every step
/// it recomputes all pairwise Ward distances directly from cluster members,
/// `d2(A, B) = 2 |A| |B| / (|A| + |B|) * |centroid(A) - centroid(B)|^2`,
/// with the same greedy selection and tie-breaking. No recurrence involved.
pub fn ward_cluster_reference(profiles: &[PatternProfile]) -> Result<Dendrogram, ClusterError> {
    let (leaves, vectors) = sorted_input(profiles)?;
    let n = leaves.len();
    let dim = vectors[0].len();

    struct Group {
        node: usize,
        members: Vec<usize>,
    }
    let mut groups: Vec<Group> = (0..n)
        .map(|i| Group {
            node: i,
            members: vec![i],
        })
        .collect();

    let centroid = |members: &[usize]| -> Vec<f64> {
        let mut c = vec![0.0; dim];
        for &m in members {
            for (acc, v) in c.iter_mut().zip(&vectors[m]) {
                *acc += v;
            }
        }
        for acc in c.iter_mut() {
            *acc /= members.len() as f64;
        }
        c
    };

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut best: Option<(usize, usize, f64, (usize, usize))> = None;
        for i in 0..groups.len() {
            for j in (i + 1)..groups.len() {
                let (a, b) = (&groups[i], &groups[j]);
                let (na, nb) = (a.members.len() as f64, b.members.len() as f64);
                let d = 2.0 * na * nb / (na + nb)
                    * squared_euclidean(&centroid(&a.members), &centroid(&b.members));
                let reps = (
                    a.members[0].min(b.members[0]),
                    a.members[0].max(b.members[0]),
                );
                let better = match &best {
                    None => true,
                    Some((_, _, bd, breps)) => d < *bd || (d == *bd && reps < *breps),
                };
                if better {
                    best = Some((i, j, d, reps));
                }
            }
        }
        let (i, j, d, _) = best.expect("pair");
        let (left, right) = if groups[i].members[0] < groups[j].members[0] {
            (groups[i].node, groups[j].node)
        } else {
            (groups[j].node, groups[i].node)
        };
        let mut members = groups[i].members.clone();
        members.extend(&groups[j].members);
        members.sort_unstable();
        merges.push(Merge {
            left,
            right,
            height: d.sqrt(),
            size: members.len(),
        });
        groups.remove(j);
        groups.remove(i);
        groups.push(Group {
            node: n + step,
            members,
        });
    }
    Ok(Dendrogram { leaves, merges })
}

/// Cuts the tree into `k` clusters by discarding the `k - 1` highest merges.
/// Cluster indices run 1..=k, assigned by descending member count with ties
/// broken by the lexicographically smallest member, so cluster 1 is always
/// the largest.
pub fn cut_tree(tree: &Dendrogram, k: usize) -> Result<BTreeMap<String, usize>, ClusterError> {
    let n = tree.n_leaves();
    if k < 1 || k > n {
        return Err(ClusterError::BadK { k, n });
    }
    tree.validate()?;

    let applied = n - k; // merges kept after discarding the top k - 1
    let mut parent: Vec<Option<usize>> = vec![None; n + applied];
    for (step, merge) in tree.merges[..applied].iter().enumerate() {
        parent[merge.left] = Some(n + step);
        parent[merge.right] = Some(n + step);
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for leaf in 0..n {
        let mut node = leaf;
        while let Some(up) = parent[node] {
            node = up;
        }
        groups.entry(node).or_default().push(leaf);
    }
    debug_assert_eq!(groups.len(), k);

    let mut ordered: Vec<Vec<usize>> = groups.into_values().collect();
    // Leaves are sorted by user id, so the smallest leaf index is the
    // lexicographically smallest member.
    ordered.sort_by_key(|members| (Reverse(members.len()), members[0]));

    let mut assignment = BTreeMap::new();
    for (idx, members) in ordered.iter().enumerate() {
        for &leaf in members {
            assignment.insert(tree.leaves[leaf].clone(), idx + 1);
        }
    }
    Ok(assignment)
}

/// Mean profile per cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSummary {
    pub index: usize,
    pub members: Vec<String>,
    pub mean_frequencies: Vec<f64>,
}

/// Per-cluster membership and mean pattern frequencies; the plot-ready data
/// behind a per-cluster frequency bar chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterReport {
    pub clusters: Vec<ClusterSummary>,
}

/// Averages member profiles per cluster. Every profile must be covered by
/// the assignment.
pub fn cluster_report(
    assignment: &BTreeMap<String, usize>,
    profiles: &[PatternProfile],
) -> Result<ClusterReport, ClusterError> {
    let mut by_cluster: BTreeMap<usize, (Vec<String>, Vec<f64>, usize)> = BTreeMap::new();
    for profile in profiles {
        let &index = assignment
            .get(&profile.user_id)
            .ok_or_else(|| ClusterError::MissingAssignment(profile.user_id.clone()))?;
        let entry = by_cluster
            .entry(index)
            .or_insert_with(|| (Vec::new(), vec![0.0; profile.weights.len()], 0));
        if entry.1.len() != profile.weights.len() {
            return Err(ClusterError::DimensionMismatch(
                entry.1.len(),
                profile.weights.len(),
            ));
        }
        entry.0.push(profile.user_id.clone());
        for (acc, w) in entry.1.iter_mut().zip(&profile.weights) {
            *acc += w;
        }
        entry.2 += 1;
    }
    let clusters = by_cluster
        .into_iter()
        .map(|(index, (mut members, mut sums, count))| {
            members.sort();
            for s in sums.iter_mut() {
                *s /= count as f64;
            }
            ClusterSummary {
                index,
                members,
                mean_frequencies: sums,
            }
        })
        .collect();
    Ok(ClusterReport { clusters })
}

/// Quotes a Newick leaf name if it contains structural characters.
fn newick_name(name: &str) -> String {
    if name
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-' | '|' | '#'))
    {
        name.to_string()
    } else {
        format!("'{}'", name.replace('\'', "''"))
    }
}

/// Renders the dendrogram as a Newick tree, merge heights as branch lengths.
pub fn to_newick(tree: &Dendrogram) -> String {
    fn render(tree: &Dendrogram, node: usize, out: &mut String) {
        let n = tree.leaves.len();
        if node < n {
            out.push_str(&newick_name(&tree.leaves[node]));
        } else {
            let merge = &tree.merges[node - n];
            out.push('(');
            render(tree, merge.left, out);
            out.push_str(&format!(":{:.6},", merge.height - tree.node_height(merge.left)));
            render(tree, merge.right, out);
            out.push_str(&format!(":{:.6})", merge.height - tree.node_height(merge.right)));
        }
    }
    let mut out = String::new();
    if tree.leaves.len() == 1 {
        out.push_str(&newick_name(&tree.leaves[0]));
    } else if !tree.merges.is_empty() {
        render(tree, tree.leaves.len() + tree.merges.len() - 1, &mut out);
    }
    out.push_str(";\n");
    out
}

/// Renders the dendrogram as Graphviz DOT, edges from each cluster to its
/// children, internal nodes labeled with their merge height.
pub fn to_dot(tree: &Dendrogram) -> String {
    let n = tree.leaves.len();
    let mut out = String::from("digraph dendrogram {\n  rankdir=BT;\n  node [shape=box];\n");
    for (i, leaf) in tree.leaves.iter().enumerate() {
        out.push_str(&format!("  n{i} [label=\"{}\", shape=plaintext];\n", leaf));
    }
    for (step, merge) in tree.merges.iter().enumerate() {
        let id = n + step;
        out.push_str(&format!(
            "  n{id} [label=\"h={:.6}\"];\n  n{} -> n{id};\n  n{} -> n{id};\n",
            merge.height, merge.left, merge.right
        ));
    }
    out.push_str("}\n");
    out
}

pub const ASSIGNMENTS_HEADER: [&str; 2] = ["user_id", "cluster"];

/// Writes assignments as CSV `user_id,cluster`, sorted by user id.
pub fn write_assignments_csv<W: Write>(
    assignment: &BTreeMap<String, usize>,
    out: W,
) -> Result<(), std::io::Error> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(ASSIGNMENTS_HEADER)?;
    for (user, cluster) in assignment {
        writer.write_record([user.as_str(), &cluster.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

pub const CLUSTER_REPORT_HEADER: [&str; 3] = ["cluster", "pattern", "mean_frequency"];

/// Writes the per-cluster mean frequency table as CSV
/// `cluster,pattern,mean_frequency`, clusters ascending, vocabulary order.
pub fn write_cluster_report_csv<W: Write>(
    report: &ClusterReport,
    pattern_names: &[String],
    out: W,
) -> Result<(), std::io::Error> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CLUSTER_REPORT_HEADER)?;
    for cluster in &report.clusters {
        for (pattern, mean) in pattern_names.iter().zip(&cluster.mean_frequencies) {
            writer.write_record([
                cluster.index.to_string(),
                pattern.clone(),
                format!("{mean:.6}"),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}
