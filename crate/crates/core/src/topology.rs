//! Node positions, star/cluster topology construction and message
//! accounting for the two-hop relay rule: every reading relayed through a
//! cluster head costs two messages, a head's own reading costs one.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Reject;
use crate::error::{Error, Result};
use crate::protocol::DpsTrace;

/// Restarts used by the seeded k-means; the best objective wins.
const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodePosition {
    pub node_id: u32,
    pub x: f64,
    pub y: f64,
}

impl NodePosition {
    fn dist2(&self, x: f64, y: f64) -> f64 {
        let dx = self.x - x;
        let dy = self.y - y;
        dx * dx + dy * dy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClusterMethod {
    Manual,
    KMeans,
    NearestHead,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub head: u32,
    /// Sorted ascending; always contains the head.
    pub members: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterPlan {
    pub clusters: Vec<Cluster>,
    pub method: ClusterMethod,
}

impl ClusterPlan {
    pub fn node_ids(&self) -> BTreeSet<u32> {
        self.clusters
            .iter()
            .flat_map(|c| c.members.iter().copied())
            .collect()
    }

    pub fn head_of(&self, node_id: u32) -> Option<u32> {
        self.clusters
            .iter()
            .find(|c| c.members.binary_search(&node_id).is_ok())
            .map(|c| c.head)
    }

    pub fn is_head(&self, node_id: u32) -> bool {
        self.clusters.iter().any(|c| c.head == node_id)
    }

    /// Disjointness and head-membership check. With `expected` given, the
    /// plan must also cover exactly that node set.
    pub fn validate(&self, expected: Option<&BTreeSet<u32>>) -> Result<()> {
        let mut seen = BTreeSet::new();
        for cluster in &self.clusters {
            if cluster.members.is_empty() {
                return Err(Error::EmptyCluster);
            }
            if cluster.members.binary_search(&cluster.head).is_err() {
                return Err(Error::HeadNotMember { head: cluster.head });
            }
            for &m in &cluster.members {
                if !seen.insert(m) {
                    return Err(Error::DuplicateMember { node_id: m });
                }
            }
        }
        if let Some(expected) = expected {
            for &node in expected {
                if !seen.contains(&node) {
                    return Err(Error::UncoveredNode { node_id: node });
                }
            }
            if let Some(&extra) = seen.difference(expected).next() {
                return Err(Error::MissingNode { node_id: extra });
            }
        }
        Ok(())
    }
}

/// Manual cluster description; omitted head defaults to the lowest member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterAssignment {
    #[serde(default)]
    pub head: Option<u32>,
    pub members: Vec<u32>,
}

/// Build a plan from explicit assignments, enforcing the partition rules.
pub fn cluster_manual(assignments: &[ClusterAssignment]) -> Result<ClusterPlan> {
    let mut clusters = Vec::with_capacity(assignments.len());
    for a in assignments {
        if a.members.is_empty() {
            return Err(Error::EmptyCluster);
        }
        let mut members = a.members.clone();
        members.sort_unstable();
        for pair in members.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::DuplicateMember { node_id: pair[0] });
            }
        }
        let head = a.head.unwrap_or(members[0]);
        if members.binary_search(&head).is_err() {
            return Err(Error::HeadNotMember { head });
        }
        clusters.push(Cluster { head, members });
    }
    clusters.sort_by_key(|c| c.head);
    let plan = ClusterPlan {
        clusters,
        method: ClusterMethod::Manual,
    };
    plan.validate(None)?;
    Ok(plan)
}

/// Seeded Euclidean k-means over node positions. Runs a handful of
/// k-means++ restarts and keeps the lowest within-cluster sum of squares,
/// so small instances land in the global optimum for any seed. Heads are
/// the members nearest their centroid, ties broken by lowest node id.
pub fn cluster_kmeans(positions: &[NodePosition], k: usize, seed: u64) -> Result<ClusterPlan> {
    if positions.is_empty() {
        return Err(Error::NoPositions);
    }
    let n = positions.len();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let mut ids = BTreeSet::new();
    for p in positions {
        if !ids.insert(p.node_id) {
            return Err(Error::DuplicatePosition { node_id: p.node_id });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>, Vec<(f64, f64)>)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let centroids = seed_centroids(positions, k, &mut rng);
        let (sse, assignment, centroids) = lloyd(positions, centroids);
        if best.as_ref().is_none_or(|(b, _, _)| sse < *b) {
            best = Some((sse, assignment, centroids));
        }
    }
    let (_, assignment, centroids) = best.expect("at least one restart");

    let mut clusters = Vec::with_capacity(k);
    for c in 0..k {
        let members: Vec<&NodePosition> = positions
            .iter()
            .enumerate()
            .filter(|(i, _)| assignment[*i] == c)
            .map(|(_, p)| p)
            .collect();
        if members.is_empty() {
            continue;
        }
        let (cx, cy) = centroids[c];
        let head = members
            .iter()
            .map(|p| (p.dist2(cx, cy), p.node_id))
            .min_by(|a, b| a.partial_cmp(b).expect("finite distances"))
            .map(|(_, id)| id)
            .expect("non-empty cluster");
        let mut member_ids: Vec<u32> = members.iter().map(|p| p.node_id).collect();
        member_ids.sort_unstable();
        clusters.push(Cluster {
            head,
            members: member_ids,
        });
    }
    clusters.sort_by_key(|c| c.head);
    let plan = ClusterPlan {
        clusters,
        method: ClusterMethod::KMeans,
    };
    plan.validate(Some(&ids))?;
    Ok(plan)
}

/// k-means++ seeding: first centroid uniform, the rest weighted by the
/// squared distance to the nearest already-chosen centroid.
fn seed_centroids(positions: &[NodePosition], k: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let n = positions.len();
    let first = rng.random_range(0..n);
    let mut centroids = vec![(positions[first].x, positions[first].y)];
    let mut d2: Vec<f64> = positions
        .iter()
        .map(|p| p.dist2(centroids[0].0, centroids[0].1))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            // All remaining points coincide with chosen centroids; take the
            // lowest-id point not yet used as a centroid.
            positions
                .iter()
                .enumerate()
                .filter(|(_, p)| !centroids.contains(&(p.x, p.y)))
                .map(|(i, _)| i)
                .next()
                .unwrap_or(0)
        };
        let p = &positions[idx];
        centroids.push((p.x, p.y));
        for (i, pos) in positions.iter().enumerate() {
            d2[i] = d2[i].min(pos.dist2(p.x, p.y));
        }
    }
    centroids
}

fn lloyd(
    positions: &[NodePosition],
    mut centroids: Vec<(f64, f64)>,
) -> (f64, Vec<usize>, Vec<(f64, f64)>) {
    let n = positions.len();
    let k = centroids.len();
    let mut assignment = vec![0usize; n];
    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for (i, p) in positions.iter().enumerate() {
            let mut best_c = 0usize;
            let mut best_d = p.dist2(centroids[0].0, centroids[0].1);
            for (c, &(cx, cy)) in centroids.iter().enumerate().skip(1) {
                let d = p.dist2(cx, cy);
                if d < best_d {
                    best_d = d;
                    best_c = c;
                }
            }
            if assignment[i] != best_c {
                assignment[i] = best_c;
                changed = true;
            }
        }
        // Re-seat empty clusters on the worst-fitting point.
        for c in 0..k {
            if assignment.iter().any(|&a| a == c) {
                continue;
            }
            let worst = positions
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let (cx, cy) = centroids[assignment[i]];
                    (p.dist2(cx, cy), p.node_id, i)
                })
                .max_by(|a, b| {
                    (a.0, a.1)
                        .partial_cmp(&(b.0, b.1))
                        .expect("finite distances")
                })
                .map(|(_, _, i)| i)
                .expect("non-empty positions");
            assignment[worst] = c;
            changed = true;
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let mut sx = 0.0;
            let mut sy = 0.0;
            let mut count = 0usize;
            for (i, p) in positions.iter().enumerate() {
                if assignment[i] == c {
                    sx += p.x;
                    sy += p.y;
                    count += 1;
                }
            }
            if count > 0 {
                *centroid = (sx / count as f64, sy / count as f64);
            }
        }
        if !changed {
            break;
        }
    }
    let sse = positions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (cx, cy) = centroids[assignment[i]];
            p.dist2(cx, cy)
        })
        .sum();
    (sse, assignment, centroids)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CountMode {
    /// Members relay through their head: two hops per reading, one for the
    /// head's own readings.
    Relay,
    /// Every node talks to the sink directly.
    StarDirect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MessageCount {
    pub baseline_msgs: u64,
    pub dps_msgs: u64,
    pub reduction_pct: f64,
}

impl MessageCount {
    pub fn from_counts(baseline_msgs: u64, dps_msgs: u64) -> Self {
        let reduction_pct = if baseline_msgs > 0 {
            100.0 * (1.0 - dps_msgs as f64 / baseline_msgs as f64)
        } else {
            0.0
        };
        Self {
            baseline_msgs,
            dps_msgs,
            reduction_pct,
        }
    }
}

/// Count messages for a plan against per-node traces of equal length.
pub fn count_messages(
    plan: &ClusterPlan,
    traces: &BTreeMap<u32, DpsTrace>,
    mode: CountMode,
) -> Result<MessageCount> {
    plan.validate(None)?;
    let nodes = plan.node_ids();
    let mut length: Option<u64> = None;
    for &node_id in &nodes {
        let trace = traces
            .get(&node_id)
            .ok_or(Error::MissingTrace { node_id })?;
        match length {
            None => length = Some(trace.total),
            Some(expected) if trace.total != expected => {
                return Err(Error::TraceLengthMismatch {
                    node_id,
                    len: trace.total as usize,
                    expected: expected as usize,
                });
            }
            _ => {}
        }
    }
    let t = length.unwrap_or(0);
    let n = nodes.len() as u64;
    let h = plan.clusters.len() as u64;

    let (baseline, dps) = match mode {
        CountMode::StarDirect => {
            let dps = nodes.iter().map(|id| traces[id].transmissions).sum();
            (n * t, dps)
        }
        CountMode::Relay => {
            let baseline = t * (2 * (n - h) + h);
            let dps = nodes
                .iter()
                .map(|id| {
                    let hops = if plan.is_head(*id) { 1 } else { 2 };
                    hops * traces[id].transmissions
                })
                .sum();
            (baseline, dps)
        }
    };
    Ok(MessageCount::from_counts(baseline, dps))
}

#[derive(Debug, Default)]
pub struct ParsedLocations {
    pub positions: Vec<NodePosition>,
    pub rejects: Vec<Reject>,
}

/// Parse a whitespace-separated positions file: `node_id x y` per line.
pub fn parse_locations<R: BufRead>(input: R) -> Result<ParsedLocations> {
    let mut out = ParsedLocations::default();
    let mut seen = BTreeSet::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            out.rejects.push(Reject {
                line: line_no,
                reason: format!("expected 3 fields, found {}", fields.len()),
            });
            continue;
        }
        let parsed = fields[0].parse::<u32>().ok().and_then(|id| {
            let x = fields[1].parse::<f64>().ok()?;
            let y = fields[2].parse::<f64>().ok()?;
            (x.is_finite() && y.is_finite()).then_some((id, x, y))
        });
        match parsed {
            Some((node_id, x, y)) => {
                if !seen.insert(node_id) {
                    out.rejects.push(Reject {
                        line: line_no,
                        reason: format!("duplicate node_id {node_id}"),
                    });
                } else {
                    out.positions.push(NodePosition { node_id, x, y });
                }
            }
            None => out.rejects.push(Reject {
                line: line_no,
                reason: "unparseable node_id/x/y".into(),
            }),
        }
    }
    Ok(out)
}
