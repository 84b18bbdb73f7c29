use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::louvain::louvain;
use super::partition::{modularity, Partition};
use crate::error::{Error, Result};
use crate::graph::FollowerGraph;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinementConfig {
    /// Communities larger than this are split.
    pub max_size: usize,
    /// Communities smaller than this are merged into a neighbour.
    pub min_size: usize,
    pub max_rounds: usize,
    pub seed: u64,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        RefinementConfig {
            max_size: 10_000,
            min_size: 100,
            max_rounds: 20,
            seed: 0,
        }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_size < 2 {
            return Err(Error::input("refinement.max_size must be greater than 1"));
        }
        if self.min_size < 1 || self.min_size > self.max_size {
            return Err(Error::input("refinement.min_size must be in 1..=max_size"));
        }
        if self.max_rounds < 1 {
            return Err(Error::input("refinement.max_rounds must be at least 1"));
        }
        Ok(())
    }
}

/// Replace every community larger than `cfg.max_size` by the Louvain
/// partition of its induced subgraph. When Louvain leaves such a community
/// whole, its members are ranked by internal weighted degree and cut into
/// `ceil(size / max_size)` contiguous chunks of near-equal size.
pub fn split_large(g: &FollowerGraph, p: &Partition, cfg: &RefinementConfig) -> Partition {
    split_counted(g, p, cfg).0
}

/// Returns the new partition, the number of communities split and how many
/// of those needed the chunking fallback.
fn split_counted(
    g: &FollowerGraph,
    p: &Partition,
    cfg: &RefinementConfig,
) -> (Partition, usize, usize) {
    let mut labels: Vec<usize> = p.assignment().to_vec();
    let mut next_label = p.num_communities();
    let (mut split, mut fallback) = (0, 0);
    for members in p.members() {
        if members.len() <= cfg.max_size {
            continue;
        }
        split += 1;
        let sub = g.induced(&members);
        let sub_seed = seed::derive_index(cfg.seed, members[0] as u64);
        let mut parts = louvain(&sub, sub_seed);
        if parts.num_communities() == 1 {
            fallback += 1;
            parts = chunk_by_degree(&sub, cfg.max_size);
        }
        for (local, &node) in members.iter().enumerate() {
            labels[node] = next_label + parts.community_of(local);
        }
        next_label += parts.num_communities();
    }
    (Partition::from_labels(&labels), split, fallback)
}

fn chunk_by_degree(sub: &FollowerGraph, max_size: usize) -> Partition {
    let n = sub.node_count();
    let mut order: Vec<(f64, usize)> = (0..n).map(|u| (sub.degree(u), u)).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let chunks = n.div_ceil(max_size);
    let (base, extra) = (n / chunks, n % chunks);
    let mut labels = vec![0; n];
    let mut pos = 0;
    for chunk in 0..chunks {
        let len = base + usize::from(chunk < extra);
        for &(_, u) in &order[pos..pos + len] {
            labels[u] = chunk;
        }
        pos += len;
    }
    Partition::from_labels(&labels)
}

/// Merge every community smaller than `cfg.min_size` into the neighbour it
/// shares the most edge weight with, among neighbours the merge would keep
/// within `cfg.max_size`. Smallest communities go first (ties: lowest id);
/// equal-weight neighbours resolve to the lowest id. Communities without an
/// eligible neighbour stay as they are.
pub fn merge_small(g: &FollowerGraph, p: &Partition, cfg: &RefinementConfig) -> Partition {
    merge_counted(g, p, cfg).0
}

fn merge_counted(g: &FollowerGraph, p: &Partition, cfg: &RefinementConfig) -> (Partition, usize) {
    let k = p.num_communities();
    let mut size = p.sizes();
    let mut links: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); k];
    for &(u, v, w) in g.edges() {
        let (a, b) = (p.community_of(u), p.community_of(v));
        if a != b {
            *links[a].entry(b).or_insert(0.0) += w;
            *links[b].entry(a).or_insert(0.0) += w;
        }
    }
    // Union target of each community; identity until merged.
    let mut target: Vec<usize> = (0..k).collect();
    let mut queue: BTreeSet<(usize, usize)> = (0..k)
        .filter(|&c| size[c] < cfg.min_size)
        .map(|c| (size[c], c))
        .collect();
    let mut merges = 0;

    while let Some((s, c)) = queue.pop_first() {
        let mut best: Option<(usize, f64)> = None;
        for (&d, &w) in &links[c] {
            if s + size[d] > cfg.max_size {
                continue;
            }
            if best.is_none_or(|(_, bw)| w > bw) {
                best = Some((d, w));
            }
        }
        let Some((d, _)) = best else {
            continue;
        };
        queue.remove(&(size[d], d));
        let absorbed = std::mem::take(&mut links[c]);
        for (e, w) in absorbed {
            links[e].remove(&c);
            if e != d {
                *links[d].entry(e).or_insert(0.0) += w;
                *links[e].entry(d).or_insert(0.0) += w;
            }
        }
        size[d] += s;
        size[c] = 0;
        target[c] = d;
        merges += 1;
        if size[d] < cfg.min_size {
            queue.insert((size[d], d));
        }
    }

    let resolve = |mut c: usize| {
        while target[c] != c {
            c = target[c];
        }
        c
    };
    let labels: Vec<usize> = p.assignment().iter().map(|&c| resolve(c)).collect();
    (Partition::from_labels(&labels), merges)
}

/// One line of the refinement log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    /// 0 is the initial Louvain run.
    pub round: usize,
    pub communities: usize,
    pub largest: usize,
    pub smallest: usize,
    /// Absent when the graph has no edges.
    pub modularity: Option<f64>,
    pub split: usize,
    pub split_fallback: usize,
    pub merged: usize,
    /// Community counts keyed by size bin (`"1"`, `"2-3"`, `"4-7"`, ...).
    pub size_histogram: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub partition: Partition,
    /// Split/merge rounds executed.
    pub rounds: usize,
    pub fixpoint: bool,
    pub log: Vec<RoundRecord>,
}

/// Louvain, then alternate [`split_large`] and [`merge_small`] until a round
/// changes nothing or `cfg.max_rounds` rounds have run.
pub fn refine(g: &FollowerGraph, cfg: &RefinementConfig) -> RefineOutcome {
    let mut partition = louvain(g, cfg.seed);
    let mut log = vec![record(g, &partition, 0, 0, 0, 0)];
    let mut fixpoint = false;
    let mut rounds = 0;
    while rounds < cfg.max_rounds {
        rounds += 1;
        let (split, n_split, n_fallback) = split_counted(g, &partition, cfg);
        let (merged, n_merged) = merge_counted(g, &split, cfg);
        log.push(record(g, &merged, rounds, n_split, n_fallback, n_merged));
        let unchanged = merged == partition;
        partition = merged;
        if unchanged {
            fixpoint = true;
            break;
        }
    }
    if !fixpoint {
        log::warn!(
            "refinement stopped after {} rounds without reaching a fixpoint",
            cfg.max_rounds
        );
    }
    RefineOutcome {
        partition,
        rounds,
        fixpoint,
        log,
    }
}

fn record(
    g: &FollowerGraph,
    p: &Partition,
    round: usize,
    split: usize,
    split_fallback: usize,
    merged: usize,
) -> RoundRecord {
    let sizes = p.sizes();
    RoundRecord {
        round,
        communities: p.num_communities(),
        largest: sizes.iter().copied().max().unwrap_or(0),
        smallest: sizes.iter().copied().min().unwrap_or(0),
        modularity: modularity(g, p).ok(),
        split,
        split_fallback,
        merged,
        size_histogram: size_histogram(&sizes),
    }
}

pub(crate) fn size_histogram(sizes: &[usize]) -> BTreeMap<String, usize> {
    let mut bins: BTreeMap<u32, usize> = BTreeMap::new();
    for &s in sizes {
        *bins.entry(s.max(1).ilog2()).or_insert(0) += 1;
    }
    bins.into_iter()
        .map(|(b, count)| {
            let lo = 1usize << b;
            let hi = (lo << 1) - 1;
            let key = if lo == hi {
                lo.to_string()
            } else {
                format!("{lo}-{hi}")
            };
            (key, count)
        })
        .collect()
}
