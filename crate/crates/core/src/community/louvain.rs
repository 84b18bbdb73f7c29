use rand::seq::SliceRandom;

use super::level::Level;
use super::partition::Partition;
use crate::graph::FollowerGraph;
use crate::seed;

/// Gains closer than this are treated as equal.
const GAIN_TOLERANCE: f64 = 1e-12;

/// Independent runs per call; the partition with the highest modularity wins.
pub const RESTARTS: usize = 10;

/// Emitted after every local-move pass.
#[derive(Debug, Clone, PartialEq)]
pub struct PassEvent {
    pub restart: usize,
    pub level: usize,
    pub pass: usize,
    pub moves: usize,
    pub modularity_before: f64,
    pub modularity_after: f64,
}

/// Louvain modularity maximisation with a seeded node visit order.
///
/// Every pass visits the nodes of the current level in a fresh shuffle and
/// moves each node to the neighbouring community with the largest strictly
/// positive gain (ties go to the lowest community id). Passes repeat until
/// none moves a node, then communities are collapsed into super-nodes and
/// the process restarts on the coarser graph. It stops when a level
/// produces no move.
///
/// The whole procedure runs [`RESTARTS`] times, first with `seed` and then
/// with seeds derived from it. The first run reaching the highest
/// modularity is returned.
pub fn louvain(g: &FollowerGraph, seed: u64) -> Partition {
    louvain_observed(g, seed, &mut |_| {})
}

/// As [`louvain`], reporting every pass to `observer`.
pub fn louvain_observed(
    g: &FollowerGraph,
    seed: u64,
    observer: &mut dyn FnMut(&PassEvent),
) -> Partition {
    let n = g.node_count();
    if n == 0 {
        return Partition::singletons(0);
    }
    let base = Level::from_graph(g);
    if base.m <= 0.0 {
        return Partition::singletons(n);
    }
    let mut best: Option<(f64, Partition)> = None;
    for restart in 0..RESTARTS {
        let run_seed = if restart == 0 {
            seed
        } else {
            seed::derive_index(seed, restart as u64)
        };
        let p = single_run(&base, run_seed, restart, observer);
        let q = base.modularity(p.assignment(), p.num_communities());
        if best.as_ref().is_none_or(|(bq, _)| q > *bq) {
            best = Some((q, p));
        }
    }
    best.expect("at least one run").1
}

fn single_run(
    base: &Level,
    seed: u64,
    restart: usize,
    observer: &mut dyn FnMut(&PassEvent),
) -> Partition {
    let n = base.len();
    let mut level = base.clone();
    let mut rng = seed::rng(seed);
    // Community of every original node, in terms of the current level's nodes.
    let mut node_to_super: Vec<usize> = (0..n).collect();

    for depth in 0.. {
        let (assignment, moved) = local_moves(&level, restart, depth, &mut rng, observer);
        if !moved {
            break;
        }
        let (dense, count) = renumber(&assignment);
        for s in node_to_super.iter_mut() {
            *s = dense[*s];
        }
        if count == level.len() {
            break;
        }
        level = level.aggregate(&dense, count);
    }
    Partition::from_labels(&node_to_super)
}

/// Run passes until one makes no move. Returns the final assignment and
/// whether any node changed community.
fn local_moves(
    level: &Level,
    restart: usize,
    depth: usize,
    rng: &mut impl rand::Rng,
    observer: &mut dyn FnMut(&PassEvent),
) -> (Vec<usize>, bool) {
    let n = level.len();
    let m = level.m;
    let two_m = 2.0 * m;
    let mut community: Vec<usize> = (0..n).collect();
    let mut tot: Vec<f64> = level.degree.clone();
    let mut neighbour_weight = vec![0.0f64; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    let mut any_move = false;

    for pass in 0.. {
        let before = level.modularity(&community, n);
        order.shuffle(rng);
        let mut moves = 0;
        for &node in &order {
            let k = level.degree[node];
            let own = community[node];

            for &(nb, w) in &level.adj[node] {
                let c = community[nb];
                if neighbour_weight[c] == 0.0 {
                    touched.push(c);
                }
                neighbour_weight[c] += w;
            }

            tot[own] -= k;
            let gain = |c: usize, nw: f64| nw - tot[c] * k / two_m;
            let mut best = own;
            let mut best_gain = gain(own, neighbour_weight[own]);
            touched.sort_unstable();
            for &c in &touched {
                if c == own {
                    continue;
                }
                let g = gain(c, neighbour_weight[c]);
                // `touched` is ascending, so the first of several tied
                // candidates wins.
                if g > best_gain + GAIN_TOLERANCE {
                    best = c;
                    best_gain = g;
                }
            }
            tot[best] += k;
            if best != own {
                community[node] = best;
                moves += 1;
            }

            for &c in &touched {
                neighbour_weight[c] = 0.0;
            }
            touched.clear();
        }
        let after = level.modularity(&community, n);
        observer(&PassEvent {
            restart,
            level: depth,
            pass,
            moves,
            modularity_before: before,
            modularity_after: after,
        });
        if moves == 0 {
            break;
        }
        any_move = true;
    }
    (community, any_move)
}

/// Map labels to `0..count` in order of first appearance.
fn renumber(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = vec![usize::MAX; labels.len()];
    let mut next = 0;
    let dense = labels
        .iter()
        .map(|&l| {
            if map[l] == usize::MAX {
                map[l] = next;
                next += 1;
            }
            map[l]
        })
        .collect();
    (dense, next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::community::modularity;

    fn two_triangles() -> FollowerGraph {
        FollowerGraph::with_nodes(
            6,
            &[
                (0, 1, 1.0),
                (1, 2, 1.0),
                (0, 2, 1.0),
                (3, 4, 1.0),
                (4, 5, 1.0),
                (3, 5, 1.0),
            ],
        )
    }

    #[test]
    fn finds_the_two_triangles() {
        for seed in 0..20 {
            let p = louvain(&two_triangles(), seed);
            assert_eq!(
                p,
                Partition::from_labels(&[0, 0, 0, 1, 1, 1]),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn single_edge_joins() {
        let g = FollowerGraph::with_nodes(2, &[(0, 1, 1.0)]);
        assert_eq!(louvain(&g, 3).num_communities(), 1);
    }

    #[test]
    fn edgeless_graph_stays_singletons() {
        let g = FollowerGraph::with_nodes(4, &[]);
        assert_eq!(louvain(&g, 0), Partition::singletons(4));
    }

    #[test]
    fn isolated_nodes_remain_alone() {
        let g = FollowerGraph::with_nodes(5, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]);
        let p = louvain(&g, 9);
        assert_eq!(p.assignment(), &[0, 0, 0, 1, 2]);
    }

    #[test]
    fn passes_never_decrease_modularity() {
        // Ring of 5-cliques joined by single edges.
        let mut edges = Vec::new();
        let cliques = 8;
        for c in 0..cliques {
            let base = c * 5;
            for i in 0..5 {
                for j in i + 1..5 {
                    edges.push((base + i, base + j, 1.0));
                }
            }
            edges.push((base + 4, (base + 5) % (cliques * 5), 1.0));
        }
        let g = FollowerGraph::with_nodes(cliques * 5, &edges);
        let mut events = Vec::new();
        let p = louvain_observed(&g, 11, &mut |e| events.push(e.clone()));
        assert!(!events.is_empty());
        for e in &events {
            assert!(
                e.modularity_after >= e.modularity_before - 1e-12,
                "pass {e:?} decreased modularity"
            );
        }
        assert_eq!(p.num_communities(), cliques);
        let q = modularity(&g, &p).unwrap();
        assert!(q > modularity(&g, &Partition::singletons(g.node_count())).unwrap());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let mut edges = Vec::new();
        for i in 0..30usize {
            edges.push((i, (i * 7 + 3) % 30, 1.0 + (i % 3) as f64));
            edges.push((i, (i + 1) % 30, 0.5));
        }
        let g = FollowerGraph::with_nodes(30, &edges);
        assert_eq!(louvain(&g, 5), louvain(&g, 5));
    }
}
