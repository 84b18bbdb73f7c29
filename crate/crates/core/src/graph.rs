//! Follower graph construction.
//!
//! Each follower spreads a total weight of 1 evenly over the accounts it
//! follows. Dropping edge direction then sums the two directed weights of
//! every pair into one undirected edge, so the undirected total weight equals
//! the number of users that follow at least one account.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::FollowerEdge;

/// Absolute tolerance used when comparing summed weights.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Dense index over opaque user ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UserIndex {
    ids: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl UserIndex {
    /// Index the ids in the given order. Duplicates are ignored.
    pub fn new<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut index = UserIndex::default();
        for id in ids {
            index.insert(id.into());
        }
        index
    }

    fn insert(&mut self, id: String) -> usize {
        if let Some(&i) = self.lookup.get(&id) {
            return i;
        }
        let i = self.ids.len();
        self.lookup.insert(id.clone(), i);
        self.ids.push(id);
        i
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn index(&self, id: &str) -> Option<usize> {
        self.lookup.get(id).copied()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    users: UserIndex,
    /// Per node, `(target, weight)` sorted by target.
    out_edges: Vec<Vec<(usize, f64)>>,
}

impl DirectedGraph {
    pub fn users(&self) -> &UserIndex {
        &self.users
    }

    pub fn node_count(&self) -> usize {
        self.users.len()
    }

    pub fn out_edges(&self, node: usize) -> &[(usize, f64)] {
        &self.out_edges[node]
    }

    /// Number of users following each node.
    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count()];
        for edges in &self.out_edges {
            for &(t, _) in edges {
                deg[t] += 1;
            }
        }
        deg
    }

    /// Users with at least one outgoing edge.
    pub fn follower_count(&self) -> usize {
        self.out_edges.iter().filter(|e| !e.is_empty()).count()
    }

    pub fn total_weight(&self) -> f64 {
        self.out_edges.iter().flatten().map(|&(_, w)| w).sum()
    }
}

/// Build the normalised directed graph. Node indices follow the sorted order
/// of user ids, so input order does not matter.
pub fn build_directed(edges: &[FollowerEdge]) -> DirectedGraph {
    build_directed_with_users(edges, std::iter::empty::<&str>())
}

/// As [`build_directed`], additionally adding `extra_users` (for example
/// tweet authors missing from the follower file) as nodes.
pub fn build_directed_with_users<'a, I>(edges: &'a [FollowerEdge], extra_users: I) -> DirectedGraph
where
    I: IntoIterator<Item = &'a str>,
{
    let mut ids: Vec<&str> = edges
        .iter()
        .flat_map(|e| [e.from_user.as_str(), e.to_user.as_str()])
        .chain(extra_users)
        .collect();
    ids.sort_unstable();
    ids.dedup();
    let users = UserIndex::new(ids.iter().copied());

    let mut targets: Vec<Vec<usize>> = vec![Vec::new(); users.len()];
    for e in edges {
        if e.from_user == e.to_user {
            continue;
        }
        let from = users.index(&e.from_user).expect("indexed above");
        let to = users.index(&e.to_user).expect("indexed above");
        targets[from].push(to);
    }
    let out_edges = targets
        .into_iter()
        .map(|mut ts| {
            ts.sort_unstable();
            ts.dedup();
            let w = 1.0 / ts.len() as f64;
            ts.into_iter().map(|t| (t, w)).collect()
        })
        .collect();
    DirectedGraph { users, out_edges }
}

/// Weighted undirected graph with no self-edges.
#[derive(Debug, Clone, PartialEq)]
pub struct FollowerGraph {
    users: UserIndex,
    adjacency: Vec<Vec<(usize, f64)>>,
    /// Canonical edge list, `u < v`, sorted.
    edges: Vec<(usize, usize, f64)>,
    total_weight: f64,
}

impl FollowerGraph {
    /// Build from weighted pairs over the given users. Parallel entries for
    /// the same unordered pair are summed; self-pairs and non-positive
    /// weights are ignored.
    pub fn from_weighted_edges(users: UserIndex, pairs: &[(usize, usize, f64)]) -> Self {
        let n = users.len();
        let mut canon: Vec<(usize, usize, f64)> = pairs
            .iter()
            .filter(|&&(u, v, w)| u != v && w > 0.0)
            .map(|&(u, v, w)| {
                assert!(u < n && v < n, "edge ({u},{v}) outside 0..{n}");
                (u.min(v), u.max(v), w)
            })
            .collect();
        canon.sort_by_key(|e| (e.0, e.1));
        let mut edges: Vec<(usize, usize, f64)> = Vec::with_capacity(canon.len());
        for (u, v, w) in canon {
            match edges.last_mut() {
                Some(last) if last.0 == u && last.1 == v => last.2 += w,
                _ => edges.push((u, v, w)),
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v, w) in &edges {
            adjacency[u].push((v, w));
            adjacency[v].push((u, w));
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(t, _)| t);
        }
        let total_weight = edges.iter().map(|e| e.2).sum();
        FollowerGraph {
            users,
            adjacency,
            edges,
            total_weight,
        }
    }

    /// Convenience constructor naming nodes `"0".."n-1"`.
    pub fn with_nodes(n: usize, pairs: &[(usize, usize, f64)]) -> Self {
        Self::from_weighted_edges(UserIndex::new((0..n).map(|i| i.to_string())), pairs)
    }

    pub fn users(&self) -> &UserIndex {
        &self.users
    }

    pub fn node_count(&self) -> usize {
        self.users.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    /// Weight of the pair `{u, v}`, 0 when absent. Symmetric.
    pub fn weight(&self, u: usize, v: usize) -> f64 {
        let list = &self.adjacency[u];
        match list.binary_search_by_key(&v, |&(t, _)| t) {
            Ok(i) => list[i].1,
            Err(_) => 0.0,
        }
    }

    /// Weighted degree.
    pub fn degree(&self, node: usize) -> f64 {
        self.adjacency[node].iter().map(|&(_, w)| w).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Subgraph induced by `nodes` (given as indices of this graph). Node `i`
    /// of the result is `nodes[i]`.
    pub fn induced(&self, nodes: &[usize]) -> FollowerGraph {
        let mut local: HashMap<usize, usize> = HashMap::with_capacity(nodes.len());
        for (i, &n) in nodes.iter().enumerate() {
            local.insert(n, i);
        }
        let mut pairs = Vec::new();
        for (i, &n) in nodes.iter().enumerate() {
            for &(t, w) in &self.adjacency[n] {
                if let Some(&j) = local.get(&t) {
                    if i < j {
                        pairs.push((i, j, w));
                    }
                }
            }
        }
        let users = UserIndex::new(nodes.iter().map(|&n| self.users.id(n).to_string()));
        FollowerGraph::from_weighted_edges(users, &pairs)
    }

    /// Dump `u,v,w` rows with original user ids.
    pub fn write_edge_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["u", "v", "w"])?;
        for &(u, v, w) in &self.edges {
            wtr.write_record([self.users.id(u), self.users.id(v), &w.to_string()])?;
        }
        wtr.flush()
            .map_err(|e| Error::io(Path::new("<edge csv>"), e))?;
        Ok(())
    }
}

/// Drop edge direction, summing `w(u→v) + w(v→u)` for each unordered pair.
pub fn symmetrize(g: &DirectedGraph) -> FollowerGraph {
    let pairs: Vec<(usize, usize, f64)> = g
        .out_edges
        .iter()
        .enumerate()
        .flat_map(|(u, edges)| edges.iter().map(move |&(v, w)| (u, v, w)))
        .collect();
    FollowerGraph::from_weighted_edges(g.users.clone(), &pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edges(pairs: &[(&str, &str)]) -> Vec<FollowerEdge> {
        pairs
            .iter()
            .map(|&(a, b)| FollowerEdge::new(a, b))
            .collect()
    }

    #[test]
    fn equal_split_of_out_weight() {
        let g = build_directed(&edges(&[("a", "b"), ("a", "c"), ("a", "d"), ("a", "e")]));
        let a = g.users().index("a").unwrap();
        assert_eq!(g.out_edges(a).len(), 4);
        assert!(g.out_edges(a).iter().all(|&(_, w)| w == 0.25));
    }

    #[test]
    fn single_followee_has_unit_weight() {
        let g = build_directed(&edges(&[("a", "b")]));
        let a = g.users().index("a").unwrap();
        assert_eq!(g.out_edges(a), &[(g.users().index("b").unwrap(), 1.0)]);
    }

    #[test]
    fn target_only_user_is_a_node() {
        let g = build_directed(&edges(&[("a", "z")]));
        let z = g.users().index("z").unwrap();
        assert!(g.out_edges(z).is_empty());
        assert_eq!(g.in_degrees()[z], 1);
    }

    #[test]
    fn extra_users_become_isolated_nodes() {
        let g = build_directed_with_users(&edges(&[("a", "b")]), ["q"]);
        assert_eq!(g.node_count(), 3);
        let s = symmetrize(&g);
        assert_eq!(s.degree(s.users().index("q").unwrap()), 0.0);
    }

    #[test]
    fn reciprocal_weights_are_summed() {
        // a follows b and c (0.5 each); b follows a, c, d, e (0.25 each).
        let g = build_directed(&edges(&[
            ("a", "b"),
            ("a", "c"),
            ("b", "a"),
            ("b", "c"),
            ("b", "d"),
            ("b", "e"),
        ]));
        let s = symmetrize(&g);
        let (a, b) = (s.users().index("a").unwrap(), s.users().index("b").unwrap());
        assert_eq!(s.weight(a, b), 0.75);
        assert_eq!(s.weight(b, a), 0.75);
    }

    #[test]
    fn one_way_edge_keeps_weight() {
        let s = symmetrize(&build_directed(&edges(&[("a", "b")])));
        assert_eq!(s.weight(0, 1), 1.0);
        assert_eq!(s.edge_count(), 1);
    }

    #[test]
    fn three_cycle() {
        let s = symmetrize(&build_directed(&edges(&[
            ("a", "b"),
            ("b", "c"),
            ("c", "a"),
        ])));
        assert_eq!(s.edge_count(), 3);
        assert!(s.edges().iter().all(|e| e.2 == 1.0));
        assert_eq!(s.total_weight(), 3.0);
    }

    #[test]
    fn input_order_does_not_matter() {
        let e1 = edges(&[("x", "y"), ("y", "z"), ("z", "x"), ("x", "z")]);
        let mut e2 = e1.clone();
        e2.reverse();
        assert_eq!(
            symmetrize(&build_directed(&e1)),
            symmetrize(&build_directed(&e2))
        );
    }

    #[test]
    fn induced_subgraph_keeps_internal_edges() {
        let g = FollowerGraph::with_nodes(4, &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 3.0)]);
        let sub = g.induced(&[1, 2, 3]);
        assert_eq!(sub.edge_count(), 2);
        assert_eq!(sub.weight(0, 1), 2.0);
        assert_eq!(sub.users().id(0), "1");
    }

    #[test]
    fn edge_csv_dump() {
        let g = FollowerGraph::with_nodes(2, &[(0, 1, 0.5)]);
        let mut buf = Vec::new();
        g.write_edge_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "u,v,w\n0,1,0.5\n");
    }
}
