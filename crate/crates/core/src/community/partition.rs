use std::collections::HashMap;
use std::hash::Hash;

use serde::Serialize;

use super::level::Level;
use crate::error::{Error, Result};
use crate::graph::FollowerGraph;

/// Total assignment of nodes to communities.
///
/// Community ids are contiguous from 0 and numbered in order of first
/// appearance when scanning nodes by index, so two partitions that group the
/// nodes identically compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Partition {
    assignment: Vec<usize>,
    communities: usize,
}

impl Partition {
    pub fn from_labels<L: Eq + Hash>(labels: &[L]) -> Self {
        let mut ids: HashMap<&L, usize> = HashMap::new();
        let assignment = labels
            .iter()
            .map(|l| {
                let next = ids.len();
                *ids.entry(l).or_insert(next)
            })
            .collect();
        Partition {
            assignment,
            communities: ids.len(),
        }
    }

    pub fn singletons(n: usize) -> Self {
        Partition {
            assignment: (0..n).collect(),
            communities: n,
        }
    }

    pub fn single_block(n: usize) -> Self {
        Partition {
            assignment: vec![0; n],
            communities: usize::from(n > 0),
        }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn num_communities(&self) -> usize {
        self.communities
    }

    pub fn community_of(&self, node: usize) -> usize {
        self.assignment[node]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.communities];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    /// Members of each community in ascending node order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.communities];
        for (node, &c) in self.assignment.iter().enumerate() {
            members[c].push(node);
        }
        members
    }

    pub fn max_size(&self) -> usize {
        self.sizes().into_iter().max().unwrap_or(0)
    }
}

/// Weighted Newman modularity at resolution 1.
pub fn modularity(g: &FollowerGraph, p: &Partition) -> Result<f64> {
    if p.len() != g.node_count() {
        return Err(Error::PartitionMismatch(g.node_count(), p.len()));
    }
    if g.total_weight() <= 0.0 {
        return Err(Error::ZeroWeight);
    }
    Ok(Level::from_graph(g).modularity(&p.assignment, p.communities))
}
