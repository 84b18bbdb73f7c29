use crate::graph::FollowerGraph;

/// Weighted undirected graph with optional self-loops, the working
/// representation for Louvain. A self-loop of weight `w` contributes `w` to
/// the community's internal weight and `2w` to the node's degree.
#[derive(Debug, Clone)]
pub(crate) struct Level {
    pub adj: Vec<Vec<(usize, f64)>>,
    pub self_loops: Vec<f64>,
    pub degree: Vec<f64>,
    /// Total edge weight, self-loops included once.
    pub m: f64,
}

impl Level {
    pub fn from_graph(g: &FollowerGraph) -> Self {
        let n = g.node_count();
        let adj: Vec<Vec<(usize, f64)>> = (0..n).map(|u| g.neighbors(u).to_vec()).collect();
        Self::new(adj, vec![0.0; n])
    }

    pub fn new(adj: Vec<Vec<(usize, f64)>>, self_loops: Vec<f64>) -> Self {
        let degree: Vec<f64> = adj
            .iter()
            .zip(&self_loops)
            .map(|(list, &s)| list.iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * s)
            .collect();
        let m = degree.iter().sum::<f64>() / 2.0;
        Level {
            adj,
            self_loops,
            degree,
            m,
        }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    /// Q = Σ_c [ in_c / m − (tot_c / 2m)² ] for a dense assignment.
    pub fn modularity(&self, assignment: &[usize], communities: usize) -> f64 {
        let mut inside = vec![0.0; communities];
        let mut tot = vec![0.0; communities];
        for u in 0..self.len() {
            let c = assignment[u];
            tot[c] += self.degree[u];
            inside[c] += self.self_loops[u];
            for &(v, w) in &self.adj[u] {
                if u < v && assignment[v] == c {
                    inside[c] += w;
                }
            }
        }
        let two_m = 2.0 * self.m;
        inside
            .iter()
            .zip(&tot)
            .map(|(&i, &t)| i / self.m - (t / two_m) * (t / two_m))
            .sum()
    }

    /// Collapse each community into a single node.
    pub fn aggregate(&self, assignment: &[usize], communities: usize) -> Level {
        let mut self_loops = vec![0.0; communities];
        let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
        for u in 0..self.len() {
            let cu = assignment[u];
            self_loops[cu] += self.self_loops[u];
            for &(v, w) in &self.adj[u] {
                if u < v {
                    let cv = assignment[v];
                    if cu == cv {
                        self_loops[cu] += w;
                    } else {
                        pairs.push((cu.min(cv), cu.max(cv), w));
                    }
                }
            }
        }
        pairs.sort_by_key(|p| (p.0, p.1));
        let mut adj = vec![Vec::new(); communities];
        let mut iter = pairs.into_iter().peekable();
        while let Some((a, b, mut w)) = iter.next() {
            while let Some(&(a2, b2, w2)) = iter.peek() {
                if a2 == a && b2 == b {
                    w += w2;
                    iter.next();
                } else {
                    break;
                }
            }
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        for list in &mut adj {
            list.sort_by_key(|&(t, _)| t);
        }
        Level::new(adj, self_loops)
    }
}
