use rand::Rng;
use serde::{Deserialize, Serialize};

use super::svm::check_labels;
use super::tfidf::SparseVector;
use crate::error::Result;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features tried per split; `None` means `sqrt(dim)`.
    pub max_features: Option<usize>,
    /// Set per fold and criterion from the credibility seed.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            max_features: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        positive: bool,
    },
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &SparseVector) -> bool {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                Node::Leaf { positive } => return positive,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x.get(feature) <= threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, at: usize) -> usize {
            match t.nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + go(t, left as usize).max(go(t, right as usize))
                }
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<Tree>,
}

impl RandomForest {
    /// Majority vote; an even split predicts negative.
    pub fn predict(&self, x: &SparseVector) -> bool {
        let votes = self.trees.iter().filter(|t| t.predict(x)).count();
        2 * votes > self.trees.len()
    }
}

/// Bagged CART trees on Gini impurity. Each tree sees a bootstrap sample
/// and tries `max_features` randomly chosen features at every split. Tree
/// `i` draws from its own stream derived from `cfg.seed` and `i`.
pub fn train_rf(
    x: &[SparseVector],
    dim: usize,
    y: &[bool],
    cfg: &ForestConfig,
) -> Result<RandomForest> {
    assert_eq!(x.len(), y.len(), "one label per example");
    check_labels(y)?;
    let columns = Columns::new(x, dim);
    let max_features = cfg
        .max_features
        .unwrap_or_else(|| (dim as f64).sqrt().floor() as usize)
        .max(1);
    let trees = (0..cfg.n_trees)
        .map(|i| {
            let mut rng = seed::rng(seed::derive_index(cfg.seed, i as u64));
            let mut counts = vec![0u32; x.len()];
            for _ in 0..x.len() {
                counts[rng.gen_range(0..x.len())] += 1;
            }
            let mut builder = TreeBuilder {
                x,
                y,
                columns: &columns,
                cfg,
                max_features,
                weight: vec![0; x.len()],
                stamp: vec![usize::MAX; dim],
                nodes: Vec::new(),
            };
            let sample: Vec<(usize, u32)> = counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(i, &c)| (i, c))
                .collect();
            builder.build(sample, &mut rng);
            Tree {
                nodes: builder.nodes,
            }
        })
        .collect();
    Ok(RandomForest { trees })
}

/// Column-major view of the training matrix: per feature, the examples
/// with a non-zero value.
struct Columns {
    entries: Vec<Vec<(u32, f64)>>,
}

impl Columns {
    fn new(x: &[SparseVector], dim: usize) -> Self {
        let mut entries = vec![Vec::new(); dim];
        for (i, row) in x.iter().enumerate() {
            for (j, v) in row.iter() {
                entries[j as usize].push((i as u32, v));
            }
        }
        Columns { entries }
    }
}

struct TreeBuilder<'a> {
    x: &'a [SparseVector],
    y: &'a [bool],
    columns: &'a Columns,
    cfg: &'a ForestConfig,
    max_features: usize,
    /// Bootstrap multiplicity of each example in the node being split.
    weight: Vec<u32>,
    /// Marks features already collected for the current node.
    stamp: Vec<usize>,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: u32,
    threshold: f64,
    impurity: f64,
}

fn gini_weighted(pos: f64, neg: f64) -> f64 {
    let total = pos + neg;
    if total == 0.0 {
        return 0.0;
    }
    // total * gini = total - (pos² + neg²)/total
    total - (pos * pos + neg * neg) / total
}

impl TreeBuilder<'_> {
    fn build(&mut self, root: Vec<(usize, u32)>, rng: &mut impl Rng) {
        // (samples, depth, slot to patch in the parent)
        let mut stack: Vec<(Vec<(usize, u32)>, usize, Option<(usize, bool)>)> =
            vec![(root, 0, None)];
        while let Some((samples, depth, parent)) = stack.pop() {
            let id = self.nodes.len();
            if let Some((p, is_left)) = parent {
                if let Node::Split { left, right, .. } = &mut self.nodes[p] {
                    if is_left {
                        *left = id as u32;
                    } else {
                        *right = id as u32;
                    }
                }
            }
            let (pos, neg) = self.class_weights(&samples);
            let leaf = Node::Leaf {
                positive: pos > neg,
            };
            let depth_capped = self.cfg.max_depth.is_some_and(|d| depth >= d);
            if pos == 0 || neg == 0 || depth_capped || samples.len() < 2 * self.cfg.min_samples_leaf
            {
                self.nodes.push(leaf);
                continue;
            }
            let Some(split) = self.best_split(&samples, id, rng) else {
                self.nodes.push(leaf);
                continue;
            };
            let (left, right): (Vec<_>, Vec<_>) = samples
                .into_iter()
                .partition(|&(i, _)| self.x[i].get(split.feature) <= split.threshold);
            self.nodes.push(Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: 0,
                right: 0,
            });
            // Right pushed first so the left subtree is laid out first.
            stack.push((right, depth + 1, Some((id, false))));
            stack.push((left, depth + 1, Some((id, true))));
        }
    }

    fn class_weights(&self, samples: &[(usize, u32)]) -> (u64, u64) {
        let mut pos = 0u64;
        let mut neg = 0u64;
        for &(i, c) in samples {
            if self.y[i] {
                pos += u64::from(c);
            } else {
                neg += u64::from(c);
            }
        }
        (pos, neg)
    }

    fn best_split(
        &mut self,
        samples: &[(usize, u32)],
        node_id: usize,
        rng: &mut impl Rng,
    ) -> Option<BestSplit> {
        // Features that are non-zero somewhere in this node; every other
        // feature is constant (zero) here and cannot split it.
        let mut candidates: Vec<u32> = Vec::new();
        for &(i, c) in samples {
            self.weight[i] = c;
            for &j in &self.x[i].indices {
                if self.stamp[j as usize] != node_id {
                    self.stamp[j as usize] = node_id;
                    candidates.push(j);
                }
            }
        }
        candidates.sort_unstable();
        let (pos, neg) = self.class_weights(samples);
        let (pos, neg) = (pos as f64, neg as f64);

        let mut best: Option<BestSplit> = None;
        let mut tried = 0;
        let mut remaining = candidates.len();
        let mut values: Vec<(f64, f64, f64)> = Vec::new();
        while tried < self.max_features && remaining > 0 {
            let pick = rng.gen_range(0..remaining);
            candidates.swap(pick, remaining - 1);
            remaining -= 1;
            let feature = candidates[remaining];

            values.clear();
            let (mut nz_pos, mut nz_neg) = (0.0, 0.0);
            for &(i, v) in &self.columns.entries[feature as usize] {
                let c = self.weight[i as usize];
                if c == 0 {
                    continue;
                }
                let c = f64::from(c);
                if self.y[i as usize] {
                    values.push((v, c, 0.0));
                    nz_pos += c;
                } else {
                    values.push((v, 0.0, c));
                    nz_neg += c;
                }
            }
            let (zero_pos, zero_neg) = (pos - nz_pos, neg - nz_neg);
            if zero_pos + zero_neg > 0.0 {
                values.push((0.0, zero_pos, zero_neg));
            }
            values.sort_by(|a, b| a.0.total_cmp(&b.0));
            if values.first().map(|v| v.0) == values.last().map(|v| v.0) {
                continue;
            }
            tried += 1;

            let (mut lp, mut ln) = (0.0, 0.0);
            let min_leaf = self.cfg.min_samples_leaf as f64;
            for k in 0..values.len() - 1 {
                lp += values[k].1;
                ln += values[k].2;
                if values[k].0 == values[k + 1].0 {
                    continue;
                }
                let (rp, rn) = (pos - lp, neg - ln);
                if lp + ln < min_leaf || rp + rn < min_leaf {
                    continue;
                }
                let impurity = gini_weighted(lp, ln) + gini_weighted(rp, rn);
                if best.as_ref().is_none_or(|b| impurity < b.impurity - 1e-12) {
                    let threshold = values[k].0 + (values[k + 1].0 - values[k].0) / 2.0;
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        for &(i, _) in samples {
            self.weight[i] = 0;
        }
        best
    }
}
