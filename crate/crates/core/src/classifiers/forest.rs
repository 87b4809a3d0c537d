//! CART classification trees with Gini impurity, bagged into a random forest.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::CommandLabel;

/// Candidate features examined at each split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, n_features: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (n_features as f64).sqrt().floor() as usize,
            MaxFeatures::All => n_features,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("forest needs at least one tree"));
        }
        if self.min_leaf == 0 {
            return Err(Error::invalid("min_leaf must be at least 1"));
        }
        Ok(())
    }
}

/// Gini impurity `1 - sum_k p_k^2` of a class-count histogram.
pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Flat tree; node 0 is the root. `class` indices refer to the owning
/// model's class list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

struct TreeBuilder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [usize],
    n_classes: usize,
    max_depth: Option<usize>,
    min_leaf: usize,
    mtry: usize,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
    pivot: usize,
}

impl TreeBuilder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    fn build(&mut self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let counts = self.counts(idx);
        let majority = majority(&counts);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = self.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || idx.len() < 2 * self.min_leaf {
            return self.push(Node::Leaf { class: majority });
        }
        let Some(best) = self.best_split(idx, &counts, rng) else {
            return self.push(Node::Leaf { class: majority });
        };
        idx.sort_by(|&a, &b| self.x[[a, best.feature]].total_cmp(&self.x[[b, best.feature]]));
        let slot = self.push(Node::Leaf { class: majority });
        let (l, r) = idx.split_at_mut(best.pivot);
        let left = self.build(l, depth + 1, rng);
        let right = self.build(r, depth + 1, rng);
        self.nodes[slot] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        slot
    }

    fn push(&mut self, node: Node) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    /// Scans a random feature order; stops once `mtry` features have been
    /// examined and at least one admissible split exists.
    fn best_split(
        &self,
        idx: &[usize],
        parent: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Option<BestSplit> {
        let n_features = self.x.ncols();
        let mut order: Vec<usize> = (0..n_features).collect();
        order.shuffle(rng);
        let n = idx.len();
        let mut best: Option<BestSplit> = None;
        let mut sorted = idx.to_vec();
        for (visited, &f) in order.iter().enumerate() {
            if visited >= self.mtry && best.is_some() {
                break;
            }
            sorted.sort_by(|&a, &b| self.x[[a, f]].total_cmp(&self.x[[b, f]]));
            let mut left = vec![0usize; self.n_classes];
            let mut right = parent.to_vec();
            for pos in 1..n {
                let moved = self.y[sorted[pos - 1]];
                left[moved] += 1;
                right[moved] -= 1;
                if pos < self.min_leaf || n - pos < self.min_leaf {
                    continue;
                }
                let lo = self.x[[sorted[pos - 1], f]];
                let hi = self.x[[sorted[pos], f]];
                if lo >= hi {
                    continue;
                }
                let impurity =
                    (pos as f64 * gini(&left) + (n - pos) as f64 * gini(&right)) / n as f64;
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        impurity,
                        pivot: pos,
                    });
                }
            }
        }
        best
    }
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

impl DecisionTree {
    /// Grows one tree on the rows `idx` of `x`; `y` holds class indices.
    pub fn grow(
        x: ArrayView2<'_, f64>,
        y: &[usize],
        n_classes: usize,
        idx: &mut [usize],
        params: &ForestParams,
        rng: &mut ChaCha8Rng,
    ) -> DecisionTree {
        let mut builder = TreeBuilder {
            x,
            y,
            n_classes,
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
            mtry: params.max_features.resolve(x.ncols()),
            nodes: Vec::new(),
        };
        builder.build(idx, 0, rng);
        DecisionTree {
            nodes: builder.nodes,
        }
    }

    pub fn predict_index(&self, x: ArrayView1<'_, f64>) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { class } => return class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub classes: Vec<CommandLabel>,
    pub n_features: usize,
    pub trees: Vec<DecisionTree>,
}

impl ForestModel {
    pub fn fit(
        x: ArrayView2<'_, f64>,
        labels: &[CommandLabel],
        classes: &[CommandLabel],
        params: &ForestParams,
    ) -> Result<ForestModel> {
        let n = x.nrows();
        let y: Vec<usize> = labels
            .iter()
            .map(|l| classes.binary_search(l).expect("label drawn from classes"))
            .collect();
        let mut master = ChaCha8Rng::seed_from_u64(params.seed);
        let tree_seeds: Vec<u64> = (0..params.n_trees).map(|_| master.next_u64()).collect();
        let trees = tree_seeds
            .into_iter()
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut idx: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                DecisionTree::grow(x, &y, classes.len(), &mut idx, params, &mut rng)
            })
            .collect();
        Ok(ForestModel {
            classes: classes.to_vec(),
            n_features: x.ncols(),
            trees,
        })
    }

    pub fn votes(&self, x: ArrayView1<'_, f64>) -> Vec<usize> {
        let mut votes = vec![0; self.classes.len()];
        for t in &self.trees {
            votes[t.predict_index(x)] += 1;
        }
        votes
    }

    /// Plurality over trees; ties go to the lowest label.
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> CommandLabel {
        self.classes[majority(&self.votes(x))]
    }
}
