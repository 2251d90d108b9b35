//! Binary decision trees shared by the single tree, the forest and the
//! boosting ensemble.
//!
//! Splits use midpoints between consecutive distinct values. Among equally
//! good splits the lowest feature index wins, then the lowest threshold.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Shannon entropy of 0/1 targets.
    Entropy,
    /// Mean squared error of real targets.
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    /// Features examined per split; `None` means all of them.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        value: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

fn entropy(pos: f64, n: f64) -> f64 {
    let mut h = 0.0;
    for c in [pos, n - pos] {
        if c > 0.0 {
            let p = c / n;
            h -= p * p.log2();
        }
    }
    h
}

fn impurity(criterion: Criterion, sum: f64, sum_sq: f64, n: f64) -> f64 {
    match criterion {
        Criterion::Entropy => entropy(sum, n),
        Criterion::Mse => (sum_sq / n - (sum / n).powi(2)).max(0.0),
    }
}

struct Builder<'a, R> {
    x: ArrayView2<'a, f64>,
    target: &'a [f64],
    params: TreeParams,
    rng: Option<&'a mut R>,
    nodes: Vec<Node>,
}

struct Candidate {
    cost: f64,
    feature: usize,
    threshold: f64,
}

impl<R: Rng> Builder<'_, R> {
    fn leaf(&self, idx: &[usize]) -> Node {
        let sum: f64 = idx.iter().map(|&i| self.target[i]).sum();
        Node::Leaf {
            value: sum / idx.len() as f64,
            samples: idx.len(),
        }
    }

    /// Best split on one feature, or `None` if the feature is constant here.
    fn best_on_feature(&self, idx: &mut [usize], feature: usize) -> Option<Candidate> {
        let col = self.x.column(feature);
        idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
        let n = idx.len() as f64;
        let (total, total_sq) = idx.iter().fold((0.0, 0.0), |(s, q), &i| {
            let t = self.target[i];
            (s + t, q + t * t)
        });
        let (mut s, mut q) = (0.0, 0.0);
        let mut best: Option<Candidate> = None;
        for k in 0..idx.len() - 1 {
            let t = self.target[idx[k]];
            s += t;
            q += t * t;
            let (here, next) = (col[idx[k]], col[idx[k + 1]]);
            if !(next > here) {
                continue;
            }
            let nl = (k + 1) as f64;
            let nr = n - nl;
            let cost = nl * impurity(self.params.criterion, s, q, nl)
                + nr * impurity(self.params.criterion, total - s, total_sq - q, nr);
            let mut threshold = here + (next - here) / 2.0;
            if !(threshold < next) {
                threshold = here;
            }
            if best.as_ref().is_none_or(|b| cost < b.cost - 1e-12 * b.cost.abs().max(1e-300)) {
                best = Some(Candidate { cost, feature, threshold });
            }
        }
        best
    }

    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(self.leaf(idx));
        let n = idx.len();
        let (sum, sum_sq) = idx.iter().fold((0.0, 0.0), |(s, q), &i| {
            let t = self.target[i];
            (s + t, q + t * t)
        });
        let parent = impurity(self.params.criterion, sum, sum_sq, n as f64);
        if n < self.params.min_samples_split
            || n < 2
            || parent <= 1e-12
            || self.params.max_depth.is_some_and(|d| depth >= d)
        {
            return id;
        }

        let d = self.x.ncols();
        let mut order: Vec<usize> = (0..d).collect();
        let limit = match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < d => {
                order.shuffle(rng);
                m
            }
            _ => d,
        };
        let mut best: Option<Candidate> = None;
        let mut examined = 0;
        for &feature in &order {
            if examined >= limit {
                break;
            }
            let Some(c) = self.best_on_feature(idx, feature) else {
                continue;
            };
            examined += 1;
            let better = match &best {
                None => true,
                Some(b) => {
                    let tol = 1e-12 * b.cost.abs().max(1e-300);
                    c.cost < b.cost - tol
                        || ((c.cost - b.cost).abs() <= tol
                            && (c.feature, c.threshold) < (b.feature, b.threshold))
                }
            };
            if better {
                best = Some(c);
            }
        }
        let Some(split) = best else {
            return id;
        };

        let col = self.x.column(split.feature);
        idx.sort_unstable();
        let mid = stable_partition(idx, |i| col[i] <= split.threshold);
        let (left_idx, right_idx) = idx.split_at_mut(mid);
        let left = self.build(left_idx, depth + 1);
        let right = self.build(right_idx, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

/// Stable partition; returns the number of elements satisfying `pred`.
fn stable_partition(idx: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (yes, no): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| pred(i));
    let k = yes.len();
    idx[..k].copy_from_slice(&yes);
    idx[k..].copy_from_slice(&no);
    k
}

impl Tree {
    /// Grows a tree on the rows listed in `rows` (repeats allowed). Feature
    /// subsampling needs `rng`.
    pub fn fit<R: Rng>(
        x: ArrayView2<f64>,
        target: &[f64],
        rows: &[usize],
        params: TreeParams,
        rng: Option<&mut R>,
    ) -> Tree {
        let mut builder = Builder {
            x,
            target,
            params,
            rng,
            nodes: Vec::new(),
        };
        let mut idx = rows.to_vec();
        if !idx.is_empty() {
            builder.build(&mut idx, 0);
        }
        Tree { nodes: builder.nodes }
    }

    pub fn leaf_index(&self, row: ArrayView1<f64>) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { .. } => return at,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict(&self, row: ArrayView1<f64>) -> f64 {
        match &self.nodes[self.leaf_index(row)] {
            Node::Leaf { value, .. } => *value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Overwrites the value of a leaf.
    pub fn set_leaf_value(&mut self, leaf: usize, v: f64) {
        if let Node::Leaf { value, .. } = &mut self.nodes[leaf] {
            *value = v;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecisionTreeParams {
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for DecisionTreeParams {
    fn default() -> Self {
        DecisionTreeParams {
            min_samples_split: 5,
            max_depth: None,
            seed: 0,
        }
    }
}

/// Entropy-criterion classification tree; scores are leaf positive fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    pub tree: Tree,
}

impl DecisionTreeModel {
    pub fn fit(x: ArrayView2<f64>, y: &[bool], params: &DecisionTreeParams) -> Self {
        let target: Vec<f64> = y.iter().map(|&b| f64::from(u8::from(b))).collect();
        let rows: Vec<usize> = (0..x.nrows()).collect();
        let tp = TreeParams {
            criterion: Criterion::Entropy,
            min_samples_split: params.min_samples_split,
            max_depth: params.max_depth,
            max_features: None,
        };
        DecisionTreeModel {
            tree: Tree::fit::<rand_chacha::ChaCha8Rng>(x, &target, &rows, tp, None),
        }
    }

    pub fn score(&self, row: ArrayView1<f64>) -> f64 {
        self.tree.predict(row)
    }
}
