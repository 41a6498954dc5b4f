//! Binary classification trees grown on weighted Gini impurity.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::FEATURE_COUNT;

/// Features examined per split: `floor(sqrt(FEATURE_COUNT))`.
pub const MAX_FEATURES: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { p_qe: f64, p_wocc: f64 },
}

/// Flat tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    /// Probability of the WOCC class for `x`.
    pub fn p_wocc(&self, x: &[f64; FEATURE_COUNT]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { p_wocc, .. } => return *p_wocc,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitRule {
    /// One uniformly random threshold per candidate feature.
    Random,
    /// Best midpoint between consecutive distinct values.
    Best,
}

#[derive(Debug, Clone, Copy)]
pub struct GrowParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub rule: SplitRule,
}

/// Training view: feature rows, class (true = WOCC) and sample weight.
pub struct TrainSet<'a> {
    pub x: &'a [[f64; FEATURE_COUNT]],
    pub y: &'a [bool],
    pub w: &'a [f64],
}

#[derive(Clone, Copy, Default)]
struct Tally {
    count: [usize; 2],
    weight: [f64; 2],
}

impl Tally {
    fn add(&mut self, class: bool, w: f64) {
        self.count[class as usize] += 1;
        self.weight[class as usize] += w;
    }

    fn remove(&mut self, class: bool, w: f64) {
        self.count[class as usize] -= 1;
        self.weight[class as usize] -= w;
    }

    fn total(&self) -> usize {
        self.count[0] + self.count[1]
    }

    /// Weighted Gini impurity times total weight.
    fn weighted_gini(&self) -> f64 {
        let total = self.weight[0] + self.weight[1];
        if total <= 0.0 {
            return 0.0;
        }
        let p = self.weight[1] / total;
        total * 2.0 * p * (1.0 - p)
    }

    fn leaf(&self) -> TreeNode {
        let total = self.weight[0] + self.weight[1];
        let p_wocc = if total > 0.0 {
            self.weight[1] / total
        } else {
            self.count[1] as f64 / self.total() as f64
        };
        TreeNode::Leaf {
            p_qe: 1.0 - p_wocc,
            p_wocc,
        }
    }
}

pub fn grow<R: Rng>(data: &TrainSet<'_>, samples: Vec<usize>, params: &GrowParams, rng: &mut R) -> DecisionTree {
    let mut nodes = Vec::new();
    build(data, samples, 0, params, rng, &mut nodes);
    DecisionTree { nodes }
}

fn tally(data: &TrainSet<'_>, samples: &[usize]) -> Tally {
    let mut t = Tally::default();
    for &i in samples {
        t.add(data.y[i], data.w[i]);
    }
    t
}

fn build<R: Rng>(
    data: &TrainSet<'_>,
    samples: Vec<usize>,
    depth: usize,
    params: &GrowParams,
    rng: &mut R,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let here = nodes.len();
    let t = tally(data, &samples);
    nodes.push(t.leaf());

    let pure = t.count[0] == 0 || t.count[1] == 0;
    if pure || depth >= params.max_depth || samples.len() < params.min_samples_split {
        return here;
    }
    let Some((feature, threshold)) = choose_split(data, &samples, &t, params, rng) else {
        return here;
    };
    let (left, right): (Vec<usize>, Vec<usize>) = samples
        .into_iter()
        .partition(|&i| data.x[i][feature] <= threshold);
    let l = build(data, left, depth + 1, params, rng, nodes);
    let r = build(data, right, depth + 1, params, rng, nodes);
    nodes[here] = TreeNode::Split {
        feature,
        threshold,
        left: l,
        right: r,
    };
    here
}

fn choose_split<R: Rng>(
    data: &TrainSet<'_>,
    samples: &[usize],
    parent: &Tally,
    params: &GrowParams,
    rng: &mut R,
) -> Option<(usize, f64)> {
    let mut features: Vec<usize> = (0..FEATURE_COUNT).collect();
    features.shuffle(rng);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut examined = 0;
    for feature in features {
        if examined == MAX_FEATURES {
            break;
        }
        let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            let v = data.x[i][feature];
            (lo.min(v), hi.max(v))
        });
        if !(hi > lo) {
            continue;
        }
        examined += 1;
        let candidate = match params.rule {
            SplitRule::Random => {
                let threshold = rng.gen_range(lo..hi);
                random_split_score(data, samples, feature, threshold, params)
                    .map(|score| (score, threshold))
            }
            SplitRule::Best => best_split_on(data, samples, parent, feature, params),
        };
        if let Some((score, threshold)) = candidate {
            if best.map_or(true, |(s, _, _)| score < s) {
                best = Some((score, feature, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

fn random_split_score(
    data: &TrainSet<'_>,
    samples: &[usize],
    feature: usize,
    threshold: f64,
    params: &GrowParams,
) -> Option<f64> {
    let mut left = Tally::default();
    let mut right = Tally::default();
    for &i in samples {
        if data.x[i][feature] <= threshold {
            left.add(data.y[i], data.w[i]);
        } else {
            right.add(data.y[i], data.w[i]);
        }
    }
    if left.total() < params.min_samples_leaf || right.total() < params.min_samples_leaf {
        return None;
    }
    Some(left.weighted_gini() + right.weighted_gini())
}

fn best_split_on(
    data: &TrainSet<'_>,
    samples: &[usize],
    parent: &Tally,
    feature: usize,
    params: &GrowParams,
) -> Option<(f64, f64)> {
    let mut order = samples.to_vec();
    order.sort_by(|&a, &b| data.x[a][feature].total_cmp(&data.x[b][feature]));
    let mut left = Tally::default();
    let mut right = *parent;
    let mut best: Option<(f64, f64)> = None;
    for pair in order.windows(2) {
        let (i, next) = (pair[0], pair[1]);
        left.add(data.y[i], data.w[i]);
        right.remove(data.y[i], data.w[i]);
        let (a, b) = (data.x[i][feature], data.x[next][feature]);
        if a == b {
            continue;
        }
        if left.total() < params.min_samples_leaf || right.total() < params.min_samples_leaf {
            continue;
        }
        let score = left.weighted_gini() + right.weighted_gini();
        if best.map_or(true, |(s, _)| score < s) {
            let mut threshold = a + (b - a) / 2.0;
            if threshold >= b {
                threshold = a;
            }
            best = Some((score, threshold));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn separable() -> (Vec<[f64; 5]>, Vec<bool>, Vec<f64>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let v = i as f64 / 20.0;
            x.push([v, 1.0 - v, 0.5, 0.5, 0.5]);
            y.push(v > 0.5);
        }
        let w = vec![1.0; x.len()];
        (x, y, w)
    }

    #[test]
    fn best_rule_separates_perfectly() {
        let (x, y, w) = separable();
        let data = TrainSet { x: &x, y: &y, w: &w };
        let params = GrowParams {
            max_depth: 5,
            min_samples_split: 2,
            min_samples_leaf: 1,
            rule: SplitRule::Best,
        };
        let tree = grow(&data, (0..x.len()).collect(), &params, &mut ChaCha8Rng::seed_from_u64(1));
        for (xi, &yi) in x.iter().zip(&y) {
            assert_eq!(tree.p_wocc(xi) > 0.5, yi);
        }
    }

    #[test]
    fn depth_limit_is_respected() {
        let (x, y, w) = separable();
        let data = TrainSet { x: &x, y: &y, w: &w };
        for depth in [0, 1, 3] {
            let params = GrowParams {
                max_depth: depth,
                min_samples_split: 2,
                min_samples_leaf: 1,
                rule: SplitRule::Random,
            };
            let tree = grow(&data, (0..x.len()).collect(), &params, &mut ChaCha8Rng::seed_from_u64(3));
            assert!(tree.depth() <= depth);
        }
    }

    #[test]
    fn leaves_respect_min_samples_leaf() {
        let (x, y, w) = separable();
        let data = TrainSet { x: &x, y: &y, w: &w };
        let params = GrowParams {
            max_depth: 20,
            min_samples_split: 2,
            min_samples_leaf: 5,
            rule: SplitRule::Best,
        };
        let tree = grow(&data, (0..x.len()).collect(), &params, &mut ChaCha8Rng::seed_from_u64(0));
        let mut counts = vec![0usize; tree.nodes.len()];
        for xi in &x {
            let mut at = 0;
            while let TreeNode::Split { feature, threshold, left, right } = &tree.nodes[at] {
                at = if xi[*feature] <= *threshold { *left } else { *right };
            }
            counts[at] += 1;
        }
        for (i, node) in tree.nodes.iter().enumerate() {
            if matches!(node, TreeNode::Leaf { .. }) {
                assert!(counts[i] >= 5);
            }
        }
    }
}
