//! Decision trees: Gini classification trees for the forest, and
//! gradient/Hessian regression trees for the boosters.

use ndarray::{Array2, ArrayView1};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Nodes in preorder; the root is node 0. Rows with `x[feature] <= threshold`
/// go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_value(&self, x: ArrayView1<'_, f64>) -> &[f64] {
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => k = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, k: usize) -> usize {
            match &t.nodes[k] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }
}

fn sorted_by_feature(x: &Array2<f64>, rows: &[usize], feature: usize) -> Vec<usize> {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|&a, &b| x[[a, feature]].total_cmp(&x[[b, feature]]).then(a.cmp(&b)));
    sorted
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    // keep `a <= m < b` so the lower value goes left even when the gap is one ulp
    if m >= b {
        a
    } else {
        m
    }
}

fn candidate_features(d: usize, max_features: Option<usize>, rng: &mut impl Rng) -> Vec<usize> {
    match max_features {
        Some(k) if k < d => {
            let mut f = sample(rng, d, k).into_vec();
            f.sort_unstable();
            f
        }
        _ => (0..d).collect(),
    }
}

pub struct ClassTreeParams {
    pub class_count: usize,
    pub max_depth: usize,
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
}

fn gini(counts: &[f64], n: f64) -> f64 {
    1.0 - counts.iter().map(|c| (c / n) * (c / n)).sum::<f64>()
}

/// Gini classification tree over `rows` (repeats allowed, as in a bootstrap
/// sample). Leaves hold class frequencies.
pub fn fit_classification_tree(
    x: &Array2<f64>,
    y: &[usize],
    rows: &[usize],
    params: &ClassTreeParams,
    rng: &mut impl Rng,
) -> Tree {
    let mut tree = Tree { nodes: Vec::new() };
    grow_class(x, y, rows.to_vec(), 0, params, rng, &mut tree);
    tree
}

fn grow_class(
    x: &Array2<f64>,
    y: &[usize],
    rows: Vec<usize>,
    depth: usize,
    params: &ClassTreeParams,
    rng: &mut impl Rng,
    tree: &mut Tree,
) -> usize {
    let c = params.class_count;
    let mut counts = vec![0.0; c];
    for &r in &rows {
        counts[y[r]] += 1.0;
    }
    let n = rows.len() as f64;
    let id = tree.nodes.len();
    tree.nodes.push(Node::Leaf {
        value: counts.iter().map(|k| k / n).collect(),
    });
    let pure = counts.iter().filter(|&&k| k > 0.0).count() <= 1;
    if pure || depth >= params.max_depth || rows.len() < params.min_samples_split {
        return id;
    }
    let parent = gini(&counts, n);
    let mut best: Option<(f64, usize, f64)> = None;
    for f in candidate_features(x.ncols(), params.max_features, rng) {
        let sorted = sorted_by_feature(x, &rows, f);
        let mut left = vec![0.0; c];
        for k in 0..sorted.len() - 1 {
            left[y[sorted[k]]] += 1.0;
            let (a, b) = (x[[sorted[k], f]], x[[sorted[k + 1], f]]);
            if a == b {
                continue;
            }
            let nl = (k + 1) as f64;
            let nr = n - nl;
            let right: Vec<f64> = counts.iter().zip(&left).map(|(t, l)| t - l).collect();
            let decrease = parent - (nl / n) * gini(&left, nl) - (nr / n) * gini(&right, nr);
            if decrease > 1e-12 && best.is_none_or(|(d, _, _)| decrease > d) {
                best = Some((decrease, f, midpoint(a, b)));
            }
        }
    }
    let Some((_, feature, threshold)) = best else {
        return id;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&row| x[[row, feature]] <= threshold);
    let left = grow_class(x, y, l, depth + 1, params, rng, tree);
    let right = grow_class(x, y, r, depth + 1, params, rng, tree);
    tree.nodes[id] = Node::Split {
        feature,
        threshold,
        left,
        right,
    };
    id
}

/// Regression tree on per-row gradients `g` and Hessians `h`. A split's gain
/// is `G_L^2/(H_L+l2) + G_R^2/(H_R+l2) - G^2/(H+l2)` and a leaf's value is
/// `G/(H+l2)`. With `h = 1` and `l2 = 0` this is a least-squares tree whose
/// leaves are mean gradients.
pub fn fit_regression_tree(x: &Array2<f64>, g: &[f64], h: &[f64], rows: &[usize], max_depth: usize, l2: f64) -> Tree {
    let mut tree = Tree { nodes: Vec::new() };
    grow_reg(x, g, h, rows.to_vec(), 0, max_depth, l2, &mut tree);
    tree
}

#[allow(clippy::too_many_arguments)]
fn grow_reg(
    x: &Array2<f64>,
    g: &[f64],
    h: &[f64],
    rows: Vec<usize>,
    depth: usize,
    max_depth: usize,
    l2: f64,
    tree: &mut Tree,
) -> usize {
    let gs: f64 = rows.iter().map(|&r| g[r]).sum();
    let hs: f64 = rows.iter().map(|&r| h[r]).sum();
    let id = tree.nodes.len();
    let value = if hs + l2 > 0.0 { gs / (hs + l2) } else { 0.0 };
    tree.nodes.push(Node::Leaf { value: vec![value] });
    if depth >= max_depth || rows.len() < 2 {
        return id;
    }
    let score = |gg: f64, hh: f64| if hh + l2 > 0.0 { gg * gg / (hh + l2) } else { 0.0 };
    let parent = score(gs, hs);
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..x.ncols() {
        let sorted = sorted_by_feature(x, &rows, f);
        let (mut gl, mut hl) = (0.0, 0.0);
        for k in 0..sorted.len() - 1 {
            gl += g[sorted[k]];
            hl += h[sorted[k]];
            let (a, b) = (x[[sorted[k], f]], x[[sorted[k + 1], f]]);
            if a == b {
                continue;
            }
            let gain = score(gl, hl) + score(gs - gl, hs - hl) - parent;
            if gain > 1e-12 && best.is_none_or(|(bg, _, _)| gain > bg) {
                best = Some((gain, f, midpoint(a, b)));
            }
        }
    }
    let Some((_, feature, threshold)) = best else {
        return id;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&row| x[[row, feature]] <= threshold);
    let left = grow_reg(x, g, h, l, depth + 1, max_depth, l2, tree);
    let right = grow_reg(x, g, h, r, depth + 1, max_depth, l2, tree);
    tree.nodes[id] = Node::Split {
        feature,
        threshold,
        left,
        right,
    };
    id
}
