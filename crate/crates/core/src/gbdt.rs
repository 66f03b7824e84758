//! Gradient-boosted binary regression trees with logistic loss.
//!
//! Training is second-order boosting with exact greedy splits: per node,
//! every feature's samples are scanned in presorted order and split
//! candidates are taken at midpoints of consecutive distinct values. Trees
//! grow level-wise to `max_depth` and stop early where no positive gain
//! exists. Fitting is deterministic and thread-count independent: the only
//! parallelism is across features, reduced in fixed feature order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense feature matrix.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        FeatureMatrix { data, rows, cols }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols);
            data.extend_from_slice(r);
        }
        FeatureMatrix {
            data,
            rows: rows.len(),
            cols,
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// One tree node. Internal nodes route `x[feature] < threshold` to `left`,
/// else to `right`; leaves carry the additive log-odds contribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
    },
}

/// Index-linked node array in preorder; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature as usize] < *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    /// Internal nodes count 2 parameters (feature, threshold), leaves 1.
    pub fn param_count(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| match n {
                Node::Split { .. } => 2,
                Node::Leaf { .. } => 1,
            })
            .sum()
    }

    pub fn depth(&self) -> usize {
        fn rec(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + rec(nodes, *left as usize)
                    .max(rec(nodes, *right as usize)),
            }
        }
        rec(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// L2 regularizer on leaf weights.
    pub lambda: f64,
    /// Minimum hessian sum per child for a split to be admissible.
    pub min_child_weight: f64,
    /// Gain threshold subtracted from every split gain.
    pub gamma: f64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            n_trees: 100,
            max_depth: 6,
            learning_rate: 0.1,
            lambda: 1.0,
            min_child_weight: 1.0,
            gamma: 0.0,
        }
    }
}

impl BoostConfig {
    /// The image-level ensemble configuration: 10 stumps.
    pub fn meta_default() -> Self {
        BoostConfig {
            n_trees: 10,
            max_depth: 1,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be >= 1".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidConfig("max_depth must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate {} must be in (0,1]",
                self.learning_rate
            )));
        }
        if self.lambda < 0.0 || self.min_child_weight < 0.0 || self.gamma < 0.0 {
            return Err(Error::InvalidConfig(
                "lambda, min_child_weight and gamma must be >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Parameter count of a single complete tree of `max_depth`.
    pub fn complete_tree_params(&self) -> usize {
        let internals = (1usize << self.max_depth) - 1;
        let leaves = 1usize << self.max_depth;
        2 * internals + leaves
    }

    /// Parameter count upper bound for the full ensemble (all trees
    /// complete).
    pub fn complete_params(&self) -> usize {
        self.n_trees * self.complete_tree_params()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GbdtModel {
    pub trees: Vec<Tree>,
    pub learning_rate: f64,
    pub base_score: f64,
    pub n_features: usize,
    /// Training log-loss after each boosting round; not serialized.
    #[serde(skip)]
    pub round_losses: Vec<f64>,
}

impl GbdtModel {
    pub fn predict_raw(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let mut score = self.base_score;
        for tree in &self.trees {
            score += tree.predict(x);
        }
        Ok(score)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.predict_raw(x)?))
    }

    /// Total parameters actually stored: 2 per internal node, 1 per leaf.
    pub fn count_params(&self) -> usize {
        self.trees.iter().map(Tree::param_count).sum()
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn log_loss(scores: &[f64], y: &[u8]) -> f64 {
    let mut total = 0.0;
    for (&s, &label) in scores.iter().zip(y) {
        let p = sigmoid(s).clamp(1e-15, 1.0 - 1e-15);
        total -= if label == 1 { p.ln() } else { (1.0 - p).ln() };
    }
    total / scores.len() as f64
}

struct SortedFeature {
    values: Vec<f64>,
    indices: Vec<u32>,
}

fn presort(x: &FeatureMatrix) -> Vec<SortedFeature> {
    use rayon::prelude::*;
    (0..x.cols())
        .into_par_iter()
        .map(|f| {
            let mut indices: Vec<u32> = (0..x.rows() as u32).collect();
            indices.sort_by(|&a, &b| {
                x.get(a as usize, f)
                    .partial_cmp(&x.get(b as usize, f))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let values = indices.iter().map(|&i| x.get(i as usize, f)).collect();
            SortedFeature { values, indices }
        })
        .collect()
}

/// Fit a boosted ensemble on binary labels.
///
/// `base_score` is fixed at 0 (prior probability one half); class balance is
/// the caller's responsibility. The returned model records the training
/// log-loss after each round.
pub fn fit(x: &FeatureMatrix, y: &[u8], cfg: &BoostConfig) -> Result<GbdtModel> {
    cfg.validate()?;
    if x.rows() < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 samples, got {}",
            x.rows()
        )));
    }
    if y.len() != x.rows() {
        return Err(Error::InvalidConfig(format!(
            "labels ({}) do not match rows ({})",
            y.len(),
            x.rows()
        )));
    }
    if y.iter().any(|&l| l > 1) {
        return Err(Error::InvalidConfig("labels must be 0 or 1".into()));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    let n_pos = y.iter().filter(|&&l| l == 1).count();
    if n_pos == 0 || n_pos == y.len() {
        return Err(Error::SingleClass);
    }

    let n = x.rows();
    let sorted = presort(x);
    let mut scores = vec![0.0f64; n];
    let mut gh = vec![[0.0f64; 2]; n];
    let mut trees = Vec::with_capacity(cfg.n_trees);
    let mut round_losses = Vec::with_capacity(cfg.n_trees);

    for _round in 0..cfg.n_trees {
        for i in 0..n {
            let p = sigmoid(scores[i]);
            gh[i] = [p - y[i] as f64, p * (1.0 - p)];
        }
        let tree = grow_tree(x, &sorted, &gh, cfg, &mut scores);
        trees.push(tree);
        round_losses.push(log_loss(&scores, y));
    }

    Ok(GbdtModel {
        trees,
        learning_rate: cfg.learning_rate,
        base_score: 0.0,
        n_features: x.cols(),
        round_losses,
    })
}

#[derive(Debug, Clone, Copy)]
struct Cand {
    gain: f64,
    feature: u32,
    threshold: f64,
}

enum Arena {
    Todo,
    Split {
        feature: u32,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

const SETTLED: u8 = u8::MAX;

/// Grow one tree level-wise and fold its leaf values into `scores`.
fn grow_tree(
    x: &FeatureMatrix,
    sorted: &[SortedFeature],
    gh: &[[f64; 2]],
    cfg: &BoostConfig,
    scores: &mut [f64],
) -> Tree {
    let n = x.rows();
    let mut arena: Vec<Arena> = vec![Arena::Todo];
    // Position of each sample within the current level; u8 is plenty since a
    // level of a depth-6 tree has at most 64 nodes.
    let mut node_of = vec![0u8; n];
    let mut level_slots: Vec<usize> = vec![0];

    for depth in 0..=cfg.max_depth {
        let width = level_slots.len();
        if width == 0 {
            break;
        }
        let mut g_tot = vec![0.0f64; width];
        let mut h_tot = vec![0.0f64; width];
        for i in 0..n {
            let nid = node_of[i];
            if nid != SETTLED {
                g_tot[nid as usize] += gh[i][0];
                h_tot[nid as usize] += gh[i][1];
            }
        }

        let bests: Vec<Option<Cand>> = if depth == cfg.max_depth {
            vec![None; width]
        } else {
            best_splits(sorted, gh, &node_of, &g_tot, &h_tot, width, cfg)
        };

        let mut next_slots = Vec::new();
        // Left-child position in the next level, or the leaf value.
        let mut routing: Vec<std::result::Result<(u8, u32, f64), f64>> = Vec::with_capacity(width);
        for nid in 0..width {
            match bests[nid] {
                Some(c) if c.gain > 0.0 => {
                    let left = arena.len();
                    arena.push(Arena::Todo);
                    arena.push(Arena::Todo);
                    arena[level_slots[nid]] = Arena::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right: left + 1,
                    };
                    let pos = next_slots.len() as u8;
                    next_slots.push(left);
                    next_slots.push(left + 1);
                    routing.push(Ok((pos, c.feature, c.threshold)));
                }
                _ => {
                    let value =
                        -cfg.learning_rate * g_tot[nid] / (h_tot[nid] + cfg.lambda);
                    arena[level_slots[nid]] = Arena::Leaf { value };
                    routing.push(Err(value));
                }
            }
        }

        for i in 0..n {
            let nid = node_of[i];
            if nid == SETTLED {
                continue;
            }
            match routing[nid as usize] {
                Ok((left_pos, feature, threshold)) => {
                    node_of[i] = if x.get(i, feature as usize) < threshold {
                        left_pos
                    } else {
                        left_pos + 1
                    };
                }
                Err(value) => {
                    scores[i] += value;
                    node_of[i] = SETTLED;
                }
            }
        }
        level_slots = next_slots;
    }

    Tree {
        nodes: preorder(&arena),
    }
}

/// Best split per level node: one pass per feature over the presorted order,
/// reduced across features in ascending feature index with strict gain
/// comparison (ties keep the lower feature, then the lower threshold).
fn best_splits(
    sorted: &[SortedFeature],
    gh: &[[f64; 2]],
    node_of: &[u8],
    g_tot: &[f64],
    h_tot: &[f64],
    width: usize,
    cfg: &BoostConfig,
) -> Vec<Option<Cand>> {
    use rayon::prelude::*;

    let lambda = cfg.lambda;
    let parent: Vec<f64> = (0..width)
        .map(|nid| g_tot[nid] * g_tot[nid] / (h_tot[nid] + lambda))
        .collect();

    let per_feature: Vec<Vec<Option<Cand>>> = sorted
        .par_iter()
        .enumerate()
        .map(|(f, sf)| {
            let mut best: Vec<Option<Cand>> = vec![None; width];
            let mut run_g = vec![0.0f64; width];
            let mut run_h = vec![0.0f64; width];
            let mut prev = vec![0.0f64; width];
            let mut seen = vec![false; width];
            let n = sf.indices.len();
            for r in 0..n {
                let i = sf.indices[r] as usize;
                let nid = node_of[i];
                if nid == SETTLED {
                    continue;
                }
                let nid = nid as usize;
                let v = sf.values[r];
                if seen[nid] && v > prev[nid] {
                    let h_l = run_h[nid];
                    let h_r = h_tot[nid] - h_l;
                    if h_l >= cfg.min_child_weight && h_r >= cfg.min_child_weight {
                        let g_l = run_g[nid];
                        let g_r = g_tot[nid] - g_l;
                        let gain = 0.5
                            * (g_l * g_l / (h_l + lambda) + g_r * g_r / (h_r + lambda)
                                - parent[nid])
                            - cfg.gamma;
                        if best[nid].is_none_or(|b| gain > b.gain) {
                            best[nid] = Some(Cand {
                                gain,
                                feature: f as u32,
                                threshold: 0.5 * (prev[nid] + v),
                            });
                        }
                    }
                }
                run_g[nid] += gh[i][0];
                run_h[nid] += gh[i][1];
                prev[nid] = v;
                seen[nid] = true;
            }
            best
        })
        .collect();

    let mut best: Vec<Option<Cand>> = vec![None; width];
    for feature_best in per_feature {
        for (nid, cand) in feature_best.into_iter().enumerate() {
            if let Some(c) = cand {
                if best[nid].is_none_or(|b| c.gain > b.gain) {
                    best[nid] = Some(c);
                }
            }
        }
    }
    best
}

fn preorder(arena: &[Arena]) -> Vec<Node> {
    fn rec(arena: &[Arena], slot: usize, out: &mut Vec<Node>) -> u32 {
        let my = out.len() as u32;
        out.push(Node::Leaf { value: 0.0 });
        match arena[slot] {
            Arena::Leaf { value } => out[my as usize] = Node::Leaf { value },
            Arena::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let l = rec(arena, left, out);
                let r = rec(arena, right, out);
                out[my as usize] = Node::Split {
                    feature,
                    threshold,
                    left: l,
                    right: r,
                };
            }
            Arena::Todo => unreachable!("unfinished arena node"),
        }
        my
    }
    let mut out = Vec::with_capacity(arena.len());
    rec(arena, 0, &mut out);
    out
}
