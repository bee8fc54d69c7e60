//! Gradient-boosted regression trees for conditional quantiles.
//!
//! Squared-error trees are fitted to the negative gradient of the pinball
//! loss; each leaf is then reset to the `τ`-quantile of the residuals it holds.
//! Splits are searched level by level over presorted feature orders, so one
//! tree costs `O(depth · n · p)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pinball_loss;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub max_depth: usize,
    pub learning_rate: f64,
    pub n_stages: usize,
    pub min_leaf: usize,
    pub min_split: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            max_depth: 3,
            learning_rate: 0.1,
            n_stages: 100,
            min_leaf: 10,
            min_split: 20,
        }
    }
}

impl GbtParams {
    /// Ordering used to break CV ties in favour of the smaller model.
    fn size_key(&self) -> (usize, usize, usize, usize, u64) {
        (
            self.n_stages,
            self.max_depth,
            usize::MAX - self.min_leaf,
            usize::MAX - self.min_split,
            self.learning_rate.to_bits(),
        )
    }
}

/// The hyperparameter grid searched by cross-validation.
pub fn default_grid() -> Vec<GbtParams> {
    let mut grid = Vec::new();
    for &max_depth in &[2, 3, 4] {
        for &learning_rate in &[0.05, 0.1] {
            for &n_stages in &[100, 300] {
                for &min_leaf in &[10, 30] {
                    for &min_split in &[20, 60] {
                        grid.push(GbtParams {
                            max_depth,
                            learning_rate,
                            n_stages,
                            min_leaf,
                            min_split,
                        });
                    }
                }
            }
        }
    }
    grid
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(v) => return *v,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

/// A boosted ensemble predicting the `τ`-quantile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Gbt {
    pub tau: f64,
    pub params: GbtParams,
    init: f64,
    trees: Vec<Tree>,
}

impl Gbt {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.predict_stages(x, self.trees.len())
    }

    fn predict_stages(&self, x: &[f64], stages: usize) -> f64 {
        self.init
            + self.params.learning_rate
                * self.trees[..stages.min(self.trees.len())].iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

/// Lower `τ`-quantile: the `⌈τn⌉`-th order statistic.
pub(crate) fn lower_quantile(values: &mut [f64], tau: f64) -> f64 {
    assert!(!values.is_empty());
    let n = values.len();
    let k = ((tau * n as f64).ceil() as usize).clamp(1, n) - 1;
    let (_, v, _) = values.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
    *v
}

/// Column-major feature matrix with per-feature sort orders.
pub struct Dataset<'a> {
    pub n: usize,
    pub p: usize,
    cols: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
    pub targets: &'a [f64],
}

impl<'a> Dataset<'a> {
    pub fn new(rows: &[&[f64]], targets: &'a [f64]) -> Self {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.len());
        let cols: Vec<Vec<f64>> = (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        let order = cols
            .iter()
            .map(|c| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]));
                idx
            })
            .collect();
        Dataset { n, p, cols, order, targets }
    }

    fn row(&self, i: usize, buf: &mut [f64]) {
        for j in 0..self.p {
            buf[j] = self.cols[j][i];
        }
    }
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Fits on the rows of `data` flagged in `mask` (all rows when `None`).
pub fn fit(data: &Dataset<'_>, mask: Option<&[bool]>, tau: f64, params: &GbtParams) -> Gbt {
    let active: Vec<bool> = match mask {
        Some(m) => m.to_vec(),
        None => vec![true; data.n],
    };
    let idx: Vec<usize> = (0..data.n).filter(|&i| active[i]).collect();
    let mut ys: Vec<f64> = idx.iter().map(|&i| data.targets[i]).collect();
    let init = lower_quantile(&mut ys, tau);
    let mut f = vec![init; data.n];
    let mut grad = vec![0.0; data.n];
    let mut trees = Vec::with_capacity(params.n_stages);
    let mut leaf_of = vec![usize::MAX; data.n];
    for _ in 0..params.n_stages {
        for &i in &idx {
            grad[i] = if data.targets[i] > f[i] { tau } else { tau - 1.0 };
        }
        let tree = grow_tree(data, &active, &grad, params, &mut leaf_of);
        let tree = relabel_leaves(tree, data, &idx, &leaf_of, &f, tau);
        for &i in &idx {
            if let Node::Leaf(v) = tree.nodes[leaf_of[i]] {
                f[i] += params.learning_rate * v;
            }
        }
        trees.push(tree);
    }
    Gbt {
        tau,
        params: *params,
        init,
        trees,
    }
}

fn relabel_leaves(mut tree: Tree, data: &Dataset<'_>, idx: &[usize], leaf_of: &[usize], f: &[f64], tau: f64) -> Tree {
    let mut per_leaf: Vec<Vec<f64>> = vec![Vec::new(); tree.nodes.len()];
    for &i in idx {
        per_leaf[leaf_of[i]].push(data.targets[i] - f[i]);
    }
    for (k, node) in tree.nodes.iter_mut().enumerate() {
        if let Node::Leaf(v) = node {
            *v = if per_leaf[k].is_empty() { 0.0 } else { lower_quantile(&mut per_leaf[k], tau) };
        }
    }
    tree
}

/// Level-wise least-squares tree on `grad`; fills `leaf_of` with the leaf
/// index of each active row.
fn grow_tree(data: &Dataset<'_>, active: &[bool], grad: &[f64], params: &GbtParams, leaf_of: &mut [usize]) -> Tree {
    let mut nodes = vec![Node::Leaf(0.0)];
    for i in 0..data.n {
        leaf_of[i] = if active[i] { 0 } else { usize::MAX };
    }
    let mut frontier: Vec<usize> = vec![0];
    for _depth in 0..params.max_depth {
        if frontier.is_empty() {
            break;
        }
        // Per-node totals.
        let mut slot_of_node = vec![usize::MAX; nodes.len()];
        for (s, &nd) in frontier.iter().enumerate() {
            slot_of_node[nd] = s;
        }
        let slot = |node: usize| -> Option<usize> {
            match slot_of_node.get(node) {
                Some(&s) if s != usize::MAX => Some(s),
                _ => None,
            }
        };
        let k = frontier.len();
        let mut tot_n = vec![0usize; k];
        let mut tot_s = vec![0.0; k];
        for i in 0..data.n {
            if let Some(s) = slot(leaf_of[i]) {
                tot_n[s] += 1;
                tot_s[s] += grad[i];
            }
        }
        let splittable: Vec<bool> = (0..k)
            .map(|s| tot_n[s] >= params.min_split && tot_n[s] >= 2 * params.min_leaf)
            .collect();
        if !splittable.iter().any(|b| *b) {
            break;
        }
        let mut best: Vec<Option<Candidate>> = (0..k).map(|_| None).collect();
        let mut cnt = vec![0usize; k];
        let mut sum = vec![0.0; k];
        let mut last = vec![f64::NEG_INFINITY; k];
        for j in 0..data.p {
            cnt.iter_mut().for_each(|c| *c = 0);
            sum.iter_mut().for_each(|c| *c = 0.0);
            last.iter_mut().for_each(|c| *c = f64::NEG_INFINITY);
            let col = &data.cols[j];
            for &ii in &data.order[j] {
                let i = ii as usize;
                let Some(s) = slot(leaf_of[i]) else {
                    continue;
                };
                if !splittable[s] {
                    continue;
                }
                let xv = col[i];
                let nl = cnt[s];
                let nr = tot_n[s] - nl;
                if nl >= params.min_leaf && nr >= params.min_leaf && xv > last[s] {
                    let sl = sum[s];
                    let sr = tot_s[s] - sl;
                    let gain = sl * sl / nl as f64 + sr * sr / nr as f64 - tot_s[s] * tot_s[s] / tot_n[s] as f64;
                    if best[s].as_ref().is_none_or(|b| gain > b.gain) {
                        best[s] = Some(Candidate {
                            gain,
                            feature: j,
                            threshold: 0.5 * (last[s] + xv),
                        });
                    }
                }
                cnt[s] += 1;
                sum[s] += grad[i];
                last[s] = xv;
            }
        }
        let mut next = Vec::new();
        let mut new_children: Vec<Option<(usize, usize, usize, f64)>> = vec![None; k];
        for (s, &nd) in frontier.iter().enumerate() {
            if let Some(c) = &best[s] {
                if c.gain > 1e-12 * (1.0 + tot_s[s].abs()) {
                    let l = nodes.len();
                    nodes.push(Node::Leaf(0.0));
                    nodes.push(Node::Leaf(0.0));
                    nodes[nd] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left: l,
                        right: l + 1,
                    };
                    new_children[s] = Some((l, l + 1, c.feature, c.threshold));
                    next.push(l);
                    next.push(l + 1);
                }
            }
        }
        for i in 0..data.n {
            if let Some(s) = slot(leaf_of[i]) {
                if let Some((l, r, feat, thr)) = new_children[s] {
                    leaf_of[i] = if data.cols[feat][i] <= thr { l } else { r };
                }
            }
        }
        frontier = next;
    }
    Tree { nodes }
}

/// Mean held-out pinball loss of each grid point, by `folds`-fold CV.
/// Stage counts sharing the other parameters are scored from one fit.
pub fn cross_validate(data: &Dataset<'_>, tau: f64, grid: &[GbtParams], folds: usize, seed: u64) -> Vec<f64> {
    let folds = folds.clamp(2, data.n.max(2));
    let mut perm: Vec<usize> = (0..data.n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0usize; data.n];
    for (r, &i) in perm.iter().enumerate() {
        fold_of[i] = r % folds;
    }
    let mut losses = vec![0.0; grid.len()];
    // Group grid points that differ only in n_stages.
    let mut groups: Vec<(GbtParams, Vec<usize>)> = Vec::new();
    for (g, prm) in grid.iter().enumerate() {
        let mut key = *prm;
        key.n_stages = 0;
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(g),
            None => groups.push((key, vec![g])),
        }
    }
    let mut buf = vec![0.0; data.p];
    for (key, members) in &groups {
        let max_stages = members.iter().map(|&g| grid[g].n_stages).max().unwrap_or(0);
        let mut prm = *key;
        prm.n_stages = max_stages;
        let mut total = vec![0.0; members.len()];
        let mut count = 0usize;
        for f in 0..folds {
            let mask: Vec<bool> = fold_of.iter().map(|&k| k != f).collect();
            let model = fit(data, Some(&mask), tau, &prm);
            for i in (0..data.n).filter(|&i| fold_of[i] == f) {
                data.row(i, &mut buf);
                for (m, &g) in members.iter().enumerate() {
                    let q = model.predict_stages(&buf, grid[g].n_stages).max(0.0);
                    total[m] += pinball_loss(data.targets[i], q, tau);
                }
                count += 1;
            }
        }
        for (m, &g) in members.iter().enumerate() {
            losses[g] = total[m] / count.max(1) as f64;
        }
    }
    losses
}

/// Grid point with the lowest CV loss, ties to the smaller model.
pub fn select(grid: &[GbtParams], losses: &[f64]) -> GbtParams {
    let mut best = 0;
    for g in 1..grid.len() {
        let tol = 1e-12 * (1.0 + losses[best].abs());
        if losses[g] < losses[best] - tol
            || ((losses[g] - losses[best]).abs() <= tol && grid[g].size_key() < grid[best].size_key())
        {
            best = g;
        }
    }
    grid[best]
}
