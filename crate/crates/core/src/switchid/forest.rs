//! Random forest of axis-aligned Gini trees, trained on bootstrap resamples
//! with per-split feature subsampling.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::stable_hash;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSplit {
    /// floor(sqrt(feature count)), at least 1.
    Sqrt,
    Count(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub tree_count: usize,
    /// `None` grows unpruned trees to purity.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub features_per_split: FeatureSplit,
    pub rng_seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            tree_count: 100,
            max_depth: Some(16),
            min_leaf: 2,
            features_per_split: FeatureSplit::Sqrt,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    /// Class counts of the training samples that reached this leaf.
    Leaf { counts: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub(crate) nodes: Vec<TreeNode>,
}

impl Tree {
    /// Index of the class this tree votes for, ties to the lowest class index.
    fn vote(&self, row: &[f64]) -> usize {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Split { feature, threshold, left, right } => {
                    at = if row[*feature] <= *threshold { *left as usize } else { *right as usize };
                }
                TreeNode::Leaf { counts } => {
                    let mut best = 0usize;
                    for (c, &count) in counts.iter().enumerate() {
                        if count > counts[best] {
                            best = c;
                        }
                    }
                    return best;
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedForest {
    pub trees: Vec<Tree>,
    /// Sorted distinct training labels; vote distributions follow this order.
    pub class_catalog: Vec<u32>,
    /// Mean impurity decrease per feature across trees.
    pub feature_importance: Vec<f64>,
    pub n_features: usize,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    impurity_decrease: f64,
}

fn gini(counts: &[u32], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

struct TreeBuilder<'a> {
    rows: &'a [Vec<f64>],
    classes: &'a [usize],
    n_classes: usize,
    n_features: usize,
    features_per_split: usize,
    max_depth: usize,
    min_leaf: usize,
    n_total: f64,
    nodes: Vec<TreeNode>,
    importance: Vec<f64>,
}

impl<'a> TreeBuilder<'a> {
    fn counts_of(&self, idx: &[usize]) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_classes];
        for &i in idx {
            counts[self.classes[i]] += 1;
        }
        counts
    }

    fn best_split(&self, idx: &[usize], rng: &mut ChaCha8Rng) -> Option<SplitChoice> {
        // Sample the feature subset without replacement, then visit in
        // ascending order so ties resolve independently of draw order.
        let mut pool: Vec<usize> = (0..self.n_features).collect();
        for i in 0..self.features_per_split.min(self.n_features) {
            let j = rng.gen_range(i..pool.len());
            pool.swap(i, j);
        }
        pool.truncate(self.features_per_split.min(self.n_features));
        pool.sort_unstable();

        let parent_counts = self.counts_of(idx);
        let parent_gini = gini(&parent_counts, idx.len());
        let n = idx.len() as f64;

        let mut best: Option<SplitChoice> = None;
        let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(idx.len());
        for &feature in &pool {
            scratch.clear();
            scratch.extend(idx.iter().map(|&i| (self.rows[i][feature], self.classes[i])));
            scratch.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let mut left_counts = vec![0u32; self.n_classes];
            let mut right_counts = parent_counts.clone();
            for k in 0..scratch.len() - 1 {
                let (v, class) = scratch[k];
                left_counts[class] += 1;
                right_counts[class] -= 1;
                let next = scratch[k + 1].0;
                if next <= v {
                    continue; // no boundary between equal values
                }
                let n_left = k + 1;
                let n_right = scratch.len() - n_left;
                if n_left < self.min_leaf || n_right < self.min_leaf {
                    continue;
                }
                let weighted = (n_left as f64 / n) * gini(&left_counts, n_left)
                    + (n_right as f64 / n) * gini(&right_counts, n_right);
                let decrease = parent_gini - weighted;
                if decrease > 1e-12
                    && best.as_ref().map_or(true, |b| decrease > b.impurity_decrease + 1e-15)
                {
                    best = Some(SplitChoice {
                        feature,
                        threshold: (v + next) / 2.0,
                        impurity_decrease: decrease,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> u32 {
        let counts = self.counts_of(&idx);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let too_deep = depth >= self.max_depth;
        let too_small = idx.len() < 2 * self.min_leaf;
        if pure || too_deep || too_small {
            self.nodes.push(TreeNode::Leaf { counts });
            return (self.nodes.len() - 1) as u32;
        }
        match self.best_split(&idx, rng) {
            None => {
                self.nodes.push(TreeNode::Leaf { counts });
                (self.nodes.len() - 1) as u32
            }
            Some(split) => {
                self.importance[split.feature] +=
                    (idx.len() as f64 / self.n_total) * split.impurity_decrease;
                let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
                    .into_iter()
                    .partition(|&i| self.rows[i][split.feature] <= split.threshold);
                let slot = self.nodes.len();
                self.nodes.push(TreeNode::Leaf { counts: vec![] }); // placeholder
                let left = self.grow(left_idx, depth + 1, rng);
                let right = self.grow(right_idx, depth + 1, rng);
                self.nodes[slot] = TreeNode::Split {
                    feature: split.feature,
                    threshold: split.threshold,
                    left,
                    right,
                };
                slot as u32
            }
        }
    }
}

fn canonical_order(rows: &[Vec<f64>], labels: &[u32]) -> Vec<usize> {
    let mut keyed: Vec<(u64, usize)> = (0..rows.len())
        .map(|i| {
            let mut bytes = Vec::with_capacity(rows[i].len() * 8 + 4);
            for v in &rows[i] {
                bytes.extend_from_slice(&v.to_bits().to_le_bytes());
            }
            bytes.extend_from_slice(&labels[i].to_le_bytes());
            (stable_hash(&bytes), i)
        })
        .collect();
    keyed.sort_by(|a, b| {
        a.0.cmp(&b.0).then_with(|| {
            // Hash collisions fall back to content comparison so the order
            // stays a pure function of the row multiset.
            let (i, j) = (a.1, b.1);
            for (x, y) in rows[i].iter().zip(&rows[j]) {
                match x.partial_cmp(y).unwrap() {
                    std::cmp::Ordering::Equal => continue,
                    other => return other,
                }
            }
            labels[i].cmp(&labels[j])
        })
    });
    keyed.into_iter().map(|(_, i)| i).collect()
}

fn validate_training_input(rows: &[Vec<f64>], labels: &[u32]) -> Result<usize> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    if rows.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: rows.len(), got: labels.len() });
    }
    let width = rows[0].len();
    if width == 0 {
        return Err(Error::EmptyInput);
    }
    for row in rows {
        if row.len() != width {
            return Err(Error::RaggedRows);
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("training row".into()));
        }
    }
    let mut distinct = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::SingleClass);
    }
    Ok(width)
}

/// Trains `cfg.tree_count` trees on bootstrap resamples.
///
/// Rows are put in a canonical hash order first, so the model is a pure
/// function of the (row, label) multiset, the config, and the seed.
pub fn train_forest(rows: &[Vec<f64>], labels: &[u32], cfg: &ForestConfig) -> Result<TrainedForest> {
    fit(rows, labels, cfg).map(|(f, _)| f)
}

/// As [`train_forest`], additionally returning the out-of-bag accuracy
/// (fraction of rows correctly predicted by the trees that never saw them).
pub fn train_forest_with_oob(
    rows: &[Vec<f64>],
    labels: &[u32],
    cfg: &ForestConfig,
) -> Result<(TrainedForest, f64)> {
    fit(rows, labels, cfg)
}

fn fit(rows: &[Vec<f64>], labels: &[u32], cfg: &ForestConfig) -> Result<(TrainedForest, f64)> {
    let width = validate_training_input(rows, labels)?;
    if cfg.tree_count == 0 {
        return Err(Error::Config("tree_count must be positive".into()));
    }
    if cfg.min_leaf == 0 {
        return Err(Error::Config("min_leaf must be positive".into()));
    }
    let mut class_catalog = labels.to_vec();
    class_catalog.sort_unstable();
    class_catalog.dedup();
    let features_per_split = match cfg.features_per_split {
        FeatureSplit::Sqrt => ((width as f64).sqrt().floor() as usize).max(1),
        FeatureSplit::Count(c) => {
            if c == 0 || c > width {
                return Err(Error::Config(format!(
                    "features_per_split {c} outside 1..={width}"
                )));
            }
            c
        }
    };

    let order = canonical_order(rows, labels);
    let canon_rows: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();
    let canon_classes: Vec<usize> = order
        .iter()
        .map(|&i| class_catalog.binary_search(&labels[i]).unwrap())
        .collect();
    let n = canon_rows.len();

    let mut trees = Vec::with_capacity(cfg.tree_count);
    let mut importance = vec![0.0f64; width];
    let mut oob_votes = vec![vec![0u32; class_catalog.len()]; n];
    for b in 0..cfg.tree_count {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed ^ b as u64);
        let mut in_bag = vec![false; n];
        let bootstrap: Vec<usize> = (0..n)
            .map(|_| {
                let i = rng.gen_range(0..n);
                in_bag[i] = true;
                i
            })
            .collect();
        let mut builder = TreeBuilder {
            rows: &canon_rows,
            classes: &canon_classes,
            n_classes: class_catalog.len(),
            n_features: width,
            features_per_split,
            max_depth: cfg.max_depth.unwrap_or(usize::MAX),
            min_leaf: cfg.min_leaf,
            n_total: bootstrap.len() as f64,
            nodes: Vec::new(),
            importance: vec![0.0; width],
        };
        let root = builder.grow(bootstrap, 0, &mut rng);
        debug_assert_eq!(root, 0);
        let tree = Tree { nodes: builder.nodes };
        for (i, seen) in in_bag.iter().enumerate() {
            if !seen {
                oob_votes[i][tree.vote(&canon_rows[i])] += 1;
            }
        }
        for (f, v) in builder.importance.iter().enumerate() {
            importance[f] += v;
        }
        trees.push(tree);
    }
    for v in importance.iter_mut() {
        *v /= cfg.tree_count as f64;
    }

    let mut oob_hits = 0usize;
    let mut oob_total = 0usize;
    for (i, votes) in oob_votes.iter().enumerate() {
        if votes.iter().all(|&v| v == 0) {
            continue;
        }
        let mut best = 0usize;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = c;
            }
        }
        oob_total += 1;
        if best == canon_classes[i] {
            oob_hits += 1;
        }
    }
    let oob_accuracy = if oob_total == 0 { 0.0 } else { oob_hits as f64 / oob_total as f64 };

    Ok((
        TrainedForest { trees, class_catalog, feature_importance: importance, n_features: width },
        oob_accuracy,
    ))
}

/// Majority vote over the trees: predicted label plus the vote distribution
/// (in class-catalog order, entries are multiples of 1/B and sum to 1).
pub fn predict_forest(forest: &TrainedForest, row: &[f64]) -> Result<(u32, Vec<f64>)> {
    if row.len() != forest.n_features {
        return Err(Error::WidthMismatch { expected: forest.n_features, got: row.len() });
    }
    let mut votes = vec![0u32; forest.class_catalog.len()];
    for tree in &forest.trees {
        votes[tree.vote(row)] += 1;
    }
    let mut best = 0usize;
    for (c, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = c;
        }
    }
    let b = forest.trees.len() as f64;
    let dist = votes.iter().map(|&v| v as f64 / b).collect();
    Ok((forest.class_catalog[best], dist))
}

const FOREST_FILE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ForestFile {
    version: u32,
    forest: TrainedForest,
}

pub fn save_forest(path: &std::path::Path, forest: &TrainedForest) -> Result<()> {
    let file = ForestFile { version: FOREST_FILE_VERSION, forest: forest.clone() };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut f, &file)?;
    use std::io::Write;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn load_forest(path: &std::path::Path) -> Result<TrainedForest> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let file: ForestFile = serde_json::from_reader(f)?;
    if file.version != FOREST_FILE_VERSION {
        return Err(Error::Parse(format!("unsupported forest file version {}", file.version)));
    }
    Ok(file.forest)
}
