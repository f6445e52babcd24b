//! Classifiers over 3-D range fingerprints: brute-force k-nearest
//! neighbors, a CART tree with Gini splits, a bagged random forest, and a
//! weighted soft vote of KNN and tree probabilities.
//!
//! Neighbor-distance and argmax ties resolve toward the lower label. Split
//! candidates with equal Gini impurity are ranked by balance (larger smaller
//! side), then by feature in an order rotated by node depth, then by lower
//! threshold. When every row carries its own label all splits have the same
//! impurity, and this ranking grows a balanced k-d style tree instead of a
//! chain that peels one row off per level.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fingerprint::{cell_vertex, CellLabel, FingerprintDb, GridSpec};
use crate::geometry::{PointMm, RangeTriple};

const N_FEATURES: usize = 3;

/// Labeled fingerprints.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    rows: Vec<(RangeTriple, CellLabel)>,
}

impl TrainingSet {
    pub fn new(rows: Vec<(RangeTriple, CellLabel)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if !rows
            .iter()
            .all(|(f, _)| f.as_array().iter().all(|v| v.is_finite()))
        {
            return Err(Error::NonFiniteRange);
        }
        Ok(Self { rows })
    }

    pub fn from_db(db: &FingerprintDb) -> Result<Self> {
        Self::new(db.rows())
    }

    /// Checks every label against a grid.
    pub fn validate_labels(&self, spec: &GridSpec) -> Result<()> {
        match self.rows.iter().find(|(_, l)| l.0 >= spec.cell_count()) {
            Some((_, l)) => Err(Error::LabelOutOfRange {
                label: l.0,
                count: spec.cell_count(),
            }),
            None => Ok(()),
        }
    }

    pub fn rows(&self) -> &[(RangeTriple, CellLabel)] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Sparse probability masses over cell labels, sorted by label; only
/// labels with positive mass are stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassProbabilities {
    masses: Vec<(CellLabel, f64)>,
}

impl ClassProbabilities {
    pub fn point_mass(label: CellLabel) -> Self {
        Self {
            masses: vec![(label, 1.0)],
        }
    }

    /// Accumulates masses by label. Inputs are not renormalized.
    pub fn from_weighted(items: impl IntoIterator<Item = (CellLabel, f64)>) -> Self {
        let mut acc: BTreeMap<CellLabel, f64> = BTreeMap::new();
        for (label, m) in items {
            *acc.entry(label).or_insert(0.0) += m;
        }
        Self {
            masses: acc.into_iter().filter(|(_, m)| *m > 0.0).collect(),
        }
    }

    /// Label frequencies of a bag of labels.
    pub fn from_counts(counts: &BTreeMap<CellLabel, usize>) -> Self {
        let total: usize = counts.values().sum();
        Self {
            masses: counts
                .iter()
                .filter(|(_, c)| **c > 0)
                .map(|(l, c)| (*l, *c as f64 / total as f64))
                .collect(),
        }
    }

    /// Element-wise mean, summed in slice order.
    pub fn mean(items: &[ClassProbabilities]) -> Self {
        let n = items.len() as f64;
        let mut acc: BTreeMap<CellLabel, f64> = BTreeMap::new();
        for p in items {
            for &(l, m) in &p.masses {
                *acc.entry(l).or_insert(0.0) += m;
            }
        }
        Self {
            masses: acc.into_iter().map(|(l, m)| (l, m / n)).collect(),
        }
    }

    pub fn mass(&self, label: CellLabel) -> f64 {
        self.masses
            .binary_search_by_key(&label, |(l, _)| *l)
            .map(|i| self.masses[i].1)
            .unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().map(|(_, m)| m).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (CellLabel, f64)> + '_ {
        self.masses.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// Label with the largest mass; the lowest such label on ties.
    pub fn argmax(&self) -> Option<CellLabel> {
        let mut best: Option<(CellLabel, f64)> = None;
        for &(l, m) in &self.masses {
            if best.is_none_or(|(_, bm)| m > bm) {
                best = Some((l, m));
            }
        }
        best.map(|(l, _)| l)
    }
}

/// Relative weights of the KNN and tree probabilities in a soft vote.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoteWeights {
    pub w_knn: f64,
    pub w_tree: f64,
}

impl VoteWeights {
    pub fn new(w_knn: f64, w_tree: f64) -> Result<Self> {
        if !(w_knn.is_finite()
            && w_tree.is_finite()
            && w_knn >= 0.0
            && w_tree >= 0.0
            && w_knn + w_tree > 0.0)
        {
            return Err(Error::InvalidParameter(format!(
                "vote weights must be non-negative with a positive sum (got {w_knn}:{w_tree})"
            )));
        }
        Ok(Self { w_knn, w_tree })
    }
}

impl Default for VoteWeights {
    fn default() -> Self {
        Self {
            w_knn: 3.0,
            w_tree: 1.0,
        }
    }
}

impl fmt::Display for VoteWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.w_knn, self.w_tree)
    }
}

impl FromStr for VoteWeights {
    type Err = Error;

    /// Parses `KNN:TREE`, e.g. `3:1`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("weights must look like KNN:TREE, got '{s}'"));
        let (k, t) = s.split_once(':').ok_or_else(bad)?;
        let k: f64 = k.trim().parse().map_err(|_| bad())?;
        let t: f64 = t.trim().parse().map_err(|_| bad())?;
        Self::new(k, t)
    }
}

// ---------------------------------------------------------------------------
// k-nearest neighbors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct KnnClassifier {
    rows: Vec<(RangeTriple, CellLabel)>,
    k: usize,
}

pub fn knn_train(train: &TrainingSet, k: usize) -> Result<KnnClassifier> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if k == 0 || k > train.len() {
        return Err(Error::KOutOfRange {
            k,
            rows: train.len(),
        });
    }
    Ok(KnnClassifier {
        rows: train.rows.clone(),
        k,
    })
}

fn neighbor_order(a: &(f64, CellLabel, usize), b: &(f64, CellLabel, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
}

impl KnnClassifier {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Uniform 1/k mass on each of the k nearest rows.
    pub fn predict_proba(&self, query: &RangeTriple) -> ClassProbabilities {
        if self.k == 1 {
            let mut best = (f64::INFINITY, CellLabel(u32::MAX), usize::MAX);
            for (i, (f, l)) in self.rows.iter().enumerate() {
                let cand = (f.dist2(query), *l, i);
                if neighbor_order(&cand, &best) == Ordering::Less {
                    best = cand;
                }
            }
            return ClassProbabilities::point_mass(best.1);
        }
        let mut scored: Vec<(f64, CellLabel, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, (f, l))| (f.dist2(query), *l, i))
            .collect();
        if self.k < scored.len() {
            scored.select_nth_unstable_by(self.k - 1, neighbor_order);
            scored.truncate(self.k);
        }
        let share = 1.0 / self.k as f64;
        ClassProbabilities::from_weighted(scored.into_iter().map(|(_, l, _)| (l, share)))
    }

    pub fn predict(&self, query: &RangeTriple) -> CellLabel {
        self.predict_proba(query)
            .argmax()
            .expect("non-empty neighbor set")
    }
}

pub fn knn_predict_proba(clf: &KnnClassifier, query: &RangeTriple) -> ClassProbabilities {
    clf.predict_proba(query)
}

// ---------------------------------------------------------------------------
// Decision tree
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(ClassProbabilities),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Binary axis-aligned tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeClassifier {
    nodes: Vec<Node>,
}

impl TreeClassifier {
    /// Routes the query to a leaf (`value <= threshold` goes left).
    pub fn predict_proba(&self, query: &RangeTriple) -> &ClassProbabilities {
        let x = query.as_array();
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(p) => return p,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn predict(&self, query: &RangeTriple) -> CellLabel {
        self.predict_proba(query)
            .argmax()
            .expect("leaves are non-empty")
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf(_)))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

pub fn tree_predict_proba(clf: &TreeClassifier, query: &RangeTriple) -> ClassProbabilities {
    clf.predict_proba(query).clone()
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    /// Sample indices sorted by the split feature; the first `n_left` go left.
    order: Vec<usize>,
    n_left: usize,
}

/// Recursive CART builder over a (possibly resampled) list of row indices.
struct Grower<'a> {
    x: Vec<[f64; N_FEATURES]>,
    y: Vec<u32>,
    classes: Vec<CellLabel>,
    params: TreeParams,
    /// Forest mode: draw this many candidate features per split.
    feature_sampling: Option<(usize, &'a mut ChaCha8Rng)>,
    left_counts: Vec<u64>,
    right_counts: Vec<u64>,
    nodes: Vec<Node>,
}

impl<'a> Grower<'a> {
    fn new(
        train: &TrainingSet,
        params: TreeParams,
        feature_sampling: Option<(usize, &'a mut ChaCha8Rng)>,
    ) -> Self {
        let mut classes: Vec<CellLabel> = train.rows.iter().map(|(_, l)| *l).collect();
        classes.sort_unstable();
        classes.dedup();
        let y = train
            .rows
            .iter()
            .map(|(_, l)| classes.binary_search(l).expect("label present") as u32)
            .collect();
        let x = train.rows.iter().map(|(f, _)| f.as_array()).collect();
        let n_classes = classes.len();
        Self {
            x,
            y,
            classes,
            params,
            feature_sampling,
            left_counts: vec![0; n_classes],
            right_counts: vec![0; n_classes],
            nodes: Vec::new(),
        }
    }

    fn leaf(&self, idx: &[usize]) -> Node {
        let mut counts: BTreeMap<CellLabel, usize> = BTreeMap::new();
        for &i in idx {
            *counts.entry(self.classes[self.y[i] as usize]).or_insert(0) += 1;
        }
        Node::Leaf(ClassProbabilities::from_counts(&counts))
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let first = self.y[idx[0]];
        let pure = idx.iter().all(|&i| self.y[i] == first);
        let depth_reached = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached || idx.len() < 2 * self.params.min_leaf {
            let leaf = self.leaf(&idx);
            self.nodes.push(leaf);
            return id;
        }
        let Some(split) = self.choose_split(&idx, depth) else {
            let leaf = self.leaf(&idx);
            self.nodes.push(leaf);
            return id;
        };
        // placeholder, patched once children exist
        self.nodes.push(Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: 0,
            right: 0,
        });
        let mut order = split.order;
        let right_idx = order.split_off(split.n_left);
        let left = self.grow(order, depth + 1);
        let right = self.grow(right_idx, depth + 1);
        if let Node::Split {
            left: l, right: r, ..
        } = &mut self.nodes[id]
        {
            *l = left;
            *r = right;
        }
        id
    }

    fn candidate_features(&mut self) -> (Vec<usize>, Vec<usize>) {
        match &mut self.feature_sampling {
            Some((m, rng)) if *m < N_FEATURES => {
                let mut chosen = rand::seq::index::sample(*rng, N_FEATURES, *m).into_vec();
                chosen.sort_unstable();
                let rest = (0..N_FEATURES).filter(|f| !chosen.contains(f)).collect();
                (chosen, rest)
            }
            _ => ((0..N_FEATURES).collect(), Vec::new()),
        }
    }

    fn choose_split(&mut self, idx: &[usize], depth: usize) -> Option<SplitChoice> {
        let (mut primary, mut fallback) = self.candidate_features();
        let rank = |f: &usize| (f + N_FEATURES - depth % N_FEATURES) % N_FEATURES;
        primary.sort_by_key(rank);
        fallback.sort_by_key(rank);
        // a sampled subset with no usable threshold falls back to the others
        self.best_split(idx, &primary)
            .or_else(|| self.best_split(idx, &fallback))
    }

    /// Minimizes the size-weighted Gini impurity `n - SL/nL - SR/nR`, where
    /// `SL`, `SR` are the sums of squared class counts on each side.
    /// `features` is already in tie-break order.
    fn best_split(&mut self, idx: &[usize], features: &[usize]) -> Option<SplitChoice> {
        let n = idx.len();
        let min_leaf = self.params.min_leaf.max(1);
        let better = |cand: (f64, usize), cur: (f64, usize)| {
            cand.0 > cur.0 || (cand.0 == cur.0 && cand.1 > cur.1)
        };
        let mut best: Option<((f64, usize), SplitChoice)> = None;
        for &f in features {
            let mut order = idx.to_vec();
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));

            let mut sum_sq_right: u64 = 0;
            for &i in &order {
                let c = &mut self.right_counts[self.y[i] as usize];
                sum_sq_right += 2 * *c + 1;
                *c += 1;
            }
            let mut sum_sq_left: u64 = 0;
            // ((score, balance), n_left)
            let mut found: Option<((f64, usize), usize)> = None;
            for pos in 0..n - 1 {
                let k = self.y[order[pos]] as usize;
                sum_sq_left += 2 * self.left_counts[k] + 1;
                self.left_counts[k] += 1;
                sum_sq_right -= 2 * self.right_counts[k] - 1;
                self.right_counts[k] -= 1;

                let n_left = pos + 1;
                let n_right = n - n_left;
                if n_left < min_leaf || n_right < min_leaf {
                    continue;
                }
                if self.x[order[pos]][f] >= self.x[order[pos + 1]][f] {
                    continue;
                }
                let score =
                    sum_sq_left as f64 / n_left as f64 + sum_sq_right as f64 / n_right as f64;
                let key = (score, n_left.min(n_right));
                if found.is_none_or(|(k, _)| better(key, k)) {
                    found = Some((key, n_left));
                }
            }
            for &i in &order {
                self.left_counts[self.y[i] as usize] = 0;
                self.right_counts[self.y[i] as usize] = 0;
            }
            if let Some((key, n_left)) = found {
                if best.as_ref().is_none_or(|(k, _)| better(key, *k)) {
                    let lo = self.x[order[n_left - 1]][f];
                    let hi = self.x[order[n_left]][f];
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some((
                        key,
                        SplitChoice {
                            feature: f,
                            threshold,
                            order,
                            n_left,
                        },
                    ));
                }
            }
        }
        best.map(|(_, s)| s)
    }
}

fn grow_tree(
    train: &TrainingSet,
    sample: Vec<usize>,
    params: TreeParams,
    sampling: Option<(usize, &mut ChaCha8Rng)>,
) -> TreeClassifier {
    let mut g = Grower::new(train, params, sampling);
    g.grow(sample, 0);
    TreeClassifier { nodes: g.nodes }
}

pub fn tree_train(train: &TrainingSet, params: TreeParams) -> Result<TreeClassifier> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    validate_tree_params(&params)?;
    Ok(grow_tree(train, (0..train.len()).collect(), params, None))
}

fn validate_tree_params(p: &TreeParams) -> Result<()> {
    if p.min_leaf == 0 {
        return Err(Error::InvalidParameter(
            "min_leaf must be at least 1".into(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Random forest
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub features_per_split: usize,
    pub bootstrap: bool,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            features_per_split: 1,
            bootstrap: true,
            tree: TreeParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestClassifier {
    trees: Vec<TreeClassifier>,
}

/// Trains `n_trees` members in parallel. Member `i` draws its bootstrap
/// sample and per-split feature subsets from a ChaCha8 stream seeded with
/// `seed + i`, so the forest does not depend on thread scheduling.
pub fn forest_train(
    train: &TrainingSet,
    params: ForestParams,
    seed: u64,
) -> Result<ForestClassifier> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    validate_tree_params(&params.tree)?;
    if params.n_trees == 0 {
        return Err(Error::InvalidParameter("n_trees must be at least 1".into()));
    }
    if !(1..=N_FEATURES).contains(&params.features_per_split) {
        return Err(Error::InvalidParameter(format!(
            "features_per_split must be in 1..=3, got {}",
            params.features_per_split
        )));
    }
    let n = train.len();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|member| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(member as u64));
            let sample: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_tree(
                train,
                sample,
                params.tree,
                Some((params.features_per_split, &mut rng)),
            )
        })
        .collect();
    Ok(ForestClassifier { trees })
}

impl ForestClassifier {
    pub fn trees(&self) -> &[TreeClassifier] {
        &self.trees
    }

    /// Mean of the member trees' leaf probabilities.
    pub fn predict_proba(&self, query: &RangeTriple) -> ClassProbabilities {
        let n = self.trees.len() as f64;
        let mut acc: BTreeMap<CellLabel, f64> = BTreeMap::new();
        for t in &self.trees {
            for (l, m) in t.predict_proba(query).iter() {
                *acc.entry(l).or_insert(0.0) += m;
            }
        }
        ClassProbabilities::from_weighted(acc.into_iter().map(|(l, m)| (l, m / n)))
    }

    pub fn predict(&self, query: &RangeTriple) -> CellLabel {
        self.predict_proba(query)
            .argmax()
            .expect("non-empty forest")
    }
}

pub fn forest_predict_proba(clf: &ForestClassifier, query: &RangeTriple) -> ClassProbabilities {
    clf.predict_proba(query)
}

// ---------------------------------------------------------------------------
// Soft voting and localization
// ---------------------------------------------------------------------------

/// Argmax of `w_knn * p_knn + w_tree * p_tree`, lowest label on ties.
pub fn soft_vote(
    p_knn: &ClassProbabilities,
    p_tree: &ClassProbabilities,
    w: VoteWeights,
) -> CellLabel {
    let combined = ClassProbabilities::from_weighted(
        p_knn
            .iter()
            .map(|(l, m)| (l, w.w_knn * m))
            .chain(p_tree.iter().map(|(l, m)| (l, w.w_tree * m))),
    );
    combined
        .argmax()
        .or_else(|| p_knn.argmax())
        .or_else(|| p_tree.argmax())
        .expect("soft vote over empty distributions")
}

/// Coordinates reported for a predicted cell: its lower-left vertex.
pub fn localize(label: CellLabel, spec: &GridSpec) -> Result<PointMm> {
    cell_vertex(spec, label)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassifierKind {
    Knn,
    Tree,
    Forest,
    SoftVote,
}

impl ClassifierKind {
    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::Tree => "tree",
            ClassifierKind::Forest => "forest",
            ClassifierKind::SoftVote => "vote",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "knn" => Ok(ClassifierKind::Knn),
            "tree" => Ok(ClassifierKind::Tree),
            "forest" => Ok(ClassifierKind::Forest),
            "vote" | "softvote" | "soft_vote" => Ok(ClassifierKind::SoftVote),
            other => Err(Error::InvalidParameter(format!(
                "unknown classifier '{other}'"
            ))),
        }
    }
}
