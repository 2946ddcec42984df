//! CART trees with Gini impurity and a bagged random forest.
//!
//! Trees grow until leaves are pure or no split separates the remaining
//! rows. Each split considers `max_features` randomly chosen features; a
//! constant feature does not count toward that budget. Every tree draws
//! from its own stream of one seeded ChaCha generator, so forests are
//! reproducible regardless of thread scheduling.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{majority, Dataset, FitDiagnostics, Fitted, Label, ModelSpec, TrainedModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    /// Features examined per split; `None` means `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl ForestParams {
    pub fn new(trees: usize, seed: u64) -> Self {
        ForestParams {
            trees,
            max_features: None,
            bootstrap: true,
            seed,
        }
    }

    fn resolve_max_features(&self, d: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
            .clamp(1, d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf(Label),
    /// Rows with `x[feature] <= threshold` go to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

/// Column-major rank encoding of a dataset, shared by every tree of a forest.
/// Split search sorts small integer keys instead of floats.
pub struct Columns {
    /// `ranks[f][i]`: position of row `i`'s value among the distinct values of feature `f`.
    ranks: Vec<Vec<u32>>,
    /// Sorted distinct values of each feature.
    values: Vec<Vec<f64>>,
    up: Vec<bool>,
}

impl Columns {
    pub fn new(data: &Dataset) -> Self {
        let n = data.len();
        let mut ranks = Vec::with_capacity(data.n_features());
        let mut values = Vec::with_capacity(data.n_features());
        for f in 0..data.n_features() {
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.sort_unstable_by(|&a, &b| data.row(a as usize)[f].total_cmp(&data.row(b as usize)[f]));
            let mut r = vec![0u32; n];
            let mut distinct: Vec<f64> = Vec::new();
            for &i in &order {
                let v = data.row(i as usize)[f];
                if distinct.last() != Some(&v) {
                    distinct.push(v);
                }
                r[i as usize] = (distinct.len() - 1) as u32;
            }
            ranks.push(r);
            values.push(distinct);
        }
        Columns {
            ranks,
            values,
            up: data.labels().iter().map(|&l| l == Label::Up).collect(),
        }
    }

    fn n_features(&self) -> usize {
        self.ranks.len()
    }
}

struct Builder<'a> {
    cols: &'a Columns,
    max_features: usize,
    nodes: Vec<Node>,
    features: Vec<usize>,
    scratch: Vec<u32>,
    /// Per-rank `[rows, ups]` tallies for low-cardinality features.
    counts: Vec<[u32; 2]>,
}

struct Best {
    feature: usize,
    /// Rows with rank `<= rank` go left.
    rank: u32,
    score: f64,
}

impl<'a> Builder<'a> {
    /// Best boundary on one feature. The score is the size-weighted child
    /// impurity `n_l gini_l + n_r gini_r`; lower is better. `None` for a
    /// feature that is constant on these rows.
    fn best_for_feature(&mut self, rows: &[u32], f: usize, total_up: usize) -> Option<(f64, u32)> {
        if self.cols.values[f].len() * 4 <= rows.len() {
            self.best_by_counting(rows, f, total_up)
        } else {
            self.best_by_sorting(rows, f, total_up)
        }
    }

    fn best_by_sorting(&mut self, rows: &[u32], f: usize, total_up: usize) -> Option<(f64, u32)> {
        let ranks = &self.cols.ranks[f];
        self.scratch.clear();
        self.scratch.extend(
            rows.iter()
                .map(|&r| (ranks[r as usize] << 1) | self.cols.up[r as usize] as u32),
        );
        self.scratch.sort_unstable();
        let n = rows.len();
        if self.scratch[0] >> 1 == self.scratch[n - 1] >> 1 {
            return None;
        }
        let mut best: Option<(f64, u32)> = None;
        let mut left_up = 0usize;
        for k in 1..n {
            left_up += (self.scratch[k - 1] & 1) as usize;
            let (lo, hi) = (self.scratch[k - 1] >> 1, self.scratch[k] >> 1);
            if lo == hi {
                continue;
            }
            let nl = k as f64;
            let nr = (n - k) as f64;
            let pl = left_up as f64 / nl;
            let pr = (total_up - left_up) as f64 / nr;
            let score = nl * 2.0 * pl * (1.0 - pl) + nr * 2.0 * pr * (1.0 - pr);
            if best.is_none_or(|(s, _)| score < s) {
                best = Some((score, lo));
            }
        }
        best
    }

    /// Same result as the sorting path, found by tallying rows per rank.
    /// Boundaries are visited in the same order with the same scores.
    fn best_by_counting(&mut self, rows: &[u32], f: usize, total_up: usize) -> Option<(f64, u32)> {
        let ranks = &self.cols.ranks[f];
        self.counts.clear();
        self.counts.resize(self.cols.values[f].len(), [0, 0]);
        for &r in rows {
            let c = &mut self.counts[ranks[r as usize] as usize];
            c[0] += 1;
            c[1] += self.cols.up[r as usize] as u32;
        }
        let n = rows.len();
        let mut best: Option<(f64, u32)> = None;
        let (mut nl, mut left_up) = (0usize, 0usize);
        for (rank, &[cnt, ups]) in self.counts.iter().enumerate() {
            if cnt == 0 {
                continue;
            }
            nl += cnt as usize;
            left_up += ups as usize;
            if nl == n {
                break;
            }
            let (l, r) = (nl as f64, (n - nl) as f64);
            let pl = left_up as f64 / l;
            let pr = (total_up - left_up) as f64 / r;
            let score = l * 2.0 * pl * (1.0 - pl) + r * 2.0 * pr * (1.0 - pr);
            if best.is_none_or(|(s, _)| score < s) {
                best = Some((score, rank as u32));
            }
        }
        best
    }

    /// Midpoint between the boundary value and the next distinct value.
    fn threshold(&self, f: usize, rank: u32) -> f64 {
        let vals = &self.cols.values[f];
        let (lo, hi) = (vals[rank as usize], vals[rank as usize + 1]);
        let t = lo + (hi - lo) / 2.0;
        if t >= hi {
            lo
        } else {
            t
        }
    }

    fn build(&mut self, rows: &mut [u32], rng: &mut impl Rng) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf(Label::Up));
        let n = rows.len();
        let ups = rows.iter().filter(|&&r| self.cols.up[r as usize]).count();
        if ups == 0 || ups == n {
            self.nodes[id as usize] = Node::Leaf(Label::from_up(ups > 0));
            return id;
        }

        let mut best: Option<Best> = None;
        let mut visited = 0;
        let d = self.features.len();
        // Partial Fisher-Yates: draw features until enough non-constant ones are seen.
        for k in 0..d {
            if visited >= self.max_features {
                break;
            }
            let pick = rng.random_range(k..d);
            self.features.swap(k, pick);
            let f = self.features[k];
            if let Some((score, rank)) = self.best_for_feature(rows, f, ups) {
                visited += 1;
                if best.as_ref().is_none_or(|b| score < b.score) {
                    best = Some(Best {
                        feature: f,
                        rank,
                        score,
                    });
                }
            }
        }
        let Some(best) = best else {
            self.nodes[id as usize] = Node::Leaf(majority(ups, n));
            return id;
        };

        let ranks = &self.cols.ranks[best.feature];
        let mut split = 0;
        for k in 0..n {
            if ranks[rows[k] as usize] <= best.rank {
                rows.swap(k, split);
                split += 1;
            }
        }
        let (lrows, rrows) = rows.split_at_mut(split);
        let left = self.build(lrows, rng);
        let right = self.build(rrows, rng);
        self.nodes[id as usize] = Node::Split {
            feature: best.feature,
            threshold: self.threshold(best.feature, best.rank),
            left,
            right,
        };
        id
    }
}

impl DecisionTree {
    /// Grows a tree on `rows` (row indices into `cols`, repeats allowed).
    pub fn fit_rows(cols: &Columns, mut rows: Vec<u32>, max_features: usize, rng: &mut impl Rng) -> Self {
        if rows.is_empty() {
            return DecisionTree {
                nodes: vec![Node::Leaf(Label::Up)],
            };
        }
        let mut b = Builder {
            cols,
            max_features: max_features.clamp(1, cols.n_features()),
            nodes: Vec::new(),
            features: (0..cols.n_features()).collect(),
            scratch: Vec::with_capacity(rows.len()),
            counts: Vec::new(),
        };
        b.build(&mut rows, rng);
        DecisionTree { nodes: b.nodes }
    }

    /// Unrestricted tree on every row of `data`.
    pub fn fit(data: &Dataset, seed: u64) -> Self {
        let rows = (0..data.len() as u32).collect();
        Self::fit_rows(
            &Columns::new(data),
            rows,
            data.n_features(),
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        let mut id = 0usize;
        loop {
            match self.nodes[id] {
                Node::Leaf(l) => return l,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[feature] <= threshold { left } else { right } as usize,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left as usize).max(go(nodes, right as usize)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub params: ForestParams,
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn fit(data: &Dataset, params: ForestParams) -> Result<Self> {
        if params.trees == 0 {
            return Err(Error::InvalidInput("a forest needs at least one tree".into()));
        }
        if data.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: data.len(),
            });
        }
        let mtry = params.resolve_max_features(data.n_features());
        let n = data.len();
        let cols = Columns::new(data);
        let trees = (0..params.trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                rng.set_stream(t as u64);
                let rows: Vec<u32> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n as u32)).collect()
                } else {
                    (0..n as u32).collect()
                };
                DecisionTree::fit_rows(&cols, rows, mtry, &mut rng)
            })
            .collect();
        Ok(RandomForest { params, trees })
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        let ups = self.trees.iter().filter(|t| t.predict(x) == Label::Up).count();
        majority(ups, self.trees.len())
    }

    pub fn node_count(&self) -> usize {
        self.trees.iter().map(|t| t.nodes.len()).sum()
    }
}

pub fn fit_random_forest(data: &Dataset, trees: usize, seed: u64) -> Result<TrainedModel> {
    let forest = RandomForest::fit(data, ForestParams::new(trees, seed))?;
    Ok(TrainedModel::new(
        ModelSpec::RandomForest { trees, seed },
        data,
        Fitted::RandomForest(forest),
        FitDiagnostics {
            converged: true,
            iterations: trees,
            warning: None,
        },
    ))
}

/// Random row order used by the shuffled-label tests.
pub fn shuffle_labels(data: &Dataset, seed: u64) -> Dataset {
    let mut y = data.labels().to_vec();
    y.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let x: Vec<f64> = (0..data.len()).flat_map(|i| data.row(i).to_vec()).collect();
    Dataset::new(x, data.n_features(), y).expect("same shape as the input")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate;

    fn xor(n: usize, seed: u64) -> Dataset {
        let z = simulate::iid_normal(2 * n, seed);
        let rows: Vec<Vec<f64>> = z.chunks(2).map(<[f64]>::to_vec).collect();
        let y = rows.iter().map(|r| Label::from_up(r[0] * r[1] > 0.0)).collect();
        Dataset::from_rows(&rows, y).unwrap()
    }

    #[test]
    fn counting_and_sorting_splits_agree() {
        for seed in 0..20u64 {
            let z = simulate::iid_normal(600, seed);
            let rows: Vec<Vec<f64>> = z
                .chunks(3)
                .map(|c| c.iter().map(|v| (v * 1.5).round()).collect())
                .collect();
            let y = z.chunks(3).map(|c| Label::from_up(c[0] + 0.5 * c[2] > 0.0)).collect();
            let data = Dataset::from_rows(&rows, y).unwrap();
            let cols = Columns::new(&data);
            let mut b = Builder {
                cols: &cols,
                max_features: 3,
                nodes: Vec::new(),
                features: vec![0, 1, 2],
                scratch: Vec::new(),
                counts: Vec::new(),
            };
            let sample: Vec<u32> = (0..200).filter(|i| !(i * 7 + seed as u32).is_multiple_of(3)).collect();
            let ups = sample.iter().filter(|&&r| cols.up[r as usize]).count();
            for f in 0..3 {
                assert_eq!(b.best_by_counting(&sample, f, ups), b.best_by_sorting(&sample, f, ups));
            }
        }
    }

    fn accuracy(pred: impl Fn(&[f64]) -> Label, data: &Dataset) -> f64 {
        let ok = (0..data.len())
            .filter(|&i| pred(data.row(i)) == data.labels()[i])
            .count();
        ok as f64 / data.len() as f64
    }

    /// Weighted child Gini of splitting `data` on feature `f` at `t`.
    fn split_gini(data: &Dataset, f: usize, t: f64) -> f64 {
        let side = |left: bool| {
            let ys: Vec<bool> = (0..data.len())
                .filter(|&i| (data.row(i)[f] <= t) == left)
                .map(|i| data.labels()[i] == Label::Up)
                .collect();
            let p = ys.iter().filter(|&&u| u).count() as f64 / ys.len() as f64;
            ys.len() as f64 * (1.0 - p * p - (1.0 - p) * (1.0 - p))
        };
        side(true) + side(false)
    }

    /// Exhaustive search over every feature and midpoint.
    fn best_root_gini(data: &Dataset) -> f64 {
        let mut best = f64::INFINITY;
        for f in 0..data.n_features() {
            let mut vals: Vec<f64> = (0..data.len()).map(|i| data.row(i)[f]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                best = best.min(split_gini(data, f, (w[0] + w[1]) / 2.0));
            }
        }
        best
    }

    #[test]
    fn root_split_matches_exhaustive_search() {
        for seed in 1..6 {
            let data = xor(40, seed);
            let tree = DecisionTree::fit(&data, seed);
            match tree.nodes[0] {
                Node::Split { feature, threshold, .. } => {
                    let got = split_gini(&data, feature, threshold);
                    assert!((got - best_root_gini(&data)).abs() < 1e-12);
                }
                Node::Leaf(_) => panic!("expected a split"),
            }
        }
    }

    #[test]
    fn unrestricted_tree_fits_distinct_rows() {
        let data = xor(300, 2);
        let tree = DecisionTree::fit(&data, 0);
        assert_eq!(accuracy(|x| tree.predict(x), &data), 1.0);
    }

    #[test]
    fn one_tree_forest_reproduces_a_single_tree() {
        let data = xor(200, 3);
        let params = ForestParams {
            trees: 1,
            max_features: Some(2),
            bootstrap: false,
            seed: 9,
        };
        let forest = RandomForest::fit(&data, params).unwrap();
        let tree = DecisionTree::fit(&data, 0);
        assert_eq!(accuracy(|x| forest.predict(x), &data), 1.0);
        let grid = xor(500, 4);
        for i in 0..grid.len() {
            assert_eq!(forest.predict(grid.row(i)), tree.predict(grid.row(i)));
        }
    }

    #[test]
    fn forest_generalizes_at_least_as_well_as_one_tree_on_xor() {
        let train = xor(400, 5);
        let test = xor(2000, 6);
        let tree = DecisionTree::fit(&train, 0);
        let forest = RandomForest::fit(&train, ForestParams::new(100, 7)).unwrap();
        let a_tree = accuracy(|x| tree.predict(x), &test);
        let a_forest = accuracy(|x| forest.predict(x), &test);
        assert!(a_forest >= a_tree - 0.005, "forest {a_forest} tree {a_tree}");
        assert!(accuracy(|x| forest.predict(x), &train) >= a_tree);
    }

    #[test]
    fn same_seed_same_forest() {
        let data = xor(150, 8);
        let a = RandomForest::fit(&data, ForestParams::new(20, 42)).unwrap();
        let b = RandomForest::fit(&data, ForestParams::new(20, 42)).unwrap();
        let c = RandomForest::fit(&data, ForestParams::new(20, 43)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn duplicate_rows_with_conflicting_labels_end_in_a_leaf() {
        let rows = vec![vec![1.0], vec![1.0], vec![1.0], vec![2.0]];
        let y = vec![Label::Up, Label::Down, Label::Down, Label::Up];
        let data = Dataset::from_rows(&rows, y).unwrap();
        let tree = DecisionTree::fit(&data, 0);
        assert_eq!(tree.predict(&[1.0]), Label::Down);
        assert_eq!(tree.predict(&[2.0]), Label::Up);
        assert_eq!(tree.depth(), 1);
    }

    #[test]
    fn shuffled_labels_keep_class_counts() {
        let data = xor(100, 10);
        let s = shuffle_labels(&data, 1);
        assert_eq!(s.count_up(), data.count_up());
        assert_ne!(s.labels(), data.labels());
    }
}
