//! Pointwise random-forest regressor used as the learning-to-rank model.
//!
//! Standard regression forest: each tree is fit on a bootstrap sample with a
//! random subset of features considered at every split (variance-reduction
//! criterion). Per-tree seeds are derived from the master seed, so training
//! may parallelize per tree while staying deterministic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Fraction of features considered at each split.
    pub feature_fraction: f64,
    pub min_leaf: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> ForestParams {
        ForestParams {
            n_trees: 100,
            feature_fraction: 1.0 / 3.0,
            min_leaf: 1,
            max_depth: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf(f64),
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf(value) => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomForest {
    trees: Vec<Tree>,
}

impl RandomForest {
    /// Fits `params.n_trees` trees on `(x, y)`.
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: &ForestParams) -> Result<RandomForest> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Invalid(format!(
                "forest needs matching non-empty inputs, got {} rows / {} targets",
                x.len(),
                y.len()
            )));
        }
        let n_features = x[0].len();
        if x.iter().any(|row| row.len() != n_features) {
            return Err(Error::Invalid("ragged feature rows".into()));
        }
        let mtry = ((n_features as f64 * params.feature_fraction).ceil() as usize)
            .clamp(1, n_features);
        let seeds: Vec<u64> = (0..params.n_trees)
            .map(|i| {
                params
                    .seed
                    .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(i as u64 + 1))
            })
            .collect();
        let trees: Vec<Tree> = seeds
            .par_iter()
            .map(|&seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let sample: Vec<usize> =
                    (0..x.len()).map(|_| rng.gen_range(0..x.len())).collect();
                let mut builder = TreeBuilder {
                    x,
                    y,
                    mtry,
                    min_leaf: params.min_leaf.max(1),
                    max_depth: params.max_depth,
                    rng,
                    nodes: Vec::new(),
                    feature_pool: (0..n_features).collect(),
                };
                builder.build(sample, 0);
                Tree {
                    nodes: builder.nodes,
                }
            })
            .collect();
        Ok(RandomForest { trees })
    }

    /// Mean prediction over all trees.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        sum / self.trees.len() as f64
    }
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    mtry: usize,
    min_leaf: usize,
    max_depth: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    feature_pool: Vec<usize>,
}

impl TreeBuilder<'_> {
    /// Appends the subtree for `samples` and returns its root index.
    fn build(&mut self, samples: Vec<usize>, depth: usize) -> u32 {
        let mean = samples.iter().map(|&i| self.y[i]).sum::<f64>() / samples.len() as f64;
        if depth >= self.max_depth || samples.len() < 2 * self.min_leaf {
            return self.push(Node::Leaf(mean));
        }
        match self.best_split(&samples) {
            None => self.push(Node::Leaf(mean)),
            Some((feature, threshold)) => {
                let (left_samples, right_samples): (Vec<usize>, Vec<usize>) = samples
                    .into_iter()
                    .partition(|&i| self.x[i][feature] <= threshold);
                let at = self.push(Node::Leaf(mean)); // placeholder
                let left = self.build(left_samples, depth + 1);
                let right = self.build(right_samples, depth + 1);
                self.nodes[at as usize] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                at
            }
        }
    }

    fn push(&mut self, node: Node) -> u32 {
        self.nodes.push(node);
        (self.nodes.len() - 1) as u32
    }

    /// Best (feature, threshold) by summed squared error over a random
    /// feature subset; `None` when no split separates the samples.
    fn best_split(&mut self, samples: &[usize]) -> Option<(usize, f64)> {
        // Partial Fisher-Yates over the feature pool picks mtry features.
        for k in 0..self.mtry {
            let j = self.rng.gen_range(k..self.feature_pool.len());
            self.feature_pool.swap(k, j);
        }

        let mut best: Option<(f64, usize, f64)> = None;
        let mut ordered: Vec<(f64, f64)> = Vec::with_capacity(samples.len());
        for k in 0..self.mtry {
            let feature = self.feature_pool[k];
            ordered.clear();
            ordered.extend(samples.iter().map(|&i| (self.x[i][feature], self.y[i])));
            ordered.sort_by(|a, b| a.0.total_cmp(&b.0));

            let total_sum: f64 = ordered.iter().map(|(_, y)| y).sum();
            let total_sq: f64 = ordered.iter().map(|(_, y)| y * y).sum();
            let n = ordered.len() as f64;

            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            for (idx, &(value, y)) in ordered.iter().enumerate() {
                left_sum += y;
                left_sq += y * y;
                let n_left = (idx + 1) as f64;
                let n_right = n - n_left;
                if n_right < self.min_leaf as f64 || n_left < self.min_leaf as f64 {
                    continue;
                }
                // Skip ties: a threshold must separate distinct values.
                if value == ordered[idx + 1].0 {
                    continue;
                }
                let sse_left = left_sq - left_sum * left_sum / n_left;
                let sse_right =
                    (total_sq - left_sq) - (total_sum - left_sum).powi(2) / n_right;
                let sse = sse_left + sse_right;
                let improves = match best {
                    None => true,
                    Some((best_sse, best_feature, _)) => {
                        sse < best_sse - 1e-12
                            || (sse < best_sse + 1e-12 && feature < best_feature)
                    }
                };
                if improves {
                    let threshold = (value + ordered[idx + 1].0) / 2.0;
                    best = Some((sse, feature, threshold));
                }
            }
        }
        best.map(|(_, feature, threshold)| (feature, threshold))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noisy_rows(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let signal: f64 = rng.gen_range(0.0..4.0);
            let noise1: f64 = rng.gen_range(-1.0..1.0);
            let noise2: f64 = rng.gen_range(-1.0..1.0);
            x.push(vec![signal, noise1, noise2]);
            y.push(signal.floor());
        }
        (x, y)
    }

    #[test]
    fn learns_a_step_function() {
        let (x, y) = noisy_rows(400, 1);
        let forest = RandomForest::fit(
            &x,
            &y,
            &ForestParams {
                n_trees: 30,
                seed: 9,
                ..ForestParams::default()
            },
        )
        .unwrap();
        // Held-out style probes at segment centers.
        for probe in 0..4 {
            let got = forest.predict(&[probe as f64 + 0.5, 0.0, 0.0]);
            assert!(
                (got - probe as f64).abs() < 0.35,
                "probe {probe}: got {got}"
            );
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let (x, y) = noisy_rows(150, 2);
        let params = ForestParams {
            n_trees: 12,
            seed: 4,
            ..ForestParams::default()
        };
        let f1 = RandomForest::fit(&x, &y, &params).unwrap();
        let f2 = RandomForest::fit(&x, &y, &params).unwrap();
        for probe in &x[..20] {
            assert_eq!(f1.predict(probe), f2.predict(probe));
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(RandomForest::fit(&[], &[], &ForestParams::default()).is_err());
        let ragged = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(RandomForest::fit(&ragged, &[0.0, 1.0], &ForestParams::default()).is_err());
    }

    #[test]
    fn constant_targets_give_constant_predictions() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0]];
        let y = vec![7.0, 7.0, 7.0];
        let forest = RandomForest::fit(&x, &y, &ForestParams::default()).unwrap();
        assert_eq!(forest.predict(&[0.5]), 7.0);
    }
}
