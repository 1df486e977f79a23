//! Small seeded random forest of Gini CART trees over dense feature vectors.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::WeakSupError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Features tried per split; `None` means `ceil(sqrt(dim))`.
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 25,
            max_depth: 8,
            min_samples_split: 4,
            features_per_split: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf { positive_rate: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { positive_rate } => return positive_rate,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    config: &'a ForestConfig,
    mtry: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn leaf(&mut self, rows: &[usize]) -> usize {
        let pos = rows.iter().filter(|&&r| self.y[r] == 1).count();
        self.nodes.push(Node::Leaf {
            positive_rate: pos as f64 / rows.len().max(1) as f64,
        });
        self.nodes.len() - 1
    }

    fn best_split(&self, rows: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let dim = self.x[0].len();
        let total_pos = rows.iter().filter(|&&r| self.y[r] == 1).count();
        let parent = gini(total_pos, rows.len());
        let mut best: Option<(f64, usize, f64)> = None;
        let mut features: Vec<usize> = sample(rng, dim, self.mtry.min(dim)).into_vec();
        features.sort_unstable();
        for f in features {
            let mut sorted: Vec<(f64, u8)> = rows.iter().map(|&r| (self.x[r][f], self.y[r])).collect();
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0;
            for i in 1..sorted.len() {
                left_pos += usize::from(sorted[i - 1].1 == 1);
                if sorted[i - 1].0 == sorted[i].0 {
                    continue;
                }
                let (nl, nr) = (i, sorted.len() - i);
                let impurity = (nl as f64 * gini(left_pos, nl) + nr as f64 * gini(total_pos - left_pos, nr))
                    / sorted.len() as f64;
                if impurity < parent - 1e-12 && best.is_none_or(|b| impurity < b.0) {
                    best = Some((impurity, f, (sorted[i - 1].0 + sorted[i].0) / 2.0));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, rows: &[usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let pos = rows.iter().filter(|&&r| self.y[r] == 1).count();
        if depth >= self.config.max_depth || rows.len() < self.config.min_samples_split || pos == 0 || pos == rows.len()
        {
            return self.leaf(rows);
        }
        let Some((feature, threshold)) = self.best_split(rows, rng) else {
            return self.leaf(rows);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { positive_rate: 0.0 });
        let left = self.grow(&l, depth + 1, rng);
        let right = self.grow(&r, depth + 1, rng);
        self.nodes[slot] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }
}

/// Bagged ensemble; the positive probability is the mean leaf positive rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    dim: usize,
    trees: Vec<Tree>,
}

impl RandomForest {
    pub fn fit(x: &[Vec<f64>], y: &[u8], config: &ForestConfig) -> Result<Self, WeakSupError> {
        if x.is_empty() || x.len() != y.len() {
            return Err(WeakSupError::BadConfig("forest needs equally many rows and labels".into()));
        }
        let dim = x[0].len();
        if dim == 0 || x.iter().any(|r| r.len() != dim) {
            return Err(WeakSupError::BadConfig("forest rows must share a non-zero width".into()));
        }
        if config.trees == 0 {
            return Err(WeakSupError::BadConfig("forest needs at least one tree".into()));
        }
        let mtry = config
            .features_per_split
            .unwrap_or_else(|| (dim as f64).sqrt().ceil() as usize)
            .max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let trees = (0..config.trees)
            .map(|_| {
                let rows: Vec<usize> = (0..x.len()).map(|_| rng.random_range(0..x.len())).collect();
                let mut b = Builder {
                    x,
                    y,
                    config,
                    mtry,
                    nodes: Vec::new(),
                };
                b.grow(&rows, 0, &mut rng);
                Tree { nodes: b.nodes }
            })
            .collect();
        Ok(Self { dim, trees })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}
