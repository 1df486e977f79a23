//! Lightweight backend: logistic regression over hashed word uni- and
//! bigrams, trained with seeded stochastic gradient descent. Bitwise
//! deterministic for a fixed seed and training set.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassifyError, ModelManifest, ScoredLabel, SentenceClassifier, TrainConfig, TrainingRow};
use crate::textprep::{clean_text, CleaningConfig};

pub const HASH_BITS: u32 = 18;
pub const TOKENIZER_VERSION: &str = "hashed-ngrams/1";
const DIM: usize = 1 << HASH_BITS;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// Sparse L2-normalised binary feature vector (sorted, unique indices).
pub fn featurize(text: &str) -> Vec<(u32, f64)> {
    let cleaned = clean_text(
        text,
        &CleaningConfig {
            preserve_case: false,
            ..Default::default()
        },
    );
    let tokens: Vec<&str> = cleaned.split(' ').filter(|t| !t.is_empty()).collect();
    let mut idx: Vec<u32> = tokens
        .iter()
        .map(|t| format!("w:{t}"))
        .chain(tokens.windows(2).map(|w| format!("b:{} {}", w[0], w[1])))
        .map(|f| (fnv1a(f.as_bytes()) % DIM as u64) as u32)
        .collect();
    idx.sort_unstable();
    idx.dedup();
    let norm = if idx.is_empty() { 1.0 } else { 1.0 / (idx.len() as f64).sqrt() };
    idx.into_iter().map(|i| (i, norm)).collect()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredWeights {
    bias: f64,
    /// Non-zero weights only.
    weights: Vec<(u32, f64)>,
}

/// Trained lightweight model; immutable and shareable across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    manifest: ModelManifest,
    weights: Vec<f64>,
    bias: f64,
}

impl LinearClassifier {
    pub(super) fn train(rows: &[TrainingRow], config: &TrainConfig) -> Self {
        let examples: Vec<(Vec<(u32, f64)>, f64)> = rows
            .iter()
            .map(|r| (featurize(&r.text), f64::from(r.label)))
            .collect();
        let mut weights = vec![0.0; DIM];
        let mut bias = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut step = 0u64;
        for _ in 0..config.iterations {
            order.shuffle(&mut rng);
            for &i in &order {
                let (x, y) = &examples[i];
                let z = bias + x.iter().map(|&(j, v)| weights[j as usize] * v).sum::<f64>();
                let grad = sigmoid(z) - y;
                let lr = config.learning_rate / (1.0 + 1e-4 * step as f64);
                for &(j, v) in x {
                    let w = &mut weights[j as usize];
                    *w -= lr * (grad * v + config.l2 * *w);
                }
                bias -= lr * grad;
                step += 1;
            }
        }
        Self {
            manifest: ModelManifest {
                backend: super::Backend::Lightweight,
                seed: config.seed,
                tokenizer_version: TOKENIZER_VERSION.into(),
                registry_version: None,
                decision_threshold: config.decision_threshold,
                iterations: config.iterations,
                trained_rows: rows.len(),
            },
            weights,
            bias,
        }
    }

    pub fn manifest(&self) -> &ModelManifest {
        &self.manifest
    }

    pub fn probability(&self, text: &str) -> f64 {
        let x = featurize(text);
        sigmoid(self.bias + x.iter().map(|&(j, v)| self.weights[j as usize] * v).sum::<f64>())
    }

    pub fn save(&self, dir: &Path) -> Result<(), ClassifyError> {
        std::fs::create_dir_all(dir)?;
        self.manifest.save(dir)?;
        let stored = StoredWeights {
            bias: self.bias,
            weights: self
                .weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, w)| (i as u32, *w))
                .collect(),
        };
        std::fs::write(dir.join("weights.json"), serde_json::to_string(&stored)?)?;
        Ok(())
    }

    pub(super) fn load_with_manifest(dir: &Path, manifest: ModelManifest) -> Result<Self, ClassifyError> {
        if manifest.tokenizer_version != TOKENIZER_VERSION {
            return Err(ClassifyError::Artifact(format!(
                "unsupported tokenizer `{}`",
                manifest.tokenizer_version
            )));
        }
        let stored: StoredWeights = serde_json::from_str(&std::fs::read_to_string(dir.join("weights.json"))?)?;
        let mut weights = vec![0.0; DIM];
        for (i, w) in stored.weights {
            let slot = weights
                .get_mut(i as usize)
                .ok_or_else(|| ClassifyError::Artifact(format!("weight index {i} out of range")))?;
            *slot = w;
        }
        Ok(Self {
            manifest,
            weights,
            bias: stored.bias,
        })
    }
}

impl SentenceClassifier for LinearClassifier {
    fn predict(&self, text: &str) -> ScoredLabel {
        if text.trim().is_empty() {
            return ScoredLabel::empty();
        }
        ScoredLabel::from_probability(self.probability(text), self.manifest.decision_threshold)
    }

    fn backend_id(&self) -> String {
        format!("lightweight:{}:seed{}", TOKENIZER_VERSION, self.manifest.seed)
    }

    fn decision_threshold(&self) -> f64 {
        self.manifest.decision_threshold
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn featurize_is_sparse_sorted_and_normalised() {
        let x = featurize("Led the TEAM, led the team!");
        assert!(x.windows(2).all(|w| w[0].0 < w[1].0));
        let norm: f64 = x.iter().map(|(_, v)| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(featurize("!!!").is_empty());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!(sigmoid(800.0) <= 1.0);
    }
}
