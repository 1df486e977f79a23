//! Binary leadership sentence classification behind one interface.
//!
//! Two training backends are recognised. `lightweight` (hashed n-gram
//! logistic regression) always works and is deterministic; `transformer`
//! requires an external fine-tuned checkpoint and reports
//! [`ClassifyError::BackendUnavailable`] in this build. The phrase-library
//! baseline lives in [`lexicon`].

mod lexicon;
mod linear;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evalmetrics::{weighted_metrics_from_labels, MetricsError};

pub use lexicon::{lexicon_predict, LexiconClassifier, LexiconPrediction, PhraseLibrary, PhraseMatch};
pub(crate) use lexicon::fold as fold_char;
pub use linear::{featurize, LinearClassifier, TOKENIZER_VERSION};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("training set contains only label {0}")]
    SingleClassTrainingSet(u8),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("backend `{0}` is not available in this build")]
    BackendUnavailable(String),
    #[error("learning-curve size {size} exceeds dataset size {available}")]
    SizeExceedsDataset { size: usize, available: usize },
    #[error("invalid training configuration: {0}")]
    BadConfig(String),
    #[error("invalid phrase library: {0}")]
    InvalidLibrary(String),
    #[error("model artifact: {0}")]
    Artifact(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Positive-class probability and the label it implies under the decision
/// threshold: `label == 1` iff `confidence >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredLabel {
    pub label: u8,
    pub confidence: f64,
}

impl ScoredLabel {
    pub fn from_probability(confidence: f64, threshold: f64) -> Self {
        Self {
            label: u8::from(confidence >= threshold),
            confidence,
        }
    }

    /// Convention for empty input: label 0 with confidence 0.
    pub fn empty() -> Self {
        Self {
            label: 0,
            confidence: 0.0,
        }
    }
}

pub trait SentenceClassifier: Send + Sync {
    fn predict(&self, text: &str) -> ScoredLabel;

    fn predict_batch(&self, texts: &[&str]) -> Vec<ScoredLabel> {
        texts.iter().map(|t| self.predict(t)).collect()
    }

    fn backend_id(&self) -> String;

    fn decision_threshold(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Transformer,
    Lightweight,
    Lexicon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub backend: Backend,
    pub seed: u64,
    pub iterations: usize,
    pub decision_threshold: f64,
    pub max_train_rows: Option<usize>,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Lightweight,
            seed: 0,
            iterations: 10,
            decision_threshold: 0.5,
            max_train_rows: None,
            learning_rate: 0.5,
            l2: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub text: String,
    pub label: u8,
}

impl TrainingRow {
    pub fn new(text: impl Into<String>, label: u8) -> Self {
        Self {
            text: text.into(),
            label,
        }
    }
}

/// Contents of `manifest.json` in a model artifact directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub backend: Backend,
    pub seed: u64,
    pub tokenizer_version: String,
    #[serde(default)]
    pub registry_version: Option<String>,
    pub decision_threshold: f64,
    #[serde(default)]
    pub iterations: usize,
    #[serde(default)]
    pub trained_rows: usize,
}

impl ModelManifest {
    pub const FILE: &'static str = "manifest.json";

    pub fn load(dir: &Path) -> Result<Self, ClassifyError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(dir.join(Self::FILE))?)?)
    }

    pub fn save(&self, dir: &Path) -> Result<(), ClassifyError> {
        std::fs::write(dir.join(Self::FILE), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

pub fn train_classifier(rows: &[TrainingRow], config: &TrainConfig) -> Result<LinearClassifier, ClassifyError> {
    if !(config.decision_threshold > 0.0 && config.decision_threshold < 1.0) {
        return Err(ClassifyError::BadConfig("decision_threshold must lie in (0, 1)".into()));
    }
    match config.backend {
        Backend::Lightweight => {}
        Backend::Transformer => {
            return Err(ClassifyError::BackendUnavailable(
                "transformer (fine-tuning needs an external checkpoint and accelerator runtime)".into(),
            ))
        }
        Backend::Lexicon => return Err(ClassifyError::BadConfig("the lexicon baseline is not trainable".into())),
    }
    let rows = match config.max_train_rows {
        Some(max) if max < rows.len() => &rows[..max],
        _ => rows,
    };
    if rows.is_empty() {
        return Err(ClassifyError::EmptyTrainingSet);
    }
    if let Some(bad) = rows.iter().find(|r| r.label > 1) {
        return Err(ClassifyError::BadConfig(format!("non-binary label {}", bad.label)));
    }
    let first = rows[0].label;
    if rows.iter().all(|r| r.label == first) {
        return Err(ClassifyError::SingleClassTrainingSet(first));
    }
    Ok(LinearClassifier::train(rows, config))
}

/// Loads any supported model artifact directory.
pub fn load_classifier(dir: &Path) -> Result<Box<dyn SentenceClassifier>, ClassifyError> {
    let manifest = ModelManifest::load(dir)?;
    match manifest.backend {
        Backend::Lightweight => Ok(Box::new(LinearClassifier::load_with_manifest(dir, manifest)?)),
        Backend::Lexicon => {
            let path = dir.join("phrase_library.json");
            let library = if path.is_file() {
                PhraseLibrary::load(&path)?
            } else {
                PhraseLibrary::bundled()
            };
            Ok(Box::new(LexiconClassifier::new(library)))
        }
        Backend::Transformer => Err(ClassifyError::BackendUnavailable("transformer".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub size: usize,
    pub weighted_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub accuracy: f64,
}

/// Trains on seeded samples of increasing size and evaluates each model on
/// `eval`. Monotonic improvement is reported, not enforced.
pub fn learning_curve(
    dataset: &[TrainingRow],
    sizes: &[usize],
    eval: &[TrainingRow],
    config: &TrainConfig,
) -> Result<Vec<CurvePoint>, ClassifyError> {
    if sizes.windows(2).any(|w| w[0] > w[1]) {
        return Err(ClassifyError::BadConfig("sizes must be ascending".into()));
    }
    if let Some(&size) = sizes.iter().find(|&&s| s > dataset.len()) {
        return Err(ClassifyError::SizeExceedsDataset {
            size,
            available: dataset.len(),
        });
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    let truth: Vec<u8> = eval.iter().map(|r| r.label).collect();
    let texts: Vec<&str> = eval.iter().map(|r| r.text.as_str()).collect();

    sizes
        .iter()
        .map(|&size| {
            let sample: Vec<TrainingRow> = order[..size].iter().map(|&i| dataset[i].clone()).collect();
            let model = train_classifier(&sample, &TrainConfig { max_train_rows: None, ..config.clone() })?;
            let pred: Vec<u8> = model.predict_batch(&texts).into_iter().map(|s| s.label).collect();
            let report = weighted_metrics_from_labels(&truth, &pred)?;
            Ok(CurvePoint {
                size,
                weighted_f1: report.weighted.f1,
                weighted_precision: report.weighted.precision,
                weighted_recall: report.weighted.recall,
                accuracy: report.accuracy,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::separable_rows;

    #[test]
    fn rejects_single_class_and_unavailable_backend() {
        let rows = vec![TrainingRow::new("a", 1), TrainingRow::new("b", 1)];
        assert!(matches!(
            train_classifier(&rows, &TrainConfig::default()),
            Err(ClassifyError::SingleClassTrainingSet(1))
        ));
        let cfg = TrainConfig {
            backend: Backend::Transformer,
            ..Default::default()
        };
        assert!(matches!(train_classifier(&rows, &cfg), Err(ClassifyError::BackendUnavailable(_))));
        assert!(matches!(train_classifier(&[], &TrainConfig::default()), Err(ClassifyError::EmptyTrainingSet)));
    }

    #[test]
    fn separable_set_is_learned() {
        let rows = separable_rows(200, 11);
        let (train, test) = rows.split_at(150);
        let model = train_classifier(train, &TrainConfig::default()).unwrap();
        let truth: Vec<u8> = test.iter().map(|r| r.label).collect();
        let pred: Vec<u8> = test.iter().map(|r| model.predict(&r.text).label).collect();
        let f1 = weighted_metrics_from_labels(&truth, &pred).unwrap().weighted.f1;
        assert!(f1 >= 0.95, "weighted F1 {f1}");
    }

    #[test]
    fn same_seed_same_predictions() {
        let rows = separable_rows(120, 5);
        let a = train_classifier(&rows, &TrainConfig::default()).unwrap();
        let b = train_classifier(&rows, &TrainConfig::default()).unwrap();
        assert_eq!(a, b);
        let probe = separable_rows(20, 99);
        for r in &probe {
            assert_eq!(a.predict(&r.text), b.predict(&r.text));
        }
    }

    #[test]
    fn empty_text_convention_and_batch_consistency() {
        let model = train_classifier(&separable_rows(60, 1), &TrainConfig::default()).unwrap();
        assert_eq!(model.predict(""), ScoredLabel::empty());
        let texts = ["She led the team through the crisis", "The office is on the third floor"];
        let batch = model.predict_batch(&texts);
        assert_eq!(batch, vec![model.predict(texts[0]), model.predict(texts[1])]);
        for s in batch {
            assert_eq!(s.label == 1, s.confidence >= model.decision_threshold());
        }
    }

    #[test]
    fn artifact_round_trip() {
        let model = train_classifier(&separable_rows(60, 2), &TrainConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        model.save(dir.path()).unwrap();
        let loaded = load_classifier(dir.path()).unwrap();
        for r in separable_rows(10, 3) {
            assert_eq!(loaded.predict(&r.text), model.predict(&r.text));
        }
    }

    #[test]
    fn learning_curve_sizes() {
        let data = separable_rows(300, 4);
        let eval = separable_rows(50, 8);
        let cfg = TrainConfig::default();
        let full = learning_curve(&data, &[300], &eval, &cfg).unwrap();
        assert_eq!(full.len(), 1);
        assert_eq!(full[0].size, 300);
        assert!(matches!(
            learning_curve(&data, &[1_000_000_000], &eval, &cfg),
            Err(ClassifyError::SizeExceedsDataset { .. })
        ));
        assert!(learning_curve(&data, &[200, 50], &eval, &cfg).is_err());
    }
}
