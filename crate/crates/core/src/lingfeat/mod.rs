//! 119-dimensional linguistic count features per sentence and z-score
//! normalization.
//!
//! The feature layout lives in a versioned registry document (see
//! `data/feature_registry.json`) rather than in code: 17 coarse POS counts,
//! 50 fine tag counts, 40 dependency-relation counts, 8 entity-type counts,
//! 3 surface counts and the sentence character length. The exact composition
//! used by any prior system is unknown; this registry is a documented
//! stand-in that can be swapped for another 119-entry registry.

mod tagger;

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::SentenceRecord;

pub use tagger::{RuleTagger, Tagger, TokenAnnotation, RULE_TAGGER_VERSION};

pub const FEATURE_COUNT: usize = 119;
pub const STD_FLOOR: f64 = 1e-12;
const BUNDLED_REGISTRY: &str = include_str!("../../data/feature_registry.json");

#[derive(Debug, Error)]
pub enum LingFeatError {
    #[error("linguistic tagger unavailable: {0}")]
    TaggerUnavailable(String),
    #[error("registry mismatch: {0}")]
    RegistryMismatch(String),
    #[error("invalid feature registry: {0}")]
    InvalidRegistry(String),
    #[error("cannot fit normalization on an empty matrix")]
    EmptyMatrix,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorKind {
    CoarsePosCount,
    FineTagCount,
    DependencyRelationCount,
    EntityTypeCount,
    SurfaceCount,
    CharLength,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: ExtractorKind,
}

impl FeatureSpec {
    /// Category after the `prefix:` part of the name, e.g. `NOUN` for `pos:NOUN`.
    pub fn category(&self) -> &str {
        self.name.split_once(':').map_or(self.name.as_str(), |(_, c)| c)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureRegistry {
    pub version: String,
    pub features: Vec<FeatureSpec>,
}

impl FeatureRegistry {
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_REGISTRY).expect("bundled registry is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, LingFeatError> {
        let registry: Self = serde_json::from_str(text)?;
        registry.validate()?;
        Ok(registry)
    }

    pub fn load(path: &Path) -> Result<Self, LingFeatError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), LingFeatError> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), LingFeatError> {
        if self.features.len() != FEATURE_COUNT {
            return Err(LingFeatError::InvalidRegistry(format!(
                "expected {FEATURE_COUNT} features, found {}",
                self.features.len()
            )));
        }
        let char_lengths = self.features.iter().filter(|f| f.kind == ExtractorKind::CharLength).count();
        if char_lengths != 1 {
            return Err(LingFeatError::InvalidRegistry(format!(
                "expected exactly one char_length feature, found {char_lengths}"
            )));
        }
        let mut names = HashSet::new();
        for f in &self.features {
            if !names.insert(f.name.as_str()) {
                return Err(LingFeatError::InvalidRegistry(format!("duplicate feature name `{}`", f.name)));
            }
        }
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub registry_version: String,
    pub values: Vec<f64>,
}

fn surface_count(annotations: &[TokenAnnotation], which: &str) -> f64 {
    annotations
        .iter()
        .filter(|a| match which {
            "digit_tokens" => !a.text.is_empty() && a.text.chars().all(|c| c.is_ascii_digit()),
            "word_tokens" => !a.is_punct,
            "stopwords" => a.is_stop,
            _ => false,
        })
        .count() as f64
}

/// Counts, for each registry entry, the tokens whose annotation matches the
/// entry's category. The `char_length` entry is taken from the sentence record.
pub fn extract_features(
    sentence: &SentenceRecord,
    tagger: &dyn Tagger,
    registry: &FeatureRegistry,
) -> Result<FeatureVector, LingFeatError> {
    registry.validate()?;
    let annotations = if sentence.text.is_empty() {
        Vec::new()
    } else {
        tagger.annotate(&sentence.text)?
    };
    let values = registry
        .features
        .iter()
        .map(|spec| {
            let cat = spec.category();
            let count = |pred: &dyn Fn(&TokenAnnotation) -> bool| annotations.iter().filter(|a| pred(a)).count() as f64;
            match spec.kind {
                ExtractorKind::CoarsePosCount => count(&|a| a.pos == cat),
                ExtractorKind::FineTagCount => count(&|a| a.tag == cat),
                ExtractorKind::DependencyRelationCount => count(&|a| a.dep == cat),
                ExtractorKind::EntityTypeCount => count(&|a| a.ent_type.as_deref() == Some(cat)),
                ExtractorKind::SurfaceCount => surface_count(&annotations, cat),
                ExtractorKind::CharLength => sentence.char_length as f64,
            }
        })
        .collect();
    Ok(FeatureVector {
        registry_version: registry.version.clone(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub registry_version: String,
    pub mean: Vec<f64>,
    /// Population standard deviation, floored at [`STD_FLOOR`].
    pub std: Vec<f64>,
}

impl NormalizationStats {
    pub fn identity(registry_version: &str, dim: usize) -> Self {
        Self {
            registry_version: registry_version.to_owned(),
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn load(path: &Path) -> Result<Self, LingFeatError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), LingFeatError> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

pub fn fit_normalizer(matrix: &[FeatureVector]) -> Result<NormalizationStats, LingFeatError> {
    let first = matrix.first().ok_or(LingFeatError::EmptyMatrix)?;
    let dim = first.values.len();
    for row in matrix {
        if row.registry_version != first.registry_version || row.values.len() != dim {
            return Err(LingFeatError::RegistryMismatch(format!(
                "row from `{}` ({} values) in a `{}` matrix ({dim} values)",
                row.registry_version,
                row.values.len(),
                first.registry_version
            )));
        }
    }
    let n = matrix.len() as f64;
    let mut mean = vec![0.0; dim];
    for row in matrix {
        for (m, v) in mean.iter_mut().zip(&row.values) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for row in matrix {
        for ((s, v), m) in var.iter_mut().zip(&row.values).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
    Ok(NormalizationStats {
        registry_version: first.registry_version.clone(),
        mean,
        std,
    })
}

pub fn apply_normalizer(vector: &FeatureVector, stats: &NormalizationStats) -> Result<FeatureVector, LingFeatError> {
    if vector.registry_version != stats.registry_version || vector.values.len() != stats.mean.len() {
        return Err(LingFeatError::RegistryMismatch(format!(
            "vector from `{}` cannot use stats fitted on `{}`",
            vector.registry_version, stats.registry_version
        )));
    }
    let values = vector
        .values
        .iter()
        .zip(stats.mean.iter().zip(&stats.std))
        .map(|(v, (m, s))| (v - m) / s)
        .collect();
    Ok(FeatureVector {
        registry_version: vector.registry_version.clone(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Span;

    fn sentence(text: &str) -> SentenceRecord {
        SentenceRecord::new("s", "L", text, Span::new(0, text.chars().count()))
    }

    fn column(values: &[f64]) -> Vec<FeatureVector> {
        values
            .iter()
            .map(|&v| FeatureVector {
                registry_version: "t".into(),
                values: vec![v],
            })
            .collect()
    }

    #[test]
    fn bundled_registry_shape() {
        let reg = FeatureRegistry::bundled();
        assert_eq!(reg.features.len(), FEATURE_COUNT);
        let count = |k| reg.features.iter().filter(|f| f.kind == k).count();
        assert_eq!(count(ExtractorKind::CoarsePosCount), 17);
        assert_eq!(count(ExtractorKind::FineTagCount), 50);
        assert_eq!(count(ExtractorKind::DependencyRelationCount), 40);
        assert_eq!(count(ExtractorKind::EntityTypeCount), 8);
        assert_eq!(count(ExtractorKind::SurfaceCount), 3);
        assert_eq!(count(ExtractorKind::CharLength), 1);
    }

    #[test]
    fn registry_validation_catches_duplicates() {
        let mut reg = FeatureRegistry::bundled();
        reg.features[1].name = reg.features[0].name.clone();
        assert!(reg.validate().is_err());
        reg.features.pop();
        assert!(reg.validate().is_err());
    }

    #[test]
    fn char_length_feature() {
        let reg = FeatureRegistry::bundled();
        let idx = reg.features.iter().position(|f| f.kind == ExtractorKind::CharLength).unwrap();
        let v = extract_features(&sentence("abc def"), &RuleTagger, &reg).unwrap();
        assert_eq!(v.values[idx], 7.0);
    }

    #[test]
    fn empty_sentence_is_all_zero() {
        let reg = FeatureRegistry::bundled();
        let v = extract_features(&sentence(""), &RuleTagger, &reg).unwrap();
        assert_eq!(v.values.len(), FEATURE_COUNT);
        assert!(v.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zscore_hand_example() {
        let stats = fit_normalizer(&column(&[1.0, 2.0, 3.0])).unwrap();
        assert!((stats.mean[0] - 2.0).abs() < 1e-12);
        assert!((stats.std[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let z: Vec<f64> = column(&[1.0, 2.0, 3.0])
            .iter()
            .map(|r| apply_normalizer(r, &stats).unwrap().values[0])
            .collect();
        assert!((z[0] + 1.224744871391589).abs() < 1e-12);
        assert_eq!(z[1], 0.0);
        assert!((z[2] - 1.224744871391589).abs() < 1e-12);
    }

    #[test]
    fn constant_column_and_identity() {
        let stats = fit_normalizer(&column(&[5.0, 5.0, 5.0])).unwrap();
        assert_eq!(stats.std[0], STD_FLOOR);
        assert_eq!(apply_normalizer(&column(&[5.0])[0], &stats).unwrap().values, vec![0.0]);

        let v = FeatureVector {
            registry_version: "t".into(),
            values: vec![3.5, -1.0],
        };
        assert_eq!(apply_normalizer(&v, &NormalizationStats::identity("t", 2)).unwrap(), v);
    }

    #[test]
    fn normalizer_errors() {
        assert!(matches!(fit_normalizer(&[]), Err(LingFeatError::EmptyMatrix)));
        let mut rows = column(&[1.0, 2.0]);
        rows[1].registry_version = "other".into();
        assert!(matches!(fit_normalizer(&rows), Err(LingFeatError::RegistryMismatch(_))));
        let stats = NormalizationStats::identity("other", 1);
        assert!(matches!(apply_normalizer(&column(&[1.0])[0], &stats), Err(LingFeatError::RegistryMismatch(_))));
    }
}
