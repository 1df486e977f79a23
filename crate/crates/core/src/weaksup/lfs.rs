//! Labeling-function adapters.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use super::{LabelingFunction, RandomForest, Verdict, Vote, WeakSupError, ForestConfig};
use crate::classify::{featurize, lexicon_predict, PhraseLibrary, SentenceClassifier, TrainingRow};
use crate::corpus::SentenceRecord;
use crate::lingfeat::{apply_normalizer, extract_features, fit_normalizer, FeatureRegistry, NormalizationStats, Tagger};

/// Turns a positive-class probability into a vote whose confidence is the
/// probability of the chosen class.
fn vote_from_probability(p: f64) -> Vote {
    if p >= 0.5 {
        Vote::label(1, p)
    } else {
        Vote::label(0, 1.0 - p)
    }
}

/// Same vote for every sentence.
#[derive(Debug, Clone)]
pub struct ConstantLf {
    id: String,
    vote: Vote,
}

impl ConstantLf {
    pub fn new(id: impl Into<String>, vote: Vote) -> Self {
        Self { id: id.into(), vote }
    }
}

impl LabelingFunction for ConstantLf {
    fn id(&self) -> &str {
        &self.id
    }

    fn vote(&self, _: &SentenceRecord) -> Result<Vote, WeakSupError> {
        Ok(self.vote)
    }
}

/// Fixed votes keyed by sentence id; ids in `failing` return an error.
#[derive(Debug, Clone)]
pub struct ScriptedLf {
    id: String,
    script: BTreeMap<String, Vote>,
    fallback: Vote,
    failing: BTreeSet<String>,
}

impl ScriptedLf {
    pub fn new(id: impl Into<String>, script: BTreeMap<String, Vote>, fallback: Vote) -> Self {
        Self {
            id: id.into(),
            script,
            fallback,
            failing: BTreeSet::new(),
        }
    }

    pub fn failing_on(mut self, sentence_id: impl Into<String>) -> Self {
        self.failing.insert(sentence_id.into());
        self
    }
}

impl LabelingFunction for ScriptedLf {
    fn id(&self) -> &str {
        &self.id
    }

    fn vote(&self, s: &SentenceRecord) -> Result<Vote, WeakSupError> {
        if self.failing.contains(&s.sentence_id) {
            return Err(WeakSupError::LabelingFunctionFailure {
                lf_id: self.id.clone(),
                message: format!("scripted failure on {}", s.sentence_id),
            });
        }
        Ok(self.script.get(&s.sentence_id).copied().unwrap_or(self.fallback))
    }
}

/// Positive at a fixed confidence on any phrase-library match, otherwise abstains.
#[derive(Debug, Clone)]
pub struct KeywordLf {
    id: String,
    library: PhraseLibrary,
    confidence: f64,
}

impl KeywordLf {
    pub fn new(id: impl Into<String>, library: PhraseLibrary, confidence: f64) -> Self {
        Self {
            id: id.into(),
            library,
            confidence,
        }
    }
}

impl LabelingFunction for KeywordLf {
    fn id(&self) -> &str {
        &self.id
    }

    fn vote(&self, s: &SentenceRecord) -> Result<Vote, WeakSupError> {
        Ok(if lexicon_predict(&s.text, &self.library).label == 1 {
            Vote::label(1, self.confidence)
        } else {
            Vote::abstain()
        })
    }
}

/// Wraps any trained sentence classifier.
pub struct ClassifierLf {
    id: String,
    classifier: Arc<dyn SentenceClassifier>,
}

impl ClassifierLf {
    pub fn new(id: impl Into<String>, classifier: Arc<dyn SentenceClassifier>) -> Self {
        Self {
            id: id.into(),
            classifier,
        }
    }
}

impl LabelingFunction for ClassifierLf {
    fn id(&self) -> &str {
        &self.id
    }

    fn vote(&self, s: &SentenceRecord) -> Result<Vote, WeakSupError> {
        if s.text.trim().is_empty() {
            return Ok(Vote::abstain());
        }
        let scored = self.classifier.predict(&s.text);
        Ok(if scored.label == 1 {
            Vote::label(1, scored.confidence)
        } else {
            Vote::label(0, 1.0 - scored.confidence)
        })
    }
}

/// Few-shot embedding classifier: cosine similarity of the sentence's
/// hashed n-gram embedding to the per-class centroids of a handful of
/// labelled examples, squashed to a probability.
#[derive(Debug, Clone)]
pub struct FewShotLf {
    id: String,
    centroids: [HashMap<u32, f64>; 2],
    scale: f64,
}

impl FewShotLf {
    pub const DEFAULT_SCALE: f64 = 8.0;

    pub fn fit(id: impl Into<String>, examples: &[TrainingRow], scale: f64) -> Result<Self, WeakSupError> {
        let mut centroids: [HashMap<u32, f64>; 2] = Default::default();
        for class in 0..2u8 {
            let members: Vec<&TrainingRow> = examples.iter().filter(|r| r.label == class).collect();
            if members.is_empty() {
                return Err(WeakSupError::BadConfig(format!("few-shot examples lack class {class}")));
            }
            let c = &mut centroids[usize::from(class)];
            for row in &members {
                for (j, v) in featurize(&row.text) {
                    *c.entry(j).or_default() += v;
                }
            }
            let norm = c.values().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                c.values_mut().for_each(|v| *v /= norm);
            }
        }
        Ok(Self {
            id: id.into(),
            centroids,
            scale,
        })
    }

    pub fn probability(&self, text: &str) -> Option<f64> {
        let x = featurize(text);
        if x.is_empty() {
            return None;
        }
        let sim = |c: &HashMap<u32, f64>| x.iter().map(|(j, v)| c.get(j).copied().unwrap_or(0.0) * v).sum::<f64>();
        let margin = sim(&self.centroids[1]) - sim(&self.centroids[0]);
        Some(1.0 / (1.0 + (-self.scale * margin).exp()))
    }
}

impl LabelingFunction for FewShotLf {
    fn id(&self) -> &str {
        &self.id
    }

    fn vote(&self, s: &SentenceRecord) -> Result<Vote, WeakSupError> {
        Ok(self.probability(&s.text).map_or_else(Vote::abstain, vote_from_probability))
    }
}

/// Random forest over normalised linguistic feature vectors.
pub struct ForestLf {
    id: String,
    forest: RandomForest,
    tagger: Arc<dyn Tagger>,
    registry: FeatureRegistry,
    stats: NormalizationStats,
}

impl ForestLf {
    pub fn train(
        id: impl Into<String>,
        examples: &[(SentenceRecord, u8)],
        tagger: Arc<dyn Tagger>,
        registry: FeatureRegistry,
        config: &ForestConfig,
    ) -> Result<Self, WeakSupError> {
        let feat_err = |e: crate::lingfeat::LingFeatError| WeakSupError::BadConfig(e.to_string());
        let raw = examples
            .iter()
            .map(|(s, _)| extract_features(s, tagger.as_ref(), &registry))
            .collect::<Result<Vec<_>, _>>()
            .map_err(feat_err)?;
        let stats = fit_normalizer(&raw).map_err(feat_err)?;
        let x = raw
            .iter()
            .map(|v| apply_normalizer(v, &stats).map(|n| n.values))
            .collect::<Result<Vec<_>, _>>()
            .map_err(feat_err)?;
        let y: Vec<u8> = examples.iter().map(|(_, l)| *l).collect();
        let forest = RandomForest::fit(&x, &y, config)?;
        Ok(Self {
            id: id.into(),
            forest,
            tagger,
            registry,
            stats,
        })
    }

    pub fn stats(&self) -> &NormalizationStats {
        &self.stats
    }
}

impl LabelingFunction for ForestLf {
    fn id(&self) -> &str {
        &self.id
    }

    fn vote(&self, s: &SentenceRecord) -> Result<Vote, WeakSupError> {
        let fail = |e: crate::lingfeat::LingFeatError| WeakSupError::LabelingFunctionFailure {
            lf_id: self.id.clone(),
            message: e.to_string(),
        };
        let raw = extract_features(s, self.tagger.as_ref(), &self.registry).map_err(fail)?;
        let x = apply_normalizer(&raw, &self.stats).map_err(fail)?;
        let vote = vote_from_probability(self.forest.predict_proba(&x.values));
        debug_assert!(vote.verdict != Verdict::Abstain);
        Ok(vote)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Span;
    use crate::lingfeat::RuleTagger;
    use crate::synth::separable_rows;

    fn record(id: &str, text: &str) -> SentenceRecord {
        SentenceRecord::new(id, "l", text, Span::new(0, text.chars().count()))
    }

    #[test]
    fn few_shot_separates_synthetic_classes() {
        let lf = FewShotLf::fit("fs", &separable_rows(16, 1), FewShotLf::DEFAULT_SCALE).unwrap();
        let probe = separable_rows(100, 2);
        let correct = probe
            .iter()
            .filter(|r| lf.vote(&record("s", &r.text)).unwrap().verdict == Verdict::from_label(r.label))
            .count();
        assert!(correct >= 90, "{correct}/100");
        assert_eq!(lf.vote(&record("s", "...")).unwrap(), Vote::abstain());
    }

    #[test]
    fn forest_lf_votes_with_probability_confidence() {
        let rows = separable_rows(80, 3);
        let examples: Vec<(SentenceRecord, u8)> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (record(&format!("s{i}"), &r.text), r.label))
            .collect();
        let lf = ForestLf::train(
            "rf",
            &examples,
            Arc::new(RuleTagger),
            FeatureRegistry::bundled(),
            &ForestConfig::default(),
        )
        .unwrap();
        let v = lf.vote(&examples[0].0).unwrap();
        assert!(v.confidence >= 0.5 && v.confidence <= 1.0);
    }

    #[test]
    fn keyword_lf_abstains_without_match() {
        let lf = KeywordLf::new("kw", PhraseLibrary::bundled(), 0.9);
        assert_eq!(lf.vote(&record("a", "He led the team well.")).unwrap(), Vote::label(1, 0.9));
        assert_eq!(lf.vote(&record("b", "The building is old.")).unwrap(), Vote::abstain());
    }
}
