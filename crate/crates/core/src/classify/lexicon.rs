//! Phrase-library baseline: case-insensitive whole-phrase matching.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassifyError, ScoredLabel, SentenceClassifier};
use crate::corpus::{MicroLabel, Span};

const BUNDLED_LIBRARY: &str = include_str!("../../data/phrase_library.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseLibrary {
    pub version: String,
    pub phrases: BTreeMap<MicroLabel, Vec<String>>,
}

impl PhraseLibrary {
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_LIBRARY).expect("bundled phrase library is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, ClassifyError> {
        let lib: Self = serde_json::from_str(text)?;
        lib.validate()?;
        Ok(lib)
    }

    pub fn load(path: &Path) -> Result<Self, ClassifyError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ClassifyError> {
        for (label, phrases) in &self.phrases {
            let mut seen = HashSet::new();
            for phrase in phrases {
                if phrase.trim().is_empty() {
                    return Err(ClassifyError::InvalidLibrary(format!("empty phrase under {label}")));
                }
                if *phrase != phrase.to_lowercase() {
                    return Err(ClassifyError::InvalidLibrary(format!("phrase `{phrase}` is not lowercase")));
                }
                if !seen.insert(phrase.as_str()) {
                    return Err(ClassifyError::InvalidLibrary(format!("duplicate phrase `{phrase}` under {label}")));
                }
            }
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (MicroLabel, &str)> {
        self.phrases
            .iter()
            .flat_map(|(label, list)| list.iter().map(move |p| (*label, p.as_str())))
    }

    pub fn contains(&self, label: MicroLabel, phrase: &str) -> bool {
        let folded = phrase.trim().to_lowercase();
        self.phrases.get(&label).is_some_and(|list| list.contains(&folded))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseMatch {
    pub micro_label: MicroLabel,
    pub phrase: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconPrediction {
    pub label: u8,
    pub matches: Vec<PhraseMatch>,
}

/// Single-character case fold; characters whose lowercase form expands to
/// several characters are left as is so offsets stay aligned.
pub(crate) fn fold(c: char) -> char {
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(single), None) => single,
        _ => c,
    }
}

/// All whole-phrase occurrences of library phrases in `sentence`, ordered by
/// start offset, then micro-label, then phrase. A match must not be flanked
/// by alphanumeric characters.
pub fn lexicon_predict(sentence: &str, library: &PhraseLibrary) -> LexiconPrediction {
    let text: Vec<char> = sentence.chars().map(fold).collect();
    let mut matches = Vec::new();
    for (label, phrase) in library.iter() {
        let pat: Vec<char> = phrase.chars().map(fold).collect();
        if pat.is_empty() || pat.len() > text.len() {
            continue;
        }
        for start in 0..=text.len() - pat.len() {
            let end = start + pat.len();
            if text[start..end] != pat[..] {
                continue;
            }
            let left_ok = start == 0 || !text[start - 1].is_alphanumeric();
            let right_ok = end == text.len() || !text[end].is_alphanumeric();
            if left_ok && right_ok {
                matches.push(PhraseMatch {
                    micro_label: label,
                    phrase: phrase.to_owned(),
                    span: Span::new(start, end),
                });
            }
        }
    }
    matches.sort_by(|a, b| {
        (a.span.start, a.micro_label, &a.phrase).cmp(&(b.span.start, b.micro_label, &b.phrase))
    });
    LexiconPrediction {
        label: u8::from(!matches.is_empty()),
        matches,
    }
}

/// [`SentenceClassifier`] over [`lexicon_predict`]: confidence 1.0 on any match, else 0.0.
#[derive(Debug, Clone)]
pub struct LexiconClassifier {
    library: PhraseLibrary,
}

impl LexiconClassifier {
    pub fn new(library: PhraseLibrary) -> Self {
        Self { library }
    }

    pub fn library(&self) -> &PhraseLibrary {
        &self.library
    }
}

impl SentenceClassifier for LexiconClassifier {
    fn predict(&self, text: &str) -> ScoredLabel {
        let hit = lexicon_predict(text, &self.library).label == 1;
        ScoredLabel::from_probability(if hit { 1.0 } else { 0.0 }, 0.5)
    }

    fn backend_id(&self) -> String {
        format!("lexicon:{}", self.library.version)
    }

    fn decision_threshold(&self) -> f64 {
        0.5
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn library(phrases: &[(MicroLabel, &str)]) -> PhraseLibrary {
        let mut map: BTreeMap<MicroLabel, Vec<String>> = BTreeMap::new();
        for (l, p) in phrases {
            map.entry(*l).or_default().push(p.to_string());
        }
        PhraseLibrary {
            version: "t".into(),
            phrases: map,
        }
    }

    #[test]
    fn matches_with_offsets() {
        let lib = library(&[(MicroLabel::Teamwork, "led the team")]);
        let p = lexicon_predict("He led the team to ship early", &lib);
        assert_eq!(p.label, 1);
        assert_eq!(
            p.matches,
            vec![PhraseMatch {
                micro_label: MicroLabel::Teamwork,
                phrase: "led the team".into(),
                span: Span::new(3, 15),
            }]
        );
    }

    #[test]
    fn no_match_and_case_insensitivity() {
        let lib = library(&[(MicroLabel::Teamwork, "led the team")]);
        assert_eq!(lexicon_predict("The weather was nice", &lib).label, 0);
        let upper = lexicon_predict("LED THE TEAM through the launch", &lib);
        assert_eq!(upper.matches[0].span, Span::new(0, 12));
    }

    #[test]
    fn requires_whole_phrase_boundaries() {
        let lib = library(&[(MicroLabel::Teamwork, "led the team")]);
        assert_eq!(lexicon_predict("She misled the teams", &lib).label, 0);
        assert_eq!(lexicon_predict("(led the team)", &lib).label, 1);
    }

    #[test]
    fn bundled_library_has_twenty_phrases_per_label() {
        let lib = PhraseLibrary::bundled();
        for label in MicroLabel::ALL {
            assert!(lib.phrases[&label].len() >= 20, "{label}");
        }
    }

    #[test]
    fn library_validation() {
        let dup = library(&[(MicroLabel::Teamwork, "a b"), (MicroLabel::Teamwork, "a b")]);
        assert!(dup.validate().is_err());
        let upper = library(&[(MicroLabel::Innovation, "New Ideas")]);
        assert!(upper.validate().is_err());
    }
}
