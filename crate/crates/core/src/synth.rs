//! Seeded synthetic sentences with a known decision rule, for desk-scale
//! checks of the trainable components. Positive sentences draw from a
//! leadership vocabulary and negatives from a disjoint neutral one, so the
//! classes are linearly separable on word features.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classify::TrainingRow;
use crate::corpus::{Corpus, CorpusError, LetterDocument, SentenceRecord, Span, WriterRole};

const SUBJECTS: &[&str] = &["She", "He", "They", "The candidate", "My student", "This applicant"];

const LEAD_VERBS: &[&str] = &[
    "led", "mentored", "organized", "championed", "coordinated", "inspired", "spearheaded", "guided",
];
const LEAD_OBJECTS: &[&str] = &[
    "the team", "a cross-functional group", "new volunteers", "the project launch", "junior engineers",
    "a student committee", "the research group", "several initiatives",
];
const LEAD_TAILS: &[&str] = &[
    "with remarkable vision", "through a difficult deadline", "and motivated everyone", "toward a shared goal",
    "with clear communication", "and fostered collaboration",
];

const NEUTRAL_VERBS: &[&str] = &["attended", "completed", "enrolled in", "submitted", "visited", "reviewed"];
const NEUTRAL_OBJECTS: &[&str] = &[
    "my course", "the weekly seminar", "an assignment", "the library", "a standard report", "the lab manual",
    "two semesters", "the syllabus",
];
const NEUTRAL_TAILS: &[&str] = &[
    "last spring", "on time", "in the afternoon", "during the term", "as required", "before the exam",
];

fn compose(rng: &mut ChaCha8Rng, positive: bool) -> String {
    let (verbs, objects, tails) = if positive {
        (LEAD_VERBS, LEAD_OBJECTS, LEAD_TAILS)
    } else {
        (NEUTRAL_VERBS, NEUTRAL_OBJECTS, NEUTRAL_TAILS)
    };
    format!(
        "{} {} {} {}.",
        SUBJECTS.choose(rng).expect("non-empty"),
        verbs.choose(rng).expect("non-empty"),
        objects.choose(rng).expect("non-empty"),
        tails.choose(rng).expect("non-empty"),
    )
}

/// `n` labelled rows, each positive with probability one half.
pub fn separable_rows(n: usize, seed: u64) -> Vec<TrainingRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let positive = rng.random_bool(0.5);
            TrainingRow::new(compose(&mut rng, positive), u8::from(positive))
        })
        .collect()
}

/// Unlabelled corpus with one letter per applicant plus the generating
/// label of every sentence.
pub fn synthetic_corpus(
    applicants: usize,
    sentences_per_letter: usize,
    positive_rate: f64,
    seed: u64,
) -> Result<(Corpus, BTreeMap<String, u8>), CorpusError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut builder = Corpus::builder();
    let mut truth = BTreeMap::new();
    for a in 0..applicants {
        let letter_id = format!("syn-a{a:04}-l0");
        let mut raw = String::new();
        let mut ids = Vec::new();
        for s in 0..sentences_per_letter {
            let positive = rng.random_bool(positive_rate);
            let text = compose(&mut rng, positive);
            if !raw.is_empty() {
                raw.push(' ');
            }
            let start = raw.chars().count();
            raw.push_str(&text);
            let id = format!("{letter_id}-s{s:03}");
            builder = builder.sentence(SentenceRecord::new(
                id.clone(),
                letter_id.clone(),
                &text,
                Span::new(start, start + text.chars().count()),
            ));
            truth.insert(id.clone(), u8::from(positive));
            ids.push(id);
        }
        builder = builder.letter(LetterDocument {
            letter_id,
            applicant_id: format!("app-{a:04}"),
            writer_role: WriterRole::Unknown,
            raw_text: raw,
            sentences: ids,
        });
    }
    Ok((builder.build()?, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_both_classes() {
        let a = separable_rows(50, 3);
        assert_eq!(a, separable_rows(50, 3));
        assert!(a.iter().any(|r| r.label == 1) && a.iter().any(|r| r.label == 0));
    }

    #[test]
    fn corpus_is_consistent() {
        let (corpus, truth) = synthetic_corpus(4, 5, 0.3, 1).unwrap();
        assert_eq!(corpus.letters().len(), 4);
        assert_eq!(corpus.sentences().len(), 20);
        assert_eq!(truth.len(), 20);
        for s in corpus.sentences() {
            let letter = corpus.letter(&s.letter_id).unwrap();
            assert_eq!(s.span.slice(&letter.raw_text), Some(s.text.as_str()));
        }
    }
}
