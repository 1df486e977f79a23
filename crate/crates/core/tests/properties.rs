//! Property tests for invariants that must hold on arbitrary input, plus a
//! few frozen hand-checked values.

use std::collections::{BTreeMap, BTreeSet};

use lori_core::classify::{lexicon_predict, PhraseLibrary};
use lori_core::corpus::{load_corpus, save_corpus, split_by_applicant, MicroLabel, SentenceRecord, Span, SplitFractions};
use lori_core::evalmetrics::{cohen_kappa, weighted_metrics_from_labels};
use lori_core::lingfeat::{apply_normalizer, extract_features, fit_normalizer, FeatureRegistry, FeatureVector, RuleTagger};
use lori_core::synth::synthetic_corpus;
use lori_core::textprep::{clean_text, segment, CleaningConfig};
use lori_core::weaksup::{build_weak_dataset, LabelingFunction, ScriptedLf, ThresholdPolicy, Vote};
use proptest::prelude::*;

fn binary(n: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..=1, n)
}

fn pair() -> impl Strategy<Value = (Vec<u8>, Vec<u8>)> {
    (1usize..60).prop_flat_map(|n| (binary(n), binary(n)))
}

proptest! {
    #[test]
    fn segments_reproduce_their_spans_and_lose_no_text(raw in "[a-zA-Z .!?\n\"')]{0,120}") {
        let segments = segment(&raw);
        let mut last_end = 0;
        for s in &segments {
            prop_assert!(s.span.start >= last_end && s.span.start < s.span.end);
            prop_assert_eq!(s.span.slice(&raw), Some(s.text.as_str()));
            prop_assert_eq!(s.text.trim(), s.text.as_str());
            last_end = s.span.end;
        }
        let kept: String = segments.iter().flat_map(|s| s.text.chars()).filter(|c| !c.is_whitespace()).collect();
        let all: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
        prop_assert_eq!(kept, all);
    }

    #[test]
    fn clean_text_is_idempotent(s in "\\PC{0,60}", keep in any::<bool>(), collapse in any::<bool>(), case in any::<bool>()) {
        let c = CleaningConfig { keep_whitespace: keep, collapse_whitespace_runs: collapse, preserve_case: case };
        let once = clean_text(&s, &c);
        prop_assert_eq!(clean_text(&once, &c), once.clone());
        prop_assert!(once.chars().all(|ch| ch.is_alphanumeric() || ch == ' '));
    }

    #[test]
    fn kappa_is_symmetric_and_bounded((a, b) in pair()) {
        let ab = cohen_kappa(&a, &b).unwrap();
        prop_assert_eq!(ab.kappa, cohen_kappa(&b, &a).unwrap().kappa);
        prop_assert!((-1.0..=1.0).contains(&ab.kappa));
        prop_assert_eq!(cohen_kappa(&a, &a).unwrap().kappa, 1.0);
    }

    #[test]
    fn weighted_metrics_stay_in_unit_interval((t, p) in pair()) {
        let r = weighted_metrics_from_labels(&t, &p).unwrap();
        for v in [r.weighted.precision, r.weighted.recall, r.weighted.f1, r.accuracy] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        // Weighted recall is accuracy for two classes.
        prop_assert!((r.weighted.recall - r.accuracy).abs() < 1e-12);
    }

    #[test]
    fn weak_labels_do_not_depend_on_lf_order(seed in 0u64..500, rotation in 0usize..4) {
        let (corpus, _) = synthetic_corpus(3, 4, 0.5, seed).unwrap();
        let lfs: Vec<ScriptedLf> = (0..4u64)
            .map(|i| {
                let script: BTreeMap<String, Vote> = corpus
                    .sentences()
                    .iter()
                    .enumerate()
                    .map(|(j, s)| {
                        let k = (seed + i * 7 + j as u64 * 3) % 5;
                        let vote = match k {
                            0 => Vote::abstain(),
                            _ => Vote::label(u8::from(k.is_multiple_of(2)), k as f64 / 5.0),
                        };
                        (s.sentence_id.clone(), vote)
                    })
                    .collect();
                ScriptedLf::new(format!("lf{i}"), script, Vote::abstain())
            })
            .collect();
        let policy = (0..4).fold(ThresholdPolicy::new(), |p, i| p.with(format!("lf{i}"), Some(0.5)));
        let mut refs: Vec<&dyn LabelingFunction> = lfs.iter().map(|l| l as &dyn LabelingFunction).collect();
        let base = build_weak_dataset(&corpus, &refs, &policy, &BTreeSet::new()).unwrap();
        refs.rotate_left(rotation);
        refs.reverse();
        let permuted = build_weak_dataset(&corpus, &refs, &policy, &BTreeSet::new()).unwrap();
        prop_assert_eq!(base.0, permuted.0);
        prop_assert_eq!(base.1, permuted.1);
    }

    #[test]
    fn lexicon_matches_equal_brute_force_scan(words in prop::collection::vec(
        prop::sample::select(vec!["led", "the", "team", "Team", "excellent", "communicator", "novel", "ideas", "and", "teamwork", ",", "."]),
        0..14,
    )) {
        let sentence = words.join(" ");
        let library = PhraseLibrary::bundled();
        let got: BTreeSet<(usize, usize, MicroLabel, String)> = lexicon_predict(&sentence, &library)
            .matches
            .into_iter()
            .map(|m| (m.span.start, m.span.end, m.micro_label, m.phrase))
            .collect();
        // ASCII input, so byte and char offsets agree.
        let lower = sentence.to_lowercase();
        let mut want = BTreeSet::new();
        for (label, phrase) in library.iter() {
            for (start, _) in lower.match_indices(phrase) {
                let end = start + phrase.len();
                let bounded = |i: Option<char>| i.is_none_or(|c| !c.is_alphanumeric());
                if bounded(lower[..start].chars().last()) && bounded(lower[end..].chars().next()) {
                    want.insert((start, end, label, phrase.to_owned()));
                }
            }
        }
        prop_assert_eq!(got, want);
    }

    #[test]
    fn normalized_columns_have_zero_mean(rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 4), 2..30)) {
        let matrix: Vec<FeatureVector> = rows
            .iter()
            .map(|v| FeatureVector { registry_version: "t".into(), values: v.clone() })
            .collect();
        let stats = fit_normalizer(&matrix).unwrap();
        let normalized: Vec<FeatureVector> = matrix.iter().map(|v| apply_normalizer(v, &stats).unwrap()).collect();
        for col in 0..4 {
            let mean = normalized.iter().map(|v| v.values[col]).sum::<f64>() / rows.len() as f64;
            prop_assert!(mean.abs() < 1e-6, "column {} mean {}", col, mean);
            prop_assert!(stats.std[col] > 0.0);
        }
    }
}

#[test]
fn corpus_round_trips_through_disk() {
    let (corpus, _) = synthetic_corpus(5, 6, 0.3, 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_corpus(&corpus, dir.path()).unwrap();
    let loaded = load_corpus(dir.path()).unwrap();
    assert!(loaded == corpus);
    let again = tempfile::tempdir().unwrap();
    save_corpus(&loaded, again.path()).unwrap();
    for f in ["letters.ndrec", "sentences.ndrec", "labels.ndrec"] {
        assert_eq!(std::fs::read(dir.path().join(f)).unwrap(), std::fs::read(again.path().join(f)).unwrap());
    }
}

#[test]
fn splits_are_applicant_disjoint_and_cover_the_corpus() {
    let (corpus, _) = synthetic_corpus(120, 3, 0.5, 4).unwrap();
    for seed in 0..5 {
        let splits = split_by_applicant(&corpus, SplitFractions::new(0.7, 0.15, 0.15), seed).unwrap();
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        let mut applicant_split: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, split) in splits.iter().enumerate() {
            for id in &split.sentence_ids {
                *seen.entry(id.as_str()).or_default() += 1;
                let applicant = corpus.applicant_of_sentence(id).unwrap();
                assert_eq!(*applicant_split.entry(applicant).or_insert(i), i, "{applicant} spans two splits");
            }
        }
        assert_eq!(seen.len(), corpus.sentences().len());
        assert!(seen.values().all(|&c| c == 1));
        let per_split: Vec<usize> = (0..3).map(|i| applicant_split.values().filter(|&&s| s == i).count()).collect();
        assert_eq!(per_split, [84, 18, 18]);
    }
}

#[test]
fn feature_vector_matches_hand_count() {
    let text = "Maria led 3 teams at Google in 2019.";
    let s = SentenceRecord::new("s", "l", text, Span::new(0, text.chars().count()));
    let registry = FeatureRegistry::bundled();
    let v = extract_features(&s, &RuleTagger, &registry).unwrap();
    assert_eq!(v.values.len(), 119);
    // Tokens: Maria led 3 teams at Google in 2019 .
    let expected: BTreeMap<&str, f64> = [
        ("pos:ADP", 2.0),
        ("pos:NOUN", 2.0),
        ("pos:NUM", 2.0),
        ("pos:PROPN", 1.0),
        ("pos:PUNCT", 1.0),
        ("pos:VERB", 1.0),
        ("tag:.", 1.0),
        ("tag:CD", 2.0),
        ("tag:IN", 2.0),
        ("tag:NN", 1.0),
        ("tag:NNP", 1.0),
        ("tag:NNS", 1.0),
        ("tag:VBD", 1.0),
        ("dep:ROOT", 1.0),
        ("dep:dobj", 1.0),
        ("dep:nsubj", 1.0),
        ("dep:nummod", 1.0),
        ("dep:pobj", 2.0),
        ("dep:prep", 2.0),
        ("dep:punct", 1.0),
        ("ent:ORG", 1.0),
        ("ent:DATE", 1.0),
        ("ent:CARDINAL", 1.0),
        ("surface:digit_tokens", 2.0),
        ("surface:word_tokens", 8.0),
        ("surface:stopwords", 2.0),
        ("char_length", 36.0),
    ]
    .into();
    let nonzero: BTreeMap<&str, f64> = registry.names().zip(&v.values).filter(|(_, x)| **x != 0.0).map(|(n, x)| (n, *x)).collect();
    assert_eq!(nonzero, expected);
}
