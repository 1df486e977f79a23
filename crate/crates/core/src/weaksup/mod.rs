//! Labeling-function votes, confidence-gated strict-majority aggregation,
//! and construction of the weakly labelled dataset.

mod forest;
mod lfs;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::corpus::{Corpus, SentenceRecord};

pub use forest::{ForestConfig, RandomForest};
pub use lfs::{ClassifierLf, ConstantLf, FewShotLf, ForestLf, KeywordLf, ScriptedLf};

/// Identifier written into every weak record produced by [`aggregate`].
pub const RULE_VERSION: &str = "gated-majority/1";

#[derive(Debug, Error)]
pub enum WeakSupError {
    #[error("labeling function `{lf_id}` failed: {message}")]
    LabelingFunctionFailure { lf_id: String, message: String },
    #[error("threshold policy does not cover labeling function `{0}`")]
    UncoveredLf(String),
    #[error("duplicate labeling function id `{0}`")]
    DuplicateLf(String),
    #[error("threshold {threshold} for `{lf_id}` is outside [0, 1]")]
    BadThreshold { lf_id: String, threshold: f64 },
    #[error("invalid labeling function configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One LF's judgement. Serialises as `0`, `1` or `"ABSTAIN"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Verdict {
    Negative,
    Positive,
    Abstain,
}

impl Verdict {
    pub fn from_label(label: u8) -> Self {
        if label == 1 {
            Self::Positive
        } else {
            Self::Negative
        }
    }

    pub fn label(self) -> Option<u8> {
        match self {
            Self::Negative => Some(0),
            Self::Positive => Some(1),
            Self::Abstain => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum VerdictRepr {
    Label(u8),
    Word(String),
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.label() {
            Some(l) => VerdictRepr::Label(l),
            None => VerdictRepr::Word("ABSTAIN".into()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Verdict {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match VerdictRepr::deserialize(d)? {
            VerdictRepr::Label(0) => Ok(Self::Negative),
            VerdictRepr::Label(1) => Ok(Self::Positive),
            VerdictRepr::Word(w) if w == "ABSTAIN" => Ok(Self::Abstain),
            _ => Err(serde::de::Error::custom("verdict must be 0, 1 or \"ABSTAIN\"")),
        }
    }
}

/// What a labeling function reports for one sentence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vote {
    pub verdict: Verdict,
    pub confidence: f64,
}

impl Vote {
    pub fn abstain() -> Self {
        Self {
            verdict: Verdict::Abstain,
            confidence: 0.0,
        }
    }

    pub fn label(label: u8, confidence: f64) -> Self {
        Self {
            verdict: Verdict::from_label(label),
            confidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelVote {
    pub lf_id: String,
    pub verdict: Verdict,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl LabelVote {
    pub fn new(lf_id: impl Into<String>, verdict: Verdict, confidence: f64) -> Self {
        let confidence = if verdict == Verdict::Abstain { 0.0 } else { confidence };
        Self {
            lf_id: lf_id.into(),
            verdict,
            confidence,
            note: None,
        }
    }
}

/// A programmatic labeler. Implementations must be shareable across worker
/// threads; stateful adapters should synchronise internally.
pub trait LabelingFunction: Send + Sync {
    fn id(&self) -> &str;
    fn vote(&self, sentence: &SentenceRecord) -> Result<Vote, WeakSupError>;
}

/// Per-LF minimum confidence; `None` disables gating for that LF.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub thresholds: BTreeMap<String, Option<f64>>,
}

impl ThresholdPolicy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, lf_id: impl Into<String>, threshold: Option<f64>) -> Self {
        self.thresholds.insert(lf_id.into(), threshold);
        self
    }

    pub fn threshold(&self, lf_id: &str) -> Option<f64> {
        self.thresholds.get(lf_id).copied().flatten()
    }

    pub fn covers(&self, lf_id: &str) -> bool {
        self.thresholds.contains_key(lf_id)
    }

    pub fn validate(&self) -> Result<(), WeakSupError> {
        for (lf_id, t) in &self.thresholds {
            if let Some(t) = *t {
                if !(0.0..=1.0).contains(&t) {
                    return Err(WeakSupError::BadThreshold {
                        lf_id: lf_id.clone(),
                        threshold: t,
                    });
                }
            }
        }
        Ok(())
    }

    /// Whether `vote` survives gating.
    pub fn counts(&self, vote: &LabelVote) -> bool {
        vote.verdict != Verdict::Abstain && self.threshold(&vote.lf_id).is_none_or(|t| vote.confidence >= t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceVotes {
    pub sentence_id: String,
    pub votes: Vec<LabelVote>,
}

fn check_lfs(lfs: &[&dyn LabelingFunction], policy: &ThresholdPolicy) -> Result<(), WeakSupError> {
    policy.validate()?;
    let mut seen = BTreeSet::new();
    for lf in lfs {
        if !seen.insert(lf.id()) {
            return Err(WeakSupError::DuplicateLf(lf.id().to_owned()));
        }
        if !policy.covers(lf.id()) {
            return Err(WeakSupError::UncoveredLf(lf.id().to_owned()));
        }
    }
    Ok(())
}

fn run_one(lf: &dyn LabelingFunction, sentence: &SentenceRecord) -> LabelVote {
    let outcome = catch_unwind(AssertUnwindSafe(|| lf.vote(sentence)));
    let failure = match outcome {
        Ok(Ok(v)) if v.verdict == Verdict::Abstain || (0.0..=1.0).contains(&v.confidence) => {
            return LabelVote::new(lf.id(), v.verdict, v.confidence)
        }
        Ok(Ok(v)) => format!("confidence {} outside [0, 1]", v.confidence),
        Ok(Err(e)) => e.to_string(),
        Err(_) => "labeling function panicked".to_owned(),
    };
    LabelVote {
        note: Some(failure),
        ..LabelVote::new(lf.id(), Verdict::Abstain, 0.0)
    }
}

/// Runs every LF on every sentence in parallel. Votes are recorded as
/// reported (gating happens in [`aggregate`]); a failing LF yields an
/// ABSTAIN vote carrying a note. Output order follows `sentences` and `lfs`.
pub fn apply_labeling_functions(
    sentences: &[SentenceRecord],
    lfs: &[&dyn LabelingFunction],
    policy: &ThresholdPolicy,
) -> Result<Vec<SentenceVotes>, WeakSupError> {
    check_lfs(lfs, policy)?;
    Ok(sentences
        .par_iter()
        .map(|s| SentenceVotes {
            sentence_id: s.sentence_id.clone(),
            votes: lfs.iter().map(|lf| run_one(*lf, s)).collect(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakLabelRecord {
    pub sentence_id: String,
    pub label: u8,
    /// Counting votes only, ordered by `lf_id`.
    pub contributing_votes: Vec<LabelVote>,
    pub rule_version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Aggregate {
    Labeled(WeakLabelRecord),
    Excluded,
}

/// Strict majority over counting votes; a tie or no counting vote excludes
/// the sentence.
pub fn aggregate(sentence_id: &str, votes: &[LabelVote], policy: &ThresholdPolicy) -> Aggregate {
    let mut counting: Vec<LabelVote> = votes.iter().filter(|v| policy.counts(v)).cloned().collect();
    counting.sort_by(|a, b| a.lf_id.cmp(&b.lf_id));
    let positives = counting.iter().filter(|v| v.verdict == Verdict::Positive).count();
    let negatives = counting.len() - positives;
    if positives == negatives {
        return Aggregate::Excluded;
    }
    Aggregate::Labeled(WeakLabelRecord {
        sentence_id: sentence_id.to_owned(),
        label: u8::from(positives > negatives),
        contributing_votes: counting,
        rule_version: RULE_VERSION.to_owned(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteHistogram {
    pub positive: u64,
    pub negative: u64,
    pub abstain: u64,
    /// Non-abstain votes discarded by the threshold.
    pub gated: u64,
    /// Abstentions caused by LF failures.
    pub failed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LfCoverage {
    pub coverage: f64,
    pub histogram: VoteHistogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub lf_a: String,
    pub lf_b: String,
    /// Fraction of sentences with counting votes from both LFs.
    pub overlap: f64,
    /// Fraction of those overlaps where the two verdicts differ.
    pub conflict: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub rule_version: String,
    pub sentences: u64,
    pub per_lf: BTreeMap<String, LfCoverage>,
    pub pairs: Vec<PairStats>,
    pub labeled_count: u64,
    pub excluded_count: u64,
    /// Sentences skipped because their applicant is in the exclusion set.
    pub skipped_excluded_applicants: u64,
}

fn ratio(n: u64, d: u64) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

/// Coverage, overlap and conflict over already-applied votes.
pub fn coverage_report(votes: &[SentenceVotes], policy: &ThresholdPolicy) -> CoverageReport {
    let lf_ids: BTreeSet<&str> = votes.iter().flat_map(|sv| sv.votes.iter().map(|v| v.lf_id.as_str())).collect();
    let total = votes.len() as u64;
    let mut per_lf: BTreeMap<String, (u64, VoteHistogram)> =
        lf_ids.iter().map(|id| ((*id).to_owned(), (0, VoteHistogram::default()))).collect();
    let ids: Vec<&str> = lf_ids.into_iter().collect();
    let mut pair_counts = vec![(0u64, 0u64); ids.len() * ids.len()];
    let (mut labeled, mut excluded) = (0, 0);

    for sv in votes {
        let mut counted: BTreeMap<&str, Verdict> = BTreeMap::new();
        for v in &sv.votes {
            let (cov, h) = per_lf.get_mut(&v.lf_id).expect("collected above");
            match v.verdict {
                Verdict::Abstain if v.note.is_some() => {
                    h.abstain += 1;
                    h.failed += 1;
                }
                Verdict::Abstain => h.abstain += 1,
                Verdict::Positive => h.positive += 1,
                Verdict::Negative => h.negative += 1,
            }
            if policy.counts(v) {
                *cov += 1;
                counted.insert(&v.lf_id, v.verdict);
            } else if v.verdict != Verdict::Abstain {
                h.gated += 1;
            }
        }
        for (i, a) in ids.iter().enumerate() {
            for (j, b) in ids.iter().enumerate().skip(i + 1) {
                if let (Some(va), Some(vb)) = (counted.get(a), counted.get(b)) {
                    let slot = &mut pair_counts[i * ids.len() + j];
                    slot.0 += 1;
                    slot.1 += u64::from(va != vb);
                }
            }
        }
        match aggregate(&sv.sentence_id, &sv.votes, policy) {
            Aggregate::Labeled(_) => labeled += 1,
            Aggregate::Excluded => excluded += 1,
        }
    }

    let mut pairs = Vec::new();
    for (i, a) in ids.iter().enumerate() {
        for (j, b) in ids.iter().enumerate().skip(i + 1) {
            let (both, differ) = pair_counts[i * ids.len() + j];
            pairs.push(PairStats {
                lf_a: (*a).to_owned(),
                lf_b: (*b).to_owned(),
                overlap: ratio(both, total),
                conflict: ratio(differ, both),
            });
        }
    }
    CoverageReport {
        rule_version: RULE_VERSION.to_owned(),
        sentences: total,
        per_lf: per_lf
            .into_iter()
            .map(|(id, (cov, histogram))| {
                (
                    id,
                    LfCoverage {
                        coverage: ratio(cov, total),
                        histogram,
                    },
                )
            })
            .collect(),
        pairs,
        labeled_count: labeled,
        excluded_count: excluded,
        skipped_excluded_applicants: 0,
    }
}

/// One line of the weak dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeakDatasetRow {
    pub sentence_id: String,
    pub text: String,
    pub label: u8,
    pub rule_version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakDataset {
    pub records: Vec<WeakLabelRecord>,
    pub rows: Vec<WeakDatasetRow>,
}

/// Votes on every sentence whose applicant is not in `excluded_applicants`
/// and keeps the sentences that aggregate to a label. Output follows corpus
/// order and does not depend on the order of `lfs`.
pub fn build_weak_dataset(
    corpus: &Corpus,
    lfs: &[&dyn LabelingFunction],
    policy: &ThresholdPolicy,
    excluded_applicants: &BTreeSet<String>,
) -> Result<(WeakDataset, CoverageReport), WeakSupError> {
    let mut ordered: Vec<&dyn LabelingFunction> = lfs.to_vec();
    ordered.sort_by(|a, b| a.id().cmp(b.id()));
    let eligible: Vec<SentenceRecord> = corpus
        .sentences()
        .iter()
        .filter(|s| {
            corpus
                .applicant_of_sentence(&s.sentence_id)
                .is_some_and(|a| !excluded_applicants.contains(a))
        })
        .cloned()
        .collect();
    let skipped = (corpus.sentences().len() - eligible.len()) as u64;
    let votes = apply_labeling_functions(&eligible, &ordered, policy)?;

    let mut records = Vec::new();
    let mut rows = Vec::new();
    for (sentence, sv) in eligible.iter().zip(&votes) {
        if let Aggregate::Labeled(rec) = aggregate(&sv.sentence_id, &sv.votes, policy) {
            rows.push(WeakDatasetRow {
                sentence_id: rec.sentence_id.clone(),
                text: sentence.text.clone(),
                label: rec.label,
                rule_version: rec.rule_version.clone(),
            });
            records.push(rec);
        }
    }
    let mut report = coverage_report(&votes, policy);
    report.skipped_excluded_applicants = skipped;
    Ok((WeakDataset { records, rows }, report))
}

pub fn write_weak_dataset(path: &Path, rows: &[WeakDatasetRow]) -> Result<(), WeakSupError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_weak_dataset(path: &Path) -> Result<Vec<WeakDatasetRow>, WeakSupError> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(WeakSupError::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::synthetic_corpus;

    fn v(lf: &str, label: u8, c: f64) -> LabelVote {
        LabelVote::new(lf, Verdict::from_label(label), c)
    }

    fn policy() -> ThresholdPolicy {
        ThresholdPolicy::new().with("a", Some(0.7)).with("b", Some(0.7)).with("rf", None)
    }

    #[test]
    fn majority_with_ungated_forest() {
        let votes = [v("a", 1, 0.9), v("b", 1, 0.75), v("rf", 0, 0.55)];
        match aggregate("s", &votes, &policy()) {
            Aggregate::Labeled(r) => {
                assert_eq!(r.label, 1);
                assert_eq!(r.contributing_votes.len(), 3);
                assert_eq!(r.rule_version, RULE_VERSION);
            }
            Aggregate::Excluded => panic!("expected a label"),
        }
    }

    #[test]
    fn gated_single_vote_and_tie_are_excluded() {
        assert_eq!(aggregate("s", &[v("a", 1, 0.65)], &policy()), Aggregate::Excluded);
        assert_eq!(aggregate("s", &[v("a", 1, 0.8), v("rf", 0, 0.9)], &policy()), Aggregate::Excluded);
        assert_eq!(aggregate("s", &[], &policy()), Aggregate::Excluded);
    }

    #[test]
    fn abstain_carries_zero_confidence() {
        assert_eq!(LabelVote::new("x", Verdict::Abstain, 0.9).confidence, 0.0);
    }

    #[test]
    fn verdict_serialisation() {
        let json = serde_json::to_string(&[Verdict::Negative, Verdict::Positive, Verdict::Abstain]).unwrap();
        assert_eq!(json, r#"[0,1,"ABSTAIN"]"#);
        let back: Vec<Verdict> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vec![Verdict::Negative, Verdict::Positive, Verdict::Abstain]);
        assert!(serde_json::from_str::<Verdict>("2").is_err());
    }

    struct Flaky;
    impl LabelingFunction for Flaky {
        fn id(&self) -> &str {
            "flaky"
        }
        fn vote(&self, s: &SentenceRecord) -> Result<Vote, WeakSupError> {
            if s.sentence_id.ends_with("s001") {
                panic!("boom");
            }
            if s.sentence_id.ends_with("s002") {
                return Err(WeakSupError::BadConfig("bad input".into()));
            }
            Ok(Vote::label(1, 1.0))
        }
    }

    #[test]
    fn failures_become_abstentions() {
        let (corpus, _) = synthetic_corpus(1, 4, 0.5, 0).unwrap();
        let constant = ConstantLf::new("const", Vote::label(0, 1.0));
        let lfs: [&dyn LabelingFunction; 2] = [&Flaky, &constant];
        let pol = ThresholdPolicy::new().with("flaky", None).with("const", None);
        let prev = std::panic::take_hook();
        std::panic::set_hook(Box::new(|_| {}));
        let votes = apply_labeling_functions(corpus.sentences(), &lfs, &pol).unwrap();
        std::panic::set_hook(prev);
        assert_eq!(votes.iter().map(|sv| sv.votes.len()).sum::<usize>(), 8);
        assert_eq!(votes[1].votes[0].verdict, Verdict::Abstain);
        assert!(votes[1].votes[0].note.is_some());
        assert_eq!(votes[2].votes[0].verdict, Verdict::Abstain);
        assert_eq!(votes[0].votes[0].verdict, Verdict::Positive);
        assert!(votes.iter().all(|sv| sv.votes[1].verdict == Verdict::Negative));
    }

    #[test]
    fn policy_must_cover_every_lf() {
        let c = ConstantLf::new("c", Vote::abstain());
        let err = apply_labeling_functions(&[], &[&c], &ThresholdPolicy::new()).unwrap_err();
        assert!(matches!(err, WeakSupError::UncoveredLf(_)));
    }

    #[test]
    fn all_abstain_gives_empty_dataset() {
        let (corpus, _) = synthetic_corpus(3, 4, 0.5, 1).unwrap();
        let a = ConstantLf::new("a", Vote::abstain());
        let b = ConstantLf::new("b", Vote::abstain());
        let pol = ThresholdPolicy::new().with("a", None).with("b", None);
        let (ds, report) = build_weak_dataset(&corpus, &[&a, &b], &pol, &BTreeSet::new()).unwrap();
        assert!(ds.rows.is_empty());
        assert!(report.per_lf.values().all(|c| c.coverage == 0.0));
        assert_eq!(report.excluded_count, 12);
    }

    #[test]
    fn agreeing_lfs_cover_everything() {
        let (corpus, _) = synthetic_corpus(2, 5, 0.5, 2).unwrap();
        let a = ConstantLf::new("a", Vote::label(1, 1.0));
        let b = ConstantLf::new("b", Vote::label(1, 1.0));
        let pol = ThresholdPolicy::new().with("a", Some(0.7)).with("b", Some(0.7));
        let (ds, report) = build_weak_dataset(&corpus, &[&a, &b], &pol, &BTreeSet::new()).unwrap();
        assert_eq!(ds.rows.len(), 10);
        assert_eq!(report.per_lf["a"].coverage, 1.0);
        assert_eq!(report.per_lf["b"].coverage, 1.0);
        assert_eq!(report.pairs[0].overlap, 1.0);
        assert_eq!(report.pairs[0].conflict, 0.0);
    }

    #[test]
    fn weak_dataset_file_round_trip() {
        let rows = vec![WeakDatasetRow {
            sentence_id: "s".into(),
            text: "t".into(),
            label: 1,
            rule_version: RULE_VERSION.into(),
        }];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weak.ndrec");
        write_weak_dataset(&path, &rows).unwrap();
        assert_eq!(read_weak_dataset(&path).unwrap(), rows);
    }
}
