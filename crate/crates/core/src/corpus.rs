//! Letters, sentences and labels, their newline-delimited on-disk layout,
//! and applicant-disjoint dataset splitting.
//!
//! A corpus directory holds four files:
//!
//! ```text
//! <root>/manifest          {"schema":"lori-corpus","version":1}
//! <root>/letters.ndrec     one LetterDocument per line
//! <root>/sentences.ndrec   one SentenceRecord per line
//! <root>/labels.ndrec      one LabelRecord per line
//! ```
//!
//! Every line is a JSON object. Span offsets are 0-based character (Unicode
//! scalar value) offsets into the letter's `raw_text`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MANIFEST_FILE: &str = "manifest";
pub const LETTERS_FILE: &str = "letters.ndrec";
pub const SENTENCES_FILE: &str = "sentences.ndrec";
pub const LABELS_FILE: &str = "labels.ndrec";
pub const CORPUS_SCHEMA: &str = "lori-corpus";
pub const CORPUS_SCHEMA_VERSION: u32 = 1;

/// Human-annotated sentence counts of the original study's first split
/// (train, validation). Documented configuration, not a default.
pub const REFERENCE_TRAIN_VALIDATION_LINES: (usize, usize) = (943, 105);
/// Human-annotated sentence counts of the original study's final split
/// (validation, test).
pub const REFERENCE_VALIDATION_TEST_LINES: (usize, usize) = (524, 524);

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing corpus file {0}")]
    MissingFile(PathBuf),
    #[error("{file}:{line}: field `{field}`: {message}")]
    SchemaViolation {
        file: String,
        line: usize,
        field: String,
        message: String,
    },
    #[error("{kind} `{id}` references unknown {target} `{target_id}`")]
    DanglingReference {
        kind: &'static str,
        id: String,
        target: &'static str,
        target_id: String,
    },
    #[error("duplicate {kind} `{id}`")]
    Duplicate { kind: &'static str, id: String },
    #[error("invalid record: {0}")]
    Invalid(String),
    #[error("corpus has no sentences to split")]
    EmptyCorpus,
    #[error("split fractions must be in [0,1] and sum to 1 (got {0:?})")]
    BadFractions([f64; 3]),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MicroLabel {
    Teamwork,
    Communication,
    Innovation,
}

impl MicroLabel {
    pub const ALL: [MicroLabel; 3] = [
        MicroLabel::Teamwork,
        MicroLabel::Communication,
        MicroLabel::Innovation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MicroLabel::Teamwork => "teamwork",
            MicroLabel::Communication => "communication",
            MicroLabel::Innovation => "innovation",
        }
    }
}

impl fmt::Display for MicroLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MicroLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "teamwork" => Ok(MicroLabel::Teamwork),
            "communication" => Ok(MicroLabel::Communication),
            "innovation" => Ok(MicroLabel::Innovation),
            other => Err(format!("unknown micro-label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WriterRole {
    Manager,
    Instructor,
    Colleague,
    #[default]
    Unknown,
}

/// Half-open character range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Slice `text` by character offsets; `None` when out of range.
    pub fn slice<'a>(&self, text: &'a str) -> Option<&'a str> {
        if self.end < self.start {
            return None;
        }
        let start = char_to_byte(text, self.start)?;
        let end = char_to_byte(text, self.end)?;
        Some(&text[start..end])
    }
}

/// Byte offset of the `chars`-th character; `text.len()` for one-past-the-end.
pub fn char_to_byte(text: &str, chars: usize) -> Option<usize> {
    if chars == 0 {
        return Some(0);
    }
    match text.char_indices().nth(chars) {
        Some((b, _)) => Some(b),
        None if text.chars().count() == chars => Some(text.len()),
        None => None,
    }
}

pub fn count_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LetterDocument {
    pub letter_id: String,
    pub applicant_id: String,
    #[serde(default)]
    pub writer_role: WriterRole,
    pub raw_text: String,
    pub sentences: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SentenceRecord {
    pub sentence_id: String,
    pub letter_id: String,
    pub text: String,
    pub span: Span,
    pub char_length: usize,
    pub token_count: usize,
}

impl SentenceRecord {
    /// Builds a record whose derived counts agree with `text` and `span`.
    pub fn new(sentence_id: impl Into<String>, letter_id: impl Into<String>, text: &str, span: Span) -> Self {
        Self {
            sentence_id: sentence_id.into(),
            letter_id: letter_id.into(),
            text: text.to_owned(),
            span,
            char_length: text.chars().count(),
            token_count: count_tokens(text),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Human,
    Weak,
    Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRecord {
    pub sentence_id: String,
    pub label: u8,
    pub source: LabelSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator_id: Option<String>,
    pub confidence: f64,
}

impl LabelRecord {
    pub fn human(sentence_id: impl Into<String>, label: u8, annotator: Option<&str>) -> Self {
        Self {
            sentence_id: sentence_id.into(),
            label,
            source: LabelSource::Human,
            annotator_id: annotator.map(str::to_owned),
            confidence: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub name: SplitName,
    pub sentence_ids: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Manifest<'a> {
    schema: &'a str,
    version: u32,
}

/// Immutable, referentially consistent set of letters, sentences and labels.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    letters: Vec<LetterDocument>,
    sentences: Vec<SentenceRecord>,
    labels: Vec<LabelRecord>,
    letter_index: HashMap<String, usize>,
    sentence_index: HashMap<String, usize>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.letters == other.letters
            && self.sentences == other.sentences
            && self.labels == other.labels
    }
}

impl Corpus {
    pub fn builder() -> CorpusBuilder {
        CorpusBuilder::default()
    }

    pub fn letters(&self) -> &[LetterDocument] {
        &self.letters
    }

    pub fn sentences(&self) -> &[SentenceRecord] {
        &self.sentences
    }

    pub fn labels(&self) -> &[LabelRecord] {
        &self.labels
    }

    pub fn letter(&self, letter_id: &str) -> Option<&LetterDocument> {
        self.letter_index.get(letter_id).map(|&i| &self.letters[i])
    }

    pub fn sentence(&self, sentence_id: &str) -> Option<&SentenceRecord> {
        self.sentence_index.get(sentence_id).map(|&i| &self.sentences[i])
    }

    pub fn applicant_of_sentence(&self, sentence_id: &str) -> Option<&str> {
        let sentence = self.sentence(sentence_id)?;
        self.letter(&sentence.letter_id).map(|l| l.applicant_id.as_str())
    }

    pub fn applicants(&self) -> BTreeSet<&str> {
        self.letters.iter().map(|l| l.applicant_id.as_str()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty() && self.sentences.is_empty() && self.labels.is_empty()
    }

    /// Sentences of one letter in span order.
    pub fn letter_sentences<'a>(&'a self, letter: &'a LetterDocument) -> impl Iterator<Item = &'a SentenceRecord> + 'a {
        letter.sentences.iter().filter_map(move |id| self.sentence(id))
    }
}

/// Single-owner accumulator; `build` checks every invariant and seals the corpus.
#[derive(Debug, Default)]
pub struct CorpusBuilder {
    letters: Vec<LetterDocument>,
    sentences: Vec<SentenceRecord>,
    labels: Vec<LabelRecord>,
}

impl CorpusBuilder {
    pub fn letter(mut self, letter: LetterDocument) -> Self {
        self.letters.push(letter);
        self
    }

    pub fn sentence(mut self, sentence: SentenceRecord) -> Self {
        self.sentences.push(sentence);
        self
    }

    pub fn label(mut self, label: LabelRecord) -> Self {
        self.labels.push(label);
        self
    }

    pub fn extend_labels(mut self, labels: impl IntoIterator<Item = LabelRecord>) -> Self {
        self.labels.extend(labels);
        self
    }

    /// Starts a builder holding a copy of `corpus`, for derived corpora.
    pub fn from_corpus(corpus: &Corpus) -> Self {
        Self {
            letters: corpus.letters.clone(),
            sentences: corpus.sentences.clone(),
            labels: corpus.labels.clone(),
        }
    }

    pub fn build(self) -> Result<Corpus, CorpusError> {
        let mut letter_index = HashMap::with_capacity(self.letters.len());
        for (i, letter) in self.letters.iter().enumerate() {
            if letter.applicant_id.trim().is_empty() {
                return Err(CorpusError::Invalid(format!(
                    "letter `{}` has an empty applicant_id",
                    letter.letter_id
                )));
            }
            if letter_index.insert(letter.letter_id.clone(), i).is_some() {
                return Err(CorpusError::Duplicate {
                    kind: "letter",
                    id: letter.letter_id.clone(),
                });
            }
        }

        let mut sentence_index = HashMap::with_capacity(self.sentences.len());
        for (i, sentence) in self.sentences.iter().enumerate() {
            if sentence_index.insert(sentence.sentence_id.clone(), i).is_some() {
                return Err(CorpusError::Duplicate {
                    kind: "sentence",
                    id: sentence.sentence_id.clone(),
                });
            }
            let Some(&li) = letter_index.get(&sentence.letter_id) else {
                return Err(CorpusError::DanglingReference {
                    kind: "sentence",
                    id: sentence.sentence_id.clone(),
                    target: "letter",
                    target_id: sentence.letter_id.clone(),
                });
            };
            validate_sentence(sentence, &self.letters[li].raw_text)?;
        }

        for letter in &self.letters {
            let mut prev_end = 0;
            for sid in &letter.sentences {
                let Some(&si) = sentence_index.get(sid) else {
                    return Err(CorpusError::DanglingReference {
                        kind: "letter",
                        id: letter.letter_id.clone(),
                        target: "sentence",
                        target_id: sid.clone(),
                    });
                };
                let sentence = &self.sentences[si];
                if sentence.letter_id != letter.letter_id {
                    return Err(CorpusError::Invalid(format!(
                        "letter `{}` lists sentence `{sid}` belonging to `{}`",
                        letter.letter_id, sentence.letter_id
                    )));
                }
                if sentence.span.start < prev_end {
                    return Err(CorpusError::Invalid(format!(
                        "sentences of letter `{}` overlap or are out of order at `{sid}`",
                        letter.letter_id
                    )));
                }
                prev_end = sentence.span.end;
            }
            let listed: HashSet<&str> = letter.sentences.iter().map(String::as_str).collect();
            if listed.len() != letter.sentences.len() {
                return Err(CorpusError::Invalid(format!(
                    "letter `{}` lists a sentence twice",
                    letter.letter_id
                )));
            }
        }
        for sentence in &self.sentences {
            let letter = &self.letters[letter_index[&sentence.letter_id]];
            if !letter.sentences.contains(&sentence.sentence_id) {
                return Err(CorpusError::Invalid(format!(
                    "sentence `{}` is not listed by its letter `{}`",
                    sentence.sentence_id, sentence.letter_id
                )));
            }
        }

        let mut seen = HashSet::new();
        for label in &self.labels {
            if !sentence_index.contains_key(&label.sentence_id) {
                return Err(CorpusError::DanglingReference {
                    kind: "label",
                    id: label.sentence_id.clone(),
                    target: "sentence",
                    target_id: label.sentence_id.clone(),
                });
            }
            validate_label(label)?;
            let key = (label.sentence_id.as_str(), label.source, label.annotator_id.as_deref());
            if !seen.insert(key) {
                return Err(CorpusError::Duplicate {
                    kind: "label",
                    id: format!(
                        "{} ({:?}, {})",
                        label.sentence_id,
                        label.source,
                        label.annotator_id.as_deref().unwrap_or("-")
                    ),
                });
            }
        }

        Ok(Corpus {
            letters: self.letters,
            sentences: self.sentences,
            labels: self.labels,
            letter_index,
            sentence_index,
        })
    }
}

fn validate_sentence(sentence: &SentenceRecord, raw_text: &str) -> Result<(), CorpusError> {
    let fail = |msg: String| Err(CorpusError::Invalid(format!("sentence `{}`: {msg}", sentence.sentence_id)));
    let span = sentence.span;
    if span.end <= span.start {
        return fail(format!("empty or inverted span {}..{}", span.start, span.end));
    }
    let Some(slice) = span.slice(raw_text) else {
        return fail(format!("span {}..{} exceeds letter text", span.start, span.end));
    };
    if slice != sentence.text {
        return fail("text does not match raw_text at span".into());
    }
    if sentence.char_length != span.len() {
        return fail(format!("char_length {} != span length {}", sentence.char_length, span.len()));
    }
    if !sentence.text.trim().is_empty() && sentence.token_count == 0 {
        return fail("token_count must be at least 1".into());
    }
    Ok(())
}

fn validate_label(label: &LabelRecord) -> Result<(), CorpusError> {
    if label.label > 1 {
        return Err(CorpusError::Invalid(format!(
            "label for `{}` must be 0 or 1, got {}",
            label.sentence_id, label.label
        )));
    }
    if !(0.0..=1.0).contains(&label.confidence) {
        return Err(CorpusError::Invalid(format!(
            "confidence for `{}` outside [0,1]",
            label.sentence_id
        )));
    }
    if label.source == LabelSource::Human && label.confidence != 1.0 {
        return Err(CorpusError::Invalid(format!(
            "human label for `{}` must have confidence 1.0",
            label.sentence_id
        )));
    }
    Ok(())
}

fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_record(&line, &file_name, i + 1)?);
    }
    Ok(out)
}

/// Parses one JSON line, reporting the offending field on failure.
pub fn parse_record<T: DeserializeOwned>(line: &str, file: &str, line_no: usize) -> Result<T, CorpusError> {
    let de = &mut serde_json::Deserializer::from_str(line);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        let message = err.inner().to_string();
        let field = if path == "." || path.is_empty() {
            message
                .split('`')
                .nth(1)
                .map(str::to_owned)
                .unwrap_or_else(|| "<record>".to_owned())
        } else {
            path
        };
        CorpusError::SchemaViolation {
            file: file.to_owned(),
            line: line_no,
            field,
            message,
        }
    })
}

/// Loads a corpus directory. A directory containing none of the corpus files
/// yields an empty corpus; a partially populated one is an error.
pub fn load_corpus(root: &Path) -> Result<Corpus, CorpusError> {
    if !root.is_dir() {
        return Err(CorpusError::MissingFile(root.to_path_buf()));
    }
    let files = [MANIFEST_FILE, LETTERS_FILE, SENTENCES_FILE, LABELS_FILE];
    let present: Vec<bool> = files.iter().map(|f| root.join(f).is_file()).collect();
    if present.iter().all(|p| !p) {
        return Ok(Corpus::default());
    }
    if let Some(i) = present.iter().position(|p| !p) {
        return Err(CorpusError::MissingFile(root.join(files[i])));
    }

    let manifest_text = fs::read_to_string(root.join(MANIFEST_FILE))?;
    let manifest: serde_json::Value = parse_record(manifest_text.trim(), MANIFEST_FILE, 1)?;
    let schema_ok = manifest.get("schema").and_then(|v| v.as_str()) == Some(CORPUS_SCHEMA);
    if !schema_ok {
        return Err(CorpusError::SchemaViolation {
            file: MANIFEST_FILE.into(),
            line: 1,
            field: "schema".into(),
            message: format!("expected `{CORPUS_SCHEMA}`"),
        });
    }
    if manifest.get("version").and_then(|v| v.as_u64()) != Some(u64::from(CORPUS_SCHEMA_VERSION)) {
        return Err(CorpusError::SchemaViolation {
            file: MANIFEST_FILE.into(),
            line: 1,
            field: "version".into(),
            message: format!("unsupported version, expected {CORPUS_SCHEMA_VERSION}"),
        });
    }

    let letters: Vec<LetterDocument> = read_records(&root.join(LETTERS_FILE))?;
    let sentences: Vec<SentenceRecord> = read_records(&root.join(SENTENCES_FILE))?;
    let labels: Vec<LabelRecord> = read_records(&root.join(LABELS_FILE))?;
    CorpusBuilder {
        letters,
        sentences,
        labels,
    }
    .build()
}

pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<(), CorpusError> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut out, record).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_corpus(corpus: &Corpus, root: &Path) -> Result<(), CorpusError> {
    fs::create_dir_all(root)?;
    let manifest = Manifest {
        schema: CORPUS_SCHEMA,
        version: CORPUS_SCHEMA_VERSION,
    };
    fs::write(
        root.join(MANIFEST_FILE),
        serde_json::to_string(&manifest).map_err(std::io::Error::from)? + "\n",
    )?;
    write_records(&root.join(LETTERS_FILE), &corpus.letters)?;
    write_records(&root.join(SENTENCES_FILE), &corpus.sentences)?;
    write_records(&root.join(LABELS_FILE), &corpus.labels)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitFractions {
    pub fn new(train: f64, validation: f64, test: f64) -> Self {
        Self {
            train,
            validation,
            test,
        }
    }

    /// Fractions proportional to the given line counts, e.g. the reference
    /// configuration `(943, 105, 0)`.
    pub fn from_line_counts(train: usize, validation: usize, test: usize) -> Self {
        let total = (train + validation + test).max(1) as f64;
        Self::new(train as f64 / total, validation as f64 / total, test as f64 / total)
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub train: DatasetSplit,
    pub validation: DatasetSplit,
    pub test: DatasetSplit,
}

impl Splits {
    pub fn iter(&self) -> impl Iterator<Item = &DatasetSplit> {
        [&self.train, &self.validation, &self.test].into_iter()
    }
}

/// Largest-remainder apportionment of `n` items across `fractions`.
fn apportion(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let raw = fractions.map(|f| f * n as f64);
    let mut counts = raw.map(|r| r.floor() as usize);
    let mut remaining = n - counts.iter().sum::<usize>().min(n);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        if fractions[i] > 0.0 {
            counts[i] += 1;
            remaining -= 1;
        }
    }
    counts
}

/// Applicant-disjoint seeded split: applicants are shuffled and apportioned,
/// and every sentence follows its applicant.
pub fn split_by_applicant(corpus: &Corpus, fractions: SplitFractions, seed: u64) -> Result<Splits, CorpusError> {
    let f = fractions.as_array();
    if f.iter().any(|x| !x.is_finite() || *x < 0.0 || *x > 1.0) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(CorpusError::BadFractions(f));
    }
    if corpus.sentences.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }

    let mut applicants: Vec<&str> = corpus
        .sentences
        .iter()
        .filter_map(|s| corpus.letter(&s.letter_id))
        .map(|l| l.applicant_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    applicants.shuffle(&mut rng);

    let counts = apportion(applicants.len(), f);
    let mut assignment: HashMap<&str, SplitName> = HashMap::new();
    let names = [SplitName::Train, SplitName::Validation, SplitName::Test];
    let mut cursor = 0;
    for (name, count) in names.iter().zip(counts) {
        for applicant in &applicants[cursor..cursor + count] {
            assignment.insert(applicant, *name);
        }
        cursor += count;
    }

    let mut buckets: BTreeMap<SplitName, BTreeSet<String>> = names.iter().map(|n| (*n, BTreeSet::new())).collect();
    for sentence in &corpus.sentences {
        let applicant = corpus
            .letter(&sentence.letter_id)
            .map(|l| l.applicant_id.as_str())
            .unwrap_or_default();
        let name = assignment[applicant];
        buckets.get_mut(&name).unwrap().insert(sentence.sentence_id.clone());
    }
    let mut take = |name| DatasetSplit {
        name,
        sentence_ids: buckets.remove(&name).unwrap_or_default(),
    };
    Ok(Splits {
        train: take(SplitName::Train),
        validation: take(SplitName::Validation),
        test: take(SplitName::Test),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassShare {
    pub count: usize,
    pub fraction: f64,
}

/// Label counts and fractions over label records, optionally restricted to one source.
pub fn class_balance(corpus: &Corpus, source: Option<LabelSource>) -> BTreeMap<u8, ClassShare> {
    let mut counts: BTreeMap<u8, usize> = BTreeMap::new();
    for label in corpus.labels.iter().filter(|l| source.is_none_or(|s| l.source == s)) {
        *counts.entry(label.label).or_default() += 1;
    }
    let total: usize = counts.values().sum();
    counts
        .into_iter()
        .map(|(label, count)| {
            (
                label,
                ClassShare {
                    count,
                    fraction: count as f64 / total as f64,
                },
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn letter(id: &str, applicant: &str, text: &str, spans: &[(usize, usize)]) -> (LetterDocument, Vec<SentenceRecord>) {
        let sentences: Vec<SentenceRecord> = spans
            .iter()
            .enumerate()
            .map(|(i, &(s, e))| {
                let span = Span::new(s, e);
                SentenceRecord::new(format!("{id}-{i}"), id, span.slice(text).unwrap(), span)
            })
            .collect();
        let doc = LetterDocument {
            letter_id: id.into(),
            applicant_id: applicant.into(),
            writer_role: WriterRole::Manager,
            raw_text: text.into(),
            sentences: sentences.iter().map(|s| s.sentence_id.clone()).collect(),
        };
        (doc, sentences)
    }

    fn small_corpus(labels: &[u8]) -> Corpus {
        let text = "One. Two. Three. Four. Five.";
        let (doc, sentences) = letter("L1", "A1", text, &[(0, 4), (5, 9), (10, 16), (17, 22), (23, 28)]);
        let mut b = Corpus::builder().letter(doc);
        for s in &sentences {
            b = b.sentence(s.clone());
        }
        for (s, &l) in sentences.iter().zip(labels) {
            b = b.label(LabelRecord::human(&s.sentence_id, l, Some("ann1")));
        }
        b.build().unwrap()
    }

    #[test]
    fn span_slices_by_characters() {
        let text = "héllo wörld";
        assert_eq!(Span::new(6, 11).slice(text), Some("wörld"));
        assert_eq!(Span::new(0, 12).slice(text), None);
        assert_eq!(Span::new(11, 11).slice(text), Some(""));
    }

    #[test]
    fn class_balance_hand_count() {
        let corpus = small_corpus(&[1, 1, 0, 0, 0]);
        let balance = class_balance(&corpus, None);
        assert_eq!(balance[&1], ClassShare { count: 2, fraction: 0.4 });
        assert_eq!(balance[&0], ClassShare { count: 3, fraction: 0.6 });
        assert!(class_balance(&corpus, Some(LabelSource::Weak)).is_empty());
    }

    #[test]
    fn class_balance_degenerate() {
        assert!(class_balance(&small_corpus(&[]), None).is_empty());
        let all_pos = class_balance(&small_corpus(&[1, 1, 1]), None);
        assert_eq!(all_pos.len(), 1);
        assert_eq!(all_pos[&1], ClassShare { count: 3, fraction: 1.0 });
    }

    #[test]
    fn duplicate_label_same_annotator_rejected_but_cross_annotator_kept() {
        let corpus = small_corpus(&[1]);
        let sid = corpus.sentences()[0].sentence_id.clone();
        let dup = CorpusBuilder::from_corpus(&corpus)
            .label(LabelRecord::human(&sid, 0, Some("ann1")))
            .build();
        assert!(matches!(dup, Err(CorpusError::Duplicate { kind: "label", .. })));
        let other = CorpusBuilder::from_corpus(&corpus)
            .label(LabelRecord::human(&sid, 0, Some("ann2")))
            .build()
            .unwrap();
        assert_eq!(other.labels().len(), 2);
    }

    #[test]
    fn builder_rejects_bad_spans_and_dangling_labels() {
        let (doc, mut sentences) = letter("L1", "A1", "Hi there. Bye.", &[(0, 9)]);
        sentences[0].span = Span::new(0, 40);
        let err = Corpus::builder().letter(doc.clone()).sentence(sentences[0].clone()).build();
        assert!(matches!(err, Err(CorpusError::Invalid(_))));

        let (doc, sentences) = letter("L1", "A1", "Hi there. Bye.", &[(0, 9)]);
        let err = Corpus::builder()
            .letter(doc)
            .sentence(sentences[0].clone())
            .label(LabelRecord::human("nope", 1, None))
            .build();
        assert!(matches!(err, Err(CorpusError::DanglingReference { kind: "label", .. })));
    }

    #[test]
    fn human_labels_must_be_certain() {
        let corpus = small_corpus(&[]);
        let mut label = LabelRecord::human(&corpus.sentences()[0].sentence_id, 1, None);
        label.confidence = 0.9;
        assert!(CorpusBuilder::from_corpus(&corpus).label(label).build().is_err());
    }

    #[test]
    fn degenerate_split_puts_everything_in_train() {
        let corpus = small_corpus(&[1, 0]);
        let splits = split_by_applicant(&corpus, SplitFractions::new(1.0, 0.0, 0.0), 3).unwrap();
        assert_eq!(splits.train.sentence_ids.len(), 5);
        assert!(splits.validation.sentence_ids.is_empty());
        assert!(splits.test.sentence_ids.is_empty());
    }

    #[test]
    fn split_rejects_bad_fractions_and_empty_corpus() {
        let corpus = small_corpus(&[]);
        assert!(matches!(
            split_by_applicant(&corpus, SplitFractions::new(0.5, 0.2, 0.2), 0),
            Err(CorpusError::BadFractions(_))
        ));
        assert!(matches!(
            split_by_applicant(&Corpus::default(), SplitFractions::new(1.0, 0.0, 0.0), 0),
            Err(CorpusError::EmptyCorpus)
        ));
    }

    #[test]
    fn apportion_sums_to_n() {
        for n in 0..50 {
            let c = apportion(n, [0.5, 0.25, 0.25]);
            assert_eq!(c.iter().sum::<usize>(), n);
        }
        assert_eq!(apportion(10, [0.8, 0.1, 0.1]), [8, 1, 1]);
        assert_eq!(apportion(7, [1.0, 0.0, 0.0]), [7, 0, 0]);
    }

    #[test]
    fn reference_fractions() {
        let f = SplitFractions::from_line_counts(943, 105, 0);
        assert!((f.train + f.validation - 1.0).abs() < 1e-12);
        assert!((f.train - 943.0 / 1048.0).abs() < 1e-12);
    }
}
