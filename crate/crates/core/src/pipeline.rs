//! Document ingestion, per-letter highlighting and applicant report
//! assembly.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::classify::SentenceClassifier;
use crate::corpus::{LetterDocument, MicroLabel, SentenceRecord, Span, WriterRole};
use crate::extract::{
    micro_label_distribution, run_react, summarize, ExtractError, ExtractionResult, LabeledPhrase, PromptSet,
    SessionFactory, SessionRole, ToolRegistry, DEFAULT_MAX_STEPS, SUMMARY_MAX_WORDS,
};
use crate::textprep::segment_sentences;

pub const PIPELINE_VERSION: &str = concat!("lori-pipeline/", env!("CARGO_PKG_VERSION"));
pub const REPORT_SCHEMA: &str = "lori-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Classify,
    Extract,
    Summarize,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ingest => "ingest",
            Self::Classify => "classify",
            Self::Extract => "extract",
            Self::Summarize => "summarize",
        })
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("text extraction failed: {0}")]
    ExtractionFailure(String),
    #[error("document contains no text")]
    EmptyDocument,
    #[error("letter boundaries do not fit the document: {0}")]
    BoundaryMismatch(String),
    #[error("invalid boundary spec: {0}")]
    BadBoundarySpec(String),
    #[error("letter {0} has no sentences")]
    EmptyLetter(String),
    #[error("no letters to report on")]
    NoLetters,
    #[error("phrase extraction failed: {0}")]
    Extract(#[source] ExtractError),
    #[error("summary failed: {0}")]
    Summarize(#[source] ExtractError),
}

impl PipelineError {
    pub fn stage(&self) -> Stage {
        match self {
            Self::ExtractionFailure(_)
            | Self::EmptyDocument
            | Self::BoundaryMismatch(_)
            | Self::BadBoundarySpec(_)
            | Self::NoLetters => Stage::Ingest,
            Self::EmptyLetter(_) => Stage::Classify,
            Self::Extract(_) => Stage::Extract,
            Self::Summarize(_) => Stage::Summarize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorKind {
    TextLayer,
    Ocr,
    Fixture,
}

/// Turns document bytes into page texts, in page order.
pub trait TextExtractor: Send + Sync {
    fn extract(&self, bytes: &[u8]) -> Result<Vec<String>, PipelineError>;
    fn kind(&self) -> ExtractorKind;
}

/// UTF-8 text whose pages are separated by form feeds (`\x0c`).
#[derive(Debug, Clone, Copy, Default)]
pub struct FixtureExtractor;

impl TextExtractor for FixtureExtractor {
    fn extract(&self, bytes: &[u8]) -> Result<Vec<String>, PipelineError> {
        let text = std::str::from_utf8(bytes).map_err(|e| PipelineError::ExtractionFailure(e.to_string()))?;
        Ok(text.split('\x0c').map(str::to_owned).collect())
    }

    fn kind(&self) -> ExtractorKind {
        ExtractorKind::Fixture
    }
}

/// Embedded PDF text layer.
#[derive(Debug, Clone, Copy, Default)]
pub struct TextLayerExtractor;

impl TextExtractor for TextLayerExtractor {
    fn extract(&self, bytes: &[u8]) -> Result<Vec<String>, PipelineError> {
        match catch_unwind(AssertUnwindSafe(|| pdf_extract::extract_text_from_mem_by_pages(bytes))) {
            Ok(Ok(pages)) => Ok(pages),
            Ok(Err(e)) => Err(PipelineError::ExtractionFailure(e.to_string())),
            Err(_) => Err(PipelineError::ExtractionFailure("PDF parser panicked".into())),
        }
    }

    fn kind(&self) -> ExtractorKind {
        ExtractorKind::TextLayer
    }
}

/// Renders pages with `pdftoppm` and recognises them with `tesseract`.
#[derive(Debug, Clone)]
pub struct OcrExtractor {
    pub pdftoppm: PathBuf,
    pub tesseract: PathBuf,
    pub dpi: u32,
    pub language: String,
}

impl Default for OcrExtractor {
    fn default() -> Self {
        Self {
            pdftoppm: "pdftoppm".into(),
            tesseract: "tesseract".into(),
            dpi: 300,
            language: "eng".into(),
        }
    }
}

impl TextExtractor for OcrExtractor {
    fn extract(&self, bytes: &[u8]) -> Result<Vec<String>, PipelineError> {
        let fail = |m: String| PipelineError::ExtractionFailure(m);
        let dir = std::env::temp_dir().join(format!("lori-ocr-{}", &content_hash(bytes)[7..23]));
        std::fs::create_dir_all(&dir).map_err(|e| fail(e.to_string()))?;
        let pdf = dir.join("input.pdf");
        std::fs::write(&pdf, bytes).map_err(|e| fail(e.to_string()))?;
        let status = Command::new(&self.pdftoppm)
            .args(["-r", &self.dpi.to_string(), "-png"])
            .arg(&pdf)
            .arg(dir.join("page"))
            .status()
            .map_err(|e| fail(format!("cannot run {}: {e}", self.pdftoppm.display())))?;
        if !status.success() {
            return Err(fail(format!("pdftoppm exited with {status}")));
        }
        let mut images: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| fail(e.to_string()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "png"))
            .collect();
        images.sort();
        let pages = images
            .iter()
            .map(|img| {
                let out = Command::new(&self.tesseract)
                    .arg(img)
                    .arg("stdout")
                    .args(["-l", &self.language])
                    .output()
                    .map_err(|e| fail(format!("cannot run {}: {e}", self.tesseract.display())))?;
                if !out.status.success() {
                    return Err(fail(format!("tesseract exited with {}", out.status)));
                }
                Ok(String::from_utf8_lossy(&out.stdout).into_owned())
            })
            .collect();
        let _ = std::fs::remove_dir_all(&dir);
        pages
    }

    fn kind(&self) -> ExtractorKind {
        ExtractorKind::Ocr
    }
}

/// How a multi-letter document is cut into letters.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundarySpec {
    /// One letter per non-blank page.
    #[default]
    PageBreaks,
    /// Letters separated by a text marker.
    Delimiter { marker: String },
    /// 1-based inclusive page ranges, one per letter.
    Explicit { ranges: Vec<(usize, usize)> },
    /// The whole document is one letter.
    Single,
}

impl FromStr for BoundarySpec {
    type Err = PipelineError;

    /// `page_breaks`, `single`, `delimiter:<marker>` or `explicit:1-2,3-3`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PipelineError::BadBoundarySpec(s.to_owned());
        match s {
            "" | "page_breaks" => return Ok(Self::PageBreaks),
            "single" => return Ok(Self::Single),
            _ => {}
        }
        if let Some(marker) = s.strip_prefix("delimiter:") {
            if marker.is_empty() {
                return Err(bad());
            }
            return Ok(Self::Delimiter {
                marker: marker.to_owned(),
            });
        }
        let ranges = s.strip_prefix("explicit:").ok_or_else(bad)?;
        let ranges = ranges
            .split(',')
            .map(|r| {
                let (a, b) = r.split_once('-').unwrap_or((r, r));
                Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
            })
            .collect::<Result<Vec<(usize, usize)>, PipelineError>>()?;
        Ok(Self::Explicit { ranges })
    }
}

impl fmt::Display for BoundarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PageBreaks => f.write_str("page_breaks"),
            Self::Single => f.write_str("single"),
            Self::Delimiter { marker } => write!(f, "delimiter:{marker}"),
            Self::Explicit { ranges } => {
                let parts: Vec<String> = ranges.iter().map(|(a, b)| format!("{a}-{b}")).collect();
                write!(f, "explicit:{}", parts.join(","))
            }
        }
    }
}

/// `sha256:<hex>` digest of the document bytes.
pub fn content_hash(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

/// Letter id derived from applicant, content hash and position, so
/// re-ingesting identical bytes reproduces every id.
pub fn letter_id(applicant_id: &str, content_hash: &str, index: usize) -> String {
    let mut h = Sha256::new();
    h.update(applicant_id.as_bytes());
    h.update([0]);
    h.update(content_hash.as_bytes());
    format!("{}-l{index}", &hex::encode(h.finalize())[..16])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestedDocument {
    pub applicant_id: String,
    pub content_hash: String,
    pub letters: Vec<LetterDocument>,
    pub sentences: Vec<SentenceRecord>,
}

impl IngestedDocument {
    pub fn letter_sentences<'a>(&'a self, letter: &'a LetterDocument) -> Vec<&'a SentenceRecord> {
        self.sentences.iter().filter(|s| s.letter_id == letter.letter_id).collect()
    }
}

fn cut_letters(pages: &[String], spec: &BoundarySpec) -> Result<Vec<String>, PipelineError> {
    let parts: Vec<String> = match spec {
        BoundarySpec::PageBreaks => pages.to_vec(),
        BoundarySpec::Single => vec![pages.join("\n")],
        BoundarySpec::Delimiter { marker } => pages.join("\n").split(marker.as_str()).map(str::to_owned).collect(),
        BoundarySpec::Explicit { ranges } => {
            if ranges.is_empty() {
                return Err(PipelineError::BoundaryMismatch("no page ranges given".into()));
            }
            ranges
                .iter()
                .map(|&(a, b)| {
                    if a == 0 || a > b || b > pages.len() {
                        Err(PipelineError::BoundaryMismatch(format!(
                            "range {a}-{b} outside pages 1-{}",
                            pages.len()
                        )))
                    } else {
                        Ok(pages[a - 1..b].join("\n"))
                    }
                })
                .collect::<Result<_, _>>()?
        }
    };
    Ok(parts.into_iter().map(|p| p.trim().to_owned()).collect())
}

/// Extracts, cuts and segments a document. Blank letters are dropped except
/// under explicit ranges, where each range must hold text.
pub fn ingest_document(
    bytes: &[u8],
    applicant_id: &str,
    extractor: &dyn TextExtractor,
    boundary: &BoundarySpec,
) -> Result<IngestedDocument, PipelineError> {
    if bytes.is_empty() {
        return Err(PipelineError::EmptyDocument);
    }
    let pages = extractor.extract(bytes)?;
    if pages.iter().all(|p| p.trim().is_empty()) {
        return Err(PipelineError::EmptyDocument);
    }
    let hash = content_hash(bytes);
    let mut parts = cut_letters(&pages, boundary)?;
    if let BoundarySpec::Explicit { .. } = boundary {
        if let Some(i) = parts.iter().position(|p| p.is_empty()) {
            return Err(PipelineError::BoundaryMismatch(format!("range {} holds no text", i + 1)));
        }
    }
    parts.retain(|p| !p.is_empty());
    let mut letters = Vec::new();
    let mut sentences = Vec::new();
    for (i, raw) in parts.into_iter().enumerate() {
        let id = letter_id(applicant_id, &hash, i);
        let segs = segment_sentences(&id, &raw);
        letters.push(LetterDocument {
            letter_id: id,
            applicant_id: applicant_id.to_owned(),
            writer_role: WriterRole::Unknown,
            raw_text: raw,
            sentences: segs.iter().map(|s| s.sentence_id.clone()).collect(),
        });
        sentences.extend(segs);
    }
    if letters.is_empty() {
        return Err(PipelineError::EmptyDocument);
    }
    Ok(IngestedDocument {
        applicant_id: applicant_id.to_owned(),
        content_hash: hash,
        letters,
        sentences,
    })
}

/// `num / den` rounded half up to four decimals, e.g. `"0.3000"`.
pub fn format_fraction(num: u64, den: u64) -> String {
    if den == 0 {
        return "0.0000".into();
    }
    let scaled = (u128::from(num) * 20_000 + u128::from(den)) / (2 * u128::from(den));
    format!("{}.{:04}", scaled / 10_000, scaled % 10_000)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightSpan {
    pub sentence_id: String,
    pub span: Span,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LetterAnalysis {
    pub letter_id: String,
    pub total_sentences: u64,
    pub highlighted_sentences: u64,
    pub highlights: Vec<HighlightSpan>,
    /// `highlighted_sentences / total_sentences` to four decimals.
    pub proportion: String,
}

/// Classifies every sentence of `letter`; positives become highlights.
pub fn analyze_letter(
    letter: &LetterDocument,
    sentences: &[&SentenceRecord],
    classifier: &dyn SentenceClassifier,
) -> Result<LetterAnalysis, PipelineError> {
    if sentences.is_empty() {
        return Err(PipelineError::EmptyLetter(letter.letter_id.clone()));
    }
    let texts: Vec<&str> = sentences.iter().map(|s| s.text.as_str()).collect();
    let highlights: Vec<HighlightSpan> = classifier
        .predict_batch(&texts)
        .into_iter()
        .zip(sentences)
        .filter(|(p, _)| p.label == 1)
        .map(|(p, s)| HighlightSpan {
            sentence_id: s.sentence_id.clone(),
            span: s.span,
            confidence: p.confidence,
        })
        .collect();
    let (n, d) = (highlights.len() as u64, sentences.len() as u64);
    Ok(LetterAnalysis {
        letter_id: letter.letter_id.clone(),
        total_sentences: d,
        highlighted_sentences: n,
        highlights,
        proportion: format_fraction(n, d),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionSummary {
    pub letter_id: String,
    pub sentence_id: String,
    pub micro_label: MicroLabel,
    pub phrases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelIds {
    pub classifier: String,
    pub extraction: String,
    pub verification: String,
    pub summary: String,
    pub prompts: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicantReport {
    pub schema: String,
    pub applicant_id: String,
    pub content_hash: String,
    pub pipeline_version: String,
    pub models: ModelIds,
    pub letters_count: u64,
    pub letters: Vec<LetterAnalysis>,
    pub micro_label_counts: BTreeMap<MicroLabel, u64>,
    pub extractions: Vec<ExtractionSummary>,
    pub summary: String,
    pub summary_degraded: bool,
}

impl ApplicantReport {
    /// Pretty JSON with a trailing newline; the canonical stored form.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises") + "\n"
    }

    pub fn total_highlighted(&self) -> u64 {
        self.letters.iter().map(|l| l.highlighted_sentences).sum()
    }

    pub fn total_sentences(&self) -> u64 {
        self.letters.iter().map(|l| l.total_sentences).sum()
    }
}

/// Generative side of the pipeline.
#[derive(Clone)]
pub struct Generative {
    pub sessions: Arc<dyn SessionFactory>,
    pub prompts: Arc<PromptSet>,
    pub max_steps: usize,
}

impl Generative {
    pub fn new(sessions: Arc<dyn SessionFactory>, prompts: PromptSet) -> Self {
        Self {
            sessions,
            prompts: Arc::new(prompts),
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BuiltReport {
    pub report: ApplicantReport,
    pub analyses: Vec<LetterAnalysis>,
    pub extractions: Vec<ExtractionResult>,
}

/// Runs the full flow: highlight, extract per positive sentence and
/// micro-label, count, summarise.
pub fn build_report(
    doc: &IngestedDocument,
    classifier: &dyn SentenceClassifier,
    generative: &Generative,
) -> Result<BuiltReport, PipelineError> {
    if doc.letters.is_empty() {
        return Err(PipelineError::NoLetters);
    }
    let analyses = doc
        .letters
        .par_iter()
        .map(|l| analyze_letter(l, &doc.letter_sentences(l), classifier))
        .collect::<Result<Vec<_>, _>>()?;

    let sentence_by_id: BTreeMap<&str, &SentenceRecord> =
        doc.sentences.iter().map(|s| (s.sentence_id.as_str(), s)).collect();
    let jobs: Vec<(&str, &SentenceRecord, MicroLabel)> = analyses
        .iter()
        .flat_map(|a| {
            let sentence_by_id = &sentence_by_id;
            a.highlights.iter().flat_map(move |h| {
                let s = sentence_by_id[h.sentence_id.as_str()];
                MicroLabel::ALL.into_iter().map(move |l| (a.letter_id.as_str(), s, l))
            })
        })
        .collect();
    let tools = ToolRegistry::with_verifiers(generative.sessions.clone(), generative.prompts.clone());
    let extractions = jobs
        .par_iter()
        .map(|(_, s, label)| {
            let session = generative.sessions.open(SessionRole::Extraction);
            run_react(s, *label, session.as_ref(), &tools, &generative.prompts, generative.max_steps)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(PipelineError::Extract)?;

    let mut by_letter: BTreeMap<String, Vec<LabeledPhrase>> =
        doc.letters.iter().map(|l| (l.letter_id.clone(), Vec::new())).collect();
    let mut summaries = Vec::new();
    for ((letter_id, _, _), r) in jobs.iter().zip(&extractions) {
        if !r.verified || r.phrases.is_empty() {
            continue;
        }
        by_letter.entry((*letter_id).to_owned()).or_default().extend(r.phrases.iter().map(|p| LabeledPhrase {
            micro_label: r.micro_label,
            phrase: p.clone(),
        }));
        summaries.push(ExtractionSummary {
            letter_id: (*letter_id).to_owned(),
            sentence_id: r.sentence_id.clone(),
            micro_label: r.micro_label,
            phrases: r.phrases.clone(),
        });
    }
    let summary_session = generative.sessions.open(SessionRole::Summary);
    let summary = summarize(&by_letter, summary_session.as_ref(), &generative.prompts, SUMMARY_MAX_WORDS)
        .map_err(PipelineError::Summarize)?;

    let report = ApplicantReport {
        schema: REPORT_SCHEMA.to_owned(),
        applicant_id: doc.applicant_id.clone(),
        content_hash: doc.content_hash.clone(),
        pipeline_version: PIPELINE_VERSION.to_owned(),
        models: ModelIds {
            classifier: classifier.backend_id(),
            extraction: generative.sessions.model_id(SessionRole::Extraction),
            verification: generative.sessions.model_id(SessionRole::Verification),
            summary: generative.sessions.model_id(SessionRole::Summary),
            prompts: generative.prompts.version(),
        },
        letters_count: doc.letters.len() as u64,
        letters: analyses.clone(),
        micro_label_counts: micro_label_distribution(&extractions),
        extractions: summaries,
        summary: summary.text,
        summary_degraded: summary.degraded,
    };
    Ok(BuiltReport {
        report,
        analyses,
        extractions,
    })
}

/// Writes every trace of a built report as newline-delimited records.
pub fn write_traces<W: Write>(out: &mut W, built: &BuiltReport) -> Result<(), ExtractError> {
    crate::extract::write_trace_log(out, &built.extractions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{LexiconClassifier, PhraseLibrary};
    use crate::extract::DoubleSessionFactory;

    const DOC: &str = "Dr. Lee led the team to a strong finish. The lab is on the second floor.\x0c\
        She is an excellent communicator. She attended every seminar.\x0c\
        He proposed new ideas each week.";

    #[test]
    fn fractions_render_to_four_decimals() {
        assert_eq!(format_fraction(3, 10), "0.3000");
        assert_eq!(format_fraction(0, 7), "0.0000");
        assert_eq!(format_fraction(2, 3), "0.6667");
        assert_eq!(format_fraction(1, 8), "0.1250");
        assert_eq!(format_fraction(5, 5), "1.0000");
    }

    #[test]
    fn boundary_spec_parsing() {
        assert_eq!("".parse::<BoundarySpec>().unwrap(), BoundarySpec::PageBreaks);
        assert_eq!(
            "explicit:1-2,3".parse::<BoundarySpec>().unwrap(),
            BoundarySpec::Explicit {
                ranges: vec![(1, 2), (3, 3)]
            }
        );
        assert_eq!(
            "delimiter:---".parse::<BoundarySpec>().unwrap().to_string(),
            "delimiter:---"
        );
        assert!("pages".parse::<BoundarySpec>().is_err());
    }

    #[test]
    fn ingestion_is_idempotent_and_respects_boundaries() {
        let a = ingest_document(DOC.as_bytes(), "app", &FixtureExtractor, &BoundarySpec::PageBreaks).unwrap();
        let b = ingest_document(DOC.as_bytes(), "app", &FixtureExtractor, &BoundarySpec::PageBreaks).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.letters.len(), 3);
        let single = ingest_document(DOC.as_bytes(), "app", &FixtureExtractor, &BoundarySpec::Single).unwrap();
        assert_eq!(single.letters.len(), 1);
        let bad = ingest_document(
            DOC.as_bytes(),
            "app",
            &FixtureExtractor,
            &BoundarySpec::Explicit { ranges: vec![(1, 4)] },
        );
        assert!(matches!(bad, Err(PipelineError::BoundaryMismatch(_))));
        assert!(matches!(
            ingest_document(b"", "app", &FixtureExtractor, &BoundarySpec::Single),
            Err(PipelineError::EmptyDocument)
        ));
        for s in &a.sentences {
            let letter = a.letters.iter().find(|l| l.letter_id == s.letter_id).unwrap();
            assert_eq!(s.span.slice(&letter.raw_text), Some(s.text.as_str()));
        }
    }

    #[test]
    fn report_counts_match_extractions() {
        let doc = ingest_document(DOC.as_bytes(), "app", &FixtureExtractor, &BoundarySpec::PageBreaks).unwrap();
        let lib = PhraseLibrary::bundled();
        let gen = Generative::new(Arc::new(DoubleSessionFactory::new(lib.clone())), PromptSet::bundled());
        let built = build_report(&doc, &LexiconClassifier::new(lib), &gen).unwrap();
        let r = &built.report;
        assert_eq!(r.letters_count, 3);
        assert_eq!(r.letters[0].proportion, "0.5000");
        let total: u64 = r.micro_label_counts.values().sum();
        assert_eq!(total, r.extractions.iter().map(|e| e.phrases.len() as u64).sum::<u64>());
        assert_eq!(r.micro_label_counts[&MicroLabel::Teamwork], 1);
        assert_eq!(r.micro_label_counts[&MicroLabel::Communication], 1);
        assert_eq!(r.micro_label_counts[&MicroLabel::Innovation], 1);
        let again = build_report(&doc, &LexiconClassifier::new(PhraseLibrary::bundled()), &gen).unwrap();
        assert_eq!(again.report.to_json(), r.to_json());
    }

    #[test]
    fn no_positives_gives_fallback_summary() {
        let doc = ingest_document(b"Nothing here. Just weather.", "app", &FixtureExtractor, &BoundarySpec::Single)
            .unwrap();
        let lib = PhraseLibrary::bundled();
        let gen = Generative::new(Arc::new(DoubleSessionFactory::new(lib.clone())), PromptSet::bundled());
        let r = build_report(&doc, &LexiconClassifier::new(lib), &gen).unwrap().report;
        assert_eq!(r.summary, crate::extract::FALLBACK_SUMMARY);
        assert!(r.micro_label_counts.values().all(|c| *c == 0));
        assert_eq!(r.letters[0].proportion, "0.0000");
    }
}
