//! Micro-label phrase extraction with a thought/action/observation loop,
//! isolated phrase verification, distributions, and cross-letter summaries.
//!
//! Each turn the extraction session writes a thought and then picks one of
//! `extract`, `verify_<label>` or `finish` under a choice grammar. Extracted
//! phrases must occur verbatim in the sentence (after case folding and
//! whitespace normalisation). Verification runs in a fresh session whose
//! prompt is built only from the phrases and the micro-label definition.

mod client;
mod grammar;
mod prompts;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::fold_char;
use crate::corpus::{MicroLabel, SentenceRecord};

pub use client::{
    DoubleSessionFactory, GenerativeClient, LexiconAgentClient, LlamaServerClient, LlamaServerConfig,
    LlamaSessionFactory, LoggedPrompt, PromptLog, RuleVerifierClient, ScriptStep, ScriptedClient,
    ScriptedSessionFactory, SessionFactory, SessionRole, TemplateSummaryClient,
};
pub use grammar::OutputGrammar;
pub use prompts::{fill, LabelPrompts, PromptSet, SummaryPrompts};

pub const DEFAULT_MAX_STEPS: usize = 8;
pub const MAX_PHRASES: usize = 8;
pub const THOUGHT_MAX_WORDS: usize = 60;
pub const SUMMARY_MAX_WORDS: usize = 120;
pub const FALLBACK_SUMMARY: &str = "No leadership evidence was detected in the submitted letters.";
/// Minimum length of a sentence substring the isolation audit looks for.
pub const ISOLATION_WINDOW: usize = 15;
/// How an empty extraction is shown to the model in the rendered trace.
pub const EMPTY_OBSERVATION: &str = "(none)";

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("output violates the {grammar} grammar: {detail}")]
    ConstraintViolation { grammar: String, detail: String },
    #[error("tool `{0}` is not registered")]
    ToolMissing(String),
    #[error("max_steps must be at least 3, got {0}")]
    BadMaxSteps(usize),
    #[error("generative client failed: {0}")]
    Client(String),
    #[error("prompt templates: {0}")]
    Prompt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Case-folded text with whitespace runs collapsed to one space.
pub fn fold_text(text: &str) -> String {
    text.split_whitespace()
        .map(|w| w.chars().map(fold_char).collect::<String>())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Whether `phrase` occurs contiguously in `sentence` after folding.
pub fn is_literal(phrase: &str, sentence: &str) -> bool {
    let p = fold_text(phrase);
    !p.is_empty() && fold_text(sentence).contains(&p)
}

/// Splits on `;`, trims, drops empties and keeps the first of any duplicates.
pub fn parse_phrase_list(raw: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    raw.split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty() && seen.insert(*p))
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Thought,
    Action,
    Observation,
    Final,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCall {
    pub name: String,
    pub arguments: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReActStep {
    pub index: usize,
    pub kind: StepKind,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call: Option<ToolCall>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    StepLimit,
    ConstraintViolation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub sentence_id: String,
    pub micro_label: MicroLabel,
    pub phrases: Vec<String>,
    pub trace: Vec<ReActStep>,
    pub verified: bool,
    pub status: RunStatus,
}

/// Whether `trace` matches `(thought (action observation)?)+ final`.
pub fn trace_is_well_formed(trace: &[ReActStep]) -> bool {
    let mut i = 0;
    let mut cycles = 0;
    while i < trace.len() && trace[i].kind == StepKind::Thought {
        i += 1;
        cycles += 1;
        if i + 1 < trace.len() && trace[i].kind == StepKind::Action {
            if trace[i].tool_call.is_none() || trace[i + 1].kind != StepKind::Observation {
                return false;
            }
            i += 2;
        }
    }
    cycles > 0
        && i + 1 == trace.len()
        && trace[i].kind == StepKind::Final
        && trace.iter().enumerate().all(|(n, s)| s.index == n)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseVerdict {
    pub phrase: String,
    pub affirmed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationOutcome {
    pub verdicts: Vec<PhraseVerdict>,
    /// Raw verifier output, or a note when verification failed closed.
    pub observation: String,
    pub prompt: Option<String>,
}

/// Judges `phrases` in `client`, which must be a session of its own. The
/// prompt holds only the phrases and the micro-label definition. Malformed
/// output rejects every phrase.
pub fn verify_phrases(
    phrases: &[String],
    micro_label: MicroLabel,
    client: &dyn GenerativeClient,
    prompts: &PromptSet,
) -> VerificationOutcome {
    if phrases.is_empty() {
        return VerificationOutcome {
            verdicts: Vec::new(),
            observation: "no phrases to verify".into(),
            prompt: None,
        };
    }
    let t = prompts.label(micro_label);
    let joined = phrases.join("; ");
    let prompt = fill(
        &t.verify,
        &[("label", micro_label.as_str()), ("definition", &t.definition), ("phrases", &joined)],
    );
    let grammar = OutputGrammar::SemicolonPhraseList {
        max_items: phrases.len(),
    };
    let parsed = client
        .generate(&prompt, &grammar)
        .and_then(|raw| {
            grammar.check(&raw).map_err(|detail| ExtractError::ConstraintViolation {
                grammar: grammar.kind().into(),
                detail,
            })?;
            let verdicts = parse_verdicts(&raw, phrases, micro_label)?;
            Ok((raw.trim().to_owned(), verdicts))
        });
    match parsed {
        Ok((observation, verdicts)) => VerificationOutcome {
            verdicts,
            observation,
            prompt: Some(prompt),
        },
        Err(e) => VerificationOutcome {
            verdicts: phrases
                .iter()
                .map(|p| PhraseVerdict {
                    phrase: p.clone(),
                    affirmed: false,
                })
                .collect(),
            observation: format!("verification failed, all phrases rejected: {e}"),
            prompt: Some(prompt),
        },
    }
}

fn parse_verdicts(raw: &str, phrases: &[String], label: MicroLabel) -> Result<Vec<PhraseVerdict>, ExtractError> {
    let items: Vec<&str> = raw.split(';').map(str::trim).filter(|s| !s.is_empty()).collect();
    let violation = |detail: String| ExtractError::ConstraintViolation {
        grammar: "verdict_list".into(),
        detail,
    };
    if items.len() != phrases.len() {
        return Err(violation(format!("{} verdicts for {} phrases", items.len(), phrases.len())));
    }
    phrases
        .iter()
        .zip(items)
        .map(|(phrase, item)| {
            let item = fold_text(item);
            let p = fold_text(phrase);
            let affirmed = if item == format!("{p} is a {label} phrase") {
                true
            } else if item == format!("{p} is not a {label} phrase") {
                false
            } else {
                return Err(violation(format!("unexpected verdict `{item}`")));
            };
            Ok(PhraseVerdict {
                phrase: phrase.clone(),
                affirmed,
            })
        })
        .collect()
}

/// A callable tool: takes the current candidate phrases and returns verdicts.
pub trait PhraseTool: Send + Sync {
    fn call(&self, phrases: &[String]) -> VerificationOutcome;
}

/// `verify_<label>`: opens a fresh verification session per call and logs
/// every prompt it sends.
pub struct VerifyTool {
    label: MicroLabel,
    sessions: Arc<dyn SessionFactory>,
    prompts: Arc<PromptSet>,
    audit: Arc<Mutex<Vec<String>>>,
}

impl PhraseTool for VerifyTool {
    fn call(&self, phrases: &[String]) -> VerificationOutcome {
        let session = self.sessions.open(SessionRole::Verification);
        let outcome = verify_phrases(phrases, self.label, session.as_ref(), &self.prompts);
        if let Some(p) = &outcome.prompt {
            self.audit.lock().expect("audit log poisoned").push(p.clone());
        }
        outcome
    }
}

#[derive(Default)]
pub struct ToolRegistry {
    tools: BTreeMap<String, Arc<dyn PhraseTool>>,
    audit: Arc<Mutex<Vec<String>>>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `verify_<label>` for every micro-label.
    pub fn with_verifiers(sessions: Arc<dyn SessionFactory>, prompts: Arc<PromptSet>) -> Self {
        let mut reg = Self::new();
        for label in MicroLabel::ALL {
            let tool = VerifyTool {
                label,
                sessions: sessions.clone(),
                prompts: prompts.clone(),
                audit: reg.audit.clone(),
            };
            reg.tools.insert(format!("verify_{label}"), Arc::new(tool));
        }
        reg
    }

    pub fn register(&mut self, name: impl Into<String>, tool: Arc<dyn PhraseTool>) {
        self.tools.insert(name.into(), tool);
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn PhraseTool>> {
        self.tools.get(name)
    }

    /// Every verification prompt sent so far, in order.
    pub fn verification_prompts(&self) -> Vec<String> {
        self.audit.lock().expect("audit log poisoned").clone()
    }
}

/// Scans `prompt` for any `ISOLATION_WINDOW`-character substring of
/// `sentence`, after masking occurrences of the phrases under verification
/// (those are sentence substrings by construction). Returns the offending
/// substring, if any.
pub fn isolation_leak(prompt: &str, sentence: &str, phrases: &[String]) -> Option<String> {
    let mut masked = fold_text(prompt);
    for p in phrases {
        let p = fold_text(p);
        if !p.is_empty() {
            masked = masked.replace(&p, "\u{0}");
        }
    }
    let s: Vec<char> = fold_text(sentence).chars().collect();
    (0..s.len().saturating_sub(ISOLATION_WINDOW - 1))
        .map(|i| s[i..i + ISOLATION_WINDOW].iter().collect::<String>())
        .find(|w| masked.contains(w.as_str()))
}

struct TraceBuilder {
    steps: Vec<ReActStep>,
    max_steps: usize,
}

impl TraceBuilder {
    fn push(&mut self, kind: StepKind, content: String, tool_call: Option<ToolCall>) -> bool {
        if self.steps.len() >= self.max_steps {
            return false;
        }
        self.steps.push(ReActStep {
            index: self.steps.len(),
            kind,
            content,
            tool_call,
        });
        true
    }

    fn render(&self) -> String {
        let mut cycle = 0;
        self.steps
            .iter()
            .map(|s| match s.kind {
                StepKind::Thought => {
                    cycle += 1;
                    format!("Thought {cycle}: {}", s.content)
                }
                StepKind::Action => format!("Action {cycle}: {}", s.content),
                StepKind::Observation if s.content.is_empty() => format!("Observation {cycle}: {EMPTY_OBSERVATION}"),
                StepKind::Observation => format!("Observation {cycle}: {}", s.content),
                StepKind::Final => format!("Final Answer: {}", s.content),
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn cycle(&self) -> usize {
        self.steps.iter().filter(|s| s.kind == StepKind::Thought).count() + 1
    }
}

enum Call {
    Ok(String),
    Violated,
}

/// Calls `client`, allowing one retry after a grammar violation.
fn constrained(client: &dyn GenerativeClient, prompt: &str, grammar: &OutputGrammar) -> Result<Call, ExtractError> {
    for _ in 0..2 {
        match client.generate(prompt, grammar) {
            Ok(text) if grammar.check(&text).is_ok() => return Ok(Call::Ok(text.trim().to_owned())),
            Ok(_) | Err(ExtractError::ConstraintViolation { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(Call::Violated)
}

/// Runs the loop for one sentence and micro-label. Phrases in the result are
/// exactly those affirmed by the most recent verification; a run that hits
/// `max_steps` or two consecutive grammar violations yields no phrases.
pub fn run_react(
    sentence: &SentenceRecord,
    micro_label: MicroLabel,
    client: &dyn GenerativeClient,
    tools: &ToolRegistry,
    prompts: &PromptSet,
    max_steps: usize,
) -> Result<ExtractionResult, ExtractError> {
    if max_steps < 3 {
        return Err(ExtractError::BadMaxSteps(max_steps));
    }
    let verify_name = format!("verify_{micro_label}");
    let verifier = tools
        .get(&verify_name)
        .ok_or_else(|| ExtractError::ToolMissing(verify_name.clone()))?
        .clone();
    let t = prompts.label(micro_label);
    let options = vec!["extract".to_owned(), verify_name.clone(), "finish".to_owned()];
    let mut trace = TraceBuilder {
        steps: Vec::new(),
        max_steps,
    };
    let mut candidates: Vec<String> = Vec::new();
    let mut affirmed: Vec<String> = Vec::new();

    let finish = |trace: TraceBuilder, phrases: Vec<String>, status: RunStatus| ExtractionResult {
        sentence_id: sentence.sentence_id.clone(),
        micro_label,
        verified: status == RunStatus::Completed,
        phrases: if status == RunStatus::Completed { phrases } else { Vec::new() },
        trace: trace.steps,
        status,
    };

    loop {
        let step = trace.cycle().to_string();
        let vars = |rendered: &str| {
            [
                ("label", micro_label.as_str().to_owned()),
                ("definition", t.definition.clone()),
                ("sentence", sentence.text.clone()),
                ("trace", rendered.to_owned()),
                ("step", step.clone()),
            ]
        };
        let render = |template: &str, trace: &TraceBuilder| {
            let v = vars(&trace.render());
            let refs: Vec<(&str, &str)> = v.iter().map(|(k, v)| (*k, v.as_str())).collect();
            fill(template, &refs)
        };

        let thought = match constrained(
            client,
            &render(&t.thought, &trace),
            &OutputGrammar::BoundedProse {
                max_words: THOUGHT_MAX_WORDS,
            },
        )? {
            Call::Ok(text) => text,
            Call::Violated => return Ok(finish(trace, Vec::new(), RunStatus::ConstraintViolation)),
        };
        if !trace.push(StepKind::Thought, thought, None) {
            return Ok(finish(trace, Vec::new(), RunStatus::StepLimit));
        }

        let choice = match constrained(
            client,
            &render(&t.action, &trace),
            &OutputGrammar::Choice {
                options: options.clone(),
            },
        )? {
            Call::Ok(text) => text,
            Call::Violated => return Ok(finish(trace, Vec::new(), RunStatus::ConstraintViolation)),
        };

        if choice == "finish" {
            let content = affirmed.join("; ");
            if !trace.push(StepKind::Final, content, None) {
                return Ok(finish(trace, Vec::new(), RunStatus::StepLimit));
            }
            return Ok(finish(trace, affirmed, RunStatus::Completed));
        }

        if choice == "extract" {
            let call = ToolCall {
                name: "extract".into(),
                arguments: String::new(),
            };
            if !trace.push(StepKind::Action, "extract()".into(), Some(call)) {
                return Ok(finish(trace, Vec::new(), RunStatus::StepLimit));
            }
            let raw = match constrained(
                client,
                &render(&t.extract, &trace),
                &OutputGrammar::SemicolonPhraseList { max_items: MAX_PHRASES },
            )? {
                Call::Ok(text) => text,
                Call::Violated => return Ok(finish(trace, Vec::new(), RunStatus::ConstraintViolation)),
            };
            let (literal, rejected): (Vec<String>, Vec<String>) =
                parse_phrase_list(&raw).into_iter().partition(|p| is_literal(p, &sentence.text));
            let mut observation = raw.clone();
            if !rejected.is_empty() {
                observation.push_str(&format!(" [not in sentence: {}]", rejected.join("; ")));
            }
            candidates = literal;
            if !trace.push(StepKind::Observation, observation, None) {
                return Ok(finish(trace, Vec::new(), RunStatus::StepLimit));
            }
        } else {
            let arguments = candidates.join("; ");
            let call = ToolCall {
                name: verify_name.clone(),
                arguments: arguments.clone(),
            };
            if !trace.push(StepKind::Action, format!("{verify_name}(\"{arguments}\")"), Some(call)) {
                return Ok(finish(trace, Vec::new(), RunStatus::StepLimit));
            }
            let outcome = verifier.call(&candidates);
            affirmed = outcome
                .verdicts
                .iter()
                .filter(|v| v.affirmed)
                .map(|v| v.phrase.clone())
                .collect();
            if !trace.push(StepKind::Observation, outcome.observation, None) {
                return Ok(finish(trace, Vec::new(), RunStatus::StepLimit));
            }
        }
    }
}

/// Verified phrase counts per micro-label; every micro-label is present.
pub fn micro_label_distribution(results: &[ExtractionResult]) -> BTreeMap<MicroLabel, u64> {
    let mut counts: BTreeMap<MicroLabel, u64> = MicroLabel::ALL.iter().map(|l| (*l, 0)).collect();
    for r in results.iter().filter(|r| r.verified) {
        let distinct: BTreeSet<&str> = r.phrases.iter().map(String::as_str).collect();
        *counts.get_mut(&r.micro_label).expect("all labels present") += distinct.len() as u64;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabeledPhrase {
    pub micro_label: MicroLabel,
    pub phrase: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryOutcome {
    pub text: String,
    pub degraded: bool,
    pub client_calls: usize,
}

fn render_evidence(phrases_by_letter: &BTreeMap<String, Vec<LabeledPhrase>>) -> String {
    phrases_by_letter
        .iter()
        .map(|(letter, phrases)| {
            let groups: Vec<String> = MicroLabel::ALL
                .iter()
                .filter_map(|label| {
                    let ps: Vec<&str> = phrases
                        .iter()
                        .filter(|p| p.micro_label == *label)
                        .map(|p| p.phrase.as_str())
                        .collect();
                    (!ps.is_empty()).then(|| format!("{label}: {}", ps.join("; ")))
                })
                .collect();
            if groups.is_empty() {
                format!("- {letter} | none")
            } else {
                format!("- {letter} | {}", groups.join(" | "))
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Inverse of the evidence block rendered into summary prompts.
pub fn parse_summary_evidence(prompt: &str) -> Vec<(String, Vec<LabeledPhrase>)> {
    prompt
        .lines()
        .filter_map(|l| l.strip_prefix("- "))
        .filter_map(|l| {
            let mut parts = l.split(" | ");
            let letter = parts.next()?.trim().to_owned();
            let phrases = parts
                .filter_map(|g| g.split_once(": "))
                .filter_map(|(label, list)| Some((label.trim().parse::<MicroLabel>().ok()?, list)))
                .flat_map(|(label, list)| {
                    parse_phrase_list(list).into_iter().map(move |phrase| LabeledPhrase {
                        micro_label: label,
                        phrase,
                    })
                })
                .collect();
            Some((letter, phrases))
        })
        .collect()
}

/// Cross-letter summary under a bounded-prose grammar. With no evidence the
/// fixed fallback is returned without calling the client; two violations
/// in a row also yield the fallback, flagged as degraded.
pub fn summarize(
    phrases_by_letter: &BTreeMap<String, Vec<LabeledPhrase>>,
    client: &dyn GenerativeClient,
    prompts: &PromptSet,
    max_words: usize,
) -> Result<SummaryOutcome, ExtractError> {
    if phrases_by_letter.values().all(Vec::is_empty) {
        return Ok(SummaryOutcome {
            text: FALLBACK_SUMMARY.into(),
            degraded: false,
            client_calls: 0,
        });
    }
    let max = max_words.to_string();
    let evidence = render_evidence(phrases_by_letter);
    let prompt = fill(&prompts.summary.summary, &[("letters", &evidence), ("max_words", &max)]);
    let grammar = OutputGrammar::BoundedProse { max_words };
    let mut calls = 0;
    for _ in 0..2 {
        calls += 1;
        match client.generate(&prompt, &grammar) {
            Ok(text) if grammar.check(&text).is_ok() => {
                return Ok(SummaryOutcome {
                    text: text.trim().to_owned(),
                    degraded: false,
                    client_calls: calls,
                })
            }
            Ok(_) | Err(ExtractError::ConstraintViolation { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(SummaryOutcome {
        text: FALLBACK_SUMMARY.into(),
        degraded: true,
        client_calls: calls,
    })
}

/// One line of the trace log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub sentence_id: String,
    pub micro_label: MicroLabel,
    pub index: usize,
    pub kind: StepKind,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call: Option<ToolCall>,
}

pub fn write_trace_log<W: Write>(out: &mut W, results: &[ExtractionResult]) -> Result<(), ExtractError> {
    for r in results {
        for s in &r.trace {
            let rec = TraceRecord {
                sentence_id: r.sentence_id.clone(),
                micro_label: r.micro_label,
                index: s.index,
                kind: s.kind,
                content: s.content.clone(),
                tool_call: s.tool_call.clone(),
            };
            serde_json::to_writer(&mut *out, &rec)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}
