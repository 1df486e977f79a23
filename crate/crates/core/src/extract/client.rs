//! Generative clients: the interface, deterministic test doubles, and an
//! HTTP adapter for a locally hosted llama.cpp server.

use std::collections::{BTreeSet, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{fold_text, ExtractError, LabeledPhrase, OutputGrammar};
use crate::classify::{lexicon_predict, PhraseLibrary};
use crate::corpus::MicroLabel;

pub trait GenerativeClient: Send + Sync {
    /// Text satisfying `grammar`, or [`ExtractError::ConstraintViolation`].
    fn generate(&self, prompt: &str, grammar: &OutputGrammar) -> Result<String, ExtractError>;
    fn model_id(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionRole {
    Extraction,
    Verification,
    Summary,
}

/// Hands out independent sessions; a session never sees another's prompts.
pub trait SessionFactory: Send + Sync {
    fn open(&self, role: SessionRole) -> Box<dyn GenerativeClient>;
    fn model_id(&self, role: SessionRole) -> String;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoggedPrompt {
    pub session: usize,
    pub role: SessionRole,
    pub prompt: String,
    pub grammar: String,
}

/// Shared, append-only record of every prompt sent, for audits.
#[derive(Debug, Clone, Default)]
pub struct PromptLog {
    entries: Arc<Mutex<Vec<LoggedPrompt>>>,
    sessions: Arc<AtomicUsize>,
}

impl PromptLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_session(&self) -> usize {
        self.sessions.fetch_add(1, Ordering::SeqCst)
    }

    pub fn record(&self, session: usize, role: SessionRole, prompt: &str, grammar: &OutputGrammar) {
        self.entries.lock().expect("prompt log poisoned").push(LoggedPrompt {
            session,
            role,
            prompt: prompt.to_owned(),
            grammar: grammar.kind().to_owned(),
        });
    }

    pub fn entries(&self) -> Vec<LoggedPrompt> {
        self.entries.lock().expect("prompt log poisoned").clone()
    }

    pub fn by_role(&self, role: SessionRole) -> Vec<String> {
        self.entries()
            .into_iter()
            .filter(|e| e.role == role)
            .map(|e| e.prompt)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptStep {
    Reply(String),
    /// The call fails with a constraint violation.
    Violation,
}

/// Replays a fixed queue of replies, one per call, ignoring the prompt.
pub struct ScriptedClient {
    model_id: String,
    queue: Mutex<VecDeque<ScriptStep>>,
    log: PromptLog,
    session: usize,
    role: SessionRole,
}

impl ScriptedClient {
    pub fn new(model_id: impl Into<String>, steps: impl IntoIterator<Item = ScriptStep>) -> Self {
        let log = PromptLog::new();
        let session = log.next_session();
        Self {
            model_id: model_id.into(),
            queue: Mutex::new(steps.into_iter().collect()),
            log,
            session,
            role: SessionRole::Extraction,
        }
    }

    pub fn replies<S: Into<String>>(model_id: impl Into<String>, replies: impl IntoIterator<Item = S>) -> Self {
        Self::new(model_id, replies.into_iter().map(|r| ScriptStep::Reply(r.into())))
    }

    pub fn with_log(mut self, log: &PromptLog, role: SessionRole) -> Self {
        self.session = log.next_session();
        self.log = log.clone();
        self.role = role;
        self
    }

    pub fn log(&self) -> &PromptLog {
        &self.log
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().expect("script poisoned").len()
    }
}

impl GenerativeClient for ScriptedClient {
    fn generate(&self, prompt: &str, grammar: &OutputGrammar) -> Result<String, ExtractError> {
        self.log.record(self.session, self.role, prompt, grammar);
        match self.queue.lock().expect("script poisoned").pop_front() {
            Some(ScriptStep::Reply(text)) => Ok(text),
            Some(ScriptStep::Violation) => Err(ExtractError::ConstraintViolation {
                grammar: grammar.kind().into(),
                detail: "scripted violation".into(),
            }),
            None => Err(ExtractError::Client(format!("{}: script exhausted", self.model_id))),
        }
    }

    fn model_id(&self) -> String {
        self.model_id.clone()
    }
}

/// Opens one scripted session per call from a queue of scripts.
pub struct ScriptedSessionFactory {
    model_id: String,
    scripts: Mutex<VecDeque<Vec<ScriptStep>>>,
    log: PromptLog,
}

impl ScriptedSessionFactory {
    pub fn new(model_id: impl Into<String>, scripts: impl IntoIterator<Item = Vec<ScriptStep>>) -> Self {
        Self {
            model_id: model_id.into(),
            scripts: Mutex::new(scripts.into_iter().collect()),
            log: PromptLog::new(),
        }
    }

    pub fn log(&self) -> &PromptLog {
        &self.log
    }
}

impl SessionFactory for ScriptedSessionFactory {
    fn open(&self, role: SessionRole) -> Box<dyn GenerativeClient> {
        let script = self.scripts.lock().expect("scripts poisoned").pop_front().unwrap_or_default();
        Box::new(ScriptedClient::new(self.model_id.clone(), script).with_log(&self.log, role))
    }

    fn model_id(&self, _: SessionRole) -> String {
        self.model_id.clone()
    }
}

fn field<'a>(prompt: &'a str, key: &str) -> Option<&'a str> {
    prompt.lines().rev().find_map(|l| l.strip_prefix(key)).map(str::trim)
}

fn prompt_label(prompt: &str) -> Result<MicroLabel, ExtractError> {
    field(prompt, "Micro-label:")
        .and_then(|l| l.parse().ok())
        .ok_or_else(|| ExtractError::Client("prompt lacks a micro-label line".into()))
}

/// Deterministic stand-in for the reasoning model: extracts the sentence's
/// phrase-library matches for the prompt's micro-label and walks the
/// extract, verify, finish sequence.
pub struct LexiconAgentClient {
    library: PhraseLibrary,
    log: PromptLog,
    session: usize,
}

impl LexiconAgentClient {
    pub const MODEL_ID: &'static str = "lexicon-agent/1";

    pub fn new(library: PhraseLibrary, log: &PromptLog) -> Self {
        Self {
            library,
            session: log.next_session(),
            log: log.clone(),
        }
    }
}

impl GenerativeClient for LexiconAgentClient {
    fn generate(&self, prompt: &str, grammar: &OutputGrammar) -> Result<String, ExtractError> {
        self.log.record(self.session, SessionRole::Extraction, prompt, grammar);
        let label = prompt_label(prompt)?;
        let observations: Vec<&str> = prompt
            .lines()
            .filter(|l| l.starts_with("Observation "))
            .map(|l| l.split_once(':').map_or("", |(_, rest)| rest.trim()))
            .collect();
        let nothing_found = observations.first().is_some_and(|o| *o == super::EMPTY_OBSERVATION);
        Ok(match grammar {
            OutputGrammar::SemicolonPhraseList { max_items } => {
                let sentence = field(prompt, "Sentence:").unwrap_or_default();
                let chars: Vec<char> = sentence.chars().collect();
                let mut seen = BTreeSet::new();
                lexicon_predict(sentence, &self.library)
                    .matches
                    .into_iter()
                    .filter(|m| m.micro_label == label)
                    .map(|m| chars[m.span.start..m.span.end].iter().collect::<String>())
                    .filter(|p| seen.insert(fold_text(p)))
                    .take(*max_items)
                    .collect::<Vec<_>>()
                    .join("; ")
            }
            OutputGrammar::Choice { .. } => match (observations.len(), nothing_found) {
                (0, _) => "extract".to_owned(),
                (1, false) => format!("verify_{label}"),
                _ => "finish".to_owned(),
            },
            OutputGrammar::BoundedProse { .. } => match (observations.len(), nothing_found) {
                (0, _) => format!("I should first extract phrases which contain skills related to {label}."),
                (1, false) => format!("I should verify whether each extracted phrase really shows {label}."),
                (1, true) => format!("No {label} phrases were found, so I can finish."),
                _ => "I now know the final answer.".to_owned(),
            },
        })
    }

    fn model_id(&self) -> String {
        Self::MODEL_ID.to_owned()
    }
}

/// Verification double: affirms a phrase unless it is listed in `rejected`
/// or, when a library is given, absent from that micro-label's phrases.
pub struct RuleVerifierClient {
    library: Option<PhraseLibrary>,
    rejected: BTreeSet<String>,
    log: PromptLog,
    session: usize,
}

impl RuleVerifierClient {
    pub const MODEL_ID: &'static str = "rule-verifier/1";
}

impl GenerativeClient for RuleVerifierClient {
    fn generate(&self, prompt: &str, grammar: &OutputGrammar) -> Result<String, ExtractError> {
        self.log.record(self.session, SessionRole::Verification, prompt, grammar);
        let label = prompt_label(prompt)?;
        let phrases = super::parse_phrase_list(field(prompt, "Phrases:").unwrap_or_default());
        Ok(phrases
            .iter()
            .map(|p| {
                let ok = !self.rejected.contains(&fold_text(p))
                    && self.library.as_ref().is_none_or(|lib| lib.contains(label, p));
                format!("{p} is {} {label} phrase", if ok { "a" } else { "not a" })
            })
            .collect::<Vec<_>>()
            .join("; "))
    }

    fn model_id(&self) -> String {
        Self::MODEL_ID.to_owned()
    }
}

/// Summary double: a fixed-shape paragraph built from the listed evidence,
/// padded to land between 80 and 120 words.
pub struct TemplateSummaryClient {
    log: PromptLog,
    session: usize,
}

impl TemplateSummaryClient {
    pub const MODEL_ID: &'static str = "template-summary/1";

    const PADDING: [&'static str; 6] = [
        "Each highlighted sentence can be opened in the letter viewer to check the surrounding context.",
        "The evidence is drawn only from sentences that the classifier marked as describing leadership.",
        "Phrases were kept only after an independent check confirmed that they fit their micro-label.",
        "Reviewers should weigh this summary together with the full letters and the rest of the application.",
        "Counts reflect distinct phrases per sentence, so repeated praise in one sentence is not inflated.",
        "Letters with few highlights may still contain relevant context that the automated reading missed.",
    ];

    pub fn new(log: &PromptLog) -> Self {
        Self {
            session: log.next_session(),
            log: log.clone(),
        }
    }

    /// The paragraph for a given grouping of evidence.
    pub fn compose(letters: &[(String, Vec<LabeledPhrase>)], max_words: usize) -> String {
        let mut sentences = vec![format!(
            "This summary draws on {} recommendation letter{}.",
            letters.len(),
            if letters.len() == 1 { "" } else { "s" }
        )];
        for label in MicroLabel::ALL {
            let phrases: Vec<&str> = letters
                .iter()
                .flat_map(|(_, ps)| ps.iter().filter(|p| p.micro_label == label).map(|p| p.phrase.as_str()))
                .take(4)
                .collect();
            let letters_with = letters
                .iter()
                .filter(|(_, ps)| ps.iter().any(|p| p.micro_label == label))
                .count();
            sentences.push(if phrases.is_empty() {
                format!("No verified {label} evidence was found.")
            } else {
                format!(
                    "For {label}, {letters_with} of the letters offer evidence such as \"{}\".",
                    phrases.join("\", \"")
                )
            });
        }
        let words = |s: &[String]| s.iter().map(|x| x.split_whitespace().count()).sum::<usize>();
        for pad in Self::PADDING {
            let n = pad.split_whitespace().count();
            if words(&sentences) >= 90 || words(&sentences) + n > 115 {
                break;
            }
            sentences.push(pad.to_owned());
        }
        let text = sentences.join(" ");
        text.split_whitespace().take(max_words).collect::<Vec<_>>().join(" ")
    }
}

impl GenerativeClient for TemplateSummaryClient {
    fn generate(&self, prompt: &str, grammar: &OutputGrammar) -> Result<String, ExtractError> {
        self.log.record(self.session, SessionRole::Summary, prompt, grammar);
        let max_words = match grammar {
            OutputGrammar::BoundedProse { max_words } => *max_words,
            _ => return Err(ExtractError::Client("summary double expects bounded prose".into())),
        };
        let letters = super::parse_summary_evidence(prompt);
        Ok(Self::compose(&letters, max_words))
    }

    fn model_id(&self) -> String {
        Self::MODEL_ID.to_owned()
    }
}

/// Sessions backed by the deterministic doubles above.
pub struct DoubleSessionFactory {
    library: PhraseLibrary,
    verifier_library: Option<PhraseLibrary>,
    rejected: BTreeSet<String>,
    log: PromptLog,
}

impl DoubleSessionFactory {
    pub fn new(library: PhraseLibrary) -> Self {
        Self {
            verifier_library: Some(library.clone()),
            library,
            rejected: BTreeSet::new(),
            log: PromptLog::new(),
        }
    }

    /// Verifier affirms everything not explicitly rejected.
    pub fn permissive_verifier(mut self) -> Self {
        self.verifier_library = None;
        self
    }

    pub fn rejecting(mut self, phrase: &str) -> Self {
        self.rejected.insert(fold_text(phrase));
        self
    }

    pub fn log(&self) -> &PromptLog {
        &self.log
    }
}

impl SessionFactory for DoubleSessionFactory {
    fn open(&self, role: SessionRole) -> Box<dyn GenerativeClient> {
        match role {
            SessionRole::Extraction => Box::new(LexiconAgentClient::new(self.library.clone(), &self.log)),
            SessionRole::Verification => Box::new(RuleVerifierClient {
                library: self.verifier_library.clone(),
                rejected: self.rejected.clone(),
                session: self.log.next_session(),
                log: self.log.clone(),
            }),
            SessionRole::Summary => Box::new(TemplateSummaryClient::new(&self.log)),
        }
    }

    fn model_id(&self, role: SessionRole) -> String {
        match role {
            SessionRole::Extraction => LexiconAgentClient::MODEL_ID,
            SessionRole::Verification => RuleVerifierClient::MODEL_ID,
            SessionRole::Summary => TemplateSummaryClient::MODEL_ID,
        }
        .to_owned()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlamaServerConfig {
    /// Base URL of a llama.cpp server, e.g. `http://127.0.0.1:8080`.
    pub base_url: String,
    pub model_id: String,
    pub n_predict: u32,
    pub temperature: f64,
    pub seed: u64,
    pub timeout_secs: u64,
}

impl Default for LlamaServerConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8080".into(),
            model_id: "llama-2-7b-chat".into(),
            n_predict: 256,
            temperature: 0.0,
            seed: 0,
            timeout_secs: 120,
        }
    }
}

/// Stateless `/completion` calls with GBNF-constrained sampling; every call
/// is its own session on the server side.
pub struct LlamaServerClient {
    config: LlamaServerConfig,
    http: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    grammar: String,
    n_predict: u32,
    temperature: f64,
    seed: u64,
    cache_prompt: bool,
}

#[derive(Deserialize)]
struct CompletionResponse {
    content: String,
}

impl LlamaServerClient {
    pub fn new(config: LlamaServerConfig) -> Result<Self, ExtractError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| ExtractError::Client(e.to_string()))?;
        Ok(Self { config, http })
    }
}

impl GenerativeClient for LlamaServerClient {
    fn generate(&self, prompt: &str, grammar: &OutputGrammar) -> Result<String, ExtractError> {
        let url = format!("{}/completion", self.config.base_url.trim_end_matches('/'));
        let body = CompletionRequest {
            prompt,
            grammar: grammar.to_gbnf(),
            n_predict: self.config.n_predict,
            temperature: self.config.temperature,
            seed: self.config.seed,
            cache_prompt: false,
        };
        let resp: CompletionResponse = self
            .http
            .post(url)
            .json(&body)
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json())
            .map_err(|e| ExtractError::Client(e.to_string()))?;
        let text = resp.content.trim().to_owned();
        grammar.check(&text).map_err(|detail| ExtractError::ConstraintViolation {
            grammar: grammar.kind().into(),
            detail,
        })?;
        Ok(text)
    }

    fn model_id(&self) -> String {
        self.config.model_id.clone()
    }
}

pub struct LlamaSessionFactory {
    config: LlamaServerConfig,
}

impl LlamaSessionFactory {
    pub fn new(config: LlamaServerConfig) -> Self {
        Self { config }
    }
}

/// Fails every call with the construction error.
struct BrokenClient(String, String);

impl GenerativeClient for BrokenClient {
    fn generate(&self, _: &str, _: &OutputGrammar) -> Result<String, ExtractError> {
        Err(ExtractError::Client(self.1.clone()))
    }

    fn model_id(&self) -> String {
        self.0.clone()
    }
}

impl SessionFactory for LlamaSessionFactory {
    fn open(&self, _: SessionRole) -> Box<dyn GenerativeClient> {
        match LlamaServerClient::new(self.config.clone()) {
            Ok(c) => Box::new(c),
            Err(e) => Box::new(BrokenClient(self.config.model_id.clone(), e.to_string())),
        }
    }

    fn model_id(&self, _: SessionRole) -> String {
        self.config.model_id.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_client_replays_then_fails() {
        let c = ScriptedClient::new("s", [ScriptStep::Reply("a".into()), ScriptStep::Violation]);
        let g = OutputGrammar::BoundedProse { max_words: 5 };
        assert_eq!(c.generate("p1", &g).unwrap(), "a");
        assert!(matches!(c.generate("p2", &g), Err(ExtractError::ConstraintViolation { .. })));
        assert!(matches!(c.generate("p3", &g), Err(ExtractError::Client(_))));
        assert_eq!(c.log().by_role(SessionRole::Extraction), vec!["p1", "p2", "p3"]);
    }

    #[test]
    fn template_summary_word_count_is_bounded() {
        for n in 0..4 {
            let letters: Vec<(String, Vec<LabeledPhrase>)> = (0..n)
                .map(|i| {
                    (
                        format!("l{i}"),
                        vec![LabeledPhrase {
                            micro_label: MicroLabel::Teamwork,
                            phrase: "led the team".into(),
                        }],
                    )
                })
                .collect();
            let words = TemplateSummaryClient::compose(&letters, 120).split_whitespace().count();
            assert!((80..=120).contains(&words), "{words}");
        }
    }

    #[test]
    fn unreachable_server_is_a_client_error() {
        let c = LlamaServerClient::new(LlamaServerConfig {
            base_url: "http://127.0.0.1:9".into(),
            timeout_secs: 2,
            ..Default::default()
        })
        .unwrap();
        let r = c.generate("x", &OutputGrammar::BoundedProse { max_words: 3 });
        assert!(matches!(r, Err(ExtractError::Client(_))));
    }
}
