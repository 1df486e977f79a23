//! Assembles classifier, generative sessions, prompts and text extractor
//! from configuration. The CLI and the HTTP service share this so that both
//! produce byte-identical reports for the same inputs.

use std::path::PathBuf;
use std::sync::Arc;

use lori_core::classify::{load_classifier, LexiconClassifier, PhraseLibrary, SentenceClassifier};
use lori_core::extract::{
    DoubleSessionFactory, LlamaServerConfig, LlamaSessionFactory, PromptSet, SessionFactory, SessionRole,
};
use lori_core::pipeline::{
    build_report, ingest_document, BoundarySpec, BuiltReport, FixtureExtractor, Generative, IngestedDocument,
    ModelIds, OcrExtractor, PipelineError, TextExtractor, TextLayerExtractor,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("cannot load classifier: {0}")]
    Classifier(#[from] lori_core::classify::ClassifyError),
    #[error("cannot load prompts: {0}")]
    Prompts(#[from] lori_core::extract::ExtractError),
    #[error("unknown {what} {value:?}")]
    Unknown { what: &'static str, value: String },
}

/// Which text extractor handles uploaded bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorChoice {
    /// Text layer for bytes starting with `%PDF-`, form-feed text otherwise.
    #[default]
    Auto,
    TextLayer,
    Ocr,
    Fixture,
}

impl std::str::FromStr for ExtractorChoice {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Self::Auto),
            "text_layer" | "text-layer" => Ok(Self::TextLayer),
            "ocr" => Ok(Self::Ocr),
            "fixture" | "text" => Ok(Self::Fixture),
            _ => Err(EngineError::Unknown {
                what: "extractor",
                value: s.into(),
            }),
        }
    }
}

/// Backend for the extraction, verification and summary sessions.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum GenerativeChoice {
    /// Deterministic lexicon-driven agent, rule verifier and template summary.
    #[default]
    Doubles,
    Llama(LlamaServerConfig),
}

#[derive(Debug, Clone, Default)]
pub struct EngineConfig {
    /// Trained model directory; `None` selects the bundled lexicon classifier.
    pub models: Option<PathBuf>,
    /// Prompt template directory; `None` selects the bundled templates.
    pub prompts: Option<PathBuf>,
    pub generative: GenerativeChoice,
    pub extractor: ExtractorChoice,
    /// Overrides the ReAct step budget when set.
    pub max_steps: Option<usize>,
}

#[derive(Clone)]
pub struct Engine {
    pub classifier: Arc<dyn SentenceClassifier>,
    pub generative: Generative,
    pub extractor: ExtractorChoice,
}

impl Engine {
    pub fn load(config: &EngineConfig) -> Result<Self, EngineError> {
        let classifier: Arc<dyn SentenceClassifier> = match &config.models {
            Some(dir) => Arc::from(load_classifier(dir)?),
            None => Arc::new(LexiconClassifier::new(PhraseLibrary::bundled())),
        };
        let prompts = match &config.prompts {
            Some(dir) => PromptSet::load(dir)?,
            None => PromptSet::bundled(),
        };
        let sessions: Arc<dyn SessionFactory> = match &config.generative {
            GenerativeChoice::Doubles => Arc::new(DoubleSessionFactory::new(PhraseLibrary::bundled())),
            GenerativeChoice::Llama(c) => Arc::new(LlamaSessionFactory::new(c.clone())),
        };
        let mut generative = Generative::new(sessions, prompts);
        if let Some(n) = config.max_steps {
            generative.max_steps = n;
        }
        Ok(Self {
            classifier,
            generative,
            extractor: config.extractor,
        })
    }

    pub fn model_ids(&self) -> ModelIds {
        let s = &self.generative.sessions;
        ModelIds {
            classifier: self.classifier.backend_id(),
            extraction: s.model_id(SessionRole::Extraction),
            verification: s.model_id(SessionRole::Verification),
            summary: s.model_id(SessionRole::Summary),
            prompts: self.generative.prompts.version(),
        }
    }

    fn extractor_for(&self, bytes: &[u8]) -> Box<dyn TextExtractor> {
        match self.extractor {
            ExtractorChoice::Auto if bytes.starts_with(b"%PDF-") => Box::new(TextLayerExtractor),
            ExtractorChoice::Auto | ExtractorChoice::Fixture => Box::new(FixtureExtractor),
            ExtractorChoice::TextLayer => Box::new(TextLayerExtractor),
            ExtractorChoice::Ocr => Box::new(OcrExtractor::default()),
        }
    }

    pub fn ingest(
        &self,
        bytes: &[u8],
        applicant_id: &str,
        boundary: &BoundarySpec,
    ) -> Result<IngestedDocument, PipelineError> {
        ingest_document(bytes, applicant_id, self.extractor_for(bytes).as_ref(), boundary)
    }

    pub fn report(&self, doc: &IngestedDocument) -> Result<BuiltReport, PipelineError> {
        build_report(doc, self.classifier.as_ref(), &self.generative)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auto_extractor_dispatches_on_magic() {
        let e = Engine::load(&EngineConfig::default()).unwrap();
        use lori_core::pipeline::ExtractorKind;
        assert_eq!(e.extractor_for(b"%PDF-1.4 ...").kind(), ExtractorKind::TextLayer);
        assert_eq!(e.extractor_for(b"Plain text.").kind(), ExtractorKind::Fixture);
    }

    #[test]
    fn extractor_names_parse() {
        assert_eq!("text-layer".parse::<ExtractorChoice>().unwrap(), ExtractorChoice::TextLayer);
        assert!("scanner".parse::<ExtractorChoice>().is_err());
    }
}
