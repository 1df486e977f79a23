//! Labeling-function spec files for `weaklabel`.
//!
//! ```toml
//! [[lf]]
//! id = "keywords"
//! kind = "keyword"        # keyword | constant | fewshot | forest | classifier
//! confidence = 0.9
//! threshold = 0.7         # optional; the profile's lf_threshold otherwise
//! ```
//!
//! Relative paths resolve against the spec file's directory. Example files
//! hold one `{"text": ..., "label": 0|1}` record per line.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use lori_core::classify::{load_classifier, PhraseLibrary, TrainingRow};
use lori_core::corpus::{SentenceRecord, Span};
use lori_core::lingfeat::{FeatureRegistry, RuleTagger};
use lori_core::weaksup::{
    ClassifierLf, ConstantLf, FewShotLf, ForestConfig, ForestLf, KeywordLf, LabelingFunction, ThresholdPolicy, Vote,
};
use serde::Deserialize;

use crate::error::{CliError, Context};
use crate::io::read_ndjson;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LfKind {
    Constant,
    Keyword,
    Fewshot,
    Forest,
    Classifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantVerdict {
    Positive,
    Negative,
    Abstain,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LfEntry {
    pub id: String,
    pub kind: LfKind,
    /// Confidence gate for this function.
    pub threshold: Option<f64>,
    /// Counts every non-abstaining vote regardless of confidence.
    #[serde(default)]
    pub ungated: bool,
    /// Vote confidence for `constant` and `keyword`.
    pub confidence: Option<f64>,
    pub verdict: Option<ConstantVerdict>,
    /// Phrase library for `keyword`; the bundled library otherwise.
    pub library: Option<PathBuf>,
    /// Labelled examples for `fewshot` and `forest`.
    pub examples: Option<PathBuf>,
    pub scale: Option<f64>,
    pub trees: Option<usize>,
    pub max_depth: Option<usize>,
    /// Model artifact directory for `classifier`.
    pub models: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LfSpec {
    pub lf: Vec<LfEntry>,
}

pub struct BuiltLfs {
    pub functions: Vec<Box<dyn LabelingFunction>>,
    pub policy: ThresholdPolicy,
}

impl LfSpec {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).invalid_at(path)?;
        let spec: Self = toml::from_str(&text).invalid_at(path)?;
        if spec.lf.is_empty() {
            return Err(CliError::invalid(format!("{}: no [[lf]] entries", path.display())));
        }
        let mut seen = BTreeSet::new();
        for e in &spec.lf {
            if !seen.insert(e.id.as_str()) {
                return Err(CliError::invalid(format!("{}: duplicate lf id `{}`", path.display(), e.id)));
            }
        }
        Ok(spec)
    }

    /// Instantiates every function; `base` anchors relative paths.
    pub fn build(&self, base: &Path, default_threshold: f64, seed: u64) -> Result<BuiltLfs, CliError> {
        let mut functions: Vec<Box<dyn LabelingFunction>> = Vec::new();
        let mut policy = ThresholdPolicy::new();
        for e in &self.lf {
            let threshold = if e.ungated {
                None
            } else {
                Some(e.threshold.unwrap_or(default_threshold))
            };
            policy = policy.with(e.id.clone(), threshold);
            functions.push(build_one(e, base, seed)?);
        }
        policy.validate().invalid("lf thresholds")?;
        Ok(BuiltLfs { functions, policy })
    }
}

fn require<'a, T>(value: &'a Option<T>, e: &LfEntry, field: &str) -> Result<&'a T, CliError> {
    value
        .as_ref()
        .ok_or_else(|| CliError::invalid(format!("lf `{}` ({:?}) needs `{field}`", e.id, e.kind)))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_owned()
    } else {
        base.join(p)
    }
}

fn examples(e: &LfEntry, base: &Path) -> Result<Vec<TrainingRow>, CliError> {
    let path = resolve(base, require(&e.examples, e, "examples")?);
    read_ndjson(&path)
}

fn build_one(e: &LfEntry, base: &Path, seed: u64) -> Result<Box<dyn LabelingFunction>, CliError> {
    let conf = e.confidence.unwrap_or(1.0);
    if !(0.0..=1.0).contains(&conf) {
        return Err(CliError::invalid(format!("lf `{}`: confidence must lie in [0, 1]", e.id)));
    }
    Ok(match e.kind {
        LfKind::Constant => {
            let vote = match require(&e.verdict, e, "verdict")? {
                ConstantVerdict::Abstain => Vote::abstain(),
                ConstantVerdict::Positive => Vote::label(1, conf),
                ConstantVerdict::Negative => Vote::label(0, conf),
            };
            Box::new(ConstantLf::new(e.id.clone(), vote))
        }
        LfKind::Keyword => {
            let library = match &e.library {
                Some(p) => {
                    let p = resolve(base, p);
                    PhraseLibrary::load(&p).invalid_at(&p)?
                }
                None => PhraseLibrary::bundled(),
            };
            Box::new(KeywordLf::new(e.id.clone(), library, conf))
        }
        LfKind::Fewshot => Box::new(
            FewShotLf::fit(e.id.clone(), &examples(e, base)?, e.scale.unwrap_or(FewShotLf::DEFAULT_SCALE))
                .invalid(&format!("lf `{}`", e.id))?,
        ),
        LfKind::Forest => {
            let rows: Vec<(SentenceRecord, u8)> = examples(e, base)?
                .into_iter()
                .enumerate()
                .map(|(i, r)| {
                    let span = Span::new(0, r.text.chars().count());
                    (SentenceRecord::new(format!("example-{i}"), "examples", &r.text, span), r.label)
                })
                .collect();
            let defaults = ForestConfig::default();
            let config = ForestConfig {
                trees: e.trees.unwrap_or(defaults.trees),
                max_depth: e.max_depth.unwrap_or(defaults.max_depth),
                seed,
                ..defaults
            };
            Box::new(
                ForestLf::train(e.id.clone(), &rows, Arc::new(RuleTagger), FeatureRegistry::bundled(), &config)
                    .invalid(&format!("lf `{}`", e.id))?,
            )
        }
        LfKind::Classifier => {
            let dir = resolve(base, require(&e.models, e, "models")?);
            let model = load_classifier(&dir).invalid_at(&dir)?;
            Box::new(ClassifierLf::new(e.id.clone(), Arc::from(model)))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<LfSpec, CliError> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lfs.toml");
        std::fs::write(&p, text).unwrap();
        LfSpec::load(&p)
    }

    #[test]
    fn thresholds_default_to_profile_and_can_be_disabled() {
        let spec = parse(
            "[[lf]]\nid = \"a\"\nkind = \"keyword\"\n\
             [[lf]]\nid = \"b\"\nkind = \"constant\"\nverdict = \"abstain\"\nthreshold = 0.9\n\
             [[lf]]\nid = \"c\"\nkind = \"constant\"\nverdict = \"negative\"\nungated = true\n",
        )
        .unwrap();
        let built = spec.build(Path::new("."), 0.7, 0).unwrap();
        assert_eq!(built.policy.threshold("a"), Some(0.7));
        assert_eq!(built.policy.threshold("b"), Some(0.9));
        assert_eq!(built.policy.threshold("c"), None);
        assert_eq!(built.functions.len(), 3);
    }

    #[test]
    fn malformed_specs_are_rejected() {
        assert!(parse("").is_err());
        assert!(parse("[[lf]]\nid = \"a\"\nkind = \"oracle\"\n").is_err());
        assert!(parse("[[lf]]\nid = \"a\"\nkind = \"keyword\"\n[[lf]]\nid = \"a\"\nkind = \"keyword\"\n").is_err());
        let spec = parse("[[lf]]\nid = \"a\"\nkind = \"constant\"\n").unwrap();
        assert!(spec.build(Path::new("."), 0.7, 0).is_err());
    }
}
