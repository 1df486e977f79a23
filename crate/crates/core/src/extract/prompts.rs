//! Versioned prompt templates, one TOML file per micro-label plus one for
//! summaries. Placeholders are written `{name}`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExtractError;
use crate::corpus::MicroLabel;

const BUNDLED: [(MicroLabel, &str); 3] = [
    (MicroLabel::Teamwork, include_str!("../../data/prompts/teamwork.toml")),
    (MicroLabel::Communication, include_str!("../../data/prompts/communication.toml")),
    (MicroLabel::Innovation, include_str!("../../data/prompts/innovation.toml")),
];
const BUNDLED_SUMMARY: &str = include_str!("../../data/prompts/summary.toml");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelPrompts {
    pub version: String,
    pub micro_label: MicroLabel,
    pub definition: String,
    pub thought: String,
    pub action: String,
    pub extract: String,
    pub verify: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryPrompts {
    pub version: String,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    pub labels: BTreeMap<MicroLabel, LabelPrompts>,
    pub summary: SummaryPrompts,
}

fn parse<T: serde::de::DeserializeOwned>(text: &str, name: &str) -> Result<T, ExtractError> {
    toml::from_str(text).map_err(|e| ExtractError::Prompt(format!("{name}: {e}")))
}

impl PromptSet {
    pub fn bundled() -> Self {
        Self::from_sources(BUNDLED.map(|(l, s)| (l, s.to_owned())), BUNDLED_SUMMARY).expect("bundled prompts are valid")
    }

    /// Reads `<label>.toml` for every micro-label and `summary.toml` from `dir`.
    pub fn load(dir: &Path) -> Result<Self, ExtractError> {
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name)).map_err(|e| ExtractError::Prompt(format!("{name}: {e}")))
        };
        let mut sources = Vec::new();
        for label in MicroLabel::ALL {
            sources.push((label, read(&format!("{label}.toml"))?));
        }
        Self::from_sources(sources, &read("summary.toml")?)
    }

    fn from_sources(
        sources: impl IntoIterator<Item = (MicroLabel, String)>,
        summary: &str,
    ) -> Result<Self, ExtractError> {
        let mut labels = BTreeMap::new();
        for (label, text) in sources {
            let p: LabelPrompts = parse(&text, label.as_str())?;
            if p.micro_label != label {
                return Err(ExtractError::Prompt(format!(
                    "{label}.toml declares micro_label {}",
                    p.micro_label
                )));
            }
            if !p.verify.contains("{phrases}") || p.verify.contains("{sentence}") || p.verify.contains("{trace}") {
                return Err(ExtractError::Prompt(format!(
                    "{label}: the verify template must use {{phrases}} and must not reference the sentence or trace"
                )));
            }
            labels.insert(label, p);
        }
        Ok(Self {
            labels,
            summary: parse(summary, "summary")?,
        })
    }

    pub fn label(&self, label: MicroLabel) -> &LabelPrompts {
        &self.labels[&label]
    }

    /// Combined identifier of every template version in the set.
    pub fn version(&self) -> String {
        let mut parts: Vec<String> = self.labels.values().map(|p| p.version.clone()).collect();
        parts.push(self.summary.version.clone());
        parts.dedup();
        parts.join("+")
    }
}

/// Replaces each `{key}` with its value in a single left-to-right pass, so
/// substituted text is never re-expanded.
pub fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    'outer: while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        for (key, value) in vars {
            if after.starts_with(key) && after[key.len()..].starts_with('}') {
                out.push_str(value);
                rest = &after[key.len() + 1..];
                continue 'outer;
            }
        }
        out.push('{');
        rest = after;
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_is_single_pass() {
        assert_eq!(fill("a {x} {y} {z}", &[("x", "{y}"), ("y", "2")]), "a {y} 2 {z}");
    }

    #[test]
    fn bundled_set_loads_and_round_trips_from_disk() {
        let set = PromptSet::bundled();
        assert_eq!(set.labels.len(), 3);
        let dir = tempfile::tempdir().unwrap();
        for (l, s) in BUNDLED {
            std::fs::write(dir.path().join(format!("{l}.toml")), s).unwrap();
        }
        std::fs::write(dir.path().join("summary.toml"), BUNDLED_SUMMARY).unwrap();
        assert_eq!(PromptSet::load(dir.path()).unwrap(), set);
    }
}
