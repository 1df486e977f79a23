//! Output constraints for generative calls, checked locally and rendered as
//! GBNF for servers that support grammar-constrained sampling.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutputGrammar {
    /// Items separated by `;`, no newlines, at most `max_items` non-empty items.
    SemicolonPhraseList { max_items: usize },
    /// Non-empty prose of at most `max_words` whitespace-separated words.
    BoundedProse { max_words: usize },
    /// Exactly one of the listed options.
    Choice { options: Vec<String> },
}

impl OutputGrammar {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::SemicolonPhraseList { .. } => "semicolon_phrase_list",
            Self::BoundedProse { .. } => "bounded_prose",
            Self::Choice { .. } => "choice",
        }
    }

    /// Ok when `text` (ignoring surrounding whitespace) satisfies the grammar.
    pub fn check(&self, text: &str) -> Result<(), String> {
        let text = text.trim();
        match self {
            Self::SemicolonPhraseList { max_items } => {
                if text.contains(['\n', '\r']) {
                    return Err("phrase list contains a newline".into());
                }
                let items = text.split(';').filter(|s| !s.trim().is_empty()).count();
                if items > *max_items {
                    return Err(format!("{items} items exceed the limit of {max_items}"));
                }
                Ok(())
            }
            Self::BoundedProse { max_words } => {
                let words = text.split_whitespace().count();
                if words == 0 {
                    Err("prose is empty".into())
                } else if words > *max_words {
                    Err(format!("{words} words exceed the limit of {max_words}"))
                } else {
                    Ok(())
                }
            }
            Self::Choice { options } => {
                if options.iter().any(|o| o == text) {
                    Ok(())
                } else {
                    Err(format!("`{text}` is not one of {options:?}"))
                }
            }
        }
    }

    pub fn to_gbnf(&self) -> String {
        match self {
            Self::SemicolonPhraseList { max_items } => format!(
                "root ::= (item (\";\" \" \"? item){{0,{}}})?\nitem ::= [^;\\n\\r]+\n",
                max_items.saturating_sub(1)
            ),
            Self::BoundedProse { max_words } => format!(
                "root ::= word (ws word){{0,{}}}\nword ::= [^ \\t\\n\\r]+\nws ::= [ \\n]\n",
                max_words.saturating_sub(1)
            ),
            Self::Choice { options } => {
                let alts: Vec<String> = options
                    .iter()
                    .map(|o| format!("\"{}\"", o.replace('\\', "\\\\").replace('"', "\\\"")))
                    .collect();
                format!("root ::= {}\n", alts.join(" | "))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phrase_list_rules() {
        let g = OutputGrammar::SemicolonPhraseList { max_items: 2 };
        assert!(g.check("a; b").is_ok());
        assert!(g.check("").is_ok());
        assert!(g.check("a\nb").is_err());
        assert!(g.check("a; b; c").is_err());
    }

    #[test]
    fn prose_and_choice_rules() {
        let p = OutputGrammar::BoundedProse { max_words: 3 };
        assert!(p.check("one two three").is_ok());
        assert!(p.check("one two three four").is_err());
        assert!(p.check("  ").is_err());
        let c = OutputGrammar::Choice {
            options: vec!["extract".into(), "finish".into()],
        };
        assert!(c.check(" finish\n").is_ok());
        assert!(c.check("verify").is_err());
        assert_eq!(c.to_gbnf(), "root ::= \"extract\" | \"finish\"\n");
    }
}
