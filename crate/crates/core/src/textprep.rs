//! Sentence segmentation, character cleaning, conjoined-word repair and
//! sentence-length outlier filtering.

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

use crate::corpus::{SentenceRecord, Span};

#[derive(Debug, Error)]
pub enum TextPrepError {
    #[error("cannot filter an empty sentence list")]
    EmptyInput,
    #[error("invalid splitter configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Abbreviations whose trailing period never ends a sentence (compared
/// lowercase, without the final period).
const ABBREVIATIONS: &[&str] = &[
    "dr", "mr", "mrs", "ms", "prof", "e.g", "i.e", "jr", "sr", "st", "vs", "mt", "no", "fig", "dept", "approx",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '}', '\u{201d}', '\u{2019}'];

/// A segmented sentence: character span and the exact text at that span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub span: Span,
    pub text: String,
}

fn is_abbreviation(chars: &[char], period: usize) -> bool {
    let mut start = period;
    while start > 0 && !chars[start - 1].is_whitespace() && !matches!(chars[start - 1], '(' | '"' | '\u{201c}') {
        start -= 1;
    }
    let word: String = chars[start..period].iter().collect::<String>().to_lowercase();
    if word.is_empty() {
        return false;
    }
    if ABBREVIATIONS.contains(&word.as_str()) {
        return true;
    }
    // single-letter initials such as "J. Smith"
    let mut letters = word.chars();
    matches!((letters.next(), letters.next()), (Some(c), None) if c.is_alphabetic() && chars[start].is_uppercase())
}

/// Splits `raw_text` into sentences at terminal punctuation followed by
/// whitespace (or end of text) and at blank lines. Spans exclude surrounding
/// whitespace, so `raw_text[span] == text` for every segment.
pub fn segment(raw_text: &str) -> Vec<Segment> {
    let chars: Vec<char> = raw_text.chars().collect();
    let n = chars.len();
    let mut boundaries = Vec::new();
    let mut i = 0;
    while i < n {
        let c = chars[i];
        if matches!(c, '.' | '!' | '?') {
            let mut end = i + 1;
            while end < n && matches!(chars[end], '.' | '!' | '?') {
                end += 1;
            }
            while end < n && CLOSERS.contains(&chars[end]) {
                end += 1;
            }
            let at_break = end == n || chars[end].is_whitespace();
            let single_period = c == '.' && end == i + 1;
            if at_break && !(single_period && is_abbreviation(&chars, i)) {
                boundaries.push(end);
            }
            i = end;
        } else if c == '\n' {
            let mut j = i + 1;
            while j < n && chars[j].is_whitespace() && chars[j] != '\n' {
                j += 1;
            }
            if j < n && chars[j] == '\n' {
                boundaries.push(i);
            }
            i += 1;
        } else {
            i += 1;
        }
    }
    boundaries.push(n);

    let mut segments = Vec::new();
    let mut start = 0;
    for end in boundaries {
        if end <= start {
            continue;
        }
        let mut s = start;
        let mut e = end;
        while s < e && chars[s].is_whitespace() {
            s += 1;
        }
        while e > s && chars[e - 1].is_whitespace() {
            e -= 1;
        }
        if s < e {
            segments.push(Segment {
                span: Span::new(s, e),
                text: chars[s..e].iter().collect(),
            });
        }
        start = end;
    }
    segments
}

/// Segments a letter into [`SentenceRecord`]s with ids `<letter_id>-s<index>`.
pub fn segment_sentences(letter_id: &str, raw_text: &str) -> Vec<SentenceRecord> {
    segment(raw_text)
        .into_iter()
        .enumerate()
        .map(|(i, seg)| SentenceRecord::new(format!("{letter_id}-s{i:03}"), letter_id, &seg.text, seg.span))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CleaningConfig {
    pub keep_whitespace: bool,
    pub collapse_whitespace_runs: bool,
    pub preserve_case: bool,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        Self {
            keep_whitespace: true,
            collapse_whitespace_runs: true,
            preserve_case: true,
        }
    }
}

/// Keeps alphanumeric characters. With the default configuration every run
/// of other characters becomes a single space and the ends are trimmed.
pub fn clean_text(text: &str, config: &CleaningConfig) -> String {
    let cased;
    let source = if config.preserve_case {
        text
    } else {
        cased = text.to_lowercase();
        &cased
    };
    let mut out = String::with_capacity(source.len());
    let mut pending_space = false;
    for c in source.chars() {
        if c.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        } else if config.keep_whitespace {
            if config.collapse_whitespace_runs {
                pending_space = true;
            } else if c.is_whitespace() {
                out.push(' ');
            }
        }
    }
    out
}

/// Word list plus frequency-rank cost model for conjoined-word repair.
#[derive(Debug, Clone)]
pub struct SplitterConfig {
    costs: HashMap<String, f64>,
    max_word_chars: usize,
    pub min_token_length: usize,
}

pub const DEFAULT_MIN_TOKEN_LENGTH: usize = 6;
const BUNDLED_WORDS: &str = include_str!("../data/words.txt");

impl SplitterConfig {
    /// Builds a config from words in frequency order (most frequent first).
    /// A word's cost is `ln((rank + 1) · ln N)` for a list of `N` words, so
    /// frequent words are cheaper.
    pub fn from_ranked_words<I, S>(words: I, min_token_length: usize) -> Result<Self, TextPrepError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if min_token_length == 0 {
            return Err(TextPrepError::BadConfig("min_token_length must be at least 1".into()));
        }
        let ranked: Vec<String> = words
            .into_iter()
            .map(|w| w.as_ref().trim().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        if ranked.is_empty() {
            return Err(TextPrepError::BadConfig("dictionary is empty".into()));
        }
        let log_n = (ranked.len() as f64).ln().max(1.0);
        let mut costs = HashMap::with_capacity(ranked.len());
        let mut max_word_chars = 0;
        for (rank, word) in ranked.into_iter().enumerate() {
            max_word_chars = max_word_chars.max(word.chars().count());
            costs.entry(word).or_insert(((rank + 1) as f64 * log_n).ln());
        }
        Ok(Self {
            costs,
            max_word_chars,
            min_token_length,
        })
    }

    /// Dictionary file: one lowercase word per line, rank = line number.
    pub fn from_file(path: &Path, min_token_length: usize) -> Result<Self, TextPrepError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_ranked_words(text.lines(), min_token_length)
    }

    /// The bundled English frequency list.
    pub fn bundled() -> Self {
        Self::from_ranked_words(BUNDLED_WORDS.lines(), DEFAULT_MIN_TOKEN_LENGTH).expect("bundled word list is valid")
    }

    pub fn contains(&self, word: &str) -> bool {
        self.costs.contains_key(&word.to_lowercase())
    }

    pub fn word_cost(&self, word: &str) -> Option<f64> {
        self.costs.get(&word.to_lowercase()).copied()
    }

    pub fn max_word_chars(&self) -> usize {
        self.max_word_chars
    }
}

/// Splits a conjoined token like `excellentcommunicator` into dictionary words.
///
/// Tokens no longer than `min_token_length` characters, tokens already in the
/// dictionary, and tokens with no full segmentation are returned unchanged.
/// Pieces are slices of the input, so case is preserved.
pub fn split_conjoined(token: &str, config: &SplitterConfig) -> Vec<String> {
    let chars: Vec<char> = token.chars().collect();
    if chars.len() <= config.min_token_length || config.contains(token) {
        return vec![token.to_owned()];
    }
    let lower: Vec<char> = chars
        .iter()
        .map(|&c| {
            let mut l = c.to_lowercase();
            match (l.next(), l.next()) {
                (Some(single), None) => single,
                _ => c,
            }
        })
        .collect();
    let n = chars.len();
    // best[i]: minimum cost of segmenting the first i chars, with the start of the last word
    let mut best: Vec<Option<(f64, usize)>> = vec![None; n + 1];
    best[0] = Some((0.0, 0));
    for end in 1..=n {
        let lo = end.saturating_sub(config.max_word_chars);
        for start in lo..end {
            let Some((prefix_cost, _)) = best[start] else { continue };
            let word: String = lower[start..end].iter().collect();
            if let Some(cost) = config.costs.get(&word) {
                let total = prefix_cost + cost;
                if best[end].is_none_or(|(c, _)| total < c) {
                    best[end] = Some((total, start));
                }
            }
        }
    }
    if best[n].is_none() {
        return vec![token.to_owned()];
    }
    let mut pieces = Vec::new();
    let mut end = n;
    while end > 0 {
        let (_, start) = best[end].expect("reachable position");
        pieces.push(chars[start..end].iter().collect());
        end = start;
    }
    pieces.reverse();
    pieces
}

/// Runs [`split_conjoined`] over every whitespace token of `text`.
pub fn repair_conjoined(text: &str, config: &SplitterConfig) -> String {
    text.split_whitespace()
        .flat_map(|t| split_conjoined(t, config))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IqrBounds {
    pub q1: f64,
    pub q3: f64,
}

/// Linear-interpolation quantile of an ascending sample (position `(n−1)·p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Keeps sentences whose `char_length` lies within `[Q1, Q3]`, in input order.
pub fn iqr_filter(sentences: &[SentenceRecord]) -> Result<(Vec<SentenceRecord>, IqrBounds), TextPrepError> {
    if sentences.is_empty() {
        return Err(TextPrepError::EmptyInput);
    }
    let mut lengths: Vec<f64> = sentences.iter().map(|s| s.char_length as f64).collect();
    lengths.sort_by(f64::total_cmp);
    let bounds = IqrBounds {
        q1: quantile_sorted(&lengths, 0.25),
        q3: quantile_sorted(&lengths, 0.75),
    };
    let kept = sentences
        .iter()
        .filter(|s| {
            let len = s.char_length as f64;
            bounds.q1 <= len && len <= bounds.q3
        })
        .cloned()
        .collect();
    Ok((kept, bounds))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spans(text: &str) -> Vec<(usize, usize)> {
        segment(text).iter().map(|s| (s.span.start, s.span.end)).collect()
    }

    #[test]
    fn segments_two_sentences() {
        assert_eq!(spans("She leads. He follows."), vec![(0, 10), (11, 22)]);
        assert!(segment("").is_empty());
        assert!(segment("   \n ").is_empty());
    }

    #[test]
    fn abbreviations_do_not_split() {
        assert_eq!(segment("Dr. Smith led the team.").len(), 1);
        assert_eq!(segment("Prof. Jones, e.g. and i.e. cases. Next one.").len(), 2);
        assert_eq!(segment("Ms. J. Doe arrived. She stayed.").len(), 2);
    }

    #[test]
    fn decimals_quotes_and_blank_lines() {
        assert_eq!(segment("GPA was 3.9 overall. Good.").len(), 2);
        let quoted = segment("He said \"go.\" Then left.");
        assert_eq!(quoted[0].text, "He said \"go.\"");
        let lines = segment("Dear Committee,\n\nShe is great.\nSincerely,\n\nJane");
        let texts: Vec<&str> = lines.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, vec!["Dear Committee,", "She is great.", "Sincerely,", "Jane"]);
    }

    #[test]
    fn segment_sentence_records() {
        let records = segment_sentences("L7", "She leads. He follows.");
        assert_eq!(records[1].sentence_id, "L7-s001");
        assert_eq!(records[1].char_length, 11);
        assert_eq!(records[1].token_count, 2);
    }

    #[test]
    fn clean_text_examples() {
        let cfg = CleaningConfig::default();
        assert_eq!(clean_text("He led 3 teams!!", &cfg), "He led 3 teams");
        assert_eq!(clean_text("", &cfg), "");
        assert_eq!(clean_text("a---b", &cfg), "a b");
        assert_eq!(clean_text("  --Hi  there-- ", &cfg), "Hi there");
    }

    #[test]
    fn clean_text_variants() {
        let no_space = CleaningConfig {
            keep_whitespace: false,
            ..Default::default()
        };
        assert_eq!(clean_text("a b-c", &no_space), "abc");
        let raw_spaces = CleaningConfig {
            collapse_whitespace_runs: false,
            ..Default::default()
        };
        assert_eq!(clean_text("a  b-c", &raw_spaces), "a  bc");
        let lower = CleaningConfig {
            preserve_case: false,
            ..Default::default()
        };
        assert_eq!(clean_text("Led TEAMS", &lower), "led teams");
    }

    #[test]
    fn splits_conjoined_words() {
        let cfg = SplitterConfig::bundled();
        assert_eq!(split_conjoined("excellentcommunicator", &cfg), vec!["excellent", "communicator"]);
        assert_eq!(split_conjoined("teams", &cfg), vec!["teams"]);
        assert_eq!(split_conjoined("zqxjvk", &cfg), vec!["zqxjvk"]);
        assert_eq!(split_conjoined("leadership", &cfg), vec!["leadership"]);
        assert_eq!(split_conjoined("SkilledCollaborator", &cfg), vec!["Skilled", "Collaborator"]);
    }

    #[test]
    fn six_character_tokens_are_left_alone() {
        let cfg = SplitterConfig::from_ranked_words(["a", "ab", "cd", "ef"], 6).unwrap();
        assert_eq!(split_conjoined("abcdef", &cfg), vec!["abcdef"]);
        assert_eq!(split_conjoined("abcdefa", &cfg), vec!["ab", "cd", "ef", "a"]);
    }

    #[test]
    fn splitter_rejects_bad_config() {
        assert!(SplitterConfig::from_ranked_words(Vec::<String>::new(), 6).is_err());
        assert!(SplitterConfig::from_ranked_words(["a"], 0).is_err());
    }

    fn records(lengths: &[usize]) -> Vec<SentenceRecord> {
        let mut offset = 0;
        lengths
            .iter()
            .enumerate()
            .map(|(i, &len)| {
                let text = "x".repeat(len);
                let r = SentenceRecord::new(format!("s{i}"), "L", &text, Span::new(offset, offset + len));
                offset += len + 1;
                r
            })
            .collect()
    }

    #[test]
    fn iqr_hand_example() {
        let input = records(&[10, 20, 30, 40, 50, 60, 70, 80, 90, 100]);
        let (kept, bounds) = iqr_filter(&input).unwrap();
        assert_eq!(bounds, IqrBounds { q1: 32.5, q3: 77.5 });
        let lens: Vec<usize> = kept.iter().map(|s| s.char_length).collect();
        assert_eq!(lens, vec![40, 50, 60, 70]);
    }

    #[test]
    fn iqr_degenerate_inputs() {
        let (kept, bounds) = iqr_filter(&records(&[12, 12, 12])).unwrap();
        assert_eq!((bounds.q1, bounds.q3), (12.0, 12.0));
        assert_eq!(kept.len(), 3);
        let (kept, bounds) = iqr_filter(&records(&[7])).unwrap();
        assert_eq!((bounds.q1, bounds.q3, kept.len()), (7.0, 7.0, 1));
        assert!(matches!(iqr_filter(&[]), Err(TextPrepError::EmptyInput)));
    }
}
