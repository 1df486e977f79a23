//! Deterministic rule-based annotator used as the reference linguistic
//! provider. Tags come from closed-class lexicons and suffix rules, the
//! dependency labels from a single left-to-right pass, and entity types from
//! capitalization and lexicon cues. Coarse tags follow Universal POS, fine
//! tags the Penn Treebank set.

use serde::{Deserialize, Serialize};

use super::LingFeatError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenAnnotation {
    pub text: String,
    pub pos: String,
    pub tag: String,
    pub dep: String,
    pub ent_type: Option<String>,
    pub is_stop: bool,
    pub is_punct: bool,
}

/// Provider of token-level linguistic annotations.
pub trait Tagger: Send + Sync {
    fn version(&self) -> &str;
    fn annotate(&self, text: &str) -> Result<Vec<TokenAnnotation>, LingFeatError>;
}

pub const RULE_TAGGER_VERSION: &str = "rule-tagger/1";

#[derive(Debug, Clone, Copy, Default)]
pub struct RuleTagger;

const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are", "as", "at", "be",
    "because", "been", "before", "being", "below", "between", "both", "but", "by", "can", "could", "did", "do",
    "does", "doing", "down", "during", "each", "few", "for", "from", "further", "had", "has", "have", "having", "he",
    "her", "here", "hers", "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its",
    "itself", "just", "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once",
    "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "same", "she", "should", "so", "some",
    "such", "than", "that", "the", "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this",
    "those", "through", "to", "too", "under", "until", "up", "very", "was", "we", "were", "what", "when", "where",
    "which", "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself", "also",
    "may", "might", "must", "shall", "n't", "'s",
];

const DETERMINERS: &[&str] = &[
    "the", "a", "an", "this", "that", "these", "those", "each", "every", "some", "any", "no", "another", "either",
    "neither",
];
const PREDETERMINERS: &[&str] = &["all", "both", "half", "such"];
const PRONOUNS: &[&str] = &[
    "i", "you", "he", "she", "it", "we", "they", "me", "him", "us", "them", "myself", "yourself", "himself",
    "herself", "itself", "ourselves", "themselves", "one", "someone", "everyone", "anyone", "everybody", "nobody",
];
const POSSESSIVES: &[&str] = &["my", "your", "his", "its", "our", "their"];
const PREPOSITIONS: &[&str] = &[
    "of", "in", "on", "at", "by", "for", "with", "from", "about", "into", "through", "during", "over", "under",
    "between", "among", "without", "within", "throughout", "across", "toward", "towards", "upon", "against",
    "beyond", "despite", "per", "via", "like", "as", "after", "before", "since", "around", "behind", "beside",
    "besides", "onto", "off", "out", "up", "down", "near", "along",
];
const SUBORDINATORS: &[&str] = &["because", "although", "though", "while", "if", "whether", "unless", "whereas", "once", "until"];
const CONJUNCTIONS: &[&str] = &["and", "or", "but", "nor", "yet"];
const MODALS: &[&str] = &["can", "could", "will", "would", "shall", "should", "may", "might", "must"];
const WH_DET: &[&str] = &["which", "whatever", "whichever"];
const WH_PRON: &[&str] = &["who", "whom", "what", "whoever"];
const WH_ADV: &[&str] = &["when", "where", "why", "how", "whenever", "wherever"];
const INTERJECTIONS: &[&str] = &["oh", "yes", "hello", "wow", "please", "thanks", "hi", "dear"];
const ADVERBS: &[&str] = &[
    "very", "also", "always", "never", "often", "now", "then", "here", "there", "too", "quite", "well", "just",
    "still", "already", "soon", "again", "even", "ever", "rather", "truly", "highly", "so", "together", "instead",
    "perhaps", "almost", "consistently", "currently", "recently",
];
const ADJECTIVES: &[&str] = &[
    "good", "great", "excellent", "strong", "new", "skilled", "outstanding", "exceptional", "best", "better",
    "high", "low", "large", "small", "big", "long", "short", "young", "old", "clear", "able", "hard", "smart",
    "bright", "quick", "fast", "key", "many", "few", "much", "several", "other", "own", "same", "different",
    "difficult", "complex", "senior", "junior", "technical", "positive", "open", "true", "whole", "full", "top",
    "main", "major", "unique", "rare", "brilliant", "kind", "calm", "eager", "keen", "diverse", "proactive",
    "reliable", "dependable", "organized", "motivated", "talented", "dedicated", "committed", "curious",
    "thoughtful", "confident", "humble", "honest",
];
const VERBS_BASE: &[&str] = &[
    "lead", "manage", "inspire", "help", "work", "build", "create", "develop", "communicate", "collaborate",
    "solve", "drive", "make", "take", "give", "see", "know", "think", "recommend", "support", "encourage",
    "mentor", "guide", "organize", "coordinate", "listen", "learn", "teach", "present", "explain", "design",
    "deliver", "improve", "adapt", "ensure", "foster", "motivate", "bring", "keep", "find", "show", "get", "go",
    "come", "become", "believe", "feel", "seem", "use", "run", "write", "speak", "tell", "ask", "set", "meet",
    "hire", "join", "pursue", "excel", "thrive", "contribute", "demonstrate", "recognize", "identify",
];
const IRREGULAR_PAST: &[&str] = &[
    "led", "made", "took", "gave", "saw", "knew", "thought", "brought", "kept", "found", "showed", "got", "went",
    "came", "became", "felt", "ran", "wrote", "spoke", "told", "set", "met", "built", "taught", "began", "won",
    "held", "said", "did", "had",
];
const IRREGULAR_PARTICIPLE: &[&str] = &[
    "taken", "given", "seen", "known", "shown", "gotten", "gone", "become", "written", "spoken", "begun", "done",
    "been", "won", "held", "made", "led", "built", "taught", "brought", "kept", "found",
];
const MONTHS: &[&str] = &[
    "january", "february", "march", "april", "may", "june", "july", "august", "september", "october", "november",
    "december", "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday", "spring", "summer",
    "fall", "autumn", "winter",
];
const DATE_WORDS: &[&str] = &["year", "years", "month", "months", "week", "weeks", "semester", "semesters", "day", "days"];
const NUMBER_WORDS: &[&str] = &[
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    "twenty", "thirty", "forty", "fifty", "hundred", "thousand", "million", "dozen",
];
const ORDINALS: &[&str] = &["first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth", "last"];
const TITLES: &[&str] = &["dr", "mr", "mrs", "ms", "prof", "professor"];
const ORG_MARKERS: &[&str] = &[
    "university", "inc", "corp", "corporation", "company", "institute", "college", "lab", "laboratory",
    "laboratories", "department", "school", "group", "bank", "agency", "association", "foundation", "llc",
    "technologies", "systems", "google", "microsoft", "amazon", "ibm", "nasa",
];
const PLACES: &[&str] = &[
    "america", "usa", "us", "u.s", "atlanta", "georgia", "california", "texas", "new", "york", "london", "india",
    "china", "canada", "germany", "france", "japan", "korea", "brazil", "mexico", "boston", "chicago", "seattle",
];

fn is_in(list: &[&str], word: &str) -> bool {
    list.contains(&word)
}

fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_alphanumeric() {
            let start = i;
            while i < chars.len()
                && (chars[i].is_alphanumeric()
                    || (matches!(chars[i], '.' | ',' | '-' | '\'')
                        && i + 1 < chars.len()
                        && chars[i + 1].is_alphanumeric()
                        && !(chars[i] == '\'' && is_clitic_start(&chars, i))))
            {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            if let Some(stem) = word.strip_suffix("n't").filter(|s| !s.is_empty()) {
                tokens.push(stem.to_owned());
                tokens.push("n't".to_owned());
            } else {
                tokens.push(word);
            }
        } else if c == '\'' && is_clitic_start(&chars, i) {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i].is_alphabetic() {
                i += 1;
            }
            tokens.push(chars[start..i].iter().collect());
        } else {
            tokens.push(c.to_string());
            i += 1;
        }
    }
    tokens
}

fn is_clitic_start(chars: &[char], i: usize) -> bool {
    let rest: String = chars[i + 1..].iter().take(3).collect::<String>().to_lowercase();
    let clitic = ["s", "re", "ve", "ll", "d", "m"]
        .iter()
        .find(|c| rest.starts_with(*c))
        .map(|c| c.len());
    match clitic {
        Some(len) => chars.get(i + 1 + len).is_none_or(|c| !c.is_alphanumeric()),
        None => false,
    }
}

fn punct_tag(tok: &str) -> &'static str {
    match tok {
        "," => ",",
        "." | "!" | "?" => ".",
        ":" | ";" => ":",
        "(" | "[" | "{" => "-LRB-",
        ")" | "]" | "}" => "-RRB-",
        "\"" | "\u{201c}" => "``",
        "\u{201d}" => "''",
        "-" | "\u{2013}" | "\u{2014}" => "HYPH",
        "$" | "\u{20ac}" | "\u{a3}" => "$",
        "#" | "%" | "&" | "+" | "=" | "/" | "<" | ">" | "@" => "SYM",
        _ => "NFP",
    }
}

fn is_be(w: &str) -> bool {
    matches!(w, "is" | "are" | "was" | "were" | "be" | "been" | "being" | "am" | "'s" | "'re" | "'m")
}

fn is_have(w: &str) -> bool {
    matches!(w, "has" | "have" | "had" | "having" | "'ve" | "'d")
}

fn fine_tag(tokens: &[String], lower: &[String], i: usize, prev_tag: Option<&str>) -> &'static str {
    let tok = tokens[i].as_str();
    let w = lower[i].as_str();
    let first = tok.chars().next().unwrap_or(' ');
    if !first.is_alphanumeric() && tok != "n't" && !tok.starts_with('\'') {
        return punct_tag(tok);
    }
    if tok.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',') || is_in(NUMBER_WORDS, w) {
        return "CD";
    }
    let prev = i.checked_sub(1).map(|p| lower[p].as_str());
    let next = lower.get(i + 1).map(String::as_str);
    match w {
        "n't" | "not" | "never" => return "RB",
        "to" => return "TO",
        "'s" => {
            return if matches!(prev_tag, Some("NN" | "NNS" | "NNP" | "NNPS")) && !next.is_some_and(|n| n.ends_with("ing") || n.ends_with("ed")) {
                "POS"
            } else {
                "VBZ"
            }
        }
        "there" if next.is_some_and(is_be) => return "EX",
        "her" => {
            return if next.is_some_and(|n| !is_in(PREPOSITIONS, n) && !is_in(CONJUNCTIONS, n) && n.chars().all(char::is_alphabetic)) {
                "PRP$"
            } else {
                "PRP"
            }
        }
        "whose" => return "WP$",
        "that" if matches!(prev_tag, Some("NN" | "NNS" | "NNP")) => return "WDT",
        _ => {}
    }
    if is_be(w) || is_have(w) || matches!(w, "do" | "does" | "did") {
        return match w {
            "is" | "has" | "does" | "'s" => "VBZ",
            "are" | "am" | "have" | "do" | "'re" | "'m" | "'ve" => "VBP",
            "was" | "were" | "had" | "did" | "'d" => "VBD",
            "be" => "VB",
            "been" => "VBN",
            _ => "VBG",
        };
    }
    if is_in(MODALS, w) || w == "'ll" {
        return "MD";
    }
    if is_in(DETERMINERS, w) {
        return "DT";
    }
    if is_in(PREDETERMINERS, w) {
        return "PDT";
    }
    if is_in(PRONOUNS, w) {
        return "PRP";
    }
    if is_in(POSSESSIVES, w) {
        return "PRP$";
    }
    if is_in(WH_DET, w) {
        return "WDT";
    }
    if is_in(WH_PRON, w) {
        return "WP";
    }
    if is_in(WH_ADV, w) {
        return "WRB";
    }
    if is_in(CONJUNCTIONS, w) {
        return "CC";
    }
    if is_in(PREPOSITIONS, w) || is_in(SUBORDINATORS, w) || w == "than" {
        return "IN";
    }
    if is_in(INTERJECTIONS, w) {
        return "UH";
    }
    if is_in(ORDINALS, w) || is_in(ADJECTIVES, w) {
        return match w {
            "best" => "JJS",
            "better" => "JJR",
            _ => "JJ",
        };
    }
    if is_in(ADVERBS, w) {
        return "RB";
    }
    let after_aux = matches!(prev_tag, Some("MD" | "TO")) || prev.is_some_and(|p| matches!(p, "do" | "does" | "did" | "n't" | "not") && i >= 2);
    if is_in(VERBS_BASE, w) {
        return if after_aux {
            "VB"
        } else if matches!(prev_tag, Some("PRP" | "NNS")) {
            "VBP"
        } else if matches!(prev_tag, Some("DT" | "JJ" | "PRP$" | "POS")) {
            "NN"
        } else {
            "VBP"
        };
    }
    if is_in(IRREGULAR_PARTICIPLE, w) && prev.is_some_and(|p| is_be(p) || is_have(p)) {
        return "VBN";
    }
    if is_in(IRREGULAR_PAST, w) {
        return "VBD";
    }
    if i > 0 && first.is_uppercase() && !matches!(prev_tag, Some(".") | None) {
        return if w.ends_with('s') && w.len() > 3 && !w.ends_with("ss") { "NNPS" } else { "NNP" };
    }
    if i > 0 && first.is_uppercase() && prev_tag == Some(".") {
        return "NNP";
    }
    if w.len() > 4 && w.ends_with("ly") {
        return "RB";
    }
    if w.len() > 4 && w.ends_with("ing") {
        return if matches!(prev_tag, Some("DT" | "JJ" | "PRP$")) { "NN" } else { "VBG" };
    }
    if w.len() > 3 && w.ends_with("ed") {
        let passive = prev.is_some_and(|p| is_be(p) || is_have(p)) || matches!(prev_tag, Some("RB")) && i >= 2 && is_be(&lower[i - 2]);
        return if passive { "VBN" } else { "VBD" };
    }
    if w.len() > 4 && w.ends_with("est") {
        return "JJS";
    }
    let adjective_suffix = ["ous", "ful", "ive", "able", "ible", "ical", "less", "ish", "ary", "ic", "al"];
    if w.len() > 4 && adjective_suffix.iter().any(|s| w.ends_with(s)) {
        return "JJ";
    }
    if after_aux {
        return "VB";
    }
    if w.len() > 3 && w.ends_with('s') && !w.ends_with("ss") && !w.ends_with("us") && !w.ends_with("is") {
        return if matches!(prev_tag, Some("PRP")) { "VBZ" } else { "NNS" };
    }
    if tok.chars().any(|c| c.is_ascii_digit()) {
        return "XX";
    }
    "NN"
}

fn coarse(tag: &str, lower: &str) -> &'static str {
    match tag {
        "JJ" | "JJR" | "JJS" | "AFX" => "ADJ",
        "IN" if is_in(SUBORDINATORS, lower) => "SCONJ",
        "IN" | "RP" => "ADP",
        "RB" | "RBR" | "RBS" | "WRB" if lower == "not" || lower == "n't" => "PART",
        "RB" | "RBR" | "RBS" | "WRB" => "ADV",
        "MD" => "AUX",
        "VB" | "VBD" | "VBG" | "VBN" | "VBP" | "VBZ"
            if is_be(lower) || is_have(lower) || matches!(lower, "do" | "does" | "did") =>
        {
            "AUX"
        }
        "VB" | "VBD" | "VBG" | "VBN" | "VBP" | "VBZ" => "VERB",
        "CC" => "CCONJ",
        "DT" | "PDT" | "WDT" | "PRP$" | "WP$" => "DET",
        "UH" => "INTJ",
        "NN" | "NNS" => "NOUN",
        "NNP" | "NNPS" => "PROPN",
        "CD" => "NUM",
        "TO" | "POS" => "PART",
        "PRP" | "WP" | "EX" => "PRON",
        "$" | "SYM" => "SYM",
        "FW" | "XX" | "LS" | "ADD" => "X",
        _ => "PUNCT",
    }
}

fn is_nominal(pos: &str) -> bool {
    matches!(pos, "NOUN" | "PROPN" | "PRON" | "NUM")
}

fn assign_deps(pos: &[&str], tags: &[&str], lower: &[String]) -> Vec<&'static str> {
    let n = pos.len();
    let mut deps = vec!["dep"; n];
    let root = pos
        .iter()
        .position(|&p| p == "VERB")
        .or_else(|| pos.iter().position(|&p| p == "AUX"))
        .or_else(|| pos.iter().position(|&p| p != "PUNCT"));
    let mut seen_verb = false;
    let mut after_prep = false;
    let mut after_copula = false;
    for i in 0..n {
        let next_pos = pos.get(i + 1).copied();
        let later_noun = pos[i + 1..].iter().take_while(|p| matches!(**p, "ADJ" | "ADV" | "NOUN" | "PROPN" | "NUM")).any(|p| matches!(*p, "NOUN" | "PROPN"));
        let d = if Some(i) == root {
            "ROOT"
        } else {
            match pos[i] {
                "PUNCT" => "punct",
                "DET" if tags[i] == "PRP$" || tags[i] == "WP$" => "poss",
                "DET" if tags[i] == "PDT" => "predet",
                "DET" => "det",
                "ADJ" if later_noun => "amod",
                "ADJ" if after_copula => "acomp",
                "ADJ" => "amod",
                "ADV" if lower[i] == "not" => "neg",
                "ADV" => "advmod",
                "PART" if lower[i] == "not" || lower[i] == "n't" => "neg",
                "PART" if tags[i] == "POS" => "case",
                "PART" => "aux",
                "AUX" if matches!(next_pos, Some("VERB" | "AUX" | "ADV" | "PART")) => {
                    if lower[i + 1..].iter().zip(&tags[i + 1..]).find(|(_, t)| t.starts_with("VB")).is_some_and(|(_, t)| *t == "VBN") && is_be(&lower[i]) {
                        "auxpass"
                    } else {
                        "aux"
                    }
                }
                "AUX" => "ROOT",
                "ADP" if tags[i] == "RP" => "prt",
                "ADP" => "prep",
                "SCONJ" => "mark",
                "CCONJ" => "cc",
                "INTJ" => "intj",
                "NUM" if matches!(next_pos, Some("NOUN" | "PROPN")) => "nummod",
                "NOUN" | "PROPN" if matches!(next_pos, Some("NOUN" | "PROPN")) => "compound",
                "NOUN" | "PROPN" if tags.get(i + 1) == Some(&"POS") => "poss",
                "PRON" if tags[i] == "EX" => "expl",
                _ if is_nominal(pos[i]) && i > 0 && tags[i - 1] == "CC" => "conj",
                _ if is_nominal(pos[i]) && after_prep => "pobj",
                _ if is_nominal(pos[i]) && after_copula => "attr",
                _ if is_nominal(pos[i]) && !seen_verb => "nsubj",
                _ if is_nominal(pos[i]) => "dobj",
                "VERB" if i > 0 && tags[i - 1] == "TO" => "xcomp",
                "VERB" if i > 0 && tags[i - 1] == "CC" => "conj",
                "VERB" if i > 0 && pos[i - 1] == "SCONJ" => "advcl",
                "VERB" if i > 0 && tags[i - 1] == "WDT" => "relcl",
                "VERB" if tags[i] == "VBG" && matches!(next_pos, Some("NOUN" | "DET")) && seen_verb => "pcomp",
                "VERB" => "ccomp",
                "SYM" | "X" => "dep",
                _ => "dep",
            }
        };
        deps[i] = d;
        match pos[i] {
            "VERB" => {
                seen_verb = true;
                after_prep = false;
                after_copula = false;
            }
            "AUX" => {
                seen_verb = true;
                after_prep = false;
                after_copula = is_be(&lower[i]);
            }
            "ADP" => after_prep = true,
            "NOUN" | "PROPN" | "PRON" if !matches!(next_pos, Some("NOUN" | "PROPN")) => after_prep = false,
            "PUNCT" | "CCONJ" | "SCONJ" => {
                after_prep = false;
                after_copula = false;
            }
            _ => {}
        }
    }
    deps
}

fn assign_entities(tokens: &[String], lower: &[String], pos: &[&str]) -> Vec<Option<&'static str>> {
    let n = tokens.len();
    let mut ents = vec![None; n];
    let mut i = 0;
    while i < n {
        let w = lower[i].as_str();
        if tokens[i] == "$" && pos.get(i + 1) == Some(&"NUM") {
            ents[i] = Some("MONEY");
            let mut j = i + 1;
            while j < n && pos[j] == "NUM" {
                ents[j] = Some("MONEY");
                j += 1;
            }
            i = j;
            continue;
        }
        if pos[i] == "NUM" {
            let mut j = i;
            while j < n && pos[j] == "NUM" {
                j += 1;
            }
            let label = match lower.get(j).map(String::as_str) {
                Some("%" | "percent") => {
                    ents[j] = Some("PERCENT");
                    "PERCENT"
                }
                Some(unit) if is_in(DATE_WORDS, unit) => {
                    ents[j] = Some("DATE");
                    "DATE"
                }
                _ if tokens[i].len() == 4 && tokens[i].starts_with(['1', '2']) && tokens[i].chars().all(|c| c.is_ascii_digit()) => "DATE",
                _ => "CARDINAL",
            };
            for e in ents.iter_mut().take(j).skip(i) {
                *e = Some(label);
            }
            i = j + 1;
            continue;
        }
        if is_in(ORDINALS, w) || (w.len() > 2 && w.chars().next().is_some_and(|c| c.is_ascii_digit()) && ["st", "nd", "rd", "th"].iter().any(|s| w.ends_with(s))) {
            ents[i] = Some("ORDINAL");
            i += 1;
            continue;
        }
        if is_in(MONTHS, w) && (tokens[i].chars().next().is_some_and(char::is_uppercase) || matches!(w, "spring" | "summer" | "fall" | "autumn" | "winter")) {
            ents[i] = Some("DATE");
            i += 1;
            continue;
        }
        if pos[i] == "PROPN" {
            let mut j = i;
            while j < n && pos[j] == "PROPN" {
                j += 1;
            }
            let span = &lower[i..j];
            let label = if span.iter().any(|t| is_in(ORG_MARKERS, t)) {
                "ORG"
            } else if span.iter().all(|t| is_in(PLACES, t)) {
                "GPE"
            } else {
                "PERSON"
            };
            for e in ents.iter_mut().take(j).skip(i) {
                *e = Some(label);
            }
            i = j;
            continue;
        }
        if is_in(TITLES, w) {
            // titles attach to the following name
            let mut j = i + 1;
            if tokens.get(j).map(String::as_str) == Some(".") {
                j += 1;
            }
            let start = j;
            while j < n && tokens[j].chars().next().is_some_and(char::is_uppercase) && tokens[j].chars().all(char::is_alphabetic) {
                j += 1;
            }
            if j > start {
                for e in ents.iter_mut().take(j).skip(start) {
                    *e = Some("PERSON");
                }
                i = j;
                continue;
            }
        }
        i += 1;
    }
    ents
}

impl Tagger for RuleTagger {
    fn version(&self) -> &str {
        RULE_TAGGER_VERSION
    }

    fn annotate(&self, text: &str) -> Result<Vec<TokenAnnotation>, LingFeatError> {
        let tokens = tokenize(text);
        let lower: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
        let mut tags: Vec<&'static str> = Vec::with_capacity(tokens.len());
        for i in 0..tokens.len() {
            let prev = tags.last().copied();
            tags.push(fine_tag(&tokens, &lower, i, prev));
        }
        let pos: Vec<&'static str> = tags.iter().zip(&lower).map(|(t, w)| coarse(t, w)).collect();
        let deps = assign_deps(&pos, &tags, &lower);
        let ents = assign_entities(&tokens, &lower, &pos);
        Ok(tokens
            .into_iter()
            .enumerate()
            .map(|(i, text)| TokenAnnotation {
                is_stop: is_in(STOPWORDS, &lower[i]),
                is_punct: pos[i] == "PUNCT",
                pos: pos[i].to_owned(),
                tag: tags[i].to_owned(),
                dep: deps[i].to_owned(),
                ent_type: ents[i].map(str::to_owned),
                text,
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(text: &str) -> Vec<(String, String)> {
        RuleTagger
            .annotate(text)
            .unwrap()
            .into_iter()
            .map(|t| (t.text, t.tag))
            .collect()
    }

    #[test]
    fn tokenizes_clitics_and_punctuation() {
        let toks: Vec<String> = tokenize("She didn't stop; Anna's team won 3.5 awards.").into_iter().collect();
        assert_eq!(toks, vec!["She", "did", "n't", "stop", ";", "Anna", "'s", "team", "won", "3.5", "awards", "."]);
    }

    #[test]
    fn tags_a_simple_sentence() {
        let t = tags("He is an excellent communicator.");
        let only: Vec<&str> = t.iter().map(|(_, tag)| tag.as_str()).collect();
        assert_eq!(only, vec!["PRP", "VBZ", "DT", "JJ", "NN", "."]);
    }

    #[test]
    fn finds_entities() {
        let anns = RuleTagger.annotate("Dr. Smith joined Georgia Institute in 2019 with 3 interns.").unwrap();
        let ents: Vec<(&str, Option<&str>)> = anns.iter().map(|a| (a.text.as_str(), a.ent_type.as_deref())).collect();
        assert!(ents.contains(&("Smith", Some("PERSON"))));
        assert!(ents.contains(&("Institute", Some("ORG"))));
        assert!(ents.contains(&("2019", Some("DATE"))));
        assert!(ents.contains(&("3", Some("CARDINAL"))));
    }

    #[test]
    fn annotation_is_deterministic() {
        let s = "They consistently led cross-functional teams and mentored junior engineers.";
        assert_eq!(RuleTagger.annotate(s).unwrap(), RuleTagger.annotate(s).unwrap());
    }
}
