//! Rule-based sentence segmentation that treats Bengali and English text
//! the same way.
//!
//! A terminal character (`.`, `!`, `?`, `।`, `…` by default) is a boundary
//! candidate when the run of terminals, plus any closing quotes or
//! brackets after it, is followed by whitespace. A candidate is rejected
//! when:
//!
//! 1. the token it ends is in the abbreviation set (`Dr.`, `এ.`),
//! 2. a quote or bracket opened earlier is still open (the boundary moves
//!    to just after the closing character instead),
//! 3. the token is a bullet marker (`1.`, `(ক)`, `a)`) at the start of a
//!    line,
//! 4. the next word does not open a sentence: for plain terminals that
//!    means a lowercase letter, for an ellipsis anything except an
//!    uppercase or caseless letter or an opening quote.
//!
//! Since candidates need whitespace after them, decimal points (`3.14`) and
//! dots inside URLs or e-mail addresses never produce a boundary. Blank
//! lines always separate sentences and close any open quote.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::io::read_list;

const DEFAULT_ABBREVIATIONS: &str = include_str!("../data/abbreviations.txt");

pub const DEFAULT_TERMINALS: [char; 5] = ['.', '!', '?', '\u{0964}', '\u{2026}'];

pub const DEFAULT_QUOTE_PAIRS: [(char, char); 8] = [
    ('(', ')'),
    ('[', ']'),
    ('{', '}'),
    ('"', '"'),
    ('\u{201C}', '\u{201D}'),
    ('\u{2018}', '\u{2019}'),
    ('\u{00AB}', '\u{00BB}'),
    ('\u{2039}', '\u{203A}'),
];

/// Numbered, lettered or symbol list markers.
pub const DEFAULT_BULLET_PATTERN: &str = concat!(
    r"^(?:",
    r"\(?(?:[0-9]+|[০-৯]+|[A-Za-z]|[ivxlc]+|[\x{0985}-\x{09B9}])[.)]",
    r"|\((?:[0-9]+|[০-৯]+|[A-Za-z]|[ivxlc]+|[\x{0985}-\x{09B9}])\)",
    r"|[•●▪‣◦*\-–]",
    r")$"
);

static DEFAULT_BULLETS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(DEFAULT_BULLET_PATTERN).unwrap());

/// True when `token` is a list marker under the default pattern.
pub fn is_bullet_marker(token: &str) -> bool {
    DEFAULT_BULLETS.is_match(token)
}

#[derive(Debug, Clone)]
pub struct SegmenterRules {
    abbreviations: BTreeSet<String>,
    terminal_chars: BTreeSet<char>,
    quote_pairs: BTreeMap<char, char>,
    bullet_pattern: Regex,
}

/// User additions merged on top of the defaults and the abbreviation file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleOverrides {
    #[serde(default)]
    pub abbreviations: Vec<String>,
    /// Replaces the terminal set when given.
    pub terminal_chars: Option<Vec<char>>,
    #[serde(default)]
    pub quote_pairs: Vec<(char, char)>,
    /// Replaces the bullet pattern when given.
    pub bullet_pattern: Option<String>,
}

fn validate_abbreviation(entry: &str) -> std::result::Result<(), String> {
    if entry.chars().any(char::is_whitespace) {
        return Err(format!("abbreviation {entry:?} contains whitespace"));
    }
    if !entry.ends_with('.') {
        return Err(format!("abbreviation {entry:?} does not end with '.'"));
    }
    Ok(())
}

impl Default for SegmenterRules {
    fn default() -> Self {
        let abbreviations = DEFAULT_ABBREVIATIONS
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_owned)
            .collect();
        SegmenterRules {
            abbreviations,
            terminal_chars: DEFAULT_TERMINALS.into_iter().collect(),
            quote_pairs: DEFAULT_QUOTE_PAIRS.into_iter().collect(),
            bullet_pattern: DEFAULT_BULLETS.clone(),
        }
    }
}

impl SegmenterRules {
    /// Default terminals, quotes and bullets with no abbreviations at all.
    pub fn without_abbreviations() -> Self {
        SegmenterRules {
            abbreviations: BTreeSet::new(),
            ..Default::default()
        }
    }

    pub fn abbreviations(&self) -> &BTreeSet<String> {
        &self.abbreviations
    }

    pub fn terminal_chars(&self) -> &BTreeSet<char> {
        &self.terminal_chars
    }

    pub fn add_abbreviation(&mut self, entry: &str) -> Result<()> {
        validate_abbreviation(entry).map_err(Error::Validation)?;
        self.abbreviations.insert(entry.to_owned());
        Ok(())
    }

    pub fn apply(&mut self, overrides: &RuleOverrides) -> Result<()> {
        for a in &overrides.abbreviations {
            self.add_abbreviation(a)?;
        }
        if let Some(t) = &overrides.terminal_chars {
            if t.is_empty() {
                return Err(Error::Validation("terminal character set is empty".into()));
            }
            self.terminal_chars = t.iter().copied().collect();
        }
        self.quote_pairs.extend(overrides.quote_pairs.iter().copied());
        if let Some(p) = &overrides.bullet_pattern {
            self.bullet_pattern = Regex::new(p)
                .map_err(|e| Error::Validation(format!("bullet pattern: {e}")))?;
        }
        Ok(())
    }

    fn is_terminal(&self, c: char) -> bool {
        self.terminal_chars.contains(&c)
    }

    fn is_opener(&self, c: char) -> bool {
        self.quote_pairs.contains_key(&c)
    }

    fn is_closer(&self, c: char) -> bool {
        self.quote_pairs.values().any(|&v| v == c)
    }
}

/// Loads the abbreviation lexicon at `abbrev_path` (one entry per line,
/// `#` comments) and merges it with the defaults and `overrides`.
pub fn load_rules(abbrev_path: &Path, overrides: Option<&RuleOverrides>) -> Result<SegmenterRules> {
    let mut rules = SegmenterRules::default();
    for (line, entry) in read_list(abbrev_path)? {
        validate_abbreviation(&entry).map_err(|reason| Error::Parse {
            path: abbrev_path.to_path_buf(),
            line,
            reason,
        })?;
        rules.abbreviations.insert(entry);
    }
    if let Some(o) = overrides {
        rules.apply(o)?;
    }
    Ok(rules)
}

/// A sentence: byte range into the segmented text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span<'a> {
    pub start: usize,
    pub end: usize,
    pub text: &'a str,
}

fn opens_sentence(c: char, rules: &SegmenterRules) -> bool {
    (c.is_alphabetic() && !c.is_lowercase())
        || c.is_numeric()
        || rules.is_opener(c)
        || matches!(c, '•' | '●' | '▪' | '‣' | '◦')
}

fn opens_after_ellipsis(c: char, rules: &SegmenterRules) -> bool {
    (c.is_alphabetic() && !c.is_lowercase()) || rules.is_opener(c)
}

struct Scanner<'a, 'r> {
    text: &'a str,
    chars: Vec<(usize, char)>,
    rules: &'r SegmenterRules,
    stack: Vec<char>,
    spans: Vec<Span<'a>>,
    span_start: Option<usize>,
    last_end: usize,
}

impl<'a> Scanner<'a, '_> {
    fn byte_end(&self, idx: usize) -> usize {
        let (b, c) = self.chars[idx];
        b + c.len_utf8()
    }

    fn close_span(&mut self, end: usize) {
        if let Some(start) = self.span_start.take() {
            self.spans.push(Span {
                start,
                end,
                text: &self.text[start..end],
            });
        }
    }

    /// Updates the quote/bracket stack for `c`.
    fn track_quote(&mut self, c: char) {
        if self.stack.last() == Some(&c) {
            self.stack.pop();
        } else if self.rules.is_opener(c) {
            let close = self.rules.quote_pairs[&c];
            self.stack.push(close);
        }
    }

    /// Start of the whitespace-delimited token containing char `idx`.
    fn token_start(&self, idx: usize) -> usize {
        let mut s = idx;
        while s > 0 && !self.chars[s - 1].1.is_whitespace() {
            s -= 1;
        }
        s
    }

    fn at_line_start(&self, idx: usize) -> bool {
        self.chars[..idx]
            .iter()
            .rev()
            .find(|(_, c)| !matches!(c, ' ' | '\t'))
            .is_none_or(|&(_, c)| c == '\n' || c == '\r')
    }

    /// True when the whitespace starting at `idx` contains a blank line.
    fn paragraph_break(&self, idx: usize) -> Option<usize> {
        let mut j = idx;
        let mut newlines = 0;
        while j < self.chars.len() && self.chars[j].1.is_whitespace() {
            if self.chars[j].1 == '\n' {
                newlines += 1;
            }
            j += 1;
        }
        (newlines >= 2).then_some(j)
    }

    fn run(mut self) -> Vec<Span<'a>> {
        let n = self.chars.len();
        let mut i = 0;
        while i < n {
            let (byte, c) = self.chars[i];
            if c.is_whitespace() {
                if let Some(next) = self.paragraph_break(i) {
                    let end = self.last_end;
                    self.close_span(end);
                    self.stack.clear();
                    i = next;
                } else {
                    i += 1;
                }
                continue;
            }
            if self.span_start.is_none() {
                self.span_start = Some(byte);
            }
            if !self.rules.is_terminal(c) {
                self.track_quote(c);
                self.last_end = self.byte_end(i);
                i += 1;
                continue;
            }

            let mut j = i;
            while j < n && self.rules.is_terminal(self.chars[j].1) {
                j += 1;
            }
            let mut k = j;
            while k < n && self.rules.is_closer(self.chars[k].1) {
                let closer = self.chars[k].1;
                if self.stack.last() == Some(&closer) {
                    self.stack.pop();
                } else if self.rules.is_opener(closer) {
                    // an opening straight quote glued to a terminal: not a closer
                    break;
                }
                k += 1;
            }
            self.last_end = self.byte_end(k - 1);
            if k < n && !self.chars[k].1.is_whitespace() {
                i = k;
                continue;
            }
            let next = self.chars[k..]
                .iter()
                .find(|(_, c)| !c.is_whitespace())
                .map(|&(_, c)| c);
            if self.is_boundary(i, j, next) {
                let end = self.last_end;
                self.close_span(end);
            }
            i = k;
        }
        let end = self.last_end;
        self.close_span(end);
        self.spans
    }

    /// Decides a candidate whose terminal run is `chars[first..run_end]`.
    fn is_boundary(&self, first: usize, run_end: usize, next: Option<char>) -> bool {
        let Some(next) = next else {
            return true;
        };
        let tok_start = self.token_start(first);
        let run: String = self.chars[first..run_end].iter().map(|&(_, c)| c).collect();

        if run.starts_with('.') {
            let mut s = tok_start;
            while s < first && self.rules.is_opener(self.chars[s].1) {
                s += 1;
            }
            let token = &self.text[self.chars[s].0..self.byte_end(first)];
            if self.rules.abbreviations.contains(token) {
                return false;
            }
        }
        if !self.stack.is_empty() {
            return false;
        }
        if run.chars().count() == 1 && self.at_line_start(tok_start) {
            let token = &self.text[self.chars[tok_start].0..self.last_end];
            if self.rules.bullet_pattern.is_match(token) {
                return false;
            }
        }
        let ellipsis = run.contains('\u{2026}') || run.matches('.').count() >= 2;
        if ellipsis {
            opens_after_ellipsis(next, self.rules)
        } else {
            opens_sentence(next, self.rules)
        }
    }
}

/// Splits `text` into sentence spans. Spans are trimmed, ordered and
/// non-overlapping; only whitespace lies between them.
pub fn segment<'a>(text: &'a str, rules: &SegmenterRules) -> Vec<Span<'a>> {
    Scanner {
        text,
        chars: text.char_indices().collect(),
        rules,
        stack: Vec::new(),
        spans: Vec::new(),
        span_start: None,
        last_end: 0,
    }
    .run()
}

/// Convenience wrapper returning owned sentence strings with inner
/// whitespace collapsed.
pub fn segment_sentences(text: &str, rules: &SegmenterRules) -> Vec<String> {
    segment(text, rules)
        .into_iter()
        .map(|s| crate::corpus::collapse_whitespace(s.text))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(text: &str) -> Vec<&str> {
        let rules = SegmenterRules::default();
        segment(text, &rules).into_iter().map(|s| s.text).collect()
    }

    #[test]
    fn simple_split() {
        assert_eq!(seg("Hello world. Bye."), ["Hello world.", "Bye."]);
        assert!(seg("").is_empty());
        assert!(seg("   \n ").is_empty());
    }

    #[test]
    fn bengali_initials_stay_together() {
        let s = "কাজী মুহম্মদ ওয়াজেদের একমাত্র পুত্র ছিলেন এ. কে. ফজলুল হক।";
        assert_eq!(seg(s), [s]);
        let en = "Kazi Muhammad Wazed's only son was A. K. Fazlul Huq.";
        assert_eq!(seg(en), [en]);
    }

    #[test]
    fn decimals_do_not_split() {
        assert_eq!(seg("Pi is 3.14 exactly. Next."), ["Pi is 3.14 exactly.", "Next."]);
    }

    #[test]
    fn spans_carry_offsets() {
        let rules = SegmenterRules::default();
        let text = "  One. Two!  ";
        let spans = segment(text, &rules);
        assert_eq!((spans[0].start, spans[0].end), (2, 6));
        assert_eq!((spans[1].start, spans[1].end), (7, 11));
        assert_eq!(&text[spans[1].start..spans[1].end], "Two!");
    }

    #[test]
    fn danda_splits() {
        assert_eq!(seg("আমি ভাত খাই। তুমি কী খাও?"), ["আমি ভাত খাই।", "তুমি কী খাও?"]);
    }

    #[test]
    fn quote_defers_boundary() {
        assert_eq!(
            seg("He said \"Go home. Now.\" Then he left."),
            ["He said \"Go home. Now.\"", "Then he left."]
        );
        assert_eq!(
            seg("সে বলল, “বাড়ি যাও। এখনই।” তারপর চলে গেল।"),
            ["সে বলল, “বাড়ি যাও। এখনই।”", "তারপর চলে গেল।"]
        );
    }

    #[test]
    fn bullets_do_not_terminate() {
        assert_eq!(seg("1. First item"), ["1. First item"]);
        assert_eq!(seg("Items are\n(ক) one\n(খ) two"), ["Items are\n(ক) one\n(খ) two"]);
    }

    #[test]
    fn paragraph_break_splits() {
        assert_eq!(seg("Heading\n\nBody text."), ["Heading", "Body text."]);
    }

    #[test]
    fn load_rules_merges_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abbr.txt");
        std::fs::write(&p, "# comment\nZzz.\nএ.\nZzz.\n").unwrap();
        let r = load_rules(&p, None).unwrap();
        assert!(r.abbreviations().contains("Zzz."));
        assert!(r.abbreviations().contains("এ."));
        assert!(r.abbreviations().contains("Dr."));

        std::fs::write(&p, "").unwrap();
        let r = load_rules(&p, None).unwrap();
        assert_eq!(r.abbreviations(), SegmenterRules::default().abbreviations());

        std::fs::write(&p, "ok.\nbad entry.\n").unwrap();
        match load_rules(&p, None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            load_rules(&dir.path().join("missing.txt"), None),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn overrides_apply() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abbr.txt");
        std::fs::write(&p, "").unwrap();
        let o = RuleOverrides {
            abbreviations: vec!["Xyz.".into()],
            terminal_chars: Some(vec!['.', ';']),
            ..Default::default()
        };
        let r = load_rules(&p, Some(&o)).unwrap();
        assert!(r.abbreviations().contains("Xyz."));
        assert_eq!(segment("a; B", &r).len(), 2);
        let bad = RuleOverrides {
            terminal_chars: Some(vec![]),
            ..Default::default()
        };
        assert!(load_rules(&p, Some(&bad)).is_err());
    }
}
