//! Sentence aligners. Each takes the two sides of a document pair and
//! returns alignment links over sentence indices.

mod bleu;
mod bullets;
mod length;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

pub use bleu::{align_bleu, bleu_anchors, Anchor, BleuAlignParams};
pub use bullets::{align_bullets, split_units, BulletAlignment, SkippedSection};
pub use length::{align_length, align_length_with_cost, gale_church_cost, Bead, BeadPriors, LengthAlignParams};

use crate::error::{Error, Result};
use crate::io::read_utf8;

/// Which aligner to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Length,
    Bleu,
    Bullets,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "length" => Ok(Method::Length),
            "bleu" => Ok(Method::Bleu),
            "bullets" => Ok(Method::Bullets),
            _ => Err(Error::Config(format!("unknown alignment method {s:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Length => "length",
            Method::Bleu => "bleu",
            Method::Bullets => "bullets",
        })
    }
}

/// Source word to the set of its target translations. Lookups are exact
/// matches on lowercased tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BilingualLexicon {
    entries: BTreeMap<String, BTreeSet<String>>,
}

impl BilingualLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, src: &str, tgt: &str) -> Result<()> {
        for tok in [src, tgt] {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::Validation(format!(
                    "lexicon token {tok:?} is empty or contains whitespace"
                )));
            }
        }
        self.entries
            .entry(src.to_lowercase())
            .or_default()
            .insert(tgt.to_lowercase());
        Ok(())
    }

    /// Reads `src<TAB>tgt` lines; repeated sources accumulate translations.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = read_utf8(path)?;
        let mut lex = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                reason,
            };
            let (src, tgt) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected src<TAB>tgt".into()))?;
            lex.insert(src.trim(), tgt.trim())
                .map_err(|e| bad(e.to_string()))?;
        }
        Ok(lex)
    }

    pub fn translations(&self, src: &str) -> Option<&BTreeSet<String>> {
        self.entries.get(src)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Fraction of `src_tokens` having at least one translation among
    /// `tgt_tokens`. Zero for an empty source.
    pub fn overlap(&self, src_tokens: &[String], tgt_tokens: &HashSet<String>) -> f64 {
        if src_tokens.is_empty() {
            return 0.0;
        }
        let hits = src_tokens
            .iter()
            .filter(|t| {
                self.entries
                    .get(t.as_str())
                    .is_some_and(|tr| tr.iter().any(|w| tgt_tokens.contains(w)))
            })
            .count();
        hits as f64 / src_tokens.len() as f64
    }
}

/// Lowercased words with surrounding punctuation removed.
pub fn lexical_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric() && !is_combining_mark(c)))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Bengali vowel signs and other spacing/non-spacing marks that are not
/// alphanumeric but belong to the word.
fn is_combining_mark(c: char) -> bool {
    matches!(c, '\u{0981}'..='\u{0983}' | '\u{09BC}' | '\u{09BE}'..='\u{09D7}' | '\u{0300}'..='\u{036F}')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicon_loads_and_merges() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lex.tsv");
        std::fs::write(&p, "ভাত\trice\nভাত\tmeal\nআমি\tI\n").unwrap();
        let lex = BilingualLexicon::load(&p).unwrap();
        assert_eq!(lex.translations("ভাত").unwrap().len(), 2);
        assert!(lex.translations("আমি").unwrap().contains("i"));

        std::fs::write(&p, "no tab here\n").unwrap();
        assert!(matches!(BilingualLexicon::load(&p), Err(Error::Parse { line: 1, .. })));
        std::fs::write(&p, "two words\tx\n").unwrap();
        assert!(BilingualLexicon::load(&p).is_err());
    }

    #[test]
    fn overlap_fraction() {
        let mut lex = BilingualLexicon::new();
        lex.insert("ভাত", "rice").unwrap();
        lex.insert("খাই", "eat").unwrap();
        let src = lexical_tokens("আমি ভাত খাই।");
        assert_eq!(src, ["আমি", "ভাত", "খাই"]);
        let tgt: HashSet<String> = lexical_tokens("I eat rice.").into_iter().collect();
        assert!((lex.overlap(&src, &tgt) - 2.0 / 3.0).abs() < 1e-12);
    }
}
