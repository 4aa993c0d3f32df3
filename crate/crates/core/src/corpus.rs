//! Core data types shared by every stage: documents, alignment links,
//! sentence pairs and evaluation reports.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Replaces every TAB, CR and LF with a single space.
pub fn sanitize_line(text: &str) -> String {
    if !text.contains(['\t', '\n', '\r']) {
        return text.to_owned();
    }
    text.chars()
        .map(|c| if matches!(c, '\t' | '\n' | '\r') { ' ' } else { c })
        .collect()
}

/// Collapses runs of whitespace into single spaces and trims both ends.
pub fn collapse_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub lang: String,
    sentences: Vec<String>,
}

impl Document {
    /// Builds a document, replacing embedded TAB/newline characters with a
    /// space. Blank sentences are rejected.
    pub fn new(
        doc_id: impl Into<String>,
        lang: impl Into<String>,
        sentences: impl IntoIterator<Item = impl AsRef<str>>,
    ) -> Result<Self> {
        let doc_id = doc_id.into();
        let mut out = Vec::new();
        for (i, s) in sentences.into_iter().enumerate() {
            let s = sanitize_line(s.as_ref());
            if s.trim().is_empty() {
                return Err(Error::Validation(format!(
                    "document {doc_id}: sentence {i} is blank"
                )));
            }
            out.push(s);
        }
        Ok(Document {
            doc_id,
            lang: lang.into(),
            sentences: out,
        })
    }

    pub fn sentences(&self) -> &[String] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentPair {
    pub pair_id: String,
    pub src: Document,
    pub tgt: Document,
}

impl DocumentPair {
    pub fn new(pair_id: impl Into<String>, src: Document, tgt: Document) -> Result<Self> {
        let pair_id = pair_id.into();
        if src.doc_id == tgt.doc_id {
            return Err(Error::Validation(format!(
                "pair {pair_id}: source and target share doc_id {:?}",
                src.doc_id
            )));
        }
        if src.lang == tgt.lang {
            return Err(Error::Validation(format!(
                "pair {pair_id}: source and target share language {:?}",
                src.lang
            )));
        }
        Ok(DocumentPair { pair_id, src, tgt })
    }
}

/// A bead linking a group of source sentences to a group of target
/// sentences. One side may be empty (an unaligned 1-0 or 0-1 bead).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AlignmentLink {
    src: Vec<usize>,
    tgt: Vec<usize>,
}

impl AlignmentLink {
    /// Sorts and deduplicates both sides.
    pub fn new(mut src: Vec<usize>, mut tgt: Vec<usize>) -> Result<Self> {
        if src.is_empty() && tgt.is_empty() {
            return Err(Error::Contract("alignment link with both sides empty".into()));
        }
        src.sort_unstable();
        src.dedup();
        tgt.sort_unstable();
        tgt.dedup();
        Ok(AlignmentLink { src, tgt })
    }

    pub fn one_to_one(src: usize, tgt: usize) -> Self {
        AlignmentLink {
            src: vec![src],
            tgt: vec![tgt],
        }
    }

    /// A link over the contiguous ranges `src_start..src_start+n_src` and
    /// `tgt_start..tgt_start+n_tgt`.
    pub fn span(src_start: usize, n_src: usize, tgt_start: usize, n_tgt: usize) -> Result<Self> {
        Self::new(
            (src_start..src_start + n_src).collect(),
            (tgt_start..tgt_start + n_tgt).collect(),
        )
    }

    pub fn src(&self) -> &[usize] {
        &self.src
    }

    pub fn tgt(&self) -> &[usize] {
        &self.tgt
    }

    /// True when both sides are non-empty.
    pub fn is_aligned(&self) -> bool {
        !self.src.is_empty() && !self.tgt.is_empty()
    }
}

fn parse_side(side: &str, line: &str) -> Result<Vec<usize>> {
    if side.is_empty() {
        return Ok(Vec::new());
    }
    side.split(',')
        .map(|tok| {
            if tok.is_empty() || !tok.bytes().all(|b| b.is_ascii_digit()) {
                return Err(Error::ParseLink {
                    line: line.to_owned(),
                    reason: format!("{tok:?} is not a non-negative integer"),
                });
            }
            tok.parse::<usize>().map_err(|e| Error::ParseLink {
                line: line.to_owned(),
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Parses `<ints>:<ints>` where each side is a comma-separated list of
/// zero-based indices and at most one side is empty.
pub fn parse_link_line(line: &str) -> Result<AlignmentLink> {
    let trimmed = line.trim_end_matches(['\n', '\r']);
    let mut parts = trimmed.split(':');
    let (Some(lhs), Some(rhs), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(Error::ParseLink {
            line: line.to_owned(),
            reason: "expected exactly one ':'".into(),
        });
    };
    let src = parse_side(lhs, line)?;
    let tgt = parse_side(rhs, line)?;
    if src.is_empty() && tgt.is_empty() {
        return Err(Error::ParseLink {
            line: line.to_owned(),
            reason: "both sides empty".into(),
        });
    }
    AlignmentLink::new(src, tgt)
}

pub fn serialize_link(link: &AlignmentLink) -> String {
    link.to_string()
}

impl fmt::Display for AlignmentLink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[usize]| {
            v.iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(",")
        };
        write!(f, "{}:{}", join(&self.src), join(&self.tgt))
    }
}

impl FromStr for AlignmentLink {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_link_line(s)
    }
}

/// Where a sentence pair came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Origin {
    pub doc_id: String,
    pub link: AlignmentLink,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SentencePair {
    pub src: String,
    pub tgt: String,
    pub origin: Option<Origin>,
}

impl SentencePair {
    /// Builds a pair after replacing TAB/newline characters with spaces.
    /// Either side being blank is an error.
    pub fn new(src: impl AsRef<str>, tgt: impl AsRef<str>) -> Result<Self> {
        let src = sanitize_line(src.as_ref());
        let tgt = sanitize_line(tgt.as_ref());
        if src.trim().is_empty() || tgt.trim().is_empty() {
            return Err(Error::Validation(format!(
                "sentence pair with blank side: {src:?} / {tgt:?}"
            )));
        }
        Ok(SentencePair {
            src,
            tgt,
            origin: None,
        })
    }

    pub fn with_origin(mut self, origin: Origin) -> Self {
        self.origin = Some(origin);
        self
    }

    /// The whitespace-collapsed `(src, tgt)` key used for set semantics.
    pub fn key(&self) -> (String, String) {
        (collapse_whitespace(&self.src), collapse_whitespace(&self.tgt))
    }

    pub fn doc_id(&self) -> Option<&str> {
        self.origin.as_ref().map(|o| o.doc_id.as_str())
    }
}

/// Precision, recall and F1 of a predicted pair set against a gold set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_pred: usize,
    pub n_gold: usize,
    pub n_correct: usize,
}

/// Harmonic mean of precision and recall; zero when both are zero.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

impl AlignReport {
    pub fn from_counts(n_pred: usize, n_gold: usize, n_correct: usize) -> Self {
        let precision = if n_pred == 0 {
            0.0
        } else {
            n_correct as f64 / n_pred as f64
        };
        let recall = if n_gold == 0 {
            0.0
        } else {
            n_correct as f64 / n_gold as f64
        };
        AlignReport {
            precision,
            recall,
            f1: f1_score(precision, recall),
            n_pred,
            n_gold,
            n_correct,
        }
    }
}

fn side_text(doc: &Document, idx: &[usize]) -> Result<String> {
    let mut parts = Vec::with_capacity(idx.len());
    for &i in idx {
        let s = doc.sentences.get(i).ok_or_else(|| Error::Range {
            doc_id: doc.doc_id.clone(),
            index: i,
            len: doc.len(),
        })?;
        parts.push(s.as_str());
    }
    Ok(parts.join(" "))
}

/// Turns links into sentence pairs. Multi-sentence sides are joined with a
/// single space in index order; links with an empty side produce nothing.
pub fn expand_links(links: &[AlignmentLink], pair: &DocumentPair) -> Result<Vec<SentencePair>> {
    let mut out = Vec::new();
    for link in links {
        // bounds are checked on null beads too
        let src = side_text(&pair.src, &link.src)?;
        let tgt = side_text(&pair.tgt, &link.tgt)?;
        if !link.is_aligned() {
            continue;
        }
        let sp = SentencePair::new(src, tgt)?.with_origin(Origin {
            doc_id: pair.src.doc_id.clone(),
            link: link.clone(),
        });
        out.push(sp);
    }
    Ok(out)
}
