//! Per-document union of the pairs found by several aligners.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::corpus::{collapse_whitespace, SentencePair};
use crate::error::{Error, Result};
use crate::io::read_pairs;

/// Aligner name to document id to that aligner's pairs for the document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnsembleInput {
    per_aligner: BTreeMap<String, BTreeMap<String, Vec<SentencePair>>>,
}

impl EnsembleInput {
    /// Every aligner must cover the same document ids (an empty list is fine).
    pub fn new(per_aligner: BTreeMap<String, BTreeMap<String, Vec<SentencePair>>>) -> Result<Self> {
        let mut names = per_aligner.iter();
        if let Some((first_name, first)) = names.next() {
            let ids: BTreeSet<&String> = first.keys().collect();
            for (name, docs) in names {
                let other: BTreeSet<&String> = docs.keys().collect();
                if other != ids {
                    let missing: Vec<_> = ids.symmetric_difference(&other).collect();
                    return Err(Error::Validation(format!(
                        "aligners {first_name} and {name} cover different documents: {missing:?}"
                    )));
                }
            }
        }
        Ok(EnsembleInput { per_aligner })
    }

    /// Reads `<dir>/<aligner>/<doc_id>.tsv`. A document file absent for one
    /// aligner but present for another counts as an empty list.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut per_aligner: BTreeMap<String, BTreeMap<String, Vec<SentencePair>>> = BTreeMap::new();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let path = entry.path();
            if !path.is_dir() {
                continue;
            }
            let name = entry.file_name().to_string_lossy().into_owned();
            let mut docs = BTreeMap::new();
            for f in std::fs::read_dir(&path).map_err(|e| Error::io(&path, e))? {
                let f = f.map_err(|e| Error::io(&path, e))?.path();
                if f.extension().is_some_and(|x| x == "tsv") {
                    let doc_id = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                    let pairs = read_pairs(&f)?;
                    docs.insert(doc_id, pairs);
                }
            }
            per_aligner.insert(name, docs);
        }
        let all_docs: BTreeSet<String> = per_aligner.values().flat_map(|d| d.keys().cloned()).collect();
        for docs in per_aligner.values_mut() {
            for id in &all_docs {
                docs.entry(id.clone()).or_default();
            }
        }
        Self::new(per_aligner)
    }

    pub fn aligners(&self) -> impl Iterator<Item = &str> {
        self.per_aligner.keys().map(String::as_str)
    }

    pub fn get(&self, aligner: &str) -> Option<&BTreeMap<String, Vec<SentencePair>>> {
        self.per_aligner.get(aligner)
    }
}

/// Union of the members' pairs per document, with identity on
/// whitespace-collapsed text. Output is sorted by source then target text;
/// the provenance kept is that of the first member (by name) to supply it.
pub fn ensemble_union<S: AsRef<str>>(
    input: &EnsembleInput,
    members: &[S],
) -> Result<BTreeMap<String, Vec<SentencePair>>> {
    if members.is_empty() {
        return Err(Error::Config("ensemble needs at least one member".into()));
    }
    let members: BTreeSet<&str> = members.iter().map(AsRef::as_ref).collect();
    let mut chosen = Vec::with_capacity(members.len());
    for m in &members {
        let docs = input.per_aligner.get(*m).ok_or_else(|| {
            Error::Config(format!(
                "unknown ensemble member {m:?}; available: {:?}",
                input.per_aligner.keys().collect::<Vec<_>>()
            ))
        })?;
        chosen.push(docs);
    }

    let mut out = BTreeMap::new();
    for doc_id in chosen[0].keys() {
        let mut union: BTreeMap<(String, String), SentencePair> = BTreeMap::new();
        for docs in &chosen {
            for p in docs.get(doc_id).into_iter().flatten() {
                let key = p.key();
                union.entry(key).or_insert_with(|| SentencePair {
                    src: collapse_whitespace(&p.src),
                    tgt: collapse_whitespace(&p.tgt),
                    origin: p.origin.clone(),
                });
            }
        }
        out.insert(doc_id.clone(), union.into_values().collect());
    }
    Ok(out)
}

/// Uppercased first letters of the member names, in the given order.
pub fn name_ensemble<S: AsRef<str>>(members: &[S]) -> String {
    members
        .iter()
        .filter_map(|m| m.as_ref().chars().next())
        .flat_map(char::to_uppercase)
        .collect()
}
