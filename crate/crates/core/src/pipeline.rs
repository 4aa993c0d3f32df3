//! End-to-end orchestration: segment, align, ensemble, filter and clean a
//! set of document pairs from one TOML config. Also the margin sweep and
//! section matching used when building corpora from loosely parallel
//! sources.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::align::{
    align_bleu, align_bullets, align_length, BilingualLexicon, BleuAlignParams, LengthAlignParams, Method,
};
use crate::corpus::{expand_links, AlignReport, AlignmentLink, Document, DocumentPair, Origin, SentencePair};
use crate::ensemble::{ensemble_union, name_ensemble, EnsembleInput};
use crate::error::{Error, Result};
use crate::filter::{score_pairs, EmbeddingMatrix, FilterParams, FilterReport, Neighborhood, PoolScores};
use crate::io::{read_embeddings, read_pairs, read_sentences, read_utf8, write_links, write_pairs, write_string};
use crate::metrics::{corpus_bleu_text, precision_recall_f1, BleuParams, GoldSet};
use crate::preprocess::{remove_leakage, run_steps, LeakMode, NormalizationTable, PreprocessOptions, Step, TranslitMap};
use crate::segment::{load_rules, segment_sentences, SegmenterRules};

pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

/// One document pair listed in the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub doc_id: String,
    pub src: PathBuf,
    pub tgt: PathBuf,
    /// Machine translation of the source, one line per source sentence.
    pub translation: Option<PathBuf>,
}

/// Reads `doc_id<TAB>src<TAB>tgt[<TAB>translation]` lines. Relative paths
/// are taken from the manifest's directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    let text = read_utf8(path)?;
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if !(3..=4).contains(&cols.len()) || cols.iter().any(|c| c.is_empty()) {
            return Err(bad("expected doc_id<TAB>src<TAB>tgt[<TAB>translation]".into()));
        }
        if !seen.insert(cols[0].to_owned()) {
            return Err(bad(format!("duplicate doc_id {:?}", cols[0])));
        }
        out.push(ManifestEntry {
            doc_id: cols[0].to_owned(),
            src: base.join(cols[1]),
            tgt: base.join(cols[2]),
            translation: cols.get(3).map(|t| base.join(t)),
        });
    }
    if out.is_empty() {
        return Err(Error::Config(format!("{}: manifest lists no documents", path.display())));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignerSpec {
    pub name: String,
    pub method: Method,
    /// Bilingual lexicon for the length aligner.
    #[serde(default)]
    pub dictionary: Option<PathBuf>,
    #[serde(default)]
    pub length: Option<LengthAlignParams>,
    #[serde(default)]
    pub bleu: Option<BleuAlignParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub members: Vec<String>,
}

/// Per-language sentence lists with line-aligned embedding files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSpec {
    pub src_sentences: PathBuf,
    pub src_vectors: PathBuf,
    pub tgt_sentences: PathBuf,
    pub tgt_vectors: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessSpec {
    #[serde(default)]
    pub steps: Vec<Step>,
    #[serde(default)]
    pub table: Option<PathBuf>,
    #[serde(default = "ten")]
    pub foreign_min_len: usize,
    #[serde(default)]
    pub translit_letters: Option<BTreeMap<char, char>>,
    #[serde(default)]
    pub eval_sets: Vec<PathBuf>,
    #[serde(default)]
    pub leak_mode: LeakMode,
}

fn ten() -> usize {
    10
}

impl Default for PreprocessSpec {
    fn default() -> Self {
        PreprocessSpec {
            steps: Vec::new(),
            table: None,
            foreign_min_len: 10,
            translit_letters: None,
            eval_sets: Vec::new(),
            leak_mode: LeakMode::Both,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub manifest: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "bn")]
    pub src_lang: String,
    #[serde(default = "en")]
    pub tgt_lang: String,
    /// Whether the input documents are raw text to be segmented, as opposed
    /// to one sentence per line.
    #[serde(default = "yes")]
    pub segment: bool,
    #[serde(default)]
    pub segmenter_rules: Option<PathBuf>,
    pub aligners: Vec<AlignerSpec>,
    pub ensemble: EnsembleSpec,
    #[serde(default)]
    pub filter: Option<FilterParams>,
    #[serde(default)]
    pub embeddings: Option<EmbeddingSpec>,
    #[serde(default)]
    pub preprocess: PreprocessSpec,
}

fn bn() -> String {
    "bn".into()
}
fn en() -> String {
    "en".into()
}
fn yes() -> bool {
    true
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn must_exist(p: &Path, what: &str) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} {} does not exist", p.display())))
    }
}

impl PipelineConfig {
    /// Parses a config and resolves relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = read_utf8(path)?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.manifest);
        resolve(base, &mut self.output_dir);
        if let Some(r) = &mut self.segmenter_rules {
            resolve(base, r);
        }
        for a in &mut self.aligners {
            if let Some(d) = &mut a.dictionary {
                resolve(base, d);
            }
        }
        if let Some(e) = &mut self.embeddings {
            for p in [&mut e.src_sentences, &mut e.src_vectors, &mut e.tgt_sentences, &mut e.tgt_vectors] {
                resolve(base, p);
            }
        }
        if let Some(t) = &mut self.preprocess.table {
            resolve(base, t);
        }
        for p in &mut self.preprocess.eval_sets {
            resolve(base, p);
        }
    }

    /// Checks everything that can be checked without doing any work.
    pub fn validate(&self) -> Result<Vec<ManifestEntry>> {
        if self.aligners.is_empty() {
            return Err(Error::Config("no aligners configured".into()));
        }
        let mut names = BTreeSet::new();
        for a in &self.aligners {
            if !names.insert(a.name.as_str()) {
                return Err(Error::Config(format!("aligner name {:?} used twice", a.name)));
            }
            if a.name.is_empty() || a.name.contains(['/', '\\']) {
                return Err(Error::Config(format!("invalid aligner name {:?}", a.name)));
            }
            if let Some(p) = &a.length {
                p.validate()?;
            }
            if let Some(p) = &a.bleu {
                p.validate()?;
            }
            if let Some(d) = &a.dictionary {
                must_exist(d, "dictionary")?;
            }
        }
        if self.ensemble.members.is_empty() {
            return Err(Error::Config("ensemble needs at least one member".into()));
        }
        for m in &self.ensemble.members {
            if !names.contains(m.as_str()) {
                return Err(Error::Config(format!(
                    "ensemble member {m:?} is not a configured aligner ({names:?})"
                )));
            }
        }
        if let Some(f) = &self.filter {
            f.validate()?;
            let Some(e) = &self.embeddings else {
                return Err(Error::Config("filter configured without [embeddings]".into()));
            };
            for (p, what) in [
                (&e.src_sentences, "source embedding sentences"),
                (&e.src_vectors, "source embeddings"),
                (&e.tgt_sentences, "target embedding sentences"),
                (&e.tgt_vectors, "target embeddings"),
            ] {
                must_exist(p, what)?;
            }
        }
        if self.src_lang == self.tgt_lang {
            return Err(Error::Config("src_lang and tgt_lang must differ".into()));
        }
        if let Some(r) = &self.segmenter_rules {
            must_exist(r, "segmenter rules")?;
        }
        if let Some(t) = &self.preprocess.table {
            must_exist(t, "normalization table")?;
        }
        for p in &self.preprocess.eval_sets {
            must_exist(p, "evaluation set")?;
        }
        must_exist(&self.manifest, "manifest")?;
        let entries = read_manifest(&self.manifest)?;
        let needs_translation = self.aligners.iter().any(|a| a.method == Method::Bleu);
        for e in &entries {
            must_exist(&e.src, "source document")?;
            must_exist(&e.tgt, "target document")?;
            match &e.translation {
                Some(t) => must_exist(t, "translation")?,
                None if needs_translation => {
                    return Err(Error::Config(format!(
                        "document {} has no translation but a bleu aligner is configured",
                        e.doc_id
                    )))
                }
                None => {}
            }
        }
        Ok(entries)
    }

    /// SHA-256 over the canonical JSON form of the config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// Sentence-to-vector lookup for one language.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    index: HashMap<String, usize>,
    matrix: EmbeddingMatrix,
}

impl EmbeddingStore {
    pub fn new(sentences: Vec<String>, matrix: EmbeddingMatrix) -> Result<Self> {
        if sentences.len() != matrix.len() {
            return Err(Error::Validation(format!(
                "{} sentences but {} embedding rows",
                sentences.len(),
                matrix.len()
            )));
        }
        let mut index = HashMap::new();
        for (i, s) in sentences.into_iter().enumerate() {
            index.entry(s).or_insert(i);
        }
        Ok(EmbeddingStore { index, matrix })
    }

    pub fn load(sentences: &Path, vectors: &Path) -> Result<Self> {
        Self::new(read_sentences(sentences)?, read_embeddings(vectors)?)
    }

    pub fn get(&self, sentence: &str) -> Option<&[f32]> {
        self.index.get(sentence).map(|&i| self.matrix.row(i))
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// The stored vector for `text`, or the sum of the vectors of the
    /// document sentences it was joined from.
    fn lookup(&self, text: &str, parts: &[&str]) -> Result<Vec<f32>> {
        if let Some(v) = self.get(text) {
            return Ok(v.to_vec());
        }
        if parts.is_empty() {
            return Err(Error::Validation(format!("no embedding for sentence {text:?}")));
        }
        let mut sum = vec![0.0f32; self.dim()];
        for p in parts {
            let v = self
                .get(p)
                .ok_or_else(|| Error::Validation(format!("no embedding for sentence {p:?}")))?;
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
        }
        Ok(sum)
    }
}

/// Embedding rows for every pair, built from the two stores.
pub fn pair_embeddings(
    pairs: &[SentencePair],
    docs: &BTreeMap<String, DocumentPair>,
    src: &EmbeddingStore,
    tgt: &EmbeddingStore,
) -> Result<(EmbeddingMatrix, EmbeddingMatrix)> {
    let mut s_rows = Vec::with_capacity(pairs.len());
    let mut t_rows = Vec::with_capacity(pairs.len());
    for p in pairs {
        let (sp, tp): (Vec<&str>, Vec<&str>) = match (&p.origin, p.doc_id().and_then(|d| docs.get(d))) {
            (Some(o), Some(dp)) => (
                o.link.src().iter().filter_map(|&i| dp.src.sentences().get(i)).map(String::as_str).collect(),
                o.link.tgt().iter().filter_map(|&i| dp.tgt.sentences().get(i)).map(String::as_str).collect(),
            ),
            _ => (Vec::new(), Vec::new()),
        };
        let err = |e: Error| e.in_stage("filter", p.doc_id());
        s_rows.push(src.lookup(&p.src, &sp).map_err(err)?);
        t_rows.push(tgt.lookup(&p.tgt, &tp).map_err(err)?);
    }
    Ok((EmbeddingMatrix::from_rows(s_rows)?, EmbeddingMatrix::from_rows(t_rows)?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignerCounts {
    pub links: usize,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub pairs_in: usize,
    pub pairs_out: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterStage {
    pub pairs_in: usize,
    pub pairs_out: usize,
    pub report: FilterReport,
    /// Filtered percentage per source document.
    pub pct_filtered_by_doc: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessStage {
    pub pairs_in: usize,
    pub pairs_out: usize,
    pub steps: Vec<Step>,
    pub leakage_dropped: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub seed: u64,
    pub documents: usize,
    pub src_sentences: usize,
    pub tgt_sentences: usize,
    pub aligners: BTreeMap<String, AlignerCounts>,
    pub ensemble_name: String,
    pub ensemble: StageCounts,
    pub filter: Option<FilterStage>,
    pub preprocess: PreprocessStage,
    pub pairs_out: usize,
}

impl RunReport {
    /// Each stage consumes exactly what the previous one produced.
    pub fn check_telescoping(&self) -> Result<()> {
        let after_filter = match &self.filter {
            Some(f) => {
                if f.pairs_in != self.ensemble.pairs_out || f.report.n_kept != f.pairs_out {
                    return Err(Error::Contract("filter counts do not match the ensemble output".into()));
                }
                f.pairs_out
            }
            None => self.ensemble.pairs_out,
        };
        if self.preprocess.pairs_in != after_filter || self.preprocess.pairs_out != self.pairs_out {
            return Err(Error::Contract("preprocess counts do not telescope".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub seconds: Vec<(String, f64)>,
}

struct Loaded {
    entry: ManifestEntry,
    pair: DocumentPair,
    src_raw: String,
    tgt_raw: String,
    translation: Option<Vec<String>>,
}

fn load_documents(
    entries: &[ManifestEntry],
    cfg: &PipelineConfig,
    rules: &SegmenterRules,
) -> Result<Vec<Loaded>> {
    entries
        .par_iter()
        .map(|e| {
            let run = || -> Result<Loaded> {
                let src_raw = read_utf8(&e.src)?;
                let tgt_raw = read_utf8(&e.tgt)?;
                let split = |text: &str| -> Vec<String> {
                    if cfg.segment {
                        segment_sentences(text, rules)
                    } else {
                        text.lines().filter(|l| !l.trim().is_empty()).map(str::to_owned).collect()
                    }
                };
                let src = Document::new(format!("{}.{}", e.doc_id, cfg.src_lang), &cfg.src_lang, split(&src_raw))?;
                let tgt = Document::new(format!("{}.{}", e.doc_id, cfg.tgt_lang), &cfg.tgt_lang, split(&tgt_raw))?;
                let translation = e.translation.as_ref().map(read_sentences).transpose()?;
                Ok(Loaded {
                    entry: e.clone(),
                    pair: DocumentPair::new(&e.doc_id, src, tgt)?,
                    src_raw,
                    tgt_raw,
                    translation,
                })
            };
            run().map_err(|err| err.in_stage("segment", Some(&e.doc_id)))
        })
        .collect()
}

/// Pairs carry the manifest doc_id as their origin.
fn with_doc_origin(pairs: Vec<SentencePair>, doc_id: &str) -> Vec<SentencePair> {
    pairs
        .into_iter()
        .map(|mut p| {
            if let Some(o) = &mut p.origin {
                o.doc_id = doc_id.to_owned();
            }
            p
        })
        .collect()
}

fn run_aligner(
    spec: &AlignerSpec,
    dict: Option<&Arc<BilingualLexicon>>,
    doc: &Loaded,
) -> Result<(Vec<AlignmentLink>, Vec<SentencePair>)> {
    let pair = &doc.pair;
    let doc_id = &doc.entry.doc_id;
    match spec.method {
        Method::Length => {
            let mut params = spec.length.clone().unwrap_or_default();
            params.dictionary = dict.cloned();
            let links = if pair.src.is_empty() || pair.tgt.is_empty() {
                Vec::new()
            } else {
                align_length(pair.src.sentences(), pair.tgt.sentences(), &params)?
            };
            let pairs = with_doc_origin(expand_links(&links, pair)?, doc_id);
            Ok((links, pairs))
        }
        Method::Bleu => {
            let translation = doc
                .translation
                .as_ref()
                .ok_or_else(|| Error::Config(format!("document {doc_id} has no translation")))?;
            let params = spec.bleu.unwrap_or_default();
            let links = align_bleu(pair.src.len(), translation, pair.tgt.sentences(), &params)?;
            let pairs = with_doc_origin(expand_links(&links, pair)?, doc_id);
            Ok((links, pairs))
        }
        Method::Bullets => {
            let a = align_bullets(&doc.src_raw, &doc.tgt_raw);
            let mut pairs = Vec::with_capacity(a.links.len());
            for l in &a.links {
                let (s, t) = (l.src()[0], l.tgt()[0]);
                pairs.push(SentencePair::new(&a.src_units[s], &a.tgt_units[t])?.with_origin(Origin {
                    doc_id: doc_id.clone(),
                    link: l.clone(),
                }));
            }
            Ok((a.links, pairs))
        }
    }
}

fn remove_if_exists(p: &Path) -> Result<()> {
    if p.is_dir() {
        std::fs::remove_dir_all(p).map_err(|e| Error::io(p, e))?;
    } else if p.exists() {
        std::fs::remove_file(p).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// Runs every stage and writes the artifacts under `output_dir`:
/// `links/<aligner>/<doc>.links`, `pairs/<aligner>/<doc>.tsv`,
/// `ensemble.tsv`, `filter_report.json`, `pairs.tsv`, `run_report.json`
/// and `timings.json`. An `INCOMPLETE` marker stays behind if a stage fails.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport> {
    let entries = cfg.validate()?;
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let marker = out.join(INCOMPLETE_MARKER);
    write_string(&marker, "pipeline run in progress or failed\n")?;
    for stale in ["links", "pairs", "ensemble.tsv", "filter_report.json", "pairs.tsv", "run_report.json", "timings.json"] {
        remove_if_exists(&out.join(stale))?;
    }

    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut Vec<(String, f64)>| {
        timings.push((name.to_owned(), clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };

    let rules = match &cfg.segmenter_rules {
        Some(p) => load_rules(p, None)?,
        None => SegmenterRules::default(),
    };
    let docs = load_documents(&entries, cfg, &rules)?;
    lap("segment", &mut timings);

    let mut dicts: HashMap<&str, Arc<BilingualLexicon>> = HashMap::new();
    for a in &cfg.aligners {
        if let Some(d) = &a.dictionary {
            dicts.insert(&a.name, Arc::new(BilingualLexicon::load(d)?));
        }
    }
    let mut per_aligner = BTreeMap::new();
    let mut aligner_counts = BTreeMap::new();
    for spec in &cfg.aligners {
        let results: Vec<(Vec<AlignmentLink>, Vec<SentencePair>)> = docs
            .par_iter()
            .map(|d| {
                run_aligner(spec, dicts.get(spec.name.as_str()), d)
                    .map_err(|e| e.in_stage("align", Some(&d.entry.doc_id)))
            })
            .collect::<Result<_>>()?;
        let mut by_doc = BTreeMap::new();
        let mut counts = AlignerCounts { links: 0, pairs: 0 };
        for (d, (links, pairs)) in docs.iter().zip(results) {
            let id = &d.entry.doc_id;
            write_links(out.join("links").join(&spec.name).join(format!("{id}.links")), &links)?;
            write_pairs(out.join("pairs").join(&spec.name).join(format!("{id}.tsv")), &pairs)?;
            counts.links += links.len();
            counts.pairs += pairs.len();
            by_doc.insert(id.clone(), pairs);
        }
        per_aligner.insert(spec.name.clone(), by_doc);
        aligner_counts.insert(spec.name.clone(), counts);
    }
    lap("align", &mut timings);

    let input = EnsembleInput::new(per_aligner)?;
    let union = ensemble_union(&input, &cfg.ensemble.members).map_err(|e| e.in_stage("ensemble", None))?;
    let ensembled: Vec<SentencePair> = union.into_values().flatten().collect();
    let ensemble_in: usize = cfg.ensemble.members.iter().map(|m| aligner_counts[m].pairs).sum();
    write_pairs(out.join("ensemble.tsv"), &ensembled)?;
    lap("ensemble", &mut timings);

    let (filtered, filter_stage) = match (&cfg.filter, &cfg.embeddings) {
        (Some(fp), Some(es)) => {
            let params = FilterParams { seed: cfg.seed, ..*fp };
            let src_store = EmbeddingStore::load(&es.src_sentences, &es.src_vectors)?;
            let tgt_store = EmbeddingStore::load(&es.tgt_sentences, &es.tgt_vectors)?;
            let doc_map: BTreeMap<String, DocumentPair> =
                docs.iter().map(|d| (d.entry.doc_id.clone(), d.pair.clone())).collect();
            let (se, te) = pair_embeddings(&ensembled, &doc_map, &src_store, &tgt_store)?;
            let scores = score_pairs(&ensembled, &se, &te, &params).map_err(|e| e.in_stage("filter", None))?;
            let kept_idx = scores.kept_indices(params.margin);
            let report = scores.report(params.margin);
            let kept: Vec<SentencePair> = kept_idx.iter().map(|&i| ensembled[i].clone()).collect();
            let by_doc = pct_by_doc(&ensembled, &kept_idx);
            write_string(out.join("filter_report.json"), &to_json(&report))?;
            let stage = FilterStage {
                pairs_in: ensembled.len(),
                pairs_out: kept.len(),
                report,
                pct_filtered_by_doc: by_doc,
            };
            (kept, Some(stage))
        }
        _ => (ensembled.clone(), None),
    };
    lap("filter", &mut timings);

    let table = match &cfg.preprocess.table {
        Some(p) => NormalizationTable::load(p)?,
        None => NormalizationTable::builtin(),
    };
    let opts = PreprocessOptions {
        table,
        foreign_min_len: cfg.preprocess.foreign_min_len,
        translit: cfg
            .preprocess
            .translit_letters
            .clone()
            .map_or_else(TranslitMap::default, |letters| TranslitMap { letters }),
    };
    let pre_in = filtered.len();
    let (cleaned, mut notes) = run_steps(filtered, &cfg.preprocess.steps, &opts);
    let eval_sets: Vec<Vec<SentencePair>> = cfg
        .preprocess
        .eval_sets
        .iter()
        .map(|p| {
            let pairs = read_pairs(p)?;
            Ok(pairs.iter().filter_map(|q| crate::preprocess::normalize_pair(q, &opts.table)).collect())
        })
        .collect::<Result<_>>()
        .map_err(|e: Error| e.in_stage("preprocess", None))?;
    let (final_pairs, leaked) = remove_leakage(&cleaned, &eval_sets, cfg.preprocess.leak_mode);
    if leaked > 0 {
        notes.push(format!("removed {leaked} pairs found in evaluation sets"));
    }
    write_pairs(out.join("pairs.tsv"), &final_pairs)?;
    lap("preprocess", &mut timings);

    let report = RunReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        documents: docs.len(),
        src_sentences: docs.iter().map(|d| d.pair.src.len()).sum(),
        tgt_sentences: docs.iter().map(|d| d.pair.tgt.len()).sum(),
        aligners: aligner_counts,
        ensemble_name: name_ensemble(&cfg.ensemble.members),
        ensemble: StageCounts {
            pairs_in: ensemble_in,
            pairs_out: ensembled.len(),
        },
        filter: filter_stage,
        preprocess: PreprocessStage {
            pairs_in: pre_in,
            pairs_out: final_pairs.len(),
            steps: cfg.preprocess.steps.clone(),
            leakage_dropped: leaked,
            notes,
        },
        pairs_out: final_pairs.len(),
    };
    report.check_telescoping()?;
    write_string(out.join("run_report.json"), &to_json(&report))?;
    write_string(out.join("timings.json"), &to_json(&Timings { seconds: timings }))?;
    remove_if_exists(&marker)?;
    Ok(report)
}

fn pct_by_doc(pairs: &[SentencePair], kept: &[usize]) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for p in pairs {
        counts.entry(p.doc_id().unwrap_or("").to_owned()).or_default().0 += 1;
    }
    for &i in kept {
        counts.entry(pairs[i].doc_id().unwrap_or("").to_owned()).or_default().1 += 1;
    }
    counts
        .into_iter()
        .map(|(d, (n, k))| (d, crate::filter::pct_filtered(n, k)))
        .collect()
}

/// 0.90, 0.91, ..., 1.10.
pub fn default_sweep_margins() -> Vec<f64> {
    (90..=110).map(|i| f64::from(i) / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub margin: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_kept: usize,
}

/// Precision, recall and F1 of the kept pairs at each margin. The
/// neighbour search runs once; each margin only re-thresholds the scores.
pub fn sweep_margin(
    pairs: &[SentencePair],
    src_emb: &EmbeddingMatrix,
    tgt_emb: &EmbeddingMatrix,
    params: &FilterParams,
    margins: &[f64],
    gold: &GoldSet,
) -> Result<Vec<SweepRow>> {
    let scores = score_pairs(pairs, src_emb, tgt_emb, params)?;
    Ok(sweep_scores(pairs, &scores, margins, gold))
}

pub fn sweep_scores(pairs: &[SentencePair], scores: &PoolScores, margins: &[f64], gold: &GoldSet) -> Vec<SweepRow> {
    margins
        .iter()
        .map(|&m| {
            let kept: Vec<SentencePair> = scores.kept_indices(m).into_iter().map(|i| pairs[i].clone()).collect();
            let r: AlignReport = precision_recall_f1(&kept, gold);
            SweepRow {
                margin: m,
                precision: r.precision,
                recall: r.recall,
                f1: r.f1,
                n_kept: kept.len(),
            }
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("margin,precision,recall,f1,n_kept\n");
    for r in rows {
        s.push_str(&format!(
            "{:.2},{:.6},{:.6},{:.6},{}\n",
            r.margin, r.precision, r.recall, r.f1, r.n_kept
        ));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionMatch {
    pub src: usize,
    pub tgt: usize,
    pub score: f64,
}

/// Corpus BLEU (0–100) of every translated source section against every
/// target section, each section scored as one segment.
pub fn section_scores<S: AsRef<str> + Sync>(src_translated: &[Vec<S>], tgt: &[Vec<S>], case_fold: bool) -> Result<Vec<Vec<f64>>> {
    let params = BleuParams {
        case_fold,
        ..Default::default()
    };
    let join = |sec: &[S]| sec.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ");
    let tgt_joined: Vec<String> = tgt.iter().map(|t| join(t)).collect();
    src_translated
        .par_iter()
        .map(|s| {
            let s = join(s);
            tgt_joined
                .iter()
                .map(|t| {
                    if s.trim().is_empty() || t.trim().is_empty() {
                        Ok(0.0)
                    } else {
                        corpus_bleu_text(&[s.as_str()], &[t.as_str()], &params)
                    }
                })
                .collect()
        })
        .collect()
}

/// Greedy one-to-one matching by descending score over all cells above
/// `threshold`; ties go to the lower source, then lower target index.
pub fn match_from_scores(scores: &[Vec<f64>], threshold: f64) -> Vec<SectionMatch> {
    let mut cells: Vec<SectionMatch> = scores
        .iter()
        .enumerate()
        .flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, &s)| s > threshold)
                .map(move |(j, &s)| SectionMatch { src: i, tgt: j, score: s })
        })
        .collect();
    cells.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.src.cmp(&b.src)).then(a.tgt.cmp(&b.tgt)));
    let mut used_src = BTreeSet::new();
    let mut used_tgt = BTreeSet::new();
    let mut out = Vec::new();
    for c in cells {
        if !used_src.contains(&c.src) && !used_tgt.contains(&c.tgt) {
            used_src.insert(c.src);
            used_tgt.insert(c.tgt);
            out.push(c);
        }
    }
    out.sort_by_key(|c| c.src);
    out
}

pub fn match_wiki_sections<S: AsRef<str> + Sync>(
    src_sections_translated: &[Vec<S>],
    tgt_sections: &[Vec<S>],
    threshold: f64,
    case_fold: bool,
) -> Result<Vec<SectionMatch>> {
    if src_sections_translated.is_empty() || tgt_sections.is_empty() {
        return Ok(Vec::new());
    }
    let scores = section_scores(src_sections_translated, tgt_sections, case_fold)?;
    Ok(match_from_scores(&scores, threshold))
}

/// Splits a file into sections at blank lines; each non-blank line is one
/// sentence.
pub fn read_sections(path: impl AsRef<Path>) -> Result<Vec<Vec<String>>> {
    let text = read_utf8(path)?;
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        } else {
            cur.push(line.trim().to_owned());
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    Ok(out)
}

pub fn neighborhood_name(mode: Neighborhood) -> &'static str {
    match mode {
        Neighborhood::Document => "document",
        Neighborhood::Batch => "batch",
        Neighborhood::Global => "global",
    }
}
