//! Building a sentence-aligned parallel corpus from document-aligned
//! bilingual text: rule-based segmentation, three sentence aligners, union
//! ensembles, margin filtering over sentence embeddings, corpus hygiene and
//! the evaluation metrics used to tune all of it.

pub mod align;
pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod filter;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;
pub mod segment;

pub use align::{
    align_bleu, align_bullets, align_length, gale_church_cost, Bead, BilingualLexicon, BleuAlignParams,
    LengthAlignParams, Method,
};
pub use corpus::{
    expand_links, parse_link_line, serialize_link, AlignReport, AlignmentLink, Document, DocumentPair, Origin,
    SentencePair,
};
pub use ensemble::{ensemble_union, name_ensemble, EnsembleInput};
pub use error::{Error, Result};
pub use filter::{
    batch_filter, cosine, filter_pool, knn, margin_score, EmbeddingMatrix, FilterParams, FilterReport, Neighborhood,
};
pub use metrics::{corpus_bleu, precision_recall_f1, sentence_bleu, tokenize_13a, BleuParams, GoldSet};
pub use pipeline::{match_wiki_sections, run_pipeline, sweep_margin, PipelineConfig, RunReport};
pub use preprocess::{
    dedup, normalize_text, quality_filter_eval, remove_leakage, remove_shared_foreign, transliterate_dangling,
    EvalFilterRules, LeakMode, NormalizationTable,
};
pub use segment::{load_rules, segment, SegmenterRules, Span};
