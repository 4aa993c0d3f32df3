use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use bitext_core::align::{
    align_bleu, align_bullets, align_length, BilingualLexicon, BleuAlignParams, LengthAlignParams, Method,
};
use bitext_core::corpus::{AlignReport, Origin, SentencePair};
use bitext_core::ensemble::{ensemble_union, EnsembleInput};
use bitext_core::error::{Error, Result};
use bitext_core::filter::{score_pairs, FilterParams, Neighborhood};
use bitext_core::io::{
    read_embeddings, read_pairs, read_sentences, read_utf8, write_links, write_pairs, write_sentences, write_string,
};
use bitext_core::metrics::{corpus_bleu, precision_recall_f1, tokenize_13a, BleuParams, GoldSet};
use bitext_core::pipeline::{
    default_sweep_margins, match_wiki_sections, read_sections, run_pipeline, sweep_csv, sweep_scores, PipelineConfig,
};
use bitext_core::preprocess::{
    quality_filter_eval, remove_leakage, run_steps, EvalFilterRules, EvalThresholds, LeakMode, NormalizationTable,
    PreprocessOptions, Step,
};
use bitext_core::segment::{load_rules, segment_sentences, SegmenterRules};

#[derive(Parser)]
#[command(name = "bitext", version, about = "Build sentence-aligned parallel corpora from document pairs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Split raw text into one sentence per line.
    Segment {
        /// Extra abbreviations, one per line.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Align two documents and write a link file.
    Align {
        #[arg(long)]
        method: Method,
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        /// Bilingual lexicon for the length aligner.
        #[arg(long)]
        dict: Option<PathBuf>,
        /// Machine translation of the source, line-aligned with it.
        #[arg(long)]
        translation: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the aligned pairs as TSV.
        #[arg(long)]
        pairs_out: Option<PathBuf>,
    },
    /// Union the pairs of several aligners per document.
    Ensemble {
        #[arg(long, value_delimiter = ',', required = true)]
        members: Vec<String>,
        /// Directory laid out as <aligner>/<doc_id>.tsv
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Margin-filter sentence pairs with precomputed embeddings.
    Filter {
        #[command(flatten)]
        f: FilterArgs,
        #[arg(long, default_value_t = 0.96)]
        margin: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Precision, recall and F1 of predicted pairs against gold pairs.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Compare case-insensitively.
        #[arg(long)]
        lc: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Corpus BLEU of a hypothesis file against one or more references.
    Bleu {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        r#ref: Vec<PathBuf>,
        #[arg(long)]
        lc: bool,
    },
    /// Clean sentence pairs.
    Preprocess {
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "normalize,foreign,translit,dedup")]
        steps: Vec<Step>,
        #[arg(long, default_value_t = 10)]
        foreign_min_len: usize,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Remove evaluation pairs from training data.
    Leak {
        #[arg(long)]
        train: PathBuf,
        #[arg(long = "eval", num_args = 1.., required = true)]
        eval: Vec<PathBuf>,
        #[arg(long, default_value = "both")]
        mode: LeakMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply the length, transliteration and OOV filters to evaluation pairs.
    Evalfilter {
        /// TOML file with min_chars, max_chars, max_translit_frac,
        /// max_oov_frac and max_oov_count; defaults when omitted.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        translit: Option<PathBuf>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Rejected pairs with the id of the rule they failed.
        #[arg(long)]
        rejected: Option<PathBuf>,
    },
    /// Precision, recall and F1 over a range of margins.
    Sweep {
        #[command(flatten)]
        f: FilterArgs,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        lc: bool,
        /// Comma-separated margins; 0.90 to 1.10 in steps of 0.01 by default.
        #[arg(long, value_delimiter = ',')]
        margins: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Match translated source sections to target sections by BLEU.
    WikiMatch {
        /// Translated source sections, blank-line separated.
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long, default_value_t = 20.0)]
        threshold: f64,
        /// Score with case preserved.
        #[arg(long)]
        cased: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the whole pipeline from a config file.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(clap::Args)]
struct FilterArgs {
    #[arg(long, default_value = "batch")]
    mode: Neighborhood,
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = 1000)]
    batch_size: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    src_emb: PathBuf,
    #[arg(long)]
    tgt_emb: PathBuf,
    /// Document id of every pair, one per line; needed for document mode.
    #[arg(long)]
    doc_ids: Option<PathBuf>,
}

impl FilterArgs {
    fn params(&self, margin: f64) -> FilterParams {
        FilterParams {
            k: self.k,
            margin,
            mode: self.mode,
            batch_size: self.batch_size,
            seed: self.seed,
        }
    }

    fn load_pairs(&self) -> Result<Vec<SentencePair>> {
        let mut pairs = read_pairs(&self.pairs)?;
        match &self.doc_ids {
            Some(p) => {
                let ids = read_sentences(p)?;
                if ids.len() != pairs.len() {
                    return Err(Error::Validation(format!(
                        "{} document ids for {} pairs",
                        ids.len(),
                        pairs.len()
                    )));
                }
                for (pair, id) in pairs.iter_mut().zip(ids) {
                    let link = bitext_core::corpus::AlignmentLink::one_to_one(0, 0);
                    pair.origin = Some(Origin { doc_id: id, link });
                }
            }
            None if self.mode == Neighborhood::Document => {
                return Err(Error::Config("document mode needs --doc-ids".into()));
            }
            None => {}
        }
        Ok(pairs)
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_string(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn gold_set(path: &Path, lc: bool) -> Result<GoldSet> {
    GoldSet::new(&read_pairs(path)?, lc)
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Segment { rules, input, out } => {
            let rules = match rules {
                Some(p) => load_rules(&p, None)?,
                None => SegmenterRules::default(),
            };
            let sentences = segment_sentences(&read_utf8(&input)?, &rules);
            write_sentences(&out, &sentences)?;
            eprintln!("{} sentences", sentences.len());
        }
        Cmd::Align {
            method,
            src,
            tgt,
            dict,
            translation,
            out,
            pairs_out,
        } => {
            let pairs;
            let links = match method {
                Method::Bullets => {
                    let a = align_bullets(&read_utf8(&src)?, &read_utf8(&tgt)?);
                    for d in &a.diagnostics {
                        eprintln!("{d}");
                    }
                    pairs = a
                        .links
                        .iter()
                        .map(|l| SentencePair::new(&a.src_units[l.src()[0]], &a.tgt_units[l.tgt()[0]]))
                        .collect::<Result<Vec<_>>>()?;
                    a.links
                }
                Method::Length | Method::Bleu => {
                    let s = read_sentences(&src)?;
                    let t = read_sentences(&tgt)?;
                    let links = if method == Method::Length {
                        let params = LengthAlignParams {
                            dictionary: dict.map(|d| BilingualLexicon::load(d).map(Arc::new)).transpose()?,
                            ..Default::default()
                        };
                        align_length(&s, &t, &params)?
                    } else {
                        let tr = translation
                            .ok_or_else(|| Error::Config("the bleu method needs --translation".into()))?;
                        align_bleu(s.len(), &read_sentences(&tr)?, &t, &BleuAlignParams::default())?
                    };
                    let doc = bitext_core::corpus::DocumentPair::new(
                        "doc",
                        bitext_core::corpus::Document::new("src", "src", &s)?,
                        bitext_core::corpus::Document::new("tgt", "tgt", &t)?,
                    )?;
                    pairs = bitext_core::corpus::expand_links(&links, &doc)?;
                    links
                }
            };
            write_links(&out, &links)?;
            if let Some(p) = pairs_out {
                write_pairs(&p, &pairs)?;
            }
            eprintln!("{} links", links.len());
        }
        Cmd::Ensemble { members, input, out } => {
            let inp = EnsembleInput::load_dir(&input)?;
            let union = ensemble_union(&inp, &members)?;
            let pairs: Vec<SentencePair> = union.into_values().flatten().collect();
            write_pairs(&out, &pairs)?;
            eprintln!("{} pairs", pairs.len());
        }
        Cmd::Filter { f, margin, out, report } => {
            let pairs = f.load_pairs()?;
            let params = f.params(margin);
            let scores = score_pairs(&pairs, &read_embeddings(&f.src_emb)?, &read_embeddings(&f.tgt_emb)?, &params)?;
            let kept: Vec<SentencePair> = scores.kept_indices(margin).into_iter().map(|i| pairs[i].clone()).collect();
            write_pairs(&out, &kept)?;
            let rep = scores.report(margin);
            if let Some(p) = report {
                write_string(&p, &to_json(&rep))?;
            }
            eprintln!("kept {} of {} ({:.2}% filtered)", rep.n_kept, rep.n_in, rep.pct_filtered);
        }
        Cmd::Eval { pred, gold, lc, out } => {
            let r: AlignReport = precision_recall_f1(&read_pairs(&pred)?, &gold_set(&gold, lc)?);
            emit(out.as_deref(), &to_json(&r))?;
        }
        Cmd::Bleu { hyp, r#ref, lc } => {
            let params = BleuParams {
                case_fold: lc,
                ..Default::default()
            };
            let hyps = read_utf8(&hyp)?;
            let hyps: Vec<Vec<String>> = hyps.lines().map(|l| tokenize_13a(l, lc)).collect();
            let mut refs: Vec<Vec<Vec<String>>> = vec![Vec::new(); hyps.len()];
            for r in &r#ref {
                let text = read_utf8(r)?;
                let lines: Vec<&str> = text.lines().collect();
                if lines.len() != hyps.len() {
                    return Err(Error::Validation(format!(
                        "{} has {} lines, hypothesis has {}",
                        r.display(),
                        lines.len(),
                        hyps.len()
                    )));
                }
                for (slot, l) in refs.iter_mut().zip(lines) {
                    slot.push(tokenize_13a(l, lc));
                }
            }
            println!("{:.2}", corpus_bleu(&hyps, &refs, &params)?);
        }
        Cmd::Preprocess {
            table,
            steps,
            foreign_min_len,
            input,
            out,
        } => {
            let opts = PreprocessOptions {
                table: match table {
                    Some(p) => NormalizationTable::load(p)?,
                    None => NormalizationTable::builtin(),
                },
                foreign_min_len,
                ..PreprocessOptions::with_builtin_table()
            };
            let pairs = read_pairs(&input)?;
            let n_in = pairs.len();
            let (kept, notes) = run_steps(pairs, &steps, &opts);
            for n in &notes {
                eprintln!("{n}");
            }
            write_pairs(&out, &kept)?;
            eprintln!("{} of {n_in} pairs kept", kept.len());
        }
        Cmd::Leak { train, eval, mode, out } => {
            let eval_sets = eval.iter().map(read_pairs).collect::<Result<Vec<_>>>()?;
            let (kept, dropped) = remove_leakage(&read_pairs(&train)?, &eval_sets, mode);
            write_pairs(&out, &kept)?;
            eprintln!("dropped {dropped} leaked pairs");
        }
        Cmd::Evalfilter {
            rules,
            vocab,
            translit,
            input,
            out,
            rejected,
        } => {
            let thresholds: EvalThresholds = match rules {
                Some(p) => toml::from_str(&read_utf8(&p)?)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
                None => EvalThresholds::default(),
            };
            let r = EvalFilterRules {
                thresholds,
                vocab: EvalFilterRules::load_tokens(&vocab)?,
                translit_lexicon: match translit {
                    Some(p) => EvalFilterRules::load_tokens(p)?,
                    None => HashSet::new(),
                },
            };
            let (kept, rej) = quality_filter_eval(&read_pairs(&input)?, &r)?;
            write_pairs(&out, &kept)?;
            if let Some(p) = rejected {
                let text: String = rej
                    .iter()
                    .map(|(p, rule)| format!("{}\t{}\t{}\n", rule.id(), p.src, p.tgt))
                    .collect();
                write_string(&p, &text)?;
            }
            eprintln!("kept {}, rejected {}", kept.len(), rej.len());
        }
        Cmd::Sweep {
            f,
            gold,
            lc,
            margins,
            out,
        } => {
            let margins = if margins.is_empty() {
                default_sweep_margins()
            } else {
                margins
            };
            let pairs = f.load_pairs()?;
            let params = f.params(margins[0]);
            let scores = score_pairs(&pairs, &read_embeddings(&f.src_emb)?, &read_embeddings(&f.tgt_emb)?, &params)?;
            let rows = sweep_scores(&pairs, &scores, &margins, &gold_set(&gold, lc)?);
            emit(out.as_deref(), &sweep_csv(&rows))?;
        }
        Cmd::WikiMatch {
            src,
            tgt,
            threshold,
            cased,
            out,
        } => {
            let m = match_wiki_sections(&read_sections(&src)?, &read_sections(&tgt)?, threshold, !cased)?;
            let text: String = m.iter().map(|c| format!("{}\t{}\t{:.2}\n", c.src, c.tgt, c.score)).collect();
            emit(out.as_deref(), &text)?;
        }
        Cmd::Pipeline { config } => {
            let cfg = PipelineConfig::load(&config)?;
            let report = run_pipeline(&cfg)?;
            eprintln!(
                "{} documents, {} pairs written to {}",
                report.documents,
                report.pairs_out,
                cfg.output_dir.join("pairs.tsv").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
