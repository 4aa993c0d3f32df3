//! Alignment precision/recall/F1 against a gold pair set, and BLEU with a
//! 13a-style tokenizer.
//!
//! Sentence-level BLEU is returned on a 0–1 scale, corpus-level BLEU on a
//! 0–100 scale.

use std::collections::{HashMap, HashSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{collapse_whitespace, AlignReport, SentencePair};
use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 4;

/// Set-semantics key for a pair: whitespace collapsed, optionally lowercased.
pub fn pair_key(src: &str, tgt: &str, case_fold: bool) -> (String, String) {
    let (s, t) = (collapse_whitespace(src), collapse_whitespace(tgt));
    if case_fold {
        (s.to_lowercase(), t.to_lowercase())
    } else {
        (s, t)
    }
}

/// Deduplicated reference pairs.
#[derive(Debug, Clone)]
pub struct GoldSet {
    pairs: HashSet<(String, String)>,
    case_fold: bool,
}

impl GoldSet {
    pub fn new<'a>(pairs: impl IntoIterator<Item = &'a SentencePair>, case_fold: bool) -> Result<Self> {
        let pairs: HashSet<_> = pairs
            .into_iter()
            .map(|p| pair_key(&p.src, &p.tgt, case_fold))
            .collect();
        if pairs.is_empty() {
            return Err(Error::Contract("gold set is empty".into()));
        }
        Ok(GoldSet { pairs, case_fold })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn case_fold(&self) -> bool {
        self.case_fold
    }

    pub fn contains(&self, pair: &SentencePair) -> bool {
        self.pairs
            .contains(&pair_key(&pair.src, &pair.tgt, self.case_fold))
    }
}

/// Scores a predicted pair list against gold. Predictions are deduplicated
/// under the gold set's normalization first.
pub fn precision_recall_f1(pred: &[SentencePair], gold: &GoldSet) -> AlignReport {
    let predicted: HashSet<_> = pred
        .iter()
        .map(|p| pair_key(&p.src, &p.tgt, gold.case_fold))
        .collect();
    let correct = predicted.iter().filter(|k| gold.pairs.contains(*k)).count();
    AlignReport::from_counts(predicted.len(), gold.len(), correct)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BleuParams {
    /// Highest n-gram order, 1..=4.
    pub max_ngram: usize,
    /// Add-one smoothing of zero n-gram matches for orders >= 2.
    pub smooth: bool,
    pub case_fold: bool,
}

impl Default for BleuParams {
    fn default() -> Self {
        BleuParams {
            max_ngram: MAX_ORDER,
            smooth: true,
            case_fold: false,
        }
    }
}

impl BleuParams {
    fn validate(&self) -> Result<()> {
        if !(1..=MAX_ORDER).contains(&self.max_ngram) {
            return Err(Error::Contract(format!(
                "max_ngram must be in 1..={MAX_ORDER}, got {}",
                self.max_ngram
            )));
        }
        Ok(())
    }
}

static SYMBOLS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"([{-~\[-` -&(-+:-@/])").unwrap());
static PERIOD_COMMA_AFTER_NON_DIGIT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"([^0-9])([\.,])").unwrap());
static PERIOD_COMMA_BEFORE_NON_DIGIT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"([\.,])([^0-9])").unwrap());
static DASH_AFTER_DIGIT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"([0-9])(-)").unwrap());

/// mteval-v13a tokenization.
pub fn tokenize_13a(text: &str, case_fold: bool) -> Vec<String> {
    let mut line = text
        .replace("<skipped>", "")
        .replace("-\n", "")
        .replace('\n', " ");
    if line.contains('&') {
        line = line
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    if case_fold {
        line = line.to_lowercase();
    }
    let line = format!(" {line} ");
    let line = SYMBOLS.replace_all(&line, " $1 ");
    let line = PERIOD_COMMA_AFTER_NON_DIGIT.replace_all(&line, "$1 $2 ");
    let line = PERIOD_COMMA_BEFORE_NON_DIGIT.replace_all(&line, " $1 $2");
    let line = DASH_AFTER_DIGIT.replace_all(&line, "$1 $2 ");
    line.split_whitespace().map(str::to_owned).collect()
}

/// Clipped n-gram match counts and totals, plus lengths for the brevity
/// penalty. Index `n - 1` holds order `n`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NgramStats {
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl std::ops::AddAssign for NgramStats {
    fn add_assign(&mut self, o: Self) {
        for n in 0..MAX_ORDER {
            self.matches[n] += o.matches[n];
            self.totals[n] += o.totals[n];
        }
        self.hyp_len += o.hyp_len;
        self.ref_len += o.ref_len;
    }
}

fn ngram_counts<T: AsRef<str>>(tokens: &[T], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts
                .entry(w.iter().map(AsRef::as_ref).collect())
                .or_insert(0) += 1;
        }
    }
    counts
}

/// Closest reference length to `hyp_len`; ties go to the shorter reference.
fn closest_ref_len<T>(hyp_len: usize, refs: &[Vec<T>]) -> usize {
    refs.iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(hyp_len), r))
        .unwrap_or(0)
}

pub fn ngram_stats<T: AsRef<str>>(hyp: &[T], refs: &[Vec<T>], max_ngram: usize) -> Result<NgramStats> {
    if refs.is_empty() || refs.iter().any(Vec::is_empty) {
        return Err(Error::Contract("BLEU needs at least one non-empty reference".into()));
    }
    let mut st = NgramStats {
        hyp_len: hyp.len(),
        ref_len: closest_ref_len(hyp.len(), refs),
        ..Default::default()
    };
    for n in 1..=max_ngram.min(MAX_ORDER) {
        let hyp_counts = ngram_counts(hyp, n);
        let mut max_ref: HashMap<Vec<&str>, usize> = HashMap::new();
        for r in refs {
            for (g, c) in ngram_counts(r, n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(c);
            }
        }
        st.totals[n - 1] = hyp.len().saturating_sub(n - 1);
        st.matches[n - 1] = hyp_counts
            .iter()
            .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
            .sum();
    }
    Ok(st)
}

/// BLEU on a 0–1 scale from aggregated statistics. Orders with no
/// hypothesis n-grams at all are left out of the geometric mean.
pub fn bleu_from_stats(st: &NgramStats, max_ngram: usize, smooth: bool) -> f64 {
    if st.hyp_len == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    let mut orders = 0usize;
    for n in 1..=max_ngram.min(MAX_ORDER) {
        let (m, t) = (st.matches[n - 1], st.totals[n - 1]);
        if t == 0 {
            continue;
        }
        orders += 1;
        let p = if m > 0 {
            m as f64 / t as f64
        } else if smooth && n >= 2 {
            1.0 / (t as f64 + 1.0)
        } else {
            return 0.0;
        };
        log_sum += p.ln();
    }
    if orders == 0 {
        return 0.0;
    }
    let (c, r) = (st.hyp_len as f64, st.ref_len as f64);
    let bp = if c >= r { 1.0 } else { (1.0 - r / c).exp() };
    bp * (log_sum / orders as f64).exp()
}

pub fn sentence_bleu<T: AsRef<str>>(hyp: &[T], refs: &[Vec<T>], params: &BleuParams) -> Result<f64> {
    params.validate()?;
    let st = ngram_stats(hyp, refs, params.max_ngram)?;
    Ok(bleu_from_stats(&st, params.max_ngram, params.smooth))
}

/// Corpus BLEU (0–100): statistics are summed over segments before the
/// precisions are formed. Never smoothed.
pub fn corpus_bleu<T: AsRef<str>>(hyps: &[Vec<T>], refs_list: &[Vec<Vec<T>>], params: &BleuParams) -> Result<f64> {
    params.validate()?;
    if hyps.is_empty() {
        return Err(Error::Contract("corpus BLEU over an empty corpus".into()));
    }
    if hyps.len() != refs_list.len() {
        return Err(Error::Contract(format!(
            "{} hypotheses but {} reference sets",
            hyps.len(),
            refs_list.len()
        )));
    }
    let mut total = NgramStats::default();
    for (h, refs) in hyps.iter().zip(refs_list) {
        total += ngram_stats(h, refs, params.max_ngram)?;
    }
    Ok(100.0 * bleu_from_stats(&total, params.max_ngram, false))
}

/// Corpus BLEU of raw sentences against a single reference stream.
pub fn corpus_bleu_text<S: AsRef<str>>(hyps: &[S], refs: &[S], params: &BleuParams) -> Result<f64> {
    let hyps: Vec<_> = hyps
        .iter()
        .map(|h| tokenize_13a(h.as_ref(), params.case_fold))
        .collect();
    let refs: Vec<_> = refs
        .iter()
        .map(|r| vec![tokenize_13a(r.as_ref(), params.case_fold)])
        .collect();
    corpus_bleu(&hyps, &refs, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    fn sp(a: &str, b: &str) -> SentencePair {
        SentencePair::new(a, b).unwrap()
    }

    #[test]
    fn prf_identity_and_hand_example() {
        let gold_pairs = [sp("a", "b"), sp("c", "e")];
        let gold = GoldSet::new(&gold_pairs, false).unwrap();
        let r = precision_recall_f1(&gold_pairs, &gold);
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));

        let r = precision_recall_f1(&[sp("a", "b"), sp("c", "d")], &gold);
        assert_eq!((r.precision, r.recall, r.f1), (0.5, 0.5, 0.5));
        assert_eq!((r.n_pred, r.n_gold, r.n_correct), (2, 2, 1));
    }

    #[test]
    fn prf_dedups_prediction_under_normalization() {
        let gold = GoldSet::new(&[sp("a  b", "c")], false).unwrap();
        let r = precision_recall_f1(&[sp("a b", "c"), sp(" a b ", "c")], &gold);
        assert_eq!((r.n_pred, r.n_correct), (1, 1));
        let empty: [SentencePair; 0] = [];
        let r = precision_recall_f1(&empty, &gold);
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        assert!(GoldSet::new(&empty, false).is_err());
    }

    #[test]
    fn f1_of_hunalign_row() {
        let f1 = crate::corpus::f1_score(0.9321, 0.8582);
        assert!((f1 - 0.8937).abs() < 1e-4, "{f1}");
    }

    #[test]
    fn tokenizes_13a() {
        assert_eq!(tokenize_13a("Hello, world!", false), ["Hello", ",", "world", "!"]);
        assert!(tokenize_13a("", false).is_empty());
        assert_eq!(tokenize_13a("It costs $3.50, ok.", false), ["It", "costs", "$", "3.50", ",", "ok", "."]);
        assert_eq!(tokenize_13a("1,000 and 2-3", false), ["1,000", "and", "2", "-", "3"]);
        assert_eq!(tokenize_13a("Tom &amp; Jerry", true), ["tom", "&", "jerry"]);
        assert_eq!(tokenize_13a("আমি ভাত খাই।", false), ["আমি", "ভাত", "খাই।"]);
        // the reference regexes do not split a comma glued to a digit after
        // another period or comma
        assert_eq!(tokenize_13a(".,0", false), [".", ",0"]);
    }

    #[test]
    fn bleu_identity_is_one() {
        let h = toks("the cat sat on the mat today");
        let s = sentence_bleu(&h, &[h.clone()], &BleuParams::default()).unwrap();
        assert_eq!(s, 1.0);
    }

    #[test]
    fn clipped_unigram_precision() {
        let h = toks("the the the the the the the");
        let r = toks("the cat is on the mat");
        let st = ngram_stats(&h, &[r], 4).unwrap();
        assert_eq!((st.matches[0], st.totals[0]), (2, 7));
    }

    #[test]
    fn short_perfect_match_equals_brevity_penalty() {
        let r = toks("a b c d e f g h");
        let h = toks("a b c d e f");
        let s = sentence_bleu(&h, &[r], &BleuParams::default()).unwrap();
        let bp = (1.0f64 - 8.0 / 6.0).exp();
        assert!((s - bp).abs() < 1e-12);
        assert!(s < 1.0);
    }

    #[test]
    fn empty_hypothesis_scores_zero() {
        let h: Vec<String> = vec![];
        assert_eq!(sentence_bleu(&h, &[toks("a b")], &BleuParams::default()).unwrap(), 0.0);
        assert!(sentence_bleu(&toks("a"), &[vec![]], &BleuParams::default()).is_err());
        let empty: [Vec<String>; 0] = [];
        assert!(sentence_bleu(&toks("a"), &empty, &BleuParams::default()).is_err());
    }

    #[test]
    fn smoothing_only_affects_zero_higher_orders() {
        let h = toks("a b c d");
        let r = toks("a c b d");
        let plain = BleuParams { smooth: false, ..Default::default() };
        assert_eq!(sentence_bleu(&h, &[r.clone()], &plain).unwrap(), 0.0);
        let smoothed = sentence_bleu(&h, &[r], &BleuParams::default()).unwrap();
        // p1 = 1, p2 = 1/(3+1), p3 = 1/(2+1), p4 = 1/(1+1)
        let expect = (0.0f64 + (0.25f64).ln() + (1.0f64 / 3.0).ln() + (0.5f64).ln()) / 4.0;
        assert!((smoothed - expect.exp()).abs() < 1e-12);
    }

    #[test]
    fn multi_reference_clip_takes_max() {
        let h = toks("the the");
        let st = ngram_stats(&h, &[toks("the cat"), toks("the the dog")], 1).unwrap();
        assert_eq!(st.matches[0], 2);
        // closest length: |2-2| = 0 wins over |3-2|
        assert_eq!(st.ref_len, 2);
    }

    #[test]
    fn corpus_bleu_identity_and_errors() {
        let c = vec![toks("one two three four five"), toks("six seven eight nine")];
        let refs: Vec<_> = c.iter().map(|s| vec![s.clone()]).collect();
        assert_eq!(corpus_bleu(&c, &refs, &BleuParams::default()).unwrap(), 100.0);
        let empty: Vec<Vec<String>> = vec![];
        assert!(corpus_bleu(&empty, &[], &BleuParams::default()).is_err());
        assert!(corpus_bleu(&c, &refs[..1], &BleuParams::default()).is_err());
    }

    #[test]
    fn single_segment_corpus_matches_unsmoothed_sentence_bleu() {
        let h = toks("the quick brown fox jumps over the dog");
        let r = toks("the quick brown fox jumped over the lazy dog");
        let plain = BleuParams { smooth: false, ..Default::default() };
        let s = sentence_bleu(&h, &[r.clone()], &plain).unwrap();
        let c = corpus_bleu(&[h], &[vec![r]], &BleuParams::default()).unwrap();
        assert!(s > 0.0);
        assert!((c - 100.0 * s).abs() < 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn words() -> impl Strategy<Value = Vec<String>> {
            proptest::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e"]), 0..12)
                .prop_map(|v| v.into_iter().map(str::to_owned).collect())
        }

        proptest! {
            #[test]
            fn bleu_in_unit_interval(h in words(), r in words().prop_filter("non-empty", |r| !r.is_empty())) {
                let s = sentence_bleu(&h, &[r.clone()], &BleuParams::default()).unwrap();
                prop_assert!((0.0..=1.0).contains(&s));
                if s == 1.0 {
                    prop_assert_eq!(&h, &r);
                }
            }

            #[test]
            fn tokenizer_is_idempotent(
                s in proptest::collection::vec("[A-Za-z]{1,6}[.,!?;:]?|[0-9]{1,4}([.,][0-9]{1,3})?|[()\"'$%&/-]", 0..12)
                    .prop_map(|v| v.join(" "))
            ) {
                let t = tokenize_13a(&s, false);
                prop_assert_eq!(tokenize_13a(&t.join(" "), false), t);
            }

            #[test]
            fn prf_permutation_invariant(mut pred in proptest::collection::vec((0u8..5, 0u8..5), 0..10)) {
                let gold_pairs = vec![sp("0", "0"), sp("1", "1"), sp("2", "3")];
                let gold = GoldSet::new(&gold_pairs, false).unwrap();
                let mk = |v: &[(u8, u8)]| v.iter().map(|(a, b)| sp(&a.to_string(), &b.to_string())).collect::<Vec<_>>();
                let a = precision_recall_f1(&mk(&pred), &gold);
                pred.reverse();
                let b = precision_recall_f1(&mk(&pred), &gold);
                prop_assert_eq!(a, b);
            }
        }
    }
}
