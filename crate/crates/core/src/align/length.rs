use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::{lexical_tokens, BilingualLexicon};
use crate::corpus::AlignmentLink;
use crate::error::{Error, Result};

/// Shape of an alignment bead: how many source and target sentences it
/// covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bead {
    OneOne,
    OneZero,
    ZeroOne,
    TwoOne,
    OneTwo,
    TwoTwo,
}

impl Bead {
    /// Evaluation order in the DP; earlier beads win ties.
    pub const ALL: [Bead; 6] = [
        Bead::OneOne,
        Bead::TwoOne,
        Bead::OneTwo,
        Bead::TwoTwo,
        Bead::OneZero,
        Bead::ZeroOne,
    ];

    pub fn counts(self) -> (usize, usize) {
        match self {
            Bead::OneOne => (1, 1),
            Bead::OneZero => (1, 0),
            Bead::ZeroOne => (0, 1),
            Bead::TwoOne => (2, 1),
            Bead::OneTwo => (1, 2),
            Bead::TwoTwo => (2, 2),
        }
    }

    pub fn from_counts(src: usize, tgt: usize) -> Option<Bead> {
        Bead::ALL.into_iter().find(|b| b.counts() == (src, tgt))
    }
}

/// Prior probability of each bead shape. Need not sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeadPriors {
    pub one_one: f64,
    pub one_zero: f64,
    pub zero_one: f64,
    pub two_one: f64,
    pub one_two: f64,
    pub two_two: f64,
}

impl Default for BeadPriors {
    fn default() -> Self {
        BeadPriors {
            one_one: 0.89,
            one_zero: 0.0099,
            zero_one: 0.0099,
            two_one: 0.089,
            one_two: 0.089,
            two_two: 0.011,
        }
    }
}

impl BeadPriors {
    pub fn get(&self, bead: Bead) -> f64 {
        match bead {
            Bead::OneOne => self.one_one,
            Bead::OneZero => self.one_zero,
            Bead::ZeroOne => self.zero_one,
            Bead::TwoOne => self.two_one,
            Bead::OneTwo => self.one_two,
            Bead::TwoTwo => self.two_two,
        }
    }

    fn sum(&self) -> f64 {
        Bead::ALL.iter().map(|&b| self.get(b)).sum()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LengthAlignParams {
    /// Expected target characters per source character.
    #[serde(default = "one")]
    pub mean_ratio: f64,
    /// Variance of the length difference per source character.
    #[serde(default = "default_variance")]
    pub variance: f64,
    #[serde(default)]
    pub priors: BeadPriors,
    #[serde(skip)]
    pub dictionary: Option<Arc<BilingualLexicon>>,
    #[serde(default = "default_dict_weight")]
    pub dict_weight: f64,
}

fn one() -> f64 {
    1.0
}
fn default_variance() -> f64 {
    6.8
}
fn default_dict_weight() -> f64 {
    0.35
}

impl Default for LengthAlignParams {
    fn default() -> Self {
        LengthAlignParams {
            mean_ratio: 1.0,
            variance: 6.8,
            priors: BeadPriors::default(),
            dictionary: None,
            dict_weight: 0.35,
        }
    }
}

impl LengthAlignParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.variance > 0.0) || !(self.mean_ratio > 0.0) {
            return Err(Error::Config("mean_ratio and variance must be positive".into()));
        }
        if Bead::ALL.iter().any(|&b| !(self.priors.get(b) > 0.0)) {
            return Err(Error::Config("bead priors must be positive".into()));
        }
        if self.priors.sum() > 1.2 {
            return Err(Error::Config(format!(
                "bead priors sum to {} (> 1.2)",
                self.priors.sum()
            )));
        }
        if !(0.0..=1.0).contains(&self.dict_weight) {
            return Err(Error::Config("dict_weight must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// `-ln(2 (1 - Φ(|δ|)))`, continued asymptotically where `erfc` underflows.
fn neg_log_two_tail(delta: f64) -> f64 {
    let z = delta.abs() / std::f64::consts::SQRT_2;
    let p = erfc(z);
    if p > 1e-300 {
        -p.ln()
    } else {
        z * z + (z * std::f64::consts::PI.sqrt()).ln()
    }
}

/// Gale–Church cost of a bead whose sides hold `l1` and `l2` characters.
pub fn gale_church_cost(l1: usize, l2: usize, bead: Bead, params: &LengthAlignParams) -> f64 {
    let (l1, l2) = (l1 as f64, l2 as f64);
    let (c, s2) = (params.mean_ratio, params.variance);
    let delta = if l1 > 0.0 {
        (l2 - l1 * c) / (l1 * s2).sqrt()
    } else if l2 > 0.0 {
        let mean = (l1 + l2 / c) / 2.0;
        (l2 - l1 * c) / (mean * s2).sqrt()
    } else {
        0.0
    };
    -params.priors.get(bead).ln() + neg_log_two_tail(delta)
}

struct Side {
    chars: Vec<usize>,
    tokens: Vec<Vec<String>>,
}

impl Side {
    fn new<S: AsRef<str>>(sentences: &[S], with_tokens: bool) -> Self {
        Side {
            chars: sentences.iter().map(|s| s.as_ref().chars().count()).collect(),
            tokens: if with_tokens {
                sentences.iter().map(|s| lexical_tokens(s.as_ref())).collect()
            } else {
                Vec::new()
            },
        }
    }

    fn len_of(&self, start: usize, n: usize) -> usize {
        self.chars[start..start + n].iter().sum()
    }
}

fn bead_cost(
    src: &Side,
    tgt: &Side,
    i: usize,
    j: usize,
    bead: Bead,
    params: &LengthAlignParams,
) -> f64 {
    let (a, b) = bead.counts();
    let mut cost = gale_church_cost(src.len_of(i, a), tgt.len_of(j, b), bead, params);
    if let Some(lex) = &params.dictionary {
        if a > 0 && b > 0 {
            let src_toks: Vec<String> = src.tokens[i..i + a].concat();
            let tgt_toks: HashSet<String> = tgt.tokens[j..j + b].iter().flatten().cloned().collect();
            cost -= params.dict_weight * lex.overlap(&src_toks, &tgt_toks);
        }
    }
    cost
}

/// Minimum-cost monotone bead sequence and its total cost.
pub fn align_length_with_cost<S: AsRef<str>>(
    src: &[S],
    tgt: &[S],
    params: &LengthAlignParams,
) -> Result<(Vec<AlignmentLink>, f64)> {
    params.validate()?;
    if src.is_empty() || tgt.is_empty() {
        return Err(Error::Contract("length alignment needs sentences on both sides".into()));
    }
    let with_tokens = params.dictionary.is_some();
    let s = Side::new(src, with_tokens);
    let t = Side::new(tgt, with_tokens);
    let (n, m) = (src.len(), tgt.len());
    let width = m + 1;
    let mut cost = vec![f64::INFINITY; (n + 1) * width];
    let mut back: Vec<Option<Bead>> = vec![None; (n + 1) * width];
    cost[0] = 0.0;
    for i in 0..=n {
        for j in 0..=m {
            if i == 0 && j == 0 {
                continue;
            }
            let mut best = f64::INFINITY;
            let mut best_bead = None;
            for bead in Bead::ALL {
                let (a, b) = bead.counts();
                if a > i || b > j {
                    continue;
                }
                let prev = cost[(i - a) * width + (j - b)];
                if !prev.is_finite() {
                    continue;
                }
                let c = prev + bead_cost(&s, &t, i - a, j - b, bead, params);
                if c < best {
                    best = c;
                    best_bead = Some(bead);
                }
            }
            cost[i * width + j] = best;
            back[i * width + j] = best_bead;
        }
    }

    let mut links = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let bead = back[i * width + j].expect("every cell is reachable through 1-0 and 0-1 beads");
        let (a, b) = bead.counts();
        i -= a;
        j -= b;
        links.push(AlignmentLink::span(i, a, j, b)?);
    }
    links.reverse();
    Ok((links, cost[n * width + m]))
}

/// Length-based alignment by dynamic programming over the beads 1-1, 2-1,
/// 1-2, 2-2, 1-0 and 0-1. Every sentence appears in exactly one link.
pub fn align_length<S: AsRef<str>>(src: &[S], tgt: &[S], params: &LengthAlignParams) -> Result<Vec<AlignmentLink>> {
    align_length_with_cost(src, tgt, params).map(|(links, _)| links)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text_of_len(n: usize) -> String {
        "x".repeat(n)
    }

    #[test]
    fn equal_lengths_cost_is_prior_only() {
        let p = LengthAlignParams::default();
        let c = gale_church_cost(100, 100, Bead::OneOne, &p);
        assert!((c - 0.11653).abs() < 1e-4, "{c}");
        assert!((c + 0.89f64.ln()).abs() < 1e-12);
        assert!(gale_church_cost(37, 37, Bead::OneOne, &p) < gale_church_cost(37, 37, Bead::TwoTwo, &p));
    }

    #[test]
    fn cost_grows_with_mismatch_and_stays_finite() {
        let p = LengthAlignParams::default();
        let near = gale_church_cost(100, 105, Bead::OneOne, &p);
        let far = gale_church_cost(100, 300, Bead::OneOne, &p);
        let extreme = gale_church_cost(1, 100_000, Bead::OneOne, &p);
        assert!(near < far && far < extreme);
        assert!(extreme.is_finite());
        assert!(gale_church_cost(0, 20, Bead::ZeroOne, &p).is_finite());
        assert!(gale_church_cost(20, 0, Bead::OneZero, &p).is_finite());
    }

    #[test]
    fn asymptotic_tail_matches_exact_tail() {
        for z in [20.0f64, 24.0, 26.0] {
            let exact = -erfc(z).ln();
            let approx = z * z + (z * std::f64::consts::PI.sqrt()).ln();
            assert!((exact - approx).abs() < 2e-3, "{z}: {exact} vs {approx}");
        }
        let costs: Vec<f64> = (0..80)
            .map(|i| neg_log_two_tail(f64::from(i) * std::f64::consts::SQRT_2))
            .collect();
        assert!(costs.windows(2).all(|w| w[1] > w[0]));
        assert!(costs.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn single_sentences_align() {
        let links = align_length(&["abc"], &["abcd"], &LengthAlignParams::default()).unwrap();
        assert_eq!(links, [AlignmentLink::one_to_one(0, 0)]);
    }

    #[test]
    fn empty_side_is_rejected() {
        let empty: [&str; 0] = [];
        assert!(matches!(
            align_length(&empty, &["a"], &LengthAlignParams::default()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn identical_documents_align_one_to_one() {
        for n in 1..=5 {
            let doc: Vec<String> = (0..n).map(|_| text_of_len(40)).collect();
            let links = align_length(&doc, &doc, &LengthAlignParams::default()).unwrap();
            let expected: Vec<_> = (0..n).map(|i| AlignmentLink::one_to_one(i, i)).collect();
            assert_eq!(links, expected);
        }
    }

    #[test]
    fn recovers_two_to_one_merge() {
        let src = [text_of_len(50), text_of_len(30), text_of_len(80), text_of_len(60)];
        let tgt = [text_of_len(50), text_of_len(110), text_of_len(60)];
        let links = align_length(&src, &tgt, &LengthAlignParams::default()).unwrap();
        assert_eq!(
            links,
            [
                AlignmentLink::one_to_one(0, 0),
                AlignmentLink::span(1, 2, 1, 1).unwrap(),
                AlignmentLink::one_to_one(3, 2)
            ]
        );
    }

    #[test]
    fn dictionary_lowers_cost_of_translated_beads() {
        let mut lex = BilingualLexicon::new();
        lex.insert("ভাত", "rice").unwrap();
        lex.insert("মাছ", "fish").unwrap();
        let src = ["ভাত খাই।", "মাছ ভাজা।"];
        let tgt = ["eat rice.", "fried fish."];
        let (plain_links, plain) = align_length_with_cost(&src, &tgt, &LengthAlignParams::default()).unwrap();
        let with_dict = LengthAlignParams {
            dictionary: Some(Arc::new(lex)),
            dict_weight: 0.5,
            ..Default::default()
        };
        let (links, boosted) = align_length_with_cost(&src, &tgt, &with_dict).unwrap();
        assert_eq!(links, plain_links);
        assert_eq!(links.len(), 2);
        // each 1-1 bead has half its source words translated
        assert!((plain - boosted - 2.0 * 0.5 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn param_validation() {
        let mut p = LengthAlignParams::default();
        p.variance = 0.0;
        assert!(p.validate().is_err());
        let mut p = LengthAlignParams::default();
        p.priors.one_one = 1.0;
        p.priors.two_one = 0.2;
        assert!(p.validate().is_err());
        let mut p = LengthAlignParams::default();
        p.priors.zero_one = 0.0;
        assert!(p.validate().is_err());
    }
}
