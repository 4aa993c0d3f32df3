use serde::{Deserialize, Serialize};

use crate::corpus::AlignmentLink;
use crate::error::{Error, Result};
use crate::metrics::{sentence_bleu, tokenize_13a, BleuParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BleuAlignParams {
    #[serde(default = "default_max_ngram")]
    pub max_ngram: usize,
    #[serde(default = "default_threshold")]
    pub anchor_threshold: f64,
    #[serde(default = "yes")]
    pub gap_fill: bool,
}

fn default_max_ngram() -> usize {
    2
}
fn default_threshold() -> f64 {
    0.10
}
fn yes() -> bool {
    true
}

impl Default for BleuAlignParams {
    fn default() -> Self {
        BleuAlignParams {
            max_ngram: 2,
            anchor_threshold: 0.10,
            gap_fill: true,
        }
    }
}

impl BleuAlignParams {
    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.max_ngram) {
            return Err(Error::Config(format!("max_ngram must be in 1..=4, got {}", self.max_ngram)));
        }
        if !(0.0..=1.0).contains(&self.anchor_threshold) {
            return Err(Error::Config(format!(
                "anchor_threshold must be in [0, 1], got {}",
                self.anchor_threshold
            )));
        }
        Ok(())
    }

    fn bleu(&self) -> BleuParams {
        BleuParams {
            max_ngram: self.max_ngram,
            smooth: true,
            case_fold: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub src: usize,
    pub tgt: usize,
    pub sim: f64,
}

fn similarity_matrix<S: AsRef<str>>(translated: &[S], tgt: &[S], params: &BleuAlignParams) -> Result<Vec<Vec<f64>>> {
    let bp = params.bleu();
    let hyp: Vec<Vec<String>> = translated.iter().map(|s| tokenize_13a(s.as_ref(), true)).collect();
    let refs: Vec<Vec<Vec<String>>> = tgt.iter().map(|s| vec![tokenize_13a(s.as_ref(), true)]).collect();
    hyp.iter()
        .map(|h| {
            refs.iter()
                .map(|r| {
                    if h.is_empty() || r[0].is_empty() {
                        Ok(0.0)
                    } else {
                        sentence_bleu(h, r, &bp)
                    }
                })
                .collect()
        })
        .collect()
}

/// Strictly monotone 1-1 anchors of maximum total similarity, every one at
/// or above the threshold. Ties prefer taking the diagonal, then skipping a
/// source sentence, then skipping a target sentence.
pub fn bleu_anchors<S: AsRef<str>>(translated: &[S], tgt: &[S], params: &BleuAlignParams) -> Result<Vec<Anchor>> {
    params.validate()?;
    let sim = similarity_matrix(translated, tgt, params)?;
    Ok(best_anchors(&sim, params.anchor_threshold))
}

fn best_anchors(sim: &[Vec<f64>], threshold: f64) -> Vec<Anchor> {
    let n = sim.len();
    let m = sim.first().map_or(0, Vec::len);
    let width = m + 1;
    let mut score = vec![0.0f64; (n + 1) * width];
    // 0 diagonal, 1 up (skip source), 2 left (skip target)
    let mut step = vec![0u8; (n + 1) * width];
    for i in 0..=n {
        for j in 0..=m {
            if i == 0 && j == 0 {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            let mut how = 0;
            if i > 0 && j > 0 && sim[i - 1][j - 1] >= threshold {
                best = score[(i - 1) * width + j - 1] + sim[i - 1][j - 1];
            }
            if i > 0 && score[(i - 1) * width + j] > best {
                best = score[(i - 1) * width + j];
                how = 1;
            }
            if j > 0 && score[i * width + j - 1] > best {
                best = score[i * width + j - 1];
                how = 2;
            }
            score[i * width + j] = best;
            step[i * width + j] = how;
        }
    }
    let mut anchors = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 && j > 0 {
        match step[i * width + j] {
            0 => {
                anchors.push(Anchor {
                    src: i - 1,
                    tgt: j - 1,
                    sim: sim[i - 1][j - 1],
                });
                i -= 1;
                j -= 1;
            }
            1 => i -= 1,
            _ => j -= 1,
        }
    }
    anchors.reverse();
    anchors
}

/// Translation-based alignment. `translated[i]` is a machine translation of
/// source sentence `i` into the target language; `n_source` is the number of
/// source sentences and must match. Emits 1-1 links only.
pub fn align_bleu<S: AsRef<str>>(
    n_source: usize,
    translated: &[S],
    tgt: &[S],
    params: &BleuAlignParams,
) -> Result<Vec<AlignmentLink>> {
    if translated.len() != n_source {
        return Err(Error::Contract(format!(
            "translation has {} lines but the source has {n_source} sentences",
            translated.len()
        )));
    }
    let anchors = bleu_anchors(translated, tgt, params)?;
    let mut links = Vec::with_capacity(anchors.len());
    for (k, a) in anchors.iter().enumerate() {
        if params.gap_fill && k > 0 {
            let prev = anchors[k - 1];
            let gap_src = a.src - prev.src - 1;
            let gap_tgt = a.tgt - prev.tgt - 1;
            if gap_src == gap_tgt {
                for d in 1..=gap_src {
                    links.push(AlignmentLink::one_to_one(prev.src + d, prev.tgt + d));
                }
            }
        }
        links.push(AlignmentLink::one_to_one(a.src, a.tgt));
    }
    Ok(links)
}
