#![allow(dead_code)]

use std::path::PathBuf;

use bitext_core::align::{gale_church_cost, Bead, LengthAlignParams};
use bitext_core::{AlignmentLink, EmbeddingMatrix, SentencePair};
use rand::rngs::StdRng;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/bn_en_5doc")
}

pub fn pair(s: impl AsRef<str>, t: impl AsRef<str>) -> SentencePair {
    SentencePair::new(s, t).unwrap()
}

/// Weighted sum of basis directions, as f32.
pub fn combine(dim: usize, parts: &[(usize, f64)]) -> Vec<f32> {
    let mut v = vec![0.0f64; dim];
    for &(axis, w) in parts {
        v[axis] += w;
    }
    v.into_iter().map(|x| x as f32).collect()
}

/// Unit vector with i.i.d. normal coordinates.
pub fn random_unit(rng: &mut StdRng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

pub fn mix(parts: &[(f64, &[f64])]) -> Vec<f32> {
    let dim = parts[0].1.len();
    (0..dim)
        .map(|i| parts.iter().map(|(w, v)| w * v[i]).sum::<f64>() as f32)
        .collect()
}

pub fn matrix(rows: Vec<Vec<f32>>) -> EmbeddingMatrix {
    EmbeddingMatrix::from_rows(rows).unwrap()
}

fn cos(x: &[f32], y: &[f32]) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| f64::from(*a) * f64::from(*b)).sum();
    let nx: f64 = x.iter().map(|a| f64::from(*a).powi(2)).sum::<f64>().sqrt();
    let ny: f64 = y.iter().map(|a| f64::from(*a).powi(2)).sum::<f64>().sqrt();
    dot / (nx * ny)
}

/// Ratio margin of every pair computed by scanning all other pairs of the
/// same group, written independently of the library.
pub fn brute_force_margins(src: &[Vec<f32>], tgt: &[Vec<f32>], groups: &[Vec<usize>], k: usize) -> Vec<Option<f64>> {
    let mut out = vec![None; src.len()];
    for g in groups {
        for &i in g {
            let mut nx: Vec<f64> = g.iter().filter(|&&j| j != i).map(|&j| cos(&src[i], &tgt[j])).collect();
            let mut ny: Vec<f64> = g.iter().filter(|&&j| j != i).map(|&j| cos(&tgt[i], &src[j])).collect();
            nx.sort_by(|a, b| b.partial_cmp(a).unwrap());
            ny.sort_by(|a, b| b.partial_cmp(a).unwrap());
            nx.truncate(k);
            ny.truncate(k);
            if nx.is_empty() {
                continue;
            }
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let denom = (mean(&nx) + mean(&ny)) / 2.0;
            if denom > 0.0 {
                out[i] = Some(cos(&src[i], &tgt[i]) / denom);
            }
        }
    }
    out
}

/// Source and target documents built from a known bead sequence, with target
/// lengths close to `ratio` times the source lengths of each bead. Only beads
/// that can satisfy that (1-1, 2-1, 1-2, 2-2) are drawn, and the two sides of
/// a 2-2 bead are split at mirrored points so it is not two 1-1 beads.
pub struct Generated {
    pub src: Vec<String>,
    pub tgt: Vec<String>,
    pub links: Vec<AlignmentLink>,
}

fn split_len(total: usize, parts: usize, frac: f64) -> Vec<usize> {
    if parts == 1 {
        return vec![total.max(1)];
    }
    let cut = ((total as f64 * frac).round() as usize).clamp(1, total - 1);
    vec![cut, total - cut]
}

pub fn generate_document(rng: &mut StdRng, n_src: usize, ratio: f64) -> Generated {
    let mut src = Vec::new();
    let mut tgt = Vec::new();
    let mut links = Vec::new();
    while src.len() < n_src {
        let roll: f64 = rng.gen();
        let bead = match roll {
            r if r < 0.80 => Bead::OneOne,
            r if r < 0.88 => Bead::TwoOne,
            r if r < 0.96 => Bead::OneTwo,
            _ => Bead::TwoTwo,
        };
        let (ns, nt) = bead.counts();
        let total_src: usize = if bead == Bead::TwoTwo { rng.gen_range(80..160) } else { rng.gen_range(30..160) };
        let noise: f64 = rng.sample::<f64, _>(StandardNormal) * 0.5 * (total_src as f64).sqrt();
        let total_tgt = ((total_src as f64 * ratio + noise).round() as usize).max(2);
        let s0 = src.len();
        let t0 = tgt.len();
        let (fs, ft) = if bead == Bead::TwoTwo {
            let f = rng.gen_range(0.2..0.3);
            (f, 1.0 - f)
        } else {
            (rng.gen_range(0.35..0.65), rng.gen_range(0.35..0.65))
        };
        for l in split_len(total_src, ns, fs) {
            src.push("a".repeat(l));
        }
        for l in split_len(total_tgt, nt, ft) {
            tgt.push("b".repeat(l));
        }
        links.push(AlignmentLink::new((s0..s0 + ns).collect(), (t0..t0 + nt).collect()).unwrap());
    }
    Generated { src, tgt, links }
}

/// Total length cost of a bead sequence given as links.
pub fn links_cost(links: &[AlignmentLink], src: &[String], tgt: &[String], params: &LengthAlignParams) -> f64 {
    links
        .iter()
        .map(|l| {
            let l1: usize = l.src().iter().map(|&i| src[i].chars().count()).sum();
            let l2: usize = l.tgt().iter().map(|&j| tgt[j].chars().count()).sum();
            let bead = Bead::from_counts(l.src().len(), l.tgt().len()).unwrap();
            gale_church_cost(l1, l2, bead, params)
        })
        .sum()
}
