//! Synthetic inputs for the benchmarks.

use bitext_core::{EmbeddingMatrix, SentencePair};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const WORDS: [&str; 12] = [
    "the", "river", "rain", "city", "school", "government", "match", "water", "doctor", "road", "people", "day",
];

pub fn sentence(rng: &mut StdRng, n_words: usize) -> String {
    let words: Vec<&str> = (0..n_words).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect();
    format!("{}.", words.join(" "))
}

/// Two documents of `n` sentences each with roughly proportional lengths.
pub fn document_pair(n: usize, seed: u64) -> (Vec<String>, Vec<String>) {
    let mut rng = StdRng::seed_from_u64(seed);
    let src: Vec<String> = (0..n)
        .map(|_| {
            let len = rng.gen_range(4..20);
            sentence(&mut rng, len)
        })
        .collect();
    let tgt = src
        .iter()
        .map(|s| {
            let words = s.split(' ').count() + rng.gen_range(0..3);
            sentence(&mut rng, words.saturating_sub(1).max(1))
        })
        .collect();
    (src, tgt)
}

/// Raw text of `n` sentences, with an abbreviation now and then.
pub fn raw_text(n: usize, seed: u64) -> String {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let len = rng.gen_range(4..20);
            let s = sentence(&mut rng, len);
            if i % 7 == 0 {
                format!("Dr. {s}")
            } else {
                s
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn unit(rng: &mut StdRng, dim: usize) -> Vec<f32> {
    let v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// `n` pairs with embeddings where each target is a noisy copy of its source.
pub fn embedded_pairs(n: usize, dim: usize, seed: u64) -> (Vec<SentencePair>, EmbeddingMatrix, EmbeddingMatrix) {
    let mut rng = StdRng::seed_from_u64(seed);
    let pairs = (0..n)
        .map(|i| SentencePair::new(format!("s{i}"), format!("t{i}")).unwrap())
        .collect();
    let src: Vec<Vec<f32>> = (0..n).map(|_| unit(&mut rng, dim)).collect();
    let tgt: Vec<Vec<f32>> = src
        .iter()
        .map(|s| {
            let noise = unit(&mut rng, dim);
            s.iter().zip(noise).map(|(a, b)| a + 0.5 * b).collect()
        })
        .collect();
    (
        pairs,
        EmbeddingMatrix::from_rows(src).unwrap(),
        EmbeddingMatrix::from_rows(tgt).unwrap(),
    )
}
