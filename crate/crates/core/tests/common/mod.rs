//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn walkthrough_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/walkthrough")
}

/// Kendall's tau by comparing every ordered pair of distinct links.
pub fn tau_oracle(links: &[(usize, usize)]) -> Option<f64> {
    let (mut c, mut d) = (0i64, 0i64);
    for (i, a) in links.iter().enumerate() {
        for (j, b) in links.iter().enumerate() {
            if i == j || a.0 == b.0 || a.1 == b.1 {
                continue;
            }
            if (a.0 < b.0) == (a.1 < b.1) {
                c += 1;
            } else {
                d += 1;
            }
        }
    }
    // Each unordered pair was seen twice.
    let (c, d) = (c / 2, d / 2);
    (c + d > 0).then(|| (c - d) as f64 / (c + d) as f64)
}

pub struct TerGolden {
    pub hyp: Vec<String>,
    pub reference: Vec<String>,
    pub edits: usize,
}

pub fn ter_goldens() -> Vec<TerGolden> {
    let text = std::fs::read_to_string(fixture("ter_golden.tsv")).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            TerGolden {
                hyp: f[0].split(' ').map(str::to_string).collect(),
                reference: f[1].split(' ').map(str::to_string).collect(),
                edits: f[2].parse().unwrap(),
            }
        })
        .collect()
}

/// Random symbol sequences over an alphabet of at most 8 symbols.
pub fn random_symbol_pairs(n: usize, seed: u64) -> Vec<(Vec<u8>, Vec<u8>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let k = rng.gen_range(1..=8u8);
            let h = (0..rng.gen_range(1..=12)).map(|_| rng.gen_range(0..k)).collect();
            let r = (0..rng.gen_range(1..=12)).map(|_| rng.gen_range(0..k)).collect();
            (h, r)
        })
        .collect()
}

/// Interpolated absolute discounting for a bigram model, straight from
/// counts. `<s>`/`</s>` padding, no unknown-word mapping.
pub struct BigramOracle {
    unigram: HashMap<String, f64>,
    bigram: HashMap<(String, String), f64>,
    context: HashMap<String, f64>,
    followers: HashMap<String, HashSet<String>>,
    total: f64,
    outcomes: f64,
    discount: f64,
}

impl BigramOracle {
    pub fn new(sentences: &[&str], discount: f64) -> Self {
        let mut o = BigramOracle {
            unigram: HashMap::new(),
            bigram: HashMap::new(),
            context: HashMap::new(),
            followers: HashMap::new(),
            total: 0.0,
            outcomes: 0.0,
            discount,
        };
        for s in sentences {
            let mut words = vec!["<s>".to_string()];
            words.extend(s.split_whitespace().map(str::to_string));
            words.push("</s>".to_string());
            for w in words.windows(2) {
                *o.unigram.entry(w[1].clone()).or_default() += 1.0;
                *o.bigram.entry((w[0].clone(), w[1].clone())).or_default() += 1.0;
                *o.context.entry(w[0].clone()).or_default() += 1.0;
                o.followers.entry(w[0].clone()).or_default().insert(w[1].clone());
                o.total += 1.0;
            }
        }
        // Every seen word, </s>, and <unk>.
        o.outcomes = o.unigram.len() as f64 + if o.unigram.contains_key("<unk>") { 0.0 } else { 1.0 };
        o
    }

    pub fn unigram(&self, w: &str) -> f64 {
        let c = self.unigram.get(w).copied().unwrap_or(0.0);
        let types = self.unigram.len() as f64;
        (c - self.discount).max(0.0) / self.total + self.discount * types / self.total / self.outcomes
    }

    pub fn bigram(&self, h: &str, w: &str) -> f64 {
        let Some(ch) = self.context.get(h) else {
            return self.unigram(w);
        };
        let c = self
            .bigram
            .get(&(h.to_string(), w.to_string()))
            .copied()
            .unwrap_or(0.0);
        let n1 = self.followers[h].len() as f64;
        (c - self.discount).max(0.0) / ch + self.discount * n1 / ch * self.unigram(w)
    }
}

/// Synthetic corpus over `vocab` words with Zipf-like frequencies.
pub fn synthetic_corpus(sentences: usize, vocab: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..sentences)
        .map(|_| {
            let n = rng.gen_range(3..=20);
            (0..n)
                .map(|_| {
                    let r: f64 = rng.gen();
                    let idx = ((vocab as f64).powf(r) as usize).min(vocab) - 1;
                    format!("w{idx}")
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}
