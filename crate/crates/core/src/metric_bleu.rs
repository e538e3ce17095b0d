//! Single-reference corpus BLEU compatible with the standard reference
//! implementation: 13a tokenization, clipped 1..4-gram precisions pooled
//! over the corpus, exponential smoothing, and the usual brevity penalty.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Tokenizer {
    #[default]
    Thirteen,
    None,
}

impl Tokenizer {
    pub fn name(self) -> &'static str {
        match self {
            Tokenizer::Thirteen => "13a",
            Tokenizer::None => "none",
        }
    }

    pub fn tokenize(self, text: &str) -> Vec<String> {
        match self {
            Tokenizer::Thirteen => tokenize_13a(text),
            Tokenizer::None => text.split_whitespace().map(str::to_string).collect(),
        }
    }
}

impl FromStr for Tokenizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "13a" => Ok(Tokenizer::Thirteen),
            "none" => Ok(Tokenizer::None),
            other => Err(Error::Invalid(format!("unknown tokenizer {other:?}"))),
        }
    }
}

struct Rules {
    punct: Regex,
    period_comma_after: Regex,
    period_comma_before: Regex,
    dash_after_digit: Regex,
}

fn rules() -> &'static Rules {
    static RULES: OnceLock<Rules> = OnceLock::new();
    RULES.get_or_init(|| Rules {
        // ASCII punctuation and symbols other than period, comma, dash
        // and apostrophe.
        punct: Regex::new(r"([\{-~\[-` -&\(-\+:-@/])").unwrap(),
        period_comma_after: Regex::new(r"([^0-9])([\.,])").unwrap(),
        period_comma_before: Regex::new(r"([\.,])([^0-9])").unwrap(),
        dash_after_digit: Regex::new(r"([0-9])(-)").unwrap(),
    })
}

/// mteval-v13a tokenization.
pub fn tokenize_13a(text: &str) -> Vec<String> {
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
    let r = rules();
    let line = format!(" {line} ");
    let line = r.punct.replace_all(&line, " ${1} ");
    let line = r.period_comma_after.replace_all(&line, "${1} ${2} ");
    let line = r.period_comma_before.replace_all(&line, " ${1} ${2}");
    let line = r.dash_after_digit.replace_all(&line, "${1} ${2} ");
    line.split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BleuConfig {
    pub tokenizer: Tokenizer,
    pub lowercase: bool,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig {
            tokenizer: Tokenizer::Thirteen,
            lowercase: false,
        }
    }
}

impl BleuConfig {
    /// Signature string in the reference tool's format.
    pub fn signature(&self) -> String {
        format!(
            "BLEU+case.{}+numrefs.1+smooth.exp+tok.{}+version.{}-{}",
            if self.lowercase { "lc" } else { "mixed" },
            self.tokenizer.name(),
            env!("CARGO_PKG_NAME"),
            env!("CARGO_PKG_VERSION"),
        )
    }
}

/// Sufficient statistics; merging is element-wise addition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BleuStats {
    pub correct: [u64; MAX_ORDER],
    pub total: [u64; MAX_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuStats {
    fn merge(mut self, other: BleuStats) -> BleuStats {
        for n in 0..MAX_ORDER {
            self.correct[n] += other.correct[n];
            self.total[n] += other.total[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
        self
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

pub fn sentence_stats(hyp: &[String], reference: &[String]) -> BleuStats {
    let mut s = BleuStats {
        hyp_len: hyp.len() as u64,
        ref_len: reference.len() as u64,
        ..Default::default()
    };
    for n in 1..=MAX_ORDER {
        let h = ngram_counts(hyp, n);
        let r = ngram_counts(reference, n);
        s.total[n - 1] = hyp.len().saturating_sub(n - 1) as u64;
        s.correct[n - 1] = h
            .iter()
            .map(|(g, c)| (*c).min(r.get(g).copied().unwrap_or(0)))
            .sum();
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct BleuResult {
    /// Per-order precisions in percent, after smoothing.
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: u64,
    pub ref_len: u64,
    pub score: f64,
    pub stats: BleuStats,
}

/// Score from pooled statistics. The k-th order with no matches gets
/// precision `1 / (2^k * total)`; no matches at all, or an order with no
/// hypothesis n-grams, scores 0.
pub fn score_from_stats(stats: &BleuStats) -> BleuResult {
    let bp = if stats.hyp_len < stats.ref_len {
        if stats.hyp_len > 0 {
            (1.0 - stats.ref_len as f64 / stats.hyp_len as f64).exp()
        } else {
            0.0
        }
    } else {
        1.0
    };
    let mut precisions = [0.0; MAX_ORDER];
    let mut result = BleuResult {
        precisions,
        brevity_penalty: bp,
        hyp_len: stats.hyp_len,
        ref_len: stats.ref_len,
        score: 0.0,
        stats: *stats,
    };
    if stats.correct.iter().all(|&c| c == 0) {
        return result;
    }

    let mut smooth = 1.0;
    for n in 0..MAX_ORDER {
        if stats.total[n] == 0 {
            result.precisions = precisions;
            return result;
        }
        precisions[n] = if stats.correct[n] == 0 {
            smooth *= 2.0;
            100.0 / (smooth * stats.total[n] as f64)
        } else {
            100.0 * stats.correct[n] as f64 / stats.total[n] as f64
        };
    }
    let mean_log = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
    result.precisions = precisions;
    result.score = bp * mean_log.exp();
    result
}

pub fn corpus_bleu<S: AsRef<str> + Sync>(hyps: &[S], refs: &[S], config: &BleuConfig) -> Result<BleuResult> {
    if hyps.len() != refs.len() {
        return Err(Error::LengthMismatch {
            left: hyps.len(),
            right: refs.len(),
        });
    }
    if hyps.is_empty() {
        return Err(Error::Empty("BLEU corpus"));
    }
    let prep = |s: &str| {
        let toks = config.tokenizer.tokenize(s);
        if config.lowercase {
            toks.into_iter().map(|t| t.to_lowercase()).collect()
        } else {
            toks
        }
    };
    let stats = hyps
        .par_iter()
        .zip(refs.par_iter())
        .map(|(h, r)| sentence_stats(&prep(h.as_ref()), &prep(r.as_ref())))
        .reduce(BleuStats::default, BleuStats::merge);
    Ok(score_from_stats(&stats))
}

impl fmt::Display for BleuResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ratio = if self.ref_len > 0 {
            self.hyp_len as f64 / self.ref_len as f64
        } else {
            0.0
        };
        write!(
            f,
            "{:.2} {:.1}/{:.1}/{:.1}/{:.1} (BP = {:.3} ratio = {:.3} hyp_len = {} ref_len = {})",
            self.score,
            self.precisions[0],
            self.precisions[1],
            self.precisions[2],
            self.precisions[3],
            self.brevity_penalty,
            ratio,
            self.hyp_len,
            self.ref_len
        )
    }
}
