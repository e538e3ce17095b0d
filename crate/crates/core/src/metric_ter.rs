//! Translation edit rate with greedy block shifts, its POS-tag variant,
//! and Kendall's tau over raw word alignments.
//!
//! The shift search follows the usual TER recipe: at every step try each
//! block of the hypothesis that matches the reference somewhere else, move
//! it next to where the reference alignment wants it, and keep the move
//! that lowers the remaining edit distance the most. Stop when no move
//! helps. Each accepted shift costs one edit.

use std::collections::HashMap;
use std::hash::Hash;

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tagging::TaggedSentence;

pub const MAX_SHIFT_SIZE: usize = 10;
pub const MAX_SHIFT_DIST: usize = 50;

/// Edit counts use the usual TER reading: an insertion is an extra
/// hypothesis symbol, a deletion a reference symbol the hypothesis lacks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerResult {
    pub insertions: usize,
    pub deletions: usize,
    pub substitutions: usize,
    pub shifts: usize,
    pub ref_len: usize,
    pub score: f64,
}

impl TerResult {
    pub fn edits(&self) -> usize {
        self.insertions + self.deletions + self.substitutions + self.shifts
    }
}

/// Unit-cost insert/delete/substitute distance.
pub fn levenshtein<T: PartialEq>(hyp: &[T], reference: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=reference.len()).collect();
    let mut cur = vec![0; reference.len() + 1];
    for (i, h) in hyp.iter().enumerate() {
        cur[0] = i + 1;
        for (j, r) in reference.iter().enumerate() {
            let sub = prev[j] + usize::from(h != r);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[reference.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Match,
    Sub,
    /// Consumes a hypothesis symbol only.
    HypOnly,
    /// Consumes a reference symbol only.
    RefOnly,
}

/// Edit distance plus one optimal operation trace. On equal cost the
/// diagonal step wins, then hypothesis-only, then reference-only; this is
/// the preference order that reproduces tercom's alignments.
fn edit_trace(hyp: &[u32], reference: &[u32]) -> (usize, Vec<Op>) {
    let (n, m) = (hyp.len(), reference.len());
    let width = m + 1;
    let mut cost = vec![0usize; (n + 1) * width];
    let mut op = vec![Op::RefOnly; (n + 1) * width];
    for (j, c) in cost.iter_mut().take(width).enumerate() {
        *c = j;
    }
    for i in 1..=n {
        cost[i * width] = i;
        op[i * width] = Op::HypOnly;
        for j in 1..=m {
            let (diag_cost, diag_op) = if hyp[i - 1] == reference[j - 1] {
                (cost[(i - 1) * width + j - 1], Op::Match)
            } else {
                (cost[(i - 1) * width + j - 1] + 1, Op::Sub)
            };
            let mut best = (diag_cost, diag_op);
            let up = cost[(i - 1) * width + j] + 1;
            if up < best.0 {
                best = (up, Op::HypOnly);
            }
            let left = cost[i * width + j - 1] + 1;
            if left < best.0 {
                best = (left, Op::RefOnly);
            }
            cost[i * width + j] = best.0;
            op[i * width + j] = best.1;
        }
    }

    let mut trace = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let o = op[i * width + j];
        trace.push(o);
        match o {
            Op::Match | Op::Sub => {
                i -= 1;
                j -= 1;
            }
            Op::HypOnly => i -= 1,
            Op::RefOnly => j -= 1,
        }
    }
    trace.reverse();
    (cost[n * width + m], trace)
}

struct Alignment {
    /// For each reference position, the hypothesis position it is aligned
    /// to (or the last hypothesis position before it; -1 at the start).
    ref_to_hyp: Vec<isize>,
    ref_err: Vec<bool>,
    hyp_err: Vec<bool>,
}

fn alignment(trace: &[Op]) -> Alignment {
    let mut pos_hyp: isize = -1;
    let mut a = Alignment {
        ref_to_hyp: Vec::new(),
        ref_err: Vec::new(),
        hyp_err: Vec::new(),
    };
    for &o in trace {
        match o {
            Op::Match | Op::Sub => {
                pos_hyp += 1;
                a.ref_to_hyp.push(pos_hyp);
                a.hyp_err.push(o == Op::Sub);
                a.ref_err.push(o == Op::Sub);
            }
            Op::HypOnly => {
                pos_hyp += 1;
                a.hyp_err.push(true);
            }
            Op::RefOnly => {
                a.ref_to_hyp.push(pos_hyp);
                a.ref_err.push(true);
            }
        }
    }
    a
}

/// Moves `words[start..start + len]` so that it lands before position
/// `target` of the original sequence.
fn perform_shift(words: &[u32], start: usize, len: usize, target: usize) -> Vec<u32> {
    let n = words.len();
    let block = &words[start..start + len];
    let mut out = Vec::with_capacity(n);
    if target < start {
        out.extend_from_slice(&words[..target]);
        out.extend_from_slice(block);
        out.extend_from_slice(&words[target..start]);
        out.extend_from_slice(&words[start + len..]);
    } else if target > start + len {
        out.extend_from_slice(&words[..start]);
        out.extend_from_slice(&words[start + len..target]);
        out.extend_from_slice(block);
        out.extend_from_slice(&words[target..]);
    } else {
        let mid = (len + target).min(n);
        out.extend_from_slice(&words[..start]);
        out.extend_from_slice(&words[start + len..mid.max(start + len)]);
        out.extend_from_slice(block);
        out.extend_from_slice(&words[mid.max(start + len)..]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct ShiftKey {
    start: usize,
    dest: usize,
    len: usize,
}

/// Best single shift: `(gain, shifted hypothesis)`, or `None` when no
/// candidate exists. Equal gains go to the smallest (start, destination,
/// length).
fn best_shift(hyp: &[u32], reference: &[u32], current: usize, trace: &[Op]) -> Option<(usize, Vec<u32>)> {
    let align = alignment(trace);
    let mut best: Option<(usize, ShiftKey, Vec<u32>)> = None;

    for start_h in 0..hyp.len() {
        for start_r in 0..reference.len() {
            if start_h.abs_diff(start_r) > MAX_SHIFT_DIST {
                continue;
            }
            let mut len = 0;
            while len < MAX_SHIFT_SIZE
                && start_h + len < hyp.len()
                && start_r + len < reference.len()
                && hyp[start_h + len] == reference[start_r + len]
            {
                len += 1;

                // The block must cover a misaligned hypothesis symbol and
                // a misaligned reference position.
                if !align.hyp_err[start_h..start_h + len].iter().any(|&e| e) {
                    continue;
                }
                if !align.ref_err[start_r..start_r + len].iter().any(|&e| e) {
                    continue;
                }
                // Already sitting where the reference wants it.
                let anchor = align.ref_to_hyp[start_r];
                if anchor >= start_h as isize && anchor < (start_h + len) as isize {
                    continue;
                }

                let mut prev_dest = None;
                for offset in -1..len as isize {
                    let r = start_r as isize + offset;
                    let dest = if r == -1 {
                        0
                    } else {
                        (align.ref_to_hyp[r as usize] + 1) as usize
                    };
                    if prev_dest == Some(dest) {
                        continue;
                    }
                    prev_dest = Some(dest);

                    let shifted = perform_shift(hyp, start_h, len, dest);
                    let (after, _) = edit_trace(&shifted, reference);
                    let gain = current as isize - after as isize;
                    if gain <= 0 {
                        continue;
                    }
                    let gain = gain as usize;
                    let key = ShiftKey {
                        start: start_h,
                        dest,
                        len,
                    };
                    let better = match &best {
                        None => true,
                        Some((g, k, _)) => gain > *g || (gain == *g && key < *k),
                    };
                    if better {
                        best = Some((gain, key, shifted));
                    }
                }
            }
        }
    }
    best.map(|(gain, _, shifted)| (gain, shifted))
}

fn ter_ids(hyp: &[u32], reference: &[u32]) -> TerResult {
    let mut current = hyp.to_vec();
    let mut shifts = 0;
    let (mut dist, mut trace) = edit_trace(&current, reference);
    while let Some((_, shifted)) = best_shift(&current, reference, dist, &trace) {
        shifts += 1;
        current = shifted;
        (dist, trace) = edit_trace(&current, reference);
    }

    let mut r = TerResult {
        insertions: 0,
        deletions: 0,
        substitutions: 0,
        shifts,
        ref_len: reference.len(),
        score: 0.0,
    };
    for o in trace {
        match o {
            Op::Match => {}
            Op::Sub => r.substitutions += 1,
            Op::HypOnly => r.insertions += 1,
            Op::RefOnly => r.deletions += 1,
        }
    }
    debug_assert_eq!(r.edits(), shifts + dist);
    r.score = r.edits() as f64 / r.ref_len as f64;
    r
}

fn intern<'a, T: Eq + Hash>(xs: &'a [T], ids: &mut HashMap<&'a T, u32>) -> Vec<u32> {
    xs.iter()
        .map(|x| {
            let next = ids.len() as u32;
            *ids.entry(x).or_insert(next)
        })
        .collect()
}

/// TER of `hyp` against `reference` over arbitrary symbols.
///
/// An empty reference is an error; an empty hypothesis scores 1.0.
pub fn ter<T: Eq + Hash>(hyp: &[T], reference: &[T]) -> Result<TerResult> {
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    if hyp.is_empty() {
        warn!("empty hypothesis scored as all deletions");
    }
    let mut ids: HashMap<&T, u32> = HashMap::new();
    let r = intern(reference, &mut ids);
    let h = intern(hyp, &mut ids);
    Ok(ter_ids(&h, &r))
}

/// TER over POS tags. Tokens are ignored; both sides must share a tagset.
pub fn poster(hyp: &TaggedSentence, reference: &TaggedSentence) -> Result<TerResult> {
    if hyp.tagset != reference.tagset {
        return Err(Error::TagsetMismatch {
            hyp: hyp.tagset.clone(),
            reference: reference.tagset.clone(),
        });
    }
    ter(&hyp.tags, &reference.tags)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceScore {
    pub id: u64,
    /// `None` when the reference side is empty.
    pub result: Option<TerResult>,
}

/// Per-sentence posTER for aligned corpora. Runs on the current rayon
/// pool; output order follows the input. Sentences with an empty
/// reference are kept with no score.
pub fn poster_corpus(hyps: &[TaggedSentence], refs: &[TaggedSentence]) -> Result<Vec<SentenceScore>> {
    if hyps.len() != refs.len() {
        return Err(Error::LengthMismatch {
            left: hyps.len(),
            right: refs.len(),
        });
    }
    let scores: Vec<Result<SentenceScore>> = hyps
        .par_iter()
        .zip(refs.par_iter())
        .map(|(h, r)| match poster(h, r) {
            Ok(res) => Ok(SentenceScore {
                id: r.id,
                result: Some(res),
            }),
            Err(Error::EmptyReference) => Ok(SentenceScore {
                id: r.id,
                result: None,
            }),
            Err(e) => Err(e),
        })
        .collect();
    let scores = scores.into_iter().collect::<Result<Vec<_>>>()?;
    let skipped = scores.iter().filter(|s| s.result.is_none()).count();
    if skipped > 0 {
        warn!("{skipped} sentence(s) with an empty reference left unscored");
    }
    Ok(scores)
}

/// Same as [`poster_corpus`] for plain token sequences.
pub fn ter_corpus(hyps: &[Vec<String>], refs: &[Vec<String>]) -> Result<Vec<SentenceScore>> {
    if hyps.len() != refs.len() {
        return Err(Error::LengthMismatch {
            left: hyps.len(),
            right: refs.len(),
        });
    }
    let scores: Vec<SentenceScore> = hyps
        .par_iter()
        .zip(refs.par_iter())
        .enumerate()
        .map(|(id, (h, r))| SentenceScore {
            id: id as u64,
            result: ter(h, r).ok(),
        })
        .collect();
    Ok(scores)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusSummary {
    pub sentences: usize,
    pub total_edits: usize,
    pub total_ref_len: usize,
    /// Unweighted mean of per-sentence scores.
    pub mean: f64,
    /// Total edits over total reference length.
    pub pooled: f64,
}

pub fn summarize<'a>(results: impl IntoIterator<Item = &'a TerResult>) -> Option<CorpusSummary> {
    let mut s = CorpusSummary {
        sentences: 0,
        total_edits: 0,
        total_ref_len: 0,
        mean: 0.0,
        pooled: 0.0,
    };
    let mut sum = 0.0;
    for r in results {
        s.sentences += 1;
        s.total_edits += r.edits();
        s.total_ref_len += r.ref_len;
        sum += r.score;
    }
    if s.sentences == 0 {
        return None;
    }
    s.mean = sum / s.sentences as f64;
    s.pooled = s.total_edits as f64 / s.total_ref_len as f64;
    Some(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TauResult {
    pub concordant: u64,
    pub discordant: u64,
}

impl TauResult {
    pub fn defined(&self) -> bool {
        self.concordant + self.discordant > 0
    }

    /// `(C - D) / (C + D)`, or `None` when every link pair is tied.
    pub fn tau(&self) -> Option<f64> {
        self.defined().then(|| {
            (self.concordant as f64 - self.discordant as f64)
                / (self.concordant + self.discordant) as f64
        })
    }
}

/// Kendall's tau over every unordered pair of links. Pairs sharing a
/// source or a target index are neither concordant nor discordant.
pub fn kendall_tau(links: &[(usize, usize)]) -> TauResult {
    let mut r = TauResult::default();
    for (i, &(s1, t1)) in links.iter().enumerate() {
        for &(s2, t2) in &links[i + 1..] {
            let ds = s2 as i64 - s1 as i64;
            let dt = t2 as i64 - t1 as i64;
            match (ds * dt).signum() {
                1 => r.concordant += 1,
                -1 => r.discordant += 1,
                _ => {}
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn levenshtein_basics() {
        assert_eq!(levenshtein(&chars("abc"), &chars("abc")), 0);
        assert_eq!(levenshtein(&chars("abc"), &chars("axc")), 1);
        assert_eq!(levenshtein(&chars("kitten"), &chars("sitting")), 3);
        assert_eq!(levenshtein(&chars(""), &chars("abc")), 3);
        assert_eq!(levenshtein(&chars("ab"), &chars("")), 2);
    }

    #[test]
    fn edit_trace_agrees_with_levenshtein() {
        let a = [1, 2, 3, 4, 2, 1];
        let b = [2, 3, 1, 4, 4];
        let (d, trace) = edit_trace(&a, &b);
        assert_eq!(d, levenshtein(&a, &b));
        let hyp_steps = trace.iter().filter(|o| **o != Op::RefOnly).count();
        let ref_steps = trace.iter().filter(|o| **o != Op::HypOnly).count();
        assert_eq!((hyp_steps, ref_steps), (a.len(), b.len()));
    }

    #[test]
    fn identical_is_zero() {
        let r = ter(&sym("a b c"), &sym("a b c")).unwrap();
        assert_eq!(r.score, 0.0);
        assert_eq!(r.edits(), 0);
    }

    const TABLE3_REF: &str = "PRON VERB PRON DET NOUN ADP PROPN DET NOUN PUNCT";

    #[test]
    fn table3_first_translation() {
        let r = ter(&sym("PRON AUX PRON ADV NOUN DET NOUN NOUN VERB PUNCT"), &sym(TABLE3_REF)).unwrap();
        assert_eq!(r.edits(), 5);
        assert_eq!(r.score, 0.5);
    }

    #[test]
    fn table3_second_translation() {
        let r = ter(&sym("ADV ADV AUX PRON PRON DET NOUN NOUN VERB PUNCT"), &sym(TABLE3_REF)).unwrap();
        assert_eq!(r.edits(), 7);
        assert_eq!(r.score, 0.7);
    }

    #[test]
    fn shift_is_cheaper_than_two_edits() {
        // Moving "c d" to the front costs one shift; plain edit distance is 4.
        let r = ter(&sym("a b c d"), &sym("c d a b")).unwrap();
        assert_eq!(r.shifts, 1);
        assert_eq!(r.edits(), 1);
        assert_eq!(r.score, 0.25);
    }

    #[test]
    fn empty_sides() {
        assert!(matches!(ter::<&str>(&sym("a"), &[]), Err(Error::EmptyReference)));
        let r = ter(&[], &sym("a b c")).unwrap();
        assert_eq!(r.score, 1.0);
        assert_eq!(r.deletions, 3);
    }

    #[test]
    fn breakdown_convention() {
        // One extra hypothesis word.
        let r = ter(&sym("a b x c"), &sym("a b c")).unwrap();
        assert_eq!((r.insertions, r.deletions, r.substitutions), (1, 0, 0));
        // One reference word missing.
        let r = ter(&sym("a c"), &sym("a b c")).unwrap();
        assert_eq!((r.insertions, r.deletions, r.substitutions), (0, 1, 0));
    }

    #[test]
    fn perform_shift_cases() {
        let w = [0, 1, 2, 3, 4];
        assert_eq!(perform_shift(&w, 3, 2, 0), vec![3, 4, 0, 1, 2]);
        assert_eq!(perform_shift(&w, 0, 2, 4), vec![2, 3, 0, 1, 4]);
        assert_eq!(perform_shift(&w, 1, 1, 1), w.to_vec());
        assert_eq!(perform_shift(&w, 1, 2, 2), vec![0, 3, 1, 2, 4]);
    }

    fn tagged(tags: &str, tagset: &str) -> TaggedSentence {
        let t: Vec<String> = tags.split_whitespace().map(String::from).collect();
        TaggedSentence::new(0, t.iter().map(|x| x.to_lowercase()).collect(), t, tagset).unwrap()
    }

    #[test]
    fn poster_ignores_tokens() {
        let a = tagged("DET NOUN VERB", "ud");
        let mut b = a.clone();
        b.tokens = vec!["x".into(), "y".into(), "z".into()];
        assert_eq!(poster(&a, &b).unwrap().score, 0.0);
    }

    #[test]
    fn poster_requires_same_tagset() {
        let a = tagged("DET NOUN", "ud");
        let b = tagged("DET NOUN", "tiger");
        assert!(matches!(poster(&a, &b), Err(Error::TagsetMismatch { .. })));
        let empty = tagged("", "ud");
        assert!(matches!(poster(&a, &empty), Err(Error::EmptyReference)));
    }

    #[test]
    fn corpus_aggregation() {
        // Four pairs with hand-computed edits / ref lengths:
        // 0/2, 1/4, 2/2 (two substitutions), 1/3 (one deletion).
        let hyps = ["A B", "A B C X", "X Y", "A C"].map(|s| tagged(s, "ud"));
        let refs = ["A B", "A B C D", "A B", "A B C"].map(|s| tagged(s, "ud"));
        let scores = poster_corpus(&hyps, &refs).unwrap();
        let results: Vec<TerResult> = scores.iter().map(|s| s.result.unwrap()).collect();
        let edits: Vec<usize> = results.iter().map(|r| r.edits()).collect();
        assert_eq!(edits, vec![0, 1, 2, 1]);
        let s = summarize(&results).unwrap();
        let mean = (0.0 + 0.25 + 1.0 + 1.0 / 3.0) / 4.0;
        assert!((s.mean - mean).abs() < 1e-12);
        assert_eq!(s.pooled, 4.0 / 11.0);
        assert!(summarize(&[]).is_none());
    }

    #[test]
    fn corpus_skips_empty_reference() {
        let hyps = [tagged("A", "ud"), tagged("A", "ud")];
        let refs = [tagged("A", "ud"), tagged("", "ud")];
        let scores = poster_corpus(&hyps, &refs).unwrap();
        assert!(scores[0].result.is_some());
        assert!(scores[1].result.is_none());
    }

    #[test]
    fn tau_examples() {
        assert_eq!(kendall_tau(&[(0, 0), (1, 1), (2, 2)]).tau(), Some(1.0));
        assert_eq!(kendall_tau(&[(0, 2), (1, 1), (2, 0)]).tau(), Some(-1.0));
        let tied = kendall_tau(&[(0, 0), (0, 1)]);
        assert!(!tied.defined());
        assert_eq!(tied.tau(), None);
        assert!(!kendall_tau(&[]).defined());
        let r = kendall_tau(&[(0, 0), (1, 2), (2, 1)]);
        assert_eq!((r.concordant, r.discordant), (2, 1));
    }
}
