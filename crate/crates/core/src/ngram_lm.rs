//! Back-off n-gram language models with interpolated absolute discounting,
//! ARPA persistence, perplexity, and a two-model perplexity contrast.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::{bin_aggregates, Aggregation, BinnedSet, MetricValue, ReportTable, SentenceMetric, Side};
use crate::corpus_io::{open, TokenSequence};
use crate::error::{Error, Result};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// Log10 value stored for events of probability zero.
pub const LOG_ZERO: f64 = -99.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub order: usize,
    pub discount: f64,
    /// Training tokens seen fewer times than this become `<unk>`.
    pub unk_threshold: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            order: 3,
            discount: 0.75,
            unk_threshold: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    logp: f64,
    backoff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    /// Sorted, so id order is string order.
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    /// `tables[k]` holds the (k+1)-grams.
    tables: Vec<HashMap<Vec<u32>, Entry>>,
}

fn log10_or_zero(p: f64) -> f64 {
    if p > 0.0 {
        p.log10()
    } else {
        LOG_ZERO
    }
}

pub fn train(corpus: &[TokenSequence], config: &TrainConfig) -> Result<NgramModel> {
    let order = config.order;
    let d = config.discount;
    if order < 1 {
        return Err(Error::Invalid("model order must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&d) {
        return Err(Error::Invalid(format!("discount {d} outside [0, 1)")));
    }
    if corpus.is_empty() {
        return Err(Error::Empty("training corpus"));
    }

    let mut freq: HashMap<&str, u64> = HashMap::new();
    for s in corpus {
        for t in &s.tokens {
            *freq.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    let mut words: BTreeSet<&str> = freq
        .iter()
        .filter(|(_, c)| **c >= config.unk_threshold)
        .map(|(w, _)| *w)
        .collect();
    words.extend([BOS, EOS, UNK]);
    let vocab: Vec<String> = words.into_iter().map(str::to_string).collect();
    let index: HashMap<String, u32> = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
    let (bos, eos, unk) = (index[BOS], index[EOS], index[UNK]);

    let mut counts: Vec<HashMap<Vec<u32>, u64>> = vec![HashMap::new(); order];
    let mut seq = Vec::new();
    for s in corpus {
        seq.clear();
        seq.push(bos);
        seq.extend(s.tokens.iter().map(|t| index.get(t.as_str()).copied().unwrap_or(unk)));
        seq.push(eos);
        for end in 1..seq.len() {
            for k in 1..=order.min(end + 1) {
                *counts[k - 1].entry(seq[end + 1 - k..=end].to_vec()).or_insert(0) += 1;
            }
        }
    }

    // Context totals and distinct continuation counts, per context length.
    let mut contexts: Vec<HashMap<Vec<u32>, (u64, u64)>> = vec![HashMap::new(); order];
    for k in 2..=order {
        for (g, c) in &counts[k - 1] {
            let e = contexts[k - 2].entry(g[..k - 1].to_vec()).or_insert((0, 0));
            e.0 += c;
            e.1 += 1;
        }
    }
    let gamma = |h: &[u32]| -> Option<f64> {
        contexts
            .get(h.len() - 1)
            .and_then(|m| m.get(h))
            .map(|(total, types)| d * *types as f64 / *total as f64)
    };

    let mut probs: Vec<HashMap<Vec<u32>, f64>> = vec![HashMap::new(); order];
    let total: u64 = counts[0].values().sum();
    let types = counts[0].len() as f64;
    let outcomes = (vocab.len() - 1) as f64;
    for id in 0..vocab.len() as u32 {
        if id == bos {
            continue;
        }
        let c = counts[0].get(&vec![id]).copied().unwrap_or(0) as f64;
        let p = (c - d).max(0.0) / total as f64 + d * types / total as f64 / outcomes;
        probs[0].insert(vec![id], p);
    }
    for k in 2..=order {
        let (lower, rest) = probs.split_at_mut(k - 1);
        for (g, c) in &counts[k - 1] {
            let h = &g[..k - 1];
            let (ctotal, _) = contexts[k - 2][h];
            let p = (*c as f64 - d) / ctotal as f64 + gamma(h).unwrap_or(0.0) * lower[k - 2][&g[1..]];
            rest[0].insert(g.clone(), p);
        }
    }

    let mut tables: Vec<HashMap<Vec<u32>, Entry>> = Vec::with_capacity(order);
    for (k, level) in probs.into_iter().enumerate() {
        let mut table: HashMap<Vec<u32>, Entry> = level
            .into_iter()
            .map(|(g, p)| {
                let backoff = if k + 1 < order { gamma(&g).map(log10_or_zero) } else { None };
                (g, Entry { logp: log10_or_zero(p), backoff })
            })
            .collect();
        if k == 0 {
            table.insert(
                vec![bos],
                Entry {
                    logp: LOG_ZERO,
                    backoff: if order > 1 { gamma(&[bos]).map(log10_or_zero) } else { None },
                },
            );
        }
        tables.push(table);
    }
    Ok(NgramModel { vocab, index, tables })
}

/// Log10 sum and number of prediction events over a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerplexityStats {
    pub log10_sum: f64,
    pub events: usize,
}

impl PerplexityStats {
    pub fn perplexity(&self) -> f64 {
        10f64.powf(-self.log10_sum / self.events as f64)
    }
}

impl NgramModel {
    pub fn order(&self) -> usize {
        self.tables.len()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn ngram_count(&self, n: usize) -> usize {
        self.tables[n - 1].len()
    }

    fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).or_else(|| self.index.get(UNK)).copied()
    }

    fn score_ids(&self, history: &[u32], word: u32) -> f64 {
        let history = &history[history.len().saturating_sub(self.order() - 1)..];
        let mut backoff = 0.0;
        let mut gram = Vec::with_capacity(history.len() + 1);
        for start in 0..=history.len() {
            gram.clear();
            gram.extend_from_slice(&history[start..]);
            gram.push(word);
            if let Some(e) = self.tables[gram.len() - 1].get(&gram) {
                return e.logp + backoff;
            }
            if start < history.len() {
                let ctx = &history[start..];
                if let Some(b) = self.tables[ctx.len() - 1].get(ctx).and_then(|e| e.backoff) {
                    backoff += b;
                }
            }
        }
        LOG_ZERO
    }

    /// Log10 probability of `word` after `history`. Unknown words are
    /// scored as `<unk>`; without `<unk>` in the vocabulary they get
    /// [`LOG_ZERO`].
    pub fn logprob(&self, history: &[&str], word: &str) -> f64 {
        let Some(w) = self.id(word) else {
            return LOG_ZERO;
        };
        let mut h = Vec::with_capacity(history.len());
        for t in history {
            match self.id(t) {
                Some(i) => h.push(i),
                None => h.clear(),
            }
        }
        self.score_ids(&h, w)
    }

    pub fn prob(&self, history: &[&str], word: &str) -> f64 {
        10f64.powf(self.logprob(history, word))
    }

    pub fn sentence_stats(&self, tokens: &[String]) -> Result<PerplexityStats> {
        let bos = self
            .index
            .get(BOS)
            .copied()
            .ok_or_else(|| Error::Invalid("model has no <s> entry".into()))?;
        let eos = self
            .index
            .get(EOS)
            .copied()
            .ok_or_else(|| Error::Invalid("model has no </s> entry".into()))?;
        let mut history = vec![bos];
        let mut stats = PerplexityStats::default();
        for word in tokens.iter().map(String::as_str).chain([EOS]) {
            let id = if word == EOS { Some(eos) } else { self.id(word) };
            let lp = match id {
                Some(i) => self.score_ids(&history, i),
                None => LOG_ZERO,
            };
            if lp <= LOG_ZERO {
                return Err(Error::ZeroProbability(word.to_string()));
            }
            stats.log10_sum += lp;
            stats.events += 1;
            history.push(id.unwrap_or(eos));
        }
        Ok(stats)
    }

    pub fn corpus_stats(&self, corpus: &[TokenSequence]) -> Result<PerplexityStats> {
        let mut total = PerplexityStats::default();
        for s in corpus {
            let st = self.sentence_stats(&s.tokens)?;
            total.log10_sum += st.log10_sum;
            total.events += st.events;
        }
        Ok(total)
    }

    /// `10^(-Σ log10 p / N)`, N counting every token and one `</s>` per
    /// sentence.
    pub fn perplexity(&self, corpus: &[TokenSequence]) -> Result<f64> {
        if corpus.is_empty() {
            return Err(Error::Empty("evaluation corpus"));
        }
        Ok(self.corpus_stats(corpus)?.perplexity())
    }

    /// Serializes in ARPA format, entries sorted by word sequence. Values
    /// are printed with `decimals` places, or losslessly when `None`.
    pub fn to_arpa(&self, decimals: Option<usize>) -> String {
        let fmt = |v: f64| match decimals {
            Some(p) => format!("{v:.p$}"),
            None => format!("{v}"),
        };
        let mut out = String::from("\n\\data\\\n");
        for (k, t) in self.tables.iter().enumerate() {
            let _ = writeln!(out, "ngram {}={}", k + 1, t.len());
        }
        for (k, t) in self.tables.iter().enumerate() {
            let _ = writeln!(out, "\n\\{}-grams:", k + 1);
            let mut entries: Vec<(&Vec<u32>, &Entry)> = t.iter().collect();
            entries.sort_unstable_by(|a, b| a.0.cmp(b.0));
            for (g, e) in entries {
                let words: Vec<&str> = g.iter().map(|i| self.vocab[*i as usize].as_str()).collect();
                let _ = write!(out, "{}\t{}", fmt(e.logp), words.join(" "));
                if let Some(b) = e.backoff {
                    let _ = write!(out, "\t{}", fmt(b));
                }
                out.push('\n');
            }
        }
        out.push_str("\n\\end\\\n");
        out
    }

    pub fn dump_arpa(&self, path: impl AsRef<Path>, decimals: Option<usize>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_arpa(decimals)).map_err(|e| Error::io(path, e))
    }
}

pub fn load_arpa(path: impl AsRef<Path>) -> Result<NgramModel> {
    let lines = open(path.as_ref())?;
    let origin = lines.origin().to_string();
    let mut text = Vec::new();
    for item in lines {
        text.push(item?.1);
    }
    parse_arpa(text.iter().map(String::as_str), &origin)
}

/// log10 probability, words, optional backoff.
type ArpaLine<'a> = (f64, Vec<&'a str>, Option<f64>);

pub fn parse_arpa<'a>(lines: impl IntoIterator<Item = &'a str>, origin: &str) -> Result<NgramModel> {
    let err = |message: String| Error::Arpa {
        origin: origin.to_string(),
        message,
    };
    let mut lines = lines.into_iter().map(str::trim).filter(|l| !l.is_empty());

    if lines.next() != Some("\\data\\") {
        return Err(err("missing \\data\\ header".into()));
    }
    let mut declared: Vec<usize> = Vec::new();
    let mut raw: Vec<Vec<ArpaLine>> = Vec::new();
    let mut current: Option<usize> = None;
    let mut ended = false;
    for line in lines {
        if ended {
            return Err(err(format!("content after \\end\\: {line:?}")));
        }
        if let Some(decl) = line.strip_prefix("ngram ") {
            if current.is_some() {
                return Err(err(format!("count declaration inside an n-gram section: {line:?}")));
            }
            let (n, c) = decl
                .split_once('=')
                .ok_or_else(|| err(format!("bad count line {line:?}")))?;
            let n: usize = n.trim().parse().map_err(|_| err(format!("bad count line {line:?}")))?;
            let c: usize = c.trim().parse().map_err(|_| err(format!("bad count line {line:?}")))?;
            if n != declared.len() + 1 {
                return Err(err(format!("counts out of order at {line:?}")));
            }
            declared.push(c);
        } else if line == "\\end\\" {
            ended = true;
        } else if line.starts_with('\\') {
            let n = line
                .strip_prefix('\\')
                .and_then(|l| l.strip_suffix("-grams:"))
                .and_then(|n| n.parse::<usize>().ok())
                .ok_or_else(|| err(format!("malformed section header {line:?}")))?;
            if n != raw.len() + 1 || n > declared.len() {
                return Err(err(format!("unexpected section {line:?}")));
            }
            raw.push(Vec::new());
            current = Some(n);
        } else {
            let n = current.ok_or_else(|| err(format!("entry outside an n-gram section: {line:?}")))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != n + 1 && fields.len() != n + 2 {
                return Err(err(format!("{n}-gram entry has {} fields: {line:?}", fields.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number {s:?}")));
            let logp = num(fields[0])?;
            let backoff = if fields.len() == n + 2 { Some(num(fields[n + 1])?) } else { None };
            raw[n - 1].push((logp, fields[1..=n].to_vec(), backoff));
        }
    }
    if !ended {
        return Err(err("missing \\end\\".into()));
    }
    if declared.is_empty() {
        return Err(err("no n-gram counts declared".into()));
    }
    if raw.len() != declared.len() {
        return Err(err(format!("{} sections declared, {} present", declared.len(), raw.len())));
    }
    for (k, (d, r)) in declared.iter().zip(&raw).enumerate() {
        if *d != r.len() {
            return Err(err(format!("ngram {}: declared {d}, found {}", k + 1, r.len())));
        }
    }

    let mut words: BTreeSet<&str> = raw[0].iter().map(|(_, w, _)| w[0]).collect();
    words.extend([BOS, EOS]);
    let vocab: Vec<String> = words.into_iter().map(str::to_string).collect();
    let index: HashMap<String, u32> = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
    let mut tables = Vec::with_capacity(raw.len());
    for level in &raw {
        let mut table = HashMap::with_capacity(level.len());
        for (logp, ws, backoff) in level {
            let ids = ws
                .iter()
                .map(|w| index.get(*w).copied().ok_or_else(|| err(format!("word {w:?} has no unigram entry"))))
                .collect::<Result<Vec<u32>>>()?;
            if table.insert(ids, Entry { logp: *logp, backoff: *backoff }).is_some() {
                return Err(err(format!("duplicate entry {:?}", ws.join(" "))));
            }
        }
        tables.push(table);
    }
    Ok(NgramModel { vocab, index, tables })
}

/// One system's output for the perplexity contrast.
pub struct SystemCorpus<'a> {
    pub label: &'a str,
    pub sentences: &'a [TokenSequence],
    pub side: Side,
}

fn per_sentence(model: &NgramModel, sentences: &[TokenSequence]) -> Result<SentenceMetric> {
    let mut out = BTreeMap::new();
    for s in sentences {
        let st = model.sentence_stats(&s.tokens)?;
        out.insert(s.id, MetricValue::rate(-st.log10_sum, st.events as f64));
    }
    Ok(out)
}

/// Perplexity of each system's output under a natural-text and a
/// translated-text model, optionally broken down by adequacy bin (bin
/// perplexities pool the sentences of the bin).
pub fn contrast_report(
    nlm: &NgramModel,
    tlm: &NgramModel,
    systems: &[SystemCorpus<'_>],
    bins: Option<(&BinnedSet, bool)>,
) -> Result<ReportTable> {
    if systems.is_empty() {
        return Err(Error::Empty("system list"));
    }
    let models = [("nLM", nlm), ("tLM", tlm)];
    let parts: Vec<&str> = match bins {
        Some(_) => vec!["Overall", "Low", "Medium", "High"],
        None => vec![""],
    };
    let columns: Vec<String> = models
        .iter()
        .flat_map(|(m, _)| parts.iter().map(move |p| if p.is_empty() { m.to_string() } else { format!("{m} {p}") }))
        .collect();
    let mut table = ReportTable::new(
        "Perplexity of system output under natural-text (nLM) and translated-text (tLM) models",
        systems.iter().map(|s| s.label),
        columns,
        2,
    );
    for (r, sys) in systems.iter().enumerate() {
        if sys.sentences.is_empty() {
            return Err(Error::Invalid(format!("empty corpus for system {}", sys.label)));
        }
        for (m, (_, model)) in models.iter().enumerate() {
            match bins {
                None => table.set(r, m, Some(model.perplexity(sys.sentences)?)),
                Some((set, restrict)) => {
                    let metric = per_sentence(model, sys.sentences)?;
                    let cells = bin_aggregates(&metric, set, sys.side, restrict, Aggregation::Pooled)?;
                    for (c, v) in cells.into_iter().enumerate() {
                        table.set(r, m * 4 + c, v.map(|x| 10f64.powf(x)));
                    }
                }
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(lines: &[&str]) -> Vec<TokenSequence> {
        lines
            .iter()
            .enumerate()
            .map(|(i, l)| TokenSequence::from_line(i as u64, l))
            .collect()
    }

    fn cfg(order: usize, discount: f64) -> TrainConfig {
        TrainConfig {
            order,
            discount,
            unk_threshold: 1,
        }
    }

    #[test]
    fn unigram_without_discount() {
        let m = train(&corpus(&["a a a"]), &cfg(1, 0.0)).unwrap();
        assert!((m.prob(&[], "a") - 0.75).abs() < 1e-12);
        assert!((m.prob(&[], EOS) - 0.25).abs() < 1e-12);
        assert_eq!(m.prob(&[], "zzz"), m.prob(&[], UNK));
    }

    #[test]
    fn conditionals_sum_to_one() {
        let c = corpus(&["a b c a", "b b a", "c a b d", "d"]);
        for order in 1..=3 {
            let m = train(&c, &cfg(order, 0.75)).unwrap();
            let outcomes: Vec<&str> = m.vocab().iter().map(String::as_str).filter(|w| *w != BOS).collect();
            let histories: Vec<Vec<&str>> = vec![vec![], vec![BOS], vec!["a"], vec!["b", "b"], vec![BOS, "c"], vec!["d", "zz"]];
            for h in histories {
                let s: f64 = outcomes.iter().map(|w| m.prob(&h, w)).sum();
                assert!((s - 1.0).abs() < 1e-9, "order {order} history {h:?}: {s}");
            }
        }
    }

    #[test]
    fn own_text_beats_disjoint_text() {
        let m = train(&corpus(&["the cat sat"]), &cfg(3, 0.75)).unwrap();
        let own = m.perplexity(&corpus(&["the cat sat"])).unwrap();
        let other = m.perplexity(&corpus(&["dogs run fast"])).unwrap();
        assert!(own < other);
    }

    #[test]
    fn hand_written_unigram_arpa() {
        let text = "\\data\\\nngram 1=4\n\n\\1-grams:\n-0.30103\ta\n-0.60206\t</s>\n-99\t<s>\n-0.60206\t<unk>\n\n\\end\\\n";
        let m = parse_arpa(text.lines(), "hand").unwrap();
        // "a" then </s>: 0.5 * 0.25 over two events.
        let ppl = m.perplexity(&corpus(&["a"])).unwrap();
        assert!((ppl - (0.5f64 * 0.25).powf(-0.5)).abs() < 1e-4);
    }

    #[test]
    fn arpa_count_mismatch() {
        let text = "\\data\\\nngram 1=5\n\n\\1-grams:\n-1\ta\n-1\tb\n-1\t</s>\n-99\t<s>\n\\end\\\n";
        assert!(matches!(parse_arpa(text.lines(), "x"), Err(Error::Arpa { .. })));
    }

    #[test]
    fn arpa_malformed_header() {
        let text = "\\data\\\nngram 1=1\n\\one-grams:\n-1\ta\n\\end\\\n";
        assert!(parse_arpa(text.lines(), "x").is_err());
        assert!(parse_arpa("ngram 1=1".lines(), "x").is_err());
    }

    #[test]
    fn arpa_round_trip_is_exact() {
        let c = corpus(&["a b c", "a c b b", "c c a"]);
        let m = train(&c, &cfg(3, 0.75)).unwrap();
        let back = parse_arpa(m.to_arpa(None).lines(), "rt").unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_arpa(None), m.to_arpa(None));
    }

    #[test]
    fn errors() {
        assert!(train(&[], &cfg(2, 0.5)).is_err());
        assert!(train(&corpus(&["a"]), &cfg(0, 0.5)).is_err());
        assert!(train(&corpus(&["a"]), &cfg(2, 1.0)).is_err());
    }

    #[test]
    fn contrast_identical_systems() {
        let n = train(&corpus(&["a b c", "a b"]), &TrainConfig::default()).unwrap();
        let t = train(&corpus(&["x y z", "y z"]), &TrainConfig::default()).unwrap();
        let sys = corpus(&["a b", "a b c"]);
        let table = contrast_report(
            &n,
            &t,
            &[
                SystemCorpus { label: "Sup", sentences: &sys, side: Side::Sup },
                SystemCorpus { label: "Unsup", sentences: &sys, side: Side::Unsup },
            ],
            None,
        )
        .unwrap();
        assert_eq!(table.cells[0], table.cells[1]);
        assert!(table.get("Sup", "nLM").unwrap() < table.get("Sup", "tLM").unwrap());
    }
}
