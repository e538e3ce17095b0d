//! Back-translation selection: per-token normalized candidate
//! probabilities, their ratio ΔP, threshold or quantile selection between
//! the supervised and unsupervised candidate, and tagged corpus emission.

use std::cmp::Ordering;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;

use crate::corpus_io::{open, Lines};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub text: String,
    /// Natural-log total sequence probability.
    pub logp: f64,
}

impl Candidate {
    pub fn token_count(&self) -> usize {
        self.text.split_whitespace().count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BtRecord {
    pub id: u64,
    /// The natural sentence the candidates were translated from.
    pub src: String,
    pub sup: Candidate,
    pub unsup: Candidate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Natural,
    Ten,
}

impl FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "e" | "ln" => Ok(LogBase::Natural),
            "10" | "log10" => Ok(LogBase::Ten),
            other => Err(Error::Invalid(format!("unknown log base {other:?}"))),
        }
    }
}

/// Reads `id<TAB>src<TAB>sup_bt<TAB>sup_logP<TAB>unsup_bt<TAB>unsup_logP`,
/// converting log-probabilities to natural log.
pub fn read_bt_tsv(path: impl AsRef<Path>, base: LogBase) -> Result<Vec<BtRecord>> {
    parse_bt_tsv(open(path.as_ref())?, base)
}

pub fn parse_bt_tsv<R: std::io::BufRead>(lines: Lines<R>, base: LogBase) -> Result<Vec<BtRecord>> {
    let origin = lines.origin().to_string();
    let scale = match base {
        LogBase::Natural => 1.0,
        LogBase::Ten => std::f64::consts::LN_10,
    };
    let mut out = Vec::new();
    for item in lines {
        let (n, line) = item?;
        if line.trim().is_empty() || (n == 1 && line.starts_with("id\t")) {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(Error::parse(&origin, n, 1, format!("expected 6 fields, found {}", f.len())));
        }
        let id = f[0]
            .trim()
            .parse()
            .map_err(|_| Error::parse(&origin, n, 1, format!("bad id {:?}", f[0])))?;
        let logp = |col: usize| {
            f[col]
                .trim()
                .parse::<f64>()
                .map(|v| v * scale)
                .map_err(|_| Error::parse(&origin, n, col + 1, format!("bad log-probability {:?}", f[col])))
        };
        out.push(BtRecord {
            id,
            src: f[1].to_string(),
            sup: Candidate {
                text: f[2].to_string(),
                logp: logp(3)?,
            },
            unsup: Candidate {
                text: f[4].to_string(),
                logp: logp(5)?,
            },
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub record: BtRecord,
    pub pnorm_sup: f64,
    pub pnorm_unsup: f64,
    pub delta_p: f64,
}

/// `exp(logP / tokens)`.
pub fn pnorm(c: &Candidate) -> f64 {
    (c.logp / c.token_count() as f64).exp()
}

fn check_candidate(id: u64, which: &str, c: &Candidate) -> Result<()> {
    if c.token_count() == 0 {
        return Err(Error::Invalid(format!("pair {id}: {which} candidate is missing or empty")));
    }
    if c.logp.is_nan() || c.logp > 0.0 {
        return Err(Error::Invalid(format!(
            "pair {id}: {which} log-probability {} is not <= 0",
            c.logp
        )));
    }
    Ok(())
}

pub fn score_pairs(records: &[BtRecord]) -> Result<Vec<ScoredPair>> {
    records
        .par_iter()
        .map(|r| {
            check_candidate(r.id, "supervised", &r.sup)?;
            check_candidate(r.id, "unsupervised", &r.unsup)?;
            let (ps, pu) = (pnorm(&r.sup), pnorm(&r.unsup));
            if ps == 0.0 || pu == 0.0 {
                return Err(Error::Invalid(format!("pair {}: per-token probability underflows to 0", r.id)));
            }
            Ok(ScoredPair {
                record: r.clone(),
                pnorm_sup: ps,
                pnorm_unsup: pu,
                delta_p: pu / ps,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Unsupervised candidate when ΔP reaches T.
    Threshold(f64),
    /// Unsupervised candidate for the top fraction q by ΔP.
    Quantile(f64),
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("bad mode {s:?}; expected threshold:T or quantile:q"));
        let (kind, v) = s.split_once(':').ok_or_else(bad)?;
        let v: f64 = v.parse().map_err(|_| bad())?;
        match kind {
            "threshold" if v > 0.0 && v.is_finite() => Ok(Mode::Threshold(v)),
            "quantile" if (0.0..=1.0).contains(&v) => Ok(Mode::Quantile(v)),
            _ => Err(bad()),
        }
    }
}

/// What a threshold tie (ΔP exactly T) selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TiePolicy {
    #[default]
    Unsup,
    Sup,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BtSelectionConfig {
    pub mode: Mode,
    /// Prefix tokens; an empty string emits the candidate untagged.
    pub tag_sup: String,
    pub tag_unsup: String,
    pub tie_policy: TiePolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    Sup,
    Unsup,
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Choice::Sup => "sup",
            Choice::Unsup => "unsup",
        })
    }
}

/// One choice per input pair, in input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionOutcome {
    pub choices: Vec<Choice>,
}

impl SelectionOutcome {
    pub fn unsup_count(&self) -> usize {
        self.choices.iter().filter(|c| **c == Choice::Unsup).count()
    }

    pub fn sup_count(&self) -> usize {
        self.choices.len() - self.unsup_count()
    }
}

pub fn threshold_choice(delta_p: f64, t: f64, ties: TiePolicy) -> Choice {
    match delta_p.partial_cmp(&t) {
        Some(Ordering::Greater) => Choice::Unsup,
        Some(Ordering::Equal) if ties == TiePolicy::Unsup => Choice::Unsup,
        _ => Choice::Sup,
    }
}

/// `floor(q * n)`, tolerant of representation error in `q`.
pub fn quantile_count(q: f64, n: usize) -> usize {
    ((q * n as f64) + 1e-9).floor().min(n as f64) as usize
}

pub fn select(pairs: &[ScoredPair], config: &BtSelectionConfig) -> SelectionOutcome {
    let choices = match config.mode {
        Mode::Threshold(t) => pairs
            .iter()
            .map(|p| threshold_choice(p.delta_p, t, config.tie_policy))
            .collect(),
        Mode::Quantile(q) => {
            let mut order: Vec<usize> = (0..pairs.len()).collect();
            order.sort_by(|&a, &b| {
                pairs[b]
                    .delta_p
                    .total_cmp(&pairs[a].delta_p)
                    .then(pairs[a].record.id.cmp(&pairs[b].record.id))
            });
            let mut choices = vec![Choice::Sup; pairs.len()];
            for &i in &order[..quantile_count(q, pairs.len())] {
                choices[i] = Choice::Unsup;
            }
            choices
        }
    };
    SelectionOutcome { choices }
}

/// True when the lower threshold selects at least as many unsupervised
/// candidates as the higher one.
pub fn monotonicity_check(pairs: &[ScoredPair], t1: f64, t2: f64, ties: TiePolicy) -> bool {
    let count = |t| {
        pairs
            .iter()
            .filter(|p| threshold_choice(p.delta_p, t, ties) == Choice::Unsup)
            .count()
    };
    let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
    count(lo) >= count(hi)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedPair {
    pub id: u64,
    /// Optional tag followed by the chosen back-translation.
    pub synthetic: String,
    /// The natural sentence.
    pub natural: String,
    pub choice: Choice,
}

fn check_tag(tag: &str) -> Result<()> {
    if tag.chars().any(char::is_whitespace) {
        return Err(Error::Invalid(format!("tag {tag:?} must be a single token")));
    }
    Ok(())
}

/// Builds the synthetic parallel corpus, one pair per input in input
/// order. A tag that already occurs as a corpus token is reported but
/// still used.
pub fn tag_corpus(pairs: &[ScoredPair], outcome: &SelectionOutcome, config: &BtSelectionConfig) -> Result<Vec<EmittedPair>> {
    check_tag(&config.tag_sup)?;
    check_tag(&config.tag_unsup)?;
    if pairs.len() != outcome.choices.len() {
        return Err(Error::LengthMismatch {
            left: pairs.len(),
            right: outcome.choices.len(),
        });
    }
    for tag in [&config.tag_sup, &config.tag_unsup] {
        if tag.is_empty() {
            continue;
        }
        let collides = pairs.iter().any(|p| {
            [&p.record.src, &p.record.sup.text, &p.record.unsup.text]
                .iter()
                .any(|t| t.split_whitespace().any(|w| w == tag))
        });
        if collides {
            warn!("tag {tag:?} also occurs as an ordinary corpus token");
        }
    }
    Ok(pairs
        .iter()
        .zip(&outcome.choices)
        .map(|(p, c)| {
            let (tag, cand) = match c {
                Choice::Sup => (&config.tag_sup, &p.record.sup),
                Choice::Unsup => (&config.tag_unsup, &p.record.unsup),
            };
            let synthetic = if tag.is_empty() {
                cand.text.clone()
            } else {
                format!("{tag} {}", cand.text)
            };
            EmittedPair {
                id: p.record.id,
                synthetic,
                natural: p.record.src.clone(),
                choice: *c,
            }
        })
        .collect())
}

/// `id<TAB>chosen<TAB>delta_p` with a header line.
pub fn provenance_tsv(pairs: &[ScoredPair], outcome: &SelectionOutcome) -> String {
    let mut out = String::from("id\tchosen\tdelta_p\n");
    for (p, c) in pairs.iter().zip(&outcome.choices) {
        let _ = writeln!(out, "{}\t{}\t{}", p.record.id, c, p.delta_p);
    }
    out
}
