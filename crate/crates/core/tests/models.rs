mod common;

use proptest::prelude::*;
use transkit::analysis::{aggregate, both_intersection, Aggregation, AdequacyBin, MetricValue, SentenceMetric};
use transkit::btselect::{score_pairs, select, tag_corpus, BtRecord, BtSelectionConfig, Candidate, Choice, Mode, TiePolicy};
use transkit::corpus_io::{RatingRecord, Scheme, TokenSequence};
use transkit::ngram_lm::{parse_arpa, train, TrainConfig, LOG_ZERO};

use common::{synthetic_corpus, BigramOracle};

fn corpus(lines: &[&str]) -> Vec<TokenSequence> {
    lines.iter().enumerate().map(|(i, l)| TokenSequence::from_line(i as u64, l)).collect()
}

#[test]
fn bigram_matches_count_oracle_on_synthetic_text() {
    let text = synthetic_corpus(300, 25, 11);
    let lines: Vec<&str> = text.iter().map(String::as_str).collect();
    let oracle = BigramOracle::new(&lines, 0.6);
    let m = train(&corpus(&lines), &TrainConfig { order: 2, discount: 0.6, unk_threshold: 1 }).unwrap();
    let words: Vec<&str> = m.vocab().iter().map(String::as_str).filter(|w| *w != "<s>").collect();
    for h in m.vocab() {
        for w in &words {
            let (got, want) = (m.prob(&[h.as_str()], w), oracle.bigram(h, w));
            assert!((got - want).abs() < 1e-9, "p({w}|{h}) = {got}, oracle {want}");
        }
    }
}

#[test]
fn unseen_words_get_unknown_mass() {
    let m = train(&corpus(&["a b", "b c"]), &TrainConfig::default()).unwrap();
    assert_eq!(m.prob(&["a"], "zzz"), m.prob(&["a"], "<unk>"));
    assert!(m.prob(&[], "zzz") > 0.0);
    assert_eq!(m.logprob(&[], "<s>"), LOG_ZERO);
}

#[test]
fn rounded_arpa_still_loads() {
    let m = train(&corpus(&["x y z", "y z x", "z"]), &TrainConfig::default()).unwrap();
    let back = parse_arpa(m.to_arpa(Some(4)).lines(), "rounded").unwrap();
    assert_eq!(back.vocab(), m.vocab());
    assert!((back.prob(&["x", "y"], "z") - m.prob(&["x", "y"], "z")).abs() < 1e-3);
}

fn record(id: u64, sup: f64, unsup: f64) -> BtRecord {
    BtRecord {
        id,
        src: format!("natural {id}"),
        sup: Candidate { text: "s t".into(), logp: sup },
        unsup: Candidate { text: "u v".into(), logp: unsup },
    }
}

fn config(mode: Mode) -> BtSelectionConfig {
    BtSelectionConfig {
        mode,
        tag_sup: String::new(),
        tag_unsup: "<U>".into(),
        tie_policy: TiePolicy::Unsup,
    }
}

#[test]
fn threshold_tie_follows_policy() {
    let pairs = score_pairs(&[record(0, -1.0, -1.0)]).unwrap();
    assert_eq!(select(&pairs, &config(Mode::Threshold(1.0))).choices, [Choice::Unsup]);
    let mut sup_ties = config(Mode::Threshold(1.0));
    sup_ties.tie_policy = TiePolicy::Sup;
    assert_eq!(select(&pairs, &sup_ties).choices, [Choice::Sup]);
}

#[test]
fn empty_tag_leaves_candidate_untagged() {
    let pairs = score_pairs(&[record(0, -1.0, -3.0), record(1, -3.0, -1.0)]).unwrap();
    let cfg = config(Mode::Threshold(1.0));
    let out = tag_corpus(&pairs, &select(&pairs, &cfg), &cfg).unwrap();
    assert_eq!(out[0].synthetic, "s t");
    assert_eq!(out[1].synthetic, "<U> u v");
    assert_eq!(out[1].natural, "natural 1");
}

proptest! {
    #[test]
    fn quantile_selects_floor_of_fraction(
        logps in prop::collection::vec((-50.0f64..-0.01, -50.0f64..-0.01), 0..120),
        q in 0.0f64..=1.0,
    ) {
        let recs: Vec<BtRecord> = logps.iter().enumerate().map(|(i, (a, b))| record(i as u64, *a, *b)).collect();
        let pairs = score_pairs(&recs).unwrap();
        let out = select(&pairs, &config(Mode::Quantile(q)));
        prop_assert_eq!(out.unsup_count(), (q * recs.len() as f64 + 1e-9).floor() as usize);
        // Every unsupervised pick has ΔP at least that of every supervised one.
        let min_unsup = pairs.iter().zip(&out.choices).filter(|(_, c)| **c == Choice::Unsup).map(|(p, _)| p.delta_p).fold(f64::INFINITY, f64::min);
        let max_sup = pairs.iter().zip(&out.choices).filter(|(_, c)| **c == Choice::Sup).map(|(p, _)| p.delta_p).fold(0.0, f64::max);
        prop_assert!(min_unsup >= max_sup);
    }

    #[test]
    fn both_bins_are_subsets_of_each_side(scores in prop::collection::vec((0u8..=6, 0u8..=6), 1..60)) {
        let sup: Vec<RatingRecord> = scores.iter().enumerate().map(|(i, (a, _))| RatingRecord::new(i as u64, "sup", Scheme::SideBySide, *a as f64).unwrap()).collect();
        let unsup: Vec<RatingRecord> = scores.iter().enumerate().map(|(i, (_, b))| RatingRecord::new(i as u64, "unsup", Scheme::SideBySide, *b as f64).unwrap()).collect();
        let bins = both_intersection(&sup, &unsup).unwrap();
        let mut total = 0;
        for b in AdequacyBin::ALL {
            for id in bins.both(b) {
                prop_assert_eq!(bins.sup[id], b);
                prop_assert_eq!(bins.unsup[id], b);
            }
            total += bins.both(b).len();
        }
        prop_assert!(total <= scores.len());
    }

    #[test]
    fn pooled_equals_mean_for_equal_lengths(edits in prop::collection::vec(0u32..20, 1..40)) {
        let metric: SentenceMetric = edits.iter().enumerate().map(|(i, e)| (i as u64, MetricValue::rate(*e as f64, 10.0))).collect();
        let mean = aggregate(&metric, metric.keys(), Aggregation::Mean).unwrap().unwrap();
        let pooled = aggregate(&metric, metric.keys(), Aggregation::Pooled).unwrap().unwrap();
        prop_assert!((mean - pooled).abs() < 1e-12);
    }
}
