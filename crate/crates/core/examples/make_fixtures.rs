//! Writes the synthetic walkthrough corpus.
//!
//! ```text
//! cargo run --example make_fixtures -- crates/core/fixtures/walkthrough
//! ```
//!
//! Sentences come from a small English/German template grammar in which
//! every word carries a concept slot, so gold tags and word alignments
//! fall out of generation. System outputs are degraded copies of the
//! German reference whose damage follows their adequacy rating.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NOUNS: &[(&str, &str)] = &[
    ("cat", "Katze"),
    ("dog", "Hund"),
    ("house", "Haus"),
    ("city", "Stadt"),
    ("government", "Regierung"),
    ("law", "Gesetz"),
    ("child", "Kind"),
    ("car", "Auto"),
    ("book", "Buch"),
    ("teacher", "Lehrer"),
    ("market", "Markt"),
    ("river", "Fluss"),
    ("company", "Firma"),
    ("price", "Preis"),
    ("doctor", "Arzt"),
    ("letter", "Brief"),
    ("garden", "Garten"),
    ("train", "Zug"),
    ("school", "Schule"),
    ("friend", "Freund"),
    ("minister", "Minister"),
    ("report", "Bericht"),
    ("street", "Straße"),
    ("village", "Dorf"),
];

/// English past and participle, German finite past and participle.
const VERBS: &[(&str, &str, &str, &str)] = &[
    ("saw", "seen", "sah", "gesehen"),
    ("bought", "bought", "kaufte", "gekauft"),
    ("found", "found", "fand", "gefunden"),
    ("built", "built", "baute", "gebaut"),
    ("sold", "sold", "verkaufte", "verkauft"),
    ("visited", "visited", "besuchte", "besucht"),
    ("wrote", "written", "schrieb", "geschrieben"),
    ("opened", "opened", "öffnete", "geöffnet"),
    ("needed", "needed", "brauchte", "gebraucht"),
    ("described", "described", "beschrieb", "beschrieben"),
];

const ADJS: &[(&str, &str)] = &[
    ("old", "alte"),
    ("new", "neue"),
    ("big", "große"),
    ("small", "kleine"),
    ("red", "rote"),
    ("good", "gute"),
    ("famous", "berühmte"),
    ("quiet", "ruhige"),
];

const ADPS: &[(&str, &str)] = &[("in", "in"), ("with", "mit"), ("near", "bei"), ("after", "nach")];
const NAMES: &[&str] = &["Berlin", "Anna", "Peter", "Maria", "Hamburg", "Thomas"];
const PRONS: &[(&str, &str)] = &[("he", "er"), ("she", "sie"), ("we", "wir"), ("they", "sie")];
const ADVS: &[(&str, &str)] = &[("yesterday", "gestern"), ("often", "oft"), ("today", "heute"), ("again", "wieder")];
const ARTICLES: &[&str] = &["der", "die", "das", "den", "dem"];

#[derive(Clone, Debug)]
struct Word {
    text: String,
    tag: &'static str,
    slot: usize,
}

#[derive(Clone, Debug)]
struct Sentence {
    en: Vec<Word>,
    /// Grammatical German order.
    de: Vec<Word>,
    /// German words in English order.
    de_mono: Vec<Word>,
}

struct Builder {
    en: Vec<Word>,
    de: Vec<Word>,
    slot: usize,
}

impl Builder {
    fn new() -> Self {
        Builder {
            en: Vec::new(),
            de: Vec::new(),
            slot: 0,
        }
    }

    /// Adds one aligned concept; returns its slot.
    fn pair(&mut self, en: &str, en_tag: &'static str, de: &str, de_tag: &'static str) -> usize {
        let slot = self.slot;
        self.slot += 1;
        self.en.push(Word {
            text: en.into(),
            tag: en_tag,
            slot,
        });
        self.de.push(Word {
            text: de.into(),
            tag: de_tag,
            slot,
        });
        slot
    }

    fn de_only(&mut self, de: &str, de_tag: &'static str) {
        let slot = self.slot;
        self.slot += 1;
        self.de.push(Word {
            text: de.into(),
            tag: de_tag,
            slot,
        });
    }

    /// Noun phrase; German articles are chosen freely.
    fn np(&mut self, rng: &mut ChaCha8Rng, allow_adj: bool) {
        let art = ARTICLES.choose(rng).unwrap();
        if rng.gen_bool(0.2) {
            self.pair("a", "DET", if rng.gen_bool(0.5) { "ein" } else { "eine" }, "ART");
        } else {
            self.pair("the", "DET", art, "ART");
        }
        if allow_adj && rng.gen_bool(0.4) {
            let (e, d) = ADJS.choose(rng).unwrap();
            self.pair(e, "ADJ", d, "ADJA");
        }
        let (e, d) = NOUNS.choose(rng).unwrap();
        self.pair(e, "NOUN", d, "NN");
    }

    fn subject(&mut self, rng: &mut ChaCha8Rng) {
        match rng.gen_range(0..3) {
            0 => {
                let (e, d) = PRONS.choose(rng).unwrap();
                self.pair(e, "PRON", d, "PPER");
            }
            1 => {
                let n = NAMES.choose(rng).unwrap();
                self.pair(n, "PROPN", n, "NE");
            }
            _ => self.np(rng, true),
        }
    }
}

fn sentence(rng: &mut ChaCha8Rng) -> Sentence {
    let mut b = Builder::new();
    let (ve, ep, vd, vp) = *VERBS.choose(rng).unwrap();
    // German order as a permutation of English positions, built per template.
    let de_order: Vec<usize> = match rng.gen_range(0..4) {
        // SUBJ VERB OBJ [PP] .
        0 => {
            b.subject(rng);
            b.pair(ve, "VERB", vd, "VVFIN");
            b.np(rng, true);
            if rng.gen_bool(0.5) {
                let (e, d) = ADPS.choose(rng).unwrap();
                b.pair(e, "ADP", d, "APPR");
                b.np(rng, false);
            }
            b.pair(".", "PUNCT", ".", "$.");
            (0..b.de.len()).collect()
        }
        // ADV SUBJ VERB OBJ . -> ADV VERB SUBJ OBJ .
        1 => {
            let (ae, ad) = ADVS.choose(rng).unwrap();
            b.pair(ae, "ADV", ad, "ADV");
            let s0 = b.de.len();
            b.subject(rng);
            let s1 = b.de.len();
            b.pair(ve, "VERB", vd, "VVFIN");
            b.np(rng, true);
            b.pair(".", "PUNCT", ".", "$.");
            let mut o = vec![0, s1];
            o.extend(s0..s1);
            o.extend(s1 + 1..b.de.len());
            o
        }
        // SUBJ has PART OBJ . -> SUBJ hat OBJ PART .
        2 => {
            b.subject(rng);
            let aux = b.de.len();
            b.pair("has", "AUX", "hat", "VAFIN");
            let part = b.de.len();
            b.pair(ep, "VERB", vp, "VVPP");
            let o0 = b.de.len();
            b.np(rng, true);
            let o1 = b.de.len();
            b.pair(".", "PUNCT", ".", "$.");
            let mut o: Vec<usize> = (0..=aux).collect();
            o.extend(o0..o1);
            o.push(part);
            o.push(o1);
            o
        }
        // SUBJ said that SUBJ2 VERB OBJ . -> SUBJ sagte , dass SUBJ2 OBJ VERB .
        _ => {
            b.subject(rng);
            let said = b.de.len();
            b.pair("said", "VERB", "sagte", "VVFIN");
            b.de_only(",", "$,");
            let comma = b.de.len() - 1;
            b.pair("that", "SCONJ", "dass", "KOUS");
            let s0 = b.de.len();
            b.subject(rng);
            let v = b.de.len();
            b.pair(ve, "VERB", vd, "VVFIN");
            let o0 = b.de.len();
            b.np(rng, true);
            let o1 = b.de.len();
            b.pair(".", "PUNCT", ".", "$.");
            let mut o: Vec<usize> = (0..=said).collect();
            o.push(comma);
            o.push(comma + 1);
            o.extend(s0..v);
            o.extend(o0..o1);
            o.push(v);
            o.push(o1);
            o
        }
    };
    // `b.de` was filled in English order; the monotone variant keeps it.
    let de_mono = b.de.clone();
    let de = de_order.iter().map(|&i| b.de[i].clone()).collect();
    Sentence { en: b.en, de, de_mono }
}

/// Damages a German word sequence: lexical swaps, dropped words.
fn degrade(words: &[Word], rng: &mut ChaCha8Rng, rate: f64) -> Vec<Word> {
    let mut out = Vec::with_capacity(words.len());
    for w in words {
        if w.tag != "$." && rng.gen_bool(rate / 3.0) {
            continue;
        }
        let mut w = w.clone();
        if rng.gen_bool(rate) {
            w.text = match w.tag {
                "NN" => NOUNS.choose(rng).unwrap().1.to_string(),
                "ADJA" => ADJS.choose(rng).unwrap().1.to_string(),
                "VVFIN" => VERBS.choose(rng).unwrap().2.to_string(),
                "VVPP" => VERBS.choose(rng).unwrap().3.to_string(),
                "ART" => ARTICLES.choose(rng).unwrap().to_string(),
                _ => w.text,
            };
        }
        out.push(w);
    }
    if out.len() == 1 {
        out = words.to_vec();
    }
    out
}

fn text(words: &[Word]) -> String {
    words.iter().map(|w| w.text.as_str()).collect::<Vec<_>>().join(" ")
}

fn conllu(sentences: &[Vec<Word>], column: usize) -> String {
    let mut out = String::new();
    for (id, s) in sentences.iter().enumerate() {
        let _ = writeln!(out, "# sent_id = {id}");
        for (i, w) in s.iter().enumerate() {
            let (upos, xpos) = if column == 3 { (w.tag, "_") } else { ("_", w.tag) };
            let _ = writeln!(out, "{}\t{}\t_\t{upos}\t{xpos}\t_\t_\t_\t_\t_", i + 1, w.text);
        }
        out.push('\n');
    }
    out
}

fn lines<I: IntoIterator<Item = String>>(items: I) -> String {
    let mut out = String::new();
    for l in items {
        out.push_str(&l);
        out.push('\n');
    }
    out
}

/// Side-by-side bin pairs for 1000 items: LL, MM, HH agreement counts
/// 86/255/218 and the remaining mass spread over disagreements.
const BIN_PAIRS: &[((u8, u8), usize)] = &[
    ((0, 0), 86),
    ((1, 1), 255),
    ((2, 2), 218),
    ((0, 1), 64),
    ((0, 2), 37),
    ((1, 0), 60),
    ((1, 2), 106),
    ((2, 0), 47),
    ((2, 1), 127),
];

fn score_in_bin(bin: u8, rng: &mut ChaCha8Rng) -> u8 {
    match bin {
        0 => rng.gen_range(0..=2),
        1 => rng.gen_range(3..=4),
        _ => rng.gen_range(5..=6),
    }
}

fn damage_for(bin: u8) -> f64 {
    [0.45, 0.2, 0.05][bin as usize]
}

fn write(dir: &Path, name: &str, contents: String) {
    fs::write(dir.join(name), contents).unwrap_or_else(|e| panic!("{name}: {e}"));
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "crates/core/fixtures/walkthrough".into()));
    fs::create_dir_all(&dir).expect("output directory");
    let mut rng = ChaCha8Rng::seed_from_u64(20_211_106);

    // Tagger training data.
    let train: Vec<Sentence> = (0..2000).map(|_| sentence(&mut rng)).collect();
    let en_train: Vec<Vec<Word>> = train.iter().map(|s| s.en.clone()).collect();
    let de_train: Vec<Vec<Word>> = train.iter().map(|s| s.de.clone()).collect();
    write(&dir, "train.en.conllu", conllu(&en_train, 3));
    write(&dir, "train.de.conllu", conllu(&de_train, 4));

    // Test set with ratings and two system outputs.
    let mut pairs: Vec<(u8, u8)> = BIN_PAIRS.iter().flat_map(|(p, n)| std::iter::repeat_n(*p, *n)).collect();
    assert_eq!(pairs.len(), 1000);
    pairs.shuffle(&mut rng);
    let test: Vec<Sentence> = (0..1000).map(|_| sentence(&mut rng)).collect();
    let mut ratings = String::from("sentence_id\tsystem_id\tscheme\tscore\n");
    let (mut sup, mut unsup, mut align) = (Vec::new(), Vec::new(), Vec::new());
    for (id, (s, (bs, bu))) in test.iter().zip(&pairs).enumerate() {
        let _ = writeln!(ratings, "{id}\tsup\tsbs\t{}", score_in_bin(*bs, &mut rng));
        let _ = writeln!(ratings, "{id}\tunsup\tsbs\t{}", score_in_bin(*bu, &mut rng));
        let sup_base = if rng.gen_bool(0.2) { &s.de_mono } else { &s.de };
        let unsup_base = if rng.gen_bool(0.5) { &s.de_mono } else { &s.de };
        let sw = degrade(sup_base, &mut rng, damage_for(*bs));
        // Source-to-output links through shared slots.
        let links: Vec<String> = s
            .en
            .iter()
            .enumerate()
            .filter_map(|(i, w)| sw.iter().position(|x| x.slot == w.slot).map(|j| format!("{i}-{j}")))
            .collect();
        align.push(links.join(" "));
        sup.push(text(&sw));
        unsup.push(text(&degrade(unsup_base, &mut rng, damage_for(*bu))));
    }
    write(&dir, "test.en.txt", lines(test.iter().map(|s| text(&s.en))));
    write(&dir, "test.de.txt", lines(test.iter().map(|s| text(&s.de))));
    write(&dir, "sup.de.txt", lines(sup));
    write(&dir, "unsup.de.txt", lines(unsup));
    write(&dir, "sup.align", lines(align));
    write(&dir, "ratings.tsv", ratings);

    // LM corpora: natural German and English-ordered German.
    write(
        &dir,
        "natural.de.txt",
        lines((0..5000).map(|_| text(&sentence(&mut rng).de))),
    );
    write(
        &dir,
        "translated.de.txt",
        lines((0..5000).map(|_| {
            let s = sentence(&mut rng);
            text(&degrade(&s.de_mono, &mut rng, 0.05))
        })),
    );

    // Raw bitext with duplicates, unbalanced and empty pairs.
    let mut bitext = Vec::new();
    for _ in 0..3000 {
        let s = sentence(&mut rng);
        let (en, de) = (text(&s.en), text(&s.de));
        match rng.gen_range(0..40) {
            0 => bitext.push((en.clone(), String::new())),
            1 => bitext.push((en.clone(), format!("{de} {de}"))),
            2 | 3 => {
                bitext.push((en.clone(), de.clone()));
                bitext.push((en, de));
            }
            _ => bitext.push((en, de)),
        }
        if bitext.len() >= 3000 {
            break;
        }
    }
    write(&dir, "bitext.en.txt", lines(bitext.iter().map(|p| p.0.clone())));
    write(&dir, "bitext.de.txt", lines(bitext.iter().map(|p| p.1.clone())));

    // Scored back-translation candidates for natural German sentences.
    let mut bt = String::from("id\tsrc\tsup_bt\tsup_logP\tunsup_bt\tunsup_logP\n");
    for id in 0..1000 {
        let s = sentence(&mut rng);
        let sup_bt = text(&s.en);
        let mut noisy = s.en.clone();
        if rng.gen_bool(0.5) {
            let (e, _) = NOUNS.choose(&mut rng).unwrap();
            if let Some(w) = noisy.iter_mut().find(|w| w.tag == "NOUN") {
                w.text = e.to_string();
            }
        }
        let unsup_bt = text(&noisy);
        let sup_lp = -(s.en.len() as f64) * rng.gen_range(0.2..1.2);
        let unsup_lp = -(noisy.len() as f64) * rng.gen_range(0.3..1.6);
        let _ = writeln!(bt, "{id}\t{}\t{sup_bt}\t{sup_lp:.6}\t{unsup_bt}\t{unsup_lp:.6}", text(&s.de));
    }
    write(&dir, "bt_scored.tsv", bt);
}
