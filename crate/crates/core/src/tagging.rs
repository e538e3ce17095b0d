//! POS tag sequences: CoNLL-U ingestion, a lexicon/suffix baseline tagger,
//! and tagset projection (e.g. TIGER onto Universal Dependencies).
//!
//! Downstream metrics treat tags as opaque symbols, so any tagset works
//! as long as hypothesis and reference share it.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use crate::corpus_io::{open, Lines, TokenSequence};
use crate::error::{Error, Result};

pub const UD_TAGS: [&str; 17] = [
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM", "PART", "PRON", "PROPN",
    "PUNCT", "SCONJ", "SYM", "VERB", "X",
];

/// STTS as used in the TIGER treebank, with its fine-grained verb classes.
pub const TIGER_TAGS: [&str; 56] = [
    "$(", "$,", "$.", "ADJA", "ADJD", "ADV", "APPO", "APPR", "APPRART", "APZR", "ART", "CARD",
    "FM", "ITJ", "KOKOM", "KON", "KOUI", "KOUS", "NE", "NN", "NNE", "PAV", "PROAV", "PDAT", "PDS",
    "PIAT", "PIDAT", "PIS", "PPER", "PPOSAT", "PPOSS", "PRELAT", "PRELS", "PRF", "PTKA", "PTKANT",
    "PTKNEG", "PTKVZ", "PTKZU", "PWAT", "PWAV", "PWS", "TRUNC", "VAFIN", "VAIMP", "VAINF", "VAPP",
    "VMFIN", "VMINF", "VMPP", "VVFIN", "VVIMP", "VVINF", "VVIZU", "VVPP", "XY",
];

/// TIGER → UD projection following the published STTS conversion table.
pub const TIGER_TO_UD: [(&str, &str); 56] = [
    ("$(", "PUNCT"),
    ("$,", "PUNCT"),
    ("$.", "PUNCT"),
    ("ADJA", "ADJ"),
    ("ADJD", "ADJ"),
    ("ADV", "ADV"),
    ("APPO", "ADP"),
    ("APPR", "ADP"),
    ("APPRART", "ADP"),
    ("APZR", "ADP"),
    ("ART", "DET"),
    ("CARD", "NUM"),
    ("FM", "X"),
    ("ITJ", "INTJ"),
    ("KOKOM", "CCONJ"),
    ("KON", "CCONJ"),
    ("KOUI", "SCONJ"),
    ("KOUS", "SCONJ"),
    ("NE", "PROPN"),
    ("NN", "NOUN"),
    ("NNE", "PROPN"),
    ("PAV", "ADV"),
    ("PROAV", "ADV"),
    ("PDAT", "DET"),
    ("PDS", "PRON"),
    ("PIAT", "DET"),
    ("PIDAT", "DET"),
    ("PIS", "PRON"),
    ("PPER", "PRON"),
    ("PPOSAT", "DET"),
    ("PPOSS", "PRON"),
    ("PRELAT", "DET"),
    ("PRELS", "PRON"),
    ("PRF", "PRON"),
    ("PTKA", "PART"),
    ("PTKANT", "PART"),
    ("PTKNEG", "PART"),
    ("PTKVZ", "ADP"),
    ("PTKZU", "PART"),
    ("PWAT", "DET"),
    ("PWAV", "ADV"),
    ("PWS", "PRON"),
    ("TRUNC", "X"),
    ("VAFIN", "AUX"),
    ("VAIMP", "AUX"),
    ("VAINF", "AUX"),
    ("VAPP", "AUX"),
    ("VMFIN", "VERB"),
    ("VMINF", "VERB"),
    ("VMPP", "VERB"),
    ("VVFIN", "VERB"),
    ("VVIMP", "VERB"),
    ("VVINF", "VERB"),
    ("VVIZU", "VERB"),
    ("VVPP", "VERB"),
    ("XY", "X"),
];

pub fn normalize_tag(tag: &str) -> String {
    tag.trim().to_uppercase()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSet {
    pub name: String,
    pub inventory: BTreeSet<String>,
}

impl TagSet {
    pub fn new<I, S>(name: &str, tags: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut inventory = BTreeSet::new();
        for t in tags {
            let t = normalize_tag(t.as_ref());
            if t.is_empty() {
                return Err(Error::Invalid(format!("tagset {name}: empty tag")));
            }
            inventory.insert(t);
        }
        if inventory.is_empty() {
            return Err(Error::Invalid(format!("tagset {name}: empty inventory")));
        }
        Ok(TagSet {
            name: name.to_string(),
            inventory,
        })
    }

    pub fn ud() -> Self {
        TagSet::new("ud", UD_TAGS).expect("static inventory")
    }

    pub fn tiger() -> Self {
        TagSet::new("tiger", TIGER_TAGS).expect("static inventory")
    }

    /// Built-in inventory for `ud` / `tiger`, `None` for anything else.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "ud" => Some(Self::ud()),
            "tiger" => Some(Self::tiger()),
            _ => None,
        }
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.inventory.contains(tag)
    }

    fn check(&self, tag: &str) -> Result<()> {
        if self.contains(tag) {
            Ok(())
        } else {
            Err(Error::UnknownTag {
                tag: tag.to_string(),
                tagset: self.name.clone(),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSentence {
    pub id: u64,
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
    pub tagset: String,
}

impl TaggedSentence {
    pub fn new(id: u64, tokens: Vec<String>, tags: Vec<String>, tagset: &str) -> Result<Self> {
        if tokens.len() != tags.len() {
            return Err(Error::LengthMismatch {
                left: tokens.len(),
                right: tags.len(),
            });
        }
        Ok(TaggedSentence {
            id,
            tokens,
            tags,
            tagset: tagset.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn validate(&self, tagset: &TagSet) -> Result<()> {
        if self.tagset != tagset.name {
            return Err(Error::TagsetMismatch {
                hyp: self.tagset.clone(),
                reference: tagset.name.clone(),
            });
        }
        self.tags.iter().try_for_each(|t| tagset.check(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagColumn {
    Upos,
    Xpos,
}

impl TagColumn {
    fn index(self) -> usize {
        match self {
            TagColumn::Upos => 3,
            TagColumn::Xpos => 4,
        }
    }
}

impl FromStr for TagColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upos" => Ok(TagColumn::Upos),
            "xpos" => Ok(TagColumn::Xpos),
            other => Err(Error::Invalid(format!(
                "unknown CoNLL-U column {other:?} (expected upos or xpos)"
            ))),
        }
    }
}

pub fn read_conllu(path: impl AsRef<Path>, column: TagColumn, tagset: &str) -> Result<Vec<TaggedSentence>> {
    parse_conllu(open(path.as_ref())?, column, tagset)
}

/// Reads one sentence per blank-line separated block. Comment lines,
/// multiword-token ranges (`1-2`) and empty nodes (`1.1`) are skipped.
pub fn parse_conllu<R: BufRead>(
    lines: Lines<R>,
    column: TagColumn,
    tagset: &str,
) -> Result<Vec<TaggedSentence>> {
    let origin = lines.origin().to_string();
    let mut out = Vec::new();
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    let mut in_block = false;

    let flush = |tokens: &mut Vec<String>, tags: &mut Vec<String>, out: &mut Vec<TaggedSentence>| {
        let id = out.len() as u64;
        out.push(TaggedSentence {
            id,
            tokens: std::mem::take(tokens),
            tags: std::mem::take(tags),
            tagset: tagset.to_string(),
        });
    };

    for item in lines {
        let (_, line) = item?;
        if line.trim().is_empty() {
            if in_block {
                flush(&mut tokens, &mut tags, &mut out);
                in_block = false;
            }
            continue;
        }
        in_block = true;
        if line.starts_with('#') {
            continue;
        }
        let sentence = out.len();
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 10 {
            return Err(Error::Conllu {
                origin,
                sentence,
                message: format!("expected 10 columns, found {}", fields.len()),
            });
        }
        let id = fields[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        if id.parse::<usize>() != Ok(tokens.len() + 1) {
            return Err(Error::Conllu {
                origin,
                sentence,
                message: format!("word id {id:?} out of sequence"),
            });
        }
        let tag = normalize_tag(fields[column.index()]);
        if tag.is_empty() || tag == "_" {
            return Err(Error::Conllu {
                origin,
                sentence,
                message: format!("word {id} has no tag in the selected column"),
            });
        }
        tokens.push(fields[1].to_string());
        tags.push(tag);
    }
    if in_block {
        flush(&mut tokens, &mut tags, &mut out);
    }
    Ok(out)
}

/// Minimal CoNLL-U: the tag goes into `column`, every other annotation
/// column is `_`.
pub fn write_conllu(sentences: &[TaggedSentence], column: TagColumn) -> String {
    let mut out = String::new();
    for s in sentences {
        // Keeps empty sentences as their own block.
        let _ = writeln!(out, "# sent_id = {}", s.id);
        for (i, (token, tag)) in s.tokens.iter().zip(&s.tags).enumerate() {
            let (upos, xpos) = match column {
                TagColumn::Upos => (tag.as_str(), "_"),
                TagColumn::Xpos => ("_", tag.as_str()),
            };
            let _ = writeln!(out, "{}\t{token}\t_\t{upos}\t{xpos}\t_\t_\t_\t_\t_", i + 1);
        }
        out.push('\n');
    }
    out
}

/// Tags-only format: one sentence per line, whitespace-separated tags.
pub fn parse_tag_lines<R: BufRead>(lines: Lines<R>, tagset: &str) -> Result<Vec<TaggedSentence>> {
    lines
        .map(|item| {
            let (n, line) = item?;
            let tags: Vec<String> = line.split_whitespace().map(normalize_tag).collect();
            Ok(TaggedSentence {
                id: n as u64 - 1,
                tokens: tags.clone(),
                tags,
                tagset: tagset.to_string(),
            })
        })
        .collect()
}

pub fn read_tag_lines(path: impl AsRef<Path>, tagset: &str) -> Result<Vec<TaggedSentence>> {
    parse_tag_lines(open(path.as_ref())?, tagset)
}

const MAX_SUFFIX: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconTagger {
    pub tagset: TagSet,
    pub token_table: HashMap<String, String>,
    pub suffix_table: HashMap<String, String>,
    pub default_tag: String,
}

fn modal(counts: &BTreeMap<String, usize>) -> String {
    // BTreeMap iterates tags in ascending order, so `>` keeps the
    // lexicographically smallest among equal counts.
    let mut best: Option<(&String, usize)> = None;
    for (tag, &n) in counts {
        if best.is_none_or(|(_, m)| n > m) {
            best = Some((tag, n));
        }
    }
    best.expect("non-empty counts").0.clone()
}

fn suffixes(token: &str) -> impl Iterator<Item = &str> {
    let boundaries: Vec<usize> = token.char_indices().map(|(i, _)| i).collect();
    let n = boundaries.len();
    (1..=MAX_SUFFIX.min(n)).map(move |k| &token[boundaries[n - k]..])
}

pub fn train_tagger(corpus: &[TaggedSentence], tagset: &TagSet) -> Result<LexiconTagger> {
    let mut by_token: HashMap<&str, BTreeMap<String, usize>> = HashMap::new();
    let mut by_suffix: HashMap<&str, BTreeMap<String, usize>> = HashMap::new();
    let mut overall: BTreeMap<String, usize> = BTreeMap::new();

    for sentence in corpus {
        if sentence.tokens.len() != sentence.tags.len() {
            return Err(Error::LengthMismatch {
                left: sentence.tokens.len(),
                right: sentence.tags.len(),
            });
        }
        for (token, tag) in sentence.tokens.iter().zip(&sentence.tags) {
            tagset.check(tag)?;
            *by_token.entry(token).or_default().entry(tag.clone()).or_default() += 1;
            for suffix in suffixes(token) {
                *by_suffix.entry(suffix).or_default().entry(tag.clone()).or_default() += 1;
            }
            *overall.entry(tag.clone()).or_default() += 1;
        }
    }
    if overall.is_empty() {
        return Err(Error::Empty("tagger training corpus"));
    }

    Ok(LexiconTagger {
        tagset: tagset.clone(),
        token_table: by_token
            .into_iter()
            .map(|(k, v)| (k.to_string(), modal(&v)))
            .collect(),
        suffix_table: by_suffix
            .into_iter()
            .map(|(k, v)| (k.to_string(), modal(&v)))
            .collect(),
        default_tag: modal(&overall),
    })
}

impl LexiconTagger {
    pub fn tag_token(&self, token: &str) -> &str {
        if let Some(tag) = self.token_table.get(token) {
            return tag;
        }
        let longest_first: Vec<&str> = suffixes(token).collect();
        for suffix in longest_first.iter().rev() {
            if let Some(tag) = self.suffix_table.get(*suffix) {
                return tag;
            }
        }
        &self.default_tag
    }

    pub fn tag(&self, sentence: &TokenSequence) -> TaggedSentence {
        TaggedSentence {
            id: sentence.id,
            tokens: sentence.tokens.clone(),
            tags: sentence
                .tokens
                .iter()
                .map(|t| self.tag_token(t).to_string())
                .collect(),
            tagset: self.tagset.name.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagMapping {
    pub target: String,
    pub table: HashMap<String, String>,
}

impl TagMapping {
    pub fn new<'a>(target: &str, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        TagMapping {
            target: target.to_string(),
            table: pairs
                .into_iter()
                .map(|(a, b)| (normalize_tag(a), normalize_tag(b)))
                .collect(),
        }
    }

    pub fn tiger_to_ud() -> Self {
        TagMapping::new("ud", TIGER_TO_UD)
    }

    /// Two-column TSV, `source_tag<TAB>target_tag`; `#` lines are comments.
    pub fn read(path: impl AsRef<Path>, target: &str) -> Result<Self> {
        let lines = open(path.as_ref())?;
        let origin = lines.origin().to_string();
        let mut table = HashMap::new();
        for item in lines {
            let (n, line) = item?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 {
                return Err(Error::parse(&origin, n, 1, "expected two tab-separated columns"));
            }
            table.insert(normalize_tag(fields[0]), normalize_tag(fields[1]));
        }
        Ok(TagMapping {
            target: target.to_string(),
            table,
        })
    }
}

pub fn map_tagset(tagged: &TaggedSentence, mapping: &TagMapping) -> Result<TaggedSentence> {
    let tags = tagged
        .tags
        .iter()
        .map(|t| {
            mapping
                .table
                .get(t)
                .cloned()
                .ok_or_else(|| Error::UnmappedTag(t.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TaggedSentence {
        id: tagged.id,
        tokens: tagged.tokens.clone(),
        tags,
        tagset: mapping.target.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn lines(s: &str) -> Lines<Cursor<Vec<u8>>> {
        Lines::new(Cursor::new(s.as_bytes().to_vec()), "test")
    }

    fn sent(id: u64, words: &str, tags: &str) -> TaggedSentence {
        TaggedSentence::new(
            id,
            words.split_whitespace().map(String::from).collect(),
            tags.split_whitespace().map(String::from).collect(),
            "ud",
        )
        .unwrap()
    }

    const CONLLU: &str = "# sent_id = 1\n# text = I run\n\
1\tI\tI\tPRON\tPPER\t_\t2\tnsubj\t_\t_\n\
2\trun\trun\tVERB\tVVFIN\t_\t0\troot\t_\t_\n\
\n\
1-2\tzum\t_\t_\t_\t_\t_\t_\t_\t_\n\
1\tzu\tzu\tADP\tAPPR\t_\t0\troot\t_\t_\n\
2\tdem\tder\tdet\tART\t_\t1\tdet\t_\t_\n";

    #[test]
    fn conllu_upos() {
        let s = parse_conllu(lines(CONLLU), TagColumn::Upos, "ud").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].tags, vec!["PRON", "VERB"]);
        assert_eq!(s[1].tokens, vec!["zu", "dem"]);
        assert_eq!(s[1].tags, vec!["ADP", "DET"]);
        assert_eq!(s[1].id, 1);
    }

    #[test]
    fn conllu_xpos() {
        let s = parse_conllu(lines(CONLLU), TagColumn::Xpos, "tiger").unwrap();
        assert_eq!(s[0].tags, vec!["PPER", "VVFIN"]);
        assert_eq!(s[1].tags, vec!["APPR", "ART"]);
        for x in &s {
            x.validate(&TagSet::tiger()).unwrap();
        }
    }

    #[test]
    fn conllu_ragged_block() {
        let bad = "1\tI\t_\tPRON\t_\t_\t_\t_\t_\t_\n\n1\ta\t_\tDET\n";
        match parse_conllu(lines(bad), TagColumn::Upos, "ud").unwrap_err() {
            Error::Conllu { sentence, .. } => assert_eq!(sentence, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn conllu_roundtrip_through_writer() {
        let s = parse_conllu(lines(CONLLU), TagColumn::Xpos, "tiger").unwrap();
        let text = write_conllu(&s, TagColumn::Xpos);
        let back = parse_conllu(lines(&text), TagColumn::Xpos, "tiger").unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn modal_tag_with_counting_oracle() {
        let corpus = vec![
            sent(0, "der Hund", "DET NOUN"),
            sent(1, "der der", "DET PRON"),
            sent(2, "der Mann", "DET NOUN"),
        ];
        let tagger = train_tagger(&corpus, &TagSet::ud()).unwrap();
        assert_eq!(tagger.token_table["der"], "DET");
        assert_eq!(tagger.default_tag, "DET");
    }

    #[test]
    fn ties_prefer_smallest_tag() {
        let corpus = vec![sent(0, "das das das das", "PRON DET PRON DET")];
        let tagger = train_tagger(&corpus, &TagSet::ud()).unwrap();
        assert_eq!(tagger.token_table["das"], "DET");
    }

    #[test]
    fn default_is_corpus_mode() {
        let corpus = vec![sent(0, "a b c", "NOUN NOUN NOUN")];
        let tagger = train_tagger(&corpus, &TagSet::ud()).unwrap();
        assert_eq!(tagger.default_tag, "NOUN");
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(train_tagger(&[], &TagSet::ud()).is_err());
        assert!(train_tagger(&[sent(0, "", "")], &TagSet::ud()).is_err());
    }

    #[test]
    fn foreign_tag_rejected() {
        let corpus = vec![sent(0, "a", "NN")];
        assert!(matches!(
            train_tagger(&corpus, &TagSet::ud()),
            Err(Error::UnknownTag { .. })
        ));
    }

    #[test]
    fn lookup_order() {
        let corpus = vec![
            sent(0, "laufen Katze", "VERB NOUN"),
            sent(1, "gehen schnell", "VERB ADV"),
        ];
        let tagger = train_tagger(&corpus, &TagSet::ud()).unwrap();
        let s = |t: &str| TokenSequence::from_line(0, t);
        assert!(tagger.tag(&s("")).tags.is_empty());
        assert_eq!(tagger.tag(&s("Katze")).tags, vec!["NOUN"]);
        assert_eq!(tagger.tag_token("kaufen"), "VERB"); // suffix "aufen"
        assert_eq!(tagger.tag_token("Tatze"), "NOUN"); // suffix "atze"
        assert_eq!(tagger.tag_token("blitzschnell"), "ADV"); // suffix "hnell"
        assert_eq!(tagger.tag_token("xyz"), tagger.default_tag);
    }

    #[test]
    fn longest_suffix_wins() {
        // "-en" alone points to NOUN (two nouns), but the 4-char suffix
        // "ufen" is unambiguous VERB.
        let corpus = vec![
            sent(0, "laufen Garten Boden", "VERB NOUN NOUN"),
        ];
        let tagger = train_tagger(&corpus, &TagSet::ud()).unwrap();
        assert_eq!(tagger.suffix_table["en"], "NOUN");
        assert_eq!(tagger.tag_token("saufen"), "VERB");
        assert_eq!(tagger.tag_token("Laden"), "NOUN");
    }

    #[test]
    fn suffixes_respect_char_boundaries() {
        let v: Vec<&str> = suffixes("größe").collect();
        assert_eq!(v, vec!["e", "ße", "öße", "röße", "größe"]);
        let v: Vec<&str> = suffixes("ab").collect();
        assert_eq!(v, vec!["b", "ab"]);
    }

    #[test]
    fn training_is_deterministic() {
        let corpus = vec![
            sent(0, "a b c a", "DET NOUN VERB PRON"),
            sent(1, "b a c", "NOUN DET VERB"),
        ];
        let t1 = train_tagger(&corpus, &TagSet::ud()).unwrap();
        let t2 = train_tagger(&corpus, &TagSet::ud()).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn tiger_projection() {
        let s = TaggedSentence::new(
            0,
            vec!["Er".into(), "läuft".into()],
            vec!["PPER".into(), "VVFIN".into()],
            "tiger",
        )
        .unwrap();
        let m = map_tagset(&s, &TagMapping::tiger_to_ud()).unwrap();
        assert_eq!(m.tags, vec!["PRON", "VERB"]);
        assert_eq!(m.tagset, "ud");
        assert_eq!(m.tokens, s.tokens);
        m.validate(&TagSet::ud()).unwrap();
    }

    #[test]
    fn tiger_table_is_total_and_lands_in_ud() {
        let m = TagMapping::tiger_to_ud();
        let ud = TagSet::ud();
        for t in TIGER_TAGS {
            assert!(ud.contains(&m.table[t]), "{t}");
        }
    }

    #[test]
    fn identity_and_unmapped() {
        let s = sent(0, "a b", "DET NOUN");
        let id = TagMapping::new("ud", UD_TAGS.iter().map(|t| (*t, *t)));
        assert_eq!(map_tagset(&s, &id).unwrap().tags, s.tags);
        let partial = TagMapping::new("x", [("DET", "D")]);
        match map_tagset(&s, &partial).unwrap_err() {
            Error::UnmappedTag(t) => assert_eq!(t, "NOUN"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tag_lines_normalize_case() {
        let s = parse_tag_lines(lines("pron Verb\n\n"), "ud").unwrap();
        assert_eq!(s[0].tags, vec!["PRON", "VERB"]);
        assert!(s[1].is_empty());
    }
}
