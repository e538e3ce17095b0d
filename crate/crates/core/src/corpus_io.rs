//! Line-oriented corpus formats: plain text, parallel pairs, Pharaoh
//! alignments and human rating files, plus the length/ratio filter and
//! exact-pair deduplication applied before any analysis.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::warn;

use crate::error::{Error, Result};

/// One whitespace-tokenized sentence. `id` is its 0-based line index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenSequence {
    pub id: u64,
    pub tokens: Vec<String>,
}

impl TokenSequence {
    pub fn new(id: u64, tokens: Vec<String>) -> Self {
        debug_assert!(tokens.iter().all(|t| !t.is_empty()));
        TokenSequence { id, tokens }
    }

    pub fn from_line(id: u64, line: &str) -> Self {
        TokenSequence {
            id,
            tokens: line.split_whitespace().map(str::to_string).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens joined by single spaces.
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Origin {
    OrigSrc,
    OrigTgt,
    #[default]
    Unknown,
}

impl FromStr for Origin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orig-src" => Ok(Origin::OrigSrc),
            "orig-tgt" => Ok(Origin::OrigTgt),
            "unknown" => Ok(Origin::Unknown),
            other => Err(Error::Invalid(format!(
                "unknown origin {other:?} (expected orig-src, orig-tgt or unknown)"
            ))),
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::OrigSrc => "orig-src",
            Origin::OrigTgt => "orig-tgt",
            Origin::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelPair {
    pub id: u64,
    pub src: TokenSequence,
    pub tgt: TokenSequence,
    pub origin: Origin,
}

impl ParallelPair {
    pub fn new(id: u64, src: &str, tgt: &str, origin: Origin) -> Self {
        ParallelPair {
            id,
            src: TokenSequence::from_line(id, src),
            tgt: TokenSequence::from_line(id, tgt),
            origin,
        }
    }
}

/// Raw word alignment for one sentence pair; one-to-many and many-to-one
/// links are kept as they are.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AlignmentLinkSet {
    pub id: u64,
    pub links: Vec<(usize, usize)>,
}

impl AlignmentLinkSet {
    /// Checks the links against the lengths of the sentence pair they
    /// refer to.
    pub fn validate(&self, src_len: usize, tgt_len: usize) -> Result<()> {
        for &(s, t) in &self.links {
            if s >= src_len || t >= tgt_len {
                return Err(Error::Invalid(format!(
                    "alignment {}: link {s}-{t} outside sentence pair of lengths {src_len}/{tgt_len}",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Direct assessment, raw 0..=100.
    DirectAssessment,
    /// Side-by-side adequacy, integer 0..=6.
    SideBySide,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::DirectAssessment => "direct-assessment-0-100",
            Scheme::SideBySide => "side-by-side-0-6",
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Scheme::DirectAssessment => "da",
            Scheme::SideBySide => "sbs",
        }
    }

    pub fn check(self, score: f64) -> Result<()> {
        let ok = match self {
            Scheme::DirectAssessment => (0.0..=100.0).contains(&score),
            Scheme::SideBySide => (0.0..=6.0).contains(&score) && score.fract() == 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ScoreOutOfRange {
                scheme: self.name(),
                score,
            })
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "da" | "direct-assessment-0-100" => Ok(Scheme::DirectAssessment),
            "sbs" | "side-by-side-0-6" => Ok(Scheme::SideBySide),
            other => Err(Error::Invalid(format!(
                "unknown rating scheme {other:?} (expected da or sbs)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatingRecord {
    pub sentence_id: u64,
    pub system_id: String,
    pub scheme: Scheme,
    pub score: f64,
}

impl RatingRecord {
    pub fn new(sentence_id: u64, system_id: &str, scheme: Scheme, score: f64) -> Result<Self> {
        scheme.check(score)?;
        Ok(RatingRecord {
            sentence_id,
            system_id: system_id.to_string(),
            scheme,
            score,
        })
    }
}

/// Streams the lines of a UTF-8 reader, yielding `(1-based line number,
/// line without its terminator)`. Invalid UTF-8 is reported with the line
/// number rather than as a bare I/O error.
pub struct Lines<R> {
    reader: R,
    origin: String,
    line: usize,
    buf: Vec<u8>,
}

impl<R: BufRead> Lines<R> {
    pub fn new(reader: R, origin: impl Into<String>) -> Self {
        Lines {
            reader,
            origin: origin.into(),
            line: 0,
            buf: Vec::new(),
        }
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }
}

impl<R: BufRead> Iterator for Lines<R> {
    type Item = Result<(usize, String)>;

    fn next(&mut self) -> Option<Self::Item> {
        self.buf.clear();
        match self.reader.read_until(b'\n', &mut self.buf) {
            Ok(0) => None,
            Ok(_) => {
                self.line += 1;
                if self.buf.last() == Some(&b'\n') {
                    self.buf.pop();
                    if self.buf.last() == Some(&b'\r') {
                        self.buf.pop();
                    }
                }
                Some(
                    String::from_utf8(std::mem::take(&mut self.buf)).map_err(|_| Error::Utf8 {
                        origin: self.origin.clone(),
                        line: self.line,
                    })
                    .map(|s| (self.line, s)),
                )
            }
            Err(e) => Some(Err(Error::io(self.origin.clone(), e))),
        }
    }
}

pub(crate) fn open(path: &Path) -> Result<Lines<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(Lines::new(BufReader::new(file), path.display().to_string()))
}

pub fn read_lines(path: impl AsRef<Path>) -> Result<Vec<TokenSequence>> {
    let path = path.as_ref();
    parse_lines(open(path)?)
}

pub fn parse_lines<R: BufRead>(lines: Lines<R>) -> Result<Vec<TokenSequence>> {
    lines
        .map(|item| item.map(|(n, line)| TokenSequence::from_line(n as u64 - 1, &line)))
        .collect()
}

/// One sentence per line, tokens separated by single spaces.
pub fn write_lines<W: Write>(mut out: W, sentences: &[TokenSequence]) -> std::io::Result<()> {
    for s in sentences {
        writeln!(out, "{}", s.text())?;
    }
    Ok(())
}

pub fn read_alignments(path: impl AsRef<Path>) -> Result<Vec<AlignmentLinkSet>> {
    let path = path.as_ref();
    parse_alignments(open(path)?)
}

pub fn parse_alignments<R: BufRead>(lines: Lines<R>) -> Result<Vec<AlignmentLinkSet>> {
    let origin = lines.origin.clone();
    let mut out = Vec::new();
    for item in lines {
        let (n, line) = item?;
        let mut links = Vec::new();
        let mut seen = HashSet::new();
        for (col, field) in line.split_whitespace().enumerate() {
            let col = col + 1;
            let (s, t) = field
                .split_once('-')
                .ok_or_else(|| Error::parse(&origin, n, col, format!("expected i-j, found {field:?}")))?;
            let parse = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| Error::parse(&origin, n, col, format!("non-integer index in {field:?}")))
            };
            let link = (parse(s)?, parse(t)?);
            if !seen.insert(link) {
                return Err(Error::parse(&origin, n, col, format!("duplicate link {field}")));
            }
            links.push(link);
        }
        out.push(AlignmentLinkSet {
            id: n as u64 - 1,
            links,
        });
    }
    Ok(out)
}

pub fn write_alignments<W: Write>(mut out: W, sets: &[AlignmentLinkSet]) -> std::io::Result<()> {
    for set in sets {
        let items: Vec<String> = set.links.iter().map(|(s, t)| format!("{s}-{t}")).collect();
        writeln!(out, "{}", items.join(" "))?;
    }
    Ok(())
}

pub const RATINGS_HEADER: &str = "sentence_id\tsystem_id\tscheme\tscore";

pub fn read_ratings(path: impl AsRef<Path>) -> Result<Vec<RatingRecord>> {
    let path = path.as_ref();
    parse_ratings(open(path)?)
}

/// Tab-separated `sentence_id, system_id, scheme, score`. The header line
/// is optional; blank lines are skipped.
pub fn parse_ratings<R: BufRead>(lines: Lines<R>) -> Result<Vec<RatingRecord>> {
    let origin = lines.origin.clone();
    let mut out = Vec::new();
    for item in lines {
        let (n, line) = item?;
        if line.trim().is_empty() || (n == 1 && line.starts_with("sentence_id")) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                &origin,
                n,
                fields.len().min(4),
                format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        let sentence_id = fields[0]
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::parse(&origin, n, 1, format!("bad sentence id {:?}", fields[0])))?;
        let system_id = fields[1].trim();
        if system_id.is_empty() {
            return Err(Error::parse(&origin, n, 2, "empty system id"));
        }
        let scheme: Scheme = fields[2]
            .trim()
            .parse()
            .map_err(|e: Error| Error::parse(&origin, n, 3, e.to_string()))?;
        let score = fields[3]
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::parse(&origin, n, 4, format!("bad score {:?}", fields[3])))?;
        let record = RatingRecord::new(sentence_id, system_id, scheme, score)
            .map_err(|e| Error::parse(&origin, n, 4, e.to_string()))?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_ratings<W: Write>(mut out: W, records: &[RatingRecord]) -> std::io::Result<()> {
    writeln!(out, "{RATINGS_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            r.sentence_id,
            r.system_id,
            r.scheme.short_name(),
            r.score
        )?;
    }
    Ok(())
}

/// Reads two line-aligned files into pairs.
pub fn read_parallel(
    src: impl AsRef<Path>,
    tgt: impl AsRef<Path>,
    origin: Origin,
) -> Result<Vec<ParallelPair>> {
    let src = read_lines(src)?;
    let tgt = read_lines(tgt)?;
    if src.len() != tgt.len() {
        return Err(Error::LengthMismatch {
            left: src.len(),
            right: tgt.len(),
        });
    }
    Ok(src
        .into_iter()
        .zip(tgt)
        .map(|(src, tgt)| ParallelPair {
            id: src.id,
            src,
            tgt,
            origin,
        })
        .collect())
}

pub fn read_parallel_tsv(path: impl AsRef<Path>, origin: Origin) -> Result<Vec<ParallelPair>> {
    let path = path.as_ref();
    parse_parallel_tsv(open(path)?, origin)
}

pub fn parse_parallel_tsv<R: BufRead>(lines: Lines<R>, origin: Origin) -> Result<Vec<ParallelPair>> {
    let name = lines.origin.clone();
    lines
        .map(|item| {
            let (n, line) = item?;
            let (src, tgt) = line.split_once('\t').ok_or_else(|| {
                Error::parse(&name, n, 1, "expected two tab-separated columns")
            })?;
            if tgt.contains('\t') {
                return Err(Error::parse(&name, n, 3, "more than two columns"));
            }
            Ok(ParallelPair::new(n as u64 - 1, src, tgt, origin))
        })
        .collect()
}

pub fn write_parallel_tsv<W: Write>(mut out: W, pairs: &[ParallelPair]) -> std::io::Result<()> {
    for p in pairs {
        writeln!(out, "{}\t{}", p.src.text(), p.tgt.text())?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub max_len: usize,
    pub max_ratio: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            max_len: 250,
            max_ratio: 1.5,
        }
    }
}

/// Whether a pair survives the length and length-ratio filter. A ratio of
/// exactly `max_ratio` is kept.
pub fn keep_pair(pair: &ParallelPair, config: &FilterConfig) -> bool {
    let (a, b) = (pair.src.len(), pair.tgt.len());
    if a == 0 || b == 0 {
        return false;
    }
    if a > config.max_len || b > config.max_len {
        return false;
    }
    let ratio = a.max(b) as f64 / a.min(b) as f64;
    ratio <= config.max_ratio
}

pub fn filter_pairs(pairs: Vec<ParallelPair>, config: &FilterConfig) -> Vec<ParallelPair> {
    let empty = pairs
        .iter()
        .filter(|p| p.src.is_empty() || p.tgt.is_empty())
        .count();
    if empty > 0 {
        warn!("dropping {empty} pair(s) with an empty side");
    }
    pairs.into_iter().filter(|p| keep_pair(p, config)).collect()
}

/// Keeps the first occurrence of every exact (src, tgt) pair.
pub fn dedup(pairs: Vec<ParallelPair>) -> Vec<ParallelPair> {
    let mut seen: HashSet<(String, String)> = HashSet::with_capacity(pairs.len());
    pairs
        .into_iter()
        .filter(|p| seen.insert((p.src.text(), p.tgt.text())))
        .collect()
}

/// Output files staged in temporaries next to their destinations and
/// renamed into place together by [`StagedOutputs::commit`]. Dropping
/// without committing leaves no trace.
#[derive(Default)]
pub struct StagedOutputs {
    staged: Vec<(tempfile::NamedTempFile, PathBuf)>,
}

impl StagedOutputs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stage(&mut self, path: impl AsRef<Path>, contents: &[u8]) -> Result<()> {
        let path = path.as_ref();
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
        tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
        tmp.flush().map_err(|e| Error::io(path, e))?;
        self.staged.push((tmp, path.to_path_buf()));
        Ok(())
    }

    pub fn commit(self) -> Result<()> {
        for (tmp, path) in self.staged {
            tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        }
        Ok(())
    }
}
