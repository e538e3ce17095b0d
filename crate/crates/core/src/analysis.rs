//! Adequacy binning of side-by-side ratings, the "Both" selection of
//! sentences two systems share a bin on, and per-bin aggregation of
//! sentence-level metrics into report tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use log::warn;
use sha2::{Digest, Sha256};

use crate::corpus_io::{open, RatingRecord, Scheme};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AdequacyBin {
    Low,
    Medium,
    High,
}

impl AdequacyBin {
    pub const ALL: [AdequacyBin; 3] = [AdequacyBin::Low, AdequacyBin::Medium, AdequacyBin::High];

    pub fn label(self) -> &'static str {
        match self {
            AdequacyBin::Low => "Low",
            AdequacyBin::Medium => "Medium",
            AdequacyBin::High => "High",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for AdequacyBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// 0-2 low, 3-4 medium, 5-6 high. Only whole numbers are accepted.
pub fn bin_score(score: f64) -> Result<AdequacyBin> {
    Scheme::SideBySide.check(score)?;
    Ok(match score as u8 {
        0..=2 => AdequacyBin::Low,
        3..=4 => AdequacyBin::Medium,
        _ => AdequacyBin::High,
    })
}

/// Bins one system's side-by-side ratings by sentence.
pub fn system_bins(ratings: &[RatingRecord]) -> Result<BTreeMap<u64, AdequacyBin>> {
    let mut out = BTreeMap::new();
    for r in ratings {
        if r.scheme != Scheme::SideBySide {
            return Err(Error::Invalid(format!(
                "sentence {}: adequacy bins need side-by-side ratings, found {}",
                r.sentence_id,
                r.scheme.name()
            )));
        }
        if out.insert(r.sentence_id, bin_score(r.score)?).is_some() {
            return Err(Error::Invalid(format!(
                "sentence {} rated twice for system {}",
                r.sentence_id, r.system_id
            )));
        }
    }
    Ok(out)
}

/// Selects one system's records out of a mixed rating file.
pub fn ratings_for(ratings: &[RatingRecord], system: &str) -> Vec<RatingRecord> {
    ratings
        .iter()
        .filter(|r| r.system_id == system)
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Sup,
    Unsup,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BinnedSet {
    pub sup: BTreeMap<u64, AdequacyBin>,
    pub unsup: BTreeMap<u64, AdequacyBin>,
    both: [BTreeSet<u64>; 3],
}

impl BinnedSet {
    pub fn both(&self, bin: AdequacyBin) -> &BTreeSet<u64> {
        &self.both[bin.index()]
    }

    pub fn side(&self, side: Side) -> &BTreeMap<u64, AdequacyBin> {
        match side {
            Side::Sup => &self.sup,
            Side::Unsup => &self.unsup,
        }
    }

    /// Number of distinct sentences rated for either system.
    pub fn sentence_count(&self) -> usize {
        self.sup.keys().chain(self.unsup.keys()).collect::<BTreeSet<_>>().len()
    }
}

/// Bins both systems and collects, per bin, the sentences on which they
/// agree. Sentences rated for only one system are left out of "Both".
pub fn both_intersection(sup: &[RatingRecord], unsup: &[RatingRecord]) -> Result<BinnedSet> {
    let mut set = BinnedSet {
        sup: system_bins(sup)?,
        unsup: system_bins(unsup)?,
        both: Default::default(),
    };
    let mut unmatched = 0;
    for (id, bin) in &set.sup {
        match set.unsup.get(id) {
            Some(other) if other == bin => {
                set.both[bin.index()].insert(*id);
            }
            Some(_) => {}
            None => unmatched += 1,
        }
    }
    unmatched += set.unsup.keys().filter(|id| !set.sup.contains_key(id)).count();
    if unmatched > 0 {
        warn!("{unmatched} sentence(s) rated for only one system excluded from Both");
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

/// A captioned, rectangular table of optional numbers. Absent cells are
/// rendered as `NA`, never as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub caption: String,
    pub row_labels: Vec<String>,
    pub column_labels: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
    /// Decimal places, one per column.
    pub precision: Vec<usize>,
    pub inputs: Vec<InputDigest>,
}

impl ReportTable {
    pub fn new<R, C>(caption: &str, rows: R, columns: C, precision: usize) -> Self
    where
        R: IntoIterator,
        R::Item: Into<String>,
        C: IntoIterator,
        C::Item: Into<String>,
    {
        let row_labels: Vec<String> = rows.into_iter().map(Into::into).collect();
        let column_labels: Vec<String> = columns.into_iter().map(Into::into).collect();
        ReportTable {
            caption: caption.to_string(),
            cells: vec![vec![None; column_labels.len()]; row_labels.len()],
            precision: vec![precision; column_labels.len()],
            row_labels,
            column_labels,
            inputs: Vec::new(),
        }
    }

    pub fn set(&mut self, row: usize, column: usize, value: Option<f64>) {
        self.cells[row][column] = value;
    }

    pub fn get(&self, row: &str, column: &str) -> Option<f64> {
        let r = self.row_labels.iter().position(|l| l == row)?;
        let c = self.column_labels.iter().position(|l| l == column)?;
        self.cells[r][c]
    }

    pub fn add_input(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.inputs.push(InputDigest::of(path)?);
        Ok(())
    }

    fn cell_text(&self, row: usize, column: usize) -> String {
        match self.cells[row][column] {
            Some(v) => format!("{:.*}", self.precision[column], v),
            None => "NA".to_string(),
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.caption);
        for d in &self.inputs {
            let _ = writeln!(out, "# input\t{}\tsha256:{}", d.path, d.sha256);
        }
        let _ = writeln!(out, "\t{}", self.column_labels.join("\t"));
        for (r, label) in self.row_labels.iter().enumerate() {
            let cells: Vec<String> = (0..self.column_labels.len()).map(|c| self.cell_text(r, c)).collect();
            let _ = writeln!(out, "{label}\t{}", cells.join("\t"));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut grid: Vec<Vec<String>> = Vec::with_capacity(self.row_labels.len() + 1);
        let mut header = vec![String::new()];
        header.extend(self.column_labels.iter().cloned());
        grid.push(header);
        for (r, label) in self.row_labels.iter().enumerate() {
            let mut line = vec![label.clone()];
            line.extend((0..self.column_labels.len()).map(|c| self.cell_text(r, c)));
            grid.push(line);
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|c| grid.iter().map(|row| row[c].chars().count()).max().unwrap_or(0).max(3))
            .collect();
        let render = |row: &[String]| {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(cell, w)| format!("{cell:<w$}"))
                .collect();
            format!("| {} |", cells.join(" | "))
        };

        let mut out = String::new();
        let _ = writeln!(out, "**{}**\n", self.caption);
        let _ = writeln!(out, "{}", render(&grid[0]));
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        let _ = writeln!(out, "|-{}-|", rule.join("-|-"));
        for row in &grid[1..] {
            let _ = writeln!(out, "{}", render(row));
        }
        if !self.inputs.is_empty() {
            out.push('\n');
            for d in &self.inputs {
                let _ = writeln!(out, "- input `{}` sha256:{}", d.path, d.sha256);
            }
        }
        out
    }
}

fn bin_counts(bins: &BTreeMap<u64, AdequacyBin>) -> [usize; 3] {
    let mut counts = [0; 3];
    for b in bins.values() {
        counts[b.index()] += 1;
    }
    counts
}

/// Percentage of each system's sentences per bin. With exactly two
/// systems a "Both" row is added, relative to all rated sentences.
pub fn bin_percentages(systems: &[(&str, &[RatingRecord])]) -> Result<ReportTable> {
    let mut rows: Vec<String> = systems.iter().map(|(l, _)| l.to_string()).collect();
    let with_both = systems.len() == 2;
    if with_both {
        rows.push("Both".into());
    }
    let mut table = ReportTable::new(
        "Percentage of sentences with low, medium, high adequacy ratings; Both = same bin for both systems",
        rows,
        AdequacyBin::ALL.map(AdequacyBin::label),
        1,
    );
    for (r, (label, ratings)) in systems.iter().enumerate() {
        let bins = system_bins(ratings)?;
        if bins.is_empty() {
            return Err(Error::Invalid(format!("no ratings for system {label}")));
        }
        let counts = bin_counts(&bins);
        for b in AdequacyBin::ALL {
            table.set(r, b.index(), Some(100.0 * counts[b.index()] as f64 / bins.len() as f64));
        }
    }
    if with_both {
        let set = both_intersection(systems[0].1, systems[1].1)?;
        let total = set.sentence_count() as f64;
        for b in AdequacyBin::ALL {
            table.set(2, b.index(), Some(100.0 * set.both(b).len() as f64 / total));
        }
    }
    Ok(table)
}

/// A sentence-level measurement as numerator / denominator, so that rate
/// metrics can be pooled (`Σ num / Σ den`) as well as averaged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue {
    pub numerator: f64,
    pub denominator: f64,
}

impl MetricValue {
    pub fn plain(value: f64) -> Self {
        MetricValue {
            numerator: value,
            denominator: 1.0,
        }
    }

    pub fn rate(numerator: f64, denominator: f64) -> Self {
        MetricValue {
            numerator,
            denominator,
        }
    }

    pub fn value(&self) -> f64 {
        self.numerator / self.denominator
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// Unweighted mean of per-sentence values.
    #[default]
    Mean,
    /// Σ numerators / Σ denominators.
    Pooled,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "pooled" => Ok(Aggregation::Pooled),
            other => Err(Error::Invalid(format!("unknown aggregation {other:?}"))),
        }
    }
}

pub type SentenceMetric = BTreeMap<u64, MetricValue>;

/// Aggregate over `ids`; `Ok(None)` for an empty set, an error when any id
/// lacks a value.
pub fn aggregate<'a>(
    metric: &SentenceMetric,
    ids: impl IntoIterator<Item = &'a u64>,
    how: Aggregation,
) -> Result<Option<f64>> {
    let (mut num, mut den, mut sum, mut n) = (0.0, 0.0, 0.0, 0usize);
    for id in ids {
        let v = metric.get(id).ok_or(Error::MissingValue(*id))?;
        num += v.numerator;
        den += v.denominator;
        sum += v.value();
        n += 1;
    }
    Ok(match (n, how) {
        (0, _) => None,
        (_, Aggregation::Mean) => Some(sum / n as f64),
        (_, Aggregation::Pooled) => Some(num / den),
    })
}

/// Ids contributing to bin `bin` for one system.
pub fn bin_ids(bins: &BinnedSet, side: Side, bin: AdequacyBin, restrict_to_both: bool) -> BTreeSet<u64> {
    if restrict_to_both {
        bins.both(bin).clone()
    } else {
        bins.side(side)
            .iter()
            .filter(|(_, b)| **b == bin)
            .map(|(id, _)| *id)
            .collect()
    }
}

/// `[Overall, Low, Medium, High]` for one system. Overall covers every
/// sentence rated for the system.
pub fn bin_aggregates(
    metric: &SentenceMetric,
    bins: &BinnedSet,
    side: Side,
    restrict_to_both: bool,
    how: Aggregation,
) -> Result<[Option<f64>; 4]> {
    let mut out = [None; 4];
    out[0] = aggregate(metric, bins.side(side).keys(), how)?;
    for b in AdequacyBin::ALL {
        out[1 + b.index()] = aggregate(metric, &bin_ids(bins, side, b, restrict_to_both), how)?;
    }
    Ok(out)
}

/// One row per system: Overall plus the three adequacy bins.
pub fn aggregate_by_bin(
    caption: &str,
    rows: &[(&str, &SentenceMetric, Side)],
    bins: &BinnedSet,
    restrict_to_both: bool,
    how: Aggregation,
    bin_labels: [&str; 3],
    precision: usize,
) -> Result<ReportTable> {
    let mut columns = vec!["Overall"];
    columns.extend(bin_labels);
    let mut table = ReportTable::new(caption, rows.iter().map(|r| r.0), columns, precision);
    for (r, (_, metric, side)) in rows.iter().enumerate() {
        for (c, v) in bin_aggregates(metric, bins, *side, restrict_to_both, how)?
            .into_iter()
            .enumerate()
        {
            table.set(r, c, v);
        }
    }
    Ok(table)
}

/// Plain mean of raw 0-100 direct-assessment scores.
pub fn da_average(ratings: &[RatingRecord]) -> Result<f64> {
    if ratings.is_empty() {
        return Err(Error::Empty("direct-assessment ratings"));
    }
    if let Some(r) = ratings.iter().find(|r| r.scheme != Scheme::DirectAssessment) {
        return Err(Error::Invalid(format!(
            "sentence {}: expected direct-assessment rating, found {}",
            r.sentence_id,
            r.scheme.name()
        )));
    }
    Ok(ratings.iter().map(|r| r.score).sum::<f64>() / ratings.len() as f64)
}

/// Reads a sentence-level metric file. Two columns (`id<TAB>value`) give
/// plain values; the four-column edit-rate layout
/// (`id<TAB>edits<TAB>ref_len<TAB>score`) gives poolable rates. `#` lines
/// and rows holding `NA` are skipped.
pub fn read_metric(path: impl AsRef<Path>) -> Result<SentenceMetric> {
    let lines = open(path.as_ref())?;
    let origin = lines.origin().to_string();
    let mut out = SentenceMetric::new();
    for item in lines {
        let (n, line) = item?;
        if line.trim().is_empty() || line.starts_with('#') || line.starts_with("id\t") {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields[1..].iter().any(|f| f.trim() == "NA") {
            continue;
        }
        let num = |i: usize| {
            fields[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(&origin, n, i + 1, format!("bad number {:?}", fields[i])))
        };
        let id = fields[0]
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::parse(&origin, n, 1, format!("bad id {:?}", fields[0])))?;
        let value = match fields.len() {
            2 => MetricValue::plain(num(1)?),
            4 => MetricValue::rate(num(1)?, num(2)?),
            k => {
                return Err(Error::parse(
                    &origin,
                    n,
                    1,
                    format!("expected 2 or 4 columns, found {k}"),
                ))
            }
        };
        if out.insert(id, value).is_some() {
            return Err(Error::parse(&origin, n, 1, format!("duplicate id {id}")));
        }
    }
    Ok(out)
}
