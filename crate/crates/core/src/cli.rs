//! The `transkit` command line: one subcommand per pipeline stage.
//!
//! Exit status is 0 on success, 1 for usage errors and 2 for data errors.
//! Outputs are staged and only renamed into place once the whole command
//! has succeeded.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use crate::analysis::{
    aggregate, aggregate_by_bin, bin_percentages, both_intersection, ratings_for, read_metric, Aggregation, BinnedSet,
    ReportTable, SentenceMetric, Side,
};
use crate::btselect::{provenance_tsv, read_bt_tsv, score_pairs, select, tag_corpus, BtSelectionConfig, LogBase, Mode, TiePolicy};
use crate::corpus_io::{
    dedup, filter_pairs, read_alignments, read_lines, read_parallel, read_parallel_tsv, read_ratings, write_lines,
    write_parallel_tsv, FilterConfig, Origin, ParallelPair, RatingRecord, StagedOutputs, TokenSequence,
};
use crate::error::{Error, Result};
use crate::metric_bleu::{corpus_bleu, BleuConfig, Tokenizer};
use crate::metric_ter::{kendall_tau, poster_corpus, summarize, ter_corpus, SentenceScore};
use crate::ngram_lm::{contrast_report, load_arpa, train, SystemCorpus, TrainConfig};
use crate::tagging::{map_tagset, read_conllu, read_tag_lines, train_tagger, write_conllu, TagColumn, TagMapping, TagSet, TaggedSentence};

/// Tool version followed by the versions of the file layouts it reads
/// and writes.
const VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (formats: arpa 1, conllu 2.x subset, ratings-tsv 1, bt-tsv 1, report 1)"
);

#[derive(Debug, Parser)]
#[command(name = "transkit", version = VERSION, about = "Corpus, metric and selection tools for MT output analysis")]
pub struct Cli {
    /// Read additional `key = value` options; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for stages that parallelize.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: u16,

    /// More diagnostics on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Drop pairs that are empty, too long or too unbalanced.
    Filter(FilterArgs),
    /// Drop repeated (source, target) pairs, keeping the first.
    Dedup(ParallelArgs),
    /// POS-tag plain text with a lexicon tagger trained on CoNLL-U.
    Tag(TagArgs),
    /// Map tags between inventories (TIGER to UD by default).
    MapTags(MapTagsArgs),
    /// Sentence-level TER over plain tokens.
    Ter(TerArgs),
    /// Sentence-level TER over POS tags.
    Poster(PosterArgs),
    /// Kendall's tau per alignment line.
    Tau(TauArgs),
    /// Corpus BLEU.
    Bleu(BleuArgs),
    /// Train an n-gram model and write it as ARPA.
    LmTrain(LmTrainArgs),
    /// Perplexity of a corpus under an ARPA model.
    LmPpl(LmPplArgs),
    /// Perplexity of system outputs under a natural and a translated LM.
    LmContrast(LmContrastArgs),
    /// Adequacy-bin percentages per system and for "Both".
    Bins(BinsArgs),
    /// Per-bin aggregate of a sentence-level metric.
    Aggregate(AggregateArgs),
    /// Choose supervised or unsupervised back-translation per sentence.
    BtSelect(BtSelectArgs),
    /// Render one of the summary tables from stage outputs.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Tsv,
    Markdown,
}

#[derive(Debug, Args)]
pub struct ParallelArgs {
    /// Source side, one sentence per line.
    #[arg(long, requires = "tgt", conflicts_with = "tsv")]
    pub src: Option<PathBuf>,
    #[arg(long, requires = "src")]
    pub tgt: Option<PathBuf>,
    /// Two-column TSV instead of --src/--tgt.
    #[arg(long)]
    pub tsv: Option<PathBuf>,
    #[arg(long, requires = "out_tgt", conflicts_with = "out_tsv")]
    pub out_src: Option<PathBuf>,
    #[arg(long, requires = "out_src")]
    pub out_tgt: Option<PathBuf>,
    #[arg(long)]
    pub out_tsv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub io: ParallelArgs,
    /// Maximum tokens on either side.
    #[arg(long, default_value_t = 250)]
    pub max_len: usize,
    /// Maximum longer/shorter length ratio (kept when equal).
    #[arg(long, default_value_t = 1.5, value_parser = parse_ratio)]
    pub max_ratio: f64,
}

#[derive(Debug, Args)]
pub struct TagArgs {
    /// Tagged training data.
    #[arg(long)]
    pub train: PathBuf,
    /// CoNLL-U column holding the training tags; output uses the same.
    #[arg(long, default_value = "upos", value_parser = parse_arg::<TagColumn>)]
    pub column: TagColumn,
    /// Tag inventory: ud or tiger.
    #[arg(long, default_value = "ud", value_parser = parse_tagset)]
    pub tagset: TagSet,
    /// Plain text to tag.
    #[arg(long)]
    pub input: PathBuf,
    /// CoNLL-U output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MapTagsArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Column holding the source tags.
    #[arg(long, default_value = "xpos", value_parser = parse_arg::<TagColumn>)]
    pub column: TagColumn,
    #[arg(long, default_value = "tiger", value_parser = parse_tagset)]
    pub from: TagSet,
    /// Two-column TSV mapping; the built-in TIGER to UD table otherwise.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    /// Name of the target inventory.
    #[arg(long, default_value = "ud")]
    pub to: String,
    /// CoNLL-U output with the mapped tags in the UPOS column.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TerArgs {
    #[arg(long)]
    pub hyp: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TagInput {
    Conllu,
    Lines,
}

#[derive(Debug, Args)]
pub struct PosterArgs {
    #[arg(long)]
    pub hyp: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long, value_enum, default_value_t = TagInput::Conllu)]
    pub input_format: TagInput,
    #[arg(long, default_value = "upos", value_parser = parse_arg::<TagColumn>)]
    pub column: TagColumn,
    /// Inventory both sides must use: ud or tiger.
    #[arg(long, default_value = "ud", value_parser = parse_tagset)]
    pub tagset: TagSet,
    /// Map TIGER tags to UD on both sides before scoring.
    #[arg(long)]
    pub map_ud: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TauArgs {
    /// Pharaoh `i-j` alignments, one sentence per line.
    #[arg(long)]
    pub align: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BleuArgs {
    #[arg(long)]
    pub hyp: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// 13a or none.
    #[arg(long, default_value = "13a", value_parser = parse_arg::<Tokenizer>)]
    pub tokenize: Tokenizer,
    #[arg(long)]
    pub lowercase: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LmTrainArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u16).range(1..=10))]
    pub order: u16,
    /// Absolute discount in [0, 1).
    #[arg(long, default_value_t = 0.75, value_parser = parse_discount)]
    pub discount: f64,
    #[arg(long, default_value_t = 1)]
    pub unk_threshold: u64,
    /// Fixed decimal places in the ARPA file; shortest exact form otherwise.
    #[arg(long)]
    pub decimals: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LmPplArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RatingArgs {
    /// Side-by-side ratings TSV.
    #[arg(long)]
    pub ratings: Option<PathBuf>,
    #[arg(long, default_value = "sup")]
    pub sup_id: String,
    #[arg(long, default_value = "unsup")]
    pub unsup_id: String,
    #[arg(long, default_value = "Sup")]
    pub sup_label: String,
    #[arg(long, default_value = "Unsup")]
    pub unsup_label: String,
    /// Use every rated sentence per bin instead of only "Both".
    #[arg(long)]
    pub all_rated: bool,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LmContrastArgs {
    #[arg(long)]
    pub nlm: PathBuf,
    #[arg(long)]
    pub tlm: PathBuf,
    /// Supervised system output.
    #[arg(long)]
    pub sup: PathBuf,
    /// Unsupervised system output.
    #[arg(long)]
    pub unsup: PathBuf,
    #[command(flatten)]
    pub ratings: RatingArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BinsArgs {
    #[command(flatten)]
    pub ratings: RatingArgs,
    /// Also write `id<TAB>bin` for every "Both" sentence.
    #[arg(long)]
    pub both_out: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Sentence metric for the supervised system.
    #[arg(long)]
    pub sup: PathBuf,
    #[arg(long)]
    pub unsup: PathBuf,
    #[arg(long, default_value = "mean", value_parser = parse_arg::<Aggregation>)]
    pub aggregation: Aggregation,
    #[arg(long, default_value_t = 3)]
    pub precision: usize,
    #[command(flatten)]
    pub ratings: RatingArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Ties {
    Unsup,
    Sup,
}

#[derive(Debug, Args)]
pub struct BtSelectArgs {
    /// `id, src, sup_bt, sup_logP, unsup_bt, unsup_logP` TSV.
    #[arg(long)]
    pub input: PathBuf,
    /// `threshold:T` or `quantile:q`.
    #[arg(long, value_parser = parse_arg::<Mode>)]
    pub mode: Mode,
    /// Tag for supervised picks; empty for none.
    #[arg(long, default_value = "")]
    pub tag_sup: String,
    #[arg(long, default_value = "")]
    pub tag_unsup: String,
    /// Choice when ΔP equals the threshold exactly.
    #[arg(long, value_enum, default_value_t = Ties::Unsup)]
    pub ties: Ties,
    /// Base of the input log-probabilities: e or 10.
    #[arg(long, default_value = "e", value_parser = parse_arg::<LogBase>)]
    pub log_base: LogBase,
    /// Tagged synthetic sentences.
    #[arg(long)]
    pub out_src: PathBuf,
    /// Natural sentences, line-aligned with --out-src.
    #[arg(long)]
    pub out_tgt: PathBuf,
    /// `id<TAB>chosen<TAB>delta_p`.
    #[arg(long)]
    pub provenance: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableKind {
    /// Adequacy-bin percentages.
    Bins,
    /// Corpus posTER against the source, one column per output.
    SourcePoster,
    /// Per-bin posTER against the reference.
    BinnedPoster,
    /// Per-bin perplexity contrast.
    BinnedPerplexity,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, value_enum)]
    pub table: TableKind,
    /// `NAME=FILE` sentence metric column (source-poster), repeatable.
    #[arg(long = "column", value_name = "NAME=FILE")]
    pub columns: Vec<String>,
    /// Row label for source-poster.
    #[arg(long, default_value = "Src")]
    pub row: String,
    /// Supervised system metric (binned-poster) or output text (binned-perplexity).
    #[arg(long)]
    pub sup: Option<PathBuf>,
    #[arg(long)]
    pub unsup: Option<PathBuf>,
    #[arg(long)]
    pub nlm: Option<PathBuf>,
    #[arg(long)]
    pub tlm: Option<PathBuf>,
    #[arg(long, default_value = "pooled", value_parser = parse_arg::<Aggregation>)]
    pub aggregation: Aggregation,
    #[command(flatten)]
    pub ratings: RatingArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Collects data destined for files or stdout; nothing is written until
/// [`Outputs::finish`].
#[derive(Default)]
struct Outputs {
    staged: StagedOutputs,
    stdout: String,
}

impl Outputs {
    fn emit(&mut self, path: Option<&Path>, text: &str) -> Result<()> {
        match path {
            Some(p) => self.staged.stage(p, text.as_bytes()),
            None => {
                self.stdout.push_str(text);
                Ok(())
            }
        }
    }

    fn finish(self) -> Result<()> {
        self.staged.commit()?;
        print!("{}", self.stdout);
        Ok(())
    }
}

fn parse_arg<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T> {
    s.parse()
}

fn parse_tagset(name: &str) -> std::result::Result<TagSet, String> {
    TagSet::builtin(name).ok_or_else(|| format!("unknown tagset {name:?} (expected ud or tiger)"))
}

fn parse_discount(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(d) if (0.0..1.0).contains(&d) => Ok(d),
        _ => Err(format!("discount must be a number in [0, 1), got {s:?}")),
    }
}

fn parse_ratio(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(r) if r >= 1.0 => Ok(r),
        _ => Err(format!("length ratio must be a number >= 1, got {s:?}")),
    }
}

fn sentences_text(sentences: &[TokenSequence]) -> String {
    let mut buf = Vec::new();
    write_lines(&mut buf, sentences).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8 input")
}

fn read_pairs(io: &ParallelArgs) -> Result<Vec<ParallelPair>> {
    match (&io.src, &io.tgt, &io.tsv) {
        (Some(s), Some(t), None) => read_parallel(s, t, Origin::Unknown),
        (None, None, Some(p)) => read_parallel_tsv(p, Origin::Unknown),
        _ => Err(Error::Invalid("give either --src and --tgt or --tsv".into())),
    }
}

fn write_pairs(io: &ParallelArgs, pairs: &[ParallelPair], out: &mut Outputs) -> Result<()> {
    match (&io.out_src, &io.out_tgt, &io.out_tsv) {
        (Some(s), Some(t), None) => {
            let src: Vec<TokenSequence> = pairs.iter().map(|p| p.src.clone()).collect();
            let tgt: Vec<TokenSequence> = pairs.iter().map(|p| p.tgt.clone()).collect();
            out.emit(Some(s), &sentences_text(&src))?;
            out.emit(Some(t), &sentences_text(&tgt))
        }
        (None, None, tsv) => {
            let mut buf = Vec::new();
            write_parallel_tsv(&mut buf, pairs).expect("writing to memory");
            out.emit(tsv.as_deref(), &String::from_utf8(buf).expect("utf-8 input"))
        }
        _ => Err(Error::Invalid("give either --out-src and --out-tgt or --out-tsv".into())),
    }
}

fn read_tagged(path: &Path, format: TagInput, column: TagColumn, tagset: &str) -> Result<Vec<TaggedSentence>> {
    match format {
        TagInput::Conllu => read_conllu(path, column, tagset),
        TagInput::Lines => read_tag_lines(path, tagset),
    }
}

fn score_rows(scores: &[SentenceScore]) -> String {
    let mut out = String::from("id\tedits\tref_len\tscore\n");
    for s in scores {
        match &s.result {
            Some(r) => {
                let _ = writeln!(out, "{}\t{}\t{}\t{}", s.id, r.edits(), r.ref_len, r.score);
            }
            None => {
                let _ = writeln!(out, "{}\tNA\t0\tNA", s.id);
            }
        }
    }
    match summarize(scores.iter().filter_map(|s| s.result.as_ref())) {
        Some(sum) => {
            let _ = writeln!(
                out,
                "# sentences={} edits={} ref_len={} mean={} pooled={}",
                sum.sentences, sum.total_edits, sum.total_ref_len, sum.mean, sum.pooled
            );
        }
        None => out.push_str("# sentences=0\n"),
    }
    out
}

fn render(table: &ReportTable, format: Format) -> String {
    match format {
        Format::Tsv => table.to_tsv(),
        Format::Markdown => table.to_markdown(),
    }
}

struct Rated {
    bins: BinnedSet,
    path: PathBuf,
    sup: Vec<RatingRecord>,
    unsup: Vec<RatingRecord>,
}

fn load_ratings(args: &RatingArgs) -> Result<Rated> {
    let path = args
        .ratings
        .clone()
        .ok_or_else(|| Error::Invalid("--ratings is required".into()))?;
    let all = read_ratings(&path)?;
    let sup = ratings_for(&all, &args.sup_id);
    let unsup = ratings_for(&all, &args.unsup_id);
    for (id, r) in [(&args.sup_id, &sup), (&args.unsup_id, &unsup)] {
        if r.is_empty() {
            return Err(Error::Invalid(format!("no ratings for system {id:?} in {}", path.display())));
        }
    }
    Ok(Rated {
        bins: both_intersection(&sup, &unsup)?,
        path,
        sup,
        unsup,
    })
}

fn bins_table(args: &RatingArgs) -> Result<(ReportTable, Rated)> {
    let rated = load_ratings(args)?;
    let mut table = bin_percentages(&[(args.sup_label.as_str(), &rated.sup), (args.unsup_label.as_str(), &rated.unsup)])?;
    table.add_input(&rated.path)?;
    Ok((table, rated))
}

fn binned_metric_table(
    caption: &str,
    sup: &Path,
    unsup: &Path,
    ratings: &RatingArgs,
    how: Aggregation,
    precision: usize,
) -> Result<ReportTable> {
    let rated = load_ratings(ratings)?;
    let (ms, mu) = (read_metric(sup)?, read_metric(unsup)?);
    let mut table = aggregate_by_bin(
        caption,
        &[(&ratings.sup_label, &ms, Side::Sup), (&ratings.unsup_label, &mu, Side::Unsup)],
        &rated.bins,
        !ratings.all_rated,
        how,
        ["Low", "Med", "High"],
        precision,
    )?;
    for p in [&rated.path, sup, unsup] {
        table.add_input(p)?;
    }
    Ok(table)
}

fn contrast_table(
    nlm: &Path,
    tlm: &Path,
    sup: &Path,
    unsup: &Path,
    ratings: &RatingArgs,
    binned: bool,
) -> Result<ReportTable> {
    let (n, t) = (load_arpa(nlm)?, load_arpa(tlm)?);
    let (s, u) = (read_lines(sup)?, read_lines(unsup)?);
    let rated = if binned { Some(load_ratings(ratings)?) } else { None };
    let systems = [
        SystemCorpus {
            label: &ratings.sup_label,
            sentences: &s,
            side: Side::Sup,
        },
        SystemCorpus {
            label: &ratings.unsup_label,
            sentences: &u,
            side: Side::Unsup,
        },
    ];
    let mut table = contrast_report(&n, &t, &systems, rated.as_ref().map(|r| (&r.bins, !ratings.all_rated)))?;
    if let Some(r) = &rated {
        table.add_input(&r.path)?;
    }
    for p in [nlm, tlm, sup, unsup] {
        table.add_input(p)?;
    }
    Ok(table)
}

fn source_poster_table(columns: &[String], row: &str, how: Aggregation) -> Result<ReportTable> {
    if columns.is_empty() {
        return Err(Error::Invalid("source-poster needs at least one --column NAME=FILE".into()));
    }
    let mut specs = Vec::new();
    for c in columns {
        let (name, path) = c
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("--column expects NAME=FILE, got {c:?}")))?;
        specs.push((name.to_string(), PathBuf::from(path)));
    }
    let mut table = ReportTable::new(
        "posTER between source and translation tag sequences",
        [row],
        specs.iter().map(|(n, _)| n.clone()),
        3,
    );
    for (c, (_, path)) in specs.iter().enumerate() {
        let metric: SentenceMetric = read_metric(path)?;
        if metric.is_empty() {
            return Err(Error::Invalid(format!("{}: no scored sentences", path.display())));
        }
        table.set(0, c, aggregate(&metric, metric.keys(), how)?);
        table.add_input(path)?;
    }
    Ok(table)
}

fn require<'a>(v: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    v.as_deref()
        .ok_or_else(|| Error::Invalid(format!("{flag} is required for this table")))
}

fn run(command: &Command, out: &mut Outputs) -> Result<()> {
    match command {
        Command::Filter(a) => {
            let pairs = read_pairs(&a.io)?;
            let n = pairs.len();
            let cfg = FilterConfig {
                max_len: a.max_len,
                max_ratio: a.max_ratio,
            };
            let kept = filter_pairs(pairs, &cfg);
            info!("kept {} of {n} pairs", kept.len());
            write_pairs(&a.io, &kept, out)
        }
        Command::Dedup(a) => {
            let pairs = read_pairs(a)?;
            let n = pairs.len();
            let kept = dedup(pairs);
            info!("kept {} of {n} pairs", kept.len());
            write_pairs(a, &kept, out)
        }
        Command::Tag(a) => {
            let column = a.column;
            let training = read_conllu(&a.train, column, &a.tagset.name)?;
            let tagger = train_tagger(&training, &a.tagset)?;
            let text = read_lines(&a.input)?;
            let tagged: Vec<TaggedSentence> = text.iter().map(|s| tagger.tag(s)).collect();
            out.emit(a.out.as_deref(), &write_conllu(&tagged, column))
        }
        Command::MapTags(a) => {
            let from = &a.from;
            let mapping = match &a.mapping {
                Some(p) => TagMapping::read(p, &a.to)?,
                None => TagMapping::tiger_to_ud(),
            };
            let input = read_conllu(&a.input, a.column, &from.name)?;
            let mut mapped = Vec::with_capacity(input.len());
            for s in &input {
                s.validate(from)?;
                mapped.push(map_tagset(s, &mapping)?);
            }
            out.emit(a.out.as_deref(), &write_conllu(&mapped, TagColumn::Upos))
        }
        Command::Ter(a) => {
            let tok = |p: &Path| -> Result<Vec<Vec<String>>> { Ok(read_lines(p)?.into_iter().map(|s| s.tokens).collect()) };
            let scores = ter_corpus(&tok(&a.hyp)?, &tok(&a.reference)?)?;
            out.emit(a.out.as_deref(), &score_rows(&scores))
        }
        Command::Poster(a) => {
            let ts = &a.tagset;
            let mut hyp = read_tagged(&a.hyp, a.input_format, a.column, &ts.name)?;
            let mut reference = read_tagged(&a.reference, a.input_format, a.column, &ts.name)?;
            for s in hyp.iter().chain(&reference) {
                s.validate(ts)?;
            }
            if a.map_ud {
                let m = TagMapping::tiger_to_ud();
                hyp = hyp.iter().map(|s| map_tagset(s, &m)).collect::<Result<_>>()?;
                reference = reference.iter().map(|s| map_tagset(s, &m)).collect::<Result<_>>()?;
            }
            let scores = poster_corpus(&hyp, &reference)?;
            out.emit(a.out.as_deref(), &score_rows(&scores))
        }
        Command::Tau(a) => {
            let sets = read_alignments(&a.align)?;
            let mut text = String::from("id\ttau\n");
            let (mut sum, mut defined) = (0.0, 0usize);
            for s in &sets {
                match kendall_tau(&s.links).tau() {
                    Some(t) => {
                        sum += t;
                        defined += 1;
                        let _ = writeln!(text, "{}\t{t}", s.id);
                    }
                    None => {
                        let _ = writeln!(text, "{}\tNA", s.id);
                    }
                }
            }
            let mean = if defined > 0 { format!("{}", sum / defined as f64) } else { "NA".into() };
            let _ = writeln!(text, "# sentences={} defined={defined} mean={mean}", sets.len());
            out.emit(a.out.as_deref(), &text)
        }
        Command::Bleu(a) => {
            let cfg = BleuConfig {
                tokenizer: a.tokenize,
                lowercase: a.lowercase,
            };
            let text = |p: &Path| -> Result<Vec<String>> { Ok(read_lines(p)?.iter().map(TokenSequence::text).collect()) };
            let result = corpus_bleu(&text(&a.hyp)?, &text(&a.reference)?, &cfg)?;
            out.emit(a.out.as_deref(), &format!("{} = {result}\n", cfg.signature()))
        }
        Command::LmTrain(a) => {
            let corpus = read_lines(&a.input)?;
            let model = train(
                &corpus,
                &TrainConfig {
                    order: a.order as usize,
                    discount: a.discount,
                    unk_threshold: a.unk_threshold,
                },
            )?;
            out.emit(Some(&a.out), &model.to_arpa(a.decimals))
        }
        Command::LmPpl(a) => {
            let model = load_arpa(&a.model)?;
            let corpus = read_lines(&a.input)?;
            if corpus.is_empty() {
                return Err(Error::Empty("evaluation corpus"));
            }
            let stats = model.corpus_stats(&corpus)?;
            let text = format!(
                "sentences\tevents\tlog10_sum\tppl\n{}\t{}\t{}\t{}\n",
                corpus.len(),
                stats.events,
                stats.log10_sum,
                stats.perplexity()
            );
            out.emit(a.out.as_deref(), &text)
        }
        Command::LmContrast(a) => {
            let binned = a.ratings.ratings.is_some();
            let table = contrast_table(&a.nlm, &a.tlm, &a.sup, &a.unsup, &a.ratings, binned)?;
            out.emit(a.output.out.as_deref(), &render(&table, a.output.format))
        }
        Command::Bins(a) => {
            let (table, rated) = bins_table(&a.ratings)?;
            if let Some(p) = &a.both_out {
                let mut text = String::from("id\tbin\n");
                let mut rows: Vec<(u64, &str)> = Vec::new();
                for b in crate::analysis::AdequacyBin::ALL {
                    rows.extend(rated.bins.both(b).iter().map(|id| (*id, b.label())));
                }
                rows.sort_unstable();
                for (id, b) in rows {
                    let _ = writeln!(text, "{id}\t{b}");
                }
                out.emit(Some(p), &text)?;
            }
            out.emit(a.output.out.as_deref(), &render(&table, a.output.format))
        }
        Command::Aggregate(a) => {
            let table = binned_metric_table(
                "Sentence metric grouped by adequacy",
                &a.sup,
                &a.unsup,
                &a.ratings,
                a.aggregation,
                a.precision,
            )?;
            out.emit(a.output.out.as_deref(), &render(&table, a.output.format))
        }
        Command::BtSelect(a) => {
            let records = read_bt_tsv(&a.input, a.log_base)?;
            if records.is_empty() {
                return Err(Error::Empty("back-translation input"));
            }
            let config = BtSelectionConfig {
                mode: a.mode,
                tag_sup: a.tag_sup.clone(),
                tag_unsup: a.tag_unsup.clone(),
                tie_policy: match a.ties {
                    Ties::Unsup => TiePolicy::Unsup,
                    Ties::Sup => TiePolicy::Sup,
                },
            };
            let pairs = score_pairs(&records)?;
            let outcome = select(&pairs, &config);
            let emitted = tag_corpus(&pairs, &outcome, &config)?;
            info!("selected {} unsupervised and {} supervised", outcome.unsup_count(), outcome.sup_count());
            let (mut src, mut tgt) = (String::new(), String::new());
            for e in &emitted {
                src.push_str(&e.synthetic);
                src.push('\n');
                tgt.push_str(&e.natural);
                tgt.push('\n');
            }
            out.emit(Some(&a.out_src), &src)?;
            out.emit(Some(&a.out_tgt), &tgt)?;
            out.emit(Some(&a.provenance), &provenance_tsv(&pairs, &outcome))
        }
        Command::Report(a) => {
            let how = a.aggregation;
            let table = match a.table {
                TableKind::Bins => bins_table(&a.ratings)?.0,
                TableKind::SourcePoster => source_poster_table(&a.columns, &a.row, how)?,
                TableKind::BinnedPoster => binned_metric_table(
                    "posTER grouped by adequacy",
                    require(&a.sup, "--sup")?,
                    require(&a.unsup, "--unsup")?,
                    &a.ratings,
                    how,
                    3,
                )?,
                TableKind::BinnedPerplexity => contrast_table(
                    require(&a.nlm, "--nlm")?,
                    require(&a.tlm, "--tlm")?,
                    require(&a.sup, "--sup")?,
                    require(&a.unsup, "--unsup")?,
                    &a.ratings,
                    true,
                )?,
            };
            out.emit(a.output.out.as_deref(), &render(&table, a.output.format))
        }
    }
}

fn flag_present(argv: &[OsString], key: &str) -> bool {
    let long = format!("--{key}");
    argv.iter().any(|a| {
        a.to_str()
            .is_some_and(|s| s == long || s.strip_prefix(&long).is_some_and(|rest| rest.starts_with('=')))
    })
}

fn find_config(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

/// Appends options from a `key = value` file for keys not given on the
/// command line. `true`/`false` values toggle switches; repeating a key
/// repeats the option.
pub fn merge_config(argv: Vec<OsString>, text: &str, origin: &str) -> Result<Vec<OsString>> {
    let mut extra = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(origin, n + 1, 1, "expected key = value"))?;
        let (key, value) = (key.trim().trim_start_matches("--").replace('_', "-"), value.trim());
        if key == "config" || flag_present(&argv, &key) {
            continue;
        }
        match value {
            "true" => extra.push(OsString::from(format!("--{key}"))),
            "false" => {}
            v => {
                extra.push(OsString::from(format!("--{key}")));
                extra.push(OsString::from(v));
            }
        }
    }
    let mut argv = argv;
    argv.extend(extra);
    Ok(argv)
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn dispatch<I: IntoIterator<Item = OsString>>(argv: I) -> i32 {
    let mut argv: Vec<OsString> = argv.into_iter().collect();
    if let Some(path) = find_config(&argv) {
        let merged = std::fs::read_to_string(&path)
            .map_err(|e| Error::io(&path, e))
            .and_then(|text| merge_config(argv.clone(), &text, &path.display().to_string()));
        match merged {
            Ok(a) => argv = a,
            Err(e) => {
                eprintln!("transkit: {e}");
                return 2;
            }
        }
    }

    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };

    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();

    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads as usize).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("transkit: {e}");
            return 2;
        }
    };
    let result = pool.install(|| {
        let mut out = Outputs::default();
        run(&cli.command, &mut out)?;
        out.finish()
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("transkit: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(args: &[&str]) -> Vec<OsString> {
        args.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_values_fill_missing_flags_only() {
        let argv = os(&["transkit", "filter", "--max-len", "10"]);
        let merged = merge_config(argv, "max_len = 99\nmax-ratio=2\n# note\nverbose = true\n", "cfg").unwrap();
        assert_eq!(
            merged,
            os(&["transkit", "filter", "--max-len", "10", "--max-ratio", "2", "--verbose"])
        );
    }

    #[test]
    fn config_syntax_error() {
        assert!(merge_config(os(&["t"]), "novalue\n", "cfg").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(dispatch(os(&["transkit", "frobnicate"])), 1);
        assert_eq!(dispatch(os(&["transkit", "ter", "--hyp", "x"])), 1);
        assert_eq!(dispatch(os(&["transkit", "--version"])), 0);
    }

    #[test]
    fn missing_input_exits_two() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o.tsv");
        let code = dispatch(os(&[
            "transkit",
            "ter",
            "--hyp",
            "/nonexistent/h.txt",
            "--ref",
            "/nonexistent/r.txt",
            "--out",
            out.to_str().unwrap(),
        ]));
        assert_eq!(code, 2);
        assert!(!out.exists());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
