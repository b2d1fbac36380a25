//! The `subalign` command line.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use subalign_core::aligner::{
    train, viterbi_align, Aligner, AlignerConfig, BidirectionalAlignment, Bitext, InternalAligner,
};
use subalign_core::bpe::{
    affected_curve, learn_bpe, segment_corpus, MergeTable, SegmentationScheme, SegmentedCorpus, VocabSize,
};
use subalign_core::corpus::{attach_evaluation_set, subsample, AlignmentSet, GoldAlignment, ParallelCorpus};
use subalign_core::linkops::{aggregate_sets, SymmetrizationMethod, VoteTally};
use subalign_core::metrics::{score, Metrics};
use subalign_core::optimizer::{
    apply_transfer, run_iterative_sampling, Evaluator, OptimizerConfig, SchemePipeline, SearchSpace, SideRange,
};

use crate::config::FileConfig;
use crate::external::ExternalAligner;
use crate::formats::{self, CorpusMarkup, MetricsRecord, StateFile};
use crate::parallel::ParallelSchemes;
use crate::{Error, Result};

const DEFAULT_MAX_MERGES: u32 = 1_000_000;

#[derive(Parser, Debug)]
#[command(name = "subalign", version, about = "Word alignment through sampled subword segmentations")]
pub struct Cli {
    /// Key-value (TOML) file supplying defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice; recorded in outputs.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for aligning independent schemes.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Learn BPE merge tables for both sides of a corpus.
    LearnBpe {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Upper bound on merges per side; learning also stops when no pair occurs twice.
        #[arg(long)]
        max_merges: Option<u32>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Write the corpus segmented under one scheme, with word maps.
    Segment {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        tables: TableArgs,
        /// Cell as `SOURCE,TARGET`, each a merge count or WORD.
        #[arg(long, default_value = "WORD,WORD")]
        scheme: String,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Word-align the corpus under one scheme.
    Align {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        tables: TableArgs,
        #[command(flatten)]
        aligner: AlignerArgs,
        #[arg(long, default_value = "WORD,WORD")]
        scheme: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Vote over several word alignments of the same corpus.
    Aggregate {
        /// Pharaoh files, one per scheme.
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        output: PathBuf,
        /// Also write per-link vote counts as CSV.
        #[arg(long)]
        tally: Option<PathBuf>,
    },
    /// Score a Pharaoh alignment against a gold standard.
    Evaluate {
        #[arg(long)]
        alignment: PathBuf,
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Gold indices start at 0 instead of 1.
        #[arg(long)]
        zero_based: bool,
        /// Added to gold sentence ids, e.g. the training-set size when the
        /// evaluation set was appended to it.
        #[arg(long, default_value_t = 0)]
        gold_offset: usize,
        /// Corpus the gold refers to; enables the out-of-range check.
        #[arg(long, requires = "eval_target")]
        eval_source: Option<PathBuf>,
        #[arg(long, requires = "eval_source")]
        eval_target: Option<PathBuf>,
        #[arg(long, value_enum)]
        markup: Option<CorpusMarkup>,
        /// JSON output; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Select segmentation cells and threshold against the gold standard.
    Optimize {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        tables: TableArgs,
        #[command(flatten)]
        aligner: AlignerArgs,
        #[command(flatten)]
        search: SearchArgs,
        /// Continue from a state file written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Apply cells and threshold selected on another corpus.
    Apply {
        #[arg(long)]
        state: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        tables: TableArgs,
        #[command(flatten)]
        aligner: AlignerArgs,
        #[arg(long)]
        output: PathBuf,
        /// Metrics JSON, written when a gold standard is given.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Write diagnostic CSVs: affected-sentence curves, explored trials,
    /// selected cells and per-link vote tallies.
    Report {
        #[arg(long)]
        state: Option<PathBuf>,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        tables: TableArgs,
        #[command(flatten)]
        aligner: AlignerArgs,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Align a `source ||| target` file in one direction (Pharaoh output).
    /// Lets this binary stand in as an external aligner.
    #[command(hide = true)]
    BitextAlign {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        aligner: AlignerArgs,
    },
}

#[derive(Args, Debug, Clone, Default)]
pub struct CorpusArgs {
    /// Source side, one tokenized sentence per line.
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Gold-annotated pairs appended after the (subsampled) training pairs.
    #[arg(long, requires = "eval_target")]
    pub eval_source: Option<PathBuf>,
    #[arg(long, requires = "eval_source")]
    pub eval_target: Option<PathBuf>,
    /// NAACL gold file indexing the evaluation pairs (or the corpus itself
    /// when no evaluation pairs are given).
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub markup: Option<CorpusMarkup>,
    /// Gold indices start at 0 instead of 1.
    #[arg(long)]
    pub zero_based: bool,
    /// Keep this many training pairs, drawn uniformly.
    #[arg(long)]
    pub subsample: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct TableArgs {
    #[arg(long)]
    pub source_merges: Option<PathBuf>,
    #[arg(long)]
    pub target_merges: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct AlignerArgs {
    #[arg(long)]
    pub model1_iterations: Option<u32>,
    #[arg(long)]
    pub model2_iterations: Option<u32>,
    #[arg(long)]
    pub null_probability: Option<f64>,
    #[arg(long)]
    pub diagonal_tension: Option<f64>,
    #[arg(long)]
    pub tension_updates: Option<u32>,
    #[arg(long)]
    pub smoothing_alpha: Option<f64>,
    /// External aligner command with {input}, {output} and optional {seed}.
    #[arg(long)]
    pub aligner_command: Option<String>,
    /// intersection, union or gdfa.
    #[arg(long)]
    pub method: Option<SymmetrizationMethod>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SearchArgs {
    /// Trials per iteration.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Prior samples per iteration before the surrogate is used.
    #[arg(long)]
    pub random_init: Option<usize>,
    /// Stop after this many iterations without improvement.
    #[arg(long)]
    pub early_stop: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub lambda_min: Option<f64>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    #[arg(long)]
    pub source_min: Option<u32>,
    #[arg(long)]
    pub source_max: Option<u32>,
    #[arg(long)]
    pub target_min: Option<u32>,
    #[arg(long)]
    pub target_max: Option<u32>,
    /// Leave the unsegmented WORD value out of both sides.
    #[arg(long)]
    pub exclude_word: bool,
    /// Merges per side when tables are learned on the fly.
    #[arg(long)]
    pub max_merges: Option<u32>,
}

/// Parses arguments, runs the command and maps errors to exit codes.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Settings shared by all commands after merging flags over the config file.
struct Ctx {
    file: FileConfig,
    seed: u64,
    workers: usize,
}

impl Ctx {
    fn out_dir(&self, flag: Option<PathBuf>) -> Result<PathBuf> {
        flag.or_else(|| self.file.out_dir.clone()).ok_or_else(|| Error::Usage("--out-dir is required".into()))
    }
}

fn required(flag: Option<PathBuf>, file: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| file.clone()).ok_or_else(|| Error::Usage(format!("--{name} is required")))
}

fn existing(path: PathBuf) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::io(&path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file")))
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let ctx =
        Ctx { seed: cli.seed.or(file.seed).unwrap_or(0), workers: cli.workers.or(file.workers).unwrap_or(1), file };
    match cli.command {
        Command::LearnBpe { corpus, max_merges, out_dir } => cmd_learn_bpe(&ctx, &corpus, max_merges, out_dir),
        Command::Segment { corpus, tables, scheme, out_dir } => cmd_segment(&ctx, &corpus, &tables, &scheme, out_dir),
        Command::Align { corpus, tables, aligner, scheme, output } => {
            cmd_align(&ctx, &corpus, &tables, &aligner, &scheme, &output)
        }
        Command::Aggregate { inputs, lambda, output, tally } => cmd_aggregate(&ctx, &inputs, lambda, &output, tally),
        Command::Evaluate {
            alignment,
            gold,
            zero_based,
            gold_offset,
            eval_source,
            eval_target,
            markup,
            output,
            csv,
        } => {
            let gold = existing(required(gold, &ctx.file.gold, "gold")?)?;
            let zero_based = zero_based || ctx.file.zero_based.unwrap_or(false);
            let markup = markup.or(ctx.file.markup).unwrap_or_default();
            let eval = eval_source.zip(eval_target);
            cmd_evaluate(&ctx, &alignment, &gold, zero_based, gold_offset, eval, markup, output, csv)
        }
        Command::Optimize { corpus, tables, aligner, search, resume, out_dir } => {
            cmd_optimize(&ctx, &corpus, &tables, &aligner, &search, resume, out_dir)
        }
        Command::Apply { state, corpus, tables, aligner, output, metrics } => {
            cmd_apply(&ctx, &state, &corpus, &tables, &aligner, &output, metrics)
        }
        Command::Report { state, corpus, tables, aligner, out_dir } => {
            cmd_report(&ctx, state, &corpus, &tables, &aligner, out_dir)
        }
        Command::BitextAlign { input, output, aligner } => cmd_bitext_align(&ctx, &input, &output, &aligner),
    }
}

/// The assembled corpus: (subsampled) training pairs, then evaluation pairs.
struct Inputs {
    corpus: ParallelCorpus,
    gold: Option<GoldAlignment>,
}

fn load_inputs(ctx: &Ctx, args: &CorpusArgs) -> Result<Inputs> {
    let f = &ctx.file;
    let markup = args.markup.or(f.markup).unwrap_or_default();
    let source = existing(required(args.source.clone(), &f.source, "source")?)?;
    let target = existing(required(args.target.clone(), &f.target, "target")?)?;
    let mut corpus = formats::load_parallel_files(&source, &target, markup)?;
    if let Some(n) = args.subsample.or(f.subsample) {
        let before = corpus.len();
        corpus = subsample(&corpus, n, ctx.seed)?;
        log::info!("subsampled {} of {before} training pairs", corpus.len());
    }
    let zero_based = args.zero_based || f.zero_based.unwrap_or(false);
    let gold = match args.gold.clone().or_else(|| f.gold.clone()) {
        Some(p) => Some(formats::read_gold_naacl(formats::open(&existing(p)?)?, !zero_based)?),
        None => None,
    };
    let eval = match (
        args.eval_source.clone().or_else(|| f.eval_source.clone()),
        args.eval_target.clone().or_else(|| f.eval_target.clone()),
    ) {
        (Some(s), Some(t)) => Some(formats::load_parallel_files(&existing(s)?, &existing(t)?, markup)?),
        (None, None) => None,
        _ => return Err(Error::Usage("--eval-source and --eval-target go together".into())),
    };
    let (corpus, gold) = match (eval, gold) {
        (Some(eval), Some(gold)) => {
            warn_out_of_range(&gold, &eval);
            let (c, g) = attach_evaluation_set(&corpus, &eval, &gold)?;
            (c, Some(g))
        }
        (Some(eval), None) => {
            let empty = GoldAlignment::new(AlignmentSet::new(), AlignmentSet::new(), Default::default());
            (attach_evaluation_set(&corpus, &eval, &empty)?.0, None)
        }
        (None, gold) => {
            if let Some(g) = &gold {
                warn_out_of_range(g, &corpus);
                if let Some(l) = g.covered_sentences().iter().next_back().filter(|&&s| s >= corpus.len()) {
                    return Err(subalign_core::Error::GoldOutOfRange { sentence: *l, len: corpus.len() }.into());
                }
            }
            (corpus, gold)
        }
    };
    Ok(Inputs { corpus, gold })
}

fn warn_out_of_range(gold: &GoldAlignment, corpus: &ParallelCorpus) -> usize {
    let n = formats::gold_out_of_range(gold, corpus);
    if n > 0 {
        log::warn!("{n} gold links fall outside their sentences; check the index base (--zero-based)");
    }
    n
}

fn load_tables(ctx: &Ctx, args: &TableArgs) -> Result<Option<(MergeTable, MergeTable)>> {
    let f = &ctx.file;
    match (
        args.source_merges.clone().or_else(|| f.source_merges.clone()),
        args.target_merges.clone().or_else(|| f.target_merges.clone()),
    ) {
        (Some(s), Some(t)) => {
            Ok(Some((formats::read_merge_table_file(&existing(s)?)?, formats::read_merge_table_file(&existing(t)?)?)))
        }
        (None, None) => Ok(None),
        _ => Err(Error::Usage("--source-merges and --target-merges go together".into())),
    }
}

fn learn_tables(corpus: &ParallelCorpus, max_merges: u32) -> Result<(MergeTable, MergeTable)> {
    let src: Vec<&[String]> = corpus.source_sentences().collect();
    let tgt: Vec<&[String]> = corpus.target_sentences().collect();
    let s = learn_bpe(&src, max_merges)?;
    let t = learn_bpe(&tgt, max_merges)?;
    log::info!("learned {} source and {} target merges", s.len(), t.len());
    Ok((s, t))
}

/// Tables from files, or learned on `corpus` when none are given.
fn tables_or_learn(
    ctx: &Ctx,
    args: &TableArgs,
    corpus: &ParallelCorpus,
    max_merges: Option<u32>,
) -> Result<(MergeTable, MergeTable)> {
    match load_tables(ctx, args)? {
        Some(t) => Ok(t),
        None => learn_tables(corpus, max_merges.or(ctx.file.max_merges).unwrap_or(DEFAULT_MAX_MERGES)),
    }
}

/// Tables for `scheme`, which may be empty when the scheme uses WORD on a side.
fn tables_for(ctx: &Ctx, args: &TableArgs, scheme: SegmentationScheme) -> Result<(MergeTable, MergeTable)> {
    match load_tables(ctx, args)? {
        Some(t) => Ok(t),
        None if scheme == SegmentationScheme::WORD => Ok((MergeTable::empty(), MergeTable::empty())),
        None => Err(Error::Usage(format!("scheme {scheme} needs --source-merges and --target-merges"))),
    }
}

pub fn parse_scheme(s: &str) -> Result<SegmentationScheme> {
    let t = s.trim().trim_start_matches('(').trim_end_matches(')');
    let (a, b) = t.split_once(',').ok_or_else(|| Error::Usage(format!("scheme {s:?} must look like SOURCE,TARGET")))?;
    let side = |x: &str| x.trim().parse::<VocabSize>().map_err(|e| Error::Usage(format!("scheme {s:?}: {e}")));
    Ok(SegmentationScheme::new(side(a)?, side(b)?))
}

fn aligner_config(ctx: &Ctx, a: &AlignerArgs) -> Result<AlignerConfig> {
    let f = &ctx.file;
    let d = AlignerConfig::default();
    let cfg = AlignerConfig {
        model1_iterations: a.model1_iterations.or(f.model1_iterations).unwrap_or(d.model1_iterations),
        model2_iterations: a.model2_iterations.or(f.model2_iterations).unwrap_or(d.model2_iterations),
        null_probability: a.null_probability.or(f.null_probability).unwrap_or(d.null_probability),
        diagonal_tension: a.diagonal_tension.or(f.diagonal_tension).unwrap_or(d.diagonal_tension),
        tension_updates_per_iter: a.tension_updates.or(f.tension_updates).unwrap_or(d.tension_updates_per_iter),
        smoothing_alpha: a.smoothing_alpha.or(f.smoothing_alpha).unwrap_or(d.smoothing_alpha),
        seed: ctx.seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// The internal aligner or an external command.
pub enum Backend {
    Internal(InternalAligner),
    External(ExternalAligner),
}

impl Aligner for Backend {
    fn align(&self, corpus: &SegmentedCorpus) -> subalign_core::Result<BidirectionalAlignment> {
        match self {
            Backend::Internal(a) => a.align(corpus),
            Backend::External(a) => a.align(corpus),
        }
    }
}

fn backend(ctx: &Ctx, a: &AlignerArgs) -> Result<Backend> {
    let cfg = aligner_config(ctx, a)?;
    match a.aligner_command.clone().or_else(|| ctx.file.aligner_command.clone()) {
        Some(cmd) => Ok(Backend::External(ExternalAligner::new(cmd, ctx.seed)?)),
        None => Ok(Backend::Internal(InternalAligner::new(cfg))),
    }
}

fn method(ctx: &Ctx, a: &AlignerArgs) -> SymmetrizationMethod {
    a.method.or(ctx.file.method).unwrap_or_default()
}

fn evaluator<'a>(
    ctx: &Ctx,
    corpus: &'a ParallelCorpus,
    tables: &'a (MergeTable, MergeTable),
    a: &AlignerArgs,
) -> Result<Evaluator<ParallelSchemes<SchemePipeline<'a, Backend>>>> {
    let pipeline = SchemePipeline::new(corpus, &tables.0, &tables.1, backend(ctx, a)?).with_method(method(ctx, a));
    Ok(Evaluator::new(ParallelSchemes::new(pipeline, ctx.workers)?))
}

fn log_metrics(label: &str, m: &Metrics) {
    log::info!("{label}: precision {:.4} recall {:.4} F1 {:.4}", m.precision, m.recall, m.f1);
}

fn write_metrics_json(path: &Path, record: &MetricsRecord) -> Result<()> {
    let mut text = serde_json::to_string_pretty(record)?;
    text.push('\n');
    formats::write_file(path, |w| w.write_all(text.as_bytes()))
}

fn cmd_learn_bpe(ctx: &Ctx, args: &CorpusArgs, max_merges: Option<u32>, out_dir: Option<PathBuf>) -> Result<()> {
    let out = ctx.out_dir(out_dir)?;
    let inputs = load_inputs(ctx, args)?;
    let (s, t) = learn_tables(&inputs.corpus, max_merges.or(ctx.file.max_merges).unwrap_or(DEFAULT_MAX_MERGES))?;
    for (name, table) in [("source", &s), ("target", &t)] {
        formats::write_file(&out.join(format!("{name}.merges")), |w| formats::write_merge_table(w, table))?;
        formats::write_file(&out.join(format!("{name}.affected.csv")), |w| {
            formats::write_affected_curve(w, &affected_curve(table), ctx.seed)
        })?;
    }
    Ok(())
}

fn cmd_segment(ctx: &Ctx, args: &CorpusArgs, tables: &TableArgs, scheme: &str, out_dir: Option<PathBuf>) -> Result<()> {
    let out = ctx.out_dir(out_dir)?;
    let scheme = parse_scheme(scheme)?;
    let (st, tt) = tables_for(ctx, tables, scheme)?;
    let inputs = load_inputs(ctx, args)?;
    let seg = segment_corpus(&inputs.corpus, scheme, &st, &tt)?;
    for (name, pick) in [("source", 0usize), ("target", 1)] {
        let side = |p: &(subalign_core::bpe::SegmentedSentence, subalign_core::bpe::SegmentedSentence)| {
            if pick == 0 {
                p.0.clone()
            } else {
                p.1.clone()
            }
        };
        formats::write_file(&out.join(format!("segmented.{name}")), |w| {
            for p in &seg.pairs {
                writeln!(w, "{}", side(p).tokens.join(" "))?;
            }
            Ok(())
        })?;
        formats::write_file(&out.join(format!("wordmap.{name}")), |w| {
            for p in &seg.pairs {
                let map: Vec<String> = side(p).word_of_token.iter().map(usize::to_string).collect();
                writeln!(w, "{}", map.join(" "))?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn cmd_align(
    ctx: &Ctx,
    args: &CorpusArgs,
    tables: &TableArgs,
    a: &AlignerArgs,
    scheme: &str,
    output: &Path,
) -> Result<()> {
    let scheme = parse_scheme(scheme)?;
    let tables = tables_for(ctx, tables, scheme)?;
    scheme.validate(&tables.0, &tables.1)?;
    let inputs = load_inputs(ctx, args)?;
    let mut ev = evaluator(ctx, &inputs.corpus, &tables, a)?;
    let links = ev.scheme_alignment(scheme)?.clone();
    formats::write_pharaoh_file(output, &links, inputs.corpus.len())?;
    if let Some(gold) = &inputs.gold {
        log_metrics(&format!("{scheme}"), &score(&links, gold)?);
    }
    Ok(())
}

fn cmd_aggregate(ctx: &Ctx, inputs: &[PathBuf], lambda: f64, output: &Path, tally: Option<PathBuf>) -> Result<()> {
    let mut sets = Vec::with_capacity(inputs.len());
    let mut sentences = 0;
    for p in inputs {
        let parsed = formats::read_pharaoh(formats::open(&existing(p.clone())?)?).map_err(|e| match e {
            Error::Parse { line, reason, .. } => Error::Parse { what: p.display().to_string(), line, reason },
            other => other,
        })?;
        sentences = sentences.max(parsed.sentences);
        sets.push(parsed.alignment);
    }
    let agg = aggregate_sets(&sets, lambda)?;
    formats::write_pharaoh_file(output, &agg, sentences)?;
    if let Some(path) = tally {
        let t = VoteTally::new(&sets);
        formats::write_file(&path, |w| formats::write_tally(w, &t, ctx.seed))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    ctx: &Ctx,
    alignment: &Path,
    gold: &Path,
    zero_based: bool,
    offset: usize,
    eval: Option<(PathBuf, PathBuf)>,
    markup: CorpusMarkup,
    output: Option<PathBuf>,
    csv: Option<PathBuf>,
) -> Result<()> {
    let predicted = formats::read_pharaoh(formats::open(&existing(alignment.to_path_buf())?)?)?.alignment;
    let gold = formats::read_gold_naacl(formats::open(gold)?, !zero_based)?;
    if let Some((s, t)) = eval {
        let corpus = formats::load_parallel_files(&existing(s)?, &existing(t)?, markup)?;
        warn_out_of_range(&gold, &corpus);
    }
    let gold = if offset == 0 {
        gold
    } else {
        let shift = |set: &AlignmentSet| -> AlignmentSet {
            set.iter().map(|l| subalign_core::corpus::Link::new(l.sentence + offset, l.source, l.target)).collect()
        };
        GoldAlignment::new(
            shift(gold.sure()),
            shift(gold.possible()),
            gold.covered_sentences().iter().map(|s| s + offset).collect(),
        )
    };
    let record = MetricsRecord { seed: ctx.seed, metrics: score(&predicted, &gold)? };
    log_metrics("alignment", &record.metrics);
    match output {
        Some(p) => write_metrics_json(&p, &record)?,
        None => println!("{}", serde_json::to_string_pretty(&record)?),
    }
    if let Some(p) = csv {
        formats::write_file(&p, |w| formats::write_metrics_csv(w, &record))?;
    }
    Ok(())
}

fn search_space(ctx: &Ctx, s: &SearchArgs, tables: &(MergeTable, MergeTable)) -> Result<SearchSpace> {
    let f = &ctx.file;
    let word = !(s.exclude_word || f.exclude_word.unwrap_or(false));
    let side = |lo: Option<u32>, hi: Option<u32>, table: &MergeTable| SideRange {
        merges: Some((lo.unwrap_or(0), hi.unwrap_or(table.max_merges()).min(table.max_merges()))),
        word,
    };
    let space = SearchSpace {
        source: side(s.source_min.or(f.source_min), s.source_max.or(f.source_max), &tables.0),
        target: side(s.target_min.or(f.target_min), s.target_max.or(f.target_max), &tables.1),
        lambda: (s.lambda_min.or(f.lambda_min).unwrap_or(0.0), s.lambda_max.or(f.lambda_max).unwrap_or(1.0)),
    };
    space.validate(&tables.0, &tables.1)?;
    Ok(space)
}

fn optimizer_config(ctx: &Ctx, s: &SearchArgs) -> Result<OptimizerConfig> {
    let f = &ctx.file;
    let d = OptimizerConfig::default();
    let cfg = OptimizerConfig {
        budget: s.budget.or(f.budget).unwrap_or(d.budget),
        random_init: s.random_init.or(f.random_init).unwrap_or(d.random_init),
        early_stop: s.early_stop.or(f.early_stop).unwrap_or(d.early_stop),
        seed: ctx.seed,
        max_iterations: s.max_iterations.or(f.max_iterations),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_optimize(
    ctx: &Ctx,
    args: &CorpusArgs,
    tables: &TableArgs,
    a: &AlignerArgs,
    search: &SearchArgs,
    resume: Option<PathBuf>,
    out_dir: Option<PathBuf>,
) -> Result<()> {
    let out = ctx.out_dir(out_dir)?;
    let mut config = optimizer_config(ctx, search)?;
    let previous = match resume {
        Some(p) => Some(StateFile::read(&existing(p)?)?),
        None => None,
    };
    if let Some(prev) = &previous {
        if prev.seed != config.seed {
            log::warn!("resuming with the state's seed {} instead of {}", prev.seed, config.seed);
            config.seed = prev.seed;
        }
    }
    let inputs = load_inputs(ctx, args)?;
    let gold = inputs.gold.as_ref().ok_or_else(|| Error::Usage("optimize needs --gold".into()))?;
    let tables = tables_or_learn(ctx, tables, &inputs.corpus, search.max_merges)?;
    let space = search_space(ctx, search, &tables)?;
    if let Some(prev) = &previous {
        if prev.space != space {
            log::warn!("the search space differs from the resumed run's");
        }
    }
    let mut ev = evaluator(ctx, &inputs.corpus, &tables, a)?;
    let (state, alignment) = run_iterative_sampling(&mut ev, gold, &space, &config, previous.map(|p| p.state))?;
    if let Some(b) = state.baseline_f1 {
        log::info!("word-level F1 {b:.4}");
    }
    let metrics = score(&alignment, gold)?;
    log_metrics(&format!("best prefix of {} cells", state.best_prefix_len), &metrics);

    let file = StateFile { seed: state.seed, config, space, state };
    let json = file.to_json()?;
    formats::write_file(&out.join("state.json"), |w| w.write_all(json.as_bytes()))?;
    formats::write_file(&out.join("trace.csv"), |w| formats::write_trace(w, &file.state))?;
    formats::write_file(&out.join("trials.csv"), |w| formats::write_trials(w, &file.state))?;
    formats::write_pharaoh_file(&out.join("alignment.pharaoh"), &alignment, inputs.corpus.len())?;
    write_metrics_json(&out.join("metrics.json"), &MetricsRecord { seed: file.seed, metrics })
}

fn cmd_apply(
    ctx: &Ctx,
    state: &Path,
    args: &CorpusArgs,
    tables: &TableArgs,
    a: &AlignerArgs,
    output: &Path,
    metrics: Option<PathBuf>,
) -> Result<()> {
    let file = StateFile::read(&existing(state.to_path_buf())?)?;
    let (xi, lambda) =
        file.state.best().ok_or_else(|| Error::Usage(format!("{} has no selected cells", state.display())))?;
    let inputs = load_inputs(ctx, args)?;
    let tables = tables_or_learn(ctx, tables, &inputs.corpus, None)?;
    let mut ev = evaluator(ctx, &inputs.corpus, &tables, a)?;
    let t = apply_transfer(&mut ev, &tables.0, &tables.1, xi, lambda)?;
    for (from, to) in &t.clamped {
        log::info!("clamped cell {from} to {to}");
    }
    log::info!("applied {} cells at lambda {lambda}", t.schemes.len());
    formats::write_pharaoh_file(output, &t.alignment, inputs.corpus.len())?;
    if let Some(gold) = &inputs.gold {
        let m = score(&t.alignment, gold)?;
        log_metrics("transferred", &m);
        if let Some(p) = metrics {
            write_metrics_json(&p, &MetricsRecord { seed: ctx.seed, metrics: m })?;
        }
    }
    Ok(())
}

fn cmd_report(
    ctx: &Ctx,
    state: Option<PathBuf>,
    args: &CorpusArgs,
    tables: &TableArgs,
    a: &AlignerArgs,
    out_dir: Option<PathBuf>,
) -> Result<()> {
    let out = ctx.out_dir(out_dir)?;
    let tables = load_tables(ctx, tables)?;
    if tables.is_none() && state.is_none() {
        return Err(Error::Usage("report needs --state and/or merge tables".into()));
    }
    if let Some((s, t)) = &tables {
        for (name, table) in [("source", s), ("target", t)] {
            formats::write_file(&out.join(format!("affected-{name}.csv")), |w| {
                formats::write_affected_curve(w, &affected_curve(table), ctx.seed)
            })?;
        }
    }
    let file = match state {
        Some(p) => Some(StateFile::read(&existing(p)?)?),
        None => None,
    };
    if let Some(f) = &file {
        formats::write_file(&out.join("exploration.csv"), |w| formats::write_trials(w, &f.state))?;
        formats::write_file(&out.join("selected.csv"), |w| formats::write_selected(w, &f.state))?;
        formats::write_file(&out.join("trace.csv"), |w| formats::write_trace(w, &f.state))?;
    }
    let has_corpus = args.source.is_some() || ctx.file.source.is_some();
    if let (Some(f), true) = (&file, has_corpus) {
        let (xi, _) = f.state.best().ok_or_else(|| Error::Usage("the state has no selected cells".into()))?;
        let xi = xi.to_vec();
        let inputs = load_inputs(ctx, args)?;
        let tables = match tables {
            Some(t) => t,
            None => learn_tables(&inputs.corpus, ctx.file.max_merges.unwrap_or(DEFAULT_MAX_MERGES))?,
        };
        let mut ev = evaluator(ctx, &inputs.corpus, &tables, a)?;
        let tally = ev.tally(&xi)?;
        formats::write_file(&out.join("tally.csv"), |w| formats::write_tally(w, &tally, f.seed))?;
    }
    Ok(())
}

fn cmd_bitext_align(ctx: &Ctx, input: &Path, output: &Path, a: &AlignerArgs) -> Result<()> {
    let cfg = aligner_config(ctx, a)?;
    let mut pairs = Vec::new();
    for (i, line) in formats::open(&existing(input.to_path_buf())?)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(input, e))?;
        let (s, t) =
            line.split_once("|||").ok_or_else(|| Error::parse(input.display().to_string(), i + 1, "missing |||"))?;
        let side = |x: &str| x.split_whitespace().map(String::from).collect::<Vec<_>>();
        pairs.push((side(s), side(t)));
    }
    let bitext = Bitext::new(pairs.iter().map(|(s, t)| (s.as_slice(), t.as_slice())))?;
    let model = train(&bitext, &cfg)?;
    let links = viterbi_align(&bitext, &model).links();
    formats::write_pharaoh_file(output, &links, pairs.len())
}
