//! Text formats: parallel corpora, NAACL gold files, Pharaoh alignments,
//! merge tables, CSV diagnostics and optimizer state documents.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use subalign_core::bpe::MergeTable;
use subalign_core::corpus::{AlignmentSet, GoldAlignment, Link, ParallelCorpus};
use subalign_core::linkops::VoteTally;
use subalign_core::metrics::Metrics;
use subalign_core::optimizer::{OptimizerConfig, OptimizerState, SearchSpace};

use crate::{Error, Result};

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

/// Creates `path` (and its parent directories) for writing.
pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes through `f` and flushes, attributing IO errors to `path`.
pub fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn read_lines(r: impl BufRead, what: &str) -> Result<Vec<String>> {
    r.lines()
        .enumerate()
        .map(|(i, line)| {
            let mut line = line.map_err(|e| Error::parse(what, i + 1, e.to_string()))?;
            if line.ends_with('\r') {
                line.pop();
            }
            Ok(line)
        })
        .collect()
}

/// How sentences are wrapped on each line of a corpus file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CorpusMarkup {
    /// One tokenized sentence per line.
    #[default]
    Plain,
    /// Lines of the form `<s snum=N> tokens </s>`.
    Wpt,
}

fn strip_markup(line: &str, markup: CorpusMarkup) -> Option<&str> {
    match markup {
        CorpusMarkup::Plain => Some(line),
        CorpusMarkup::Wpt => {
            let t = line.trim();
            let body = t.strip_prefix("<s")?.strip_suffix("</s>")?;
            Some(&body[body.find('>')? + 1..])
        }
    }
}

/// Reads a sentence-aligned corpus, one sentence per line on each side.
pub fn load_parallel(source: impl BufRead, target: impl BufRead, markup: CorpusMarkup) -> Result<ParallelCorpus> {
    let src = read_lines(source, "source")?;
    let tgt = read_lines(target, "target")?;
    if src.len() != tgt.len() {
        return Err(Error::Usage(format!(
            "line-count mismatch: source has {} lines, target has {}",
            src.len(),
            tgt.len()
        )));
    }
    let mut pairs = Vec::with_capacity(src.len());
    for (i, (s, t)) in src.iter().zip(&tgt).enumerate() {
        let side = |text: &str, what: &str| -> Result<Vec<String>> {
            let body =
                strip_markup(text, markup).ok_or_else(|| Error::parse(what, i + 1, "expected <s snum=..> ... </s>"))?;
            let tokens: Vec<String> = body.split_whitespace().map(String::from).collect();
            if tokens.is_empty() {
                return Err(Error::parse(what, i + 1, "empty sentence"));
            }
            Ok(tokens)
        };
        pairs.push((side(s, "source")?, side(t, "target")?));
    }
    Ok(ParallelCorpus::from_token_pairs(pairs)?)
}

pub fn load_parallel_files(source: &Path, target: &Path, markup: CorpusMarkup) -> Result<ParallelCorpus> {
    let what = |p: &Path| p.display().to_string();
    load_parallel(open(source)?, open(target)?, markup).map_err(|e| match e {
        Error::Parse { what: side, line, reason } => {
            let path = if side == "source" { what(source) } else { what(target) };
            Error::Parse { what: path, line, reason }
        }
        other => other,
    })
}

/// Reads gold links `sentence source target [S|P] [confidence]`. A missing
/// label means S. With `one_based`, every index is shifted down by one.
pub fn read_gold_naacl(r: impl BufRead, one_based: bool) -> Result<GoldAlignment> {
    let mut sure = AlignmentSet::new();
    let mut possible = AlignmentSet::new();
    for (i, line) in read_lines(r, "gold")?.iter().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let err = |reason: String| Error::parse("gold", i + 1, reason);
        if !(3..=5).contains(&fields.len()) {
            return Err(err(format!("expected 3 to 5 fields, found {}", fields.len())));
        }
        let mut idx = [0usize; 3];
        for (k, f) in fields[..3].iter().enumerate() {
            let v: usize = f.parse().map_err(|_| err(format!("{f:?} is not an index")))?;
            idx[k] = if one_based {
                v.checked_sub(1).ok_or_else(|| err(format!("index {v} must be positive in one-based files")))?
            } else {
                v
            };
        }
        let is_sure = match fields.get(3) {
            None | Some(&"S") => true,
            Some(&"P") => false,
            Some(other) => return Err(err(format!("unknown label {other:?}"))),
        };
        if let Some(c) = fields.get(4) {
            c.parse::<f64>().map_err(|_| err(format!("confidence {c:?} is not a number")))?;
        }
        let link = Link::new(idx[0], idx[1], idx[2]);
        if is_sure {
            sure.insert(link);
        }
        possible.insert(link);
    }
    Ok(GoldAlignment::new(sure, possible, BTreeSet::new()))
}

/// Gold links in `gold` that do not fit the sentence lengths of `corpus`.
pub fn gold_out_of_range(gold: &GoldAlignment, corpus: &ParallelCorpus) -> usize {
    gold.out_of_range(corpus).len()
}

/// A Pharaoh file: links plus the number of lines it had.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pharaoh {
    pub alignment: AlignmentSet,
    pub sentences: usize,
}

pub fn read_pharaoh(r: impl BufRead) -> Result<Pharaoh> {
    let lines = read_lines(r, "alignment")?;
    let mut alignment = AlignmentSet::new();
    for (s, line) in lines.iter().enumerate() {
        for tok in line.split_whitespace() {
            let parsed = tok.split_once('-').and_then(|(i, j)| {
                let digits = |x: &str| !x.is_empty() && x.bytes().all(|b| b.is_ascii_digit());
                (digits(i) && digits(j)).then(|| (i.parse().ok(), j.parse().ok()))
            });
            match parsed {
                Some((Some(i), Some(j))) => {
                    alignment.insert(Link::new(s, i, j));
                }
                _ => return Err(Error::parse("alignment", s + 1, format!("{tok:?} is not of the form i-j"))),
            }
        }
    }
    Ok(Pharaoh { alignment, sentences: lines.len() })
}

/// Writes one line per sentence `0..sentences`; sentences without links get
/// empty lines.
pub fn write_pharaoh(w: &mut impl Write, alignment: &AlignmentSet, sentences: usize) -> Result<()> {
    if let Some(last) = alignment.iter().next_back() {
        if last.sentence >= sentences {
            return Err(Error::Usage(format!(
                "alignment refers to sentence {} but only {sentences} sentences are being written",
                last.sentence
            )));
        }
    }
    let mut links = alignment.iter().peekable();
    let io = |e: std::io::Error| Error::External(e.to_string());
    for s in 0..sentences {
        let mut first = true;
        while let Some(l) = links.next_if(|l| l.sentence == s) {
            if !first {
                w.write_all(b" ").map_err(io)?;
            }
            write!(w, "{}-{}", l.source, l.target).map_err(io)?;
            first = false;
        }
        w.write_all(b"\n").map_err(io)?;
    }
    Ok(())
}

pub fn write_pharaoh_file(path: &Path, alignment: &AlignmentSet, sentences: usize) -> Result<()> {
    let mut buf = Vec::new();
    write_pharaoh(&mut buf, alignment, sentences)?;
    write_file(path, |w| w.write_all(&buf))
}

/// Merge table text: a header line with the merge count, then one
/// `left right affected` line per merge in order.
pub fn write_merge_table(w: &mut impl Write, table: &MergeTable) -> std::io::Result<()> {
    writeln!(w, "{}", table.len())?;
    let affected = table.affected();
    for (k, (l, r)) in table.merges().iter().enumerate() {
        match affected.get(k) {
            Some(a) => writeln!(w, "{l} {r} {a}")?,
            None => writeln!(w, "{l} {r}")?,
        }
    }
    Ok(())
}

/// Reads a merge table; the affected-count column is optional but must be
/// present on all lines or none.
pub fn read_merge_table(r: impl BufRead) -> Result<MergeTable> {
    let lines = read_lines(r, "merge table")?;
    let header = lines.first().ok_or_else(|| Error::parse("merge table", 1, "missing header"))?;
    let count: usize = header
        .trim()
        .parse()
        .map_err(|_| Error::parse("merge table", 1, format!("{header:?} is not a merge count")))?;
    let body: Vec<&String> = lines[1..].iter().filter(|l| !l.trim().is_empty()).collect();
    if body.len() != count {
        return Err(Error::parse("merge table", 1, format!("header announces {count} merges, found {}", body.len())));
    }
    let mut merges = Vec::with_capacity(count);
    let mut affected = Vec::new();
    for (k, line) in body.iter().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [l, r] => merges.push((l.to_string(), r.to_string())),
            [l, r, a] => {
                merges.push((l.to_string(), r.to_string()));
                affected
                    .push(a.parse().map_err(|_| Error::parse("merge table", k + 2, format!("{a:?} is not a count")))?);
            }
            _ => return Err(Error::parse("merge table", k + 2, "expected `left right [affected]`")),
        }
    }
    if !affected.is_empty() && affected.len() != merges.len() {
        return Err(Error::parse("merge table", 2, "affected counts must be given for all merges or none"));
    }
    Ok(MergeTable::new(merges, affected)?)
}

pub fn read_merge_table_file(path: &Path) -> Result<MergeTable> {
    read_merge_table(open(path)?).map_err(|e| match e {
        Error::Parse { line, reason, .. } => Error::Parse { what: path.display().to_string(), line, reason },
        other => other,
    })
}

fn seed_header(w: &mut impl Write, seed: u64) -> std::io::Result<()> {
    writeln!(w, "# seed={seed}")
}

pub fn write_affected_curve(w: &mut impl Write, curve: &[(u32, u32)], seed: u64) -> std::io::Result<()> {
    seed_header(w, seed)?;
    writeln!(w, "k,affected")?;
    for (k, a) in curve {
        writeln!(w, "{k},{a}")?;
    }
    Ok(())
}

pub fn write_tally(w: &mut impl Write, tally: &VoteTally, seed: u64) -> std::io::Result<()> {
    seed_header(w, seed)?;
    writeln!(w, "sentence,source,target,count,total")?;
    for (l, c) in &tally.counts {
        writeln!(w, "{},{},{},{c},{}", l.sentence, l.source, l.target, tally.total)?;
    }
    Ok(())
}

/// One row per completed iteration: the accepted cell, its threshold and F1.
pub fn write_trace(w: &mut impl Write, state: &OptimizerState) -> std::io::Result<()> {
    seed_header(w, state.seed)?;
    writeln!(w, "iteration,source_size,target_size,lambda,f1,best_f1")?;
    let best = state.best_so_far();
    for (i, (scheme, (lambda, f1))) in
        state.xi_history.iter().zip(state.lambda_history.iter().zip(&state.f1_trace)).enumerate()
    {
        writeln!(w, "{i},{},{},{lambda},{f1},{}", scheme.source, scheme.target, best[i])?;
    }
    Ok(())
}

/// Every evaluated trial, for plotting what the search explored.
pub fn write_trials(w: &mut impl Write, state: &OptimizerState) -> std::io::Result<()> {
    seed_header(w, state.seed)?;
    writeln!(w, "iteration,source_size,target_size,lambda,f1")?;
    for t in &state.all_trials {
        writeln!(w, "{},{},{},{},{}", t.iteration, t.scheme.source, t.scheme.target, t.lambda, t.f1)?;
    }
    Ok(())
}

/// The selected cells, flagging those in the best prefix.
pub fn write_selected(w: &mut impl Write, state: &OptimizerState) -> std::io::Result<()> {
    seed_header(w, state.seed)?;
    writeln!(w, "order,source_size,target_size,lambda,f1,in_best_prefix")?;
    for (i, scheme) in state.xi_history.iter().enumerate() {
        writeln!(
            w,
            "{i},{},{},{},{},{}",
            scheme.source,
            scheme.target,
            state.lambda_history[i],
            state.f1_trace[i],
            i < state.best_prefix_len
        )?;
    }
    Ok(())
}

/// Metrics as written by `evaluate`, `optimize` and `apply`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub seed: u64,
    #[serde(flatten)]
    pub metrics: Metrics,
}

pub fn write_metrics_csv(w: &mut impl Write, record: &MetricsRecord) -> std::io::Result<()> {
    let m = &record.metrics;
    seed_header(w, record.seed)?;
    writeln!(w, "precision,recall,f1,predicted,predicted_possible,predicted_sure,sure")?;
    writeln!(
        w,
        "{},{},{},{},{},{},{}",
        m.precision, m.recall, m.f1, m.predicted, m.predicted_possible, m.predicted_sure, m.sure
    )
}

/// Serialized optimizer run: the settings it used and the state reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub seed: u64,
    pub config: OptimizerConfig,
    pub space: SearchSpace,
    pub state: OptimizerState,
}

impl StateFile {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn links(v: &[(usize, usize, usize)]) -> AlignmentSet {
        v.iter().map(|&(s, i, j)| Link::new(s, i, j)).collect()
    }

    #[test]
    fn parallel_examples() {
        let c = load_parallel("a b\n".as_bytes(), "x y z\n".as_bytes(), CorpusMarkup::Plain).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.pairs()[0].source(), ["a", "b"]);
        assert_eq!(c.pairs()[0].target(), ["x", "y", "z"]);

        let e = load_parallel("a\n".as_bytes(), "x\ny\n".as_bytes(), CorpusMarkup::Plain).unwrap_err();
        assert!(e.to_string().contains("1") && e.to_string().contains("2"), "{e}");

        match load_parallel("a b\n\n".as_bytes(), "x\ny\n".as_bytes(), CorpusMarkup::Plain) {
            Err(Error::Parse { what, line, .. }) => assert_eq!((what.as_str(), line), ("source", 2)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wpt_markup() {
        let c = load_parallel(
            "<s snum=0001> the house </s>\n".as_bytes(),
            "<s snum=0001> la maison </s>\n".as_bytes(),
            CorpusMarkup::Wpt,
        )
        .unwrap();
        assert_eq!(c.pairs()[0].target(), ["la", "maison"]);
        assert!(load_parallel("plain\n".as_bytes(), "<s snum=1> x </s>\n".as_bytes(), CorpusMarkup::Wpt).is_err());
    }

    #[test]
    fn gold_examples() {
        let g = read_gold_naacl("1 1 1 S\n".as_bytes(), true).unwrap();
        assert_eq!(g.sure(), &links(&[(0, 0, 0)]));
        assert_eq!(g.possible(), &links(&[(0, 0, 0)]));

        let g = read_gold_naacl("3 2 5 P\n".as_bytes(), true).unwrap();
        assert!(g.sure().is_empty());
        assert_eq!(g.possible(), &links(&[(2, 1, 4)]));

        let g = read_gold_naacl("1 1 1\n".as_bytes(), true).unwrap();
        assert_eq!(g.sure(), &links(&[(0, 0, 0)]));

        let g = read_gold_naacl("0 0 0 S 0.9\n".as_bytes(), false).unwrap();
        assert_eq!(g.sure(), &links(&[(0, 0, 0)]));
    }

    #[test]
    fn gold_errors_name_the_line() {
        for (text, one_based) in
            [("1 1 1 S\n1 1 X\n", true), ("1 1 1 S\n1 0 1 S\n", true), ("1 1 1 S\n1 1 1 Q\n", true)]
        {
            match read_gold_naacl(text.as_bytes(), one_based) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn pharaoh_examples() {
        let p = read_pharaoh("0-0 1-2\n".as_bytes()).unwrap();
        assert_eq!(p.alignment, links(&[(0, 0, 0), (0, 1, 2)]));
        let mut out = Vec::new();
        write_pharaoh(&mut out, &AlignmentSet::new(), 2).unwrap();
        assert_eq!(out, b"\n\n");
        assert!(matches!(read_pharaoh("0-0\n1-x\n".as_bytes()), Err(Error::Parse { line: 2, .. })));
        assert!(read_pharaoh("-1\n".as_bytes()).is_err());
        assert!(read_pharaoh("1-2-3\n".as_bytes()).is_err());
    }

    #[test]
    fn merge_table_round_trip() {
        let t = MergeTable::new(vec![("a".into(), "b".into()), ("ab".into(), "</w>".into())], vec![3, 1]).unwrap();
        let mut out = Vec::new();
        write_merge_table(&mut out, &t).unwrap();
        assert_eq!(String::from_utf8(out.clone()).unwrap(), "2\na b 3\nab </w> 1\n");
        assert_eq!(read_merge_table(out.as_slice()).unwrap(), t);
        assert!(read_merge_table("3\na b\n".as_bytes()).is_err());
        assert_eq!(read_merge_table("0\n".as_bytes()).unwrap().len(), 0);
    }
}
