#![allow(dead_code)]

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use subalign_core::synthetic::{generate, SyntheticBitext, SyntheticConfig};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_subalign"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).env("RUST_LOG", "info").output().expect("binary runs")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn assert_ok(out: &Output) {
    assert!(out.status.success(), "exit {:?}\n{}", out.status.code(), stderr(out));
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Paths of a corpus written to disk.
pub struct Files {
    pub train_source: PathBuf,
    pub train_target: PathBuf,
    pub eval_source: PathBuf,
    pub eval_target: PathBuf,
    /// One-based NAACL gold over the evaluation pairs.
    pub gold: PathBuf,
    pub train_pairs: usize,
}

impl Files {
    pub fn corpus_args(&self) -> Vec<String> {
        [
            ("--source", &self.train_source),
            ("--target", &self.train_target),
            ("--eval-source", &self.eval_source),
            ("--eval-target", &self.eval_target),
            ("--gold", &self.gold),
        ]
        .iter()
        .flat_map(|(flag, path)| [flag.to_string(), path.display().to_string()])
        .collect()
    }
}

/// Writes a generated bitext as train/eval files plus gold, optionally with
/// `<s snum=..>` markup.
pub fn write_synthetic(dir: &Path, cfg: &SyntheticConfig, wpt: bool) -> (Files, SyntheticBitext) {
    let data = generate(cfg).unwrap();
    std::fs::create_dir_all(dir).unwrap();
    let line = |k: usize, toks: &[String]| {
        if wpt {
            format!("<s snum={:04}> {} </s>\n", k + 1, toks.join(" "))
        } else {
            format!("{}\n", toks.join(" "))
        }
    };
    let write = |name: &str, range: std::ops::Range<usize>, source: bool| -> PathBuf {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        for (k, pair) in data.corpus.pairs()[range.clone()].iter().enumerate() {
            let toks = if source { pair.source() } else { pair.target() };
            f.write_all(line(k, toks).as_bytes()).unwrap();
        }
        path
    };
    let n = cfg.train_pairs;
    let total = data.corpus.len();
    let files = Files {
        train_source: write("train.src", 0..n, true),
        train_target: write("train.tgt", 0..n, false),
        eval_source: write("eval.src", n..total, true),
        eval_target: write("eval.tgt", n..total, false),
        gold: dir.join("gold.naacl"),
        train_pairs: n,
    };
    let mut g = std::fs::File::create(&files.gold).unwrap();
    for l in data.gold.sure().iter() {
        writeln!(g, "{} {} {} S", l.sentence - n + 1, l.source + 1, l.target + 1).unwrap();
    }
    (files, data)
}

pub fn small_config(seed: u64) -> SyntheticConfig {
    SyntheticConfig { train_pairs: 300, eval_pairs: 60, content_words: 150, seed, ..SyntheticConfig::default() }
}
